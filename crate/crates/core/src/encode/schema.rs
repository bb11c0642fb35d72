use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::table::Table;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numerical,
    Categorical,
    Ordinal,
}

impl ColumnKind {
    pub fn is_categorical(self) -> bool {
        !matches!(self, ColumnKind::Numerical)
    }
}

/// One fitted column: kind, vocabulary for categorical columns, training
/// mean/std for numerical ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub vocabulary: Vec<String>,
    pub mean: f64,
    pub std: f64,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl ColumnSchema {
    fn categorical(name: &str, kind: ColumnKind, mut vocabulary: Vec<String>) -> Self {
        if kind == ColumnKind::Ordinal && vocabulary.iter().all(|v| v.parse::<f64>().is_ok()) {
            vocabulary.sort_by(|a, b| {
                let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
                x.total_cmp(&y).then_with(|| a.cmp(b))
            });
        } else {
            vocabulary.sort();
        }
        let mut col = ColumnSchema {
            name: name.to_string(),
            kind,
            vocabulary,
            mean: 0.0,
            std: 1.0,
            index: HashMap::new(),
        };
        col.rebuild_index();
        col
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
    }

    pub fn cardinality(&self) -> usize {
        self.vocabulary.len()
    }

    /// Vocabulary index, or `None` for a category unseen at fit time.
    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.index.get(value).copied()
    }

    /// Standardized value; missing or unparsable cells map to the mean.
    pub fn standardize(&self, raw: &str) -> f64 {
        match raw.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => (v - self.mean) / self.std,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SchemaData")]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
}

#[derive(Deserialize)]
struct SchemaData {
    columns: Vec<ColumnSchema>,
}

impl From<SchemaData> for Schema {
    fn from(data: SchemaData) -> Self {
        let mut schema = Schema {
            columns: data.columns,
        };
        schema.rebuild_indices();
        schema
    }
}

impl Schema {
    pub fn categorical(&self) -> impl Iterator<Item = &ColumnSchema> {
        self.columns.iter().filter(|c| c.kind.is_categorical())
    }

    pub fn numerical(&self) -> impl Iterator<Item = &ColumnSchema> {
        self.columns.iter().filter(|c| !c.kind.is_categorical())
    }

    pub fn n_categorical(&self) -> usize {
        self.categorical().count()
    }

    pub fn n_numerical(&self) -> usize {
        self.numerical().count()
    }

    pub fn total_cardinality(&self) -> usize {
        self.categorical().map(|c| c.cardinality()).sum()
    }

    fn rebuild_indices(&mut self) {
        for c in &mut self.columns {
            c.rebuild_index();
        }
    }

    /// Positions of each schema column in `table`.
    pub fn locate(&self, table: &Table) -> Result<Vec<usize>> {
        self.columns
            .iter()
            .map(|c| {
                table
                    .columns
                    .iter()
                    .position(|t| t == &c.name)
                    .ok_or_else(|| Error::MissingColumn(c.name.clone()))
            })
            .collect()
    }

    /// SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn is_numeric(values: &[&str]) -> bool {
    let mut seen = false;
    for v in values {
        if v.is_empty() {
            continue;
        }
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => seen = true,
            _ => return false,
        }
    }
    seen
}

/// Infers column kinds (numeric-parsable means numerical unless overridden)
/// and builds vocabularies and standardization statistics from `table`.
pub fn fit_schema(table: &Table, overrides: &[(String, ColumnKind)]) -> Result<Schema> {
    if table.columns.is_empty() || table.is_empty() {
        return Err(Error::InvalidInput("cannot fit a schema on an empty table".into()));
    }
    let mut columns = Vec::with_capacity(table.columns.len());
    for (j, name) in table.columns.iter().enumerate() {
        let values: Vec<&str> = table.column(j).collect();
        if values.iter().all(|v| v.is_empty()) {
            return Err(Error::InvalidInput(format!("column {name:?} has no observed values")));
        }
        let inferred = if is_numeric(&values) {
            ColumnKind::Numerical
        } else {
            ColumnKind::Categorical
        };
        let kind = overrides
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, k)| *k)
            .unwrap_or(inferred);
        let col = if kind.is_categorical() {
            let mut vocab: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            vocab.sort();
            vocab.dedup();
            ColumnSchema::categorical(name, kind, vocab)
        } else {
            let nums: Vec<f64> = values
                .iter()
                .filter_map(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .collect();
            if nums.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "column {name:?} is declared numerical but has no numeric values"
                )));
            }
            let n = nums.len() as f64;
            let mean = nums.iter().sum::<f64>() / n;
            let var = nums.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = if var > 0.0 { var.sqrt() } else { 1.0 };
            ColumnSchema {
                name: name.clone(),
                kind,
                vocabulary: Vec::new(),
                mean,
                std,
                index: HashMap::new(),
            }
        };
        columns.push(col);
    }
    Ok(Schema { columns })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(csv: &str) -> Table {
        Table::from_reader(csv.as_bytes()).unwrap()
    }

    #[test]
    fn lexicographic_vocabulary() {
        let s = fit_schema(&table("color\nRed\nBlue\nGelb\nRed\n"), &[]).unwrap();
        let c = &s.columns[0];
        assert_eq!(c.kind, ColumnKind::Categorical);
        assert_eq!(c.vocabulary, vec!["Blue", "Gelb", "Red"]);
        assert_eq!(c.index_of("Red"), Some(2));
        assert_eq!(c.index_of("Green"), None);
    }

    #[test]
    fn kind_inference() {
        let s = fit_schema(&table("price,mixed\n100,3\n250.5,abc\n"), &[]).unwrap();
        assert_eq!(s.columns[0].kind, ColumnKind::Numerical);
        assert_eq!(s.columns[1].kind, ColumnKind::Categorical);
        let s = fit_schema(&table("year\n2001\n2003\n"), &[("year".into(), ColumnKind::Categorical)]).unwrap();
        assert_eq!(s.columns[0].vocabulary, vec!["2001", "2003"]);
    }

    #[test]
    fn ordinal_sorts_numerically() {
        let s = fit_schema(&table("doors\n10\n2\n3\n"), &[("doors".into(), ColumnKind::Ordinal)]).unwrap();
        assert_eq!(s.columns[0].vocabulary, vec!["2", "3", "10"]);
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(fit_schema(&table("a,b\n"), &[]).is_err());
        assert!(fit_schema(&table("a,b\n1,\n2,\n"), &[]).is_err());
    }

    #[test]
    fn hash_survives_json_roundtrip() {
        let s = fit_schema(&table("a,b\nx,1\ny,2\n"), &[]).unwrap();
        let back: Schema = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s.hash(), back.hash());
        assert_eq!(s, back);
        assert_eq!(back.columns[0].index_of("y"), Some(1));
    }
}
