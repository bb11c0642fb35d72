use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// What produced an encoded column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnOrigin {
    Numerical,
    Label,
    OneHot,
    Bin,
    Gel,
    Embedding,
    EmbeddingIndex,
}

impl ColumnOrigin {
    fn as_str(self) -> &'static str {
        match self {
            ColumnOrigin::Numerical => "numerical",
            ColumnOrigin::Label => "label",
            ColumnOrigin::OneHot => "one_hot",
            ColumnOrigin::Bin => "bin",
            ColumnOrigin::Gel => "gel",
            ColumnOrigin::Embedding => "embedding",
            ColumnOrigin::EmbeddingIndex => "embedding_index",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "numerical" => ColumnOrigin::Numerical,
            "label" => ColumnOrigin::Label,
            "one_hot" => ColumnOrigin::OneHot,
            "bin" => ColumnOrigin::Bin,
            "gel" => ColumnOrigin::Gel,
            "embedding" => ColumnOrigin::Embedding,
            "embedding_index" => ColumnOrigin::EmbeddingIndex,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub origin: ColumnOrigin,
    /// Category, bin id or component index, when the column has one.
    pub detail: Option<String>,
}

impl Provenance {
    pub fn new(source: &str, origin: ColumnOrigin, detail: Option<String>) -> Self {
        Provenance {
            source: source.to_string(),
            origin,
            detail,
        }
    }

    /// Column name used in CSV headers.
    pub fn header(&self) -> String {
        match &self.detail {
            Some(d) => format!("{}={}", self.source, d),
            None => self.source.clone(),
        }
    }
}

/// Dense `n x d` encoding of a table with per-column provenance. Labels ride
/// alongside and are never part of `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub values: Array2<f64>,
    pub provenance: Vec<Provenance>,
    pub labels: Option<Vec<u8>>,
}

const CSV_MAGIC: &str = "# auditbench encoded matrix v1";

impl EncodedMatrix {
    pub fn new(values: Array2<f64>, provenance: Vec<Provenance>) -> Self {
        debug_assert_eq!(values.ncols(), provenance.len());
        EncodedMatrix {
            values,
            provenance,
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// First column whose source is `name` and has no detail.
    pub fn column_named(&self, name: &str) -> Option<usize> {
        self.provenance
            .iter()
            .position(|p| p.source == name && p.detail.is_none())
    }

    /// Writes provenance as header comments, then a header row and values in
    /// shortest round-trip float form. A trailing `label` column is added when
    /// labels are present.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<encoded csv>", e);
        writeln!(out, "{CSV_MAGIC}").map_err(io)?;
        for (i, p) in self.provenance.iter().enumerate() {
            writeln!(
                out,
                "# col {i}\t{}\t{}\t{}",
                p.source,
                p.origin.as_str(),
                p.detail.as_deref().unwrap_or("")
            )
            .map_err(io)?;
        }
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header: Vec<String> = self.provenance.iter().map(Provenance::header).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        wtr.write_record(&header)?;
        let mut cells = Vec::with_capacity(header.len());
        for (i, row) in self.values.rows().into_iter().enumerate() {
            cells.clear();
            cells.extend(row.iter().map(|v| format!("{v:?}")));
            if let Some(labels) = &self.labels {
                cells.push(labels[i].to_string());
            }
            wtr.write_record(&cells)?;
        }
        wtr.flush().map_err(io)?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(&text[..])
    }

    pub fn read_csv<R: BufRead>(mut input: R) -> Result<Self> {
        let bad = |m: &str| Error::InvalidInput(format!("encoded csv: {m}"));
        let mut provenance = Vec::new();
        let mut line = String::new();
        let mut body = Vec::new();
        loop {
            line.clear();
            let n = input
                .read_line(&mut line)
                .map_err(|e| Error::io("<encoded csv>", e))?;
            if n == 0 {
                break;
            }
            if let Some(rest) = line.trim_end_matches('\n').strip_prefix("# col ") {
                let parts: Vec<&str> = rest.split('\t').collect();
                if parts.len() != 4 {
                    return Err(bad("malformed provenance comment"));
                }
                let origin = ColumnOrigin::parse(parts[2]).ok_or_else(|| bad("unknown origin"))?;
                let detail = (!parts[3].is_empty()).then(|| parts[3].to_string());
                provenance.push(Provenance::new(parts[1], origin, detail));
            } else if !line.starts_with('#') {
                body.extend_from_slice(line.as_bytes());
                input
                    .read_to_end(&mut body)
                    .map_err(|e| Error::io("<encoded csv>", e))?;
                break;
            }
        }
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(&body[..]);
        let header = rdr.headers()?.clone();
        let d = provenance.len();
        let has_labels = match header.len() {
            n if n == d => false,
            n if n == d + 1 && &header[d] == "label" => true,
            _ => return Err(bad("header does not match provenance")),
        };
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let mut n = 0;
        for rec in rdr.records() {
            let rec = rec?;
            for j in 0..d {
                data.push(rec[j].parse::<f64>().map_err(|_| bad("non-numeric cell"))?);
            }
            if has_labels {
                labels.push(rec[d].parse::<u8>().map_err(|_| bad("bad label"))?);
            }
            n += 1;
        }
        let values = Array2::from_shape_vec((n, d), data).map_err(|e| bad(&e.to_string()))?;
        Ok(EncodedMatrix {
            values,
            provenance,
            labels: has_labels.then_some(labels),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn csv_roundtrip_is_exact() {
        let m = EncodedMatrix::new(
            array![[0.1, -2.5e-17], [1.0 / 3.0, 7.0]],
            vec![
                Provenance::new("color", ColumnOrigin::OneHot, Some("Red, dark".into())),
                Provenance::new("price", ColumnOrigin::Numerical, None),
            ],
        )
        .with_labels(vec![0, 1]);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = EncodedMatrix::read_csv(&buf[..]).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.column_named("price"), Some(1));
    }
}
