//! Plain string tables read from and written to CSV.

use std::path::Path;

use crate::{Error, Result};

/// A header plus rows of raw string cells. Missing cells are empty strings.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Index of a column, compared case-insensitively.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.trim().eq_ignore_ascii_case(name))
    }

    pub fn column(&self, idx: usize) -> impl Iterator<Item = &str> + '_ {
        self.rows.iter().map(move |r| r[idx].as_str())
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Table {
        Table {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn read_csv(path: &Path) -> Result<Table> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .comment(Some(b'#'))
            .from_reader(reader);
        let columns: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let width = columns.len();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let mut row: Vec<String> = rec.iter().map(|c| c.trim().to_string()).collect();
            row.resize(width, String::new());
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_writer(std::io::BufWriter::new(file))
    }

    pub fn to_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        wtr.write_record(&self.columns)?;
        for row in &self.rows {
            wtr.write_record(row)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// A table with a binary label column split off.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTable {
    pub table: Table,
    pub labels: Vec<u8>,
}

impl LabeledTable {
    /// Removes `label_column` from `table` and parses it as 0/1.
    pub fn from_table(mut table: Table, label_column: &str) -> Result<Self> {
        let idx = table
            .column_index(label_column)
            .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
        table.columns.remove(idx);
        let mut labels = Vec::with_capacity(table.rows.len());
        for (i, row) in table.rows.iter_mut().enumerate() {
            let raw = row.remove(idx);
            let label = match raw.trim() {
                "0" | "0.0" | "false" | "normal" => 0,
                "1" | "1.0" | "true" | "anomaly" => 1,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "row {}: label {other:?} is not 0/1",
                        i + 1
                    )))
                }
            };
            labels.push(label);
        }
        Ok(LabeledTable { table, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> LabeledTable {
        LabeledTable {
            table: self.table.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Fixed six-decimal rendering used for every float written to CSV.
///
/// `format!` rounds the exact binary value, so only exactly representable
/// halfway cases are ties and those go to the even digit.
pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_header_and_pads_short_rows() {
        let t = Table::from_reader("Maker,Price,Color\nAudi,100,\nBMW,200\n".as_bytes()).unwrap();
        assert_eq!(t.columns, vec!["Maker", "Price", "Color"]);
        assert_eq!(t.rows[1], vec!["BMW", "200", ""]);
        assert_eq!(t.column_index("price"), Some(1));
    }

    #[test]
    fn splits_label_column() {
        let t = Table::from_reader("a,label\nx,0\ny,1\n".as_bytes()).unwrap();
        let lt = LabeledTable::from_table(t, "label").unwrap();
        assert_eq!(lt.labels, vec![0, 1]);
        assert_eq!(lt.table.columns, vec!["a"]);
        let bad = Table::from_reader("a,label\nx,2\n".as_bytes()).unwrap();
        assert!(LabeledTable::from_table(bad, "label").is_err());
    }

    #[test]
    fn six_decimal_rounding() {
        assert_eq!(fmt6(23.0), "23.000000");
        assert_eq!(format!("{:.1}", 0.25), "0.2");
        assert_eq!(format!("{:.1}", 0.75), "0.8");
        assert_eq!(fmt6(-0.0), "0.000000");
    }
}
