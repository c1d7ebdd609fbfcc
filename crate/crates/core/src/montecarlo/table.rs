use std::io::Write;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Float(Vec<f64>),
    Count(Vec<u64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Float(v) => v.len(),
            Column::Count(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell(&self, row: usize) -> String {
        match self {
            Column::Float(v) => format_float(v[row]),
            Column::Count(v) => v[row].to_string(),
        }
    }
}

/// Seventeen significant digits, so every value round-trips exactly.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Named equal-length columns plus free-form metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    columns: Vec<(String, Column)>,
    pub metadata: Map<String, Value>,
}

impl ResultTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, column: Column) -> Result<()> {
        let name = name.into();
        if let Some((_, first)) = self.columns.first() {
            if first.len() != column.len() {
                return Err(Error::DimensionMismatch(format!(
                    "column {name} has {} rows, table has {}",
                    column.len(),
                    first.len()
                )));
            }
        }
        if self.column(&name).is_some() {
            return Err(Error::invalid(name, "duplicate column"));
        }
        self.columns.push((name, column));
        Ok(())
    }

    pub fn push_float(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        self.push(name, Column::Float(values))
    }

    pub fn push_count(&mut self, name: impl Into<String>, values: Vec<u64>) -> Result<()> {
        self.push(name, Column::Count(values))
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |(_, c)| c.len())
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    pub fn floats(&self, name: &str) -> Option<&[f64]> {
        match self.column(name)? {
            Column::Float(v) => Some(v),
            Column::Count(_) => None,
        }
    }

    pub fn counts(&self, name: &str) -> Option<&[u64]> {
        match self.column(name)? {
            Column::Count(v) => Some(v),
            Column::Float(_) => None,
        }
    }

    /// A table holding only `names`, in that order; metadata is kept.
    pub fn select(&self, names: &[&str]) -> Result<ResultTable> {
        let mut out = ResultTable { columns: Vec::new(), metadata: self.metadata.clone() };
        for &name in names {
            let col = self
                .column(name)
                .ok_or_else(|| Error::invalid(name, "no such column"))?;
            out.push(name, col.clone())?;
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.names().join(","))?;
        for row in 0..self.rows() {
            let cells: Vec<String> = self.columns.iter().map(|(_, c)| c.cell(row)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_and_round_trip() {
        let mut t = ResultTable::new();
        t.push_float("x", vec![0.1, 1.0 / 3.0, f64::NAN]).unwrap();
        t.push_count("n", vec![0, 5, 12]).unwrap();
        let csv = t.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,n");
        assert_eq!(lines[1], "1.0000000000000001e-1,0");
        assert_eq!(lines[3], "NaN,12");
        let back: f64 = lines[2].split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn ragged_and_duplicate_columns_rejected() {
        let mut t = ResultTable::new();
        t.push_float("a", vec![1.0, 2.0]).unwrap();
        assert!(t.push_float("b", vec![1.0]).is_err());
        assert!(t.push_float("a", vec![1.0, 2.0]).is_err());
        let s = t.select(&["a"]).unwrap();
        assert_eq!(s.rows(), 2);
        assert!(t.select(&["zz"]).is_err());
    }
}
