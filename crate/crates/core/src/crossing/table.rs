use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Missing,
    Number(f64),
    Category(String),
}

/// In-memory tabular data with named, typed columns.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub names: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(names: Vec<String>, kinds: Vec<ColumnKind>) -> Self {
        assert_eq!(names.len(), kinds.len());
        Self { names, kinds, rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn push_row(&mut self, row: Vec<Value>) -> Result<(), String> {
        if row.len() != self.names.len() {
            return Err(alloc::format!("row has {} values, table has {} columns", row.len(), self.names.len()));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn push_column(&mut self, name: String, kind: ColumnKind, values: impl IntoIterator<Item = Value>) -> Result<(), String> {
        if self.column(&name).is_some() {
            return Err(alloc::format!("column '{name}' already exists"));
        }
        let mut n = 0;
        let mut it = values.into_iter();
        for row in &mut self.rows {
            row.push(it.next().ok_or_else(|| String::from("too few values for new column"))?);
            n += 1;
        }
        if it.next().is_some() || n != self.rows.len() {
            return Err(String::from("too many values for new column"));
        }
        self.names.push(name);
        self.kinds.push(kind);
        Ok(())
    }

    /// Numeric values of a column; missing or non-numeric cells become NaN.
    pub fn numeric_column(&self, c: usize) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match &r[c] {
                Value::Number(v) => *v,
                Value::Category(s) => s.parse().unwrap_or(f64::NAN),
                Value::Missing => f64::NAN,
            })
            .collect()
    }
}
