//! Numeric CSV tables with a provenance comment line.
//!
//! ```text
//! # config_hash=<hex>
//! step,mean_gold
//! 10,-0.25
//! ```

use std::io::Write;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub config_hash: Option<String>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            config_hash: None,
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        if let Some(h) = &self.config_hash {
            writeln!(w, "# config_hash={h}")?;
        }
        writeln!(w, "{}", self.header.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("ascii")
    }

    /// Parse any numeric table; the first non-comment line is the header.
    pub fn parse(text: &str) -> Result<Table> {
        let mut config_hash = None;
        let mut header: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(h) = comment.trim().strip_prefix("config_hash=") {
                    config_hash = Some(h.to_string());
                }
                continue;
            }
            match &header {
                None => header = Some(line.split(',').map(|s| s.trim().to_string()).collect()),
                Some(h) => {
                    let cells: Vec<&str> = line.split(',').collect();
                    if cells.len() != h.len() {
                        return Err(Error::Schema {
                            line: line_no,
                            message: format!("expected {} columns, found {}", h.len(), cells.len()),
                        });
                    }
                    let mut row = Vec::with_capacity(cells.len());
                    for (cell, name) in cells.iter().zip(h) {
                        row.push(cell.trim().parse::<f64>().map_err(|_| Error::Schema {
                            line: line_no,
                            message: format!("column `{name}`: `{}` is not a number", cell.trim()),
                        })?);
                    }
                    rows.push(row);
                }
            }
        }
        let header = header.ok_or(Error::Schema {
            line: 1,
            message: "missing header line".into(),
        })?;
        Ok(Table {
            header,
            rows,
            config_hash,
        })
    }

    /// Parse and require the given columns to be present.
    pub fn parse_with(text: &str, required: &[&str]) -> Result<Table> {
        let t = Table::parse(text)?;
        let missing: Vec<&str> = required
            .iter()
            .copied()
            .filter(|c| t.column(c).is_none())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Schema {
                line: header_line(text),
                message: format!(
                    "missing column(s) {}; found {}",
                    missing.join(", "),
                    t.header.join(", ")
                ),
            });
        }
        Ok(t)
    }
}

fn header_line(text: &str) -> usize {
    text.lines()
        .position(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map_or(1, |i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_hash_and_values() {
        let mut t = Table::new(&["a", "b"]);
        t.config_hash = Some("abc".into());
        t.push(vec![1.0, -0.125]);
        t.push(vec![2.0, 1e-300]);
        let back = Table::parse(&t.to_csv()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn missing_column_names_it() {
        let err = Table::parse_with("# x\na,b\n1,2\n", &["a", "c"]).unwrap_err();
        match err {
            Error::Schema { line, message } => {
                assert_eq!(line, 2);
                assert!(
                    message.contains("`c`") || message.contains(" c"),
                    "{message}"
                );
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn bad_cell_reports_line_and_column() {
        let err = Table::parse("a,b\n1,2\n3,x\n").unwrap_err();
        assert!(matches!(err, Error::Schema { line: 3, ref message } if message.contains("`b`")));
    }
}
