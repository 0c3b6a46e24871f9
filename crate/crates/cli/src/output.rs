//! Output tree: field CSVs, whitespace-separated tables, and the JSON summary.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thermovisc::{write_field_csv, ScalarField64};

use crate::CliError;

/// Number formatting shared by every table: shortest round-trip, `NaN` for
/// missing entries (gnuplot skips them).
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".into(), num)
}

/// A gnuplot-ready table. The header line is a `#` comment so the file
/// plots as-is.
#[derive(Clone, Debug, Default)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) -> &mut Self {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
        self
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = format!("# {}\n", self.columns.join("  "));
        for r in &self.rows {
            s.push_str(&r.join("  "));
            s.push('\n');
        }
        s
    }
}

/// Owns one output directory and records every file written into it.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&mut self, rel: &str) -> Result<PathBuf, CliError> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        self.written.push(rel.to_string());
        Ok(p)
    }

    pub fn table(&mut self, rel: &str, table: &Table) -> Result<(), CliError> {
        let p = self.path(rel)?;
        fs::write(p, table.render())?;
        Ok(())
    }

    pub fn field(&mut self, rel: &str, field: &ScalarField64) -> Result<(), CliError> {
        let p = self.path(rel)?;
        let mut w = BufWriter::new(fs::File::create(p)?);
        write_field_csv(field, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn json<S: serde::Serialize>(&mut self, rel: &str, value: &S) -> Result<(), CliError> {
        let p = self.path(rel)?;
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        fs::write(p, s)?;
        Ok(())
    }

    /// Files written so far, relative to the root, in write order.
    pub fn files(&self) -> &[String] {
        &self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_table() {
        let t = Table::new(&["epsilon", "dist_theta_L1", "dist_u_H1"]);
        assert_eq!(t.render(), "# epsilon  dist_theta_L1  dist_u_H1\n");
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 12345.678] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(opt(None), "NaN");
    }
}
