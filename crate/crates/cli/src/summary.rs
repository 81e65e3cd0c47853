//! Plot series (CSV) and the fixed-width summary table.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

#[derive(Debug, Clone)]
pub enum Cell {
    Int(usize),
    Num(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    /// Full round-trip precision for CSV.
    fn exact(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format!("{x:e}"),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    /// Six significant digits for the terminal.
    fn short(&self) -> String {
        match self {
            Cell::Num(x) if x.is_finite() => format!("{x:.5e}"),
            other => other.exact(),
        }
    }
}

pub struct Series {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Series {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::exact))?;
        }
        w.flush()?;
        Ok(())
    }
}

const WIDTH: usize = 14;

pub struct Summary {
    scalars: Vec<(String, Cell)>,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Summary {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            scalars: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn scalar(&mut self, name: &str, value: Cell) {
        self.scalars.push((name.to_string(), value));
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn render<W: Write>(&self, title: &str, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{title}")?;
        for (name, value) in &self.scalars {
            writeln!(w, "  {name:<24}{:>WIDTH$}", value.short())?;
        }
        if !self.columns.is_empty() && !self.rows.is_empty() {
            writeln!(w)?;
            let header: String = self.columns.iter().map(|c| format!("{c:>WIDTH$}")).collect();
            writeln!(w, "{header}")?;
            for row in &self.rows {
                let line: String = row.iter().map(|c| format!("{:>WIDTH$}", c.short())).collect();
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(Cell::Num(1234.5678).short(), "1.23457e3");
        assert_eq!(Cell::Num(-0.000123456789).short(), "-1.23457e-4");
        assert_eq!(Cell::Num(f64::NAN).short(), "NaN");
        assert_eq!(Cell::Int(7).short(), "7");
    }

    #[test]
    fn table_is_fixed_width() {
        let mut s = Summary::new(&["sample", "cost", "margin"]);
        s.scalar("member", Cell::Bool(true));
        s.push(vec![Cell::Int(0), Cell::Num(2.0), Cell::Num(0.0)]);
        s.push(vec![Cell::Int(11), Cell::Num(-1.5e-12), Cell::Num(3.25)]);
        let mut out = Vec::new();
        s.render("title", &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "title");
        assert_eq!(lines[1], format!("  {:<24}{:>14}", "member", "true"));
        assert!(lines[3..].iter().all(|l| l.len() == 3 * WIDTH));
        assert_eq!(lines[5], format!("{:>14}{:>14}{:>14}", "11", "-1.50000e-12", "3.25000e0"));
    }

    #[test]
    fn series_round_trips_exact_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let mut s = Series::new(&["i", "x"]);
        s.push(vec![Cell::Int(0), Cell::Num(0.1 + 0.2)]);
        s.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let value: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(value, 0.1 + 0.2);
    }
}
