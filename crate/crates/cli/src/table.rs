//! Report tables written twice: rounded to four decimals for reading and at
//! full precision for machines.

use std::path::Path;

use claimscore::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
    Missing,
}

impl Cell {
    fn render(&self, rounded: bool) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) if rounded => format!("{x:.4}"),
            Cell::Num(x) => x.to_string(),
            Cell::Missing => String::new(),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<u32> for Cell {
    fn from(i: u32) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<u64> for Cell {
    fn from(i: u64) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_to<W: std::io::Write>(&self, writer: W, rounded: bool) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.header)?;
        for row in &self.rows {
            wtr.write_record(row.iter().map(|c| c.render(rounded)))?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// `<stem>.csv` rounded and `<stem>.full.csv` at full precision.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_to(std::fs::File::create(dir.join(format!("{stem}.csv")))?, true)?;
        self.write_to(std::fs::File::create(dir.join(format!("{stem}.full.csv")))?, false)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounded_and_full() {
        let mut t = Table::new(["term", "estimate"]);
        t.push(vec!["a".into(), 0.123456789.into()]);
        t.push(vec!["b".into(), Cell::Missing]);
        let mut rounded = Vec::new();
        t.write_to(&mut rounded, true).unwrap();
        assert_eq!(String::from_utf8(rounded).unwrap(), "term,estimate\na,0.1235\nb,\n");
        let mut full = Vec::new();
        t.write_to(&mut full, false).unwrap();
        assert_eq!(String::from_utf8(full).unwrap(), "term,estimate\na,0.123456789\nb,\n");
    }
}
