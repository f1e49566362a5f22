//! Rectangular numeric results and their CSV form.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Extra `#` lines written after the config echo (fits, derived values).
    pub notes: Vec<String>,
}

impl ResultTable {
    pub fn new(header: &[&str]) -> Self {
        ResultTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Panics if the row arity differs from the header.
    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row arity does not match header"
        );
        self.rows.push(row);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// CSV text: `#` metadata lines, the column header, then one line per row.
    /// Numbers use the shortest representation that round-trips.
    pub fn to_csv(&self, meta: &[String]) -> String {
        let mut s = String::new();
        for m in meta.iter().chain(&self.notes) {
            let _ = writeln!(s, "# {m}");
        }
        s.push_str(&self.header.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| number(x)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Shortest round-trip form; exponent notation when the plain form is long.
pub fn number(x: f64) -> String {
    let plain = format!("{x}");
    if plain.len() > 24 {
        format!("{x:e}")
    } else {
        plain
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_and_round_trip() {
        let mut t = ResultTable::new(&["n", "value"]);
        t.push(vec![64.0, 0.1 + 0.2]);
        t.push(vec![128.0, 1e-300]);
        t.note("fit slope = -0.5");
        let csv = t.to_csv(&["experiment = matching".into()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# experiment = matching");
        assert_eq!(lines[1], "# fit slope = -0.5");
        assert_eq!(lines[2], "n,value");
        assert_eq!(lines[3], "64,0.30000000000000004");
        let back: f64 = lines[4].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, 1e-300);
        assert_eq!(number(6.614944416691642e-5), "0.00006614944416691642");
        assert_eq!(number(1e-300), "1e-300");
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
        assert_eq!(t.column("n").unwrap(), vec![64.0, 128.0]);
    }

    #[test]
    #[should_panic]
    fn ragged_rows_panic() {
        ResultTable::new(&["a", "b"]).push(vec![1.0]);
    }
}
