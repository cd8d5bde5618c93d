//! Deterministic CSV assembly: comma-separated, header row, '.' decimal
//! separator, LF line endings, UTF-8.

pub struct CsvTable {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: Vec<&'static str>) -> Self {
        CsvTable {
            header,
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.header.len(), "csv row arity mismatch");
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Seconds with nanosecond resolution.
pub fn format_seconds(v: f64) -> String {
    format!("{v:.9}")
}

/// Byte quantities are integral in every code path that emits them.
pub fn format_bytes(v: f64) -> String {
    format!("{v:.0}")
}

pub fn format_flops(v: f64) -> String {
    format!("{v:.6e}")
}
