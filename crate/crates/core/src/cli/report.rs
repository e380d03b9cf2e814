use std::fmt::Write as _;

/// Output layout for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Space-aligned columns.
    Table,
    Csv,
}

/// A titled grid of strings rendered as an aligned table or as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(title: impl Into<String>, header: &[&str]) -> Self {
        Self { title: title.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Csv => {
                for r in std::iter::once(&self.header).chain(&self.rows) {
                    out.push_str(&r.join(","));
                    out.push('\n');
                }
            }
            Format::Table => {
                let widths: Vec<usize> = (0..self.header.len())
                    .map(|c| std::iter::once(&self.header).chain(&self.rows).map(|r| r[c].len()).max().unwrap_or(0))
                    .collect();
                writeln!(out, "{}", self.title).unwrap();
                for r in std::iter::once(&self.header).chain(&self.rows) {
                    let cells: Vec<String> = r.iter().zip(&widths).map(|(c, &w)| format!("{c:>w$}")).collect();
                    writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
                }
            }
        }
        out
    }
}

pub fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}
