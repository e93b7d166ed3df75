//! Minimal CSV tables. Floats are written with 17 significant digits so every
//! double round-trips exactly.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(u64),
    S(String),
    B(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map(Cell::F).unwrap_or(Cell::Empty)
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format_float(*v),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Columns closing every dataset row.
pub const STANDARD_COLUMNS: [&str; 8] = [
    "alpha",
    "provenance",
    "mmse",
    "mmse_stderr",
    "rate_nats",
    "rate_bits",
    "rate_stderr",
    "converged",
];

pub fn standard_cells(
    alpha: Option<f64>,
    provenance: &str,
    mmse: f64,
    mmse_stderr: f64,
    rate_nats: f64,
    rate_stderr: f64,
    converged: bool,
) -> Vec<Cell> {
    vec![
        alpha.into(),
        provenance.into(),
        mmse.into(),
        mmse_stderr.into(),
        rate_nats.into(),
        (rate_nats / std::f64::consts::LN_2).into(),
        rate_stderr.into(),
        converged.into(),
    ]
}

pub fn header_with_standard(specific: &[&'static str]) -> Vec<&'static str> {
    let mut h = specific.to_vec();
    h.extend_from_slice(&STANDARD_COLUMNS);
    h
}
