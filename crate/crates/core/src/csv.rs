//! Fixed-format CSV emission: 17 significant digits, '.' decimal point.

use std::fmt::Write;

/// Round-trippable decimal for an f64, independent of locale.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

/// Accumulates rows in memory; callers write the finished text once.
#[derive(Debug, Clone)]
pub struct CsvBuf {
    text: String,
    width: usize,
}

impl CsvBuf {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text, width: header.len() }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        debug_assert_eq!(cells.len(), self.width);
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::F(x) => self.text.push_str(&fmt17(*x)),
                Cell::I(n) => write!(self.text, "{n}").unwrap(),
                Cell::U(n) => write!(self.text, "{n}").unwrap(),
                Cell::S(s) => self.text.push_str(s),
                Cell::Empty => {}
            }
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    F(f64),
    I(i64),
    U(u64),
    S(String),
    Empty,
}
