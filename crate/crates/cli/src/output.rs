use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

/// 17 significant digits, so values survive a text round trip exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table with `,` separators and LF line endings.
#[derive(Debug, Clone)]
pub struct Table {
    text: String,
}

#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Int(usize),
    Float(f64),
    Empty,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        let mut text = header.join(",");
        text.push('\n');
        Table { text }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::Int(n) => write!(self.text, "{n}").unwrap(),
                Cell::Float(x) => self.text.push_str(&format_float(*x)),
                Cell::Empty => {}
            }
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.text)
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}
