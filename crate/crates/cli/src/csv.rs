//! CSV output with fixed per-column formatting: rates to 6 decimals,
//! probabilities in scientific notation with 3 significant digits, other
//! reals to 6 decimals. Missing values are empty fields.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

pub fn real(x: f64) -> String {
    format!("{x:.6}")
}

pub fn rate(x: f64) -> String {
    format!("{x:.6}")
}

pub fn prob(x: f64) -> String {
    format!("{x:.2e}")
}

pub fn opt(x: Option<f64>, f: fn(f64) -> String) -> String {
    x.filter(|v| v.is_finite()).map(f).unwrap_or_default()
}

pub struct Sink {
    out: Box<dyn Write>,
}

impl Sink {
    /// Writes to `path` (truncating) or to stdout, header first.
    pub fn create(path: Option<&Path>, header: &[&str]) -> Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
            None => Box::new(io::stdout().lock()),
        };
        let mut sink = Self { out };
        sink.row(header.iter().map(|s| s.to_string()).collect())?;
        Ok(sink)
    }

    /// Appends to `path`, writing the header only if the file is new or
    /// empty. An existing header must match.
    pub fn append(path: &Path, header: &[&str]) -> Result<Self> {
        let existing = read_rows(path)?;
        if let Some(first) = existing.first() {
            if first.join(",") != header.join(",") {
                bail!("{} has a different header: {}", path.display(), first.join(","));
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        let mut sink = Self { out: Box::new(file) };
        if existing.is_empty() {
            sink.row(header.iter().map(|s| s.to_string()).collect())?;
        }
        Ok(sink)
    }

    pub fn row(&mut self, fields: Vec<String>) -> Result<()> {
        writeln!(self.out, "{}", fields.join(","))?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Rows of an existing CSV file (header included); empty if absent.
pub fn read_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    let mut rows = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            rows.push(line.split(',').map(str::to_string).collect());
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        assert_eq!(rate(0.48512345678), "0.485123");
        assert_eq!(prob(0.001), "1.00e-3");
        assert_eq!(prob(0.0123456), "1.23e-2");
        assert_eq!(real(213.3), "213.300000");
        assert_eq!(opt(None, real), "");
        assert_eq!(opt(Some(f64::NAN), real), "");
    }
}
