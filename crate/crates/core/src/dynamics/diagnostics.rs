use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Time series with a fixed set of named columns after the time column `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    columns: Vec<String>,
    times: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl Diagnostics {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            times: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Appends a row; times must increase strictly.
    pub fn push(&mut self, t: f64, values: Vec<f64>) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::Shape {
                context: "Diagnostics::push",
                expected: self.columns.len(),
                got: values.len(),
            });
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::param("t", format!("diagnostic time {t} does not follow {last}")));
            }
        }
        self.times.push(t);
        self.rows.push(values);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn first(&self, name: &str) -> Option<f64> {
        self.column(name)?.first().copied()
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        self.column(name)?.last().copied()
    }

    /// `max_t |q(t) - q(0)| / max(|q(0)|, tiny)`.
    pub fn relative_drift(&self, name: &str) -> Option<f64> {
        let col = self.column(name)?;
        let q0 = *col.first()?;
        let scale = q0.abs().max(1e-300);
        Some(col.iter().map(|q| (q - q0).abs()).fold(0.0, f64::max) / scale)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (t, row) in self.times.iter().zip(&self.rows) {
            let mut rec = vec![format_float(*t)];
            rec.extend(row.iter().map(|x| format_float(*x)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Shortest round-trip representation, so reruns compare byte for byte.
pub(crate) fn format_float(x: f64) -> String {
    format!("{x:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_increasing_time() {
        let mut d = Diagnostics::new(["E"]);
        d.push(0.0, vec![1.0]).unwrap();
        assert!(d.push(0.0, vec![1.0]).is_err());
        assert!(d.push(1.0, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn drift_and_csv() {
        let mut d = Diagnostics::new(["E", "N"]);
        d.push(0.0, vec![2.0, 1.0]).unwrap();
        d.push(0.5, vec![2.002, 1.0]).unwrap();
        d.push(1.0, vec![1.999, 1.0]).unwrap();
        assert!((d.relative_drift("E").unwrap() - 1e-3).abs() < 1e-12);
        assert_eq!(d.relative_drift("N"), Some(0.0));
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,E,N\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
