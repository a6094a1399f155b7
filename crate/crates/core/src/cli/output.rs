//! CSV and JSON writers shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use super::CliError;
use crate::timeseries::MonthKey;

/// Six significant digits, trailing zeros trimmed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&exp) {
        return format!("{x:.5e}");
    }
    if exp > 5 {
        let unit = 10f64.powi(exp - 5);
        return format!("{:.0}", (x / unit).round() * unit);
    }
    let decimals = (5 - exp) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn opt6(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

/// File-name-safe form of a stratum label.
pub fn file_stem(stratum: &str) -> String {
    stratum
        .chars()
        .map(|c| match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '-' | '_' => c,
            '+' => 'p',
            _ => '_',
        })
        .collect()
}

pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<I, S>(header: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).expect("write to Vec");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("write to Vec");
    }

    pub fn finish(self) -> String {
        String::from_utf8(self.writer.into_inner().expect("flush Vec")).expect("UTF-8")
    }
}

/// Long-format plot data: one row per (month, series, value).
#[derive(Default)]
pub struct PlotData {
    rows: Vec<(MonthKey, String, f64)>,
}

impl PlotData {
    pub fn series(&mut self, name: &str, months: &[MonthKey], values: &[f64]) {
        for (m, v) in months.iter().zip(values) {
            self.rows.push((*m, name.to_string(), *v));
        }
    }

    pub fn finish(self) -> String {
        let mut t = Table::new(["month", "series_name", "value"]);
        for (m, name, v) in self.rows {
            t.row([m.to_string(), name, sig6(v)]);
        }
        t.finish()
    }
}

pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(123.456789), "123.457");
        assert_eq!(sig6(102000.0), "102000");
        assert_eq!(sig6(1234567.0), "1234570");
        assert_eq!(sig6(0.000812345678), "0.000812346");
        assert_eq!(sig6(-2.5), "-2.5");
        assert_eq!(sig6(1.5e-9), "1.50000e-9");
        assert_eq!(opt6(None), "");
    }

    #[test]
    fn stems() {
        assert_eq!(file_stem("ES:M:85+"), "ES_M_85p");
        assert_eq!(file_stem("IT:F:65-74"), "IT_F_65-74");
    }
}
