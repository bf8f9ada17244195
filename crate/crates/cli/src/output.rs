use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use crate::CliError;

/// Ten significant digits, '.' decimal separator.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.9e}")
    } else {
        format!("{x}")
    }
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            let _ = write!(self.text, "{}", num(*v));
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Where a command writes. With a directory, artifacts become files there and
/// the summary goes to stdout; without one, CSV goes to stdout and the
/// summary to stderr.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self { dir })
    }

    pub fn csv(&self, name: &str, csv: &Csv) -> Result<(), CliError> {
        match &self.dir {
            Some(d) => fs::write(d.join(format!("{name}.csv")), csv.as_str())?,
            None => std::io::stdout().write_all(csv.as_str().as_bytes())?,
        }
        Ok(())
    }

    /// One-line JSON summary; also written as `<name>.json` (pretty) with a
    /// directory.
    pub fn summary<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let line = serde_json::to_string(value)?;
        match &self.dir {
            Some(d) => {
                let mut pretty = serde_json::to_string_pretty(value)?;
                pretty.push('\n');
                fs::write(d.join(format!("{name}.json")), pretty)?;
                println!("{line}");
            }
            None => eprintln!("{line}"),
        }
        Ok(())
    }

    /// A JSON document that is the primary output.
    pub fn document<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut pretty = serde_json::to_string_pretty(value)?;
        pretty.push('\n');
        if let Some(d) = &self.dir {
            fs::write(d.join(format!("{name}.json")), &pretty)?;
        }
        print!("{pretty}");
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(num(1.0), "1.000000000e0");
        assert_eq!(num(-0.000123456789012), "-1.234567890e-4");
        assert_eq!(num(f64::NAN), "NaN");
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&[1.0, 2.5]);
        assert_eq!(c.as_str(), "a,b\n1.000000000e0,2.500000000e0\n");
    }
}
