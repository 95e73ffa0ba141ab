//! Threshold checks, CSV output and run summaries.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::AppError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `<=`, `<` or `>=`.
    pub relation: &'static str,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, "<=", threshold, value <= threshold)
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, ">=", threshold, value >= threshold)
    }

    /// Strict decrease of `values`, reported as the largest ratio of
    /// consecutive entries, which must stay below one.
    pub fn decreasing(name: impl Into<String>, values: &[f64]) -> Self {
        let ratio = values
            .windows(2)
            .map(|w| w[1] / w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        let passed = values.windows(2).all(|w| w[1] < w[0]);
        Self::new(name, ratio, "<", 1.0, passed)
    }

    fn new(
        name: impl Into<String>,
        value: f64,
        relation: &'static str,
        threshold: f64,
        passed: bool,
    ) -> Self {
        Check {
            name: name.into(),
            value,
            relation,
            threshold,
            passed,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{:<4} {:<40} {:.6e} {} {:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.relation,
            self.threshold
        )
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub command: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Summary {
    pub fn new(command: &'static str, checks: Vec<Check>, notes: Vec<String>) -> Self {
        Summary {
            command,
            passed: checks.iter().all(|c| c.passed),
            checks,
            notes,
        }
    }

    pub fn print(&self) {
        for c in &self.checks {
            println!("{}", c.line());
        }
        for n in &self.notes {
            println!("note: {n}");
        }
        println!(
            "{}: {}",
            self.command,
            if self.passed {
                "all checks passed"
            } else {
                "threshold failure"
            }
        );
    }
}

/// Full double precision: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects the files written by one command.
pub struct Output {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self, AppError> {
        std::fs::create_dir_all(dir).map_err(|source| AppError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> Result<(PathBuf, File), AppError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|source| AppError::Output {
            path: path.clone(),
            source,
        })?;
        self.files.push(PathBuf::from(name));
        Ok((path, file))
    }

    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), AppError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let (path, file) = self.create(name)?;
        let err = |e: csv::Error| AppError::Output {
            path: path.clone(),
            source: e.into(),
        };
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(row).map_err(err)?;
        }
        w.flush().map_err(|source| AppError::Output {
            path: path.clone(),
            source,
        })
    }

    pub fn numeric_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<f64>],
    ) -> Result<(), AppError> {
        self.csv(name, header, rows.iter().map(|r| r.iter().map(|&x| num(x))))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), AppError> {
        let (path, file) = self.create(name)?;
        serde_json::to_writer_pretty(file, value).map_err(|e| AppError::Output {
            path,
            source: e.into(),
        })
    }
}
