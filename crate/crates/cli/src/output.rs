use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use pseudobound::problems::{Manifest, ProblemDef};
use pseudobound::Error;

/// Failures mapped onto the process exit status.
#[derive(Debug)]
pub enum CliError {
    /// Missing files, unknown presets, schema violations and write failures.
    Input(String),
    /// Infeasible contours and failed preconditions.
    Compute(Error),
    /// A bound fell below the simulated norm.
    Unsound(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Compute(Error::Io(_)) => 2,
            CliError::Compute(_) => 1,
            CliError::Unsound(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "{m}"),
            CliError::Compute(e) => write!(f, "{e}"),
            CliError::Unsound(m) => write!(f, "soundness violation: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// 17 significant digits, enough to round-trip every `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects the files of one run and writes the manifest last.
pub struct Run {
    dir: PathBuf,
    manifest: Manifest,
}

impl Run {
    pub fn new(dir: &Path, problem: &ProblemDef, parameters: serde_json::Value) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
        let command = std::env::args().collect::<Vec<_>>().join(" ");
        Ok(Self { dir: dir.to_path_buf(), manifest: Manifest::new(&command, problem.clone(), parameters) })
    }

    pub fn set(&mut self, key: &str, value: serde_json::Value) {
        if let serde_json::Value::Object(map) = &mut self.manifest.parameters {
            map.insert(key.to_string(), value);
        }
    }

    /// Writes a CSV with the given header; every row must match its width.
    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.manifest.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn finish(self) -> CliResult<()> {
        self.manifest
            .write(&self.dir.join("manifest.json"))
            .map_err(|e| CliError::Input(format!("cannot write manifest: {e}")))?;
        println!("wrote {} and manifest.json to {}", self.manifest.outputs.join(", "), self.dir.display());
        Ok(())
    }
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}
