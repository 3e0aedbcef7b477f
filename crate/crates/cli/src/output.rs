//! Artifacts of a run and how they land on disk.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Experiment;
use crate::error::CliError;

/// One hard invariant checked by an experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Invariant {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Invariant {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Invariant { name: name.to_string(), passed, detail: detail.into() }
    }

    /// `observed <= bound`.
    pub fn at_most(name: &str, observed: f64, bound: f64) -> Self {
        Invariant::new(name, observed <= bound, format!("{observed:.6e} <= {bound:.6e}"))
    }

    /// `observed >= bound`.
    pub fn at_least(name: &str, observed: f64, bound: f64) -> Self {
        Invariant::new(name, observed >= bound, format!("{observed:.6e} >= {bound:.6e}"))
    }
}

/// A named output file.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn text(name: &str, text: String) -> Self {
        Artifact { name: name.to_string(), bytes: text.into_bytes() }
    }
}

/// Everything a pipeline produced, before anything is written.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub experiment: Experiment,
    pub config: serde_json::Value,
    pub statistics: serde_json::Value,
    pub invariants: Vec<Invariant>,
    pub artifacts: Vec<Artifact>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|i| i.passed)
    }

    pub fn artifact(&self, name: &str) -> Option<&[u8]> {
        self.artifacts.iter().find(|a| a.name == name).map(|a| a.bytes.as_slice())
    }

    pub fn summary(&self, workers: usize, elapsed_s: f64) -> serde_json::Value {
        serde_json::json!({
            "experiment": self.experiment.name(),
            "config": self.config,
            "workers": workers,
            "elapsed_seconds": elapsed_s,
            "statistics": self.statistics,
            "invariants": self.invariants,
            "passed": self.passed(),
            "files": self.artifacts.iter().map(|a| a.name.as_str()).collect::<Vec<_>>(),
        })
    }
}

/// Creates `<root>/<experiment>-<UTC timestamp>` (suffixed if taken) and
/// points `<root>/latest` at it.
pub fn create_run_dir(root: &Path, experiment: Experiment) -> Result<PathBuf, CliError> {
    fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    let base = format!("{}-{stamp}", experiment.name());
    let mut name = base.clone();
    let mut k = 1;
    loop {
        let dir = root.join(&name);
        match fs::create_dir(&dir) {
            Ok(()) => {
                let latest = root.join("latest");
                fs::write(&latest, format!("{name}\n")).map_err(|e| CliError::io(&latest, e))?;
                return Ok(dir);
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                name = format!("{base}-{k}");
                k += 1;
            }
            Err(e) => return Err(CliError::io(dir, e)),
        }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Writes the artifacts and `summary.json` into `dir`.
pub fn write_run(dir: &Path, out: &RunOutput, workers: usize, elapsed_s: f64) -> Result<(), CliError> {
    for a in &out.artifacts {
        write_file(&dir.join(&a.name), &a.bytes)?;
    }
    write_json(&dir.join("summary.json"), &out.summary(workers, elapsed_s))
}

/// Two-column CSV with a header; floats carry 17 significant digits.
pub fn plot_csv(curve: &[(f64, f64)], columns: (&str, &str)) -> Result<String, CliError> {
    if curve.is_empty() {
        return Err(CliError::Usage("cannot emit an empty curve".into()));
    }
    let mut out = format!("{},{}\n", columns.0, columns.1);
    for (x, y) in curve {
        out.push_str(&format!("{x:.16e},{y:.16e}\n"));
    }
    Ok(out)
}

/// Writes `curve` as an `x,y` CSV at `path`.
pub fn emit_plot_data(curve: &[(f64, f64)], path: &Path) -> Result<(), CliError> {
    write_file(path, plot_csv(curve, ("x", "y"))?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_curve_is_rejected() {
        assert!(plot_csv(&[], ("x", "y")).is_err());
    }

    #[test]
    fn one_row_with_header() {
        let s = plot_csv(&[(0.1, 0.03)], ("x", "y")).unwrap();
        assert_eq!(s.lines().count(), 2);
        assert_eq!(s.lines().next(), Some("x,y"));
    }
}
