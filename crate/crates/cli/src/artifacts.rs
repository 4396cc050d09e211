//! Output directory handling: artifact files, checksummed manifest, plot
//! descriptions.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct ArtifactRecord {
    file: String,
    bytes: usize,
    sha256: String,
}

/// One line in a plot description.
#[derive(Debug, Clone, Serialize)]
pub struct Series {
    pub name: String,
    pub file: String,
    pub x: String,
    pub y: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub log_x: bool,
    pub series: Vec<Series>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            series: Vec::new(),
        }
    }

    pub fn series(mut self, name: &str, file: &str, x: &str, y: &str) -> Self {
        self.series.push(Series {
            name: name.into(),
            file: file.into(),
            x: x.into(),
            y: y.into(),
        });
        self
    }
}

/// Collects everything a run writes under its output directory.
#[derive(Debug)]
pub struct RunOutput {
    dir: PathBuf,
    artifacts: Vec<ArtifactRecord>,
    pub assertions: Vec<Assertion>,
    plots: Vec<Plot>,
}

impl RunOutput {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            assertions: Vec::new(),
            plots: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `name` (a plain file name) and records its checksum.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.retain(|a| a.file != name);
        self.artifacts.push(ArtifactRecord {
            file: name.to_string(),
            bytes: contents.len(),
            sha256: hex(&Sha256::digest(contents.as_bytes())),
        });
        Ok(())
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion::new(name, passed, detail));
    }

    pub fn plot(&mut self, plot: Plot) {
        self.plots.push(plot);
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    /// Writes `plot.json` (when any plots were added) and `manifest.json`.
    /// The manifest holds no timestamps, so identical runs give identical
    /// files.
    pub fn finish(mut self, command: &str, config: Value) -> Result<RunSummary> {
        if !self.plots.is_empty() {
            let text = serde_json::to_string_pretty(&serde_json::json!({ "plots": self.plots }))?;
            self.write("plot.json", &(text + "\n"))?;
        }
        self.artifacts.sort_by(|a, b| a.file.cmp(&b.file));
        let manifest = serde_json::json!({
            "tool": concat!("soen ", env!("CARGO_PKG_VERSION")),
            "command": command,
            "config": config,
            "artifacts": self.artifacts,
            "assertions": self.assertions,
            "passed": self.passed(),
        });
        let path = self.dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(RunSummary {
            dir: self.dir.clone(),
            passed: self.passed(),
            assertions: self.assertions,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
