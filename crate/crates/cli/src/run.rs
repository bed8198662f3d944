use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use povmcert::report::RunManifest;

use crate::args::Format;

/// Per-invocation state: seed, output routing and the files that end up in
/// the manifest.
pub struct Run {
    pub name: &'static str,
    pub seed: u64,
    seed_source: &'static str,
    pub out_dir: Option<PathBuf>,
    pub format: Option<Format>,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl Run {
    pub fn new(
        name: &'static str,
        seed: Option<u64>,
        out_dir: Option<PathBuf>,
        format: Option<Format>,
        config: serde_json::Value,
    ) -> Self {
        let (seed, seed_source) = match seed {
            Some(s) => (s, "flag"),
            None => (rand::random::<u64>(), "entropy"),
        };
        Self {
            name,
            seed,
            seed_source,
            out_dir,
            format,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    /// `out` relative to `--out-dir` when both are given.
    pub fn resolve(&self, out: &Path) -> PathBuf {
        match &self.out_dir {
            Some(d) if out.is_relative() => d.join(out),
            _ => out.to_path_buf(),
        }
    }

    /// Prepares `path` for writing and records it as an output.
    pub fn claim(&mut self, path: &Path) -> Result<PathBuf> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        self.outputs.push(path.to_path_buf());
        Ok(path.to_path_buf())
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        let p = self.claim(path)?;
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))
    }

    /// Writes to `--out`, else to `<out-dir>/<default_name>`, else stdout.
    pub fn emit(&mut self, out: Option<&Path>, default_name: &str, contents: &str) -> Result<()> {
        let target = match (out, &self.out_dir) {
            (Some(p), _) => Some(self.resolve(p)),
            (None, Some(d)) => Some(d.join(default_name)),
            (None, None) => None,
        };
        match target {
            Some(p) => self.write(&p, contents),
            None => {
                print!("{contents}");
                Ok(())
            }
        }
    }

    /// Writes the manifest when any file was produced.
    pub fn finish(self) -> Result<()> {
        if self.outputs.is_empty() {
            return Ok(());
        }
        let dir = match &self.out_dir {
            Some(d) => d.clone(),
            None => self.outputs[0]
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from(".")),
        };
        let mut m = RunManifest::new(self.name, self.config, self.seed, self.seed_source);
        for p in &self.inputs {
            m.add_input(p)?;
        }
        for p in &self.outputs {
            m.add_output(p)?;
        }
        m.wall_clock_s = self.started.elapsed().as_secs_f64();
        fs::create_dir_all(&dir)?;
        m.write(&dir)?;
        Ok(())
    }
}
