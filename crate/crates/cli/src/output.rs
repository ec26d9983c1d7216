//! Artifact layout of a run directory:
//!
//! * `config.toml`: the resolved configuration, enough to rerun;
//! * `result.json`: the experiment record, free of timestamps;
//! * `series.csv` and any command-specific files;
//! * `manifest.json`: status, timing and verdicts. It is written as
//!   `incomplete` before the run starts and replaced when it ends.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::RunConfig;
use crate::run::Outcome;

/// Version of every file written to a run directory.
pub const OUTPUT_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Incomplete,
    Passed,
    Failed,
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictLine {
    pub name: String,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: Status,
    pub master_seed: u64,
    pub jobs: usize,
    pub config: String,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    pub elapsed_secs: Option<f64>,
    pub wall_clock_budget_secs: Option<f64>,
    pub over_budget: bool,
    pub files: Vec<String>,
    pub verdicts: Vec<VerdictLine>,
    pub error: Option<String>,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// An open run directory.
pub struct RunDir {
    dir: PathBuf,
    manifest: Manifest,
    clock: Instant,
}

impl RunDir {
    /// Creates the directory, echoes the configuration and marks the run as
    /// incomplete.
    pub fn begin(cfg: &RunConfig) -> Result<Self> {
        let dir = cfg.out.clone();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let echo = format!(
            "# resolved atlab configuration, schema {OUTPUT_SCHEMA}\n{}",
            toml::to_string(cfg).context("serializing the resolved config")?
        );
        write(&dir, "config.toml", &echo)?;
        let manifest = Manifest {
            schema: OUTPUT_SCHEMA,
            tool: "atlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: cfg.command.map(|c| c.name()).unwrap_or_default().into(),
            status: Status::Incomplete,
            master_seed: cfg.seed,
            jobs: cfg.jobs,
            config: "config.toml".into(),
            started_unix: unix_now(),
            finished_unix: None,
            elapsed_secs: None,
            wall_clock_budget_secs: cfg.budget.wall_clock_secs,
            over_budget: false,
            files: vec!["config.toml".into()],
            verdicts: Vec::new(),
            error: None,
        };
        let run = Self {
            dir,
            manifest,
            clock: Instant::now(),
        };
        run.write_manifest()?;
        Ok(run)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write_manifest(&self) -> Result<()> {
        write(&self.dir, "manifest.json", &(serde_json::to_string_pretty(&self.manifest)? + "\n"))
    }

    fn close(&mut self, status: Status) -> Result<()> {
        let elapsed = self.clock.elapsed().as_secs_f64();
        self.manifest.status = status;
        self.manifest.finished_unix = Some(unix_now());
        self.manifest.elapsed_secs = Some(elapsed);
        self.manifest.over_budget = self.manifest.wall_clock_budget_secs.is_some_and(|b| elapsed > b);
        if self.manifest.over_budget {
            log::warn!("run took {elapsed:.1} s, over the wall-clock budget");
        }
        self.write_manifest()
    }

    /// Writes the artifacts of a finished run and returns its status.
    pub fn finish(mut self, out: &Outcome) -> Result<Status> {
        let res = &out.result;
        self.put("result.json", &(serde_json::to_string_pretty(res)? + "\n"))?;
        self.put("series.csv", &format!("# schema {OUTPUT_SCHEMA}\n{}", res.series_csv()))?;
        for (name, contents) in &out.files {
            let body = if name.ends_with(".csv") {
                format!("# schema {OUTPUT_SCHEMA}\n{contents}")
            } else {
                contents.clone()
            };
            self.put(name, &body)?;
        }
        self.manifest.verdicts = res
            .verdicts
            .iter()
            .map(|v| VerdictLine {
                name: v.name.clone(),
                passed: v.passed,
            })
            .collect();
        let status = if res.passed() { Status::Passed } else { Status::Failed };
        self.close(status)?;
        Ok(status)
    }

    /// Records an error that stopped the run.
    pub fn fail(mut self, err: &anyhow::Error) -> Result<()> {
        self.manifest.error = Some(format!("{err:#}"));
        self.close(Status::Error)
    }

    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        write(&self.dir, name, contents)?;
        self.manifest.files.push(name.to_string());
        Ok(())
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}
