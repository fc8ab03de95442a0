//! Command-line front end: config loading, scenario dispatch and file
//! emission. The binary in `src/bin` only forwards to [`main`].

pub mod config;
mod scenarios;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
pub use config::{load_config, parse_config, ConfigFile, Profile, RunConfig, Scenario};

#[derive(Parser, Debug)]
#[command(
    name = "transcoder",
    version,
    about = "OAM <-> time-bin transcoder simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML config layered over the profile.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Built-in parameter set (paper-2016 or ideal).
    #[arg(long, global = true, default_value = "paper-2016")]
    pub profile: String,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Seed for lock noise and intensity jitter; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Subcommand, Debug, Clone, Copy)]
pub enum Command {
    /// OAM states in, time-bin trains out.
    SimulateForward,
    /// Time-bin trains in, OAM states out.
    SimulateReverse,
    /// Airy spectrum, transverse-mode comb and lock servo run.
    CavitySpectrum,
    /// Mirror-image interference patterns and fringe counts.
    FringePattern,
    /// Nearest-neighbour cross-talk tables in both directions.
    Crosstalk,
    /// Interferometric readout of converted superpositions.
    Visibility,
    /// Parameter sweep over a worker pool.
    Sweep,
}

impl Command {
    pub fn scenario(self) -> Scenario {
        match self {
            Command::SimulateForward => Scenario::Forward,
            Command::SimulateReverse => Scenario::Reverse,
            Command::CavitySpectrum => Scenario::CavitySpectrum,
            Command::FringePattern => Scenario::FringePattern,
            Command::Crosstalk => Scenario::Crosstalk,
            Command::Visibility => Scenario::Visibility,
            Command::Sweep => Scenario::Sweep,
        }
    }
}

/// Writes files under one directory and remembers them for the manifest.
pub struct Emitter {
    dir: PathBuf,
    files: Vec<String>,
}

impl Emitter {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        write_file(&self.dir, rel, contents)?;
        self.record(rel);
        Ok(())
    }

    pub fn write_json(&mut self, rel: &str, v: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(v)?;
        text.push('\n');
        self.write(rel, &text)
    }

    /// Registers a file written by someone else (a sweep worker).
    pub fn record(&mut self, rel: &str) {
        self.files.push(rel.to_string());
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

pub(crate) fn write_file(dir: &Path, rel: &str, contents: &str) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    std::fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// What a finished run reports.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub scenario: &'static str,
    pub profile: &'static str,
    pub seed: u64,
    pub files: Vec<String>,
    pub metrics: Value,
}

/// Runs `scenario` and writes its files plus `manifest.json` to `out`.
pub fn run(cfg: &RunConfig, scenario: Scenario, out: &Path, workers: usize) -> Result<Manifest> {
    let mut em = Emitter::new(out)?;
    let metrics = match scenario {
        Scenario::Forward => scenarios::forward(cfg, &mut em)?,
        Scenario::Reverse => scenarios::reverse(cfg, &mut em)?,
        Scenario::CavitySpectrum => scenarios::cavity_spectrum(cfg, &mut em)?,
        Scenario::FringePattern => scenarios::fringe_pattern(cfg, &mut em)?,
        Scenario::Crosstalk => scenarios::crosstalk(cfg, &mut em)?,
        Scenario::Visibility => scenarios::visibility(cfg, &mut em)?,
        Scenario::Sweep => scenarios::sweep(cfg, &mut em, workers)?,
    };
    em.record("manifest.json");
    let manifest = Manifest {
        scenario: scenario.name(),
        profile: cfg.profile.name(),
        seed: cfg.file.seed,
        files: em.files().to_vec(),
        metrics,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_file(out, "manifest.json", &text)?;
    Ok(manifest)
}

fn error_json(e: &Error) -> Value {
    let mut v = json!({ "error": e.kind(), "message": e.to_string() });
    if let Error::InvalidParameter { field, .. } = e {
        v["field"] = json!(field);
    }
    v
}

fn execute(cli: &Cli) -> std::result::Result<Manifest, (Error, Option<PathBuf>)> {
    let profile = Profile::parse(&cli.profile).map_err(|e| (e, cli.out.clone()))?;
    let mut cfg = load_config(cli.config.as_deref(), profile).map_err(|e| (e, cli.out.clone()))?;
    let scenario = cli.command.scenario();
    if let Some(s) = cli.seed {
        cfg.file.seed = s;
        cfg.lock_run.seed = s;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.file.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(scenario.name()));
    if cli.workers == 0 {
        return Err((Error::param("--workers", "must be >= 1"), Some(out)));
    }
    run(&cfg, scenario, &out, cli.workers).map_err(|e| (e, Some(out)))
}

/// Parses `args`, runs, and reports. Failures print to stderr, write
/// `error.json` to the output directory when one is known, and exit 1.
pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(m) => {
            println!("{} ({}): {} files", m.scenario, m.profile, m.files.len());
            ExitCode::SUCCESS
        }
        Err((e, out)) => {
            eprintln!("error: {e}");
            if let Some(dir) = out {
                let text = format!("{}\n", error_json(&e));
                if std::fs::create_dir_all(&dir).is_ok() {
                    let _ = std::fs::write(dir.join("error.json"), text);
                }
            }
            ExitCode::FAILURE
        }
    }
}

pub fn main() -> ExitCode {
    main_from(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_parses_flags() {
        let c = Cli::try_parse_from([
            "transcoder",
            "sweep",
            "--workers",
            "4",
            "--seed",
            "7",
            "--profile",
            "ideal",
        ])
        .unwrap();
        assert!(matches!(c.command, Command::Sweep));
        assert_eq!(c.workers, 4);
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.profile, "ideal");
    }

    #[test]
    fn error_json_has_field() {
        let v = error_json(&Error::param("cavity.d_mm", "bad"));
        assert_eq!(v["field"], "cavity.d_mm");
        assert_eq!(v["error"], "invalid_parameter");
    }
}
