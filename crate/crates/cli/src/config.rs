//! Experiment configuration: command-line flags over a TOML file over
//! per-command defaults. The resolved set is written back as a manifest that
//! can be passed to `--config` to reproduce a run.

use std::path::{Path, PathBuf};

use clap::Args;
use isolab::algebra::{fmt_csv, parse_csv};
use isolab::{c, C};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const TOL_RANGE: (f64, f64) = (1e-14, 1e-1);

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to the command's defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML config file (a manifest from an earlier run works).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed of the ChaCha generator for random initial data.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated Θ values: Θ0,Θ1,Θt,Θ∞ (P6 commands) or Θ0,Θ1,Θ∞ (P5
    /// commands). Complex values are written `a+bi`.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub t6: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub t6_end: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub t5: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub t5_end: Option<String>,
    /// Number of grid intervals for flows.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Integration tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Deepest ladder index.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Ladder pattern: `first` or `second`.
    #[arg(long)]
    pub pattern: Option<String>,
    /// Free constant of the first-limit conjugator.
    #[arg(long, allow_hyphen_values = true)]
    pub f0: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON-lines input for `triangularize`.
    #[arg(long)]
    pub batch: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "ISOLAB_JOBS")]
    pub jobs: Option<usize>,
}

/// The file form: every key optional, unknown keys rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub theta: Option<Vec<String>>,
    pub t6: Option<String>,
    pub t6_end: Option<String>,
    pub t5: Option<String>,
    pub t5_end: Option<String>,
    pub steps: Option<usize>,
    pub tol: Option<f64>,
    pub n_max: Option<usize>,
    pub pattern: Option<String>,
    pub f0: Option<String>,
    pub out: Option<PathBuf>,
    pub batch: Option<PathBuf>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    First,
    Second,
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: String,
    pub seed: u64,
    pub theta: Vec<C>,
    pub t6: C,
    pub t6_end: C,
    pub t5: C,
    pub t5_end: C,
    pub steps: usize,
    pub tol: f64,
    pub n_max: usize,
    pub pattern: Pattern,
    pub f0: C,
    pub out: PathBuf,
    pub batch: Option<PathBuf>,
    pub jobs: usize,
}

/// Whether the command takes P5 rather than P6 `Θ` values.
pub fn is_p5_command(command: &str) -> bool {
    matches!(command, "flow5" | "stokes")
}

/// Parses `a`, `bi`, `a+bi` or `a-bi`.
pub fn parse_complex(s: &str) -> CliResult<C> {
    let t = s.trim();
    if let Ok(x) = t.parse::<f64>() {
        return Ok(c(x, 0.0));
    }
    if let Ok(z) = parse_csv(t) {
        return Ok(z);
    }
    let im = t.strip_suffix('i').map(|b| match b {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        b => b.parse::<f64>(),
    });
    match im {
        Some(Ok(y)) => Ok(c(0.0, y)),
        _ => Err(CliError::Config(format!("bad complex number {s:?}"))),
    }
}

fn parse_list(s: &str) -> CliResult<Vec<C>> {
    s.split(',').map(parse_complex).collect()
}

fn default_theta(command: &str) -> Vec<C> {
    if is_p5_command(command) {
        vec![c(0.3, 0.1), c(-0.6, -0.15), c(0.8, -0.15)]
    } else {
        vec![c(0.3, 0.1), c(0.45, -0.2), c(0.6, 0.15), c(0.35, 0.05)]
    }
}

pub fn read_file_config(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Merges flags over the file over the defaults of `command`.
pub fn resolve(command: &str, flags: &Flags, file: &FileConfig) -> CliResult<ExperimentConfig> {
    if let Some(cmd) = &file.command {
        if cmd != command {
            return Err(CliError::Config(format!(
                "config file is for command {cmd:?}, not {command:?}"
            )));
        }
    }
    let pick = |flag: &Option<String>, file: &Option<String>, default: C| -> CliResult<C> {
        match flag.as_ref().or(file.as_ref()) {
            Some(s) => parse_complex(s),
            None => Ok(default),
        }
    };
    let theta = match (&flags.theta, &file.theta) {
        (Some(s), _) => parse_list(s)?,
        (None, Some(v)) => v.iter().map(|s| parse_complex(s)).collect::<CliResult<_>>()?,
        (None, None) => default_theta(command),
    };
    let pattern = match flags.pattern.as_ref().or(file.pattern.as_ref()).map(String::as_str) {
        None | Some("first") => Pattern::First,
        Some("second") => Pattern::Second,
        Some(p) => return Err(CliError::Config(format!("unknown pattern {p:?}"))),
    };
    let t6 = pick(&flags.t6, &file.t6, c(0.4, 0.1))?;
    let t5 = pick(&flags.t5, &file.t5, c(1.2, 0.0))?;
    let cfg = ExperimentConfig {
        command: command.to_string(),
        seed: flags.seed.or(file.seed).unwrap_or(3),
        theta,
        t6,
        t6_end: pick(&flags.t6_end, &file.t6_end, t6 + 0.1)?,
        t5,
        t5_end: pick(&flags.t5_end, &file.t5_end, t5 + 0.2)?,
        steps: flags.steps.or(file.steps).unwrap_or(10),
        tol: flags.tol.or(file.tol).unwrap_or(1e-12),
        n_max: flags.n_max.or(file.n_max).unwrap_or(16),
        pattern,
        f0: pick(&flags.f0, &file.f0, c(1.0, 0.0))?,
        out: flags
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from("isolab-out").join(command)),
        batch: flags.batch.clone().or_else(|| file.batch.clone()),
        jobs: flags.jobs.or(file.jobs).unwrap_or(0),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(TOL_RANGE.0..=TOL_RANGE.1).contains(&self.tol) {
            return bad(format!("tol {} outside [1e-14, 1e-1]", self.tol));
        }
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        let want = if is_p5_command(&self.command) { 3 } else { 4 };
        if self.theta.len() != want {
            return bad(format!(
                "{} takes {want} theta values, got {}",
                self.command,
                self.theta.len()
            ));
        }
        let finite = |z: &C| z.re.is_finite() && z.im.is_finite();
        let all = [self.t6, self.t6_end, self.t5, self.t5_end, self.f0];
        if !self.theta.iter().chain(all.iter()).all(finite) {
            return bad("non-finite parameter".into());
        }
        if matches!(self.command.as_str(), "limit1" | "limit2" | "equivalence") && self.n_max < 9 {
            return bad("limit commands need n_max >= 9 (slopes are fitted from n = 6)".into());
        }
        Ok(())
    }

    /// Equally spaced grid `from..=to` with `steps` intervals.
    pub fn grid(from: C, to: C, steps: usize) -> Vec<C> {
        (0..=steps)
            .map(|k| from + (to - from) * (k as f64 / steps as f64))
            .collect()
    }

    /// The manifest: the resolved set in file form, complex values written
    /// at full precision so a re-run is bit-identical.
    pub fn to_file(&self) -> FileConfig {
        let s = |z: C| Some(fmt_csv(z));
        FileConfig {
            command: Some(self.command.clone()),
            seed: Some(self.seed),
            theta: Some(self.theta.iter().map(|z| fmt_csv(*z)).collect()),
            t6: s(self.t6),
            t6_end: s(self.t6_end),
            t5: s(self.t5),
            t5_end: s(self.t5_end),
            steps: Some(self.steps),
            tol: Some(self.tol),
            n_max: Some(self.n_max),
            pattern: Some(
                match self.pattern {
                    Pattern::First => "first",
                    Pattern::Second => "second",
                }
                .into(),
            ),
            f0: s(self.f0),
            out: Some(self.out.clone()),
            batch: self.batch.clone(),
            jobs: Some(self.jobs),
        }
    }

    pub fn manifest(&self) -> String {
        toml::to_string(&self.to_file()).expect("manifest serializes")
    }
}
