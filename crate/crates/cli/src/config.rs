//! Run settings: defaults, then an optional flat TOML file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use tudsim::channels::GAD_P;
use tudsim::estimation::Shots;
use tudsim::experiments::linspace;
use tudsim::tud::PhaseSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseArg {
    /// Published angle lists (degree 51 odd, degree 30 even)
    Fixture,
    /// Chebyshev projection plus the built-in phase solver
    Solver,
}

impl From<PhaseArg> for PhaseSource {
    fn from(p: PhaseArg) -> Self {
        match p {
            PhaseArg::Fixture => PhaseSource::Fixture,
            PhaseArg::Solver => PhaseSource::Solver,
        }
    }
}

/// `a:b:n`, `n` equispaced points from `a` to `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.end, self.points)
    }
}

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let fields: Vec<&str> = s.split(':').collect();
        let [a, b, n] = fields.as_slice() else {
            return Err(format!("expected a:b:n, got {s:?}"));
        };
        let start: f64 = a.trim().parse().map_err(|_| format!("bad grid start {a:?}"))?;
        let end: f64 = b.trim().parse().map_err(|_| format!("bad grid end {b:?}"))?;
        let points: usize = n.trim().parse().map_err(|_| format!("bad grid size {n:?}"))?;
        if points == 0 {
            return Err("grid must have at least one point".into());
        }
        if !start.is_finite() || !end.is_finite() {
            return Err("grid bounds must be finite".into());
        }
        Ok(Grid { start, end, points })
    }
}

/// Shot budget: a positive count or `inf`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShotArg(pub Shots);

impl std::str::FromStr for ShotArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinite") {
            return Ok(ShotArg(Shots::Infinite));
        }
        match s.parse::<u64>() {
            Ok(0) => Err("shots must be positive (or inf)".into()),
            Ok(n) => Ok(ShotArg(Shots::Finite(n))),
            Err(_) => Err(format!("bad shot count {s:?}")),
        }
    }
}

/// Flags shared by every command. Unset flags fall back to the config file,
/// then to the built-in defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// Flat key = value settings file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Shots per estimate, or `inf`
    #[arg(long, global = true)]
    pub shots: Option<ShotArg>,
    /// Polynomial degree
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    /// Scaling of the Hermitian parts in the four-unitary decomposition
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Promise margin on the singular values
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Thermal population of the damping channel
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Damping grid as a:b:n
    #[arg(long, global = true)]
    pub gamma_grid: Option<Grid>,
    /// Random matrices per sweep
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub phases: Option<PhaseArg>,
    /// Output directory (figures, channel) or file (decompose, qsp)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    shots: Option<ShotsValue>,
    degree: Option<usize>,
    alpha: Option<f64>,
    delta: Option<f64>,
    p: Option<f64>,
    gamma_grid: Option<String>,
    samples: Option<usize>,
    phases: Option<PhaseArg>,
    out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ShotsValue {
    Count(u64),
    Text(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub seed: u64,
    #[serde(serialize_with = "serialize_shots")]
    pub shots: Shots,
    pub degree: Option<usize>,
    pub alpha: f64,
    pub delta: Option<f64>,
    pub p: f64,
    pub gamma_grid: Grid,
    pub samples: usize,
    pub phases: Option<PhaseArg>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn serialize_shots<S: serde::Serializer>(shots: &Shots, s: S) -> Result<S::Ok, S::Error> {
    match shots {
        Shots::Finite(n) => s.serialize_u64(*n),
        Shots::Infinite => s.serialize_str("inf"),
    }
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 7,
            shots: Shots::Finite(10_000),
            degree: None,
            alpha: 1.61,
            delta: None,
            p: GAD_P,
            gamma_grid: Grid {
                start: 0.0,
                end: 1.0,
                points: 50,
            },
            samples: 1000,
            phases: None,
            out: None,
        }
    }
}

impl Settings {
    pub fn resolve(flags: &CommonArgs) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => read_config(path)?,
            None => FileConfig::default(),
        };
        let mut s = Settings::default();
        if let Some(v) = file.seed {
            s.seed = v;
        }
        if let Some(v) = file.shots {
            s.shots = match v {
                ShotsValue::Count(n) => n.to_string().parse::<ShotArg>(),
                ShotsValue::Text(t) => t.parse::<ShotArg>(),
            }
            .map_err(anyhow::Error::msg)?
            .0;
        }
        s.degree = file.degree.or(s.degree);
        if let Some(v) = file.alpha {
            s.alpha = v;
        }
        s.delta = file.delta.or(s.delta);
        if let Some(v) = file.p {
            s.p = v;
        }
        if let Some(v) = file.gamma_grid {
            s.gamma_grid = v.parse().map_err(anyhow::Error::msg)?;
        }
        if let Some(v) = file.samples {
            s.samples = v;
        }
        s.phases = file.phases.or(s.phases);
        s.out = file.out.or(s.out);

        if let Some(v) = flags.seed {
            s.seed = v;
        }
        if let Some(v) = flags.shots {
            s.shots = v.0;
        }
        s.degree = flags.degree.or(s.degree);
        if let Some(v) = flags.alpha {
            s.alpha = v;
        }
        s.delta = flags.delta.or(s.delta);
        if let Some(v) = flags.p {
            s.p = v;
        }
        if let Some(v) = flags.gamma_grid {
            s.gamma_grid = v;
        }
        if let Some(v) = flags.samples {
            s.samples = v;
        }
        s.phases = flags.phases.or(s.phases);
        s.out = flags.out.clone().or(s.out);
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            bail!("alpha must be positive, got {}", self.alpha);
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 0.5) {
                bail!("delta must lie in (0, 0.5), got {d}");
            }
        }
        if !(0.0..=1.0).contains(&self.p) {
            bail!("p must lie in [0, 1], got {}", self.p);
        }
        let g = self.gamma_grid;
        if !(0.0..=1.0).contains(&g.start) || !(0.0..=1.0).contains(&g.end) {
            bail!("gamma grid must lie in [0, 1]");
        }
        if self.samples == 0 {
            bail!("samples must be positive");
        }
        Ok(())
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.gamma_grid.values()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn read_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}
