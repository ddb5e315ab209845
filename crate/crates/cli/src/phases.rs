//! Phase lists for the CLI: bundled or overridden fixtures, or solver output.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use tudsim::qsp::{self, Convention, Parity, PhaseSequence, EVEN30_FILE, ODD51_FILE};
use tudsim::tud::{prepare_phases, PhaseSource, PreparedPhases, TudOptions};

/// Directory holding `angles_odd51.json` and `angles_even30.json`; when
/// unset the lists compiled into the library are used.
pub const FIXTURE_DIR_ENV: &str = "TUDSIM_FIXTURE_DIR";

pub fn fixture_dir() -> Option<PathBuf> {
    std::env::var_os(FIXTURE_DIR_ENV).map(PathBuf::from)
}

pub fn load_fixture(parity: Parity) -> Result<PhaseSequence> {
    match fixture_dir() {
        Some(dir) => {
            let path = dir.join(match parity {
                Parity::Odd => ODD51_FILE,
                Parity::Even => EVEN30_FILE,
            });
            if !path.is_file() {
                bail!("fixture {} not found", path.display());
            }
            let ps = PhaseSequence::load(&path, Convention::Wx)
                .with_context(|| format!("loading {}", path.display()))?;
            if ps.parity != parity {
                bail!("{} has the wrong parity", path.display());
            }
            Ok(ps)
        }
        None => Ok(match parity {
            Parity::Odd => qsp::fixture_odd51(),
            Parity::Even => qsp::fixture_even30(),
        }),
    }
}

pub fn default_degree(parity: Parity) -> usize {
    match parity {
        Parity::Odd => 51,
        Parity::Even => 30,
    }
}

pub fn prepared(
    parity: Parity,
    source: PhaseSource,
    degree: Option<usize>,
    delta: f64,
) -> Result<PreparedPhases> {
    match source {
        PhaseSource::Fixture => {
            let ps = load_fixture(parity)?;
            if let Some(n) = degree {
                if n != ps.degree() {
                    bail!("fixture has degree {}, requested {n}", ps.degree());
                }
            }
            Ok(PreparedPhases::from_wx(&ps, delta, None)?)
        }
        PhaseSource::Solver => Ok(prepare_phases(
            parity,
            &TudOptions {
                delta,
                degree_override: Some(degree.unwrap_or_else(|| default_degree(parity))),
                phases: PhaseSource::Solver,
                ..TudOptions::default()
            },
        )?),
    }
}
