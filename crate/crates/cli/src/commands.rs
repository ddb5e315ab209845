use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tudsim::channels::{exact_expectation, gad_channel, pauli_observables, probe_states};
use tudsim::encodings::{sznagy_encode, BlockEncoding};
use tudsim::estimation::{block_postselect_estimator, fud_estimator, RngStream, Shots};
use tudsim::experiments::{fidelity_grid, gad_phases, response_curve};
use tudsim::numerics::{matrix_json, op_norm, CMatrix};
use tudsim::qsp::{
    approx_target, convert_wx_to_r, solve_phases, ChebyshevPoly, Convention, Parity, PhaseSequence,
    TargetFunction,
};
use tudsim::tud::{
    oracle_fud, oracle_tud_svd, run_fud, run_fud_with, run_tud, sznagy_fud, margin_for_alpha,
    PhaseSource, QueryLedger, TudOptions, UnitaryDecomposition,
};
use tudsim::Error;

use crate::config::{PhaseArg, Settings};
use crate::output::{ensure_dir, write_csv, write_json};
use crate::phases::{default_degree, load_fixture};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Two unitaries through QSVT (contractions)
    Tud,
    /// Four unitaries through Hermitian splitting and QSVT
    Fud,
    /// Exact two-unitary construction from the SVD
    OracleTud,
    /// Exact four-unitary construction
    OracleFud,
    /// Four unitaries read off the Sz.-Nagy dilation
    Shortcut,
}

#[derive(Serialize)]
struct DecompositionReport<'a> {
    method: Method,
    dim: usize,
    alpha_scale: f64,
    degree: Option<usize>,
    reconstruction_error: f64,
    max_unitarity_residual: f64,
    branch_errors: &'a [f64],
    success_probabilities: &'a [f64],
    query_ledger: QueryLedger,
    parts: &'a [tudsim::tud::DecompositionPart],
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let rows: Vec<Vec<[f64; 2]>> = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a nested [re, im] matrix", path.display()))?;
    let m = matrix_json::from_nested(&rows).map_err(|e| anyhow!(e))?;
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        bail!("matrix must be square and non-empty, got {}x{}", m.nrows(), m.ncols());
    }
    Ok(m)
}

pub fn decompose(input: &Path, method: Method, s: &Settings) -> Result<()> {
    let a = read_matrix(input)?;
    let source: PhaseSource = s.phases.unwrap_or(PhaseArg::Solver).into();
    let dec = match method {
        Method::Tud => {
            let opts = TudOptions {
                delta: s.delta.unwrap_or(0.1),
                degree_override: s.degree,
                phases: source,
                ..TudOptions::default()
            };
            run_tud(&sznagy_encode(&a)?, &opts)?
        }
        Method::Fud => {
            let opts = TudOptions {
                delta: s.delta.unwrap_or(margin_for_alpha(s.alpha)),
                degree_override: Some(s.degree.unwrap_or(default_degree(Parity::Even))),
                phases: source,
                ..TudOptions::default()
            };
            run_fud(&a, s.alpha, &opts)?
        }
        Method::OracleTud => oracle_tud_svd(&a)?,
        Method::OracleFud => oracle_fud(&a, s.alpha)?,
        Method::Shortcut => sznagy_fud(&a)?,
    };
    let report = report(method, &a, &dec);
    match &s.out {
        Some(path) => write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    eprintln!(
        "{} parts, reconstruction error {:.3e}, unitarity residual {:.3e}, {} oracle calls",
        dec.parts.len(),
        report.reconstruction_error,
        report.max_unitarity_residual,
        dec.query_ledger.encoding_calls()
    );
    Ok(())
}

fn report<'a>(method: Method, a: &CMatrix, dec: &'a UnitaryDecomposition) -> DecompositionReport<'a> {
    DecompositionReport {
        method,
        dim: dec.dim(),
        alpha_scale: dec.alpha_scale,
        degree: dec.degree,
        reconstruction_error: dec.reconstruction_error(a),
        max_unitarity_residual: dec.max_unitarity_residual(),
        branch_errors: &dec.branch_errors,
        success_probabilities: &dec.success_probabilities,
        query_ledger: dec.query_ledger,
        parts: &dec.parts,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// sign(x)·√(1−x²), odd degree
    Odd,
    /// √(1−x²), even degree
    Even,
    /// p(x) = x, degree 1
    Linear,
}

/// Cached phase file.
#[derive(Debug, Serialize, Deserialize)]
pub struct PhaseFile {
    pub target: Target,
    pub degree: usize,
    pub delta: f64,
    pub convention: String,
    pub angles: Vec<f64>,
    pub residual: f64,
    pub converged: bool,
}

/// Outcome of `qsp solve`.
#[derive(Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    CacheHit,
    Solved,
    NotConverged,
}

pub fn qsp_solve(target: Target, out: &Path, s: &Settings) -> Result<SolveOutcome> {
    let degree = s.degree.unwrap_or(match target {
        Target::Odd => default_degree(Parity::Odd),
        Target::Even => default_degree(Parity::Even),
        Target::Linear => 1,
    });
    let delta = s.delta.unwrap_or(0.1);
    if let Some(cached) = read_cached(out)? {
        if cached.converged && cached.target == target && cached.degree == degree && cached.delta == delta {
            println!("cache hit: {}", out.display());
            return Ok(SolveOutcome::CacheHit);
        }
    }
    let poly = match target {
        Target::Odd => approx_target(&TargetFunction::OddSignSqrt, degree, 1.0, delta)?.poly,
        Target::Even => approx_target(&TargetFunction::EvenSqrt, degree, 1.0, delta)?.poly,
        Target::Linear => {
            if degree != 1 {
                bail!("the linear target has degree 1, requested {degree}");
            }
            ChebyshevPoly::new(vec![0.0, 1.0], Parity::Odd, 1.0)?
        }
    };
    let (angles, residual, converged) = match solve_phases(&poly) {
        Ok(sol) => (sol.phases.angles, sol.residual, true),
        Err(Error::SolverNonConvergence { residual, best }) => (best.angles, residual, false),
        Err(e) => return Err(e.into()),
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_json(
        out,
        &PhaseFile {
            target,
            degree,
            delta,
            convention: "Wx".into(),
            angles,
            residual,
            converged,
        },
    )?;
    println!("degree {degree}, residual {residual:.3e}, converged {converged}: {}", out.display());
    Ok(if converged {
        SolveOutcome::Solved
    } else {
        SolveOutcome::NotConverged
    })
}

fn read_cached(path: &Path) -> Result<Option<PhaseFile>> {
    if !path.is_file() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text).ok())
}

/// Loads a `Wx` phase list from a phase file or a bare JSON angle array.
pub fn read_phases(path: &Path) -> Result<PhaseSequence> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(file) = serde_json::from_str::<PhaseFile>(&text) {
        return Ok(PhaseSequence::new(file.angles, Convention::Wx)?);
    }
    Ok(PhaseSequence::from_json(&text, Convention::Wx)?)
}

pub fn qsp_eval(phases: Option<&PathBuf>, fixture: Option<Parity>, points: usize, s: &Settings) -> Result<()> {
    let wx = match (phases, fixture) {
        (Some(path), None) => read_phases(path)?,
        (None, Some(parity)) => load_fixture(parity)?,
        _ => bail!("give exactly one of --file or --fixture"),
    };
    let target = match wx.parity {
        Parity::Odd => TargetFunction::OddSignSqrt,
        Parity::Even => TargetFunction::EvenSqrt,
    };
    let r = convert_wx_to_r(&wx)?;
    let curve = response_curve(&r, &target, &fidelity_grid(wx.parity, points))?;
    let worst = curve.iter().map(|p| p.abs_error).fold(0.0, f64::max);
    match &s.out {
        Some(path) => write_csv(path, &curve)?,
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for p in &curve {
                w.serialize(p)?;
            }
            w.flush()?;
        }
    }
    eprintln!("degree {}, max |Re P − f| = {worst:.3e} over {} points", wx.degree(), curve.len());
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ChannelMethod {
    /// Post-selected Sz.-Nagy dilation of each Kraus operator
    Block,
    /// Four-unitary decomposition through QSVT
    Fud,
    /// Four unitaries read off the Sz.-Nagy dilation
    Shortcut,
    /// Exact four-unitary construction
    Oracle,
}

impl ChannelMethod {
    fn name(self) -> &'static str {
        match self {
            ChannelMethod::Block => "block",
            ChannelMethod::Fud => "fud",
            ChannelMethod::Shortcut => "shortcut",
            ChannelMethod::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ChannelRow {
    pub gamma: f64,
    pub method: &'static str,
    pub state: String,
    pub observable: String,
    pub estimate: f64,
    pub exact: f64,
    pub abs_error: f64,
    pub shots: String,
    pub oracle_calls: usize,
}

/// Finite- or infinite-shot estimates of `⟨O⟩` after one damping step.
pub fn channel_simulate(method: ChannelMethod, state: &str, s: &Settings) -> Result<Vec<ChannelRow>> {
    let psi = probe_states()
        .into_iter()
        .find(|(name, _)| *name == state)
        .map(|(_, v)| v)
        .ok_or_else(|| anyhow!("unknown state {state:?}; use 1, +x or +y"))?;
    let phases = match method {
        ChannelMethod::Fud => Some(gad_phases(
            s.alpha,
            s.degree.unwrap_or(default_degree(Parity::Even)),
            s.phases.unwrap_or(PhaseArg::Solver).into(),
        )?),
        _ => None,
    };
    let observables = pauli_observables();
    let stream = RngStream::new(s.seed, 0);
    let gammas = s.gammas();
    let rows: Vec<Vec<ChannelRow>> = gammas
        .par_iter()
        .enumerate()
        .map(|(gi, &gamma)| -> Result<Vec<ChannelRow>> {
            let ch = gad_channel(s.p, gamma)?;
            let decs: Vec<Option<UnitaryDecomposition>> = ch
                .operators
                .iter()
                .map(|a| -> Result<_> {
                    Ok(match method {
                        ChannelMethod::Block => None,
                        ChannelMethod::Fud => Some(run_fud_with(a, s.alpha, phases.as_ref().unwrap(), true)?),
                        ChannelMethod::Shortcut => Some(sznagy_fud(a)?),
                        ChannelMethod::Oracle => Some(oracle_fud(a, s.alpha)?),
                    })
                })
                .collect::<Result<_>>()?;
            let mut out = Vec::with_capacity(observables.len());
            for (oi, (oname, o)) in observables.iter().enumerate() {
                let mut estimate = 0.0;
                let mut calls = 0usize;
                let mut shots = 0u64;
                for (k, (a, dec)) in ch.operators.iter().zip(&decs).enumerate() {
                    let mut rng = stream.child(gi as u64).child((oi * ch.len() + k) as u64).rng();
                    let report = match dec {
                        Some(dec) => fud_estimator(dec, o, &psi, s.shots, &mut rng)?,
                        None => {
                            if op_norm(a) == 0.0 {
                                continue;
                            }
                            let enc_o = BlockEncoding::from_unitary(o.clone())?;
                            block_postselect_estimator(&sznagy_encode(a)?, &enc_o, &psi, s.shots, &mut rng)?
                        }
                    };
                    estimate += report.estimate;
                    calls += report.oracle_calls.encoding_calls();
                    shots += report.allocation.iter().sum::<u64>();
                }
                let exact = exact_expectation(&ch, &psi, o)?;
                out.push(ChannelRow {
                    gamma,
                    method: method.name(),
                    state: state.into(),
                    observable: (*oname).into(),
                    estimate,
                    exact,
                    abs_error: (estimate - exact).abs(),
                    shots: match s.shots {
                        Shots::Infinite => "inf".into(),
                        Shots::Finite(_) => shots.to_string(),
                    },
                    oracle_calls: calls,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

pub fn write_channel(rows: &[ChannelRow], s: &Settings) -> Result<()> {
    match &s.out {
        Some(dir) => {
            ensure_dir(dir)?;
            write_csv(&dir.join("channel.csv"), rows)
        }
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}
