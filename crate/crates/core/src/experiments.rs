//! Parameter sweeps behind the figure data and the acceptance checks.
//!
//! Every sweep is deterministic for a fixed seed: sample `i` draws from its
//! own [`RngStream`] child, so results do not depend on scheduling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{exact_expectation, gad_channel, pauli_observables, probe_states};
use crate::encodings::sznagy_encode;
use crate::error::{Error, Result};
use crate::estimation::{fud_estimator, RngStream, Shots};
use crate::numerics::{self, op_norm, real, CMatrix, CVector};
use crate::qsp::{qsp_response_scalar, Parity, PhaseSequence, TargetFunction};
use crate::tud::{
    margin_for_alpha, oracle_fud, prepare_phases, run_fud_hermitian_with, run_fud_with,
    run_tud_with, sznagy_fud, PhaseSource, PreparedPhases, QueryLedger, TudOptions,
};

/// `n` equispaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Real and imaginary response of an `R`-convention sequence against the
/// analytic target.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResponsePoint {
    pub x: f64,
    pub re: f64,
    pub im: f64,
    pub target: f64,
    pub abs_error: f64,
}

pub fn response_curve(phases: &PhaseSequence, target: &TargetFunction, xs: &[f64]) -> Result<Vec<ResponsePoint>> {
    xs.iter()
        .map(|&x| {
            let p = qsp_response_scalar(phases, x)?;
            let t = target.eval(x).ok_or_else(|| {
                Error::InvalidParameter("response curves need an analytic target".into())
            })?;
            Ok(ResponsePoint {
                x,
                re: p.re,
                im: p.im,
                target: t,
                abs_error: (p.re - t).abs(),
            })
        })
        .collect()
}

/// Grid on which a fixture is compared with its target: `|x| ∈ [0.1, 0.9]`
/// for the odd list, `[−0.9, 0.9]` for the even one, `points` nodes total.
pub fn fidelity_grid(parity: Parity, points: usize) -> Vec<f64> {
    match parity {
        Parity::Odd => {
            let half = linspace(0.1, 0.9, points / 2);
            half.iter().rev().map(|x| -x).chain(half.iter().copied()).collect()
        }
        Parity::Even => linspace(-0.9, 0.9, points),
    }
}

/// Worst-case `|Re P(x) − f(x)|` of the converted sequence on the fidelity grid.
pub fn fidelity_error(phases_r: &PhaseSequence, points: usize) -> Result<f64> {
    let target = match phases_r.parity {
        Parity::Odd => TargetFunction::OddSignSqrt,
        Parity::Even => TargetFunction::EvenSqrt,
    };
    let curve = response_curve(phases_r, &target, &fidelity_grid(phases_r.parity, points))?;
    Ok(curve.iter().map(|p| p.abs_error).fold(0.0, f64::max))
}

/// One random matrix of the branch-error sweeps.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchRow {
    /// Common singular value (or eigenvalue) of the input.
    pub value: f64,
    pub error_plus: f64,
    pub error_minus: f64,
    /// `‖Ũ‖` after amplification, largest of the two branches.
    pub amplified_norm: f64,
    pub success_probability: f64,
}

impl BranchRow {
    pub fn max_error(&self) -> f64 {
        self.error_plus.max(self.error_minus)
    }
}

/// `A = σU` with Haar `U` and `σ ~ U(0, 1)`, decomposed with odd phases.
pub fn tud_sweep(phases: &PreparedPhases, samples: usize, stream: RngStream) -> Result<Vec<BranchRow>> {
    let mut rows: Vec<BranchRow> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let sigma: f64 = rng.gen();
            let u = numerics::random_haar_unitary(2, rng.gen())?;
            let a = u * real(sigma);
            let dec = run_tud_with(&sznagy_encode(&a)?, phases, true)?;
            Ok(BranchRow {
                value: sigma,
                error_plus: dec.branch_errors[0],
                error_minus: dec.branch_errors[1],
                amplified_norm: dec.parts.iter().map(|p| op_norm(&p.operator)).fold(0.0, f64::max),
                success_probability: dec.success_probabilities.iter().cloned().fold(1.0, f64::min),
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    Ok(rows)
}

/// `H = λI` with `λ ~ U(0, 1)`, decomposed with even phases at `α = 1`.
pub fn hermitian_sweep(phases: &PreparedPhases, samples: usize, stream: RngStream) -> Result<Vec<BranchRow>> {
    let mut rows: Vec<BranchRow> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let lambda: f64 = rng.gen();
            let h = CMatrix::identity(2, 2) * real(lambda);
            let dec = run_fud_hermitian_with(&sznagy_encode(&h)?, 1.0, phases, true)?;
            Ok(BranchRow {
                value: lambda,
                error_plus: dec.branch_errors[0],
                error_minus: dec.branch_errors[1],
                amplified_norm: dec.parts.iter().map(|p| op_norm(&p.operator)).fold(0.0, f64::max),
                success_probability: dec.success_probabilities.iter().cloned().fold(1.0, f64::min),
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    Ok(rows)
}

/// Largest branch error over rows whose value lies in `[lo, hi]`.
pub fn max_error_in(rows: &[BranchRow], lo: f64, hi: f64) -> f64 {
    rows.iter()
        .filter(|r| (lo..=hi).contains(&r.value))
        .map(BranchRow::max_error)
        .fold(0.0, f64::max)
}

/// Even phases for the GAD experiments: degree `n` at scaling `α`.
pub fn gad_phases(alpha: f64, degree: usize, source: PhaseSource) -> Result<PreparedPhases> {
    prepare_phases(
        Parity::Even,
        &TudOptions {
            delta: margin_for_alpha(alpha),
            degree_override: Some(degree),
            phases: source,
            ..TudOptions::default()
        },
    )
}

/// Query accounting and branch errors of one GAD Kraus operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GadQueryRow {
    pub gamma: f64,
    pub kraus: usize,
    /// `⟨ψ|A_k†A_k|ψ⟩`
    pub probability: f64,
    /// `1/p_k` for the post-selection route; infinite when `p_k = 0`.
    pub expected_calls: f64,
    /// Encoding calls per decomposition unitary.
    pub tud_calls: usize,
    pub tud_state_prep: usize,
    /// Largest branch error for `H₁` and `H₂`.
    pub error_h1: f64,
    pub error_h2: f64,
}

pub fn gad_queries(
    p: f64,
    gammas: &[f64],
    alpha: f64,
    phases: &PreparedPhases,
    psi: &CVector,
) -> Result<Vec<GadQueryRow>> {
    let rows: Vec<Vec<GadQueryRow>> = gammas
        .par_iter()
        .map(|&gamma| {
            let ch = gad_channel(p, gamma)?;
            ch.operators
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    let dec = run_fud_with(a, alpha, phases, true)?;
                    let prob = numerics::expectation(psi, &(a.adjoint() * a)).re.max(0.0);
                    let ledger: QueryLedger = dec.parts[0].ledger;
                    Ok(GadQueryRow {
                        gamma,
                        kraus: k,
                        probability: prob,
                        expected_calls: if prob > 0.0 { 1.0 / prob } else { f64::INFINITY },
                        tud_calls: ledger.encoding_calls(),
                        tud_state_prep: ledger.calls_state_prep,
                        error_h1: dec.branch_errors[0].max(dec.branch_errors[1]),
                        error_h2: dec.branch_errors[2].max(dec.branch_errors[3]),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// One `(γ, ψ, O)` point of the GAD expectation sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GadExpectationRow {
    pub gamma: f64,
    pub state: String,
    pub observable: String,
    pub estimate: f64,
    pub exact: f64,
    pub abs_error: f64,
    /// Same estimate from the pre-amplification operators.
    pub pre_oaa_estimate: f64,
    pub pre_oaa_error: f64,
    /// Mean over the ten terms of every Kraus operator of the pre-OAA
    /// deviation from the exact terms.
    pub pre_oaa_mean_term_error: f64,
    pub oracle_calls: usize,
}

/// Infinite-shot four-unitary estimates of `⟨O⟩` after one GAD step, for
/// the three probe states and the three Paulis.
pub fn gad_expectations(
    p: f64,
    gammas: &[f64],
    alpha: f64,
    phases: &PreparedPhases,
) -> Result<Vec<GadExpectationRow>> {
    let states = probe_states();
    let observables = pauli_observables();
    let rows: Vec<Vec<GadExpectationRow>> = gammas
        .par_iter()
        .map(|&gamma| {
            let ch = gad_channel(p, gamma)?;
            let mut decs = Vec::with_capacity(ch.len());
            for a in &ch.operators {
                let post = run_fud_with(a, alpha, phases, true)?;
                let pre = post.without_oaa().expect("QSVT decomposition keeps pre-OAA parts");
                decs.push((post, pre, oracle_fud(a, alpha)?));
            }
            let mut out = Vec::new();
            for (sname, psi) in &states {
                for (oname, o) in &observables {
                    let exact = exact_expectation(&ch, psi, o)?;
                    let mut post_sum = 0.0;
                    let mut pre_sum = 0.0;
                    let mut term_error = 0.0;
                    let mut n_terms = 0usize;
                    let mut calls = 0usize;
                    let mut rng = numerics::seeded_rng(0);
                    for (post, pre, oracle) in &decs {
                        post_sum += fud_estimator(post, o, psi, Shots::Infinite, &mut rng)?.exact;
                        let pre_report = fud_estimator(pre, o, psi, Shots::Infinite, &mut rng)?;
                        let ref_report = fud_estimator(oracle, o, psi, Shots::Infinite, &mut rng)?;
                        pre_sum += pre_report.exact;
                        for (t, r) in pre_report.terms.iter().zip(&ref_report.terms) {
                            term_error += (t.weight * t.exact - r.weight * r.exact).abs();
                            n_terms += 1;
                        }
                        calls += post.query_ledger.encoding_calls();
                    }
                    out.push(GadExpectationRow {
                        gamma,
                        state: (*sname).into(),
                        observable: (*oname).into(),
                        estimate: post_sum,
                        exact,
                        abs_error: (post_sum - exact).abs(),
                        pre_oaa_estimate: pre_sum,
                        pre_oaa_error: (pre_sum - exact).abs(),
                        pre_oaa_mean_term_error: term_error / n_terms.max(1) as f64,
                        oracle_calls: calls,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Exactness of the Sz.-Nagy four-unitary shortcut over a GAD sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShortcutRow {
    pub gamma: f64,
    pub kraus: usize,
    pub reconstruction_error: f64,
    pub unitarity_residual: f64,
    pub calls_per_unitary: Vec<usize>,
    pub oaa_rounds: usize,
}

pub fn gad_shortcut(p: f64, gammas: &[f64]) -> Result<Vec<ShortcutRow>> {
    let mut rows = Vec::new();
    for &gamma in gammas {
        let ch = gad_channel(p, gamma)?;
        for (k, a) in ch.operators.iter().enumerate() {
            let dec = sznagy_fud(a)?;
            rows.push(ShortcutRow {
                gamma,
                kraus: k,
                reconstruction_error: dec.reconstruction_error(a),
                unitarity_residual: dec.max_unitarity_residual(),
                calls_per_unitary: dec.parts.iter().map(|p| p.ledger.encoding_calls()).collect(),
                oaa_rounds: dec.query_ledger.oaa_rounds,
            });
        }
    }
    Ok(rows)
}

/// `(slope, R²)` of the least-squares fit `y ≈ slope·x` through the origin.
pub fn fit_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let slope = sxy / sxx;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - mean).powi(2)).sum();
    (slope, if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 })
}
