//! Shot-level simulation of the measurement procedures.
//!
//! Outcomes are drawn from exactly computed probabilities: a ±1 measurement
//! with mean `m` is a binomial count with success probability `(1+m)/2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::encodings::{apply_and_postselect, sznagy_encode, BlockEncoding};
use crate::error::{Error, Result};
use crate::numerics::{
    self, hermiticity_residual, matrix_element, op_norm, real, unitarity_residual, CMatrix,
    CVector, C64,
};
use crate::tud::{
    margin_for_alpha, oracle_fud, oracle_tud_svd, run_fud, run_tud, QueryLedger, TudOptions,
    UnitaryDecomposition,
};

const STATE_NORM_TOL: f64 = 1e-8;
const HADAMARD_UNITARY_TOL: f64 = 1e-8;

/// Reproducible random stream: the same `(seed, stream)` always yields the
/// same draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Independent child stream, e.g. for the `k`-th repetition.
    pub fn child(&self, k: u64) -> Self {
        Self {
            seed: self.seed,
            stream: self
                .stream
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(k.wrapping_add(1)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shots {
    Finite(u64),
    /// Every term evaluated exactly.
    Infinite,
}

impl Shots {
    pub fn count(self) -> Option<u64> {
        match self {
            Shots::Finite(n) => Some(n),
            Shots::Infinite => None,
        }
    }
}

/// One separately measured contribution to an estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermEstimate {
    pub label: String,
    /// Non-negative weight multiplying the term's mean.
    pub weight: f64,
    /// Exact mean of the ±1 outcome.
    pub exact: f64,
    pub estimate: f64,
    pub shots: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimate: f64,
    /// Infinite-shot value of the same estimator.
    pub exact: f64,
    /// Variance of `estimate` predicted from the exact term means.
    pub predicted_variance: f64,
    /// Variance of `estimate` inferred from the sampled outcomes.
    pub empirical_variance: f64,
    pub shots: Shots,
    /// Shots assigned to each term; sums to the total.
    pub allocation: Vec<u64>,
    pub terms: Vec<TermEstimate>,
    pub oracle_calls: QueryLedger,
    /// Calls to the observable's encoding.
    pub observable_calls: u64,
    /// Attempts whose post-selection failed.
    pub failed_postselections: u64,
    /// Factor the raw mean was multiplied by (normalisations of the
    /// encodings and of the observable).
    pub scale: f64,
}

/// Sampled mean of `n` ±1 outcomes with exact mean `mean`, and the unbiased
/// per-shot sample variance.
fn sample_pm1<R: Rng + ?Sized>(mean: f64, n: u64, rng: &mut R) -> Result<(f64, f64)> {
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let q = ((1.0 + mean) / 2.0).clamp(0.0, 1.0);
    let plus = Binomial::new(n, q)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .sample(rng);
    let m = (2.0 * plus as f64 - n as f64) / n as f64;
    let var = if n > 1 {
        (1.0 - m * m) * n as f64 / (n - 1) as f64
    } else {
        0.0
    };
    Ok((m, var.max(0.0)))
}

fn check_state(psi: &CVector, dim: usize) -> Result<()> {
    if psi.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "state has length {}, operator dimension is {dim}",
            psi.len()
        )));
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > STATE_NORM_TOL {
        return Err(Error::InvalidParameter(format!("state norm is {norm}, expected 1")));
    }
    Ok(())
}

/// Hadamard test of `U` on `|Ψ⟩`: the ±1 outcome has mean `Re⟨Ψ|U|Ψ⟩`, or
/// `Im⟨Ψ|U|Ψ⟩` with an extra `S†` on the control.
pub fn hadamard_test<R: Rng + ?Sized>(
    u: &CMatrix,
    psi: &CVector,
    shots: Shots,
    rng: &mut R,
    imaginary_part: bool,
) -> Result<EstimatorReport> {
    let (rows, cols) = u.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let residual = unitarity_residual(u);
    if residual > HADAMARD_UNITARY_TOL {
        return Err(Error::NotUnitary { residual });
    }
    check_state(psi, rows)?;
    let z = matrix_element(psi, u, psi);
    let mean = if imaginary_part { z.im } else { z.re };
    let label = if imaginary_part { "Im⟨Ψ|U|Ψ⟩" } else { "Re⟨Ψ|U|Ψ⟩" };
    single_term_report(label, mean, shots, rng)
}

fn single_term_report<R: Rng + ?Sized>(
    label: &str,
    mean: f64,
    shots: Shots,
    rng: &mut R,
) -> Result<EstimatorReport> {
    let per_shot = (1.0 - mean * mean).max(0.0);
    let (estimate, predicted, empirical, n) = match shots {
        Shots::Infinite => (mean, 0.0, 0.0, 0),
        Shots::Finite(0) => return Err(Error::InvalidParameter("zero shots".into())),
        Shots::Finite(n) => {
            let (m, var) = sample_pm1(mean, n, rng)?;
            (m, per_shot / n as f64, var / n as f64, n)
        }
    };
    Ok(EstimatorReport {
        estimate,
        exact: mean,
        predicted_variance: predicted,
        empirical_variance: empirical,
        shots,
        allocation: vec![n],
        terms: vec![TermEstimate {
            label: label.into(),
            weight: 1.0,
            exact: mean,
            estimate,
            shots: n,
        }],
        oracle_calls: QueryLedger {
            calls_state_prep: n as usize,
            ..QueryLedger::default()
        },
        observable_calls: n,
        failed_postselections: 0,
        scale: 1.0,
    })
}

/// Post-selected block-encoding estimator of `⟨ψ|A†OA|ψ⟩`.
///
/// Each attempt succeeds (`Y = 1`) with probability `p = ‖(A/α)ψ‖²`; on
/// success a Hadamard test of `U_O` gives `Z = ±1`. The estimator averages
/// `X = YZ` over all attempts, so `Var(X) = p − ⟨X⟩²`.
pub fn block_postselect_estimator<R: Rng + ?Sized>(
    enc_a: &BlockEncoding,
    enc_o: &BlockEncoding,
    psi: &CVector,
    shots: Shots,
    rng: &mut R,
) -> Result<EstimatorReport> {
    if enc_a.system_dim() != enc_o.system_dim() {
        return Err(Error::DimensionMismatch(format!(
            "encodings act on dimensions {} and {}",
            enc_a.system_dim(),
            enc_o.system_dim()
        )));
    }
    check_state(psi, enc_a.system_dim())?;
    let outcome = apply_and_postselect(enc_a, psi)?;
    let p = outcome.success_probability.clamp(0.0, 1.0);
    // Re⟨Ψ|U_O|Ψ⟩ on the conditioned state, i.e. ⟨φ|O|φ⟩/α_O.
    let r = match &outcome.conditioned_state {
        Some(phi) => numerics::expectation(phi, &enc_o.block()).re,
        None => 0.0,
    };
    let mean = p * r;
    let scale = enc_a.alpha * enc_a.alpha * enc_o.alpha;
    let per_shot = (p - mean * mean).max(0.0);

    let (raw, predicted, empirical, n, successes) = match shots {
        Shots::Infinite => (mean, 0.0, 0.0, 0, 0),
        Shots::Finite(0) => return Err(Error::InvalidParameter("zero shots".into())),
        Shots::Finite(n) => {
            let successes = Binomial::new(n, p)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng);
            let q = ((1.0 + r) / 2.0).clamp(0.0, 1.0);
            let plus = if successes > 0 {
                Binomial::new(successes, q)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?
                    .sample(rng)
            } else {
                0
            };
            let nf = n as f64;
            let m = (2.0 * plus as f64 - successes as f64) / nf;
            let second = successes as f64 / nf;
            let var = if n > 1 {
                (second - m * m).max(0.0) * nf / (nf - 1.0)
            } else {
                0.0
            };
            (m, per_shot / nf, var / nf, n, successes)
        }
    };
    Ok(EstimatorReport {
        estimate: scale * raw,
        exact: scale * mean,
        predicted_variance: scale * scale * predicted,
        empirical_variance: scale * scale * empirical,
        shots,
        allocation: vec![n],
        terms: vec![TermEstimate {
            label: "YZ".into(),
            weight: scale,
            exact: mean,
            estimate: raw,
            shots: n,
        }],
        oracle_calls: QueryLedger {
            calls_u_a: n as usize,
            calls_state_prep: n as usize,
            ..QueryLedger::default()
        },
        observable_calls: successes,
        failed_postselections: n - successes,
        scale,
    })
}

/// Observable prepared for Hadamard tests: `O/s` with `s = max(1, ‖O‖)`.
struct ScaledObservable {
    matrix: CMatrix,
    scale: f64,
}

fn scale_observable(o: &CMatrix, dim: usize) -> Result<ScaledObservable> {
    if o.nrows() != dim || o.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "observable is {}x{}, system dimension is {dim}",
            o.nrows(),
            o.ncols()
        )));
    }
    let residual = hermiticity_residual(o);
    if residual > 1e-10 {
        return Err(Error::NotHermitian { residual });
    }
    let scale = op_norm(o).max(1.0);
    Ok(ScaledObservable {
        matrix: o * real(1.0 / scale),
        scale,
    })
}

/// Exact weighted terms of `⟨ψ|A†OA|ψ⟩` for `A = Σ c_j V_j`:
/// `|c_j|²⟨V_j†OV_j⟩` plus `2|c̄_j c_k| Re(e^{iθ}⟨V_j†OV_k⟩)` for `j < k`.
/// Returns `(label, weight, mean, parts used)`.
fn pairwise_terms(
    coefficients: &[C64],
    operators: &[&CMatrix],
    o: &CMatrix,
    psi: &CVector,
) -> Vec<(String, f64, f64, (usize, usize))> {
    let images: Vec<CVector> = operators.iter().map(|v| *v * psi).collect();
    let o_images: Vec<CVector> = images.iter().map(|x| o * x).collect();
    let mut terms = Vec::new();
    for j in 0..operators.len() {
        for k in j..operators.len() {
            let z = images[j].dotc(&o_images[k]);
            if j == k {
                terms.push((
                    format!("V{j}†OV{j}"),
                    coefficients[j].norm_sqr(),
                    z.re,
                    (j, k),
                ));
            } else {
                let w = coefficients[j].conj() * coefficients[k];
                let mag = w.norm();
                let mean = if mag > 0.0 { (z * (w / mag)).re } else { 0.0 };
                terms.push((format!("V{j}†OV{k}"), 2.0 * mag, mean, (j, k)));
            }
        }
    }
    terms
}

/// Splits `n` shots in proportion to `weights` by largest remainder; ties
/// go to the earlier term.
pub fn allocate_shots(n: u64, weights: &[f64]) -> Result<Vec<u64>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidParameter("weights must be non-negative with a positive sum".into()));
    }
    let exact: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut alloc: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let mut rest = n - alloc.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        if weights[i] > 0.0 {
            alloc[i] += 1;
            rest -= 1;
        }
    }
    Ok(alloc)
}

fn scaled_ledger(l: &QueryLedger, n: u64) -> QueryLedger {
    let n = n as usize;
    QueryLedger {
        calls_u_a: l.calls_u_a * n,
        calls_u_a_dagger: l.calls_u_a_dagger * n,
        calls_state_prep: l.calls_state_prep * n,
        oaa_rounds: l.oaa_rounds * n,
        qsvt_queries: l.qsvt_queries * n,
        addition_queries: l.addition_queries * n,
    }
}

fn pairwise_estimator<R: Rng + ?Sized>(
    dec: &UnitaryDecomposition,
    o: &CMatrix,
    psi: &CVector,
    shots: Shots,
    rng: &mut R,
) -> Result<EstimatorReport> {
    let d = dec.dim();
    check_state(psi, d)?;
    let obs = scale_observable(o, d)?;
    let coefficients = dec.coefficients();
    let terms = pairwise_terms(&coefficients, &dec.operators(), &obs.matrix, psi);
    let weights: Vec<f64> = terms.iter().map(|t| t.1).collect();
    let exact_raw: f64 = terms.iter().map(|t| t.1 * t.2).sum();

    let allocation = match shots {
        Shots::Infinite => vec![0; terms.len()],
        Shots::Finite(n) => {
            let alloc = allocate_shots(n, &weights)?;
            if terms.iter().zip(&alloc).any(|(t, &k)| t.1 > 0.0 && k == 0) {
                return Err(Error::InvalidParameter(format!(
                    "{n} shots cannot cover {} terms",
                    terms.len()
                )));
            }
            alloc
        }
    };

    let mut raw = 0.0;
    let mut predicted = 0.0;
    let mut empirical = 0.0;
    let mut ledger = QueryLedger::default();
    let mut out_terms = Vec::with_capacity(terms.len());
    for ((label, weight, mean, (j, k)), &n) in terms.into_iter().zip(&allocation) {
        let estimate = match shots {
            Shots::Infinite => mean,
            Shots::Finite(_) if n == 0 => mean,
            Shots::Finite(_) => {
                let (m, var) = sample_pm1(mean, n, rng)?;
                let nf = n as f64;
                predicted += weight * weight * (1.0 - mean * mean).max(0.0) / nf;
                empirical += weight * weight * var / nf;
                let mut calls = scaled_ledger(&dec.parts[j].ledger, n);
                if j != k {
                    calls.add(&scaled_ledger(&dec.parts[k].ledger, n));
                }
                ledger.add(&calls);
                m
            }
        };
        raw += weight * estimate;
        out_terms.push(TermEstimate {
            label,
            weight,
            exact: mean,
            estimate,
            shots: n,
        });
    }
    let total = shots.count().unwrap_or(0);
    // One prepared input state per shot, whichever term it feeds.
    ledger.calls_state_prep = total as usize;
    let scale = obs.scale;
    Ok(EstimatorReport {
        estimate: scale * raw,
        exact: scale * exact_raw,
        predicted_variance: scale * scale * predicted,
        empirical_variance: scale * scale * empirical,
        shots,
        allocation,
        terms: out_terms,
        oracle_calls: ledger,
        observable_calls: total,
        failed_postselections: 0,
        scale,
    })
}

/// Two-unitary estimator `¼(⟨Ũ₁†OŨ₁⟩ + ⟨Ũ₂†OŨ₂⟩ + 2Re⟨Ũ₁†OŨ₂⟩)` with the
/// shots split `N′/4, N′/4, N′/2`.
pub fn tud_estimator<R: Rng + ?Sized>(
    dec: &UnitaryDecomposition,
    o: &CMatrix,
    psi: &CVector,
    shots: Shots,
    rng: &mut R,
) -> Result<EstimatorReport> {
    if dec.parts.len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "expected 2 parts, got {}",
            dec.parts.len()
        )));
    }
    pairwise_estimator(dec, o, psi, shots, rng)
}

/// Four-unitary estimator: four direct terms of weight `|c|²` and six
/// cross terms of weight `2|c̄_j c_k|`, shots proportional to weight.
pub fn fud_estimator<R: Rng + ?Sized>(
    dec: &UnitaryDecomposition,
    o: &CMatrix,
    psi: &CVector,
    shots: Shots,
    rng: &mut R,
) -> Result<EstimatorReport> {
    if dec.parts.len() != 4 {
        return Err(Error::InvalidParameter(format!(
            "expected 4 parts, got {}",
            dec.parts.len()
        )));
    }
    pairwise_estimator(dec, o, psi, shots, rng)
}

/// `(1/N′)(1 − (4a² + 4b² + 8c²)/16)` for the two-unitary estimator with
/// `a = ⟨U₁†OU₁⟩`, `b = ⟨U₂†OU₂⟩`, `c = Re⟨U₁†OU₂⟩`.
pub fn tud_variance(a: f64, b: f64, c: f64, shots: u64) -> f64 {
    (1.0 - (4.0 * a * a + 4.0 * b * b + 8.0 * c * c) / 16.0) / shots as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRuns {
    /// `1/p_k`, or `1/√p_k` with amplitude amplification.
    pub per_operator: Vec<f64>,
    pub total: f64,
    /// Runs after which operator `k` has succeeded at least once with
    /// probability `1 − β`.
    pub confidence_runs: Vec<u64>,
    pub confidence_total: u64,
}

pub fn expected_runs(probabilities: &[f64], amplified: bool, beta: f64) -> Result<ExpectedRuns> {
    if probabilities.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(&p) = probabilities.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::InvalidParameter(format!("probability {p} is outside (0, 1]")));
    }
    let sum: f64 = probabilities.iter().sum();
    if sum > 1.0 + 1e-10 {
        return Err(Error::InvalidParameter(format!("probabilities sum to {sum}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("beta {beta} is outside (0, 1)")));
    }
    let cost = |p: f64| if amplified { 1.0 / p.sqrt() } else { 1.0 / p };
    let per_operator: Vec<f64> = probabilities.iter().map(|&p| cost(p)).collect();
    let log_beta = (1.0 / beta).ln();
    let confidence_runs: Vec<u64> = per_operator
        .iter()
        .map(|&runs| (log_beta * runs).ceil().max(1.0) as u64)
        .collect();
    Ok(ExpectedRuns {
        total: per_operator.iter().sum(),
        confidence_total: confidence_runs.iter().sum(),
        per_operator,
        confidence_runs,
    })
}

/// Mean number of attempts until the first success of a probability-`p`
/// post-selection, over `trials` simulated retries.
pub fn retry_simulate<R: Rng + ?Sized>(p: f64, trials: u64, rng: &mut R) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!("probability {p} is outside (0, 1]")));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("zero trials".into()));
    }
    let geo = Geometric::new(p).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let failures: u64 = (0..trials).map(|_| geo.sample(rng)).sum();
    Ok(1.0 + failures as f64 / trials as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Pipeline {
    Tud,
    Fud { alpha: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorBudget {
    /// `|⟨A†OA⟩ − estimate|`
    pub lhs: f64,
    /// `2(ε + h)`
    pub bound: f64,
    pub exact: f64,
    pub estimate: f64,
    /// Mean over the weighted terms of `|term − exact term|`, the exact
    /// terms coming from the oracle decomposition of `A`.
    pub mean_term_error: f64,
}

impl ErrorBudget {
    pub fn holds(&self) -> bool {
        self.lhs <= self.bound
    }
}

/// Fixed direction of the block-encoding error `Ã − A`.
const PERTURBATION_SEED: u64 = 0x05ee_de44;

/// Infinite-shot estimate of `⟨ψ|A†OA|ψ⟩` from a pipeline run on
/// `Ã = A + h·E` (`‖E‖ = 1`) with polynomial tolerance `ε`; `ε = 0` uses the
/// exact decomposition of `Ã`.
pub fn error_budget_check(
    a: &CMatrix,
    o: &CMatrix,
    psi: &CVector,
    eps: f64,
    h: f64,
    pipeline: Pipeline,
    use_oaa: bool,
) -> Result<ErrorBudget> {
    if !(eps >= 0.0 && h >= 0.0) {
        return Err(Error::InvalidParameter(format!("ε = {eps} and h = {h} must be non-negative")));
    }
    if op_norm(o) > 1.0 + 1e-10 {
        return Err(Error::NotContraction { norm: op_norm(o) });
    }
    let d = a.nrows();
    check_state(psi, d)?;
    let perturbed = if h > 0.0 {
        let dir = numerics::random_unitary(d, PERTURBATION_SEED)?;
        a + dir * real(h)
    } else {
        a.clone()
    };
    let oracle = |m: &CMatrix| match pipeline {
        Pipeline::Tud => oracle_tud_svd(m),
        Pipeline::Fud { alpha } => oracle_fud(m, alpha),
    };
    let dec = if eps == 0.0 {
        oracle(&perturbed)?
    } else {
        let built = match pipeline {
            Pipeline::Tud => {
                let s = numerics::svd(&perturbed)?;
                let hi = s.singular_values[0];
                let lo = *s.singular_values.last().unwrap();
                let delta = lo.min(1.0 - hi).min(0.45);
                if !(delta > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "singular values span [{lo}, {hi}], no margin for the odd polynomial"
                    )));
                }
                let opts = TudOptions {
                    delta,
                    epsilon_target: eps,
                    oaa: true,
                    ..TudOptions::default()
                };
                run_tud(&sznagy_encode(&perturbed)?, &opts)?
            }
            Pipeline::Fud { alpha } => {
                let opts = TudOptions {
                    delta: margin_for_alpha(alpha),
                    epsilon_target: eps,
                    oaa: true,
                    ..TudOptions::default()
                };
                run_fud(&perturbed, alpha, &opts)?
            }
        };
        if use_oaa {
            built
        } else {
            built.without_oaa().expect("QSVT decompositions keep their pre-OAA parts")
        }
    };
    let reference = oracle(a)?;
    let est = pairwise_estimator(&dec, o, psi, Shots::Infinite, &mut numerics::seeded_rng(0))?;
    let truth = pairwise_estimator(&reference, o, psi, Shots::Infinite, &mut numerics::seeded_rng(0))?;
    let exact = numerics::expectation(psi, &(a.adjoint() * o * a)).re;
    let n_terms = est.terms.len().max(1) as f64;
    let mean_term_error = est
        .terms
        .iter()
        .zip(&truth.terms)
        .map(|(x, y)| (x.weight * x.exact - y.weight * y.exact).abs())
        .sum::<f64>()
        / n_terms;
    Ok(ErrorBudget {
        lhs: (exact - est.exact).abs(),
        bound: 2.0 * (eps + h),
        exact,
        estimate: est.exact,
        mean_term_error,
    })
}

/// Empirical variance of a sample (denominator `n − 1`).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}
