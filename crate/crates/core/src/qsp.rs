//! Polynomial targets, QSP phase factors and QSVT sequences.
//!
//! Two scalar conventions are supported. `Wx` uses the signal operator
//! `W(x) = [[x, i√(1−x²)], [i√(1−x²), x]]`, `R` the reflection
//! `R(x) = [[x, √(1−x²)], [√(1−x²), −x]]`. In both the response of phases
//! `φ_0..φ_n` is `⟨0| e^{iφ_0σ_z} S(x) e^{iφ_1σ_z} ⋯ S(x) e^{iφ_nσ_z} |0⟩`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encodings::BlockEncoding;
use crate::error::{Error, Result};
use crate::numerics::{self, c, kron, real, svd, CMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_degree(n: usize) -> Self {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn matches(self, n: usize) -> bool {
        Self::of_degree(n) == self
    }

    /// `p(−x) = sign · p(x)`
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    fn smallest_degree(self) -> usize {
        match self {
            Parity::Even => 2,
            Parity::Odd => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    Wx,
    R,
}

impl Convention {
    fn name(self) -> &'static str {
        match self {
            Convention::Wx => "Wx",
            Convention::R => "R",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TargetFunction {
    /// `sign(x)·√(1−x²)`
    OddSignSqrt,
    /// `√(1−x²)`
    EvenSqrt,
    /// Samples `(x, f(x))` fitted by least squares in the given parity.
    CustomGrid { points: Vec<(f64, f64)>, parity: Parity },
}

impl TargetFunction {
    pub fn parity(&self) -> Parity {
        match self {
            TargetFunction::OddSignSqrt => Parity::Odd,
            TargetFunction::EvenSqrt => Parity::Even,
            TargetFunction::CustomGrid { parity, .. } => *parity,
        }
    }

    /// Exact value for the analytic targets.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let s = (1.0 - x * x).max(0.0).sqrt();
        match self {
            TargetFunction::OddSignSqrt => Some(if x < 0.0 { -s } else { s }),
            TargetFunction::EvenSqrt => Some(s),
            TargetFunction::CustomGrid { .. } => None,
        }
    }
}

/// A real polynomial in the Chebyshev basis with definite parity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevPoly {
    pub coefficients: Vec<f64>,
    pub parity: Parity,
    /// Factor the target was multiplied by before fitting.
    pub scale: f64,
}

impl ChebyshevPoly {
    pub fn new(mut coefficients: Vec<f64>, parity: Parity, scale: f64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Empty);
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        let degree = coefficients.len() - 1;
        if !parity.matches(degree) {
            return Err(Error::ParityMismatch(format!(
                "degree {degree} cannot carry {parity:?} parity"
            )));
        }
        let magnitude = coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1.0);
        for (k, c) in coefficients.iter_mut().enumerate() {
            if !parity.matches(k) {
                if c.abs() > 1e-12 * magnitude {
                    return Err(Error::ParityMismatch(format!(
                        "coefficient {k} is {c:e} in a {parity:?} polynomial"
                    )));
                }
                *c = 0.0;
            }
        }
        Ok(Self {
            coefficients,
            parity,
            scale,
        })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let (mut b1, mut b2) = (0.0, 0.0);
        for &ck in self.coefficients.iter().skip(1).rev() {
            let b0 = ck + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coefficients[0] + x * b1 - b2
    }

    /// `max |p|` over `points` equispaced nodes on `[−1, 1]`.
    pub fn max_abs(&self, points: usize) -> f64 {
        grid(-1.0, 1.0, points)
            .map(|x| self.eval(x).abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
            parity: self.parity,
            scale: self.scale * factor,
        }
    }
}

fn grid(a: f64, b: f64, points: usize) -> impl Iterator<Item = f64> {
    let step = if points > 1 {
        (b - a) / (points - 1) as f64
    } else {
        0.0
    };
    (0..points).map(move |i| a + step * i as f64)
}

/// Grid size used for the `|p| ≤ 1` check.
pub const MAX_ABS_GRID: usize = 10_000;
/// Ceiling imposed on `max |p|` so the phase solver has headroom.
pub const MAX_ABS_CEILING: f64 = 1.0 - 1e-5;
const SUP_GRID: usize = 4001;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolyApprox {
    pub poly: ChebyshevPoly,
    /// `max |s·f − p|` over the approximation domain.
    pub sup_error: f64,
    /// `max |p|` on `[−1, 1]` after renormalisation.
    pub max_abs: f64,
    /// Width parameter of the smoothed sign, for the odd target.
    pub smoothing: Option<f64>,
}

fn chebyshev_projection(g: impl Fn(f64) -> f64, n: usize) -> Vec<f64> {
    let m = 4 * n.max(1);
    let thetas: Vec<f64> = (0..m)
        .map(|j| (j as f64 + 0.5) * std::f64::consts::PI / m as f64)
        .collect();
    let values: Vec<f64> = thetas.iter().map(|t| g(t.cos())).collect();
    let mut coeffs: Vec<f64> = (0..=n)
        .map(|k| {
            2.0 / m as f64
                * thetas
                    .iter()
                    .zip(&values)
                    .map(|(t, v)| v * (k as f64 * t).cos())
                    .sum::<f64>()
        })
        .collect();
    coeffs[0] /= 2.0;
    coeffs
}

fn sup_error_on(poly: &ChebyshevPoly, f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    grid(lo, hi, SUP_GRID)
        .map(|x| (poly.eval(x) - f(x)).abs())
        .fold(0.0, f64::max)
}

fn zero_wrong_parity(coeffs: &mut [f64], parity: Parity) {
    for (k, c) in coeffs.iter_mut().enumerate() {
        if !parity.matches(k) {
            *c = 0.0;
        }
    }
}

fn custom_fit(points: &[(f64, f64)], parity: Parity, n: usize, s: f64) -> Result<Vec<f64>> {
    let ks: Vec<usize> = (0..=n).filter(|&k| parity.matches(k)).collect();
    if points.len() < ks.len() {
        return Err(Error::InvalidParameter(format!(
            "{} samples cannot determine {} coefficients",
            points.len(),
            ks.len()
        )));
    }
    let design = DMatrix::from_fn(points.len(), ks.len(), |i, j| {
        let x = points[i].0.clamp(-1.0, 1.0);
        (ks[j] as f64 * x.acos()).cos()
    });
    let rhs = DVector::from_iterator(points.len(), points.iter().map(|&(_, y)| s * y));
    let sol = design
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .map_err(|_| Error::NotConverged("least-squares fit"))?;
    let mut coeffs = vec![0.0; n + 1];
    for (j, &k) in ks.iter().enumerate() {
        coeffs[k] = sol[j];
    }
    Ok(coeffs)
}

/// Chebyshev approximation of `s·f` with degree `n`.
///
/// The odd target is discontinuous at the origin, so its sign factor is
/// replaced by `erf(κx/δ)` with `κ` chosen from a small scan to minimise the
/// error on `[δ, 1−δ]`. If `max |p|` exceeds `1 − 1e-5` the polynomial is
/// scaled down to that ceiling.
pub fn approx_target(target: &TargetFunction, n: usize, s: f64, delta: f64) -> Result<PolyApprox> {
    let parity = target.parity();
    if n < 1 {
        return Err(Error::InvalidParameter("degree must be at least 1".into()));
    }
    if !parity.matches(n) {
        return Err(Error::ParityMismatch(format!(
            "target needs {parity:?} degree, got {n}"
        )));
    }
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidParameter(format!("scale {s} is outside (0, 1]")));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidParameter(format!("margin {delta} is outside (0, 0.5)")));
    }
    let sqrt1m = |x: f64| (1.0 - x * x).max(0.0).sqrt();

    let (coeffs, smoothing) = match target {
        TargetFunction::OddSignSqrt => {
            let mut best: Option<(f64, f64, Vec<f64>)> = None;
            for step in 0..=12 {
                let kappa = 1.0 + 0.25 * step as f64;
                let k = kappa / delta;
                let mut coeffs = chebyshev_projection(|x| s * libm::erf(k * x) * sqrt1m(x), n);
                zero_wrong_parity(&mut coeffs, parity);
                let poly = ChebyshevPoly::new(coeffs.clone(), parity, s)?;
                let err = sup_error_on(&poly, |x| s * sqrt1m(x), delta, 1.0 - delta);
                if best.as_ref().is_none_or(|b| err < b.0) {
                    best = Some((err, kappa, coeffs));
                }
            }
            let (_, kappa, coeffs) = best.expect("scan is non-empty");
            (coeffs, Some(kappa))
        }
        TargetFunction::EvenSqrt => {
            let mut coeffs = chebyshev_projection(|x| s * sqrt1m(x), n);
            zero_wrong_parity(&mut coeffs, parity);
            (coeffs, None)
        }
        TargetFunction::CustomGrid { points, parity } => (custom_fit(points, *parity, n, s)?, None),
    };

    let mut poly = ChebyshevPoly::new(coeffs, parity, s)?;
    let mut max_abs = poly.max_abs(MAX_ABS_GRID);
    if max_abs > MAX_ABS_CEILING {
        poly = poly.scaled(MAX_ABS_CEILING / max_abs);
        max_abs = poly.max_abs(MAX_ABS_GRID);
    }
    let sup_error = match target {
        TargetFunction::OddSignSqrt => {
            sup_error_on(&poly, |x| s * sqrt1m(x), delta, 1.0 - delta)
        }
        TargetFunction::EvenSqrt => sup_error_on(&poly, |x| s * sqrt1m(x), 0.0, 1.0 - delta),
        TargetFunction::CustomGrid { points, .. } => points
            .iter()
            .map(|&(x, y)| (poly.eval(x) - s * y).abs())
            .fold(0.0, f64::max),
    };
    Ok(PolyApprox {
        poly,
        sup_error,
        max_abs,
        smoothing,
    })
}

/// Smallest degree of the target's parity whose approximation error is at
/// most `tolerance`, searching up to `max_degree`.
pub fn degree_for_tolerance(
    target: &TargetFunction,
    s: f64,
    delta: f64,
    tolerance: f64,
    max_degree: usize,
) -> Result<Option<PolyApprox>> {
    let mut n = target.parity().smallest_degree();
    while n <= max_degree {
        let approx = approx_target(target, n, s, delta)?;
        if approx.sup_error <= tolerance {
            return Ok(Some(approx));
        }
        n += 2;
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSequence {
    pub angles: Vec<f64>,
    pub convention: Convention,
    pub parity: Parity,
}

impl PhaseSequence {
    pub fn new(angles: Vec<f64>, convention: Convention) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Empty);
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite);
        }
        let parity = Parity::of_degree(angles.len() - 1);
        Ok(Self {
            angles,
            convention,
            parity,
        })
    }

    pub fn degree(&self) -> usize {
        self.angles.len() - 1
    }

    /// Sequence with every angle negated; its response is the complex
    /// conjugate in the `R` convention.
    pub fn negated(&self) -> Self {
        Self {
            angles: self.angles.iter().map(|a| -a).collect(),
            ..self.clone()
        }
    }

    pub fn from_json(text: &str, convention: Convention) -> Result<Self> {
        let angles: Vec<f64> = serde_json::from_str(text)?;
        Self::new(angles, convention)
    }

    pub fn load(path: &Path, convention: Convention) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, convention)
    }
}

pub const ODD51_FILE: &str = "angles_odd51.json";
pub const EVEN30_FILE: &str = "angles_even30.json";

/// Published degree-51 odd angle list (`Wx` convention).
pub fn fixture_odd51() -> PhaseSequence {
    PhaseSequence::from_json(include_str!("../fixtures/angles_odd51.json"), Convention::Wx)
        .expect("bundled fixture is valid")
}

/// Published degree-30 even angle list (`Wx` convention).
pub fn fixture_even30() -> PhaseSequence {
    PhaseSequence::from_json(include_str!("../fixtures/angles_even30.json"), Convention::Wx)
        .expect("bundled fixture is valid")
}

/// Maps `Wx` phases to the `R` convention without changing the response.
pub fn convert_wx_to_r(ps: &PhaseSequence) -> Result<PhaseSequence> {
    if ps.convention != Convention::Wx {
        return Err(Error::ConventionMismatch {
            expected: Convention::Wx.name(),
            found: ps.convention.name(),
        });
    }
    let l = ps.degree();
    let angles = ps
        .angles
        .iter()
        .enumerate()
        .map(|(i, &phi)| {
            if i == 0 {
                phi + FRAC_PI_4 * (2.0 * l as f64 - 1.0)
            } else if i == l {
                phi - FRAC_PI_4
            } else {
                phi - FRAC_PI_2
            }
        })
        .collect();
    PhaseSequence::new(angles, Convention::R)
}

type M2 = Matrix2<C64>;

fn rz(phi: f64) -> M2 {
    M2::new(c(phi.cos(), phi.sin()), real(0.0), real(0.0), c(phi.cos(), -phi.sin()))
}

fn signal(convention: Convention, x: f64) -> M2 {
    let s = (1.0 - x * x).max(0.0).sqrt();
    match convention {
        Convention::Wx => M2::new(real(x), c(0.0, s), c(0.0, s), real(x)),
        Convention::R => M2::new(real(x), real(s), real(s), real(-x)),
    }
}

fn check_x(x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!("x = {x} is outside [−1, 1]")));
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// Full 2×2 QSP unitary at `x`.
pub fn qsp_unitary(ps: &PhaseSequence, x: f64) -> Result<Matrix2<C64>> {
    let x = check_x(x)?;
    let w = signal(ps.convention, x);
    let mut u = rz(ps.angles[0]);
    for &phi in &ps.angles[1..] {
        u = u * w * rz(phi);
    }
    Ok(u)
}

/// `⟨0| U_Φ(x) |0⟩`
pub fn qsp_response_scalar(ps: &PhaseSequence, x: f64) -> Result<C64> {
    Ok(qsp_unitary(ps, x)?[(0, 0)])
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseSolution {
    pub phases: PhaseSequence,
    /// Root-mean-square residual at the fitting nodes.
    pub residual: f64,
    pub iterations: usize,
    pub restarts: usize,
}

/// Contract on the solver residual.
pub const SOLVER_TOLERANCE: f64 = 1e-6;
const SOLVER_TARGET: f64 = 1e-14;
const MAX_RESTARTS: usize = 10;
const MAX_ITERATIONS: usize = 400;
const STALL_WINDOW: usize = 50;

fn expand_symmetric(reduced: &[f64], d: usize) -> Vec<f64> {
    (0..=d).map(|k| reduced[k.min(d - k)]).collect()
}

/// Residuals `Re⟨0|U|0⟩ − p(x_j)` and their Jacobian in the reduced phases.
fn residual_and_jacobian(
    reduced: &[f64],
    d: usize,
    nodes: &[f64],
    targets: &[f64],
) -> (DVector<f64>, DMatrix<f64>) {
    let dt = reduced.len();
    let phases = expand_symmetric(reduced, d);
    let rots: Vec<M2> = phases.iter().map(|&p| rz(p)).collect();
    let mut f = DVector::zeros(nodes.len());
    let mut jac = DMatrix::zeros(nodes.len(), dt);
    let mut prefix = vec![M2::identity(); d + 1];
    let mut suffix = vec![M2::identity(); d + 1];
    for (j, (&x, &t)) in nodes.iter().zip(targets).enumerate() {
        let w = signal(Convention::Wx, x);
        for k in 0..d {
            prefix[k + 1] = prefix[k] * rots[k] * w;
        }
        for k in (0..d).rev() {
            suffix[k] = w * rots[k + 1] * suffix[k + 1];
        }
        let u00 = (prefix[d] * rots[d])[(0, 0)];
        f[j] = u00.re - t;
        for k in 0..=d {
            let (pre, suf, r) = (&prefix[k], &suffix[k], &rots[k]);
            // d/dφ e^{iφσz} = iσz e^{iφσz}
            let d00 = c(0.0, 1.0) * r[(0, 0)];
            let d11 = c(0.0, -1.0) * r[(1, 1)];
            let deriv = pre[(0, 0)] * d00 * suf[(0, 0)] + pre[(0, 1)] * d11 * suf[(1, 0)];
            jac[(j, k.min(d - k))] += deriv.re;
        }
    }
    (f, jac)
}

fn rms(f: &DVector<f64>) -> f64 {
    (f.norm_squared() / f.len() as f64).sqrt()
}

struct Attempt {
    reduced: Vec<f64>,
    residual: f64,
    iterations: usize,
}

fn levenberg_marquardt(start: Vec<f64>, d: usize, nodes: &[f64], targets: &[f64]) -> Attempt {
    let dt = start.len();
    let mut x = start;
    let (mut f, mut jac) = residual_and_jacobian(&x, d, nodes, targets);
    let mut cost = f.norm_squared();
    let mut lambda = 1e-3;
    let mut history = vec![rms(&f)];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS && rms(&f) > SOLVER_TARGET {
        iterations += 1;
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * &f;
        let mut improved = false;
        while lambda < 1e12 {
            let mut lhs = jtj.clone();
            for i in 0..dt {
                lhs[(i, i)] += lambda;
            }
            let Some(step) = lhs.cholesky().map(|ch| ch.solve(&(-&grad))) else {
                lambda *= 4.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (tf, tj) = residual_and_jacobian(&trial, d, nodes, targets);
            let tcost = tf.norm_squared();
            if tcost < cost {
                x = trial;
                f = tf;
                jac = tj;
                cost = tcost;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        history.push(rms(&f));
        if !improved {
            break;
        }
        if history.len() > STALL_WINDOW {
            let before = history[history.len() - 1 - STALL_WINDOW];
            if before - rms(&f) < 1e-12 {
                break;
            }
        }
    }
    Attempt {
        residual: rms(&f),
        reduced: x,
        iterations,
    }
}

/// Symmetric `Wx` phases whose response has real part `p`.
///
/// Fits the `⌈(n+1)/2⌉` independent phases at the positive Chebyshev nodes
/// with Levenberg–Marquardt, restarting from jittered points on stagnation.
pub fn solve_phases(poly: &ChebyshevPoly) -> Result<PhaseSolution> {
    let d = poly.degree();
    if d < 1 {
        return Err(Error::InvalidParameter("degree must be at least 1".into()));
    }
    if d == 1 {
        // Re⟨0|e^{iφZ}W(x)e^{iφZ}|0⟩ = cos(2φ)·x, solvable in closed form.
        let a = poly.eval(1.0);
        if a.abs() > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!("max |p| = {} exceeds 1", a.abs())));
        }
        let phi = 0.5 * a.clamp(-1.0, 1.0).acos();
        return Ok(PhaseSolution {
            phases: PhaseSequence::new(vec![phi, phi], Convention::Wx)?,
            residual: 0.0,
            iterations: 0,
            restarts: 0,
        });
    }
    let max_abs = poly.max_abs(MAX_ABS_GRID);
    if max_abs > 1.0 - 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "max |p| = {max_abs} leaves less than 1e-6 headroom"
        )));
    }
    let dt = d / 2 + 1;
    let nodes: Vec<f64> = (1..=dt)
        .map(|j| ((2 * j - 1) as f64 * std::f64::consts::PI / (4 * dt) as f64).cos())
        .collect();
    let targets: Vec<f64> = nodes.iter().map(|&x| poly.eval(x)).collect();

    let mut initial = vec![0.0; dt];
    initial[0] = FRAC_PI_4;
    let mut rng = numerics::seeded_rng(0x5107_u64 ^ d as u64);
    let mut best: Option<Attempt> = None;
    let mut total_iterations = 0;
    let mut restarts = 0;
    for attempt in 0..=MAX_RESTARTS {
        let start = if attempt == 0 {
            initial.clone()
        } else {
            restarts += 1;
            let spread = 0.05 * attempt as f64;
            initial
                .iter()
                .map(|v| v + rng.gen_range(-spread..=spread))
                .collect()
        };
        let run = levenberg_marquardt(start, d, &nodes, &targets);
        total_iterations += run.iterations;
        let done = run.residual <= SOLVER_TARGET * 100.0;
        if best.as_ref().is_none_or(|b| run.residual < b.residual) {
            best = Some(run);
        }
        if done {
            break;
        }
    }
    let best = best.expect("at least one attempt runs");
    let phases = PhaseSequence::new(expand_symmetric(&best.reduced, d), Convention::Wx)?;
    if best.residual > SOLVER_TOLERANCE {
        return Err(Error::SolverNonConvergence {
            residual: best.residual,
            best: Box::new(phases),
        });
    }
    Ok(PhaseSolution {
        phases,
        residual: best.residual,
        iterations: total_iterations,
        restarts,
    })
}

/// Applies `Π_φ = e^{iφ}Π + e^{−iφ}(I−Π)` to the columns of `m`.
fn scale_columns(m: &mut CMatrix, system_dim: usize, phi: f64) {
    let (inside, outside) = (c(phi.cos(), phi.sin()), c(phi.cos(), -phi.sin()));
    for (j, mut col) in m.column_iter_mut().enumerate() {
        col *= if j < system_dim { inside } else { outside };
    }
}

/// `Π_{φ0} O_1 Π_{φ1} ⋯ O_n Π_{φn}` where the oracle applied first is `U_A`
/// and subsequent oracles alternate with `U_A†`.
pub fn qsvt_sequence(angles: &[f64], enc: &BlockEncoding) -> CMatrix {
    let n = angles.len() - 1;
    let dim = enc.dim();
    let sd = enc.system_dim();
    let ua = &enc.unitary;
    let ua_dag = ua.adjoint();
    let mut u = CMatrix::identity(dim, dim);
    scale_columns(&mut u, sd, angles[0]);
    for (k, &phi) in angles.iter().enumerate().skip(1) {
        let oracle = if (n - k) % 2 == 0 { ua } else { &ua_dag };
        u = &u * oracle;
        scale_columns(&mut u, sd, phi);
    }
    u
}

/// QSVT of an `α = 1` encoding with the real part of the response polynomial,
/// realised by a Hadamard-controlled choice between `Φ` and `−Φ`.
pub fn qsvt_apply(ps: &PhaseSequence, enc: &BlockEncoding) -> Result<BlockEncoding> {
    if ps.convention != Convention::R {
        return Err(Error::ConventionMismatch {
            expected: Convention::R.name(),
            found: ps.convention.name(),
        });
    }
    if (enc.alpha - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "QSVT needs alpha = 1, got {}",
            enc.alpha
        )));
    }
    let plus = qsvt_sequence(&ps.angles, enc);
    let minus = qsvt_sequence(&ps.negated().angles, enc);
    let dim = enc.dim();
    let mut select = CMatrix::zeros(2 * dim, 2 * dim);
    select.view_mut((0, 0), (dim, dim)).copy_from(&plus);
    select.view_mut((dim, dim), (dim, dim)).copy_from(&minus);
    let h = kron(&numerics::hadamard(), &CMatrix::identity(dim, dim));
    BlockEncoding::new(&h * select * &h, 1.0, enc.num_ancilla + 1, 0.0)
}

/// Singular-value transform `Σ f(σ)|w⟩⟨v|` (odd) or `Σ f(σ)|v⟩⟨v|` (even).
pub fn svd_transform(a: &CMatrix, parity: Parity, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let s = svd(a)?;
    Ok(match parity {
        Parity::Odd => s.map_singular_values(|x| real(f(x))),
        Parity::Even => {
            let d: Vec<C64> = s.singular_values.iter().map(|&x| real(f(x))).collect();
            &s.right * CMatrix::from_diagonal(&numerics::CVector::from_vec(d)) * s.right.adjoint()
        }
    })
}
