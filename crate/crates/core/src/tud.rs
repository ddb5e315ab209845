//! Two- and four-unitary decompositions of contractions.
//!
//! A contraction `A` with singular values in `[δ, 1−δ]` is written as
//! `A = (U₁ + U₂)/2` with `U_{1,2} = A ± i·f(A)` and
//! `f(A) = Σ √(1−σ²)|w⟩⟨v|`. Circuits are represented by their full unitary
//! matrices; oracle usage is tracked in a [`QueryLedger`].

use serde::{Deserialize, Serialize};

use crate::encodings::{lcu_encode, pauli_decompose, sznagy_encode, BlockEncoding};
use crate::error::{Error, Result};
use crate::numerics::{
    self, c, eig_hermitian, hermiticity_residual, kron, op_norm, real, svd, CMatrix, CVector, C64,
};
use crate::qsp::{
    self, approx_target, convert_wx_to_r, degree_for_tolerance, qsp_response_scalar,
    qsvt_apply, solve_phases, Parity, PhaseSequence, TargetFunction,
};

/// Oracle and state-preparation usage of one or more circuits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    pub calls_u_a: usize,
    pub calls_u_a_dagger: usize,
    pub calls_state_prep: usize,
    pub oaa_rounds: usize,
    /// Encoding calls made inside QSVT sequences.
    pub qsvt_queries: usize,
    /// Encoding calls made by the LCU addition of `A` and `±i f̃(A)`.
    pub addition_queries: usize,
}

impl QueryLedger {
    /// Ledger for one `Ũ` built from a degree-`n` QSVT, optionally followed by
    /// a single round of oblivious amplitude amplification.
    pub fn for_build(n: usize, oaa: bool) -> Self {
        let (fwd, back) = (n.div_ceil(2), n / 2);
        let once = Self {
            calls_u_a: fwd + 1,
            calls_u_a_dagger: back,
            calls_state_prep: 1,
            oaa_rounds: 0,
            qsvt_queries: n,
            addition_queries: 1,
        };
        if !oaa {
            return once;
        }
        // W, W†, W: the middle application swaps forward and inverse calls.
        Self {
            calls_u_a: 2 * once.calls_u_a + once.calls_u_a_dagger,
            calls_u_a_dagger: 2 * once.calls_u_a_dagger + once.calls_u_a,
            calls_state_prep: 1,
            oaa_rounds: 1,
            qsvt_queries: 3 * n,
            addition_queries: 3,
        }
    }

    pub fn encoding_calls(&self) -> usize {
        self.calls_u_a + self.calls_u_a_dagger
    }

    pub fn add(&mut self, other: &Self) {
        self.calls_u_a += other.calls_u_a;
        self.calls_u_a_dagger += other.calls_u_a_dagger;
        self.calls_state_prep += other.calls_state_prep;
        self.oaa_rounds += other.oaa_rounds;
        self.qsvt_queries += other.qsvt_queries;
        self.addition_queries += other.addition_queries;
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionPart {
    pub coefficient: C64,
    #[serde(with = "numerics::matrix_json")]
    pub operator: CMatrix,
    pub ledger: QueryLedger,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnitaryDecomposition {
    pub parts: Vec<DecompositionPart>,
    pub epsilon_bound: f64,
    pub alpha_scale: f64,
    pub query_ledger: QueryLedger,
    /// Polynomial degree, when QSVT was used.
    pub degree: Option<usize>,
    /// Per-part `‖U − Ũ‖` against the exact construction.
    pub branch_errors: Vec<f64>,
    /// Per-part OAA success probability.
    pub success_probabilities: Vec<f64>,
    /// Per-part operators before amplitude amplification.
    #[serde(with = "numerics::matrix_json::list")]
    pub pre_oaa: Vec<CMatrix>,
}

impl UnitaryDecomposition {
    fn exact(parts: Vec<(C64, CMatrix)>, alpha_scale: f64, ledger: QueryLedger) -> Self {
        let query_ledger = parts.iter().fold(QueryLedger::default(), |mut acc, _| {
            acc.add(&ledger);
            acc
        });
        Self {
            branch_errors: vec![0.0; parts.len()],
            success_probabilities: vec![1.0; parts.len()],
            parts: parts
                .into_iter()
                .map(|(coefficient, operator)| DecompositionPart {
                    coefficient,
                    operator,
                    ledger,
                })
                .collect(),
            epsilon_bound: 0.0,
            alpha_scale,
            query_ledger,
            degree: None,
            pre_oaa: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.parts.first().map_or(0, |p| p.operator.nrows())
    }

    pub fn coefficients(&self) -> Vec<C64> {
        self.parts.iter().map(|p| p.coefficient).collect()
    }

    pub fn operators(&self) -> Vec<&CMatrix> {
        self.parts.iter().map(|p| &p.operator).collect()
    }

    /// `Σ c_j·op_j`
    pub fn reconstruct(&self) -> CMatrix {
        let d = self.dim();
        self.parts
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, p| acc + &p.operator * p.coefficient)
    }

    /// Same coefficients applied to the pre-amplification operators.
    pub fn reconstruct_pre_oaa(&self) -> Option<CMatrix> {
        if self.pre_oaa.len() != self.parts.len() {
            return None;
        }
        let d = self.dim();
        Some(
            self.parts
                .iter()
                .zip(&self.pre_oaa)
                .fold(CMatrix::zeros(d, d), |acc, (p, u)| acc + u * p.coefficient),
        )
    }

    /// Copy whose operators are the pre-amplification ones.
    pub fn without_oaa(&self) -> Option<Self> {
        if self.pre_oaa.len() != self.parts.len() {
            return None;
        }
        let mut out = self.clone();
        for (part, u) in out.parts.iter_mut().zip(&self.pre_oaa) {
            part.operator = u.clone();
        }
        out.pre_oaa.clear();
        Some(out)
    }

    pub fn reconstruction_error(&self, a: &CMatrix) -> f64 {
        op_norm(&(a - self.reconstruct()))
    }

    pub fn max_unitarity_residual(&self) -> f64 {
        self.parts
            .iter()
            .map(|p| numerics::unitarity_residual(&p.operator))
            .fold(0.0, f64::max)
    }
}

fn check_square(a: &CMatrix) -> Result<usize> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    Ok(rows)
}

fn check_contraction(a: &CMatrix) -> Result<()> {
    let norm = op_norm(a);
    if norm > 1.0 + 1e-10 {
        return Err(Error::NotContraction { norm });
    }
    Ok(())
}

/// `(U₁, U₂) = (A + i f(A), A − i f(A))` from the SVD of `A`.
pub fn oracle_pair(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    check_square(a)?;
    check_contraction(a)?;
    let s = svd(a)?;
    let defect = |x: f64| (1.0 - x * x).max(0.0).sqrt();
    let u1 = s.map_singular_values(|x| c(x.min(1.0), defect(x)));
    let u2 = s.map_singular_values(|x| c(x.min(1.0), -defect(x)));
    Ok((u1, u2))
}

/// Exact two-unitary decomposition from the SVD.
pub fn oracle_tud_svd(a: &CMatrix) -> Result<UnitaryDecomposition> {
    let (u1, u2) = oracle_pair(a)?;
    Ok(UnitaryDecomposition::exact(
        vec![(real(0.5), u1), (real(0.5), u2)],
        1.0,
        QueryLedger::default(),
    ))
}

/// `(U, U†)` with `U = H + i√(I−H²)` from the eigendecomposition of `H`.
pub fn oracle_hermitian_pair(h: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let eig = eig_hermitian(h)?;
    let defect = |l: f64| (1.0 - l * l).max(0.0).sqrt();
    if let Some(&l) = eig.eigenvalues.iter().find(|l| l.abs() > 1.0 + 1e-10) {
        return Err(Error::NotContraction { norm: l.abs() });
    }
    let u = eig.map(|l| c(l.clamp(-1.0, 1.0), defect(l)));
    let ud = eig.map(|l| c(l.clamp(-1.0, 1.0), -defect(l)));
    Ok((u, ud))
}

/// LCU addition of `A` and `sign·i·f̃(A)`: a `(2, ℓ+1)` encoding of
/// `A + sign·i·f̃(A)` built from a Hadamard-conjugated flag qubit.
pub fn lcu_add(enc_a: &BlockEncoding, enc_f: &BlockEncoding, sign: f64) -> Result<BlockEncoding> {
    if (enc_a.alpha - 1.0).abs() > 1e-12 || (enc_f.alpha - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter("LCU addition needs alpha = 1 inputs".into()));
    }
    if enc_a.system_dim() != enc_f.system_dim() {
        return Err(Error::DimensionMismatch(format!(
            "system dimensions {} and {} differ",
            enc_a.system_dim(),
            enc_f.system_dim()
        )));
    }
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::InvalidParameter(format!("sign must be ±1, got {sign}")));
    }
    let ancilla = enc_a.num_ancilla.max(enc_f.num_ancilla);
    let ua = enc_a.pad_ancilla(ancilla - enc_a.num_ancilla).unitary;
    let uf = enc_f.pad_ancilla(ancilla - enc_f.num_ancilla).unitary;
    let dim = ua.nrows();
    let mut select = CMatrix::zeros(2 * dim, 2 * dim);
    select.view_mut((0, 0), (dim, dim)).copy_from(&ua);
    select
        .view_mut((dim, dim), (dim, dim))
        .copy_from(&(uf * c(0.0, sign)));
    let h = kron(&numerics::hadamard(), &CMatrix::identity(dim, dim));
    BlockEncoding::new(&h * select * &h, 2.0, ancilla + 1, 0.0)
}

/// Maximum deviation of a singular value of `2·block` from 1 accepted by OAA.
pub const OAA_MAX_DEVIATION: f64 = 0.1;

/// One round of oblivious amplitude amplification on a half-unitary block:
/// returns `(3Ũ − ŨŨ†Ũ)/2` with `Ũ = 2·block` and the success probability
/// `¼‖(3Ũ† − Ũ†ŨŨ†)(3Ũ − ŨŨ†Ũ)‖`.
pub fn oaa(block: &CMatrix) -> Result<(CMatrix, f64)> {
    check_square(block)?;
    let u = block * real(2.0);
    let s = svd(&u)?;
    let deviation = s
        .singular_values
        .iter()
        .map(|x| (x - 1.0).abs())
        .fold(0.0, f64::max);
    if deviation > OAA_MAX_DEVIATION {
        return Err(Error::InvalidParameter(format!(
            "2·block deviates from unitarity by {deviation:.3}"
        )));
    }
    Ok(amplify(&u))
}

/// One OAA round on `Ũ` without the deviation check.
fn amplify(u: &CMatrix) -> (CMatrix, f64) {
    let m = u * real(3.0) - u * u.adjoint() * u;
    let success = 0.25 * op_norm(&(m.adjoint() * &m));
    (m * real(0.5), success)
}

/// Amplified encoding `−W R W† R W` with `R = 2Π − I` on the ancillas.
pub fn oaa_encoding(enc: &BlockEncoding) -> Result<BlockEncoding> {
    let w = &enc.unitary;
    let sd = enc.system_dim();
    // W·R flips every column outside Π, R·W every row.
    let mut wr = w.clone();
    for (j, mut col) in wr.column_iter_mut().enumerate() {
        if j >= sd {
            col.neg_mut();
        }
    }
    let mut rw = w.clone();
    for (i, mut row) in rw.row_iter_mut().enumerate() {
        if i >= sd {
            row.neg_mut();
        }
    }
    let out = -(&wr * w.adjoint() * &rw);
    BlockEncoding::new(out, enc.alpha / 2.0, enc.num_ancilla, enc.error)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseSource {
    /// Published angle lists (degree 51 odd, degree 30 even).
    Fixture,
    /// Chebyshev projection plus the built-in phase solver.
    Solver,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TudOptions {
    /// Promise margin: singular values (or scaled eigenvalues) lie in
    /// `[δ, 1−δ]`.
    pub delta: f64,
    pub epsilon_target: f64,
    pub degree_override: Option<usize>,
    pub phases: PhaseSource,
    /// Target scale `s` for the solver path.
    pub scale: f64,
    pub oaa: bool,
}

impl Default for TudOptions {
    fn default() -> Self {
        Self {
            delta: 0.1,
            epsilon_target: 1e-2,
            degree_override: None,
            phases: PhaseSource::Solver,
            scale: 1.0,
            oaa: true,
        }
    }
}

/// Largest degree considered when mapping a tolerance to a degree.
pub const MAX_DEGREE: usize = 401;

/// `R`-convention phases for `f̃` together with the scalar error of their
/// real response against the exact target on the promise interval.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PreparedPhases {
    pub phases: PhaseSequence,
    pub parity: Parity,
    pub epsilon: f64,
    pub solver_residual: Option<f64>,
}

impl PreparedPhases {
    pub fn degree(&self) -> usize {
        self.phases.degree()
    }

    pub fn from_wx(phases: &PhaseSequence, delta: f64, solver_residual: Option<f64>) -> Result<Self> {
        let target = match phases.parity {
            Parity::Odd => TargetFunction::OddSignSqrt,
            Parity::Even => TargetFunction::EvenSqrt,
        };
        let r = convert_wx_to_r(phases)?;
        let (lo, hi) = match phases.parity {
            Parity::Odd => (delta, 1.0 - delta),
            Parity::Even => (0.0, 1.0 - delta),
        };
        let mut epsilon = 0.0f64;
        for i in 0..=2000 {
            let x = lo + (hi - lo) * i as f64 / 2000.0;
            let p = qsp_response_scalar(&r, x)?.re;
            epsilon = epsilon.max((p - target.eval(x).expect("analytic target")).abs());
        }
        Ok(Self {
            phases: r,
            parity: phases.parity,
            epsilon,
            solver_residual,
        })
    }
}

/// Builds the phases for the odd (`Parity::Odd`) or even target.
pub fn prepare_phases(parity: Parity, opts: &TudOptions) -> Result<PreparedPhases> {
    if !(opts.delta > 0.0 && opts.delta < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "margin {} is outside (0, 0.5)",
            opts.delta
        )));
    }
    match opts.phases {
        PhaseSource::Fixture => {
            let ps = match parity {
                Parity::Odd => qsp::fixture_odd51(),
                Parity::Even => qsp::fixture_even30(),
            };
            if let Some(n) = opts.degree_override {
                if n != ps.degree() {
                    return Err(Error::InvalidParameter(format!(
                        "fixture has degree {}, requested {n}",
                        ps.degree()
                    )));
                }
            }
            PreparedPhases::from_wx(&ps, opts.delta, None)
        }
        PhaseSource::Solver => {
            let target = match parity {
                Parity::Odd => TargetFunction::OddSignSqrt,
                Parity::Even => TargetFunction::EvenSqrt,
            };
            let approx = match opts.degree_override {
                Some(n) => {
                    if !parity.matches(n) {
                        return Err(Error::ParityMismatch(format!(
                            "degree {n} does not have {parity:?} parity"
                        )));
                    }
                    approx_target(&target, n, opts.scale, opts.delta)?
                }
                None => degree_for_tolerance(
                    &target,
                    opts.scale,
                    opts.delta,
                    opts.epsilon_target,
                    MAX_DEGREE,
                )?
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "no degree up to {MAX_DEGREE} reaches {}",
                        opts.epsilon_target
                    ))
                })?,
            };
            let sol = solve_phases(&approx.poly)?;
            PreparedPhases::from_wx(&sol.phases, opts.delta, Some(sol.residual))
        }
    }
}

struct Branches {
    pre: Vec<CMatrix>,
    post: Vec<CMatrix>,
    success: Vec<f64>,
}

/// `Ũ± = A ± i f̃(A)` from an `α = 1` encoding, with optional OAA.
fn build_branches(enc: &BlockEncoding, phases: &PreparedPhases, use_oaa: bool) -> Result<Branches> {
    let f_enc = qsvt_apply(&phases.phases, enc)?;
    let mut out = Branches {
        pre: Vec::with_capacity(2),
        post: Vec::with_capacity(2),
        success: Vec::with_capacity(2),
    };
    for sign in [1.0, -1.0] {
        let added = lcu_add(enc, &f_enc, sign)?;
        let half = added.block();
        out.pre.push(&half * real(2.0));
        if use_oaa {
            let (_, success) = amplify(&(&half * real(2.0)));
            out.post.push(oaa_encoding(&added)?.encoded_operator());
            out.success.push(success);
        } else {
            out.post.push(&half * real(2.0));
            out.success.push(1.0);
        }
    }
    Ok(out)
}

/// Two-unitary decomposition through QSVT with an odd polynomial.
pub fn run_tud(enc: &BlockEncoding, opts: &TudOptions) -> Result<UnitaryDecomposition> {
    if !(opts.delta > 0.0) {
        return Err(Error::InvalidParameter(format!("margin {} must be positive", opts.delta)));
    }
    if let Some(n) = opts.degree_override {
        if n % 2 == 0 {
            return Err(Error::ParityMismatch(format!("two-unitary decomposition needs odd degree, got {n}")));
        }
    }
    let phases = prepare_phases(Parity::Odd, opts)?;
    run_tud_with(enc, &phases, opts.oaa)
}

/// [`run_tud`] with phases prepared once and reused.
pub fn run_tud_with(
    enc: &BlockEncoding,
    phases: &PreparedPhases,
    use_oaa: bool,
) -> Result<UnitaryDecomposition> {
    if phases.parity != Parity::Odd {
        return Err(Error::ParityMismatch("two-unitary decomposition needs odd phases".into()));
    }
    if (enc.alpha - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("encoding has alpha {}", enc.alpha)));
    }
    let a = enc.block();
    let (u1, u2) = oracle_pair(&a)?;
    let b = build_branches(enc, phases, use_oaa)?;
    let n = phases.degree();
    let ledger = QueryLedger::for_build(n, use_oaa);
    let branch_errors = vec![op_norm(&(&u1 - &b.post[0])), op_norm(&(&u2 - &b.post[1]))];
    let mut query_ledger = QueryLedger::default();
    query_ledger.add(&ledger);
    query_ledger.add(&ledger);
    Ok(UnitaryDecomposition {
        parts: b
            .post
            .into_iter()
            .map(|operator| DecompositionPart {
                coefficient: real(0.5),
                operator,
                ledger,
            })
            .collect(),
        epsilon_bound: phases.epsilon,
        alpha_scale: 1.0,
        query_ledger,
        degree: Some(n),
        branch_errors,
        success_probabilities: b.success,
        pre_oaa: b.pre,
    })
}

/// `A = H₁ + iH₂` with `H₁ = (A+A†)/2`, `H₂ = −i(A−A†)/2`.
pub fn hermitian_split(a: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    check_square(a)?;
    let ad = a.adjoint();
    let h1 = (a + &ad) * real(0.5);
    let h2 = (a - &ad) * c(0.0, -0.5);
    Ok((h1, h2))
}

/// Margin used for the even polynomial when eigenvalues are compressed by `α`.
pub fn margin_for_alpha(alpha: f64) -> f64 {
    (1.0 - 1.0 / alpha).clamp(0.05, 0.45)
}

/// `(α/2)(Ũ + Ũ†)` decomposition of a Hermitian `H` given its encoding.
pub fn run_fud_hermitian(
    enc: &BlockEncoding,
    alpha_scale: f64,
    opts: &TudOptions,
) -> Result<UnitaryDecomposition> {
    let phases = prepare_phases(Parity::Even, opts)?;
    run_fud_hermitian_with(enc, alpha_scale, &phases, opts.oaa)
}

/// [`run_fud_hermitian`] with phases prepared once and reused.
pub fn run_fud_hermitian_with(
    enc: &BlockEncoding,
    alpha_scale: f64,
    phases: &PreparedPhases,
    use_oaa: bool,
) -> Result<UnitaryDecomposition> {
    if phases.parity != Parity::Even {
        return Err(Error::ParityMismatch("Hermitian decomposition needs even phases".into()));
    }
    if !(alpha_scale >= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha_scale} is below 1")));
    }
    if enc.alpha > alpha_scale * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "encoding normalisation {} exceeds alpha {alpha_scale}",
            enc.alpha
        )));
    }
    let scaled = if enc.alpha < alpha_scale * (1.0 - 1e-12) {
        enc.rescaled(alpha_scale)?
    } else {
        enc.clone()
    };
    // Reinterpret as an α = 1 encoding of H/α.
    let unit = BlockEncoding {
        alpha: 1.0,
        ..scaled
    };
    let hs = unit.block();
    let residual = hermiticity_residual(&hs);
    if residual > 1e-8 {
        return Err(Error::NotHermitian { residual });
    }
    let (u, ud) = oracle_hermitian_pair(&((&hs + hs.adjoint()) * real(0.5)))?;
    let b = build_branches(&unit, phases, use_oaa)?;
    let n = phases.degree();
    let ledger = QueryLedger::for_build(n, use_oaa);
    let branch_errors = vec![op_norm(&(&u - &b.post[0])), op_norm(&(&ud - &b.post[1]))];
    let mut query_ledger = QueryLedger::default();
    query_ledger.add(&ledger);
    query_ledger.add(&ledger);
    let coefficient = real(alpha_scale / 2.0);
    Ok(UnitaryDecomposition {
        parts: b
            .post
            .into_iter()
            .map(|operator| DecompositionPart {
                coefficient,
                operator,
                ledger,
            })
            .collect(),
        epsilon_bound: phases.epsilon,
        alpha_scale,
        query_ledger,
        degree: Some(n),
        branch_errors,
        success_probabilities: b.success,
        pre_oaa: b.pre,
    })
}

/// Encoding of a Hermitian `H` with `‖H‖ ≤ 1`: LCU over Pauli strings when
/// its weight fits under `alpha`, otherwise the Sz.-Nagy dilation.
pub fn encode_hermitian(h: &CMatrix, alpha: f64) -> Result<BlockEncoding> {
    let d = h.nrows();
    if d.is_power_of_two() {
        let decomp = pauli_decompose(h)?;
        if !decomp.is_empty() && decomp.alpha_total <= alpha {
            return lcu_encode(&decomp);
        }
    }
    sznagy_encode(h)
}

/// Four-unitary decomposition
/// `A = (α/2)(Ũ₁ + Ũ₁' + iŨ₂ + iŨ₂')` through the Hermitian split.
pub fn run_fud(a: &CMatrix, alpha_scale: f64, opts: &TudOptions) -> Result<UnitaryDecomposition> {
    let phases = prepare_phases(Parity::Even, opts)?;
    run_fud_with(a, alpha_scale, &phases, opts.oaa)
}

/// [`run_fud`] with phases prepared once and reused.
pub fn run_fud_with(
    a: &CMatrix,
    alpha_scale: f64,
    phases: &PreparedPhases,
    use_oaa: bool,
) -> Result<UnitaryDecomposition> {
    check_contraction(a)?;
    let (h1, h2) = hermitian_split(a)?;
    let mut parts = Vec::with_capacity(4);
    let mut query_ledger = QueryLedger::default();
    let mut branch_errors = Vec::with_capacity(4);
    let mut success = Vec::with_capacity(4);
    let mut pre = Vec::with_capacity(4);
    let mut epsilon = 0.0f64;
    for (h, phase) in [(h1, real(1.0)), (h2, c(0.0, 1.0))] {
        let norm = op_norm(&h);
        if norm / alpha_scale > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "alpha {alpha_scale} cannot compress a Hermitian part of norm {norm}"
            )));
        }
        let enc = encode_hermitian(&h, alpha_scale)?;
        let dec = run_fud_hermitian_with(&enc, alpha_scale, phases, use_oaa)?;
        query_ledger.add(&dec.query_ledger);
        branch_errors.extend(dec.branch_errors);
        success.extend(dec.success_probabilities);
        pre.extend(dec.pre_oaa);
        epsilon = epsilon.max(dec.epsilon_bound);
        parts.extend(dec.parts.into_iter().map(|p| DecompositionPart {
            coefficient: p.coefficient * phase,
            ..p
        }));
    }
    Ok(UnitaryDecomposition {
        parts,
        epsilon_bound: epsilon,
        alpha_scale,
        query_ledger,
        degree: Some(phases.degree()),
        branch_errors,
        success_probabilities: success,
        pre_oaa: pre,
    })
}

/// Exact `(U, U†)` pair for a Hermitian `H` read off a Sz.-Nagy encoding
/// with single-qubit rotations on the dilation qubit.
pub fn sznagy_shortcut(enc: &BlockEncoding) -> Result<UnitaryDecomposition> {
    if enc.num_ancilla != 1 || (enc.alpha - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(
            "expected a one-ancilla, alpha = 1 dilation".into(),
        ));
    }
    let d = enc.system_dim();
    let u = &enc.unitary;
    let h = enc.block();
    let residual = hermiticity_residual(&h);
    if residual > 1e-10 {
        return Err(Error::NotHermitian { residual });
    }
    let h = (&h + h.adjoint()) * real(0.5);
    let defect = eig_hermitian(&h)?.map(|l| real((1.0 - l * l).max(0.0).sqrt()));
    let off = op_norm(&(u.view((0, d), (d, d)) - &defect))
        .max(op_norm(&(u.view((d, 0), (d, d)) - &defect)));
    let corner = op_norm(&(u.view((d, d), (d, d)) + &h));
    if off.max(corner) > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "encoding is not a Sz.-Nagy dilation (block mismatch {:.3e})",
            off.max(corner)
        )));
    }

    // ⟨b| H_g e^{−iπ/4 σz} ⊗ I · U · e^{−iπ/4 σz} H_g |b⟩ ⊗ I for b = 0, 1.
    let rot = crate::encodings::z_phase(-std::f64::consts::FRAC_PI_4);
    let hg = numerics::hadamard();
    let ket_op = &rot * &hg;
    let bra_op = &hg * &rot;
    let contract = |b: usize| -> CMatrix {
        let ket: CVector = ket_op.column(b).into_owned();
        let bra = bra_op.row(b).into_owned();
        let mut out = CMatrix::zeros(d, d);
        for i in 0..2 {
            for j in 0..2 {
                out += u.view((i * d, j * d), (d, d)) * (bra[i] * ket[j]);
            }
        }
        out
    };
    // The rotations produce −i·U and −i·U†; the common phase is removed.
    let fix = c(0.0, 1.0);
    let plus = contract(0) * fix;
    let minus = contract(1) * fix;
    let ledger = QueryLedger {
        calls_u_a: 1,
        calls_state_prep: 1,
        ..QueryLedger::default()
    };
    Ok(UnitaryDecomposition::exact(
        vec![(real(0.5), plus), (real(0.5), minus)],
        1.0,
        ledger,
    ))
}

/// Four-unitary decomposition of a contraction from Sz.-Nagy encodings of
/// its Hermitian parts; exact and free of QSVT.
pub fn sznagy_fud(a: &CMatrix) -> Result<UnitaryDecomposition> {
    check_contraction(a)?;
    let (h1, h2) = hermitian_split(a)?;
    let first = sznagy_shortcut(&sznagy_encode(&h1)?)?;
    let second = sznagy_shortcut(&sznagy_encode(&h2)?)?;
    let mut out = first.clone();
    out.query_ledger.add(&second.query_ledger);
    out.branch_errors.extend(second.branch_errors);
    out.success_probabilities.extend(second.success_probabilities);
    out.parts.extend(second.parts.into_iter().map(|p| DecompositionPart {
        coefficient: p.coefficient * c(0.0, 1.0),
        ..p
    }));
    Ok(out)
}

/// Exact four-unitary decomposition `A = (α/2)(U₁ + U₁† + iU₂ + iU₂†)` with
/// `U_j = H_j/α + i√(I − H_j²/α²)`.
pub fn oracle_fud(a: &CMatrix, alpha_scale: f64) -> Result<UnitaryDecomposition> {
    check_square(a)?;
    if !(alpha_scale > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha_scale} must be positive")));
    }
    let (h1, h2) = hermitian_split(a)?;
    let mut parts = Vec::with_capacity(4);
    for (h, phase) in [(h1, real(1.0)), (h2, c(0.0, 1.0))] {
        let (u, ud) = oracle_hermitian_pair(&(h * real(1.0 / alpha_scale)))?;
        let coefficient = phase * (alpha_scale / 2.0);
        parts.push((coefficient, u));
        parts.push((coefficient, ud));
    }
    Ok(UnitaryDecomposition::exact(
        parts,
        alpha_scale,
        QueryLedger::default(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{gad_channel, GAD_P};
    use crate::encodings::verify_block_encoding;
    use crate::numerics::{
        pauli_x, pauli_z, random_contraction_with_spectrum, random_hermitian, random_unitary,
        seeded_rng, unitarity_residual,
    };
    use proptest::prelude::*;

    fn identity(d: usize) -> CMatrix {
        CMatrix::identity(d, d)
    }

    #[test]
    fn oracle_fud_is_exact() {
        let a = random_contraction_with_spectrum(&[0.9, 0.0, 0.3], 5).unwrap();
        let dec = oracle_fud(&a, 1.61).unwrap();
        assert_eq!(dec.parts.len(), 4);
        assert!(dec.reconstruction_error(&a) <= 1e-12);
        assert!(dec.max_unitarity_residual() <= 1e-12);
    }

    #[test]
    fn ledger_counts() {
        let l = QueryLedger::for_build(30, true);
        assert_eq!(l.encoding_calls(), 93);
        assert_eq!((l.calls_u_a, l.calls_u_a_dagger), (47, 46));
        assert_eq!(l.qsvt_queries + l.addition_queries, 93);
        assert_eq!(l.oaa_rounds, 1);
        assert_eq!(l.calls_state_prep, 1);
        let l = QueryLedger::for_build(51, false);
        assert_eq!((l.calls_u_a, l.calls_u_a_dagger), (27, 25));
        assert_eq!(QueryLedger::for_build(51, true).encoding_calls(), 156);
    }

    #[test]
    fn oracle_of_unitary_is_itself() {
        let u = random_unitary(3, 2).unwrap();
        let dec = oracle_tud_svd(&u).unwrap();
        for p in &dec.parts {
            assert!(op_norm(&(&p.operator - &u)) < 1e-7);
        }
        assert!(dec.reconstruction_error(&u) <= 1e-12);
    }

    #[test]
    fn oracle_of_zero() {
        let z = CMatrix::zeros(2, 2);
        let dec = oracle_tud_svd(&z).unwrap();
        assert!(dec.reconstruction_error(&z) <= 1e-15);
        assert!(op_norm(&(&dec.parts[0].operator + &dec.parts[1].operator)) < 1e-15);
        assert!(dec.max_unitarity_residual() <= 1e-12);
        assert_eq!(dec.epsilon_bound, 0.0);
    }

    #[test]
    fn oracle_rejects_expansion() {
        assert!(matches!(
            oracle_tud_svd(&(identity(2) * real(1.01))),
            Err(Error::NotContraction { .. })
        ));
    }

    #[test]
    fn polar_completion_is_unitary() {
        let a = random_contraction_with_spectrum(&[0.9, 0.4, 0.0], 5).unwrap();
        let s = svd(&a).unwrap();
        let f = s.map_singular_values(|x| real((1.0 - x * x).sqrt()));
        assert!(unitarity_residual(&(&a + f * c(0.0, 1.0))) <= 1e-12);
    }

    #[test]
    fn lcu_add_examples() {
        let a = random_contraction_with_spectrum(&[0.7, 0.2], 3).unwrap();
        let enc_a = sznagy_encode(&a).unwrap();
        let zero = sznagy_encode(&CMatrix::zeros(2, 2)).unwrap();
        let sum = lcu_add(&enc_a, &zero, 1.0).unwrap();
        assert_eq!(sum.alpha, 2.0);
        assert!(op_norm(&(sum.block() - &a * real(0.5))) < 1e-14);

        let id = BlockEncoding::from_unitary(identity(2)).unwrap();
        let sum = lcu_add(&id, &id, 1.0).unwrap();
        assert!(op_norm(&(sum.block() - identity(2) * c(0.5, 0.5))) < 1e-15);
        assert!(verify_block_encoding(&sum, &(identity(2) * c(1.0, 1.0))).unwrap() < 1e-14);

        let big = sznagy_encode(&CMatrix::zeros(4, 4)).unwrap();
        assert!(matches!(lcu_add(&enc_a, &big, 1.0), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn oaa_examples() {
        let (amp, p) = oaa(&(identity(2) * real(0.5))).unwrap();
        assert!(op_norm(&(amp - identity(2))) < 1e-15);
        assert!((p - 1.0).abs() < 1e-15);

        let u = random_unitary(3, 7).unwrap();
        let (amp, p) = oaa(&(&u * real(0.5))).unwrap();
        assert!(op_norm(&(amp - &u)) <= 1e-12);
        assert!((p - 1.0).abs() <= 1e-12);

        let eps: f64 = 1e-2;
        let (_, p) = oaa(&(&u * real(0.5 * (1.0 + eps).sqrt()))).unwrap();
        assert!((p - (1.0 - 0.75 * eps * eps)).abs() <= eps.powi(3));
        assert!(p >= 1.0 - 7.6e-5);

        assert!(oaa(&(identity(2) * real(0.3))).is_err());
    }

    #[test]
    fn oaa_encoding_matches_formula() {
        let a = random_contraction_with_spectrum(&[0.6, 0.3], 11).unwrap();
        let enc = sznagy_encode(&a).unwrap();
        let phases = prepare_phases(
            Parity::Odd,
            &TudOptions {
                degree_override: Some(51),
                ..TudOptions::default()
            },
        )
        .unwrap();
        let f = qsvt_apply(&phases.phases, &enc).unwrap();
        let added = lcu_add(&enc, &f, 1.0).unwrap();
        let (formula, _) = oaa(&added.block()).unwrap();
        let circuit = oaa_encoding(&added).unwrap();
        assert_eq!(circuit.alpha, 1.0);
        assert!(op_norm(&(circuit.block() - formula)) <= 1e-12);
    }

    #[test]
    fn tud_fixture_on_equal_singular_values() {
        let a = random_contraction_with_spectrum(&[0.5, 0.5], 1).unwrap();
        let enc = sznagy_encode(&a).unwrap();
        let opts = TudOptions {
            phases: PhaseSource::Fixture,
            ..TudOptions::default()
        };
        let dec = run_tud(&enc, &opts).unwrap();
        assert_eq!(dec.degree, Some(51));
        assert!(dec.branch_errors[0] <= 2e-2, "{:?}", dec.branch_errors);
        assert_eq!(dec.query_ledger.encoding_calls(), 2 * 156);
    }

    #[test]
    fn tud_unitary_input_reports_without_failing() {
        let u = random_unitary(2, 3).unwrap();
        let enc = sznagy_encode(&u).unwrap();
        let opts = TudOptions {
            phases: PhaseSource::Fixture,
            ..TudOptions::default()
        };
        let dec = run_tud(&enc, &opts).unwrap();
        assert!(dec.branch_errors.iter().all(|e| e.is_finite()));
    }

    #[test]
    fn tud_rejects_bad_options() {
        let enc = sznagy_encode(&(identity(2) * real(0.5))).unwrap();
        let opts = TudOptions {
            delta: 0.0,
            ..TudOptions::default()
        };
        assert!(run_tud(&enc, &opts).is_err());
        let opts = TudOptions {
            degree_override: Some(30),
            ..TudOptions::default()
        };
        assert!(matches!(run_tud(&enc, &opts), Err(Error::ParityMismatch(_))));
    }

    #[test]
    fn tud_sweep_solver_path() {
        let opts = TudOptions {
            degree_override: Some(51),
            ..TudOptions::default()
        };
        let phases = prepare_phases(Parity::Odd, &opts).unwrap();
        let mut worst = 0.0f64;
        for (i, sigma) in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9].into_iter().enumerate() {
            let a = random_contraction_with_spectrum(&[sigma, sigma], 100 + i as u64).unwrap();
            let dec = run_tud_with(&sznagy_encode(&a).unwrap(), &phases, true).unwrap();
            worst = worst.max(dec.branch_errors[0]).max(dec.branch_errors[1]);
        }
        assert!(worst <= 2e-2, "{worst}");
    }

    #[test]
    fn tud_pre_oaa_reconstruction_is_exact_and_unitarity_degrades_boundedly() {
        let a = random_contraction_with_spectrum(&[0.8, 0.25], 4).unwrap();
        let opts = TudOptions {
            degree_override: Some(21),
            ..TudOptions::default()
        };
        let phases = prepare_phases(Parity::Odd, &opts).unwrap();
        let dec = run_tud_with(&sznagy_encode(&a).unwrap(), &phases, true).unwrap();
        let pre = dec.reconstruct_pre_oaa().unwrap();
        assert!(op_norm(&(pre - &a)) <= 1e-12);

        let f = svd(&a).unwrap().map_singular_values(|x| real((1.0 - x * x).sqrt()));
        let f_tilde = (&dec.pre_oaa[0] - &a) * c(0.0, -1.0);
        let bound = 2.0 * op_norm(&(f - f_tilde)) + 1e-10;
        for u in &dec.pre_oaa {
            let g = u.adjoint() * u - identity(2);
            assert!(op_norm(&g) <= bound);
        }
        assert!(dec.reconstruction_error(&a) <= 2.0 * dec.epsilon_bound + 1e-3);
    }

    #[test]
    fn tud_error_shrinks_with_degree() {
        let a = random_contraction_with_spectrum(&[0.7, 0.35], 9).unwrap();
        let enc = sznagy_encode(&a).unwrap();
        let run = |n| {
            let opts = TudOptions {
                degree_override: Some(n),
                ..TudOptions::default()
            };
            let dec = run_tud(&enc, &opts).unwrap();
            dec.branch_errors[0].max(dec.branch_errors[1])
        };
        assert!(run(51) < run(21));
    }

    #[test]
    fn hermitian_split_examples() {
        let mut rng = seeded_rng(2);
        let h = random_hermitian(3, &mut rng);
        let (h1, h2) = hermitian_split(&h).unwrap();
        assert!(op_norm(&(h1 - &h)) < 1e-15);
        assert!(op_norm(&h2) < 1e-15);

        let (h1, h2) = hermitian_split(&(&h * c(0.0, 1.0))).unwrap();
        assert!(op_norm(&h1) < 1e-15);
        assert!(op_norm(&(h2 - &h)) < 1e-14);

        let a1 = gad_channel(GAD_P, 0.4).unwrap().operators[1].clone();
        let (h1, h2) = hermitian_split(&a1).unwrap();
        assert!(hermiticity_residual(&h1) <= 1e-14 && hermiticity_residual(&h2) <= 1e-14);
        assert!(op_norm(&(&h1 + &h2 * c(0.0, 1.0) - &a1)) == 0.0);
        let expected = pauli_x() * real((GAD_P * 0.4f64).sqrt() / 2.0);
        assert!(op_norm(&(h1 - expected)) < 1e-15);
    }

    #[test]
    fn fud_hermitian_of_zero_is_i() {
        let enc = sznagy_encode(&CMatrix::zeros(2, 2)).unwrap();
        let opts = TudOptions {
            phases: PhaseSource::Fixture,
            ..TudOptions::default()
        };
        let dec = run_fud_hermitian(&enc, 1.0, &opts).unwrap();
        let target = identity(2) * c(0.0, 1.0);
        assert!(op_norm(&(&dec.parts[0].operator - &target)) <= 2e-2);
    }

    #[test]
    fn fud_hermitian_fixture_half_z() {
        let enc = sznagy_encode(&(pauli_z() * real(0.5))).unwrap();
        let opts = TudOptions {
            phases: PhaseSource::Fixture,
            ..TudOptions::default()
        };
        let dec = run_fud_hermitian(&enc, 2.0, &opts).unwrap();
        assert!(dec.branch_errors.iter().all(|&e| e <= 2e-2), "{:?}", dec.branch_errors);
        assert_eq!(dec.parts[0].coefficient, real(1.0));
    }

    #[test]
    fn fud_hermitian_random() {
        let u = random_unitary(3, 77).unwrap();
        let lam = numerics::diag_real(&[-0.5, 0.1, 0.45]);
        let h = &u * lam * u.adjoint();
        let enc = sznagy_encode(&h).unwrap();
        let opts = TudOptions {
            degree_override: Some(30),
            ..TudOptions::default()
        };
        let dec = run_fud_hermitian(&enc, 1.0, &opts).unwrap();
        assert!(dec.branch_errors.iter().all(|&e| e <= 2e-2), "{:?}", dec.branch_errors);
    }

    #[test]
    fn fud_hermitian_rejects_non_hermitian() {
        let a = random_contraction_with_spectrum(&[0.5, 0.2], 1).unwrap();
        let enc = sznagy_encode(&a).unwrap();
        let opts = TudOptions {
            phases: PhaseSource::Fixture,
            ..TudOptions::default()
        };
        assert!(matches!(
            run_fud_hermitian(&enc, 1.0, &opts),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn fud_gad_a1() {
        let a1 = gad_channel(GAD_P, 0.4).unwrap().operators[1].clone();
        let opts = TudOptions {
            phases: PhaseSource::Fixture,
            ..TudOptions::default()
        };
        let dec = run_fud(&a1, 1.61, &opts).unwrap();
        assert_eq!(dec.parts.len(), 4);
        let coeffs = dec.coefficients();
        assert_eq!(coeffs[0], real(0.805));
        assert_eq!(coeffs[2], c(0.0, 0.805));
        assert!(dec.reconstruction_error(&a1) <= 2e-2);
        for p in &dec.parts {
            assert_eq!(p.ledger.encoding_calls(), 93);
        }
        assert_eq!(dec.query_ledger.encoding_calls(), 4 * 93);
    }

    #[test]
    fn fud_of_hermitian_matrix_has_i_pair() {
        let h = pauli_z() * real(0.4);
        let opts = TudOptions {
            degree_override: Some(30),
            ..TudOptions::default()
        };
        let dec = run_fud(&h, 1.61, &opts).unwrap();
        let target = identity(2) * c(0.0, 1.0);
        assert!(op_norm(&(&dec.parts[2].operator - &target)) <= 2e-2);
        assert!(dec.reconstruction_error(&h) <= 2e-2);
    }

    #[test]
    fn fud_rejects_insufficient_scaling() {
        let a = identity(2) * real(0.9);
        assert!(run_fud(&a, 0.5, &TudOptions::default()).is_err());
    }

    #[test]
    fn shortcut_of_zero_is_i() {
        let dec = sznagy_shortcut(&sznagy_encode(&CMatrix::zeros(2, 2)).unwrap()).unwrap();
        assert!(op_norm(&(&dec.parts[0].operator - identity(2) * c(0.0, 1.0))) < 1e-15);
        assert_eq!(dec.query_ledger.oaa_rounds, 0);
        assert_eq!(dec.parts[0].ledger.encoding_calls(), 1);
    }

    #[test]
    fn shortcut_of_scaled_x() {
        let h = pauli_x() * real(0.3);
        let dec = sznagy_shortcut(&sznagy_encode(&h).unwrap()).unwrap();
        let expected = eig_hermitian(&h)
            .unwrap()
            .map(|l| C64::from_polar(1.0, l.acos()));
        assert!(op_norm(&(&dec.parts[0].operator - &expected)) <= 1e-12);
        assert!(op_norm(&(&dec.parts[1].operator - expected.adjoint())) <= 1e-12);
        assert!(dec.reconstruction_error(&h) <= 1e-12);
    }

    #[test]
    fn shortcut_rejects_other_structures() {
        let a = random_contraction_with_spectrum(&[0.5, 0.2], 1).unwrap();
        assert!(sznagy_shortcut(&sznagy_encode(&a).unwrap()).is_err());
        let lcu = lcu_encode(&pauli_decompose(&(pauli_x() * real(0.3))).unwrap()).unwrap();
        assert!(sznagy_shortcut(&lcu).is_err());
    }

    #[test]
    fn shortcut_fud_on_gad() {
        for gamma in [0.0, 0.4, 1.0] {
            for a in gad_channel(GAD_P, gamma).unwrap().operators {
                let dec = sznagy_fud(&a).unwrap();
                assert!(dec.reconstruction_error(&a) <= 1e-12);
                assert!(dec.max_unitarity_residual() <= 1e-12);
                assert_eq!(dec.query_ledger.oaa_rounds, 0);
                assert!(dec.parts.iter().all(|p| p.ledger.encoding_calls() == 1));
            }
        }
    }

    #[test]
    fn decomposition_json_round_trip() {
        let a = random_contraction_with_spectrum(&[0.5, 0.2], 1).unwrap();
        let dec = oracle_tud_svd(&a).unwrap();
        let text = serde_json::to_string(&dec).unwrap();
        let back: UnitaryDecomposition = serde_json::from_str(&text).unwrap();
        assert!(back.reconstruction_error(&a) <= 1e-12);
        assert_eq!(back.query_ledger, dec.query_ledger);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn oracle_is_exact(
            sigma in proptest::collection::vec(0.0f64..=1.0, 2..=8),
            seed in any::<u64>(),
        ) {
            let a = random_contraction_with_spectrum(&sigma, seed).unwrap();
            let dec = oracle_tud_svd(&a).unwrap();
            prop_assert!(dec.reconstruction_error(&a) <= 1e-12);
            prop_assert!(dec.max_unitarity_residual() <= 1e-12);
        }

        #[test]
        fn oaa_fixes_unitary_halves(seed in any::<u64>(), dim in 1usize..=6) {
            let u = random_unitary(dim, seed).unwrap();
            let (amp, p) = oaa(&(&u * real(0.5))).unwrap();
            prop_assert!(op_norm(&(amp - &u)) <= 1e-12);
            prop_assert!((p - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn shortcut_is_exact(seed in any::<u64>(), dim in 1usize..=4) {
            let a = random_contraction_with_spectrum(
                &(0..dim).map(|i| (i as f64 + 0.5) / dim as f64).collect::<Vec<_>>(),
                seed,
            ).unwrap();
            let dec = sznagy_fud(&a).unwrap();
            prop_assert!(dec.reconstruction_error(&a) <= 1e-12);
        }
    }
}
