//! Block encodings and the dilations that produce them.
//!
//! Ancilla registers are always the most significant tensor factor: a
//! unitary acting on `ℓ` ancilla qubits and a `d`-dimensional system has
//! basis index `a·d + s`, so the encoded operator sits in the top-left
//! `d × d` block.

use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::error::{Error, Result};
use crate::numerics::{
    self, c, hadamard, kron, op_norm, real, unitarity_residual, CMatrix, CVector, C64,
};

/// Unitarity tolerance accepted for constructed encodings.
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockEncoding {
    #[serde(with = "numerics::matrix_json")]
    pub unitary: CMatrix,
    pub alpha: f64,
    pub num_ancilla: usize,
    pub error: f64,
}

impl BlockEncoding {
    pub fn new(unitary: CMatrix, alpha: f64, num_ancilla: usize, error: f64) -> Result<Self> {
        let (rows, cols) = unitary.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        let ancilla_dim = 1usize << num_ancilla;
        if rows == 0 || rows % ancilla_dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "unitary of dimension {rows} cannot host {num_ancilla} ancilla qubits"
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        if !(error >= 0.0) {
            return Err(Error::InvalidParameter(format!("error must be non-negative, got {error}")));
        }
        let residual = unitarity_residual(&unitary);
        if residual > UNITARY_TOL {
            return Err(Error::NotUnitary { residual });
        }
        Ok(Self {
            unitary,
            alpha,
            num_ancilla,
            error,
        })
    }

    /// A unitary viewed as a `(1, 0, 0)` encoding of itself.
    pub fn from_unitary(u: CMatrix) -> Result<Self> {
        Self::new(u, 1.0, 0, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.unitary.nrows()
    }

    pub fn system_dim(&self) -> usize {
        self.dim() >> self.num_ancilla
    }

    /// Top-left block `(⟨0|^ℓ ⊗ I) U (|0⟩^ℓ ⊗ I)`, without the `α` factor.
    pub fn block(&self) -> CMatrix {
        let d = self.system_dim();
        self.unitary.view((0, 0), (d, d)).into_owned()
    }

    /// `α` times the top-left block.
    pub fn encoded_operator(&self) -> CMatrix {
        self.block() * real(self.alpha)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            unitary: self.unitary.adjoint(),
            ..self.clone()
        }
    }

    /// Adds `extra` idle ancilla qubits as the new most significant factors.
    pub fn pad_ancilla(&self, extra: usize) -> Self {
        let id = CMatrix::identity(1 << extra, 1 << extra);
        Self {
            unitary: kron(&id, &self.unitary),
            num_ancilla: self.num_ancilla + extra,
            ..self.clone()
        }
    }

    /// Re-encodes the same operator with a larger normalisation `alpha`,
    /// using one extra ancilla rotated by `cos θ = self.alpha / alpha`.
    pub fn rescaled(&self, alpha: f64) -> Result<Self> {
        if alpha < self.alpha * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "cannot shrink alpha from {} to {alpha}",
                self.alpha
            )));
        }
        let cos = (self.alpha / alpha).min(1.0);
        let sin = (1.0 - cos * cos).max(0.0).sqrt();
        let rot = CMatrix::from_row_slice(2, 2, &[real(cos), real(sin), real(sin), real(-cos)]);
        Ok(Self {
            unitary: kron(&rot, &self.unitary),
            alpha,
            num_ancilla: self.num_ancilla + 1,
            error: self.error,
        })
    }
}

/// `‖A − α (⟨0|^ℓ ⊗ I) U (|0⟩^ℓ ⊗ I)‖`
pub fn verify_block_encoding(enc: &BlockEncoding, a: &CMatrix) -> Result<f64> {
    if a.nrows() != enc.system_dim() || a.ncols() != enc.system_dim() {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, encoding hosts a {}-dimensional system",
            a.nrows(),
            a.ncols(),
            enc.system_dim()
        )));
    }
    Ok(op_norm(&(a - enc.encoded_operator())))
}

/// Sz.-Nagy dilation `[[A, √(I−AA†)], [√(I−A†A), −A†]]` as a `(1, 1, 0)`
/// encoding.
pub fn sznagy_encode(a: &CMatrix) -> Result<BlockEncoding> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let norm = op_norm(a);
    if norm > 1.0 + 1e-10 {
        return Err(Error::NotContraction { norm });
    }
    let d = rows;
    // Defect operators from the SVD so that σ² + (1−σ²) = 1 holds exactly.
    let s = numerics::svd(a)?;
    let defect: Vec<C64> = s
        .singular_values
        .iter()
        .map(|&x| real((1.0 - x * x).max(0.0).sqrt()))
        .collect();
    let defect = CMatrix::from_diagonal(&CVector::from_vec(defect));
    let top_right = &s.left * &defect * s.left.adjoint();
    let bottom_left = &s.right * &defect * s.right.adjoint();
    let mut u = CMatrix::zeros(2 * d, 2 * d);
    u.view_mut((0, 0), (d, d)).copy_from(a);
    u.view_mut((0, d), (d, d)).copy_from(&top_right);
    u.view_mut((d, 0), (d, d)).copy_from(&bottom_left);
    u.view_mut((d, d), (d, d)).copy_from(&(-a.adjoint()));
    BlockEncoding::new(u, 1.0, 1, 0.0)
}

/// `A = Σ α_i U_i` with `α_i > 0` and each `U_i` a phased Pauli string.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PauliDecomposition {
    pub coefficients: Vec<f64>,
    #[serde(with = "numerics::matrix_json::list")]
    pub operators: Vec<CMatrix>,
    pub labels: Vec<String>,
    pub alpha_total: f64,
}

impl PauliDecomposition {
    pub fn new(coefficients: Vec<f64>, operators: Vec<CMatrix>) -> Result<Self> {
        if coefficients.len() != operators.len() {
            return Err(Error::DimensionMismatch(
                "coefficient and operator counts differ".into(),
            ));
        }
        if let Some(bad) = coefficients.iter().find(|&&a| !(a >= 0.0)) {
            return Err(Error::InvalidParameter(format!("negative coefficient {bad}")));
        }
        let labels = (0..operators.len()).map(|i| format!("U{i}")).collect();
        let alpha_total = coefficients.iter().sum();
        Ok(Self {
            coefficients,
            operators,
            labels,
            alpha_total,
        })
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn reconstruct(&self, dim: usize) -> CMatrix {
        self.coefficients
            .iter()
            .zip(&self.operators)
            .fold(CMatrix::zeros(dim, dim), |acc, (&a, u)| acc + u * real(a))
    }
}

const PAULI_CUTOFF: f64 = 1e-14;

fn pauli_string(index: usize, qubits: usize) -> (String, CMatrix) {
    let mut label = String::with_capacity(qubits);
    let mut m = CMatrix::identity(1, 1);
    for k in (0..qubits).rev() {
        let (ch, p) = match (index >> (2 * k)) & 3 {
            0 => ('I', numerics::pauli_i()),
            1 => ('X', numerics::pauli_x()),
            2 => ('Y', numerics::pauli_y()),
            _ => ('Z', numerics::pauli_z()),
        };
        label.push(ch);
        m = kron(&m, &p);
    }
    (label, m)
}

/// Expands `A` in Pauli strings, folding each coefficient's phase into its
/// operator so that all weights are non-negative.
pub fn pauli_decompose(a: &CMatrix) -> Result<PauliDecomposition> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows == 0 || !rows.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(rows));
    }
    let qubits = rows.trailing_zeros() as usize;
    let scale = op_norm(a).max(1.0);
    let mut coefficients = Vec::new();
    let mut operators = Vec::new();
    let mut labels = Vec::new();
    for index in 0..(1usize << (2 * qubits)) {
        let (label, p) = pauli_string(index, qubits);
        // Pauli strings are Hermitian, so Tr(P†A) = Tr(PA).
        let coeff = (&p * a).trace() / real(rows as f64);
        let weight = coeff.norm();
        if weight <= PAULI_CUTOFF * scale {
            continue;
        }
        coefficients.push(weight);
        operators.push(p * (coeff / weight));
        labels.push(label);
    }
    let alpha_total = coefficients.iter().sum();
    Ok(PauliDecomposition {
        coefficients,
        operators,
        labels,
        alpha_total,
    })
}

/// Extends orthonormal columns to a full unitary by Gram–Schmidt over the
/// canonical basis. Candidates whose residual falls below `1e-10` are skipped.
pub fn complete_unitary(columns: &CMatrix) -> Result<CMatrix> {
    let (n, k) = columns.shape();
    if k > n {
        return Err(Error::DimensionMismatch(format!(
            "{k} columns cannot be orthonormal in dimension {n}"
        )));
    }
    let gram = columns.adjoint() * columns - CMatrix::identity(k, k);
    let residual = op_norm(&gram);
    if residual > UNITARY_TOL {
        return Err(Error::NotUnitary { residual });
    }
    let mut basis: Vec<CVector> = (0..k).map(|j| columns.column(j).into_owned()).collect();
    for j in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = numerics::basis_state(n, j);
        // Two passes of modified Gram–Schmidt.
        for _ in 0..2 {
            for q in &basis {
                let overlap = q.dotc(&v);
                v -= q * overlap;
            }
        }
        let norm = v.norm();
        if norm < 1e-10 {
            continue;
        }
        basis.push(v / real(norm));
    }
    if basis.len() != n {
        return Err(Error::NotConverged("gram-schmidt completion"));
    }
    let mut u = CMatrix::zeros(n, n);
    for (j, col) in basis.iter().enumerate() {
        u.set_column(j, col);
    }
    // The first k columns are the inputs verbatim.
    u.view_mut((0, 0), (n, k)).copy_from(columns);
    Ok(u)
}

/// Hermitian reflection `B` with `B|0⟩ = b` for a real unit vector `b`.
fn householder_prep(b: &[f64]) -> CMatrix {
    let n = b.len();
    let mut w: Vec<f64> = b.iter().map(|x| -x).collect();
    w[0] += 1.0;
    let norm_sq: f64 = w.iter().map(|x| x * x).sum();
    if norm_sq < 1e-300 {
        return CMatrix::identity(n, n);
    }
    CMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        real(delta - 2.0 * w[i] * w[j] / norm_sq)
    })
}

/// Prepare–select–unprepare encoding `(B ⊗ I)·SELECT·(B† ⊗ I)` of
/// `Σ α_i U_i / Σ α_i`.
pub fn lcu_encode(decomp: &PauliDecomposition) -> Result<BlockEncoding> {
    let terms = decomp.len();
    if terms == 0 {
        return Err(Error::InvalidParameter("empty decomposition".into()));
    }
    if let Some(bad) = decomp.coefficients.iter().find(|&&a| !(a >= 0.0)) {
        return Err(Error::InvalidParameter(format!("negative coefficient {bad}")));
    }
    let alpha_total: f64 = decomp.coefficients.iter().sum();
    if !(alpha_total > 0.0) {
        return Err(Error::InvalidParameter("coefficients sum to zero".into()));
    }
    let d = decomp.operators[0].nrows();
    if decomp.operators.iter().any(|u| u.shape() != (d, d)) {
        return Err(Error::DimensionMismatch("LCU operators differ in shape".into()));
    }
    for u in &decomp.operators {
        let residual = unitarity_residual(u);
        if residual > 1e-12 {
            return Err(Error::NotUnitary { residual });
        }
    }
    let ancilla = terms.next_power_of_two().trailing_zeros() as usize;
    let slots = 1usize << ancilla;

    let amplitudes: Vec<f64> = (0..slots)
        .map(|i| decomp.coefficients.get(i).map_or(0.0, |a| (a / alpha_total).sqrt()))
        .collect();
    let prep = householder_prep(&amplitudes);

    let mut select = CMatrix::zeros(slots * d, slots * d);
    for slot in 0..slots {
        let block = decomp
            .operators
            .get(slot)
            .cloned()
            .unwrap_or_else(|| CMatrix::identity(d, d));
        select
            .view_mut((slot * d, slot * d), (d, d))
            .copy_from(&block);
    }
    let id = CMatrix::identity(d, d);
    let b = kron(&prep, &id);
    let unitary = &b * select * b.adjoint();
    BlockEncoding::new(unitary, alpha_total, ancilla, 0.0)
}

/// Stinespring unitary whose first block column stacks the Kraus operators.
/// The ancilla register has dimension `m` (number of operators).
pub fn stinespring_encode(channel: &KrausChannel) -> Result<CMatrix> {
    let residual = channel.cptp_residual();
    if residual > 1e-10 {
        return Err(Error::NotCptp { residual });
    }
    let d = channel.dim();
    let m = channel.len();
    let mut stacked = CMatrix::zeros(m * d, d);
    for (k, a) in channel.operators.iter().enumerate() {
        stacked.view_mut((k * d, 0), (d, d)).copy_from(a);
    }
    complete_unitary(&stacked)
}

#[derive(Clone, Debug)]
pub struct PostSelectOutcome {
    pub success_probability: f64,
    pub conditioned_state: Option<CVector>,
    /// Norm of the component that fails post-selection.
    pub residual_norm: f64,
}

impl PostSelectOutcome {
    pub fn state(&self) -> Result<&CVector> {
        self.conditioned_state.as_ref().ok_or(Error::ZeroProbability)
    }
}

/// Runs `U (|0⟩^ℓ ⊗ |ψ⟩)` and conditions on the all-zero ancilla outcome.
pub fn apply_and_postselect(enc: &BlockEncoding, psi: &CVector) -> Result<PostSelectOutcome> {
    let d = enc.system_dim();
    if psi.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "state has dimension {}, encoding expects {d}",
            psi.len()
        )));
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("state norm {norm} is not 1")));
    }
    let out = enc.unitary.columns(0, d) * psi;
    let kept = out.rows(0, d).into_owned();
    let p = kept.norm_squared().min(1.0);
    let failed = out.rows(d, out.len() - d).norm();
    let conditioned_state = if p > 0.0 {
        Some(kept / real(p.sqrt()))
    } else {
        None
    };
    Ok(PostSelectOutcome {
        success_probability: p,
        conditioned_state,
        residual_norm: failed,
    })
}

/// Single-qubit phase `e^{iθσ_z}`.
pub fn z_phase(theta: f64) -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            c(theta.cos(), theta.sin()),
            real(0.0),
            real(0.0),
            c(theta.cos(), -theta.sin()),
        ],
    )
}

/// `H ⊗ I` on a fresh most-significant qubit.
pub fn hadamard_on_top(dim: usize) -> CMatrix {
    kron(&hadamard(), &CMatrix::identity(dim, dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{amplitude_damping, gad_channel};
    use crate::numerics::{
        basis_state, pauli_x, pauli_z, random_contraction_with_spectrum, random_unitary,
    };
    use proptest::prelude::*;

    #[test]
    fn identity_encoding_has_zero_error() {
        let enc = BlockEncoding::from_unitary(CMatrix::identity(2, 2)).unwrap();
        assert_eq!(verify_block_encoding(&enc, &CMatrix::identity(2, 2)).unwrap(), 0.0);
    }

    #[test]
    fn verify_rejects_mismatched_dimensions() {
        let enc = sznagy_encode(&CMatrix::zeros(2, 2)).unwrap();
        assert!(matches!(
            verify_block_encoding(&enc, &CMatrix::zeros(4, 4)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn new_rejects_non_unitary() {
        let m = CMatrix::identity(2, 2) * real(0.9);
        assert!(matches!(
            BlockEncoding::new(m, 1.0, 0, 0.0),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn sznagy_of_zero_is_block_swap() {
        let enc = sznagy_encode(&CMatrix::zeros(2, 2)).unwrap();
        let u = &enc.unitary;
        assert!((u.view((0, 2), (2, 2)) - CMatrix::identity(2, 2)).norm() < 1e-15);
        assert!((u.view((2, 0), (2, 2)) - CMatrix::identity(2, 2)).norm() < 1e-15);
        assert!(u.view((0, 0), (2, 2)).norm() < 1e-15);
    }

    #[test]
    fn sznagy_of_unitary_is_block_diagonal() {
        let a = random_unitary(3, 4).unwrap();
        let enc = sznagy_encode(&a).unwrap();
        assert!(enc.unitary.view((0, 3), (3, 3)).norm() < 1e-7);
        assert!(enc.unitary.view((3, 0), (3, 3)).norm() < 1e-7);
        assert!((enc.unitary.view((3, 3), (3, 3)) + a.adjoint()).norm() < 1e-14);
    }

    #[test]
    fn sznagy_of_amplitude_damping_kraus() {
        let (ch, _) = amplitude_damping(0.5).unwrap();
        let a0 = &ch.operators[0];
        let enc = sznagy_encode(a0).unwrap();
        assert!(verify_block_encoding(&enc, a0).unwrap() <= 1e-10);
        assert!(unitarity_residual(&enc.unitary) <= 1e-10);
    }

    #[test]
    fn sznagy_rejects_expansions() {
        let a = CMatrix::identity(2, 2) * real(1.1);
        assert!(matches!(sznagy_encode(&a), Err(Error::NotContraction { .. })));
    }

    #[test]
    fn pauli_decompose_examples() {
        let x = pauli_decompose(&pauli_x()).unwrap();
        assert_eq!(x.len(), 1);
        assert!((x.coefficients[0] - 1.0).abs() < 1e-15);
        assert_eq!(x.labels[0], "X");

        let xz = (pauli_x() + pauli_z()) * real(0.5);
        let d = pauli_decompose(&xz).unwrap();
        assert_eq!(d.len(), 2);
        for a in &d.coefficients {
            assert!((a - 0.5).abs() < 1e-15);
        }

        let gad = gad_channel(0.982, 0.4).unwrap();
        let a1 = &gad.operators[1];
        let d = pauli_decompose(a1).unwrap();
        assert!(op_norm(&(d.reconstruct(2) - a1)) <= 1e-12);
        assert!(d.len() <= 4);
    }

    #[test]
    fn pauli_decompose_rejects_odd_dimension() {
        assert!(matches!(
            pauli_decompose(&CMatrix::identity(3, 3)),
            Err(Error::NotPowerOfTwo(3))
        ));
    }

    #[test]
    fn lcu_single_term_is_the_unitary() {
        let u = random_unitary(2, 3).unwrap();
        let d = PauliDecomposition::new(vec![0.7], vec![u.clone()]).unwrap();
        let enc = lcu_encode(&d).unwrap();
        assert_eq!(enc.num_ancilla, 0);
        assert!((enc.unitary - u).norm() < 1e-14);
        assert!((enc.alpha - 0.7).abs() < 1e-15);
    }

    #[test]
    fn lcu_of_x_plus_z() {
        let target = (pauli_x() + pauli_z()) * real(0.5);
        let enc = lcu_encode(&pauli_decompose(&target).unwrap()).unwrap();
        assert!((enc.alpha - 1.0).abs() < 1e-14);
        assert_eq!(enc.num_ancilla, 1);
        assert!((enc.block() - &target).norm() < 1e-14);
    }

    #[test]
    fn lcu_of_gad_kraus_round_trips() {
        let gad = gad_channel(0.982, 0.4).unwrap();
        for a in &gad.operators {
            let d = pauli_decompose(a).unwrap();
            if d.is_empty() {
                continue;
            }
            let enc = lcu_encode(&d).unwrap();
            assert!(verify_block_encoding(&enc, a).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn lcu_pads_three_terms_to_four_slots() {
        let ops = vec![pauli_x(), pauli_z(), CMatrix::identity(2, 2)];
        let d = PauliDecomposition::new(vec![0.2, 0.3, 0.5], ops).unwrap();
        let enc = lcu_encode(&d).unwrap();
        assert_eq!(enc.num_ancilla, 2);
        assert!(verify_block_encoding(&enc, &d.reconstruct(2)).unwrap() <= 1e-10);
    }

    #[test]
    fn lcu_rejects_negative_weights() {
        assert!(PauliDecomposition::new(vec![-0.1], vec![pauli_x()]).is_err());
        let bad = PauliDecomposition {
            coefficients: vec![-0.1],
            operators: vec![pauli_x()],
            labels: vec!["X".into()],
            alpha_total: -0.1,
        };
        assert!(lcu_encode(&bad).is_err());
    }

    #[test]
    fn rescaled_encoding_keeps_operator() {
        let a = random_contraction_with_spectrum(&[0.4, 0.1], 8).unwrap();
        let enc = sznagy_encode(&a).unwrap().rescaled(1.61).unwrap();
        assert_eq!(enc.num_ancilla, 2);
        assert!(verify_block_encoding(&enc, &a).unwrap() <= 1e-12);
        assert!(sznagy_encode(&a).unwrap().rescaled(0.5).is_err());
    }

    #[test]
    fn stinespring_of_single_unitary() {
        let u = random_unitary(2, 12).unwrap();
        let ch = KrausChannel::new(vec![u.clone()]).unwrap();
        let st = stinespring_encode(&ch).unwrap();
        assert!((st - u).norm() < 1e-14);
    }

    #[test]
    fn stinespring_of_amplitude_damping_matches_worked_example() {
        let p: f64 = 0.5;
        let (ch, _) = amplitude_damping(p).unwrap();
        let st = stinespring_encode(&ch).unwrap();
        assert!(unitarity_residual(&st) <= 1e-10);
        assert!((st.view((0, 0), (2, 2)) - &ch.operators[0]).norm() < 1e-15);
        assert!((st.view((2, 0), (2, 2)) - &ch.operators[1]).norm() < 1e-15);

        // Worked 4x4 example; trailing columns are only fixed up to the
        // completion freedom, so compare them up to sign.
        let (s, q) = (p.sqrt(), (1.0 - p).sqrt());
        let expected = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, q, -s, 0.0],
            [0.0, s, q, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        for col in 0..4 {
            let same: f64 = (0..4).map(|r| (st[(r, col)] - real(expected[r][col])).norm()).sum();
            let flipped: f64 =
                (0..4).map(|r| (st[(r, col)] + real(expected[r][col])).norm()).sum();
            if col < 2 {
                assert!(same < 1e-15, "column {col}");
            } else {
                assert!(same.min(flipped) < 1e-15, "column {col}");
            }
        }
    }

    #[test]
    fn stinespring_rejects_non_cptp() {
        let ch = KrausChannel::new_unchecked(vec![CMatrix::identity(2, 2) * real(0.9)]);
        assert!(matches!(stinespring_encode(&ch), Err(Error::NotCptp { .. })));
    }

    #[test]
    fn postselect_unitary_always_succeeds() {
        let u = random_unitary(2, 1).unwrap();
        let enc = BlockEncoding::from_unitary(u).unwrap();
        let psi = numerics::normalized(CVector::from_vec(vec![real(0.6), c(0.0, 0.8)]));
        let out = apply_and_postselect(&enc, &psi).unwrap();
        assert!((out.success_probability - 1.0).abs() < 1e-14);
    }

    #[test]
    fn postselect_scaled_lowering_operator() {
        let scale: f64 = 0.3;
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = real(scale);
        let enc = sznagy_encode(&a).unwrap();
        let out = apply_and_postselect(&enc, &basis_state(2, 1)).unwrap();
        assert!((out.success_probability - scale * scale).abs() < 1e-15);
        let state = out.state().unwrap();
        assert!((state[0].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn postselect_gad_a0_from_excited_state() {
        let (p, gamma) = (0.982, 0.4);
        let gad = gad_channel(p, gamma).unwrap();
        let enc = sznagy_encode(&gad.operators[0]).unwrap();
        let psi = basis_state(2, 1);
        let out = apply_and_postselect(&enc, &psi).unwrap();
        let a = &gad.operators[0];
        let direct = numerics::expectation(&psi, &(a.adjoint() * a)).re;
        assert!((out.success_probability - direct).abs() <= 1e-12);
        assert!((out.success_probability - p * (1.0 - gamma)).abs() <= 1e-12);
    }

    #[test]
    fn postselect_zero_probability_has_no_state() {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = real(1.0);
        let enc = sznagy_encode(&a).unwrap();
        let out = apply_and_postselect(&enc, &basis_state(2, 0)).unwrap();
        assert_eq!(out.success_probability, 0.0);
        assert!(matches!(out.state(), Err(Error::ZeroProbability)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn lcu_recovers_random_contractions(
            sigma in proptest::collection::vec(0.0f64..=1.0, 4),
            seed in any::<u64>(),
        ) {
            let a = random_contraction_with_spectrum(&sigma, seed).unwrap();
            let d = pauli_decompose(&a).unwrap();
            prop_assume!(!d.is_empty());
            let enc = lcu_encode(&d).unwrap();
            prop_assert!(unitarity_residual(&enc.unitary) <= 1e-10);
            let expected = &a / real(d.alpha_total);
            prop_assert!(op_norm(&(enc.block() - expected)) <= 1e-10);
        }

        #[test]
        fn sznagy_round_trip(
            sigma in proptest::collection::vec(0.0f64..=1.0, 1..6),
            seed in any::<u64>(),
        ) {
            let a = random_contraction_with_spectrum(&sigma, seed).unwrap();
            let enc = sznagy_encode(&a).unwrap();
            prop_assert!(unitarity_residual(&enc.unitary) <= 1e-10);
            prop_assert!(verify_block_encoding(&enc, &a).unwrap() <= 1e-10);
        }
    }
}
