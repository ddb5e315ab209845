//! Kraus channels, density matrices and exact expectation values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    self, eig_hermitian, hermiticity_residual, kron, op_norm, real, unitarity_residual, CMatrix,
    CVector,
};

/// Trace-preservation tolerance enforced at construction.
pub const CPTP_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KrausChannel {
    #[serde(with = "numerics::matrix_json::list")]
    pub operators: Vec<CMatrix>,
    #[serde(default)]
    pub labels: Vec<String>,
}

impl KrausChannel {
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        let ch = Self::new_unchecked(operators);
        let residual = validate_cptp(&ch)?;
        if residual > CPTP_TOL {
            return Err(Error::NotCptp { residual });
        }
        Ok(ch)
    }

    /// Builds the channel without checking trace preservation.
    pub fn new_unchecked(operators: Vec<CMatrix>) -> Self {
        let labels = (0..operators.len()).map(|k| format!("A{k}")).collect();
        Self { operators, labels }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = labels;
        self
    }

    pub fn dim(&self) -> usize {
        self.operators.first().map_or(0, |a| a.nrows())
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// `‖Σ A_k†A_k − I‖`, or infinity when dimensions are inconsistent.
    pub fn cptp_residual(&self) -> f64 {
        validate_cptp(self).unwrap_or(f64::INFINITY)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityMatrix {
    #[serde(with = "numerics::matrix_json")]
    pub matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        let residual = hermiticity_residual(&matrix);
        if residual > 1e-12 {
            return Err(Error::NotHermitian { residual });
        }
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("trace {trace} is not 1")));
        }
        let min = eig_hermitian(&matrix)?.eigenvalues[0];
        if min < -1e-10 {
            return Err(Error::NotPsd { eigenvalue: min });
        }
        Ok(Self { matrix })
    }

    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("state norm {norm} is not 1")));
        }
        Ok(Self {
            matrix: psi * psi.adjoint(),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        let diff = &self.matrix - &other.matrix;
        let eig = eig_hermitian(&diff)?;
        Ok(0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
    }
}

/// `‖Σ A_k†A_k − I‖`
pub fn validate_cptp(ch: &KrausChannel) -> Result<f64> {
    let d = ch.dim();
    if d == 0 {
        return Err(Error::Empty);
    }
    let mut sum = CMatrix::zeros(d, d);
    for a in &ch.operators {
        if a.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator is {}x{}, expected {d}x{d}",
                a.nrows(),
                a.ncols()
            )));
        }
        sum += a.adjoint() * a;
    }
    Ok(op_norm(&(sum - CMatrix::identity(d, d))))
}

/// `Σ A_k ρ A_k†`
pub fn apply_channel(ch: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let residual = validate_cptp(ch)?;
    if residual > 1e-8 {
        return Err(Error::NotCptp { residual });
    }
    if rho.dim() != ch.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has dimension {}, channel acts on {}",
            rho.dim(),
            ch.dim()
        )));
    }
    let out = ch
        .operators
        .iter()
        .fold(CMatrix::zeros(rho.dim(), rho.dim()), |acc, a| {
            acc + a * &rho.matrix * a.adjoint()
        });
    // Restore exact Hermiticity lost to rounding.
    let matrix = (&out + out.adjoint()) * real(0.5);
    Ok(DensityMatrix { matrix })
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!("{name} = {v} is outside [0, 1]")));
    }
    Ok(())
}

/// Generalized amplitude damping with thermal population `p` and decay
/// probability `gamma`.
pub fn gad_channel(p: f64, gamma: f64) -> Result<KrausChannel> {
    check_unit_interval("p", p)?;
    check_unit_interval("gamma", gamma)?;
    let (sp, sq) = (p.sqrt(), (1.0 - p).sqrt());
    let (sg, sd) = (gamma.sqrt(), (1.0 - gamma).sqrt());
    let m = |a: f64, b: f64, c: f64, d: f64| {
        CMatrix::from_row_slice(2, 2, &[real(a), real(b), real(c), real(d)])
    };
    let ops = vec![
        m(sp, 0.0, 0.0, sp * sd),
        m(0.0, sp * sg, 0.0, 0.0),
        m(sq * sd, 0.0, 0.0, sq),
        m(0.0, 0.0, sq * sg, 0.0),
    ];
    KrausChannel::new(ops)
}

/// Amplitude damping with decay probability `p` and the rotation angle
/// `θ = 2 asin √p` of its one-ancilla circuit.
pub fn amplitude_damping(p: f64) -> Result<(KrausChannel, f64)> {
    check_unit_interval("p", p)?;
    let a0 = numerics::diag_real(&[1.0, (1.0 - p).sqrt()]);
    let mut a1 = CMatrix::zeros(2, 2);
    a1[(0, 1)] = real(p.sqrt());
    let ch = KrausChannel::new(vec![a0, a1])?;
    Ok((ch, 2.0 * p.sqrt().asin()))
}

/// Two-qubit circuit for amplitude damping: `R_y(θ)` on the ancilla controlled
/// by the system, then a CNOT from ancilla to system. Ancilla-major ordering.
pub fn amplitude_damping_circuit(theta: f64) -> CMatrix {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    // Index = 2·ancilla + system.
    let mut cry = CMatrix::identity(4, 4);
    cry[(1, 1)] = real(c);
    cry[(1, 3)] = real(-s);
    cry[(3, 1)] = real(s);
    cry[(3, 3)] = real(c);
    let mut cnot = CMatrix::zeros(4, 4);
    for (from, to) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        cnot[(to, from)] = real(1.0);
    }
    cnot * cry
}

/// Mixture `Σ q_i U_i ρ U_i†` as a Kraus channel with operators `√q_i U_i`.
pub fn unitary_ensemble(q: &[f64], unitaries: &[CMatrix]) -> Result<KrausChannel> {
    if q.is_empty() || q.len() != unitaries.len() {
        return Err(Error::DimensionMismatch(
            "need one probability per unitary".into(),
        ));
    }
    if let Some(bad) = q.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::InvalidParameter(format!("probability {bad} is not positive")));
    }
    let total: f64 = q.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("probabilities sum to {total}")));
    }
    for u in unitaries {
        let residual = unitarity_residual(u);
        if residual > 1e-10 {
            return Err(Error::NotUnitary { residual });
        }
    }
    let ops = q
        .iter()
        .zip(unitaries)
        .map(|(&qi, u)| u * real(qi.sqrt()))
        .collect();
    KrausChannel::new(ops)
}

/// Joint ancilla–system state of the ensemble circuit: the ancilla is
/// prepared in `Σ √q_i |i⟩` and selects `U_i` on the system.
pub fn unitary_ensemble_joint_state(
    q: &[f64],
    unitaries: &[CMatrix],
    rho: &DensityMatrix,
) -> Result<DensityMatrix> {
    let m = q.len();
    let d = rho.dim();
    if unitaries.len() != m || unitaries.iter().any(|u| u.shape() != (d, d)) {
        return Err(Error::DimensionMismatch("ensemble members do not match the state".into()));
    }
    let prep = CMatrix::from_fn(m, m, |i, j| real((q[i] * q[j]).sqrt()));
    let joint = kron(&prep, &rho.matrix);
    let mut select = CMatrix::zeros(m * d, m * d);
    for (i, u) in unitaries.iter().enumerate() {
        select.view_mut((i * d, i * d), (d, d)).copy_from(u);
    }
    Ok(DensityMatrix {
        matrix: &select * joint * select.adjoint(),
    })
}

/// Traces out the leading (most significant) factor of dimension `ancilla_dim`.
pub fn partial_trace_ancilla(joint: &DensityMatrix, ancilla_dim: usize) -> Result<DensityMatrix> {
    let n = joint.dim();
    if ancilla_dim == 0 || n % ancilla_dim != 0 {
        return Err(Error::DimensionMismatch(format!(
            "dimension {n} does not factor with ancilla dimension {ancilla_dim}"
        )));
    }
    let d = n / ancilla_dim;
    let mut out = CMatrix::zeros(d, d);
    for a in 0..ancilla_dim {
        out += joint.matrix.view((a * d, a * d), (d, d));
    }
    Ok(DensityMatrix { matrix: out })
}

/// `Σ_k ⟨ψ|A_k† O A_k|ψ⟩`
pub fn exact_expectation(ch: &KrausChannel, psi: &CVector, o: &CMatrix) -> Result<f64> {
    let residual = hermiticity_residual(o);
    if residual > 1e-10 {
        return Err(Error::NotHermitian { residual });
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("state norm {norm} is not 1")));
    }
    if psi.len() != ch.dim() || o.shape() != (ch.dim(), ch.dim()) {
        return Err(Error::DimensionMismatch("observable, state and channel differ".into()));
    }
    Ok(ch
        .operators
        .iter()
        .map(|a| {
            let v = a * psi;
            numerics::expectation(&v, o).re
        })
        .sum())
}

/// Ground-state population `e^{−E₀/kT}/Z` of a two-level system with level
/// energies given as frequencies in GHz.
///
/// With `E₀ = 0`, `E₁ = 5 GHz` and `T = 50 mK` this evaluates to about 0.992,
/// whereas the GAD experiments use 0.982; callers pass `p` explicitly.
pub fn thermal_population(e0_ghz: f64, e1_ghz: f64, temperature_kelvin: f64) -> f64 {
    const H_OVER_K: f64 = 6.626_070_15e-34 / 1.380_649e-23;
    let beta = 1e9 * H_OVER_K / temperature_kelvin;
    let w0 = (-beta * e0_ghz).exp();
    let w1 = (-beta * e1_ghz).exp();
    w0 / (w0 + w1)
}

/// Thermal population used by the GAD experiments.
pub const GAD_P: f64 = 0.982;

/// The three probe states `|1⟩`, `|+x⟩`, `|+y⟩` with their labels.
pub fn probe_states() -> Vec<(&'static str, CVector)> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        ("1", numerics::basis_state(2, 1)),
        ("+x", CVector::from_vec(vec![real(h), real(h)])),
        ("+y", CVector::from_vec(vec![real(h), numerics::c(0.0, h)])),
    ]
}

/// Pauli observables `X`, `Y`, `Z` with their labels.
pub fn pauli_observables() -> Vec<(&'static str, CMatrix)> {
    vec![
        ("X", numerics::pauli_x()),
        ("Y", numerics::pauli_y()),
        ("Z", numerics::pauli_z()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::stinespring_encode;
    use crate::numerics::{basis_state, pauli_x, pauli_z, random_unitary, seeded_rng};
    use proptest::prelude::*;

    fn random_state(dim: usize, seed: u64) -> DensityMatrix {
        let mut rng = seeded_rng(seed);
        let g = CMatrix::from_fn(dim, dim, |_, _| numerics::complex_normal(&mut rng));
        let p = &g * g.adjoint();
        let t = p.trace();
        DensityMatrix::new(p / t).unwrap()
    }

    #[test]
    fn validate_examples() {
        let id = KrausChannel::new(vec![CMatrix::identity(2, 2)]).unwrap();
        assert_eq!(validate_cptp(&id).unwrap(), 0.0);
        let shrunk = KrausChannel::new_unchecked(vec![CMatrix::identity(2, 2) * real(0.9)]);
        assert!((validate_cptp(&shrunk).unwrap() - 0.19).abs() < 1e-14);
        assert!(KrausChannel::new(shrunk.operators.clone()).is_err());
        for i in 0..=10 {
            for j in 0..=10 {
                let ch = gad_channel(i as f64 / 10.0, j as f64 / 10.0).unwrap();
                assert!(validate_cptp(&ch).unwrap() <= 1e-12);
            }
        }
    }

    #[test]
    fn validate_rejects_mixed_dimensions() {
        let ch = KrausChannel::new_unchecked(vec![CMatrix::identity(2, 2), CMatrix::zeros(3, 3)]);
        assert!(matches!(validate_cptp(&ch), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn gad_examples() {
        let ch = gad_channel(0.982, 0.5).unwrap();
        let a1 = &ch.operators[1];
        assert!((a1[(0, 1)].re - 0.982f64.sqrt() * 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(a1[(0, 0)], real(0.0));

        let ch = gad_channel(0.3, 0.0).unwrap();
        assert!((&ch.operators[0] - CMatrix::identity(2, 2) * real(0.3f64.sqrt())).norm() < 1e-15);
        assert_eq!(ch.operators[1].norm(), 0.0);
        assert!((&ch.operators[2] - CMatrix::identity(2, 2) * real(0.7f64.sqrt())).norm() < 1e-15);
        assert_eq!(ch.operators[3].norm(), 0.0);

        let ch = gad_channel(1.0, 0.3).unwrap();
        let (ad, _) = amplitude_damping(0.3).unwrap();
        assert_eq!(ch.operators[2].norm(), 0.0);
        assert_eq!(ch.operators[3].norm(), 0.0);
        assert!((&ch.operators[0] - &ad.operators[0]).norm() < 1e-15);
        assert!((&ch.operators[1] - &ad.operators[1]).norm() < 1e-15);

        assert!(gad_channel(1.1, 0.5).is_err());
        assert!(gad_channel(0.5, -0.1).is_err());
    }

    #[test]
    fn apply_examples() {
        let rho = random_state(2, 3);
        let id = KrausChannel::new(vec![CMatrix::identity(2, 2)]).unwrap();
        assert!((apply_channel(&id, &rho).unwrap().matrix - &rho.matrix).norm() < 1e-15);

        let (ad, _) = amplitude_damping(1.0).unwrap();
        let excited = DensityMatrix::pure(&basis_state(2, 1)).unwrap();
        let out = apply_channel(&ad, &excited).unwrap();
        assert!((out.matrix - numerics::diag_real(&[1.0, 0.0])).norm() < 1e-15);

        let gad = gad_channel(GAD_P, 1.0).unwrap();
        let out = apply_channel(&gad, &rho).unwrap();
        assert!((out.matrix - numerics::diag_real(&[GAD_P, 1.0 - GAD_P])).norm() < 1e-12);
    }

    #[test]
    fn apply_rejects_non_cptp() {
        let shrunk = KrausChannel::new_unchecked(vec![CMatrix::identity(2, 2) * real(0.9)]);
        let rho = random_state(2, 1);
        assert!(matches!(apply_channel(&shrunk, &rho), Err(Error::NotCptp { .. })));
    }

    #[test]
    fn gad_iteration_approaches_thermal_state() {
        let ch = gad_channel(GAD_P, 0.2).unwrap();
        let thermal = DensityMatrix::new(numerics::diag_real(&[GAD_P, 1.0 - GAD_P])).unwrap();
        let mut rho = random_state(2, 9);
        let mut last = rho.trace_distance(&thermal).unwrap();
        for _ in 0..50 {
            rho = apply_channel(&ch, &rho).unwrap();
            let dist = rho.trace_distance(&thermal).unwrap();
            assert!(dist <= last + 1e-15);
            last = dist;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn amplitude_damping_angles() {
        let (ch, theta) = amplitude_damping(0.0).unwrap();
        assert_eq!(theta, 0.0);
        assert!((&ch.operators[0] - CMatrix::identity(2, 2)).norm() < 1e-15);
        let (_, theta) = amplitude_damping(1.0).unwrap();
        assert!((theta - std::f64::consts::PI).abs() < 1e-15);
        let (_, theta) = amplitude_damping(0.5).unwrap();
        assert!((theta - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn amplitude_damping_circuit_matches_kraus_column() {
        let p = 0.5;
        let (ch, theta) = amplitude_damping(p).unwrap();
        let u = amplitude_damping_circuit(theta);
        assert!(unitarity_residual(&u) < 1e-15);
        assert!((u.view((0, 0), (2, 2)) - &ch.operators[0]).norm() < 1e-15);
        assert!((u.view((2, 0), (2, 2)) - &ch.operators[1]).norm() < 1e-15);
        // Entries are drawn from {0, 1, ±√p, √(1−p)}.
        let allowed = [0.0, 1.0, p.sqrt(), -p.sqrt(), (1.0 - p).sqrt()];
        for z in u.iter() {
            assert!(z.im == 0.0 && allowed.iter().any(|a| (z.re - a).abs() < 1e-15));
        }
    }

    #[test]
    fn stinespring_trace_out_reproduces_channel() {
        let (ch, _) = amplitude_damping(0.5).unwrap();
        let u = stinespring_encode(&ch).unwrap();
        let excited = DensityMatrix::pure(&basis_state(2, 1)).unwrap();
        let anc = numerics::diag_real(&[1.0, 0.0]);
        let joint = DensityMatrix {
            matrix: &u * kron(&anc, &excited.matrix) * u.adjoint(),
        };
        let reduced = partial_trace_ancilla(&joint, 2).unwrap();
        let direct = apply_channel(&ch, &excited).unwrap();
        assert!((reduced.matrix - direct.matrix).norm() < 1e-12);
    }

    #[test]
    fn ensemble_examples() {
        let u = random_unitary(2, 5).unwrap();
        let ch = unitary_ensemble(&[1.0], std::slice::from_ref(&u)).unwrap();
        assert!((&ch.operators[0] - u).norm() < 1e-15);

        let ch = unitary_ensemble(&[0.5, 0.5], &[CMatrix::identity(2, 2), pauli_z()]).unwrap();
        let rho = random_state(2, 4);
        let out = apply_channel(&ch, &rho).unwrap();
        assert!(out.matrix[(0, 1)].norm() < 1e-15);
        assert!(out.matrix[(1, 0)].norm() < 1e-15);
        assert!((out.matrix[(0, 0)] - rho.matrix[(0, 0)]).norm() < 1e-15);

        assert!(unitary_ensemble(&[0.5, 0.4], &[pauli_x(), pauli_z()]).is_err());
        assert!(unitary_ensemble(&[1.5, -0.5], &[pauli_x(), pauli_z()]).is_err());
    }

    #[test]
    fn ensemble_joint_state_traces_to_channel() {
        let q = [0.2, 0.3, 0.5];
        let us: Vec<_> = (0..3).map(|s| random_unitary(2, 40 + s).unwrap()).collect();
        let ch = unitary_ensemble(&q, &us).unwrap();
        let rho = random_state(2, 17);
        let joint = unitary_ensemble_joint_state(&q, &us, &rho).unwrap();
        let reduced = partial_trace_ancilla(&joint, 3).unwrap();
        let direct = apply_channel(&ch, &rho).unwrap();
        assert!((reduced.matrix - direct.matrix).norm() <= 1e-12);
    }

    #[test]
    fn partial_trace_examples() {
        let omega = random_state(2, 1);
        let rho = random_state(2, 2);
        let joint = DensityMatrix {
            matrix: kron(&omega.matrix, &rho.matrix),
        };
        let out = partial_trace_ancilla(&joint, 2).unwrap();
        assert!((out.matrix - &rho.matrix).norm() < 1e-14);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = CVector::from_vec(vec![real(h), real(0.0), real(0.0), real(h)]);
        let out = partial_trace_ancilla(&DensityMatrix::pure(&bell).unwrap(), 2).unwrap();
        assert!((out.matrix - CMatrix::identity(2, 2) * real(0.5)).norm() < 1e-15);

        assert!(partial_trace_ancilla(&joint, 3).is_err());
    }

    #[test]
    fn expectation_examples() {
        let id = KrausChannel::new(vec![CMatrix::identity(2, 2)]).unwrap();
        let v = exact_expectation(&id, &basis_state(2, 0), &pauli_z()).unwrap();
        assert!((v - 1.0).abs() < 1e-15);

        for (_, psi) in probe_states() {
            for gamma in [0.0, 0.3, 0.77, 1.0] {
                let ch = gad_channel(GAD_P, gamma).unwrap();
                let rho = DensityMatrix::pure(&psi).unwrap();
                let out = apply_channel(&ch, &rho).unwrap();
                for (_, o) in pauli_observables() {
                    let a = exact_expectation(&ch, &psi, &o).unwrap();
                    let b = (&o * &out.matrix).trace().re;
                    assert!((a - b).abs() <= 1e-12);
                }
            }
        }

        // |1⟩ under GAD: population relaxes toward p with rate γ.
        let gamma = 0.4;
        let ch = gad_channel(GAD_P, gamma).unwrap();
        let z = exact_expectation(&ch, &basis_state(2, 1), &pauli_z()).unwrap();
        assert!((z - (-1.0 + 2.0 * gamma * GAD_P)).abs() < 1e-14);

        // Coherences decay as √(1−γ).
        let plus = &probe_states()[1].1;
        let x = exact_expectation(&ch, plus, &pauli_x()).unwrap();
        assert!((x - (1.0 - gamma).sqrt()).abs() < 1e-14);

        let bad = CMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(0.0), real(0.0)]);
        assert!(matches!(
            exact_expectation(&ch, plus, &bad),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn thermal_population_differs_from_gad_value() {
        let p = thermal_population(0.0, 5.0, 0.05);
        assert!((p - 0.9918).abs() < 1e-3);
        assert!((p - GAD_P).abs() > 5e-3);
    }

    #[test]
    fn channel_json_round_trip() {
        let ch = gad_channel(GAD_P, 0.3).unwrap();
        let text = serde_json::to_string(&ch).unwrap();
        let back: KrausChannel = serde_json::from_str(&text).unwrap();
        assert_eq!(back.labels, ch.labels);
        for (a, b) in ch.operators.iter().zip(&back.operators) {
            assert!((a - b).norm() == 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn channels_preserve_states(p in 0.0f64..=1.0, gamma in 0.0f64..=1.0, seed in any::<u64>()) {
            let ch = gad_channel(p, gamma).unwrap();
            let rho = random_state(2, seed);
            let out = apply_channel(&ch, &rho).unwrap();
            prop_assert!((out.matrix.trace().re - 1.0).abs() <= 1e-12);
            prop_assert!(eig_hermitian(&out.matrix).unwrap().eigenvalues[0] >= -1e-10);
        }

        #[test]
        fn stinespring_matches_kraus_sum(p in 0.0f64..=1.0, gamma in 0.0f64..=1.0, seed in any::<u64>()) {
            let ch = gad_channel(p, gamma).unwrap();
            let u = stinespring_encode(&ch).unwrap();
            let rho = random_state(2, seed);
            let mut anc = CMatrix::zeros(4, 4);
            anc[(0, 0)] = real(1.0);
            let joint = DensityMatrix { matrix: &u * kron(&anc, &rho.matrix) * u.adjoint() };
            let reduced = partial_trace_ancilla(&joint, 4).unwrap();
            let direct = apply_channel(&ch, &rho).unwrap();
            prop_assert!((reduced.matrix - direct.matrix).norm() <= 1e-12);
        }

        #[test]
        fn expectation_formulas_agree(seed in any::<u64>(), gamma in 0.0f64..=1.0) {
            let ch = gad_channel(GAD_P, gamma).unwrap();
            let mut rng = seeded_rng(seed);
            let psi = numerics::normalized(CVector::from_fn(2, |_, _| numerics::complex_normal(&mut rng)));
            let h = numerics::random_hermitian(2, &mut rng);
            let rho = DensityMatrix::pure(&psi).unwrap();
            let out = apply_channel(&ch, &rho).unwrap();
            let a = exact_expectation(&ch, &psi, &h).unwrap();
            let b = (&h * &out.matrix).trace().re;
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + op_norm(&h)));
        }
    }
}
