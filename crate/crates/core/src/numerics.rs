//! Dense complex linear algebra shared by the simulation pipeline and by the
//! exact reference computations it is checked against.
//!
//! Everything here is a pure function of its inputs. Random ensembles take an
//! explicit seed (or an explicit generator) so every draw is reproducible.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

const JACOBI_EPS: f64 = 1e-15;
const MAX_SWEEPS: usize = 100;

/// Tolerance used when deciding whether a matrix is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Negative eigenvalues above this are treated as round-off and clamped.
pub const PSD_CLAMP_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Singular value decomposition `A = left * diag(singular_values) * right^†`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub left: CMatrix,
    pub singular_values: Vec<f64>,
    pub right: CMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> CMatrix {
        &self.left * diag_real(&self.singular_values) * self.right.adjoint()
    }

    /// `Σ g(σ_i) |w_i⟩⟨v_i|`.
    pub fn map_singular_values(&self, g: impl Fn(f64) -> C64) -> CMatrix {
        let d: Vec<C64> = self.singular_values.iter().map(|&s| g(s)).collect();
        &self.left * CMatrix::from_diagonal(&CVector::from_vec(d)) * self.right.adjoint()
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    pub fn reconstruct(&self) -> CMatrix {
        self.map(real)
    }

    /// `Σ g(λ_j) |λ_j⟩⟨λ_j|`.
    pub fn map(&self, g: impl Fn(f64) -> C64) -> CMatrix {
        let d: Vec<C64> = self.eigenvalues.iter().map(|&l| g(l)).collect();
        &self.eigenvectors
            * CMatrix::from_diagonal(&CVector::from_vec(d))
            * self.eigenvectors.adjoint()
    }
}

fn check_square(a: &CMatrix) -> Result<usize> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(Error::Empty);
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(rows)
}

/// One-sided Jacobi iteration on the columns of `a`. Returns `a·V` (columns
/// mutually orthogonal) and the accumulated unitary `V`.
fn jacobi_orthogonalise(a: &CMatrix, with_v: bool) -> Result<(CMatrix, Option<CMatrix>)> {
    let n = a.ncols();
    let mut g = a.clone();
    let mut v = with_v.then(|| CMatrix::identity(n, n));
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = g.column(i).norm_squared();
                let beta = g.column(j).norm_squared();
                let gamma = g.column(i).dotc(&g.column(j));
                let mag = gamma.norm();
                if mag <= JACOBI_EPS * (alpha * beta).sqrt() || mag == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / mag;
                let zeta = (beta - alpha) / (2.0 * mag);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_columns(&mut g, i, j, phase, cs, sn);
                if let Some(v) = v.as_mut() {
                    rotate_columns(v, i, j, phase, cs, sn);
                }
            }
        }
        if !rotated {
            return Ok((g, v));
        }
    }
    Err(Error::NotConverged("svd"))
}

/// `(x, y) ← (c·x − s·e^{−iφ}y, s·x + c·e^{−iφ}y)`
fn rotate_columns(m: &mut CMatrix, i: usize, j: usize, phase: C64, cs: f64, sn: f64) {
    let unphase = phase.conj();
    for r in 0..m.nrows() {
        let x = m[(r, i)];
        let y = m[(r, j)] * unphase;
        m[(r, i)] = x * cs - y * sn;
        m[(r, j)] = x * sn + y * cs;
    }
}

pub fn svd(a: &CMatrix) -> Result<Svd> {
    check_square(a)?;
    let (g, v) = jacobi_orthogonalise(a, true)?;
    let v = v.expect("requested");
    let n = a.ncols();
    let norms: Vec<f64> = (0..n).map(|k| g.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let scale = norms.iter().cloned().fold(0.0, f64::max);
    let cutoff = scale * 1e-13 + f64::MIN_POSITIVE;

    let mut left = CMatrix::zeros(n, n);
    let mut filled = 0;
    for (k, &i) in order.iter().enumerate() {
        if norms[i] > cutoff {
            left.set_column(k, &(g.column(i) / real(norms[i])));
            filled += 1;
        }
    }
    // Columns for (numerically) zero singular values complete the basis.
    let mut candidate = 0;
    for k in filled..n {
        loop {
            let mut e = CVector::zeros(n);
            e[candidate % n] = real(1.0);
            candidate += 1;
            for _ in 0..2 {
                for q in 0..k {
                    let proj = left.column(q).dotc(&e);
                    e -= left.column(q) * proj;
                }
            }
            let norm = e.norm();
            if norm > 1e-6 {
                left.set_column(k, &(e / real(norm)));
                break;
            }
            if candidate > 2 * n {
                return Err(Error::NotConverged("svd"));
            }
        }
    }
    let right = CMatrix::from_fn(n, n, |r, k| v[(r, order[k])]);
    let singular_values = order.iter().map(|&i| norms[i]).collect();
    Ok(Svd {
        left,
        singular_values,
        right,
    })
}

pub fn eig_hermitian(h: &CMatrix) -> Result<HermitianEig> {
    check_square(h)?;
    let residual = hermiticity_residual(h);
    if residual > HERMITIAN_TOL {
        return Err(Error::NotHermitian { residual });
    }
    let n = h.nrows();
    let sym = (h + h.adjoint()) * real(0.5);
    // Right singular vectors of the positive definite shift H + cI are
    // eigenvectors of H; Jacobi keeps them accurate to working precision.
    let shift = sym.norm() + 1.0;
    let shifted = &sym + CMatrix::identity(n, n) * real(shift);
    let (_, vecs) = jacobi_orthogonalise(&shifted, true)?;
    let vecs = vecs.expect("requested");
    let rayleigh: Vec<f64> = (0..n)
        .map(|k| {
            let v = vecs.column(k);
            v.dotc(&(&sym * v)).re
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| rayleigh[i].partial_cmp(&rayleigh[j]).unwrap());
    Ok(HermitianEig {
        eigenvalues: order.iter().map(|&i| rayleigh[i]).collect(),
        eigenvectors: CMatrix::from_fn(n, n, |r, k| vecs[(r, order[k])]),
    })
}

/// Principal square root of a positive semidefinite matrix.
pub fn sqrt_psd(p: &CMatrix) -> Result<CMatrix> {
    let eig = eig_hermitian(p)?;
    if let Some(&min) = eig.eigenvalues.first() {
        if min < -PSD_CLAMP_TOL {
            return Err(Error::NotPsd { eigenvalue: min });
        }
    }
    let root = eig.map(|l| real(l.max(0.0).sqrt()));
    Ok((&root + root.adjoint()) * real(0.5))
}

/// Largest singular value.
pub fn op_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let a = if a.nrows() < a.ncols() { a.adjoint() } else { a.clone() };
    match jacobi_orthogonalise(&a, false) {
        Ok((g, _)) => (0..g.ncols()).map(|k| g.column(k).norm()).fold(0.0, f64::max),
        // Frobenius norm is a valid upper bound if the iteration stalls.
        Err(_) => a.norm(),
    }
}

pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let n = u.ncols();
    op_norm(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

pub fn hermiticity_residual(h: &CMatrix) -> f64 {
    op_norm(&(h - h.adjoint()))
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&v| real(v)),
    ))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `⟨ψ|M|ψ⟩`
pub fn expectation(psi: &CVector, m: &CMatrix) -> C64 {
    psi.dotc(&(m * psi))
}

/// `⟨φ|M|ψ⟩`
pub fn matrix_element(phi: &CVector, m: &CMatrix, psi: &CVector) -> C64 {
    phi.dotc(&(m * psi))
}

pub fn pauli_i() -> CMatrix {
    CMatrix::identity(2, 2)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[real(0.0), c(0.0, -1.0), c(0.0, 1.0), real(0.0)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)])
}

pub fn hadamard() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(2, 2, &[real(h), real(h), real(h), real(-h)])
}

/// Computational basis vector `|index⟩` in dimension `dim`.
pub fn basis_state(dim: usize, index: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[index] = real(1.0);
    v
}

pub fn normalized(v: CVector) -> CVector {
    let n = v.norm();
    v / real(n)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex normal draw, `E|z|² = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `(G + G†)/2` with `G` i.i.d. standard complex normal.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| complex_normal(rng));
    (&g + g.adjoint()) * real(0.5)
}

/// `exp(-i H)` for a random Hermitian `H`.
pub fn random_unitary_from<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let h = random_hermitian(dim, rng);
    let eig = eig_hermitian(&h).expect("symmetrised matrix is Hermitian");
    eig.map(|l| C64::from_polar(1.0, -l))
}

pub fn random_unitary(dim: usize, seed: u64) -> Result<CMatrix> {
    if dim == 0 {
        return Err(Error::Empty);
    }
    Ok(random_unitary_from(dim, &mut seeded_rng(seed)))
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal divided out.
pub fn random_haar_unitary(dim: usize, seed: u64) -> Result<CMatrix> {
    if dim == 0 {
        return Err(Error::Empty);
    }
    let mut rng = seeded_rng(seed);
    let g = CMatrix::from_fn(dim, dim, |_, _| complex_normal(&mut rng));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let phases = CVector::from_iterator(
        dim,
        (0..dim).map(|i| {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                real(1.0)
            }
        }),
    );
    Ok(q * CMatrix::from_diagonal(&phases))
}

/// `U diag(σ) V†` with independent random `U` and `V`.
pub fn random_contraction_with_spectrum(sigma: &[f64], seed: u64) -> Result<CMatrix> {
    if sigma.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(bad) = sigma.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::InvalidParameter(format!(
            "singular value {bad} outside [0, 1]"
        )));
    }
    let mut rng = seeded_rng(seed);
    let u = random_unitary_from(sigma.len(), &mut rng);
    let v = random_unitary_from(sigma.len(), &mut rng);
    Ok(u * diag_real(sigma) * v.adjoint())
}

/// JSON representation of complex matrices: nested rows of `[re, im]` pairs.
pub mod matrix_json {
    use super::{CMatrix, C64};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_nested(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows())
            .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
            .collect()
    }

    pub fn from_nested(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix, String> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix rows".into());
        }
        Ok(CMatrix::from_fn(nrows, ncols, |r, c| {
            C64::new(rows[r][c][0], rows[r][c][1])
        }))
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        to_nested(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_nested(&rows).map_err(D::Error::custom)
    }

    pub mod list {
        use super::*;

        pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
            ms.iter().map(to_nested).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMatrix>, D::Error> {
            let all = Vec::<Vec<Vec<[f64; 2]>>>::deserialize(d)?;
            all.iter()
                .map(|m| from_nested(m).map_err(D::Error::custom))
                .collect()
        }
    }
}
