//! Dense complex linear algebra for small quantum systems.
//!
//! Everything in this crate works on [`ComplexMatrix`], a square, row-major,
//! dense matrix of `Complex64` entries. Dimensions stay small (a handful of
//! qubits), so the solvers favour determinism and transparency over raw
//! speed: the Hermitian eigensolver is a cyclic complex Jacobi iteration with
//! a fixed sweep order, which makes every result bit-reproducible across runs
//! on the same platform.

use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use thiserror::Error;

/// Errors produced by the linear-algebra layer.
#[derive(Debug, Error)]
pub enum QalgError {
    /// Two operands (or an operand and an expected shape) disagree in dimension.
    #[error("dimension mismatch: {context} ({left} vs {right})")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },
    /// A matrix that must be Hermitian deviates from its adjoint too strongly.
    #[error("matrix is not Hermitian: deviation {deviation:.3e} exceeds tolerance {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },
    /// The Jacobi iteration failed to reduce the off-diagonal norm.
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    /// A bipartite split `dim_a * dim_b` does not match the matrix dimension.
    #[error("invalid bipartite split: {dim_a} x {dim_b} does not factor dimension {dim}")]
    BadFactorization {
        dim_a: usize,
        dim_b: usize,
        dim: usize,
    },
    /// `keep` must select subsystem 0 (left factor) or 1 (right factor).
    #[error("invalid subsystem selector {keep}: must be 0 (left) or 1 (right)")]
    BadSubsystem { keep: usize },
    /// An operation required a nonzero dimension.
    #[error("matrix dimension must be nonzero")]
    ZeroDimension,
}

/// A square complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// The zero matrix of dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    /// The identity matrix of dimension `dim`.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Build from a row-major entry slice; `entries.len()` must be `dim * dim`.
    pub fn from_entries(dim: usize, entries: Vec<Complex64>) -> Result<Self, QalgError> {
        if entries.len() != dim * dim {
            return Err(QalgError::DimensionMismatch {
                context: "entry count vs dim^2",
                left: entries.len(),
                right: dim * dim,
            });
        }
        Ok(Self { dim, entries })
    }

    /// Build from nested rows of `(re, im)` pairs; convenient in tests.
    pub fn from_rows(rows: &[Vec<(f64, f64)>]) -> Result<Self, QalgError> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(QalgError::DimensionMismatch {
                    context: "row length vs dim",
                    left: row.len(),
                    right: dim,
                });
            }
            for &(re, im) in row {
                entries.push(Complex64::new(re, im));
            }
        }
        Ok(Self { dim, entries })
    }

    /// Diagonal matrix with the given real diagonal.
    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Matrix dimension (the matrix is `dim x dim`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Read-only view of the row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// Entrywise complex conjugate (no transpose).
    pub fn conjugate(&self) -> Self {
        let entries = self.entries.iter().map(|z| z.conj()).collect();
        Self {
            dim: self.dim,
            entries,
        }
    }

    /// Scale by a complex scalar.
    pub fn scale(&self, factor: Complex64) -> Self {
        let entries = self.entries.iter().map(|z| z * factor).collect();
        Self {
            dim: self.dim,
            entries,
        }
    }

    /// Scale by a real scalar.
    pub fn scale_re(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// Trace.
    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entrywise absolute difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "max_abs_diff: dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        assert_eq!(
            self.dim, other.dim,
            "frobenius_distance: dimension mismatch"
        );
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Frobenius norm of `self - self†`, i.e. how far the matrix is from Hermitian.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.frobenius_distance(&self.adjoint())
    }

    /// Hermitian part `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_re(0.5)
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul: dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.dim + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "add: dimension mismatch");
        let entries = self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| a + b)
            .collect();
        ComplexMatrix {
            dim: self.dim,
            entries,
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "sub: dimension mismatch");
        let entries = self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| a - b)
            .collect();
        ComplexMatrix {
            dim: self.dim,
            entries,
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Pauli matrix `sigma_x`.
pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        vec![(0.0, 0.0), (1.0, 0.0)],
        vec![(1.0, 0.0), (0.0, 0.0)],
    ])
    .unwrap()
}

/// Pauli matrix `sigma_y`.
pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        vec![(0.0, 0.0), (0.0, -1.0)],
        vec![(0.0, 1.0), (0.0, 0.0)],
    ])
    .unwrap()
}

/// Pauli matrix `sigma_z`.
pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        vec![(1.0, 0.0), (0.0, 0.0)],
        vec![(0.0, 0.0), (-1.0, 0.0)],
    ])
    .unwrap()
}

/// The three Pauli matrices `[sigma_x, sigma_y, sigma_z]`.
pub fn paulis() -> [ComplexMatrix; 3] {
    [pauli_x(), pauli_y(), pauli_z()]
}

/// Real-linear combination `v . sigma = v_x sigma_x + v_y sigma_y + v_z sigma_z`.
pub fn pauli_dot(v: [f64; 3]) -> ComplexMatrix {
    let [sx, sy, sz] = paulis();
    &(&sx.scale_re(v[0]) + &sy.scale_re(v[1])) + &sz.scale_re(v[2])
}

/// Complex-linear combination `v . sigma` for a complex 3-vector `v`.
pub fn pauli_dot_complex(v: [Complex64; 3]) -> ComplexMatrix {
    let [sx, sy, sz] = paulis();
    &(&sx.scale(v[0]) + &sy.scale(v[1])) + &sz.scale(v[2])
}

/// Traceless part `A - (Tr A / N) I`.
pub fn traceless_part(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.dim();
    let shift = m.trace() / n as f64;
    let mut out = m.clone();
    for i in 0..n {
        out[(i, i)] -= shift;
    }
    out
}

/// Commutator `[a, b] = ab - ba`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * b) - &(b * a)
}

/// Anticommutator `{a, b} = ab + ba`.
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * b) + &(b * a)
}

/// Kronecker (tensor) product `a (x) b`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let da = a.dim();
    let db = b.dim();
    let mut out = ComplexMatrix::zeros(da * db);
    for ia in 0..da {
        for ja in 0..da {
            let f = a[(ia, ja)];
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for ib in 0..db {
                for jb in 0..db {
                    out[(ia * db + ib, ja * db + jb)] = f * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Partial trace of a matrix on a bipartite space of dimensions `(dim_a, dim_b)`.
///
/// Basis ordering is the Kronecker convention used by [`tensor_product`]: the
/// composite index is `i_a * dim_b + i_b`. `keep = 0` traces out the right
/// factor and returns a `dim_a x dim_a` matrix; `keep = 1` traces out the left
/// factor and returns `dim_b x dim_b`.
pub fn partial_trace(
    m: &ComplexMatrix,
    dims: (usize, usize),
    keep: usize,
) -> Result<ComplexMatrix, QalgError> {
    let (da, db) = dims;
    if da == 0 || db == 0 {
        return Err(QalgError::ZeroDimension);
    }
    if da * db != m.dim() {
        return Err(QalgError::BadFactorization {
            dim_a: da,
            dim_b: db,
            dim: m.dim(),
        });
    }
    match keep {
        0 => {
            let mut out = ComplexMatrix::zeros(da);
            for i in 0..da {
                for j in 0..da {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..db {
                        acc += m[(i * db + k, j * db + k)];
                    }
                    out[(i, j)] = acc;
                }
            }
            Ok(out)
        }
        1 => {
            let mut out = ComplexMatrix::zeros(db);
            for i in 0..db {
                for j in 0..db {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..da {
                        acc += m[(k * db + i, k * db + j)];
                    }
                    out[(i, j)] = acc;
                }
            }
            Ok(out)
        }
        other => Err(QalgError::BadSubsystem { keep: other }),
    }
}

/// Result of a Hermitian eigendecomposition `A = V diag(lambda) V†`.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as matrix columns, ordered to match
    /// `eigenvalues`. Each column is phase-fixed so that its first
    /// significantly nonzero component is real and positive.
    pub eigenvectors: ComplexMatrix,
    /// Frobenius norm of the anti-Hermitian part removed from the input
    /// before iterating; a diagnostic for how non-Hermitian the input was.
    pub hermiticity_correction: f64,
}

impl HermitianEig {
    /// The `k`-th eigenvector as a column vector of coefficients.
    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        let n = self.eigenvectors.dim();
        (0..n).map(|i| self.eigenvectors[(i, k)]).collect()
    }
}

/// How close to Hermitian an input must be before `hermitian_eig` accepts it.
pub const HERMITICITY_TOL: f64 = 1e-10;

const MAX_JACOBI_SWEEPS: usize = 100;

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// The input must be Hermitian within [`HERMITICITY_TOL`] (Frobenius norm of
/// `A - A†`). The matrix is symmetrized to `(A + A†)/2` before iterating and
/// the size of the discarded anti-Hermitian part is reported in the result.
/// Eigenvalues are returned in descending order and each eigenvector's phase
/// is fixed deterministically, so identical inputs produce identical outputs.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<HermitianEig, QalgError> {
    let n = a.dim();
    if n == 0 {
        return Err(QalgError::ZeroDimension);
    }
    let deviation = a.hermiticity_deviation();
    if deviation > HERMITICITY_TOL {
        return Err(QalgError::NotHermitian {
            deviation,
            tolerance: HERMITICITY_TOL,
        });
    }
    let mut m = a.hermitian_part();
    // Frobenius norm of the anti-Hermitian part (A - A†)/2 that was dropped.
    let correction = deviation / 2.0;

    let mut v = ComplexMatrix::identity(n);
    let scale = m.frobenius_norm().max(1.0);
    let target = 1e-15 * scale;

    let off_norm = |m: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&m) <= target;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_JACOBI_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let b = apq.norm();
                if b <= f64::EPSILON * scale * 1e-3 {
                    continue;
                }
                let phi = apq.arg();
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * b);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Unitary rotation in the (p, q) plane:
                //   R_pp = c, R_pq = s e^{i phi}, R_qp = -s e^{-i phi}, R_qq = c.
                let e_ip = Complex64::from_polar(1.0, phi);
                let e_im = e_ip.conj();

                // m <- R† m R, applied as row then column updates.
                for j in 0..n {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = mpj * c - mqj * (s * e_ip);
                    m[(q, j)] = mpj * (s * e_im) + mqj * c;
                }
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = mip * c - miq * (s * e_im);
                    m[(i, q)] = mip * (s * e_ip) + miq * c;
                }
                // v <- v R accumulates the eigenvector basis.
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c - viq * (s * e_im);
                    v[(i, q)] = vip * (s * e_ip) + viq * c;
                }
                // Clean up rounding so the pivot is exactly annihilated and
                // the diagonal stays real.
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);
                m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);
            }
        }
        sweeps += 1;
        converged = off_norm(&m) <= target;
    }
    if !converged {
        return Err(QalgError::NoConvergence {
            sweeps,
            off_norm: off_norm(&m),
        });
    }

    // Sort eigenpairs by descending eigenvalue. Stable sort keeps the Jacobi
    // output order for degenerate eigenvalues, preserving determinism.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(j, j)]
            .re
            .partial_cmp(&m[(i, i)].re)
            .expect("eigenvalues are finite")
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&k| m[(k, k)].re).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        // Deterministic phase: rotate so the first component with
        // non-negligible modulus is real and positive.
        let mut phase = Complex64::new(1.0, 0.0);
        for i in 0..n {
            let z = v[(i, k)];
            if z.norm() > 1e-12 {
                phase = Complex64::from_polar(1.0, -z.arg());
                break;
            }
        }
        for i in 0..n {
            eigenvectors[(i, col)] = v[(i, k)] * phase;
        }
    }

    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
        hermiticity_correction: correction,
    })
}

/// The unitary `exp(-i H t)` for Hermitian `H`, via eigendecomposition.
pub fn matrix_exp_i(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix, QalgError> {
    let eig = hermitian_eig(h)?;
    let n = h.dim();
    let v = &eig.eigenvectors;
    // U = V diag(e^{-i lambda t}) V†
    let mut phased = ComplexMatrix::zeros(n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lambda * t);
        for i in 0..n {
            phased[(i, k)] = v[(i, k)] * phase;
        }
    }
    Ok(phased.matmul(&v.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_times_identity() {
        let i4 = ComplexMatrix::identity(4);
        assert_eq!((&i4 * &i4).max_abs_diff(&i4), 0.0);
    }

    #[test]
    fn pauli_commutator() {
        let lhs = commutator(&pauli_x(), &pauli_y());
        let rhs = pauli_z().scale(Complex64::new(0.0, 2.0));
        assert!(lhs.max_abs_diff(&rhs) < 1e-15);
    }

    #[test]
    fn jacobi_diagonalizes_pauli_x() {
        let eig = hermitian_eig(&pauli_x()).unwrap();
        assert!((eig.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] + 1.0).abs() < 1e-14);
    }
}
