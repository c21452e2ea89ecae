//! One-qubit time-optimal (brachistochrone) evolution in Bloch form.
//!
//! For a single qubit the state, costate, Hamiltonian and Lindblad operators
//! reduce to 3-vectors: `rho = (1 + r.sigma)/2`, `sigma' = s.sigma`,
//! `H = h.sigma`, `L_a = l_a.sigma` with complex `l_a`. The master and
//! adjoint equations become
//!
//! ```text
//! r_dot = 2 [ h x r + sum_a( Re((l_a.r) l_a*) - |l_a|^2 r + Re(i l_a x l_a*) ) ]
//! s_dot = 2 [ h x s - sum_a( Re((l_a.s) l_a*) - |l_a|^2 s ) ]
//! ```
//!
//! The optimality conditions fix the controls algebraically at each instant:
//! the optimal Lindblad vectors are the eigenvectors of the Hermitian matrix
//! `K_jk = r_j s_k + r_k s_j - 2i sum_l eps_jkl s_l` (taken in descending
//! eigenvalue order and scaled to `|l_a| = gamma_a`), and the optimal
//! Hamiltonian is `h = ± omega (r x s)/|r x s|`, which makes `r x s` a
//! constant of motion. [`integrate`] propagates the coupled system with a
//! fixed-step 4th-order Runge-Kutta scheme, re-solving the eigenproblem at
//! every stage; [`shoot`] wraps it in a one-parameter boundary-value search
//! over the initial angle between `r` and `s`.

use crate::lindblad::LindbladError;
use crate::qalg::{hermitian_eig, pauli_dot, pauli_dot_complex, paulis, ComplexMatrix, QalgError};
use crate::lindblad::{CostateOperator, DensityOperator};
use num_complex::Complex64;
use thiserror::Error;

/// A real 3-vector.
pub type Vec3 = [f64; 3];
/// A complex 3-vector.
pub type CVec3 = [Complex64; 3];

/// Dot product of real 3-vectors.
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Cross product of real 3-vectors.
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Euclidean norm of a real 3-vector.
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean distance between real 3-vectors.
pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    norm(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

fn scale3(a: &Vec3, f: f64) -> Vec3 {
    [a[0] * f, a[1] * f, a[2] * f]
}

fn add3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cnorm(l: &CVec3) -> f64 {
    (l[0].norm_sqr() + l[1].norm_sqr() + l[2].norm_sqr()).sqrt()
}

fn ccross(a: &CVec3, b: &CVec3) -> CVec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Default target state for trajectory diagnostics: the south pole.
pub const DEFAULT_TARGET: Vec3 = [0.0, 0.0, -1.0];

/// Degeneracy threshold on `|r x s|` below which the Hamiltonian switches to
/// its fixed-axis branch.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// Errors produced by the brachistochrone layer.
#[derive(Debug, Error)]
pub enum BrachError {
    #[error(transparent)]
    Qalg(#[from] QalgError),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error("Bloch vector norm {norm} exceeds 1 (tolerance 1e-9)")]
    BlochNormExceeded { norm: f64 },
    #[error("vector has non-finite components")]
    NonFinite,
    #[error("|l| = {norm:.6e} does not match gamma = {gamma:.6e} within 1e-10")]
    GammaMismatch { norm: f64, gamma: f64 },
    #[error("K matrix is not Hermitian within 1e-12 (deviation {deviation:.3e})")]
    NotHermitianK { deviation: f64 },
    #[error("density operator must be one-qubit (dim 2), got dim {0}")]
    NotOneQubit(usize),
    #[error("omega must be > 0 (got {0})")]
    NonpositiveOmega(f64),
    #[error("gammas must be >= 0 (got {0:?})")]
    NegativeGammas([f64; 3]),
    #[error("sign must be +1 or -1 (got {0})")]
    BadSign(f64),
    #[error("degenerate_axis must be a unit vector within 1e-12 (norm {0})")]
    NonUnitAxis(f64),
    #[error("dt must be > 0 (got {0})")]
    NonpositiveDt(f64),
    #[error("need dt < t_max (dt = {dt}, t_max = {t_max})")]
    BadTimeSpan { dt: f64, t_max: f64 },
    #[error("conservation breached at t = {t:.6}: ||r x s - (r x s)(0)|| = {drift:.6e} > {tol:.1e}")]
    ConservationBreach { t: f64, drift: f64, tol: f64 },
    #[error("Bloch norm breached at t = {t:.6}: |r| = {norm:.12} > 1 + 1e-6")]
    BlochNormBreach { t: f64, norm: f64 },
    #[error("eigenvector residual {residual:.3e} exceeds 1e-10 at t = {t:.6}")]
    EigenResidual { t: f64, residual: f64 },
    #[error("both gammas vanish; the parallel-case solution is undefined")]
    BothGammasZero,
    #[error("shooting requires a nonzero initial Bloch vector")]
    ZeroShootOrigin,
    #[error("target leaves the shooting plane by {deviation:.3e} (tolerance 1e-9)")]
    NonPlanarTarget { deviation: f64 },
    #[error("invalid angle bracket ({lo}, {hi})")]
    BadBracket { lo: f64, hi: f64 },
}

fn check_finite3(v: &Vec3) -> Result<(), BrachError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(BrachError::NonFinite)
    }
}

/// A one-qubit state as a Bloch vector, `|r| <= 1` up to rounding slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    r: Vec3,
}

impl BlochState {
    pub fn new(r: Vec3) -> Result<Self, BrachError> {
        check_finite3(&r)?;
        let n = norm(&r);
        if n > 1.0 + 1e-9 {
            return Err(BrachError::BlochNormExceeded { norm: n });
        }
        Ok(Self { r })
    }

    pub fn r(&self) -> Vec3 {
        self.r
    }

    pub fn norm(&self) -> f64 {
        norm(&self.r)
    }
}

/// The costate 3-vector `s` with `sigma' = s.sigma`. Its magnitude is a free
/// normalization (it rescales the Lagrange multiplier `lambda_0` and drops
/// out of the optimal controls), so only finiteness is required.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostateVector {
    s: Vec3,
}

impl CostateVector {
    pub fn new(s: Vec3) -> Result<Self, BrachError> {
        check_finite3(&s)?;
        Ok(Self { s })
    }

    pub fn s(&self) -> Vec3 {
        self.s
    }

    /// The operator `sigma' = s.sigma`.
    pub fn to_operator(&self) -> CostateOperator {
        CostateOperator::new(pauli_dot(self.s)).expect("s.sigma is Hermitian traceless")
    }

    /// Reads `s` back from a traceless Hermitian operator.
    pub fn from_operator(op: &CostateOperator) -> Result<Self, BrachError> {
        if op.dim() != 2 {
            return Err(BrachError::NotOneQubit(op.dim()));
        }
        let m = op.matrix();
        let mut s = [0.0; 3];
        for (j, sigma) in paulis().iter().enumerate() {
            s[j] = m.matmul(sigma).trace().re / 2.0;
        }
        Self::new(s)
    }
}

/// A Lindblad operator in vector form, `L_a = l_a.sigma`, with `|l_a| = gamma_a`.
#[derive(Debug, Clone, Copy)]
pub struct LindbladVector {
    l: CVec3,
    gamma: f64,
}

impl LindbladVector {
    pub fn new(l: CVec3, gamma: f64) -> Result<Self, BrachError> {
        let n = cnorm(&l);
        if (n - gamma).abs() > 1e-10 {
            return Err(BrachError::GammaMismatch { norm: n, gamma });
        }
        Ok(Self { l, gamma })
    }

    pub fn l(&self) -> CVec3 {
        self.l
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The operator `l.sigma`.
    pub fn to_operator(&self) -> ComplexMatrix {
        pauli_dot_complex(self.l)
    }
}

/// The Hermitian 3x3 matrix whose eigenvectors are the optimal Lindblad
/// vectors: `K_jk = r_j s_k + r_k s_j - 2i sum_l eps_jkl s_l`.
#[derive(Debug, Clone)]
pub struct KMatrix {
    entries: ComplexMatrix,
}

impl KMatrix {
    pub fn new(entries: ComplexMatrix) -> Result<Self, BrachError> {
        let deviation = entries.hermiticity_deviation();
        if entries.dim() != 3 {
            return Err(BrachError::NotOneQubit(entries.dim()));
        }
        if deviation > 1e-12 {
            return Err(BrachError::NotHermitianK { deviation });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &ComplexMatrix {
        &self.entries
    }
}

/// The co-moving orthonormal frame in which `r` and `s` open symmetrically
/// about `e3`: `r = |r| (cos(theta/2) e3 + sin(theta/2) e1)` and
/// `s = |s| (cos(theta/2) e3 - sin(theta/2) e1)`, with `theta` the angle
/// between `r` and `s` and `e2 = e3 x e1`.
#[derive(Debug, Clone, Copy)]
pub struct FrameBasis {
    pub e1: Vec3,
    pub e2: Vec3,
    pub e3: Vec3,
    pub theta: f64,
}

impl FrameBasis {
    /// Builds the frame from `(r, s)`. Degenerate directions (zero vectors,
    /// exactly parallel or anti-parallel pairs) fall back deterministically
    /// to the canonical axes.
    pub fn from_vectors(r: &Vec3, s: &Vec3) -> Result<Self, BrachError> {
        check_finite3(r)?;
        check_finite3(s)?;
        let rn = norm(r);
        let sn = norm(s);
        let r_hat = if rn > 1e-12 { scale3(r, 1.0 / rn) } else { [0.0, 0.0, 1.0] };
        let s_hat = if sn > 1e-12 { scale3(s, 1.0 / sn) } else { r_hat };
        let cos_theta = dot(&r_hat, &s_hat).clamp(-1.0, 1.0);
        let theta = cos_theta.acos();

        let bisector = add3(&r_hat, &s_hat);
        let split = sub3(&r_hat, &s_hat);
        let (e3, e1) = if norm(&bisector) > 1e-8 && norm(&split) > 1e-8 {
            (
                scale3(&bisector, 1.0 / norm(&bisector)),
                scale3(&split, 1.0 / norm(&split)),
            )
        } else if norm(&bisector) > 1e-8 {
            // theta = 0: e3 along the common direction, e1 any perpendicular.
            let e3 = scale3(&bisector, 1.0 / norm(&bisector));
            (e3, perpendicular_to(&e3))
        } else {
            // theta = pi: e1 along r, e3 any perpendicular.
            let e1 = r_hat;
            (perpendicular_to(&e1), e1)
        };
        let e2 = cross(&e3, &e1);
        Ok(Self { e1, e2, e3, theta })
    }
}

/// A deterministic unit vector perpendicular to `v` (|v| = 1).
fn perpendicular_to(v: &Vec3) -> Vec3 {
    // Cross with the coordinate axis least aligned with v.
    let axis = if v[0].abs() <= v[1].abs() && v[0].abs() <= v[2].abs() {
        [1.0, 0.0, 0.0]
    } else if v[1].abs() <= v[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let p = cross(v, &axis);
    scale3(&p, 1.0 / norm(&p))
}

/// Configuration for a brachistochrone integration run.
#[derive(Debug, Clone, Copy)]
pub struct BrachConfig {
    /// Hamiltonian strength `omega > 0` (`Tr H^2 = 2 omega^2`, i.e. `|h| = omega`).
    pub omega: f64,
    /// Strengths `(gamma_+, gamma_0, gamma_-)` assigned to the K-matrix
    /// eigenbranches in descending eigenvalue order.
    pub gammas: [f64; 3],
    /// Branch sign of the optimal Hamiltonian `h = sign * omega (r x s)/|r x s|`.
    pub sign: f64,
    /// Hamiltonian direction used when `|r x s|` is below the degeneracy
    /// threshold.
    pub degenerate_axis: Vec3,
    /// Fixed integration step.
    pub dt: f64,
    /// Integration horizon; the run records `floor(t_max/dt) + 1` samples.
    pub t_max: f64,
    /// Abort threshold on the drift of the conserved vector `r x s`.
    pub conservation_tol: f64,
}

impl Default for BrachConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            gammas: [1.0, 0.0, 0.0],
            sign: 1.0,
            degenerate_axis: [0.0, 0.0, 1.0],
            dt: 1e-3,
            t_max: 5.0,
            conservation_tol: 1e-6,
        }
    }
}

impl BrachConfig {
    /// Checks the field invariants (`omega > 0`, `gammas >= 0`, `sign = ±1`,
    /// unit axis, `0 < dt < t_max` unless `t_max = 0`).
    pub fn validate(&self) -> Result<(), BrachError> {
        if !(self.omega > 0.0) {
            return Err(BrachError::NonpositiveOmega(self.omega));
        }
        if self.gammas.iter().any(|&g| !(g >= 0.0)) {
            return Err(BrachError::NegativeGammas(self.gammas));
        }
        if self.sign != 1.0 && self.sign != -1.0 {
            return Err(BrachError::BadSign(self.sign));
        }
        let axis_norm = norm(&self.degenerate_axis);
        if (axis_norm - 1.0).abs() > 1e-12 {
            return Err(BrachError::NonUnitAxis(axis_norm));
        }
        if !(self.dt > 0.0) {
            return Err(BrachError::NonpositiveDt(self.dt));
        }
        if self.t_max != 0.0 && !(self.dt < self.t_max) {
            return Err(BrachError::BadTimeSpan {
                dt: self.dt,
                t_max: self.t_max,
            });
        }
        Ok(())
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub r: Vec3,
    pub s: Vec3,
    pub h: Vec3,
    pub ls: [LindbladVector; 3],
    /// `Tr rho^2 = (1 + |r|^2)/2`.
    pub purity: f64,
    /// The conserved vector `r x s`.
    pub conserved: Vec3,
    /// Uhlmann fidelity between `rho(r)` and the target state.
    pub fidelity: f64,
}

/// A completed integration run: uniformly spaced samples plus diagnostics.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub samples: Vec<TrajectorySample>,
    pub dt: f64,
    /// Target Bloch vector the per-sample fidelity refers to.
    pub target: Vec3,
    /// Times at which a K-eigenbranch identity swap was detected (the
    /// continuity overlap between consecutive steps dropped below 1/sqrt(2)).
    pub crossing_times: Vec<f64>,
    /// Smallest gap between adjacent (descending) K eigenvalues seen on the run.
    pub min_eigen_gap: f64,
    /// Largest `||r x s - (r x s)(0)||` seen on the run.
    pub max_drift: f64,
}

impl TrajectoryRecord {
    pub fn final_sample(&self) -> &TrajectorySample {
        self.samples.last().expect("record has at least one sample")
    }

    /// Distance of the final Bloch vector to `target`.
    pub fn final_distance(&self, target: &Vec3) -> f64 {
        distance(&self.final_sample().r, target)
    }
}

/// Uhlmann fidelity between two one-qubit states given as Bloch vectors:
/// `F = [1 + a.b + sqrt((1-|a|^2)(1-|b|^2))]/2`.
pub fn bloch_fidelity(a: &Vec3, b: &Vec3) -> f64 {
    let pa = (1.0 - dot(a, a)).max(0.0);
    let pb = (1.0 - dot(b, b)).max(0.0);
    ((1.0 + dot(a, b) + (pa * pb).sqrt()) / 2.0).clamp(0.0, 1.0)
}

/// Reads the Bloch vector of a one-qubit density operator, `r_j = Tr(rho sigma_j)`.
pub fn bloch_from_density(rho: &DensityOperator) -> Result<BlochState, BrachError> {
    if rho.dim() != 2 {
        return Err(BrachError::NotOneQubit(rho.dim()));
    }
    let mut r = [0.0; 3];
    for (j, sigma) in paulis().iter().enumerate() {
        r[j] = rho.matrix().matmul(sigma).trace().re;
    }
    BlochState::new(r)
}

/// Builds the density operator `rho = (1 + r.sigma)/2`.
pub fn density_from_bloch(state: &BlochState) -> Result<DensityOperator, BrachError> {
    let m = &(&ComplexMatrix::identity(2) + &pauli_dot(state.r())).scale_re(0.5);
    Ok(DensityOperator::new(m.clone())?)
}

/// The master equation in Bloch form:
/// `r_dot = 2 [ h x r + sum_a( Re((l_a.r) l_a*) - |l_a|^2 r + Re(i l_a x l_a*) ) ]`.
pub fn master_rhs_vec(r: &Vec3, h: &Vec3, ls: &[LindbladVector]) -> Vec3 {
    let mut out = cross(h, r);
    for lv in ls {
        let l = lv.l;
        let lc = [l[0].conj(), l[1].conj(), l[2].conj()];
        // (l . r) with real r
        let lr = l[0] * r[0] + l[1] * r[1] + l[2] * r[2];
        let norm_sq = cnorm(&l).powi(2);
        let pump = ccross(&l, &lc);
        for j in 0..3 {
            out[j] += (lr * lc[j]).re - norm_sq * r[j]
                + (Complex64::new(0.0, 1.0) * pump[j]).re;
        }
    }
    scale3(&out, 2.0)
}

/// The adjoint (costate) equation in Bloch form:
/// `s_dot = 2 [ h x s - sum_a( Re((l_a.s) l_a*) - |l_a|^2 s ) ]`.
pub fn adjoint_rhs_vec(s: &Vec3, h: &Vec3, ls: &[LindbladVector]) -> Vec3 {
    let mut out = cross(h, s);
    for lv in ls {
        let l = lv.l;
        let lc = [l[0].conj(), l[1].conj(), l[2].conj()];
        let lsdot = l[0] * s[0] + l[1] * s[1] + l[2] * s[2];
        let norm_sq = cnorm(&l).powi(2);
        for j in 0..3 {
            out[j] -= (lsdot * lc[j]).re - norm_sq * s[j];
        }
    }
    scale3(&out, 2.0)
}

/// Builds `K_jk = r_j s_k + r_k s_j - 2i sum_l eps_jkl s_l`.
pub fn k_matrix(r: &Vec3, s: &Vec3) -> KMatrix {
    const EPS: [[[f64; 3]; 3]; 3] = {
        let mut e = [[[0.0; 3]; 3]; 3];
        e[0][1][2] = 1.0;
        e[1][2][0] = 1.0;
        e[2][0][1] = 1.0;
        e[0][2][1] = -1.0;
        e[2][1][0] = -1.0;
        e[1][0][2] = -1.0;
        e
    };
    let mut m = ComplexMatrix::zeros(3);
    for j in 0..3 {
        for k in 0..3 {
            let mut eps_term = 0.0;
            for l in 0..3 {
                eps_term += EPS[j][k][l] * s[l];
            }
            m[(j, k)] = Complex64::new(r[j] * s[k] + r[k] * s[j], -2.0 * eps_term);
        }
    }
    KMatrix::new(m).expect("K is Hermitian by construction")
}

/// Unit eigenvectors of `K` in descending eigenvalue order, with phases
/// aligned for continuity against `prev` when given.
#[derive(Debug, Clone)]
pub struct KEigenBasis {
    pub units: [CVec3; 3],
    pub eigenvalues: [f64; 3],
}

/// Diagonalizes `K`, returning descending-order unit eigenvectors. When
/// `prev` is given, each vector's phase is rotated to maximize the real part
/// of its overlap with the corresponding previous vector; otherwise the
/// canonical phase (first significant component real positive) is kept.
pub fn k_eigenbasis(k: &KMatrix, prev: Option<&[CVec3; 3]>) -> Result<KEigenBasis, BrachError> {
    let eig = hermitian_eig(k.entries())?;
    let mut units = [[Complex64::new(0.0, 0.0); 3]; 3];
    let mut eigenvalues = [0.0; 3];
    for a in 0..3 {
        eigenvalues[a] = eig.eigenvalues[a];
        for i in 0..3 {
            units[a][i] = eig.eigenvectors[(i, a)];
        }
        if let Some(prev_units) = prev {
            let p = &prev_units[a];
            let overlap: Complex64 = (0..3).map(|i| p[i].conj() * units[a][i]).sum();
            let mag = overlap.norm();
            if mag > 1e-8 {
                let phase = overlap.conj() / mag;
                for i in 0..3 {
                    units[a][i] *= phase;
                }
            }
        }
    }
    Ok(KEigenBasis { units, eigenvalues })
}

/// The optimal Lindblad vectors: eigenvectors of `K` in descending
/// eigenvalue order, scaled to `|l_a| = gamma_a`, phase-aligned with `prev`
/// for continuity when given.
pub fn lindblad_vectors(
    k: &KMatrix,
    gammas: &[f64; 3],
    prev: Option<&[LindbladVector; 3]>,
) -> Result<[LindbladVector; 3], BrachError> {
    let prev_units = prev.map(|vs| {
        let mut units = [[Complex64::new(0.0, 0.0); 3]; 3];
        for (a, v) in vs.iter().enumerate() {
            let n = cnorm(&v.l);
            if n > 1e-12 {
                for i in 0..3 {
                    units[a][i] = v.l[i] / n;
                }
            }
        }
        units
    });
    let basis = k_eigenbasis(k, prev_units.as_ref())?;
    Ok(scale_basis(&basis, gammas))
}

fn scale_basis(basis: &KEigenBasis, gammas: &[f64; 3]) -> [LindbladVector; 3] {
    let mut out = [LindbladVector {
        l: [Complex64::new(0.0, 0.0); 3],
        gamma: 0.0,
    }; 3];
    for a in 0..3 {
        let mut l = basis.units[a];
        for c in &mut l {
            *c *= Complex64::new(gammas[a], 0.0);
        }
        out[a] = LindbladVector {
            l,
            gamma: gammas[a],
        };
    }
    out
}

/// The optimal Hamiltonian vector: `h = sign * omega (r x s)/|r x s|`, or
/// `omega * degenerate_axis` when `|r x s|` is below the degeneracy threshold.
/// `|h| = omega` always.
pub fn hamiltonian_vec(r: &Vec3, s: &Vec3, cfg: &BrachConfig) -> Vec3 {
    let c = cross(r, s);
    let n = norm(&c);
    if n < DEGENERACY_THRESHOLD {
        scale3(&cfg.degenerate_axis, cfg.omega)
    } else {
        scale3(&c, cfg.sign * cfg.omega / n)
    }
}

struct StageEval {
    r_dot: Vec3,
    s_dot: Vec3,
}

fn stage_rhs(
    r: &Vec3,
    s: &Vec3,
    cfg: &BrachConfig,
    prev_units: Option<&[CVec3; 3]>,
) -> Result<(StageEval, KEigenBasis, Vec3), BrachError> {
    let h = hamiltonian_vec(r, s, cfg);
    let k = k_matrix(r, s);
    let basis = k_eigenbasis(&k, prev_units)?;
    let ls = scale_basis(&basis, &cfg.gammas);
    Ok((
        StageEval {
            r_dot: master_rhs_vec(r, &h, &ls),
            s_dot: adjoint_rhs_vec(s, &h, &ls),
        },
        basis,
        h,
    ))
}

/// Integrates the coupled state/costate system from `(r0, s0)` over
/// `[0, t_max]` with fixed-step RK4, recording every step. The optimal
/// controls are recomputed from the instantaneous `(r, s)` at every RK4
/// stage. Aborts with an error if the conserved vector `r x s` drifts by
/// more than `cfg.conservation_tol` or if `|r|` exceeds `1 + 1e-6`.
/// Per-sample fidelities refer to [`DEFAULT_TARGET`].
pub fn integrate(
    cfg: &BrachConfig,
    r0: &BlochState,
    s0: &CostateVector,
) -> Result<TrajectoryRecord, BrachError> {
    integrate_with_target(cfg, r0, s0, DEFAULT_TARGET)
}

/// [`integrate`] with an explicit fidelity target.
pub fn integrate_with_target(
    cfg: &BrachConfig,
    r0: &BlochState,
    s0: &CostateVector,
    target: Vec3,
) -> Result<TrajectoryRecord, BrachError> {
    cfg.validate()?;
    let steps = (cfg.t_max / cfg.dt + 1e-9).floor() as usize;
    let mut r = r0.r();
    let mut s = s0.s();
    let conserved0 = cross(&r, &s);

    let mut samples = Vec::with_capacity(steps + 1);
    let mut crossing_times = Vec::new();
    let mut min_eigen_gap = f64::INFINITY;
    let mut max_drift: f64 = 0.0;
    let mut prev_units: Option<[CVec3; 3]> = None;

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let (_, basis, h) = stage_rhs(&r, &s, cfg, prev_units.as_ref())?;

        // Diagnostics at the accepted point.
        let k_mat = k_matrix(&r, &s);
        for a in 0..3 {
            let residual = eigen_residual(&k_mat, &basis.units[a], basis.eigenvalues[a]);
            if residual > 1e-10 {
                return Err(BrachError::EigenResidual { t, residual });
            }
        }
        for a in 0..2 {
            min_eigen_gap =
                min_eigen_gap.min(basis.eigenvalues[a] - basis.eigenvalues[a + 1]);
        }
        if let Some(prev) = &prev_units {
            for a in 0..3 {
                let overlap: Complex64 =
                    (0..3).map(|i| prev[a][i].conj() * basis.units[a][i]).sum();
                if overlap.norm_sqr() < 0.5 {
                    crossing_times.push(t);
                    break;
                }
            }
        }

        let conserved = cross(&r, &s);
        let drift = distance(&conserved, &conserved0);
        max_drift = max_drift.max(drift);
        if drift > cfg.conservation_tol {
            return Err(BrachError::ConservationBreach {
                t,
                drift,
                tol: cfg.conservation_tol,
            });
        }
        let r_norm = norm(&r);
        if r_norm > 1.0 + 1e-6 {
            return Err(BrachError::BlochNormBreach { t, norm: r_norm });
        }

        samples.push(TrajectorySample {
            t,
            r,
            s,
            h,
            ls: scale_basis(&basis, &cfg.gammas),
            purity: (1.0 + dot(&r, &r)) / 2.0,
            conserved,
            fidelity: bloch_fidelity(&r, &target),
        });
        prev_units = Some(basis.units);

        if k == steps {
            break;
        }

        // Classical RK4 step; controls recomputed at every stage.
        let dt = cfg.dt;
        let ref_units = prev_units.as_ref();
        let (k1, _, _) = stage_rhs(&r, &s, cfg, ref_units)?;
        let r2 = add3(&r, &scale3(&k1.r_dot, dt / 2.0));
        let s2 = add3(&s, &scale3(&k1.s_dot, dt / 2.0));
        let (k2, _, _) = stage_rhs(&r2, &s2, cfg, ref_units)?;
        let r3 = add3(&r, &scale3(&k2.r_dot, dt / 2.0));
        let s3 = add3(&s, &scale3(&k2.s_dot, dt / 2.0));
        let (k3, _, _) = stage_rhs(&r3, &s3, cfg, ref_units)?;
        let r4 = add3(&r, &scale3(&k3.r_dot, dt));
        let s4 = add3(&s, &scale3(&k3.s_dot, dt));
        let (k4, _, _) = stage_rhs(&r4, &s4, cfg, ref_units)?;

        for j in 0..3 {
            r[j] += dt / 6.0
                * (k1.r_dot[j] + 2.0 * k2.r_dot[j] + 2.0 * k3.r_dot[j] + k4.r_dot[j]);
            s[j] += dt / 6.0
                * (k1.s_dot[j] + 2.0 * k2.s_dot[j] + 2.0 * k3.s_dot[j] + k4.s_dot[j]);
        }
    }

    Ok(TrajectoryRecord {
        samples,
        dt: cfg.dt,
        target,
        crossing_times,
        min_eigen_gap,
        max_drift,
    })
}

fn eigen_residual(k: &KMatrix, unit: &CVec3, nu: f64) -> f64 {
    let m = k.entries();
    let mut sum = 0.0;
    for i in 0..3 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..3 {
            acc += m[(i, j)] * unit[j];
        }
        sum += (acc - nu * unit[i]).norm_sqr();
    }
    sum.sqrt()
}

/// Closed-form solution of the collinear (`r x s = 0`) case on the symmetry
/// axis: with strengths `(gamma_top, gamma_bottom)` on the highest and lowest
/// K-eigenbranches,
///
/// ```text
/// r(t) = A + (r0 - A) exp(-2 (gamma_top^2 + gamma_bottom^2) t),
/// A = (gamma_bottom^2 - gamma_top^2) / (gamma_top^2 + gamma_bottom^2).
/// ```
///
/// With the costate anti-parallel to `r` the top branch is the lowering
/// channel, so `gamma_top = 1, gamma_bottom = 0` drives `r0 = 1` along
/// `-1 + 2 exp(-2t)` toward the south pole.
pub fn parallel_case_solution(t: f64, r0: f64, gammas: (f64, f64)) -> Result<f64, BrachError> {
    let (gt, gb) = gammas;
    let total = gt * gt + gb * gb;
    if total <= 0.0 {
        return Err(BrachError::BothGammasZero);
    }
    let a = (gb * gb - gt * gt) / total;
    Ok(a + (r0 - a) * (-2.0 * total * t).exp())
}

/// The standard costate family for the time-optimal cooling problem: unit
/// costates in the x-z plane at angles `a_k = k pi/6` from the target
/// direction `(0,0,-1)`, i.e. `s0(k) = (sin a_k, 0, -cos a_k)`. `k = 0` is
/// the anti-parallel (collinear) configuration.
pub fn costate_family(count: usize) -> Vec<(f64, CostateVector)> {
    (0..count)
        .map(|k| {
            let a = k as f64 * std::f64::consts::PI / 6.0;
            (
                a,
                CostateVector::new([a.sin(), 0.0, -a.cos()]).expect("finite"),
            )
        })
        .collect()
}

/// Boundary-value wrapper over the one-parameter family of initial costates:
/// golden-section search over the initial angle `theta0` between `r0` and
/// `s0` (in the shooting plane spanned by `r0` and the target, falling back
/// to the x-z plane for collinear geometries), minimizing the final distance
/// to `target` at `t_max`. Returns the best angle and its trajectory.
pub fn shoot(
    cfg: &BrachConfig,
    r0: &BlochState,
    target: &BlochState,
    bracket: (f64, f64),
) -> Result<(f64, TrajectoryRecord), BrachError> {
    cfg.validate()?;
    let (lo, hi) = bracket;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(BrachError::BadBracket { lo, hi });
    }
    let r = r0.r();
    let rn = norm(&r);
    if rn < 1e-12 {
        return Err(BrachError::ZeroShootOrigin);
    }
    let e_par = scale3(&r, 1.0 / rn);

    // Transverse direction: prefer the component of the target out of r0's
    // axis; for collinear target fall back to x (then y), giving the x-z
    // plane for the canonical +z initial state.
    let tv = target.r();
    let mut e_perp = sub3(&tv, &scale3(&e_par, dot(&tv, &e_par)));
    if norm(&e_perp) < 1e-9 {
        e_perp = sub3(&[1.0, 0.0, 0.0], &scale3(&e_par, e_par[0]));
        if norm(&e_perp) < 1e-9 {
            e_perp = sub3(&[0.0, 1.0, 0.0], &scale3(&e_par, e_par[1]));
        }
    }
    let e_perp = scale3(&e_perp, 1.0 / norm(&e_perp));
    let plane_normal = cross(&e_par, &e_perp);
    let out_of_plane = dot(&tv, &plane_normal).abs();
    if out_of_plane > 1e-9 {
        return Err(BrachError::NonPlanarTarget {
            deviation: out_of_plane,
        });
    }

    let s0_at = |theta: f64| -> CostateVector {
        let v = add3(
            &scale3(&e_par, theta.cos()),
            &scale3(&e_perp, theta.sin()),
        );
        CostateVector::new(v).expect("finite")
    };
    let run = |theta: f64| -> Result<(f64, TrajectoryRecord), BrachError> {
        let record = integrate_with_target(cfg, r0, &s0_at(theta), tv)?;
        let d = record.final_distance(&tv);
        Ok((d, record))
    };

    // Degenerate request: no evolution, any angle, distance to r0 itself.
    if cfg.t_max == 0.0 {
        let theta = (lo + hi) / 2.0;
        let (_, record) = run(theta)?;
        return Ok((theta, record));
    }

    // Golden-section search (assumes d(theta) unimodal on the bracket).
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = run(x1)?.0;
    let mut f2 = run(x2)?.0;
    for _ in 0..60 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = run(x1)?.0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = run(x2)?.0;
        }
        if b - a < 1e-10 {
            break;
        }
    }
    let theta = if f1 <= f2 { x1 } else { x2 };
    let (_, record) = run(theta)?;
    Ok((theta, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_precession_conserves_norm() {
        let cfg = BrachConfig {
            gammas: [0.0, 0.0, 0.0],
            t_max: 1.0,
            ..BrachConfig::default()
        };
        let r0 = BlochState::new([0.6, 0.0, 0.4]).unwrap();
        let s0 = CostateVector::new([0.0, 0.0, 1.0]).unwrap();
        let record = integrate(&cfg, &r0, &s0).unwrap();
        for sample in &record.samples {
            assert!((norm(&sample.r) - norm(&[0.6, 0.0, 0.4])).abs() < 1e-9);
        }
    }

    #[test]
    fn k_matrix_theta_zero_pattern() {
        let k = k_matrix(&[0.0, 0.0, 0.8], &[0.0, 0.0, 0.5]);
        let m = k.entries();
        assert!((m[(0, 1)] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((m[(2, 2)] - Complex64::new(0.8, 0.0)).norm() < 1e-14);
    }
}
