//! Markovian open-system dynamics: the Lindblad master equation, its
//! Heisenberg-picture adjoint, the gauge freedom of the generator, the SLD
//! monotone metric with its time functional, and the first-order Kraus map
//! associated with a Lindblad generator.
//!
//! The master equation evolves a density operator `rho` as
//!
//! ```text
//! rho_dot = -i [H, rho] + sum_a ( L_a rho L_a† - 1/2 {L_a† L_a, rho} )
//! ```
//!
//! with a traceless Hamiltonian `H` normalized by `Tr H² = N omega²` and
//! traceless, mutually orthogonal Lindblad operators `L_a` with strengths
//! `gamma_a` fixed by `Tr(L_a† L_b) = N gamma_a² delta_ab`. The generator is
//! invariant under a gauge group (scalar shifts of `H` and the `L_a`, and
//! unitary mixing of the `L_a`); [`gauge_apply`] moves around a gauge orbit
//! and [`gauge_fix`] maps any representative back to the canonical slice.
//!
//! Time-optimal (brachistochrone) evolutions couple `rho` to a traceless
//! Hermitian costate `sigma'` evolving under minus the traceless adjoint
//! generator; along an optimal protocol the operator `F = -i[rho, sigma']`
//! satisfies `i F_dot = [H, F]`, which [`brachistochrone_residual`] checks on
//! sampled trajectories.

use crate::qalg::{
    anticommutator, commutator, hermitian_eig, traceless_part, ComplexMatrix, QalgError,
};
use num_complex::Complex64;
use thiserror::Error;

/// Tolerance for Hermiticity of domain objects (Frobenius norm of `A - A†`).
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance for tracelessness and for `Tr rho = 1`.
pub const TRACE_TOL: f64 = 1e-10;
/// Density operators may have eigenvalues this far below zero (rounding slack).
pub const POSITIVITY_FLOOR: f64 = -1e-9;
/// Tolerance for the Hamiltonian normalization `Tr H² = N omega²`.
pub const NORMALIZATION_TOL: f64 = 1e-8;
/// Tolerance for Lindblad-set orthogonality `Tr(L_a† L_b) = N gamma_a² delta_ab`.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;
/// Tolerance for unitarity of a gauge mixing matrix.
pub const UNITARY_TOL: f64 = 1e-12;
/// Minimum eigenvalue of `rho` for metric evaluation (full-rank requirement).
pub const FULL_RANK_MIN_EIG: f64 = 1e-8;

/// Errors produced by the Lindblad layer.
#[derive(Debug, Error)]
pub enum LindbladError {
    #[error(transparent)]
    Qalg(#[from] QalgError),
    #[error("dimension mismatch: {context} ({left} vs {right})")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },
    #[error("operator is not Hermitian within {tol:.1e} (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64, tol: f64 },
    #[error("operator is not traceless within {tol:.1e} (|trace| {deviation:.3e})")]
    NotTraceless { deviation: f64, tol: f64 },
    #[error("density operator trace deviates from 1 by {deviation:.3e}")]
    NotUnitTrace { deviation: f64 },
    #[error("density operator has eigenvalue {eigenvalue:.3e} below the positivity floor")]
    NotPositive { eigenvalue: f64 },
    #[error("Hamiltonian normalization violated: Tr H² = {tr_h2:.6e} but N omega² = {expected:.6e}")]
    BadNormalization { tr_h2: f64, expected: f64 },
    #[error("omega must be >= 0 (got {0})")]
    NegativeOmega(f64),
    #[error("Lindblad strengths must be >= 0 (gamma_{index} = {gamma})")]
    NegativeGamma { index: usize, gamma: f64 },
    #[error(
        "Lindblad orthogonality violated at ({a},{b}): Tr(L_a† L_b) = {found:.6e}, expected {expected:.6e}"
    )]
    NotOrthogonal {
        a: usize,
        b: usize,
        found: f64,
        expected: f64,
    },
    #[error("gauge mixing matrix is not unitary within {tol:.1e} (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64, tol: f64 },
    #[error("metric evaluation requires full-rank rho: min eigenvalue {min_eig:.3e} <= {threshold:.1e}")]
    RankDeficient { min_eig: f64, threshold: f64 },
    #[error("time functional denominator vanishes (g(L(rho), L(rho)) = {value:.3e})")]
    VanishingDenominator { value: f64 },
    #[error("tau must be > 0 (got {0})")]
    NonpositiveTau(f64),
    #[error("Kraus completeness defect {defect:.3e} exceeds bound {bound:.3e} (= C tau², C = {coeff:.3e})")]
    KrausIncomplete {
        defect: f64,
        bound: f64,
        coeff: f64,
    },
    #[error("trajectory residual needs at least 3 samples (got {0})")]
    TooFewSamples(usize),
    #[error("sample spacing dt must be > 0 (got {0})")]
    NonpositiveDt(f64),
}

fn check_hermitian(m: &ComplexMatrix) -> Result<(), LindbladError> {
    let deviation = m.hermiticity_deviation();
    if deviation > HERMITIAN_TOL {
        return Err(LindbladError::NotHermitian {
            deviation,
            tol: HERMITIAN_TOL,
        });
    }
    Ok(())
}

fn check_traceless(m: &ComplexMatrix) -> Result<(), LindbladError> {
    let deviation = m.trace().norm();
    if deviation > TRACE_TOL {
        return Err(LindbladError::NotTraceless {
            deviation,
            tol: TRACE_TOL,
        });
    }
    Ok(())
}

/// A density operator: Hermitian, unit trace, positive semidefinite
/// (eigenvalues above [`POSITIVITY_FLOOR`]).
#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace, and positivity.
    pub fn new(matrix: ComplexMatrix) -> Result<Self, LindbladError> {
        check_hermitian(&matrix)?;
        let trace_dev = (matrix.trace() - Complex64::new(1.0, 0.0)).norm();
        if trace_dev > TRACE_TOL {
            return Err(LindbladError::NotUnitTrace {
                deviation: trace_dev,
            });
        }
        let eig = hermitian_eig(&matrix)?;
        let min_eig = *eig
            .eigenvalues
            .last()
            .expect("density operator has at least one eigenvalue");
        if min_eig < POSITIVITY_FLOOR {
            return Err(LindbladError::NotPositive { eigenvalue: min_eig });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// The maximally mixed state `I/N`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_re(1.0 / dim as f64),
        }
    }

    /// Purity `Tr rho²`.
    pub fn purity(&self) -> f64 {
        self.matrix.matmul(&self.matrix).trace().re
    }
}

/// A control Hamiltonian. Canonically traceless, with strength fixed by
/// `Tr H² = N omega²`; gauge transformations produce non-canonical
/// representatives, built with the relaxed constructors.
#[derive(Debug, Clone)]
pub struct HamiltonianOp {
    matrix: ComplexMatrix,
    omega: f64,
}

impl HamiltonianOp {
    /// Canonical constructor: Hermitian, traceless, and `Tr H² = N omega²`
    /// within [`NORMALIZATION_TOL`] (the normalization constraint is active).
    pub fn new(matrix: ComplexMatrix, omega: f64) -> Result<Self, LindbladError> {
        if omega < 0.0 {
            return Err(LindbladError::NegativeOmega(omega));
        }
        check_hermitian(&matrix)?;
        check_traceless(&matrix)?;
        let tr_h2 = matrix.matmul(&matrix).trace().re;
        let expected = matrix.dim() as f64 * omega * omega;
        if (tr_h2 - expected).abs() > NORMALIZATION_TOL * expected.max(1.0) {
            return Err(LindbladError::BadNormalization { tr_h2, expected });
        }
        Ok(Self { matrix, omega })
    }

    /// Hermitian and traceless, but no strength normalization (`omega` is
    /// recorded as the root-mean-square strength `sqrt(Tr H² / N)`).
    pub fn unconstrained(matrix: ComplexMatrix) -> Result<Self, LindbladError> {
        check_hermitian(&matrix)?;
        check_traceless(&matrix)?;
        let omega = (matrix.matmul(&matrix).trace().re / matrix.dim() as f64)
            .max(0.0)
            .sqrt();
        Ok(Self { matrix, omega })
    }

    /// Hermitian only; used for gauge-orbit representatives that carry trace
    /// parts. Canonicalize with [`gauge_fix`].
    pub fn raw(matrix: ComplexMatrix) -> Result<Self, LindbladError> {
        check_hermitian(&matrix)?;
        let shifted = traceless_part(&matrix);
        let omega = (shifted.matmul(&shifted).trace().re / matrix.dim() as f64)
            .max(0.0)
            .sqrt();
        Ok(Self { matrix, omega })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// The zero Hamiltonian.
    pub fn zero(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::zeros(dim),
            omega: 0.0,
        }
    }
}

/// A set of Lindblad operators with their strengths. Canonically each `L_a`
/// is traceless and the set is mutually orthogonal with
/// `Tr(L_a† L_b) = N gamma_a² delta_ab`.
#[derive(Debug, Clone)]
pub struct LindbladSet {
    ops: Vec<ComplexMatrix>,
    gammas: Vec<f64>,
}

impl LindbladSet {
    /// Canonical constructor: validates tracelessness, orthogonality, and the
    /// strength normalization against `gammas`.
    pub fn new(ops: Vec<ComplexMatrix>, gammas: Vec<f64>) -> Result<Self, LindbladError> {
        if ops.len() != gammas.len() {
            return Err(LindbladError::DimensionMismatch {
                context: "ops vs gammas count",
                left: ops.len(),
                right: gammas.len(),
            });
        }
        for (i, &g) in gammas.iter().enumerate() {
            if g < 0.0 {
                return Err(LindbladError::NegativeGamma { index: i, gamma: g });
            }
        }
        for op in &ops {
            check_traceless(op)?;
        }
        let n = ops.first().map_or(0, |op| op.dim()) as f64;
        for a in 0..ops.len() {
            for b in 0..ops.len() {
                let overlap = ops[a].adjoint().matmul(&ops[b]).trace();
                let expected = if a == b { n * gammas[a] * gammas[a] } else { 0.0 };
                if (overlap - Complex64::new(expected, 0.0)).norm()
                    > ORTHOGONALITY_TOL * expected.abs().max(1.0)
                {
                    return Err(LindbladError::NotOrthogonal {
                        a,
                        b,
                        found: overlap.norm(),
                        expected,
                    });
                }
            }
        }
        Ok(Self { ops, gammas })
    }

    /// Relaxed constructor for gauge-orbit representatives: no tracelessness
    /// or orthogonality checks. Each `gamma_a` is recorded as
    /// `sqrt(Tr(L_a† L_a) / N)`. Canonicalize with [`gauge_fix`].
    pub fn from_ops(ops: Vec<ComplexMatrix>) -> Self {
        let gammas = ops
            .iter()
            .map(|op| {
                let n = op.dim() as f64;
                (op.adjoint().matmul(op).trace().re / n).max(0.0).sqrt()
            })
            .collect();
        Self { ops, gammas }
    }

    /// The empty set (purely unitary dynamics).
    pub fn empty() -> Self {
        Self {
            ops: Vec::new(),
            gammas: Vec::new(),
        }
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// A costate (adjoint) operator `sigma'`: Hermitian and traceless.
#[derive(Debug, Clone)]
pub struct CostateOperator {
    matrix: ComplexMatrix,
}

impl CostateOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self, LindbladError> {
        check_hermitian(&matrix)?;
        check_traceless(&matrix)?;
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// A gauge transformation of the Lindblad generator: a real energy shift
/// `alpha`, complex shifts `beta_a` of the Lindblad operators, and a unitary
/// mixing `U_ab` among them.
#[derive(Debug, Clone)]
pub struct GaugeTransform {
    alpha: f64,
    betas: Vec<Complex64>,
    mixing: ComplexMatrix,
}

impl GaugeTransform {
    pub fn new(
        alpha: f64,
        betas: Vec<Complex64>,
        mixing: ComplexMatrix,
    ) -> Result<Self, LindbladError> {
        if mixing.dim() != betas.len() {
            return Err(LindbladError::DimensionMismatch {
                context: "mixing dim vs betas count",
                left: mixing.dim(),
                right: betas.len(),
            });
        }
        let deviation = mixing
            .adjoint()
            .matmul(&mixing)
            .frobenius_distance(&ComplexMatrix::identity(mixing.dim()));
        if deviation > UNITARY_TOL {
            return Err(LindbladError::NotUnitary {
                deviation,
                tol: UNITARY_TOL,
            });
        }
        Ok(Self {
            alpha,
            betas,
            mixing,
        })
    }

    /// The identity transformation on a set of `n_ops` Lindblad operators.
    pub fn identity(n_ops: usize) -> Self {
        Self {
            alpha: 0.0,
            betas: vec![Complex64::new(0.0, 0.0); n_ops],
            mixing: ComplexMatrix::identity(n_ops),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn betas(&self) -> &[Complex64] {
        &self.betas
    }

    pub fn mixing(&self) -> &ComplexMatrix {
        &self.mixing
    }
}

/// The monotone metric used by the time functional. Only the symmetric
/// logarithmic derivative (SLD) instance is in scope: operator-convex
/// `eta(t) = (1+t)/2`, giving kernel `c(x, y) = 2/(x+y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneMetric {
    Sld,
}

impl MonotoneMetric {
    /// The metric kernel `c(x, y)` on eigenvalue pairs of `rho`.
    pub fn c(&self, x: f64, y: f64) -> f64 {
        match self {
            MonotoneMetric::Sld => 2.0 / (x + y),
        }
    }

    /// The operator-convex function `eta` generating the kernel; satisfies
    /// the self-duality `t eta(1/t) = eta(t)` that makes `c` symmetric.
    pub fn eta(&self, t: f64) -> f64 {
        match self {
            MonotoneMetric::Sld => (1.0 + t) / 2.0,
        }
    }
}

/// A set of Kraus operators `W_a` for one step of duration `tau`, complete to
/// first order: `sum_a W_a† W_a = I` within `C tau²`.
#[derive(Debug, Clone)]
pub struct KrausSet {
    ops: Vec<ComplexMatrix>,
    tau: f64,
    completeness_coeff: f64,
    completeness_defect: f64,
}

impl KrausSet {
    /// Validates the completeness defect `‖sum W† W − I‖_F <= coeff·tau²`.
    /// `coeff` is the constant `C` reported by whichever builder produced the
    /// operators ([`kraus_from_lindblad`] derives it from the generator).
    pub fn new(ops: Vec<ComplexMatrix>, tau: f64, coeff: f64) -> Result<Self, LindbladError> {
        if tau <= 0.0 {
            return Err(LindbladError::NonpositiveTau(tau));
        }
        let dim = ops.first().map_or(0, |op| op.dim());
        let mut sum = ComplexMatrix::zeros(dim);
        for op in &ops {
            if op.dim() != dim {
                return Err(LindbladError::DimensionMismatch {
                    context: "Kraus operator dims",
                    left: op.dim(),
                    right: dim,
                });
            }
            sum = &sum + &op.adjoint().matmul(op);
        }
        let defect = sum.frobenius_distance(&ComplexMatrix::identity(dim));
        let bound = coeff * tau * tau + 1e-14;
        if defect > bound {
            return Err(LindbladError::KrausIncomplete {
                defect,
                bound,
                coeff,
            });
        }
        Ok(Self {
            ops,
            tau,
            completeness_coeff: coeff,
            completeness_defect: defect,
        })
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// The constant `C` bounding the completeness defect by `C tau²`.
    pub fn completeness_coeff(&self) -> f64 {
        self.completeness_coeff
    }

    /// Measured `‖sum W† W − I‖_F`.
    pub fn completeness_defect(&self) -> f64 {
        self.completeness_defect
    }
}

/// The brachistochrone operator `F = -i[rho, sigma']`: Hermitian and
/// traceless by construction.
#[derive(Debug, Clone)]
pub struct FOperator {
    matrix: ComplexMatrix,
}

impl FOperator {
    /// Builds `F = -i[rho, sigma']`.
    pub fn from_state_costate(rho: &DensityOperator, costate: &CostateOperator) -> Self {
        let comm = commutator(rho.matrix(), costate.matrix());
        let matrix = comm.scale(Complex64::new(0.0, -1.0));
        debug_assert!(matrix.hermiticity_deviation() < 1e-10);
        debug_assert!(matrix.trace().norm() < 1e-10);
        Self { matrix }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

fn check_dims(a: usize, b: usize, context: &'static str) -> Result<(), LindbladError> {
    if a != b {
        return Err(LindbladError::DimensionMismatch {
            context,
            left: a,
            right: b,
        });
    }
    Ok(())
}

/// The Lindblad generator on plain matrices:
/// `-i[h, rho] + sum_a (L_a rho L_a† - 1/2 {L_a† L_a, rho})`.
pub fn lindblad_rhs_matrix(
    rho: &ComplexMatrix,
    h: &ComplexMatrix,
    ops: &[ComplexMatrix],
) -> Result<ComplexMatrix, LindbladError> {
    check_dims(h.dim(), rho.dim(), "H vs rho")?;
    let mut out = commutator(h, rho).scale(Complex64::new(0.0, -1.0));
    for op in ops {
        check_dims(op.dim(), rho.dim(), "L vs rho")?;
        let op_dag = op.adjoint();
        let jump = op.matmul(rho).matmul(&op_dag);
        let damping = anticommutator(&op_dag.matmul(op), rho).scale_re(0.5);
        out = &(&out + &jump) - &damping;
    }
    Ok(out)
}

/// Right-hand side of the master equation for `rho`.
pub fn lindblad_rhs(
    rho: &DensityOperator,
    h: &HamiltonianOp,
    l: &LindbladSet,
) -> Result<ComplexMatrix, LindbladError> {
    lindblad_rhs_matrix(rho.matrix(), h.matrix(), l.ops())
}

/// The Heisenberg-picture adjoint generator on plain matrices:
/// `L†(A) = i[h, A] + sum_a (L_a† A L_a - 1/2 {L_a† L_a, A})`.
pub fn heisenberg_rhs(
    a: &ComplexMatrix,
    h: &ComplexMatrix,
    ops: &[ComplexMatrix],
) -> Result<ComplexMatrix, LindbladError> {
    check_dims(h.dim(), a.dim(), "H vs A")?;
    let mut out = commutator(h, a).scale(Complex64::new(0.0, 1.0));
    for op in ops {
        check_dims(op.dim(), a.dim(), "L vs A")?;
        let op_dag = op.adjoint();
        let sandwich = op_dag.matmul(a).matmul(op);
        let damping = anticommutator(&op_dag.matmul(op), a).scale_re(0.5);
        out = &(&out + &sandwich) - &damping;
    }
    Ok(out)
}

/// Right-hand side of the adjoint (costate) equation:
/// `sigma'_dot = -(traceless part of L†(sigma'))`.
pub fn adjoint_rhs(
    a: &CostateOperator,
    h: &HamiltonianOp,
    l: &LindbladSet,
) -> Result<ComplexMatrix, LindbladError> {
    let heis = heisenberg_rhs(a.matrix(), h.matrix(), l.ops())?;
    Ok(traceless_part(&heis).scale_re(-1.0))
}

/// Applies the two gauge laws in sequence: first the scalar shifts
/// (`H -> H + alpha I + (1/2i) sum_a (beta_a* L_a - beta_a L_a†)`,
/// `L_a -> L_a + beta_a I`), then the unitary mixing
/// (`L_a -> sum_b U_ab L_b`). The output is a gauge-orbit representative and
/// generally violates the canonical (traceless / orthogonal) invariants;
/// restore them with [`gauge_fix`].
pub fn gauge_apply(
    h: &HamiltonianOp,
    l: &LindbladSet,
    g: &GaugeTransform,
) -> Result<(HamiltonianOp, LindbladSet), LindbladError> {
    check_dims(g.betas.len(), l.len(), "gauge betas vs Lindblad ops")?;
    let dim = h.dim();
    for op in l.ops() {
        check_dims(op.dim(), dim, "L vs H")?;
    }

    // First law: scalar shifts.
    let mut h_new = h.matrix().clone();
    for i in 0..dim {
        h_new[(i, i)] += Complex64::new(g.alpha, 0.0);
    }
    let half_over_i = Complex64::new(0.0, -0.5); // 1/(2i)
    for (op, &beta) in l.ops().iter().zip(&g.betas) {
        let term = &op.scale(beta.conj()) - &op.adjoint().scale(beta);
        h_new = &h_new + &term.scale(half_over_i);
    }
    let shifted: Vec<ComplexMatrix> = l
        .ops()
        .iter()
        .zip(&g.betas)
        .map(|(op, &beta)| {
            let mut s = op.clone();
            for i in 0..dim {
                s[(i, i)] += beta;
            }
            s
        })
        .collect();

    // Second law: unitary mixing.
    let mixed: Vec<ComplexMatrix> = (0..shifted.len())
        .map(|a| {
            let mut acc = ComplexMatrix::zeros(dim);
            for (b, op) in shifted.iter().enumerate() {
                acc = &acc + &op.scale(g.mixing[(a, b)]);
            }
            acc
        })
        .collect();

    Ok((HamiltonianOp::raw(h_new)?, LindbladSet::from_ops(mixed)))
}

/// Maps any gauge-orbit representative to the canonical slice: traceless `H`
/// and `L_a`, with the `L_a` mutually orthogonal and ordered by descending
/// strength. The orthogonalization diagonalizes the Gram matrix
/// `Tr(L_a† L_b)` with a unitary mixing, so the whole map stays inside the
/// gauge group and leaves the generator invariant.
pub fn gauge_fix(
    h: &HamiltonianOp,
    l: &LindbladSet,
) -> Result<(HamiltonianOp, LindbladSet), LindbladError> {
    let dim = h.dim();
    let n = dim as f64;

    // Shift each L_a traceless (beta_a = -Tr L_a / N) and fold the
    // compensating term into H.
    let mut h_new = h.matrix().clone();
    let half_over_i = Complex64::new(0.0, -0.5); // 1/(2i)
    let mut tilde: Vec<ComplexMatrix> = Vec::with_capacity(l.len());
    for op in l.ops() {
        check_dims(op.dim(), dim, "L vs H")?;
        let beta = -op.trace() / n;
        let term = &op.scale(beta.conj()) - &op.adjoint().scale(beta);
        h_new = &h_new + &term.scale(half_over_i);
        let mut t = op.clone();
        for i in 0..dim {
            t[(i, i)] += beta;
        }
        tilde.push(t);
    }
    // Drop the trace part of H (the alpha freedom).
    h_new = traceless_part(&h_new);

    if tilde.is_empty() {
        return Ok((
            HamiltonianOp::unconstrained(h_new)?,
            LindbladSet::empty(),
        ));
    }

    // Diagonalize the Gram matrix G_ab = Tr(L_a† L_b); the new operators
    // L'_a = sum_b V_ba L_b (V's columns = eigenvectors of G) satisfy
    // Tr(L'_a† L'_b) = g_a delta_ab with g_a descending.
    let k = tilde.len();
    let mut gram = ComplexMatrix::zeros(k);
    for a in 0..k {
        for b in 0..k {
            gram[(a, b)] = tilde[a].adjoint().matmul(&tilde[b]).trace();
        }
    }
    let eig = hermitian_eig(&gram)?;
    let v = &eig.eigenvectors;
    let mut new_ops = Vec::with_capacity(k);
    let mut gammas = Vec::with_capacity(k);
    for a in 0..k {
        let mut acc = ComplexMatrix::zeros(dim);
        for (b, op) in tilde.iter().enumerate() {
            acc = &acc + &op.scale(v[(b, a)]);
        }
        new_ops.push(acc);
        gammas.push((eig.eigenvalues[a].max(0.0) / n).sqrt());
    }

    Ok((
        HamiltonianOp::unconstrained(h_new)?,
        LindbladSet::new(new_ops, gammas)?,
    ))
}

/// Evaluates the monotone metric `g_rho(A, B)` in the eigenbasis of `rho`:
/// `g = sum_ij conj(A_ij) c(lambda_i, lambda_j) B_ij`. Requires full-rank
/// `rho` (minimum eigenvalue above [`FULL_RANK_MIN_EIG`]); boundary states
/// must be regularized by the caller.
pub fn metric_eval(
    rho: &DensityOperator,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    metric: MonotoneMetric,
) -> Result<f64, LindbladError> {
    check_dims(a.dim(), rho.dim(), "A vs rho")?;
    check_dims(b.dim(), rho.dim(), "B vs rho")?;
    let eig = hermitian_eig(rho.matrix())?;
    let min_eig = *eig
        .eigenvalues
        .last()
        .expect("rho has at least one eigenvalue");
    if min_eig <= FULL_RANK_MIN_EIG {
        return Err(LindbladError::RankDeficient {
            min_eig,
            threshold: FULL_RANK_MIN_EIG,
        });
    }
    let v = &eig.eigenvectors;
    let v_dag = v.adjoint();
    let a_tilde = v_dag.matmul(a).matmul(v);
    let b_tilde = v_dag.matmul(b).matmul(v);
    let n = rho.dim();
    let mut g = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c = metric.c(eig.eigenvalues[i], eig.eigenvalues[j]);
            g += (a_tilde[(i, j)].conj() * b_tilde[(i, j)]).re * c;
        }
    }
    Ok(g)
}

/// The pointwise time functional
/// `L_T = sqrt( g_rho(rho_dot, rho_dot) / g_rho(L(rho), L(rho)) )`,
/// which equals 1 exactly when `rho_dot` is the master-equation velocity.
pub fn time_functional(
    rho: &DensityOperator,
    rho_dot: &ComplexMatrix,
    h: &HamiltonianOp,
    l: &LindbladSet,
    metric: MonotoneMetric,
) -> Result<f64, LindbladError> {
    let generator_velocity = lindblad_rhs(rho, h, l)?;
    let denom = metric_eval(rho, &generator_velocity, &generator_velocity, metric)?;
    if denom <= 1e-12 {
        return Err(LindbladError::VanishingDenominator { value: denom });
    }
    let numer = metric_eval(rho, rho_dot, rho_dot, metric)?;
    Ok((numer.max(0.0) / denom).sqrt())
}

/// Builds the first-order Kraus set of a Lindblad generator for step `tau`:
/// `W_0 = I - i H tau - (tau/2) sum_a L_a† L_a` and `W_a = sqrt(tau) L_a`.
/// The completeness constant is `C = (‖H‖_F + ‖S‖_F/2)²` with
/// `S = sum L_a† L_a`, which bounds the defect `‖sum W† W - I‖_F <= C tau²`
/// exactly.
pub fn kraus_from_lindblad(
    h: &HamiltonianOp,
    l: &LindbladSet,
    tau: f64,
) -> Result<KrausSet, LindbladError> {
    if tau <= 0.0 {
        return Err(LindbladError::NonpositiveTau(tau));
    }
    let dim = h.dim();
    let mut s = ComplexMatrix::zeros(dim);
    for op in l.ops() {
        check_dims(op.dim(), dim, "L vs H")?;
        s = &s + &op.adjoint().matmul(op);
    }
    let w0 = &(&ComplexMatrix::identity(dim)
        - &h.matrix().scale(Complex64::new(0.0, tau)))
        - &s.scale_re(tau / 2.0);
    let mut ops = vec![w0];
    for op in l.ops() {
        ops.push(op.scale_re(tau.sqrt()));
    }
    let coeff = {
        let hn = h.matrix().frobenius_norm();
        let sn = s.frobenius_norm();
        let c = (hn + sn / 2.0) * (hn + sn / 2.0);
        // Keep the reported constant meaningful for the trivial generator.
        if c > 0.0 {
            c
        } else {
            1.0
        }
    };
    KrausSet::new(ops, tau, coeff)
}

/// Applies a Kraus set: `rho -> sum_a W_a rho W_a†`, renormalized by its
/// trace. Returns the new state together with the trace defect
/// `|Tr(sum W rho W†) - 1|` absorbed by the renormalization.
pub fn kraus_apply(
    rho: &DensityOperator,
    k: &KrausSet,
) -> Result<(DensityOperator, f64), LindbladError> {
    let dim = rho.dim();
    let mut out = ComplexMatrix::zeros(dim);
    for op in k.ops() {
        check_dims(op.dim(), dim, "W vs rho")?;
        out = &out + &op.matmul(rho.matrix()).matmul(&op.adjoint());
    }
    let trace = out.trace().re;
    let defect = (trace - 1.0).abs();
    let renormalized = out.scale_re(1.0 / trace);
    Ok((DensityOperator::new(renormalized)?, defect))
}

/// One sampled point of a brachistochrone trajectory.
#[derive(Debug, Clone)]
pub struct BrachSample {
    pub rho: DensityOperator,
    pub costate: CostateOperator,
    pub hamiltonian: HamiltonianOp,
}

/// Checks the fundamental brachistochrone equation `i F_dot = [H, F]` with
/// `F = -i[rho, sigma']` on uniformly spaced samples. `F_dot` is the central
/// difference, so the returned residual `max_k ‖i F_dot(t_k) - [H(t_k), F(t_k)]‖_F`
/// over interior samples carries an O(dt²) discretization floor.
pub fn brachistochrone_residual(
    samples: &[BrachSample],
    dt: f64,
) -> Result<f64, LindbladError> {
    if samples.len() < 3 {
        return Err(LindbladError::TooFewSamples(samples.len()));
    }
    if dt <= 0.0 {
        return Err(LindbladError::NonpositiveDt(dt));
    }
    let f_ops: Vec<ComplexMatrix> = samples
        .iter()
        .map(|s| FOperator::from_state_costate(&s.rho, &s.costate).matrix().clone())
        .collect();
    let mut max_residual: f64 = 0.0;
    for k in 1..samples.len() - 1 {
        let f_dot = (&f_ops[k + 1] - &f_ops[k - 1]).scale_re(1.0 / (2.0 * dt));
        let lhs = f_dot.scale(Complex64::new(0.0, 1.0));
        let rhs = commutator(samples[k].hamiltonian.matrix(), &f_ops[k]);
        max_residual = max_residual.max(lhs.frobenius_distance(&rhs));
    }
    Ok(max_residual)
}
