//! Numerical tolerances shared across the crate.

/// Tolerance record. Every numerical contract check in the crate reads its
/// threshold from [`TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Maximum entrywise deviation from Hermiticity accepted by `expm_hermitian`.
    pub hermitian: f64,
    /// Frobenius bound on `U†U - I` for matrices treated as unitary.
    pub unitary: f64,
    /// Relative bound on the trace/eigenvalue-sum mismatch of `eig_general`.
    pub eig_trace: f64,
    /// Relative residual accepted from `solve`.
    pub solve_residual: f64,
    /// Condition number above which `solve` reports a singular system.
    pub max_condition: f64,
    /// Bound on `Σ K†K - I` for Kraus sets.
    pub trace_preserving: f64,
    /// Eigenvalue floor for density matrices.
    pub positivity: f64,
    /// Threshold below which an amplitude or matrix entry counts as zero.
    pub zero: f64,
}

pub const TOL: Tolerances = Tolerances {
    hermitian: 1e-12,
    unitary: 1e-11,
    eig_trace: 1e-8,
    solve_residual: 1e-8,
    max_condition: 1e13,
    trace_preserving: 1e-10,
    positivity: 1e-9,
    zero: 1e-12,
};
