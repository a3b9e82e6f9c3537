//! Centralized numerical tolerances.
//!
//! All thresholds used across the crate live here so that every module and
//! every test agrees on what "equal", "Hermitian" or "positive" means at
//! double precision and matrix sides up to a few hundred.

/// Hermiticity acceptance: `max |m - m†|` entrywise.
pub const HERM_TOL: f64 = 1e-10;

/// Unitarity acceptance: `max |u†u - I|` entrywise.
pub const UNITARY_TOL: f64 = 1e-10;

/// Smallest eigenvalue still treated as non-negative for CP checks.
pub const PSD_FLOOR: f64 = -1e-9;

/// Eigenvalues below this magnitude are dropped when extracting orthogonal
/// Kraus operators from a Choi spectral decomposition.
pub const EIG_DROP: f64 = 1e-10;

/// Entrywise equality of Choi matrices.
pub const CHOI_EQ_TOL: f64 = 1e-10;

/// Trace-preservation residual: `max |Tr_out J - I|`.
pub const TP_TOL: f64 = 1e-9;

/// Residual for membership of a coherence operator in a Kraus span.
pub const SPAN_TOL: f64 = 1e-9;

/// Allowed overshoot of the squared coefficient norm of a coherence operator.
pub const COH_NORM_SLACK: f64 = 1e-9;

/// Comb normalization-chain residual (looser than channel equality because
/// the conditions compound several partial traces).
pub const COMB_TOL: f64 = 1e-9;

/// Residual below which a numerical feasibility search counts as a match.
pub const MATCH_TOL: f64 = 1e-6;

/// Residual for an eigenstate precondition `U|ψ⟩ = e^{iθ}|ψ⟩`.
pub const EIGENSTATE_TOL: f64 = 1e-9;

/// Relative tolerance when grouping eigenvalues into degenerate clusters.
pub const CLUSTER_TOL: f64 = 1e-8;
