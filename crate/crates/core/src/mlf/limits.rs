//! Regime boundaries for E_{α,β}(-t), t ≥ 0.
//!
//! Calibrated against `tests/data/ml_reference.csv` (see `tests/ml_reference.rs`).

/// The power series is used while t^{1/α} stays below this value; past it the
/// alternating terms grow to about e^{t^{1/α}}/α and cancellation eats digits.
pub const SERIES_MAX_SCALED_T: f64 = 3.0;

/// The asymptotic expansion is only tried for t at least this large.
pub const ASYMPTOTIC_MIN_T: f64 = 50.0;

/// Cap on the number of asymptotic terms.
pub const ASYMPTOTIC_MAX_TERMS: usize = 20;

/// The asymptotic sum is accepted when the first omitted term is below this
/// fraction of the sum; otherwise the integral representation is used.
pub const ASYMPTOTIC_REL_TOL: f64 = 1e-15;

/// Relative tolerance handed to the double-exponential quadrature.
pub const QUADRATURE_REL_TOL: f64 = 1e-14;

/// Beyond this, e^{-u} is negligible against the representation's integrand.
pub const EXP_CUTOFF: f64 = 60.0;
