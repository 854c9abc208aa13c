//! Default tolerances for every scenario check, pinned in one place.
//!
//! Identity residuals are machine-precision statements about exact algebra;
//! tensor-quadrature integrals carry the quadrature budget; class-level
//! integrals go through nested quadrature and get the loosest absolute
//! budget. Individual configs may override by check name.

/// Euler/homogeneity/connection identity residuals (relative to G).
pub const IDENTITY_RESIDUAL: f64 = 1e-9;
/// Coefficient residual of the curvature decomposition of the first Chern
/// form.
pub const DECOMPOSITION_ABS: f64 = 1e-9;
/// Single fibre integrals in tensor mode (rank 2).
pub const TENSOR_INTEGRAL_ABS: f64 = 1e-6;
/// Pointwise route agreement for the second Segre form on a surface base.
pub const SEGRE_K2_ABS: f64 = 1e-4;
/// Nested (base x fibre) class integrals.
pub const CLASS_INTEGRAL_ABS: f64 = 1e-4;
/// Pointwise flat-class coefficients.
pub const FLATNESS_ABS: f64 = 1e-8;
/// Deviation of the Einstein trace from constancy.
pub const EINSTEIN_TRACE_DEV: f64 = 1e-8;
/// Residual of the Hermitian-Einstein endomorphism identity.
pub const HERMITIAN_EINSTEIN_ABS: f64 = 1e-9;
/// Strict-positivity margin for signed Segre forms.
pub const POSITIVITY_MARGIN: f64 = 1e-6;
/// Equality-case bound for the pointwise inequality fields.
pub const EQUALITY_FIELD_ABS: f64 = 1e-3;
/// Relative residual of the transgression consistency fit.
pub const TRANSGRESSION_REL: f64 = 0.05;
/// Slope comparisons and Einstein-constant cross-checks.
pub const SLOPE_ABS: f64 = 1e-4;
/// Constancy of the L2 dual metric over the base.
pub const L2_CONSTANCY_ABS: f64 = 1e-6;
