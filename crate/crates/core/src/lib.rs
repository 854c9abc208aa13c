//! Numerical laboratory for the curvature geometry of holomorphic Finsler
//! vector bundles.
//!
//! The crate evaluates, at chosen points of a bundle chart, the full curvature
//! data of a strongly pseudo-convex Finsler metric (Levi form, Chern
//! connection, Kobayashi curvature, the first Chern form of the hyperplane
//! bundle), pushes forms down the projectivized fibres to obtain Segre and
//! Chern forms on the base, and integrates those over the base manifold.
//! Every computed quantity is paired with an independent check: a
//! finite-difference oracle for derivatives, closed-form line-bundle values
//! for the Hermitian specializations, and Monte Carlo bands for quadrature.
//!
//! Module layout:
//! - [`jets`]: truncated Taylor arithmetic in mixed real coordinates with
//!   Wirtinger-derivative extraction (the differentiation engine).
//! - [`exterior`]: pointwise complex exterior algebra over the chart
//!   one-form generators.
//! - [`finsler`]: metric families and the pointwise curvature objects.
//! - [`fiberint`]: pushforward integration over projectivized fibres.
//! - [`baseint`]: base manifolds, global integration, traces and slopes.
//! - [`oracle`]: independent ground-truth generators.
//! - [`scenarios`]: configuration, scenario orchestration and reports.

pub mod baseint;
pub mod exterior;
pub mod fiberint;
pub mod finsler;
pub mod jets;
pub mod linalg;
pub mod oracle;
pub mod scenarios;

mod quad;

use num_complex::Complex64;
use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the numeric layers.
///
/// Value-dependent failures (division near zero, log of a non-positive
/// value, a Levi form losing definiteness) all signal the same thing: the
/// evaluation left the admissible region `E^o` or the metric is degenerate
/// there. They carry enough context to locate the offending point.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate frame mismatch between operands")]
    FrameMismatch,
    #[error("basepoint has {got} complex entries, frame needs {want}")]
    BasepointMismatch { want: usize, got: usize },
    #[error("requested derivative order {got} exceeds jet order {max}")]
    OrderOverflow { max: usize, got: usize },
    #[error("division by near-zero jet value |{value}|")]
    DivisionNearZero { value: Complex64 },
    #[error("log of non-positive jet value {value}")]
    LogNonPositive { value: Complex64 },
    #[error("jet claimed real-valued carries imaginary part {imag:e}")]
    NotReal { imag: f64 },
    #[error("matrix entry of odd degree where an even form is required")]
    OddDegreeEntry,
    #[error("singular matrix (pivot {pivot:e})")]
    SingularMatrix { pivot: f64 },
    #[error("fiber vector is zero")]
    ZeroFiberVector,
    #[error("Levi form not positive-definite: min eigenvalue {min_eigenvalue:e} at z={z:?}, v={v:?}")]
    NotPseudoConvex {
        min_eigenvalue: f64,
        z: Vec<Complex64>,
        v: Vec<Complex64>,
    },
    #[error("integrand fails the descent check: relative deviation {deviation:e} under fibre scaling")]
    DescentCheckFailed { deviation: f64 },
    #[error("quadrature did not converge: order bump moved the result by {delta:e} (tolerance {tolerance:e})")]
    NonConvergent { delta: f64, tolerance: f64 },
    #[error("degenerate Kahler form at z={z:?}")]
    DegenerateKahler { z: Vec<Complex64> },
    #[error("metric is not Finsler-Einstein: trace deviation {deviation:e} exceeds {tolerance:e}")]
    NotEinstein { deviation: f64, tolerance: f64 },
    #[error("operation requires a Hermitian-induced metric")]
    NotHermitianInduced,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("Monte Carlo variance overflow")]
    VarianceOverflow,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("report serialization failed: {0}")]
    Serialize(String),
}

pub use exterior::{Form, FormMatrix, Gen, HorizontalForm};
pub use finsler::{CurvatureBundle, MetricModel};
pub use jets::{CoordinateFrame, Jet, WirtingerIndex};
pub use linalg::CMat;
