//! Numerical toolkit for interior null-controllability of one-dimensional
//! parabolic equations with merely bounded, measurable coefficients.
//!
//! The pipeline mirrors the constructive route from a general divergence-form
//! equation to a controlled canonical heat equation:
//!
//! 1. [`profile`] — piecewise-constant coefficient profiles on `[0,1]` and
//!    validation of the ellipticity/size bounds.
//! 2. [`reduction`] — the change-of-variables chain (sign normalization of the
//!    zero-order term, drift absorption `B(x)`, the auxiliary boundary-value
//!    problem `w`, and the Liouville coordinate `y`) producing a canonical
//!    system `∂²_y z − ρ̃ ∂_t z = f χ_ω̃`.
//! 3. [`eigen`] — Dirichlet Sturm–Liouville eigenpairs `e'' + ρ λ² e = 0` for a
//!    rough density, with ρ-weighted orthonormalization and the odd/even
//!    periodic extensions.
//! 4. [`specineq`] — sharp observability ratios over a control region as a
//!    function of the frequency cutoff, with an exponential-law fit.
//! 5. [`lift`] — the harmonic lift `u(x,y) = Σ aₖ eₖ(x) cosh(λₖ y)`, its stream
//!    function, and empirical doubling / three-circle / Cauchy-data growth
//!    measurements.
//! 6. [`control`] — Lebeau–Robbiano control synthesis: dyadic time slices,
//!    per-slice minimal-norm (Gramian) steering of low modes, free decay in
//!    passive half-slices.
//! 7. [`sim`] — spectral and Crank–Nicolson forward simulators plus the
//!    cross-validation of the reduction chain.

pub mod control;
pub mod eigen;
pub mod error;
pub mod lift;
pub mod profile;
pub mod quad;
pub mod reduction;
pub mod sim;
pub mod specineq;
pub mod wide;

pub use eigen::{EigenBasis, Mesh};
pub use error::CoreError;
pub use profile::{ControlRegion, NodalFunction, PiecewiseProfile, ProblemSpec, ValidationReport};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
