//! Numerical toolkit for flows of polynomial vector fields, their
//! prolongations (derivatives of the flow map with respect to the initial
//! condition) and empirical decay-envelope certification.
//!
//! The library is organised around three field families on `R^n`:
//!
//! * diagonal linear fields `sum_i alpha_i x_i d/dx_i`,
//! * diagonal odd-monomial fields `sum_i beta_i x_i^{1+m_i} d/dx_i`,
//! * their binomial combination,
//!
//! each optionally perturbed by a catalog vector field `Z` with
//! machine-certified growth constants. On top of that sit closed-form flow
//! solutions, variational (prolongation) integration, lemma-indexed decay
//! envelopes, global-asymptotic-stability certification in weak norms over
//! compact boxes, and Lie-bracket inversion along flows.
//!
//! All types are immutable values after construction and all operations are
//! pure functions; everything can be evaluated concurrently.

pub mod closed_form;
pub mod error;
pub mod estimates;
pub mod field;
pub mod lie;
pub mod ode;
pub mod quad;
pub mod rng;
pub mod stability;
pub mod taylor1;
pub mod tensor;
pub mod variational;

pub use error::CoreError;
pub use field::{CoefficientProfile, FieldFamily, FieldSpec, PerturbationKind, PerturbationSpec};
pub use variational::{IntegratorConfig, Jet, Trajectory};

/// Highest derivative order carried by jets and certifications.
pub const K_MAX: usize = 4;

/// Largest supported state dimension (dense order-k tensors scale as n^k).
pub const N_MAX: usize = 8;
