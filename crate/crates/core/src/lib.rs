//! Numerical convex geometry for multipartite quantum state spaces.
//!
//! The crate revolves around a handful of convex bodies living in the real
//! vector space of Hermitian operators on `(C^D)^{⊗N}` equipped with the
//! Hilbert-Schmidt inner product:
//!
//! * the set of density matrices (trace-one positive operators),
//! * its symmetrization, the trace-norm unit ball,
//! * the separable states and their symmetrization,
//! * the convex hull of rank-one product operators,
//! * the states with positive partial transpose.
//!
//! Everything the crate computes about these bodies goes through a small set
//! of primitives: support-function oracles ([`bodies`]), Gaussian mean-width
//! estimation and exact log-volume formulas ([`widths`]), injective tensor
//! norms and hyperplane-slice certificates ([`tensor_norms`]), packing-based
//! sphere nets with polytope width bounds ([`nets`]), the extremal ellipsoid
//! of the trace-norm ball and its tensor powers ([`ellipsoids`]), and partial
//! transposition tests ([`ppt`]). The [`experiments`] module assembles these
//! into reproducible pass/fail reports with pinned random seeds.
//!
//! All randomness flows through [`sampling::SeededStream`], a splittable
//! counter-based stream: estimates are bit-identical across runs and across
//! thread counts for a fixed seed.

pub mod bodies;
pub mod ellipsoids;
pub mod error;
pub mod experiments;
pub mod nets;
pub mod operators;
pub mod ppt;
pub mod sampling;
pub mod tensor_norms;
pub mod widths;

pub use error::{Error, Result};
pub use experiments::{
    run_theorem1, run_theorem2, run_theorem3, run_theorem4, CheckKind, CheckRow, TheoremReport,
};
pub use operators::{DensityMatrix, FactorShape, HermitianOp, ProductVector};
pub use sampling::SeededStream;
