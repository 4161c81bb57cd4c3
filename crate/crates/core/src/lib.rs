//! Learning convex-polyhedron classifiers in inner-product spaces.
//!
//! The building blocks, bottom up:
//!
//! * [`kernel`]: kernel evaluation, Gram matrices, sphere lifting and
//!   feature-map Lipschitz bounds.
//! * [`dual`]: states `(h, d)` in dual form and the projection step.
//! * [`lp`]: the projection solver for strict linear feasibility, exact and
//!   lattice-discretized.
//! * [`cover`] and [`search`]: proper and improper polyhedral separation by
//!   search-tree branching.
//! * [`pac`]: VC-dimension and sample-size calculators.
//! * [`data`], [`planted`], [`oracle`]: CSV datasets, planted instances and a
//!   brute-force separability check for the plane.

// `!(x > 0.0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cover;
pub mod data;
pub mod dual;
pub mod error;
pub mod kernel;
pub mod lp;
pub mod oracle;
pub mod pac;
pub mod planted;
pub mod search;

pub use dual::{
    margin_value, potential, project_origin_to_segment, state_inner, DualState, Label, LabeledPoint, Sample,
};
pub use error::{Error, Result};
pub use kernel::{eval_kernel, gram, lift_to_sphere, lipschitz_constant, GramMatrix, KernelSpec};
pub use lp::{lp_solve, lp_solve_all, lp_solve_discretized, DiscretizationConfig, LpOutcome, LpRun, LpTelemetry};
pub use search::{classify, improper_separate, proper_separate, Polyhedron, SearchRun, Separation};
