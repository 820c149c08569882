//! Parabolic complex Monge-Ampere flow `u_t = log det(u_{a b̄}) - A u + f` on the
//! unit ball: regularization ladder, radial and planar solvers, diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod closed_form;
pub mod cutoff;
pub mod diagnostics;
pub mod error;
pub mod export;
pub mod expr;
pub mod hermitian;
pub mod params;
pub mod planar;
pub mod problem;
pub mod radial;
pub mod record;
pub mod regularize;
pub mod run;
pub mod scenario;
pub mod stepping;

pub use closed_form::{
    continuity_bound, dotu_envelope, envelope_constant, predicted_dissolution, predicted_lelong, ContinuityInputs,
    DotuEnvelope,
};
pub use error::{Error, Result};
pub use expr::{Expr, Jet, Monomial, Term};
pub use hermitian::{check_laplacian_inequality, HermitianSample, LaplacianVerdict};
pub use params::{FlowParams, LelongAtom};
