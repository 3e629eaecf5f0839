//! Solvers, relaxations, oracles and instance generators for QP-Ratio and
//! Normalized QP-Ratio: maximise `sum_{i != j} a_ij x_i x_j / sum_i x_i^2`
//! (or `/ sum_i d_i x_i^2`) over `x in {-1, 0, 1}^n`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod exact;
pub mod generators;
pub mod hardness;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod rounding;
pub mod sdp;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{
    degrees, eval_normalized_qp_ratio, eval_qp_intermediate, eval_qp_ratio, trivial_solution,
    AnyInstance, Assignment, Bipartition, Entry, FractionalAssignment, Meta,
    QpIntermediateInstance, QpRatioInstance, RatioValue,
};
pub use sdp::GramSolution;
