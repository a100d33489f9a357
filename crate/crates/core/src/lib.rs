//! Finite elements for a Poisson problem in a planar domain coupled to a
//! Laplace–Beltrami problem on its boundary curve, together with the
//! fourth-order system obtained by composing two such solves and the
//! associated eigenvalue problems.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod eigen;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod mesh;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
