//! Generalized Eisenhart lift.
//!
//! An `n`-dimensional action-dependent (Herglotz) Lagrangian
//!
//! ```text
//! 𝓛(x, x', u, w) = ½ h_ij x'^i x'^j + A_i x'^i − V,    w' = 𝓛
//! ```
//!
//! is lifted to null geodesics of the `(n+2)`-dimensional Brinkmann metric
//!
//! ```text
//! ds² = h_ij dx^i dx^j + 2 A_i dx^i du − 2 V du² − 2 du dw
//! ```
//!
//! where `h`, `A` and `V` may depend on every coordinate, including the
//! action-like coordinate `w`. The crate integrates both descriptions
//! independently and provides residual checks relating them: reduction of
//! null geodesics, the non-affine behaviour of `u`, conformal Killing
//! vectors built from symmetries, and the nonlocal Noether charge.
//!
//! Coordinates are always ordered `(x1..xn, u, w)`.

// `!(a > b)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod cloud;
pub mod dynamics;
mod error;
pub mod expr;
pub mod geometry;
pub mod ode;
pub mod scalar;
pub mod symmetry;
pub mod systems;

pub use error::{Error, Result};
