//! Smooth zero-set representations of closed sets and parametric multifunctions.
//!
//! A closed convex set, a closed set, or the graph of a convex-valued
//! multifunction is written as the zero set of an explicit C∞ function
//!
//! ```text
//! φ(x, y) = Σ_n w_n · θ(a_n(x)) · θ(b_n(y)),   w_n = (ζ_n^n ξ_n^n 2^n)^{-1}
//! ```
//!
//! where `a_n` is a ball cut in the parameter space, `b_n` a halfspace cut in
//! the value space and `θ` a smooth convex transition function. On top of the
//! representation the crate provides sublevel approximations, smooth
//! integrand approximations, Moreau envelopes, set distances and integral
//! functionals over finite scenario spaces.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod approx;
pub mod bump;
pub mod cuts;
pub mod error;
pub mod exec;
pub mod expr;
pub mod fd;
pub mod linalg;
pub mod metrics;
pub mod optim;
pub mod oracles;
pub mod sampling;
pub mod series;
pub mod solver;
pub mod stochastic;

pub use error::{Error, Result};
pub use exec::Exec;
