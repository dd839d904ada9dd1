//! Numerical solver and stability certification for impulsive implicit
//! Ψ-Hilfer fractional differential equations with time delay.
//!
//! The solution is computed from the equivalent Volterra integral equation
//! by Picard iteration on a grid, in the weighted form
//! `(Ψ(t) − Ψ(0))^{1−ρ} u(t)` that stays bounded at the origin.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod error;
pub mod export;
pub mod expr;
pub mod picard;
pub mod problem;
pub mod psi;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
