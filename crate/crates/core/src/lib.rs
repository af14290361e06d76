//! Numerical certification of smooth integrability for diffeomorphisms.
//!
//! A map `f` is `(m, n-m)`-integrable when it admits `m` commuting vector
//! fields whose flows commute with `f`, and `n-m` functionally independent
//! first integrals shared by `f` and the fields. This crate checks those
//! conditions at sampled points and along integrated flows, builds the
//! standard constructions (linear families, affine symmetries, cotangent
//! lifts), and gathers orbit-level evidence such as rotation numbers,
//! Lyapunov exponents and hyperbolic periodic points.
//!
//! A passing certificate means no counterexample was found at the stated
//! tolerances; it is numerical evidence, not proof.

pub mod error;
pub mod catalog;
pub mod certify;
pub mod constructions;
pub mod dynamics;
pub mod expr;
pub mod numerics;
pub mod system;

pub use error::{Error, EvalError, EvalResult, Result};
