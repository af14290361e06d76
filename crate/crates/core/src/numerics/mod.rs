//! Foundational numerics: jets, small dense linear algebra, flows.

pub mod function;
pub mod jet;
pub mod matrix;
pub mod ode;

pub use function::{
    jacobian, jacobian_fd, jacobian_with, value_and_jacobian_in, BlackBox, DerivativeMode, Formula,
    VectorFn,
};
pub use jet::{product, sum, Jet, Scalar};
pub use matrix::{eigen_moduli, is_hyperbolic, numerical_rank, qr_decompose, solve_generic, DenseMatrix, RankEstimate};
pub use ode::{integrate_flow, IntegratorConfig};
