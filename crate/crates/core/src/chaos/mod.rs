//! Finite discrete chaos calculus.
//!
//! Coordinates are independent finite laws. A time integral over the block
//! of coordinate `k` becomes `2 * E_{t ~ nu_k}`, and the half-length measure
//! `dt/2` becomes `E_{t ~ nu_k}`. Kernel norms use the probability measure
//! on every argument, which gives `E[I_d(f)^2] = d! * |f|^2`.

pub mod bounds;
pub mod contraction;
pub mod functional;
pub mod kernel;
pub mod operators;
pub mod space;

pub use bounds::{
    dki_bounds, fourth_moment_bound, master_bound, pure_order, sum_rate, DkiBounds,
    FourthMomentBound, MasterBound, SumRate,
};
pub use contraction::{
    contract, contraction_norm2, multiply, symmetrized_contraction, Contraction,
};
pub use functional::RandomFunctional;
pub use kernel::{subsets, ChaosKernel, DEGENERACY_TOL};
pub use operators::{
    apply_l_power, covariance_identity_check, decompose, grades, gradient, gradient_at,
    product_rule_residual, ChaosDecomposition, DiscreteGradient,
};
pub use space::{OutcomeSpace, MAX_OUTCOMES};
