//! Exact discrete chaos calculus and Berry–Esseen (Kolmogorov distance)
//! bounds for functionals of finitely many independent random variables.
//!
//! Every coordinate carries a finite discrete law, so every expectation in
//! this crate is an exact weighted sum over the product outcome space. The
//! modules are layered bottom-up:
//!
//! - [`dist`]: finite laws, moment tables, inverse-CDF sampling.
//! - [`rng`]: counter-based reproducible random streams.
//! - [`chaos`]: outcome spaces, random functionals, canonical kernels,
//!   multiple integrals, the finite difference gradient, powers of the
//!   number operator, contractions, the product formula and the
//!   explicit-constant Kolmogorov bounds built from them.
//! - [`hoeffding`]: Hoeffding projections and U-statistic rate quantities.
//! - [`qform`]: quadratic forms in i.i.d. variables.
//! - [`ustat`]: degenerate weighted U-statistics.
//! - [`graphweigh`]: weighted subgraph counts in Erdős–Rényi graphs.
//! - [`mc`]: the normal CDF and exact / empirical Kolmogorov distances.
//! - [`io`]: JSON and CSV exchange formats.

pub mod chaos;
pub mod dist;
pub mod error;
pub mod graphweigh;
pub mod hoeffding;
pub mod io;
pub mod mc;
pub mod qform;
pub mod rng;
pub mod ustat;

pub use error::{Error, Result};
