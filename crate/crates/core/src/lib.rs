//! U-statistics with Banach-valued kernels.
//!
//! The crate evaluates complete, index-weighted and incomplete U-statistics,
//! computes their Hoeffding decomposition, and runs Monte Carlo experiments
//! that put empirical deviation and moment behaviour next to the right-hand
//! sides of the corresponding inequalities.
//!
//! Module map:
//!
//! - [`combinatorics`]: the index sets `Inc^m_n`, ranked colexicographically
//! - [`spaces`]: finite-dimensional `l^s` codomains and their smoothness
//! - [`kernels`]: sample laws, kernels, and the expression language
//! - [`hoeffding`]: projections `h^I`, level components `h^(c)`, degeneracy tests
//! - [`ustat`]: complete U-statistics, running maxima, interpolated paths
//! - [`incomplete`]: subsampling designs and incomplete U-statistics
//! - [`holder`]: Hölder norms of piecewise-linear paths, dyadic tightness statistic
//! - [`tails`]: empirical tails and the tail functionals of the bounds
//! - [`harness`]: end-to-end experiments and their reports
//! - [`cli`]: the `ustat` command-line driver

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod combinatorics;
pub mod error;
pub mod expr;
pub mod harness;
pub mod hoeffding;
pub mod holder;
pub mod incomplete;
pub mod kernels;
pub mod numeric;
pub mod rng;
pub mod spaces;
pub mod tails;
pub mod ustat;

pub use combinatorics::{count_tuples, enumerate_tuples, rank_tuple, unrank_tuple, IncreasingTuple};
pub use error::{Error, Result};
pub use kernels::{builtin_kernel, sample_iid, Distribution, Kernel, KernelSpec, Point};
pub use rng::StreamSeed;
pub use spaces::BanachSpace;
