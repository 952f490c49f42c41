//! Quenched-disorder laboratory for branching random walks in space-time
//! i.i.d. random environments and the directed polymers dual to them.
//!
//! A population on `Z^d` evolves in discrete time: each particle jumps to
//! one of its `2d` neighbors uniformly, then is replaced by a random number
//! of children drawn from the offspring law attached to the site it left.
//! The offspring laws form an i.i.d. random field over space-time (the
//! environment). Conditional on the environment, the expected occupation
//! numbers solve a linear recursion: the partition function of a directed
//! polymer with multiplicative weights `m_{t,x} / 2d`. The crate implements
//! both sides of that correspondence and the estimators connecting them:
//!
//! - [`env`]: offspring laws, finite disorder families, counter-based
//!   environment realizations, and exact environment-level moments.
//! - [`lattice`]: admissible rational directions, exact walk probabilities,
//!   and the walk's large-deviation rate function.
//! - [`polymer`]: sparse log-domain partition fields, global and
//!   directional free-energy estimators with bracketing bounds,
//!   superadditivity and concentration diagnostics, and the weak/strong
//!   disorder classification.
//! - [`brw`]: particle-level simulation, survival estimators, the embedded
//!   single-site branching chain, and martingale diagnostics.
//! - [`genfun`]: generating-function fields, the extinction-probability
//!   operator, and the sandwich of survival bounds around the true quenched
//!   survival probability.
//! - [`stats`]: confidence intervals, the bounded-increment concentration
//!   bound, paired comparisons, and slope fits.
//!
//! All randomness derives from a single master seed through keyed counters
//! ([`numeric::SeedChain`]), so every result in the crate is reproducible
//! bit for bit given its configuration.

pub mod brw;
pub mod env;
pub mod error;
pub mod genfun;
pub mod lattice;
pub mod numeric;
pub mod polymer;
pub mod stats;

pub use error::{Error, Result};
pub use lattice::Site;
