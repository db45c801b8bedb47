//! Condensing zero-range dynamics on a finite set of sites.
//!
//! The crate is organized around one model family: `kappa` sites carry `n`
//! indistinguishable particles, a particle leaves a site holding `k` of them
//! at rate `g(k)` and picks its destination with a symmetric kernel `r`.
//! The jump rates are chosen so that for large `n` almost all particles pile
//! up on a single site and the pile relocates on the time scale
//! `n^2 log n`.  Everything here either computes with that model exactly
//! (partition tables, sparse generators, potential theory), samples it
//! (kinetic Monte Carlo), or builds the special test functions used to
//! bound how fast the pile moves.

pub mod cutoff;
pub mod error;
pub mod exact;
pub mod metastable;
pub mod simulate;
pub mod superharmonic;
pub mod tubes;
pub mod walk;
pub mod zrp;

mod numeric;

pub use error::{CoreError, Result};
