//! Exact computation and sampling for one-dimensional pinning models built on
//! renewal processes.
//!
//! A configuration is a finite renewal trajectory `0 = S_0 < S_1 < ... < S_L = n`
//! with inter-arrival (gap) distribution `p(t) = ell(t) / t^(1+alpha)` (heavy
//! tailed, `ell` slowly varying) and Gibbs weight
//!
//! ```text
//!     w(S) = prod_i p(S_i - S_{i-1}) * exp( sum_i (h + omega_{S_i}) )
//! ```
//!
//! where `h` is the pinning strength and `omega` an i.i.d. charge (disorder)
//! sequence. Everything downstream — partition functions, contact-number laws,
//! contact marginals, exact path sampling, limit predictions for the largest
//! gap — is computed from this weight in log space, with no Monte Carlo error
//! anywhere except where sampling is explicitly requested.
//!
//! Module map:
//!
//! * [`law`] — gap laws: construction, normalization over infinite support,
//!   Laplace-transform moments, certified tail bounds.
//! * [`disorder`] — reproducible charge sequences with per-index counter-based
//!   RNG streams and a shift operator.
//! * [`dp`] — free and contact-constrained partition-function tables (the
//!   dynamic-programming core), contact-number laws, contact marginals.
//! * [`sampler`] — exact backward path sampling: free, conditioned on the
//!   contact number, soft-conditioned, and under a general contact functional.
//! * [`pure`] — the disorder-free model in closed form: free energy, contact
//!   fraction, large-deviation rate function, largest-gap predictions, exact
//!   gap-sum convolutions.
//! * [`observables`] — quenched estimates, gap statistics, window densities,
//!   local-CLT residuals, empirical rate functions.
//! * [`enumeration`] — brute-force reference implementations over the full
//!   path space, used to certify the fast routes at small sizes.
//! * [`cache`] — optional binary on-disk cache for expensive tables.
//!
//! All probability bookkeeping is done with natural logarithms; `f64::NEG_INFINITY`
//! is the canonical encoding of "impossible / zero mass" throughout.

#![forbid(unsafe_code)]

pub mod cache;
pub mod disorder;
pub mod dp;
pub mod enumeration;
pub mod law;
pub mod numerics;
pub mod observables;
pub mod pure;
pub mod sampler;

pub use disorder::{ChargeSequence, DisorderKind, DisorderSpec};
pub use dp::{ConstrainedTable, FreeTable, PolymerParams, SuffixTable};
pub use law::{InterArrivalLaw, LawSpec, SlowlyVarying};
