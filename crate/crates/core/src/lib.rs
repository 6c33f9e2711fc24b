//! Trace-driven cache replacement simulation.
//!
//! The crate models a single unit-size cache of capacity `K` serving a
//! catalog of `N` contents. Requests are replayed one timeslot at a time
//! through [`cache::simulate`], which asks a [`cache::Policy`] for a victim
//! whenever a miss hits a full cache.
//!
//! Policies provided:
//!
//! - rule-based baselines ([`baselines`]): FIFO, K-LRU, LFU;
//! - the offline optimum ([`oracle::BeladyPolicy`]);
//! - the learning-aided policy ([`la_e2::LaE2Policy`]), which narrows the
//!   cache to the `k` least popular items according to a periodically
//!   retrained popularity model ([`predictor`]) and then picks the victim
//!   with a sliding-window UCB score ([`swucb`]).
//!
//! [`experiment`] wires these into the comparison, top-k sweep, ablation and
//! containment runs driven by the `lae2` command line tool.

pub mod baselines;
pub mod cache;
pub mod error;
pub mod experiment;
pub mod la_e2;
pub mod oracle;
pub mod predictor;
pub mod swucb;
pub mod trace;

pub use cache::{simulate, CacheView, MetricsConfig, MetricsSeries, Policy, SimulationOutcome};
pub use error::{Error, Result};
pub use trace::{ContentId, Request, SyntheticSpec, Trace};
