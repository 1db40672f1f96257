//! Measure and extrapolate the data efficiency of task-oriented semantic
//! parsers.
//!
//! The workflow has four stages:
//!
//! 1. [`sampling`] draws target-domain subsets on a logarithmic size
//!    schedule.
//! 2. [`protocol`] builds fine-tuning manifests (source rows plus a target
//!    subset), dispatches them to a [`protocol::Runner`] and records exact
//!    match in a [`protocol::Ledger`].
//! 3. [`curve`] fits `h(x) = a / x^b + c` to the (subset %, exact match %)
//!    points.
//! 4. [`curve::CurveModel::invert`] answers how much target data a parser
//!    needs for a given exact match.
//!
//! [`frame`] and [`dataset`] handle bracketed frames and corpora, and
//! [`analysis`] aggregates seeds, compares models and groups intents by
//! complexity class.

pub mod analysis;
pub mod cli;
pub mod curve;
pub mod dataset;
pub mod frame;
pub mod protocol;
pub mod report;
pub mod rng;
pub mod sampling;

pub use curve::{fit_curve, CurveModel, EfficiencyPoint};
pub use dataset::{load_corpus, CorpusTable};
pub use frame::{exact_match, parse_frame, serialize_frame, Frame};
pub use sampling::{make_schedule, Schedule, Subset, SubsetSpec};
