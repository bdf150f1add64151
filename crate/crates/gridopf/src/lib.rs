//! Security-constrained AC optimal power flow toolkit.
//!
//! The crate is organized around one immutable [`model::Network`] shared by:
//!
//! - [`acpf`]: polar branch flows, bus balance, Newton power flow;
//! - [`contingency`]: post-contingency response with voltage-regulator and
//!   droop complementarity;
//! - [`opf`]: the penalized base-case optimizer with contingency screening
//!   and iterative hedging;
//! - [`evaluator`]: independent solution evaluation, worst-case fallback;
//! - [`scoring`]: geometric-mean and performance-profile scoring plus
//!   difficulty metrics;
//! - [`io`]: the instance format and the base/contingency solution files;
//! - [`harness`]: the two-phase batch entry points (code1/code2/evaluate/
//!   score) used by the CLI.
//!
//! All electrical quantities are per-unit on a single system base; angles
//! are radians.
//!
//! ```
//! use std::time::Duration;
//! use gridopf::{evaluator, opf, samples};
//!
//! let net = samples::three_gen_ring();
//! assert!(net.validate().is_empty());
//!
//! let cfg = opf::SolveConfig {
//!     time_budget: Duration::from_secs(10),
//!     ..opf::SolveConfig::offline()
//! };
//! let base = opf::solve_base(&net, &cfg);
//! let report = evaluator::evaluate_base(&net, &base, 1e-6).unwrap();
//! assert!(report.feasible);
//! assert!(report.total <= evaluator::worst_case_score(&net));
//! ```

pub mod acpf;
pub mod contingency;
pub mod cost;
pub mod evaluator;
pub mod harness;
pub mod io;
pub mod model;
pub mod opf;
pub mod optim;
pub mod phasor;
pub mod samples;
pub mod scoring;
