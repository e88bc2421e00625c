//! Communication-compressed zeroth-order distributed optimization.
//!
//! `n` agents on an undirected graph jointly minimize
//! `f(x) = (1/n) Σ_i E_ξ[F_i(x, ξ)]` using only function values and
//! compressed neighbour messages. The crate provides:
//!
//! - [`graph`]: Laplacians, spectra, random geometric topologies;
//! - [`compress`]: generalized contractive compressors and bit accounting;
//! - [`zoracle`]: the two-point random-direction gradient estimator;
//! - [`problems`]: benchmark objectives;
//! - [`algorithm`] and [`schedule`]: CZSD and the uncompressed ZSD-PD baseline;
//! - [`metrics`] and [`runner`]: measurement, traces and summaries.
//!
//! ```
//! use czsd_core::runner::{run, RunConfig};
//!
//! let cfg = RunConfig::from_json(r#"{
//!     "problem": {"problem": "pl_quadratic", "n": 5, "p": 4},
//!     "topology": {"kind": "ring"},
//!     "iterations": 50
//! }"#).unwrap();
//! let out = run(&cfg).unwrap();
//! assert!(out.summary.final_p.unwrap().mean.is_finite());
//! ```

pub mod algorithm;
pub mod compress;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod problems;
pub mod rng;
pub mod runner;
pub mod schedule;
pub mod zoracle;

pub use algorithm::{Algorithm, BitConvention, RunState};
pub use compress::{CompressorKind, CompressorSpec};
pub use graph::Topology;
pub use linalg::Matrix;
pub use problems::{Problem, ProblemConfig};
pub use runner::{run, RunConfig};
pub use schedule::{Schedule, ScheduleConfig};
