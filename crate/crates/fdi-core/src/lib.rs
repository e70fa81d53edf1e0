//! Quantifies how inferable a target dataset is against a training dataset
//! from shared user features alone.
//!
//! The crate models users as sparse feature vectors and offers three
//! inference models — binary (XOR distance), weighted feature distance, and
//! cosine feature distribution — each with Top-K inference, per-user
//! sufficient-condition checkers, and aggregate (delta, K)-inferability
//! reports. An evaluation harness samples Bernoulli(p) replicas of a raw
//! dataset and sweeps (p, K) grids to produce inferability curves, and a
//! detector flags target users with no training counterpart.
//!
//! All numeric code is generic over the scalar type via [`num::Real`];
//! concrete `f32`/`f64` aliases are exported at the crate root.

pub mod archive;
pub mod binary;
pub mod dataset;
pub mod detect;
pub mod distance;
pub mod distribution;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod num;
mod rank;
pub mod report;
pub mod rng;

pub use dataset::{build_dataset, overlap, Dataset, Edge, FeatureSpace, OverlapView, Role, SparseProfile};
pub use error::{Error, Result};
pub use num::Real;
pub use report::{Candidate, CandidateSet, ModelKind, QuantReport};

/// `f64`-weighted aliases; the CLI and most callers use these.
pub type Profile64 = SparseProfile<f64>;
pub type Dataset64 = Dataset<f64>;
pub type Edge64 = Edge<f64>;

/// `f32`-weighted aliases for memory-tight callers.
pub type Profile32 = SparseProfile<f32>;
pub type Dataset32 = Dataset<f32>;
pub type Edge32 = Edge<f32>;
