//! Directional-guidance VQA tooling: synthesizes guidance-labeled training
//! corpora from grounded VQA datasets and benchmarks vision-language oracles on
//! the six-way guidance task.

pub mod ingest;
pub mod oracle;
pub mod eval;
pub mod genset;
pub mod perturb;
pub mod scoring;
pub mod types;

pub use types::{BBox, Direction, GuidanceLabel, GuidanceSample, LetterMap, PerturbationSpec, Provenance, Ratio, VqaSample};
