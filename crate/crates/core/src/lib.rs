//! Simulation and verification toolkit for empirical processes of
//! stationary dependent sequences.

pub mod chaining;
pub mod distmodel;
pub mod empproc;
pub mod error;
pub mod pl;
pub mod procgen;
pub mod reduction;
pub mod rng;
pub mod stats;
pub mod verify;

pub use chaining::{ChainTerms, DyadicRefinement, Kernel, Partition, SmoothedProcess};
pub use distmodel::{DistributionModel, EmpiricalReference, ModulusReport};
pub use empproc::{EmpiricalProcess, StepFunction};
pub use error::{Error, Result};
pub use pl::PiecewiseLinear;
pub use procgen::{Generator, ProcessKind, ProcessPath, ProcessSpec};
pub use reduction::{BadInterval, BadIntervalSet, ReductionMap};
pub use verify::{CltReport, CovKernelReport, ErgodicityReport, LipschitzFn, Moment4Report, TightnessReport};

/// Formats a float with 17 significant digits, the form used in every CSV
/// output so values round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
