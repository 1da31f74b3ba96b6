//! Paired-sample location tests for functional data.
//!
//! Implements spatial sign and spatial signed-rank tests for difference
//! curves in discretized L2\[a,b\], the mean-based competitor tests T1, T2,
//! T3, null calibration by simulated weighted chi-square laws, process
//! generators (Brownian motion and t processes via Karhunen-Loeve expansion,
//! contamination mixtures), asymptotic power under shrinking shifts, and a
//! simulation harness that reproduces the size/power/robustness experiments.

pub mod error;
pub mod fspace;
pub mod harness;
pub mod meantests;
pub mod nulldist;
pub mod procsim;
pub mod seeding;
pub mod shrinkpower;
pub mod signstats;
pub mod specops;

pub use error::{Error, Result};
pub use fspace::{axpby, Curve, Grid, PairedDiffSample};
pub use nulldist::CalibrationConfig;
pub use signstats::{TestId, TestReport};
