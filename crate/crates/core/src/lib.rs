//! Optimal transmit spectra and transceiver structures for fully
//! coordinated (two-sided) DSL vector channels with self crosstalk and
//! spatially correlated external noise.
//!
//! * [`numlin`]: Cholesky, triangular solves and complex SVD.
//! * [`binder`]: problem instances, synthetic binder generation and file formats.
//! * [`spectra`]: per-tone solve, multiplier searches, truncation heuristic, KKT audit.
//! * [`structures`]: transmit/receive matrices, Monte Carlo check, one-sided baselines.
//! * [`harness`]: experiment configuration, sweeps and plot-data output.

pub mod binder;
pub mod error;
pub mod harness;
pub mod numlin;
pub mod spectra;
pub mod structures;

pub use binder::{BandPlan, BinderModelParams, ConstraintMode, Direction, Scenario, ToneChannel};
pub use error::{Error, Result};
pub use numlin::{CMatrix, HermitianPsd, SvdFactors};
pub use spectra::{Allocation, Multipliers, SolverOptions, ToneSolution};
pub use structures::TxRxPair;
