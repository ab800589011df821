//! Transmit/receive matrices of the two-sided solution, a Monte Carlo check
//! of the parallel-channel decomposition, and one-sided baselines.

mod baseline;
mod txrx;

pub use baseline::{dp_baseline, zf_baseline};
pub use txrx::{make_txrx, monte_carlo_siso, MonteCarloReport, TxRxPair};
