//! Fixtures shared by the solver benchmarks.

use dsmopt_core::harness::default_scenario;
use dsmopt_core::{Direction, Scenario};

/// The default 8-line scenario and its first `k` lines with the rest folded
/// into the noise.
pub fn fixture(direction: Direction, k: usize) -> Scenario {
    let s = default_scenario(direction).expect("default scenario");
    if k == s.n_lines() {
        s
    } else {
        s.coordinate_subset(&(0..k).collect::<Vec<_>>()).expect("subset")
    }
}
