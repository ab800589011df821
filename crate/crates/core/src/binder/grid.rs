use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transmission direction of a band plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Downstream,
    Upstream,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Downstream => "downstream",
            Direction::Upstream => "upstream",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "downstream" | "ds" | "down" => Ok(Direction::Downstream),
            "upstream" | "us" | "up" => Ok(Direction::Upstream),
            other => Err(Error::InvalidInput(format!("unknown direction {other:?}"))),
        }
    }
}

/// VDSL2 band plan 998, downstream bands.
pub const VDSL2_DOWNSTREAM_BANDS: [[f64; 2]; 2] = [[138e3, 3.75e6], [5.2e6, 8.5e6]];
/// VDSL2 band plan 998, upstream bands.
pub const VDSL2_UPSTREAM_BANDS: [[f64; 2]; 3] = [[25e3, 138e3], [3.75e6, 5.2e6], [8.5e6, 12e6]];

/// Ordered, disjoint closed frequency intervals in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPlan {
    bands: Vec<[f64; 2]>,
    direction: Direction,
}

impl BandPlan {
    pub fn new(bands: Vec<[f64; 2]>, direction: Direction) -> Result<Self> {
        for b in &bands {
            if !(b[0].is_finite() && b[1].is_finite()) || b[0] < 0.0 || b[0] > b[1] {
                return Err(Error::InvalidInput(format!("bad band [{}, {}]", b[0], b[1])));
            }
        }
        for w in bands.windows(2) {
            if w[0][1] >= w[1][0] {
                return Err(Error::InvalidInput(format!(
                    "bands [{}, {}] and [{}, {}] overlap or are out of order",
                    w[0][0], w[0][1], w[1][0], w[1][1]
                )));
            }
        }
        Ok(BandPlan { bands, direction })
    }

    pub fn vdsl2_downstream() -> Self {
        BandPlan { bands: VDSL2_DOWNSTREAM_BANDS.to_vec(), direction: Direction::Downstream }
    }

    pub fn vdsl2_upstream() -> Self {
        BandPlan { bands: VDSL2_UPSTREAM_BANDS.to_vec(), direction: Direction::Upstream }
    }

    pub fn vdsl2(direction: Direction) -> Self {
        match direction {
            Direction::Downstream => Self::vdsl2_downstream(),
            Direction::Upstream => Self::vdsl2_upstream(),
        }
    }

    pub fn full(f_max: f64, direction: Direction) -> Self {
        BandPlan { bands: vec![[0.0, f_max]], direction }
    }

    pub fn bands(&self) -> &[[f64; 2]] {
        &self.bands
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn contains(&self, f: f64) -> bool {
        self.bands.iter().any(|b| f >= b[0] && f <= b[1])
    }
}

/// Active DMT tones: tone `k` sits at `(k + 1) * delta_f` and is kept when it
/// falls inside a band of `plan`. Returns `(k, freq)` pairs.
pub fn dmt_grid(f_max: f64, delta_f: f64, plan: &BandPlan) -> Result<Vec<(usize, f64)>> {
    if !(delta_f > 0.0) || !f_max.is_finite() || f_max < delta_f {
        return Err(Error::InvalidInput(format!("need f_max >= delta_f > 0 (f_max {f_max}, delta_f {delta_f})")));
    }
    let n_tones = tone_count(f_max, delta_f);
    let active: Vec<(usize, f64)> =
        (0..n_tones).map(|k| (k, (k + 1) as f64 * delta_f)).filter(|&(_, f)| plan.contains(f)).collect();
    if active.is_empty() {
        return Err(Error::EmptyBand);
    }
    Ok(active)
}

/// Largest `n` with `n * delta_f <= f_max`.
fn tone_count(f_max: f64, delta_f: f64) -> usize {
    let mut n = (f_max / delta_f).floor() as usize;
    while n > 0 && n as f64 * delta_f > f_max {
        n -= 1;
    }
    while (n + 1) as f64 * delta_f <= f_max {
        n += 1;
    }
    n
}

/// `x` dBm/Hz to watts on one tone of width `delta_f`.
pub fn dbm_hz_to_w_per_tone(level_dbm_hz: f64, delta_f: f64) -> f64 {
    10f64.powf((level_dbm_hz - 30.0) / 10.0) * delta_f
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
