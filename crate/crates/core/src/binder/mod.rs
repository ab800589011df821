//! Problem instances: per-tone channels and noise covariances, band plans,
//! power and mask constraints, synthetic binder generation and the scenario
//! file formats.

mod grid;
mod io;
mod model;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::{hermitize, CMatrix, HermitianPsd};

pub use grid::{
    db_to_linear, dbm_hz_to_w_per_tone, dbm_to_w, dmt_grid, w_to_dbm, BandPlan, Direction, VDSL2_DOWNSTREAM_BANDS,
    VDSL2_UPSTREAM_BANDS,
};
pub use io::{
    load_scenario, read_channel_csv, save_scenario, scenario_from_json, scenario_to_json, write_channel_csv,
    ChannelRecord,
};
pub(crate) use io::{parse_error, to_json_sig17};
pub use model::{
    alien_covariance, direct_channel, gen_binder, vdsl2_mask, BinderModelParams, DisturberKind, LinkConfig, DEFAULT_DELTA_F_HZ,
    DEFAULT_AWGN_DBM_HZ, DEFAULT_COUPLING_LENGTH_M, DEFAULT_F_MAX_HZ, DEFAULT_F_SYM_HZ, DEFAULT_GAMMA_DB,
    DEFAULT_LOOP_LENGTH_M, DEFAULT_N_LINES, DEFAULT_P_LINE_DBM,
};

/// Which constraint set the optimizer enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintMode {
    #[serde(rename = "total")]
    Total,
    #[serde(rename = "per-modem")]
    PerModem,
    #[serde(rename = "per-modem-mask")]
    PerModemMask,
}

impl ConstraintMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintMode::Total => "total",
            ConstraintMode::PerModem => "per-modem",
            ConstraintMode::PerModemMask => "per-modem-mask",
        }
    }
}

impl std::str::FromStr for ConstraintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "total" => Ok(ConstraintMode::Total),
            "per-modem" => Ok(ConstraintMode::PerModem),
            "per-modem-mask" => Ok(ConstraintMode::PerModemMask),
            other => Err(Error::InvalidInput(format!("unknown constraint mode {other:?}"))),
        }
    }
}

/// One piecewise-constant segment of a PSD table, level in dBm/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdSegment {
    pub f_lo: f64,
    pub f_hi: f64,
    pub level: f64,
}

/// Piecewise-constant PSD in dBm/Hz. Frequencies outside every segment
/// have no defined level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct PsdTable(pub Vec<PsdSegment>);

impl PsdTable {
    pub fn level_dbm_hz(&self, f: f64) -> Option<f64> {
        self.0.iter().find(|s| f >= s.f_lo && f <= s.f_hi).map(|s| s.level)
    }

    /// W/Hz at `f`, zero outside the table.
    pub fn w_per_hz(&self, f: f64) -> f64 {
        self.level_dbm_hz(f).map_or(0.0, |x| dbm_to_w(x))
    }
}

/// Per-modem power budgets as stored in the scenario file.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerSpec {
    Dbm(Vec<f64>),
    Watts(Vec<f64>),
}

impl PowerSpec {
    fn len(&self) -> usize {
        match self {
            PowerSpec::Dbm(v) | PowerSpec::Watts(v) => v.len(),
        }
    }

    fn to_watts(&self) -> Vec<f64> {
        match self {
            PowerSpec::Dbm(v) => v.iter().map(|&x| dbm_to_w(x)).collect(),
            PowerSpec::Watts(v) => v.clone(),
        }
    }
}

/// Spectral masks as stored in the scenario file.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskSpec {
    None,
    /// One dBm/Hz table per line; tones outside every segment are unmasked.
    DbmHz(Vec<PsdTable>),
    /// Watts per tone, indexed `[line][tone position]`; `None` is unmasked.
    WattsPerTone(Vec<Vec<Option<f64>>>),
}

/// Channel and noise covariance of one tone.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneChannel {
    pub index: usize,
    pub freq: f64,
    pub h: CMatrix,
    pub r: HermitianPsd,
}

impl ToneChannel {
    pub fn new(index: usize, freq: f64, h: CMatrix, r: HermitianPsd) -> Result<Self> {
        if !h.is_square() || h.rows() != r.dim() {
            return Err(Error::DimensionMismatch(format!(
                "tone {index}: H is {}x{}, R is {}x{}",
                h.rows(),
                h.cols(),
                r.dim(),
                r.dim()
            )));
        }
        Ok(ToneChannel { index, freq, h, r })
    }

    /// A tone whose channel is identically zero carries nothing.
    pub fn is_dead(&self) -> bool {
        self.h.is_zero()
    }

    pub fn n_lines(&self) -> usize {
        self.h.rows()
    }
}

/// Everything the plain constructor needs; derived tables are computed by
/// [`Scenario::new`].
#[derive(Debug, Clone)]
pub struct ScenarioParts {
    pub n_lines: usize,
    pub delta_f: f64,
    pub f_sym: f64,
    pub gamma_db: f64,
    pub constraint_mode: ConstraintMode,
    pub bands: BandPlan,
    pub power: PowerSpec,
    pub mask: MaskSpec,
    pub tones: Vec<ToneChannel>,
}

/// A full problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    n_lines: usize,
    delta_f: f64,
    f_sym: f64,
    gamma_db: f64,
    constraint_mode: ConstraintMode,
    bands: BandPlan,
    power: PowerSpec,
    mask_spec: MaskSpec,
    tones: Vec<ToneChannel>,
    p_tot: Vec<f64>,
    mask: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn new(parts: ScenarioParts) -> Result<Self> {
        let ScenarioParts { n_lines, delta_f, f_sym, gamma_db, constraint_mode, bands, power, mask, tones } = parts;
        if n_lines == 0 {
            return Err(Error::InvalidInput("scenario needs at least one line".into()));
        }
        if !(delta_f > 0.0 && delta_f.is_finite()) || !(f_sym > 0.0 && f_sym.is_finite()) {
            return Err(Error::InvalidInput("delta_f and f_sym must be positive".into()));
        }
        if !(gamma_db >= 0.0 && gamma_db.is_finite()) {
            return Err(Error::InvalidInput(format!("SNR gap must be >= 0 dB, got {gamma_db}")));
        }
        if power.len() != n_lines {
            return Err(Error::DimensionMismatch(format!("{} power budgets for {n_lines} lines", power.len())));
        }
        let p_tot = power.to_watts();
        if p_tot.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidInput("power budgets must be finite and non-negative".into()));
        }
        for t in &tones {
            if t.h.rows() != n_lines || t.h.cols() != n_lines || t.r.dim() != n_lines {
                return Err(Error::DimensionMismatch(format!(
                    "tone {}: expected {n_lines}x{n_lines} matrices, H is {}x{}, R is {}x{}",
                    t.index,
                    t.h.rows(),
                    t.h.cols(),
                    t.r.dim(),
                    t.r.dim()
                )));
            }
        }
        let mask_table = mask_table(&mask, n_lines, &tones, delta_f)?;
        Ok(Scenario {
            n_lines,
            delta_f,
            f_sym,
            gamma_db,
            constraint_mode,
            bands,
            power,
            mask_spec: mask,
            tones,
            p_tot,
            mask: mask_table,
        })
    }

    /// Small hand-built instance: one `(H, R)` pair per tone, budgets in W,
    /// default grid spacing and symbol rate, no masks, per-modem mode.
    pub fn from_matrices(channels: Vec<(CMatrix, CMatrix)>, budgets_w: Vec<f64>, gamma_db: f64) -> Result<Self> {
        let n_lines = budgets_w.len();
        let tones = channels
            .into_iter()
            .enumerate()
            .map(|(k, (h, r))| ToneChannel::new(k, (k + 1) as f64 * DEFAULT_DELTA_F_HZ, h, hermitize(&r)?))
            .collect::<Result<Vec<_>>>()?;
        Scenario::new(ScenarioParts {
            n_lines,
            delta_f: DEFAULT_DELTA_F_HZ,
            f_sym: DEFAULT_F_SYM_HZ,
            gamma_db,
            constraint_mode: ConstraintMode::PerModem,
            bands: BandPlan::full(DEFAULT_F_MAX_HZ, Direction::Downstream),
            power: PowerSpec::Watts(budgets_w),
            mask: MaskSpec::None,
            tones,
        })
    }

    /// Same scenario with masks in W per tone (`None` unmasked), in
    /// per-modem-mask mode.
    pub fn with_mask_watts(&self, mask: Vec<Vec<Option<f64>>>) -> Result<Scenario> {
        let mut parts = self.parts();
        parts.mask = MaskSpec::WattsPerTone(mask);
        parts.constraint_mode = ConstraintMode::PerModemMask;
        Scenario::new(parts)
    }

    pub fn n_lines(&self) -> usize {
        self.n_lines
    }

    pub fn n_tones(&self) -> usize {
        self.tones.len()
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    pub fn f_sym(&self) -> f64 {
        self.f_sym
    }

    pub fn gamma_db(&self) -> f64 {
        self.gamma_db
    }

    /// Linear SNR gap.
    pub fn gamma(&self) -> f64 {
        db_to_linear(self.gamma_db)
    }

    pub fn constraint_mode(&self) -> ConstraintMode {
        self.constraint_mode
    }

    pub fn bands(&self) -> &BandPlan {
        &self.bands
    }

    pub fn direction(&self) -> Direction {
        self.bands.direction()
    }

    pub fn power_spec(&self) -> &PowerSpec {
        &self.power
    }

    pub fn mask_spec(&self) -> &MaskSpec {
        &self.mask_spec
    }

    pub fn tones(&self) -> &[ToneChannel] {
        &self.tones
    }

    /// Per-modem budgets in W.
    pub fn p_tot(&self) -> &[f64] {
        &self.p_tot
    }

    /// Scalar budget used in total-power mode.
    pub fn total_budget(&self) -> f64 {
        self.p_tot.iter().sum()
    }

    /// Mask in W per tone, `[line][tone position]`, `+inf` where unmasked.
    pub fn mask(&self) -> &[Vec<f64>] {
        &self.mask
    }

    pub fn has_finite_mask(&self) -> bool {
        self.mask.iter().flatten().any(|m| m.is_finite())
    }

    pub fn with_mode(&self, mode: ConstraintMode) -> Scenario {
        let mut s = self.clone();
        s.constraint_mode = mode;
        s
    }

    /// Same scenario with every mask removed.
    pub fn without_mask(&self) -> Scenario {
        let mut s = self.clone();
        s.mask_spec = MaskSpec::None;
        s.mask = vec![vec![f64::INFINITY; s.tones.len()]; s.n_lines];
        s
    }

    /// Keeps only the `coordinated` lines. Every other binder line becomes an
    /// external disturber transmitting at its mask (or, when unmasked, its
    /// budget spread flat over the active tones) and is folded into the
    /// noise covariance through its coupling column.
    pub fn coordinate_subset(&self, coordinated: &[usize]) -> Result<Scenario> {
        if coordinated.is_empty() || coordinated.iter().any(|&n| n >= self.n_lines) {
            return Err(Error::InvalidInput(format!(
                "coordinated set {coordinated:?} must be non-empty and within 0..{}",
                self.n_lines
            )));
        }
        let mut seen = vec![false; self.n_lines];
        for &n in coordinated {
            if std::mem::replace(&mut seen[n], true) {
                return Err(Error::InvalidInput(format!("line {n} listed twice")));
            }
        }
        let others: Vec<usize> = (0..self.n_lines).filter(|n| !seen[*n]).collect();
        let n_active = self.tones.len().max(1) as f64;
        let mut tones = Vec::with_capacity(self.tones.len());
        for (pos, t) in self.tones.iter().enumerate() {
            let h = t.h.select(coordinated, coordinated);
            let mut r = t.r.as_matrix().select(coordinated, coordinated);
            for &m in &others {
                let level = self.mask[m][pos];
                let tx = if level.is_finite() { level } else { self.p_tot[m] / n_active };
                if tx <= 0.0 {
                    continue;
                }
                let col: Vec<_> = coordinated.iter().map(|&n| t.h[(n, m)]).collect();
                for a in 0..coordinated.len() {
                    for b in 0..=a {
                        r[(a, b)] += col[a] * col[b].conj() * tx;
                    }
                }
            }
            tones.push(ToneChannel::new(t.index, t.freq, h, HermitianPsd::from_lower(r))?);
        }
        let power = match &self.power {
            PowerSpec::Dbm(v) => PowerSpec::Dbm(coordinated.iter().map(|&n| v[n]).collect()),
            PowerSpec::Watts(v) => PowerSpec::Watts(coordinated.iter().map(|&n| v[n]).collect()),
        };
        let mask = match &self.mask_spec {
            MaskSpec::None => MaskSpec::None,
            MaskSpec::DbmHz(t) => MaskSpec::DbmHz(coordinated.iter().map(|&n| t[n].clone()).collect()),
            MaskSpec::WattsPerTone(t) => MaskSpec::WattsPerTone(coordinated.iter().map(|&n| t[n].clone()).collect()),
        };
        Scenario::new(ScenarioParts {
            n_lines: coordinated.len(),
            delta_f: self.delta_f,
            f_sym: self.f_sym,
            gamma_db: self.gamma_db,
            constraint_mode: self.constraint_mode,
            bands: self.bands.clone(),
            power,
            mask,
            tones,
        })
    }

    pub fn parts(&self) -> ScenarioParts {
        ScenarioParts {
            n_lines: self.n_lines,
            delta_f: self.delta_f,
            f_sym: self.f_sym,
            gamma_db: self.gamma_db,
            constraint_mode: self.constraint_mode,
            bands: self.bands.clone(),
            power: self.power.clone(),
            mask: self.mask_spec.clone(),
            tones: self.tones.clone(),
        }
    }
}

fn mask_table(mask: &MaskSpec, n_lines: usize, tones: &[ToneChannel], delta_f: f64) -> Result<Vec<Vec<f64>>> {
    let table = match mask {
        MaskSpec::None => vec![vec![f64::INFINITY; tones.len()]; n_lines],
        MaskSpec::DbmHz(tables) => {
            if tables.len() != n_lines {
                return Err(Error::DimensionMismatch(format!("{} mask tables for {n_lines} lines", tables.len())));
            }
            tables
                .iter()
                .map(|t| {
                    tones
                        .iter()
                        .map(|tc| t.level_dbm_hz(tc.freq).map_or(f64::INFINITY, |x| dbm_hz_to_w_per_tone(x, delta_f)))
                        .collect()
                })
                .collect()
        }
        MaskSpec::WattsPerTone(rows) => {
            if rows.len() != n_lines || rows.iter().any(|r| r.len() != tones.len()) {
                return Err(Error::DimensionMismatch(format!(
                    "mask table must be {n_lines} x {} entries",
                    tones.len()
                )));
            }
            rows.iter().map(|r| r.iter().map(|m| m.unwrap_or(f64::INFINITY)).collect()).collect()
        }
    };
    if table.iter().flatten().any(|m| m.is_nan() || *m < 0.0) {
        return Err(Error::InvalidInput("mask levels must be non-negative".into()));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Scenario {
        let t = ToneChannel::new(0, 1e5, CMatrix::identity(2), HermitianPsd::identity(2)).unwrap();
        Scenario::new(ScenarioParts {
            n_lines: 2,
            delta_f: 4312.5,
            f_sym: 4000.0,
            gamma_db: 0.0,
            constraint_mode: ConstraintMode::PerModem,
            bands: BandPlan::full(1e6, Direction::Downstream),
            power: PowerSpec::Watts(vec![1.0, 2.0]),
            mask: MaskSpec::None,
            tones: vec![t],
        })
        .unwrap()
    }

    #[test]
    fn derived_tables() {
        let s = tiny();
        assert_eq!(s.p_tot(), &[1.0, 2.0]);
        assert_eq!(s.total_budget(), 3.0);
        assert!(s.mask().iter().flatten().all(|m| m.is_infinite()));
        assert_eq!(s.gamma(), 1.0);
    }

    #[test]
    fn rejects_wrong_dimensions() {
        let mut parts = tiny().parts();
        parts.power = PowerSpec::Watts(vec![1.0]);
        assert!(matches!(Scenario::new(parts), Err(Error::DimensionMismatch(_))));

        let mut parts = tiny().parts();
        parts.tones[0].h = CMatrix::identity(3);
        assert!(matches!(Scenario::new(parts), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn dbm_mask_outside_segments_is_unmasked() {
        let mut parts = tiny().parts();
        let table = PsdTable(vec![PsdSegment { f_lo: 0.0, f_hi: 5e4, level: -40.0 }]);
        parts.mask = MaskSpec::DbmHz(vec![table.clone(), table]);
        let s = Scenario::new(parts).unwrap();
        assert!(s.mask()[0][0].is_infinite());
    }

    #[test]
    fn subset_folds_other_lines_into_noise() {
        let h = CMatrix::from_real_rows(&[&[1.0, 0.5], &[0.25, 1.0]]).unwrap();
        let mut parts = tiny().parts();
        parts.tones[0].h = h;
        parts.mask = MaskSpec::WattsPerTone(vec![vec![Some(0.1)], vec![Some(0.4)]]);
        let s = Scenario::new(parts).unwrap();
        let sub = s.coordinate_subset(&[0]).unwrap();
        assert_eq!(sub.n_lines(), 1);
        // R = 1 + 0.4 * 0.5^2
        assert!((sub.tones()[0].r[(0, 0)].re - 1.1).abs() < 1e-15);
        assert_eq!(sub.p_tot(), &[1.0]);
        let all = s.coordinate_subset(&[0, 1]).unwrap();
        assert_eq!(all.tones()[0].r, s.tones()[0].r);
    }
}
