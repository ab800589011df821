//! Synthetic binder: a low-pass direct channel, power-law FEXT between the
//! coordinated pairs, and rank-one alien disturbers folded into the noise
//! covariance. Magnitude laws and defaults are modelling choices that keep
//! the length- and frequency-dependent character of a 0.4 mm binder.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{dbm_hz_to_w_per_tone, dmt_grid, BandPlan, Direction};
use super::{ConstraintMode, MaskSpec, PowerSpec, PsdTable, Scenario, ScenarioParts, ToneChannel};
use crate::error::{Error, Result};
use crate::numlin::{CMatrix, HermitianPsd};

pub const DEFAULT_N_LINES: usize = 8;
pub const DEFAULT_DELTA_F_HZ: f64 = 4312.5;
pub const DEFAULT_F_SYM_HZ: f64 = 4000.0;
pub const DEFAULT_F_MAX_HZ: f64 = 12e6;
pub const DEFAULT_P_LINE_DBM: f64 = 14.5;
pub const DEFAULT_GAMMA_DB: f64 = 10.8;
pub const DEFAULT_AWGN_DBM_HZ: f64 = -140.0;
pub const DEFAULT_LOOP_LENGTH_M: f64 = 800.0;
pub const DEFAULT_COUPLING_LENGTH_M: f64 = 400.0;

const TAG_FEXT: u64 = 0x4645_5854;
const TAG_ALIEN: u64 = 0x414c_4e53;

#[derive(Deserialize)]
struct TableFile {
    segments: PsdTable,
}

fn embedded_table(json: &str) -> PsdTable {
    serde_json::from_str::<TableFile>(json).expect("embedded PSD table is valid").segments
}

/// Family of the alien disturbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisturberKind {
    Adsl2plus,
    Vdsl2,
}

impl DisturberKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DisturberKind::Adsl2plus => "adsl2plus",
            DisturberKind::Vdsl2 => "vdsl2",
        }
    }

    /// Stand-in PSD seen by victims in `direction`.
    pub fn psd(self, direction: Direction) -> PsdTable {
        match (self, direction) {
            (DisturberKind::Adsl2plus, Direction::Downstream) => {
                embedded_table(include_str!("../../data/adsl2plus_ds.json"))
            }
            (DisturberKind::Adsl2plus, Direction::Upstream) => {
                embedded_table(include_str!("../../data/adsl2plus_us.json"))
            }
            (DisturberKind::Vdsl2, Direction::Downstream) => embedded_table(include_str!("../../data/vdsl2_ds.json")),
            (DisturberKind::Vdsl2, Direction::Upstream) => embedded_table(include_str!("../../data/vdsl2_us.json")),
        }
    }
}

impl std::str::FromStr for DisturberKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adsl2plus" | "adsl2+" | "adsl" => Ok(DisturberKind::Adsl2plus),
            "vdsl2" | "vdsl" => Ok(DisturberKind::Vdsl2),
            other => Err(Error::InvalidInput(format!("unknown disturber kind {other:?}"))),
        }
    }
}

/// Stand-in VDSL2 transmit mask for the coordinated lines.
pub fn vdsl2_mask(direction: Direction) -> PsdTable {
    match direction {
        Direction::Downstream => embedded_table(include_str!("../../data/vdsl2_mask_ds.json")),
        Direction::Upstream => embedded_table(include_str!("../../data/vdsl2_mask_us.json")),
    }
}

/// Physical parameters of the synthetic binder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinderModelParams {
    pub loop_length_m: f64,
    pub coupling_length_m: f64,
    pub n_disturbers: usize,
    /// Disturber PSD, dBm/Hz segments.
    pub disturber_psd: PsdTable,
    /// FEXT coupling coefficient per metre and Hz^2.
    pub fext_gain: f64,
    /// Attenuation in Np/(m sqrt(Hz)).
    pub alpha_prop: f64,
    /// Attenuation in Np/(m Hz).
    pub beta_prop: f64,
    /// Propagation velocity in m/s.
    pub v_p: f64,
    pub awgn_dbm_hz: f64,
    pub seed: u64,
}

impl Default for BinderModelParams {
    fn default() -> Self {
        Self::for_direction(Direction::Downstream, DisturberKind::Vdsl2)
    }
}

impl BinderModelParams {
    pub fn for_direction(direction: Direction, kind: DisturberKind) -> Self {
        BinderModelParams {
            loop_length_m: DEFAULT_LOOP_LENGTH_M,
            coupling_length_m: DEFAULT_COUPLING_LENGTH_M,
            n_disturbers: 4,
            disturber_psd: kind.psd(direction),
            fext_gain: 2.5e-20,
            alpha_prop: 2.2e-6,
            beta_prop: 1.1e-10,
            v_p: 1.8e8,
            awgn_dbm_hz: DEFAULT_AWGN_DBM_HZ,
            seed: 42,
        }
    }

    fn validate(&self) -> Result<()> {
        let checks = [
            (self.loop_length_m > 0.0 && self.loop_length_m.is_finite(), "loop_length_m must be > 0"),
            (self.coupling_length_m >= 0.0 && self.coupling_length_m.is_finite(), "coupling_length_m must be >= 0"),
            (self.fext_gain >= 0.0 && self.fext_gain.is_finite(), "fext_gain must be >= 0"),
            (self.alpha_prop >= 0.0 && self.alpha_prop.is_finite(), "alpha_prop must be >= 0"),
            (self.beta_prop >= 0.0 && self.beta_prop.is_finite(), "beta_prop must be >= 0"),
            (self.v_p > 0.0 && self.v_p.is_finite(), "v_p must be > 0"),
            (self.awgn_dbm_hz.is_finite(), "awgn_dbm_hz must be finite"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::InvalidInput((*msg).into())),
            None => Ok(()),
        }
    }

    fn awgn_w_per_tone(&self, delta_f: f64) -> f64 {
        dbm_hz_to_w_per_tone(self.awgn_dbm_hz, delta_f)
    }
}

/// Constraints and link settings attached to a generated binder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub f_sym_hz: f64,
    pub gamma_db: f64,
    pub p_line_dbm: f64,
    /// Mask applied to every line; `None` leaves the lines unmasked.
    pub mask: Option<PsdTable>,
    pub constraint_mode: ConstraintMode,
}

impl LinkConfig {
    pub fn for_direction(direction: Direction) -> Self {
        LinkConfig {
            f_sym_hz: DEFAULT_F_SYM_HZ,
            gamma_db: DEFAULT_GAMMA_DB,
            p_line_dbm: DEFAULT_P_LINE_DBM,
            mask: Some(vdsl2_mask(direction)),
            constraint_mode: ConstraintMode::PerModem,
        }
    }
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self::for_direction(Direction::Downstream)
    }
}

/// Direct-path transfer function over `length_m`.
pub fn direct_channel(f: f64, length_m: f64, params: &BinderModelParams) -> Complex64 {
    let atten = (params.alpha_prop * f.sqrt() + params.beta_prop * f) * length_m;
    Complex64::from_polar((-atten).exp(), -2.0 * PI * f * length_m / params.v_p)
}

fn fext_coupling(f: f64, length_m: f64, params: &BinderModelParams) -> f64 {
    (params.fext_gain * length_m * f * f).sqrt()
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(tag)))
}

/// Phases of the FEXT paths, row-major `[victim][source]`.
fn fext_phases(params: &BinderModelParams, n_lines: usize) -> Vec<f64> {
    let mut rng = stream(params.seed, TAG_FEXT);
    (0..n_lines * n_lines).map(|_| rng.random::<f64>() * 2.0 * PI).collect()
}

/// Phases of the alien coupling vectors, `[disturber][line]`.
fn alien_phases(params: &BinderModelParams, n_lines: usize) -> Vec<f64> {
    let mut rng = stream(params.seed, TAG_ALIEN);
    (0..params.n_disturbers * n_lines).map(|_| rng.random::<f64>() * 2.0 * PI).collect()
}

fn alien_covariance_with(
    freq: f64,
    params: &BinderModelParams,
    n_lines: usize,
    delta_f: f64,
    phases: &[f64],
) -> HermitianPsd {
    let sigma2 = params.awgn_w_per_tone(delta_f);
    let mut r = CMatrix::from_real_diag(&vec![sigma2; n_lines]);
    let p_d = params.disturber_psd.w_per_hz(freq) * delta_f;
    if p_d > 0.0 && params.coupling_length_m > 0.0 {
        let mag = fext_coupling(freq, params.coupling_length_m, params)
            * direct_channel(freq, params.coupling_length_m, params).norm();
        for d in 0..params.n_disturbers {
            let a: Vec<Complex64> = (0..n_lines).map(|n| Complex64::from_polar(mag, phases[d * n_lines + n])).collect();
            for i in 0..n_lines {
                for j in 0..=i {
                    r[(i, j)] += a[i] * a[j].conj() * p_d;
                }
            }
        }
    }
    HermitianPsd::from_lower(r)
}

/// Noise covariance at `freq`: AWGN plus one rank-one term per alien
/// disturber.
pub fn alien_covariance(freq: f64, params: &BinderModelParams, n_lines: usize, delta_f: f64) -> HermitianPsd {
    alien_covariance_with(freq, params, n_lines, delta_f, &alien_phases(params, n_lines))
}

/// Generates a deterministic synthetic binder scenario.
pub fn gen_binder(
    params: &BinderModelParams,
    n_lines: usize,
    plan: &BandPlan,
    delta_f: f64,
    f_max: f64,
    link: &LinkConfig,
) -> Result<Scenario> {
    params.validate()?;
    if n_lines == 0 {
        return Err(Error::InvalidInput("n_lines must be >= 1".into()));
    }
    let grid = dmt_grid(f_max, delta_f, plan)?;
    let fext = fext_phases(params, n_lines);
    let alien = alien_phases(params, n_lines);
    let mut tones = Vec::with_capacity(grid.len());
    for (index, freq) in grid {
        let direct = direct_channel(freq, params.loop_length_m, params);
        let k = fext_coupling(freq, params.loop_length_m, params);
        if (n_lines - 1) as f64 * k >= 1.0 {
            return Err(Error::ModelDegenerate(format!(
                "FEXT coupling {k:.3e} at {freq} Hz breaks diagonal dominance for {n_lines} lines"
            )));
        }
        let h = CMatrix::from_fn(n_lines, n_lines, |r, c| {
            if r == c {
                direct
            } else if k == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                direct * Complex64::from_polar(k, fext[r * n_lines + c])
            }
        });
        let r = alien_covariance_with(freq, params, n_lines, delta_f, &alien);
        tones.push(ToneChannel::new(index, freq, h, r)?);
    }
    let mask = match &link.mask {
        Some(table) => MaskSpec::DbmHz(vec![table.clone(); n_lines]),
        None => MaskSpec::None,
    };
    Scenario::new(ScenarioParts {
        n_lines,
        delta_f,
        f_sym: link.f_sym_hz,
        gamma_db: link.gamma_db,
        constraint_mode: link.constraint_mode,
        bands: plan.clone(),
        power: PowerSpec::Dbm(vec![link.p_line_dbm; n_lines]),
        mask,
        tones,
    })
}
