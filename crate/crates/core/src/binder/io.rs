//! Scenario JSON document and the bulk channel CSV.
//!
//! Floats are written with 17 significant digits so a save/load cycle is
//! bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{BandPlan, Direction};
use super::{ConstraintMode, MaskSpec, PowerSpec, PsdTable, Scenario, ScenarioParts, ToneChannel};
use crate::error::{Error, Result};
use crate::numlin::{hermitize, CMatrix};

/// JSON formatter writing every f64 as `{:.16e}`.
pub(crate) struct Sig17Formatter;

impl serde_json::ser::Formatter for Sig17Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

pub(crate) fn to_json_sig17<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17Formatter);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub(crate) fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse { line: e.line(), column: e.column(), msg: e.to_string() }
}

#[derive(Serialize, Deserialize)]
struct Meta {
    n_lines: usize,
    delta_f_hz: f64,
    f_sym_hz: f64,
    gamma_db: f64,
    constraint_mode: ConstraintMode,
    #[serde(default)]
    direction: Direction,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_tot_dbm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_tot_w: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
enum DbmMode {
    #[serde(rename = "dbm_hz")]
    DbmHz,
}

#[derive(Serialize, Deserialize)]
enum WattsMode {
    #[serde(rename = "w_per_tone")]
    WattsPerTone,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MaskFile {
    Named(String),
    Dbm { mode: DbmMode, table: Vec<PsdTable> },
    Watts { mode: WattsMode, table: Vec<Vec<Option<f64>>> },
}

#[derive(Serialize, Deserialize)]
struct ToneFile {
    i: usize,
    f_hz: f64,
    #[serde(rename = "H")]
    h: Vec<[f64; 2]>,
    #[serde(rename = "R")]
    r: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    meta: Meta,
    power: PowerFile,
    mask: MaskFile,
    bands: Vec<[f64; 2]>,
    tones: Vec<ToneFile>,
}

fn flatten(m: &CMatrix) -> Vec<[f64; 2]> {
    m.as_slice().iter().map(|z| [z.re, z.im]).collect()
}

fn unflatten(entries: &[[f64; 2]], n: usize, what: &str, tone: usize) -> Result<CMatrix> {
    if entries.len() != n * n {
        return Err(Error::DimensionMismatch(format!(
            "tone {tone}: {what} has {} entries, expected {} for {n} lines",
            entries.len(),
            n * n
        )));
    }
    CMatrix::new(n, n, entries.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
}

pub fn scenario_to_json(s: &Scenario) -> String {
    let power = match s.power_spec() {
        PowerSpec::Dbm(v) => PowerFile { p_tot_dbm: Some(v.clone()), p_tot_w: None },
        PowerSpec::Watts(v) => PowerFile { p_tot_dbm: None, p_tot_w: Some(v.clone()) },
    };
    let mask = match s.mask_spec() {
        MaskSpec::None => MaskFile::Named("none".into()),
        MaskSpec::DbmHz(t) => MaskFile::Dbm { mode: DbmMode::DbmHz, table: t.clone() },
        MaskSpec::WattsPerTone(t) => MaskFile::Watts { mode: WattsMode::WattsPerTone, table: t.clone() },
    };
    let file = ScenarioFile {
        meta: Meta {
            n_lines: s.n_lines(),
            delta_f_hz: s.delta_f(),
            f_sym_hz: s.f_sym(),
            gamma_db: s.gamma_db(),
            constraint_mode: s.constraint_mode(),
            direction: s.direction(),
        },
        power,
        mask,
        bands: s.bands().bands().to_vec(),
        tones: s
            .tones()
            .iter()
            .map(|t| ToneFile { i: t.index, f_hz: t.freq, h: flatten(&t.h), r: flatten(t.r.as_matrix()) })
            .collect(),
    };
    to_json_sig17(&file)
}

pub fn scenario_from_json(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(parse_error)?;
    let n = file.meta.n_lines;
    let power = match (file.power.p_tot_dbm, file.power.p_tot_w) {
        (Some(v), None) => PowerSpec::Dbm(v),
        (None, Some(v)) => PowerSpec::Watts(v),
        _ => return Err(Error::InvalidInput("power needs exactly one of p_tot_dbm or p_tot_w".into())),
    };
    let mask = match file.mask {
        MaskFile::Named(name) if name == "none" => MaskSpec::None,
        MaskFile::Named(name) => return Err(Error::InvalidInput(format!("unknown mask {name:?}"))),
        MaskFile::Dbm { table, .. } => MaskSpec::DbmHz(table),
        MaskFile::Watts { table, .. } => MaskSpec::WattsPerTone(table),
    };
    let mut tones = Vec::with_capacity(file.tones.len());
    for t in file.tones {
        let h = unflatten(&t.h, n, "H", t.i)?;
        let r = hermitize(&unflatten(&t.r, n, "R", t.i)?)?;
        tones.push(ToneChannel::new(t.i, t.f_hz, h, r)?);
    }
    Scenario::new(ScenarioParts {
        n_lines: n,
        delta_f: file.meta.delta_f_hz,
        f_sym: file.meta.f_sym_hz,
        gamma_db: file.meta.gamma_db,
        constraint_mode: file.meta.constraint_mode,
        bands: BandPlan::new(file.bands, file.meta.direction)?,
        power,
        mask,
        tones,
    })
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scenario_to_json(s)).map_err(|e| Error::io(path, e))
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    scenario_from_json(&text)
}

/// Writes `kind,tone,row,col,re,im` rows for every H and R entry.
pub fn write_channel_csv(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("kind,tone,row,col,re,im\n");
    for t in s.tones() {
        for (kind, m) in [("H", &t.h), ("R", t.r.as_matrix())] {
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    let z = m[(r, c)];
                    let _ = writeln!(out, "{kind},{},{r},{c},{:.16e},{:.16e}", t.index, z.re, z.im);
                }
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Channel record read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRecord {
    pub tone: usize,
    pub h: CMatrix,
    pub r: CMatrix,
}

/// Reads a channel CSV for `n_lines` lines. Tones appear in file order.
pub fn read_channel_csv(path: impl AsRef<Path>, n_lines: usize) -> Result<Vec<ChannelRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_channel_csv(&text, n_lines)
}

fn parse_channel_csv(text: &str, n_lines: usize) -> Result<Vec<ChannelRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "kind,tone,row,col,re,im")) => {}
        _ => return Err(Error::Parse { line: 1, column: 1, msg: "expected header kind,tone,row,col,re,im".into() }),
    }
    let mut records: Vec<ChannelRecord> = Vec::new();
    let mut filled: Vec<(Vec<bool>, Vec<bool>)> = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |column: usize, msg: &str| Error::Parse { line: lineno + 1, column, msg: msg.into() };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(bad(1, "expected 6 fields"));
        }
        let is_h = match fields[0] {
            "H" => true,
            "R" => false,
            _ => return Err(bad(1, "kind must be H or R")),
        };
        let col_of = |k: usize| fields[..k].iter().map(|f| f.len() + 1).sum::<usize>() + 1;
        let tone: usize = fields[1].parse().map_err(|_| bad(col_of(1), "bad tone index"))?;
        let row: usize = fields[2].parse().map_err(|_| bad(col_of(2), "bad row"))?;
        let col: usize = fields[3].parse().map_err(|_| bad(col_of(3), "bad col"))?;
        let re: f64 = fields[4].parse().map_err(|_| bad(col_of(4), "bad real part"))?;
        let im: f64 = fields[5].parse().map_err(|_| bad(col_of(5), "bad imaginary part"))?;
        if row >= n_lines || col >= n_lines {
            return Err(Error::DimensionMismatch(format!(
                "line {}: entry ({row},{col}) outside {n_lines}x{n_lines}",
                lineno + 1
            )));
        }
        let pos = match records.iter().position(|r| r.tone == tone) {
            Some(p) => p,
            None => {
                records.push(ChannelRecord {
                    tone,
                    h: CMatrix::zeros(n_lines, n_lines),
                    r: CMatrix::zeros(n_lines, n_lines),
                });
                filled.push((vec![false; n_lines * n_lines], vec![false; n_lines * n_lines]));
                records.len() - 1
            }
        };
        let (m, mark) =
            if is_h { (&mut records[pos].h, &mut filled[pos].0) } else { (&mut records[pos].r, &mut filled[pos].1) };
        m[(row, col)] = Complex64::new(re, im);
        mark[row * n_lines + col] = true;
    }
    for (rec, (fh, fr)) in records.iter().zip(&filled) {
        if !fh.iter().all(|&x| x) || !fr.iter().all(|&x| x) {
            return Err(Error::DimensionMismatch(format!("tone {} is missing H or R entries", rec.tone)));
        }
    }
    Ok(records)
}
