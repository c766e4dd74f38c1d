//! Plain-text scenario files.
//!
//! One `key = value` per line, `#` starts a comment, blank lines are ignored.
//!
//! | key | value |
//! |---|---|
//! | `n`, `s`, `k_s`, `t`, `iterations`, `trials` | positive integer |
//! | `p_u`, `xi`, `subcarrier_spacing_hz` | number |
//! | `snr_db` | number, or `inf` for the noise-free case |
//! | `noise_free` | `true` / `false` (`true` is the same as `snr_db = inf`) |
//! | `seed` | unsigned 64-bit integer |
//! | `mode` | `topk` or `threshold` |
//! | `birthday_pool` | `u` or `n` |
//! | `kbar_u`, `m` | integer, or `auto` for the derived value |
//! | `sweep.n`, `sweep.t`, `sweep.kbar_u` | comma-separated integers |
//! | `sweep.snr_db` | comma-separated numbers or `inf` |
//!
//! Sweep lists multiply: every combination is one point, `n`-major.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;
use hicap::model::BirthdayPool;
use hicap::{ConfigParams, DetectorMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Topk,
    Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    U,
    N,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub n: Vec<usize>,
    /// `None` is the noise-free point.
    pub snr_db: Vec<Option<f64>>,
    pub t: Vec<usize>,
    pub kbar_u: Vec<usize>,
}

impl Sweep {
    pub fn is_empty(&self) -> bool {
        self.n.is_empty() && self.snr_db.is_empty() && self.t.is_empty() && self.kbar_u.is_empty()
    }
}

/// A fully resolved run: scenario, trial count and sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub s: usize,
    pub k_s: usize,
    pub t: usize,
    pub p_u: f64,
    /// `None` is noise free.
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub mode: Mode,
    pub xi: f64,
    pub iterations: usize,
    pub birthday_pool: Pool,
    pub kbar_u: Option<usize>,
    pub m: Option<usize>,
    pub trials: usize,
    pub subcarrier_spacing_hz: f64,
    pub sweep: Sweep,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ConfigParams::default();
        RunConfig {
            n: p.n,
            s: p.s,
            k_s: p.k_s,
            t: p.t,
            p_u: p.p_u,
            snr_db: None,
            seed: p.seed,
            mode: Mode::Topk,
            xi: 0.5,
            iterations: p.iterations,
            birthday_pool: Pool::U,
            kbar_u: None,
            m: None,
            trials: 100,
            subcarrier_spacing_hz: 60e3,
            sweep: Sweep::default(),
        }
    }
}

fn bad(line: usize, msg: impl fmt::Display) -> CliError {
    CliError::Config(format!("line {line}: {msg}"))
}

fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| bad(line, format!("`{key}` expects a number, got `{v}`")))
}

/// `inf` (any case) is noise free; anything else must be a finite number.
pub fn parse_snr(v: &str) -> Result<Option<f64>, String> {
    if v.eq_ignore_ascii_case("inf") {
        return Ok(None);
    }
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Some(x)),
        _ => Err(format!(
            "SNR must be a finite number of dB or `inf`, got `{v}`"
        )),
    }
}

/// SNR flag value; `None` is noise free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snr(pub Option<f64>);

impl FromStr for Snr {
    type Err = String;

    fn from_str(v: &str) -> Result<Self, String> {
        parse_snr(v).map(Snr)
    }
}

pub fn format_snr(v: Option<f64>) -> String {
    v.map_or_else(|| "inf".to_string(), |x| x.to_string())
}

fn optional(line: usize, key: &str, v: &str) -> Result<Option<usize>, CliError> {
    if v == "auto" {
        Ok(None)
    } else {
        num(line, key, v).map(Some)
    }
}

fn list<T>(
    line: usize,
    v: &str,
    f: impl Fn(&str) -> Result<T, CliError>,
) -> Result<Vec<T>, CliError> {
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(bad(line, "empty list"));
    }
    Ok(items)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, v) = content
                .split_once('=')
                .ok_or_else(|| bad(line, format!("expected `key = value`, got `{content}`")))?;
            cfg.set(line, key.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, line: usize, key: &str, v: &str) -> Result<(), CliError> {
        match key {
            "n" => self.n = num(line, key, v)?,
            "s" => self.s = num(line, key, v)?,
            "k_s" => self.k_s = num(line, key, v)?,
            "t" => self.t = num(line, key, v)?,
            "p_u" => self.p_u = num(line, key, v)?,
            "snr_db" => self.snr_db = parse_snr(v).map_err(|e| bad(line, e))?,
            "noise_free" => match v {
                "true" => self.snr_db = None,
                "false" if self.snr_db.is_none() => {
                    return Err(bad(
                        line,
                        "`noise_free = false` needs a finite `snr_db` first",
                    ));
                }
                "false" => {}
                _ => {
                    return Err(bad(
                        line,
                        format!("`noise_free` expects true or false, got `{v}`"),
                    ))
                }
            },
            "seed" => self.seed = num(line, key, v)?,
            "mode" => {
                self.mode =
                    Mode::from_str(v, true).map_err(|_| bad(line, format!("unknown mode `{v}`")))?
            }
            "xi" => self.xi = num(line, key, v)?,
            "iterations" => self.iterations = num(line, key, v)?,
            "birthday_pool" => {
                self.birthday_pool = Pool::from_str(v, true)
                    .map_err(|_| bad(line, format!("unknown birthday pool `{v}`")))?
            }
            "kbar_u" => self.kbar_u = optional(line, key, v)?,
            "m" => self.m = optional(line, key, v)?,
            "trials" => self.trials = num(line, key, v)?,
            "subcarrier_spacing_hz" => self.subcarrier_spacing_hz = num(line, key, v)?,
            "sweep.n" => self.sweep.n = list(line, v, |x| num(line, key, x))?,
            "sweep.t" => self.sweep.t = list(line, v, |x| num(line, key, x))?,
            "sweep.kbar_u" => self.sweep.kbar_u = list(line, v, |x| num(line, key, x))?,
            "sweep.snr_db" => {
                self.sweep.snr_db = list(line, v, |x| parse_snr(x).map_err(|e| bad(line, e)))?
            }
            _ => return Err(bad(line, format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn params(&self) -> ConfigParams {
        ConfigParams {
            n: self.n,
            s: self.s,
            k_s: self.k_s,
            t: self.t,
            p_u: self.p_u,
            seed: self.seed,
            detector_mode: match self.mode {
                Mode::Topk => DetectorMode::TopK,
                Mode::Threshold => DetectorMode::Threshold { xi: self.xi },
            },
            iterations: self.iterations,
            birthday_pool: match self.birthday_pool {
                Pool::U => BirthdayPool::PerSubchannelBlocks,
                Pool::N => BirthdayPool::SignalDim,
            },
            kbar_u: self.kbar_u,
            m: self.m,
            ..ConfigParams::default()
        }
        .with_snr_db(self.snr_db)
    }

    /// Every sweep combination, `n`-major, then SNR, `t`, `kbar_u`.
    pub fn points(&self) -> Vec<ConfigParams> {
        fn or_base<T: Copy>(v: &[T], base: T) -> Vec<T> {
            if v.is_empty() {
                vec![base]
            } else {
                v.to_vec()
            }
        }
        let base = self.params();
        let kbars: Vec<Option<usize>> = self.sweep.kbar_u.iter().map(|&k| Some(k)).collect();
        let mut out = Vec::new();
        for n in or_base(&self.sweep.n, self.n) {
            for snr in or_base(&self.sweep.snr_db, self.snr_db) {
                for t in or_base(&self.sweep.t, self.t) {
                    for kbar in or_base(&kbars, self.kbar_u) {
                        out.push(
                            ConfigParams {
                                n,
                                t,
                                kbar_u: kbar,
                                ..base.clone()
                            }
                            .with_snr_db(snr),
                        );
                    }
                }
            }
        }
        out
    }
}
