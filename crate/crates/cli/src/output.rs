//! CSV tables and the run manifest.

use std::fmt::Write as _;
use std::path::Path;

use hicap::montecarlo::PointResult;
use hicap::validation::Check;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

/// Shortest round-trip text; scientific notation outside `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if v == 0.0 || (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Comma-separated table with a header row and LF line endings.
pub struct Table {
    columns: usize,
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Table {
            columns: header.len(),
            text,
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        assert_eq!(
            fields.len(),
            self.columns,
            "row width must match the header"
        );
        debug_assert!(fields.iter().all(|f| !f.contains(',') && !f.contains('\n')));
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, &self.text)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

fn snr_field(p: &PointResult) -> String {
    if p.config.noise_free {
        "inf".into()
    } else {
        fmt_f64(p.config.snr_db)
    }
}

/// One row per sweep point with the headline metrics.
pub fn metrics_table(points: &[PointResult]) -> Table {
    let mut t = Table::new(&[
        "n",
        "m",
        "c",
        "kbar_u",
        "snr_db",
        "trials",
        "mean_supported",
        "std_supported",
        "p_md",
        "p_fa",
        "ser",
    ]);
    for p in points {
        let c = &p.config;
        t.row(&[
            c.n.to_string(),
            c.m.to_string(),
            c.c.to_string(),
            c.kbar_u.to_string(),
            snr_field(p),
            p.trials.to_string(),
            fmt_f64(p.supported.mean),
            fmt_f64(p.supported.std),
            fmt_f64(p.p_md.mean),
            fmt_f64(p.p_fa.mean),
            fmt_f64(p.ser.map_or(f64::NAN, |s| s.mean)),
        ]);
    }
    t
}

/// Secondary per-point quantities: predictions, rates and measured SNR.
pub fn summary_table(points: &[PointResult], subcarrier_spacing_hz: f64) -> Table {
    let mut t = Table::new(&[
        "n",
        "snr_db",
        "t",
        "kbar_u",
        "mean_noncollided",
        "detection_rate",
        "exact_recovery",
        "collision_free_prediction",
        "capacity_formula",
        "supported_per_second",
        "measured_snr_db",
        "mean_iterations",
    ]);
    for p in points {
        let c = &p.config;
        t.row(&[
            c.n.to_string(),
            snr_field(p),
            c.t.to_string(),
            c.kbar_u.to_string(),
            fmt_f64(p.noncollided.mean),
            fmt_f64(p.pooled_detection_rate),
            fmt_f64(p.exact_recovery.mean),
            fmt_f64(p.collision_free_prediction()),
            fmt_f64(p.capacity_formula()),
            fmt_f64(p.supported.mean * subcarrier_spacing_hz / c.t as f64),
            fmt_f64(p.meas_snr_db),
            fmt_f64(p.mean_iterations),
        ]);
    }
    t
}

pub fn validation_table(checks: &[Check]) -> Table {
    let mut t = Table::new(&["check_name", "parameters", "empirical", "bound", "pass"]);
    for c in checks {
        t.row(&[
            c.name.clone(),
            c.parameters.clone(),
            fmt_f64(c.empirical),
            fmt_f64(c.bound),
            c.pass.to_string(),
        ]);
    }
    t
}

/// Grid of the `bounds` command. Every list is one axis of the product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsGrid {
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub k_u: Vec<usize>,
    pub t: Vec<usize>,
    pub eps: Vec<f64>,
    pub x: Vec<usize>,
    pub xi: Vec<f64>,
    pub s: usize,
    pub k_s: usize,
    pub snr_db: Option<f64>,
    pub draws: usize,
    #[serde(default = "unit")]
    pub c1: f64,
    #[serde(default = "unit")]
    pub c2: f64,
    pub seed: u64,
}

fn unit() -> f64 {
    1.0
}

/// Inputs of the `validate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateConfig {
    pub n: usize,
    pub s: usize,
    pub k_s: usize,
    pub k_u: usize,
    pub m: usize,
    pub concentration_trials: usize,
    pub load_trials: usize,
    pub noncollided_trials: usize,
    pub isometry_draws: usize,
    pub equivalence_instances: usize,
    pub operator_scale: Option<f64>,
    pub seed: u64,
}

/// What was run; enough to run it again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Invocation {
    Simulate { config: RunConfig },
    Sweep { config: RunConfig },
    Bounds { grid: BoundsGrid },
    Validate { options: ValidateConfig },
}

/// Derived dimensions of one simulated point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPoint {
    pub n: usize,
    pub u: usize,
    pub kbar_u: usize,
    pub m: usize,
    pub c: usize,
    pub t: usize,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub timestamp_unix: u64,
    #[serde(flatten)]
    pub invocation: Invocation,
    pub resolved: Vec<ResolvedPoint>,
    /// Output file names, relative to the manifest.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(
        invocation: Invocation,
        seed: u64,
        resolved: Vec<ResolvedPoint>,
        outputs: Vec<String>,
    ) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            invocation,
            resolved,
            outputs,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read manifest {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// `key=value;key=value` with the values formatted like CSV fields.
pub fn parameters(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (i, (k, v)) in pairs.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        let _ = write!(out, "{k}={v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips() {
        for v in [
            0.0,
            1.0,
            -2.5,
            4.0226e-5,
            1e-300,
            123456.789,
            3e20,
            0.1 + 0.2,
        ] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
            assert!(!s.contains(','));
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(4.0226e-5), "4.0226e-5");
        assert_eq!(fmt_f64(0.25), "0.25");
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.row(&["1".into(), "x".into()]);
        assert_eq!(t.as_str(), "a,b\n1,x\n");
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn table_rejects_ragged_rows() {
        Table::new(&["a", "b"]).row(&["1".into()]);
    }

    #[test]
    fn manifest_round_trips() {
        let mut config = RunConfig::default();
        config.snr_db = Some(-10.0);
        config.sweep.snr_db = vec![None, Some(0.5)];
        let m = RunManifest::new(
            Invocation::Sweep { config },
            3,
            vec![],
            vec!["metrics.csv".into()],
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        m.write(&path).unwrap();
        assert_eq!(RunManifest::read(&path).unwrap(), m);
    }

    #[test]
    fn parameter_strings() {
        assert_eq!(
            parameters(&[("n", "4".into()), ("eps", fmt_f64(0.5))]),
            "n=4;eps=0.5"
        );
    }
}
