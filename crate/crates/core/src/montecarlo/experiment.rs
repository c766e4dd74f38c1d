//! End-to-end trials, aggregation and parameter sweeps.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::bounds;
use crate::detect::{detect_subchannel, evaluate_trial, TrialMetrics};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::measurement::{encode_clean, make_operators, DftPlan};
use crate::model::{
    birthday_collision_probability, draw_activity, draw_channels, draw_data, ConfigParams,
    Scenario, SystemConfig,
};
use crate::rng::{stream, Purpose};

/// What a sweep varies; every other parameter comes from the base.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    N(Vec<usize>),
    /// `None` is the noise-free point.
    SnrDb(Vec<Option<f64>>),
    T(Vec<usize>),
    /// Users per sub-channel; `m` is re-derived from it.
    Load(Vec<usize>),
}

impl SweepAxis {
    fn apply(&self, base: &ConfigParams) -> Vec<ConfigParams> {
        match self {
            SweepAxis::N(ns) => ns
                .iter()
                .map(|&n| ConfigParams { n, ..base.clone() })
                .collect(),
            SweepAxis::SnrDb(v) => v.iter().map(|&db| base.clone().with_snr_db(db)).collect(),
            SweepAxis::T(ts) => ts
                .iter()
                .map(|&t| ConfigParams { t, ..base.clone() })
                .collect(),
            SweepAxis::Load(ks) => ks
                .iter()
                .map(|&k| ConfigParams {
                    kbar_u: Some(k),
                    ..base.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub points: Vec<ConfigParams>,
    pub trials: usize,
    pub execution: Execution,
}

impl ExperimentSpec {
    pub fn single(params: ConfigParams, trials: usize) -> Self {
        ExperimentSpec {
            points: vec![params],
            trials,
            execution: Execution::default(),
        }
    }

    pub fn sweep(base: &ConfigParams, axis: &SweepAxis, trials: usize) -> Self {
        ExperimentSpec {
            points: axis.apply(base),
            trials,
            execution: Execution::default(),
        }
    }

    /// Every combination of `ns` and `snrs`, `n`-major.
    pub fn grid(base: &ConfigParams, ns: &[usize], snrs: &[Option<f64>], trials: usize) -> Self {
        let points = ns
            .iter()
            .flat_map(|&n| {
                snrs.iter()
                    .map(move |&db| ConfigParams { n, ..base.clone() }.with_snr_db(db))
            })
            .collect();
        ExperimentSpec {
            points,
            trials,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Ordered two-pass fold, so the result does not depend on how the values were produced.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Stat::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }

    pub fn std_err(&self, count: usize) -> f64 {
        if count == 0 {
            0.0
        } else {
            self.std / (count as f64).sqrt()
        }
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub metrics: TrialMetrics,
    /// Mean noise-free power per measurement.
    pub signal_power: f64,
    /// Noise variance per measurement, `σ²/n`.
    pub noise_power: f64,
    pub mean_iterations: f64,
}

/// Aggregates of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub config: SystemConfig,
    pub trials: usize,
    pub supported: Stat,
    pub p_md: Stat,
    pub p_fa: Stat,
    /// `None` when no trial decoded data.
    pub ser: Option<Stat>,
    pub detection_rate: Stat,
    pub exact_recovery: Stat,
    pub noncollided: Stat,
    /// Pooled fraction of non-collided users detected over all trials.
    pub pooled_detection_rate: f64,
    /// Empirical per-measurement SNR in dB (infinite without noise).
    pub meas_snr_db: f64,
    pub mean_iterations: f64,
}

impl PointResult {
    /// `(1 - P_coll) · kbar_u · c` with the exact birthday collision probability.
    pub fn collision_free_prediction(&self) -> f64 {
        let c = &self.config;
        (1.0 - birthday_collision_probability(c.u, c.kbar_u)) * c.kbar_u as f64 * c.c as f64
    }

    /// Capacity formula evaluated at the measured mean missed-detection rate.
    pub fn capacity_formula(&self) -> f64 {
        let c = &self.config;
        bounds::supported_users(c.p_u, c.kbar_u, c.c, self.p_md.mean.clamp(0.0, 1.0))
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub points: Vec<PointResult>,
    pub elapsed: Duration,
}

/// Draws the ground truth of trial `trial`. SNR does not enter, so points that
/// differ only in noise level see the same users, channels and data.
pub fn draw_scenario(config: &SystemConfig, trial: u64) -> Scenario {
    let activity = draw_activity(
        config,
        &mut stream(config.seed, Purpose::Activity, &[trial]),
    );
    let channels = draw_channels(
        &activity,
        config,
        &mut stream(config.seed, Purpose::Channel, &[trial]),
    );
    let data = draw_data(
        &activity,
        config,
        &mut stream(config.seed, Purpose::Data, &[trial]),
    );
    Scenario {
        activity,
        channels,
        data,
    }
}

/// One complete trial: truth, observations, detection, scoring.
pub fn run_trial(config: &SystemConfig, plan: &Arc<DftPlan>, trial: u64) -> Result<TrialOutcome> {
    let scenario = draw_scenario(config, trial);
    let operators = make_operators(
        config,
        plan,
        &mut stream(config.seed, Purpose::Partition, &[trial]),
    )?;
    let mut y = encode_clean(config, &scenario.channels, &scenario.data, &operators)?;
    let measurements = (config.c * config.t * config.m) as f64;
    let signal_power = y.energy() / measurements;
    y.add_noise(
        config.sigma2(),
        config.n,
        &mut stream(config.seed, Purpose::Noise, &[trial]),
    );

    let mut detections = Vec::with_capacity(config.c);
    let mut iterations = 0usize;
    for (j, op) in operators.iter().enumerate() {
        let det = detect_subchannel(config, op, &y.slots(j))?;
        iterations += det.iterations_run;
        detections.push(det);
    }
    Ok(TrialOutcome {
        metrics: evaluate_trial(&scenario, &detections, config.u),
        signal_power,
        noise_power: config.sigma2() / config.n as f64,
        mean_iterations: iterations as f64 / config.c as f64,
    })
}

fn aggregate(config: SystemConfig, outcomes: &[TrialOutcome]) -> PointResult {
    let collect = |f: &dyn Fn(&TrialOutcome) -> f64| outcomes.iter().map(f).collect::<Vec<f64>>();
    let sers: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.metrics.symbol_error_rate())
        .collect();
    let detected: usize = outcomes.iter().map(|o| o.metrics.supported_users).sum();
    let eligible: usize = outcomes.iter().map(|o| o.metrics.noncollided_users).sum();
    let signal = Stat::of(&collect(&|o| o.signal_power)).mean;
    let noise = outcomes.first().map_or(0.0, |o| o.noise_power);
    PointResult {
        trials: outcomes.len(),
        supported: Stat::of(&collect(&|o| o.metrics.supported_users as f64)),
        p_md: Stat::of(&collect(&|o| o.metrics.missed_detection_rate())),
        p_fa: Stat::of(&collect(&|o| o.metrics.false_alarm_rate())),
        ser: (!sers.is_empty()).then(|| Stat::of(&sers)),
        detection_rate: Stat::of(&collect(&|o| o.metrics.detection_rate())),
        exact_recovery: Stat::of(&collect(&|o| o.metrics.exact_recovery_rate())),
        noncollided: Stat::of(&collect(&|o| o.metrics.noncollided_users as f64)),
        pooled_detection_rate: if eligible == 0 {
            0.0
        } else {
            detected as f64 / eligible as f64
        },
        meas_snr_db: if noise > 0.0 {
            10.0 * (signal / noise).log10()
        } else {
            f64::INFINITY
        },
        mean_iterations: Stat::of(&collect(&|o| o.mean_iterations)).mean,
        config,
    }
}

/// Runs every point of `spec`. Trials of all points are spread over workers
/// together and folded back in order, so the result does not depend on the
/// worker count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<AggregateResult> {
    if spec.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let start = Instant::now();
    let configs = spec
        .points
        .iter()
        .cloned()
        .map(SystemConfig::new)
        .collect::<Result<Vec<_>>>()?;
    let plans: Vec<Arc<DftPlan>> = configs.iter().map(|c| DftPlan::new(c.n)).collect();

    let trials = spec.trials;
    let outcomes = try_map_indexed(spec.execution, configs.len() * trials, |idx| {
        let (p, trial) = (idx / trials, idx % trials);
        run_trial(&configs[p], &plans[p], trial as u64).map_err(|e| Error::Trial {
            trial,
            source: Box::new(e),
        })
    })?;

    let points = configs
        .into_iter()
        .zip(outcomes.chunks(trials))
        .map(|(cfg, chunk)| aggregate(cfg, chunk))
        .collect();
    Ok(AggregateResult {
        points,
        elapsed: start.elapsed(),
    })
}

/// One row of the supported-users table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub snr_db: Option<f64>,
    pub kbar_u: usize,
    pub m: usize,
    pub c: usize,
    pub supported: Stat,
    pub p_md: f64,
    pub collision_free_prediction: f64,
    pub capacity_formula: f64,
    /// Mean supported users per frame times frames per second.
    pub supported_per_second: f64,
}

/// Mean supported users over `ns × snrs`. A frame spans `t` OFDM symbols of
/// duration `1 / subcarrier_spacing_hz`.
pub fn sweep_supported_users(
    base: &ConfigParams,
    ns: &[usize],
    snrs: &[Option<f64>],
    trials: usize,
    subcarrier_spacing_hz: f64,
    execution: Execution,
) -> Result<Vec<SweepRow>> {
    let spec = ExperimentSpec::grid(base, ns, snrs, trials).with_execution(execution);
    let result = run_experiment(&spec)?;
    Ok(result
        .points
        .iter()
        .map(|p| {
            let cfg = &p.config;
            let frames_per_second = subcarrier_spacing_hz / cfg.t as f64;
            SweepRow {
                n: cfg.n,
                snr_db: (!cfg.noise_free).then_some(cfg.snr_db),
                kbar_u: cfg.kbar_u,
                m: cfg.m,
                c: cfg.c,
                supported: p.supported,
                p_md: p.p_md.mean,
                collision_free_prediction: p.collision_free_prediction(),
                capacity_formula: p.capacity_formula(),
                supported_per_second: p.supported.mean * frames_per_second,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ConfigParams {
        ConfigParams {
            n: 256,
            t: 10,
            ..ConfigParams::default()
        }
    }

    #[test]
    fn stat_fold() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Stat::of(&[7.0]).std, 0.0);
        assert_eq!(Stat::of(&[]), Stat::default());
    }

    #[test]
    fn single_trial_is_reproducible() {
        let spec = ExperimentSpec::single(
            ConfigParams {
                seed: 11,
                ..small()
            },
            1,
        );
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn sequential_matches_parallel() {
        let spec = ExperimentSpec::sweep(&small(), &SweepAxis::SnrDb(vec![None, Some(0.0)]), 6);
        let a = run_experiment(&spec.clone().with_execution(Execution::Sequential)).unwrap();
        let b = run_experiment(&spec.with_execution(Execution::Parallel)).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(run_experiment(&ExperimentSpec::single(small(), 0)).is_err());
    }

    #[test]
    fn aggregates_stay_in_range() {
        let spec = ExperimentSpec::sweep(&small(), &SweepAxis::SnrDb(vec![None, Some(-10.0)]), 8);
        for p in run_experiment(&spec).unwrap().points {
            assert_eq!(p.trials, 8);
            for s in [p.p_md, p.p_fa, p.detection_rate, p.exact_recovery] {
                assert!((0.0..=1.0).contains(&s.mean));
                assert!(s.std >= 0.0);
            }
            assert!(p.supported.mean <= (p.config.kbar_u * p.config.c) as f64);
            assert!(p.supported.mean <= p.noncollided.mean);
        }
    }

    #[test]
    fn snr_points_share_ground_truth() {
        let a = SystemConfig::new(small()).unwrap();
        let b = SystemConfig::new(small().with_snr_db(Some(3.0))).unwrap();
        assert_eq!(draw_scenario(&a, 4), draw_scenario(&b, 4));
    }

    #[test]
    fn axes_expand() {
        let base = ConfigParams::default();
        assert_eq!(
            ExperimentSpec::sweep(&base, &SweepAxis::N(vec![1024, 2048]), 1).points[1].n,
            2048
        );
        assert_eq!(
            ExperimentSpec::sweep(&base, &SweepAxis::T(vec![1, 7]), 1).points[1].t,
            7
        );
        assert_eq!(
            ExperimentSpec::sweep(&base, &SweepAxis::Load(vec![2]), 1).points[0].kbar_u,
            Some(2)
        );
        let g = ExperimentSpec::grid(&base, &[1024, 2048], &[None, Some(0.0)], 1);
        assert_eq!(g.points.len(), 4);
        assert!(g.points[0].noise_free && !g.points[1].noise_free);
        assert_eq!(g.points[2].n, 2048);
    }
}
