//! Empirical counterparts of the analytic bounds.

use rand::seq::index::sample;
use rand::Rng;

use crate::bounds::{capture_bound, conc_bound_multislot, expected_noncollided, BoundValue};
use crate::error::{config_err, Result};
use crate::exec::{map_indexed, try_map_indexed, Execution};
use crate::measurement::{DftPlan, SubsampledDftOperator};
use crate::model::{complex_gaussian, QPSK};
use crate::rng::{stream, Purpose};
use crate::C64;

/// Fewest trials accepted for a tail estimate.
pub const MIN_TAIL_TRIALS: usize = 1000;

/// Trials per random stream in the cheap counting experiments.
const CHUNK: usize = 1000;

/// Fixed signal and operator sizes of a concentration experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationSetup {
    pub n: usize,
    pub s: usize,
    pub k_s: usize,
    pub k_u: usize,
    pub m: usize,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub eps: f64,
    pub exceedances: usize,
    pub trials: usize,
    pub empirical: f64,
    /// Binomial standard error of `empirical`.
    pub std_err: f64,
    pub bound: BoundValue,
}

impl TailRow {
    fn new(eps: f64, exceedances: usize, trials: usize, bound: BoundValue) -> Self {
        let p = exceedances as f64 / trials as f64;
        TailRow {
            eps,
            exceedances,
            trials,
            empirical: p,
            std_err: (p * (1.0 - p) / trials as f64).sqrt(),
            bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationTable {
    pub setup: ConcentrationSetup,
    pub mean_deviation: f64,
    pub rows: Vec<TailRow>,
}

/// Tail of `|(1/t) Σ_i ‖A D_i x‖² - ‖x‖²|` over random row draws and random
/// QPSK block modulations, for one fixed unit-norm hierarchically sparse `x`.
/// Slot 0 is unmodulated.
pub fn empirical_concentration(
    setup: ConcentrationSetup,
    trials: usize,
    eps_grid: &[f64],
    seed: u64,
    execution: Execution,
) -> Result<ConcentrationTable> {
    let ConcentrationSetup {
        n,
        s,
        k_s,
        k_u,
        m,
        t,
    } = setup;
    if trials < MIN_TAIL_TRIALS {
        return config_err(format!(
            "{trials} trials is below the minimum of {MIN_TAIL_TRIALS} for a tail estimate"
        ));
    }
    if s == 0
        || n % s != 0
        || k_s == 0
        || k_s > s
        || k_u == 0
        || k_u > n / s
        || m == 0
        || m > n
        || t == 0
    {
        return config_err(format!("invalid concentration setup {setup:?}"));
    }
    if eps_grid.iter().any(|&e| !(e > 0.0)) {
        return config_err("every eps must be positive");
    }

    let mut rng = stream(seed, Purpose::Concentration, &[0]);
    let x: Vec<Vec<(usize, C64)>> = {
        let blocks = sample(&mut rng, n / s, k_u).into_vec();
        let mut x: Vec<Vec<(usize, C64)>> = blocks
            .into_iter()
            .map(|b| {
                let taps = sample(&mut rng, s, k_s).into_vec();
                taps.into_iter()
                    .map(|l| (b * s + l, complex_gaussian(&mut rng, 1.0)))
                    .collect()
            })
            .collect();
        let norm: f64 = x
            .iter()
            .flatten()
            .map(|(_, v)| v.norm_sqr())
            .sum::<f64>()
            .sqrt();
        x.iter_mut().flatten().for_each(|(_, v)| *v /= norm);
        x
    };

    let plan = DftPlan::new(n);
    let path = [1, m as u64, t as u64];
    let deviations = try_map_indexed(execution, trials, |trial| {
        let mut rng = stream(
            seed,
            Purpose::Concentration,
            &[path[0], path[1], path[2], trial as u64],
        );
        let mut rows = sample(&mut rng, n, m).into_vec();
        rows.sort_unstable();
        let op = SubsampledDftOperator::new(plan.clone(), rows)?;
        let images: Vec<Vec<C64>> = x
            .iter()
            .map(|blk| op.apply_sparse(blk.iter().copied()))
            .collect();
        let mut acc = 0.0;
        let mut y = vec![C64::new(0.0, 0.0); m];
        for i in 0..t {
            y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for img in &images {
                let d = if i == 0 {
                    C64::new(1.0, 0.0)
                } else {
                    QPSK[rng.random_range(0..4)]
                };
                for (o, v) in y.iter_mut().zip(img) {
                    *o += d * v;
                }
            }
            acc += y.iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
        Ok((acc / t as f64 - 1.0).abs())
    })?;

    let rows = eps_grid
        .iter()
        .map(|&eps| {
            let exceed = deviations.iter().filter(|&&d| d > eps).count();
            Ok(TailRow::new(
                eps,
                exceed,
                trials,
                conc_bound_multislot(m, k_s, k_u, t, eps)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConcentrationTable {
        setup,
        mean_deviation: deviations.iter().sum::<f64>() / trials as f64,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadRow {
    pub x: usize,
    pub exceedances: usize,
    /// Fraction of trials whose load is at least `x`.
    pub empirical: f64,
    pub std_err: f64,
    pub bound: BoundValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadTable {
    pub n: usize,
    pub m: usize,
    pub c: usize,
    pub k_u: usize,
    pub trials: usize,
    pub mean_load: f64,
    pub rows: Vec<LoadRow>,
}

/// Number of `k_u` users, each picking one of `c = n/m` sub-channels uniformly,
/// that land on a fixed sub-channel. Reports `P(load >= x)` for `x = 1..=k_u`.
pub fn empirical_load_distribution(
    n: usize,
    m: usize,
    k_u: usize,
    trials: usize,
    seed: u64,
    execution: Execution,
) -> Result<LoadTable> {
    if trials < MIN_TAIL_TRIALS {
        return config_err(format!(
            "{trials} trials is below the minimum of {MIN_TAIL_TRIALS} for a tail estimate"
        ));
    }
    if m == 0 || m > n || n % m != 0 || k_u == 0 {
        return config_err(format!("invalid load setup n = {n}, m = {m}, k_u = {k_u}"));
    }
    let c = n / m;
    let chunks = trials.div_ceil(CHUNK);
    let histograms = map_indexed(execution, chunks, |chunk| {
        let mut rng = stream(seed, Purpose::Load, &[k_u as u64, chunk as u64]);
        let mut hist = vec![0usize; k_u + 1];
        for _ in 0..CHUNK.min(trials - chunk * CHUNK) {
            let load = (0..k_u).filter(|_| rng.random_range(0..c) == 0).count();
            hist[load] += 1;
        }
        hist
    });
    let mut hist = vec![0usize; k_u + 1];
    for h in &histograms {
        hist.iter_mut().zip(h).for_each(|(a, b)| *a += b);
    }
    let mean_load = hist
        .iter()
        .enumerate()
        .map(|(x, &k)| (x * k) as f64)
        .sum::<f64>()
        / trials as f64;

    let mut at_least = trials - hist[0];
    let mut rows = Vec::with_capacity(k_u);
    for x in 1..=k_u {
        let tail = TailRow::new(0.0, at_least, trials, capture_bound(n, k_u, x)?);
        rows.push(LoadRow {
            x,
            exceedances: at_least,
            empirical: tail.empirical,
            std_err: tail.std_err,
            bound: tail.bound,
        });
        at_least -= hist[x];
    }
    Ok(LoadTable {
        n,
        m,
        c,
        k_u,
        trials,
        mean_load,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoncollidedEstimate {
    pub k_u: usize,
    pub resources: usize,
    pub trials: usize,
    pub mean: f64,
    pub std_err: f64,
}

/// Mean number of users, out of `k_u` each picking one of `resources` uniformly,
/// that share their pick with nobody.
pub fn empirical_noncollided(
    k_u: usize,
    resources: usize,
    trials: usize,
    seed: u64,
    execution: Execution,
) -> Result<NoncollidedEstimate> {
    if trials == 0 || resources == 0 {
        return config_err("trials and resources must be positive");
    }
    let chunks = trials.div_ceil(CHUNK);
    let sums = map_indexed(execution, chunks, |chunk| {
        let mut rng = stream(
            seed,
            Purpose::Collision,
            &[k_u as u64, resources as u64, chunk as u64],
        );
        let mut picks = vec![0usize; k_u];
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..CHUNK.min(trials - chunk * CHUNK) {
            picks
                .iter_mut()
                .for_each(|p| *p = rng.random_range(0..resources));
            picks.sort_unstable();
            let alone = (0..k_u)
                .filter(|&i| {
                    (i == 0 || picks[i - 1] != picks[i])
                        && (i + 1 == k_u || picks[i + 1] != picks[i])
                })
                .count() as f64;
            sum += alone;
            sum_sq += alone * alone;
        }
        (sum, sum_sq)
    });
    let (sum, sum_sq) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nt = trials as f64;
    let mean = sum / nt;
    let var = if trials > 1 {
        (sum_sq - nt * mean * mean).max(0.0) / (nt - 1.0)
    } else {
        0.0
    };
    Ok(NoncollidedEstimate {
        k_u,
        resources,
        trials,
        mean,
        std_err: (var / nt).sqrt(),
    })
}

/// Analytic lower bound paired with [`empirical_noncollided`] on `c n / k_s` resources.
pub fn noncollided_bound(k_u: usize, k_s: usize, c: usize, n: usize) -> f64 {
    expected_noncollided(k_u, k_s, c, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(m: usize, t: usize) -> ConcentrationSetup {
        ConcentrationSetup {
            n: 256,
            s: 8,
            k_s: 4,
            k_u: 4,
            m,
            t,
        }
    }

    #[test]
    fn full_operator_has_no_deviation() {
        let tab =
            empirical_concentration(setup(256, 3), 1000, &[1e-9], 1, Execution::default()).unwrap();
        assert!(tab.mean_deviation < 1e-12);
        assert_eq!(tab.rows[0].exceedances, 0);
    }

    #[test]
    fn averaging_shrinks_deviation() {
        let one =
            empirical_concentration(setup(16, 1), 2000, &[0.5], 2, Execution::default()).unwrap();
        let many =
            empirical_concentration(setup(16, 50), 2000, &[0.5], 2, Execution::default()).unwrap();
        assert!(many.mean_deviation < one.mean_deviation);
        assert!(many.rows[0].empirical <= one.rows[0].empirical);
    }

    #[test]
    fn too_few_trials_rejected() {
        assert!(
            empirical_concentration(setup(16, 1), 999, &[0.5], 0, Execution::default()).is_err()
        );
        assert!(empirical_load_distribution(1024, 16, 128, 10, 0, Execution::default()).is_err());
    }

    #[test]
    fn load_mean_and_tail_shape() {
        let tab =
            empirical_load_distribution(1024, 16, 128, 20_000, 3, Execution::default()).unwrap();
        // Binomial(128, 1/64) has mean 2.
        assert!((tab.mean_load - 2.0).abs() < 0.05, "{}", tab.mean_load);
        assert!(tab
            .rows
            .windows(2)
            .all(|w| w[0].empirical >= w[1].empirical));
        assert_eq!(tab.rows.len(), 128);
    }

    #[test]
    fn noncollided_matches_closed_form() {
        // E = k (1 - 1/R)^(k-1).
        let (k, r) = (20, 100);
        let est = empirical_noncollided(k, r, 50_000, 4, Execution::default()).unwrap();
        let exact = k as f64 * (1.0 - 1.0 / r as f64).powi(k as i32 - 1);
        assert!(
            (est.mean - exact).abs() < 4.0 * est.std_err,
            "{} vs {exact}",
            est.mean
        );
    }

    #[test]
    fn chunked_runs_are_worker_independent() {
        let a = empirical_load_distribution(512, 16, 32, 3500, 9, Execution::Sequential).unwrap();
        let b = empirical_load_distribution(512, 16, 32, 3500, 9, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
