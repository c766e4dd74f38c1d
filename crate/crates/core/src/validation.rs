//! Self-checks of the operator, the threshold and the analytic bounds.

use rand::seq::index::sample;
use rand::Rng;

use crate::bounds::expected_noncollided;
use crate::detect::{brute_force_threshold, hier_threshold};
use crate::error::{config_err, Result};
use crate::exec::Execution;
use crate::measurement::{DftPlan, SubsampledDftOperator};
use crate::model::complex_gaussian;
use crate::montecarlo::{
    empirical_concentration, empirical_load_distribution, empirical_noncollided,
    ConcentrationSetup, LoadRow, MIN_TAIL_TRIALS,
};
use crate::rng::{stream, Purpose};
use crate::C64;

/// One line of a validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// `key=value` pairs separated by `;`.
    pub parameters: String,
    pub empirical: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, parameters: String, empirical: f64, bound: f64, pass: bool) -> Self {
        Check {
            name: name.to_string(),
            parameters,
            empirical,
            bound,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    pub n: usize,
    pub s: usize,
    pub k_s: usize,
    /// Users per sub-channel in the concentration checks.
    pub k_u: usize,
    /// Measurements per sub-channel; the concentration checks also use `4m`.
    pub m: usize,
    pub concentration_trials: usize,
    pub load_trials: usize,
    pub noncollided_trials: usize,
    pub isometry_draws: usize,
    pub equivalence_instances: usize,
    /// Overrides the operator normalization `1/√m` in the operator checks.
    pub operator_scale: Option<f64>,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            n: 1024,
            s: 8,
            k_s: 4,
            k_u: 4,
            m: 16,
            concentration_trials: 10_000,
            load_trials: 100_000,
            noncollided_trials: 20_000,
            isometry_draws: 10_000,
            equivalence_instances: 1000,
            operator_scale: None,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

const EPS_GRID: [f64; 3] = [0.25, 0.5, 1.0];
const SLOT_GRID: [usize; 3] = [1, 10, 100];
const ISOMETRY_TOLERANCE: f64 = 0.02;
const EXACT_TOLERANCE: f64 = 1e-9;
const PAIR_DRAWS: usize = 100;

/// Runs every check in a fixed order.
pub fn run_validation(opts: &ValidationOptions) -> Result<Vec<Check>> {
    let ValidationOptions {
        n, s, k_s, k_u, m, ..
    } = *opts;
    if s == 0
        || n % s != 0
        || k_s == 0
        || k_s > s
        || m == 0
        || m > n
        || n % m != 0
        || k_u == 0
        || k_u > n / s
    {
        return config_err(format!(
            "invalid validation sizes n={n} s={s} k_s={k_s} k_u={k_u} m={m}"
        ));
    }
    if opts.concentration_trials < MIN_TAIL_TRIALS || opts.load_trials < MIN_TAIL_TRIALS {
        return config_err(format!(
            "tail checks need at least {MIN_TAIL_TRIALS} trials"
        ));
    }
    let mut checks = threshold_checks(opts)?;
    checks.extend(operator_checks(opts)?);
    checks.extend(concentration_checks(opts)?);
    checks.extend(load_checks(opts)?);
    checks.extend(noncollided_checks(opts)?);
    Ok(checks)
}

/// Every `(u, s, k_u, k_s)` with `u, s <= 4` and `k_u, k_s <= 2`.
pub fn small_threshold_grid() -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    for u in 1..=4 {
        for s in 1..=4 {
            for k_u in 1..=u.min(2) {
                for k_s in 1..=s.min(2) {
                    out.push((u, s, k_u, k_s));
                }
            }
        }
    }
    out
}

/// Fast hierarchical threshold against exhaustive search on small instances.
/// Half the instances draw scores from four integer levels so ties occur often.
pub fn threshold_checks(opts: &ValidationOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (idx, (u, s, k_u, k_s)) in small_threshold_grid().into_iter().enumerate() {
        let mut rng = stream(opts.seed, Purpose::Validation, &[0, idx as u64]);
        let mut mismatches = 0usize;
        for inst in 0..opts.equivalence_instances {
            let g: Vec<f64> = if inst % 2 == 0 {
                (0..u * s).map(|_| rng.random_range(0..4) as f64).collect()
            } else {
                (0..u * s).map(|_| rng.random::<f64>()).collect()
            };
            let fast = hier_threshold(&g, k_u, k_s, u, s)?;
            let slow = brute_force_threshold(&g, k_u, k_s, u, s)?;
            if !fast.same_support(&slow) {
                mismatches += 1;
            }
        }
        out.push(Check::new(
            "threshold_equivalence",
            format!(
                "u={u};s={s};k_u={k_u};k_s={k_s};instances={}",
                opts.equivalence_instances
            ),
            mismatches as f64,
            0.0,
            mismatches == 0,
        ));
    }
    Ok(out)
}

fn random_operator<R: Rng + ?Sized>(
    plan: &std::sync::Arc<DftPlan>,
    m: usize,
    scale: Option<f64>,
    rng: &mut R,
) -> Result<SubsampledDftOperator> {
    let mut rows = sample(rng, plan.n(), m).into_vec();
    rows.sort_unstable();
    let op = SubsampledDftOperator::new(plan.clone(), rows)?;
    Ok(match scale {
        Some(sc) => op.with_scale(sc),
        None => op,
    })
}

fn random_hier_sparse<R: Rng + ?Sized>(
    n: usize,
    s: usize,
    k_u: usize,
    k_s: usize,
    rng: &mut R,
) -> Vec<(usize, C64)> {
    let mut x = Vec::with_capacity(k_u * k_s);
    for b in sample(rng, n / s, k_u) {
        for l in sample(rng, s, k_s) {
            x.push((b * s + l, complex_gaussian(rng, 1.0)));
        }
    }
    let norm = x.iter().map(|(_, v)| v.norm_sqr()).sum::<f64>().sqrt();
    x.iter_mut().for_each(|(_, v)| *v /= norm);
    x
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Adjoint identity, sparse/dense agreement and isometry in expectation.
pub fn operator_checks(opts: &ValidationOptions) -> Result<Vec<Check>> {
    let ValidationOptions {
        n, s, k_s, k_u, m, ..
    } = *opts;
    let plan = DftPlan::new(n);
    let mut rng = stream(opts.seed, Purpose::Validation, &[1]);
    let params = format!("n={n};m={m};k_u={k_u};k_s={k_s}");
    let mut out = Vec::new();

    let (mut adj_err, mut dense_err) = (0.0f64, 0.0f64);
    for _ in 0..PAIR_DRAWS {
        let op = random_operator(&plan, m, opts.operator_scale, &mut rng)?;
        let x: Vec<C64> = (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let y: Vec<C64> = (0..m).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let ax = op.apply_dense(&x)?;
        let ahy = op.adjoint(&y)?;
        adj_err = adj_err.max((dot(&y, &ax) - dot(&ahy, &x)).norm() / (norm(&x) * norm(&y)));

        let xs = random_hier_sparse(n, s, k_u, k_s, &mut rng);
        let mut dense = vec![C64::new(0.0, 0.0); n];
        xs.iter().for_each(|&(c, v)| dense[c] = v);
        let a = op.apply_sparse(xs.iter().copied());
        let b = op.apply_dense(&dense)?;
        let diff: Vec<C64> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
        dense_err = dense_err.max(norm(&diff) / norm(&b).max(f64::MIN_POSITIVE));
    }
    out.push(Check::new(
        "adjoint_identity",
        format!("{params};draws={PAIR_DRAWS}"),
        adj_err,
        EXACT_TOLERANCE,
        adj_err <= EXACT_TOLERANCE,
    ));
    out.push(Check::new(
        "sparse_dense_agreement",
        format!("{params};draws={PAIR_DRAWS}"),
        dense_err,
        EXACT_TOLERANCE,
        dense_err <= EXACT_TOLERANCE,
    ));

    let draws = opts.isometry_draws.max(1);
    let mut energy = 0.0;
    for _ in 0..draws {
        let op = random_operator(&plan, m, opts.operator_scale, &mut rng)?;
        let xs = random_hier_sparse(n, s, k_u, k_s, &mut rng);
        energy += op
            .apply_sparse(xs.iter().copied())
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>();
    }
    let mean = energy / draws as f64;
    out.push(Check::new(
        "isometry_in_expectation",
        format!("{params};draws={draws};tolerance={ISOMETRY_TOLERANCE}"),
        mean,
        1.0,
        (mean - 1.0).abs() <= ISOMETRY_TOLERANCE,
    ));
    Ok(out)
}

/// Multi-slot concentration: the empirical tail never exceeds the bound, and
/// averaging over 100 slots does not widen the tail beyond three standard errors.
pub fn concentration_checks(opts: &ValidationOptions) -> Result<Vec<Check>> {
    let ValidationOptions {
        n, s, k_s, k_u, m, ..
    } = *opts;
    let mut ms = vec![m];
    if 4 * m <= n && n % (4 * m) == 0 {
        ms.push(4 * m);
    }
    let mut out = Vec::new();
    for &mm in &ms {
        let mut tails = Vec::new();
        for &t in &SLOT_GRID {
            let setup = ConcentrationSetup {
                n,
                s,
                k_s,
                k_u,
                m: mm,
                t,
            };
            let tab = empirical_concentration(
                setup,
                opts.concentration_trials,
                &EPS_GRID,
                opts.seed,
                opts.execution,
            )?;
            for row in &tab.rows {
                out.push(Check::new(
                    "concentration_dominance",
                    format!(
                        "n={n};m={mm};t={t};k_u={k_u};k_s={k_s};eps={};trials={}",
                        row.eps, row.trials
                    ),
                    row.empirical,
                    row.bound.clamped,
                    row.empirical <= row.bound.clamped,
                ));
            }
            tails.push(tab.rows);
        }
        let (first, last) = (&tails[0], &tails[tails.len() - 1]);
        for (a, b) in first.iter().zip(last) {
            let slack = 3.0 * (a.std_err * a.std_err + b.std_err * b.std_err).sqrt();
            out.push(Check::new(
                "concentration_slot_decay",
                format!(
                    "n={n};m={mm};t_from={};t_to={};eps={};trials={}",
                    SLOT_GRID[0],
                    SLOT_GRID[SLOT_GRID.len() - 1],
                    a.eps,
                    a.trials
                ),
                b.empirical,
                a.empirical + slack,
                b.empirical <= a.empirical + slack,
            ));
        }
    }
    Ok(out)
}

/// Sub-channel load tail against the capture bound for `k_u = u, 2u, 4u`.
/// Each row reports the load level where the empirical tail comes closest to
/// the bound, relative to the bound.
pub fn load_checks(opts: &ValidationOptions) -> Result<Vec<Check>> {
    let ValidationOptions { n, s, m, .. } = *opts;
    let u = n / s;
    let mut out = Vec::new();
    for k_u in [u, 2 * u, 4 * u].into_iter().filter(|&k| k <= n) {
        let tab =
            empirical_load_distribution(n, m, k_u, opts.load_trials, opts.seed, opts.execution)?;
        let ratio = |r: &LoadRow| {
            if r.bound.clamped > 0.0 {
                r.empirical / r.bound.clamped
            } else if r.empirical > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        };
        let worst = tab
            .rows
            .iter()
            .max_by(|a, b| ratio(a).total_cmp(&ratio(b)).then(b.x.cmp(&a.x)))
            .expect("k_u >= 1 gives at least one row");
        out.push(Check::new(
            "load_tail_dominance",
            format!(
                "n={n};m={m};c={};k_u={k_u};x={};trials={}",
                tab.c, worst.x, tab.trials
            ),
            worst.empirical,
            worst.bound.clamped,
            tab.rows.iter().all(|r| r.empirical <= r.bound.clamped),
        ));
    }
    Ok(out)
}

/// Mean non-collided users on `c n / k_s` resources against the analytic lower
/// bound, with three standard errors of slack.
pub fn noncollided_checks(opts: &ValidationOptions) -> Result<Vec<Check>> {
    let ValidationOptions { n, s, k_s, m, .. } = *opts;
    let (u, c) = (n / s, n / m);
    let resources = c * n / k_s;
    let mut out = Vec::new();
    for k_u in [u / 16, u / 8, u / 4, u / 2]
        .into_iter()
        .filter(|&k| k >= 2)
    {
        let est = empirical_noncollided(
            k_u,
            resources,
            opts.noncollided_trials,
            opts.seed,
            opts.execution,
        )?;
        let bound = expected_noncollided(k_u, k_s, c, n);
        out.push(Check::new(
            "noncollided_mean",
            format!(
                "n={n};c={c};k_s={k_s};k_u={k_u};resources={resources};trials={}",
                est.trials
            ),
            est.mean,
            bound,
            est.mean + 3.0 * est.std_err >= bound,
        ));
    }
    Ok(out)
}
