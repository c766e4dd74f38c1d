use std::path::{Path, PathBuf};

use hicap::bounds::{
    capture_bound, conc_bound_multislot, conc_bound_standard, expected_noncollided, pmd_bound,
    BoundInputs, BoundValue,
};
use hicap::montecarlo::{run_experiment, ExperimentSpec};
use hicap::rng::{stream, Purpose};
use hicap::validation::{run_validation, ValidationOptions};
use hicap::{Execution, SystemConfig};

use crate::config::{format_snr, RunConfig};
use crate::output::{
    fmt_f64, metrics_table, summary_table, validation_table, BoundsGrid, Invocation, ResolvedPoint,
    RunManifest, Table, ValidateConfig,
};
use crate::{BoundsArgs, CliError, RerunArgs, SimulateArgs, SweepArgs, ValidateArgs};

pub const MANIFEST: &str = "manifest.json";
pub const METRICS: &str = "metrics.csv";
pub const SUMMARY: &str = "summary.csv";
pub const BOUNDS: &str = "bounds.csv";
pub const VALIDATION: &str = "validation.csv";

/// `n` values of the default sweep.
pub const DEFAULT_SWEEP_N: [usize; 4] = [1 << 10, 1 << 11, 1 << 12, 1 << 13];
/// SNR values of the default sweep; `None` is noise free.
pub const DEFAULT_SWEEP_SNR_DB: [Option<f64>; 4] = [None, Some(10.0), Some(0.0), Some(-10.0)];

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = args.scenario.resolve()?;
    execute(&Invocation::Simulate { config }, &args.out_dir)
}

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let mut config = args.scenario.resolve()?;
    for spec in &args.over {
        let (key, list) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--over expects KEY=LIST, got `{spec}`")))?;
        config
            .set(0, &format!("sweep.{}", key.trim()), list)
            .map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!(
                    "--over {spec}: {}",
                    msg.trim_start_matches("line 0: ")
                )),
                other => other,
            })?;
    }
    if config.sweep.is_empty() {
        config.sweep.n = DEFAULT_SWEEP_N.to_vec();
        config.sweep.snr_db = DEFAULT_SWEEP_SNR_DB.to_vec();
    }
    execute(&Invocation::Sweep { config }, &args.out_dir)
}

pub fn bounds(args: &BoundsArgs) -> Result<(), CliError> {
    let grid = BoundsGrid {
        n: args.n.clone(),
        m: args.m.clone(),
        k_u: args.k_u.clone(),
        t: args.t.clone(),
        eps: args.eps.clone(),
        x: args.x.clone(),
        xi: args.xi.clone(),
        s: args.s,
        k_s: args.k_s,
        snr_db: args.snr_db.0,
        draws: args.draws,
        c1: args.c1,
        c2: args.c2,
        seed: args.seed,
    };
    execute(&Invocation::Bounds { grid }, &args.out_dir)
}

pub fn validate(args: &ValidateArgs) -> Result<(), CliError> {
    let mut base = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = args.n {
        base.n = n;
    }
    if let Some(seed) = args.seed {
        base.seed = seed;
    }
    let dims = SystemConfig::new(base.params())?;
    let options = ValidateConfig {
        n: dims.n,
        s: dims.s,
        k_s: dims.k_s,
        k_u: dims.kbar_u,
        m: dims.m,
        concentration_trials: args.trials,
        load_trials: args.load_trials,
        noncollided_trials: args.noncollided_trials,
        isometry_draws: args.isometry_draws,
        equivalence_instances: args.equivalence_instances,
        operator_scale: args.operator_scale,
        seed: dims.seed,
    };
    execute(&Invocation::Validate { options }, &args.out_dir)
}

pub fn rerun(args: &RerunArgs) -> Result<(), CliError> {
    let manifest = RunManifest::read(&args.manifest)?;
    let out_dir = match &args.out_dir {
        Some(dir) => dir.clone(),
        None => args
            .manifest
            .parent()
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf),
    };
    execute(&manifest.invocation, &out_dir)
}

/// Runs an invocation and writes its outputs and manifest into `out_dir`.
pub fn execute(invocation: &Invocation, out_dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let (seed, resolved, outputs, failed) = match invocation {
        Invocation::Simulate { config } | Invocation::Sweep { config } => {
            let resolved = run_simulation(config, out_dir)?;
            (config.seed, resolved, vec![METRICS, SUMMARY], 0)
        }
        Invocation::Bounds { grid } => {
            bounds_table(grid)?.write(&out_dir.join(BOUNDS))?;
            (grid.seed, Vec::new(), vec![BOUNDS], 0)
        }
        Invocation::Validate { options } => {
            let failed = run_checks(options, out_dir)?;
            (options.seed, Vec::new(), vec![VALIDATION], failed)
        }
    };
    let outputs = outputs.into_iter().map(String::from).collect();
    RunManifest::new(invocation.clone(), seed, resolved, outputs).write(&out_dir.join(MANIFEST))?;
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}

fn run_simulation(config: &RunConfig, out_dir: &Path) -> Result<Vec<ResolvedPoint>, CliError> {
    let spec = ExperimentSpec {
        points: config.points(),
        trials: config.trials,
        execution: Execution::default(),
    };
    log::info!(
        "simulating {} point(s) x {} trial(s)",
        spec.points.len(),
        spec.trials
    );
    let result = run_experiment(&spec)?;
    log::info!("finished in {:.2?}", result.elapsed);
    metrics_table(&result.points).write(&out_dir.join(METRICS))?;
    summary_table(&result.points, config.subcarrier_spacing_hz).write(&out_dir.join(SUMMARY))?;
    Ok(result
        .points
        .iter()
        .map(|p| ResolvedPoint {
            n: p.config.n,
            u: p.config.u,
            kbar_u: p.config.kbar_u,
            m: p.config.m,
            c: p.config.c,
            t: p.config.t,
            sigma2: p.config.sigma2(),
        })
        .collect())
}

fn run_checks(options: &ValidateConfig, out_dir: &Path) -> Result<usize, CliError> {
    let opts = ValidationOptions {
        n: options.n,
        s: options.s,
        k_s: options.k_s,
        k_u: options.k_u,
        m: options.m,
        concentration_trials: options.concentration_trials,
        load_trials: options.load_trials,
        noncollided_trials: options.noncollided_trials,
        isometry_draws: options.isometry_draws,
        equivalence_instances: options.equivalence_instances,
        operator_scale: options.operator_scale,
        seed: options.seed,
        execution: Execution::default(),
    };
    let checks = run_validation(&opts)?;
    validation_table(&checks).write(&out_dir.join(VALIDATION))?;
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
    for c in &failed {
        log::warn!(
            "check {} failed at {}: empirical {} vs bound {}",
            c.name,
            c.parameters,
            c.empirical,
            c.bound
        );
    }
    Ok(failed.len())
}

/// Five rows per grid point: the two concentration bounds, the missed-detection
/// bound, the capture bound and the non-collided lower bound.
pub fn bounds_table(grid: &BoundsGrid) -> Result<Table, CliError> {
    let axes = [
        ("n", grid.n.len()),
        ("m", grid.m.len()),
        ("k_u", grid.k_u.len()),
        ("t", grid.t.len()),
        ("eps", grid.eps.len()),
        ("x", grid.x.len()),
        ("xi", grid.xi.len()),
    ];
    if let Some((name, _)) = axes.iter().find(|(_, len)| *len == 0) {
        return Err(CliError::Config(format!(
            "bounds grid axis `{name}` is empty"
        )));
    }
    let sigma2 = grid.snr_db.map_or(0.0, |db| 10f64.powf(-db / 10.0));
    let mut table = Table::new(&[
        "bound_name",
        "n",
        "s",
        "k_s",
        "k_u",
        "m",
        "c",
        "t",
        "eps",
        "x",
        "xi",
        "snr_db",
        "raw_value",
        "clamped_value",
    ]);
    let mut point = 0u64;
    for &n in &grid.n {
        for &m in &grid.m {
            if m == 0 || m > n || n % m != 0 {
                return Err(CliError::Config(format!("m = {m} must divide n = {n}")));
            }
            if grid.s == 0 || n % grid.s != 0 {
                return Err(CliError::Config(format!(
                    "s = {} must divide n = {n}",
                    grid.s
                )));
            }
            let c = n / m;
            for &k_u in &grid.k_u {
                for &t in &grid.t {
                    for &eps in &grid.eps {
                        for &x in &grid.x {
                            for &xi in &grid.xi {
                                let mut inputs =
                                    BoundInputs::new(n, grid.s, grid.k_s, m, t, sigma2);
                                inputs.draws = grid.draws;
                                inputs.c1 = grid.c1;
                                inputs.c2 = grid.c2;
                                let mut rng = stream(grid.seed, Purpose::Estimator, &[point]);
                                point += 1;
                                let noncollided = expected_noncollided(k_u, grid.k_s, c, n);
                                let rows: [(&str, BoundValue); 5] = [
                                    (
                                        "conc_standard",
                                        conc_bound_standard(k_u * grid.k_s, m, eps)?,
                                    ),
                                    (
                                        "conc_multislot",
                                        conc_bound_multislot(m, grid.k_s, k_u, t, eps)?,
                                    ),
                                    ("pmd", pmd_bound(xi, x, eps, &inputs, &mut rng)?.value),
                                    ("capture", capture_bound(n, k_u, x)?),
                                    (
                                        "expected_noncollided",
                                        BoundValue {
                                            raw: noncollided,
                                            clamped: noncollided.max(0.0),
                                        },
                                    ),
                                ];
                                for (name, v) in rows {
                                    table.row(&[
                                        name.to_string(),
                                        n.to_string(),
                                        grid.s.to_string(),
                                        grid.k_s.to_string(),
                                        k_u.to_string(),
                                        m.to_string(),
                                        c.to_string(),
                                        t.to_string(),
                                        fmt_f64(eps),
                                        x.to_string(),
                                        fmt_f64(xi),
                                        format_snr(grid.snr_db),
                                        fmt_f64(v.raw),
                                        fmt_f64(v.clamped),
                                    ]);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(table)
}
