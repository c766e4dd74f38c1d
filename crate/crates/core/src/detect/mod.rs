//! Hierarchical support recovery, activity decision and per-trial scoring.
//!
//! The detection statistic is the slot-averaged energy of the correlation
//! image, `g_l = (1/t) Σ_i |(A^H y_i)_l|²`. [`block_scores`] computes it from
//! explicit adjoint images. [`slot_energy`] computes the same quantity from
//! the `m × m` sample covariance of the slots: with rows `r_q`,
//!
//! `g_l = (1/m) Σ_{q,q'} R_{qq'} e^{2πi (r_q - r_{q'}) l / n}`,
//!
//! which is one inverse FFT of the covariance folded onto row differences.
//! That costs `O(t m² + n log n)` instead of `O(t n log n)`.

mod estimate;
mod metrics;
mod threshold;

pub use estimate::{estimate_channel, estimate_data, SparseEstimate, SupportSolver};
pub use metrics::{evaluate_trial, TrialMetrics};
pub use threshold::{
    activity_decision, brute_force_threshold, hier_threshold, BlockSelection, SupportEstimate,
};

use crate::error::{Error, Result};
use crate::measurement::SubsampledDftOperator;
use crate::model::SystemConfig;
use crate::C64;

/// `g_l = (1/t) Σ_i |image_i[l]|²` over `t` adjoint images of length `u·s`.
pub fn block_scores(adjoint_images: &[Vec<C64>], u: usize, s: usize) -> Result<Vec<f64>> {
    let n = u * s;
    let mut g = vec![0.0; n];
    if adjoint_images.is_empty() {
        return Ok(g);
    }
    for img in adjoint_images {
        if img.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: img.len(),
            });
        }
        for (acc, v) in g.iter_mut().zip(img) {
            *acc += v.norm_sqr();
        }
    }
    let t = adjoint_images.len() as f64;
    g.iter_mut().for_each(|v| *v /= t);
    Ok(g)
}

/// Slot-averaged adjoint energy via the covariance route; equal to
/// `block_scores` of the explicit adjoint images up to rounding.
pub fn slot_energy(op: &SubsampledDftOperator, slots: &[&[C64]]) -> Result<Vec<f64>> {
    let (n, m) = (op.n(), op.m());
    let mut folded = vec![C64::new(0.0, 0.0); n];
    if slots.is_empty() {
        return Ok(vec![0.0; n]);
    }
    let mut cov = vec![C64::new(0.0, 0.0); m * m];
    for y in slots {
        if y.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: y.len(),
            });
        }
        for q in 0..m {
            let yq = y[q];
            let row = &mut cov[q * m..(q + 1) * m];
            for (c, yp) in row.iter_mut().zip(y.iter()) {
                *c += yq * yp.conj();
            }
        }
    }
    let rows = op.rows();
    for q in 0..m {
        for p in 0..m {
            let delta = (rows[q] + n - rows[p]) % n;
            folded[delta] += cov[q * m + p];
        }
    }
    op.plan().inverse(&mut folded);
    let w = op.scale() * op.scale() / slots.len() as f64;
    Ok(folded.iter().map(|v| (v.re * w).max(0.0)).collect())
}

/// Like [`slot_energy`] for images `x̂_i + A^H r_i`, where each `x̂_i` lives on
/// `cols` with values `estimates[i]`.
fn slot_energy_with_estimate(
    op: &SubsampledDftOperator,
    residuals: &[Vec<C64>],
    cols: &[usize],
    estimates: &[Vec<C64>],
) -> Result<Vec<f64>> {
    let slots: Vec<&[C64]> = residuals.iter().map(Vec::as_slice).collect();
    let mut g = slot_energy(op, &slots)?;
    let t = residuals.len() as f64;
    for (k, &col) in cols.iter().enumerate() {
        let e: f64 = residuals
            .iter()
            .zip(estimates)
            .map(|(r, x)| (x[k] + op.adjoint_at(r, col)).norm_sqr())
            .sum();
        g[col] = e / t;
    }
    Ok(g)
}

/// Result of the residual iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct HiIhtOutcome {
    pub support: SupportEstimate,
    pub iterations_run: usize,
    /// The support repeated before the iteration cap was reached.
    pub converged: bool,
}

/// Hierarchical IHT on the joint support of all slots.
///
/// The first iteration thresholds the slot-averaged correlation energy. Every
/// further iteration fits each slot by least squares on the current support,
/// re-encodes, adds the adjoint of the residual to the estimate and
/// re-thresholds. It stops at the cap or when the support repeats.
pub fn hiiht_iterate(
    op: &SubsampledDftOperator,
    slots: &[&[C64]],
    k_u: usize,
    k_s: usize,
    s: usize,
    iterations: usize,
) -> Result<HiIhtOutcome> {
    if iterations == 0 {
        return Err(Error::Config("iterations must be at least 1".into()));
    }
    let u = op.n() / s;
    let g = slot_energy(op, slots)?;
    let mut support = hier_threshold(&g, k_u, k_s, u, s)?;
    let mut iterations_run = 1;
    let mut converged = false;
    while iterations_run < iterations {
        let solver = SupportSolver::new(op, support.columns())?;
        let estimates: Vec<Vec<C64>> = slots.iter().map(|y| solver.solve(y)).collect();
        let residuals: Vec<Vec<C64>> = slots
            .iter()
            .zip(&estimates)
            .map(|(y, x)| {
                let fit = op.apply_sparse(solver.cols().iter().copied().zip(x.iter().copied()));
                y.iter().zip(&fit).map(|(a, b)| a - b).collect()
            })
            .collect();
        let g = slot_energy_with_estimate(op, &residuals, solver.cols(), &estimates)?;
        let next = hier_threshold(&g, k_u, k_s, u, s)?;
        iterations_run += 1;
        if next.same_support(&support) {
            support = next;
            converged = true;
            break;
        }
        support = next;
    }
    Ok(HiIhtOutcome {
        support,
        iterations_run,
        converged,
    })
}

/// Everything the detector produced for one sub-channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SubchannelDetection {
    pub support: SupportEstimate,
    /// Sorted blocks declared active.
    pub active_blocks: Vec<usize>,
    pub iterations_run: usize,
    /// Pilot-slot channel estimate, when the support fits in `m` measurements.
    pub channel: Option<SparseEstimate>,
    /// `decisions[i - 1][k]` for slot `i` and block `support.blocks[k]`.
    pub decisions: Option<Vec<Vec<Option<C64>>>>,
}

/// Full receiver chain on the `t` slots of one sub-channel.
pub fn detect_subchannel(
    config: &SystemConfig,
    op: &SubsampledDftOperator,
    slots: &[&[C64]],
) -> Result<SubchannelDetection> {
    let HiIhtOutcome {
        support,
        iterations_run,
        ..
    } = hiiht_iterate(
        op,
        slots,
        config.kbar_u,
        config.k_s,
        config.s,
        config.iterations,
    )?;
    let active_blocks = activity_decision(&support, config.detector_mode, config.t)?;
    let (channel, decisions) = if support.columns().len() <= op.m() {
        let channel = estimate_channel(op, slots[0], &support)?;
        let decisions = estimate_data(op, &slots[1..], &support, &channel)?;
        (Some(channel), Some(decisions))
    } else {
        (None, None)
    };
    Ok(SubchannelDetection {
        support,
        active_blocks,
        iterations_run,
        channel,
        decisions,
    })
}
