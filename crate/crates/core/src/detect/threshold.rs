//! Hierarchical hard thresholding and the activity decision.

use std::cmp::Ordering;

use crate::error::{config_err, Error, Result};
use crate::model::DetectorMode;

/// One selected block and its in-block taps.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSelection {
    pub block: usize,
    /// Sorted in-block indices.
    pub taps: Vec<usize>,
    /// Sum of the energies at `taps`.
    pub score: f64,
}

/// Output of hierarchical thresholding for one sub-channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportEstimate {
    pub s: usize,
    /// Sorted by block index.
    pub blocks: Vec<BlockSelection>,
    /// Set when the input carried no energy, so the selection is pure tie-break.
    pub degenerate: bool,
}

impl SupportEstimate {
    pub fn block_ids(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.block).collect()
    }

    /// Flat column indices of the support, ascending.
    pub fn columns(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .flat_map(|b| b.taps.iter().map(move |&l| b.block * self.s + l))
            .collect()
    }

    /// Same blocks and taps, ignoring scores.
    pub fn same_support(&self, other: &SupportEstimate) -> bool {
        self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| a.block == b.block && a.taps == b.taps)
    }
}

fn check_dims(g: &[f64], k_u: usize, k_s: usize, u: usize, s: usize) -> Result<()> {
    if g.len() != u * s {
        return Err(Error::DimensionMismatch {
            expected: u * s,
            got: g.len(),
        });
    }
    if k_s == 0 || k_s > s {
        return config_err(format!("k_s = {k_s} must lie in [1, s = {s}]"));
    }
    if k_u == 0 || k_u > u {
        return config_err(format!("k_u = {k_u} must lie in [1, u = {u}]"));
    }
    Ok(())
}

/// Descending by value, ascending by index on ties.
fn rank(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

fn sum_at(block: &[f64], taps: &[usize]) -> f64 {
    taps.iter().map(|&l| block[l]).sum()
}

/// Support of the best `(k_u, k_s)`-hierarchically sparse approximation of
/// energies `g`: top `k_s` entries per block, then the `k_u` blocks with the
/// largest captured energy. Ties go to the lower index at both levels.
pub fn hier_threshold(
    g: &[f64],
    k_u: usize,
    k_s: usize,
    u: usize,
    s: usize,
) -> Result<SupportEstimate> {
    check_dims(g, k_u, k_s, u, s)?;
    let mut candidates: Vec<BlockSelection> = g
        .chunks_exact(s)
        .enumerate()
        .map(|(block, vals)| {
            let mut idx: Vec<(usize, f64)> = vals.iter().copied().enumerate().collect();
            idx.sort_by(|&a, &b| rank(a, b));
            let mut taps: Vec<usize> = idx[..k_s].iter().map(|&(l, _)| l).collect();
            taps.sort_unstable();
            let score = sum_at(vals, &taps);
            BlockSelection { block, taps, score }
        })
        .collect();
    candidates.sort_by(|a, b| rank((a.block, a.score), (b.block, b.score)));
    candidates.truncate(k_u);
    candidates.sort_by_key(|b| b.block);
    Ok(SupportEstimate {
        s,
        blocks: candidates,
        degenerate: !g.iter().any(|&v| v > 0.0),
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Exhaustive search over every `(k_u, k_s)`-hierarchical support for the one
/// capturing the most energy. Candidates are visited in lexicographic order
/// and only a strictly larger energy replaces the incumbent.
pub fn brute_force_threshold(
    g: &[f64],
    k_u: usize,
    k_s: usize,
    u: usize,
    s: usize,
) -> Result<SupportEstimate> {
    check_dims(g, k_u, k_s, u, s)?;
    let count = binomial(u, k_u).saturating_mul(binomial(s, k_s).saturating_pow(k_u as u32));
    if count > 1_000_000 {
        return Err(Error::InstanceTooLarge(count));
    }
    let block_sets = subsets(u, k_u);
    let tap_sets = subsets(s, k_s);

    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for blocks in &block_sets {
        // Odometer over the tap-set choice of every selected block.
        let mut choice = vec![0usize; k_u];
        'odometer: loop {
            let energy: f64 = blocks
                .iter()
                .zip(&choice)
                .map(|(&b, &c)| sum_at(&g[b * s..(b + 1) * s], &tap_sets[c]))
                .sum();
            if best.as_ref().is_none_or(|(e, _, _)| energy > *e) {
                best = Some((energy, blocks.clone(), choice.clone()));
            }
            let mut pos = k_u;
            loop {
                if pos == 0 {
                    break 'odometer;
                }
                pos -= 1;
                choice[pos] += 1;
                if choice[pos] < tap_sets.len() {
                    break;
                }
                choice[pos] = 0;
            }
        }
    }
    let (_, blocks, choice) = best.expect("at least one candidate");
    let blocks = blocks
        .into_iter()
        .zip(choice)
        .map(|(block, c)| {
            let taps = tap_sets[c].clone();
            let score = sum_at(&g[block * s..(block + 1) * s], &taps);
            BlockSelection { block, taps, score }
        })
        .collect();
    Ok(SupportEstimate {
        s,
        blocks,
        degenerate: !g.iter().any(|&v| v > 0.0),
    })
}

/// Blocks declared active. Block scores are slot averages, so the slot-summed
/// captured energy of a block is `t · score`.
pub fn activity_decision(
    support: &SupportEstimate,
    mode: DetectorMode,
    t: usize,
) -> Result<Vec<usize>> {
    match mode {
        DetectorMode::TopK => Ok(support.block_ids()),
        DetectorMode::Threshold { xi } => {
            if !(xi >= 0.0) {
                return config_err(format!("threshold xi = {xi} must be nonnegative"));
            }
            let floor = t as f64 * xi;
            Ok(support
                .blocks
                .iter()
                .filter(|b| t as f64 * b.score >= floor)
                .map(|b| b.block)
                .collect())
        }
    }
}
