//! Channel and data estimation on a detected support.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::LeastSquares;
use crate::measurement::SubsampledDftOperator;
use crate::model::qpsk_decide;
use crate::C64;

use super::threshold::SupportEstimate;

/// Coefficients on a set of columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    pub cols: Vec<usize>,
    pub values: Vec<C64>,
}

impl SparseEstimate {
    pub fn to_dense(&self, n: usize) -> Vec<C64> {
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (&c, &v) in self.cols.iter().zip(&self.values) {
            x[c] = v;
        }
        x
    }
}

/// Least-squares solver restricted to the support columns of an operator.
pub struct SupportSolver {
    cols: Vec<usize>,
    ls: Option<LeastSquares>,
}

impl SupportSolver {
    pub fn new(op: &SubsampledDftOperator, cols: Vec<usize>) -> Result<Self> {
        if cols.len() > op.m() {
            return Err(Error::RankDeficient {
                support: cols.len(),
                m: op.m(),
            });
        }
        let ls = (!cols.is_empty()).then(|| {
            let a = DMatrix::from_fn(op.m(), cols.len(), |q, k| op.entry(q, cols[k]));
            LeastSquares::new(a)
        });
        Ok(SupportSolver { cols, ls })
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn solve(&self, y: &[C64]) -> Vec<C64> {
        match &self.ls {
            Some(ls) => ls.solve(y),
            None => Vec::new(),
        }
    }
}

/// Least-squares channel estimate from the pilot slot on `support`.
pub fn estimate_channel(
    op: &SubsampledDftOperator,
    y0: &[C64],
    support: &SupportEstimate,
) -> Result<SparseEstimate> {
    if y0.len() != op.m() {
        return Err(Error::DimensionMismatch {
            expected: op.m(),
            got: y0.len(),
        });
    }
    let solver = SupportSolver::new(op, support.columns())?;
    let values = solver.solve(y0);
    Ok(SparseEstimate {
        cols: solver.cols,
        values,
    })
}

/// QPSK decisions `[slot - 1][k]` for every block `k` of `support`, one slot
/// per entry of `data_slots`. `None` marks an erasure (no channel energy).
///
/// Each slot is re-estimated by least squares on the support, then matched
/// against the channel estimate block by block, which is valid because the
/// data modulation is constant within a block.
pub fn estimate_data(
    op: &SubsampledDftOperator,
    data_slots: &[&[C64]],
    support: &SupportEstimate,
    channel: &SparseEstimate,
) -> Result<Vec<Vec<Option<C64>>>> {
    let solver = SupportSolver::new(op, support.columns())?;
    if solver.cols != channel.cols {
        return Err(Error::DimensionMismatch {
            expected: solver.cols.len(),
            got: channel.cols.len(),
        });
    }
    let mut out = Vec::with_capacity(data_slots.len());
    for y in data_slots {
        if y.len() != op.m() {
            return Err(Error::DimensionMismatch {
                expected: op.m(),
                got: y.len(),
            });
        }
        let v = solver.solve(y);
        let mut offset = 0;
        let decisions = support
            .blocks
            .iter()
            .map(|blk| {
                let range = offset..offset + blk.taps.len();
                offset = range.end;
                let h = &channel.values[range.clone()];
                let num: C64 = h.iter().zip(&v[range]).map(|(a, b)| a.conj() * b).sum();
                let den: f64 = h.iter().map(|a| a.norm_sqr()).sum();
                (den > 0.0 && den.is_finite()).then(|| qpsk_decide(num / den))
            })
            .collect();
        out.push(decisions);
    }
    Ok(out)
}
