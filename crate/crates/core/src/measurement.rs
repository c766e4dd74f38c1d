//! Subsampled DFT operators and multi-slot observation synthesis.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{config_err, Error, Result};
use crate::model::{complex_gaussian, DataSymbols, HierSparseSignal, Scenario, SystemConfig};
use crate::C64;

/// Shared FFT plans and twiddle table for one transform length.
pub struct DftPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `twiddles[k] = exp(-2πi k / n)`.
    twiddles: Vec<C64>,
}

impl fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DftPlan").field("n", &self.n).finish()
    }
}

impl DftPlan {
    pub fn new(n: usize) -> Arc<Self> {
        let mut planner = FftPlanner::new();
        let twiddles = (0..n)
            .map(|k| C64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Arc::new(DftPlan {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            twiddles,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// In-place unnormalized forward DFT, `X_j = Σ_k x_k e^{-2πi jk/n}`.
    pub fn forward(&self, buf: &mut [C64]) {
        self.forward.process(buf);
    }

    /// In-place unnormalized inverse DFT, `x_k = Σ_j X_j e^{+2πi jk/n}`.
    pub fn inverse(&self, buf: &mut [C64]) {
        self.inverse.process(buf);
    }

    #[inline]
    fn twiddle(&self, row: usize, col: usize) -> C64 {
        self.twiddles[((row as u64 * col as u64) % self.n as u64) as usize]
    }
}

/// `m` selected rows of the `n`-point DFT, scaled so that `E‖Ax‖² = ‖x‖²`
/// under uniformly drawn rows: entries are `e^{-2πi r k / n} / √m`.
#[derive(Debug, Clone)]
pub struct SubsampledDftOperator {
    rows: Vec<usize>,
    scale: f64,
    plan: Arc<DftPlan>,
}

impl SubsampledDftOperator {
    pub fn new(plan: Arc<DftPlan>, rows: Vec<usize>) -> Result<Self> {
        let n = plan.n();
        if rows.is_empty() || rows.len() > n {
            return config_err(format!("row count {} must lie in [1, {n}]", rows.len()));
        }
        let mut seen = vec![false; n];
        for &r in &rows {
            if r >= n || std::mem::replace(&mut seen[r], true) {
                return config_err(format!("row {r} is out of range or repeated"));
            }
        }
        let scale = 1.0 / (rows.len() as f64).sqrt();
        Ok(SubsampledDftOperator { rows, scale, plan })
    }

    /// Overrides the entry scale. Only meant for fault injection in validation.
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn n(&self) -> usize {
        self.plan.n()
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn plan(&self) -> &Arc<DftPlan> {
        &self.plan
    }

    #[inline]
    pub fn entry(&self, q: usize, col: usize) -> C64 {
        self.plan.twiddle(self.rows[q], col) * self.scale
    }

    /// Column `col` of the operator.
    pub fn column(&self, col: usize) -> Vec<C64> {
        (0..self.m()).map(|q| self.entry(q, col)).collect()
    }

    /// `A x` for `x` given by its nonzero entries, cost `O(m · nnz)`.
    pub fn apply_sparse<I>(&self, entries: I) -> Vec<C64>
    where
        I: IntoIterator<Item = (usize, C64)>,
    {
        let mut out = vec![C64::new(0.0, 0.0); self.m()];
        for (k, v) in entries {
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            for (q, o) in out.iter_mut().enumerate() {
                *o += self.plan.twiddle(self.rows[q], k) * v;
            }
        }
        for o in &mut out {
            *o *= self.scale;
        }
        out
    }

    /// `A x` over the nonzeros of a dense vector.
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.check_len(x.len(), self.n())?;
        Ok(self.apply_sparse(x.iter().copied().enumerate()))
    }

    /// `A x` by a full `n`-point FFT followed by row selection.
    pub fn apply_dense(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.check_len(x.len(), self.n())?;
        let mut buf = x.to_vec();
        self.plan.forward(&mut buf);
        Ok(self.rows.iter().map(|&r| buf[r] * self.scale).collect())
    }

    /// `A^H y`: scatter onto the selected frequencies and inverse transform.
    pub fn adjoint(&self, y: &[C64]) -> Result<Vec<C64>> {
        self.check_len(y.len(), self.m())?;
        let mut buf = vec![C64::new(0.0, 0.0); self.n()];
        for (&r, &v) in self.rows.iter().zip(y) {
            buf[r] = v;
        }
        self.plan.inverse(&mut buf);
        for b in &mut buf {
            *b *= self.scale;
        }
        Ok(buf)
    }

    /// `(A^H y)_col` evaluated directly.
    pub fn adjoint_at(&self, y: &[C64], col: usize) -> C64 {
        y.iter()
            .enumerate()
            .map(|(q, v)| self.entry(q, col).conj() * v)
            .sum()
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<()> {
        if got == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}

/// A random permutation of `[n]` cut into `floor(n/m)` chunks of `m`; the
/// remaining `n mod m` indices are dropped.
pub fn make_partition<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if m == 0 || m > n {
        return config_err(format!("m = {m} must lie in [1, n = {n}]"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    Ok(perm.chunks_exact(m).map(<[usize]>::to_vec).collect())
}

/// Multiplies every entry of block `b` by `symbols[b]`.
pub fn modulate(x: &HierSparseSignal, symbols: &[C64]) -> Result<Vec<C64>> {
    let u = x.n() / x.s;
    if symbols.len() != u {
        return Err(Error::DimensionMismatch {
            expected: u,
            got: symbols.len(),
        });
    }
    Ok(x.values
        .chunks_exact(x.s)
        .zip(symbols)
        .flat_map(|(blk, &d)| blk.iter().map(move |&v| v * d))
        .collect())
}

/// Adds `CN(0, sigma2 / n)` noise to every entry.
pub fn add_noise<R: Rng + ?Sized>(y: &mut [C64], sigma2: f64, n: usize, rng: &mut R) {
    if sigma2 <= 0.0 {
        return;
    }
    let var = sigma2 / n as f64;
    for v in y {
        *v += complex_gaussian(rng, var);
    }
}

/// Observations `y[j][i][q]`, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementTensor {
    c: usize,
    t: usize,
    m: usize,
    data: Vec<C64>,
}

impl MeasurementTensor {
    pub fn zeros(c: usize, t: usize, m: usize) -> Self {
        MeasurementTensor {
            c,
            t,
            m,
            data: vec![C64::new(0.0, 0.0); c * t * m],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.t, self.m)
    }

    pub fn get(&self, j: usize, i: usize, q: usize) -> C64 {
        self.data[(j * self.t + i) * self.m + q]
    }

    pub fn slot(&self, j: usize, i: usize) -> &[C64] {
        let start = (j * self.t + i) * self.m;
        &self.data[start..start + self.m]
    }

    fn slot_mut(&mut self, j: usize, i: usize) -> &mut [C64] {
        let start = (j * self.t + i) * self.m;
        &mut self.data[start..start + self.m]
    }

    /// All `t` slots of sub-channel `j`.
    pub fn slots(&self, j: usize) -> Vec<&[C64]> {
        (0..self.t).map(|i| self.slot(j, i)).collect()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Adds `CN(0, sigma2 / n)` noise to every observation.
    pub fn add_noise<R: Rng + ?Sized>(&mut self, sigma2: f64, n: usize, rng: &mut R) {
        add_noise(&mut self.data, sigma2, n, rng);
    }
}

/// One operator per sub-channel from a fresh random partition.
pub fn make_operators<R: Rng + ?Sized>(
    config: &SystemConfig,
    plan: &Arc<DftPlan>,
    rng: &mut R,
) -> Result<Vec<SubsampledDftOperator>> {
    make_partition(config.n, config.m, rng)?
        .into_iter()
        .map(|rows| SubsampledDftOperator::new(plan.clone(), rows))
        .collect()
}

/// Noise-free `y_i^j = A_j D_i h^j` for every sub-channel and slot.
///
/// `A_j D_i h^j = Σ_b d_{i,b} A_j h^j_b`, so the per-block images are formed once
/// and recombined per slot.
pub fn encode_clean(
    config: &SystemConfig,
    channels: &[HierSparseSignal],
    data: &DataSymbols,
    operators: &[SubsampledDftOperator],
) -> Result<MeasurementTensor> {
    if channels.len() != config.c || operators.len() != config.c {
        return Err(Error::DimensionMismatch {
            expected: config.c,
            got: channels.len().min(operators.len()),
        });
    }
    let mut y = MeasurementTensor::zeros(config.c, config.t, config.m);
    for (j, (h, op)) in channels.iter().zip(operators).enumerate() {
        if op.m() != config.m || h.n() != config.n {
            return Err(Error::DimensionMismatch {
                expected: config.m,
                got: op.m(),
            });
        }
        let images: Vec<(usize, Vec<C64>)> = h
            .block_support
            .iter()
            .zip(&h.inblock_support)
            .map(|(&b, taps)| {
                let entries = taps.iter().map(|&l| (b * h.s + l, h.values[b * h.s + l]));
                (b, op.apply_sparse(entries))
            })
            .collect();
        for i in 0..config.t {
            let out = y.slot_mut(j, i);
            for (b, img) in &images {
                let d = data.symbol(j, i, *b);
                for (o, v) in out.iter_mut().zip(img) {
                    *o += d * v;
                }
            }
        }
    }
    Ok(y)
}

/// Noisy observations plus the operators that produced them.
pub fn simulate_uplink<R1, R2>(
    config: &SystemConfig,
    scenario: &Scenario,
    plan: &Arc<DftPlan>,
    partition_rng: &mut R1,
    noise_rng: &mut R2,
) -> Result<(MeasurementTensor, Vec<SubsampledDftOperator>)>
where
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    let operators = make_operators(config, plan, partition_rng)?;
    let mut y = encode_clean(config, &scenario.channels, &scenario.data, &operators)?;
    y.add_noise(config.sigma2(), config.n, noise_rng);
    Ok((y, operators))
}
