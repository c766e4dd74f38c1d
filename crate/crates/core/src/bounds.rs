//! Closed-form tail, missed-detection and collision bounds.
//!
//! Every probability bound reports its raw value next to the value clamped to
//! `[0, 1]`; several of them exceed one for small parameters. Logarithms are
//! natural.

use std::f64::consts::{E, PI};

use rand::Rng;

use crate::error::{config_err, Result};
use crate::model::complex_gaussian;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub raw: f64,
    pub clamped: f64,
}

impl BoundValue {
    fn probability(raw: f64) -> Self {
        BoundValue {
            raw,
            clamped: if raw.is_nan() {
                1.0
            } else {
                raw.clamp(0.0, 1.0)
            },
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        config_err(format!("{name} = {v} must be positive and finite"))
    }
}

/// Single-snapshot concentration of `‖Ax‖²` for a `k`-sparse `x`:
/// `2 exp(-(ε² m / 2k) / (1 + 2√(k/m) + ε/3))`.
pub fn conc_bound_standard(k: usize, m: usize, eps: f64) -> Result<BoundValue> {
    positive("k", k as f64)?;
    positive("m", m as f64)?;
    positive("eps", eps)?;
    if k > m {
        log::debug!("standard concentration bound evaluated with k = {k} > m = {m}");
    }
    let (k, m) = (k as f64, m as f64);
    let exponent = eps * eps * m / (2.0 * k) / (1.0 + 2.0 * (k / m).sqrt() + eps / 3.0);
    Ok(BoundValue::probability(2.0 * (-exponent).exp()))
}

/// Concentration of the slot average `(1/t) Σ_i ‖A D_i x‖²` under random
/// unit-modulus diagonal modulations: `(32 ln(2 m k_s² k_u²) + 1) / (ε² t m)`.
pub fn conc_bound_multislot(
    m: usize,
    k_s: usize,
    k_u: usize,
    t: usize,
    eps: f64,
) -> Result<BoundValue> {
    for (name, v) in [("m", m), ("k_s", k_s), ("k_u", k_u), ("t", t)] {
        positive(name, v as f64)?;
    }
    positive("eps", eps)?;
    let (m, k_s, k_u, t) = (m as f64, k_s as f64, k_u as f64, t as f64);
    let num = 32.0 * (2.0 * m * k_s * k_s * k_u * k_u).ln() + 1.0;
    Ok(BoundValue::probability(num / (eps * eps * t * m)))
}

/// Tail bound on the load of one sub-channel:
/// `n (k_u - x) / (x √(2πx)) · exp(-(1 - k_u/n)² x)`.
///
/// For `x >= k_u` the prefactor is not positive and the bound is reported as 0.
pub fn capture_bound(n: usize, k_u: usize, x: usize) -> Result<BoundValue> {
    positive("n", n as f64)?;
    positive("k_u", k_u as f64)?;
    positive("x", x as f64)?;
    if x >= k_u {
        log::debug!("capture bound at x = {x} >= k_u = {k_u}: prefactor not positive, reporting 0");
        return Ok(BoundValue::probability(0.0));
    }
    let (n, k_u, x) = (n as f64, k_u as f64, x as f64);
    let load = 1.0 - k_u / n;
    let raw = n * (k_u - x) / (x * (2.0 * PI * x).sqrt()) * (-(load * load) * x).exp();
    Ok(BoundValue::probability(raw))
}

/// Lower bound on the mean number of users that do not collide:
/// `k_u - k_u · k_u k_s / (c n)`.
pub fn expected_noncollided(k_u: usize, k_s: usize, c: usize, n: usize) -> f64 {
    let (k_u, k_s, c, n) = (k_u as f64, k_s as f64, c as f64, n as f64);
    k_u - k_u * k_u * k_s / (c * n)
}

/// `(1 - p_u) · kbar_u · c · (1 - p_md)`.
pub fn supported_users(p_u: f64, kbar_u: usize, c: usize, p_md: f64) -> Result<f64> {
    for (name, p) in [("p_u", p_u), ("p_md", p_md)] {
        if !(0.0..=1.0).contains(&p) {
            return config_err(format!("{name} = {p} must lie in [0, 1]"));
        }
    }
    Ok((1.0 - p_u) * kbar_u as f64 * c as f64 * (1.0 - p_md))
}

/// Inputs of the missed-detection bound that are not swept.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    pub s: usize,
    pub u: usize,
    pub k_s: usize,
    pub m: usize,
    pub t: usize,
    /// Noise variance σ²; SNR is `1/σ²`.
    pub sigma2: f64,
    pub c1: f64,
    pub c2: f64,
    /// Minimum per-user channel energy; `None` means `1/x`.
    pub h_min: Option<f64>,
    /// Monte-Carlo draws for the energy CDF term.
    pub draws: usize,
}

impl BoundInputs {
    /// Defaults of the reference scenario (`n = 1024`, `s = 8`, `k_s = 4`, `m = 16`, `t = 100`), noise free.
    pub fn new(n: usize, s: usize, k_s: usize, m: usize, t: usize, sigma2: f64) -> Self {
        BoundInputs {
            n,
            s,
            u: n / s.max(1),
            k_s,
            m,
            t,
            sigma2,
            c1: 1.0,
            c2: 1.0,
            h_min: None,
            draws: 10_000,
        }
    }
}

/// The three terms of the missed-detection bound and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmdBound {
    pub energy_cdf: f64,
    pub concentration_term: f64,
    pub noise_term: f64,
    pub value: BoundValue,
}

/// Probability that a user of energy `h_min`, spread evenly over `k_s` taps
/// with random phases, shows slot-averaged support energy
/// `(1/t) Σ_i ‖(h + z_i)_S‖²` at most `theta` under noise `CN(0, σ²/n)`.
pub fn energy_cdf<R: Rng + ?Sized>(
    theta: f64,
    h_min: f64,
    k_s: usize,
    t: usize,
    sigma2: f64,
    n: usize,
    draws: usize,
    rng: &mut R,
) -> f64 {
    if draws == 0 {
        return 0.0;
    }
    let amp = (h_min / k_s as f64).sqrt();
    let noise_var = sigma2 / n as f64;
    let mut below = 0usize;
    let mut h = vec![C64::new(0.0, 0.0); k_s];
    for _ in 0..draws {
        for tap in &mut h {
            *tap = C64::from_polar(amp, rng.random_range(0.0..2.0 * PI));
        }
        let mut energy = 0.0;
        for _ in 0..t {
            for tap in &h {
                let z = if noise_var > 0.0 {
                    complex_gaussian(rng, noise_var)
                } else {
                    C64::new(0.0, 0.0)
                };
                energy += (tap + z).norm_sqr();
            }
        }
        if energy / t as f64 <= theta {
            below += 1;
        }
    }
    below as f64 / draws as f64
}

/// Missed-detection bound at threshold `xi` for a sub-channel carrying `x` users:
///
/// `F(ξ+ε | x) + C1 u (e s / k_s)^{k_s} (k_s² ln(2 m k_s² x²) + 1) / (ε² t m) + C2 (SNR/n)^{-k_s x}`.
///
/// The first term has no closed form and is estimated by [`energy_cdf`].
pub fn pmd_bound<R: Rng + ?Sized>(
    xi: f64,
    x: usize,
    eps: f64,
    inputs: &BoundInputs,
    rng: &mut R,
) -> Result<PmdBound> {
    positive("eps", eps)?;
    positive("x", x as f64)?;
    if !(xi >= 0.0) || !xi.is_finite() {
        return config_err(format!("xi = {xi} must be nonnegative"));
    }
    if !(inputs.c1 >= 0.0 && inputs.c2 >= 0.0) {
        return config_err("constants C1, C2 must be nonnegative");
    }
    if !(inputs.sigma2 >= 0.0) {
        return config_err("sigma2 must be nonnegative");
    }
    for (name, v) in [
        ("n", inputs.n),
        ("s", inputs.s),
        ("u", inputs.u),
        ("k_s", inputs.k_s),
        ("m", inputs.m),
        ("t", inputs.t),
    ] {
        positive(name, v as f64)?;
    }
    let BoundInputs {
        n,
        s,
        u,
        k_s,
        m,
        t,
        sigma2,
        c1,
        c2,
        ..
    } = *inputs;
    let h_min = inputs.h_min.unwrap_or(1.0 / x as f64);
    let energy_cdf = energy_cdf(xi + eps, h_min, k_s, t, sigma2, n, inputs.draws, rng);

    let (xf, k_sf) = (x as f64, k_s as f64);
    let concentration_term = c1
        * u as f64
        * (E * s as f64 / k_sf).powf(k_sf)
        * (k_sf * k_sf * (2.0 * m as f64 * k_sf * k_sf * xf * xf).ln() + 1.0)
        / (eps * eps * t as f64 * m as f64);

    let noise_term = if sigma2 == 0.0 || c2 == 0.0 {
        0.0
    } else {
        let snr_over_n = 1.0 / sigma2 / n as f64;
        (c2.ln() - k_sf * xf * snr_over_n.ln()).exp()
    };

    Ok(PmdBound {
        energy_cdf,
        concentration_term,
        noise_term,
        value: BoundValue::probability(energy_cdf + concentration_term + noise_term),
    })
}
