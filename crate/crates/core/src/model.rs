//! Scenario configuration and ground-truth generation.
//!
//! A scenario is `c` parallel sub-channels. In each, `kbar_u` users pick one of
//! `u = n / s` resource blocks uniformly at random (collisions allowed) and
//! transmit a `k_s`-sparse channel impulse response inside that block. Slot 0
//! is a pilot; slots `1..t` carry one QPSK symbol per active block.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{config_err, Result};
use crate::C64;

/// How active blocks are declared after hierarchical thresholding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorMode {
    /// Every one of the `kbar_u` selected blocks is declared active.
    TopK,
    /// A selected block is active iff its slot-summed captured energy is at least `t * xi`.
    Threshold { xi: f64 },
}

/// Denominator of the birthday product used to size `kbar_u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BirthdayPool {
    /// `u` resource blocks per sub-channel.
    PerSubchannelBlocks,
    /// The signal dimension `n`.
    SignalDim,
}

/// Free parameters of a scenario. Everything else is derived by [`SystemConfig::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigParams {
    pub n: usize,
    pub s: usize,
    pub k_s: usize,
    pub t: usize,
    pub p_u: f64,
    /// Nominal SNR in dB, with SNR = 1/σ². Ignored when `noise_free` is set.
    pub snr_db: f64,
    pub noise_free: bool,
    pub seed: u64,
    pub detector_mode: DetectorMode,
    pub iterations: usize,
    pub birthday_pool: BirthdayPool,
    /// Forces the users-per-sub-channel count instead of the birthday rule.
    pub kbar_u: Option<usize>,
    /// Forces the measurement count instead of `2^floor(log2(kbar_u * k_s))`.
    pub m: Option<usize>,
}

impl Default for ConfigParams {
    fn default() -> Self {
        ConfigParams {
            n: 1024,
            s: 8,
            k_s: 4,
            t: 100,
            p_u: 0.1,
            snr_db: f64::INFINITY,
            noise_free: true,
            seed: 0,
            detector_mode: DetectorMode::TopK,
            iterations: 1,
            birthday_pool: BirthdayPool::PerSubchannelBlocks,
            kbar_u: None,
            m: None,
        }
    }
}

impl ConfigParams {
    pub fn with_snr_db(mut self, snr_db: Option<f64>) -> Self {
        match snr_db {
            Some(db) => {
                self.snr_db = db;
                self.noise_free = false;
            }
            None => {
                self.snr_db = f64::INFINITY;
                self.noise_free = true;
            }
        }
        self
    }
}

/// Derived dimensions of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dimensions {
    pub u: usize,
    pub kbar_u: usize,
    pub m: usize,
    pub c: usize,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n: usize,
    pub s: usize,
    pub u: usize,
    pub k_s: usize,
    pub t: usize,
    pub p_u: f64,
    pub kbar_u: usize,
    pub m: usize,
    pub c: usize,
    pub snr_db: f64,
    pub noise_free: bool,
    pub seed: u64,
    pub detector_mode: DetectorMode,
    pub iterations: usize,
    pub birthday_pool: BirthdayPool,
    params: ConfigParams,
}

impl SystemConfig {
    pub fn new(params: ConfigParams) -> Result<Self> {
        let ConfigParams {
            n, s, k_s, t, p_u, ..
        } = params;
        if n == 0 || !n.is_power_of_two() {
            return config_err(format!("n = {n} must be a power of two"));
        }
        if s == 0 || n % s != 0 {
            return config_err(format!("s = {s} must divide n = {n}"));
        }
        if !(p_u > 0.0 && p_u < 1.0) {
            return config_err(format!("p_u = {p_u} must lie in (0, 1)"));
        }
        if k_s == 0 || k_s > s {
            return config_err(format!("k_s = {k_s} must lie in [1, s = {s}]"));
        }
        if t == 0 {
            return config_err("t must be at least 1");
        }
        if params.iterations == 0 {
            return config_err("iterations must be at least 1");
        }
        if !params.noise_free && params.snr_db.is_nan() {
            return config_err("snr_db is NaN");
        }
        if let DetectorMode::Threshold { xi } = params.detector_mode {
            if !(xi >= 0.0) {
                return config_err(format!("threshold xi = {xi} must be nonnegative"));
            }
        }

        let u = n / s;
        let kbar_u = match params.kbar_u {
            Some(k) => k,
            None => {
                let pool = match params.birthday_pool {
                    BirthdayPool::PerSubchannelBlocks => u,
                    BirthdayPool::SignalDim => n,
                };
                select_ku(pool, p_u)?
            }
        };
        if kbar_u == 0 || kbar_u > u {
            return config_err(format!("kbar_u = {kbar_u} must lie in [1, u = {u}]"));
        }
        let m = match params.m {
            Some(m) => m,
            None => measurements_for(kbar_u, k_s),
        };
        if m == 0 || m > n {
            return config_err(format!("m = {m} must lie in [1, n = {n}]"));
        }

        Ok(SystemConfig {
            n,
            s,
            u,
            k_s,
            t,
            p_u,
            kbar_u,
            m,
            c: n / m,
            snr_db: if params.noise_free {
                f64::INFINITY
            } else {
                params.snr_db
            },
            noise_free: params.noise_free,
            seed: params.seed,
            detector_mode: params.detector_mode,
            iterations: params.iterations,
            birthday_pool: params.birthday_pool,
            params,
        })
    }

    pub fn params(&self) -> &ConfigParams {
        &self.params
    }

    /// Noise variance σ² = 10^(-snr_db/10), or 0 without noise.
    pub fn sigma2(&self) -> f64 {
        if self.noise_free {
            0.0
        } else {
            10f64.powf(-self.snr_db / 10.0)
        }
    }

    pub fn dimensions(&self) -> Dimensions {
        Dimensions {
            u: self.u,
            kbar_u: self.kbar_u,
            m: self.m,
            c: self.c,
        }
    }
}

/// Largest `k` with `prod_{i=1..k} (1 - i / pool_size) >= 1 - p_u`.
pub fn select_ku(pool_size: usize, p_u: f64) -> Result<usize> {
    if pool_size < 2 {
        return config_err(format!("birthday pool size {pool_size} must be at least 2"));
    }
    if !(p_u > 0.0 && p_u < 1.0) {
        return config_err(format!("p_u = {p_u} must lie in (0, 1)"));
    }
    let floor = 1.0 - p_u;
    let mut prod = 1.0;
    let mut k = 0;
    while k < pool_size {
        let next = prod * (1.0 - (k + 1) as f64 / pool_size as f64);
        if next < floor {
            break;
        }
        prod = next;
        k += 1;
    }
    Ok(k)
}

/// `2^floor(log2(kbar_u * k_s))`.
pub fn measurements_for(kbar_u: usize, k_s: usize) -> usize {
    let nnz = kbar_u * k_s;
    if nnz == 0 {
        return 0;
    }
    1 << (usize::BITS - 1 - nnz.leading_zeros())
}

/// `(u, kbar_u, m, c)` for the birthday-sized default scenario.
pub fn derive_dimensions(
    n: usize,
    s: usize,
    k_s: usize,
    p_u: f64,
    birthday_pool: BirthdayPool,
) -> Result<Dimensions> {
    let cfg = SystemConfig::new(ConfigParams {
        n,
        s,
        k_s,
        p_u,
        birthday_pool,
        ..ConfigParams::default()
    })?;
    Ok(cfg.dimensions())
}

/// Probability that `k` users picking uniformly among `pool` blocks collide.
pub fn birthday_collision_probability(pool: usize, k: usize) -> f64 {
    let mut prod = 1.0;
    for i in 1..k {
        prod *= 1.0 - i as f64 / pool as f64;
    }
    1.0 - prod
}

/// One user's access: the block it picked and its in-block tap positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserAccess {
    pub user_id: usize,
    pub block: usize,
    /// Sorted, `k_s` distinct entries of `[s]`.
    pub taps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubchannelActivity {
    pub users: Vec<UserAccess>,
    /// Sorted blocks chosen by two or more users.
    pub collided_blocks: Vec<usize>,
}

impl SubchannelActivity {
    pub fn new(users: Vec<UserAccess>) -> Self {
        let mult = multiplicities(&users);
        let collided_blocks = mult
            .iter()
            .filter(|(_, &k)| k >= 2)
            .map(|(&b, _)| b)
            .collect();
        SubchannelActivity {
            users,
            collided_blocks,
        }
    }

    pub fn load(&self) -> usize {
        self.users.len()
    }

    /// Sorted, deduplicated blocks with at least one user.
    pub fn active_blocks(&self) -> Vec<usize> {
        multiplicities(&self.users).into_keys().collect()
    }

    pub fn is_collided(&self, block: usize) -> bool {
        self.collided_blocks.binary_search(&block).is_ok()
    }

    /// Users alone on their block.
    pub fn noncollided_users(&self) -> impl Iterator<Item = &UserAccess> {
        self.users.iter().filter(|a| !self.is_collided(a.block))
    }
}

fn multiplicities(users: &[UserAccess]) -> BTreeMap<usize, usize> {
    let mut mult = BTreeMap::new();
    for a in users {
        *mult.entry(a.block).or_insert(0) += 1;
    }
    mult
}

/// Ground truth for every sub-channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityPattern {
    pub subchannels: Vec<SubchannelActivity>,
}

impl ActivityPattern {
    pub fn total_users(&self) -> usize {
        self.subchannels.iter().map(SubchannelActivity::load).sum()
    }
}

fn draw_access<R: Rng + ?Sized>(config: &SystemConfig, user_id: usize, rng: &mut R) -> UserAccess {
    let block = rng.random_range(0..config.u);
    let mut taps = index::sample(rng, config.s, config.k_s).into_vec();
    taps.sort_unstable();
    UserAccess {
        user_id,
        block,
        taps,
    }
}

/// Exactly `kbar_u` users per sub-channel, blocks drawn with replacement.
pub fn draw_activity<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> ActivityPattern {
    let subchannels = (0..config.c)
        .map(|j| {
            let users = (0..config.kbar_u)
                .map(|i| draw_access(config, j * config.kbar_u + i, rng))
                .collect();
            SubchannelActivity::new(users)
        })
        .collect();
    ActivityPattern { subchannels }
}

/// `total_users` users each pick a sub-channel uniformly, so loads are binomial.
pub fn draw_activity_binomial<R: Rng + ?Sized>(
    config: &SystemConfig,
    total_users: usize,
    rng: &mut R,
) -> ActivityPattern {
    let mut per_sub: Vec<Vec<UserAccess>> = vec![Vec::new(); config.c];
    for user_id in 0..total_users {
        let j = rng.random_range(0..config.c);
        per_sub[j].push(draw_access(config, user_id, rng));
    }
    ActivityPattern {
        subchannels: per_sub.into_iter().map(SubchannelActivity::new).collect(),
    }
}

/// A length-`n` vector organised as `u` blocks of length `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct HierSparseSignal {
    pub s: usize,
    pub values: Vec<C64>,
    /// Sorted active blocks.
    pub block_support: Vec<usize>,
    /// Sorted in-block support per entry of `block_support` (union over colliding users).
    pub inblock_support: Vec<Vec<usize>>,
}

impl HierSparseSignal {
    pub fn zeros(n: usize, s: usize) -> Self {
        HierSparseSignal {
            s,
            values: vec![C64::new(0.0, 0.0); n],
            block_support: Vec::new(),
            inblock_support: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn block(&self, b: usize) -> &[C64] {
        &self.values[b * self.s..(b + 1) * self.s]
    }

    /// Flat indices and values of the support, in increasing index order.
    pub fn support_entries(&self) -> impl Iterator<Item = (usize, C64)> + '_ {
        self.block_support
            .iter()
            .zip(&self.inblock_support)
            .flat_map(move |(&b, taps)| {
                taps.iter()
                    .map(move |&l| (b * self.s + l, self.values[b * self.s + l]))
            })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Circular complex Gaussian with total variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let sd = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(sd * re, sd * im)
}

/// Per-tap variance `1/k_s`, so each user carries unit expected energy.
/// Users sharing a block add up into one effective channel.
pub fn draw_channels<R: Rng + ?Sized>(
    pattern: &ActivityPattern,
    config: &SystemConfig,
    rng: &mut R,
) -> Vec<HierSparseSignal> {
    let var = 1.0 / config.k_s as f64;
    pattern
        .subchannels
        .iter()
        .map(|sub| {
            let mut sig = HierSparseSignal::zeros(config.n, config.s);
            let mut support: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for access in &sub.users {
                let taps = support.entry(access.block).or_default();
                for &l in &access.taps {
                    sig.values[access.block * config.s + l] += complex_gaussian(rng, var);
                    taps.push(l);
                }
            }
            for (b, mut taps) in support {
                taps.sort_unstable();
                taps.dedup();
                sig.block_support.push(b);
                sig.inblock_support.push(taps);
            }
            sig
        })
        .collect()
}

/// The four QPSK points `(±1 ± i)/√2`, indexed by quadrant.
pub const QPSK: [C64; 4] = [
    C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    C64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    C64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    C64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

/// Nearest QPSK point (quadrant decision, zero components map to positive).
pub fn qpsk_decide(z: C64) -> C64 {
    let re = if z.re >= 0.0 {
        FRAC_1_SQRT_2
    } else {
        -FRAC_1_SQRT_2
    };
    let im = if z.im >= 0.0 {
        FRAC_1_SQRT_2
    } else {
        -FRAC_1_SQRT_2
    };
    C64::new(re, im)
}

/// Data symbols, one per active block per data slot.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSymbols {
    pub t: usize,
    /// Per sub-channel, the sorted active blocks the symbols refer to.
    pub blocks: Vec<Vec<usize>>,
    /// `values[j][i - 1][k]` is the symbol of `blocks[j][k]` in slot `i >= 1`.
    pub values: Vec<Vec<Vec<C64>>>,
}

impl DataSymbols {
    /// Symbol of `block` in `slot`. Slot 0 and inactive blocks carry 1.
    pub fn symbol(&self, j: usize, slot: usize, block: usize) -> C64 {
        if slot == 0 {
            return C64::new(1.0, 0.0);
        }
        match self.blocks[j].binary_search(&block) {
            Ok(k) => self.values[j][slot - 1][k],
            Err(_) => C64::new(1.0, 0.0),
        }
    }

    /// Per-block symbols of one slot as a length-`u` vector (`D_i` diagonal, per block).
    pub fn slot_symbols(&self, j: usize, slot: usize, u: usize) -> Vec<C64> {
        let mut d = vec![C64::new(1.0, 0.0); u];
        if slot > 0 {
            for (k, &b) in self.blocks[j].iter().enumerate() {
                d[b] = self.values[j][slot - 1][k];
            }
        }
        d
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(|v| v.is_empty())
    }
}

pub fn draw_data<R: Rng + ?Sized>(
    pattern: &ActivityPattern,
    config: &SystemConfig,
    rng: &mut R,
) -> DataSymbols {
    let blocks: Vec<Vec<usize>> = pattern
        .subchannels
        .iter()
        .map(|s| s.active_blocks())
        .collect();
    let values = blocks
        .iter()
        .map(|bl| {
            (1..config.t)
                .map(|_| bl.iter().map(|_| QPSK[rng.random_range(0..4)]).collect())
                .collect()
        })
        .collect();
    DataSymbols {
        t: config.t,
        blocks,
        values,
    }
}

/// Ground truth of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub activity: ActivityPattern,
    pub channels: Vec<HierSparseSignal>,
    pub data: DataSymbols,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    /// Independent oracle: the birthday product evaluated term by term.
    fn select_ku_oracle(pool: usize, p_u: f64) -> usize {
        let mut best = 0;
        for k in 1..=pool {
            let p: f64 = (1..=k).map(|i| 1.0 - i as f64 / pool as f64).product();
            if p >= 1.0 - p_u {
                best = k;
            }
        }
        best
    }

    #[test]
    fn select_ku_frozen_values() {
        assert_eq!(select_ku(128, 0.1).unwrap(), 4);
        assert_eq!(select_ku(2, 0.6).unwrap(), 1);
        assert_eq!(select_ku(1024, 0.1).unwrap(), 14);
        assert_eq!(select_ku(256, 0.1).unwrap(), 6);
        assert_eq!(select_ku(512, 0.1).unwrap(), 9);
        for pool in [2, 3, 10, 64, 128, 1000, 1024] {
            for p_u in [0.01, 0.1, 0.3, 0.6, 0.95] {
                assert_eq!(
                    select_ku(pool, p_u).unwrap(),
                    select_ku_oracle(pool, p_u),
                    "{pool} {p_u}"
                );
            }
        }
    }

    #[test]
    fn select_ku_rejects_bad_input() {
        assert!(select_ku(1, 0.1).is_err());
        assert!(select_ku(128, 0.0).is_err());
        assert!(select_ku(128, 1.0).is_err());
        assert!(select_ku(128, f64::NAN).is_err());
    }

    #[test]
    fn select_ku_is_monotone() {
        let mut prev = 0;
        for pool in 2..300 {
            let k = select_ku(pool, 0.1).unwrap();
            assert!(k >= prev);
            prev = k;
        }
        let mut prev = 0;
        for i in 1..100 {
            let k = select_ku(256, i as f64 / 100.0).unwrap();
            assert!(k >= prev);
            prev = k;
        }
    }

    #[test]
    fn default_dimensions() {
        let d = derive_dimensions(1024, 8, 4, 0.1, BirthdayPool::PerSubchannelBlocks).unwrap();
        assert_eq!(
            d,
            Dimensions {
                u: 128,
                kbar_u: 4,
                m: 16,
                c: 64
            }
        );

        let forced = SystemConfig::new(ConfigParams {
            kbar_u: Some(1),
            ..ConfigParams::default()
        })
        .unwrap();
        assert_eq!((forced.m, forced.c), (4, 256));

        let d = derive_dimensions(8192, 8, 4, 0.1, BirthdayPool::PerSubchannelBlocks).unwrap();
        assert_eq!(
            d,
            Dimensions {
                u: 1024,
                kbar_u: 14,
                m: 32,
                c: 256
            }
        );

        let d = derive_dimensions(1024, 8, 4, 0.1, BirthdayPool::SignalDim).unwrap();
        assert_eq!(d.kbar_u, 14);
        assert_eq!(d.m, 32);
    }

    #[test]
    fn config_errors() {
        let bad = |p: ConfigParams| SystemConfig::new(p).is_err();
        assert!(bad(ConfigParams {
            n: 1000,
            ..Default::default()
        }));
        assert!(bad(ConfigParams {
            s: 3,
            ..Default::default()
        }));
        assert!(bad(ConfigParams {
            k_s: 9,
            ..Default::default()
        }));
        assert!(bad(ConfigParams {
            t: 0,
            ..Default::default()
        }));
        assert!(bad(ConfigParams {
            p_u: 1.5,
            ..Default::default()
        }));
        assert!(bad(ConfigParams {
            m: Some(2048),
            ..Default::default()
        }));
        assert!(bad(ConfigParams {
            iterations: 0,
            ..Default::default()
        }));
        assert!(bad(ConfigParams {
            detector_mode: DetectorMode::Threshold { xi: -1.0 },
            ..Default::default()
        }));
    }

    fn cfg(kbar_u: usize) -> SystemConfig {
        SystemConfig::new(ConfigParams {
            kbar_u: Some(kbar_u),
            ..ConfigParams::default()
        })
        .unwrap()
    }

    #[test]
    fn single_user_never_collides() {
        let c = cfg(1);
        let mut rng = stream(1, Purpose::Activity, &[]);
        for _ in 0..50 {
            let p = draw_activity(&c, &mut rng);
            assert!(p.subchannels.iter().all(|s| s.collided_blocks.is_empty()));
        }
    }

    #[test]
    fn collision_frequency_matches_birthday_product() {
        let c = SystemConfig::new(ConfigParams::default()).unwrap();
        assert_eq!((c.u, c.kbar_u), (128, 4));
        let mut rng = stream(2, Purpose::Activity, &[]);
        let mut hits = 0usize;
        let mut total = 0usize;
        // 10^5 sub-channel draws.
        while total < 100_000 {
            let p = draw_activity(&c, &mut rng);
            for s in &p.subchannels {
                hits += usize::from(!s.collided_blocks.is_empty());
                total += 1;
            }
        }
        let expected = birthday_collision_probability(128, 4);
        assert!((expected - 0.046206).abs() < 1e-5);
        let freq = hits as f64 / total as f64;
        let sigma = (expected * (1.0 - expected) / total as f64).sqrt();
        assert!(
            (freq - expected).abs() <= 3.0 * sigma,
            "{freq} vs {expected}"
        );
        assert!(freq <= 0.1);
    }

    #[test]
    fn activity_is_deterministic_and_well_formed() {
        let c = cfg(6);
        let a = draw_activity(&c, &mut stream(9, Purpose::Activity, &[3]));
        let b = draw_activity(&c, &mut stream(9, Purpose::Activity, &[3]));
        assert_eq!(a, b);
        let mut seen = std::collections::HashSet::new();
        for sub in &a.subchannels {
            assert_eq!(sub.load(), 6);
            let mut mult = BTreeMap::new();
            for u in &sub.users {
                assert!(seen.insert(u.user_id), "user in two sub-channels");
                assert_eq!(u.taps.len(), c.k_s);
                assert!(u.taps.windows(2).all(|w| w[0] < w[1]));
                assert!(u.taps.iter().all(|&l| l < c.s));
                *mult.entry(u.block).or_insert(0) += 1;
            }
            let expect: Vec<usize> = mult
                .iter()
                .filter(|(_, &k)| k >= 2)
                .map(|(&b, _)| b)
                .collect();
            assert_eq!(sub.collided_blocks, expect);
        }
    }

    #[test]
    fn binomial_activity_conserves_users() {
        let c = cfg(4);
        let p = draw_activity_binomial(&c, 300, &mut stream(4, Purpose::Activity, &[]));
        assert_eq!(p.subchannels.len(), c.c);
        assert_eq!(p.total_users(), 300);
    }

    #[test]
    fn empty_pattern_gives_zero_channels() {
        let c = cfg(1);
        let p = ActivityPattern {
            subchannels: vec![SubchannelActivity::default(); c.c],
        };
        let h = draw_channels(&p, &c, &mut stream(0, Purpose::Channel, &[]));
        assert!(h
            .iter()
            .all(|s| s.norm_sqr() == 0.0 && s.block_support.is_empty()));
    }

    #[test]
    fn channel_energy_is_unit_per_user() {
        let c = cfg(1);
        let p = ActivityPattern {
            subchannels: vec![SubchannelActivity::new(vec![UserAccess {
                user_id: 0,
                block: 3,
                taps: vec![0, 2, 5, 7],
            }])],
        };
        let mut rng = stream(5, Purpose::Channel, &[]);
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let h = draw_channels(&p, &c, &mut rng);
            acc += h[0].norm_sqr();
        }
        let mean = acc / draws as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn collided_block_energy_adds() {
        let c = cfg(2);
        let p = ActivityPattern {
            subchannels: vec![SubchannelActivity::new(vec![
                UserAccess {
                    user_id: 0,
                    block: 1,
                    taps: vec![0, 1, 2, 3],
                },
                UserAccess {
                    user_id: 1,
                    block: 1,
                    taps: vec![2, 3, 4, 5],
                },
            ])],
        };
        assert_eq!(p.subchannels[0].collided_blocks, vec![1]);
        let mut rng = stream(6, Purpose::Channel, &[]);
        let draws = 100_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let h = draw_channels(&p, &c, &mut rng);
            assert_eq!(h[0].inblock_support, vec![vec![0, 1, 2, 3, 4, 5]]);
            acc += h[0].block(1).iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
        let mean = acc / draws as f64;
        assert!((mean - 2.0).abs() < 0.04, "{mean}");
    }

    #[test]
    fn pilot_only_has_no_data() {
        let c = SystemConfig::new(ConfigParams {
            t: 1,
            ..Default::default()
        })
        .unwrap();
        let p = draw_activity(&c, &mut stream(0, Purpose::Activity, &[]));
        let d = draw_data(&p, &c, &mut stream(0, Purpose::Data, &[]));
        assert!(d.is_empty());
    }

    #[test]
    fn qpsk_symbols_are_unit_and_uniform() {
        let c = cfg(4);
        let p = draw_activity(&c, &mut stream(1, Purpose::Activity, &[]));
        let d = draw_data(&p, &c, &mut stream(1, Purpose::Data, &[]));
        let mut counts = [0usize; 4];
        let mut total = 0;
        for per_sub in &d.values {
            for slot in per_sub {
                for z in slot {
                    assert!((z.norm() - 1.0).abs() <= f64::EPSILON);
                    let k = QPSK.iter().position(|q| q == z).unwrap();
                    counts[k] += 1;
                    total += 1;
                }
            }
        }
        assert!(total >= 10_000);
        for k in counts {
            let f = k as f64 / total as f64;
            assert!((f - 0.25).abs() < 0.02, "{f}");
        }
    }

    #[test]
    fn qpsk_decision_recovers_points() {
        for q in QPSK {
            assert_eq!(qpsk_decide(q), q);
            assert_eq!(qpsk_decide(q * 0.3), q);
        }
    }

    #[test]
    fn measurements_rule() {
        assert_eq!(measurements_for(4, 4), 16);
        assert_eq!(measurements_for(1, 4), 4);
        assert_eq!(measurements_for(14, 4), 32);
        assert_eq!(measurements_for(9, 4), 32);
    }
}
