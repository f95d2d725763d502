//! Seeded Monte Carlo simulation of the discrete Hawkes process.
//!
//! Every Poisson draw is keyed by `(seed, path, step)`, so estimates do not
//! depend on how paths are split across threads.

use std::sync::OnceLock;

use rand::RngCore;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{HawkesModel, KernelForm};

/// Paths per shard; shards are reduced in index order.
pub const SHARD_SIZE: usize = 4096;
/// Intensities below this are sampled by inversion.
pub const INVERSION_LIMIT: f64 = 10.0;
/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "HAWKES_THREADS";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based generator: the `k`-th output is a hash of
/// `(seed, path, step, k)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

/// Per-path part of the counter key.
#[derive(Debug, Clone, Copy)]
pub struct PathKey(u64);

impl PathKey {
    pub fn new(seed: u64, path: u64) -> Self {
        Self(mix(mix(seed ^ GOLDEN).wrapping_add(path)))
    }
}

impl CounterRng {
    pub fn new(seed: u64, path: u64, step: u64) -> Self {
        Self::at(PathKey::new(seed, path), step)
    }

    pub fn at(key: PathKey, step: u64) -> Self {
        Self {
            key: mix(key.0 ^ step.wrapping_mul(GOLDEN)),
            counter: 0,
        }
    }

    /// Uniform on `(0, 1)`.
    fn open_unit(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

const RECIPROCALS: [f64; 64] = {
    let mut r = [0.0; 64];
    let mut k = 1;
    while k < 64 {
        r[k] = 1.0 / k as f64;
        k += 1;
    }
    r
};

/// One Poisson(λ) draw for step `step` of path `path`.
pub fn poisson_draw(lambda: f64, seed: u64, path: u64, step: u64) -> u64 {
    poisson_draw_keyed(lambda, PathKey::new(seed, path), step)
}

fn poisson_draw_keyed(lambda: f64, key: PathKey, step: u64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let mut rng = CounterRng::at(key, step);
    if lambda < INVERSION_LIMIT {
        let u = rng.open_unit();
        let mut p = (-lambda).exp();
        let mut cdf = p;
        let mut k = 0usize;
        while u > cdf {
            k += 1;
            p *= lambda * RECIPROCALS.get(k).copied().unwrap_or(1.0 / k as f64);
            let next = cdf + p;
            if next == cdf {
                break;
            }
            cdf = next;
        }
        return k as u64;
    }
    Poisson::new(lambda).expect("finite positive intensity").sample(&mut rng) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationPath {
    pub counts: Vec<u64>,
    pub intensities: Vec<f64>,
    pub total: u64,
    pub seed: u64,
    pub path: u64,
}

/// Generic path driver; `record` receives `(λ_s, X_s)`.
fn drive(model: &HawkesModel, t: usize, seed: u64, path: u64, mut record: impl FnMut(f64, u64)) -> u64 {
    let nu = model.nu();
    let key = PathKey::new(seed, path);
    let mut total = 0u64;
    match model.kernel().form() {
        KernelForm::Geometric { a, r } => {
            let mut excess = 0.0;
            for s in 0..t {
                let lambda = nu + excess;
                let x = poisson_draw_keyed(lambda, key, s as u64);
                record(lambda, x);
                total += x;
                excess = r * (excess + a * x as f64);
            }
        }
        KernelForm::Finite(w) if w.is_empty() => {
            for s in 0..t {
                let x = poisson_draw_keyed(nu, key, s as u64);
                record(nu, x);
                total += x;
            }
        }
        _ => {
            let len = model.kernel().finite_len().unwrap_or(t).min(t);
            let w = model.kernel().weights(len);
            let mut history: Vec<u64> = Vec::with_capacity(t);
            for s in 0..t {
                let lambda = nu + excitation(&w, &history, s);
                let x = poisson_draw_keyed(lambda, key, s as u64);
                record(lambda, x);
                history.push(x);
                total += x;
            }
        }
    }
    total
}

/// `Σ_{u=1}^{s} α_u X_{s−u}` over the 0-based history.
fn excitation(w: &[f64], history: &[u64], s: usize) -> f64 {
    w.iter()
        .take(s)
        .enumerate()
        .filter(|(u, _)| history[s - 1 - u] != 0)
        .map(|(u, a)| a * history[s - 1 - u] as f64)
        .sum()
}

fn check_horizon(t: usize) -> Result<()> {
    if t == 0 {
        return Err(Error::Domain("horizon t must be ≥ 1".into()));
    }
    Ok(())
}

/// Path number `path` of the stream keyed by `seed`.
pub fn simulate_path_indexed(model: &HawkesModel, t: usize, seed: u64, path: u64) -> Result<SimulationPath> {
    check_horizon(t)?;
    let mut counts = Vec::with_capacity(t);
    let mut intensities = Vec::with_capacity(t);
    let total = drive(model, t, seed, path, |l, x| {
        intensities.push(l);
        counts.push(x);
    });
    Ok(SimulationPath {
        counts,
        intensities,
        total,
        seed,
        path,
    })
}

pub fn simulate_path(model: &HawkesModel, t: usize, seed: u64) -> Result<SimulationPath> {
    simulate_path_indexed(model, t, seed, 0)
}

/// Same stream as [`simulate_path_indexed`], always through the direct
/// convolution `λ_s = ν + Σ_u α_u X_{s−u}`.
pub fn simulate_path_direct(model: &HawkesModel, t: usize, seed: u64, path: u64) -> Result<SimulationPath> {
    check_horizon(t)?;
    let w = model.kernel().weights(t);
    let key = PathKey::new(seed, path);
    let mut counts: Vec<u64> = Vec::with_capacity(t);
    let mut intensities = Vec::with_capacity(t);
    for s in 0..t {
        let lambda = model.nu() + excitation(&w, &counts, s);
        intensities.push(lambda);
        counts.push(poisson_draw_keyed(lambda, key, s as u64));
    }
    let total = counts.iter().sum();
    Ok(SimulationPath {
        counts,
        intensities,
        total,
        seed,
        path,
    })
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
            if n > 0 {
                builder = builder.num_threads(n);
            }
        }
        builder.build().expect("thread pool")
    })
}

/// `N_t` for paths `0..n_paths`, in path order.
pub fn simulate_totals(model: &HawkesModel, t: usize, n_paths: usize, seed: u64) -> Result<Vec<u64>> {
    check_horizon(t)?;
    let shards = n_paths.div_ceil(SHARD_SIZE);
    let parts: Vec<Vec<u64>> = pool().install(|| {
        (0..shards)
            .into_par_iter()
            .map(|k| {
                let lo = k * SHARD_SIZE;
                let hi = (lo + SHARD_SIZE).min(n_paths);
                (lo..hi).map(|p| drive(model, t, seed, p as u64, |_, _| {})).collect()
            })
            .collect()
    });
    Ok(parts.concat())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed_base: u64,
    /// Number of paths in the event, for frequency estimates.
    pub hits: Option<u64>,
    /// One-sided 95% upper bound `3/n` when no path hit the event.
    pub upper_bound: Option<f64>,
    /// The ten largest weights carry more than half the total.
    pub heavy_tail: bool,
    pub warnings: Vec<String>,
}

impl McEstimate {
    fn plain(value: f64, std_error: f64, n_paths: usize, seed_base: u64) -> Self {
        Self {
            value,
            std_error,
            n_paths,
            seed_base,
            hits: None,
            upper_bound: None,
            heavy_tail: false,
            warnings: Vec::new(),
        }
    }
}

fn check_paths(n_paths: usize, min: usize) -> Result<()> {
    if n_paths < min {
        return Err(Error::Domain(format!("need at least {min} paths, got {n_paths}")));
    }
    Ok(())
}

/// Estimates of `E[N_t]/t` and `Var(N_t)/t`, with jackknife standard errors.
pub fn mc_mean_variance(
    model: &HawkesModel,
    t: usize,
    n_paths: usize,
    seed: u64,
) -> Result<(McEstimate, McEstimate)> {
    check_paths(n_paths, 100)?;
    let totals = simulate_totals(model, t, n_paths, seed)?;
    let tf = t as f64;
    let n = n_paths as f64;
    let shift = (model.mean_rate() * tf).round();
    let y: Vec<f64> = totals.iter().map(|v| *v as f64 - shift).collect();
    let s1: f64 = y.iter().sum();
    let s2: f64 = y.iter().map(|v| v * v).sum();
    let mean = s1 / n;
    let var = (s2 - s1 * s1 / n) / (n - 1.0);
    // Leave-one-out sample variances.
    let loo: Vec<f64> = y
        .iter()
        .map(|v| {
            let (a, b) = (s1 - v, s2 - v * v);
            (b - a * a / (n - 1.0)) / (n - 2.0)
        })
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / n;
    let jack = ((n - 1.0) / n * loo.iter().map(|v| (v - loo_mean).powi(2)).sum::<f64>()).sqrt();
    Ok((
        McEstimate::plain((mean + shift) / tf, (var / n).sqrt() / tf, n_paths, seed),
        McEstimate::plain(var / tf, jack / tf, n_paths, seed),
    ))
}

/// Estimate of `E[e^{zN_t}]`.
pub fn mc_mgf(model: &HawkesModel, z: f64, t: usize, n_paths: usize, seed: u64) -> Result<McEstimate> {
    check_paths(n_paths, 2)?;
    if !z.is_finite() {
        return Err(Error::Domain(format!("z = {z} must be finite")));
    }
    let totals = simulate_totals(model, t, n_paths, seed)?;
    let n = n_paths as f64;
    // Scale by the largest weight to keep the sums finite.
    let top = totals.iter().map(|v| z * *v as f64).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = totals.iter().map(|v| (z * *v as f64 - top).exp()).collect();
    let s1: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|v| v * v).sum();
    let mean = s1 / n;
    let var = ((s2 - s1 * s1 / n) / (n - 1.0)).max(0.0);
    let scale = top.exp();
    let mut sorted = w.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let heavy = sorted.iter().take(10).sum::<f64>() > 0.5 * s1;
    let mut est = McEstimate::plain(mean * scale, (var / n).sqrt() * scale, n_paths, seed);
    if heavy && z != 0.0 {
        est.heavy_tail = true;
        est.warnings.push("the ten largest paths carry more than half of the weight".into());
    }
    Ok(est)
}

fn frequency(totals: &[u64], hit: impl Fn(u64) -> bool, seed: u64) -> McEstimate {
    let n = totals.len();
    let hits = totals.iter().filter(|v| hit(**v)).count() as u64;
    let p = hits as f64 / n as f64;
    let mut est = McEstimate::plain(p, (p * (1.0 - p) / n as f64).sqrt(), n, seed);
    est.hits = Some(hits);
    if hits == 0 {
        est.upper_bound = Some(3.0 / n as f64);
        est.warnings.push(format!(
            "no path reached the event; one-sided 95% upper bound {:.3e}",
            3.0 / n as f64
        ));
    }
    est
}

/// Frequency of `{N_t ≥ level}`.
pub fn mc_tail_count(model: &HawkesModel, t: usize, level: u64, n_paths: usize, seed: u64) -> Result<McEstimate> {
    check_paths(n_paths, 1)?;
    let totals = simulate_totals(model, t, n_paths, seed)?;
    Ok(frequency(&totals, |v| v >= level, seed))
}

fn lattice_index(t: usize, x: f64) -> Result<(u64, bool)> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("x = {x} must be finite and ≥ 0")));
    }
    let n = t as f64 * x;
    let exact = (n - n.round()).abs() <= 1e-9 * n.max(1.0);
    let level = if exact { n.round() } else { n.ceil() };
    Ok((level as u64, exact))
}

/// Frequency of `{N_t ≥ tx}`.
pub fn mc_tail(model: &HawkesModel, t: usize, x: f64, n_paths: usize, seed: u64) -> Result<McEstimate> {
    let (level, _) = lattice_index(t, x)?;
    mc_tail_count(model, t, level, n_paths, seed)
}

/// Frequency of `{N_t = tx}`; `tx` must be an integer.
pub fn mc_pmf(model: &HawkesModel, t: usize, x: f64, n_paths: usize, seed: u64) -> Result<McEstimate> {
    let (level, exact) = lattice_index(t, x)?;
    if !exact {
        return Err(Error::Domain(format!("t·x = {} is not an integer", t as f64 * x)));
    }
    check_paths(n_paths, 1)?;
    let totals = simulate_totals(model, t, n_paths, seed)?;
    Ok(frequency(&totals, |v| v == level, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deviations::oracle;
    use crate::kernel::ExcitingKernel;
    use crate::modphi::log_mgf;

    fn geo() -> HawkesModel {
        HawkesModel::new(1.0, ExcitingKernel::geometric(0.25, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn tiny_baseline_gives_empty_paths() {
        let m = HawkesModel::new(1e-300, ExcitingKernel::geometric(0.25, 0.5).unwrap()).unwrap();
        let p = simulate_path(&m, 200, 3).unwrap();
        assert_eq!(p.total, 0);
        assert!(p.counts.iter().all(|c| *c == 0));
    }

    #[test]
    fn poisson_intensity_is_flat() {
        let p = simulate_path(&HawkesModel::poisson(1.0).unwrap(), 100, 1).unwrap();
        assert!(p.intensities.iter().all(|l| *l == 1.0));
        assert_eq!(p.total, p.counts.iter().sum::<u64>());
    }

    #[test]
    fn geometric_intensity_hand_check() {
        let m = geo();
        assert!((m.kernel().weight(1) - 0.125).abs() < 1e-16);
        let seed = (0..10_000u64)
            .find(|s| simulate_path(&m, 2, *s).unwrap().counts[0] == 2)
            .expect("some seed draws X_1 = 2");
        let p = simulate_path(&m, 2, seed).unwrap();
        assert_eq!(p.intensities[0], 1.0);
        assert!((p.intensities[1] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn fast_path_matches_direct_convolution() {
        let m = geo();
        for path in 0..20 {
            let a = simulate_path_indexed(&m, 300, 11, path).unwrap();
            let b = simulate_path_direct(&m, 300, 11, path).unwrap();
            assert_eq!(a.counts, b.counts);
            for (x, y) in a.intensities.iter().zip(&b.intensities) {
                assert!((x - y).abs() <= 1e-12 * y);
            }
        }
    }

    #[test]
    fn poisson_sampler_moments() {
        for lambda in [0.3, 2.0, 9.5, 10.0, 40.0] {
            let n = 200_000u64;
            let draws: Vec<f64> = (0..n).map(|p| poisson_draw(lambda, 5, p, 0) as f64).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (lambda / n as f64).sqrt();
            assert!((mean - lambda).abs() < 5.0 * se, "λ={lambda} mean={mean}");
            assert!((var / lambda - 1.0).abs() < 0.03, "λ={lambda} var={var}");
        }
    }

    #[test]
    fn zero_z_mgf_is_one() {
        let e = mc_mgf(&geo(), 0.0, 50, 1000, 9).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn tail_at_zero_is_certain() {
        let e = mc_tail(&geo(), 50, 0.0, 500, 2).unwrap();
        assert_eq!(e.value, 1.0);
    }

    #[test]
    fn mgf_matches_recursion() {
        let m = geo();
        let e = mc_mgf(&m, 0.1, 20, 200_000, 4).unwrap();
        let exact = log_mgf(&m, 0.1, 20).unwrap().exp();
        assert!((e.value - exact).abs() < 4.0 * e.std_error, "{} vs {exact}", e.value);
    }

    #[test]
    fn poisson_tail_frequency() {
        let p = HawkesModel::poisson(1.0).unwrap();
        let e = mc_tail(&p, 100, 1.2, 200_000, 8).unwrap();
        let exact = oracle::poisson_tail(100.0, 120);
        assert!((e.value - exact).abs() < 4.0 * e.std_error);
    }

    #[test]
    fn zero_hits_are_flagged() {
        let e = mc_tail(&geo(), 100, 5.0, 1000, 1).unwrap();
        assert_eq!(e.hits, Some(0));
        assert_eq!(e.upper_bound, Some(3e-3));
        assert!(!e.warnings.is_empty());
    }

    #[test]
    fn pmf_needs_lattice_point() {
        assert!(mc_pmf(&geo(), 7, 1.3, 100, 1).is_err());
    }

    #[test]
    fn estimates_are_reproducible() {
        let m = geo();
        let a = mc_mean_variance(&m, 100, 5000, 77).unwrap();
        let b = mc_mean_variance(&m, 100, 5000, 77).unwrap();
        assert_eq!(a, b);
        let c = mc_mean_variance(&m, 100, 5000, 78).unwrap();
        assert_ne!(a.0.value, c.0.value);
    }
}
