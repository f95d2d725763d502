//! Finite-`t` reference values: exact Poisson probabilities and lattice
//! Fourier inversion of the exact MGF.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::factorial::ln_factorial;

use crate::cgf::ThetaBound;
use crate::error::{Error, Result};
use crate::kernel::HawkesModel;
use crate::modphi::log_mgf;

/// Quadrature nodes of the Fourier inversion.
pub const FOURIER_NODES: usize = 1 << 16;

fn ln_poisson_pmf(mu: f64, n: u64) -> f64 {
    n as f64 * mu.ln() - mu - ln_factorial(n)
}

/// `P(Poisson(μ) = n)`.
pub fn poisson_pmf(mu: f64, n: u64) -> f64 {
    ln_poisson_pmf(mu, n).exp()
}

/// `P(Poisson(μ) ≥ n)` for `n ≥ μ`, summed upward from `n`.
pub fn poisson_tail(mu: f64, n: u64) -> f64 {
    let first = ln_poisson_pmf(mu, n);
    let (mut term, mut sum, mut k) = (1.0f64, 0.0f64, n);
    while term > 1e-18 * sum || sum == 0.0 {
        sum += term;
        k += 1;
        term *= mu / k as f64;
        if term == 0.0 {
            break;
        }
    }
    first.exp() * sum
}

/// Tilt used by the inversion: `θ*` of `n/t`, clamped inside the domain.
fn tilt(model: &HawkesModel, t: u64, n: u64, positive: bool) -> f64 {
    let x = (n as f64 / t as f64).max(1e-3);
    let mut th = super::theta_star(model, x).unwrap_or(0.0);
    if let ThetaBound::Finite(tc) = model.theta_bound() {
        th = th.min(tc - 1e-3);
    }
    if positive {
        th = th.max(1e-3);
    }
    th
}

/// `(1/2π) ∫_{−π}^{π} E[e^{zN_t}] e^{−zn} w(z) dφ`, `z = θ + iφ`, by the
/// trapezoidal rule. The contour is shifted to `Re z = θ` so that the
/// integrand does not oscillate around a value many orders above the
/// result.
fn invert(model: &HawkesModel, t: u64, n: u64, theta: f64, weight: impl Fn(Complex64) -> Complex64 + Sync) -> Result<f64> {
    let nodes = FOURIER_NODES;
    let steps = t as usize;
    let nf = n as f64;
    let base = log_mgf(model, theta, steps)? - theta * nf;
    let value = |k: usize| -> Result<f64> {
        let phi = 2.0 * PI * k as f64 / nodes as f64;
        let z = Complex64::new(theta, phi);
        let l = log_mgf(model, z, steps)? - z * nf - base;
        Ok((l.exp() * weight(z)).re)
    };
    // The integrand at −φ is the conjugate of the one at φ.
    let half = nodes / 2;
    let interior: f64 = (1..half)
        .into_par_iter()
        .map(value)
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    let total = value(0)? + value(half)? + 2.0 * interior;
    Ok(base.exp() * total / nodes as f64)
}

fn check_horizon(t: u64) -> Result<()> {
    if t == 0 {
        return Err(Error::Domain("horizon t must be ≥ 1".into()));
    }
    Ok(())
}

/// `P(N_t = n)` by Fourier inversion of the exact finite-`t` MGF.
pub fn fourier_pmf(model: &HawkesModel, t: u64, n: u64) -> Result<f64> {
    check_horizon(t)?;
    let th = tilt(model, t, n, false);
    invert(model, t, n, th, |_| Complex64::new(1.0, 0.0))
}

/// `P(N_t ≥ n) = (1/2π)∫ E[e^{zN_t}] e^{−zn}/(1−e^{−z}) dφ` with `Re z > 0`.
pub fn fourier_tail(model: &HawkesModel, t: u64, n: u64) -> Result<f64> {
    check_horizon(t)?;
    let th = tilt(model, t, n, true);
    invert(model, t, n, th, |z| Complex64::new(1.0, 0.0) / (1.0 - (-z).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ExcitingKernel;

    #[test]
    fn poisson_reference_values() {
        assert!((poisson_pmf(2.0, 3) - 8.0 / 6.0 * (-2.0f64).exp()).abs() < 1e-16);
        let direct: f64 = (5..200).map(|k| poisson_pmf(3.0, k)).sum();
        assert!((poisson_tail(3.0, 5) - direct).abs() < 1e-15);
    }

    #[test]
    fn fourier_recovers_poisson() {
        let p = HawkesModel::poisson(1.0).unwrap();
        for (t, n) in [(50, 50), (100, 150), (30, 12)] {
            let f = fourier_pmf(&p, t, n).unwrap();
            let e = poisson_pmf(t as f64, n);
            assert!(((f - e) / e).abs() < 1e-10, "t={t} n={n}: {f} vs {e}");
        }
        let f = fourier_tail(&p, 100, 150).unwrap();
        let e = poisson_tail(100.0, 150);
        assert!(((f - e) / e).abs() < 1e-10);
    }

    #[test]
    fn fourier_pmf_of_short_hawkes_by_enumeration() {
        // t = 2, one lag: N = X_1 + X_2, X_2 | X_1 ~ Poisson(ν + α X_1).
        let m = HawkesModel::new(0.7, ExcitingKernel::finite(vec![0.4]).unwrap()).unwrap();
        for n in 0..6u64 {
            let exact: f64 = (0..=n)
                .map(|x1| poisson_pmf(0.7, x1) * poisson_pmf(0.7 + 0.4 * x1 as f64, n - x1))
                .sum();
            let f = fourier_pmf(&m, 2, n).unwrap();
            assert!((f - exact).abs() < 1e-12, "n={n}");
        }
    }
}
