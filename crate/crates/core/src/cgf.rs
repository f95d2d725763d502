//! The limiting cumulant generating function `η(z) = ν(x(z) − 1)`, where
//! `x(z)` is the stable root of `x = e^{z + ‖α‖₁(x − 1)}`.
//!
//! `x` is the moment generating function of the Borel law with parameter
//! `‖α‖₁` (total progeny of a Poisson branching process), so `η` is the CGF
//! of a compound Poisson variable with Borel jumps.

use num_complex::Complex64;
use serde::Serialize;
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::kernel::HawkesModel;
use crate::partitions::{enumerate_sk, enumerate_sk_split};

/// Highest derivative order served by [`x_derivatives`].
pub const MAX_CGF_ORDER: usize = 8;

const NEWTON_MAX_ITER: usize = 200;
const NEWTON_TOL: f64 = 1e-14;
/// Complex continuation steps are at most this long in `Im z`.
const CONTINUATION_STEP: f64 = 0.05;
/// Derivatives are refused closer than this to `θ_c`.
const DERIVATIVE_MARGIN: f64 = 1e-6;
const CRITICAL_LOAD: f64 = 1.0 - 1e-8;

/// Right edge of the real domain of `η`. The pure-Poisson kernel has no edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaBound {
    Finite(f64),
    Unbounded,
}

impl ThetaBound {
    /// `θ_c`, or `+∞` when unbounded.
    pub fn value(&self) -> f64 {
        match self {
            ThetaBound::Finite(t) => *t,
            ThetaBound::Unbounded => f64::INFINITY,
        }
    }

    /// Whether `theta ≤ θ_c − margin`.
    pub fn admits(&self, theta: f64, margin: f64) -> bool {
        match self {
            ThetaBound::Finite(t) => theta <= t - margin,
            ThetaBound::Unbounded => theta.is_finite(),
        }
    }
}

/// `θ_c = ‖α‖₁ − 1 − log ‖α‖₁` for `0 < ‖α‖₁ < 1`.
pub fn critical_theta(l1: f64) -> Result<f64> {
    if !(l1 > 0.0 && l1 < 1.0) {
        return Err(Error::Domain(format!("θ_c needs 0 < ‖α‖₁ < 1, got {l1}")));
    }
    Ok(l1 - 1.0 - l1.ln())
}

/// `x(θ)`, `η(θ)` and optionally their derivatives at a real point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CgfEval {
    pub theta: f64,
    pub x_value: f64,
    pub eta_value: f64,
    /// `x′, x″, ...` (empty when derivatives were not requested).
    pub x_derivs: Vec<f64>,
    /// `η^{(k)} = ν·x^{(k)}`.
    pub eta_derivs: Vec<f64>,
    pub newton_iterations: usize,
    pub residual: f64,
}

impl CgfEval {
    /// `η^{(k)}` for `k ≥ 0` (`k = 0` is `η` itself).
    pub fn eta(&self, k: usize) -> f64 {
        if k == 0 {
            self.eta_value
        } else {
            self.eta_derivs[k - 1]
        }
    }

    pub fn x(&self, k: usize) -> f64 {
        if k == 0 {
            self.x_value
        } else {
            self.x_derivs[k - 1]
        }
    }
}

/// Value of `x(z)` at a complex point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexCgf {
    pub z: Complex64,
    pub x_value: Complex64,
    pub eta_value: Complex64,
    pub newton_iterations: usize,
    pub residual: f64,
}

fn fixed_point_residual(theta: f64, l1: f64, x: f64) -> f64 {
    (x - (theta + l1 * (x - 1.0)).exp()).abs()
}

fn check_real_domain(model: &HawkesModel, theta: f64) -> Result<()> {
    if !theta.is_finite() {
        return Err(Error::Domain(format!("θ = {theta} is not finite")));
    }
    let bound = model.theta_bound();
    if !bound.admits(theta, 0.0) {
        return Err(Error::Domain(format!("θ = {theta} exceeds θ_c = {}", bound.value())));
    }
    Ok(())
}

/// Solves `x = e^{θ + ‖α‖₁(x−1)}` on the branch `‖α‖₁·x ≤ 1`.
///
/// Newton from `x = 1` converges monotonically (the residual map is concave
/// and increasing left of the root); bisection on `[1, 1/‖α‖₁]` takes over
/// when roundoff stalls Newton next to `θ_c`.
pub fn solve_x(model: &HawkesModel, theta: f64) -> Result<CgfEval> {
    check_real_domain(model, theta)?;
    let l1 = model.branching_ratio();
    let nu = model.nu();
    let done = |x: f64, iterations: usize| CgfEval {
        theta,
        x_value: x,
        eta_value: nu * (x - 1.0),
        x_derivs: Vec::new(),
        eta_derivs: Vec::new(),
        newton_iterations: iterations,
        residual: fixed_point_residual(theta, l1, x),
    };
    if l1 == 0.0 {
        return Ok(done(theta.exp(), 0));
    }
    if let ThetaBound::Finite(tc) = model.theta_bound() {
        if theta == tc {
            return Ok(done(1.0 / l1, 0));
        }
    }

    let mut x = 1.0;
    for it in 1..=NEWTON_MAX_ITER {
        let e = (theta + l1 * (x - 1.0)).exp();
        let f = x - e;
        let df = 1.0 - l1 * e;
        if df <= 0.0 {
            break;
        }
        let step = f / df;
        x -= step;
        let scale = x.abs().max(1.0);
        if step.abs() <= NEWTON_TOL * scale && fixed_point_residual(theta, l1, x) <= NEWTON_TOL * scale {
            return Ok(done(x, it));
        }
        if !x.is_finite() || x <= 0.0 {
            break;
        }
    }

    if theta > 0.0 {
        let f = |x: f64| x - (theta + l1 * (x - 1.0)).exp();
        let (mut lo, mut hi) = (1.0, 1.0 / l1);
        let mut it = 0;
        while it < NEWTON_MAX_ITER && hi - lo > f64::EPSILON * hi {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            it += 1;
        }
        let x = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
        let eval = done(x, NEWTON_MAX_ITER + it);
        if eval.residual <= 1e-12 * x.max(1.0) {
            return Ok(eval);
        }
    }
    Err(Error::NoConvergence {
        iterations: NEWTON_MAX_ITER,
        z: theta.to_string(),
    })
}

/// Solves the fixed-point equation at complex `z`, `|Im z| ≤ π`, by
/// continuation from the real solution at `Re z`.
pub fn solve_x_complex(model: &HawkesModel, z: Complex64) -> Result<ComplexCgf> {
    if z.im.abs() > std::f64::consts::PI {
        return Err(Error::Domain(format!("|Im z| = {} exceeds π", z.im.abs())));
    }
    let bound = model.theta_bound();
    if z.im != 0.0 && !bound.admits(z.re, 1e-9) {
        return Err(Error::Domain(format!(
            "Re z = {} is within 1e-9 of θ_c = {}",
            z.re,
            bound.value()
        )));
    }
    let real = solve_x(model, z.re)?;
    let l1 = model.branching_ratio();
    let nu = model.nu();
    let one = Complex64::new(1.0, 0.0);
    if l1 == 0.0 {
        let x = z.exp();
        return Ok(ComplexCgf {
            z,
            x_value: x,
            eta_value: (x - one) * nu,
            newton_iterations: 0,
            residual: 0.0,
        });
    }

    let mut x = Complex64::new(real.x_value, 0.0);
    let mut iterations = real.newton_iterations;
    let steps = (z.im.abs() / CONTINUATION_STEP).ceil().max(1.0) as usize;
    for s in 1..=steps {
        let zs = Complex64::new(z.re, z.im * s as f64 / steps as f64);
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let e = (zs + (x - one) * l1).exp();
            let f = x - e;
            let df = one - e * l1;
            let step = f / df;
            x -= step;
            iterations += 1;
            let scale = x.norm().max(1.0);
            if step.norm() <= NEWTON_TOL * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                iterations,
                z: zs.to_string(),
            });
        }
    }
    let residual = (x - (z + (x - one) * l1).exp()).norm();
    Ok(ComplexCgf {
        z,
        x_value: x,
        eta_value: (x - one) * nu,
        newton_iterations: iterations,
        residual,
    })
}

/// `x^{(1)}..x^{(order)}` at `θ` by differentiating the fixed-point equation.
///
/// Leibniz on `x = e^θ·e^{‖α‖₁(x−1)}` plus Faà di Bruno on the second factor
/// gives `x^{(k)} = x Σ_{l=0}^{k} C(k,l) Σ_{S_l} w(m) ‖α‖₁^{|m|} ∏ (x^{(j)})^{m_j}`.
/// The one-block partition of `S_k` contributes `‖α‖₁·x·x^{(k)}`; moving it
/// to the left leaves the factor `x/(1 − ‖α‖₁x)` and the split partitions of
/// `k`.
pub fn x_derivatives(model: &HawkesModel, theta: f64, order: usize) -> Result<CgfEval> {
    if order == 0 || order > MAX_CGF_ORDER {
        return Err(Error::Domain(format!(
            "derivative order {order} outside 1..={MAX_CGF_ORDER}"
        )));
    }
    let bound = model.theta_bound();
    let l1 = model.branching_ratio();
    if !bound.admits(theta, DERIVATIVE_MARGIN) {
        let load = if theta <= bound.value() {
            l1 * solve_x(model, theta).map(|e| e.x_value).unwrap_or(1.0 / l1)
        } else {
            f64::INFINITY
        };
        return Err(Error::NearCritical { theta, load });
    }
    let mut eval = solve_x(model, theta)?;
    let x = eval.x_value;
    let load = l1 * x;
    if load > CRITICAL_LOAD {
        return Err(Error::NearCritical { theta, load });
    }
    let gain = x / (1.0 - load);

    let mut derivs: Vec<f64> = Vec::with_capacity(order);
    for k in 1..=order {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for l in 0..k {
            if l > 0 {
                binom *= (k - l + 1) as f64 / l as f64;
            }
            acc += binom * composite_sum(&enumerate_sk(l)?, l1, &derivs);
        }
        acc += composite_sum(&enumerate_sk_split(k)?, l1, &derivs);
        derivs.push(gain * acc);
    }
    eval.eta_derivs = derivs.iter().map(|d| model.nu() * d).collect();
    eval.x_derivs = derivs;
    Ok(eval)
}

/// `Σ_t w(t)·l1^{|t|}·∏ (x^{(j)})^{m_j}` over a set of partitions.
fn composite_sum(set: &[crate::partitions::PartitionTuple], l1: f64, derivs: &[f64]) -> f64 {
    set.iter()
        .map(|t| t.faa_weight() as f64 * l1.powi(t.parts() as i32) * t.monomial(derivs))
        .sum()
}

/// Borel law `P(B = n) = e^{−μn}(μn)^{n−1}/n!`, `n ≥ 1`.
pub fn borel_pmf(n: u64, mu: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if mu == 0.0 {
        return if n == 1 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    (-mu * nf + (nf - 1.0) * (mu * nf).ln() - ln_factorial(n)).exp()
}

/// Result of comparing `x(θ)` with the Borel moment generating series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BorelCheck {
    pub residual: f64,
    /// `e^{θN}·P(B = N)`, the last retained term.
    pub last_term: f64,
    /// False when the last term exceeds `1e-14`: raise `N`.
    pub truncation_sufficient: bool,
    pub terms: u64,
}

/// `|x(θ) − Σ_{n=1}^{N} e^{θn}·P(B = n)|` with `B ~ Borel(‖α‖₁)`.
pub fn borel_divisibility_residual(model: &HawkesModel, theta: f64, terms: u64) -> Result<BorelCheck> {
    if terms < 50 {
        return Err(Error::Domain(format!("Borel series needs N ≥ 50, got {terms}")));
    }
    let bound = model.theta_bound();
    if !bound.admits(theta, 0.0) || theta == bound.value() {
        return Err(Error::Domain(format!("θ = {theta} must be < θ_c = {}", bound.value())));
    }
    let x = solve_x(model, theta)?.x_value;
    let mu = model.branching_ratio();
    let term = |n: u64| {
        if mu == 0.0 {
            if n == 1 {
                theta.exp()
            } else {
                0.0
            }
        } else {
            let nf = n as f64;
            (theta * nf - mu * nf + (nf - 1.0) * (mu * nf).ln() - ln_factorial(n)).exp()
        }
    };
    // Smallest terms first.
    let series: f64 = (1..=terms).rev().map(term).sum();
    let last_term = term(terms);
    Ok(BorelCheck {
        residual: (x - series).abs(),
        last_term,
        truncation_sufficient: last_term <= 1e-14,
        terms,
    })
}
