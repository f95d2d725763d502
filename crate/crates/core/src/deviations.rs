//! Rate function, saddle point and the precise large and moderate deviation
//! expansions of `P(N_t = tx)` and `P(N_t ≥ tx)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cgf::{self, ThetaBound};
use crate::error::{Error, Result};
use crate::kernel::HawkesModel;
use crate::modphi;
use crate::partitions::{enumerate_sk, odd_double_factorial, PartitionTuple};

pub mod oracle;

/// Largest expansion order `v`; coefficients run through `a_3`/`b_3`.
pub const MAX_EXPANSION_ORDER: usize = 4;
/// Saddle points closer than this to `θ_c` are reported as saturated.
pub const SATURATION_MARGIN: f64 = 1e-6;
/// Truncation tolerance for `ψ` and its derivatives.
pub const PSI_TOL: f64 = 1e-12;

/// `I(x) = x log(x/(ν+βx)) − x + βx + ν`, with `I(0) = ν` and `+∞` for `x < 0`.
pub fn rate(model: &HawkesModel, x: f64) -> f64 {
    let (nu, beta) = (model.nu(), model.branching_ratio());
    if x < 0.0 {
        return f64::INFINITY;
    }
    if x == 0.0 {
        return nu;
    }
    x * (x / (nu + beta * x)).ln() - x + beta * x + nu
}

/// `I^{(i)}(x) = (i−2)!(−1)^{i−2} x^{1−i} ((i−1)u^i − i u^{i−1} + 1)`,
/// `u = βx/(ν+βx)`.
pub fn rate_derivative(model: &HawkesModel, x: f64, i: u32) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("rate derivatives need x > 0, got {x}")));
    }
    if i < 2 {
        return Err(Error::Domain(format!("rate derivative order must be ≥ 2, got {i}")));
    }
    let (nu, beta) = (model.nu(), model.branching_ratio());
    let u = beta * x / (nu + beta * x);
    let fact: f64 = (1..=i - 2).map(f64::from).product();
    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
    let poly = f64::from(i - 1) * u.powi(i as i32) - f64::from(i) * u.powi(i as i32 - 1) + 1.0;
    Ok(fact * sign * x.powi(1 - i as i32) * poly)
}

/// `θ* = log(x/(ν+βx)) − βx/(ν+βx) + β`, the solution of `η′(θ*) = x`.
pub fn theta_star(model: &HawkesModel, x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("saddle point needs x > 0, got {x}")));
    }
    let (nu, beta) = (model.nu(), model.branching_ratio());
    let s = nu + beta * x;
    Ok((x / s).ln() - beta * x / s + beta)
}

/// `|I(x) − (θ*x − η(θ*))|` with `η` from the fixed-point solver.
pub fn legendre_check(model: &HawkesModel, x: f64) -> Result<f64> {
    let th = theta_star(model, x)?;
    let eta = cgf::solve_x(model, th)?.eta_value;
    Ok((rate(model, x) - (th * x - eta)).abs())
}

fn check_order(k_max: usize) -> Result<()> {
    if k_max >= MAX_EXPANSION_ORDER {
        return Err(Error::Domain(format!(
            "at most {} correction coefficients are supported, asked for {k_max}",
            MAX_EXPANSION_ORDER - 1
        )));
    }
    Ok(())
}

fn check_inputs(eta: &[f64], psi: &[f64], k: usize) -> Result<()> {
    if eta.len() < 2 * k + 3 || psi.len() < 2 * k + 1 {
        return Err(Error::Domain(format!(
            "order {k} needs η^{{(0..={})}} and ψ^{{(0..={})}}, got {} and {} values",
            2 * k + 2,
            2 * k,
            eta.len(),
            psi.len()
        )));
    }
    if !(eta[2] > 0.0) {
        return Err(Error::Domain(format!("η″ = {} must be > 0", eta[2])));
    }
    Ok(())
}

fn inv_factorial(n: usize) -> f64 {
    1.0 / (1..=n).map(|i| i as f64).product::<f64>()
}

/// Inner sum of `a_k` at a fixed `l`, without the `ψ^{(2k−l)}/(2k−l)!` factor:
/// `Σ_{S_l} (−1)^{|m|}/den(m) ∏_j (η^{(j+2)}/(η″(j+2)(j+1)))^{m_j}
/// (−1)^k (2(k+|m|)−1)!!/(η″)^k`.
fn inner_sum(eta: &[f64], k: usize, l: usize) -> Result<f64> {
    let e2 = eta[2];
    let ratios: Vec<f64> = (1..=l)
        .map(|j| eta[j + 2] / (e2 * ((j + 2) * (j + 1)) as f64))
        .collect();
    let sign_k = if k % 2 == 0 { 1.0 } else { -1.0 };
    enumerate_sk(l)?
        .iter()
        .map(|t: &PartitionTuple| -> Result<f64> {
            let parts = t.parts() as i64;
            let sign_m = if parts % 2 == 0 { 1.0 } else { -1.0 };
            let dfact = odd_double_factorial(2 * (k as i64 + parts) - 1)? as f64;
            Ok(sign_m / t.faa_denominator() as f64 * t.monomial(&ratios) * sign_k * dfact
                / e2.powi(k as i32))
        })
        .sum()
}

/// `a_1..a_K` from `η^{(j)}(θ*)`, `j = 0..=2K+2`, and `ψ^{(j)}(θ*)`,
/// `j = 0..=2K`.
pub fn coefficients_a_from(eta: &[f64], psi: &[f64], k_max: usize) -> Result<Vec<f64>> {
    check_order(k_max)?;
    (1..=k_max)
        .map(|k| {
            check_inputs(eta, psi, k)?;
            (0..=2 * k)
                .map(|l| Ok(psi[2 * k - l] * inv_factorial(2 * k - l) * inner_sum(eta, k, l)?))
                .sum()
        })
        .collect()
}

/// `(1/n!)·dⁿ/dθⁿ (1−e^{−θ})^{−1}` through Faà di Bruno:
/// `Σ_{S_n} e^{−|m|θ}|m|!(1−e^{−θ})^{−|m|−1}/den(m) ∏(−1)^{j m_j}`.
pub fn lattice_weight(theta: f64, n: usize) -> Result<f64> {
    let q = (-theta).exp();
    let one_minus = -(-theta).exp_m1();
    enumerate_sk(n)?
        .iter()
        .map(|t| {
            let parts = t.parts() as i32;
            let odd: u32 = (1..=n).filter(|j| j % 2 == 1).map(|j| t.m(j)).sum();
            let sign = if odd % 2 == 0 { 1.0 } else { -1.0 };
            let fact: f64 = (1..=parts).map(f64::from).product();
            Ok(q.powi(parts) * fact * one_minus.powi(-parts - 1) / t.faa_denominator() as f64 * sign)
        })
        .sum()
}

/// The summands of `b_k` grouped by the outer index `n = 0..=2k`.
pub fn coefficient_b_slices(eta: &[f64], psi: &[f64], theta: f64, k: usize) -> Result<Vec<f64>> {
    check_order(k)?;
    if k == 0 {
        return Err(Error::Domain("coefficient index starts at 1".into()));
    }
    check_inputs(eta, psi, k)?;
    (0..=2 * k)
        .map(|n| {
            let outer = lattice_weight(theta, n)?;
            let inner: f64 = (0..=2 * k - n)
                .map(|l| {
                    let j = 2 * k - n - l;
                    Ok(psi[j] * inv_factorial(j) * inner_sum(eta, k, l)?)
                })
                .sum::<Result<f64>>()?;
            Ok(outer * inner)
        })
        .collect()
}

/// `b_1..b_K` from derivative arrays as in [`coefficients_a_from`], at `θ* > 0`.
pub fn coefficients_b_from(eta: &[f64], psi: &[f64], theta: f64, k_max: usize) -> Result<Vec<f64>> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!("tail coefficients need θ* > 0, got {theta}")));
    }
    (1..=k_max)
        .map(|k| Ok(coefficient_b_slices(eta, psi, theta, k)?.iter().sum()))
        .collect()
}

/// `η^{(0..=2K+2)}(θ)` and `ψ^{(0..=2K)}(θ)` for `K` coefficients, with the
/// ψ truncation data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeInputs {
    pub eta: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi_truncation: usize,
    pub psi_tail_bound: f64,
}

pub fn derivative_inputs(model: &HawkesModel, theta: f64, k_max: usize) -> Result<DerivativeInputs> {
    check_order(k_max)?;
    let cgf = cgf::x_derivatives(model, theta, 2 * k_max + 2)?;
    let mut eta = vec![cgf.eta_value];
    eta.extend_from_slice(&cgf.eta_derivs);
    if k_max == 0 {
        let limit = modphi::phi_psi_real(model, theta, PSI_TOL)?;
        return Ok(DerivativeInputs {
            eta,
            psi: vec![limit.psi_value.0],
            psi_truncation: limit.truncation,
            psi_tail_bound: limit.tail_bound.unwrap_or(0.0),
        });
    }
    let d = modphi::psi_derivatives(model, theta, 2 * k_max, PSI_TOL)?;
    let mut psi = vec![d.psi];
    psi.extend_from_slice(&d.derivs);
    Ok(DerivativeInputs {
        eta,
        psi,
        psi_truncation: d.truncation,
        psi_tail_bound: d.tail_bounds.iter().fold(0.0f64, |m, b| m.max(*b)),
    })
}

fn check_saddle(model: &HawkesModel, theta: f64) -> Result<()> {
    if let ThetaBound::Finite(tc) = model.theta_bound() {
        if theta >= tc - SATURATION_MARGIN {
            return Err(Error::Saturation {
                theta_star: theta,
                theta_c: tc,
            });
        }
    }
    Ok(())
}

/// `a_1..a_K` at the saddle point `θ*`.
pub fn coefficients_a(model: &HawkesModel, theta_star: f64, k_max: usize) -> Result<Vec<f64>> {
    check_saddle(model, theta_star)?;
    let d = derivative_inputs(model, theta_star, k_max)?;
    coefficients_a_from(&d.eta, &d.psi, k_max)
}

/// `b_1..b_K` at the saddle point `θ* > 0`.
pub fn coefficients_b(model: &HawkesModel, theta_star: f64, k_max: usize) -> Result<Vec<f64>> {
    if !(theta_star > 0.0) {
        return Err(Error::Domain(format!("tail coefficients need θ* > 0, got {theta_star}")));
    }
    check_saddle(model, theta_star)?;
    let d = derivative_inputs(model, theta_star, k_max)?;
    coefficients_b_from(&d.eta, &d.psi, theta_star, k_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationMode {
    Pmf,
    Tail,
}

#[derive(Debug, Clone)]
pub struct DeviationQuery {
    pub model: HawkesModel,
    pub t: u64,
    pub x: f64,
    /// Number of retained terms; `v − 1` correction coefficients.
    pub order: usize,
    pub mode: DeviationMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationDiagnostics {
    pub psi: f64,
    pub psi_truncation: usize,
    pub psi_tail_bound: f64,
    /// `ψ(θ*)` (times the lattice factor in tail mode) followed by `c_k/t^k`.
    pub terms: Vec<f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationResult {
    pub mode: DeviationMode,
    pub t: u64,
    pub x: f64,
    pub order: usize,
    /// `t·I(x)`.
    pub exponent: f64,
    /// `√(I″(x)/(2πt))`.
    pub prefactor: f64,
    /// `1/(1−e^{−θ*})` in tail mode.
    pub lattice_factor: Option<f64>,
    pub theta_star: f64,
    pub coefficients: Vec<f64>,
    pub probability: f64,
    /// Whether `t` is past the dominance threshold and the probability lies in `(0, 1]`.
    pub valid: bool,
    /// `t` above which the corrections sum to less than half the leading term.
    pub dominance_threshold_t: f64,
    pub diagnostics: DeviationDiagnostics,
}

fn is_lattice_point(t: u64, x: f64) -> bool {
    let n = t as f64 * x;
    (n - n.round()).abs() <= 1e-9 * n.abs().max(1.0)
}

fn validate_query(q: &DeviationQuery) -> Result<f64> {
    if q.t == 0 {
        return Err(Error::Domain("horizon t must be ≥ 1".into()));
    }
    if q.order == 0 || q.order > MAX_EXPANSION_ORDER {
        return Err(Error::Domain(format!(
            "expansion order v = {} outside 1..={MAX_EXPANSION_ORDER}",
            q.order
        )));
    }
    if !(q.x > 0.0 && q.x.is_finite()) {
        return Err(Error::Domain(format!("x = {} must be > 0", q.x)));
    }
    let mean = q.model.mean_rate();
    if q.mode == DeviationMode::Tail && q.x <= mean {
        return Err(Error::Domain(format!(
            "tail expansion needs x above the mean rate {mean}, got {}",
            q.x
        )));
    }
    if !is_lattice_point(q.t, q.x) {
        return Err(Error::Domain(format!(
            "t·x = {} is not an integer",
            q.t as f64 * q.x
        )));
    }
    let p = q.order as u32 + 1;
    if !q.model.kernel().has_finite_moment(p) {
        return Err(Error::DivergentMoment { order: p });
    }
    let th = theta_star(&q.model, q.x)?;
    check_saddle(&q.model, th)?;
    Ok(th)
}

fn assemble(q: &DeviationQuery) -> Result<DeviationResult> {
    let th = validate_query(q)?;
    let k_max = q.order - 1;
    let inputs = derivative_inputs(&q.model, th, k_max)?;
    let (lattice, coefficients) = match q.mode {
        DeviationMode::Pmf => (None, coefficients_a_from(&inputs.eta, &inputs.psi, k_max)?),
        DeviationMode::Tail => {
            let l = 1.0 / -(-th).exp_m1();
            (Some(l), coefficients_b_from(&inputs.eta, &inputs.psi, th, k_max)?)
        }
    };
    let t = q.t as f64;
    let psi = inputs.psi[0];
    let lead = psi * lattice.unwrap_or(1.0);
    let mut terms = vec![lead];
    terms.extend(coefficients.iter().enumerate().map(|(i, c)| c / t.powi(i as i32 + 1)));
    let bracket: f64 = terms.iter().sum();
    let exponent = t * rate(&q.model, q.x);
    let i2 = rate_derivative(&q.model, q.x, 2)?;
    let prefactor = (i2 / (2.0 * PI * t)).sqrt();
    let probability = (-exponent).exp() * prefactor * bracket;
    let threshold = coefficients
        .iter()
        .enumerate()
        .map(|(i, c)| (2.0 * k_max as f64 * c.abs() / lead.abs()).powf(1.0 / (i + 1) as f64))
        .fold(0.0f64, f64::max);
    let valid = t >= threshold && probability > 0.0 && probability <= 1.0;
    let mut notes = Vec::new();
    if lattice.is_some() {
        notes.push(
            "coefficients b_k include the lattice factor; the bracket is ψ(θ*)/(1−e^{−θ*}) + Σ b_k/t^k"
                .to_string(),
        );
    }
    if !valid {
        notes.push(format!(
            "leading term not dominant or probability outside (0, 1]: t = {t}, threshold {threshold:.3e}"
        ));
    }
    Ok(DeviationResult {
        mode: q.mode,
        t: q.t,
        x: q.x,
        order: q.order,
        exponent,
        prefactor,
        lattice_factor: lattice,
        theta_star: th,
        coefficients,
        probability,
        valid,
        dominance_threshold_t: threshold,
        diagnostics: DeviationDiagnostics {
            psi,
            psi_truncation: inputs.psi_truncation,
            psi_tail_bound: inputs.psi_tail_bound,
            terms,
            notes,
        },
    })
}

/// `P(N_t = tx) ≈ e^{−tI(x)} √(I″(x)/2πt) (ψ(θ*) + a_1/t + ⋯ + a_{v−1}/t^{v−1})`.
pub fn pmf_expansion(query: &DeviationQuery) -> Result<DeviationResult> {
    if query.mode != DeviationMode::Pmf {
        return Err(Error::Domain("pmf_expansion needs a pmf query".into()));
    }
    assemble(query)
}

/// `P(N_t ≥ tx) ≈ e^{−tI(x)} √(I″(x)/2πt) (ψ(θ*)/(1−e^{−θ*}) + b_1/t + ⋯)`.
pub fn tail_expansion(query: &DeviationQuery) -> Result<DeviationResult> {
    if query.mode != DeviationMode::Tail {
        return Err(Error::Domain("tail_expansion needs a tail query".into()));
    }
    assemble(query)
}

pub const MODERATE_DISCLAIMER: &str =
    "the approximation carries an unquantified (1+o(1)) factor; it is meaningful only for y = o(t^{1/2-1/m})";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModerateResult {
    pub t: u64,
    pub y: f64,
    pub m: u32,
    /// `ν t/(1−β) + √t √ν/(1−β)^{3/2} y`.
    pub level: f64,
    /// `Σ_{i=2}^{m−1} I^{(i)}(η′(0))/i! · η″(0)^{i/2} y^i / t^{(i−2)/2}`.
    pub exponent: f64,
    pub probability: f64,
    /// `y ≤ t^{1/2−1/m}`.
    pub valid: bool,
    pub disclaimer: String,
}

/// `P(N_t ≥ level) ≈ (1/(y√2π)) e^{−exponent}`.
pub fn moderate_expansion(model: &HawkesModel, t: u64, y: f64, m: u32) -> Result<ModerateResult> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::Domain(format!("y = {y} must be > 0")));
    }
    if m < 3 {
        return Err(Error::Domain(format!("m = {m} must be ≥ 3")));
    }
    if t == 0 {
        return Err(Error::Domain("horizon t must be ≥ 1".into()));
    }
    let tf = t as f64;
    let (mean, var) = (model.mean_rate(), model.variance_rate());
    let exponent = (2..m)
        .map(|i| -> Result<f64> {
            let fact: f64 = (1..=i).map(f64::from).product();
            Ok(rate_derivative(model, mean, i)? / fact * var.powf(f64::from(i) / 2.0) * y.powi(i as i32)
                / tf.powf(f64::from(i - 2) / 2.0))
        })
        .sum::<Result<f64>>()?;
    Ok(ModerateResult {
        t,
        y,
        m,
        level: mean * tf + tf.sqrt() * var.sqrt() * y,
        exponent,
        probability: (-exponent).exp() / (y * (2.0 * PI).sqrt()),
        valid: y <= tf.powf(0.5 - 1.0 / f64::from(m)),
        disclaimer: MODERATE_DISCLAIMER.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::ExcitingKernel;

    fn half() -> HawkesModel {
        HawkesModel::new(1.0, ExcitingKernel::finite(vec![0.5]).unwrap()).unwrap()
    }

    fn geo() -> HawkesModel {
        HawkesModel::new(1.0, ExcitingKernel::geometric(0.25, 0.5).unwrap()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn rate_examples() {
        let m = half();
        assert!(rate(&m, 2.0).abs() < 1e-15);
        assert!((rate(&m, 3.0) - (3.0 * 1.2f64.ln() - 0.5)).abs() < 1e-15);
        assert!((rate(&m, 3.0) - 0.046_96).abs() < 1e-5);
        let p = HawkesModel::poisson(1.0).unwrap();
        assert!((rate(&p, std::f64::consts::E) - 1.0).abs() < 1e-15);
        assert_eq!(rate(&m, 0.0), 1.0);
        assert_eq!(rate(&m, -1.0), f64::INFINITY);
    }

    #[test]
    fn rate_derivative_examples() {
        let m = half();
        assert!((rate_derivative(&m, 2.0, 2).unwrap() - 0.125).abs() < 1e-15);
        let p = HawkesModel::poisson(1.0).unwrap();
        assert!(rel(rate_derivative(&p, 1.7, 2).unwrap(), 1.0 / 1.7) < 1e-15);
        let h = 1e-3;
        let fd = (rate(&m, 3.0 + 2.0 * h) - 2.0 * rate(&m, 3.0 + h) + 2.0 * rate(&m, 3.0 - h)
            - rate(&m, 3.0 - 2.0 * h))
            / (2.0 * h * h * h);
        assert!(rel(rate_derivative(&m, 3.0, 3).unwrap(), fd) < 1e-5);
        assert!(rate_derivative(&m, 0.0, 2).is_err());
        assert!(rate_derivative(&m, 1.0, 1).is_err());
    }

    #[test]
    fn saddle_examples() {
        let m = half();
        assert!(theta_star(&m, 2.0).unwrap().abs() < 1e-15);
        let th = theta_star(&m, 3.0).unwrap();
        assert!((th - (1.2f64.ln() - 0.1)).abs() < 1e-15);
        assert!((th - 0.082_321_6).abs() < 1e-7);
        let c = cgf::x_derivatives(&m, th, 1).unwrap();
        assert!((c.eta(1) - 3.0).abs() < 1e-9);
        let p = HawkesModel::poisson(2.0).unwrap();
        assert!((theta_star(&p, 5.0).unwrap() - 2.5f64.ln()).abs() < 1e-15);
        assert!(theta_star(&m, 0.0).is_err());
    }

    #[test]
    fn legendre_examples() {
        let m = half();
        assert!(legendre_check(&m, 2.0).unwrap() < 1e-15);
        for x in [0.5, 1.0, 2.5, 3.0, 4.0] {
            assert!(legendre_check(&m, x).unwrap() <= 1e-10, "x={x}");
        }
    }

    #[test]
    fn gaussian_like_inputs_give_zero_a1() {
        let eta = [0.0, 1.0, 2.0, 0.0, 0.0];
        let psi = [1.0, 0.0, 0.0];
        assert_eq!(coefficients_a_from(&eta, &psi, 1).unwrap(), vec![0.0]);
    }

    #[test]
    fn poisson_a1_is_the_stirling_correction() {
        let p = HawkesModel::poisson(1.0).unwrap();
        for x in [0.5f64, 1.5, 3.0] {
            let a = coefficients_a(&p, x.ln(), 1).unwrap();
            assert!(rel(a[0], -1.0 / (12.0 * x)) < 1e-12, "x={x}");
        }
    }

    #[test]
    fn n0_slice_is_lattice_factor_times_a() {
        let m = geo();
        let th = theta_star(&m, 1.8).unwrap();
        let d = derivative_inputs(&m, th, 3).unwrap();
        let a = coefficients_a_from(&d.eta, &d.psi, 3).unwrap();
        let l = 1.0 / -(-th).exp_m1();
        for k in 1..=3 {
            let slices = coefficient_b_slices(&d.eta, &d.psi, th, k).unwrap();
            assert!(rel(slices[0], l * a[k - 1]) < 1e-13, "k={k}");
        }
    }

    #[test]
    fn lattice_weights_are_taylor_coefficients() {
        // 1/(1−e^{−θ}) = Σ_n w_n(θ0) (θ−θ0)^n
        let th0 = 0.7;
        let h = 0.05f64;
        let series: f64 = (0..=10).map(|n| lattice_weight(th0, n).unwrap() * h.powi(n as i32)).sum();
        let exact = 1.0 / (1.0 - (-(th0 + h)).exp());
        assert!(rel(series, exact) < 1e-12);
    }

    #[test]
    fn b_tends_to_a_for_large_theta() {
        let eta = [0.0, 3.0, 2.0, 5.0, 1.0, 4.0, 2.0, 1.0, 0.5];
        let psi = [1.2, 0.3, -0.4, 0.1, 0.2, 0.05, 0.01];
        let a = coefficients_a_from(&eta, &psi, 3).unwrap();
        let b = coefficients_b_from(&eta, &psi, 40.0, 3).unwrap();
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() <= 1e-12 * a[k].abs().max(1.0));
        }
    }

    #[test]
    fn coefficient_b_needs_positive_saddle() {
        assert!(coefficients_b(&geo(), 0.0, 1).is_err());
        assert!(coefficients_b(&geo(), -0.2, 1).is_err());
    }

    fn query(model: HawkesModel, t: u64, x: f64, order: usize, mode: DeviationMode) -> DeviationQuery {
        DeviationQuery { model, t, x, order, mode }
    }

    #[test]
    fn poisson_pmf_examples() {
        let p = HawkesModel::poisson(1.0).unwrap();
        let exact = oracle::poisson_pmf(200.0, 300);
        let v1 = pmf_expansion(&query(p.clone(), 200, 1.5, 1, DeviationMode::Pmf)).unwrap();
        let v2 = pmf_expansion(&query(p, 200, 1.5, 2, DeviationMode::Pmf)).unwrap();
        assert!(rel(v1.probability, exact) < 0.02);
        assert!(rel(v2.probability, exact) < 5e-4);
        assert!(v2.valid);
    }

    #[test]
    fn pmf_at_the_mean_is_the_local_clt() {
        let m = geo();
        let mean = m.mean_rate();
        assert!((mean - 4.0 / 3.0).abs() < 1e-15);
        let t = 3;
        let r = pmf_expansion(&query(m.clone(), t, mean, 1, DeviationMode::Pmf)).unwrap();
        let clt = 1.0 / (2.0 * PI * t as f64 * m.variance_rate()).sqrt();
        assert!(rel(r.probability, clt) < 1e-12);
    }

    #[test]
    fn poisson_tail_example() {
        let p = HawkesModel::poisson(1.0).unwrap();
        let exact = oracle::poisson_tail(400.0, 600);
        let v1 = tail_expansion(&query(p, 400, 1.5, 1, DeviationMode::Tail)).unwrap();
        assert!(rel(v1.probability, exact) < 0.01);
    }

    #[test]
    fn tail_near_the_mean() {
        let p = HawkesModel::poisson(1.0).unwrap();
        let x = 0.01f64.exp();
        let l = 1.0 / -(-theta_star(&p, x).unwrap()).exp_m1();
        assert!((l - 100.5).abs() < 0.01);
        let short = tail_expansion(&query(p.clone(), 200, 1.01, 2, DeviationMode::Tail)).unwrap();
        assert!(short.lattice_factor.unwrap() > 90.0);
        assert!(!short.valid);
        let long = tail_expansion(&query(p, 100_000, 1.01, 2, DeviationMode::Tail)).unwrap();
        assert!(long.probability < 1.0 && long.probability > 0.0);
        assert!(long.valid && long.dominance_threshold_t < 100_000.0);
    }

    #[test]
    fn query_errors() {
        let m = geo();
        assert!(matches!(
            pmf_expansion(&query(m.clone(), 7, 1.3, 1, DeviationMode::Pmf)),
            Err(Error::Domain(_))
        ));
        assert!(tail_expansion(&query(m.clone(), 100, 1.0, 1, DeviationMode::Tail)).is_err());
        assert!(pmf_expansion(&query(m.clone(), 100, 1.8, 5, DeviationMode::Pmf)).is_err());
        // x beyond the saddle range: η′ blows up at θ_c
        assert!(matches!(
            pmf_expansion(&query(m, 10, 1e5, 1, DeviationMode::Pmf)),
            Err(Error::Saturation { .. })
        ));
    }

    #[test]
    fn tail_monotone_in_x() {
        let m = geo();
        let mut prev = f64::INFINITY;
        for n in 1500..1700 {
            if n % 20 != 0 {
                continue;
            }
            let r = tail_expansion(&query(m.clone(), 1000, n as f64 / 1000.0, 2, DeviationMode::Tail)).unwrap();
            assert!(r.valid);
            assert!(r.probability <= prev);
            prev = r.probability;
        }
    }

    #[test]
    fn moderate_examples() {
        let m = half();
        for y in [0.5, 2.0, 3.0] {
            let r = moderate_expansion(&m, 10_000, y, 3).unwrap();
            let want = (-y * y / 2.0).exp() / (y * (2.0 * PI).sqrt());
            assert!(rel(r.probability, want) < 1e-12);
        }
        let r = moderate_expansion(&m, 10_000, 2.0, 4).unwrap();
        let i3 = rate_derivative(&m, 2.0, 3).unwrap();
        let want = 2.0 + i3 * 8f64.powf(1.5) * 8.0 / (6.0 * 100.0);
        assert!(rel(r.exponent, want) < 1e-12);
        assert!(r.valid);
        assert!(moderate_expansion(&m, 100, 0.0, 3).is_err());
        assert!(moderate_expansion(&m, 100, 1.0, 2).is_err());
        assert!(!moderate_expansion(&m, 100, 50.0, 3).unwrap().valid);
    }
}
