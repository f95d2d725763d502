//! Finite-`t` moment generating function and the mod-φ limit.
//!
//! `E[e^{zN_t}] = exp(ν Σ_{i<t} (e^{f_i(z)} − 1))` with
//! `f_s(z) = z + Σ_{i=1}^s α_i (e^{f_{s−i}(z)} − 1)`, and
//! `e^{−tη(z)} E[e^{zN_t}] → ψ(z) = e^{νφ(z)}`, `φ(z) = Σ_i (e^{f_i(z)} − x(z))`.
//!
//! The φ-series is truncated with a certified bound on the discarded tail,
//! built from the contraction inequality
//! `|d_i| ≤ (1+δ)|x| (Σ_{j≤i} α_j |d_{i−j}| + |x−1| Σ_{j>i} α_j)`, `i ≥ M`,
//! for `d_i = e^{f_i} − x`, the discrete Gronwall bound and the renewal
//! majorant `Q` of `q_j = (1+δ)|x| α_j`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::cgf::{self, ThetaBound};
use crate::error::{Error, Result};
use crate::jet::{Jet, MgfScalar};
use crate::kernel::{ExcitingKernel, HawkesModel, KernelForm};
use crate::partitions::enumerate_sk;
use crate::series::{renewal_solve, Sequence};

/// Highest ψ-derivative order.
pub const MAX_PSI_ORDER: usize = 6;
/// Candidate δ values, largest first.
pub const DELTA_GRID: [f64; 6] = [0.5, 0.25, 0.1, 0.01, 1e-4, 1e-6];
/// Contraction must be observed on at least this many consecutive indices.
const CONTRACTION_RUN: usize = 20;
const OVERFLOW_LIMIT: f64 = 1e300;
const INITIAL_TERMS: usize = 64;
const MAX_TERMS: usize = 1 << 13;
/// Sample points on the circle used to bound derivative tails.
const CONTOUR_POINTS: usize = 16;
const MIN_TOL: f64 = 1e-14;

/// `e^{f_s(z)} − 1` for `s = 0..count`.
pub fn exp_f_minus_one<S: MgfScalar>(model: &HawkesModel, z: S, count: usize) -> Result<Vec<S>> {
    Ok(recursion(model, z, count)?.1)
}

/// `f_0(z), ..., f_T(z)`.
pub fn f_sequence<S: MgfScalar>(model: &HawkesModel, z: S, last: usize) -> Result<Vec<S>> {
    Ok(recursion(model, z, last + 1)?.0)
}

fn recursion<S: MgfScalar>(model: &HawkesModel, z: S, count: usize) -> Result<(Vec<S>, Vec<S>)> {
    let kernel = model.kernel();
    let zero = z.zero_like();
    let mut f = Vec::with_capacity(count);
    let mut d: Vec<S> = Vec::with_capacity(count);
    let push = |s: usize, fs: S, f: &mut Vec<S>, d: &mut Vec<S>| -> Result<()> {
        let ds = fs.exp_m1();
        if !((ds.magnitude()).is_finite() && ds.magnitude() < OVERFLOW_LIMIT) {
            return Err(Error::Overflow { index: s });
        }
        f.push(fs);
        d.push(ds);
        Ok(())
    };
    match kernel.form() {
        KernelForm::Geometric { a, r } => {
            let mut running = zero;
            for s in 0..count {
                if s > 0 {
                    running = (running + d[s - 1] * *a) * *r;
                }
                push(s, z + running, &mut f, &mut d)?;
            }
        }
        _ => {
            let len = kernel.finite_len().unwrap_or(count);
            let weights = kernel.weights(len.min(count));
            for s in 0..count {
                let mut acc = zero;
                for (i, w) in weights.iter().enumerate().take(s) {
                    if *w != 0.0 {
                        acc = acc + d[s - 1 - i] * *w;
                    }
                }
                push(s, z + acc, &mut f, &mut d)?;
            }
        }
    }
    Ok((f, d))
}

/// `d_i = e^{f_i} − x` for `i = 0..count`, given `x = x(z)` and `x − 1`.
///
/// Runs the equivalent recursion `d_i = x·(e^{u_i} − 1)` with
/// `u_i = Σ_{j=1}^{i} α_j d_{i−j} − (x−1) Σ_{j>i} α_j`, which keeps relative
/// precision once `e^{f_i}` is within rounding of `x`.
pub fn phi_terms<S: MgfScalar>(model: &HawkesModel, x: S, xm1: S, count: usize) -> Result<Vec<S>> {
    let kernel = model.kernel();
    let zero = x.zero_like();
    let mut d: Vec<S> = Vec::with_capacity(count);
    let geometric = kernel.geometric_params();
    let weights = match geometric {
        Some(_) => Vec::new(),
        None => kernel.weights(kernel.finite_len().unwrap_or(count).min(count)),
    };
    let mut running = zero;
    for s in 0..count {
        let conv = match geometric {
            Some((a, r)) => {
                if s > 0 {
                    running = (running + d[s - 1] * a) * r;
                }
                running
            }
            None => weights
                .iter()
                .enumerate()
                .take(s)
                .filter(|(_, w)| **w != 0.0)
                .fold(zero, |acc, (i, w)| acc + d[s - 1 - i] * *w),
        };
        let u = conv - xm1 * kernel.tail_mass(s);
        let ds = x * u.exp_m1();
        if !(ds.magnitude().is_finite() && ds.magnitude() < OVERFLOW_LIMIT) {
            return Err(Error::Overflow { index: s });
        }
        d.push(ds);
    }
    Ok(d)
}

/// `log E[e^{zN_t}] = ν Σ_{i<t} (e^{f_i(z)} − 1)`, exact for every `t ≥ 1`.
pub fn log_mgf<S: MgfScalar>(model: &HawkesModel, z: S, t: usize) -> Result<S> {
    if t == 0 {
        return Err(Error::Domain("horizon t must be ≥ 1".into()));
    }
    let d = exp_f_minus_one(model, z, t)?;
    let total = d.iter().fold(z.zero_like(), |acc, v| acc + *v);
    Ok(total * model.nu())
}

/// Truncated `φ(z)`, `ψ(z)` and the certificate for the discarded tail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModPhiLimit {
    pub z: (f64, f64),
    pub x_value: (f64, f64),
    /// `f_0(z)..f_T(z)` as `(re, im)`.
    pub f_values: Vec<(f64, f64)>,
    pub phi_value: (f64, f64),
    pub psi_value: (f64, f64),
    /// Bound on `Σ_{i>T} |e^{f_i(z)} − x(z)|`; `None` when uncertified.
    pub tail_bound: Option<f64>,
    pub truncation: usize,
    pub certified: bool,
    pub certificate: Option<TailCertificate>,
}

impl ModPhiLimit {
    pub fn phi(&self) -> Complex64 {
        Complex64::new(self.phi_value.0, self.phi_value.1)
    }

    pub fn psi(&self) -> Complex64 {
        Complex64::new(self.psi_value.0, self.psi_value.1)
    }
}

/// Constants of the tail certificate and the resulting bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCertificate {
    pub delta: f64,
    /// Index from which the contraction inequality was verified.
    pub contraction_from: usize,
    pub c1: f64,
    pub c2: f64,
    /// Last retained index `T`.
    pub truncation: usize,
    /// Bound on `Σ_{i>T} |d_i|`.
    pub tail_bound: f64,
    /// Gronwall bound on `|d_i|` for `i = 0..=T`.
    pub pointwise: Vec<f64>,
}

fn as_pair(z: Complex64) -> (f64, f64) {
    (z.re, z.im)
}

/// `c_i = Σ_{j=1}^{i} α_j p_{i−j}` for `i = 0..p.len()`.
fn kernel_convolve(kernel: &ExcitingKernel, p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut out = vec![0.0; n];
    if let Some((a, r)) = kernel.geometric_params() {
        let mut running = 0.0;
        for i in 1..n {
            running = (running + a * p[i - 1]) * r;
            out[i] = running;
        }
        return out;
    }
    let len = kernel.finite_len().unwrap_or(n).min(n);
    let w = kernel.weights(len);
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = w.iter().enumerate().take(i).map(|(j, wj)| wj * p[i - 1 - j]).sum();
    }
    out
}

/// Largest `u*` with `e^{u*} − 1 ≤ (1+δ)u*`, so that `|e^u − 1| ≤ (1+δ)|u|`
/// whenever `|u| ≤ u*`.
fn linear_radius(delta: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 2.0f64.max(4.0 * delta));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid.exp_m1() <= (1.0 + delta) * mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Certifies a truncation index for `Σ_i d_i` from `sup_d(n)`, the values
/// `sup_K |d_i|` for `i < n`, and the constants `sup_K |x|`, `sup_K |x − 1|`.
///
/// Writing `e^{f_i} = x·e^{u_i}` with
/// `u_i = Σ_{j≤i} α_j d_{i−j} − (x−1) Σ_{j>i} α_j`, the contraction
/// inequality holds at `i` as soon as `|u_i| ≤ u*(δ)`, or when it is observed
/// directly. Every admissible δ of the grid is tried and the smallest bound
/// kept.
fn certify(
    kernel: &ExcitingKernel,
    x_sup: f64,
    xm1_sup: f64,
    tol: f64,
    mut sup_d: impl FnMut(usize) -> Result<Vec<f64>>,
) -> Result<TailCertificate> {
    let l1 = kernel.l1_norm();
    let deltas: Vec<f64> = DELTA_GRID
        .iter()
        .copied()
        .filter(|d| (1.0 + d) * x_sup * l1 < 1.0)
        .collect();
    if deltas.is_empty() {
        return Err(Error::NoCertificate(format!(
            "(1+δ)|x|‖α‖₁ ≥ 1 for every δ ≥ 1e-6 (|x| = {x_sup})"
        )));
    }

    let mut n = INITIAL_TERMS;
    let mut best: Option<f64> = None;
    loop {
        let p = sup_d(n)?;
        let last = n - 1;
        let conv = kernel_convolve(kernel, &p);
        let tails: Vec<f64> = (0..n).map(|i| kernel.tail_mass(i)).collect();
        let far = kernel
            .cumulative_tail(last + 1)
            .map_err(|e| Error::NoCertificate(format!("kernel tail sums unavailable: {e}")))?;
        let mut found: Option<TailCertificate> = None;
        for &delta in &deltas {
            let gain = (1.0 + delta) * x_sup;
            let mass = gain * l1;
            let c1 = gain * xm1_sup;
            let u_star = linear_radius(delta);
            let holds = |i: usize| {
                let u = conv[i] + xm1_sup * tails[i];
                u <= u_star || p[i] <= gain * u * (1.0 + 1e-12)
            };
            let m = (0..n).rev().find(|&i| !holds(i)).map_or(0, |i| i + 1);
            if n - m < CONTRACTION_RUN {
                continue;
            }
            let c2 = p[..=m.min(last)].iter().fold(0.0f64, |acc, v| acc.max(*v));
            let g: Vec<f64> = (0..n)
                .map(|i| c1 * tails[i] + if i <= m { c2 } else { 0.0 })
                .collect();
            let q = Sequence::new((1..=n).map(|j| gain * kernel.weight(j)).collect())?;
            let big_q = renewal_solve(&q, n)?;
            let qtail = |k: usize| gain * tails[k];
            // Σ_{m>k} Q(m) = [qtail(k) + Σ_{j=1}^k Q(j) qtail(k−j)] / (1 − Σq)
            let q_rest = |k: usize| {
                let inner: f64 = (1..=k).map(|j| big_q.get(j) * qtail(k - j)).sum();
                (qtail(k) + inner) / (1.0 - mass)
            };
            let q_total = mass / (1.0 - mass);
            let inside: f64 = (0..=last).map(|j| g[j] * q_rest(last - j)).sum();
            let beyond = (1.0 + q_total) * (c1 * far + c2 * m.saturating_sub(last) as f64);
            let bound = inside + beyond;
            best = Some(best.map_or(bound, |b: f64| b.min(bound)));
            if bound <= tol && found.as_ref().is_none_or(|c| bound < c.tail_bound) {
                let pointwise = (0..n)
                    .map(|i| g[i] + (0..i).map(|j| big_q.get(i - j) * g[j]).sum::<f64>())
                    .collect();
                found = Some(TailCertificate {
                    delta,
                    contraction_from: m,
                    c1,
                    c2,
                    truncation: last,
                    tail_bound: bound,
                    pointwise,
                });
            }
        }
        if let Some(cert) = found {
            return Ok(cert);
        }
        if n >= MAX_TERMS {
            return Err(Error::NoCertificate(format!(
                "tail bound {} still above {tol:e} at {n} terms",
                best.map_or("unavailable".to_string(), |b| format!("{b:e}"))
            )));
        }
        n *= 2;
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol >= MIN_TOL && tol.is_finite()) {
        return Err(Error::Domain(format!("tolerance {tol:e} must be ≥ {MIN_TOL:e}")));
    }
    Ok(())
}

fn check_strip(model: &HawkesModel, z: Complex64) -> Result<()> {
    let bound = model.theta_bound();
    if !bound.admits(z.re, 1e-9) {
        return Err(Error::Domain(format!(
            "Re z = {} must be ≤ θ_c − 1e-9 (θ_c = {})",
            z.re,
            bound.value()
        )));
    }
    if z.im.abs() > PI {
        return Err(Error::Domain(format!("|Im z| = {} exceeds π", z.im.abs())));
    }
    Ok(())
}

fn trivial_limit(z: Complex64, x: Complex64) -> ModPhiLimit {
    ModPhiLimit {
        z: as_pair(z),
        x_value: as_pair(x),
        f_values: vec![as_pair(z)],
        phi_value: (0.0, 0.0),
        psi_value: (1.0, 0.0),
        tail_bound: Some(0.0),
        truncation: 0,
        certified: true,
        certificate: None,
    }
}

fn assemble_limit(
    model: &HawkesModel,
    z: Complex64,
    x: Complex64,
    truncation: usize,
    certificate: Option<TailCertificate>,
) -> Result<ModPhiLimit> {
    let (f, _) = recursion(model, z, truncation + 1)?;
    let d = phi_terms(model, x, x - 1.0, truncation + 1)?;
    let phi: Complex64 = d.iter().rev().sum();
    let psi = (phi * model.nu()).exp();
    Ok(ModPhiLimit {
        z: as_pair(z),
        x_value: as_pair(x),
        f_values: f.into_iter().map(as_pair).collect(),
        phi_value: as_pair(phi),
        psi_value: as_pair(psi),
        tail_bound: certificate.as_ref().map(|c| c.tail_bound),
        truncation,
        certified: certificate.is_some(),
        certificate,
    })
}

/// Certified tail data for the φ-series at a single point.
pub fn phi_tail_certificate(model: &HawkesModel, z: Complex64, tol: f64) -> Result<TailCertificate> {
    check_tol(tol)?;
    check_strip(model, z)?;
    let x = cgf::solve_x_complex(model, z)?.x_value;
    certify(model.kernel(), x.norm(), (x - 1.0).norm(), tol, |n| {
        Ok(phi_terms(model, x, x - 1.0, n)?.iter().map(|d| d.norm()).collect())
    })
}

/// `φ(z)` and `ψ(z)` with a certified tail bound `≤ tol`.
pub fn phi_psi(model: &HawkesModel, z: Complex64, tol: f64) -> Result<ModPhiLimit> {
    check_tol(tol)?;
    check_strip(model, z)?;
    let x = cgf::solve_x_complex(model, z)?.x_value;
    if model.kernel().is_empty() {
        return Ok(trivial_limit(z, x));
    }
    let cert = phi_tail_certificate(model, z, tol)?;
    assemble_limit(model, z, x, cert.truncation, Some(cert))
}

/// [`phi_psi`] at a real point.
pub fn phi_psi_real(model: &HawkesModel, theta: f64, tol: f64) -> Result<ModPhiLimit> {
    phi_psi(model, Complex64::new(theta, 0.0), tol)
}

/// φ-series truncated once `|d_i| ≤ tol` on 20 consecutive indices. No
/// certificate: for points too close to `θ_c` or kernels whose tails decay
/// too slowly for [`phi_psi`].
pub fn phi_psi_uncertified(model: &HawkesModel, z: Complex64, tol: f64) -> Result<ModPhiLimit> {
    check_tol(tol)?;
    check_strip(model, z)?;
    let x = cgf::solve_x_complex(model, z)?.x_value;
    if model.kernel().is_empty() {
        return Ok(trivial_limit(z, x));
    }
    let mut n = INITIAL_TERMS;
    loop {
        let d = phi_terms(model, x, x - 1.0, n)?;
        let small = d.iter().rev().take_while(|di| di.norm() <= tol).count();
        if small >= CONTRACTION_RUN || n >= MAX_TERMS {
            let mut limit = assemble_limit(model, z, x, n - 1, None)?;
            limit.certified = false;
            return Ok(limit);
        }
        n *= 2;
    }
}

/// `|e^{−tη(z)} E[e^{zN_t}] − ψ(z)|`.
///
/// Evaluated as `|ψ_t|·|e^{ν R_t} − 1|` with `ψ_t = e^{−tη}E[e^{zN_t}]` and
/// `R_t = Σ_{i≥t} d_i`, which avoids cancelling two nearly equal numbers.
/// `R_t` is summed over `t ≤ i ≤ t + max(T, 8t)` where `T` is the certified
/// truncation index at tolerance `1e-14`.
pub fn modphi_residual(model: &HawkesModel, z: Complex64, t: usize) -> Result<f64> {
    check_strip(model, z)?;
    if model.kernel().is_empty() {
        return Ok(0.0);
    }
    let cert = phi_tail_certificate(model, z, MIN_TOL)?;
    modphi_residual_window(model, z, t, cert.truncation.max(8 * t))
}

/// [`modphi_residual`] with an explicit summation window for `R_t`; usable
/// for kernels whose φ-tail cannot be certified.
pub fn modphi_residual_window(model: &HawkesModel, z: Complex64, t: usize, window: usize) -> Result<f64> {
    check_strip(model, z)?;
    if t == 0 {
        return Err(Error::Domain("horizon t must be ≥ 1".into()));
    }
    let x = cgf::solve_x_complex(model, z)?.x_value;
    let d = phi_terms(model, x, x - 1.0, t + window)?;
    let head: Complex64 = d[..t].iter().sum();
    let rest: Complex64 = d[t..].iter().rev().sum();
    let psi_t = (head * model.nu()).exp();
    Ok(psi_t.norm() * MgfScalar::exp_m1(rest * model.nu()).norm())
}

/// `ψ(θ)` and its derivatives at a real point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiDerivatives {
    pub theta: f64,
    pub psi: f64,
    /// `ψ′..ψ^{(K)}`.
    pub derivs: Vec<f64>,
    /// `φ, φ′, ..., φ^{(K)}`.
    pub phi_derivs: Vec<f64>,
    pub truncation: usize,
    /// Radius of the circle the tail certificate was taken on.
    pub contour_radius: f64,
    /// Bound on the discarded tail of `φ^{(j)}`, `j = 0..=K`.
    pub tail_bounds: Vec<f64>,
}

impl PsiDerivatives {
    /// `ψ^{(k)}`, `k = 0` giving `ψ`.
    pub fn psi(&self, k: usize) -> f64 {
        if k == 0 {
            self.psi
        } else {
            self.derivs[k - 1]
        }
    }
}

/// `ψ^{(k)} = Σ_{S_k} w(m) ν^{|m|} ψ ∏ (φ^{(j)})^{m_j}`.
pub fn assemble_psi_derivatives(nu: f64, phi_derivs: &[f64], order: usize) -> Result<(f64, Vec<f64>)> {
    let psi = (nu * phi_derivs[0]).exp();
    let derivs = (1..=order)
        .map(|k| -> Result<f64> {
            Ok(enumerate_sk(k)?
                .iter()
                .map(|t| {
                    t.faa_weight() as f64
                        * nu.powi(t.parts() as i32)
                        * psi
                        * t.monomial(&phi_derivs[1..])
                })
                .sum())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((psi, derivs))
}

fn check_psi_request(model: &HawkesModel, theta: f64, order: usize) -> Result<()> {
    if order == 0 || order > MAX_PSI_ORDER {
        return Err(Error::Domain(format!("ψ-derivative order {order} outside 1..={MAX_PSI_ORDER}")));
    }
    let bound = model.theta_bound();
    if !bound.admits(theta, 1e-6) {
        return Err(Error::Domain(format!(
            "θ = {theta} must be ≤ θ_c − 1e-6 (θ_c = {})",
            bound.value()
        )));
    }
    Ok(())
}

/// Certified truncation for the φ-derivative series at `θ`.
///
/// Each tail `R_T(z) = Σ_{i>T} d_i(z)` is analytic, so by Cauchy's estimate
/// `|R_T^{(j)}(θ)| ≤ j!·ρ^{−j}·sup_{|z−θ|=ρ} |R_T(z)|`; the supremum is
/// bounded by certifying the φ-tail uniformly over sample points on that
/// circle.
fn derivative_certificate(
    model: &HawkesModel,
    theta: f64,
    order: usize,
    tol: f64,
) -> Result<(TailCertificate, f64)> {
    let radius = match model.theta_bound() {
        ThetaBound::Finite(tc) => (0.5 * (tc - theta)).min(0.5),
        ThetaBound::Unbounded => 0.5,
    };
    let points: Vec<Complex64> = (0..CONTOUR_POINTS)
        .map(|k| {
            let angle = 2.0 * PI * k as f64 / CONTOUR_POINTS as f64;
            Complex64::new(theta, 0.0) + Complex64::from_polar(radius, angle)
        })
        .collect();
    let xs = points
        .iter()
        .map(|z| cgf::solve_x_complex(model, *z).map(|c| c.x_value))
        .collect::<Result<Vec<_>>>()?;
    let x_sup = xs.iter().fold(0.0f64, |m, x| m.max(x.norm()));
    let xm1_sup = xs.iter().fold(0.0f64, |m, x| m.max((x - 1.0).norm()));
    let fact: f64 = (1..=order).map(|i| i as f64).product();
    let value_tol = tol * radius.powi(order as i32) / fact;
    let cert = certify(model.kernel(), x_sup, xm1_sup, value_tol.max(f64::MIN_POSITIVE), |n| {
        let mut sup = vec![0.0f64; n];
        for x in &xs {
            let d = phi_terms(model, *x, *x - 1.0, n)?;
            for (s, di) in sup.iter_mut().zip(&d) {
                *s = s.max(di.norm());
            }
        }
        Ok(sup)
    })?;
    Ok((cert, radius))
}

fn tail_bounds(cert: &TailCertificate, radius: f64, order: usize) -> Vec<f64> {
    let mut fact = 1.0;
    (0..=order)
        .map(|j| {
            if j > 0 {
                fact *= j as f64;
            }
            fact * cert.tail_bound / radius.powi(j as i32)
        })
        .collect()
}

/// `ψ^{(1)}(θ)..ψ^{(K)}(θ)` by propagating truncated Taylor jets through the
/// f-recursion, summing `Σ_i ((e^{f_i})^{(j)} − x^{(j)})` up to a certified
/// truncation, and assembling over `S_k`.
pub fn psi_derivatives(model: &HawkesModel, theta: f64, order: usize, tol: f64) -> Result<PsiDerivatives> {
    check_tol(tol)?;
    check_psi_request(model, theta, order)?;
    if model.kernel().is_empty() {
        return Ok(PsiDerivatives {
            theta,
            psi: 1.0,
            derivs: vec![0.0; order],
            phi_derivs: vec![0.0; order + 1],
            truncation: 0,
            contour_radius: 0.0,
            tail_bounds: vec![0.0; order + 1],
        });
    }
    let (cert, radius) = derivative_certificate(model, theta, order, tol)?;
    let truncation = cert.truncation;
    let x = cgf::x_derivatives(model, theta, order)?;
    let mut x_all = vec![x.x_value];
    x_all.extend_from_slice(&x.x_derivs);
    let x_jet = Jet::from_derivatives(&x_all);
    let xm1 = x_jet - Jet::constant(1.0, order);

    let d = phi_terms(model, x_jet, xm1, truncation + 1)?;
    let phi = d.iter().rev().fold(Jet::constant(0.0, order), |acc, di| acc + *di);
    let phi_derivs = phi.derivatives();
    let (psi, derivs) = assemble_psi_derivatives(model.nu(), &phi_derivs, order)?;
    Ok(PsiDerivatives {
        theta,
        psi,
        derivs,
        phi_derivs,
        truncation,
        contour_radius: radius,
        tail_bounds: tail_bounds(&cert, radius, order),
    })
}

/// Cross-check path for [`psi_derivatives`]: differentiates the f-recursion
/// term by term, `f_s^{(r)} = 1{r=1} + Σ_i α_i (e^{f_{s−i}})^{(r)}`, with
/// `(e^f)^{(r)} = Σ_{S_r} w(q) e^f ∏ (f^{(l)})^{q_l}` written out explicitly,
/// and sums the series up to the given truncation index.
pub fn psi_derivatives_explicit(
    model: &HawkesModel,
    theta: f64,
    order: usize,
    truncation: usize,
) -> Result<PsiDerivatives> {
    check_psi_request(model, theta, order)?;
    let kernel = model.kernel();
    let count = truncation + 1;
    let sets = (0..=order).map(enumerate_sk).collect::<Result<Vec<_>>>()?;
    let weights = kernel.weights(kernel.finite_len().unwrap_or(count).min(count));
    // f_derivs[s][r], exp_derivs[s][r] for r = 0..=order (exp_derivs[s][0] = e^{f_s} − 1).
    let mut f_derivs: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut exp_derivs: Vec<Vec<f64>> = Vec::with_capacity(count);
    for s in 0..count {
        let mut fs = vec![0.0; order + 1];
        fs[0] = theta;
        if order >= 1 {
            fs[1] = 1.0;
        }
        for (i, w) in weights.iter().enumerate().take(s) {
            for r in 0..=order {
                fs[r] += w * exp_derivs[s - 1 - i][r];
            }
        }
        let e = fs[0].exp();
        let mut es = vec![fs[0].exp_m1(); order + 1];
        for r in 1..=order {
            es[r] = sets[r]
                .iter()
                .map(|q| q.faa_weight() as f64 * e * q.monomial(&fs[1..]))
                .sum();
        }
        if !(e.is_finite() && e < OVERFLOW_LIMIT) {
            return Err(Error::Overflow { index: s });
        }
        f_derivs.push(fs);
        exp_derivs.push(es);
    }
    let x = cgf::x_derivatives(model, theta, order)?;
    let mut phi_derivs = vec![0.0; order + 1];
    for es in exp_derivs.iter().rev() {
        phi_derivs[0] += es[0] - (x.x_value - 1.0);
        for j in 1..=order {
            phi_derivs[j] += es[j] - x.x_derivs[j - 1];
        }
    }
    let (psi, derivs) = assemble_psi_derivatives(model.nu(), &phi_derivs, order)?;
    Ok(PsiDerivatives {
        theta,
        psi,
        derivs,
        phi_derivs,
        truncation,
        contour_radius: 0.0,
        tail_bounds: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo() -> HawkesModel {
        HawkesModel::new(1.0, ExcitingKernel::geometric(0.25, 0.5).unwrap()).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn f_sequence_examples() {
        let m = geo();
        assert!(f_sequence(&m, 0.0, 50).unwrap().iter().all(|f| *f == 0.0));
        let p = HawkesModel::poisson(2.0).unwrap();
        assert!(f_sequence(&p, 0.3, 20).unwrap().iter().all(|f| *f == 0.3));
        let one = HawkesModel::new(1.0, ExcitingKernel::finite(vec![0.5]).unwrap()).unwrap();
        let f = f_sequence(&one, 0.1, 1).unwrap();
        assert_eq!(f[0], 0.1);
        assert!((f[1] - (0.1 + 0.5 * 0.1f64.exp_m1())).abs() < 1e-16);
        assert!((f[1] - 0.152_585_4).abs() < 1e-7);
    }

    #[test]
    fn geometric_fast_path_matches_general_recursion() {
        let m = geo();
        let custom = HawkesModel::new(
            1.0,
            ExcitingKernel::custom(
                |i| 0.25 * 0.5f64.powi(i as i32),
                crate::kernel::Majorant::Geometric { scale: 0.25, ratio: 0.5 },
            )
            .unwrap(),
        )
        .unwrap();
        let a = f_sequence(&m, c(0.2, 1.3), 200).unwrap();
        let b = f_sequence(&custom, c(0.2, 1.3), 200).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).norm() < 1e-14);
        }
    }

    #[test]
    fn log_mgf_examples() {
        let m = geo();
        let z: f64 = -0.7;
        assert!((log_mgf(&m, z, 1).unwrap() - z.exp_m1()).abs() < 1e-16);
        assert_eq!(log_mgf(&m, 0.0, 37).unwrap(), 0.0);
        let one = HawkesModel::new(1.0, ExcitingKernel::finite(vec![0.5]).unwrap()).unwrap();
        let f1: f64 = 0.1 + 0.5 * 0.1f64.exp_m1();
        let want = -2.0 + 0.1f64.exp() + f1.exp();
        assert!((log_mgf(&one, 0.1, 2).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.270_013).abs() < 1e-6);
        assert!(log_mgf(&m, 0.1, 0).is_err());
    }

    #[test]
    fn overflow_outside_the_convergent_regime() {
        let m = HawkesModel::new(1.0, ExcitingKernel::finite(vec![0.9]).unwrap()).unwrap();
        assert!(matches!(f_sequence(&m, 3.0, 5000), Err(Error::Overflow { .. })));
    }

    #[test]
    fn trivial_limits() {
        let p = HawkesModel::poisson(1.0).unwrap();
        let l = phi_psi(&p, c(1.7, 0.4), 1e-12).unwrap();
        assert_eq!(l.phi(), c(0.0, 0.0));
        assert_eq!(l.psi(), c(1.0, 0.0));
        let l = phi_psi_real(&geo(), 0.0, 1e-12).unwrap();
        assert_eq!(l.phi_value, (0.0, 0.0));
        assert_eq!(l.psi_value, (1.0, 0.0));
    }

    #[test]
    fn psi_matches_large_t_normalised_mgf() {
        let m = geo();
        let l = phi_psi_real(&m, 0.1, 1e-12).unwrap();
        assert!(l.certified && l.tail_bound.unwrap() <= 1e-12);
        let eta = cgf::solve_x(&m, 0.1).unwrap().eta_value;
        let t = 2000;
        let normalised = (log_mgf(&m, 0.1, t).unwrap() - t as f64 * eta).exp();
        assert!((normalised - l.psi_value.0).abs() < 1e-6);
    }

    #[test]
    fn tighter_tolerance_moves_phi_by_less_than_tol() {
        let m = geo();
        for tol in [1e-6, 1e-9, 1e-12] {
            let a = phi_psi(&m, c(0.3, 0.8), tol).unwrap();
            let b = phi_psi(&m, c(0.3, 0.8), tol / 10.0).unwrap();
            assert!(b.tail_bound.unwrap() <= a.tail_bound.unwrap());
            assert!((a.phi() - b.phi()).norm() <= tol);
        }
    }

    #[test]
    fn pointwise_majorant_dominates_terms() {
        let m = geo();
        for th in [-1.0, 0.1, 0.5] {
            let cert = phi_tail_certificate(&m, c(th, 0.0), 1e-13).unwrap();
            let x = cgf::solve_x(&m, th).unwrap().x_value;
            let d = exp_f_minus_one(&m, th, cert.truncation + 1).unwrap();
            for (i, di) in d.iter().enumerate() {
                assert!((di + 1.0 - x).abs() <= cert.pointwise[i] * (1.0 + 1e-12) + 1e-15, "θ={th} i={i}");
            }
        }
    }

    #[test]
    fn no_certificate_near_the_edge() {
        let m = HawkesModel::new(1.0, ExcitingKernel::geometric(0.5, 0.5).unwrap()).unwrap();
        let tc = cgf::critical_theta(0.5).unwrap();
        let z = c(tc - 1e-8, 0.0);
        assert!(matches!(phi_psi(&m, z, 1e-10), Err(Error::NoCertificate(_))));
        let l = phi_psi_uncertified(&m, c(tc - 1e-3, 0.0), 1e-10).unwrap();
        assert!(!l.certified);
    }

    #[test]
    fn residual_examples() {
        let m = geo();
        assert_eq!(modphi_residual(&m, c(0.0, 0.0), 10).unwrap(), 0.0);
        let p = HawkesModel::poisson(1.0).unwrap();
        assert_eq!(modphi_residual(&p, c(0.4, 0.2), 10).unwrap(), 0.0);
        let r50 = modphi_residual(&m, c(0.1, 0.0), 10).unwrap();
        let r100 = modphi_residual(&m, c(0.1, 0.0), 20).unwrap();
        assert!(r100 < r50);
    }

    #[test]
    fn psi_derivative_examples() {
        let p = HawkesModel::poisson(1.0).unwrap();
        let d = psi_derivatives(&p, 0.3, 4, 1e-12).unwrap();
        assert!(d.derivs.iter().all(|v| *v == 0.0));

        let m = geo();
        let h = 1e-5;
        let d = psi_derivatives(&m, 0.05, 1, 1e-13).unwrap();
        let up = phi_psi_real(&m, 0.05 + h, 1e-14).unwrap().psi_value.0;
        let down = phi_psi_real(&m, 0.05 - h, 1e-14).unwrap().psi_value.0;
        let fd = (up - down) / (2.0 * h);
        assert!((d.derivs[0] - fd).abs() <= 1e-6 * fd.abs());

        let jets = psi_derivatives(&m, 0.0, 2, 1e-12).unwrap();
        let explicit = psi_derivatives_explicit(&m, 0.0, 2, jets.truncation).unwrap();
        for k in 0..2 {
            let (a, b) = (jets.derivs[k], explicit.derivs[k]);
            assert!((a - b).abs() <= 1e-10 * b.abs(), "k={k}: {a} vs {b}");
        }
    }
}
