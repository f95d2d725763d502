//! Exciting kernels `α = (α_i)_{i≥1}` and the Hawkes model built on them.
//!
//! Three kernel forms are supported: an explicit finite list of weights, the
//! geometric family `α_i = a·r^i`, and a caller-supplied generator bounded by
//! a summable [`Majorant`]. `α_0` is always zero.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cgf::{critical_theta, ThetaBound};
use crate::error::{Error, Result};

/// Upper envelope `α_i ≤ m_i` for custom kernels. Its tails are known in closed
/// form, which is what makes every kernel sum certifiably convergent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Majorant {
    /// `m_i = scale · ratio^i`, `0 < ratio < 1`.
    Geometric { scale: f64, ratio: f64 },
    /// `m_i = scale · i^{-exponent}`, `exponent > 1`.
    PowerLaw { scale: f64, exponent: f64 },
}

impl Majorant {
    fn validate(&self) -> Result<()> {
        match *self {
            Majorant::Geometric { scale, ratio } => {
                if !(scale >= 0.0 && scale.is_finite() && ratio > 0.0 && ratio < 1.0) {
                    return Err(Error::NonSummableKernel(format!(
                        "geometric majorant needs scale ≥ 0 and ratio in (0,1), got {scale}, {ratio}"
                    )));
                }
            }
            Majorant::PowerLaw { scale, exponent } => {
                if !(scale >= 0.0 && scale.is_finite() && exponent > 1.0 && exponent.is_finite()) {
                    return Err(Error::NonSummableKernel(format!(
                        "power-law majorant needs scale ≥ 0 and exponent > 1, got {scale}, {exponent}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn term(&self, i: usize) -> f64 {
        match *self {
            Majorant::Geometric { scale, ratio } => scale * ratio.powi(i as i32),
            Majorant::PowerLaw { scale, exponent } => scale * (i as f64).powf(-exponent),
        }
    }

    /// Whether `Σ i^p m_i` is finite.
    fn moment_finite(&self, p: u32) -> bool {
        match *self {
            Majorant::Geometric { .. } => true,
            Majorant::PowerLaw { exponent, .. } => exponent - p as f64 > 1.0,
        }
    }

    /// Bound on `Σ_{j>i} j^p m_j` for `i ≥ 1`; `None` while the bound is not yet
    /// available (geometric terms not yet decreasing) or the moment diverges.
    fn moment_tail(&self, p: u32, i: usize) -> Option<f64> {
        let fi = i as f64;
        match *self {
            Majorant::Geometric { scale, ratio } => {
                let rho = ((fi + 2.0) / (fi + 1.0)).powi(p as i32) * ratio;
                if rho >= 1.0 {
                    return None;
                }
                Some(scale * (fi + 1.0).powi(p as i32) * ratio.powi(i as i32 + 1) / (1.0 - rho))
            }
            Majorant::PowerLaw { scale, exponent } => {
                let s = exponent - p as f64;
                if s <= 1.0 {
                    return None;
                }
                // Σ_{j>i} j^{-s} ≤ ∫_i^∞ u^{-s} du
                Some(scale * fi.powf(1.0 - s) / (s - 1.0))
            }
        }
    }
}

/// Weight generator for custom kernels.
pub type WeightFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

/// A kernel given by a weight generator and a summable majorant.
#[derive(Clone)]
pub struct CustomKernel {
    weight: WeightFn,
    majorant: Majorant,
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("majorant", &self.majorant)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum KernelForm {
    Finite(Vec<f64>),
    Geometric { a: f64, r: f64 },
    Custom(CustomKernel),
}

/// Partial sums stop once the majorant tail drops below this fraction of the
/// running sum.
const SUM_REL_TOL: f64 = 1e-16;
/// Accepted relative remainder for `‖α‖₁` when the term budget runs out.
const L1_REL_TOL: f64 = 1e-14;
/// Same, for higher power moments (only their finiteness gates expansions).
const MOMENT_REL_TOL: f64 = 1e-6;
const MAX_TERMS: usize = 50_000_000;
/// Number of leading terms checked against the majorant at construction.
const MAJORANT_CHECK: usize = 1_000;

/// Sums `term(1) + term(2) + ⋯` until the certified remainder is negligible.
/// If the term budget runs out first, the partial sum plus half the remaining
/// bound is returned when that bound is within `accept` of the sum.
fn sum_with_majorant(
    term: impl Fn(usize) -> f64,
    tail_bound: impl Fn(usize) -> Option<f64>,
    accept: f64,
) -> Result<f64> {
    let mut partial = 0.0;
    let mut comp = 0.0;
    for j in 1..=MAX_TERMS {
        // Kahan summation: long power-law sums lose digits otherwise.
        let y = term(j) - comp;
        let t = partial + y;
        comp = (t - partial) - y;
        partial = t;
        if j % 16 == 0 || j < 64 {
            if let Some(b) = tail_bound(j) {
                if b <= SUM_REL_TOL * partial || b == 0.0 {
                    return Ok(partial);
                }
            }
        }
    }
    match tail_bound(MAX_TERMS) {
        Some(b) if b <= accept * partial.max(f64::MIN_POSITIVE) => Ok(partial + 0.5 * b),
        _ => Err(Error::NonSummableKernel(format!(
            "remainder not below {accept:e} after {MAX_TERMS} terms"
        ))),
    }
}

/// The exciting sequence `α`. Immutable; `‖α‖₁` is computed once.
#[derive(Debug, Clone)]
pub struct ExcitingKernel {
    form: KernelForm,
    l1: f64,
}

impl ExcitingKernel {
    /// Finite kernel `α_1..α_L = weights`.
    pub fn finite(weights: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::InvalidKernel(format!(
                "weight α_{} = {w} must be finite and nonnegative",
                i + 1
            )));
        }
        let l1 = weights.iter().sum();
        Ok(Self {
            form: KernelForm::Finite(weights),
            l1,
        })
    }

    /// The empty kernel: `N_t` is then a Poisson process.
    pub fn poisson() -> Self {
        Self {
            form: KernelForm::Finite(Vec::new()),
            l1: 0.0,
        }
    }

    /// `α_i = a·r^i` for `i ≥ 1`.
    pub fn geometric(a: f64, r: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::InvalidKernel(format!("amplitude a = {a} must be ≥ 0")));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidKernel(format!("ratio r = {r} must lie in (0,1)")));
        }
        Ok(Self {
            form: KernelForm::Geometric { a, r },
            l1: a * r / (1.0 - r),
        })
    }

    /// Kernel generated by `weight(i)` for `i ≥ 1`, dominated by `majorant`.
    pub fn custom(
        weight: impl Fn(usize) -> f64 + Send + Sync + 'static,
        majorant: Majorant,
    ) -> Result<Self> {
        majorant.validate()?;
        for i in 1..=MAJORANT_CHECK {
            let w = weight(i);
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidKernel(format!(
                    "weight α_{i} = {w} must be finite and nonnegative"
                )));
            }
            let m = majorant.term(i);
            if w > m * (1.0 + 1e-12) {
                return Err(Error::InvalidKernel(format!(
                    "weight α_{i} = {w} exceeds its majorant {m}"
                )));
            }
        }
        let custom = CustomKernel {
            weight: Arc::new(weight),
            majorant,
        };
        let l1 = sum_with_majorant(
            |j| (custom.weight)(j),
            |j| majorant.moment_tail(0, j),
            L1_REL_TOL,
        )?;
        Ok(Self {
            form: KernelForm::Custom(custom),
            l1,
        })
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    /// `(a, r)` for geometric kernels.
    pub fn geometric_params(&self) -> Option<(f64, f64)> {
        match self.form {
            KernelForm::Geometric { a, r } => Some((a, r)),
            _ => None,
        }
    }

    /// Number of nonzero-capable weights for finite kernels.
    pub fn finite_len(&self) -> Option<usize> {
        match &self.form {
            KernelForm::Finite(w) => Some(w.len()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.l1 == 0.0
    }

    /// `α_i`, with `α_0 = 0`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        match &self.form {
            KernelForm::Finite(w) => w.get(i - 1).copied().unwrap_or(0.0),
            KernelForm::Geometric { a, r } => a * r.powi(i as i32),
            KernelForm::Custom(c) => (c.weight)(i),
        }
    }

    /// `α_1..α_n` as a dense vector.
    pub fn weights(&self, n: usize) -> Vec<f64> {
        match &self.form {
            KernelForm::Geometric { a, r } => {
                let mut out = Vec::with_capacity(n);
                let mut w = *a;
                for _ in 0..n {
                    w *= r;
                    out.push(w);
                }
                out
            }
            _ => (1..=n).map(|i| self.weight(i)).collect(),
        }
    }

    /// `‖α‖₁ = Σ_{i≥1} α_i`.
    pub fn l1_norm(&self) -> f64 {
        self.l1
    }

    /// `Σ_{j>i} α_j`.
    pub fn tail_mass(&self, i: usize) -> f64 {
        if i == 0 {
            return self.l1;
        }
        match &self.form {
            KernelForm::Finite(w) => {
                if i >= w.len() {
                    0.0
                } else {
                    w[i..].iter().sum()
                }
            }
            KernelForm::Geometric { a, r } => a * r.powi(i as i32 + 1) / (1.0 - r),
            KernelForm::Custom(c) => {
                let head: f64 = (1..=i).map(|j| (c.weight)(j)).sum();
                (self.l1 - head).max(0.0)
            }
        }
    }

    /// `Σ_{k≥i} tail_mass(k) = Σ_{j>i} (j − i)·α_j`; needs a finite first moment.
    pub fn cumulative_tail(&self, i: usize) -> Result<f64> {
        match &self.form {
            KernelForm::Finite(w) => Ok(w
                .iter()
                .enumerate()
                .skip(i)
                .map(|(k, v)| (k + 1 - i) as f64 * v)
                .sum()),
            KernelForm::Geometric { a, r } => Ok(a * r.powi(i as i32 + 1) / ((1.0 - r) * (1.0 - r))),
            KernelForm::Custom(c) => {
                let m1 = self.power_moment(1)?;
                let head: f64 = (1..=i).map(|j| j as f64 * (c.weight)(j)).sum();
                let tail_m1 = (m1 - head).max(0.0);
                Ok((tail_m1 - i as f64 * self.tail_mass(i)).max(0.0))
            }
        }
    }

    /// Whether `Σ_{i≥1} i^p α_i < ∞`, decided from the kernel form (custom
    /// kernels: from the majorant).
    pub fn has_finite_moment(&self, p: u32) -> bool {
        match &self.form {
            KernelForm::Custom(c) => c.majorant.moment_finite(p),
            _ => true,
        }
    }

    /// `Σ_{i≥1} i^p α_i`.
    ///
    /// Custom kernels whose moment converges too slowly to be summed to
    /// `1e-6` within the term budget report `NonSummableKernel`.
    pub fn power_moment(&self, p: u32) -> Result<f64> {
        match &self.form {
            KernelForm::Finite(w) => Ok(w
                .iter()
                .enumerate()
                .map(|(k, v)| ((k + 1) as f64).powi(p as i32) * v)
                .sum()),
            KernelForm::Geometric { a, r } => {
                if p == 0 {
                    return Ok(self.l1);
                }
                Ok(a * polylog_neg(p, *r))
            }
            KernelForm::Custom(c) => {
                if p == 0 {
                    return Ok(self.l1);
                }
                if !c.majorant.moment_finite(p) {
                    return Err(Error::DivergentMoment { order: p });
                }
                let majorant = c.majorant;
                sum_with_majorant(
                    |j| (j as f64).powi(p as i32) * (c.weight)(j),
                    |j| majorant.moment_tail(p, j),
                    MOMENT_REL_TOL,
                )
            }
        }
    }
}

/// `Σ_{i≥1} i^p r^i` for `0 < r < 1`, via the Eulerian-number closed form
/// `r·A_p(r)/(1−r)^{p+1}`.
fn polylog_neg(p: u32, r: f64) -> f64 {
    // Eulerian numbers A(p, k), k = 0..p-1.
    let p = p as usize;
    let mut row = vec![1.0f64];
    for n in 2..=p {
        let mut next = vec![0.0; n];
        for k in 0..n {
            let left = if k < row.len() { (k + 1) as f64 * row[k] } else { 0.0 };
            let right = if k >= 1 && k - 1 < row.len() {
                (n - k) as f64 * row[k - 1]
            } else {
                0.0
            };
            next[k] = left + right;
        }
        row = next;
    }
    let poly: f64 = row.iter().rev().fold(0.0, |acc, c| acc * r + c);
    r * poly / (1.0 - r).powi(p as i32 + 1)
}

/// Baseline rate `ν` plus an exciting kernel, restricted to the subcritical
/// regime `‖α‖₁ < 1`.
#[derive(Debug, Clone)]
pub struct HawkesModel {
    nu: f64,
    kernel: ExcitingKernel,
}

impl HawkesModel {
    pub fn new(nu: f64, kernel: ExcitingKernel) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::InvalidModel(format!("ν = {nu} must be finite and > 0")));
        }
        if kernel.l1_norm() >= 1.0 {
            return Err(Error::InvalidModel(format!(
                "‖α‖₁ = {} is not subcritical (must be < 1)",
                kernel.l1_norm()
            )));
        }
        Ok(Self { nu, kernel })
    }

    pub fn poisson(nu: f64) -> Result<Self> {
        Self::new(nu, ExcitingKernel::poisson())
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn kernel(&self) -> &ExcitingKernel {
        &self.kernel
    }

    /// `‖α‖₁`.
    pub fn branching_ratio(&self) -> f64 {
        self.kernel.l1_norm()
    }

    /// `η′(0) = ν/(1−‖α‖₁)`, the law-of-large-numbers rate.
    pub fn mean_rate(&self) -> f64 {
        self.nu / (1.0 - self.branching_ratio())
    }

    /// `η″(0) = ν/(1−‖α‖₁)³`, the asymptotic variance per step.
    pub fn variance_rate(&self) -> f64 {
        self.nu / (1.0 - self.branching_ratio()).powi(3)
    }

    /// Right edge `θ_c` of the real domain of `η`.
    pub fn theta_bound(&self) -> ThetaBound {
        let l1 = self.branching_ratio();
        if l1 == 0.0 {
            ThetaBound::Unbounded
        } else {
            ThetaBound::Finite(critical_theta(l1).expect("0 < ‖α‖₁ < 1 checked at construction"))
        }
    }

    pub fn from_descriptor(desc: &ModelDescriptor) -> Result<Self> {
        Self::new(desc.nu, desc.kernel.build()?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let desc: ModelDescriptor =
            serde_json::from_str(json).map_err(|e| Error::Descriptor(e.to_string()))?;
        Self::from_descriptor(&desc)
    }

    /// JSON descriptor; `None` for custom kernels, which have no wire form.
    pub fn descriptor(&self) -> Option<ModelDescriptor> {
        let kernel = match &self.kernel.form {
            KernelForm::Finite(w) => KernelDescriptor::Finite { weights: w.clone() },
            KernelForm::Geometric { a, r } => KernelDescriptor::Geometric { a: *a, r: *r },
            KernelForm::Custom(_) => return None,
        };
        Some(ModelDescriptor { nu: self.nu, kernel })
    }
}

/// Wire form of a kernel: `{"type":"finite","weights":[...]}` or
/// `{"type":"geometric","a":x,"r":y}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelDescriptor {
    Finite { weights: Vec<f64> },
    Geometric { a: f64, r: f64 },
}

impl KernelDescriptor {
    pub fn build(&self) -> Result<ExcitingKernel> {
        match self {
            KernelDescriptor::Finite { weights } => ExcitingKernel::finite(weights.clone()),
            KernelDescriptor::Geometric { a, r } => ExcitingKernel::geometric(*a, *r),
        }
    }
}

/// Wire form of a model: `{"nu":x,"kernel":{...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescriptor {
    pub nu: f64,
    pub kernel: KernelDescriptor,
}
