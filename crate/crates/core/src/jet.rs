//! Truncated Taylor series ("jets") and the scalar abstraction shared by the
//! f-recursion over reals, complex numbers and jets.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

/// Jets carry Taylor coefficients of orders `0..JET_CAPACITY`.
pub const JET_CAPACITY: usize = 9;

/// `Σ_{k≤order} c_k ε^k`, with `c_k = f^{(k)}(θ)/k!`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    c: [f64; JET_CAPACITY],
    order: usize,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order < JET_CAPACITY, "jet order {order} exceeds capacity");
        let mut c = [0.0; JET_CAPACITY];
        c[0] = value;
        Self { c, order }
    }

    /// The identity jet `θ + ε`.
    pub fn variable(value: f64, order: usize) -> Self {
        let mut j = Self::constant(value, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    /// From `[f, f′, f″, ...]`.
    pub fn from_derivatives(derivs: &[f64]) -> Self {
        let order = derivs.len() - 1;
        let mut j = Self::constant(0.0, order);
        let mut fact = 1.0;
        for (k, d) in derivs.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            j.c[k] = d / fact;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeff(&self, k: usize) -> f64 {
        if k <= self.order {
            self.c[k]
        } else {
            0.0
        }
    }

    /// `f^{(k)}(θ) = k!·c_k`.
    pub fn derivative(&self, k: usize) -> f64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        fact * self.coeff(k)
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..=self.order).map(|k| self.derivative(k)).collect()
    }

    /// `e^f` from `k·g_k = Σ_{j=1}^k j·f_j·g_{k−j}`.
    pub fn exp(self) -> Self {
        let mut g = Self::constant(self.c[0].exp(), self.order);
        for k in 1..=self.order {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.c[j] * g.c[k - j];
            }
            g.c[k] = acc / k as f64;
        }
        g
    }

    /// `e^f − 1`, accurate when `f(θ)` is near zero.
    pub fn exp_m1(self) -> Self {
        let mut g = self.exp();
        g.c[0] = self.c[0].exp_m1();
        g
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        for k in 0..=self.order {
            self.c[k] += rhs.c[k];
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        for k in 0..=self.order {
            self.c[k] -= rhs.c[k];
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = Jet::constant(0.0, self.order);
        for k in 0..=self.order {
            out.c[k] = (0..=k).map(|j| self.c[j] * rhs.c[k - j]).sum();
        }
        out
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for k in 0..=self.order {
            self.c[k] *= rhs;
        }
        self
    }
}

/// Scalars the f-recursion can run over.
pub trait MgfScalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Mul<f64, Output = Self>
{
    fn zero_like(&self) -> Self;
    fn exp_m1(self) -> Self;
    fn exp(self) -> Self;
    /// Size of the value part, for overflow checks.
    fn magnitude(&self) -> f64;
}

impl MgfScalar for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn exp_m1(self) -> Self {
        f64::exp_m1(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl MgfScalar for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn exp_m1(self) -> Self {
        let (a, b) = (self.re, self.im);
        let half = (0.5 * b).sin();
        Complex64::new(a.exp_m1() * b.cos() - 2.0 * half * half, a.exp() * b.sin())
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl MgfScalar for Jet {
    fn zero_like(&self) -> Self {
        Jet::constant(0.0, self.order)
    }
    fn exp_m1(self) -> Self {
        Jet::exp_m1(self)
    }
    fn exp(self) -> Self {
        Jet::exp(self)
    }
    fn magnitude(&self) -> f64 {
        self.c[0].abs()
    }
}
