//! Sequence utilities behind the convergence analysis of the φ-series:
//! discrete convolution powers, the renewal majorant `Q = Σ_{j≥1} q^{*j}`,
//! the generalized discrete Gronwall bound and the Abel rearrangement.
//!
//! Sequences are 1-indexed; index 0 is implicitly zero.

use crate::error::{Error, Result};

/// Dense sequence `s(1), ..., s(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence(Vec<f64>);

impl Sequence {
    /// Builds from terms `s(1)..s(n)`; non-finite terms are rejected.
    pub fn new(terms: Vec<f64>) -> Result<Self> {
        if let Some(i) = terms.iter().position(|t| !t.is_finite()) {
            return Err(Error::Domain(format!("sequence term {} is not finite", i + 1)));
        }
        Ok(Self(terms))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new((1..=n).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `s(i)`; zero outside `1..=len`.
    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.0.get(i - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn terms(&self) -> &[f64] {
        &self.0
    }

    pub fn into_terms(self) -> Vec<f64> {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// `(a * b)(i) = Σ_{j=1}^{i-1} a(j) b(i−j)` on `1..=n`.
pub fn convolve(a: &Sequence, b: &Sequence, n: usize) -> Sequence {
    let mut out = vec![0.0; n];
    for (i, slot) in out.iter_mut().enumerate() {
        let i = i + 1;
        let upper = (i - 1).min(a.len());
        let mut acc = 0.0;
        for j in 1..=upper {
            let k = i - j;
            if k <= b.len() {
                acc += a.get(j) * b.get(k);
            }
        }
        *slot = acc;
    }
    Sequence(out)
}

/// `q^{*j}` on `1..=n`, with `q^{*1} = q`.
pub fn convolution_power(q: &Sequence, j: usize, n: usize) -> Sequence {
    assert!(j >= 1, "convolution power needs j ≥ 1");
    let mut power = Sequence((1..=n).map(|i| q.get(i)).collect());
    for _ in 1..j {
        power = convolve(&power, q, n);
    }
    power
}

fn check_subcritical(q: &Sequence) -> Result<f64> {
    let mass = q.sum();
    if q.terms().iter().any(|&v| v < 0.0) {
        return Err(Error::Domain("majorant sequences must be nonnegative".into()));
    }
    if mass >= 1.0 {
        return Err(Error::NotSubcritical { mass });
    }
    Ok(mass)
}

/// `Q(i) = Σ_{j≥1} q^{*j}(i)` on `1..=n` by summing convolution powers.
///
/// The `j`-series stops once the geometric remainder `s^{J+1}/(1−s)`,
/// `s = Σ q`, falls below `1e-16` of the running value.
pub fn renewal_majorant(q: &Sequence, n: usize) -> Result<Sequence> {
    let mass = check_subcritical(q)?;
    let mut total = vec![0.0; n];
    let mut power = Sequence((1..=n).map(|i| q.get(i)).collect());
    let mut j = 1usize;
    loop {
        for (t, p) in total.iter_mut().zip(power.terms()) {
            *t += p;
        }
        let remainder = mass.powi(j as i32 + 1) / (1.0 - mass);
        let running = total.iter().fold(0.0f64, |m, v| m.max(*v));
        // q^{*j} vanishes on 1..j-1, so past j = n nothing new can land.
        if remainder <= 1e-16 * running || running == 0.0 || j >= n {
            break;
        }
        power = convolve(&power, q, n);
        j += 1;
    }
    Ok(Sequence(total))
}

/// `Q` on `1..=n` from the renewal equation `Q(i) = q(i) + Σ_{j<i} q(i−j) Q(j)`.
///
/// Same object as [`renewal_majorant`] without the `j`-series truncation;
/// `O(n²)` regardless of how close `Σ q` is to 1.
pub fn renewal_solve(q: &Sequence, n: usize) -> Result<Sequence> {
    check_subcritical(q)?;
    let mut out = vec![0.0; n];
    for i in 1..=n {
        let mut acc = q.get(i);
        for j in 1..i {
            let w = q.get(i - j);
            if w != 0.0 {
                acc += w * out[j - 1];
            }
        }
        out[i - 1] = acc;
    }
    Ok(Sequence(out))
}

/// `b(i) = Σ_{j<i} Q(i−j) g(j) + g(i)` on `1..=n`; dominates every `p ≥ 0`
/// with `p(1) ≤ g(1)` and `p(i) ≤ Σ_{j<i} q(i−j) p(j) + g(i)`.
pub fn gronwall_majorant(q: &Sequence, g: &Sequence, n: usize) -> Result<Sequence> {
    if g.terms().iter().any(|&v| v < 0.0) {
        return Err(Error::Domain("g must be nonnegative".into()));
    }
    let big_q = renewal_solve(q, n)?;
    let out = (1..=n)
        .map(|i| {
            let feedback: f64 = (1..i).map(|j| big_q.get(i - j) * g.get(j)).sum();
            feedback + g.get(i)
        })
        .collect();
    Ok(Sequence(out))
}

/// `|Σ_{k=1}^p a_k b_k − (a_1 B_0 + Σ_{k=1}^{p−1}(a_{k+1}−a_k) B_k − a_p B_p)|`
/// with `B_k = Σ_{i>k} b_i` taken over the supplied terms of `b`.
pub fn abel_identity_residual(a: &Sequence, b: &Sequence, p: usize) -> Result<f64> {
    if p < 2 {
        return Err(Error::Domain(format!("Abel rearrangement needs p ≥ 2, got {p}")));
    }
    if a.len() < p {
        return Err(Error::Domain(format!("need a_1..a_{p}, got {} terms", a.len())));
    }
    let nb = b.len().max(p);
    // B_k for k = 0..=p, accumulated from the far end.
    let mut tails = vec![0.0; nb + 1];
    for k in (0..nb).rev() {
        tails[k] = tails[k + 1] + b.get(k + 1);
    }
    let lhs: f64 = (1..=p).map(|k| a.get(k) * b.get(k)).sum();
    let middle: f64 = (1..p).map(|k| (a.get(k + 1) - a.get(k)) * tails[k]).sum();
    let rhs = a.get(1) * tails[0] + middle - a.get(p) * tails[p];
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[f64]) -> Sequence {
        Sequence::new(v.to_vec()).unwrap()
    }

    #[test]
    fn convolution_power_examples() {
        let delta = seq(&[1.0]);
        assert_eq!(convolution_power(&delta, 2, 3).terms(), &[0.0, 1.0, 0.0]);
        let c = 0.7;
        let p3 = convolution_power(&seq(&[c]), 3, 4);
        assert_eq!(p3.terms()[..2], [0.0, 0.0]);
        assert!((p3.get(3) - c * c * c).abs() < 1e-15);
        assert_eq!(p3.get(4), 0.0);
        let sq = convolution_power(&seq(&[0.5, 0.25]), 2, 4);
        assert_eq!(sq.terms(), &[0.0, 0.25, 0.25, 0.0625]);
    }

    #[test]
    fn convolution_power_preserves_mass_on_finite_support() {
        let q = seq(&[0.2, 0.1, 0.3]);
        let p = convolution_power(&q, 3, 9);
        assert!((p.sum() - q.sum().powi(3)).abs() < 1e-15);
    }

    #[test]
    fn renewal_examples() {
        let q = renewal_majorant(&seq(&[0.5]), 3).unwrap();
        for (got, want) in q.terms().iter().zip([0.5, 0.25, 0.125]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(renewal_majorant(&Sequence::zeros(4), 4).unwrap().terms(), &[0.0; 4]);
        let q = renewal_majorant(&seq(&[0.25, 0.25]), 2).unwrap();
        assert!((q.get(1) - 0.25).abs() < 1e-15);
        assert!((q.get(2) - 0.3125).abs() < 1e-15);
        assert!(matches!(
            renewal_majorant(&seq(&[0.6, 0.4]), 3),
            Err(Error::NotSubcritical { .. })
        ));
    }

    #[test]
    fn gronwall_examples() {
        let g = seq(&[1.0, 1.0, 1.0]);
        let b = gronwall_majorant(&Sequence::zeros(3), &g, 3).unwrap();
        assert_eq!(b.terms(), g.terms());
        let b = gronwall_majorant(&seq(&[0.5]), &g, 3).unwrap();
        for (got, want) in b.terms().iter().zip([1.0, 1.5, 1.75]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn abel_examples() {
        let b = seq(&[0.3, -1.2, 2.0, 0.7, 0.1]);
        let ones = seq(&[1.0; 5]);
        assert!(abel_identity_residual(&ones, &b, 5).unwrap() < 1e-15);
        let a = Sequence::from_fn(10, |k| k as f64).unwrap();
        let geo = Sequence::from_fn(60, |k| 0.5f64.powi(k as i32)).unwrap();
        assert!(abel_identity_residual(&a, &geo, 10).unwrap() < 1e-13);
        let alt = Sequence::from_fn(3, |k| if k % 2 == 0 { 1.0 } else { -1.0 }).unwrap();
        assert!(abel_identity_residual(&alt, &seq(&[0.4, 0.2, 0.9]), 3).unwrap() < 1e-15);
        assert!(abel_identity_residual(&alt, &b, 1).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Sequence::new(vec![1.0, f64::INFINITY]).is_err());
    }
}
