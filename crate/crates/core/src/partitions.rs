//! Integer-partition index sets and the combinatorial weights of Faà di
//! Bruno's formula.
//!
//! A partition of `k` is stored by multiplicities `(m_1, ..., m_k)` with
//! `Σ j·m_j = k`. `S_k` is the set of all of them; `T_k` is the set of
//! `(k−1)`-tuples of weight `k−1`.

use crate::error::{Error, Result};

/// Largest `k` for which sets are enumerated; keeps `k!` exact in `u64`.
pub const MAX_PARTITION_ORDER: usize = 12;

/// Multiplicity vector `(m_1, ..., m_len)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartitionTuple {
    multiplicities: Vec<u32>,
}

impl PartitionTuple {
    pub fn new(multiplicities: Vec<u32>) -> Self {
        Self { multiplicities }
    }

    pub fn multiplicities(&self) -> &[u32] {
        &self.multiplicities
    }

    /// `m_j` (1-based); zero past the end.
    pub fn m(&self, j: usize) -> u32 {
        if j == 0 {
            0
        } else {
            self.multiplicities.get(j - 1).copied().unwrap_or(0)
        }
    }

    /// `Σ j·m_j`.
    pub fn weight(&self) -> usize {
        self.multiplicities
            .iter()
            .enumerate()
            .map(|(i, &m)| (i + 1) * m as usize)
            .sum()
    }

    /// `m_1 + ⋯ + m_len`.
    pub fn parts(&self) -> u32 {
        self.multiplicities.iter().sum()
    }

    /// `m_1!·1!^{m_1} ⋯ m_l!·l!^{m_l}`.
    pub fn faa_denominator(&self) -> u64 {
        self.multiplicities
            .iter()
            .enumerate()
            .map(|(i, &m)| factorial(m as usize) * factorial(i + 1).pow(m))
            .product()
    }

    /// `k!/(m_1!·1!^{m_1} ⋯ m_k!·k!^{m_k})` with `k` the tuple's weight: the
    /// number of set partitions of `{1..k}` with this block-size profile.
    pub fn faa_weight(&self) -> u64 {
        factorial(self.weight()) / self.faa_denominator()
    }

    /// `∏_j v_j^{m_j}` for `v = (v_1, v_2, ...)`.
    pub fn monomial(&self, values: &[f64]) -> f64 {
        self.multiplicities
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0)
            .map(|(i, &m)| values[i].powi(m as i32))
            .product()
    }
}

/// `n!` for `n ≤ 20`.
pub fn factorial(n: usize) -> u64 {
    assert!(n <= 20, "{n}! overflows u64");
    (1..=n as u64).product()
}

/// `n!!` for odd `n ≥ −1` (with `(−1)!! = 1`).
pub fn odd_double_factorial(n: i64) -> Result<u64> {
    if n < -1 || n % 2 == 0 {
        return Err(Error::Domain(format!("double factorial needs odd n ≥ −1, got {n}")));
    }
    let mut acc = 1u64;
    let mut j = n;
    while j > 1 {
        acc = acc
            .checked_mul(j as u64)
            .ok_or_else(|| Error::Domain(format!("{n}!! overflows u64")))?;
        j -= 2;
    }
    Ok(acc)
}

/// All `len`-tuples of weight `target`, largest `m_1` first, then largest
/// `m_2`, and so on (descending lexicographic order).
fn enumerate_weighted(len: usize, target: usize) -> Vec<PartitionTuple> {
    fn descend(j: usize, len: usize, remaining: usize, cur: &mut Vec<u32>, out: &mut Vec<PartitionTuple>) {
        if j > len {
            if remaining == 0 {
                out.push(PartitionTuple::new(cur.clone()));
            }
            return;
        }
        for m in (0..=remaining / j).rev() {
            cur.push(m as u32);
            descend(j + 1, len, remaining - m * j, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    descend(1, len, target, &mut Vec::with_capacity(len), &mut out);
    out
}

fn check_order(k: usize, min: usize) -> Result<()> {
    if k < min || k > MAX_PARTITION_ORDER {
        return Err(Error::Domain(format!(
            "partition order {k} outside {min}..={MAX_PARTITION_ORDER}"
        )));
    }
    Ok(())
}

/// `S_k`: all `k`-tuples with `Σ j·m_j = k`. `S_0` is the empty tuple.
pub fn enumerate_sk(k: usize) -> Result<Vec<PartitionTuple>> {
    check_order(k, 0)?;
    Ok(enumerate_weighted(k, k))
}

/// `T_k`: all `(k−1)`-tuples with `Σ j·m_j = k−1`. `T_1` is the empty tuple.
pub fn enumerate_tk(k: usize) -> Result<Vec<PartitionTuple>> {
    check_order(k, 1)?;
    Ok(enumerate_weighted(k - 1, k - 1))
}

/// `S_k` without the one-block partition `m_k = 1`, i.e. `(k−1)`-tuples of
/// weight `k`. These are the terms of the `k`-th derivative of a composite
/// that do not involve the inner function's `k`-th derivative.
pub fn enumerate_sk_split(k: usize) -> Result<Vec<PartitionTuple>> {
    check_order(k, 1)?;
    Ok(enumerate_weighted(k - 1, k))
}

/// Faà di Bruno: the `k`-th derivative of `F(g(·))` from the outer
/// derivatives `F^{(n)}` (`outer[n]`, `n = 0..=k`) and inner derivatives
/// `g^{(j)}` (`inner[j-1]`, `j = 1..=k`).
pub fn faa_di_bruno(k: usize, outer: &[f64], inner: &[f64]) -> Result<f64> {
    Ok(enumerate_sk(k)?
        .iter()
        .map(|t| t.faa_weight() as f64 * outer[t.parts() as usize] * t.monomial(inner))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tuples(v: &[&[u32]]) -> Vec<PartitionTuple> {
        v.iter().map(|m| PartitionTuple::new(m.to_vec())).collect()
    }

    /// Partition counts from the generating function `∏ 1/(1−x^j)`.
    fn partition_count(k: usize) -> usize {
        let mut p = vec![0usize; k + 1];
        p[0] = 1;
        for part in 1..=k {
            for n in part..=k {
                p[n] += p[n - part];
            }
        }
        p[k]
    }

    /// Bell numbers by enumerating restricted growth strings.
    fn bell_brute(n: usize) -> u64 {
        fn go(i: usize, n: usize, max: usize) -> u64 {
            if i == n {
                return 1;
            }
            (0..=max + 1).map(|b| go(i + 1, n, max.max(b))).sum()
        }
        if n == 0 {
            1
        } else {
            go(1, n, 0)
        }
    }

    #[test]
    fn sk_examples() {
        assert_eq!(enumerate_sk(1).unwrap(), tuples(&[&[1]]));
        assert_eq!(enumerate_sk(3).unwrap(), tuples(&[&[3, 0, 0], &[1, 1, 0], &[0, 0, 1]]));
        assert_eq!(enumerate_sk(5).unwrap().len(), 7);
        assert_eq!(enumerate_sk(0).unwrap(), tuples(&[&[]]));
    }

    #[test]
    fn tk_examples() {
        assert_eq!(enumerate_tk(2).unwrap(), tuples(&[&[1]]));
        assert_eq!(enumerate_tk(3).unwrap(), tuples(&[&[2, 0], &[0, 1]]));
        assert_eq!(enumerate_tk(4).unwrap().len(), 3);
        assert_eq!(enumerate_tk(1).unwrap(), tuples(&[&[]]));
    }

    #[test]
    fn counts_match_partition_function() {
        for k in 1..=MAX_PARTITION_ORDER {
            assert_eq!(enumerate_sk(k).unwrap().len(), partition_count(k), "k={k}");
            assert_eq!(enumerate_tk(k).unwrap().len(), partition_count(k - 1), "k={k}");
            assert_eq!(enumerate_sk_split(k).unwrap().len(), partition_count(k) - 1, "k={k}");
            assert!(enumerate_sk(k).unwrap().iter().all(|t| t.weight() == k));
        }
        assert!(enumerate_sk(13).is_err());
    }

    #[test]
    fn double_factorials() {
        assert_eq!(odd_double_factorial(-1).unwrap(), 1);
        assert_eq!(odd_double_factorial(5).unwrap(), 15);
        assert_eq!(odd_double_factorial(9).unwrap(), 945);
        assert_eq!(odd_double_factorial(17).unwrap(), 34_459_425);
        assert!(odd_double_factorial(4).is_err());
    }

    #[test]
    fn faa_weights() {
        assert_eq!(PartitionTuple::new(vec![4, 0, 0, 0]).faa_weight(), 1);
        assert_eq!(PartitionTuple::new(vec![1, 1, 0]).faa_weight(), 3);
        assert_eq!(PartitionTuple::new(vec![0, 0, 1]).faa_weight(), 1);
    }

    #[test]
    fn bell_numbers_from_weights() {
        for k in 0..=6 {
            let total: u64 = enumerate_sk(k).unwrap().iter().map(|t| t.faa_weight()).sum();
            assert_eq!(total, bell_brute(k), "k={k}");
        }
    }

    #[test]
    fn faa_di_bruno_on_exp_of_sin() {
        // d^k/dθ^k e^{sin θ} at θ = 0.3 against the known closed forms.
        let th = 0.3f64;
        let outer = vec![th.sin().exp(); 5];
        let inner = [th.cos(), -th.sin(), -th.cos(), th.sin()];
        let e = th.sin().exp();
        let d2 = e * (th.cos().powi(2) - th.sin());
        assert!((faa_di_bruno(2, &outer, &inner).unwrap() - d2).abs() < 1e-14);
        let d3 = e * (th.cos().powi(3) - 3.0 * th.sin() * th.cos() - th.cos());
        assert!((faa_di_bruno(3, &outer, &inner).unwrap() - d3).abs() < 1e-14);
    }

    #[test]
    fn deterministic_order() {
        assert_eq!(enumerate_sk(8).unwrap(), enumerate_sk(8).unwrap());
    }
}
