//! Distributions, histograms and the elementary functionals built on them.
//!
//! Logarithms are natural throughout; entropies are in nats.

use std::collections::BTreeMap;

use crate::error::{domain, Error, Result};

/// `x log(1/x)` with the continuous extension `phi(0) = 0`.
pub fn phi(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return domain(format!("phi requires x >= 0, got {x}"));
    }
    Ok(phi_unchecked(x))
}

/// Same as [`phi`] without the domain check. Negative input yields NaN.
#[inline]
pub fn phi_unchecked(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// A probability vector over an alphabet of `k` symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates and wraps `probs`. Entries must be finite and nonnegative and
    /// the total must lie within `1e-12 * k` of one. Nothing is renormalized.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let k = probs.len();
        if k == 0 {
            return domain("distribution must have at least one symbol");
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return domain(format!("probability {i} is invalid: {p}"));
        }
        let total: f64 = probs.iter().sum();
        let tol = 1e-12 * k as f64;
        if (total - 1.0).abs() > tol {
            return domain(format!(
                "probabilities sum to {total}, outside 1 +/- {tol:e}"
            ));
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return domain("uniform distribution needs k >= 1");
        }
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn point_mass(k: usize, at: usize) -> Result<Self> {
        if at >= k {
            return domain(format!(
                "point mass index {at} outside alphabet of size {k}"
            ));
        }
        let mut probs = vec![0.0; k];
        probs[at] = 1.0;
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    /// Number of symbols with positive mass.
    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }
}

/// Shannon entropy in nats.
pub fn entropy(d: &Distribution) -> f64 {
    d.probs.iter().map(|&p| phi_unchecked(p)).sum()
}

/// Per-symbol occurrence counts of an `n`-sample.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Histogram {
    counts: Vec<u64>,
    n: u64,
}

impl Histogram {
    pub fn new(counts: Vec<u64>) -> Self {
        let n = counts.iter().sum();
        Self { counts, n }
    }

    pub fn zeros(k: usize) -> Self {
        Self {
            counts: vec![0; k],
            n: 0,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// Total sample size.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of distinct observed symbols.
    pub fn distinct(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Pads with unseen symbols up to alphabet size `k`.
    pub fn padded(mut self, k: usize) -> Result<Self> {
        if k < self.counts.len() {
            return domain(format!(
                "histogram has {} symbols, more than k = {k}",
                self.counts.len()
            ));
        }
        self.counts.resize(k, 0);
        Ok(self)
    }

    pub fn fingerprint(&self) -> Fingerprint {
        fingerprint(self)
    }
}

/// Histogram of the histogram: `h[i]` is the number of symbols seen exactly
/// `i >= 1` times.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fingerprint {
    h: BTreeMap<u64, u64>,
}

impl Fingerprint {
    pub fn get(&self, multiplicity: u64) -> u64 {
        self.h.get(&multiplicity).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.h.iter().map(|(&i, &c)| (i, c))
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn as_map(&self) -> &BTreeMap<u64, u64> {
        &self.h
    }

    /// `sum_i i * h_i`, the sample size of the underlying histogram.
    pub fn sample_size(&self) -> u64 {
        self.h.iter().map(|(i, c)| i * c).sum()
    }

    /// `sum_i h_i`, the number of distinct observed symbols.
    pub fn distinct(&self) -> u64 {
        self.h.values().sum()
    }
}

pub fn fingerprint(hist: &Histogram) -> Fingerprint {
    let mut h = BTreeMap::new();
    for &c in hist.counts.iter().filter(|&&c| c > 0) {
        *h.entry(c).or_insert(0) += 1;
    }
    Fingerprint { h }
}

/// Exact falling factorial `x (x-1) ... (x-m+1)`; zero when `m > x`.
pub fn falling_factorial(x: u64, m: u64) -> Result<u128> {
    if m > x {
        return Ok(0);
    }
    let mut acc: u128 = 1;
    for i in 0..m {
        acc = acc
            .checked_mul(u128::from(x - i))
            .ok_or_else(|| Error::Overflow(format!("({x})_{m}")))?;
    }
    Ok(acc)
}
