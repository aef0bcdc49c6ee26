//! Entropy estimators: plug-in, Miller-Madow, and the polynomial-approximation
//! estimator that switches per symbol between an unbiased estimate of the best
//! polynomial approximant of `phi` (small counts) and the bias-corrected
//! plug-in (large counts).
//!
//! All estimators read the histogram only through its (joint) fingerprint and
//! accumulate in fingerprint order, so relabelling symbols leaves every
//! estimate bit-identical.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::domain::{entropy, phi_unchecked, Distribution, Histogram};
use crate::error::{domain, Result};
use crate::polyapprox::{remez, ChebApprox, PolyEval, RemezOptions};
use crate::sampling::{sample_multinomial, Seed};

/// How the adaptive variant forces `g_L(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdaptiveZeroing {
    /// Drop the constant term `a_0` of the approximant; `g_L(0) = 0` follows.
    #[default]
    Coefficient,
    /// Keep the approximant and override only `g_L(0)` with 0.
    ZeroCountOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Degree constant: `L = floor(c0 log k)`.
    pub c0: f64,
    /// Approximation interval `[0, c1 log k / n]`.
    pub c1: f64,
    /// Counts up to `c2 log k` use the polynomial branch.
    pub c2: f64,
    /// Clamp at `log k`; ignored in adaptive mode, which clamps only below.
    pub clamp_upper: bool,
    /// Replace `log k` by `log n` and force `g_L(0) = 0`.
    pub adaptive: bool,
    pub zeroing: AdaptiveZeroing,
    /// Select the branch with an independent second histogram.
    pub split: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            c0: 1.6,
            c1: 3.5,
            c2: 1.6,
            clamp_upper: true,
            adaptive: false,
            zeroing: AdaptiveZeroing::Coefficient,
            split: false,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, c) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2)] {
            if !(c > 0.0 && c.is_finite()) {
                return domain(format!("{name} must be positive, got {c}"));
            }
        }
        Ok(())
    }

    /// `log k`, or `log n` in adaptive mode.
    pub fn log_k_eff(&self, k: usize, n: u64) -> Result<f64> {
        let k_eff = if self.adaptive { n as f64 } else { k as f64 };
        if k_eff < 2.0 {
            return domain(format!(
                "effective alphabet size must be >= 2, got {k_eff} ({} mode)",
                if self.adaptive { "adaptive" } else { "fixed-k" }
            ));
        }
        Ok(k_eff.ln())
    }

    pub fn degree(&self, k: usize, n: u64) -> Result<usize> {
        Ok((self.c0 * self.log_k_eff(k, n)?).floor() as usize)
    }
}

/// Best approximation of `phi` on `[0, 1]` at the given degree.
pub fn phi_approximation(degree: usize) -> Result<ChebApprox> {
    remez(phi_unchecked, (0.0, 1.0), degree, &RemezOptions::default())
}

/// Precomputed coefficients for `g_L` at a fixed `(k, n, config)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyEstimatorTable {
    degree: usize,
    n: u64,
    /// `c1 log k` (count scale of the approximation interval).
    scale: f64,
    /// Approximant coefficients on `[0, 1]`, with `a_0` zeroed if requested.
    a: Vec<f64>,
    /// `b_m = a_m / scale^(m-1)`.
    b: Vec<f64>,
    /// `log(n / scale)`.
    linear: f64,
    zero_at_zero: bool,
    source: ChebApprox,
}

impl PolyEstimatorTable {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Right end of the approximation interval in count units, `c1 log k`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn scaled_coeffs(&self) -> &[f64] {
        &self.b
    }

    pub fn linear_term(&self) -> f64 {
        self.linear
    }

    pub fn source(&self) -> &ChebApprox {
        &self.source
    }

    /// `g_L(j)`: unbiased for the implied `P_L(p)` when `j ~ Poi(n p)`.
    ///
    /// The falling factorial is never formed: `t_0 = scale` and
    /// `t_(m+1) = t_m (j - m) / scale` give `t_m = (j)_m / scale^(m-1)`, so
    /// intermediate terms stay near `|a_m| (j / scale)^m`. Coefficients of
    /// the approximant are large and alternate in sign, so the sum is carried
    /// in double-double arithmetic.
    pub fn g(&self, j: u64) -> f64 {
        if j == 0 && self.zero_at_zero {
            return 0.0;
        }
        let jf = j as f64;
        let mut term = Dd::from(self.scale);
        let mut acc = Dd::from(0.0);
        for (m, &am) in self.a.iter().enumerate() {
            if m as u64 > j {
                break;
            }
            acc = acc.add(term.mul_f64(am));
            term = term.mul_f64(jf - m as f64).div_f64(self.scale);
        }
        acc = acc.add(Dd::two_prod(self.linear, jf));
        acc.to_f64() / self.n as f64
    }

    /// `P_L(p)`, the quantity `g_L` is unbiased for, evaluated through the
    /// Chebyshev form of the approximant.
    pub fn implied_poly(&self, p: f64) -> f64 {
        let n = self.n as f64;
        let lambda = n * p;
        let shift = self.source.coeffs().first().copied().unwrap_or(0.0) - self.a[0];
        (self.scale * (self.source.eval(lambda / self.scale) - shift) + self.linear * lambda) / n
    }

    /// Uniform error of `P_L` against `phi` on `[0, scale / n]`, from the
    /// certified error of the source approximant.
    pub fn uniform_error(&self) -> f64 {
        let shift = (self.source.coeffs()[0] - self.a[0]).abs();
        (self.scale / self.n as f64) * (self.source.error() + shift)
    }
}

pub fn build_poly_table(
    k: usize,
    n: u64,
    cfg: &EstimatorConfig,
    approx: &ChebApprox,
) -> Result<PolyEstimatorTable> {
    cfg.validate()?;
    if !cfg.adaptive && k < 2 {
        return domain(format!("alphabet size must be >= 2, got {k}"));
    }
    if n == 0 {
        return domain("sample size must be >= 1");
    }
    let log_k = cfg.log_k_eff(k, n)?;
    let degree = cfg.degree(k, n)?;
    if approx.degree() != degree {
        return domain(format!(
            "approximant has degree {}, configuration needs {degree}",
            approx.degree()
        ));
    }
    if approx.interval() != (0.0, 1.0) {
        return domain("approximant must live on [0, 1]");
    }
    let scale = cfg.c1 * log_k;
    let mut a = approx.coeffs().to_vec();
    let mut zero_at_zero = false;
    if cfg.adaptive {
        match cfg.zeroing {
            AdaptiveZeroing::Coefficient => a[0] = 0.0,
            AdaptiveZeroing::ZeroCountOnly => zero_at_zero = true,
        }
    }
    let mut factor = scale;
    let b = a
        .iter()
        .map(|&am| {
            let bm = am * factor;
            factor /= scale;
            bm
        })
        .collect();
    Ok(PolyEstimatorTable {
        degree,
        n,
        scale,
        a,
        b,
        linear: (n as f64 / scale).ln(),
        zero_at_zero,
        source: approx.clone(),
    })
}

/// `g_L(j)` for the table's `(k, n)`.
pub fn g_l(j: u64, table: &PolyEstimatorTable) -> f64 {
    table.g(j)
}

pub fn plugin_entropy(h: &Histogram) -> Result<f64> {
    let n = h.n();
    if n == 0 {
        return domain("plug-in entropy needs n >= 1");
    }
    let nf = n as f64;
    Ok(h.fingerprint()
        .iter()
        .map(|(i, hi)| hi as f64 * phi_unchecked(i as f64 / nf))
        .sum())
}

pub fn miller_madow(h: &Histogram) -> Result<f64> {
    let plug = plugin_entropy(h)?;
    let distinct = h.distinct() as f64;
    Ok(plug + (distinct - 1.0) / (2.0 * h.n() as f64))
}

/// Per-symbol branch choice on the selection counts `N'` followed by the
/// final clamp.
///
/// Without splitting, pass `None` and `N` selects its own branch. `table`
/// fixes `n`; with splitting, `n` is the expected size of each half.
pub fn wu_yang_estimate(
    counts: &Histogram,
    select: Option<&Histogram>,
    k: usize,
    cfg: &EstimatorConfig,
    table: &PolyEstimatorTable,
) -> Result<f64> {
    cfg.validate()?;
    if counts.k() != k {
        return domain(format!(
            "histogram has {} symbols, expected k = {k}",
            counts.k()
        ));
    }
    let select = match (cfg.split, select) {
        (true, Some(s)) => {
            if s.k() != k {
                return domain(format!(
                    "selection histogram has {} symbols, expected k = {k}",
                    s.k()
                ));
            }
            s
        }
        (true, None) => return domain("split mode needs a selection histogram"),
        (false, _) => counts,
    };
    let n = table.n();
    if n == 0 {
        return domain("sample size must be >= 1");
    }
    let nf = n as f64;
    let threshold = cfg.c2 * cfg.log_k_eff(k, n)?;

    let mut joint: BTreeMap<(u64, u64), u64> = BTreeMap::new();
    for (&c, &s) in counts.counts().iter().zip(select.counts()) {
        *joint.entry((c, s)).or_insert(0) += 1;
    }
    let raw: f64 = joint
        .iter()
        .map(|(&(c, s), &mult)| {
            let v = if s as f64 <= threshold {
                table.g(c)
            } else {
                phi_unchecked(c as f64 / nf) + 0.5 / nf
            };
            mult as f64 * v
        })
        .sum();

    let mut est = raw.max(0.0);
    if cfg.clamp_upper && !cfg.adaptive {
        est = est.min((k as f64).ln());
    }
    Ok(est)
}

/// Bundles a configuration with its coefficient table.
#[derive(Debug, Clone)]
pub struct PolyEstimator {
    pub k: usize,
    pub cfg: EstimatorConfig,
    pub table: PolyEstimatorTable,
}

impl PolyEstimator {
    /// Runs Remez for the required degree and builds the table.
    pub fn new(k: usize, n: u64, cfg: EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        let approx = phi_approximation(cfg.degree(k, n)?)?;
        Self::with_approx(k, n, cfg, &approx)
    }

    pub fn with_approx(
        k: usize,
        n: u64,
        cfg: EstimatorConfig,
        approx: &ChebApprox,
    ) -> Result<Self> {
        let table = build_poly_table(k, n, &cfg, approx)?;
        Ok(Self { k, cfg, table })
    }

    pub fn estimate(&self, counts: &Histogram, select: Option<&Histogram>) -> Result<f64> {
        wu_yang_estimate(counts, select, self.k, &self.cfg, &self.table)
    }
}

/// Empirical bias of the plug-in estimator under multinomial sampling.
/// Trial `t` uses stream `seed.stream + t`.
pub fn plugin_bias_probe(d: &Distribution, n: u64, trials: usize, seed: Seed) -> Result<f64> {
    if trials < 100 {
        return domain(format!(
            "bias probe needs at least 100 trials, got {trials}"
        ));
    }
    if n == 0 {
        return domain("bias probe needs n >= 1");
    }
    let estimates = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let h = sample_multinomial(d, n, Seed::new(seed.base, seed.stream.wrapping_add(t)));
            plugin_entropy(&h)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = estimates.iter().sum::<f64>() / trials as f64;
    Ok(mean - entropy(d))
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl From<f64> for Dd {
    fn from(hi: f64) -> Self {
        Self { hi, lo: 0.0 }
    }
}

impl Dd {
    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        let e = (a - (s - bb)) + (b - bb);
        Self { hi: s, lo: e }
    }

    fn quick_two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        Self {
            hi: s,
            lo: b - (s - a),
        }
    }

    fn two_prod(a: f64, b: f64) -> Self {
        let p = a * b;
        Self {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        let t = Self::two_sum(self.lo, o.lo);
        let u = Self::quick_two_sum(s.hi, s.lo + t.hi);
        Self::quick_two_sum(u.hi, u.lo + t.lo)
    }

    fn mul_f64(self, y: f64) -> Self {
        let p = Self::two_prod(self.hi, y);
        Self::quick_two_sum(p.hi, p.lo + self.lo * y)
    }

    fn div_f64(self, y: f64) -> Self {
        let q1 = self.hi / y;
        let p = Self::two_prod(q1, y);
        let s = Self::two_sum(self.hi, -p.hi);
        let e = s.lo - p.lo + self.lo;
        let q2 = (s.hi + e) / y;
        Self::quick_two_sum(q1, q2)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}
