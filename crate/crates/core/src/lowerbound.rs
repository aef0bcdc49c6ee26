//! Constructions behind the minimax lower bound, made concrete.
//!
//! The dual of best polynomial approximation turns the alternation points of
//! `log` on `[eta, 1]` into two discrete measures `X`, `X'` with the same first
//! `L` moments and maximal separation `E[log 1/X] - E[log 1/X']`. A change of
//! measure maps them to priors `U`, `U'` on `[0, alpha/eta]` that match one
//! more moment and have common mean `alpha`. Their Poisson mixtures are then
//! nearly indistinguishable, which is checked here by exact summation.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rayon::prelude::*;

use crate::domain::{entropy, phi_unchecked, Distribution};
use crate::error::{domain, Error, Result};
use crate::polyapprox::{remez, RemezOptions};
use crate::sampling::Seed;

/// Finitely supported probability measure on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() || atoms.is_empty() {
            return domain(format!(
                "measure needs matching non-empty atoms/weights, got {} and {}",
                atoms.len(),
                weights.len()
            ));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return domain("atoms must be finite");
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return domain("weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("weights sum to {total}, not 1"));
        }
        Ok(Self { atoms, weights })
    }

    pub fn point_mass(at: f64) -> Self {
        Self {
            atoms: vec![at],
            weights: vec![1.0],
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn moment(&self, j: i32) -> f64 {
        self.expect(|x| x.powi(j))
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Two measures on `[eta, 1]` with equal moments `1..=degree` and maximal
/// separation in `E[log 1/X]`.
#[derive(Debug, Clone)]
pub struct MomentMatchedPair {
    pub x: DiscreteMeasure,
    pub x_prime: DiscreteMeasure,
    pub degree: usize,
    pub eta: f64,
    /// `E[log 1/X] - E[log 1/X']`.
    pub separation: f64,
    /// `E_L(log, [eta, 1])` from the Remez run.
    pub approx_error: f64,
    /// Alternation points and the signed weights `w_i = 2 b_i / sum |b_j|`.
    pub alternation: Vec<f64>,
    pub signed_weights: Vec<f64>,
}

pub fn build_moment_matched_pair(degree: usize, eta: f64) -> Result<MomentMatchedPair> {
    if degree < 1 {
        return domain("moment matching needs degree >= 1");
    }
    if !(eta > 0.0 && eta < 1.0) {
        return domain(format!("eta must lie in (0, 1), got {eta}"));
    }
    let approx = remez(f64::ln, (eta, 1.0), degree, &RemezOptions::default())?;
    let xs = approx.alternation().to_vec();
    let min_gap = xs
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if min_gap < 1e-10 * (1.0 - eta) {
        return Err(Error::Degenerate(format!(
            "alternation points within {min_gap:e} of each other"
        )));
    }

    let w = lagrange_weights(&xs);
    let split = |parity: usize| -> Result<DiscreteMeasure> {
        let (atoms, weights): (Vec<f64>, Vec<f64>) = xs
            .iter()
            .zip(&w)
            .enumerate()
            .filter(|(i, _)| i % 2 == parity)
            .map(|(_, (&x, &wi))| (x, wi.abs()))
            .unzip();
        DiscreteMeasure::new(atoms, weights)
    };
    let mut x = split(0)?;
    let mut x_prime = split(1)?;
    let neg_log = |v: f64| -v.ln();
    let mut separation = x.expect(neg_log) - x_prime.expect(neg_log);
    if separation < 0.0 {
        std::mem::swap(&mut x, &mut x_prime);
        separation = -separation;
    }
    Ok(MomentMatchedPair {
        x,
        x_prime,
        degree,
        eta,
        separation,
        approx_error: approx.error(),
        alternation: xs,
        signed_weights: w,
    })
}

/// `w_i = 2 b_i / sum_j |b_j|` with `b_i = 1 / prod_{v != i} (x_i - x_v)`.
///
/// Products are accumulated as log-magnitudes so clustered points neither
/// overflow nor underflow; weights are exponentiated relative to the largest.
fn lagrange_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let logs: Vec<f64> = (0..n)
        .map(|i| {
            -(0..n)
                .filter(|&v| v != i)
                .map(|v| (xs[i] - xs[v]).abs().ln())
                .sum::<f64>()
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // sign of prod_{v != i} (x_i - x_v) is (-1)^(number of v above i)
    let signed: Vec<f64> = logs
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let mag = (l - top).exp();
            if (n - 1 - i).is_multiple_of(2) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let total: f64 = signed.iter().map(|v| v.abs()).sum();
    signed.into_iter().map(|v| 2.0 * v / total).collect()
}

/// Priors on `[0, alpha/eta]` built from a moment-matched pair.
#[derive(Debug, Clone)]
pub struct PriorPair {
    pub u: DiscreteMeasure,
    pub u_prime: DiscreteMeasure,
    pub alpha: f64,
    /// Support bound `alpha / eta`.
    pub lambda_max: f64,
}

impl PriorPair {
    /// Wraps two measures with the stated common mean and support bound.
    pub fn from_measures(
        u: DiscreteMeasure,
        u_prime: DiscreteMeasure,
        alpha: f64,
        lambda_max: f64,
    ) -> Result<Self> {
        for m in [&u, &u_prime] {
            if (m.mean() - alpha).abs() > 1e-10 {
                return domain(format!(
                    "prior mean {} differs from alpha = {alpha}",
                    m.mean()
                ));
            }
            if m.min_atom() < 0.0 || m.max_atom() > lambda_max * (1.0 + 1e-12) {
                return domain(format!("prior support leaves [0, {lambda_max}]"));
            }
        }
        Ok(Self {
            u,
            u_prime,
            alpha,
            lambda_max,
        })
    }
}

/// `P_U(du) = (1 - E[eta/X]) delta_0(du) + (alpha/u) P_{alpha X / eta}(du)`.
pub fn change_of_measure_single(
    x: &DiscreteMeasure,
    eta: f64,
    alpha: f64,
) -> Result<DiscreteMeasure> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return domain(format!("alpha must lie in (0, 1], got {alpha}"));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return domain(format!("eta must lie in (0, 1), got {eta}"));
    }
    if x.min_atom() < eta * (1.0 - 1e-12) || x.max_atom() > 1.0 + 1e-12 {
        return domain(format!("measure must live on [{eta}, 1]"));
    }
    let moved: Vec<f64> = x
        .atoms
        .iter()
        .zip(&x.weights)
        .map(|(&xi, &wi)| wi * eta / xi)
        .collect();
    let at_zero = (1.0 - moved.iter().sum::<f64>()).max(0.0);
    let mut atoms = vec![0.0];
    atoms.extend(x.atoms.iter().map(|&xi| alpha * xi / eta));
    let mut weights = vec![at_zero];
    weights.extend(moved);
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    DiscreteMeasure::new(atoms, weights)
}

pub fn change_of_measure(pair: &MomentMatchedPair, alpha: f64) -> Result<PriorPair> {
    let u = change_of_measure_single(&pair.x, pair.eta, alpha)?;
    let u_prime = change_of_measure_single(&pair.x_prime, pair.eta, alpha)?;
    Ok(PriorPair {
        u,
        u_prime,
        alpha,
        lambda_max: alpha / pair.eta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureTv {
    pub tv: f64,
    /// Upper bound on the total variation omitted by truncating the sum.
    pub truncation: f64,
    /// Number of pmf terms summed.
    pub terms: usize,
}

/// Total variation between `E[Poi(s U)]` and `E[Poi(s U')]` by direct
/// summation of the mixture pmfs.
pub fn poisson_mixture_tv(
    u: &DiscreteMeasure,
    u_prime: &DiscreteMeasure,
    scale: f64,
) -> Result<MixtureTv> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return domain(format!("scale must be finite and >= 0, got {scale}"));
    }
    if u.min_atom() < 0.0 || u_prime.min_atom() < 0.0 {
        return domain("Poisson means must be nonnegative");
    }
    let mut a = MixturePmf::new(u, scale);
    let mut b = MixturePmf::new(u_prime, scale);
    let mut tv = 0.0;
    let mut j: u64 = 0;
    loop {
        tv += (a.pmf() - b.pmf()).abs();
        let tail = a.tail_bound(j) + b.tail_bound(j);
        if tail < 1e-15 {
            return Ok(MixtureTv {
                tv: 0.5 * tv,
                truncation: 0.5 * tail,
                terms: j as usize + 1,
            });
        }
        j += 1;
        a.advance(j);
        b.advance(j);
    }
}

/// Running pmf values `poi(lambda_a, j)` for every atom of a mixture.
struct MixturePmf {
    lambdas: Vec<f64>,
    weights: Vec<f64>,
    log_pmf: Vec<f64>,
}

impl MixturePmf {
    fn new(m: &DiscreteMeasure, scale: f64) -> Self {
        let lambdas: Vec<f64> = m.atoms.iter().map(|&x| x * scale).collect();
        let log_pmf = lambdas.iter().map(|&l| -l).collect();
        Self {
            lambdas,
            weights: m.weights.clone(),
            log_pmf,
        }
    }

    fn advance(&mut self, j: u64) {
        let lj = (j as f64).ln();
        for (lp, &l) in self.log_pmf.iter_mut().zip(&self.lambdas) {
            *lp = if l == 0.0 {
                f64::NEG_INFINITY
            } else {
                *lp + l.ln() - lj
            };
        }
    }

    fn pmf(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.log_pmf)
            .map(|(&w, &lp)| w * lp.exp())
            .sum()
    }

    /// Bound on the mixture mass above `j` (infinite while `j` is not yet
    /// past every mean).
    fn tail_bound(&self, j: u64) -> f64 {
        let next = (j + 1) as f64;
        self.weights
            .iter()
            .zip(&self.lambdas)
            .zip(&self.log_pmf)
            .map(|((&w, &l), &lp)| {
                if l == 0.0 || w == 0.0 {
                    return 0.0;
                }
                let r = l / next;
                if r >= 1.0 {
                    f64::INFINITY
                } else {
                    w * lp.exp() * r / (1.0 - r)
                }
            })
            .sum()
    }
}

/// `(2 e M / L)^L`, the bound on the mixture TV when `L` moments match on `[0, M]`.
pub fn tv_moment_bound(support: f64, matched: usize) -> f64 {
    let l = matched as f64;
    (2.0 * std::f64::consts::E * support / l).powf(l)
}

/// Two nearby distributions with small KL divergence and separated entropy.
#[derive(Debug, Clone)]
pub struct TwoPoint {
    pub p: Distribution,
    pub q: Distribution,
    pub eps: f64,
    /// `D(P || Q)`.
    pub kl: f64,
    /// `H(Q) - H(P)`.
    pub gap: f64,
}

impl TwoPoint {
    /// `(1/3) log(2(k-1)) eps - eps^2`.
    pub fn gap_lower_bound(&self) -> f64 {
        let k = self.p.k() as f64;
        (2.0 * (k - 1.0)).ln() * self.eps / 3.0 - self.eps * self.eps
    }
}

pub fn two_point_pair(k: usize, n: u64) -> Result<TwoPoint> {
    if k < 2 {
        return domain(format!("two-point pair needs k >= 2, got {k}"));
    }
    if n < 2 {
        return domain(format!(
            "two-point pair needs eps = 1/sqrt(n) < 1, got n = {n}"
        ));
    }
    two_point_pair_eps(k, 1.0 / (n as f64).sqrt())
}

/// Same construction with an explicit `eps` in `[0, 1)`.
pub fn two_point_pair_eps(k: usize, eps: f64) -> Result<TwoPoint> {
    if !(0.0..1.0).contains(&eps) {
        return domain(format!("eps must lie in [0, 1), got {eps}"));
    }
    let km1 = (k - 1) as f64;
    let mut p = vec![1.0 / (3.0 * km1); k - 1];
    p.push(2.0 / 3.0);
    let mut q = vec![(1.0 + eps) / (3.0 * km1); k - 1];
    q.push((2.0 - eps) / 3.0);
    let p = Distribution::new(p)?;
    let q = Distribution::new(q)?;
    let kl = (2.0 / 3.0) * (2.0 / (2.0 - eps)).ln() + (1.0 / 3.0) * (1.0 / (1.0 + eps)).ln();
    if kl > eps * eps * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "KL {kl} exceeds eps^2 = {}",
            eps * eps
        )));
    }
    let gap = entropy(&q) - entropy(&p);
    Ok(TwoPoint { p, q, eps, kl, gap })
}

/// `var[(X)_m]` for `X ~ Poi(lambda)`:
/// `lambda^m m! sum_{k<m} C(m, k) lambda^k / k!`.
pub fn factorial_moment_variance(lambda: f64, m: u32) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return domain(format!("lambda must be finite and >= 0, got {lambda}"));
    }
    if m == 0 {
        return domain("factorial moment order must be >= 1");
    }
    let mut m_fact = 1.0;
    for i in 2..=m {
        m_fact *= i as f64;
    }
    // C(m, k) / k! built incrementally
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 0..m {
        sum += term * lambda.powi(k as i32);
        term *= (m - k) as f64 / ((k + 1) as f64 * (k + 1) as f64);
    }
    Ok(lambda.powi(m as i32) * m_fact * sum)
}

/// Which prior of a pair to sample from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    U,
    UPrime,
}

/// `(U_1/k, ..., U_k/k, 1 - alpha)` with `U_i` iid from one prior.
#[derive(Debug, Clone)]
pub struct NearDistribution {
    pub probs: Vec<f64>,
    pub total_mass: f64,
    /// `sum_i phi(p_i)`.
    pub functional: f64,
}

pub fn sample_prior_vector(
    pp: &PriorPair,
    side: Side,
    k: usize,
    seed: Seed,
) -> Result<NearDistribution> {
    if k < 2 {
        return domain(format!("prior vector needs k >= 2, got {k}"));
    }
    let m = match side {
        Side::U => &pp.u,
        Side::UPrime => &pp.u_prime,
    };
    let index = WeightedIndex::new(&m.weights)
        .map_err(|e| Error::Domain(format!("bad prior weights: {e}")))?;
    let mut rng = seed.rng();
    let kf = k as f64;
    let mut probs: Vec<f64> = (0..k)
        .map(|_| m.atoms[index.sample(&mut rng)] / kf)
        .collect();
    probs.push(1.0 - pp.alpha);
    let total_mass = probs.iter().sum();
    let functional = probs.iter().map(|&p| phi_unchecked(p)).sum();
    Ok(NearDistribution {
        probs,
        total_mass,
        functional,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub l: usize,
    pub degree: usize,
    pub eta: f64,
    /// `E_degree(log, [1/L^2, 1])`.
    pub error: f64,
}

/// `E_{floor(c L)}(log, [L^-2, 1])` for each `L`.
pub fn log_lb_constant_scan(l_values: &[usize], c: f64) -> Result<Vec<ScanRow>> {
    if !(0.0..=1.0).contains(&c) {
        return domain(format!("c must lie in [0, 1], got {c}"));
    }
    l_values
        .par_iter()
        .map(|&l| {
            if l < 2 {
                return domain(format!("scan needs L >= 2, got {l}"));
            }
            let lf = l as f64;
            let degree = (c * lf).floor() as usize;
            let eta = 1.0 / (lf * lf);
            let approx = remez(f64::ln, (eta, 1.0), degree, &RemezOptions::default())?;
            Ok(ScanRow {
                l,
                degree,
                eta,
                error: approx.error(),
            })
        })
        .collect()
}
