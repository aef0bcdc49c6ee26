//! Synthetic distributions and seeded samplers.
//!
//! Every sampler takes a [`Seed`] and builds its own generator from it, so a
//! given `(base, stream)` pair reproduces the same draws regardless of which
//! thread runs it or in what order.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _, Poisson};

use crate::domain::{Distribution, Histogram};
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticKind {
    Uniform,
    /// `p_i ∝ i^(-alpha)`.
    Zipf(f64),
    /// First half `p_i ∝ 1/i`, second half geometric with ratio `1 - 2/k`,
    /// each half carrying mass 1/2.
    GeoZipfMix,
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => write!(f, "uniform"),
            Self::Zipf(alpha) => write!(f, "zipf:{alpha}"),
            Self::GeoZipfMix => write!(f, "mix"),
        }
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    /// Accepts `uniform`, `zipf:<alpha>` and `mix`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "uniform" => Ok(Self::Uniform),
            "mix" => Ok(Self::GeoZipfMix),
            _ => {
                let Some(alpha) = s.strip_prefix("zipf:") else {
                    return domain(format!("unknown distribution `{s}`"));
                };
                let alpha: f64 = alpha
                    .parse()
                    .map_err(|_| Error::Domain(format!("bad zipf exponent in `{s}`")))?;
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return domain(format!("zipf exponent must be positive, got {alpha}"));
                }
                Ok(Self::Zipf(alpha))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub k: usize,
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, k: usize) -> Result<Self> {
        let spec = Self { kind, k };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return domain("alphabet size must be positive");
        }
        match self.kind {
            SyntheticKind::Zipf(a) if !(a > 0.0 && a.is_finite()) => {
                domain(format!("zipf exponent must be positive, got {a}"))
            }
            SyntheticKind::GeoZipfMix if !self.k.is_multiple_of(2) => domain(format!(
                "mixture needs an even alphabet size, got {}",
                self.k
            )),
            _ => Ok(()),
        }
    }
}

/// Reproducible randomness: `base` selects the experiment, `stream` the trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Seed {
    pub base: u64,
    pub stream: u64,
}

impl Seed {
    pub fn new(base: u64, stream: u64) -> Self {
        Self { base, stream }
    }

    /// Counter-based ChaCha generator keyed by `base` on stream `stream`.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.base.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream);
        rng
    }
}

pub fn make_distribution(spec: &SyntheticSpec) -> Result<Distribution> {
    spec.validate()?;
    let k = spec.k;
    let probs = match spec.kind {
        SyntheticKind::Uniform => vec![1.0 / k as f64; k],
        SyntheticKind::Zipf(alpha) => {
            let w: Vec<f64> = (1..=k).map(|i| (i as f64).powf(-alpha)).collect();
            normalize(w, 1.0)
        }
        SyntheticKind::GeoZipfMix => {
            let half = k / 2;
            let ratio = 1.0 - 2.0 / k as f64;
            let zipf = normalize((1..=half).map(|i| 1.0 / i as f64).collect(), 0.5);
            let geo = normalize((0..half).map(|i| ratio.powi(i as i32)).collect(), 0.5);
            zipf.into_iter().chain(geo).collect()
        }
    };
    Distribution::new(probs)
}

fn normalize(mut w: Vec<f64>, mass: f64) -> Vec<f64> {
    let z: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x = *x / z * mass;
    }
    w
}

/// `Multinomial(n, P)` via the conditional binomial chain.
pub fn sample_multinomial(d: &Distribution, n: u64, seed: Seed) -> Histogram {
    let mut rng = seed.rng();
    let probs = d.probs();
    let mut counts = vec![0u64; probs.len()];
    let Some(last) = probs.iter().rposition(|&p| p > 0.0) else {
        return Histogram::new(counts);
    };
    let mut remaining = n;
    let mut mass = 1.0;
    for (j, &p) in probs.iter().enumerate().take(last + 1) {
        if remaining == 0 {
            break;
        }
        if j == last {
            counts[j] = remaining;
            break;
        }
        if p == 0.0 {
            continue;
        }
        let q = if p >= mass { 1.0 } else { p / mass };
        let c = draw_binomial(&mut rng, remaining, q);
        counts[j] = c;
        remaining -= c;
        mass -= p;
    }
    Histogram::new(counts)
}

/// Independent `Poi(n p_j)` counts.
pub fn sample_poissonized(d: &Distribution, n: f64, seed: Seed) -> Result<Histogram> {
    if !(n >= 0.0 && n.is_finite()) {
        return domain(format!(
            "Poisson sample size must be finite and >= 0, got {n}"
        ));
    }
    let mut rng = seed.rng();
    let counts = d
        .probs()
        .iter()
        .map(|&p| draw_poisson(&mut rng, n * p))
        .collect();
    Ok(Histogram::new(counts))
}

/// Thins each count with a fair coin: `N_j ~ Bin(M_j, 1/2)`, `N'_j = M_j - N_j`.
pub fn split_histogram(m: &Histogram, seed: Seed) -> (Histogram, Histogram) {
    let mut rng = seed.rng();
    let (first, second): (Vec<u64>, Vec<u64>) = m
        .counts()
        .iter()
        .map(|&c| {
            let a = draw_binomial(&mut rng, c, 0.5);
            (a, c - a)
        })
        .unzip();
    (Histogram::new(first), Histogram::new(second))
}

pub(crate) fn draw_poisson<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let pois = Poisson::new(lambda).expect("finite positive Poisson mean");
    pois.sample(rng) as u64
}

pub(crate) fn draw_binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("probability in (0, 1)")
        .sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn synthetic_examples() {
        let u = make_distribution(&SyntheticSpec::new(SyntheticKind::Uniform, 3).unwrap()).unwrap();
        assert!(close(u.probs(), &[1.0 / 3.0; 3], 1e-15));

        let z =
            make_distribution(&SyntheticSpec::new(SyntheticKind::Zipf(1.0), 3).unwrap()).unwrap();
        assert!(close(
            z.probs(),
            &[6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0],
            1e-15
        ));

        let m =
            make_distribution(&SyntheticSpec::new(SyntheticKind::GeoZipfMix, 4).unwrap()).unwrap();
        assert!(close(
            m.probs(),
            &[1.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0, 1.0 / 6.0],
            1e-15
        ));
    }

    #[test]
    fn invalid_specs() {
        assert!(SyntheticSpec::new(SyntheticKind::GeoZipfMix, 5).is_err());
        assert!(SyntheticSpec::new(SyntheticKind::Zipf(0.0), 5).is_err());
        assert!(SyntheticSpec::new(SyntheticKind::Uniform, 0).is_err());
        assert!("zipf:-1".parse::<SyntheticKind>().is_err());
        assert!("zipf:x".parse::<SyntheticKind>().is_err());
        assert!("normal".parse::<SyntheticKind>().is_err());
    }

    #[test]
    fn kind_round_trips_through_label() {
        for s in ["uniform", "zipf:1", "zipf:0.5", "mix"] {
            assert_eq!(s.parse::<SyntheticKind>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn normalization_is_within_core_tolerance() {
        for kind in [
            SyntheticKind::Uniform,
            SyntheticKind::Zipf(1.0),
            SyntheticKind::Zipf(0.5),
            SyntheticKind::GeoZipfMix,
        ] {
            for k in [2, 10, 1000, 100_000] {
                let d = make_distribution(&SyntheticSpec::new(kind, k).unwrap()).unwrap();
                let total: f64 = d.probs().iter().sum();
                assert!((total - 1.0).abs() <= 1e-12 * k as f64, "{kind} k={k}");
            }
        }
    }

    #[test]
    fn multinomial_edge_cases() {
        let u = Distribution::uniform(5).unwrap();
        assert_eq!(
            sample_multinomial(&u, 0, Seed::new(1, 2)),
            Histogram::zeros(5)
        );

        let pm = Distribution::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(
            sample_multinomial(&pm, 7, Seed::new(3, 4)).counts(),
            &[7, 0, 0]
        );

        let pm_last = Distribution::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(
            sample_multinomial(&pm_last, 7, Seed::new(3, 4)).counts(),
            &[0, 7, 0]
        );
    }

    #[test]
    fn multinomial_half_coin() {
        let n = 1_000_000;
        let d = Distribution::uniform(2).unwrap();
        let h = sample_multinomial(&d, n, Seed::new(11, 0));
        assert_eq!(h.n(), n);
        let frac = h.counts()[0] as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 5.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn poissonized_zero_budget() {
        let d = Distribution::uniform(4).unwrap();
        assert_eq!(
            sample_poissonized(&d, 0.0, Seed::new(0, 0)).unwrap(),
            Histogram::zeros(4)
        );
        assert!(sample_poissonized(&d, -1.0, Seed::new(0, 0)).is_err());
    }

    #[test]
    fn split_conserves_counts() {
        let m = Histogram::new(vec![0, 1, 5, 100, 0, 3]);
        let (a, b) = split_histogram(&m, Seed::new(5, 6));
        for ((x, y), z) in a.counts().iter().zip(b.counts()).zip(m.counts()) {
            assert_eq!(x + y, *z);
        }
        let (a, b) = split_histogram(&Histogram::zeros(3), Seed::new(5, 6));
        assert_eq!(a, Histogram::zeros(3));
        assert_eq!(b, Histogram::zeros(3));
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let d = Distribution::uniform(50).unwrap();
        let a = sample_multinomial(&d, 1000, Seed::new(9, 1));
        let b = sample_multinomial(&d, 1000, Seed::new(9, 1));
        let c = sample_multinomial(&d, 1000, Seed::new(9, 2));
        let e = sample_multinomial(&d, 1000, Seed::new(10, 1));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, e);
    }
}
