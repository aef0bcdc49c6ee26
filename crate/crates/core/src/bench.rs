//! Monte Carlo RMSE harness.
//!
//! Each `(distribution, n)` cell draws `trials` independent samples, one per
//! [`derive_seed`] stream, and every requested method is evaluated on the same
//! samples. Trials fan out over a rayon pool; results are reduced in trial
//! order, so the output does not depend on the number of workers.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::domain::{entropy, Distribution, Histogram};
use crate::error::{domain, Error, Result};
use crate::estimators::{
    miller_madow, phi_approximation, plugin_entropy, EstimatorConfig, PolyEstimator,
};
use crate::polyapprox::ChebApprox;
use crate::sampling::{
    make_distribution, sample_multinomial, sample_poissonized, split_histogram, Seed,
    SyntheticKind, SyntheticSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Poly,
    Plugin,
    MillerMadow,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Poly => "poly",
            Self::Plugin => "plugin",
            Self::MillerMadow => "mm",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "poly" => Ok(Self::Poly),
            "plugin" => Ok(Self::Plugin),
            "mm" => Ok(Self::MillerMadow),
            other => domain(format!(
                "unknown method `{other}` (expected poly, plugin or mm)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    #[default]
    Multinomial,
    Poissonized,
}

impl FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "multinomial" => Ok(Self::Multinomial),
            "poissonized" | "poisson" => Ok(Self::Poissonized),
            other => domain(format!("unknown sampling `{other}`")),
        }
    }
}

/// A distribution in the sweep: synthetic, or supplied directly.
#[derive(Debug, Clone, PartialEq)]
pub enum DistSource {
    Synthetic(SyntheticKind),
    Custom { label: String, dist: Distribution },
}

impl DistSource {
    pub fn label(&self) -> String {
        match self {
            Self::Synthetic(kind) => kind.to_string(),
            Self::Custom { label, .. } => label.clone(),
        }
    }

    fn materialize(&self, k: usize) -> Result<Distribution> {
        match self {
            Self::Synthetic(kind) => make_distribution(&SyntheticSpec::new(*kind, k)?),
            Self::Custom { label, dist } => {
                if dist.k() != k {
                    return domain(format!(
                        "distribution `{label}` has {} symbols, k = {k}",
                        dist.k()
                    ));
                }
                Ok(dist.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub dists: Vec<DistSource>,
    pub k: usize,
    pub n_grid: Vec<u64>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub sampling: Sampling,
    pub seed: u64,
    pub config: EstimatorConfig,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(dists: Vec<DistSource>, k: usize, n_grid: Vec<u64>) -> Self {
        Self {
            dists,
            k,
            n_grid,
            trials: 50,
            methods: vec![Method::Poly, Method::Plugin, Method::MillerMadow],
            sampling: Sampling::Multinomial,
            seed: 0,
            config: EstimatorConfig::default(),
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return domain("trials must be >= 1");
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return domain("n grid must be non-empty and positive");
        }
        if self.dists.is_empty() {
            return domain("at least one distribution is required");
        }
        if self.methods.is_empty() {
            return domain("at least one method is required");
        }
        if self.k < 2 {
            return domain(format!("alphabet size must be >= 2, got {}", self.k));
        }
        if self.dists.len() > 1 << 16 || self.n_grid.len() > 1 << 16 {
            return domain("at most 65536 distributions and grid points are supported");
        }
        if self.trials as u64 > u32::MAX as u64 {
            return domain("at most 2^32 trials are supported");
        }
        if self.threads == Some(0) {
            return domain("threads must be >= 1");
        }
        self.config.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dist: String,
    pub n: u64,
    pub method: Method,
    /// `sqrt(mean((est - H)^2))`.
    pub rmse: f64,
    /// `mean(est) - H`.
    pub bias: f64,
    /// Sample standard deviation of the estimates (denominator `trials - 1`),
    /// so that `rmse^2 = bias^2 + std^2 (trials - 1) / trials`.
    pub std: f64,
    /// Summed per-trial compute time in seconds, sampling included.
    pub wall_time: f64,
    pub error: Option<String>,
}

/// Stream layout: `dist_index << 48 | n_index << 32 | trial`.
pub fn derive_seed(base: u64, dist_index: usize, n_index: usize, trial: usize) -> Seed {
    assert!(dist_index < 1 << 16, "dist_index out of range");
    assert!(n_index < 1 << 16, "n_index out of range");
    assert!((trial as u64) < 1 << 32, "trial out of range");
    Seed::new(
        base,
        ((dist_index as u64) << 48) | ((n_index as u64) << 32) | trial as u64,
    )
}

/// Key mixed into the base seed for the thinning coins in split mode.
const SPLIT_SALT: u64 = 0x5851_f42d_4c95_7f2d;

type ApproxCache = HashMap<usize, Arc<ChebApprox>>;

/// Per-method `(estimate, compute seconds)` for one trial.
type TrialResults = Vec<(Result<f64>, f64)>;

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    match spec.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Domain(format!("cannot build thread pool: {e}")))?;
            pool.install(|| run_inner(spec))
        }
        None => run_inner(spec),
    }
}

fn run_inner(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let mut methods = spec.methods.clone();
    methods.sort();
    methods.dedup();
    let mut approx_cache = ApproxCache::new();
    let mut rows = Vec::new();

    for (di, source) in spec.dists.iter().enumerate() {
        let dist = source.materialize(spec.k)?;
        let truth = entropy(&dist);
        let label = source.label();
        for (ni, &n) in spec.n_grid.iter().enumerate() {
            let poly = if methods.contains(&Method::Poly) {
                Some(poly_estimator(spec, n, &mut approx_cache))
            } else {
                None
            };
            let per_trial: Vec<(f64, TrialResults)> = (0..spec.trials)
                .into_par_iter()
                .map(|t| {
                    run_trial(
                        spec,
                        &dist,
                        n,
                        derive_seed(spec.seed, di, ni, t),
                        &methods,
                        poly.as_ref(),
                    )
                })
                .collect();

            for (mi, &method) in methods.iter().enumerate() {
                let mut estimates = Vec::with_capacity(spec.trials);
                let mut wall_time = 0.0;
                let mut error = None;
                for (sample_time, results) in &per_trial {
                    let (res, t) = &results[mi];
                    wall_time += sample_time + t;
                    match res {
                        Ok(v) => estimates.push(*v),
                        Err(e) if error.is_none() => error = Some(e.to_string()),
                        Err(_) => {}
                    }
                }
                rows.push(summarize(
                    &label, n, method, truth, &estimates, wall_time, error,
                ));
            }
        }
    }
    Ok(rows)
}

fn poly_estimator(spec: &ExperimentSpec, n: u64, cache: &mut ApproxCache) -> Result<PolyEstimator> {
    let degree = spec.config.degree(spec.k, n)?;
    let approx = match cache.get(&degree) {
        Some(a) => a.clone(),
        None => {
            let a = Arc::new(phi_approximation(degree)?);
            cache.insert(degree, a.clone());
            a
        }
    };
    PolyEstimator::with_approx(spec.k, n, spec.config, &approx)
}

fn run_trial(
    spec: &ExperimentSpec,
    dist: &Distribution,
    n: u64,
    seed: Seed,
    methods: &[Method],
    poly: Option<&Result<PolyEstimator>>,
) -> (f64, TrialResults) {
    let start = Instant::now();
    let split = spec.config.split;
    // In split mode each half should look like a size-n sample.
    let budget = if split { 2 * n } else { n };
    let sample: Result<Histogram> = match spec.sampling {
        Sampling::Multinomial => Ok(sample_multinomial(dist, budget, seed)),
        Sampling::Poissonized => sample_poissonized(dist, budget as f64, seed),
    };
    let halves = match (&sample, split) {
        (Ok(h), true) => Some(split_histogram(
            h,
            Seed::new(seed.base ^ SPLIT_SALT, seed.stream),
        )),
        _ => None,
    };
    let sample_time = start.elapsed().as_secs_f64();

    let results = methods
        .iter()
        .map(|&m| {
            let start = Instant::now();
            let res = match &sample {
                Err(e) => Err(Error::Domain(e.to_string())),
                Ok(h) => {
                    let (est_hist, select) = match &halves {
                        Some((a, b)) => (a, Some(b)),
                        None => (h, None),
                    };
                    match m {
                        Method::Plugin => plugin_entropy(est_hist),
                        Method::MillerMadow => miller_madow(est_hist),
                        Method::Poly => match poly {
                            Some(Ok(p)) => p.estimate(est_hist, select),
                            Some(Err(e)) => Err(Error::Domain(e.to_string())),
                            None => Err(Error::Domain("polynomial estimator unavailable".into())),
                        },
                    }
                }
            };
            (res, start.elapsed().as_secs_f64())
        })
        .collect();
    (sample_time, results)
}

fn summarize(
    label: &str,
    n: u64,
    method: Method,
    truth: f64,
    estimates: &[f64],
    wall_time: f64,
    error: Option<String>,
) -> ResultRow {
    if let Some(e) = error {
        return ResultRow {
            dist: label.to_string(),
            n,
            method,
            rmse: f64::NAN,
            bias: f64::NAN,
            std: f64::NAN,
            wall_time,
            error: Some(e),
        };
    }
    let t = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / t;
    let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / t;
    let var = if estimates.len() > 1 {
        estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (t - 1.0)
    } else {
        0.0
    };
    ResultRow {
        dist: label.to_string(),
        n,
        method,
        rmse: mse.sqrt(),
        bias: mean - truth,
        std: var.sqrt(),
        wall_time,
        error: None,
    }
}

pub const RESULTS_HEADER: &str = "dist,n,method,rmse,bias,std,wall_time";

/// CSV text for `rows`. With `include_timing = false` the wall-time column is
/// written as 0 so that repeated runs produce byte-identical files.
pub fn format_results(rows: &[ResultRow], include_timing: bool) -> String {
    let mut out = String::new();
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let wall = if include_timing { r.wall_time } else { 0.0 };
        match &r.error {
            None => writeln!(
                out,
                "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.dist, r.n, r.method, r.rmse, r.bias, r.std, wall
            ),
            Some(msg) => writeln!(
                out,
                "{},{},{},error: {},NaN,NaN,{:.16e}",
                r.dist,
                r.n,
                r.method,
                msg.replace([',', '\n'], ";"),
                wall
            ),
        }
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn write_results(rows: &[ResultRow], path: &Path, include_timing: bool) -> Result<()> {
    std::fs::write(path, format_results(rows, include_timing)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Comma list (`100,300,1000`) or geometric grid `lo:hi:points`.
pub fn parse_n_grid(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    let bad = || Error::Domain(format!("bad n grid `{s}`"));
    let grid: Vec<u64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, pts] = parts.as_slice() else {
            return Err(bad());
        };
        let lo: f64 = lo.parse().map_err(|_| bad())?;
        let hi: f64 = hi.parse().map_err(|_| bad())?;
        let pts: usize = pts.parse().map_err(|_| bad())?;
        if !(lo >= 1.0 && hi >= lo && pts >= 1) {
            return Err(bad());
        }
        let mut g: Vec<u64> = (0..pts)
            .map(|i| {
                let t = if pts == 1 {
                    0.0
                } else {
                    i as f64 / (pts - 1) as f64
                };
                (lo * (hi / lo).powf(t)).round() as u64
            })
            .collect();
        g.dedup();
        g
    } else {
        s.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .map(|v| v.map(|x| x.round() as u64))
            .collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.contains(&0) {
        return Err(bad());
    }
    Ok(grid)
}
