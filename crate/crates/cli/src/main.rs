use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use entropy_core::bench::{self, DistSource, ExperimentSpec, Method, Sampling};
use entropy_core::estimators::{
    self, phi_approximation, AdaptiveZeroing, EstimatorConfig, PolyEstimator,
};
use entropy_core::io::{self, CoefficientTable};
use entropy_core::lowerbound::{
    build_moment_matched_pair, change_of_measure, log_lb_constant_scan, poisson_mixture_tv,
    tv_moment_bound, DiscreteMeasure,
};
use entropy_core::polyapprox::{remez, RemezOptions};
use entropy_core::sampling::{split_histogram, Seed, SyntheticKind};

#[derive(Parser)]
#[command(
    name = "entropy",
    version,
    about = "Entropy estimation on large alphabets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo RMSE sweep over synthetic distributions.
    Simulate(SimulateArgs),
    /// Best polynomial approximations of x log(1/x) on [0, 1].
    Remez(RemezArgs),
    /// Estimate entropy from a histogram file.
    Estimate(EstimateArgs),
    /// Moment-matched priors and lower-bound quantities.
    Lowerbound(LowerboundArgs),
}

#[derive(Args, Clone, Copy)]
struct Constants {
    #[arg(long, default_value_t = 1.6)]
    c0: f64,
    #[arg(long, default_value_t = 3.5)]
    c1: f64,
    #[arg(long, default_value_t = 1.6)]
    c2: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 10_000)]
    k: usize,
    /// Comma list of `uniform`, `zipf:<alpha>`, `mix`.
    #[arg(long, default_value = "uniform,zipf:1,zipf:0.5,mix")]
    dists: String,
    /// Comma list or geometric grid `lo:hi:points`.
    #[arg(long)]
    n_grid: String,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Comma list of `poly`, `plugin`, `mm`.
    #[arg(long, default_value = "poly,plugin,mm")]
    methods: String,
    #[arg(long, value_enum, default_value_t = SamplingArg::Multinomial)]
    sampling: SamplingArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// Write 0 in the wall_time column so output is byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    constants: Constants,
    #[arg(long)]
    split: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Multinomial,
    Poissonized,
}

#[derive(Args)]
struct RemezArgs {
    /// Degree list or range `lo:hi` (at most 400).
    #[arg(long)]
    degrees: String,
    /// Directory for `phi_L<degree>.csv` tables; stdout if absent.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Poly,
    Plugin,
    Mm,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    /// Sample size; defaults to the histogram total (half of it with --split).
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, value_enum, default_value_t = MethodArg::Poly)]
    method: MethodArg,
    #[command(flatten)]
    constants: Constants,
    #[arg(long)]
    adaptive: bool,
    /// In adaptive mode, keep the approximant and only set g(0) = 0.
    #[arg(long)]
    zero_count_only: bool,
    #[arg(long)]
    no_clamp_upper: bool,
    /// Thin the sample into an estimation half and a selection half.
    #[arg(long)]
    split: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report bits instead of nats.
    #[arg(long)]
    bits: bool,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Emit {
    Pair,
    Prior,
    Tv,
    Scan,
}

#[derive(Args)]
struct LowerboundArgs {
    #[arg(long = "L", default_value_t = 10)]
    l: usize,
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Emit::Pair)]
    emit: Emit,
    /// Poisson scale for `tv`.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Degree constant for `scan`.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Comma list of L values for `scan`.
    #[arg(long, default_value = "10,20,40")]
    l_values: String,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(text.as_bytes()).is_err() {
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Remez(a) => remez_tables(a),
        Command::Estimate(a) => estimate(a),
        Command::Lowerbound(a) => lowerbound(a),
    }
}

fn config(c: Constants) -> EstimatorConfig {
    EstimatorConfig {
        c0: c.c0,
        c1: c.c1,
        c2: c.c2,
        ..Default::default()
    }
}

fn simulate(a: SimulateArgs) -> Result<String> {
    let dists = a
        .dists
        .split(',')
        .map(|s| s.parse::<SyntheticKind>().map(DistSource::Synthetic))
        .collect::<entropy_core::Result<Vec<_>>>()?;
    let methods = a
        .methods
        .split(',')
        .map(str::parse::<Method>)
        .collect::<entropy_core::Result<Vec<_>>>()?;
    let spec = ExperimentSpec {
        dists,
        k: a.k,
        n_grid: bench::parse_n_grid(&a.n_grid)?,
        trials: a.trials,
        methods,
        sampling: match a.sampling {
            SamplingArg::Multinomial => Sampling::Multinomial,
            SamplingArg::Poissonized => Sampling::Poissonized,
        },
        seed: a.seed,
        config: EstimatorConfig {
            split: a.split,
            ..config(a.constants)
        },
        threads: a.threads,
    };
    let rows = bench::run_experiment(&spec)?;
    bench::write_results(&rows, &a.out, !a.no_timing)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    Ok(format!(
        "wrote {} rows to {}{}\n",
        rows.len(),
        a.out.display(),
        if failed > 0 {
            format!(" ({failed} with errors)")
        } else {
            String::new()
        }
    ))
}

fn parse_degrees(s: &str) -> Result<Vec<usize>> {
    let degrees: Vec<usize> = if let Some((lo, hi)) = s.split_once(':') {
        let lo: usize = lo.trim().parse().context("bad degree range")?;
        let hi: usize = hi.trim().parse().context("bad degree range")?;
        if lo > hi {
            bail!("empty degree range {s}");
        }
        (lo..=hi).collect()
    } else {
        s.split(',')
            .map(|d| {
                d.trim()
                    .parse()
                    .with_context(|| format!("bad degree `{d}`"))
            })
            .collect::<Result<_>>()?
    };
    if let Some(&d) = degrees.iter().find(|&&d| d > 400) {
        bail!("degree {d} exceeds the supported maximum of 400");
    }
    Ok(degrees)
}

fn remez_tables(a: RemezArgs) -> Result<String> {
    let degrees = parse_degrees(&a.degrees)?;
    if a.out_dir.is_none() && degrees.len() != 1 {
        bail!("--out-dir is required for more than one degree");
    }
    if a.tol.is_nan() || a.tol <= 0.0 {
        bail!("--tol must be positive");
    }
    let opts = RemezOptions {
        tol: a.tol,
        max_iters: a.max_iters,
    };
    let mut report = String::new();
    for d in degrees {
        let approx = remez(entropy_core::domain::phi_unchecked, (0.0, 1.0), d, &opts)
            .with_context(|| format!("degree {d}"))?;
        let table = CoefficientTable::from(&approx);
        match &a.out_dir {
            None => report.push_str(&io::format_table(&table)),
            Some(dir) => {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(format!("phi_L{d}.csv"));
                io::write_table(&table, &path)?;
                writeln!(report, "{},{:.16e}", path.display(), approx.error())?;
            }
        }
    }
    Ok(report)
}

fn estimate(a: EstimateArgs) -> Result<String> {
    let hist = io::read_histogram(&a.input)?.padded(a.k)?;
    let total = hist.n();
    let cfg = EstimatorConfig {
        clamp_upper: !a.no_clamp_upper,
        adaptive: a.adaptive,
        zeroing: if a.zero_count_only {
            AdaptiveZeroing::ZeroCountOnly
        } else {
            AdaptiveZeroing::Coefficient
        },
        split: a.split,
        ..config(a.constants)
    };
    cfg.validate()?;
    let expected = if a.split { total / 2 } else { total };
    let n = a.n.unwrap_or(expected);
    if n != expected {
        bail!(
            "--n {n} does not match the histogram ({} samples{})",
            total,
            if a.split { ", halved by --split" } else { "" }
        );
    }
    if n == 0 {
        bail!("histogram is empty");
    }

    let (label, value) = match a.method {
        MethodArg::Plugin => ("plugin", estimators::plugin_entropy(&hist)?),
        MethodArg::Mm => ("mm", estimators::miller_madow(&hist)?),
        MethodArg::Poly => {
            let approx = phi_approximation(cfg.degree(a.k, n)?)?;
            let est = PolyEstimator::with_approx(a.k, n, cfg, &approx)?;
            let v = if a.split {
                let (est_half, sel_half) = split_histogram(&hist, Seed::new(a.seed, 0));
                est.estimate(&est_half, Some(&sel_half))?
            } else {
                est.estimate(&hist, None)?
            };
            ("poly", v)
        }
    };
    let (value, unit) = if a.bits {
        (value / std::f64::consts::LN_2, "bits")
    } else {
        (value, "nats")
    };
    Ok(format!("method,estimate_{unit}\n{label},{value:.16e}\n"))
}

fn measure_table(out: &mut String, name: &str, m: &DiscreteMeasure) -> Result<()> {
    writeln!(out, "# {name}")?;
    writeln!(out, "atom,weight")?;
    for (x, w) in m.atoms().iter().zip(m.weights()) {
        writeln!(out, "{x:.16e},{w:.16e}")?;
    }
    Ok(())
}

fn lowerbound(a: LowerboundArgs) -> Result<String> {
    let mut out = String::new();
    if a.emit == Emit::Scan {
        let ls = a
            .l_values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<usize>()
                    .with_context(|| format!("bad L value `{v}`"))
            })
            .collect::<Result<Vec<_>>>()?;
        writeln!(out, "L,error")?;
        for row in log_lb_constant_scan(&ls, a.c)? {
            writeln!(out, "{},{:.16e}", row.l, row.error)?;
        }
        return Ok(out);
    }

    let pair = build_moment_matched_pair(a.l, a.eta)?;
    match a.emit {
        Emit::Pair => {
            writeln!(out, "# separation {:.16e}", pair.separation)?;
            measure_table(&mut out, "X", &pair.x)?;
            measure_table(&mut out, "X'", &pair.x_prime)?;
        }
        Emit::Prior => {
            let prior = change_of_measure(&pair, a.alpha)?;
            measure_table(&mut out, "U", &prior.u)?;
            measure_table(&mut out, "U'", &prior.u_prime)?;
        }
        Emit::Tv => {
            let prior = change_of_measure(&pair, a.alpha)?;
            let tv = poisson_mixture_tv(&prior.u, &prior.u_prime, a.scale)?;
            let support = a.scale * prior.lambda_max;
            writeln!(out, "scale,tv,truncation,bound")?;
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                a.scale,
                tv.tv,
                tv.truncation,
                tv_moment_bound(support, a.l)
            )?;
        }
        Emit::Scan => unreachable!(),
    }
    Ok(out)
}
