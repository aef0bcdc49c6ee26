//! Best uniform polynomial approximation by the Remez exchange algorithm.
//!
//! Internally the approximant is kept as a Chebyshev series on its interval,
//! which is well conditioned for evaluation at any degree we care about. The
//! external contract is the monomial basis: [`ChebApprox::coeffs`] returns
//! `a_0..a_L` with `p(x) = sum a_m x^m` on the approximation interval.
//!
//! Monomial coefficients of best approximants grow geometrically with the
//! degree, so evaluating them directly loses accuracy quickly. Anything that
//! only needs values of `p` should go through [`PolyEval`], which uses the
//! Chebyshev representation where one is available.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};

/// Anything that can be evaluated as a univariate real polynomial.
pub trait PolyEval {
    fn eval(&self, x: f64) -> f64;
}

/// A polynomial in the monomial basis, evaluated by Horner's rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial(pub Vec<f64>);

impl PolyEval for Monomial {
    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

impl<F: Fn(f64) -> f64> PolyEval for F {
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemezOptions {
    /// Relative gap allowed between the smallest and largest residual on the
    /// reference set before the iteration is declared converged.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for RemezOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 100,
        }
    }
}

/// A certified best uniform approximation of degree `L` on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebApprox {
    degree: usize,
    interval: (f64, f64),
    cheb: Vec<f64>,
    coeffs: Vec<f64>,
    error: f64,
    levelled: f64,
    alternation: Vec<f64>,
    iterations: usize,
}

impl ChebApprox {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    /// Monomial coefficients `a_0..a_L` on the approximation interval.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficients in the Chebyshev basis `T_j((2x - a - b) / (b - a))`.
    pub fn chebyshev_coeffs(&self) -> &[f64] {
        &self.cheb
    }

    /// Observed uniform error `max |f - p|` over the final residual extrema.
    pub fn error(&self) -> f64 {
        self.error
    }

    /// Absolute value of the levelled error from the last linear solve.
    pub fn levelled_error(&self) -> f64 {
        self.levelled
    }

    /// The `L + 2` ordered abscissae on which the residual equioscillates.
    pub fn alternation(&self) -> &[f64] {
        &self.alternation
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Value of `p(0)` computed from the Chebyshev series.
    pub fn constant_term(&self) -> f64 {
        self.eval(0.0)
    }

    fn to_unit(&self, x: f64) -> f64 {
        let (a, b) = self.interval;
        (2.0 * x - a - b) / (b - a)
    }
}

impl PolyEval for ChebApprox {
    fn eval(&self, x: f64) -> f64 {
        clenshaw(&self.cheb, self.to_unit(x))
    }
}

fn clenshaw(c: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * t * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + c.first().copied().unwrap_or(0.0)
}

/// Chebyshev-distributed points on `[a, b]`, ascending, endpoints included.
pub fn chebyshev_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "grid needs at least two points");
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut xs: Vec<f64> = (0..n)
        .map(|i| mid - half * (PI * i as f64 / (n - 1) as f64).cos())
        .collect();
    xs[0] = a;
    xs[n - 1] = b;
    xs
}

/// Maximum of `|f - p|` over a Chebyshev-spaced grid of `grid_size` points.
pub fn sup_error<P, F>(p: &P, f: F, interval: (f64, f64), grid_size: usize) -> Result<f64>
where
    P: PolyEval + ?Sized,
    F: Fn(f64) -> f64,
{
    if grid_size < 1000 {
        return domain(format!(
            "sup_error needs grid_size >= 1000, got {grid_size}"
        ));
    }
    let (a, b) = interval;
    Ok(chebyshev_grid(a, b, grid_size)
        .into_iter()
        .map(|x| (f(x) - p.eval(x)).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy)]
struct Extremum {
    x: f64,
    r: f64,
}

/// Degree-`degree` best uniform approximation of `f` on `interval`.
///
/// Only function values are used, so `f` may have unbounded derivatives at
/// the endpoints (e.g. `x log(1/x)` at 0).
pub fn remez<F>(
    f: F,
    interval: (f64, f64),
    degree: usize,
    opts: &RemezOptions,
) -> Result<ChebApprox>
where
    F: Fn(f64) -> f64,
{
    let (a, b) = interval;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return domain(format!("invalid interval [{a}, {b}]"));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return domain(format!("tolerance must be positive, got {}", opts.tol));
    }
    let eval_f = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_nan() {
            Err(Error::NanInput { x })
        } else {
            Ok(y)
        }
    };

    let npts = degree + 2;
    let mut reference = chebyshev_grid(a, b, npts);
    let mut last: Option<ChebApprox> = None;
    let mut bounds = (0.0, f64::INFINITY);

    for iter in 1..=opts.max_iters {
        let fx = reference
            .iter()
            .map(|&x| eval_f(x))
            .collect::<Result<Vec<_>>>()?;
        let (cheb, h) = solve_reference(&reference, &fx, interval, degree)?;
        let fscale = fx.iter().fold(0.0f64, |m, y| m.max(y.abs())).max(1.0);

        let mut approx = ChebApprox {
            degree,
            interval,
            coeffs: Vec::new(),
            cheb,
            error: h.abs(),
            levelled: h.abs(),
            alternation: reference.clone(),
            iterations: iter,
        };
        let resid = |x: f64| -> Result<f64> { Ok(eval_f(x)? - approx.eval(x)) };

        let extrema = locate_extrema(&resid, &reference, interval, npts)?;
        let upper = extrema.iter().fold(0.0f64, |m, e| m.max(e.r.abs()));

        let next = if extrema.len() >= npts {
            select_alternating(extrema, npts)
        } else {
            let r_ref = reference
                .iter()
                .map(|&x| resid(x))
                .collect::<Result<Vec<_>>>()?;
            single_exchange(&reference, &r_ref, &extrema)
        };
        let lower = next.iter().fold(f64::INFINITY, |m, e| m.min(e.r.abs()));
        let alternates = next.len() == npts && next.windows(2).all(|w| w[0].r * w[1].r < 0.0);

        approx.error = upper;
        approx.alternation = next.iter().map(|e| e.x).collect();
        bounds = (if alternates { lower } else { 0.0 }, upper);

        // Residuals are only resolved to a few ulps of |f|; at high degree the
        // relative gap can stall there before reaching `tol`.
        let noise = 32.0 * f64::EPSILON * fscale;
        let tiny = upper <= 2.0 * noise;
        if tiny || (alternates && upper - lower <= (opts.tol * upper).max(noise)) {
            approx.coeffs = chebyshev_to_monomial(&approx.cheb, interval);
            if tiny {
                approx.alternation = reference.clone();
            }
            return Ok(approx);
        }

        reference = next.iter().map(|e| e.x).collect();
        if reference.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Degenerate(
                "reference points collapsed during exchange".into(),
            ));
        }
        last = Some(approx);
    }

    let mut last = last.expect("max_iters >= 1 produces an iterate");
    last.coeffs = chebyshev_to_monomial(&last.cheb, interval);
    Err(Error::NotConverged {
        iterations: opts.max_iters,
        lower: bounds.0,
        upper: bounds.1,
        last: Box::new(last),
    })
}

/// Solves `sum_j c_j T_j(t_i) + (-1)^i h = f(x_i)` on the reference.
fn solve_reference(
    xs: &[f64],
    fx: &[f64],
    (a, b): (f64, f64),
    degree: usize,
) -> Result<(Vec<f64>, f64)> {
    let n = xs.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (i, &x) in xs.iter().enumerate() {
        let t = (2.0 * x - a - b) / (b - a);
        let (mut tm1, mut tj) = (1.0, t);
        m[(i, 0)] = 1.0;
        if degree >= 1 {
            m[(i, 1)] = t;
        }
        for j in 2..=degree {
            let tn = 2.0 * t * tj - tm1;
            tm1 = tj;
            tj = tn;
            m[(i, j)] = tj;
        }
        m[(i, n - 1)] = if i % 2 == 0 { 1.0 } else { -1.0 };
    }
    let rhs = DVector::from_column_slice(fx);
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Degenerate("singular reference system".into()))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite reference solution".into()));
    }
    let cheb = sol.iter().take(degree + 1).copied().collect();
    Ok((cheb, sol[n - 1]))
}

/// Local extrema of the residual, one per maximal run of constant sign.
/// Consecutive entries therefore alternate in sign.
fn locate_extrema<R>(
    resid: &R,
    reference: &[f64],
    (a, b): (f64, f64),
    npts: usize,
) -> Result<Vec<Extremum>>
where
    R: Fn(f64) -> Result<f64>,
{
    let mut xs = chebyshev_grid(a, b, 32 * npts);
    xs.extend_from_slice(reference);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let rs = xs.iter().map(|&x| resid(x)).collect::<Result<Vec<_>>>()?;

    let mut out: Vec<Extremum> = Vec::new();
    let mut start = 0;
    while start < xs.len() {
        let positive = rs[start] >= 0.0;
        let mut end = start;
        while end + 1 < xs.len() && (rs[end + 1] >= 0.0) == positive {
            end += 1;
        }
        let idx = (start..=end)
            .max_by(|&i, &j| rs[i].abs().total_cmp(&rs[j].abs()))
            .expect("non-empty run");
        let sign = if positive { 1.0 } else { -1.0 };
        let lo = xs[idx.saturating_sub(1)];
        let hi = xs[(idx + 1).min(xs.len() - 1)];
        let mut best = Extremum {
            x: xs[idx],
            r: rs[idx],
        };
        if hi > lo {
            let x = golden_max(|x| resid(x).map(|r| sign * r), lo, hi, 1e-12)?;
            let r = resid(x)?;
            if sign * r > sign * best.r {
                best = Extremum { x, r };
            }
        }
        out.push(best);
        start = end + 1;
    }
    Ok(out)
}

fn golden_max<G>(g: G, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut g1 = g(x1)?;
    let mut g2 = g(x2)?;
    while hi - lo > tol {
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = g(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = g(x1)?;
        }
    }
    Ok(if g1 > g2 { x1 } else { x2 })
}

/// Trims an alternating extremum list down to `n` points, dropping the
/// smallest residuals while keeping the signs alternating.
fn select_alternating(mut ext: Vec<Extremum>, n: usize) -> Vec<Extremum> {
    while ext.len() > n {
        let len = ext.len();
        let imin = (0..len)
            .min_by(|&i, &j| ext[i].r.abs().total_cmp(&ext[j].r.abs()))
            .expect("non-empty");
        if imin == 0 || imin == len - 1 {
            ext.remove(imin);
        } else if len - n == 1 {
            if ext[0].r.abs() < ext[len - 1].r.abs() {
                ext.remove(0);
            } else {
                ext.pop();
            }
        } else {
            let nb = if ext[imin - 1].r.abs() < ext[imin + 1].r.abs() {
                imin - 1
            } else {
                imin + 1
            };
            ext.remove(imin.max(nb));
            ext.remove(imin.min(nb));
        }
    }
    ext
}

/// Classic one-point exchange: swap the global maximum of the residual into
/// the reference while keeping the sign alternation.
fn single_exchange(reference: &[f64], r_ref: &[f64], extrema: &[Extremum]) -> Vec<Extremum> {
    let mut refs: Vec<Extremum> = reference
        .iter()
        .zip(r_ref)
        .map(|(&x, &r)| Extremum { x, r })
        .collect();
    let Some(star) = extrema
        .iter()
        .copied()
        .max_by(|p, q| p.r.abs().total_cmp(&q.r.abs()))
    else {
        return refs;
    };
    let same = |e: &Extremum| (e.r >= 0.0) == (star.r >= 0.0);
    let n = refs.len();
    if star.x < refs[0].x {
        if same(&refs[0]) {
            refs[0] = star;
        } else {
            refs.pop();
            refs.insert(0, star);
        }
    } else if star.x > refs[n - 1].x {
        if same(&refs[n - 1]) {
            refs[n - 1] = star;
        } else {
            refs.remove(0);
            refs.push(star);
        }
    } else {
        let i = refs
            .windows(2)
            .position(|w| w[0].x <= star.x && star.x <= w[1].x)
            .expect("star lies inside the reference hull");
        if same(&refs[i]) {
            refs[i] = star;
        } else {
            refs[i + 1] = star;
        }
    }
    refs
}

/// Converts a Chebyshev series on `[a, b]` to monomial coefficients in `x`.
pub fn chebyshev_to_monomial(cheb: &[f64], (a, b): (f64, f64)) -> Vec<f64> {
    let n = cheb.len();
    if n == 0 {
        return Vec::new();
    }
    // t = alpha * x + beta
    let alpha = 2.0 / (b - a);
    let beta = -(a + b) / (b - a);
    let mut out = vec![0.0; n];
    let mut t_prev = vec![0.0; n];
    let mut t_cur = vec![0.0; n];
    t_prev[0] = 1.0;
    out[0] += cheb[0];
    if n == 1 {
        return out;
    }
    t_cur[0] = beta;
    t_cur[1] = alpha;
    for m in 0..2 {
        out[m] += cheb[1] * t_cur[m];
    }
    for &c in &cheb[2..] {
        let mut t_next = vec![0.0; n];
        for m in 0..n {
            let mut v = 2.0 * beta * t_cur[m] - t_prev[m];
            if m > 0 {
                v += 2.0 * alpha * t_cur[m - 1];
            }
            t_next[m] = v;
        }
        for m in 0..n {
            out[m] += c * t_next[m];
        }
        t_prev = std::mem::replace(&mut t_cur, t_next);
    }
    out
}

/// `x -> s * p(x / s)` for an approximant `p` on `[0, 1]`.
///
/// If `p` approximates `phi(x) = x log(1/x)` on `[0, 1]` with error `E`, then
/// `s * p(x / s)` approximates `s * phi(x / s) = phi(x) + x log s` on
/// `[0, s]` with error `s * E`. [`Rescaled::phi_approx`] adds back the linear
/// term so the result approximates `phi` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    base: ChebApprox,
    scale: f64,
    coeffs: Vec<f64>,
}

impl Rescaled {
    /// `b_m = a_m / s^(m-1)`, so that `sum b_m x^m = s p(x / s)`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn base(&self) -> &ChebApprox {
        &self.base
    }

    /// Uniform error of the rescaled approximant on `[0, s]`.
    pub fn error(&self) -> f64 {
        self.scale * self.base.error()
    }

    /// Evaluator for `s p(x/s) + x log(1/s)`, the best approximant of `phi`
    /// on `[0, s]` when `p` is the best approximant of `phi` on `[0, 1]`.
    pub fn phi_approx(&self) -> impl Fn(f64) -> f64 + '_ {
        let lin = -self.scale.ln();
        move |x| self.eval(x) + lin * x
    }
}

impl PolyEval for Rescaled {
    fn eval(&self, x: f64) -> f64 {
        self.scale * self.base.eval(x / self.scale)
    }
}

pub fn rescale(p: &ChebApprox, target_right: f64) -> Result<Rescaled> {
    let s = target_right;
    if !(s > 0.0 && s.is_finite()) {
        return domain(format!("rescale target must be positive, got {s}"));
    }
    if p.interval() != (0.0, 1.0) {
        return domain(format!(
            "rescale expects an approximant on [0, 1], got {:?}",
            p.interval()
        ));
    }
    let mut coeffs = p.coeffs().to_vec();
    let mut factor = s; // s^(1 - m) for m = 0
    for c in coeffs.iter_mut() {
        *c *= factor;
        factor /= s;
    }
    Ok(Rescaled {
        base: p.clone(),
        scale: s,
        coeffs,
    })
}

/// `p - p(0)`: the approximant with its constant term removed.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroedApprox {
    base: ChebApprox,
    constant: f64,
    coeffs: Vec<f64>,
}

impl ZeroedApprox {
    /// `(0, a_1, ..., a_L)`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// The removed constant `a_0`.
    pub fn removed_constant(&self) -> f64 {
        self.constant
    }

    /// Certified uniform error bound `E + |a_0|`, at most `2E` when the
    /// approximated function vanishes at 0.
    pub fn error_bound(&self) -> f64 {
        self.base.error() + self.constant.abs()
    }
}

impl PolyEval for ZeroedApprox {
    fn eval(&self, x: f64) -> f64 {
        self.base.eval(x) - self.constant
    }
}

pub fn zero_constant_term(p: &ChebApprox) -> ZeroedApprox {
    let mut coeffs = p.coeffs().to_vec();
    let constant = coeffs.first().copied().unwrap_or(0.0);
    if let Some(c0) = coeffs.first_mut() {
        *c0 = 0.0;
    }
    ZeroedApprox {
        base: p.clone(),
        constant,
        coeffs,
    }
}
