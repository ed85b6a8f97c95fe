//! Exact one-dimensional transport `T = G⁻¹∘F` between densities
//! `t^α·a(t)` on `[0, 1]`.
//!
//! ```
//! use degenerate_ot::transport1d::{fit_exponent, solve_1d, Density1D};
//!
//! let f = Density1D::power(2.0).unwrap();
//! let g = Density1D::power(0.0).unwrap();
//! let map = solve_1d(&f, &g, 64).unwrap();
//! let fit = fit_exponent(&map, (1e-4, 1e-1)).unwrap();
//! assert!((fit.estimate - 3.0).abs() < 1e-6);
//! ```

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{loglog_fit, ExponentFit};

/// Deepest dyadic level `2^{-k}` carried by CDF tables and map grids.
const LEVELS: usize = 200;
/// Dyadic nodes `2^{-k}` added to every map grid.
const GRID_LEVELS: i32 = 60;

/// Coefficient `a(t)` of a one-dimensional density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Coefficient1D {
    /// `Σ c_k t^k`.
    Polynomial { coeffs: Vec<f64> },
    /// `value·exp(rate·t)`.
    Exponential { value: f64, rate: f64 },
}

impl Coefficient1D {
    pub fn constant(c: f64) -> Self {
        Coefficient1D::Polynomial { coeffs: vec![c] }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Coefficient1D::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            Coefficient1D::Exponential { value, rate } => value * (rate * t).exp(),
        }
    }
}

/// The normalized density `t^α·a(t)/Z` on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Density1D {
    alpha: f64,
    coeff: Coefficient1D,
    /// mass of `[2^{-k-1}, 2^{-k}]` before normalization, `k = 0..LEVELS`
    level_mass: Vec<f64>,
    /// unnormalized mass of `[0, 2^{-k}]`
    cumulative: Vec<f64>,
    total: f64,
}

impl Density1D {
    pub fn new(alpha: f64, coeff: Coefficient1D) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        // positivity on a fine sample; the coefficient families are smooth
        for i in 0..=1024 {
            let t = i as f64 / 1024.0;
            let a = coeff.eval(t);
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::invalid(format!("coefficient must be positive on [0,1], a({t}) = {a}")));
            }
        }
        let mut d = Density1D { alpha, coeff, level_mass: Vec::new(), cumulative: Vec::new(), total: 0.0 };
        d.level_mass = (0..LEVELS)
            .map(|k| {
                let hi = 0.5f64.powi(k as i32);
                d.integral(0.5 * hi, hi)
            })
            .collect();
        // tail below the deepest level: a(0)·t^{α+1}/(α+1)
        let floor = 0.5f64.powi(LEVELS as i32);
        let mut tail = d.coeff.eval(0.0) * floor.powf(alpha + 1.0) / (alpha + 1.0);
        let mut cumulative = vec![0.0; LEVELS + 1];
        cumulative[LEVELS] = tail;
        for k in (0..LEVELS).rev() {
            tail += d.level_mass[k];
            cumulative[k] = tail;
        }
        d.total = cumulative[0];
        d.cumulative = cumulative;
        Ok(d)
    }

    /// `(1+α)t^α`, whose CDF is `t^{1+α}`.
    pub fn power(alpha: f64) -> Result<Self> {
        Self::new(alpha, Coefficient1D::constant(1.0 + alpha))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn coefficient(&self) -> &Coefficient1D {
        &self.coeff
    }

    /// Normalized density value.
    pub fn pdf(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        t.powf(self.alpha) * self.coeff.eval(t) / self.total
    }

    fn raw(&self, t: f64) -> f64 {
        t.powf(self.alpha) * self.coeff.eval(t)
    }

    /// Unnormalized `∫_a^b`, for `[a, b]` inside one dyadic level.
    fn integral(&self, a: f64, b: f64) -> f64 {
        adaptive_gauss(&|t| self.raw(t), a, b, 0)
    }

    /// `F(t) = ∫₀ᵗ f`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        // level k with 2^{-k-1} < t <= 2^{-k}
        let k = (-t.log2()).floor() as i64;
        let k = k.max(0) as usize;
        if k >= LEVELS {
            return self.coeff.eval(0.0) * t.powf(self.alpha + 1.0) / (self.alpha + 1.0) / self.total;
        }
        let lo = 0.5f64.powi(k as i32 + 1);
        let (lo, k) = if t <= lo { (0.5 * lo, k + 1) } else { (lo, k) };
        let below = self.cumulative.get(k + 1).copied().unwrap_or(0.0);
        (below + self.integral(lo, t)) / self.total
    }

    /// `F⁻¹(s)` by bracketing on the dyadic table and relative bisection.
    pub fn quantile(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        let target = s * self.total;
        // level whose cumulative interval contains the target
        let mut k = 0;
        while k < LEVELS && self.cumulative[k + 1] >= target {
            k += 1;
        }
        if k >= LEVELS {
            let a0 = self.coeff.eval(0.0);
            return (target * (self.alpha + 1.0) / a0).powf(1.0 / (self.alpha + 1.0));
        }
        let start = 0.5f64.powi(k as i32 + 1);
        let mut lo = start;
        let mut hi = 2.0 * start;
        let base = self.cumulative[k + 1];
        let need = target - base;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.integral(start, mid) < need {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

fn gauss_nodes(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static G10: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static G20: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match n {
        10 => G10.get_or_init(|| gauss_legendre(10)),
        20 => G20.get_or_init(|| gauss_legendre(20)),
        _ => unreachable!("only 10- and 20-point rules are tabulated"),
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_nodes(n);
    let m = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    x.iter().zip(w).map(|(xi, wi)| wi * f(m + r * xi)).sum::<f64>() * r
}

fn adaptive_gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, depth: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let coarse = gauss(f, a, b, 10);
    let fine = gauss(f, a, b, 20);
    if (fine - coarse).abs() <= 1e-15 * fine.abs() || depth >= 30 {
        return fine;
    }
    // grade toward the left end, where t^α is least smooth
    let m = a + 0.5 * (b - a);
    adaptive_gauss(f, a, m, depth + 1) + adaptive_gauss(f, m, b, depth + 1)
}

/// Monotone map sampled on a grid, queried by monotone cubic interpolation.
#[derive(Clone, Debug)]
pub struct MonotoneMap {
    t: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneMap {
    /// Builds a map from nondecreasing samples that start at `(0, 0)` and
    /// end at `(1, 1)`.
    pub fn from_samples(t: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if t.len() != values.len() || t.len() < 2 {
            return Err(Error::invalid("map needs matching samples, at least two"));
        }
        if t[0] != 0.0 || *t.last().unwrap() != 1.0 || values[0] != 0.0 || *values.last().unwrap() != 1.0 {
            return Err(Error::invalid("map must send 0 to 0 and 1 to 1"));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) || values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("map samples must be increasing in t and nondecreasing in value"));
        }
        let slopes = pchip_slopes(&t, &values);
        Ok(MonotoneMap { t, values, slopes })
    }

    pub fn grid(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let i = self.t.partition_point(|v| *v <= x).saturating_sub(1).min(self.t.len() - 2);
        let (x0, x1) = (self.t[i], self.t[i + 1]);
        let h = x1 - x0;
        let s = (x - x0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * d1
    }

    /// Samples at the dyadic nodes `2^{-k}` inside `window`.
    pub fn dyadic_samples(&self, window: (f64, f64)) -> Vec<(f64, f64)> {
        self.t
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| {
                let k = -t.log2();
                **t >= window.0 && **t <= window.1 && k.fract() == 0.0
            })
            .map(|(t, v)| (*t, *v))
            .collect()
    }
}

/// Fritsch–Carlson slopes.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    m
}

/// Grid of `grid_n + 1` uniform nodes merged with the dyadic nodes `2^{-k}`.
pub fn map_grid(grid_n: usize) -> Vec<f64> {
    let mut t: Vec<f64> = (0..=grid_n).map(|i| i as f64 / grid_n as f64).collect();
    t.extend((1..=GRID_LEVELS).map(|k| 0.5f64.powi(k)));
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// `T = G⁻¹∘F`, the monotone rearrangement of `f` onto `g`.
pub fn solve_1d(f: &Density1D, g: &Density1D, grid_n: usize) -> Result<MonotoneMap> {
    if grid_n < 16 {
        return Err(Error::invalid(format!("grid_n must be at least 16, got {grid_n}")));
    }
    let t = map_grid(grid_n);
    let values: Vec<f64> = t
        .iter()
        .map(|&ti| if ti == 0.0 || ti == 1.0 { ti } else { g.quantile(f.cdf(ti)) })
        .collect();
    // enforce monotonicity against last-ulp wobble
    let mut values = values;
    for i in 1..values.len() {
        if values[i] < values[i - 1] {
            values[i] = values[i - 1];
        }
    }
    MonotoneMap::from_samples(t, values)
}

/// Largest `|F(t_i) − G(T(t_i))|` over the map grid.
pub fn mass_balance_defect(f: &Density1D, g: &Density1D, map: &MonotoneMap) -> f64 {
    map.grid()
        .iter()
        .zip(map.values())
        .map(|(t, v)| (f.cdf(*t) - g.cdf(*v)).abs())
        .fold(0.0, f64::max)
}

/// Slope of `log T` against `log t` over the dyadic nodes in `window`.
pub fn fit_exponent(map: &MonotoneMap, window: (f64, f64)) -> Result<ExponentFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && lo < hi && hi <= 0.5) {
        return Err(Error::invalid(format!("window must satisfy 0 < t_min < t_max <= 1/2, got ({lo}, {hi})")));
    }
    let samples = map.dyadic_samples(window);
    if samples.len() < 8 {
        return Err(Error::invalid(format!(
            "window ({lo}, {hi}) holds {} dyadic points, need at least 8",
            samples.len()
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
    let mut fit = loglog_fit(&x, &y)?;
    fit.window = window;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn closed_form_cdfs() {
        let f = Density1D::power(1.5).unwrap();
        for t in [1e-30f64, 1e-9, 0.013, 0.25, 0.5, 0.77] {
            let exact = t.powf(2.5);
            assert!((f.cdf(t) - exact).abs() <= 1e-14 * exact.max(1e-300) + 1e-16, "{t}");
            assert!((f.quantile(exact) - t).abs() <= 1e-14 * t, "{t}");
        }
    }

    #[test]
    fn power_maps_are_exact() {
        for (a, b) in [(2.0, 0.0), (0.0, 1.0), (1.0, 2.0)] {
            let f = Density1D::power(a).unwrap();
            let g = Density1D::power(b).unwrap();
            let map = solve_1d(&f, &g, 32).unwrap();
            let gamma = (1.0 + a) / (1.0 + b);
            for (t, v) in map.grid().iter().zip(map.values()) {
                let exact = t.powf(gamma);
                assert!((v - exact).abs() <= 1e-13 * exact + 1e-300, "{a} {b} {t} {v}");
            }
            assert!(mass_balance_defect(&f, &g, &map) <= 1e-12);
        }
    }

    #[test]
    fn identity_when_equal() {
        let f = Density1D::new(1.0, Coefficient1D::Polynomial { coeffs: vec![1.0, 1.0] }).unwrap();
        let map = solve_1d(&f, &f, 16).unwrap();
        for (t, v) in map.grid().iter().zip(map.values()) {
            assert!((t - v).abs() <= 1e-14 * t.max(1e-300));
        }
        let fit = fit_exponent(&map, (1e-4, 1e-1)).unwrap();
        assert!((fit.estimate - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fit_window_needs_eight_points() {
        let f = Density1D::power(0.0).unwrap();
        let map = solve_1d(&f, &f, 16).unwrap();
        assert!(fit_exponent(&map, (0.01, 0.5)).is_err());
        assert!(fit_exponent(&map, (1e-3, 0.6)).is_err());
    }

    #[test]
    fn rejects_nonpositive_coefficient() {
        assert!(Density1D::new(1.0, Coefficient1D::Polynomial { coeffs: vec![1.0, -2.0] }).is_err());
        let f = Density1D::power(0.0).unwrap();
        assert!(solve_1d(&f, &f, 8).is_err());
    }
}
