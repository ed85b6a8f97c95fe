//! `L w = κ x_n^{γ−1} w_{x′x′} + w_{nn} + βγ w_n/x_n` on a rectangle
//! `[−a, a] × [0, b]`, Dirichlet data on the sides and top, `w_n = 0` on
//! the bottom.
//!
//! The solver discretizes the drift with a forward (upwind) difference,
//! which keeps the system an M-matrix for every `βγ` and makes the scheme
//! first order. The bottom row uses the limit of the operator as
//! `x_n → 0` with the ghost value `w_{−1} = w_1`. The tangential direction
//! is diagonalized by a discrete sine transform, so each sine mode is a
//! tridiagonal system in `x_n`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::{check_exponents, gamma, ModelProfile};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Node values on the `(nx + 1) × (ny + 1)` grid of `[−a, a] × [0, b]`,
/// stored row by row from the bottom.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub a: f64,
    pub b: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn from_fn(a: f64, b: f64, nx: usize, ny: usize, f: impl Fn(Vec2) -> f64) -> Self {
        let mut values = Vec::with_capacity((nx + 1) * (ny + 1));
        for k in 0..=ny {
            for i in 0..=nx {
                values.push(f(node(a, b, nx, ny, i, k)));
            }
        }
        GridField { a, b, nx, ny, values }
    }

    pub fn node(&self, i: usize, k: usize) -> Vec2 {
        node(self.a, self.b, self.nx, self.ny, i, k)
    }

    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[k * (self.nx + 1) + i]
    }

    /// Largest `|self − f|` over all nodes.
    pub fn max_error(&self, f: impl Fn(Vec2) -> f64) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..=self.ny {
            for i in 0..=self.nx {
                worst = worst.max((self.at(i, k) - f(self.node(i, k))).abs());
            }
        }
        worst
    }

    /// Largest `|value|` over nodes with `0 < i < nx`, `0 < k < ny`.
    pub fn interior_max_abs(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 1..self.ny {
            for i in 1..self.nx {
                worst = worst.max(self.at(i, k).abs());
            }
        }
        worst
    }
}

fn node(a: f64, b: f64, nx: usize, ny: usize, i: usize, k: usize) -> Vec2 {
    Vec2::new(-a + 2.0 * a * i as f64 / nx as f64, b * k as f64 / ny as f64)
}

/// Kernel element `w = p′x₁ + ½p₁₁x₁² + C_γ p_n x_n^{1+γ}` with
/// `p_n = −p₁₁/(1+β)` and `C_γ = c_U`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelPolynomial {
    pub p1: f64,
    pub p11: f64,
    pub pn: f64,
    pub c_gamma: f64,
    profile: ModelProfile,
}

impl KernelPolynomial {
    pub fn new(p11: f64, p1: f64, profile: &ModelProfile) -> Self {
        KernelPolynomial {
            p1,
            p11,
            pn: -p11 / (1.0 + profile.beta()),
            c_gamma: profile.c_u(),
            profile: *profile,
        }
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        let g = self.profile.gamma();
        self.p1 * x.x + 0.5 * self.p11 * x.x * x.x + self.c_gamma * self.pn * x.y.powf(1.0 + g)
    }

    /// `w_n`, which vanishes on `{x_n = 0}`.
    pub fn normal_derivative(&self, x: Vec2) -> f64 {
        let g = self.profile.gamma();
        self.c_gamma * self.pn * (1.0 + g) * x.y.powf(g)
    }

    /// `Lw` term by term from the closed-form derivatives.
    pub fn apply_exact(&self, x: Vec2) -> f64 {
        let g = self.profile.gamma();
        let bg = self.profile.beta() * g;
        let y = x.y;
        let tangential = self.profile.kappa() * y.powf(g - 1.0) * self.p11;
        let w_nn = self.c_gamma * self.pn * (1.0 + g) * g * y.powf(g - 1.0);
        tangential + w_nn + bg * self.normal_derivative(x) / y
    }
}

/// Dirichlet problem for `L` on `[−a, a] × [0, b]`.
#[derive(Clone)]
pub struct GrushinProblem {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nx: usize,
    pub ny: usize,
    data: Arc<dyn Fn(Vec2) -> f64 + Send + Sync>,
}

impl fmt::Debug for GrushinProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrushinProblem")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish_non_exhaustive()
    }
}

impl GrushinProblem {
    /// `data` supplies the Dirichlet values on the sides and the top.
    pub fn new(
        a: f64,
        b: f64,
        alpha: f64,
        beta: f64,
        nx: usize,
        ny: usize,
        data: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_exponents(alpha, beta)?;
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::invalid("rectangle sides must be positive"));
        }
        if nx < 4 || ny < 4 {
            return Err(Error::invalid(format!("grid needs at least 4 cells per side, got {nx}×{ny}")));
        }
        Ok(GrushinProblem { a, b, alpha, beta, nx, ny, data: Arc::new(data) })
    }

    pub fn data(&self, x: Vec2) -> f64 {
        (self.data)(x)
    }

    pub fn gamma(&self) -> f64 {
        gamma(self.alpha, self.beta)
    }

    pub fn spacing(&self) -> (f64, f64) {
        (2.0 * self.a / self.nx as f64, self.b / self.ny as f64)
    }

    fn kappa(&self) -> f64 {
        self.gamma().powf(self.beta / (1.0 + self.beta))
    }
}

/// Output of [`grushin_solve`].
#[derive(Clone, Debug)]
pub struct GrushinSolution {
    pub field: GridField,
    /// Relative residual after the direct solve and each refinement.
    pub history: Vec<f64>,
}

impl GrushinSolution {
    pub fn residual(&self) -> f64 {
        *self.history.last().unwrap_or(&f64::NAN)
    }
}

/// `Lw` at interior nodes by centered differences, with a second-order
/// one-sided `w_n` on the first row above the boundary; zero elsewhere.
pub fn grushin_apply(w: &GridField, problem: &GrushinProblem) -> Result<GridField> {
    if w.nx != problem.nx || w.ny != problem.ny || w.a != problem.a || w.b != problem.b {
        return Err(Error::invalid("grid field does not match the problem grid"));
    }
    let (hx, hy) = problem.spacing();
    let g = problem.gamma();
    let bg = problem.beta * g;
    let kappa = problem.kappa();
    let mut out = GridField { values: vec![0.0; w.values.len()], ..w.clone() };
    for k in 1..w.ny {
        let y = hy * k as f64;
        for i in 1..w.nx {
            let tx = (w.at(i - 1, k) - 2.0 * w.at(i, k) + w.at(i + 1, k)) / (hx * hx);
            let tyy = (w.at(i, k - 1) - 2.0 * w.at(i, k) + w.at(i, k + 1)) / (hy * hy);
            let ty = if k == 1 {
                (-3.0 * w.at(i, 1) + 4.0 * w.at(i, 2) - w.at(i, 3)) / (2.0 * hy)
            } else {
                (w.at(i, k + 1) - w.at(i, k - 1)) / (2.0 * hy)
            };
            out.values[k * (w.nx + 1) + i] = kappa * y.powf(g - 1.0) * tx + tyy + bg * ty / y;
        }
    }
    Ok(out)
}

/// Row coefficients of the solver's scheme: tangential weight, diagonal
/// normal weight, upper and lower neighbors.
struct Rows {
    c: Vec<f64>,
    dv: Vec<f64>,
    up: Vec<f64>,
    down: Vec<f64>,
}

fn rows(problem: &GrushinProblem) -> Rows {
    let (hx, hy) = problem.spacing();
    let g = problem.gamma();
    let bg = problem.beta * g;
    let kappa = problem.kappa();
    let ny = problem.ny;
    let mut r = Rows { c: vec![0.0; ny], dv: vec![0.0; ny], up: vec![0.0; ny], down: vec![0.0; ny] };
    // limit row: w_n/x_n → w_nn, and x_n^{γ−1} → 1 only for γ = 1; for γ < 1
    // the normal part dominates and the row reduces to w_0 = w_1
    r.c[0] = if (g - 1.0).abs() < 1e-12 { kappa / (hx * hx) } else { 0.0 };
    r.up[0] = 2.0 * (1.0 + bg) / (hy * hy);
    r.dv[0] = -r.up[0];
    for k in 1..ny {
        let y = hy * k as f64;
        r.c[k] = kappa * y.powf(g - 1.0) / (hx * hx);
        r.up[k] = 1.0 / (hy * hy) + bg / (y * hy);
        r.down[k] = 1.0 / (hy * hy);
        r.dv[k] = -2.0 / (hy * hy) - bg / (y * hy);
    }
    r
}

/// Unknowns are `i = 1..nx−1`, `k = 0..ny−1`, stored `[k][i−1]`.
fn apply_rows(r: &Rows, w: &[f64], m: usize, out: &mut [f64]) {
    let ny = r.c.len();
    for k in 0..ny {
        for i in 0..m {
            let idx = k * m + i;
            let mut v = r.dv[k] * w[idx] - 2.0 * r.c[k] * w[idx];
            if i > 0 {
                v += r.c[k] * w[idx - 1];
            }
            if i + 1 < m {
                v += r.c[k] * w[idx + 1];
            }
            if k + 1 < ny {
                v += r.up[k] * w[idx + m];
            }
            if k > 0 {
                v += r.down[k] * w[idx - m];
            }
            out[idx] = v;
        }
    }
}

/// Solve of the scheme by sine transform in `x′` and a tridiagonal sweep
/// per mode, followed by iterative refinement.
pub fn grushin_solve(problem: &GrushinProblem) -> Result<GrushinSolution> {
    let nx = problem.nx;
    let ny = problem.ny;
    let m = nx - 1;
    let r = rows(problem);
    let grid = |i: usize, k: usize| node(problem.a, problem.b, nx, ny, i, k);

    let mut rhs = vec![0.0; ny * m];
    for k in 0..ny {
        rhs[k * m] -= r.c[k] * problem.data(grid(0, k));
        rhs[k * m + m - 1] -= r.c[k] * problem.data(grid(nx, k));
    }
    for i in 0..m {
        rhs[(ny - 1) * m + i] -= r.up[ny - 1] * problem.data(grid(i + 1, ny));
    }

    // S[p][i] = sin(π (p+1)(i+1)/nx); S·S = (nx/2)·I
    let mut s = vec![0.0; m * m];
    for p in 0..m {
        for i in 0..m {
            s[p * m + i] = (PI * ((p + 1) * (i + 1)) as f64 / nx as f64).sin();
        }
    }
    let lambda: Vec<f64> = (0..m).map(|p| -4.0 * (PI * (p + 1) as f64 / (2.0 * nx as f64)).sin().powi(2)).collect();

    let solve = |b: &[f64]| -> Vec<f64> {
        let mut hat = vec![0.0; ny * m];
        for k in 0..ny {
            let row = &b[k * m..(k + 1) * m];
            for p in 0..m {
                let sp = &s[p * m..(p + 1) * m];
                hat[k * m + p] = sp.iter().zip(row).map(|(a, c)| a * c).sum();
            }
        }
        let mut cp = vec![0.0; ny];
        let mut dp = vec![0.0; ny];
        for p in 0..m {
            // Thomas sweep in k for mode p
            for k in 0..ny {
                let diag = r.c[k] * lambda[p] + r.dv[k];
                let lower = if k > 0 { r.down[k] } else { 0.0 };
                let upper = if k + 1 < ny { r.up[k] } else { 0.0 };
                let (pc, pd) = if k > 0 { (cp[k - 1], dp[k - 1]) } else { (0.0, 0.0) };
                let den = diag - lower * pc;
                cp[k] = upper / den;
                dp[k] = (hat[k * m + p] - lower * pd) / den;
            }
            for k in (0..ny).rev() {
                let next = if k + 1 < ny { hat[(k + 1) * m + p] } else { 0.0 };
                hat[k * m + p] = dp[k] - cp[k] * next;
            }
        }
        let mut w = vec![0.0; ny * m];
        let scale = 2.0 / nx as f64;
        for k in 0..ny {
            let row = &hat[k * m..(k + 1) * m];
            for i in 0..m {
                let mut v = 0.0;
                for p in 0..m {
                    v += s[p * m + i] * row[p];
                }
                w[k * m + i] = scale * v;
            }
        }
        w
    };

    let row_scale = (0..ny)
        .map(|k| 4.0 * r.c[k] + r.dv[k].abs() + r.up[k] + r.down[k])
        .fold(0.0, f64::max);
    let mut w = solve(&rhs);
    let mut aw = vec![0.0; ny * m];
    let mut history = Vec::new();
    const TOL: f64 = 1e-12;
    for _ in 0..4 {
        apply_rows(&r, &w, m, &mut aw);
        let res: Vec<f64> = rhs.iter().zip(&aw).map(|(b, a)| b - a).collect();
        let wmax = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let bmax = rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let rel = res.iter().fold(0.0f64, |a, v| a.max(v.abs())) / (row_scale * wmax + bmax).max(f64::MIN_POSITIVE);
        history.push(rel);
        if !rel.is_finite() {
            break;
        }
        if rel <= TOL {
            break;
        }
        let dw = solve(&res);
        for (a, d) in w.iter_mut().zip(&dw) {
            *a += d;
        }
    }
    let last = *history.last().unwrap();
    if !(last <= TOL) {
        return Err(Error::NotConverged { what: "grushin solve", iterations: history.len(), residual: last, history });
    }

    let field = GridField::from_fn(problem.a, problem.b, nx, ny, |_| 0.0);
    let mut field = field;
    for k in 0..=ny {
        for i in 0..=nx {
            let v = if k == ny || i == 0 || i == nx { problem.data(grid(i, k)) } else { w[k * m + i - 1] };
            field.values[k * (nx + 1) + i] = v;
        }
    }
    Ok(GrushinSolution { field, history })
}
