//! Log-domain Sinkhorn iterations with ε-scaling.

use super::discrete::DiscreteMeasure;
use super::solution::{CostConvention, TransportSolution};
use crate::error::{Error, Result};

/// Smallest admissible final ε relative to the squared diameter.
pub const MIN_EPS_FACTOR: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct EntropicOptions {
    /// Strictly decreasing regularization levels, in units of the cost.
    pub schedule: Vec<f64>,
    /// Iteration budget per level.
    pub max_iter: usize,
    /// Total-variation marginal tolerance at the last level.
    pub tol: f64,
    /// Tolerance at the first level; intermediate levels interpolate
    /// geometrically.
    pub stage_tol: f64,
    /// Coupling entries below this mass are dropped from the sparse output.
    pub threshold: f64,
    /// Largest `m + n` for which stalled Sinkhorn levels switch to dense
    /// Newton steps on the dual.
    pub newton_max_atoms: usize,
}

impl EntropicOptions {
    /// `stages` levels from `start` down to `end`, geometrically spaced.
    pub fn geometric(start: f64, end: f64, stages: usize) -> Self {
        let stages = stages.max(1);
        let schedule = if stages == 1 {
            vec![end]
        } else {
            let r = (end / start).powf(1.0 / (stages - 1) as f64);
            (0..stages).map(|k| if k + 1 == stages { end } else { start * r.powi(k as i32) }).collect()
        };
        EntropicOptions { schedule, max_iter: 100_000, tol: 1e-8, stage_tol: 1e-3, threshold: 1e-15, newton_max_atoms: 1200 }
    }

    /// Default schedule for a pair of measures: from `diam²/10` down to the
    /// smallest admissible level, halving only every few stages.
    pub fn for_measures(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Self {
        let d2 = joint_diameter(mu, nu).powi(2).max(f64::MIN_POSITIVE);
        Self::geometric(0.1 * d2, MIN_EPS_FACTOR * d2, 13)
    }
}

/// Marginal violations below this are roundoff.
const VIOLATION_FLOOR: f64 = 1e-13;

/// Per-level diagnostics.
#[derive(Clone, Debug, Default)]
pub struct EntropicReport {
    pub epsilons: Vec<f64>,
    /// Marginal violation at the end of each level.
    pub violations: Vec<f64>,
    /// `⟨C, π⟩` at the end of each level.
    pub costs: Vec<f64>,
    pub iterations: Vec<usize>,
}

impl EntropicReport {
    /// Whether `⟨C, π⟩` never increased from one level to the next.
    pub fn cost_nonincreasing(&self, rtol: f64) -> bool {
        self.costs.windows(2).all(|w| w[1] <= w[0] * (1.0 + rtol) + 1e-300)
    }

    /// Whether the level violations never increased, up to roundoff.
    pub fn violations_nonincreasing(&self) -> bool {
        self.violations.windows(2).all(|w| w[1] <= w[0].max(VIOLATION_FLOOR))
    }
}

/// Entropic coupling for `½|x − y|²`.
pub fn solve_entropic(mu: &DiscreteMeasure, nu: &DiscreteMeasure, opts: &EntropicOptions) -> Result<TransportSolution> {
    solve_entropic_report(mu, nu, opts).map(|(s, _)| s)
}

pub fn solve_entropic_report(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: &EntropicOptions,
) -> Result<(TransportSolution, EntropicReport)> {
    let sched = &opts.schedule;
    if sched.is_empty() {
        return Err(Error::invalid("ε schedule is empty"));
    }
    if sched.iter().any(|e| !(*e > 0.0 && e.is_finite())) || sched.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("ε schedule must be positive and strictly decreasing"));
    }
    let d2 = joint_diameter(mu, nu).powi(2);
    let last = *sched.last().unwrap();
    if last < MIN_EPS_FACTOR * d2 * (1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "final ε = {last:e} is below {MIN_EPS_FACTOR:e}·diam² = {:e}",
            MIN_EPS_FACTOR * d2
        )));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::invalid("tolerance and iteration budget must be positive"));
    }

    let m = mu.len();
    let n = nu.len();
    let conv = CostConvention::HalfSquared;
    let mut c = Vec::with_capacity(m * n);
    for x in mu.points() {
        for y in nu.points() {
            c.push(conv.cost(*x, *y));
        }
    }
    let a = mu.weights();
    let b = nu.weights();
    let log_a: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|v| v.ln()).collect();
    // π_ij = a_i b_j exp((φ_i + ψ_j − C_ij)/ε)
    let mut phi = vec![0.0; m];
    let mut psi = vec![0.0; n];
    let mut report = EntropicReport::default();
    let stages = sched.len();
    let mut prev_violation = f64::INFINITY;

    for (k, &eps) in sched.iter().enumerate() {
        let frac = if stages == 1 { 1.0 } else { k as f64 / (stages - 1) as f64 };
        let target = (opts.stage_tol.max(opts.tol).ln() * (1.0 - frac) + opts.tol.ln() * frac).exp();
        let target = target.min(prev_violation).max(VIOLATION_FLOOR);
        let mut history = Vec::new();
        let mut iters = 0;
        let mut violation;
        loop {
            update_rows(&c, &mut phi, &psi, &log_b, eps, m, n);
            update_cols(&c, &phi, &mut psi, &log_a, eps, m, n);
            iters += 1;
            // after the column update the columns are exact; rows carry the error
            violation = row_violation(&c, &phi, &psi, a, b, eps, m, n);
            if iters % 50 == 0 {
                history.push(violation);
                let stalled = history.len() >= 2 && violation > 0.9 * history[history.len() - 2];
                if (stalled || violation < NEWTON_SWITCH) && violation > target && m + n <= opts.newton_max_atoms {
                    newton_polish(&c, &mut phi, &mut psi, a, b, eps, target);
                    update_cols(&c, &phi, &mut psi, &log_a, eps, m, n);
                    violation = row_violation(&c, &phi, &psi, a, b, eps, m, n);
                    history.push(violation);
                }
            }
            if violation <= target {
                break;
            }
            if iters >= opts.max_iter || !violation.is_finite() {
                history.push(violation);
                return Err(Error::NotConverged { what: "sinkhorn", iterations: iters, residual: violation, history });
            }
        }
        prev_violation = violation;
        report.epsilons.push(eps);
        report.violations.push(violation);
        report.iterations.push(iters);
        report.costs.push(coupling_cost(&c, &phi, &psi, a, b, eps, m, n));
    }

    let eps = last;
    let mut coupling = Vec::new();
    let mut dropped = 0.0;
    let mut sums_r = vec![0.0; m];
    let mut sums_c = vec![0.0; n];
    for i in 0..m {
        for j in 0..n {
            let p = plan(&c, &phi, &psi, a, b, eps, n, i, j);
            sums_r[i] += p;
            sums_c[j] += p;
            if p > opts.threshold {
                coupling.push((i, j, p));
            } else {
                dropped += p;
            }
        }
    }
    let violation: f64 = sums_r.iter().zip(a).map(|(s, w)| (s - w).abs()).sum::<f64>()
        + sums_c.iter().zip(b).map(|(s, w)| (s - w).abs()).sum::<f64>();

    // one c-transform pass turns the regularized duals into feasible ones
    let mut phi_c = vec![f64::INFINITY; m];
    for i in 0..m {
        for j in 0..n {
            phi_c[i] = phi_c[i].min(c[i * n + j] - psi[j]);
        }
    }
    let mut psi_c = vec![f64::INFINITY; n];
    for i in 0..m {
        for j in 0..n {
            psi_c[j] = psi_c[j].min(c[i * n + j] - phi_c[i]);
        }
    }
    let sol = TransportSolution {
        source: mu.clone(),
        target: nu.clone(),
        coupling,
        phi: phi_c,
        psi: psi_c,
        convention: conv,
        epsilon: eps,
        marginal_violation: violation,
        dropped_mass: dropped,
        iterations: report.iterations.iter().sum(),
    };
    Ok((sol, report))
}

fn joint_diameter(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let pts: Vec<_> = mu.points().iter().chain(nu.points()).cloned().collect();
    let hull = crate::geometry::convex_hull(&pts);
    if !hull.is_empty() {
        return hull.diameter();
    }
    // collinear atoms: the hull degenerates
    let mut d: f64 = 0.0;
    for (k, p) in pts.iter().enumerate() {
        for q in &pts[k + 1..] {
            d = d.max((p - q).norm());
        }
    }
    d
}

const NEWTON_SWITCH: f64 = 1e-4;

/// Damped Newton ascent on the dual objective
/// `a·φ + b·ψ − ε Σ π_ij`, with the last `ψ` held fixed to remove the
/// constant shift. Steps are halved until the marginal violation drops.
#[allow(clippy::too_many_arguments)]
fn newton_polish(c: &[f64], phi: &mut [f64], psi: &mut [f64], a: &[f64], b: &[f64], eps: f64, target: f64) {
    let m = a.len();
    let n = b.len();
    let dim = m + n - 1;
    let tv = |phi: &[f64], psi: &[f64]| -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut p = vec![0.0; m * n];
        let mut r = vec![0.0; m];
        let mut col = vec![0.0; n];
        for i in 0..m {
            for j in 0..n {
                let v = plan(c, phi, psi, a, b, eps, n, i, j);
                p[i * n + j] = v;
                r[i] += v;
                col[j] += v;
            }
        }
        let v = r.iter().zip(a).map(|(x, y)| (x - y).abs()).sum::<f64>()
            + col.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
        (v, p, r, col)
    };
    let (mut cur, mut p, mut r, mut col) = tv(phi, psi);
    for _ in 0..50 {
        if cur <= target * 0.5 {
            break;
        }
        let mut h = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        let mut g = nalgebra::DVector::<f64>::zeros(dim);
        for i in 0..m {
            h[(i, i)] = r[i] / eps;
            g[i] = a[i] - r[i];
        }
        for j in 0..n - 1 {
            h[(m + j, m + j)] = col[j] / eps;
            g[m + j] = b[j] - col[j];
            for i in 0..m {
                let v = p[i * n + j] / eps;
                h[(i, m + j)] = v;
                h[(m + j, i)] = v;
            }
        }
        // a tiny ridge keeps nearly decoupled blocks factorizable
        let ridge = 1e-12 * (0..dim).map(|k| h[(k, k)]).fold(0.0, f64::max);
        for k in 0..dim {
            h[(k, k)] += ridge;
        }
        let Some(chol) = h.cholesky() else { return };
        let step = chol.solve(&g);
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let np: Vec<f64> = (0..m).map(|i| phi[i] + t * step[i]).collect();
            let nq: Vec<f64> = (0..n).map(|j| if j + 1 < n { psi[j] + t * step[m + j] } else { psi[j] }).collect();
            let (v, p2, r2, c2) = tv(&np, &nq);
            // gain in the dual objective, summed as differences
            let lin: f64 = (0..m).map(|i| a[i] * (np[i] - phi[i])).sum::<f64>()
                + (0..n).map(|j| b[j] * (nq[j] - psi[j])).sum::<f64>();
            let mass: f64 = p2.iter().zip(&p).map(|(x, y)| x - y).sum();
            let gain = lin - eps * mass;
            if gain >= 1e-3 * t * slope || (v < cur && gain >= -1e-15) {
                phi.copy_from_slice(&np);
                psi.copy_from_slice(&nq);
                (cur, p, r, col) = (v, p2, r2, c2);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return;
        }
    }
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn plan(c: &[f64], phi: &[f64], psi: &[f64], a: &[f64], b: &[f64], eps: f64, n: usize, i: usize, j: usize) -> f64 {
    a[i] * b[j] * ((phi[i] + psi[j] - c[i * n + j]) / eps).exp()
}

fn update_rows(c: &[f64], phi: &mut [f64], psi: &[f64], log_b: &[f64], eps: f64, m: usize, n: usize) {
    let mut buf = vec![0.0; n];
    for i in 0..m {
        let row = &c[i * n..(i + 1) * n];
        let mut mx = f64::NEG_INFINITY;
        for j in 0..n {
            buf[j] = (psi[j] - row[j]) / eps + log_b[j];
            mx = mx.max(buf[j]);
        }
        let s: f64 = buf.iter().map(|v| (v - mx).exp()).sum();
        phi[i] = -eps * (mx + s.ln());
    }
}

fn update_cols(c: &[f64], phi: &[f64], psi: &mut [f64], log_a: &[f64], eps: f64, m: usize, n: usize) {
    let mut mx = vec![f64::NEG_INFINITY; n];
    for i in 0..m {
        let row = &c[i * n..(i + 1) * n];
        for j in 0..n {
            mx[j] = mx[j].max((phi[i] - row[j]) / eps + log_a[i]);
        }
    }
    let mut s = vec![0.0; n];
    for i in 0..m {
        let row = &c[i * n..(i + 1) * n];
        for j in 0..n {
            s[j] += ((phi[i] - row[j]) / eps + log_a[i] - mx[j]).exp();
        }
    }
    for j in 0..n {
        psi[j] = -eps * (mx[j] + s[j].ln());
    }
}

#[allow(clippy::too_many_arguments)]
fn row_violation(
    c: &[f64],
    phi: &[f64],
    psi: &[f64],
    a: &[f64],
    b: &[f64],
    eps: f64,
    m: usize,
    n: usize,
) -> f64 {
    let mut v = 0.0;
    for i in 0..m {
        let mut r = 0.0;
        for j in 0..n {
            r += plan(c, phi, psi, a, b, eps, n, i, j);
        }
        v += (r - a[i]).abs();
    }
    v
}

#[allow(clippy::too_many_arguments)]
fn coupling_cost(c: &[f64], phi: &[f64], psi: &[f64], a: &[f64], b: &[f64], eps: f64, m: usize, n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..n {
            s += plan(c, phi, psi, a, b, eps, n, i, j) * c[i * n + j];
        }
    }
    s
}
