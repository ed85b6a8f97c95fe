use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, ExperimentKind, SolverKind};
use super::plot::{loglog_svg, Series};
use super::report::{Basis, Check, ReportRow};
use crate::analysis::{
    dyadic_heights, entropic_bias_floor, extract_section, fit_boundary_exponents, lp_bias_floor,
    mass_balance_ratio, mass_balance_spread, normal_ratio, obliqueness, SectionOptions, SectionStats,
};
use crate::error::{Error, Result};
use crate::flatmodel::{
    gamma, grushin_apply, grushin_solve, liouville_check, liouville_fit, Cylinder, GridField, GrushinProblem,
    KernelPolynomial, ModelProfile,
};
use crate::geometry::{random_convex_polygon, ConvexBody, Vec2};
use crate::measures::{convex_doubling_ratio, doubling_constant, Coefficient, DistanceMode, PowerDensity};
use crate::transport1d::{fit_exponent, mass_balance_defect, solve_1d, Density1D};
use crate::transport2d::{
    brenier_potential, discretize, discretize_grid, solve_entropic, solve_lp, ConvexPotential, DiscreteMeasure,
    EntropicOptions, PotentialField, SampleWindow, TransportSolution,
};

/// Rows and SVG plots `(file name, contents)` of one experiment.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub rows: Vec<ReportRow>,
    pub plots: Vec<(String, String)>,
}

struct Rows<'a> {
    cfg: &'a ExperimentConfig,
    params: String,
    rows: Vec<ReportRow>,
}

impl<'a> Rows<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        Rows { cfg, params: cfg.params(), rows: Vec::new() }
    }

    fn push(&mut self, metric: impl Into<String>, value: f64, check: Check, anchor: &'static str, basis: Basis) {
        self.rows.push(ReportRow {
            experiment: self.cfg.experiment.name().into(),
            params: self.params.clone(),
            metric: metric.into(),
            value,
            check,
            anchor,
            basis,
        });
    }

    fn fail(&mut self, metric: &str, err: &Error) {
        let r = ReportRow::failure(self.cfg.experiment.name(), &self.params, metric, &err.to_string());
        self.rows.push(r);
    }
}

/// Runs one experiment. Deterministic given the config; solver failures
/// become failing rows instead of errors.
pub fn run_experiment(cfg: &ExperimentConfig) -> Outcome {
    let mut rows = Rows::new(cfg);
    let mut plots = Vec::new();
    let res = match cfg.experiment {
        ExperimentKind::Exp1d => exp1d(cfg, &mut rows, &mut plots),
        ExperimentKind::Doubling => doubling(cfg, &mut rows),
        ExperimentKind::Flat2d => flat2d(cfg, &mut rows, &mut plots),
        ExperimentKind::Curved2d => curved2d(cfg, &mut rows),
        ExperimentKind::Grushin => grushin(cfg, &mut rows, &mut plots),
        ExperimentKind::Liouville => liouville(cfg, &mut rows),
    };
    if let Err(e) = res {
        rows.fail(cfg.experiment.name(), &e);
    }
    Outcome { rows: rows.rows, plots }
}

fn exp1d(cfg: &ExperimentConfig, rows: &mut Rows, plots: &mut Vec<(String, String)>) -> Result<()> {
    let g = gamma(cfg.alpha, cfg.beta);
    let f = Density1D::power(cfg.alpha)?;
    let h = Density1D::power(cfg.beta)?;
    let nodes = cfg.grid.map_nodes.unwrap_or(64);
    let [lo, hi] = cfg.grid.window.unwrap_or([1e-4, 1e-1]);
    let map = solve_1d(&f, &h, nodes)?;
    let fit = fit_exponent(&map, (lo, hi))?;
    rows.push(
        "gamma_fit",
        fit.estimate,
        Check::Rel { target: g, tol: 0.02 },
        "the monotone map between t^alpha and t^beta on [0,1] is t^gamma with gamma = (1+alpha)/(1+beta)",
        Basis::ClosedForm,
    );
    rows.push("gamma_fit_stderr", fit.stderr, Check::Report, "standard error of the log-log slope", Basis::Report);
    let map_err = map.grid().iter().zip(map.values()).map(|(t, v)| (v - t.powf(g)).abs()).fold(0.0, f64::max);
    rows.push(
        "map_max_error",
        map_err,
        Check::AtMost(1e-9),
        "T(t) = t^gamma at every map node",
        Basis::ClosedForm,
    );
    rows.push(
        "mass_balance_defect",
        mass_balance_defect(&f, &h, &map),
        Check::AtMost(1e-9),
        "F(t) = G(T(t)) at every map node",
        Basis::ClosedForm,
    );
    let samples = map.dyadic_samples((lo, hi));
    let (x, y): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
    plots.push((
        "exp1d_map.svg".into(),
        loglog_svg("monotone map", "t", "T(t)", &[Series { label: "T".into(), x, y, fit: Some(fit) }]),
    ));
    Ok(())
}

fn source_body(cfg: &ExperimentConfig) -> Result<ConvexBody> {
    let spec = cfg.source.clone().ok_or_else(|| Error::config("source", "missing body"))?;
    ConvexBody::from_spec(spec)
}

fn target_body(cfg: &ExperimentConfig) -> Result<ConvexBody> {
    let spec = cfg.target.clone().ok_or_else(|| Error::config("target", "missing body"))?;
    ConvexBody::from_spec(spec)
}

/// Chain exponent for halving `k` times: `⌈log(2√2)/log 2⌉ + 1`.
pub fn chain_exponent() -> i32 {
    ((2.0 * 2f64.sqrt()).ln() / 2f64.ln()).ceil() as i32 + 1
}

/// Relative quadrature tolerance for the chain ratios.
const CHAIN_TOL: f64 = 1e-4;

fn doubling(cfg: &ExperimentConfig, rows: &mut Rows) -> Result<()> {
    let body = source_body(cfg)?;
    let coeff = cfg.source_coefficient.clone().unwrap_or_else(Coefficient::one);
    let f = PowerDensity::new(body.clone(), cfg.alpha, coeff)?;
    let n = cfg.grid.samples.unwrap_or(400);
    let a = doubling_constant(&f, n, cfg.seed)?;
    let b = doubling_constant(&f, n, cfg.seed.wrapping_add(1))?;
    rows.push(
        "doubling_constant",
        a.constant,
        Check::Within(1.0, 1e6),
        "sup over ellipsoids E centered in the closed body of f(E)/f(E/2) is finite",
        Basis::Report,
    );
    rows.push(
        "doubling_seed_stability",
        (a.constant - b.constant).abs() / a.constant,
        Check::AtMost(0.1),
        "the estimated doubling constant does not depend on the sample seed",
        Basis::SolverConsistency,
    );
    rows.push("doubling_crossing_samples", a.crossing as f64, Check::Report, "ellipsoids leaving the body", Basis::Report);

    let k = chain_exponent();
    let bound = a.constant.max(b.constant).powi(k);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let (lo, hi) = body.bounding_box();
    let diam = body.diameter();
    let mut worst: f64 = 0.0;
    let mut tested = 0usize;
    let polygons = cfg.grid.polygons.unwrap_or(200);
    let mut attempts = 0usize;
    while tested < polygons && attempts < 50 * polygons {
        attempts += 1;
        let c = Vec2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if !body.contains(c) {
            continue;
        }
        let axes = Vec2::new(rng.random_range(0.02..0.6) * diam, rng.random_range(0.02..0.6) * diam);
        let nv = rng.random_range(3..12);
        let s = random_convex_polygon(&mut rng, nv, c, axes);
        match s.centroid() {
            Some(bc) if body.contains(bc) => {}
            _ => continue,
        }
        if let Some(r) = convex_doubling_ratio(&f, &s, CHAIN_TOL)? {
            worst = worst.max(r);
            tested += 1;
        }
    }
    rows.push(
        "chain_polygons",
        tested as f64,
        Check::AtLeast(polygons as f64),
        "number of convex polygons with barycenter in the support tested",
        Basis::Report,
    );
    rows.push(
        "chain_ratio_over_bound",
        worst / bound,
        Check::AtMost(1.0),
        "f(S) <= D^k f(S/2) for convex S with barycenter in the support, D the ellipsoid constant, k = 3",
        Basis::SolverConsistency,
    );
    Ok(())
}

fn solve(cfg: &ExperimentConfig, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<TransportSolution> {
    match cfg.grid.solver.unwrap_or(SolverKind::Lp) {
        SolverKind::Lp => solve_lp(mu, nu),
        SolverKind::Entropic => {
            let e = cfg.epsilon.as_ref().ok_or_else(|| Error::config("epsilon", "missing schedule"))?;
            solve_entropic(mu, nu, &EntropicOptions::geometric(e.start, e.end, e.stages))
        }
    }
}

fn solution_rows(rows: &mut Rows, tag: &str, sol: &TransportSolution) {
    let exact = sol.epsilon == 0.0;
    rows.push(
        format!("{tag}marginal_violation"),
        sol.marginal_violation,
        Check::AtMost(if exact { 1e-9 } else { 1e-6 }),
        "the coupling has the prescribed marginals",
        Basis::SolverConsistency,
    );
    rows.push(format!("{tag}transport_cost"), sol.transport_cost(), Check::Report, "quadratic transport cost", Basis::Report);
    if exact {
        rows.push(
            format!("{tag}duality_gap"),
            sol.duality_gap().abs(),
            Check::AtMost(1e-9 * sol.transport_cost().abs().max(1.0)),
            "primal and dual optimal values agree",
            Basis::SolverConsistency,
        );
    }
}

/// Average of the one-sided tangential slopes at `x0`.
fn tangential_slope(u: &dyn ConvexPotential, x0: Vec2) -> Vec2 {
    let d = 1e-9;
    let e = Vec2::new(d, 0.0);
    let right = (u.value(x0 + e) - u.value(x0)) / d;
    let left = (u.value(x0) - u.value(x0 - e)) / d;
    Vec2::new(0.5 * (left + right), 0.0)
}

fn flat2d(cfg: &ExperimentConfig, rows: &mut Rows, plots: &mut Vec<(String, String)>) -> Result<()> {
    let g = &cfg.grid;
    let missing = |k: &str| Error::config(format!("grid.{k}"), "missing");
    let (sx, sy) = (g.source_x.clone().ok_or_else(|| missing("source_x"))?, g.source_y.clone().ok_or_else(|| missing("source_y"))?);
    let (tx, ty) = (g.target_x.clone().ok_or_else(|| missing("target_x"))?, g.target_y.clone().ok_or_else(|| missing("target_y"))?);
    let edge = DistanceMode::Edge { normal: [0.0, 1.0], offset: 0.0 };
    let strip = |x: &crate::transport2d::Axis, y: &crate::transport2d::Axis| -> Result<ConvexBody> {
        let ex = x.edges()?;
        let ey = y.edges()?;
        ConvexBody::rect(Vec2::new(ex[0], ey[0]), Vec2::new(*ex.last().unwrap(), *ey.last().unwrap()))
    };
    let xb = strip(&sx, &sy)?;
    let yb = strip(&tx, &ty)?;
    let f = PowerDensity::with_mode(xb.clone(), cfg.alpha, Coefficient::one(), edge)?;
    let h = PowerDensity::with_mode(yb, cfg.beta, Coefficient::one(), edge)?;
    let mu = discretize_grid(&f, &sx, &sy)?;
    let nu = discretize_grid(&h, &tx, &ty)?;
    rows.push("source_atoms", mu.len() as f64, Check::Report, "atoms of the discretized source", Basis::Report);
    rows.push("target_atoms", nu.len() as f64, Check::Report, "atoms of the discretized target", Basis::Report);
    let sol = solve(cfg, &mu, &nu)?;
    solution_rows(rows, "", &sol);

    // the bottom edge of the strip is the only genuine boundary
    let window = SampleWindow::new(xb, vec![true, false, false, false])?;
    let u = brenier_potential(&sol, &mu)?.with_window(window);
    let x0 = Vec2::zeros();
    let p = tangential_slope(&u, x0);
    let spacing = sx.width_at(x0.x)?.max(sy.width_at(x0.y)?);
    let mut floor = lp_bias_floor(spacing);
    if sol.epsilon > 0.0 {
        floor = floor.max(entropic_bias_floor(sol.epsilon));
    }
    rows.push("bias_floor", floor, Check::Report, "smallest trusted section height", Basis::Report);
    let heights: Vec<f64> = dyadic_heights(g.h_max.unwrap_or(0.125), g.levels.unwrap_or(9))
        .into_iter()
        .filter(|&t| t >= floor)
        .collect();
    let stats: Vec<SectionStats> = heights
        .iter()
        .map(|&t| extract_section(&u, x0, p, t, false, &SectionOptions::default()))
        .collect::<Result<_>>()?;
    let kept = stats.iter().filter(|s| !s.truncated).count();
    rows.push(
        "fit_points",
        kept as f64,
        Check::AtLeast(crate::analysis::MIN_FIT_POINTS as f64),
        "dyadic heights above the bias floor whose sections stay inside the window",
        Basis::Report,
    );
    let gm = gamma(cfg.alpha, cfg.beta);
    let fits = fit_boundary_exponents(&stats)?;
    let pred = 1.0 / (1.0 + gm);
    rows.push(
        "slope_d",
        fits.d.estimate,
        Check::Within(0.9 * pred, 1.1 * pred),
        "the normal extent of boundary sections scales like h^(1/(1+gamma))",
        Basis::ClosedForm,
    );
    rows.push(
        "slope_w",
        fits.w.estimate,
        Check::Within(0.45, 0.55),
        "the tangential width of boundary sections scales like h^(1/2)",
        Basis::ClosedForm,
    );
    rows.push(
        "mass_balance_spread",
        mass_balance_spread(&stats, cfg.alpha, cfg.beta)?,
        Check::AtMost(10.0),
        "d_h^(2+alpha+beta) w_h^2 / h^(2+beta) stays between two positive constants",
        Basis::ClosedForm,
    );
    for s in stats.iter().filter(|s| !s.truncated) {
        rows.push(
            format!("mass_balance_ratio@h={:e}", s.h),
            mass_balance_ratio(s, cfg.alpha, cfg.beta)?,
            Check::Report,
            "d_h^(2+alpha+beta) w_h^2 / h^(2+beta)",
            Basis::Report,
        );
    }

    let profile = ModelProfile::new(cfg.alpha, cfg.beta)?;
    let cyl = Cylinder::new(x0, 0.25, gm)?;
    let (a, b) = cyl.half_widths();
    let nmin = 4.0 * sy.width_at(0.0)?;
    let mut probes = Vec::new();
    for i in 0..5 {
        for k in 0..4 {
            let y = nmin + (b - nmin) * (k as f64 + 0.5) / 4.0;
            probes.push(Vec2::new(-0.8 * a + 0.4 * a * i as f64, y));
        }
    }
    let ratio = normal_ratio(&u, &profile, &probes, 0.25)?;
    rows.push(
        "normal_ratio_spread",
        ratio.spread(),
        Check::AtMost(10.0),
        "u_n / x_n^gamma is bounded above and below near the flat boundary",
        Basis::Report,
    );

    let kept: Vec<&SectionStats> = stats.iter().filter(|s| !s.truncated).collect();
    let hx: Vec<f64> = kept.iter().map(|s| s.h).collect();
    let series = vec![
        Series { label: "d_h".into(), x: hx.clone(), y: kept.iter().map(|s| s.d_h).collect(), fit: Some(fits.d) },
        Series { label: "w_h".into(), x: hx, y: kept.iter().map(|s| s.w_h).collect(), fit: Some(fits.w) },
    ];
    plots.push(("flat2d_sections.svg".into(), loglog_svg("boundary sections", "h", "extent", &series)));
    Ok(())
}

/// Bounding-box cell count giving about `atoms` atoms inside `body`.
fn cells_for_atoms(body: &ConvexBody, atoms: usize) -> usize {
    let (lo, hi) = body.bounding_box();
    let boxed = (hi.x - lo.x) * (hi.y - lo.y);
    (atoms as f64 * boxed / body.area()).round() as usize
}

struct CurvedLevel {
    theta: f64,
    skipped: usize,
    sol: TransportSolution,
}

fn curved_level(
    cfg: &ExperimentConfig,
    f: &PowerDensity,
    h: &PowerDensity,
    atoms: usize,
) -> Result<CurvedLevel> {
    let mu = discretize(f, cells_for_atoms(f.body(), atoms))?;
    let nu = discretize(h, cells_for_atoms(h.body(), atoms))?;
    let sol = solve(cfg, &mu, &nu)?;
    let u: PotentialField = brenier_potential(&sol, &mu)?;
    let cell = (h.body().area() / nu.len() as f64).sqrt();
    let rep = obliqueness(&u, f.body(), h.body(), cfg.grid.boundary_samples.unwrap_or(64), 2.0 * cell)?;
    Ok(CurvedLevel { theta: rep.theta_min, skipped: rep.skipped, sol })
}

fn curved2d(cfg: &ExperimentConfig, rows: &mut Rows) -> Result<()> {
    let xb = source_body(cfg)?;
    let yb = target_body(cfg)?;
    let a = cfg.source_coefficient.clone().unwrap_or_else(Coefficient::one);
    let b = cfg.target_coefficient.clone().unwrap_or_else(Coefficient::one);
    let identical = cfg.source == cfg.target && a == b && cfg.alpha == cfg.beta;
    let f = PowerDensity::new(xb, cfg.alpha, a)?;
    let h = PowerDensity::new(yb, cfg.beta, b)?;
    let n = cfg.grid.atoms.unwrap_or(900);
    let coarse = curved_level(cfg, &f, &h, n)?;
    solution_rows(rows, "coarse_", &coarse.sol);
    let anchor = "inner normals at corresponding boundary points have inner product bounded below";
    rows.push("theta_coarse", coarse.theta, Check::AtLeast(0.05), anchor, Basis::Report);
    rows.push("skipped_coarse", coarse.skipped as f64, Check::Report, "boundary images off the target boundary", Basis::Report);
    if identical {
        rows.push(
            "identity_cost",
            coarse.sol.transport_cost(),
            Check::AtMost(1e-12),
            "transport between identical measures costs nothing",
            Basis::ClosedForm,
        );
        rows.push("identity_theta", coarse.theta, Check::AtLeast(0.99), "the identity map is perfectly oblique", Basis::ClosedForm);
    }
    let fine = curved_level(cfg, &f, &h, 2 * n)?;
    solution_rows(rows, "fine_", &fine.sol);
    rows.push("theta_fine", fine.theta, Check::AtLeast(0.05), anchor, Basis::Report);
    rows.push("skipped_fine", fine.skipped as f64, Check::Report, "boundary images off the target boundary", Basis::Report);
    rows.push(
        "theta_stability",
        (coarse.theta - fine.theta).abs(),
        Check::AtMost(0.05),
        "the obliqueness estimate is stable under refinement",
        Basis::SolverConsistency,
    );
    Ok(())
}

/// Convergence order of the Dirichlet solver for the kernel data: first
/// order when the upwinded drift is present, second without it.
pub fn grushin_solver_order(beta: f64) -> f64 {
    if beta > 0.0 {
        1.0
    } else {
        2.0
    }
}

/// Whether the discrete operator annihilates the kernel polynomial up to
/// roundoff: `x_n²` for `γ = 1`, and the cubic for `γ = 2` without drift.
pub fn grushin_kernel_is_exact(alpha: f64, beta: f64) -> bool {
    let g = gamma(alpha, beta);
    (g - 1.0).abs() < 1e-12 || (beta == 0.0 && (g - 2.0).abs() < 1e-12)
}

fn grushin(cfg: &ExperimentConfig, rows: &mut Rows, plots: &mut Vec<(String, String)>) -> Result<()> {
    let profile = ModelProfile::new(cfg.alpha, cfg.beta)?;
    let gm = profile.gamma();
    let k = KernelPolynomial::new(1.0, 0.3, &profile);
    let sizes = cfg.grid.sizes.clone().unwrap_or_else(|| vec![64, 128, 256]);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let exact = (0..1000)
        .map(|_| k.apply_exact(Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(1e-3..1.0))).abs())
        .fold(0.0, f64::max);
    rows.push(
        "kernel_exact_residual",
        exact,
        Check::AtMost(1e-10),
        "L annihilates p'x' + P'x'^2/2 + c p_n x_n^(1+gamma) when p_n = -trace P'/(1+beta)",
        Basis::ManufacturedSolution,
    );

    let exact_kernel = grushin_kernel_is_exact(cfg.alpha, cfg.beta);
    let mut spacing = Vec::new();
    let mut residuals = Vec::new();
    let mut errors = Vec::new();
    for &n in &sizes {
        let pb = GrushinProblem::new(1.0, 1.0, cfg.alpha, cfg.beta, n, n, move |x| k.eval(x))?;
        let w = GridField::from_fn(1.0, 1.0, n, n, |x| k.eval(x));
        let r = grushin_apply(&w, &pb)?.interior_max_abs();
        let sol = grushin_solve(&pb)?;
        let e = sol.field.max_error(|x| k.eval(x));
        rows.push(
            format!("kernel_poly_residual@n={n}"),
            r,
            if exact_kernel { Check::AtMost(1e-9) } else { Check::Report },
            "the discrete operator applied to the kernel polynomial vanishes up to truncation error",
            Basis::ManufacturedSolution,
        );
        rows.push(
            format!("solver_error@n={n}"),
            e,
            Check::Report,
            "max nodal error of the Dirichlet solve against the kernel polynomial",
            Basis::ManufacturedSolution,
        );
        spacing.push(1.0 / n as f64);
        residuals.push(r);
        errors.push(e);
    }
    if !exact_kernel {
        for i in 1..sizes.len() {
            let order = (residuals[i - 1] / residuals[i]).log2();
            let check = if gm > 1.0 { Check::AtLeast((gm - 1.0).min(2.0) - 0.1) } else { Check::Report };
            rows.push(
                format!("kernel_residual_order@n={}", sizes[i]),
                order,
                check,
                "the truncation error of the discrete operator on the kernel polynomial decays with the grid",
                Basis::ManufacturedSolution,
            );
        }
    }
    let q = 2f64.powf(grushin_solver_order(cfg.beta));
    for i in 1..sizes.len() {
        rows.push(
            format!("richardson_ratio@n={}", sizes[i]),
            errors[i - 1] / errors[i],
            Check::Within(0.85 * q, 1.15 * q),
            "the Dirichlet solve converges to the kernel polynomial at the scheme's order",
            Basis::ManufacturedSolution,
        );
    }
    let r_pos: Vec<f64> = residuals.iter().map(|r| r.max(1e-300)).collect();
    let series = vec![
        Series { label: "solver error".into(), x: spacing.clone(), y: errors.clone(), fit: crate::stats::loglog_fit(&spacing, &errors).ok() },
        Series { label: "kernel residual".into(), x: spacing.clone(), y: r_pos.clone(), fit: crate::stats::loglog_fit(&spacing, &r_pos).ok() },
    ];
    plots.push(("grushin_convergence.svg".into(), loglog_svg("grushin convergence", "grid spacing", "max error", &series)));
    Ok(())
}

fn liouville(cfg: &ExperimentConfig, rows: &mut Rows) -> Result<()> {
    let p = ModelProfile::new(cfg.alpha, cfg.beta)?;
    let n = cfg.grid.samples.unwrap_or(24);
    let noise = cfg.grid.noise.unwrap_or(1e-3);
    let mut nodes = Vec::with_capacity(n * n);
    for i in 0..n {
        for k in 0..n {
            nodes.push(Vec2::new(-1.0 + 2.0 * i as f64 / (n - 1) as f64, k as f64 / (n - 1) as f64));
        }
    }
    let evals: Vec<_> = nodes.iter().map(|&x| p.eval(x)).collect::<Result<_>>()?;
    let values: Vec<f64> = evals.iter().map(|e| e.value).collect();
    let grads: Vec<Vec2> = evals.iter().map(|e| e.gradient).collect();
    let u = PotentialField::from_samples(nodes.clone(), values.clone(), grads)?;
    let coef_err = |fit: &crate::flatmodel::LiouvilleFit| {
        [fit.p0.abs(), fit.p1.abs(), (fit.p_tt - 0.5).abs(), (fit.pn - p.c_u()).abs()].into_iter().fold(0.0, f64::max)
    };
    let exact = liouville_check(&u, &p)?;
    let anchor = "global solutions on the half plane are p0 + p'x' + x'P'x'/2 + p_n x_n^(1+gamma)";
    rows.push("exact_coefficient_error", coef_err(&exact), Check::AtMost(1e-10), anchor, Basis::ClosedForm);
    rows.push("exact_admissible", exact.is_admissible() as u8 as f64, Check::AtLeast(1.0), "p_n > 0 and P' positive definite", Basis::ClosedForm);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noisy: Vec<f64> = values.iter().map(|v| v + noise * rng.random_range(-1.0..1.0)).collect();
    let fit = liouville_fit(&nodes, &noisy, &p)?;
    rows.push(
        "noisy_coefficient_error",
        coef_err(&fit),
        Check::AtMost(10.0 * noise.max(1e-12)),
        "the fit is stable under small perturbations of the samples",
        Basis::ClosedForm,
    );
    rows.push("noisy_admissible", fit.is_admissible() as u8 as f64, Check::AtLeast(1.0), "p_n > 0 and P' positive definite", Basis::ClosedForm);
    rows.push("noisy_rms", fit.rms, Check::Report, "root-mean-square residual of the noisy fit", Basis::Report);
    Ok(())
}
