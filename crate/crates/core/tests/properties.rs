use degenerate_ot::analysis::{
    dyadic_heights, extract_section, fit_boundary_exponents, SectionOptions, SectionStats,
};
use degenerate_ot::flatmodel::{
    determinant_normalization, gamma, normalized_ma_residual, verify_ma_identity, ModelProfile, Rescaling,
};
use degenerate_ot::geometry::{chord_ratio, john_ellipsoid_polygon, random_convex_polygon, ConvexBody, Vec2};
use degenerate_ot::harness::{emit_config, parse_config};
use degenerate_ot::measures::{doubling_constant, integrate_polygon, PowerDensity, DEFAULT_CELL_BUDGET};
use degenerate_ot::transport1d::{mass_balance_defect, solve_1d, Coefficient1D, Density1D};
use degenerate_ot::transport2d::{
    solve_lp, solve_lp_with, ConvexPotential, CostConvention, DiscreteMeasure, LpOptions, QuadraticPotential,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 32, ..ProptestConfig::default() }
}

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> DiscreteMeasure {
    let pts = (0..n).map(|_| Vec2::new(rng.random(), rng.random())).collect();
    let w = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    DiscreteMeasure::from_masses(pts, w).unwrap()
}

/// Affine potential added to a convex one.
struct Shifted<'a> {
    u: &'a dyn ConvexPotential,
    c: f64,
    p: Vec2,
}

impl ConvexPotential for Shifted<'_> {
    fn value(&self, x: Vec2) -> f64 {
        self.u.value(x) + self.c + self.p.dot(&x)
    }
    fn gradient(&self, x: Vec2) -> Vec2 {
        self.u.gradient(x) + self.p
    }
    fn domain(&self) -> degenerate_ot::transport2d::Domain<'_> {
        self.u.domain()
    }
}

/// `U(D_t x)/t`.
struct Rescaled {
    p: ModelProfile,
    d: Rescaling,
}

impl ConvexPotential for Rescaled {
    fn value(&self, x: Vec2) -> f64 {
        self.p.value(self.d.apply(x)) / self.d.t()
    }
    fn gradient(&self, x: Vec2) -> Vec2 {
        self.d.diagonal().component_mul(&self.p.gradient(self.d.apply(x))) / self.d.t()
    }
    fn domain(&self) -> degenerate_ot::transport2d::Domain<'_> {
        self.p.domain()
    }
}

fn boundary_sections(u: &dyn ConvexPotential, p: Vec2, levels: usize) -> Vec<SectionStats> {
    dyadic_heights(0.25, levels)
        .into_iter()
        .map(|h| extract_section(u, Vec2::zeros(), p, h, false, &SectionOptions::default()).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn dilation_nests_and_scales_area(seed in any::<u64>(), r in 0.01f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_convex_polygon(&mut rng, 12, Vec2::new(0.3, -0.1), Vec2::new(1.0, 0.6));
        let c = s.centroid().unwrap();
        let rs = s.scale_about(c, r);
        prop_assert!((rs.area() - r * r * s.area()).abs() <= 1e-12 * s.area());
        prop_assert!(s.contains_polygon(&rs, 1e-12));
    }

    #[test]
    fn boundary_distance_is_lipschitz(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body = ConvexBody::from_polygon(random_convex_polygon(&mut rng, 10, Vec2::zeros(), Vec2::new(1.0, 0.5))).unwrap();
        for _ in 0..50 {
            let a = Vec2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.0..1.0));
            let b = a + Vec2::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
            let d = (body.boundary_distance(a) - body.boundary_distance(b)).abs();
            prop_assert!(d <= (a - b).norm() * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn integration_is_additive_across_a_halfplane(seed in any::<u64>(), alpha in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body = ConvexBody::disk(Vec2::zeros(), 1.0, 128).unwrap();
        let f = PowerDensity::uniform_coefficient(body, alpha).unwrap();
        let s = random_convex_polygon(&mut rng, 8, Vec2::new(0.2, 0.1), Vec2::new(0.9, 0.7));
        let t: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let n = Vec2::new(t.cos(), t.sin());
        let off = n.dot(&s.centroid().unwrap());
        let tol = 1e-6;
        let whole = integrate_polygon(&f, &s, tol, DEFAULT_CELL_BUDGET).unwrap().value;
        let a = integrate_polygon(&f, &s.clip(n, off), tol, DEFAULT_CELL_BUDGET).unwrap().value;
        let b = integrate_polygon(&f, &s.clip(-n, -off), tol, DEFAULT_CELL_BUDGET).unwrap().value;
        prop_assert!((whole - a - b).abs() <= 2.0 * tol * whole.abs(), "{whole} vs {}", a + b);
    }

    #[test]
    fn one_dimensional_mass_balance(alpha in 0.0f64..4.0, beta in 0.0f64..4.0) {
        let f = Density1D::power(alpha).unwrap();
        let g = Density1D::power(beta).unwrap();
        let map = solve_1d(&f, &g, 64).unwrap();
        prop_assert!(mass_balance_defect(&f, &g, &map) <= 1e-12);
    }

    #[test]
    fn one_dimensional_map_stays_monotone(alpha in 0.0f64..3.0, beta in 0.0f64..3.0, c1 in -0.5f64..0.5, rate in -1.0f64..1.0) {
        let f = Density1D::new(alpha, Coefficient1D::Polynomial { coeffs: vec![1.0, c1] }).unwrap();
        let g = Density1D::new(beta, Coefficient1D::Exponential { value: 2.0, rate }).unwrap();
        let map = solve_1d(&f, &g, 64).unwrap();
        prop_assert!(map.values().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn one_dimensional_maps_invert(alpha in 0.0f64..3.0, beta in 0.0f64..3.0) {
        let f = Density1D::power(alpha).unwrap();
        let g = Density1D::power(beta).unwrap();
        let n = 256;
        let fg = solve_1d(&f, &g, n).unwrap();
        let gf = solve_1d(&g, &f, n).unwrap();
        let worst = (1..40).map(|i| {
            let t = 0.2 + 0.6 * i as f64 / 40.0;
            (gf.eval(fg.eval(t)) - t).abs()
        }).fold(0.0, f64::max);
        prop_assert!(worst <= 20.0 / (n * n) as f64, "{worst}");
    }

    #[test]
    fn exponent_identity(alpha in 0.0f64..10.0, beta in 0.0f64..10.0) {
        let g = gamma(alpha, beta);
        prop_assert!((alpha - g * beta - (g - 1.0)).abs() <= 1e-13 * (1.0 + alpha + beta));
    }

    #[test]
    fn profile_solves_the_equation(alpha in 0.0f64..4.0, beta in 0.0f64..4.0, seed in any::<u64>()) {
        let p = ModelProfile::new(alpha, beta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec2> = (0..64).map(|_| Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(1e-3..2.0))).collect();
        let scale = pts.iter().map(|x| x.y.powf(alpha)).fold(1.0, f64::max);
        prop_assert!(verify_ma_identity(&p, &pts).unwrap() <= 1e-12 * scale);
        let c = p.gamma().powf(-1.0 / (1.0 + beta));
        for x in &pts {
            let un = p.gradient(*x).y;
            prop_assert!((un / x.y.powf(p.gamma()) / c - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn determinant_normalization_decides_the_residual(alpha in 0.0f64..3.0, beta in 0.0f64..3.0, qn in 0.3f64..3.0, bump in 0.05f64..0.5) {
        let p = ModelProfile::new(alpha, beta).unwrap();
        let pts: Vec<Vec2> = (1..20).map(|k| Vec2::new(0.1 * k as f64 - 1.0, 0.05 * k as f64)).collect();
        // q_t from q_n^{α+β}(q_t q_n)² = 1
        let qt = qn.powf(-(alpha + beta) / 2.0) / qn;
        prop_assert!((determinant_normalization(qt, qn, alpha, beta) - 1.0).abs() < 1e-12);
        let scale = pts.iter().map(|x| x.y.powf(alpha)).fold(1.0, f64::max);
        prop_assert!(normalized_ma_residual(&p, qt, qn, &pts).unwrap() <= 1e-11 * scale);
        prop_assert!(normalized_ma_residual(&p, qt * (1.0 + bump), qn, &pts).unwrap() > 1e-6 * scale);
    }

    #[test]
    fn section_fits_ignore_affine_terms(alpha in 0.0f64..3.0, beta in 0.0f64..2.0, c in -1.0f64..1.0, px in -1.0f64..1.0, pn in -1.0f64..1.0) {
        let prof = ModelProfile::new(alpha, beta).unwrap();
        let base = fit_boundary_exponents(&boundary_sections(&prof, Vec2::zeros(), 7)).unwrap();
        let p = Vec2::new(px, pn);
        let shifted = Shifted { u: &prof, c, p };
        let moved = fit_boundary_exponents(&boundary_sections(&shifted, p, 7)).unwrap();
        prop_assert!((base.d.estimate - moved.d.estimate).abs() <= 1e-9);
        prop_assert!((base.w.estimate - moved.w.estimate).abs() <= 1e-9);
    }

    #[test]
    fn sections_are_nested(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = degenerate_ot::geometry::Mat2::new(rng.random_range(0.5..2.0), 0.3, 0.3, rng.random_range(0.5..2.0));
        let u = QuadraticPotential { matrix: m };
        let x0 = Vec2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let p = m * x0;
        let opts = SectionOptions::default();
        let small = extract_section(&u, x0, p, 0.01, false, &opts).unwrap();
        let large = extract_section(&u, x0, p, 0.04, false, &opts).unwrap();
        prop_assert!(large.polygon.contains_polygon(&small.polygon, 1e-9));
    }

    #[test]
    fn lp_cost_convention_and_monotonicity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = cloud(&mut rng, 30);
        let nu = cloud(&mut rng, 25);
        let half = solve_lp(&mu, &nu).unwrap();
        let full = solve_lp_with(&mu, &nu, LpOptions { convention: CostConvention::Squared, ..LpOptions::default() }).unwrap();
        prop_assert!((2.0 * half.transport_cost() - full.transport_cost()).abs() <= 1e-12 * full.transport_cost().max(1e-300) + 1e-15);
        prop_assert!(half.duality_gap().abs() <= 1e-9 * half.transport_cost().max(1e-12));
        prop_assert!(half.two_cycle_defect() <= 1e-12);
        prop_assert!(half.three_cycle_defect(&mut rng, 500) <= 1e-12);
    }

    #[test]
    fn configs_round_trip(alpha in 0.0f64..5.0, beta in 0.0f64..5.0, seed in any::<u64>(), kind in 0usize..6) {
        let name = ["exp1d", "doubling", "flat2d", "curved2d", "grushin", "liouville"][kind];
        let text = format!("experiment = \"{name}\"\nalpha = {alpha:?}\nbeta = {beta:?}\nseed = {seed}\n");
        let cfg = parse_config(&text).unwrap();
        let emitted = emit_config(&cfg).unwrap();
        let again = parse_config(&emitted).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(emit_config(&again).unwrap(), emitted);
    }
}

#[test]
fn cost_convention_selects_the_same_coupling() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mu = cloud(&mut rng, 40);
    let nu = cloud(&mut rng, 40);
    let half = solve_lp(&mu, &nu).unwrap();
    let full = solve_lp_with(&mu, &nu, LpOptions { convention: CostConvention::Squared, ..LpOptions::default() }).unwrap();
    let support = |s: &degenerate_ot::transport2d::TransportSolution| {
        s.coupling.iter().map(|&(i, j, _)| (i, j)).collect::<Vec<_>>()
    };
    assert_eq!(support(&half), support(&full));
}

#[test]
fn john_ellipsoid_sandwich_on_random_polygons() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ratio = 2.0 * 2f64.sqrt();
    for _ in 0..1000 {
        let n = rng.random_range(3..14);
        let axes = Vec2::new(rng.random_range(0.2..2.0), rng.random_range(0.2..2.0));
        let c = Vec2::new(rng.random(), rng.random());
        let s = random_convex_polygon(&mut rng, n, c, axes);
        let e = john_ellipsoid_polygon(&s).unwrap().ellipsoid;
        assert!(e.inside_polygon(&s, 1e-9));
        let big = e.dilate(ratio);
        assert!(s.vertices().iter().all(|v| big.contains(*v, 1e-9)));
    }
}

#[test]
fn centered_sections_are_balanced() {
    // chords through the barycenter split in ratio within [2^{-3/2}, 2^{3/2}]
    let bound = 2f64.powf(1.5);
    for (a, b) in [(1.0, 1.0), (2.0, 0.0), (0.0, 1.0)] {
        let p = ModelProfile::new(a, b).unwrap();
        for h in [0.01, 0.05] {
            let x0 = Vec2::new(0.1, 0.05);
            let s = extract_section(&p, x0, p.gradient(x0), h, true, &SectionOptions::default()).unwrap();
            for k in 0..16 {
                let t = std::f64::consts::PI * k as f64 / 16.0;
                let l = chord_ratio(&s.polygon, s.barycenter, Vec2::new(t.cos(), t.sin()));
                assert!(l >= 1.0 / bound && l <= bound, "ratio {l} at h {h}");
            }
        }
    }
}

#[test]
fn doubling_constant_grows_with_alpha() {
    let body = ConvexBody::disk(Vec2::zeros(), 1.0, 128).unwrap();
    let mut last = 0.0;
    for alpha in [0.0, 1.0, 2.0, 4.0] {
        let f = PowerDensity::uniform_coefficient(body.clone(), alpha).unwrap();
        let c = doubling_constant(&f, 200, 1).unwrap().constant;
        assert!(c >= last * (1.0 - 1e-3), "alpha {alpha}: {c} < {last}");
        last = c;
    }
}

#[test]
fn fits_survive_rescaling() {
    for (a, b) in [(2.0, 0.0), (1.0, 1.0)] {
        let p = ModelProfile::new(a, b).unwrap();
        let base = fit_boundary_exponents(&boundary_sections(&p, Vec2::zeros(), 7)).unwrap();
        for t in [0.25, 1.0 / 16.0] {
            let r = Rescaled { p, d: Rescaling::new(t, p.gamma()).unwrap() };
            let fits = fit_boundary_exponents(&boundary_sections(&r, Vec2::zeros(), 7)).unwrap();
            assert!((fits.d.estimate - base.d.estimate).abs() < 1e-9);
            assert!((fits.w.estimate - base.w.estimate).abs() < 1e-9);
        }
    }
}
