//! Sections of convex potentials and the regularity diagnostics built on
//! them.
//!
//! A section is the set where `u` lies below a plane raised by `h`. Its
//! extents at a boundary point are measured along the inner normal `ν`
//! (`d_h`) and along the tangent `τ = (ν_y, −ν_x)` in both directions
//! (`l_h`, `r_h`). At the flat boundary `{x_n = 0}` with `ν = e_n`, `r_h`
//! is the extent toward `+x′`.

mod diagnostics;
mod section;
mod suite;

pub use diagnostics::{normal_ratio, obliqueness, NormalRatio, ObliquenessReport, ObliquenessSample};
pub use section::{
    dyadic_heights, entropic_bias_floor, extract_section, lp_bias_floor, polygon_covariance, SectionOptions,
    SectionStats,
};
pub use suite::{section_property_suite, ProbeRecord, SuiteOptions, SuiteReport};

use crate::error::{Error, Result};
use crate::stats::{loglog_fit, ExponentFit};
#[cfg(test)]
use crate::geometry::Mat2;

/// `m_h = d_h^{2+α+β} w_h² / h^{2+β}`.
pub fn mass_balance_ratio(stats: &SectionStats, alpha: f64, beta: f64) -> Result<f64> {
    if stats.truncated {
        return Err(Error::invalid(format!("section at h = {} is truncated", stats.h)));
    }
    Ok(stats.d_h.powf(2.0 + alpha + beta) * stats.w_h * stats.w_h / stats.h.powf(2.0 + beta))
}

/// `max m_h / min m_h` over the non-truncated sections.
pub fn mass_balance_spread(stats: &[SectionStats], alpha: f64, beta: f64) -> Result<f64> {
    let m: Vec<f64> = stats
        .iter()
        .filter(|s| !s.truncated)
        .map(|s| mass_balance_ratio(s, alpha, beta))
        .collect::<Result<_>>()?;
    if m.is_empty() {
        return Err(Error::invalid("no untruncated sections"));
    }
    let hi = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(hi / lo)
}

/// Log-log slopes of `d_h` and `w_h` against `h`.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryFits {
    pub d: ExponentFit,
    pub w: ExponentFit,
}

/// Minimum number of untruncated sections for [`fit_boundary_exponents`].
pub const MIN_FIT_POINTS: usize = 6;

/// Fits over the untruncated sections; the prediction is
/// `slope(d_h) = 1/(1+γ)` and `slope(w_h) = 1/2`.
pub fn fit_boundary_exponents(stats: &[SectionStats]) -> Result<BoundaryFits> {
    let kept: Vec<&SectionStats> = stats.iter().filter(|s| !s.truncated).collect();
    if kept.len() < MIN_FIT_POINTS {
        return Err(Error::invalid(format!(
            "{} untruncated sections, at least {MIN_FIT_POINTS} are needed",
            kept.len()
        )));
    }
    let h: Vec<f64> = kept.iter().map(|s| s.h).collect();
    let d: Vec<f64> = kept.iter().map(|s| s.d_h).collect();
    let w: Vec<f64> = kept.iter().map(|s| s.w_h).collect();
    Ok(BoundaryFits { d: loglog_fit(&h, &d)?, w: loglog_fit(&h, &w)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatmodel::ModelProfile;
    use crate::geometry::{ConvexBody, Vec2};
    use crate::transport2d::QuadraticPotential;

    #[test]
    fn quadratic_sections_are_disks() {
        let u = QuadraticPotential::half_norm();
        let h = 0.02;
        let s = extract_section(&u, Vec2::zeros(), Vec2::zeros(), h, false, &SectionOptions::default()).unwrap();
        let r = (2.0 * h).sqrt();
        for e in [s.d_h, s.l_h, s.r_h] {
            assert!((e - r).abs() < 1e-12 * r);
        }
        assert!((s.area() / (std::f64::consts::PI * r * r) - 1.0).abs() < 2e-4);
        assert!(!s.truncated && s.barycenter.norm() < 1e-12);
    }

    #[test]
    fn centered_quadratic_section_moves_the_slope() {
        let u = QuadraticPotential { matrix: Mat2::new(2.0, 0.3, 0.3, 0.5) };
        let x0 = Vec2::new(0.4, -0.2);
        let s = extract_section(&u, x0, Vec2::zeros(), 0.05, true, &SectionOptions::default()).unwrap();
        assert!((s.barycenter - x0).norm() <= 1e-3 * s.polygon.diameter());
        assert!((s.slope - u.matrix * x0).norm() < 1e-2);
    }

    #[test]
    fn model_profile_extents_and_mass_balance() {
        for (a, b) in [(2.0, 0.0), (1.0, 1.0), (3.0, 1.0), (0.0, 2.0)] {
            let p = ModelProfile::new(a, b).unwrap();
            let g = p.gamma();
            let stats: Vec<SectionStats> = dyadic_heights(0.5, 8)
                .into_iter()
                .map(|h| extract_section(&p, Vec2::zeros(), Vec2::zeros(), h, false, &SectionOptions::default()).unwrap())
                .collect();
            let m0 = 8.0 * p.c_u().powf(-(1.0 + b));
            for s in &stats {
                let d = (s.h / p.c_u()).powf(1.0 / (1.0 + g));
                let w = (2.0 * s.h).sqrt();
                assert!((s.d_h - d).abs() < 1e-12 * d, "d_h {} vs {d}", s.d_h);
                assert!((s.l_h - w).abs() < 1e-12 * w && (s.r_h - w).abs() < 1e-12 * w);
                let m = mass_balance_ratio(s, a, b).unwrap();
                assert!((m / m0 - 1.0).abs() < 1e-8);
            }
            assert!(mass_balance_spread(&stats, a, b).unwrap() - 1.0 < 1e-8);
            let fits = fit_boundary_exponents(&stats).unwrap();
            assert!((fits.d.estimate - 1.0 / (1.0 + g)).abs() < 1e-9);
            assert!((fits.w.estimate - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn fits_ignore_affine_shifts() {
        let p = ModelProfile::new(2.0, 0.0).unwrap().with_tilt(0.3);
        let x0 = Vec2::zeros();
        let stats: Vec<SectionStats> = dyadic_heights(0.25, 6)
            .into_iter()
            .map(|h| extract_section(&p, x0, Vec2::new(0.3, 0.0), h, false, &SectionOptions::default()).unwrap())
            .collect();
        let fits = fit_boundary_exponents(&stats).unwrap();
        assert!((fits.d.estimate - 0.25).abs() < 1e-9);
    }

    #[test]
    fn too_few_sections_are_rejected() {
        let u = QuadraticPotential::half_norm();
        let stats: Vec<SectionStats> = dyadic_heights(0.1, 5)
            .into_iter()
            .map(|h| extract_section(&u, Vec2::zeros(), Vec2::zeros(), h, false, &SectionOptions::default()).unwrap())
            .collect();
        assert!(fit_boundary_exponents(&stats).is_err());
    }

    #[test]
    fn centered_section_at_flat_boundary() {
        let p = ModelProfile::new(1.0, 1.0).unwrap();
        let s = extract_section(&p, Vec2::zeros(), Vec2::zeros(), 0.01, true, &SectionOptions::default()).unwrap();
        assert!(s.barycenter.norm() <= 1e-3 * s.polygon.diameter());
        assert!(s.slope.y > 0.0);
        assert!(!s.truncated);
    }

    #[test]
    fn normal_ratio_of_profile() {
        let p = ModelProfile::new(2.0, 1.0).unwrap();
        let probes: Vec<Vec2> = (1..8).map(|k| Vec2::new(0.1 * k as f64 - 0.4, 0.02 * k as f64)).collect();
        let r = normal_ratio(&p, &p, &probes, 1e-4).unwrap();
        let c = p.gamma().powf(-1.0 / (1.0 + p.beta()));
        assert!((r.min - c).abs() < 1e-6 && (r.max - c).abs() < 1e-6);
        let q = ModelProfile::new(1.0, 1.0).unwrap();
        let r = normal_ratio(&QuadraticPotential::half_norm(), &q, &probes, 1e-3).unwrap();
        assert!((r.min - 1.0).abs() < 1e-9 && (r.max - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identity_map_is_perfectly_oblique() {
        let x = ConvexBody::disk(Vec2::new(0.2, 0.1), 1.0, 256).unwrap();
        let u = QuadraticPotential::half_norm();
        let r = obliqueness(&u, &x, &x, 64, 1e-9).unwrap();
        assert_eq!(r.skipped, 0);
        assert!((r.theta_min - 1.0).abs() < 1e-3);
    }

    #[test]
    fn suite_on_quadratic() {
        let u = QuadraticPotential::half_norm();
        let opts = SuiteOptions::default();
        let rep = section_property_suite(&u, Some(&u), &[Vec2::new(0.1, -0.3)], &[0.01, 0.04], &opts).unwrap();
        assert_eq!(rep.skipped, 0);
        let t0 = (opts.t_hi - opts.t_lo).powi(2);
        let amp = 4.0 / 3.0 * (2.0f64 / 3.0).sqrt();
        let vp = 4.0 * std::f64::consts::PI.powi(2);
        for r in &rep.records {
            assert!((r.engulfing_t0.unwrap() / t0 - 1.0).abs() < 1e-2, "{r:?}");
            assert!((r.amp_constant.unwrap() / amp - 1.0).abs() < 1e-2, "{r:?}");
            assert!((r.volume_product.unwrap() / vp - 1.0).abs() < 1e-3, "{r:?}");
            for c in [r.dual_inner, r.dual_outer, r.centered_inner, r.centered_outer] {
                assert!((c.unwrap() - 1.0).abs() < 1e-2, "{r:?}");
            }
        }
    }

    #[test]
    fn profile_volume_product_is_scale_invariant() {
        let p = ModelProfile::new(2.0, 0.0).unwrap();
        let opts = SuiteOptions { engulf_candidates: 4, ..SuiteOptions::default() };
        let rep = section_property_suite(&p, None, &[Vec2::zeros()], &dyadic_heights(0.1, 4), &opts).unwrap();
        assert_eq!(rep.skipped, 0);
        let (lo, hi) = rep.range(|r| r.volume_product).unwrap();
        assert!(hi / lo - 1.0 < 2e-2, "{lo} {hi}");
        assert!(rep.records.iter().all(|r| r.engulfing_t0.is_some()), "{:#?}", rep.records);
    }
}
