use nalgebra::{DMatrix, DVector};

use super::ModelProfile;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::transport2d::PotentialField;

/// Least-squares fit of `p₀ + p′x′ + P′x′² + p_n x_n^{1+γ}`, with `γ` fixed
/// by the profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiouvilleFit {
    pub p0: f64,
    pub p1: f64,
    /// Coefficient of `|x′|²`; `½` for the model profile.
    pub p_tt: f64,
    pub pn: f64,
    /// Root-mean-square residual.
    pub rms: f64,
    pub max_residual: f64,
    pub points: usize,
}

impl LiouvilleFit {
    /// `p_n > 0` and `P′` positive definite.
    pub fn is_admissible(&self) -> bool {
        self.pn > 0.0 && self.p_tt > 0.0
    }
}

pub fn liouville_fit(points: &[Vec2], values: &[f64], p: &ModelProfile) -> Result<LiouvilleFit> {
    if points.len() != values.len() {
        return Err(Error::invalid("points and values differ in length"));
    }
    if points.len() < 4 {
        return Err(Error::invalid("the fit has four coefficients and needs at least four samples"));
    }
    if let Some(x) = points.iter().find(|x| !(x.y >= 0.0)) {
        return Err(Error::invalid(format!("fit samples need x_n ≥ 0, got {}", x.y)));
    }
    let g = p.gamma();
    let n = points.len();
    let a = DMatrix::from_fn(n, 4, |r, c| {
        let x = points[r];
        match c {
            0 => 1.0,
            1 => x.x,
            2 => x.x * x.x,
            _ => x.y.powf(1.0 + g),
        }
    });
    let b = DVector::from_column_slice(values);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax {
        return Err(Error::invalid("samples do not determine the four fit coefficients"));
    }
    let coef = svd.solve(&b, 1e-14 * smax).map_err(Error::invalid)?;
    let res = &a * &coef - &b;
    let rms = (res.norm_squared() / n as f64).sqrt();
    let max_residual = res.amax();
    Ok(LiouvilleFit { p0: coef[0], p1: coef[1], p_tt: coef[2], pn: coef[3], rms, max_residual, points: n })
}

/// Fit over the field's nodes in `{x_n ≥ 0}`.
pub fn liouville_check(u: &PotentialField, p: &ModelProfile) -> Result<LiouvilleFit> {
    let (pts, vals): (Vec<Vec2>, Vec<f64>) =
        u.nodes().iter().zip(u.values()).filter(|(x, _)| x.y >= 0.0).map(|(x, v)| (*x, *v)).unzip();
    liouville_fit(&pts, &vals, p)
}
