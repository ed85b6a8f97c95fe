//! The flat boundary model: the explicit profile `U`, the anisotropic
//! rescalings that fix it, cylinders, the linearized Grushin operator and
//! the Liouville fit.
//!
//! Coordinates are `x = (x′, x_n)` with `x′ = x.x` tangential and
//! `x_n = x.y ≥ 0` normal; the flat boundary is `{x_n = 0}`.

mod grushin;
mod liouville;

pub use grushin::{grushin_apply, grushin_solve, GridField, GrushinProblem, GrushinSolution, KernelPolynomial};
pub use liouville::{liouville_check, liouville_fit, LiouvilleFit};

use crate::error::{Error, Result};
use crate::geometry::{Mat2, Polygon, Vec2};
use crate::transport2d::{ConvexPotential, Domain, PotentialField};

/// `γ = (1+α)/(1+β)`.
pub fn gamma(alpha: f64, beta: f64) -> f64 {
    (1.0 + alpha) / (1.0 + beta)
}

/// `c_U = γ^{β/(1+β)} / ((1+γ)γ)`.
pub fn c_u(alpha: f64, beta: f64) -> f64 {
    let g = gamma(alpha, beta);
    g.powf(beta / (1.0 + beta)) / ((1.0 + g) * g)
}

fn check_exponents(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be finite and ≥ 0, got {alpha}")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be finite and ≥ 0, got {beta}")));
    }
    Ok(())
}

/// `U_τ(x) = |x′|²/2 + c_U x_n^{1+γ} + τ x′`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelProfile {
    alpha: f64,
    beta: f64,
    tilt: f64,
}

/// Closed-form value and derivatives of the profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileEval {
    pub value: f64,
    pub gradient: Vec2,
    pub hessian: Mat2,
}

impl ModelProfile {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        check_exponents(alpha, beta)?;
        Ok(ModelProfile { alpha, beta, tilt: 0.0 })
    }

    pub fn with_tilt(self, tilt: f64) -> Self {
        ModelProfile { tilt, ..self }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tilt(&self) -> f64 {
        self.tilt
    }

    pub fn gamma(&self) -> f64 {
        gamma(self.alpha, self.beta)
    }

    pub fn c_u(&self) -> f64 {
        c_u(self.alpha, self.beta)
    }

    /// `γ^{β/(1+β)}`, the tangential coefficient of the Grushin operator.
    pub fn kappa(&self) -> f64 {
        self.gamma().powf(self.beta / (1.0 + self.beta))
    }

    /// `U_n / x_n^γ = γ^{−1/(1+β)}`.
    pub fn normal_constant(&self) -> f64 {
        self.gamma().powf(-1.0 / (1.0 + self.beta))
    }

    /// Value, gradient and Hessian at `x` with `x_n ≥ 0`.
    pub fn eval(&self, x: Vec2) -> Result<ProfileEval> {
        if !(x.y >= 0.0) {
            return Err(Error::invalid(format!("profile is defined for x_n ≥ 0, got {}", x.y)));
        }
        let g = self.gamma();
        let c = self.c_u();
        let yn = x.y;
        let value = 0.5 * x.x * x.x + c * yn.powf(1.0 + g) + self.tilt * x.x;
        let gradient = Vec2::new(x.x + self.tilt, c * (1.0 + g) * yn.powf(g));
        let unn = c * (1.0 + g) * g * yn.powf(g - 1.0);
        Ok(ProfileEval { value, gradient, hessian: Mat2::new(1.0, 0.0, 0.0, unn) })
    }

    /// `U(D_t x)/t`; equal to `U` for every `t` when untilted.
    pub fn rescaled_value(&self, x: Vec2, t: f64) -> Result<f64> {
        let d = Rescaling::new(t, self.gamma())?;
        Ok(self.eval(d.apply(x))?.value / t)
    }
}

impl ConvexPotential for ModelProfile {
    /// Below the boundary this is the minimal convex extension
    /// `|x′|²/2 + τx′`, since `U_n` vanishes on `{x_n = 0}`.
    fn value(&self, x: Vec2) -> f64 {
        if x.y >= 0.0 {
            self.eval(x).map(|e| e.value).unwrap_or(f64::NAN)
        } else {
            0.5 * x.x * x.x + self.tilt * x.x
        }
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        if x.y >= 0.0 {
            self.eval(x).map(|e| e.gradient).unwrap_or(Vec2::new(f64::NAN, f64::NAN))
        } else {
            Vec2::new(x.x + self.tilt, 0.0)
        }
    }

    fn domain(&self) -> Domain<'_> {
        Domain::HalfPlane { inner_normal: Vec2::new(0.0, 1.0), offset: 0.0 }
    }
}

/// `det D²u · u_n^β − x_n^α` from a Hessian and normal derivative.
pub fn ma_residual(hessian: &Mat2, u_n: f64, x_n: f64, alpha: f64, beta: f64) -> f64 {
    hessian.determinant() * u_n.powf(beta) - x_n.powf(alpha)
}

/// Largest Monge–Ampère residual of the profile over `points` (all with
/// `x_n > 0`).
pub fn verify_ma_identity(p: &ModelProfile, points: &[Vec2]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in points {
        if !(x.y > 0.0) {
            return Err(Error::invalid(format!("residual points need x_n > 0, got {}", x.y)));
        }
        let e = p.eval(*x)?;
        worst = worst.max(ma_residual(&e.hessian, e.gradient.y, x.y, p.alpha, p.beta).abs());
    }
    Ok(worst)
}

/// `q_n^{α+β} (det Q)²` for `Q = diag(q′, q_n)`.
pub fn determinant_normalization(q_t: f64, q_n: f64, alpha: f64, beta: f64) -> f64 {
    q_n.powf(alpha + beta) * (q_t * q_n).powi(2)
}

/// Largest residual of `v(x) = U(Qx)` for `Q = diag(q′, q_n)` over
/// `points`; zero exactly when the determinant normalization equals one.
pub fn normalized_ma_residual(p: &ModelProfile, q_t: f64, q_n: f64, points: &[Vec2]) -> Result<f64> {
    if !(q_t > 0.0 && q_n > 0.0) {
        return Err(Error::invalid("normalization entries must be positive"));
    }
    let q = Mat2::new(q_t, 0.0, 0.0, q_n);
    let mut worst: f64 = 0.0;
    for x in points {
        if !(x.y > 0.0) {
            return Err(Error::invalid("residual points need x_n > 0"));
        }
        let e = p.eval(q * x)?;
        let hess = q * e.hessian * q;
        let v_n = q_n * e.gradient.y;
        worst = worst.max(ma_residual(&hess, v_n, x.y, p.alpha, p.beta).abs());
    }
    Ok(worst)
}

/// `D_t = diag(t^{1/2}, t^{1/(1+γ)})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rescaling {
    t: f64,
    gamma: f64,
}

impl Rescaling {
    pub fn new(t: f64, gamma: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("rescaling parameter must be positive, got {t}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Rescaling { t, gamma })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn diagonal(&self) -> Vec2 {
        Vec2::new(self.t.sqrt(), self.t.powf(1.0 / (1.0 + self.gamma)))
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::from_diagonal(&self.diagonal())
    }

    pub fn apply(&self, x: Vec2) -> Vec2 {
        self.diagonal().component_mul(&x)
    }

    /// `D_s ∘ D_t = D_{st}`.
    pub fn compose(&self, other: &Rescaling) -> Result<Rescaling> {
        if (self.gamma - other.gamma).abs() > 1e-15 * self.gamma {
            return Err(Error::invalid("rescalings with different γ do not compose"));
        }
        Rescaling::new(self.t * other.t, self.gamma)
    }
}

/// `u_t(x) = u(D_t x)/t` for a sampled field.
///
/// The envelope transforms exactly, so no resampling error is introduced.
pub fn rescale(u: &PotentialField, t: f64, p: &ModelProfile) -> Result<PotentialField> {
    let d = Rescaling::new(t, p.gamma())?;
    u.pullback_diag(d.diagonal(), t)
}

/// `𝒞_r(z) = B′_{r^{1/2}}(z′) × (z_n − r^{1/(1+γ)}, z_n + r^{1/(1+γ)})`;
/// the dual cylinder uses the normal exponent `γ/(1+γ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cylinder {
    pub center: Vec2,
    pub r: f64,
    pub gamma: f64,
    pub dual: bool,
}

impl Cylinder {
    pub fn new(center: Vec2, r: f64, gamma: f64) -> Result<Self> {
        if !(r > 0.0 && gamma > 0.0) {
            return Err(Error::invalid("cylinder needs r > 0 and γ > 0"));
        }
        Ok(Cylinder { center, r, gamma, dual: false })
    }

    pub fn dual(center: Vec2, r: f64, gamma: f64) -> Result<Self> {
        Ok(Cylinder { dual: true, ..Cylinder::new(center, r, gamma)? })
    }

    /// Tangential and normal half-widths.
    pub fn half_widths(&self) -> (f64, f64) {
        let e = if self.dual { self.gamma / (1.0 + self.gamma) } else { 1.0 / (1.0 + self.gamma) };
        (self.r.sqrt(), self.r.powf(e))
    }

    /// Open cylinder membership.
    pub fn contains(&self, x: Vec2) -> bool {
        let (a, b) = self.half_widths();
        (x.x - self.center.x).abs() < a && (x.y - self.center.y).abs() < b
    }

    pub fn to_polygon(&self) -> Polygon {
        let (a, b) = self.half_widths();
        Polygon::rect(self.center - Vec2::new(a, b), self.center + Vec2::new(a, b))
    }

    /// The part in `{x_n ≥ 0}`.
    pub fn upper_polygon(&self) -> Polygon {
        self.to_polygon().clip(Vec2::new(0.0, -1.0), 0.0)
    }
}

/// `λ̄ = λ + 2/(1+γ)`.
pub fn lambda_bar(lambda: f64, gamma: f64) -> f64 {
    lambda + 2.0 / (1.0 + gamma)
}

/// `λ̲ = λ + 2γ/(1+γ)`.
pub fn lambda_under(lambda: f64, gamma: f64) -> f64 {
    lambda + 2.0 * gamma / (1.0 + gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_basics() {
        let p = ModelProfile::new(1.0, 2.0).unwrap();
        let e = p.eval(Vec2::zeros()).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.gradient, Vec2::zeros());
        assert!(p.eval(Vec2::new(0.0, -1.0)).is_err());
        // γ = 1 makes c_U(1+γ) = 1
        let q = ModelProfile::new(2.0, 2.0).unwrap();
        let e = q.eval(Vec2::new(0.4, 0.7)).unwrap();
        assert!((e.gradient.y - 0.7).abs() < 1e-15);
    }

    #[test]
    fn exponent_identity() {
        for a in [0.0, 0.5, 1.0, 2.0, 3.7] {
            for b in [0.0, 0.25, 1.0, 2.0, 5.0] {
                let g = gamma(a, b);
                assert!((a - g * b - (g - 1.0)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ma_identity_at_a_point() {
        let p = ModelProfile::new(1.0, 2.0).unwrap();
        assert!(verify_ma_identity(&p, &[Vec2::new(0.3, 0.7)]).unwrap() < 1e-14);
        let t = p.with_tilt(0.8);
        assert!(verify_ma_identity(&t, &[Vec2::new(0.3, 0.7)]).unwrap() < 1e-14);
    }

    #[test]
    fn rescaling_fixes_profile() {
        let p = ModelProfile::new(2.0, 0.0).unwrap();
        let x = Vec2::new(0.6, 0.9);
        for t in [1e-3, 0.25, 7.0] {
            let v = p.rescaled_value(x, t).unwrap();
            assert!((v - p.value(x)).abs() < 1e-14);
        }
        let a = Rescaling::new(0.3, 3.0).unwrap();
        let b = Rescaling::new(0.5, 3.0).unwrap();
        let ab = a.compose(&b).unwrap();
        assert!((ab.apply(x) - a.apply(b.apply(x))).norm() < 1e-15);
    }

    #[test]
    fn normalization_identity() {
        let p = ModelProfile::new(1.0, 1.0).unwrap();
        let pts = [Vec2::new(0.2, 0.3), Vec2::new(-1.0, 2.0)];
        let q_n: f64 = 1.7;
        // q_n^{α+β} (q′ q_n)² = 1
        let q_t = (q_n.powf(-(p.alpha() + p.beta()))).sqrt() / q_n;
        assert!((determinant_normalization(q_t, q_n, 1.0, 1.0) - 1.0).abs() < 1e-14);
        assert!(normalized_ma_residual(&p, q_t, q_n, &pts).unwrap() < 1e-12);
        assert!(normalized_ma_residual(&p, 1.1 * q_t, q_n, &pts).unwrap() > 1e-3);
    }

    #[test]
    fn cylinder_shapes() {
        let c = Cylinder::new(Vec2::zeros(), 0.25, 3.0).unwrap();
        let (a, b) = c.half_widths();
        assert!((a - 0.5).abs() < 1e-15 && (b - 0.25f64.powf(0.25)).abs() < 1e-15);
        let d = Cylinder::dual(Vec2::zeros(), 0.25, 3.0).unwrap();
        assert!((d.half_widths().1 - 0.25f64.powf(0.75)).abs() < 1e-15);
        assert!(c.contains(Vec2::new(0.49, 0.0)) && !c.contains(Vec2::new(0.51, 0.0)));
        assert!((lambda_bar(1.0, 3.0) - 1.5).abs() < 1e-15);
        assert!((lambda_under(1.0, 3.0) - 2.5).abs() < 1e-15);
    }
}
