//! Least-squares power-law fits.

use crate::error::{Error, Result};

/// Slope of `log y` against `log x` with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentFit {
    pub estimate: f64,
    pub stderr: f64,
    /// `log y` at `log x = 0`.
    pub intercept: f64,
    pub window: (f64, f64),
    pub points: usize,
}

impl ExponentFit {
    pub fn prefactor(&self) -> f64 {
        self.intercept.exp()
    }
}

/// Ordinary least squares `y = a + b·x`; returns `(a, b, stderr(b))`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::invalid("x and y lengths differ"));
    }
    if n < 2 {
        return Err(Error::invalid("need at least two points for a fit"));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("abscissae are all equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let se = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a0, b0)| (b0 - a - b * a0).powi(2)).sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok((a, b, se))
}

/// Power-law fit `y ∼ C x^s` over positive samples.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<ExponentFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("log-log fit needs positive finite samples"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (a, b, se) = linear_fit(&lx, &ly)?;
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ExponentFit { estimate: b, stderr: se, intercept: a, window: (lo, hi), points: x.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x: Vec<f64> = (1..10).map(|k| 0.5f64.powi(k)).collect();
        let y: Vec<f64> = x.iter().map(|t| 3.0 * t.powf(1.25)).collect();
        let fit = loglog_fit(&x, &y).unwrap();
        assert!((fit.estimate - 1.25).abs() < 1e-12);
        assert!((fit.prefactor() - 3.0).abs() < 1e-10);
        assert!(fit.stderr < 1e-10);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(loglog_fit(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }
}
