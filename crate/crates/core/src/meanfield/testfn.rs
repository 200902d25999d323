//! Compactly supported C^2 test functions.
//!
//! The built-in family is the bump `phi(x) = (1 - |x-c|^2/r^2)^3` inside the
//! radius-`r` ball around `c` and zero outside. Its gradient and diagonal
//! second derivatives vanish at the support boundary, so the closed forms
//! below are globally C^2.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct TestFunction {
    center: Vec<f64>,
    radius: f64,
}

impl TestFunction {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid_param("center", "must be non-empty"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid_param("radius", "must be finite and > 0"));
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_param("center", "must be finite"));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `u = |x - c|^2 / r^2`.
    fn u(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.center.len());
        let r2 = self.radius * self.radius;
        x.iter()
            .zip(&self.center)
            .map(|(xi, ci)| (xi - ci) * (xi - ci))
            .sum::<f64>()
            / r2
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let u = self.u(x);
        if u >= 1.0 {
            0.0
        } else {
            let v = 1.0 - u;
            v * v * v
        }
    }

    /// Closed-form gradient: `-6 (x_k - c_k) (1-u)^2 / r^2` inside the ball.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let u = self.u(x);
        if u >= 1.0 {
            return vec![0.0; x.len()];
        }
        let r2 = self.radius * self.radius;
        let v = 1.0 - u;
        x.iter()
            .zip(&self.center)
            .map(|(xi, ci)| -6.0 * (xi - ci) * v * v / r2)
            .collect()
    }

    /// Closed-form diagonal second derivatives:
    /// `-6 (1-u)^2 / r^2 + 24 (x_k - c_k)^2 (1-u) / r^4` inside the ball.
    pub fn hessian_diag(&self, x: &[f64]) -> Vec<f64> {
        let u = self.u(x);
        if u >= 1.0 {
            return vec![0.0; x.len()];
        }
        let r2 = self.radius * self.radius;
        let v = 1.0 - u;
        x.iter()
            .zip(&self.center)
            .map(|(xi, ci)| {
                let d = xi - ci;
                -6.0 * v * v / r2 + 24.0 * d * d * v / (r2 * r2)
            })
            .collect()
    }
}
