//! The zero-attracting LMS update
//! `w_{n+1} = w_n + mu e_n x_n - rho sgn(w_n)`, `e_n = y_n - w_n^T x_n`,
//! with `rho = mu * lambda`.

use crate::error::{check_dim, Error, Result};
use crate::gaussmath::sgn;
use crate::linalg::{dot, Matrix};
use crate::signals::PlantSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgoParams {
    /// `mu`
    pub step_size: f64,
    /// `lambda`, weight of the l1 penalty.
    pub reg_weight: f64,
}

impl AlgoParams {
    pub fn new(step_size: f64, reg_weight: f64) -> Result<Self> {
        let p = AlgoParams {
            step_size,
            reg_weight,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::domain(format!(
                "step size {} must be positive",
                self.step_size
            )));
        }
        if !(self.reg_weight >= 0.0 && self.reg_weight.is_finite()) {
            return Err(Error::domain(format!(
                "regularization weight {} must be >= 0",
                self.reg_weight
            )));
        }
        Ok(())
    }

    /// `rho = mu * lambda`
    #[inline]
    pub fn attractor_gain(&self) -> f64 {
        self.step_size * self.reg_weight
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub w: Vec<f64>,
    pub n: usize,
}

impl FilterState {
    pub fn zeros(len: usize) -> Self {
        FilterState {
            w: vec![0.0; len],
            n: 0,
        }
    }

    pub fn with_weights(w: Vec<f64>) -> Self {
        FilterState { w, n: 0 }
    }

    /// `w - w*`
    pub fn weight_error(&self, w_star: &[f64]) -> Vec<f64> {
        self.w.iter().zip(w_star).map(|(w, s)| w - s).collect()
    }

    /// In-place ZA-LMS step; returns the a-priori error `e_n`.
    pub fn step(&mut self, x: &[f64], y: f64, p: &AlgoParams) -> Result<f64> {
        check_dim(self.w.len(), x.len())?;
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite regressor or desired sample"));
        }
        let e = y - dot(&self.w, x);
        let gain = p.step_size * e;
        let rho = p.attractor_gain();
        if rho == 0.0 {
            for (w, xi) in self.w.iter_mut().zip(x) {
                *w += gain * xi;
            }
        } else {
            for (w, xi) in self.w.iter_mut().zip(x) {
                *w += gain * xi - rho * sgn(*w);
            }
        }
        self.n += 1;
        if self.w.iter().any(|w| !w.is_finite()) {
            return Err(Error::domain(format!(
                "weights became non-finite at step {}",
                self.n
            )));
        }
        Ok(e)
    }
}

/// Functional form of [`FilterState::step`].
pub fn za_lms_step(
    state: &FilterState,
    x: &[f64],
    y: f64,
    p: &AlgoParams,
) -> Result<(FilterState, f64)> {
    let mut next = state.clone();
    let e = next.step(x, y, p)?;
    Ok((next, e))
}

/// Regularized cost `E{(y - w^T x)^2} + lambda ||w||_1`, evaluated as
/// `noise_var + (w - w*)^T R (w - w*) + lambda ||w||_1`.
pub fn objective_value(w: &[f64], plant: &PlantSpec, rx: &Matrix, reg_weight: f64) -> Result<f64> {
    check_dim(plant.len(), w.len())?;
    check_dim(plant.len(), rx.dim())?;
    let err: Vec<f64> = w.iter().zip(&plant.w_star).map(|(a, b)| a - b).collect();
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    Ok(plant.noise_var + rx.quad_form(&err)? + reg_weight * l1)
}
