//! Closed-form sign moments of Gaussian variables and the normal CDFs they
//! are built on.
//!
//! The three moments needed by the transient model are
//!
//! * `E{sgn u}` for scalar `u ~ N(mean, var)` ([`sign_mean`]),
//! * `E{sgn u · sgn v}` for a jointly Gaussian pair ([`sign_product`]),
//! * `E{u · sgn v}` for a jointly Gaussian pair ([`cross_moment`]).
//!
//! Means are arbitrary, so Price's theorem does not apply; every moment is
//! reduced to univariate or bivariate normal CDFs. Degenerate (zero-variance)
//! inputs are handled by their exact limits rather than by flooring the
//! variance, and `sgn(0) = 0` throughout.
//!
//! [`oracle`] evaluates the same expectations by direct numerical
//! integration of the density or by Monte Carlo sampling, independently of
//! the closed forms.

mod bivariate;
mod lemmas;
mod normal;
pub mod oracle;
pub mod quad;
pub mod suite;

pub use bivariate::{bivariate_normal_cdf, bvn_upper};
pub(crate) use lemmas::sign_mean_unchecked;
pub use lemmas::{
    cross_moment, cross_moment_closed_form, cross_moment_precision, sign_mean, sign_product,
    SignConvention,
};
pub use normal::{std_normal_cdf, std_normal_pdf};

use crate::error::{Error, Result};

/// Tolerance below which a slightly negative variance is treated as
/// floating-point cancellation and clamped to zero.
pub const VARIANCE_CLAMP: f64 = 1e-12;

/// Tolerance within which a correlation outside `[-1, 1]` (or a covariance
/// outside the PSD cone) is clamped back onto the boundary.
pub const CORRELATION_CLAMP: f64 = 1e-10;

/// Sign with `sgn(0) = 0`.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Scalar Gaussian `N(mean, variance)`; `variance == 0` is a point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1 {
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian1 {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        let g = Gaussian1 { mean, variance };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() || !self.variance.is_finite() {
            return Err(Error::domain("Gaussian1 parameters must be finite"));
        }
        if self.variance < 0.0 {
            return Err(Error::domain(format!(
                "negative variance {}",
                self.variance
            )));
        }
        Ok(())
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Jointly Gaussian pair `(u, v)` with mean `(mean_u, mean_v)` and
/// covariance `[[var_u, cov_uv], [cov_uv, var_v]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2 {
    pub mean_u: f64,
    pub mean_v: f64,
    pub var_u: f64,
    pub var_v: f64,
    pub cov_uv: f64,
}

impl Gaussian2 {
    pub fn new(mean_u: f64, mean_v: f64, var_u: f64, var_v: f64, cov_uv: f64) -> Result<Self> {
        let g = Gaussian2 {
            mean_u,
            mean_v,
            var_u,
            var_v,
            cov_uv,
        };
        g.validate()?;
        Ok(g)
    }

    /// Pair with unit variances and correlation `r`.
    pub fn standard(mean_u: f64, mean_v: f64, r: f64) -> Self {
        Gaussian2 {
            mean_u,
            mean_v,
            var_u: 1.0,
            var_v: 1.0,
            cov_uv: r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.mean_u,
            self.mean_v,
            self.var_u,
            self.var_v,
            self.cov_uv,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("Gaussian2 parameters must be finite"));
        }
        if self.var_u < 0.0 || self.var_v < 0.0 {
            return Err(Error::domain(format!(
                "negative variance ({}, {})",
                self.var_u, self.var_v
            )));
        }
        let bound = (self.var_u * self.var_v).sqrt();
        if self.cov_uv.abs() > bound * (1.0 + CORRELATION_CLAMP) + f64::MIN_POSITIVE {
            return Err(Error::domain(format!(
                "covariance {} exceeds sqrt(var_u * var_v) = {}",
                self.cov_uv, bound
            )));
        }
        Ok(())
    }

    /// Correlation coefficient clamped to `[-1, 1]`; zero when either
    /// variance vanishes.
    pub fn correlation(&self) -> f64 {
        let denom = (self.var_u * self.var_v).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            (self.cov_uv / denom).clamp(-1.0, 1.0)
        }
    }

    pub fn marginal_u(&self) -> Gaussian1 {
        Gaussian1 {
            mean: self.mean_u,
            variance: self.var_u,
        }
    }

    pub fn marginal_v(&self) -> Gaussian1 {
        Gaussian1 {
            mean: self.mean_v,
            variance: self.var_v,
        }
    }

    /// The same pair with `u` and `v` exchanged.
    pub fn swapped(&self) -> Self {
        Gaussian2 {
            mean_u: self.mean_v,
            mean_v: self.mean_u,
            var_u: self.var_v,
            var_v: self.var_u,
            cov_uv: self.cov_uv,
        }
    }
}
