use std::f64::consts::{FRAC_2_PI, PI};

use super::bivariate::bivariate_normal_cdf;
use super::normal::ncdf;
use super::{sgn, Gaussian1, Gaussian2};
use crate::error::{Error, Result};

/// Below this value of `1 - r^2` the precision-matrix route of
/// [`cross_moment`] loses accuracy and the closed form is used instead.
const NEAR_SINGULAR: f64 = 1e-4;

/// `E{sgn u}` for `u ~ N(mean, variance)`, i.e. `1 - 2 Phi(-mean / sigma)`.
/// A point mass returns `sgn(mean)`.
pub fn sign_mean(g: &Gaussian1) -> Result<f64> {
    g.validate()?;
    Ok(sign_mean_unchecked(g.mean, g.variance))
}

#[inline]
pub(crate) fn sign_mean_unchecked(mean: f64, variance: f64) -> f64 {
    if variance == 0.0 {
        sgn(mean)
    } else {
        1.0 - 2.0 * ncdf(-mean / variance.sqrt())
    }
}

/// `E{sgn u · sgn v}` for a jointly Gaussian pair.
///
/// Sums the two same-sign quadrants and subtracts the two opposite-sign
/// quadrants, each written as a bivariate CDF at the origin:
/// `Phi(0; mu, S) + Phi(0; -mu, S) - Phi(0; (mu_u, -mu_v), S') - Phi(0; (-mu_u, mu_v), S')`
/// where `S'` is `S` with the off-diagonal negated.
pub fn sign_product(g: &Gaussian2) -> Result<f64> {
    g.validate()?;
    match (g.var_u == 0.0, g.var_v == 0.0) {
        (true, true) => return Ok(sgn(g.mean_u) * sgn(g.mean_v)),
        (true, false) => return Ok(sgn(g.mean_u) * sign_mean_unchecked(g.mean_v, g.var_v)),
        (false, true) => return Ok(sgn(g.mean_v) * sign_mean_unchecked(g.mean_u, g.var_u)),
        (false, false) => {}
    }
    let flipped = |mu: f64, mv: f64, cov: f64| Gaussian2 {
        mean_u: mu,
        mean_v: mv,
        var_u: g.var_u,
        var_v: g.var_v,
        cov_uv: cov,
    };
    let c = g.cov_uv;
    let both_neg = bivariate_normal_cdf(0.0, 0.0, g)?;
    let both_pos = bivariate_normal_cdf(0.0, 0.0, &flipped(-g.mean_u, -g.mean_v, c))?;
    let u_neg_v_pos = bivariate_normal_cdf(0.0, 0.0, &flipped(g.mean_u, -g.mean_v, -c))?;
    let u_pos_v_neg = bivariate_normal_cdf(0.0, 0.0, &flipped(-g.mean_u, g.mean_v, -c))?;
    Ok((both_neg + both_pos - u_neg_v_pos - u_pos_v_neg).clamp(-1.0, 1.0))
}

/// Sign applied to the argument of `Phi` in the first integral of the
/// precision-matrix derivation of `E{u · sgn v}`.
///
/// `Standard` is `1 - 2 Phi(-mu_v sqrt(delta))`, which is what the
/// univariate sign mean gives. `Flipped` uses the positive argument and is
/// only useful to show that the verification suite rejects it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignConvention {
    #[default]
    Standard,
    Flipped,
}

/// `E{u · sgn v}` assembled from the precision matrix
/// `inv(S) = [[a, c], [c, b]]`, `delta = b - c^2 / a`.
///
/// The inner integral over `u` leaves the conditional mean
/// `mu_u - (c / a)(v - mu_v)`; the outer integral splits into a sign-mean
/// term and a folded-Gaussian mean term. Requires a nonsingular covariance.
pub fn cross_moment_precision(g: &Gaussian2, convention: SignConvention) -> Result<f64> {
    g.validate()?;
    let det = g.var_u * g.var_v - g.cov_uv * g.cov_uv;
    if det.is_nan() || det <= 0.0 {
        return Err(Error::domain(
            "precision-matrix form needs a nonsingular covariance",
        ));
    }
    let a = g.var_v / det;
    let b = g.var_u / det;
    let c = -g.cov_uv / det;
    let delta = b - c * c / a;
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::domain(format!("delta = {delta} is not positive")));
    }
    let (mu_u, mu_v) = (g.mean_u, g.mean_v);
    let c_over_a = c / a;
    let width = (2.0 * PI / delta).sqrt();
    let sd = delta.sqrt();

    let first_arg = match convention {
        SignConvention::Standard => -mu_v * sd,
        SignConvention::Flipped => mu_v * sd,
    };
    let first = (mu_u + c_over_a * mu_v) * width * (1.0 - 2.0 * ncdf(first_arg));

    let folded_mean = (2.0 / (delta * PI)).sqrt() * (-0.5 * mu_v * mu_v * delta).exp()
        + mu_v * (1.0 - 2.0 * ncdf(-mu_v * sd));
    let second = c_over_a * width * folded_mean;

    let prefactor = 1.0 / (2.0 * PI * a * det).sqrt();
    Ok(prefactor * (first - second))
}

/// `E{u · sgn v} = mu_u (1 - 2 Phi(-mu_v / s_v)) + cov_uv sqrt(2/pi) exp(-mu_v^2 / (2 s_v^2)) / s_v`.
///
/// Valid for singular covariances too; `var_v = 0` returns `mu_u sgn(mu_v)`.
pub fn cross_moment_closed_form(g: &Gaussian2) -> Result<f64> {
    g.validate()?;
    Ok(closed_form_unchecked(g))
}

fn closed_form_unchecked(g: &Gaussian2) -> f64 {
    if g.var_v == 0.0 {
        return g.mean_u * sgn(g.mean_v);
    }
    let sv = g.var_v.sqrt();
    let z = g.mean_v / sv;
    g.mean_u * (1.0 - 2.0 * ncdf(-z)) + g.cov_uv * FRAC_2_PI.sqrt() * (-0.5 * z * z).exp() / sv
}

/// `E{u · sgn v}` for a jointly Gaussian pair.
///
/// Uses the precision-matrix assembly for well-conditioned pairs and the
/// equivalent closed form when the covariance is singular or nearly so
/// (including `u = v + const`, which the diagonal of the model needs).
pub fn cross_moment(g: &Gaussian2) -> Result<f64> {
    g.validate()?;
    if g.var_v == 0.0 || g.var_u == 0.0 {
        return Ok(closed_form_unchecked(g));
    }
    let r = g.correlation();
    if 1.0 - r * r < NEAR_SINGULAR {
        return Ok(closed_form_unchecked(g));
    }
    cross_moment_precision(g, SignConvention::Standard)
}
