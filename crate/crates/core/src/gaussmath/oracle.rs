//! Numerical reference values for the Gaussian sign moments.
//!
//! Nothing here calls the closed forms: quadrature integrates the density in
//! standardized coordinates with breakpoints at the sign discontinuities,
//! and the Monte Carlo path samples the pair directly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::quad::{integrate, QuadConfig};
use super::{sgn, Gaussian1, Gaussian2};
use crate::error::{Error, Result};

/// Standardized half-width of the integration box; the Gaussian mass beyond
/// it is below 1e-32.
const HALF_WIDTH: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    /// `E{sgn u}`
    SignMean,
    /// `E{sgn u · sgn v}`
    SignProduct,
    /// `E{u · sgn v}`
    CrossMoment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleInput {
    One(Gaussian1),
    Two(Gaussian2),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleMode {
    Quadrature { abs_tol: f64 },
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate {
    pub value: f64,
    /// Quadrature error bound, or one Monte Carlo standard error.
    pub error: f64,
}

pub fn oracle_moment(
    kind: MomentKind,
    input: OracleInput,
    mode: OracleMode,
) -> Result<OracleEstimate> {
    match (kind, input) {
        (MomentKind::SignMean, OracleInput::One(g)) => {
            g.validate()?;
            match mode {
                OracleMode::Quadrature { abs_tol } => sign_mean_quad(&g, abs_tol),
                OracleMode::MonteCarlo { samples, seed } => {
                    let pair = Gaussian2 {
                        mean_u: g.mean,
                        mean_v: 0.0,
                        var_u: g.variance,
                        var_v: 0.0,
                        cov_uv: 0.0,
                    };
                    monte_carlo(&pair, samples, seed, |u, _| sgn(u))
                }
            }
        }
        (MomentKind::SignProduct, OracleInput::Two(g)) => {
            g.validate()?;
            match mode {
                OracleMode::Quadrature { abs_tol } => pair_quad(&g, abs_tol, |_| 1.0, true),
                OracleMode::MonteCarlo { samples, seed } => {
                    monte_carlo(&g, samples, seed, |u, v| sgn(u) * sgn(v))
                }
            }
        }
        (MomentKind::CrossMoment, OracleInput::Two(g)) => {
            g.validate()?;
            match mode {
                OracleMode::Quadrature { abs_tol } => pair_quad(&g, abs_tol, |u| u, false),
                OracleMode::MonteCarlo { samples, seed } => {
                    monte_carlo(&g, samples, seed, |u, v| u * sgn(v))
                }
            }
        }
        (kind, _) => Err(Error::domain(format!(
            "{kind:?} oracle called with the wrong distribution arity"
        ))),
    }
}

fn density(z: f64) -> f64 {
    (-0.5 * z * z).exp() * 0.398_942_280_401_432_7
}

fn quad_cfg(abs_tol: f64) -> QuadConfig {
    QuadConfig {
        abs_tol,
        max_evaluations: 400_000,
    }
}

fn sign_mean_quad(g: &Gaussian1, abs_tol: f64) -> Result<OracleEstimate> {
    if g.variance == 0.0 {
        return Ok(OracleEstimate {
            value: sgn(g.mean),
            error: 0.0,
        });
    }
    let s = g.std_dev();
    let est = integrate(
        |z| sgn(g.mean + s * z) * density(z),
        -HALF_WIDTH,
        HALF_WIDTH,
        &[-g.mean / s],
        quad_cfg(abs_tol),
    )?;
    Ok(OracleEstimate {
        value: est.value,
        error: est.error,
    })
}

/// `E{outer(u) · sgn v}` (times `sgn u` when `sign_u`), integrating
/// `z1` on the outside and `z2` on the inside, where
/// `u = mu_u + s_u z1`, `v = mu_v + s_v (r z1 + sqrt(1 - r^2) z2)`.
fn pair_quad(
    g: &Gaussian2,
    abs_tol: f64,
    outer: impl Fn(f64) -> f64,
    sign_u: bool,
) -> Result<OracleEstimate> {
    let su = g.var_u.sqrt();
    let sv = g.var_v.sqrt();
    let weight_u = |u: f64| if sign_u { sgn(u) } else { outer(u) };

    // Point masses in either coordinate.
    if su == 0.0 && sv == 0.0 {
        return Ok(OracleEstimate {
            value: weight_u(g.mean_u) * sgn(g.mean_v),
            error: 0.0,
        });
    }
    if sv == 0.0 {
        let est = integrate(
            |z| weight_u(g.mean_u + su * z) * density(z),
            -HALF_WIDTH,
            HALF_WIDTH,
            &[-g.mean_u / su],
            quad_cfg(abs_tol),
        )?;
        return Ok(OracleEstimate {
            value: est.value * sgn(g.mean_v),
            error: est.error,
        });
    }
    if su == 0.0 {
        let est = integrate(
            |z| sgn(g.mean_v + sv * z) * density(z),
            -HALF_WIDTH,
            HALF_WIDTH,
            &[-g.mean_v / sv],
            quad_cfg(abs_tol),
        )?;
        return Ok(OracleEstimate {
            value: est.value * weight_u(g.mean_u),
            error: est.error * weight_u(g.mean_u).abs(),
        });
    }

    let r = (g.cov_uv / (su * sv)).clamp(-1.0, 1.0);
    let s = ((1.0 - r) * (1.0 + r)).sqrt();
    let u_break = -g.mean_u / su;

    if s < 1e-12 {
        // Perfect correlation: v is an affine function of z1.
        let v_break = -g.mean_v / (sv * r);
        let est = integrate(
            |z| weight_u(g.mean_u + su * z) * sgn(g.mean_v + sv * r * z) * density(z),
            -HALF_WIDTH,
            HALF_WIDTH,
            &[u_break, v_break],
            quad_cfg(abs_tol),
        )?;
        return Ok(OracleEstimate {
            value: est.value,
            error: est.error,
        });
    }

    let inner_tol = abs_tol * 1e-3;
    let mut inner_failure: Option<Error> = None;
    let mut inner_err_max: f64 = 0.0;
    let est = integrate(
        |z1| {
            if inner_failure.is_some() {
                return 0.0;
            }
            let v_break = -(g.mean_v / sv + r * z1) / s;
            let inner = integrate(
                |z2| sgn(g.mean_v + sv * (r * z1 + s * z2)) * density(z2),
                -HALF_WIDTH,
                HALF_WIDTH,
                &[v_break],
                quad_cfg(inner_tol),
            );
            match inner {
                Ok(e) => {
                    inner_err_max = inner_err_max.max(e.error);
                    weight_u(g.mean_u + su * z1) * e.value * density(z1)
                }
                Err(e) => {
                    inner_failure = Some(e);
                    0.0
                }
            }
        },
        -HALF_WIDTH,
        HALF_WIDTH,
        &[u_break],
        quad_cfg(abs_tol),
    );
    if let Some(e) = inner_failure {
        return Err(e);
    }
    let est = est?;
    let scale = if sign_u {
        1.0
    } else {
        g.mean_u.abs() + HALF_WIDTH * su
    };
    Ok(OracleEstimate {
        value: est.value,
        error: est.error + inner_err_max * scale,
    })
}

fn monte_carlo(
    g: &Gaussian2,
    samples: usize,
    seed: u64,
    f: impl Fn(f64, f64) -> f64,
) -> Result<OracleEstimate> {
    if samples < 2 {
        return Err(Error::domain(
            "Monte Carlo oracle needs at least two samples",
        ));
    }
    let su = g.var_u.sqrt();
    let sv = g.var_v.sqrt();
    let r = g.correlation();
    let s = ((1.0 - r) * (1.0 + r)).max(0.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..samples {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let u = g.mean_u + su * z1;
        let v = g.mean_v + sv * (r * z1 + s * z2);
        let x = f(u, v);
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(OracleEstimate {
        value: mean,
        error: (var / samples as f64).sqrt(),
    })
}
