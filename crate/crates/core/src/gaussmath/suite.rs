//! Oracle suite for the sign-moment closed forms.
//!
//! Every grid point is checked three ways: closed form against nested
//! quadrature, the precision-matrix assembly of `E{u sgn v}` against the
//! simplified closed form, and closed form against a seeded Monte Carlo
//! estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lemmas::{
    cross_moment_closed_form, cross_moment_precision, sign_mean, sign_product, SignConvention,
};
use super::oracle::{oracle_moment, MomentKind, OracleInput, OracleMode};
use super::Gaussian2;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// Closed form vs quadrature.
    Quadrature,
    /// Precision-matrix assembly vs simplified closed form.
    Equivalence,
    /// Closed form vs Monte Carlo, in standard errors.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub kind: CheckKind,
    pub moment: MomentKind,
    /// Index into the grid.
    pub point: usize,
    pub value: f64,
    pub reference: f64,
    /// `|value - reference|`, or the same in standard errors for
    /// [`CheckKind::MonteCarlo`].
    pub deviation: f64,
    pub limit: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.deviation <= self.limit
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    /// Allowed `|closed form - quadrature|`.
    pub quad_tol: f64,
    /// Tolerance handed to the quadrature oracle itself.
    pub oracle_tol: f64,
    pub equivalence_tol: f64,
    /// Zero skips the Monte Carlo checks.
    pub mc_samples: usize,
    pub mc_sigmas: f64,
    pub mc_seed: u64,
    pub sign_convention: SignConvention,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            quad_tol: 1e-6,
            oracle_tol: 1e-9,
            equivalence_tol: 1e-10,
            mc_samples: 1_000_000,
            mc_sigmas: 4.0,
            mc_seed: 0x5eed,
            sign_convention: SignConvention::Standard,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub grid: Vec<Gaussian2>,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }

    /// Largest deviation among checks of `kind` (0 if there are none).
    pub fn max_deviation(&self, kind: CheckKind) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| c.deviation)
            .fold(0.0, f64::max)
    }

    pub fn count(&self, kind: CheckKind) -> usize {
        self.checks.iter().filter(|c| c.kind == kind).count()
    }
}

/// Deterministic grid: the corners of the parameter box followed by
/// seeded draws with means uniform in `[-3, 3]`, variances log-uniform in
/// `[1e-4, 4]` and correlations uniform in `[-max_corr, max_corr]`.
pub fn default_grid(points: usize, max_corr: f64, seed: u64) -> Vec<Gaussian2> {
    let mut grid = Vec::with_capacity(points);
    for &m in &[-3.0, 3.0] {
        for &vu in &[1e-4, 4.0] {
            for &vv in &[1e-4, 4.0] {
                for &r in &[-max_corr, 0.0, max_corr] {
                    grid.push(pair(m, -m, vu, vv, r));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_lo = 1e-4f64.ln();
    let log_hi = 4f64.ln();
    while grid.len() < points {
        let mu = rng.gen_range(-3.0..=3.0);
        let mv = rng.gen_range(-3.0..=3.0);
        let vu = rng.gen_range(log_lo..=log_hi).exp();
        let vv = rng.gen_range(log_lo..=log_hi).exp();
        let r = rng.gen_range(-max_corr..=max_corr);
        grid.push(pair(mu, mv, vu, vv, r));
    }
    grid.truncate(points);
    grid
}

fn pair(mu: f64, mv: f64, vu: f64, vv: f64, r: f64) -> Gaussian2 {
    Gaussian2 {
        mean_u: mu,
        mean_v: mv,
        var_u: vu,
        var_v: vv,
        cov_uv: r * (vu * vv).sqrt(),
    }
}

pub fn run_suite(grid: &[Gaussian2], cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut checks = Vec::with_capacity(grid.len() * 7);
    let quad = OracleMode::Quadrature {
        abs_tol: cfg.oracle_tol,
    };
    for (point, g) in grid.iter().enumerate() {
        let marginal = g.marginal_u();
        let closed = [
            (
                MomentKind::SignMean,
                OracleInput::One(marginal),
                sign_mean(&marginal)?,
            ),
            (
                MomentKind::SignProduct,
                OracleInput::Two(*g),
                sign_product(g)?,
            ),
            (
                MomentKind::CrossMoment,
                OracleInput::Two(*g),
                cross_moment_precision(g, cfg.sign_convention)?,
            ),
        ];
        for (moment, input, value) in closed {
            let q = oracle_moment(moment, input, quad)?;
            checks.push(Check {
                kind: CheckKind::Quadrature,
                moment,
                point,
                value,
                reference: q.value,
                deviation: (value - q.value).abs(),
                limit: cfg.quad_tol,
            });
            if cfg.mc_samples > 0 {
                let mode = OracleMode::MonteCarlo {
                    samples: cfg.mc_samples,
                    seed: cfg.mc_seed ^ ((point as u64) << 8 | moment as u64),
                };
                let mc = oracle_moment(moment, input, mode)?;
                // An estimate with no spread still only resolves 1/N.
                let se = mc.error.max(1.0 / cfg.mc_samples as f64);
                checks.push(Check {
                    kind: CheckKind::MonteCarlo,
                    moment,
                    point,
                    value,
                    reference: mc.value,
                    deviation: (value - mc.value).abs() / se,
                    limit: cfg.mc_sigmas,
                });
            }
        }
        let assembled = cross_moment_precision(g, cfg.sign_convention)?;
        let simple = cross_moment_closed_form(g)?;
        checks.push(Check {
            kind: CheckKind::Equivalence,
            moment: MomentKind::CrossMoment,
            point,
            value: assembled,
            reference: simple,
            deviation: (assembled - simple).abs(),
            limit: cfg.equivalence_tol,
        });
    }
    Ok(SuiteReport {
        grid: grid.to_vec(),
        checks,
    })
}
