//! `verify-lemmas`: the sign-moment oracle suite as a user-facing check.

use std::fmt::Write as _;

use zalms::gaussmath::oracle::MomentKind;
use zalms::gaussmath::suite::{default_grid, run_suite, CheckKind, SuiteConfig, SuiteReport};
use zalms::gaussmath::SignConvention;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub points: usize,
    pub seed: u64,
    pub mc_samples: usize,
    /// Also check a grid reaching correlation 0.999 at a relaxed tolerance.
    pub near_singular: bool,
    /// Flip the sign in the assembled form of `E{u sgn v}`; the suite must then fail.
    pub inject_sign_fault: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            points: 240,
            seed: 11,
            mc_samples: 1_000_000,
            near_singular: false,
            inject_sign_fault: false,
        }
    }
}

pub struct VerifyOutcome {
    pub reports: Vec<(String, SuiteReport)>,
    pub text: String,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|(_, r)| r.passed())
    }
}

const MOMENTS: [(MomentKind, &str); 3] = [
    (MomentKind::SignMean, "E{sgn u}"),
    (MomentKind::SignProduct, "E{sgn u sgn v}"),
    (MomentKind::CrossMoment, "E{u sgn v}"),
];

fn describe(name: &str, report: &SuiteReport, out: &mut String) {
    let _ = writeln!(out, "[{name}] {} grid points", report.grid.len());
    for kind in [
        CheckKind::Quadrature,
        CheckKind::Equivalence,
        CheckKind::MonteCarlo,
    ] {
        for (moment, label) in MOMENTS {
            let checks: Vec<_> = report
                .checks
                .iter()
                .filter(|c| c.kind == kind && c.moment == moment)
                .collect();
            if checks.is_empty() {
                continue;
            }
            let worst = checks.iter().map(|c| c.deviation).fold(0.0, f64::max);
            let failed = checks.iter().filter(|c| !c.passed()).count();
            let unit = if kind == CheckKind::MonteCarlo {
                " SE"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "  {:<11} {:<15} max dev {worst:.3e}{unit} (limit {:.1e}{unit})  {}/{} ok",
                format!("{kind:?}"),
                label,
                checks[0].limit,
                checks.len() - failed,
                checks.len()
            );
        }
    }
    let _ = writeln!(
        out,
        "  => {}",
        if report.passed() { "PASS" } else { "FAIL" }
    );
}

pub fn verify_lemmas(opts: &VerifyOptions) -> Result<VerifyOutcome, CliError> {
    let sign_convention = if opts.inject_sign_fault {
        SignConvention::Flipped
    } else {
        SignConvention::Standard
    };
    let base = SuiteConfig {
        mc_samples: opts.mc_samples,
        sign_convention,
        ..SuiteConfig::default()
    };
    let mut runs = vec![(
        "default".to_string(),
        default_grid(opts.points, 0.99, opts.seed),
        base,
    )];
    if opts.near_singular {
        runs.push((
            "correlation 0.999".to_string(),
            default_grid(opts.points.clamp(1, 60), 0.999, opts.seed ^ 0x999),
            SuiteConfig {
                quad_tol: 1e-5,
                equivalence_tol: 1e-5,
                ..base
            },
        ));
    }
    let mut text = String::new();
    if opts.inject_sign_fault {
        text.push_str("fault injection: sign-flipped assembled form\n");
    }
    let mut reports = Vec::new();
    for (name, grid, cfg) in runs {
        let report =
            run_suite(&grid, &cfg).map_err(CliError::compute(format!("oracle suite ({name})")))?;
        describe(&name, &report, &mut text);
        reports.push((name, report));
    }
    Ok(VerifyOutcome { reports, text })
}
