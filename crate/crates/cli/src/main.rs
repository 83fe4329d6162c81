use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zalms_cli::experiment::{load_manifest, models_flag};
use zalms_cli::{
    load_config, run_experiment, verify_lemmas, CliError, ExperimentConfig, RunOptions,
    VerifyOptions,
};

#[derive(Parser)]
#[command(
    name = "zalms",
    version,
    about = "ZA-LMS transient model and Monte Carlo experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run theory curves and the Monte Carlo ensemble, writing CSV files.
    Run(RunArgs),
    /// Check the sign-moment closed forms against numerical oracles.
    VerifyLemmas(VerifyArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON config; defaults apply to every missing field.
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Re-run exactly the experiment recorded in a manifest.json.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// exact, baseline or both.
    #[arg(long)]
    models: Option<String>,
    /// Theory curves only.
    #[arg(long)]
    no_mc: bool,
    #[arg(long)]
    quiet: bool,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 240)]
    points: usize,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    /// Monte Carlo samples per check; 0 skips the Monte Carlo oracle.
    #[arg(long, default_value_t = 1_000_000)]
    mc_samples: usize,
    /// Add a grid reaching correlation 0.999, checked at 1e-5.
    #[arg(long)]
    near_singular: bool,
    /// Test mode: flip a sign in the assembled `E{u sgn v}`, which must fail.
    #[arg(long)]
    inject_sign_fault: bool,
    #[arg(long)]
    quiet: bool,
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let (mut cfg, mut opts) = match (&args.manifest, &args.config) {
        (Some(m), _) => {
            let manifest = load_manifest(m)?;
            (manifest.config, manifest.options)
        }
        (None, Some(c)) => (load_config(c)?, RunOptions::default()),
        (None, None) => (ExperimentConfig::default(), RunOptions::default()),
    };
    if let Some(seed) = args.seed {
        cfg.run.master_seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.run.runs = runs;
    }
    if let Some(iters) = args.iters {
        cfg.run.iters = iters;
    }
    if let Some(m) = &args.models {
        cfg.models = models_flag(m).ok_or_else(|| CliError::Config {
            path: "--models".to_string(),
            message: format!("expected exact, baseline or both, got `{m}`"),
        })?;
    }
    if args.no_mc {
        opts.monte_carlo = false;
    }
    cfg.validate()?;

    let outcome = run_experiment(&cfg, &args.out, opts)?;
    if !args.quiet {
        let m = &outcome.manifest;
        println!("wrote {} files to {}", m.files.len(), args.out.display());
        for s in &m.models {
            print!("{:<9} steady EMSE {:.4e}", s.model, s.steady_emse_theory);
            if let (Some(mc), Some(rel), Some(cov), Some(dev)) = (
                s.steady_emse_mc,
                s.steady_emse_rel_dev,
                s.emse_band_coverage,
                s.max_mean_dev,
            ) {
                print!(
                    " | mc {mc:.4e} ({:.1}% off), band coverage {:.3}, max |dm| {dev:.4}",
                    100.0 * rel,
                    cov
                );
            }
            println!();
        }
        for j in &m.joint {
            println!(
                "joint ({}, {}) @ {}: {} of {} samples, cov [{:.3e} {:.3e} {:.3e}], kurtosis [{:.3} {:.3}]",
                j.i, j.j, j.at_iter, j.count, j.requested, j.cov[0][0], j.cov[0][1], j.cov[1][1],
                j.excess_kurtosis[0], j.excess_kurtosis[1]
            );
        }
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), CliError> {
    let opts = VerifyOptions {
        points: args.points,
        seed: args.seed,
        mc_samples: args.mc_samples,
        near_singular: args.near_singular,
        inject_sign_fault: args.inject_sign_fault,
    };
    if opts.points == 0 {
        return Err(CliError::Config {
            path: "--points".to_string(),
            message: "must be at least 1".to_string(),
        });
    }
    let outcome = verify_lemmas(&opts)?;
    if !args.quiet {
        print!("{}", outcome.text);
    }
    if outcome.passed() {
        Ok(())
    } else {
        Err(CliError::Verification(
            "closed forms disagree with the oracles".to_string(),
        ))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Bad flags are configuration errors; --help and --version are not.
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::VerifyLemmas(args) => verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
