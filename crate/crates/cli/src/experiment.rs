//! End-to-end experiment: theory curves, the Monte Carlo ensemble, their
//! comparison and the joint weight-error dumps, written as CSV files plus a
//! JSON manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use zalms::harness::{
    compare_curves, run_ensemble, ComparisonReport, EnsembleConfig, EnsembleStats,
};
use zalms::theory::{run_model, CurvePoint, ModelKind};

use crate::config::{ExperimentConfig, ModelChoice};
use crate::error::CliError;

/// Mixed into the master seed for the joint-dump ensemble so it is
/// independent of the learning-curve ensemble.
pub const JOINT_SEED_SALT: u64 = 0x004a_4f49_4e54;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub monte_carlo: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { monte_carlo: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub steady_emse_theory: f64,
    pub steady_emse_mc: Option<f64>,
    pub steady_emse_rel_dev: Option<f64>,
    pub emse_band_coverage: Option<f64>,
    pub max_mean_dev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSummary {
    pub i: usize,
    pub j: usize,
    pub at_iter: usize,
    pub requested: usize,
    pub count: usize,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub skewness: [f64; 2],
    pub excess_kurtosis: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub options: RunOptions,
    pub master_seed: u64,
    pub wall_time_s: f64,
    pub files: Vec<String>,
    pub models: Vec<ModelSummary>,
    pub joint: Vec<JointSummary>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub manifest: Manifest,
    pub files: Vec<PathBuf>,
}

fn num(out: &mut String, v: f64) {
    // 17 significant digits always re-parse to the same double.
    let _ = write!(out, "{v:.16e}");
}

fn curve_csv(points: &[CurvePoint]) -> String {
    let len = points.first().map_or(0, |p| p.m.len());
    let mut s = String::from("n,mse,emse");
    for i in 0..len {
        let _ = write!(s, ",m_{i}");
    }
    s.push('\n');
    for p in points {
        let _ = write!(s, "{}", p.n);
        for v in [p.mse, p.emse].iter().chain(&p.m) {
            s.push(',');
            num(&mut s, *v);
        }
        s.push('\n');
    }
    s
}

fn mc_csv(stats: &EnsembleStats) -> String {
    let mut s = String::from("n,mse,emse");
    for i in 0..stats.len {
        let _ = write!(s, ",m_{i}");
    }
    s.push_str(",mse_stderr,emse_stderr");
    for i in 0..stats.len {
        let _ = write!(s, ",m_{i}_stderr");
    }
    s.push('\n');
    for n in 0..stats.iters {
        let _ = write!(s, "{n}");
        let row = [stats.mse[n], stats.emse[n]]
            .into_iter()
            .chain(stats.mean_error[n].iter().copied())
            .chain([stats.mse_stderr[n], stats.emse_stderr[n]])
            .chain(stats.mean_error_stderr[n].iter().copied());
        for v in row {
            s.push(',');
            num(&mut s, v);
        }
        s.push('\n');
    }
    s
}

fn comparison_csv(report: &ComparisonReport) -> String {
    let mut s = String::from(
        "n,mse_theory,mse_mc,mse_mc_stderr,emse_theory,emse_mc,emse_mc_stderr,emse_in_band\n",
    );
    for r in &report.rows {
        let _ = write!(s, "{}", r.n);
        for v in [
            r.mse_theory,
            r.mse_mc,
            r.mse_mc_stderr,
            r.emse_theory,
            r.emse_mc,
            r.emse_mc_stderr,
        ] {
            s.push(',');
            num(&mut s, v);
        }
        let _ = writeln!(s, ",{}", u8::from(r.emse_in_band));
    }
    s
}

fn joint_csv(i: usize, j: usize, samples: &[(f64, f64)]) -> String {
    let mut s = format!("sample,w_{i},w_{j}\n");
    for (k, (a, b)) in samples.iter().enumerate() {
        let _ = write!(s, "{k},");
        num(&mut s, *a);
        s.push(',');
        num(&mut s, *b);
        s.push('\n');
    }
    s
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    opts: RunOptions,
) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let started = Instant::now();
    let plant = cfg.plant()?;
    let input = cfg.input_model()?;
    let params = cfg.algo_params()?;
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut w = Writer {
        dir: out_dir,
        files: Vec::new(),
    };

    let mut curves = Vec::new();
    for &m in &cfg.models {
        let kind = m.kind();
        let curve = run_model(&plant, &input, &params, kind, cfg.run.iters)
            .map_err(CliError::compute(format!("theory ({})", kind.name())))?;
        w.put(
            &format!("theory_{}.csv", kind.name()),
            &curve_csv(&curve.points),
        )?;
        curves.push((kind, curve));
    }

    let mut models: Vec<ModelSummary> = curves
        .iter()
        .map(|(kind, c)| {
            let tail = (c.points.len() / 10).max(1);
            let pts = &c.points[c.points.len() - tail..];
            ModelSummary {
                model: kind.name().to_string(),
                steady_emse_theory: pts.iter().map(|p| p.emse).sum::<f64>() / tail as f64,
                steady_emse_mc: None,
                steady_emse_rel_dev: None,
                emse_band_coverage: None,
                max_mean_dev: None,
            }
        })
        .collect();
    let mut joint = Vec::new();

    if opts.monte_carlo {
        let ens = EnsembleConfig::new(cfg.run.runs, cfg.run.iters, cfg.run.master_seed);
        let stats = run_ensemble(&plant, &input, &params, &ens)
            .map_err(CliError::compute("monte carlo ensemble"))?;
        w.put("mc.csv", &mc_csv(&stats))?;

        let mut primary = None;
        for ((kind, curve), summary) in curves.iter().zip(models.iter_mut()) {
            let report = compare_curves(&curve.points, &stats)
                .map_err(CliError::compute(format!("comparison ({})", kind.name())))?;
            summary.steady_emse_mc = Some(report.steady.emse_mc);
            summary.steady_emse_rel_dev = Some(report.steady.emse_rel_dev());
            summary.emse_band_coverage =
                Some(report.emse_band_coverage(100.min(cfg.run.iters - 1)));
            summary.max_mean_dev = Some(report.max_mean_dev());
            if primary.is_none() || *kind == ModelKind::Exact {
                primary = Some(report);
            }
        }
        if let Some(report) = primary {
            w.put("comparison.csv", &comparison_csv(&report))?;
        }

        if !cfg.joint_dumps.is_empty() {
            let requests = cfg.joint_requests();
            let runs = cfg.joint_dumps.iter().map(|d| d.samples).max().unwrap_or(1);
            let iters = requests.iter().map(|r| r.at_iter).max().unwrap_or(0).max(1);
            let mut jcfg = EnsembleConfig::new(runs, iters, cfg.run.master_seed ^ JOINT_SEED_SALT);
            jcfg.record_pairs = requests;
            let jstats = run_ensemble(&plant, &input, &params, &jcfg)
                .map_err(CliError::compute("joint-sample ensemble"))?;
            for d in &cfg.joint_dumps {
                let req = zalms::harness::JointRequest {
                    i: d.i,
                    j: d.j,
                    at_iter: d.at_iter,
                };
                let js = jstats
                    .joint_samples(req, d.samples)
                    .map_err(CliError::compute("joint samples"))?;
                w.put(
                    &format!("joint_{}_{}_{}.csv", d.i, d.j, d.at_iter),
                    &joint_csv(d.i, d.j, &js.samples),
                )?;
                joint.push(JointSummary {
                    i: d.i,
                    j: d.j,
                    at_iter: d.at_iter,
                    requested: js.requested,
                    count: js.count(),
                    mean: js.mean,
                    cov: js.cov,
                    skewness: js.skewness,
                    excess_kurtosis: js.excess_kurtosis,
                });
            }
        }
    }

    let mut files: Vec<String> = w
        .files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    files.push("manifest.json".to_string());
    let manifest = Manifest {
        tool: "zalms".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        options: opts,
        master_seed: cfg.run.master_seed,
        wall_time_s: started.elapsed().as_secs_f64(),
        files,
        models,
        joint,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    w.put("manifest.json", &(text + "\n"))?;
    Ok(Outcome {
        manifest,
        files: w.files,
    })
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    manifest.config.validate()?;
    Ok(manifest)
}

/// Models selected by `--models`.
pub fn models_flag(value: &str) -> Option<Vec<ModelChoice>> {
    match value {
        "exact" => Some(vec![ModelChoice::Exact]),
        "baseline" => Some(vec![ModelChoice::Baseline]),
        "both" => Some(vec![ModelChoice::Exact, ModelChoice::Baseline]),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.718281828459045e-300, 6.02214076e23, 0.0] {
            let mut s = String::new();
            num(&mut s, v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn curve_header() {
        let pts = vec![CurvePoint {
            n: 0,
            mse: 1.5,
            emse: 0.5,
            m: vec![0.25, -0.25],
        }];
        let csv = curve_csv(&pts);
        assert!(csv.starts_with("n,mse,emse,m_0,m_1\n0,1.5000000000000000e0,"));
    }
}
