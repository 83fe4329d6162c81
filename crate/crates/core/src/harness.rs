//! Seeded Monte Carlo ensembles of ZA-LMS trajectories and their comparison
//! with the theoretical learning curves.
//!
//! Run `r` draws its regressor and noise from streams keyed by
//! `(master_seed, r)`. Runs are grouped into fixed-size chunks that execute
//! in parallel; per-iteration statistics are accumulated with Welford
//! updates inside a chunk and merged across chunks in chunk order, so the
//! result does not depend on the number of threads.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::{AlgoParams, FilterState};
use crate::linalg::{dot, Matrix};
use crate::signals::{InputModel, NoiseStream, PlantSpec, RegressorStream, SeedSpec};
use crate::theory::CurvePoint;

const CHUNK_RUNS: usize = 16;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Joint weight-error samples `([w~_n]_i, [w~_n]_j)` requested at `at_iter`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JointRequest {
    pub i: usize,
    pub j: usize,
    pub at_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub runs: usize,
    pub iters: usize,
    pub master_seed: u64,
    /// Defaults to the zero vector.
    pub initial_weights: Option<Vec<f64>>,
    pub record_pairs: Vec<JointRequest>,
    /// Iterations at which every run's weight error is kept, e.g. to form
    /// empirical second-moment matrices.
    pub moment_iters: Vec<usize>,
}

impl EnsembleConfig {
    pub fn new(runs: usize, iters: usize, master_seed: u64) -> Self {
        EnsembleConfig {
            runs,
            iters,
            master_seed,
            initial_weights: None,
            record_pairs: Vec::new(),
            moment_iters: Vec::new(),
        }
    }

    fn snapshot_iters(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .record_pairs
            .iter()
            .map(|p| p.at_iter)
            .chain(self.moment_iters.iter().copied())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    fn validate(&self, len: usize) -> Result<()> {
        if self.runs == 0 || self.iters == 0 {
            return Err(Error::domain("ensemble needs runs >= 1 and iters >= 1"));
        }
        if let Some(w0) = &self.initial_weights {
            crate::error::check_dim(len, w0.len())?;
        }
        for p in &self.record_pairs {
            if p.i >= len || p.j >= len {
                return Err(Error::domain(format!(
                    "joint pair ({}, {}) out of range for {len} taps",
                    p.i, p.j
                )));
            }
        }
        if let Some(n) = self.snapshot_iters().into_iter().find(|&n| n > self.iters) {
            return Err(Error::domain(format!(
                "snapshot iteration {n} beyond the {} simulated iterations",
                self.iters
            )));
        }
        Ok(())
    }
}

/// Running mean and centred sum of squares.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    #[inline]
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let var = self.m2 / (self.count - 1) as f64;
        (var / self.count as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
struct ChunkAcc {
    weight_error: Vec<Welford>,
    mse: Vec<Welford>,
    emse: Vec<Welford>,
    // snapshot index -> runs in order -> weight error
    snapshots: Vec<Vec<Vec<f64>>>,
}

impl ChunkAcc {
    fn new(iters: usize, len: usize, n_snap: usize) -> Self {
        ChunkAcc {
            weight_error: vec![Welford::default(); iters * len],
            mse: vec![Welford::default(); iters],
            emse: vec![Welford::default(); iters],
            snapshots: vec![Vec::new(); n_snap],
        }
    }

    fn merge(&mut self, other: ChunkAcc) {
        for (a, b) in self.weight_error.iter_mut().zip(&other.weight_error) {
            a.merge(b);
        }
        for (a, b) in self.mse.iter_mut().zip(&other.mse) {
            a.merge(b);
        }
        for (a, b) in self.emse.iter_mut().zip(&other.emse) {
            a.merge(b);
        }
        for (a, b) in self.snapshots.iter_mut().zip(other.snapshots) {
            a.extend(b);
        }
    }
}

/// Weight errors of every run at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    /// One weight-error vector per run, in run order.
    pub errors: Vec<Vec<f64>>,
}

/// Per-iteration ensemble statistics for `n = 0 .. iters - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub runs: usize,
    pub iters: usize,
    pub len: usize,
    /// `mean_error[n][i]`: ensemble mean of `[w~_n]_i`.
    pub mean_error: Vec<Vec<f64>>,
    pub mean_error_stderr: Vec<Vec<f64>>,
    /// Mean of `e_n^2`.
    pub mse: Vec<f64>,
    pub mse_stderr: Vec<f64>,
    /// Mean of `(w~_n^T x_n)^2`.
    pub emse: Vec<f64>,
    pub emse_stderr: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

impl EnsembleStats {
    pub fn snapshot(&self, n: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.n == n)
    }

    /// Empirical `E{w~_n w~_n^T}` at a recorded iteration.
    pub fn second_moment(&self, n: usize) -> Option<Matrix> {
        let snap = self.snapshot(n)?;
        let count = snap.errors.len() as f64;
        let mut k = Matrix::zeros(self.len);
        for e in &snap.errors {
            for i in 0..self.len {
                for j in 0..self.len {
                    k[(i, j)] += e[i] * e[j];
                }
            }
        }
        Some(k.scaled(1.0 / count))
    }

    /// Joint samples for `req`, using at most `samples` runs.
    pub fn joint_samples(&self, req: JointRequest, samples: usize) -> Result<JointSamples> {
        if req.i >= self.len || req.j >= self.len {
            return Err(Error::domain(format!(
                "joint pair ({}, {}) out of range for {} taps",
                req.i, req.j, self.len
            )));
        }
        let snap = self
            .snapshot(req.at_iter)
            .ok_or_else(|| Error::domain(format!("iteration {} was not recorded", req.at_iter)))?;
        let pairs: Vec<(f64, f64)> = snap
            .errors
            .iter()
            .take(samples)
            .map(|e| (e[req.i], e[req.j]))
            .collect();
        Ok(JointSamples::from_pairs(req, samples, pairs))
    }
}

/// Sample moments of one joint dump.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSamples {
    pub request: JointRequest,
    pub requested: usize,
    pub samples: Vec<(f64, f64)>,
    pub mean: [f64; 2],
    /// Unbiased covariance `[[s_ii, s_ij], [s_ij, s_jj]]`.
    pub cov: [[f64; 2]; 2],
    /// Standard errors of the covariance entries, from the fourth-order
    /// sample moments.
    pub cov_stderr: [[f64; 2]; 2],
    pub skewness: [f64; 2],
    pub excess_kurtosis: [f64; 2],
}

impl JointSamples {
    fn from_pairs(request: JointRequest, requested: usize, samples: Vec<(f64, f64)>) -> Self {
        let n = samples.len() as f64;
        let col = |c: usize| -> Vec<f64> {
            samples
                .iter()
                .map(|p| if c == 0 { p.0 } else { p.1 })
                .collect()
        };
        let cols = [col(0), col(1)];
        // Corrected two-pass mean; constant columns are taken as is so they
        // come out with exactly zero spread.
        let mean = [0, 1].map(|c| {
            let m0 = cols[c].iter().sum::<f64>() / n;
            if cols[c].iter().all(|&x| x == cols[c][0]) {
                cols[c][0]
            } else {
                m0 + cols[c].iter().map(|x| x - m0).sum::<f64>() / n
            }
        });
        let centred: [Vec<f64>; 2] = [0, 1].map(|c| cols[c].iter().map(|x| x - mean[c]).collect());
        let mut cov = [[0.0; 2]; 2];
        let mut cov_stderr = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let prods: Vec<f64> = centred[a]
                    .iter()
                    .zip(&centred[b])
                    .map(|(x, y)| x * y)
                    .collect();
                let m = prods.iter().sum::<f64>() / n;
                cov[a][b] = m * n / (n - 1.0).max(1.0);
                let var_prod =
                    prods.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / (n - 1.0).max(1.0);
                cov_stderr[a][b] = (var_prod / n).sqrt();
            }
        }
        let mut skewness = [0.0; 2];
        let mut excess_kurtosis = [0.0; 2];
        for c in 0..2 {
            let m2 = centred[c].iter().map(|x| x * x).sum::<f64>() / n;
            let m3 = centred[c].iter().map(|x| x * x * x).sum::<f64>() / n;
            let m4 = centred[c].iter().map(|x| x.powi(4)).sum::<f64>() / n;
            if m2 > 0.0 {
                skewness[c] = m3 / m2.powf(1.5);
                excess_kurtosis[c] = m4 / (m2 * m2) - 3.0;
            }
        }
        JointSamples {
            request,
            requested,
            samples,
            mean,
            cov,
            cov_stderr,
            skewness,
            excess_kurtosis,
        }
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }
}

fn run_chunk(
    plant: &PlantSpec,
    input: &InputModel,
    p: &AlgoParams,
    cfg: &EnsembleConfig,
    snap_iters: &[usize],
    runs: std::ops::Range<usize>,
) -> Result<ChunkAcc> {
    let len = plant.len();
    let mut acc = ChunkAcc::new(cfg.iters, len, snap_iters.len());
    let mut err = vec![0.0; len];
    for run in runs {
        let seed = SeedSpec::new(cfg.master_seed, run as u64);
        let mut regressors = RegressorStream::new(*input, seed, len)?;
        let mut noise = NoiseStream::new(plant.noise_var, seed)?;
        let mut state = match &cfg.initial_weights {
            Some(w0) => FilterState::with_weights(w0.clone()),
            None => FilterState::zeros(len),
        };
        for n in 0..cfg.iters {
            for (e, (w, s)) in err.iter_mut().zip(state.w.iter().zip(&plant.w_star)) {
                *e = w - s;
            }
            if let Some(k) = snap_iters.iter().position(|&s| s == n) {
                acc.snapshots[k].push(err.clone());
            }
            let x = regressors.advance();
            let z = noise.draw();
            let y = dot(x, &plant.w_star) + z;
            let eps = dot(&err, x);
            let e = state
                .step(x, y, p)
                .map_err(|_| Error::Divergence { run, iter: n })?;
            for (slot, v) in acc.weight_error[n * len..(n + 1) * len]
                .iter_mut()
                .zip(&err)
            {
                slot.push(*v);
            }
            acc.mse[n].push(e * e);
            acc.emse[n].push(eps * eps);
        }
        if let Some(k) = snap_iters.iter().position(|&s| s == cfg.iters) {
            acc.snapshots[k].push(state.weight_error(&plant.w_star));
        }
    }
    Ok(acc)
}

/// Runs `cfg.runs` independent trajectories and aggregates them.
///
/// A diverging run aborts the whole ensemble with [`Error::Divergence`]
/// naming the lowest failing run.
pub fn run_ensemble(
    plant: &PlantSpec,
    input: &InputModel,
    p: &AlgoParams,
    cfg: &EnsembleConfig,
) -> Result<EnsembleStats> {
    plant.validate()?;
    input.validate()?;
    p.validate()?;
    cfg.validate(plant.len())?;
    let len = plant.len();
    let snap_iters = cfg.snapshot_iters();

    let n_chunks = cfg.runs.div_ceil(CHUNK_RUNS);
    let chunks: Vec<Result<ChunkAcc>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK_RUNS;
            let end = (start + CHUNK_RUNS).min(cfg.runs);
            run_chunk(plant, input, p, cfg, &snap_iters, start..end)
        })
        .collect();

    let mut total: Option<ChunkAcc> = None;
    for chunk in chunks {
        let chunk = chunk?;
        match total.as_mut() {
            None => total = Some(chunk),
            Some(t) => t.merge(chunk),
        }
    }
    let total = total.expect("at least one chunk");

    let row = |n: usize, f: fn(&Welford) -> f64| -> Vec<f64> {
        total.weight_error[n * len..(n + 1) * len]
            .iter()
            .map(f)
            .collect()
    };
    Ok(EnsembleStats {
        runs: cfg.runs,
        iters: cfg.iters,
        len,
        mean_error: (0..cfg.iters).map(|n| row(n, |w| w.mean)).collect(),
        mean_error_stderr: (0..cfg.iters).map(|n| row(n, Welford::stderr)).collect(),
        mse: total.mse.iter().map(|w| w.mean).collect(),
        mse_stderr: total.mse.iter().map(Welford::stderr).collect(),
        emse: total.emse.iter().map(|w| w.mean).collect(),
        emse_stderr: total.emse.iter().map(Welford::stderr).collect(),
        snapshots: snap_iters
            .iter()
            .zip(total.snapshots)
            .map(|(&n, errors)| Snapshot { n, errors })
            .collect(),
    })
}

/// Theory against simulation at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub n: usize,
    pub mse_theory: f64,
    pub mse_mc: f64,
    pub mse_mc_stderr: f64,
    pub emse_theory: f64,
    pub emse_mc: f64,
    pub emse_mc_stderr: f64,
    /// Theory inside the empirical 95% band.
    pub emse_in_band: bool,
    /// `|m_theory - m_mc|` per coefficient.
    pub mean_abs_dev: Vec<f64>,
    pub mean_stderr: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// First iteration of the averaging window (last 10% of iterations).
    pub window_start: usize,
    pub mse_theory: f64,
    pub mse_mc: f64,
    pub emse_theory: f64,
    pub emse_mc: f64,
}

impl SteadyState {
    pub fn emse_abs_dev(&self) -> f64 {
        (self.emse_theory - self.emse_mc).abs()
    }

    pub fn emse_rel_dev(&self) -> f64 {
        self.emse_abs_dev() / self.emse_mc.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub steady: SteadyState,
}

impl ComparisonReport {
    /// Fraction of iterations `n >= from_n` whose theoretical EMSE lies in
    /// the empirical 95% band.
    pub fn emse_band_coverage(&self, from_n: usize) -> f64 {
        let tail: Vec<&ComparisonRow> = self.rows.iter().filter(|r| r.n >= from_n).collect();
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().filter(|r| r.emse_in_band).count() as f64 / tail.len() as f64
    }

    /// Largest mean-weight deviation over all coefficients and iterations.
    pub fn max_mean_dev(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.mean_abs_dev.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Largest `|dev| - max(floor, n_se * stderr)` over coefficients and
    /// iterations, with its location; nonpositive means every deviation is
    /// within tolerance.
    pub fn mean_dev_excess(&self, floor: f64, n_se: f64) -> (f64, usize, usize) {
        let mut worst = (f64::NEG_INFINITY, 0, 0);
        for r in &self.rows {
            for (i, (d, se)) in r.mean_abs_dev.iter().zip(&r.mean_stderr).enumerate() {
                let excess = d - floor.max(n_se * se);
                if excess > worst.0 {
                    worst = (excess, r.n, i);
                }
            }
        }
        worst
    }
}

/// Lines up a theoretical curve with ensemble statistics.
pub fn compare_curves(theory: &[CurvePoint], emp: &EnsembleStats) -> Result<ComparisonReport> {
    if theory.len() != emp.iters {
        return Err(Error::DimensionMismatch {
            expected: emp.iters,
            got: theory.len(),
        });
    }
    if theory.is_empty() {
        return Err(Error::domain("cannot compare empty curves"));
    }
    let rows: Vec<ComparisonRow> = theory
        .iter()
        .enumerate()
        .map(|(n, pt)| {
            let dev: Vec<f64> =
                pt.m.iter()
                    .zip(&emp.mean_error[n])
                    .map(|(a, b)| (a - b).abs())
                    .collect();
            ComparisonRow {
                n: pt.n,
                mse_theory: pt.mse,
                mse_mc: emp.mse[n],
                mse_mc_stderr: emp.mse_stderr[n],
                emse_theory: pt.emse,
                emse_mc: emp.emse[n],
                emse_mc_stderr: emp.emse_stderr[n],
                emse_in_band: (pt.emse - emp.emse[n]).abs() <= Z95 * emp.emse_stderr[n],
                mean_abs_dev: dev,
                mean_stderr: emp.mean_error_stderr[n].clone(),
            }
        })
        .collect();
    let window = (rows.len() / 10).max(1);
    let tail = &rows[rows.len() - window..];
    let avg = |f: fn(&ComparisonRow) -> f64| tail.iter().map(f).sum::<f64>() / window as f64;
    let steady = SteadyState {
        window_start: tail[0].n,
        mse_theory: avg(|r| r.mse_theory),
        mse_mc: avg(|r| r.mse_mc),
        emse_theory: avg(|r| r.emse_theory),
        emse_mc: avg(|r| r.emse_mc),
    };
    Ok(ComparisonReport { rows, steady })
}

/// Ensemble statistics expressed as a curve, for comparing a simulation
/// with itself or with another simulation.
pub fn empirical_curve(emp: &EnsembleStats) -> Vec<CurvePoint> {
    (0..emp.iters)
        .map(|n| CurvePoint {
            n,
            mse: emp.mse[n],
            emse: emp.emse[n],
            m: emp.mean_error[n].clone(),
        })
        .collect()
}
