//! Transient model of ZA-LMS: coupled recursions for the mean weight error
//! `m_n = E{w~_n}` and the second moment `K_n = E{w~_n w~_n^T}`.
//!
//! Mean:
//! `m_{n+1} = (I - mu R) m_n - rho E{sgn(w* + w~_n)}`
//!
//! Second moment:
//! `K_{n+1} = K_n + mu^2 s_z^2 R + mu^2 Q1 + rho^2 Q2 - mu (Q3 + Q3^T)
//!            - rho (Q4 + Q4^T) + mu rho (Q5 + Q5^T)`
//!
//! with `Q1 = 2 R K R + tr(R K) R` (Gaussian regressors),
//! `Q2 = E{sgn(w) sgn(w)^T}`, `Q3 = K R`, `Q4 = E{w~ sgn(w)^T}` and
//! `Q5 = R Q4`, where `w = w* + w~`. The sign moments come from the
//! pairwise-Gaussian closed forms in [`crate::gaussmath`].
//!
//! [`ModelKind::Baseline`] replaces the off-diagonal entries of `Q2` by the
//! product of the individual sign means, everything else being identical.

use crate::error::{check_dim, Error, Result};
use crate::filter::AlgoParams;
use crate::gaussmath::{
    cross_moment, sgn, sign_mean_unchecked, sign_product, Gaussian1, Gaussian2, CORRELATION_CLAMP,
    VARIANCE_CLAMP,
};
use crate::linalg::{matmul, symmetrize, trace_of_product, Matrix};
use crate::signals::{InputModel, PlantSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Pairwise-Gaussian sign products for every entry of `Q2`.
    Exact,
    /// `E{sgn a sgn b} ~ E{sgn a} E{sgn b}` off the diagonal of `Q2`.
    Baseline,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Exact => "exact",
            ModelKind::Baseline => "baseline",
        }
    }
}

/// First and second moments of the weight error at iteration `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryState {
    pub m: Vec<f64>,
    pub k: Matrix,
    pub n: usize,
}

impl TheoryState {
    /// Deterministic start `w_0`: `m_0 = w_0 - w*`, `K_0 = m_0 m_0^T`.
    pub fn initial(w0: &[f64], w_star: &[f64]) -> Result<Self> {
        check_dim(w_star.len(), w0.len())?;
        let m: Vec<f64> = w0.iter().zip(w_star).map(|(a, b)| a - b).collect();
        let k = Matrix::from_fn(m.len(), |i, j| m[i] * m[j]);
        Ok(TheoryState { m, k, n: 0 })
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Central second moments `K - m m^T`.
    pub fn covariance(&self) -> Matrix {
        Matrix::from_fn(self.len(), |i, j| self.k[(i, j)] - self.m[i] * self.m[j])
    }

    /// Clamped marginal variance of entry `i`.
    pub fn variance(&self, i: usize) -> Result<f64> {
        let v = self.k[(i, i)] - self.m[i] * self.m[i];
        if v >= 0.0 {
            Ok(v)
        } else if v >= -VARIANCE_CLAMP {
            Ok(0.0)
        } else {
            Err(Error::MomentConsistency {
                what: format!("variance of entry {i}"),
                excess: -v,
            })
        }
    }
}

/// One point of a theoretical learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub n: usize,
    pub mse: f64,
    pub emse: f64,
    pub m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCurve {
    pub kind: ModelKind,
    pub points: Vec<CurvePoint>,
    /// False when the regressor is not Gaussian, in which case the
    /// fourth-order term is only an approximation.
    pub q1_exact: bool,
}

/// Marginal of `[w* + w~_n]_i`.
pub fn marginal_of(state: &TheoryState, i: usize, w_star: &[f64]) -> Result<Gaussian1> {
    check_dim(state.len(), w_star.len())?;
    index_check(i, state.len())?;
    Ok(Gaussian1 {
        mean: w_star[i] + state.m[i],
        variance: state.variance(i)?,
    })
}

/// Joint law of `([w* + w~_n]_i, [w* + w~_n]_j)`.
pub fn pair_of(state: &TheoryState, i: usize, j: usize, w_star: &[f64]) -> Result<Gaussian2> {
    check_dim(state.len(), w_star.len())?;
    index_check(i, state.len())?;
    index_check(j, state.len())?;
    let var_u = state.variance(i)?;
    let var_v = state.variance(j)?;
    let cov = state.k[(i, j)] - state.m[i] * state.m[j];
    Ok(Gaussian2 {
        mean_u: w_star[i] + state.m[i],
        mean_v: w_star[j] + state.m[j],
        var_u,
        var_v,
        cov_uv: clamp_covariance(cov, var_u, var_v, i, j)?,
    })
}

fn index_check(i: usize, len: usize) -> Result<()> {
    if i < len {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "index {i} out of range for length {len}"
        )))
    }
}

fn clamp_covariance(cov: f64, var_u: f64, var_v: f64, i: usize, j: usize) -> Result<f64> {
    let bound = (var_u * var_v).sqrt();
    let excess = cov.abs() - bound;
    if excess <= 0.0 {
        Ok(cov)
    } else if excess <= CORRELATION_CLAMP {
        Ok(bound.copysign(cov))
    } else {
        Err(Error::MomentConsistency {
            what: format!("covariance of entries ({i}, {j})"),
            excess,
        })
    }
}

/// `E{sgn(w* + w~_n)}`, entrywise.
pub fn sign_mean_vector(state: &TheoryState, w_star: &[f64]) -> Result<Vec<f64>> {
    Moments::new(state, w_star).map(|mo| mo.sign_means())
}

/// `(I - mu R) m_n - rho E{sgn(w* + w~_n)}`
pub fn step_mean(
    state: &TheoryState,
    rx: &Matrix,
    p: &AlgoParams,
    w_star: &[f64],
) -> Result<Vec<f64>> {
    let mo = Moments::new(state, w_star)?;
    let s = if p.attractor_gain() == 0.0 {
        None
    } else {
        Some(mo.sign_means())
    };
    mean_update(state, rx, p, s.as_deref())
}

fn mean_update(
    state: &TheoryState,
    rx: &Matrix,
    p: &AlgoParams,
    signs: Option<&[f64]>,
) -> Result<Vec<f64>> {
    check_dim(state.len(), rx.dim())?;
    let rm = rx.matvec(&state.m)?;
    let mu = p.step_size;
    let mut next: Vec<f64> = state.m.iter().zip(&rm).map(|(m, r)| m - mu * r).collect();
    if let Some(s) = signs {
        let rho = p.attractor_gain();
        for (v, si) in next.iter_mut().zip(s) {
            *v -= rho * si;
        }
    }
    Ok(next)
}

/// `Q1 = 2 R K R + tr(R K) R`
pub fn q1(k: &Matrix, rx: &Matrix) -> Result<Matrix> {
    let rk = matmul(rx, k)?;
    let mut out = matmul(&rk, rx)?.scaled(2.0);
    out.add_scaled(rk.trace(), rx)?;
    Ok(out)
}

/// `Q2 = E{sgn(w) sgn(w)^T}`
pub fn q2(state: &TheoryState, w_star: &[f64], kind: ModelKind) -> Result<Matrix> {
    let mo = Moments::new(state, w_star)?;
    mo.q2(kind, &mo.sign_means())
}

/// `Q3 = K R`
pub fn q3(k: &Matrix, rx: &Matrix) -> Result<Matrix> {
    matmul(k, rx)
}

/// `Q4 = E{w~ sgn(w)^T}`
pub fn q4(state: &TheoryState, w_star: &[f64]) -> Result<Matrix> {
    Moments::new(state, w_star)?.q4()
}

/// `Q5 = R Q4`
pub fn q5(q4: &Matrix, rx: &Matrix) -> Result<Matrix> {
    matmul(rx, q4)
}

/// `K_{n+1}` from the moments at `n`.
pub fn step_k(
    state: &TheoryState,
    rx: &Matrix,
    p: &AlgoParams,
    plant: &PlantSpec,
    kind: ModelKind,
) -> Result<Matrix> {
    let mo = Moments::new(state, &plant.w_star)?;
    let attractor = if p.attractor_gain() == 0.0 {
        None
    } else {
        let s = mo.sign_means();
        Some((mo.q2(kind, &s)?, mo.q4()?))
    };
    k_update(state, rx, p, plant.noise_var, attractor.as_ref())
}

fn k_update(
    state: &TheoryState,
    rx: &Matrix,
    p: &AlgoParams,
    noise_var: f64,
    attractor: Option<&(Matrix, Matrix)>,
) -> Result<Matrix> {
    check_dim(state.len(), rx.dim())?;
    let mu = p.step_size;
    let k = &state.k;
    let mut next = k.clone();
    next.add_scaled(mu * mu * noise_var, rx)?;
    next.add_scaled(mu * mu, &q1(k, rx)?)?;
    next.add_scaled_sym(-mu, &q3(k, rx)?)?;
    if let Some((q2m, q4m)) = attractor {
        let rho = p.attractor_gain();
        next.add_scaled(rho * rho, q2m)?;
        next.add_scaled_sym(-rho, q4m)?;
        next.add_scaled_sym(mu * rho, &q5(q4m, rx)?)?;
    }
    Ok(symmetrize(&next))
}

/// Per-iteration moment views shared by the sign-moment terms.
struct Moments<'a> {
    state: &'a TheoryState,
    w_star: &'a [f64],
    var: Vec<f64>,
}

impl<'a> Moments<'a> {
    fn new(state: &'a TheoryState, w_star: &'a [f64]) -> Result<Self> {
        check_dim(state.len(), w_star.len())?;
        check_dim(state.len(), state.k.dim())?;
        let var = (0..state.len())
            .map(|i| state.variance(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Moments { state, w_star, var })
    }

    fn len(&self) -> usize {
        self.var.len()
    }

    fn mean_w(&self, i: usize) -> f64 {
        self.w_star[i] + self.state.m[i]
    }

    fn cov(&self, i: usize, j: usize) -> Result<f64> {
        let c = self.state.k[(i, j)] - self.state.m[i] * self.state.m[j];
        clamp_covariance(c, self.var[i], self.var[j], i, j)
    }

    fn sign_means(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| sign_mean_unchecked(self.mean_w(i), self.var[i]))
            .collect()
    }

    fn q2(&self, kind: ModelKind, signs: &[f64]) -> Result<Matrix> {
        let n = self.len();
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            // E{sgn^2} = P(w_i != 0): one unless the marginal is a point mass.
            out[(i, i)] = if self.var[i] > 0.0 {
                1.0
            } else {
                sgn(self.mean_w(i)).powi(2)
            };
            for j in (i + 1)..n {
                let v = match kind {
                    ModelKind::Exact => sign_product(&Gaussian2 {
                        mean_u: self.mean_w(i),
                        mean_v: self.mean_w(j),
                        var_u: self.var[i],
                        var_v: self.var[j],
                        cov_uv: self.cov(i, j)?,
                    })?,
                    ModelKind::Baseline => signs[i] * signs[j],
                };
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(out)
    }

    fn q4(&self) -> Result<Matrix> {
        let n = self.len();
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let g = Gaussian2 {
                    mean_u: self.state.m[i],
                    mean_v: self.mean_w(j),
                    var_u: self.var[i],
                    var_v: self.var[j],
                    cov_uv: if i == j { self.var[i] } else { self.cov(i, j)? },
                };
                out[(i, j)] = cross_moment(&g)?;
            }
        }
        Ok(out)
    }
}

/// Iterates the coupled recursions for one configuration.
#[derive(Debug, Clone)]
pub struct TheoryModel {
    pub plant: PlantSpec,
    pub rx: Matrix,
    pub params: AlgoParams,
    pub kind: ModelKind,
    pub q1_exact: bool,
}

impl TheoryModel {
    pub fn new(
        plant: &PlantSpec,
        input: &InputModel,
        params: &AlgoParams,
        kind: ModelKind,
    ) -> Result<Self> {
        plant.validate()?;
        params.validate()?;
        let rx = input.correlation(plant.len())?;
        Ok(TheoryModel {
            plant: plant.clone(),
            rx,
            params: *params,
            kind,
            q1_exact: input.is_gaussian(),
        })
    }

    /// Moments at `n + 1`. Both recursions read only the moments at `n`.
    pub fn advance(&self, state: &TheoryState) -> Result<TheoryState> {
        let mo = Moments::new(state, &self.plant.w_star)?;
        let (m, k) = if self.params.attractor_gain() == 0.0 {
            (
                mean_update(state, &self.rx, &self.params, None)?,
                k_update(state, &self.rx, &self.params, self.plant.noise_var, None)?,
            )
        } else {
            let s = mo.sign_means();
            let terms = (mo.q2(self.kind, &s)?, mo.q4()?);
            (
                mean_update(state, &self.rx, &self.params, Some(&s))?,
                k_update(
                    state,
                    &self.rx,
                    &self.params,
                    self.plant.noise_var,
                    Some(&terms),
                )?,
            )
        };
        Ok(TheoryState {
            m,
            k,
            n: state.n + 1,
        })
    }

    pub fn point(&self, state: &TheoryState) -> Result<CurvePoint> {
        let emse = trace_of_product(&self.rx, &state.k)?;
        Ok(CurvePoint {
            n: state.n,
            mse: self.plant.noise_var + emse,
            emse,
            m: state.m.clone(),
        })
    }

    /// Runs `n_iters` points starting from `start`, also returning the
    /// full state at each iteration listed in `keep`.
    pub fn run_from(
        &self,
        start: TheoryState,
        n_iters: usize,
        keep: &[usize],
    ) -> Result<(TheoryCurve, Vec<TheoryState>)> {
        if n_iters == 0 {
            return Err(Error::domain("n_iters must be at least 1"));
        }
        let mut points = Vec::with_capacity(n_iters);
        let mut kept = Vec::new();
        let mut state = start;
        let first = state.n;
        for idx in 0..n_iters {
            let at = |e: Error| Error::AtIteration {
                iter: state.n,
                source: Box::new(e),
            };
            points.push(self.point(&state).map_err(at)?);
            if keep.contains(&state.n) {
                kept.push(state.clone());
            }
            if idx + 1 < n_iters {
                state = self.advance(&state).map_err(|e| Error::AtIteration {
                    iter: state.n,
                    source: Box::new(e),
                })?;
            }
        }
        // States requested past the last recorded point.
        let last = first + n_iters - 1;
        if keep.iter().any(|&n| n > last) {
            let mut extra: Vec<usize> = keep.iter().copied().filter(|&n| n > last).collect();
            extra.sort_unstable();
            extra.dedup();
            for target in extra {
                while state.n < target {
                    state = self.advance(&state).map_err(|e| Error::AtIteration {
                        iter: state.n,
                        source: Box::new(e),
                    })?;
                }
                kept.push(state.clone());
            }
        }
        Ok((
            TheoryCurve {
                kind: self.kind,
                points,
                q1_exact: self.q1_exact,
            },
            kept,
        ))
    }
}

/// Learning curve from `w_0 = 0`: `n_iters` points for `n = 0 .. n_iters - 1`.
pub fn run_model(
    plant: &PlantSpec,
    input: &InputModel,
    p: &AlgoParams,
    kind: ModelKind,
    n_iters: usize,
) -> Result<TheoryCurve> {
    let model = TheoryModel::new(plant, input, p, kind)?;
    let start = TheoryState::initial(&vec![0.0; plant.len()], &plant.w_star)?;
    Ok(model.run_from(start, n_iters, &[])?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_2_PI;

    fn state(m: Vec<f64>, k: Matrix) -> TheoryState {
        TheoryState { m, k, n: 0 }
    }

    fn paper_plant() -> PlantSpec {
        let mut w = vec![0.8, 0.5, 0.3, 0.1, 0.05];
        w.extend([0.0; 7]);
        w.extend([-0.05, -0.1, -0.3, -0.5, -0.8]);
        PlantSpec::new(w, 0.01).unwrap()
    }

    #[test]
    fn initial_state_is_deterministic() {
        let w = [0.8, 0.0, -0.3];
        let s = TheoryState::initial(&[0.0; 3], &w).unwrap();
        for i in 0..3 {
            assert_eq!(
                marginal_of(&s, i, &w).unwrap(),
                Gaussian1 {
                    mean: 0.0,
                    variance: 0.0
                }
            );
        }
        let g = pair_of(&s, 0, 2, &w).unwrap();
        assert_eq!(
            (g.mean_u, g.mean_v, g.var_u, g.var_v, g.cov_uv),
            (0.0, 0.0, 0.0, 0.0, 0.0)
        );
        assert_eq!(sign_mean_vector(&s, &w).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn marginal_and_pair_substitution() {
        let w = [0.8, -0.2];
        let s = state(vec![0.0, 0.0], Matrix::identity(2));
        assert_eq!(
            marginal_of(&s, 0, &w).unwrap(),
            Gaussian1 {
                mean: 0.8,
                variance: 1.0
            }
        );
        let g = pair_of(&s, 0, 1, &w).unwrap();
        assert_eq!(
            (g.mean_u, g.mean_v, g.var_u, g.var_v, g.cov_uv),
            (0.8, -0.2, 1.0, 1.0, 0.0)
        );
        assert!(marginal_of(&s, 2, &w).is_err());
    }

    #[test]
    fn central_moments_ignore_the_plant_shift() {
        let m = vec![0.1, -0.3];
        let k = Matrix::from_rows(&[vec![0.5, 0.1], vec![0.1, 0.4]]).unwrap();
        let s = state(m, k);
        let a = pair_of(&s, 0, 1, &[0.0, 0.0]).unwrap();
        let b = pair_of(&s, 0, 1, &[0.7, -0.9]).unwrap();
        assert_eq!((a.var_u, a.var_v, a.cov_uv), (b.var_u, b.var_v, b.cov_uv));
        assert_eq!(b.mean_u - a.mean_u, 0.7);
    }

    #[test]
    fn moment_consistency_errors() {
        // K_00 - m_0^2 = -0.01.
        let s = state(vec![0.5], Matrix::from_rows(&[vec![0.24]]).unwrap());
        assert!(matches!(
            marginal_of(&s, 0, &[0.0]),
            Err(Error::MomentConsistency { .. })
        ));
        // Round-off sized negatives are clamped.
        let s = state(vec![0.5], Matrix::from_rows(&[vec![0.25 - 1e-13]]).unwrap());
        assert_eq!(marginal_of(&s, 0, &[0.0]).unwrap().variance, 0.0);
        // Covariance outside the PSD cone.
        let k = Matrix::from_rows(&[vec![1.0, 1.5], vec![1.5, 1.0]]).unwrap();
        assert!(pair_of(&state(vec![0.0, 0.0], k), 0, 1, &[0.0, 0.0]).is_err());
        let k = Matrix::from_rows(&[vec![1.0, 1.0 + 1e-12], vec![1.0 + 1e-12, 1.0]]).unwrap();
        let g = pair_of(&state(vec![0.0, 0.0], k), 0, 1, &[0.0, 0.0]).unwrap();
        assert_eq!(g.cov_uv, 1.0);
    }

    #[test]
    fn sign_means_examples() {
        let w = [0.8, -0.8];
        let s = state(vec![0.0, 0.0], Matrix::zeros(2));
        assert_eq!(sign_mean_vector(&s, &w).unwrap(), vec![1.0, -1.0]);
        let s = state(vec![0.0, 0.0], Matrix::identity(2));
        assert_eq!(sign_mean_vector(&s, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mean_step_reductions() {
        let w = [0.8, 0.0, -0.3];
        let rx = Matrix::from_fn(3, |i, j| 0.6f64.powi(i.abs_diff(j) as i32));
        let s = TheoryState::initial(&[0.0; 3], &w).unwrap();
        let p = AlgoParams::new(0.01, 0.01).unwrap();
        let next = step_mean(&s, &rx, &p, &w).unwrap();
        let rm = rx.matvec(&s.m).unwrap();
        for i in 0..3 {
            assert_eq!(next[i], s.m[i] - 0.01 * rm[i]);
        }
        // rho = 0 on an arbitrary state.
        let s = state(vec![0.1, -0.2, 0.05], Matrix::identity(3));
        let p0 = AlgoParams::new(0.02, 0.0).unwrap();
        let next = step_mean(&s, &rx, &p0, &w).unwrap();
        let rm = rx.matvec(&s.m).unwrap();
        for i in 0..3 {
            assert_eq!(next[i], s.m[i] - 0.02 * rm[i]);
        }
    }

    #[test]
    fn q1_examples() {
        let rx = Matrix::identity(2);
        assert_eq!(q1(&Matrix::zeros(2), &rx).unwrap(), Matrix::zeros(2));
        assert_eq!(
            q1(&Matrix::identity(2), &rx).unwrap(),
            Matrix::identity(2).scaled(4.0)
        );
    }

    #[test]
    fn q1_is_symmetric_and_linear() {
        let rx = Matrix::from_fn(4, |i, j| 0.5f64.powi(i.abs_diff(j) as i32));
        let a = Matrix::from_fn(4, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let b = Matrix::from_fn(4, |i, j| if i == j { 0.3 } else { -0.05 });
        let qa = q1(&a, &rx).unwrap();
        let qb = q1(&b, &rx).unwrap();
        let mut ab = a.clone();
        ab.add_scaled(2.0, &b).unwrap();
        let mut expect = qa.clone();
        expect.add_scaled(2.0, &qb).unwrap();
        assert!(q1(&ab, &rx).unwrap().max_abs_diff(&expect).unwrap() < 1e-14);
        assert!(qa.max_asymmetry() < 1e-15);
    }

    #[test]
    fn q2_deterministic_and_correlated() {
        let w = [0.8, -0.8];
        let s = state(vec![0.0, 0.0], Matrix::zeros(2));
        let expect = Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        assert_eq!(q2(&s, &w, ModelKind::Exact).unwrap(), expect);
        assert_eq!(q2(&s, &w, ModelKind::Baseline).unwrap(), expect);

        let k = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let s = state(vec![0.0, 0.0], k);
        let exact = q2(&s, &[0.0, 0.0], ModelKind::Exact).unwrap();
        let base = q2(&s, &[0.0, 0.0], ModelKind::Baseline).unwrap();
        assert!((exact[(0, 1)] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(base[(0, 1)], 0.0);
        assert_eq!(exact.diagonal(), vec![1.0, 1.0]);
        assert_eq!(base.diagonal(), vec![1.0, 1.0]);
    }

    #[test]
    fn q2_diagonal_is_one_for_nondegenerate_states() {
        let plant = paper_plant();
        let mut s = TheoryState::initial(&[0.0; 17], &plant.w_star).unwrap();
        let model = TheoryModel::new(
            &plant,
            &InputModel::gaussian(0.6, 0.64).unwrap(),
            &AlgoParams::new(0.01, 0.01).unwrap(),
            ModelKind::Exact,
        )
        .unwrap();
        for _ in 0..5 {
            s = model.advance(&s).unwrap();
        }
        for kind in [ModelKind::Exact, ModelKind::Baseline] {
            let q = q2(&s, &plant.w_star, kind).unwrap();
            assert_eq!(q.diagonal(), vec![1.0; 17]);
            assert_eq!(q.max_asymmetry(), 0.0);
            assert!(q.as_slice().iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn q4_limits() {
        // Point masses: m_i sgn(w*_j + m_j).
        let w = [0.5, -0.2, 0.0];
        let m = vec![0.1, -0.4, 0.3];
        let k = Matrix::from_fn(3, |i, j| m[i] * m[j]);
        let q = q4(&state(m.clone(), k), &w).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(q[(i, j)], m[i] * sgn(w[j] + m[j]));
            }
        }
        // Zero mean, K = s^2 I, w* = 0: diagonal s sqrt(2/pi), zero elsewhere.
        let s2 = 0.09;
        let q = q4(
            &state(vec![0.0; 3], Matrix::identity(3).scaled(s2)),
            &[0.0; 3],
        )
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 0.3 * FRAC_2_PI.sqrt() } else { 0.0 };
                assert!((q[(i, j)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn q3_q5_identities() {
        let k = Matrix::from_fn(3, |i, j| 0.1 * (i + j) as f64);
        assert_eq!(q3(&Matrix::zeros(3), &k).unwrap(), Matrix::zeros(3));
        assert_eq!(q3(&k, &Matrix::identity(3)).unwrap(), k);
        assert_eq!(q5(&Matrix::zeros(3), &k).unwrap(), Matrix::zeros(3));
        assert_eq!(q5(&k, &Matrix::identity(3)).unwrap(), k);
    }

    #[test]
    fn k_step_noise_floor() {
        let rx = Matrix::from_fn(3, |i, j| 0.6f64.powi(i.abs_diff(j) as i32));
        let plant = PlantSpec::new(vec![0.0; 3], 0.01).unwrap();
        let s = state(vec![0.0; 3], Matrix::zeros(3));
        let p = AlgoParams::new(0.05, 0.0).unwrap();
        let k = step_k(&s, &rx, &p, &plant, ModelKind::Exact).unwrap();
        assert!(k.max_abs_diff(&rx.scaled(0.05 * 0.05 * 0.01)).unwrap() < 1e-18);
    }

    #[test]
    fn k_step_deterministic_state_by_hand() {
        // L = 2, K = m m^T: every sign term is deterministic.
        let w = [0.5, -0.25];
        let m = vec![-0.5, 0.75];
        let s = state(m.clone(), Matrix::from_fn(2, |i, j| m[i] * m[j]));
        let rx = Matrix::from_rows(&[vec![1.0, 0.4], vec![0.4, 1.0]]).unwrap();
        let plant = PlantSpec::new(w.to_vec(), 0.02).unwrap();
        let (mu, lam) = (0.1, 0.2);
        let rho = mu * lam;
        let p = AlgoParams::new(mu, lam).unwrap();
        let got = step_k(&s, &rx, &p, &plant, ModelKind::Exact).unwrap();

        // w = w* + m = [0, 0.5]: signs [0, 1]; entry 0 is a point mass at 0.
        let sg = [0.0, 1.0];
        let kk = |i: usize, j: usize| m[i] * m[j];
        let r = |i: usize, j: usize| rx[(i, j)];
        let rk = |i: usize, j: usize| (0..2).map(|l| r(i, l) * kk(l, j)).sum::<f64>();
        let rkr = |i: usize, j: usize| (0..2).map(|l| rk(i, l) * r(l, j)).sum::<f64>();
        let tr_rk = rk(0, 0) + rk(1, 1);
        let q4v = |i: usize, j: usize| m[i] * sg[j];
        let q5v = |i: usize, j: usize| (0..2).map(|l| r(i, l) * q4v(l, j)).sum::<f64>();
        for i in 0..2 {
            for j in 0..2 {
                let q1 = 2.0 * rkr(i, j) + tr_rk * r(i, j);
                let q3 = (0..2).map(|l| kk(i, l) * r(l, j)).sum::<f64>()
                    + (0..2).map(|l| r(i, l) * kk(l, j)).sum::<f64>();
                let expect =
                    kk(i, j) + mu * mu * 0.02 * r(i, j) + mu * mu * q1 + rho * rho * sg[i] * sg[j]
                        - mu * q3
                        - rho * (q4v(i, j) + q4v(j, i))
                        + mu * rho * (q5v(i, j) + q5v(j, i));
                assert!(
                    (got[(i, j)] - expect).abs() < 1e-15,
                    "({i},{j}) {} vs {expect}",
                    got[(i, j)]
                );
            }
        }
    }

    #[test]
    fn run_model_first_point() {
        let plant = paper_plant();
        let input = InputModel::gaussian(0.6, 0.64).unwrap();
        let p = AlgoParams::new(0.01, 0.01).unwrap();
        let curve = run_model(&plant, &input, &p, ModelKind::Exact, 1).unwrap();
        assert_eq!(curve.points.len(), 1);
        let rx = input.correlation(17).unwrap();
        let expect = rx.quad_form(&plant.w_star).unwrap();
        assert!((curve.points[0].emse - expect).abs() < 1e-14);
        assert!(curve.q1_exact);
        assert!(run_model(&plant, &input, &p, ModelKind::Exact, 0).is_err());
    }

    #[test]
    fn non_gaussian_input_is_flagged() {
        let plant = PlantSpec::new(vec![0.5, 0.0], 0.01).unwrap();
        let mut input = InputModel::gaussian(0.3, 0.5).unwrap();
        input.innovation = crate::signals::Innovation::Uniform;
        let p = AlgoParams::new(0.01, 0.01).unwrap();
        assert!(
            !run_model(&plant, &input, &p, ModelKind::Exact, 3)
                .unwrap()
                .q1_exact
        );
    }

    #[test]
    fn kept_states_line_up_with_points() {
        let plant = paper_plant();
        let model = TheoryModel::new(
            &plant,
            &InputModel::gaussian(0.6, 0.64).unwrap(),
            &AlgoParams::new(0.01, 0.001).unwrap(),
            ModelKind::Exact,
        )
        .unwrap();
        let start = TheoryState::initial(&[0.0; 17], &plant.w_star).unwrap();
        let (curve, kept) = model.run_from(start, 10, &[3, 12]).unwrap();
        assert_eq!(kept.iter().map(|s| s.n).collect::<Vec<_>>(), vec![3, 12]);
        assert_eq!(curve.points[3].m, kept[0].m);
    }
}
