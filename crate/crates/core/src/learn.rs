//! Regularized linear learners over feature matrices.
//!
//! Both learners minimize `N⁻¹ Σ_i L(y_i, F_i w) + λ‖w‖²`. For ridge the
//! optimum solves `(FᵀF + λN I) w = Fᵀy`; placing `λN` in the normal
//! equations keeps `λ` comparable across sample sizes.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::baselines::RandomFeatureMap;
use crate::embed::EofMap;
use crate::error::{check_dim, Error, Result};
use crate::sparse::SparseMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Regression => "reg",
            Task::Classification => "clf",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reg" | "regression" => Ok(Task::Regression),
            "clf" | "classification" => Ok(Task::Classification),
            other => Err(Error::InvalidParameter(format!("unknown task '{other}'"))),
        }
    }
}

/// `λ = N^{-1/2}`.
pub fn default_lambda(n: usize) -> f64 {
    1.0 / (n.max(1) as f64).sqrt()
}

/// Feature matrix in whichever layout the map produced.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Sparse(SparseMat),
    Dense(DMatrix<f64>),
}

impl FeatureMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            FeatureMatrix::Sparse(f) => f.nrows(),
            FeatureMatrix::Dense(f) => f.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            FeatureMatrix::Sparse(f) => f.ncols(),
            FeatureMatrix::Dense(f) => f.ncols(),
        }
    }

    /// Stored nonzeros; for dense storage, the count of nonzero entries.
    pub fn nnz(&self) -> usize {
        match self {
            FeatureMatrix::Sparse(f) => f.nnz(),
            FeatureMatrix::Dense(f) => f.iter().filter(|v| **v != 0.0).count(),
        }
    }

    pub fn mul_vec(&self, w: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeatureMatrix::Sparse(f) => f.mul_vec(w),
            FeatureMatrix::Dense(f) => {
                check_dim(f.ncols(), w.len())?;
                Ok((f * DVector::from_column_slice(w)).data.into())
            }
        }
    }

    pub fn tmul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            FeatureMatrix::Sparse(f) => f.tmul_vec(v),
            FeatureMatrix::Dense(f) => {
                check_dim(f.nrows(), v.len())?;
                Ok((f.tr_mul(&DVector::from_column_slice(v))).data.into())
            }
        }
    }

    pub fn weighted_gram(&self, weights: Option<&[f64]>) -> Result<DMatrix<f64>> {
        match self {
            FeatureMatrix::Sparse(f) => f.weighted_gram(weights),
            FeatureMatrix::Dense(f) => match weights {
                None => Ok(f.tr_mul(f)),
                Some(w) => {
                    check_dim(f.nrows(), w.len())?;
                    let mut scaled = f.clone();
                    for (mut row, &wr) in scaled.row_iter_mut().zip(w) {
                        row *= wr;
                    }
                    Ok(f.tr_mul(&scaled))
                }
            },
        }
    }
}

/// Solver output: weights plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Objective after each accepted iterate, starting at `w = 0`.
    pub objective_trace: Vec<f64>,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be finite and positive, got {lambda}")));
    }
    Ok(())
}

fn check_targets(f: &FeatureMatrix, y: &[f64]) -> Result<()> {
    check_dim(f.nrows(), y.len())?;
    if y.is_empty() {
        return Err(Error::InvalidData("no training rows".into()));
    }
    if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidData(format!("target {i} is {v}")));
    }
    Ok(())
}

/// Solves an SPD system, falling back to LU if Cholesky breaks down.
fn solve_spd(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(&b));
    }
    a.lu().solve(&b).ok_or_else(|| Error::InvalidData("normal equations are singular".into()))
}

/// Ridge regression: `(FᵀF + λN I) w = Fᵀy`.
pub fn ridge_fit(f: &FeatureMatrix, y: &[f64], lambda: f64) -> Result<LinearFit> {
    check_lambda(lambda)?;
    check_targets(f, y)?;
    let n = y.len() as f64;
    let mut gram = f.weighted_gram(None)?;
    for d in 0..gram.nrows() {
        gram[(d, d)] += lambda * n;
    }
    let rhs = DVector::from_vec(f.tmul_vec(y)?);
    let w = solve_spd(gram, rhs)?;
    let weights: Vec<f64> = w.data.into();
    let resid: f64 = f.mul_vec(&weights)?.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    let penalty: f64 = weights.iter().map(|v| v * v).sum();
    Ok(LinearFit {
        weights,
        lambda,
        iterations: 1,
        grad_norm: 0.0,
        objective_trace: vec![resid / n + lambda * penalty],
    })
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logistic_objective(margins: &[f64], y: &[f64], w: &[f64], lambda: f64) -> f64 {
    let n = y.len() as f64;
    let loss: f64 = margins.iter().zip(y).map(|(m, t)| softplus(-t * m)).sum();
    loss / n + lambda * w.iter().map(|v| v * v).sum::<f64>()
}

/// ℓ₂-regularized logistic regression by damped Newton iterations.
///
/// Stops once `‖∇‖₂ < tol`; the objective never increases between iterates.
pub fn logistic_fit(f: &FeatureMatrix, y: &[f64], lambda: f64, max_iter: usize, tol: f64) -> Result<LinearFit> {
    check_lambda(lambda)?;
    check_targets(f, y)?;
    if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| **v != 1.0 && **v != -1.0) {
        return Err(Error::InvalidData(format!("label {i} is {v}, expected -1 or +1")));
    }
    let n = y.len() as f64;
    let m = f.ncols();
    let mut w = vec![0.0; m];
    let mut margins = vec![0.0; y.len()];
    let mut obj = logistic_objective(&margins, y, &w, lambda);
    let mut trace = vec![obj];

    for iter in 0..=max_iter {
        // ∇ = -N⁻¹ Fᵀ (y ⊙ σ(-y·m)) + 2λw
        let resid: Vec<f64> = margins.iter().zip(y).map(|(mg, t)| -t * sigmoid(-t * mg) / n).collect();
        let mut grad = f.tmul_vec(&resid)?;
        for (g, wi) in grad.iter_mut().zip(&w) {
            *g += 2.0 * lambda * wi;
        }
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < tol {
            return Ok(LinearFit { weights: w, lambda, iterations: iter, grad_norm, objective_trace: trace });
        }
        if iter == max_iter {
            return Err(Error::ConvergenceError { iterations: max_iter, grad_norm });
        }

        let curvature: Vec<f64> = margins.iter().map(|&mg| sigmoid(mg) * sigmoid(-mg) / n).collect();
        let mut hess = f.weighted_gram(Some(&curvature))?;
        for d in 0..m {
            hess[(d, d)] += 2.0 * lambda;
        }
        let step = solve_spd(hess, -DVector::from_vec(grad.clone()))?;
        let slope: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = w.iter().zip(step.iter()).map(|(wi, s)| wi + t * s).collect();
            let cand_margins = f.mul_vec(&cand)?;
            let cand_obj = logistic_objective(&cand_margins, y, &cand, lambda);
            if cand_obj <= obj + 1e-4 * t * slope {
                w = cand;
                margins = cand_margins;
                obj = cand_obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::ConvergenceError { iterations: iter + 1, grad_norm });
        }
        trace.push(obj);
    }
    unreachable!("loop returns on its last iteration")
}

/// Predictions `F w`.
pub fn predict_features(weights: &[f64], f: &FeatureMatrix) -> Result<Vec<f64>> {
    f.mul_vec(weights)
}

/// Mean squared error for regression, misclassification rate for
/// classification (`sign(0)` counts as `+1`).
pub fn error_from_predictions(task: Task, predictions: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(y.len(), predictions.len())?;
    if y.is_empty() {
        return Err(Error::InvalidData("no rows to score".into()));
    }
    let n = y.len() as f64;
    Ok(match task {
        Task::Regression => predictions.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n,
        Task::Classification => {
            predictions
                .iter()
                .zip(y)
                .filter(|(p, t)| {
                    let label = if **p >= 0.0 { 1.0 } else { -1.0 };
                    label != **t
                })
                .count() as f64
                / n
        }
    })
}

/// Either feature map a model can be trained on.
#[derive(Debug, Clone)]
pub enum FeatureMap {
    Eof(EofMap),
    Random(RandomFeatureMap),
}

impl FeatureMap {
    pub fn len(&self) -> usize {
        match self {
            FeatureMap::Eof(m) => m.len(),
            FeatureMap::Random(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::Eof(m) => m.kernel().dim,
            FeatureMap::Random(m) => m.dim(),
        }
    }

    pub fn method_name(&self) -> &'static str {
        match self {
            FeatureMap::Eof(_) => "eof",
            FeatureMap::Random(m) => m.method.name(),
        }
    }

    /// Candidate pool size `M₀` (0 when no selection happened).
    pub fn pool_size(&self) -> usize {
        match self {
            FeatureMap::Eof(_) => 0,
            FeatureMap::Random(m) => m.pool_size,
        }
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<FeatureMatrix> {
        match self {
            FeatureMap::Eof(m) => Ok(FeatureMatrix::Sparse(m.embed_batch(rows)?)),
            FeatureMap::Random(m) => Ok(FeatureMatrix::Dense(m.embed_batch(rows)?)),
        }
    }
}

/// Solver settings for [`Model::train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { max_iter: 100, tol: 1e-8 }
    }
}

/// A trained linear model over a feature map.
#[derive(Debug, Clone)]
pub struct Model {
    pub weights: Vec<f64>,
    pub map: FeatureMap,
    pub lambda: f64,
    pub task: Task,
    /// Wall-clock time spent building the training feature matrix.
    pub feature_seconds: f64,
    /// Wall-clock time spent in the solver.
    pub solve_seconds: f64,
    pub nnz_f: usize,
}

impl Model {
    /// Embeds `rows` and fits weights for `task`.
    pub fn train(
        map: FeatureMap,
        rows: &[Vec<f64>],
        y: &[f64],
        task: Task,
        lambda: f64,
        opts: TrainOptions,
    ) -> Result<Self> {
        let start = Instant::now();
        let f = map.transform(rows)?;
        let feature_seconds = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let fit = match task {
            Task::Regression => ridge_fit(&f, y, lambda)?,
            Task::Classification => logistic_fit(&f, y, lambda, opts.max_iter, opts.tol)?,
        };
        let solve_seconds = start.elapsed().as_secs_f64();
        Ok(Model { weights: fit.weights, nnz_f: f.nnz(), map, lambda, task, feature_seconds, solve_seconds })
    }

    pub fn train_seconds(&self) -> f64 {
        self.feature_seconds + self.solve_seconds
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        predict_features(&self.weights, &self.map.transform(rows)?)
    }

    pub fn test_error(&self, rows: &[Vec<f64>], y: &[f64]) -> Result<f64> {
        error_from_predictions(self.task, &self.predict(rows)?, y)
    }
}
