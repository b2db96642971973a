//! Experiment pipeline: data preparation, bandwidth estimation, repeated
//! training runs across methods and feature counts, and reports.

mod data;
mod report;

pub use data::{
    load_csv, read_csv, read_inputs, standardize, write_csv, Dataset, MinMaxScaler, RawData, SyntheticTask,
    TargetEncoding,
};
pub use report::{curves_csv, results_csv, results_table, timing_csv, ReportFormat};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{gaussian_rff_map, orf_map, rks_map, selected_map, RfMethod};
use crate::design::design_for_m;
use crate::embed::{EofMap, FeatureScale};
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::learn::{default_lambda, FeatureMap, Model, TrainOptions};

/// Neighbour rank used for the bandwidth heuristic.
pub const SIGMA_NEIGHBOR: usize = 50;
/// Query points used by [`estimate_sigma`]; larger training sets are strided.
const SIGMA_MAX_QUERIES: usize = 2000;

/// `σ = 1 / mean_i ‖x_i − x_(k)‖₂` where `x_(k)` is the 50th nearest neighbour
/// of `x_i` (the `(N−1)`-th when `N ≤ 50`).
pub fn estimate_sigma(rows: &[Vec<f64>]) -> Result<f64> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::DegenerateData(format!("bandwidth needs at least 2 points, got {n}")));
    }
    let dim = rows[0].len();
    for r in rows {
        crate::error::check_dim(dim, r.len())?;
    }
    let k = if n > SIGMA_NEIGHBOR { SIGMA_NEIGHBOR } else { n - 1 };
    let stride = n.div_ceil(SIGMA_MAX_QUERIES);
    let queries: Vec<usize> = (0..n).step_by(stride).collect();
    let dists: Vec<f64> = queries
        .par_iter()
        .map(|&i| {
            let mut d: Vec<f64> = rows
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, r)| r.iter().zip(&rows[i]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            kth.sqrt()
        })
        .collect();
    let mean = dists.iter().sum::<f64>() / dists.len() as f64;
    if mean > 0.0 && mean.is_finite() {
        Ok(1.0 / mean)
    } else {
        Err(Error::DegenerateData(format!("mean distance to neighbour {k} is {mean}")))
    }
}

/// A feature construction compared in a benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Eof,
    Random(RfMethod),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Eof => "eof",
            Method::Random(m) => m.name(),
        }
    }

    fn id(self) -> u64 {
        match self {
            Method::Eof => 0,
            Method::Random(RfMethod::Rks) => 1,
            Method::Random(RfMethod::Orf) => 2,
            Method::Random(RfMethod::Lkrf) => 3,
            Method::Random(RfMethod::Eerf) => 4,
            Method::Random(RfMethod::GaussianRff) => 5,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("eof") {
            Ok(Method::Eof)
        } else {
            s.parse().map(Method::Random)
        }
    }
}

/// Settings for [`run_benchmark`].
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub m_grid: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub kernel: KernelKind,
    /// EOF bandwidth; `None` uses `σ`.
    pub omega: Option<f64>,
    /// Random-feature bandwidth; `None` estimates it from the training inputs.
    pub sigma: Option<f64>,
    /// Ridge penalty; `None` uses `N^{-1/2}`.
    pub lambda: Option<f64>,
    pub pool_factor: usize,
    pub scale: FeatureScale,
    pub train: TrainOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            methods: vec![
                Method::Eof,
                Method::Random(RfMethod::Rks),
                Method::Random(RfMethod::Orf),
                Method::Random(RfMethod::Lkrf),
                Method::Random(RfMethod::Eerf),
            ],
            m_grid: vec![20, 40, 80, 160],
            runs: 10,
            seed: 7,
            kernel: KernelKind::Laplace,
            omega: None,
            sigma: None,
            lambda: None,
            pool_factor: 10,
            scale: FeatureScale::Normalized,
            train: TrainOptions::default(),
        }
    }
}

/// Aggregate over the successful runs of one `(method, M)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub method: String,
    pub m: usize,
    /// Candidate pool size (0 for methods without selection).
    pub m0: usize,
    pub mean_error: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std_error: f64,
    /// Mean feature-construction seconds (map building plus embedding).
    pub t_features: f64,
    pub t_solve: f64,
    pub nnz_f: f64,
    pub seeds: Vec<u64>,
    pub errors: Vec<f64>,
    pub failed: usize,
}

impl BenchResult {
    pub fn t_train(&self) -> f64 {
        self.t_features + self.t_solve
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run` for `method` at `m` features. Depends only on its
/// arguments, never on scheduling.
pub fn run_seed(master: u64, method: Method, m: usize, run: usize) -> u64 {
    let mut s = splitmix64(master);
    for part in [method.id(), m as u64, run as u64] {
        s = splitmix64(s ^ part);
    }
    s
}

struct RunOutcome {
    error: f64,
    t_features: f64,
    t_solve: f64,
    nnz: usize,
    m0: usize,
}

/// Bandwidths actually used by a benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidths {
    pub sigma: f64,
    pub omega: f64,
    pub lambda: f64,
}

impl BenchConfig {
    pub fn resolve(&self, dataset: &Dataset) -> Result<Bandwidths> {
        let sigma = match self.sigma {
            Some(s) => s,
            None => estimate_sigma(&dataset.x_train)?,
        };
        Ok(Bandwidths {
            sigma,
            omega: self.omega.unwrap_or(sigma),
            lambda: self.lambda.unwrap_or_else(|| default_lambda(dataset.n_train())),
        })
    }
}

/// Builds the feature map for one run.
pub fn build_map(
    method: Method,
    dataset: &Dataset,
    config: &BenchConfig,
    bw: Bandwidths,
    m: usize,
    seed: u64,
) -> Result<FeatureMap> {
    let dim = dataset.dim();
    Ok(match method {
        Method::Eof => {
            let kernel = KernelSpec::new(config.kernel, bw.omega, dim)?;
            FeatureMap::Eof(EofMap::new(kernel, design_for_m(dim, m, seed)?, config.scale)?)
        }
        Method::Random(rf) => FeatureMap::Random(match rf {
            RfMethod::Rks => rks_map(dim, m, bw.sigma, seed)?,
            RfMethod::Orf => orf_map(dim, m, bw.sigma, seed)?,
            RfMethod::GaussianRff => gaussian_rff_map(dim, m, bw.sigma, seed)?,
            RfMethod::Lkrf | RfMethod::Eerf => {
                selected_map(rf, &dataset.x_train, &dataset.y_train, m, config.pool_factor, bw.sigma, seed)?
            }
        }),
    })
}

fn single_run(
    dataset: &Dataset,
    config: &BenchConfig,
    bw: Bandwidths,
    method: Method,
    m: usize,
    seed: u64,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let map = build_map(method, dataset, config, bw, m, seed)?;
    let build = start.elapsed().as_secs_f64();
    let m0 = map.pool_size();
    let model = Model::train(map, &dataset.x_train, &dataset.y_train, dataset.task, bw.lambda, config.train)?;
    let error = model.test_error(&dataset.x_test, &dataset.y_test)?;
    Ok(RunOutcome {
        error,
        t_features: build + model.feature_seconds,
        t_solve: model.solve_seconds,
        nnz: model.nnz_f,
        m0,
    })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mu = mean(v);
    (v.iter().map(|e| (e - mu) * (e - mu)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Runs every `(method, M, run)` combination in parallel and aggregates per
/// `(method, M)` in configuration order. Failed runs are logged, counted and
/// left out of the aggregates.
pub fn run_benchmark(dataset: &Dataset, config: &BenchConfig) -> Result<Vec<BenchResult>> {
    if config.runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    if dataset.n_train() == 0 || dataset.n_test() == 0 {
        return Err(Error::InvalidData("dataset needs training and test rows".into()));
    }
    let bw = config.resolve(dataset)?;
    log::info!("sigma = {}, omega = {}, lambda = {}", bw.sigma, bw.omega, bw.lambda);

    let jobs: Vec<(Method, usize, usize)> = config
        .methods
        .iter()
        .flat_map(|&method| config.m_grid.iter().flat_map(move |&m| (0..config.runs).map(move |r| (method, m, r))))
        .collect();
    let outcomes: Vec<Result<RunOutcome>> = jobs
        .par_iter()
        .map(|&(method, m, r)| single_run(dataset, config, bw, method, m, run_seed(config.seed, method, m, r)))
        .collect();

    let mut results = Vec::new();
    for (cell, chunk) in jobs.chunks(config.runs).zip(outcomes.chunks(config.runs)) {
        let (method, m, _) = cell[0];
        let seeds: Vec<u64> = cell.iter().map(|&(_, _, r)| run_seed(config.seed, method, m, r)).collect();
        let mut ok = Vec::new();
        let mut failed = 0;
        for (outcome, seed) in chunk.iter().zip(&seeds) {
            match outcome {
                Ok(o) => ok.push(o),
                Err(e) => {
                    failed += 1;
                    log::warn!("{method} M={m} seed={seed} failed: {e}");
                }
            }
        }
        let errors: Vec<f64> = ok.iter().map(|o| o.error).collect();
        let stat = |f: fn(&RunOutcome) -> f64| mean(&ok.iter().map(|o| f(o)).collect::<Vec<_>>());
        results.push(BenchResult {
            method: method.name().to_string(),
            m,
            m0: ok.first().map_or(0, |o| o.m0),
            mean_error: mean(&errors),
            std_error: sample_std(&errors),
            t_features: stat(|o| o.t_features),
            t_solve: stat(|o| o.t_solve),
            nnz_f: stat(|o| o.nnz as f64),
            seeds,
            errors,
            failed,
        });
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_sigma(rows: &[Vec<f64>], k: usize) -> f64 {
        let mut total = 0.0;
        for (i, a) in rows.iter().enumerate() {
            let mut d: Vec<f64> = rows
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
                .collect();
            d.sort_by(f64::total_cmp);
            total += d[k - 1];
        }
        rows.len() as f64 / total
    }

    #[test]
    fn sigma_on_uniform_grid() {
        let h = 0.01;
        let rows: Vec<Vec<f64>> = (0..52).map(|i| vec![i as f64 * h]).collect();
        let sigma = estimate_sigma(&rows).unwrap();
        assert!((sigma - brute_sigma(&rows, 50)).abs() < 1e-9 * sigma);
        // endpoint neighbours sit 50h away; interior ones are closer
        assert!(1.0 / sigma < 50.0 * h);
    }

    #[test]
    fn sigma_small_sample_fallback_and_scaling() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos()]).collect();
        let sigma = estimate_sigma(&rows).unwrap();
        assert!((sigma - brute_sigma(&rows, 9)).abs() < 1e-9 * sigma);
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| 3.0 * v).collect()).collect();
        assert!((estimate_sigma(&scaled).unwrap() - sigma / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_degenerate() {
        let rows = vec![vec![0.25, 0.5]; 51];
        assert!(matches!(estimate_sigma(&rows), Err(Error::DegenerateData(_))));
        assert!(matches!(estimate_sigma(&rows[..1]), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn run_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for method in [Method::Eof, Method::Random(RfMethod::Rks)] {
            for m in [5, 10] {
                for r in 0..50 {
                    assert!(seen.insert(run_seed(7, method, m, r)));
                }
            }
        }
    }

    #[test]
    fn method_names_parse() {
        for s in ["eof", "rks", "orf", "lkrf", "eerf"] {
            assert_eq!(s.parse::<Method>().unwrap().name(), s);
        }
        assert!("svm".parse::<Method>().is_err());
    }

    #[test]
    fn std_conventions() {
        assert_eq!(sample_std(&[3.0]), 0.0);
        assert!((sample_std(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-15);
    }
}
