//! Random Fourier feature baselines.
//!
//! Every map produces `z(x) = M^{-1/2} [cos(xᵀγ_m + b_m)]_m` with phases
//! `b_m ~ U[0, 2π)`. With random phases `E[z(x)ᵀz(x')] = k(x, x')/2`, so
//! [`RandomFeatureMap::kernel_estimate`] doubles the inner product.
//!
//! - RKS: `γ` entries i.i.d. Cauchy scaled by `σ`, approximating the Laplace
//!   kernel `e^{-σ‖x-x'‖₁}`.
//! - ORF: blocks `σ S Q` with `Q` Haar-orthogonal and `S` diagonal with
//!   χ(D) entries, approximating the Gaussian kernel `e^{-σ²‖x-x'‖²/2}`.
//! - LKRF / EERF: draw a pool of `M₀` RKS features and keep the top `M` by a
//!   data-dependent score.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, ChiSquared, Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RfMethod {
    Rks,
    Orf,
    Lkrf,
    Eerf,
    /// Gaussian-frequency random features, the unstructured counterpart of ORF.
    GaussianRff,
}

impl RfMethod {
    pub fn name(self) -> &'static str {
        match self {
            RfMethod::Rks => "rks",
            RfMethod::Orf => "orf",
            RfMethod::Lkrf => "lkrf",
            RfMethod::Eerf => "eerf",
            RfMethod::GaussianRff => "grff",
        }
    }
}

impl fmt::Display for RfMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RfMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rks" => Ok(RfMethod::Rks),
            "orf" => Ok(RfMethod::Orf),
            "lkrf" => Ok(RfMethod::Lkrf),
            "eerf" => Ok(RfMethod::Eerf),
            "grff" => Ok(RfMethod::GaussianRff),
            other => Err(Error::InvalidParameter(format!("unknown random-feature method '{other}'"))),
        }
    }
}

/// Random cosine feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomFeatureMap {
    pub method: RfMethod,
    /// `M × D`, one frequency `γ_m` per row.
    pub frequencies: Vec<Vec<f64>>,
    pub phases: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
    /// Candidate pool size for selected maps, 0 otherwise.
    pub pool_size: usize,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be finite and positive, got {sigma}")));
    }
    Ok(())
}

fn check_shape(dim: usize, m: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if m == 0 {
        return Err(Error::InvalidM { m, reason: "at least one feature is required".into() });
    }
    Ok(())
}

fn draw_phases(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(0.0..2.0 * PI)).collect()
}

/// Random kitchen sinks for the Laplace kernel.
pub fn rks_map(dim: usize, m: usize, sigma: f64, seed: u64) -> Result<RandomFeatureMap> {
    check_shape(dim, m)?;
    check_sigma(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cauchy = Cauchy::new(0.0, 1.0).expect("unit Cauchy");
    let frequencies = (0..m).map(|_| (0..dim).map(|_| sigma * cauchy.sample(&mut rng)).collect()).collect();
    let phases = draw_phases(&mut rng, m);
    Ok(RandomFeatureMap { method: RfMethod::Rks, frequencies, phases, sigma, seed, pool_size: 0 })
}

/// I.i.d. Gaussian frequencies `N(0, σ² I)`.
pub fn gaussian_rff_map(dim: usize, m: usize, sigma: f64, seed: u64) -> Result<RandomFeatureMap> {
    check_shape(dim, m)?;
    check_sigma(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frequencies = (0..m)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    sigma * g
                })
                .collect()
        })
        .collect();
    let phases = draw_phases(&mut rng, m);
    Ok(RandomFeatureMap { method: RfMethod::GaussianRff, frequencies, phases, sigma, seed, pool_size: 0 })
}

/// Haar-distributed orthogonal `dim × dim` matrix from a Gaussian QR.
pub(crate) fn haar_orthogonal(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    // fix column signs so the distribution is uniform
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthogonal random features: stacked blocks `σ S Q`, truncated to `m` rows.
pub fn orf_map(dim: usize, m: usize, sigma: f64, seed: u64) -> Result<RandomFeatureMap> {
    check_shape(dim, m)?;
    check_sigma(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chi2 = ChiSquared::new(dim as f64).expect("positive degrees of freedom");
    let mut frequencies = Vec::with_capacity(m);
    while frequencies.len() < m {
        let q = haar_orthogonal(&mut rng, dim);
        for row in 0..dim {
            let radius = chi2.sample(&mut rng).sqrt();
            frequencies.push((0..dim).map(|c| sigma * radius * q[(row, c)]).collect());
        }
    }
    frequencies.truncate(m);
    let phases = draw_phases(&mut rng, m);
    Ok(RandomFeatureMap { method: RfMethod::Orf, frequencies, phases, sigma, seed, pool_size: 0 })
}

impl RandomFeatureMap {
    pub fn dim(&self) -> usize {
        self.frequencies.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Unscaled `cos(xᵀγ_m + b_m)`.
    fn raw_features(&self, x: &[f64]) -> Vec<f64> {
        self.frequencies
            .iter()
            .zip(&self.phases)
            .map(|(g, b)| (g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b).cos())
            .collect()
    }

    /// `M^{-1/2} [cos(xᵀγ_m + b_m)]_m`.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let s = 1.0 / (self.len() as f64).sqrt();
        Ok(self.raw_features(x).into_iter().map(|v| s * v).collect())
    }

    /// Dense `N × M` feature matrix.
    pub fn embed_batch(&self, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        use rayon::prelude::*;
        let m = self.len();
        let embedded: Vec<Vec<f64>> = rows.par_iter().map(|x| self.embed(x)).collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(rows.len(), m, |r, c| embedded[r][c]))
    }

    /// Unbiased kernel estimate `2 z(x)ᵀ z(x')`.
    pub fn kernel_estimate(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        let a = self.embed(x)?;
        let b = self.embed(xp)?;
        Ok(2.0 * a.iter().zip(&b).map(|(u, v)| u * v).sum::<f64>())
    }

    fn subset(&self, method: RfMethod, keep: &[usize]) -> RandomFeatureMap {
        RandomFeatureMap {
            method,
            frequencies: keep.iter().map(|&k| self.frequencies[k].clone()).collect(),
            phases: keep.iter().map(|&k| self.phases[k]).collect(),
            sigma: self.sigma,
            seed: self.seed,
            pool_size: self.len(),
        }
    }

    /// Keeps the `m` highest-scoring pool members, ties to the lower index,
    /// in pool order.
    fn select_top(&self, method: RfMethod, scores: &[f64], m: usize) -> Result<RandomFeatureMap> {
        if m == 0 || m > self.len() {
            return Err(Error::InvalidM { m, reason: format!("must lie in [1, {}]", self.len()) });
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let mut keep = order[..m].to_vec();
        keep.sort_unstable();
        Ok(self.subset(method, &keep))
    }

    /// Per-candidate `(Σ_i y_i ζ_m(x_i), Σ_i ζ_m(x_i)²)` on training data.
    fn moments(&self, data: &[Vec<f64>], labels: &[f64]) -> Result<Vec<(f64, f64)>> {
        check_dim(data.len(), labels.len())?;
        let mut acc = vec![(0.0, 0.0); self.len()];
        for (x, &y) in data.iter().zip(labels) {
            check_dim(self.dim(), x.len())?;
            for (a, z) in acc.iter_mut().zip(self.raw_features(x)) {
                a.0 += y * z;
                a.1 += z * z;
            }
        }
        Ok(acc)
    }
}

/// Kernel–target alignment ranking: `a_m = (Σ_i y_i ζ_m(x_i))² / Σ_i ζ_m(x_i)²`.
pub fn lkrf_select(pool: &RandomFeatureMap, data: &[Vec<f64>], labels: &[f64], m: usize) -> Result<RandomFeatureMap> {
    let scores: Vec<f64> =
        pool.moments(data, labels)?.into_iter().map(|(yz, zz)| if zz > 0.0 { yz * yz / zz } else { 0.0 }).collect();
    pool.select_top(RfMethod::Lkrf, &scores, m)
}

/// First-moment energy ranking: `s_m = |N⁻¹ Σ_i y_i ζ_m(x_i)|`.
pub fn eerf_select(pool: &RandomFeatureMap, data: &[Vec<f64>], labels: &[f64], m: usize) -> Result<RandomFeatureMap> {
    let n = data.len().max(1) as f64;
    let scores: Vec<f64> = pool.moments(data, labels)?.into_iter().map(|(yz, _)| (yz / n).abs()).collect();
    pool.select_top(RfMethod::Eerf, &scores, m)
}

/// Draws a pool of `pool_factor · m` RKS features and selects `m` of them.
pub fn selected_map(
    method: RfMethod,
    data: &[Vec<f64>],
    labels: &[f64],
    m: usize,
    pool_factor: usize,
    sigma: f64,
    seed: u64,
) -> Result<RandomFeatureMap> {
    let dim = data.first().map_or(0, Vec::len);
    let pool = rks_map(dim, m * pool_factor.max(1), sigma, seed)?;
    match method {
        RfMethod::Lkrf => lkrf_select(&pool, data, labels, m),
        RfMethod::Eerf => eerf_select(&pool, data, labels, m),
        other => Err(Error::InvalidParameter(format!("{other} is not a selection method"))),
    }
}
