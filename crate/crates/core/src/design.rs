//! Feature index sets: the sparse-grid design and its truncations.
//!
//! Choosing `M` features to maximize the metric entropy of the projection
//! reduces to maximizing `Σ_{(l,i)∈S} C_{l,i}` subject to `|S| ≤ M`. Every
//! item has unit weight, so sorting by `C` is exact; the NP-hardness of
//! knapsack only bites for weighted variants, which are not provided here.
//! For kernels whose `C_l` depends only on `l` and strictly decreases in
//! `|l|`, the optimum at `M = |S*_n|` is the sparse grid
//! `S*_n = {(l, i) : l_d ≥ 1, |l| ≤ n + D - 1, i ∈ B_l}`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureIndex;
use crate::kernels::MAX_LEVEL;

/// Ordered, duplicate-free collection of feature indices. The order is the
/// column order of every embedding built from it.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSet {
    dim: usize,
    indices: Vec<FeatureIndex>,
    /// `n` when this is exactly `S*_n` or a random truncation of it.
    pub level_cap: Option<u32>,
    /// Seed of the random truncation that produced this set, if any.
    pub seed: Option<u64>,
}

impl IndexSet {
    /// Builds a set from arbitrary indices, sorting them canonically.
    pub fn from_indices(dim: usize, mut indices: Vec<FeatureIndex>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        for f in &indices {
            crate::error::check_dim(dim, f.dim())?;
        }
        indices.sort();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidIndex("duplicate feature index".into()));
        }
        Ok(IndexSet { dim, indices, level_cap: None, seed: None })
    }

    pub fn empty(dim: usize) -> Self {
        IndexSet { dim, indices: Vec::new(), level_cap: None, seed: None }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[FeatureIndex] {
        &self.indices
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FeatureIndex> {
        self.indices.iter()
    }

    pub fn contains(&self, f: &FeatureIndex) -> bool {
        self.indices.binary_search(f).is_ok()
    }

    pub fn max_level(&self) -> u32 {
        self.indices.iter().flat_map(|f| f.level().iter().copied()).max().unwrap_or(0)
    }
}

impl<'a> IntoIterator for &'a IndexSet {
    type Item = &'a FeatureIndex;
    type IntoIter = std::slice::Iter<'a, FeatureIndex>;
    fn into_iter(self) -> Self::IntoIter {
        self.indices.iter()
    }
}

/// Binomial coefficient in `u128` (exact for the sizes used here).
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, j| acc * (n - j) as u128 / (j + 1) as u128)
}

/// `|S*_n| = Σ_{j=D}^{n+D-1} C(j-1, D-1) 2^{j-D}`.
pub fn sparse_grid_size(dim: usize, n: u32) -> u128 {
    let d = dim as u64;
    (d..=n as u64 + d - 1).map(|j| binomial(j - 1, d - 1) << (j - d)).sum()
}

/// Number of nonzeros of an embedding over the full `S*_n` at a generic
/// point: the count of level vectors, `C(n + D - 1, D)`.
pub fn nnz_per_point(dim: usize, n: u32) -> u128 {
    binomial(n as u64 + dim as u64 - 1, dim as u64)
}

/// Smallest `n` with `|S*_n| ≥ m`, i.e. `|S*_{n-1}| < m ≤ |S*_n|`.
pub fn level_for_m(dim: usize, m: usize) -> Result<u32> {
    if m == 0 {
        return Err(Error::InvalidM { m, reason: "at least one feature is required".into() });
    }
    (1..=MAX_LEVEL)
        .find(|&n| sparse_grid_size(dim, n) >= m as u128)
        .ok_or_else(|| Error::InvalidM { m, reason: "exceeds the deepest supported sparse grid".into() })
}

/// All level vectors `l ∈ ℕ^D` with `l_d ≥ 1` and `|l| = total`, in
/// lexicographic order.
pub fn level_vectors(dim: usize, total: u32) -> Vec<Vec<u32>> {
    fn rec(dim: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == dim - 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        let left = (dim - 1 - prefix.len()) as u32;
        for l in 1..=remaining - left {
            prefix.push(l);
            rec(dim, remaining - l, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if total >= dim as u32 {
        rec(dim, total, &mut Vec::with_capacity(dim), &mut out);
    }
    out
}

/// All odd position vectors `i ∈ B_l`, lexicographic.
pub fn positions(level: &[u32]) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::with_capacity(level.len())];
    for &l in level {
        let odd: Vec<u64> = (1..(1u64 << l)).step_by(2).collect();
        out = out
            .into_iter()
            .flat_map(|prefix| {
                odd.iter().map(move |&i| {
                    let mut v = prefix.clone();
                    v.push(i);
                    v
                })
            })
            .collect();
    }
    out
}

/// The sparse grid `S*_n` in canonical order.
pub fn enumerate_sparse_grid(dim: usize, n: u32) -> Result<IndexSet> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if !(1..=MAX_LEVEL).contains(&n) {
        return Err(Error::InvalidLevel(format!("sparse-grid level n = {n} outside 1..={MAX_LEVEL}")));
    }
    let mut indices = Vec::with_capacity(sparse_grid_size(dim, n).min(1 << 24) as usize);
    for total in dim as u32..=n + dim as u32 - 1 {
        for level in level_vectors(dim, total) {
            for pos in positions(&level) {
                indices.push(FeatureIndex::new(level.clone(), pos)?);
            }
        }
    }
    debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
    Ok(IndexSet { dim, indices, level_cap: Some(n), seed: None })
}

/// Result of [`entropic_select`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub set: IndexSet,
    /// Set when fewer than the requested `M` candidates were available.
    pub truncated: bool,
}

/// Picks the `m` candidates with the largest constants `C`. Ties go to the
/// canonically smaller index; survivors keep canonical order.
pub fn entropic_select<F>(candidates: &IndexSet, constants: F, m: usize) -> Result<Selection>
where
    F: Fn(&FeatureIndex) -> f64,
{
    if m == 0 {
        return Err(Error::InvalidM { m, reason: "at least one feature is required".into() });
    }
    let mut scored = Vec::with_capacity(candidates.len());
    for (pos, f) in candidates.iter().enumerate() {
        let c = constants(f);
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!("constant for {f} is {c}, expected finite positive")));
        }
        scored.push((c, pos));
    }
    let truncated = m > candidates.len();
    if truncated {
        log::warn!("requested {m} features but only {} candidates exist", candidates.len());
    }
    // candidates are canonically ordered, so a stable sort keeps ties canonical
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut keep: Vec<usize> = scored.iter().take(m).map(|&(_, pos)| pos).collect();
    keep.sort_unstable();
    let set = IndexSet {
        dim: candidates.dim,
        indices: keep.into_iter().map(|p| candidates.indices[p].clone()).collect(),
        level_cap: None,
        seed: None,
    };
    let set = if set.len() == candidates.len() { IndexSet { level_cap: candidates.level_cap, ..set } } else { set };
    Ok(Selection { set, truncated })
}

/// Uniformly random `m`-subset of `full` under `seed`, in canonical order.
///
/// When `full` is a sparse grid `S*_n`, `m` must satisfy
/// `|S*_{n-1}| < m ≤ |S*_n|`.
pub fn truncate_random(full: &IndexSet, m: usize, seed: u64) -> Result<IndexSet> {
    let lower = match full.level_cap {
        Some(n) if n > 1 => sparse_grid_size(full.dim, n - 1) as usize,
        _ => 0,
    };
    if m <= lower || m > full.len() {
        return Err(Error::InvalidM { m, reason: format!("must lie in ({lower}, {}]", full.len()) });
    }
    if m == full.len() {
        return Ok(full.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, full.len(), m).into_vec();
    picked.sort_unstable();
    Ok(IndexSet {
        dim: full.dim,
        indices: picked.into_iter().map(|p| full.indices[p].clone()).collect(),
        level_cap: full.level_cap,
        seed: Some(seed),
    })
}

/// The EOF design for a requested feature count: `S*_n` when `m`
/// hits a full size, otherwise a seeded random truncation of the smallest
/// sparse grid that holds `m` features.
pub fn design_for_m(dim: usize, m: usize, seed: u64) -> Result<IndexSet> {
    let n = level_for_m(dim, m)?;
    let full = enumerate_sparse_grid(dim, n)?;
    truncate_random(&full, m, seed)
}
