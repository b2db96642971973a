//! Multilevel features `φ_{l,i}` and their tensor products.
//!
//! In one dimension the feature with level `l ≥ 1` and odd position
//! `1 ≤ i ≤ 2^l - 1` lives on `[(i-1)2^{-l}, (i+1)2^{-l}]`, equals 1 at the
//! center node `i·2^{-l}` and vanishes at both endpoints. Between nodes it is
//! the unique combination of `p` and `q` with those values, so features on
//! the same level have disjoint interiors, features on consecutive levels
//! nest, and distinct features are orthogonal in the RKHS.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{check_dim, Error, Result};
use crate::kernels::{node, validate_level, SturmLiouville};

/// Multilevel index `(l, i)` of one feature.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureIndex {
    level: Vec<u32>,
    pos: Vec<u64>,
}

impl FeatureIndex {
    pub fn new(level: Vec<u32>, pos: Vec<u64>) -> Result<Self> {
        check_dim(level.len(), pos.len())?;
        if level.is_empty() {
            return Err(Error::InvalidIndex("empty index".into()));
        }
        for (&l, &i) in level.iter().zip(&pos) {
            validate_level(l)?;
            validate_pos(l, i)?;
        }
        Ok(FeatureIndex { level, pos })
    }

    pub fn level(&self) -> &[u32] {
        &self.level
    }

    pub fn pos(&self) -> &[u64] {
        &self.pos
    }

    pub fn dim(&self) -> usize {
        self.level.len()
    }

    /// `|l| = Σ_d l_d`.
    pub fn level_sum(&self) -> u32 {
        self.level.iter().sum()
    }

    pub fn center(&self) -> Vec<f64> {
        self.level.iter().zip(&self.pos).map(|(&l, &i)| node(l, i)).collect()
    }
}

impl Ord for FeatureIndex {
    /// Canonical column order: `(|l|, l, i)` lexicographically.
    fn cmp(&self, other: &Self) -> Ordering {
        self.level_sum()
            .cmp(&other.level_sum())
            .then_with(|| self.level.cmp(&other.level))
            .then_with(|| self.pos.cmp(&other.pos))
    }
}

impl PartialOrd for FeatureIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FeatureIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<String>| v.join(",");
        write!(
            f,
            "l=({}) i=({})",
            join(self.level.iter().map(|l| l.to_string()).collect()),
            join(self.pos.iter().map(|i| i.to_string()).collect())
        )
    }
}

fn validate_pos(l: u32, i: u64) -> Result<()> {
    if i.is_multiple_of(2) {
        return Err(Error::InvalidIndex(format!("position {i} is even")));
    }
    if i >= 1u64 << l {
        return Err(Error::InvalidIndex(format!("position {i} exceeds 2^{l} - 1")));
    }
    Ok(())
}

/// Value of the 1-D feature `φ_{l,i}` at `x`.
pub fn phi_1d<K: SturmLiouville + ?Sized>(kernel: &K, level: u32, pos: u64, x: f64) -> Result<f64> {
    validate_level(level)?;
    validate_pos(level, pos)?;
    Ok(kernel.phi_1d_unchecked(level, pos, x))
}

/// `φ_{l,i}(x) = ∏_d φ_{l_d,i_d}(x_d)`.
pub fn phi_nd<K: SturmLiouville + ?Sized>(kernel: &K, idx: &FeatureIndex, x: &[f64]) -> Result<f64> {
    check_dim(idx.dim(), x.len())?;
    Ok(phi_nd_unchecked(kernel, idx, x))
}

pub(crate) fn phi_nd_unchecked<K: SturmLiouville + ?Sized>(kernel: &K, idx: &FeatureIndex, x: &[f64]) -> f64 {
    let mut v = 1.0;
    for ((&l, &i), &xd) in idx.level.iter().zip(&idx.pos).zip(x) {
        v *= kernel.phi_1d_unchecked(l, i, xd);
        if v == 0.0 {
            return 0.0;
        }
    }
    v
}

/// Axis-aligned closed box, one `[lo, hi]` interval per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportBox {
    pub bounds: Vec<(f64, f64)>,
}

impl SupportBox {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.bounds.iter().zip(x).all(|(&(lo, hi), &v)| lo <= v && v <= hi)
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }
}

/// `×_d [(i_d - 1)2^{-l_d}, (i_d + 1)2^{-l_d}]`.
pub fn support_box(idx: &FeatureIndex) -> SupportBox {
    SupportBox { bounds: idx.level.iter().zip(&idx.pos).map(|(&l, &i)| (node(l, i - 1), node(l, i + 1))).collect() }
}

/// Coefficients of the 1-D surplus operator at the nodes
/// `(z_{l,i-1}, z_{l,i}, z_{l,i+1})`.
///
/// With `W(a, b) = p(a)q(b) - p(b)q(a)`:
/// `Δf = α f(z_i) - f(z_{i-1}) / W(z_i, z_{i-1}) - f(z_{i+1}) / W(z_{i+1}, z_i)`
/// where `α = W(z_{i+1}, z_{i-1}) / (W(z_{i+1}, z_i) W(z_i, z_{i-1}))`.
/// `Δf = ⟨f, φ_{l,i}⟩_k` for every `f` in the RKHS.
pub fn surplus_stencil_1d<K: SturmLiouville + ?Sized>(kernel: &K, level: u32, pos: u64) -> [f64; 3] {
    let (zl, zc, zr) = (node(level, pos - 1), node(level, pos), node(level, pos + 1));
    let w_left = kernel.cross(zc, zl);
    let w_right = kernel.cross(zr, zc);
    let alpha = kernel.cross(zr, zl) / (w_right * w_left);
    [-1.0 / w_left, alpha, -1.0 / w_right]
}

/// `[⊗_d Δ_{l_d,i_d}] f`: the RKHS inner product `⟨f, φ_{l,i}⟩_k` computed
/// from `f` at the `3^D` stencil nodes around the feature center.
pub fn hierarchical_surplus<K, F>(kernel: &K, f: F, idx: &FeatureIndex) -> f64
where
    K: SturmLiouville + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    let dim = idx.dim();
    let stencils: Vec<[f64; 3]> =
        idx.level.iter().zip(&idx.pos).map(|(&l, &i)| surplus_stencil_1d(kernel, l, i)).collect();
    let nodes: Vec<[f64; 3]> =
        idx.level.iter().zip(&idx.pos).map(|(&l, &i)| [node(l, i - 1), node(l, i), node(l, i + 1)]).collect();

    let mut point = vec![0.0; dim];
    let mut total = 0.0;
    let mut digits = vec![0usize; dim];
    loop {
        let mut weight = 1.0;
        for d in 0..dim {
            weight *= stencils[d][digits[d]];
            point[d] = nodes[d][digits[d]];
        }
        total += weight * f(&point);

        // odometer over {0,1,2}^D
        let mut d = 0;
        loop {
            if d == dim {
                return total;
            }
            digits[d] += 1;
            if digits[d] < 3 {
                break;
            }
            digits[d] = 0;
            d += 1;
        }
    }
}
