//! Sparse evaluation of the entropic optimal features `z(x)`.
//!
//! For a level vector `l`, the supports of `{φ_{l,i} : i ∈ B_l}` tile the cube
//! with disjoint interiors, so at most one of them is nonzero at `x`. Its
//! position is, per dimension, whichever of `⌈x_d 2^{l_d}⌉` and
//! `⌊x_d 2^{l_d}⌋` is odd. When both are even, `x_d` sits on an even dyadic
//! node where every feature of that level vanishes and nothing is emitted.
//! The cost per point is one product per level vector present in the design,
//! at most `C(n + D - 1, D)` for `S*_n`, however many columns the design has.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::design::IndexSet;
use crate::error::{check_dim, Error, Result};
use crate::features::phi_nd_unchecked;
use crate::kernels::{KernelSpec, SturmLiouville};
use crate::sparse::{SparseMat, SparseVec};

/// How each feature is scaled before it enters `z(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureScale {
    /// `√C_{l,i} φ_{l,i}`: orthonormal in the RKHS, so `z(x)ᵀz(x')` is the
    /// truncated kernel expansion.
    #[default]
    Normalized,
    /// `C_{l,i} φ_{l,i}`, as in the literal algorithm statement.
    Raw,
}

impl FeatureScale {
    pub fn name(self) -> &'static str {
        match self {
            FeatureScale::Normalized => "sqrt",
            FeatureScale::Raw => "raw",
        }
    }
}

impl std::str::FromStr for FeatureScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(FeatureScale::Normalized),
            "raw" => Ok(FeatureScale::Raw),
            other => Err(Error::InvalidParameter(format!("unknown feature scale '{other}'"))),
        }
    }
}

/// Largest per-level position table stored densely; deeper levels hash.
const DENSE_LOOKUP_BITS: u32 = 16;

/// `packed position → column` for one level vector.
#[derive(Debug, Clone)]
enum Lookup {
    /// `usize::MAX` marks positions absent from the design.
    Dense(Vec<usize>),
    Hashed(HashMap<u64, usize>),
}

impl Lookup {
    fn get(&self, code: u64) -> Option<usize> {
        match self {
            Lookup::Dense(v) => Some(v[code as usize]).filter(|&c| c != usize::MAX),
            Lookup::Hashed(h) => h.get(&code).copied(),
        }
    }

    fn insert(&mut self, code: u64, col: usize) {
        match self {
            Lookup::Dense(v) => v[code as usize] = col,
            Lookup::Hashed(h) => {
                h.insert(code, col);
            }
        }
    }
}

#[derive(Debug, Clone)]
struct LevelBlock {
    level: Vec<u32>,
    columns: Lookup,
}

/// Packs odd positions `i_d ∈ [1, 2^{l_d})` into `Σ (l_d - 1)` bits.
fn pack(level: &[u32], pos: &[u64]) -> u64 {
    level.iter().zip(pos).fold(0u64, |code, (&l, &i)| (code << (l - 1)) | (i >> 1))
}

/// A fitted EOF feature map: kernel, design and precomputed per-column scales.
#[derive(Debug, Clone)]
pub struct EofMap {
    kernel: KernelSpec,
    design: IndexSet,
    scale_mode: FeatureScale,
    scales: Vec<f64>,
    blocks: Vec<LevelBlock>,
    /// Deepest level per dimension over the design.
    max_level: Vec<u32>,
}

impl EofMap {
    pub fn new(kernel: KernelSpec, design: IndexSet, scale_mode: FeatureScale) -> Result<Self> {
        check_dim(kernel.dim, design.dim())?;
        let mut block_of: HashMap<Vec<u32>, usize> = HashMap::new();
        let mut blocks: Vec<LevelBlock> = Vec::new();
        let mut scales = Vec::with_capacity(design.len());
        for (col, f) in design.iter().enumerate() {
            let b = match block_of.get(f.level()) {
                Some(&b) => b,
                None => {
                    let bits: u32 = f.level().iter().map(|l| l - 1).sum();
                    if bits > 63 {
                        return Err(Error::InvalidLevel(format!("level vector of {f} is too deep to index")));
                    }
                    let columns = if bits <= DENSE_LOOKUP_BITS {
                        Lookup::Dense(vec![usize::MAX; 1 << bits])
                    } else {
                        Lookup::Hashed(HashMap::new())
                    };
                    blocks.push(LevelBlock { level: f.level().to_vec(), columns });
                    block_of.insert(f.level().to_vec(), blocks.len() - 1);
                    blocks.len() - 1
                }
            };
            blocks[b].columns.insert(pack(f.level(), f.pos()), col);
            let c: f64 = f.level().iter().zip(f.pos()).map(|(&l, &i)| kernel.norm_const_1d(l, i)).product();
            scales.push(match scale_mode {
                FeatureScale::Normalized => c.sqrt(),
                FeatureScale::Raw => c,
            });
        }
        let mut max_level = vec![0u32; kernel.dim];
        for b in &blocks {
            for (m, &l) in max_level.iter_mut().zip(&b.level) {
                *m = (*m).max(l);
            }
        }
        Ok(EofMap { kernel, design, scale_mode, scales, blocks, max_level })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn design(&self) -> &IndexSet {
        &self.design
    }

    pub fn scale_mode(&self) -> FeatureScale {
        self.scale_mode
    }

    /// Output dimension `M = |S|`.
    pub fn len(&self) -> usize {
        self.design.len()
    }

    pub fn is_empty(&self) -> bool {
        self.design.is_empty()
    }

    /// Number of distinct level vectors, the per-point nonzero bound.
    pub fn level_count(&self) -> usize {
        self.blocks.len()
    }

    /// `z(x)`, sparse.
    pub fn embed(&self, x: &[f64]) -> Result<SparseVec> {
        let x = self.kernel.prepare_point(x)?;
        Ok(self.embed_prepared(&x))
    }

    fn embed_prepared(&self, x: &[f64]) -> SparseVec {
        // per dimension and level: the one odd position whose support holds
        // x_d and its 1-D value, or None on an even node
        let table: Vec<Vec<Option<(u64, f64)>>> = x
            .iter()
            .zip(&self.max_level)
            .map(|(&xd, &top)| {
                (1..=top)
                    .map(|l| {
                        // exact: scaling by a power of two
                        let t = xd * (l as f64).exp2();
                        let (up, down) = (t.ceil() as u64, t.floor() as u64);
                        let i = if up % 2 == 1 {
                            up
                        } else if down % 2 == 1 {
                            down
                        } else {
                            return None;
                        };
                        Some((i, self.kernel.phi_1d_unchecked(l, i, xd)))
                    })
                    .collect()
            })
            .collect();
        let mut entries = Vec::with_capacity(self.blocks.len());
        let mut pos = vec![0u64; x.len()];
        'levels: for block in &self.blocks {
            let mut v = 1.0;
            for (d, (p, &l)) in pos.iter_mut().zip(&block.level).enumerate() {
                let Some((i, phi)) = table[d][l as usize - 1] else {
                    continue 'levels;
                };
                *p = i;
                v *= phi;
            }
            let Some(col) = block.columns.get(pack(&block.level, &pos)) else {
                continue;
            };
            let v = self.scales[col] * v;
            if v != 0.0 {
                entries.push((col, v));
            }
        }
        entries.sort_unstable_by_key(|&(c, _)| c);
        SparseVec { dim: self.design.len(), entries }
    }

    /// `F = [z(x_r)]_r` for all rows, computed in parallel.
    pub fn embed_batch(&self, rows: &[Vec<f64>]) -> Result<SparseMat> {
        let embedded: Vec<SparseVec> = rows.par_iter().map(|x| self.embed(x)).collect::<Result<_>>()?;
        SparseMat::from_rows(self.design.len(), &embedded)
    }

    /// Dense reference evaluation `[scale · φ_{l,i}(x)]` over every column.
    pub fn embed_dense(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = self.kernel.prepare_point(x)?;
        Ok(self.design.iter().zip(&self.scales).map(|(f, s)| s * phi_nd_unchecked(&self.kernel, f, &x)).collect())
    }

    /// `z(x)ᵀ z(x') = Σ_{(l,i)∈S} C_{l,i} φ_{l,i}(x) φ_{l,i}(x')`.
    pub fn kernel_approx(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        if self.scale_mode != FeatureScale::Normalized {
            return Err(Error::InvalidParameter("kernel approximation requires normalized feature scaling".into()));
        }
        Ok(self.embed(x)?.dot(&self.embed(xp)?))
    }
}

/// Free-function form of [`EofMap::embed`] for one-off calls.
pub fn embed(kernel: &KernelSpec, design: &IndexSet, x: &[f64]) -> Result<SparseVec> {
    EofMap::new(*kernel, design.clone(), FeatureScale::Normalized)?.embed(x)
}

pub fn embed_batch(kernel: &KernelSpec, design: &IndexSet, rows: &[Vec<f64>]) -> Result<SparseMat> {
    EofMap::new(*kernel, design.clone(), FeatureScale::Normalized)?.embed_batch(rows)
}

pub fn kernel_approx(kernel: &KernelSpec, design: &IndexSet, x: &[f64], xp: &[f64]) -> Result<f64> {
    EofMap::new(*kernel, design.clone(), FeatureScale::Normalized)?.kernel_approx(x, xp)
}
