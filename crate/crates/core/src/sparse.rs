//! Sparse feature vectors and the compressed-row feature matrix.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};

/// Minimum rows per block in Gram accumulation. Blocks are reduced in index
/// order so results do not depend on the thread count.
const GRAM_BLOCK: usize = 512;
/// Cap on memory held by per-block partial Gram matrices.
const GRAM_PARTIAL_BYTES: usize = 256 << 20;

/// Row ranges for block-parallel accumulation of an `m × m` matrix. Depends
/// only on `rows` and `m`.
pub(crate) fn gram_blocks(rows: usize, m: usize) -> Vec<(usize, usize)> {
    let by_rows = rows.div_ceil(GRAM_BLOCK).max(1);
    let by_memory = (GRAM_PARTIAL_BYTES / (8 * m * m).max(1)).max(1);
    let count = by_rows.min(by_memory);
    let size = rows.div_ceil(count).max(1);
    (0..rows).step_by(size).map(|s| (s, (s + size).min(rows))).collect()
}

/// Sparse vector with strictly increasing column indices and no stored zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVec {
    pub fn new(dim: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(c, _)| c);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidData("duplicate column in sparse vector".into()));
        }
        if let Some(&(c, _)) = entries.last() {
            if c >= dim {
                return Err(Error::InvalidData(format!("column {c} out of range for dimension {dim}")));
            }
        }
        Ok(SparseVec { dim, entries })
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut acc = 0.0;
        while let (Some(&&(ca, va)), Some(&&(cb, vb))) = (a.peek(), b.peek()) {
            match ca.cmp(&cb) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    acc += va * vb;
                    a.next();
                    b.next();
                }
            }
        }
        acc
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(c, v) in &self.entries {
            out[c] = v;
        }
        out
    }
}

/// `rows × cols` matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMat {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMat {
    pub fn from_rows(cols: usize, rows: &[SparseVec]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let nnz = rows.iter().map(SparseVec::nnz).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for r in rows {
            check_dim(cols, r.dim)?;
            for &(c, v) in &r.entries {
                indices.push(c);
                values.push(v);
            }
            offsets.push(indices.len());
        }
        Ok(SparseMat { rows: rows.len(), cols, offsets, indices, values })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::InvalidData(format!("entry ({r}, {c}) outside {rows}x{cols}")));
            }
            per_row[r].push((c, v));
        }
        let sparse_rows = per_row
            .into_iter()
            .map(|mut e| {
                e.sort_by_key(|&(c, _)| c);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(e.len());
                for (c, v) in e {
                    match merged.last_mut() {
                        Some(last) if last.0 == c => last.1 += v,
                        _ => merged.push((c, v)),
                    }
                }
                SparseVec::new(cols, merged)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(cols, &sparse_rows)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.offsets[r], self.offsets[r + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn row_vec(&self, r: usize) -> SparseVec {
        let (c, v) = self.row(r);
        SparseVec { dim: self.cols, entries: c.iter().copied().zip(v.iter().copied()).collect() }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (c, v) = self.row(r);
            c.iter().zip(v).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// `F w`.
    pub fn mul_vec(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cols, w.len())?;
        Ok((0..self.rows)
            .map(|r| {
                let (c, v) = self.row(r);
                c.iter().zip(v).map(|(&c, &v)| v * w[c]).sum()
            })
            .collect())
    }

    /// `Fᵀ v`.
    pub fn tmul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.rows, v.len())?;
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            let (c, x) = self.row(r);
            for (&c, &x) in c.iter().zip(x) {
                out[c] += x * vr;
            }
        }
        Ok(out)
    }

    /// `Fᵀ diag(weights) F`, accumulated row by row so the cost is
    /// `Σ_r nnz(row r)²`.
    pub fn weighted_gram(&self, weights: Option<&[f64]>) -> Result<DMatrix<f64>> {
        if let Some(w) = weights {
            check_dim(self.rows, w.len())?;
        }
        let m = self.cols;
        let blocks = gram_blocks(self.rows, m);
        let partials: Vec<Vec<f64>> = blocks
            .par_iter()
            .map(|&(start, end)| {
                let mut g = vec![0.0; m * m];
                for r in start..end {
                    let scale = weights.map_or(1.0, |w| w[r]);
                    let (c, v) = self.row(r);
                    for (a, (&ca, &va)) in c.iter().zip(v).enumerate() {
                        let sa = scale * va;
                        for (&cb, &vb) in c[a..].iter().zip(&v[a..]) {
                            g[ca * m + cb] += sa * vb;
                        }
                    }
                }
                g
            })
            .collect();
        let mut gram = DMatrix::zeros(m, m);
        for g in partials {
            for a in 0..m {
                for b in a..m {
                    gram[(a, b)] += g[a * m + b];
                }
            }
        }
        // row entries are column-sorted, so only the upper triangle was filled
        for a in 0..m {
            for b in a + 1..m {
                gram[(b, a)] = gram[(a, b)];
            }
        }
        Ok(gram)
    }
}
