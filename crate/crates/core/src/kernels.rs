//! Sturm–Liouville product kernels on the unit cube.
//!
//! A kernel of the form `k(x, x') = ∏_d p(min(x_d, x'_d)) q(max(x_d, x'_d))`,
//! with `p`, `q` two independent solutions of a Sturm–Liouville equation,
//! admits a multilevel basis of compactly supported, mutually orthogonal
//! features. Three closed-form families ship:
//!
//! | kind | p(x) | q(x) | k on [0,1] |
//! |------|------|------|------------|
//! | Laplace | `e^{ωx}` | `e^{-ωx}` | `e^{-ω‖x-x'‖₁}` |
//! | weighted Sobolev | `ωx + 1` | `1` | `∏ (ω min + 1)` |
//! | Brownian bridge | `x` | `1 - x` | `∏ min (1 - max)` |
//!
//! Other kernels plug in through [`SturmLiouville`] by supplying `p` and `q`;
//! feature shapes and normalization constants then follow from the Wronskian
//! formulas below unless overridden.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_dim, Error, Result};

/// Deepest supported level per dimension. Dyadic nodes `i·2^{-l}` stay exact
/// in `f64` and positions fit in `u64`.
pub const MAX_LEVEL: u32 = 52;

/// Dyadic node `i·2^{-l}`.
#[inline]
pub fn node(level: u32, pos: u64) -> f64 {
    pos as f64 * (-(level as f64)).exp2()
}

/// The one-dimensional factor of a product kernel.
pub trait SturmLiouville: Send + Sync {
    fn p(&self, x: f64) -> f64;
    fn q(&self, x: f64) -> f64;

    fn kernel_1d(&self, x: f64, xp: f64) -> f64 {
        let (lo, hi) = if x <= xp { (x, xp) } else { (xp, x) };
        self.p(lo) * self.q(hi)
    }

    /// `p(a) q(b) - p(b) q(a)`.
    fn cross(&self, a: f64, b: f64) -> f64 {
        self.p(a) * self.q(b) - self.p(b) * self.q(a)
    }

    /// Squared RKHS norm of the 1-D feature `φ_{l,i}`.
    fn feature_norm_sq_1d(&self, level: u32, pos: u64) -> f64 {
        let (zl, zc, zr) = (node(level, pos - 1), node(level, pos), node(level, pos + 1));
        self.cross(zr, zl) / (self.cross(zr, zc) * self.cross(zc, zl))
    }

    /// `C_{l,i} = ‖φ_{l,i}‖⁻²` for one dimension.
    fn norm_const_1d(&self, level: u32, pos: u64) -> f64 {
        1.0 / self.feature_norm_sq_1d(level, pos)
    }

    /// 1-D feature value without index validation. On the shared center node
    /// the left branch is used; both branches equal 1 there.
    fn phi_1d_unchecked(&self, level: u32, pos: u64, x: f64) -> f64 {
        let (zl, zc, zr) = (node(level, pos - 1), node(level, pos), node(level, pos + 1));
        if x < zl || x > zr {
            0.0
        } else if x <= zc {
            self.cross(x, zl) / self.cross(zc, zl)
        } else {
            self.cross(zr, x) / self.cross(zr, zc)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Laplace,
    WeightedSobolev,
    BrownianBridge,
}

impl KernelKind {
    pub fn uses_omega(self) -> bool {
        !matches!(self, KernelKind::BrownianBridge)
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Laplace => "laplace",
            KernelKind::WeightedSobolev => "sobolev",
            KernelKind::BrownianBridge => "bb",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "laplace" => Ok(KernelKind::Laplace),
            "sobolev" | "weighted-sobolev" | "weighted_sobolev" => Ok(KernelKind::WeightedSobolev),
            "bb" | "brownian-bridge" | "brownian_bridge" => Ok(KernelKind::BrownianBridge),
            other => Err(Error::InvalidParameter(format!("unknown kernel '{other}'"))),
        }
    }
}

/// One of the built-in product kernels on `[0,1]^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Bandwidth; ignored by the Brownian bridge.
    pub omega: f64,
    pub dim: usize,
    /// Reject points outside the unit cube instead of clamping them.
    pub strict: bool,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, omega: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if kind.uses_omega() && !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "omega must be finite and positive for the {kind} kernel, got {omega}"
            )));
        }
        Ok(KernelSpec { kind, omega, dim, strict: false })
    }

    pub fn laplace(omega: f64, dim: usize) -> Result<Self> {
        Self::new(KernelKind::Laplace, omega, dim)
    }

    pub fn weighted_sobolev(omega: f64, dim: usize) -> Result<Self> {
        Self::new(KernelKind::WeightedSobolev, omega, dim)
    }

    pub fn brownian_bridge(dim: usize) -> Result<Self> {
        Self::new(KernelKind::BrownianBridge, 1.0, dim)
    }

    pub fn with_strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    /// Validates `x` and maps it into the unit cube (clamping unless strict).
    pub fn prepare_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        x.iter()
            .enumerate()
            .map(|(d, &v)| {
                if !v.is_finite() {
                    return Err(Error::InvalidPoint(format!("coordinate {d} is {v}")));
                }
                if !(0.0..=1.0).contains(&v) {
                    if self.strict {
                        return Err(Error::InvalidPoint(format!("coordinate {d} = {v} lies outside [0, 1]")));
                    }
                    return Ok(v.clamp(0.0, 1.0));
                }
                Ok(v)
            })
            .collect()
    }
}

impl SturmLiouville for KernelSpec {
    fn p(&self, x: f64) -> f64 {
        match self.kind {
            KernelKind::Laplace => (self.omega * x).exp(),
            KernelKind::WeightedSobolev => self.omega * x + 1.0,
            KernelKind::BrownianBridge => x,
        }
    }

    fn q(&self, x: f64) -> f64 {
        match self.kind {
            KernelKind::Laplace => (-self.omega * x).exp(),
            KernelKind::WeightedSobolev => 1.0,
            KernelKind::BrownianBridge => 1.0 - x,
        }
    }

    fn kernel_1d(&self, x: f64, xp: f64) -> f64 {
        let (lo, hi) = if x <= xp { (x, xp) } else { (xp, x) };
        match self.kind {
            KernelKind::Laplace => (-self.omega * (hi - lo)).exp(),
            KernelKind::WeightedSobolev => self.omega * lo + 1.0,
            KernelKind::BrownianBridge => lo * (1.0 - hi),
        }
    }

    fn norm_const_1d(&self, level: u32, _pos: u64) -> f64 {
        let h = (-(level as f64)).exp2();
        match self.kind {
            // coth(ωh) is the squared norm of the sinh-ratio feature.
            KernelKind::Laplace => (self.omega * h).tanh(),
            KernelKind::WeightedSobolev => self.omega * h / 2.0,
            KernelKind::BrownianBridge => h / 2.0,
        }
    }

    fn feature_norm_sq_1d(&self, level: u32, pos: u64) -> f64 {
        1.0 / self.norm_const_1d(level, pos)
    }

    fn phi_1d_unchecked(&self, level: u32, pos: u64, x: f64) -> f64 {
        let h = (-(level as f64)).exp2();
        let center = node(level, pos);
        let dist = (x - center).abs();
        if dist >= h {
            return 0.0;
        }
        match self.kind {
            KernelKind::Laplace => sinh_ratio(self.omega * (h - dist), self.omega * h),
            KernelKind::WeightedSobolev | KernelKind::BrownianBridge => 1.0 - dist / h,
        }
    }
}

/// `sinh(a) / sinh(b)` for `0 ≤ a ≤ b`, without overflow for large `b`.
fn sinh_ratio(a: f64, b: f64) -> f64 {
    if b < 20.0 {
        a.sinh() / b.sinh()
    } else {
        (a - b).exp() * (-2.0 * a).exp_m1() / (-2.0 * b).exp_m1()
    }
}

/// `∏_d k_1(x_d, x'_d)` for any 1-D factor, with no validation.
pub fn product_kernel<K: SturmLiouville + ?Sized>(factor: &K, x: &[f64], xp: &[f64]) -> f64 {
    x.iter().zip(xp).map(|(&a, &b)| factor.kernel_1d(a, b)).product()
}

/// Evaluates `k(x, x')` after clamping (or rejecting) both points.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], xp: &[f64]) -> Result<f64> {
    let x = spec.prepare_point(x)?;
    let xp = spec.prepare_point(xp)?;
    Ok(product_kernel(spec, &x, &xp))
}

/// `C_l = ∏_d C_{l_d}`, the inverse squared RKHS norm of any feature on
/// level vector `l` (independent of the position for built-in kernels).
pub fn norm_const(spec: &KernelSpec, level: &[u32]) -> Result<f64> {
    check_dim(spec.dim, level.len())?;
    level.iter().try_fold(1.0, |acc, &l| {
        validate_level(l)?;
        Ok(acc * spec.norm_const_1d(l, 1))
    })
}

impl KernelSpec {
    pub fn eval(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        kernel_eval(self, x, xp)
    }

    pub fn norm_const(&self, level: &[u32]) -> Result<f64> {
        norm_const(self, level)
    }
}

pub(crate) fn validate_level(l: u32) -> Result<()> {
    if l == 0 || l > MAX_LEVEL {
        return Err(Error::InvalidLevel(format!("level {l} outside 1..={MAX_LEVEL}")));
    }
    Ok(())
}
