//! Isotropic total variation with Huber smoothing.
//!
//! `D_j x` is the forward difference at voxel `j` along x, y and z. On the
//! last slice of an axis the corresponding component is zero, so `D`
//! annihilates constants. The smoothed value is `Σ_j φ_τ(‖D_j x‖)` with
//!
//! ```text
//! φ_τ(t) = t − τ/2      for t ≥ τ
//!        = t² / (2τ)    for t < τ
//! ```
//!
//! which is exact TV for `τ = 0`.

use crate::error::{Error, Result};
use crate::geometry::{Volume, VolumeGrid};

/// Upper bound on `‖D‖²` for the 3D forward-difference stencil.
pub const DIFFERENCE_NORM_SQ_BOUND: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TvConfig {
    pub tau: f64,
}

impl TvConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be nonnegative, got {tau}")));
        }
        Ok(TvConfig { tau })
    }

    /// Lipschitz bound of the smoothed TV gradient.
    pub fn gradient_lipschitz_bound(&self) -> f64 {
        DIFFERENCE_NORM_SQ_BOUND / self.tau
    }
}

/// Forward differences at voxel `j`.
pub fn apply_d(x: &Volume, j: usize) -> Result<[f64; 3]> {
    if j >= x.len() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: x.len(),
        });
    }
    Ok(differences(x.grid(), x.values(), j))
}

#[inline]
fn differences(grid: &VolumeGrid, x: &[f64], j: usize) -> [f64; 3] {
    let c = grid.coords(j);
    let strides = grid.strides();
    let mut out = [0.0; 3];
    for axis in 0..3 {
        if c[axis] + 1 < grid.dims[axis] {
            out[axis] = x[j + strides[axis]] - x[j];
        }
    }
    out
}

fn huber(t: f64, tau: f64) -> f64 {
    if t >= tau {
        t - tau / 2.0
    } else {
        t * t / (2.0 * tau)
    }
}

pub fn tv_value(x: &Volume, cfg: &TvConfig) -> f64 {
    tv_value_raw(x.grid(), x.values(), cfg)
}

pub(crate) fn tv_value_raw(grid: &VolumeGrid, x: &[f64], cfg: &TvConfig) -> f64 {
    (0..grid.len())
        .map(|j| {
            let d = differences(grid, x, j);
            huber((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt(), cfg.tau)
        })
        .sum()
}

/// Gradient of [`tv_value`]: `Σ_j D_jᵀ (D_j x / max(‖D_j x‖, τ))`.
pub fn tv_gradient(x: &Volume, cfg: &TvConfig) -> Result<Volume> {
    if !(cfg.tau > 0.0) {
        return Err(Error::invalid("tv_gradient requires tau > 0"));
    }
    Volume::from_values(*x.grid(), tv_gradient_raw(x.grid(), x.values(), cfg))
}

pub(crate) fn tv_gradient_raw(grid: &VolumeGrid, x: &[f64], cfg: &TvConfig) -> Vec<f64> {
    let strides = grid.strides();
    let mut grad = vec![0.0; x.len()];
    for j in 0..grid.len() {
        let c = grid.coords(j);
        let d = differences(grid, x, j);
        let t = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let scale = 1.0 / t.max(cfg.tau);
        for axis in 0..3 {
            if c[axis] + 1 < grid.dims[axis] {
                let q = d[axis] * scale;
                grad[j] -= q;
                grad[j + strides[axis]] += q;
            }
        }
    }
    grad
}
