//! The constrained objective `φ(x) = ½‖Ax − b‖² + α·TV_τ(x)` over `x ≥ 0`,
//! together with the gradient map
//!
//! ```text
//! G_ν(x) = ν (x − P_Q(x − ∇φ(x)/ν))
//! ```
//!
//! and the stopping rule `‖G_ν(x)‖₂ / N ≤ ε`.

use crate::error::{Error, Result};
use crate::geometry::{Projector, Sinogram, Volume};
use crate::regularizer::{tv_gradient_raw, tv_value_raw, TvConfig};
use crate::vecops::{norm, norm_sq};

/// A smooth objective over a convex feasible set, seen by the solvers as a
/// function of a flat vector.
pub trait Objective {
    /// Dimension of the search space.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn value(&self, x: &[f64]) -> f64;

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);

    /// Euclidean projection onto the feasible set, in place. Defaults to the
    /// nonnegative orthant.
    fn project(&self, x: &mut [f64]) {
        project_nonnegative(x);
    }
}

pub fn project_nonnegative(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Componentwise `max(x, 0)`.
pub fn project_feasible(x: &Volume) -> Volume {
    let mut out = x.clone();
    project_nonnegative(out.values_mut());
    out
}

#[derive(Clone, Debug)]
pub struct GradientMapResult {
    /// `P_Q(x − ∇f(x)/ν)`
    pub mapped: Volume,
    /// `G_ν(x)`
    pub map: Volume,
    /// `‖G_ν(x)‖₂ / N`
    pub scaled_norm: f64,
}

/// `(P_Q(x − g/ν), G_ν(x))` for a precomputed gradient `g`.
pub fn gradient_map_with<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    grad: &[f64],
    nu: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut mapped: Vec<f64> = x.iter().zip(grad).map(|(xi, gi)| xi - gi / nu).collect();
    obj.project(&mut mapped);
    let map = x.iter().zip(&mapped).map(|(xi, pi)| nu * (xi - pi)).collect();
    (mapped, map)
}

/// `‖G_ν(x)‖₂ / N` for a precomputed gradient.
pub fn scaled_gradient_map_norm<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    grad: &[f64],
    nu: f64,
) -> f64 {
    let (_, map) = gradient_map_with(obj, x, grad, nu);
    norm(&map) / x.len() as f64
}

/// The reconstruction problem: projector, data, TV weight and smoothing.
/// The feasible set is the nonnegative orthant.
#[derive(Clone, Debug)]
pub struct Problem {
    projector: Projector,
    data: Sinogram,
    alpha: f64,
    tv: TvConfig,
}

impl Problem {
    pub fn new(projector: Projector, data: Sinogram, alpha: f64, tv: TvConfig) -> Result<Self> {
        data.check_geometry(projector.geometry())?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if !(tv.tau > 0.0 && tv.tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be positive, got {}", tv.tau)));
        }
        if !data.values().iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("projection data contains non-finite values"));
        }
        Ok(Problem {
            projector,
            data,
            alpha,
            tv,
        })
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    pub fn data(&self) -> &Sinogram {
        &self.data
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tv(&self) -> &TvConfig {
        &self.tv
    }

    /// Wraps a flat solver iterate as a volume on the reconstruction grid.
    pub fn volume(&self, values: Vec<f64>) -> Result<Volume> {
        Volume::from_values(*self.projector.grid(), values)
    }

    fn check(&self, x: &Volume) -> Result<()> {
        if x.grid() != self.projector.grid() {
            return Err(Error::mismatch(self.projector.grid(), x.grid()));
        }
        Ok(())
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.projector.forward_raw(x);
        for (ri, bi) in r.iter_mut().zip(self.data.values()) {
            *ri -= bi;
        }
        r
    }

    pub fn objective_value(&self, x: &Volume) -> Result<f64> {
        self.check(x)?;
        Ok(self.value(x.values()))
    }

    pub fn objective_gradient(&self, x: &Volume) -> Result<Volume> {
        self.check(x)?;
        let (_, g) = self.value_and_gradient(x.values());
        self.volume(g)
    }

    pub fn gradient_map(&self, x: &Volume, nu: f64) -> Result<GradientMapResult> {
        self.check(x)?;
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::invalid(format!("nu must be positive, got {nu}")));
        }
        let (_, g) = self.value_and_gradient(x.values());
        let (mapped, map) = gradient_map_with(self, x.values(), &g, nu);
        let scaled_norm = norm(&map) / x.len() as f64;
        Ok(GradientMapResult {
            mapped: self.volume(mapped)?,
            map: self.volume(map)?,
            scaled_norm,
        })
    }

    /// True iff `‖G_ν(x)‖₂ / N ≤ eps`.
    pub fn stop_check(&self, x: &Volume, nu: f64, eps: f64) -> Result<bool> {
        if !(eps > 0.0) {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        Ok(self.gradient_map(x, nu)?.scaled_norm <= eps)
    }
}

impl Objective for Problem {
    fn len(&self) -> usize {
        self.projector.grid().len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        0.5 * norm_sq(&r) + self.alpha * tv_value_raw(self.projector.grid(), x, &self.tv)
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let grid = self.projector.grid();
        let r = self.residual(x);
        let value = 0.5 * norm_sq(&r) + self.alpha * tv_value_raw(grid, x, &self.tv);
        let mut g = self.projector.back_raw(&r);
        for (gi, ti) in g.iter_mut().zip(tv_gradient_raw(grid, x, &self.tv)) {
            *gi += self.alpha * ti;
        }
        (value, g)
    }
}
