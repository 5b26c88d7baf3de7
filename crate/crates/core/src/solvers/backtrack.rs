use crate::error::{Error, Result};
use crate::problem::Objective;
use crate::vecops::{dot, norm_sq, sub};

/// Largest number of `L` increases before backtracking gives up.
pub const MAX_BACKTRACKS: usize = 200;

/// Relative slack, in units of `|f(y)|`, allowed in the sufficient-decrease
/// test. Without it, evaluation noise near the optimum keeps failing the
/// test and `L` grows until steps vanish and the gradient map reads 0.
pub const ROUNDING_SLACK: f64 = 16.0 * f64::EPSILON;

#[derive(Clone, Debug)]
pub struct BacktrackStep {
    pub x: Vec<f64>,
    pub value: f64,
    pub lipschitz: f64,
    /// Number of times `L` was multiplied by `ρ_L`.
    pub increases: usize,
}

/// Finds `x = P_Q(y − ∇f(y)/L̃)` with the smallest `L̃ = L̄·ρ_Lᵐ` such that
/// `f(x) ≤ f(y) + ∇f(y)ᵀ(x − y) + ½L̃‖x − y‖²` up to
/// [`ROUNDING_SLACK`]`·|f(y)|`.
pub fn backtrack<O: Objective + ?Sized>(
    obj: &O,
    y: &[f64],
    l_bar: f64,
    rho_l: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(l_bar > 0.0 && l_bar.is_finite()) {
        return Err(Error::invalid(format!("L_bar must be positive, got {l_bar}")));
    }
    if !(rho_l > 1.0) {
        return Err(Error::invalid(format!("rho_L must exceed 1, got {rho_l}")));
    }
    if y.len() != obj.len() {
        return Err(Error::mismatch(obj.len(), y.len()));
    }
    let (fy, gy) = obj.value_and_gradient(y);
    backtrack_from(obj, y, fy, &gy, l_bar, rho_l)
        .map(|step| (step.x, step.lipschitz))
        .map_err(|reason| Error::SolverAborted {
            iteration: 0,
            objective: fy,
            reason,
        })
}

pub(crate) fn backtrack_from<O: Objective + ?Sized>(
    obj: &O,
    y: &[f64],
    fy: f64,
    gy: &[f64],
    l_bar: f64,
    rho_l: f64,
) -> std::result::Result<BacktrackStep, String> {
    let mut l = l_bar;
    let slack = ROUNDING_SLACK * fy.abs();
    for increases in 0..=MAX_BACKTRACKS {
        let mut x: Vec<f64> = y.iter().zip(gy).map(|(yi, gi)| yi - gi / l).collect();
        obj.project(&mut x);
        let d = sub(&x, y);
        let fx = obj.value(&x);
        if fx.is_finite() && fx <= fy + dot(gy, &d) + 0.5 * l * norm_sq(&d) + slack {
            return Ok(BacktrackStep {
                x,
                value: fx,
                lipschitz: l,
                increases,
            });
        }
        l *= rho_l;
    }
    Err(format!(
        "backtracking exceeded {MAX_BACKTRACKS} increases of L (last L = {l:e}, f(y) = {fy})"
    ))
}

/// `min(μ_prev, (f(x) − f(y) − ∇f(y)ᵀ(x − y)) / (½‖x − y‖²))`, keeping
/// `μ_prev` when the quotient is undefined, nonpositive or non-finite.
pub fn estimate_mu<O: Objective + ?Sized>(obj: &O, x: &[f64], y: &[f64], mu_prev: f64) -> f64 {
    if x == y {
        return mu_prev;
    }
    let fx = obj.value(x);
    let (fy, gy) = obj.value_and_gradient(y);
    estimate_mu_from(x, fx, y, fy, &gy, mu_prev)
}

pub(crate) fn estimate_mu_from(x: &[f64], fx: f64, y: &[f64], fy: f64, gy: &[f64], mu_prev: f64) -> f64 {
    let d = sub(x, y);
    let dd = norm_sq(&d);
    if dd == 0.0 {
        return mu_prev;
    }
    let ratio = (fx - fy - dot(gy, &d)) / (0.5 * dd);
    if ratio > 0.0 && ratio.is_finite() {
        mu_prev.min(ratio)
    } else {
        mu_prev
    }
}
