//! Projected-gradient solvers for [`Objective`]s over a convex feasible set.
//!
//! All three methods count one *iteration* per accepted outer step and log
//! inner line-search trials separately in
//! [`ConvergenceRecord::line_search_count`]. Each run stops when the scaled
//! gradient-map norm of the newest iterate falls to `eps` or after
//! `max_iters` steps.

mod backtrack;
mod gp;
mod gpbb;
mod upn;

use std::fmt;
use std::str::FromStr;

pub use backtrack::{backtrack, estimate_mu, BacktrackStep, MAX_BACKTRACKS, ROUNDING_SLACK};
pub use gp::gp_solve;
pub use gpbb::{gpbb_solve, BB_BETA_INIT, BB_BETA_MIN};
pub use upn::{next_theta, upn_solve};

use crate::error::{Error, Result};
use crate::problem::Objective;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Tolerance on `‖G_ν(x)‖₂ / N`.
    pub eps: f64,
    pub max_iters: usize,
    /// Nonmonotone memory `K` of GPBB; the reference value is the max of the
    /// last `K + 1` objective values.
    pub memory: usize,
    /// Sufficient-decrease factor of the GPBB line search.
    pub sigma: f64,
    /// Growth factor of the backtracking Lipschitz search.
    pub rho_l: f64,
    /// Initial strong-convexity estimate for UPN.
    pub mu_init: f64,
    /// Initial Lipschitz estimate for GP and UPN.
    pub l_init: f64,
    pub record_history: bool,
    /// Keep every iterate `x⁰, x¹, …` in [`SolverResult::iterates`]. Only
    /// sensible for small problems.
    pub keep_iterates: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            eps: 1e-8,
            max_iters: 10_000,
            memory: 2,
            sigma: 0.1,
            rho_l: 1.3,
            mu_init: 1.0,
            l_init: 1.0,
            record_history: true,
            keep_iterates: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::invalid(format!("eps must be positive, got {}", self.eps)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::invalid(format!("sigma must lie in (0, 1), got {}", self.sigma)));
        }
        if !(self.rho_l > 1.0 && self.rho_l.is_finite()) {
            return Err(Error::invalid(format!("rho_L must exceed 1, got {}", self.rho_l)));
        }
        if !(self.mu_init > 0.0 && self.mu_init.is_finite()) {
            return Err(Error::invalid(format!("mu_init must be positive, got {}", self.mu_init)));
        }
        if !(self.l_init > 0.0 && self.l_init.is_finite()) {
            return Err(Error::invalid(format!("L_init must be positive, got {}", self.l_init)));
        }
        Ok(())
    }
}

/// One accepted step.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub iter: usize,
    pub objective: f64,
    pub gradmap_norm_scaled: f64,
    /// GPBB: the BB step `θ_k` before the `β` damping. GP/UPN: `1/L_k`.
    pub step_or_linv: f64,
    /// UPN only.
    pub mu_k: Option<f64>,
    /// GP and UPN.
    pub l_k: Option<f64>,
    /// Backtracking increases of `L` (GP/UPN) or `β` squarings (GPBB).
    pub line_search_count: usize,
    /// UPN momentum parameter `θ_{k+1}`. Kept in memory only, not written
    /// to history files.
    pub theta: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub x: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub history: Vec<ConvergenceRecord>,
    /// `ν` used by the final stopping test.
    pub nu: f64,
    /// Objective at the projected starting point.
    pub initial_objective: f64,
    pub final_objective: f64,
    pub final_gradmap_norm_scaled: f64,
    pub iterates: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Gp,
    Gpbb,
    Upn,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Gp, SolverKind::Gpbb, SolverKind::Upn];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Gp => "gp",
            SolverKind::Gpbb => "gpbb",
            SolverKind::Upn => "upn",
        }
    }

    pub fn solve<O: Objective + ?Sized>(
        self,
        obj: &O,
        x0: &[f64],
        opts: &SolverOptions,
    ) -> Result<SolverResult> {
        match self {
            SolverKind::Gp => gp_solve(obj, x0, opts),
            SolverKind::Gpbb => gpbb_solve(obj, x0, opts),
            SolverKind::Upn => upn_solve(obj, x0, opts),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gp" => Ok(SolverKind::Gp),
            "gpbb" => Ok(SolverKind::Gpbb),
            "upn" => Ok(SolverKind::Upn),
            other => Err(Error::invalid(format!(
                "unknown solver {other:?} (expected gp, gpbb or upn)"
            ))),
        }
    }
}

/// Bookkeeping shared by the three solvers.
pub(crate) struct Run<'a> {
    opts: &'a SolverOptions,
    history: Vec<ConvergenceRecord>,
    iterates: Vec<Vec<f64>>,
    iterations: usize,
    last_objective: f64,
}

impl<'a> Run<'a> {
    fn start<O: Objective + ?Sized>(obj: &O, x0: &[f64], opts: &'a SolverOptions) -> Result<(Self, Vec<f64>)> {
        opts.validate()?;
        if x0.len() != obj.len() {
            return Err(Error::mismatch(obj.len(), x0.len()));
        }
        let mut x = x0.to_vec();
        obj.project(&mut x);
        let mut run = Run {
            opts,
            history: Vec::new(),
            iterates: Vec::new(),
            iterations: 0,
            last_objective: f64::NAN,
        };
        if opts.keep_iterates {
            run.iterates.push(x.clone());
        }
        Ok((run, x))
    }

    fn abort(&self, reason: impl Into<String>) -> Error {
        Error::SolverAborted {
            iteration: self.iterations,
            objective: self.last_objective,
            reason: reason.into(),
        }
    }

    fn check_finite(&self, value: f64, grad: &[f64]) -> Result<()> {
        if !value.is_finite() || !crate::vecops::all_finite(grad) {
            return Err(self.abort(format!("non-finite objective or gradient (objective {value})")));
        }
        Ok(())
    }

    fn accept(&mut self, record: ConvergenceRecord, x: &[f64]) {
        self.iterations = record.iter;
        self.last_objective = record.objective;
        if self.opts.keep_iterates {
            self.iterates.push(x.to_vec());
        }
        if self.opts.record_history {
            self.history.push(record);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        self,
        x: Vec<f64>,
        converged: bool,
        nu: f64,
        initial_objective: f64,
        final_objective: f64,
        final_gradmap_norm_scaled: f64,
    ) -> SolverResult {
        SolverResult {
            x,
            converged,
            iterations: self.iterations,
            history: self.history,
            nu,
            initial_objective,
            final_objective,
            final_gradmap_norm_scaled,
            iterates: self.iterates,
        }
    }
}
