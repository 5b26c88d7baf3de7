use super::backtrack::backtrack_from;
use super::{ConvergenceRecord, Run, SolverOptions, SolverResult};
use crate::error::Result;
use crate::problem::{scaled_gradient_map_norm, Objective};

/// Gradient projection `x⁺ = P_Q(x − ∇f(x)/L_k)` with `L_k` from
/// backtracking seeded by the previous estimate. The stopping test uses
/// `ν = L_k`.
pub fn gp_solve<O: Objective + ?Sized>(obj: &O, x0: &[f64], opts: &SolverOptions) -> Result<SolverResult> {
    let (mut run, mut x) = Run::start(obj, x0, opts)?;
    let (mut fx, mut gx) = obj.value_and_gradient(&x);
    run.check_finite(fx, &gx)?;
    let initial = fx;
    let mut l = opts.l_init;

    let mut gm = scaled_gradient_map_norm(obj, &x, &gx, l);
    if gm <= opts.eps {
        return Ok(run.finish(x, true, l, initial, fx, gm));
    }

    for k in 1..=opts.max_iters {
        let step = backtrack_from(obj, &x, fx, &gx, l, opts.rho_l).map_err(|r| run.abort(r))?;
        l = step.lipschitz;
        x = step.x;
        (fx, gx) = obj.value_and_gradient(&x);
        run.check_finite(fx, &gx)?;
        gm = scaled_gradient_map_norm(obj, &x, &gx, l);
        run.accept(
            ConvergenceRecord {
                iter: k,
                objective: fx,
                gradmap_norm_scaled: gm,
                step_or_linv: 1.0 / l,
                mu_k: None,
                l_k: Some(l),
                line_search_count: step.increases,
                theta: None,
            },
            &x,
        );
        if gm <= opts.eps {
            return Ok(run.finish(x, true, l, initial, fx, gm));
        }
    }
    Ok(run.finish(x, false, l, initial, fx, gm))
}
