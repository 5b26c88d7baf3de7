use super::backtrack::{backtrack_from, estimate_mu_from};
use super::{ConvergenceRecord, Run, SolverOptions, SolverResult};
use crate::error::Result;
use crate::problem::{scaled_gradient_map_norm, Objective};

/// Positive root of `θ² = (1 − θ)·θ_k² + q·θ`.
pub fn next_theta(theta_k: f64, q: f64) -> f64 {
    // θ² + (θ_k² − q)θ − θ_k² = 0; pick the cancellation-free form.
    let b = theta_k * theta_k - q;
    let c = theta_k * theta_k;
    let disc = (b * b + 4.0 * c).sqrt();
    if b >= 0.0 {
        2.0 * c / (b + disc)
    } else {
        (disc - b) / 2.0
    }
}

/// Nesterov's method with `L` found by backtracking and `μ` estimated from
/// the curvature between `x_k` and `y_k`.
///
/// The first backtracking call maps `x⁰` to `x¹`, then `y¹ = x¹` and
/// `θ₁ = √(μ₀/L₀)`. Each iteration backtracks from `y_k` seeded with
/// `L_{k−1}`, updates `μ_k`, advances `θ`, and extrapolates
/// `y_{k+1} = x_{k+1} + β_k(x_{k+1} − x_k)`. Stopping is tested at the
/// `x` iterates with `ν = L_k`. There is no restart: a `θ` outside `(0, 1]`
/// aborts the run.
pub fn upn_solve<O: Objective + ?Sized>(obj: &O, x0: &[f64], opts: &SolverOptions) -> Result<SolverResult> {
    let (mut run, x_start) = Run::start(obj, x0, opts)?;
    let (f_start, g_start) = obj.value_and_gradient(&x_start);
    run.check_finite(f_start, &g_start)?;
    let initial = f_start;

    let gm0 = scaled_gradient_map_norm(obj, &x_start, &g_start, opts.l_init);
    if gm0 <= opts.eps {
        return Ok(run.finish(x_start, true, opts.l_init, initial, f_start, gm0));
    }

    let step = backtrack_from(obj, &x_start, f_start, &g_start, opts.l_init, opts.rho_l)
        .map_err(|r| run.abort(r))?;
    let mut l = step.lipschitz;
    let mut mu = opts.mu_init;
    let mut theta = (mu / l).sqrt();
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(run.abort(format!(
            "theta_1 = {theta} outside (0, 1]: mu_init = {mu} exceeds L_0 = {l}"
        )));
    }
    let mut x = step.x;
    let (mut fx, gx) = obj.value_and_gradient(&x);
    run.check_finite(fx, &gx)?;
    let mut gm = scaled_gradient_map_norm(obj, &x, &gx, l);
    run.accept(
        ConvergenceRecord {
            iter: 1,
            objective: fx,
            gradmap_norm_scaled: gm,
            step_or_linv: 1.0 / l,
            mu_k: Some(mu),
            l_k: Some(l),
            line_search_count: step.increases,
            theta: Some(theta),
        },
        &x,
    );
    if gm <= opts.eps {
        return Ok(run.finish(x, true, l, initial, fx, gm));
    }

    // y¹ = x¹, so the gradient just computed doubles as ∇f(y¹).
    let mut y = x.clone();
    let mut fy = fx;
    let mut gy = gx;

    for k in 2..=opts.max_iters {
        let step = backtrack_from(obj, &y, fy, &gy, l, opts.rho_l).map_err(|r| run.abort(r))?;
        l = step.lipschitz;
        mu = estimate_mu_from(&x, fx, &y, fy, &gy, mu);
        let theta_next = next_theta(theta, mu / l);
        if !(theta_next > 0.0 && theta_next <= 1.0) {
            return Err(run.abort(format!(
                "theta = {theta_next} outside (0, 1] (mu = {mu:e}, L = {l:e})"
            )));
        }
        let beta = theta * (1.0 - theta) / (theta * theta + theta_next);
        let x_next = step.x;
        let y_next: Vec<f64> = x_next
            .iter()
            .zip(&x)
            .map(|(xn, xo)| xn + beta * (xn - xo))
            .collect();

        let (f_next, g_next) = obj.value_and_gradient(&x_next);
        run.check_finite(f_next, &g_next)?;
        gm = scaled_gradient_map_norm(obj, &x_next, &g_next, l);
        run.accept(
            ConvergenceRecord {
                iter: k,
                objective: f_next,
                gradmap_norm_scaled: gm,
                step_or_linv: 1.0 / l,
                mu_k: Some(mu),
                l_k: Some(l),
                line_search_count: step.increases,
                theta: Some(theta_next),
            },
            &x_next,
        );
        x = x_next;
        fx = f_next;
        theta = theta_next;
        if gm <= opts.eps {
            return Ok(run.finish(x, true, l, initial, fx, gm));
        }

        (fy, gy) = obj.value_and_gradient(&y_next);
        run.check_finite(fy, &gy)?;
        y = y_next;
    }
    Ok(run.finish(x, false, l, initial, fx, gm))
}
