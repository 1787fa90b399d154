//! Constructive replacements for the two Ekeland steps.
//!
//! Each solver is a damped gradient iteration in the energy product, with
//! backtracking so that the partial functional never moves the wrong way.
//! It stops once the gradient residual is below the requested tolerance.

use crate::error::{Error, Result};
use crate::hilbert::{norm_a, HVector};

use super::{
    default_steps, e1_value, e2_value, residual_u, residual_v, CoupledSystem, SchemeConfig,
};

/// Relative slack granted to energy comparisons, so that steps whose true
/// change is below rounding level are not rejected.
pub(crate) const ENERGY_ROUNDOFF: f64 = 1e-14;

const MIN_STEP: f64 = 1e-12;

/// Result of an inner solve.
#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub point: HVector,
    pub iterations: usize,
    /// Energy-norm gradient residual at `point`.
    pub residual: f64,
    /// Partial functional at the starting point.
    pub start_value: f64,
    /// Partial functional at `point`.
    pub value: f64,
    /// Smallest (minimization) or largest (maximization) value evaluated.
    pub extreme_value: f64,
    /// Value after every accepted step, starting with `start_value`.
    pub accepted_values: Vec<f64>,
}

/// Approximate minimizer of `E₁(·, v_fixed)` with `|E₁₁|_A ≤ tol` and
/// `E₁(u) ≤ E₁(u_init)`, by `u ← (1 − s)u + s N_u(u, v)`.
pub fn inner_minimize(
    sys: &CoupledSystem,
    v_fixed: &HVector,
    u_init: &HVector,
    tol: f64,
    cfg: &SchemeConfig,
) -> Result<InnerOutcome> {
    let (step, _) = default_steps(sys, cfg);
    minimize_with(sys, v_fixed, u_init, tol, step, cfg.inner_max_iters)
}

/// Approximate maximizer of `E₂(u_fixed, ·)` with `|E₂₂|_A ≤ tol` and
/// `E₂(v) ≥ E₂(v_init)`, by `v ← (1 − s)v − s N_v(u, v)`.
pub fn inner_maximize(
    sys: &CoupledSystem,
    u_fixed: &HVector,
    v_init: &HVector,
    tol: f64,
    cfg: &SchemeConfig,
) -> Result<InnerOutcome> {
    let (_, step) = default_steps(sys, cfg);
    maximize_with(sys, u_fixed, v_init, tol, step, cfg.inner_max_iters)
}

pub(crate) fn minimize_with(
    sys: &CoupledSystem,
    v_fixed: &HVector,
    u_init: &HVector,
    tol: f64,
    step: f64,
    max_iters: usize,
) -> Result<InnerOutcome> {
    descend(
        sys,
        u_init,
        tol,
        step,
        max_iters,
        "inner minimization",
        |x| e1_value(sys, x, v_fixed),
        |x| residual_u(sys, x, v_fixed),
    )
}

pub(crate) fn maximize_with(
    sys: &CoupledSystem,
    u_fixed: &HVector,
    v_init: &HVector,
    tol: f64,
    step: f64,
    max_iters: usize,
) -> Result<InnerOutcome> {
    // ascent on E₂ is descent on −E₂, whose gradient is −E₂₂
    let mut out = descend(
        sys,
        v_init,
        tol,
        step,
        max_iters,
        "inner maximization",
        |x| e2_value(sys, u_fixed, x).map(|e| -e),
        |x| residual_v(sys, u_fixed, x).map(|r| r.neg()),
    )?;
    out.start_value = -out.start_value;
    out.value = -out.value;
    out.extreme_value = -out.extreme_value;
    out.accepted_values.iter_mut().for_each(|e| *e = -*e);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    sys: &CoupledSystem,
    init: &HVector,
    tol: f64,
    step: f64,
    max_iters: usize,
    method: &'static str,
    value: impl Fn(&HVector) -> Result<f64>,
    gradient: impl Fn(&HVector) -> Result<HVector>,
) -> Result<InnerOutcome> {
    if !(tol > 0.0) {
        return Err(Error::Input(format!(
            "inner tolerance must be positive, got {tol}"
        )));
    }
    let space = sys.space();
    let mut x = init.clone();
    let mut fx = value(&x)?;
    let start_value = fx;
    let mut lowest = fx;
    let mut accepted = vec![fx];
    let mut residual = f64::INFINITY;
    for it in 0..=max_iters {
        let g = gradient(&x)?;
        residual = norm_a(&g, space)?;
        if residual <= tol {
            return Ok(InnerOutcome {
                point: x,
                iterations: it,
                residual,
                start_value,
                value: fx,
                extreme_value: lowest,
                accepted_values: accepted,
            });
        }
        if it == max_iters || !residual.is_finite() {
            break;
        }
        let mut s = step;
        loop {
            let cand = x.lin_comb(1.0, &g, -s);
            let fc = value(&cand)?;
            lowest = lowest.min(fc);
            if fc <= fx + ENERGY_ROUNDOFF * fx.abs().max(1.0) {
                x = cand;
                fx = fc;
                accepted.push(fc);
                break;
            }
            s *= 0.5;
            if s < MIN_STEP {
                return Err(Error::NonConvergence {
                    method,
                    iterations: it,
                    residual,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        method,
        iterations: max_iters,
        residual,
    })
}
