//! The alternating partial-functional scheme.
//!
//! For the system `u = N_u(u, v)`, `−v = N_v(u, v)` the scheme works with the
//! partial functionals
//!
//! ```text
//! E₁(u, v) = ½|u|²_A − N(u, v)     (minimized in u)
//! E₂(u, v) = −½|v|²_A − N(u, v)    (maximized in v)
//! ```
//!
//! Stage `k` computes `u_k` as an approximate minimizer of `E₁(·, v_{k−1})` and
//! then `v_k` as an approximate maximizer of `E₂(u_k, ·)`, each with gradient
//! residual at most `t_k`. Under the growth and monotony hypotheses the pair
//! converges to a critical point of `E(u, v) = ½|u|² − ½|v|² − N(u, v)`.

mod certificate;
mod inner;
mod system;
mod trace;

pub use certificate::{
    boundedness_check, contraction_certificate, energy_bounds_check, nash_check, BoundednessReport,
    ContractionReport, EnergyBoundsReport, NashReport,
};
pub use inner::{inner_maximize, inner_minimize, InnerOutcome};
pub use system::{CoupledSystem, GrowthParams};
pub use trace::{write_trace_csv, SolutionRecord, TRACE_HEADER};

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{norm_a, HVector};
use crate::zeromatrix::is_convergent_to_zero;

/// Residual tolerance schedule `k ↦ t_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `t_k = scale / k`.
    Harmonic { scale: f64 },
    /// `t_k = first · ratio^(k−1)`.
    Geometric { first: f64, ratio: f64 },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Harmonic { scale: 1.0 }
    }
}

impl Schedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            Schedule::Harmonic { scale } => scale / k as f64,
            Schedule::Geometric { first, ratio } => first * ratio.powi(k as i32 - 1),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Schedule::Harmonic { scale } => scale > 0.0 && scale.is_finite(),
            Schedule::Geometric { first, ratio } => {
                first > 0.0 && first.is_finite() && ratio > 0.0 && ratio < 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!("invalid schedule {self:?}")))
        }
    }
}

/// Controls for [`run_scheme`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    pub max_outer: usize,
    pub schedule: Schedule,
    pub inner_max_iters: usize,
    /// Damping of the inner gradient steps; `None` picks `0.9 / (1 + m_ii)`.
    pub inner_step: Option<f64>,
    pub final_tol: f64,
    /// Inner solves stop at `min(t_k, max(forcing·δ_k, final_tol/10))`, where
    /// `δ_k` is the coupled residual at the start of stage `k`.
    pub forcing: f64,
    pub seed: u64,
    /// Draw `v₀` at random (A-norm `init_scale`) instead of starting from zero.
    pub random_init: bool,
    pub init_scale: f64,
    /// Keep every iterate, as needed by [`contraction_certificate`].
    pub keep_history: bool,
    /// Run even when the monotony matrix is not convergent to zero.
    pub override_hypotheses: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            max_outer: 500,
            schedule: Schedule::default(),
            inner_max_iters: 5000,
            inner_step: None,
            final_tol: 1e-8,
            forcing: 0.1,
            seed: 0,
            random_init: false,
            init_scale: 1.0,
            keep_history: false,
            override_hypotheses: false,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.max_outer == 0 || self.inner_max_iters == 0 {
            return Err(Error::Input("iteration limits must be positive".into()));
        }
        if !(self.final_tol > 0.0) {
            return Err(Error::Input("final_tol must be positive".into()));
        }
        if let Some(s) = self.inner_step {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::Input(format!(
                    "inner_step must lie in (0, 1], got {s}"
                )));
            }
        }
        if !(self.forcing > 0.0 && self.forcing < 1.0) {
            return Err(Error::Input(format!(
                "forcing must lie in (0, 1), got {}",
                self.forcing
            )));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Input("init_scale must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One stage of the scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub k: usize,
    pub t_k: f64,
    /// Tolerance the inner solves actually used (never above `t_k`).
    pub inner_tol: f64,
    pub norm_u: f64,
    pub norm_v: f64,
    /// `|E₁₁(u_k, v_{k−1})|_A`.
    pub r1: f64,
    /// `|E₂₂(u_k, v_k)|_A`.
    pub r2: f64,
    /// `E₁(u_k, v_{k−1})`.
    pub e1: f64,
    /// `E₂(u_k, v_k)`.
    pub e2: f64,
    /// `E(u_k, v_k)`.
    pub e: f64,
    pub inner_iters_u: usize,
    pub inner_iters_v: usize,
    /// Smallest `E₁` and largest `E₂` evaluated during the stage.
    pub e1_min_seen: f64,
    pub e2_max_seen: f64,
}

/// Per-stage record of a run, plus the iterates when requested.
#[derive(Debug, Clone, Default)]
pub struct SchemeTrace {
    pub rows: Vec<StageRecord>,
    /// `(|u₀|_A, |v₀|_A)`.
    pub initial_norms: (f64, f64),
    /// `(u_k, v_k)` for `k = 0..=K` when `keep_history` is set.
    pub history: Option<Vec<(HVector, HVector)>>,
}

/// Final iterate of a run.
#[derive(Debug, Clone)]
pub struct SolutionPair {
    pub u_star: HVector,
    pub v_star: HVector,
    /// `(|E₁₁(u*, v*)|_A, |E₂₂(u*, v*)|_A)`.
    pub residuals: (f64, f64),
    pub converged: bool,
    pub stages: usize,
}

/// `E₁₁(u, v) = u − N_u(u, v)`.
pub fn residual_u(sys: &CoupledSystem, u: &HVector, v: &HVector) -> Result<HVector> {
    Ok(u.sub(&sys.eval_nu(u, v)?))
}

/// `E₂₂(u, v) = −v − N_v(u, v)`.
pub fn residual_v(sys: &CoupledSystem, u: &HVector, v: &HVector) -> Result<HVector> {
    Ok(v.neg().sub(&sys.eval_nv(u, v)?))
}

/// The three energies, each from its own definition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energies {
    pub e1: f64,
    pub e2: f64,
    pub e: f64,
}

pub fn energies(sys: &CoupledSystem, u: &HVector, v: &HVector) -> Result<Energies> {
    let n = sys.eval_n(u, v)?;
    let nu = norm_a(u, sys.space())?;
    let nv = norm_a(v, sys.space())?;
    Ok(Energies {
        e1: 0.5 * nu * nu - n,
        e2: -0.5 * nv * nv - n,
        e: 0.5 * nu * nu - 0.5 * nv * nv - n,
    })
}

/// `E₁(u, v)` alone.
pub fn e1_value(sys: &CoupledSystem, u: &HVector, v: &HVector) -> Result<f64> {
    let nu = norm_a(u, sys.space())?;
    Ok(0.5 * nu * nu - sys.eval_n(u, v)?)
}

/// `E₂(u, v)` alone.
pub fn e2_value(sys: &CoupledSystem, u: &HVector, v: &HVector) -> Result<f64> {
    let nv = norm_a(v, sys.space())?;
    Ok(-0.5 * nv * nv - sys.eval_n(u, v)?)
}

/// Random element with unit energy norm, drawn from a Gaussian.
pub fn random_unit_vector(sys: &CoupledSystem, rng: &mut ChaCha8Rng) -> Result<HVector> {
    let n = sys.dim();
    let coeffs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let d = sys.space().vector_from_slice(&coeffs)?;
    let len = norm_a(&d, sys.space())?;
    if len == 0.0 {
        return Err(Error::Numerical("drew a zero direction".into()));
    }
    Ok(d.scaled(1.0 / len))
}

/// Default damping for the inner solves.
pub(crate) fn default_steps(sys: &CoupledSystem, cfg: &SchemeConfig) -> (f64, f64) {
    match cfg.inner_step {
        Some(s) => (s, s),
        None => (
            0.9 / (1.0 + sys.monotony().get(0, 0)),
            0.9 / (1.0 + sys.monotony().get(1, 1)),
        ),
    }
}

/// Runs the alternating scheme until both partial residuals at the current
/// pair are below `final_tol`, or `max_outer` stages have been taken.
pub fn run_scheme(sys: &CoupledSystem, cfg: &SchemeConfig) -> Result<(SolutionPair, SchemeTrace)> {
    cfg.validate()?;
    let cert = is_convergent_to_zero(sys.monotony());
    if !cert.rho_ok {
        let msg = format!(
            "monotony matrix of '{}' has spectral radius {} (not convergent to zero)",
            sys.label(),
            cert.spectral_radius
        );
        if cfg.override_hypotheses {
            warn!("{msg}; continuing because the override is set");
        } else {
            return Err(Error::Hypothesis(msg));
        }
    }

    let space = sys.space();
    let mut u = space.zeros();
    let mut v = if cfg.random_init && cfg.init_scale > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        random_unit_vector(sys, &mut rng)?.scaled(cfg.init_scale)
    } else {
        space.zeros()
    };
    let (step_u, step_v) = default_steps(sys, cfg);

    let mut trace = SchemeTrace {
        rows: Vec::new(),
        initial_norms: (norm_a(&u, space)?, norm_a(&v, space)?),
        history: cfg.keep_history.then(|| vec![(u.clone(), v.clone())]),
    };

    let floor = 0.1 * cfg.final_tol;
    let mut coupled =
        norm_a(&residual_u(sys, &u, &v)?, space)?.max(norm_a(&residual_v(sys, &u, &v)?, space)?);
    let mut residuals = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;

    for k in 1..=cfg.max_outer {
        let t_k = cfg.schedule.at(k);
        let tol = t_k.min((cfg.forcing * coupled).max(floor));
        let stage = |e: Error| Error::Stage {
            stage: k,
            source: Box::new(e),
        };

        let out_u =
            inner::minimize_with(sys, &v, &u, tol, step_u, cfg.inner_max_iters).map_err(stage)?;
        let u_next = out_u.point;
        let r1 = out_u.residual;
        let e1 = out_u.value;

        let out_v = inner::maximize_with(sys, &u_next, &v, tol, step_v, cfg.inner_max_iters)
            .map_err(stage)?;
        let v_next = out_v.point;
        let r2 = out_v.residual;

        let en = energies(sys, &u_next, &v_next)?;
        let ru = norm_a(&residual_u(sys, &u_next, &v_next)?, space)?;
        trace.rows.push(StageRecord {
            k,
            t_k,
            inner_tol: tol,
            norm_u: norm_a(&u_next, space)?,
            norm_v: norm_a(&v_next, space)?,
            r1,
            r2,
            e1,
            e2: en.e2,
            e: en.e,
            inner_iters_u: out_u.iterations,
            inner_iters_v: out_v.iterations,
            e1_min_seen: out_u.extreme_value,
            e2_max_seen: out_v.extreme_value,
        });
        u = u_next;
        v = v_next;
        if let Some(h) = trace.history.as_mut() {
            h.push((u.clone(), v.clone()));
        }
        residuals = (ru, r2);
        coupled = ru.max(r2);
        if ru <= cfg.final_tol && r2 <= cfg.final_tol {
            converged = true;
            break;
        }
        if !coupled.is_finite() {
            break;
        }
    }

    let stages = trace.rows.len();
    Ok((
        SolutionPair {
            u_star: u,
            v_star: v,
            residuals,
            converged,
            stages,
        },
        trace,
    ))
}
