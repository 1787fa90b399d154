//! A-posteriori checks of a finished run against the estimates that drive the
//! convergence proof.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::norm_a;
use crate::zeromatrix::{verify_dominance, DominanceReport, MonotonyMatrix};

use super::{
    e1_value, e2_value, random_unit_vector, CoupledSystem, GrowthParams, SchemeTrace, SolutionPair,
};

/// Outcome of the stage-difference dominance check.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub gap: usize,
    /// `(|u_{k+p} − u_k|_A, |v_{k+p} − v_k|_A)` for `k = 0, 1, …`.
    pub differences: Vec<[f64; 2]>,
    /// Current-stage matrix `[[m11, 0], [m21, m22]]`, delayed `[[0, m12], [0, 0]]`.
    pub structural: Option<DominanceReport>,
    /// Same recursion with `m11` in every occupied position.
    pub literal: Option<DominanceReport>,
    /// Too few stages to form two consecutive differences.
    pub vacuous: bool,
    /// Geometric mean ratio of successive difference norms.
    pub observed_rate: Option<f64>,
}

impl ContractionReport {
    pub fn structural_holds(&self) -> bool {
        self.structural.as_ref().is_none_or(|r| r.holds)
    }

    pub fn literal_holds(&self) -> bool {
        self.literal.as_ref().is_none_or(|r| r.holds)
    }
}

/// Checks `x_k ≤ C x_k + D x_{k−1} + 2 t_k` componentwise along the stored
/// iterates, where `x_k` collects the energy norms of the `p`-step
/// differences. Requires a run with `keep_history`.
pub fn contraction_certificate(
    sys: &CoupledSystem,
    trace: &SchemeTrace,
    m: &MonotonyMatrix,
    gap: usize,
) -> Result<ContractionReport> {
    let history = trace
        .history
        .as_ref()
        .ok_or_else(|| Error::Input("contraction certificate needs the iterate history".into()))?;
    if gap == 0 {
        return Err(Error::Input("gap must be at least 1".into()));
    }
    if m.order() != 2 {
        return Err(Error::Input(
            "contraction certificate needs a 2x2 matrix".into(),
        ));
    }
    let space = sys.space();
    let mut differences = Vec::new();
    for k in 0..history.len().saturating_sub(gap) {
        let (u0, v0) = &history[k];
        let (u1, v1) = &history[k + gap];
        differences.push([norm_a(&u1.sub(u0), space)?, norm_a(&v1.sub(v0), space)?]);
    }
    let observed_rate = observed_rate(&differences);
    if differences.len() < 2 {
        return Ok(ContractionReport {
            gap,
            differences,
            structural: None,
            literal: None,
            vacuous: true,
            observed_rate,
        });
    }

    let (m11, m12, m21, m22) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    let x: Vec<Vec<f64>> = differences.iter().map(|d| d.to_vec()).collect();
    // inner solves leave linear-solver error on top of the recorded residuals
    let scale = x.iter().flatten().cloned().fold(1.0, f64::max);
    let slack = 100.0 * sys.cg_tol() * scale;
    let run = |current: [[f64; 2]; 2], delayed: MonotonyMatrix| -> Result<DominanceReport> {
        let y: Vec<Vec<f64>> = x
            .iter()
            .enumerate()
            .map(|(k, xk)| {
                let t = if k == 0 { 0.0 } else { trace.rows[k - 1].t_k };
                (0..2)
                    .map(|i| current[i][0] * xk[0] + current[i][1] * xk[1] + 2.0 * t)
                    .collect()
            })
            .collect();
        verify_dominance(&x, &y, &delayed, slack)
    };
    let structural = run(
        [[m11, 0.0], [m21, m22]],
        MonotonyMatrix::two_by_two(0.0, m12, 0.0, 0.0)?,
    )?;
    let literal = run(
        [[m11, 0.0], [m11, m11]],
        MonotonyMatrix::two_by_two(0.0, m11, 0.0, 0.0)?,
    )?;
    Ok(ContractionReport {
        gap,
        differences,
        structural: Some(structural),
        literal: Some(literal),
        vacuous: false,
        observed_rate,
    })
}

fn observed_rate(differences: &[[f64; 2]]) -> Option<f64> {
    let norms: Vec<f64> = differences
        .iter()
        .map(|d| d[0].max(d[1]))
        .filter(|n| *n > 0.0)
        .collect();
    if norms.len() < 2 {
        return None;
    }
    let steps = (norms.len() - 1) as f64;
    Some((norms[norms.len() - 1] / norms[0]).powf(1.0 / steps))
}

/// Local Nash-equilibrium test at a computed pair.
#[derive(Debug, Clone, Serialize)]
pub struct NashReport {
    pub n_samples: usize,
    pub radius: f64,
    /// Gradient tolerance used in the first-order bound.
    pub gradient_tol: f64,
    /// `min E₁(u* + s d, v*) − E₁(u*, v*)` over the samples.
    pub min_e1_change: f64,
    /// `max E₂(u*, v* + s d) − E₂(u*, v*)` over the samples.
    pub max_e2_change: f64,
    /// Curvature bound `L̂` from second differences along the sampled directions.
    pub curvature_bound: f64,
    pub min_e1_curvature: f64,
    pub max_e2_curvature: f64,
    /// `E₁` change `≥ −(tol·s + L̂s²)` and `E₂` change `≤ tol·s + L̂s²` everywhere.
    pub first_order_ok: bool,
    /// `E₁` is convex and `E₂` concave along every sampled direction.
    pub second_order_ok: bool,
}

impl NashReport {
    pub fn holds(&self) -> bool {
        self.first_order_ok
    }
}

/// Samples unit directions `d` and offsets `s ∈ (0, radius]` around `pair`.
pub fn nash_check(
    sys: &CoupledSystem,
    pair: &SolutionPair,
    n_samples: usize,
    radius: f64,
    seed: u64,
    final_tol: f64,
) -> Result<NashReport> {
    if n_samples == 0 || !(radius > 0.0) {
        return Err(Error::Input(
            "nash_check needs samples and a positive radius".into(),
        ));
    }
    let (u, v) = (&pair.u_star, &pair.v_star);
    let e1_0 = e1_value(sys, u, v)?;
    let e2_0 = e2_value(sys, u, v)?;
    let gradient_tol = final_tol.max(pair.residuals.0).max(pair.residuals.1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // (s, ΔE₁, ΔE₂, κ₁, κ₂) per sample
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let s = radius * (1.0 - rng.random::<f64>());
        let du = random_unit_vector(sys, &mut rng)?;
        let dv = random_unit_vector(sys, &mut rng)?;
        let plus1 = e1_value(sys, &u.lin_comb(1.0, &du, s), v)?;
        let minus1 = e1_value(sys, &u.lin_comb(1.0, &du, -s), v)?;
        let plus2 = e2_value(sys, u, &v.lin_comb(1.0, &dv, s))?;
        let minus2 = e2_value(sys, u, &v.lin_comb(1.0, &dv, -s))?;
        let k1 = (plus1 + minus1 - 2.0 * e1_0) / (s * s);
        let k2 = (plus2 + minus2 - 2.0 * e2_0) / (s * s);
        samples.push((s, plus1 - e1_0, plus2 - e2_0, k1, k2));
    }

    let min_e1_curvature = samples.iter().map(|x| x.3).fold(f64::INFINITY, f64::min);
    let max_e2_curvature = samples
        .iter()
        .map(|x| x.4)
        .fold(f64::NEG_INFINITY, f64::max);
    let curvature_bound = 0.5 * (-min_e1_curvature).max(max_e2_curvature).max(0.0);
    let round1 = 1e-12 * (1.0 + e1_0.abs());
    let round2 = 1e-12 * (1.0 + e2_0.abs());
    let first_order_ok = samples.iter().all(|&(s, d1, d2, _, _)| {
        let bound = gradient_tol * s + curvature_bound * s * s;
        d1 >= -bound - round1 && d2 <= bound + round2
    });
    let second_order_ok = samples.iter().all(|&(s, _, _, k1, k2)| {
        let round = 4.0 * (round1 + round2) / (s * s);
        k1 >= -round && k2 <= round
    });

    Ok(NashReport {
        n_samples,
        radius,
        gradient_tol,
        min_e1_change: samples.iter().map(|x| x.1).fold(f64::INFINITY, f64::min),
        max_e2_change: samples
            .iter()
            .map(|x| x.2)
            .fold(f64::NEG_INFINITY, f64::max),
        curvature_bound,
        min_e1_curvature,
        max_e2_curvature,
        first_order_ok,
        second_order_ok,
    })
}

/// Step-to-step bound `|u_k|² ≤ μ|u_{k−1}|² + C₃` along a trace.
#[derive(Debug, Clone, Serialize)]
pub struct BoundednessReport {
    pub mu: f64,
    pub mu_below_one: bool,
    /// `C₃` from the growth constants.
    pub c3_theoretical: f64,
    /// Smallest `C₃` compatible with the trace.
    pub c3_fitted: f64,
    pub holds_theoretical: bool,
    pub max_norm_u: f64,
    pub max_norm_v: f64,
}

pub fn boundedness_check(trace: &SchemeTrace, growth: &GrowthParams) -> Result<BoundednessReport> {
    growth.validate()?;
    let mu = growth.mu();
    let (a_up, a_lo, c) = (growth.alpha_upper, growth.alpha_lower, growth.c_growth);
    let c1 = (2.0 * c + 1.0) / (0.5 - a_up);
    let c2 = (2.0 * c + 1.0) / (0.5 - a_lo);
    let c3_theoretical = c1 + a_lo / (0.5 - a_up) * c2;

    let mut prev = trace.initial_norms.0;
    let mut c3_fitted = 0.0f64;
    for r in &trace.rows {
        c3_fitted = c3_fitted.max(r.norm_u * r.norm_u - mu * prev * prev);
        prev = r.norm_u;
    }
    let max_norm_u = trace
        .rows
        .iter()
        .map(|r| r.norm_u)
        .fold(trace.initial_norms.0, f64::max);
    let max_norm_v = trace
        .rows
        .iter()
        .map(|r| r.norm_v)
        .fold(trace.initial_norms.1, f64::max);
    Ok(BoundednessReport {
        mu,
        mu_below_one: mu < 1.0,
        c3_theoretical,
        c3_fitted,
        holds_theoretical: c3_fitted <= c3_theoretical * (1.0 + 1e-12),
        max_norm_u,
        max_norm_v,
    })
}

/// `E₁ ≥ −C` and `E₂ ≤ C` on every value the inner solvers evaluated.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyBoundsReport {
    pub c_growth: f64,
    pub e1_min: f64,
    pub e2_max: f64,
    pub holds: bool,
}

/// Slack for quadrature roundoff in the energy bounds.
pub const ENERGY_BOUND_SLACK: f64 = 1e-9;

pub fn energy_bounds_check(trace: &SchemeTrace, growth: &GrowthParams) -> EnergyBoundsReport {
    let e1_min = trace
        .rows
        .iter()
        .map(|r| r.e1_min_seen.min(r.e1))
        .fold(f64::INFINITY, f64::min);
    let e2_max = trace
        .rows
        .iter()
        .map(|r| r.e2_max_seen.max(r.e2))
        .fold(f64::NEG_INFINITY, f64::max);
    let c = growth.c_growth;
    EnergyBoundsReport {
        c_growth: c,
        e1_min,
        e2_max,
        holds: e1_min >= -c - ENERGY_BOUND_SLACK && e2_max <= c + ENERGY_BOUND_SLACK,
    }
}
