//! Sampling checks of the growth and monotony hypotheses, the boundedness
//! factor, and the mountain-pass comparison.
//!
//! All checks here are falsification tests on finite samples: a passing
//! report is evidence, never a proof.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::norm_a;
use crate::problems::NonlinearitySpec;
use crate::scheme::{random_unit_vector, CoupledSystem, GrowthParams};
use crate::zeromatrix::{is_convergent_to_zero, ConvergenceCertificate, MonotonyMatrix};

/// Where and how densely pointwise arguments `(x, y)` are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSpec {
    pub n_points: usize,
    pub box_radius: f64,
    pub seed: u64,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec {
            n_points: 2000,
            box_radius: 2.0,
            seed: 0,
        }
    }
}

impl SamplerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(Error::Input("n_points must be positive".into()));
        }
        if !(self.box_radius > 0.0 && self.box_radius.is_finite()) {
            return Err(Error::Input(format!(
                "box_radius must be positive, got {}",
                self.box_radius
            )));
        }
        if self.n_points < 100 {
            warn!("only {} sample points; verdicts are weak", self.n_points);
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    fn coord(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.box_radius * (2.0 * rng.random::<f64>() - 1.0)
    }
}

/// Pointwise growth check `−α̲y² − C ≤ F(x, y) ≤ ᾱx² + C`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub ok: bool,
    pub declared: GrowthParams,
    /// Smallest `C` that works on the sample with the declared exponents.
    pub c_hat: f64,
    /// Smallest exponents that work on the sample with the declared `C`
    /// (infinite when no exponent can absorb a violation at `x = 0` or `y = 0`).
    pub alpha_upper_hat: f64,
    pub alpha_lower_hat: f64,
    /// First sampled `(x, y, F(x, y))` violating the declared bounds.
    pub witness: Option<[f64; 3]>,
    pub n_points: usize,
}

fn growth_points(sampler: &SamplerSpec) -> Vec<(f64, f64)> {
    let r = sampler.box_radius;
    let mut pts = vec![
        (0.0, 0.0),
        (r, 0.0),
        (-r, 0.0),
        (0.0, r),
        (0.0, -r),
        (r, r),
        (r, -r),
        (-r, r),
        (-r, -r),
    ];
    let mut rng = sampler.rng();
    for _ in 0..sampler.n_points {
        let x = sampler.coord(&mut rng);
        let y = sampler.coord(&mut rng);
        pts.push((x, y));
    }
    pts
}

pub fn check_growth(
    f: &NonlinearitySpec,
    declared: &GrowthParams,
    sampler: &SamplerSpec,
) -> Result<GrowthCheck> {
    sampler.validate()?;
    let (au, al, c) = (
        declared.alpha_upper,
        declared.alpha_lower,
        declared.c_growth,
    );
    let pts = growth_points(sampler);
    let mut witness = None;
    let mut c_hat = 0.0f64;
    let mut au_hat = 0.0f64;
    let mut al_hat = 0.0f64;
    for &(x, y) in &pts {
        let v = f.value(x, y);
        let upper_excess = v - au * x * x;
        let lower_excess = -v - al * y * y;
        c_hat = c_hat.max(upper_excess).max(lower_excess);
        let slack = 1e-12 * (1.0 + v.abs());
        if (upper_excess > c + slack || lower_excess > c + slack) && witness.is_none() {
            witness = Some([x, y, v]);
        }
        au_hat = au_hat.max(exponent_needed(v - c, x * x, slack));
        al_hat = al_hat.max(exponent_needed(-v - c, y * y, slack));
    }
    Ok(GrowthCheck {
        ok: witness.is_none(),
        declared: *declared,
        c_hat,
        alpha_upper_hat: au_hat,
        alpha_lower_hat: al_hat,
        witness,
        n_points: pts.len(),
    })
}

fn exponent_needed(excess: f64, square: f64, slack: f64) -> f64 {
    if excess <= slack {
        0.0
    } else if square > 0.0 {
        excess / square
    } else {
        f64::INFINITY
    }
}

/// Sampled pointwise monotony constants of `F`:
/// `(F_x(p) − F_x(q))(x_p − x_q) ≤ m₁₁|Δx|² + m₁₂|Δx||Δy|` and
/// `(F_y(p) − F_y(q))(y_p − y_q) ≥ −m₂₂|Δy|² − m₂₁|Δx||Δy|`.
///
/// The diagonal entries are fitted first on pairs that differ in one
/// argument only, then the off-diagonal entries absorb what remains on
/// general pairs. The result is not scaled to any space.
pub fn estimate_monotony(f: &NonlinearitySpec, sampler: &SamplerSpec) -> Result<MonotonyMatrix> {
    sampler.validate()?;
    let mut rng = sampler.rng();
    let r = sampler.box_radius;
    let min_gap = 1e-3 * r;
    let draw_distinct = |rng: &mut ChaCha8Rng, a: f64| loop {
        let b = sampler.coord(rng);
        if (b - a).abs() >= min_gap {
            return b;
        }
    };

    let mut m11 = 0.0f64;
    let mut m22 = 0.0f64;
    for _ in 0..sampler.n_points {
        let (x, y) = (sampler.coord(&mut rng), sampler.coord(&mut rng));
        let xb = draw_distinct(&mut rng, x);
        let dx = x - xb;
        m11 = m11.max((f.grad(x, y).0 - f.grad(xb, y).0) * dx / (dx * dx));
        let yb = draw_distinct(&mut rng, y);
        let dy = y - yb;
        m22 = m22.max(-(f.grad(x, y).1 - f.grad(x, yb).1) * dy / (dy * dy));
    }

    let mut m12 = 0.0f64;
    let mut m21 = 0.0f64;
    for _ in 0..sampler.n_points {
        let (x, y) = (sampler.coord(&mut rng), sampler.coord(&mut rng));
        let xb = draw_distinct(&mut rng, x);
        let yb = draw_distinct(&mut rng, y);
        let (dx, dy) = (x - xb, y - yb);
        let (g, gb) = (f.grad(x, y), f.grad(xb, yb));
        let cross = dx.abs() * dy.abs();
        m12 = m12.max(((g.0 - gb.0) * dx - m11 * dx * dx) / cross);
        m21 = m21.max((-(g.1 - gb.1) * dy - m22 * dy * dy) / cross);
    }
    // fitting noise on exactly linear gradients
    let clean = |m: f64| if m < 1e-12 { 0.0 } else { m };
    MonotonyMatrix::two_by_two(clean(m11), clean(m12), clean(m21), clean(m22))
}

/// [`estimate_monotony`] scaled by the square of the system's embedding constant.
pub fn estimate_monotony_for(sys: &CoupledSystem, sampler: &SamplerSpec) -> Result<MonotonyMatrix> {
    let c = sys.embedding_constant();
    estimate_monotony(sys.potential(), sampler)?.scaled(c * c)
}

/// Boundedness factor `μ = ᾱα̲ / ((½ − ᾱ)(½ − α̲))`.
pub fn mu_of(alpha_upper: f64, alpha_lower: f64) -> Result<f64> {
    for a in [alpha_upper, alpha_lower] {
        if !(0.0..0.5).contains(&a) {
            return Err(Error::Domain(format!(
                "growth exponent {a} is outside [0, 1/2)"
            )));
        }
    }
    Ok(alpha_upper * alpha_lower / ((0.5 - alpha_upper) * (0.5 - alpha_lower)))
}

/// Sampling of the mountain-pass condition on the sphere `|u|_A + |v|_A = τ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MountainPassReport {
    pub tau: f64,
    pub n_samples: usize,
    /// Share of samples with `N(u, v) − N(0, 0) < (τ/2)(|u|_A − |v|_A)`.
    pub fraction: f64,
    /// `(|u|_A, |v|_A, N(u, v) − N(0, 0))` of the first failing sample.
    pub witness: Option<[f64; 3]>,
}

impl MountainPassReport {
    pub fn holds_on_sample(&self) -> bool {
        self.fraction == 1.0
    }
}

pub fn check_mountain_pass_i1(
    sys: &CoupledSystem,
    tau: f64,
    sampler: &SamplerSpec,
) -> Result<MountainPassReport> {
    sampler.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Input(format!("tau must be positive, got {tau}")));
    }
    let space = sys.space();
    let zero = space.zeros();
    let n0 = sys.eval_n(&zero, &zero)?;
    let mut rng = sampler.rng();
    let mut hits = 0usize;
    let mut witness = None;
    for _ in 0..sampler.n_points {
        let split: f64 = rng.random();
        let u = random_unit_vector(sys, &mut rng)?.scaled(split * tau);
        let v = random_unit_vector(sys, &mut rng)?.scaled((1.0 - split) * tau);
        let (nu, nv) = (norm_a(&u, space)?, norm_a(&v, space)?);
        let dn = sys.eval_n(&u, &v)? - n0;
        if dn < 0.5 * tau * (nu - nv) {
            hits += 1;
        } else if witness.is_none() {
            witness = Some([nu, nv, dn]);
        }
    }
    Ok(MountainPassReport {
        tau,
        n_samples: sampler.n_points,
        fraction: hits as f64 / sampler.n_points as f64,
        witness,
    })
}

/// Palais–Smale boundedness constants, in the printed and the structural form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsBeta {
    /// `1 − m₁₁ − m₁₁²/(1 − m₁₁)`.
    pub literal: f64,
    /// `1 − m₁₁ − m₁₂m₂₁/(1 − m₂₂)`.
    pub structural: f64,
}

pub fn ps_beta(m: &MonotonyMatrix) -> Result<PsBeta> {
    if m.order() != 2 {
        return Err(Error::Input("ps_beta needs a 2x2 matrix".into()));
    }
    let cert = is_convergent_to_zero(m);
    if !cert.rho_ok {
        return Err(Error::Domain(format!(
            "matrix has spectral radius {} (not convergent to zero)",
            cert.spectral_radius
        )));
    }
    let (m11, m12, m21, m22) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    let beta = PsBeta {
        literal: 1.0 - m11 - m11 * m11 / (1.0 - m11),
        structural: 1.0 - m11 - m12 * m21 / (1.0 - m22),
    };
    if !(beta.structural > 0.0) {
        return Err(Error::Integrity(format!(
            "structural beta {} is not positive for a convergent matrix",
            beta.structural
        )));
    }
    Ok(beta)
}

/// Aggregate verdict on whether the scheme's hypotheses hold for a system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub label: String,
    pub ready: bool,
    pub embedding_constant: f64,
    /// Pointwise growth check; `None` when no growth constants are available.
    pub growth: Option<GrowthCheck>,
    /// Declared growth carried over to the energy norm.
    pub abstract_growth: Option<GrowthParams>,
    pub abstract_growth_ok: bool,
    /// Sampled pointwise monotony constants; `None` when sampling is switched off.
    pub pointwise_estimate: Option<MonotonyMatrix>,
    /// The same, scaled to the energy norm.
    pub monotony_estimate: Option<MonotonyMatrix>,
    /// Energy-norm matrix the scheme runs with.
    pub declared_monotony: MonotonyMatrix,
    /// The sample did not falsify the declared matrix.
    pub estimate_within_declared: bool,
    pub matrix_ok: ConvergenceCertificate,
    pub mu: Option<f64>,
    pub notes: Vec<String>,
}

/// Which sampled checks [`full_report_with`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportToggles {
    pub growth: bool,
    pub monotony: bool,
}

impl Default for ReportToggles {
    fn default() -> Self {
        ReportToggles {
            growth: true,
            monotony: true,
        }
    }
}

/// Combines the growth check, monotony estimate and matrix certificate.
/// `declared` is the pointwise growth triple; when absent the potential's
/// closed-form constants are used, if any.
pub fn full_report(
    sys: &CoupledSystem,
    declared: Option<&GrowthParams>,
    sampler: &SamplerSpec,
) -> Result<HypothesisReport> {
    full_report_with(sys, declared, sampler, ReportToggles::default())
}

/// [`full_report`] with individual sampled checks switched off. A skipped
/// check is recorded in the notes and does not block readiness.
pub fn full_report_with(
    sys: &CoupledSystem,
    declared: Option<&GrowthParams>,
    sampler: &SamplerSpec,
    toggles: ReportToggles,
) -> Result<HypothesisReport> {
    sampler.validate()?;
    let c = sys.embedding_constant();
    let volume = sys.space().mass_weights().sum();
    let mut notes = vec![
        "sampling checks can falsify the hypotheses but cannot prove them".to_string(),
        "growth is checked with the upper bound in the first argument and the lower bound \
         in the second; the two places the source states this bound disagree on the roles"
            .to_string(),
    ];
    let pointwise_growth = declared
        .copied()
        .or_else(|| sys.potential().declared_growth());
    let growth = match &pointwise_growth {
        Some(g) if toggles.growth => Some(check_growth(sys.potential(), g, sampler)?),
        Some(_) => {
            notes.push("growth sampling switched off".into());
            None
        }
        None => {
            notes.push("no growth constants declared; growth not checked".into());
            None
        }
    };
    let abstract_growth = pointwise_growth.map(|g| GrowthParams {
        alpha_upper: g.alpha_upper * c * c,
        alpha_lower: g.alpha_lower * c * c,
        c_growth: g.c_growth * volume,
    });
    let abstract_growth_ok = match &abstract_growth {
        Some(g) => match g.validate() {
            Ok(()) => true,
            Err(e) => {
                notes.push(format!("growth constants in the energy norm: {e}"));
                false
            }
        },
        None => true,
    };
    if sys.sources().is_some() {
        notes.push("body forces are present; growth bounds refer to the potential only".into());
    }
    let mu = abstract_growth
        .as_ref()
        .filter(|_| abstract_growth_ok)
        .map(|g| mu_of(g.alpha_upper, g.alpha_lower))
        .transpose()?;

    let declared_monotony = sys.monotony().clone();
    let (pointwise_estimate, monotony_estimate) = if toggles.monotony {
        let p = estimate_monotony(sys.potential(), sampler)?;
        let scaled = p.scaled(c * c)?;
        (Some(p), Some(scaled))
    } else {
        notes.push("monotony sampling switched off".into());
        (None, None)
    };
    let estimate_within_declared = monotony_estimate
        .as_ref()
        .is_none_or(|m| m.dominated_by(&declared_monotony, 1e-9));
    if !estimate_within_declared {
        notes.push("sampled monotony constants exceed the declared matrix".into());
    }
    let matrix_ok = is_convergent_to_zero(&declared_monotony);
    let growth_ok = growth.as_ref().is_none_or(|g| g.ok);
    let ready = growth_ok && abstract_growth_ok && estimate_within_declared && matrix_ok.rho_ok;
    Ok(HypothesisReport {
        label: sys.label().to_string(),
        ready,
        embedding_constant: c,
        growth,
        abstract_growth,
        abstract_growth_ok,
        pointwise_estimate,
        monotony_estimate,
        declared_monotony,
        estimate_within_declared,
        matrix_ok,
        mu,
        notes,
    })
}

#[cfg(test)]
mod tests;
