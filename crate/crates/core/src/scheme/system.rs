use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{self, solve_a, DiscreteSpace, HVector, DEFAULT_CG_TOL};
use crate::problems::{Layout, NonlinearitySpec};
use crate::zeromatrix::MonotonyMatrix;

/// Growth constants `−α̲|v|² − C ≤ N(u, v) ≤ ᾱ|u|² + C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    pub alpha_upper: f64,
    pub alpha_lower: f64,
    pub c_growth: f64,
}

impl GrowthParams {
    pub fn new(alpha_upper: f64, alpha_lower: f64, c_growth: f64) -> Result<Self> {
        let p = GrowthParams {
            alpha_upper,
            alpha_lower,
            c_growth,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha_upper, self.alpha_lower, self.c_growth];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Input(format!(
                "growth constants must be finite and nonnegative: {self:?}"
            )));
        }
        if self.alpha_upper >= 0.5 || self.alpha_lower >= 0.5 {
            return Err(Error::Domain(format!(
                "growth exponents must lie in [0, 1/2): {self:?}"
            )));
        }
        if self.alpha_upper + self.alpha_lower >= 0.5 {
            return Err(Error::Domain(format!(
                "alpha_upper + alpha_lower must be below 1/2: {self:?}"
            )));
        }
        Ok(())
    }

    /// Contraction factor `ᾱα̲ / ((½ − ᾱ)(½ − α̲))` of the boundedness step.
    pub fn mu(&self) -> f64 {
        self.alpha_upper * self.alpha_lower / ((0.5 - self.alpha_upper) * (0.5 - self.alpha_lower))
    }
}

/// A complete problem: space, coupling potential, optional body forces and
/// the hypothesis constants measured in the energy norm.
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    label: String,
    space: DiscreteSpace,
    potential: NonlinearitySpec,
    sources: Option<(DVector<f64>, DVector<f64>)>,
    monotony: MonotonyMatrix,
    growth: Option<GrowthParams>,
    embedding: f64,
    cg_tol: f64,
    layout: Layout,
}

impl CoupledSystem {
    /// `monotony` and `growth` are the energy-norm constants of the coupling
    /// functional; `embedding` is the constant of `|Pu|_{L²} ≤ c|u|_A`.
    pub fn new(
        label: impl Into<String>,
        space: DiscreteSpace,
        potential: NonlinearitySpec,
        monotony: MonotonyMatrix,
        growth: Option<GrowthParams>,
        embedding: f64,
    ) -> Result<Self> {
        potential.validate()?;
        if monotony.order() != 2 {
            return Err(Error::Input(format!(
                "a coupled system needs a 2x2 monotony matrix, got order {}",
                monotony.order()
            )));
        }
        if let Some(g) = &growth {
            g.validate()?;
        }
        if !(embedding > 0.0 && embedding.is_finite()) {
            return Err(Error::Input(format!(
                "embedding constant must be positive, got {embedding}"
            )));
        }
        Ok(CoupledSystem {
            label: label.into(),
            space,
            potential,
            sources: None,
            monotony,
            growth,
            embedding,
            cg_tol: DEFAULT_CG_TOL,
            layout: Layout::Unstructured,
        })
    }

    /// Adds linear body-force terms `Σ w (s_u·Pu + s_v·Pv)` to `N`. The growth
    /// constants no longer cover the result and are dropped.
    pub fn with_sources(mut self, s_u: DVector<f64>, s_v: DVector<f64>) -> Result<Self> {
        let n = self.space.n_points();
        if s_u.len() != n || s_v.len() != n {
            return Err(Error::Input(format!(
                "source fields must have {n} points, got {} and {}",
                s_u.len(),
                s_v.len()
            )));
        }
        if s_u.iter().chain(s_v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Input("source fields must be finite".into()));
        }
        self.sources = Some((s_u, s_v));
        self.growth = None;
        Ok(self)
    }

    pub fn with_cg_tol(mut self, tol: f64) -> Self {
        self.cg_tol = tol;
        self
    }

    pub fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = layout;
        self
    }

    pub fn with_monotony(mut self, monotony: MonotonyMatrix) -> Result<Self> {
        if monotony.order() != 2 {
            return Err(Error::Input("monotony matrix must be 2x2".into()));
        }
        self.monotony = monotony;
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn space(&self) -> &DiscreteSpace {
        &self.space
    }

    pub fn potential(&self) -> &NonlinearitySpec {
        &self.potential
    }

    pub fn sources(&self) -> Option<&(DVector<f64>, DVector<f64>)> {
        self.sources.as_ref()
    }

    pub fn monotony(&self) -> &MonotonyMatrix {
        &self.monotony
    }

    pub fn growth(&self) -> Option<&GrowthParams> {
        self.growth.as_ref()
    }

    pub fn embedding_constant(&self) -> f64 {
        self.embedding
    }

    pub fn cg_tol(&self) -> f64 {
        self.cg_tol
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// `N(u, v) = Σ w F(Pu, Pv)` plus source terms.
    pub fn eval_n(&self, u: &HVector, v: &HVector) -> Result<f64> {
        self.space.check(u)?;
        self.space.check(v)?;
        let pu = self.space.field(u);
        let pv = self.space.field(v);
        let w = self.space.mass_weights();
        let mut total = 0.0;
        for j in 0..pu.len() {
            let mut f = self.potential.value(pu[j], pv[j]);
            if let Some((su, sv)) = &self.sources {
                f += su[j] * pu[j] + sv[j] * pv[j];
            }
            total += w[j] * f;
        }
        Ok(total)
    }

    /// Pointwise gradient fields `(F_x + s_u, F_y + s_v)` at `(Pu, Pv)`.
    pub fn pointwise_gradients(
        &self,
        u: &HVector,
        v: &HVector,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        self.space.check(u)?;
        self.space.check(v)?;
        let pu = self.space.field(u);
        let pv = self.space.field(v);
        let n = pu.len();
        let mut f1 = DVector::zeros(n);
        let mut f2 = DVector::zeros(n);
        for j in 0..n {
            let (gx, gy) = self.potential.grad(pu[j], pv[j]);
            f1[j] = gx;
            f2[j] = gy;
        }
        if let Some((su, sv)) = &self.sources {
            f1 += su;
            f2 += sv;
        }
        Ok((f1, f2))
    }

    /// Dual-space loads `(Pᵀ W f₁, Pᵀ W f₂)`; `N_u = A⁻¹ load_u`.
    pub fn loads(&self, u: &HVector, v: &HVector) -> Result<(DVector<f64>, DVector<f64>)> {
        let (f1, f2) = self.pointwise_gradients(u, v)?;
        let w = self.space.mass_weights();
        Ok((
            self.space.field_adjoint(&f1.component_mul(w)),
            self.space.field_adjoint(&f2.component_mul(w)),
        ))
    }

    /// `N_u(u, v)`, the energy-product gradient of `N` in `u`.
    pub fn eval_nu(&self, u: &HVector, v: &HVector) -> Result<HVector> {
        let (f1, _) = self.pointwise_gradients(u, v)?;
        hilbert::riesz_lift(&f1, &self.space, self.cg_tol)
    }

    /// `N_v(u, v)`.
    pub fn eval_nv(&self, u: &HVector, v: &HVector) -> Result<HVector> {
        let (_, f2) = self.pointwise_gradients(u, v)?;
        hilbert::riesz_lift(&f2, &self.space, self.cg_tol)
    }

    /// `A⁻¹ h` at the system's solver tolerance.
    pub fn solve(&self, h: &DVector<f64>) -> Result<HVector> {
        solve_a(h, &self.space, self.cg_tol)
    }
}
