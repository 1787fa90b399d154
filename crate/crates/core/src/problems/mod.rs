//! Concrete coupled systems: finite-difference Dirichlet problems and a
//! Stokes-type system in stream-function form.

mod nonlinearity;

pub use nonlinearity::{Monomial, NonlinearitySpec};

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    csr_from_triplets, csr_mul, embedding_constant, solve_a, DiscreteSpace, HVector, SpdOperator,
};
use crate::hypotheses::{estimate_monotony, SamplerSpec};
use crate::scheme::{CoupledSystem, GrowthParams};
use crate::zeromatrix::MonotonyMatrix;

/// Geometry of the degrees of freedom, used for export.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    Unstructured,
    /// Interior nodes `x_i = (i + 1) h`.
    Grid1d {
        n: usize,
        h: f64,
    },
    /// Interior nodes, `x` index fastest.
    Grid2d {
        nx: usize,
        ny: usize,
        hx: f64,
        hy: f64,
    },
    /// Stream function on interior nodes of a square-indexed grid.
    Stream {
        n: usize,
        hx: f64,
        hy: f64,
    },
}

/// `−Δu + c u` with homogeneous Dirichlet conditions on a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletSpec {
    pub dims: usize,
    pub n_per_dim: usize,
    pub lengths: Vec<f64>,
    #[serde(default)]
    pub potential_c: f64,
    pub nonlinearity: NonlinearitySpec,
}

impl DirichletSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims != 1 && self.dims != 2 {
            return Err(Error::Input(format!(
                "dims must be 1 or 2, got {}",
                self.dims
            )));
        }
        if self.n_per_dim < 3 {
            return Err(Error::Input(format!(
                "n_per_dim must be at least 3, got {}",
                self.n_per_dim
            )));
        }
        check_lengths(&self.lengths, self.dims)?;
        if !(self.potential_c >= 0.0 && self.potential_c.is_finite()) {
            return Err(Error::Input(format!(
                "potential_c must be finite and nonnegative, got {}",
                self.potential_c
            )));
        }
        self.nonlinearity.validate()
    }

    /// Mesh widths `L_d / (n + 1)`.
    pub fn steps(&self) -> Vec<f64> {
        self.lengths
            .iter()
            .map(|l| l / (self.n_per_dim + 1) as f64)
            .collect()
    }

    /// Smallest eigenvalue of the discrete operator relative to the lumped mass.
    pub fn theta(&self) -> f64 {
        self.potential_c
            + self
                .steps()
                .iter()
                .zip(&self.lengths)
                .map(|(h, l)| 4.0 / (h * h) * (PI * h / (2.0 * l)).sin().powi(2))
                .sum::<f64>()
    }
}

/// Stokes-type system for two divergence-free velocity fields on a rectangle,
/// each represented by a clamped stream function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StokesSpec {
    pub n_per_dim: usize,
    pub lengths: Vec<f64>,
    /// Zeroth-order coefficient of the velocity product.
    pub mu_coeff: f64,
    pub nonlinearity: NonlinearitySpec,
    /// Add body forces whose exact discrete solution is [`stokes_manufactured_psi`].
    #[serde(default)]
    pub manufactured: bool,
}

impl StokesSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_dim < 5 {
            return Err(Error::Input(format!(
                "n_per_dim must be at least 5, got {}",
                self.n_per_dim
            )));
        }
        check_lengths(&self.lengths, 2)?;
        if !(self.mu_coeff > 0.0 && self.mu_coeff.is_finite()) {
            return Err(Error::Input(format!(
                "mu_coeff must be positive, got {}",
                self.mu_coeff
            )));
        }
        self.nonlinearity.validate()
    }

    pub fn steps(&self) -> (f64, f64) {
        let m = (self.n_per_dim + 1) as f64;
        (self.lengths[0] / m, self.lengths[1] / m)
    }

    pub fn dim(&self) -> usize {
        self.n_per_dim * self.n_per_dim
    }
}

fn check_lengths(lengths: &[f64], dims: usize) -> Result<()> {
    if lengths.len() != dims {
        return Err(Error::Input(format!(
            "expected {dims} side lengths, got {}",
            lengths.len()
        )));
    }
    if lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::Input(format!(
            "side lengths must be positive: {lengths:?}"
        )));
    }
    Ok(())
}

/// Negative Dirichlet Laplacian `−L_h` on an `nx × ny` interior grid (`ny = 1`
/// for one dimension), `x` index fastest.
fn neg_laplacian(nx: usize, ny: usize, hx: f64, hy: Option<f64>) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::new();
    let idx = |i: usize, j: usize| j * nx + i;
    for j in 0..ny {
        for i in 0..nx {
            let p = idx(i, j);
            let cx = 1.0 / (hx * hx);
            t.push((p, p, 2.0 * cx));
            if i > 0 {
                t.push((p, idx(i - 1, j), -cx));
            }
            if i + 1 < nx {
                t.push((p, idx(i + 1, j), -cx));
            }
            if let Some(hy) = hy {
                let cy = 1.0 / (hy * hy);
                t.push((p, p, 2.0 * cy));
                if j > 0 {
                    t.push((p, idx(i, j - 1), -cy));
                }
                if j + 1 < ny {
                    t.push((p, idx(i, j + 1), -cy));
                }
            }
        }
    }
    t
}

/// Energy-norm constants of a potential on a space with embedding constant
/// `c` and total quadrature weight `volume`. Growth is dropped when the scaled
/// exponents are no longer admissible.
fn abstract_constants(
    nonlinearity: &NonlinearitySpec,
    c_sq: f64,
    volume: f64,
) -> Result<(MonotonyMatrix, Option<GrowthParams>)> {
    let pointwise = match nonlinearity.declared_monotony() {
        Some(m) => m,
        None => estimate_monotony(nonlinearity, &SamplerSpec::default())?,
    };
    let growth = nonlinearity.declared_growth().and_then(|g| {
        GrowthParams::new(
            g.alpha_upper * c_sq,
            g.alpha_lower * c_sq,
            g.c_growth * volume,
        )
        .ok()
    });
    Ok((pointwise.scaled(c_sq)?, growth))
}

/// Pointwise monotony and growth constants carried over to the energy norm of
/// a space with embedding constant `c` and total quadrature weight `volume`.
pub fn scale_constants(
    pointwise_monotony: &MonotonyMatrix,
    pointwise_growth: Option<&GrowthParams>,
    c: f64,
    volume: f64,
) -> Result<(MonotonyMatrix, Option<GrowthParams>)> {
    let monotony = pointwise_monotony.scaled(c * c)?;
    let growth = match pointwise_growth {
        Some(g) => Some(GrowthParams::new(
            g.alpha_upper * c * c,
            g.alpha_lower * c * c,
            g.c_growth * volume,
        )?),
        None => None,
    };
    Ok((monotony, growth))
}

/// Finite-difference Dirichlet system: `A = h^d(−Δ_h + c)`, weights `h^d`.
pub fn build_dirichlet(spec: &DirichletSpec) -> Result<CoupledSystem> {
    spec.validate()?;
    let n = spec.n_per_dim;
    let steps = spec.steps();
    let cell: f64 = steps.iter().product();
    let (ny, hy) = if spec.dims == 2 {
        (n, Some(steps[1]))
    } else {
        (1, None)
    };
    let dim = n * ny;
    let triplets = neg_laplacian(n, ny, steps[0], hy)
        .into_iter()
        .map(|(i, j, a)| (i, j, cell * a))
        .chain((0..dim).map(|i| (i, i, cell * spec.potential_c)));
    let op = SpdOperator::from_triplets(dim, triplets, spec.theta())?;
    let space = DiscreteSpace::new(op, DVector::from_element(dim, cell))?;
    let c = embedding_constant(&space)?;
    let (monotony, growth) =
        abstract_constants(&spec.nonlinearity, c * c, space.mass_weights().sum())?;
    let layout = if spec.dims == 1 {
        Layout::Grid1d { n, h: steps[0] }
    } else {
        Layout::Grid2d {
            nx: n,
            ny: n,
            hx: steps[0],
            hy: steps[1],
        }
    };
    let label = format!("dirichlet-{}d-{}", spec.dims, n);
    Ok(
        CoupledSystem::new(label, space, spec.nonlinearity.clone(), monotony, growth, c)?
            .with_layout(layout),
    )
}

/// One degree of freedom with `A = a` and quadrature weight `weight`.
pub fn build_single_dof(
    a: f64,
    weight: f64,
    nonlinearity: NonlinearitySpec,
) -> Result<CoupledSystem> {
    if !(a > 0.0 && a.is_finite() && weight > 0.0 && weight.is_finite()) {
        return Err(Error::Input(format!(
            "single-DOF system needs positive a and weight, got {a} and {weight}"
        )));
    }
    nonlinearity.validate()?;
    let op = SpdOperator::from_triplets(1, [(0, 0, a)], a / weight)?;
    let space = DiscreteSpace::new(op, DVector::from_element(1, weight))?;
    let c = (weight / a).sqrt();
    let (monotony, growth) = abstract_constants(&nonlinearity, weight / a, weight)?;
    CoupledSystem::new("single-dof", space, nonlinearity, monotony, growth, c)
}

/// Index maps of the staggered velocity samples. `U = ∂ψ/∂y` lives on the
/// vertical edges `(i, j + ½)` with `i ∈ 1..=n`, `j ∈ 0..=n`; `V = −∂ψ/∂x` on
/// `(i + ½, j)` with `i ∈ 0..=n`, `j ∈ 1..=n`. Boundary nodes carry `ψ = 0`.
struct Staggered {
    n: usize,
}

impl Staggered {
    fn n_u(&self) -> usize {
        self.n * (self.n + 1)
    }

    fn u_index(&self, i: usize, j: usize) -> usize {
        (i - 1) * (self.n + 1) + j
    }

    fn v_index(&self, i: usize, j: usize) -> usize {
        self.n_u() + (j - 1) * (self.n + 1) + i
    }

    /// Index of interior node `(i, j)` (1-based) or `None` on the boundary.
    fn node(&self, i: usize, j: usize) -> Option<usize> {
        (1..=self.n)
            .contains(&i)
            .then_some(())
            .filter(|_| (1..=self.n).contains(&j))
            .map(|_| (j - 1) * self.n + (i - 1))
    }

    /// Discrete curl `ψ ↦ (U, V)` as a sparse matrix.
    fn curl(&self, hx: f64, hy: f64) -> Result<CsrMatrix<f64>> {
        let n = self.n;
        let mut t = Vec::new();
        for i in 1..=n {
            for j in 0..=n {
                let row = self.u_index(i, j);
                if let Some(p) = self.node(i, j + 1) {
                    t.push((row, p, 1.0 / hy));
                }
                if let Some(p) = self.node(i, j) {
                    t.push((row, p, -1.0 / hy));
                }
            }
        }
        for j in 1..=n {
            for i in 0..=n {
                let row = self.v_index(i, j);
                if let Some(p) = self.node(i + 1, j) {
                    t.push((row, p, -1.0 / hx));
                }
                if let Some(p) = self.node(i, j) {
                    t.push((row, p, 1.0 / hx));
                }
            }
        }
        csr_from_triplets(2 * self.n_u(), n * n, t)
    }
}

/// Stream-function operator `hx·hy (B + μ(−L_h))`, where `B` is the 13-point
/// biharmonic with the reflected-ghost clamped closure.
fn stokes_operator(spec: &StokesSpec) -> Result<CsrMatrix<f64>> {
    let n = spec.n_per_dim;
    let (hx, hy) = spec.steps();
    let neg_l = csr_from_triplets(n * n, n * n, neg_laplacian(n, n, hx, Some(hy)))?;
    let l2 = &neg_l * &neg_l;
    let cell = hx * hy;
    let mut t: Vec<(usize, usize, f64)> = Vec::new();
    for (i, row) in l2.row_iter().enumerate() {
        for (&j, &a) in row.col_indices().iter().zip(row.values()) {
            t.push((i, j, cell * a));
        }
    }
    for (i, row) in neg_l.row_iter().enumerate() {
        for (&j, &a) in row.col_indices().iter().zip(row.values()) {
            t.push((i, j, cell * spec.mu_coeff * a));
        }
    }
    // the ghost value ψ₋₁ = ψ₁ adds 2/h⁴ for every wall a node is adjacent to
    for jj in 0..n {
        for ii in 0..n {
            let p = jj * n + ii;
            let walls_x = (ii == 0) as usize + (ii + 1 == n) as usize;
            let walls_y = (jj == 0) as usize + (jj + 1 == n) as usize;
            let extra = 2.0 * walls_x as f64 / hx.powi(4) + 2.0 * walls_y as f64 / hy.powi(4);
            if extra > 0.0 {
                t.push((p, p, cell * extra));
            }
        }
    }
    csr_from_triplets(n * n, n * n, t)
}

/// Stokes-type system on stream functions `ψ₁, ψ₂`; the potential acts on
/// each staggered velocity sample of the pair `(curl ψ₁, curl ψ₂)`.
pub fn build_stokes(spec: &StokesSpec) -> Result<CoupledSystem> {
    spec.validate()?;
    let n = spec.n_per_dim;
    let (hx, hy) = spec.steps();
    let stag = Staggered { n };
    let curl = stag.curl(hx, hy)?;
    let weights = DVector::from_element(curl.nrows(), hx * hy);
    // provisional θ; replaced below by the computed sharp value
    let op = SpdOperator::new(stokes_operator(spec)?, 1.0)?;
    let mut space = DiscreteSpace::with_field_map(op, weights, curl)?;
    let c = embedding_constant(&space)?;
    space.replace_theta(1.0 / (c * c));
    let (monotony, growth) =
        abstract_constants(&spec.nonlinearity, c * c, space.mass_weights().sum())?;
    let layout = Layout::Stream { n, hx, hy };
    let mut sys = CoupledSystem::new(
        format!("stokes-{n}"),
        space,
        spec.nonlinearity.clone(),
        monotony,
        growth,
        c,
    )?
    .with_layout(layout);
    if spec.manufactured {
        let (pu, pv) = stokes_manufactured_psi(spec);
        let psi_u = sys.space().vector(pu)?;
        let psi_v = sys.space().vector(pv)?;
        let (su, sv) = manufactured_sources(&sys, &psi_u, &psi_v)?;
        sys = sys.with_sources(su, sv)?;
    }
    Ok(sys)
}

/// Discrete `sin²(πx/L_x) sin²(πy/L_y)` and `−½` of it, the exact stream
/// functions of the manufactured Stokes problem.
pub fn stokes_manufactured_psi(spec: &StokesSpec) -> (DVector<f64>, DVector<f64>) {
    let n = spec.n_per_dim;
    let (hx, hy) = spec.steps();
    let (lx, ly) = (spec.lengths[0], spec.lengths[1]);
    let pattern = DVector::from_fn(n * n, |p, _| {
        let (i, j) = ((p % n + 1) as f64, (p / n + 1) as f64);
        (PI * i * hx / lx).sin().powi(2) * (PI * j * hy / ly).sin().powi(2)
    });
    let other = &pattern * -0.5;
    (pattern, other)
}

/// Body forces `(s_u, s_v)` that make `(u, v)` an exact solution of `sys`
/// with its current potential: `s = P z` with `PᵀWP z` equal to the defect of
/// the fixed-point equations.
pub fn manufactured_sources(
    sys: &CoupledSystem,
    u: &HVector,
    v: &HVector,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let space = sys.space();
    space.check(u)?;
    space.check(v)?;
    let bare = CoupledSystem::new(
        "bare",
        space.clone(),
        sys.potential().clone(),
        sys.monotony().clone(),
        None,
        sys.embedding_constant(),
    )?;
    let (lu, lv) = bare.loads(u, v)?;
    let au = space.operator().apply(u.coeffs());
    let av = space.operator().apply(v.coeffs());
    // u = A⁻¹(l_u + Pᵀ W s_u) and −v = A⁻¹(l_v + Pᵀ W s_v)
    let defect_u = au - lu;
    let defect_v = -av - lv;
    let gram = gram_operator(space)?;
    let gram_space = DiscreteSpace::new(gram, DVector::from_element(space.dim(), 1.0))?;
    let zu = solve_a(&defect_u, &gram_space, 1e-13)?;
    let zv = solve_a(&defect_v, &gram_space, 1e-13)?;
    let to_points = |z: &HVector| match space.field_map() {
        Some(p) => csr_mul(p, z.coeffs()),
        None => z.coeffs().clone(),
    };
    Ok((to_points(&zu), to_points(&zv)))
}

/// `PᵀWP` as an operator on coefficients.
fn gram_operator(space: &DiscreteSpace) -> Result<SpdOperator> {
    let w = space.mass_weights();
    let m = match space.field_map() {
        Some(p) => {
            let pt = p.transpose();
            let mut wp = p.clone();
            for (i, mut row) in wp.row_iter_mut().enumerate() {
                row.values_mut().iter_mut().for_each(|a| *a *= w[i]);
            }
            &pt * &wp
        }
        None => csr_from_triplets(
            w.len(),
            w.len(),
            w.iter().enumerate().map(|(i, &x)| (i, i, x)),
        )?,
    };
    SpdOperator::new(m, 1.0)
}

/// Staggered velocity of a stream function, boundary samples included:
/// `u[(i, j)]` for `i ∈ 0..=n+1, j ∈ 0..=n` and `v[(i, j)]` for `i ∈ 0..=n,
/// j ∈ 0..=n+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredVelocity {
    pub n: usize,
    pub hx: f64,
    pub hy: f64,
    pub u: nalgebra::DMatrix<f64>,
    pub v: nalgebra::DMatrix<f64>,
}

impl StaggeredVelocity {
    /// Cell-centred divergence on all `(n + 1)²` cells.
    pub fn divergence(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n;
        nalgebra::DMatrix::from_fn(n + 1, n + 1, |i, j| {
            (self.u[(i + 1, j)] - self.u[(i, j)]) / self.hx
                + (self.v[(i, j + 1)] - self.v[(i, j)]) / self.hy
        })
    }

    pub fn max_abs_divergence(&self) -> f64 {
        self.divergence().iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// `(∂ψ/∂y, −∂ψ/∂x)` on the staggered grid.
pub fn reconstruct_velocity(psi: &[f64], spec: &StokesSpec) -> Result<StaggeredVelocity> {
    let n = spec.n_per_dim;
    if psi.len() != n * n {
        return Err(Error::Input(format!(
            "stream function has {} values, expected {}",
            psi.len(),
            n * n
        )));
    }
    let (hx, hy) = spec.steps();
    let at = |i: usize, j: usize| {
        if (1..=n).contains(&i) && (1..=n).contains(&j) {
            psi[(j - 1) * n + (i - 1)]
        } else {
            0.0
        }
    };
    // same arithmetic as the field map, so both agree bit for bit
    let (ix, iy) = (1.0 / hx, 1.0 / hy);
    let u = nalgebra::DMatrix::from_fn(n + 2, n + 1, |i, j| at(i, j + 1) * iy + at(i, j) * -iy);
    let v = nalgebra::DMatrix::from_fn(n + 1, n + 2, |i, j| at(i + 1, j) * -ix + at(i, j) * ix);
    Ok(StaggeredVelocity { n, hx, hy, u, v })
}

/// Nodal values as CSV (`x,value` in one dimension, `x,y,value` otherwise).
pub fn grid_csv(layout: &Layout, values: &[f64]) -> Result<String> {
    let mut out = String::new();
    let mismatch = |expected: usize| {
        Error::Input(format!(
            "{} values do not match a layout with {expected} nodes",
            values.len()
        ))
    };
    match *layout {
        Layout::Unstructured => {
            out.push_str("index,value\n");
            for (i, x) in values.iter().enumerate() {
                let _ = writeln!(out, "{i},{x:.16e}");
            }
        }
        Layout::Grid1d { n, h } => {
            if values.len() != n {
                return Err(mismatch(n));
            }
            out.push_str("x,value\n");
            for (i, x) in values.iter().enumerate() {
                let _ = writeln!(out, "{:.16e},{x:.16e}", (i + 1) as f64 * h);
            }
        }
        Layout::Grid2d { .. } | Layout::Stream { .. } => {
            let (nx, ny, hx, hy) = match *layout {
                Layout::Grid2d { nx, ny, hx, hy } => (nx, ny, hx, hy),
                Layout::Stream { n, hx, hy } => (n, n, hx, hy),
                _ => unreachable!(),
            };
            if values.len() != nx * ny {
                return Err(mismatch(nx * ny));
            }
            out.push_str("x,y,value\n");
            for (p, x) in values.iter().enumerate() {
                let (i, j) = (p % nx + 1, p / nx + 1);
                let _ = writeln!(
                    out,
                    "{:.16e},{:.16e},{x:.16e}",
                    i as f64 * hx,
                    j as f64 * hy
                );
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
