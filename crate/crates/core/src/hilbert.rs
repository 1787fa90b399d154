//! Finite-dimensional model of the Hilbert space the systems live in.
//!
//! A [`DiscreteSpace`] couples a symmetric positive definite operator `A`
//! (stiffness form, already multiplied by the quadrature weights) with a
//! weighted L² product. Elements are [`HVector`]s; the energy product is
//! `(u, v)_A = uᵀ A v`.
//!
//! Pointwise quantities (nodal values, velocity components, ...) are obtained
//! through an optional sparse *field map* `P`. The weighted L² product is
//! then `(Pu)ᵀ W (Pv)` with `W = diag(mass_weights)`. When no field map is
//! given, `P` is the identity.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};

/// Default relative tolerance for the conjugate-gradient solves.
pub const DEFAULT_CG_TOL: f64 = 1e-10;

static NEXT_SPACE_ID: AtomicU64 = AtomicU64::new(1);

/// Identifier tying vectors to the space they were created in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceId(u64);

impl SpaceId {
    fn fresh() -> Self {
        SpaceId(NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed))
    }
}

/// Coefficient vector of an element of a [`DiscreteSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct HVector {
    coeffs: DVector<f64>,
    space_id: SpaceId,
}

impl HVector {
    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> DVector<f64> {
        self.coeffs
    }

    pub fn space_id(&self) -> SpaceId {
        self.space_id
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coeffs.as_slice()
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &HVector, b: f64) -> HVector {
        debug_assert_eq!(self.space_id, other.space_id);
        HVector {
            coeffs: &self.coeffs * a + &other.coeffs * b,
            space_id: self.space_id,
        }
    }

    pub fn scaled(&self, a: f64) -> HVector {
        HVector {
            coeffs: &self.coeffs * a,
            space_id: self.space_id,
        }
    }

    pub fn sub(&self, other: &HVector) -> HVector {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn add(&self, other: &HVector) -> HVector {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn neg(&self) -> HVector {
        self.scaled(-1.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|x| x.is_finite())
    }
}

/// Symmetric, strongly monotone linear operator in sparse form.
#[derive(Debug, Clone)]
pub struct SpdOperator {
    matrix: CsrMatrix<f64>,
    theta: f64,
    diagonal: DVector<f64>,
}

impl SpdOperator {
    /// Wraps `matrix` after checking it is square, symmetric and has a
    /// positive diagonal. `theta` is the strong monotonicity constant with
    /// respect to the weighted L² product of the space the operator is used in.
    pub fn new(matrix: CsrMatrix<f64>, theta: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Input(format!(
                "operator must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Input(format!("theta must be positive, got {theta}")));
        }
        check_symmetric(&matrix)?;
        let n = matrix.nrows();
        let mut diagonal = DVector::zeros(n);
        for (i, row) in matrix.row_iter().enumerate() {
            for (&j, &a) in row.col_indices().iter().zip(row.values()) {
                if i == j {
                    diagonal[i] += a;
                }
            }
        }
        if diagonal.iter().any(|&d| d <= 0.0) {
            return Err(Error::Integrity(
                "operator has a nonpositive diagonal entry".into(),
            ));
        }
        Ok(SpdOperator {
            matrix,
            theta,
            diagonal,
        })
    }

    /// Builds an operator from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        dim: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
        theta: f64,
    ) -> Result<Self> {
        Self::new(csr_from_triplets(dim, dim, triplets)?, theta)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn matrix(&self) -> &CsrMatrix<f64> {
        &self.matrix
    }

    pub fn diagonal(&self) -> &DVector<f64> {
        &self.diagonal
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        csr_mul(&self.matrix, x)
    }

    pub(crate) fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }
}

/// Discrete model of `H`: operator, quadrature weights and field map.
#[derive(Debug, Clone)]
pub struct DiscreteSpace {
    id: SpaceId,
    operator: SpdOperator,
    mass_weights: DVector<f64>,
    field_map: Option<CsrMatrix<f64>>,
    field_map_t: Option<CsrMatrix<f64>>,
}

impl DiscreteSpace {
    /// Space whose pointwise values are the coefficients themselves.
    pub fn new(operator: SpdOperator, mass_weights: DVector<f64>) -> Result<Self> {
        if mass_weights.len() != operator.dim() {
            return Err(Error::Input(format!(
                "mass weights have length {}, operator dimension is {}",
                mass_weights.len(),
                operator.dim()
            )));
        }
        Self::build(operator, mass_weights, None)
    }

    /// Space whose pointwise values are `field_map * coeffs`, weighted by
    /// `mass_weights` (one weight per row of the field map).
    pub fn with_field_map(
        operator: SpdOperator,
        mass_weights: DVector<f64>,
        field_map: CsrMatrix<f64>,
    ) -> Result<Self> {
        if field_map.ncols() != operator.dim() || field_map.nrows() != mass_weights.len() {
            return Err(Error::Input(format!(
                "field map is {}x{}, expected {}x{}",
                field_map.nrows(),
                field_map.ncols(),
                mass_weights.len(),
                operator.dim()
            )));
        }
        Self::build(operator, mass_weights, Some(field_map))
    }

    fn build(
        operator: SpdOperator,
        mass_weights: DVector<f64>,
        field_map: Option<CsrMatrix<f64>>,
    ) -> Result<Self> {
        if mass_weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Input(
                "mass weights must be strictly positive".into(),
            ));
        }
        let field_map_t = field_map.as_ref().map(|p| p.transpose());
        Ok(DiscreteSpace {
            id: SpaceId::fresh(),
            operator,
            mass_weights,
            field_map,
            field_map_t,
        })
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn operator(&self) -> &SpdOperator {
        &self.operator
    }

    pub fn mass_weights(&self) -> &DVector<f64> {
        &self.mass_weights
    }

    /// Number of pointwise values (rows of the field map).
    pub fn n_points(&self) -> usize {
        self.mass_weights.len()
    }

    pub fn field_map(&self) -> Option<&CsrMatrix<f64>> {
        self.field_map.as_ref()
    }

    pub(crate) fn replace_theta(&mut self, theta: f64) {
        self.operator = self.operator.clone().with_theta(theta);
    }

    pub fn zeros(&self) -> HVector {
        HVector {
            coeffs: DVector::zeros(self.dim()),
            space_id: self.id,
        }
    }

    /// Wraps raw coefficients as an element of this space.
    pub fn vector(&self, coeffs: DVector<f64>) -> Result<HVector> {
        if coeffs.len() != self.dim() {
            return Err(Error::Input(format!(
                "vector has length {}, space dimension is {}",
                coeffs.len(),
                self.dim()
            )));
        }
        if coeffs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("vector has non-finite entries".into()));
        }
        Ok(HVector {
            coeffs,
            space_id: self.id,
        })
    }

    pub fn vector_from_slice(&self, coeffs: &[f64]) -> Result<HVector> {
        self.vector(DVector::from_column_slice(coeffs))
    }

    pub fn contains(&self, u: &HVector) -> bool {
        u.space_id == self.id && u.len() == self.dim()
    }

    pub(crate) fn check(&self, u: &HVector) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::Input(format!(
                "vector has length {}, space dimension is {}",
                u.len(),
                self.dim()
            )));
        }
        if u.space_id != self.id {
            return Err(Error::Input("vector belongs to a different space".into()));
        }
        Ok(())
    }

    /// Pointwise values `P u`.
    pub fn field(&self, u: &HVector) -> DVector<f64> {
        match &self.field_map {
            Some(p) => csr_mul(p, &u.coeffs),
            None => u.coeffs.clone(),
        }
    }

    /// Adjoint of the field map, `Pᵀ f`.
    pub fn field_adjoint(&self, f: &DVector<f64>) -> DVector<f64> {
        match &self.field_map_t {
            Some(pt) => csr_mul(pt, f),
            None => f.clone(),
        }
    }

    /// Weighted L² product `(Pu)ᵀ W (Pv)`.
    pub fn inner_mass(&self, u: &HVector, v: &HVector) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let pu = self.field(u);
        let pv = self.field(v);
        Ok(weighted_dot(&self.mass_weights, &pu, &pv))
    }

    pub fn l2_mass_norm(&self, u: &HVector) -> Result<f64> {
        Ok(self.inner_mass(u, u)?.max(0.0).sqrt())
    }

    /// `PᵀWP x`, the Gram operator of the weighted L² product.
    pub fn apply_mass(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.field_map {
            Some(p) => {
                let px = csr_mul(p, x);
                self.field_adjoint(&px.component_mul(&self.mass_weights))
            }
            None => x.component_mul(&self.mass_weights),
        }
    }
}

/// Energy product `(u, v)_A = (A u)ᵀ v`.
pub fn inner_a(u: &HVector, v: &HVector, space: &DiscreteSpace) -> Result<f64> {
    space.check(u)?;
    space.check(v)?;
    Ok(space.operator.apply(&u.coeffs).dot(&v.coeffs))
}

/// Energy norm `|u|_A`.
pub fn norm_a(u: &HVector, space: &DiscreteSpace) -> Result<f64> {
    let q = inner_a(u, u, space)?;
    let scale = u.coeffs.norm_squared() * space.operator.diagonal.max();
    if q < -1e-12 * scale {
        return Err(Error::Integrity(format!(
            "negative energy product {q:e}; operator is not positive definite"
        )));
    }
    Ok(q.max(0.0).sqrt())
}

/// Solves `A u = h` by Jacobi-preconditioned conjugate gradients.
///
/// Stops when `‖A u − h‖₂ ≤ tol·‖h‖₂`; gives up after `10·dim` iterations.
pub fn solve_a(h: &DVector<f64>, space: &DiscreteSpace, tol: f64) -> Result<HVector> {
    solve_a_with_limit(h, space, tol, 10 * space.dim())
}

pub fn solve_a_with_limit(
    h: &DVector<f64>,
    space: &DiscreteSpace,
    tol: f64,
    max_iter: usize,
) -> Result<HVector> {
    if !(tol > 0.0) {
        return Err(Error::Input(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if h.len() != space.dim() {
        return Err(Error::Input(format!(
            "right-hand side has length {}, space dimension is {}",
            h.len(),
            space.dim()
        )));
    }
    let coeffs = conjugate_gradient(&space.operator, h, tol, max_iter)?;
    Ok(HVector {
        coeffs,
        space_id: space.id,
    })
}

fn conjugate_gradient(
    op: &SpdOperator,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    let n = b.len();
    let b_norm = b.norm();
    let mut x = DVector::zeros(n);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let target = tol * b_norm;
    let inv_diag = op.diagonal.map(|d| 1.0 / d);
    let mut r = b.clone();
    let mut z = r.component_mul(&inv_diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut r_norm = b_norm;
    for _ in 0..max_iter {
        let ap = op.apply(&p);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            return Err(Error::Integrity(
                "conjugate gradient met a non-positive curvature direction".into(),
            ));
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        r_norm = r.norm();
        if r_norm <= target {
            return Ok(x);
        }
        z = r.component_mul(&inv_diag);
        let rz_next = r.dot(&z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.axpy(1.0, &z, beta);
    }
    // the recursive residual can drift from the true one; accept on the true residual
    let true_res = (b - op.apply(&x)).norm();
    if true_res <= target {
        return Ok(x);
    }
    Err(Error::NonConvergence {
        method: "conjugate gradient",
        iterations: max_iter,
        residual: r_norm.max(true_res) / b_norm,
    })
}

/// H-representative of the L² functional `v ↦ Σ w·f·(Pv)`: `A⁻¹ Pᵀ(W f)`.
pub fn riesz_lift(f_pointwise: &DVector<f64>, space: &DiscreteSpace, tol: f64) -> Result<HVector> {
    if f_pointwise.len() != space.n_points() {
        return Err(Error::Input(format!(
            "pointwise field has length {}, space has {} points",
            f_pointwise.len(),
            space.n_points()
        )));
    }
    if f_pointwise.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input(
            "pointwise field has non-finite entries".into(),
        ));
    }
    let load = space.field_adjoint(&f_pointwise.component_mul(&space.mass_weights));
    solve_a(&load, space, tol)
}

/// Sharp constant `c` in `|Pu|_{L²} ≤ c·|u|_A`.
///
/// Computed as the square root of the largest eigenvalue of `A⁻¹ PᵀWP` by
/// power iteration with a Rayleigh-quotient stopping rule.
pub fn embedding_constant(space: &DiscreteSpace) -> Result<f64> {
    const MAX_ITER: usize = 5000;
    const REL_TOL: f64 = 1e-12;
    let n = space.dim();
    // positive start vector with a deterministic ripple so no mode is missed
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i as f64) * 0.7).sin());
    let mut lambda_prev = f64::NAN;
    for it in 0..MAX_ITER {
        let mx = space.apply_mass(&x);
        let y = conjugate_gradient(&space.operator, &mx, 1e-13, 20 * n)?;
        let ay = space.operator.apply(&y);
        let y_a2 = y.dot(&ay);
        if !(y_a2 > 0.0) {
            return Err(Error::Numerical("power iteration collapsed to zero".into()));
        }
        let lambda = y.dot(&space.apply_mass(&y)) / y_a2;
        x = y / y_a2.sqrt();
        if it > 2 && (lambda - lambda_prev).abs() <= REL_TOL * lambda {
            return Ok(lambda.sqrt());
        }
        lambda_prev = lambda;
    }
    Err(Error::NonConvergence {
        method: "power iteration",
        iterations: MAX_ITER,
        residual: f64::NAN,
    })
}

pub(crate) fn weighted_dot(w: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    w.iter()
        .zip(a.iter().zip(b.iter()))
        .map(|(w, (a, b))| w * a * b)
        .sum()
}

/// Sparse matrix–vector product.
pub fn csr_mul(m: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(m.ncols(), x.len());
    DVector::from_iterator(
        m.nrows(),
        m.row_iter().map(|row| {
            row.col_indices()
                .iter()
                .zip(row.values())
                .map(|(&j, &a)| a * x[j])
                .sum::<f64>()
        }),
    )
}

/// Assembles a CSR matrix, summing duplicate entries.
pub fn csr_from_triplets(
    nrows: usize,
    ncols: usize,
    triplets: impl IntoIterator<Item = (usize, usize, f64)>,
) -> Result<CsrMatrix<f64>> {
    let mut coo = CooMatrix::new(nrows, ncols);
    for (i, j, v) in triplets {
        if i >= nrows || j >= ncols {
            return Err(Error::Input(format!(
                "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
            )));
        }
        coo.push(i, j, v);
    }
    Ok(CsrMatrix::from(&coo))
}

fn check_symmetric(m: &CsrMatrix<f64>) -> Result<()> {
    let t = m.transpose();
    let scale = m.values().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    for (row, row_t) in m.row_iter().zip(t.row_iter()) {
        let mut a: Vec<(usize, f64)> = row
            .col_indices()
            .iter()
            .copied()
            .zip(row.values().iter().copied())
            .filter(|(_, v)| *v != 0.0)
            .collect();
        let mut b: Vec<(usize, f64)> = row_t
            .col_indices()
            .iter()
            .copied()
            .zip(row_t.values().iter().copied())
            .filter(|(_, v)| *v != 0.0)
            .collect();
        a.sort_by_key(|e| e.0);
        b.sort_by_key(|e| e.0);
        let same = a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() <= 1e-12 * scale);
        if !same {
            return Err(Error::Input("operator matrix is not symmetric".into()));
        }
    }
    Ok(())
}
