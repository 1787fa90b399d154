//! Independent reference solvers and derivative checks.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{inner_a, HVector};
use crate::scheme::{
    e1_value, e2_value, energies, random_unit_vector, residual_u, residual_v, CoupledSystem,
    SolutionPair,
};

/// Largest per-component dimension handled with a dense Jacobian.
pub const NEWTON_MAX_DIM: usize = 2500;

const NEWTON_MAX_ITERS: usize = 50;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub solution: SolutionPair,
    pub newton_iters: usize,
    /// `sqrt(|E₁₁|²_A + |E₂₂|²_A)` at the returned pair.
    pub final_residual: f64,
}

/// Stacked loads `(l_u, l_v)` of the potential at `x = (u, v)`.
fn stacked_loads(sys: &CoupledSystem, x: &DVector<f64>) -> Result<DVector<f64>> {
    let n = sys.dim();
    let space = sys.space();
    let u = space.vector(x.rows(0, n).into_owned())?;
    let v = space.vector(x.rows(n, n).into_owned())?;
    let (lu, lv) = sys.loads(&u, &v)?;
    let mut l = DVector::zeros(2 * n);
    l.rows_mut(0, n).copy_from(&lu);
    l.rows_mut(n, n).copy_from(&lv);
    Ok(l)
}

/// Dual form of the residual, `(A E₁₁, A E₂₂) = (Au − l_u, −Av − l_v)`.
fn dual_residual(sys: &CoupledSystem, x: &DVector<f64>) -> Result<DVector<f64>> {
    let n = sys.dim();
    let op = sys.space().operator();
    let mut g = -stacked_loads(sys, x)?;
    let au = op.apply(&x.rows(0, n).into_owned());
    let av = op.apply(&x.rows(n, n).into_owned());
    g.rows_mut(0, n).zip_apply(&au, |gi, a| *gi += a);
    g.rows_mut(n, n).zip_apply(&av, |gi, a| *gi -= a);
    Ok(g)
}

struct EnergyNorm {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    n: usize,
}

impl EnergyNorm {
    fn new(sys: &CoupledSystem) -> Result<Self> {
        let n = sys.dim();
        let mut a = DMatrix::zeros(n, n);
        for (i, row) in sys.space().operator().matrix().row_iter().enumerate() {
            for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                a[(i, j)] += v;
            }
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Numerical("operator is not positive definite".into()))?;
        Ok(EnergyNorm { chol, n })
    }

    /// Energy norms of `A⁻¹g` for each half of the stacked dual residual.
    fn split(&self, g: &DVector<f64>) -> (f64, f64) {
        let norm = |h: DVector<f64>| {
            let z = self.chol.solve(&h);
            h.dot(&z).max(0.0).sqrt()
        };
        (
            norm(g.rows(0, self.n).into_owned()),
            norm(g.rows(self.n, self.n).into_owned()),
        )
    }
}

/// Damped Newton on the stacked residual with a forward-difference Jacobian
/// of the potential's loads and Armijo backtracking on the squared dual residual.
pub fn newton_full(
    sys: &CoupledSystem,
    init: (&HVector, &HVector),
    tol: f64,
) -> Result<OracleResult> {
    let n = sys.dim();
    if n > NEWTON_MAX_DIM {
        return Err(Error::Input(format!(
            "dense Newton supports at most {NEWTON_MAX_DIM} unknowns per component, got {n}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Input(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let space = sys.space();
    space.check(init.0)?;
    space.check(init.1)?;
    let energy = EnergyNorm::new(sys)?;

    let mut x = DVector::zeros(2 * n);
    x.rows_mut(0, n).copy_from(init.0.coeffs());
    x.rows_mut(n, n).copy_from(init.1.coeffs());
    let mut g = dual_residual(sys, &x)?;
    let mut iters = 0;
    loop {
        let (r1, r2) = energy.split(&g);
        let stacked = r1.hypot(r2);
        if stacked <= tol {
            let u = space.vector(x.rows(0, n).into_owned())?;
            let v = space.vector(x.rows(n, n).into_owned())?;
            return Ok(OracleResult {
                solution: SolutionPair {
                    u_star: u,
                    v_star: v,
                    residuals: (r1, r2),
                    converged: true,
                    stages: iters,
                },
                newton_iters: iters,
                final_residual: stacked,
            });
        }
        if iters == NEWTON_MAX_ITERS || !stacked.is_finite() {
            return Err(Error::NonConvergence {
                method: "newton",
                iterations: iters,
                residual: stacked,
            });
        }

        // the operator block is exact; only the loads are differenced
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        let l0 = stacked_loads(sys, &x)?;
        for j in 0..2 * n {
            let h = f64::EPSILON.sqrt() * (1.0 + x[j].abs());
            let mut xp = x.clone();
            xp[j] += h;
            let lp = stacked_loads(sys, &xp)?;
            jac.set_column(j, &((&l0 - lp) / h));
        }
        for (i, row) in sys.space().operator().matrix().row_iter().enumerate() {
            for (&j, &a) in row.col_indices().iter().zip(row.values()) {
                jac[(i, j)] += a;
                jac[(n + i, n + j)] -= a;
            }
        }
        let step = jac
            .lu()
            .solve(&(-&g))
            .ok_or_else(|| Error::Numerical("singular Newton Jacobian".into()))?;

        let phi = g.norm_squared();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = &x + alpha * &step;
            let gt = dual_residual(sys, &trial)?;
            if gt.norm_squared() <= (1.0 - 2.0 * ARMIJO * alpha) * phi {
                x = trial;
                g = gt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        iters += 1;
        if !accepted {
            return Err(Error::NonConvergence {
                method: "newton line search",
                iterations: iters,
                residual: stacked,
            });
        }
    }
}

/// Worst relative disagreement between analytic and finite-difference
/// directional derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientCheck {
    pub step: f64,
    pub n_directions: usize,
    /// `E₁` in `u` against `E₁₁`.
    pub max_rel_err_e1: f64,
    /// `E₂` in `v` against `E₂₂`.
    pub max_rel_err_e2: f64,
    /// `E` in both against `(E₁₁, E₂₂)`.
    pub max_rel_err_e: f64,
}

impl GradientCheck {
    pub fn max_rel_err(&self) -> f64 {
        self.max_rel_err_e1
            .max(self.max_rel_err_e2)
            .max(self.max_rel_err_e)
    }
}

pub const FD_DIRECTIONS: usize = 10;

/// Central differences along [`FD_DIRECTIONS`] random unit directions. The
/// error is relative to the larger of the analytic derivative and a
/// thousandth of the gradient norm, so that near-orthogonal directions do
/// not divide by zero.
pub fn fd_gradient_check(
    sys: &CoupledSystem,
    u: &HVector,
    v: &HVector,
    step: f64,
    seed: u64,
) -> Result<GradientCheck> {
    if !(step > 0.0) {
        return Err(Error::Input(format!("step must be positive, got {step}")));
    }
    let sharp = sys.clone().with_cg_tol(1e-13);
    let space = sharp.space();
    let g1 = residual_u(&sharp, u, v)?;
    let g2 = residual_v(&sharp, u, v)?;
    let g1n = inner_a(&g1, &g1, space)?.sqrt();
    let g2n = inner_a(&g2, &g2, space)?.sqrt();
    let rel =
        |fd: f64, an: f64, scale: f64| (fd - an).abs() / an.abs().max(1e-3 * scale).max(1e-300);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradientCheck {
        step,
        n_directions: FD_DIRECTIONS,
        max_rel_err_e1: 0.0,
        max_rel_err_e2: 0.0,
        max_rel_err_e: 0.0,
    };
    for _ in 0..FD_DIRECTIONS {
        let du = random_unit_vector(&sharp, &mut rng)?;
        let dv = random_unit_vector(&sharp, &mut rng)?;
        let up = u.lin_comb(1.0, &du, step);
        let um = u.lin_comb(1.0, &du, -step);
        let vp = v.lin_comb(1.0, &dv, step);
        let vm = v.lin_comb(1.0, &dv, -step);

        let fd1 = (e1_value(&sharp, &up, v)? - e1_value(&sharp, &um, v)?) / (2.0 * step);
        let an1 = inner_a(&g1, &du, space)?;
        report.max_rel_err_e1 = report.max_rel_err_e1.max(rel(fd1, an1, g1n));

        let fd2 = (e2_value(&sharp, u, &vp)? - e2_value(&sharp, u, &vm)?) / (2.0 * step);
        let an2 = inner_a(&g2, &dv, space)?;
        report.max_rel_err_e2 = report.max_rel_err_e2.max(rel(fd2, an2, g2n));

        let fd = (energies(&sharp, &up, &vp)?.e - energies(&sharp, &um, &vm)?.e) / (2.0 * step);
        let an = an1 + an2;
        report.max_rel_err_e = report.max_rel_err_e.max(rel(fd, an, g1n.hypot(g2n)));
    }
    Ok(report)
}

/// Exhaustive grid scan around a computed pair on a tiny system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteNashReport {
    pub grid_n: usize,
    pub grid_radius: f64,
    pub cell: f64,
    /// Grid minimizer of `E₁(·, v*)` and maximizer of `E₂(u*, ·)`.
    pub u_grid_argmin: Vec<f64>,
    pub v_grid_argmax: Vec<f64>,
    /// `u*` is within one cell of the grid minimizer and not beaten by it.
    pub u_ok: bool,
    pub v_ok: bool,
}

impl BruteNashReport {
    pub fn holds(&self) -> bool {
        self.u_ok && self.v_ok
    }
}

/// Scans `grid_n` points per coordinate in `[−grid_radius, grid_radius]`.
pub fn brute_nash(
    sys: &CoupledSystem,
    pair: &SolutionPair,
    grid_radius: f64,
    grid_n: usize,
) -> Result<BruteNashReport> {
    let dim = sys.dim();
    if dim > 2 {
        return Err(Error::Input(format!(
            "brute-force scan needs at most 2 unknowns per component, got {dim}"
        )));
    }
    if grid_n < 2 || !(grid_radius > 0.0) {
        return Err(Error::Input(
            "grid needs at least two points and a positive radius".into(),
        ));
    }
    let cell = 2.0 * grid_radius / (grid_n - 1) as f64;
    let coord = |i: usize| -grid_radius + i as f64 * cell;
    let total = grid_n.pow(dim as u32);
    let point = |mut idx: usize| -> Vec<f64> {
        (0..dim)
            .map(|_| {
                let c = coord(idx % grid_n);
                idx /= grid_n;
                c
            })
            .collect()
    };
    let space = sys.space();
    let (u_star, v_star) = (&pair.u_star, &pair.v_star);

    let mut best_u = (f64::INFINITY, 0);
    let mut best_v = (f64::NEG_INFINITY, 0);
    for idx in 0..total {
        let p = space.vector_from_slice(&point(idx))?;
        let e1 = e1_value(sys, &p, v_star)?;
        if e1 < best_u.0 {
            best_u = (e1, idx);
        }
        let e2 = e2_value(sys, u_star, &p)?;
        if e2 > best_v.0 {
            best_v = (e2, idx);
        }
    }
    let u_arg = point(best_u.1);
    let v_arg = point(best_v.1);
    let near = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= cell * (1.0 + 1e-12))
    };
    let e1_star = e1_value(sys, u_star, v_star)?;
    let e2_star = e2_value(sys, u_star, v_star)?;
    let u_ok =
        near(u_star.as_slice(), &u_arg) && e1_star <= best_u.0 + 1e-12 * (1.0 + best_u.0.abs());
    let v_ok =
        near(v_star.as_slice(), &v_arg) && e2_star >= best_v.0 - 1e-12 * (1.0 + best_v.0.abs());
    Ok(BruteNashReport {
        grid_n,
        grid_radius,
        cell,
        u_grid_argmin: u_arg,
        v_grid_argmax: v_arg,
        u_ok,
        v_ok,
    })
}
