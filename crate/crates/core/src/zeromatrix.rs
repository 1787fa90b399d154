//! Nonnegative matrices convergent to zero.
//!
//! A nonnegative square matrix `M` is convergent to zero when `Mᵏ → 0`.
//! Equivalently `ρ(M) < 1`, or `I − M` is invertible with a nonnegative
//! inverse. [`is_convergent_to_zero`] evaluates all three characterizations
//! independently so they can be cross-checked.
//!
//! [`verify_dominance`] is the empirical side of the vector-contraction lemma:
//! a nonnegative sequence dominated by `x_k ≤ M x_{k-1} + y_k` with
//! `y_k → 0` must itself tend to zero.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported matrix order.
pub const MAX_ORDER: usize = 8;

/// Margin on the open condition `ρ < 1`.
pub const RHO_MARGIN: f64 = 1e-9;

/// Nonnegative square matrix of order at most [`MAX_ORDER`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct MonotonyMatrix {
    entries: DMatrix<f64>,
}

impl MonotonyMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || n != entries.ncols() || n > MAX_ORDER {
            return Err(Error::Input(format!(
                "monotony matrix must be square of order 1..={MAX_ORDER}, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if let Some(bad) = entries.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::Input(format!(
                "monotony matrix entries must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(MonotonyMatrix { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Input(
                "monotony matrix rows must all have length n".into(),
            ));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// The 2×2 matrix `[[m11, m12], [m21, m22]]`.
    pub fn two_by_two(m11: f64, m12: f64, m21: f64, m22: f64) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(2, 2, &[m11, m12, m21, m22]))
    }

    pub fn zeros(n: usize) -> Self {
        MonotonyMatrix {
            entries: DMatrix::zeros(n, n),
        }
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Entry-wise multiple, e.g. the embedding-constant scaling of pointwise constants.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.entries * factor)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.order())
            .map(|i| self.entries.row(i).iter().copied().collect())
            .collect()
    }

    /// True when every entry is `≤` the matching entry of `other` (up to `rel_tol`).
    pub fn dominated_by(&self, other: &MonotonyMatrix, rel_tol: f64) -> bool {
        self.order() == other.order()
            && self
                .entries
                .iter()
                .zip(other.entries.iter())
                .all(|(a, b)| *a <= *b + rel_tol * b.abs().max(1e-300))
    }

    fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.order())
            .map(|i| (0..self.order()).map(|j| self.entries[(i, j)] * x[j]).sum())
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for MonotonyMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        MonotonyMatrix::from_rows(&rows)
    }
}

impl From<MonotonyMatrix> for Vec<Vec<f64>> {
    fn from(m: MonotonyMatrix) -> Self {
        m.rows()
    }
}

/// The three characterizations of convergence to zero, evaluated separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCertificate {
    pub spectral_radius: f64,
    /// `ρ(M) < 1 − RHO_MARGIN`; this is the verdict.
    pub rho_ok: bool,
    /// `(I − M)⁻¹` exists and is entry-wise nonnegative.
    pub neumann_ok: bool,
    /// Some power `M^(2^j)`, `j ≤ 16`, has `‖·‖∞ < 1e-6`.
    pub powers_decay: bool,
}

impl ConvergenceCertificate {
    pub fn is_convergent(&self) -> bool {
        self.rho_ok
    }

    /// The three characterizations agree.
    pub fn consistent(&self) -> bool {
        self.rho_ok == self.neumann_ok && self.rho_ok == self.powers_decay
    }
}

/// Closed-form spectral radius of a nonnegative 2×2 matrix.
///
/// The discriminant `(a − d)² + 4bc` is nonnegative, so both eigenvalues are real.
pub fn spectral_radius_2x2(m: &MonotonyMatrix) -> Option<f64> {
    if m.order() != 2 {
        return None;
    }
    let (a, b, c, d) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    let disc = (a - d) * (a - d) + 4.0 * b * c;
    Some(0.5 * (a + d + disc.sqrt()))
}

/// Perron root via power iteration on the shifted matrix `M + sI`, bracketed
/// by Collatz–Wielandt bounds. Returns `None` when the bracket does not close
/// (reducible or defective matrices converge sublinearly).
pub fn spectral_radius_power(m: &MonotonyMatrix) -> Option<f64> {
    const MAX_ITER: usize = 20_000;
    const REL_GAP: f64 = 1e-13;
    let n = m.order();
    let norm_inf = (0..n)
        .map(|i| m.entries.row(i).iter().sum::<f64>())
        .fold(0.0_f64, f64::max);
    if norm_inf == 0.0 {
        return Some(0.0);
    }
    let shift = 0.5 * norm_inf;
    let mut x = vec![1.0; n];
    for _ in 0..MAX_ITER {
        let mut y = m.mul_vec(&x);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += shift * xi;
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for (yi, xi) in y.iter().zip(&x) {
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= REL_GAP * hi {
            return Some((0.5 * (lo + hi) - shift).max(0.0));
        }
        let s = y.iter().cloned().fold(0.0, f64::max);
        x = y.into_iter().map(|v| v / s).collect();
        if x.iter().any(|&v| v < 1e-280) {
            // a component died out: the matrix is reducible in a way the bracket cannot see
            return None;
        }
    }
    None
}

/// Spectral radius of a nonnegative matrix.
///
/// Uses Perron-shifted power iteration; when its bracket does not close the
/// closed form (2×2) or a Schur decomposition is used instead.
pub fn spectral_radius(m: &MonotonyMatrix) -> f64 {
    if let Some(rho) = spectral_radius_power(m) {
        return rho;
    }
    if let Some(rho) = spectral_radius_2x2(m) {
        return rho;
    }
    m.entries
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn norm_inf(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

/// Evaluates the three characterizations of convergence to zero.
pub fn is_convergent_to_zero(m: &MonotonyMatrix) -> ConvergenceCertificate {
    let n = m.order();
    let rho = spectral_radius(m);
    let id = DMatrix::<f64>::identity(n, n);

    let neumann_ok = match (&id - &m.entries).try_inverse() {
        Some(inv) => {
            let scale = inv.amax().max(1.0);
            inv.iter().all(|x| x.is_finite() && *x >= -1e-12 * scale)
        }
        None => false,
    };

    let mut power = m.entries.clone();
    let mut powers_decay = false;
    for _ in 0..=16 {
        let norm = norm_inf(&power);
        if norm < 1e-6 {
            powers_decay = true;
            break;
        }
        if !norm.is_finite() || norm > 1e12 {
            break;
        }
        power = &power * &power;
    }

    ConvergenceCertificate {
        spectral_radius: rho,
        rho_ok: rho < 1.0 - RHO_MARGIN,
        neumann_ok,
        powers_decay,
    }
}

/// `(I − M)⁻¹`, validated against the Neumann series `Σ Mᵏ`.
pub fn neumann_inverse(m: &MonotonyMatrix) -> Result<DMatrix<f64>> {
    let rho = spectral_radius(m);
    if rho >= 1.0 - RHO_MARGIN {
        return Err(Error::Domain(format!(
            "spectral radius {rho} is not below one; I - M has no nonnegative inverse"
        )));
    }
    let n = m.order();
    let id = DMatrix::<f64>::identity(n, n);
    let inv = (&id - &m.entries)
        .try_inverse()
        .ok_or_else(|| Error::Numerical("I - M is numerically singular".into()))?;

    // at least 64 terms, more when the series converges slowly
    let mut sum = id.clone();
    let mut term = id;
    for k in 1..=200_000 {
        term = &term * &m.entries;
        sum += &term;
        if k >= 64 && norm_inf(&term) <= 1e-15 * norm_inf(&sum) {
            break;
        }
    }
    let err = (&sum - &inv).amax();
    if err > 1e-8 * inv.amax().max(1.0) {
        return Err(Error::Numerical(format!(
            "direct inverse and Neumann series differ by {err:e}"
        )));
    }
    Ok(inv)
}

/// Outcome of [`verify_dominance`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    /// `x_k ≤ M x_{k-1} + y_k + slack·1` held for every `k ≥ 1`.
    pub holds: bool,
    /// First violations as `(k, component, excess)`; at most 16 are kept.
    pub violations: Vec<(usize, usize, f64)>,
    /// `‖x_k‖∞` for every `k`.
    pub norms: Vec<f64>,
    /// `sup_{j ≥ k} ‖x_j‖∞` for every `k`.
    pub suffix_sup: Vec<f64>,
}

impl DominanceReport {
    /// First index from which the sequence stays below `threshold`, if any.
    pub fn decays_below(&self, threshold: f64) -> Option<usize> {
        let first = self.suffix_sup.iter().position(|&s| s < threshold)?;
        Some(first)
    }

    pub fn final_norm(&self) -> f64 {
        self.norms.last().copied().unwrap_or(0.0)
    }
}

/// Checks `x_k ≤ M x_{k-1} + y_k + slack` componentwise for `k = 1..len`.
///
/// `y_seq[0]` is ignored; it only keeps the two sequences aligned.
pub fn verify_dominance(
    x_seq: &[Vec<f64>],
    y_seq: &[Vec<f64>],
    m: &MonotonyMatrix,
    slack: f64,
) -> Result<DominanceReport> {
    let n = m.order();
    if x_seq.len() != y_seq.len() {
        return Err(Error::Input(format!(
            "sequence lengths differ: {} vs {}",
            x_seq.len(),
            y_seq.len()
        )));
    }
    if x_seq.len() < 2 {
        return Err(Error::Input("dominance needs at least two terms".into()));
    }
    if !(slack >= 0.0) {
        return Err(Error::Input(format!(
            "slack must be nonnegative, got {slack}"
        )));
    }
    for v in x_seq.iter().chain(y_seq) {
        if v.len() != n {
            return Err(Error::Input(format!(
                "vector of length {} does not match matrix order {n}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Input(
                "sequences must be finite and nonnegative".into(),
            ));
        }
    }

    let mut violations = Vec::new();
    let mut holds = true;
    for k in 1..x_seq.len() {
        let mx = m.mul_vec(&x_seq[k - 1]);
        for i in 0..n {
            let bound = mx[i] + y_seq[k][i] + slack;
            let round = 4.0 * f64::EPSILON * (mx[i] + y_seq[k][i]);
            let excess = x_seq[k][i] - bound;
            if excess > round {
                holds = false;
                if violations.len() < 16 {
                    violations.push((k, i, excess));
                }
            }
        }
    }

    let norms: Vec<f64> = x_seq
        .iter()
        .map(|x| x.iter().cloned().fold(0.0, f64::max))
        .collect();
    let mut suffix_sup = norms.clone();
    for k in (0..suffix_sup.len().saturating_sub(1)).rev() {
        suffix_sup[k] = suffix_sup[k].max(suffix_sup[k + 1]);
    }
    Ok(DominanceReport {
        holds,
        violations,
        norms,
        suffix_sup,
    })
}

/// Dominance checked over a family of trajectories indexed by a parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyReport {
    pub all_hold: bool,
    pub members: Vec<DominanceReport>,
    /// `sup_p ‖x_{k,p}‖∞` for `k` up to the shortest member's length.
    pub envelope: Vec<f64>,
}

impl FamilyReport {
    /// First index from which the common envelope stays below `threshold`.
    pub fn uniform_decay_below(&self, threshold: f64) -> Option<usize> {
        let mut suffix = self.envelope.clone();
        for k in (0..suffix.len().saturating_sub(1)).rev() {
            suffix[k] = suffix[k].max(suffix[k + 1]);
        }
        suffix.iter().position(|&s| s < threshold)
    }
}

/// `(x_seq, y_seq)` of one family member.
pub type Trajectory = (Vec<Vec<f64>>, Vec<Vec<f64>>);

pub fn dominance_family(
    family: &[Trajectory],
    m: &MonotonyMatrix,
    slack: f64,
) -> Result<FamilyReport> {
    if family.is_empty() {
        return Err(Error::Input("empty trajectory family".into()));
    }
    let members = family
        .iter()
        .map(|(x, y)| verify_dominance(x, y, m, slack))
        .collect::<Result<Vec<_>>>()?;
    let len = members.iter().map(|r| r.norms.len()).min().unwrap_or(0);
    let envelope = (0..len)
        .map(|k| members.iter().map(|r| r.norms[k]).fold(0.0, f64::max))
        .collect();
    Ok(FamilyReport {
        all_hold: members.iter().all(|r| r.holds),
        members,
        envelope,
    })
}

/// Forward simulation of `x_k = M x_{k-1} + y_k`; used to build synthetic trajectories.
pub fn simulate_recursion(m: &MonotonyMatrix, x0: &[f64], y_seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut xs = Vec::with_capacity(y_seq.len());
    xs.push(x0.to_vec());
    for y in y_seq.iter().skip(1) {
        let mx = m.mul_vec(xs.last().unwrap());
        xs.push(mx.iter().zip(y).map(|(a, b)| a + b).collect());
    }
    xs
}
