use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheme::GrowthParams;
use crate::zeromatrix::MonotonyMatrix;

/// One term `coef · x^px · y^py` of a custom polynomial potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub px: u32,
    pub py: u32,
}

/// Pointwise potential `F(x, y)` whose integral is the coupling functional `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearitySpec {
    /// `F ≡ 0`.
    Zero,
    /// `F = a x²/2 + b x y + c y²/2 + g x`.
    Quadratic { a: f64, b: f64, c: f64, g: f64 },
    /// `F = ε sin(x) cos(y)`.
    Sincos { epsilon: f64 },
    /// `F = Σ coef · x^px · y^py`.
    Custom { terms: Vec<Monomial> },
}

impl NonlinearitySpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match self {
            NonlinearitySpec::Zero => true,
            NonlinearitySpec::Quadratic { a, b, c, g } => finite(&[*a, *b, *c, *g]),
            NonlinearitySpec::Sincos { epsilon } => epsilon.is_finite(),
            NonlinearitySpec::Custom { terms } => terms
                .iter()
                .all(|t| t.coef.is_finite() && t.px <= 16 && t.py <= 16),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "invalid nonlinearity parameters: {self:?}"
            )))
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            NonlinearitySpec::Zero => 0.0,
            NonlinearitySpec::Quadratic { a, b, c, g } => {
                0.5 * a * x * x + b * x * y + 0.5 * c * y * y + g * x
            }
            NonlinearitySpec::Sincos { epsilon } => epsilon * x.sin() * y.cos(),
            NonlinearitySpec::Custom { terms } => terms
                .iter()
                .map(|t| t.coef * x.powi(t.px as i32) * y.powi(t.py as i32))
                .sum(),
        }
    }

    /// `(F_x, F_y)`.
    pub fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            NonlinearitySpec::Zero => (0.0, 0.0),
            NonlinearitySpec::Quadratic { a, b, c, g } => (a * x + b * y + g, b * x + c * y),
            NonlinearitySpec::Sincos { epsilon } => {
                (epsilon * x.cos() * y.cos(), -epsilon * x.sin() * y.sin())
            }
            NonlinearitySpec::Custom { terms } => {
                let mut fx = 0.0;
                let mut fy = 0.0;
                for t in terms {
                    if t.px > 0 {
                        fx += t.coef * t.px as f64 * x.powi(t.px as i32 - 1) * y.powi(t.py as i32);
                    }
                    if t.py > 0 {
                        fy += t.coef * t.py as f64 * x.powi(t.px as i32) * y.powi(t.py as i32 - 1);
                    }
                }
                (fx, fy)
            }
        }
    }

    /// Pointwise monotony constants known in closed form.
    ///
    /// Row one bounds `(F_x(p) − F_x(q))(x_p − x_q)` from above, row two bounds
    /// `(F_y(p) − F_y(q))(y_p − y_q)` from below; see [`crate::hypotheses`].
    pub fn declared_monotony(&self) -> Option<MonotonyMatrix> {
        let m = match self {
            NonlinearitySpec::Zero => MonotonyMatrix::zeros(2),
            NonlinearitySpec::Quadratic { a, b, c, .. } => {
                MonotonyMatrix::two_by_two(a.max(0.0), b.abs(), b.abs(), (-c).max(0.0)).ok()?
            }
            // both partial derivatives of F_x and F_y are bounded by |ε|
            NonlinearitySpec::Sincos { epsilon } => {
                let e = epsilon.abs();
                MonotonyMatrix::two_by_two(e, e, e, e).ok()?
            }
            NonlinearitySpec::Custom { .. } => return None,
        };
        Some(m)
    }

    /// Pointwise growth constants `−α̲ y² − C ≤ F(x, y) ≤ ᾱ x² + C` known in closed form.
    pub fn declared_growth(&self) -> Option<GrowthParams> {
        match self {
            NonlinearitySpec::Zero => GrowthParams::new(0.0, 0.0, 0.0).ok(),
            NonlinearitySpec::Sincos { epsilon } => GrowthParams::new(0.0, 0.0, epsilon.abs()).ok(),
            _ => None,
        }
    }
}
