use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{SchemeTrace, SolutionPair};

/// Column header of the exported trace.
pub const TRACE_HEADER: &str = "k,norm_u,norm_v,r1,r2,E1,E2,E,inner_iters_u,inner_iters_v";

/// Writes one line per stage. Floats use a fixed 17-digit exponent format so
/// that repeated runs produce byte-identical files.
pub fn write_trace_csv<W: Write>(trace: &SchemeTrace, mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in &trace.rows {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            r.k, r.norm_u, r.norm_v, r.r1, r.r2, r.e1, r.e2, r.e, r.inner_iters_u, r.inner_iters_v
        )?;
    }
    Ok(())
}

/// Serializable form of a [`SolutionPair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub label: String,
    pub dim: usize,
    pub converged: bool,
    pub stages: usize,
    pub residual_u: f64,
    pub residual_v: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl SolutionRecord {
    pub fn new(label: &str, pair: &SolutionPair) -> Self {
        SolutionRecord {
            label: label.to_string(),
            dim: pair.u_star.len(),
            converged: pair.converged,
            stages: pair.stages,
            residual_u: pair.residuals.0,
            residual_v: pair.residuals.1,
            u: pair.u_star.as_slice().to_vec(),
            v: pair.v_star.as_slice().to_vec(),
        }
    }
}
