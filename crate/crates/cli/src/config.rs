//! Run configuration read from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use partialcrit::hypotheses::{ReportToggles, SamplerSpec};
use partialcrit::problems::{DirichletSpec, NonlinearitySpec, StokesSpec};
use partialcrit::scheme::{GrowthParams, SchemeConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Exactly one of the problem blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemConfig {
    Dirichlet(DirichletSpec),
    Stokes(StokesSpec),
    /// One degree of freedom: `A = a`, mass weight `weight`.
    Scalar(ScalarSpec),
    MatrixDemo(MatrixDemo),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarSpec {
    pub a: f64,
    #[serde(default = "one")]
    pub weight: f64,
    pub nonlinearity: NonlinearitySpec,
}

fn one() -> f64 {
    1.0
}

/// Matrices and trajectories for the `lemma` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDemo {
    pub matrices: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub trajectories: Vec<TrajectorySpec>,
    /// Length of the synthetic trajectory run for each convergent matrix.
    #[serde(default = "default_demo_len")]
    pub demo_len: usize,
}

fn default_demo_len() -> usize {
    200
}

/// A pair of sequences to test against `x_k ≤ M x_{k−1} + y_k + slack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub matrix: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    #[serde(default)]
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    pub n_points: usize,
    pub box_radius: f64,
    pub seed: u64,
    pub growth: bool,
    pub monotony: bool,
    /// Levels τ for the mountain-pass probe; empty skips it.
    pub mountain_pass: Vec<f64>,
    pub ps_beta: bool,
    /// Pointwise growth triple to test instead of the potential's own.
    pub declared_growth: Option<GrowthParams>,
    /// Post-run checks of `solve`.
    pub nash_samples: usize,
    pub nash_radius: f64,
    /// Gaps `p` for the contraction certificate; empty skips it.
    pub certificate_gaps: Vec<usize>,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        let s = SamplerSpec::default();
        ChecksConfig {
            n_points: s.n_points,
            box_radius: s.box_radius,
            seed: s.seed,
            growth: true,
            monotony: true,
            mountain_pass: vec![0.5, 1.0, 2.0],
            ps_beta: true,
            declared_growth: None,
            nash_samples: 200,
            nash_radius: 0.1,
            certificate_gaps: vec![1, 3],
        }
    }
}

impl ChecksConfig {
    pub fn sampler(&self) -> SamplerSpec {
        SamplerSpec {
            n_points: self.n_points,
            box_radius: self.box_radius,
            seed: self.seed,
        }
    }

    pub fn toggles(&self) -> ReportToggles {
        ReportToggles {
            growth: self.growth,
            monotony: self.monotony,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub newton_tol: f64,
    /// Agreement radius is `factor · (final_tol + newton_tol)`.
    pub factor: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            newton_tol: 1e-8,
            factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: bool,
    pub json: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            csv: true,
            json: true,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.scheme.validate()?;
        cfg.checks.sampler().validate()?;
        if !(cfg.compare.newton_tol > 0.0 && cfg.compare.factor > 0.0) {
            return Err(CliError::Config(
                "compare tolerances must be positive".into(),
            ));
        }
        Ok(cfg)
    }

    /// Reads the file and returns the parsed config with the raw bytes, which
    /// the manifest hashes.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok((Self::parse(text)?, bytes))
    }
}
