//! The four subcommands. Each returns an exit code; errors are turned into
//! codes by [`execute`].

use std::path::PathBuf;

use log::info;
use serde::Serialize;

use partialcrit::hilbert::norm_a;
use partialcrit::hypotheses::{
    check_mountain_pass_i1, full_report_with, ps_beta, HypothesisReport, MountainPassReport, PsBeta,
};
use partialcrit::oracle::newton_full;
use partialcrit::problems::{build_dirichlet, build_single_dof, build_stokes, grid_csv, Layout};
use partialcrit::scheme::{
    boundedness_check, contraction_certificate, energies, energy_bounds_check, nash_check,
    run_scheme, write_trace_csv, BoundednessReport, ContractionReport, CoupledSystem, Energies,
    EnergyBoundsReport, NashReport, SchemeTrace, SolutionPair, SolutionRecord,
};
use partialcrit::zeromatrix::{
    is_convergent_to_zero, neumann_inverse, simulate_recursion, verify_dominance,
    ConvergenceCertificate, MonotonyMatrix,
};

use crate::artifacts::{timestamp, Artifacts};
use crate::config::{MatrixDemo, ProblemConfig, RunConfig};
use crate::{exit, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    Solve,
    Compare,
    Lemma,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Solve => "solve",
            Command::Compare => "compare",
            Command::Lemma => "lemma",
        }
    }
}

/// One command-line invocation, after argument parsing.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub override_hypotheses: bool,
}

/// Runs the invocation and returns the process exit code. Diagnostics go to
/// stderr, a one-line summary to stdout.
pub fn execute(inv: &Invocation) -> i32 {
    match run(inv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("partialcrit {}: error: {e}", inv.command.name());
            e.exit_code()
        }
    }
}

fn run(inv: &Invocation) -> Result<i32, CliError> {
    let (mut cfg, bytes) = RunConfig::load(&inv.config)?;
    if let Some(seed) = inv.seed {
        cfg.scheme.seed = seed;
        cfg.checks.seed = seed;
    }
    if inv.override_hypotheses {
        cfg.scheme.override_hypotheses = true;
    }
    let sys = match inv.command {
        Command::Lemma => None,
        _ => Some(build_system(&cfg.problem)?),
    };
    let started = timestamp();
    let dir = inv.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let mut art = Artifacts::create(&dir)?;

    let outcome = match (inv.command, &sys) {
        (Command::Check, Some(sys)) => cmd_check(&cfg, sys, &mut art),
        (Command::Solve, Some(sys)) => cmd_solve(&cfg, sys, &mut art),
        (Command::Compare, Some(sys)) => cmd_compare(&cfg, sys, &mut art),
        _ => cmd_lemma(&cfg, &mut art),
    };
    let code = match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("partialcrit {}: error: {e}", inv.command.name());
            e.exit_code()
        }
    };
    art.finish(inv.command.name(), &bytes, cfg.scheme.seed, started)?;
    Ok(code)
}

pub fn build_system(problem: &ProblemConfig) -> Result<CoupledSystem, CliError> {
    let sys = match problem {
        ProblemConfig::Dirichlet(spec) => build_dirichlet(spec)?,
        ProblemConfig::Stokes(spec) => build_stokes(spec)?,
        ProblemConfig::Scalar(s) => build_single_dof(s.a, s.weight, s.nonlinearity.clone())?,
        ProblemConfig::MatrixDemo(_) => {
            return Err(CliError::Config(
                "this subcommand needs a dirichlet, stokes or scalar problem block".into(),
            ))
        }
    };
    Ok(sys)
}

#[derive(Debug, Serialize)]
struct CheckReport {
    command: &'static str,
    hypotheses: HypothesisReport,
    mountain_pass: Vec<MountainPassReport>,
    ps_beta: Option<PsBeta>,
}

pub fn cmd_check(
    cfg: &RunConfig,
    sys: &CoupledSystem,
    art: &mut Artifacts,
) -> Result<i32, CliError> {
    let sampler = cfg.checks.sampler();
    let hypotheses = full_report_with(
        sys,
        cfg.checks.declared_growth.as_ref(),
        &sampler,
        cfg.checks.toggles(),
    )?;
    let mountain_pass = cfg
        .checks
        .mountain_pass
        .iter()
        .map(|&tau| check_mountain_pass_i1(sys, tau, &sampler))
        .collect::<Result<Vec<_>, _>>()?;
    let beta = if cfg.checks.ps_beta && hypotheses.matrix_ok.rho_ok {
        Some(ps_beta(sys.monotony())?)
    } else {
        None
    };

    let ready = hypotheses.ready;
    let witness = hypotheses.growth.as_ref().and_then(|g| g.witness);
    match witness {
        Some([x, y, f]) => println!(
            "{}: ready={ready} growth witness F({x:e}, {y:e}) = {f:e}",
            sys.label()
        ),
        None => println!("{}: ready={ready}", sys.label()),
    }
    if cfg.output.json {
        art.write_json(
            "report.json",
            &CheckReport {
                command: "check",
                hypotheses,
                mountain_pass,
                ps_beta: beta,
            },
        )?;
    }
    Ok(if ready { exit::OK } else { exit::HYPOTHESIS })
}

#[derive(Debug, Serialize)]
struct SolutionFile<'a> {
    layout: &'a Layout,
    energies: Energies,
    #[serde(flatten)]
    solution: SolutionRecord,
}

#[derive(Debug, Serialize)]
struct SolveReport {
    label: String,
    dim: usize,
    converged: bool,
    stages: usize,
    residual_u: f64,
    residual_v: f64,
    energies: Energies,
    embedding_constant: f64,
    monotony: Vec<Vec<f64>>,
    matrix_certificate: ConvergenceCertificate,
    /// Every row has `r1 ≤ t_k` and `r2 ≤ t_k`.
    schedule_ok: bool,
    nash: Option<NashReport>,
    certificates: Vec<ContractionReport>,
    boundedness: Option<BoundednessReport>,
    energy_bounds: Option<EnergyBoundsReport>,
}

struct SolveOutcome {
    code: i32,
    pair: SolutionPair,
    report: SolveReport,
}

/// Runs the scheme, writes trace and solution files and assembles the report.
fn solve_core(
    cfg: &RunConfig,
    sys: &CoupledSystem,
    art: &mut Artifacts,
) -> Result<SolveOutcome, CliError> {
    let checks = &cfg.checks;
    let mut scheme = cfg.scheme.clone();
    scheme.keep_history |= !checks.certificate_gaps.is_empty();
    let (pair, trace) = run_scheme(sys, &scheme)?;
    info!(
        "{}: converged={} after {} stages",
        sys.label(),
        pair.converged,
        pair.stages
    );

    if cfg.output.csv {
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).map_err(|e| CliError::Io {
            path: art.dir().join("trace.csv"),
            source: e,
        })?;
        art.write("trace.csv", &buf)?;
        if !matches!(sys.layout(), Layout::Unstructured) {
            art.write(
                "u_grid.csv",
                grid_csv(sys.layout(), pair.u_star.coeffs().as_slice())?.as_bytes(),
            )?;
            art.write(
                "v_grid.csv",
                grid_csv(sys.layout(), pair.v_star.coeffs().as_slice())?.as_bytes(),
            )?;
        }
    }
    let e = energies(sys, &pair.u_star, &pair.v_star)?;
    if cfg.output.json {
        art.write_json(
            "solution.json",
            &SolutionFile {
                layout: sys.layout(),
                energies: e,
                solution: SolutionRecord::new(sys.label(), &pair),
            },
        )?;
    }

    let (nash, certificates, boundedness, energy_bounds) = if pair.converged {
        post_run_checks(cfg, sys, &pair, &trace)?
    } else {
        (None, Vec::new(), None, None)
    };
    let report = SolveReport {
        label: sys.label().to_string(),
        dim: sys.dim(),
        converged: pair.converged,
        stages: pair.stages,
        residual_u: pair.residuals.0,
        residual_v: pair.residuals.1,
        energies: e,
        embedding_constant: sys.embedding_constant(),
        monotony: sys.monotony().rows(),
        matrix_certificate: is_convergent_to_zero(sys.monotony()),
        schedule_ok: trace.rows.iter().all(|r| r.r1 <= r.t_k && r.r2 <= r.t_k),
        nash,
        certificates,
        boundedness,
        energy_bounds,
    };
    let code = if pair.converged {
        exit::OK
    } else {
        exit::MAX_OUTER
    };
    Ok(SolveOutcome { code, pair, report })
}

type PostRun = (
    Option<NashReport>,
    Vec<ContractionReport>,
    Option<BoundednessReport>,
    Option<EnergyBoundsReport>,
);

fn post_run_checks(
    cfg: &RunConfig,
    sys: &CoupledSystem,
    pair: &SolutionPair,
    trace: &SchemeTrace,
) -> Result<PostRun, CliError> {
    let checks = &cfg.checks;
    let nash = if checks.nash_samples > 0 {
        Some(nash_check(
            sys,
            pair,
            checks.nash_samples,
            checks.nash_radius,
            checks.seed,
            cfg.scheme.final_tol,
        )?)
    } else {
        None
    };
    let certificates = checks
        .certificate_gaps
        .iter()
        .map(|&p| contraction_certificate(sys, trace, sys.monotony(), p))
        .collect::<Result<Vec<_>, _>>()?;
    let boundedness = match sys.growth() {
        Some(g) => Some(boundedness_check(trace, g)?),
        None => None,
    };
    let energy_bounds = sys.growth().map(|g| energy_bounds_check(trace, g));
    Ok((nash, certificates, boundedness, energy_bounds))
}

pub fn cmd_solve(
    cfg: &RunConfig,
    sys: &CoupledSystem,
    art: &mut Artifacts,
) -> Result<i32, CliError> {
    let out = solve_core(cfg, sys, art)?;
    println!(
        "{}: converged={} stages={} residuals=({:e}, {:e})",
        sys.label(),
        out.pair.converged,
        out.pair.stages,
        out.pair.residuals.0,
        out.pair.residuals.1
    );
    if cfg.output.json {
        art.write_json("report.json", &out.report)?;
    }
    Ok(out.code)
}

#[derive(Debug, Serialize)]
struct NewtonSummary {
    iterations: usize,
    final_residual: f64,
    converged: bool,
}

#[derive(Debug, Serialize)]
struct CompareReport {
    scheme: SolveReport,
    newton: NewtonSummary,
    /// `|u_scheme − u_newton|_A`, likewise for `v`, and the stacked norm.
    diff_u: f64,
    diff_v: f64,
    diff: f64,
    bound: f64,
    agree: bool,
}

pub fn cmd_compare(
    cfg: &RunConfig,
    sys: &CoupledSystem,
    art: &mut Artifacts,
) -> Result<i32, CliError> {
    let out = solve_core(cfg, sys, art)?;
    if out.code != exit::OK {
        if cfg.output.json {
            art.write_json("report.json", &out.report)?;
        }
        return Ok(out.code);
    }
    let space = sys.space();
    let zero = space.zeros();
    let newton = newton_full(sys, (&zero, &zero), cfg.compare.newton_tol).map_err(|e| {
        // any oracle failure counts as a solver failure, whatever its kind
        CliError::Solver(partialcrit::Error::Numerical(format!("newton oracle: {e}")))
    })?;
    let diff_u = norm_a(&out.pair.u_star.sub(&newton.solution.u_star), space)?;
    let diff_v = norm_a(&out.pair.v_star.sub(&newton.solution.v_star), space)?;
    let diff = diff_u.hypot(diff_v);
    let bound = cfg.compare.factor * (cfg.scheme.final_tol + cfg.compare.newton_tol);
    let agree = newton.solution.converged && diff <= bound;
    println!(
        "{}: scheme vs newton diff={diff:e} bound={bound:e} agree={agree}",
        sys.label()
    );
    if cfg.output.json {
        art.write_json(
            "report.json",
            &CompareReport {
                scheme: out.report,
                newton: NewtonSummary {
                    iterations: newton.newton_iters,
                    final_residual: newton.final_residual,
                    converged: newton.solution.converged,
                },
                diff_u,
                diff_v,
                diff,
                bound,
                agree,
            },
        )?;
    }
    if !newton.solution.converged {
        return Ok(exit::SOLVER);
    }
    Ok(if agree { exit::OK } else { exit::DISAGREE })
}

#[derive(Debug, Serialize)]
struct DemoRun {
    len: usize,
    holds: bool,
    /// First index from which `‖x_k‖∞` stays below `1e-6`.
    below_1e6_from: Option<usize>,
    final_norm: f64,
}

#[derive(Debug, Serialize)]
struct MatrixEntry {
    rows: Vec<Vec<f64>>,
    certificate: ConvergenceCertificate,
    consistent: bool,
    neumann_inverse: Option<Vec<Vec<f64>>>,
    ps_beta: Option<PsBeta>,
    demo: Option<DemoRun>,
}

#[derive(Debug, Serialize)]
struct TrajectoryEntry {
    holds: bool,
    violations: Vec<(usize, usize, f64)>,
    final_norm: f64,
    below_1e6_from: Option<usize>,
}

#[derive(Debug, Serialize)]
struct LemmaReport {
    matrices: Vec<MatrixEntry>,
    trajectories: Vec<TrajectoryEntry>,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<MonotonyMatrix, CliError> {
    MonotonyMatrix::from_rows(rows).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

/// `x₀ = 1`, `y_k = 2^{−k}·1`: a trajectory whose dominating recursion decays.
fn demo_run(m: &MonotonyMatrix, len: usize) -> Result<DemoRun, CliError> {
    let n = m.order();
    let len = len.max(2);
    let y: Vec<Vec<f64>> = (0..len).map(|k| vec![0.5f64.powi(k as i32); n]).collect();
    let x = simulate_recursion(m, &vec![1.0; n], &y);
    let rep = verify_dominance(&x, &y, m, 0.0)?;
    Ok(DemoRun {
        len,
        holds: rep.holds,
        below_1e6_from: rep.decays_below(1e-6),
        final_norm: rep.final_norm(),
    })
}

pub fn cmd_lemma(cfg: &RunConfig, art: &mut Artifacts) -> Result<i32, CliError> {
    let owned;
    let demo: &MatrixDemo = match &cfg.problem {
        ProblemConfig::MatrixDemo(d) => d,
        other => {
            let sys = build_system(other)?;
            owned = MatrixDemo {
                matrices: vec![sys.monotony().rows()],
                trajectories: Vec::new(),
                demo_len: 200,
            };
            &owned
        }
    };
    if demo.matrices.is_empty() && demo.trajectories.is_empty() {
        return Err(CliError::Config(
            "matrix_demo lists no matrices or trajectories".into(),
        ));
    }

    let mut matrices = Vec::new();
    for (i, rows) in demo.matrices.iter().enumerate() {
        let m = matrix(rows, &format!("matrices[{i}]"))?;
        let certificate = is_convergent_to_zero(&m);
        let convergent = certificate.is_convergent();
        let neumann = if convergent {
            neumann_inverse(&m).ok().map(|inv| {
                (0..inv.nrows())
                    .map(|r| inv.row(r).iter().copied().collect())
                    .collect()
            })
        } else {
            None
        };
        let beta = if convergent && m.order() == 2 {
            Some(ps_beta(&m)?)
        } else {
            None
        };
        let demo_rep = if convergent {
            Some(demo_run(&m, demo.demo_len)?)
        } else {
            None
        };
        matrices.push(MatrixEntry {
            rows: m.rows(),
            consistent: certificate.consistent(),
            certificate,
            neumann_inverse: neumann,
            ps_beta: beta,
            demo: demo_rep,
        });
    }

    let mut trajectories = Vec::new();
    for (i, t) in demo.trajectories.iter().enumerate() {
        let m = matrix(&t.matrix, &format!("trajectories[{i}].matrix"))?;
        let rep = verify_dominance(&t.x, &t.y, &m, t.slack)
            .map_err(|e| CliError::Config(format!("trajectories[{i}]: {e}")))?;
        trajectories.push(TrajectoryEntry {
            holds: rep.holds,
            violations: rep.violations.clone(),
            final_norm: rep.final_norm(),
            below_1e6_from: rep.decays_below(1e-6),
        });
    }

    let violated = trajectories.iter().filter(|t| !t.holds).count()
        + matrices
            .iter()
            .filter(|m| m.demo.as_ref().is_some_and(|d| !d.holds))
            .count();
    let n_conv = matrices
        .iter()
        .filter(|m| m.certificate.is_convergent())
        .count();
    println!(
        "lemma: {} matrices ({n_conv} convergent), {} trajectories, {violated} violated",
        matrices.len(),
        trajectories.len()
    );
    if cfg.output.json {
        art.write_json(
            "report.json",
            &LemmaReport {
                matrices,
                trajectories,
            },
        )?;
    }
    Ok(if violated == 0 {
        exit::OK
    } else {
        exit::HYPOTHESIS
    })
}
