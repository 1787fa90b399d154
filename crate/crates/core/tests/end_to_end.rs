//! Whole-pipeline runs through the public API.

use partialcrit::hilbert::norm_a;
use partialcrit::hypotheses::{full_report, SamplerSpec};
use partialcrit::oracle::newton_full;
use partialcrit::problems::{
    build_dirichlet, build_stokes, grid_csv, reconstruct_velocity, stokes_manufactured_psi,
    DirichletSpec, NonlinearitySpec, StokesSpec,
};
use partialcrit::scheme::{
    boundedness_check, contraction_certificate, nash_check, run_scheme, write_trace_csv,
    SchemeConfig, TRACE_HEADER,
};

#[test]
fn dirichlet_2d_pipeline() {
    let spec = DirichletSpec {
        dims: 2,
        n_per_dim: 11,
        lengths: vec![1.0, 2.0],
        potential_c: 0.5,
        nonlinearity: NonlinearitySpec::Sincos { epsilon: 0.4 },
    };
    let sys = build_dirichlet(&spec).unwrap();
    let report = full_report(&sys, None, &SamplerSpec::default()).unwrap();
    assert!(report.ready, "{report:?}");

    let cfg = SchemeConfig {
        keep_history: true,
        ..SchemeConfig::default()
    };
    let (pair, trace) = run_scheme(&sys, &cfg).unwrap();
    assert!(pair.converged);

    let cert = contraction_certificate(&sys, &trace, sys.monotony(), 2).unwrap();
    assert!(cert.structural_holds());
    let bounded = boundedness_check(&trace, sys.growth().unwrap()).unwrap();
    assert!(bounded.mu_below_one);
    assert!(nash_check(&sys, &pair, 100, 0.5, 0, cfg.final_tol)
        .unwrap()
        .holds());

    let z = sys.space().zeros();
    let reference = newton_full(&sys, (&z, &z), 1e-10).unwrap();
    let d = norm_a(&pair.u_star.sub(&reference.solution.u_star), sys.space()).unwrap()
        + norm_a(&pair.v_star.sub(&reference.solution.v_star), sys.space()).unwrap();
    assert!(d < 1e-6);

    let csv = grid_csv(sys.layout(), pair.u_star.as_slice()).unwrap();
    assert_eq!(csv.lines().count(), 11 * 11 + 1);
    let mut buf = Vec::new();
    write_trace_csv(&trace, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with(TRACE_HEADER));
}

#[test]
fn stokes_manufactured_pipeline() {
    let spec = StokesSpec {
        n_per_dim: 11,
        lengths: vec![1.0, 1.0],
        mu_coeff: 2.0,
        nonlinearity: NonlinearitySpec::Sincos { epsilon: 0.1 },
        manufactured: true,
    };
    let sys = build_stokes(&spec).unwrap();
    let (pair, _) = run_scheme(&sys, &SchemeConfig::default()).unwrap();
    assert!(pair.converged);
    let (pu, _) = stokes_manufactured_psi(&spec);
    let err = norm_a(
        &pair.u_star.sub(&sys.space().vector(pu).unwrap()),
        sys.space(),
    )
    .unwrap();
    assert!(err < 1e-6);
    let vel = reconstruct_velocity(pair.u_star.as_slice(), &spec).unwrap();
    let (h, _) = spec.steps();
    let scale = vel.u.amax().max(vel.v.amax()) / h;
    assert!(vel.max_abs_divergence() <= 64.0 * f64::EPSILON * scale);
}
