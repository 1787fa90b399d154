use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::hilbert::{embedding_constant, norm_a};
use crate::hypotheses::{full_report, SamplerSpec};
use crate::scheme::{run_scheme, SchemeConfig};

fn dirichlet(dims: usize, n: usize, c: f64, f: NonlinearitySpec) -> DirichletSpec {
    DirichletSpec {
        dims,
        n_per_dim: n,
        lengths: vec![1.0; dims],
        potential_c: c,
        nonlinearity: f,
    }
}

fn stokes(n: usize, mu: f64, f: NonlinearitySpec) -> StokesSpec {
    StokesSpec {
        n_per_dim: n,
        lengths: vec![1.0, 1.0],
        mu_coeff: mu,
        nonlinearity: f,
        manufactured: false,
    }
}

fn dense(m: &CsrMatrix<f64>) -> nalgebra::DMatrix<f64> {
    let mut d = nalgebra::DMatrix::zeros(m.nrows(), m.ncols());
    for (i, row) in m.row_iter().enumerate() {
        for (&j, &a) in row.col_indices().iter().zip(row.values()) {
            d[(i, j)] += a;
        }
    }
    d
}

#[test]
fn spec_validation() {
    let f = NonlinearitySpec::Zero;
    assert!(build_dirichlet(&dirichlet(3, 5, 0.0, f.clone())).is_err());
    assert!(build_dirichlet(&dirichlet(1, 2, 0.0, f.clone())).is_err());
    assert!(build_dirichlet(&dirichlet(1, 5, -1.0, f.clone())).is_err());
    let mut s = dirichlet(2, 5, 0.0, f.clone());
    s.lengths = vec![1.0];
    assert!(matches!(build_dirichlet(&s), Err(Error::Input(_))));
    assert!(build_stokes(&stokes(4, 1.0, f.clone())).is_err());
    assert!(build_stokes(&stokes(6, 0.0, f.clone())).is_err());
    assert!(build_single_dof(0.0, 1.0, f).is_err());
}

#[test]
fn zero_potential_gives_zero_solution() {
    for sys in [
        build_dirichlet(&dirichlet(2, 6, 1.0, NonlinearitySpec::Zero)).unwrap(),
        build_stokes(&stokes(6, 1.0, NonlinearitySpec::Zero)).unwrap(),
    ] {
        let (pair, _) = run_scheme(&sys, &SchemeConfig::default()).unwrap();
        assert!(pair.converged);
        assert_eq!(pair.u_star.coeffs().amax(), 0.0);
        assert_eq!(pair.v_star.coeffs().amax(), 0.0);
    }
}

#[test]
fn dirichlet_theta_matches_embedding_constant() {
    for (dims, n, c) in [(1, 31, 0.0), (1, 15, 2.0), (2, 9, 0.5)] {
        let spec = dirichlet(dims, n, c, NonlinearitySpec::Zero);
        let sys = build_dirichlet(&spec).unwrap();
        let emb = sys.embedding_constant();
        let lambda1 = spec.theta() - c;
        assert!(spec.theta() >= c + lambda1 * (1.0 - 1e-12));
        assert!((1.0 / (emb * emb) - spec.theta()).abs() < 1e-8 * spec.theta());
        let a = dense(sys.space().operator().matrix());
        assert_eq!(a, a.transpose());
    }
}

#[test]
fn single_dof_reproduces_scalar_example() {
    let sys = build_single_dof(
        2.0,
        1.0,
        NonlinearitySpec::Quadratic {
            a: 0.0,
            b: 0.2,
            c: 0.0,
            g: 1.0,
        },
    )
    .unwrap();
    assert!((sys.embedding_constant() - 0.5f64.sqrt()).abs() < 1e-15);
    assert_eq!(sys.monotony().rows(), vec![vec![0.0, 0.1], vec![0.1, 0.0]]);
    let (pair, _) = run_scheme(&sys, &SchemeConfig::default()).unwrap();
    assert!((pair.u_star.as_slice()[0] - 1.0 / 2.02).abs() < 1e-8);
    assert!((pair.v_star.as_slice()[0] + 0.1 / 2.02).abs() < 1e-8);
}

#[test]
fn sincos_dirichlet_is_ready_and_converges() {
    let sys = build_dirichlet(&dirichlet(
        1,
        31,
        0.0,
        NonlinearitySpec::Sincos { epsilon: 0.1 },
    ))
    .unwrap();
    let rep = full_report(&sys, None, &SamplerSpec::default()).unwrap();
    assert!(rep.ready, "{rep:?}");
    let (pair, _) = run_scheme(&sys, &SchemeConfig::default()).unwrap();
    assert!(pair.converged);
}

#[test]
fn stokes_operator_is_spd_and_stiffens_with_mu() {
    let mut thetas = Vec::new();
    for mu in [0.1, 1.0, 10.0] {
        let spec = stokes(6, mu, NonlinearitySpec::Zero);
        let sys = build_stokes(&spec).unwrap();
        let a = dense(sys.space().operator().matrix());
        assert_eq!(a, a.transpose());
        let eig = a.clone().symmetric_eigenvalues();
        assert!(eig.min() > 0.0);
        let theta = sys.space().operator().theta();
        // the curl Gram matrix is the 5-point form, so θ ≥ λ₁ + μ
        let (h, _) = spec.steps();
        let lambda1 = 2.0 * 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        assert!(
            theta >= (lambda1 + mu) * (1.0 - 1e-9),
            "θ = {theta}, bound {}",
            lambda1 + mu
        );
        thetas.push(theta);
    }
    assert!(thetas.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn stokes_curl_gram_is_scaled_laplacian() {
    let spec = stokes(5, 1.0, NonlinearitySpec::Zero);
    let sys = build_stokes(&spec).unwrap();
    let space = sys.space();
    let (h, _) = spec.steps();
    let neg_l = dense(&csr_from_triplets(25, 25, neg_laplacian(5, 5, h, Some(h))).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let x = DVector::from_fn(25, |_, _| rng.random::<f64>() - 0.5);
        let psi = space.vector(x.clone()).unwrap();
        let l2 = space.l2_mass_norm(&psi).unwrap().powi(2);
        let expected = h * h * x.dot(&(&neg_l * &x));
        assert!((l2 - expected).abs() < 1e-12 * expected);
    }
}

#[test]
fn stokes_interior_stencil_is_thirteen_point() {
    let spec = stokes(7, 1.0, NonlinearitySpec::Zero);
    let n = 7;
    let (h, _) = spec.steps();
    let a = dense(&stokes_operator(&spec).unwrap());
    let h4 = h.powi(4) / (h * h);
    let mu_part = |p: usize, q: usize| -> f64 {
        let l = dense(&csr_from_triplets(49, 49, neg_laplacian(n, n, h, Some(h))).unwrap());
        h * h * l[(p, q)]
    };
    let centre = 3 * n + 3;
    let b = |q: usize| (a[(centre, q)] - mu_part(centre, q)) * h4;
    assert!((b(centre) - 20.0).abs() < 1e-9);
    assert!((b(centre + 1) + 8.0).abs() < 1e-9);
    assert!((b(centre + n + 1) - 2.0).abs() < 1e-9);
    assert!((b(centre + 2) - 1.0).abs() < 1e-9);
    // reflected ghost next to one wall
    let edge = 3 * n;
    let be = (a[(edge, edge)] - mu_part(edge, edge)) * h4;
    assert!((be - 21.0).abs() < 1e-9);
    let corner = 0;
    let bc = (a[(corner, corner)] - mu_part(corner, corner)) * h4;
    assert!((bc - 22.0).abs() < 1e-9);
}

#[test]
fn velocity_reconstruction_basics() {
    let spec = stokes(6, 1.0, NonlinearitySpec::Zero);
    let zero = reconstruct_velocity(&[0.0; 36], &spec).unwrap();
    assert_eq!(zero.u.amax(), 0.0);
    assert_eq!(zero.v.amax(), 0.0);
    assert!(reconstruct_velocity(&[0.0; 35], &spec).is_err());

    // ψ depending on y only: V vanishes away from the side walls
    let psi: Vec<f64> = (0..36).map(|p| ((p / 6) as f64 * 0.7).sin()).collect();
    let vel = reconstruct_velocity(&psi, &spec).unwrap();
    for i in 1..6 {
        for j in 0..8 {
            assert_eq!(vel.v[(i, j)], 0.0);
        }
    }
}

#[test]
fn curl_matches_field_map() {
    let spec = stokes(6, 1.0, NonlinearitySpec::Zero);
    let sys = build_stokes(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x: Vec<f64> = (0..36).map(|_| rng.random::<f64>()).collect();
    let vel = reconstruct_velocity(&x, &spec).unwrap();
    let field = sys
        .space()
        .field(&sys.space().vector_from_slice(&x).unwrap());
    let stag = Staggered { n: 6 };
    for i in 1..=6 {
        for j in 0..=6 {
            assert_eq!(field[stag.u_index(i, j)], vel.u[(i, j)]);
            assert_eq!(field[stag.v_index(j, i)], vel.v[(j, i)]);
        }
    }
    for j in 0..=6 {
        assert_eq!(vel.u[(0, j)], 0.0);
        assert_eq!(vel.u[(7, j)], 0.0);
    }
}

#[test]
fn divergence_vanishes_on_random_stream_functions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [5, 17, 33] {
        let spec = stokes(n, 1.0, NonlinearitySpec::Zero);
        let sys = build_stokes(&spec).unwrap();
        for _ in 0..20 {
            let raw = DVector::from_fn(n * n, |_, _| 2.0 * rng.random::<f64>() - 1.0);
            let vel = reconstruct_velocity(raw.as_slice(), &spec).unwrap();
            // roundoff of differencing velocities of size |U| on a mesh of width h
            let (h, _) = spec.steps();
            let scale = vel.u.amax().max(vel.v.amax()) / h;
            assert!(vel.max_abs_divergence() <= 64.0 * f64::EPSILON * scale);

            // unit energy norm, i.e. a unit velocity field
            let psi = sys.space().vector(raw).unwrap();
            let psi = psi.scaled(1.0 / norm_a(&psi, sys.space()).unwrap());
            let div = reconstruct_velocity(psi.as_slice(), &spec)
                .unwrap()
                .max_abs_divergence();
            assert!(div <= 1e-13, "n = {n}: divergence {div}");
        }
    }
}

#[test]
fn manufactured_stokes_solution_is_recovered() {
    for f in [
        NonlinearitySpec::Zero,
        NonlinearitySpec::Quadratic {
            a: 0.2,
            b: 0.1,
            c: -0.1,
            g: 0.0,
        },
        NonlinearitySpec::Sincos { epsilon: 0.05 },
    ] {
        let mut spec = stokes(9, 1.0, f);
        spec.manufactured = true;
        let sys = build_stokes(&spec).unwrap();
        assert!(sys.growth().is_none());
        let (pair, _) = run_scheme(&sys, &SchemeConfig::default()).unwrap();
        assert!(pair.converged);
        let (pu, pv) = stokes_manufactured_psi(&spec);
        let space = sys.space();
        let eu = norm_a(&pair.u_star.sub(&space.vector(pu).unwrap()), space).unwrap();
        let ev = norm_a(&pair.v_star.sub(&space.vector(pv).unwrap()), space).unwrap();
        assert!(eu + ev < 1e-6, "{:?}: error {}", spec.nonlinearity, eu + ev);
    }
}

#[test]
fn sincos_stokes_run_is_divergence_free() {
    let spec = stokes(17, 1.0, NonlinearitySpec::Sincos { epsilon: 0.05 });
    let sys = build_stokes(&spec).unwrap();
    // a uniform force is a gradient and the zero pair solves the system, so
    // start away from it
    let cfg = SchemeConfig {
        random_init: true,
        seed: 2,
        ..SchemeConfig::default()
    };
    let (pair, trace) = run_scheme(&sys, &cfg).unwrap();
    assert!(pair.converged);
    assert!(trace.rows.len() > 1);
    for psi in [&pair.u_star, &pair.v_star] {
        let div = reconstruct_velocity(psi.as_slice(), &spec)
            .unwrap()
            .max_abs_divergence();
        assert!(div <= 1e-13);
    }
}

#[test]
fn embedding_constant_of_stokes_space_is_consistent() {
    let sys = build_stokes(&stokes(5, 1.0, NonlinearitySpec::Zero)).unwrap();
    let c = embedding_constant(sys.space()).unwrap();
    assert!((c - sys.embedding_constant()).abs() < 1e-12 * c);
    assert!((sys.space().operator().theta() - 1.0 / (c * c)).abs() < 1e-12 / (c * c));
}

fn solve_sincos_1d(n: usize) -> Vec<f64> {
    let sys = build_dirichlet(&dirichlet(
        1,
        n,
        0.0,
        NonlinearitySpec::Sincos { epsilon: 0.1 },
    ))
    .unwrap();
    let cfg = SchemeConfig {
        final_tol: 1e-11,
        ..SchemeConfig::default()
    };
    let (pair, _) = run_scheme(&sys.with_cg_tol(1e-13), &cfg).unwrap();
    assert!(pair.converged);
    pair.u_star.as_slice().to_vec()
}

#[test]
fn refinement_is_second_order() {
    let sols: Vec<Vec<f64>> = [15, 31, 63].iter().map(|&n| solve_sincos_1d(n)).collect();
    let err = |coarse: &[f64], fine: &[f64]| {
        let h = 1.0 / (coarse.len() + 1) as f64;
        let s: f64 = coarse
            .iter()
            .enumerate()
            .map(|(i, c)| (c - fine[2 * i + 1]).powi(2))
            .sum();
        (h * s).sqrt()
    };
    let e1 = err(&sols[0], &sols[1]);
    let e2 = err(&sols[1], &sols[2]);
    let ratio = e1 / e2;
    assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
}

#[test]
fn manufactured_sources_on_dirichlet_grid() {
    let spec = dirichlet(1, 11, 0.0, NonlinearitySpec::Sincos { epsilon: 0.2 });
    let sys = build_dirichlet(&spec).unwrap();
    let u = sys
        .space()
        .vector(DVector::from_fn(11, |i, _| ((i + 1) as f64 * 0.3).sin()))
        .unwrap();
    let v = u.scaled(-0.25);
    let (su, sv) = manufactured_sources(&sys, &u, &v).unwrap();
    let sys = sys.with_sources(su, sv).unwrap();
    let (pair, _) = run_scheme(&sys, &SchemeConfig::default()).unwrap();
    assert!(norm_a(&pair.u_star.sub(&u), sys.space()).unwrap() < 1e-7);
    assert!(norm_a(&pair.v_star.sub(&v), sys.space()).unwrap() < 1e-7);
}

#[test]
fn grid_export() {
    let csv = grid_csv(&Layout::Grid1d { n: 3, h: 0.25 }, &[1.0, 2.0, 3.0]).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x,value");
    assert_eq!(lines[1], "2.5000000000000000e-1,1.0000000000000000e0");
    let csv = grid_csv(
        &Layout::Stream {
            n: 2,
            hx: 0.5,
            hy: 0.5,
        },
        &[0.0; 4],
    )
    .unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(grid_csv(
        &Layout::Grid2d {
            nx: 2,
            ny: 3,
            hx: 1.0,
            hy: 1.0
        },
        &[0.0; 5]
    )
    .is_err());
}
