//! Randomized invariants across the library.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use partialcrit::hilbert::{
    embedding_constant, inner_a, norm_a, solve_a, DiscreteSpace, SpdOperator,
};
use partialcrit::hypotheses::{estimate_monotony_for, mu_of, ps_beta, SamplerSpec};
use partialcrit::oracle::fd_gradient_check;
use partialcrit::problems::{
    build_dirichlet, build_single_dof, build_stokes, DirichletSpec, NonlinearitySpec, StokesSpec,
};
use partialcrit::scheme::{
    energy_bounds_check, random_unit_vector, run_scheme, CoupledSystem, SchemeConfig,
};
use partialcrit::zeromatrix::{
    is_convergent_to_zero, simulate_recursion, spectral_radius, verify_dominance, MonotonyMatrix,
};

fn dirichlet(dims: usize, n: usize, c: f64, f: NonlinearitySpec) -> CoupledSystem {
    build_dirichlet(&DirichletSpec {
        dims,
        n_per_dim: n,
        lengths: vec![1.0; dims],
        potential_c: c,
        nonlinearity: f,
    })
    .unwrap()
}

fn bundled() -> Vec<CoupledSystem> {
    vec![
        dirichlet(1, 31, 0.0, NonlinearitySpec::Sincos { epsilon: 0.1 }),
        dirichlet(2, 9, 1.0, NonlinearitySpec::Sincos { epsilon: 0.3 }),
        build_stokes(&StokesSpec {
            n_per_dim: 7,
            lengths: vec![1.0, 1.0],
            mu_coeff: 1.0,
            nonlinearity: NonlinearitySpec::Sincos { epsilon: 0.05 },
            manufactured: false,
        })
        .unwrap(),
    ]
}

/// Random SPD matrix `BᵀB + I` as a space with random positive weights.
fn random_space(rng: &mut ChaCha8Rng, n: usize) -> DiscreteSpace {
    let b = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
    let a = b.transpose() * &b + DMatrix::identity(n, n);
    let triplets: Vec<_> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, a[(i, j)]))
        .collect();
    let op = SpdOperator::from_triplets(n, triplets, 1.0).unwrap();
    let w = DVector::from_fn(n, |_, _| 0.5 + rng.random::<f64>());
    DiscreteSpace::new(op, w).unwrap()
}

fn random_vec(space: &DiscreteSpace, rng: &mut ChaCha8Rng) -> partialcrit::hilbert::HVector {
    let x = DVector::from_fn(space.dim(), |_, _| 2.0 * rng.random::<f64>() - 1.0);
    space.vector(x).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_is_symmetric_and_bilinear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = random_space(&mut rng, 6);
        let (u, v, w) = (random_vec(&space, &mut rng), random_vec(&space, &mut rng), random_vec(&space, &mut rng));
        let uv = inner_a(&u, &v, &space).unwrap();
        let vu = inner_a(&v, &u, &space).unwrap();
        prop_assert!((uv - vu).abs() <= 1e-12 * uv.abs().max(1.0));
        let lhs = inner_a(&u.lin_comb(a, &v, b), &w, &space).unwrap();
        let rhs = a * inner_a(&u, &w, &space).unwrap() + b * inner_a(&v, &w, &space).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0) * (1.0 + a.abs() + b.abs()));
        let cs = norm_a(&u, &space).unwrap() * norm_a(&v, &space).unwrap();
        prop_assert!(uv.abs() <= cs * (1.0 + 1e-12));
    }

    #[test]
    fn solve_inverts_apply(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = random_space(&mut rng, 8);
        let u = random_vec(&space, &mut rng);
        let au = space.operator().apply(u.coeffs());
        let back = solve_a(&au, &space, 1e-12).unwrap();
        let err = norm_a(&back.sub(&u), &space).unwrap();
        prop_assert!(err <= 1e-9 * norm_a(&u, &space).unwrap());
    }

    #[test]
    fn spectral_radius_is_monotone(
        e in proptest::array::uniform4(0.0f64..1.5),
        d in proptest::array::uniform4(0.0f64..0.5),
    ) {
        let m = MonotonyMatrix::two_by_two(e[0], e[1], e[2], e[3]).unwrap();
        let big = MonotonyMatrix::two_by_two(e[0] + d[0], e[1] + d[1], e[2] + d[2], e[3] + d[3]).unwrap();
        prop_assert!(spectral_radius(&m) <= spectral_radius(&big) * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn dominance_accepts_its_own_recursion(
        e in proptest::array::uniform4(0.0f64..0.5),
        seed in any::<u64>(),
    ) {
        let m = MonotonyMatrix::two_by_two(e[0], e[1], e[2], e[3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let x = simulate_recursion(&m, &[1.0, 2.0], &y);
        let rep = verify_dominance(&x, &y, &m, 0.0).unwrap();
        prop_assert!(rep.holds);
    }

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>(), eps in -0.5f64..0.5) {
        let sys = dirichlet(1, 15, 0.5, NonlinearitySpec::Sincos { epsilon: eps });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unit_vector(&sys, &mut rng).unwrap().scaled(2.0);
        let v = random_unit_vector(&sys, &mut rng).unwrap();
        let rep = fd_gradient_check(&sys, &u, &v, 1e-4, seed).unwrap();
        prop_assert!(rep.max_rel_err() <= 1e-5, "{:?}", rep);
    }
}

#[test]
fn characterizations_agree_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 1000 {
        let e: Vec<f64> = (0..4).map(|_| 1.5 * rng.random::<f64>()).collect();
        let m = MonotonyMatrix::two_by_two(e[0], e[1], e[2], e[3]).unwrap();
        let cert = is_convergent_to_zero(&m);
        if (cert.spectral_radius - 1.0).abs() < 1e-3 {
            continue;
        }
        assert!(cert.consistent(), "{m:?}: {cert:?}");
        checked += 1;
    }
}

#[test]
fn structural_beta_is_positive_for_convergent_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 1000 {
        let e: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let m = MonotonyMatrix::two_by_two(e[0], e[1], e[2], e[3]).unwrap();
        if !is_convergent_to_zero(&m).rho_ok {
            continue;
        }
        assert!(ps_beta(&m).unwrap().structural > 0.0, "{m:?}");
        checked += 1;
    }
}

#[test]
fn mu_boundary_matches_exponent_sum() {
    for i in 0..50 {
        for j in 0..50 {
            let (a, b) = (i as f64 * 0.01, j as f64 * 0.01);
            if (a + b - 0.5).abs() < 1e-9 {
                continue;
            }
            assert_eq!(mu_of(a, b).unwrap() < 1.0, a + b < 0.5);
        }
    }
}

#[test]
fn embedding_bound_holds_on_bundled_spaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for sys in bundled() {
        let space = sys.space();
        let c = embedding_constant(space).unwrap();
        for _ in 0..100 {
            let u = random_vec(space, &mut rng);
            let l2 = space.l2_mass_norm(&u).unwrap();
            assert!(l2 <= c * norm_a(&u, space).unwrap() * (1.0 + 1e-6));
        }
    }
}

#[test]
fn trace_invariants_on_bundled_runs() {
    for sys in bundled() {
        for seed in 0..3 {
            let cfg = SchemeConfig {
                random_init: seed > 0,
                seed,
                ..SchemeConfig::default()
            };
            let (pair, trace) = run_scheme(&sys, &cfg).unwrap();
            assert!(pair.converged, "{}", sys.label());
            for r in &trace.rows {
                assert!(r.r1 <= r.t_k && r.r2 <= r.t_k, "{}: {r:?}", sys.label());
                assert!(r.inner_tol <= r.t_k);
            }
            if let Some(g) = sys.growth() {
                let eb = energy_bounds_check(&trace, g);
                assert!(eb.holds, "{}: {eb:?}", sys.label());
            }
        }
    }
}

/// Random scalar quadratic systems: the sampled matrix verdict should agree
/// with whether the scheme actually converges, away from the boundary.
#[test]
fn estimated_matrix_predicts_scheme_outcome() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let sampler = SamplerSpec::default();
    let mut compared = 0;
    let mut attempts = 0;
    while compared < 10 {
        attempts += 1;
        assert!(attempts < 200, "too many borderline draws");
        let f = NonlinearitySpec::Quadratic {
            a: 3.0 * rng.random::<f64>(),
            b: 4.0 * rng.random::<f64>() - 2.0,
            c: -3.0 * rng.random::<f64>(),
            g: 2.0 * rng.random::<f64>() - 1.0,
        };
        let sys = build_single_dof(2.0, 1.0, f).unwrap();
        let est = estimate_monotony_for(&sys, &sampler).unwrap();
        let cert = is_convergent_to_zero(&est);
        if (0.95..=1.05).contains(&cert.spectral_radius) {
            continue;
        }
        let cfg = SchemeConfig {
            override_hypotheses: true,
            max_outer: 2000,
            ..SchemeConfig::default()
        };
        let converged = matches!(run_scheme(&sys, &cfg), Ok((pair, _)) if pair.converged);
        assert_eq!(
            cert.rho_ok,
            converged,
            "{:?}, rho = {}",
            sys.potential(),
            cert.spectral_radius
        );
        compared += 1;
    }
}
