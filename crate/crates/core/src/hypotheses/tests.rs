use super::*;
use crate::problems::{build_dirichlet, build_single_dof, DirichletSpec, Monomial};

fn sampler() -> SamplerSpec {
    SamplerSpec::default()
}

fn sincos_31(eps: f64) -> CoupledSystem {
    build_dirichlet(&DirichletSpec {
        dims: 1,
        n_per_dim: 31,
        lengths: vec![1.0],
        potential_c: 0.0,
        nonlinearity: NonlinearitySpec::Sincos { epsilon: eps },
    })
    .unwrap()
}

fn growth(a: f64, b: f64, c: f64) -> GrowthParams {
    GrowthParams::new(a, b, c).unwrap()
}

#[test]
fn growth_of_zero_and_sincos() {
    let rep = check_growth(&NonlinearitySpec::Zero, &growth(0.0, 0.0, 0.0), &sampler()).unwrap();
    assert!(rep.ok && rep.witness.is_none());
    assert_eq!(rep.c_hat, 0.0);
    let f = NonlinearitySpec::Sincos { epsilon: 0.1 };
    let rep = check_growth(&f, &growth(0.0, 0.0, 0.1), &sampler()).unwrap();
    assert!(rep.ok);
    assert!(rep.c_hat <= 0.1 && rep.c_hat > 0.09);
}

#[test]
fn growth_violation_has_witness() {
    let f = NonlinearitySpec::Custom {
        terms: vec![Monomial {
            coef: 1.0,
            px: 2,
            py: 0,
        }],
    };
    let c = 0.1;
    let rep = check_growth(&f, &growth(0.4, 0.0, c), &sampler()).unwrap();
    assert!(!rep.ok);
    let [x, y, v] = rep.witness.unwrap();
    assert_eq!(v, x * x);
    assert!(x.abs() > (c / 0.6).sqrt());
    assert!(v > 0.4 * x * x + c && y.abs() <= 2.0);
    assert!(rep.alpha_upper_hat > 0.4);
}

#[test]
fn monotony_estimates() {
    let zero = estimate_monotony(&NonlinearitySpec::Zero, &sampler()).unwrap();
    assert_eq!(zero, MonotonyMatrix::zeros(2));

    // F_x = L x, F_y = −L y
    let l = 0.7;
    let f = NonlinearitySpec::Quadratic {
        a: l,
        b: 0.0,
        c: -l,
        g: 0.3,
    };
    let m = estimate_monotony(&f, &sampler()).unwrap();
    assert!((m.get(0, 0) - l).abs() < 1e-12 && (m.get(1, 1) - l).abs() < 1e-12);
    assert_eq!((m.get(0, 1), m.get(1, 0)), (0.0, 0.0));

    let eps = 0.1;
    let m = estimate_monotony(&NonlinearitySpec::Sincos { epsilon: eps }, &sampler()).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!(
                m.get(i, j) <= eps * (1.0 + 1e-12),
                "m[{i}][{j}] = {}",
                m.get(i, j)
            );
        }
    }
    assert!(m.get(0, 0) > 0.9 * eps && m.get(1, 1) > 0.9 * eps);
}

#[test]
fn scaled_estimate_uses_embedding_constant() {
    let sys = sincos_31(0.1);
    let c = sys.embedding_constant();
    let raw = estimate_monotony(sys.potential(), &sampler()).unwrap();
    let scaled = estimate_monotony_for(&sys, &sampler()).unwrap();
    assert_eq!(scaled, raw.scaled(c * c).unwrap());
}

#[test]
fn mu_examples() {
    assert_eq!(mu_of(0.0, 0.3).unwrap(), 0.0);
    assert!((mu_of(0.2, 0.2).unwrap() - 0.04 / 0.09).abs() < 1e-15);
    assert_eq!(mu_of(0.25, 0.25).unwrap(), 1.0);
    assert!(matches!(mu_of(0.5, 0.1), Err(Error::Domain(_))));
    assert!(matches!(mu_of(0.1, -0.1), Err(Error::Domain(_))));
}

#[test]
fn mu_below_one_iff_sum_below_half() {
    let grid: Vec<f64> = (0..50).map(|i| i as f64 / 100.0).collect();
    for &a in &grid {
        for &b in &grid {
            if (a + b - 0.5).abs() < 1e-12 {
                continue;
            }
            assert_eq!(mu_of(a, b).unwrap() < 1.0, a + b < 0.5, "a = {a}, b = {b}");
        }
    }
}

#[test]
fn ps_beta_examples() {
    let b = ps_beta(&MonotonyMatrix::zeros(2)).unwrap();
    assert_eq!((b.literal, b.structural), (1.0, 1.0));
    let b = ps_beta(&MonotonyMatrix::two_by_two(0.3, 0.0, 0.0, 0.0).unwrap()).unwrap();
    assert!((b.literal - (1.0 - 0.3 - 0.09 / 0.7)).abs() < 1e-15);
    assert!((b.structural - 0.7).abs() < 1e-15);
    let b = ps_beta(&MonotonyMatrix::two_by_two(0.3, 0.2, 0.1, 0.4).unwrap()).unwrap();
    assert!((b.structural - (0.7 - 0.02 / 0.6)).abs() < 1e-15);
    let bad = MonotonyMatrix::two_by_two(0.9, 0.5, 0.5, 0.9).unwrap();
    assert!(matches!(ps_beta(&bad), Err(Error::Domain(_))));
}

#[test]
fn mountain_pass_on_zero_potential_splits_by_norm() {
    let sys = sincos_31(0.0);
    let s = SamplerSpec {
        n_points: 400,
        ..sampler()
    };
    let rep = check_mountain_pass_i1(&sys, 1.0, &s).unwrap();
    assert!(rep.fraction > 0.0 && rep.fraction < 1.0);
    // with N ≡ 0 a sample passes iff the random split gives |u| > |v|
    let mut rng = s.rng();
    let mut expected = 0;
    for _ in 0..s.n_points {
        let split: f64 = rng.random();
        random_unit_vector(&sys, &mut rng).unwrap();
        random_unit_vector(&sys, &mut rng).unwrap();
        if split > 0.5 {
            expected += 1;
        }
    }
    assert_eq!(rep.fraction, expected as f64 / s.n_points as f64);

    let tiny = check_mountain_pass_i1(&sincos_31(1e-9), 1.0, &s).unwrap();
    assert!((tiny.fraction - rep.fraction).abs() <= 0.01);
}

#[test]
fn mountain_pass_on_scalar_quadratic() {
    let f = NonlinearitySpec::Quadratic {
        a: 0.0,
        b: 0.2,
        c: 0.0,
        g: 0.0,
    };
    let sys = build_single_dof(1.0, 1.0, f).unwrap();
    let s = SamplerSpec {
        n_points: 300,
        ..sampler()
    };
    let tau = 0.8;
    let rep = check_mountain_pass_i1(&sys, tau, &s).unwrap();
    let mut rng = s.rng();
    let mut expected = 0;
    for _ in 0..s.n_points {
        let split: f64 = rng.random();
        let du = random_unit_vector(&sys, &mut rng).unwrap().as_slice()[0];
        let dv = random_unit_vector(&sys, &mut rng).unwrap().as_slice()[0];
        let (u, v) = (split * tau * du, (1.0 - split) * tau * dv);
        if 0.2 * u * v < 0.5 * tau * (u.abs() - v.abs()) {
            expected += 1;
        }
    }
    assert_eq!(rep.fraction, expected as f64 / s.n_points as f64);
}

#[test]
fn full_report_verdicts() {
    let rep = full_report(&sincos_31(0.1), None, &sampler()).unwrap();
    assert!(rep.ready, "{rep:?}");
    assert_eq!(rep.mu, Some(0.0));
    assert!(rep.notes.iter().any(|n| n.contains("falsify")));

    let zero = full_report(&sincos_31(0.0), None, &sampler()).unwrap();
    assert!(zero.ready);
    assert_eq!(zero.monotony_estimate, Some(MonotonyMatrix::zeros(2)));

    let quartic = NonlinearitySpec::Custom {
        terms: vec![Monomial {
            coef: 1.0,
            px: 2,
            py: 2,
        }],
    };
    let sys = build_dirichlet(&DirichletSpec {
        dims: 1,
        n_per_dim: 15,
        lengths: vec![1.0],
        potential_c: 0.0,
        nonlinearity: quartic,
    })
    .unwrap();
    let wide = SamplerSpec {
        box_radius: 5.0,
        ..sampler()
    };
    let rep = full_report(&sys, Some(&growth(0.1, 0.1, 1.0)), &wide).unwrap();
    assert!(!rep.ready);
    let g = rep.growth.unwrap();
    assert!(!g.ok && g.witness.is_some());
}

#[test]
fn falsified_declaration_is_not_ready() {
    let sys = sincos_31(0.1)
        .with_monotony(MonotonyMatrix::two_by_two(1e-6, 1e-6, 1e-6, 1e-6).unwrap())
        .unwrap();
    let rep = full_report(&sys, None, &sampler()).unwrap();
    assert!(!rep.estimate_within_declared && !rep.ready);
}

#[test]
fn reports_are_deterministic() {
    let sys = sincos_31(0.1);
    let s = SamplerSpec {
        seed: 17,
        ..sampler()
    };
    let a = full_report(&sys, None, &s).unwrap();
    let b = full_report(&sys, None, &s).unwrap();
    assert_eq!(a, b);
}

#[test]
fn toggles_skip_sampling() {
    let sys = sincos_31(0.1)
        .with_monotony(MonotonyMatrix::two_by_two(1e-6, 1e-6, 1e-6, 1e-6).unwrap())
        .unwrap();
    let toggles = ReportToggles {
        growth: false,
        monotony: false,
    };
    let rep = full_report_with(&sys, None, &sampler(), toggles).unwrap();
    assert!(rep.ready && rep.growth.is_none() && rep.monotony_estimate.is_none());
    assert!(rep.notes.iter().any(|n| n.contains("switched off")));
}
