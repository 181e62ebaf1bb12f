//! Worked cases for each module, checked against closed forms or independent
//! brute-force oracles written here.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use approx::assert_relative_eq;
use levelset_gibbs::catalog::{build_map, eval_family, Observable, PotentialFamily, SmoothMap, Weight};
use levelset_gibbs::geometry::{
    coarea_residual, conic_levelset_integral, generalized_jacobian, grad_log_jacobian, normal_hessian_det,
    CoareaSettings, LevelSetIntegralSpec,
};
use levelset_gibbs::jets::{fd_check, hessian, jacobian, VectorField};
use levelset_gibbs::limits::{
    atomic_limit, barrier_w1_mixture, barrier_w1_point, conic_limit_density, eq13_u_star, find_zeros,
    prop10_trial, s0_for_family, BarrierSpec, MinimizerSearch, ZeroFindingConfig, HESSIAN_FLOOR,
};
use levelset_gibbs::measures::{
    angle_of, rate_fit, tv_histogram, w1_circular, w1_line, AngleDensity, AtomicMeasure, EmpiricalMeasure,
};
use levelset_gibbs::quadrature::{
    c_k_constant, gibbs_cdf, gibbs_moment, gibbs_normalizer, integrate_1d, truncation_radius, GibbsSpec,
    QuadratureSettings,
};
use levelset_gibbs::rng::{standard_normal, SeededGenerator};
use levelset_gibbs::Error;
use statrs::function::erf::erf;

fn quartic() -> SmoothMap {
    build_map("quartic", &BTreeMap::new()).unwrap()
}

fn conic14() -> SmoothMap {
    SmoothMap::conic(1.0, 4.0).unwrap()
}

/// The quartic written out by hand.
fn p(x: f64) -> f64 {
    x * (x - 0.5) * (x - 1.7) * (x - 2.5)
}

fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-6;
    (f(x + h) - f(x - h)) / (2.0 * h)
}

// jets

#[test]
fn quartic_jacobian_at_zero() {
    let j = jacobian(&quartic(), &[0.0]).unwrap();
    assert_relative_eq!(j[(0, 0)], -2.125, epsilon = 1e-14);
    assert_relative_eq!(j[(0, 0)], central(p, 0.0), epsilon = 1e-8);
}

#[test]
fn conic_jacobian_and_hessian_of_energy() {
    let j = jacobian(&conic14(), &[1.0, 0.0]).unwrap();
    assert_eq!((j[(0, 0)], j[(0, 1)]), (2.0, 0.0));
    let h = hessian(&levelset_gibbs::geometry::SquaredNorm(&conic14()), &[1.0, 0.0]).unwrap();
    let expected = [[8.0, 0.0], [0.0, 0.0]];
    for i in 0..2 {
        for k in 0..2 {
            assert_relative_eq!(h[(i, k)], expected[i][k], epsilon = 1e-12);
        }
    }
}

#[test]
fn eq13_curvature_at_third_of_pi() {
    let h = hessian(&PotentialFamily::Eq13.at(0.0), &[PI / 3.0]).unwrap();
    assert_relative_eq!(h[(0, 0)], 9.0, epsilon = 1e-12);
}

#[test]
fn finite_difference_agreement_and_breakpoint_flag() {
    let q = fd_check(&quartic(), &[1.1], 1e-5).unwrap();
    assert!(q.max_rel <= 1e-6 && !q.breakpoint_adjacent);
    let e = fd_check(&PotentialFamily::Eq13.at(0.0), &[PI], 1e-3).unwrap();
    assert!(e.breakpoint_adjacent);
}

// catalog

#[test]
fn catalog_entries() {
    let zeros: Vec<f64> = quartic().known_zeros().iter().map(|z| z[0]).collect();
    assert_eq!(zeros, vec![0.0, 0.5, 1.7, 2.5]);
    let c = conic14();
    assert_eq!((c.d(), c.p()), (2, 1));
    let mut bad = BTreeMap::new();
    bad.insert("a1".to_string(), -1.0);
    bad.insert("a2".to_string(), 4.0);
    assert!(matches!(
        build_map("conic", &bad),
        Err(Error::InvalidParameter(_))
    ));
    assert_eq!(eval_family("eq13", 0.0, 0.0).unwrap(), 1.0);
    assert_relative_eq!(eval_family("eq13", PI / 3.0, 0.0).unwrap(), -1.0, epsilon = 1e-15);
    let barrier = PotentialFamily::Barrier { k_index: 0 };
    assert_eq!(barrier.eval_generic(1.0, 0.37), 0.37);
}

// geometry

#[test]
fn jacobian_values() {
    assert_relative_eq!(
        generalized_jacobian(&conic14(), &[1.0, 0.0]).unwrap(),
        2.0,
        epsilon = 1e-15
    );
    assert_relative_eq!(
        generalized_jacobian(&SmoothMap::strophoid(), &[1.0]).unwrap(),
        2f64.sqrt(),
        epsilon = 1e-15
    );
    let g = grad_log_jacobian(&conic14(), &[1.0, 0.0]).unwrap();
    assert_relative_eq!(g[0], 1.0, epsilon = 1e-14);
    assert_relative_eq!(g[1], 0.0, epsilon = 1e-14);
    let g = grad_log_jacobian(&conic14(), &[0.0, 0.5]).unwrap();
    assert_relative_eq!(g[0], 0.0, epsilon = 1e-14);
    assert_relative_eq!(g[1], 2.0, epsilon = 1e-14);
    assert!(matches!(
        grad_log_jacobian(&conic14(), &[0.0, 0.0]),
        Err(Error::DegenerateJacobian { .. })
    ));
}

#[test]
fn normal_hessian_on_the_ellipse() {
    // Projected Hessian of ‖F‖² on the normal line: 2(∇F·n)² with n = ∇F/|∇F|.
    let oracle = |x: [f64; 2]| {
        let g = [2.0 * x[0], 8.0 * x[1]];
        2.0 * (g[0] * g[0] + g[1] * g[1])
    };
    let c = conic14();
    assert_relative_eq!(
        normal_hessian_det(&c, &[1.0, 0.0], 1e-12).unwrap(),
        8.0,
        epsilon = 1e-12
    );
    assert_relative_eq!(
        normal_hessian_det(&c, &[0.0, 0.5], 1e-12).unwrap(),
        32.0,
        epsilon = 1e-12
    );
    assert_eq!(oracle([1.0, 0.0]), 8.0);
    assert_eq!(oracle([0.0, 0.5]), 32.0);
    assert!(matches!(
        normal_hessian_det(&c, &[0.5, 0.5], 1e-12),
        Err(Error::OffZeroSet { .. })
    ));
}

#[test]
fn level_set_integrals() {
    let spec = |a1, a2, t| LevelSetIntegralSpec {
        a1,
        a2,
        t,
        phi: Observable::One,
        weight: Weight::One,
        nodes: 256,
    };
    for t in [-0.5, 0.0, 2.0] {
        assert_relative_eq!(
            conic_levelset_integral(&spec(1.0, 1.0, t)).unwrap(),
            PI,
            max_relative = 1e-12
        );
    }
    // Periodic trapezoid rule on the explicit parametrisation.
    let n = 20_000;
    let mut oracle = 0.0;
    for i in 0..n {
        let th = 2.0 * PI * i as f64 / n as f64;
        let (c, s) = (th.cos(), th.sin());
        let q = c * c + 4.0 * s * s;
        let r = q.powf(-0.5);
        let dr = -0.5 * q.powf(-1.5) * (6.0 * s * c);
        let speed = (dr * dr + r * r).sqrt();
        let (x1, x2) = (r * c, r * s);
        let jf = 2.0 * (x1 * x1 + 16.0 * x2 * x2).sqrt();
        oracle += speed / jf;
    }
    oracle *= 2.0 * PI / n as f64;
    assert_relative_eq!(
        conic_levelset_integral(&spec(1.0, 4.0, 0.0)).unwrap(),
        oracle,
        max_relative = 1e-10
    );
    assert!(conic_levelset_integral(&spec(1.0, 4.0, -1.0)).is_err());
}

#[test]
fn coarea_circle_closed_form_and_ellipse() {
    let eps: f64 = 0.1;
    let circle = SmoothMap::conic(1.0, 1.0).unwrap();
    let r = coarea_residual(
        &circle,
        2,
        eps,
        Observable::One,
        Weight::One,
        &CoareaSettings::default(),
    )
    .unwrap();
    let closed = PI * (PI * eps).sqrt() / 2.0 * (1.0 + erf(1.0 / eps.sqrt()));
    assert!(r.rel_residual <= 1e-8);
    assert_relative_eq!(r.lhs, closed, max_relative = 1e-8);
    let e = coarea_residual(
        &conic14(),
        2,
        eps,
        Observable::One,
        Weight::One,
        &CoareaSettings::default(),
    )
    .unwrap();
    assert!(e.rel_residual <= 1e-6);
    let coarse = coarea_residual(
        &conic14(),
        2,
        eps,
        Observable::One,
        Weight::One,
        &CoareaSettings::coarse(),
    )
    .unwrap();
    assert!(coarse.rel_residual > e.rel_residual);
}

// quadrature

#[test]
fn quadrature_examples() {
    assert_relative_eq!(
        integrate_1d(|x| x * x, 0.0, 1.0, 1, 4).unwrap(),
        1.0 / 3.0,
        epsilon = 1e-15
    );
    let eps = 0.01;
    let g = integrate_1d(|x| (-x * x / eps).exp(), -2.0, 2.0, 16, 16).unwrap();
    assert_relative_eq!(g, (PI * eps).sqrt(), max_relative = 1e-10);
    // Midpoint sum with 1e7 cells; its error is below 1e-14 here.
    let n = 10_000_000;
    let h = 1.0 / n as f64;
    let riemann: f64 = (0..n)
        .map(|i| (-((i as f64 + 0.5) * h).powi(3)).exp())
        .sum::<f64>()
        * h;
    let v = integrate_1d(|z| (-z.powi(3)).exp(), 0.0, 1.0, 4, 16).unwrap();
    assert_relative_eq!(v, riemann, max_relative = 1e-12);
    assert!((v - 0.8075).abs() < 5e-5);
}

#[test]
fn truncation_radius_cases() {
    let line = SmoothMap::line().growth();
    assert_relative_eq!(
        truncation_radius(line, 2, 1.0, 1e-12),
        1.5 * (1e12f64).ln().sqrt(),
        epsilon = 1e-12
    );
    assert!((truncation_radius(line, 2, 1.0, 1e-12) - 7.89).abs() < 1e-2);
    let q = quartic().growth();
    assert_relative_eq!(truncation_radius(q, 2, 0.5, 1.0), 1.5 * q.r, epsilon = 1e-12);
    let mut last = f64::INFINITY;
    for eps in [10.0, 1.0, 0.1, 1e-3, 1e-6] {
        let r = truncation_radius(q, 2, eps, 1e-12);
        assert!(r <= last && r >= 1.5 * q.r);
        last = r;
    }
}

#[test]
fn gibbs_integrals() {
    let s = QuadratureSettings::default();
    let eps = 0.05;
    let line = GibbsSpec::new(SmoothMap::line(), 2, eps, Weight::One).unwrap();
    assert_relative_eq!(
        gibbs_normalizer(&line, &s).unwrap(),
        (PI * eps).sqrt(),
        max_relative = 1e-10
    );
    assert_relative_eq!(
        gibbs_moment(&line, Observable::CoordPow(0, 2), &s).unwrap(),
        eps / 2.0,
        max_relative = 1e-10
    );
    assert!(gibbs_moment(&line, Observable::Coord(0), &s).unwrap().abs() < 1e-12);

    let q = GibbsSpec::new(quartic(), 2, 1e-2, Weight::One).unwrap();
    let z = gibbs_normalizer(&q, &s).unwrap();
    let fine = gibbs_normalizer(&q, &s.refined(10)).unwrap();
    assert_relative_eq!(z, fine, max_relative = 1e-8);

    let c = GibbsSpec::new(conic14(), 2, 0.1, Weight::Jacobian).unwrap();
    let z = gibbs_normalizer(&c, &s).unwrap();
    let fine = gibbs_normalizer(&c, &s.refined(2)).unwrap();
    assert!(z > 0.0);
    assert_relative_eq!(z, fine, max_relative = 1e-7);
}

#[test]
fn c_k_values() {
    assert_relative_eq!(c_k_constant(1, 2).unwrap(), 0.5, epsilon = 1e-12);
    assert_relative_eq!(c_k_constant(2, 2).unwrap(), 1.0, epsilon = 1e-12);
    assert_relative_eq!(c_k_constant(1, 4).unwrap(), 0.25, epsilon = 1e-12);
}

#[test]
fn gibbs_cdf_examples() {
    let line = GibbsSpec::new(SmoothMap::line(), 2, 0.1, Weight::One).unwrap();
    let g = gibbs_cdf(&line, 4096, 1e-12).unwrap();
    assert!((g.cdf_at(0.0) - 0.5).abs() < 1e-9);
    assert!(g.cdf().windows(2).all(|w| w[1] >= w[0]));
    assert!((g.cdf().last().unwrap() - 1.0).abs() < 1e-9);

    let q = GibbsSpec::new(quartic(), 2, 1e-3, Weight::One).unwrap();
    let peaks = gibbs_cdf(&q, 1 << 16, 1e-12).unwrap().peaks(1e-3);
    assert_eq!(peaks.len(), 4);
    for (p, r) in peaks.iter().zip([0.0, 0.5, 1.7, 2.5]) {
        assert!((p - r).abs() < 1e-2, "peak {p} vs root {r}");
    }
}

// measures

#[test]
fn w1_line_cases() {
    let d0 = AtomicMeasure::new(vec![vec![0.0]], vec![1.0]).unwrap();
    let d1 = AtomicMeasure::new(vec![vec![1.0]], vec![1.0]).unwrap();
    assert_relative_eq!(w1_line(&d0, &d1).unwrap(), 1.0, epsilon = 1e-15);
    let e = EmpiricalMeasure::from_1d(vec![0.3, -1.0, 2.0]).unwrap();
    assert_eq!(w1_line(&e, &e).unwrap(), 0.0);
    let eps: f64 = 0.01;
    let line = GibbsSpec::new(SmoothMap::line(), 2, eps, Weight::One).unwrap();
    let g = gibbs_cdf(&line, 1 << 16, 1e-14).unwrap();
    assert!((w1_line(&g, &d0).unwrap() - (eps / PI).sqrt()).abs() < 1e-6);
}

#[test]
fn w1_circular_cases() {
    let uniform = AngleDensity::from_fn(64, |_| 1.0).unwrap();
    assert!(w1_circular(&uniform, &uniform).unwrap() < 1e-12);
    let a = EmpiricalMeasure::from_1d(vec![0.0]).unwrap();
    let b = EmpiricalMeasure::from_1d(vec![PI / 2.0]).unwrap();
    // brute force over shifts c of ∫|F_a − F_b − c|, with F_a − F_b = 1 on [0, π/2)
    let n = 20_000;
    let best = (0..=200)
        .map(|j| {
            let c = -1.0 + 0.01 * j as f64;
            (0..n)
                .map(|i| {
                    let t = -PI + 2.0 * PI * (i as f64 + 0.5) / n as f64;
                    let d = if (0.0..PI / 2.0).contains(&t) { 1.0 } else { 0.0 };
                    (d - c).abs()
                })
                .sum::<f64>()
                * 2.0
                * PI
                / n as f64
        })
        .fold(f64::INFINITY, f64::min);
    let w = w1_circular(&a, &b).unwrap();
    assert_relative_eq!(w, PI / 2.0, epsilon = 1e-12);
    assert!((w - best).abs() < 1e-3);
}

#[test]
fn tv_histogram_cases() {
    let target = AngleDensity::from_fn(40, |_| 1.0).unwrap();
    let centers = target.cell_centers();
    let at_centers = EmpiricalMeasure::from_1d(centers.clone()).unwrap();
    assert!(tv_histogram(&at_centers, &target, 40).unwrap() <= 1e-12);
    let n = 100_000;
    let stratified: Vec<f64> = (0..n)
        .map(|i| -PI + 2.0 * PI * (i as f64 + 0.5) / n as f64)
        .collect();
    let s = EmpiricalMeasure::from_1d(stratified).unwrap();
    assert!(tv_histogram(&s, &target, 40).unwrap() <= 0.02);
    let half = AngleDensity::from_fn(40, |t| if t < 0.0 { 1.0 } else { 0.0 }).unwrap();
    let right = EmpiricalMeasure::from_1d(vec![0.5, 1.0, 2.0]).unwrap();
    assert_relative_eq!(tv_histogram(&right, &half, 40).unwrap(), 1.0, epsilon = 1e-12);
}

#[test]
fn rate_fit_cases() {
    let eps = [1e-5, 1e-4, 1e-3, 1e-2];
    let f = rate_fit(&eps.map(|e: f64| (e, e.sqrt()))).unwrap();
    assert_relative_eq!(f.slope, 0.5, epsilon = 1e-12);
    assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
    let f = rate_fit(&eps.map(|e| (e, 3.0 * e))).unwrap();
    assert_relative_eq!(f.slope, 1.0, epsilon = 1e-12);
    assert_relative_eq!(f.intercept, 3f64.ln(), epsilon = 1e-12);
    let mut gen = SeededGenerator::new(5);
    let grid: Vec<f64> = (0..20)
        .map(|i| 10f64.powf(-5.0 + 3.0 * i as f64 / 19.0))
        .collect();
    let noisy: Vec<(f64, f64)> = grid
        .iter()
        .map(|&e| (e, e.sqrt() * (1.0 + 0.1 * standard_normal(&mut gen))))
        .collect();
    let f = rate_fit(&noisy).unwrap();
    assert!((0.4..=0.6).contains(&f.slope) && f.r_squared >= 0.95);
}

#[test]
fn angle_cases() {
    assert_eq!(angle_of(1.0, 0.0).unwrap(), 0.0);
    assert_relative_eq!(angle_of(0.0, 0.5).unwrap(), PI / 2.0, epsilon = 1e-15);
    let t = angle_of(-1.0, -1e-18).unwrap();
    assert!((-PI..PI).contains(&t));
    assert_eq!(angle_of(-1.0, 0.0).unwrap(), -PI);
}

// limits

#[test]
fn zero_sets() {
    let zf = ZeroFindingConfig::default();
    let z = find_zeros(&quartic(), &zf).unwrap();
    for (a, b) in z.zeros.iter().zip([0.0, 0.5, 1.7, 2.5]) {
        assert!((a - b).abs() < 1e-10);
    }
    let s = find_zeros(&SmoothMap::strophoid(), &zf).unwrap();
    assert_eq!(s.zeros.len(), 2);
    assert!((s.zeros[0] + 1.0).abs() < 1e-10 && (s.zeros[1] - 1.0).abs() < 1e-10);
    let boxed = SmoothMap::line().with_domain_box(vec![(1.0, 2.0)]);
    assert!(find_zeros(&boxed, &zf).unwrap().zeros.is_empty());
}

#[test]
fn atomic_limits_of_the_quartic() {
    let zf = ZeroFindingConfig::default();
    let u = atomic_limit(&quartic(), Weight::Jacobian, &zf).unwrap();
    for w in u.weights() {
        assert_relative_eq!(*w, 0.25, epsilon = 1e-12);
    }
    let inv: Vec<f64> = [0.0, 0.5, 1.7, 2.5]
        .iter()
        .map(|&r| 1.0 / central(p, r).abs())
        .collect();
    let total: f64 = inv.iter().sum();
    let plain = atomic_limit(&quartic(), Weight::One, &zf).unwrap();
    for (w, i) in plain.weights().iter().zip(&inv) {
        assert_relative_eq!(*w, i / total, max_relative = 1e-8);
    }
    let square = SmoothMap::root_product(&[0.0, 0.0], (-1.0, 1.0));
    assert!(matches!(
        atomic_limit(&square, Weight::One, &zf),
        Err(Error::H1Violation { .. })
    ));
}

#[test]
fn conic_limit_densities() {
    let circle = conic_limit_density(1.0, 1.0, Weight::OnePlusSquaredNorm, 256).unwrap();
    for d in circle.density() {
        assert_relative_eq!(*d, 1.0 / (2.0 * PI), epsilon = 1e-12);
    }
    let ell = conic_limit_density(1.0, 4.0, Weight::Jacobian, 256).unwrap();
    let mass: f64 = ell.density().iter().sum::<f64>() * ell.cell_width();
    assert!((mass - 1.0).abs() < 1e-9);
    let d = ell.density();
    let n = d.len();
    for i in 0..n {
        assert_relative_eq!(d[i], d[n - 1 - i], epsilon = 1e-12);
        assert_relative_eq!(d[i], d[(n + n / 2 - 1 - i) % n], epsilon = 1e-12);
    }
}

#[test]
fn s0_cases() {
    let cfg = MinimizerSearch::default();
    let s = s0_for_family(PotentialFamily::Eq13, 0.0, &cfg, HESSIAN_FLOOR).unwrap();
    let xs = s.positions_1d();
    for (x, e) in xs.iter().zip([-PI, -PI / 3.0, PI / 3.0, PI]) {
        assert!((x - e).abs() < 1e-6);
    }
    for w in s.weights() {
        assert_relative_eq!(*w, 0.25, epsilon = 1e-6);
    }
    let neg = s0_for_family(PotentialFamily::Eq13, -0.1, &cfg, HESSIAN_FLOOR)
        .unwrap()
        .positions_1d();
    assert!(neg.len() == 1 && neg[0] > PI && neg[0] < PI + PI / 6.0);
    let pos = s0_for_family(PotentialFamily::Eq13, 0.1, &cfg, HESSIAN_FLOOR)
        .unwrap()
        .positions_1d();
    assert!(pos.len() == 1 && pos[0] < -PI && pos[0] > -PI - PI / 6.0);
    let (atoms, excess) = prop10_trial(&[-0.4], eq13_u_star(&cfg), &cfg).unwrap();
    let x = atoms.positions_1d();
    assert!(x.len() == 1 && x[0] > PI && x[0] < 7.0 * PI / 6.0 && excess > 0.0);
}

#[test]
fn barrier_cases() {
    let k0 = BarrierSpec { k_index: 0 };
    assert_eq!(barrier_w1_point(0.0, 1.0, k0), 0.5);
    assert_relative_eq!(
        barrier_w1_point(1.0, 1.0, k0),
        1.0 / (1.0 + 1f64.exp()),
        epsilon = 1e-15
    );
    assert!(barrier_w1_point(0.5, 1e-6, k0) <= 1e-10);
    let (w, _) = barrier_w1_mixture(1e6, k0, 64, 16).unwrap();
    assert!((w - 0.5).abs() < 1e-6);
}

#[test]
fn strophoid_preimages_jump_at_zero() {
    let zf = ZeroFindingConfig::default();
    let s = SmoothMap::strophoid();
    assert_eq!(find_zeros(&s, &zf).unwrap().zeros.len(), 2);
    for t in [[0.1, 0.0], [0.0, 0.1], [-0.2, 0.3], [1e-3, -1e-3]] {
        let n = find_zeros(&s.shifted(&t).unwrap(), &zf).unwrap().zeros.len();
        assert!(n <= 1, "t = {t:?} has {n} preimages");
    }
    // sanity: F really is two-valued at ±1
    assert_eq!(s.eval(&[1.0]), s.eval(&[-1.0]));
}
