use hypolab_core::control::*;
use hypolab_core::field::{xy_basis, Coord, Expr, VectorFieldExpr};
use hypolab_core::hoermander::Verdict;
use hypolab_core::model::{builtin, hh_rest_state, BuiltinParams, SignalKind, SignalSpec};
use num_rational::BigRational;
use num_traits::Signed;

fn brute_force_kronecker(t: f64, tstar: f64, eps: f64, bound: u64) -> Option<(u64, u64, f64)> {
    for n in 1..=bound {
        for m in 1..=bound * 10 {
            let e = (n as f64 * tstar - m as f64 * t).abs();
            if e < eps {
                return Some((n, m, e));
            }
        }
    }
    None
}

#[test]
fn kronecker_matches_brute_force() {
    for (t, ts, eps) in [(1.0, 2f64.sqrt(), 0.1), (1.0, std::f64::consts::PI, 0.01), (0.7, 3f64.sqrt(), 1e-3)] {
        let hit = kronecker_search(t, ts, eps, 1000).unwrap();
        let (n, m, e) = brute_force_kronecker(t, ts, eps, 1000).unwrap();
        assert_eq!((hit.n, hit.m), (n, m));
        assert!((hit.error - e).abs() < 1e-12);
        // Exact re-check on the f64 inputs.
        let q = |v: f64| BigRational::from_float(v).unwrap();
        let exact =
            (q(ts) * BigRational::from_integer(hit.n.into()) - q(t) * BigRational::from_integer(hit.m.into())).abs();
        assert!(exact < q(eps));
    }
    let h = kronecker_search(1.0, 2f64.sqrt(), 0.1, 1000).unwrap();
    assert!((h.error - 0.0711).abs() < 1e-4);
    let h = kronecker_search(1.0, std::f64::consts::PI, 0.01, 1000).unwrap();
    assert_eq!((h.n, h.m), (7, 22));
    assert!((h.error - 0.0089).abs() < 1e-4);
}

#[test]
fn ode_exponential_decay() {
    let f = VectorFieldExpr::new(vec![Coord::X(0)], vec![-Expr::x(0)]).unwrap();
    let tr = integrate_ode(&f, &[1.0], (0.0, 1.0), &OdeConfig::default()).unwrap();
    assert!((tr.last()[0] - (-1f64).exp()).abs() < 1e-8);
    // Dense output between nodes.
    assert!((tr.at(0.50037)[0] - (-0.50037f64).exp()).abs() < 1e-10);
}

#[test]
fn ode_reports_divergence() {
    let f = VectorFieldExpr::new(vec![Coord::X(0)], vec![Expr::x(0) * Expr::x(0)]).unwrap();
    match integrate_ode(&f, &[1.0], (0.0, 2.0), &OdeConfig::default()) {
        Err(ControlError::Divergence { t, .. }) => assert!(t < 1.01),
        other => panic!("{other:?}"),
    }
}

#[test]
fn spiral_orbit_is_unit_circle() {
    let m = builtin("spiral", &BuiltinParams::default()).unwrap();
    let tr = integrate_ode(&m.big_f(), &[1.0, 0.0], (0.0, 100.0), &OdeConfig::default()).unwrap();
    let worst = tr.states.iter().map(|s| (s[0].hypot(s[1]) - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn hh_equilibrium_is_stationary() {
    let m = builtin("hodgkin-huxley", &BuiltinParams::default()).unwrap();
    let eq = hh_rest_state(&m).unwrap();
    let mut y0 = eq.x.clone();
    y0.extend_from_slice(&eq.y);
    let tr = integrate_ode(&m.big_f(), &y0, (0.0, 50.0), &OdeConfig::default()).unwrap();
    let drift =
        tr.states.iter().map(|s| s.iter().zip(&y0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
    assert!(drift < 1e-4, "{drift}");
    assert_eq!(m.big_f().basis(), xy_basis(1, 3).as_slice());
}

fn spiral_plan(period: Option<f64>) -> (hypolab_core::model::ModelSpec, ControlPlan) {
    let m = builtin("spiral", &BuiltinParams { period, ..Default::default() }).unwrap();
    let meta = PlanMetadata { delta0: Some(0.5), ..Default::default() };
    let target = Target { phi: vec![1.0, 0.0], z: vec![0.4] };
    let plan = plan_attain(&m, &[0.3, -0.5, -0.2], &target, PlanMode::Simple, &meta, &OdeConfig::default()).unwrap();
    (m, plan)
}

#[test]
fn spiral_attainability_and_refinement() {
    let (m, plan) = spiral_plan(None);
    assert_eq!(plan.phases.last().unwrap().name, "rest");
    let c = certify_attainability(&plan, &m, 1e-2, 2000, &OdeConfig::default()).unwrap();
    assert_eq!(c.verdict, Verdict::Pass, "best {} at {}", c.best_distance, c.best_n);
    assert!(c.w_tracking_error < 1e-6, "{}", c.w_tracking_error);
    let fine = certify_attainability(&plan, &m, 1e-2, 2000, &OdeConfig { step: 5e-4 }).unwrap();
    assert!((c.best_distance - fine.best_distance).abs() < 1e-4);
}

#[test]
fn spiral_resonant_grid_fails_without_error() {
    let (m, plan) = spiral_plan(Some(2.0 * std::f64::consts::PI));
    let c = certify_attainability(&plan, &m, 1e-2, 200, &OdeConfig { step: 2e-3 }).unwrap();
    assert_eq!(c.verdict, Verdict::Fail);
    assert!(c.best_distance > 1e-2);
}

#[test]
fn stationary_plan_passes_immediately() {
    let m = builtin("toy-cascade", &BuiltinParams { amplitude: Some(0.0), ..Default::default() }).unwrap();
    // (1, 1) is an equilibrium of the toy cascade with zero input; z* = 0.
    let meta = PlanMetadata { delta0: Some(0.1), ..Default::default() };
    let target = Target { phi: vec![1.0, 1.0], z: vec![0.0] };
    let plan = plan_attain(&m, &[1.0, 1.0, 0.0], &target, PlanMode::Simple, &meta, &OdeConfig::default()).unwrap();
    let c = certify_attainability(&plan, &m, 1e-6, 3, &OdeConfig::default()).unwrap();
    assert_eq!(c.verdict, Verdict::Pass);
    assert_eq!(c.best_n, 1);
}

#[test]
fn closed_loop_reproduces_rho() {
    for name in ["toy-cascade", "spiral", "toy-mexicanhat", "hodgkin-huxley"] {
        let m = builtin(name, &BuiltinParams::default()).unwrap();
        let mut start = vec![0.1; m.state_dim()];
        if name == "hodgkin-huxley" {
            start = hh_rest_state(&m).unwrap().state();
        }
        let target = Target { phi: start[..m.n + m.l].to_vec(), z: vec![0.8; m.n] };
        let meta = PlanMetadata { delta0: Some(0.05), ..Default::default() };
        let plan = plan_attain(&m, &start, &target, PlanMode::Simple, &meta, &OdeConfig::default()).unwrap();
        let n_max = (50.0 / m.period).ceil() as usize;
        let c = certify_attainability(&plan, &m, 1.0, n_max, &OdeConfig::default()).unwrap();
        assert!(c.divergence.is_none(), "{name}");
        assert!(c.w_tracking_error < 1e-6, "{name}: {}", c.w_tracking_error);
        assert!(plan.rho.sup_derivative_bound() <= 0.05 + 1e-15);
    }
}

#[test]
fn local_plan_on_toy_cascade() {
    let m = builtin("toy-cascade", &BuiltinParams::default()).unwrap();
    let meta = PlanMetadata {
        orbit: Some(vec![vec![1.0, 1.0]]),
        eps_star: Some(0.2),
        delta_eps: Some(0.1),
        x_star: Some(SignalSpec { period: 1.0, components: vec![SignalKind::Constant { value: 1.0 }] }),
        t1: Some(2.0),
        ..Default::default()
    };
    let target = Target { phi: vec![1.0, 1.0], z: vec![-0.5] };
    let plan = plan_attain(&m, &[-1.5, 3.0, 2.0], &target, PlanMode::Local, &meta, &OdeConfig::default()).unwrap();
    let names: Vec<&str> = plan.phases.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names, ["relocate", "wait", "settle", "rest"]);
    let t2 = plan.phases[2].start;
    assert!(plan.rho.sampled_sup_derivative(t2, plan.rest_time, 20_000) < 0.1);
    let n_max = (plan.rest_time / m.period) as usize + 20;
    let c = certify_attainability(&plan, &m, 0.1, n_max, &OdeConfig::default()).unwrap();
    assert!(c.u_tracking_error.unwrap() < 1e-6, "{:?}", c.u_tracking_error);
    assert!(c.w_tracking_error < 1e-6, "{}", c.w_tracking_error);
    assert_eq!(c.verdict, Verdict::Pass, "{}", c.best_distance);
}

#[test]
fn local_plan_missing_metadata() {
    let m = builtin("toy-cascade", &BuiltinParams::default()).unwrap();
    let target = Target { phi: vec![1.0, 1.0], z: vec![0.0] };
    let r = plan_attain(&m, &[0.0; 3], &target, PlanMode::Local, &PlanMetadata::default(), &OdeConfig::default());
    assert!(matches!(r, Err(ControlError::Metadata(_))));
}

#[test]
fn periodic_plan_on_mexican_hat() {
    let m = builtin("toy-mexicanhat", &BuiltinParams { amplitude: Some(0.0), ..Default::default() }).unwrap();
    let s = |phase| SignalKind::Sinusoids {
        offset: 0.0,
        terms: vec![hypolab_core::model::SineTerm { amplitude: 1.0, frequency: 1.0, phase }],
    };
    let s_star =
        SignalSpec { period: 2.0 * std::f64::consts::PI, components: vec![s(std::f64::consts::FRAC_PI_2), s(0.0)] };
    let meta = PlanMetadata { delta0: Some(0.3), s_star: Some(s_star), ..Default::default() };
    let target = Target { phi: vec![0.0, -1.0, 0.0], z: vec![0.5, 0.5] };
    let plan =
        plan_attain(&m, &[0.3, 0.2, 0.1, 0.0, 0.0], &target, PlanMode::Periodic, &meta, &OdeConfig::default()).unwrap();
    let c = certify_attainability(&plan, &m, 5e-2, 1500, &OdeConfig { step: 2e-3 }).unwrap();
    assert!(c.w_tracking_error < 1e-6);
    assert_eq!(c.verdict, Verdict::Pass, "{} at {}", c.best_distance, c.best_n);

    let commensurable =
        PlanMetadata { s_star: Some(SignalSpec { period: 2.0, components: vec![s(0.0), s(0.0)] }), ..meta };
    assert!(matches!(
        plan_attain(&m, &[0.0; 5], &target, PlanMode::Periodic, &commensurable, &OdeConfig::default()),
        Err(ControlError::Incommensurability { p: 2, q: 1, .. })
    ));
}
