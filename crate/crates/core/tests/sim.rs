use hypolab_core::control::{integrate_ode, OdeConfig};
use hypolab_core::field::Expr;
use hypolab_core::model::{builtin, hh_rest_state, BuiltinParams, Domain, ModelSpec, SignalSpec};
use hypolab_core::sim::*;

fn quiet(name: &str) -> ModelSpec {
    let p = BuiltinParams { sigma: Some(vec![vec![Expr::zero()]]), ..Default::default() };
    builtin(name, &p).unwrap()
}

/// `dZ = -Z dt + s dW` with passive `x`, `y`.
fn ou(s: f64) -> ModelSpec {
    ModelSpec {
        name: "ou".into(),
        n: 1,
        l: 1,
        m: 1,
        f: vec![Expr::zero()],
        g: vec![-Expr::y(0)],
        b: vec![-Expr::z(0)],
        sigma: vec![vec![Expr::constant(s)]],
        signal: SignalSpec::zero(1, 1.0),
        period: 1.0,
        domain: Domain::unbounded(1, 1),
    }
}

#[test]
fn zero_noise_matches_rk4() {
    for (name, start) in [("toy-cascade", [0.5, -0.3, 0.2]), ("spiral", [0.3, -0.5, -0.2])] {
        let m = quiet(name);
        let cfg = SimConfig { dt: 1e-4, horizon: 10.0, stride: 100, ..Default::default() };
        let p = simulate_path(&m, &start, &cfg).unwrap();
        let tr = integrate_ode(&m.derived().drift, &start, (0.0, 10.0), &OdeConfig::default()).unwrap();
        let err = p
            .times
            .iter()
            .zip(&p.states)
            .map(|(&t, s)| tr.at(t).iter().zip(s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        assert!(err < 5e-3, "{name}: {err}");
    }
}

#[test]
fn increments_have_degenerate_scaling() {
    let m = builtin("toy-cascade", &BuiltinParams::default()).unwrap();
    let dt = 1e-4;
    let cfg = SimConfig { dt, horizon: 2.0, seed: 3, ..Default::default() };
    let p = simulate_path(&m, &[0.5, 0.5, 0.0], &cfg).unwrap();
    let (mut dy, mut dxz, mut dz) = (0.0f64, 0.0f64, 0.0f64);
    let (mut sup_f, mut sup_g) = (0.0f64, 0.0f64);
    for w in p.states.windows(2) {
        let fg = m.eval_big_f(&w[0][..1], &w[0][1..2]);
        sup_f = sup_f.max(fg[0].abs());
        sup_g = sup_g.max(fg[1].abs());
        dy = dy.max((w[1][1] - w[0][1]).abs() / dt);
        dxz = dxz.max(((w[1][0] - w[1][2]) - (w[0][0] - w[0][2])).abs() / dt);
        dz = dz.max((w[1][2] - w[0][2]).abs() / dt.sqrt());
    }
    assert!(dy <= 1.1 * sup_g, "{dy} vs {sup_g}");
    assert!(dxz <= 1.1 * sup_f, "{dxz} vs {sup_f}");
    assert!(dz > 2.0, "{dz}");
}

#[test]
fn batch_is_deterministic_per_pair() {
    let m = builtin("spiral", &BuiltinParams::default()).unwrap();
    let starts = vec![vec![0.0; 3], vec![1.0, 0.0, 0.5]];
    let cfg = SimConfig { dt: 1e-3, horizon: 1.0, stride: 10, ..Default::default() };
    let seeds = [11, 12, 13];
    let batch = simulate_batch(&m, &starts, &cfg, &seeds).unwrap();
    assert_eq!(batch.len(), 6);
    for (k, item) in batch.iter().enumerate() {
        assert_eq!((item.start_index, item.seed), (k / 3, seeds[k % 3]));
        let serial =
            simulate_path(&m, &starts[item.start_index], &SimConfig { seed: item.seed, ..cfg.clone() }).unwrap();
        assert_eq!(item.result.as_ref().unwrap(), &serial);
    }
    let again = simulate_batch(&m, &starts, &cfg, &seeds).unwrap();
    assert_eq!(batch, again);
}

#[test]
fn batch_reports_per_path_errors() {
    let m = builtin("hodgkin-huxley", &BuiltinParams::default()).unwrap();
    let good = hh_rest_state(&m).unwrap().state();
    let mut bad = good.clone();
    bad[1] = 2.0;
    let cfg = SimConfig { dt: 1e-3, horizon: 0.1, ..Default::default() };
    let b = simulate_batch(&m, &[good, bad], &cfg, &[1]).unwrap();
    assert!(b[0].result.is_ok());
    assert!(b[1].result.is_err());
}

#[test]
fn divergence_is_reported() {
    let mut m = ou(0.0);
    m.b = vec![Expr::pow(Expr::z(0), 2.0)];
    let cfg = SimConfig { dt: 1e-2, horizon: 10.0, ..Default::default() };
    match simulate_path(&m, &[0.0, 0.0, 2.0], &cfg) {
        Err(SimError::Divergence { t }) => assert!(t < 1.0, "{t}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn ou_mean_within_three_standard_errors() {
    let m = ou(1.0);
    let cfg = SimConfig { dt: 1e-3, horizon: 1.0, stride: 1000, ..Default::default() };
    let seeds: Vec<u64> = (0..1000).map(|i| derive_seed(5, 0, i)).collect();
    let b = simulate_batch(&m, &[vec![0.0, 0.0, 1.0]], &cfg, &seeds).unwrap();
    let z: Vec<f64> = b.iter().map(|i| i.result.as_ref().unwrap().states.last().unwrap()[2]).collect();
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let exact = (-1f64).exp();
    assert!((mean - exact).abs() < 3.0 * sd / n.sqrt(), "{mean} vs {exact}");
    // Stationary-variance check: Var Z_1 = (1 - e^-2) / 2.
    assert!((sd * sd - (1.0 - (-2f64).exp()) / 2.0).abs() < 0.05);
}

#[test]
fn weak_error_is_first_order() {
    let m = ou(0.05);
    let seeds: Vec<u64> = (0..4000).map(|i| derive_seed(9, 1, i)).collect();
    let exact = (-1f64).exp();
    let errs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| {
            let cfg = SimConfig { dt, horizon: 1.0, ..Default::default() };
            let b = simulate_batch(&m, &[vec![0.0, 0.0, 1.0]], &cfg, &seeds).unwrap();
            let mean = b.iter().map(|i| i.result.as_ref().unwrap().states.last().unwrap()[2]).sum::<f64>()
                / seeds.len() as f64;
            (mean - exact).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!((1.5..2.7).contains(&r), "{errs:?}");
    }
}

#[test]
fn hh_gates_stay_in_unit_box() {
    let m = builtin("hodgkin-huxley", &BuiltinParams::default()).unwrap();
    let start = hh_rest_state(&m).unwrap().state();
    let cfg = SimConfig { dt: 1e-3, horizon: 200.0, stride: 10, seed: 8, ..Default::default() };
    let p = simulate_path(&m, &start, &cfg).unwrap();
    for s in &p.states {
        for &y in &s[1..4] {
            assert!((-1e-3..=1.0 + 1e-3).contains(&y), "{y}");
        }
    }
    let clamped = simulate_path(&m, &start, &cfg.clone().clamp_y(1, 3)).unwrap();
    assert_eq!(clamped.clamp_events.iter().sum::<u64>(), 0);
    assert_eq!(clamped.states, p.states);
}

#[test]
fn csv_export_is_round_trip_exact() {
    let m = builtin("spiral", &BuiltinParams::default()).unwrap();
    let cfg = SimConfig { dt: 1e-2, horizon: 1.0, stride: 10, seed: 2, ..Default::default() };
    let p = simulate_path(&m, &[0.1, 0.2, 0.3], &cfg).unwrap();
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x1,y1,z1"));
    for (line, s) in lines.zip(&p.states) {
        let v: Vec<f64> = line.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
        assert_eq!(&v, s);
    }
}
