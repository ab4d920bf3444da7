use crate::field::{Expr, Point};

use super::{Domain, Interval, ModelError, ModelSpec, SignalSpec};

pub const BUILTIN_NAMES: [&str; 6] =
    ["hodgkin-huxley", "toy-cascade", "toy-mexicanhat", "spiral", "rotor-chain-1", "rotor-chain-2"];

pub fn builtin_names() -> &'static [&'static str] {
    &BUILTIN_NAMES
}

/// Optional overrides applied on top of a built-in's defaults.
#[derive(Clone, Debug, Default)]
pub struct BuiltinParams {
    /// Amplitude `a` of the default input `a (1 + sin(2 pi t / T))`.
    pub amplitude: Option<f64>,
    pub period: Option<f64>,
    /// Replaces the default input entirely.
    pub signal: Option<SignalSpec>,
    /// `N x M` diffusion matrix.
    pub sigma: Option<Vec<Vec<Expr>>>,
    pub b: Option<Vec<Expr>>,
    /// Chain length `L` of toy-cascade.
    pub cascade_len: Option<usize>,
}

fn c(v: f64) -> Expr {
    Expr::constant(v)
}

/// `a * x + b`
fn affine(a: f64, x: Expr, b: f64) -> Expr {
    Expr::add([Expr::mul([c(a), x]), c(b)])
}

fn identity_sigma(n: usize) -> Vec<Vec<Expr>> {
    (0..n).map(|i| (0..n).map(|j| c(if i == j { 1.0 } else { 0.0 })).collect()).collect()
}

fn linear_b(n: usize, beta: f64) -> Vec<Expr> {
    (0..n).map(|i| Expr::mul([c(-beta), Expr::z(i)])).collect()
}

/// Gating rate `alpha (1 - y) - beta y`.
fn gate(alpha: Expr, beta: Expr, y: Expr) -> Expr {
    Expr::add([Expr::mul([alpha, Expr::sub(Expr::one(), y.clone())]), Expr::mul([c(-1.0), beta, y])])
}

struct Parts {
    n: usize,
    l: usize,
    f: Vec<Expr>,
    g: Vec<Expr>,
    amplitude: f64,
    period: f64,
    beta: f64,
    y_box: Interval,
}

fn hodgkin_huxley() -> Parts {
    let x = Expr::x(0);
    let y = |i| Expr::y(i);
    let f = Expr::add([
        Expr::mul([c(-36.0), Expr::pow(y(0), 4.0), affine(1.0, x.clone(), 12.0)]),
        Expr::mul([c(-120.0), Expr::pow(y(1), 3.0), y(2), affine(1.0, x.clone(), -120.0)]),
        Expr::mul([c(-0.3), affine(1.0, x.clone(), -10.6)]),
    ]);
    // (0.1 - 0.01x)/(exp(1 - 0.1x) - 1) = 0.1 q(1 - 0.1x) with q(u) = u/(e^u - 1).
    let alpha1 = Expr::mul([c(0.1), Expr::guarded_quot(affine(-0.1, x.clone(), 1.0))]);
    let beta1 = Expr::mul([c(0.125), Expr::exp(Expr::mul([c(-1.0 / 80.0), x.clone()]))]);
    let alpha2 = Expr::guarded_quot(affine(-0.1, x.clone(), 2.5));
    let beta2 = Expr::mul([c(4.0), Expr::exp(Expr::mul([c(-1.0 / 18.0), x.clone()]))]);
    let alpha3 = Expr::mul([c(0.07), Expr::exp(Expr::mul([c(-1.0 / 20.0), x.clone()]))]);
    let beta3 = Expr::div(Expr::one(), Expr::add([Expr::exp(affine(-0.1, x, 3.0)), c(1.0)]));
    let g = vec![gate(alpha1, beta1, y(0)), gate(alpha2, beta2, y(1)), gate(alpha3, beta3, y(2))];
    Parts { n: 1, l: 3, f: vec![f], g, amplitude: 15.0, period: 20.0, beta: 0.5, y_box: Interval::new(0.0, 1.0) }
}

/// Bounded smooth cap: `x^2` on `|x| <= 2`, constant 5 on `|x| >= 3`.
pub(crate) fn capped_square(x: Expr) -> Expr {
    let sq = Expr::pow(x, 2.0);
    let blend = Expr::smooth_step(Expr::mul([c(0.2), Expr::add([sq.clone(), c(-4.0)])]));
    Expr::add([sq.clone(), Expr::mul([Expr::sub(c(5.0), sq), blend])])
}

fn toy_cascade(l: usize) -> Parts {
    let x = Expr::x(0);
    let ysq = Expr::add((0..l).map(|i| Expr::pow(Expr::y(i), 2.0)).chain([c(1.0)]));
    let f = Expr::mul([c(-1.0), ysq, affine(1.0, Expr::pow(x.clone(), 2.0), -1.0), x.clone()]);
    let mut g = vec![Expr::sub(capped_square(x), Expr::y(0))];
    for i in 1..l {
        g.push(Expr::sub(Expr::y(i - 1), Expr::y(i)));
    }
    Parts { n: 1, l, f: vec![f], g, amplitude: 0.5, period: 1.0, beta: 1.0, y_box: Interval::REAL }
}

fn toy_mexicanhat() -> Parts {
    let r2 = Expr::add([Expr::pow(Expr::x(0), 2.0), Expr::pow(Expr::x(1), 2.0)]);
    let damp = Expr::add([Expr::pow(Expr::y(0), 2.0), c(1.0)]);
    let f = (0..2).map(|i| Expr::mul([c(-1.0), damp.clone(), affine(1.0, r2.clone(), -1.0), Expr::x(i)])).collect();
    let g =
        Expr::add([Expr::mul([c(-1.0), affine(1.0, r2.clone(), 1.0), Expr::y(0)]), Expr::sin(affine(1.0, r2, -1.0))]);
    Parts { n: 2, l: 1, f, g: vec![g], amplitude: 0.5, period: 1.0, beta: 1.0, y_box: Interval::REAL }
}

fn spiral() -> Parts {
    let (x, y) = (Expr::x(0), Expr::y(0));
    let r2 = Expr::add([Expr::pow(x.clone(), 2.0), Expr::pow(y.clone(), 2.0)]);
    let f = Expr::sub(Expr::sub(x.clone(), y.clone()), Expr::mul([x.clone(), r2.clone()]));
    let g = Expr::sub(Expr::add([x, y.clone()]), Expr::mul([y, r2]));
    Parts { n: 1, l: 1, f: vec![f], g: vec![g], amplitude: 0.5, period: 1.0, beta: 1.0, y_box: Interval::REAL }
}

/// Interaction `w(q) = sin(q)`.
fn w(a: Expr, b: Expr) -> Expr {
    Expr::sin(Expr::sub(a, b))
}

/// Pinning potential derivative `u(q) = q`.
fn u(q: Expr) -> Expr {
    q
}

const ROTOR_DAMPING: f64 = 0.5;

/// Heat-bath rotor `p' = w(q2 - q) - u(q) - delta p`.
fn bath_rotor(p: Expr, q: Expr, q2: Expr) -> Expr {
    Expr::add([w(q2, q.clone()), Expr::neg(u(q)), Expr::mul([c(-ROTOR_DAMPING), p])])
}

/// Middle rotor `p2' = -[w(q2 - q1) + w(q2 - q3)] - u(q2)`.
fn middle_rotor(q1: Expr, q2: Expr, q3: Expr) -> Expr {
    Expr::add([Expr::neg(w(q2.clone(), q1)), Expr::neg(w(q2.clone(), q3)), Expr::neg(u(q2))])
}

/// One-sided chain: only rotor 1 is driven; `x = p1`, `y = (q1, q2, q3, p2, p3)`.
fn rotor_chain_1() -> Parts {
    let p1 = Expr::x(0);
    let (q1, q2, q3, p2, p3) = (Expr::y(0), Expr::y(1), Expr::y(2), Expr::y(3), Expr::y(4));
    let f = bath_rotor(p1.clone(), q1.clone(), q2.clone());
    let p3dot = Expr::sub(w(q2.clone(), q3.clone()), u(q3.clone()));
    let g = vec![p1, p2, p3, middle_rotor(q1, q2, q3), p3dot];
    Parts { n: 1, l: 5, f: vec![f], g, amplitude: 0.5, period: 1.0, beta: 1.0, y_box: Interval::REAL }
}

/// Two-sided chain: `x = (p1, p3)`, `y = (q1, q2, q3, p2)`.
fn rotor_chain_2() -> Parts {
    let (p1, p3) = (Expr::x(0), Expr::x(1));
    let (q1, q2, q3, p2) = (Expr::y(0), Expr::y(1), Expr::y(2), Expr::y(3));
    let f = vec![bath_rotor(p1.clone(), q1.clone(), q2.clone()), bath_rotor(p3.clone(), q3.clone(), q2.clone())];
    let g = vec![p1, p2, p3, middle_rotor(q1, q2, q3)];
    Parts { n: 2, l: 4, f, g, amplitude: 0.5, period: 1.0, beta: 1.0, y_box: Interval::REAL }
}

/// Builds a built-in model with optional overrides.
pub fn builtin(name: &str, params: &BuiltinParams) -> Result<ModelSpec, ModelError> {
    let parts = match name {
        "hodgkin-huxley" => hodgkin_huxley(),
        "toy-cascade" => {
            let l = params.cascade_len.unwrap_or(1);
            if l == 0 {
                return Err(ModelError::Invalid("toy-cascade needs L >= 1".into()));
            }
            toy_cascade(l)
        }
        "toy-mexicanhat" => toy_mexicanhat(),
        "spiral" => spiral(),
        "rotor-chain-1" => rotor_chain_1(),
        "rotor-chain-2" => rotor_chain_2(),
        other => return Err(ModelError::UnknownModel(other.to_string())),
    };
    let n = parts.n;
    let period = params.period.unwrap_or(parts.period);
    let signal = match &params.signal {
        Some(s) => s.clone(),
        None => SignalSpec::default_sine(n, params.amplitude.unwrap_or(parts.amplitude), period),
    };
    let m = match &params.sigma {
        Some(s) => s.first().map_or(0, Vec::len),
        None => n,
    };
    let spec = ModelSpec {
        name: name.to_string(),
        n,
        l: parts.l,
        m,
        f: parts.f,
        g: parts.g,
        b: params.b.clone().unwrap_or_else(|| linear_b(n, parts.beta)),
        sigma: params.sigma.clone().unwrap_or_else(|| identity_sigma(n)),
        signal,
        period,
        domain: Domain { x: vec![Interval::REAL; n], y: vec![parts.y_box; parts.l], z: vec![Interval::REAL; n] },
    };
    spec.validate()?;
    Ok(spec)
}

/// Zero-input rest state of a model with `N = 1` whose `g_i` is affine in `y_i`
/// alone (the gating form): `y_i*(x) = g_i(x, 0) / (g_i(x, 0) - g_i(x, 1))`
/// and `x*` solves `f(x, y*(x)) = 0`, searched on `[-50, 150]`, nearest to 0.
/// `z* = 0`, which is a rest point of `b` for the built-ins.
pub fn hh_rest_state(m: &ModelSpec) -> Result<Point, ModelError> {
    if m.n != 1 {
        return Err(ModelError::Invalid("rest-state search needs N = 1".into()));
    }
    let ystar = |x: f64| -> Vec<f64> {
        (0..m.l)
            .map(|i| {
                let mut y0 = vec![0.5; m.l];
                y0[i] = 0.0;
                let mut y1 = y0.clone();
                y1[i] = 1.0;
                let xs = [x];
                let env0 = crate::field::Env::new(0.0, &xs, &y0, &[]);
                let env1 = crate::field::Env::new(0.0, &xs, &y1, &[]);
                let a = m.g[i].eval(&env0);
                let ab = a - m.g[i].eval(&env1);
                a / ab
            })
            .collect()
    };
    let h = |x: f64| {
        let (xs, ys) = ([x], ystar(x));
        m.f[0].eval(&crate::field::Env::new(0.0, &xs, &ys, &[]))
    };
    let mut best: Option<f64> = None;
    let step = 0.25;
    let mut a = -50.0;
    while a < 150.0 {
        let b = a + step;
        let (fa, fb) = (h(a), h(b));
        if fa == 0.0 || fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = h(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            let r = 0.5 * (lo + hi);
            if best.is_none_or(|b| r.abs() < b.abs()) {
                best = Some(r);
            }
        }
        a = b;
    }
    let x = best.ok_or_else(|| ModelError::Invalid("no rest state found".into()))?;
    Ok(Point::new(0.0, vec![x], ystar(x), vec![0.0]))
}
