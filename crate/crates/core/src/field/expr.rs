use std::fmt;
use std::sync::Arc;

use super::special;
use super::FieldError;

/// A coordinate of the time-space `(t, x, y, z)`; indices are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    T,
    X(usize),
    Y(usize),
    Z(usize),
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coord::T => write!(f, "t"),
            Coord::X(i) => write!(f, "x{}", i + 1),
            Coord::Y(i) => write!(f, "y{}", i + 1),
            Coord::Z(i) => write!(f, "z{}", i + 1),
        }
    }
}

/// Set of coordinates referenced by an expression (bitmasks, indices < 64).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CoordSet {
    pub t: bool,
    pub x: u64,
    pub y: u64,
    pub z: u64,
}

impl CoordSet {
    fn single(c: Coord) -> Self {
        let mut s = CoordSet::default();
        match c {
            Coord::T => s.t = true,
            Coord::X(i) => s.x = 1 << i,
            Coord::Y(i) => s.y = 1 << i,
            Coord::Z(i) => s.z = 1 << i,
        }
        s
    }

    fn union(self, o: CoordSet) -> Self {
        CoordSet { t: self.t || o.t, x: self.x | o.x, y: self.y | o.y, z: self.z | o.z }
    }

    pub fn contains(&self, c: Coord) -> bool {
        match c {
            Coord::T => self.t,
            Coord::X(i) => i < 64 && self.x >> i & 1 == 1,
            Coord::Y(i) => i < 64 && self.y >> i & 1 == 1,
            Coord::Z(i) => i < 64 && self.z >> i & 1 == 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.t && self.x == 0 && self.y == 0 && self.z == 0
    }

    /// Highest index + 1 used in each block `(x, y, z)`.
    pub fn extents(&self) -> (usize, usize, usize) {
        let ext = |m: u64| 64 - m.leading_zeros() as usize;
        (ext(self.x), ext(self.y), ext(self.z))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Coord),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Expr, Expr),
    Pow(Expr, f64),
    Exp(Expr),
    Sin(Expr),
    Cos(Expr),
    Tanh(Expr),
    /// `order`-th derivative of `u / (exp(u) - 1)` at `u = arg`; removable singularity at 0.
    GuardedQuot {
        order: u32,
        arg: Expr,
    },
    /// `order`-th derivative of the C-infinity 0-to-1 step at `arg`.
    SmoothStep {
        order: u32,
        arg: Expr,
    },
}

#[derive(Debug)]
struct Inner {
    node: Node,
    coords: CoordSet,
}

/// Immutable, cheaply clonable scalar expression.
#[derive(Clone, Debug)]
pub struct Expr(Arc<Inner>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.node == other.0.node
    }
}

/// Values of the coordinates at which an expression is evaluated.
#[derive(Clone, Copy, Debug)]
pub struct Env<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub z: &'a [f64],
}

impl<'a> Env<'a> {
    pub fn new(t: f64, x: &'a [f64], y: &'a [f64], z: &'a [f64]) -> Self {
        Env { t, x, y, z }
    }

    fn get(&self, c: Coord) -> f64 {
        let pick = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(f64::NAN);
        match c {
            Coord::T => self.t,
            Coord::X(i) => pick(self.x, i),
            Coord::Y(i) => pick(self.y, i),
            Coord::Z(i) => pick(self.z, i),
        }
    }
}

fn build(node: Node) -> Expr {
    let coords = match &node {
        Node::Const(_) => CoordSet::default(),
        Node::Var(c) => CoordSet::single(*c),
        Node::Add(v) | Node::Mul(v) => v.iter().fold(CoordSet::default(), |s, e| s.union(e.coords())),
        Node::Div(a, b) => a.coords().union(b.coords()),
        Node::Pow(a, _)
        | Node::Exp(a)
        | Node::Sin(a)
        | Node::Cos(a)
        | Node::Tanh(a)
        | Node::GuardedQuot { arg: a, .. }
        | Node::SmoothStep { arg: a, .. } => a.coords(),
    };
    Expr(Arc::new(Inner { node, coords }))
}

impl Expr {
    // ---- raw construction (no simplification), used by the parser ----

    pub fn from_node(node: Node) -> Expr {
        build(node)
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn coords(&self) -> CoordSet {
        self.0.coords
    }

    pub fn depends_on(&self, c: Coord) -> bool {
        self.0.coords.contains(c)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// True iff the expression is the literal constant zero.
    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Const(c) if *c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Const(c) if *c == 1.0)
    }

    // ---- simplifying constructors ----

    pub fn constant(c: f64) -> Expr {
        build(Node::Const(c))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(c: Coord) -> Expr {
        build(Node::Var(c))
    }

    pub fn t() -> Expr {
        Expr::var(Coord::T)
    }

    pub fn x(i: usize) -> Expr {
        Expr::var(Coord::X(i))
    }

    pub fn y(i: usize) -> Expr {
        Expr::var(Coord::Y(i))
    }

    pub fn z(i: usize) -> Expr {
        Expr::var(Coord::Z(i))
    }

    /// Flattens nested sums, folds constants, drops zeros. The folded constant goes last.
    pub fn add(terms: impl IntoIterator<Item = Expr>) -> Expr {
        let mut out = Vec::new();
        let mut c = 0.0;
        let mut saw_const = false;
        for e in terms {
            match e.node() {
                Node::Const(v) => {
                    c += v;
                    saw_const = true;
                }
                Node::Add(inner) => {
                    for s in inner {
                        match s.node() {
                            Node::Const(v) => {
                                c += v;
                                saw_const = true;
                            }
                            _ => out.push(s.clone()),
                        }
                    }
                }
                _ => out.push(e),
            }
        }
        if c != 0.0 || (out.is_empty() && saw_const) {
            out.push(Expr::constant(c));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => build(Node::Add(out)),
        }
    }

    /// Flattens nested products, folds constants, drops ones, zero annihilates.
    /// The folded constant goes first.
    pub fn mul(factors: impl IntoIterator<Item = Expr>) -> Expr {
        let mut out = Vec::new();
        let mut c = 1.0;
        for e in factors {
            match e.node() {
                Node::Const(v) => c *= v,
                Node::Mul(inner) => {
                    for s in inner {
                        match s.node() {
                            Node::Const(v) => c *= v,
                            _ => out.push(s.clone()),
                        }
                    }
                }
                _ => out.push(e),
            }
        }
        if c == 0.0 {
            return Expr::zero();
        }
        if c != 1.0 || out.is_empty() {
            out.insert(0, Expr::constant(c));
        }
        match out.len() {
            1 => out.pop().unwrap(),
            _ => build(Node::Mul(out)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::mul([Expr::constant(-1.0), a])
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add([a, Expr::neg(b)])
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            return Expr::zero();
        }
        if b.is_one() {
            return a;
        }
        if let (Some(p), Some(q)) = (a.as_const(), b.as_const()) {
            return Expr::constant(p / q);
        }
        build(Node::Div(a, b))
    }

    pub fn pow(a: Expr, p: f64) -> Expr {
        if p == 0.0 {
            return Expr::one();
        }
        if p == 1.0 {
            return a;
        }
        if let Some(c) = a.as_const() {
            return Expr::constant(c.powf(p));
        }
        build(Node::Pow(a, p))
    }

    pub fn exp(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(c.exp()),
            None => build(Node::Exp(a)),
        }
    }

    pub fn sin(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(c.sin()),
            None => build(Node::Sin(a)),
        }
    }

    pub fn cos(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(c.cos()),
            None => build(Node::Cos(a)),
        }
    }

    pub fn tanh(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::constant(c.tanh()),
            None => build(Node::Tanh(a)),
        }
    }

    /// `u / (exp(u) - 1)` with its removable singularity at `u = 0` guarded.
    pub fn guarded_quot(arg: Expr) -> Expr {
        Expr::guarded_quot_deriv(0, arg)
    }

    pub fn guarded_quot_deriv(order: u32, arg: Expr) -> Expr {
        match arg.as_const() {
            Some(c) => Expr::constant(special::guarded_quotient(order as usize, c)),
            None => build(Node::GuardedQuot { order, arg }),
        }
    }

    pub fn smooth_step(arg: Expr) -> Expr {
        Expr::smooth_step_deriv(0, arg)
    }

    pub fn smooth_step_deriv(order: u32, arg: Expr) -> Expr {
        match arg.as_const() {
            Some(c) => Expr::constant(special::smooth_step(order as usize, c)),
            None => build(Node::SmoothStep { order, arg }),
        }
    }

    // ---- calculus ----

    /// Exact partial derivative with respect to `c`.
    pub fn diff(&self, c: Coord) -> Expr {
        if !self.depends_on(c) {
            return Expr::zero();
        }
        match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(v) => {
                if *v == c {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(ts) => Expr::add(ts.iter().map(|e| e.diff(c))),
            Node::Mul(fs) => {
                let mut terms = Vec::new();
                for (i, fi) in fs.iter().enumerate() {
                    let d = fi.diff(c);
                    if d.is_zero() {
                        continue;
                    }
                    let mut prod: Vec<Expr> = Vec::with_capacity(fs.len());
                    for (j, fj) in fs.iter().enumerate() {
                        prod.push(if i == j { d.clone() } else { fj.clone() });
                    }
                    terms.push(Expr::mul(prod));
                }
                Expr::add(terms)
            }
            Node::Div(a, b) => {
                let da = a.diff(c);
                let db = b.diff(c);
                if db.is_zero() {
                    return Expr::div(da, b.clone());
                }
                let num = Expr::sub(Expr::mul([da, b.clone()]), Expr::mul([a.clone(), db]));
                Expr::div(num, Expr::pow(b.clone(), 2.0))
            }
            Node::Pow(a, p) => Expr::mul([Expr::constant(*p), Expr::pow(a.clone(), p - 1.0), a.diff(c)]),
            Node::Exp(a) => Expr::mul([self.clone(), a.diff(c)]),
            Node::Sin(a) => Expr::mul([Expr::cos(a.clone()), a.diff(c)]),
            Node::Cos(a) => Expr::mul([Expr::constant(-1.0), Expr::sin(a.clone()), a.diff(c)]),
            Node::Tanh(a) => Expr::mul([Expr::sub(Expr::one(), Expr::pow(self.clone(), 2.0)), a.diff(c)]),
            Node::GuardedQuot { order, arg } => {
                Expr::mul([Expr::guarded_quot_deriv(order + 1, arg.clone()), arg.diff(c)])
            }
            Node::SmoothStep { order, arg } => {
                Expr::mul([Expr::smooth_step_deriv(order + 1, arg.clone()), arg.diff(c)])
            }
        }
    }

    /// Iterated partial derivative along `coords`, left to right.
    pub fn diff_many(&self, coords: &[Coord]) -> Expr {
        coords.iter().fold(self.clone(), |e, c| e.diff(*c))
    }

    // ---- evaluation ----

    /// Plain evaluation; non-finite values propagate.
    pub fn eval(&self, env: &Env) -> f64 {
        match self.node() {
            Node::Const(c) => *c,
            Node::Var(v) => env.get(*v),
            Node::Add(ts) => ts.iter().map(|e| e.eval(env)).sum(),
            Node::Mul(fs) => fs.iter().map(|e| e.eval(env)).product(),
            Node::Div(a, b) => a.eval(env) / b.eval(env),
            Node::Pow(a, p) => powf(a.eval(env), *p),
            Node::Exp(a) => a.eval(env).exp(),
            Node::Sin(a) => a.eval(env).sin(),
            Node::Cos(a) => a.eval(env).cos(),
            Node::Tanh(a) => a.eval(env).tanh(),
            Node::GuardedQuot { order, arg } => special::guarded_quotient(*order as usize, arg.eval(env)),
            Node::SmoothStep { order, arg } => special::smooth_step(*order as usize, arg.eval(env)),
        }
    }

    /// Evaluation that reports the path to the first node producing a non-finite value.
    pub fn try_eval(&self, env: &Env) -> Result<f64, FieldError> {
        let mut path = Vec::new();
        self.eval_checked(env, &mut path).map_err(|_| FieldError::NonFinite { path: path.join("/") })
    }

    fn eval_checked(&self, env: &Env, path: &mut Vec<String>) -> Result<f64, ()> {
        let children: Vec<&Expr> = match self.node() {
            Node::Const(_) | Node::Var(_) => vec![],
            Node::Add(v) | Node::Mul(v) => v.iter().collect(),
            Node::Div(a, b) => vec![a, b],
            Node::Pow(a, _)
            | Node::Exp(a)
            | Node::Sin(a)
            | Node::Cos(a)
            | Node::Tanh(a)
            | Node::GuardedQuot { arg: a, .. }
            | Node::SmoothStep { arg: a, .. } => vec![a],
        };
        path.push(self.head().to_string());
        let mut vals = Vec::with_capacity(children.len());
        for (i, ch) in children.iter().enumerate() {
            path.push(format!("{i}"));
            let v = ch.eval_checked(env, path)?;
            path.pop();
            vals.push(v);
        }
        let v = match self.node() {
            Node::Const(c) => *c,
            Node::Var(c) => env.get(*c),
            Node::Add(_) => vals.iter().sum(),
            Node::Mul(_) => vals.iter().product(),
            Node::Div(..) => vals[0] / vals[1],
            Node::Pow(_, p) => powf(vals[0], *p),
            Node::Exp(_) => vals[0].exp(),
            Node::Sin(_) => vals[0].sin(),
            Node::Cos(_) => vals[0].cos(),
            Node::Tanh(_) => vals[0].tanh(),
            Node::GuardedQuot { order, .. } => special::guarded_quotient(*order as usize, vals[0]),
            Node::SmoothStep { order, .. } => special::smooth_step(*order as usize, vals[0]),
        };
        if v.is_finite() {
            path.pop();
            Ok(v)
        } else {
            Err(())
        }
    }

    /// Operator name used in the s-expression form.
    pub fn head(&self) -> &'static str {
        match self.node() {
            Node::Const(_) => "const",
            Node::Var(Coord::T) => "t",
            Node::Var(Coord::X(_)) => "x",
            Node::Var(Coord::Y(_)) => "y",
            Node::Var(Coord::Z(_)) => "z",
            Node::Add(_) => "add",
            Node::Mul(_) => "mul",
            Node::Div(..) => "div",
            Node::Pow(..) => "pow",
            Node::Exp(_) => "exp",
            Node::Sin(_) => "sin",
            Node::Cos(_) => "cos",
            Node::Tanh(_) => "tanh",
            Node::GuardedQuot { .. } => "guarded-quot",
            Node::SmoothStep { .. } => "smoothstep",
        }
    }

    /// Number of nodes (shared subtrees counted once per occurrence).
    pub fn size(&self) -> usize {
        1 + match self.node() {
            Node::Const(_) | Node::Var(_) => 0,
            Node::Add(v) | Node::Mul(v) => v.iter().map(Expr::size).sum(),
            Node::Div(a, b) => a.size() + b.size(),
            Node::Pow(a, _)
            | Node::Exp(a)
            | Node::Sin(a)
            | Node::Cos(a)
            | Node::Tanh(a)
            | Node::GuardedQuot { arg: a, .. }
            | Node::SmoothStep { arg: a, .. } => a.size(),
        }
    }
}

/// Power with integer exponents routed through `powi` so negative bases work.
pub(crate) fn powf(a: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
        a.powi(p as i32)
    } else {
        a.powf(p)
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, o: Expr) -> Expr {
        Expr::add([self, o])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, o: Expr) -> Expr {
        Expr::sub(self, o)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, o: Expr) -> Expr {
        Expr::mul([self, o])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, o: Expr) -> Expr {
        Expr::div(self, o)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::constant(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env1(x: f64) -> ([f64; 1], [f64; 0]) {
        ([x], [])
    }

    #[test]
    fn power_rule() {
        let e = Expr::pow(Expr::x(0), 2.0);
        let d = e.diff(Coord::X(0));
        assert_eq!(d, Expr::mul([Expr::constant(2.0), Expr::x(0)]));
    }

    #[test]
    fn constant_folding_and_identities() {
        assert_eq!(Expr::add([Expr::constant(1.0), Expr::constant(2.0)]), Expr::constant(3.0));
        assert_eq!(Expr::mul([Expr::x(0), Expr::zero()]), Expr::zero());
        assert_eq!(Expr::mul([Expr::one(), Expr::x(0)]), Expr::x(0));
        assert_eq!(Expr::add([Expr::zero(), Expr::x(0)]), Expr::x(0));
        assert_eq!(Expr::x(0).diff(Coord::Y(0)), Expr::zero());
        assert_eq!(Expr::div(Expr::x(0), Expr::one()), Expr::x(0));
        assert_eq!(Expr::pow(Expr::x(0), 0.0), Expr::one());
    }

    #[test]
    fn guarded_node_at_singular_point() {
        // 0.1 * q(1 - 0.1 x) equals (0.1 - 0.01x)/(exp(1 - 0.1x) - 1) away from x = 10.
        let u = Expr::add([Expr::constant(1.0), Expr::mul([Expr::constant(-0.1), Expr::x(0)])]);
        let a = Expr::mul([Expr::constant(0.1), Expr::guarded_quot(u)]);
        let (x, z) = env1(10.0);
        assert_eq!(a.eval(&Env::new(0.0, &x, &[], &z)), 0.1);
        let da = a.diff(Coord::X(0));
        assert!((da.eval(&Env::new(0.0, &x, &[], &z)) - 0.005).abs() < 1e-15);
        let (x, z) = env1(3.0);
        let direct = (0.1 - 0.01 * 3.0) / ((1.0f64 - 0.3).exp() - 1.0);
        assert!((a.eval(&Env::new(0.0, &x, &[], &z)) - direct).abs() < 1e-15);
    }

    #[test]
    fn try_eval_reports_path() {
        let e = Expr::add([Expr::x(0), Expr::div(Expr::one(), Expr::x(0))]);
        let (x, z) = env1(0.0);
        let err = e.try_eval(&Env::new(0.0, &x, &[], &z)).unwrap_err();
        assert_eq!(err.to_string(), "non-finite value at node add/1/div");
    }

    #[test]
    fn coord_tracking() {
        let e = Expr::mul([Expr::x(0), Expr::sin(Expr::y(2)), Expr::t()]);
        let s = e.coords();
        assert!(s.t && s.contains(Coord::X(0)) && s.contains(Coord::Y(2)));
        assert!(!s.contains(Coord::Z(0)));
        assert_eq!(s.extents(), (1, 3, 0));
    }
}
