//! Postfix tapes for evaluating expressions in hot loops (simulation, ODE steps).

use super::expr::{powf, Coord, Env, Expr, Node};
use super::special;

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Var(Coord),
    Add(usize),
    Mul(usize),
    Div,
    Pow(f64),
    Exp,
    Sin,
    Cos,
    Tanh,
    GuardedQuot(usize),
    SmoothStep(usize),
}

#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
}

impl Tape {
    pub fn compile(e: &Expr) -> Tape {
        let mut ops = Vec::new();
        emit(e, &mut ops);
        Tape { ops }
    }

    pub fn eval(&self, env: &Env, stack: &mut Vec<f64>) -> f64 {
        stack.clear();
        for op in &self.ops {
            match op {
                Op::Const(c) => stack.push(*c),
                Op::Var(c) => stack.push(match c {
                    Coord::T => env.t,
                    Coord::X(i) => env.x[*i],
                    Coord::Y(i) => env.y[*i],
                    Coord::Z(i) => env.z[*i],
                }),
                Op::Add(n) => {
                    let k = stack.len() - n;
                    let s: f64 = stack[k..].iter().sum();
                    stack.truncate(k);
                    stack.push(s);
                }
                Op::Mul(n) => {
                    let k = stack.len() - n;
                    let s: f64 = stack[k..].iter().product();
                    stack.truncate(k);
                    stack.push(s);
                }
                Op::Div => {
                    let b = stack.pop().unwrap();
                    let a = stack.last_mut().unwrap();
                    *a /= b;
                }
                Op::Pow(p) => {
                    let a = stack.last_mut().unwrap();
                    *a = powf(*a, *p);
                }
                Op::Exp => unary(stack, f64::exp),
                Op::Sin => unary(stack, f64::sin),
                Op::Cos => unary(stack, f64::cos),
                Op::Tanh => unary(stack, f64::tanh),
                Op::GuardedQuot(k) => {
                    let a = stack.last_mut().unwrap();
                    *a = special::guarded_quotient(*k, *a);
                }
                Op::SmoothStep(k) => {
                    let a = stack.last_mut().unwrap();
                    *a = special::smooth_step(*k, *a);
                }
            }
        }
        stack[0]
    }
}

fn unary(stack: &mut [f64], f: fn(f64) -> f64) {
    let a = stack.last_mut().unwrap();
    *a = f(*a);
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    match e.node() {
        Node::Const(c) => ops.push(Op::Const(*c)),
        Node::Var(c) => ops.push(Op::Var(*c)),
        Node::Add(v) => {
            v.iter().for_each(|s| emit(s, ops));
            ops.push(Op::Add(v.len()));
        }
        Node::Mul(v) => {
            v.iter().for_each(|s| emit(s, ops));
            ops.push(Op::Mul(v.len()));
        }
        Node::Div(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(Op::Div);
        }
        Node::Pow(a, p) => {
            emit(a, ops);
            ops.push(Op::Pow(*p));
        }
        Node::Exp(a) => {
            emit(a, ops);
            ops.push(Op::Exp);
        }
        Node::Sin(a) => {
            emit(a, ops);
            ops.push(Op::Sin);
        }
        Node::Cos(a) => {
            emit(a, ops);
            ops.push(Op::Cos);
        }
        Node::Tanh(a) => {
            emit(a, ops);
            ops.push(Op::Tanh);
        }
        Node::GuardedQuot { order, arg } => {
            emit(arg, ops);
            ops.push(Op::GuardedQuot(*order as usize));
        }
        Node::SmoothStep { order, arg } => {
            emit(arg, ops);
            ops.push(Op::SmoothStep(*order as usize));
        }
    }
}

/// A list of compiled scalar expressions evaluated together.
#[derive(Clone, Debug)]
pub struct CompiledExprs {
    tapes: Vec<Tape>,
}

impl CompiledExprs {
    pub fn new<'a>(exprs: impl IntoIterator<Item = &'a Expr>) -> Self {
        CompiledExprs { tapes: exprs.into_iter().map(Tape::compile).collect() }
    }

    pub fn len(&self) -> usize {
        self.tapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tapes.is_empty()
    }

    pub fn eval_into(&self, env: &Env, stack: &mut Vec<f64>, out: &mut [f64]) {
        for (o, t) in out.iter_mut().zip(&self.tapes) {
            *o = t.eval(env, stack);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tape_matches_tree() {
        let e = Expr::parse(
            "(add (mul (const -36) (pow (y 1) 4) (add (x 1) (const 12))) (div (sin (t)) (exp (z 1))) (guarded-quot 1 (x 1)) (smoothstep 0 (y 1)))",
        )
        .unwrap();
        let tape = Tape::compile(&e);
        let mut st = Vec::new();
        for &(t, x, y, z) in &[(0.3, 1.5, 0.2, -1.0), (2.0, -0.5, 0.9, 0.0), (0.0, 0.0, 0.5, 3.0)] {
            let (xs, ys, zs) = ([x], [y], [z]);
            let env = Env::new(t, &xs, &ys, &zs);
            assert_eq!(tape.eval(&env, &mut st), e.eval(&env));
        }
    }
}
