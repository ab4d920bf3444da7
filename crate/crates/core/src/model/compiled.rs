use crate::field::{CompiledExprs, Env};

use super::{stratonovich_drift, ModelSpec, SignalSpec};

/// Tape-compiled coefficient functions of a model for hot loops.
#[derive(Clone, Debug)]
pub struct CompiledModel {
    pub n: usize,
    pub l: usize,
    pub m: usize,
    fg: CompiledExprs,
    b: CompiledExprs,
    b_tilde: CompiledExprs,
    sigma: CompiledExprs,
    signal: SignalSpec,
}

impl CompiledModel {
    pub fn new(m: &ModelSpec) -> Self {
        let bt = stratonovich_drift(m);
        CompiledModel {
            n: m.n,
            l: m.l,
            m: m.m,
            fg: CompiledExprs::new(m.f.iter().chain(&m.g)),
            b: CompiledExprs::new(&m.b),
            b_tilde: CompiledExprs::new(bt.components()),
            sigma: CompiledExprs::new(m.sigma.iter().flatten()),
            signal: m.signal.clone(),
        }
    }

    pub fn state_dim(&self) -> usize {
        2 * self.n + self.l
    }

    /// `F(x, y) = (f, g)` into `out` (length `N + L`).
    pub fn fg(&self, x: &[f64], y: &[f64], stack: &mut Vec<f64>, out: &mut [f64]) {
        self.fg.eval_into(&Env::new(0.0, x, y, &[]), stack, out);
    }

    pub fn b(&self, z: &[f64], stack: &mut Vec<f64>, out: &mut [f64]) {
        self.b.eval_into(&Env::new(0.0, &[], &[], z), stack, out);
    }

    pub fn b_tilde(&self, z: &[f64], stack: &mut Vec<f64>, out: &mut [f64]) {
        self.b_tilde.eval_into(&Env::new(0.0, &[], &[], z), stack, out);
    }

    /// `sigma(z)` row-major into `out` (length `N * M`).
    pub fn sigma(&self, z: &[f64], stack: &mut Vec<f64>, out: &mut [f64]) {
        self.sigma.eval_into(&Env::new(0.0, &[], &[], z), stack, out);
    }

    pub fn signal(&self, t: f64, out: &mut [f64]) {
        self.signal.eval_into(t, out);
    }

    pub fn signal_spec(&self) -> &SignalSpec {
        &self.signal
    }
}
