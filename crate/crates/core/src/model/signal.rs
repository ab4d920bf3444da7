use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::field::{Coord, Env, Expr};

use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub amplitude: f64,
    /// Angular frequency: the term is `amplitude * sin(frequency * t + phase)`.
    pub frequency: f64,
    pub phase: f64,
}

/// One component of the deterministic input `S0(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SignalKind {
    Zero,
    Constant {
        value: f64,
    },
    Sinusoids {
        offset: f64,
        terms: Vec<SineTerm>,
    },
    Expression {
        #[serde(with = "crate::field::serde_expr")]
        expr: Expr,
    },
}

impl SignalKind {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            SignalKind::Zero => 0.0,
            SignalKind::Constant { value } => *value,
            SignalKind::Sinusoids { offset, terms } => {
                offset + terms.iter().map(|s| s.amplitude * (s.frequency * t + s.phase).sin()).sum::<f64>()
            }
            SignalKind::Expression { expr } => expr.eval(&Env::new(t, &[], &[], &[])),
        }
    }

    pub fn to_expr(&self) -> Expr {
        match self {
            SignalKind::Zero => Expr::zero(),
            SignalKind::Constant { value } => Expr::constant(*value),
            SignalKind::Sinusoids { offset, terms } => {
                let mut parts: Vec<Expr> = terms
                    .iter()
                    .map(|s| {
                        let arg =
                            Expr::add([Expr::mul([Expr::constant(s.frequency), Expr::t()]), Expr::constant(s.phase)]);
                        Expr::mul([Expr::constant(s.amplitude), Expr::sin(arg)])
                    })
                    .collect();
                parts.push(Expr::constant(*offset));
                Expr::add(parts)
            }
            SignalKind::Expression { expr } => expr.clone(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            SignalKind::Zero | SignalKind::Constant { .. } => 0.0,
            SignalKind::Sinusoids { terms, .. } => {
                terms.iter().map(|s| s.amplitude * s.frequency * (s.frequency * t + s.phase).cos()).sum()
            }
            SignalKind::Expression { expr } => expr.diff(Coord::T).eval(&Env::new(t, &[], &[], &[])),
        }
    }

    /// Closed-form `int_0^t S(s) ds` where available.
    pub fn integral(&self, t: f64) -> Option<f64> {
        match self {
            SignalKind::Zero => Some(0.0),
            SignalKind::Constant { value } => Some(value * t),
            SignalKind::Sinusoids { offset, terms } => {
                let mut acc = offset * t;
                for s in terms {
                    if s.frequency == 0.0 {
                        acc += s.amplitude * s.phase.sin() * t;
                    } else {
                        acc += s.amplitude / s.frequency * (s.phase.cos() - (s.frequency * t + s.phase).cos());
                    }
                }
                Some(acc)
            }
            SignalKind::Expression { .. } => None,
        }
    }
}

/// The T-periodic deterministic input `S0 : R -> R^N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub period: f64,
    pub components: Vec<SignalKind>,
}

impl SignalSpec {
    pub fn zero(n: usize, period: f64) -> Self {
        SignalSpec { period, components: vec![SignalKind::Zero; n] }
    }

    pub fn constant(values: &[f64], period: f64) -> Self {
        SignalSpec { period, components: values.iter().map(|&value| SignalKind::Constant { value }).collect() }
    }

    /// `a (1 + sin(2 pi t / T))` in every one of `n` components.
    pub fn default_sine(n: usize, a: f64, period: f64) -> Self {
        let kind = SignalKind::Sinusoids {
            offset: a,
            terms: vec![SineTerm { amplitude: a, frequency: 2.0 * PI / period, phase: 0.0 }],
        };
        SignalSpec { period, components: vec![kind; n] }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(t)).collect()
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(t);
        }
    }

    pub fn to_exprs(&self) -> Vec<Expr> {
        self.components.iter().map(SignalKind::to_expr).collect()
    }

    /// Checks that every frequency is an integer multiple of `2 pi / period`,
    /// expression components reference only `t`, and sampled periodicity holds.
    pub fn check_period(&self) -> Result<(), ModelError> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(ModelError::Invalid(format!("signal period {} not positive", self.period)));
        }
        let base = 2.0 * PI / self.period;
        for (i, c) in self.components.iter().enumerate() {
            match c {
                SignalKind::Sinusoids { terms, .. } => {
                    for s in terms {
                        let r = s.frequency / base;
                        if (r - r.round()).abs() > 1e-9 * (1.0 + r.abs()) {
                            return Err(ModelError::Invalid(format!(
                                "signal component {} frequency {} is not a multiple of 2pi/{}",
                                i + 1,
                                s.frequency,
                                self.period
                            )));
                        }
                    }
                }
                SignalKind::Expression { expr } => {
                    let cs = expr.coords();
                    if cs.x != 0 || cs.y != 0 || cs.z != 0 {
                        return Err(ModelError::Invalid(format!(
                            "signal component {} references state coordinates",
                            i + 1
                        )));
                    }
                    let defect = self.periodicity_defect_of(c, 1000);
                    if defect >= 1e-12 * (1.0 + self.sup_abs(c)) {
                        return Err(ModelError::Invalid(format!(
                            "signal component {} not {}-periodic (defect {defect:e})",
                            i + 1,
                            self.period
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn sup_abs(&self, c: &SignalKind) -> f64 {
        (0..1000).map(|k| c.eval(k as f64 * self.period / 1000.0).abs()).fold(0.0, f64::max)
    }

    fn periodicity_defect_of(&self, c: &SignalKind, samples: usize) -> f64 {
        (0..samples)
            .map(|k| {
                let t = k as f64 * self.period / samples as f64;
                (c.eval(t + self.period) - c.eval(t)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|S(t + T) - S(t)|` over `samples` points of `[0, T)`.
    pub fn periodicity_defect(&self, samples: usize) -> f64 {
        self.components.iter().map(|c| self.periodicity_defect_of(c, samples)).fold(0.0, f64::max)
    }

    /// Mean over one period by the trapezoid rule on `samples` intervals.
    pub fn mean(&self, samples: usize) -> Vec<f64> {
        let h = self.period / samples as f64;
        self.components
            .iter()
            .map(|c| {
                if let Some(i) = c.integral(self.period) {
                    return i / self.period;
                }
                let mut s = 0.5 * (c.eval(0.0) + c.eval(self.period));
                for k in 1..samples {
                    s += c.eval(k as f64 * h);
                }
                s * h / self.period
            })
            .collect()
    }

    pub fn depends_on_t(&self) -> bool {
        self.components.iter().any(|c| match c {
            SignalKind::Zero | SignalKind::Constant { .. } => false,
            SignalKind::Sinusoids { terms, .. } => terms.iter().any(|s| s.amplitude != 0.0),
            SignalKind::Expression { expr } => expr.depends_on(Coord::T),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sine_is_periodic() {
        let s = SignalSpec::default_sine(2, 15.0, 20.0);
        s.check_period().unwrap();
        assert!(s.periodicity_defect(1000) < 1e-12);
        assert_eq!(s.eval(0.0), vec![15.0, 15.0]);
        assert!((s.eval(5.0)[0] - 30.0).abs() < 1e-12);
        let m = s.mean(1000);
        assert!((m[0] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_frequency_rejected() {
        let s = SignalSpec {
            period: 1.0,
            components: vec![SignalKind::Sinusoids {
                offset: 0.0,
                terms: vec![SineTerm { amplitude: 1.0, frequency: 1.0, phase: 0.0 }],
            }],
        };
        assert!(s.check_period().is_err());
    }

    #[test]
    fn expression_signal_checked_by_sampling() {
        let e = Expr::parse("(cos (mul (const 6.283185307179586) (t)))").unwrap();
        let ok = SignalSpec { period: 1.0, components: vec![SignalKind::Expression { expr: e.clone() }] };
        ok.check_period().unwrap();
        let bad = SignalSpec { period: 0.7, components: vec![SignalKind::Expression { expr: e }] };
        assert!(bad.check_period().is_err());
    }

    #[test]
    fn expr_matches_eval_and_integral() {
        let s = SignalSpec::default_sine(1, 0.5, 1.0);
        let e = &s.to_exprs()[0];
        for k in 0..10 {
            let t = 0.37 * k as f64;
            assert!((e.eval(&Env::new(t, &[], &[], &[])) - s.eval(t)[0]).abs() < 1e-15);
        }
        // Oracle: trapezoid rule.
        let t1 = 0.8;
        let n = 100_000;
        let h = t1 / n as f64;
        let mut q = 0.5 * (s.eval(0.0)[0] + s.eval(t1)[0]);
        for k in 1..n {
            q += s.eval(k as f64 * h)[0];
        }
        q *= h;
        assert!((s.components[0].integral(t1).unwrap() - q).abs() < 1e-9);
    }
}
