//! Continuously differentiable steering paths built from closed-form pieces.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::field::special::smooth_step;
use crate::model::{SignalKind, SignalSpec};

use super::ControlError;

/// Peak of `chi'` for the C-infinity step, attained at `1/2`.
pub const STEP_SLOPE_MAX: f64 = 2.0;

/// Closed-form description of one piece; `s` is time since the piece start
/// and `d` its duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Segment {
    Constant {
        value: Vec<f64>,
    },
    /// `start + slope * s`.
    Linear {
        start: Vec<f64>,
        slope: Vec<f64>,
    },
    /// `from + (to - from) * chi(s / d)`.
    Transition {
        from: Vec<f64>,
        to: Vec<f64>,
    },
    /// `center + amplitude * d / (2 pi) * (1 - cos(2 pi s / d))`: the
    /// antiderivative of the zero-mean input `amplitude * sin(2 pi s / d)`.
    Excitation {
        center: Vec<f64>,
        amplitude: Vec<f64>,
    },
}

impl Segment {
    fn dim(&self) -> usize {
        match self {
            Segment::Constant { value } => value.len(),
            Segment::Linear { start, .. } => start.len(),
            Segment::Transition { from, .. } => from.len(),
            Segment::Excitation { center, .. } => center.len(),
        }
    }

    fn needs_finite_duration(&self) -> bool {
        matches!(self, Segment::Transition { .. } | Segment::Excitation { .. })
    }

    fn eval(&self, s: f64, d: f64, val: &mut [f64], der: &mut [f64]) {
        match self {
            Segment::Constant { value } => {
                val.copy_from_slice(value);
                der.fill(0.0);
            }
            Segment::Linear { start, slope } => {
                for i in 0..val.len() {
                    val[i] = start[i] + slope[i] * s;
                    der[i] = slope[i];
                }
            }
            Segment::Transition { from, to } => {
                let u = (s / d).clamp(0.0, 1.0);
                let (c, dc) = (smooth_step(0, u), smooth_step(1, u) / d);
                for i in 0..val.len() {
                    val[i] = from[i] + (to[i] - from[i]) * c;
                    der[i] = (to[i] - from[i]) * dc;
                }
            }
            Segment::Excitation { center, amplitude } => {
                let u = 2.0 * PI * s.clamp(0.0, d) / d;
                for i in 0..val.len() {
                    val[i] = center[i] + amplitude[i] * d / (2.0 * PI) * (1.0 - u.cos());
                    der[i] = amplitude[i] * u.sin();
                }
            }
        }
    }

    /// Exact `sup |d/dt|` (Euclidean) over the piece.
    fn sup_derivative(&self, d: f64) -> f64 {
        match self {
            Segment::Constant { .. } => 0.0,
            Segment::Linear { slope, .. } => norm(slope),
            Segment::Transition { from, to } => {
                let diff: Vec<f64> = from.iter().zip(to).map(|(a, b)| b - a).collect();
                norm(&diff) * STEP_SLOPE_MAX / d
            }
            Segment::Excitation { amplitude, .. } => norm(amplitude),
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPiece {
    pub start: f64,
    /// `None` marks the final open-ended piece.
    pub end: Option<f64>,
    pub segment: Segment,
}

/// `rho(t) = piece(t) + int_0^t drift`, where `drift` is an optional
/// periodic input with closed-form antiderivative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothPath {
    dim: usize,
    pieces: Vec<PathPiece>,
    drift: Option<SignalSpec>,
}

const JOIN_TOL: f64 = 1e-9;

impl SmoothPath {
    /// Validates contiguity, finiteness and `C^1` joins of the pieces.
    pub fn new(pieces: Vec<PathPiece>, drift: Option<SignalSpec>) -> Result<Self, ControlError> {
        let bad = |m: String| Err(ControlError::Invalid(m));
        let Some(first) = pieces.first() else {
            return bad("path needs at least one piece".into());
        };
        let dim = first.segment.dim();
        for (i, p) in pieces.iter().enumerate() {
            if p.segment.dim() != dim {
                return bad(format!("piece {i} has dimension {}, expected {dim}", p.segment.dim()));
            }
            let last = i + 1 == pieces.len();
            match p.end {
                None if !last => return bad(format!("piece {i} is open-ended but not last")),
                Some(e) if !(e > p.start) => return bad(format!("piece {i} has empty span")),
                None if p.segment.needs_finite_duration() => return bad(format!("piece {i} needs a finite duration")),
                _ => {}
            }
            if !last && pieces[i + 1].start != p.end.unwrap() {
                return bad(format!("pieces {i} and {} are not contiguous", i + 1));
            }
        }
        if let Some(s) = &drift {
            if s.dim() != dim {
                return bad(format!("drift has {} components, path has {dim}", s.dim()));
            }
            if s.components.iter().any(|c| c.integral(0.0).is_none()) {
                return bad("drift components need closed-form antiderivatives".into());
            }
        }
        let path = SmoothPath { dim, pieces, drift };
        for w in path.pieces.windows(2) {
            let t = w[1].start;
            let (mut va, mut da) = (vec![0.0; dim], vec![0.0; dim]);
            let (mut vb, mut db) = (vec![0.0; dim], vec![0.0; dim]);
            let d0 = w[0].end.unwrap() - w[0].start;
            w[0].segment.eval(d0, d0, &mut va, &mut da);
            w[1].segment.eval(0.0, w[1].end.map_or(1.0, |e| e - t), &mut vb, &mut db);
            let jump = va.iter().zip(&vb).chain(da.iter().zip(&db)).map(|(a, b)| (a - b).abs());
            if jump.fold(0.0, f64::max) > JOIN_TOL * (1.0 + norm(&va) + norm(&da)) {
                return bad(format!("path is not C^1 at t = {t}"));
            }
        }
        Ok(path)
    }

    /// `rho ≡ value` from `start` on.
    pub fn constant(value: Vec<f64>, start: f64) -> Self {
        SmoothPath {
            dim: value.len(),
            pieces: vec![PathPiece { start, end: None, segment: Segment::Constant { value } }],
            drift: None,
        }
    }

    /// Smooth move from `from` at `start` to `to` at `end`, resting afterwards.
    pub fn transition(from: Vec<f64>, to: Vec<f64>, start: f64, end: f64) -> Result<Self, ControlError> {
        SmoothPath::new(
            vec![
                PathPiece { start, end: Some(end), segment: Segment::Transition { from, to: to.clone() } },
                PathPiece { start: end, end: None, segment: Segment::Constant { value: to } },
            ],
            None,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[PathPiece] {
        &self.pieces
    }

    pub fn drift(&self) -> Option<&SignalSpec> {
        self.drift.as_ref()
    }

    pub fn start(&self) -> f64 {
        self.pieces[0].start
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.pieces.iter().map(|p| p.start).collect();
        b.extend(self.pieces.last().and_then(|p| p.end));
        b
    }

    /// Time from which the piecewise part is constant.
    pub fn settle_time(&self) -> f64 {
        let last = self.pieces.last().unwrap();
        match last.segment {
            Segment::Constant { .. } => last.start,
            _ => f64::INFINITY,
        }
    }

    /// Value and derivative at `t`; before the first piece the path is held at its start value.
    pub fn eval_into(&self, t: f64, val: &mut [f64], der: &mut [f64]) {
        let i = self.pieces.partition_point(|p| p.start <= t).max(1) - 1;
        let p = &self.pieces[i];
        let s = (t - p.start).max(0.0);
        let d = p.end.map_or(f64::INFINITY, |e| e - p.start);
        p.segment.eval(s, d, val, der);
        if t < p.start {
            der.fill(0.0);
        }
        if let Some(sig) = &self.drift {
            let tt = t.max(0.0);
            for (k, c) in sig.components.iter().enumerate() {
                val[k] += integral(c, tt);
                der[k] += if t >= 0.0 { c.eval(tt) } else { 0.0 };
            }
        }
    }

    pub fn value(&self, t: f64) -> Vec<f64> {
        let (mut v, mut d) = (vec![0.0; self.dim], vec![0.0; self.dim]);
        self.eval_into(t, &mut v, &mut d);
        v
    }

    pub fn derivative(&self, t: f64) -> Vec<f64> {
        let (mut v, mut d) = (vec![0.0; self.dim], vec![0.0; self.dim]);
        self.eval_into(t, &mut v, &mut d);
        d
    }

    /// Upper bound on `sup_t |rho'(t)|`: exact per piece, plus the drift's amplitude sum.
    pub fn sup_derivative_bound(&self) -> f64 {
        let pieces = self
            .pieces
            .iter()
            .map(|p| p.segment.sup_derivative(p.end.map_or(f64::INFINITY, |e| e - p.start)))
            .fold(0.0, f64::max);
        pieces + self.drift.as_ref().map_or(0.0, drift_bound)
    }

    /// Like [`sup_derivative_bound`](Self::sup_derivative_bound) but ignoring the drift.
    pub fn sup_piece_derivative(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.segment.sup_derivative(p.end.map_or(f64::INFINITY, |e| e - p.start)))
            .fold(0.0, f64::max)
    }

    /// `max |rho'|` over `samples + 1` equispaced times in `[t0, t1]`.
    pub fn sampled_sup_derivative(&self, t0: f64, t1: f64, samples: usize) -> f64 {
        (0..=samples)
            .map(|i| norm(&self.derivative(t0 + (t1 - t0) * i as f64 / samples.max(1) as f64)))
            .fold(0.0, f64::max)
    }
}

fn integral(c: &SignalKind, t: f64) -> f64 {
    c.integral(t).expect("checked at construction")
}

fn drift_bound(s: &SignalSpec) -> f64 {
    let per: Vec<f64> = s
        .components
        .iter()
        .map(|c| match c {
            SignalKind::Zero => 0.0,
            SignalKind::Constant { value } => value.abs(),
            SignalKind::Sinusoids { offset, terms } => {
                offset.abs() + terms.iter().map(|t| t.amplitude.abs()).sum::<f64>()
            }
            SignalKind::Expression { .. } => f64::INFINITY,
        })
        .collect();
    norm(&per)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_slope_peak() {
        let h = 1e-6;
        let peak = (1..1000)
            .map(|i| {
                let u = i as f64 / 1000.0;
                (smooth_step(0, u + h) - smooth_step(0, u - h)) / (2.0 * h)
            })
            .fold(0.0, f64::max);
        assert!(peak <= STEP_SLOPE_MAX + 1e-8 && peak > STEP_SLOPE_MAX - 1e-6, "{peak}");
        assert!((smooth_step(1, 0.5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn transition_is_c1_with_exact_bound() {
        let p = SmoothPath::transition(vec![0.0, 1.0], vec![3.0, -3.0], 1.0, 6.0).unwrap();
        assert_eq!(p.value(0.0), vec![0.0, 1.0]);
        assert_eq!(p.value(6.0), vec![3.0, -3.0]);
        assert_eq!(p.value(100.0), vec![3.0, -3.0]);
        let bound = p.sup_derivative_bound();
        assert!((bound - 5.0 * 2.0 / 5.0).abs() < 1e-12);
        let sampled = p.sampled_sup_derivative(0.0, 7.0, 70_000);
        assert!(sampled <= bound && sampled > 0.999 * bound);
        // Derivative matches finite differences of the value.
        for t in [1.3, 2.9, 3.5, 5.99] {
            let h = 1e-6;
            let (a, b) = (p.value(t + h), p.value(t - h));
            let d = p.derivative(t);
            for k in 0..2 {
                assert!(((a[k] - b[k]) / (2.0 * h) - d[k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rejects_broken_joins() {
        let r = SmoothPath::new(
            vec![
                PathPiece { start: 0.0, end: Some(1.0), segment: Segment::Constant { value: vec![0.0] } },
                PathPiece { start: 1.0, end: None, segment: Segment::Linear { start: vec![0.0], slope: vec![1.0] } },
            ],
            None,
        );
        assert!(r.is_err());
        let gap = SmoothPath::new(
            vec![
                PathPiece { start: 0.0, end: Some(1.0), segment: Segment::Constant { value: vec![0.0] } },
                PathPiece { start: 2.0, end: None, segment: Segment::Constant { value: vec![0.0] } },
            ],
            None,
        );
        assert!(gap.is_err());
    }

    #[test]
    fn excitation_returns_to_center() {
        let p = SmoothPath::new(
            vec![
                PathPiece { start: 0.0, end: Some(2.0), segment: Segment::Constant { value: vec![1.0] } },
                PathPiece {
                    start: 2.0,
                    end: Some(5.0),
                    segment: Segment::Excitation { center: vec![1.0], amplitude: vec![0.4] },
                },
                PathPiece { start: 5.0, end: None, segment: Segment::Constant { value: vec![1.0] } },
            ],
            None,
        )
        .unwrap();
        assert!((p.value(5.0)[0] - 1.0).abs() < 1e-15);
        assert!(p.value(3.5)[0] > 1.0);
        assert!((p.sup_derivative_bound() - 0.4).abs() < 1e-15);
    }
}
