//! Simultaneous approximation `|n T* - m T| < eps` for incommensurable periods.

use serde::{Deserialize, Serialize};

use super::ControlError;

/// Ratios within this distance of `p/q` with `q <= RATIONAL_MAX_DEN` count as rational.
pub const RATIONAL_TOL: f64 = 1e-12;
pub const RATIONAL_MAX_DEN: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KroneckerHit {
    pub n: u64,
    pub m: u64,
    pub error: f64,
}

/// Continued-fraction convergents `p/q` of `r > 0` with `q <= max_den`.
pub fn convergents(r: f64, max_den: u64) -> Vec<(u64, u64)> {
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut x = r;
    let mut out = Vec::new();
    for _ in 0..64 {
        let a = x.floor();
        if !(a.is_finite()) || a > 1e15 {
            break;
        }
        let a = a as u64;
        let (p2, q2) = (a.saturating_mul(p1).saturating_add(p0), a.saturating_mul(q1).saturating_add(q0));
        if q2 > max_den {
            break;
        }
        out.push((p2, q2));
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = x - a as f64;
        if frac <= 0.0 {
            break;
        }
        x = 1.0 / frac;
    }
    out
}

/// The rational `p/q` (with `q <= 1000`) within `1e-12` of `r`, if any.
pub fn near_rational(r: f64) -> Option<(u64, u64)> {
    convergents(r, RATIONAL_MAX_DEN).into_iter().find(|&(p, q)| (r - p as f64 / q as f64).abs() < RATIONAL_TOL)
}

/// Smallest `n <= bound` with some `m >= 1` such that `|n T* - m T| < eps`.
pub fn kronecker_search(t: f64, tstar: f64, eps: f64, bound: u64) -> Result<KroneckerHit, ControlError> {
    if !(t > 0.0 && tstar > 0.0 && t.is_finite() && tstar.is_finite()) {
        return Err(ControlError::Invalid(format!("periods must be positive, got T={t}, T*={tstar}")));
    }
    if !(eps > 0.0) {
        return Err(ControlError::Invalid(format!("eps must be positive, got {eps}")));
    }
    let ratio = tstar / t;
    if let Some((p, q)) = near_rational(ratio) {
        return Err(ControlError::Incommensurability { ratio, p, q });
    }
    for n in 1..=bound {
        let x = n as f64 * ratio;
        let best = [x.floor(), x.ceil()]
            .into_iter()
            .filter(|&m| m >= 1.0)
            .map(|m| (m as u64, (n as f64 * tstar - m * t).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((m, error)) = best {
            if error < eps {
                return Ok(KroneckerHit { n, m, error });
            }
        }
    }
    Err(ControlError::NotFound { bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergents_of_pi() {
        let c = convergents(std::f64::consts::PI, 1000);
        assert_eq!(c, vec![(3, 1), (22, 7), (333, 106), (355, 113)]);
    }

    #[test]
    fn rational_detection() {
        assert_eq!(near_rational(2.0), Some((2, 1)));
        assert_eq!(near_rational(0.75), Some((3, 4)));
        assert_eq!(near_rational(355.0 / 113.0), Some((355, 113)));
        assert_eq!(near_rational(std::f64::consts::SQRT_2), None);
        assert_eq!(near_rational(1.0 / 1009.0), None);
    }

    #[test]
    fn small_cases() {
        let h = kronecker_search(1.0, 2f64.sqrt(), 0.1, 1000).unwrap();
        assert_eq!((h.n, h.m), (5, 7));
        assert!(matches!(
            kronecker_search(1.0, 2.0, 0.1, 10),
            Err(ControlError::Incommensurability { p: 2, q: 1, .. })
        ));
        assert!(matches!(kronecker_search(1.0, 2f64.sqrt(), 1e-9, 10), Err(ControlError::NotFound { bound: 10 })));
    }
}
