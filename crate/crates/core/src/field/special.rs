//! Numerics for the two non-elementary node kinds.
//!
//! `guarded_quotient(k, u)` is the k-th derivative of `q(u) = u / (exp(u) - 1)`,
//! which has a removable singularity at `u = 0` with `q(0) = 1`.
//! `smooth_step(k, u)` is the k-th derivative of the C-infinity step
//! `chi(u) = psi(u) / (psi(u) + psi(1 - u))`, `psi(u) = exp(-1/u)` for `u > 0`.
//!
//! Both are evaluated through truncated Taylor jets so that every derivative
//! order is available without symbolic swell.

/// Highest derivative order supported by the jet arithmetic.
pub const MAX_ORDER: usize = 24;

const LEN: usize = MAX_ORDER + 1;

/// Guard radius for the order-0 quotient: inside it a 4th-order series is used.
pub const GUARD_RADIUS_0: f64 = 1e-4;
/// Series order used for the order-0 quotient inside its guard.
pub const GUARD_SERIES_ORDER_0: usize = 4;
/// Guard radius for derivative orders >= 1.
pub const GUARD_RADIUS_K: f64 = 1.0;
/// Number of series terms kept for derivative orders >= 1 inside the guard.
const SERIES_TERMS_K: usize = 40;

/// Truncated Taylor series `sum c[j] h^j` about an expansion point.
#[derive(Clone, Copy, Debug)]
struct Jet {
    c: [f64; LEN],
    n: usize,
}

impl Jet {
    fn zero(n: usize) -> Self {
        Jet { c: [0.0; LEN], n }
    }

    /// The identity function expanded at `u0`.
    fn variable(u0: f64, n: usize) -> Self {
        let mut j = Jet::zero(n);
        j.c[0] = u0;
        if n >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    fn mul(&self, o: &Jet) -> Jet {
        let mut r = Jet::zero(self.n);
        for k in 0..=self.n {
            let mut s = 0.0;
            for i in 0..=k {
                s += self.c[i] * o.c[k - i];
            }
            r.c[k] = s;
        }
        r
    }

    fn div(&self, o: &Jet) -> Jet {
        let mut r = Jet::zero(self.n);
        for k in 0..=self.n {
            let mut s = self.c[k];
            for i in 1..=k {
                s -= o.c[i] * r.c[k - i];
            }
            r.c[k] = s / o.c[0];
        }
        r
    }

    fn recip(&self) -> Jet {
        let mut one = Jet::zero(self.n);
        one.c[0] = 1.0;
        one.div(self)
    }

    fn exp(&self) -> Jet {
        let mut r = Jet::zero(self.n);
        r.c[0] = self.c[0].exp();
        for k in 1..=self.n {
            let mut s = 0.0;
            for i in 1..=k {
                s += i as f64 * self.c[i] * r.c[k - i];
            }
            r.c[k] = s / k as f64;
        }
        r
    }

    fn scale(&self, a: f64) -> Jet {
        let mut r = *self;
        for v in r.c.iter_mut().take(self.n + 1) {
            *v *= a;
        }
        r
    }

    fn add_const(&self, a: f64) -> Jet {
        let mut r = *self;
        r.c[0] += a;
        r
    }

    /// k-th derivative at the expansion point.
    fn derivative(&self, k: usize) -> f64 {
        self.c[k] * factorial(k)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, i| a * i as f64)
}

/// Taylor coefficients of `u / (exp(u) - 1)` about 0 (these are `B_n / n!`).
///
/// Uses `B_2m / (2m)! = (-1)^(m+1) 2 zeta(2m) / (2 pi)^(2m)`, which stays
/// accurate at high order where the defining recurrence loses digits.
pub fn quotient_series_coeffs(n: usize) -> Vec<f64> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut c = vec![0.0; n + 1];
    c[0] = 1.0;
    if n >= 1 {
        c[1] = -0.5;
    }
    for m in 1..=n / 2 {
        let e = 2 * m as i32;
        let zeta = match m {
            1 => std::f64::consts::PI.powi(2) / 6.0,
            2 => std::f64::consts::PI.powi(4) / 90.0,
            _ => (1..2000).rev().map(|j| (j as f64).powi(-e)).sum(),
        };
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        c[2 * m] = sign * 2.0 * zeta / two_pi.powi(e);
    }
    c
}

fn series_table() -> &'static [f64] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| quotient_series_coeffs(SERIES_TERMS_K + MAX_ORDER))
}

/// Value of the k-th derivative of `u / (exp(u) - 1)` at `u = 0`.
pub fn guarded_quotient_at_zero(k: usize) -> f64 {
    series_table()[k] * factorial(k)
}

/// Whether `(k, u)` falls inside the series guard.
pub fn in_guard(k: usize, u: f64) -> bool {
    if k == 0 {
        u.abs() < GUARD_RADIUS_0
    } else {
        u.abs() < GUARD_RADIUS_K
    }
}

/// k-th derivative of `u / (exp(u) - 1)`.
pub fn guarded_quotient(k: usize, u: f64) -> f64 {
    if k > MAX_ORDER || !u.is_finite() {
        return f64::NAN;
    }
    let c = series_table();
    if in_guard(k, u) {
        let terms = if k == 0 { GUARD_SERIES_ORDER_0 } else { SERIES_TERMS_K };
        // d^k/du^k sum c_n u^n = sum_{n} c_{n+k} (n+k)!/n! u^n, Horner from the top.
        let mut acc = 0.0;
        for n in (0..=terms).rev() {
            let mut fall = 1.0;
            for j in 1..=k {
                fall *= (n + j) as f64;
            }
            acc = acc * u + c[n + k] * fall;
        }
        return acc;
    }
    if k == 0 {
        if u > 0.0 {
            let e = (-u).exp();
            return u * e / -(-u).exp_m1();
        }
        return u / u.exp_m1();
    }
    let x = Jet::variable(u, k);
    let q = if u > 0.0 {
        // u e^{-u} / (1 - e^{-u}) keeps every factor bounded for large u.
        let e = x.scale(-1.0).exp();
        let num = x.mul(&e);
        let den = e.scale(-1.0).add_const(1.0);
        num.div(&den)
    } else {
        let den = x.exp().add_const(-1.0);
        x.div(&den)
    };
    q.derivative(k)
}

/// Below this distance from the flat ends, the step and all its derivatives
/// are zero to double precision (`exp(-1/0.002)` underflows past 1e-200).
const STEP_FLAT: f64 = 2e-3;

/// k-th derivative of the C-infinity step `chi` that is 0 on `u <= 0` and 1 on `u >= 1`.
pub fn smooth_step(k: usize, u: f64) -> f64 {
    if k > MAX_ORDER || u.is_nan() {
        return f64::NAN;
    }
    if u <= STEP_FLAT {
        return 0.0;
    }
    if u >= 1.0 - STEP_FLAT {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let x = Jet::variable(u, k);
    let a = x.recip().scale(-1.0).exp();
    let b = x.scale(-1.0).add_const(1.0).recip().scale(-1.0).exp();
    let mut s = a;
    for i in 0..=k {
        s.c[i] += b.c[i];
    }
    a.div(&s).derivative(k)
}
