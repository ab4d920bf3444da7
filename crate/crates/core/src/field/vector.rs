use serde::{Deserialize, Serialize};

use super::expr::{Coord, Env, Expr};
use super::FieldError;

/// A point `(t, x, y, z)` of time-space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl Point {
    pub fn new(t: f64, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Self {
        Point { t, x, y, z }
    }

    /// Splits a flat state `(x, y, z)` with block sizes `(n, l, n)`.
    pub fn from_state(t: f64, state: &[f64], n: usize, l: usize) -> Self {
        Point { t, x: state[..n].to_vec(), y: state[n..n + l].to_vec(), z: state[n + l..n + l + n].to_vec() }
    }

    pub fn state(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.y);
        v.extend_from_slice(&self.z);
        v
    }

    pub fn env(&self) -> Env<'_> {
        Env::new(self.t, &self.x, &self.y, &self.z)
    }

    pub fn with_t(&self, t: f64) -> Point {
        Point { t, ..self.clone() }
    }

    /// Checks block sizes against `(n, l)` and finiteness of all entries.
    pub fn check(&self, n: usize, l: usize) -> Result<(), FieldError> {
        if self.x.len() != n || self.y.len() != l || self.z.len() != n {
            return Err(FieldError::Dimension(format!(
                "point has blocks ({}, {}, {}), expected ({n}, {l}, {n})",
                self.x.len(),
                self.y.len(),
                self.z.len()
            )));
        }
        if !self.t.is_finite() || self.state().iter().any(|v| !v.is_finite()) {
            return Err(FieldError::Dimension("point has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn get(&self, c: Coord) -> f64 {
        match c {
            Coord::T => self.t,
            Coord::X(i) => self.x[i],
            Coord::Y(i) => self.y[i],
            Coord::Z(i) => self.z[i],
        }
    }

    pub fn set(&mut self, c: Coord, v: f64) {
        match c {
            Coord::T => self.t = v,
            Coord::X(i) => self.x[i] = v,
            Coord::Y(i) => self.y[i] = v,
            Coord::Z(i) => self.z[i] = v,
        }
    }
}

/// Ordered coordinates `x_1..x_n, y_1..y_l, z_1..z_n`.
pub fn state_basis(n: usize, l: usize) -> Vec<Coord> {
    let mut b: Vec<Coord> = (0..n).map(Coord::X).collect();
    b.extend((0..l).map(Coord::Y));
    b.extend((0..n).map(Coord::Z));
    b
}

/// `t` followed by the state basis.
pub fn time_space_basis(n: usize, l: usize) -> Vec<Coord> {
    let mut b = vec![Coord::T];
    b.extend(state_basis(n, l));
    b
}

pub fn z_basis(n: usize) -> Vec<Coord> {
    (0..n).map(Coord::Z).collect()
}

pub fn xy_basis(n: usize, l: usize) -> Vec<Coord> {
    let mut b: Vec<Coord> = (0..n).map(Coord::X).collect();
    b.extend((0..l).map(Coord::Y));
    b
}

/// A vector field: component `i` is the coefficient of `d/d basis[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldExpr {
    basis: Vec<Coord>,
    components: Vec<Expr>,
}

impl VectorFieldExpr {
    pub fn new(basis: Vec<Coord>, components: Vec<Expr>) -> Result<Self, FieldError> {
        if basis.is_empty() || basis.len() != components.len() {
            return Err(FieldError::Dimension(format!(
                "basis of length {} with {} components",
                basis.len(),
                components.len()
            )));
        }
        Ok(VectorFieldExpr { basis, components })
    }

    pub fn zero(basis: Vec<Coord>) -> Self {
        let components = vec![Expr::zero(); basis.len()];
        VectorFieldExpr { basis, components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn basis(&self) -> &[Coord] {
        &self.basis
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.components[i]
    }

    pub fn time_dependent(&self) -> bool {
        self.components.iter().any(|e| e.depends_on(Coord::T))
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    pub fn eval(&self, env: &Env) -> Vec<f64> {
        self.components.iter().map(|e| e.eval(env)).collect()
    }

    /// Evaluates at `p`, reporting the offending node on a non-finite value.
    pub fn evaluate(&self, p: &Point) -> Result<Vec<f64>, FieldError> {
        let env = p.env();
        self.components
            .iter()
            .enumerate()
            .map(|(i, e)| {
                e.try_eval(&env).map_err(|err| match err {
                    FieldError::NonFinite { path } => {
                        FieldError::NonFinite { path: format!("component {}: {path}", i + 1) }
                    }
                    other => other,
                })
            })
            .collect()
    }

    /// `J[i][j] = d component_i / d basis_j`.
    pub fn jacobian(&self) -> Vec<Vec<Expr>> {
        self.components.iter().map(|e| self.basis.iter().map(|c| e.diff(*c)).collect()).collect()
    }

    /// Lie bracket `[V, W] = J_W V - J_V W`, i.e. component `i` equals
    /// `sum_j V^j d_j W^i - W^j d_j V^i`.
    pub fn lie_bracket(&self, other: &VectorFieldExpr) -> Result<VectorFieldExpr, FieldError> {
        if self.basis != other.basis {
            return Err(FieldError::Dimension(format!(
                "bracket of fields over different bases ({} vs {} coordinates)",
                self.dim(),
                other.dim()
            )));
        }
        if self == other {
            return Ok(VectorFieldExpr::zero(self.basis.clone()));
        }
        let comps = (0..self.dim())
            .map(|i| {
                let mut terms = Vec::new();
                for (j, c) in self.basis.iter().enumerate() {
                    let vj = &self.components[j];
                    let wj = &other.components[j];
                    if !vj.is_zero() {
                        let dw = other.components[i].diff(*c);
                        if !dw.is_zero() {
                            terms.push(Expr::mul([vj.clone(), dw]));
                        }
                    }
                    if !wj.is_zero() {
                        let dv = self.components[i].diff(*c);
                        if !dv.is_zero() {
                            terms.push(Expr::mul([Expr::constant(-1.0), wj.clone(), dv]));
                        }
                    }
                }
                Expr::add(terms)
            })
            .collect();
        Ok(VectorFieldExpr { basis: self.basis.clone(), components: comps })
    }

    pub fn add(&self, other: &VectorFieldExpr) -> Result<VectorFieldExpr, FieldError> {
        if self.basis != other.basis {
            return Err(FieldError::Dimension("sum of fields over different bases".into()));
        }
        let components =
            self.components.iter().zip(&other.components).map(|(a, b)| Expr::add([a.clone(), b.clone()])).collect();
        Ok(VectorFieldExpr { basis: self.basis.clone(), components })
    }

    pub fn scale(&self, a: &Expr) -> VectorFieldExpr {
        let components = self.components.iter().map(|c| Expr::mul([a.clone(), c.clone()])).collect();
        VectorFieldExpr { basis: self.basis.clone(), components }
    }

    /// Prepends a `t` slot holding `time_component`.
    pub fn lift(&self, time_component: Expr) -> VectorFieldExpr {
        let mut basis = vec![Coord::T];
        basis.extend_from_slice(&self.basis);
        let mut components = vec![time_component];
        components.extend_from_slice(&self.components);
        VectorFieldExpr { basis, components }
    }

    /// Drops a leading `t` slot, requiring it to be the literal zero expression.
    pub fn drop_time_slot(&self) -> Result<VectorFieldExpr, FieldError> {
        if self.basis.first() != Some(&Coord::T) {
            return Err(FieldError::Dimension("field has no time slot".into()));
        }
        if !self.components[0].is_zero() {
            return Err(FieldError::TimeSlot(self.components[0].to_string()));
        }
        Ok(VectorFieldExpr { basis: self.basis[1..].to_vec(), components: self.components[1..].to_vec() })
    }

    /// Re-expresses the field over a larger basis, padding with zeros.
    pub fn embed(&self, basis: &[Coord]) -> Result<VectorFieldExpr, FieldError> {
        let mut components = vec![Expr::zero(); basis.len()];
        for (c, e) in self.basis.iter().zip(&self.components) {
            let pos = basis
                .iter()
                .position(|b| b == c)
                .ok_or_else(|| FieldError::Dimension(format!("coordinate {c} missing from target basis")))?;
            components[pos] = e.clone();
        }
        Ok(VectorFieldExpr { basis: basis.to_vec(), components })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_sign_convention() {
        let v = VectorFieldExpr::new(vec![Coord::Z(0)], vec![Expr::z(0)]).unwrap();
        let w = VectorFieldExpr::new(vec![Coord::Z(0)], vec![Expr::one()]).unwrap();
        let b = v.lie_bracket(&w).unwrap();
        assert_eq!(b.component(0), &Expr::constant(-1.0));
        assert!(v.lie_bracket(&v).unwrap().is_zero());
    }

    #[test]
    fn spiral_bracket_against_constant_field() {
        let (x, y) = (Expr::x(0), Expr::y(0));
        let r2 = Expr::add([Expr::pow(x.clone(), 2.0), Expr::pow(y.clone(), 2.0)]);
        let f = Expr::sub(Expr::sub(x.clone(), y.clone()), Expr::mul([x.clone(), r2.clone()]));
        let g = Expr::sub(Expr::add([x.clone(), y.clone()]), Expr::mul([y, r2]));
        let basis = xy_basis(1, 1);
        let ff = VectorFieldExpr::new(basis.clone(), vec![f, g]).unwrap();
        let gg = VectorFieldExpr::new(basis, vec![Expr::one(), Expr::zero()]).unwrap();
        let b = gg.lie_bracket(&ff).unwrap();
        let p = Point::new(0.0, vec![1.0], vec![0.0], vec![]);
        // Oracle: [G,F] = J_F G - J_G F = dF/dx since G is constant; central differences at (1,0).
        let h = 1e-6;
        let fx = |x: f64, y: f64| [x - y - x * (x * x + y * y), x + y - y * (x * x + y * y)];
        let (a, c) = (fx(1.0 + h, 0.0), fx(1.0 - h, 0.0));
        let fd = [(a[0] - c[0]) / (2.0 * h), (a[1] - c[1]) / (2.0 * h)];
        let got = b.evaluate(&p).unwrap();
        assert!((got[0] - fd[0]).abs() < 1e-8 && (got[1] - fd[1]).abs() < 1e-8);
        assert_eq!(got, vec![-2.0, 1.0]);
    }

    #[test]
    fn spiral_field_on_orbit() {
        let (x, y) = (Expr::x(0), Expr::y(0));
        let r2 = Expr::add([Expr::pow(x.clone(), 2.0), Expr::pow(y.clone(), 2.0)]);
        let f = Expr::sub(Expr::sub(x.clone(), y.clone()), Expr::mul([x.clone(), r2.clone()]));
        let g = Expr::sub(Expr::add([x.clone(), y.clone()]), Expr::mul([y, r2]));
        let ff = VectorFieldExpr::new(xy_basis(1, 1), vec![f, g]).unwrap();
        let p = Point::new(0.0, vec![1.0], vec![0.0], vec![]);
        assert_eq!(ff.evaluate(&p).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn mismatched_bracket_is_error() {
        let v = VectorFieldExpr::new(vec![Coord::Z(0)], vec![Expr::z(0)]).unwrap();
        let w = VectorFieldExpr::new(vec![Coord::X(0)], vec![Expr::one()]).unwrap();
        assert!(v.lie_bracket(&w).is_err());
        assert!(VectorFieldExpr::new(vec![Coord::X(0)], vec![]).is_err());
    }

    #[test]
    fn time_slot_handling() {
        let v = VectorFieldExpr::new(vec![Coord::Z(0)], vec![Expr::z(0)]).unwrap();
        let lifted = v.lift(Expr::zero());
        assert_eq!(lifted.drop_time_slot().unwrap(), v);
        assert!(v.lift(Expr::one()).drop_time_slot().is_err());
    }
}
