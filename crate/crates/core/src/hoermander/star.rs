//! Star recursion `L_{k,1} = [V_{k1}, V0]`, `L_{k,n} = [V_{kn}, L_{k,n-1}]`
//! and its closed form
//!
//! ```text
//! L_{k,n} = (zeta, 0, zeta) + sum_{1 <= |a| <= n} p_{k,n,a} (d^a_x F, 0)
//! ```
//!
//! with `zeta_{k1} = [sigma_{k1}, b^]`, `zeta_{k1..kn} = [sigma_{kn}, zeta_{k1..k(n-1)}]`
//! taken over `z` at fixed `t`, and coefficients from the two-step scheme:
//! boundary values for `|a| in {0, n}`, then
//! `p_{n,a} = sum_i sigma_{i,kn} (d_{z_i} p_{n-1,a} + p_{n-1,a-e_i} [a_i != 0])`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::field::{Coord, Expr, Point, VectorFieldExpr};
use crate::linalg;
use crate::model::ModelSpec;

use super::rank::{SpanningVector, Verdict};
use super::{BracketEngine, BracketPath, BracketWord, HoermanderError, RANK_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StarMode {
    Nested,
    ClosedForm,
}

/// The nested bracket word `[V_{kl}, [..., [V_{k1}, V0]]]`.
pub fn star_word(path: &BracketPath) -> BracketWord {
    let ks = path.indices();
    let mut w = BracketWord::br(BracketWord::Gen(ks[0]), BracketWord::Gen(0));
    for &k in &ks[1..] {
        w = BracketWord::br(BracketWord::Gen(k), w);
    }
    w
}

/// All multi-indices in `N_0^vars` with `|a|_1 = s`, lexicographically descending.
pub fn multi_indices(vars: usize, s: usize) -> Vec<Vec<u32>> {
    if vars == 0 {
        return if s == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=s).rev() {
        for mut rest in multi_indices(vars - 1, s - first) {
            rest.insert(0, first as u32);
            out.push(rest);
        }
    }
    out
}

/// Coefficients `p_{k,n,a}` for `n = 1..=l(k)` and `0 <= |a| <= n`.
#[derive(Clone, Debug)]
pub struct CoeffTable {
    pub path: BracketPath,
    pub vars: usize,
    pub entries: BTreeMap<(usize, Vec<u32>), Expr>,
}

impl CoeffTable {
    pub fn get(&self, n: usize, alpha: &[u32]) -> Option<&Expr> {
        self.entries.get(&(n, alpha.to_vec()))
    }

    /// Builds the table by the boundary-then-recursion scheme.
    pub fn build(m: &ModelSpec, path: &BracketPath) -> Result<CoeffTable, HoermanderError> {
        let ks = path.indices();
        if ks.iter().any(|&k| k == 0 || k > m.m) {
            return Err(HoermanderError::Path(format!("path {path} outside 1..={}", m.m)));
        }
        let nv = m.n;
        let mut entries: BTreeMap<(usize, Vec<u32>), Expr> = BTreeMap::new();
        for n in 1..=ks.len() {
            entries.insert((n, vec![0; nv]), Expr::zero());
            for (alpha, p) in boundary_products(m, &ks[..n]) {
                entries.insert((n, alpha), p);
            }
            for s in 1..n {
                for alpha in multi_indices(nv, s) {
                    let mut terms = Vec::new();
                    for i in 0..nv {
                        let sig = &m.sigma[i][ks[n - 1] - 1];
                        let prev = &entries[&(n - 1, alpha.clone())];
                        let mut inner = vec![prev.diff(Coord::Z(i))];
                        if alpha[i] != 0 {
                            let mut shifted = alpha.clone();
                            shifted[i] -= 1;
                            inner.push(entries[&(n - 1, shifted)].clone());
                        }
                        terms.push(Expr::mul([sig.clone(), Expr::add(inner)]));
                    }
                    entries.insert((n, alpha), Expr::add(terms));
                }
            }
        }
        Ok(CoeffTable { path: path.clone(), vars: nv, entries })
    }
}

/// `sum over ordered (i1..in) with multiset a of sigma_{i1,k1} ... sigma_{in,kn}`, per `a`.
fn boundary_products(m: &ModelSpec, ks: &[usize]) -> BTreeMap<Vec<u32>, Expr> {
    let nv = m.n;
    let mut acc: BTreeMap<Vec<u32>, Vec<Expr>> = BTreeMap::new();
    let n = ks.len();
    let total = nv.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let mut alpha = vec![0u32; nv];
        let mut factors = Vec::with_capacity(n);
        for &k in ks {
            let i = c % nv;
            c /= nv;
            alpha[i] += 1;
            factors.push(m.sigma[i][k - 1].clone());
        }
        acc.entry(alpha).or_default().push(Expr::mul(factors));
    }
    multi_indices(nv, n)
        .into_iter()
        .map(|a| {
            let terms = acc.remove(&a).unwrap_or_default();
            (a, Expr::add(terms))
        })
        .collect()
}

impl BracketEngine {
    pub fn coeff_table(&self, path: &BracketPath) -> Result<CoeffTable, HoermanderError> {
        CoeffTable::build(self.model(), path)
    }

    /// `zeta_k` over the `z` basis (time-dependent through `S0`).
    pub fn zeta(&self, path: &BracketPath) -> Result<VectorFieldExpr, HoermanderError> {
        let ks = path.indices();
        let f = self.fields();
        if ks.iter().any(|&k| k == 0 || k > f.m) {
            return Err(HoermanderError::Path(format!("path {path} outside 1..={}", f.m)));
        }
        let mut z = f.sigma_cols[ks[0] - 1].lie_bracket(&f.b_hat)?;
        for &k in &ks[1..] {
            z = f.sigma_cols[k - 1].lie_bracket(&z)?;
        }
        Ok(z)
    }

    /// Reduced field `sum_{1<=|a|<=l} p_{k,l,a} d^a_x F` at `p`, in `R^{N+L}`.
    pub fn reduced_star(&self, path: &BracketPath, p: &Point) -> Result<Vec<f64>, HoermanderError> {
        let table = self.coeff_table(path)?;
        Ok(self.reduced_from_table(&table, path.len(), p))
    }

    fn reduced_from_table(&self, table: &CoeffTable, n: usize, p: &Point) -> Vec<f64> {
        let m = self.model();
        let env = p.env();
        let mut out = vec![0.0; m.n + m.l];
        for s in 1..=n {
            for alpha in multi_indices(m.n, s) {
                let c = &table.entries[&(n, alpha.clone())];
                if c.is_zero() {
                    continue;
                }
                let cv = c.eval(&env);
                for (o, e) in out.iter_mut().zip(self.d_alpha_f(&alpha).iter()) {
                    *o += cv * e.eval(&env);
                }
            }
        }
        out
    }

    /// `L_{k,l}` at `p`, by literal nested brackets or by the closed form.
    pub fn star_bracket(&self, path: &BracketPath, p: &Point, mode: StarMode) -> Result<Vec<f64>, HoermanderError> {
        let m = self.model();
        p.check(m.n, m.l)?;
        if path.indices().iter().any(|&k| k > m.m) {
            return Err(HoermanderError::Path(format!("path {path} outside 1..={}", m.m)));
        }
        match mode {
            StarMode::Nested => self.eval_word(&star_word(path), p),
            StarMode::ClosedForm => {
                let zeta = self.zeta(path)?.evaluate(p)?;
                let red = self.reduced_star(path, p)?;
                let mut v = vec![0.0; m.state_dim()];
                for i in 0..m.n {
                    v[i] = zeta[i] + red[i];
                    v[m.n + m.l + i] = zeta[i];
                }
                v[m.n..m.n + m.l].copy_from_slice(&red[m.n..]);
                Ok(v)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StarConditionMode {
    /// `sigma(z)` invertible diagonal; one path `(k1, ..., k_{N+L})` whose prefixes are used.
    Diagonal,
    /// `sigma` constant and surjective; `N + L` paths.
    ConstantSurjective,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StarConditionReport {
    pub mode: StarConditionMode,
    pub vectors: Vec<SpanningVector>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub required_rank: usize,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Sufficient conditions for the star strategy: linear independence of
/// iterated `x`-derivatives of `F` (diagonal `sigma`) or of their
/// sigma-weighted sums (constant surjective `sigma`).
pub fn check_star_conditions(
    m: &ModelSpec,
    phi: &Point,
    mode: StarConditionMode,
    paths: &[BracketPath],
) -> Result<StarConditionReport, HoermanderError> {
    let engine = BracketEngine::new(m)?;
    phi.check(m.n, m.l)?;
    let need = m.n + m.l;
    let sig = m.sigma_at(&phi.z);
    let mut vectors = Vec::new();
    match mode {
        StarConditionMode::Diagonal => {
            if m.m != m.n {
                return Err(HoermanderError::Shape(format!("diagonal mode needs M = N, got M = {}", m.m)));
            }
            let scale = sig.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            for (i, row) in sig.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    if i == j && *v == 0.0 {
                        return Err(HoermanderError::Shape(format!("sigma_{0}{0} vanishes at z", i + 1)));
                    }
                    if i != j && v.abs() > 1e-12 * scale {
                        return Err(HoermanderError::Shape(format!(
                            "sigma_{}{} = {v} is off-diagonal nonzero",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
            if paths.len() != 1 || paths[0].len() != need {
                return Err(HoermanderError::Shape(format!("diagonal mode takes one path of length N+L = {need}")));
            }
            let ks = paths[0].indices();
            if ks.iter().any(|&k| k > m.m) {
                return Err(HoermanderError::Path(format!("path {} outside 1..={}", paths[0], m.m)));
            }
            for n in 1..=need {
                let mut alpha = vec![0u32; m.n];
                for &k in &ks[..n] {
                    alpha[k - 1] += 1;
                }
                let env = phi.env();
                let values = engine.d_alpha_f(&alpha).iter().map(|e| e.eval(&env)).collect();
                let label: Vec<String> = ks[..n].iter().map(|k| format!("x{k}")).collect();
                vectors.push(SpanningVector { descriptor: format!("d[{}]F", label.join(",")), values });
            }
        }
        StarConditionMode::ConstantSurjective => {
            if !m.sigma_is_constant() {
                return Err(HoermanderError::Shape("sigma is not constant".into()));
            }
            let sv =
                linalg::singular_values(m.n, &(0..m.m).map(|k| sig.iter().map(|r| r[k]).collect()).collect::<Vec<_>>());
            if linalg::numerical_rank(&sv, 1e-12) < m.n {
                return Err(HoermanderError::Shape("sigma is not surjective".into()));
            }
            if paths.len() != need {
                return Err(HoermanderError::Shape(format!(
                    "constant-surjective mode takes N+L = {need} paths, got {}",
                    paths.len()
                )));
            }
            for path in paths {
                if path.indices().iter().any(|&k| k > m.m) {
                    return Err(HoermanderError::Path(format!("path {path} outside 1..={}", m.m)));
                }
                let values = engine.reduced_star(path, phi)?;
                vectors.push(SpanningVector { descriptor: format!("Lbar{path}"), values });
            }
        }
    }
    let cols: Vec<Vec<f64>> = vectors.iter().map(|v| v.values.clone()).collect();
    let singular_values = linalg::singular_values(need, &cols);
    let rank = linalg::numerical_rank(&singular_values, RANK_TOL);
    let verdict = if rank == need { Verdict::Pass } else { Verdict::Fail };
    Ok(StarConditionReport { mode, vectors, singular_values, rank, required_rank: need, tolerance: RANK_TOL, verdict })
}
