//! Flag value types. Each parses from flag text and deserializes from either
//! the same text or its natural JSON form, so config files can use both.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use hypolab_core::field::Expr;
use hypolab_core::model::{hh_rest_state, Interval, ModelSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn floats(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|v| v.trim().parse::<f64>().with_context(|| format!("`{v}` is not a number"))).collect()
}

/// Comma-separated numbers, e.g. `1,0,0.5`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TextOr<Vec<f64>>")]
pub struct Vector(pub Vec<f64>);

impl FromStr for Vector {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(Vector(floats(s)?))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
pub enum TextOr<T> {
    Text(String),
    Value(T),
}

impl TryFrom<TextOr<Vec<f64>>> for Vector {
    type Error = anyhow::Error;
    fn try_from(v: TextOr<Vec<f64>>) -> Result<Self> {
        match v {
            TextOr::Text(s) => s.parse(),
            TextOr::Value(v) => Ok(Vector(v)),
        }
    }
}

/// A state `(x, y, z)`: numbers, or `rest` for the zero-input rest state.
#[derive(Clone, Debug, PartialEq)]
pub enum StateArg {
    Rest,
    Values(Vec<f64>),
}

impl FromStr for StateArg {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rest" | "equilibrium" => Ok(StateArg::Rest),
            other => Ok(StateArg::Values(floats(other)?)),
        }
    }
}

impl Serialize for StateArg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            StateArg::Rest => s.serialize_str("rest"),
            StateArg::Values(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for StateArg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match TextOr::<Vec<f64>>::deserialize(d)? {
            TextOr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            TextOr::Value(v) => Ok(StateArg::Values(v)),
        }
    }
}

impl StateArg {
    pub fn resolve(&self, m: &ModelSpec) -> Result<Vec<f64>> {
        let s = match self {
            StateArg::Rest => hh_rest_state(m)?.state(),
            StateArg::Values(v) => v.clone(),
        };
        if s.len() != m.state_dim() {
            bail!("state has {} entries, model {} has state dimension {}", s.len(), m.name, m.state_dim());
        }
        Ok(s)
    }
}

/// A box `lo:hi,lo:hi,...`; an empty bound is infinite.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxArg(pub Vec<Interval>);

impl FromStr for BoxArg {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        let bound = |v: &str| -> Result<Option<f64>> {
            let v = v.trim();
            if v.is_empty() {
                Ok(None)
            } else {
                Ok(Some(v.parse().with_context(|| format!("`{v}` is not a number"))?))
            }
        };
        s.split(',')
            .map(|iv| {
                let (lo, hi) = iv.split_once(':').ok_or_else(|| anyhow!("interval `{iv}` is not lo:hi"))?;
                Ok(Interval { lo: bound(lo)?, hi: bound(hi)? })
            })
            .collect::<Result<_>>()
            .map(BoxArg)
    }
}

impl Serialize for BoxArg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoxArg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match TextOr::<Vec<Interval>>::deserialize(d)? {
            TextOr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            TextOr::Value(v) => Ok(BoxArg(v)),
        }
    }
}

/// A JSON value given inline on the command line, or as an object in a config file.
#[derive(Clone, Debug, PartialEq)]
pub struct Inline<T>(pub T);

impl<T: DeserializeOwned> FromStr for Inline<T> {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(Inline(serde_json::from_str(s).context("invalid JSON")?))
    }
}

impl<T: Serialize> Serialize for Inline<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de, T: DeserializeOwned> Deserialize<'de> for Inline<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            v => serde_json::from_value(v).map(Inline).map_err(serde::de::Error::custom),
        }
    }
}

/// Diffusion override: `const:v` (v times the identity), `diag:v1,...,vN`
/// or `matrix:r1;r2;...` with comma-separated rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SigmaArg {
    Const(f64),
    Diag(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl FromStr for SigmaArg {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, body) = s.split_once(':').ok_or_else(|| anyhow!("sigma `{s}` is not kind:values"))?;
        match kind {
            "const" => Ok(SigmaArg::Const(body.trim().parse().with_context(|| format!("`{body}` is not a number"))?)),
            "diag" => Ok(SigmaArg::Diag(floats(body)?)),
            "matrix" => {
                let rows = body.split(';').map(floats).collect::<Result<Vec<_>>>()?;
                if rows.iter().any(|r| r.len() != rows[0].len()) {
                    bail!("sigma matrix rows differ in length");
                }
                Ok(SigmaArg::Matrix(rows))
            }
            other => bail!("unknown sigma kind `{other}` (const, diag, matrix)"),
        }
    }
}

impl TryFrom<String> for SigmaArg {
    type Error = anyhow::Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl fmt::Display for SigmaArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            SigmaArg::Const(v) => write!(f, "const:{v}"),
            SigmaArg::Diag(v) => write!(f, "diag:{}", join(v)),
            SigmaArg::Matrix(r) => write!(f, "matrix:{}", r.iter().map(|r| join(r)).collect::<Vec<_>>().join(";")),
        }
    }
}

impl From<SigmaArg> for String {
    fn from(s: SigmaArg) -> String {
        s.to_string()
    }
}

impl SigmaArg {
    /// `N x M` matrix of constant expressions.
    pub fn matrix(&self, n: usize) -> Result<Vec<Vec<Expr>>> {
        let rows: Vec<Vec<f64>> = match self {
            SigmaArg::Const(v) => (0..n).map(|i| (0..n).map(|j| if i == j { *v } else { 0.0 }).collect()).collect(),
            SigmaArg::Diag(d) => {
                if d.len() != n {
                    bail!("diag sigma needs {n} entries, got {}", d.len());
                }
                (0..n).map(|i| (0..n).map(|j| if i == j { d[i] } else { 0.0 }).collect()).collect()
            }
            SigmaArg::Matrix(r) => {
                if r.len() != n {
                    bail!("sigma matrix needs {n} rows, got {}", r.len());
                }
                r.clone()
            }
        };
        Ok(rows.into_iter().map(|r| r.into_iter().map(Expr::constant).collect()).collect())
    }
}

/// Semicolon-separated lists of comma-separated integers, e.g. `1;1,2;2,2`.
pub fn parse_paths(s: &str) -> Result<Vec<Vec<usize>>> {
    s.split(';')
        .map(|p| {
            p.split(',').map(|k| k.trim().parse::<usize>().with_context(|| format!("`{k}` is not an index"))).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_parse_from_text_and_json() {
        assert_eq!("1, -2.5".parse::<Vector>().unwrap(), Vector(vec![1.0, -2.5]));
        let v: Vector = serde_json::from_str("[1, 2]").unwrap();
        assert_eq!(v, Vector(vec![1.0, 2.0]));
        let v: Vector = serde_json::from_str("\"3,4\"").unwrap();
        assert_eq!(v, Vector(vec![3.0, 4.0]));
        assert_eq!("rest".parse::<StateArg>().unwrap(), StateArg::Rest);
        let b: BoxArg = ":1,-2:3".parse().unwrap();
        assert_eq!(b.0, vec![Interval { lo: None, hi: Some(1.0) }, Interval::new(-2.0, 3.0)]);
        assert!("1:2:3".parse::<BoxArg>().is_err());
    }

    #[test]
    fn sigma_forms() {
        let s: SigmaArg = "matrix:1,1,2;0,1,1".parse().unwrap();
        assert_eq!(s.matrix(2).unwrap()[0].len(), 3);
        assert!(s.matrix(3).is_err());
        let c: SigmaArg = "const:0".parse().unwrap();
        assert_eq!(c.to_string(), "const:0");
        assert!(c.matrix(2).unwrap().iter().flatten().all(Expr::is_zero));
        assert!("diag:1,2".parse::<SigmaArg>().unwrap().matrix(3).is_err());
        assert!("exp:1".parse::<SigmaArg>().is_err());
        assert_eq!(parse_paths("1;1,2").unwrap(), vec![vec![1], vec![1, 2]]);
    }
}
