use serde::{Deserialize, Serialize};

use crate::field::Expr;

use super::{Domain, ModelError, ModelSpec, SignalSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "M")]
    pub m: usize,
}

/// On-disk JSON form of a model; expressions are s-expression strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub dims: Dims,
    pub f: Vec<String>,
    pub g: Vec<String>,
    pub b: Vec<String>,
    pub sigma: Vec<Vec<String>>,
    pub signal: SignalSpec,
    #[serde(rename = "T")]
    pub period: f64,
    pub domain: Domain,
}

fn parse_all(v: &[String]) -> Result<Vec<Expr>, ModelError> {
    v.iter().map(|s| Expr::parse(s).map_err(ModelError::from)).collect()
}

impl ModelConfig {
    pub fn from_spec(m: &ModelSpec) -> Self {
        let strs = |v: &[Expr]| v.iter().map(|e| e.to_string()).collect::<Vec<_>>();
        ModelConfig {
            name: Some(m.name.clone()),
            dims: Dims { n: m.n, l: m.l, m: m.m },
            f: strs(&m.f),
            g: strs(&m.g),
            b: strs(&m.b),
            sigma: m.sigma.iter().map(|r| strs(r)).collect(),
            signal: m.signal.clone(),
            period: m.period,
            domain: m.domain.clone(),
        }
    }

    pub fn to_spec(&self) -> Result<ModelSpec, ModelError> {
        let spec = ModelSpec {
            name: self.name.clone().unwrap_or_else(|| "custom".into()),
            n: self.dims.n,
            l: self.dims.l,
            m: self.dims.m,
            f: parse_all(&self.f)?,
            g: parse_all(&self.g)?,
            b: parse_all(&self.b)?,
            sigma: self.sigma.iter().map(|r| parse_all(r)).collect::<Result<_, _>>()?,
            signal: self.signal.clone(),
            period: self.period,
            domain: self.domain.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        serde_json::from_str(s).map_err(|e| ModelError::Config(e.to_string()))
    }
}

impl ModelSpec {
    pub fn to_json(&self) -> String {
        ModelConfig::from_spec(self).to_json()
    }

    pub fn from_json(s: &str) -> Result<ModelSpec, ModelError> {
        ModelConfig::from_json(s)?.to_spec()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{builtin, BuiltinParams, BUILTIN_NAMES};
    use super::*;

    #[test]
    fn builtins_round_trip_bit_exact() {
        for name in BUILTIN_NAMES {
            let m = builtin(name, &BuiltinParams::default()).unwrap();
            let js = m.to_json();
            let back = ModelSpec::from_json(&js).unwrap();
            assert_eq!(back, m, "{name}");
            assert_eq!(back.to_json(), js, "{name}");
        }
    }

    #[test]
    fn config_shape_errors() {
        let m = builtin("spiral", &BuiltinParams::default()).unwrap();
        let mut c = ModelConfig::from_spec(&m);
        c.g.push("(x 1)".into());
        assert!(c.to_spec().is_err());
        assert!(ModelConfig::from_json("{\"dims\": 3}").is_err());
    }
}
