use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Overlays flags on a config-file object: flags win, then the file, then
/// whatever defaults the subcommand applies to the remaining `None`s.
pub fn merge<T: Serialize + DeserializeOwned + Default>(flags: &T, config: Option<&Map<String, Value>>) -> Result<T> {
    let Value::Object(known) = serde_json::to_value(T::default())? else {
        bail!("arguments must serialize to an object");
    };
    let mut merged = Map::new();
    if let Some(c) = config {
        for (k, v) in c {
            if !known.contains_key(k) {
                let mut keys: Vec<&String> = known.keys().collect();
                keys.sort();
                bail!("unknown config key `{k}`; expected one of {keys:?}");
            }
            merged.insert(k.clone(), v.clone());
        }
    }
    if let Value::Object(f) = serde_json::to_value(flags)? {
        for (k, v) in f {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).context("invalid parameters")
}

pub fn read_config(path: &Path) -> Result<Map<String, Value>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    match serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))? {
        Value::Object(m) => Ok(m),
        _ => bail!("config {} must be a JSON object", path.display()),
    }
}

/// A seed from the clock, used when none was given.
pub fn fresh_seed() -> u64 {
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
    hypolab_core::sim::splitmix64(nanos as u64 ^ (nanos >> 64) as u64 ^ std::process::id() as u64)
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    config: Option<String>,
    parameters: &'a Value,
    seeds: &'a [u64],
    seed_generated: bool,
    outputs: &'a [String],
    started_unix: f64,
    wall_clock_seconds: f64,
    version: &'a str,
}

/// Single writer for everything under `--out`.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
    started: Instant,
    started_unix: f64,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        // A stale manifest would mark a half-written run as complete.
        let stale = dir.join("manifest.json");
        if stale.exists() {
            fs::remove_file(&stale).with_context(|| format!("removing {}", stale.display()))?;
        }
        Ok(Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        })
    }

    pub fn write_with<F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>>(
        &mut self,
        name: &str,
        f: F,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(v)?;
        self.write_with(name, |w| writeln!(w, "{text}"))
    }

    /// Writes `manifest.json`; called last.
    pub fn finish(
        self,
        subcommand: &str,
        config: Option<&Path>,
        parameters: &Value,
        seeds: &[u64],
        seed_generated: bool,
    ) -> Result<()> {
        let m = Manifest {
            subcommand,
            config: config.map(|p| p.display().to_string()),
            parameters,
            seeds,
            seed_generated,
            outputs: &self.files,
            started_unix: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION"),
        };
        let text = serde_json::to_string_pretty(&m)?;
        let path = self.dir.join("manifest.json");
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// Writes a CSV with `header` and rows of displayable cells.
pub fn csv_rows<W: Write, R: IntoIterator<Item = Vec<String>>>(
    w: &mut W,
    header: &[&str],
    rows: R,
) -> std::io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Default, Serialize, Deserialize, Debug, PartialEq)]
    #[serde(rename_all = "kebab-case")]
    struct A {
        n_max: Option<usize>,
        eps: Option<f64>,
        model: Option<String>,
    }

    #[test]
    fn flags_override_config() {
        let cfg: Map<String, Value> = serde_json::from_str(r#"{"n-max": 5, "eps": 0.5}"#).unwrap();
        let flags = A { eps: Some(0.1), ..Default::default() };
        let m = merge(&flags, Some(&cfg)).unwrap();
        assert_eq!(m, A { n_max: Some(5), eps: Some(0.1), model: None });
        let bad: Map<String, Value> = serde_json::from_str(r#"{"nmax": 5}"#).unwrap();
        assert!(merge(&flags, Some(&bad)).is_err());
    }
}
