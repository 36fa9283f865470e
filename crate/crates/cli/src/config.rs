//! Config files, flag merging and exit-code mapping.

use std::fs;
use std::io::Write;
use std::path::Path;

use dwig_core::ensemble::Potential;
use dwig_core::measure::Measure;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::Format;

/// Version of every JSON document and CSV layout written by the tool.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
            CliError::Check(_) => 3,
        }
    }
}

impl From<dwig_core::Error> for CliError {
    fn from(e: dwig_core::Error) -> Self {
        use dwig_core::Error as E;
        match e {
            E::InvalidMeasure(_) | E::InvalidParameter { .. } | E::Invalid(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Reads `--config` as a JSON object (empty when absent).
pub fn read_config_value(path: Option<&Path>) -> CliResult<Map<String, Value>> {
    let Some(path) = path else { return Ok(Map::new()) };
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    match serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))? {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::Config(format!("{}: expected a JSON object", path.display()))),
    }
}

/// Removes the keys shared by all subcommands (`seed`, `format`).
pub fn split_common(mut m: Map<String, Value>) -> CliResult<(Option<u64>, Option<Format>, Map<String, Value>)> {
    let seed = m.remove("seed").map(serde_json::from_value).transpose().map_err(|e| CliError::Config(format!("seed: {e}")))?;
    let format = m.remove("format").map(serde_json::from_value).transpose().map_err(|e| CliError::Config(format!("format: {e}")))?;
    Ok((seed, format, m))
}

/// Deserializes the remaining config keys into a subcommand's argument struct.
/// Unknown keys are rejected.
pub fn from_value<T: DeserializeOwned + Serialize + Default>(m: Map<String, Value>) -> CliResult<T> {
    if let Value::Object(known) = serde_json::to_value(T::default()).expect("serializable") {
        if let Some(k) = m.keys().find(|k| !known.contains_key(*k)) {
            return Err(CliError::Config(format!("config: unknown field `{k}`")));
        }
    }
    serde_json::from_value(Value::Object(m)).map_err(|e| CliError::Config(format!("config: {e}")))
}

/// Fills every `None` field of `$flags` from `$cfg`.
macro_rules! merge {
    ($flags:expr, $cfg:expr; $($f:ident),* $(,)?) => {{
        let mut a = $flags;
        let b = $cfg;
        $( if a.$f.is_none() { a.$f = b.$f; } )*
        a
    }};
}
pub(crate) use merge;

/// Parses a measure given inline as JSON, as `@path`, or by name
/// (`semicircle`, `two-atom`, `dirac:<c>`, `jacobi:<a>,<b>`).
pub fn parse_measure(s: &str) -> CliResult<Measure<f64>> {
    let s = s.trim();
    if let Some(path) = s.strip_prefix('@') {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read measure file {path}: {e}")))?;
        return parse_measure_json(&text);
    }
    if s.starts_with('{') {
        return parse_measure_json(s);
    }
    let bad = || CliError::Config(format!("measure: unrecognized value `{s}`"));
    match s {
        "semicircle" => Ok(Measure::dirac(0.0)),
        "two-atom" => Ok(Measure::atomic(vec![(-1.0, 0.5), (1.0, 0.5)])?),
        _ => {
            if let Some(c) = s.strip_prefix("dirac:") {
                Ok(Measure::dirac(c.parse().map_err(|_| bad())?))
            } else if let Some(ab) = s.strip_prefix("jacobi:") {
                let (a, b) = ab.split_once(',').ok_or_else(bad)?;
                Ok(Measure::jacobi(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)?)
            } else {
                Err(bad())
            }
        }
    }
}

fn parse_measure_json(text: &str) -> CliResult<Measure<f64>> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("measure: {e}")))
}

/// Parses `two-atom`, `alternating`, `zero`, `constant:<c>` or a measure (iid).
pub fn parse_potential(s: &str, n: usize) -> CliResult<Potential> {
    match s.trim() {
        "two-atom" => Ok(Potential::two_atom()),
        "alternating" => Ok(Potential::alternating(n)),
        "zero" => Ok(Potential::Fixed { values: vec![0.0; n] }),
        other => {
            if let Some(c) = other.strip_prefix("constant:") {
                let c: f64 = c.parse().map_err(|_| CliError::Config(format!("potential: bad constant `{c}`")))?;
                Ok(Potential::Fixed { values: vec![c; n] })
            } else {
                Ok(Potential::Iid { measure: parse_measure(other)? })
            }
        }
    }
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| CliError::Config(format!("{what}: cannot parse `{x}`"))))
        .collect()
}

/// Writes to the file, or to stdout when `path` is `None`.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

pub fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

pub fn require<T>(v: Option<T>, name: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Config(format!("missing required value `{name}` (flag or config)")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_measures() {
        assert_eq!(parse_measure("semicircle").unwrap(), Measure::dirac(0.0));
        assert_eq!(parse_measure("dirac:0.5").unwrap(), Measure::dirac(0.5));
        assert!(parse_measure("jacobi:1,2").is_ok());
        assert!(matches!(parse_measure("jacobi:1"), Err(CliError::Config(_))));
        assert!(matches!(parse_measure("nope"), Err(CliError::Config(_))));
        let inline = parse_measure(r#"{"type":"atomic","atoms":[[1,0.5],[-1,0.5]]}"#).unwrap();
        assert_eq!(inline, parse_measure("two-atom").unwrap());
    }

    #[test]
    fn potentials() {
        assert_eq!(parse_potential("constant:2", 3).unwrap(), Potential::Fixed { values: vec![2.0; 3] });
        assert_eq!(parse_potential("alternating", 4).unwrap(), Potential::alternating(4));
        assert!(matches!(parse_potential("dirac:1", 4).unwrap(), Potential::Iid { .. }));
    }

    #[test]
    fn merge_prefers_flags() {
        #[derive(Default)]
        struct A {
            x: Option<i32>,
            y: Option<i32>,
        }
        let m = merge!(A { x: Some(1), y: None }, A { x: Some(5), y: Some(6) }; x, y);
        assert_eq!((m.x, m.y), (Some(1), Some(6)));
    }

    #[test]
    fn common_keys_are_split_off() {
        let m: Map<String, Value> = serde_json::from_str(r#"{"seed":3,"format":"json","lambda":1}"#).unwrap();
        let (seed, format, rest) = split_common(m).unwrap();
        assert_eq!(seed, Some(3));
        assert_eq!(format, Some(Format::Json));
        assert_eq!(rest.len(), 1);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Numerical(String::new()).exit_code(), 1);
        assert_eq!(CliError::Check(String::new()).exit_code(), 3);
        let e: CliError = dwig_core::Error::MultiCut.into();
        assert_eq!(e.exit_code(), 1);
    }
}
