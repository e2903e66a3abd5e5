//! Strict run configuration: TOML with one section per module plus one
//! section named after the experiment.
//!
//! ```toml
//! experiment = "volume-scaling"
//! seed = 42
//!
//! [field]
//! gamma = 1.632993161855452
//!
//! [volume-scaling]
//! n_replicas = 50
//! ```
//!
//! Every key must be declared by the experiment's schema; missing keys take
//! the schema default. The resolved table is the canonical config.

use std::path::Path;

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{CliError, Result};
use crate::registry::{self, Experiment, Param};

pub const DEFAULT_SEED: i64 = 1;

/// A fully resolved configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub experiment: &'static Experiment,
    pub seed: u64,
    /// Canonical table: `experiment`, `seed` and every schema key.
    pub table: Table,
}

fn config_err(key: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config { key: key.into(), message: message.into() }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

/// Coerces `v` to the shape of `default`. Integers are accepted where floats
/// are expected, element-wise inside arrays.
fn coerce(key: &str, v: Value, default: &Value) -> Result<Value> {
    match (default, v) {
        (Value::Float(_), Value::Integer(i)) => Ok(Value::Float(i as f64)),
        (Value::Array(d), Value::Array(xs)) => {
            let proto = d.first().cloned();
            let mut out = Vec::with_capacity(xs.len());
            for x in xs {
                out.push(match &proto {
                    Some(p) => coerce(key, x, p)?,
                    None => x,
                });
            }
            Ok(Value::Array(out))
        }
        (d, v) if std::mem::discriminant(d) == std::mem::discriminant(&v) => Ok(v),
        (d, v) => Err(config_err(key, format!("expected {}, found {}", type_name(d), type_name(&v)))),
    }
}

fn find_param<'a>(params: &'a [Param], section: &str, key: &str) -> Option<&'a Param> {
    params.iter().find(|p| p.section == section && p.key == key)
}

fn seed_value(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(config_err(key, "seed must be a nonnegative integer below 2^63")),
    }
}

/// Parses a `--set` value as a TOML value, falling back to a bare string.
pub fn parse_value(text: &str) -> Value {
    match format!("v = {text}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(text.into())),
        Err(_) => Value::String(text.into()),
    }
}

/// Splits `section.key=value`; top-level keys have no dot.
pub fn parse_override(arg: &str) -> Result<(String, Value)> {
    let (k, v) = arg.split_once('=').ok_or_else(|| config_err(arg, "expected key=value"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(config_err(arg, "empty key"));
    }
    Ok((k.to_string(), parse_value(v.trim())))
}

/// Input to [`resolve`].
#[derive(Debug, Default, Clone)]
pub struct Sources {
    /// Parsed config file, if any.
    pub file: Option<Table>,
    /// Experiment named on the command line.
    pub experiment: Option<String>,
    /// `--set` overrides in order.
    pub overrides: Vec<(String, Value)>,
    pub seed: Option<u64>,
}

/// Reads a TOML config, or the `config` table of a JSON run manifest.
pub fn read_file(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err("config", format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let m: crate::manifest::Manifest = serde_json::from_str(&text).map_err(|e| config_err("config", format!("{}: {e}", path.display())))?;
        return Ok(m.config);
    }
    text.parse::<Table>().map_err(|e| config_err("config", format!("{}: {}", path.display(), e.message())))
}

/// Merges defaults, file, overrides and seed into a canonical [`Config`].
pub fn resolve(src: &Sources) -> Result<Config> {
    let file = src.file.clone().unwrap_or_default();
    let name = match (&src.experiment, file.get("experiment")) {
        (Some(a), Some(Value::String(b))) if a != b => {
            return Err(config_err("experiment", format!("command line names {a:?} but the config names {b:?}")));
        }
        (Some(a), _) => a.clone(),
        (None, Some(Value::String(b))) => b.clone(),
        (None, Some(v)) => return Err(config_err("experiment", format!("expected string, found {}", type_name(v)))),
        (None, None) => {
            let set = src.overrides.iter().rev().find(|(k, _)| k == "experiment");
            match set {
                Some((_, Value::String(s))) => s.clone(),
                _ => return Err(config_err("experiment", "no experiment named; pass one or set `experiment` in the config")),
            }
        }
    };
    let exp = registry::find(&name).ok_or_else(|| config_err("experiment", format!("unknown experiment {name:?}; see `lqg list`")))?;
    let params = (exp.params)();

    let mut table = Table::new();
    table.insert("experiment".into(), Value::String(exp.name.into()));
    table.insert("seed".into(), Value::Integer(DEFAULT_SEED));
    for p in &params {
        let sec = table.entry(p.section).or_insert_with(|| Value::Table(Table::new()));
        if let Value::Table(t) = sec {
            t.insert(p.key.into(), p.default.clone());
        }
    }

    let set = |path: &str, v: Value, table: &mut Table| -> Result<()> {
        match path.split_once('.') {
            None => match path {
                "experiment" => match v {
                    Value::String(s) if s == exp.name => Ok(()),
                    _ => Err(config_err("experiment", format!("cannot change the experiment to {v}"))),
                },
                "seed" => {
                    seed_value("seed", &v)?;
                    table.insert("seed".into(), v);
                    Ok(())
                }
                _ => Err(config_err(path, format!("unknown key for experiment {:?}", exp.name))),
            },
            Some((section, key)) => {
                let p = find_param(&params, section, key).ok_or_else(|| config_err(path, format!("unknown key for experiment {:?}", exp.name)))?;
                let v = coerce(path, v, &p.default)?;
                if let Some(Value::Table(t)) = table.get_mut(section) {
                    t.insert(key.into(), v);
                }
                Ok(())
            }
        }
    };

    for (k, v) in file {
        match v {
            Value::Table(t) => {
                for (kk, vv) in t {
                    if let Value::Table(_) = vv {
                        return Err(config_err(format!("{k}.{kk}"), "nested tables are not allowed"));
                    }
                    set(&format!("{k}.{kk}"), vv, &mut table)?;
                }
            }
            v => set(&k, v, &mut table)?,
        }
    }
    for (k, v) in &src.overrides {
        set(k, v.clone(), &mut table)?;
    }
    if let Some(s) = src.seed {
        let s = i64::try_from(s).map_err(|_| config_err("seed", "seed must be below 2^63"))?;
        table.insert("seed".into(), Value::Integer(s));
    }
    let seed = seed_value("seed", &table["seed"])?;
    Ok(Config { experiment: exp, seed, table })
}

impl PartialEq for Config {
    fn eq(&self, other: &Self) -> bool {
        self.experiment.name == other.experiment.name && self.seed == other.seed && self.table == other.table
    }
}

impl Config {
    /// Canonical TOML text: sorted keys, defaults filled in.
    pub fn canonical(&self) -> String {
        toml::to_string(&self.table).expect("config tables serialize")
    }

    /// Hex SHA-256 of [`Config::canonical`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    fn get(&self, section: &str, key: &str) -> &Value {
        self.table
            .get(section)
            .and_then(|s| s.get(key))
            .unwrap_or_else(|| panic!("schema key {section}.{key} missing from resolved config"))
    }

    pub fn f64(&self, section: &str, key: &str) -> f64 {
        match self.get(section, key) {
            Value::Float(x) => *x,
            Value::Integer(i) => *i as f64,
            v => panic!("{section}.{key} is {v}, not a number"),
        }
    }

    pub fn i64(&self, section: &str, key: &str) -> i64 {
        match self.get(section, key) {
            Value::Integer(i) => *i,
            v => panic!("{section}.{key} is {v}, not an integer"),
        }
    }

    /// A nonnegative integer; negative values are a config error.
    pub fn usize(&self, section: &str, key: &str) -> Result<usize> {
        let i = self.i64(section, key);
        usize::try_from(i).map_err(|_| config_err(format!("{section}.{key}"), format!("must be nonnegative, got {i}")))
    }

    pub fn str(&self, section: &str, key: &str) -> &str {
        match self.get(section, key) {
            Value::String(s) => s,
            v => panic!("{section}.{key} is {v}, not a string"),
        }
    }

    pub fn f64_list(&self, section: &str, key: &str) -> Vec<f64> {
        match self.get(section, key) {
            Value::Array(xs) => xs
                .iter()
                .map(|x| match x {
                    Value::Float(f) => *f,
                    Value::Integer(i) => *i as f64,
                    v => panic!("{section}.{key} holds {v}"),
                })
                .collect(),
            v => panic!("{section}.{key} is {v}, not an array"),
        }
    }

    /// An array of `[x, y]` pairs.
    pub fn points(&self, section: &str, key: &str) -> Result<Vec<(f64, f64)>> {
        let bad = || config_err(format!("{section}.{key}"), "expected an array of [x, y] pairs");
        match self.get(section, key) {
            Value::Array(xs) => xs
                .iter()
                .map(|p| match p {
                    Value::Array(c) if c.len() == 2 => {
                        let f = |v: &Value| match v {
                            Value::Float(f) => Some(*f),
                            Value::Integer(i) => Some(*i as f64),
                            _ => None,
                        };
                        Ok((f(&c[0]).ok_or_else(bad)?, f(&c[1]).ok_or_else(bad)?))
                    }
                    _ => Err(bad()),
                })
                .collect(),
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(text: &str) -> Sources {
        Sources { file: Some(text.parse().unwrap()), ..Default::default() }
    }

    #[test]
    fn defaults_fill_in_and_hash_is_stable() {
        let a = resolve(&src("experiment = \"uk-euclidean\"")).unwrap();
        let b = resolve(&Sources { experiment: Some("uk-euclidean".into()), ..Default::default() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.seed, DEFAULT_SEED as u64);
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = resolve(&src("experiment = \"uk-euclidean\"\n[field]\ngama = 1.0")).unwrap_err();
        assert!(matches!(e, CliError::Config { ref key, .. } if key == "field.gama"), "{e}");
        let e = resolve(&src("experiment = \"uk-euclidean\"\ncolour = 1")).unwrap_err();
        assert!(matches!(e, CliError::Config { ref key, .. } if key == "colour"));
        assert!(resolve(&src("experiment = \"nope\"")).is_err());
    }

    #[test]
    fn types_are_checked_and_integers_widen() {
        let c = resolve(&src("experiment = \"uk-euclidean\"\n[field]\ngamma = 1")).unwrap();
        assert_eq!(c.table["field"]["gamma"], Value::Float(1.0));
        assert!(resolve(&src("experiment = \"uk-euclidean\"\n[field]\ngamma = \"x\"")).is_err());
    }

    #[test]
    fn overrides_and_seed_apply_last() {
        let mut s = src("experiment = \"uk-euclidean\"\nseed = 5\n[field]\ngamma = 0.5");
        s.overrides.push(parse_override("field.gamma=0.75").unwrap());
        s.overrides.push(parse_override("seed=6").unwrap());
        let c = resolve(&s).unwrap();
        assert_eq!(c.f64("field", "gamma"), 0.75);
        assert_eq!(c.seed, 6);
        s.seed = Some(9);
        assert_eq!(resolve(&s).unwrap().seed, 9);
        assert_eq!(parse_value("abc"), Value::String("abc".into()));
        assert_eq!(parse_value("[1, 2]"), Value::Array(vec![Value::Integer(1), Value::Integer(2)]));
    }

    #[test]
    fn canonical_text_reparses_to_the_same_config() {
        let c = resolve(&src("experiment = \"minkowski\"\nseed = 3")).unwrap();
        let again = resolve(&Sources { file: Some(c.canonical().parse().unwrap()), ..Default::default() }).unwrap();
        assert_eq!(c, again);
    }
}
