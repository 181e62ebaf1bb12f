//! Experiment configuration: ids, typed parameter schemas and TOML parsing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

pub const EXPERIMENT_IDS: [&str; 9] = [
    "fig1", "fig2", "fig3", "w1rate", "coarea", "lemma_a1", "prop10", "barrier", "sgld",
];

pub const DEFAULT_SEED: u64 = 42;

/// Bumped whenever an embedded default changes.
pub const DEFAULTS_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum ParamValue {
    Float(f64),
    Int(i64),
    Bool(bool),
    Str(String),
    FloatList(Vec<f64>),
    IntList(Vec<i64>),
}

impl ParamValue {
    fn type_name(&self) -> &'static str {
        match self {
            ParamValue::Float(_) => "float",
            ParamValue::Int(_) => "integer",
            ParamValue::Bool(_) => "bool",
            ParamValue::Str(_) => "string",
            ParamValue::FloatList(_) => "list of floats",
            ParamValue::IntList(_) => "list of integers",
        }
    }

    /// Convert a TOML value to the type of `like`.
    fn coerce(v: &toml::Value, like: &ParamValue) -> Option<ParamValue> {
        let num = |v: &toml::Value| match v {
            toml::Value::Float(f) => Some(*f),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => None,
        };
        match (like, v) {
            (ParamValue::Float(_), v) => num(v).map(ParamValue::Float),
            (ParamValue::Int(_), toml::Value::Integer(i)) => Some(ParamValue::Int(*i)),
            (ParamValue::Bool(_), toml::Value::Boolean(b)) => Some(ParamValue::Bool(*b)),
            (ParamValue::Str(_), toml::Value::String(s)) => Some(ParamValue::Str(s.clone())),
            (ParamValue::FloatList(_), toml::Value::Array(a)) => a
                .iter()
                .map(num)
                .collect::<Option<Vec<_>>>()
                .map(ParamValue::FloatList),
            (ParamValue::IntList(_), toml::Value::Array(a)) => a
                .iter()
                .map(|x| x.as_integer())
                .collect::<Option<Vec<_>>>()
                .map(ParamValue::IntList),
            _ => None,
        }
    }

    pub(crate) fn to_toml(&self) -> toml::Value {
        match self {
            ParamValue::Float(f) => toml::Value::Float(*f),
            ParamValue::Int(i) => toml::Value::Integer(*i),
            ParamValue::Bool(b) => toml::Value::Boolean(*b),
            ParamValue::Str(s) => toml::Value::String(s.clone()),
            ParamValue::FloatList(v) => {
                toml::Value::Array(v.iter().map(|f| toml::Value::Float(*f)).collect())
            }
            ParamValue::IntList(v) => {
                toml::Value::Array(v.iter().map(|i| toml::Value::Integer(*i)).collect())
            }
        }
    }
}

fn f(v: f64) -> ParamValue {
    ParamValue::Float(v)
}

fn i(v: i64) -> ParamValue {
    ParamValue::Int(v)
}

fn fl(v: &[f64]) -> ParamValue {
    ParamValue::FloatList(v.to_vec())
}

/// Embedded defaults; their types define the schema.
pub fn schema(id: &str) -> Result<Vec<(&'static str, ParamValue)>> {
    let s = match id {
        "fig1" => vec![(
            "eps_list",
            fl(&[1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5]),
        )],
        "fig2" => vec![
            ("eps", f(1e-3)),
            ("step", f(2e-5)),
            ("chains", i(1000)),
            ("burn_in", i(50_000)),
            ("retained_per_chain", i(100)),
            ("thinning", i(100)),
            ("x0", f(1.25)),
            ("start_temperature", f(0.3)),
            ("max_step", f(5e-4)),
        ],
        "fig3" => vec![
            ("a1", f(1.0)),
            ("a2", f(4.0)),
            ("eps", f(1e-2)),
            ("step", f(1e-4)),
            ("steps", i(2_000_000)),
            ("burn_in", i(10_000)),
            ("thinning", i(10)),
            ("x0", fl(&[1.0, 0.0])),
            ("bins", i(40)),
            ("long_run", ParamValue::Bool(false)),
        ],
        "w1rate" => vec![
            ("eps_list", fl(&[1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 1e-2])),
            ("grid_n", i(1 << 18)),
        ],
        "coarea" => vec![("eps_list", fl(&[0.1, 0.01]))],
        "lemma_a1" => vec![("a1", f(1.0)), ("a2", f(4.0)), ("points", i(10))],
        "prop10" => vec![
            ("n_list", ParamValue::IntList(vec![10, 100, 1000])),
            ("trials", i(10_000)),
        ],
        "barrier" => vec![
            ("k_list", ParamValue::IntList(vec![0, 1, 2])),
            ("eps_list", fl(&[1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1])),
            ("fit_eps_max", f(1e-2)),
            ("z_list", fl(&[0.0, 0.1, 0.25, 0.5, 0.75, 1.0])),
        ],
        "sgld" => vec![
            ("n", i(50)),
            ("data_seed", i(42)),
            ("eps", f(0.05)),
            ("eps_list", fl(&[0.2, 0.1, 0.05])),
            ("step", f(1e-3)),
            ("steps", i(500_000)),
            ("burn_in", i(10_000)),
            ("minibatch", i(10)),
            ("x0", f(0.0)),
            ("grid_n", i(1 << 16)),
        ],
        other => return Err(Error::UnknownId(other.to_string())),
    };
    Ok(s)
}

/// Resolved parameters: defaults with overrides applied.
#[derive(Clone, Debug, PartialEq)]
pub struct Params(pub BTreeMap<String, ParamValue>);

impl Params {
    fn get(&self, k: &str) -> &ParamValue {
        self.0
            .get(k)
            .unwrap_or_else(|| panic!("parameter `{k}` missing from schema"))
    }

    pub fn float(&self, k: &str) -> f64 {
        match self.get(k) {
            ParamValue::Float(v) => *v,
            other => panic!("`{k}` is a {}", other.type_name()),
        }
    }

    pub fn int(&self, k: &str) -> i64 {
        match self.get(k) {
            ParamValue::Int(v) => *v,
            other => panic!("`{k}` is a {}", other.type_name()),
        }
    }

    pub fn flag(&self, k: &str) -> bool {
        match self.get(k) {
            ParamValue::Bool(v) => *v,
            other => panic!("`{k}` is a {}", other.type_name()),
        }
    }

    /// A nonnegative integer parameter.
    pub fn count(&self, k: &str) -> Result<usize> {
        usize::try_from(self.int(k)).map_err(|_| Error::InvalidParameter(format!("`{k}` must be >= 0")))
    }

    pub fn floats(&self, k: &str) -> &[f64] {
        match self.get(k) {
            ParamValue::FloatList(v) => v,
            other => panic!("`{k}` is a {}", other.type_name()),
        }
    }

    pub fn ints(&self, k: &str) -> &[i64] {
        match self.get(k) {
            ParamValue::IntList(v) => v,
            other => panic!("`{k}` is a {}", other.type_name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub overrides: BTreeMap<String, ParamValue>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<String>,
    seed: Option<u64>,
    out: Option<String>,
    params: Option<toml::Table>,
}

impl ExperimentConfig {
    pub fn new(id: &str) -> Result<Self> {
        schema(id)?;
        Ok(Self {
            id: id.to_string(),
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("results").join(id),
            overrides: BTreeMap::new(),
        })
    }

    /// Type-checked override of one parameter.
    pub fn set(&mut self, key: &str, value: ParamValue) -> Result<()> {
        let sch = schema(&self.id)?;
        let (_, default) = sch
            .iter()
            .find(|(k, _)| *k == key)
            .ok_or_else(|| Error::Config(format!("`{}` has no parameter `{key}`", self.id)))?;
        let ok = std::mem::discriminant(default) == std::mem::discriminant(&value)
            || matches!((default, &value), (ParamValue::Float(_), ParamValue::Int(_)));
        if !ok {
            return Err(Error::Config(format!(
                "parameter `{key}` expects a {}, got a {}",
                default.type_name(),
                value.type_name()
            )));
        }
        let value = match value {
            ParamValue::Int(v) if matches!(default, ParamValue::Float(_)) => ParamValue::Float(v as f64),
            v => v,
        };
        self.overrides.insert(key.to_string(), value);
        Ok(())
    }

    /// Parse a TOML document. When `id` is given, the file's `experiment`
    /// field (if any) must agree with it.
    pub fn from_toml_str(text: &str, id: Option<&str>) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let id = match (id, raw.experiment.as_deref()) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("config is for `{b}`, not `{a}`")))
            }
            (Some(a), _) => a.to_string(),
            (None, Some(b)) => b.to_string(),
            (None, None) => return Err(Error::Config("no experiment id given".into())),
        };
        let mut cfg = Self::new(&id)?;
        if let Some(s) = raw.seed {
            cfg.seed = s;
        }
        if let Some(o) = raw.out {
            cfg.out_dir = PathBuf::from(o);
        }
        let sch = schema(&id)?;
        for (k, v) in raw.params.unwrap_or_default() {
            let (_, default) = sch
                .iter()
                .find(|(name, _)| *name == k)
                .ok_or_else(|| Error::Config(format!("`{id}` has no parameter `{k}`")))?;
            let value = ParamValue::coerce(&v, default)
                .ok_or_else(|| Error::Config(format!("parameter `{k}` expects a {}", default.type_name())))?;
            cfg.overrides.insert(k, value);
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path, id: Option<&str>) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, id)
    }

    pub fn params(&self) -> Result<Params> {
        let mut map: BTreeMap<String, ParamValue> = schema(&self.id)?
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        for (k, v) in &self.overrides {
            map.insert(k.clone(), v.clone());
        }
        Ok(Params(map))
    }
}
