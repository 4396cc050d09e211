//! Experiment configuration: a TOML file with a `[run]` section and one
//! section of parameter overrides per experiment.
//!
//! ```toml
//! [run]
//! experiment = "fig5a"
//! seed = 7
//!
//! [fig5a]
//! pulses = 600
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use toml::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExperimentId {
    Fig3,
    Fig5a,
    Fig5bc,
    Fig6b,
    Fig7,
    Fig8,
    Retention,
    Custom,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        Self::Fig3,
        Self::Fig5a,
        Self::Fig5bc,
        Self::Fig6b,
        Self::Fig7,
        Self::Fig8,
        Self::Retention,
        Self::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig3 => "fig3",
            Self::Fig5a => "fig5a",
            Self::Fig5bc => "fig5bc",
            Self::Fig6b => "fig6b",
            Self::Fig7 => "fig7",
            Self::Fig8 => "fig8",
            Self::Retention => "retention",
            Self::Custom => "custom",
        }
    }

    /// Parameters accepted in the experiment's section, with defaults.
    pub fn defaults(self) -> Params {
        let f = Value::Float;
        let i = Value::Integer;
        let fl = |v: &[f64]| Value::Array(v.iter().map(|x| Value::Float(*x)).collect());
        let il = |v: &[i64]| Value::Array(v.iter().map(|x| Value::Integer(*x)).collect());
        let pairs: Vec<(&str, Value)> = match self {
            Self::Fig3 => vec![("cycles", i(4)), ("dt_max_ps", f(0.2))],
            Self::Fig5a => vec![
                ("l_ss_nH", f(200.0)),
                ("pulses", i(700)),
                ("dt_max_ps", f(10.0)),
            ],
            Self::Fig5bc => vec![
                ("l_ss_nH", f(20.0)),
                ("pulses_per_ramp", i(130)),
                ("hold_pulses", i(25)),
                ("cycles", i(3)),
                ("dt_max_ps", f(10.0)),
            ],
            Self::Fig6b => vec![
                ("i_spd_uA", f(10.0)),
                ("i_su_uA", fl(&[35.0, 36.0, 37.0, 38.0])),
                (
                    "delta_t_ns",
                    fl(&[0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 35.0, 50.0, 75.0, 100.0]),
                ),
                ("dt_max_ps", f(10.0)),
            ],
            Self::Fig7 => vec![
                ("i_spd_uA", f(7.0)),
                ("i_su_uA", f(38.0)),
                ("delta_t_ns", fl(&[0.0, 25.0])),
                ("dt_max_ps", f(10.0)),
            ],
            Self::Fig8 => vec![
                ("l_ss_nH", f(200.0)),
                ("i_spd_uA", f(10.0)),
                ("delays_ns", fl(&[20.0, -10.0, -25.0, 5.0])),
                ("buffer", Value::Boolean(false)),
                ("dt_max_ps", f(10.0)),
            ],
            Self::Retention => vec![
                ("population", i(10_000)),
                ("levels", il(&[1, 2, 4, 8, 16, 32, 64])),
                ("q", f(1.0)),
                ("f_plus", f(0.5)),
                ("f_minus", f(0.5)),
                ("rate", f(1.0)),
                ("t_max", f(5000.0)),
                ("points", i(300)),
                ("bound", Value::String("hard".into())),
            ],
            Self::Custom => vec![
                ("netlist", Value::String(String::new())),
                ("tstop_ns", f(0.0)),
                ("dt_max_ps", f(0.0)),
            ],
        };
        Params(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|i| i.name()).collect();
                anyhow!("unknown experiment {s:?} (expected one of {})", names.join(", "))
            })
    }
}

/// Resolved parameter set, ordered by key.
#[derive(Debug, Clone, PartialEq)]
pub struct Params(pub BTreeMap<String, Value>);

impl Params {
    /// Applies `overrides`; unknown keys and type changes are errors.
    pub fn merge(&mut self, overrides: &toml::Table, section: &str) -> Result<()> {
        for (k, v) in overrides {
            let Some(slot) = self.0.get_mut(k) else {
                let known: Vec<&str> = self.0.keys().map(String::as_str).collect();
                bail!("[{section}] unknown key {k:?} (known: {})", known.join(", "));
            };
            *slot = coerce(slot, v).with_context(|| format!("[{section}] {k}"))?;
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Result<&Value> {
        self.0.get(key).ok_or_else(|| anyhow!("missing parameter {key}"))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        match self.get(key)? {
            Value::Float(x) => Ok(*x),
            Value::Integer(x) => Ok(*x as f64),
            v => bail!("{key}: expected a number, found {v}"),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        match self.get(key)? {
            Value::Integer(x) if *x >= 0 => Ok(*x as usize),
            v => bail!("{key}: expected a non-negative integer, found {v}"),
        }
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.get(key)?
            .as_bool()
            .ok_or_else(|| anyhow!("{key}: expected true or false"))
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.get(key)?
            .as_str()
            .ok_or_else(|| anyhow!("{key}: expected a string"))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let arr = self
            .get(key)?
            .as_array()
            .ok_or_else(|| anyhow!("{key}: expected a list"))?;
        arr.iter()
            .map(|v| match v {
                Value::Float(x) => Ok(*x),
                Value::Integer(x) => Ok(*x as f64),
                v => bail!("{key}: expected numbers, found {v}"),
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.0).unwrap_or(serde_json::Value::Null)
    }
}

/// Integers are accepted where a float is expected, and single numbers where
/// a list is expected.
pub(crate) fn coerce(default: &Value, v: &Value) -> Result<Value> {
    Ok(match (default, v) {
        (Value::Float(_), Value::Integer(x)) => Value::Float(*x as f64),
        (Value::Float(_), Value::Float(_))
        | (Value::Integer(_), Value::Integer(_))
        | (Value::Boolean(_), Value::Boolean(_))
        | (Value::String(_), Value::String(_)) => v.clone(),
        (Value::Array(d), Value::Array(items)) => {
            let proto = d.first().cloned().unwrap_or(Value::Float(0.0));
            Value::Array(items.iter().map(|x| coerce(&proto, x)).collect::<Result<_>>()?)
        }
        (Value::Array(d), x) => {
            let proto = d.first().cloned().unwrap_or(Value::Float(0.0));
            Value::Array(vec![coerce(&proto, x)?])
        }
        (d, v) => bail!("expected {}, found {}", d.type_str(), v.type_str()),
    })
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    pub params: Params,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub jobs: usize,
}

/// `[run]` keys.
const RUN_KEYS: [&str; 4] = ["experiment", "out", "seed", "jobs"];

impl ExperimentConfig {
    pub fn new(id: ExperimentId) -> Self {
        Self {
            id,
            params: id.defaults(),
            out_dir: PathBuf::from("out").join(id.name()),
            seed: 1,
            jobs: 0,
        }
    }

    /// Parses a config file. `id` overrides `[run] experiment`. Sections for
    /// other experiments are checked but not applied.
    pub fn parse(text: &str, id: Option<ExperimentId>) -> Result<Self> {
        let table: toml::Table = text.parse().context("config is not valid TOML")?;
        let empty = toml::Table::new();
        let run = match table.get("run") {
            Some(Value::Table(t)) => t,
            Some(_) => bail!("[run] must be a section"),
            None => &empty,
        };
        for k in run.keys() {
            if !RUN_KEYS.contains(&k.as_str()) {
                bail!("[run] unknown key {k:?} (known: {})", RUN_KEYS.join(", "));
            }
        }
        let id = match (id, run.get("experiment")) {
            (Some(id), _) => id,
            (None, Some(Value::String(s))) => s.parse()?,
            (None, Some(v)) => bail!("[run] experiment must be a string, found {v}"),
            (None, None) => bail!("no experiment given ([run] experiment or command line)"),
        };
        let mut cfg = Self::new(id);
        if let Some(v) = run.get("out") {
            cfg.out_dir = PathBuf::from(v.as_str().ok_or_else(|| anyhow!("[run] out must be a string"))?);
        }
        if let Some(v) = run.get("seed") {
            cfg.seed = v
                .as_integer()
                .filter(|s| *s >= 0)
                .ok_or_else(|| anyhow!("[run] seed must be a non-negative integer"))? as u64;
        }
        if let Some(v) = run.get("jobs") {
            cfg.jobs = v
                .as_integer()
                .filter(|s| *s >= 0)
                .ok_or_else(|| anyhow!("[run] jobs must be a non-negative integer"))? as usize;
        }
        for (section, body) in &table {
            if section == "run" || section == "sweep" {
                continue;
            }
            let sid: ExperimentId = section
                .parse()
                .with_context(|| format!("unknown section [{section}]"))?;
            let Value::Table(body) = body else {
                bail!("[{section}] must be a section");
            };
            let mut p = sid.defaults();
            p.merge(body, section)?;
            if sid == id {
                cfg.params = p;
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": self.id.name(),
            "seed": self.seed,
            "params": self.params.to_json(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_rejected() {
        let e = ExperimentConfig::parse("[run]\nexperiment='fig5a'\n[fig5a]\nbogus=1\n", None).unwrap_err();
        assert!(format!("{e:#}").contains("bogus"));
    }

    #[test]
    fn integer_promotes_to_float() {
        let c = ExperimentConfig::parse("[run]\nexperiment='fig5a'\n[fig5a]\nl_ss_nH=20\n", None).unwrap();
        assert_eq!(c.params.f64("l_ss_nH").unwrap(), 20.0);
    }

    #[test]
    fn other_sections_are_validated() {
        assert!(ExperimentConfig::parse("[run]\nexperiment='fig3'\n[fig8]\nnope=true\n", None).is_err());
        assert!(ExperimentConfig::parse("[run]\nexperiment='fig3'\n[fig99]\n", None).is_err());
    }
}
