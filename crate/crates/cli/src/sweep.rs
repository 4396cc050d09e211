//! Parameter sweeps. Any list-valued key in the target's section becomes an
//! axis; the sweep runs the cartesian product of all axes.
//!
//! ```toml
//! [sweep]
//! target = "hebbian"
//! jobs = 4
//!
//! [hebbian]
//! i_su_uA = [36, 37, 38]
//! delta_t_ns = [0, 10, 20]
//! ```
//!
//! Rows are ordered with axes sorted by name and each axis ascending, so the
//! output does not depend on the number of workers.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use toml::Value;

use soen_core::engine::fmt_sig9;
use soen_core::par;
use soen_core::plasticity::retention_experiment;
use soen_core::synapse::{hebbian_event, EventTiming, HebbianCircuitSpec};

use crate::artifacts::{Plot, RunOutput, RunSummary};
use crate::config::{coerce, Params};
use crate::run::retention_spec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Hebbian,
    Retention,
}

impl Target {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "hebbian" => Ok(Self::Hebbian),
            "retention" => Ok(Self::Retention),
            _ => bail!("unknown sweep target {s:?} (expected hebbian or retention)"),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Hebbian => "hebbian",
            Self::Retention => "retention",
        }
    }

    fn defaults(self) -> Params {
        let f = Value::Float;
        let i = Value::Integer;
        let pairs: Vec<(&str, Value)> = match self {
            Self::Hebbian => vec![
                ("i_spd_uA", f(10.0)),
                ("i_su_uA", f(38.0)),
                ("i_ss_b_uA", f(38.0)),
                ("l_ss_nH", f(1000.0)),
                ("delta_t_ns", f(0.0)),
                ("dt_max_ps", f(10.0)),
            ],
            Self::Retention => vec![
                ("population", i(2000)),
                ("levels", i(8)),
                ("q", f(1.0)),
                ("f_plus", f(0.5)),
                ("f_minus", f(0.5)),
                ("rate", f(1.0)),
                ("t_max", f(5000.0)),
                ("points", i(200)),
                ("bound", Value::String("hard".into())),
            ],
        };
        Params(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    fn result_columns(self) -> &'static [&'static str] {
        match self {
            Self::Hebbian => &["fluxons", "delta_i_ss_nA"],
            Self::Retention => &["lifetime", "snr0"],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub target: Target,
    /// Scalar parameters; axis keys hold their first value.
    pub base: Params,
    /// `(key, ascending values)`, sorted by key.
    pub axes: Vec<(String, Vec<Value>)>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub jobs: usize,
}

fn cmp_values(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Float(x), Value::Float(y)) => x.total_cmp(y),
        (Value::Integer(x), Value::Integer(y)) => x.cmp(y),
        (Value::String(x), Value::String(y)) => x.cmp(y),
        (Value::Boolean(x), Value::Boolean(y)) => x.cmp(y),
        _ => Ordering::Equal,
    }
}

fn value_text(v: &Value) -> String {
    match v {
        Value::Float(x) => fmt_sig9(*x),
        Value::String(s) => s.clone(),
        v => v.to_string(),
    }
}

const SWEEP_KEYS: [&str; 4] = ["target", "out", "seed", "jobs"];

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().context("config is not valid TOML")?;
        let Some(Value::Table(sweep)) = table.get("sweep") else {
            bail!("sweep config needs a [sweep] section");
        };
        for k in sweep.keys() {
            if !SWEEP_KEYS.contains(&k.as_str()) {
                bail!("[sweep] unknown key {k:?} (known: {})", SWEEP_KEYS.join(", "));
            }
        }
        let target = Target::parse(
            sweep
                .get("target")
                .and_then(Value::as_str)
                .ok_or_else(|| anyhow!("[sweep] target must be a string"))?,
        )?;
        let int = |k: &str, default: i64| -> Result<i64> {
            match sweep.get(k) {
                None => Ok(default),
                Some(v) => v
                    .as_integer()
                    .filter(|x| *x >= 0)
                    .ok_or_else(|| anyhow!("[sweep] {k} must be a non-negative integer")),
            }
        };
        let out_dir = match sweep.get("out") {
            None => PathBuf::from("out").join(format!("sweep_{}", target.name())),
            Some(v) => PathBuf::from(v.as_str().ok_or_else(|| anyhow!("[sweep] out must be a string"))?),
        };
        for k in table.keys() {
            if k != "sweep" && k != target.name() {
                bail!("unknown section [{k}] for a {} sweep", target.name());
            }
        }
        let mut base = target.defaults();
        let mut axes = Vec::new();
        if let Some(section) = table.get(target.name()) {
            let Value::Table(section) = section else {
                bail!("[{}] must be a section", target.name());
            };
            for (k, v) in section {
                let Some(slot) = base.0.get_mut(k) else {
                    let known: Vec<&str> = base.0.keys().map(String::as_str).collect();
                    bail!("[{}] unknown key {k:?} (known: {})", target.name(), known.join(", "));
                };
                let ctx = || format!("[{}] {k}", target.name());
                match v {
                    Value::Array(items) => {
                        if items.is_empty() {
                            bail!("{}: axis has no values", ctx());
                        }
                        let mut vals = items
                            .iter()
                            .map(|x| coerce(slot, x))
                            .collect::<Result<Vec<_>>>()
                            .with_context(ctx)?;
                        vals.sort_by(cmp_values);
                        vals.dedup();
                        *slot = vals[0].clone();
                        axes.push((k.clone(), vals));
                    }
                    v => *slot = coerce(slot, v).with_context(ctx)?,
                }
            }
        }
        axes.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self {
            target,
            base,
            axes,
            out_dir,
            seed: int("seed", 1)? as u64,
            jobs: int("jobs", 0)? as usize,
        })
    }

    /// Parameter sets in row order.
    pub fn rows(&self) -> Vec<Params> {
        let mut rows = vec![self.base.clone()];
        for (k, vals) in &self.axes {
            rows = rows
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |v| {
                        let mut p = p.clone();
                        p.0.insert(k.clone(), v.clone());
                        p
                    })
                })
                .collect();
        }
        rows
    }

    pub fn to_json(&self) -> serde_json::Value {
        let axes: serde_json::Map<String, serde_json::Value> = self
            .axes
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::to_value(v).unwrap_or_default()))
            .collect();
        serde_json::json!({
            "target": self.target.name(),
            "seed": self.seed,
            "base": self.base.to_json(),
            "axes": axes,
        })
    }
}

fn hebbian_point(p: &Params) -> Result<Vec<String>> {
    let mut spec = HebbianCircuitSpec::default();
    spec.receiver.i_spd = p.f64("i_spd_uA")? * 1e-6;
    spec.receiver.i_su = p.f64("i_su_uA")? * 1e-6;
    spec.i_ss_b = p.f64("i_ss_b_uA")? * 1e-6;
    spec.l_ss = p.f64("l_ss_nH")? * 1e-9;
    let timing = EventTiming {
        dt_max: p.f64("dt_max_ps")? * 1e-12,
        ..EventTiming::default()
    };
    let ev = hebbian_event(&spec, p.f64("delta_t_ns")? * 1e-9, &timing)?;
    Ok(vec![ev.fluxons.to_string(), fmt_sig9(ev.delta_i_ss * 1e9)])
}

fn retention_point(p: &Params, seed: u64) -> Result<Vec<String>> {
    let levels = p.usize("levels")?;
    if levels == 0 || levels > u32::MAX as usize {
        bail!("levels must be positive");
    }
    let spec = retention_spec(p, levels as u32, seed)?;
    let c = retention_experiment(&spec, 1)?;
    Ok(vec![
        c.lifetime.map_or("none".into(), fmt_sig9),
        fmt_sig9(c.snr[0]),
    ])
}

/// Single-line error text safe for a CSV cell.
fn status_text(e: &anyhow::Error) -> String {
    let s = format!("error: {e:#}");
    s.replace([',', '\n', '\r', '"'], " ")
}

/// Runs every row and writes `sweep.csv` plus the manifest. A failed row is
/// recorded in its status column and does not stop the sweep.
pub fn cmd_sweep(cfg: &SweepConfig) -> Result<RunSummary> {
    let rows = cfg.rows();
    let target = cfg.target;
    let seed = cfg.seed;
    let results = par::map(&rows, cfg.jobs, |p| match target {
        Target::Hebbian => hebbian_point(p),
        Target::Retention => retention_point(p, seed),
    });
    let mut csv = String::new();
    let mut header: Vec<&str> = cfg.axes.iter().map(|(k, _)| k.as_str()).collect();
    header.extend(target.result_columns());
    header.push("status");
    csv.push_str(&header.join(","));
    csv.push('\n');
    let mut failed = 0;
    for (p, r) in rows.iter().zip(&results) {
        let mut cells: Vec<String> = cfg.axes.iter().map(|(k, _)| value_text(&p.0[k])).collect();
        match r {
            Ok(vals) => {
                cells.extend(vals.iter().cloned());
                cells.push("ok".into());
            }
            Err(e) => {
                failed += 1;
                cells.extend(target.result_columns().iter().map(|_| String::new()));
                cells.push(status_text(e));
            }
        }
        let _ = writeln!(csv, "{}", cells.join(","));
    }
    let mut o = RunOutput::create(&cfg.out_dir)?;
    o.write("sweep.csv", &csv)?;
    o.check(
        "all_rows_ok",
        failed == 0,
        format!("{failed} of {} rows failed", rows.len()),
    );
    if let Some((k, _)) = cfg.axes.first() {
        let y = target.result_columns()[0];
        o.plot(Plot::new(&format!("{} sweep", target.name()), k, y).series(y, "sweep.csv", k, y));
    }
    o.finish(&format!("sweep {}", target.name()), cfg.to_json())
}
