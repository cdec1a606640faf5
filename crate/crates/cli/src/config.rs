//! Flat dotted-key JSON configuration.
//!
//! ```json
//! {
//!   "experiment": "scgf",
//!   "kernel.family": "mu1", "kernel.alpha": 1, "kernel.beta": 1,
//!   "runlength.family": "deterministic", "runlength.c": 1,
//!   "markov.family": "lattice_walk", "markov.dim": 1,
//!   "grid.xi": [0.5, 1, 2], "ladder": [1e4, 1e5, 1e6, 1e7],
//!   "seeds.master": 1, "seeds.env": 7
//! }
//! ```
//!
//! `kernel.*`, `runlength.*` and `markov.*` keys are component parameters;
//! `seeds.*`, `workers`, `output` and `experiment` are reserved; every other
//! key is an experiment setting.

use std::path::Path;

use reloc_ldp::registry::{kernels, markov_models, run_lengths, ParamValue, Params};
use reloc_ldp::Model;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub family: String,
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub kernel: Component,
    pub runlength: Component,
    pub markov: Component,
    /// Experiment-specific keys, with their full dotted names.
    pub settings: Params,
    pub master_seed: u64,
    pub env_seed: u64,
    pub workers: Option<usize>,
    pub output: Option<String>,
}

pub const DEFAULT_MARKOV: &str = "brownian";

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

fn to_param(key: &str, v: &Value) -> Result<ParamValue, CliError> {
    let number = |x: &Value| {
        x.as_f64()
            .ok_or_else(|| invalid(format!("'{key}': expected a number, got {x}")))
    };
    match v {
        Value::Number(_) => Ok(ParamValue::Number(number(v)?)),
        Value::String(s) => Ok(ParamValue::Text(s.clone())),
        Value::Array(items) if items.iter().all(Value::is_array) && !items.is_empty() => items
            .iter()
            .map(|row| {
                row.as_array()
                    .expect("checked above")
                    .iter()
                    .map(number)
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<_, _>>()
            .map(ParamValue::Table),
        Value::Array(items) => items
            .iter()
            .map(number)
            .collect::<Result<_, _>>()
            .map(ParamValue::List),
        other => Err(invalid(format!(
            "'{key}': expected a number, string or list, got {other}"
        ))),
    }
}

fn from_param(v: &ParamValue) -> Value {
    let num = |x: f64| serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number);
    match v {
        ParamValue::Number(x) => num(*x),
        ParamValue::List(xs) => Value::Array(xs.iter().map(|x| num(*x)).collect()),
        ParamValue::Table(rows) => Value::Array(
            rows.iter()
                .map(|r| Value::Array(r.iter().map(|x| num(*x)).collect()))
                .collect(),
        ),
        ParamValue::Text(s) => Value::String(s.clone()),
    }
}

fn seed(key: &str, v: &Value) -> Result<u64, CliError> {
    v.as_u64()
        .ok_or_else(|| invalid(format!("'{key}' must be a non-negative integer, got {v}")))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| invalid(format!("config is not valid JSON: {e}")))?;
        let map = value
            .as_object()
            .ok_or_else(|| invalid("config must be a JSON object of dotted keys"))?;
        Self::from_map(map)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn from_map(map: &Map<String, Value>) -> Result<Self, CliError> {
        let mut experiment = None;
        let mut families: [Option<String>; 3] = [None, None, None];
        let mut params: [Params; 3] = Default::default();
        let mut settings = Params::new();
        let mut master_seed = None;
        let mut env_seed = None;
        let mut workers = None;
        let mut output = None;
        for (key, v) in map {
            let text = || {
                v.as_str()
                    .map(str::to_owned)
                    .ok_or_else(|| invalid(format!("'{key}' must be a string, got {v}")))
            };
            match key.as_str() {
                "experiment" => experiment = Some(text()?),
                "seeds.master" => master_seed = Some(seed(key, v)?),
                "seeds.env" => env_seed = Some(seed(key, v)?),
                "workers" => {
                    let w = v.as_u64().filter(|w| *w >= 1).ok_or_else(|| {
                        invalid(format!("'workers' must be a positive integer, got {v}"))
                    })?;
                    workers = Some(w as usize);
                }
                "output" => output = Some(text()?),
                _ => {
                    let slot = ["kernel.", "runlength.", "markov."]
                        .iter()
                        .position(|p| key.starts_with(p));
                    match slot {
                        Some(k) => {
                            let name = key.split_once('.').expect("prefixed").1;
                            if name == "family" {
                                families[k] = Some(text()?);
                            } else {
                                params[k].insert(name, to_param(key, v)?);
                            }
                        }
                        None => settings.insert(key, to_param(key, v)?),
                    }
                }
            }
        }
        let [kp, rp, mp] = params;
        let [kf, rf, mf] = families;
        Ok(Self {
            experiment: experiment.ok_or_else(|| invalid("missing 'experiment'"))?,
            kernel: Component {
                family: kf.ok_or_else(|| invalid("missing 'kernel.family'"))?,
                params: kp,
            },
            runlength: Component {
                family: rf.ok_or_else(|| invalid("missing 'runlength.family'"))?,
                params: rp,
            },
            markov: Component {
                family: mf.unwrap_or_else(|| DEFAULT_MARKOV.to_owned()),
                params: mp,
            },
            settings,
            master_seed: master_seed.unwrap_or(0),
            env_seed: env_seed.unwrap_or(0),
            workers,
            output,
        })
    }

    /// The flat key map this config was (or could have been) read from.
    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        map.insert("experiment".into(), Value::String(self.experiment.clone()));
        for (prefix, c) in [
            ("kernel", &self.kernel),
            ("runlength", &self.runlength),
            ("markov", &self.markov),
        ] {
            map.insert(format!("{prefix}.family"), Value::String(c.family.clone()));
            for key in c.params.keys() {
                map.insert(format!("{prefix}.{key}"), from_param(c.params.get(key).expect("listed key")));
            }
        }
        for key in self.settings.keys() {
            map.insert(key.to_owned(), from_param(self.settings.get(key).expect("listed key")));
        }
        map.insert("seeds.master".into(), Value::from(self.master_seed));
        map.insert("seeds.env".into(), Value::from(self.env_seed));
        if let Some(w) = self.workers {
            map.insert("workers".into(), Value::from(w as u64));
        }
        if let Some(o) = &self.output {
            map.insert("output".into(), Value::String(o.clone()));
        }
        Value::Object(map)
    }

    /// Builds the model, enforcing the admissibility of each component and
    /// their compatibility.
    pub fn model(&self) -> Result<Model, CliError> {
        let err = |e: reloc_ldp::Error| invalid(e.to_string());
        let kernel = kernels().build(&self.kernel.family, &self.kernel.params).map_err(err)?;
        let law = run_lengths()
            .build(&self.runlength.family, &self.runlength.params)
            .map_err(err)?;
        let markov = markov_models()
            .build(&self.markov.family, &self.markov.params)
            .map_err(err)?;
        if let Some(mode) = self.markov.params.get("time_mode") {
            let declared = match mode {
                ParamValue::Text(s) => s.as_str(),
                other => return Err(invalid(format!("'markov.time_mode' must be a string, got {other:?}"))),
            };
            if declared != markov.time_mode().label() {
                return Err(invalid(format!(
                    "time domain: markov.time_mode '{declared}' does not match {}, which runs in {} time",
                    markov.name(),
                    markov.time_mode().label()
                )));
            }
        }
        Model::new(kernel, law, markov).map_err(err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "experiment": "scgf",
        "kernel.family": "mu1", "kernel.alpha": 1, "kernel.beta": 1,
        "runlength.family": "deterministic", "runlength.c": 1,
        "markov.family": "lattice_walk", "markov.dim": 1, "markov.time_mode": "discrete",
        "grid.xi": [0.5, 1, 2], "ladder": [1e4, 1e5, 1e6, 1e7],
        "seeds.master": 18446744073709551615, "seeds.env": 7
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_json(SAMPLE).unwrap();
        assert_eq!(cfg.kernel.params.number("alpha").unwrap(), 1.0);
        assert_eq!(cfg.settings.list("grid.xi").unwrap().unwrap(), &[0.5, 1.0, 2.0]);
        assert_eq!(cfg.master_seed, u64::MAX);
        let echoed = cfg.to_json().to_string();
        assert_eq!(ExperimentConfig::from_json(&echoed).unwrap(), cfg);
        cfg.model().unwrap();
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(ExperimentConfig::from_json("[1]"), Err(CliError::Invalid(_))));
        assert!(ExperimentConfig::from_json(r#"{"experiment": "scgf"}"#).is_err());
        let cfg = ExperimentConfig::from_json(&SAMPLE.replace("\"deterministic\"", "\"geometric\"")).unwrap();
        let err = cfg.model().unwrap_err().to_string();
        assert!(err.contains("A2"), "{err}");
        let cfg = ExperimentConfig::from_json(&SAMPLE.replace("\"discrete\"", "\"continuous\"")).unwrap();
        assert!(cfg.model().is_err());
    }
}
