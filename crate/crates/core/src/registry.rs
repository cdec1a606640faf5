//! Name-keyed constructors for the interchangeable model components.
//!
//! Every kernel, run-length law and underlying Markov process is a trait
//! object built from a family name plus a bag of parameters. Families that are
//! known but excluded by the model assumptions are registered as rejections so
//! the error can say which assumption they break.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{assumption, domain, Error, Result};
use crate::kernel::{LogPowerKernel, MemoryKernel, PowerExpKernel};
use crate::markov::{BrownianMotion, LatticeWalk, MarkovProcess};
use crate::runlength::{Deterministic, RunLength, StretchedExpTail, UniformInterval};

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
    Table(Vec<Vec<f64>>),
    Text(String),
}

/// Parameters of one component, keys without their namespace prefix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    values: BTreeMap<String, ParamValue>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.insert(key, ParamValue::Number(value));
        self
    }

    pub fn insert(&mut self, key: &str, value: ParamValue) {
        self.values.insert(key.to_owned(), value);
    }

    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.values.get(key)
    }

    pub fn number(&self, key: &str) -> Result<f64> {
        match self.values.get(key) {
            Some(ParamValue::Number(v)) => Ok(*v),
            Some(other) => Err(domain(format!("parameter '{key}' must be a number, got {other:?}"))),
            None => Err(domain(format!("missing parameter '{key}'"))),
        }
    }

    pub fn number_or(&self, key: &str, default: f64) -> Result<f64> {
        if self.values.contains_key(key) {
            self.number(key)
        } else {
            Ok(default)
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        match self.values.get(key) {
            Some(ParamValue::Text(s)) => Some(s),
            _ => None,
        }
    }

    pub fn list(&self, key: &str) -> Result<Option<&[f64]>> {
        match self.values.get(key) {
            Some(ParamValue::List(v)) => Ok(Some(v)),
            Some(other) => Err(domain(format!("parameter '{key}' must be a list of numbers, got {other:?}"))),
            None => Ok(None),
        }
    }

    pub fn table(&self, key: &str) -> Result<Option<&[Vec<f64>]>> {
        match self.values.get(key) {
            Some(ParamValue::Table(t)) => Ok(Some(t)),
            Some(other) => Err(domain(format!("parameter '{key}' must be a table, got {other:?}"))),
            None => Ok(None),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}

pub type Constructor<T> = fn(&Params) -> Result<Arc<T>>;

pub struct Registry<T: ?Sized + 'static> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Constructor<T>>,
    rejected: BTreeMap<&'static str, (&'static str, &'static str)>,
}

impl<T: ?Sized + 'static> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
            rejected: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, ctor: Constructor<T>) -> &mut Self {
        self.entries.insert(name, ctor);
        self
    }

    /// Records a family that exists but violates `assumption`.
    pub fn reject(&mut self, name: &'static str, assumption: &'static str, reason: &'static str) -> &mut Self {
        self.rejected.insert(name, (assumption, reason));
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn build(&self, name: &str, params: &Params) -> Result<Arc<T>> {
        if let Some((label, reason)) = self.rejected.get(name) {
            return Err(assumption(label, format!("{name} {} excluded: {reason}", self.kind)));
        }
        let ctor = self.entries.get(name).ok_or_else(|| {
            Error::Unsupported(format!(
                "unknown {} family '{name}' (known: {})",
                self.kind,
                self.entries.keys().copied().collect::<Vec<_>>().join(", ")
            ))
        })?;
        ctor(params).map_err(|e| match e {
            Error::Domain(msg) => Error::Domain(format!("{} {name}: {msg}", self.kind)),
            other => other,
        })
    }
}

impl<T: ?Sized> fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("entries", &self.entries.keys().collect::<Vec<_>>())
            .field("rejected", &self.rejected.keys().collect::<Vec<_>>())
            .finish()
    }
}

pub fn kernels() -> Registry<dyn MemoryKernel> {
    let mut r: Registry<dyn MemoryKernel> = Registry::new("kernel");
    r.register("mu1", |p| {
        Ok(Arc::new(LogPowerKernel::new(p.number("alpha")?, p.number("beta")?)?))
    })
    .register("mu2", |p| {
        Ok(Arc::new(PowerExpKernel::new(p.number("gamma")?, p.number("delta")?)?))
    });
    r
}

pub fn run_lengths() -> Registry<dyn RunLength> {
    let mut r: Registry<dyn RunLength> = Registry::new("run-length");
    r.register("deterministic", |p| Ok(Arc::new(Deterministic::new(p.number("c")?)?)))
        .register("uniform", |p| {
            Ok(Arc::new(UniformInterval::new(p.number("a")?, p.number("b")?)?))
        })
        .register("stretched_exp", |p| {
            Ok(Arc::new(StretchedExpTail::new(
                p.number("kappa")?,
                p.number_or("lambda", 1.0)?,
            )?))
        })
        .reject(
            "geometric",
            "A2",
            "its moment generating function is finite only near 0",
        )
        .reject(
            "exponential",
            "A2",
            "its moment generating function is finite only near 0",
        );
    r
}

pub fn markov_models() -> Registry<dyn MarkovProcess> {
    let mut r: Registry<dyn MarkovProcess> = Registry::new("markov");
    r.register("brownian", |p| {
        Ok(Arc::new(BrownianMotion::new(dimension(p)?)?))
    })
    .register("lattice_walk", |p| {
        let dim = dimension(p)?;
        let walk = match p.table("steps")? {
            Some(rows) => LatticeWalk::with_steps(dim, rows)?,
            None => LatticeWalk::new(dim)?,
        };
        Ok(Arc::new(walk))
    });
    r
}

fn dimension(p: &Params) -> Result<usize> {
    let d = p.number_or("dim", 1.0)?;
    if d < 1.0 || d.fract() != 0.0 || d > 64.0 {
        return Err(domain(format!("dimension must be an integer in 1..=64, got {d}")));
    }
    Ok(d as usize)
}
