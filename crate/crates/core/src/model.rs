//! Name-model data types shared by the engines.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intern::{ParamRegistry, ParameterId};

/// A web service described by its input and output parameter sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Service {
    pub name: String,
    pub inputs: BTreeSet<ParameterId>,
    pub outputs: BTreeSet<ParameterId>,
}

impl Service {
    pub fn new(
        name: impl Into<String>,
        inputs: impl IntoIterator<Item = ParameterId>,
        outputs: impl IntoIterator<Item = ParameterId>,
    ) -> Self {
        Self {
            name: name.into(),
            inputs: inputs.into_iter().collect(),
            outputs: outputs.into_iter().collect(),
        }
    }
}

/// A composition request: initially known parameters and required ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub init: BTreeSet<ParameterId>,
    pub goal: BTreeSet<ParameterId>,
}

impl Request {
    pub fn new(
        init: impl IntoIterator<Item = ParameterId>,
        goal: impl IntoIterator<Item = ParameterId>,
    ) -> Self {
        Self {
            init: init.into_iter().collect(),
            goal: goal.into_iter().collect(),
        }
    }
}

/// An immutable set of services with unique names and disjoint input/output
/// sets, indexed by name.
#[derive(Debug, Default)]
pub struct Repository {
    services: Vec<Service>,
    by_name: HashMap<String, usize>,
}

impl Repository {
    pub fn new(services: Vec<Service>) -> Result<Self> {
        let mut by_name = HashMap::with_capacity(services.len());
        for (i, svc) in services.iter().enumerate() {
            if by_name.insert(svc.name.clone(), i).is_some() {
                return Err(Error::DuplicateService(svc.name.clone()));
            }
            if let Some(&p) = svc.inputs.intersection(&svc.outputs).next() {
                return Err(Error::OverlappingParameters {
                    service: svc.name.clone(),
                    parameter: format!("#{}", p.0),
                });
            }
        }
        Ok(Self { services, by_name })
    }

    pub fn services(&self) -> &[Service] {
        &self.services
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Service> {
        self.by_name.get(name).map(|&i| &self.services[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }
}

/// An ordered list of service calls, optionally partitioned into layers of
/// services executable in parallel. When layers are present, concatenating
/// them in order reproduces `calls`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub calls: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<Vec<String>>>,
}

impl Composition {
    pub fn empty() -> Self {
        Self { calls: Vec::new(), layers: None }
    }

    pub fn sequential(calls: Vec<String>) -> Self {
        Self { calls, layers: None }
    }

    pub fn layered(layers: Vec<Vec<String>>) -> Self {
        let calls = layers.iter().flatten().cloned().collect();
        Self { calls, layers: Some(layers) }
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }

    /// Number of layers; a flat composition counts one layer per call.
    pub fn execution_path(&self) -> usize {
        match &self.layers {
            Some(layers) => layers.len(),
            None => self.calls.len(),
        }
    }

    /// Checks that the layer partition, when present, reproduces `calls`.
    pub fn check_layer_consistency(&self) -> Result<()> {
        if let Some(layers) = &self.layers {
            let flat: Vec<&String> = layers.iter().flatten().collect();
            if flat.len() != self.calls.len() || flat.iter().zip(&self.calls).any(|(a, b)| *a != b)
            {
                return Err(Error::InvalidComposition(
                    "layers do not concatenate to the call list".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Outcome of validating a composition against a repository and a request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub valid: bool,
    /// First position whose service has unknown inputs, with the missing ids.
    pub first_violation: Option<(usize, Vec<ParameterId>)>,
    pub goal_covered: bool,
}

impl ValidationReport {
    pub(crate) fn from_parts(
        first_violation: Option<(usize, Vec<ParameterId>)>,
        goal_covered: bool,
    ) -> Self {
        Self { valid: first_violation.is_none() && goal_covered, first_violation, goal_covered }
    }
}

/// Convenience for building repositories and requests from name strings in
/// tests and fixtures.
pub fn service_from_names(
    registry: &ParamRegistry,
    name: &str,
    inputs: &[&str],
    outputs: &[&str],
) -> Result<Service> {
    let ins = inputs.iter().map(|n| registry.intern(n)).collect::<Result<BTreeSet<_>>>()?;
    let outs = outputs.iter().map(|n| registry.intern(n)).collect::<Result<BTreeSet<_>>>()?;
    Ok(Service { name: name.to_owned(), inputs: ins, outputs: outs })
}
