//! Parameter name interning.
//!
//! Engines treat parameters as dense integers so set operations never touch
//! strings. Ids are handed out in first-seen order by a [`ParamRegistry`],
//! which is the only shared-mutable structure in the crate and is safe for
//! concurrent interning.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interned parameter name. Equal strings always yield equal ids within one
/// registry, distinct strings distinct ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParameterId(pub u32);

impl ParameterId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Default)]
struct Inner {
    names: Vec<String>,
    index: HashMap<String, ParameterId>,
}

/// Registry of parameter names, append-only for the process lifetime.
#[derive(Debug, Default)]
pub struct ParamRegistry {
    inner: RwLock<Inner>,
}

impl ParamRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Interns `name`, returning the stable id. Idempotent.
    pub fn intern(&self, name: &str) -> Result<ParameterId> {
        if name.is_empty() {
            return Err(Error::EmptyParameterName);
        }
        if let Some(&id) = self.inner.read().unwrap().index.get(name) {
            return Ok(id);
        }
        let mut inner = self.inner.write().unwrap();
        // Re-check: another thread may have interned between the locks.
        if let Some(&id) = inner.index.get(name) {
            return Ok(id);
        }
        let id = ParameterId(inner.names.len() as u32);
        inner.names.push(name.to_owned());
        inner.index.insert(name.to_owned(), id);
        Ok(id)
    }

    /// Looks a name up without interning it.
    pub fn lookup(&self, name: &str) -> Option<ParameterId> {
        self.inner.read().unwrap().index.get(name).copied()
    }

    pub fn name(&self, id: ParameterId) -> String {
        self.inner.read().unwrap().names[id.index()].clone()
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap().names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
