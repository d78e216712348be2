//! Seeded synthetic instance generators.
//!
//! Each generator plants a known-valid composition and records it in a
//! ground-truth manifest, so tests can assert solvability without solving.
//! Identical config and seed produce byte-identical output: one PRNG per
//! phase, split deterministically, so changing one count never reshuffles
//! unrelated phases.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{
    ConceptDef, ConceptTreeDef, HierInstance, InstanceDecl, NameInstance, OoConceptDef,
    OoInstance, OoParamDef, OoQueryDef, OoServiceDef, PropertyDef, QueryDef, RelInstance,
    RelQueryDef, RelServiceDef, RelationDef, RuleDef, ServiceDef, StreamOp, TaxonomyDef,
    TypedParamDef,
};

mod hier;
mod name;
mod online;
mod oo;
mod relational;

pub use hier::generate_hierarchical_instance;
pub use name::generate_name_instance;
pub use online::generate_online_scenario;
pub use oo::generate_oo_instance;
pub use relational::generate_relational_instance;

/// Generator knobs. Counts not used by a particular model are ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GenConfig {
    pub num_web_services: usize,
    pub pars_per_service: usize,
    pub num_parameters: usize,
    pub num_ws_in_solution: usize,
    pub seed: u64,
    /// Taxonomy / concept tree size (hierarchical, relational, oo).
    pub num_concepts: usize,
    /// Declared instances (hierarchical).
    pub num_instances: usize,
    /// Relation declarations (relational).
    pub num_relations: usize,
    /// Knowledge stages (relational).
    pub num_stages: usize,
    /// Planted inference-rule sites (relational).
    pub num_rules: usize,
    /// Declared properties (oo).
    pub num_properties: usize,
    /// Composition requests (online).
    pub num_queries: usize,
    /// Noise services as a fraction of the real ones (relational).
    pub noise_fraction: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            num_web_services: 50,
            pars_per_service: 4,
            num_parameters: 100,
            num_ws_in_solution: 10,
            seed: 0,
            num_concepts: 20,
            num_instances: 30,
            num_relations: 4,
            num_stages: 3,
            num_rules: 1,
            num_properties: 20,
            num_queries: 3,
            noise_fraction: 0.5,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_web_services == 0
            || self.pars_per_service == 0
            || self.num_parameters == 0
            || self.num_ws_in_solution == 0
        {
            return Err(Error::InvalidConfig("all counts must be at least 1".into()));
        }
        if self.num_ws_in_solution > self.num_web_services {
            return Err(Error::InvalidConfig(
                "numWSinSolution must not exceed numWebServices".into(),
            ));
        }
        Ok(())
    }
}

/// Planted ground truth emitted next to every generated instance.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GroundTruth {
    pub model: String,
    /// Ordered service names of the planted valid composition.
    pub planted_chain: Vec<String>,
    /// Service layers between knowledge stages (relational).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub planted_stages: Vec<Vec<String>>,
    /// Per-query failover plants (online).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub planted_backups: Vec<PlantedBackup>,
    /// Services the scenario deletes, in order (online).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deletions: Vec<String>,
}

/// What the online generator planted for one query.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlantedBackup {
    pub query: String,
    pub main: Vec<String>,
    /// The main-chain service the scenario deletes or backs up.
    pub target: String,
    /// "replacement" (one service), "suffix", or "none".
    pub kind: String,
    /// Services of the planted alternative path.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternative: Vec<String>,
    /// Outcome the deletion of `target` (or of a backup member) should
    /// produce: swapped_to_backup | backup_recomputed | request_lost.
    pub expected_outcome: String,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One PRNG per generation phase.
pub(crate) fn phase_rng(seed: u64, phase: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(phase)))
}

pub(crate) mod phases {
    pub const TAXONOMY: u64 = 1;
    pub const SERVICES: u64 = 2;
    pub const CHAIN: u64 = 3;
    pub const REWIRE: u64 = 4;
    pub const NOISE: u64 = 5;
    pub const QUERY: u64 = 6;
}

/// Samples `k` distinct elements of `pool` in pool order.
pub(crate) fn sample_distinct<T: Clone>(rng: &mut ChaCha8Rng, pool: &[T], k: usize) -> Vec<T> {
    let k = k.min(pool.len());
    let mut idx = rand::seq::index::sample(rng, pool.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i].clone()).collect()
}

pub(crate) fn zero_pad(i: usize, total: usize) -> String {
    let width = total.to_string().len();
    format!("{i:0width$}")
}
