//! JSON instance, composition and event-stream formats.
//!
//! Every instance file carries a `model` tag that selects the engine. The
//! structures here are the wire format; `load` methods resolve them into the
//! typed structures the engines consume.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchical::{HierRepository, HierRequest, HierService};
use crate::intern::ParamRegistry;
use crate::model::{Repository, Request, Service};
use crate::oo::{ConceptTree, OORepository, OORequest, OOService, PartialConcept};
use crate::relational::{
    RelComposition, RelOntology, RelQuery, RelService, RelStep, RelationDecl, RuleSpec,
};
use crate::taxonomy::{ConceptForest, Taxonomy};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServiceDef {
    pub name: String,
    #[serde(rename = "in")]
    pub inputs: Vec<String>,
    #[serde(rename = "out")]
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryDef {
    pub known: Vec<String>,
    pub required: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NameInstance {
    pub services: Vec<ServiceDef>,
    pub query: QueryDef,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConceptDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceDecl {
    pub name: String,
    pub concept: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaxonomyDef {
    pub concepts: Vec<ConceptDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub instances: Vec<InstanceDecl>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HierInstance {
    pub taxonomy: TaxonomyDef,
    pub services: Vec<ServiceDef>,
    pub query: QueryDef,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypedParamDef {
    pub name: String,
    #[serde(rename = "type")]
    pub concept: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub transitive: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub symmetric: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleDef {
    pub name: String,
    pub params: Vec<String>,
    #[serde(default)]
    pub pre: Vec<[String; 3]>,
    #[serde(default)]
    pub eff: Vec<[String; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelServiceDef {
    pub name: String,
    #[serde(rename = "in")]
    pub inputs: Vec<TypedParamDef>,
    #[serde(rename = "out")]
    pub outputs: Vec<TypedParamDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rel: Vec<[String; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelQueryDef {
    pub known: Vec<TypedParamDef>,
    pub required: Vec<TypedParamDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rel: Vec<[String; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelInstance {
    pub taxonomy: TaxonomyDef,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<RelationDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<RuleDef>,
    pub services: Vec<RelServiceDef>,
    pub query: RelQueryDef,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyDef {
    pub name: String,
    #[serde(rename = "type")]
    pub concept: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OoConceptDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub props: Vec<PropertyDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConceptTreeDef {
    pub concepts: Vec<OoConceptDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OoParamDef {
    pub concept: String,
    #[serde(default)]
    pub props: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OoServiceDef {
    pub name: String,
    #[serde(rename = "in")]
    pub inputs: Vec<OoParamDef>,
    #[serde(rename = "out")]
    pub outputs: Vec<OoParamDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OoQueryDef {
    pub known: Vec<OoParamDef>,
    pub required: Vec<OoParamDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OoInstance {
    pub concept_tree: ConceptTreeDef,
    pub services: Vec<OoServiceDef>,
    pub query: OoQueryDef,
}

/// An instance file; the `model` tag selects the engine.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum Instance {
    #[serde(rename = "name")]
    Name(NameInstance),
    #[serde(rename = "hierarchical")]
    Hierarchical(HierInstance),
    #[serde(rename = "relational")]
    Relational(RelInstance),
    #[serde(rename = "oo")]
    Oo(OoInstance),
}

impl Instance {
    pub fn model(&self) -> &'static str {
        match self {
            Instance::Name(_) => "name",
            Instance::Hierarchical(_) => "hierarchical",
            Instance::Relational(_) => "relational",
            Instance::Oo(_) => "oo",
        }
    }
}

impl NameInstance {
    pub fn load(&self) -> Result<(ParamRegistry, Repository, Request)> {
        let registry = ParamRegistry::new();
        let mut services = Vec::with_capacity(self.services.len());
        for def in &self.services {
            let inputs = def.inputs.iter().map(|n| registry.intern(n)).collect::<Result<_>>()?;
            let outputs = def.outputs.iter().map(|n| registry.intern(n)).collect::<Result<_>>()?;
            services.push(Service { name: def.name.clone(), inputs, outputs });
        }
        let repo = Repository::new(services)?;
        let init = self.query.known.iter().map(|n| registry.intern(n)).collect::<Result<_>>()?;
        let goal =
            self.query.required.iter().map(|n| registry.intern(n)).collect::<Result<_>>()?;
        Ok((registry, repo, Request { init, goal }))
    }
}

fn build_forest(concepts: &[ConceptDef]) -> Result<ConceptForest> {
    let mut forest = ConceptForest::new();
    for def in concepts {
        forest.add_concept(&def.name, def.parent.as_deref())?;
    }
    Ok(forest)
}

impl HierInstance {
    pub fn load(&self) -> Result<(Taxonomy, HierRepository, HierRequest)> {
        let forest = build_forest(&self.taxonomy.concepts)?;
        let instances: Vec<(String, String)> = self
            .taxonomy
            .instances
            .iter()
            .map(|d| (d.name.clone(), d.concept.clone()))
            .collect();
        let tax = Taxonomy::new(forest, &instances)?;
        let mut services = Vec::with_capacity(self.services.len());
        for def in &self.services {
            services.push(HierService {
                name: def.name.clone(),
                inputs: def.inputs.iter().map(|n| tax.instance(n)).collect::<Result<_>>()?,
                outputs: def.outputs.iter().map(|n| tax.instance(n)).collect::<Result<_>>()?,
            });
        }
        let repo = HierRepository::new(services)?;
        let req = HierRequest {
            init: self.query.known.iter().map(|n| tax.instance(n)).collect::<Result<_>>()?,
            goal: self.query.required.iter().map(|n| tax.instance(n)).collect::<Result<_>>()?,
        };
        Ok((tax, repo, req))
    }
}

fn typed(params: &[TypedParamDef]) -> Vec<(String, String)> {
    params.iter().map(|p| (p.name.clone(), p.concept.clone())).collect()
}

fn rel_triples(rel: &[[String; 3]]) -> Vec<(String, String, String)> {
    rel.iter().map(|[r, a, b]| (r.clone(), a.clone(), b.clone())).collect()
}

impl RelInstance {
    pub fn load(&self) -> Result<(RelOntology, Vec<RelService>, RelQuery)> {
        let forest = build_forest(&self.taxonomy.concepts)?;
        let relations = self
            .relations
            .iter()
            .map(|d| RelationDecl {
                name: d.name.clone(),
                symmetric: d.symmetric,
                transitive: d.transitive,
            })
            .collect();
        let rules = self
            .rules
            .iter()
            .map(|d| RuleSpec {
                name: d.name.clone(),
                params: d.params.clone(),
                pre: rel_triples(&d.pre),
                eff: rel_triples(&d.eff),
            })
            .collect();
        let ontology = RelOntology::new(forest, relations, rules)?;
        let mut services = Vec::with_capacity(self.services.len());
        for def in &self.services {
            if def.name == "init" {
                return Err(Error::InvalidInstance(
                    "`init` is reserved for the seed call".into(),
                ));
            }
            services.push(ontology.resolve_service(
                &def.name,
                &typed(&def.inputs),
                &typed(&def.outputs),
                &rel_triples(&def.rel),
            )?);
        }
        let query = ontology.resolve_query(
            &typed(&self.query.known),
            &typed(&self.query.required),
            &rel_triples(&self.query.rel),
        )?;
        Ok((ontology, services, query))
    }
}

impl OoInstance {
    pub fn load(&self) -> Result<(ConceptTree, OORepository, OORequest)> {
        let mut forest = ConceptForest::new();
        for def in &self.concept_tree.concepts {
            forest.add_concept(&def.name, def.parent.as_deref())?;
        }
        let mut props = Vec::new();
        for def in &self.concept_tree.concepts {
            for p in &def.props {
                props.push((def.name.clone(), p.name.clone(), p.concept.clone()));
            }
        }
        let tree = ConceptTree::new(forest, &props)?;
        let resolve = |params: &[OoParamDef]| -> Result<Vec<PartialConcept>> {
            params
                .iter()
                .map(|p| {
                    let concept = tree.forest.id(&p.concept)?;
                    let props = p
                        .props
                        .iter()
                        .map(|n| tree.property_at(concept, n))
                        .collect::<Result<_>>()?;
                    Ok(PartialConcept { concept, props })
                })
                .collect()
        };
        let mut services = Vec::with_capacity(self.services.len());
        for def in &self.services {
            services.push(OOService {
                name: def.name.clone(),
                inputs: resolve(&def.inputs)?,
                outputs: resolve(&def.outputs)?,
            });
        }
        let repo = OORepository::new(services)?;
        let query = OORequest {
            known: resolve(&self.query.known)?,
            required: resolve(&self.query.required)?,
        };
        Ok((tree, repo, query))
    }
}

/// Composition file for the name/hierarchical/oo models.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompositionFile {
    pub calls: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution_path: Option<usize>,
}

impl CompositionFile {
    pub fn to_composition(&self) -> crate::model::Composition {
        crate::model::Composition { calls: self.calls.clone(), layers: self.layers.clone() }
    }

    pub fn from_composition(
        comp: &crate::model::Composition,
        execution_path: Option<usize>,
    ) -> Self {
        Self { calls: comp.calls.clone(), layers: comp.layers.clone(), execution_path }
    }
}

/// One step of a relational composition file: a service call with its
/// object bindings, or a rule application.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RelStepDef {
    Call { service: String, bindings: BTreeMap<String, String> },
    Rule { rule: String, bindings: BTreeMap<String, String> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelCompositionFile {
    pub calls: Vec<RelStepDef>,
}

impl RelCompositionFile {
    pub fn from_composition(comp: &RelComposition) -> Self {
        let calls = comp
            .steps
            .iter()
            .map(|step| match step {
                RelStep::Call { service, bindings } => {
                    RelStepDef::Call { service: service.clone(), bindings: bindings.clone() }
                }
                RelStep::Rule { rule, bindings } => {
                    RelStepDef::Rule { rule: rule.clone(), bindings: bindings.clone() }
                }
            })
            .collect();
        Self { calls }
    }

    pub fn to_composition(&self) -> RelComposition {
        RelComposition {
            steps: self
                .calls
                .iter()
                .map(|step| match step {
                    RelStepDef::Call { service, bindings } => {
                        RelStep::Call { service: service.clone(), bindings: bindings.clone() }
                    }
                    RelStepDef::Rule { rule, bindings } => {
                        RelStep::Rule { rule: rule.clone(), bindings: bindings.clone() }
                    }
                })
                .collect(),
        }
    }
}

/// One line of an online event stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum StreamOp {
    RegisterService {
        name: String,
        #[serde(rename = "in")]
        inputs: Vec<String>,
        #[serde(rename = "out")]
        outputs: Vec<String>,
    },
    RemoveService {
        name: String,
    },
    FindComposition {
        id: String,
        known: Vec<String>,
        required: Vec<String>,
    },
    DropRequest {
        id: String,
    },
}

/// One line of the online outcome stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeEventDef {
    pub event: String,
    pub id: String,
    pub calls: Vec<String>,
}

pub fn outcome_event_name(kind: crate::online::OutcomeKind) -> Option<&'static str> {
    use crate::online::OutcomeKind::*;
    match kind {
        Solved => Some("solved"),
        Unsolvable => Some("unsolvable"),
        SwappedToBackup => Some("swapped_to_backup"),
        ResolvedFromScratch => Some("resolved_from_scratch"),
        RequestLost => Some("request_lost"),
        BackupRecomputed => None, // internal; not part of the stream format
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn name_instance_round_trips() {
        let json = r#"{
            "model": "name",
            "services": [{"name": "ws", "in": ["a"], "out": ["b"]}],
            "query": {"known": ["a"], "required": ["b"]}
        }"#;
        let inst: Instance = serde_json::from_str(json).unwrap();
        assert_eq!(inst.model(), "name");
        let Instance::Name(name) = &inst else { panic!() };
        let (_, repo, req) = name.load().unwrap();
        assert_eq!(repo.len(), 1);
        assert_eq!(req.goal.len(), 1);
        let back = serde_json::to_string(&inst).unwrap();
        let reparsed: Instance = serde_json::from_str(&back).unwrap();
        assert_eq!(reparsed.model(), "name");
    }

    #[test]
    fn unknown_model_tag_is_an_error() {
        let json = r#"{"model": "quantum", "services": [], "query": {}}"#;
        assert!(serde_json::from_str::<Instance>(json).is_err());
    }

    #[test]
    fn stream_ops_parse() {
        let line = r#"{"op":"register_service","name":"s","in":["a"],"out":["b"]}"#;
        let op: StreamOp = serde_json::from_str(line).unwrap();
        assert!(matches!(op, StreamOp::RegisterService { .. }));
        let line = r#"{"op":"find_composition","id":"q","known":[],"required":["b"]}"#;
        assert!(matches!(
            serde_json::from_str::<StreamOp>(line).unwrap(),
            StreamOp::FindComposition { .. }
        ));
    }

    #[test]
    fn reserved_init_service_name_rejected() {
        let json = r#"{
            "model": "relational",
            "taxonomy": {"concepts": [{"name": "T"}]},
            "services": [{"name": "init", "in": [], "out": [{"name": "t", "type": "T"}]}],
            "query": {"known": [], "required": [{"name": "w", "type": "T"}]}
        }"#;
        let Instance::Relational(def) = serde_json::from_str::<Instance>(json).unwrap() else {
            panic!()
        };
        assert!(def.load().is_err());
    }

    #[test]
    fn rel_step_def_shapes() {
        let call = r#"{"service":"ws","bindings":{"x":"init.x#0"}}"#;
        assert!(matches!(
            serde_json::from_str::<RelStepDef>(call).unwrap(),
            RelStepDef::Call { .. }
        ));
        let rule = r#"{"rule":"r","bindings":{"X":"a"}}"#;
        assert!(matches!(
            serde_json::from_str::<RelStepDef>(rule).unwrap(),
            RelStepDef::Rule { .. }
        ));
    }
}
