//! Object-oriented model: concept trees with inherited properties and the
//! linear property-learner search.
//!
//! Parameters are partially defined concepts, a concept plus the subset of
//! its properties currently known. Learning a service output walks the
//! concept's ancestor chain upward, marking each property at every level
//! that defines it, stopping once a level gains nothing; every
//! (concept, property) pair is learned at most once globally, which keeps
//! the search linear in the total number of declared properties and
//! parameters.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::model::Composition;
use crate::taxonomy::{build_euler_index, ConceptForest, ConceptId, EulerIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PropertyId(pub u32);

impl PropertyId {
    fn index(self) -> usize {
        self.0 as usize
    }
}

/// Concept forest where each concept carries typed properties, inherited by
/// all descendants. Single inheritance only; a property name may not be
/// redeclared along an inheritance chain.
#[derive(Debug)]
pub struct ConceptTree {
    pub forest: ConceptForest,
    euler: EulerIndex,
    prop_names: Vec<String>,
    prop_types: Vec<ConceptId>,
    /// Concept that declares the property; visible on that subtree.
    prop_owner: Vec<ConceptId>,
    direct_props: Vec<Vec<PropertyId>>,
}

impl ConceptTree {
    /// `props` lists (concept, property name, property type concept).
    pub fn new(forest: ConceptForest, props: &[(String, String, String)]) -> Result<Self> {
        let euler = build_euler_index(&forest)?;
        let mut tree = Self {
            direct_props: vec![Vec::new(); forest.len()],
            forest,
            euler,
            prop_names: Vec::new(),
            prop_types: Vec::new(),
            prop_owner: Vec::new(),
        };
        for (concept, name, ty) in props {
            let owner = tree.forest.id(concept)?;
            let ty = tree.forest.id(ty)?;
            // Reject a name already visible at the owner (inherited or own)
            // or declared below it; unrelated concepts may reuse names.
            for other in tree.forest.ids() {
                let related = tree.euler.is_subtype_or_self(other, owner)
                    || tree.euler.is_subtype_or_self(owner, other);
                if related
                    && tree.direct_props[other.index()]
                        .iter()
                        .any(|p| tree.prop_names[p.index()] == *name)
                {
                    return Err(Error::PropertyRedeclared {
                        concept: concept.clone(),
                        property: name.clone(),
                    });
                }
            }
            let id = PropertyId(tree.prop_names.len() as u32);
            tree.prop_names.push(name.clone());
            tree.prop_types.push(ty);
            tree.prop_owner.push(owner);
            tree.direct_props[owner.index()].push(id);
        }
        Ok(tree)
    }

    pub fn property_name(&self, p: PropertyId) -> &str {
        &self.prop_names[p.index()]
    }

    pub fn property_count(&self) -> usize {
        self.prop_names.len()
    }

    /// Property `p` is defined for `c` directly or through inheritance.
    pub fn has(&self, c: ConceptId, p: PropertyId) -> bool {
        self.euler.is_subtype_or_self(c, self.prop_owner[p.index()])
    }

    pub fn is_subtype_or_self(&self, a: ConceptId, b: ConceptId) -> bool {
        self.euler.is_subtype_or_self(a, b)
    }

    /// Resolves a property name visible at `c`.
    pub fn property_at(&self, c: ConceptId, name: &str) -> Result<PropertyId> {
        for a in self.forest.ancestors_or_self(c) {
            for &p in &self.direct_props[a.index()] {
                if self.prop_names[p.index()] == name {
                    return Ok(PropertyId(p.0));
                }
            }
        }
        Err(Error::UnknownProperty {
            concept: self.forest.name(c).to_owned(),
            property: name.to_owned(),
        })
    }

    /// All properties visible at `c`, own and inherited.
    pub fn properties_of(&self, c: ConceptId) -> Vec<PropertyId> {
        let mut out = Vec::new();
        for a in self.forest.ancestors_or_self(c) {
            out.extend(self.direct_props[a.index()].iter().copied());
        }
        out
    }
}

/// A concept together with the subset of its properties that is required or
/// provided.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialConcept {
    pub concept: ConceptId,
    pub props: BTreeSet<PropertyId>,
}

#[derive(Debug, Clone)]
pub struct OOService {
    pub name: String,
    pub inputs: Vec<PartialConcept>,
    pub outputs: Vec<PartialConcept>,
}

#[derive(Debug, Clone)]
pub struct OORequest {
    pub known: Vec<PartialConcept>,
    pub required: Vec<PartialConcept>,
}

#[derive(Debug, Default)]
pub struct OORepository {
    services: Vec<OOService>,
    by_name: HashMap<String, usize>,
}

impl OORepository {
    pub fn new(services: Vec<OOService>) -> Result<Self> {
        let mut by_name = HashMap::new();
        for (i, svc) in services.iter().enumerate() {
            if by_name.insert(svc.name.clone(), i).is_some() {
                return Err(Error::DuplicateService(svc.name.clone()));
            }
        }
        Ok(Self { services, by_name })
    }

    pub fn services(&self) -> &[OOService] {
        &self.services
    }

    pub fn get(&self, name: &str) -> Option<&OOService> {
        self.by_name.get(name).map(|&i| &self.services[i])
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }
}

/// Index key for the goal pseudo-service inside the engine state.
const GOAL: usize = usize::MAX;

/// Per-query mutable search state: known properties per concept, reverse
/// indexes from (concept, property) to the services waiting on them, and the
/// services whose remaining requirements emptied.
pub struct EngineState<'a> {
    tree: &'a ConceptTree,
    repo: &'a OORepository,
    goal: &'a [PartialConcept],
    known: HashMap<ConceptId, BTreeSet<PropertyId>>,
    known_concepts: HashSet<ConceptId>,
    required: HashMap<(ConceptId, PropertyId), Vec<usize>>,
    required_presence: HashMap<ConceptId, Vec<usize>>,
    remaining_set: Vec<HashSet<(ConceptId, PropertyId)>>,
    remaining_presence: Vec<HashSet<ConceptId>>,
    callable: BTreeSet<String>,
    callable_goal: bool,
    called: Vec<bool>,
}

impl<'a> EngineState<'a> {
    fn service_inputs(&self, idx: usize) -> &'a [PartialConcept] {
        if idx == GOAL {
            self.goal
        } else {
            &self.repo.services()[idx].inputs
        }
    }

    fn mark_ready(&mut self, idx: usize) {
        if idx == GOAL {
            self.callable_goal = true;
        } else {
            self.callable.insert(self.repo.services()[idx].name.clone());
        }
    }

    pub fn goal_callable(&self) -> bool {
        self.callable_goal
    }

    pub fn callable(&self) -> &BTreeSet<String> {
        &self.callable
    }

    pub fn known_props(&self, c: ConceptId) -> BTreeSet<PropertyId> {
        self.known.get(&c).cloned().unwrap_or_default()
    }

    pub fn concept_known(&self, c: ConceptId) -> bool {
        self.known_concepts.contains(&c)
    }

    /// Properties of `ws.in` still missing, per concept. Empty iff callable.
    pub fn remaining_of(&self, service: &str) -> Option<(usize, usize)> {
        let idx = self.repo.by_name.get(service)?;
        Some((self.remaining_set[*idx].len(), self.remaining_presence[*idx].len()))
    }
}

/// Populates the indexes from every service input's (concept, property)
/// pairs; the goal is inserted as one more service.
pub fn initialize<'a>(
    repo: &'a OORepository,
    tree: &'a ConceptTree,
    query: &'a OORequest,
) -> Result<EngineState<'a>> {
    let n = repo.len();
    let mut state = EngineState {
        tree,
        repo,
        goal: &query.required,
        known: HashMap::new(),
        known_concepts: HashSet::new(),
        required: HashMap::new(),
        required_presence: HashMap::new(),
        remaining_set: vec![HashSet::new(); n + 1],
        remaining_presence: vec![HashSet::new(); n + 1],
        callable: BTreeSet::new(),
        callable_goal: false,
        called: vec![false; n],
    };

    let index_service = |state: &mut EngineState<'a>, idx: usize| {
        let slot = if idx == GOAL { n } else { idx };
        for pc in state.service_inputs(idx) {
            if pc.props.is_empty() {
                if state.remaining_presence[slot].insert(pc.concept) {
                    state.required_presence.entry(pc.concept).or_default().push(idx);
                }
                continue;
            }
            for &p in &pc.props {
                if state.remaining_set[slot].insert((pc.concept, p)) {
                    state.required.entry((pc.concept, p)).or_default().push(idx);
                }
            }
        }
        if state.remaining_set[slot].is_empty() && state.remaining_presence[slot].is_empty() {
            state.mark_ready(idx);
        }
    };

    for idx in 0..n {
        for pc in &repo.services()[idx].inputs {
            for &p in &pc.props {
                if !tree.has(pc.concept, p) {
                    return Err(Error::UnknownProperty {
                        concept: tree.forest.name(pc.concept).to_owned(),
                        property: tree.property_name(p).to_owned(),
                    });
                }
            }
        }
        index_service(&mut state, idx);
    }
    index_service(&mut state, GOAL);
    Ok(state)
}

/// Learns a service's outputs: each (concept, props) walks the ancestor
/// chain upward, marking properties at every level that defines them and
/// presence at every level, stopping once a level gains nothing new.
pub fn call_web_service(state: &mut EngineState, outputs: &[PartialConcept]) {
    for pc in outputs {
        let mut cursor = Some(pc.concept);
        while let Some(cp) = cursor {
            let mut gained = false;
            if state.known_concepts.insert(cp) {
                gained = true;
                let waiters = state.required_presence.get(&cp).cloned().unwrap_or_default();
                for w in waiters {
                    let slot = if w == GOAL { state.repo.len() } else { w };
                    if state.remaining_presence[slot].remove(&cp)
                        && state.remaining_presence[slot].is_empty()
                        && state.remaining_set[slot].is_empty()
                    {
                        state.mark_ready(w);
                    }
                }
            }
            for &p in &pc.props {
                if !state.tree.has(cp, p) {
                    continue;
                }
                if !state.known.entry(cp).or_default().insert(p) {
                    continue;
                }
                gained = true;
                let waiters = state.required.get(&(cp, p)).cloned().unwrap_or_default();
                for w in waiters {
                    let slot = if w == GOAL { state.repo.len() } else { w };
                    if state.remaining_set[slot].remove(&(cp, p))
                        && state.remaining_set[slot].is_empty()
                        && state.remaining_presence[slot].is_empty()
                    {
                        state.mark_ready(w);
                    }
                }
            }
            if !gained {
                break;
            }
            cursor = state.tree.forest.parent(cp);
        }
    }
}

/// Linear composition search: learn the initially known parameters, then
/// keep calling the lexicographically first callable service until the goal
/// becomes callable or nothing is left.
pub fn find_comp(repo: &OORepository, tree: &ConceptTree, query: &OORequest) -> Option<Composition> {
    let mut state = initialize(repo, tree, query).ok()?;
    call_web_service(&mut state, &query.known);
    let mut calls = Vec::new();
    while !state.callable_goal {
        let name = state.callable.iter().next().cloned()?;
        state.callable.remove(&name);
        let idx = repo.by_name[&name];
        state.called[idx] = true;
        calls.push(name);
        let outputs = repo.services()[idx].outputs.clone();
        call_web_service(&mut state, &outputs);
    }
    Some(Composition::sequential(calls))
}

/// Searches and then optionally prunes with a backward usefulness sweep over
/// (concept, property) needs, the name-model reduction generalized.
pub fn find_comp_with_reduce(
    repo: &OORepository,
    tree: &ConceptTree,
    query: &OORequest,
    reduce: bool,
) -> Option<Composition> {
    let comp = find_comp(repo, tree, query)?;
    if !reduce {
        return Some(comp);
    }
    Some(reduce_oo(repo, tree, query, &comp))
}

/// A "fact" is a (concept, property) pair learned at some level, or the bare
/// presence of a concept.
type Fact = (ConceptId, Option<PropertyId>);

/// Facts an output yields under the learning formula: walking every
/// ancestor, presence there plus each carried property the level defines.
fn facts_of_output(tree: &ConceptTree, out: &PartialConcept) -> Vec<Fact> {
    let mut facts = Vec::new();
    for c in tree.forest.ancestors_or_self(out.concept) {
        facts.push((c, None));
        for &p in &out.props {
            if tree.has(c, p) {
                facts.push((c, Some(p)));
            }
        }
    }
    facts
}

fn facts_of_input(pc: &PartialConcept) -> Vec<Fact> {
    if pc.props.is_empty() {
        vec![(pc.concept, None)]
    } else {
        pc.props.iter().map(|&p| (pc.concept, Some(p))).collect()
    }
}

/// Name-model style reduction over (concept, property) facts: a service
/// stays only when it yields a fact nobody provided before it that a later
/// service or the goal still consumes.
fn reduce_oo(
    repo: &OORepository,
    tree: &ConceptTree,
    query: &OORequest,
    comp: &Composition,
) -> Composition {
    let mut future_uses: HashMap<Fact, usize> = HashMap::new();
    for name in &comp.calls {
        let svc = repo.get(name).expect("composition built from this repo");
        for pc in &svc.inputs {
            for fact in facts_of_input(pc) {
                *future_uses.entry(fact).or_insert(0) += 1;
            }
        }
    }
    for pc in &query.required {
        for fact in facts_of_input(pc) {
            *future_uses.entry(fact).or_insert(0) += 1;
        }
    }

    let mut provided: HashSet<Fact> = HashSet::new();
    for pc in &query.known {
        provided.extend(facts_of_output(tree, pc));
    }
    let mut kept = Vec::new();
    for name in &comp.calls {
        let svc = repo.get(name).expect("composition built from this repo");
        for pc in &svc.inputs {
            for fact in facts_of_input(pc) {
                if let Some(c) = future_uses.get_mut(&fact) {
                    *c -= 1;
                }
            }
        }
        let novel: Vec<Fact> = svc
            .outputs
            .iter()
            .flat_map(|out| facts_of_output(tree, out))
            .filter(|f| !provided.contains(f))
            .collect();
        let useful =
            novel.iter().any(|f| future_uses.get(f).copied().unwrap_or(0) > 0);
        if useful {
            provided.extend(novel);
            kept.push(name.clone());
        }
    }
    Composition::sequential(kept)
}

/// Independent validator applying the matching definition literally: the
/// knowledge is recomputed as a map of partially defined concepts via the
/// learning formula, with no upward-walk shortcuts.
pub fn validate_oo(
    repo: &OORepository,
    tree: &ConceptTree,
    query: &OORequest,
    comp: &Composition,
) -> Result<bool> {
    for name in &comp.calls {
        if repo.get(name).is_none() {
            return Err(Error::UnknownService(name.clone()));
        }
    }
    let mut known: BTreeMap<ConceptId, BTreeSet<PropertyId>> = BTreeMap::new();
    let learn = |known: &mut BTreeMap<ConceptId, BTreeSet<PropertyId>>,
                     outputs: &[PartialConcept]| {
        for out in outputs {
            // every concept the output's concept is a subtype of gains the
            // properties it defines
            for c in tree.forest.ids() {
                if !tree.is_subtype_or_self(out.concept, c) {
                    continue;
                }
                let entry = known.entry(c).or_default();
                for &p in &out.props {
                    if tree.has(c, p) {
                        entry.insert(p);
                    }
                }
            }
        }
    };
    let matches = |known: &BTreeMap<ConceptId, BTreeSet<PropertyId>>,
                   inputs: &[PartialConcept]| {
        inputs.iter().all(|need| {
            known.iter().any(|(c, props)| {
                tree.is_subtype_or_self(*c, need.concept)
                    && need.props.iter().all(|p| props.contains(p))
            })
        })
    };

    learn(&mut known, &query.known);
    for name in &comp.calls {
        let svc = repo.get(name).expect("resolved above");
        if !matches(&known, &svc.inputs) {
            return Ok(false);
        }
        learn(&mut known, &svc.outputs);
    }
    Ok(matches(&known, &query.required))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transport() -> (ConceptTree, OORepository, OORequest) {
        let mut forest = ConceptForest::new();
        for (name, parent) in [
            ("Text", None),
            ("AdministrativeArea", None),
            ("Country", Some("AdministrativeArea")),
            ("City", Some("AdministrativeArea")),
            ("Organization", None),
            ("LocalBusiness", Some("Organization")),
            ("Vehicle", None),
            ("GeoLocation", None),
            ("Action", None),
        ] {
            forest.add_concept(name, parent).unwrap();
        }
        let props: Vec<(String, String, String)> = [
            ("AdministrativeArea", "name", "Text"),
            ("Organization", "orgName", "Text"),
            ("Organization", "email", "Text"),
            ("Vehicle", "vehicleIdentificationNumber", "Text"),
            ("Vehicle", "payload", "Text"),
            ("GeoLocation", "latitude", "Text"),
            ("GeoLocation", "longitude", "Text"),
            ("Action", "startTime", "Text"),
            ("Action", "endTime", "Text"),
            ("Action", "location", "Text"),
        ]
        .iter()
        .map(|(a, b, c)| (a.to_string(), b.to_string(), c.to_string()))
        .collect();
        let tree = ConceptTree::new(forest, &props).unwrap();

        let pc = |c: &str, names: &[&str]| -> PartialConcept {
            let concept = tree.forest.id(c).unwrap();
            PartialConcept {
                concept,
                props: names.iter().map(|n| tree.property_at(concept, n).unwrap()).collect(),
            }
        };
        let repo = OORepository::new(vec![
            OOService {
                name: "getCountryFromLocation".into(),
                inputs: vec![pc("GeoLocation", &["latitude", "longitude"])],
                outputs: vec![pc("Country", &["name"])],
            },
            OOService {
                name: "getTransportCompany".into(),
                inputs: vec![pc("AdministrativeArea", &["name"])],
                outputs: vec![pc("Organization", &["orgName"])],
            },
            OOService {
                name: "getClosestCity".into(),
                inputs: vec![pc("GeoLocation", &["latitude", "longitude"])],
                outputs: vec![pc("City", &["name"])],
            },
            OOService {
                name: "getLocalSubsidiary".into(),
                inputs: vec![pc("Organization", &["orgName"]), pc("City", &["name"])],
                outputs: vec![pc("LocalBusiness", &["email"])],
            },
            OOService {
                name: "getVehicle".into(),
                inputs: vec![pc("Vehicle", &["payload"]), pc("LocalBusiness", &["email"])],
                outputs: vec![pc("Vehicle", &["vehicleIdentificationNumber"])],
            },
            OOService {
                name: "makeArrangements".into(),
                inputs: vec![
                    pc("Vehicle", &["vehicleIdentificationNumber"]),
                    pc("Organization", &["orgName", "email"]),
                    pc("Action", &["startTime", "endTime"]),
                ],
                outputs: vec![pc("Action", &["location"])],
            },
        ])
        .unwrap();
        let query = OORequest {
            known: vec![
                pc("GeoLocation", &["latitude", "longitude"]),
                pc("Vehicle", &["payload"]),
                pc("Action", &["startTime", "endTime"]),
            ],
            required: vec![pc("Action", &["location"])],
        };
        (tree, repo, query)
    }

    #[test]
    fn transport_example_uses_all_six_services() {
        let (tree, repo, query) = transport();
        let comp = find_comp(&repo, &tree, &query).unwrap();
        assert_eq!(comp.len(), 6);
        assert!(validate_oo(&repo, &tree, &query, &comp).unwrap());
    }

    #[test]
    fn transport_initialize_indexes_getvehicle() {
        let (tree, repo, query) = transport();
        let state = initialize(&repo, &tree, &query).unwrap();
        // remaining(getVehicle) = Vehicle:{payload} + LocalBusiness:{email}
        assert_eq!(state.remaining_of("getVehicle"), Some((2, 0)));
    }

    #[test]
    fn local_business_email_counts_as_organization_email() {
        let (tree, repo, query) = transport();
        let mut state = initialize(&repo, &tree, &query).unwrap();
        let org = tree.forest.id("Organization").unwrap();
        let email = tree.property_at(org, "email").unwrap();
        let lb = tree.forest.id("LocalBusiness").unwrap();
        call_web_service(
            &mut state,
            &[PartialConcept { concept: lb, props: [email].into() }],
        );
        assert!(state.known_props(org).contains(&email));
    }

    #[test]
    fn relearning_known_properties_changes_nothing() {
        let (tree, repo, query) = transport();
        let mut state = initialize(&repo, &tree, &query).unwrap();
        let org = tree.forest.id("Organization").unwrap();
        let email = tree.property_at(org, "email").unwrap();
        let lb = tree.forest.id("LocalBusiness").unwrap();
        let output = [PartialConcept { concept: lb, props: [email].into() }];
        call_web_service(&mut state, &output);
        let known_before = state.known_props(org);
        let callable_before = state.callable().clone();
        call_web_service(&mut state, &output);
        assert_eq!(state.known_props(org), known_before);
        assert_eq!(state.callable(), &callable_before);
    }

    #[test]
    fn empty_goal_is_callable_immediately() {
        let (tree, _, _) = transport();
        let repo = OORepository::new(vec![]).unwrap();
        let query = OORequest { known: vec![], required: vec![] };
        let state = initialize(&repo, &tree, &query).unwrap();
        assert!(state.goal_callable());
        let comp = find_comp(&repo, &tree, &query).unwrap();
        assert!(comp.is_empty());
    }

    #[test]
    fn presence_marker_clears_when_concept_learned_with_zero_props() {
        let mut forest = ConceptForest::new();
        forest.add_concept("A", None).unwrap();
        forest.add_concept("B", None).unwrap();
        let tree = ConceptTree::new(forest, &[]).unwrap();
        let a = tree.forest.id("A").unwrap();
        let b = tree.forest.id("B").unwrap();
        let repo = OORepository::new(vec![OOService {
            name: "needA".into(),
            inputs: vec![PartialConcept { concept: a, props: BTreeSet::new() }],
            outputs: vec![PartialConcept { concept: b, props: BTreeSet::new() }],
        }])
        .unwrap();
        let query = OORequest {
            known: vec![PartialConcept { concept: a, props: BTreeSet::new() }],
            required: vec![PartialConcept { concept: b, props: BTreeSet::new() }],
        };
        let comp = find_comp(&repo, &tree, &query).unwrap();
        assert_eq!(comp.calls, vec!["needA"]);
        assert!(validate_oo(&repo, &tree, &query, &comp).unwrap());
    }

    #[test]
    fn chain_learning_marks_property_at_every_defining_ancestor() {
        // c3 isA c2 isA c1; property p defined at c1 is visible everywhere,
        // learning it at c3 must mark it at c3, c2 and c1.
        let mut forest = ConceptForest::new();
        forest.add_concept("c1", None).unwrap();
        forest.add_concept("c2", Some("c1")).unwrap();
        forest.add_concept("c3", Some("c2")).unwrap();
        let tree =
            ConceptTree::new(forest, &[("c1".into(), "p".into(), "c1".into())]).unwrap();
        let c1 = tree.forest.id("c1").unwrap();
        let c2 = tree.forest.id("c2").unwrap();
        let c3 = tree.forest.id("c3").unwrap();
        let p = tree.property_at(c3, "p").unwrap();
        let repo = OORepository::new(vec![]).unwrap();
        let query = OORequest { known: vec![], required: vec![] };
        let mut state = initialize(&repo, &tree, &query).unwrap();
        call_web_service(&mut state, &[PartialConcept { concept: c3, props: [p].into() }]);
        for c in [c1, c2, c3] {
            assert!(state.known_props(c).contains(&p), "missing at {:?}", c);
            assert!(state.concept_known(c));
        }
    }

    #[test]
    fn redeclaring_inherited_property_rejected() {
        let mut forest = ConceptForest::new();
        forest.add_concept("a", None).unwrap();
        forest.add_concept("b", Some("a")).unwrap();
        let err = ConceptTree::new(
            forest,
            &[
                ("a".into(), "p".into(), "a".into()),
                ("b".into(), "p".into(), "a".into()),
            ],
        );
        assert!(matches!(err, Err(Error::PropertyRedeclared { .. })));
    }

    #[test]
    fn unrelated_concepts_may_share_property_names() {
        let mut forest = ConceptForest::new();
        forest.add_concept("a", None).unwrap();
        forest.add_concept("b", None).unwrap();
        let tree = ConceptTree::new(
            forest,
            &[
                ("a".into(), "name".into(), "a".into()),
                ("b".into(), "name".into(), "a".into()),
            ],
        )
        .unwrap();
        let a = tree.forest.id("a").unwrap();
        let b = tree.forest.id("b").unwrap();
        assert_ne!(tree.property_at(a, "name").unwrap(), tree.property_at(b, "name").unwrap());
    }

    #[test]
    fn reduce_drops_unused_services() {
        let (tree, repo_owner, query) = transport();
        let mut services = repo_owner.services().to_vec();
        let geo = tree.forest.id("GeoLocation").unwrap();
        let lat = tree.property_at(geo, "latitude").unwrap();
        services.push(OOService {
            name: "aNoise".into(), // sorts first; called but useless
            inputs: vec![PartialConcept { concept: geo, props: [lat].into() }],
            outputs: vec![PartialConcept { concept: geo, props: [lat].into() }],
        });
        let repo = OORepository::new(services).unwrap();
        let raw = find_comp(&repo, &tree, &query).unwrap();
        assert!(raw.calls.contains(&"aNoise".to_string()));
        let reduced = find_comp_with_reduce(&repo, &tree, &query, true).unwrap();
        assert!(!reduced.calls.contains(&"aNoise".to_string()));
        // getCountryFromLocation is also redundant: City(name) already
        // stands in for AdministrativeArea(name)
        assert_eq!(reduced.len(), 5);
        assert!(!reduced.calls.contains(&"getCountryFromLocation".to_string()));
        assert!(validate_oo(&repo, &tree, &query, &reduced).unwrap());
    }

    #[test]
    fn flat_tree_matches_name_model_solvability() {
        // one root concept per "parameter", one property each: the bijection
        // concept.property <-> parameter name makes both engines agree
        use crate::intern::ParamRegistry;
        use crate::model::{Repository, Request, Service};
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..25 {
            let nparams = rng.gen_range(3..8usize);
            let mut forest = ConceptForest::new();
            for i in 0..nparams {
                forest.add_concept(&format!("c{i}"), None).unwrap();
            }
            let props: Vec<(String, String, String)> =
                (0..nparams).map(|i| (format!("c{i}"), format!("p{i}"), "c0".into())).collect();
            let tree = ConceptTree::new(forest, &props).unwrap();
            let pc = |tree: &ConceptTree, i: usize| {
                let c = tree.forest.id(&format!("c{i}")).unwrap();
                PartialConcept { concept: c, props: [tree.property_at(c, &format!("p{i}")).unwrap()].into() }
            };

            let nsvc = rng.gen_range(1..7usize);
            let mut oo_services = Vec::new();
            let mut raw = Vec::new();
            for s in 0..nsvc {
                let nin = rng.gen_range(0..3usize);
                let nout = rng.gen_range(1..3usize);
                let ins: Vec<usize> = (0..nparams).collect::<Vec<_>>()
                    .choose_multiple(&mut rng, nin).copied().collect();
                let outs: Vec<usize> = (0..nparams)
                    .filter(|i| !ins.contains(i))
                    .collect::<Vec<_>>()
                    .choose_multiple(&mut rng, nout)
                    .copied()
                    .collect();
                if outs.is_empty() {
                    continue;
                }
                oo_services.push(OOService {
                    name: format!("s{s}"),
                    inputs: ins.iter().map(|&i| pc(&tree, i)).collect(),
                    outputs: outs.iter().map(|&i| pc(&tree, i)).collect(),
                });
                raw.push((format!("s{s}"), ins, outs));
            }
            let init: Vec<usize> = (0..nparams).collect::<Vec<_>>()
                .choose_multiple(&mut rng, 1).copied().collect();
            let goal: Vec<usize> = (0..nparams).collect::<Vec<_>>()
                .choose_multiple(&mut rng, 2).copied().collect();

            let repo = OORepository::new(oo_services).unwrap();
            let query = OORequest {
                known: init.iter().map(|&i| pc(&tree, i)).collect(),
                required: goal.iter().map(|&i| pc(&tree, i)).collect(),
            };
            let oo_result = find_comp(&repo, &tree, &query);

            let reg = ParamRegistry::new();
            let id = |i: usize| reg.intern(&format!("p{i}")).unwrap();
            let services = raw
                .iter()
                .map(|(name, ins, outs)| Service {
                    name: name.clone(),
                    inputs: ins.iter().map(|&i| id(i)).collect(),
                    outputs: outs.iter().map(|&i| id(i)).collect(),
                })
                .collect();
            let name_repo = Repository::new(services).unwrap();
            let req = Request {
                init: init.iter().map(|&i| id(i)).collect(),
                goal: goal.iter().map(|&i| id(i)).collect(),
            };
            let name_result = crate::name_engine::find_composition(&reg, &name_repo, &req);
            assert_eq!(oo_result.is_some(), name_result.is_some());
        }
    }

    #[test]
    fn upward_coherence_holds_after_random_learning() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.gen_range(2..8usize);
            let mut forest = ConceptForest::new();
            for i in 0..n {
                let parent =
                    if i == 0 { None } else { Some(format!("c{}", rng.gen_range(0..i))) };
                forest.add_concept(&format!("c{i}"), parent.as_deref()).unwrap();
            }
            let nprops = rng.gen_range(1..5usize);
            let props: Vec<(String, String, String)> = (0..nprops)
                .map(|k| (format!("c{}", rng.gen_range(0..n)), format!("p{k}"), "c0".to_string()))
                .collect();
            let tree = ConceptTree::new(forest, &props).unwrap();
            let repo = OORepository::new(vec![]).unwrap();
            let query = OORequest { known: vec![], required: vec![] };
            let mut state = initialize(&repo, &tree, &query).unwrap();
            for _ in 0..5 {
                let c = ConceptId(rng.gen_range(0..n) as u32);
                let visible = tree.properties_of(c);
                if visible.is_empty() {
                    continue;
                }
                let props: BTreeSet<PropertyId> =
                    visible.choose_multiple(&mut rng, 1).copied().collect();
                call_web_service(&mut state, &[PartialConcept { concept: c, props }]);
            }
            // if p known at c and defined at parent(c), it is known there too
            for c in tree.forest.ids() {
                if let Some(parent) = tree.forest.parent(c) {
                    for &p in &state.known_props(c) {
                        if tree.has(parent, p) {
                            assert!(state.known_props(parent).contains(&p));
                        }
                    }
                }
            }
        }
    }
}
