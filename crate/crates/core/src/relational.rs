//! Relational model: typed objects, binary relations and inference rules.
//!
//! Knowledge is a growing graph of objects with relation triples. A service
//! call binds input parameters to objects through a backtracking search that
//! checks declared relations between bound parameters; outputs create fresh
//! objects carrying provenance in their ids. Inference rules (and the
//! internal rules compiled from symmetry/transitivity declarations) add
//! triples to fixpoint after every pass. A call history of binding digests
//! keeps the engine from repeating identical calls.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::taxonomy::{build_euler_index, ConceptForest, ConceptId, EulerIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId(pub u32);

impl RelationId {
    fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId(pub u32);

impl ObjectId {
    fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
pub struct RelationDecl {
    pub name: String,
    pub symmetric: bool,
    pub transitive: bool,
}

/// Inference rule over untyped variables. Effects only ever add relation
/// triples, never objects.
#[derive(Debug, Clone)]
pub struct Rule {
    pub name: String,
    pub params: Vec<String>,
    pub preconditions: Vec<(RelationId, usize, usize)>,
    pub effects: Vec<(RelationId, usize, usize)>,
}

/// Reference to a service parameter by side and position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRef {
    In(usize),
    Out(usize),
}

#[derive(Debug, Clone)]
pub struct RelParam {
    pub name: String,
    pub concept: ConceptId,
}

/// Typed service with declared relations. Relations between two inputs are
/// preconditions; all others are effects generated by the call.
#[derive(Debug, Clone)]
pub struct RelService {
    pub name: String,
    pub inputs: Vec<RelParam>,
    pub outputs: Vec<RelParam>,
    pub relations: Vec<(RelationId, ParamRef, ParamRef)>,
}

impl RelService {
    pub fn preconditions(&self) -> impl Iterator<Item = (RelationId, usize, usize)> + '_ {
        self.relations.iter().filter_map(|(r, a, b)| match (a, b) {
            (ParamRef::In(i), ParamRef::In(j)) => Some((*r, *i, *j)),
            _ => None,
        })
    }
}

/// The query, expressed like a service: inputs are the initially known
/// objects, outputs the required ones, with relations restricting both.
#[derive(Debug, Clone)]
pub struct RelQuery {
    pub inputs: Vec<RelParam>,
    pub outputs: Vec<RelParam>,
    pub relations: Vec<(RelationId, ParamRef, ParamRef)>,
}

/// Concept forest plus relation declarations and inference rules. Relation
/// properties are compiled to internal rules at load so closure runs through
/// the same engine as user rules.
#[derive(Debug)]
pub struct RelOntology {
    pub forest: ConceptForest,
    euler: EulerIndex,
    subtypes: Vec<Vec<ConceptId>>,
    relations: Vec<RelationDecl>,
    rel_by_name: HashMap<String, RelationId>,
    pub rules: Vec<Rule>,
    internal_rules: Vec<Rule>,
}

impl RelOntology {
    pub fn new(
        forest: ConceptForest,
        relations: Vec<RelationDecl>,
        rule_specs: Vec<RuleSpec>,
    ) -> Result<Self> {
        let euler = build_euler_index(&forest)?;
        let mut subtypes = vec![Vec::new(); forest.len()];
        for c in forest.ids() {
            for a in forest.ancestors_or_self(c) {
                subtypes[a.index()].push(c);
            }
        }
        let mut rel_by_name = HashMap::new();
        for (i, decl) in relations.iter().enumerate() {
            if rel_by_name.insert(decl.name.clone(), RelationId(i as u32)).is_some() {
                return Err(Error::InvalidInstance(format!(
                    "duplicate relation `{}`",
                    decl.name
                )));
            }
        }
        let mut internal_rules = Vec::new();
        for (i, decl) in relations.iter().enumerate() {
            let r = RelationId(i as u32);
            if decl.symmetric {
                internal_rules.push(Rule {
                    name: format!("__sym_{}", decl.name),
                    params: vec!["X".into(), "Y".into()],
                    preconditions: vec![(r, 0, 1)],
                    effects: vec![(r, 1, 0)],
                });
            }
            if decl.transitive {
                internal_rules.push(Rule {
                    name: format!("__trans_{}", decl.name),
                    params: vec!["X".into(), "Y".into(), "Z".into()],
                    preconditions: vec![(r, 0, 1), (r, 1, 2)],
                    effects: vec![(r, 0, 2)],
                });
            }
        }
        let mut ontology = Self {
            forest,
            euler,
            subtypes,
            relations,
            rel_by_name,
            rules: Vec::new(),
            internal_rules,
        };
        let mut rules = Vec::new();
        for spec in rule_specs {
            rules.push(ontology.resolve_rule(spec)?);
        }
        ontology.rules = rules;
        Ok(ontology)
    }

    pub fn relation(&self, name: &str) -> Result<RelationId> {
        self.rel_by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownRelation(name.to_owned()))
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id.index()].name
    }

    pub fn relation_decl(&self, id: RelationId) -> &RelationDecl {
        &self.relations[id.index()]
    }

    pub fn relations(&self) -> &[RelationDecl] {
        &self.relations
    }

    pub fn is_subtype_or_self(&self, a: ConceptId, b: ConceptId) -> bool {
        self.euler.is_subtype_or_self(a, b)
    }

    fn subtypes_of(&self, c: ConceptId) -> &[ConceptId] {
        &self.subtypes[c.index()]
    }

    fn resolve_rule(&self, spec: RuleSpec) -> Result<Rule> {
        let var_index = |v: &str| -> Result<usize> {
            spec.params.iter().position(|p| p == v).ok_or_else(|| {
                Error::InvalidInstance(format!("rule `{}`: unknown variable `{v}`", spec.name))
            })
        };
        let resolve = |list: &[(String, String, String)]| -> Result<Vec<_>> {
            list.iter()
                .map(|(r, a, b)| Ok((self.relation(r)?, var_index(a)?, var_index(b)?)))
                .collect()
        };
        Ok(Rule {
            preconditions: resolve(&spec.pre)?,
            effects: resolve(&spec.eff)?,
            name: spec.name,
            params: spec.params,
        })
    }

    /// Builds a typed service from name-level pieces, classifying relations
    /// into preconditions and effects by the sides they touch.
    pub fn resolve_service(
        &self,
        name: &str,
        inputs: &[(String, String)],
        outputs: &[(String, String)],
        relations: &[(String, String, String)],
    ) -> Result<RelService> {
        let (ins, outs, rels) = self.resolve_params(name, inputs, outputs, relations)?;
        Ok(RelService { name: name.to_owned(), inputs: ins, outputs: outs, relations: rels })
    }

    pub fn resolve_query(
        &self,
        inputs: &[(String, String)],
        outputs: &[(String, String)],
        relations: &[(String, String, String)],
    ) -> Result<RelQuery> {
        let (ins, outs, rels) = self.resolve_params("query", inputs, outputs, relations)?;
        Ok(RelQuery { inputs: ins, outputs: outs, relations: rels })
    }

    fn resolve_params(
        &self,
        owner: &str,
        inputs: &[(String, String)],
        outputs: &[(String, String)],
        relations: &[(String, String, String)],
    ) -> Result<ResolvedParams> {
        let mut seen = HashSet::new();
        let mut resolve_side = |side: &[(String, String)]| -> Result<Vec<RelParam>> {
            side.iter()
                .map(|(p, c)| {
                    if !seen.insert(p.clone()) {
                        return Err(Error::InvalidInstance(format!(
                            "`{owner}`: duplicate parameter `{p}`"
                        )));
                    }
                    Ok(RelParam { name: p.clone(), concept: self.forest.id(c)? })
                })
                .collect()
        };
        let ins = resolve_side(inputs)?;
        let outs = resolve_side(outputs)?;
        let param_ref = |p: &str| -> Result<ParamRef> {
            if let Some(i) = ins.iter().position(|x| x.name == p) {
                Ok(ParamRef::In(i))
            } else if let Some(i) = outs.iter().position(|x| x.name == p) {
                Ok(ParamRef::Out(i))
            } else {
                Err(Error::InvalidInstance(format!("`{owner}`: unknown parameter `{p}`")))
            }
        };
        let rels = relations
            .iter()
            .map(|(r, a, b)| Ok((self.relation(r)?, param_ref(a)?, param_ref(b)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok((ins, outs, rels))
    }
}

type ResolvedParams = (Vec<RelParam>, Vec<RelParam>, Vec<(RelationId, ParamRef, ParamRef)>);

/// Name-level rule description, resolved against the ontology at load.
#[derive(Debug, Clone)]
pub struct RuleSpec {
    pub name: String,
    pub params: Vec<String>,
    pub pre: Vec<(String, String, String)>,
    pub eff: Vec<(String, String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Provenance {
    Event(usize),
}

/// Objects and relation triples known at some stage of the search. Monotone:
/// nothing is ever removed.
#[derive(Debug, Default)]
pub struct KnowledgeState {
    labels: Vec<String>,
    types: Vec<ConceptId>,
    by_concept: HashMap<ConceptId, Vec<ObjectId>>,
    triple_index: HashMap<(RelationId, ObjectId, ObjectId), usize>,
    triples: Vec<(RelationId, ObjectId, ObjectId)>,
    triple_provenance: Vec<Provenance>,
}

impl KnowledgeState {
    pub fn object_count(&self) -> usize {
        self.labels.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn object_type(&self, o: ObjectId) -> ConceptId {
        self.types[o.index()]
    }

    pub fn object_label(&self, o: ObjectId) -> &str {
        &self.labels[o.index()]
    }

    pub fn has_triple(&self, r: RelationId, a: ObjectId, b: ObjectId) -> bool {
        self.triple_index.contains_key(&(r, a, b))
    }

    pub fn triples(&self) -> &[(RelationId, ObjectId, ObjectId)] {
        &self.triples
    }

    fn add_object(&mut self, label: String, ty: ConceptId) -> ObjectId {
        let id = ObjectId(self.labels.len() as u32);
        self.labels.push(label);
        self.types.push(ty);
        self.by_concept.entry(ty).or_default().push(id);
        id
    }

    fn add_triple(
        &mut self,
        r: RelationId,
        a: ObjectId,
        b: ObjectId,
        prov: Provenance,
    ) -> Option<usize> {
        if self.triple_index.contains_key(&(r, a, b)) {
            return None;
        }
        let idx = self.triples.len();
        self.triples.push((r, a, b));
        self.triple_provenance.push(prov);
        self.triple_index.insert((r, a, b), idx);
        Some(idx)
    }

    fn objects_of_exact(&self, c: ConceptId) -> &[ObjectId] {
        self.by_concept.get(&c).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Complete binding of a service's inputs to objects, in declaration order.
/// The binding vector doubles as the call digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchAssignment {
    pub binding: Vec<ObjectId>,
}

/// Per service/rule name: digests of the bindings already called.
#[derive(Debug, Default)]
pub struct CallHistory {
    digests: HashMap<String, HashSet<Vec<ObjectId>>>,
}

impl CallHistory {
    fn seen(&self, name: &str, binding: &[ObjectId]) -> bool {
        self.digests.get(name).is_some_and(|set| set.contains(binding))
    }

    fn record(&mut self, name: &str, binding: Vec<ObjectId>) {
        self.digests.entry(name.to_owned()).or_default().insert(binding);
    }

    pub fn calls_of(&self, name: &str) -> usize {
        self.digests.get(name).map_or(0, HashSet::len)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RelOptions {
    /// Skip user inference rules (internal property rules still run).
    pub ignore_rules: bool,
    /// Calls allowed per (service, input type multiset); curbs unbounded
    /// self-feeding chains.
    pub object_cap: usize,
    /// Check both orientations of every relation during matching, not just
    /// symmetric ones.
    pub match_both_orientations: bool,
}

impl Default for RelOptions {
    fn default() -> Self {
        Self { ignore_rules: false, object_cap: 4, match_both_orientations: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Init,
    Service(usize),
    UserRule(usize),
    InternalRule(usize),
}

#[derive(Debug, Clone)]
struct Event {
    kind: EventKind,
    binding: Vec<ObjectId>,
    produced_objects: Vec<ObjectId>,
    produced_triples: Vec<usize>,
    required_triples: Vec<usize>,
}

/// One step of an emitted relational composition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RelStep {
    Call { service: String, bindings: BTreeMap<String, String> },
    Rule { rule: String, bindings: BTreeMap<String, String> },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelComposition {
    pub steps: Vec<RelStep>,
}

impl RelComposition {
    pub fn service_calls(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, RelStep::Call { .. })).count()
    }

    pub fn rule_applications(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, RelStep::Rule { .. })).count()
    }

    /// Service call names in order, including the initial `init` call.
    pub fn call_names(&self) -> Vec<&str> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                RelStep::Call { service, .. } => Some(service.as_str()),
                RelStep::Rule { .. } => None,
            })
            .collect()
    }
}

enum CandidateSource {
    Typed(ConceptId),
    Pinned(ObjectId),
    Any,
}

/// Search state owning the knowledge and call history for one query.
pub struct RelSearch<'a> {
    ontology: &'a RelOntology,
    repository: &'a [RelService],
    query: &'a RelQuery,
    opts: RelOptions,
    pub knowledge: KnowledgeState,
    history: CallHistory,
    events: Vec<Event>,
    type_multiset_calls: HashMap<(usize, Vec<ConceptId>), usize>,
    seed_objects: Vec<ObjectId>,
}

impl<'a> RelSearch<'a> {
    /// Seeds the knowledge with the query's input objects and relations (the
    /// fictive input service call) and establishes property closure.
    pub fn new(
        ontology: &'a RelOntology,
        repository: &'a [RelService],
        query: &'a RelQuery,
        opts: RelOptions,
    ) -> Self {
        let mut search = Self {
            ontology,
            repository,
            query,
            opts,
            knowledge: KnowledgeState::default(),
            history: CallHistory::default(),
            events: Vec::new(),
            type_multiset_calls: HashMap::new(),
            seed_objects: Vec::new(),
        };
        let event_idx = 0usize;
        let mut produced_objects = Vec::new();
        for param in &query.inputs {
            let id = search.knowledge.add_object(param.name.clone(), param.concept);
            produced_objects.push(id);
        }
        search.seed_objects = produced_objects.clone();
        let mut produced_triples = Vec::new();
        for (r, a, b) in &query.relations {
            if let (ParamRef::In(i), ParamRef::In(j)) = (a, b) {
                if let Some(t) = search.knowledge.add_triple(
                    *r,
                    produced_objects[*i],
                    produced_objects[*j],
                    Provenance::Event(event_idx),
                ) {
                    produced_triples.push(t);
                }
            }
        }
        search.events.push(Event {
            kind: EventKind::Init,
            binding: Vec::new(),
            produced_objects,
            produced_triples,
            required_triples: Vec::new(),
        });
        search.close_properties();
        search
    }

    fn relation_holds(&self, r: RelationId, a: ObjectId, b: ObjectId) -> bool {
        if self.knowledge.has_triple(r, a, b) {
            return true;
        }
        // Symmetric relations are closed under orientation swap by the
        // internal rules, so the declared orientation suffices unless the
        // permissive switch is on.
        self.opts.match_both_orientations && self.knowledge.has_triple(r, b, a)
    }

    fn find_binding(
        &self,
        levels: &[CandidateSource],
        preconds: &[(RelationId, usize, usize)],
        reject: &dyn Fn(&[ObjectId]) -> bool,
    ) -> Option<Vec<ObjectId>> {
        fn dfs(
            search: &RelSearch,
            levels: &[CandidateSource],
            preconds: &[(RelationId, usize, usize)],
            reject: &dyn Fn(&[ObjectId]) -> bool,
            bound: &mut Vec<ObjectId>,
        ) -> bool {
            let level = bound.len();
            if level == levels.len() {
                return !reject(bound);
            }
            let try_candidate =
                |search: &RelSearch, bound: &mut Vec<ObjectId>, cand: ObjectId| -> bool {
                    let ok = preconds.iter().all(|&(r, i, j)| {
                        if i == level && j <= level {
                            let other = if j == level { cand } else { bound[j] };
                            search.relation_holds(r, cand, other)
                        } else if j == level && i < level {
                            search.relation_holds(r, bound[i], cand)
                        } else {
                            true
                        }
                    });
                    if !ok {
                        return false;
                    }
                    bound.push(cand);
                    if dfs(search, levels, preconds, reject, bound) {
                        return true;
                    }
                    bound.pop();
                    false
                };
            match &levels[level] {
                CandidateSource::Pinned(obj) => try_candidate(search, bound, *obj),
                CandidateSource::Typed(concept) => {
                    for &sub in search.ontology.subtypes_of(*concept) {
                        for &cand in search.knowledge.objects_of_exact(sub) {
                            if try_candidate(search, bound, cand) {
                                return true;
                            }
                        }
                    }
                    false
                }
                CandidateSource::Any => {
                    for i in 0..search.knowledge.object_count() {
                        if try_candidate(search, bound, ObjectId(i as u32)) {
                            return true;
                        }
                    }
                    false
                }
            }
        }

        let mut bound = Vec::with_capacity(levels.len());
        if dfs(self, levels, preconds, reject, &mut bound) {
            Some(bound)
        } else {
            None
        }
    }

    /// Backtracking search for an unseen, uncapped binding of the service's
    /// inputs. Depth-first over parameters in declared order; candidate
    /// objects must be subtype-compatible and satisfy every declared
    /// relation with already-bound parameters.
    pub fn find_match(&self, service_idx: usize) -> Option<MatchAssignment> {
        let svc = &self.repository[service_idx];
        let levels: Vec<CandidateSource> =
            svc.inputs.iter().map(|p| CandidateSource::Typed(p.concept)).collect();
        let preconds: Vec<_> = svc.preconditions().collect();
        let reject = |binding: &[ObjectId]| {
            if self.history.seen(&svc.name, binding) {
                return true;
            }
            let key = self.type_multiset_key(service_idx, binding);
            self.type_multiset_calls.get(&key).copied().unwrap_or(0) >= self.opts.object_cap
        };
        self.find_binding(&levels, &preconds, &reject).map(|binding| MatchAssignment { binding })
    }

    fn type_multiset_key(&self, service_idx: usize, binding: &[ObjectId]) -> (usize, Vec<ConceptId>) {
        let mut types: Vec<ConceptId> =
            binding.iter().map(|o| self.knowledge.object_type(*o)).collect();
        types.sort_unstable();
        (service_idx, types)
    }

    /// Calls the service with a matched binding: records the digest, creates
    /// one fresh object per output (id = service.param#ordinal), adds every
    /// non-precondition relation, and re-establishes property closure.
    pub fn call_service(&mut self, service_idx: usize, assignment: &MatchAssignment) {
        let ordinal = self.history.calls_of(&self.repository[service_idx].name);
        let svc = &self.repository[service_idx];
        self.history.record(&svc.name, assignment.binding.clone());
        let key = self.type_multiset_key(service_idx, &assignment.binding);
        *self.type_multiset_calls.entry(key).or_insert(0) += 1;

        let event_idx = self.events.len();
        let mut produced_objects = Vec::new();
        for param in &svc.outputs {
            let label = format!("{}.{}#{}", svc.name, param.name, ordinal);
            produced_objects.push(self.knowledge.add_object(label, param.concept));
        }
        let mut produced_triples = Vec::new();
        let mut required_triples = Vec::new();
        for (r, a, b) in &svc.relations {
            match (a, b) {
                (ParamRef::In(i), ParamRef::In(j)) => {
                    // precondition: resolve the triple the match relied on
                    let key = (*r, assignment.binding[*i], assignment.binding[*j]);
                    let idx = self.knowledge.triple_index.get(&key).copied().or_else(|| {
                        self.knowledge
                            .triple_index
                            .get(&(*r, assignment.binding[*j], assignment.binding[*i]))
                            .copied()
                    });
                    if let Some(idx) = idx {
                        required_triples.push(idx);
                    }
                }
                _ => {
                    let resolve = |p: &ParamRef| match p {
                        ParamRef::In(i) => assignment.binding[*i],
                        ParamRef::Out(i) => produced_objects[*i],
                    };
                    if let Some(t) = self.knowledge.add_triple(
                        *r,
                        resolve(a),
                        resolve(b),
                        Provenance::Event(event_idx),
                    ) {
                        produced_triples.push(t);
                    }
                }
            }
        }
        self.events.push(Event {
            kind: EventKind::Service(service_idx),
            binding: assignment.binding.clone(),
            produced_objects,
            produced_triples,
            required_triples,
        });
        self.close_properties();
    }

    fn apply_rule_set(&mut self, internal_only: bool) -> usize {
        let mut applications = 0;
        loop {
            let mut applied_this_round = false;
            let user_rules = if internal_only || self.opts.ignore_rules {
                &[][..]
            } else {
                &self.ontology.rules[..]
            };
            let rule_iter: Vec<(bool, usize)> = user_rules
                .iter()
                .enumerate()
                .map(|(i, _)| (false, i))
                .chain(self.ontology.internal_rules.iter().enumerate().map(|(i, _)| (true, i)))
                .collect();
            for (is_internal, rule_idx) in rule_iter {
                loop {
                    let rule = if is_internal {
                        &self.ontology.internal_rules[rule_idx]
                    } else {
                        &self.ontology.rules[rule_idx]
                    };
                    let levels: Vec<CandidateSource> =
                        rule.params.iter().map(|_| CandidateSource::Any).collect();
                    let name = rule.name.clone();
                    let reject =
                        |binding: &[ObjectId]| self.history.seen(&name, binding);
                    let Some(binding) = self.find_binding(&levels, &rule.preconditions, &reject)
                    else {
                        break;
                    };
                    self.apply_rule(is_internal, rule_idx, binding);
                    applications += 1;
                    applied_this_round = true;
                }
            }
            if !applied_this_round {
                break;
            }
        }
        applications
    }

    fn apply_rule(&mut self, is_internal: bool, rule_idx: usize, binding: Vec<ObjectId>) {
        let rule = if is_internal {
            &self.ontology.internal_rules[rule_idx]
        } else {
            &self.ontology.rules[rule_idx]
        };
        let event_idx = self.events.len();
        let mut required_triples = Vec::new();
        for &(r, i, j) in &rule.preconditions {
            if let Some(idx) = self.knowledge.triple_index.get(&(r, binding[i], binding[j])) {
                required_triples.push(*idx);
            }
        }
        let mut produced_triples = Vec::new();
        let effects: Vec<_> = rule.effects.clone();
        let name = rule.name.clone();
        for (r, i, j) in effects {
            if let Some(t) = self.knowledge.add_triple(
                r,
                binding[i],
                binding[j],
                Provenance::Event(event_idx),
            ) {
                produced_triples.push(t);
            }
        }
        self.history.record(&name, binding.clone());
        self.events.push(Event {
            kind: if is_internal {
                EventKind::InternalRule(rule_idx)
            } else {
                EventKind::UserRule(rule_idx)
            },
            binding,
            produced_objects: Vec::new(),
            produced_triples,
            required_triples,
        });
    }

    /// Applies user and internal rules until no rule has an unseen
    /// satisfying binding. Returns the number of applications.
    pub fn apply_inference_rules(&mut self) -> usize {
        self.apply_rule_set(false)
    }

    /// Re-establishes symmetry/transitivity closure via the internal rules.
    fn close_properties(&mut self) {
        self.apply_rule_set(true);
    }

    /// Matches the goal (the fictive output service): required objects with
    /// their relations, including relations pinned to the initially known
    /// objects. Does not mutate state.
    pub fn goal_match(&self) -> Option<Vec<ObjectId>> {
        // Pin every input parameter referenced by an in/out relation.
        let mut pinned: Vec<usize> = Vec::new();
        for (_, a, b) in &self.query.relations {
            for side in [a, b] {
                if let ParamRef::In(i) = side {
                    let crosses = matches!(a, ParamRef::Out(_)) || matches!(b, ParamRef::Out(_));
                    if crosses && !pinned.contains(i) {
                        pinned.push(*i);
                    }
                }
            }
        }
        let mut levels: Vec<CandidateSource> = Vec::new();
        let mut level_of_in: HashMap<usize, usize> = HashMap::new();
        for &i in &pinned {
            level_of_in.insert(i, levels.len());
            levels.push(CandidateSource::Pinned(self.seed_objects[i]));
        }
        let out_base = levels.len();
        for param in &self.query.outputs {
            levels.push(CandidateSource::Typed(param.concept));
        }
        let mut preconds = Vec::new();
        for (r, a, b) in &self.query.relations {
            let resolve = |p: &ParamRef| -> Option<usize> {
                match p {
                    ParamRef::In(i) => level_of_in.get(i).copied(),
                    ParamRef::Out(i) => Some(out_base + i),
                }
            };
            if matches!(a, ParamRef::Out(_)) || matches!(b, ParamRef::Out(_)) {
                if let (Some(i), Some(j)) = (resolve(a), resolve(b)) {
                    preconds.push((*r, i, j));
                }
            }
        }
        self.find_binding(&levels, &preconds, &|_| false)
            .map(|binding| binding[out_base..].to_vec())
    }

    /// Main loop: pass over the repository in declaration order calling
    /// every service with a fresh match, rules to fixpoint after each pass,
    /// until the goal matches or a full pass stays idle.
    pub fn run(&mut self) -> Option<RelComposition> {
        self.apply_inference_rules();
        let mut new_call = true;
        while new_call && self.goal_match().is_none() {
            new_call = false;
            for idx in 0..self.repository.len() {
                if let Some(assignment) = self.find_match(idx) {
                    self.call_service(idx, &assignment);
                    new_call = true;
                }
            }
            self.apply_inference_rules();
        }
        let goal_binding = self.goal_match()?;
        Some(self.emit(&goal_binding))
    }

    /// Drops events that contribute nothing the goal match depends on, then
    /// relabels objects canonically over the kept calls.
    fn emit(&self, goal_binding: &[ObjectId]) -> RelComposition {
        let mut needed_objects: BTreeSet<ObjectId> = goal_binding.iter().copied().collect();
        let mut needed_triples: BTreeSet<usize> = BTreeSet::new();
        for (r, a, b) in &self.query.relations {
            if !(matches!(a, ParamRef::Out(_)) || matches!(b, ParamRef::Out(_))) {
                continue;
            }
            let resolve = |p: &ParamRef| -> ObjectId {
                match p {
                    ParamRef::In(i) => self.seed_objects[*i],
                    ParamRef::Out(i) => goal_binding[*i],
                }
            };
            let key = (*r, resolve(a), resolve(b));
            if let Some(idx) = self.knowledge.triple_index.get(&key) {
                needed_triples.insert(*idx);
            } else if let Some(idx) =
                self.knowledge.triple_index.get(&(key.0, key.2, key.1))
            {
                needed_triples.insert(*idx);
            }
        }

        let mut kept = vec![false; self.events.len()];
        for (idx, event) in self.events.iter().enumerate().rev() {
            let contributes = matches!(event.kind, EventKind::Init)
                || event.produced_objects.iter().any(|o| needed_objects.contains(o))
                || event.produced_triples.iter().any(|t| needed_triples.contains(t));
            if !contributes {
                continue;
            }
            kept[idx] = true;
            needed_objects.extend(event.binding.iter().copied());
            for &t in &event.required_triples {
                needed_triples.insert(t);
                let (_, a, b) = self.knowledge.triples[t];
                needed_objects.insert(a);
                needed_objects.insert(b);
            }
        }

        // Canonical labels: init objects keep their query parameter names,
        // service outputs are numbered over kept calls only.
        let mut labels: HashMap<ObjectId, String> = HashMap::new();
        let mut call_ordinal: HashMap<usize, usize> = HashMap::new();
        let mut steps = Vec::new();
        for (idx, event) in self.events.iter().enumerate() {
            if !kept[idx] {
                continue;
            }
            match event.kind {
                EventKind::Init => {
                    for (param, &obj) in self.query.inputs.iter().zip(&event.produced_objects) {
                        labels.insert(obj, param.name.clone());
                    }
                    steps.push(RelStep::Call {
                        service: "init".into(),
                        bindings: BTreeMap::new(),
                    });
                }
                EventKind::Service(svc_idx) => {
                    let svc = &self.repository[svc_idx];
                    let ordinal = call_ordinal.entry(svc_idx).or_insert(0);
                    for (param, &obj) in svc.outputs.iter().zip(&event.produced_objects) {
                        labels.insert(obj, format!("{}.{}#{}", svc.name, param.name, ordinal));
                    }
                    *ordinal += 1;
                    let bindings = svc
                        .inputs
                        .iter()
                        .zip(&event.binding)
                        .map(|(p, o)| (p.name.clone(), labels[o].clone()))
                        .collect();
                    steps.push(RelStep::Call { service: svc.name.clone(), bindings });
                }
                EventKind::UserRule(rule_idx) => {
                    let rule = &self.ontology.rules[rule_idx];
                    let bindings = rule
                        .params
                        .iter()
                        .zip(&event.binding)
                        .map(|(p, o)| (p.clone(), labels[o].clone()))
                        .collect();
                    steps.push(RelStep::Rule { rule: rule.name.clone(), bindings });
                }
                EventKind::InternalRule(_) => {} // closure detail, not emitted
            }
        }
        RelComposition { steps }
    }
}

/// Searches for a composition answering `query` over `repository`.
pub fn search_composition_relational(
    ontology: &RelOntology,
    repository: &[RelService],
    query: &RelQuery,
    opts: RelOptions,
) -> Option<RelComposition> {
    RelSearch::new(ontology, repository, query, opts).run()
}

/// Replays an emitted composition step by step, checking binding types and
/// preconditions against the growing knowledge, and finally that the goal
/// matches. Object labels are regenerated canonically, so a composition is
/// only accepted when its recorded bindings resolve.
pub fn validate_relational(
    ontology: &RelOntology,
    repository: &[RelService],
    query: &RelQuery,
    comp: &RelComposition,
) -> Result<bool> {
    let mut search = RelSearch::new(ontology, repository, query, RelOptions::default());
    let mut labels: HashMap<String, ObjectId> = HashMap::new();
    for (param, &obj) in query.inputs.iter().zip(&search.seed_objects) {
        labels.insert(param.name.clone(), obj);
    }

    for (pos, step) in comp.steps.iter().enumerate() {
        match step {
            RelStep::Call { service, bindings } => {
                if service == "init" {
                    if pos != 0 {
                        return Err(Error::InvalidComposition(
                            "`init` must be the first call".into(),
                        ));
                    }
                    continue;
                }
                let Some(svc_idx) = search.repository.iter().position(|s| &s.name == service)
                else {
                    return Err(Error::UnknownService(service.clone()));
                };
                let svc = &search.repository[svc_idx];
                let mut binding = Vec::with_capacity(svc.inputs.len());
                for param in &svc.inputs {
                    let Some(label) = bindings.get(&param.name) else {
                        return Ok(false); // incomplete binding
                    };
                    let Some(&obj) = labels.get(label) else {
                        return Ok(false); // refers to an object never created
                    };
                    if !ontology
                        .is_subtype_or_self(search.knowledge.object_type(obj), param.concept)
                    {
                        return Ok(false);
                    }
                    binding.push(obj);
                }
                for (r, i, j) in svc.preconditions() {
                    if !search.relation_holds(r, binding[i], binding[j]) {
                        return Ok(false);
                    }
                }
                let ordinal = search.history.calls_of(&svc.name);
                let out_labels: Vec<String> = svc
                    .outputs
                    .iter()
                    .map(|p| format!("{}.{}#{}", svc.name, p.name, ordinal))
                    .collect();
                search.call_service(svc_idx, &MatchAssignment { binding });
                let produced = search.events.last().unwrap().produced_objects.clone();
                for (label, obj) in out_labels.into_iter().zip(produced) {
                    labels.insert(label, obj);
                }
            }
            RelStep::Rule { rule, bindings } => {
                let Some(rule_idx) =
                    search.ontology.rules.iter().position(|r| &r.name == rule)
                else {
                    return Err(Error::InvalidInstance(format!("unknown rule `{rule}`")));
                };
                let rule_def = &search.ontology.rules[rule_idx];
                let mut binding = Vec::with_capacity(rule_def.params.len());
                for var in &rule_def.params {
                    let Some(label) = bindings.get(var) else {
                        return Ok(false);
                    };
                    let Some(&obj) = labels.get(label) else {
                        return Ok(false);
                    };
                    binding.push(obj);
                }
                let holds = rule_def
                    .preconditions
                    .iter()
                    .all(|&(r, i, j)| search.relation_holds(r, binding[i], binding[j]));
                if !holds {
                    return Ok(false);
                }
                search.apply_rule(false, rule_idx, binding);
                search.close_properties();
            }
        }
    }
    Ok(search.goal_match().is_some())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_forest(concepts: &[&str]) -> ConceptForest {
        let mut f = ConceptForest::new();
        for c in concepts {
            f.add_concept(c, None).unwrap();
        }
        f
    }

    fn rel(name: &str, symmetric: bool, transitive: bool) -> RelationDecl {
        RelationDecl { name: name.into(), symmetric, transitive }
    }

    fn pair(a: &str, b: &str) -> (String, String) {
        (a.into(), b.into())
    }

    fn triple(a: &str, b: &str, c: &str) -> (String, String, String) {
        (a.into(), b.into(), c.into())
    }

    /// The foreign-university-visit instance.
    fn university() -> (RelOntology, Vec<RelService>, RelQuery) {
        let forest = flat_forest(&["Person", "University", "City", "Ticket"]);
        let ontology = RelOntology::new(
            forest,
            vec![
                rel("isEmployeeOf", false, false),
                rel("hasDestination", false, false),
                rel("isLocatedIn", false, false),
            ],
            vec![
                RuleSpec {
                    name: "locatedAtWorkRule".into(),
                    params: vec!["X".into(), "Y".into(), "Z".into()],
                    pre: vec![
                        triple("isEmployeeOf", "X", "Y"),
                        triple("isLocatedIn", "Y", "Z"),
                    ],
                    eff: vec![triple("isLocatedIn", "X", "Z")],
                },
                RuleSpec {
                    name: "destinationGenRule".into(),
                    params: vec!["X".into(), "Y".into(), "Z".into()],
                    pre: vec![
                        triple("hasDestination", "X", "Y"),
                        triple("isLocatedIn", "Y", "Z"),
                    ],
                    eff: vec![triple("hasDestination", "X", "Z")],
                },
            ],
        )
        .unwrap();
        let services = vec![
            ontology
                .resolve_service(
                    "getUniversityLocation",
                    &[pair("univ", "University")],
                    &[pair("city", "City")],
                    &[triple("isLocatedIn", "univ", "city")],
                )
                .unwrap(),
            ontology
                .resolve_service(
                    "getAirplaneTicket",
                    &[
                        pair("pers", "Person"),
                        pair("source", "City"),
                        pair("dest", "City"),
                    ],
                    &[pair("airplaneTicket", "Ticket")],
                    &[
                        triple("isLocatedIn", "pers", "source"),
                        triple("hasDestination", "pers", "dest"),
                    ],
                )
                .unwrap(),
        ];
        let query = ontology
            .resolve_query(
                &[
                    pair("pers", "Person"),
                    pair("homeUniv", "University"),
                    pair("foreignUniv", "University"),
                ],
                &[pair("wanted", "Ticket")],
                &[
                    triple("isEmployeeOf", "pers", "homeUniv"),
                    triple("hasDestination", "pers", "foreignUniv"),
                ],
            )
            .unwrap();
        (ontology, services, query)
    }

    #[test]
    fn university_visit_composition() {
        let (ontology, services, query) = university();
        let comp =
            search_composition_relational(&ontology, &services, &query, RelOptions::default())
                .unwrap();
        assert_eq!(comp.service_calls(), 4, "{comp:?}"); // init + 2x location + ticket
        assert_eq!(comp.rule_applications(), 2);
        let gul_bindings: Vec<_> = comp
            .steps
            .iter()
            .filter_map(|s| match s {
                RelStep::Call { service, bindings } if service == "getUniversityLocation" => {
                    Some(bindings["univ"].clone())
                }
                _ => None,
            })
            .collect();
        assert_eq!(gul_bindings.len(), 2);
        assert_ne!(gul_bindings[0], gul_bindings[1]);
    }

    #[test]
    fn airplane_ticket_match_binds_cities_by_relations() {
        let (ontology, services, query) = university();
        let mut search = RelSearch::new(&ontology, &services, &query, RelOptions::default());
        // pass 1: locate home university, rules put the person in homeCity
        let m = search.find_match(0).unwrap();
        search.call_service(0, &m);
        search.apply_inference_rules();
        // pass 2: locate the foreign university, rules derive the destination
        let m = search.find_match(0).unwrap();
        search.call_service(0, &m);
        search.apply_inference_rules();
        let m = search.find_match(1).expect("ticket service should match");
        let labels: Vec<_> =
            m.binding.iter().map(|o| search.knowledge.object_label(*o).to_owned()).collect();
        assert_eq!(labels[0], "pers");
        assert_eq!(labels[1], "getUniversityLocation.city#0"); // source = home city
        assert_eq!(labels[2], "getUniversityLocation.city#1"); // dest = foreign city
    }

    #[test]
    fn validator_accepts_engine_output_and_rejects_tampering() {
        let (ontology, services, query) = university();
        let comp =
            search_composition_relational(&ontology, &services, &query, RelOptions::default())
                .unwrap();
        assert!(validate_relational(&ontology, &services, &query, &comp).unwrap());

        // dropping the rule applications breaks the ticket preconditions
        let mut no_rules = comp.clone();
        no_rules.steps.retain(|s| matches!(s, RelStep::Call { .. }));
        assert!(!validate_relational(&ontology, &services, &query, &no_rules).unwrap());

        // rebinding both location calls to the same university breaks the
        // destination precondition
        let mut same_univ = comp.clone();
        for step in &mut same_univ.steps {
            if let RelStep::Call { service, bindings } = step {
                if service == "getUniversityLocation" {
                    bindings.insert("univ".into(), "homeUniv".into());
                }
            }
        }
        assert!(!validate_relational(&ontology, &services, &query, &same_univ).unwrap());
    }

    #[test]
    fn zero_input_service_matches_once() {
        let forest = flat_forest(&["T"]);
        let ontology = RelOntology::new(forest, vec![], vec![]).unwrap();
        let services = vec![ontology
            .resolve_service("mk", &[], &[pair("t", "T")], &[])
            .unwrap()];
        let query = ontology.resolve_query(&[], &[pair("want", "T")], &[]).unwrap();
        let mut search = RelSearch::new(&ontology, &services, &query, RelOptions::default());
        let m = search.find_match(0).expect("empty binding available once");
        assert!(m.binding.is_empty());
        search.call_service(0, &m);
        assert!(search.find_match(0).is_none(), "digest recorded after the call");
    }

    #[test]
    fn distinct_binding_count_matches_enumeration() {
        // Two cities, a symmetric link; a service wanting two linked cities.
        let forest = flat_forest(&["City"]);
        let ontology =
            RelOntology::new(forest, vec![rel("linked", true, false)], vec![]).unwrap();
        let services = vec![ontology
            .resolve_service(
                "travel",
                &[pair("from", "City"), pair("to", "City")],
                &[],
                &[triple("linked", "from", "to")],
            )
            .unwrap()];
        let query = ontology
            .resolve_query(
                &[pair("a", "City"), pair("b", "City")],
                &[],
                &[triple("linked", "a", "b")],
            )
            .unwrap();
        let mut search =
            RelSearch::new(&ontology, &services, &query, RelOptions { object_cap: 100, ..Default::default() });

        // Brute-force enumeration over all type-valid pairs, filtered by the
        // relation in its declared orientation after closure.
        let objects: Vec<ObjectId> =
            (0..search.knowledge.object_count() as u32).map(ObjectId).collect();
        let linked = ontology.relation("linked").unwrap();
        let mut expected = 0;
        for &x in &objects {
            for &y in &objects {
                if search.knowledge.has_triple(linked, x, y) {
                    expected += 1;
                }
            }
        }

        let mut found = 0;
        while let Some(m) = search.find_match(0) {
            search.history.record("travel", m.binding.clone());
            found += 1;
        }
        assert_eq!(found, expected);
        assert_eq!(found, 2); // (a,b) and (b,a) via symmetry
    }

    #[test]
    fn call_service_creates_fresh_objects_per_call() {
        let (ontology, services, query) = university();
        let mut search = RelSearch::new(&ontology, &services, &query, RelOptions::default());
        let m1 = search.find_match(0).unwrap();
        search.call_service(0, &m1);
        let m2 = search.find_match(0).unwrap();
        assert_ne!(m1.binding, m2.binding);
        search.call_service(0, &m2);
        let labels: Vec<_> = (0..search.knowledge.object_count() as u32)
            .map(|i| search.knowledge.object_label(ObjectId(i)).to_owned())
            .collect();
        assert!(labels.contains(&"getUniversityLocation.city#0".to_owned()));
        assert!(labels.contains(&"getUniversityLocation.city#1".to_owned()));
    }

    #[test]
    fn service_without_relations_adds_only_objects() {
        let forest = flat_forest(&["A", "B"]);
        let ontology = RelOntology::new(forest, vec![], vec![]).unwrap();
        let services = vec![ontology
            .resolve_service("mk", &[pair("a", "A")], &[pair("b", "B")], &[])
            .unwrap()];
        let query = ontology.resolve_query(&[pair("a0", "A")], &[pair("b0", "B")], &[]).unwrap();
        let mut search = RelSearch::new(&ontology, &services, &query, RelOptions::default());
        let triples_before = search.knowledge.triple_count();
        let m = search.find_match(0).unwrap();
        search.call_service(0, &m);
        assert_eq!(search.knowledge.triple_count(), triples_before);
        assert_eq!(search.knowledge.object_count(), 2);
    }

    #[test]
    fn rules_reach_fixpoint_and_transitive_chain_closes() {
        let forest = flat_forest(&["T"]);
        let ontology =
            RelOntology::new(forest, vec![rel("greater", false, true)], vec![]).unwrap();
        let query = ontology
            .resolve_query(
                &[pair("o1", "T"), pair("o2", "T"), pair("o3", "T")],
                &[],
                &[triple("greater", "o1", "o2"), triple("greater", "o2", "o3")],
            )
            .unwrap();
        let search = RelSearch::new(&ontology, &[], &query, RelOptions::default());
        let greater = ontology.relation("greater").unwrap();
        assert!(search.knowledge.has_triple(greater, ObjectId(0), ObjectId(2)));
        // Fixpoint: exhaustive enumeration finds no unseen satisfying binding.
        let n = search.knowledge.object_count() as u32;
        for rule in &ontology.internal_rules {
            for x in 0..n {
                for y in 0..n {
                    for z in 0..n {
                        let binding = [ObjectId(x), ObjectId(y), ObjectId(z)];
                        let b = &binding[..rule.params.len()];
                        let holds = rule.preconditions.iter().all(|&(r, i, j)| {
                            search.knowledge.has_triple(r, b[i], b[j])
                        });
                        if holds {
                            assert!(
                                search.history.seen(&rule.name, b)
                                    || rule.effects.iter().all(|&(r, i, j)| {
                                        search.knowledge.has_triple(r, b[i], b[j])
                                    }),
                                "unseen satisfiable binding left for {}",
                                rule.name
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn no_rules_leaves_knowledge_unchanged() {
        let forest = flat_forest(&["T"]);
        let ontology = RelOntology::new(forest, vec![rel("r", false, false)], vec![]).unwrap();
        let query = ontology
            .resolve_query(&[pair("a", "T"), pair("b", "T")], &[], &[triple("r", "a", "b")])
            .unwrap();
        let mut search = RelSearch::new(&ontology, &[], &query, RelOptions::default());
        let (objs, trips) = (search.knowledge.object_count(), search.knowledge.triple_count());
        assert_eq!(search.apply_inference_rules(), 0);
        assert_eq!(search.knowledge.object_count(), objs);
        assert_eq!(search.knowledge.triple_count(), trips);
    }

    #[test]
    fn goal_satisfied_by_inputs_yields_init_only() {
        let forest = flat_forest(&["T"]);
        let ontology = RelOntology::new(forest, vec![rel("r", false, false)], vec![]).unwrap();
        let query = ontology
            .resolve_query(
                &[pair("a", "T"), pair("b", "T")],
                &[pair("want", "T")],
                &[triple("r", "a", "b"), triple("r", "a", "want")],
            )
            .unwrap();
        let comp =
            search_composition_relational(&ontology, &[], &query, RelOptions::default()).unwrap();
        assert_eq!(comp.service_calls(), 1); // just the init call
        assert_eq!(comp.rule_applications(), 0);
        // the goal object must be b: r(a, b) holds, r(a, a) does not
        assert!(matches!(&comp.steps[0], RelStep::Call { service, .. } if service == "init"));
    }

    #[test]
    fn object_cap_stops_self_feeding_services() {
        let forest = flat_forest(&["Number"]);
        let ontology = RelOntology::new(forest, vec![], vec![]).unwrap();
        let services = vec![ontology
            .resolve_service("square", &[pair("x", "Number")], &[pair("x2", "Number")], &[])
            .unwrap()];
        let query = ontology
            .resolve_query(&[pair("n", "Number")], &[], &[])
            .unwrap();
        // With an empty goal the query is satisfied immediately; drive the
        // loop manually to observe the cap.
        let opts = RelOptions { object_cap: 3, ..Default::default() };
        let mut search = RelSearch::new(&ontology, &services, &query, opts);
        let mut calls = 0;
        while let Some(m) = search.find_match(0) {
            search.call_service(0, &m);
            calls += 1;
            assert!(calls < 50, "cap failed to stop the feed");
        }
        assert_eq!(calls, 3);
    }

    #[test]
    fn subtype_objects_match_supertype_parameters() {
        let mut forest = ConceptForest::new();
        forest.add_concept("Area", None).unwrap();
        forest.add_concept("Country", Some("Area")).unwrap();
        forest.add_concept("Report", None).unwrap();
        let ontology = RelOntology::new(forest, vec![], vec![]).unwrap();
        let services = vec![ontology
            .resolve_service("describe", &[pair("a", "Area")], &[pair("out", "Report")], &[])
            .unwrap()];
        let query = ontology
            .resolve_query(&[pair("c", "Country")], &[pair("want", "Report")], &[])
            .unwrap();
        let comp =
            search_composition_relational(&ontology, &services, &query, RelOptions::default())
                .unwrap();
        // the Country seed binds describe's Area parameter
        assert_eq!(comp.service_calls(), 2);
    }

    #[test]
    fn flat_relationless_instance_matches_name_model_solvability() {
        use crate::intern::ParamRegistry;
        use crate::model::{Repository, Request, Service};
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let nparams = rng.gen_range(3..7usize);
            let concepts: Vec<String> = (0..nparams).map(|i| format!("c{i}")).collect();
            let forest = flat_forest(&concepts.iter().map(String::as_str).collect::<Vec<_>>());
            let ontology = RelOntology::new(forest, vec![], vec![]).unwrap();

            let nsvc = rng.gen_range(1..6usize);
            let mut rel_services = Vec::new();
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
                let in_pairs: Vec<(String, String)> = ins
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| (format!("in{k}"), format!("c{i}")))
                    .collect();
                let out_pairs: Vec<(String, String)> = outs
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| (format!("out{k}"), format!("c{i}")))
                    .collect();
                rel_services.push(
                    ontology
                        .resolve_service(&format!("s{s}"), &in_pairs, &out_pairs, &[])
                        .unwrap(),
                );
                raw.push((format!("s{s}"), ins, outs));
            }
            let init: Vec<usize> = (0..nparams).collect::<Vec<_>>()
                .choose_multiple(&mut rng, 1).copied().collect();
            let goal: Vec<usize> = (0..nparams).collect::<Vec<_>>()
                .choose_multiple(&mut rng, 2).copied().collect();
            let known: Vec<(String, String)> = init
                .iter()
                .enumerate()
                .map(|(k, &i)| (format!("k{k}"), format!("c{i}")))
                .collect();
            let required: Vec<(String, String)> = goal
                .iter()
                .enumerate()
                .map(|(k, &i)| (format!("g{k}"), format!("c{i}")))
                .collect();
            let query = ontology.resolve_query(&known, &required, &[]).unwrap();
            let rel_result = search_composition_relational(
                &ontology,
                &rel_services,
                &query,
                RelOptions::default(),
            );

            // project: concepts become plain parameter names
            let reg = ParamRegistry::new();
            let id = |i: usize| reg.intern(&format!("c{i}")).unwrap();
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
            assert_eq!(
                rel_result.is_some(),
                name_result.is_some(),
                "projection disagrees"
            );
        }
    }

    #[test]
    fn property_closure_equals_algebraic_closure() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let n = rng.gen_range(2..6usize);
            let symmetric = rng.gen_bool(0.5);
            let transitive = rng.gen_bool(0.5);
            let forest = flat_forest(&["T"]);
            let ontology =
                RelOntology::new(forest, vec![rel("r", symmetric, transitive)], vec![]).unwrap();
            let inputs: Vec<(String, String)> =
                (0..n).map(|i| (format!("o{i}"), "T".to_string())).collect();
            let mut facts = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.gen_bool(0.3) {
                        facts.push(triple("r", &format!("o{i}"), &format!("o{j}")));
                    }
                }
            }
            let query = ontology.resolve_query(&inputs, &[], &facts).unwrap();
            let search = RelSearch::new(&ontology, &[], &query, RelOptions::default());

            // Algebraic closure oracle over the seed pairs.
            let mut closed: HashSet<(u32, u32)> = facts
                .iter()
                .map(|(_, a, b)| {
                    (
                        a.trim_start_matches('o').parse().unwrap(),
                        b.trim_start_matches('o').parse().unwrap(),
                    )
                })
                .collect();
            loop {
                let mut added = Vec::new();
                if symmetric {
                    for &(a, b) in &closed {
                        if !closed.contains(&(b, a)) {
                            added.push((b, a));
                        }
                    }
                }
                if transitive {
                    for &(a, b) in &closed {
                        for &(c, d) in &closed {
                            if b == c && !closed.contains(&(a, d)) {
                                added.push((a, d));
                            }
                        }
                    }
                }
                if added.is_empty() {
                    break;
                }
                closed.extend(added);
            }

            let r = ontology.relation("r").unwrap();
            for a in 0..n as u32 {
                for b in 0..n as u32 {
                    assert_eq!(
                        search.knowledge.has_triple(r, ObjectId(a), ObjectId(b)),
                        closed.contains(&(a, b)),
                        "n={n} sym={symmetric} trans={transitive} pair=({a},{b})"
                    );
                }
            }
        }
    }
}
