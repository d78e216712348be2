//! Concept forests, instances and O(1) subsumption queries.
//!
//! `subTypeOf` is stored as a parent pointer only; transitivity is realized
//! through an Euler-tour index assigning each concept an entry/exit
//! timestamp, so one interval check answers any ancestor query.

use std::collections::HashMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConceptId(pub u32);

impl ConceptId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceId(pub u32);

impl InstanceId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A forest of concepts connected by `subTypeOf` parent links. Multiple
/// roots are allowed.
#[derive(Debug, Default)]
pub struct ConceptForest {
    names: Vec<String>,
    parent: Vec<Option<ConceptId>>,
    children: Vec<Vec<ConceptId>>,
    by_name: HashMap<String, ConceptId>,
}

impl ConceptForest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a concept under `parent` (`None` for a root). Parents must be
    /// declared before their children.
    pub fn add_concept(&mut self, name: &str, parent: Option<&str>) -> Result<ConceptId> {
        if self.by_name.contains_key(name) {
            return Err(Error::DuplicateConcept(name.to_owned()));
        }
        let parent_id = match parent {
            Some(p) => {
                Some(self.id(p).map_err(|_| Error::UnknownConcept(p.to_owned()))?)
            }
            None => None,
        };
        let id = ConceptId(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.parent.push(parent_id);
        self.children.push(Vec::new());
        if let Some(p) = parent_id {
            self.children[p.index()].push(id);
        }
        self.by_name.insert(name.to_owned(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<ConceptId> {
        self.by_name.get(name).copied().ok_or_else(|| Error::UnknownConcept(name.to_owned()))
    }

    pub fn name(&self, id: ConceptId) -> &str {
        &self.names[id.index()]
    }

    pub fn parent(&self, id: ConceptId) -> Option<ConceptId> {
        self.parent[id.index()]
    }

    pub fn children(&self, id: ConceptId) -> &[ConceptId] {
        &self.children[id.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Concept ids in declaration order.
    pub fn ids(&self) -> impl Iterator<Item = ConceptId> + '_ {
        (0..self.names.len() as u32).map(ConceptId)
    }

    /// Walks ancestors starting at `id` itself.
    pub fn ancestors_or_self(&self, id: ConceptId) -> AncestorIter<'_> {
        AncestorIter { forest: self, cursor: Some(id) }
    }
}

pub struct AncestorIter<'a> {
    forest: &'a ConceptForest,
    cursor: Option<ConceptId>,
}

impl Iterator for AncestorIter<'_> {
    type Item = ConceptId;

    fn next(&mut self) -> Option<ConceptId> {
        let current = self.cursor?;
        self.cursor = self.forest.parent(current);
        Some(current)
    }
}

/// Entry/exit timestamps from a depth-first traversal of the forest, roots
/// in declaration order sharing one counter. Node `b` is a descendant of
/// node `a` iff `entry[a] <= entry[b] < exit[a]`.
#[derive(Debug, Clone)]
pub struct EulerIndex {
    entry: Vec<u32>,
    exit: Vec<u32>,
}

/// Depth-first numbering of the forest; detects cycles (nodes unreachable
/// from any root) and reports them as errors.
pub fn build_euler_index(forest: &ConceptForest) -> Result<EulerIndex> {
    let n = forest.len();
    let mut entry = vec![0u32; n];
    let mut exit = vec![0u32; n];
    let mut visited = vec![false; n];
    let mut time = 0u32;

    enum Step {
        Enter(ConceptId),
        Leave(ConceptId),
    }

    for root in forest.ids().filter(|c| forest.parent(*c).is_none()) {
        let mut stack = vec![Step::Enter(root)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Enter(c) => {
                    visited[c.index()] = true;
                    time += 1;
                    entry[c.index()] = time;
                    stack.push(Step::Leave(c));
                    for &child in forest.children(c).iter().rev() {
                        stack.push(Step::Enter(child));
                    }
                }
                Step::Leave(c) => {
                    time += 1;
                    exit[c.index()] = time;
                }
            }
        }
    }

    if let Some(orphan) = (0..n).find(|&i| !visited[i]) {
        return Err(Error::HierarchyCycle(forest.name(ConceptId(orphan as u32)).to_owned()));
    }
    Ok(EulerIndex { entry, exit })
}

impl EulerIndex {
    pub fn entry(&self, c: ConceptId) -> u32 {
        self.entry[c.index()]
    }

    pub fn exit(&self, c: ConceptId) -> u32 {
        self.exit[c.index()]
    }

    /// True when `a` is `b` or a descendant of `b` (`a` subTypeOf `b`).
    pub fn is_subtype_or_self(&self, a: ConceptId, b: ConceptId) -> bool {
        self.entry[b.index()] <= self.entry[a.index()]
            && self.entry[a.index()] < self.exit[b.index()]
    }
}

/// Hierarchical-model taxonomy: a concept forest plus declared instances,
/// each attached to its most specific concept. Immutable after build; safe
/// for concurrent queries.
#[derive(Debug)]
pub struct Taxonomy {
    pub forest: ConceptForest,
    euler: EulerIndex,
    instance_names: Vec<String>,
    instance_concept: Vec<ConceptId>,
    instances_by_name: HashMap<String, InstanceId>,
    instances_of_concept: Vec<Vec<InstanceId>>,
}

impl Taxonomy {
    pub fn new(forest: ConceptForest, instances: &[(String, String)]) -> Result<Self> {
        let euler = build_euler_index(&forest)?;
        let mut instance_names = Vec::with_capacity(instances.len());
        let mut instance_concept = Vec::with_capacity(instances.len());
        let mut instances_by_name = HashMap::new();
        let mut instances_of_concept = vec![Vec::new(); forest.len()];
        for (name, concept) in instances {
            let cid = forest.id(concept)?;
            let iid = InstanceId(instance_names.len() as u32);
            if instances_by_name.insert(name.clone(), iid).is_some() {
                return Err(Error::InvalidInstance(format!("duplicate instance `{name}`")));
            }
            instance_names.push(name.clone());
            instance_concept.push(cid);
            instances_of_concept[cid.index()].push(iid);
        }
        Ok(Self {
            forest,
            euler,
            instance_names,
            instance_concept,
            instances_by_name,
            instances_of_concept,
        })
    }

    pub fn euler(&self) -> &EulerIndex {
        &self.euler
    }

    pub fn instance(&self, name: &str) -> Result<InstanceId> {
        self.instances_by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownInstance(name.to_owned()))
    }

    pub fn instance_name(&self, id: InstanceId) -> &str {
        &self.instance_names[id.index()]
    }

    pub fn instance_count(&self) -> usize {
        self.instance_names.len()
    }

    /// The concept an instance belongs to.
    pub fn parent_concept(&self, id: InstanceId) -> ConceptId {
        self.instance_concept[id.index()]
    }

    pub fn instances_of(&self, c: ConceptId) -> &[InstanceId] {
        &self.instances_of_concept[c.index()]
    }

    /// `i1` subsumes `i2` when they are equal or `parent(i1)` subTypeOf
    /// `parent(i2)`; a more specific instance can stand in for a generic one.
    pub fn subsumes(&self, i1: InstanceId, i2: InstanceId) -> bool {
        i1 == i2
            || self
                .euler
                .is_subtype_or_self(self.parent_concept(i1), self.parent_concept(i2))
    }

    /// True when every instance of `covered` is subsumed by some instance of
    /// `covering`.
    pub fn subsumes_set(&self, covering: &[InstanceId], covered: &[InstanceId]) -> bool {
        covered.iter().all(|i2| covering.iter().any(|i1| self.subsumes(*i1, *i2)))
    }
}
