//! Online composition over the name model: a dynamic repository, maintained
//! query solutions, per-service precomputed backups and failover on
//! deletion.
//!
//! Every query keeps one active solution; for each service of its main list
//! a backup composition is precomputed so a deletion swaps instantly instead
//! of searching. A backup either replaces the one service (the prefix keeps
//! the suffix callable) or regenerates the whole suffix from the prefix's
//! outputs. All mutating operations are serialized on one [`OnlineState`];
//! deferred backup mode queues the precomputation so a deletion arriving
//! first falls back to re-solving.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::intern::{ParamRegistry, ParameterId};

#[derive(Debug, Clone)]
pub struct OnlineService {
    pub name: String,
    pub inputs: BTreeSet<ParameterId>,
    pub outputs: BTreeSet<ParameterId>,
}

#[derive(Debug, Clone)]
pub struct OnlineQuery {
    pub id: String,
    pub init: BTreeSet<ParameterId>,
    pub goal: BTreeSet<ParameterId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SolutionId(pub usize);

/// Which query form produced a backup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BackupKind {
    /// Replaces the failed service, keeping the old suffix callable.
    Replacement,
    /// Regenerates everything after the prefix (the suffix query).
    Suffix,
}

/// A maintained composition. `backup` maps every service of `main` to its
/// precomputed alternative, when one exists; `parent` is set when this
/// solution is itself a backup.
#[derive(Debug, Clone)]
pub struct Solution {
    pub query_id: String,
    pub main: Vec<String>,
    pub backup: BTreeMap<String, Option<SolutionId>>,
    pub backup_kind: BTreeMap<String, BackupKind>,
    pub parent: Option<SolutionId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    Solved,
    Unsolvable,
    SwappedToBackup,
    ResolvedFromScratch,
    RequestLost,
    /// Internal bookkeeping: a backup containing the deleted service was
    /// recomputed; the active composition did not change.
    BackupRecomputed,
}

/// One observable outcome of an operation.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub kind: OutcomeKind,
    pub query_id: String,
    pub calls: Vec<String>,
    /// Composition searches consumed to produce the new active main; zero
    /// when a precomputed backup was swapped in.
    pub swap_searches: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct OnlineOptions {
    /// Compute backups inline when a query is solved (deterministic
    /// default). When false they queue until [`OnlineState::process_pending_backups`].
    pub synchronous_backups: bool,
    /// Re-solve already-solved queries when a service registers, adopting
    /// strictly shorter compositions.
    pub reoptimize_on_register: bool,
}

impl Default for OnlineOptions {
    fn default() -> Self {
        Self { synchronous_backups: true, reoptimize_on_register: false }
    }
}

#[derive(Debug, Default)]
pub struct OnlineState {
    registry: ParamRegistry,
    services: Vec<OnlineService>,
    service_index: HashMap<String, usize>,
    input_for: HashMap<ParameterId, BTreeSet<String>>,
    queries: Vec<OnlineQuery>,
    query_index: HashMap<String, usize>,
    /// Active solution per query; `None` when currently unsolvable.
    active: HashMap<String, Option<SolutionId>>,
    arena: Vec<Option<Solution>>,
    usages: HashMap<String, BTreeSet<SolutionId>>,
    pending_backups: VecDeque<SolutionId>,
    search_count: usize,
    opts: OnlineOptions,
}

impl OnlineState {
    pub fn new(opts: OnlineOptions) -> Self {
        Self { opts, ..Default::default() }
    }

    pub fn registry(&self) -> &ParamRegistry {
        &self.registry
    }

    pub fn search_count(&self) -> usize {
        self.search_count
    }

    pub fn repository_len(&self) -> usize {
        self.services.len()
    }

    pub fn solution(&self, id: SolutionId) -> Option<&Solution> {
        self.arena.get(id.0).and_then(Option::as_ref)
    }

    pub fn active_solution(&self, query_id: &str) -> Option<&Solution> {
        self.active.get(query_id).and_then(|s| s.and_then(|id| self.solution(id)))
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.iter().map(|q| q.id.as_str())
    }

    fn intern_all(&self, names: &[String]) -> Result<BTreeSet<ParameterId>> {
        names.iter().map(|n| self.registry.intern(n)).collect()
    }

    /// Registers a service and retries every unsolved query; with the
    /// re-optimize option, solved queries adopt strictly shorter mains.
    pub fn register_service(
        &mut self,
        name: &str,
        inputs: &[String],
        outputs: &[String],
    ) -> Result<Vec<Outcome>> {
        if self.service_index.contains_key(name) {
            return Err(Error::DuplicateService(name.to_owned()));
        }
        let svc = OnlineService {
            name: name.to_owned(),
            inputs: self.intern_all(inputs)?,
            outputs: self.intern_all(outputs)?,
        };
        for &p in &svc.inputs {
            self.input_for.entry(p).or_default().insert(svc.name.clone());
        }
        self.service_index.insert(svc.name.clone(), self.services.len());
        self.services.push(svc);

        let mut outcomes = Vec::new();
        let query_ids: Vec<String> = self.queries.iter().map(|q| q.id.clone()).collect();
        for qid in query_ids {
            match self.active.get(&qid) {
                Some(None) => {
                    // previously unsolvable; retry
                    if let Some(outcome) = self.try_solve(&qid) {
                        outcomes.push(outcome);
                    }
                }
                Some(Some(active_id)) if self.opts.reoptimize_on_register => {
                    let active_id = *active_id;
                    let query = self.queries[self.query_index[&qid]].clone();
                    let old_len = self.solution(active_id).map(|s| s.main.len()).unwrap_or(0);
                    let searches_before = self.search_count;
                    if let Some(main) = self.search(&query.init, &query.goal, None) {
                        if main.len() < old_len {
                            self.free_solution_tree(active_id);
                            let id = self.install_solution(&qid, main.clone());
                            outcomes.push(Outcome {
                                kind: OutcomeKind::Solved,
                                query_id: qid.clone(),
                                calls: main,
                                swap_searches: self.search_count - searches_before,
                            });
                            self.schedule_backups(id);
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(outcomes)
    }

    /// Registers a composition request and answers it.
    pub fn find_composition(
        &mut self,
        id: &str,
        known: &[String],
        required: &[String],
    ) -> Result<Outcome> {
        if self.query_index.contains_key(id) {
            return Err(Error::DuplicateQuery(id.to_owned()));
        }
        let query = OnlineQuery {
            id: id.to_owned(),
            init: self.intern_all(known)?,
            goal: self.intern_all(required)?,
        };
        self.query_index.insert(id.to_owned(), self.queries.len());
        self.queries.push(query);
        self.active.insert(id.to_owned(), None);
        Ok(self.try_solve(id).expect("fresh query always yields an outcome"))
    }

    /// Drops a request along with its whole solution tree.
    pub fn drop_request(&mut self, id: &str) -> Result<()> {
        let Some(idx) = self.query_index.remove(id) else {
            return Err(Error::UnknownQuery(id.to_owned()));
        };
        self.queries.remove(idx);
        for (i, q) in self.queries.iter().enumerate() {
            self.query_index.insert(q.id.clone(), i);
        }
        if let Some(Some(sol)) = self.active.remove(id) {
            self.free_solution_tree(sol);
        }
        Ok(())
    }

    /// Removes a service; every solution using it fails over: top-level
    /// solutions swap to their precomputed backup (or re-solve from scratch,
    /// or become unsolvable), backup solutions are recomputed on the parent.
    pub fn remove_service(&mut self, name: &str) -> Result<Vec<Outcome>> {
        let Some(idx) = self.service_index.remove(name) else {
            return Err(Error::UnknownService(name.to_owned()));
        };
        let svc = self.services.remove(idx);
        for (i, s) in self.services.iter().enumerate() {
            self.service_index.insert(s.name.clone(), i);
        }
        for &p in &svc.inputs {
            if let Some(set) = self.input_for.get_mut(&p) {
                set.remove(name);
            }
        }

        let affected: Vec<SolutionId> =
            self.usages.get(name).map(|set| set.iter().copied().collect()).unwrap_or_default();
        let mut outcomes = Vec::new();
        for sol_id in affected {
            if self.solution(sol_id).is_none() {
                continue; // freed while handling an earlier affected solution
            }
            let sol = self.solution(sol_id).unwrap().clone();
            match sol.parent {
                None => outcomes.push(self.failover_active(sol_id, &sol, name)),
                Some(parent_id) => {
                    // A backup broke; recompute just that entry on the parent.
                    if self.solution(parent_id).is_none() {
                        continue;
                    }
                    let slot = self
                        .solution(parent_id)
                        .unwrap()
                        .backup
                        .iter()
                        .find(|(_, v)| **v == Some(sol_id))
                        .map(|(k, _)| k.clone());
                    self.free_solution(sol_id);
                    if let Some(slot) = slot {
                        let replacement = self.find_backup(parent_id, &slot);
                        let parent = self.arena[parent_id.0].as_mut().unwrap();
                        match replacement {
                            Some((id, kind)) => {
                                parent.backup.insert(slot.clone(), Some(id));
                                parent.backup_kind.insert(slot, kind);
                            }
                            None => {
                                parent.backup.insert(slot.clone(), None);
                                parent.backup_kind.remove(&slot);
                            }
                        }
                        outcomes.push(Outcome {
                            kind: OutcomeKind::BackupRecomputed,
                            query_id: sol.query_id.clone(),
                            calls: Vec::new(),
                            swap_searches: 0,
                        });
                    }
                }
            }
        }
        self.usages.remove(name);
        Ok(outcomes)
    }

    /// Alias for [`remove_service`]: a detected failure is handled exactly
    /// like a deletion.
    pub fn detect_service_down(&mut self, name: &str) -> Result<Vec<Outcome>> {
        self.remove_service(name)
    }

    /// Computes the queued backups (the deterministic stand-in for the
    /// background thread).
    pub fn process_pending_backups(&mut self) {
        while let Some(id) = self.pending_backups.pop_front() {
            if self.solution(id).is_some() {
                self.compute_backups(id);
            }
        }
    }

    /// Rebuilds the usages index from scratch; test hook for the inverse
    /// consistency invariant.
    pub fn rebuild_usages(&self) -> HashMap<String, BTreeSet<SolutionId>> {
        let mut map: HashMap<String, BTreeSet<SolutionId>> = HashMap::new();
        for (i, slot) in self.arena.iter().enumerate() {
            if let Some(sol) = slot {
                for name in &sol.main {
                    map.entry(name.clone()).or_default().insert(SolutionId(i));
                }
            }
        }
        map
    }

    pub fn usages_of(&self, name: &str) -> BTreeSet<SolutionId> {
        self.usages.get(name).cloned().unwrap_or_default()
    }

    /// Validates a main list against the current repository.
    pub fn validates(&self, query_id: &str, main: &[String]) -> bool {
        let Some(&qidx) = self.query_index.get(query_id) else {
            return false;
        };
        let query = &self.queries[qidx];
        let mut known = query.init.clone();
        for name in main {
            let Some(&idx) = self.service_index.get(name) else {
                return false;
            };
            let svc = &self.services[idx];
            if !svc.inputs.iter().all(|p| known.contains(p)) {
                return false;
            }
            known.extend(svc.outputs.iter().copied());
        }
        query.goal.iter().all(|p| known.contains(p))
    }

    fn try_solve(&mut self, query_id: &str) -> Option<Outcome> {
        let query = self.queries[self.query_index[query_id]].clone();
        match self.search(&query.init, &query.goal, None) {
            Some(main) => {
                let id = self.install_solution(query_id, main.clone());
                self.schedule_backups(id);
                Some(Outcome {
                    kind: OutcomeKind::Solved,
                    query_id: query_id.to_owned(),
                    calls: main,
                    swap_searches: 0,
                })
            }
            None => {
                self.active.insert(query_id.to_owned(), None);
                Some(Outcome {
                    kind: OutcomeKind::Unsolvable,
                    query_id: query_id.to_owned(),
                    calls: Vec::new(),
                    swap_searches: 0,
                })
            }
        }
    }

    fn install_solution(&mut self, query_id: &str, main: Vec<String>) -> SolutionId {
        let sol = Solution {
            query_id: query_id.to_owned(),
            main,
            backup: BTreeMap::new(),
            backup_kind: BTreeMap::new(),
            parent: None,
        };
        let id = self.alloc(sol);
        self.active.insert(query_id.to_owned(), Some(id));
        id
    }

    fn schedule_backups(&mut self, id: SolutionId) {
        if self.opts.synchronous_backups {
            self.compute_backups(id);
        } else {
            self.pending_backups.push_back(id);
        }
    }

    fn alloc(&mut self, sol: Solution) -> SolutionId {
        let id = SolutionId(self.arena.len());
        for name in &sol.main {
            self.usages.entry(name.clone()).or_default().insert(id);
        }
        self.arena.push(Some(sol));
        id
    }

    fn free_solution(&mut self, id: SolutionId) {
        if let Some(sol) = self.arena[id.0].take() {
            for name in &sol.main {
                if let Some(set) = self.usages.get_mut(name) {
                    set.remove(&id);
                }
            }
        }
    }

    fn free_solution_tree(&mut self, id: SolutionId) {
        let backups: Vec<SolutionId> = self
            .solution(id)
            .map(|sol| sol.backup.values().flatten().copied().collect())
            .unwrap_or_default();
        for b in backups {
            self.free_solution(b);
        }
        self.free_solution(id);
    }

    /// Failover for an active solution that used the removed service.
    fn failover_active(&mut self, sol_id: SolutionId, sol: &Solution, removed: &str) -> Outcome {
        let query_id = sol.query_id.clone();
        let backup_id = sol.backup.get(removed).copied().flatten();
        // Drop the stale backups of the old main (keeping the one swapped in).
        let old_backups: Vec<SolutionId> =
            sol.backup.values().flatten().copied().filter(|b| Some(*b) != backup_id).collect();
        for b in old_backups {
            self.free_solution(b);
        }

        if let Some(backup_id) = backup_id {
            // Swap: the precomputed backup becomes the active composition
            // without any new search.
            let searches_before = self.search_count;
            let backup = self.arena[backup_id.0].as_mut().unwrap();
            backup.parent = None;
            let calls = backup.main.clone();
            self.free_solution(sol_id);
            self.active.insert(query_id.clone(), Some(backup_id));
            let swap_searches = self.search_count - searches_before;
            self.schedule_backups(backup_id);
            return Outcome {
                kind: OutcomeKind::SwappedToBackup,
                query_id,
                calls,
                swap_searches,
            };
        }

        // No backup ready: re-solve from scratch, else the request is lost.
        self.free_solution(sol_id);
        let query = self.queries[self.query_index[&query_id]].clone();
        let searches_before = self.search_count;
        match self.search(&query.init, &query.goal, None) {
            Some(main) => {
                let id = self.install_solution(&query_id, main.clone());
                let swap_searches = self.search_count - searches_before;
                self.schedule_backups(id);
                Outcome { kind: OutcomeKind::ResolvedFromScratch, query_id, calls: main, swap_searches }
            }
            None => {
                self.active.insert(query_id.clone(), None);
                Outcome {
                    kind: OutcomeKind::RequestLost,
                    query_id,
                    calls: Vec::new(),
                    swap_searches: self.search_count - searches_before,
                }
            }
        }
    }

    fn compute_backups(&mut self, id: SolutionId) {
        let main = match self.solution(id) {
            Some(sol) => sol.main.clone(),
            None => return,
        };
        for service in main {
            let found = self.find_backup(id, &service);
            let sol = self.arena[id.0].as_mut().unwrap();
            match found {
                Some((backup_id, kind)) => {
                    sol.backup.insert(service.clone(), Some(backup_id));
                    sol.backup_kind.insert(service, kind);
                }
                None => {
                    sol.backup.insert(service, None);
                }
            }
        }
    }

    /// Precomputes the alternative for one service of `sol.main`: first the
    /// replacement query (prefix knowledge toward what the suffix and goal
    /// still need), then the suffix query as fallback. The result is the
    /// full stitched composition, reduced.
    pub fn find_backup(&mut self, sol_id: SolutionId, service: &str) -> Option<(SolutionId, BackupKind)> {
        let sol = self.solution(sol_id)?.clone();
        let p = sol.main.iter().position(|s| s == service)?;
        let query = self.queries[self.query_index[&sol.query_id]].clone();

        let mut known_bkp = query.init.clone();
        for name in &sol.main[..p] {
            if let Some(&idx) = self.service_index.get(name) {
                known_bkp.extend(self.services[idx].outputs.iter().copied());
            }
        }
        let mut req_bkp = query.goal.clone();
        for name in sol.main[p + 1..].iter().rev() {
            if let Some(&idx) = self.service_index.get(name) {
                req_bkp = req_bkp
                    .difference(&self.services[idx].outputs)
                    .copied()
                    .collect();
                req_bkp.extend(self.services[idx].inputs.iter().copied());
            }
        }
        let type1_goal: BTreeSet<ParameterId> =
            req_bkp.difference(&known_bkp).copied().collect();

        let stitched = if let Some(repl) = self.search(&known_bkp, &type1_goal, Some(service)) {
            let mut main: Vec<String> = sol.main[..p].to_vec();
            main.extend(repl);
            main.extend(sol.main[p + 1..].iter().cloned());
            Some((self.reduce(&query, main), BackupKind::Replacement))
        } else {
            let suffix_goal: BTreeSet<ParameterId> =
                query.goal.difference(&known_bkp).copied().collect();
            self.search(&known_bkp, &suffix_goal, Some(service)).map(|repl| {
                let mut main: Vec<String> = sol.main[..p].to_vec();
                main.extend(repl);
                (self.reduce(&query, main), BackupKind::Suffix)
            })
        };

        let (main, kind) = stitched?;
        let backup = Solution {
            query_id: sol.query_id.clone(),
            main,
            backup: BTreeMap::new(),
            backup_kind: BTreeMap::new(),
            parent: Some(sol_id),
        };
        Some((self.alloc(backup), kind))
    }

    /// Backward breadth-first distances: services outputting a goal
    /// parameter score 1, producers of their inputs 2, and so on. Lower is
    /// better.
    pub fn compute_service_scores(
        &self,
        goal: &BTreeSet<ParameterId>,
        exclude: Option<&str>,
    ) -> HashMap<String, u32> {
        let mut scores: HashMap<String, u32> = HashMap::new();
        let mut frontier: Vec<usize> = Vec::new();
        for (i, svc) in self.services.iter().enumerate() {
            if Some(svc.name.as_str()) == exclude {
                continue;
            }
            if svc.outputs.iter().any(|p| goal.contains(p)) {
                scores.insert(svc.name.clone(), 1);
                frontier.push(i);
            }
        }
        let mut distance = 1u32;
        while !frontier.is_empty() {
            distance += 1;
            let wanted: BTreeSet<ParameterId> = frontier
                .iter()
                .flat_map(|&i| self.services[i].inputs.iter().copied())
                .collect();
            let mut next = Vec::new();
            for (i, svc) in self.services.iter().enumerate() {
                if Some(svc.name.as_str()) == exclude || scores.contains_key(&svc.name) {
                    continue;
                }
                if svc.outputs.iter().any(|p| wanted.contains(p)) {
                    scores.insert(svc.name.clone(), distance);
                    next.push(i);
                }
            }
            frontier = next;
        }
        scores
    }

    /// Greedy search picking the lowest-distance ready service, then the
    /// reverse-order shortening pass. Ties break by registration order.
    fn search(
        &mut self,
        init: &BTreeSet<ParameterId>,
        goal: &BTreeSet<ParameterId>,
        exclude: Option<&str>,
    ) -> Option<Vec<String>> {
        self.search_count += 1;
        let scores = self.compute_service_scores(goal, exclude);

        let mut known = init.clone();
        if goal.iter().all(|p| known.contains(p)) {
            return Some(Vec::new());
        }
        let unscored = u32::MAX;
        let mut remaining: Vec<usize> = Vec::with_capacity(self.services.len());
        let mut consumers: HashMap<ParameterId, Vec<usize>> = HashMap::new();
        let mut ready: BTreeSet<(u32, usize)> = BTreeSet::new();
        let mut skip = vec![false; self.services.len()];
        for (i, svc) in self.services.iter().enumerate() {
            if Some(svc.name.as_str()) == exclude {
                skip[i] = true;
                remaining.push(usize::MAX);
                continue;
            }
            let missing = svc.inputs.iter().filter(|p| !known.contains(p)).count();
            remaining.push(missing);
            for p in svc.inputs.iter().filter(|p| !known.contains(p)) {
                consumers.entry(*p).or_default().push(i);
            }
            if missing == 0 {
                ready.insert((scores.get(&svc.name).copied().unwrap_or(unscored), i));
            }
        }

        let mut calls: Vec<String> = Vec::new();
        while let Some(&(score, i)) = ready.iter().next() {
            ready.remove(&(score, i));
            calls.push(self.services[i].name.clone());
            let outputs: Vec<ParameterId> = self.services[i].outputs.iter().copied().collect();
            for p in outputs {
                if !known.insert(p) {
                    continue;
                }
                if let Some(list) = consumers.get(&p) {
                    for &j in list {
                        if skip[j] {
                            continue;
                        }
                        remaining[j] -= 1;
                        if remaining[j] == 0 {
                            ready.insert((
                                scores.get(&self.services[j].name).copied().unwrap_or(unscored),
                                j,
                            ));
                        }
                    }
                }
            }
            if goal.iter().all(|p| known.contains(p)) {
                return Some(self.shorten(init, goal, calls));
            }
        }
        None
    }

    /// Reverse-order pass deleting services whose outputs nobody uses.
    fn shorten(
        &self,
        init: &BTreeSet<ParameterId>,
        goal: &BTreeSet<ParameterId>,
        calls: Vec<String>,
    ) -> Vec<String> {
        let mut needed: BTreeSet<ParameterId> =
            goal.difference(init).copied().collect();
        let mut kept_rev: Vec<String> = Vec::new();
        for name in calls.iter().rev() {
            let svc = &self.services[self.service_index[name]];
            let covered: Vec<ParameterId> =
                needed.intersection(&svc.outputs).copied().collect();
            if covered.is_empty() {
                continue;
            }
            for p in covered {
                needed.remove(&p);
            }
            needed.extend(svc.inputs.iter().filter(|p| !init.contains(p)).copied());
            kept_rev.push(name.clone());
        }
        kept_rev.reverse();
        kept_rev
    }

    fn reduce(&self, query: &OnlineQuery, main: Vec<String>) -> Vec<String> {
        self.shorten(&query.init, &query.goal, main)
    }
}
