//! Greedy composition search for the name-matching model.
//!
//! The search maintains the set of known parameters and, per service, the
//! inputs still unknown. Services whose remaining set empties become
//! accessible and are picked best-score-first; every parameter is learned at
//! most once, giving O(|R| log |R| + P) overall. A final reduction pass
//! drops services that contribute nothing the rest of the chain uses.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::intern::{ParamRegistry, ParameterId};
use crate::model::{Composition, Repository, Request};
use crate::validate::validate_composition;

/// Scores approximating the expected benefit of learning a parameter or
/// calling a service. Service score cumulates its output parameter scores;
/// parameter score cumulates the scores of services consuming it.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    pub param_score: HashMap<ParameterId, f64>,
    pub service_score: HashMap<String, f64>,
}

impl ScoreTable {
    pub fn service(&self, name: &str) -> f64 {
        self.service_score.get(name).copied().unwrap_or(0.0)
    }

    pub fn param(&self, id: ParameterId) -> f64 {
        self.param_score.get(&id).copied().unwrap_or(0.0)
    }
}

/// Seed constant assigned to every goal parameter.
const GOAL_SEED: f64 = 1.0;

/// Propagates scores backward from the goal.
///
/// Each service is processed at most once, queue-driven from the goal
/// parameters in name order; after the queue drains every processed
/// service's score is recomputed once from the final parameter scores.
pub fn compute_scores(registry: &ParamRegistry, repo: &Repository, req: &Request) -> ScoreTable {
    let mut table = ScoreTable::default();

    // Producers index: parameter -> services outputting it, declaration order.
    let mut producers: HashMap<ParameterId, Vec<usize>> = HashMap::new();
    for (i, svc) in repo.services().iter().enumerate() {
        for &p in &svc.outputs {
            producers.entry(p).or_default().push(i);
        }
    }

    let mut queued = vec![false; repo.len()];
    let mut queue = std::collections::VecDeque::new();
    for &g in &req.goal {
        table.param_score.insert(g, GOAL_SEED);
    }
    let mut goal_by_name: Vec<ParameterId> = req.goal.iter().copied().collect();
    goal_by_name.sort_by_key(|p| registry.name(*p));
    for &g in &goal_by_name {
        if let Some(svcs) = producers.get(&g) {
            for &i in svcs {
                if !queued[i] {
                    queued[i] = true;
                    queue.push_back(i);
                }
            }
        }
    }

    let mut processed = Vec::new();
    while let Some(i) = queue.pop_front() {
        let svc = &repo.services()[i];
        let score: f64 = svc.outputs.iter().map(|p| table.param(*p)).sum();
        table.service_score.insert(svc.name.clone(), score);
        processed.push(i);
        if svc.inputs.is_empty() {
            continue;
        }
        let share = score / svc.inputs.len() as f64;
        for &p in &svc.inputs {
            *table.param_score.entry(p).or_insert(0.0) += share;
            if let Some(svcs) = producers.get(&p) {
                for &j in svcs {
                    if !queued[j] {
                        queued[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
    }

    // The sum of output parameter scores is computed again once, since some
    // outputs may have gained score after their service was processed.
    for i in processed {
        let svc = &repo.services()[i];
        let score: f64 = svc.outputs.iter().map(|p| table.param(*p)).sum();
        table.service_score.insert(svc.name.clone(), score);
    }
    table
}

/// How the search picks among accessible services.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PickStrategy {
    /// Highest score first, ties by ascending service name.
    Scored,
    /// Ascending service name, ignoring scores (raw search behavior).
    NameOrder,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub strategy: PickStrategy,
    pub reduce: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { strategy: PickStrategy::Scored, reduce: true }
    }
}

/// Accessible-service ordering key: score descending, then name ascending.
/// Scores are nonnegative, so the bit representation orders consistently.
fn order_key(score: f64, idx: usize, repo: &Repository) -> (u64, String) {
    debug_assert!(score >= 0.0);
    (u64::MAX - score.to_bits(), repo.services()[idx].name.clone())
}

/// Raw greedy search: returns a composition covering the goal, or `None`.
/// Learned parameters are processed once each; the loop makes at most |R|
/// picks.
fn search(
    registry: &ParamRegistry,
    repo: &Repository,
    req: &Request,
    strategy: PickStrategy,
) -> Option<Composition> {
    let scores = match strategy {
        PickStrategy::Scored => Some(compute_scores(registry, repo, req)),
        PickStrategy::NameOrder => None,
    };

    let mut known: BTreeSet<ParameterId> = req.init.iter().copied().collect();
    let mut goal_unknown: BTreeSet<ParameterId> =
        req.goal.iter().filter(|p| !known.contains(p)).copied().collect();
    if goal_unknown.is_empty() {
        return Some(Composition::empty());
    }

    let mut input_parameter_of: HashMap<ParameterId, Vec<usize>> = HashMap::new();
    let mut unknown_inputs: Vec<usize> = Vec::with_capacity(repo.len());
    let mut accessible: BTreeSet<(u64, String)> = BTreeSet::new();
    let key = |idx: usize| {
        let score = scores.as_ref().map_or(0.0, |t| t.service(&repo.services()[idx].name));
        order_key(score, idx, repo)
    };

    for (i, svc) in repo.services().iter().enumerate() {
        let missing = svc.inputs.iter().filter(|p| !known.contains(p)).count();
        unknown_inputs.push(missing);
        for p in svc.inputs.iter().filter(|p| !known.contains(p)) {
            input_parameter_of.entry(*p).or_default().push(i);
        }
        if missing == 0 {
            accessible.insert(key(i));
        }
    }

    let mut calls = Vec::new();
    while let Some(entry) = accessible.iter().next().cloned() {
        accessible.remove(&entry);
        let idx = repo.index_of(&entry.1).expect("accessible service exists");
        calls.push(entry.1);
        let outputs: Vec<ParameterId> = repo.services()[idx].outputs.iter().copied().collect();
        for p in outputs {
            if !known.insert(p) {
                continue; // learned before
            }
            goal_unknown.remove(&p);
            if let Some(consumers) = input_parameter_of.get(&p) {
                for &j in consumers {
                    unknown_inputs[j] -= 1;
                    if unknown_inputs[j] == 0 {
                        accessible.insert(key(j));
                    }
                }
            }
        }
        if goal_unknown.is_empty() {
            return Some(Composition::sequential(calls));
        }
    }
    None
}

/// One reduction pass: drops services that output nothing both new and
/// needed later. Two scans over the chain; the result is valid whenever the
/// input was, and never longer.
pub fn reduce_composition(
    repo: &Repository,
    req: &Request,
    comp: &Composition,
) -> Result<Composition> {
    let report = validate_composition(repo, req, comp)?;
    if !report.valid {
        return Err(Error::InvalidComposition(
            "reduction requires a valid composition".into(),
        ));
    }

    // First scan: count input appearances ahead of the cursor; goal
    // parameters count as inputs of a final fictive service.
    let mut future_uses: HashMap<ParameterId, usize> = HashMap::new();
    for name in &comp.calls {
        let svc = repo.get(name).expect("validated above");
        for &p in &svc.inputs {
            *future_uses.entry(p).or_insert(0) += 1;
        }
    }
    for &g in &req.goal {
        *future_uses.entry(g).or_insert(0) += 1;
    }

    // Second scan: a service stays when it outputs a parameter nobody
    // provided before it that some later service (or the goal) consumes.
    let mut provided: BTreeSet<ParameterId> = req.init.iter().copied().collect();
    let mut kept = Vec::new();
    for name in &comp.calls {
        let svc = repo.get(name).expect("validated above");
        for &p in &svc.inputs {
            if let Some(c) = future_uses.get_mut(&p) {
                *c -= 1;
            }
        }
        let useful = svc
            .outputs
            .iter()
            .any(|p| !provided.contains(p) && future_uses.get(p).copied().unwrap_or(0) > 0);
        if useful {
            provided.extend(svc.outputs.iter().copied());
            kept.push(name.clone());
        }
    }
    Ok(Composition::sequential(kept))
}

/// Full solve: greedy search followed by reduction passes until a pass
/// removes nothing, capped at |R| iterations.
pub fn find_composition_with(
    registry: &ParamRegistry,
    repo: &Repository,
    req: &Request,
    opts: SolveOptions,
) -> Option<Composition> {
    let mut comp = search(registry, repo, req, opts.strategy)?;
    if opts.reduce {
        for _ in 0..repo.len() {
            let reduced = reduce_composition(repo, req, &comp)
                .expect("search output validates");
            if reduced.len() == comp.len() {
                break;
            }
            comp = reduced;
        }
    }
    Some(comp)
}

/// Solve with the default options: scored picks plus reduction.
pub fn find_composition(
    registry: &ParamRegistry,
    repo: &Repository,
    req: &Request,
) -> Option<Composition> {
    find_composition_with(registry, repo, req, SolveOptions::default())
}
