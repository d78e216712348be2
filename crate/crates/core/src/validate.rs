//! Chained-matching validation and an exact shortest-composition oracle.
//!
//! The validator is the independent check used against every engine's
//! output: a composition is valid when each call's inputs are covered by the
//! request's initial parameters plus the outputs of strictly earlier calls
//! (strictly earlier layers, when the composition is layered) and the goal
//! is covered at the end.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::intern::ParameterId;
use crate::model::{Composition, Repository, Request, ValidationReport};

/// Validates `comp` against `repo` and `req`.
///
/// A call that adds no new parameter is still valid; reduction, not
/// validation, removes it. Unknown service names are an error rather than an
/// invalid verdict.
pub fn validate_composition(
    repo: &Repository,
    req: &Request,
    comp: &Composition,
) -> Result<ValidationReport> {
    comp.check_layer_consistency()?;
    for name in &comp.calls {
        if repo.get(name).is_none() {
            return Err(Error::UnknownService(name.clone()));
        }
    }

    let mut known: BTreeSet<ParameterId> = req.init.iter().copied().collect();
    let mut first_violation = None;

    let layers: Vec<Vec<&String>> = match &comp.layers {
        Some(layers) => layers.iter().map(|l| l.iter().collect()).collect(),
        None => comp.calls.iter().map(|c| vec![c]).collect(),
    };

    let mut position = 0usize;
    for layer in &layers {
        // Inputs of a layer may only use strictly earlier knowledge.
        let mut produced: BTreeSet<ParameterId> = BTreeSet::new();
        for name in layer {
            let svc = repo.get(name).expect("resolved above");
            let missing: Vec<ParameterId> =
                svc.inputs.iter().filter(|p| !known.contains(p)).copied().collect();
            if !missing.is_empty() && first_violation.is_none() {
                first_violation = Some((position, missing));
            }
            produced.extend(svc.outputs.iter().copied());
            position += 1;
        }
        known.extend(produced);
    }

    let goal_covered = req.goal.iter().all(|p| known.contains(p));
    Ok(ValidationReport::from_parts(first_violation, goal_covered))
}

/// Exhaustive shortest-composition search, used as a test oracle.
///
/// Breadth-first over knowledge states with memoization on the set of known
/// parameters, so every call sequence is covered without enumerating
/// permutations. Exponential in the worst case; meant for repositories of a
/// dozen services or so.
pub fn brute_force_shortest(
    repo: &Repository,
    req: &Request,
    max_len: usize,
) -> Option<Composition> {
    if req.goal.iter().all(|p| req.init.contains(p)) {
        return Some(Composition::empty());
    }

    let start: BTreeSet<ParameterId> = req.init.iter().copied().collect();
    // parent state + service index that led here
    let mut seen: HashMap<BTreeSet<ParameterId>, Option<(BTreeSet<ParameterId>, usize)>> =
        HashMap::new();
    seen.insert(start.clone(), None);
    let mut frontier = VecDeque::new();
    frontier.push_back((start, 0usize));

    while let Some((known, depth)) = frontier.pop_front() {
        if depth >= max_len {
            continue;
        }
        for (idx, svc) in repo.services().iter().enumerate() {
            if !svc.inputs.iter().all(|p| known.contains(p)) {
                continue;
            }
            let mut next = known.clone();
            next.extend(svc.outputs.iter().copied());
            if next.len() == known.len() {
                continue; // nothing new; never part of a shortest composition
            }
            if seen.contains_key(&next) {
                continue;
            }
            seen.insert(next.clone(), Some((known.clone(), idx)));
            if req.goal.iter().all(|p| next.contains(p)) {
                let mut calls = Vec::new();
                let mut cursor = next;
                while let Some(Some((prev, svc_idx))) = seen.get(&cursor) {
                    calls.push(repo.services()[*svc_idx].name.clone());
                    cursor = prev.clone();
                }
                calls.reverse();
                return Some(Composition::sequential(calls));
            }
            frontier.push_back((next, depth + 1));
        }
    }
    None
}
