//! Object-oriented generator: random concept tree with properties, random
//! services, then an ordered list rewired so each member's inputs come from
//! previous outputs or properties of generalizations of those concepts.
//! The planted list stays valid; tight dependency is not guaranteed, so
//! shorter solutions may exist.

use std::collections::{BTreeMap, BTreeSet};

use super::*;

pub fn generate_oo_instance(cfg: &GenConfig) -> Result<(OoInstance, GroundTruth)> {
    cfg.validate()?;
    let nconcepts = cfg.num_concepts.max(1);
    let nprops = cfg.num_properties.max(1);

    // Phase 1: tree and properties.
    let mut rng = phase_rng(cfg.seed, phases::TAXONOMY);
    let mut parents: Vec<Option<usize>> = Vec::with_capacity(nconcepts);
    for i in 0..nconcepts {
        parents.push(if i == 0 || rng.gen_bool(0.15) {
            None
        } else {
            Some(rng.gen_range(0..i))
        });
    }
    // property k attached to a random concept, typed by a random concept
    let prop_owner: Vec<usize> = (0..nprops).map(|_| rng.gen_range(0..nconcepts)).collect();
    let prop_type: Vec<usize> = (0..nprops).map(|_| rng.gen_range(0..nconcepts)).collect();
    let concepts: Vec<OoConceptDef> = (0..nconcepts)
        .map(|i| OoConceptDef {
            name: format!("c{i}"),
            parent: parents[i].map(|p| format!("c{p}")),
            props: (0..nprops)
                .filter(|&k| prop_owner[k] == i)
                .map(|k| PropertyDef { name: format!("prop{k}"), concept: format!("c{}", prop_type[k]) })
                .collect(),
        })
        .collect();

    let ancestors_or_self = |c: usize| -> Vec<usize> {
        let mut out = vec![c];
        let mut cur = c;
        while let Some(p) = parents[cur] {
            out.push(p);
            cur = p;
        }
        out
    };
    // properties visible at a concept: own plus inherited
    let visible_props = |c: usize| -> Vec<usize> {
        let chain: BTreeSet<usize> = ancestors_or_self(c).into_iter().collect();
        (0..nprops).filter(|&k| chain.contains(&prop_owner[k])).collect()
    };

    // Phase 2: random services over partial concepts.
    let mut rng = phase_rng(cfg.seed, phases::SERVICES);
    let random_param = |rng: &mut ChaCha8Rng| -> OoParamDef {
        let c = rng.gen_range(0..nconcepts);
        let visible = visible_props(c);
        let take = if visible.is_empty() { 0 } else { rng.gen_range(0..=visible.len().min(2)) };
        let props = sample_distinct(rng, &visible, take)
            .into_iter()
            .map(|k| format!("prop{k}"))
            .collect();
        OoParamDef { concept: format!("c{c}"), props }
    };
    let mut services: Vec<OoServiceDef> = Vec::with_capacity(cfg.num_web_services);
    for i in 1..=cfg.num_web_services {
        let nin = rng.gen_range(1..=cfg.pars_per_service);
        let nout = rng.gen_range(1..=cfg.pars_per_service);
        services.push(OoServiceDef {
            name: format!("ws{}", zero_pad(i, cfg.num_web_services)),
            inputs: (0..nin).map(|_| random_param(&mut rng)).collect(),
            outputs: (0..nout).map(|_| random_param(&mut rng)).collect(),
        });
    }

    // Phase 3: chain, init and rewiring against the learned-fact pool.
    let mut rng = phase_rng(cfg.seed, phases::CHAIN);
    let chain = rand::seq::index::sample(&mut rng, cfg.num_web_services, cfg.num_ws_in_solution)
        .into_vec();
    let ninit = rng.gen_range(1..=cfg.pars_per_service);
    let known_params: Vec<OoParamDef> = {
        let mut rng2 = phase_rng(cfg.seed, phases::QUERY);
        (0..ninit).map(|_| random_param(&mut rng2)).collect()
    };

    let mut rng = phase_rng(cfg.seed, phases::REWIRE);
    // learned facts: concept -> properties known at that level (plus presence)
    let mut pool: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let learn = |pool: &mut BTreeMap<usize, BTreeSet<usize>>, pc: &OoParamDef| {
        let c: usize = pc.concept[1..].parse().unwrap();
        let props: Vec<usize> = pc.props.iter().map(|p| p[4..].parse().unwrap()).collect();
        for a in ancestors_or_self(c) {
            let visible: BTreeSet<usize> = visible_props(a).into_iter().collect();
            let entry = pool.entry(a).or_default();
            for &p in &props {
                if visible.contains(&p) {
                    entry.insert(p);
                }
            }
        }
    };
    for pc in &known_params {
        learn(&mut pool, pc);
    }
    for &s in &chain {
        let known_concepts: Vec<usize> = pool.keys().copied().collect();
        let nin = services[s].inputs.len();
        let mut inputs = Vec::with_capacity(nin);
        for _ in 0..nin {
            let c = known_concepts[rng.gen_range(0..known_concepts.len())];
            let avail: Vec<usize> = pool[&c].iter().copied().collect();
            let take = if avail.is_empty() { 0 } else { rng.gen_range(0..=avail.len().min(2)) };
            let props =
                sample_distinct(&mut rng, &avail, take).into_iter().map(|k| format!("prop{k}")).collect();
            inputs.push(OoParamDef { concept: format!("c{c}"), props });
        }
        services[s].inputs = inputs;
        let outputs = services[s].outputs.clone();
        for pc in &outputs {
            learn(&mut pool, pc);
        }
    }

    // Goal: a sample drawn from the union of the chain's outputs.
    let chain_outputs: Vec<OoParamDef> =
        chain.iter().flat_map(|&s| services[s].outputs.clone()).collect();
    let ngoal = rng.gen_range(1..=cfg.pars_per_service.min(chain_outputs.len()));
    let required = sample_distinct(&mut rng, &chain_outputs, ngoal);

    let planted_chain: Vec<String> = chain.iter().map(|&i| services[i].name.clone()).collect();
    let instance = OoInstance {
        concept_tree: ConceptTreeDef { concepts },
        services,
        query: OoQueryDef { known: known_params, required },
    };
    let truth = GroundTruth {
        model: "oo".into(),
        planted_chain,
        ..Default::default()
    };
    Ok((instance, truth))
}
