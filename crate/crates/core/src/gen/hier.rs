//! Hierarchical-model generator: the name-model scheme over a random
//! taxonomy, with chain inputs rewired to instances subsumed by prior
//! outputs so the planting guarantee survives subsumption matching.

use std::collections::BTreeSet;

use super::*;

pub fn generate_hierarchical_instance(cfg: &GenConfig) -> Result<(HierInstance, GroundTruth)> {
    cfg.validate()?;
    if cfg.num_concepts < 2 {
        return Err(Error::InvalidConfig("taxonomy needs at least 2 concepts".into()));
    }
    let ninst = cfg.num_instances.max(2);

    // Phase 1: random forest and instances.
    let mut rng = phase_rng(cfg.seed, phases::TAXONOMY);
    let mut concepts: Vec<ConceptDef> = Vec::with_capacity(cfg.num_concepts);
    for i in 0..cfg.num_concepts {
        let parent = if i == 0 || rng.gen_bool(0.1) {
            None
        } else {
            Some(format!("c{}", rng.gen_range(0..i)))
        };
        concepts.push(ConceptDef { name: format!("c{i}"), parent });
    }
    let instances: Vec<InstanceDecl> = (0..ninst)
        .map(|i| InstanceDecl {
            name: format!("i{i}"),
            concept: format!("c{}", rng.gen_range(0..cfg.num_concepts)),
        })
        .collect();

    // Ancestor concepts per concept, for the generalization cone.
    let concept_parent: Vec<Option<usize>> = concepts
        .iter()
        .map(|c| c.parent.as_ref().map(|p| p[1..].parse::<usize>().unwrap()))
        .collect();
    let ancestors_or_self = |c: usize| -> Vec<usize> {
        let mut out = vec![c];
        let mut cur = c;
        while let Some(p) = concept_parent[cur] {
            out.push(p);
            cur = p;
        }
        out
    };
    let instance_concept: Vec<usize> =
        instances.iter().map(|i| i.concept[1..].parse::<usize>().unwrap()).collect();
    let mut instances_of_concept: Vec<Vec<usize>> = vec![Vec::new(); cfg.num_concepts];
    for (i, &c) in instance_concept.iter().enumerate() {
        instances_of_concept[c].push(i);
    }
    // Instances standing for something more generic than instance `i`.
    let cone_of = |i: usize| -> Vec<usize> {
        let mut cone = Vec::new();
        for c in ancestors_or_self(instance_concept[i]) {
            cone.extend(instances_of_concept[c].iter().copied());
        }
        cone.sort_unstable();
        cone.dedup();
        cone
    };

    let inst_names: Vec<String> = instances.iter().map(|d| d.name.clone()).collect();

    // Phase 2: random services over instances.
    let mut rng = phase_rng(cfg.seed, phases::SERVICES);
    let mut services: Vec<ServiceDef> = Vec::with_capacity(cfg.num_web_services);
    for i in 1..=cfg.num_web_services {
        let nin = rng.gen_range(1..=cfg.pars_per_service);
        let nout = rng.gen_range(1..=cfg.pars_per_service);
        let inputs = sample_distinct(&mut rng, &inst_names, nin);
        let remaining: Vec<String> =
            inst_names.iter().filter(|p| !inputs.contains(p)).cloned().collect();
        let outputs = sample_distinct(&mut rng, &remaining, nout.max(1));
        services.push(ServiceDef {
            name: format!("ws{}", zero_pad(i, cfg.num_web_services)),
            inputs,
            outputs,
        });
    }

    // Phase 3: chain selection and subsumption-aware rewiring.
    let mut rng = phase_rng(cfg.seed, phases::CHAIN);
    let chain = rand::seq::index::sample(&mut rng, cfg.num_web_services, cfg.num_ws_in_solution)
        .into_vec();
    let ninit = rng.gen_range(1..=cfg.pars_per_service);
    let known = sample_distinct(&mut rng, &inst_names, ninit);

    let mut rng = phase_rng(cfg.seed, phases::REWIRE);
    let idx_of = |name: &str| -> usize { name[1..].parse().unwrap() };
    let mut cone: BTreeSet<usize> = BTreeSet::new();
    for k in &known {
        cone.extend(cone_of(idx_of(k)));
    }
    for &s in &chain {
        let own_outputs: BTreeSet<String> = services[s].outputs.iter().cloned().collect();
        let candidates: Vec<String> = cone
            .iter()
            .map(|&i| inst_names[i].clone())
            .filter(|n| !own_outputs.contains(n))
            .collect();
        let want = services[s].inputs.len();
        services[s].inputs = sample_distinct(&mut rng, &candidates, want);
        for out in &services[s].outputs {
            cone.extend(cone_of(idx_of(out)));
        }
    }
    let goal_pool: Vec<String> = cone.iter().map(|&i| inst_names[i].clone()).collect();
    let ngoal = rng.gen_range(1..=cfg.pars_per_service);
    let required = sample_distinct(&mut rng, &goal_pool, ngoal);

    let planted_chain: Vec<String> = chain.iter().map(|&i| services[i].name.clone()).collect();
    let instance = HierInstance {
        taxonomy: TaxonomyDef { concepts, instances },
        services,
        query: QueryDef { known, required },
    };
    let truth = GroundTruth {
        model: "hierarchical".into(),
        planted_chain,
        ..Default::default()
    };
    Ok((instance, truth))
}
