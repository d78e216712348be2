//! Solution-based generator for the name model: random services, then a
//! random chain rewritten so each member's inputs come from the union of
//! prior chain outputs plus the initially known set.

use std::collections::BTreeSet;

use super::*;

pub fn generate_name_instance(cfg: &GenConfig) -> Result<(NameInstance, GroundTruth)> {
    cfg.validate()?;
    let params: Vec<String> = (1..=cfg.num_parameters).map(|i| format!("p{i}")).collect();

    // Phase 1: fully random services.
    let mut rng = phase_rng(cfg.seed, phases::SERVICES);
    let mut services: Vec<ServiceDef> = Vec::with_capacity(cfg.num_web_services);
    for i in 1..=cfg.num_web_services {
        let nin = rng.gen_range(1..=cfg.pars_per_service);
        let nout = rng.gen_range(1..=cfg.pars_per_service);
        let inputs = sample_distinct(&mut rng, &params, nin);
        let remaining: Vec<String> =
            params.iter().filter(|p| !inputs.contains(p)).cloned().collect();
        let outputs = sample_distinct(&mut rng, &remaining, nout.max(1));
        services.push(ServiceDef {
            name: format!("ws{}", zero_pad(i, cfg.num_web_services)),
            inputs,
            outputs,
        });
    }

    // Phase 2: pick the chain and the initially known parameters.
    let mut rng = phase_rng(cfg.seed, phases::CHAIN);
    let chain = rand::seq::index::sample(&mut rng, cfg.num_web_services, cfg.num_ws_in_solution)
        .into_vec();
    let ninit = rng.gen_range(1..=cfg.pars_per_service);
    let known = sample_distinct(&mut rng, &params, ninit);

    // Phase 3: rewire chain inputs from what is already producible.
    let mut rng = phase_rng(cfg.seed, phases::REWIRE);
    let mut pool: Vec<String> = known.clone();
    let mut pool_set: BTreeSet<String> = known.iter().cloned().collect();
    for &idx in &chain {
        let own_outputs: BTreeSet<String> = services[idx].outputs.iter().cloned().collect();
        let candidates: Vec<String> =
            pool.iter().filter(|p| !own_outputs.contains(*p)).cloned().collect();
        let want = services[idx].inputs.len();
        services[idx].inputs = sample_distinct(&mut rng, &candidates, want);
        for out in &services[idx].outputs {
            if pool_set.insert(out.clone()) {
                pool.push(out.clone());
            }
        }
    }
    let ngoal = rng.gen_range(1..=cfg.pars_per_service);
    let required = sample_distinct(&mut rng, &pool, ngoal);

    let planted_chain: Vec<String> = chain.iter().map(|&i| services[i].name.clone()).collect();
    let instance = NameInstance { services, query: QueryDef { known, required } };
    let truth = GroundTruth {
        model: "name".into(),
        planted_chain,
        ..Default::default()
    };
    Ok((instance, truth))
}
