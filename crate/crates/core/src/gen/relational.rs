//! Relational generator: knowledge built incrementally in stages, a service
//! layer between consecutive stages, noise on top, and optional planted
//! rule sites where applying an inference rule shortens the composition.
//!
//! A rule site plants premise triples in the initial knowledge, a rule
//! deriving the relation a consumer service requires, and a bypass service
//! that derives the same relation the long way; ignoring rules forces the
//! bypass into the composition.

use std::collections::BTreeSet;

use super::*;

pub fn generate_relational_instance(cfg: &GenConfig) -> Result<(RelInstance, GroundTruth)> {
    cfg.validate()?;
    if cfg.num_stages < 2 {
        return Err(Error::InvalidConfig("relational generation needs at least 2 stages".into()));
    }
    let nconcepts = cfg.num_concepts.max(2);
    let nrelations = cfg.num_relations.max(1);

    // Phase 1: concept forest and relation declarations.
    let mut rng = phase_rng(cfg.seed, phases::TAXONOMY);
    let mut concepts: Vec<ConceptDef> = Vec::with_capacity(nconcepts);
    for i in 0..nconcepts {
        let parent = if i == 0 || rng.gen_bool(0.3) {
            None
        } else {
            Some(format!("c{}", rng.gen_range(0..i)))
        };
        concepts.push(ConceptDef { name: format!("c{i}"), parent });
    }
    let mut relations: Vec<RelationDef> = (0..nrelations)
        .map(|i| RelationDef { name: format!("r{i}"), transitive: false, symmetric: false })
        .collect();

    // Objects of the staged knowledge: (label, concept index).
    let mut rng = phase_rng(cfg.seed, phases::SERVICES);
    let mut objects: Vec<(String, usize)> = Vec::new();
    let mut triples: Vec<(String, String, String)> = Vec::new();
    let mut holds = BTreeSet::new();
    let n0 = cfg.pars_per_service.max(2);
    for j in 0..n0 {
        objects.push((format!("k{j}"), rng.gen_range(0..nconcepts)));
    }
    for _ in 0..n0 {
        let a = rng.gen_range(0..objects.len());
        let b = rng.gen_range(0..objects.len());
        if a == b {
            continue;
        }
        let r = format!("r{}", rng.gen_range(0..nrelations));
        let t = (r.clone(), objects[a].0.clone(), objects[b].0.clone());
        if holds.insert(t.clone()) {
            triples.push(t);
        }
    }
    let stage0_len = objects.len();

    // Service layers between stages.
    let layers_count = cfg.num_stages - 1;
    let per_layer = (cfg.num_ws_in_solution / layers_count).max(1);
    let mut services: Vec<RelServiceDef> = Vec::new();
    let mut layers: Vec<Vec<String>> = Vec::new();
    for stage in 1..cfg.num_stages {
        let mut layer = Vec::new();
        let known_len = objects.len();
        let mut stage_new: Vec<(String, usize)> = Vec::new();
        for s in 0..per_layer {
            let name = format!("stage{stage}_ws{s}");
            let nin = rng.gen_range(1..=cfg.pars_per_service.min(known_len));
            let picked = rand::seq::index::sample(&mut rng, known_len, nin).into_vec();
            let inputs: Vec<TypedParamDef> = picked
                .iter()
                .enumerate()
                .map(|(k, &o)| TypedParamDef {
                    name: format!("in{k}"),
                    concept: format!("c{}", objects[o].1),
                })
                .collect();
            // preconditions: declared triples that hold between the inputs
            let mut rel: Vec<[String; 3]> = Vec::new();
            for (ai, &a) in picked.iter().enumerate() {
                for (bi, &b) in picked.iter().enumerate() {
                    if ai == bi {
                        continue;
                    }
                    for r in 0..nrelations {
                        let t = (
                            format!("r{r}"),
                            objects[a].0.clone(),
                            objects[b].0.clone(),
                        );
                        if holds.contains(&t) && rel.len() < 2 && rng.gen_bool(0.6) {
                            rel.push([t.0, format!("in{ai}"), format!("in{bi}")]);
                        }
                    }
                }
            }
            let nout = rng.gen_range(1..=cfg.pars_per_service);
            let mut outputs = Vec::new();
            for k in 0..nout {
                let concept = rng.gen_range(0..nconcepts);
                let label = format!("s{stage}_{s}_{k}");
                outputs.push(TypedParamDef {
                    name: format!("out{k}"),
                    concept: format!("c{concept}"),
                });
                // effect relations from the fresh object back to an input
                if !picked.is_empty() && rng.gen_bool(0.7) {
                    let r = rng.gen_range(0..nrelations);
                    let src = rng.gen_range(0..picked.len());
                    rel.push([format!("r{r}"), format!("in{src}"), format!("out{k}")]);
                    let t = (format!("r{r}"), objects[picked[src]].0.clone(), label.clone());
                    if holds.insert(t.clone()) {
                        triples.push(t);
                    }
                }
                stage_new.push((label, concept));
            }
            services.push(RelServiceDef { name: name.clone(), inputs, outputs, rel });
            layer.push(name);
        }
        objects.extend(stage_new);
        layers.push(layer);
    }
    let final_stage_start = objects.len()
        - services
            .iter()
            .rev()
            .take(per_layer)
            .map(|s| s.outputs.len())
            .sum::<usize>();

    // Phase 2: planted rule sites.
    let mut rules: Vec<RuleDef> = Vec::new();
    let mut rule_goal: Vec<TypedParamDef> = Vec::new();
    let mut planted_extra: Vec<String> = Vec::new();
    for k in 0..cfg.num_rules {
        for suffix in ["x", "y", "z", "w"] {
            concepts.push(ConceptDef { name: format!("cr{k}{suffix}"), parent: None });
        }
        for rel in ["relA", "relB", "relC"] {
            relations.push(RelationDef {
                name: format!("{rel}{k}"),
                transitive: false,
                symmetric: false,
            });
        }
        // premise objects and facts live in the initial knowledge
        let (rx, ry, rz) = (format!("rx{k}"), format!("ry{k}"), format!("rz{k}"));
        triples.push((format!("relA{k}"), rx, ry.clone()));
        triples.push((format!("relB{k}"), ry, rz));
        rules.push(RuleDef {
            name: format!("rule{k}"),
            params: vec!["X".into(), "Y".into(), "Z".into()],
            pre: vec![
                [format!("relA{k}"), "X".into(), "Y".into()],
                [format!("relB{k}"), "Y".into(), "Z".into()],
            ],
            eff: vec![[format!("relC{k}"), "X".into(), "Z".into()]],
        });
        // the long way around the rule
        services.push(RelServiceDef {
            name: format!("bypass{k}"),
            inputs: vec![TypedParamDef { name: "ax".into(), concept: format!("cr{k}x") }],
            outputs: vec![TypedParamDef { name: "az".into(), concept: format!("cr{k}z") }],
            rel: vec![[format!("relC{k}"), "ax".into(), "az".into()]],
        });
        // the consumer that needs the derived relation
        services.push(RelServiceDef {
            name: format!("consumer{k}"),
            inputs: vec![
                TypedParamDef { name: "px".into(), concept: format!("cr{k}x") },
                TypedParamDef { name: "pz".into(), concept: format!("cr{k}z") },
            ],
            outputs: vec![TypedParamDef { name: "w".into(), concept: format!("cr{k}w") }],
            rel: vec![[format!("relC{k}"), "px".into(), "pz".into()]],
        });
        planted_extra.push(format!("bypass{k}"));
        planted_extra.push(format!("consumer{k}"));
        rule_goal.push(TypedParamDef { name: format!("gw{k}"), concept: format!("cr{k}w") });
    }

    // Phase 3: noise services over the staged concepts.
    let mut rng = phase_rng(cfg.seed, phases::NOISE);
    let noise_count = (services.len() as f64 * cfg.noise_fraction).floor() as usize;
    for j in 0..noise_count {
        let nin = rng.gen_range(1..=cfg.pars_per_service);
        let nout = rng.gen_range(1..=cfg.pars_per_service);
        let inputs = (0..nin)
            .map(|k| TypedParamDef {
                name: format!("in{k}"),
                concept: format!("c{}", rng.gen_range(0..nconcepts)),
            })
            .collect();
        let outputs = (0..nout)
            .map(|k| TypedParamDef {
                name: format!("out{k}"),
                concept: format!("c{}", rng.gen_range(0..nconcepts)),
            })
            .collect();
        services.push(RelServiceDef {
            name: format!("noise{j}"),
            inputs,
            outputs,
            rel: Vec::new(),
        });
    }

    // Phase 4: the query. Known: the whole initial stage with its facts;
    // required: part of the final stage plus every rule-site consumer output.
    let mut rng = phase_rng(cfg.seed, phases::QUERY);
    let mut known: Vec<TypedParamDef> = (0..stage0_len)
        .map(|j| TypedParamDef {
            name: objects[j].0.clone(),
            concept: format!("c{}", objects[j].1),
        })
        .collect();
    for k in 0..cfg.num_rules {
        known.push(TypedParamDef { name: format!("rx{k}"), concept: format!("cr{k}x") });
        known.push(TypedParamDef { name: format!("ry{k}"), concept: format!("cr{k}y") });
        known.push(TypedParamDef { name: format!("rz{k}"), concept: format!("cr{k}z") });
    }
    let known_names: BTreeSet<String> = known.iter().map(|p| p.name.clone()).collect();
    let rel: Vec<[String; 3]> = triples
        .iter()
        .filter(|(_, a, b)| known_names.contains(a) && known_names.contains(b))
        .map(|(r, a, b)| [r.clone(), a.clone(), b.clone()])
        .collect();

    let final_objects: Vec<&(String, usize)> =
        objects[final_stage_start..].iter().filter(|(l, _)| l.starts_with('s')).collect();
    let ngoal = rng.gen_range(1..=cfg.pars_per_service.min(final_objects.len().max(1)));
    let mut required: Vec<TypedParamDef> = sample_distinct(&mut rng, &final_objects, ngoal)
        .into_iter()
        .enumerate()
        .map(|(j, (_, c))| TypedParamDef { name: format!("g{j}"), concept: format!("c{c}") })
        .collect();
    required.extend(rule_goal);

    let mut planted_chain: Vec<String> = layers.iter().flatten().cloned().collect();
    planted_chain.extend(planted_extra);

    let instance = RelInstance {
        taxonomy: TaxonomyDef { concepts, instances: Vec::new() },
        relations,
        rules,
        services,
        query: RelQueryDef { known, required, rel },
    };
    let truth = GroundTruth {
        model: "relational".into(),
        planted_chain,
        planted_stages: layers,
        ..Default::default()
    };
    Ok((instance, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relational::{search_composition_relational, validate_relational, RelOptions};

    #[test]
    fn two_stage_instance_solves_and_validates() {
        let cfg = GenConfig {
            num_stages: 2,
            num_rules: 0,
            noise_fraction: 0.0,
            num_ws_in_solution: 3,
            num_web_services: 3,
            seed: 1,
            ..Default::default()
        };
        let (instance, _) = generate_relational_instance(&cfg).unwrap();
        let (ontology, services, query) = instance.load().unwrap();
        let comp =
            search_composition_relational(&ontology, &services, &query, RelOptions::default())
                .expect("staged instance is solvable");
        assert!(validate_relational(&ontology, &services, &query, &comp).unwrap());
    }

    #[test]
    fn rules_shorten_compositions() {
        let mut strict = 0;
        for seed in 0..8 {
            let cfg = GenConfig {
                num_stages: 3,
                num_rules: 1,
                num_ws_in_solution: 4,
                num_web_services: 4,
                pars_per_service: 3,
                seed,
                ..Default::default()
            };
            let (instance, _) = generate_relational_instance(&cfg).unwrap();
            let (ontology, services, query) = instance.load().unwrap();
            let with_rules = search_composition_relational(
                &ontology,
                &services,
                &query,
                RelOptions::default(),
            )
            .expect("solvable with rules");
            let without = search_composition_relational(
                &ontology,
                &services,
                &query,
                RelOptions { ignore_rules: true, ..Default::default() },
            )
            .expect("bypass keeps it solvable without rules");
            assert!(
                with_rules.service_calls() <= without.service_calls(),
                "seed {seed}: {} > {}",
                with_rules.service_calls(),
                without.service_calls()
            );
            if with_rules.service_calls() < without.service_calls() {
                strict += 1;
            }
        }
        assert!(strict >= 4, "rules almost never helped: {strict}/8");
    }

    #[test]
    fn zero_noise_zero_relations_reduces_to_name_like_instance() {
        let cfg = GenConfig {
            num_stages: 2,
            num_rules: 0,
            noise_fraction: 0.0,
            num_relations: 1, // declared but barely used
            num_ws_in_solution: 2,
            num_web_services: 2,
            seed: 4,
            ..Default::default()
        };
        let (instance, truth) = generate_relational_instance(&cfg).unwrap();
        assert!(instance.rules.is_empty());
        assert!(!truth.planted_chain.is_empty());
        let (ontology, services, query) = instance.load().unwrap();
        assert!(search_composition_relational(
            &ontology,
            &services,
            &query,
            RelOptions::default()
        )
        .is_some());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig { seed: 11, num_web_services: 6, num_ws_in_solution: 4, ..Default::default() };
        let a = generate_relational_instance(&cfg).unwrap();
        let b = generate_relational_instance(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a.0).unwrap(), serde_json::to_string(&b.0).unwrap());
        assert_eq!(serde_json::to_string(&a.1).unwrap(), serde_json::to_string(&b.1).unwrap());
    }
}
