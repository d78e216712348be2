//! Online scenario generator: per query a strictly linked main chain plus a
//! planted alternative - a path replacing one service, a path replacing the
//! whole suffix, or nothing - and deletion events targeting main members,
//! backup members and irreplaceable services, so every failover branch
//! fires.

use super::*;

/// Parameters are handed out from a shared pool; each query's chain links
/// through dedicated parameters so the planted structure stays in control.
struct ParamPool {
    total: usize,
    next: usize,
}

impl ParamPool {
    fn take(&mut self) -> String {
        let name = format!("p{}", self.next % self.total);
        self.next += 1;
        name
    }
}

pub fn generate_online_scenario(cfg: &GenConfig) -> Result<(Vec<StreamOp>, GroundTruth)> {
    cfg.validate()?;
    if cfg.num_queries == 0 {
        return Err(Error::InvalidConfig("online generation needs at least 1 query".into()));
    }
    let chain_len = cfg.num_ws_in_solution.max(2);
    let mut pool = ParamPool { total: cfg.num_parameters, next: 0 };
    let mut rng = phase_rng(cfg.seed, phases::CHAIN);

    let mut ops: Vec<StreamOp> = Vec::new();
    let mut registered = 0usize;
    let register = |ops: &mut Vec<StreamOp>, registered: &mut usize, name: String, ins: Vec<String>, outs: Vec<String>| {
        ops.push(StreamOp::RegisterService { name, inputs: ins, outputs: outs });
        *registered += 1;
    };

    let mut planted: Vec<PlantedBackup> = Vec::new();
    let mut deletions: Vec<String> = Vec::new();
    let mut queries: Vec<StreamOp> = Vec::new();

    for q in 0..cfg.num_queries {
        // strictly linked chain: service i consumes link i-1, produces link i
        let links: Vec<String> = (0..=chain_len).map(|_| pool.take()).collect();
        let main: Vec<String> =
            (1..=chain_len).map(|i| format!("q{q}_m{i}")).collect();
        for i in 1..=chain_len {
            register(
                &mut ops,
                &mut registered,
                main[i - 1].clone(),
                vec![links[i - 1].clone()],
                vec![links[i].clone()],
            );
        }

        // plant an alternative around one chain member; a suffix plant
        // needs a nonempty suffix so the one-service replacement query
        // genuinely fails
        let kind = match q % 3 {
            0 => "replacement",
            1 => "suffix",
            _ => "none",
        };
        let j = match kind {
            "suffix" => rng.gen_range(1..chain_len),
            _ => rng.gen_range(1..=chain_len),
        };
        let target = main[j - 1].clone();
        let mut alternative = Vec::new();
        match kind {
            "replacement" => {
                // a two-service path re-deriving link j from link j-1
                let aux = pool.take();
                let y1 = format!("q{q}_y1");
                let y2 = format!("q{q}_y2");
                register(&mut ops, &mut registered, y1.clone(), vec![links[j - 1].clone()], vec![aux.clone()]);
                register(&mut ops, &mut registered, y2.clone(), vec![aux], vec![links[j].clone()]);
                alternative = vec![y1, y2];
            }
            "suffix" => {
                // re-derives the final link from link j-1, deliberately one
                // hop longer than the rest of the main chain so the engine
                // prefers the main at solve time and finds this path only
                // through the suffix query
                let hops = chain_len - j + 2;
                let mut carry = links[j - 1].clone();
                for h in 1..=hops {
                    let name = format!("q{q}_z{h}");
                    let out = if h == hops { links[chain_len].clone() } else { pool.take() };
                    register(&mut ops, &mut registered, name.clone(), vec![carry.clone()], vec![out.clone()]);
                    alternative.push(name);
                    carry = out;
                }
            }
            _ => {}
        }

        queries.push(StreamOp::FindComposition {
            id: format!("q{q}"),
            known: vec![links[0].clone()],
            required: vec![links[chain_len].clone()],
        });

        // deletion plan: replacement sites alternate between deleting a
        // backup member (recompute branch) and the target itself (swap);
        // suffix sites delete the target (swap); bare sites delete the
        // target (re-solve, which fails here: the chain is irreplaceable).
        let (deleted, expected) = match kind {
            "replacement" if q % 2 == 0 => (alternative[0].clone(), "backup_recomputed"),
            "replacement" => (target.clone(), "swapped_to_backup"),
            "suffix" => (target.clone(), "swapped_to_backup"),
            _ => (target.clone(), "request_lost"),
        };
        deletions.push(deleted);
        planted.push(PlantedBackup {
            query: format!("q{q}"),
            main: main.clone(),
            target,
            kind: kind.into(),
            alternative,
            expected_outcome: expected.into(),
        });
    }

    // noise services up to the requested repository size, never callable
    // (they wait on a parameter nobody produces)
    let poison = "never".to_string();
    let mut n = 0;
    while registered < cfg.num_web_services {
        let ins = vec![poison.clone(), pool.take()];
        let outs = vec![pool.take()];
        register(&mut ops, &mut registered, format!("noise{n}"), ins, outs);
        n += 1;
    }

    ops.extend(queries);
    ops.extend(deletions.iter().map(|name| StreamOp::RemoveService { name: name.clone() }));

    let truth = GroundTruth {
        model: "online".into(),
        planted_chain: Vec::new(),
        planted_backups: planted,
        deletions,
        ..Default::default()
    };
    Ok((ops, truth))
}
