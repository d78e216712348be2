//! `composer` - command line for the composition engines.
//!
//! Exit codes: 0 solved/valid, 1 unsolvable/invalid, 2 input error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use composer_core::gen::{self, GenConfig};
use composer_core::hierarchical;
use composer_core::instance::{
    outcome_event_name, CompositionFile, Instance, OutcomeEventDef, RelCompositionFile, StreamOp,
};
use composer_core::name_engine::{self, PickStrategy, SolveOptions};
use composer_core::online::{OnlineOptions, OnlineState};
use composer_core::oo;
use composer_core::relational::{self, RelOptions};
use composer_core::validate::validate_composition;

#[derive(Parser)]
#[command(name = "composer", version, about = "Automatic web service composition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Name,
    Hierarchical,
    Relational,
    Oo,
    Online,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and emit the composition.
    Solve(SolveArgs),
    /// Check a composition against an instance.
    Validate(ValidateArgs),
    /// Generate a seeded instance with its ground-truth manifest.
    Generate(GenerateArgs),
    /// Solve every instance in a directory and report one row each.
    Bench(BenchArgs),
    /// Replay an online event stream and emit outcome events.
    Online(OnlineArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    instance: PathBuf,
    /// Pick accessible services by name instead of by score (name model).
    #[arg(long)]
    no_scores: bool,
    /// Skip the reduction pass (name model).
    #[arg(long)]
    no_reduce: bool,
    /// Skip user inference rules (relational model).
    #[arg(long)]
    ignore_rules: bool,
    /// Calls allowed per (service, input type multiset) (relational model).
    #[arg(long, default_value_t = 4)]
    object_cap: usize,
    /// Run the backward shortening sweep (oo model; off by default).
    #[arg(long)]
    reduce: bool,
    /// Where to write the composition JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    composition: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Generator config JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for instance.json + groundtruth.json (events.jsonl
    /// for the online model).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of instance JSON files.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OnlineArgs {
    /// JSON-lines event stream.
    #[arg(long)]
    stream: PathBuf,
    /// Defer backup computation instead of running it inline.
    #[arg(long = "async")]
    deferred: bool,
    /// Outcome JSON-lines file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RunReport {
    model: String,
    solve_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    length: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    execution_path: Option<usize>,
    valid: bool,
    solved: bool,
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}

fn run() -> anyhow::Result<i32> {
    match Cli::parse().command {
        Command::Solve(args) => solve(args),
        Command::Validate(args) => validate(args),
        Command::Generate(args) => generate(args),
        Command::Bench(args) => bench(args),
        Command::Online(args) => online(args),
    }
}

fn read_instance(path: &Path) -> anyhow::Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn model_matches(model: Model, instance: &Instance) -> anyhow::Result<()> {
    let tag = instance.model();
    let wanted = match model {
        Model::Name => "name",
        Model::Hierarchical => "hierarchical",
        Model::Relational => "relational",
        Model::Oo => "oo",
        Model::Online => bail!("the online model reads event streams, not instances"),
    };
    if tag != wanted {
        bail!("instance is tagged `{tag}` but --model {wanted} was requested");
    }
    Ok(())
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Solve result reduced to what the report and exit code need.
struct Solved {
    report: RunReport,
    composition: Option<serde_json::Value>,
}

fn solve_instance(instance: &Instance, args: &SolveArgs) -> anyhow::Result<Solved> {
    match instance {
        Instance::Name(def) => {
            let (registry, repo, req) = def.load()?;
            let opts = SolveOptions {
                strategy: if args.no_scores {
                    PickStrategy::NameOrder
                } else {
                    PickStrategy::Scored
                },
                reduce: !args.no_reduce,
            };
            let started = Instant::now();
            let comp = name_engine::find_composition_with(&registry, &repo, &req, opts);
            let solve_ms = started.elapsed().as_secs_f64() * 1e3;
            match comp {
                Some(comp) => {
                    let valid = validate_composition(&repo, &req, &comp)?.valid;
                    Ok(Solved {
                        report: RunReport {
                            model: "name".into(),
                            solve_ms,
                            length: Some(comp.len()),
                            execution_path: None,
                            valid,
                            solved: true,
                        },
                        composition: Some(serde_json::to_value(
                            CompositionFile::from_composition(&comp, None),
                        )?),
                    })
                }
                None => Ok(Solved { report: unsolved("name", solve_ms), composition: None }),
            }
        }
        Instance::Hierarchical(def) => {
            let (tax, repo, req) = def.load()?;
            let started = Instant::now();
            let comp = hierarchical::find_composition_hierarchical(&repo, &tax, &req);
            let solve_ms = started.elapsed().as_secs_f64() * 1e3;
            match comp {
                Some(comp) => {
                    let valid = hierarchical::validate_hierarchical(&repo, &tax, &req, &comp)?;
                    let path = hierarchical::execution_path(&comp)?;
                    Ok(Solved {
                        report: RunReport {
                            model: "hierarchical".into(),
                            solve_ms,
                            length: Some(comp.len()),
                            execution_path: Some(path),
                            valid,
                            solved: true,
                        },
                        composition: Some(serde_json::to_value(
                            CompositionFile::from_composition(&comp, Some(path)),
                        )?),
                    })
                }
                None => {
                    Ok(Solved { report: unsolved("hierarchical", solve_ms), composition: None })
                }
            }
        }
        Instance::Relational(def) => {
            let (ontology, services, query) = def.load()?;
            let opts = RelOptions {
                ignore_rules: args.ignore_rules,
                object_cap: args.object_cap,
                ..Default::default()
            };
            let started = Instant::now();
            let comp =
                relational::search_composition_relational(&ontology, &services, &query, opts);
            let solve_ms = started.elapsed().as_secs_f64() * 1e3;
            match comp {
                Some(comp) => {
                    let valid =
                        relational::validate_relational(&ontology, &services, &query, &comp)?;
                    Ok(Solved {
                        report: RunReport {
                            model: "relational".into(),
                            solve_ms,
                            length: Some(comp.service_calls()),
                            execution_path: None,
                            valid,
                            solved: true,
                        },
                        composition: Some(serde_json::to_value(
                            RelCompositionFile::from_composition(&comp),
                        )?),
                    })
                }
                None => Ok(Solved { report: unsolved("relational", solve_ms), composition: None }),
            }
        }
        Instance::Oo(def) => {
            let (tree, repo, query) = def.load()?;
            let started = Instant::now();
            let comp = oo::find_comp_with_reduce(&repo, &tree, &query, args.reduce);
            let solve_ms = started.elapsed().as_secs_f64() * 1e3;
            match comp {
                Some(comp) => {
                    let valid = oo::validate_oo(&repo, &tree, &query, &comp)?;
                    Ok(Solved {
                        report: RunReport {
                            model: "oo".into(),
                            solve_ms,
                            length: Some(comp.len()),
                            execution_path: None,
                            valid,
                            solved: true,
                        },
                        composition: Some(serde_json::to_value(
                            CompositionFile::from_composition(&comp, None),
                        )?),
                    })
                }
                None => Ok(Solved { report: unsolved("oo", solve_ms), composition: None }),
            }
        }
    }
}

fn unsolved(model: &str, solve_ms: f64) -> RunReport {
    RunReport {
        model: model.into(),
        solve_ms,
        length: None,
        execution_path: None,
        valid: false,
        solved: false,
    }
}

fn solve(args: SolveArgs) -> anyhow::Result<i32> {
    let instance = read_instance(&args.instance)?;
    model_matches(args.model, &instance)?;
    let solved = solve_instance(&instance, &args)?;
    match &solved.composition {
        Some(comp) => {
            write_json(args.out.as_deref(), comp)?;
            println!("{}", serde_json::to_string(&solved.report)?);
            if !solved.report.valid {
                bail!("engine output failed re-validation");
            }
            Ok(0)
        }
        None => {
            println!("{}", serde_json::to_string(&solved.report)?);
            Ok(1)
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ValidateReport {
    valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    goal_covered: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_violation: Option<Violation>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Violation {
    position: usize,
    missing: Vec<String>,
}

fn validate(args: ValidateArgs) -> anyhow::Result<i32> {
    let instance = read_instance(&args.instance)?;
    model_matches(args.model, &instance)?;
    let text = fs::read_to_string(&args.composition)
        .with_context(|| format!("reading {}", args.composition.display()))?;

    let report = match &instance {
        Instance::Name(def) => {
            let (registry, repo, req) = def.load()?;
            let file: CompositionFile = serde_json::from_str(&text)?;
            let report = validate_composition(&repo, &req, &file.to_composition())?;
            ValidateReport {
                valid: report.valid,
                goal_covered: Some(report.goal_covered),
                first_violation: report.first_violation.map(|(position, ids)| Violation {
                    position,
                    missing: ids.iter().map(|id| registry.name(*id)).collect(),
                }),
            }
        }
        Instance::Hierarchical(def) => {
            let (tax, repo, req) = def.load()?;
            let file: CompositionFile = serde_json::from_str(&text)?;
            let valid =
                hierarchical::validate_hierarchical(&repo, &tax, &req, &file.to_composition())?;
            ValidateReport { valid, goal_covered: None, first_violation: None }
        }
        Instance::Relational(def) => {
            let (ontology, services, query) = def.load()?;
            let file: RelCompositionFile = serde_json::from_str(&text)?;
            let valid = relational::validate_relational(
                &ontology,
                &services,
                &query,
                &file.to_composition(),
            )?;
            ValidateReport { valid, goal_covered: None, first_violation: None }
        }
        Instance::Oo(def) => {
            let (tree, repo, query) = def.load()?;
            let file: CompositionFile = serde_json::from_str(&text)?;
            let valid = oo::validate_oo(&repo, &tree, &query, &file.to_composition())?;
            ValidateReport { valid, goal_covered: None, first_violation: None }
        }
    };
    println!("{}", serde_json::to_string(&report)?);
    Ok(if report.valid { 0 } else { 1 })
}

fn generate(args: GenerateArgs) -> anyhow::Result<i32> {
    let mut cfg: GenConfig = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text)?
        }
        None => GenConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    fs::create_dir_all(&args.out)?;

    let truth = match args.model {
        Model::Name => {
            let (instance, truth) = gen::generate_name_instance(&cfg)?;
            write_json(Some(&args.out.join("instance.json")), &Instance::Name(instance))?;
            truth
        }
        Model::Hierarchical => {
            let (instance, truth) = gen::generate_hierarchical_instance(&cfg)?;
            write_json(Some(&args.out.join("instance.json")), &Instance::Hierarchical(instance))?;
            truth
        }
        Model::Relational => {
            let (instance, truth) = gen::generate_relational_instance(&cfg)?;
            write_json(Some(&args.out.join("instance.json")), &Instance::Relational(instance))?;
            truth
        }
        Model::Oo => {
            let (instance, truth) = gen::generate_oo_instance(&cfg)?;
            write_json(Some(&args.out.join("instance.json")), &Instance::Oo(instance))?;
            truth
        }
        Model::Online => {
            let (ops, truth) = gen::generate_online_scenario(&cfg)?;
            let mut lines = String::new();
            for op in &ops {
                lines.push_str(&serde_json::to_string(op)?);
                lines.push('\n');
            }
            fs::write(args.out.join("events.jsonl"), lines)?;
            truth
        }
    };
    write_json(Some(&args.out.join("groundtruth.json")), &truth)?;
    Ok(0)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct BenchRow {
    file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solve_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    length: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    execution_path: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    valid: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn bench(args: BenchArgs) -> anyhow::Result<i32> {
    let mut files: Vec<PathBuf> = fs::read_dir(&args.dir)
        .with_context(|| format!("reading {}", args.dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();

    let solve_defaults = SolveArgs {
        model: Model::Name, // solve_instance dispatches on the tag, not this
        instance: PathBuf::new(),
        no_scores: false,
        no_reduce: false,
        ignore_rules: false,
        object_cap: 4,
        reduce: false,
        out: None,
    };
    let mut rows = Vec::new();
    for file in files {
        let display = file.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let row = match read_instance(&file).and_then(|inst| {
            solve_instance(&inst, &solve_defaults).map(|s| (inst.model().to_owned(), s))
        }) {
            Ok((model, solved)) => BenchRow {
                file: display,
                model: Some(model),
                solve_ms: Some(solved.report.solve_ms),
                length: solved.report.length,
                execution_path: solved.report.execution_path,
                valid: Some(solved.report.valid),
                error: None,
            },
            Err(err) => BenchRow {
                file: display,
                model: None,
                solve_ms: None,
                length: None,
                execution_path: None,
                valid: None,
                error: Some(format!("{err:#}")),
            },
        };
        rows.push(row);
    }

    let text = match args.format {
        Format::Json => {
            let mut t = serde_json::to_string_pretty(&rows)?;
            t.push('\n');
            t
        }
        Format::Csv => {
            let mut t = String::from("file,model,solveMs,length,executionPath,valid,error\n");
            for r in &rows {
                t.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.file,
                    r.model.clone().unwrap_or_default(),
                    r.solve_ms.map(|v| format!("{v:.3}")).unwrap_or_default(),
                    r.length.map(|v| v.to_string()).unwrap_or_default(),
                    r.execution_path.map(|v| v.to_string()).unwrap_or_default(),
                    r.valid.map(|v| v.to_string()).unwrap_or_default(),
                    r.error.clone().unwrap_or_default().replace(',', ";"),
                ));
            }
            t
        }
    };
    match &args.out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn online(args: OnlineArgs) -> anyhow::Result<i32> {
    let text = fs::read_to_string(&args.stream)
        .with_context(|| format!("reading {}", args.stream.display()))?;
    let opts = OnlineOptions { synchronous_backups: !args.deferred, ..Default::default() };
    let mut state = OnlineState::new(opts);
    let mut events: Vec<OutcomeEventDef> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let op: StreamOp = serde_json::from_str(line)
            .with_context(|| format!("line {}: bad event", lineno + 1))?;
        // In deferred mode queued backups finish before the next operation
        // unless a removal wins the race.
        if args.deferred && !matches!(op, StreamOp::RemoveService { .. }) {
            state.process_pending_backups();
        }
        let outcomes = match op {
            StreamOp::RegisterService { name, inputs, outputs } => {
                state.register_service(&name, &inputs, &outputs).map_err(|e| anyhow!(e))?
            }
            StreamOp::RemoveService { name } => {
                state.remove_service(&name).map_err(|e| anyhow!(e))?
            }
            StreamOp::FindComposition { id, known, required } => {
                vec![state.find_composition(&id, &known, &required).map_err(|e| anyhow!(e))?]
            }
            StreamOp::DropRequest { id } => {
                state.drop_request(&id).map_err(|e| anyhow!(e))?;
                Vec::new()
            }
        };
        for outcome in outcomes {
            if let Some(event) = outcome_event_name(outcome.kind) {
                events.push(OutcomeEventDef {
                    event: event.into(),
                    id: outcome.query_id,
                    calls: outcome.calls,
                });
            }
        }
    }

    let mut out = String::new();
    for event in &events {
        out.push_str(&serde_json::to_string(event)?);
        out.push('\n');
    }
    match &args.out {
        Some(p) => fs::write(p, out)?,
        None => {
            print!("{out}");
            std::io::stdout().flush()?;
        }
    }
    Ok(0)
}
