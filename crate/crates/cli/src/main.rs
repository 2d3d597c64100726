//! `sdvbench` — evaluate LLM-generated vehicle signal scripts.
//!
//! Subcommands mirror the pipeline stages: inspect a signal catalog,
//! assemble system prompts, validate benchmark data, analyze scripts,
//! score candidates, and orchestrate full evaluation runs with reports,
//! ablations, and significance tests.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sdvbench_core::analysis::{self, SyntaxNode};
use sdvbench_core::benchmark::{load_benchmark, validate_benchmark};
use sdvbench_core::catalog::{parse_catalog, render_api_listing, SignalTree};
use sdvbench_core::gateway::{Gateway, ResponseCache};
use sdvbench_core::metrics::{compute_report, CodeBleuWeights, HashEmbedder, MetricConfig};
use sdvbench_core::prompt::{assemble, load_bundle, PromptConfig, PromptMode};
use sdvbench_core::runner::{
    self, aggregate, build_registry, compare, load_run_config, metric_config_for, render_report,
    MetricColumn, ReportFormat, ResultSet, RunConfig, RunContext, RunMatrix, SignificanceTest,
    Technique,
};

#[derive(Parser)]
#[command(
    name = "sdvbench",
    version,
    about = "Benchmark harness for LLM-generated vehicle signal scripts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect and validate a signal catalog
    #[command(subcommand)]
    Catalog(CatalogAction),
    /// Assemble system prompts from a bundle
    #[command(subcommand)]
    Prompt(PromptAction),
    /// Validate benchmark datasets
    #[command(subcommand)]
    Bench(BenchAction),
    /// Parse scripts and inspect their structure
    #[command(subcommand)]
    Analyze(AnalyzeAction),
    /// Score a candidate script against a reference
    Score(ScoreArgs),
    /// Execute the models x techniques x items run matrix
    Run(RunArgs),
    /// Render report tables from persisted results
    Report(ReportArgs),
    /// Aggregate scores per prompt-section subset
    Ablate(AblateArgs),
    /// Paired significance test between two result groups
    Compare(CompareArgs),
}

#[derive(Subcommand)]
enum CatalogAction {
    /// Parse a catalog export and report its shape
    Validate { file: PathBuf },
    /// Print the flattened signal table
    List { file: PathBuf },
    /// Print the API-listing prompt section
    Render { file: PathBuf },
}

#[derive(Subcommand)]
enum PromptAction {
    /// Render a system prompt for one mode
    Assemble(AssembleArgs),
}

#[derive(Args)]
struct AssembleArgs {
    /// few-shot, zero-shot, or original
    #[arg(long)]
    mode: PromptMode,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
    /// Comma-separated section ids to keep (ablation)
    #[arg(long, value_delimiter = ',')]
    sections: Option<Vec<String>>,
    /// Comma-separated exemplar ids to keep
    #[arg(long, value_delimiter = ',')]
    exemplars: Option<Vec<String>>,
    /// Write the rendered prompt here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchAction {
    /// Load a benchmark directory and check it against a catalog
    Validate {
        #[arg(long)]
        catalog: PathBuf,
        dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum AnalyzeAction {
    /// Print the syntax tree of a script
    Parse { file: PathBuf },
    /// Print the normalized def-use graph of a script
    Dataflow { file: PathBuf },
}

#[derive(Args)]
struct ScoreArgs {
    /// Candidate script
    #[arg(long)]
    cand: PathBuf,
    /// Reference script
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Catalog whose signal names weight the n-gram match
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// CodeBLEU weights as alpha,beta,gamma,delta
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Forbid network even if the config allows it
    #[arg(long)]
    offline: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// results.jsonl file (or the directory containing it)
    #[arg(long)]
    results: PathBuf,
    #[arg(long, default_value = "md")]
    format: ReportFormat,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "md")]
    format: ReportFormat,
    /// Forbid network even if the config allows it
    #[arg(long)]
    offline: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// results.jsonl file (or the directory containing it)
    #[arg(long)]
    results: PathBuf,
    /// First group as model:technique (model may be omitted if unambiguous)
    #[arg(long)]
    a: String,
    /// Second group, same form
    #[arg(long)]
    b: String,
    #[arg(long, default_value = "wilcoxon")]
    test: SignificanceTest,
    #[arg(long, default_value = "codebleu")]
    metric: MetricColumn,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Catalog(action) => catalog_command(action),
        Command::Prompt(PromptAction::Assemble(args)) => prompt_assemble(args),
        Command::Bench(BenchAction::Validate { catalog, dir }) => bench_validate(&catalog, &dir),
        Command::Analyze(action) => analyze_command(action),
        Command::Score(args) => score(args),
        Command::Run(args) => run_matrix(args),
        Command::Report(args) => report(args),
        Command::Ablate(args) => ablate_command(args),
        Command::Compare(args) => compare_command(args),
    }
}

fn read_catalog(path: &Path) -> Result<SignalTree> {
    let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_catalog(&raw).with_context(|| format!("parsing catalog {}", path.display()))
}

fn catalog_command(action: CatalogAction) -> Result<ExitCode> {
    match action {
        CatalogAction::Validate { file } => {
            let tree = read_catalog(&file)?;
            println!(
                "ok: {} leaf signals under {:?}",
                tree.leaf_count(),
                tree.root().path
            );
        }
        CatalogAction::List { file } => {
            let tree = read_catalog(&file)?;
            for entry in tree.flatten() {
                println!(
                    "{}\t{}\t{}\t{}",
                    entry.path,
                    entry.kind.tag(),
                    entry.datatype.tag(),
                    entry.unit.as_deref().unwrap_or("-"),
                );
            }
        }
        CatalogAction::Render { file } => {
            let tree = read_catalog(&file)?;
            print!("{}", render_api_listing(&tree.flatten())?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn prompt_assemble(args: AssembleArgs) -> Result<ExitCode> {
    let catalog = read_catalog(&args.catalog)?;
    let bundle = load_bundle(&args.bundle)?;
    let config = PromptConfig {
        mode: args.mode,
        included_section_ids: args.sections,
        exemplar_ids: args.exemplars,
    };
    let prompt = assemble(&config, &catalog, &bundle)?;
    eprintln!(
        "mode: {}  sections: {}  fingerprint: {}",
        args.mode,
        prompt.section_ids().join(","),
        prompt.fingerprint
    );
    match args.out {
        Some(path) => fs::write(&path, &prompt.rendered_text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", prompt.rendered_text),
    }
    Ok(ExitCode::SUCCESS)
}

fn bench_validate(catalog_path: &Path, dir: &Path) -> Result<ExitCode> {
    let catalog = read_catalog(catalog_path)?;
    let benchmark = load_benchmark(dir)?;
    let counts = benchmark.counts();
    println!(
        "loaded {} items across {} use cases",
        counts.total,
        benchmark.use_cases().len()
    );
    let violations = validate_benchmark(&benchmark, &catalog);
    for violation in &violations {
        println!(
            "violation: {}/{}: {}",
            violation.use_case_id, violation.complexity, violation.message
        );
    }
    if violations.is_empty() {
        println!("no violations");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{} violation(s)", violations.len());
        Ok(ExitCode::FAILURE)
    }
}

fn analyze_command(action: AnalyzeAction) -> Result<ExitCode> {
    match action {
        AnalyzeAction::Parse { file } => {
            let source =
                fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let tree = analysis::parse(&source)?;
            let mut out = String::new();
            print_tree(tree.root(), 0, &mut out);
            print!("{out}");
        }
        AnalyzeAction::Dataflow { file } => {
            let source =
                fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let tree = analysis::parse(&source)?;
            let graph = analysis::extract_dataflow(&tree);
            println!("defs: {}  uses: {}  edges: {}", graph.defs.len(), graph.uses.len(), graph.edges.len());
            for edge in &graph.edges {
                println!("{edge}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn print_tree(node: &SyntaxNode, depth: usize, out: &mut String) {
    let indent = "  ".repeat(depth);
    match &node.text {
        Some(text) => {
            let _ = writeln!(out, "{indent}{} {text:?} (line {})", node.kind, node.span.line);
        }
        None => {
            let _ = writeln!(out, "{indent}{} (line {})", node.kind, node.span.line);
        }
    }
    for child in &node.children {
        print_tree(child, depth + 1, out);
    }
}

fn score(args: ScoreArgs) -> Result<ExitCode> {
    let candidate = fs::read_to_string(&args.cand)
        .with_context(|| format!("reading {}", args.cand.display()))?;
    let reference = fs::read_to_string(&args.reference)
        .with_context(|| format!("reading {}", args.reference.display()))?;
    let weights = match args.weights.as_deref() {
        Some([alpha, beta, gamma, delta]) => CodeBleuWeights::new(*alpha, *beta, *gamma, *delta)?,
        Some(other) => bail!("--weights needs exactly 4 values, got {}", other.len()),
        None => CodeBleuWeights::default(),
    };
    let config = match &args.catalog {
        Some(path) => metric_config_for(&read_catalog(path)?, weights),
        None => MetricConfig {
            weights,
            ..MetricConfig::default()
        },
    };
    let embedder = HashEmbedder::default();
    let report = compute_report(&candidate, &reference, &embedder, &config)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

/// Everything a run or ablation needs, loaded from one config file.
struct LoadedWorld {
    config: RunConfig,
    catalog: SignalTree,
    bundle: sdvbench_core::prompt::PromptBundle,
    benchmark: sdvbench_core::benchmark::Benchmark,
    gateway: Gateway,
    embedder: HashEmbedder,
}

fn load_world(config_path: &Path, force_offline: bool) -> Result<LoadedWorld> {
    let config = load_run_config(config_path)?;
    let catalog = read_catalog(&config.catalog)?;
    let bundle = load_bundle(&config.bundle)?;
    let benchmark = load_benchmark(&config.benchmark)?;
    let registry = build_registry(&config.providers)?;
    let gateway = Gateway::new(registry, ResponseCache::new(&config.cache))
        .offline(config.offline || force_offline);
    Ok(LoadedWorld {
        config,
        catalog,
        bundle,
        benchmark,
        gateway,
        embedder: HashEmbedder::default(),
    })
}

fn matrix_from(world: &LoadedWorld) -> Result<RunMatrix> {
    if world.config.models.is_empty() {
        bail!("config lists no models");
    }
    if world.config.techniques.is_empty() {
        bail!("config lists no techniques");
    }
    let techniques: Vec<Technique> = world
        .config
        .techniques
        .iter()
        .map(|t| t.to_technique())
        .collect();
    Ok(RunMatrix {
        models: world.config.models.clone(),
        techniques,
        items: world.benchmark.clone(),
        weights: world.config.weights,
    })
}

fn context_of(world: &LoadedWorld) -> RunContext<'_> {
    RunContext {
        gateway: &world.gateway,
        catalog: &world.catalog,
        bundle: &world.bundle,
        embedder: &world.embedder,
        max_attempts: world.config.max_attempts,
        workers: world.config.workers,
    }
}

fn run_matrix(args: RunArgs) -> Result<ExitCode> {
    let world = load_world(&args.config, args.offline)?;
    let matrix = matrix_from(&world)?;
    let results = runner::run(&matrix, &context_of(&world))?;
    let out = world
        .config
        .results
        .clone()
        .unwrap_or_else(|| PathBuf::from("results.jsonl"));
    results.write_jsonl(&out)?;
    let failed = results.results().iter().filter(|r| r.error.is_some()).count();
    eprintln!(
        "{} results ({} with errors) -> {}",
        results.len(),
        failed,
        out.display()
    );
    let rows = aggregate(results.results())?;
    print!("{}", render_report(&rows, ReportFormat::Markdown)?);
    Ok(ExitCode::SUCCESS)
}

fn results_path(given: &Path) -> PathBuf {
    if given.is_dir() {
        given.join("results.jsonl")
    } else {
        given.to_path_buf()
    }
}

fn report(args: ReportArgs) -> Result<ExitCode> {
    let results = ResultSet::read_jsonl(&results_path(&args.results))?;
    let rows = aggregate(results.results())?;
    print!("{}", render_report(&rows, args.format)?);
    Ok(ExitCode::SUCCESS)
}

fn ablate_command(args: AblateArgs) -> Result<ExitCode> {
    let world = load_world(&args.config, args.offline)?;
    if world.config.models.is_empty() {
        bail!("config lists no models");
    }
    let ablation = world
        .config
        .ablation
        .as_ref()
        .with_context(|| "config has no [ablation] table")?;
    let model = match &ablation.model {
        Some(label) => world
            .config
            .models
            .iter()
            .find(|m| &m.label() == label)
            .with_context(|| format!("ablation model {label:?} not in config models"))?
            .clone(),
        None => world.config.models[0].clone(),
    };
    let rows = runner::ablate(
        &model,
        &ablation.subsets,
        &world.benchmark,
        world.config.weights,
        &context_of(&world),
    )?;
    print!("{}", render_report(&rows, args.format)?);
    Ok(ExitCode::SUCCESS)
}

/// Parse a `model:technique` or bare `technique` group selector.
fn select_group<'r>(
    results: &'r ResultSet,
    selector: &str,
) -> Result<Vec<&'r sdvbench_core::runner::RunResult>> {
    let models: BTreeSet<&str> = results.results().iter().map(|r| r.model.as_str()).collect();
    let (model, technique) = match selector.rsplit_once(':') {
        Some((model, technique)) => (model.to_string(), technique.to_string()),
        None => {
            if models.len() > 1 {
                bail!(
                    "selector {selector:?} is ambiguous: results span models {models:?}; use model:technique"
                );
            }
            let model = models.iter().next().copied().unwrap_or_default().to_string();
            (model, selector.to_string())
        }
    };
    let group = results.select(&model, &technique);
    if group.is_empty() {
        bail!("no results for model {model:?}, technique {technique:?}");
    }
    Ok(group)
}

fn compare_command(args: CompareArgs) -> Result<ExitCode> {
    let results = ResultSet::read_jsonl(&results_path(&args.results))?;
    let group_a = select_group(&results, &args.a)?;
    let group_b = select_group(&results, &args.b)?;
    let outcome = compare(&group_a, &group_b, args.test, args.metric)?;
    println!(
        "{} | {} on {} | n = {} | statistic = {:.6} | p = {:.6e}",
        outcome.comparison, outcome.test, outcome.metric, outcome.n, outcome.statistic,
        outcome.p_value,
    );
    Ok(ExitCode::SUCCESS)
}
