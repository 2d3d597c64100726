//! Evaluation orchestration: execute the models × techniques × items run
//! matrix, persist per-item results, aggregate them into report rows, run
//! paired significance tests, and drive prompt-section ablations.

pub mod report;
pub mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis;
use crate::benchmark::{Benchmark, BenchmarkItem};
use crate::catalog::SignalTree;
use crate::gateway::{Gateway, ModelSpec, ProviderRegistry};
use crate::metrics::{
    compute_report, CodeBleuWeights, EmbeddingProvider, MetricConfig, MetricReport,
};
use crate::prompt::{assemble, PromptBundle, PromptConfig, PromptMode, SystemPrompt};

pub use report::{aggregate, render_report, AggregateRow, ReportFormat};
pub use stats::{
    paired_t, wilcoxon_signed_rank, SignificanceResult, SignificanceTest, StatsError,
    WILCOXON_EXACT_LIMIT,
};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("render error: {0}")]
    Render(String),
    #[error("results are not paired: {0}")]
    Unpaired(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid results line {line}: {message}")]
    Results { line: usize, message: String },
    #[error(transparent)]
    Prompt(#[from] crate::prompt::PromptError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// One prompting configuration under evaluation, with the label used in
/// result records and report rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Technique {
    pub label: String,
    pub config: PromptConfig,
}

impl Technique {
    pub fn new(label: &str, config: PromptConfig) -> Self {
        Self {
            label: label.to_string(),
            config,
        }
    }
}

/// The full run grid. Axes must be non-empty and labels unique.
#[derive(Debug, Clone)]
pub struct RunMatrix {
    pub models: Vec<ModelSpec>,
    pub techniques: Vec<Technique>,
    pub items: Benchmark,
    pub weights: CodeBleuWeights,
}

impl RunMatrix {
    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.models.is_empty() {
            return Err(RunnerError::EmptyInput("run matrix has no models".into()));
        }
        if self.techniques.is_empty() {
            return Err(RunnerError::EmptyInput("run matrix has no techniques".into()));
        }
        if self.items.is_empty() {
            return Err(RunnerError::EmptyInput("run matrix has no benchmark items".into()));
        }
        let mut labels = BTreeSet::new();
        for model in &self.models {
            if !labels.insert(model.label()) {
                return Err(RunnerError::Config(format!(
                    "duplicate model label {:?}",
                    model.label()
                )));
            }
        }
        labels.clear();
        for technique in &self.techniques {
            if !labels.insert(technique.label.clone()) {
                return Err(RunnerError::Config(format!(
                    "duplicate technique label {:?}",
                    technique.label
                )));
            }
        }
        self.weights
            .validate()
            .map_err(|e| RunnerError::Config(e.to_string()))
    }

    pub fn cell_count(&self) -> usize {
        self.models.len() * self.techniques.len() * self.items.len()
    }
}

/// Pointer into the response cache; deliberately excludes the record's
/// timestamp so persisted results are byte-stable across replays.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordRef {
    pub fingerprint: String,
    pub attempt: u32,
    pub valid: bool,
}

/// One matrix cell's outcome. Failures never abort a run: a cell that
/// could not be generated or scored carries `error` plus a zeroed report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub model: String,
    pub technique: String,
    pub item: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<RecordRef>,
    pub report: MetricReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultSet {
    results: Vec<RunResult>,
}

impl ResultSet {
    pub fn new(results: Vec<RunResult>) -> Self {
        Self { results }
    }

    pub fn results(&self) -> &[RunResult] {
        &self.results
    }

    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    /// Results for one (model, technique) group, matrix order preserved.
    pub fn select(&self, model: &str, technique: &str) -> Vec<&RunResult> {
        self.results
            .iter()
            .filter(|r| r.model == model && r.technique == technique)
            .collect()
    }

    /// Line-delimited JSON, one result per line; the persistence format
    /// for `results.jsonl`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for result in &self.results {
            out.push_str(&serde_json::to_string(result).expect("results serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), RunnerError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|source| RunnerError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        std::fs::write(path, self.to_jsonl()).map_err(|source| RunnerError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|source| RunnerError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut results = Vec::new();
        for (index, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            results.push(serde_json::from_str(line).map_err(|e| RunnerError::Results {
                line: index + 1,
                message: e.to_string(),
            })?);
        }
        Ok(Self { results })
    }
}

/// Shared machinery for a run: gateway, corpus, embedder, and execution
/// knobs. `workers = 0` uses the default thread pool.
pub struct RunContext<'a> {
    pub gateway: &'a Gateway,
    pub catalog: &'a SignalTree,
    pub bundle: &'a PromptBundle,
    pub embedder: &'a dyn EmbeddingProvider,
    pub max_attempts: u32,
    pub workers: usize,
}

/// Metric configuration for a run: the catalog's path segments join the
/// language keywords as weighted vocabulary, so vehicle-API identifiers
/// count extra in the weighted n-gram match.
pub fn metric_config_for(catalog: &SignalTree, weights: CodeBleuWeights) -> MetricConfig {
    let mut extra_keywords = BTreeSet::new();
    for entry in catalog.flatten() {
        for segment in entry.path.split('.') {
            extra_keywords.insert(segment.to_string());
        }
    }
    MetricConfig {
        weights,
        extra_keywords,
        ..MetricConfig::default()
    }
}

/// Execute every cell of the matrix. Output order is models × techniques
/// × items regardless of worker count; per-cell failures are recorded in
/// the cell's result rather than aborting. Only configuration problems
/// (bad prompt config, bad weights, empty axes) fail the whole run.
pub fn run(matrix: &RunMatrix, ctx: &RunContext<'_>) -> Result<ResultSet, RunnerError> {
    matrix.validate()?;
    let prompts: Vec<SystemPrompt> = matrix
        .techniques
        .iter()
        .map(|t| assemble(&t.config, ctx.catalog, ctx.bundle))
        .collect::<Result<_, _>>()?;
    let metric_config = metric_config_for(ctx.catalog, matrix.weights);

    struct Cell<'c> {
        model: &'c ModelSpec,
        technique: &'c str,
        system: &'c SystemPrompt,
        item: &'c BenchmarkItem,
    }
    let mut cells = Vec::with_capacity(matrix.cell_count());
    for model in &matrix.models {
        for (technique, system) in matrix.techniques.iter().zip(&prompts) {
            for item in matrix.items.items() {
                cells.push(Cell {
                    model,
                    technique: &technique.label,
                    system,
                    item,
                });
            }
        }
    }
    let execute = |cell: &Cell<'_>| {
        execute_cell(cell.model, cell.technique, cell.system, cell.item, ctx, &metric_config)
    };
    let results: Vec<RunResult> = match ctx.workers {
        0 => cells.par_iter().map(execute).collect(),
        1 => cells.iter().map(execute).collect(),
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RunnerError::Config(format!("thread pool: {e}")))?
            .install(|| cells.par_iter().map(execute).collect()),
    };
    Ok(ResultSet::new(results))
}

fn execute_cell(
    model: &ModelSpec,
    technique: &str,
    system: &SystemPrompt,
    item: &BenchmarkItem,
    ctx: &RunContext<'_>,
    metric_config: &MetricConfig,
) -> RunResult {
    let mut result = RunResult {
        model: model.label(),
        technique: technique.to_string(),
        item: item.key(),
        record: None,
        report: MetricReport::default(),
        error: None,
    };
    let validator = |code: &str| analysis::parse(code).is_ok();
    let record = match ctx.gateway.regenerate_on_invalid(
        model,
        system,
        &item.user_prompt,
        &validator,
        ctx.max_attempts,
    ) {
        Ok(record) => record,
        Err(e) => {
            result.error = Some(e.to_string());
            return result;
        }
    };
    result.record = Some(RecordRef {
        fingerprint: record.fingerprint.clone(),
        attempt: record.attempt,
        valid: record.valid,
    });
    match compute_report(
        &record.extracted_code,
        &item.reference_solution,
        ctx.embedder,
        metric_config,
    ) {
        Ok(report) => result.report = report,
        Err(e) => result.error = Some(e.to_string()),
    }
    result
}

/// Which score column a comparison reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricColumn {
    CodeBleu,
    Ngram,
    WeightedNgram,
    Syntax,
    Dataflow,
    CodeBert,
    RougeL,
    Chrf,
}

impl MetricColumn {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CodeBleu => "codebleu",
            Self::Ngram => "ngram",
            Self::WeightedNgram => "weighted-ngram",
            Self::Syntax => "syntax",
            Self::Dataflow => "dataflow",
            Self::CodeBert => "codebert",
            Self::RougeL => "rouge-l",
            Self::Chrf => "chrf",
        }
    }

    pub fn extract(self, result: &RunResult) -> f64 {
        let report = &result.report;
        match self {
            Self::CodeBleu => report.codebleu.composite,
            Self::Ngram => report.codebleu.ngram,
            Self::WeightedNgram => report.codebleu.weighted_ngram,
            Self::Syntax => report.codebleu.syntax,
            Self::Dataflow => report.codebleu.dataflow,
            Self::CodeBert => report.codebert.f1,
            Self::RougeL => report.rouge_l.f,
            Self::Chrf => report.chrf.score,
        }
    }
}

impl fmt::Display for MetricColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MetricColumn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "codebleu" => Ok(Self::CodeBleu),
            "ngram" => Ok(Self::Ngram),
            "weighted-ngram" | "weighted_ngram" => Ok(Self::WeightedNgram),
            "syntax" => Ok(Self::Syntax),
            "dataflow" => Ok(Self::Dataflow),
            "codebert" => Ok(Self::CodeBert),
            "rouge-l" | "rouge_l" | "rouge" => Ok(Self::RougeL),
            "chrf" => Ok(Self::Chrf),
            other => Err(format!("unknown metric column {other:?}")),
        }
    }
}

fn side_label(results: &[&RunResult]) -> String {
    let mut labels: Vec<String> = results
        .iter()
        .map(|r| format!("{}:{}", r.model, r.technique))
        .collect();
    labels.sort();
    labels.dedup();
    labels.join("+")
}

/// Two-sided significance test on per-item differences between two result
/// groups. The groups must cover exactly the same item set.
pub fn compare(
    results_a: &[&RunResult],
    results_b: &[&RunResult],
    test: SignificanceTest,
    metric: MetricColumn,
) -> Result<SignificanceResult, RunnerError> {
    let scores = |results: &[&RunResult]| -> Result<BTreeMap<String, f64>, RunnerError> {
        let mut map = BTreeMap::new();
        for result in results {
            if map.insert(result.item.clone(), metric.extract(result)).is_some() {
                return Err(RunnerError::Unpaired(format!(
                    "item {:?} appears more than once on one side",
                    result.item
                )));
            }
        }
        Ok(map)
    };
    let a = scores(results_a)?;
    let b = scores(results_b)?;
    if a.keys().ne(b.keys()) {
        let only_a: Vec<&String> = a.keys().filter(|k| !b.contains_key(*k)).collect();
        let only_b: Vec<&String> = b.keys().filter(|k| !a.contains_key(*k)).collect();
        return Err(RunnerError::Unpaired(format!(
            "item sets differ (only in a: {only_a:?}; only in b: {only_b:?})"
        )));
    }
    let diffs: Vec<f64> = a.iter().map(|(item, score)| score - b[item]).collect();
    let (statistic, p_value) = match test {
        SignificanceTest::PairedT => paired_t(&diffs)?,
        SignificanceTest::Wilcoxon => wilcoxon_signed_rank(&diffs)?,
    };
    Ok(SignificanceResult {
        comparison: format!("{} vs {}", side_label(results_a), side_label(results_b)),
        test,
        metric: metric.as_str().to_string(),
        statistic,
        p_value,
        n: diffs.len(),
    })
}

/// Prompt-component ablation for one model: one aggregated row per section
/// subset, preceded by the full-prompt and no-prompt baseline rows.
pub fn ablate(
    model: &ModelSpec,
    subsets: &[Vec<String>],
    items: &Benchmark,
    weights: CodeBleuWeights,
    ctx: &RunContext<'_>,
) -> Result<Vec<AggregateRow>, RunnerError> {
    let known: BTreeSet<&str> = ctx.bundle.section_ids().into_iter().collect();
    for subset in subsets {
        for id in subset {
            if !known.contains(id.as_str()) {
                return Err(RunnerError::Config(format!("unknown section id {id:?}")));
            }
        }
    }
    let mut techniques = vec![
        Technique::new("full", PromptConfig::new(PromptMode::FewShot)),
        Technique::new("none", PromptConfig::new(PromptMode::Original)),
    ];
    for subset in subsets {
        let mut config = PromptConfig::new(PromptMode::FewShot);
        config.included_section_ids = Some(subset.clone());
        techniques.push(Technique::new(&subset.join("+"), config));
    }
    let matrix = RunMatrix {
        models: vec![model.clone()],
        techniques,
        items: items.clone(),
        weights,
    };
    let results = run(&matrix, ctx)?;
    aggregate(results.results())
}

/// Declarative run configuration, loaded from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub catalog: PathBuf,
    pub bundle: PathBuf,
    pub benchmark: PathBuf,
    pub cache: PathBuf,
    #[serde(default)]
    pub results: Option<PathBuf>,
    #[serde(default)]
    pub offline: bool,
    /// 0 means "use the default thread pool".
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default)]
    pub weights: CodeBleuWeights,
    #[serde(default)]
    pub providers: Vec<ProviderConfig>,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub techniques: Vec<TechniqueConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationConfig>,
}

/// Declarative ablation request: which model (default: the first) and
/// which section subsets to evaluate alongside the two baseline rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    /// Model label (`provider/model`); defaults to the first config model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default)]
    pub subsets: Vec<Vec<String>>,
}

fn default_max_attempts() -> u32 {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechniqueConfig {
    pub label: String,
    pub mode: PromptMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sections: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplars: Option<Vec<String>>,
}

impl TechniqueConfig {
    pub fn to_technique(&self) -> Technique {
        Technique {
            label: self.label.clone(),
            config: PromptConfig {
                mode: self.mode,
                included_section_ids: self.sections.clone(),
                exemplar_ids: self.exemplars.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    Mock,
    ChatHttp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub id: String,
    pub kind: ProviderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, RunnerError> {
    let text = std::fs::read_to_string(path).map_err(|source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config: RunConfig = toml::from_str(&text)
        .map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))?;
    // Relative paths in the file mean "next to the config", not "under
    // whatever directory the process happens to run in".
    if let Some(base) = path.parent() {
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut config.catalog);
        rebase(&mut config.bundle);
        rebase(&mut config.benchmark);
        rebase(&mut config.cache);
        if let Some(results) = &mut config.results {
            rebase(results);
        }
    }
    Ok(config)
}

/// Build the provider registry a config asks for.
pub fn build_registry(configs: &[ProviderConfig]) -> Result<ProviderRegistry, RunnerError> {
    use crate::gateway::{ChatHttpProvider, MockProvider, Provider};
    use std::sync::Arc;

    let mut registry = ProviderRegistry::new();
    for config in configs {
        let provider: Arc<dyn Provider> = match config.kind {
            ProviderKind::Mock => Arc::new(MockProvider::new(&config.id)),
            ProviderKind::ChatHttp => {
                let endpoint = config.endpoint.as_deref().ok_or_else(|| {
                    RunnerError::Config(format!("provider {:?} needs an endpoint", config.id))
                })?;
                let api_key_env = config.api_key_env.as_deref().ok_or_else(|| {
                    RunnerError::Config(format!("provider {:?} needs api_key_env", config.id))
                })?;
                Arc::new(
                    ChatHttpProvider::new(&config.id, endpoint, api_key_env)
                        .map_err(|e| RunnerError::Config(e.to_string()))?,
                )
            }
        };
        registry.register(provider);
    }
    Ok(registry)
}
