//! The benchmark store: prompt–solution pairs organized as use cases ×
//! complexity levels, loaded from a diff-friendly directory layout.
//!
//! On disk a benchmark looks like:
//!
//! ```text
//! benchmark/
//!   manifest.toml          # level list + use-case order
//!   usecases/
//!     seat-adjust/
//!       meta               # TOML: title, description, optional signals
//!       simple/prompt.md
//!       simple/solution
//!       moderate/...
//!       advanced/...
//! ```
//!
//! The grid is declared, not hard-coded: the manifest names the levels and
//! the use cases, and every declared cell must exist on disk.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis;
use crate::catalog::SignalTree;

pub const MANIFEST_NAME: &str = "manifest.toml";
pub const USECASE_DIR: &str = "usecases";
pub const META_NAME: &str = "meta";
pub const PROMPT_NAME: &str = "prompt.md";
pub const SOLUTION_NAME: &str = "solution";

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Complexity {
    Simple,
    Moderate,
    Advanced,
}

impl Complexity {
    pub const ALL: [Complexity; 3] = [Self::Simple, Self::Moderate, Self::Advanced];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Simple => "simple",
            Self::Moderate => "moderate",
            Self::Advanced => "advanced",
        }
    }
}

impl fmt::Display for Complexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Complexity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simple" => Ok(Self::Simple),
            "moderate" => Ok(Self::Moderate),
            "advanced" => Ok(Self::Advanced),
            other => Err(format!(
                "unknown complexity {other:?} (expected simple, moderate, or advanced)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UseCase {
    pub id: String,
    pub title: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub use_case_id: String,
    pub complexity: Complexity,
    pub user_prompt: String,
    pub reference_solution: String,
    /// Catalog paths the reference touches; validated when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signals_used: Option<Vec<String>>,
}

impl BenchmarkItem {
    /// Stable identifier for run records and cache keys.
    pub fn key(&self) -> String {
        format!("{}/{}", self.use_case_id, self.complexity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    use_cases: Vec<UseCase>,
    items: Vec<BenchmarkItem>,
}

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("invalid meta for use case {use_case:?}: {message}")]
    Meta { use_case: String, message: String },
    #[error("use case {use_case:?} is missing the {level} level")]
    MissingLevel { use_case: String, level: Complexity },
    #[error("duplicate use case id {0:?}")]
    DuplicateUseCase(String),
    #[error("duplicate item for use case {use_case:?} at level {level}")]
    DuplicateItem { use_case: String, level: Complexity },
    #[error("item references unknown use case {0:?}")]
    UnknownUseCase(String),
    #[error("cannot save: use case {use_case:?} lacks level {level} present elsewhere")]
    RaggedGrid { use_case: String, level: Complexity },
}

impl Benchmark {
    /// Build from parts, normalizing item order to (use-case order,
    /// complexity order) and rejecting duplicates and dangling references.
    pub fn from_parts(
        use_cases: Vec<UseCase>,
        mut items: Vec<BenchmarkItem>,
    ) -> Result<Self, BenchmarkError> {
        let mut order: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, uc) in use_cases.iter().enumerate() {
            if order.insert(uc.id.as_str(), i).is_some() {
                return Err(BenchmarkError::DuplicateUseCase(uc.id.clone()));
            }
        }
        let mut seen: BTreeSet<(String, Complexity)> = BTreeSet::new();
        for item in &items {
            if !order.contains_key(item.use_case_id.as_str()) {
                return Err(BenchmarkError::UnknownUseCase(item.use_case_id.clone()));
            }
            if !seen.insert((item.use_case_id.clone(), item.complexity)) {
                return Err(BenchmarkError::DuplicateItem {
                    use_case: item.use_case_id.clone(),
                    level: item.complexity,
                });
            }
        }
        let index: BTreeMap<String, usize> = use_cases
            .iter()
            .enumerate()
            .map(|(i, uc)| (uc.id.clone(), i))
            .collect();
        items.sort_by_key(|item| (index[&item.use_case_id], item.complexity));
        Ok(Self { use_cases, items })
    }

    pub fn use_cases(&self) -> &[UseCase] {
        &self.use_cases
    }

    pub fn items(&self) -> &[BenchmarkItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, use_case_id: &str, complexity: Complexity) -> Option<&BenchmarkItem> {
        self.items
            .iter()
            .find(|i| i.use_case_id == use_case_id && i.complexity == complexity)
    }

    /// Item counts per use case and per complexity level.
    pub fn counts(&self) -> BenchmarkCounts {
        let mut per_use_case = BTreeMap::new();
        let mut per_complexity = BTreeMap::new();
        for item in &self.items {
            *per_use_case.entry(item.use_case_id.clone()).or_insert(0) += 1;
            *per_complexity.entry(item.complexity).or_insert(0) += 1;
        }
        BenchmarkCounts {
            total: self.items.len(),
            per_use_case,
            per_complexity,
        }
    }

    /// Distinct complexity levels present, in order.
    pub fn levels(&self) -> Vec<Complexity> {
        let set: BTreeSet<Complexity> = self.items.iter().map(|i| i.complexity).collect();
        set.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkCounts {
    pub total: usize,
    pub per_use_case: BTreeMap<String, usize>,
    pub per_complexity: BTreeMap<Complexity, usize>,
}

#[derive(Debug, Deserialize, Serialize)]
struct Manifest {
    levels: Vec<Complexity>,
    use_cases: Vec<String>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
struct Meta {
    title: String,
    description: String,
    /// Optional per-level signal lists: `[signals] simple = ["Vehicle.Speed"]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signals: Option<BTreeMap<String, Vec<String>>>,
}

/// Load a benchmark directory, requiring every manifest-declared
/// (use case, level) cell to exist.
pub fn load_benchmark(dir: &Path) -> Result<Benchmark, BenchmarkError> {
    let read = |path: &Path| -> Result<String, BenchmarkError> {
        fs::read_to_string(path).map_err(|source| BenchmarkError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    let manifest: Manifest = toml::from_str(&read(&dir.join(MANIFEST_NAME))?)
        .map_err(|e| BenchmarkError::Manifest(e.to_string()))?;
    if manifest.levels.is_empty() {
        return Err(BenchmarkError::Manifest("no levels declared".into()));
    }

    let mut use_cases = Vec::with_capacity(manifest.use_cases.len());
    let mut items = Vec::new();
    for id in &manifest.use_cases {
        let base = dir.join(USECASE_DIR).join(id);
        let meta: Meta = toml::from_str(&read(&base.join(META_NAME))?).map_err(|e| {
            BenchmarkError::Meta {
                use_case: id.clone(),
                message: e.to_string(),
            }
        })?;
        use_cases.push(UseCase {
            id: id.clone(),
            title: meta.title,
            description: meta.description,
        });
        for &level in &manifest.levels {
            let cell = base.join(level.as_str());
            if !cell.is_dir() {
                return Err(BenchmarkError::MissingLevel {
                    use_case: id.clone(),
                    level,
                });
            }
            let user_prompt = read(&cell.join(PROMPT_NAME))?;
            let reference_solution = read(&cell.join(SOLUTION_NAME))?;
            let signals_used = meta
                .signals
                .as_ref()
                .and_then(|m| m.get(level.as_str()))
                .cloned();
            items.push(BenchmarkItem {
                use_case_id: id.clone(),
                complexity: level,
                user_prompt,
                reference_solution,
                signals_used,
            });
        }
    }
    Benchmark::from_parts(use_cases, items)
}

/// Write a benchmark back out in the layout [`load_benchmark`] reads.
/// The benchmark must form a full grid over its own levels.
pub fn save_benchmark(benchmark: &Benchmark, dir: &Path) -> Result<(), BenchmarkError> {
    let levels = benchmark.levels();
    for uc in benchmark.use_cases() {
        for &level in &levels {
            if benchmark.item(&uc.id, level).is_none() {
                return Err(BenchmarkError::RaggedGrid {
                    use_case: uc.id.clone(),
                    level,
                });
            }
        }
    }
    let write = |path: &Path, contents: &str| -> Result<(), BenchmarkError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| BenchmarkError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        fs::write(path, contents).map_err(|source| BenchmarkError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    let manifest = Manifest {
        levels: levels.clone(),
        use_cases: benchmark.use_cases().iter().map(|u| u.id.clone()).collect(),
    };
    let manifest_text =
        toml::to_string_pretty(&manifest).expect("manifest of plain strings serializes");
    write(&dir.join(MANIFEST_NAME), &manifest_text)?;
    for uc in benchmark.use_cases() {
        let base = dir.join(USECASE_DIR).join(&uc.id);
        let mut signals: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for &level in &levels {
            let item = benchmark.item(&uc.id, level).expect("grid checked above");
            if let Some(paths) = &item.signals_used {
                signals.insert(level.as_str().to_string(), paths.clone());
            }
            write(&base.join(level.as_str()).join(PROMPT_NAME), &item.user_prompt)?;
            write(
                &base.join(level.as_str()).join(SOLUTION_NAME),
                &item.reference_solution,
            )?;
        }
        let meta = Meta {
            title: uc.title.clone(),
            description: uc.description.clone(),
            signals: if signals.is_empty() { None } else { Some(signals) },
        };
        let meta_text = toml::to_string_pretty(&meta).expect("meta of plain strings serializes");
        write(&base.join(META_NAME), &meta_text)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    UnknownSignal,
    EmptySolution,
    ParseFailure,
}

/// One data problem found by [`validate_benchmark`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub use_case_id: String,
    pub complexity: Complexity,
    pub kind: ViolationKind,
    pub message: String,
}

/// Check signal paths, solution presence, and solution parseability.
/// Violations are data, not failures: the list may be empty.
pub fn validate_benchmark(benchmark: &Benchmark, catalog: &SignalTree) -> Vec<Violation> {
    let mut violations = Vec::new();
    for item in benchmark.items() {
        let mut push = |kind: ViolationKind, message: String| {
            violations.push(Violation {
                use_case_id: item.use_case_id.clone(),
                complexity: item.complexity,
                kind,
                message,
            });
        };
        if let Some(signals) = &item.signals_used {
            for path in signals {
                if catalog.resolve(path).is_err() {
                    push(
                        ViolationKind::UnknownSignal,
                        format!("signal path {path:?} not in catalog"),
                    );
                }
            }
        }
        if item.reference_solution.trim().is_empty() {
            push(ViolationKind::EmptySolution, "reference solution is empty".into());
            continue; // parsing an empty solution adds no information
        }
        if let Err(e) = analysis::parse(&item.reference_solution) {
            push(ViolationKind::ParseFailure, e.to_string());
        }
    }
    violations
}

/// Filter selectors; `None` means "no constraint".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexities: Option<BTreeSet<Complexity>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub use_case_ids: Option<BTreeSet<String>>,
}

impl BenchmarkFilter {
    pub fn is_empty(&self) -> bool {
        self.complexities.is_none() && self.use_case_ids.is_none()
    }

    fn accepts(&self, item: &BenchmarkItem) -> bool {
        let complexity_ok = self
            .complexities
            .as_ref()
            .is_none_or(|set| set.contains(&item.complexity));
        let use_case_ok = self
            .use_case_ids
            .as_ref()
            .is_none_or(|set| set.contains(&item.use_case_id));
        complexity_ok && use_case_ok
    }
}

/// Subset of the benchmark matching the filter, order preserved. Use cases
/// left without items are dropped from the result's use-case list.
pub fn filter(benchmark: &Benchmark, by: &BenchmarkFilter) -> Benchmark {
    let items: Vec<BenchmarkItem> = benchmark
        .items()
        .iter()
        .filter(|i| by.accepts(i))
        .cloned()
        .collect();
    let kept: BTreeSet<&str> = items.iter().map(|i| i.use_case_id.as_str()).collect();
    let use_cases: Vec<UseCase> = benchmark
        .use_cases()
        .iter()
        .filter(|uc| kept.contains(uc.id.as_str()))
        .cloned()
        .collect();
    Benchmark::from_parts(use_cases, items).expect("filtering preserves validity")
}
