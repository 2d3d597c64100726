//! System-prompt assembly: descriptive sections, the generated API listing,
//! and embedded exemplars, combined under one of three prompting modes.
//!
//! A prompt bundle lives on disk as a directory: a `manifest.toml` giving
//! section order, ids, kinds and titles; one UTF-8 body file per descriptive
//! section; and an `exemplars/` directory holding a `<id>.request.txt` /
//! `<id>.solution.py` pair (plus optional `<id>.notes.txt`) per exemplar.
//! The API listing and examples sections carry no file — their bodies are
//! rendered at assembly time from the signal catalog and the exemplar set.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::{render_api_listing, CatalogError, SignalTree};

pub const MANIFEST_NAME: &str = "manifest.toml";
pub const EXEMPLAR_DIR: &str = "exemplars";

/// Fixed horizontal rule between rendered sections.
pub const SECTION_SEPARATOR: &str = "\n---\n\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionKind {
    /// Hand-written prose (introduction, requirements, coding rules, ...).
    Descriptive,
    /// Generated from the signal catalog.
    ApiListing,
    /// Generated from the exemplar problems.
    Examples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSection {
    pub id: String,
    pub kind: SectionKind,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarProblem {
    pub id: String,
    pub user_request: String,
    /// Chain-of-thought or tree-of-thought annotation; rendered between the
    /// request and the solution when present.
    pub reasoning_notes: Option<String>,
    pub solution_code: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptMode {
    FewShot,
    ZeroShot,
    /// The playground's unmodified behavior: no system prompt at all.
    Original,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FewShot => "few-shot",
            Self::ZeroShot => "zero-shot",
            Self::Original => "original",
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "few-shot" | "fewshot" => Ok(Self::FewShot),
            "zero-shot" | "zeroshot" => Ok(Self::ZeroShot),
            "original" => Ok(Self::Original),
            other => Err(format!(
                "unknown prompt mode {other:?} (expected few-shot, zero-shot, or original)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub mode: PromptMode,
    /// Ablation filter: when present, only these section ids are rendered
    /// (intersected with what the mode allows).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub included_section_ids: Option<Vec<String>>,
    /// When present, only these exemplars appear in the examples section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplar_ids: Option<Vec<String>>,
}

impl PromptConfig {
    pub fn new(mode: PromptMode) -> Self {
        Self {
            mode,
            included_section_ids: None,
            exemplar_ids: None,
        }
    }
}

/// Fully rendered system prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemPrompt {
    pub sections: Vec<PromptSection>,
    pub rendered_text: String,
    /// Hex SHA-256 of `rendered_text`.
    pub fingerprint: String,
}

impl SystemPrompt {
    pub(crate) fn from_sections(sections: Vec<PromptSection>) -> Self {
        let rendered: Vec<String> = sections.iter().map(render_section).collect();
        let rendered_text = rendered.join(SECTION_SEPARATOR);
        let fingerprint = hex::encode(Sha256::digest(rendered_text.as_bytes()));
        Self {
            sections,
            rendered_text,
            fingerprint,
        }
    }

    pub fn section_ids(&self) -> Vec<&str> {
        self.sections.iter().map(|s| s.id.as_str()).collect()
    }
}

fn render_section(section: &PromptSection) -> String {
    let body = section.body.trim_end();
    format!("## {}\n\n{}\n", section.title, body)
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("duplicate section id {0:?}")]
    DuplicateSection(String),
    #[error("duplicate exemplar id {0:?}")]
    DuplicateExemplar(String),
    #[error("section {0:?} has an empty body")]
    EmptySection(String),
    #[error("exemplar {0:?} has no solution code")]
    EmptyExemplar(String),
    #[error("unknown section id {0:?}")]
    UnknownSection(String),
    #[error("unknown exemplar id {0:?}")]
    UnknownExemplar(String),
    #[error("prompt came out empty in {0} mode")]
    EmptyPrompt(PromptMode),
    #[error("cannot render API listing: {0}")]
    Catalog(#[from] CatalogError),
}

/// One section as declared in the bundle manifest. Descriptive sections
/// name a body file; generated sections (api-listing, examples) do not.
#[derive(Debug, Clone, Deserialize)]
struct ManifestSection {
    id: String,
    kind: SectionKind,
    title: String,
    #[serde(default)]
    file: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct Manifest {
    #[serde(rename = "section", default)]
    sections: Vec<ManifestSection>,
    #[serde(default)]
    exemplars: Vec<String>,
}

/// An in-memory prompt bundle: ordered sections (descriptive bodies already
/// loaded) and exemplar problems.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    sections: Vec<PromptSection>,
    exemplars: Vec<ExemplarProblem>,
}

impl PromptBundle {
    /// Assemble a bundle from already-built parts (tests, programmatic use).
    pub fn from_parts(
        sections: Vec<PromptSection>,
        exemplars: Vec<ExemplarProblem>,
    ) -> Result<Self, PromptError> {
        let mut seen = BTreeSet::new();
        for section in &sections {
            if !seen.insert(section.id.clone()) {
                return Err(PromptError::DuplicateSection(section.id.clone()));
            }
            if section.kind == SectionKind::Descriptive && section.body.trim().is_empty() {
                return Err(PromptError::EmptySection(section.id.clone()));
            }
        }
        let mut seen = BTreeSet::new();
        for exemplar in &exemplars {
            if !seen.insert(exemplar.id.clone()) {
                return Err(PromptError::DuplicateExemplar(exemplar.id.clone()));
            }
            if exemplar.solution_code.trim().is_empty() {
                return Err(PromptError::EmptyExemplar(exemplar.id.clone()));
            }
        }
        Ok(Self {
            sections,
            exemplars,
        })
    }

    pub fn sections(&self) -> &[PromptSection] {
        &self.sections
    }

    pub fn exemplars(&self) -> &[ExemplarProblem] {
        &self.exemplars
    }

    pub fn section_ids(&self) -> Vec<&str> {
        self.sections.iter().map(|s| s.id.as_str()).collect()
    }
}

/// Load a prompt bundle directory (manifest, section bodies, exemplars).
pub fn load_bundle(dir: &Path) -> Result<PromptBundle, PromptError> {
    let read = |path: &Path| -> Result<String, PromptError> {
        fs::read_to_string(path).map_err(|source| PromptError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    let manifest_path = dir.join(MANIFEST_NAME);
    let manifest: Manifest = toml::from_str(&read(&manifest_path)?)
        .map_err(|e| PromptError::Manifest(e.to_string()))?;

    let mut sections = Vec::with_capacity(manifest.sections.len());
    for declared in manifest.sections {
        let body = match (&declared.kind, &declared.file) {
            (SectionKind::Descriptive, Some(file)) => read(&dir.join(file))?,
            (SectionKind::Descriptive, None) => {
                return Err(PromptError::Manifest(format!(
                    "descriptive section {:?} names no body file",
                    declared.id
                )));
            }
            // generated at assembly time
            (SectionKind::ApiListing | SectionKind::Examples, None) => String::new(),
            (_, Some(_)) => {
                return Err(PromptError::Manifest(format!(
                    "section {:?} is generated and must not name a file",
                    declared.id
                )));
            }
        };
        sections.push(PromptSection {
            id: declared.id,
            kind: declared.kind,
            title: declared.title,
            body,
        });
    }

    let mut exemplars = Vec::with_capacity(manifest.exemplars.len());
    for id in manifest.exemplars {
        let base = dir.join(EXEMPLAR_DIR);
        let request = read(&base.join(format!("{id}.request.txt")))?;
        let solution = read(&base.join(format!("{id}.solution.py")))?;
        let notes_path = base.join(format!("{id}.notes.txt"));
        let reasoning_notes = if notes_path.exists() {
            Some(read(&notes_path)?)
        } else {
            None
        };
        exemplars.push(ExemplarProblem {
            id,
            user_request: request,
            reasoning_notes,
            solution_code: solution,
        });
    }
    PromptBundle::from_parts(sections, exemplars)
}

/// Pick bundle sections by id, preserving bundle order. Unknown ids are
/// errors; this is the ablation entry point.
pub fn select_sections<'a>(
    bundle: &'a PromptBundle,
    ids: &[String],
) -> Result<Vec<&'a PromptSection>, PromptError> {
    let known: BTreeSet<&str> = bundle.sections.iter().map(|s| s.id.as_str()).collect();
    for id in ids {
        if !known.contains(id.as_str()) {
            return Err(PromptError::UnknownSection(id.clone()));
        }
    }
    Ok(bundle
        .sections
        .iter()
        .filter(|s| ids.iter().any(|id| id == &s.id))
        .collect())
}

/// Build the system prompt for one prompting mode.
///
/// Few-shot renders descriptive sections, the API listing, and the examples
/// section; zero-shot drops the examples; original is the empty prompt.
/// `included_section_ids` further filters by id, `exemplar_ids` filters
/// which exemplars the examples section embeds.
pub fn assemble(
    config: &PromptConfig,
    catalog: &SignalTree,
    bundle: &PromptBundle,
) -> Result<SystemPrompt, PromptError> {
    if config.mode == PromptMode::Original {
        return Ok(SystemPrompt::from_sections(Vec::new()));
    }
    if let Some(ids) = &config.included_section_ids {
        let known: BTreeSet<&str> = bundle.sections.iter().map(|s| s.id.as_str()).collect();
        for id in ids {
            if !known.contains(id.as_str()) {
                return Err(PromptError::UnknownSection(id.clone()));
            }
        }
    }

    let exemplars = selected_exemplars(bundle, config)?;
    let mut sections = Vec::new();
    for section in &bundle.sections {
        let mode_allows = match section.kind {
            SectionKind::Descriptive | SectionKind::ApiListing => true,
            SectionKind::Examples => config.mode == PromptMode::FewShot,
        };
        let filter_allows = config
            .included_section_ids
            .as_ref()
            .is_none_or(|ids| ids.iter().any(|id| id == &section.id));
        if !mode_allows || !filter_allows {
            continue;
        }
        let body = match section.kind {
            SectionKind::Descriptive => section.body.clone(),
            SectionKind::ApiListing => render_api_listing(&catalog.flatten())?,
            SectionKind::Examples => render_exemplars(&exemplars),
        };
        sections.push(PromptSection {
            id: section.id.clone(),
            kind: section.kind,
            title: section.title.clone(),
            body,
        });
    }
    if sections.is_empty() {
        return Err(PromptError::EmptyPrompt(config.mode));
    }
    Ok(SystemPrompt::from_sections(sections))
}

fn selected_exemplars<'a>(
    bundle: &'a PromptBundle,
    config: &PromptConfig,
) -> Result<Vec<&'a ExemplarProblem>, PromptError> {
    match &config.exemplar_ids {
        None => Ok(bundle.exemplars.iter().collect()),
        Some(ids) => {
            let known: BTreeSet<&str> = bundle.exemplars.iter().map(|e| e.id.as_str()).collect();
            for id in ids {
                if !known.contains(id.as_str()) {
                    return Err(PromptError::UnknownExemplar(id.clone()));
                }
            }
            Ok(bundle
                .exemplars
                .iter()
                .filter(|e| ids.iter().any(|id| id == &e.id))
                .collect())
        }
    }
}

/// Request → reasoning notes → solution, one block per exemplar.
fn render_exemplars(exemplars: &[&ExemplarProblem]) -> String {
    let mut out = String::new();
    for (i, exemplar) in exemplars.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("### Example: {}\n\n", exemplar.id));
        out.push_str(&format!("Request:\n{}\n", exemplar.user_request.trim_end()));
        if let Some(notes) = &exemplar.reasoning_notes {
            out.push_str(&format!("\nReasoning:\n{}\n", notes.trim_end()));
        }
        out.push_str(&format!(
            "\nSolution:\n```python\n{}\n```\n",
            exemplar.solution_code.trim_end()
        ));
    }
    out
}

/// Crude token budget estimate: whitespace-delimited words × `factor`,
/// rounded up. Monotone in text growth for a fixed factor.
pub fn estimate_tokens(text: &str, factor: f64) -> usize {
    assert!(factor >= 0.0 && factor.is_finite(), "factor must be finite and non-negative");
    let words = text.split_whitespace().count();
    (words as f64 * factor).ceil() as usize
}
