//! Vehicle-signal catalog: parsing, validation, lookup, and prompt rendering.
//!
//! The catalog file is a UTF-8 JSON document of nested maps, the same shape
//! as public COVESA VSS JSON exports: every node carries a `type` tag
//! (`branch`, `sensor`, `actuator`, `attribute`), leaves carry a `datatype`,
//! and branches nest their children under a `children` map:
//!
//! ```json
//! {
//!   "Vehicle": {
//!     "type": "branch",
//!     "description": "High-level vehicle data.",
//!     "children": {
//!       "Speed": {
//!         "type": "sensor",
//!         "datatype": "float",
//!         "unit": "km/h",
//!         "description": "Vehicle speed."
//!       }
//!     }
//!   }
//! }
//! ```
//!
//! Unknown keys on a node are preserved through a serialize round-trip but
//! otherwise ignored, so real catalog releases (which carry `uuid`,
//! `comment`, and similar) can be dropped in unchanged.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fmt;

use serde_json::Value;
use thiserror::Error;

/// Node classification from the catalog's `type` tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    Branch,
    Sensor,
    Actuator,
    Attribute,
}

impl SignalKind {
    fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "branch" => Some(Self::Branch),
            "sensor" => Some(Self::Sensor),
            "actuator" => Some(Self::Actuator),
            "attribute" => Some(Self::Attribute),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::Branch => "branch",
            Self::Sensor => "sensor",
            Self::Actuator => "actuator",
            Self::Attribute => "attribute",
        }
    }

    pub fn is_leaf(self) -> bool {
        !matches!(self, Self::Branch)
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Leaf datatypes supported by the catalog format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Datatype {
    Boolean,
    Int8,
    Int16,
    Int32,
    Int64,
    Uint8,
    Uint16,
    Uint32,
    Uint64,
    Float,
    Double,
    String,
    Enumeration,
}

impl Datatype {
    fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "boolean" => Some(Self::Boolean),
            "int8" => Some(Self::Int8),
            "int16" => Some(Self::Int16),
            "int32" => Some(Self::Int32),
            "int64" => Some(Self::Int64),
            "uint8" => Some(Self::Uint8),
            "uint16" => Some(Self::Uint16),
            "uint32" => Some(Self::Uint32),
            "uint64" => Some(Self::Uint64),
            "float" => Some(Self::Float),
            "double" => Some(Self::Double),
            "string" => Some(Self::String),
            "enumeration" => Some(Self::Enumeration),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::Boolean => "boolean",
            Self::Int8 => "int8",
            Self::Int16 => "int16",
            Self::Int32 => "int32",
            Self::Int64 => "int64",
            Self::Uint8 => "uint8",
            Self::Uint16 => "uint16",
            Self::Uint32 => "uint32",
            Self::Uint64 => "uint64",
            Self::Float => "float",
            Self::Double => "double",
            Self::String => "string",
            Self::Enumeration => "enumeration",
        }
    }
}

impl fmt::Display for Datatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One node of the signal taxonomy.
///
/// `path` is the full dot-separated identifier; children are kept sorted by
/// segment so traversal order is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalNode {
    pub path: String,
    pub kind: SignalKind,
    pub datatype: Option<Datatype>,
    pub unit: Option<String>,
    pub description: String,
    pub allowed_values: Option<Vec<String>>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub children: Vec<SignalNode>,
    /// Keys the format does not model, preserved for serialize round-trips.
    pub extra: BTreeMap<String, Value>,
}

impl SignalNode {
    /// Last path segment (the node's own name).
    pub fn segment(&self) -> &str {
        self.path.rsplit('.').next().unwrap_or(&self.path)
    }
}

/// A validated signal taxonomy rooted at a single branch.
///
/// Immutable after construction; shared freely across worker threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTree {
    root: SignalNode,
}

#[derive(Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error("malformed catalog document: {0}")]
    Malformed(String),
    #[error("catalog must have exactly one root entry, found {0}")]
    NotSingleRoot(usize),
    #[error("root node '{0}' must be a branch")]
    RootNotBranch(String),
    #[error("duplicate path '{0}'")]
    DuplicatePath(String),
    #[error("leaf node '{0}' has no datatype")]
    LeafWithoutDatatype(String),
    #[error("leaf node '{0}' must not have children")]
    LeafWithChildren(String),
    #[error("branch node '{0}' must not have a datatype")]
    BranchWithDatatype(String),
    #[error("node '{path}' has unknown kind tag '{tag}'")]
    UnknownKind { path: String, tag: String },
    #[error("node '{path}' has unknown datatype '{tag}'")]
    UnknownDatatype { path: String, tag: String },
    #[error("invalid segment name '{segment}' under '{parent}'")]
    InvalidSegment { parent: String, segment: String },
    #[error("unknown path '{0}'")]
    UnknownPath(String),
    #[error("cannot render an empty entry list")]
    EmptyEntryList,
}

/// Parse and validate a catalog document.
pub fn parse_catalog(raw: &[u8]) -> Result<SignalTree, CatalogError> {
    let text = std::str::from_utf8(raw)
        .map_err(|e| CatalogError::Malformed(format!("not valid UTF-8: {e}")))?;
    let value: Value =
        serde_json::from_str(text).map_err(|e| CatalogError::Malformed(e.to_string()))?;
    let map = value
        .as_object()
        .ok_or_else(|| CatalogError::Malformed("top level must be a map".into()))?;
    if map.len() != 1 {
        return Err(CatalogError::NotSingleRoot(map.len()));
    }
    let (name, body) = map.iter().next().expect("len checked");
    let root = node_from_value(name, None, body)?;
    SignalTree::from_root(root)
}

impl SignalTree {
    /// Validate invariants and wrap a root node built by any means.
    pub fn from_root(root: SignalNode) -> Result<Self, CatalogError> {
        if root.kind != SignalKind::Branch {
            return Err(CatalogError::RootNotBranch(root.path.clone()));
        }
        let mut seen = HashSet::new();
        validate_node(&root, None, &mut seen)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &SignalNode {
        &self.root
    }

    /// Look up the node at a dot-separated path.
    pub fn resolve(&self, path: &str) -> Result<&SignalNode, CatalogError> {
        let mut segments = path.split('.');
        let first = segments.next().unwrap_or("");
        if first != self.root.segment() {
            return Err(CatalogError::UnknownPath(path.to_string()));
        }
        let mut node = &self.root;
        for segment in segments {
            node = node
                .children
                .iter()
                .find(|c| c.segment() == segment)
                .ok_or_else(|| CatalogError::UnknownPath(path.to_string()))?;
        }
        Ok(node)
    }

    /// Flatten the tree into one entry per leaf, sorted by path bytes.
    pub fn flatten(&self) -> Vec<ApiEntry> {
        let mut entries = Vec::new();
        collect_leaves(&self.root, &mut entries);
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        entries
    }

    pub fn leaf_count(&self) -> usize {
        fn walk(node: &SignalNode) -> usize {
            if node.kind.is_leaf() {
                1
            } else {
                node.children.iter().map(walk).sum()
            }
        }
        walk(&self.root)
    }

    /// Serialize back to the nested-map document format.
    ///
    /// Re-parsing the output yields an identical tree; keys not modeled by
    /// the format survive the round-trip.
    pub fn to_document(&self) -> String {
        let mut top = serde_json::Map::new();
        top.insert(self.root.segment().to_string(), node_to_value(&self.root));
        let mut out = serde_json::to_string_pretty(&Value::Object(top)).expect("json encode");
        out.push('\n');
        out
    }
}

/// Flattened prompt-listing form of one leaf signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiEntry {
    pub path: String,
    pub kind: SignalKind,
    pub datatype: Datatype,
    pub unit: Option<String>,
    pub description: String,
    pub allowed_values: Option<Vec<String>>,
}

/// Render the API-listing prompt section: one fixed-template block per
/// entry, blocks separated by a blank line.
pub fn render_api_listing(entries: &[ApiEntry]) -> Result<String, CatalogError> {
    if entries.is_empty() {
        return Err(CatalogError::EmptyEntryList);
    }
    let blocks: Vec<String> = entries.iter().map(render_entry).collect();
    Ok(blocks.join("\n") + "\n")
}

fn render_entry(entry: &ApiEntry) -> String {
    let mut block = String::new();
    block.push_str(&entry.path);
    block.push('\n');
    block.push_str(&format!("  kind: {}\n", entry.kind));
    block.push_str(&format!("  datatype: {}\n", entry.datatype));
    block.push_str(&format!(
        "  unit: {}\n",
        entry.unit.as_deref().unwrap_or("-")
    ));
    block.push_str(&format!("  description: {}\n", entry.description));
    if let Some(allowed) = &entry.allowed_values {
        block.push_str(&format!("  allowed: {}\n", allowed.join(", ")));
    }
    block
}

fn collect_leaves(node: &SignalNode, out: &mut Vec<ApiEntry>) {
    if node.kind.is_leaf() {
        out.push(ApiEntry {
            path: node.path.clone(),
            kind: node.kind,
            datatype: node.datatype.expect("validated leaf has datatype"),
            unit: node.unit.clone(),
            description: node.description.clone(),
            allowed_values: node.allowed_values.clone(),
        });
    }
    for child in &node.children {
        collect_leaves(child, out);
    }
}

const MODELED_KEYS: &[&str] = &[
    "type",
    "datatype",
    "unit",
    "description",
    "allowed",
    "min",
    "max",
    "children",
];

fn node_from_value(
    segment: &str,
    parent_path: Option<&str>,
    value: &Value,
) -> Result<SignalNode, CatalogError> {
    let parent = parent_path.unwrap_or("<root>");
    if segment.is_empty() || segment.contains('.') {
        return Err(CatalogError::InvalidSegment {
            parent: parent.to_string(),
            segment: segment.to_string(),
        });
    }
    let path = match parent_path {
        Some(p) => format!("{p}.{segment}"),
        None => segment.to_string(),
    };
    let map = value
        .as_object()
        .ok_or_else(|| CatalogError::Malformed(format!("node '{path}' must be a map")))?;

    let kind_tag = map
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| CatalogError::Malformed(format!("node '{path}' is missing a type tag")))?;
    let kind = SignalKind::from_tag(kind_tag).ok_or_else(|| CatalogError::UnknownKind {
        path: path.clone(),
        tag: kind_tag.to_string(),
    })?;

    let datatype = match map.get("datatype") {
        Some(v) => {
            let tag = v.as_str().ok_or_else(|| {
                CatalogError::Malformed(format!("node '{path}' datatype must be a string"))
            })?;
            Some(
                Datatype::from_tag(tag).ok_or_else(|| CatalogError::UnknownDatatype {
                    path: path.clone(),
                    tag: tag.to_string(),
                })?,
            )
        }
        None => None,
    };

    let unit = match map.get("unit") {
        Some(v) => Some(
            v.as_str()
                .ok_or_else(|| {
                    CatalogError::Malformed(format!("node '{path}' unit must be a string"))
                })?
                .to_string(),
        ),
        None => None,
    };

    let description = map
        .get("description")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();

    let allowed_values = match map.get("allowed") {
        Some(Value::Array(items)) => {
            let mut values = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    Value::String(s) => values.push(s.clone()),
                    Value::Number(n) => values.push(n.to_string()),
                    Value::Bool(b) => values.push(b.to_string()),
                    _ => {
                        return Err(CatalogError::Malformed(format!(
                            "node '{path}' has a non-scalar allowed value"
                        )))
                    }
                }
            }
            Some(values)
        }
        Some(_) => {
            return Err(CatalogError::Malformed(format!(
                "node '{path}' allowed must be a list"
            )))
        }
        None => None,
    };

    let min = number_field(map, "min", &path)?;
    let max = number_field(map, "max", &path)?;

    let mut children = Vec::new();
    if let Some(children_value) = map.get("children") {
        let children_map = children_value.as_object().ok_or_else(|| {
            CatalogError::Malformed(format!("node '{path}' children must be a map"))
        })?;
        for (child_segment, child_value) in children_map {
            children.push(node_from_value(child_segment, Some(&path), child_value)?);
        }
    }

    let extra: BTreeMap<String, Value> = map
        .iter()
        .filter(|(k, _)| !MODELED_KEYS.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();

    Ok(SignalNode {
        path,
        kind,
        datatype,
        unit,
        description,
        allowed_values,
        min,
        max,
        children,
        extra,
    })
}

fn number_field(
    map: &serde_json::Map<String, Value>,
    key: &str,
    path: &str,
) -> Result<Option<f64>, CatalogError> {
    match map.get(key) {
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| CatalogError::Malformed(format!("node '{path}' {key} must be a number"))),
        None => Ok(None),
    }
}

fn validate_node(
    node: &SignalNode,
    parent_path: Option<&str>,
    seen: &mut HashSet<String>,
) -> Result<(), CatalogError> {
    if let Some(parent) = parent_path {
        let expected_prefix = format!("{parent}.");
        if !node.path.starts_with(&expected_prefix) {
            return Err(CatalogError::Malformed(format!(
                "node path '{}' does not extend parent '{parent}'",
                node.path
            )));
        }
    }
    if !seen.insert(node.path.clone()) {
        return Err(CatalogError::DuplicatePath(node.path.clone()));
    }
    match node.kind {
        SignalKind::Branch => {
            if node.datatype.is_some() {
                return Err(CatalogError::BranchWithDatatype(node.path.clone()));
            }
        }
        _ => {
            if node.datatype.is_none() {
                return Err(CatalogError::LeafWithoutDatatype(node.path.clone()));
            }
            if !node.children.is_empty() {
                return Err(CatalogError::LeafWithChildren(node.path.clone()));
            }
        }
    }
    for child in &node.children {
        validate_node(child, Some(&node.path), seen)?;
    }
    Ok(())
}

fn node_to_value(node: &SignalNode) -> Value {
    let mut map = serde_json::Map::new();
    map.insert("type".into(), Value::String(node.kind.tag().into()));
    if let Some(datatype) = node.datatype {
        map.insert("datatype".into(), Value::String(datatype.tag().into()));
    }
    if let Some(unit) = &node.unit {
        map.insert("unit".into(), Value::String(unit.clone()));
    }
    if !node.description.is_empty() {
        map.insert("description".into(), Value::String(node.description.clone()));
    }
    if let Some(allowed) = &node.allowed_values {
        map.insert(
            "allowed".into(),
            Value::Array(allowed.iter().map(|v| Value::String(v.clone())).collect()),
        );
    }
    if let Some(min) = node.min {
        map.insert("min".into(), number_value(min));
    }
    if let Some(max) = node.max {
        map.insert("max".into(), number_value(max));
    }
    for (key, value) in &node.extra {
        map.insert(key.clone(), value.clone());
    }
    if !node.children.is_empty() {
        let mut children = serde_json::Map::new();
        for child in &node.children {
            children.insert(child.segment().to_string(), node_to_value(child));
        }
        map.insert("children".into(), Value::Object(children));
    }
    Value::Object(map)
}

fn number_value(n: f64) -> Value {
    serde_json::Number::from_f64(n)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}
