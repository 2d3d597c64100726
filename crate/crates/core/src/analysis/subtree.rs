//! Subtree multiset extraction for the syntax-match submetric.
//!
//! Every interior node contributes one entry: its kind plus the ordered
//! kinds of its direct children. Leaf texts (identifier spellings, literal
//! values) are dropped so the comparison is purely structural — `x = 1` and
//! `y = 2` share the same subtree multiset.

use std::collections::BTreeMap;

use super::ast::{SyntaxNode, SyntaxTree};

/// Multiset of serialized one-level subtrees, e.g. `"Assign(Name,Constant)"`.
pub type SubtreeMultiset = BTreeMap<String, usize>;

/// Collect the one-level subtree multiset of a parsed tree.
pub fn extract_subtrees(tree: &SyntaxTree) -> SubtreeMultiset {
    let mut out = SubtreeMultiset::new();
    collect(tree.root(), &mut out);
    out
}

fn collect(node: &SyntaxNode, out: &mut SubtreeMultiset) {
    if !node.children.is_empty() {
        *out.entry(serialize(node)).or_insert(0) += 1;
    }
    for child in &node.children {
        collect(child, out);
    }
}

fn serialize(node: &SyntaxNode) -> String {
    let kinds: Vec<&str> = node.children.iter().map(|c| c.kind.name()).collect();
    format!("{}({})", node.kind.name(), kinds.join(","))
}

/// Total number of subtrees, multiplicity included.
pub fn total(multiset: &SubtreeMultiset) -> usize {
    multiset.values().sum()
}
