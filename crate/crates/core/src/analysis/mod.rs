//! Code analysis: tokenization, parsing, and the structural extractions
//! (subtree multisets, def-use graphs) behind the CodeBLEU submetrics.
//!
//! The grammar is the playground's scripting subset — indentation-structured,
//! async-aware, with signal get/set call chains. Parsing is total in the
//! sense that any input yields either a tree or a [`ParseError`] value;
//! nothing here panics on malformed text, because candidate code comes from
//! language models and is frequently broken.

mod ast;
mod dataflow;
mod parser;
mod subtree;
mod token;

pub use ast::{NodeKind, ParseError, Span, SyntaxNode, SyntaxTree};
pub use dataflow::{extract_dataflow, DataflowEdge, DataflowGraph};
pub use parser::parse;
pub use subtree::{extract_subtrees, total as subtree_total, SubtreeMultiset};
pub use token::{
    is_keyword, metric_tokens, tokenize, LexError, MetricToken, Token, TokenKind, KEYWORDS,
};
