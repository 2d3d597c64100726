//! Syntax tree produced by [`crate::analysis::parse`].
//!
//! The tree is deliberately plain: every node has a kind, an optional text
//! payload (identifier names, literal lexemes, attribute / keyword-argument
//! names), a child list, and a source span. Structure-only consumers such as
//! subtree extraction walk `kind` and `children`; dataflow extraction also
//! looks at `text` and spans.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Module,
    FunctionDef,
    AsyncFunctionDef,
    Parameters,
    Param,
    Block,
    Assign,
    AugAssign,
    ExprStmt,
    Return,
    Raise,
    Pass,
    Break,
    Continue,
    Import,
    ImportFrom,
    Alias,
    If,
    While,
    For,
    Try,
    ExceptHandler,
    Call,
    KeywordArg,
    Attribute,
    Subscript,
    Slice,
    Await,
    BinOp,
    UnaryOp,
    BoolOp,
    Compare,
    IfExp,
    Name,
    Constant,
    List,
    Tuple,
    Set,
    Dict,
    Pair,
}

impl NodeKind {
    /// Stable name used in subtree serialization; matches the variant name.
    pub fn name(self) -> &'static str {
        match self {
            Self::Module => "Module",
            Self::FunctionDef => "FunctionDef",
            Self::AsyncFunctionDef => "AsyncFunctionDef",
            Self::Parameters => "Parameters",
            Self::Param => "Param",
            Self::Block => "Block",
            Self::Assign => "Assign",
            Self::AugAssign => "AugAssign",
            Self::ExprStmt => "ExprStmt",
            Self::Return => "Return",
            Self::Raise => "Raise",
            Self::Pass => "Pass",
            Self::Break => "Break",
            Self::Continue => "Continue",
            Self::Import => "Import",
            Self::ImportFrom => "ImportFrom",
            Self::Alias => "Alias",
            Self::If => "If",
            Self::While => "While",
            Self::For => "For",
            Self::Try => "Try",
            Self::ExceptHandler => "ExceptHandler",
            Self::Call => "Call",
            Self::KeywordArg => "KeywordArg",
            Self::Attribute => "Attribute",
            Self::Subscript => "Subscript",
            Self::Slice => "Slice",
            Self::Await => "Await",
            Self::BinOp => "BinOp",
            Self::UnaryOp => "UnaryOp",
            Self::BoolOp => "BoolOp",
            Self::Compare => "Compare",
            Self::IfExp => "IfExp",
            Self::Name => "Name",
            Self::Constant => "Constant",
            Self::List => "List",
            Self::Tuple => "Tuple",
            Self::Set => "Set",
            Self::Dict => "Dict",
            Self::Pair => "Pair",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Start position plus byte range of a node in the original source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Span {
    /// Byte offset of the first token.
    pub start: usize,
    /// Byte offset one past the last token.
    pub end: usize,
    /// 1-based line of the first token.
    pub line: u32,
    /// 1-based column of the first token.
    pub column: u32,
}

impl Span {
    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntaxNode {
    pub kind: NodeKind,
    /// Identifier name, literal lexeme, attribute name, keyword-argument
    /// name, operator symbol, or module path — depending on `kind`.
    pub text: Option<String>,
    pub children: Vec<SyntaxNode>,
    pub span: Span,
}

impl SyntaxNode {
    pub fn text(&self) -> &str {
        self.text.as_deref().unwrap_or("")
    }

    /// Pre-order walk over this node and all descendants.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a SyntaxNode)) {
        visit(self);
        for child in &self.children {
            child.walk(visit);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntaxTree {
    root: SyntaxNode,
}

impl SyntaxTree {
    pub(crate) fn new(root: SyntaxNode) -> Self {
        debug_assert_eq!(root.kind, NodeKind::Module);
        Self { root }
    }

    pub fn root(&self) -> &SyntaxNode {
        &self.root
    }

    /// Number of nodes in the tree, the Module node included.
    pub fn node_count(&self) -> usize {
        let mut count = 0;
        self.root.walk(&mut |_| count += 1);
        count
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {line}:{column}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}
