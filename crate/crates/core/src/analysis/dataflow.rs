//! Reaching-definition (def-use) extraction for the dataflow submetric.
//!
//! The analysis is intraprocedural: every function body is its own scope,
//! module level is a scope, and calls are barriers (arguments are uses,
//! nothing flows through the call). A forward scan gives straight-line
//! precision; `if`/`else` joins merge both arms, and loop bodies are scanned
//! against a widened environment so uses can see definitions from earlier
//! iterations.
//!
//! Sites are source lines. Columns are deliberately not part of the graph:
//! a consistent identifier renaming never moves code across lines but does
//! shift intra-line offsets, and the normalized graph must be invariant
//! under such renaming.
//!
//! Variable names are normalized positionally — the first-defined variable
//! becomes `var0`, the next `var1`, and so on, with one instance per
//! (scope, name) pair. Names that are only ever read (builtins, external
//! APIs) get `ext0`, `ext1`, ... in first-use order and never carry edges.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ast::{NodeKind, SyntaxNode, SyntaxTree};

/// One def-use link: the use on `use_line` can observe the definition of
/// `var` made on `def_line`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DataflowEdge {
    pub var: String,
    pub use_line: u32,
    pub def_line: u32,
}

impl fmt::Display for DataflowEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "use({}, line {}) -> def({}, line {})",
            self.var, self.use_line, self.var, self.def_line
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DataflowGraph {
    /// Every definition event in document order: (normalized var, line).
    pub defs: Vec<(String, u32)>,
    /// Every use event in document order: (normalized var, line).
    pub uses: Vec<(String, u32)>,
    pub edges: BTreeSet<DataflowEdge>,
}

/// Extract the normalized def-use graph of a parsed program.
pub fn extract_dataflow(tree: &SyntaxTree) -> DataflowGraph {
    let mut extractor = Extractor::default();
    let mut env = Env::new();
    extractor.scan_block(&tree.root().children, &mut env, 0);
    extractor.normalize()
}

/// Reaching definitions currently visible for each raw name in one scope:
/// name → set of def lines.
type Env = BTreeMap<String, BTreeSet<u32>>;

/// A variable instance: (scope id, raw name).
type VarKey = (usize, String);

#[derive(Default)]
struct Extractor {
    next_scope: usize,
    def_events: Vec<(VarKey, u32)>,
    use_events: Vec<(VarKey, u32)>,
    raw_edges: Vec<(VarKey, u32, u32)>, // (var, use line, def line)
}

impl Extractor {
    fn fresh_scope(&mut self) -> usize {
        self.next_scope += 1;
        self.next_scope
    }

    fn define(&mut self, name: &str, line: u32, env: &mut Env, scope: usize) {
        self.def_events.push(((scope, name.to_string()), line));
        let slot = env.entry(name.to_string()).or_default();
        slot.clear(); // a definite assignment kills earlier defs
        slot.insert(line);
    }

    fn use_name(&mut self, name: &str, line: u32, env: &Env, scope: usize) {
        let key = (scope, name.to_string());
        self.use_events.push((key.clone(), line));
        if let Some(def_lines) = env.get(name) {
            for &def_line in def_lines {
                self.raw_edges.push((key.clone(), line, def_line));
            }
        }
    }

    // ----- statements -------------------------------------------------------

    fn scan_block(&mut self, stmts: &[SyntaxNode], env: &mut Env, scope: usize) {
        for stmt in stmts {
            self.scan_stmt(stmt, env, scope);
        }
    }

    fn scan_stmt(&mut self, stmt: &SyntaxNode, env: &mut Env, scope: usize) {
        match stmt.kind {
            NodeKind::Assign => {
                let (targets, value) = stmt.children.split_at(stmt.children.len() - 1);
                self.scan_expr(&value[0], env, scope);
                for target in targets {
                    self.bind_target(target, env, scope);
                }
            }
            NodeKind::AugAssign => {
                let target = &stmt.children[0];
                // `x += v` reads x, reads v, then redefines x
                if target.kind == NodeKind::Name {
                    self.use_name(target.text(), target.span.line, env, scope);
                } else {
                    self.scan_expr(target, env, scope);
                }
                self.scan_expr(&stmt.children[1], env, scope);
                if target.kind == NodeKind::Name {
                    self.define(target.text(), target.span.line, env, scope);
                }
            }
            NodeKind::ExprStmt | NodeKind::Return | NodeKind::Raise => {
                for child in &stmt.children {
                    self.scan_expr(child, env, scope);
                }
            }
            NodeKind::If => self.scan_if(stmt, env, scope),
            NodeKind::While => self.scan_while(stmt, env, scope),
            NodeKind::For => self.scan_for(stmt, env, scope),
            NodeKind::Try => self.scan_try(stmt, env, scope),
            NodeKind::FunctionDef | NodeKind::AsyncFunctionDef => {
                self.scan_function(stmt, env, scope);
            }
            NodeKind::Import | NodeKind::ImportFrom => {
                for alias in &stmt.children {
                    if alias.kind == NodeKind::Alias {
                        self.define(alias.text(), alias.span.line, env, scope);
                    }
                }
            }
            NodeKind::Pass | NodeKind::Break | NodeKind::Continue => {}
            // blocks do not appear as direct statements, but stay total
            _ => {
                for child in &stmt.children {
                    self.scan_expr(child, env, scope);
                }
            }
        }
    }

    /// Assignment target: names are definitions; attribute / subscript
    /// targets only read their bases; tuples distribute.
    fn bind_target(&mut self, target: &SyntaxNode, env: &mut Env, scope: usize) {
        match target.kind {
            NodeKind::Name => self.define(target.text(), target.span.line, env, scope),
            NodeKind::Tuple | NodeKind::List => {
                for element in &target.children {
                    self.bind_target(element, env, scope);
                }
            }
            _ => self.scan_expr(target, env, scope),
        }
    }

    fn scan_if(&mut self, stmt: &SyntaxNode, env: &mut Env, scope: usize) {
        self.scan_expr(&stmt.children[0], env, scope);
        let mut then_env = env.clone();
        self.scan_block(&stmt.children[1].children, &mut then_env, scope);
        let mut else_env = env.clone();
        if let Some(else_block) = stmt.children.get(2) {
            self.scan_block(&else_block.children, &mut else_env, scope);
        }
        *env = merge(then_env, else_env);
    }

    fn scan_while(&mut self, stmt: &SyntaxNode, env: &mut Env, scope: usize) {
        let body = &stmt.children[1];
        let mut widened = env.clone();
        widen(&mut widened, &collect_defs(&body.children));
        self.scan_expr(&stmt.children[0], &widened, scope);
        let mut body_env = widened;
        self.scan_block(&body.children, &mut body_env, scope);
        *env = merge(env.clone(), body_env);
        if let Some(else_block) = stmt.children.get(2) {
            self.scan_block(&else_block.children, env, scope);
        }
    }

    fn scan_for(&mut self, stmt: &SyntaxNode, env: &mut Env, scope: usize) {
        let target = &stmt.children[0];
        let iter = &stmt.children[1];
        let body = &stmt.children[2];
        self.scan_expr(iter, env, scope);
        let body_defs = collect_defs(&body.children);
        let mut body_env = env.clone();
        widen(&mut body_env, &body_defs);
        // the loop target is (re)bound at the header before every iteration
        self.bind_target(target, &mut body_env, scope);
        // ...but later iterations may also see body redefinitions
        widen_names_of(&mut body_env, target, &body_defs);
        self.scan_block(&body.children, &mut body_env, scope);
        *env = merge(env.clone(), body_env);
        if let Some(else_block) = stmt.children.get(3) {
            self.scan_block(&else_block.children, env, scope);
        }
    }

    fn scan_try(&mut self, stmt: &SyntaxNode, env: &mut Env, scope: usize) {
        let body = &stmt.children[0];
        let mut body_env = env.clone();
        self.scan_block(&body.children, &mut body_env, scope);
        // an exception may fire anywhere in the body, so handlers see both
        // the pre-try state and any subset of body definitions
        let mut at_failure = env.clone();
        widen(&mut at_failure, &collect_defs(&body.children));
        let mut merged = body_env;
        for child in &stmt.children[1..] {
            match child.kind {
                NodeKind::ExceptHandler => {
                    let mut handler_env = at_failure.clone();
                    let body_index = child.children.len() - 1;
                    for typ in &child.children[..body_index] {
                        self.scan_expr(typ, &handler_env, scope);
                    }
                    if let Some(name) = &child.text {
                        self.define(name, child.span.line, &mut handler_env, scope);
                    }
                    self.scan_block(&child.children[body_index].children, &mut handler_env, scope);
                    merged = merge(merged, handler_env);
                }
                // `else` and `finally` run on the merged state
                _ => self.scan_block(&child.children, &mut merged, scope),
            }
        }
        *env = merged;
    }

    fn scan_function(&mut self, stmt: &SyntaxNode, env: &mut Env, scope: usize) {
        // the function name binds in the enclosing scope
        self.define(stmt.text(), stmt.span.line, env, scope);
        let params = &stmt.children[0];
        let body = &stmt.children[1];
        // defaults are evaluated at definition time in the enclosing scope
        for param in &params.children {
            for default in &param.children {
                self.scan_expr(default, env, scope);
            }
        }
        let inner_scope = self.fresh_scope();
        let mut inner_env = Env::new();
        for param in &params.children {
            self.define(param.text(), param.span.line, &mut inner_env, inner_scope);
        }
        self.scan_block(&body.children, &mut inner_env, inner_scope);
    }

    // ----- expressions ------------------------------------------------------

    fn scan_expr(&mut self, expr: &SyntaxNode, env: &Env, scope: usize) {
        match expr.kind {
            NodeKind::Name => self.use_name(expr.text(), expr.span.line, env, scope),
            NodeKind::Constant => {}
            // attribute names and keyword-argument names are not variables
            _ => {
                for child in &expr.children {
                    self.scan_expr(child, env, scope);
                }
            }
        }
    }

    // ----- normalization ----------------------------------------------------

    fn normalize(self) -> DataflowGraph {
        let mut names: BTreeMap<VarKey, String> = BTreeMap::new();
        for (key, _) in &self.def_events {
            let next = format!("var{}", names.len());
            names.entry(key.clone()).or_insert(next);
        }
        let defined = names.len();
        for (key, _) in &self.use_events {
            let next = format!("ext{}", names.len() - defined);
            names.entry(key.clone()).or_insert(next);
        }
        DataflowGraph {
            defs: self
                .def_events
                .iter()
                .map(|(key, line)| (names[key].clone(), *line))
                .collect(),
            uses: self
                .use_events
                .iter()
                .map(|(key, line)| (names[key].clone(), *line))
                .collect(),
            edges: self
                .raw_edges
                .iter()
                .map(|(key, use_line, def_line)| DataflowEdge {
                    var: names[key].clone(),
                    use_line: *use_line,
                    def_line: *def_line,
                })
                .collect(),
        }
    }
}

fn merge(mut a: Env, b: Env) -> Env {
    for (name, lines) in b {
        a.entry(name).or_default().extend(lines);
    }
    a
}

/// Add every collected definition line to the environment without killing
/// what is already there.
fn widen(env: &mut Env, defs: &BTreeMap<String, BTreeSet<u32>>) {
    for (name, lines) in defs {
        env.entry(name.clone()).or_default().extend(lines.iter().copied());
    }
}

/// Re-add body definition lines for exactly the names bound by a loop
/// target (whose header binding just killed them).
fn widen_names_of(env: &mut Env, target: &SyntaxNode, defs: &BTreeMap<String, BTreeSet<u32>>) {
    match target.kind {
        NodeKind::Name => {
            if let Some(lines) = defs.get(target.text()) {
                env.entry(target.text().to_string())
                    .or_default()
                    .extend(lines.iter().copied());
            }
        }
        NodeKind::Tuple | NodeKind::List => {
            for element in &target.children {
                widen_names_of(env, element, defs);
            }
        }
        _ => {}
    }
}

/// Names defined anywhere in these statements at the current scope level
/// (function bodies are other scopes; their names still bind here), with
/// the lines where each definition occurs. Used for loop widening — no
/// events are recorded.
fn collect_defs(stmts: &[SyntaxNode]) -> BTreeMap<String, BTreeSet<u32>> {
    let mut out = BTreeMap::new();
    for stmt in stmts {
        collect_stmt_defs(stmt, &mut out);
    }
    out
}

fn collect_stmt_defs(stmt: &SyntaxNode, out: &mut BTreeMap<String, BTreeSet<u32>>) {
    let mut add = |name: &str, line: u32| {
        out.entry(name.to_string()).or_default().insert(line);
    };
    match stmt.kind {
        NodeKind::Assign => {
            for target in &stmt.children[..stmt.children.len() - 1] {
                collect_target_defs(target, out);
            }
        }
        NodeKind::AugAssign => collect_target_defs(&stmt.children[0], out),
        NodeKind::FunctionDef | NodeKind::AsyncFunctionDef => add(stmt.text(), stmt.span.line),
        NodeKind::Import | NodeKind::ImportFrom => {
            for alias in &stmt.children {
                if alias.kind == NodeKind::Alias {
                    add(alias.text(), alias.span.line);
                }
            }
        }
        NodeKind::If | NodeKind::While | NodeKind::Try | NodeKind::Block => {
            for child in &stmt.children {
                collect_stmt_defs(child, out);
            }
        }
        NodeKind::For => {
            collect_target_defs(&stmt.children[0], out);
            for child in &stmt.children[2..] {
                collect_stmt_defs(child, out);
            }
        }
        NodeKind::ExceptHandler => {
            if let Some(name) = &stmt.text {
                add(name, stmt.span.line);
            }
            collect_stmt_defs(stmt.children.last().expect("handler has a body"), out);
        }
        _ => {}
    }
}

fn collect_target_defs(target: &SyntaxNode, out: &mut BTreeMap<String, BTreeSet<u32>>) {
    match target.kind {
        NodeKind::Name => {
            out.entry(target.text().to_string())
                .or_default()
                .insert(target.span.line);
        }
        NodeKind::Tuple | NodeKind::List => {
            for element in &target.children {
                collect_target_defs(element, out);
            }
        }
        _ => {}
    }
}
