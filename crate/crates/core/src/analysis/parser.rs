//! Recursive-descent parser for the benchmark's scripting subset.
//!
//! Covered: module-level statements, (async) function definitions, `if` /
//! `elif` / `else`, `while`, `for`, `try` / `except` / `finally`, `return`,
//! `raise`, `pass`, `break`, `continue`, imports, assignments (plain,
//! chained, augmented, tuple targets), await, calls with positional and
//! keyword arguments, attribute access, subscripts and simple slices, the
//! usual operators, conditional expressions, and literal forms (numbers,
//! strings, booleans, `None`, lists, tuples, sets, dicts).
//!
//! Anything outside the subset (classes, `with`, `lambda`, comprehensions,
//! star-args, ...) produces a [`ParseError`] with the offending position —
//! parsing never panics, and recursion is depth-limited so adversarial
//! nesting cannot overflow the stack.

use super::ast::{NodeKind, ParseError, Span, SyntaxNode, SyntaxTree};
use super::token::{tokenize, Token, TokenKind};

/// Maximum expression / block nesting depth before the parser refuses.
/// Benchmark solutions nest a handful of levels; the bound exists so that
/// adversarial input exhausts neither the parser stack nor the recursive
/// consumers of the tree, even in unoptimized builds with fat frames.
const MAX_DEPTH: usize = 48;

/// Parse source text into a syntax tree.
pub fn parse(source: &str) -> Result<SyntaxTree, ParseError> {
    let tokens = tokenize(source).map_err(|e| ParseError {
        line: e.line,
        column: e.column,
        message: e.message,
    })?;
    let tokens: Vec<Token> = tokens
        .into_iter()
        .filter(|t| t.kind != TokenKind::Comment)
        .collect();
    Parser::new(tokens, source.len()).module()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
    /// Byte offset one past the last consumed non-synthetic token.
    last_end: usize,
    src_len: usize,
    /// Inside a `for` target: `in` terminates the target instead of being
    /// a comparison operator.
    no_in: bool,
}

impl Parser {
    fn new(tokens: Vec<Token>, src_len: usize) -> Self {
        Self {
            tokens,
            pos: 0,
            depth: 0,
            last_end: 0,
            src_len,
            no_in: false,
        }
    }

    // ----- token plumbing -------------------------------------------------

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<TokenKind> {
        self.peek().map(|t| t.kind)
    }

    /// True when the next token has this exact text (keywords, operators,
    /// delimiters).
    fn at(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.text == text && !t.is_synthetic())
    }

    fn at_kind(&self, kind: TokenKind) -> bool {
        self.peek_kind() == Some(kind)
    }

    fn bump(&mut self) -> Token {
        let token = self.tokens[self.pos].clone();
        self.pos += 1;
        if !token.is_synthetic() {
            self.last_end = token.offset + token.text.len();
        }
        token
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, text: &str) -> Result<Token, ParseError> {
        if self.at(text) {
            Ok(self.bump())
        } else {
            Err(self.error_here(format!("expected '{text}'")))
        }
    }

    fn expect_kind(&mut self, kind: TokenKind) -> Result<Token, ParseError> {
        if self.at_kind(kind) {
            Ok(self.bump())
        } else {
            Err(self.error_here(format!("expected {kind}")))
        }
    }

    fn error_here(&self, message: String) -> ParseError {
        match self.peek() {
            Some(t) => ParseError {
                line: t.line,
                column: t.column,
                message: if t.is_synthetic() || t.kind == TokenKind::Newline {
                    format!("{message}, found {}", t.kind)
                } else {
                    format!("{message}, found '{}'", t.text)
                },
            },
            None => {
                let (line, column) = self
                    .tokens
                    .last()
                    .map(|t| (t.line, t.column))
                    .unwrap_or((1, 1));
                ParseError {
                    line,
                    column,
                    message: format!("{message}, found end of input"),
                }
            }
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(self.error_here("nesting too deep".into()))
        } else {
            Ok(())
        }
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    // ----- span & node helpers --------------------------------------------

    /// Span anchor: position of the token about to be consumed.
    fn start(&self) -> (usize, u32, u32) {
        match self.peek() {
            Some(t) => (t.offset, t.line, t.column),
            None => (self.src_len, 1, 1),
        }
    }

    fn span_from(&self, start: (usize, u32, u32)) -> Span {
        Span {
            start: start.0,
            end: self.last_end.max(start.0),
            line: start.1,
            column: start.2,
        }
    }

    fn node(
        &self,
        kind: NodeKind,
        text: Option<String>,
        children: Vec<SyntaxNode>,
        start: (usize, u32, u32),
    ) -> SyntaxNode {
        SyntaxNode {
            kind,
            text,
            children,
            span: self.span_from(start),
        }
    }

    // ----- statements -----------------------------------------------------

    fn module(mut self) -> Result<SyntaxTree, ParseError> {
        let start = self.start();
        let mut stmts = Vec::new();
        while self.peek().is_some() {
            if self.at_kind(TokenKind::Newline) {
                self.bump();
                continue;
            }
            stmts.push(self.statement()?);
        }
        let module = self.node(NodeKind::Module, None, stmts, start);
        Ok(SyntaxTree::new(module))
    }

    fn statement(&mut self) -> Result<SyntaxNode, ParseError> {
        self.enter()?;
        let result = self.statement_inner();
        self.leave();
        result
    }

    fn statement_inner(&mut self) -> Result<SyntaxNode, ParseError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Keyword => match t.text.as_str() {
                "if" => return self.if_statement(),
                "while" => return self.while_statement(),
                "for" => return self.for_statement(),
                "try" => return self.try_statement(),
                "def" => return self.function_def(false),
                "async" => return self.async_statement(),
                "class" | "with" | "lambda" | "yield" | "del" | "assert" | "global"
                | "nonlocal" | "raise" | "return" | "pass" | "break" | "continue" | "import"
                | "from" => {}
                _ => {}
            },
            _ => {}
        }
        self.simple_line()
    }

    /// One simple statement terminated by a newline (or dedent / EOF).
    fn simple_line(&mut self) -> Result<SyntaxNode, ParseError> {
        let stmt = self.small_statement()?;
        self.end_of_line()?;
        Ok(stmt)
    }

    fn end_of_line(&mut self) -> Result<(), ParseError> {
        match self.peek_kind() {
            Some(TokenKind::Newline) => {
                self.bump();
                Ok(())
            }
            Some(TokenKind::Dedent) | None => Ok(()),
            _ => Err(self.error_here("expected newline".into())),
        }
    }

    fn small_statement(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        if self.at_kind(TokenKind::Keyword) {
            let kw = self.peek().expect("checked").text.clone();
            match kw.as_str() {
                "return" => {
                    self.bump();
                    let value = if self.ends_statement() {
                        Vec::new()
                    } else {
                        vec![self.expression_list()?]
                    };
                    return Ok(self.node(NodeKind::Return, None, value, start));
                }
                "raise" => {
                    self.bump();
                    let mut children = Vec::new();
                    if !self.ends_statement() {
                        children.push(self.expression()?);
                        if self.eat("from") {
                            children.push(self.expression()?);
                        }
                    }
                    return Ok(self.node(NodeKind::Raise, None, children, start));
                }
                "pass" => {
                    self.bump();
                    return Ok(self.node(NodeKind::Pass, None, Vec::new(), start));
                }
                "break" => {
                    self.bump();
                    return Ok(self.node(NodeKind::Break, None, Vec::new(), start));
                }
                "continue" => {
                    self.bump();
                    return Ok(self.node(NodeKind::Continue, None, Vec::new(), start));
                }
                "import" => return self.import_statement(),
                "from" => return self.parse_from_import(),
                "class" | "with" | "lambda" | "yield" | "del" | "assert" | "global"
                | "nonlocal" => {
                    return Err(self.error_here(format!("'{kw}' is not supported")));
                }
                _ => {}
            }
        }
        self.assignment_or_expression()
    }

    fn ends_statement(&self) -> bool {
        matches!(
            self.peek_kind(),
            None | Some(TokenKind::Newline) | Some(TokenKind::Dedent)
        )
    }

    fn assignment_or_expression(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        let first = self.expression_list()?;
        if self.at("=") {
            let mut parts = vec![first];
            while self.eat("=") {
                parts.push(self.expression_list()?);
            }
            let value = parts.pop().expect("at least the value");
            for target in &parts {
                self.check_target(target)?;
            }
            parts.push(value);
            return Ok(self.node(NodeKind::Assign, None, parts, start));
        }
        if let Some(op) = self.peek_aug_op() {
            self.check_target(&first)?;
            self.bump();
            let value = self.expression_list()?;
            return Ok(self.node(NodeKind::AugAssign, Some(op), vec![first, value], start));
        }
        Ok(self.node(NodeKind::ExprStmt, None, vec![first], start))
    }

    fn peek_aug_op(&self) -> Option<String> {
        const AUG: &[&str] = &[
            "+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "|=", "^=",
        ];
        let t = self.peek()?;
        if t.kind == TokenKind::Operator && AUG.contains(&t.text.as_str()) {
            Some(t.text.clone())
        } else {
            None
        }
    }

    fn check_target(&self, node: &SyntaxNode) -> Result<(), ParseError> {
        let ok = match node.kind {
            NodeKind::Name | NodeKind::Attribute | NodeKind::Subscript => true,
            NodeKind::Tuple | NodeKind::List => {
                return node.children.iter().try_for_each(|c| self.check_target(c));
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(ParseError {
                line: node.span.line,
                column: node.span.column,
                message: format!("invalid assignment target: {}", node.kind),
            })
        }
    }

    fn import_statement(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        self.expect("import")?;
        let mut aliases = vec![self.import_alias()?];
        while self.eat(",") {
            aliases.push(self.import_alias()?);
        }
        Ok(self.node(NodeKind::Import, None, aliases, start))
    }

    fn parse_from_import(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        self.expect("from")?;
        let module = self.dotted_name()?;
        self.expect("import")?;
        let mut aliases = vec![self.import_alias()?];
        while self.eat(",") {
            aliases.push(self.import_alias()?);
        }
        Ok(self.node(NodeKind::ImportFrom, Some(module), aliases, start))
    }

    /// `a.b.c [as name]` — the alias node's text is the name the import
    /// binds in the current scope.
    fn import_alias(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        let path = self.dotted_name()?;
        let bound = if self.eat("as") {
            self.expect_kind(TokenKind::Identifier)?.text
        } else {
            // `import a.b` binds `a`; `from m import x` binds `x`
            path.split('.').next().expect("split is non-empty").to_string()
        };
        let mut node = self.node(NodeKind::Alias, Some(bound), Vec::new(), start);
        if path.contains('.') || node.text.as_deref() != Some(path.as_str()) {
            // keep the full source path around for rendering / debugging
            node.children.push(SyntaxNode {
                kind: NodeKind::Constant,
                text: Some(path),
                children: Vec::new(),
                span: node.span,
            });
        }
        Ok(node)
    }

    fn dotted_name(&mut self) -> Result<String, ParseError> {
        let mut name = self.expect_kind(TokenKind::Identifier)?.text;
        while self.at(".") {
            // only part of the dotted name if an identifier follows
            let next = self.tokens.get(self.pos + 1);
            if next.is_some_and(|t| t.kind == TokenKind::Identifier) {
                self.bump();
                name.push('.');
                name.push_str(&self.bump().text);
            } else {
                break;
            }
        }
        Ok(name)
    }

    // ----- compound statements ---------------------------------------------

    fn if_statement(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        self.expect("if")?;
        self.if_tail(start)
    }

    /// Shared by `if` and `elif`: condition, suite, optional else/elif part.
    fn if_tail(&mut self, start: (usize, u32, u32)) -> Result<SyntaxNode, ParseError> {
        let test = self.expression()?;
        self.expect(":")?;
        let body = self.suite()?;
        let mut children = vec![test, body];
        if self.at("elif") {
            let elif_start = self.start();
            self.expect("elif")?;
            let nested = self.if_tail(elif_start)?;
            let block = SyntaxNode {
                span: nested.span,
                kind: NodeKind::Block,
                text: None,
                children: vec![nested],
            };
            children.push(block);
        } else if self.eat("else") {
            self.expect(":")?;
            children.push(self.suite()?);
        }
        Ok(self.node(NodeKind::If, None, children, start))
    }

    fn while_statement(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        self.expect("while")?;
        let test = self.expression()?;
        self.expect(":")?;
        let body = self.suite()?;
        let mut children = vec![test, body];
        if self.eat("else") {
            self.expect(":")?;
            children.push(self.suite()?);
        }
        Ok(self.node(NodeKind::While, None, children, start))
    }

    fn for_statement(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        self.expect("for")?;
        self.no_in = true;
        let target = self.target_list();
        self.no_in = false;
        let target = target?;
        self.expect("in")?;
        let iter = self.expression_list()?;
        self.expect(":")?;
        let body = self.suite()?;
        let mut children = vec![target, iter, body];
        if self.eat("else") {
            self.expect(":")?;
            children.push(self.suite()?);
        }
        Ok(self.node(NodeKind::For, None, children, start))
    }

    fn target_list(&mut self) -> Result<SyntaxNode, ParseError> {
        let node = self.expression_list()?;
        self.check_target(&node)?;
        Ok(node)
    }

    fn try_statement(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        self.expect("try")?;
        self.expect(":")?;
        let body = self.suite()?;
        let mut children = vec![body];
        let mut handlers = 0;
        while self.at("except") {
            children.push(self.except_handler()?);
            handlers += 1;
        }
        if self.eat("else") {
            if handlers == 0 {
                return Err(self.error_here("'else' requires an 'except' clause".into()));
            }
            self.expect(":")?;
            children.push(self.suite()?);
        }
        let mut has_finally = false;
        if self.eat("finally") {
            self.expect(":")?;
            children.push(self.suite()?);
            has_finally = true;
        }
        if handlers == 0 && !has_finally {
            return Err(self.error_here("expected 'except' or 'finally'".into()));
        }
        Ok(self.node(NodeKind::Try, None, children, start))
    }

    /// `except [Type [as name]]: suite` — the handler's text is the bound
    /// name, its children are the optional exception expression and the body.
    fn except_handler(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        self.expect("except")?;
        let mut text = None;
        let mut children = Vec::new();
        if !self.at(":") {
            children.push(self.expression()?);
            if self.eat("as") {
                text = Some(self.expect_kind(TokenKind::Identifier)?.text);
            }
        }
        self.expect(":")?;
        children.push(self.suite()?);
        Ok(self.node(NodeKind::ExceptHandler, text, children, start))
    }

    fn async_statement(&mut self) -> Result<SyntaxNode, ParseError> {
        self.expect("async")?;
        if self.at("def") {
            self.function_def(true)
        } else {
            Err(self.error_here("only 'async def' is supported".into()))
        }
    }

    fn function_def(&mut self, is_async: bool) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        self.expect("def")?;
        let name = self.expect_kind(TokenKind::Identifier)?.text;
        let params = self.parameters()?;
        if self.eat("->") {
            // return annotation: parsed and discarded from the tree shape
            let _annotation = self.expression()?;
        }
        self.expect(":")?;
        let body = self.suite()?;
        let kind = if is_async {
            NodeKind::AsyncFunctionDef
        } else {
            NodeKind::FunctionDef
        };
        Ok(self.node(kind, Some(name), vec![params, body], start))
    }

    fn parameters(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        self.expect("(")?;
        let mut params = Vec::new();
        while !self.at(")") {
            let p_start = self.start();
            let name = self.expect_kind(TokenKind::Identifier)?.text;
            if self.eat(":") {
                let _annotation = self.expression()?;
            }
            let mut children = Vec::new();
            if self.eat("=") {
                children.push(self.expression()?);
            }
            params.push(self.node(NodeKind::Param, Some(name), children, p_start));
            if !self.eat(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok(self.node(NodeKind::Parameters, None, params, start))
    }

    fn suite(&mut self) -> Result<SyntaxNode, ParseError> {
        self.enter()?;
        let result = self.suite_inner();
        self.leave();
        result
    }

    fn suite_inner(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        if self.at_kind(TokenKind::Newline) {
            self.bump();
            self.expect_kind(TokenKind::Indent)?;
            let mut stmts = Vec::new();
            loop {
                match self.peek_kind() {
                    Some(TokenKind::Dedent) => {
                        self.bump();
                        break;
                    }
                    Some(TokenKind::Newline) => {
                        self.bump();
                    }
                    Some(_) => stmts.push(self.statement()?),
                    None => return Err(self.error_here("expected dedent".into())),
                }
            }
            if stmts.is_empty() {
                return Err(self.error_here("empty block".into()));
            }
            Ok(self.node(NodeKind::Block, None, stmts, start))
        } else {
            // single statement on the same line: `if x: y = 1`
            let stmt = self.simple_line()?;
            Ok(self.node(NodeKind::Block, None, vec![stmt], start))
        }
    }

    // ----- expressions ------------------------------------------------------

    /// Comma-separated expressions become a Tuple; a single expression is
    /// returned unchanged.
    fn expression_list(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        let first = self.expression()?;
        if !self.at(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat(",") {
            if self.ends_expression() {
                break; // trailing comma
            }
            items.push(self.expression()?);
        }
        Ok(self.node(NodeKind::Tuple, None, items, start))
    }

    fn ends_expression(&self) -> bool {
        match self.peek() {
            None => true,
            Some(t) => matches!(
                t.kind,
                TokenKind::Newline | TokenKind::Dedent | TokenKind::Indent
            ) || matches!(t.text.as_str(), ")" | "]" | "}" | ":" | "=" | "in"),
        }
    }

    fn expression(&mut self) -> Result<SyntaxNode, ParseError> {
        self.enter()?;
        let result = self.conditional();
        self.leave();
        result
    }

    /// `value if test else other`
    fn conditional(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        let value = self.or_expression()?;
        if !self.at("if") {
            return Ok(value);
        }
        self.bump();
        let test = self.or_expression()?;
        self.expect("else")?;
        let other = self.expression()?;
        Ok(self.node(NodeKind::IfExp, None, vec![value, test, other], start))
    }

    fn or_expression(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        let first = self.and_expression()?;
        if !self.at("or") {
            return Ok(first);
        }
        let mut operands = vec![first];
        while self.eat("or") {
            operands.push(self.and_expression()?);
        }
        Ok(self.node(NodeKind::BoolOp, Some("or".into()), operands, start))
    }

    fn and_expression(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        let first = self.not_expression()?;
        if !self.at("and") {
            return Ok(first);
        }
        let mut operands = vec![first];
        while self.eat("and") {
            operands.push(self.not_expression()?);
        }
        Ok(self.node(NodeKind::BoolOp, Some("and".into()), operands, start))
    }

    fn not_expression(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        if self.eat("not") {
            self.enter()?;
            let operand = self.not_expression();
            self.leave();
            return Ok(self.node(NodeKind::UnaryOp, Some("not".into()), vec![operand?], start));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        let first = self.arithmetic()?;
        let mut ops: Vec<String> = Vec::new();
        let mut operands = vec![first];
        loop {
            let op = match self.peek() {
                Some(t) if matches!(t.text.as_str(), "<" | ">" | "<=" | ">=" | "==" | "!=") => {
                    self.bump().text
                }
                Some(t) if t.text == "in" && t.kind == TokenKind::Keyword && !self.no_in => {
                    self.bump();
                    "in".to_string()
                }
                Some(t) if t.text == "not" && t.kind == TokenKind::Keyword && !self.no_in => {
                    self.bump();
                    self.expect("in")?;
                    "not in".to_string()
                }
                Some(t) if t.text == "is" && t.kind == TokenKind::Keyword => {
                    self.bump();
                    if self.eat("not") {
                        "is not".to_string()
                    } else {
                        "is".to_string()
                    }
                }
                _ => break,
            };
            ops.push(op);
            operands.push(self.arithmetic()?);
        }
        if ops.is_empty() {
            return Ok(operands.pop().expect("one operand"));
        }
        Ok(self.node(NodeKind::Compare, Some(ops.join(" ")), operands, start))
    }

    fn arithmetic(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        let mut left = self.term()?;
        loop {
            let op = match self.peek() {
                Some(t)
                    if t.kind == TokenKind::Operator
                        && matches!(t.text.as_str(), "+" | "-" | "|" | "^" | "&" | ">>" | "<<") =>
                {
                    self.bump().text
                }
                _ => break,
            };
            let right = self.term()?;
            left = self.node(NodeKind::BinOp, Some(op), vec![left, right], start);
        }
        Ok(left)
    }

    fn term(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        let mut left = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(t)
                    if t.kind == TokenKind::Operator
                        && matches!(t.text.as_str(), "*" | "/" | "//" | "%" | "@") =>
                {
                    self.bump().text
                }
                _ => break,
            };
            let right = self.factor()?;
            left = self.node(NodeKind::BinOp, Some(op), vec![left, right], start);
        }
        Ok(left)
    }

    fn factor(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        match self.peek() {
            Some(t)
                if t.kind == TokenKind::Operator
                    && matches!(t.text.as_str(), "+" | "-" | "~") =>
            {
                let op = self.bump().text;
                self.enter()?;
                let operand = self.factor();
                self.leave();
                Ok(self.node(NodeKind::UnaryOp, Some(op), vec![operand?], start))
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        let base = self.await_or_primary()?;
        if self.at("**") {
            self.bump();
            let exponent = self.factor()?; // right-associative
            return Ok(self.node(NodeKind::BinOp, Some("**".into()), vec![base, exponent], start));
        }
        Ok(base)
    }

    fn await_or_primary(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        if self.at("await") {
            self.bump();
            self.enter()?;
            let operand = self.await_or_primary();
            self.leave();
            return Ok(self.node(NodeKind::Await, None, vec![operand?], start));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        let mut node = self.atom()?;
        loop {
            if self.at("(") {
                node = self.call(node, start)?;
            } else if self.at(".") {
                self.bump();
                let name = self.expect_kind(TokenKind::Identifier)?.text;
                node = self.node(NodeKind::Attribute, Some(name), vec![node], start);
            } else if self.at("[") {
                self.bump();
                let index = self.subscript_index()?;
                self.expect("]")?;
                node = self.node(NodeKind::Subscript, None, vec![node, index], start);
            } else {
                break;
            }
        }
        Ok(node)
    }

    fn call(&mut self, callee: SyntaxNode, start: (usize, u32, u32)) -> Result<SyntaxNode, ParseError> {
        self.expect("(")?;
        let mut children = vec![callee];
        while !self.at(")") {
            children.push(self.call_argument()?);
            if !self.eat(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok(self.node(NodeKind::Call, None, children, start))
    }

    fn call_argument(&mut self) -> Result<SyntaxNode, ParseError> {
        if self.at("*") || self.at("**") {
            return Err(self.error_here("star arguments are not supported".into()));
        }
        // keyword argument: identifier '=' value (but not '==')
        if self.at_kind(TokenKind::Identifier)
            && self.tokens.get(self.pos + 1).is_some_and(|t| t.text == "=")
        {
            let start = self.start();
            let name = self.bump().text;
            self.bump(); // '='
            let value = self.expression()?;
            return Ok(self.node(NodeKind::KeywordArg, Some(name), vec![value], start));
        }
        self.expression()
    }

    /// Index expression or a simple `lower:upper[:step]` slice.
    fn subscript_index(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        let lower = if self.at(":") { None } else { Some(self.expression()?) };
        if !self.at(":") {
            return lower.ok_or_else(|| self.error_here("expected subscript expression".into()));
        }
        self.bump();
        let upper = if self.at(":") || self.at("]") {
            None
        } else {
            Some(self.expression()?)
        };
        let step = if self.eat(":") {
            if self.at("]") {
                None
            } else {
                Some(self.expression()?)
            }
        } else {
            None
        };
        let children = [lower, upper, step].into_iter().flatten().collect();
        Ok(self.node(NodeKind::Slice, None, children, start))
    }

    fn atom(&mut self) -> Result<SyntaxNode, ParseError> {
        let start = self.start();
        let Some(token) = self.peek() else {
            return Err(self.error_here("expected expression".into()));
        };
        match token.kind {
            TokenKind::Identifier => {
                let name = self.bump().text;
                Ok(self.node(NodeKind::Name, Some(name), Vec::new(), start))
            }
            TokenKind::Number | TokenKind::String => {
                let text = self.bump().text;
                Ok(self.node(NodeKind::Constant, Some(text), Vec::new(), start))
            }
            TokenKind::Keyword if matches!(token.text.as_str(), "True" | "False" | "None") => {
                let text = self.bump().text;
                Ok(self.node(NodeKind::Constant, Some(text), Vec::new(), start))
            }
            TokenKind::Delimiter if token.text == "(" => self.paren_atom(start),
            TokenKind::Delimiter if token.text == "[" => self.list_atom(start),
            TokenKind::Delimiter if token.text == "{" => self.brace_atom(start),
            _ => Err(self.error_here("expected expression".into())),
        }
    }

    fn paren_atom(&mut self, start: (usize, u32, u32)) -> Result<SyntaxNode, ParseError> {
        self.expect("(")?;
        if self.eat(")") {
            return Ok(self.node(NodeKind::Tuple, None, Vec::new(), start));
        }
        let first = self.expression()?;
        if self.at(",") {
            let mut items = vec![first];
            while self.eat(",") {
                if self.at(")") {
                    break;
                }
                items.push(self.expression()?);
            }
            self.expect(")")?;
            return Ok(self.node(NodeKind::Tuple, None, items, start));
        }
        self.expect(")")?;
        Ok(first) // parenthesized expression, no extra node
    }

    fn list_atom(&mut self, start: (usize, u32, u32)) -> Result<SyntaxNode, ParseError> {
        self.expect("[")?;
        let mut items = Vec::new();
        while !self.at("]") {
            items.push(self.expression()?);
            if self.at("for") {
                return Err(self.error_here("comprehensions are not supported".into()));
            }
            if !self.eat(",") {
                break;
            }
        }
        self.expect("]")?;
        Ok(self.node(NodeKind::List, None, items, start))
    }

    /// `{}` and `{k: v, ...}` are dicts; `{a, b}` is a set.
    fn brace_atom(&mut self, start: (usize, u32, u32)) -> Result<SyntaxNode, ParseError> {
        self.expect("{")?;
        if self.eat("}") {
            return Ok(self.node(NodeKind::Dict, None, Vec::new(), start));
        }
        let first_start = self.start();
        let first = self.expression()?;
        if self.at(":") {
            let mut pairs = Vec::new();
            self.bump();
            let value = self.expression()?;
            pairs.push(self.node(NodeKind::Pair, None, vec![first, value], first_start));
            while self.eat(",") {
                if self.at("}") {
                    break;
                }
                let pair_start = self.start();
                let key = self.expression()?;
                self.expect(":")?;
                let value = self.expression()?;
                pairs.push(self.node(NodeKind::Pair, None, vec![key, value], pair_start));
            }
            self.expect("}")?;
            return Ok(self.node(NodeKind::Dict, None, pairs, start));
        }
        let mut items = vec![first];
        while self.eat(",") {
            if self.at("}") {
                break;
            }
            items.push(self.expression()?);
        }
        if self.at("for") {
            return Err(self.error_here("comprehensions are not supported".into()));
        }
        self.expect("}")?;
        Ok(self.node(NodeKind::Set, None, items, start))
    }
}
