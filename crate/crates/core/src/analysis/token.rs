//! Lexer for the indentation-structured scripting subset the benchmark
//! solutions are written in.
//!
//! Two entry points share one scanner:
//!
//! - [`tokenize`] is strict and feeds the parser: unterminated strings,
//!   inconsistent dedents, and stray characters are errors.
//! - [`metric_tokens`] is total and feeds the n-gram metrics: it recovers
//!   from anything and never fails, so arbitrary model output can always be
//!   scored.
//!
//! Concatenating the non-synthetic token texts with the original whitespace
//! between them reproduces the source exactly; Indent and Dedent are the
//! only synthetic tokens (empty text).

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Number,
    String,
    Operator,
    Delimiter,
    Newline,
    Indent,
    Dedent,
    Comment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based source line.
    pub line: u32,
    /// 1-based character column within the line.
    pub column: u32,
    /// Byte offset into the source.
    pub offset: usize,
}

impl Token {
    /// Indent and Dedent carry no source text.
    pub fn is_synthetic(&self) -> bool {
        matches!(self.kind, TokenKind::Indent | TokenKind::Dedent)
    }
}

/// Token stream element used by the n-gram metrics: just the text and
/// whether the token is a language keyword.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MetricToken {
    pub text: String,
    pub is_keyword: bool,
}

impl MetricToken {
    pub fn new(text: impl Into<String>, is_keyword: bool) -> Self {
        Self {
            text: text.into(),
            is_keyword,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("lex error at {line}:{column}: {message}")]
pub struct LexError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global",
    "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return",
    "try", "while", "with", "yield",
];

pub fn is_keyword(text: &str) -> bool {
    KEYWORDS.contains(&text)
}

/// Strict tokenization for parsing.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(source, true).run()
}

/// Total tokenization for metric streams: comments and the synthetic
/// layout tokens (Newline, Indent, Dedent) are dropped, and lexical
/// problems are recovered instead of reported.
pub fn metric_tokens(source: &str) -> Vec<MetricToken> {
    let tokens = Lexer::new(source, false).run().expect("lenient lexer is total");
    tokens
        .into_iter()
        .filter(|t| {
            !matches!(
                t.kind,
                TokenKind::Comment | TokenKind::Newline | TokenKind::Indent | TokenKind::Dedent
            )
        })
        .map(|t| MetricToken {
            is_keyword: t.kind == TokenKind::Keyword,
            text: t.text,
        })
        .collect()
}

struct Lexer<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    line: u32,
    column: u32,
    strict: bool,
    indent_stack: Vec<usize>,
    bracket_depth: usize,
    at_line_start: bool,
    tokens: Vec<Token>,
}

const TAB_WIDTH: usize = 8;

impl<'a> Lexer<'a> {
    fn new(src: &'a str, strict: bool) -> Self {
        Self {
            src,
            chars: src.char_indices().collect(),
            pos: 0,
            line: 1,
            column: 1,
            strict,
            indent_stack: vec![0],
            bracket_depth: 0,
            at_line_start: true,
            tokens: Vec::new(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn peek_at(&self, lookahead: usize) -> Option<char> {
        self.chars.get(self.pos + lookahead).map(|&(_, c)| c)
    }

    fn offset(&self) -> usize {
        self.chars
            .get(self.pos)
            .map(|&(o, _)| o)
            .unwrap_or(self.src.len())
    }

    fn bump(&mut self) -> Option<char> {
        let &(_, c) = self.chars.get(self.pos)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> LexError {
        LexError {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn push(&mut self, kind: TokenKind, text: String, line: u32, column: u32, offset: usize) {
        self.tokens.push(Token {
            kind,
            text,
            line,
            column,
            offset,
        });
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        while self.pos < self.chars.len() {
            if self.at_line_start && self.bracket_depth == 0 {
                self.handle_indentation()?;
                if self.pos >= self.chars.len() {
                    break;
                }
                if self.at_line_start {
                    // blank or comment-only line was consumed
                    continue;
                }
            }
            let Some(c) = self.peek() else { break };
            match c {
                '\n' => {
                    if self.bracket_depth == 0 {
                        let (line, column, offset) = (self.line, self.column, self.offset());
                        self.bump();
                        self.push(TokenKind::Newline, "\n".into(), line, column, offset);
                        self.at_line_start = true;
                    } else {
                        self.bump();
                    }
                }
                ' ' | '\t' | '\r' => {
                    self.bump();
                }
                '#' => self.lex_comment(),
                '\'' | '"' => self.lex_string(String::new(), self.line, self.column, self.offset())?,
                c if c.is_ascii_digit() => self.lex_number(),
                '.' if self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) => self.lex_number(),
                c if is_ident_start(c) => self.lex_ident_or_prefixed_string()?,
                _ => self.lex_operator()?,
            }
        }
        if self.bracket_depth == 0 {
            while self.indent_stack.len() > 1 {
                self.indent_stack.pop();
                self.push(
                    TokenKind::Dedent,
                    String::new(),
                    self.line,
                    self.column,
                    self.src.len(),
                );
            }
        }
        Ok(self.tokens)
    }

    /// Measure leading whitespace of a logical line and emit Indent/Dedent.
    /// Blank and comment-only lines do not affect the indent stack.
    fn handle_indentation(&mut self) -> Result<(), LexError> {
        let mut width = 0usize;
        let mark = self.pos;
        while let Some(c) = self.peek() {
            match c {
                ' ' => {
                    width += 1;
                    self.bump();
                }
                '\t' => {
                    width += TAB_WIDTH - (width % TAB_WIDTH);
                    self.bump();
                }
                '\r' => {
                    self.bump();
                }
                _ => break,
            }
        }
        match self.peek() {
            None => return Ok(()),
            Some('\n') => {
                self.bump();
                return Ok(()); // blank line
            }
            Some('#') => {
                self.lex_comment();
                if self.peek() == Some('\n') {
                    self.bump();
                }
                return Ok(()); // comment-only line
            }
            Some(_) => {}
        }
        let current = *self.indent_stack.last().expect("stack never empty");
        let (line, column) = (self.line, self.column);
        let offset = self
            .chars
            .get(mark)
            .map(|&(o, _)| o)
            .unwrap_or(self.src.len());
        if width > current {
            self.indent_stack.push(width);
            self.push(TokenKind::Indent, String::new(), line, column, offset);
        } else if width < current {
            while *self.indent_stack.last().expect("stack never empty") > width {
                self.indent_stack.pop();
                self.push(TokenKind::Dedent, String::new(), line, column, offset);
            }
            if *self.indent_stack.last().expect("stack never empty") != width {
                if self.strict {
                    return Err(self.error("inconsistent indentation"));
                }
                self.indent_stack.push(width);
            }
        }
        self.at_line_start = false;
        Ok(())
    }

    fn lex_comment(&mut self) {
        let (line, column, offset) = (self.line, self.column, self.offset());
        let mut text = String::new();
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            text.push(c);
            self.bump();
        }
        self.push(TokenKind::Comment, text, line, column, offset);
    }

    fn lex_ident_or_prefixed_string(&mut self) -> Result<(), LexError> {
        let (line, column, offset) = (self.line, self.column, self.offset());
        let mut text = String::new();
        while let Some(c) = self.peek() {
            if is_ident_continue(c) {
                text.push(c);
                self.bump();
            } else {
                break;
            }
        }
        // string prefixes like r"...", f'...', rb"..."
        if text.len() <= 2
            && text.chars().all(|c| matches!(c, 'r' | 'b' | 'f' | 'u' | 'R' | 'B' | 'F' | 'U'))
            && matches!(self.peek(), Some('\'') | Some('"'))
        {
            return self.lex_string(text, line, column, offset);
        }
        let kind = if is_keyword(&text) {
            TokenKind::Keyword
        } else {
            TokenKind::Identifier
        };
        self.push(kind, text, line, column, offset);
        Ok(())
    }

    fn lex_string(
        &mut self,
        prefix: String,
        line: u32,
        column: u32,
        offset: usize,
    ) -> Result<(), LexError> {
        let quote = self.peek().expect("caller checked quote");
        let mut text = prefix;
        text.push(quote);
        self.bump();
        let triple = self.peek() == Some(quote) && self.peek_at(1) == Some(quote);
        if triple {
            text.push(quote);
            text.push(quote);
            self.bump();
            self.bump();
        }
        loop {
            match self.peek() {
                None => {
                    if self.strict {
                        return Err(self.error("unterminated string"));
                    }
                    break;
                }
                Some('\\') => {
                    text.push('\\');
                    self.bump();
                    if let Some(escaped) = self.peek() {
                        text.push(escaped);
                        self.bump();
                    }
                }
                Some('\n') if !triple => {
                    if self.strict {
                        return Err(self.error("unterminated string"));
                    }
                    break;
                }
                Some(c) if c == quote => {
                    if triple {
                        if self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote) {
                            text.push(quote);
                            text.push(quote);
                            text.push(quote);
                            self.bump();
                            self.bump();
                            self.bump();
                            break;
                        }
                        text.push(c);
                        self.bump();
                    } else {
                        text.push(c);
                        self.bump();
                        break;
                    }
                }
                Some(c) => {
                    text.push(c);
                    self.bump();
                }
            }
        }
        self.push(TokenKind::String, text, line, column, offset);
        Ok(())
    }

    fn lex_number(&mut self) {
        let (line, column, offset) = (self.line, self.column, self.offset());
        let mut text = String::new();
        if self.peek() == Some('0')
            && matches!(
                self.peek_at(1),
                Some('x') | Some('X') | Some('o') | Some('O') | Some('b') | Some('B')
            )
        {
            text.push(self.bump().expect("digit"));
            text.push(self.bump().expect("radix"));
            while let Some(c) = self.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    text.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
            self.push(TokenKind::Number, text, line, column, offset);
            return;
        }
        let mut seen_dot = false;
        let mut seen_exp = false;
        while let Some(c) = self.peek() {
            match c {
                '0'..='9' | '_' => {
                    text.push(c);
                    self.bump();
                }
                '.' if !seen_dot && !seen_exp => {
                    seen_dot = true;
                    text.push(c);
                    self.bump();
                }
                'e' | 'E' if !seen_exp && !text.is_empty() => {
                    // exponent only when followed by a digit or signed digit
                    let next = self.peek_at(1);
                    let next2 = self.peek_at(2);
                    let signed = matches!(next, Some('+') | Some('-'))
                        && next2.is_some_and(|d| d.is_ascii_digit());
                    if next.is_some_and(|d| d.is_ascii_digit()) || signed {
                        seen_exp = true;
                        text.push(c);
                        self.bump();
                        if signed {
                            let sign = self.bump().expect("sign");
                            text.push(sign);
                        }
                    } else {
                        break;
                    }
                }
                _ => break,
            }
        }
        self.push(TokenKind::Number, text, line, column, offset);
    }

    fn lex_operator(&mut self) -> Result<(), LexError> {
        const THREE: &[&str] = &["**=", "//=", ">>=", "<<=", "..."];
        const TWO: &[&str] = &[
            "**", "//", ">>", "<<", "<=", ">=", "==", "!=", "->", "+=", "-=", "*=", "/=", "%=",
            "&=", "|=", "^=", ":=",
        ];
        let (line, column, offset) = (self.line, self.column, self.offset());
        let c0 = self.peek().expect("caller checked");
        let c1 = self.peek_at(1);
        let c2 = self.peek_at(2);

        let three: String = [Some(c0), c1, c2].iter().flatten().collect();
        if THREE.contains(&three.as_str()) {
            self.bump();
            self.bump();
            self.bump();
            self.push(TokenKind::Operator, three, line, column, offset);
            return Ok(());
        }
        let two: String = [Some(c0), c1].iter().flatten().collect();
        if TWO.contains(&two.as_str()) {
            self.bump();
            self.bump();
            let kind = if two == "->" {
                TokenKind::Delimiter
            } else {
                TokenKind::Operator
            };
            self.push(kind, two, line, column, offset);
            return Ok(());
        }
        match c0 {
            '(' | '[' | '{' => {
                self.bracket_depth += 1;
                self.bump();
                self.push(TokenKind::Delimiter, c0.to_string(), line, column, offset);
            }
            ')' | ']' | '}' => {
                self.bracket_depth = self.bracket_depth.saturating_sub(1);
                self.bump();
                self.push(TokenKind::Delimiter, c0.to_string(), line, column, offset);
            }
            ',' | '.' | ':' | ';' => {
                self.bump();
                self.push(TokenKind::Delimiter, c0.to_string(), line, column, offset);
            }
            '+' | '-' | '*' | '/' | '%' | '<' | '>' | '=' | '&' | '|' | '^' | '~' | '@' | '!' => {
                self.bump();
                self.push(TokenKind::Operator, c0.to_string(), line, column, offset);
            }
            _ => {
                if self.strict {
                    return Err(self.error(format!("unexpected character '{c0}'")));
                }
                self.bump();
                self.push(TokenKind::Operator, c0.to_string(), line, column, offset);
            }
        }
        Ok(())
    }
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Identifier => "identifier",
            Self::Keyword => "keyword",
            Self::Number => "number",
            Self::String => "string",
            Self::Operator => "operator",
            Self::Delimiter => "delimiter",
            Self::Newline => "newline",
            Self::Indent => "indent",
            Self::Dedent => "dedent",
            Self::Comment => "comment",
        };
        f.write_str(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(source: &str) -> Vec<TokenKind> {
        tokenize(source).unwrap().into_iter().map(|t| t.kind).collect()
    }

    fn texts(source: &str) -> Vec<String> {
        tokenize(source).unwrap().into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn simple_assignment() {
        let tokens = tokenize("x = 1").unwrap();
        let got: Vec<(TokenKind, &str)> =
            tokens.iter().map(|t| (t.kind, t.text.as_str())).collect();
        assert_eq!(
            got,
            vec![
                (TokenKind::Identifier, "x"),
                (TokenKind::Operator, "="),
                (TokenKind::Number, "1"),
            ]
        );
    }

    #[test]
    fn empty_source_has_no_tokens() {
        assert!(tokenize("").unwrap().is_empty());
    }

    #[test]
    fn nested_block_has_one_indent_one_dedent() {
        // hand lexing: if / x / : / NL / INDENT / y / = / 1 / NL? -> no
        // trailing newline, so Dedent closes at EOF
        let tokens = tokenize("if x:\n    y = 1").unwrap();
        let indents = tokens.iter().filter(|t| t.kind == TokenKind::Indent).count();
        let dedents = tokens.iter().filter(|t| t.kind == TokenKind::Dedent).count();
        assert_eq!(indents, 1);
        assert_eq!(dedents, 1);
        assert_eq!(
            kinds("if x:\n    y = 1"),
            vec![
                TokenKind::Keyword,
                TokenKind::Identifier,
                TokenKind::Delimiter,
                TokenKind::Newline,
                TokenKind::Indent,
                TokenKind::Identifier,
                TokenKind::Operator,
                TokenKind::Number,
                TokenKind::Dedent,
            ]
        );
    }

    #[test]
    fn blank_and_comment_lines_do_not_change_indentation() {
        let src = "if x:\n    a = 1\n\n    # note\n    b = 2\n";
        let tokens = tokenize(src).unwrap();
        let indents = tokens.iter().filter(|t| t.kind == TokenKind::Indent).count();
        let dedents = tokens.iter().filter(|t| t.kind == TokenKind::Dedent).count();
        assert_eq!(indents, 1);
        assert_eq!(dedents, 1);
    }

    #[test]
    fn brackets_swallow_newlines() {
        let src = "f(1,\n  2)";
        assert!(!kinds(src).contains(&TokenKind::Newline));
        assert!(!kinds(src).contains(&TokenKind::Indent));
    }

    #[test]
    fn unterminated_string_is_strict_error() {
        let err = tokenize("x = 'oops").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("unterminated"));
    }

    #[test]
    fn inconsistent_dedent_is_strict_error() {
        let src = "if x:\n        a = 1\n    b = 2\n";
        let err = tokenize(src).unwrap_err();
        assert!(err.message.contains("indentation"));
        assert_eq!(err.line, 3);
    }

    #[test]
    fn triple_quoted_string_spans_lines() {
        let src = "s = \"\"\"a\nb\"\"\"\n";
        let tokens = tokenize(src).unwrap();
        let string = tokens.iter().find(|t| t.kind == TokenKind::String).unwrap();
        assert_eq!(string.text, "\"\"\"a\nb\"\"\"");
    }

    #[test]
    fn operators_longest_match() {
        assert_eq!(texts("a **= 2"), vec!["a", "**=", "2"]);
        assert_eq!(texts("a == b"), vec!["a", "==", "b"]);
        assert_eq!(texts("a//b"), vec!["a", "//", "b"]);
    }

    #[test]
    fn metric_tokens_drop_layout_and_comments() {
        let stream = metric_tokens("x = 1  # set x\nif x:\n    y = 2\n");
        let texts: Vec<&str> = stream.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, vec!["x", "=", "1", "if", "x", ":", "y", "=", "2"]);
        assert!(stream[3].is_keyword);
        assert!(!stream[0].is_keyword);
    }

    #[test]
    fn metric_tokens_survive_garbage() {
        let stream = metric_tokens("x = 'unterminated\n\u{0}?? $");
        assert!(!stream.is_empty());
    }

    #[test]
    fn reconstruction_from_offsets() {
        let src = "async def main():\n    v = await vehicle.Speed.get()  # read\n    return v\n";
        let tokens = tokenize(src).unwrap();
        let mut cursor = 0usize;
        for token in tokens.iter().filter(|t| !t.is_synthetic()) {
            assert!(src[cursor..token.offset].chars().all(char::is_whitespace));
            assert_eq!(&src[token.offset..token.offset + token.text.len()], token.text);
            cursor = token.offset + token.text.len();
        }
        assert!(src[cursor..].chars().all(char::is_whitespace));
    }
}
