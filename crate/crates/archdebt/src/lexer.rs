//! Tolerant tokenizer for indentation-structured (Python-style) source text.
//!
//! The tokenizer never fails: malformed input degrades into a best-effort
//! token stream plus a list of recovery events. Synthetic `Indent`/`Dedent`
//! tokens are derived from leading whitespace (tabs expand to the next
//! multiple of 8 columns), physical lines joined by a trailing backslash or
//! an open bracket form one logical line, and every stream ends with
//! `EndOfFile`.
//!
//! The normative token grammar, including the operator/operand mapping used
//! for Halstead counting, lives in `docs/token-grammar.md`.

use serde::{Deserialize, Serialize};

/// Lexical class of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Keyword,
    Identifier,
    Operator,
    Delimiter,
    NumberLiteral,
    StringLiteral,
    Comment,
    Newline,
    Indent,
    Dedent,
    EndOfFile,
}

/// One token with its source position (1-based line, 0-based column).
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
    pub column: u32,
}

impl Token {
    pub fn is_keyword(&self, kw: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == kw
    }

    pub fn is_delimiter(&self, d: &str) -> bool {
        self.kind == TokenKind::Delimiter && self.text == d
    }
}

/// What the lexer had to patch up to keep going.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryKind {
    UnterminatedString,
    InconsistentDedent,
}

/// A single recovery event, attached to the file that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recovery {
    pub kind: RecoveryKind,
    pub line: u32,
}

/// Token stream plus the recovery events hit while producing it.
#[derive(Debug, Clone)]
pub struct LexOutput {
    pub tokens: Vec<Token>,
    pub recoveries: Vec<Recovery>,
}

impl LexOutput {
    /// True when the lexer had to recover from malformed input.
    pub fn recovered(&self) -> bool {
        !self.recoveries.is_empty()
    }
}

/// Hard keywords. Soft keywords (`match`, `case`) lex as identifiers.
pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global",
    "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return",
    "try", "while", "with", "yield",
];

/// Keywords that count as operators in the Halstead classification.
pub const HALSTEAD_CONTROL_KEYWORDS: &[&str] = &[
    "if", "elif", "else", "for", "while", "return", "and", "or", "not", "in", "is", "lambda",
    "assert", "with", "yield", "raise", "try", "except", "finally", "def", "class", "import",
    "from", "as", "pass", "break", "continue", "del", "global", "nonlocal",
];

/// Halstead class of a token under the normative mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalsteadClass {
    Operator,
    Operand,
}

/// Classify a token for Halstead counting.
///
/// Operators are all `Operator`/`Delimiter` tokens except closing brackets,
/// plus the fixed control-keyword set. Operands are identifiers and
/// literals. Everything else (comments, layout tokens, keywords outside the
/// control set) is ignored.
pub fn halstead_class(token: &Token) -> Option<HalsteadClass> {
    match token.kind {
        TokenKind::Operator | TokenKind::Delimiter => {
            if matches!(token.text.as_str(), ")" | "]" | "}") {
                None
            } else {
                Some(HalsteadClass::Operator)
            }
        }
        TokenKind::Keyword => {
            if HALSTEAD_CONTROL_KEYWORDS.contains(&token.text.as_str()) {
                Some(HalsteadClass::Operator)
            } else {
                None
            }
        }
        TokenKind::Identifier | TokenKind::NumberLiteral | TokenKind::StringLiteral => {
            Some(HalsteadClass::Operand)
        }
        _ => None,
    }
}

fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// Multi-character operators, longest first so greedy matching works.
const MULTI_OPERATORS: &[&str] = &[
    "**=", "//=", "<<=", ">>=", "!=", "==", "<=", ">=", "->", ":=", "+=", "-=", "*=", "/=",
    "%=", "@=", "&=", "|=", "^=", "**", "//", "<<", ">>",
];

const SINGLE_OPERATORS: &[char] = &['+', '-', '*', '/', '%', '@', '&', '|', '^', '~', '<', '>', '='];

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    column: u32,
    tokens: Vec<Token>,
    recoveries: Vec<Recovery>,
    indents: Vec<u32>,
    bracket_depth: u32,
    at_line_start: bool,
    logical_has_content: bool,
}

/// Tokenize source text. Never fails; see [`LexOutput`] for recoveries.
pub fn tokenize(source: &str) -> LexOutput {
    let mut lexer = Lexer {
        chars: source.chars().collect(),
        pos: 0,
        line: 1,
        column: 0,
        tokens: Vec::new(),
        recoveries: Vec::new(),
        indents: vec![0],
        bracket_depth: 0,
        at_line_start: true,
        logical_has_content: false,
    };
    lexer.run();
    LexOutput {
        tokens: lexer.tokens,
        recoveries: lexer.recoveries,
    }
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 0;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn push(&mut self, kind: TokenKind, text: String, line: u32, column: u32) {
        if !matches!(kind, TokenKind::Comment) {
            self.logical_has_content = true;
        }
        self.tokens.push(Token { kind, text, line, column });
    }

    fn recover(&mut self, kind: RecoveryKind, line: u32) {
        self.recoveries.push(Recovery { kind, line });
    }

    fn run(&mut self) {
        loop {
            if self.at_line_start && self.bracket_depth == 0 {
                if !self.handle_line_start() {
                    break;
                }
                continue;
            }
            match self.peek() {
                None => break,
                Some('\n') => {
                    let (line, column) = (self.line, self.column);
                    self.bump();
                    if self.bracket_depth == 0 {
                        if self.logical_has_content {
                            self.tokens.push(Token {
                                kind: TokenKind::Newline,
                                text: "\n".into(),
                                line,
                                column,
                            });
                            self.logical_has_content = false;
                        }
                        self.at_line_start = true;
                    }
                }
                Some('\\') if matches!(self.peek_at(1), Some('\n')) => {
                    // line splicing: backslash-newline joins physical lines
                    self.bump();
                    self.bump();
                }
                Some('\\') if self.peek_at(1).is_none() => {
                    self.bump();
                }
                Some(c) if c == ' ' || c == '\t' || c == '\r' || c == '\x0c' => {
                    self.bump();
                }
                Some('#') => self.lex_comment(),
                Some(c) if c == '"' || c == '\'' => self.lex_string(String::new()),
                Some(c) if c.is_ascii_digit() => self.lex_number(),
                Some('.') if self.peek_at(1).map_or(false, |c| c.is_ascii_digit()) => {
                    self.lex_number()
                }
                Some(c) if is_ident_start(c) => self.lex_word(),
                Some(_) => self.lex_symbol(),
            }
        }
        self.finish();
    }

    /// Measure indentation and emit Indent/Dedent. Returns false at EOF.
    fn handle_line_start(&mut self) -> bool {
        let mut width: u32 = 0;
        while let Some(c) = self.peek() {
            match c {
                ' ' => {
                    width += 1;
                    self.bump();
                }
                '\t' => {
                    width = (width / 8 + 1) * 8;
                    self.bump();
                }
                '\x0c' | '\r' => {
                    self.bump();
                }
                _ => break,
            }
        }
        match self.peek() {
            None => return false,
            Some('\n') => {
                // blank line: no indent processing, no Newline token
                self.bump();
                return true;
            }
            Some('#') => {
                // comment-only line: keep the comment, skip indent handling
                self.lex_comment();
                if self.peek() == Some('\n') {
                    self.bump();
                }
                return true;
            }
            Some(_) => {}
        }
        let current = *self.indents.last().unwrap_or(&0);
        if width > current {
            self.indents.push(width);
            self.tokens.push(Token {
                kind: TokenKind::Indent,
                text: String::new(),
                line: self.line,
                column: 0,
            });
        } else if width < current {
            while self.indents.len() > 1 && *self.indents.last().unwrap() > width {
                self.indents.pop();
                self.tokens.push(Token {
                    kind: TokenKind::Dedent,
                    text: String::new(),
                    line: self.line,
                    column: 0,
                });
            }
            if *self.indents.last().unwrap() != width {
                // snap to the nearest enclosing indent level
                self.recover(RecoveryKind::InconsistentDedent, self.line);
            }
        }
        self.at_line_start = false;
        self.logical_has_content = false;
        true
    }

    fn lex_comment(&mut self) {
        let (line, column) = (self.line, self.column);
        let mut text = String::new();
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            text.push(c);
            self.bump();
        }
        self.tokens.push(Token {
            kind: TokenKind::Comment,
            text,
            line,
            column,
        });
    }

    fn lex_word(&mut self) {
        let (line, column) = (self.line, self.column);
        // string prefix? up to two letters from {r,b,u,f} directly before a quote
        let mut prefix = String::new();
        for offset in 0..2 {
            match self.peek_at(offset) {
                Some(c) if matches!(c.to_ascii_lowercase(), 'r' | 'b' | 'u' | 'f') => {
                    prefix.push(c)
                }
                _ => break,
            }
        }
        if !prefix.is_empty() {
            if let Some(q) = self.peek_at(prefix.len()) {
                if q == '"' || q == '\'' {
                    for _ in 0..prefix.len() {
                        self.bump();
                    }
                    self.lex_string_at(prefix, line, column);
                    return;
                }
            }
        }
        let mut text = String::new();
        while let Some(c) = self.peek() {
            if is_ident_continue(c) {
                text.push(c);
                self.bump();
            } else {
                break;
            }
        }
        let kind = if is_keyword(&text) {
            TokenKind::Keyword
        } else {
            TokenKind::Identifier
        };
        self.push(kind, text, line, column);
    }

    fn lex_string(&mut self, prefix: String) {
        let (line, column) = (self.line, self.column);
        self.lex_string_at(prefix, line, column);
    }

    fn lex_string_at(&mut self, prefix: String, line: u32, column: u32) {
        let quote = self.peek().unwrap_or('"');
        let mut text = prefix;
        let triple = self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote);
        let closer_len = if triple { 3 } else { 1 };
        for _ in 0..closer_len {
            if let Some(c) = self.bump() {
                text.push(c);
            }
        }
        loop {
            match self.peek() {
                None => {
                    // unterminated: close at end of input
                    self.recover(RecoveryKind::UnterminatedString, line);
                    break;
                }
                Some('\\') => {
                    text.push(self.bump().unwrap());
                    if let Some(c) = self.bump() {
                        text.push(c);
                    }
                }
                Some('\n') if !triple => {
                    // single-quoted strings cannot span lines; close here
                    self.recover(RecoveryKind::UnterminatedString, line);
                    break;
                }
                Some(c) if c == quote => {
                    if triple {
                        if self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote) {
                            for _ in 0..3 {
                                text.push(self.bump().unwrap());
                            }
                            break;
                        }
                        text.push(self.bump().unwrap());
                    } else {
                        text.push(self.bump().unwrap());
                        break;
                    }
                }
                Some(_) => {
                    text.push(self.bump().unwrap());
                }
            }
        }
        self.push(TokenKind::StringLiteral, text, line, column);
    }

    fn lex_number(&mut self) {
        let (line, column) = (self.line, self.column);
        let mut text = String::new();
        let radix_prefix = self.peek() == Some('0')
            && matches!(
                self.peek_at(1),
                Some('x') | Some('X') | Some('o') | Some('O') | Some('b') | Some('B')
            );
        if radix_prefix {
            text.push(self.bump().unwrap());
            text.push(self.bump().unwrap());
            while let Some(c) = self.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    text.push(self.bump().unwrap());
                } else {
                    break;
                }
            }
            self.push(TokenKind::NumberLiteral, text, line, column);
            return;
        }
        let mut seen_dot = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == '_' {
                text.push(self.bump().unwrap());
            } else if c == '.' && !seen_dot && self.peek_at(1) != Some('.') {
                seen_dot = true;
                text.push(self.bump().unwrap());
            } else {
                break;
            }
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let mut ok = false;
            match self.peek_at(1) {
                Some(c) if c.is_ascii_digit() => ok = true,
                Some('+') | Some('-') => {
                    if self.peek_at(2).map_or(false, |c| c.is_ascii_digit()) {
                        ok = true;
                    }
                }
                _ => {}
            }
            if ok {
                text.push(self.bump().unwrap());
                if matches!(self.peek(), Some('+') | Some('-')) {
                    text.push(self.bump().unwrap());
                }
                while let Some(c) = self.peek() {
                    if c.is_ascii_digit() || c == '_' {
                        text.push(self.bump().unwrap());
                    } else {
                        break;
                    }
                }
            }
        }
        if matches!(self.peek(), Some('j') | Some('J')) {
            text.push(self.bump().unwrap());
        }
        self.push(TokenKind::NumberLiteral, text, line, column);
    }

    fn lex_symbol(&mut self) {
        let (line, column) = (self.line, self.column);
        // ellipsis and dotted access
        if self.peek() == Some('.') {
            if self.peek_at(1) == Some('.') && self.peek_at(2) == Some('.') {
                self.bump();
                self.bump();
                self.bump();
                self.push(TokenKind::Delimiter, "...".into(), line, column);
            } else {
                self.bump();
                self.push(TokenKind::Delimiter, ".".into(), line, column);
            }
            return;
        }
        let rest: String = self.chars[self.pos..self.pos + 3.min(self.chars.len() - self.pos)]
            .iter()
            .collect();
        for op in MULTI_OPERATORS {
            if rest.starts_with(op) {
                for _ in 0..op.chars().count() {
                    self.bump();
                }
                self.push(TokenKind::Operator, (*op).into(), line, column);
                return;
            }
        }
        let c = self.bump().unwrap();
        match c {
            '(' | '[' | '{' => {
                self.bracket_depth += 1;
                self.push(TokenKind::Delimiter, c.to_string(), line, column);
            }
            ')' | ']' | '}' => {
                self.bracket_depth = self.bracket_depth.saturating_sub(1);
                self.push(TokenKind::Delimiter, c.to_string(), line, column);
            }
            ',' | ':' | ';' => {
                self.push(TokenKind::Delimiter, c.to_string(), line, column);
            }
            _ if SINGLE_OPERATORS.contains(&c) => {
                self.push(TokenKind::Operator, c.to_string(), line, column);
            }
            // anything unrecognized survives as a one-character operator token
            _ => {
                self.push(TokenKind::Operator, c.to_string(), line, column);
            }
        }
    }

    fn finish(&mut self) {
        if self.logical_has_content {
            self.tokens.push(Token {
                kind: TokenKind::Newline,
                text: "\n".into(),
                line: self.line,
                column: self.column,
            });
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.tokens.push(Token {
                kind: TokenKind::Dedent,
                text: String::new(),
                line: self.line,
                column: self.column,
            });
        }
        self.tokens.push(Token {
            kind: TokenKind::EndOfFile,
            text: String::new(),
            line: self.line,
            column: self.column,
        });
    }
}
