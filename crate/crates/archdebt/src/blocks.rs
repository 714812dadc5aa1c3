//! Structural block tree over the token stream.
//!
//! Compound statements are recognized by the leading keyword of a logical
//! line; everything else becomes a `SimpleStatement`. The builder is
//! tolerant by contract: malformed headers degrade to simple statements and
//! the recovery is recorded on the module root, never raised.

use serde::{Deserialize, Serialize};

use crate::lexer::{Token, TokenKind};

/// Structural kind of a block node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Module,
    FunctionDef,
    ClassDef,
    If,
    Elif,
    Else,
    For,
    While,
    Try,
    Except,
    Finally,
    With,
    SimpleStatement,
}

impl BlockKind {
    pub fn is_compound(self) -> bool {
        !matches!(self, BlockKind::SimpleStatement)
    }
}

/// A structural recovery noted while building the tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseRecovery {
    pub line: u32,
    pub detail: String,
}

/// One node of the block tree.
///
/// `header_tokens` holds the logical line that introduced the node (the
/// full statement for `SimpleStatement`), with comments stripped.
/// `recoveries` is populated on the module root only.
#[derive(Debug, Clone)]
pub struct BlockNode {
    pub kind: BlockKind,
    pub header_tokens: Vec<Token>,
    pub children: Vec<BlockNode>,
    pub name: Option<String>,
    pub decorators: Vec<String>,
    pub line_span: (u32, u32),
    pub recoveries: Vec<ParseRecovery>,
}

impl BlockNode {
    fn new(kind: BlockKind, header_tokens: Vec<Token>) -> Self {
        let start = header_tokens.first().map(|t| t.line).unwrap_or(1);
        let end = header_tokens.last().map(|t| t.line).unwrap_or(start);
        BlockNode {
            kind,
            header_tokens,
            children: Vec::new(),
            name: None,
            decorators: Vec::new(),
            line_span: (start, end),
            recoveries: Vec::new(),
        }
    }

    fn extend_span(&mut self) {
        if let Some(last) = self.children.last() {
            self.line_span.1 = self.line_span.1.max(last.line_span.1);
        }
    }

    /// Depth-first iterator over this node and all descendants.
    pub fn walk(&self) -> impl Iterator<Item = &BlockNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            for child in node.children.iter().rev() {
                stack.push(child);
            }
            Some(node)
        })
    }
}

const COMPOUND_KEYWORDS: &[(&str, BlockKind)] = &[
    ("def", BlockKind::FunctionDef),
    ("class", BlockKind::ClassDef),
    ("if", BlockKind::If),
    ("elif", BlockKind::Elif),
    ("else", BlockKind::Else),
    ("for", BlockKind::For),
    ("while", BlockKind::While),
    ("try", BlockKind::Try),
    ("except", BlockKind::Except),
    ("finally", BlockKind::Finally),
    ("with", BlockKind::With),
];

fn compound_kind(tokens: &[Token]) -> Option<(usize, BlockKind)> {
    let first = tokens.first()?;
    if first.kind != TokenKind::Keyword {
        return None;
    }
    if first.text == "async" {
        let second = tokens.get(1)?;
        for (kw, kind) in COMPOUND_KEYWORDS {
            if second.is_keyword(kw) && matches!(kind, BlockKind::FunctionDef | BlockKind::For | BlockKind::With) {
                return Some((1, *kind));
            }
        }
        return None;
    }
    for (kw, kind) in COMPOUND_KEYWORDS {
        if first.text == *kw {
            return Some((0, *kind));
        }
    }
    None
}

/// Index of the first bracket-depth-zero colon, the header/suite split.
fn header_colon(tokens: &[Token]) -> Option<usize> {
    let mut depth = 0i32;
    for (i, t) in tokens.iter().enumerate() {
        if t.kind == TokenKind::Delimiter {
            match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                ":" if depth == 0 => return Some(i),
                _ => {}
            }
        }
    }
    None
}

/// Split a token run on bracket-depth-zero semicolons.
fn split_statements(tokens: &[Token]) -> Vec<Vec<Token>> {
    let mut parts = Vec::new();
    let mut current = Vec::new();
    let mut depth = 0i32;
    for t in tokens {
        if t.kind == TokenKind::Delimiter {
            match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                ";" if depth == 0 => {
                    if !current.is_empty() {
                        parts.push(std::mem::take(&mut current));
                    }
                    continue;
                }
                _ => {}
            }
        }
        current.push(t.clone());
    }
    if !current.is_empty() {
        parts.push(current);
    }
    parts
}

fn render_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

struct Cursor<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.pos)?;
        self.pos += 1;
        Some(t)
    }

    /// Collect one logical line (comments dropped, trailing Newline eaten).
    fn logical_line(&mut self) -> Vec<Token> {
        let mut line = Vec::new();
        while let Some(t) = self.peek() {
            match t.kind {
                TokenKind::Newline => {
                    self.bump();
                    break;
                }
                TokenKind::Comment => {
                    self.bump();
                }
                TokenKind::EndOfFile | TokenKind::Indent | TokenKind::Dedent => break,
                _ => {
                    line.push(self.bump().unwrap().clone());
                }
            }
        }
        line
    }
}

/// Build the structural tree for one file's token stream.
pub fn build_block_tree(tokens: &[Token]) -> BlockNode {
    let mut cursor = Cursor { tokens, pos: 0 };
    let mut recoveries = Vec::new();
    let children = parse_suite(&mut cursor, &mut recoveries);
    let end = tokens
        .iter()
        .map(|t| t.line)
        .max()
        .unwrap_or(1);
    let mut root = BlockNode::new(BlockKind::Module, Vec::new());
    root.children = children;
    root.line_span = (1, end);
    root.recoveries = recoveries;
    root
}

fn parse_suite(cursor: &mut Cursor, recoveries: &mut Vec<ParseRecovery>) -> Vec<BlockNode> {
    let mut nodes: Vec<BlockNode> = Vec::new();
    let mut pending_decorators: Vec<String> = Vec::new();
    loop {
        let Some(tok) = cursor.peek() else { break };
        match tok.kind {
            TokenKind::EndOfFile => break,
            TokenKind::Dedent => {
                cursor.bump();
                break;
            }
            TokenKind::Indent => {
                // indentation with no header to own it: keep the statements
                // at the current level
                let line = tok.line;
                cursor.bump();
                recoveries.push(ParseRecovery {
                    line,
                    detail: "unexpected indent".into(),
                });
                let mut orphans = parse_suite(cursor, recoveries);
                nodes.append(&mut orphans);
            }
            TokenKind::Newline | TokenKind::Comment => {
                cursor.bump();
            }
            _ => {
                let line_tokens = cursor.logical_line();
                if line_tokens.is_empty() {
                    continue;
                }
                handle_line(
                    line_tokens,
                    cursor,
                    recoveries,
                    &mut nodes,
                    &mut pending_decorators,
                );
            }
        }
    }
    nodes
}

fn handle_line(
    line_tokens: Vec<Token>,
    cursor: &mut Cursor,
    recoveries: &mut Vec<ParseRecovery>,
    nodes: &mut Vec<BlockNode>,
    pending_decorators: &mut Vec<String>,
) {
    let first = &line_tokens[0];
    if first.kind == TokenKind::Operator && first.text == "@" {
        pending_decorators.push(render_tokens(&line_tokens));
        nodes.push(BlockNode::new(BlockKind::SimpleStatement, line_tokens));
        return;
    }
    if let Some((lead, kind)) = compound_kind(&line_tokens) {
        if let Some(colon) = header_colon(&line_tokens[lead..]).map(|i| i + lead) {
            let header: Vec<Token> = line_tokens[..=colon].to_vec();
            let rest: Vec<Token> = line_tokens[colon + 1..].to_vec();
            let mut node = BlockNode::new(kind, header);
            if matches!(kind, BlockKind::FunctionDef | BlockKind::ClassDef) {
                node.name = node
                    .header_tokens
                    .iter()
                    .skip(lead + 1)
                    .find(|t| t.kind == TokenKind::Identifier)
                    .map(|t| t.text.clone());
                node.decorators = std::mem::take(pending_decorators);
            } else {
                pending_decorators.clear();
            }
            if !rest.is_empty() {
                // suite inline after the colon
                for stmt in split_statements(&rest) {
                    node.children.push(BlockNode::new(BlockKind::SimpleStatement, stmt));
                }
            } else if cursor.peek().map(|t| t.kind) == Some(TokenKind::Indent) {
                cursor.bump();
                node.children = parse_suite(cursor, recoveries);
            } else {
                recoveries.push(ParseRecovery {
                    line: node.line_span.0,
                    detail: "compound header without suite".into(),
                });
            }
            node.extend_span();
            nodes.push(node);
            return;
        }
        recoveries.push(ParseRecovery {
            line: first.line,
            detail: format!("malformed {} header", first.text),
        });
        // fall through: degrade to simple statements
    } else if !line_tokens.is_empty() {
        pending_decorators.clear();
    }
    for stmt in split_statements(&line_tokens) {
        nodes.push(BlockNode::new(BlockKind::SimpleStatement, stmt));
    }
}
