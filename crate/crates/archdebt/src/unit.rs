//! A parsed source file: text, token stream, and block tree together.

use crate::blocks::{build_block_tree, BlockNode};
use crate::lexer::{tokenize, Token};

/// One source file after tokenizing and structural parsing.
#[derive(Debug, Clone)]
pub struct SourceUnit {
    pub rel_path: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub tree: BlockNode,
    pub lexer_recovered: bool,
    pub lossy_decode: bool,
}

impl SourceUnit {
    /// Parse file text. Never fails; recoveries are flagged on the unit.
    pub fn parse(rel_path: impl Into<String>, text: impl Into<String>) -> SourceUnit {
        Self::parse_flagged(rel_path, text, false)
    }

    pub fn parse_flagged(
        rel_path: impl Into<String>,
        text: impl Into<String>,
        lossy_decode: bool,
    ) -> SourceUnit {
        let rel_path = rel_path.into();
        let text = text.into();
        let lexed = tokenize(&text);
        let tree = build_block_tree(&lexed.tokens);
        let lexer_recovered = lexed.recovered() || !tree.recoveries.is_empty();
        SourceUnit {
            rel_path,
            text,
            tokens: lexed.tokens,
            tree,
            lexer_recovered,
            lossy_decode,
        }
    }

    /// The raw text of a 1-based source line, trimmed.
    pub fn line_text(&self, line: u32) -> &str {
        self.text
            .lines()
            .nth(line.saturating_sub(1) as usize)
            .map(str::trim)
            .unwrap_or("")
    }
}
