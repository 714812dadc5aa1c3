//! Import statement extraction and target resolution.
//!
//! Every logical line whose first keyword is `import` or `from` yields
//! records; imports nested inside function or class bodies are included and
//! flagged. Targets resolve to an internal layer, an external package root,
//! or `Unresolved` — resolution is total and never an error.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::blocks::{BlockKind, BlockNode};
use crate::lexer::{Token, TokenKind};
use crate::policy::LayerPolicy;
use crate::unit::SourceUnit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportKind {
    Plain,
    From,
    Relative,
}

/// One import statement target.
///
/// `from X import a, b` is one record with two imported names; a plain
/// `import a, b` is one record per comma-separated target. For relative
/// imports `level` counts the leading dots and `target` holds the part
/// after them (empty for pure-dot imports).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportRecord {
    pub importer_path: String,
    pub target: String,
    pub imported_names: Vec<String>,
    pub alias: Option<String>,
    pub kind: ImportKind,
    pub line: u32,
    pub level: u32,
    pub nested: bool,
    pub raw: String,
}

/// An import line the parser could not make sense of.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalformedImport {
    pub line: u32,
    pub raw: String,
}

/// Extraction result for one file.
#[derive(Debug, Clone, Default)]
pub struct ImportScan {
    pub records: Vec<ImportRecord>,
    pub malformed: Vec<MalformedImport>,
}

/// Where an import points after resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolvedTarget {
    InternalLayer(String),
    ExternalPackage(String),
    Unresolved,
}

/// Extract all import records from a parsed file.
pub fn extract_imports(unit: &SourceUnit) -> ImportScan {
    let mut scan = ImportScan::default();
    collect(&unit.tree, false, unit, &mut scan);
    scan.records.sort_by(|a, b| (a.line, a.target.clone()).cmp(&(b.line, b.target.clone())));
    scan
}

fn collect(node: &BlockNode, nested: bool, unit: &SourceUnit, scan: &mut ImportScan) {
    for child in &node.children {
        if child.kind == BlockKind::SimpleStatement {
            let toks = &child.header_tokens;
            if let Some(first) = toks.first() {
                if first.is_keyword("import") || first.is_keyword("from") {
                    parse_import(toks, nested, unit, scan);
                }
            }
        } else {
            collect(child, true, unit, scan);
        }
    }
}

fn parse_import(tokens: &[Token], nested: bool, unit: &SourceUnit, scan: &mut ImportScan) {
    let line = tokens[0].line;
    let raw = unit.line_text(line).to_string();
    match parse_import_tokens(tokens) {
        Ok(drafts) => {
            for d in drafts {
                if d.kind != ImportKind::Relative && d.target == "__future__" {
                    continue;
                }
                scan.records.push(ImportRecord {
                    importer_path: unit.rel_path.clone(),
                    target: d.target,
                    imported_names: d.imported_names,
                    alias: d.alias,
                    kind: d.kind,
                    line,
                    level: d.level,
                    nested,
                    raw: raw.clone(),
                });
            }
        }
        Err(()) => scan.malformed.push(MalformedImport { line, raw }),
    }
}

struct Draft {
    target: String,
    imported_names: Vec<String>,
    alias: Option<String>,
    kind: ImportKind,
    level: u32,
}

fn parse_import_tokens(tokens: &[Token]) -> Result<Vec<Draft>, ()> {
    let mut i = 0usize;
    let first = tokens.first().ok_or(())?;
    if first.is_keyword("import") {
        i += 1;
        let mut drafts = Vec::new();
        loop {
            let target = parse_dotted(tokens, &mut i)?;
            let mut alias = None;
            if tokens.get(i).map_or(false, |t| t.is_keyword("as")) {
                i += 1;
                let t = tokens.get(i).ok_or(())?;
                if t.kind != TokenKind::Identifier {
                    return Err(());
                }
                alias = Some(t.text.clone());
                i += 1;
            }
            drafts.push(Draft {
                target,
                imported_names: Vec::new(),
                alias,
                kind: ImportKind::Plain,
                level: 0,
            });
            match tokens.get(i) {
                Some(t) if t.is_delimiter(",") => i += 1,
                None => break,
                Some(_) => return Err(()),
            }
        }
        if drafts.is_empty() {
            return Err(());
        }
        return Ok(drafts);
    }
    if first.is_keyword("from") {
        i += 1;
        let mut level = 0u32;
        loop {
            match tokens.get(i) {
                Some(t) if t.is_delimiter(".") => {
                    level += 1;
                    i += 1;
                }
                Some(t) if t.is_delimiter("...") => {
                    level += 3;
                    i += 1;
                }
                _ => break,
            }
        }
        let target = if tokens.get(i).map_or(false, |t| t.kind == TokenKind::Identifier) {
            parse_dotted(tokens, &mut i)?
        } else {
            String::new()
        };
        if target.is_empty() && level == 0 {
            return Err(());
        }
        if !tokens.get(i).map_or(false, |t| t.is_keyword("import")) {
            return Err(());
        }
        i += 1;
        let mut names = Vec::new();
        let mut aliases = Vec::new();
        if tokens.get(i).map_or(false, |t| t.kind == TokenKind::Operator && t.text == "*") {
            names.push("*".to_string());
            i += 1;
        } else {
            let parenthesized = tokens.get(i).map_or(false, |t| t.is_delimiter("("));
            if parenthesized {
                i += 1;
            }
            loop {
                match tokens.get(i) {
                    Some(t) if t.kind == TokenKind::Identifier => {
                        names.push(t.text.clone());
                        i += 1;
                    }
                    Some(t) if parenthesized && t.is_delimiter(")") => {
                        i += 1;
                        break;
                    }
                    _ => return Err(()),
                }
                if tokens.get(i).map_or(false, |t| t.is_keyword("as")) {
                    i += 1;
                    let t = tokens.get(i).ok_or(())?;
                    if t.kind != TokenKind::Identifier {
                        return Err(());
                    }
                    aliases.push(t.text.clone());
                    i += 1;
                }
                match tokens.get(i) {
                    Some(t) if t.is_delimiter(",") => i += 1,
                    Some(t) if parenthesized && t.is_delimiter(")") => {
                        i += 1;
                        break;
                    }
                    None if !parenthesized => break,
                    _ => return Err(()),
                }
            }
            if names.is_empty() {
                return Err(());
            }
        }
        let alias = if names.len() == 1 && aliases.len() == 1 {
            Some(aliases.remove(0))
        } else {
            None
        };
        let kind = if level > 0 {
            ImportKind::Relative
        } else {
            ImportKind::From
        };
        return Ok(vec![Draft {
            target,
            imported_names: names,
            alias,
            kind,
            level,
        }]);
    }
    Err(())
}

fn parse_dotted(tokens: &[Token], i: &mut usize) -> Result<String, ()> {
    let t = tokens.get(*i).ok_or(())?;
    if t.kind != TokenKind::Identifier {
        return Err(());
    }
    let mut dotted = t.text.clone();
    *i += 1;
    while tokens.get(*i).map_or(false, |t| t.is_delimiter(".")) {
        let next = tokens.get(*i + 1).ok_or(())?;
        if next.kind != TokenKind::Identifier {
            return Err(());
        }
        dotted.push('.');
        dotted.push_str(&next.text);
        *i += 2;
    }
    Ok(dotted)
}

/// Resolve one record against the policy and the set of file paths in the
/// run. Total: every record maps to exactly one variant.
pub fn resolve_target(
    record: &ImportRecord,
    policy: &LayerPolicy,
    run_paths: &BTreeSet<String>,
) -> ResolvedTarget {
    match record.kind {
        ImportKind::Plain | ImportKind::From => {
            if let Some(layer) = policy.layer_for_module(&record.target) {
                ResolvedTarget::InternalLayer(layer.id.clone())
            } else {
                match record.target.split('.').next() {
                    Some(root) if !root.is_empty() => {
                        ResolvedTarget::ExternalPackage(root.to_string())
                    }
                    _ => ResolvedTarget::Unresolved,
                }
            }
        }
        ImportKind::Relative => match relative_module_path(record) {
            Some(path) => {
                let exists = run_paths.contains(&format!("{path}.py"))
                    || run_paths.contains(&format!("{path}/__init__.py"))
                    || run_paths.iter().any(|p| p.starts_with(&format!("{path}/")));
                match policy.layer_for_path(&path) {
                    // a relative import only counts as a layer edge when the
                    // joined module actually exists in the run
                    Some(layer) if exists => ResolvedTarget::InternalLayer(layer.id.clone()),
                    _ => ResolvedTarget::Unresolved,
                }
            }
            None => ResolvedTarget::Unresolved,
        },
    }
}

/// Join a relative import against the importer's directory. `None` when the
/// dots climb above the run root.
pub fn relative_module_path(record: &ImportRecord) -> Option<String> {
    let mut parts: Vec<&str> = record.importer_path.split('/').collect();
    parts.pop(); // drop the file name; what remains is the package dir
    for _ in 1..record.level {
        parts.pop()?;
    }
    for seg in record.target.split('.').filter(|s| !s.is_empty()) {
        parts.push(seg);
    }
    if parts.is_empty() {
        return None;
    }
    Some(parts.join("/"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::LayerPolicy;
    use crate::unit::SourceUnit;

    fn scan(src: &str) -> ImportScan {
        let unit = SourceUnit::parse("domain/book.py", src);
        extract_imports(&unit)
    }

    #[test]
    fn from_import_single_record_with_names() {
        let s = scan("from infrastructure.sqlite_repo import SqliteRepo\n");
        assert_eq!(s.records.len(), 1);
        let r = &s.records[0];
        assert_eq!(r.target, "infrastructure.sqlite_repo");
        assert_eq!(r.imported_names, vec!["SqliteRepo"]);
        assert_eq!(r.kind, ImportKind::From);
        assert!(!r.nested);
    }

    #[test]
    fn no_imports_yields_empty() {
        let s = scan("x = 1\ny = x + 2\n");
        assert!(s.records.is_empty());
        assert!(s.malformed.is_empty());
    }

    // oracle: regex scan of `^\s*(import|from)\b` plus a hand split
    #[test]
    fn comma_separated_plain_imports_split() {
        let s = scan("import json, urllib3\n");
        assert_eq!(s.records.len(), 2);
        assert_eq!(s.records[0].target, "json");
        assert_eq!(s.records[1].target, "urllib3");
        assert!(s.records.iter().all(|r| r.kind == ImportKind::Plain));
    }

    #[test]
    fn aliases_and_multi_names() {
        let s = scan("import numpy as np\nfrom collections import OrderedDict, defaultdict\n");
        assert_eq!(s.records.len(), 2);
        assert_eq!(s.records[0].alias.as_deref(), Some("np"));
        assert_eq!(
            s.records[1].imported_names,
            vec!["OrderedDict", "defaultdict"]
        );
        assert_eq!(s.records[1].alias, None);
    }

    #[test]
    fn nested_imports_flagged() {
        let s = scan("def f():\n    import sqlite3\n    return sqlite3\n");
        assert_eq!(s.records.len(), 1);
        assert!(s.records[0].nested);
    }

    #[test]
    fn future_imports_excluded() {
        let s = scan("from __future__ import annotations\nimport json\n");
        assert_eq!(s.records.len(), 1);
        assert_eq!(s.records[0].target, "json");
    }

    #[test]
    fn relative_import_levels() {
        let s = scan("from . import book\nfrom ..shared import util\n");
        assert_eq!(s.records[0].kind, ImportKind::Relative);
        assert_eq!(s.records[0].level, 1);
        assert_eq!(s.records[0].target, "");
        assert_eq!(s.records[1].level, 2);
        assert_eq!(s.records[1].target, "shared");
    }

    #[test]
    fn import_inside_string_is_not_code() {
        let s = scan("doc = \"\"\"\nimport fake\n\"\"\"\n");
        assert!(s.records.is_empty());
    }

    #[test]
    fn malformed_import_recorded_not_fatal() {
        let s = scan("import \nimport json\n");
        assert_eq!(s.malformed.len(), 1);
        assert_eq!(s.records.len(), 1);
    }

    #[test]
    fn parenthesized_from_import() {
        let s = scan("from domain.book import (\n    Book,\n    BookId,\n)\n");
        assert_eq!(s.records.len(), 1);
        assert_eq!(s.records[0].imported_names, vec!["Book", "BookId"]);
    }

    #[test]
    fn resolve_internal_external_and_relative() {
        let policy = LayerPolicy::default_policy();
        let mut run_paths = BTreeSet::new();
        run_paths.insert("domain/book.py".to_string());
        run_paths.insert("domain/lending.py".to_string());

        let unit = SourceUnit::parse(
            "domain/lending.py",
            "from infrastructure.sqlite_repo import SqliteRepo\nimport urllib3\nfrom . import book\n",
        );
        let s = extract_imports(&unit);
        let resolved: Vec<ResolvedTarget> = s
            .records
            .iter()
            .map(|r| resolve_target(r, &policy, &run_paths))
            .collect();
        assert_eq!(
            resolved,
            vec![
                ResolvedTarget::InternalLayer("infrastructure".into()),
                ResolvedTarget::ExternalPackage("urllib3".into()),
                ResolvedTarget::InternalLayer("domain".into()),
            ]
        );
    }

    #[test]
    fn unresolvable_relative_is_a_value() {
        let policy = LayerPolicy::default_policy();
        let run_paths = BTreeSet::new();
        let unit = SourceUnit::parse("domain/book.py", "from ...... import nothing\n");
        let s = extract_imports(&unit);
        assert_eq!(s.records.len(), 1);
        assert_eq!(
            resolve_target(&s.records[0], &policy, &run_paths),
            ResolvedTarget::Unresolved
        );
    }
}
