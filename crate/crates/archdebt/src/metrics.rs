//! The quantitative metric suite: logical lines of code, cyclomatic
//! complexity, Halstead volume, and the maintainability index.
//!
//! LLOC counts statements: one per simple statement (docstrings included)
//! and one per compound header; comments and blank lines never count.
//! Decision points are `if`/`elif`/`for`/`while`/`except` headers, `and`/`or`
//! keywords anywhere, conditional-expression and comprehension `if` tokens,
//! and `assert` statements; `else` contributes nothing. Run-level Halstead
//! numbers come from the merged token multiset of all files, not from
//! averaging per-file volumes — volume is extensive, so averaging would
//! distort multi-file runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::blocks::{BlockKind, BlockNode};
use crate::lexer::{halstead_class, HalsteadClass, Token, TokenKind};
use crate::unit::SourceUnit;

/// Halstead counts: n1/n2 distinct, N1/N2 total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Halstead {
    pub distinct_operators: u64,
    pub distinct_operands: u64,
    pub total_operators: u64,
    pub total_operands: u64,
}

impl Halstead {
    pub fn vocabulary(&self) -> u64 {
        self.distinct_operators + self.distinct_operands
    }

    pub fn length(&self) -> u64 {
        self.total_operators + self.total_operands
    }

    /// `V = N * log2(n)`, zero when the vocabulary is empty or a single
    /// symbol.
    pub fn volume(&self) -> f64 {
        let n = self.vocabulary();
        if n <= 1 {
            return 0.0;
        }
        self.length() as f64 * (n as f64).log2()
    }
}

/// Frequency maps behind the Halstead counts; mergeable across files.
#[derive(Debug, Clone, Default)]
pub struct HalsteadTally {
    pub operators: BTreeMap<String, u64>,
    pub operands: BTreeMap<String, u64>,
}

impl HalsteadTally {
    pub fn add_token(&mut self, token: &Token) {
        match halstead_class(token) {
            Some(HalsteadClass::Operator) => {
                *self.operators.entry(token.text.clone()).or_insert(0) += 1;
            }
            Some(HalsteadClass::Operand) => {
                *self.operands.entry(token.text.clone()).or_insert(0) += 1;
            }
            None => {}
        }
    }

    pub fn merge(&mut self, other: &HalsteadTally) {
        for (k, v) in &other.operators {
            *self.operators.entry(k.clone()).or_insert(0) += v;
        }
        for (k, v) in &other.operands {
            *self.operands.entry(k.clone()).or_insert(0) += v;
        }
    }

    pub fn counts(&self) -> Halstead {
        Halstead {
            distinct_operators: self.operators.len() as u64,
            distinct_operands: self.operands.len() as u64,
            total_operators: self.operators.values().sum(),
            total_operands: self.operands.values().sum(),
        }
    }
}

/// The full metric bundle for one file or one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub lloc: u64,
    pub cc_per_function: BTreeMap<String, u64>,
    pub cc_total: u64,
    pub halstead: Halstead,
    pub volume: f64,
    pub mi: f64,
}

impl MetricsBundle {
    /// Bundle for a run with nothing to analyze: zero size, base complexity.
    pub fn empty() -> MetricsBundle {
        MetricsBundle {
            lloc: 0,
            cc_per_function: BTreeMap::new(),
            cc_total: 1,
            halstead: Halstead::default(),
            volume: 0.0,
            mi: maintainability_index(0.0, 1, 0),
        }
    }
}

/// Count logical statements in a block tree.
pub fn count_lloc(tree: &BlockNode) -> u64 {
    tree.walk()
        .filter(|n| n.kind != BlockKind::Module)
        .count() as u64
}

/// Decision points inside `node`'s span. When `own_scope_only` is set,
/// nested function bodies are excluded so each function owns its decisions.
fn decision_points(node: &BlockNode, own_scope_only: bool) -> u64 {
    let mut count = match node.kind {
        BlockKind::If | BlockKind::Elif | BlockKind::For | BlockKind::While | BlockKind::Except => 1,
        _ => 0,
    };
    count += header_decisions(node);
    for child in &node.children {
        if own_scope_only && child.kind == BlockKind::FunctionDef {
            continue;
        }
        count += decision_points(child, own_scope_only);
    }
    count
}

/// `and`/`or` anywhere, ternary/comprehension `if`s, and assert statements
/// within one header or simple statement.
fn header_decisions(node: &BlockNode) -> u64 {
    let tokens = &node.header_tokens;
    let mut count = 0u64;
    if node.kind == BlockKind::SimpleStatement
        && tokens.first().map_or(false, |t| t.is_keyword("assert"))
    {
        count += 1;
    }
    for (i, t) in tokens.iter().enumerate() {
        if t.kind != TokenKind::Keyword {
            continue;
        }
        match t.text.as_str() {
            "and" | "or" => count += 1,
            "if" => {
                // the leading keyword of an `if` header is the block itself
                if !(i == 0 && node.kind == BlockKind::If) {
                    count += 1;
                }
            }
            _ => {}
        }
    }
    count
}

/// McCabe complexity of a function or module node.
///
/// For a `FunctionDef` this is 1 plus the decision points the function
/// itself owns (nested defs count separately). For a `Module` it is 1 plus
/// every decision point in the file, which equals the bundle's `cc_total`.
pub fn cyclomatic_complexity(node: &BlockNode) -> u64 {
    match node.kind {
        BlockKind::Module => 1 + decision_points(node, false),
        _ => 1 + decision_points(node, true),
    }
}

fn function_table(tree: &BlockNode) -> BTreeMap<String, u64> {
    let mut table = BTreeMap::new();
    let mut path: Vec<String> = Vec::new();
    collect_functions(tree, &mut path, &mut table);
    table
}

fn collect_functions(node: &BlockNode, path: &mut Vec<String>, table: &mut BTreeMap<String, u64>) {
    for child in &node.children {
        match child.kind {
            BlockKind::FunctionDef => {
                let name = child.name.clone().unwrap_or_else(|| "<anonymous>".into());
                path.push(name);
                let qualified = path.join(".");
                let cc = cyclomatic_complexity(child);
                let key = if table.contains_key(&qualified) {
                    format!("{qualified}@{}", child.line_span.0)
                } else {
                    qualified
                };
                table.insert(key, cc);
                collect_functions(child, path, table);
                path.pop();
            }
            BlockKind::ClassDef => {
                let name = child.name.clone().unwrap_or_else(|| "<anonymous>".into());
                path.push(name);
                collect_functions(child, path, table);
                path.pop();
            }
            _ => collect_functions(child, path, table),
        }
    }
}

/// Halstead counts for one token stream under the normative mapping.
pub fn halstead_volume(tokens: &[Token]) -> Halstead {
    let mut tally = HalsteadTally::default();
    for t in tokens {
        tally.add_token(t);
    }
    tally.counts()
}

/// `MI = max(0, 100 * (171 - 5.2*ln(V) - 0.23*G - 16.2*ln(L)) / 171)`,
/// with `ln(max(x, 1))` guarding the empty cases. Result is in `[0, 100]`.
pub fn maintainability_index(volume: f64, cc_total: u64, lloc: u64) -> f64 {
    let v = volume.max(1.0).ln();
    let l = (lloc.max(1) as f64).ln();
    let raw = 171.0 - 5.2 * v - 0.23 * cc_total as f64 - 16.2 * l;
    (100.0 * raw / 171.0).max(0.0)
}

/// Metrics for one parsed file.
pub fn metrics_for_file(unit: &SourceUnit) -> MetricsBundle {
    let lloc = count_lloc(&unit.tree);
    let cc_per_function = function_table(&unit.tree);
    let cc_total = cyclomatic_complexity(&unit.tree);
    let halstead = halstead_volume(&unit.tokens);
    let volume = halstead.volume();
    let mi = maintainability_index(volume, cc_total, lloc);
    MetricsBundle {
        lloc,
        cc_per_function,
        cc_total,
        halstead,
        volume,
        mi,
    }
}

/// Run-level aggregate plus the per-file bundles.
///
/// The aggregate sums LLOC and CC and merges the classified token multiset
/// before computing volume, then derives MI from the run-level V, G, L.
pub fn metrics_for_run(units: &[SourceUnit]) -> (MetricsBundle, Vec<(String, MetricsBundle)>) {
    if units.is_empty() {
        return (MetricsBundle::empty(), Vec::new());
    }
    let mut per_file = Vec::new();
    let mut tally = HalsteadTally::default();
    let mut lloc = 0u64;
    let mut cc_total = 0u64;
    let mut cc_per_function = BTreeMap::new();
    for unit in units {
        let bundle = metrics_for_file(unit);
        lloc += bundle.lloc;
        cc_total += bundle.cc_total;
        for (name, cc) in &bundle.cc_per_function {
            cc_per_function.insert(format!("{}::{}", unit.rel_path, name), *cc);
        }
        let mut file_tally = HalsteadTally::default();
        for t in &unit.tokens {
            file_tally.add_token(t);
        }
        tally.merge(&file_tally);
        per_file.push((unit.rel_path.clone(), bundle));
    }
    let halstead = tally.counts();
    let volume = halstead.volume();
    let mi = maintainability_index(volume, cc_total, lloc);
    (
        MetricsBundle {
            lloc,
            cc_per_function,
            cc_total,
            halstead,
            volume,
            mi,
        },
        per_file,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unit::SourceUnit;

    fn unit(src: &str) -> SourceUnit {
        SourceUnit::parse("test.py", src)
    }

    #[test]
    fn comments_and_blanks_count_zero() {
        let u = unit("# a comment\n\n   \n# another\n");
        assert_eq!(count_lloc(&u.tree), 0);
    }

    // oracle: manual count per the statement rules table
    #[test]
    fn semicolon_statements_count_separately() {
        let u = unit("a=1; b=2\n");
        assert_eq!(count_lloc(&u.tree), 2);
    }

    // oracle: manual count on the two-import/class/method/assignment shape
    #[test]
    fn import_class_method_assignment_counts_five() {
        let src = "from infrastructure.sqlite_repo import SqliteRepo\nimport urllib3\n\nclass Book:\n    def get_details(self):\n        repo = SqliteRepo()\n";
        let u = unit(src);
        assert_eq!(count_lloc(&u.tree), 5);
    }

    #[test]
    fn docstring_is_one_statement() {
        let u = unit("def f():\n    \"\"\"doc\"\"\"\n    return 1\n");
        // def + docstring + return
        assert_eq!(count_lloc(&u.tree), 3);
    }

    #[test]
    fn straight_line_function_has_cc_one() {
        let u = unit("def f():\n    x = 1\n    return x\n");
        let def = &u.tree.children[0];
        assert_eq!(cyclomatic_complexity(def), 1);
    }

    // oracle: manual McCabe count
    #[test]
    fn if_elif_for_gives_cc_four() {
        let src = "def f(x):\n    if x > 0:\n        return 1\n    elif x < 0:\n        for i in range(3):\n            x += i\n    return x\n";
        let u = unit(src);
        let def = &u.tree.children[0];
        assert_eq!(cyclomatic_complexity(def), 4);
    }

    // oracle: manual count per the decision-point table
    #[test]
    fn ternary_and_boolean_ops_count() {
        let u = unit("def f(a, x, y, b):\n    return a if x and y else b\n");
        let def = &u.tree.children[0];
        assert_eq!(cyclomatic_complexity(def), 3);
    }

    #[test]
    fn else_adds_nothing() {
        let u = unit("def f(x):\n    if x:\n        return 1\n    else:\n        return 2\n");
        let def = &u.tree.children[0];
        assert_eq!(cyclomatic_complexity(def), 2);
    }

    #[test]
    fn comprehension_if_and_assert_count() {
        let u = unit("def f(xs):\n    ys = [x for x in xs if x]\n    assert ys\n    return ys\n");
        let def = &u.tree.children[0];
        // comprehension if + assert
        assert_eq!(cyclomatic_complexity(def), 3);
    }

    #[test]
    fn nested_functions_own_their_decisions() {
        let src = "def outer(x):\n    def inner(y):\n        if y:\n            return 1\n        return 0\n    if x:\n        return inner(x)\n    return 0\n";
        let u = unit(src);
        let table = function_table(&u.tree);
        assert_eq!(table.get("outer"), Some(&2));
        assert_eq!(table.get("outer.inner"), Some(&2));
        // file total counts each decision once
        assert_eq!(cyclomatic_complexity(&u.tree), 3);
    }

    #[test]
    fn empty_file_all_zero_volume() {
        let u = unit("");
        let h = halstead_volume(&u.tokens);
        assert_eq!(h, Halstead::default());
        assert_eq!(h.volume(), 0.0);
    }

    // oracle: hand application of the Halstead definitions
    #[test]
    fn simple_sum_volume() {
        let u = unit("a = b + c\n");
        let h = halstead_volume(&u.tokens);
        assert_eq!(
            (h.distinct_operators, h.distinct_operands, h.total_operators, h.total_operands),
            (2, 3, 2, 3)
        );
        assert_eq!(h.vocabulary(), 5);
        assert_eq!(h.length(), 5);
        let expected = 5.0 * 5.0_f64.log2();
        assert!((h.volume() - expected).abs() < 1e-12);
        assert!((h.volume() - 11.609640474436812).abs() < 1e-9);
    }

    // oracle: same, n=2 vocabulary
    #[test]
    fn self_assignment_volume() {
        let u = unit("x = x\n");
        let h = halstead_volume(&u.tokens);
        assert_eq!(
            (h.distinct_operators, h.distinct_operands, h.total_operators, h.total_operands),
            (1, 1, 1, 2)
        );
        assert!((h.volume() - 3.0).abs() < 1e-12);
    }

    // oracle: direct formula evaluation
    #[test]
    fn mi_reference_values() {
        let mi = maintainability_index(1.0, 1, 1);
        assert!((mi - 99.86549707602339).abs() < 1e-9);
        // guards force both ln terms to zero
        let mi = maintainability_index(0.0, 1, 0);
        assert!((mi - 99.86549707602339).abs() < 1e-9);
        // huge inputs clamp to zero
        let mi = maintainability_index(1e18, 100_000, 1_000_000);
        assert_eq!(mi, 0.0);
    }

    #[test]
    fn mi_strictly_decreasing_above_guards() {
        let base = maintainability_index(100.0, 5, 50);
        assert!(maintainability_index(101.0, 5, 50) < base);
        assert!(maintainability_index(100.0, 6, 50) < base);
        assert!(maintainability_index(100.0, 5, 51) < base);
    }

    #[test]
    fn single_file_run_equals_file_bundle() {
        let u = unit("a = b + c\n");
        let (run, per_file) = metrics_for_run(std::slice::from_ref(&u));
        assert_eq!(per_file.len(), 1);
        assert_eq!(run.lloc, per_file[0].1.lloc);
        assert_eq!(run.halstead, per_file[0].1.halstead);
        assert_eq!(run.mi, per_file[0].1.mi);
    }

    // oracle: formula on the doubled multiset
    #[test]
    fn duplicate_files_double_length_not_vocabulary() {
        let a = SourceUnit::parse("a.py", "a = b + c\n");
        let b = SourceUnit::parse("b.py", "a = b + c\n");
        let (run, _) = metrics_for_run(&[a.clone(), b]);
        let single = halstead_volume(&a.tokens);
        assert_eq!(run.halstead.length(), 2 * single.length());
        assert_eq!(run.halstead.vocabulary(), single.vocabulary());
        let expected = (2 * single.length()) as f64 * (single.vocabulary() as f64).log2();
        assert!((run.volume - expected).abs() < 1e-12);
        assert_eq!(run.lloc, 2);
    }

    #[test]
    fn empty_run_gets_guard_bundle() {
        let (run, per_file) = metrics_for_run(&[]);
        assert!(per_file.is_empty());
        assert_eq!(run.lloc, 0);
        assert_eq!(run.cc_total, 1);
        assert!((run.mi - 99.86549707602339).abs() < 1e-9);
    }

    #[test]
    fn cc_additivity_over_functions_and_module_level() {
        let src = "import os\n\nif os.name:\n    x = 1\n\ndef f(a):\n    if a:\n        return 1\n    return 0\n\ndef g(b):\n    return b or 0\n";
        let u = unit(src);
        let table = function_table(&u.tree);
        let module_total = cyclomatic_complexity(&u.tree);
        let sum_fn_decisions: u64 = table.values().map(|cc| cc - 1).sum();
        // module-level decision points: the one top-level if
        assert_eq!(module_total, 1 + sum_fn_decisions + 1);
    }

    #[test]
    fn identifier_rename_preserves_counts() {
        let u1 = unit("alpha = beta + gamma\nbeta = alpha * 2\n");
        let u2 = unit("x1 = y2 + z3\ny2 = x1 * 2\n");
        let h1 = halstead_volume(&u1.tokens);
        let h2 = halstead_volume(&u2.tokens);
        assert_eq!(h1, h2);
    }
}
