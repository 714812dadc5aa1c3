//! Layered-architecture policy: loading, the dependency rule, severity
//! grading, run verdicts, and the Architectural Violation Rate.
//!
//! A policy orders layers by ring index (0 = innermost). The dependency rule
//! says an import may only point inward: an edge from ring `r1` to ring `r2`
//! violates when `r2 > r1`. External imports are graded against per-layer
//! allow lists, a global critical deny list, and per-layer minor-exempt
//! lists; the per-layer allow list wins over the deny list, so the two may
//! overlap (infrastructure legitimately allows `sqlite3`). A layer's allow
//! and minor_exempt lists must stay disjoint.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::RunDescriptor;
use crate::graph::{build_graph, find_cycles, DependencyGraph};
use crate::imports::{extract_imports, resolve_target, ImportRecord, ImportScan, ResolvedTarget};
use crate::unit::SourceUnit;

/// One layer: id, path prefix, and ring index (0 = innermost).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDef {
    pub id: String,
    pub prefix: String,
    pub ring: u32,
    pub allowed_external: BTreeSet<String>,
    pub minor_exempt: BTreeSet<String>,
}

/// Smell-detector configuration carried in the policy file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmellConfig {
    pub placeholder_patterns: Vec<String>,
    pub god_object_threshold: usize,
}

impl Default for SmellConfig {
    fn default() -> Self {
        SmellConfig {
            placeholder_patterns: DEFAULT_PLACEHOLDER_PATTERNS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            god_object_threshold: 3,
        }
    }
}

pub const DEFAULT_PLACEHOLDER_PATTERNS: &[&str] = &[
    "logic goes here",
    "todo",
    "implement",
    "fixme",
    "your code here",
];

pub const DEFAULT_CRITICAL_EXTERNAL: &[&str] = &[
    "sqlite3",
    "urllib3",
    "redis",
    "sqlalchemy",
    "flask",
    "requests",
    "psycopg2",
    "pymongo",
    "cachecontrol",
];

/// Stdlib utility roots graded Minor (instead of Critical) in the innermost
/// ring when a policy omits its minor_exempt list.
pub const DEFAULT_INNER_MINOR_EXEMPT: &[&str] = &["time", "json", "math", "datetime"];

/// Validated layer policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPolicy {
    pub layers: Vec<LayerDef>,
    pub critical_external: BTreeSet<String>,
    pub smells: SmellConfig,
}

impl LayerPolicy {
    /// The policy shipped with the tool: domain=0, application=1,
    /// infrastructure=2.
    pub fn default_policy() -> LayerPolicy {
        load_policy(include_str!("../assets/default.policy"))
            .expect("shipped default policy must parse")
    }

    pub fn layer_by_id(&self, id: &str) -> Option<&LayerDef> {
        self.layers.iter().find(|l| l.id == id)
    }

    /// Layer owning a file path, by path prefix.
    pub fn layer_for_path(&self, path: &str) -> Option<&LayerDef> {
        self.layers
            .iter()
            .find(|l| path == l.prefix || path.starts_with(&format!("{}/", l.prefix)))
    }

    /// Layer owning a dotted module target, by dotted prefix.
    pub fn layer_for_module(&self, dotted: &str) -> Option<&LayerDef> {
        self.layers.iter().find(|l| {
            let dotted_prefix = l.prefix.replace('/', ".");
            dotted == dotted_prefix || dotted.starts_with(&format!("{dotted_prefix}."))
        })
    }

    pub fn innermost_ring(&self) -> u32 {
        self.layers.iter().map(|l| l.ring).min().unwrap_or(0)
    }

    pub fn ring_of(&self, layer_id: &str) -> Option<u32> {
        self.layer_by_id(layer_id).map(|l| l.ring)
    }
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid policy: {0}")]
    Invalid(String),
}

/// Parse a policy from the line-oriented format or its JSON rendering.
pub fn load_policy(text: &str) -> Result<LayerPolicy, PolicyError> {
    let policy = if text.trim_start().starts_with('{') {
        parse_policy_json(text)?
    } else {
        parse_policy_text(text)?
    };
    validate(policy)
}

#[derive(Deserialize)]
struct PolicyJson {
    layers: Vec<LayerJson>,
    #[serde(default)]
    critical_external: Option<Vec<String>>,
    #[serde(default)]
    smells: Option<SmellsJson>,
}

#[derive(Deserialize)]
struct LayerJson {
    id: String,
    prefix: String,
    ring: u32,
    #[serde(default)]
    allow: Vec<String>,
    #[serde(default)]
    minor_exempt: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct SmellsJson {
    #[serde(default)]
    placeholder_patterns: Option<Vec<String>>,
    #[serde(default)]
    god_object_threshold: Option<usize>,
}

fn parse_policy_json(text: &str) -> Result<LayerPolicy, PolicyError> {
    let parsed: PolicyJson = serde_json::from_str(text).map_err(|e| PolicyError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut layers = Vec::new();
    for l in parsed.layers {
        layers.push(RawLayer {
            id: l.id,
            prefix: Some(l.prefix),
            ring: Some(l.ring),
            allow: l.allow.into_iter().collect(),
            minor_exempt: l.minor_exempt.map(|v| v.into_iter().collect()),
        });
    }
    let smells_defaults = SmellConfig::default();
    let smells = match parsed.smells {
        Some(s) => SmellConfig {
            placeholder_patterns: s
                .placeholder_patterns
                .unwrap_or(smells_defaults.placeholder_patterns),
            god_object_threshold: s
                .god_object_threshold
                .unwrap_or(smells_defaults.god_object_threshold),
        },
        None => smells_defaults,
    };
    assemble(layers, parsed.critical_external.map(|v| v.into_iter().collect()), smells)
}

struct RawLayer {
    id: String,
    prefix: Option<String>,
    ring: Option<u32>,
    allow: BTreeSet<String>,
    minor_exempt: Option<BTreeSet<String>>,
}

fn split_list(value: &str) -> BTreeSet<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_policy_text(text: &str) -> Result<LayerPolicy, PolicyError> {
    enum Section {
        Top,
        Layer(usize),
        Smells,
    }
    let mut layers: Vec<RawLayer> = Vec::new();
    let mut critical: Option<BTreeSet<String>> = None;
    let mut smells = SmellConfig::default();
    let mut section = Section::Top;

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let header = header.trim();
            if header == "smells" {
                section = Section::Smells;
            } else if let Some(id) = header.strip_prefix("layer ") {
                let id = id.trim().to_string();
                if id.is_empty() {
                    return Err(PolicyError::Parse {
                        line: lineno,
                        message: "layer section needs an id".into(),
                    });
                }
                layers.push(RawLayer {
                    id,
                    prefix: None,
                    ring: None,
                    allow: BTreeSet::new(),
                    minor_exempt: None,
                });
                section = Section::Layer(layers.len() - 1);
            } else {
                return Err(PolicyError::Parse {
                    line: lineno,
                    message: format!("unknown section [{header}]"),
                });
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(PolicyError::Parse {
                line: lineno,
                message: format!("expected key=value, got {line:?}"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        match section {
            Section::Top => match key {
                "critical_external" => critical = Some(split_list(value)),
                _ => {
                    return Err(PolicyError::Parse {
                        line: lineno,
                        message: format!("unknown top-level key {key:?}"),
                    })
                }
            },
            Section::Layer(i) => {
                let layer = &mut layers[i];
                match key {
                    "prefix" => layer.prefix = Some(value.trim_matches('/').to_string()),
                    "ring" => {
                        layer.ring = Some(value.parse().map_err(|_| PolicyError::Parse {
                            line: lineno,
                            message: format!("ring must be an integer, got {value:?}"),
                        })?)
                    }
                    "allow" => layer.allow = split_list(value),
                    "minor_exempt" => layer.minor_exempt = Some(split_list(value)),
                    _ => {
                        return Err(PolicyError::Parse {
                            line: lineno,
                            message: format!("unknown layer key {key:?}"),
                        })
                    }
                }
            }
            Section::Smells => match key {
                "placeholder_patterns" => {
                    smells.placeholder_patterns = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect()
                }
                "god_object_threshold" => {
                    smells.god_object_threshold =
                        value.parse().map_err(|_| PolicyError::Parse {
                            line: lineno,
                            message: format!("god_object_threshold must be an integer, got {value:?}"),
                        })?
                }
                _ => {
                    return Err(PolicyError::Parse {
                        line: lineno,
                        message: format!("unknown smells key {key:?}"),
                    })
                }
            },
        }
    }
    assemble(layers, critical, smells)
}

fn assemble(
    raw: Vec<RawLayer>,
    critical: Option<BTreeSet<String>>,
    smells: SmellConfig,
) -> Result<LayerPolicy, PolicyError> {
    let mut layers = Vec::new();
    let innermost = raw.iter().filter_map(|l| l.ring).min();
    for l in raw {
        let ring = l
            .ring
            .ok_or_else(|| PolicyError::Invalid(format!("layer {} is missing ring=", l.id)))?;
        let prefix = l
            .prefix
            .ok_or_else(|| PolicyError::Invalid(format!("layer {} is missing prefix=", l.id)))?;
        let minor_exempt = match l.minor_exempt {
            Some(set) => set,
            None if Some(ring) == innermost => DEFAULT_INNER_MINOR_EXEMPT
                .iter()
                .map(|s| s.to_string())
                .collect(),
            None => BTreeSet::new(),
        };
        layers.push(LayerDef {
            id: l.id,
            prefix,
            ring,
            allowed_external: l.allow,
            minor_exempt,
        });
    }
    let critical_external = critical.unwrap_or_else(|| {
        DEFAULT_CRITICAL_EXTERNAL
            .iter()
            .map(|s| s.to_string())
            .collect()
    });
    Ok(LayerPolicy {
        layers,
        critical_external,
        smells,
    })
}

fn validate(policy: LayerPolicy) -> Result<LayerPolicy, PolicyError> {
    if policy.layers.is_empty() {
        return Err(PolicyError::Invalid("policy defines no layers".into()));
    }
    let mut rings = BTreeSet::new();
    let mut ids = BTreeSet::new();
    for layer in &policy.layers {
        if !rings.insert(layer.ring) {
            return Err(PolicyError::Invalid(format!(
                "duplicate ring index {} (layer {})",
                layer.ring, layer.id
            )));
        }
        if !ids.insert(layer.id.clone()) {
            return Err(PolicyError::Invalid(format!("duplicate layer id {}", layer.id)));
        }
        if layer.prefix.is_empty() {
            return Err(PolicyError::Invalid(format!("layer {} has an empty prefix", layer.id)));
        }
        let overlap: Vec<&String> = layer
            .allowed_external
            .intersection(&layer.minor_exempt)
            .collect();
        if !overlap.is_empty() {
            return Err(PolicyError::Invalid(format!(
                "layer {}: allow and minor_exempt overlap on {:?}",
                layer.id, overlap
            )));
        }
    }
    for a in &policy.layers {
        for b in &policy.layers {
            if a.id != b.id
                && (a.prefix == b.prefix || b.prefix.starts_with(&format!("{}/", a.prefix)))
            {
                return Err(PolicyError::Invalid(format!(
                    "layer prefixes overlap: {} ({}) and {} ({})",
                    a.id, a.prefix, b.id, b.prefix
                )));
            }
        }
    }
    Ok(policy)
}

/// Kind of rule breach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    OutwardDependency,
    ForbiddenExternal,
    CircularDependency,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::OutwardDependency => "outward_dependency",
            ViolationKind::ForbiddenExternal => "forbidden_external",
            ViolationKind::CircularDependency => "circular_dependency",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Minor,
    Critical,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Severity::Minor => "Minor",
            Severity::Critical => "Critical",
        };
        f.write_str(s)
    }
}

/// Worst severity over a set of violations; `None` means a clean run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorstSeverity {
    None,
    Minor,
    Critical,
}

impl From<Severity> for WorstSeverity {
    fn from(s: Severity) -> Self {
        match s {
            Severity::Minor => WorstSeverity::Minor,
            Severity::Critical => WorstSeverity::Critical,
        }
    }
}

impl fmt::Display for WorstSeverity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WorstSeverity::None => "None",
            WorstSeverity::Minor => "Minor",
            WorstSeverity::Critical => "Critical",
        };
        f.write_str(s)
    }
}

/// One rule breach with its location and the offending text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub file: String,
    pub line: u32,
    pub kind: ViolationKind,
    pub severity: Severity,
    pub evidence: String,
}

/// Per-run verdict: the per-sample predicate behind the violation rate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunVerdict {
    pub model_id: String,
    pub run_id: String,
    pub violations: Vec<Violation>,
    pub is_violating: bool,
    pub worst_severity: WorstSeverity,
}

impl RunVerdict {
    pub fn from_violations(
        model_id: String,
        run_id: String,
        mut violations: Vec<Violation>,
    ) -> RunVerdict {
        violations.sort();
        violations.dedup();
        let worst_severity = violations
            .iter()
            .map(|v| WorstSeverity::from(v.severity))
            .max()
            .unwrap_or(WorstSeverity::None);
        RunVerdict {
            model_id,
            run_id,
            is_violating: !violations.is_empty(),
            worst_severity,
            violations,
        }
    }
}

/// Evaluate the dependency rule and import-purity rules over one run's
/// graph. Cycles come in from `find_cycles` and grade Critical.
pub fn check_dependency_rule(
    graph: &DependencyGraph,
    cycles: &[Vec<String>],
    policy: &LayerPolicy,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    for edge in &graph.edges {
        let Some(importer_layer) = policy.layer_for_path(&edge.from) else {
            // files outside every configured layer carry no ring to breach
            continue;
        };
        match &edge.resolution {
            ResolvedTarget::InternalLayer(target_layer) => {
                let r1 = importer_layer.ring;
                let Some(r2) = policy.ring_of(target_layer) else { continue };
                if r2 > r1 {
                    violations.push(Violation {
                        kind: ViolationKind::OutwardDependency,
                        severity: Severity::Critical,
                        file: edge.from.clone(),
                        line: edge.line,
                        evidence: edge.evidence.clone(),
                    });
                }
            }
            ResolvedTarget::ExternalPackage(root) => {
                if importer_layer.allowed_external.contains(root) {
                    continue;
                }
                let severity = if policy.critical_external.contains(root) {
                    Severity::Critical
                } else if importer_layer.minor_exempt.contains(root) {
                    Severity::Minor
                } else if importer_layer.ring == policy.innermost_ring() {
                    Severity::Critical
                } else {
                    Severity::Minor
                };
                violations.push(Violation {
                    kind: ViolationKind::ForbiddenExternal,
                    severity,
                    file: edge.from.clone(),
                    line: edge.line,
                    evidence: edge.evidence.clone(),
                });
            }
            ResolvedTarget::Unresolved => {}
        }
    }
    for cycle in cycles {
        let first = cycle.first().cloned().unwrap_or_default();
        let second = cycle.get(1).cloned().unwrap_or_else(|| first.clone());
        let line = graph
            .edge_between(&first, &second)
            .map(|e| e.line)
            .unwrap_or(0);
        let mut path: Vec<&str> = cycle.iter().map(String::as_str).collect();
        path.push(&first);
        violations.push(Violation {
            kind: ViolationKind::CircularDependency,
            severity: Severity::Critical,
            file: first.clone(),
            line,
            evidence: path.join(" -> "),
        });
    }
    violations.sort();
    violations.dedup();
    violations
}

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("run has no analyzable source files")]
    UnanalyzableRun,
}

/// Everything the rule evaluation produced for one run, kept for the
/// downstream report stages.
#[derive(Debug, Clone)]
pub struct RunEvaluation {
    pub verdict: RunVerdict,
    pub graph: DependencyGraph,
    pub cycles: Vec<Vec<String>>,
    pub records: Vec<(ImportRecord, ResolvedTarget)>,
    pub scans: Vec<(String, ImportScan)>,
}

/// Evaluate one run end to end: extraction, resolution, graph, cycles,
/// rule checks.
pub fn evaluate_run(run: &RunDescriptor, policy: &LayerPolicy) -> Result<RunEvaluation, EvaluateError> {
    let units: Vec<SourceUnit> = run
        .source_files
        .iter()
        .filter(|f| !f.non_source)
        .map(|f| SourceUnit::parse_flagged(f.rel_path.clone(), f.text.clone(), f.lossy_decode))
        .collect();
    evaluate_units(&run.model_id, &run.run_id, &units, policy)
}

/// Same as [`evaluate_run`] but over already-parsed units.
pub fn evaluate_units(
    model_id: &str,
    run_id: &str,
    units: &[SourceUnit],
    policy: &LayerPolicy,
) -> Result<RunEvaluation, EvaluateError> {
    if units.is_empty() {
        return Err(EvaluateError::UnanalyzableRun);
    }
    let run_paths: BTreeSet<String> = units.iter().map(|u| u.rel_path.clone()).collect();
    let mut records = Vec::new();
    let mut scans = Vec::new();
    for unit in units {
        let scan = extract_imports(unit);
        for record in &scan.records {
            let resolution = resolve_target(record, policy, &run_paths);
            records.push((record.clone(), resolution));
        }
        scans.push((unit.rel_path.clone(), scan));
    }
    let graph = build_graph(&records, &run_paths);
    let cycles = find_cycles(&graph);
    let violations = check_dependency_rule(&graph, &cycles, policy);
    let verdict = RunVerdict::from_violations(model_id.to_string(), run_id.to_string(), violations);
    Ok(RunEvaluation {
        verdict,
        graph,
        cycles,
        records,
        scans,
    })
}

#[derive(Debug, Error)]
pub enum AvrError {
    #[error("cannot compute a violation rate over zero runs")]
    EmptyInput,
}

/// Exact violation-rate percentage: `100 * violating / total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvrPercent {
    pub violating: usize,
    pub total: usize,
}

impl AvrPercent {
    pub fn as_f64(&self) -> f64 {
        100.0 * self.violating as f64 / self.total as f64
    }

    /// Render with exactly one decimal, rounding half away from zero on the
    /// exact rational value.
    pub fn one_decimal(&self) -> String {
        let tenths = (1000 * self.violating as u64 + self.total as u64 / 2) / self.total as u64;
        format!("{}.{}", tenths / 10, tenths % 10)
    }
}

impl fmt::Display for AvrPercent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}%", self.one_decimal())
    }
}

/// Percentage of runs with at least one violation.
pub fn compute_avr(verdicts: &[RunVerdict]) -> Result<AvrPercent, AvrError> {
    if verdicts.is_empty() {
        return Err(AvrError::EmptyInput);
    }
    Ok(AvrPercent {
        violating: verdicts.iter().filter(|v| v.is_violating).count(),
        total: verdicts.len(),
    })
}
