//! Run-level import dependency graph and elementary cycle enumeration.
//!
//! Nodes are internal files (plus dotted targets normalized to file paths)
//! and external package roots. Cycle enumeration is a blocked-DFS variant of
//! Johnson's algorithm restricted, per start node, to nodes that sort after
//! it; each elementary cycle is reported exactly once, rotated to start at
//! its lexicographically smallest node.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::imports::{ImportKind, ImportRecord, ResolvedTarget};

/// One directed edge with provenance back to the import that created it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub resolution: ResolvedTarget,
    pub line: u32,
    pub evidence: String,
}

/// Immutable dependency graph for one run.
#[derive(Debug, Clone, Default)]
pub struct DependencyGraph {
    pub nodes: BTreeSet<String>,
    pub internal_nodes: BTreeSet<String>,
    pub edges: Vec<GraphEdge>,
}

impl DependencyGraph {
    pub fn edge_between(&self, from: &str, to: &str) -> Option<&GraphEdge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }
}

/// Map a dotted internal target onto a file in the run, falling back to the
/// bare path when no file matches (a virtual node).
fn internal_node_key(module_path: &str, run_paths: &BTreeSet<String>) -> String {
    let file = format!("{module_path}.py");
    if run_paths.contains(&file) {
        return file;
    }
    let pkg = format!("{module_path}/__init__.py");
    if run_paths.contains(&pkg) {
        return pkg;
    }
    module_path.to_string()
}

/// Build the deduplicated graph from resolved records.
///
/// Every file in the run becomes a node even when isolated. Unresolved
/// records contribute no edges.
pub fn build_graph(
    records: &[(ImportRecord, ResolvedTarget)],
    run_paths: &BTreeSet<String>,
) -> DependencyGraph {
    let mut nodes: BTreeSet<String> = run_paths.clone();
    let mut internal_nodes: BTreeSet<String> = run_paths.clone();
    let mut edges: BTreeMap<(String, String), GraphEdge> = BTreeMap::new();

    for (record, resolution) in records {
        let to = match resolution {
            ResolvedTarget::InternalLayer(_) => {
                let module_path = match record.kind {
                    ImportKind::Relative => match crate::imports::relative_module_path(record) {
                        Some(p) => p,
                        None => continue,
                    },
                    _ => record.target.replace('.', "/"),
                };
                let key = internal_node_key(&module_path, run_paths);
                internal_nodes.insert(key.clone());
                key
            }
            ResolvedTarget::ExternalPackage(root) => root.clone(),
            ResolvedTarget::Unresolved => continue,
        };
        nodes.insert(record.importer_path.clone());
        nodes.insert(to.clone());
        let key = (record.importer_path.clone(), to.clone());
        edges.entry(key).or_insert_with(|| GraphEdge {
            from: record.importer_path.clone(),
            to,
            resolution: resolution.clone(),
            line: record.line,
            evidence: record.raw.clone(),
        });
    }

    DependencyGraph {
        nodes,
        internal_nodes,
        edges: edges.into_values().collect(),
    }
}

/// Enumerate every elementary cycle among internal nodes, each reported
/// once and rotated to start at its smallest node. External nodes have no
/// outgoing edges so they never participate.
pub fn find_cycles(graph: &DependencyGraph) -> Vec<Vec<String>> {
    let nodes: Vec<&String> = graph.internal_nodes.iter().collect();
    let index: BTreeMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let n = nodes.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &graph.edges {
        if let (Some(&f), Some(&t)) = (index.get(e.from.as_str()), index.get(e.to.as_str())) {
            if !adj[f].contains(&t) {
                adj[f].push(t);
            }
        }
    }
    for row in adj.iter_mut() {
        row.sort_unstable();
    }

    let mut cycles: Vec<Vec<String>> = Vec::new();
    for start in 0..n {
        // blocked DFS over the subgraph of nodes >= start
        let mut blocked = vec![false; n];
        let mut block_list: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut closed = vec![false; n];
        blocked[start] = true;
        let neighbors = |v: usize, adj: &Vec<Vec<usize>>| -> Vec<usize> {
            adj[v].iter().copied().filter(|&w| w >= start).collect()
        };
        let mut path = vec![start];
        let mut stack: Vec<(usize, Vec<usize>)> = vec![(start, neighbors(start, &adj))];
        while let Some((v, next)) = stack.last_mut() {
            let v = *v;
            if let Some(w) = next.pop() {
                if w == start {
                    cycles.push(path.iter().map(|&i| nodes[i].clone()).collect());
                    for &p in &path {
                        closed[p] = true;
                    }
                } else if !blocked[w] {
                    path.push(w);
                    blocked[w] = true;
                    closed[w] = false;
                    stack.push((w, neighbors(w, &adj)));
                }
                continue;
            }
            if closed[v] {
                unblock(v, &mut blocked, &mut block_list);
            } else {
                for w in neighbors(v, &adj) {
                    block_list[w].insert(v);
                }
            }
            stack.pop();
            path.pop();
        }
    }

    let mut out: Vec<Vec<String>> = cycles.into_iter().map(canonical_rotation).collect();
    out.sort();
    out.dedup();
    out
}

fn unblock(v: usize, blocked: &mut [bool], block_list: &mut [BTreeSet<usize>]) {
    let mut queue = vec![v];
    while let Some(v) = queue.pop() {
        if blocked[v] {
            blocked[v] = false;
            for w in std::mem::take(&mut block_list[v]) {
                queue.push(w);
            }
        }
    }
}

/// Rotate a cycle so its lexicographically smallest node comes first.
pub fn canonical_rotation(cycle: Vec<String>) -> Vec<String> {
    if cycle.is_empty() {
        return cycle;
    }
    let min_pos = cycle
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut rotated = Vec::with_capacity(cycle.len());
    rotated.extend_from_slice(&cycle[min_pos..]);
    rotated.extend_from_slice(&cycle[..min_pos]);
    rotated
}
