//! Static analysis toolkit for quantifying architectural technical debt in
//! generated Python codebases.
//!
//! The pipeline ingests a corpus of generation runs, tokenizes each source
//! file, extracts the import dependency graph, enforces a layered
//! (ports-and-adapters) dependency policy, computes maintainability metrics,
//! detects generative-debt smells, and aggregates everything into per-model
//! corpus summaries with an Architectural Violation Rate.

#![forbid(unsafe_code)]

pub mod blocks;
pub mod corpus;
pub mod graph;
pub mod imports;
pub mod lexer;
pub mod metrics;
pub mod pipeline;
pub mod policy;
pub mod report;
pub mod smells;
pub mod unit;

pub mod cli;
