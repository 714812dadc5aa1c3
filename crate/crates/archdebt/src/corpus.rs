//! Corpus discovery and combined-block splitting.
//!
//! A corpus root holds one directory per model; each run is either a
//! directory of files (`<root>/<model>/<run>/...`) or a single combined
//! text block (`<root>/<model>/<run>.txt`) that gets split into virtual
//! files at recognized markers. Discovery is deterministic: runs are
//! ordered by `(model_id, run_id)` and nothing is silently dropped — a run
//! that cannot be read still appears, with a warning and whatever files
//! survived.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

/// How a run's files arrived on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOrigin {
    FileTree,
    CombinedBlock,
}

/// One file belonging to a run.
///
/// `non_source` marks files that are kept for completeness but excluded
/// from parsing and metrics (anything not ending in a source extension);
/// `lossy_decode` marks files whose bytes were not valid UTF-8.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFileRecord {
    pub rel_path: String,
    pub text: String,
    pub non_source: bool,
    pub lossy_decode: bool,
}

impl SourceFileRecord {
    pub fn new(rel_path: impl Into<String>, text: impl Into<String>) -> SourceFileRecord {
        let rel_path = rel_path.into();
        let non_source = !is_source_path(&rel_path);
        SourceFileRecord {
            rel_path,
            text: text.into(),
            non_source,
            lossy_decode: false,
        }
    }
}

/// One generation sample, analyzed as a unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunDescriptor {
    pub model_id: String,
    pub run_id: String,
    pub origin: RunOrigin,
    pub source_files: Vec<SourceFileRecord>,
}

/// A problem hit during discovery that did not abort the whole corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestWarning {
    pub path: String,
    pub message: String,
}

/// The discovered corpus: immutable after construction.
#[derive(Debug, Clone)]
pub struct CorpusLayout {
    pub root: PathBuf,
    pub runs: Vec<RunDescriptor>,
    pub generation_metadata: Option<BTreeMap<String, String>>,
    pub warnings: Vec<IngestWarning>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus root {0} does not exist or is not a directory")]
    MissingRoot(PathBuf),
    #[error("no runs found under {0}")]
    EmptyCorpus(PathBuf),
    #[error("cannot read {path}: {message}")]
    UnreadableRoot { path: PathBuf, message: String },
}

/// Extensions treated as analyzable source.
const SOURCE_EXTENSIONS: &[&str] = &["py", "pyi"];

pub fn is_source_path(path: &str) -> bool {
    Path::new(path)
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| SOURCE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

fn decode_lossy(bytes: &[u8]) -> (String, bool) {
    match String::from_utf8_lossy(bytes) {
        std::borrow::Cow::Borrowed(s) => (s.to_string(), false),
        std::borrow::Cow::Owned(s) => (s, true),
    }
}

/// Walk the corpus root and build one `RunDescriptor` per run.
pub fn discover_corpus(root: &Path) -> Result<CorpusLayout, CorpusError> {
    if !root.is_dir() {
        return Err(CorpusError::MissingRoot(root.to_path_buf()));
    }
    let mut warnings: Vec<IngestWarning> = Vec::new();
    let mut runs: Vec<RunDescriptor> = Vec::new();

    let mut model_dirs: Vec<PathBuf> = Vec::new();
    let entries = fs::read_dir(root).map_err(|e| CorpusError::UnreadableRoot {
        path: root.to_path_buf(),
        message: e.to_string(),
    })?;
    for entry in entries.flatten() {
        let path = entry.path();
        if path.is_dir() {
            model_dirs.push(path);
        }
    }
    model_dirs.sort();

    for model_dir in &model_dirs {
        let model_id = model_dir
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_default();
        let mut candidates: Vec<(String, PathBuf, RunOrigin)> = Vec::new();
        match fs::read_dir(model_dir) {
            Ok(entries) => {
                for entry in entries.flatten() {
                    let path = entry.path();
                    if path.is_dir() {
                        let run_id = path
                            .file_name()
                            .map(|n| n.to_string_lossy().to_string())
                            .unwrap_or_default();
                        candidates.push((run_id, path, RunOrigin::FileTree));
                    } else if path.extension().and_then(|e| e.to_str()) == Some("txt") {
                        let run_id = path
                            .file_stem()
                            .map(|n| n.to_string_lossy().to_string())
                            .unwrap_or_default();
                        candidates.push((run_id, path, RunOrigin::CombinedBlock));
                    }
                }
            }
            Err(e) => {
                warnings.push(IngestWarning {
                    path: model_dir.to_string_lossy().to_string(),
                    message: format!("unreadable model directory: {e}"),
                });
                continue;
            }
        }
        candidates.sort_by(|a, b| a.0.cmp(&b.0));
        for (run_id, path, origin) in candidates {
            let run = match origin {
                RunOrigin::FileTree => ingest_file_tree(&model_id, &run_id, &path, &mut warnings),
                RunOrigin::CombinedBlock => {
                    ingest_combined_block(&model_id, &run_id, &path, &mut warnings)
                }
            };
            runs.push(run);
        }
    }

    if runs.is_empty() {
        return Err(CorpusError::EmptyCorpus(root.to_path_buf()));
    }
    runs.sort_by(|a, b| (a.model_id.clone(), a.run_id.clone()).cmp(&(b.model_id.clone(), b.run_id.clone())));

    let generation_metadata = read_metadata(root, &mut warnings);
    Ok(CorpusLayout {
        root: root.to_path_buf(),
        runs,
        generation_metadata,
        warnings,
    })
}

fn read_metadata(root: &Path, warnings: &mut Vec<IngestWarning>) -> Option<BTreeMap<String, String>> {
    let path = root.join("metadata.json");
    if !path.is_file() {
        return None;
    }
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) => {
            warnings.push(IngestWarning {
                path: path.to_string_lossy().to_string(),
                message: format!("unreadable metadata: {e}"),
            });
            return None;
        }
    };
    match serde_json::from_slice::<BTreeMap<String, serde_json::Value>>(&bytes) {
        Ok(map) => Some(
            map.into_iter()
                .map(|(k, v)| match v {
                    serde_json::Value::String(s) => (k, s),
                    other => (k, other.to_string()),
                })
                .collect(),
        ),
        Err(e) => {
            warnings.push(IngestWarning {
                path: path.to_string_lossy().to_string(),
                message: format!("metadata is not a JSON object: {e}"),
            });
            None
        }
    }
}

fn ingest_file_tree(
    model_id: &str,
    run_id: &str,
    run_dir: &Path,
    warnings: &mut Vec<IngestWarning>,
) -> RunDescriptor {
    let mut files: Vec<SourceFileRecord> = Vec::new();
    for entry in WalkDir::new(run_dir).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                warnings.push(IngestWarning {
                    path: run_dir.to_string_lossy().to_string(),
                    message: format!("walk error: {e}"),
                });
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(run_dir)
            .unwrap_or(entry.path())
            .to_string_lossy()
            .replace('\\', "/");
        match fs::read(entry.path()) {
            Ok(bytes) => {
                let (text, lossy) = decode_lossy(&bytes);
                let mut record = SourceFileRecord::new(rel, text);
                record.lossy_decode = lossy;
                files.push(record);
            }
            Err(e) => {
                warnings.push(IngestWarning {
                    path: entry.path().to_string_lossy().to_string(),
                    message: format!("unreadable file: {e}"),
                });
            }
        }
    }
    files.sort_by(|a, b| a.rel_path.cmp(&b.rel_path));
    RunDescriptor {
        model_id: model_id.to_string(),
        run_id: run_id.to_string(),
        origin: RunOrigin::FileTree,
        source_files: files,
    }
}

fn ingest_combined_block(
    model_id: &str,
    run_id: &str,
    path: &Path,
    warnings: &mut Vec<IngestWarning>,
) -> RunDescriptor {
    let mut files = Vec::new();
    match fs::read(path) {
        Ok(bytes) => {
            let (text, lossy) = decode_lossy(&bytes);
            let split = match split_combined_block(&text) {
                Ok(parts) => parts,
                Err(SplitError::NoMarkersFound) => vec![("combined.py".to_string(), text)],
            };
            for (rel_path, file_text) in split {
                let mut record = SourceFileRecord::new(rel_path, file_text);
                record.lossy_decode = lossy;
                files.push(record);
            }
        }
        Err(e) => {
            warnings.push(IngestWarning {
                path: path.to_string_lossy().to_string(),
                message: format!("unreadable file: {e}"),
            });
        }
    }
    RunDescriptor {
        model_id: model_id.to_string(),
        run_id: run_id.to_string(),
        origin: RunOrigin::CombinedBlock,
        source_files: files,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SplitError {
    #[error("no file markers found in combined block")]
    NoMarkersFound,
}

/// Recognized file markers, checked in order on each line:
///
/// 1. `# File: <path>` — path is the first whitespace-delimited token after
///    the colon; any trailing annotation stays on the marker line.
/// 2. `# --- <path> ---` where `<path>` ends in a source extension.
/// 3. A fenced code block whose nearest preceding non-blank line is a bare
///    path ending in a source extension; the path line, any blank lines
///    after it, and both fence lines count as marker lines.
///
/// Content before the first marker is discarded; marker lines are excluded
/// from file text; paths are normalized to forward slashes. Splitting is
/// lossless: concatenating marker lines and file texts in order reproduces
/// every input line at or after the first marker.
pub fn split_combined_block(text: &str) -> Result<Vec<(String, String)>, SplitError> {
    let lines: Vec<&str> = text.split('\n').collect();
    // a trailing newline produces one empty trailing element; drop it so we
    // do not invent a final empty line
    let effective_len = if text.ends_with('\n') {
        lines.len() - 1
    } else {
        lines.len()
    };

    enum Marker {
        Comment(String),
        Banner(String),
        /// path, number of lines the marker spans (path line + blanks + fence)
        Fence(String, usize),
    }

    let marker_at = |i: usize| -> Option<Marker> {
        let line = lines[i].trim();
        if let Some(rest) = line.strip_prefix("# File:").or_else(|| line.strip_prefix("#File:")) {
            let path = rest.split_whitespace().next()?.to_string();
            if path.is_empty() {
                return None;
            }
            return Some(Marker::Comment(normalize_path(&path)));
        }
        if let Some(rest) = line.strip_prefix("# ---") {
            if let Some(inner) = rest.strip_suffix("---") {
                let candidate = inner.trim();
                if is_source_path(candidate) && !candidate.contains(char::is_whitespace) {
                    return Some(Marker::Banner(normalize_path(candidate)));
                }
            }
            return None;
        }
        // bare path line followed (across blanks) by an opening fence
        if !line.is_empty()
            && is_source_path(line)
            && !line.contains(char::is_whitespace)
            && !line.starts_with('#')
        {
            let mut j = i + 1;
            while j < effective_len && lines[j].trim().is_empty() {
                j += 1;
            }
            if j < effective_len && lines[j].trim_start().starts_with("```") {
                return Some(Marker::Fence(normalize_path(line), j - i + 1));
            }
        }
        None
    };

    let mut parts: Vec<(String, Vec<&str>)> = Vec::new();
    let mut i = 0usize;
    let mut inside_fence = false;
    let mut any_marker = false;
    while i < effective_len {
        if !inside_fence {
            match marker_at(i) {
                Some(Marker::Comment(path)) | Some(Marker::Banner(path)) => {
                    parts.push((path, Vec::new()));
                    any_marker = true;
                    i += 1;
                    continue;
                }
                Some(Marker::Fence(path, span)) => {
                    parts.push((path, Vec::new()));
                    any_marker = true;
                    inside_fence = true;
                    i += span;
                    continue;
                }
                None => {}
            }
        } else if lines[i].trim_start().starts_with("```") {
            // closing fence is a marker line
            inside_fence = false;
            i += 1;
            continue;
        }
        if let Some((_, body)) = parts.last_mut() {
            body.push(lines[i]);
        }
        i += 1;
    }

    if !any_marker {
        return Err(SplitError::NoMarkersFound);
    }
    Ok(parts
        .into_iter()
        .map(|(path, body)| {
            let mut text = body.join("\n");
            if !text.is_empty() {
                text.push('\n');
            }
            (path, text)
        })
        .collect())
}

fn normalize_path(path: &str) -> String {
    path.replace('\\', "/")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use tempfile::TempDir;

    #[test]
    fn comment_markers_split_two_files() {
        let text = "# File: domain/book.py\nclass Book:\n    pass\n# File: infrastructure/sqlite_repo.py\nimport sqlite3\n";
        let parts = split_combined_block(text).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].0, "domain/book.py");
        assert_eq!(parts[0].1, "class Book:\n    pass\n");
        assert_eq!(parts[1].0, "infrastructure/sqlite_repo.py");
        assert_eq!(parts[1].1, "import sqlite3\n");
    }

    #[test]
    fn no_markers_is_an_error() {
        assert_eq!(
            split_combined_block("x = 1\ny = 2\n"),
            Err(SplitError::NoMarkersFound)
        );
    }

    // oracle: hand-splitting the fixture by marker lines
    #[test]
    fn empty_middle_section_kept_as_empty_file() {
        let text = "# File: a.py\nx = 1\n# File: b.py\n# File: c.py\ny = 2\n";
        let parts = split_combined_block(text).unwrap();
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[1], ("b.py".to_string(), String::new()));
        assert_eq!(parts[2], ("c.py".to_string(), "y = 2\n".to_string()));
    }

    #[test]
    fn content_before_first_marker_discarded() {
        let text = "Sure, here are the three files:\n# File: a.py\nx = 1\n";
        let parts = split_combined_block(text).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].1, "x = 1\n");
    }

    #[test]
    fn banner_marker_requires_source_extension() {
        let text = "# --- domain/book.py ---\nx = 1\n# --- NOT A PATH ---\ny = 2\n";
        let parts = split_combined_block(text).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].0, "domain/book.py");
        assert_eq!(parts[0].1, "x = 1\n# --- NOT A PATH ---\ny = 2\n");
    }

    #[test]
    fn fenced_block_with_bare_path_line() {
        let text = "domain/book.py\n```python\nclass Book:\n    pass\n```\napplication/svc.py\n```python\nx = 1\n```\n";
        let parts = split_combined_block(text).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].0, "domain/book.py");
        assert_eq!(parts[0].1, "class Book:\n    pass\n");
        assert_eq!(parts[1].1, "x = 1\n");
    }

    #[test]
    fn marker_with_trailing_annotation_keeps_first_token() {
        let text = "# File: domain/book.py (Should be pure)\nx = 1\n";
        let parts = split_combined_block(text).unwrap();
        assert_eq!(parts[0].0, "domain/book.py");
    }

    #[test]
    fn backslash_paths_normalized() {
        let text = "# File: domain\\book.py\nx = 1\n";
        let parts = split_combined_block(text).unwrap();
        assert_eq!(parts[0].0, "domain/book.py");
    }

    #[test]
    fn lossless_reassembly_from_first_marker() {
        let text = "preamble chatter\n# File: a.py\nx = 1\n\n# File: b.py\n# a comment kept in b\ny = 2\n";
        let parts = split_combined_block(text).unwrap();
        let mut rebuilt = String::new();
        rebuilt.push_str("# File: a.py\n");
        rebuilt.push_str(&parts[0].1);
        rebuilt.push_str("# File: b.py\n");
        rebuilt.push_str(&parts[1].1);
        let from_first_marker = &text[text.find("# File: a.py").unwrap()..];
        assert_eq!(rebuilt, from_first_marker);
    }

    fn write(root: &Path, rel: &str, content: &str) {
        let path = root.join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, content).unwrap();
    }

    #[test]
    fn single_file_tree_run() {
        let tmp = TempDir::new().unwrap();
        write(tmp.path(), "llama3/run1/domain/book.py", "x = 1\n");
        let layout = discover_corpus(tmp.path()).unwrap();
        assert_eq!(layout.runs.len(), 1);
        let run = &layout.runs[0];
        assert_eq!(run.model_id, "llama3");
        assert_eq!(run.run_id, "run1");
        assert_eq!(run.origin, RunOrigin::FileTree);
        assert_eq!(run.source_files.len(), 1);
        assert_eq!(run.source_files[0].rel_path, "domain/book.py");
        assert!(!run.source_files[0].non_source);
    }

    #[test]
    fn three_models_five_runs_each() {
        let tmp = TempDir::new().unwrap();
        for model in ["m1", "m2", "m3"] {
            for run in 1..=5 {
                write(
                    tmp.path(),
                    &format!("{model}/run{run}/domain/a.py"),
                    "x = 1\n",
                );
            }
        }
        let layout = discover_corpus(tmp.path()).unwrap();
        assert_eq!(layout.runs.len(), 15);
    }

    #[test]
    fn empty_root_is_empty_corpus() {
        let tmp = TempDir::new().unwrap();
        assert!(matches!(
            discover_corpus(tmp.path()),
            Err(CorpusError::EmptyCorpus(_))
        ));
    }

    #[test]
    fn missing_root_reported() {
        assert!(matches!(
            discover_corpus(Path::new("/nonexistent/corpus/root")),
            Err(CorpusError::MissingRoot(_))
        ));
    }

    #[test]
    fn discovery_is_deterministic() {
        let tmp = TempDir::new().unwrap();
        write(tmp.path(), "b/run2/x.py", "b = 2\n");
        write(tmp.path(), "b/run1/x.py", "a = 1\n");
        write(tmp.path(), "a/run1.txt", "# File: one.py\nz = 3\n");
        let first = discover_corpus(tmp.path()).unwrap();
        let second = discover_corpus(tmp.path()).unwrap();
        let ids = |l: &CorpusLayout| {
            l.runs
                .iter()
                .map(|r| (r.model_id.clone(), r.run_id.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(&first), ids(&second));
        assert_eq!(
            ids(&first),
            vec![
                ("a".to_string(), "run1".to_string()),
                ("b".to_string(), "run1".to_string()),
                ("b".to_string(), "run2".to_string()),
            ]
        );
        assert_eq!(first.runs, second.runs);
    }

    #[test]
    fn combined_without_markers_becomes_anonymous_file() {
        let tmp = TempDir::new().unwrap();
        write(tmp.path(), "m/run1.txt", "x = 1\ny = 2\n");
        let layout = discover_corpus(tmp.path()).unwrap();
        let run = &layout.runs[0];
        assert_eq!(run.origin, RunOrigin::CombinedBlock);
        assert_eq!(run.source_files.len(), 1);
        assert_eq!(run.source_files[0].rel_path, "combined.py");
    }

    #[test]
    fn non_source_files_flagged_not_dropped() {
        let tmp = TempDir::new().unwrap();
        write(tmp.path(), "m/run1/README.md", "notes\n");
        write(tmp.path(), "m/run1/domain/a.py", "x = 1\n");
        let layout = discover_corpus(tmp.path()).unwrap();
        let run = &layout.runs[0];
        assert_eq!(run.source_files.len(), 2);
        let md = run
            .source_files
            .iter()
            .find(|f| f.rel_path == "README.md")
            .unwrap();
        assert!(md.non_source);
    }

    #[test]
    fn empty_run_directory_still_a_run() {
        let tmp = TempDir::new().unwrap();
        fs::create_dir_all(tmp.path().join("m/run1")).unwrap();
        write(tmp.path(), "m/run2/a.py", "x = 1\n");
        let layout = discover_corpus(tmp.path()).unwrap();
        assert_eq!(layout.runs.len(), 2);
        assert!(layout.runs[0].source_files.is_empty());
    }

    #[test]
    fn invalid_utf8_flagged_lossy() {
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("m/run1");
        fs::create_dir_all(&path).unwrap();
        fs::write(path.join("bad.py"), b"x = 1\n\xff\xfe\n").unwrap();
        let layout = discover_corpus(tmp.path()).unwrap();
        let file = &layout.runs[0].source_files[0];
        assert!(file.lossy_decode);
        assert!(file.text.contains('\u{FFFD}'));
    }

    #[test]
    fn metadata_read_when_present() {
        let tmp = TempDir::new().unwrap();
        write(tmp.path(), "m/run1/a.py", "x = 1\n");
        fs::write(
            tmp.path().join("metadata.json"),
            "{\"temperature\": \"0.2\"}",
        )
        .unwrap();
        let layout = discover_corpus(tmp.path()).unwrap();
        let meta = layout.generation_metadata.unwrap();
        assert_eq!(meta.get("temperature").map(String::as_str), Some("0.2"));
    }

    #[test]
    fn no_file_assigned_to_two_runs() {
        let tmp = TempDir::new().unwrap();
        write(tmp.path(), "m/run1/a.py", "x = 1\n");
        write(tmp.path(), "m/run2/a.py", "x = 1\n");
        let layout = discover_corpus(tmp.path()).unwrap();
        let total: usize = layout.runs.iter().map(|r| r.source_files.len()).sum();
        assert_eq!(total, 2);
        assert_eq!(layout.runs.len(), 2);
    }
}
