//! Grouped execution: statements sharing an import set are concatenated into
//! one compiler input, each wrapped in its own namespace, and the compiler's
//! diagnostics are routed back to statements by line range.

use serde::{Deserialize, Serialize};

use super::precheck::imports_of;
use crate::types::{Diagnostic, FormalStatement};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BatchError {
    #[error("cannot assemble an empty group")]
    EmptyGroup,
    #[error("diagnostic at line {line} lies beyond the last statement (line {last})")]
    UnmappableDiagnostic { line: u32, last: u32 },
}

/// Canonical import key: sorted, deduplicated header imports.
pub fn import_key(statement: &FormalStatement) -> Vec<String> {
    let mut key = imports_of(&statement.code);
    key.sort();
    key.dedup();
    key
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementGroup {
    pub import_key: Vec<String>,
    pub members: Vec<(usize, FormalStatement)>,
}

/// Partitions statements by import key, in order of first appearance, then
/// splits each key's run into chunks of at most `batch_size`.
pub fn group_statements(
    statements: &[(usize, FormalStatement)],
    batch_size: usize,
) -> Vec<StatementGroup> {
    assert!(batch_size >= 1, "batch_size must be positive");
    type Members = Vec<(usize, FormalStatement)>;
    let mut by_key: Vec<(Vec<String>, Members)> = Vec::new();
    for (idx, st) in statements {
        let key = import_key(st);
        match by_key.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push((*idx, st.clone())),
            None => by_key.push((key, vec![(*idx, st.clone())])),
        }
    }
    by_key
        .into_iter()
        .flat_map(|(key, members)| {
            members
                .chunks(batch_size)
                .map(|chunk| StatementGroup {
                    import_key: key.clone(),
                    members: chunk.to_vec(),
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Global line range `[first_line, last_line]` owned by one statement:
/// its namespace opening line through its closing line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRange {
    pub statement_index: usize,
    pub first_line: u32,
    pub last_line: u32,
}

impl LineRange {
    /// Number of statement lines between the namespace delimiters.
    pub fn body_lines(&self) -> u32 {
        self.last_line - self.first_line - 1
    }

    pub fn contains(&self, line: u32) -> bool {
        (self.first_line..=self.last_line).contains(&line)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssembledFile {
    pub source: String,
    pub header_lines: u32,
    pub line_map: Vec<LineRange>,
}

/// Namespace wrapping statement `member` of group `group`.
pub fn namespace_name(nonce: &str, group: usize, member: usize) -> String {
    format!("AF_batch_{nonce}_{group}_{member}")
}

/// Statement body with leading-header import lines blanked out, so line
/// numbers inside the body equal the statement's own line numbers.
fn body_without_imports(code: &str) -> Vec<String> {
    let header_imports = imports_of(code);
    let mut remaining = header_imports.len();
    code.lines()
        .map(|line| {
            let t = line.trim();
            if remaining > 0 {
                if let Some(rest) = t.strip_prefix("import ") {
                    remaining = remaining.saturating_sub(rest.split_whitespace().count());
                    return String::new();
                }
            }
            line.to_string()
        })
        .collect()
}

/// Builds the compiler input for a group: the shared import header, then
/// one namespace block per member.
pub fn assemble_group(
    group: &StatementGroup,
    nonce: &str,
    group_id: usize,
) -> Result<AssembledFile, BatchError> {
    if group.members.is_empty() {
        return Err(BatchError::EmptyGroup);
    }
    let mut lines: Vec<String> = group
        .import_key
        .iter()
        .map(|m| format!("import {m}"))
        .collect();
    lines.push(String::new());
    let header_lines = lines.len() as u32;
    let mut line_map = Vec::with_capacity(group.members.len());
    for (member, (idx, st)) in group.members.iter().enumerate() {
        let ns = namespace_name(nonce, group_id, member);
        let mut body = body_without_imports(&st.code);
        if body.is_empty() {
            body.push(String::new());
        }
        let first_line = lines.len() as u32 + 1;
        lines.push(format!("namespace {ns}"));
        lines.extend(body);
        lines.push(format!("end {ns}"));
        line_map.push(LineRange {
            statement_index: *idx,
            first_line,
            last_line: lines.len() as u32,
        });
    }
    let mut source = lines.join("\n");
    source.push('\n');
    Ok(AssembledFile {
        source,
        header_lines,
        line_map,
    })
}

/// Routes file-level diagnostics to members, in `line_map` order.
///
/// A diagnostic inside a member's range moves to statement-local lines
/// (`global - first_line`, clamped to the body); one in the header is
/// copied to every member.
pub fn map_diagnostics(
    diagnostics: &[Diagnostic],
    file: &AssembledFile,
) -> Result<Vec<Vec<Diagnostic>>, BatchError> {
    let mut out = vec![Vec::new(); file.line_map.len()];
    let last = file.line_map.last().map_or(file.header_lines, |r| r.last_line);
    for d in diagnostics {
        if d.start_line <= file.header_lines {
            for member in out.iter_mut() {
                member.push(d.clone());
            }
            continue;
        }
        let slot = file
            .line_map
            .iter()
            .position(|r| r.contains(d.start_line))
            .ok_or(BatchError::UnmappableDiagnostic {
                line: d.start_line,
                last,
            })?;
        let range = file.line_map[slot];
        let mut local = d.shifted(-i64::from(range.first_line));
        let body = range.body_lines().max(1);
        if d.start_line == range.first_line {
            local.start_line = 1;
            local.start_col = 0;
        }
        local.start_line = local.start_line.min(body);
        local.end_line = local.end_line.clamp(local.start_line, body);
        if local.end_line == local.start_line && local.end_col < local.start_col {
            local.end_col = local.start_col;
        }
        out[slot].push(local);
    }
    Ok(out)
}
