//! Static filters applied before any compiler dispatch.

use serde::{Deserialize, Serialize};

use crate::types::{Diagnostic, FormalStatement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecheckFailure {
    MissingRequiredImport,
    MissingTerminalSorry,
    UnmatchedBrackets,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecheckResult {
    pub pass: bool,
    pub failures: Vec<PrecheckFailure>,
    /// Human-readable findings, positioned where possible.
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

/// Which bracket pairs the scanner balances. `()`, `[]` and `{}` always;
/// `⟨⟩` and `«»` only when `extended` is set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BracketOptions {
    pub extended: bool,
}

impl BracketOptions {
    fn closing_for(&self, open: char) -> Option<char> {
        match open {
            '(' => Some(')'),
            '[' => Some(']'),
            '{' => Some('}'),
            '⟨' if self.extended => Some('⟩'),
            '«' if self.extended => Some('»'),
            _ => None,
        }
    }

    fn is_closing(&self, c: char) -> bool {
        matches!(c, ')' | ']' | '}') || (self.extended && matches!(c, '⟩' | '»'))
    }
}

/// A bracket problem at a 1-based line and 0-based char column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketIssue {
    Unclosed { line: u32, col: u32, open: char },
    Unexpected { line: u32, col: u32, close: char },
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '.' || c == '!' || c == '?'
}

/// Scans `code` for unbalanced brackets, skipping string literals, char
/// literals, `--` line comments and (nested) `/- -/` block comments.
pub fn bracket_issues(code: &str, opts: &BracketOptions) -> Vec<BracketIssue> {
    let chars: Vec<char> = code.chars().collect();
    let mut stack: Vec<(char, u32, u32)> = Vec::new();
    let mut issues = Vec::new();
    let (mut line, mut col) = (1u32, 0u32);
    let mut i = 0;

    // advance one char, tracking position
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 0;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        match c {
            '-' if next == Some('-') => {
                while i < chars.len() && chars[i] != '\n' {
                    bump!();
                }
            }
            '/' if next == Some('-') => {
                let mut depth = 0usize;
                while i < chars.len() {
                    if chars[i] == '/' && chars.get(i + 1) == Some(&'-') {
                        depth += 1;
                        bump!();
                        bump!();
                    } else if chars[i] == '-' && chars.get(i + 1) == Some(&'/') {
                        depth -= 1;
                        bump!();
                        bump!();
                        if depth == 0 {
                            break;
                        }
                    } else {
                        bump!();
                    }
                }
            }
            '"' => {
                bump!();
                while i < chars.len() && chars[i] != '"' {
                    if chars[i] == '\\' && i + 1 < chars.len() {
                        bump!();
                    }
                    bump!();
                }
                if i < chars.len() {
                    bump!();
                }
            }
            '\'' if i == 0 || !is_ident_char(chars[i - 1]) => {
                // char literal: 'x' or '\x'
                let len = if next == Some('\\') { 4 } else { 3 };
                if chars.get(i + len - 1) == Some(&'\'') {
                    for _ in 0..len {
                        bump!();
                    }
                } else {
                    bump!();
                }
            }
            _ => {
                if opts.closing_for(c).is_some() {
                    stack.push((c, line, col));
                } else if opts.is_closing(c) {
                    match stack.last() {
                        Some(&(open, _, _)) if opts.closing_for(open) == Some(c) => {
                            stack.pop();
                        }
                        _ => issues.push(BracketIssue::Unexpected {
                            line,
                            col,
                            close: c,
                        }),
                    }
                }
                bump!();
            }
        }
    }
    issues.extend(
        stack
            .into_iter()
            .map(|(open, line, col)| BracketIssue::Unclosed { line, col, open }),
    );
    issues
}

/// Modules imported in the leading header of `code`, in order of appearance.
pub fn imports_of(code: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut in_block_comment = false;
    for line in code.lines() {
        let t = line.trim();
        if in_block_comment {
            if t.contains("-/") {
                in_block_comment = false;
            }
            continue;
        }
        if t.is_empty() || t.starts_with("--") {
            continue;
        }
        if t.starts_with("/-") {
            in_block_comment = !t.contains("-/");
            continue;
        }
        match t.strip_prefix("import ") {
            Some(rest) => out.extend(rest.split_whitespace().map(str::to_string)),
            None => break,
        }
    }
    out
}

/// True when the code ends, modulo trailing whitespace, with `by sorry`.
pub fn ends_with_by_sorry(code: &str) -> bool {
    let Some(rest) = code.trim_end().strip_suffix("sorry") else {
        return false;
    };
    if !rest.ends_with(char::is_whitespace) {
        return false;
    }
    let Some(before_by) = rest.trim_end().strip_suffix("by") else {
        return false;
    };
    before_by.chars().next_back().is_none_or(|c| !is_ident_char(c))
}

pub fn precheck(statement: &FormalStatement) -> PrecheckResult {
    precheck_with(statement, &BracketOptions::default())
}

pub fn precheck_with(statement: &FormalStatement, opts: &BracketOptions) -> PrecheckResult {
    let code = &statement.code;
    let mut failures = Vec::new();
    let mut diagnostics = Vec::new();

    let imported = imports_of(code);
    let missing: Vec<&String> = statement
        .required_imports
        .iter()
        .filter(|req| !imported.contains(req))
        .collect();
    if !missing.is_empty() {
        failures.push(PrecheckFailure::MissingRequiredImport);
        for m in missing {
            diagnostics.push(Diagnostic::error(
                (1, 0),
                (1, 0),
                format!("missing required import '{m}'"),
            ));
        }
    }

    if !ends_with_by_sorry(code) {
        failures.push(PrecheckFailure::MissingTerminalSorry);
        let last = code.trim_end().lines().count().max(1) as u32;
        diagnostics.push(Diagnostic::error(
            (last, 0),
            (last, 0),
            "statement must end with `by sorry`",
        ));
    }

    let issues = bracket_issues(code, opts);
    if !issues.is_empty() {
        failures.push(PrecheckFailure::UnmatchedBrackets);
        for issue in issues {
            let (line, col, msg) = match issue {
                BracketIssue::Unclosed { line, col, open } => (line, col, format!("unmatched '{open}'")),
                BracketIssue::Unexpected { line, col, close } => {
                    (line, col, format!("unmatched '{close}'"))
                }
            };
            diagnostics.push(Diagnostic::error((line, col), (line, col + 1), msg));
        }
    }

    PrecheckResult {
        pass: failures.is_empty(),
        failures,
        diagnostics,
    }
}
