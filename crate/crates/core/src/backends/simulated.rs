//! Deterministic stand-ins for the compiler, the formalizer model and the
//! judges. They drive the end-to-end pipeline offline and double as
//! fixtures: the compiler reproduces the binder error from the worked
//! transcript at its exact span.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embed::fnv1a;
use super::{BackendError, ChatClient, ChatMessage, ChatParams, LeanClient, Role};
use crate::consistency::{LEAN4_CODE_BEGIN, LEAN4_CODE_END};
use crate::syntax::precheck::{bracket_issues, BracketIssue, BracketOptions};
use crate::types::{Diagnostic, Severity};

/// Token the simulated compiler rejects wherever it appears.
pub const ILLEGAL_TOKEN: char = '⁇';

/// Rule-based compiler emulator.
///
/// Diagnoses: misplaced or unknown imports, multi-name `∀ a b ∈` binders,
/// the [`ILLEGAL_TOKEN`], bracket imbalance outside comments and strings,
/// and warns on each `sorry`. Fault markers and a member cap inject
/// timeouts/transport failures for fallback testing.
pub struct SimulatedLean {
    known_modules: Vec<String>,
    faults: Vec<(String, BackendError)>,
    max_members: Option<usize>,
    calls: AtomicUsize,
    files: Mutex<Vec<String>>,
}

impl Default for SimulatedLean {
    fn default() -> Self {
        Self {
            known_modules: vec!["Mathlib".into(), "Aesop".into(), "Init".into(), "Std".into()],
            faults: Vec::new(),
            max_members: None,
            calls: AtomicUsize::new(0),
            files: Mutex::new(Vec::new()),
        }
    }
}

impl SimulatedLean {
    pub fn new() -> Self {
        Self::default()
    }

    /// Any file containing `marker` fails with `fault`.
    pub fn with_fault(mut self, marker: impl Into<String>, fault: BackendError) -> Self {
        self.faults.push((marker.into(), fault));
        self
    }

    /// Files carrying more than `n` namespace blocks time out.
    pub fn with_member_cap(mut self, n: usize) -> Self {
        self.max_members = Some(n);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn files(&self) -> Vec<String> {
        self.files.lock().unwrap().clone()
    }

    fn module_known(&self, module: &str) -> bool {
        self.known_modules
            .iter()
            .any(|k| module == k || module.starts_with(&format!("{k}.")))
    }

    pub fn compile(&self, code: &str) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let mut in_header = true;
        for (idx, line) in code.lines().enumerate() {
            let lineno = idx as u32 + 1;
            let trimmed = line.trim_start();
            let indent = (line.chars().count() - trimmed.chars().count()) as u32;
            let width = line.chars().count() as u32;
            if let Some(rest) = trimmed.strip_prefix("import ") {
                if !in_header {
                    diags.push(Diagnostic::error(
                        (lineno, indent),
                        (lineno, width),
                        "invalid 'import' command, it must be used in the beginning of the file",
                    ));
                    continue;
                }
                for module in rest.split_whitespace() {
                    if !self.module_known(module) {
                        diags.push(Diagnostic::error(
                            (lineno, indent),
                            (lineno, width),
                            format!("unknown module prefix '{module}'"),
                        ));
                    }
                }
                continue;
            }
            if !trimmed.is_empty() && !trimmed.starts_with("--") {
                in_header = false;
            }
            diags.extend(binder_errors(line, lineno));
            for (col, ch) in line.chars().enumerate() {
                if ch == ILLEGAL_TOKEN {
                    diags.push(Diagnostic::error(
                        (lineno, col as u32),
                        (lineno, col as u32 + 1),
                        format!("unexpected token '{ILLEGAL_TOKEN}'; expected term"),
                    ));
                }
            }
            for col in find_word(line, "sorry") {
                diags.push(
                    Diagnostic::new(
                        Severity::Warning,
                        (lineno, col),
                        (lineno, col + 5),
                        "declaration uses 'sorry'",
                    )
                    .expect("valid span"),
                );
            }
        }
        for issue in bracket_issues(code, &BracketOptions::default()) {
            let (line, col, msg) = match issue {
                BracketIssue::Unclosed { line, col, open } => {
                    (line, col, format!("unterminated '{open}'"))
                }
                BracketIssue::Unexpected { line, col, close } => {
                    (line, col, format!("unexpected token '{close}'; expected term"))
                }
            };
            diags.push(Diagnostic::error((line, col), (line, col + 1), msg));
        }
        diags.sort_by_key(|d| (d.start_line, d.start_col, d.severity));
        first_error_per_command(code, diags)
    }
}

/// The parser abandons a command at its first error, so later errors in the
/// same command are not reported. Commands start at unindented lines.
fn first_error_per_command(code: &str, diags: Vec<Diagnostic>) -> Vec<Diagnostic> {
    let starts: Vec<u32> = code
        .lines()
        .enumerate()
        .filter(|(_, l)| l.starts_with(|c: char| !c.is_whitespace()) && !l.starts_with("--"))
        .map(|(i, _)| i as u32 + 1)
        .collect();
    let command_of = |line: u32| starts.partition_point(|&s| s <= line);
    let mut seen = std::collections::HashSet::new();
    diags
        .into_iter()
        .filter(|d| !d.is_error() || seen.insert(command_of(d.start_line)))
        .collect()
}

/// Char columns where `word` occurs as a whole identifier.
fn find_word(line: &str, word: &str) -> Vec<u32> {
    let chars: Vec<char> = line.chars().collect();
    let target: Vec<char> = word.chars().collect();
    let ident = |c: char| c.is_alphanumeric() || c == '_' || c == '\'' || c == '.';
    let mut out = Vec::new();
    let mut i = 0;
    while i + target.len() <= chars.len() {
        if chars[i..i + target.len()] == target[..]
            && (i == 0 || !ident(chars[i - 1]))
            && chars.get(i + target.len()).is_none_or(|c| !ident(*c))
        {
            out.push(i as u32);
            i += target.len();
        } else {
            i += 1;
        }
    }
    out
}

/// `∀ a b ∈ S`: the parser expects `,` after the second binder name, and
/// the reported span runs from the end of that name through the `∈`.
fn binder_errors(line: &str, lineno: u32) -> Vec<Diagnostic> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    for (start, &c) in chars.iter().enumerate() {
        if c != '∀' {
            continue;
        }
        let mut i = start + 1;
        let mut names = 0;
        let mut last_name_end = i;
        loop {
            let ws_start = i;
            while i < chars.len() && chars[i] == ' ' {
                i += 1;
            }
            if i == ws_start || i >= chars.len() {
                break;
            }
            if chars[i] == '∈' {
                if names >= 2 {
                    out.push(Diagnostic::error(
                        (lineno, last_name_end as u32),
                        (lineno, i as u32 + 1),
                        "unexpected token '∈'; expected ','",
                    ));
                }
                break;
            }
            let name_start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            if i == name_start {
                break;
            }
            names += 1;
            last_name_end = i;
        }
    }
    out
}

impl LeanClient for SimulatedLean {
    fn execute(&self, code: &str, timeout_s: f64) -> Result<Vec<Diagnostic>, BackendError> {
        if timeout_s.is_nan() || timeout_s <= 0.0 {
            return Err(BackendError::Precondition("timeout must be positive".into()));
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.files.lock().unwrap().push(code.to_string());
        if let Some((_, fault)) = self.faults.iter().find(|(m, _)| code.contains(m.as_str())) {
            return Err(fault.clone());
        }
        if let Some(cap) = self.max_members {
            let members = code
                .lines()
                .filter(|l| l.starts_with("namespace AF_batch_"))
                .count();
            if members > cap {
                return Err(BackendError::Timeout(timeout_s));
            }
        }
        Ok(self.compile(code))
    }
}

/// Hash-deterministic judge speaking the consistency prompt's JSON schema.
///
/// Accepts a statement when `fnv1a(id, code) % 10_000 < accept_bp`;
/// statements containing any reject marker are always ruled incorrect.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulatedJudge {
    pub id: String,
    /// Acceptance probability in basis points.
    pub accept_bp: u32,
    #[serde(default)]
    pub reject_markers: Vec<String>,
}

impl SimulatedJudge {
    pub fn new(id: impl Into<String>, accept_bp: u32) -> Self {
        Self {
            id: id.into(),
            accept_bp,
            reject_markers: Vec::new(),
        }
    }

    pub fn rules_correct(&self, code: &str) -> bool {
        if self.reject_markers.iter().any(|m| code.contains(m.as_str())) {
            return false;
        }
        let key = format!("{}\u{0}{}", self.id, code.trim());
        (fnv1a(key.as_bytes()) % 10_000) < u64::from(self.accept_bp)
    }
}

fn between<'a>(text: &'a str, begin: &str, end: &str) -> Option<&'a str> {
    let start = text.find(begin)? + begin.len();
    let stop = text[start..].find(end)? + start;
    Some(text[start..stop].trim())
}

impl ChatClient for SimulatedJudge {
    fn chat(&self, messages: &[ChatMessage], _params: &ChatParams) -> Result<String, BackendError> {
        let prompt = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .ok_or_else(|| BackendError::Precondition("no user message".into()))?;
        let code = between(&prompt.content, LEAN4_CODE_BEGIN, LEAN4_CODE_END)
            .ok_or_else(|| BackendError::Precondition("prompt carries no Lean4Code".into()))?;
        let (verdict, reasons) = if self.rules_correct(code) {
            ("Correct", "4. Accuracy Confirmation: all elements match.")
        } else {
            ("Incorrect", "4. Accuracy Confirmation: the hypotheses do not match the problem.")
        };
        let body = serde_json::json!({
            "reasons": format!("[{}] {}", self.id, reasons),
            "is_assistant_correct": verdict,
        });
        Ok(format!("<think>\ncomparing statement\n</think>\n{body}"))
    }
}

/// Protocol-following formalizer.
///
/// Each reply is a pure function of the conversation and `ChatParams::seed`,
/// so one instance serves any number of concurrent samples. Version `k` of
/// a statement carries the transcript's binder bug with probability
/// `syntax_bug_bp`; with probability `violation_bp` the very first turn
/// calls `consistency_check` before any syntax check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulatedFormalizer {
    pub seed: u64,
    pub syntax_bug_bp: u32,
    pub violation_bp: u32,
}

impl Default for SimulatedFormalizer {
    fn default() -> Self {
        Self {
            seed: 0,
            syntax_bug_bp: 4_000,
            violation_bp: 300,
        }
    }
}

/// What the last tool result said, as seen by the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Feedback {
    None,
    SyntaxFail,
    SyntaxPass,
    ConsistencyFail,
    ConsistencyPass,
    Other,
}

fn read_feedback(text: &str) -> Feedback {
    let passed = text.contains("\"pass\": true");
    if text.contains("Function: syntax_check") {
        if passed {
            Feedback::SyntaxPass
        } else {
            Feedback::SyntaxFail
        }
    } else if text.contains("Function: consistency_check") {
        if passed {
            Feedback::ConsistencyPass
        } else {
            Feedback::ConsistencyFail
        }
    } else {
        Feedback::Other
    }
}

impl SimulatedFormalizer {
    fn rng(&self, conversation_seed: u64, version: usize, salt: &str) -> ChaCha8Rng {
        let key = format!("{}/{conversation_seed}/{version}/{salt}", self.seed);
        ChaCha8Rng::seed_from_u64(fnv1a(key.as_bytes()))
    }

    pub fn statement(&self, query: &str, conversation_seed: u64, version: usize) -> String {
        let mut rng = self.rng(conversation_seed, version, "stmt");
        let buggy = rng.gen_range(0..10_000) < self.syntax_bug_bp;
        let bound = fnv1a(query.as_bytes()) % 97 + 1;
        let binder = if buggy {
            "∀ a b ∈ Finset.range n, a ≤ b + n"
        } else {
            "∀ a ∈ Finset.range n, ∀ b ∈ Finset.range n, a ≤ b + n"
        };
        format!(
            "import Mathlib\nimport Aesop\n\ntheorem my_favorite_theorem (n : ℕ) (h₀ : {bound} < n)\n    (h₁ : {binder}) :\n    ∃ m : ℕ, m + {version} = n + {version} := by sorry"
        )
    }

    fn code_block(code: &str) -> String {
        format!("```lean4\n{code}\n```")
    }

    fn call(tool: &str, code: &str) -> String {
        let payload = serde_json::json!({"name": tool, "arguments": {"lean4_code": code}});
        format!("<tool_call>\n{payload}\n</tool_call>")
    }
}

impl ChatClient for SimulatedFormalizer {
    fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, BackendError> {
        if messages.is_empty() {
            return Err(BackendError::Precondition("empty message list".into()));
        }
        let query = messages
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .ok_or_else(|| BackendError::Precondition("no query message".into()))?;
        let seed = params.seed.unwrap_or(0);
        let versions = messages
            .iter()
            .filter(|m| m.role == Role::Assistant && m.content.contains("```lean4"))
            .count();
        let feedback = match messages.last() {
            Some(m) if m.role == Role::User && versions > 0 => read_feedback(&m.content),
            _ => Feedback::None,
        };
        let fresh = |version: usize| self.statement(query, seed, version);
        let reply = match feedback {
            Feedback::None => {
                let code = fresh(0);
                let mut rng = self.rng(seed, 0, "rule");
                let tool = if rng.gen_range(0..10_000) < self.violation_bp {
                    "consistency_check"
                } else {
                    "syntax_check"
                };
                format!(
                    "Let me write the initial statement.\n\n{}\n\n{}",
                    Self::code_block(&code),
                    Self::call(tool, &code)
                )
            }
            Feedback::SyntaxFail | Feedback::ConsistencyFail => {
                let code = fresh(versions);
                format!(
                    "The check failed. Revising the statement.\n\n{}\n\n{}",
                    Self::code_block(&code),
                    Self::call("syntax_check", &code)
                )
            }
            Feedback::SyntaxPass => {
                let code = fresh(versions - 1);
                format!(
                    "Syntax passes; checking consistency.\n\n{}",
                    Self::call("consistency_check", &code)
                )
            }
            Feedback::ConsistencyPass => {
                let code = fresh(versions - 1);
                format!("**Final Statement**\n{}", Self::code_block(&code))
            }
            Feedback::Other => {
                let code = fresh(versions - 1);
                format!("Continuing.\n\n{}", Self::call("syntax_check", &code))
            }
        };
        Ok(reply)
    }
}
