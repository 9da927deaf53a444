//! The consistency-check tool: a priority-ordered panel of LLM judges whose
//! rulings are combined by unanimous vote.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backends::{
    with_retries, ChatClient, ChatMessage, ChatParams, RetryPolicy, Sleeper, ThreadSleeper,
};
use crate::metrics::RunCounters;
use crate::par::parallel_map;
use crate::prompts;
use crate::syntax::SyntaxReport;
use crate::types::{FormalStatement, MathQuery};

/// Delimiters around the statement inside the rendered judge prompt.
pub const LEAN4_CODE_BEGIN: &str = "— Start of Lean4Code —";
pub const LEAN4_CODE_END: &str = "— End of Lean4Code —";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConsistencyError {
    #[error("judge panel is empty")]
    EmptyPanel,
    #[error("consistency check requires a statement that passed the syntax check")]
    SyntaxNotPassed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ruling {
    Consistent,
    Inconsistent,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub judge_id: String,
    pub ruling: Ruling,
    pub explanation: String,
    pub raw: String,
    /// Transport failure that left the judge without an answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl JudgeVerdict {
    pub fn new(judge_id: impl Into<String>, ruling: Ruling, explanation: impl Into<String>) -> Self {
        let explanation = match ruling {
            Ruling::Unparseable => String::new(),
            _ => explanation.into(),
        };
        Self {
            judge_id: judge_id.into(),
            ruling,
            explanation,
            raw: String::new(),
            error: None,
        }
    }

    fn unavailable(judge_id: &str, error: String) -> Self {
        Self {
            judge_id: judge_id.to_string(),
            ruling: Ruling::Unparseable,
            explanation: String::new(),
            raw: String::new(),
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub pass: bool,
    pub explanations: String,
    pub per_judge: Vec<JudgeVerdict>,
}

impl ConsistencyReport {
    /// The `{"pass", "explanations"}` object the model sees.
    pub fn wire_payload(&self) -> serde_json::Value {
        serde_json::json!({ "pass": self.pass, "explanations": self.explanations })
    }
}

pub fn render_judge_prompt(query: &MathQuery, statement: &FormalStatement) -> String {
    prompts::render(
        prompts::CONSISTENCY_CHECK,
        &[
            ("mathematical_text", query.text.as_str()),
            ("lean4_code", statement.code.as_str()),
        ],
    )
}

/// Every top-level-parseable JSON object in `text`, in order of appearance.
pub(crate) fn json_objects(text: &str) -> Vec<serde_json::Map<String, serde_json::Value>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(offset) = text[pos..].find('{') {
        let start = pos + offset;
        let mut stream =
            serde_json::Deserializer::from_str(&text[start..]).into_iter::<serde_json::Value>();
        match stream.next() {
            Some(Ok(serde_json::Value::Object(map))) => {
                out.push(map);
                pos = start + stream.byte_offset();
            }
            _ => pos = start + 1,
        }
    }
    out
}

fn ruling_of(value: &serde_json::Value) -> Ruling {
    let word = match value {
        serde_json::Value::String(s) => s.as_str(),
        serde_json::Value::Array(items) if items.len() == 1 => match &items[0] {
            serde_json::Value::String(s) => s.as_str(),
            _ => return Ruling::Unparseable,
        },
        _ => return Ruling::Unparseable,
    };
    let word = word.trim().trim_matches(|c| c == '[' || c == ']').trim();
    if word.eq_ignore_ascii_case("correct") {
        Ruling::Consistent
    } else if word.eq_ignore_ascii_case("incorrect") {
        Ruling::Inconsistent
    } else {
        Ruling::Unparseable
    }
}

/// Reads the last JSON object carrying `is_assistant_correct`.
pub fn parse_judge_response(judge_id: &str, raw: &str) -> JudgeVerdict {
    let verdict_obj = json_objects(raw)
        .into_iter()
        .rfind(|o| o.contains_key("is_assistant_correct"));
    let (ruling, explanation) = match verdict_obj {
        Some(obj) => {
            let ruling = ruling_of(&obj["is_assistant_correct"]);
            let reasons = obj
                .get("reasons")
                .and_then(|r| r.as_str())
                .unwrap_or_default()
                .to_string();
            (ruling, reasons)
        }
        None => (Ruling::Unparseable, String::new()),
    };
    let mut verdict = JudgeVerdict::new(judge_id, ruling, explanation);
    verdict.raw = raw.to_string();
    verdict
}

/// Unanimous vote over priority-ordered verdicts. Unparseable counts as
/// inconsistent. The explanation comes from the highest-priority judge
/// ruling against consistency, or from the first judge when all agree.
pub fn ensemble_vote(verdicts: &[JudgeVerdict]) -> Result<ConsistencyReport, ConsistencyError> {
    let first = verdicts.first().ok_or(ConsistencyError::EmptyPanel)?;
    let dissent = verdicts.iter().find(|v| v.ruling != Ruling::Consistent);
    let (pass, speaker) = match dissent {
        Some(v) => (false, v),
        None => (true, first),
    };
    Ok(ConsistencyReport {
        pass,
        explanations: speaker.explanation.clone(),
        per_judge: verdicts.to_vec(),
    })
}

/// One panel seat.
#[derive(Clone)]
pub struct Judge {
    pub id: String,
    pub client: Arc<dyn ChatClient>,
    pub params: ChatParams,
    pub retry: RetryPolicy,
}

impl Judge {
    pub fn new(id: impl Into<String>, client: Arc<dyn ChatClient>) -> Self {
        Self {
            id: id.into(),
            client,
            params: ChatParams {
                temperature: 0.0,
                max_tokens: None,
                seed: None,
            },
            retry: RetryPolicy::new(1),
        }
    }

    pub fn with_params(mut self, params: ChatParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }
}

/// Priority-ordered judges queried concurrently and independently.
#[derive(Clone)]
pub struct JudgePanel {
    judges: Vec<Judge>,
    sleeper: Arc<dyn Sleeper>,
    counters: Arc<RunCounters>,
}

impl JudgePanel {
    pub fn new(judges: Vec<Judge>) -> Self {
        Self {
            judges,
            sleeper: Arc::new(ThreadSleeper),
            counters: Arc::new(RunCounters::default()),
        }
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn with_counters(mut self, counters: Arc<RunCounters>) -> Self {
        self.counters = counters;
        self
    }

    pub fn judges(&self) -> &[Judge] {
        &self.judges
    }

    fn ask(&self, judge: &Judge, prompt: &str) -> JudgeVerdict {
        let messages = [ChatMessage::user(prompt)];
        let reply = with_retries(judge.retry, self.sleeper.as_ref(), |_| {
            RunCounters::bump(&self.counters.judge_calls);
            judge.client.chat(&messages, &judge.params)
        });
        match reply {
            Ok(raw) => parse_judge_response(&judge.id, &raw),
            Err(e) => {
                tracing::warn!(judge = %judge.id, error = %e, "judge unavailable");
                JudgeVerdict::unavailable(&judge.id, e.to_string())
            }
        }
    }

    /// Renders one prompt, asks every judge, and votes.
    pub fn check(
        &self,
        query: &MathQuery,
        statement: &FormalStatement,
        syntax: &SyntaxReport,
    ) -> Result<ConsistencyReport, ConsistencyError> {
        if !syntax.pass {
            return Err(ConsistencyError::SyntaxNotPassed);
        }
        if self.judges.is_empty() {
            return Err(ConsistencyError::EmptyPanel);
        }
        let prompt = render_judge_prompt(query, statement);
        let verdicts = parallel_map(&self.judges, self.judges.len(), |_, judge| {
            self.ask(judge, &prompt)
        });
        ensemble_vote(&verdicts)
    }
}

pub fn run_consistency_check(
    query: &MathQuery,
    statement: &FormalStatement,
    syntax: &SyntaxReport,
    panel: &JudgePanel,
) -> Result<ConsistencyReport, ConsistencyError> {
    panel.check(query, statement, syntax)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::script::ScriptedChat;
    use crate::backends::{BackendError, RecordingSleeper};
    use crate::syntax::SyntaxStage;

    fn v(id: &str, ruling: Ruling, why: &str) -> JudgeVerdict {
        JudgeVerdict::new(id, ruling, why)
    }

    fn query() -> MathQuery {
        MathQuery::new("q1", "Show that 1 + 1 = 2.", "test").unwrap()
    }

    fn statement() -> FormalStatement {
        FormalStatement::new("import Mathlib\nimport Aesop\n\ntheorem t : 1 + 1 = 2 := by sorry").unwrap()
    }

    fn passed() -> SyntaxReport {
        SyntaxReport::from_diagnostics(vec![], SyntaxStage::Batch)
    }

    #[test]
    fn prompt_contains_payloads_and_stages() {
        let p = render_judge_prompt(&query(), &statement());
        assert!(p.contains("Show that 1 + 1 = 2."));
        assert!(p.contains("theorem t : 1 + 1 = 2 := by sorry"));
        for stage in [
            "1. Mathematical Text Analysis",
            "2. Lean4 Code Analysis",
            "3. Comparative Analysis",
            "4. Accuracy Confirmation",
        ] {
            assert!(p.contains(stage), "missing {stage}");
        }
        assert_eq!(p, render_judge_prompt(&query(), &statement()));
        let code_at = p.find(LEAN4_CODE_BEGIN).unwrap();
        assert!(p[code_at..].contains("theorem t"));
    }

    #[test]
    fn parses_schema() {
        let ok = parse_judge_response("a", r#"{"reasons":"fine","is_assistant_correct":"Correct"}"#);
        assert_eq!((ok.ruling, ok.explanation.as_str()), (Ruling::Consistent, "fine"));
        let bad = parse_judge_response("a", r#"{"reasons":"off by one","is_assistant_correct":"Incorrect"}"#);
        assert_eq!(bad.ruling, Ruling::Inconsistent);
        assert_eq!(bad.explanation, "off by one");
        let prose = parse_judge_response("a", "I think it is right.");
        assert_eq!(prose.ruling, Ruling::Unparseable);
        assert!(prose.explanation.is_empty());
    }

    #[test]
    fn takes_last_object_and_tolerates_variants() {
        let raw = "<think>{\"is_assistant_correct\":\"Correct\"}</think>\nFinal: {\"reasons\":\"x\",\"is_assistant_correct\":[\"incorrect\"]}";
        assert_eq!(parse_judge_response("a", raw).ruling, Ruling::Inconsistent);
        let odd = r#"{"reasons":"x","is_assistant_correct":"Maybe"}"#;
        let verdict = parse_judge_response("a", odd);
        assert_eq!(verdict.ruling, Ruling::Unparseable);
        assert!(verdict.explanation.is_empty());
        let nested = r#"{"meta": {"k": 1}, "reasons": "r", "is_assistant_correct": "CORRECT"}"#;
        assert_eq!(parse_judge_response("a", nested).ruling, Ruling::Consistent);
        let unquoted = r#"{"reasons": "r", "is_assistant_correct": Correct}"#;
        assert_eq!(parse_judge_response("a", unquoted).ruling, Ruling::Unparseable);
    }

    #[test]
    fn vote_rules() {
        let both = ensemble_vote(&[v("a", Ruling::Consistent, "A"), v("b", Ruling::Consistent, "B")]).unwrap();
        assert!(both.pass);
        assert_eq!(both.explanations, "A");

        let mixed = ensemble_vote(&[v("a", Ruling::Consistent, "A"), v("b", Ruling::Inconsistent, "B")]).unwrap();
        assert!(!mixed.pass);
        assert_eq!(mixed.explanations, "B");

        let neither = ensemble_vote(&[v("a", Ruling::Inconsistent, "A"), v("b", Ruling::Inconsistent, "B")]).unwrap();
        assert!(!neither.pass);
        assert_eq!(neither.explanations, "A");

        let garbled = ensemble_vote(&[v("a", Ruling::Unparseable, ""), v("b", Ruling::Consistent, "B")]).unwrap();
        assert!(!garbled.pass);

        assert_eq!(ensemble_vote(&[]), Err(ConsistencyError::EmptyPanel));
    }

    fn scripted(reply: &str) -> Arc<dyn ChatClient> {
        Arc::new(ScriptedChat::new().then(reply.to_string()))
    }

    const CORRECT: &str = r#"{"reasons":"ok","is_assistant_correct":"Correct"}"#;
    const INCORRECT: &str = r#"{"reasons":"wrong bound","is_assistant_correct":"Incorrect"}"#;

    #[test]
    fn panel_passes_on_unanimity() {
        let panel = JudgePanel::new(vec![Judge::new("a", scripted(CORRECT)), Judge::new("b", scripted(CORRECT))]);
        let r = run_consistency_check(&query(), &statement(), &passed(), &panel).unwrap();
        assert!(r.pass);
        assert_eq!(r.per_judge.len(), 2);
    }

    #[test]
    fn panel_reports_dissenting_reasons() {
        let panel = JudgePanel::new(vec![Judge::new("a", scripted(CORRECT)), Judge::new("b", scripted(INCORRECT))]);
        let r = panel.check(&query(), &statement(), &passed()).unwrap();
        assert!(!r.pass);
        assert_eq!(r.explanations, "wrong bound");
    }

    #[test]
    fn unavailable_judge_counts_against() {
        let flaky = Arc::new(
            ScriptedChat::new()
                .then_raise(BackendError::Timeout(30.0))
                .then_raise(BackendError::Timeout(30.0)),
        );
        let sleeper = Arc::new(RecordingSleeper::default());
        let panel = JudgePanel::new(vec![Judge::new("a", flaky.clone()), Judge::new("b", scripted(CORRECT))])
            .with_sleeper(sleeper.clone());
        let r = panel.check(&query(), &statement(), &passed()).unwrap();
        assert!(!r.pass);
        assert_eq!(r.per_judge[0].ruling, Ruling::Unparseable);
        assert!(r.per_judge[0].error.is_some());
        // one retry, then give up
        assert_eq!(flaky.requests().len(), 2);
        assert_eq!(sleeper.delays().len(), 1);
    }

    #[test]
    fn schema_failures_are_not_retried() {
        let chat = Arc::new(ScriptedChat::new().then("no json here".into()));
        let panel = JudgePanel::new(vec![Judge::new("a", chat.clone())]);
        let r = panel.check(&query(), &statement(), &passed()).unwrap();
        assert!(!r.pass);
        assert_eq!(chat.requests().len(), 1);
    }

    #[test]
    fn refuses_unchecked_statements() {
        let panel = JudgePanel::new(vec![Judge::new("a", scripted(CORRECT))]);
        let failed = SyntaxReport::from_diagnostics(
            vec![crate::types::Diagnostic::error((1, 0), (1, 1), "x")],
            SyntaxStage::Batch,
        );
        assert_eq!(
            panel.check(&query(), &statement(), &failed),
            Err(ConsistencyError::SyntaxNotPassed)
        );
        assert_eq!(
            JudgePanel::new(vec![]).check(&query(), &statement(), &passed()),
            Err(ConsistencyError::EmptyPanel)
        );
    }
}
