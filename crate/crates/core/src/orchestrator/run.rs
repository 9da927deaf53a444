use std::sync::Arc;

use super::machine::{step, LoopState, Phase, StepEffect, ToolError, ToolExecutor};
use super::parse::{parse_model_turn, TurnAction};
use crate::backends::embed::fnv1a;
use crate::backends::{
    with_retries, ChatClient, ChatMessage, ChatParams, RetryPolicy, Sleeper, ThreadSleeper,
};
use crate::consistency::{ConsistencyReport, JudgePanel};
use crate::metrics::RunCounters;
use crate::par::parallel_map;
use crate::prompts;
use crate::syntax::{SyntaxChecker, SyntaxReport};
use crate::types::{
    FormalStatement, MathQuery, RunConfig, Trajectory, TrajectoryStatus, TrajectoryStep,
};

/// Sent once when a turn carries neither a tool call nor a statement.
pub const REPROMPT: &str =
    "Your reply contained no tool call. Continue by calling syntax_check or consistency_check.";

/// Production tools: the batched compiler check and the judge panel.
pub struct CheckTools {
    pub syntax: SyntaxChecker,
    pub panel: JudgePanel,
}

impl ToolExecutor for CheckTools {
    fn syntax_check(&self, statement: &FormalStatement) -> Result<SyntaxReport, ToolError> {
        Ok(self.syntax.check_one(statement))
    }

    fn consistency_check(
        &self,
        query: &MathQuery,
        statement: &FormalStatement,
        syntax: &SyntaxReport,
    ) -> Result<ConsistencyReport, ToolError> {
        Ok(self.panel.check(query, statement, syntax)?)
    }
}

/// Per-sample seed derived from the run seed, query and sample index.
pub fn sample_seed(base_seed: u64, query_id: &str, sample_index: usize) -> u64 {
    fnv1a(format!("{base_seed}/{query_id}/{sample_index}").as_bytes())
}

/// Drives a chat model through the revision loop.
#[derive(Clone)]
pub struct Formalizer {
    model: Arc<dyn ChatClient>,
    tools: Arc<dyn ToolExecutor>,
    config: RunConfig,
    system_prompt: String,
    retry: RetryPolicy,
    sleeper: Arc<dyn Sleeper>,
    counters: Arc<RunCounters>,
    base_seed: u64,
    workers: usize,
}

impl Formalizer {
    pub fn new(model: Arc<dyn ChatClient>, tools: Arc<dyn ToolExecutor>, config: RunConfig) -> Self {
        Self {
            model,
            tools,
            config,
            system_prompt: prompts::SYSTEM_INFERENCE.to_string(),
            retry: RetryPolicy::new(1),
            sleeper: Arc::new(ThreadSleeper),
            counters: Arc::new(RunCounters::default()),
            base_seed: 0,
            workers: 1,
        }
    }

    pub fn with_system_prompt(mut self, prompt: impl Into<String>) -> Self {
        self.system_prompt = prompt.into();
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy, sleeper: Arc<dyn Sleeper>) -> Self {
        self.retry = retry;
        self.sleeper = sleeper;
        self
    }

    pub fn with_counters(mut self, counters: Arc<RunCounters>) -> Self {
        self.counters = counters;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    fn ask(&self, messages: &[ChatMessage], params: &ChatParams) -> Option<String> {
        match with_retries(self.retry, self.sleeper.as_ref(), |_| self.model.chat(messages, params)) {
            Ok(text) => Some(text),
            Err(e) => {
                tracing::warn!(error = %e, "model unavailable");
                None
            }
        }
    }

    /// One formalization session for one sample of `query`.
    pub fn run_one(&self, query: &MathQuery, sample_index: usize) -> Trajectory {
        let params = ChatParams {
            temperature: self.config.temperature,
            max_tokens: None,
            seed: Some(sample_seed(self.base_seed, &query.id, sample_index)),
        };
        let mut messages = vec![
            ChatMessage::system(self.system_prompt.clone()),
            ChatMessage::user(query.text.clone()),
        ];
        let mut state = LoopState::new(self.config.revision_budget());
        let mut steps = Vec::new();
        let mut statements: Vec<FormalStatement> = Vec::new();

        while !state.phase.is_terminal() {
            let Some(raw) = self.ask(&messages, &params) else {
                state.phase = Phase::DoneFailed;
                state.status = Some(TrajectoryStatus::Aborted);
                break;
            };
            messages.push(ChatMessage::assistant(raw.clone()));
            let turn = match parse_model_turn(&raw) {
                Ok(turn) => turn,
                Err(e) => {
                    steps.push(TrajectoryStep::model_turn(raw, None, None));
                    state.phase = Phase::DoneFailed;
                    state.status = Some(TrajectoryStatus::FailedRule);
                    state.violation = Some(e.to_string());
                    break;
                }
            };
            let (next, effect) = step(&state, &turn, query, self.tools.as_ref())
                .expect("loop only steps non-terminal states");
            let StepEffect {
                new_version,
                statement_version,
                invocation,
                result,
                reprompt,
            } = effect;
            if let Some(st) = new_version {
                statements.push(st);
            }
            steps.push(TrajectoryStep::model_turn(raw, invocation, statement_version));
            if let Some(result) = result {
                messages.push(ChatMessage::user(result.raw.clone()));
                steps.push(TrajectoryStep::tool_result(result));
            }
            if reprompt {
                messages.push(ChatMessage::user(REPROMPT));
            }
            state = next;
        }

        if state.phase == Phase::DoneSuccess {
            if let Some(raw) = self.ask(&messages, &params) {
                let verified = statements.last().expect("success implies a version");
                let version = statements.len() - 1;
                let declared = parse_model_turn(&raw).ok().and_then(|t| match t.action {
                    TurnAction::FinalStatement(st) => Some(st),
                    _ => t.statement,
                });
                let drifted = declared.as_ref().is_some_and(|st| !verified.same_code(&st.code));
                steps.push(TrajectoryStep::model_turn(raw, None, (!drifted).then_some(version)));
                if drifted {
                    state.status = Some(TrajectoryStatus::FailedRule);
                    state.violation = Some("final statement differs from the verified version".into());
                }
            }
        }

        let status = state.status.unwrap_or(TrajectoryStatus::Aborted);
        if status == TrajectoryStatus::FailedRule {
            RunCounters::bump(&self.counters.rule_violations);
            tracing::info!(
                query = %query.id,
                sample = sample_index,
                reason = state.violation.as_deref().unwrap_or(""),
                "rule violation"
            );
        }
        Trajectory {
            query: query.clone(),
            sample_index,
            revision_count: statements.len().saturating_sub(1),
            steps,
            statements,
            status,
        }
    }

    /// `samples_per_query` independent sessions per query, ordered by query
    /// then sample index regardless of scheduling.
    pub fn run_many(&self, queries: &[MathQuery]) -> Vec<Trajectory> {
        let jobs: Vec<(usize, usize)> = (0..queries.len())
            .flat_map(|q| (0..self.config.samples_per_query).map(move |s| (q, s)))
            .collect();
        parallel_map(&jobs, self.workers, |_, &(q, s)| self.run_one(&queries[q], s))
    }
}

/// One session with default options.
pub fn formalize(
    query: &MathQuery,
    model: Arc<dyn ChatClient>,
    tools: Arc<dyn ToolExecutor>,
    config: &RunConfig,
) -> Trajectory {
    Formalizer::new(model, tools, config.clone()).run_one(query, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::script::ScriptedChat;
    use crate::backends::simulated::{SimulatedFormalizer, SimulatedJudge, SimulatedLean};
    use crate::backends::{BackendError, RecordingSleeper};
    use crate::consistency::Judge;
    use crate::orchestrator::{validate_trajectory, ToolExecutor};
    use crate::types::StepKind;

    const GOOD: &str = "import Mathlib\nimport Aesop\n\ntheorem t (x : ℕ) : x + 0 = x := by sorry";
    const BROKEN: &str = "import Mathlib\nimport Aesop\n\ntheorem t : ∀ a b ∈ S, a = b := by sorry";

    fn query() -> MathQuery {
        MathQuery::new("q1", "Show that x + 0 = x.", "test").unwrap()
    }

    fn tools() -> Arc<dyn ToolExecutor> {
        let config = RunConfig::default();
        let syntax = SyntaxChecker::new(Arc::new(SimulatedLean::new()), &config).with_nonce("t");
        let panel = JudgePanel::new(vec![
            Judge::new("a", Arc::new(SimulatedJudge::new("a", 10_000))),
            Judge::new("b", Arc::new(SimulatedJudge::new("b", 10_000))),
        ]);
        Arc::new(CheckTools { syntax, panel })
    }

    fn call(tool: &str, code: &str) -> String {
        let payload = serde_json::json!({"name": tool, "arguments": {"lean4_code": code}});
        format!("<tool_call>\n{payload}\n</tool_call>")
    }

    fn turn(tool: &str, code: &str) -> String {
        format!("Draft.\n```lean4\n{code}\n```\n{}", call(tool, code))
    }

    /// Replies with the same text forever.
    struct Repeat(String);

    impl ChatClient for Repeat {
        fn chat(&self, _: &[ChatMessage], _: &ChatParams) -> Result<String, crate::backends::BackendError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn scripted_success_records_everything() {
        let chat = Arc::new(
            ScriptedChat::new()
                .then(turn("syntax_check", GOOD))
                .then(call("consistency_check", GOOD))
                .then(format!("**Final Statement**\n```lean4\n{GOOD}\n```")),
        );
        let t = formalize(&query(), chat.clone(), tools(), &RunConfig::default());
        assert_eq!(t.status, TrajectoryStatus::Success);
        assert_eq!(t.revision_count, 0);
        let kinds: Vec<StepKind> = t.steps.iter().map(|s| s.kind).collect();
        use StepKind::*;
        assert_eq!(kinds, vec![ModelTurn, ToolResult, ModelTurn, ToolResult, ModelTurn]);
        assert!(validate_trajectory(&t).is_compliant());
        let requests = chat.requests();
        assert_eq!(requests[0][0].content, prompts::SYSTEM_INFERENCE);
        assert_eq!(requests[0][1].content, query().text);
        assert!(requests[1].last().unwrap().content.starts_with("<tool_result>\nFunction: syntax_check"));
    }

    #[test]
    fn same_broken_statement_exhausts_budget() {
        let config = RunConfig { max_revisions: 4, ..RunConfig::default() };
        let t = formalize(&query(), Arc::new(Repeat(turn("syntax_check", BROKEN))), tools(), &config);
        assert_eq!(t.status, TrajectoryStatus::FailedBudget);
        assert_eq!(t.revision_count, config.revision_budget());
        assert_eq!(t.tool_results().count(), config.revision_budget() + 1);
        assert!(t.tool_results().all(|r| !r.passed()));
        assert!(validate_trajectory(&t).is_compliant());
    }

    #[test]
    fn consistency_first_fails_the_rules() {
        let t = formalize(&query(), Arc::new(Repeat(turn("consistency_check", GOOD))), tools(), &RunConfig::default());
        assert_eq!(t.status, TrajectoryStatus::FailedRule);
        assert_eq!(t.tool_results().count(), 0);
        assert!(validate_trajectory(&t).is_compliant());
    }

    #[test]
    fn silent_model_is_reprompted_once() {
        let chat = Arc::new(ScriptedChat::new().then("hmm".into()).then("still thinking".into()));
        let t = formalize(&query(), chat.clone(), tools(), &RunConfig::default());
        assert_eq!(t.status, TrajectoryStatus::FailedRule);
        assert_eq!(chat.requests()[1].last().unwrap().content, REPROMPT);
        assert_eq!(chat.requests().len(), 2);
    }

    #[test]
    fn early_final_statement_fails_the_rules() {
        let chat = Arc::new(ScriptedChat::new().then(format!("```lean4\n{GOOD}\n```")));
        let t = formalize(&query(), chat, tools(), &RunConfig::default());
        assert_eq!(t.status, TrajectoryStatus::FailedRule);
    }

    #[test]
    fn drifting_final_statement_fails_the_rules() {
        let chat = Arc::new(
            ScriptedChat::new()
                .then(turn("syntax_check", GOOD))
                .then(call("consistency_check", GOOD))
                .then(format!("**Final Statement**\n```lean4\n{BROKEN}\n```")),
        );
        let t = formalize(&query(), chat, tools(), &RunConfig::default());
        assert_eq!(t.status, TrajectoryStatus::FailedRule);
        assert!(validate_trajectory(&t).is_compliant());
    }

    #[test]
    fn unavailable_model_aborts_after_retries() {
        let chat = Arc::new(
            ScriptedChat::new()
                .then_raise(BackendError::Transport("down".into()))
                .then_raise(BackendError::Transport("down".into()))
                .then_raise(BackendError::Transport("down".into())),
        );
        let sleeper = Arc::new(RecordingSleeper::default());
        let t = Formalizer::new(chat.clone(), tools(), RunConfig::default())
            .with_retry(RetryPolicy::new(2), sleeper.clone())
            .run_one(&query(), 0);
        assert_eq!(t.status, TrajectoryStatus::Aborted);
        assert_eq!(chat.requests().len(), 3);
        assert_eq!(sleeper.delays().len(), 2);
        assert!(t.steps.is_empty());
    }

    #[test]
    fn malformed_call_fails_the_rules() {
        let chat = Arc::new(ScriptedChat::new().then("<tool_call>oops</tool_call>".into()));
        let t = formalize(&query(), chat, tools(), &RunConfig::default());
        assert_eq!(t.status, TrajectoryStatus::FailedRule);
        assert!(validate_trajectory(&t).is_compliant());
    }

    #[test]
    fn sampling_is_independent_of_scheduling() {
        let queries: Vec<MathQuery> = (0..4)
            .map(|i| MathQuery::new(format!("q{i}"), format!("Problem number {i}."), "t").unwrap())
            .collect();
        let config = RunConfig { samples_per_query: 3, ..RunConfig::default() };
        let model: Arc<dyn ChatClient> = Arc::new(SimulatedFormalizer::default());
        let serial = Formalizer::new(model.clone(), tools(), config.clone()).run_many(&queries);
        let parallel = Formalizer::new(model, tools(), config)
            .with_workers(5)
            .run_many(&queries);
        assert_eq!(serial, parallel);
        assert_eq!(serial.len(), 12);
        assert!(serial.iter().all(|t| validate_trajectory(t).is_compliant()));
        let ids: Vec<(String, usize)> = serial.iter().map(|t| (t.query.id.clone(), t.sample_index)).collect();
        assert_eq!(ids[0], ("q0".to_string(), 0));
        assert_eq!(ids[11], ("q3".to_string(), 2));
    }
}
