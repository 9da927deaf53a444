//! Wire format between the model and the tools.

use serde::{Deserialize, Serialize};

use crate::types::{FormalStatement, ToolInvocation, ToolName, ToolResult};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed tool call: {0}")]
    MalformedToolCall(String),
    #[error("unknown tool '{0}'")]
    UnknownTool(String),
}

/// What a model turn asks the loop to do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum TurnAction {
    Invoke(ToolInvocation),
    FinalStatement(FormalStatement),
    NewStatement(FormalStatement),
    NoAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTurn {
    pub reasoning: String,
    /// Code block written before the action, if any.
    pub statement: Option<FormalStatement>,
    pub action: TurnAction,
}

impl ModelTurn {
    pub fn invoke(tool: ToolName, code: &str, with_block: bool) -> Self {
        let arguments = serde_json::json!({ "lean4_code": code });
        let statement = with_block.then(|| FormalStatement::new(code)).and_then(Result::ok);
        Self {
            reasoning: String::new(),
            statement,
            action: TurnAction::Invoke(ToolInvocation {
                tool,
                raw: serde_json::json!({"name": tool.as_str(), "arguments": arguments}).to_string(),
                arguments,
            }),
        }
    }

    pub fn with_action(action: TurnAction) -> Self {
        Self {
            reasoning: String::new(),
            statement: None,
            action,
        }
    }
}

const OPEN_TAGS: [&str; 2] = ["<tool_calls>", "<tool_call>"];

/// Byte span `[start, end)` of the last tool-call block, tags included.
pub fn tool_call_span(text: &str) -> Result<Option<(usize, usize)>, ParseError> {
    let open = OPEN_TAGS
        .iter()
        .filter_map(|tag| text.rfind(tag).map(|at| (at, *tag)))
        .max_by_key(|(at, tag)| (*at, tag.len()));
    let Some((start, tag)) = open else {
        return Ok(None);
    };
    let close = format!("</{}", &tag[1..]);
    let body_start = start + tag.len();
    match text[body_start..].find(&close) {
        Some(rel) => Ok(Some((start, body_start + rel + close.len()))),
        None => Err(ParseError::MalformedToolCall(format!("missing {close}"))),
    }
}

fn parse_invocation(block: &str) -> Result<ToolInvocation, ParseError> {
    let inner = block
        .trim_start_matches("<tool_calls>")
        .trim_start_matches("<tool_call>")
        .trim_end_matches("</tool_calls>")
        .trim_end_matches("</tool_call>")
        .trim();
    let value: serde_json::Value = serde_json::from_str(inner)
        .map_err(|e| ParseError::MalformedToolCall(e.to_string()))?;
    let name = value
        .get("name")
        .and_then(|n| n.as_str())
        .ok_or_else(|| ParseError::MalformedToolCall("missing string field 'name'".into()))?;
    let arguments = value
        .get("arguments")
        .filter(|a| a.is_object())
        .cloned()
        .ok_or_else(|| ParseError::MalformedToolCall("missing object field 'arguments'".into()))?;
    let tool = ToolName::parse(name).ok_or_else(|| ParseError::UnknownTool(name.to_string()))?;
    Ok(ToolInvocation {
        tool,
        arguments,
        raw: inner.to_string(),
    })
}

/// Contents of the last ```lean / ```lean4 / bare fenced block in `text`.
pub fn last_code_block(text: &str) -> Option<String> {
    let mut found = None;
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        let t = line.trim();
        let Some(lang) = t.strip_prefix("```") else {
            continue;
        };
        let lang = lang.trim();
        let wanted = matches!(lang, "" | "lean" | "lean4");
        let mut body = Vec::new();
        let mut closed = false;
        for inner in lines.by_ref() {
            if inner.trim() == "```" {
                closed = true;
                break;
            }
            body.push(inner);
        }
        if wanted && closed && !body.is_empty() {
            found = Some(body.join("\n"));
        }
    }
    found
}

pub fn parse_model_turn(raw: &str) -> Result<ModelTurn, ParseError> {
    let span = tool_call_span(raw)?;
    let before_call = span.map_or(raw, |(start, _)| &raw[..start]);
    let statement = last_code_block(before_call).and_then(|c| FormalStatement::new(c).ok());
    let reasoning = before_call.trim().to_string();
    let action = match (span, &statement) {
        (Some((start, end)), _) => TurnAction::Invoke(parse_invocation(&raw[start..end])?),
        (None, Some(st)) => TurnAction::FinalStatement(st.clone()),
        (None, None) => TurnAction::NoAction,
    };
    let statement = match action {
        TurnAction::FinalStatement(_) => None,
        _ => statement,
    };
    Ok(ModelTurn {
        reasoning,
        statement,
        action,
    })
}

/// Pretty-printed structured text for a tool's payload.
pub fn render_payload(payload: &crate::types::ToolPayload) -> String {
    let value = match payload {
        crate::types::ToolPayload::Syntax(r) => r.wire_payload(),
        crate::types::ToolPayload::Consistency(r) => r.wire_payload(),
    };
    serde_json::to_string_pretty(&value).expect("payload serializes")
}

pub fn render_tool_result(result: &ToolResult) -> String {
    format!(
        "<tool_result>\nFunction: {}\nOutput: {}\n</tool_result>",
        result.tool,
        render_payload(&result.payload)
    )
}

pub fn render_tool_call(invocation: &ToolInvocation) -> String {
    let payload = serde_json::json!({
        "name": invocation.tool.as_str(),
        "arguments": invocation.arguments,
    });
    format!(
        "<tool_call>\n{}\n</tool_call>",
        serde_json::to_string_pretty(&payload).expect("payload serializes")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::ConsistencyReport;
    use crate::syntax::{SyntaxReport, SyntaxStage};
    use crate::types::{Diagnostic, ToolPayload};

    const CODE: &str = "import Mathlib\nimport Aesop\n\ntheorem t : True := by sorry";

    fn call(name: &str) -> String {
        format!(
            "<tool_call>{}</tool_call>",
            serde_json::json!({"name": name, "arguments": {"lean4_code": CODE}})
        )
    }

    #[test]
    fn invoke_with_preceding_block() {
        let raw = format!("Draft:\n```lean4\n{CODE}\n```\n{}", call("syntax_check"));
        let turn = parse_model_turn(&raw).unwrap();
        let TurnAction::Invoke(inv) = &turn.action else { panic!("{turn:?}") };
        assert_eq!(inv.tool, ToolName::SyntaxCheck);
        assert_eq!(inv.lean4_code(), Some(CODE));
        assert_eq!(turn.statement.unwrap().code, CODE);
    }

    #[test]
    fn plural_tag_and_last_call_win() {
        let raw = format!(
            "{}\n<tool_calls>\n{{\"name\": \"consistency_check\", \"arguments\": {{\"lean4_code\": \"x\"}}\n}}\n</tool_calls>",
            call("syntax_check")
        );
        let TurnAction::Invoke(inv) = parse_model_turn(&raw).unwrap().action else { panic!() };
        assert_eq!(inv.tool, ToolName::ConsistencyCheck);
    }

    #[test]
    fn code_without_call_is_final() {
        let raw = format!("**Final Statement**\n```lean\n{CODE}\n```");
        let turn = parse_model_turn(&raw).unwrap();
        assert_eq!(turn.action, TurnAction::FinalStatement(FormalStatement::new(CODE).unwrap()));
        assert_eq!(parse_model_turn("just thinking").unwrap().action, TurnAction::NoAction);
    }

    #[test]
    fn other_languages_are_not_statements() {
        let raw = "```python\nprint(1)\n```";
        assert_eq!(parse_model_turn(raw).unwrap().action, TurnAction::NoAction);
        assert_eq!(last_code_block("```\nbare\n```"), Some("bare".into()));
    }

    #[test]
    fn malformed_and_unknown() {
        assert!(matches!(
            parse_model_turn("<tool_call>not json</tool_call>"),
            Err(ParseError::MalformedToolCall(_))
        ));
        assert!(matches!(
            parse_model_turn("<tool_call>{\"name\": \"syntax_check\"}</tool_call>"),
            Err(ParseError::MalformedToolCall(_))
        ));
        assert!(matches!(
            parse_model_turn("<tool_call>{\"name\": \"syntax_check\""),
            Err(ParseError::MalformedToolCall(_))
        ));
        assert_eq!(
            parse_model_turn(&call("prove_it")),
            Err(ParseError::UnknownTool("prove_it".into()))
        );
    }

    #[test]
    fn span_covers_tags() {
        let raw = format!("abc{}", call("syntax_check"));
        let (s, e) = tool_call_span(&raw).unwrap().unwrap();
        assert_eq!(s, 3);
        assert!(raw[s..e].starts_with("<tool_call>") && raw[s..e].ends_with("</tool_call>"));
        assert_eq!(e, raw.len());
    }

    fn syntax_result(report: SyntaxReport) -> ToolResult {
        ToolResult {
            tool: ToolName::SyntaxCheck,
            payload: ToolPayload::Syntax(report),
            raw: String::new(),
        }
    }

    #[test]
    fn renders_passing_syntax() {
        let r = syntax_result(SyntaxReport::from_diagnostics(vec![], SyntaxStage::Batch));
        assert_eq!(
            render_tool_result(&r),
            "<tool_result>\nFunction: syntax_check\nOutput: {\n  \"pass\": true,\n  \"errors\": []\n}\n</tool_result>"
        );
    }

    #[test]
    fn renders_failing_syntax_with_wire_fields() {
        let d = Diagnostic::error((7, 48), (7, 50), "unexpected token '∈'; expected ','");
        let r = syntax_result(SyntaxReport::from_diagnostics(vec![d], SyntaxStage::Batch));
        let out = render_tool_result(&r);
        let expected = "Output: {\n  \"pass\": false,\n  \"errors\": [\n    {\n      \"severity\": \"error\",\n      \"pos\": {\n        \"line\": 7,\n        \"column\": 48\n      },\n      \"endPos\": {\n        \"line\": 7,\n        \"column\": 50\n      },\n      \"data\": \"unexpected token '∈'; expected ','\"\n    }\n  ]\n}";
        assert!(out.contains(expected), "{out}");
    }

    #[test]
    fn renders_consistency() {
        let r = ToolResult {
            tool: ToolName::ConsistencyCheck,
            payload: ToolPayload::Consistency(ConsistencyReport {
                pass: true,
                explanations: "ok".into(),
                per_judge: vec![],
            }),
            raw: String::new(),
        };
        assert_eq!(
            render_tool_result(&r),
            "<tool_result>\nFunction: consistency_check\nOutput: {\n  \"pass\": true,\n  \"explanations\": \"ok\"\n}\n</tool_result>"
        );
    }

    #[test]
    fn rendered_call_round_trips() {
        let turn = ModelTurn::invoke(ToolName::SyntaxCheck, CODE, false);
        let TurnAction::Invoke(inv) = &turn.action else { panic!() };
        let again = parse_model_turn(&render_tool_call(inv)).unwrap();
        let TurnAction::Invoke(back) = again.action else { panic!() };
        assert_eq!((back.tool, back.lean4_code()), (inv.tool, Some(CODE)));
    }
}
