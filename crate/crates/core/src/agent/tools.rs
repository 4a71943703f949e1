//! The four-tool schema and conversion between tool calls and actions.

use serde_json::{json, Map, Value};

use super::client::{ChatMessage, Role, ToolCall};
use crate::env::AgentAction;

pub const TOOL_NAMES: [&str; 4] = ["create_cell", "edit_cell", "execute_cell", "finish"];

/// Tool descriptors in chat-completions `tools` format.
pub fn tool_schema() -> Value {
    let comment = json!({
        "type": "string",
        "description": "Your reasoning about the previous observation and why you take this action."
    });
    let cell_num = json!({"type": "integer", "description": "1-based index of the cell."});
    let source = json!({"type": "string", "description": "Python source of the cell."});
    let function = |name: &str, description: &str, properties: Value, required: &[&str]| {
        json!({
            "type": "function",
            "function": {
                "name": name,
                "description": description,
                "parameters": {"type": "object", "properties": properties, "required": required},
            }
        })
    };
    json!([
        function(
            "create_cell",
            "Create a new code cell with the given source, execute it and return the output.",
            json!({
                "source": source,
                "position": {"type": "integer", "description": "1-based index for the new cell. Defaults to the end of the notebook."},
                "comment": comment,
            }),
            &["source", "comment"],
        ),
        function(
            "edit_cell",
            "Replace the source of an existing cell. Does not execute it.",
            json!({"cell_num": cell_num, "source": source, "comment": comment}),
            &["cell_num", "source", "comment"],
        ),
        function(
            "execute_cell",
            "Execute an existing cell as is and return the output.",
            json!({"cell_num": cell_num, "comment": comment}),
            &["cell_num", "comment"],
        ),
        function(
            "finish",
            "Call when the error is resolved.",
            json!({"comment": comment}),
            &["comment"],
        ),
    ])
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ToolCallError {
    #[error("the reply contains no function call")]
    NoToolCall,
    #[error("arguments are not a JSON object: {0}")]
    BadJson(String),
    #[error("unknown function `{0}`")]
    UnknownTool(String),
    #[error("function `{tool}` is missing required argument `{arg}`")]
    MissingArgument { tool: String, arg: &'static str },
    #[error("argument `{arg}` of `{tool}` must be {expected}")]
    WrongType { tool: String, arg: &'static str, expected: &'static str },
}

impl ToolCallError {
    /// Message sent back to the model before it retries.
    pub fn corrective_message(&self) -> String {
        format!(
            "Your last reply was invalid: {self}. Respond with exactly one call to one of the functions {}, passing all required arguments, and put any explanation in the \"comment\" argument.",
            TOOL_NAMES.join(", ")
        )
    }
}

pub fn parse_tool_call(msg: &ChatMessage) -> Result<AgentAction, ToolCallError> {
    let call = match (&msg.role, &msg.tool_call) {
        (Role::Assistant, Some(call)) => call,
        _ => return Err(ToolCallError::NoToolCall),
    };
    let args: Map<String, Value> = match serde_json::from_str::<Value>(&call.arguments) {
        Ok(Value::Object(m)) => m,
        Ok(other) => return Err(ToolCallError::BadJson(format!("got {}", type_name(&other)))),
        Err(e) => return Err(ToolCallError::BadJson(e.to_string())),
    };
    let tool = call.name.as_str();
    if !TOOL_NAMES.contains(&tool) {
        return Err(ToolCallError::UnknownTool(call.name.clone()));
    }
    let p = Args { tool, args: &args };
    Ok(match tool {
        "create_cell" => AgentAction::CreateCell {
            source: p.string("source")?,
            position: p.opt_index("position")?,
            comment: p.string("comment")?,
        },
        "edit_cell" => AgentAction::EditCell {
            cell_num: p.index("cell_num")?,
            source: p.string("source")?,
            comment: p.string("comment")?,
        },
        "execute_cell" => AgentAction::ExecuteCell { cell_num: p.index("cell_num")?, comment: p.string("comment")? },
        _ => AgentAction::Finish { comment: p.string("comment")? },
    })
}

/// Inverse of [`parse_tool_call`].
pub fn action_to_call(action: &AgentAction, id: impl Into<String>) -> ToolCall {
    let arguments = match action {
        AgentAction::CreateCell { source, position: Some(p), comment } => {
            json!({"source": source, "position": p, "comment": comment})
        }
        AgentAction::CreateCell { source, position: None, comment } => json!({"source": source, "comment": comment}),
        AgentAction::EditCell { cell_num, source, comment } => {
            json!({"cell_num": cell_num, "source": source, "comment": comment})
        }
        AgentAction::ExecuteCell { cell_num, comment } => json!({"cell_num": cell_num, "comment": comment}),
        AgentAction::Finish { comment } => json!({"comment": comment}),
    };
    ToolCall { id: id.into(), name: action.tool_name().to_string(), arguments: arguments.to_string() }
}

struct Args<'a> {
    tool: &'a str,
    args: &'a Map<String, Value>,
}

impl Args<'_> {
    fn get(&self, arg: &'static str) -> Result<&Value, ToolCallError> {
        match self.args.get(arg) {
            Some(v) if !v.is_null() => Ok(v),
            _ => Err(ToolCallError::MissingArgument { tool: self.tool.to_string(), arg }),
        }
    }

    fn wrong(&self, arg: &'static str, expected: &'static str) -> ToolCallError {
        ToolCallError::WrongType { tool: self.tool.to_string(), arg, expected }
    }

    fn string(&self, arg: &'static str) -> Result<String, ToolCallError> {
        self.get(arg)?.as_str().map(str::to_string).ok_or_else(|| self.wrong(arg, "a string"))
    }

    fn index(&self, arg: &'static str) -> Result<usize, ToolCallError> {
        self.get(arg)?
            .as_u64()
            .and_then(|n| usize::try_from(n).ok())
            .ok_or_else(|| self.wrong(arg, "a non-negative integer"))
    }

    fn opt_index(&self, arg: &'static str) -> Result<Option<usize>, ToolCallError> {
        match self.args.get(arg) {
            None | Some(Value::Null) => Ok(None),
            Some(_) => self.index(arg).map(Some),
        }
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}
