//! The repair agent: prompts, tool calls, the session loop and the
//! single-action baseline.

pub mod baseline;
pub mod client;
pub mod hack;
pub mod prompts;
pub mod session;
pub mod tools;

pub use baseline::run_single_action;
pub use client::{ChatClient, ChatMessage, ChatRequest, ClientError, HttpChatClient, Role, ToolCall, Usage};
pub use hack::{detect_hack, detect_in_sources, HackFlag, HackReport};
pub use prompts::{build_initial_prompt, build_system_prompt};
pub use session::{
    run_session, AgentConfig, NoopObserver, SessionEvent, SessionObserver, SessionRecord, SessionResult,
    SessionStatus, Strategy,
};
pub use tools::{action_to_call, parse_tool_call, tool_schema, ToolCallError};
