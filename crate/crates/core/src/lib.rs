//! Agentic repair of failing notebook cells.
//!
//! An [`env::Environment`] binds a [`notebook::Notebook`] to a live kernel.
//! [`agent::run_session`] drives a chat model through create, edit, execute
//! and finish actions until the failing cell runs cleanly. [`cost`] turns
//! session usage into dollar reports and [`eval`] replays scripted scenarios.

pub mod agent;
pub mod cost;
pub mod env;
pub mod eval;
pub mod notebook;
