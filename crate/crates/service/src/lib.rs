//! HTTP session service and command line for the notebook repair agent.
//!
//! [`sessions::Sessions`] runs agent sessions on blocking threads and records
//! their events; [`routes::router`] exposes them over HTTP with server-sent
//! event streams.

pub mod cli;
pub mod routes;
pub mod sessions;
