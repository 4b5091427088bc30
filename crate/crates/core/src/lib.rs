//! `microlang`: a small language for programming services.
//!
//! A program declares interfaces, input and output ports, correlation sets
//! and a workflow (`main`). The runtime spawns one process per correlated
//! conversation and moves messages over pluggable transports (TCP sockets or
//! an in-process registry) and protocols (HTTP+JSON or the `sodep-lite`
//! binary codec).
//!
//! ```
//! use microlang::{lang, checker};
//!
//! let program = lang::parse_source("demo.ml.svc", "main { nil }").unwrap();
//! let checked = checker::check_program(program);
//! assert!(checked.is_ok());
//! ```

pub mod checker;
pub mod lang;
pub mod net;
pub mod runtime;
pub mod values;
