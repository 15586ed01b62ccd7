//! Curriculum-driven synthesis of behavior-tree combat policies.
//!
//! A designer model proposes training scenarios of increasing difficulty, a
//! planner/coder/critic loop writes behavior-tree programs for them, and a
//! deterministic micro-combat arena scores each program.

pub mod catalog;
pub mod digest;
pub mod domain;
pub mod dsl;
pub mod llm;
pub mod arena;
pub mod prompts;
pub mod designer;
pub mod coder;
pub mod orchestrator;
pub mod report;
pub mod bridge;
