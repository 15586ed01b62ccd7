use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{ratio_serde, CurriculumSpec, PerformanceReport, WinRate};
use crate::dsl::BehaviorTree;
use crate::llm::BackendConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Failed,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Success => "Success",
            Outcome::Failed => "Failed",
        })
    }
}

/// One outer-loop iteration: the task, the code that was kept, and its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub curriculum: CurriculumSpec,
    /// Strategy text of the attempt the record reports on.
    pub strategy: String,
    /// Code text of the attempt the record reports on.
    pub tree_source: String,
    pub critiques: Vec<String>,
    pub report: PerformanceReport,
    pub outcome: Outcome,
    pub attempts_used: u32,
}

/// Algorithm parameters plus the backend selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Path label used by reports.
    pub label: String,
    /// Curriculum progression threshold.
    #[serde(with = "ratio_serde")]
    pub theta: WinRate,
    /// Task success threshold inside the behavior coder.
    #[serde(with = "ratio_serde")]
    pub theta_success: WinRate,
    pub max_iterations: u32,
    pub max_attempts: u32,
    pub base_seed: u64,
    pub history_window: usize,
    pub designer_retries: u32,
    pub feedback_cap: usize,
    /// Character budget for a rendered designer prompt.
    pub prompt_budget: usize,
    pub parallel_episodes: bool,
    /// Catalog file; the shipped catalog when absent.
    pub catalog: Option<PathBuf>,
    /// Directory of prompt template overrides.
    pub prompts: Option<PathBuf>,
    pub backend: BackendConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            label: "1".to_string(),
            theta: WinRate::new(2, 3),
            theta_success: WinRate::new(2, 3),
            max_iterations: 10,
            max_attempts: 4,
            base_seed: 42,
            history_window: 8,
            designer_retries: 3,
            feedback_cap: 12,
            prompt_budget: 24_000,
            parallel_episodes: true,
            catalog: None,
            prompts: None,
            backend: BackendConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Succeeded,
    FailedAtCap,
    Aborted { reason: String },
}

impl RunStatus {
    pub fn is_terminal(&self) -> bool {
        matches!(self, RunStatus::Succeeded | RunStatus::FailedAtCap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub final_task: CurriculumSpec,
    pub iterations: Vec<IterationRecord>,
    pub current_tree: BehaviorTree,
    pub config: EngineConfig,
    pub status: RunStatus,
}

impl RunState {
    /// True iff some successful iteration mastered the final task.
    pub fn overall_success(&self) -> bool {
        self.iterations
            .iter()
            .any(|r| r.outcome == Outcome::Success && r.curriculum.spec_equals(&self.final_task))
    }

    pub fn last_success(&self) -> Option<&IterationRecord> {
        self.iterations
            .iter()
            .rev()
            .find(|r| r.outcome == Outcome::Success)
    }
}
