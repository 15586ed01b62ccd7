//! Behavior coder: the planner, coder and critic loop for one curriculum.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::arena::{self, ArenaError};
use crate::catalog::UnitCatalog;
use crate::domain::{
    CurriculumSpec, IterationRecord, Outcome, PerformanceReport, Side, UnitType, WinRate,
};
use crate::dsl::{compile, print, BehaviorTree};
use crate::llm::{first_fenced_block, Backend, BackendError, Role};
use crate::prompts::{PromptError, PromptSet};

/// Scores a tree on a curriculum.
pub trait Evaluator {
    fn evaluate(&self, spec: &CurriculumSpec, tree: &BehaviorTree) -> Result<PerformanceReport, ArenaError>;
}

/// Evaluates in the built-in arena.
pub struct ArenaEvaluator<'a> {
    pub catalog: &'a UnitCatalog,
    pub base_seed: u64,
    pub parallel: bool,
}

impl Evaluator for ArenaEvaluator<'_> {
    fn evaluate(&self, spec: &CurriculumSpec, tree: &BehaviorTree) -> Result<PerformanceReport, ArenaError> {
        arena::evaluate(spec, tree, self.catalog, self.base_seed, self.parallel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSource {
    Critic,
    CompileError,
    RuntimeReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    pub source: FeedbackSource,
    pub text: String,
}

/// Bounded feedback log; the oldest entry goes first when full.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feedback {
    entries: VecDeque<FeedbackEntry>,
    cap: usize,
}

impl Feedback {
    pub fn new(cap: usize) -> Self {
        Self {
            entries: VecDeque::new(),
            cap,
        }
    }

    pub fn push(&mut self, source: FeedbackSource, text: impl Into<String>) {
        if self.cap == 0 {
            return;
        }
        if self.entries.len() == self.cap {
            self.entries.pop_front();
        }
        self.entries.push_back(FeedbackEntry {
            source,
            text: text.into(),
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &FeedbackEntry> {
        self.entries.iter()
    }

    /// Prompt rendering; "none" when empty.
    pub fn render(&self) -> String {
        if self.entries.is_empty() {
            return "none".to_string();
        }
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let label = match e.source {
                    FeedbackSource::Critic => "critic",
                    FeedbackSource::CompileError => "compile error",
                    FeedbackSource::RuntimeReport => "evaluation",
                };
                format!("{}. [{label}] {}", i + 1, e.text.trim())
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CritiqueTarget {
    Planner,
    Coder,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Critique {
    pub text: String,
    pub target: CritiqueTarget,
}

#[derive(Debug, thiserror::Error)]
pub enum CoderError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Code text of a reply: the first fenced block, else the whole reply.
pub fn extract_code(reply: &str) -> &str {
    first_fenced_block(reply).unwrap_or(reply)
}

/// Result of one [`Coder::improve_tree`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct Improvement {
    /// The new tree on success, the input tree otherwise.
    pub tree: BehaviorTree,
    pub record: IterationRecord,
}

pub struct Coder<'a> {
    pub backend: &'a dyn Backend,
    pub prompts: &'a PromptSet,
    pub catalog: &'a UnitCatalog,
    pub theta_success: WinRate,
    pub max_attempts: u32,
}

impl Coder<'_> {
    pub fn plan(
        &self,
        curriculum: &CurriculumSpec,
        previous: &BehaviorTree,
        feedback: &Feedback,
        history: &str,
    ) -> Result<String, CoderError> {
        let scenario = format!(
            "Agents: {}\nEnemies: {}",
            curriculum.composition(Side::Agent),
            curriculum.composition(Side::Enemy)
        );
        let map = format!(
            "{}x{} flat. Agents spawn near ({}); enemies spawn near ({}). Episodes last at most {} ticks.",
            curriculum.map.width,
            curriculum.map.height,
            spawn_list(curriculum, Side::Agent),
            spawn_list(curriculum, Side::Enemy),
            curriculum.objective.tick_limit
        );
        let previous = print(previous);
        let feedback = feedback.render();
        let history = if history.is_empty() { "none" } else { history };
        let units = self.unit_rows(curriculum);
        let vars = [
            ("curriculum", scenario.as_str()),
            ("map", map.as_str()),
            ("units", units.as_str()),
            ("previous_tree", previous.trim_end()),
            ("feedback", feedback.as_str()),
            ("history", history),
        ];
        let request = self.prompts.request(Role::Planner, &vars)?;
        Ok(self.backend.complete(&request)?)
    }

    /// Catalog rows for the unit types present in the curriculum.
    pub fn unit_rows(&self, curriculum: &CurriculumSpec) -> String {
        let mut types: Vec<&UnitType> = curriculum
            .agents
            .iter()
            .chain(&curriculum.enemies)
            .map(|u| &u.unit_type)
            .collect();
        types.sort();
        types.dedup();
        types
            .into_iter()
            .filter_map(|t| self.catalog.describe(t))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn generate_code(
        &self,
        strategy: &str,
        previous: &BehaviorTree,
        feedback: &Feedback,
    ) -> Result<String, CoderError> {
        let previous = print(previous);
        let feedback = feedback.render();
        let vars = [
            ("strategy", strategy.trim()),
            ("previous_tree", previous.trim_end()),
            ("feedback", feedback.as_str()),
        ];
        let request = self.prompts.request(Role::Coder, &vars)?;
        let reply = self.backend.complete(&request)?;
        Ok(extract_code(&reply).to_string())
    }

    /// Routes to the coder when the code never ran, otherwise to the planner.
    pub fn critique(
        &self,
        report: &PerformanceReport,
        code: &str,
        strategy: &str,
    ) -> Result<Critique, CoderError> {
        let report_text = match &report.error {
            Some(err) => format!("The program was rejected before evaluation.\n{err}"),
            None => report.summary(),
        };
        let vars = [
            ("strategy", strategy.trim()),
            ("code", code.trim_end()),
            ("report", report_text.as_str()),
        ];
        let request = self.prompts.request(Role::Critic, &vars)?;
        let text = self.backend.complete(&request)?;
        let target = if report.error.is_some() {
            CritiqueTarget::Coder
        } else {
            CritiqueTarget::Planner
        };
        Ok(Critique { text, target })
    }

    /// Up to `max_attempts` plan and code cycles. The first attempt whose win
    /// rate reaches `theta_success` wins; if none does, the input tree is
    /// returned unchanged together with the best report seen. A critique
    /// aimed at the coder skips re-planning on the next attempt.
    pub fn improve_tree(
        &self,
        index: usize,
        curriculum: &CurriculumSpec,
        tree: &BehaviorTree,
        feedback: &mut Feedback,
        history: &str,
        evaluator: &dyn Evaluator,
    ) -> Result<Improvement, CoderError> {
        let mut critiques = Vec::new();
        let mut best: Option<(PerformanceReport, String, String)> = None;
        let mut strategy: Option<String> = None;
        let mut attempts = 0;
        while attempts < self.max_attempts.max(1) {
            attempts += 1;
            let plan = match strategy.take() {
                Some(s) => s,
                None => self.plan(curriculum, tree, feedback, history)?,
            };
            let code = self.generate_code(&plan, tree, feedback)?;
            let (report, candidate) = match compile(&code, self.catalog) {
                Err(e) => (PerformanceReport::failed(e.to_string()), None),
                Ok(t) => match evaluator.evaluate(curriculum, &t) {
                    Ok(r) => (r, Some(t)),
                    Err(e) => (PerformanceReport::failed(e.to_string()), None),
                },
            };
            if let Some(t) = candidate.filter(|_| report.win_rate >= self.theta_success) {
                return Ok(Improvement {
                    tree: t,
                    record: IterationRecord {
                        index,
                        curriculum: curriculum.clone(),
                        strategy: plan,
                        tree_source: code,
                        critiques,
                        report,
                        outcome: Outcome::Success,
                        attempts_used: attempts,
                    },
                });
            }

            let critique = self.critique(&report, &code, &plan)?;
            match &report.error {
                Some(err) => feedback.push(FeedbackSource::CompileError, err.clone()),
                None => feedback.push(FeedbackSource::RuntimeReport, report.summary()),
            }
            feedback.push(FeedbackSource::Critic, critique.text.clone());
            critiques.push(critique.text);
            if critique.target == CritiqueTarget::Coder {
                strategy = Some(plan.clone());
            }
            if best.as_ref().is_none_or(|(b, _, _)| report.win_rate > b.win_rate) {
                best = Some((report, plan, code));
            }
        }
        let (report, plan, code) = best.expect("at least one attempt ran");
        Ok(Improvement {
            tree: tree.clone(),
            record: IterationRecord {
                index,
                curriculum: curriculum.clone(),
                strategy: plan,
                tree_source: code,
                critiques,
                report,
                outcome: Outcome::Failed,
                attempts_used: attempts,
            },
        })
    }
}

fn spawn_list(spec: &CurriculumSpec, side: Side) -> String {
    let mut points: Vec<String> = spec
        .roster(side)
        .iter()
        .map(|u| format!("{}, {}", u.position.x, u.position.y))
        .collect();
    points.dedup();
    points.join("; ")
}
