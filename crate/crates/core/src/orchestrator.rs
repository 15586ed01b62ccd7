//! Outer loop: curriculum, code, evaluation, next curriculum.
//!
//! A run lives in its own directory:
//!
//! ```text
//! run.json            manifest: config, status, state digest
//! checkpoint.json     full state plus the pending curriculum, digest-sealed
//! transcripts.jsonl   every LLM call, append-only
//! final_report.json   written once the run ends
//! iter_001/           curriculum.json strategy.txt code.bt report.json
//!                     critiques.txt transcripts.jsonl
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CatalogError, UnitCatalog};
use crate::coder::{ArenaEvaluator, Coder, CoderError, Feedback};
use crate::designer::{format_history, simplify, DesignContext, Designer, DesignerError};
use crate::digest::sha256_hex;
use crate::domain::{
    CurriculumSpec, EngineConfig, IterationRecord, Outcome, PerformanceReport, RunState, RunStatus,
    SpecError,
};
use crate::dsl::BehaviorTree;
use crate::llm::{Backend, BackendConfig, BackendError, CallCounts, Recorder};
use crate::prompts::{PromptError, PromptSet};

pub const MANIFEST_FILE: &str = "run.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRANSCRIPT_FILE: &str = "transcripts.jsonl";
pub const FINAL_REPORT_FILE: &str = "final_report.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("invalid final task: {0}")]
    Spec(#[from] SpecError),
    #[error("curriculum design failed: {0}")]
    Designer(String),
    #[error("checkpoint {} is corrupt: {reason}", path.display())]
    CorruptCheckpoint { path: PathBuf, reason: String },
    #[error("{} already holds a run; resume it instead", path.display())]
    AlreadyStarted { path: PathBuf },
}

impl From<DesignerError> for RunError {
    fn from(e: DesignerError) -> Self {
        match e {
            DesignerError::Backend(b) => RunError::Backend(b),
            DesignerError::Prompt(p) => RunError::Prompt(p),
            other => RunError::Designer(other.to_string()),
        }
    }
}

impl From<CoderError> for RunError {
    fn from(e: CoderError) -> Self {
        match e {
            CoderError::Backend(b) => RunError::Backend(b),
            CoderError::Prompt(p) => RunError::Prompt(p),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), RunError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

/// Digest of everything a run decided, independent of which backend
/// produced the replies.
pub fn state_digest(state: &RunState) -> String {
    let mut neutral = state.clone();
    neutral.config.backend = BackendConfig::default();
    sha256_hex(&serde_json::to_vec(&neutral).expect("run state serializes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub label: String,
    pub status: RunStatus,
    pub iterations: usize,
    pub overall_success: bool,
    pub state_digest: String,
    pub config: EngineConfig,
}

impl Manifest {
    pub fn of(state: &RunState) -> Self {
        Self {
            label: state.config.label.clone(),
            status: state.status.clone(),
            iterations: state.iterations.len(),
            overall_success: state.overall_success(),
            state_digest: state_digest(state),
            config: state.config.clone(),
        }
    }

    pub fn load(run_dir: &Path) -> Result<Self, RunError> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| RunError::CorruptCheckpoint {
            path,
            reason: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointBody {
    state: RunState,
    /// Curriculum of the next iteration; `None` while the designer step for
    /// the last iteration is still outstanding or once the run has ended.
    next: Option<CurriculumSpec>,
    calls: CallCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    #[serde(flatten)]
    body: CheckpointBody,
    digest: String,
}

impl Checkpoint {
    fn seal(body: CheckpointBody) -> Self {
        let digest = sha256_hex(&serde_json::to_vec(&body).expect("checkpoint serializes"));
        Self { body, digest }
    }
}

/// Reads and verifies a run's checkpoint.
pub fn load_state(run_dir: &Path) -> Result<RunState, RunError> {
    Ok(read_checkpoint(run_dir)?.body.state)
}

fn read_checkpoint(run_dir: &Path) -> Result<Checkpoint, RunError> {
    let path = run_dir.join(CHECKPOINT_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let corrupt = |reason: String| RunError::CorruptCheckpoint {
        path: path.clone(),
        reason,
    };
    let cp: Checkpoint = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    let again = Checkpoint::seal(cp.body.clone());
    if again.digest != cp.digest {
        return Err(corrupt("digest mismatch".to_string()));
    }
    Ok(cp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalReport {
    pub status: RunStatus,
    pub iterations: usize,
    pub overall_success: bool,
    /// The kept tree evaluated on the final task.
    pub final_task: PerformanceReport,
    pub state_digest: String,
}

/// Loaded configuration plus the catalog and prompts it points at.
pub struct Engine {
    pub config: EngineConfig,
    pub catalog: UnitCatalog,
    pub prompts: PromptSet,
}

impl Engine {
    pub fn from_config(config: EngineConfig) -> Result<Self, RunError> {
        let catalog = match &config.catalog {
            Some(path) => UnitCatalog::load(path)?,
            None => UnitCatalog::shipped(),
        };
        let prompts = PromptSet::load(config.prompts.as_deref())?;
        Ok(Self {
            config,
            catalog,
            prompts,
        })
    }

    /// Starts a new run in `run_dir`, which must not hold one already.
    pub fn run(
        &self,
        final_task: &CurriculumSpec,
        backend: Arc<dyn Backend>,
        run_dir: &Path,
        progress: &mut dyn FnMut(&IterationRecord),
    ) -> Result<RunState, RunError> {
        std::fs::create_dir_all(run_dir).map_err(io_err(run_dir))?;
        if run_dir.join(CHECKPOINT_FILE).exists() {
            return Err(RunError::AlreadyStarted {
                path: run_dir.to_path_buf(),
            });
        }
        let final_task = final_task.clone().normalized(&self.catalog)?;
        let first = simplify(&final_task, &self.catalog)?;
        let agent_types: Vec<_> = final_task.agents.iter().map(|u| &u.unit_type).collect();
        let state = RunState {
            current_tree: BehaviorTree::baseline(agent_types),
            final_task,
            iterations: Vec::new(),
            config: self.config.clone(),
            status: RunStatus::Running,
        };
        let body = CheckpointBody {
            state,
            next: Some(first),
            calls: CallCounts::default(),
        };
        self.save(run_dir, &body)?;
        self.drive(body, backend, run_dir, progress)
    }

    /// Continues a run from its checkpoint. A finished run is returned as is.
    pub fn resume(
        &self,
        run_dir: &Path,
        backend: Arc<dyn Backend>,
        progress: &mut dyn FnMut(&IterationRecord),
    ) -> Result<RunState, RunError> {
        let mut body = read_checkpoint(run_dir)?.body;
        if body.state.status.is_terminal() {
            return Ok(body.state);
        }
        body.state.status = RunStatus::Running;
        self.drive(body, backend, run_dir, progress)
    }

    fn save(&self, run_dir: &Path, body: &CheckpointBody) -> Result<(), RunError> {
        let cp = Checkpoint::seal(body.clone());
        let text = serde_json::to_string_pretty(&cp).expect("checkpoint serializes");
        let tmp = run_dir.join(format!("{CHECKPOINT_FILE}.tmp"));
        write(&tmp, text)?;
        let path = run_dir.join(CHECKPOINT_FILE);
        std::fs::rename(&tmp, &path).map_err(io_err(&path))?;
        let manifest = serde_json::to_string_pretty(&Manifest::of(&body.state)).expect("manifest serializes");
        write(&run_dir.join(MANIFEST_FILE), manifest)
    }

    fn drive(
        &self,
        mut body: CheckpointBody,
        backend: Arc<dyn Backend>,
        run_dir: &Path,
        progress: &mut dyn FnMut(&IterationRecord),
    ) -> Result<RunState, RunError> {
        let log = run_dir.join(TRANSCRIPT_FILE);
        let recorder = Recorder::with_log(backend, &log).map_err(io_err(&log))?;
        recorder.fast_forward(&body.calls);
        match self.steps(&mut body, &recorder, run_dir, progress) {
            Ok(()) => Ok(body.state),
            Err(e) => {
                body.state.status = RunStatus::Aborted {
                    reason: e.to_string(),
                };
                // The checkpoint keeps the last completed step; only the
                // status changes so the manifest shows why the run stopped.
                self.save(run_dir, &body)?;
                Err(e)
            }
        }
    }

    fn steps(
        &self,
        body: &mut CheckpointBody,
        recorder: &Recorder,
        run_dir: &Path,
        progress: &mut dyn FnMut(&IterationRecord),
    ) -> Result<(), RunError> {
        let cfg = &self.config;
        let evaluator = ArenaEvaluator {
            catalog: &self.catalog,
            base_seed: cfg.base_seed,
            parallel: cfg.parallel_episodes,
        };
        let mut logged = 0;
        loop {
            if body.state.status.is_terminal() {
                return Ok(());
            }
            let Some(curriculum) = body.next.clone() else {
                body.next = Some(self.design(&body.state, recorder)?);
                body.calls = recorder.counts();
                self.save(run_dir, body)?;
                continue;
            };
            let index = body.state.iterations.len() + 1;
            let coder = Coder {
                backend: recorder,
                prompts: &self.prompts,
                catalog: &self.catalog,
                theta_success: cfg.theta_success,
                max_attempts: cfg.max_attempts,
            };
            let mut feedback = Feedback::new(cfg.feedback_cap);
            let history = format_history(&body.state.iterations, cfg.history_window);
            let mut curriculum = curriculum;
            curriculum.id = format!("iter_{index:03}");
            let improved = coder.improve_tree(
                index,
                &curriculum,
                &body.state.current_tree,
                &mut feedback,
                &history,
                &evaluator,
            )?;

            let entries = recorder.entries();
            self.persist_iteration(run_dir, &improved.record, &entries[logged..])?;
            logged = entries.len();
            progress(&improved.record);

            let done = improved.record.outcome == Outcome::Success
                && improved.record.curriculum.spec_equals(&body.state.final_task);
            body.state.iterations.push(improved.record);
            body.state.current_tree = improved.tree;
            body.next = None;
            if done {
                body.state.status = RunStatus::Succeeded;
            } else if body.state.iterations.len() >= cfg.max_iterations as usize {
                body.state.status = RunStatus::FailedAtCap;
            }
            body.calls = recorder.counts();
            if body.state.status.is_terminal() {
                self.write_final_report(run_dir, &body.state)?;
            }
            self.save(run_dir, body)?;
        }
    }

    fn design(&self, state: &RunState, backend: &dyn Backend) -> Result<CurriculumSpec, RunError> {
        let last = state.iterations.last().expect("designer runs after an iteration");
        let designer = Designer {
            backend,
            prompts: &self.prompts,
            catalog: &self.catalog,
            config: &self.config,
        };
        let ctx = DesignContext {
            current: &last.curriculum,
            report: &last.report,
            last_success: state.last_success().map(|r| &r.curriculum),
            final_task: &state.final_task,
            history: &state.iterations,
        };
        Ok(designer.next_curriculum(ctx)?)
    }

    fn persist_iteration(
        &self,
        run_dir: &Path,
        record: &IterationRecord,
        transcripts: &[crate::llm::AgentTranscript],
    ) -> Result<(), RunError> {
        let dir = run_dir.join(format!("iter_{:03}", record.index));
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        write(&dir.join("curriculum.json"), record.curriculum.to_json())?;
        write(&dir.join("strategy.txt"), &record.strategy)?;
        write(&dir.join("code.bt"), &record.tree_source)?;
        write(&dir.join("report.json"), record.report.to_json())?;
        write(&dir.join("critiques.txt"), record.critiques.join("\n\n---\n\n"))?;
        let lines: String = transcripts
            .iter()
            .map(|t| serde_json::to_string(t).expect("transcript serializes") + "\n")
            .collect();
        write(&dir.join("transcripts.jsonl"), lines)
    }

    fn write_final_report(&self, run_dir: &Path, state: &RunState) -> Result<(), RunError> {
        let final_task = crate::arena::evaluate(
            &state.final_task,
            &state.current_tree,
            &self.catalog,
            self.config.base_seed,
            self.config.parallel_episodes,
        )
        .unwrap_or_else(|e| PerformanceReport::failed(e.to_string()));
        let report = FinalReport {
            status: state.status.clone(),
            iterations: state.iterations.len(),
            overall_success: state.overall_success(),
            final_task,
            state_digest: state_digest(state),
        };
        write(
            &run_dir.join(FINAL_REPORT_FILE),
            serde_json::to_string_pretty(&report).expect("report serializes"),
        )
    }
}
