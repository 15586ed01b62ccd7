//! Command-line front end.
//!
//! [`main_with`] runs one command against explicit output streams and
//! returns the process exit code: 0 success, 2 configuration or input error,
//! 3 backend error, 4 run ended at the iteration cap without success.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use curricula_core::arena::{evaluate, run_episode};
use curricula_core::catalog::UnitCatalog;
use curricula_core::domain::{percent, CurriculumSpec, EngineConfig, IterationRecord, RunStatus, Side};
use curricula_core::dsl::{compile, print};
use curricula_core::llm::{Backend, BackendConfig, BackendError};
use curricula_core::orchestrator::{load_state, Engine, RunError};
use curricula_core::report::{render_dot, render_table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;
pub const EXIT_CAP: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "curricula", version, about = "Curriculum-driven behavior-tree synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Dot,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Start a run from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run directory; overrides the config's `run_dir`.
        #[arg(long)]
        run: Option<PathBuf>,
    },
    /// Continue an interrupted run.
    Resume {
        #[arg(long)]
        run: PathBuf,
        /// Take the backend from this config instead of the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate a behavior tree on a curriculum and print the report as JSON.
    Simulate {
        #[arg(long)]
        curriculum: PathBuf,
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        episodes: Option<u32>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Print one JSON line per tick before the report.
        #[arg(long)]
        trace: bool,
        /// Config whose catalog should be used.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render a run as a table or a Graphviz graph.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Parse and validate a behavior tree, printing its canonical form.
    DslCheck {
        path: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Contents of a run config file. Relative paths resolve against the file's
/// directory.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Curriculum JSON of the final task; the reference task when absent.
    #[serde(default)]
    pub final_task: Option<PathBuf>,
    #[serde(default = "default_run_dir")]
    pub run_dir: PathBuf,
    #[serde(default)]
    pub engine: EngineConfig,
}

fn default_run_dir() -> PathBuf {
    PathBuf::from("run")
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let code = match e {
            RunError::Backend(_) => EXIT_BACKEND,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<BackendError> for Failure {
    fn from(e: BackendError) -> Self {
        let code = match e {
            BackendError::Fixture(_) => EXIT_INPUT,
            _ => EXIT_BACKEND,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads a config file and makes every path in it absolute.
pub fn load_config(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let base = std::path::absolute(&base).unwrap_or(base);
    cfg.final_task = cfg.final_task.map(|p| resolve(&base, &p));
    cfg.run_dir = resolve(&base, &cfg.run_dir);
    let e = &mut cfg.engine;
    e.catalog = e.catalog.take().map(|p| resolve(&base, &p));
    e.prompts = e.prompts.take().map(|p| resolve(&base, &p));
    match &mut e.backend {
        BackendConfig::Scripted { fixture } => *fixture = resolve(&base, fixture),
        BackendConfig::Replay { transcript } => *transcript = resolve(&base, transcript),
        BackendConfig::Live { .. } => {}
    }
    Ok(cfg)
}

fn catalog_from(config: Option<&Path>) -> Result<UnitCatalog, Failure> {
    let Some(path) = config else {
        return Ok(UnitCatalog::shipped());
    };
    let cfg = load_config(path).map_err(Failure::input)?;
    match cfg.engine.catalog {
        Some(p) => UnitCatalog::load(&p).map_err(|e| Failure::input(e.to_string())),
        None => Ok(UnitCatalog::shipped()),
    }
}

/// One line per finished iteration.
pub fn progress_line(record: &IterationRecord, final_task: &CurriculumSpec) -> String {
    let task = if record.curriculum.spec_equals(final_task) {
        "Final Task".to_string()
    } else {
        format!(
            "{} vs {}",
            record.curriculum.composition(Side::Agent),
            record.curriculum.composition(Side::Enemy)
        )
    };
    format!(
        "iteration {} | {} | win rate {}% | {}",
        record.index,
        task,
        percent(record.report.win_rate),
        record.outcome
    )
}

fn finish(status: &RunStatus, out: &mut dyn Write) -> i32 {
    let _ = writeln!(out, "status: {}", match status {
        RunStatus::Succeeded => "succeeded",
        RunStatus::FailedAtCap => "failed at iteration cap",
        RunStatus::Running => "running",
        RunStatus::Aborted { .. } => "aborted",
    });
    match status {
        RunStatus::Succeeded => EXIT_OK,
        _ => EXIT_CAP,
    }
}

fn cmd_run(config: &Path, run: Option<&Path>, out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = load_config(config).map_err(Failure::input)?;
    let engine = Engine::from_config(cfg.engine)?;
    let final_task = match &cfg.final_task {
        Some(p) => CurriculumSpec::from_json(&read(p)?, &engine.catalog)
            .map_err(|e| Failure::input(format!("{}: {e}", p.display())))?,
        None => CurriculumSpec::reference_final_task(),
    };
    let backend: Arc<dyn Backend> = engine.config.backend.build()?;
    let run_dir = run.map_or(cfg.run_dir, Path::to_path_buf);
    let normalized = final_task
        .clone()
        .normalized(&engine.catalog)
        .map_err(|e| Failure::input(e.to_string()))?;
    let mut progress = |r: &IterationRecord| {
        let _ = writeln!(out, "{}", progress_line(r, &normalized));
    };
    let state = engine.run(&final_task, backend, &run_dir, &mut progress)?;
    Ok(finish(&state.status, out))
}

fn cmd_resume(run: &Path, config: Option<&Path>, out: &mut dyn Write) -> Result<i32, Failure> {
    let state = load_state(run)?;
    let mut engine_cfg = state.config.clone();
    if let Some(path) = config {
        engine_cfg.backend = load_config(path).map_err(Failure::input)?.engine.backend;
    }
    let backend = engine_cfg.backend.build()?;
    let engine = Engine::from_config(state.config.clone())?;
    let final_task = state.final_task.clone();
    let mut progress = |r: &IterationRecord| {
        let _ = writeln!(out, "{}", progress_line(r, &final_task));
    };
    let state = engine.resume(run, backend, &mut progress)?;
    Ok(finish(&state.status, out))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    curriculum: &Path,
    tree: &Path,
    episodes: Option<u32>,
    seed: u64,
    trace: bool,
    config: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let catalog = catalog_from(config)?;
    let mut spec = CurriculumSpec::from_json(&read(curriculum)?, &catalog)
        .map_err(|e| Failure::input(format!("{}: {e}", curriculum.display())))?;
    if let Some(n) = episodes {
        spec.objective.episodes = n;
    }
    let tree = compile(&read(tree)?, &catalog).map_err(|e| Failure::input(format!("{}: {e}", tree.display())))?;
    if trace {
        for k in 0..u64::from(spec.objective.episodes) {
            let outcome = run_episode(&spec, &tree, &catalog, seed.wrapping_add(k), true)
                .map_err(|e| Failure::input(e.to_string()))?;
            for frame in outcome.frames.unwrap_or_default() {
                let line = serde_json::json!({ "episode": k, "frame": frame });
                let _ = writeln!(out, "{line}");
            }
        }
    }
    let report = evaluate(&spec, &tree, &catalog, seed, true).map_err(|e| Failure::input(e.to_string()))?;
    let _ = writeln!(out, "{}", report.to_json());
    Ok(EXIT_OK)
}

fn cmd_report(run: &Path, format: Format, out: &mut dyn Write) -> Result<i32, Failure> {
    let state = load_state(run)?;
    let text = match format {
        Format::Table => render_table(&state),
        Format::Dot => render_dot(&state),
    };
    let _ = out.write_all(text.as_bytes());
    Ok(EXIT_OK)
}

fn cmd_dsl_check(path: &Path, config: Option<&Path>, out: &mut dyn Write) -> Result<i32, Failure> {
    let catalog = catalog_from(config)?;
    let tree = compile(&read(path)?, &catalog).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let _ = out.write_all(print(&tree).as_bytes());
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run { config, run } => cmd_run(config, run.as_deref(), out),
        Command::Resume { run, config } => cmd_resume(run, config.as_deref(), out),
        Command::Simulate {
            curriculum,
            tree,
            episodes,
            seed,
            trace,
            config,
        } => cmd_simulate(curriculum, tree, *episodes, *seed, *trace, config.as_deref(), out),
        Command::Report { run, format } => cmd_report(run, *format, out),
        Command::DslCheck { path, config } => cmd_dsl_check(path, config.as_deref(), out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
