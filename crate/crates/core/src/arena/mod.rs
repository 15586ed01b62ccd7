//! Deterministic micro-combat simulator.
//!
//! Agents follow a behavior tree, enemies follow [`ScriptedOpponent`]. An
//! episode is a pure function of (curriculum, tree, catalog, seed); the seed
//! only perturbs spawn positions.

mod opponent;
mod policy;
mod state;
mod step;

pub use opponent::{ScriptedOpponent, NOVA_MIN_TARGETS, STORM_MIN_TARGETS};
pub use policy::{Command, Idle, Policy, TreePolicy, View};
pub use state::{BattleState, DamageLedger, Hazard, HazardKind, Unit, Vec2, Weapon, SPAWN_JITTER};
pub use step::step;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::UnitCatalog;
use crate::digest::Fnv64;
use crate::domain::{CurriculumSpec, EpisodeMetrics, PerformanceReport, Side, SpecError};
use crate::dsl::{validate, BehaviorTree, ValidationError};

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("invalid curriculum: {0}")]
    Spec(#[from] SpecError),
    #[error("invalid behavior tree: {0}")]
    Tree(#[from] ValidationError),
    #[error("curriculum requests zero episodes")]
    NoEpisodes,
}

/// Per-unit snapshot written by `simulate --trace`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitFrame {
    pub id: usize,
    pub side: Side,
    pub unit_type: String,
    pub x: f64,
    pub y: f64,
    pub hp: f64,
    pub shield: f64,
    pub alive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub tick: u32,
    pub units: Vec<UnitFrame>,
    pub hazards: Vec<Hazard>,
}

impl Frame {
    fn capture(state: &BattleState) -> Self {
        Self {
            tick: state.tick,
            units: state
                .units
                .iter()
                .map(|u| UnitFrame {
                    id: u.id,
                    side: u.side,
                    unit_type: u.unit_type.to_string(),
                    x: u.pos.x,
                    y: u.pos.y,
                    hp: u.hp,
                    shield: u.shield,
                    alive: u.alive,
                })
                .collect(),
            hazards: state.hazards.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub metrics: EpisodeMetrics,
    pub ledgers: [DamageLedger; 2],
    /// Present when tracing was requested; frame 0 is the spawn state.
    pub frames: Option<Vec<Frame>>,
}

/// Plays one episode to elimination or the tick limit. Agents win when every
/// enemy is dead while at least one agent lives; running out of time loses.
pub fn run_episode(
    spec: &CurriculumSpec,
    tree: &BehaviorTree,
    catalog: &UnitCatalog,
    seed: u64,
    trace: bool,
) -> Result<EpisodeOutcome, ArenaError> {
    validate(tree, catalog)?;
    let mut state = BattleState::new(spec, catalog, seed)?;
    let agents = TreePolicy { tree };
    let mut digest = Fnv64::new();
    state.digest_into(&mut digest);
    let mut frames = trace.then(|| vec![Frame::capture(&state)]);

    let limit = spec.objective.tick_limit;
    let win = loop {
        if state.side_eliminated(Side::Enemy) {
            break !state.side_eliminated(Side::Agent);
        }
        if state.side_eliminated(Side::Agent) || state.tick >= limit {
            break false;
        }
        step(&mut state, catalog, &agents, &ScriptedOpponent);
        state.digest_into(&mut digest);
        if let Some(f) = frames.as_mut() {
            f.push(Frame::capture(&state));
        }
    };

    let (hp, max): (f64, f64) = state
        .units
        .iter()
        .filter(|u| u.side == Side::Agent)
        .fold((0.0, 0.0), |(hp, max), u| {
            (hp + if u.alive { u.hp.max(0.0) } else { 0.0 }, max + u.stats.hp)
        });
    let ledger = state.ledgers[Side::Agent.index()];
    Ok(EpisodeOutcome {
        metrics: EpisodeMetrics {
            win,
            ticks: state.tick,
            damage_dealt: ledger.dealt,
            damage_taken: ledger.received,
            surviving_hp_fraction: if max > 0.0 { hp / max } else { 0.0 },
            seed,
            trace_digest: digest.hex(),
        },
        ledgers: state.ledgers,
        frames,
    })
}

/// Runs the curriculum's episodes with seeds `base_seed, base_seed + 1, ...`.
/// The parallel and sequential paths produce identical reports.
pub fn evaluate(
    spec: &CurriculumSpec,
    tree: &BehaviorTree,
    catalog: &UnitCatalog,
    base_seed: u64,
    parallel: bool,
) -> Result<PerformanceReport, ArenaError> {
    let n = spec.objective.episodes;
    if n == 0 {
        return Err(ArenaError::NoEpisodes);
    }
    let seeds: Vec<u64> = (0..u64::from(n)).map(|k| base_seed.wrapping_add(k)).collect();
    let run = |seed: &u64| run_episode(spec, tree, catalog, *seed, false).map(|o| o.metrics);
    let episodes: Result<Vec<_>, _> = if parallel {
        seeds.par_iter().map(run).collect()
    } else {
        seeds.iter().map(run).collect()
    };
    Ok(PerformanceReport::from_episodes(episodes?))
}
