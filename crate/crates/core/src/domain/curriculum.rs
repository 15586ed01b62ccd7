use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Tech, UnitType};
use crate::catalog::{CatalogError, UnitCatalog};

pub const MIN_MAP_SIDE: u32 = 8;
pub const DEFAULT_TICK_LIMIT: u32 = 1000;
pub const DEFAULT_EPISODES: u32 = 3;

/// Bonus added to difficulty for each distinct enemy technology.
const TECH_DIFFICULTY: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("{side} roster is empty")]
    EmptySide { side: Side },
    #[error("{unit_type} on the {side} side has count 0")]
    ZeroCount { side: Side, unit_type: UnitType },
    #[error("{unit_type} position ({x}, {y}) lies outside the {width}x{height} map")]
    OutOfBounds {
        unit_type: UnitType,
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },
    #[error("map {width}x{height} is smaller than {MIN_MAP_SIDE}x{MIN_MAP_SIDE}")]
    MapTooSmall { width: u32, height: u32 },
    #[error("technology {tech} does not apply to {unit_type}")]
    InapplicableTechnology { unit_type: UnitType, tech: Tech },
    #[error("objective needs at least one episode and a positive tick limit")]
    InvalidObjective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Agent,
    Enemy,
}

impl Side {
    pub fn opponent(self) -> Side {
        match self {
            Side::Agent => Side::Enemy,
            Side::Enemy => Side::Agent,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Agent => 0,
            Side::Enemy => 1,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Agent => "agent",
            Side::Enemy => "enemy",
        })
    }
}

/// Spawn anchor in whole map cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridPos {
    pub x: u32,
    pub y: u32,
}

impl GridPos {
    pub fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

/// One group of identical units. Field order drives the canonical sort.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnitSpec {
    pub unit_type: UnitType,
    pub count: u32,
    pub position: GridPos,
    #[serde(default)]
    pub technologies: BTreeSet<Tech>,
}

impl UnitSpec {
    pub fn new(unit_type: &str, count: u32, position: GridPos, technologies: &[&str]) -> Self {
        Self {
            unit_type: UnitType::new(unit_type),
            count,
            position,
            technologies: technologies.iter().map(|t| Tech::new(*t)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terrain {
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MapSpec {
    pub width: u32,
    pub height: u32,
    pub terrain: Terrain,
}

impl MapSpec {
    pub fn flat(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            terrain: Terrain::Flat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WinCondition {
    EliminateAllEnemies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub win_condition: WinCondition,
    pub tick_limit: u32,
    pub episodes: u32,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self {
            win_condition: WinCondition::EliminateAllEnemies,
            tick_limit: DEFAULT_TICK_LIMIT,
            episodes: DEFAULT_EPISODES,
        }
    }
}

/// One curriculum task: rosters for both sides, map, objective, difficulty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumSpec {
    pub id: String,
    pub agents: Vec<UnitSpec>,
    pub enemies: Vec<UnitSpec>,
    pub map: MapSpec,
    pub objective: ObjectiveSpec,
    /// Derived; always recomputed by [`CurriculumSpec::normalized`].
    #[serde(default)]
    pub difficulty: f64,
}

impl CurriculumSpec {
    pub fn roster(&self, side: Side) -> &[UnitSpec] {
        match side {
            Side::Agent => &self.agents,
            Side::Enemy => &self.enemies,
        }
    }

    pub fn roster_mut(&mut self, side: Side) -> &mut Vec<UnitSpec> {
        match side {
            Side::Agent => &mut self.agents,
            Side::Enemy => &mut self.enemies,
        }
    }

    /// Weighted enemy value plus a flat bonus per distinct enemy technology.
    pub fn compute_difficulty(&self, catalog: &UnitCatalog) -> Result<f64, SpecError> {
        let mut total = 0.0;
        let mut techs = BTreeSet::new();
        for unit in &self.enemies {
            total += f64::from(unit.count) * catalog.weight(&unit.unit_type)?;
            techs.extend(unit.technologies.iter());
        }
        Ok(total + TECH_DIFFICULTY * techs.len() as f64)
    }

    /// Structural checks against the catalog; does not touch difficulty.
    pub fn check(&self, catalog: &UnitCatalog) -> Result<(), SpecError> {
        let MapSpec { width, height, .. } = self.map;
        if width < MIN_MAP_SIDE || height < MIN_MAP_SIDE {
            return Err(SpecError::MapTooSmall { width, height });
        }
        if self.objective.episodes == 0 || self.objective.tick_limit == 0 {
            return Err(SpecError::InvalidObjective);
        }
        for side in [Side::Agent, Side::Enemy] {
            let roster = self.roster(side);
            if roster.is_empty() {
                return Err(SpecError::EmptySide { side });
            }
            for unit in roster {
                catalog.stats(&unit.unit_type)?;
                if unit.count == 0 {
                    return Err(SpecError::ZeroCount {
                        side,
                        unit_type: unit.unit_type.clone(),
                    });
                }
                if unit.position.x > width || unit.position.y > height {
                    return Err(SpecError::OutOfBounds {
                        unit_type: unit.unit_type.clone(),
                        x: unit.position.x,
                        y: unit.position.y,
                        width,
                        height,
                    });
                }
                for tech in &unit.technologies {
                    if !catalog.is_grantable(&unit.unit_type, tech) {
                        return Err(SpecError::InapplicableTechnology {
                            unit_type: unit.unit_type.clone(),
                            tech: tech.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Canonical form: validated, rosters sorted, difficulty recomputed.
    pub fn normalized(mut self, catalog: &UnitCatalog) -> Result<Self, SpecError> {
        self.check(catalog)?;
        self.agents.sort();
        self.enemies.sort();
        self.difficulty = self.compute_difficulty(catalog)?;
        Ok(self)
    }

    /// Equality of normalized content. Ignores `id` and the derived difficulty.
    pub fn spec_equals(&self, other: &CurriculumSpec) -> bool {
        let sorted = |units: &[UnitSpec]| {
            let mut v = units.to_vec();
            v.sort();
            v
        };
        self.map == other.map
            && self.objective == other.objective
            && sorted(&self.agents) == sorted(&other.agents)
            && sorted(&self.enemies) == sorted(&other.enemies)
    }

    /// Total count of `unit_type` on one side.
    pub fn count_of(&self, side: Side, unit_type: &UnitType) -> u32 {
        self.roster(side)
            .iter()
            .filter(|u| &u.unit_type == unit_type)
            .map(|u| u.count)
            .sum()
    }

    /// `Marine (5), Marauder (2, Stimpack)` style summary of one side.
    pub fn composition(&self, side: Side) -> String {
        self.roster(side)
            .iter()
            .map(|u| {
                if u.technologies.is_empty() {
                    format!("{} ({})", u.unit_type, u.count)
                } else {
                    let techs: Vec<&str> = u.technologies.iter().map(Tech::as_str).collect();
                    format!("{} ({}, {})", u.unit_type, u.count, techs.join(", "))
                }
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curriculum serializes")
    }

    /// Parses and normalizes; the difficulty field of the input is ignored.
    pub fn from_json(text: &str, catalog: &UnitCatalog) -> Result<Self, String> {
        let spec: CurriculumSpec = serde_json::from_str(text).map_err(|e| e.to_string())?;
        spec.normalized(catalog).map_err(|e| e.to_string())
    }

    /// The engagement the whole run works toward.
    pub fn reference_final_task() -> Self {
        let agents = GridPos::new(5, 25);
        let enemies = GridPos::new(25, 5);
        Self {
            id: "final".to_string(),
            agents: vec![
                UnitSpec::new("Marine", 20, agents, &["Stimpack"]),
                UnitSpec::new("Marauder", 12, agents, &["Stimpack"]),
                UnitSpec::new("Ghost", 3, agents, &["PersonalCloaking"]),
                UnitSpec::new("Medivac", 3, agents, &[]),
                UnitSpec::new("SiegeTank", 2, agents, &["SiegeTech"]),
                UnitSpec::new("VikingFighter", 4, agents, &[]),
                UnitSpec::new("Liberator", 2, agents, &[]),
            ],
            enemies: vec![
                UnitSpec::new("Zealot", 15, enemies, &["Charge"]),
                UnitSpec::new("Stalker", 12, enemies, &["BlinkTech"]),
                UnitSpec::new("HighTemplar", 3, enemies, &["PsiStormTech"]),
                UnitSpec::new("Colossus", 2, enemies, &["ExtendedThermalLance"]),
                UnitSpec::new("Disruptor", 1, enemies, &[]),
            ],
            map: MapSpec::flat(32, 32),
            objective: ObjectiveSpec::default(),
            difficulty: 0.0,
        }
    }
}
