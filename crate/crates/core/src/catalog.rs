//! Unit and ability catalog.
//!
//! Every number the arena uses comes from here. The shipped catalog is
//! embedded at compile time; operators may point the engine at their own
//! file with the same layout.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Tech, UnitType};

const SHIPPED: &str = include_str!("../data/catalog.toml");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("failed to read catalog {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed catalog: {0}")]
    Parse(String),
    #[error("catalog entry {entry}: field `{field}` {reason}")]
    Invalid {
        entry: String,
        field: String,
        reason: String,
    },
    #[error("unit type `{0}` is not in the catalog")]
    UnknownUnitType(UnitType),
    #[error("technology `{0}` is not in the catalog")]
    UnknownTechnology(Tech),
}

/// Per-unit-type combat statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitStats {
    pub hp: f64,
    pub shield: f64,
    pub armor: f64,
    pub damage: f64,
    pub range: f64,
    pub cooldown: u32,
    pub speed: f64,
    pub sight: f64,
    pub splash: f64,
    /// Contribution of one unit of this type to curriculum difficulty.
    pub weight: f64,
    pub flying: bool,
    pub healer: bool,
    pub detector: bool,
    pub targets_ground: bool,
    pub targets_air: bool,
    /// Ground unit that anti-air weapons may also hit.
    pub hit_by_anti_air: bool,
    pub abilities: Vec<Tech>,
    pub technologies: Vec<Tech>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimParams {
    pub hp_cost: f64,
    pub cooldown_multiplier: f64,
    pub speed_multiplier: f64,
    pub duration: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HealParams {
    pub rate: f64,
    pub range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiegeParams {
    pub range: f64,
    pub damage: f64,
    pub splash: f64,
    pub cooldown: u32,
    pub transform_delay: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlinkParams {
    pub distance: f64,
    pub trigger_hp_fraction: f64,
    pub cooldown: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeParams {
    pub speed_multiplier: f64,
    pub duration: u32,
    pub cooldown: u32,
    pub trigger_range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StormParams {
    pub damage_per_tick: f64,
    pub radius: f64,
    pub duration: u32,
    pub cast_range: f64,
    pub cooldown: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NovaParams {
    pub damage: f64,
    pub radius: f64,
    pub travel_ticks: u32,
    pub cast_range: f64,
    pub cooldown: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloakParams {
    pub duration: u32,
    pub cooldown: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeBonusParams {
    pub bonus: f64,
}

/// Effect of a technology or innate ability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ability {
    Stim(StimParams),
    Heal(HealParams),
    Siege(SiegeParams),
    Blink(BlinkParams),
    Charge(ChargeParams),
    Storm(StormParams),
    Nova(NovaParams),
    Cloak(CloakParams),
    RangeBonus(RangeBonusParams),
}

impl Ability {
    /// Whether a behavior tree may issue this ability through `cast`.
    pub fn is_castable(&self) -> bool {
        !matches!(self, Ability::Heal(_) | Ability::RangeBonus(_))
    }

    fn numeric_fields(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Ability::Stim(p) => vec![
                ("hp_cost", p.hp_cost),
                ("cooldown_multiplier", p.cooldown_multiplier),
                ("speed_multiplier", p.speed_multiplier),
            ],
            Ability::Heal(p) => vec![("rate", p.rate), ("range", p.range)],
            Ability::Siege(p) => vec![
                ("range", p.range),
                ("damage", p.damage),
                ("splash", p.splash),
            ],
            Ability::Blink(p) => vec![
                ("distance", p.distance),
                ("trigger_hp_fraction", p.trigger_hp_fraction),
            ],
            Ability::Charge(p) => vec![
                ("speed_multiplier", p.speed_multiplier),
                ("trigger_range", p.trigger_range),
            ],
            Ability::Storm(p) => vec![
                ("damage_per_tick", p.damage_per_tick),
                ("radius", p.radius),
                ("cast_range", p.cast_range),
            ],
            Ability::Nova(p) => vec![
                ("damage", p.damage),
                ("radius", p.radius),
                ("cast_range", p.cast_range),
            ],
            Ability::Cloak(_) => vec![],
            Ability::RangeBonus(p) => vec![("bonus", p.bonus)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitCatalog {
    pub units: BTreeMap<UnitType, UnitStats>,
    pub abilities: BTreeMap<Tech, Ability>,
}

impl UnitCatalog {
    /// The catalog bundled with the engine.
    pub fn shipped() -> Self {
        Self::from_toml_str(SHIPPED).expect("shipped catalog is valid")
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|e| CatalogError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CatalogError> {
        let catalog: UnitCatalog =
            toml::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
        catalog.check()?;
        Ok(catalog)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("catalog serializes")
    }

    /// Checks the cross-references and numeric ranges the arena relies on.
    pub fn check(&self) -> Result<(), CatalogError> {
        let invalid = |entry: &str, field: &str, reason: &str| CatalogError::Invalid {
            entry: entry.to_string(),
            field: field.to_string(),
            reason: reason.to_string(),
        };
        for (name, stats) in &self.units {
            let numbers = [
                ("hp", stats.hp),
                ("shield", stats.shield),
                ("armor", stats.armor),
                ("damage", stats.damage),
                ("range", stats.range),
                ("speed", stats.speed),
                ("sight", stats.sight),
                ("splash", stats.splash),
                ("weight", stats.weight),
            ];
            for (field, value) in numbers {
                if !value.is_finite() || value < 0.0 {
                    return Err(invalid(name.as_str(), field, "must be finite and nonnegative"));
                }
            }
            if stats.hp <= 0.0 {
                return Err(invalid(name.as_str(), "hp", "must be positive"));
            }
            if stats.cooldown == 0 {
                return Err(invalid(name.as_str(), "cooldown", "must be at least one tick"));
            }
            for tech in stats.abilities.iter().chain(&stats.technologies) {
                if !self.abilities.contains_key(tech) {
                    return Err(CatalogError::UnknownTechnology(tech.clone()));
                }
            }
            let heals = stats
                .abilities
                .iter()
                .any(|t| matches!(self.abilities.get(t), Some(Ability::Heal(_))));
            if stats.healer != heals {
                return Err(invalid(
                    name.as_str(),
                    "healer",
                    "must be set exactly when the unit has an innate heal ability",
                ));
            }
        }
        for (name, ability) in &self.abilities {
            for (field, value) in ability.numeric_fields() {
                if !value.is_finite() || value < 0.0 {
                    return Err(invalid(name.as_str(), field, "must be finite and nonnegative"));
                }
            }
        }
        Ok(())
    }

    pub fn stats(&self, unit_type: &UnitType) -> Result<&UnitStats, CatalogError> {
        self.units
            .get(unit_type)
            .ok_or_else(|| CatalogError::UnknownUnitType(unit_type.clone()))
    }

    pub fn contains(&self, unit_type: &UnitType) -> bool {
        self.units.contains_key(unit_type)
    }

    pub fn weight(&self, unit_type: &UnitType) -> Result<f64, CatalogError> {
        self.stats(unit_type).map(|s| s.weight)
    }

    pub fn ability(&self, tech: &Tech) -> Option<&Ability> {
        self.abilities.get(tech)
    }

    /// A technology a curriculum may grant to this unit type.
    pub fn is_grantable(&self, unit_type: &UnitType, tech: &Tech) -> bool {
        self.units
            .get(unit_type)
            .is_some_and(|s| s.technologies.contains(tech))
    }

    /// Granted technology or innate ability.
    pub fn can_have(&self, unit_type: &UnitType, tech: &Tech) -> bool {
        self.units
            .get(unit_type)
            .is_some_and(|s| s.technologies.contains(tech) || s.abilities.contains(tech))
    }

    pub fn can_cast(&self, unit_type: &UnitType, tech: &Tech) -> bool {
        self.can_have(unit_type, tech)
            && self.ability(tech).is_some_and(Ability::is_castable)
    }

    pub fn is_healer(&self, unit_type: &UnitType) -> bool {
        self.units.get(unit_type).is_some_and(|s| s.healer)
    }

    /// One summary line per unit type, used in planner prompts.
    pub fn describe(&self, unit_type: &UnitType) -> Option<String> {
        let s = self.units.get(unit_type)?;
        let mut flags = Vec::new();
        if s.flying {
            flags.push("flying");
        }
        if s.healer {
            flags.push("healer");
        }
        if s.detector {
            flags.push("detector");
        }
        if s.hit_by_anti_air {
            flags.push("hit-by-anti-air");
        }
        let targets = match (s.targets_ground, s.targets_air) {
            (true, true) => "ground+air",
            (true, false) => "ground",
            (false, true) => "air",
            (false, false) => "none",
        };
        let list = |v: &[Tech]| {
            if v.is_empty() {
                "none".to_string()
            } else {
                v.iter().map(Tech::as_str).collect::<Vec<_>>().join(", ")
            }
        };
        Some(format!(
            "{unit_type}: hp {} shield {} armor {} damage {} range {} cooldown {} speed {} sight {} targets {targets} flags [{}] innate [{}] technologies [{}]",
            s.hp,
            s.shield,
            s.armor,
            s.damage,
            s.range,
            s.cooldown,
            s.speed,
            s.sight,
            flags.join(", "),
            list(&s.abilities),
            list(&s.technologies),
        ))
    }
}
