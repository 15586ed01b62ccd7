use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{Ability, UnitCatalog, UnitStats};
use crate::digest::Fnv64;
use crate::domain::{CurriculumSpec, GridPos, Side, SpecError, Tech, UnitType};

/// Units spawn within this distance of their roster position.
pub const SPAWN_JITTER: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Moves at most `step` toward `target`, never overshooting.
    pub fn toward(self, target: Vec2, step: f64) -> Vec2 {
        let d = self.distance(target);
        if d <= step || d == 0.0 {
            return target;
        }
        let t = step / d;
        Vec2::new(self.x + (target.x - self.x) * t, self.y + (target.y - self.y) * t)
    }

    /// Point `distance` away from `from`, on the far side of `self`.
    pub fn away_from(self, from: Vec2, distance: f64) -> Vec2 {
        let d = self.distance(from);
        if d == 0.0 {
            return Vec2::new(self.x - distance, self.y + distance);
        }
        Vec2::new(
            self.x + (self.x - from.x) / d * distance,
            self.y + (self.y - from.y) / d * distance,
        )
    }

    pub fn clamp_to(self, width: f64, height: f64) -> Vec2 {
        Vec2::new(self.x.clamp(0.0, width), self.y.clamp(0.0, height))
    }

    pub fn centroid(points: impl IntoIterator<Item = Vec2>) -> Option<Vec2> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for p in points {
            sx += p.x;
            sy += p.y;
            n += 1;
        }
        (n > 0).then(|| Vec2::new(sx / n as f64, sy / n as f64))
    }
}

impl From<GridPos> for Vec2 {
    fn from(p: GridPos) -> Self {
        Vec2::new(f64::from(p.x), f64::from(p.y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub id: usize,
    pub side: Side,
    pub unit_type: UnitType,
    pub stats: UnitStats,
    /// Granted technologies plus innate abilities.
    pub techs: BTreeSet<Tech>,
    pub pos: Vec2,
    pub hp: f64,
    pub shield: f64,
    pub alive: bool,
    pub weapon_cooldown: u32,
    pub ability_cooldowns: BTreeMap<Tech, u32>,
    pub stim_ticks: u32,
    pub charge_ticks: u32,
    pub cloak_ticks: u32,
    pub sieged: bool,
    /// Ticks left in a siege transformation; the unit is inert meanwhile.
    pub transforming: u32,
}

impl Unit {
    pub fn hp_fraction(&self) -> f64 {
        if self.stats.hp > 0.0 {
            self.hp / self.stats.hp
        } else {
            0.0
        }
    }

    pub fn effective_hp(&self) -> f64 {
        self.hp.max(0.0) + self.shield.max(0.0)
    }

    pub fn is_injured(&self) -> bool {
        self.alive && self.hp < self.stats.hp
    }

    pub fn has(&self, tech: &Tech) -> bool {
        self.techs.contains(tech)
    }

    pub fn ability_ready(&self, tech: &Tech) -> bool {
        self.has(tech) && self.ability_cooldowns.get(tech).copied().unwrap_or(0) == 0
    }

    pub fn can_target(&self, other: &Unit) -> bool {
        if other.flying() {
            self.stats.targets_air
        } else {
            self.stats.targets_ground || (other.stats.hit_by_anti_air && self.stats.targets_air)
        }
    }

    pub fn flying(&self) -> bool {
        self.stats.flying
    }

    pub fn is_armed(&self) -> bool {
        self.stats.damage > 0.0 && (self.stats.targets_ground || self.stats.targets_air)
    }
}

/// Weapon profile after technologies and stance are applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weapon {
    pub damage: f64,
    pub range: f64,
    pub splash: f64,
    pub cooldown: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HazardKind {
    Storm { damage_per_tick: f64, ticks_left: u32 },
    /// Detonates once when `fuse` reaches zero.
    Nova { damage: f64, fuse: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hazard {
    pub owner: Side,
    pub center: Vec2,
    pub radius: f64,
    pub kind: HazardKind,
}

impl Hazard {
    pub fn covers(&self, p: Vec2) -> bool {
        self.center.distance(p) <= self.radius
    }
}

/// Running damage accounts for one side.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DamageLedger {
    /// Damage this side applied to living enemy pools.
    pub dealt: f64,
    pub received: f64,
    pub lost: f64,
    /// Damage this side landed on targets already at zero.
    pub overkill: f64,
    pub healed: f64,
    pub stim_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BattleState {
    pub tick: u32,
    pub width: f64,
    pub height: f64,
    pub units: Vec<Unit>,
    pub hazards: Vec<Hazard>,
    /// Spawn point of each side, indexed by [`Side::index`].
    pub anchors: [Vec2; 2],
    pub ledgers: [DamageLedger; 2],
    /// `visible[side][unit]`; rebuilt by [`BattleState::refresh_visibility`].
    visible: [Vec<bool>; 2],
}

impl BattleState {
    /// Places every unit of the curriculum with seeded spawn jitter.
    pub fn new(spec: &CurriculumSpec, catalog: &UnitCatalog, seed: u64) -> Result<Self, SpecError> {
        spec.check(catalog)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (width, height) = (f64::from(spec.map.width), f64::from(spec.map.height));
        let mut units = Vec::new();
        let mut anchors = [Vec2::default(); 2];
        for side in [Side::Agent, Side::Enemy] {
            let roster = spec.roster(side);
            anchors[side.index()] =
                Vec2::centroid(roster.iter().map(|u| Vec2::from(u.position))).unwrap_or_default();
            for entry in roster {
                let stats = catalog.stats(&entry.unit_type)?.clone();
                let mut techs = entry.technologies.clone();
                techs.extend(stats.abilities.iter().cloned());
                for _ in 0..entry.count {
                    let angle = rng.random_range(0.0..std::f64::consts::TAU);
                    let radius = SPAWN_JITTER * rng.random::<f64>().sqrt();
                    let base = Vec2::from(entry.position);
                    let pos = Vec2::new(base.x + radius * angle.cos(), base.y + radius * angle.sin())
                        .clamp_to(width, height);
                    units.push(Unit {
                        id: units.len(),
                        side,
                        unit_type: entry.unit_type.clone(),
                        hp: stats.hp,
                        shield: stats.shield,
                        stats: stats.clone(),
                        techs: techs.clone(),
                        pos,
                        alive: true,
                        weapon_cooldown: 0,
                        ability_cooldowns: BTreeMap::new(),
                        stim_ticks: 0,
                        charge_ticks: 0,
                        cloak_ticks: 0,
                        sieged: false,
                        transforming: 0,
                    });
                }
            }
        }
        let mut state = Self {
            tick: 0,
            width,
            height,
            units,
            hazards: Vec::new(),
            anchors,
            ledgers: [DamageLedger::default(); 2],
            visible: [Vec::new(), Vec::new()],
        };
        state.refresh_visibility();
        Ok(state)
    }

    pub fn living(&self, side: Side) -> impl Iterator<Item = &Unit> + '_ {
        self.units.iter().filter(move |u| u.alive && u.side == side)
    }

    pub fn side_eliminated(&self, side: Side) -> bool {
        self.living(side).next().is_none()
    }

    /// Whether `observer_side` can see `unit`: within sight of one of its
    /// living units, and for cloaked units also within sight of a detector.
    /// Answers from the cache, so call [`BattleState::refresh_visibility`]
    /// after moving units, changing cloaks or killing units by hand.
    pub fn visible_to(&self, observer_side: Side, unit: &Unit) -> bool {
        unit.side == observer_side || self.visible[observer_side.index()][unit.id]
    }

    fn compute_visible(&self, observer_side: Side, unit: &Unit) -> bool {
        if unit.side == observer_side {
            return true;
        }
        let cloaked = unit.cloak_ticks > 0;
        self.living(observer_side).any(|o| {
            o.pos.distance(unit.pos) <= o.stats.sight && (!cloaked || o.stats.detector)
        })
    }

    pub fn refresh_visibility(&mut self) {
        for side in [Side::Agent, Side::Enemy] {
            let v: Vec<bool> = self.units.iter().map(|u| self.compute_visible(side, u)).collect();
            self.visible[side.index()] = v;
        }
    }

    pub fn weapon(&self, unit: &Unit, catalog: &UnitCatalog) -> Weapon {
        let s = &unit.stats;
        let mut w = Weapon {
            damage: s.damage,
            range: s.range,
            splash: s.splash,
            cooldown: s.cooldown,
        };
        for tech in &unit.techs {
            match catalog.ability(tech) {
                Some(Ability::RangeBonus(p)) => w.range += p.bonus,
                Some(Ability::Siege(p)) if unit.sieged => {
                    w.damage = p.damage;
                    w.range = p.range;
                    w.splash = p.splash;
                    w.cooldown = p.cooldown;
                }
                Some(Ability::Stim(p)) if unit.stim_ticks > 0 => {
                    w.cooldown = ((f64::from(w.cooldown) * p.cooldown_multiplier).round() as u32).max(1);
                }
                _ => {}
            }
        }
        w
    }

    pub fn speed(&self, unit: &Unit, catalog: &UnitCatalog) -> f64 {
        if unit.sieged || unit.transforming > 0 {
            return 0.0;
        }
        let mut speed = unit.stats.speed;
        for tech in &unit.techs {
            match catalog.ability(tech) {
                Some(Ability::Stim(p)) if unit.stim_ticks > 0 => speed *= p.speed_multiplier,
                Some(Ability::Charge(p)) if unit.charge_ticks > 0 => speed *= p.speed_multiplier,
                _ => {}
            }
        }
        speed
    }

    /// Whether `p` lies in a hazard placed by the other side.
    pub fn in_hostile_hazard(&self, side: Side, p: Vec2) -> bool {
        self.hazards.iter().any(|h| h.owner != side && h.covers(p))
    }

    /// FNV-1a over the full dynamic state; float fields hash by bit pattern.
    pub fn digest_into(&self, h: &mut Fnv64) {
        h.write_u64(u64::from(self.tick));
        for u in &self.units {
            h.write_u64(u.id as u64);
            h.write_f64(u.pos.x);
            h.write_f64(u.pos.y);
            h.write_f64(u.hp);
            h.write_f64(u.shield);
            h.write_u64(u64::from(u.alive));
            h.write_u64(u64::from(u.weapon_cooldown));
            h.write_u64(u64::from(u.stim_ticks));
            h.write_u64(u64::from(u.cloak_ticks));
            h.write_u64(u64::from(u.sieged));
        }
        for hz in &self.hazards {
            h.write_f64(hz.center.x);
            h.write_f64(hz.center.y);
        }
    }
}
