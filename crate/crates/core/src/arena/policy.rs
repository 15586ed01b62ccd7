use crate::catalog::{Ability, UnitCatalog};
use crate::domain::Tech;
use crate::dsl::{Act, BehaviorTree, Cond, Node, Selector};

use super::state::{BattleState, Unit, Vec2};

/// What one unit does this tick.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    /// Fire at the unit when in range, otherwise close in.
    Attack(usize),
    /// Fire at the nearest target in range, otherwise walk to the point.
    AttackMove(Vec2),
    MoveTo(Vec2),
    Cast(Tech, Vec2),
    /// Restore the ally when in healing range, otherwise approach it.
    Heal(usize),
    Hold,
}

/// Read-only view handed to policies.
#[derive(Clone, Copy)]
pub struct View<'a> {
    pub state: &'a BattleState,
    pub catalog: &'a UnitCatalog,
    pub me: &'a Unit,
}

impl<'a> View<'a> {
    pub fn visible_enemies(&self) -> impl Iterator<Item = &'a Unit> + 'a {
        let (state, side) = (self.state, self.me.side);
        state
            .living(side.opponent())
            .filter(move |u| state.visible_to(side, u))
    }

    pub fn allies(&self) -> impl Iterator<Item = &'a Unit> + 'a {
        let id = self.me.id;
        self.state.living(self.me.side).filter(move |u| u.id != id)
    }

    pub fn enemy_anchor(&self) -> Vec2 {
        self.state.anchors[self.me.side.opponent().index()]
    }

    pub fn own_anchor(&self) -> Vec2 {
        self.state.anchors[self.me.side.index()]
    }

    /// Closest unit by distance, ties broken by lower id.
    pub fn nearest<'b>(&self, units: impl Iterator<Item = &'b Unit>) -> Option<&'b Unit> {
        let here = self.me.pos;
        units.min_by(|a, b| {
            a.pos
                .distance(here)
                .total_cmp(&b.pos.distance(here))
                .then(a.id.cmp(&b.id))
        })
    }

    pub fn nearest_enemy_distance(&self) -> Option<f64> {
        self.nearest(self.visible_enemies())
            .map(|u| u.pos.distance(self.me.pos))
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        p.clamp_to(self.state.width, self.state.height)
    }
}

pub trait Policy: Sync {
    fn decide(&self, view: View<'_>) -> Command;
}

/// Never acts. Used for target dummies.
pub struct Idle;

impl Policy for Idle {
    fn decide(&self, _view: View<'_>) -> Command {
        Command::Hold
    }
}

/// Interprets a behavior tree. Unit types without a group fall back to
/// attacking the nearest enemy.
pub struct TreePolicy<'t> {
    pub tree: &'t BehaviorTree,
}

enum Target {
    Unit(usize),
    Point(Vec2),
}

impl Policy for TreePolicy<'_> {
    fn decide(&self, view: View<'_>) -> Command {
        let Some(group) = self.tree.policy_for(&view.me.unit_type) else {
            return act(view, &Act::Attack(Selector::NearestEnemy));
        };
        let mut node = &group.root;
        loop {
            match node {
                Node::Action(a) => return act(view, a),
                Node::Decision {
                    condition,
                    then,
                    otherwise,
                } => node = if cond(view, condition) { then } else { otherwise },
            }
        }
    }
}

fn cond(view: View<'_>, c: &Cond) -> bool {
    let me = view.me;
    match c {
        Cond::EnemyInRange(r) => view.visible_enemies().any(|e| e.pos.distance(me.pos) <= *r),
        Cond::HpFracBelow(x) => me.hp_fraction() < *x,
        Cond::ShieldDepleted => me.shield <= 0.0,
        Cond::AbilityReady(t) => me.ability_ready(t),
        Cond::EnemyCountAtLeast(t, n) => {
            view.visible_enemies().filter(|e| &e.unit_type == t).count() >= *n as usize
        }
        Cond::AllyInjuredWithin(r) => view
            .allies()
            .any(|a| a.is_injured() && a.pos.distance(me.pos) <= *r),
        Cond::NearestEnemyBeyond(d) => view.nearest_enemy_distance().is_none_or(|x| x > *d),
        Cond::InAoeHazard => view.state.in_hostile_hazard(me.side, me.pos),
        Cond::And(parts) => parts.iter().all(|p| cond(view, p)),
        Cond::Or(parts) => parts.iter().any(|p| cond(view, p)),
        Cond::Not(inner) => !cond(view, inner),
    }
}

/// Resolves a selector. `armed_only` restricts enemy picks to units this
/// unit's weapon can hit. Enemy selectors with nothing visible fall back to
/// the enemy spawn point.
fn select(view: View<'_>, s: &Selector, armed_only: bool) -> Option<Target> {
    let me = view.me;
    let targetable = move |e: &&Unit| !armed_only || me.can_target(e);
    let fallback = || Some(Target::Point(view.enemy_anchor()));
    match s {
        Selector::NearestEnemy => view
            .nearest(view.visible_enemies().filter(targetable))
            .map(|u| Target::Unit(u.id))
            .or_else(fallback),
        Selector::LowestHpEnemy => view
            .visible_enemies()
            .filter(targetable)
            .min_by(|a, b| {
                a.effective_hp()
                    .total_cmp(&b.effective_hp())
                    .then(a.pos.distance(me.pos).total_cmp(&b.pos.distance(me.pos)))
                    .then(a.id.cmp(&b.id))
            })
            .map(|u| Target::Unit(u.id))
            .or_else(fallback),
        Selector::NearestEnemyOfType(t) => view
            .nearest(view.visible_enemies().filter(targetable).filter(|u| &u.unit_type == t))
            .map(|u| Target::Unit(u.id))
            .or_else(fallback),
        Selector::NearestInjuredAlly => view
            .nearest(view.allies().filter(|a| a.is_injured()))
            .map(|u| Target::Unit(u.id)),
        Selector::EnemyCentroid => Vec2::centroid(view.visible_enemies().map(|u| u.pos))
            .map(Target::Point)
            .or_else(fallback),
        Selector::Point(x, y) => Some(Target::Point(view.clamp(Vec2::new(*x, *y)))),
    }
}

fn position(view: View<'_>, t: &Target) -> Vec2 {
    match t {
        Target::Unit(id) => view.state.units[*id].pos,
        Target::Point(p) => *p,
    }
}

fn act(view: View<'_>, a: &Act) -> Command {
    let me = view.me;
    match a {
        Act::Attack(s) => match select(view, s, true) {
            Some(Target::Unit(id)) => Command::Attack(id),
            Some(Target::Point(p)) => Command::AttackMove(p),
            None => Command::Hold,
        },
        Act::MoveToward(s) => match select(view, s, false) {
            Some(t) => Command::MoveTo(position(view, &t)),
            None => Command::Hold,
        },
        Act::Retreat(d) => {
            let hazard = view
                .state
                .hazards
                .iter()
                .find(|h| h.owner != me.side && h.covers(me.pos));
            let to = match (hazard, view.nearest(view.visible_enemies())) {
                (Some(h), _) => me.pos.away_from(h.center, *d),
                (None, Some(e)) => me.pos.away_from(e.pos, *d),
                (None, None) => me.pos.toward(view.own_anchor(), *d),
            };
            Command::MoveTo(view.clamp(to))
        }
        Act::Cast(tech, s) => {
            if !me.ability_ready(tech) {
                return Command::Hold;
            }
            let target = match s {
                Some(s) => select(view, s, false).map(|t| position(view, &t)),
                None => default_cast_target(view, tech),
            };
            target.map_or(Command::Hold, |p| Command::Cast(tech.clone(), p))
        }
        Act::Heal(s) => match select(view, s, false) {
            Some(Target::Unit(id)) if view.state.units[id].side == me.side => Command::Heal(id),
            // Nobody to heal: stay with the army.
            _ => match Vec2::centroid(view.allies().filter(|a| !a.stats.healer).map(|a| a.pos)) {
                Some(p) => Command::MoveTo(p),
                None => Command::Hold,
            },
        },
        Act::Hold => Command::Hold,
    }
}

fn default_cast_target(view: View<'_>, tech: &Tech) -> Option<Vec2> {
    let me = view.me;
    let nearest = view.nearest(view.visible_enemies()).map(|u| u.pos);
    match view.catalog.ability(tech)? {
        Ability::Blink(p) => Some(view.clamp(match nearest {
            Some(e) => me.pos.away_from(e, p.distance),
            None => me.pos.toward(view.enemy_anchor(), p.distance),
        })),
        Ability::Storm(_) | Ability::Nova(_) => nearest,
        _ => Some(me.pos),
    }
}
