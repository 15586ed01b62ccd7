//! Fixed scripted behavior for the enemy side.

use crate::catalog::Ability;

use super::policy::{Command, Policy, View};
use super::state::Unit;

/// Minimum number of agents a storm must cover before it is cast.
pub const STORM_MIN_TARGETS: usize = 3;
/// Minimum number of agents a nova must cover before it is fired.
pub const NOVA_MIN_TARGETS: usize = 2;

/// Focus fire on the weakest agent in range (ties to the lowest id),
/// otherwise advance on the nearest one. Abilities fire opportunistically:
/// blink away when badly hurt, charge on approach, storm and nova on clumps.
pub struct ScriptedOpponent;

impl Policy for ScriptedOpponent {
    fn decide(&self, view: View<'_>) -> Command {
        let me = view.me;
        let nearest = view.nearest(view.visible_enemies());
        for tech in &me.techs {
            if !me.ability_ready(tech) {
                continue;
            }
            match view.catalog.ability(tech) {
                Some(Ability::Blink(p)) if me.hp_fraction() < p.trigger_hp_fraction => {
                    if let Some(e) = nearest {
                        let to = view.clamp(me.pos.away_from(e.pos, p.distance));
                        return Command::Cast(tech.clone(), to);
                    }
                }
                Some(Ability::Charge(p)) => {
                    if let Some(e) = nearest {
                        let d = e.pos.distance(me.pos);
                        if d <= p.trigger_range && d > me.stats.range {
                            return Command::Cast(tech.clone(), e.pos);
                        }
                    }
                }
                Some(Ability::Storm(p)) => {
                    if let Some(c) = best_cluster(&view, p.cast_range, p.radius, STORM_MIN_TARGETS) {
                        return Command::Cast(tech.clone(), c.pos);
                    }
                }
                Some(Ability::Nova(p)) => {
                    if let Some(c) = best_cluster(&view, p.cast_range, p.radius, NOVA_MIN_TARGETS) {
                        return Command::Cast(tech.clone(), c.pos);
                    }
                }
                _ => {}
            }
        }

        if me.is_armed() {
            let range = view.state.weapon(me, view.catalog).range;
            let weakest = view
                .visible_enemies()
                .filter(|e| me.can_target(e) && e.pos.distance(me.pos) <= range)
                .min_by(|a, b| a.effective_hp().total_cmp(&b.effective_hp()).then(a.id.cmp(&b.id)));
            if let Some(t) = weakest {
                return Command::Attack(t.id);
            }
            if let Some(t) = view.nearest(view.visible_enemies().filter(|e| me.can_target(e))) {
                return Command::Attack(t.id);
            }
        } else if let Some(e) = nearest {
            // Unarmed casters keep pace with the fight just inside cast range.
            let reach = me
                .techs
                .iter()
                .filter_map(|t| match view.catalog.ability(t) {
                    Some(Ability::Nova(p)) => Some(p.cast_range),
                    Some(Ability::Storm(p)) => Some(p.cast_range),
                    _ => None,
                })
                .fold(0.0, f64::max);
            if e.pos.distance(me.pos) <= reach - 1.0 {
                return Command::Hold;
            }
            return Command::MoveTo(e.pos);
        }
        match nearest {
            Some(e) => Command::MoveTo(e.pos),
            None => Command::MoveTo(view.enemy_anchor()),
        }
    }
}

/// Visible agent within `cast_range` whose surroundings hold the most agents
/// within `radius`, provided there are at least `min` of them.
fn best_cluster<'a>(view: &View<'a>, cast_range: f64, radius: f64, min: usize) -> Option<&'a Unit> {
    let enemies: Vec<&Unit> = view.visible_enemies().collect();
    enemies
        .iter()
        .filter(|c| c.pos.distance(view.me.pos) <= cast_range)
        .map(|c| {
            let n = enemies.iter().filter(|o| o.pos.distance(c.pos) <= radius).count();
            (n, *c)
        })
        .filter(|(n, _)| *n >= min)
        .max_by(|(na, a), (nb, b)| na.cmp(nb).then(b.id.cmp(&a.id)))
        .map(|(_, c)| c)
}
