use crate::catalog::{Ability, UnitCatalog};
use crate::domain::Side;

use super::policy::{Command, Policy, View};
use super::state::{BattleState, Hazard, HazardKind, Vec2};

/// Advances the battle by one tick.
///
/// Every living unit decides on the same snapshot, then the phases resolve
/// in a fixed order: casts, movement (simultaneous), attacks, hazards, heals,
/// timer expiry, death marking. Units killed during a tick still act in that
/// tick. Returns the commands that were issued.
pub fn step(
    state: &mut BattleState,
    catalog: &UnitCatalog,
    agents: &dyn Policy,
    enemies: &dyn Policy,
) -> Vec<Command> {
    state.refresh_visibility();
    let commands: Vec<Command> = state
        .units
        .iter()
        .map(|u| {
            if !u.alive || u.transforming > 0 {
                return Command::Hold;
            }
            let policy = match u.side {
                Side::Agent => agents,
                Side::Enemy => enemies,
            };
            policy.decide(View {
                state,
                catalog,
                me: u,
            })
        })
        .collect();

    let approach = casts(state, catalog, &commands);
    movement(state, catalog, &commands, &approach);
    state.refresh_visibility();
    attacks(state, catalog, &commands);
    hazards(state);
    heals(state, catalog, &commands);
    expire(state);
    mark_deaths(state);
    state.tick += 1;
    state.refresh_visibility();
    commands
}

/// Applies ready casts. Returns, per unit, a point to walk toward when a
/// targeted cast was out of range.
fn casts(state: &mut BattleState, catalog: &UnitCatalog, commands: &[Command]) -> Vec<Option<(Vec2, f64)>> {
    let mut approach = vec![None; state.units.len()];
    for (i, cmd) in commands.iter().enumerate() {
        let Command::Cast(tech, target) = cmd else {
            continue;
        };
        let (w, h) = (state.width, state.height);
        let u = &mut state.units[i];
        if !u.ability_ready(tech) {
            continue;
        }
        let Some(ability) = catalog.ability(tech) else {
            continue;
        };
        let cooldown = match ability {
            Ability::Stim(p) => {
                if u.hp <= p.hp_cost {
                    continue;
                }
                u.hp -= p.hp_cost;
                state.ledgers[u.side.index()].stim_cost += p.hp_cost;
                u.stim_ticks = p.duration;
                p.duration
            }
            Ability::Siege(p) => {
                // Sieging is one way: the ability never becomes ready again.
                u.sieged = true;
                u.transforming = p.transform_delay;
                u32::MAX
            }
            Ability::Blink(p) => {
                u.pos = u.pos.toward(*target, p.distance).clamp_to(w, h);
                p.cooldown
            }
            Ability::Charge(p) => {
                u.charge_ticks = p.duration;
                p.cooldown
            }
            Ability::Cloak(p) => {
                u.cloak_ticks = p.duration;
                p.cooldown
            }
            Ability::Storm(p) => {
                if u.pos.distance(*target) > p.cast_range {
                    approach[i] = Some((*target, p.cast_range));
                    continue;
                }
                let hazard = Hazard {
                    owner: u.side,
                    center: *target,
                    radius: p.radius,
                    kind: HazardKind::Storm {
                        damage_per_tick: p.damage_per_tick,
                        ticks_left: p.duration,
                    },
                };
                state.hazards.push(hazard);
                p.cooldown
            }
            Ability::Nova(p) => {
                if u.pos.distance(*target) > p.cast_range {
                    approach[i] = Some((*target, p.cast_range));
                    continue;
                }
                let hazard = Hazard {
                    owner: u.side,
                    center: *target,
                    radius: p.radius,
                    kind: HazardKind::Nova {
                        damage: p.damage,
                        fuse: p.travel_ticks,
                    },
                };
                state.hazards.push(hazard);
                p.cooldown
            }
            Ability::Heal(_) | Ability::RangeBonus(_) => continue,
        };
        let u = &mut state.units[i];
        u.ability_cooldowns.insert(tech.clone(), cooldown);
    }
    approach
}

fn heal_range(state: &BattleState, catalog: &UnitCatalog, i: usize) -> Option<(f64, f64)> {
    state.units[i].techs.iter().find_map(|t| match catalog.ability(t) {
        Some(Ability::Heal(p)) => Some((p.rate, p.range)),
        _ => None,
    })
}

/// Nearest living, visible enemy this unit's weapon can hit within `range`.
fn target_in_range(state: &BattleState, i: usize, range: f64) -> Option<usize> {
    let me = &state.units[i];
    state
        .units
        .iter()
        .filter(|e| {
            e.alive
                && e.side != me.side
                && me.can_target(e)
                && state.visible_to(me.side, e)
                && e.pos.distance(me.pos) <= range
        })
        .min_by(|a, b| {
            a.pos
                .distance(me.pos)
                .total_cmp(&b.pos.distance(me.pos))
                .then(a.id.cmp(&b.id))
        })
        .map(|e| e.id)
}

fn movement(
    state: &mut BattleState,
    catalog: &UnitCatalog,
    commands: &[Command],
    approach: &[Option<(Vec2, f64)>],
) {
    let mut next: Vec<Vec2> = state.units.iter().map(|u| u.pos).collect();
    for (i, cmd) in commands.iter().enumerate() {
        let u = &state.units[i];
        if !u.alive {
            continue;
        }
        let speed = state.speed(u, catalog);
        if speed <= 0.0 {
            continue;
        }
        // Destination and the distance to stop short of it.
        let goal = match cmd {
            Command::Attack(t) => {
                let range = if u.is_armed() {
                    state.weapon(u, catalog).range
                } else {
                    0.0
                };
                Some((state.units[*t].pos, range))
            }
            Command::AttackMove(p) => {
                let range = state.weapon(u, catalog).range;
                if u.is_armed() && target_in_range(state, i, range).is_some() {
                    None
                } else {
                    Some((*p, 0.0))
                }
            }
            Command::MoveTo(p) => Some((*p, 0.0)),
            Command::Heal(t) => {
                let range = heal_range(state, catalog, i).map_or(0.0, |(_, r)| r);
                Some((state.units[*t].pos, range))
            }
            Command::Cast(..) => approach[i],
            Command::Hold => None,
        };
        if let Some((to, stop)) = goal {
            let gap = u.pos.distance(to) - stop;
            if gap > 0.0 {
                next[i] = u.pos.toward(to, speed.min(gap)).clamp_to(state.width, state.height);
            }
        }
    }
    for (u, p) in state.units.iter_mut().zip(next) {
        u.pos = p;
    }
}

/// Applies `amount` to `target`, shields first. `armor` is subtracted
/// beforehand with a floor of one point per hit.
fn hit(state: &mut BattleState, from: Side, target: usize, amount: f64, pierce_armor: bool) {
    let t = &mut state.units[target];
    let effective = if pierce_armor {
        amount
    } else {
        (amount - t.stats.armor).max(1.0)
    };
    let absorbed = t.shield.max(0.0).min(effective);
    t.shield -= absorbed;
    let rest = effective - absorbed;
    let to_hp = t.hp.max(0.0).min(rest);
    t.hp -= to_hp;
    let applied = absorbed + to_hp;
    let target_side = t.side;
    state.ledgers[from.index()].dealt += applied;
    state.ledgers[from.index()].overkill += effective - applied;
    state.ledgers[target_side.index()].received += applied;
}

fn attacks(state: &mut BattleState, catalog: &UnitCatalog, commands: &[Command]) {
    for (i, cmd) in commands.iter().enumerate() {
        let u = &state.units[i];
        if !u.alive || !u.is_armed() || u.weapon_cooldown > 0 || u.transforming > 0 {
            continue;
        }
        let weapon = state.weapon(u, catalog);
        let target = match cmd {
            Command::Attack(t) => {
                let e = &state.units[*t];
                (e.alive
                    && u.can_target(e)
                    && state.visible_to(u.side, e)
                    && e.pos.distance(u.pos) <= weapon.range)
                    .then_some(*t)
                    // Sieged units cannot close in, so they take what is in range.
                    .or_else(|| target_in_range(state, i, weapon.range).filter(|_| u.sieged))
            }
            Command::AttackMove(_) => target_in_range(state, i, weapon.range),
            _ => None,
        };
        let Some(t) = target else { continue };
        let side = u.side;
        let center = state.units[t].pos;
        hit(state, side, t, weapon.damage, false);
        if weapon.splash > 0.0 {
            let splashed: Vec<usize> = state
                .units
                .iter()
                .filter(|o| {
                    o.id != t
                        && o.alive
                        && o.side != side
                        && state.units[i].can_target(o)
                        && o.pos.distance(center) <= weapon.splash
                })
                .map(|o| o.id)
                .collect();
            for o in splashed {
                hit(state, side, o, weapon.damage, false);
            }
        }
        state.units[i].weapon_cooldown = weapon.cooldown;
    }
}

fn hazards(state: &mut BattleState) {
    for k in 0..state.hazards.len() {
        let hz = state.hazards[k].clone();
        let damage = match hz.kind {
            HazardKind::Storm {
                damage_per_tick,
                ticks_left,
            } if ticks_left > 0 => Some(damage_per_tick),
            HazardKind::Nova { damage, fuse: 0 } => Some(damage),
            _ => None,
        };
        if let Some(amount) = damage {
            let victims: Vec<usize> = state
                .units
                .iter()
                .filter(|u| u.alive && u.side != hz.owner && hz.covers(u.pos))
                .map(|u| u.id)
                .collect();
            for v in victims {
                hit(state, hz.owner, v, amount, true);
            }
        }
        match &mut state.hazards[k].kind {
            HazardKind::Storm { ticks_left, .. } => *ticks_left = ticks_left.saturating_sub(1),
            HazardKind::Nova { fuse, .. } => {
                if *fuse > 0 {
                    *fuse -= 1;
                } else {
                    // Spent; dropped during expiry.
                    *fuse = u32::MAX;
                }
            }
        }
    }
}

fn heals(state: &mut BattleState, catalog: &UnitCatalog, commands: &[Command]) {
    for (i, cmd) in commands.iter().enumerate() {
        let Command::Heal(t) = cmd else { continue };
        if !state.units[i].alive {
            continue;
        }
        let Some((rate, range)) = heal_range(state, catalog, i) else {
            continue;
        };
        let (pos, side) = (state.units[i].pos, state.units[i].side);
        let target = &mut state.units[*t];
        if target.hp <= 0.0 || target.side != side || target.pos.distance(pos) > range {
            continue;
        }
        let amount = rate.min(target.stats.hp - target.hp).max(0.0);
        target.hp += amount;
        state.ledgers[side.index()].healed += amount;
    }
}

fn expire(state: &mut BattleState) {
    for u in &mut state.units {
        u.weapon_cooldown = u.weapon_cooldown.saturating_sub(1);
        for cd in u.ability_cooldowns.values_mut() {
            if *cd != u32::MAX {
                *cd = cd.saturating_sub(1);
            }
        }
        u.stim_ticks = u.stim_ticks.saturating_sub(1);
        u.charge_ticks = u.charge_ticks.saturating_sub(1);
        u.cloak_ticks = u.cloak_ticks.saturating_sub(1);
        u.transforming = u.transforming.saturating_sub(1);
    }
    state.hazards.retain(|h| match h.kind {
        HazardKind::Storm { ticks_left, .. } => ticks_left > 0,
        HazardKind::Nova { fuse, .. } => fuse != u32::MAX,
    });
}

fn mark_deaths(state: &mut BattleState) {
    for u in &mut state.units {
        if u.alive && u.hp <= 0.0 {
            u.alive = false;
            state.ledgers[u.side.index()].lost += u.stats.hp + u.stats.shield;
        }
    }
}
