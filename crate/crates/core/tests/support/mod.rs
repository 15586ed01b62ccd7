//! Generators and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;

use curricula_core::arena::BattleState;
use curricula_core::catalog::{UnitCatalog, UnitStats};
use curricula_core::domain::{
    CurriculumSpec, EpisodeMetrics, GridPos, MapSpec, ObjectiveSpec, PerformanceReport, Tech,
    UnitSpec, UnitType,
};
use curricula_core::dsl::{Act, BehaviorTree, Cond, GroupPolicy, Node, Selector};

pub const DUMMY: &str = "Dummy";

/// Shipped catalog plus an unarmed, immobile `Dummy` with `hp` hit points and
/// no armor.
pub fn dummy_catalog(hp: f64) -> UnitCatalog {
    let mut catalog = UnitCatalog::shipped();
    let dummy = UnitStats {
        hp,
        shield: 0.0,
        armor: 0.0,
        damage: 0.0,
        range: 0.0,
        cooldown: 1,
        speed: 0.0,
        sight: 0.0,
        splash: 0.0,
        weight: 1.0,
        flying: false,
        healer: false,
        detector: false,
        targets_ground: false,
        targets_air: false,
        hit_by_anti_air: false,
        abilities: Vec::new(),
        technologies: Vec::new(),
    };
    catalog.units.insert(UnitType::new(DUMMY), dummy);
    catalog
}

/// A flat 32x32 duel between single groups at fixed anchors.
pub fn duel(agents: Vec<UnitSpec>, enemies: Vec<UnitSpec>, catalog: &UnitCatalog) -> CurriculumSpec {
    CurriculumSpec {
        id: "duel".to_string(),
        agents,
        enemies,
        map: MapSpec::flat(32, 32),
        objective: ObjectiveSpec::default(),
        difficulty: 0.0,
    }
    .normalized(catalog)
    .expect("duel is a valid curriculum")
}

/// Spawns `spec` and then moves every unit to an exact position, in unit id
/// order, so hand calculations do not depend on spawn jitter.
pub fn placed(spec: &CurriculumSpec, catalog: &UnitCatalog, positions: &[(f64, f64)]) -> BattleState {
    let mut state = BattleState::new(spec, catalog, 0).expect("state");
    assert_eq!(state.units.len(), positions.len(), "one position per unit");
    for (u, &(x, y)) in state.units.iter_mut().zip(positions) {
        u.pos = curricula_core::arena::Vec2::new(x, y);
    }
    state.refresh_visibility();
    state
}

pub fn metrics(win: bool) -> EpisodeMetrics {
    EpisodeMetrics {
        win,
        ticks: 10,
        damage_dealt: 0.0,
        damage_taken: 0.0,
        surviving_hp_fraction: 0.0,
        seed: 0,
        trace_digest: "0000000000000000".to_string(),
    }
}

/// Report with `wins` wins out of `episodes`.
pub fn report(wins: usize, episodes: usize) -> PerformanceReport {
    PerformanceReport::from_episodes((0..episodes).map(|i| metrics(i < wins)).collect())
}

fn number() -> impl Strategy<Value = f64> {
    prop_oneof![
        (0u32..64).prop_map(f64::from),
        (0u32..640).prop_map(|n| f64::from(n) / 10.0),
        0.0f64..100.0,
    ]
}

fn fraction() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0]
}

fn unit_types(catalog: &UnitCatalog) -> Vec<UnitType> {
    catalog.units.keys().cloned().collect()
}

fn selector(types: Vec<UnitType>) -> impl Strategy<Value = Selector> {
    prop_oneof![
        Just(Selector::NearestEnemy),
        Just(Selector::LowestHpEnemy),
        proptest::sample::select(types).prop_map(Selector::NearestEnemyOfType),
        Just(Selector::NearestInjuredAlly),
        Just(Selector::EnemyCentroid),
        (number(), number()).prop_map(|(x, y)| Selector::Point(x, y)),
    ]
}

fn condition(catalog: &UnitCatalog, unit: &UnitType) -> BoxedStrategy<Cond> {
    let types = unit_types(catalog);
    let held: Vec<Tech> = catalog
        .abilities
        .keys()
        .filter(|t| catalog.can_have(unit, t))
        .cloned()
        .collect();
    let mut leaves = vec![
        number().prop_map(Cond::EnemyInRange).boxed(),
        fraction().prop_map(Cond::HpFracBelow).boxed(),
        Just(Cond::ShieldDepleted).boxed(),
        (proptest::sample::select(types), 0u32..20)
            .prop_map(|(t, n)| Cond::EnemyCountAtLeast(t, n))
            .boxed(),
        number().prop_map(Cond::AllyInjuredWithin).boxed(),
        number().prop_map(Cond::NearestEnemyBeyond).boxed(),
        Just(Cond::InAoeHazard).boxed(),
    ];
    if !held.is_empty() {
        leaves.push(proptest::sample::select(held).prop_map(Cond::AbilityReady).boxed());
    }
    proptest::strategy::Union::new(leaves)
        .prop_recursive(3, 12, 3, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 2..4).prop_map(Cond::And),
                proptest::collection::vec(inner.clone(), 2..4).prop_map(Cond::Or),
                inner.prop_map(|c| Cond::Not(Box::new(c))),
            ]
        })
        .boxed()
}

fn action(catalog: &UnitCatalog, unit: &UnitType) -> BoxedStrategy<Act> {
    let types = unit_types(catalog);
    let castable: Vec<Tech> = catalog
        .abilities
        .keys()
        .filter(|t| catalog.can_cast(unit, t))
        .cloned()
        .collect();
    let mut acts = vec![
        selector(types.clone()).prop_map(Act::Attack).boxed(),
        selector(types.clone()).prop_map(Act::MoveToward).boxed(),
        number().prop_map(Act::Retreat).boxed(),
        Just(Act::Hold).boxed(),
    ];
    if !castable.is_empty() {
        acts.push(
            (proptest::sample::select(castable), proptest::option::of(selector(types.clone())))
                .prop_map(|(t, s)| Act::Cast(t, s))
                .boxed(),
        );
    }
    if catalog.is_healer(unit) {
        acts.push(selector(types).prop_map(Act::Heal).boxed());
    }
    proptest::strategy::Union::new(acts).boxed()
}

fn node(catalog: &UnitCatalog, unit: &UnitType) -> BoxedStrategy<Node> {
    let cond = condition(catalog, unit);
    action(catalog, unit)
        .prop_map(Node::Action)
        .prop_recursive(5, 24, 2, move |inner| {
            (cond.clone(), inner.clone(), inner)
                .prop_map(|(c, t, e)| Node::decision(c, t, e))
        })
        .boxed()
}

/// Trees that pass validation against `catalog`: one to four groups of
/// distinct unit types, abilities only where the type can hold them.
pub fn arb_tree(catalog: &UnitCatalog) -> impl Strategy<Value = BehaviorTree> {
    let catalog = catalog.clone();
    proptest::sample::subsequence(unit_types(&catalog), 1..=4)
        .prop_shuffle()
        .prop_flat_map(move |types| {
            types
                .into_iter()
                .map(|t| {
                    node(&catalog, &t)
                        .prop_map(move |root| GroupPolicy {
                            unit_type: t.clone(),
                            root,
                        })
                        .boxed()
                })
                .collect::<Vec<_>>()
        })
        .prop_map(BehaviorTree::new)
}

/// Raw designer output: any catalog type (plus an unknown one), any count,
/// any technology, arbitrary positions, map and objective.
pub fn arb_candidate(catalog: &UnitCatalog) -> impl Strategy<Value = CurriculumSpec> {
    let mut types = unit_types(catalog);
    types.push(UnitType::new("Dragoon"));
    let techs: Vec<Tech> = catalog.abilities.keys().cloned().collect();
    let entry = (
        proptest::sample::select(types),
        0u32..40,
        (0u32..64, 0u32..64),
        proptest::sample::subsequence(techs.clone(), 0..=3),
    )
        .prop_map(|(t, count, (x, y), techs)| UnitSpec {
            unit_type: t,
            count,
            position: GridPos::new(x, y),
            technologies: techs.into_iter().collect::<BTreeSet<_>>(),
        });
    let roster = proptest::collection::vec(entry, 0..8);
    (
        roster.clone(),
        roster,
        (8u32..64, 8u32..64),
        (1u32..5000, 1u32..10),
    )
        .prop_map(|(agents, enemies, (w, h), (tick_limit, episodes))| CurriculumSpec {
            id: "candidate".to_string(),
            agents,
            enemies,
            map: MapSpec::flat(w, h),
            objective: ObjectiveSpec {
                tick_limit,
                episodes,
                ..ObjectiveSpec::default()
            },
            difficulty: 0.0,
        })
}
