use std::fmt::Write;

use super::{Act, BehaviorTree, Cond, GroupPolicy, Node, Selector};

/// Canonical text: decisions break across lines, everything else stays inline.
pub fn print(tree: &BehaviorTree) -> String {
    print_groups(tree.groups())
}

pub(super) fn print_groups(groups: &[GroupPolicy]) -> String {
    let mut out = String::from("(tree");
    for g in groups {
        let _ = write!(out, "\n  (group {}\n", g.unit_type);
        node(&mut out, &g.root, 4);
        out.push(')');
    }
    out.push_str(")\n");
    out
}

fn node(out: &mut String, n: &Node, indent: usize) {
    out.extend(std::iter::repeat_n(' ', indent));
    match n {
        Node::Action(a) => act(out, a),
        Node::Decision {
            condition,
            then,
            otherwise,
        } => {
            out.push_str("(if ");
            cond(out, condition);
            out.push('\n');
            node(out, then, indent + 2);
            out.push('\n');
            node(out, otherwise, indent + 2);
            out.push(')');
        }
    }
}

fn cond(out: &mut String, c: &Cond) {
    match c {
        Cond::EnemyInRange(r) => {
            let _ = write!(out, "(enemy-in-range {r})");
        }
        Cond::HpFracBelow(x) => {
            let _ = write!(out, "(hp-frac-below {x})");
        }
        Cond::ShieldDepleted => out.push_str("(shield-depleted)"),
        Cond::AbilityReady(t) => {
            let _ = write!(out, "(ability-ready {t})");
        }
        Cond::EnemyCountAtLeast(t, n) => {
            let _ = write!(out, "(enemy-count-at-least {t} {n})");
        }
        Cond::AllyInjuredWithin(r) => {
            let _ = write!(out, "(ally-injured-within {r})");
        }
        Cond::NearestEnemyBeyond(d) => {
            let _ = write!(out, "(nearest-enemy-beyond {d})");
        }
        Cond::InAoeHazard => out.push_str("(in-aoe-hazard)"),
        Cond::And(parts) | Cond::Or(parts) => {
            out.push_str(if matches!(c, Cond::And(_)) { "(and" } else { "(or" });
            for p in parts {
                out.push(' ');
                cond(out, p);
            }
            out.push(')');
        }
        Cond::Not(inner) => {
            out.push_str("(not ");
            cond(out, inner);
            out.push(')');
        }
    }
}

fn act(out: &mut String, a: &Act) {
    match a {
        Act::Attack(s) => {
            out.push_str("(attack ");
            selector(out, s);
            out.push(')');
        }
        Act::MoveToward(s) => {
            out.push_str("(move-toward ");
            selector(out, s);
            out.push(')');
        }
        Act::Retreat(d) => {
            let _ = write!(out, "(retreat {d})");
        }
        Act::Cast(t, target) => {
            let _ = write!(out, "(cast {t}");
            if let Some(s) = target {
                out.push(' ');
                selector(out, s);
            }
            out.push(')');
        }
        Act::Heal(s) => {
            out.push_str("(heal ");
            selector(out, s);
            out.push(')');
        }
        Act::Hold => out.push_str("(hold)"),
    }
}

fn selector(out: &mut String, s: &Selector) {
    match s {
        Selector::NearestEnemy => out.push_str("(nearest-enemy)"),
        Selector::LowestHpEnemy => out.push_str("(lowest-hp-enemy)"),
        Selector::NearestEnemyOfType(t) => {
            let _ = write!(out, "(nearest-enemy-of-type {t})");
        }
        Selector::NearestInjuredAlly => out.push_str("(nearest-injured-ally)"),
        Selector::EnemyCentroid => out.push_str("(enemy-centroid)"),
        Selector::Point(x, y) => {
            let _ = write!(out, "(point {x} {y})");
        }
    }
}
