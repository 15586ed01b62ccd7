use std::collections::BTreeSet;

use thiserror::Error;

use super::{Act, BehaviorTree, Cond, Node, Selector};
use crate::catalog::UnitCatalog;
use crate::domain::UnitType;

pub const MAX_DEPTH: usize = 32;
pub const MAX_NODES: usize = 512;

/// Semantic error in a syntactically valid tree; `path` names the node.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("{path}: unknown unit type `{unit_type}`")]
    UnknownUnitType { path: String, unit_type: UnitType },
    #[error("{path}: {reason}")]
    IllegalAbility { path: String, reason: String },
    #[error("{path}: {reason}")]
    TreeTooLarge { path: String, reason: String },
    #[error("{path}: unit type `{unit_type}` already has a group")]
    DuplicateGroup { path: String, unit_type: UnitType },
}

/// Checks catalog membership, ability legality and size caps. Returns the
/// first problem found, walking groups in order and nodes depth first.
pub fn validate(tree: &BehaviorTree, catalog: &UnitCatalog) -> Result<(), ValidationError> {
    let mut seen = BTreeSet::new();
    for group in tree.groups() {
        let path = group.unit_type.to_string();
        if !catalog.contains(&group.unit_type) {
            return Err(ValidationError::UnknownUnitType {
                path,
                unit_type: group.unit_type.clone(),
            });
        }
        if !seen.insert(&group.unit_type) {
            return Err(ValidationError::DuplicateGroup {
                path,
                unit_type: group.unit_type.clone(),
            });
        }
        let depth = group.root.depth();
        if depth > MAX_DEPTH {
            return Err(ValidationError::TreeTooLarge {
                path,
                reason: format!("depth {depth} exceeds {MAX_DEPTH}"),
            });
        }
        let nodes = group.root.node_count();
        if nodes > MAX_NODES {
            return Err(ValidationError::TreeTooLarge {
                path,
                reason: format!("{nodes} nodes exceed {MAX_NODES}"),
            });
        }
        let checker = Checker {
            catalog,
            unit: &group.unit_type,
        };
        checker.node(&group.root, &format!("{path}/root"))?;
    }
    Ok(())
}

struct Checker<'a> {
    catalog: &'a UnitCatalog,
    unit: &'a UnitType,
}

impl Checker<'_> {
    fn known(&self, unit_type: &UnitType, path: &str) -> Result<(), ValidationError> {
        if self.catalog.contains(unit_type) {
            Ok(())
        } else {
            Err(ValidationError::UnknownUnitType {
                path: path.to_string(),
                unit_type: unit_type.clone(),
            })
        }
    }

    fn node(&self, node: &Node, path: &str) -> Result<(), ValidationError> {
        match node {
            Node::Action(a) => self.act(a, path),
            Node::Decision {
                condition,
                then,
                otherwise,
            } => {
                self.cond(condition, &format!("{path}/if"))?;
                self.node(then, &format!("{path}/then"))?;
                self.node(otherwise, &format!("{path}/else"))
            }
        }
    }

    fn cond(&self, c: &Cond, path: &str) -> Result<(), ValidationError> {
        match c {
            Cond::AbilityReady(tech) if !self.catalog.can_have(self.unit, tech) => {
                Err(ValidationError::IllegalAbility {
                    path: path.to_string(),
                    reason: format!("{} can never have {tech}", self.unit),
                })
            }
            Cond::EnemyCountAtLeast(t, _) => self.known(t, path),
            Cond::And(parts) | Cond::Or(parts) => parts
                .iter()
                .enumerate()
                .try_for_each(|(i, p)| self.cond(p, &format!("{path}/{i}"))),
            Cond::Not(inner) => self.cond(inner, &format!("{path}/not")),
            _ => Ok(()),
        }
    }

    fn selector(&self, s: &Selector, path: &str) -> Result<(), ValidationError> {
        match s {
            Selector::NearestEnemyOfType(t) => self.known(t, path),
            _ => Ok(()),
        }
    }

    fn act(&self, a: &Act, path: &str) -> Result<(), ValidationError> {
        match a {
            Act::Cast(tech, target) => {
                if !self.catalog.can_cast(self.unit, tech) {
                    return Err(ValidationError::IllegalAbility {
                        path: path.to_string(),
                        reason: format!("{} cannot cast {tech}", self.unit),
                    });
                }
                target.as_ref().map_or(Ok(()), |s| self.selector(s, path))
            }
            Act::Heal(s) => {
                if !self.catalog.is_healer(self.unit) {
                    return Err(ValidationError::IllegalAbility {
                        path: path.to_string(),
                        reason: format!("{} cannot heal", self.unit),
                    });
                }
                self.selector(s, path)
            }
            Act::Attack(s) | Act::MoveToward(s) => self.selector(s, path),
            Act::Retreat(_) | Act::Hold => Ok(()),
        }
    }
}
