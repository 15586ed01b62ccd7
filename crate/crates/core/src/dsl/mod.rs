//! The behavior-code language.
//!
//! Programs are s-expressions:
//!
//! ```text
//! ; marines stim once enemies close in, then focus the weakest target
//! (tree
//!   (group Marine
//!     (if (and (enemy-in-range 6) (ability-ready Stimpack))
//!       (cast Stimpack)
//!       (attack (lowest-hp-enemy)))))
//! ```
//!
//! [`parse`] is purely syntactic; [`validate`] checks a parsed tree against a
//! unit catalog. [`print`] emits the canonical text that the tree's digest is
//! computed over.

mod parser;
mod printer;
mod reader;
mod validate;

pub use parser::{parse, parse_bytes};
pub use printer::print;
pub use validate::{validate, ValidationError, MAX_DEPTH, MAX_NODES};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::catalog::UnitCatalog;
use crate::digest::fnv1a_hex;
use crate::domain::{Tech, UnitType};

/// A validated or merely parsed decision-tree program.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorTree {
    groups: Vec<GroupPolicy>,
    source_hash: String,
}

impl BehaviorTree {
    pub fn new(groups: Vec<GroupPolicy>) -> Self {
        let source_hash = fnv1a_hex(printer::print_groups(&groups).as_bytes());
        Self {
            groups,
            source_hash,
        }
    }

    /// Every listed unit type attacks the nearest enemy.
    pub fn baseline<'a>(unit_types: impl IntoIterator<Item = &'a UnitType>) -> Self {
        let mut types: Vec<UnitType> = unit_types.into_iter().cloned().collect();
        types.sort();
        types.dedup();
        Self::new(
            types
                .into_iter()
                .map(|unit_type| GroupPolicy {
                    unit_type,
                    root: Node::Action(Act::Attack(Selector::NearestEnemy)),
                })
                .collect(),
        )
    }

    pub fn groups(&self) -> &[GroupPolicy] {
        &self.groups
    }

    /// 16 hex chars of FNV-1a over the canonical text.
    pub fn source_hash(&self) -> &str {
        &self.source_hash
    }

    /// First group controlling `unit_type`.
    pub fn policy_for(&self, unit_type: &UnitType) -> Option<&GroupPolicy> {
        self.groups.iter().find(|g| &g.unit_type == unit_type)
    }
}

impl Serialize for BehaviorTree {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&print(self))
    }
}

impl<'de> Deserialize<'de> for BehaviorTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupPolicy {
    pub unit_type: UnitType,
    pub root: Node,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Decision {
        condition: Cond,
        then: Box<Node>,
        otherwise: Box<Node>,
    },
    Action(Act),
}

impl Node {
    pub fn decision(condition: Cond, then: Node, otherwise: Node) -> Self {
        Node::Decision {
            condition,
            then: Box::new(then),
            otherwise: Box::new(otherwise),
        }
    }

    /// Depth counting this node as 1.
    pub fn depth(&self) -> usize {
        match self {
            Node::Action(_) => 1,
            Node::Decision { then, otherwise, .. } => 1 + then.depth().max(otherwise.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Node::Action(_) => 1,
            Node::Decision { then, otherwise, .. } => 1 + then.node_count() + otherwise.node_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cond {
    EnemyInRange(f64),
    HpFracBelow(f64),
    ShieldDepleted,
    AbilityReady(Tech),
    EnemyCountAtLeast(UnitType, u32),
    AllyInjuredWithin(f64),
    NearestEnemyBeyond(f64),
    InAoeHazard,
    And(Vec<Cond>),
    Or(Vec<Cond>),
    Not(Box<Cond>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Act {
    Attack(Selector),
    MoveToward(Selector),
    Retreat(f64),
    Cast(Tech, Option<Selector>),
    Heal(Selector),
    Hold,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selector {
    NearestEnemy,
    LowestHpEnemy,
    NearestEnemyOfType(UnitType),
    NearestInjuredAlly,
    EnemyCentroid,
    Point(f64, f64),
}

/// Syntax error with a 1-based location inside the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message} (near `{snippet}`)")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub snippet: String,
}

/// Either stage of turning source text into a usable tree.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("validation error: {0}")]
    Validation(#[from] ValidationError),
}

/// Parse then validate.
pub fn compile(source: &str, catalog: &UnitCatalog) -> Result<BehaviorTree, CompileError> {
    let tree = parse(source)?;
    validate(&tree, catalog)?;
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_is_attack_all() {
        let types = [UnitType::new("Marine"), UnitType::new("Medivac")];
        let tree = BehaviorTree::baseline(&types);
        assert_eq!(tree.groups().len(), 2);
        assert_eq!(
            print(&tree),
            "(tree\n  (group Marine\n    (attack (nearest-enemy)))\n  (group Medivac\n    (attack (nearest-enemy))))\n"
        );
    }

    #[test]
    fn identical_source_identical_hash() {
        let a = parse("(tree (group Marine (hold)))").unwrap();
        let b = parse("; comment\n(tree\n (group   Marine (hold)))").unwrap();
        assert_eq!(a.source_hash(), b.source_hash());
        assert_eq!(a.source_hash().len(), 16);
        let c = parse("(tree (group Marine (retreat 1)))").unwrap();
        assert_ne!(a.source_hash(), c.source_hash());
    }

    #[test]
    fn serde_as_canonical_text() {
        let tree = parse("(tree (group Marine (attack (nearest-enemy))))").unwrap();
        let json = serde_json::to_string(&tree).unwrap();
        let back: BehaviorTree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tree);
    }
}
