use super::reader::{read, snippet_at, SExpr, SExprKind};
use super::{Act, BehaviorTree, Cond, GroupPolicy, Node, ParseError, Selector};
use crate::domain::{Tech, UnitType};

/// Parses source text into a tree. Never panics.
pub fn parse(source: &str) -> Result<BehaviorTree, ParseError> {
    let top = read(source)?;
    Parser { source }.program(&top)
}

/// Like [`parse`], for input that may not be valid UTF-8.
pub fn parse_bytes(bytes: &[u8]) -> Result<BehaviorTree, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let valid = std::str::from_utf8(&bytes[..e.valid_up_to()]).unwrap_or_default();
            let line = valid.matches('\n').count() + 1;
            let column = valid.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            Err(ParseError {
                line,
                column,
                message: "input is not valid UTF-8".to_string(),
                snippet: String::new(),
            })
        }
    }
}

struct Parser<'a> {
    source: &'a str,
}

impl Parser<'_> {
    fn err(&self, at: &SExpr, message: impl Into<String>) -> ParseError {
        ParseError {
            line: at.line,
            column: at.column,
            message: message.into(),
            snippet: snippet_at(self.source, at.line, at.column),
        }
    }

    /// Splits `(head args...)` into its head keyword and arguments.
    fn form<'e>(&self, e: &'e SExpr, what: &str) -> Result<(&'e str, &'e [SExpr]), ParseError> {
        match &e.kind {
            SExprKind::List(items) => match items.first() {
                Some(SExpr {
                    kind: SExprKind::Atom(head),
                    ..
                }) => Ok((head.as_str(), &items[1..])),
                Some(other) => Err(self.err(other, format!("expected a keyword at the head of {what}"))),
                None => Err(self.err(e, format!("expected {what}, found `()`"))),
            },
            SExprKind::Atom(a) => Err(self.err(e, format!("expected {what}, found `{a}`"))),
        }
    }

    fn arity(&self, e: &SExpr, head: &str, args: &[SExpr], n: usize) -> Result<(), ParseError> {
        if args.len() == n {
            Ok(())
        } else {
            Err(self.err(
                e,
                format!("`{head}` takes {n} argument(s), found {}", args.len()),
            ))
        }
    }

    fn atom<'e>(&self, e: &'e SExpr, what: &str) -> Result<&'e str, ParseError> {
        match &e.kind {
            SExprKind::Atom(a) => Ok(a),
            SExprKind::List(_) => Err(self.err(e, format!("expected {what}, found a list"))),
        }
    }

    fn ident(&self, e: &SExpr, what: &str) -> Result<String, ParseError> {
        let a = self.atom(e, what)?;
        let mut chars = a.chars();
        let ok = chars.next().is_some_and(|c| c.is_ascii_uppercase())
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if ok {
            Ok(a.to_string())
        } else {
            Err(self.err(e, format!("expected {what} (UpperCamelCase identifier), found `{a}`")))
        }
    }

    fn number(&self, e: &SExpr, what: &str) -> Result<f64, ParseError> {
        let a = self.atom(e, what)?;
        let (int, frac) = match a.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (a, None),
        };
        let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        if !digits(int) || frac.is_some_and(|f| !digits(f)) {
            return Err(self.err(e, format!("expected {what} (nonnegative number), found `{a}`")));
        }
        match a.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(e, format!("{what} `{a}` is not a finite number"))),
        }
    }

    fn fraction(&self, e: &SExpr, what: &str) -> Result<f64, ParseError> {
        let v = self.number(e, what)?;
        if v > 1.0 {
            return Err(self.err(e, format!("{what} must lie in [0, 1], found {v}")));
        }
        Ok(v)
    }

    fn integer(&self, e: &SExpr, what: &str) -> Result<u32, ParseError> {
        let a = self.atom(e, what)?;
        if !a.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.err(e, format!("expected {what} (integer), found `{a}`")));
        }
        a.parse::<u32>()
            .map_err(|_| self.err(e, format!("{what} `{a}` is out of range")))
    }

    fn program(&self, e: &SExpr) -> Result<BehaviorTree, ParseError> {
        let (head, args) = self.form(e, "a `(tree ...)` program")?;
        if head != "tree" {
            return Err(self.err(e, format!("program must start with `tree`, found `{head}`")));
        }
        if args.is_empty() {
            return Err(self.err(e, "`tree` needs at least one group"));
        }
        let groups = args
            .iter()
            .map(|g| self.group(g))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BehaviorTree::new(groups))
    }

    fn group(&self, e: &SExpr) -> Result<GroupPolicy, ParseError> {
        let (head, args) = self.form(e, "a `(group ...)` form")?;
        if head != "group" {
            return Err(self.err(e, format!("expected `group`, found `{head}`")));
        }
        self.arity(e, head, args, 2)?;
        Ok(GroupPolicy {
            unit_type: UnitType::new(self.ident(&args[0], "unit type")?),
            root: self.node(&args[1])?,
        })
    }

    fn node(&self, e: &SExpr) -> Result<Node, ParseError> {
        let (head, args) = self.form(e, "a decision or action")?;
        if head == "if" {
            self.arity(e, head, args, 3)?;
            return Ok(Node::decision(
                self.cond(&args[0])?,
                self.node(&args[1])?,
                self.node(&args[2])?,
            ));
        }
        self.action(e, head, args).map(Node::Action)
    }

    fn action(&self, e: &SExpr, head: &str, args: &[SExpr]) -> Result<Act, ParseError> {
        Ok(match head {
            "attack" => {
                self.arity(e, head, args, 1)?;
                Act::Attack(self.selector(&args[0])?)
            }
            "move-toward" => {
                self.arity(e, head, args, 1)?;
                Act::MoveToward(self.selector(&args[0])?)
            }
            "retreat" => {
                self.arity(e, head, args, 1)?;
                Act::Retreat(self.number(&args[0], "retreat distance")?)
            }
            "cast" => {
                if args.is_empty() || args.len() > 2 {
                    return Err(self.err(e, "`cast` takes a technology and an optional selector"));
                }
                let tech = Tech::new(self.ident(&args[0], "technology")?);
                let target = args.get(1).map(|s| self.selector(s)).transpose()?;
                Act::Cast(tech, target)
            }
            "heal" => {
                self.arity(e, head, args, 1)?;
                Act::Heal(self.selector(&args[0])?)
            }
            "hold" => {
                self.arity(e, head, args, 0)?;
                Act::Hold
            }
            other => return Err(self.err(e, format!("unknown action `{other}`"))),
        })
    }

    fn selector(&self, e: &SExpr) -> Result<Selector, ParseError> {
        let (head, args) = self.form(e, "a selector")?;
        let n = match head {
            "nearest-enemy-of-type" => 1,
            "point" => 2,
            _ => 0,
        };
        let sel = match head {
            "nearest-enemy" => Selector::NearestEnemy,
            "lowest-hp-enemy" => Selector::LowestHpEnemy,
            "nearest-injured-ally" => Selector::NearestInjuredAlly,
            "enemy-centroid" => Selector::EnemyCentroid,
            "nearest-enemy-of-type" | "point" => {
                self.arity(e, head, args, n)?;
                return Ok(if head == "point" {
                    Selector::Point(
                        self.number(&args[0], "x coordinate")?,
                        self.number(&args[1], "y coordinate")?,
                    )
                } else {
                    Selector::NearestEnemyOfType(UnitType::new(self.ident(&args[0], "unit type")?))
                });
            }
            other => return Err(self.err(e, format!("unknown selector `{other}`"))),
        };
        self.arity(e, head, args, n)?;
        Ok(sel)
    }

    fn cond(&self, e: &SExpr) -> Result<Cond, ParseError> {
        let (head, args) = self.form(e, "a condition")?;
        let unary = || -> Result<&SExpr, ParseError> {
            self.arity(e, head, args, 1)?;
            Ok(&args[0])
        };
        Ok(match head {
            "enemy-in-range" => Cond::EnemyInRange(self.number(unary()?, "range")?),
            "hp-frac-below" => Cond::HpFracBelow(self.fraction(unary()?, "fraction")?),
            "shield-depleted" => {
                self.arity(e, head, args, 0)?;
                Cond::ShieldDepleted
            }
            "ability-ready" => {
                Cond::AbilityReady(Tech::new(self.ident(unary()?, "technology")?))
            }
            "enemy-count-at-least" => {
                self.arity(e, head, args, 2)?;
                Cond::EnemyCountAtLeast(
                    UnitType::new(self.ident(&args[0], "unit type")?),
                    self.integer(&args[1], "count")?,
                )
            }
            "ally-injured-within" => {
                Cond::AllyInjuredWithin(self.number(unary()?, "radius")?)
            }
            "nearest-enemy-beyond" => {
                Cond::NearestEnemyBeyond(self.number(unary()?, "distance")?)
            }
            "in-aoe-hazard" => {
                self.arity(e, head, args, 0)?;
                Cond::InAoeHazard
            }
            "and" | "or" => {
                if args.len() < 2 {
                    return Err(self.err(e, format!("`{head}` needs at least two conditions")));
                }
                let parts = args
                    .iter()
                    .map(|c| self.cond(c))
                    .collect::<Result<Vec<_>, _>>()?;
                if head == "and" {
                    Cond::And(parts)
                } else {
                    Cond::Or(parts)
                }
            }
            "not" => Cond::Not(Box::new(self.cond(unary()?)?)),
            other => return Err(self.err(e, format!("unknown condition `{other}`"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let t = parse("(tree (group Marine (attack (nearest-enemy))))").unwrap();
        assert_eq!(t.groups().len(), 1);
        assert_eq!(
            t.groups()[0].root,
            Node::Action(Act::Attack(Selector::NearestEnemy))
        );
    }

    #[test]
    fn unclosed_list_is_line_one() {
        let err = parse("(tree (group Marine (attack (nearest-enemy))").unwrap_err();
        assert_eq!(err.line, 1);
        assert_eq!(err.message, "unclosed list");
    }

    #[test]
    fn medivac_decision() {
        let t = parse(
            "(tree (group Medivac (if (ally-injured-within 8) (heal (nearest-injured-ally)) (move-toward (enemy-centroid)))))",
        )
        .unwrap();
        let root = &t.groups()[0].root;
        assert_eq!(root.node_count(), 3);
        assert_eq!(
            *root,
            Node::decision(
                Cond::AllyInjuredWithin(8.0),
                Node::Action(Act::Heal(Selector::NearestInjuredAlly)),
                Node::Action(Act::MoveToward(Selector::EnemyCentroid)),
            )
        );
    }

    #[test]
    fn all_vocabulary() {
        let src = r#"
            (tree
              (group Marine
                (if (and (enemy-in-range 6) (not (shield-depleted)) (ability-ready Stimpack))
                  (cast Stimpack)
                  (if (or (hp-frac-below 0.3) (in-aoe-hazard))
                    (retreat 3)
                    (if (enemy-count-at-least Zealot 2)
                      (attack (nearest-enemy-of-type Zealot))
                      (if (nearest-enemy-beyond 12)
                        (move-toward (point 16 16.5))
                        (attack (lowest-hp-enemy)))))))
              (group Ghost (cast PersonalCloaking (nearest-enemy)))
              (group Medivac (hold)))"#;
        let t = parse(src).unwrap();
        assert_eq!(t.groups().len(), 3);
    }

    #[test]
    fn error_locations() {
        let err = parse("(tree\n  (group Marine (charge)))").unwrap_err();
        assert_eq!((err.line, err.column), (2, 17));
        assert!(err.message.contains("unknown action"));
        assert_eq!(err.snippet, "(charge)))");

        let err = parse("(tree (group marine (hold)))").unwrap_err();
        assert_eq!(err.column, 14);

        let err = parse("(tree (group Marine (if (hp-frac-below 1.5) (hold) (hold))))").unwrap_err();
        assert!(err.message.contains("[0, 1]"));

        let err = parse("(tree (group Marine (retreat -3)))").unwrap_err();
        assert!(err.message.contains("nonnegative"));

        let err = parse("(tree (group Marine (if (and (in-aoe-hazard)) (hold) (hold))))").unwrap_err();
        assert!(err.message.contains("at least two"));

        assert!(parse("(tree)").is_err());
        assert!(parse("(forest (group Marine (hold)))").is_err());
        assert!(parse("(tree (group Marine (hold) (hold)))").is_err());
    }

    #[test]
    fn invalid_utf8() {
        let err = parse_bytes(b"(tree\n (gr\xffoup").unwrap_err();
        assert_eq!((err.line, err.column), (2, 5));
    }
}
