//! Curriculum designer: proposes the next training scenario.
//!
//! The LLM suggests a scenario as JSON; [`validate_curriculum`] then clamps it
//! under the final task so nothing the designer returns can exceed it. When
//! the LLM keeps producing unusable replies a deterministic step takes over.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use thiserror::Error;

use crate::catalog::UnitCatalog;
use crate::domain::{
    percent, CurriculumSpec, EngineConfig, IterationRecord, PerformanceReport, Side, SpecError,
    Tech, UnitSpec, UnitType, WinRate,
};
use crate::llm::{first_fenced_block, Backend, BackendError, Role};
use crate::prompts::{PromptError, PromptSet};

/// Agent types kept by [`simplify`] are capped at this many units.
pub const SIMPLIFY_AGENT_CAP: u32 = 5;
/// Enemy types kept by [`simplify`] are capped at this many units.
pub const SIMPLIFY_ENEMY_CAP: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Directive {
    Increase,
    Adjust,
}

/// Increase exactly when the win rate reaches `theta`.
pub fn gate(win_rate: WinRate, theta: WinRate) -> Directive {
    if win_rate >= theta {
        Directive::Increase
    } else {
        Directive::Adjust
    }
}

#[derive(Debug, Error)]
pub enum DesignerError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("validated curriculum has no {side} units left")]
    EmptyCurriculum { side: Side },
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// Starting scenario: the most numerous agent type (no technologies) against
/// the most numerous enemy type (technologies kept), both capped. Ties go to
/// the alphabetically first type.
pub fn simplify(final_task: &CurriculumSpec, catalog: &UnitCatalog) -> Result<CurriculumSpec, SpecError> {
    fn dominant(roster: &[UnitSpec]) -> Option<&UnitSpec> {
        roster
            .iter()
            .min_by(|a, b| b.count.cmp(&a.count).then(a.unit_type.cmp(&b.unit_type)))
    }
    let pick = |side: Side, cap: u32, keep_tech: bool| -> Result<Vec<UnitSpec>, SpecError> {
        let unit = dominant(final_task.roster(side)).ok_or(SpecError::EmptySide { side })?;
        let mut unit = unit.clone();
        unit.count = unit.count.min(cap);
        if !keep_tech {
            unit.technologies.clear();
        }
        Ok(vec![unit])
    };
    let spec = CurriculumSpec {
        id: "simplified".to_string(),
        agents: pick(Side::Agent, SIMPLIFY_AGENT_CAP, false)?,
        enemies: pick(Side::Enemy, SIMPLIFY_ENEMY_CAP, true)?,
        map: final_task.map.clone(),
        objective: final_task.objective.clone(),
        difficulty: 0.0,
    };
    spec.normalized(catalog)
}

/// Clamps a candidate under the final task: types, counts and technologies
/// are restricted to the final task's, duplicate entries merge, and map,
/// objective and spawn positions are taken from the final task. A candidate
/// that ends up equal to the final task is replaced by it.
pub fn validate_curriculum(
    candidate: &CurriculumSpec,
    final_task: &CurriculumSpec,
    catalog: &UnitCatalog,
) -> Result<CurriculumSpec, DesignerError> {
    let mut out = CurriculumSpec {
        id: candidate.id.clone(),
        agents: Vec::new(),
        enemies: Vec::new(),
        map: final_task.map.clone(),
        objective: final_task.objective.clone(),
        difficulty: 0.0,
    };
    for side in [Side::Agent, Side::Enemy] {
        let mut merged: BTreeMap<&UnitType, (u32, BTreeSet<Tech>)> = BTreeMap::new();
        for unit in candidate.roster(side) {
            let entry = merged.entry(&unit.unit_type).or_default();
            entry.0 = entry.0.saturating_add(unit.count);
            entry.1.extend(unit.technologies.iter().cloned());
        }
        let roster = out.roster_mut(side);
        for reference in final_task.roster(side) {
            let Some((count, techs)) = merged.remove(&reference.unit_type) else {
                continue;
            };
            let count = count.min(reference.count);
            if count == 0 {
                continue;
            }
            roster.push(UnitSpec {
                unit_type: reference.unit_type.clone(),
                count,
                position: reference.position,
                technologies: techs.intersection(&reference.technologies).cloned().collect(),
            });
        }
        if roster.is_empty() {
            return Err(DesignerError::EmptyCurriculum { side });
        }
    }
    if out.spec_equals(final_task) {
        return Ok(final_task.clone());
    }
    Ok(out.normalized(catalog)?)
}

/// `Marine x5,Marauder x2(Stimpack)` summary used in history lines.
fn roster_summary(spec: &CurriculumSpec, side: Side) -> String {
    spec.roster(side)
        .iter()
        .map(|u| {
            let mut s = format!("{} x{}", u.unit_type, u.count);
            if !u.technologies.is_empty() {
                let techs: Vec<&str> = u.technologies.iter().map(Tech::as_str).collect();
                s.push_str(&format!("({})", techs.join("+")));
            }
            s
        })
        .collect::<Vec<_>>()
        .join(",")
}

pub fn history_line(record: &IterationRecord) -> String {
    format!(
        "#{} [{}] agents={} enemies={} win_rate={}%",
        record.index,
        record.outcome,
        roster_summary(&record.curriculum, Side::Agent),
        roster_summary(&record.curriculum, Side::Enemy),
        percent(record.report.win_rate),
    )
}

/// The last `k` records, oldest first, one line each.
pub fn format_history(records: &[IterationRecord], k: usize) -> String {
    let start = records.len().saturating_sub(k);
    records[start..]
        .iter()
        .map(history_line)
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Deserialize)]
struct Draft {
    #[serde(default)]
    id: Option<String>,
    #[serde(default, alias = "agent_units", alias = "allies")]
    agents: Vec<DraftUnit>,
    #[serde(default, alias = "enemy_units")]
    enemies: Vec<DraftUnit>,
}

#[derive(Deserialize)]
struct DraftUnit {
    #[serde(alias = "type", alias = "unit")]
    unit_type: String,
    #[serde(alias = "quantity")]
    count: i64,
    #[serde(default, alias = "techs", alias = "technology")]
    technologies: Vec<String>,
}

/// Loose name comparison: case and punctuation are ignored.
fn name_key(s: &str) -> String {
    s.chars()
        .filter(char::is_ascii_alphanumeric)
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Reads a designer reply into a candidate. Names are matched loosely
/// against the final task; anything unmatched is kept verbatim and later
/// dropped by validation.
pub fn parse_candidate(reply: &str, final_task: &CurriculumSpec) -> Result<CurriculumSpec, String> {
    let body = first_fenced_block(reply).unwrap_or(reply);
    let draft: Draft = match serde_json::from_str(body.trim()) {
        Ok(d) => d,
        Err(first) => {
            let (Some(a), Some(b)) = (body.find('{'), body.rfind('}')) else {
                return Err(first.to_string());
            };
            serde_json::from_str(&body[a..=b]).map_err(|e| e.to_string())?
        }
    };
    let convert = |side: Side, units: Vec<DraftUnit>| -> Vec<UnitSpec> {
        units
            .into_iter()
            .map(|d| {
                let reference = final_task
                    .roster(side)
                    .iter()
                    .find(|u| name_key(u.unit_type.as_str()) == name_key(&d.unit_type));
                let unit_type = reference.map_or_else(|| UnitType::new(d.unit_type.clone()), |r| r.unit_type.clone());
                let technologies = d
                    .technologies
                    .iter()
                    .map(|t| {
                        reference
                            .and_then(|r| {
                                r.technologies.iter().find(|rt| {
                                    let (a, b) = (name_key(rt.as_str()), name_key(t));
                                    !b.is_empty() && (a == b || a.starts_with(&b))
                                })
                            })
                            .cloned()
                            .unwrap_or_else(|| Tech::new(t.clone()))
                    })
                    .collect();
                UnitSpec {
                    unit_type,
                    count: d.count.clamp(0, i64::from(u32::MAX)) as u32,
                    position: reference.map_or_else(Default::default, |r| r.position),
                    technologies,
                }
            })
            .collect()
    };
    Ok(CurriculumSpec {
        id: draft.id.unwrap_or_default(),
        agents: convert(Side::Agent, draft.agents),
        enemies: convert(Side::Enemy, draft.enemies),
        map: final_task.map.clone(),
        objective: final_task.objective.clone(),
        difficulty: 0.0,
    })
}

const SCHEMA: &str = r#"A single JSON object:
{
  "agents": [{"unit_type": "Marine", "count": 5, "technologies": []}],
  "enemies": [{"unit_type": "Zealot", "count": 2, "technologies": ["Charge"]}]
}
Counts may not exceed the final task's; technologies must be listed for the
same unit type in the final task. Map, objective and spawn positions are
fixed to the final task's."#;

fn describe_spec(spec: &CurriculumSpec) -> String {
    format!(
        "Agents: {}\nEnemies: {}\nDifficulty: {}",
        spec.composition(Side::Agent),
        spec.composition(Side::Enemy),
        spec.difficulty
    )
}

/// Inputs to one designer step.
#[derive(Debug, Clone, Copy)]
pub struct DesignContext<'a> {
    pub current: &'a CurriculumSpec,
    pub report: &'a PerformanceReport,
    /// Curriculum of the most recent successful iteration.
    pub last_success: Option<&'a CurriculumSpec>,
    pub final_task: &'a CurriculumSpec,
    pub history: &'a [IterationRecord],
}

pub struct Designer<'a> {
    pub backend: &'a dyn Backend,
    pub prompts: &'a PromptSet,
    pub catalog: &'a UnitCatalog,
    pub config: &'a EngineConfig,
}

impl Designer<'_> {
    /// Proposes the scenario that follows `ctx.current`. Asks the LLM up to
    /// `1 + designer_retries` times, then falls back to a deterministic step.
    pub fn next_curriculum(&self, ctx: DesignContext<'_>) -> Result<CurriculumSpec, DesignerError> {
        let directive = gate(ctx.report.win_rate, self.config.theta);
        let anchor = match ctx.last_success {
            Some(s) => s.clone(),
            None => simplify(ctx.final_task, self.catalog)?,
        };
        let request = self.render(ctx, directive, &anchor)?;
        for _ in 0..=self.config.designer_retries {
            let reply = self.backend.complete(&request)?;
            let Ok(candidate) = parse_candidate(&reply, ctx.final_task) else {
                continue;
            };
            let Ok(spec) = validate_curriculum(&candidate, ctx.final_task, self.catalog) else {
                continue;
            };
            if directive == Directive::Adjust && spec.difficulty >= ctx.current.difficulty {
                continue;
            }
            return Ok(spec);
        }
        match directive {
            Directive::Increase => fallback_increase(ctx.current, ctx.final_task, self.catalog),
            Directive::Adjust => fallback_adjust(&anchor, ctx.current, ctx.final_task, self.catalog),
        }
    }

    fn render(
        &self,
        ctx: DesignContext<'_>,
        directive: Directive,
        anchor: &CurriculumSpec,
    ) -> Result<crate::llm::ChatRequest, DesignerError> {
        let mut environment = format!(
            "{}\nMap: {}x{} flat\n\nUnit reference:",
            describe_spec(ctx.final_task),
            ctx.final_task.map.width,
            ctx.final_task.map.height
        );
        for side in [Side::Agent, Side::Enemy] {
            for u in ctx.final_task.roster(side) {
                if let Some(line) = self.catalog.describe(&u.unit_type) {
                    environment.push('\n');
                    environment.push_str(&line);
                }
            }
        }
        let directive_text = match directive {
            Directive::Increase => "The agents reached the win-rate threshold on the current scenario. \
                 Propose the next scenario: a moderate step toward the final task, such as more \
                 units, one new unit type or one new technology."
                .to_string(),
            Directive::Adjust => format!(
                "The agents did not reach the win-rate threshold on the current scenario. Propose \
                 an easier scenario with lower difficulty than the current one, staying close to \
                 the last scenario they mastered, for example by reducing enemy counts.\n\
                 Last mastered scenario:\n{}",
                describe_spec(anchor)
            ),
        };
        let current = describe_spec(ctx.current);
        let feedback = ctx.report.summary();
        let window = ctx.history.len().min(self.config.history_window);
        let mut records = &ctx.history[ctx.history.len() - window..];
        loop {
            let history = match format_history(records, records.len()) {
                h if h.is_empty() => "none".to_string(),
                h => h,
            };
            let vars = [
                ("environment", environment.as_str()),
                ("current_curriculum", current.as_str()),
                ("feedback", feedback.as_str()),
                ("history", history.as_str()),
                ("directive", directive_text.as_str()),
                ("schema", SCHEMA),
            ];
            let request = self.prompts.request(Role::Designer, &vars)?;
            let size: usize = request.messages.iter().map(|m| m.content.len()).sum();
            if size <= self.config.prompt_budget || records.is_empty() {
                return Ok(request);
            }
            records = &records[1..];
        }
    }
}

/// Grows every count by half (rounded up) and brings in one missing type per
/// side. Once a side has every final type its units gain the final
/// technologies.
pub fn fallback_increase(
    current: &CurriculumSpec,
    final_task: &CurriculumSpec,
    catalog: &UnitCatalog,
) -> Result<CurriculumSpec, DesignerError> {
    let mut next = current.clone();
    for side in [Side::Agent, Side::Enemy] {
        let roster = next.roster_mut(side);
        for u in roster.iter_mut() {
            u.count = u.count.saturating_add(u.count.div_ceil(2));
        }
        let missing = final_task
            .roster(side)
            .iter()
            .find(|f| !roster.iter().any(|u| u.unit_type == f.unit_type));
        match missing {
            Some(f) => roster.push(UnitSpec {
                count: 1,
                ..f.clone()
            }),
            None => {
                for u in roster.iter_mut() {
                    if let Some(f) = final_task.roster(side).iter().find(|f| f.unit_type == u.unit_type) {
                        u.technologies.extend(f.technologies.iter().cloned());
                    }
                }
            }
        }
    }
    validate_curriculum(&next, final_task, catalog)
}

/// Starts from the last mastered scenario and removes units of the most
/// numerous enemy type until the result is easier than the failed one.
pub fn fallback_adjust(
    anchor: &CurriculumSpec,
    failed: &CurriculumSpec,
    final_task: &CurriculumSpec,
    catalog: &UnitCatalog,
) -> Result<CurriculumSpec, DesignerError> {
    let mut next = validate_curriculum(anchor, final_task, catalog)?;
    loop {
        let total: u32 = next.enemies.iter().map(|u| u.count).sum();
        if total <= 1 {
            break;
        }
        let dominant = next
            .enemies
            .iter_mut()
            .min_by(|a, b| b.count.cmp(&a.count).then(a.unit_type.cmp(&b.unit_type)))
            .expect("enemy roster is not empty");
        dominant.count -= 1;
        next.enemies.retain(|u| u.count > 0);
        next = validate_curriculum(&next, final_task, catalog)?;
        if next.difficulty < failed.difficulty {
            break;
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{GridPos, Outcome};

    fn catalog() -> UnitCatalog {
        UnitCatalog::shipped()
    }

    fn final_task() -> CurriculumSpec {
        CurriculumSpec::reference_final_task()
            .normalized(&catalog())
            .unwrap()
    }

    fn with(agents: &[(&str, u32, &[&str])], enemies: &[(&str, u32, &[&str])]) -> CurriculumSpec {
        let mut s = final_task();
        s.agents = agents
            .iter()
            .map(|(t, n, te)| UnitSpec::new(t, *n, GridPos::new(0, 0), te))
            .collect();
        s.enemies = enemies
            .iter()
            .map(|(t, n, te)| UnitSpec::new(t, *n, GridPos::new(0, 0), te))
            .collect();
        s
    }

    #[test]
    fn gate_is_inclusive() {
        let theta = WinRate::new(2, 3);
        assert_eq!(gate(WinRate::new(2, 3), theta), Directive::Increase);
        assert_eq!(gate(WinRate::new(1, 1), theta), Directive::Increase);
        assert_eq!(gate(WinRate::new(1, 3), theta), Directive::Adjust);
        assert_eq!(gate(WinRate::new(0, 3), theta), Directive::Adjust);
    }

    #[test]
    fn simplify_picks_dominant_types() {
        let s = simplify(&final_task(), &catalog()).unwrap();
        assert_eq!(s.agents, vec![UnitSpec::new("Marine", 5, GridPos::new(5, 25), &[])]);
        assert_eq!(s.enemies, vec![UnitSpec::new("Zealot", 2, GridPos::new(25, 5), &["Charge"])]);
        assert_eq!(s.difficulty, 6.0);
    }

    #[test]
    fn clamps_counts_and_drops_foreign_types() {
        let c = with(
            &[("Marine", 25, &["Stimpack"]), ("Marine", 3, &[])],
            &[("Zealot", 2, &["Charge"]), ("Carrier", 4, &[])],
        );
        let v = validate_curriculum(&c, &final_task(), &catalog()).unwrap();
        assert_eq!(v.agents, vec![UnitSpec::new("Marine", 20, GridPos::new(5, 25), &["Stimpack"])]);
        assert_eq!(v.enemies.len(), 1);
    }

    #[test]
    fn equal_to_final_returns_final() {
        let mut c = final_task();
        c.id = "draft".into();
        c.agents.reverse();
        let v = validate_curriculum(&c, &final_task(), &catalog()).unwrap();
        assert_eq!(v, final_task());
    }

    #[test]
    fn empty_side_is_rejected() {
        let c = with(&[("Marine", 0, &[])], &[("Zealot", 1, &[])]);
        assert!(matches!(
            validate_curriculum(&c, &final_task(), &catalog()),
            Err(DesignerError::EmptyCurriculum { side: Side::Agent })
        ));
    }

    #[test]
    fn parses_loose_reply() {
        let reply = "Here:\n```json\n{\"agents\": [{\"type\": \"marine\", \"count\": 10}],\n \"enemies\": [{\"unit\": \"Stalker\", \"quantity\": 3, \"techs\": [\"Blink\"]}]}\n```";
        let c = parse_candidate(reply, &final_task()).unwrap();
        let v = validate_curriculum(&c, &final_task(), &catalog()).unwrap();
        assert_eq!(v.composition(Side::Agent), "Marine (10)");
        assert_eq!(v.composition(Side::Enemy), "Stalker (3, BlinkTech)");
        assert!(parse_candidate("no json here", &final_task()).is_err());
    }

    #[test]
    fn history_window_and_format() {
        let spec = validate_curriculum(
            &with(&[("Marine", 5, &[])], &[("Zealot", 2, &["Charge"])]),
            &final_task(),
            &catalog(),
        )
        .unwrap();
        let records: Vec<IterationRecord> = (1..=5)
            .map(|i| IterationRecord {
                index: i,
                curriculum: spec.clone(),
                strategy: String::new(),
                tree_source: String::new(),
                critiques: Vec::new(),
                report: PerformanceReport {
                    win_rate: WinRate::new(2, 3),
                    episodes: Vec::new(),
                    error: None,
                },
                outcome: Outcome::Success,
                attempts_used: 1,
            })
            .collect();
        assert_eq!(format_history(&records, 0), "");
        let text = format_history(&records, 2);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "#4 [Success] agents=Marine x5 enemies=Zealot x2(Charge) win_rate=67%");
        assert!(lines[1].starts_with("#5 "));
    }

    #[test]
    fn fallbacks_move_in_the_right_direction() {
        let cat = catalog();
        let fin = final_task();
        let start = simplify(&fin, &cat).unwrap();
        let up = fallback_increase(&start, &fin, &cat).unwrap();
        assert!(up.difficulty > start.difficulty);
        assert_eq!(up.count_of(Side::Agent, &"Marine".into()), 8);
        assert_eq!(up.agents.len(), 2);
        let down = fallback_adjust(&start, &up, &fin, &cat).unwrap();
        assert!(down.difficulty < up.difficulty);
        assert_eq!(down.count_of(Side::Enemy, &"Zealot".into()), 1);
    }

    #[test]
    fn repeated_increase_reaches_final() {
        let (cat, fin) = (catalog(), final_task());
        let mut spec = simplify(&fin, &cat).unwrap();
        for _ in 0..40 {
            if spec.spec_equals(&fin) {
                return;
            }
            spec = fallback_increase(&spec, &fin, &cat).unwrap();
        }
        panic!("fallback never reached the final task");
    }
}
