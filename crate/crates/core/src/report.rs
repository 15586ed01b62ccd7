//! Text renderings of a run: an aligned table and a Graphviz graph.

use crate::domain::{percent, IterationRecord, Outcome, RunState, Side};

const HEADERS: [&str; 5] = ["Path", "Task", "Agent Composition", "Enemy Composition", "Result"];
const FINAL_TASK: &str = "Final Task";

/// `67%` for a success, `Failed` otherwise.
pub fn result_label(record: &IterationRecord) -> String {
    match record.outcome {
        Outcome::Success => format!("{}%", percent(record.report.win_rate)),
        Outcome::Failed => "Failed".to_string(),
    }
}

fn compositions(state: &RunState, record: &IterationRecord) -> (String, String) {
    if record.curriculum.spec_equals(&state.final_task) {
        (FINAL_TASK.to_string(), FINAL_TASK.to_string())
    } else {
        (
            record.curriculum.composition(Side::Agent),
            record.curriculum.composition(Side::Enemy),
        )
    }
}

/// One row per iteration. The path label appears on the first row only.
pub fn render_table(state: &RunState) -> String {
    let rows: Vec<[String; 5]> = state
        .iterations
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let (agents, enemies) = compositions(state, r);
            let path = if i == 0 {
                state.config.label.clone()
            } else {
                String::new()
            };
            [path, r.index.to_string(), agents, enemies, result_label(r)]
        })
        .collect();
    let mut widths = HEADERS.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[&str]| -> String {
        let mut out = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(&format!("{cell:<w$}"));
        }
        out.trim_end().to_string() + "\n"
    };
    let mut out = line(&HEADERS);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&line(&rule.iter().map(String::as_str).collect::<Vec<_>>()));
    for row in &rows {
        out.push_str(&line(&row.iter().map(String::as_str).collect::<Vec<_>>()));
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Directed graph of the curriculum sequence: one node per iteration, edges
/// in generation order. Successes are filled green, failures dashed red, and
/// the last node has a double border.
pub fn render_dot(state: &RunState) -> String {
    let mut out = String::new();
    out.push_str("// Legend: green filled box = Success, red dashed box = Failed,\n");
    out.push_str("// double border = terminal node of the path.\n");
    out.push_str(&format!("digraph \"path_{}\" {{\n", escape(&state.config.label)));
    out.push_str("  rankdir=LR;\n");
    out.push_str(&format!(
        "  label=\"Path {}\\lgreen = Success, red dashed = Failed, double border = terminal\\l\";\n",
        escape(&state.config.label)
    ));
    out.push_str("  node [shape=box, fontname=\"monospace\"];\n");
    let last = state.iterations.len();
    for (i, r) in state.iterations.iter().enumerate() {
        let (agents, enemies) = compositions(state, r);
        let label = format!(
            "Task {}\\nAgents: {}\\nEnemies: {}\\n{}",
            r.index,
            escape(&agents),
            escape(&enemies),
            result_label(r)
        );
        let style = match r.outcome {
            Outcome::Success => "style=filled, fillcolor=\"palegreen\", color=\"darkgreen\"",
            Outcome::Failed => "style=\"filled,dashed\", fillcolor=\"mistyrose\", color=\"red\"",
        };
        let terminal = if i + 1 == last { ", peripheries=2" } else { "" };
        out.push_str(&format!("  t{} [label=\"{label}\", {style}{terminal}];\n", r.index));
    }
    for pair in state.iterations.windows(2) {
        out.push_str(&format!("  t{} -> t{};\n", pair[0].index, pair[1].index));
    }
    out.push_str("}\n");
    out
}
