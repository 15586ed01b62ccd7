//! Acceptance suite: one PASS or FAIL line per criterion.

mod common;
#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{cli, s};
use curricula_core::arena::{evaluate, run_episode, step, Idle, TreePolicy};
use curricula_core::catalog::UnitCatalog;
use curricula_core::coder::{ArenaEvaluator, Coder, Feedback};
use curricula_core::designer::{gate, simplify, validate_curriculum, DesignerError, Directive};
use curricula_core::domain::{
    CurriculumSpec, GridPos, Outcome, Side, UnitSpec, UnitType, WinRate,
};
use curricula_core::dsl::{parse, parse_bytes, print};
use curricula_core::llm::{Backend, Recorder, Role, ScriptedBackend};
use curricula_core::orchestrator::{load_state, TRANSCRIPT_FILE};
use curricula_core::prompts::PromptSet;

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn path1_replay() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = dir.path().join("run");
    let started = Instant::now();
    let out = cli(&["run", "--config", s(&common::path1_config()), "--run", s(&run)]);
    let elapsed = started.elapsed();
    ensure!(out.code == 0, "exit {} ({})", out.code, out.stderr.trim());
    let state = load_state(&run).map_err(|e| e.to_string())?;
    let outcomes: Vec<Outcome> = state.iterations.iter().map(|r| r.outcome).collect();
    use Outcome::{Failed, Success};
    ensure!(
        outcomes == [Success, Success, Failed, Success, Success, Success],
        "outcomes {outcomes:?}"
    );
    let last = &state.iterations[5].curriculum;
    ensure!(
        last.spec_equals(&CurriculumSpec::reference_final_task()),
        "terminal curriculum is not the final task"
    );
    let table = cli(&["report", "--run", s(&run), "--format", "table"]);
    ensure!(table.stdout == common::golden_table(), "table differs from golden:\n{}", table.stdout);
    ensure!(elapsed.as_secs() < 30, "took {elapsed:?}");
    Ok(())
}

fn threshold_gate() -> Check {
    let theta = WinRate::new(2, 3);
    for (wins, expected) in [(2, Directive::Increase), (3, Directive::Increase), (0, Directive::Adjust), (1, Directive::Adjust)] {
        let rate = support::report(wins, 3).win_rate;
        ensure!(gate(rate, theta) == expected, "{wins}/3 gave {:?}", gate(rate, theta));
    }
    Ok(())
}

fn simplify_oracle() -> Check {
    let catalog = UnitCatalog::shipped();
    let fin = CurriculumSpec::reference_final_task().normalized(&catalog).map_err(|e| e.to_string())?;
    let first = simplify(&fin, &catalog).map_err(|e| e.to_string())?;
    let agents = [UnitSpec::new("Marine", 5, GridPos::new(5, 25), &[])];
    let enemies = [UnitSpec::new("Zealot", 2, GridPos::new(25, 5), &["Charge"])];
    ensure!(first.agents == agents, "agents {:?}", first.agents);
    ensure!(first.enemies == enemies, "enemies {:?}", first.enemies);
    ensure!(
        first.composition(Side::Agent) == "Marine (5)" && first.composition(Side::Enemy) == "Zealot (2, Charge)",
        "compositions differ"
    );
    Ok(())
}

fn validation_dominance() -> Check {
    let catalog = UnitCatalog::shipped();
    let fin = CurriculumSpec::reference_final_task().normalized(&catalog).map_err(|e| e.to_string())?;
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&support::arb_candidate(&catalog), |candidate| {
            let v = match validate_curriculum(&candidate, &fin, &catalog) {
                Err(DesignerError::EmptyCurriculum { .. }) => return Ok(()),
                other => other.map_err(|e| proptest::test_runner::TestCaseError::fail(e.to_string()))?,
            };
            for side in [Side::Agent, Side::Enemy] {
                for u in v.roster(side) {
                    let f = fin.roster(side).iter().find(|f| f.unit_type == u.unit_type);
                    proptest::prop_assert!(f.is_some_and(|f| u.count <= f.count && u.technologies.is_subset(&f.technologies)));
                }
            }
            let again = validate_curriculum(&v, &fin, &catalog).unwrap();
            proptest::prop_assert_eq!(again, v);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn dsl_round_trip() -> Check {
    let catalog = UnitCatalog::shipped();
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&support::arb_tree(&catalog), |tree| {
            let back = parse(&print(&tree)).map_err(|e| proptest::test_runner::TestCaseError::fail(e.to_string()))?;
            proptest::prop_assert_eq!(back, tree);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100_000 {
        let n = rng.random_range(0..64);
        let bytes: Vec<u8> = (0..n).map(|_| rng.random()).collect();
        let _ = parse_bytes(&bytes);
    }
    Ok(())
}

fn simulator_determinism_and_oracles() -> Check {
    let catalog = UnitCatalog::shipped();
    let spec = CurriculumSpec::reference_final_task().normalized(&catalog).map_err(|e| e.to_string())?;
    let tree = parse(
        "(tree (group Marine (if (and (enemy-in-range 6) (ability-ready Stimpack)) (cast Stimpack) (attack (lowest-hp-enemy))))
               (group Medivac (heal (nearest-injured-ally))))",
    )
    .map_err(|e| e.to_string())?;
    let first = run_episode(&spec, &tree, &catalog, 42, false).map_err(|e| e.to_string())?;
    for _ in 0..100 {
        let again = run_episode(&spec, &tree, &catalog, 42, false).map_err(|e| e.to_string())?;
        ensure!(again.metrics.trace_digest == first.metrics.trace_digest, "trace digest changed");
    }
    let seq = evaluate(&spec, &tree, &catalog, 42, false).map_err(|e| e.to_string())?;
    let par = evaluate(&spec, &tree, &catalog, 42, true).map_err(|e| e.to_string())?;
    ensure!(seq == par, "sequential and parallel reports differ");

    // Two hits of 6 on a 12 hp dummy from a Marine firing every tick.
    let mut fast = support::dummy_catalog(12.0);
    fast.units.get_mut(&UnitType::new("Marine")).unwrap().cooldown = 1;
    let duel = support::duel(
        vec![UnitSpec::new("Marine", 1, GridPos::new(10, 10), &[])],
        vec![UnitSpec::new(support::DUMMY, 1, GridPos::new(10, 10), &[])],
        &fast,
    );
    let attack = parse("(tree (group Marine (attack (nearest-enemy))))").unwrap();
    let out = run_episode(&duel, &attack, &fast, 42, false).map_err(|e| e.to_string())?;
    ensure!(out.metrics.win && out.metrics.ticks == 2, "dummy died at tick {}", out.metrics.ticks);

    // 5 damage per Marine hit after armor goes to the 50 shield first.
    let zealot = support::duel(
        vec![UnitSpec::new("Marine", 1, GridPos::new(10, 10), &[])],
        vec![UnitSpec::new("Zealot", 1, GridPos::new(13, 10), &[])],
        &catalog,
    );
    let mut state = support::placed(&zealot, &catalog, &[(10.0, 10.0), (13.0, 10.0)]);
    step(&mut state, &catalog, &TreePolicy { tree: &attack }, &Idle);
    let z = &state.units[1];
    ensure!((z.shield, z.hp) == (45.0, 100.0), "zealot at shield {} hp {}", z.shield, z.hp);

    // Stim halves the cooldown: 20 hits instead of 10 over 20 ticks.
    let big = support::dummy_catalog(1.0e6);
    let window = |stimmed: bool| {
        let spec = support::duel(
            vec![UnitSpec::new("Marine", 1, GridPos::new(10, 10), &["Stimpack"])],
            vec![UnitSpec::new(support::DUMMY, 1, GridPos::new(12, 10), &[])],
            &big,
        );
        let mut st = support::placed(&spec, &big, &[(10.0, 10.0), (12.0, 10.0)]);
        let opener = parse(if stimmed {
            "(tree (group Marine (cast Stimpack)))"
        } else {
            "(tree (group Marine (hold)))"
        })
        .unwrap();
        step(&mut st, &big, &TreePolicy { tree: &opener }, &Idle);
        for _ in 0..20 {
            step(&mut st, &big, &TreePolicy { tree: &attack }, &Idle);
        }
        st.ledgers[0].dealt / 6.0
    };
    let (plain, stimmed) = (window(false), window(true));
    ensure!(plain == 10.0 && stimmed == 20.0, "hits {plain} vs {stimmed}");
    Ok(())
}

fn coder_loop_contracts() -> Check {
    let catalog = UnitCatalog::shipped();
    let prompts = PromptSet::shipped();
    let mut task = CurriculumSpec::reference_final_task();
    task.agents = vec![UnitSpec::new("Marine", 5, GridPos::new(5, 25), &[])];
    task.enemies = vec![UnitSpec::new("Zealot", 2, GridPos::new(25, 5), &["Charge"])];
    let task = task.normalized(&catalog).map_err(|e| e.to_string())?;
    let input = parse("(tree (group Marine (attack (nearest-enemy))))").unwrap();
    let evaluator = ArenaEvaluator {
        catalog: &catalog,
        base_seed: 42,
        parallel: false,
    };
    let m = 3;
    let replies = |coder: Vec<&str>| -> Recorder {
        let inner: Arc<dyn Backend> = Arc::new(ScriptedBackend::new([
            (Role::Planner, vec!["plan".to_string(); 3]),
            (Role::Coder, coder.into_iter().map(String::from).collect()),
            (Role::Critic, vec!["critique".to_string(); 3]),
        ]));
        Recorder::new(inner)
    };

    // Programs that lose every episode: the loop stops at M and keeps the input.
    let losing = "```bt\n(tree (group Marine (hold)))\n```";
    let rec = replies(vec![losing; 3]);
    let coder = Coder {
        backend: &rec,
        prompts: &prompts,
        catalog: &catalog,
        theta_success: WinRate::new(2, 3),
        max_attempts: m,
    };
    let out = coder
        .improve_tree(1, &task, &input, &mut Feedback::new(8), "", &evaluator)
        .map_err(|e| e.to_string())?;
    ensure!(out.record.outcome == Outcome::Failed, "holding won");
    ensure!(out.record.attempts_used <= m && rec.counts().get(Role::Coder) <= u64::from(m), "more than M attempts");
    ensure!(print(&out.tree) == print(&input) && out.tree == input, "failed run changed the tree");

    // Programs that do not compile score zero with the error recorded.
    let rec = replies(vec!["(tree (group Marine", "(tree (group Marine (cast Charge)))", "no code at all"]);
    let coder = Coder { backend: &rec, ..coder };
    let out = coder
        .improve_tree(1, &task, &input, &mut Feedback::new(8), "", &evaluator)
        .map_err(|e| e.to_string())?;
    ensure!(out.record.report.win_rate == WinRate::from_integer(0), "invalid code scored");
    ensure!(out.record.report.error.is_some(), "invalid code has no error");
    ensure!(out.tree == input, "invalid code changed the tree");
    Ok(())
}

fn record_replay_closure() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = dir.path().join("run");
    ensure!(cli(&["run", "--config", s(&common::path1_config()), "--run", s(&run)]).code == 0, "recording failed");

    let replay = dir.path().join("replay");
    std::fs::create_dir(&replay).unwrap();
    let cfg = common::write_config(&replay, "", &common::replayed(&run.join(TRANSCRIPT_FILE)));
    let out = cli(&["run", "--config", s(&cfg)]);
    ensure!(out.code == 0, "replay exit {} ({})", out.code, out.stderr.trim());
    ensure!(
        common::manifest_digest(&replay.join("run")) == common::manifest_digest(&run),
        "manifest digests differ"
    );

    let prompts = dir.path().join("prompts");
    std::fs::create_dir(&prompts).unwrap();
    let original = PromptSet::shipped().template(Role::Coder, "system").to_string();
    std::fs::write(prompts.join("coder.system.txt"), original.replacen('e', "a", 1)).unwrap();
    let tweaked = dir.path().join("tweaked");
    std::fs::create_dir(&tweaked).unwrap();
    let cfg = common::write_config(
        &tweaked,
        &format!("prompts = {:?}", s(&prompts)),
        &common::replayed(&run.join(TRANSCRIPT_FILE)),
    );
    let out = cli(&["run", "--config", s(&cfg)]);
    ensure!(out.code == 3 && out.stderr.contains("replay diverged"), "no mismatch: {}", out.stderr.trim());
    Ok(())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("path-1 replay", path1_replay),
        ("threshold gate", threshold_gate),
        ("simplify oracle", simplify_oracle),
        ("validation dominance", validation_dominance),
        ("dsl round trip", dsl_round_trip),
        ("simulator determinism and oracles", simulator_determinism_and_oracles),
        ("coder loop contracts", coder_loop_contracts),
        ("record/replay closure", record_replay_closure),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(()) => println!("PASS {name}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
