mod common;

use common::{cli, s};
use curricula_core::domain::{CurriculumSpec, Outcome, RunStatus};
use curricula_core::orchestrator::{load_state, Manifest, RunError, CHECKPOINT_FILE, TRANSCRIPT_FILE};

#[test]
fn path1_replays_to_the_golden_table() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let started = std::time::Instant::now();
    let out = cli(&["run", "--config", s(&common::path1_config()), "--run", s(&run)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(started.elapsed().as_secs() < 30);

    let lines: Vec<&str> = out.stdout.lines().collect();
    assert_eq!(lines.len(), 7, "{}", out.stdout);
    assert!(lines[0].starts_with("iteration 1 | Marine (5) vs Zealot (2, Charge) | win rate 67% | Success"));
    assert_eq!(lines[5], "iteration 6 | Final Task | win rate 100% | Success");
    assert_eq!(lines[6], "status: succeeded");

    let state = load_state(&run).unwrap();
    let outcomes: Vec<Outcome> = state.iterations.iter().map(|r| r.outcome).collect();
    use Outcome::{Failed, Success};
    assert_eq!(outcomes, [Success, Success, Failed, Success, Success, Success]);
    assert_eq!(state.status, RunStatus::Succeeded);
    assert!(state.overall_success());
    let last = &state.iterations.last().unwrap().curriculum;
    assert!(last.spec_equals(&CurriculumSpec::reference_final_task()));
    // The adjusted task is easier than the failed one.
    assert!(state.iterations[3].curriculum.difficulty < state.iterations[2].curriculum.difficulty);

    let table = cli(&["report", "--run", s(&run), "--format", "table"]);
    assert_eq!(table.code, 0);
    assert_eq!(table.stdout, common::golden_table());

    for i in 1..=6 {
        let iter = run.join(format!("iter_{i:03}"));
        for f in ["curriculum.json", "strategy.txt", "code.bt", "report.json", "critiques.txt", "transcripts.jsonl"] {
            assert!(iter.join(f).exists(), "{}", iter.join(f).display());
        }
    }
    assert!(run.join("final_report.json").exists());
}

#[test]
fn iteration_cap_ends_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::write_config(dir.path(), "max_iterations = 4", &common::scripted(&common::path1_script()));
    let out = cli(&["run", "--config", s(&cfg)]);
    assert_eq!(out.code, 4, "{}", out.stderr);
    let state = load_state(&dir.path().join("run")).unwrap();
    assert_eq!(state.iterations.len(), 4);
    assert_eq!(state.status, RunStatus::FailedAtCap);
    assert!(!state.overall_success());
    assert!(out.stdout.ends_with("status: failed at iteration cap\n"));
}

#[test]
fn interrupted_run_resumes_to_the_same_state() {
    let reference = tempfile::tempdir().unwrap();
    let ref_run = reference.path().join("run");
    assert_eq!(cli(&["run", "--config", s(&common::path1_config()), "--run", s(&ref_run)]).code, 0);

    // The designer runs dry after the second task, as if the process died.
    let dir = tempfile::tempdir().unwrap();
    let short = common::truncated_script(dir.path(), &[("designer", 2)]);
    let cfg = common::write_config(dir.path(), "", &common::scripted(&short));
    let run = dir.path().join("run");
    let out = cli(&["run", "--config", s(&cfg)]);
    assert_eq!(out.code, 3, "{}", out.stderr);
    assert!(out.stderr.contains("no scripted reply left for designer"), "{}", out.stderr);
    let state = load_state(&run).unwrap();
    assert_eq!(state.iterations.len(), 3);
    assert!(matches!(state.status, RunStatus::Aborted { .. }));

    let full_dir = dir.path().join("full");
    std::fs::create_dir(&full_dir).unwrap();
    let full = common::write_config(&full_dir, "", &common::scripted(&common::path1_script()));
    let resumed = cli(&["resume", "--run", s(&run), "--config", s(&full)]);
    assert_eq!(resumed.code, 0, "{}", resumed.stderr);
    assert_eq!(resumed.stdout.lines().count(), 4);
    assert!(resumed.stdout.starts_with("iteration 4 |"));

    assert_eq!(common::manifest_digest(&run), common::manifest_digest(&ref_run));
    let a = cli(&["report", "--run", s(&run)]).stdout;
    assert_eq!(a, common::golden_table());
}

#[test]
fn resuming_a_finished_run_changes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(cli(&["run", "--config", s(&common::path1_config()), "--run", s(&run)]).code, 0);
    let checkpoint = std::fs::read(run.join(CHECKPOINT_FILE)).unwrap();
    let transcripts = std::fs::read(run.join(TRANSCRIPT_FILE)).unwrap();
    let out = cli(&["resume", "--run", s(&run)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.stdout, "status: succeeded\n");
    assert_eq!(std::fs::read(run.join(CHECKPOINT_FILE)).unwrap(), checkpoint);
    assert_eq!(std::fs::read(run.join(TRANSCRIPT_FILE)).unwrap(), transcripts);
}

#[test]
fn a_started_run_directory_is_not_reused() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(cli(&["run", "--config", s(&common::path1_config()), "--run", s(&run)]).code, 0);
    let again = cli(&["run", "--config", s(&common::path1_config()), "--run", s(&run)]);
    assert_eq!(again.code, 2);
    assert!(again.stderr.contains("already"), "{}", again.stderr);
}

#[test]
fn tampered_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(cli(&["run", "--config", s(&common::path1_config()), "--run", s(&run)]).code, 0);
    let path = run.join(CHECKPOINT_FILE);
    let text = std::fs::read_to_string(&path).unwrap();
    let tampered = text.replacen("\"count\": 5", "\"count\": 4", 1);
    assert_ne!(tampered, text);
    std::fs::write(&path, tampered).unwrap();

    assert!(matches!(load_state(&run), Err(RunError::CorruptCheckpoint { .. })));
    let out = cli(&["report", "--run", s(&run)]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("corrupt"), "{}", out.stderr);
    assert_eq!(cli(&["resume", "--run", s(&run)]).code, 2);
}

#[test]
fn replay_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(cli(&["run", "--config", s(&common::path1_config()), "--run", s(&run)]).code, 0);

    let replay_dir = dir.path().join("replay");
    std::fs::create_dir(&replay_dir).unwrap();
    let cfg = common::write_config(&replay_dir, "parallel_episodes = true", &common::replayed(&run.join(TRANSCRIPT_FILE)));
    let out = cli(&["run", "--config", s(&cfg)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let replayed = replay_dir.join("run");
    assert_eq!(common::manifest_digest(&replayed), common::manifest_digest(&run));
    assert_eq!(
        Manifest::load(&replayed).unwrap().iterations,
        Manifest::load(&run).unwrap().iterations
    );
    assert_eq!(cli(&["report", "--run", s(&replayed)]).stdout, common::golden_table());
}

#[test]
fn replay_detects_a_changed_prompt_template() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(cli(&["run", "--config", s(&common::path1_config()), "--run", s(&run)]).code, 0);

    let prompts = dir.path().join("prompts");
    std::fs::create_dir(&prompts).unwrap();
    let shipped = curricula_core::prompts::PromptSet::shipped();
    let original = shipped.template(curricula_core::llm::Role::Planner, "user");
    let edited = original.replacen('a', "e", 1);
    assert_eq!(edited.len(), original.len());
    assert_ne!(edited, original);
    std::fs::write(prompts.join("planner.user.txt"), edited).unwrap();

    let replay_dir = dir.path().join("replay");
    std::fs::create_dir(&replay_dir).unwrap();
    let cfg = common::write_config(
        &replay_dir,
        &format!("prompts = {:?}", s(&prompts)),
        &common::replayed(&run.join(TRANSCRIPT_FILE)),
    );
    let out = cli(&["run", "--config", s(&cfg)]);
    assert_eq!(out.code, 3, "{}", out.stderr);
    assert!(out.stderr.contains("replay diverged"), "{}", out.stderr);
    assert!(out.stderr.contains("(planner)"), "{}", out.stderr);
}
