//! Helpers for driving the CLI in-process.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["curricula"];
    argv.extend_from_slice(args);
    let code = curricula_cli::main_with(argv, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/path1")
}

pub fn path1_config() -> PathBuf {
    fixture_dir().join("config.toml")
}

pub fn path1_script() -> PathBuf {
    fixture_dir().join("script.toml")
}

pub fn golden_table() -> String {
    std::fs::read_to_string(fixture_dir().join("golden_table.txt")).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes `config.toml` into `dir` with the given `[engine]` extras and
/// backend table, and returns its path.
pub fn write_config(dir: &Path, engine_extra: &str, backend: &str) -> PathBuf {
    let text = format!(
        "run_dir = \"run\"\n\n[engine]\nlabel = \"1\"\n{engine_extra}\n\n[engine.backend]\n{backend}\n"
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn scripted(script: &Path) -> String {
    format!("kind = \"scripted\"\nfixture = {:?}", script.to_str().unwrap())
}

pub fn replayed(transcript: &Path) -> String {
    format!("kind = \"replay\"\ntranscript = {:?}", transcript.to_str().unwrap())
}

/// Copy of the path-1 script with each role's replies cut to `keep` entries.
pub fn truncated_script(dir: &Path, keep: &[(&str, usize)]) -> PathBuf {
    let text = std::fs::read_to_string(path1_script()).unwrap();
    let mut table: toml::Table = toml::from_str(&text).unwrap();
    for (role, n) in keep {
        let replies = table.get_mut(*role).and_then(|v| v.as_array_mut()).unwrap();
        replies.truncate(*n);
    }
    let path = dir.join("script.toml");
    std::fs::write(&path, toml::to_string(&table).unwrap()).unwrap();
    path
}

pub fn manifest_digest(run_dir: &Path) -> String {
    curricula_core::orchestrator::Manifest::load(run_dir)
        .unwrap()
        .state_digest
}
