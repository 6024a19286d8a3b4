use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lambdav"))
        .args(args)
        .env_remove("LAMBDAV_COLOR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn program_path(name: &str) -> String {
    format!("{}/programs/{name}.lv", env!("CARGO_MANIFEST_DIR"))
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn observe_matches_goldens() {
    let o = run(&["observe", &program_path("from_n"), "--max-fuel", "8"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), golden("from_n.observe"));
    let o = run(&["observe", "twophase", "--max-fuel", "40"]);
    assert_eq!(stdout(&o), golden("twophase.observe"));
    assert!(stdout(&o).lines().last().unwrap().contains("res = \"accepted\""));
}

#[test]
fn ambiguity_exits_with_two() {
    let o = run(&["observe", "ambiguous"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).trim_end().ends_with("top"));
}

#[test]
fn json_lines_agree_with_pretty() {
    let pretty = stdout(&run(&["observe", "twophase", "--max-fuel", "16"]));
    let json = stdout(&run(&["--format", "json", "observe", "twophase", "--max-fuel", "16"]));
    let from_json: Vec<String> = json
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            format!("fuel {}: {}", v["fuel"], v["result"].as_str().unwrap())
        })
        .collect();
    assert_eq!(from_json, pretty.lines().collect::<Vec<_>>());
}

#[test]
fn explore_lists_both_arms_and_replays() {
    let dir = scratch_dir("traces");
    let o = run(&["explore", "ambiguous", "--budget", "6", "--save-traces", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("result: true") && out.contains("result: false"), "{out}");
    let results: Vec<&str> = out.lines().filter_map(|l| l.strip_prefix("result: ")).collect();
    for (i, want) in results.iter().enumerate() {
        let trace = dir.join(format!("result-{i}.trace"));
        let o = run(&["explore", "ambiguous", "--replay", trace.to_str().unwrap()]);
        assert_eq!(stdout(&o).trim(), *want);
    }
}

#[test]
fn explore_reaches_evens_prefix() {
    let o = run(&["explore", "evens", "--budget", "200", "--max-fuel", "6", "--frontier-cap", "500", "--allow-truncate"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l == "result: {2, 0}" || l == "result: {0, 2}"), "{out}");
    let o = run(&["explore", "evens", "--budget", "200", "--max-fuel", "6", "--frontier-cap", "500"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn check_exit_codes() {
    let dir = scratch_dir("check");
    let id = dir.join("id.lv");
    std::fs::write(&id, "\\x. x\n").unwrap();
    let id = id.to_str().unwrap();
    let o = run(&["check", id, "--formula", "\\/ ['a -> 'a]"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("TFUN"));
    let o = run(&["check", "twophase", "--formula", "bot"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
    assert!(stdout(&o).starts_with("TBOT"));
    assert_eq!(run(&["check", "relation", "--formula", "{'two}"]).status.code(), Some(3));
    assert_eq!(run(&["check", "relation", "--formula", "{'two"]).status.code(), Some(1));
}

#[test]
fn parse_errors_report_position() {
    let dir = scratch_dir("parse");
    let bad = dir.join("bad.lv");
    std::fs::write(&bad, "def f x = x\n\nf (let = in)").unwrap();
    let o = run(&["observe", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("3:8"), "{:?}", o);
}

#[test]
fn symbol_table_file() {
    let dir = scratch_dir("symtab");
    let table = dir.join("t.sym");
    std::fs::write(&table, "maybe yes -> yes\n").unwrap();
    let src = dir.join("p.lv");
    std::fs::write(&src, "'maybe \\/ 'yes\n").unwrap();
    let o = run(&["--sym-table", table.to_str().unwrap(), "observe", src.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().last().unwrap(), "fuel 1: 'yes");
    let o = run(&["observe", src.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn test_command_filters_and_is_deterministic() {
    let o = run(&["test", "--suite", "order", "--depth", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
    assert!(stdout(&o).starts_with("PASS order"));
    let strip = |o: Output| stdout(&o).rsplit_once(',').unwrap().0.to_string();
    let a = run(&["test", "--suite", "expansion", "--seed", "9", "--terms", "100"]);
    let b = run(&["test", "--suite", "expansion", "--seed", "9", "--terms", "100"]);
    assert_eq!(strip(a), strip(b));
    assert_eq!(run(&["test", "--suite", "bogus"]).status.code(), Some(1));
}
