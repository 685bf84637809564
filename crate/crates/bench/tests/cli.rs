use std::path::{Path, PathBuf};
use std::process::Command;

use srcpsp_bench::results::{read_results, ResultRow};
use srcpsp_core::instance::parse_psplib;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn srcpsp(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_srcpsp")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
        .trim()
}

#[test]
fn solve_prints_a_feasible_schedule() {
    let sch = data("example.sch");
    let (code, out, _) = srcpsp(&["solve", sch.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(field(&out, "status:"), "Optimal");
    assert!(field(&out, "makespan:").parse::<i64>().unwrap() <= 8);
    let starts = field(&out, "starts:").to_string();
    let (code, out, _) = srcpsp(&["check", "--instance", sch.to_str().unwrap(), "--schedule", &starts]);
    assert_eq!(code, 0);
    assert_eq!(field(&out, "feasible:"), "true");
}

#[test]
fn check_reports_violations() {
    let sch = data("example.sch");
    let sch = sch.to_str().unwrap();
    // everything at 0: 3 + 2 + 1 + 2 + 2 units on a capacity of 4
    let (code, out, _) = srcpsp(&["check", "--instance", sch, "--schedule", "0,0,0,0,0"]);
    assert_eq!(code, 0);
    assert_eq!(field(&out, "feasible:"), "false");
    assert!(out.contains("resource 0: usage 10 > capacity 4 at t = 0"), "{out}");
    assert!(out.contains("precedence: s_2 - s_1 >= 2 violated by 2"), "{out}");

    let (_, out, _) = srcpsp(&["check", "--instance", sch, "--schedule", "1,3,5,0,3"]);
    assert_eq!(field(&out, "feasible:"), "true");
    assert_eq!(field(&out, "makespan:"), "8");
    // shorter durations keep it feasible; all seven values given this time
    let (_, out, _) = srcpsp(&[
        "check",
        "--instance",
        sch,
        "--schedule",
        "0,1,3,5,0,3,8",
        "--durations",
        "0,1,4,2,1,1,0",
    ]);
    assert_eq!(field(&out, "feasible:"), "true");
    assert_eq!(field(&out, "makespan:"), "7");
}

#[test]
fn schedule_and_durations_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let starts = dir.path().join("s.csv");
    std::fs::write(&starts, "1\n3\n5\n0\n3\n").unwrap();
    let sch = data("example.sch");
    let (code, out, _) = srcpsp(&["check", "--instance", sch.to_str().unwrap(), "--schedule", starts.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(field(&out, "feasible:"), "true");
}

#[test]
fn exit_codes() {
    let sch = data("example.sch");
    let sch = sch.to_str().unwrap();
    assert_eq!(srcpsp(&["solve", sch, "--bogus"]).0, 1);
    assert_eq!(srcpsp(&["check", "--instance", sch, "--schedule", "1,2"]).0, 1);
    assert_eq!(srcpsp(&["solve", "/no/such/file.sch"]).0, 2);

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.sch");
    std::fs::write(&broken, "2 1 0 0\n0 1 x\n").unwrap();
    let (code, _, err) = srcpsp(&["solve", broken.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("broken.sch"), "{err}");

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"instances": ["*.sch"], "samples": 3}"#).unwrap();
    assert_eq!(srcpsp(&["bench", "--config", cfg.to_str().unwrap()]).0, 2);
}

fn small_bench(dir: &Path, methods: &[&str]) -> Vec<ResultRow> {
    let sets = dir.join("sets/j10");
    std::fs::create_dir_all(&sets).unwrap();
    for name in ["PSP1", "PSP2", "PSP3"] {
        std::fs::copy(data(&format!("j10/{name}.sch")), sets.join(format!("{name}.sch"))).unwrap();
    }
    let cfg = serde_json::json!({
        "instances": ["sets/*/*.sch"],
        "epsilons": [1],
        "samples_per_instance": 10,
        "methods": methods,
        "seed": 5,
        "output_dir": "out"
    });
    let path = dir.join("bench.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let (code, out, err) = srcpsp(&["bench", "--config", path.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(code, 0, "{out}{err}");
    assert!(out.contains("feasibility ratio, epsilon = 1"), "{out}");
    for f in ["results.csv", "excluded.csv", "feasibility.csv", "config.json"] {
        assert!(dir.join("out").join(f).is_file(), "{f}");
    }
    read_results(&dir.join("out/results.csv")).unwrap()
}

#[test]
fn bench_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let rows = small_bench(dir.path(), &["proactive_q", "stnu"]);
    let excluded = std::fs::read_to_string(dir.path().join("out/excluded.csv")).unwrap().lines().count() - 1;
    assert!(rows.len() <= 60);
    assert_eq!(rows.len(), 2 * (30 - excluded));
    assert!(rows.iter().all(|r| r.instance_set == "j10" && r.epsilon == 1.0));
}

#[test]
fn simulate_reproduces_bench_rows() {
    let dir = tempfile::tempdir().unwrap();
    let rows = small_bench(dir.path(), &["stnu"]);
    let out = dir.path().join("sim.csv");
    let inst = dir.path().join("sets/j10/PSP2.sch");
    for _ in 0..2 {
        let (code, _, err) = srcpsp(&[
            "simulate",
            "--instance",
            inst.to_str().unwrap(),
            "--method",
            "stnu",
            "--epsilon",
            "1",
            "--samples",
            "10",
            "--seed",
            "5",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
    }
    let sim = read_results(&out).unwrap();
    assert_eq!(sim.len(), 20);
    let strip = |r: &ResultRow| (r.sample, r.seed, r.feasible, r.makespan, r.failure_reason);
    for r in rows.iter().filter(|r| r.instance == "PSP2") {
        let s = sim.iter().find(|s| s.sample == r.sample).unwrap();
        assert_eq!(strip(s), strip(r));
    }
}

#[test]
fn stats_dominant_method_single_strong_edge() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("r.csv");
    let mut text = String::from(
        "instance_set,instance,epsilon,sample,method,feasible,makespan,time_offline_ms,time_online_ms,failure_reason,seed\n",
    );
    for k in 0..15 {
        text += &format!("s,i{k},1.0,0,stnu,true,{},1.0,0.1,,{k}\n", 20 + k);
        text += &format!("s,i{k},1.0,0,reactive,true,{},1.0,0.1,,{k}\n", 25 + k);
    }
    std::fs::write(&results, text).unwrap();
    let dot = dir.path().join("q.dot");
    let (code, out, _) = srcpsp(&[
        "stats",
        "--results",
        results.to_str().unwrap(),
        "--metric",
        "quality",
        "--out",
        dot.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("reactive vs stnu"), "{out}");
    let dot = std::fs::read_to_string(dot).unwrap();
    let edges: Vec<&str> = dot.lines().filter(|l| l.contains("->")).collect();
    assert_eq!(edges, vec!["  stnu -> reactive [style=solid];"]);

    let (code, _, _) = srcpsp(&["stats", "--results", results.to_str().unwrap(), "--metric", "quality", "--alpha", "2"]);
    assert_eq!(code, 1);
}

#[test]
fn generate_writes_parseable_instances() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = srcpsp(&[
        "generate",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--count",
        "3",
        "--activities",
        "6",
        "--seed",
        "9",
    ]);
    assert_eq!(code, 0);
    for k in 1..=3 {
        let text = std::fs::read_to_string(dir.path().join(format!("PSP{k}.sch"))).unwrap();
        assert_eq!(parse_psplib(&text).unwrap().activity_count(), 6);
    }
}

#[test]
fn committed_j10_set_parses() {
    for k in 1..=10 {
        let text = std::fs::read_to_string(data(&format!("j10/PSP{k}.sch"))).unwrap();
        let inst = parse_psplib(&text).unwrap();
        assert_eq!(inst.activity_count(), 10);
        assert_eq!(inst.durations().len(), 12);
        assert_eq!(inst.resource_count(), 5);
    }
}
