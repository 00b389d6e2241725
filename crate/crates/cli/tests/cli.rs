use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use cardioforge_core::beats::{load_beats, Label};

fn run(args: &[&str]) -> Output {
    run_env(args, None)
}

fn run_env(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cardioforge"));
    cmd.args(args).env_remove("CARDIOFORGE_SEED");
    if let Some(s) = seed_env {
        cmd.env("CARDIOFORGE_SEED", s);
    }
    cmd.output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn manifest_seed(dir: &Path) -> u64 {
    let text = std::fs::read_to_string(dir.join("manifest.toml")).unwrap();
    let table: toml::Table = toml::from_str(&text).unwrap();
    table["seed"].as_integer().unwrap() as u64
}

#[test]
fn simulate_zero_count_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--count", "0", "--out", &s(dir.path())]);
    let text = std::fs::read_to_string(dir.path().join("beats.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("label,"));
    assert!(dir.path().join("manifest.toml").exists());
}

#[test]
fn simulate_default_parameters_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["simulate", "--count", "100", "--seed", "1", "--out", &s(dir.path())]);
    let beats = load_beats(&dir.path().join("beats.csv")).unwrap();
    assert_eq!(beats.len(), 100);
    assert!(beats.iter().all(|b| b.label == Label::N && b.samples.len() == 216));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        ok(&[
            "simulate",
            "--count",
            "7",
            "--noise",
            "0.05",
            "--seed",
            "11",
            "--out",
            &s(d.path()),
        ]);
    }
    let read = |d: &Path| std::fs::read(d.join("beats.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let c = tempfile::tempdir().unwrap();
    ok(&[
        "simulate",
        "--count",
        "7",
        "--noise",
        "0.05",
        "--seed",
        "12",
        "--out",
        &s(c.path()),
    ]);
    assert_ne!(read(a.path()), read(c.path()));
}

#[test]
fn usage_and_input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["simulate", "--out", &s(dir.path())]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));

    let bad = dir.path().join("eta.csv");
    std::fs::write(&bad, "class,component_name,mean,var\nN,theta_P,not-a-number,0\n").unwrap();
    let out = run(&[
        "simulate",
        "--eta-file",
        &s(&bad),
        "--count",
        "3",
        "--out",
        &s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let missing = dir.path().join("missing.csv");
    let out = run(&[
        "fit",
        "--beats",
        &s(&missing),
        "--class",
        "N",
        "--out",
        &s(&dir.path().join("f")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&[
        "corpus",
        "--train",
        "1,2,3",
        "--test",
        "1,1,1,1",
        "--out",
        &s(&dir.path().join("c")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gan.toml");
    std::fs::write(&cfg, "seed = 21\niterations = 0\nscale = 0.125\nregime = \"dcgan\"\n").unwrap();
    ok(&[
        "simulate",
        "--count",
        "4",
        "--seed",
        "1",
        "--out",
        &s(&dir.path().join("sim")),
    ]);
    let beats = s(&dir.path().join("sim/beats.csv"));

    let gan = |name: &str, flag: Option<&str>, env: Option<&str>| {
        let out = dir.path().join(name);
        let mut args = vec!["gan-train", "--config", cfg.to_str().unwrap(), "--beats", &beats];
        let out_s = s(&out);
        if let Some(f) = flag {
            args.extend(["--seed", f]);
        }
        args.extend(["--out", &out_s]);
        let o = run_env(&args, env);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        manifest_seed(&out)
    };
    assert_eq!(gan("flag", Some("5"), Some("9")), 5);
    assert_eq!(gan("config", None, Some("9")), 21);

    let sim = |name: &str, env: Option<&str>| {
        let out = dir.path().join(name);
        let o = run_env(&["simulate", "--count", "1", "--out", &s(&out)], env);
        assert!(o.status.success());
        manifest_seed(&out)
    };
    assert_eq!(sim("env", Some("9")), 9);
    assert_eq!(sim("default", None), 0);
    let o = run_env(
        &["simulate", "--count", "1", "--out", &s(&dir.path().join("x"))],
        Some("abc"),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_of_perfect_scores_reports_unit_area() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "corpus",
        "--train",
        "0,0,0,0",
        "--test",
        "6,3,4,2",
        "--seed",
        "2",
        "--out",
        &s(dir.path()),
    ]);
    let test = load_beats(&dir.path().join("test.csv")).unwrap();
    let mut scores = String::from("p_N,p_S,p_V,p_F\n");
    for b in &test {
        let mut p = [0.0; 4];
        p[b.label.index()] = 1.0;
        scores.push_str(&format!("{},{},{},{}\n", p[0], p[1], p[2], p[3]));
    }
    let file = dir.path().join("oracle.csv");
    std::fs::write(&file, scores).unwrap();
    let out = ok(&[
        "eval",
        "--scores",
        &format!("oracle={}", s(&file)),
        "--model",
        &format!("ghost={}", s(&dir.path().join("nothing-here"))),
        "--test",
        &s(&dir.path().join("test.csv")),
        "--out",
        &s(&dir.path().join("eval")),
    ]);
    let summary = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = summary.lines().filter(|l| l.starts_with("oracle")).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|l| l.split_whitespace().nth(2) == Some("1.0000")));
    assert!(summary.contains("absent: ghost"));
    let curve = std::fs::read_to_string(dir.path().join("eval/curves/oracle_S.csv")).unwrap();
    assert!(curve.starts_with("threshold,recall,precision\n"));
}

#[test]
fn full_pipeline_smoke() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let p = |x: &str| s(&dir.path().join(x));
    ok(&[
        "corpus",
        "--train",
        "40,10,10,4",
        "--test",
        "10,5,5,2",
        "--seed",
        "3",
        "--out",
        &p("corpus"),
    ]);
    ok(&[
        "fit",
        "--beats",
        &p("corpus/train.csv"),
        "--class",
        "V",
        "--max-beats",
        "3",
        "--out",
        &p("fit"),
    ]);
    let eta = std::fs::read_to_string(dir.path().join("fit/eta.csv")).unwrap();
    assert!(eta.contains("# class=V count=3"));
    ok(&[
        "gan-train",
        "--beats",
        &p("corpus/train.csv"),
        "--class",
        "V",
        "--eta-dist",
        &p("fit/eta.csv"),
        "--regime",
        "sim_dcgan",
        "--iterations",
        "10",
        "--scale",
        "0.125",
        "--out",
        &p("gan"),
    ]);
    let log = std::fs::read_to_string(dir.path().join("gan/log.csv")).unwrap();
    assert_eq!(log.lines().count(), 11);
    ok(&[
        "gan-generate",
        "--model",
        &p("gan"),
        "--count",
        "10",
        "--out",
        &p("gen"),
    ]);
    let generated = load_beats(&dir.path().join("gen/beats.csv")).unwrap();
    assert_eq!(generated.len(), 10);
    assert!(generated.iter().all(|b| b.label == Label::V));
    ok(&[
        "classify",
        "--train",
        &p("corpus/train.csv"),
        "--synth",
        &p("gen/beats.csv"),
        "--epochs",
        "1",
        "--scale",
        "0.125",
        "--out",
        &p("clf"),
    ]);
    let out = ok(&[
        "eval",
        "--model",
        &format!("sim_dcgan={}", p("clf")),
        "--test",
        &p("corpus/test.csv"),
        "--out",
        &p("eval"),
    ]);
    let summary = String::from_utf8(out.stdout).unwrap();
    assert_eq!(summary.lines().filter(|l| l.starts_with("sim_dcgan")).count(), 4);
    assert!(dir.path().join("eval/scores/sim_dcgan.csv").exists());
    assert!(started.elapsed().as_secs() < 300);
}
