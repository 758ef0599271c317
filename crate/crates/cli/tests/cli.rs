use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn aas(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aas"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn aas")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = aas(dir, args);
    assert!(
        out.status.success(),
        "aas {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth(dir: &Path, name: &str, within: &str) {
    ok(
        dir,
        &[
            "synth", "--identities", "8", "--per-identity", "6", "--dim", "8", "--within", within,
            "--seed", "5", "--out", name,
        ],
    );
}

#[test]
fn offline_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "g.bin", "0.05");
    std::fs::copy(d.join("g.bin"), d.join("q.bin")).unwrap();
    std::fs::copy(d.join("g.bin.json"), d.join("q.bin.json")).unwrap();

    ok(d, &["cluster", "--embeddings", "g.bin", "--method", "finch", "--out", "p.csv"]);
    ok(
        d,
        &[
            "sample", "--embeddings", "g.bin", "--out", "queries.jsonl", "--pool-out",
            "pool.jsonl", "--budget-fraction-per-cycle", "0.05",
        ],
    );
    let queries = std::fs::read_to_string(d.join("queries.jsonl")).unwrap();
    for line in queries.lines() {
        let q: Value = serde_json::from_str(line).unwrap();
        assert!(q["a"].is_string() && q["b"].is_string());
    }

    // Answer two pairs by hand and refine.
    std::fs::write(
        d.join("c.jsonl"),
        "{\"a\":\"s00000\",\"b\":\"s00001\",\"relation\":\"ml\"}\n\
         {\"a\":\"s00000\",\"b\":\"s00010\",\"relation\":\"cl\"}\n",
    )
    .unwrap();
    ok(
        d,
        &[
            "refine", "--embeddings", "g.bin", "--partition", "p.csv", "--constraints", "c.jsonl",
            "--linkage", "average", "--out", "r.csv",
        ],
    );
    let refined = std::fs::read_to_string(d.join("r.csv")).unwrap();
    let cluster = |id: &str| -> String {
        refined
            .lines()
            .find(|l| l.starts_with(&format!("{id},")))
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .to_string()
    };
    assert_eq!(cluster("s00000"), cluster("s00001"));
    assert_ne!(cluster("s00000"), cluster("s00010"));

    ok(d, &["evaluate", "--gallery", "g.bin", "--query", "q.bin", "--out", "m.json"]);
    let m: Value = serde_json::from_str(&std::fs::read_to_string(d.join("m.json")).unwrap()).unwrap();
    assert!((m["map"].as_f64().unwrap() - 1.0).abs() < 1e-12, "{m}");
    assert_eq!(m["top1"].as_f64(), Some(1.0));
}

#[test]
fn loop_writes_one_record_per_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "e.bin", "0.8");
    ok(
        d,
        &[
            "loop", "--embeddings", "e.bin", "--out", "run", "--num-cycles", "5",
            "--budget-fraction-per-cycle", "0.02", "--refresh", "synthetic", "--seed", "11",
            "--threads", "2",
        ],
    );
    let history: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("run/history.json")).unwrap())
            .unwrap();
    let records = history.as_array().unwrap();
    assert_eq!(records.len(), 5);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r["cycle"].as_u64(), Some(i as u64));
        assert!(d.join(format!("run/cycle_{i:02}/partition.csv")).exists());
    }
    let metrics: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("run/metrics.json")).unwrap())
            .unwrap();
    assert_eq!(metrics["cycles"].as_u64(), Some(5));
    let config: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("run/config.json")).unwrap())
            .unwrap();
    assert_eq!(config["rng_seed"].as_u64(), Some(11));
}

#[test]
fn random_seed_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "e.bin", "0.8");
    let out = ok(d, &["cluster", "--embeddings", "e.bin", "--out", "p.csv", "--seed", "random"]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().find(|l| l.starts_with("seed: ")).expect(&stderr);
    line["seed: ".len()..].parse::<u64>().unwrap();
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "e.bin", "0.8");
    ok(d, &["cluster", "--embeddings", "e.bin", "--out", "p.csv"]);

    std::fs::write(
        d.join("bad.jsonl"),
        "{\"a\":\"s00000\",\"b\":\"s00001\",\"relation\":\"ml\"}\n\
         {\"a\":\"s00001\",\"b\":\"s00002\",\"relation\":\"ml\"}\n\
         {\"a\":\"s00000\",\"b\":\"s00002\",\"relation\":\"cl\"}\n",
    )
    .unwrap();
    let out = aas(
        d,
        &[
            "refine", "--embeddings", "e.bin", "--partition", "p.csv", "--constraints",
            "bad.jsonl", "--out", "r.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("r.csv").exists());

    std::fs::write(d.join("cfg.json"), "{\"epsilon\": 1.5}").unwrap();
    let out = aas(d, &["cluster", "--embeddings", "e.bin", "--out", "x.csv", "--config", "cfg.json"]);
    assert_eq!(out.status.code(), Some(1));
    let out = aas(d, &["cluster", "--embeddings", "e.bin", "--out", "x.csv", "--knn-k", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(aas(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(aas(d, &["--help"]).status.code(), Some(0));
    let out = aas(d, &["loop", "--embeddings", "missing.bin", "--out", "run"]);
    assert_eq!(out.status.code(), Some(1));
}
