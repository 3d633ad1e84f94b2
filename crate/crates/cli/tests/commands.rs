use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

fn blocksig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blocksig")).args(args).output().expect("run blocksig")
}

fn ok(args: &[&str]) -> Output {
    let out = blocksig(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two groups of 20, mean +-tau on columns 61..=66 and 141..=146 of 200.
fn planted_csv(dir: &Path, tau: f64, seed: u64) -> PathBuf {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    for i in 0..40 {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let row: Vec<String> = (1..=200)
            .map(|j| {
                let mu = if (61..=66).contains(&j) || (141..=146).contains(&j) { sign * tau } else { 0.0 };
                format!("{:?}", mu + r.sample::<f64, _>(StandardNormal))
            })
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let path = dir.join(format!("planted-{seed}.csv"));
    std::fs::write(&path, text).unwrap();
    path
}

fn noise_csv(dir: &Path, n: usize, p: usize) -> PathBuf {
    let mut r = ChaCha8Rng::seed_from_u64(99);
    let text: String = (0..n)
        .map(|_| {
            let row: Vec<String> = (0..p).map(|_| format!("{:?}", r.sample::<f64, _>(StandardNormal))).collect();
            row.join(",") + "\n"
        })
        .collect();
    let path = dir.join("noise.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn cluster_ma_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let input = planted_csv(dir.path(), 1.2, 1);
    let out = dir.path().join("ma");
    ok(&["cluster", "-i", s(&input), "--method", "ma", "--h1", "5", "--h3", "4", "-o", s(&out)]);
    let labels = json(&out.join("labels.json"));
    assert_eq!(labels["schema_version"], 1);
    let l: Vec<i64> = labels["labels"].as_array().unwrap().iter().map(|v| v.as_i64().unwrap()).collect();
    assert_eq!(l.len(), 40);
    let agree = l.iter().enumerate().filter(|(i, &v)| (v == 1) == (i % 2 == 0)).count();
    assert!(agree == 0 || agree == 40, "labels {l:?}");
    let signal: Vec<usize> =
        std::fs::read_to_string(out.join("signal.txt")).unwrap().lines().map(|t| t.parse().unwrap()).collect();
    let want: Vec<usize> = (61..=66).chain(141..=146).collect();
    assert_eq!(signal, want);
    let blocks = json(&out.join("blocks.json"));
    assert_eq!(blocks["kind"], "interval");
    assert_eq!(blocks["blocks"]["blocks"].as_array().unwrap().len(), 2);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["n"], 40);
    assert_eq!(summary["s_hat"], 12);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = planted_csv(dir.path(), 1.2, 2);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (o, threads) in [(&a, "1"), (&b, "3")] {
        ok(&["--threads", threads, "cluster", "-i", s(&input), "--method", "kmeans", "--seed", "5", "-o", s(o)]);
    }
    let (ra, rb) = (read_dir_bytes(&a), read_dir_bytes(&b));
    // the summary embeds the output directory
    let strip = |v: Vec<(String, Vec<u8>)>| v.into_iter().filter(|(n, _)| n != "summary.json").collect::<Vec<_>>();
    assert_eq!(strip(ra), strip(rb));
}

#[test]
fn cfa_on_noise_records_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let input = noise_csv(dir.path(), 200, 20);
    let out = dir.path().join("cfa");
    let res = ok(&["cluster", "-i", s(&input), "--method", "cfa", "--h1", "1", "--h2", "2", "-o", s(&out)]);
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["path"], "moving_average");
    assert!(!summary["notes"].as_array().unwrap().is_empty());
    assert!(String::from_utf8_lossy(&res.stderr).contains("note:"));
}

#[test]
fn manifest_drives_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let input = planted_csv(dir.path(), 1.2, 3);
    let out = dir.path().join("m");
    let manifest = dir.path().join("run.json");
    let body = serde_json::json!({
        "input": input, "method": "ma", "h1": 5, "h3": 4, "seed": 0, "output": out,
    });
    std::fs::write(&manifest, body.to_string()).unwrap();
    ok(&["cluster", "--manifest", s(&manifest)]);
    assert_eq!(json(&out.join("summary.json"))["s_hat"], 12);
}

#[test]
fn recover_from_label_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = planted_csv(dir.path(), 1.2, 4);
    let labels = dir.path().join("labels.txt");
    let text: String = (0..40).map(|i| if i % 2 == 0 { "1\n" } else { "-1\n" }).collect();
    std::fs::write(&labels, text).unwrap();
    let sig = dir.path().join("sig.txt");
    let res = ok(&["recover", "-i", s(&input), "--labels", s(&labels), "--h1", "5", "--signal", s(&sig)]);
    let v: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(std::fs::read_to_string(sig).unwrap().lines().count(), 12);
}

#[test]
fn tune_emits_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = planted_csv(dir.path(), 1.2, 6);
    let res = ok(&["tune", "-i", s(&input), "--method", "ma", "--h-max", "5"]);
    let csv = String::from_utf8(res.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("h1,second,s_hat,loss,chosen"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 15);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",1")).count(), 1);

    let truth = dir.path().join("truth.txt");
    let text: String = (0..40).map(|i| if i % 2 == 0 { "1\n" } else { "-1\n" }).collect();
    std::fs::write(&truth, text).unwrap();
    let res = ok(&["tune", "-i", s(&input), "--h-max", "5", "--truth", s(&truth)]);
    let csv = String::from_utf8(res.stdout).unwrap();
    let chosen = csv.lines().find(|r| r.ends_with(",1")).unwrap();
    let loss: f64 = chosen.split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(loss, 0.0, "{chosen}");
}

#[test]
fn phase_csv() {
    let res = ok(&["phase", "--theta", "0.4", "--betas", "0.1,0.6", "--rs", "0,0.25,0.9"]);
    let csv = String::from_utf8(res.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "beta,r,class_clu,class_sig");
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[1], "0.1,0.0,poly_achievable,poly_achievable");
    assert!(lines[3].ends_with("stat_impossible,stat_impossible"));
    assert_eq!(blocksig(&["phase", "--theta", "0.9", "--alpha", "0.5"]).status.code(), Some(3));
}

#[test]
fn diff_command() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("panel.csv");
    std::fs::write(&input, "1,2\n4,4\n2,7\n").unwrap();
    let out = dir.path().join("d.csv");
    ok(&["diff", "-i", s(&input), "-o", s(&out)]);
    assert_eq!(std::fs::read_to_string(out).unwrap(), "3.0,2.0\n-2.0,3.0\n");
}

#[test]
fn simulate_truth_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, truth) = (dir.path().join("s.csv"), dir.path().join("t.json"));
    ok(&["simulate", "--reps", "2", "--tau", "0.3", "--methods", "ma", "-o", s(&csv), "--truth", s(&truth)]);
    let t = json(&truth);
    assert_eq!(t["n"], 22);
    assert_eq!(t["schema_version"], 1);
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("tau,method,clu_loss,sig_loss,reps,failures,flagged\n0.3,ma,"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3,x\n").unwrap();
    let out = dir.path().join("o");
    let code = |args: &[&str]| blocksig(args).status.code();
    assert_eq!(code(&["cluster", "-i", s(&bad), "--method", "ma", "-o", s(&out)]), Some(2));
    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&["cluster", "-i", s(&missing), "--method", "ma", "-o", s(&out)]), Some(5));
    let input = planted_csv(dir.path(), 1.0, 7);
    assert_eq!(code(&["cluster", "-i", s(&input), "--method", "ma", "--h1", "0", "-o", s(&out)]), Some(3));
    assert_eq!(code(&["cluster", "-i", s(&input), "-o", s(&out)]), Some(3));
    assert_eq!(code(&["tune", "-i", s(&input)]), Some(3));
}
