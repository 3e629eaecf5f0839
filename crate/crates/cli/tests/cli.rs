use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn qprl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qprl"))
        .args(args)
        .env_remove("QPRL_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = qprl(args);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn code(args: &[&str]) -> i32 {
    qprl(args).status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fields(row: &str) -> Vec<String> {
    row.trim_end().split(',').map(str::to_string).collect()
}

fn config(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn gen_star_has_one_entry_per_leaf() {
    let v: Value = serde_json::from_str(&ok(&["gen", "star", "--leaves", "5"])).unwrap();
    assert_eq!(v["kind"], "qp_ratio");
    assert_eq!(v["n"], 6);
    assert_eq!(v["entries"].as_array().unwrap().len(), 5);
    assert_eq!(v["meta"]["params"]["leaves"], 5);
}

#[test]
fn gen_bipartite_gap_is_frozen() {
    let a = ok(&["gen", "bipartite-gap", "--n", "16", "--seed", "7"]);
    assert_eq!(a, ok(&["gen", "bipartite-gap", "--n", "16", "--seed", "7"]));
    assert_eq!(
        format!("{:x}", Sha256::digest(a.as_bytes())),
        "0cc187f9158a2ae6cc9c01bf99cb2e6867b6920b6f73112637b50d041548899d"
    );
}

#[test]
fn gen_planted_has_the_advertised_shape() {
    let v: Value =
        serde_json::from_str(&ok(&["gen", "planted", "--n", "100", "--seed", "1"])).unwrap();
    let n = v["n"].as_u64().unwrap() as usize;
    let sides = v["bipartition"].as_array().unwrap();
    let left = sides[0].as_array().unwrap().len();
    let right = sides[1].as_array().unwrap().len();
    assert_eq!(left, 100);
    assert_eq!(left + right, n);
    assert_eq!(v["meta"]["seed"], 1);
    for e in v["entries"].as_array().unwrap() {
        let w = e[2].as_f64().unwrap();
        assert!(w == 1.0 || w == -1.0);
    }
}

#[test]
fn solve_single_edge_reports_value_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("edge.json");
    std::fs::write(&f, r#"{"kind":"qp_ratio","n":2,"entries":[[0,1,1.0]]}"#).unwrap();
    let row = fields(&ok(&["solve", p(&f), "--algo", "general", "--seed", "1"]));
    assert_eq!(row.len(), 12);
    assert_eq!((row[0].as_str(), row[4].as_str()), ("edge", "general"));
    assert_eq!(row[5].parse::<f64>().unwrap(), 1.0);
    assert_eq!(row[7], "oracle");
    assert_eq!(row[11], "ok");

    let log = dir.path().join("rows.csv");
    ok(&["solve", p(&f), "--algo", "trivial", "--csv", p(&log)]);
    ok(&["solve", p(&f), "--algo", "general", "--csv", p(&log)]);
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("instance_id,family,n,seed,algo,"));
}

#[test]
fn bipartite_algo_needs_a_bipartition() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("star.json");
    std::fs::write(&f, ok(&["gen", "star", "--leaves", "4"])).unwrap();
    assert_eq!(code(&["solve", p(&f), "--algo", "bipartite"]), 2);
}

#[test]
fn trevisan_on_star_is_normalized() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("star.json");
    std::fs::write(&f, ok(&["gen", "star", "--leaves", "4"])).unwrap();
    let row = fields(&ok(&["solve", p(&f), "--algo", "trevisan"]));
    // Every assignment of a star has normalized value at most 1, and the
    // full star attains it.
    assert_eq!(row[5].parse::<f64>().unwrap(), 1.0);
    assert_eq!(row[6].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn usage_and_validation_errors_exit_with_two() {
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["gen", "nonsense"]), 2);
    assert_eq!(code(&["gen", "random"]), 2);
    assert_eq!(
        code(&["solve", "/nonexistent.json", "--algo", "general"]),
        2
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"kind":"qp_ratio","n":2,"entries":[[0,1,1.0],[0,1,2.0]]}"#,
    )
    .unwrap();
    assert_eq!(code(&["relax", p(&bad), "--method", "eig"]), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_qprl"))
        .args(["gen", "star", "--leaves", "3"])
        .env("QPRL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exact_refuses_above_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("r.json");
    std::fs::write(&f, ok(&["gen", "random", "--n", "14", "--seed", "3"])).unwrap();
    let o = qprl(&["exact", p(&f)]);
    assert_eq!(o.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("14") && msg.contains("12"), "{msg}");
    let v: Value = serde_json::from_str(&ok(&["exact", p(&f), "--cap", "14"])).unwrap();
    assert!(v["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn relax_and_certify_agree() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("g.json");
    let gram = dir.path().join("gram.json");
    std::fs::write(&f, ok(&["gen", "bipartite-gap", "--n", "9", "--seed", "2"])).unwrap();
    let sdp: Value = serde_json::from_str(&ok(&[
        "relax",
        p(&f),
        "--method",
        "sdp",
        "--seed",
        "4",
        "--gram-out",
        p(&gram),
    ]))
    .unwrap();
    let eig: Value = serde_json::from_str(&ok(&["relax", p(&f), "--method", "eig"])).unwrap();
    assert_eq!(sdp["feasible"], true);
    assert!(sdp["value"].as_f64().unwrap() <= eig["value"].as_f64().unwrap() + 1e-6);
    let cert: Value = serde_json::from_str(&ok(&["certify", p(&f), p(&gram)])).unwrap();
    assert_eq!(cert["objective"], sdp["value"]);

    let mut g: Value = serde_json::from_str(&std::fs::read_to_string(&gram).unwrap()).unwrap();
    let first = g["vectors"][0][0].as_f64().unwrap();
    g["vectors"][0][0] = Value::from(first + 1.0);
    std::fs::write(&gram, g.to_string()).unwrap();
    assert_eq!(code(&["certify", p(&f), p(&gram)]), 2);
}

#[test]
fn reduce_records_source_hash() {
    let dir = tempfile::tempdir().unwrap();
    let k = dir.path().join("k.json");
    std::fs::write(
        &k,
        ok(&["gen", "kand", "--n", "6", "--alpha", "0.25", "--seed", "2"]),
    )
    .unwrap();
    let out: Value =
        serde_json::from_str(&ok(&["reduce", "--from", "kand", p(&k), "--alpha", "0.25"])).unwrap();
    let src = std::fs::read(&k).unwrap();
    assert_eq!(
        out["meta"]["params"]["source_sha256"],
        format!("{:x}", Sha256::digest(&src))
    );
    assert_eq!(out["meta"]["params"]["source_kind"], "kand");

    let ug: Value = serde_json::from_str(&ok(&[
        "reduce",
        "--from",
        "ug",
        &config("ug-triangle.json"),
        "--max-r",
        "2",
    ]))
    .unwrap();
    assert_eq!(ug["kind"], "qp_intermediate");
    assert_eq!(ug["n"], 12);

    let img: Value = serde_json::from_str(&ok(&[
        "reduce",
        "--from",
        "intermediate",
        &config("intermediate-pair.json"),
    ]))
    .unwrap();
    assert_eq!(img["kind"], "qp_ratio");
    assert_eq!(img["meta"]["params"]["source_kind"], "qp_intermediate");
}

#[test]
fn smoke_bench_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("plot.svg");
    let cfg = config("smoke.json");
    let a = ok(&["bench", &cfg, "--svg", p(&svg)]);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(
        lines[0],
        "instance_id,family,n,seed,algo,value,bound,bound_kind,ratio,support,runtime_ms,status"
    );
    assert_eq!(lines.len(), 1 + 3 * 3 + 3 * 2 * 4);
    for row in &lines[1..] {
        let f = fields(row);
        assert_eq!(f[11], "ok", "{row}");
        if f[7] == "oracle" {
            assert!(f[8].parse::<f64>().unwrap() <= 1.0 + 1e-9, "{row}");
        }
    }
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let o = Command::new(env!("CARGO_BIN_EXE_qprl"))
        .args(["bench", &cfg])
        .env("QPRL_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(stdout(&o), a);
}
