use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rankpromo"));
    c.env_remove("RANKPROMO_CONFIG").env("RUST_LOG", "warn");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn full_pipeline_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(
        dir,
        &[
            "generate",
            "--out",
            ".",
            "--queries",
            "12",
            "--competition-rounds",
            "3",
        ],
    );
    for f in [
        "snapshots.jsonl",
        "offline.jsonl",
        "stats.json",
        "embeddings.txt",
        "rankpromo.toml",
    ] {
        assert!(dir.join(f).exists(), "{f} missing");
    }

    let trained = ok(
        dir,
        &[
            "-c",
            "rankpromo.toml",
            "train",
            "--label-mode",
            "l",
            "--dataset-out",
            "ds.jsonl",
            "--out",
            "model_l.json",
        ],
    );
    assert!(trained.contains("chosen C="));
    assert!(trained.contains("QryTermTarget"));
    for m in ["r_only", "c_only"] {
        let out = format!("model_{m}.json");
        ok(
            dir,
            &[
                "-c",
                "rankpromo.toml",
                "train",
                "--label-mode",
                m,
                "--dataset",
                "ds.jsonl",
                "--out",
                &out,
            ],
        );
    }
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("model_c_only.json")).unwrap())
            .unwrap();
    assert_eq!(model["metadata"]["label_mode"], "c_only");

    let table = ok(dir, &["-c", "rankpromo.toml", "compete"]);
    assert!(table.lines().any(|l| l.starts_with("bot")));
    for f in ["results.jsonl", "table1.txt", "series.jsonl"] {
        assert!(dir.join("out").join(f).exists(), "{f} missing");
    }
    // Same settings, same results.
    let first = std::fs::read(dir.join("out/results.jsonl")).unwrap();
    ok(dir, &["-c", "rankpromo.toml", "compete"]);
    assert_eq!(first, std::fs::read(dir.join("out/results.jsonl")).unwrap());

    let offline = ok(
        dir,
        &["-c", "rankpromo.toml", "offline-eval", "--n-perm", "500"],
    );
    for arm in ["l", "r_only", "c_only", "static", "student"] {
        assert!(
            offline
                .lines()
                .any(|l| l.split_whitespace().next() == Some(arm)),
            "arm {arm}"
        );
    }

    let report = ok(
        dir,
        &[
            "report",
            "--results",
            "out/results.jsonl",
            "--offline",
            "out/offline_report.json",
            "--model",
            "model_l.json",
        ],
    );
    assert!(report.contains("quality_proxy"));
    assert!(report.contains("SimSrcTarget(W2V)"));

    // A low-ranked document of a stored snapshot.
    let snap: serde_json::Value = serde_json::from_str(
        std::fs::read_to_string(dir.join("snapshots.jsonl"))
            .unwrap()
            .lines()
            .next()
            .unwrap(),
    )
    .unwrap();
    let rankings = snap["history"]["rankings"].as_array().unwrap();
    let last = rankings.last().unwrap()["doc_ids"].as_array().unwrap();
    let qid = snap["query"]["id"].as_str().unwrap();
    let top = last[0].as_str().unwrap();
    let low = last[last.len() - 1].as_str().unwrap();

    let audit: serde_json::Value = serde_json::from_str(&ok(
        dir,
        &[
            "-c",
            "rankpromo.toml",
            "modify",
            "--query",
            qid,
            "--doc",
            low,
            "--explain",
        ],
    ))
    .unwrap();
    assert_eq!(audit["doc_id"], low);
    assert!(!audit["candidates"].as_array().unwrap().is_empty());

    let audit: serde_json::Value = serde_json::from_str(&ok(
        dir,
        &[
            "-c",
            "rankpromo.toml",
            "modify",
            "--query",
            qid,
            "--doc",
            top,
            "--explain",
        ],
    ))
    .unwrap();
    assert_eq!(audit["outcome"], "unchanged");
}

#[test]
fn exit_codes_separate_bad_input_from_runtime_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("bad.toml"), "bogus = 1\n").unwrap();
    assert_eq!(
        run(dir, &["-c", "bad.toml", "compete"]).status.code(),
        Some(2)
    );
    std::fs::write(dir.join("neg.toml"), "[training]\nfolds = 1\n").unwrap();
    assert_eq!(
        run(dir, &["-c", "neg.toml", "train"]).status.code(),
        Some(2)
    );
    assert_eq!(run(dir, &["report"]).status.code(), Some(2));
    assert_eq!(run(dir, &["compete"]).status.code(), Some(2));
    assert_eq!(
        run(dir, &["-c", "missing.toml", "compete"]).status.code(),
        Some(3)
    );
    assert_eq!(
        run(dir, &["report", "--model", "missing.json"])
            .status
            .code(),
        Some(3)
    );
    std::fs::write(dir.join("garbage.json"), "{}\n").unwrap();
    assert_eq!(
        run(dir, &["report", "--model", "garbage.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn serve_answers_http() {
    let tmp = tempfile::tempdir().unwrap();
    let mut child = bin()
        .current_dir(tmp.path())
        .env("RUST_LOG", "info")
        .env("RANKPROMO_BIND", "127.0.0.1:0")
        .env("RANKPROMO_DATA_DIR", tmp.path().join("data"))
        .env("RANKPROMO_ADMIN_TOKEN", "secret")
        .arg("serve")
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addr = loop {
        let line = lines.next().expect("server exited early").unwrap();
        if let Some(rest) = line.split("listening on ").nth(1) {
            break rest.trim().to_string();
        }
    };
    let mut s = TcpStream::connect(&addr).unwrap();
    write!(
        s,
        "GET /competitions/nope HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(resp.starts_with("HTTP/1.1 404"), "{resp}");
    assert!(tmp.path().join("data").is_dir());
}
