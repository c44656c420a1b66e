//! End-to-end tests of the installed binary: exit codes, file outputs, and
//! the documented command flows.

use std::path::Path;
use std::process::{Command, Output};

use num_traits::ToPrimitive;

use ppmir::store::load_encrypted_db;
use ppmir::{BlockSchema, EmbeddingVector};
use ppmir_cli::cli::{EXIT_BUDGET, EXIT_KEY, EXIT_VALIDATION};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ppmir"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_corpus(path: &Path, count: usize, dim: usize, normalize: bool) {
    let schema = BlockSchema::default_music(dim).unwrap();
    let corpus = ppmir::synth_corpus(11, count, &schema, &ppmir::CorpusProfile::Uniform).unwrap();
    let vectors: Vec<EmbeddingVector> = if normalize {
        corpus.vectors.iter().map(|v| v.l2_normalized()).collect()
    } else {
        corpus.vectors
    };
    ppmir::store::write_jsonl(path, &vectors).unwrap();
}

#[test]
fn keygen_gates_sizes_and_overwrites() {
    let dir = tempfile::tempdir().unwrap();

    let out = run(&["keygen", "--bits", "512", "--out", "keys"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));

    let out = run(
        &[
            "keygen",
            "--bits",
            "512",
            "--out",
            "keys",
            "--insecure-test-keys",
        ],
        dir.path(),
    );
    assert_ok(&out);
    assert!(dir.path().join("keys/public.json").exists());
    assert!(dir.path().join("keys/private.json").exists());

    // Refuses to overwrite without --force.
    let out = run(
        &[
            "keygen",
            "--bits",
            "512",
            "--out",
            "keys",
            "--insecure-test-keys",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));

    let out = run(
        &[
            "keygen",
            "--bits",
            "512",
            "--out",
            "keys",
            "--insecure-test-keys",
            "--force",
        ],
        dir.path(),
    );
    assert_ok(&out);

    // Unsupported size.
    let out = run(&["keygen", "--bits", "768", "--out", "other"], dir.path());
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));

    // Written keys load back as a working pair.
    let keys = ppmir_cli::cli::load_keypair(&dir.path().join("keys")).unwrap();
    assert_eq!(keys.public.bits(), 512);
}

#[test]
fn encrypt_db_round_trips_and_reports_budget() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&run(
        &[
            "keygen",
            "--bits",
            "512",
            "--out",
            "keys",
            "--insecure-test-keys",
        ],
        dir.path(),
    ));
    write_corpus(&dir.path().join("emb.jsonl"), 3, 8, false);

    let out = run(
        &[
            "encrypt-db",
            "--input",
            "emb.jsonl",
            "--keys",
            "keys",
            "--out",
            "db",
            "--seed",
            "5",
        ],
        dir.path(),
    );
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("overflow budget ok"));

    // Decrypt-audit: every cell opens back to the source coordinate.
    let keys = ppmir_cli::cli::load_keypair(&dir.path().join("keys")).unwrap();
    let db = load_encrypted_db(dir.path().join("db")).unwrap();
    assert_eq!(db.vectors.len(), 3);
    let schema = BlockSchema::default_music(8).unwrap();
    let originals = ppmir::ingest_jsonl(dir.path().join("emb.jsonl"), &schema).unwrap();
    let tol = 0.5 / db.scale.coordinate_scale();
    for (orig, enc) in originals.iter().zip(&db.vectors) {
        assert_eq!(orig.id, enc.id);
        for (x, cell) in orig.values().iter().zip(enc.cells()) {
            let decoded =
                keys.decrypt(cell).unwrap().value().to_f64().unwrap() / db.scale.coordinate_scale();
            assert!((decoded - x).abs() <= tol);
        }
    }
}

#[test]
fn encrypt_db_budget_refusal_and_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&run(
        &[
            "keygen",
            "--bits",
            "512",
            "--out",
            "keys",
            "--insecure-test-keys",
        ],
        dir.path(),
    ));
    write_corpus(&dir.path().join("emb.jsonl"), 3, 8, false);

    // A scale far too wide for a 512-bit modulus is refused up front with the
    // budget exit code.
    let out = run(
        &[
            "encrypt-db",
            "--input",
            "emb.jsonl",
            "--keys",
            "keys",
            "--out",
            "db",
            "--max-abs",
            "1e60",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(EXIT_BUDGET));

    // Empty input: warning plus a loadable empty database.
    std::fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let out = run(
        &[
            "encrypt-db",
            "--input",
            "empty.jsonl",
            "--keys",
            "keys",
            "--out",
            "emptydb",
            "--dim",
            "8",
        ],
        dir.path(),
    );
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let db = load_encrypted_db(dir.path().join("emptydb")).unwrap();
    assert!(db.vectors.is_empty());
}

#[test]
fn search_flows_and_missing_key_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&run(
        &[
            "keygen",
            "--bits",
            "512",
            "--out",
            "keys",
            "--insecure-test-keys",
        ],
        dir.path(),
    ));
    write_corpus(&dir.path().join("emb.jsonl"), 10, 16, true);
    assert_ok(&run(
        &["init-db", "--input", "emb.jsonl", "--out", "plaindb"],
        dir.path(),
    ));
    assert_ok(&run(
        &[
            "encrypt-db",
            "--input",
            "emb.jsonl",
            "--keys",
            "keys",
            "--out",
            "encdb",
            "--seed",
            "2",
        ],
        dir.path(),
    ));

    // Self-query against the encrypted database ranks itself first.
    let first_line = std::fs::read_to_string(dir.path().join("emb.jsonl"))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    std::fs::write(dir.path().join("query.jsonl"), format!("{first_line}\n")).unwrap();
    let query_id: serde_json::Value = serde_json::from_str(&first_line).unwrap();
    let query_id = query_id["id"].as_str().unwrap().to_string();

    let out = run(
        &[
            "search",
            "--query",
            "query.jsonl",
            "--db",
            "encdb",
            "--k",
            "3",
            "--keys",
            "keys",
            "--out",
            "hits.json",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let hits: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("hits.json")).unwrap())
            .unwrap();
    assert_eq!(hits["hits"][0]["id"].as_str().unwrap(), query_id);
    assert_eq!(hits["hits"][0]["setting"].as_str().unwrap(), "encrypted_db");

    // Missing private key is the key-error exit code.
    let out = run(
        &[
            "search",
            "--query",
            "query.jsonl",
            "--db",
            "encdb",
            "--k",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(EXIT_KEY));
}

#[test]
fn one_hot_weights_rank_differently_on_divergent_blocks() {
    // Corpus built so rhythm-similarity and melody-similarity disagree:
    // target A matches the query's rhythm block, target B its melody block.
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&run(
        &[
            "keygen",
            "--bits",
            "512",
            "--out",
            "keys",
            "--insecure-test-keys",
        ],
        dir.path(),
    ));

    let rows = [
        r#"{"id":"query","values":[1,1,1,1, 2,2,2,2, 0,0,0,0, 0,0,0,0]}"#,
        r#"{"id":"rhythm-twin","values":[1,1,1,1, 0,0,0,0, 0,0,0,0, 0,0,0,0]}"#,
        r#"{"id":"melody-twin","values":[0,0,0,0, 2,2,2,2, 0,0,0,0, 0,0,0,0]}"#,
    ];
    std::fs::write(dir.path().join("emb.jsonl"), rows.join("\n")).unwrap();
    std::fs::write(dir.path().join("query.jsonl"), format!("{}\n", rows[0])).unwrap();
    assert_ok(&run(
        &[
            "encrypt-db",
            "--input",
            "emb.jsonl",
            "--keys",
            "keys",
            "--out",
            "encdb",
            "--seed",
            "3",
        ],
        dir.path(),
    ));

    // Best hit other than the query itself, under the given weights.
    let top_id = |weights: &str| -> String {
        let out = run(
            &[
                "search",
                "--query",
                "query.jsonl",
                "--db",
                "encdb",
                "--k",
                "3",
                "--kind",
                "weighted",
                "--weights",
                weights,
                "--keys",
                "keys",
                "--out",
                "hits.json",
            ],
            dir.path(),
        );
        assert_ok(&out);
        let hits: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("hits.json")).unwrap())
                .unwrap();
        hits["hits"]
            .as_array()
            .unwrap()
            .iter()
            .map(|h| h["id"].as_str().unwrap().to_string())
            .find(|id| id != "query")
            .unwrap()
    };

    assert_eq!(top_id("1,0,0,0"), "rhythm-twin");
    assert_eq!(top_id("0,1,0,0"), "melody-twin");
}

#[test]
fn bench_writes_csv_with_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "bench",
            "--dims",
            "8,16",
            "--n",
            "3",
            "--reps",
            "2",
            "--warmup",
            "0",
            "--bits",
            "512",
            "--insecure-test-keys",
            "--seed",
            "1",
            "--out",
            "bench",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let csv = std::fs::read_to_string(dir.path().join("bench/results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "setting,dimension,N,phase,median_ms,min_ms,max_ms,ct_bytes,reps,seed"
    );
    assert_eq!(lines.len(), 1 + 3 * 2, "header plus settings x dims rows");
    assert!(dir.path().join("bench/results.json").exists());
}

#[test]
fn attack_commands_validate_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "attack",
            "creator",
            "--artists",
            "1",
            "--trials",
            "1",
            "--bits",
            "512",
            "--insecure-test-keys",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));

    let out = run(
        &[
            "attack",
            "pattern",
            "--count",
            "20",
            "--planted",
            "4",
            "--dim",
            "16",
            "--strength",
            "3.0",
            "--bits",
            "512",
            "--insecure-test-keys",
            "--seed",
            "7",
            "--out",
            "report.json",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["attack"], "pattern_inference");
    assert!(report["metrics"]["auc"].as_f64().unwrap() >= 0.95);
}

#[test]
fn serve_refuses_encrypted_databases() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&run(
        &[
            "keygen",
            "--bits",
            "512",
            "--out",
            "keys",
            "--insecure-test-keys",
        ],
        dir.path(),
    ));
    write_corpus(&dir.path().join("emb.jsonl"), 3, 8, false);
    assert_ok(&run(
        &[
            "encrypt-db",
            "--input",
            "emb.jsonl",
            "--keys",
            "keys",
            "--out",
            "encdb",
        ],
        dir.path(),
    ));
    let out = run(
        &["serve", "--db", "encdb", "--bind", "127.0.0.1:0"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(EXIT_VALIDATION));
}
