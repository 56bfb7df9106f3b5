//! End-to-end tests driving the `tandem` binary through temp directories.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tandem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tandem"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_code(out: &Output, want: i32) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// 30 patterned documents, 4 queries, and judgments for all 4.
fn write_fixture(dir: &Path) {
    let words = [
        "storm", "flood", "coast", "rescue", "harbor", "bridge", "river", "wind", "rain",
        "cliff", "engine", "market", "trade", "grain", "vessel", "cargo",
    ];
    // Three vocabulary groups of six words (overlapping at the edges), so
    // mined queries from one group have non-matching passages in the
    // others and negative sampling always has room.
    let mut corpus = String::new();
    for i in 0..30usize {
        let base = (i % 3) * 5;
        let mut text = String::new();
        for j in 0..40usize {
            text.push_str(words[base + (i * 7 + j) % 6]);
            text.push(' ');
        }
        corpus.push_str(&format!(
            "{{\"id\": \"doc{i:03}\", \"text\": \"{}\"}}\n",
            text.trim_end()
        ));
    }
    fs::write(dir.join("corpus.jsonl"), corpus).unwrap();
    fs::write(
        dir.join("queries.tsv"),
        "q1\tstorm flood rescue\nq2\tharbor cargo vessel\nq3\tbridge river wind\nq4\tmarket trade grain\n",
    )
    .unwrap();
    let mut qrels = String::new();
    for (q, docs) in [
        ("q1", vec!["doc001", "doc005", "doc009"]),
        ("q2", vec!["doc002", "doc006"]),
        ("q3", vec!["doc003", "doc007"]),
        ("q4", vec!["doc004", "doc008"]),
    ] {
        for d in docs {
            qrels.push_str(&format!("{q} 0 {d} 1\n"));
        }
    }
    fs::write(dir.join("qrels.txt"), qrels).unwrap();
}

fn build_index(dir: &Path) {
    let out = tandem(dir, &["index", "--corpus", "corpus.jsonl", "--out", "idx"]);
    assert_code(&out, 0);
}

#[test]
fn index_is_reproducible_and_lists_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());

    let out = tandem(
        dir.path(),
        &["index", "--corpus", "corpus.jsonl", "--out", "a"],
    );
    assert_code(&out, 0);
    assert!(stdout(&out).contains("indexed 30 documents"));
    for f in ["index.bin", "index.bin.json", "docs.jsonl", "manifest.json"] {
        assert!(dir.path().join("a").join(f).exists(), "missing {f}");
    }

    let out = tandem(
        dir.path(),
        &["index", "--corpus", "corpus.jsonl", "--out", "b"],
    );
    assert_code(&out, 0);
    for f in ["index.bin", "docs.jsonl"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between reruns");
    }

    // The manifests' artifact digests agree even though timestamps may not.
    let digests = |p: &Path| -> Vec<String> {
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(p.join("manifest.json")).unwrap()).unwrap();
        m["artifacts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| a["sha256"].as_str().unwrap().to_string())
            .collect()
    };
    assert_eq!(digests(&dir.path().join("a")), digests(&dir.path().join("b")));
}

#[test]
fn index_missing_corpus_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = tandem(
        dir.path(),
        &["index", "--corpus", "nope.jsonl", "--out", "idx"],
    );
    assert_code(&out, 2);
    assert!(stderr(&out).contains("nope.jsonl"));
}

#[test]
fn index_empty_corpus_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("corpus.jsonl"), "").unwrap();
    let out = tandem(
        dir.path(),
        &["index", "--corpus", "corpus.jsonl", "--out", "idx"],
    );
    assert_code(&out, 1);
}

#[test]
fn lexical_search_matches_the_library_ranking() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    build_index(dir.path());
    let out = tandem(
        dir.path(),
        &[
            "search", "--index", "idx", "--queries", "queries.tsv", "--mode", "lexical",
            "--c", "10", "--out", "lex.run",
        ],
    );
    assert_code(&out, 0);

    // Library-side oracle over the same corpus and pipeline.
    let cfg = tandem::corpus::NormalizeConfig::default();
    let docs = tandem::corpus::ingest(
        &dir.path().join("corpus.jsonl"),
        tandem::corpus::CorpusFormat::Jsonl,
        &cfg,
    )
    .unwrap();
    let index = tandem::lexical::LexicalIndex::build(&docs).unwrap();
    let queries =
        tandem::corpus::read_queries_tsv(&dir.path().join("queries.tsv"), &cfg).unwrap();
    let params = tandem::lexical::Bm25Params::default();

    let text = fs::read_to_string(dir.path().join("lex.run")).unwrap();
    let mut lines = text.lines();
    for q in &queries {
        let want = index.search(q, 10, &params);
        for (rank, entry) in want.entries().iter().enumerate() {
            let line = lines.next().expect("run line per result");
            let fields: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(fields[0], q.query_id);
            assert_eq!(fields[2], entry.doc_id, "rank {rank} of {}", q.query_id);
            assert_eq!(fields[3], (rank + 1).to_string());
            let score: f64 = fields[4].parse().unwrap();
            assert!((score - entry.score).abs() < 1e-6);
            assert_eq!(fields[5], "lexical");
        }
    }
    assert!(lines.next().is_none(), "extra lines in run file");
}

#[test]
fn hybrid_with_empty_vector_file_degrades_to_lexical_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    build_index(dir.path());
    tandem::dense::VectorIndex::new(16)
        .unwrap()
        .save(&dir.path().join("empty.vec"))
        .unwrap();
    let out = tandem(
        dir.path(),
        &[
            "search", "--index", "idx", "--queries", "queries.tsv", "--mode", "hybrid",
            "--vectors", "empty.vec", "--provider", "baseline:dim=16,min-cf=1",
            "--c", "10", "--out", "hyb.run",
        ],
    );
    assert_code(&out, 0);
    assert!(stderr(&out).contains("semantic arm empty for 4"));
    let text = fs::read_to_string(dir.path().join("hyb.run")).unwrap();
    assert!(text.lines().count() > 0);
}

#[test]
fn search_rejects_unknown_mode_and_missing_arm_inputs() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    build_index(dir.path());
    let out = tandem(
        dir.path(),
        &[
            "search", "--index", "idx", "--queries", "queries.tsv", "--mode", "psychic",
            "--out", "x.run",
        ],
    );
    assert_code(&out, 2);

    let out = tandem(
        dir.path(),
        &[
            "search", "--index", "idx", "--queries", "queries.tsv", "--mode", "semantic",
            "--out", "x.run",
        ],
    );
    assert_code(&out, 2);
    assert!(stderr(&out).contains("--vectors"));
}

#[test]
fn embed_then_semantic_search_and_ann_paths() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    build_index(dir.path());

    let out = tandem(
        dir.path(),
        &[
            "embed", "--index", "idx", "--provider", "baseline:dim=24,seed=5,min-cf=1",
            "--out", "p.vec",
        ],
    );
    assert_code(&out, 0);
    assert!(dir.path().join("p.vec").exists());
    assert!(dir.path().join("p.vec.manifest.json").exists());
    assert!(!dir.path().join("p.vec.ann").exists());

    // n_probe without a sidecar is an input error.
    let out = tandem(
        dir.path(),
        &[
            "search", "--index", "idx", "--queries", "queries.tsv", "--mode", "semantic",
            "--vectors", "p.vec", "--provider", "baseline:dim=24,seed=5,min-cf=1",
            "--n-probe", "2", "--c", "10", "--out", "sem.run",
        ],
    );
    assert_code(&out, 2);
    assert!(stderr(&out).contains(".ann"));

    let out = tandem(
        dir.path(),
        &[
            "embed", "--index", "idx", "--provider", "baseline:dim=24,seed=5,min-cf=1",
            "--out", "p.vec", "--centroids", "4",
        ],
    );
    assert_code(&out, 0);
    assert!(dir.path().join("p.vec.ann").exists());

    for probes in [&["--n-probe", "2"][..], &[][..]] {
        let mut args = vec![
            "search", "--index", "idx", "--queries", "queries.tsv", "--mode", "semantic",
            "--vectors", "p.vec", "--provider", "baseline:dim=24,seed=5,min-cf=1",
            "--c", "10", "--out", "sem.run",
        ];
        args.extend_from_slice(probes);
        let out = tandem(dir.path(), &args);
        assert_code(&out, 0);
        let text = fs::read_to_string(dir.path().join("sem.run")).unwrap();
        assert_eq!(text.lines().count(), 40, "10 docs x 4 queries");
    }
}

#[test]
fn evaluate_reports_oracle_rows_and_json() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    build_index(dir.path());
    for (mode, out_name) in [("lexical", "lex.run")] {
        let out = tandem(
            dir.path(),
            &[
                "search", "--index", "idx", "--queries", "queries.tsv", "--mode", mode,
                "--c", "10", "--out", out_name,
            ],
        );
        assert_code(&out, 0);
    }
    tandem(
        dir.path(),
        &[
            "embed", "--index", "idx", "--provider", "baseline:dim=24,seed=5,min-cf=1",
            "--out", "p.vec",
        ],
    );
    let out = tandem(
        dir.path(),
        &[
            "search", "--index", "idx", "--queries", "queries.tsv", "--mode", "semantic",
            "--vectors", "p.vec", "--provider", "baseline:dim=24,seed=5,min-cf=1",
            "--c", "10", "--out", "sem.run",
        ],
    );
    assert_code(&out, 0);

    let out = tandem(
        dir.path(),
        &[
            "evaluate", "lex.run", "sem.run", "--qrels", "qrels.txt", "--c", "5,10",
            "--report", "report.json", "--oracle", "lex.run", "sem.run",
        ],
    );
    assert_code(&out, 0);
    let text = stdout(&out);
    assert!(text.contains("oracle"), "{text}");
    assert!(text.contains("RI(rec)"), "{text}");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    // 3 runs (lexical, semantic, oracle) at 2 depths.
    assert_eq!(report["reports"].as_array().unwrap().len(), 6);
    assert_eq!(report["depths"], serde_json::json!([5, 10]));
    for rep in report["reports"].as_array().unwrap() {
        assert_eq!(rep["per_query"].as_object().unwrap().len(), 4);
    }
    assert!(dir.path().join("report.json.manifest.json").exists());
}

#[test]
fn evaluate_handles_no_overlap_and_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("ok.run"),
        "q1 Q0 d1 1 2.000000 t\nq1 Q0 d2 2 1.000000 t\n",
    )
    .unwrap();

    // Judged docs never retrieved: metrics are zero, exit stays 0.
    fs::write(dir.path().join("qrels.txt"), "q1 0 zzz 1\n").unwrap();
    let out = tandem(
        dir.path(),
        &["evaluate", "ok.run", "--qrels", "qrels.txt", "--c", "10"],
    );
    assert_code(&out, 0);
    assert!(stdout(&out).contains("0.0000"));

    // Qrels whose queries the run never mentions: nothing to evaluate.
    fs::write(dir.path().join("qrels.txt"), "other 0 d1 1\n").unwrap();
    let out = tandem(
        dir.path(),
        &["evaluate", "ok.run", "--qrels", "qrels.txt", "--c", "10"],
    );
    assert_code(&out, 1);

    fs::write(dir.path().join("bad.run"), "q1 Q0 d1 one 2.0 t\n").unwrap();
    fs::write(dir.path().join("qrels.txt"), "q1 0 d1 1\n").unwrap();
    let out = tandem(
        dir.path(),
        &["evaluate", "bad.run", "--qrels", "qrels.txt", "--c", "10"],
    );
    assert_code(&out, 2);
    assert!(stderr(&out).contains(":1:"), "{}", stderr(&out));
}

#[test]
fn gen_training_prints_counts_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    build_index(dir.path());
    let args = [
        "gen-training", "--index", "idx", "--out", "pairs", "--seed", "9",
        "--min-df", "3", "--min-results", "8", "--shard-size", "500000",
    ];
    let out = tandem(dir.path(), &args);
    assert_code(&out, 0);
    let text = stdout(&out);
    assert!(text.contains("bi-gram"), "{text}");
    assert!(dir.path().join("pairs/manifest.json").exists());
    assert!(dir.path().join("pairs/run-manifest.json").exists());

    let mut again = args;
    again[4] = "pairs2";
    let out = tandem(dir.path(), &again);
    assert_code(&out, 0);
    let a = fs::read(dir.path().join("pairs/pairs-00000.jsonl")).unwrap();
    let b = fs::read(dir.path().join("pairs2/pairs-00000.jsonl")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "same seed must reproduce shard bytes");
}

#[test]
fn analyze_subcommands_produce_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    build_index(dir.path());
    for (mode, name) in [("lexical", "a.run"), ("lexical", "b.run")] {
        let out = tandem(
            dir.path(),
            &[
                "search", "--index", "idx", "--queries", "queries.tsv", "--mode", mode,
                "--c", "10", "--out", name,
            ],
        );
        assert_code(&out, 0);
    }

    let out = tandem(
        dir.path(),
        &[
            "analyze", "quartiles", "--baseline", "a.run", "--test", "b.run",
            "--qrels", "qrels.txt", "--c", "10",
        ],
    );
    assert_code(&out, 0);
    assert!(stdout(&out).contains("hardest"));

    let out = tandem(
        dir.path(),
        &[
            "analyze", "histogram", "--baseline", "a.run", "--test", "b.run",
            "--qrels", "qrels.txt", "--c", "10", "--json", "h.json",
        ],
    );
    assert_code(&out, 0);
    assert!(stdout(&out).contains("unchanged"));
    let h: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("h.json")).unwrap()).unwrap();
    assert_eq!(h["zeros"], serde_json::json!(4), "identical runs never move");

    let out = tandem(
        dir.path(),
        &[
            "analyze", "properties", "--index", "idx", "--queries", "queries.tsv",
        ],
    );
    assert_code(&out, 0);
    assert!(stdout(&out).starts_with("query_id,n_terms"));

    let out = tandem(
        dir.path(),
        &[
            "analyze", "terms", "--index", "idx", "--run", "a.run", "--n", "5",
            "--compare", "b.run",
        ],
    );
    assert_code(&out, 0);
    assert!(stdout(&out).contains("mean jaccard over 4 queries: 1.0000"));

    let out = tandem(
        dir.path(),
        &[
            "analyze", "lengths", "--run-a", "a.run", "--run-b", "b.run",
            "--qrels", "qrels.txt", "--index", "idx", "--csv", "len.csv",
        ],
    );
    assert_code(&out, 0);
    let csv = fs::read_to_string(dir.path().join("len.csv")).unwrap();
    assert!(csv.starts_with("index,"), "{csv}");
}

#[test]
fn show_config_prints_the_defaults_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = tandem(dir.path(), &["--show-config"]);
    assert_code(&out, 0);
    let text = stdout(&out);
    assert!(text.contains("bm25.k1"));
    assert!(text.contains("0.9"));
    assert!(text.contains("rm.mu"));
}
