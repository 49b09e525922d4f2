mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn eigenkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigenkit"))
        .args(args)
        .env_remove("EIGENKIT_BACKEND_URL")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_lines(path: &Path, lines: &[Value]) {
    let body: String = lines.iter().map(|v| v.to_string() + "\n").collect();
    fs::write(path, body).unwrap();
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn manifest_without_timestamp(dir: &Path) -> Value {
    let mut m = read_json(&dir.join("manifest.json"));
    let stamp = m.as_object_mut().unwrap().remove("timestamp").unwrap();
    assert!(chrono::DateTime::parse_from_rfc3339(stamp.as_str().unwrap()).is_ok());
    m
}

struct Inputs {
    _dir: tempfile::TempDir,
    root: PathBuf,
    graphs: PathBuf,
    passages: PathBuf,
}

fn sunlight_inputs() -> Inputs {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let graphs = root.join("graphs.jsonl");
    let passages = root.join("passages.jsonl");
    write_lines(
        &graphs,
        &[serde_json::to_value(common::sunlight_graph()).unwrap()],
    );
    write_lines(
        &passages,
        &[
            json!({"passage_id": "photosynthesis", "sentences": common::PHOTOSYNTHESIS, "split": "train"}),
        ],
    );
    Inputs {
        _dir: dir,
        root,
        graphs,
        passages,
    }
}

#[test]
fn derive_writes_bundle_stats_and_manifest() {
    let inp = sunlight_inputs();
    let out = inp.root.join("out");
    let o = eigenkit(&[
        "derive",
        "--graphs",
        p(&inp.graphs),
        "--passages",
        p(&inp.passages),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let samples: Vec<Value> = fs::read_to_string(out.join("samples.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    // 4 edges, 2-hop: 3, 3-hop: 2 (bright->grow, cloudy->grow); doubled by reverse.
    assert_eq!(samples.len(), 2 * (4 + 3 + 2));
    assert!(samples.iter().all(|s| s["split"] == "train"));
    assert!(samples.iter().any(|s| s["source"] == "cloudy skies"
        && s["relation"] == "hurts"
        && s["hop"] == 3
        && s["target"] == "plants grow taller"));

    let cfg = read_json(&out.join("derivation.json"));
    assert_eq!(cfg["max_hop"], 3);
    assert_eq!(cfg["include_reverse"], true);
    assert!(fs::read_to_string(out.join("stats.txt"))
        .unwrap()
        .contains("train"));

    let m = manifest_without_timestamp(&out);
    assert_eq!(m["command"], "derive");
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(m["config"]["derivation"]["include_hop"], true);
}

#[test]
fn derive_ablation_flags_reach_the_sidecar() {
    let inp = sunlight_inputs();
    let out = inp.root.join("out");
    let o = eigenkit(&[
        "derive",
        "--graphs",
        p(&inp.graphs),
        "--passages",
        p(&inp.passages),
        "--out",
        p(&out),
        "--max-hop",
        "1",
        "--no-rev",
        "--no-hop",
    ]);
    assert!(o.status.success());
    let cfg = read_json(&out.join("derivation.json"));
    assert_eq!(cfg["include_reverse"], false);
    assert_eq!(cfg["include_hop"], false);
    let body = fs::read_to_string(out.join("samples.jsonl")).unwrap();
    assert_eq!(body.lines().count(), 4);
    assert!(body
        .lines()
        .all(|l| serde_json::from_str::<Value>(l).unwrap()["hop"].is_null()));
}

#[test]
fn reruns_are_byte_identical() {
    let inp = sunlight_inputs();
    let (a, b) = (inp.root.join("a"), inp.root.join("b"));
    for out in [&a, &b] {
        let o = eigenkit(&[
            "derive",
            "--graphs",
            p(&inp.graphs),
            "--passages",
            p(&inp.passages),
            "--out",
            p(out),
        ]);
        assert!(o.status.success());
    }
    for f in ["samples.jsonl", "derivation.json", "stats.txt"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(
        manifest_without_timestamp(&a),
        manifest_without_timestamp(&b)
    );
}

#[test]
fn stats_and_render_read_a_bundle() {
    let inp = sunlight_inputs();
    let out = inp.root.join("out");
    assert!(eigenkit(&[
        "derive",
        "--graphs",
        p(&inp.graphs),
        "--passages",
        p(&inp.passages),
        "--out",
        p(&out)
    ])
    .status
    .success());

    let o = eigenkit(&["stats", "--samples", p(&out)]);
    assert!(o.status.success());
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        fs::read_to_string(out.join("stats.txt")).unwrap()
    );

    let rendered = inp.root.join("rendered");
    let o = eigenkit(&[
        "render",
        "--bundle",
        p(&out),
        "--passages",
        p(&inp.passages),
        "--out",
        p(&rendered),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first: Value = serde_json::from_str(
        fs::read_to_string(rendered.join("rendered.jsonl"))
            .unwrap()
            .lines()
            .next()
            .unwrap(),
    )
    .unwrap();
    let prompt = first["prompt"].as_str().unwrap();
    assert!(prompt.starts_with(common::PHOTOSYNTHESIS[0]));
    assert!(prompt.ends_with("-hop?"));
    assert!(eigenkit::parse_query(prompt).is_ok());
}

#[test]
fn missing_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = eigenkit(&[
        "derive",
        "--graphs",
        p(&dir.path().join("nope.jsonl")),
        "--passages",
        p(&dir.path().join("nope2.jsonl")),
        "--out",
        p(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn bad_flag_exits_1() {
    assert_eq!(eigenkit(&["derive", "--bogus"]).status.code(), Some(1));
}

#[test]
fn evaluate_identical_files_scores_100() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("x.jsonl");
    write_lines(
        &f,
        &[
            json!({"text": "more sunlight reaches the leaves", "relation": "helps", "hop": 1}),
            json!({"text": "less sugar is made", "relation": "hurts", "hop": 2}),
        ],
    );
    let out = dir.path().join("report");
    let o = eigenkit(&[
        "evaluate",
        "--pred",
        p(&f),
        "--ref",
        p(&f),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    for k in [
        "bleu_1",
        "bleu_2",
        "bleu_3",
        "bleu_4",
        "rouge_l",
        "polarity_match",
    ] {
        assert_eq!(report["overall"][k], 100.0, "{k}");
    }
    assert_eq!(report["breakdown"].as_array().unwrap().len(), 2);
    assert!(out.join("report.txt").exists());
    assert_eq!(manifest_without_timestamp(&out)["command"], "evaluate");
}

#[test]
fn evaluate_length_mismatch_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    write_lines(&a, &[json!({"text": "x"})]);
    write_lines(&b, &[json!({"text": "x"}), json!({"text": "y"})]);
    assert_eq!(
        eigenkit(&["evaluate", "--pred", p(&a), "--ref", p(&b)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn build_graph_unreachable_backend_exits_2() {
    let inp = sunlight_inputs();
    let o = eigenkit(&[
        "build-graph",
        "--passages",
        p(&inp.passages),
        "--seed",
        "more sunlight",
        "--relations",
        "helps",
        "--out",
        p(&inp.root.join("g")),
        "--backend",
        "http://127.0.0.1:1",
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn build_graph_reads_backend_from_env() {
    let inp = sunlight_inputs();
    let o = Command::new(env!("CARGO_BIN_EXE_eigenkit"))
        .args([
            "build-graph",
            "--passages",
            p(&inp.passages),
            "--seed",
            "more sunlight",
            "--relations",
            "helps",
        ])
        .args(["--out", p(&inp.root.join("g"))])
        .env("EIGENKIT_BACKEND_URL", "http://127.0.0.1:1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn build_graph_without_backend_exits_1() {
    let inp = sunlight_inputs();
    let o = eigenkit(&[
        "build-graph",
        "--passages",
        p(&inp.passages),
        "--seed",
        "more sunlight",
        "--out",
        p(&inp.root.join("g")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn build_graph_with_mock_script() {
    let inp = sunlight_inputs();
    let passage = common::photosynthesis();
    let script = inp.root.join("script.jsonl");
    let q = |r, h| {
        eigenkit::render_query(
            Some(&passage),
            "more sunlight",
            r,
            Some(eigenkit::Hop::new(h).unwrap()),
        )
        .unwrap()
        .into_string()
    };
    write_lines(
        &script,
        &[
            json!({"prompt": q(eigenkit::RelationKind::HELPS, 1), "response": "plants trap sunlight"}),
            json!({"prompt": q(eigenkit::RelationKind::HURT_BY, 1), "response": "Cloudy skies."}),
        ],
    );
    let out = inp.root.join("g");
    let o = eigenkit(&[
        "build-graph",
        "--passages",
        p(&inp.passages),
        "--seed",
        "more sunlight",
        "--relations",
        "helps,hurt-by",
        "--out",
        p(&out),
        "--mock",
        p(&script),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let g: eigenkit::InfluenceGraph =
        serde_json::from_str(fs::read_to_string(out.join("graph.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(g.nodes.len(), 3);
    assert_eq!(g.edges.len(), 2);
    let adj = fs::read_to_string(out.join("adjacency.txt")).unwrap();
    assert!(
        adj.contains("Cloudy skies. --hurts--> more sunlight"),
        "{adj}"
    );
    assert_eq!(
        manifest_without_timestamp(&out)["config"]["sampling"]["top_p"],
        0.9
    );
}

fn qa_line(id: &str, label: &str, hop: u8, ty: &str) -> Value {
    json!({
        "question_id": id,
        "passage": {"passage_id": "photosynthesis", "sentences": common::PHOTOSYNTHESIS},
        "cause_event": "more sunlight",
        "effect_event": "more sugar",
        "label": label,
        "hop_count": hop,
        "question_type": ty,
    })
}

#[test]
fn augment_then_score_qa() {
    let dir = tempfile::tempdir().unwrap();
    let qa = dir.path().join("qa.jsonl");
    write_lines(
        &qa,
        &[
            qa_line("q1", "helps", 1, "in-para"),
            qa_line("q2", "hurts", 2, "out-of-para"),
            qa_line("q3", "no_effect", 0, "exogenous"),
            qa_line("q4", "helps", 1, "in-para"),
        ],
    );
    let script = dir.path().join("script.jsonl");
    write_lines(&script, &[]);
    let out = dir.path().join("aug");
    let o = eigenkit(&[
        "augment-qa",
        "--qa",
        p(&qa),
        "--out",
        p(&out),
        "--mock",
        p(&script),
        "--mock-fallback",
        "more energy",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = read_json(&out.join("trainer_config.json"));
    assert_eq!(cfg["alpha"], 1.0);
    assert_eq!(cfg["beta"], 0.9);
    let train = fs::read_to_string(out.join("train.jsonl")).unwrap();
    assert_eq!(train.lines().count(), 4);
    let first: Value = serde_json::from_str(train.lines().next().unwrap()).unwrap();
    assert_eq!(
        first["augmented_sequence"],
        "more energy more energy more energy more energy more sunlight more sugar"
    );

    let pred = dir.path().join("pred.jsonl");
    write_lines(
        &pred,
        &[
            json!({"question_id": "q1", "label": "helps"}),
            json!({"question_id": "q2", "label": "hurts"}),
            json!({"question_id": "q3", "label": "no_effect"}),
            json!({"question_id": "q4", "label": "hurts"}),
        ],
    );
    let score = dir.path().join("score");
    let o = eigenkit(&[
        "score-qa",
        "--pred",
        p(&pred),
        "--gold",
        p(&qa),
        "--out",
        p(&score),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let acc = read_json(&score.join("accuracy.json"));
    assert_eq!(acc["overall"], 75.0);
    assert_eq!(acc["by_hop"]["1"], 50.0);
    assert_eq!(acc["by_type"]["exogenous"], 100.0);
}

#[test]
fn augment_qa_unreachable_backend_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let qa = dir.path().join("qa.jsonl");
    write_lines(&qa, &[qa_line("q1", "helps", 1, "in-para")]);
    let o = eigenkit(&[
        "augment-qa",
        "--qa",
        p(&qa),
        "--out",
        p(&dir.path().join("o")),
        "--backend",
        "http://127.0.0.1:1",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
