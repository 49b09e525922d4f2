//! The `eigenkit` command line. Exit codes: 0 success, 1 input or validation
//! error, 2 backend or transport error. Diagnostics go to stderr.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::backend::{Generator, HttpGenerator, MockGenerator, SamplingParams, UnscriptedPolicy};
use crate::derivation::{self, DatasetBundle, DerivationConfig, DerivedSample, PassageEntry};
use crate::graph::{Hop, InfluenceGraph, RelationKind};
use crate::graph_builder::{self, BuildSpec};
use crate::jsonl;
use crate::metrics::{self, EvalSample, PolarityLexicon};
use crate::qa_augment::{self, Prediction, QaLabel, QaSample, TrainerConfig};
use crate::templating::render_query_text;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BACKEND_ENV: &str = "EIGENKIT_BACKEND_URL";

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Backend(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Backend(m) => m,
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "eigenkit",
    version,
    about = "Event influence corpora, generation and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive the multi-hop generation corpus from influence graphs.
    Derive(DeriveArgs),
    /// Print sample counts per split, relation and hop.
    Stats(StatsArgs),
    /// Render derived samples into model queries.
    Render(RenderArgs),
    /// Generate an influence graph around a seed event.
    BuildGraph(BuildGraphArgs),
    /// Score generations against references.
    Evaluate(EvaluateArgs),
    /// Augment QA samples with generated influences and emit training files.
    AugmentQa(AugmentQaArgs),
    /// Score QA predictions with per-hop and per-type breakdowns.
    ScoreQa(ScoreQaArgs),
}

#[derive(Debug, Args)]
struct AblationArgs {
    /// Omit the passage from rendered queries.
    #[arg(long)]
    no_para: bool,
    /// Do not add inverse (reverse-edge) samples.
    #[arg(long)]
    no_rev: bool,
    /// Drop hop information.
    #[arg(long)]
    no_hop: bool,
}

#[derive(Debug, Args)]
struct DeriveArgs {
    #[arg(long)]
    graphs: PathBuf,
    #[arg(long)]
    passages: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    max_hop: u32,
    #[command(flatten)]
    ablation: AblationArgs,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// A bundle directory or a samples file.
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Bundle directory written by `derive`.
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    passages: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_para: bool,
    #[arg(long)]
    no_hop: bool,
}

#[derive(Debug, Args)]
struct BackendArgs {
    /// Model service base URL.
    #[arg(long, env = BACKEND_ENV, conflicts_with = "mock")]
    backend: Option<String>,
    /// Script file of {"prompt", "response"} lines served by a mock generator.
    #[arg(long)]
    mock: Option<PathBuf>,
    /// Response for prompts missing from the mock script (default: reject them).
    #[arg(long, requires = "mock")]
    mock_fallback: Option<String>,
    #[arg(long, default_value_t = 0.9)]
    top_p: f64,
    #[arg(long, default_value_t = 48)]
    max_new_tokens: u32,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 4)]
    max_in_flight: usize,
}

impl BackendArgs {
    fn params(&self) -> SamplingParams {
        SamplingParams {
            max_new_tokens: self.max_new_tokens,
            top_p: self.top_p,
            temperature: self.temperature,
            ..SamplingParams::default()
        }
    }

    fn generator(&self) -> Result<Box<dyn Generator>, CliError> {
        if let Some(path) = &self.mock {
            let mut mock = MockGenerator::from_file(path).map_err(input)?;
            if let Some(text) = &self.mock_fallback {
                mock = mock.with_policy(UnscriptedPolicy::Fallback(text.clone()));
            }
            return Ok(Box::new(mock));
        }
        match &self.backend {
            Some(url) => Ok(Box::new(
                HttpGenerator::new(url.clone()).with_max_in_flight(self.max_in_flight),
            )),
            None => Err(CliError::Input(format!(
                "no backend: pass --backend URL, --mock FILE, or set {BACKEND_ENV}"
            ))),
        }
    }

    fn echo(&self) -> serde_json::Value {
        let p = self.params();
        json!({
            "backend": self.backend,
            "mock": self.mock.as_ref().map(|m| m.display().to_string()),
            "mock_fallback": self.mock_fallback,
            "top_p": p.top_p,
            "max_new_tokens": p.max_new_tokens,
            "temperature": p.temperature,
            "stop_token": p.stop_token,
        })
    }
}

#[derive(Debug, Args)]
struct BuildGraphArgs {
    #[arg(long)]
    passages: PathBuf,
    /// Passage to use; optional when the file holds a single passage.
    #[arg(long)]
    passage_id: Option<String>,
    #[arg(long)]
    seed: String,
    /// Comma-separated relations, e.g. `helps,helped-by,hurt-by`.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "helps,hurts,helped-by,hurt-by"
    )]
    relations: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    hops: Vec<u32>,
    #[arg(long)]
    no_dedup: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AugmentQaArgs {
    #[arg(long)]
    qa: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Args)]
struct ScoreQaArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub config: serde_json::Value,
    pub tool_version: String,
    pub timestamp: String,
}

fn write_manifest(
    dir: &Path,
    command: &str,
    inputs: &[&Path],
    config: serde_json::Value,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        command: command.to_string(),
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        config,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    };
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_file(&dir.join(MANIFEST_FILE), &body)
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("eigenkit: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Derive(a) => derive(a),
        Command::Stats(a) => stats(a),
        Command::Render(a) => render(a),
        Command::BuildGraph(a) => build_graph(a),
        Command::Evaluate(a) => evaluate(a),
        Command::AugmentQa(a) => augment_qa(a),
        Command::ScoreQa(a) => score_qa(a),
    }
}

fn derive(a: DeriveArgs) -> Result<(), CliError> {
    let cfg = DerivationConfig {
        max_hop: Hop::new(a.max_hop).map_err(input)?,
        include_paragraph: !a.ablation.no_para,
        include_reverse: !a.ablation.no_rev,
        include_hop: !a.ablation.no_hop,
    };
    let graphs: Vec<InfluenceGraph> = jsonl::read(&a.graphs).map_err(input)?;
    let passages: Vec<PassageEntry> = jsonl::read(&a.passages).map_err(input)?;
    let inputs = derivation::pair_inputs(&graphs, &passages).map_err(input)?;
    let bundle = derivation::derive_corpus(&inputs, &cfg).map_err(input)?;

    ensure_dir(&a.out)?;
    bundle.write_dir(&a.out).map_err(input)?;
    let table = derivation::stats(&bundle);
    write_file(&a.out.join(derivation::STATS_FILE), &table.to_text())?;
    write_manifest(
        &a.out,
        "derive",
        &[&a.graphs, &a.passages],
        json!({ "derivation": cfg }),
    )?;
    eprintln!(
        "derived {} samples from {} graphs",
        bundle.len(),
        graphs.len()
    );
    Ok(())
}

fn read_samples(path: &Path) -> Result<DatasetBundle, CliError> {
    if path.is_dir() {
        DatasetBundle::read_dir(path).map_err(input)
    } else {
        let samples: Vec<DerivedSample> = jsonl::read(path).map_err(input)?;
        Ok(DatasetBundle {
            config: DerivationConfig::default(),
            samples,
        })
    }
}

fn stats(a: StatsArgs) -> Result<(), CliError> {
    let bundle = read_samples(&a.samples)?;
    let text = derivation::stats(&bundle).to_text();
    print!("{text}");
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        write_file(&out.join(derivation::STATS_FILE), &text)?;
        write_manifest(out, "stats", &[&a.samples], json!({}))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RenderedSample<'a> {
    prompt: String,
    target: &'a str,
    split: derivation::Split,
}

fn render(a: RenderArgs) -> Result<(), CliError> {
    let bundle = DatasetBundle::read_dir(&a.bundle).map_err(input)?;
    let passages: Vec<PassageEntry> = jsonl::read(&a.passages).map_err(input)?;
    let texts: HashMap<&str, String> = passages
        .iter()
        .map(|e| (e.passage.passage_id.as_str(), e.passage.text()))
        .collect();
    let with_para = bundle.config.include_paragraph && !a.no_para;
    let with_hop = bundle.config.include_hop && !a.no_hop;

    let mut rendered = Vec::with_capacity(bundle.len());
    for s in &bundle.samples {
        let passage = if with_para {
            Some(
                texts
                    .get(s.passage_id.as_str())
                    .ok_or_else(|| CliError::Input(format!("no passage `{}`", s.passage_id)))?
                    .as_str(),
            )
        } else {
            None
        };
        let hop = if with_hop { s.hop } else { None };
        let prompt = render_query_text(passage, &s.source, s.relation, hop).map_err(input)?;
        rendered.push(RenderedSample {
            prompt: prompt.into_string(),
            target: &s.target,
            split: s.split,
        });
    }
    ensure_dir(&a.out)?;
    jsonl::write(a.out.join("rendered.jsonl"), &rendered).map_err(input)?;
    write_manifest(
        &a.out,
        "render",
        &[&a.bundle, &a.passages],
        json!({ "include_paragraph": with_para, "include_hop": with_hop, "source_config": bundle.config }),
    )
}

fn build_graph(a: BuildGraphArgs) -> Result<(), CliError> {
    let passages: Vec<PassageEntry> = jsonl::read(&a.passages).map_err(input)?;
    let passage = match &a.passage_id {
        Some(id) => passages
            .iter()
            .find(|e| &e.passage.passage_id == id)
            .ok_or_else(|| {
                CliError::Input(format!("no passage `{id}` in {}", a.passages.display()))
            })?,
        None if passages.len() == 1 => &passages[0],
        None => {
            return Err(CliError::Input(
                "several passages in file; pass --passage-id".into(),
            ))
        }
    };
    let relations = a
        .relations
        .iter()
        .map(|r| r.parse::<RelationKind>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(input)?;
    let hops = a
        .hops
        .iter()
        .map(|h| Hop::new(*h))
        .collect::<Result<Vec<_>, _>>()
        .map_err(input)?;
    let mut spec = BuildSpec::new(passage.passage.clone(), a.seed.clone(), relations, hops);
    spec.dedup = !a.no_dedup;
    spec.params = a.backend.params();

    let gen = a.backend.generator()?;
    let outcome = graph_builder::build_graph(&spec, gen.as_ref()).map_err(|e| {
        if e.is_transport() {
            CliError::Backend(e.to_string())
        } else {
            input(e)
        }
    })?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }

    ensure_dir(&a.out)?;
    jsonl::write(
        a.out.join("graph.jsonl"),
        std::slice::from_ref(&outcome.graph),
    )
    .map_err(input)?;
    write_file(
        &a.out.join("adjacency.txt"),
        &graph_builder::adjacency_listing(&outcome.graph),
    )?;
    write_manifest(
        &a.out,
        "build-graph",
        &[&a.passages],
        json!({
            "passage_id": spec.passage.passage_id,
            "seed": spec.seed,
            "relations": spec.relations.iter().map(|r| r.surface()).collect::<Vec<_>>(),
            "hops": spec.hops.iter().map(|h| h.count()).collect::<Vec<_>>(),
            "dedup": spec.dedup,
            "sampling": a.backend.echo(),
        }),
    )
}

/// A line of a prediction or reference file. `target` and `generated` are
/// accepted for `text`, so derived sample files work as references.
#[derive(Debug, Clone, Deserialize)]
struct EvalRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(alias = "target", alias = "generated")]
    text: String,
    #[serde(default)]
    relation: Option<RelationKind>,
    #[serde(default)]
    hop: Option<Hop>,
}

fn pair_eval(preds: Vec<EvalRecord>, refs: Vec<EvalRecord>) -> Result<Vec<EvalSample>, CliError> {
    let keyed = preds.iter().all(|p| p.id.is_some()) && refs.iter().all(|r| r.id.is_some());
    if keyed {
        let mut by_id: HashMap<&str, Vec<&EvalRecord>> = HashMap::new();
        for r in &refs {
            by_id
                .entry(r.id.as_deref().unwrap_or_default())
                .or_default()
                .push(r);
        }
        preds
            .iter()
            .map(|p| {
                let id = p.id.as_deref().unwrap_or_default();
                let group = by_id
                    .get(id)
                    .ok_or_else(|| CliError::Input(format!("no reference for id `{id}`")))?;
                Ok(EvalSample {
                    candidate: p.text.clone(),
                    references: group.iter().map(|r| r.text.clone()).collect(),
                    relation: group[0].relation.or(p.relation),
                    hop: group[0].hop.or(p.hop),
                })
            })
            .collect()
    } else {
        if preds.len() != refs.len() {
            return Err(CliError::Input(format!(
                "{} predictions but {} references (add `id` fields to pair by id)",
                preds.len(),
                refs.len()
            )));
        }
        Ok(preds
            .into_iter()
            .zip(refs)
            .map(|(p, r)| EvalSample {
                candidate: p.text,
                references: vec![r.text],
                relation: r.relation.or(p.relation),
                hop: r.hop.or(p.hop),
            })
            .collect())
    }
}

fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let preds: Vec<EvalRecord> = jsonl::read(&a.pred).map_err(input)?;
    let refs: Vec<EvalRecord> = jsonl::read(&a.reference).map_err(input)?;
    let samples = pair_eval(preds, refs)?;
    let lex = PolarityLexicon::default();
    let report = metrics::evaluate_corpus(&samples, &lex).map_err(input)?;
    let text = report.to_text();
    print!("{text}");
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        write_file(&out.join("report.txt"), &text)?;
        let body = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        write_file(&out.join("report.json"), &body)?;
        write_manifest(
            out,
            "evaluate",
            &[&a.pred, &a.reference],
            json!({ "conventions": report.conventions }),
        )?;
    }
    Ok(())
}

fn augment_qa(a: AugmentQaArgs) -> Result<(), CliError> {
    let cfg = TrainerConfig::new(a.alpha, a.beta).map_err(input)?;
    let samples: Vec<QaSample> = jsonl::read(&a.qa).map_err(input)?;
    if samples.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no QA samples",
            a.qa.display()
        )));
    }
    let gen = a.backend.generator()?;
    let augmented =
        qa_augment::augment_all(&samples, gen.as_ref(), &a.backend.params()).map_err(|e| {
            if e.is_transport() {
                CliError::Backend(e.to_string())
            } else {
                input(e)
            }
        })?;
    for w in augmented.iter().flat_map(|s| &s.warnings) {
        eprintln!("warning: {w}");
    }
    qa_augment::emit_training_files(&augmented, &cfg, &a.out).map_err(input)?;
    write_manifest(
        &a.out,
        "augment-qa",
        &[&a.qa],
        json!({ "trainer": cfg, "sampling": a.backend.echo() }),
    )?;
    eprintln!("augmented {} samples", augmented.len());
    Ok(())
}

fn score_qa(a: ScoreQaArgs) -> Result<(), CliError> {
    let preds: Vec<Prediction> = jsonl::read(&a.pred).map_err(input)?;
    let gold: Vec<QaSample> = jsonl::read(&a.gold).map_err(input)?;
    let preds: HashMap<String, QaLabel> = preds
        .into_iter()
        .map(|p| (p.question_id, p.label))
        .collect();
    let report = qa_augment::score_predictions(&preds, &gold).map_err(input)?;
    let text = report.to_text();
    print!("{text}");
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        let body = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        write_file(&out.join("accuracy.json"), &body)?;
        write_manifest(out, "score-qa", &[&a.pred, &a.gold], json!({}))?;
    }
    Ok(())
}
