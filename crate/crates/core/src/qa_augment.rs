//! QA data augmentation: four 1-hop influence queries per question, training
//! files for an external two-head classifier, and accuracy breakdowns for its
//! predictions.
//!
//! Query order per sample is fixed:
//!
//! 1. `(P, cause, helps, 1-hop)`
//! 2. `(P, cause, hurts, 1-hop)`
//! 3. `(P, effect, is helped by, 1-hop)`
//! 4. `(P, effect, is hurt by, 1-hop)`

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{self, BackendError, GenerationRequest, Generator, SamplingParams};
use crate::derivation::Passage;
use crate::graph::{Hop, RelationKind};
use crate::jsonl;
use crate::templating::{collapse_whitespace, render_query, TemplateError};

pub const TRAIN_FILE: &str = "train.jsonl";
pub const TRAINER_CONFIG_FILE: &str = "trainer_config.json";

#[derive(Debug, Error)]
pub enum QaError {
    #[error("sample `{0}` has an empty cause or effect event")]
    InvalidSample(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("sample `{question_id}`: query {index} of 4 ({relation}) failed: {source}")]
    Backend {
        question_id: String,
        index: usize,
        relation: RelationKind,
        #[source]
        source: BackendError,
    },
    #[error("nothing to write: no samples")]
    EmptyInput,
    #[error("{path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("missing predictions for {} question(s): {}", .0.len(), .0.join(", "))]
    MissingPrediction(Vec<String>),
    #[error("alpha and beta must be nonnegative")]
    InvalidWeights,
}

impl QaError {
    pub fn is_transport(&self) -> bool {
        matches!(self, QaError::Backend { source, .. } if source.is_transport())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaLabel {
    Helps,
    Hurts,
    NoEffect,
}

impl QaLabel {
    pub const ALL: [QaLabel; 3] = [QaLabel::Helps, QaLabel::Hurts, QaLabel::NoEffect];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuestionType {
    #[serde(rename = "in-para")]
    InPara,
    #[serde(rename = "out-of-para")]
    OutOfPara,
    #[serde(rename = "exogenous")]
    Exogenous,
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuestionType::InPara => "in-para",
            QuestionType::OutOfPara => "out-of-para",
            QuestionType::Exogenous => "exogenous",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaSample {
    pub question_id: String,
    pub passage: Passage,
    pub cause_event: String,
    pub effect_event: String,
    pub label: QaLabel,
    #[serde(default)]
    pub hop_count: Option<u8>,
    #[serde(default)]
    pub question_type: Option<QuestionType>,
}

impl QaSample {
    fn check(&self) -> Result<(), QaError> {
        if self.cause_event.trim().is_empty() || self.effect_event.trim().is_empty() {
            return Err(QaError::InvalidSample(self.question_id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedQaSample {
    pub base: QaSample,
    /// Generations in query order; empty strings are kept.
    pub generated: [String; 4],
    pub primary_sequence: String,
    pub augmented_sequence: String,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            alpha: 1.0,
            beta: 0.9,
        }
    }
}

impl TrainerConfig {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, QaError> {
        if !(alpha >= 0.0 && beta >= 0.0) {
            return Err(QaError::InvalidWeights);
        }
        Ok(TrainerConfig { alpha, beta })
    }
}

/// The four (event, relation) queries for a sample, in order.
pub fn query_plan(qa: &QaSample) -> [(&str, RelationKind); 4] {
    [
        (qa.cause_event.as_str(), RelationKind::HELPS),
        (qa.cause_event.as_str(), RelationKind::HURTS),
        (qa.effect_event.as_str(), RelationKind::HELPED_BY),
        (qa.effect_event.as_str(), RelationKind::HURT_BY),
    ]
}

/// Space-joins the non-empty parts.
fn join_parts<'a>(parts: impl IntoIterator<Item = &'a str>) -> String {
    parts
        .into_iter()
        .map(collapse_whitespace)
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn augment_sample(
    qa: &QaSample,
    gen: &dyn Generator,
    params: &SamplingParams,
) -> Result<AugmentedQaSample, QaError> {
    qa.check()?;
    let mut generated: [String; 4] = Default::default();
    let mut warnings = Vec::new();
    for (i, (event, relation)) in query_plan(qa).into_iter().enumerate() {
        let prompt = render_query(Some(&qa.passage), event, relation, Some(Hop::ONE))?;
        let req = GenerationRequest::with_params(prompt.into_string(), params.clone());
        let result = backend::generate(gen, &req).map_err(|source| QaError::Backend {
            question_id: qa.question_id.clone(),
            index: i + 1,
            relation,
            source,
        })?;
        let text = collapse_whitespace(&result.text);
        if text.is_empty() {
            warnings.push(format!(
                "sample `{}`: query {} of 4 ({relation}) produced an empty generation",
                qa.question_id,
                i + 1
            ));
        }
        generated[i] = text;
    }
    let tail = [qa.cause_event.as_str(), qa.effect_event.as_str()];
    let passage = qa.passage.text();
    let primary_sequence = join_parts(std::iter::once(passage.as_str()).chain(tail));
    let augmented_sequence = join_parts(generated.iter().map(String::as_str).chain(tail));
    Ok(AugmentedQaSample {
        base: qa.clone(),
        generated,
        primary_sequence,
        augmented_sequence,
        warnings,
    })
}

/// Augments samples across worker threads, keeping input order. The first
/// failure in input order is returned.
pub fn augment_all(
    samples: &[QaSample],
    gen: &dyn Generator,
    params: &SamplingParams,
) -> Result<Vec<AugmentedQaSample>, QaError> {
    let width = gen.max_in_flight().max(1);
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(width) {
        let results: Vec<_> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|qa| scope.spawn(move || augment_sample(qa, gen, params)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("augmentation worker panicked"))
                .collect()
        });
        for r in results {
            out.push(r?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub question_id: String,
    pub label: QaLabel,
    pub primary_sequence: String,
    pub augmented_sequence: String,
}

/// Writes `train.jsonl` and the `trainer_config.json` sidecar into `out_dir`.
pub fn emit_training_files(
    samples: &[AugmentedQaSample],
    cfg: &TrainerConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, QaError> {
    if samples.is_empty() {
        return Err(QaError::EmptyInput);
    }
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| QaError::IoFailure { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let records: Vec<TrainingRecord> = samples
        .iter()
        .map(|s| TrainingRecord {
            question_id: s.base.question_id.clone(),
            label: s.base.label,
            primary_sequence: s.primary_sequence.clone(),
            augmented_sequence: s.augmented_sequence.clone(),
        })
        .collect();
    let train_path = out_dir.join(TRAIN_FILE);
    let file = fs::File::create(&train_path).map_err(io_err(&train_path))?;
    jsonl::write_to(io::BufWriter::new(file), &records).map_err(io_err(&train_path))?;

    let cfg_path = out_dir.join(TRAINER_CONFIG_FILE);
    let body = serde_json::to_string_pretty(cfg).expect("config serializes") + "\n";
    fs::write(&cfg_path, body).map_err(io_err(&cfg_path))?;
    Ok(vec![train_path, cfg_path])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    pub label: QaLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub overall: f64,
    pub total: usize,
    pub correct: usize,
    pub by_hop: BTreeMap<u8, f64>,
    pub by_type: BTreeMap<QuestionType, f64>,
    /// Macro-averaged F1 over the three labels, as a percentage.
    pub macro_f1: f64,
}

impl AccuracyReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "overall accuracy  {:.2}  ({}/{})\n",
            self.overall, self.correct, self.total
        );
        for (hop, acc) in &self.by_hop {
            out.push_str(&format!("  {hop}-hop          {acc:.2}\n"));
        }
        for (ty, acc) in &self.by_type {
            out.push_str(&format!("  {:<15} {acc:.2}\n", ty.to_string()));
        }
        out.push_str(&format!("macro F1          {:.2}\n", self.macro_f1));
        out
    }
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn score_predictions(
    preds: &HashMap<String, QaLabel>,
    gold: &[QaSample],
) -> Result<AccuracyReport, QaError> {
    let missing: Vec<String> = gold
        .iter()
        .filter(|g| !preds.contains_key(&g.question_id))
        .map(|g| g.question_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(QaError::MissingPrediction(missing));
    }

    let mut correct = 0;
    let mut hop_tally: BTreeMap<u8, (usize, usize)> = BTreeMap::new();
    let mut type_tally: BTreeMap<QuestionType, (usize, usize)> = BTreeMap::new();
    // Per label: (true positives, predicted count, gold count).
    let mut label_tally: HashMap<QaLabel, (usize, usize, usize)> = HashMap::new();
    for g in gold {
        let predicted = preds[&g.question_id];
        let ok = predicted == g.label;
        correct += ok as usize;
        if let Some(h) = g.hop_count {
            let e = hop_tally.entry(h).or_default();
            e.0 += ok as usize;
            e.1 += 1;
        }
        if let Some(t) = g.question_type {
            let e = type_tally.entry(t).or_default();
            e.0 += ok as usize;
            e.1 += 1;
        }
        label_tally.entry(predicted).or_default().1 += 1;
        let e = label_tally.entry(g.label).or_default();
        e.2 += 1;
        e.0 += ok as usize;
    }

    let f1s: Vec<f64> = QaLabel::ALL
        .iter()
        .filter_map(|l| label_tally.get(l))
        .map(|&(tp, pred, gold)| {
            if pred + gold == 0 {
                0.0
            } else {
                2.0 * tp as f64 / (pred + gold) as f64
            }
        })
        .collect();
    let macro_f1 = if f1s.is_empty() {
        0.0
    } else {
        100.0 * f1s.iter().sum::<f64>() / f1s.len() as f64
    };

    Ok(AccuracyReport {
        overall: pct(correct, gold.len()),
        total: gold.len(),
        correct,
        by_hop: hop_tally
            .into_iter()
            .map(|(k, (c, n))| (k, pct(c, n)))
            .collect(),
        by_type: type_tally
            .into_iter()
            .map(|(k, (c, n))| (k, pct(c, n)))
            .collect(),
        macro_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{mock_from_script, MockGenerator, UnscriptedPolicy};

    fn sample(id: &str, label: QaLabel, hop: Option<u8>) -> QaSample {
        QaSample {
            question_id: id.into(),
            passage: Passage::new("p", vec!["Rain falls.".into(), "Rivers rise.".into()]).unwrap(),
            cause_event: "more rain".into(),
            effect_event: "higher rivers".into(),
            label,
            hop_count: hop,
            question_type: None,
        }
    }

    #[test]
    fn four_queries_in_fixed_order() {
        let qa = sample("q1", QaLabel::Helps, Some(1));
        let prompts: Vec<String> = query_plan(&qa)
            .iter()
            .map(|(e, r)| {
                render_query(Some(&qa.passage), e, *r, Some(Hop::ONE))
                    .unwrap()
                    .into_string()
            })
            .collect();
        let mock = mock_from_script(prompts.iter().cloned().zip(["g1", "g2", "g3", "g4"])).unwrap();
        let out = augment_sample(&qa, &mock, &SamplingParams::default()).unwrap();
        assert_eq!(mock.calls(), prompts);
        assert_eq!(out.generated, ["g1", "g2", "g3", "g4"].map(String::from));
        assert_eq!(
            out.primary_sequence,
            "Rain falls. Rivers rise. more rain higher rivers"
        );
        assert_eq!(
            out.augmented_sequence,
            "g1 g2 g3 g4 more rain higher rivers"
        );
        assert!(prompts[2].ends_with("what does higher rivers is helped by at 1-hop?"));
    }

    #[test]
    fn failure_names_query_index() {
        let qa = sample("q1", QaLabel::Helps, None);
        let plan = query_plan(&qa);
        let scripted: Vec<(String, &str)> = plan[..2]
            .iter()
            .map(|(e, r)| {
                (
                    render_query(Some(&qa.passage), e, *r, Some(Hop::ONE))
                        .unwrap()
                        .into_string(),
                    "x",
                )
            })
            .collect();
        let mock = mock_from_script(scripted).unwrap();
        match augment_sample(&qa, &mock, &SamplingParams::default()) {
            Err(QaError::Backend { index, .. }) => assert_eq!(index, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_generation_keeps_arity() {
        let qa = sample("q1", QaLabel::Hurts, None);
        let mock = MockGenerator::from_entries(Vec::<(String, String)>::new())
            .unwrap()
            .with_policy(UnscriptedPolicy::Fallback(String::new()));
        let out = augment_sample(&qa, &mock, &SamplingParams::default()).unwrap();
        assert_eq!(out.generated.len(), 4);
        assert_eq!(out.warnings.len(), 4);
        assert_eq!(out.augmented_sequence, "more rain higher rivers");
    }

    #[test]
    fn emits_records_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let mock = MockGenerator::from_entries(Vec::<(String, String)>::new())
            .unwrap()
            .with_policy(UnscriptedPolicy::Fallback("more water".into()));
        let samples: Vec<_> = ["a", "b"]
            .iter()
            .map(|id| {
                augment_sample(
                    &sample(id, QaLabel::NoEffect, None),
                    &mock,
                    &SamplingParams::default(),
                )
                .unwrap()
            })
            .collect();
        emit_training_files(&samples, &TrainerConfig::default(), dir.path()).unwrap();
        let records: Vec<TrainingRecord> = jsonl::read(dir.path().join(TRAIN_FILE)).unwrap();
        assert_eq!(records.len(), 2);
        let cfg: TrainerConfig = serde_json::from_str(
            &fs::read_to_string(dir.path().join(TRAINER_CONFIG_FILE)).unwrap(),
        )
        .unwrap();
        assert_eq!(
            cfg,
            TrainerConfig {
                alpha: 1.0,
                beta: 0.9
            }
        );

        emit_training_files(&samples, &TrainerConfig::new(1.0, 0.5).unwrap(), dir.path()).unwrap();
        let cfg: TrainerConfig = serde_json::from_str(
            &fs::read_to_string(dir.path().join(TRAINER_CONFIG_FILE)).unwrap(),
        )
        .unwrap();
        assert_eq!(cfg.beta, 0.5);

        assert!(matches!(
            emit_training_files(&[], &TrainerConfig::default(), dir.path()),
            Err(QaError::EmptyInput)
        ));
        assert!(TrainerConfig::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn hand_tallied_breakdown() {
        let gold = vec![
            sample("a", QaLabel::Helps, Some(1)),
            sample("b", QaLabel::Hurts, Some(1)),
            sample("c", QaLabel::Helps, Some(2)),
            sample("d", QaLabel::NoEffect, Some(3)),
        ];
        let preds: HashMap<String, QaLabel> = [
            ("a", QaLabel::Helps),
            ("b", QaLabel::Hurts),
            ("c", QaLabel::NoEffect),
            ("d", QaLabel::NoEffect),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let r = score_predictions(&preds, &gold).unwrap();
        assert_eq!(r.overall, 75.0);
        assert_eq!(r.by_hop, BTreeMap::from([(1, 100.0), (2, 0.0), (3, 100.0)]));
        // helps: tp1 pred1 gold2 -> 2/3; hurts: 1; no_effect: tp1 pred2 gold1 -> 2/3.
        assert!((r.macro_f1 - 100.0 * (2.0 / 3.0 + 1.0 + 2.0 / 3.0) / 3.0).abs() < 1e-9);

        let mut partial = preds.clone();
        partial.remove("c");
        match score_predictions(&partial, &gold) {
            Err(QaError::MissingPrediction(ids)) => assert_eq!(ids, vec!["c".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn qa_line_format() {
        let line = r#"{"question_id":"q9","passage":{"passage_id":"p","sentences":["A."]},"cause_event":"more rain","effect_event":"less dust","label":"no_effect","hop_count":2,"question_type":"out-of-para"}"#;
        let s: QaSample = serde_json::from_str(line).unwrap();
        assert_eq!(s.label, QaLabel::NoEffect);
        assert_eq!(s.question_type, Some(QuestionType::OutOfPara));
        let minimal = r#"{"question_id":"q","passage":{"passage_id":"p","sentences":["A."]},"cause_event":"a","effect_event":"b","label":"helps"}"#;
        let s: QaSample = serde_json::from_str(minimal).unwrap();
        assert_eq!(s.hop_count, None);
    }
}
