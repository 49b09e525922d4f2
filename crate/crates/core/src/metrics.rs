//! Automated scores for generated influences: BLEU-1..4, ROUGE-L, an
//! exact-match METEOR variant, and a lexicon-based polarity agreement rate.
//!
//! All scores are percentages in `[0, 100]`. Corpus scores are the mean of
//! sentence-level scores (micro-average over samples).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::thread;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{Hop, RelationKind};

/// Count floor for zero n-gram matches, keeping the geometric mean defined.
pub const BLEU_EPSILON: f64 = 1e-9;
pub const ROUGE_BETA: f64 = 1.2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("candidate is empty")]
    EmptyCandidate,
    #[error("no non-empty reference")]
    EmptyReferences,
    #[error("BLEU order must be in 1..=4, got {0}")]
    InvalidOrder(usize),
    #[error("no samples to evaluate")]
    EmptyInput,
}

/// Lowercases, splits on whitespace, and strips leading/trailing punctuation from each token.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Increasing,
    Decreasing,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarityLexicon {
    pub increasing: BTreeSet<String>,
    pub decreasing: BTreeSet<String>,
}

const INCREASING: [&str; 11] = [
    "helps",
    "more",
    "higher",
    "increase",
    "increases",
    "stronger",
    "faster",
    "greater",
    "longer",
    "larger",
    "helping",
];
const DECREASING: [&str; 11] = [
    "hurts",
    "less",
    "lower",
    "decrease",
    "decreases",
    "weaker",
    "slower",
    "smaller",
    "hurting",
    "softer",
    "fewer",
];

impl Default for PolarityLexicon {
    fn default() -> Self {
        PolarityLexicon {
            increasing: INCREASING.iter().map(|w| w.to_string()).collect(),
            decreasing: DECREASING.iter().map(|w| w.to_string()).collect(),
        }
    }
}

impl PolarityLexicon {
    pub fn len(&self) -> usize {
        self.increasing.len() + self.decreasing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn class(&self, word: &str) -> Option<Polarity> {
        if self.increasing.contains(word) {
            Some(Polarity::Increasing)
        } else if self.decreasing.contains(word) {
            Some(Polarity::Decreasing)
        } else {
            None
        }
    }

    /// SHA-256 over both word lists, for run manifests.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.increasing {
            h.update(b"+");
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        for w in &self.decreasing {
            h.update(b"-");
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// Class of the first lexicon word in `text`; `Neutral` if there is none.
pub fn polarity_of(text: &str, lex: &PolarityLexicon) -> Polarity {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .find_map(|w| lex.class(w))
        .unwrap_or(Polarity::Neutral)
}

pub fn polarity_match_rate<C, R>(
    pairs: &[(C, R)],
    lex: &PolarityLexicon,
) -> Result<f64, MetricError>
where
    C: AsRef<str>,
    R: AsRef<str>,
{
    if pairs.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let matches = pairs
        .iter()
        .filter(|(c, r)| polarity_of(c.as_ref(), lex) == polarity_of(r.as_ref(), lex))
        .count();
    Ok(100.0 * matches as f64 / pairs.len() as f64)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

fn reference_tokens<S: AsRef<str>>(references: &[S]) -> Result<Vec<Vec<String>>, MetricError> {
    let refs: Vec<Vec<String>> = references
        .iter()
        .map(|r| tokenize(r.as_ref()))
        .filter(|t| !t.is_empty())
        .collect();
    if refs.is_empty() {
        Err(MetricError::EmptyReferences)
    } else {
        Ok(refs)
    }
}

fn candidate_tokens(candidate: &str) -> Result<Vec<String>, MetricError> {
    let toks = tokenize(candidate);
    if toks.is_empty() {
        Err(MetricError::EmptyCandidate)
    } else {
        Ok(toks)
    }
}

/// Sentence BLEU up to `max_n`-grams against one or more references.
///
/// Orders longer than the candidate are left out of the geometric mean, so
/// a short candidate identical to its reference still scores 100.
pub fn bleu<S: AsRef<str>>(
    candidate: &str,
    references: &[S],
    max_n: usize,
) -> Result<f64, MetricError> {
    if !(1..=4).contains(&max_n) {
        return Err(MetricError::InvalidOrder(max_n));
    }
    let cand = candidate_tokens(candidate)?;
    let refs = reference_tokens(references)?;
    Ok(bleu_tokens(&cand, &refs, max_n))
}

fn bleu_tokens(cand: &[String], refs: &[Vec<String>], max_n: usize) -> f64 {
    let order = max_n.min(cand.len());
    let mut log_sum = 0.0;
    for n in 1..=order {
        let cand_counts = ngram_counts(cand, n);
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in refs {
            for (gram, c) in ngram_counts(r, n) {
                let e = max_ref.entry(gram).or_insert(0);
                *e = (*e).max(c);
            }
        }
        let clipped: usize = cand_counts
            .iter()
            .map(|(gram, c)| (*c).min(max_ref.get(gram).copied().unwrap_or(0)))
            .sum();
        let total = (cand.len() + 1 - n) as f64;
        let precision = (clipped as f64).max(BLEU_EPSILON) / total;
        log_sum += precision.ln();
    }
    let c = cand.len() as f64;
    // Closest reference length; ties go to the shorter reference.
    let r = refs
        .iter()
        .map(|t| t.len())
        .min_by_key(|&len| ((len as i64 - cand.len() as i64).abs(), len))
        .expect("at least one reference") as f64;
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    (100.0 * bp * (log_sum / order as f64).exp()).clamp(0.0, 100.0)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F-measure with recall weighted by `ROUGE_BETA`.
pub fn rouge_l(candidate: &str, reference: &str) -> Result<f64, MetricError> {
    let cand = candidate_tokens(candidate)?;
    let reference = reference_tokens(&[reference])?;
    Ok(rouge_l_tokens(&cand, &reference[0]))
}

fn rouge_l_tokens(cand: &[String], reference: &[String]) -> f64 {
    let lcs = lcs_len(cand, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / cand.len() as f64;
    let r = lcs / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (100.0 * (1.0 + b2) * p * r / (r + b2 * p)).clamp(0.0, 100.0)
}

/// METEOR with exact unigram matching only (no stemming or synonyms).
pub fn meteor_simple(candidate: &str, reference: &str) -> Result<f64, MetricError> {
    let cand = candidate_tokens(candidate)?;
    let reference = reference_tokens(&[reference])?;
    Ok(meteor_tokens(&cand, &reference[0]))
}

/// Left-to-right exact alignment; a match that extends the current chunk is
/// preferred over the first free occurrence.
fn align(cand: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut used = vec![false; reference.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (i, tok) in cand.iter().enumerate() {
        let continues = pairs
            .last()
            .filter(|&&(pi, _)| pi + 1 == i)
            .map(|&(_, pj)| pj + 1)
            .filter(|&j| j < reference.len() && !used[j] && &reference[j] == tok);
        let j =
            continues.or_else(|| (0..reference.len()).find(|&j| !used[j] && &reference[j] == tok));
        if let Some(j) = j {
            used[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

fn meteor_tokens(cand: &[String], reference: &[String]) -> f64 {
    let pairs = align(cand, reference);
    let matches = pairs.len();
    if matches == 0 {
        return 0.0;
    }
    let chunks = 1 + pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count();
    let m = matches as f64;
    let p = m / cand.len() as f64;
    let r = m / reference.len() as f64;
    let f_mean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m).powi(3);
    (100.0 * f_mean * (1.0 - penalty)).clamp(0.0, 100.0)
}

/// One scored item: a generation, its references, and optional cell labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSample {
    pub candidate: String,
    pub references: Vec<String>,
    pub relation: Option<RelationKind>,
    pub hop: Option<Hop>,
}

impl EvalSample {
    pub fn new(
        candidate: impl Into<String>,
        reference: impl Into<String>,
        relation: Option<RelationKind>,
        hop: Option<Hop>,
    ) -> Self {
        EvalSample {
            candidate: candidate.into(),
            references: vec![reference.into()],
            relation,
            hop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricScores {
    pub bleu_1: f64,
    pub bleu_2: f64,
    pub bleu_3: f64,
    pub bleu_4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub polarity_match: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SampleScores {
    bleu: [f64; 4],
    meteor: f64,
    rouge_l: f64,
    polarity_match: bool,
}

/// Sentence-level scores. With several references ROUGE-L and METEOR take
/// the best reference and polarity matches if any reference agrees.
fn score_sample(s: &EvalSample, lex: &PolarityLexicon) -> Result<SampleScores, MetricError> {
    let cand = candidate_tokens(&s.candidate)?;
    let refs = reference_tokens(&s.references)?;
    let mut bleu = [0.0; 4];
    for (n, slot) in bleu.iter_mut().enumerate() {
        *slot = bleu_tokens(&cand, &refs, n + 1);
    }
    let best =
        |f: fn(&[String], &[String]) -> f64| refs.iter().map(|r| f(&cand, r)).fold(0.0, f64::max);
    let cand_pol = polarity_of(&s.candidate, lex);
    Ok(SampleScores {
        bleu,
        meteor: best(meteor_tokens),
        rouge_l: best(rouge_l_tokens),
        polarity_match: s.references.iter().any(|r| polarity_of(r, lex) == cand_pol),
    })
}

fn mean(scores: &[&SampleScores]) -> MetricScores {
    let n = scores.len() as f64;
    let avg = |f: &dyn Fn(&SampleScores) -> f64| scores.iter().map(|s| f(s)).sum::<f64>() / n;
    MetricScores {
        bleu_1: avg(&|s| s.bleu[0]),
        bleu_2: avg(&|s| s.bleu[1]),
        bleu_3: avg(&|s| s.bleu[2]),
        bleu_4: avg(&|s| s.bleu[3]),
        meteor: avg(&|s| s.meteor),
        rouge_l: avg(&|s| s.rouge_l),
        polarity_match: avg(&|s| if s.polarity_match { 100.0 } else { 0.0 }),
        count: scores.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub relation: Option<RelationKind>,
    pub hop: Option<Hop>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownCell {
    pub relation: Option<RelationKind>,
    pub hop: Option<Hop>,
    pub scores: MetricScores,
}

/// Scoring conventions recorded alongside every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub averaging: String,
    pub tokenization: String,
    pub bleu_smoothing: String,
    pub rouge_beta: f64,
    pub meteor: String,
    pub polarity_lexicon_size: usize,
    pub polarity_lexicon_sha256: String,
}

impl Conventions {
    fn new(lex: &PolarityLexicon) -> Self {
        Conventions {
            averaging: "micro-average of sentence-level scores".into(),
            tokenization: "lowercase, whitespace split, edge punctuation stripped".into(),
            bleu_smoothing: format!("zero match counts floored at {BLEU_EPSILON:e}; orders beyond candidate length skipped"),
            rouge_beta: ROUGE_BETA,
            meteor: "meteor_simple: exact unigram matches only".into(),
            polarity_lexicon_size: lex.len(),
            polarity_lexicon_sha256: lex.fingerprint(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub overall: MetricScores,
    pub breakdown: Vec<BreakdownCell>,
    pub conventions: Conventions,
}

impl MetricReport {
    pub fn cell(&self, relation: Option<RelationKind>, hop: Option<Hop>) -> Option<&MetricScores> {
        self.breakdown
            .iter()
            .find(|c| c.relation == relation && c.hop == hop)
            .map(|c| &c.scores)
    }

    /// Aligned text table: one row per (relation, hop) cell plus an overall row.
    pub fn to_text(&self) -> String {
        let header = [
            "Relation", "Hop", "N", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "METEOR*", "ROUGE-L",
            "Polarity",
        ];
        let row = |rel: String, hop: String, s: &MetricScores| -> Vec<String> {
            let mut r = vec![rel, hop, s.count.to_string()];
            r.extend(
                [
                    s.bleu_1,
                    s.bleu_2,
                    s.bleu_3,
                    s.bleu_4,
                    s.meteor,
                    s.rouge_l,
                    s.polarity_match,
                ]
                .iter()
                .map(|v| format!("{v:.2}")),
            );
            r
        };
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
        for c in &self.breakdown {
            rows.push(row(
                c.relation
                    .map_or("-".to_string(), |r| r.surface().to_string()),
                c.hop.map_or("-".to_string(), |h| h.to_string()),
                &c.scores,
            ));
        }
        rows.push(row("overall".into(), String::new(), &self.overall));

        let widths: Vec<usize> = (0..header.len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, r) in rows.iter().enumerate() {
            if i == rows.len() - 1 || i == 1 {
                let _ = writeln!(
                    out,
                    "{}",
                    "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))
                );
            }
            let cells: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    if c == 0 {
                        format!("{v:<w$}", w = widths[c])
                    } else {
                        format!("{v:>w$}", w = widths[c])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  "));
        }
        let _ = writeln!(out, "* {}", self.conventions.meteor);
        out
    }
}

/// Overall scores plus one breakdown cell per (relation, hop) present in the input.
pub fn evaluate_corpus(
    samples: &[EvalSample],
    lex: &PolarityLexicon,
) -> Result<MetricReport, MetricError> {
    if samples.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let scored = score_all(samples, lex)?;

    let mut cells: BTreeMap<CellKey, Vec<&SampleScores>> = BTreeMap::new();
    for (s, sc) in samples.iter().zip(&scored) {
        cells
            .entry(CellKey {
                relation: s.relation,
                hop: s.hop,
            })
            .or_default()
            .push(sc);
    }
    let all: Vec<&SampleScores> = scored.iter().collect();
    Ok(MetricReport {
        overall: mean(&all),
        breakdown: cells
            .into_iter()
            .map(|(k, v)| BreakdownCell {
                relation: k.relation,
                hop: k.hop,
                scores: mean(&v),
            })
            .collect(),
        conventions: Conventions::new(lex),
    })
}

/// Scores samples on worker threads; results keep input order.
fn score_all(
    samples: &[EvalSample],
    lex: &PolarityLexicon,
) -> Result<Vec<SampleScores>, MetricError> {
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(8);
    let chunk = samples.len().div_ceil(workers).max(256);
    thread::scope(|scope| {
        let handles: Vec<_> = samples
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|s| score_sample(s, lex))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("scoring worker panicked"))
            .collect()
    })
}
