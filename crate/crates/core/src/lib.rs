//! Event influence toolkit: derive multi-hop generation corpora from curated
//! influence graphs, orchestrate conditional generation through a pluggable
//! backend, build influence graphs around seed events, score generations, and
//! assemble augmented QA training data.

pub mod backend;
pub mod cli;
pub mod derivation;
pub mod graph;
pub mod graph_builder;
pub mod jsonl;
pub mod metrics;
pub mod qa_augment;
pub mod templating;

pub use backend::{
    generate, mock_from_script, BackendError, FinishReason, GenerationRequest, GenerationResult,
    Generator, HttpGenerator, MockGenerator, RetryPolicy, SamplingParams, UnscriptedPolicy,
};
pub use derivation::{
    derive_corpus, derive_samples, stats, CorpusInput, DatasetBundle, DerivationConfig,
    DerivationError, DerivedSample, Passage, PassageEntry, Split, StatsTable,
};
pub use graph::{
    compose, enumerate_paths, invert, validate, Direction, EventNode, Finding, GraphError, Hop,
    InfluenceEdge, InfluenceGraph, NodeId, Path, RelationKind, Sign, ValidationReport,
};
pub use graph_builder::{build_graph, BuildError, BuildOutcome, BuildSpec};
pub use metrics::{
    bleu, evaluate_corpus, meteor_simple, polarity_match_rate, polarity_of, rouge_l, EvalSample,
    MetricError, MetricReport, Polarity, PolarityLexicon,
};
pub use qa_augment::{
    augment_sample, emit_training_files, score_predictions, AccuracyReport, AugmentedQaSample,
    QaError, QaLabel, QaSample, QuestionType, TrainerConfig,
};
pub use templating::{parse_query, render_query, ParsedQuery, QueryString, TemplateError};
