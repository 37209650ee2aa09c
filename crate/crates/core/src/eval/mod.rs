//! Evaluation protocols over labeled corpora.
//!
//! Every protocol follows the same per-repeat pipeline: split each class into
//! `n_sample` example sentences (`Q_i`) and an evaluation pool (`U`), optionally
//! train an adapter on all example sets, run a set operation over `U`, select
//! the top entries, and score the selection against the labels. Repeat `r`
//! uses seed `cfg.seed + r` for both the split and the trainer.

mod metrics;
mod report;
mod split;

use std::borrow::Cow;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::apply_adapter;
use crate::ops::{rank_series, OperationSeries};
use crate::store::{AdapterCheckpoint, EmbeddingMatrix};
use crate::trainer::{train_adapter, TrainConfig};

pub use metrics::{average_f1, f1, BinaryConfusion, F1Average};
pub use report::{render_table, sweep_to_csv, ArmComparison};
pub use split::{split_examples, LabeledCorpus, Split, EVALUATION_SET};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n_sample: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Train an adapter on the example sets (SetCSE arm) or not (frozen arm).
    pub train: bool,
    /// Trainer settings; `epochs = 0` runs the SetCSE arm with the identity adapter.
    /// The trainer seed is replaced by the per-repeat seed.
    pub trainer: TrainConfig,
    pub f1_average: F1Average,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_sample: 20,
            repeats: 5,
            seed: 0,
            train: false,
            trainer: TrainConfig::default(),
            f1_average: F1Average::Macro,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sample == 0 {
            return Err(Error::Domain("n_sample must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Domain("repeats must be at least 1".into()));
        }
        if self.train && self.trainer.epochs > 0 {
            self.trainer.validate()?;
        }
        Ok(())
    }

    pub fn arm(&self) -> Arm {
        if self.train {
            Arm::Setcse
        } else {
            Arm::Frozen
        }
    }

    pub fn with_arm(mut self, arm: Arm) -> Self {
        self.train = arm == Arm::Setcse;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Setcse,
    Frozen,
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arm::Setcse => "setcse",
            Arm::Frozen => "frozen",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Protocol {
    Intersection,
    Difference,
    SerialIntersection { first: String, second: String },
    SerialDifference { first: String, second: String },
    SerialMixed { first: String, second: String },
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Protocol::Intersection => write!(f, "U & Q_i"),
            Protocol::Difference => write!(f, "U \\ Q_i"),
            Protocol::SerialIntersection { first, second } => write!(f, "U & {first} & {second}"),
            Protocol::SerialDifference { first, second } => write!(f, "U \\ {first} \\ {second}"),
            Protocol::SerialMixed { first, second } => write!(f, "U & {first} \\ {second}"),
        }
    }
}

/// Selection and correctness counts for one class (or target), summed over repeats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub class: String,
    /// Sentences selected from the top of the ranking.
    pub selected: usize,
    /// Selected sentences whose label matches the prediction.
    pub correct: usize,
    /// Sentences the accuracy is computed over: the selection for
    /// intersection, all of `U` for the binary protocols.
    pub evaluated: usize,
    pub correct_evaluated: usize,
}

impl ClassCounts {
    fn accumulate(&mut self, other: &ClassCounts) {
        self.selected += other.selected;
        self.correct += other.correct;
        self.evaluated += other.evaluated;
        self.correct_evaluated += other.correct_evaluated;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub arm: Arm,
    pub n_sample: usize,
    /// Mean over repeats.
    pub accuracy: f64,
    pub f1: f64,
    pub f1_average: F1Average,
    pub per_class: Vec<ClassCounts>,
    pub repeat_accuracy: Vec<f64>,
    pub repeat_f1: Vec<f64>,
}

struct RepeatOutcome {
    accuracy: f64,
    f1: f64,
    per_class: Vec<ClassCounts>,
}

/// Everything a protocol needs for one repeat.
pub struct RepeatContext<'a> {
    pub split: Split,
    pub embeddings: Cow<'a, EmbeddingMatrix>,
    labels: HashMap<&'a str, &'a [String]>,
}

impl RepeatContext<'_> {
    fn has(&self, id: &str, class: &str) -> bool {
        self.labels
            .get(id)
            .is_some_and(|ls| ls.iter().any(|l| l == class))
    }

    fn count_in_u(&self, pred: impl Fn(&str) -> bool) -> usize {
        self.split
            .evaluation
            .members()
            .iter()
            .filter(|id| pred(id))
            .count()
    }
}

/// Splits and (for the SetCSE arm) trains for repeat `r`.
pub fn prepare_repeat<'a>(
    corpus: &'a LabeledCorpus,
    base: &'a EmbeddingMatrix,
    cfg: &EvalConfig,
    repeat: usize,
) -> Result<RepeatContext<'a>> {
    let seed = cfg.seed.wrapping_add(repeat as u64);
    let split = split_examples(corpus, cfg.n_sample, seed)?;
    let embeddings = if cfg.train {
        let adapter = if cfg.trainer.epochs == 0 {
            AdapterCheckpoint::identity(base.dim())
        } else {
            let tc = TrainConfig {
                seed,
                ..cfg.trainer
            };
            train_adapter(base, &split.examples, &tc)?.final_adapter
        };
        Cow::Owned(apply_adapter(&adapter, base)?)
    } else {
        Cow::Borrowed(base)
    };
    Ok(RepeatContext {
        split,
        embeddings,
        labels: corpus.labels_of(),
    })
}

fn top_ids(series: &OperationSeries<'_>, emb: &EmbeddingMatrix, k: usize) -> Result<Vec<String>> {
    let ranked = rank_series(series, emb)?.top_k(k)?;
    Ok(ranked.entries.into_iter().map(|e| e.id).collect())
}

fn run_intersection(ctx: &RepeatContext<'_>, how: F1Average) -> Result<RepeatOutcome> {
    let u = &ctx.split.evaluation;
    let mut per_class = Vec::new();
    let mut scores = Vec::new();
    for q in &ctx.split.examples {
        let class = q.name();
        let support = ctx.count_in_u(|id| ctx.has(id, class));
        let selected = top_ids(&OperationSeries::intersection(u, q), &ctx.embeddings, support)?;
        let correct = selected.iter().filter(|id| ctx.has(id, class)).count();
        scores.push((f1(correct, support - correct, support - correct), support));
        per_class.push(ClassCounts {
            class: class.to_owned(),
            selected: support,
            correct,
            evaluated: support,
            correct_evaluated: correct,
        });
    }
    let selected: usize = per_class.iter().map(|c| c.selected).sum();
    let correct: usize = per_class.iter().map(|c| c.correct).sum();
    Ok(RepeatOutcome {
        accuracy: if selected == 0 { 0.0 } else { correct as f64 / selected as f64 },
        f1: average_f1(&scores, how),
        per_class,
    })
}

/// Selects the top `|target|` entries of `series` and scores "selected ⇔ target"
/// as a binary task over all of `U`.
fn binary_selection(
    ctx: &RepeatContext<'_>,
    series: &OperationSeries<'_>,
    target: impl Fn(&str) -> bool,
    class: String,
    how: F1Average,
) -> Result<(ClassCounts, BinaryConfusion, f64)> {
    let k = ctx.count_in_u(&target);
    if k == 0 {
        return Err(Error::Domain(format!(
            "no evaluation sentences match target {class:?}"
        )));
    }
    let selected: std::collections::HashSet<String> =
        top_ids(series, &ctx.embeddings, k)?.into_iter().collect();
    let mut confusion = BinaryConfusion::default();
    for id in ctx.split.evaluation.members() {
        confusion.record(selected.contains(id), target(id));
    }
    let counts = ClassCounts {
        class,
        selected: k,
        correct: confusion.tp,
        evaluated: confusion.total(),
        correct_evaluated: confusion.correct(),
    };
    let f1 = confusion.f1(how);
    Ok((counts, confusion, f1))
}

fn run_difference(ctx: &RepeatContext<'_>, how: F1Average) -> Result<RepeatOutcome> {
    let u = &ctx.split.evaluation;
    let mut per_class = Vec::new();
    let mut acc = Vec::new();
    let mut f1s = Vec::new();
    for q in &ctx.split.examples {
        let class = q.name();
        let (counts, confusion, f1) = binary_selection(
            ctx,
            &OperationSeries::difference(u, q),
            |id| !ctx.has(id, class),
            format!("not {class}"),
            how,
        )?;
        acc.push(confusion.accuracy());
        f1s.push(f1);
        per_class.push(counts);
    }
    Ok(RepeatOutcome {
        accuracy: mean(&acc),
        f1: mean(&f1s),
        per_class,
    })
}

fn run_serial(ctx: &RepeatContext<'_>, protocol: &Protocol, how: F1Average) -> Result<RepeatOutcome> {
    let u = &ctx.split.evaluation;
    let (first, second) = match protocol {
        Protocol::SerialIntersection { first, second }
        | Protocol::SerialDifference { first, second }
        | Protocol::SerialMixed { first, second } => (first.as_str(), second.as_str()),
        _ => unreachable!("not a serial protocol"),
    };
    let qi = ctx.split.example(first)?;
    let qj = ctx.split.example(second)?;
    let (series, class): (OperationSeries<'_>, String) = match protocol {
        Protocol::SerialIntersection { .. } => (
            OperationSeries::new(u, vec![qi, qj], vec![])?,
            format!("{first} and {second}"),
        ),
        Protocol::SerialDifference { .. } => (
            OperationSeries::new(u, vec![], vec![qi, qj])?,
            format!("neither {first} nor {second}"),
        ),
        _ => (
            OperationSeries::new(u, vec![qi], vec![qj])?,
            format!("{first} but not {second}"),
        ),
    };
    let target = |id: &str| {
        let (a, b) = (ctx.has(id, first), ctx.has(id, second));
        match protocol {
            Protocol::SerialIntersection { .. } => a && b,
            Protocol::SerialDifference { .. } => !a && !b,
            _ => a && !b,
        }
    };
    let (counts, confusion, f1) = binary_selection(ctx, &series, target, class, how)?;
    Ok(RepeatOutcome {
        accuracy: confusion.accuracy(),
        f1,
        per_class: vec![counts],
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_protocol(corpus: &LabeledCorpus, protocol: &Protocol) -> Result<()> {
    match protocol {
        Protocol::SerialIntersection { first, second }
        | Protocol::SerialDifference { first, second }
        | Protocol::SerialMixed { first, second } => {
            corpus.require_class(first)?;
            corpus.require_class(second)?;
            if first == second {
                return Err(Error::Domain(format!(
                    "serial protocol needs two different classes, got {first:?} twice"
                )));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Scores one protocol on a prepared repeat.
fn run_protocol(ctx: &RepeatContext<'_>, protocol: &Protocol, how: F1Average) -> Result<RepeatOutcome> {
    match protocol {
        Protocol::Intersection => run_intersection(ctx, how),
        Protocol::Difference => run_difference(ctx, how),
        _ => run_serial(ctx, protocol, how),
    }
}

fn aggregate(protocol: &Protocol, cfg: &EvalConfig, outcomes: Vec<RepeatOutcome>) -> EvalReport {
    let repeat_accuracy: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let repeat_f1: Vec<f64> = outcomes.iter().map(|o| o.f1).collect();
    let mut per_class: Vec<ClassCounts> = Vec::new();
    for o in &outcomes {
        for c in &o.per_class {
            match per_class.iter_mut().find(|p| p.class == c.class) {
                Some(p) => p.accumulate(c),
                None => per_class.push(c.clone()),
            }
        }
    }
    EvalReport {
        protocol: protocol.clone(),
        arm: cfg.arm(),
        n_sample: cfg.n_sample,
        accuracy: mean(&repeat_accuracy),
        f1: mean(&repeat_f1),
        f1_average: cfg.f1_average,
        per_class,
        repeat_accuracy,
        repeat_f1,
    }
}

/// Runs several protocols on shared per-repeat splits and adapters.
pub fn evaluate_protocols(
    corpus: &LabeledCorpus,
    base: &EmbeddingMatrix,
    protocols: &[Protocol],
    cfg: &EvalConfig,
) -> Result<Vec<EvalReport>> {
    cfg.validate()?;
    for p in protocols {
        check_protocol(corpus, p)?;
    }
    let per_repeat: Vec<Vec<RepeatOutcome>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| {
            let ctx = prepare_repeat(corpus, base, cfg, r)?;
            protocols
                .iter()
                .map(|p| run_protocol(&ctx, p, cfg.f1_average))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut by_protocol: Vec<Vec<RepeatOutcome>> = protocols.iter().map(|_| Vec::new()).collect();
    for outcomes in per_repeat {
        for (slot, o) in by_protocol.iter_mut().zip(outcomes) {
            slot.push(o);
        }
    }
    Ok(protocols
        .iter()
        .zip(by_protocol)
        .map(|(p, outcomes)| aggregate(p, cfg, outcomes))
        .collect())
}

pub fn evaluate(
    corpus: &LabeledCorpus,
    base: &EmbeddingMatrix,
    protocol: &Protocol,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    Ok(evaluate_protocols(corpus, base, std::slice::from_ref(protocol), cfg)?
        .pop()
        .expect("one protocol in, one report out"))
}

/// `U ∩ Q_i` per class, top `|S_i| − n_sample` predicted as class `i`.
pub fn eval_intersection(corpus: &LabeledCorpus, base: &EmbeddingMatrix, cfg: &EvalConfig) -> Result<EvalReport> {
    evaluate(corpus, base, &Protocol::Intersection, cfg)
}

/// `U ∖ Q_i` per class, top `Σ_{j≠i} (|S_j| − n_sample)` predicted as "not i".
pub fn eval_difference(corpus: &LabeledCorpus, base: &EmbeddingMatrix, cfg: &EvalConfig) -> Result<EvalReport> {
    evaluate(corpus, base, &Protocol::Difference, cfg)
}

/// `U ∩ Q_i ∩ Q_j`, top `|U_{i,j}|` predicted as carrying both labels.
pub fn eval_serial_intersection(
    corpus: &LabeledCorpus,
    base: &EmbeddingMatrix,
    classes: (&str, &str),
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let p = Protocol::SerialIntersection {
        first: classes.0.into(),
        second: classes.1.into(),
    };
    evaluate(corpus, base, &p, cfg)
}

/// `U ∖ Q_i ∖ Q_j`, top `|U_{ī,j̄}|` predicted as carrying neither label.
pub fn eval_serial_difference(
    corpus: &LabeledCorpus,
    base: &EmbeddingMatrix,
    classes: (&str, &str),
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let p = Protocol::SerialDifference {
        first: classes.0.into(),
        second: classes.1.into(),
    };
    evaluate(corpus, base, &p, cfg)
}

/// `U ∩ Q_i ∖ Q_j`, top `|U_{i,j̄}|` predicted as `i` but not `j`.
pub fn eval_serial_mixed(
    corpus: &LabeledCorpus,
    base: &EmbeddingMatrix,
    classes: (&str, &str),
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let p = Protocol::SerialMixed {
        first: classes.0.into(),
        second: classes.1.into(),
    };
    evaluate(corpus, base, &p, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n_sample: usize,
    pub intersection: EvalReport,
    pub difference: EvalReport,
}

/// Intersection and difference at each `n_sample`, all with the same seeds.
pub fn sweep_n_sample(
    corpus: &LabeledCorpus,
    base: &EmbeddingMatrix,
    values: &[usize],
    cfg: &EvalConfig,
) -> Result<Vec<SweepRow>> {
    if let Some(&max) = values.iter().max() {
        let min_class = corpus.min_class_size();
        if max >= min_class {
            return Err(Error::Domain(format!(
                "n_sample {max} must be below the smallest class size {min_class}"
            )));
        }
    }
    values
        .iter()
        .map(|&n| {
            let cfg = EvalConfig { n_sample: n, ..*cfg };
            let mut reports =
                evaluate_protocols(corpus, base, &[Protocol::Intersection, Protocol::Difference], &cfg)?
                    .into_iter();
            Ok(SweepRow {
                n_sample: n,
                intersection: reports.next().expect("intersection report"),
                difference: reports.next().expect("difference report"),
            })
        })
        .collect()
}

/// Runs `protocol` in both arms with otherwise identical settings.
pub fn compare_arms(
    corpus: &LabeledCorpus,
    base: &EmbeddingMatrix,
    protocol: &Protocol,
    cfg: &EvalConfig,
) -> Result<ArmComparison> {
    let frozen = evaluate(corpus, base, protocol, &cfg.with_arm(Arm::Frozen))?;
    let setcse = evaluate(corpus, base, protocol, &cfg.with_arm(Arm::Setcse))?;
    Ok(ArmComparison::new(frozen, setcse))
}
