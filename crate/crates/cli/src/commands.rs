use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use setcse::eval::{
    compare_arms, evaluate, sweep_n_sample, sweep_to_csv, Arm, EvalConfig, EvalReport,
    LabeledCorpus, Protocol,
};
use setcse::query::{evaluate_query, parse_query, QueryOptions};
use setcse::store::{load_adapter, load_corpus, load_sets, read_embeddings, save_adapter};
use setcse::{train_adapter, Corpus, EmbeddingMatrix};

use crate::output;
use crate::{
    ArmArg, EmbedCheckArgs, EvalArgs, Format, HarnessFlags, ProtocolArg, QueryArgs, RowFormat,
    StoreArgs, SweepArgs, TrainCmdArgs, TrainFlags, UsageError,
};

pub(crate) fn load_store(store: &StoreArgs) -> Result<(Corpus, EmbeddingMatrix)> {
    let corpus = load_corpus(&store.corpus)?;
    let emb = read_embeddings(&store.embeddings)?;
    if let Some(s) = corpus.iter().find(|s| !emb.contains(&s.id)) {
        anyhow::bail!(setcse::Error::Validation(format!(
            "corpus sentence {:?} has no embedding in {}",
            s.id,
            store.embeddings.display()
        )));
    }
    Ok((corpus, emb))
}

#[derive(Serialize)]
struct EmbedSummary {
    count: usize,
    dim: usize,
    min_norm: f64,
    max_norm: f64,
    mean_norm: f64,
    /// Embedded ids that are not in the corpus; only with `--corpus`.
    #[serde(skip_serializing_if = "Option::is_none")]
    unused_ids: Option<usize>,
}

pub fn embed_check(args: EmbedCheckArgs) -> Result<()> {
    let emb = read_embeddings(&args.embeddings)?;
    let norms: Vec<f64> = (0..emb.len()).map(|r| emb.norm(r)).collect();
    let mut summary = EmbedSummary {
        count: emb.len(),
        dim: emb.dim(),
        min_norm: norms.iter().copied().fold(f64::INFINITY, f64::min),
        max_norm: norms.iter().copied().fold(0.0, f64::max),
        mean_norm: if norms.is_empty() { 0.0 } else { norms.iter().sum::<f64>() / norms.len() as f64 },
        unused_ids: None,
    };
    if let Some(path) = &args.corpus {
        let corpus = load_corpus(path)?;
        let missing: Vec<&str> = corpus
            .iter()
            .filter(|s| !emb.contains(&s.id))
            .map(|s| s.id.as_str())
            .collect();
        if !missing.is_empty() {
            anyhow::bail!(setcse::Error::Validation(format!(
                "{} corpus sentences have no embedding (first: {:?})",
                missing.len(),
                missing[0]
            )));
        }
        summary.unused_ids = Some(emb.ids().iter().filter(|id| !corpus.contains(id)).count());
    }
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&summary)?),
        Format::Text => {
            println!("count {}  dim {}", summary.count, summary.dim);
            println!(
                "norm min {:.6}  max {:.6}  mean {:.6}",
                summary.min_norm, summary.max_norm, summary.mean_norm
            );
            if let Some(n) = summary.unused_ids {
                println!("all corpus sentences embedded; {n} embeddings not in the corpus");
            }
        }
    }
    Ok(())
}

fn history_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.loss.json"))
}

pub fn train(args: TrainCmdArgs) -> Result<()> {
    let cfg = args.train.config()?;
    let (corpus, emb) = load_store(&args.store)?;
    let sets = load_sets(&args.sets, &corpus)?;
    let report = train_adapter(&emb, sets.sets(), &cfg)?;
    save_adapter(&report.final_adapter, &args.out)?;
    let history = args.history.unwrap_or_else(|| history_path(&args.out));
    fs::write(&history, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", history.display()))?;
    println!(
        "trained on {} sets, {} pairs; loss {:.6} -> {:.6}",
        sets.len(),
        report.pair_count,
        report.loss_history.first().copied().unwrap_or(f64::NAN),
        report.final_loss
    );
    println!("adapter: {}", args.out.display());
    println!("loss history: {}", history.display());
    Ok(())
}

pub fn query(args: QueryArgs) -> Result<()> {
    let expr = parse_query(&args.query)?;
    let cfg = args.train.config()?;
    let (corpus, emb) = load_store(&args.store)?;
    let sets = load_sets(&args.sets, &corpus)?;
    let adapter = args.adapter.as_ref().map(load_adapter).transpose()?;
    let opts = QueryOptions {
        adapter: adapter.as_ref(),
        top_k: Some(args.top_k),
        train: args.train_first.then_some(cfg),
    };
    let result = evaluate_query(&expr, &sets, &emb, &opts)?;
    let text = match args.format {
        RowFormat::Tsv => output::tsv(&result, &corpus),
        RowFormat::Json => output::json(&result, &corpus)? + "\n",
    };
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn eval_config(harness: &HarnessFlags, train: &TrainFlags) -> Result<EvalConfig> {
    let trainer = train.config()?;
    Ok(EvalConfig {
        n_sample: harness.n_sample,
        repeats: harness.repeats,
        seed: trainer.seed,
        train: true,
        trainer,
        f1_average: harness.f1_average,
    })
}

fn protocol(arg: ProtocolArg, classes: &[String]) -> Result<Protocol> {
    let pair = || -> Result<(String, String)> {
        match classes {
            [a, b] => Ok((a.clone(), b.clone())),
            _ => Err(UsageError(format!(
                "serial protocols need --classes with exactly two class names, got {}",
                classes.len()
            ))
            .into()),
        }
    };
    Ok(match arg {
        ProtocolArg::Intersection => Protocol::Intersection,
        ProtocolArg::Difference => Protocol::Difference,
        ProtocolArg::SerialIntersection => {
            let (first, second) = pair()?;
            Protocol::SerialIntersection { first, second }
        }
        ProtocolArg::SerialDifference => {
            let (first, second) = pair()?;
            Protocol::SerialDifference { first, second }
        }
        ProtocolArg::SerialMixed => {
            let (first, second) = pair()?;
            Protocol::SerialMixed { first, second }
        }
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let protocol = protocol(args.protocol, &args.classes)?;
    let cfg = eval_config(&args.harness, &args.train)?;
    let (corpus, emb) = load_store(&args.store)?;
    let labeled = LabeledCorpus::from_corpus(&corpus);
    let single = |arm: Arm| -> Result<EvalReport> {
        Ok(evaluate(&labeled, &emb, &protocol, &cfg.with_arm(arm))?)
    };
    let (text, json) = match args.arm {
        ArmArg::Both => {
            let cmp = compare_arms(&labeled, &emb, &protocol, &cfg)?;
            let text = format!("{}\n{}\n{}", cmp.frozen.render(), cmp.setcse.render(), cmp.render());
            (text, serde_json::to_value(&cmp)?)
        }
        ArmArg::Setcse | ArmArg::Frozen => {
            let arm = if args.arm == ArmArg::Setcse { Arm::Setcse } else { Arm::Frozen };
            let report = single(arm)?;
            (report.render(), serde_json::to_value(&report)?)
        }
    };
    if let Some(path) = &args.out {
        write_json(path, &json)?;
    }
    match args.format {
        Format::Text => print!("{text}"),
        Format::Json => println!("{}", serde_json::to_string_pretty(&json)?),
    }
    Ok(())
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    if args.values.is_empty() {
        return Err(UsageError("--values needs at least one n_sample".into()).into());
    }
    let cfg = eval_config(&args.harness, &args.train)?;
    let (corpus, emb) = load_store(&args.store)?;
    let labeled = LabeledCorpus::from_corpus(&corpus);
    let arms: &[Arm] = match args.arm {
        ArmArg::Both => &[Arm::Frozen, Arm::Setcse],
        ArmArg::Setcse => &[Arm::Setcse],
        ArmArg::Frozen => &[Arm::Frozen],
    };
    let mut rows = Vec::new();
    for &arm in arms {
        rows.extend(sweep_n_sample(&labeled, &emb, &args.values, &cfg.with_arm(arm))?);
    }
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            sweep_to_csv(&rows, file)?;
        }
        None => sweep_to_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}
