use std::io::{self, BufRead, IsTerminal, Write};

use anyhow::{bail, Context, Result};
use setcse::query::{evaluate_query, parse_query, QueryOptions};
use setcse::store::{load_adapter, load_sets};
use setcse::{train_adapter, AdapterCheckpoint, Corpus, EmbeddingMatrix, SemanticSet, SetCollection, TrainConfig};

use crate::commands::load_store;
use crate::output;
use crate::ReplArgs;

const HELP: &str = "\
queries:    U & A \\ B      (also ∩ and ∖)
directives: :top N          rows to print
            :train [SET..]  train an adapter on the named sets (default: all)
            :load-adapter PATH
            :reset          drop the adapter
            :sets           list set names
            :quit";

struct Session {
    corpus: Corpus,
    emb: EmbeddingMatrix,
    sets: SetCollection,
    adapter: Option<AdapterCheckpoint>,
    top_k: usize,
    train: TrainConfig,
}

enum Step {
    Continue,
    Quit,
}

impl Session {
    fn handle(&mut self, line: &str, out: &mut impl Write) -> Result<Step> {
        let line = line.trim();
        if line.is_empty() {
            return Ok(Step::Continue);
        }
        let Some(directive) = line.strip_prefix(':') else {
            self.query(line, out)?;
            return Ok(Step::Continue);
        };
        let mut words = directive.split_whitespace();
        match words.next().unwrap_or("") {
            "quit" | "q" | "exit" => return Ok(Step::Quit),
            "help" | "h" => writeln!(out, "{HELP}")?,
            "top" => {
                let n = words.next().context(":top needs a number")?;
                self.top_k = n.parse().with_context(|| format!("not a row count: {n:?}"))?;
            }
            "train" => {
                let names: Vec<&str> = words.collect();
                let chosen: Vec<SemanticSet> = if names.is_empty() {
                    self.sets.sets().to_vec()
                } else {
                    names
                        .iter()
                        .map(|n| self.sets.require(n).cloned())
                        .collect::<setcse::Result<_>>()?
                };
                let report = train_adapter(&self.emb, &chosen, &self.train)?;
                writeln!(
                    out,
                    "trained on {} sets: loss {:.6} -> {:.6}",
                    chosen.len(),
                    report.loss_history.first().copied().unwrap_or(f64::NAN),
                    report.final_loss
                )?;
                self.adapter = Some(report.final_adapter);
            }
            "load-adapter" => {
                let path = words.next().context(":load-adapter needs a path")?;
                let adapter = load_adapter(path)?;
                if adapter.dim() != self.emb.dim() {
                    bail!(setcse::Error::Shape(format!(
                        "adapter dim {} does not match embedding dim {}",
                        adapter.dim(),
                        self.emb.dim()
                    )));
                }
                self.adapter = Some(adapter);
                writeln!(out, "loaded adapter from {path}")?;
            }
            "reset" => self.adapter = None,
            "sets" => {
                for s in self.sets.sets() {
                    writeln!(out, "{}\t{}", s.name(), s.len())?;
                }
            }
            other => bail!("unknown directive :{other} (try :help)"),
        }
        Ok(Step::Continue)
    }

    fn query(&self, text: &str, out: &mut impl Write) -> Result<()> {
        let expr = parse_query(text)?;
        let opts = QueryOptions {
            adapter: self.adapter.as_ref(),
            top_k: Some(self.top_k),
            train: None,
        };
        let result = evaluate_query(&expr, &self.sets, &self.emb, &opts)?;
        out.write_all(output::tsv(&result, &self.corpus).as_bytes())?;
        Ok(())
    }
}

pub fn run(args: ReplArgs) -> Result<()> {
    let train = args.train.config()?;
    let (corpus, emb) = load_store(&args.store)?;
    let sets = load_sets(&args.sets, &corpus)?;
    let adapter = args.adapter.as_ref().map(load_adapter).transpose()?;
    let mut session = Session {
        corpus,
        emb,
        sets,
        adapter,
        top_k: args.top_k,
        train,
    };
    let interactive = io::stdin().is_terminal();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if interactive {
        writeln!(out, "{} sets loaded; :help for directives", session.sets.len())?;
    }
    for line in io::stdin().lock().lines() {
        if interactive {
            write!(out, "> ")?;
            out.flush()?;
        }
        let line = line?;
        match session.handle(&line, &mut out) {
            Ok(Step::Quit) => break,
            Ok(Step::Continue) => {}
            Err(e) => eprintln!("error: {e:#}"),
        }
        out.flush()?;
    }
    Ok(())
}
