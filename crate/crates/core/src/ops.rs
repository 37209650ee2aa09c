//! Set operations over a carrier set.
//!
//! A series `A ∩ B_1 ∩ … ∩ B_N ∖ C_1 ∖ … ∖ C_M` orders the members of `A` by
//!
//! ```text
//! score(x) = Σ_i SIM(x, B_i) − Σ_j SIM(x, C_j)
//! ```
//!
//! descending. Ties keep carrier order. Operand contributions are always summed
//! in a canonical order (by set name, intersections before differences) so the
//! result does not depend on how the query listed its operands.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{mean_similarity, resolve_rows};
use crate::store::{EmbeddingMatrix, SemanticSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Polarity {
    Intersect,
    Difference,
}

/// Carrier plus ordered intersect and difference operands.
#[derive(Debug, Clone)]
pub struct OperationSeries<'a> {
    pub carrier: &'a SemanticSet,
    pub intersects: Vec<&'a SemanticSet>,
    pub differences: Vec<&'a SemanticSet>,
}

impl<'a> OperationSeries<'a> {
    pub fn new(
        carrier: &'a SemanticSet,
        intersects: Vec<&'a SemanticSet>,
        differences: Vec<&'a SemanticSet>,
    ) -> Result<Self> {
        let series = OperationSeries {
            carrier,
            intersects,
            differences,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn intersection(carrier: &'a SemanticSet, operand: &'a SemanticSet) -> Self {
        OperationSeries {
            carrier,
            intersects: vec![operand],
            differences: Vec::new(),
        }
    }

    pub fn difference(carrier: &'a SemanticSet, operand: &'a SemanticSet) -> Self {
        OperationSeries {
            carrier,
            intersects: Vec::new(),
            differences: vec![operand],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.intersects.is_empty() && self.differences.is_empty() {
            return Err(Error::Domain(format!(
                "series over {:?} has no operands",
                self.carrier.name()
            )));
        }
        if let Some(s) = std::iter::once(&self.carrier)
            .chain(&self.intersects)
            .chain(&self.differences)
            .find(|s| s.is_empty())
        {
            return Err(Error::Domain(format!("set {:?} is empty", s.name())));
        }
        Ok(())
    }

    /// Operands with their polarity, in canonical summation order.
    fn canonical_operands(&self) -> Vec<(Polarity, &'a SemanticSet)> {
        let mut ops: Vec<(Polarity, &'a SemanticSet)> = self
            .intersects
            .iter()
            .map(|s| (Polarity::Intersect, *s))
            .chain(self.differences.iter().map(|s| (Polarity::Difference, *s)))
            .collect();
        ops.sort_by(|(pa, a), (pb, b)| {
            a.name()
                .cmp(b.name())
                .then(pa.cmp(pb))
                .then_with(|| a.members().cmp(b.members()))
        });
        ops
    }
}

/// One ranked carrier member.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedEntry {
    pub id: String,
    pub score: f64,
    /// Position of the sentence in the carrier's member list.
    pub original_index: usize,
}

/// The carrier ordered by descending score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedResult {
    pub carrier_name: String,
    pub entries: Vec<RankedEntry>,
}

impl RankedResult {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }

    /// First `k` entries; errors when `k` exceeds the result length.
    pub fn top_k(&self, k: usize) -> Result<RankedResult> {
        if k > self.entries.len() {
            return Err(Error::Range(format!(
                "top {k} requested from a result of {} entries",
                self.entries.len()
            )));
        }
        Ok(RankedResult {
            carrier_name: self.carrier_name.clone(),
            entries: self.entries[..k].to_vec(),
        })
    }
}

/// Series score of every carrier member, aligned with the carrier's member list.
pub fn series_scores(series: &OperationSeries<'_>, emb: &EmbeddingMatrix) -> Result<Vec<f64>> {
    series.validate()?;
    let carrier_rows = resolve_rows(series.carrier, emb)?;
    let operands: Vec<(f64, Vec<usize>)> = series
        .canonical_operands()
        .into_iter()
        .map(|(p, s)| {
            let sign = match p {
                Polarity::Intersect => 1.0,
                Polarity::Difference => -1.0,
            };
            Ok((sign, resolve_rows(s, emb)?))
        })
        .collect::<Result<_>>()?;

    Ok(carrier_rows
        .par_iter()
        .map(|&row| {
            let (x, sx) = (emb.row(row), emb.sq_norm(row));
            operands.iter().fold(0.0, |acc, (sign, rows)| {
                acc + sign * mean_similarity(x, sx, rows, emb)
            })
        })
        .collect())
}

fn rank_order(a: &RankedEntry, b: &RankedEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.original_index.cmp(&b.original_index))
}

/// Ranks the carrier by descending series score, ties in carrier order.
pub fn rank_series(series: &OperationSeries<'_>, emb: &EmbeddingMatrix) -> Result<RankedResult> {
    let scores = series_scores(series, emb)?;
    let mut entries: Vec<RankedEntry> = series
        .carrier
        .members()
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(i, (id, score))| RankedEntry {
            id: id.clone(),
            score,
            original_index: i,
        })
        .collect();
    entries.sort_by(rank_order);
    Ok(RankedResult {
        carrier_name: series.carrier.name().to_owned(),
        entries,
    })
}

/// `A ∩ B`: members of `A` most similar to `B` first.
pub fn intersection(a: &SemanticSet, b: &SemanticSet, emb: &EmbeddingMatrix) -> Result<RankedResult> {
    rank_series(&OperationSeries::intersection(a, b), emb)
}

/// `A ∖ C`: members of `A` least similar to `C` first.
pub fn difference(a: &SemanticSet, c: &SemanticSet, emb: &EmbeddingMatrix) -> Result<RankedResult> {
    rank_series(&OperationSeries::difference(a, c), emb)
}

pub fn top_k(result: &RankedResult, k: usize) -> Result<RankedResult> {
    result.top_k(k)
}
