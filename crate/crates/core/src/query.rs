//! Textual queries.
//!
//! ```text
//! query := IDENT (op IDENT)+
//! op    := '&' | '∩' | '\' | '∖'
//! IDENT := [A-Za-z_][A-Za-z0-9_-]*
//! ```
//!
//! The chain is flat: the first name is the carrier, every following name is
//! an operand. Whitespace between tokens is ignored.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::geometry::apply_adapter;
use crate::ops::{rank_series, OperationSeries, Polarity, RankedResult};
use crate::store::{AdapterCheckpoint, EmbeddingMatrix, SemanticSet, SetCollection};
use crate::trainer::{train_adapter, TrainConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("query parse error at byte {offset}: expected {expected}, found {found}")]
pub struct QueryParseError {
    pub offset: usize,
    pub expected: &'static str,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryExpr {
    pub carrier: String,
    pub operands: Vec<(Polarity, String)>,
}

impl fmt::Display for QueryExpr {
    /// Canonical ASCII rendering, e.g. `U & A \ B`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.carrier)?;
        for (op, name) in &self.operands {
            let sym = match op {
                Polarity::Intersect => '&',
                Polarity::Difference => '\\',
            };
            write!(f, " {sym} {name}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for QueryExpr {
    type Err = QueryParseError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        parse_query(s)
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn operator(c: char) -> Option<Polarity> {
    match c {
        '&' | '∩' => Some(Polarity::Intersect),
        '\\' | '∖' => Some(Polarity::Difference),
        _ => None,
    }
}

fn describe(c: Option<char>) -> String {
    match c {
        None => "end of input".into(),
        Some(c) if operator(c).is_some() => format!("operator {c:?}"),
        Some(c) if is_ident_start(c) => "identifier".into(),
        Some(c) => format!("unexpected character {c:?}"),
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek().filter(|c| c.is_whitespace()) {
            self.pos += c.len_utf8();
        }
    }

    fn error(&self, expected: &'static str) -> QueryParseError {
        QueryParseError {
            offset: self.pos,
            expected,
            found: describe(self.peek()),
        }
    }

    fn ident(&mut self, expected: &'static str) -> std::result::Result<String, QueryParseError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if is_ident_start(c) => {
                let start = self.pos;
                while let Some(c) = self.peek().filter(|&c| is_ident_continue(c)) {
                    self.pos += c.len_utf8();
                }
                Ok(self.src[start..self.pos].to_owned())
            }
            _ => Err(self.error(expected)),
        }
    }

    fn op(&mut self) -> std::result::Result<Option<Polarity>, QueryParseError> {
        self.skip_ws();
        match self.peek() {
            None => Ok(None),
            Some(c) => match operator(c) {
                Some(p) => {
                    self.pos += c.len_utf8();
                    Ok(Some(p))
                }
                None => Err(self.error("operator '&', '∩', '\\' or '∖'")),
            },
        }
    }
}

pub fn parse_query(text: &str) -> std::result::Result<QueryExpr, QueryParseError> {
    let mut p = Parser { src: text, pos: 0 };
    let carrier = p.ident("carrier set name")?;
    let mut operands = Vec::new();
    while let Some(op) = p.op()? {
        let name = p.ident("set name after operator")?;
        operands.push((op, name));
    }
    if operands.is_empty() {
        return Err(p.error("operator '&', '∩', '\\' or '∖'"));
    }
    Ok(QueryExpr { carrier, operands })
}

/// Parses raw bytes; invalid UTF-8 is reported at the first bad byte.
pub fn parse_query_bytes(bytes: &[u8]) -> std::result::Result<QueryExpr, QueryParseError> {
    match std::str::from_utf8(bytes) {
        Ok(s) => parse_query(s),
        Err(e) => {
            let valid = &bytes[..e.valid_up_to()];
            // Report a grammar error in the valid prefix first, if there is one.
            let prefix = std::str::from_utf8(valid).expect("valid prefix");
            match parse_query(prefix) {
                Err(err) if err.offset < prefix.len() => Err(err),
                _ => Err(QueryParseError {
                    offset: e.valid_up_to(),
                    expected: "UTF-8 text",
                    found: format!("invalid byte 0x{:02x}", bytes[e.valid_up_to()]),
                }),
            }
        }
    }
}

/// How a query is scored.
#[derive(Debug, Clone, Default)]
pub struct QueryOptions<'a> {
    /// Applied to the base embeddings unless `train` is set.
    pub adapter: Option<&'a AdapterCheckpoint>,
    /// Truncates the result; values beyond the carrier size return everything.
    pub top_k: Option<usize>,
    /// Train a fresh adapter on the query's operand sets before scoring.
    pub train: Option<TrainConfig>,
}

/// Resolves names, optionally trains or applies an adapter, and ranks the carrier.
pub fn evaluate_query(
    expr: &QueryExpr,
    sets: &SetCollection,
    base: &EmbeddingMatrix,
    opts: &QueryOptions<'_>,
) -> Result<RankedResult> {
    let carrier = sets.require(&expr.carrier)?;
    let mut intersects = Vec::new();
    let mut differences = Vec::new();
    for (op, name) in &expr.operands {
        let set = sets.require(name)?;
        match op {
            Polarity::Intersect => intersects.push(set),
            Polarity::Difference => differences.push(set),
        }
    }
    let series = OperationSeries::new(carrier, intersects, differences)?;

    let adapted;
    let emb = if let Some(cfg) = &opts.train {
        let mut operand_sets: Vec<SemanticSet> = Vec::new();
        for (_, name) in &expr.operands {
            if !operand_sets.iter().any(|s| s.name() == name) {
                operand_sets.push(sets.require(name)?.clone());
            }
        }
        if operand_sets.len() < 2 {
            return Err(Error::Domain(
                "training needs at least 2 distinct operand sets in the query".into(),
            ));
        }
        let report = train_adapter(base, &operand_sets, cfg)?;
        adapted = apply_adapter(&report.final_adapter, base)?;
        &adapted
    } else if let Some(adapter) = opts.adapter {
        adapted = apply_adapter(adapter, base)?;
        &adapted
    } else {
        base
    };

    let result = rank_series(&series, emb)?;
    match opts.top_k {
        Some(k) => result.top_k(k.min(result.len())),
        None => Ok(result),
    }
}
