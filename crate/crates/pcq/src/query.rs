//! RETRIEVAL / COUNT / AGGREGATION queries over a frame corpus.
//!
//! Text form: `retrieve car>=3 ped=0`, `count car>=5`, `agg sum car`,
//! `agg avg car`; an optional frame range restricts any query to
//! [start, end) of the corpus.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::FrameCorpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryOp {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl QueryOp {
    pub fn eval(self, count: u64, ct: u64) -> bool {
        match self {
            QueryOp::Le => count <= ct,
            QueryOp::Ge => count >= ct,
            QueryOp::Eq => count == ct,
        }
    }
}

impl fmt::Display for QueryOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryOp::Le => "<=",
            QueryOp::Ge => ">=",
            QueryOp::Eq => "=",
        })
    }
}

/// A single count constraint: class, operator, threshold count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryCondition {
    pub class: String,
    pub op: QueryOp,
    pub count: u64,
}

impl fmt::Display for QueryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.class, self.op, self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Retrieval,
    Count,
    AggSum,
    AggAvg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub kind: QueryKind,
    /// Retrieval: one or more; Count: exactly one; Agg: exactly one, whose
    /// op/count are ignored (class only).
    pub conditions: Vec<QueryCondition>,
    /// Half-open frame range; `None` means the whole corpus.
    pub range: Option<(usize, usize)>,
}

impl QuerySpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            QueryKind::Retrieval if !self.conditions.is_empty() => Ok(()),
            QueryKind::Retrieval => Err(Error::Query(
                "retrieval takes at least one condition".into(),
            )),
            QueryKind::Count if self.conditions.len() == 1 => Ok(()),
            QueryKind::AggSum | QueryKind::AggAvg if self.conditions.len() == 1 => Ok(()),
            _ => Err(Error::Query(format!(
                "{:?} takes exactly one condition, got {}",
                self.kind,
                self.conditions.len()
            ))),
        }
    }
}

fn clip_range(corpus: &FrameCorpus, range: Option<(usize, usize)>) -> (usize, usize) {
    match range {
        Some((start, end)) => (start.min(corpus.len()), end.min(corpus.len())),
        None => (0, corpus.len()),
    }
}

/// Frames (by position) satisfying every condition; the empty condition list
/// is vacuously true everywhere.
pub fn retrieval(
    corpus: &FrameCorpus,
    conditions: &[QueryCondition],
    range: Option<(usize, usize)>,
) -> Vec<usize> {
    let (start, end) = clip_range(corpus, range);
    (start..end)
        .filter(|&i| {
            conditions
                .iter()
                .all(|c| c.op.eval(corpus[i].count_of(&c.class), c.count))
        })
        .collect()
}

/// Number of frames whose count of `class` satisfies `op count`.
pub fn count_query(
    corpus: &FrameCorpus,
    class: &str,
    op: QueryOp,
    count: u64,
    range: Option<(usize, usize)>,
) -> u64 {
    retrieval(
        corpus,
        &[QueryCondition {
            class: class.to_string(),
            op,
            count,
        }],
        range,
    )
    .len() as u64
}

/// Total count of `class` over the (range-restricted) corpus.
pub fn agg_sum(corpus: &FrameCorpus, class: &str, range: Option<(usize, usize)>) -> u64 {
    let (start, end) = clip_range(corpus, range);
    (start..end).map(|i| corpus[i].count_of(class)).sum()
}

/// Mean count of `class` per frame; empty selection is an error.
pub fn agg_avg(corpus: &FrameCorpus, class: &str, range: Option<(usize, usize)>) -> Result<f64> {
    let (start, end) = clip_range(corpus, range);
    if start >= end {
        return Err(Error::EmptyCorpus);
    }
    Ok(agg_sum(corpus, class, range) as f64 / (end - start) as f64)
}

/// Answer of any query kind, for dispatch-style callers.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryAnswer {
    Frames(Vec<usize>),
    Count(u64),
    Sum(u64),
    Avg(f64),
}

pub fn execute(corpus: &FrameCorpus, spec: &QuerySpec) -> Result<QueryAnswer> {
    spec.validate()?;
    Ok(match spec.kind {
        QueryKind::Retrieval => {
            QueryAnswer::Frames(retrieval(corpus, &spec.conditions, spec.range))
        }
        QueryKind::Count => {
            let c = &spec.conditions[0];
            QueryAnswer::Count(count_query(corpus, &c.class, c.op, c.count, spec.range))
        }
        QueryKind::AggSum => {
            QueryAnswer::Sum(agg_sum(corpus, &spec.conditions[0].class, spec.range))
        }
        QueryKind::AggAvg => {
            QueryAnswer::Avg(agg_avg(corpus, &spec.conditions[0].class, spec.range)?)
        }
    })
}

fn parse_condition(token: &str) -> Result<QueryCondition> {
    for (sym, op) in [(">=", QueryOp::Ge), ("<=", QueryOp::Le), ("=", QueryOp::Eq)] {
        if let Some(idx) = token.find(sym) {
            let class = token[..idx].trim();
            let value = token[idx + sym.len()..].trim();
            if class.is_empty() {
                return Err(Error::Query(format!("missing class in {token:?}")));
            }
            let count: u64 = value
                .parse()
                .map_err(|_| Error::Query(format!("bad count in {token:?}")))?;
            return Ok(QueryCondition {
                class: class.to_string(),
                op,
                count,
            });
        }
    }
    Err(Error::Query(format!(
        "no operator (<=, >=, =) in {token:?}"
    )))
}

/// Parse the CLI text form. The range, when given, comes from a separate flag.
pub fn parse_query(text: &str, range: Option<(usize, usize)>) -> Result<QuerySpec> {
    let mut tokens = text.split_whitespace();
    let head = tokens
        .next()
        .ok_or_else(|| Error::Query("empty query".into()))?;
    let spec = match head {
        "retrieve" => QuerySpec {
            kind: QueryKind::Retrieval,
            conditions: tokens.map(parse_condition).collect::<Result<Vec<_>>>()?,
            range,
        },
        "count" => {
            let conditions = tokens.map(parse_condition).collect::<Result<Vec<_>>>()?;
            QuerySpec {
                kind: QueryKind::Count,
                conditions,
                range,
            }
        }
        "agg" => {
            let func = tokens
                .next()
                .ok_or_else(|| Error::Query("agg needs `sum` or `avg`".into()))?;
            let kind = match func {
                "sum" => QueryKind::AggSum,
                "avg" => QueryKind::AggAvg,
                other => return Err(Error::Query(format!("unknown agg function {other:?}"))),
            };
            let class = tokens
                .next()
                .ok_or_else(|| Error::Query("agg needs a class".into()))?;
            if let Some(extra) = tokens.next() {
                return Err(Error::Query(format!("unexpected token {extra:?}")));
            }
            QuerySpec {
                kind,
                conditions: vec![QueryCondition {
                    class: class.to_string(),
                    op: QueryOp::Ge,
                    count: 0,
                }],
                range,
            }
        }
        other => {
            return Err(Error::Query(format!(
                "unknown query {other:?}; expected retrieve, count, or agg"
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}
