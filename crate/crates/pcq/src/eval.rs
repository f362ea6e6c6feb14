//! Evaluation protocol: per-class tolerance thresholds, retrieval accuracy
//! with precision/recall, random COUNT-query accuracy, and aggregation error
//! (absolute difference and Q-error) over consecutive-frame groups.

use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::{agg_sum, QueryCondition, QueryOp};
use crate::rng::{derive_seed, SplitMix64};
use crate::store::{consecutive_groups, FrameCorpus};

/// Per-class absolute slack: floor(max per-frame count of the class * rate).
pub fn tolerance_thresholds(truth: &FrameCorpus, classes: &[String], rate: f64) -> Vec<u64> {
    classes
        .iter()
        .map(|class| {
            let max = truth.iter().map(|d| d.count_of(class)).max().unwrap_or(0);
            (max as f64 * rate).floor() as u64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalEval {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

fn tolerance_of(classes: &[String], tolerances: &[u64], class: &str) -> u64 {
    classes
        .iter()
        .position(|c| c == class)
        .map(|i| tolerances[i])
        .unwrap_or(0)
}

/// Evaluate one retrieval condition set frame by frame.
///
/// A predicted count within its class tolerance of the truth is treated as
/// the truth; satisfaction is then compared exactly. A frame is correct when
/// predicted and ground-truth satisfaction agree, accuracy is the correct
/// fraction, and precision/recall compare the predicted-selected set against
/// the truth-selected set (an empty selection scores 1.0 vacuously).
pub fn eval_retrieval(
    pred: &FrameCorpus,
    truth: &FrameCorpus,
    conditions: &[QueryCondition],
    classes: &[String],
    tolerances: &[u64],
) -> Result<RetrievalEval> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            expected: (truth.len(), 0, 0),
            got: (pred.len(), 0, 0),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut correct = 0usize;
    let mut tp = 0usize;
    let mut selected_pred = 0usize;
    let mut selected_truth = 0usize;
    for i in 0..truth.len() {
        let satisfied = |corpus: &FrameCorpus, effective: bool| -> bool {
            conditions.iter().all(|c| {
                let mut count = corpus[i].count_of(&c.class);
                if effective {
                    let t = truth[i].count_of(&c.class);
                    let tol = tolerance_of(classes, tolerances, &c.class);
                    if count.abs_diff(t) <= tol {
                        count = t;
                    }
                }
                c.op.eval(count, c.count)
            })
        };
        let member_truth = satisfied(truth, false);
        let member_pred = satisfied(pred, true);
        if member_pred == member_truth {
            correct += 1;
        }
        if member_pred {
            selected_pred += 1;
        }
        if member_truth {
            selected_truth += 1;
        }
        if member_pred && member_truth {
            tp += 1;
        }
    }
    let vacuous_one = |num: usize, den: usize| {
        if den == 0 {
            1.0
        } else {
            num as f64 / den as f64
        }
    };
    Ok(RetrievalEval {
        accuracy: correct as f64 / truth.len() as f64,
        precision: vacuous_one(tp, selected_pred),
        recall: vacuous_one(tp, selected_truth),
    })
}

/// Fraction of seeded random COUNT queries answered within relative
/// tolerance: |pred - truth| <= ceil(rate * truth).
pub fn eval_count_queries(
    pred: &FrameCorpus,
    truth: &FrameCorpus,
    class: &str,
    n_queries: usize,
    tol_rate: f64,
    seed: u64,
) -> Result<f64> {
    if pred.len() != truth.len() || truth.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let max_ct = truth.iter().map(|d| d.count_of(class)).max().unwrap_or(0);
    let mut rng = SplitMix64::new(seed);
    let ops = [QueryOp::Le, QueryOp::Ge, QueryOp::Eq];
    let mut correct = 0usize;
    for _ in 0..n_queries {
        let op = ops[rng.next_below(3) as usize];
        let ct = rng.next_below(max_ct + 1);
        let truth_answer = crate::query::count_query(truth, class, op, ct, None);
        let pred_answer = crate::query::count_query(pred, class, op, ct, None);
        let slack = (tol_rate * truth_answer as f64).ceil() as u64;
        if pred_answer.abs_diff(truth_answer) <= slack {
            correct += 1;
        }
    }
    Ok(correct as f64 / n_queries.max(1) as f64)
}

/// Ratio error of two sums with the zero guard: both zero is exact (1.0),
/// otherwise max(a, b) / max(min(a, b), 1).
pub fn q_error(a: u64, b: u64) -> f64 {
    if a == 0 && b == 0 {
        return 1.0;
    }
    let hi = a.max(b) as f64;
    let lo = a.min(b).max(1) as f64;
    hi / lo
}

/// Mean absolute difference and mean Q-error of per-group sums of one class.
pub fn eval_agg(
    pred: &FrameCorpus,
    truth: &FrameCorpus,
    class: &str,
    groups: &[Range<usize>],
) -> Result<(f64, f64)> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            expected: (truth.len(), 0, 0),
            got: (pred.len(), 0, 0),
        });
    }
    if groups.is_empty() {
        return Err(Error::InvalidConfig("no groups to evaluate".into()));
    }
    let mut abs_sum = 0.0;
    let mut q_sum = 0.0;
    for g in groups {
        let range = Some((g.start, g.end));
        let s_pred = agg_sum(pred, class, range);
        let s_truth = agg_sum(truth, class, range);
        abs_sum += s_pred.abs_diff(s_truth) as f64;
        q_sum += q_error(s_pred, s_truth);
    }
    Ok((abs_sum / groups.len() as f64, q_sum / groups.len() as f64))
}

/// Consecutive-frame group sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub n_groups: usize,
    pub len_min: usize,
    pub len_max: usize,
}

impl Default for GroupSpec {
    fn default() -> Self {
        Self {
            n_groups: 500,
            len_min: 100,
            len_max: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub tolerance_rate: f64,
    pub retrieval_queries_per_class: usize,
    pub count_queries_per_class: usize,
    pub groups: GroupSpec,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tolerance_rate: 0.1,
            retrieval_queries_per_class: 200,
            count_queries_per_class: 1000,
            groups: GroupSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub class: String,
    pub retrieval_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub count_accuracy: f64,
    pub agg_abs_diff: f64,
    pub agg_q_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tolerance_rate: f64,
    pub per_class: Vec<MetricsRow>,
    pub overall: MetricsRow,
}

/// Full protocol over aligned predicted and ground-truth corpora: per class,
/// seeded random single-condition retrievals, random COUNT queries, and
/// per-group aggregation error.
pub fn evaluate_corpora(
    pred: &FrameCorpus,
    truth: &FrameCorpus,
    config: &EvalConfig,
) -> Result<EvalReport> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            expected: (truth.len(), 0, 0),
            got: (pred.len(), 0, 0),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let classes = truth.class_names();
    if classes.is_empty() {
        return Err(Error::InvalidConfig(
            "ground-truth corpus has no object classes".into(),
        ));
    }
    let tolerances = tolerance_thresholds(truth, &classes, config.tolerance_rate);
    let groups = consecutive_groups(
        truth.len(),
        config.groups.n_groups,
        config.groups.len_min,
        config.groups.len_max,
        derive_seed(config.seed, 0xA66),
    )?;

    let ops = [QueryOp::Le, QueryOp::Ge, QueryOp::Eq];
    let mut per_class = Vec::with_capacity(classes.len());
    for (class_index, class) in classes.iter().enumerate() {
        let max_ct = truth.iter().map(|d| d.count_of(class)).max().unwrap_or(0);
        let mut rng = SplitMix64::new(derive_seed(config.seed, class_index as u64));
        let mut acc = 0.0;
        let mut precision = 0.0;
        let mut recall = 0.0;
        for _ in 0..config.retrieval_queries_per_class {
            let condition = QueryCondition {
                class: class.clone(),
                op: ops[rng.next_below(3) as usize],
                count: rng.next_below(max_ct + 1),
            };
            let r = eval_retrieval(pred, truth, &[condition], &classes, &tolerances)?;
            acc += r.accuracy;
            precision += r.precision;
            recall += r.recall;
        }
        let n = config.retrieval_queries_per_class.max(1) as f64;
        let count_accuracy = eval_count_queries(
            pred,
            truth,
            class,
            config.count_queries_per_class,
            config.tolerance_rate,
            derive_seed(config.seed, 0xC0 + class_index as u64),
        )?;
        let (agg_abs_diff, agg_q_error) = eval_agg(pred, truth, class, &groups)?;
        per_class.push(MetricsRow {
            class: class.clone(),
            retrieval_accuracy: acc / n,
            precision: precision / n,
            recall: recall / n,
            count_accuracy,
            agg_abs_diff,
            agg_q_error,
        });
    }

    let mean = |f: fn(&MetricsRow) -> f64| -> f64 {
        per_class.iter().map(f).sum::<f64>() / per_class.len() as f64
    };
    let overall = MetricsRow {
        class: "overall".into(),
        retrieval_accuracy: mean(|r| r.retrieval_accuracy),
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        count_accuracy: mean(|r| r.count_accuracy),
        agg_abs_diff: mean(|r| r.agg_abs_diff),
        agg_q_error: mean(|r| r.agg_q_error),
    };
    Ok(EvalReport {
        tolerance_rate: config.tolerance_rate,
        per_class,
        overall,
    })
}

/// Aligned-column text table of a report.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<22} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        format!("class (tol {:.0}%)", report.tolerance_rate * 100.0),
        "RETR-ACC",
        "PRECISION",
        "RECALL",
        "COUNT",
        "AGG-ABS",
        "AGG-QERR"
    );
    let mut row = |r: &MetricsRow| {
        let _ = writeln!(
            out,
            "{:<22} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>10.3}",
            r.class,
            r.retrieval_accuracy,
            r.precision,
            r.recall,
            r.count_accuracy,
            r.agg_abs_diff,
            r.agg_q_error
        );
    };
    for r in &report.per_class {
        row(r);
    }
    row(&report.overall);
    out
}
