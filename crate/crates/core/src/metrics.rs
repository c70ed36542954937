//! Exact-match and edit-distance scores over compressed predictions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Levenshtein distance with unit-cost insertion, deletion and substitution.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = diag + usize::from(x != y);
            diag = row[j + 1];
            row[j + 1] = sub.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

/// One prediction/truth pair in an [`EvaluationReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairScore {
    pub edit_distance: usize,
    /// `max(|prediction|, |truth|)`.
    pub normalizer: usize,
}

impl PairScore {
    pub fn normalized(&self) -> f64 {
        self.edit_distance as f64 / self.normalizer as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Percentage of exact matches.
    pub exact_score: f64,
    /// `100 − 100 · mean normalized edit distance`.
    pub eds: f64,
    pub per_sequence: Vec<PairScore>,
}

impl EvaluationReport {
    /// EDS recomputed from the per-sequence records.
    pub fn recompute_eds(&self) -> f64 {
        eds_from_pairs(&self.per_sequence)
    }
}

fn eds_from_pairs(pairs: &[PairScore]) -> f64 {
    let sum: f64 = pairs.iter().map(PairScore::normalized).sum();
    100.0 - 100.0 * sum / pairs.len() as f64
}

fn check_lists<S>(preds: &[S], truths: &[S]) -> Result<()> {
    if preds.is_empty() {
        return invalid("cannot score an empty list");
    }
    if preds.len() != truths.len() {
        return invalid(format!("{} predictions for {} truths", preds.len(), truths.len()));
    }
    Ok(())
}

/// `100 × (exact matches) / (pairs)`.
pub fn exact_score<T: PartialEq, S: AsRef<[T]>>(preds: &[S], truths: &[S]) -> Result<f64> {
    check_lists(preds, truths)?;
    let hits = preds
        .iter()
        .zip(truths)
        .filter(|(p, t)| p.as_ref() == t.as_ref())
        .count();
    Ok(100.0 * hits as f64 / preds.len() as f64)
}

/// Edit Distance Score and the full per-pair report.
pub fn eds<T: PartialEq, S: AsRef<[T]>>(preds: &[S], truths: &[S]) -> Result<(f64, EvaluationReport)> {
    let report = evaluate(preds, truths)?;
    Ok((report.eds, report))
}

pub fn evaluate<T: PartialEq, S: AsRef<[T]>>(preds: &[S], truths: &[S]) -> Result<EvaluationReport> {
    check_lists(preds, truths)?;
    let mut per_sequence = Vec::with_capacity(preds.len());
    for (n, (p, t)) in preds.iter().zip(truths).enumerate() {
        let (p, t) = (p.as_ref(), t.as_ref());
        if p.is_empty() || t.is_empty() {
            return invalid(format!("pair {n} contains an empty sequence"));
        }
        per_sequence.push(PairScore {
            edit_distance: edit_distance(p, t),
            normalizer: p.len().max(t.len()),
        });
    }
    Ok(EvaluationReport {
        exact_score: exact_score(preds, truths)?,
        eds: eds_from_pairs(&per_sequence),
        per_sequence,
    })
}
