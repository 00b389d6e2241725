//! One-vs-rest precision-recall curves.

use std::io::Write;

use crate::beats::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    /// Beats scoring at or above this value are called positive.
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub class_label: Label,
    /// One point per distinct score, in decreasing threshold order.
    pub points: Vec<PrPoint>,
    pub auprc: f64,
    pub positives: usize,
    pub total: usize,
}

/// Sweeps every distinct score as a threshold. Area is the step-wise sum
/// of precision times recall increment.
pub fn pr_curve(class_label: Label, scores: &[f64], truth: &[bool]) -> Result<PrCurve> {
    if scores.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            actual: truth.len(),
        });
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite score {s}")));
    }
    let positives = truth.iter().filter(|&&t| t).count();
    if positives == 0 {
        return Err(Error::InvalidArgument(format!(
            "no positive beats for class {class_label}"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if truth[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(point(threshold, tp, fp, positives));
    }
    Ok(PrCurve {
        class_label,
        auprc: area(&points),
        points,
        positives,
        total: scores.len(),
    })
}

fn point(threshold: f64, tp: usize, fp: usize, positives: usize) -> PrPoint {
    PrPoint {
        threshold,
        recall: tp as f64 / positives as f64,
        precision: tp as f64 / (tp + fp) as f64,
    }
}

fn area(points: &[PrPoint]) -> f64 {
    let mut prev = 0.0;
    let mut acc = 0.0;
    for p in points {
        acc += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    acc
}

impl PrCurve {
    /// Highest-precision point whose recall reaches `target`, or the point
    /// with the nearest recall when none does.
    pub fn at_recall(&self, target: f64) -> PrPoint {
        let reaching = self
            .points
            .iter()
            .filter(|p| p.recall >= target)
            .fold(None::<PrPoint>, |best, p| match best {
                Some(b) if b.precision >= p.precision => Some(b),
                _ => Some(*p),
            });
        reaching.unwrap_or_else(|| {
            *self
                .points
                .iter()
                .min_by(|a, b| (a.recall - target).abs().total_cmp(&(b.recall - target).abs()))
                .expect("curves have at least one point")
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "threshold,recall,precision")?;
        for p in &self.points {
            writeln!(out, "{},{},{}", p.threshold, p.recall, p.precision)?;
        }
        Ok(())
    }
}

/// Class-`label` scores and membership flags from per-beat probabilities.
pub fn one_vs_rest(probs: &[[f64; 4]], labels: &[Label], label: Label) -> (Vec<f64>, Vec<bool>) {
    let scores = probs.iter().map(|p| p[label.index()]).collect();
    let truth = labels.iter().map(|&l| l == label).collect();
    (scores, truth)
}
