//! Per-regime, per-class precision-recall evaluation and its on-disk report.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::beats::{BeatDataset, Label};
use crate::classifier::Classifier;
use crate::error::Result;
use crate::metrics::{one_vs_rest, pr_curve, PrCurve};

/// Recall values at which operating points are reported per class.
pub const MATCHED_RECALL: [(Label, f64); 3] = [(Label::S, 0.41), (Label::V, 0.91), (Label::F, 0.60)];

pub fn matched_recall(label: Label) -> Option<f64> {
    MATCHED_RECALL.iter().find(|(l, _)| *l == label).map(|&(_, r)| r)
}

/// Test-set probabilities of one regime, or `None` if its artifacts are missing.
#[derive(Debug, Clone)]
pub struct RegimeScores {
    pub regime: String,
    pub probs: Option<Vec<[f64; 4]>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeCurve {
    pub regime: String,
    pub curve: PrCurve,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub curves: Vec<RegimeCurve>,
    /// Regimes listed without scores.
    pub absent: Vec<String>,
    /// Requested classes without a single positive test beat.
    pub no_positives: Vec<Label>,
}

/// One curve per (present regime, class with positives).
pub fn evaluate_regimes(entries: &[RegimeScores], labels: &[Label], classes: &[Label]) -> Result<Report> {
    let no_positives: Vec<Label> = classes.iter().copied().filter(|c| !labels.contains(c)).collect();
    let live: Vec<Label> = classes.iter().copied().filter(|c| labels.contains(c)).collect();
    let absent = entries
        .iter()
        .filter(|e| e.probs.is_none())
        .map(|e| e.regime.clone())
        .collect();
    let per_regime: Vec<Result<Vec<RegimeCurve>>> = entries
        .par_iter()
        .filter_map(|e| e.probs.as_ref().map(|p| (e, p)))
        .map(|(e, probs)| {
            if probs.len() != labels.len() {
                return Err(crate::Error::LengthMismatch {
                    expected: labels.len(),
                    actual: probs.len(),
                });
            }
            live.iter()
                .map(|&c| {
                    let (scores, truth) = one_vs_rest(probs, labels, c);
                    Ok(RegimeCurve {
                        regime: e.regime.clone(),
                        curve: pr_curve(c, &scores, &truth)?,
                    })
                })
                .collect()
        })
        .collect();
    let mut curves = Vec::new();
    for r in per_regime {
        curves.extend(r?);
    }
    Ok(Report {
        curves,
        absent,
        no_positives,
    })
}

/// Scores each available classifier on `test` and evaluates all classes.
pub fn evaluate_models(models: &[(String, Option<&Classifier>)], test: &BeatDataset) -> Result<Report> {
    let entries = models
        .par_iter()
        .map(|(name, m)| {
            Ok(RegimeScores {
                regime: name.clone(),
                probs: match m {
                    Some(m) => Some(m.predict_beats(test.beats())?),
                    None => None,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<Label> = test.beats().iter().map(|b| b.label).collect();
    evaluate_regimes(&entries, &labels, &Label::ALL)
}

impl Report {
    pub fn curve(&self, regime: &str, label: Label) -> Option<&PrCurve> {
        self.curves
            .iter()
            .find(|c| c.regime == regime && c.curve.class_label == label)
            .map(|c| &c.curve)
    }

    /// Text table of area and matched-recall operating point per curve.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:<16} {:<5} {:>8} {:>7} {:>7} {:>7} {:>9}",
            "regime", "class", "auprc", "target", "re", "pr", "positives"
        )
        .unwrap();
        for rc in &self.curves {
            let c = &rc.curve;
            let (target, re, pr) = match matched_recall(c.class_label) {
                Some(t) => {
                    let p = c.at_recall(t);
                    (
                        format!("{t:.2}"),
                        format!("{:.3}", p.recall),
                        format!("{:.3}", p.precision),
                    )
                }
                None => ("-".into(), "-".into(), "-".into()),
            };
            writeln!(
                s,
                "{:<16} {:<5} {:>8.4} {:>7} {:>7} {:>7} {:>9}",
                rc.regime, c.class_label, c.auprc, target, re, pr, c.positives
            )
            .unwrap();
        }
        for a in &self.absent {
            writeln!(s, "absent: {a}").unwrap();
        }
        for l in &self.no_positives {
            writeln!(s, "no positive test beats: {l}").unwrap();
        }
        s
    }

    /// `curves/<regime>_<class>.csv`, matching gnuplot `.dat` files and
    /// `summary.txt` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let curves = dir.join("curves");
        std::fs::create_dir_all(&curves)?;
        for rc in &self.curves {
            let stem = format!("{}_{}", rc.regime, rc.curve.class_label);
            let mut f = std::io::BufWriter::new(std::fs::File::create(curves.join(format!("{stem}.csv")))?);
            rc.curve.write_csv(&mut f)?;
            f.flush()?;
            let mut f = std::io::BufWriter::new(std::fs::File::create(curves.join(format!("{stem}.dat")))?);
            writeln!(
                f,
                "# {} class {} auprc {}",
                rc.regime, rc.curve.class_label, rc.curve.auprc
            )?;
            writeln!(f, "# recall precision")?;
            for p in &rc.curve.points {
                writeln!(f, "{} {}", p.recall, p.precision)?;
            }
            f.flush()?;
        }
        std::fs::write(dir.join("summary.txt"), self.summary())?;
        Ok(())
    }
}
