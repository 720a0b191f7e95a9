//! Per-class F1 and macro F1 for scan-level predictions.
//!
//! Predictions are read from CSV rows `scan_id,label,prediction` with the
//! labels `covid` and `non-covid`.

use std::io::Read;

use serde::Serialize;

use crate::error::{Error, Result};

/// The two diagnostic classes, in reporting order.
pub const CLASSES: [&str; 2] = ["covid", "non-covid"];

/// Confusion counts of one class against the rest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub class: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ClassCounts {
    pub fn new(class: impl Into<String>, tp: u64, fp: u64, fn_: u64) -> Self {
        Self {
            class: class.into(),
            tp,
            fp,
            fn_,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn support(&self) -> u64 {
        self.tp + self.fn_
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 whenever a denominator is 0.
pub fn f1_score(counts: &ClassCounts) -> f64 {
    let (p, r) = (counts.precision(), counts.recall());
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Unweighted mean of the per-class F1 scores.
pub fn macro_f1(per_class: &[ClassCounts]) -> Result<f64> {
    if per_class.is_empty() {
        return Err(Error::NoClasses);
    }
    Ok(per_class.iter().map(f1_score).sum::<f64>() / per_class.len() as f64)
}

/// One-vs-rest counts for each of `classes` from `(label, prediction)` pairs.
pub fn confusion_counts<'a>(
    classes: &[&str],
    pairs: impl IntoIterator<Item = (&'a str, &'a str)> + Clone,
) -> Vec<ClassCounts> {
    classes
        .iter()
        .map(|&c| {
            let mut counts = ClassCounts::new(c, 0, 0, 0);
            for (label, pred) in pairs.clone() {
                match (label == c, pred == c) {
                    (true, true) => counts.tp += 1,
                    (false, true) => counts.fp += 1,
                    (true, false) => counts.fn_ += 1,
                    (false, false) => {}
                }
            }
            counts
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub scan_id: String,
    pub label: String,
    pub prediction: String,
}

/// Parses a predictions CSV. A `scan_id,label,prediction` header line is
/// optional; line numbers in errors are 1-based.
pub fn read_predictions(input: impl Read) -> Result<Vec<Prediction>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if out.is_empty() && record.iter().eq(["scan_id", "label", "prediction"]) {
            continue;
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                reason: format!(
                    "expected 3 fields (scan_id,label,prediction), found {}",
                    record.len()
                ),
            });
        }
        for field in [&record[1], &record[2]] {
            if !CLASSES.contains(&field) {
                return Err(Error::Parse {
                    line,
                    reason: format!("unknown class {field:?} (expected covid or non-covid)"),
                });
            }
        }
        if record[0].is_empty() {
            return Err(Error::Parse {
                line,
                reason: "empty scan_id".into(),
            });
        }
        out.push(Prediction {
            scan_id: record[0].to_string(),
            label: record[1].to_string(),
            prediction: record[2].to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub per_class: Vec<ClassCounts>,
    pub f1: Vec<f64>,
    pub macro_f1: f64,
}

impl ScoreReport {
    pub fn from_predictions(preds: &[Prediction]) -> Result<Self> {
        let per_class = confusion_counts(
            &CLASSES,
            preds
                .iter()
                .map(|p| (p.label.as_str(), p.prediction.as_str())),
        );
        let f1 = per_class.iter().map(f1_score).collect();
        let macro_f1 = macro_f1(&per_class)?;
        Ok(Self {
            per_class,
            f1,
            macro_f1,
        })
    }

    /// Fixed-point text table with four decimals.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{:<10} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}\n",
            "class", "tp", "fp", "fn", "precision", "recall", "f1"
        );
        for (c, f1) in self.per_class.iter().zip(&self.f1) {
            s += &format!(
                "{:<10} {:>6} {:>6} {:>6} {:>9.4} {:>9.4} {:>9.4}\n",
                c.class,
                c.tp,
                c.fp,
                c.fn_,
                c.precision(),
                c.recall(),
                f1
            );
        }
        s += &format!("macro-f1 {:.4}\n", self.macro_f1);
        s
    }
}
