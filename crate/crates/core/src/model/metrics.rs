use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::context::SesClass;
use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub history: Vec<EpochRecord>,
}

pub fn class_name(classes: usize, i: usize) -> String {
    match (classes, SesClass::from_index(i)) {
        (3, Some(c)) => c.as_str().to_owned(),
        _ => format!("class{i}"),
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision/recall/F1 (0 when undefined) and their unweighted means.
pub fn evaluate(predictions: &[usize], labels: &[usize], classes: usize) -> Result<EvalReport> {
    if predictions.len() != labels.len() {
        return Err(Error::shape(format!("{} predictions for {} labels", predictions.len(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::Empty("nothing to evaluate"));
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if p >= classes || y >= classes {
            return Err(Error::IndexOutOfRange {
                index: p.max(y),
                len: classes,
            });
        }
        confusion[y][p] += 1;
    }
    Ok(report_from_confusion(confusion))
}

pub fn report_from_confusion(confusion: Vec<Vec<usize>>) -> EvalReport {
    let k = confusion.len();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            // harmonic mean of the two ratios, as one correctly rounded division
            let f1 = ratio(2 * tp, support + predicted);
            ClassMetrics {
                class: class_name(k, c),
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    let n: usize = confusion.iter().flatten().sum();
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    EvalReport {
        n,
        accuracy: ratio(correct, n),
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        per_class,
        confusion,
        history: Vec::new(),
    }
}

impl EvalReport {
    /// One `key value` pair per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n {}", self.n);
        let _ = writeln!(s, "accuracy {:.6}", self.accuracy);
        for m in &self.per_class {
            let _ = writeln!(s, "precision.{} {:.6}", m.class, m.precision);
            let _ = writeln!(s, "recall.{} {:.6}", m.class, m.recall);
            let _ = writeln!(s, "f1.{} {:.6}", m.class, m.f1);
            let _ = writeln!(s, "support.{} {}", m.class, m.support);
        }
        let _ = writeln!(s, "macro_precision {:.6}", self.macro_precision);
        let _ = writeln!(s, "macro_recall {:.6}", self.macro_recall);
        let _ = writeln!(s, "macro_f1 {:.6}", self.macro_f1);
        for e in &self.history {
            let _ = writeln!(
                s,
                "epoch.{} train_loss={:.6} test_loss={:.6} test_macro_f1={:.6}",
                e.epoch, e.train_loss, e.test_loss, e.test_macro_f1
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rows are true classes, columns predicted classes.
    pub fn confusion_csv(&self) -> String {
        let k = self.confusion.len();
        let mut s = String::from("true\\predicted");
        for c in 0..k {
            let _ = write!(s, ",{}", class_name(k, c));
        }
        s.push('\n');
        for (c, row) in self.confusion.iter().enumerate() {
            s.push_str(&class_name(k, c));
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

/// Uniformly random class per user.
pub fn random_guess_baseline(labels: &[usize], classes: usize, seed: u64) -> Result<EvalReport> {
    let mut rng = rng_for(seed, "random_guess");
    let preds: Vec<usize> = labels.iter().map(|_| rng.random_range(0..classes)).collect();
    evaluate(&preds, labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 2, 2, 1];
        let r = evaluate(&y, &y, 3).unwrap();
        assert_eq!((r.macro_precision, r.macro_recall, r.macro_f1, r.accuracy), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn constant_predictor_on_balanced_data() {
        let y = [0, 0, 1, 1, 2, 2];
        let r = evaluate(&[1; 6], &y, 3).unwrap();
        assert!((r.macro_recall - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_class[0].precision, 0.0);
        assert_eq!(r.confusion[2], vec![0, 2, 0]);
    }

    #[test]
    fn errors() {
        assert!(evaluate(&[], &[], 3).is_err());
        assert!(evaluate(&[0], &[0, 1], 3).is_err());
        assert!(evaluate(&[3], &[0], 3).is_err());
    }

    #[test]
    fn random_guess_examples() {
        let r = random_guess_baseline(&[1], 3, 9).unwrap();
        assert!(r.macro_f1 == 0.0 || r.macro_f1 == 1.0 / 3.0);
        assert!([0.0, 1.0].contains(&r.per_class[1].f1));
        let labels: Vec<usize> = (0..30_000).map(|i| i % 3).collect();
        let r = random_guess_baseline(&labels, 3, 9).unwrap();
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 0.03);
        assert_eq!(r, random_guess_baseline(&labels, 3, 9).unwrap());
    }

    #[test]
    fn text_and_csv() {
        let r = evaluate(&[0, 1, 2, 0], &[0, 1, 1, 2], 3).unwrap();
        let t = r.to_text();
        assert!(t.contains("f1.middle 0.666667\n"));
        assert!(t.lines().all(|l| l.split(' ').count() >= 2));
        assert_eq!(r.confusion_csv(), "true\\predicted,low,middle,high\nlow,1,0,0\nmiddle,0,1,1\nhigh,1,0,0\n");
        let back: EvalReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
