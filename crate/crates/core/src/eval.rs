//! Official-metric computation and prediction post-processing.
//!
//! The task metric is F1 macro-averaged over FAVOR and AGAINST only; NONE is
//! still predicted (it affects precision of the other classes) but its F1
//! never enters the average. Zero-denominator precision/recall/F1 are
//! defined as 0.

use crate::corpus::Stance;
use crate::error::{Error, Result};
use crate::textprep::contains_target;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub favor: ClassMetrics,
    pub against: ClassMetrics,
    pub none: ClassMetrics,
    pub macro_f1: f64,
}

impl EvalReport {
    pub fn class(&self, stance: Stance) -> &ClassMetrics {
        match stance {
            Stance::Favor => &self.favor,
            Stance::Against => &self.against,
            Stance::None => &self.none,
        }
    }
}

fn prf(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
    }
}

/// One-vs-rest precision/recall/F1 per class; macro over FAVOR and AGAINST.
pub fn per_class_prf(gold: &[Stance], pred: &[Stance]) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::Dim(format!(
            "{} gold labels vs {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let metrics: Vec<ClassMetrics> = crate::corpus::CLASSES
        .iter()
        .map(|&class| {
            let mut tp = 0;
            let mut fp = 0;
            let mut fn_ = 0;
            for (&g, &p) in gold.iter().zip(pred.iter()) {
                match (g == class, p == class) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fn_ += 1,
                    (false, false) => {}
                }
            }
            prf(tp, fp, fn_)
        })
        .collect();
    let report = EvalReport {
        favor: metrics[0],
        against: metrics[1],
        none: metrics[2],
        macro_f1: (metrics[0].f1 + metrics[1].f1) / 2.0,
    };
    Ok(report)
}

/// Applies the target-in-tweet rule: the default label is the argmax over
/// all three classes, but when the tweet contains the target the
/// highest-scoring non-neutral stance is chosen. Argmax ties break by class
/// order FAVOR < AGAINST < NONE.
pub fn postprocess(probs: &[f64], tweet: &str, target: &str, aliases: &[String]) -> Stance {
    let limit = if contains_target(tweet, target, aliases) {
        2 // FAVOR and AGAINST only
    } else {
        3
    };
    let mut best = 0;
    for i in 1..limit {
        if probs[i] > probs[best] {
            best = i;
        }
    }
    Stance::from_index(best).expect("index < 3")
}

/// Rounds half-up to four decimals (for non-negative metric values).
pub fn round4(v: f64) -> f64 {
    (v * 10_000.0 + 0.5).floor() / 10_000.0
}

/// Formats reports the way the task result tables are laid out: one
/// FAVOR/AGAINST/Macro row group per method, columns Method, Stance, P, R,
/// F1, values rounded half-up to four decimals.
pub fn report_table(rows: &[(String, EvalReport)]) -> String {
    let method_width = rows
        .iter()
        .map(|(m, _)| m.len())
        .chain(std::iter::once("Method".len()))
        .max()
        .unwrap_or(6)
        + 2;
    let mut out = String::new();
    out.push_str(&format!(
        "{:<method_width$}{:<9}{:<8}{:<8}{:<8}\n",
        "Method", "Stance", "P", "R", "F1"
    ));
    for (method, report) in rows {
        for (stance, metrics) in [
            (Stance::Favor, report.favor),
            (Stance::Against, report.against),
        ] {
            let name = if stance == Stance::Favor { method.as_str() } else { "" };
            out.push_str(&format!(
                "{:<method_width$}{:<9}{:<8.4}{:<8.4}{:<8.4}\n",
                name,
                stance.as_str(),
                round4(metrics.precision),
                round4(metrics.recall),
                round4(metrics.f1),
            ));
        }
        out.push_str(&format!(
            "{:<method_width$}{:<9}{:<8}{:<8}{:<8.4}\n",
            "",
            "Macro",
            "",
            "",
            round4(report.macro_f1),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent confusion-matrix oracle.
    fn prf_oracle(gold: &[Stance], pred: &[Stance]) -> EvalReport {
        let mut confusion = [[0usize; 3]; 3]; // [gold][pred]
        for (g, p) in gold.iter().zip(pred.iter()) {
            confusion[g.index()][p.index()] += 1;
        }
        let class = |c: usize| {
            let tp = confusion[c][c];
            let pred_c: usize = (0..3).map(|g| confusion[g][c]).sum();
            let gold_c: usize = (0..3).map(|p| confusion[c][p]).sum();
            let p = if pred_c == 0 { 0.0 } else { tp as f64 / pred_c as f64 };
            let r = if gold_c == 0 { 0.0 } else { tp as f64 / gold_c as f64 };
            let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            ClassMetrics {
                precision: p,
                recall: r,
                f1,
            }
        };
        let (favor, against, none) = (class(0), class(1), class(2));
        EvalReport {
            favor,
            against,
            none,
            macro_f1: (favor.f1 + against.f1) / 2.0,
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn perfect_predictions_are_all_ones() {
        let gold = vec![Stance::Favor, Stance::Against, Stance::None, Stance::Favor];
        let report = per_class_prf(&gold, &gold).unwrap();
        for c in [report.favor, report.against, report.none] {
            assert_eq!(c.precision, 1.0);
            assert_eq!(c.recall, 1.0);
            assert_eq!(c.f1, 1.0);
        }
        assert_eq!(report.macro_f1, 1.0);
    }

    #[test]
    fn majority_baseline_on_task_counts() {
        // gold: 148 FAVOR / 299 AGAINST / 260 NONE, all-AGAINST predictions
        let mut gold = Vec::new();
        gold.extend(std::iter::repeat(Stance::Favor).take(148));
        gold.extend(std::iter::repeat(Stance::Against).take(299));
        gold.extend(std::iter::repeat(Stance::None).take(260));
        let pred = vec![Stance::Against; 707];
        let report = per_class_prf(&gold, &pred).unwrap();
        assert!((report.against.f1 - 0.5944).abs() <= 1e-4, "{}", report.against.f1);
        assert_eq!(report.favor.f1, 0.0);
        assert!((report.macro_f1 - 0.2972).abs() <= 1e-4, "{}", report.macro_f1);
    }

    #[test]
    fn hand_confusion_matrix_case() {
        let gold = vec![Stance::Favor, Stance::Against, Stance::Against];
        let pred = vec![Stance::Favor, Stance::Favor, Stance::Against];
        let report = per_class_prf(&gold, &pred).unwrap();
        assert!(close(report.favor.precision, 0.5));
        assert!(close(report.favor.recall, 1.0));
        assert!(close(report.favor.f1, 2.0 / 3.0));
        assert!(close(report.against.precision, 1.0));
        assert!(close(report.against.recall, 0.5));
        assert!(close(report.against.f1, 2.0 / 3.0));
        assert!(close(report.macro_f1, 2.0 / 3.0));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(per_class_prf(&[Stance::Favor], &[]).is_err());
    }

    #[test]
    fn zero_denominator_conventions() {
        // NONE never predicted and absent from gold
        let gold = vec![Stance::Favor, Stance::Against];
        let pred = vec![Stance::Against, Stance::Favor];
        let report = per_class_prf(&gold, &pred).unwrap();
        assert_eq!(report.none.precision, 0.0);
        assert_eq!(report.none.recall, 0.0);
        assert_eq!(report.none.f1, 0.0);
        assert_eq!(report.macro_f1, 0.0);
    }

    #[test]
    fn exhaustive_small_lengths_match_oracle() {
        for len in 1..=3usize {
            let total = 3usize.pow(len as u32);
            for gi in 0..total {
                for pi in 0..total {
                    let decode = |mut v: usize| {
                        (0..len)
                            .map(|_| {
                                let s = Stance::from_index(v % 3).unwrap();
                                v /= 3;
                                s
                            })
                            .collect::<Vec<_>>()
                    };
                    let gold = decode(gi);
                    let pred = decode(pi);
                    let got = per_class_prf(&gold, &pred).unwrap();
                    let want = prf_oracle(&gold, &pred);
                    assert_eq!(got, want, "gold {gold:?} pred {pred:?}");
                }
            }
        }
    }

    #[test]
    fn postprocess_rule_cases() {
        let aliases: Vec<String> = vec![];
        // target contained: highest-scoring non-neutral
        assert_eq!(
            postprocess(&[0.2, 0.3, 0.5], "all about trump here", "trump", &aliases),
            Stance::Against
        );
        // target absent: plain argmax
        assert_eq!(
            postprocess(&[0.2, 0.3, 0.5], "nothing relevant", "trump", &aliases),
            Stance::None
        );
        // already non-neutral: unchanged
        assert_eq!(
            postprocess(&[0.6, 0.3, 0.1], "all about trump here", "trump", &aliases),
            Stance::Favor
        );
    }

    #[test]
    fn postprocess_tie_breaks_by_class_order() {
        let aliases: Vec<String> = vec![];
        assert_eq!(
            postprocess(&[0.4, 0.4, 0.2], "x", "t", &aliases),
            Stance::Favor
        );
        assert_eq!(
            postprocess(&[0.3, 0.3, 0.4], "has t inside", "t", &aliases),
            Stance::Favor
        );
    }

    #[test]
    fn postprocess_never_yields_none_when_target_present() {
        let aliases: Vec<String> = vec![];
        let probs = [0.01, 0.02, 0.97];
        assert_eq!(
            postprocess(&probs, "the target is here", "target", &aliases),
            Stance::Against
        );
    }

    #[test]
    fn macro_ignores_none_f1() {
        // moving NONE<->NONE mistakes around must not change macro as long
        // as FAVOR/AGAINST cells are untouched
        let gold = vec![Stance::None, Stance::None, Stance::Favor, Stance::Against];
        let pred_a = vec![Stance::None, Stance::None, Stance::Favor, Stance::Against];
        let mut pred_b = pred_a.clone();
        pred_b[0] = Stance::None; // unchanged
        let ra = per_class_prf(&gold, &pred_a).unwrap();
        let rb = per_class_prf(&gold, &pred_b).unwrap();
        assert_eq!(ra.macro_f1, rb.macro_f1);
    }

    #[test]
    fn report_table_layout() {
        let report = EvalReport {
            favor: ClassMetrics { precision: 0.30325, recall: 0.5470, f1: 0.39015 },
            against: ClassMetrics { precision: 0.6788, recall: 0.5216, f1: 0.5899 },
            none: ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0 },
            macro_f1: 0.49005,
        };
        let table = report_table(&[("BiCond".to_string(), report)]);
        let mut lines = table.lines();
        let header = lines.next().unwrap();
        for col in ["Method", "Stance", "P", "R", "F1"] {
            assert!(header.contains(col), "{header}");
        }
        // column order fixed
        assert!(header.find("Method").unwrap() < header.find("Stance").unwrap());
        assert!(header.find("Stance").unwrap() < header.find("P").unwrap());
        let favor_line = lines.next().unwrap();
        // half-up rounding: 0.30325 -> 0.3033, 0.39015 -> 0.3902
        assert!(favor_line.contains("0.3033"), "{favor_line}");
        assert!(favor_line.contains("0.3902"), "{favor_line}");
        let against_line = lines.next().unwrap();
        assert!(against_line.contains("AGAINST"));
        let macro_line = lines.next().unwrap();
        assert!(macro_line.contains("0.4901"), "{macro_line}");
    }

    proptest! {
        #[test]
        fn random_length_eight_matches_oracle(
            gold in proptest::collection::vec(0usize..3, 8),
            pred in proptest::collection::vec(0usize..3, 8),
        ) {
            let gold: Vec<Stance> = gold.into_iter().map(|i| Stance::from_index(i).unwrap()).collect();
            let pred: Vec<Stance> = pred.into_iter().map(|i| Stance::from_index(i).unwrap()).collect();
            let got = per_class_prf(&gold, &pred).unwrap();
            let want = prf_oracle(&gold, &pred);
            prop_assert_eq!(got, want);
        }
    }
}
