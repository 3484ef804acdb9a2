//! Detection metrics and correlation statistics.
//!
//! Precision, recall and F-scores are reported as percentages in [0, 100].
//! Any ratio with a zero denominator is defined as 0.

mod report;

pub use report::{format_csv, format_table, ReportRow};

use crate::data::{LabeledSentence, INCORRECT};
use crate::error::{Error, Result};

/// Weighted harmonic mean of precision and recall, both in percent.
pub fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * p + r;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / denom
    }
}

fn percent(num: usize, denom: usize) -> f64 {
    if denom == 0 {
        0.0
    } else {
        100.0 * num as f64 / denom as f64
    }
}

/// Token counts behind a precision/recall figure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DetectionCounts {
    /// Tokens the system labeled incorrect.
    pub predicted: usize,
    /// Tokens the reference labels incorrect.
    pub gold: usize,
    /// Tokens labeled incorrect by both.
    pub correct: usize,
}

impl DetectionCounts {
    pub fn new(predicted: usize, gold: usize, correct: usize) -> Result<Self> {
        if correct > predicted.min(gold) {
            return Err(Error::Contract(format!(
                "correct={correct} exceeds predicted={predicted} or gold={gold}"
            )));
        }
        Ok(DetectionCounts {
            predicted,
            gold,
            correct,
        })
    }

    pub fn precision(&self) -> f64 {
        percent(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        percent(self.correct, self.gold)
    }

    pub fn f_beta(&self, beta: f64) -> f64 {
        f_beta(self.precision(), self.recall(), beta)
    }

    pub fn f05(&self) -> f64 {
        self.f_beta(0.5)
    }

    /// Adds one sentence's labels.
    pub fn add_sentence(&mut self, system: &[u8], reference: &[u8]) {
        for (&s, &r) in system.iter().zip(reference) {
            let (s, r) = (s == INCORRECT, r == INCORRECT);
            self.predicted += s as usize;
            self.gold += r as usize;
            self.correct += (s && r) as usize;
        }
    }

    pub fn merge(&mut self, other: &DetectionCounts) {
        self.predicted += other.predicted;
        self.gold += other.gold;
        self.correct += other.correct;
    }
}

/// Micro-averaged token counts over sentence-aligned streams.
pub fn detection_eval(
    system: &[LabeledSentence],
    reference: &[LabeledSentence],
) -> Result<DetectionCounts> {
    if system.len() != reference.len() {
        return Err(Error::Alignment {
            sentence: system.len().min(reference.len()),
            message: format!(
                "system has {} sentences, reference has {}",
                system.len(),
                reference.len()
            ),
        });
    }
    let mut counts = DetectionCounts::default();
    for (i, (s, r)) in system.iter().zip(reference).enumerate() {
        if s.len() != r.len() {
            return Err(Error::Alignment {
                sentence: i,
                message: format!("system has {} tokens, reference has {}", s.len(), r.len()),
            });
        }
        counts.add_sentence(&s.labels, &r.labels);
    }
    Ok(counts)
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::Contract(format!(
            "correlation needs equal nonzero lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("an input is constant".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of their positions.
pub fn fractional_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Rank correlation: Pearson on fractional ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    pearson(&fractional_ranks(xs), &fractional_ranks(ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(labels: &[u8]) -> LabeledSentence {
        let toks = (0..labels.len()).map(|i| format!("w{i}")).collect();
        LabeledSentence::new(toks, labels.to_vec()).unwrap()
    }

    #[test]
    fn f_beta_cases() {
        assert!((f_beta(56.5, 8.2, 0.5) - 25.9).abs() <= 0.05);
        assert!((f_beta(42.9, 60.2, 0.5) - 45.5).abs() <= 0.05);
        for x in [0.0, 13.7, 50.0, 100.0] {
            for beta in [0.5, 1.0, 2.0] {
                assert!((f_beta(x, x, beta) - x).abs() < 1e-12);
            }
        }
        assert_eq!(f_beta(0.0, 0.0, 0.5), 0.0);
    }

    #[test]
    fn identical_streams_score_100() {
        let corpus = vec![sent(&[0, 1, 1]), sent(&[1, 0])];
        let c = detection_eval(&corpus, &corpus).unwrap();
        assert_eq!((c.precision(), c.recall(), c.f05()), (100.0, 100.0, 100.0));
    }

    #[test]
    fn silent_system_scores_zero() {
        let c = detection_eval(&[sent(&[0, 0])], &[sent(&[1, 0])]).unwrap();
        assert_eq!((c.predicted, c.precision(), c.f05()), (0, 0.0, 0.0));
    }

    #[test]
    fn counts_from_annotator_table() {
        let c = DetectionCounts::new(4199, 2992, 1800).unwrap();
        assert!((c.precision() - 42.9).abs() <= 0.05);
        assert!((c.recall() - 60.2).abs() <= 0.05);
        assert!(DetectionCounts::new(3, 5, 4).is_err());
    }

    #[test]
    fn misaligned_streams_name_the_sentence() {
        let sys = vec![sent(&[0]), sent(&[0, 1])];
        let gold = vec![sent(&[0]), sent(&[0, 1, 0])];
        assert!(matches!(
            detection_eval(&sys, &gold),
            Err(Error::Alignment { sentence: 1, .. })
        ));
        assert!(detection_eval(&sys, &gold[..1]).is_err());
    }

    #[test]
    fn correlation_cases() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!((spearman(&xs, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert!(matches!(
            pearson(&xs, &[2.0; 4]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(pearson(&xs, &xs[..3]).is_err());
    }

    #[test]
    fn ties_get_average_rank() {
        assert_eq!(fractional_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }
}
