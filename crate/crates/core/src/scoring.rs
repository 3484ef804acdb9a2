//! Essay-level correctness feature and its correlation with gold scores.
//!
//! The feature for an essay is the mean, over every token in the essay, of
//! the model's probability that the token is correct. Each token counts once
//! regardless of sentence length.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::data::read_token_lines;
use crate::error::{Error, Result};
use crate::eval::{pearson, spearman};
use crate::layers::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct EssayRecord {
    pub id: String,
    pub sentences: Vec<Vec<String>>,
    pub gold_score: f64,
    /// Set by [`extract_features`].
    pub feature: Option<f64>,
}

impl EssayRecord {
    pub fn new(id: impl Into<String>, sentences: Vec<Vec<String>>, gold_score: f64) -> Self {
        EssayRecord {
            id: id.into(),
            sentences,
            gold_score,
            feature: None,
        }
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }
}

/// Token-weighted mean of P(correct) over the essay.
pub fn extract_feature(model: &Model, essay: &EssayRecord) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in essay.sentences.iter().filter(|s| !s.is_empty()) {
        let probs = model.prob_incorrect(&model.encode(s))?;
        sum += probs.iter().map(|p| 1.0 - p).sum::<f64>();
        n += probs.len();
    }
    if n == 0 {
        return Err(Error::Contract(format!("essay {} has no tokens", essay.id)));
    }
    Ok((sum / n as f64).clamp(0.0, 1.0))
}

/// Fills in the feature of every essay.
pub fn extract_features(model: &Model, essays: &mut [EssayRecord]) -> Result<()> {
    let feats: Vec<Result<f64>> = essays.par_iter().map(|e| extract_feature(model, e)).collect();
    for (e, f) in essays.iter_mut().zip(feats) {
        e.feature = Some(f?);
    }
    Ok(())
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::Contract("least squares needs equal nonzero lengths".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("feature is constant on the training split".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Essays used for fitting when no split is given: the first 80% in file
/// order.
pub fn default_split(n: usize) -> usize {
    n * 4 / 5
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredEssay {
    pub id: String,
    pub feature: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub slope: f64,
    pub intercept: f64,
    pub pearson: f64,
    pub spearman: f64,
    /// Every essay, both splits, in input order.
    pub scored: Vec<ScoredEssay>,
}

/// Fits a linear scorer on `essays[..split]` and correlates its predictions
/// with gold scores on `essays[split..]`.
pub fn fit_and_correlate(essays: &[EssayRecord], split: usize) -> Result<CorrelationReport> {
    if split < 3 || essays.len().saturating_sub(split) < 3 {
        return Err(Error::Data(format!(
            "need at least 3 essays in each split, got {} and {}",
            split.min(essays.len()),
            essays.len().saturating_sub(split)
        )));
    }
    let feats = essays
        .iter()
        .map(|e| {
            e.feature
                .ok_or_else(|| Error::Contract(format!("essay {} has no feature", e.id)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let gold: Vec<f64> = essays.iter().map(|e| e.gold_score).collect();
    let (slope, intercept) = least_squares(&feats[..split], &gold[..split])?;
    let predicted: Vec<f64> = feats.iter().map(|f| slope * f + intercept).collect();
    let r = pearson(&predicted[split..], &gold[split..])?;
    let rho = spearman(&predicted[split..], &gold[split..])?;
    let scored = essays
        .iter()
        .zip(feats.iter().zip(&predicted))
        .map(|(e, (&feature, &predicted))| ScoredEssay {
            id: e.id.clone(),
            feature,
            predicted,
        })
        .collect();
    Ok(CorrelationReport {
        slope,
        intercept,
        pearson: r,
        spearman: rho,
        scored,
    })
}

/// Reads `essay_id<TAB>gold_score` lines (an optional header line whose score
/// column is not numeric is skipped) and loads `<dir>/<essay_id>.txt`, one
/// whitespace-tokenized sentence per line.
pub fn read_essays(index: &Path, dir: &Path) -> Result<Vec<EssayRecord>> {
    let text = fs::read_to_string(index)?;
    let mut essays = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::parse(index, i + 1, "expected essay_id<TAB>gold_score"));
        }
        let score = match fields[1].trim().parse::<f64>() {
            Ok(s) if s.is_finite() => s,
            _ if i == 0 => continue,
            _ => {
                return Err(Error::parse(
                    index,
                    i + 1,
                    format!("bad score {:?}", fields[1]),
                ))
            }
        };
        let id = fields[0].trim();
        let sentences = read_token_lines(&dir.join(format!("{id}.txt")))?;
        essays.push(EssayRecord::new(id, sentences, score));
    }
    Ok(essays)
}

/// CSV `essay_id,feature,predicted_score`.
pub fn scores_csv(scored: &[ScoredEssay]) -> String {
    let mut out = String::from("essay_id,feature,predicted_score\n");
    for s in scored {
        let _ = writeln!(out, "{},{},{}", s.id, s.feature, s.predicted);
    }
    out
}
