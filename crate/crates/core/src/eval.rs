//! Counting and localization metrics.
//!
//! "MSE" in counting tables conventionally means the root of the mean squared
//! count error; reports carry it as `mse_paper` next to the plain mean
//! squared error `mse_literal` so neither reading is lost.

use crate::khm::MatchResult;
use crate::{Error, Result};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountErrors {
    pub mae: f64,
    /// Root mean squared count error.
    pub mse_paper: f64,
    /// Mean squared count error.
    pub mse_literal: f64,
}

pub fn count_error(pred_counts: &[usize], gt_counts: &[usize]) -> Result<CountErrors> {
    if pred_counts.len() != gt_counts.len() {
        return Err(Error::LengthMismatch { left: pred_counts.len(), right: gt_counts.len() });
    }
    if pred_counts.is_empty() {
        return Err(Error::Empty("count lists"));
    }
    let n = pred_counts.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (&p, &g) in pred_counts.iter().zip(gt_counts) {
        let e = p as f64 - g as f64;
        abs += e.abs();
        sq += e * e;
    }
    let mse_literal = sq / n;
    Ok(CountErrors { mae: abs / n, mse_paper: mse_literal.sqrt(), mse_literal })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub true_positives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Both sides empty scores 1; an empty side against a non-empty one
    /// scores 0.
    pub fn from_counts(tp: usize, n_pred: usize, n_gt: usize) -> Self {
        if n_pred == 0 && n_gt == 0 {
            return Self { true_positives: 0, precision: 1.0, recall: 1.0, f1: 1.0 };
        }
        let ratio = |den: usize| if den == 0 { 0.0 } else { tp as f64 / den as f64 };
        let (precision, recall) = (ratio(n_pred), ratio(n_gt));
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { true_positives: tp, precision, recall, f1 }
    }
}

/// A matched pair is a true positive when its distance is within `tolerance`.
pub fn localization_prf(m: &MatchResult, tolerance: f64) -> Result<Prf> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::param("tolerance", format!("must be positive, got {tolerance}")));
    }
    let tp = m.pairs.iter().filter(|p| p.distance <= tolerance).count();
    let n_pred = m.pairs.len() + m.unmatched_pred.len();
    let n_gt = m.pairs.len() + m.unmatched_gt.len();
    Ok(Prf::from_counts(tp, n_pred, n_gt))
}

/// Per-image input to [`aggregate_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageResult {
    pub id: String,
    pub pred_count: usize,
    pub gt_count: usize,
    pub true_positives: usize,
}

impl ImageResult {
    pub fn from_match(id: impl Into<String>, m: &MatchResult, tolerance: f64) -> Result<Self> {
        let prf = localization_prf(m, tolerance)?;
        Ok(Self {
            id: id.into(),
            pred_count: m.pairs.len() + m.unmatched_pred.len(),
            gt_count: m.pairs.len() + m.unmatched_gt.len(),
            true_positives: prf.true_positives,
        })
    }

    pub fn abs_error(&self) -> usize {
        self.pred_count.abs_diff(self.gt_count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRow {
    pub id: String,
    pub pred_count: usize,
    pub gt_count: usize,
    pub abs_error: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountReport {
    pub per_image: Vec<ImageRow>,
    pub mae: f64,
    pub mse_paper: f64,
    pub mse_literal: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision and recall are micro-averaged over all images.
pub fn aggregate_report(images: &[ImageResult]) -> Result<CountReport> {
    if images.is_empty() {
        return Err(Error::Empty("image results"));
    }
    let pred: Vec<usize> = images.iter().map(|i| i.pred_count).collect();
    let gt: Vec<usize> = images.iter().map(|i| i.gt_count).collect();
    let errs = count_error(&pred, &gt)?;
    let prf = Prf::from_counts(
        images.iter().map(|i| i.true_positives).sum(),
        pred.iter().sum(),
        gt.iter().sum(),
    );
    Ok(CountReport {
        per_image: images
            .iter()
            .map(|i| ImageRow { id: i.id.clone(), pred_count: i.pred_count, gt_count: i.gt_count, abs_error: i.abs_error() })
            .collect(),
        mae: errs.mae,
        mse_paper: errs.mse_paper,
        mse_literal: errs.mse_literal,
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
    })
}

impl CountReport {
    pub fn to_table(&self) -> String {
        let id_w = self.per_image.iter().map(|r| r.id.len()).max().unwrap_or(0).max(5);
        let mut s = String::new();
        let _ = writeln!(s, "{:<id_w$}  {:>8}  {:>8}  {:>8}", "image", "pred", "gt", "abs_err");
        for r in &self.per_image {
            let _ = writeln!(s, "{:<id_w$}  {:>8}  {:>8}  {:>8}", r.id, r.pred_count, r.gt_count, r.abs_error);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "MAE              {:.4}", self.mae);
        let _ = writeln!(s, "MSE (root, RMSE) {:.4}", self.mse_paper);
        let _ = writeln!(s, "MSE (literal)    {:.4}", self.mse_literal);
        let _ = writeln!(s, "precision        {:.4}", self.precision);
        let _ = writeln!(s, "recall           {:.4}", self.recall);
        let _ = writeln!(s, "f1               {:.4}", self.f1);
        s
    }

    /// `key: value` lines; floats use shortest round-trip formatting.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "images: {}", self.per_image.len());
        let _ = writeln!(s, "mae: {}", self.mae);
        let _ = writeln!(s, "mse_paper: {}", self.mse_paper);
        let _ = writeln!(s, "mse_literal: {}", self.mse_literal);
        let _ = writeln!(s, "precision: {}", self.precision);
        let _ = writeln!(s, "recall: {}", self.recall);
        let _ = writeln!(s, "f1: {}", self.f1);
        for (i, r) in self.per_image.iter().enumerate() {
            let _ = writeln!(s, "image.{i}.id: {}", r.id);
            let _ = writeln!(s, "image.{i}.pred: {}", r.pred_count);
            let _ = writeln!(s, "image.{i}.gt: {}", r.gt_count);
            let _ = writeln!(s, "image.{i}.abs_error: {}", r.abs_error);
        }
        s
    }
}
