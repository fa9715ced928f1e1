//! K-adjacent Hungarian matching.
//!
//! Each prediction gets a search radius equal to the mean distance to its k
//! nearest ground-truth points. Pairs inside the radius are weighted by a
//! Gaussian of their distance, the weight matrix is solved as a maximum-weight
//! assignment, and pairs that fall outside the radius are stripped afterwards.

use crate::assignment::{hungarian_solve, CostMatrix};
use crate::geometry::{all_radii, PointSet, RadiusProfile, DEFAULT_K, DEFAULT_RADIUS_FLOOR};
use crate::{Error, Result};

/// Largest smaller-side size the exhaustive oracle accepts.
pub const ORACLE_MAX_SIDE: usize = 10;

/// How the Gaussian width is chosen per prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaPolicy {
    /// Same σ for every prediction.
    Fixed(f64),
    /// σ_i = c · δ_i.
    RadiusScaled(f64),
}

/// What out-of-radius entries look like to the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutOfRadiusMode {
    /// Weight 0: never preferred over an in-radius pair.
    #[default]
    Forbid,
    /// Weight `-D / D_max`: negative, ordered by distance.
    LinearPenalty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub k: usize,
    pub sigma_policy: SigmaPolicy,
    pub radius_floor: f64,
    pub out_of_radius_mode: OutOfRadiusMode,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            sigma_policy: SigmaPolicy::RadiusScaled(0.5),
            radius_floor: DEFAULT_RADIUS_FLOOR,
            out_of_radius_mode: OutOfRadiusMode::Forbid,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidK(0));
        }
        match self.sigma_policy {
            SigmaPolicy::Fixed(s) if !(s > 0.0 && s.is_finite()) => return Err(Error::InvalidSigma(s)),
            SigmaPolicy::RadiusScaled(c) if !(c > 0.0 && c.is_finite()) => {
                return Err(Error::param("sigma scale", format!("must be positive and finite, got {c}")))
            }
            _ => {}
        }
        if !(self.radius_floor > 0.0 && self.radius_floor.is_finite()) {
            return Err(Error::param("radius floor", format!("must be positive and finite, got {}", self.radius_floor)));
        }
        Ok(())
    }

    fn sigma_for(&self, radius: f64) -> f64 {
        match self.sigma_policy {
            SigmaPolicy::Fixed(s) => s,
            SigmaPolicy::RadiusScaled(c) => c * radius,
        }
    }
}

/// `exp(-d² / 2σ²)`.
pub fn gaussian_weight(d: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidSigma(sigma));
    }
    if !d.is_finite() {
        return Err(Error::NonFinite("distance"));
    }
    Ok((-(d * d) / (2.0 * sigma * sigma)).exp())
}

/// Dense `|P| × |G|` weights plus the in-radius mask, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    in_radius: Vec<bool>,
}

impl WeightMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn in_radius(&self, i: usize, j: usize) -> bool {
        self.in_radius[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.in_radius
    }

    /// Costs for the minimizing solver.
    pub fn to_costs(&self) -> CostMatrix {
        CostMatrix::new(self.rows, self.cols, self.values.iter().map(|w| -w).collect())
            .expect("weights are finite")
    }
}

/// In-radius weights are floored at the smallest positive normal so that an
/// underflowing Gaussian is still distinguishable from a forbidden entry.
pub fn build_weight_matrix(
    pred: &PointSet,
    gt: &PointSet,
    radii: &RadiusProfile,
    cfg: &MatchConfig,
) -> Result<WeightMatrix> {
    cfg.validate()?;
    if radii.len() != pred.len() {
        return Err(Error::LengthMismatch { left: radii.len(), right: pred.len() });
    }
    let (rows, cols) = (pred.len(), gt.len());
    let mut values = Vec::with_capacity(rows * cols);
    let mut in_radius = Vec::with_capacity(rows * cols);
    let mut max_dist = 0.0f64;
    for (p, &radius) in pred.iter().zip(&radii.radii) {
        let sigma = cfg.sigma_for(radius);
        let two_var = 2.0 * sigma * sigma;
        for g in gt {
            let d2 = p.dist_sq(g);
            let d = d2.sqrt();
            max_dist = max_dist.max(d);
            if d <= radius {
                values.push((-d2 / two_var).exp().max(f64::MIN_POSITIVE));
                in_radius.push(true);
            } else {
                // placeholder distance, resolved below for LinearPenalty
                values.push(d);
                in_radius.push(false);
            }
        }
    }
    for (v, &inside) in values.iter_mut().zip(&in_radius) {
        if !inside {
            *v = match cfg.out_of_radius_mode {
                OutOfRadiusMode::Forbid => 0.0,
                OutOfRadiusMode::LinearPenalty => -*v / max_dist,
            };
        }
    }
    Ok(WeightMatrix { rows, cols, values, in_radius })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub pred: usize,
    pub gt: usize,
    pub distance: f64,
    pub weight: f64,
}

/// Pairs sorted by prediction index; unmatched indices ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
    pub total_weight: f64,
}

impl MatchResult {
    fn unmatched(n_pred: usize, n_gt: usize) -> Self {
        Self {
            pairs: Vec::new(),
            unmatched_pred: (0..n_pred).collect(),
            unmatched_gt: (0..n_gt).collect(),
            total_weight: 0.0,
        }
    }

    fn from_pairs(pred: &PointSet, gt: &PointSet, w: &WeightMatrix, raw: &[(usize, usize)]) -> Self {
        let mut pred_used = vec![false; pred.len()];
        let mut gt_used = vec![false; gt.len()];
        let mut pairs = Vec::with_capacity(raw.len());
        for &(i, j) in raw {
            if !w.in_radius(i, j) {
                continue;
            }
            pred_used[i] = true;
            gt_used[j] = true;
            pairs.push(MatchedPair {
                pred: i,
                gt: j,
                distance: pred.points()[i].dist(&gt.points()[j]),
                weight: w.value(i, j),
            });
        }
        pairs.sort_by_key(|p| p.pred);
        let total_weight = pairs.iter().map(|p| p.weight).sum();
        Self {
            pairs,
            unmatched_pred: (0..pred.len()).filter(|&i| !pred_used[i]).collect(),
            unmatched_gt: (0..gt.len()).filter(|&j| !gt_used[j]).collect(),
            total_weight,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Full pipeline: adaptive radii, Gaussian weights, Hungarian assignment,
/// then removal of out-of-radius pairs. Either set may be empty.
pub fn khm_match(pred: &PointSet, gt: &PointSet, cfg: &MatchConfig) -> Result<MatchResult> {
    cfg.validate()?;
    if pred.is_empty() || gt.is_empty() {
        return Ok(MatchResult::unmatched(pred.len(), gt.len()));
    }
    let radii = all_radii(pred, gt, cfg.k, cfg.radius_floor)?;
    match_with_radii(pred, gt, &radii, cfg)
}

/// Matching with caller-supplied radii. With a constant profile this is the
/// classic fixed-threshold matcher.
pub fn match_with_radii(
    pred: &PointSet,
    gt: &PointSet,
    radii: &RadiusProfile,
    cfg: &MatchConfig,
) -> Result<MatchResult> {
    let w = build_weight_matrix(pred, gt, radii, cfg)?;
    if pred.is_empty() || gt.is_empty() {
        return Ok(MatchResult::unmatched(pred.len(), gt.len()));
    }
    let assignment = hungarian_solve(&w.to_costs());
    Ok(MatchResult::from_pairs(pred, gt, &w, &assignment.pairs))
}

/// A radius profile with the same radius for every prediction.
pub fn uniform_radii(n_pred: usize, radius: f64) -> RadiusProfile {
    RadiusProfile { radii: vec![radius; n_pred], k: 0, floor: radius }
}

/// Exhaustive reference matcher for small instances.
///
/// Under `Forbid` it enumerates every injective pairing that uses in-radius
/// pairs only; under `LinearPenalty` every pairing that saturates the smaller
/// side, scored with the penalties, before stripping. Branch-and-bound on row
/// maxima keeps 8×8 instances cheap. Among optima within 1e-12 the
/// lexicographically smallest pair list wins.
pub fn brute_force_match(pred: &PointSet, gt: &PointSet, cfg: &MatchConfig) -> Result<MatchResult> {
    cfg.validate()?;
    let small = pred.len().min(gt.len());
    if small > ORACLE_MAX_SIDE {
        return Err(Error::OracleTooLarge(small));
    }
    if small == 0 {
        return Ok(MatchResult::unmatched(pred.len(), gt.len()));
    }
    let radii = all_radii(pred, gt, cfg.k, cfg.radius_floor)?;
    let w = build_weight_matrix(pred, gt, &radii, cfg)?;

    // enumerate over the smaller side; `at(a, b)` maps back to (pred, gt)
    let swap = pred.len() > gt.len();
    let (n_small, n_large) = if swap { (gt.len(), pred.len()) } else { (pred.len(), gt.len()) };
    let key = |a: usize, b: usize| if swap { (b, a) } else { (a, b) };
    let perfect = cfg.out_of_radius_mode == OutOfRadiusMode::LinearPenalty;
    let allowed = |a: usize, b: usize| {
        let (i, j) = key(a, b);
        perfect || w.in_radius(i, j)
    };
    let weight = |a: usize, b: usize| {
        let (i, j) = key(a, b);
        w.value(i, j)
    };

    let row_best: Vec<f64> = (0..n_small)
        .map(|a| {
            let m = (0..n_large).filter(|&b| allowed(a, b)).map(|b| weight(a, b)).fold(f64::NEG_INFINITY, f64::max);
            if perfect { m } else { m.max(0.0) }
        })
        .collect();
    let mut suffix = vec![0.0; n_small + 1];
    for a in (0..n_small).rev() {
        suffix[a] = suffix[a + 1] + row_best[a];
    }

    struct Search<'s> {
        n_small: usize,
        n_large: usize,
        perfect: bool,
        suffix: &'s [f64],
        allowed: &'s dyn Fn(usize, usize) -> bool,
        weight: &'s dyn Fn(usize, usize) -> f64,
        key: &'s dyn Fn(usize, usize) -> (usize, usize),
        used: Vec<bool>,
        current: Vec<(usize, usize)>,
        best: f64,
        best_pairs: Option<Vec<(usize, usize)>>,
    }

    impl Search<'_> {
        fn canonical(&self) -> Vec<(usize, usize)> {
            let mut p: Vec<_> = self.current.iter().map(|&(a, b)| (self.key)(a, b)).collect();
            p.sort_unstable();
            p
        }

        fn visit(&mut self, a: usize, acc: f64) {
            const TIE: f64 = 1e-12;
            if acc + self.suffix[a] < self.best - TIE {
                return;
            }
            if a == self.n_small {
                let cand = self.canonical();
                let better = acc > self.best + TIE;
                let tied = (acc - self.best).abs() <= TIE;
                if better || (tied && self.best_pairs.as_ref().is_none_or(|b| cand < *b)) {
                    self.best = if better { acc } else { self.best.max(acc) };
                    self.best_pairs = Some(cand);
                }
                return;
            }
            for b in 0..self.n_large {
                if self.used[b] || !(self.allowed)(a, b) {
                    continue;
                }
                self.used[b] = true;
                self.current.push((a, b));
                let wv = (self.weight)(a, b);
                self.visit(a + 1, acc + wv);
                self.current.pop();
                self.used[b] = false;
            }
            if !self.perfect {
                self.visit(a + 1, acc);
            }
        }
    }

    let mut search = Search {
        n_small,
        n_large,
        perfect,
        suffix: &suffix,
        allowed: &allowed,
        weight: &weight,
        key: &key,
        used: vec![false; n_large],
        current: Vec::with_capacity(n_small),
        best: f64::NEG_INFINITY,
        best_pairs: None,
    };
    search.visit(0, 0.0);
    let pairs = search.best_pairs.unwrap_or_default();
    Ok(MatchResult::from_pairs(pred, gt, &w, &pairs))
}
