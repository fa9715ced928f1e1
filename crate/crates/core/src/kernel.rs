//! Anisotropic Gaussian kernels with per-location centre offsets.
//!
//! A kernel of odd side `size` is sampled at integer offsets `(u, v)` from its
//! centre pixel, `u` along columns and `v` along rows (y grows downwards):
//!
//! ```text
//! K(u, v) = 1 / (2π σx σy) · exp(-(u - Δx)² / 2σx² - (v - Δy)² / 2σy²)
//! σx = sx · σ,  σy = sy · σ
//! ```

use crate::rng::SeededRng;
use crate::{Error, Result};
use std::f64::consts::PI;

pub const SIGMA_MIN: f64 = 1.0;
pub const SIGMA_MAX: f64 = 10.0;
pub const OFFSET_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub sigma: f64,
    pub dx: f64,
    pub dy: f64,
    pub sx: f64,
    pub sy: f64,
}

impl KernelParams {
    pub fn new(sigma: f64, dx: f64, dy: f64, sx: f64, sy: f64) -> Result<Self> {
        let p = Self { sigma, dx, dy, sx, sy };
        p.validate()?;
        Ok(p)
    }

    pub fn isotropic(sigma: f64) -> Result<Self> {
        Self::new(sigma, 0.0, 0.0, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.sigma, self.dx, self.dy, self.sx, self.sy];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel parameters"));
        }
        if !(SIGMA_MIN..=SIGMA_MAX).contains(&self.sigma) {
            return Err(Error::param("sigma", format!("{} outside [1, 10]", self.sigma)));
        }
        if self.dx.abs() > OFFSET_MAX || self.dy.abs() > OFFSET_MAX {
            return Err(Error::param("offset", format!("({}, {}) outside [-2, 2]", self.dx, self.dy)));
        }
        if !(self.sx > 0.0 && self.sy > 0.0) {
            return Err(Error::param("axial scale", format!("({}, {}) must be positive", self.sx, self.sy)));
        }
        Ok(())
    }

    pub fn sigma_x(&self) -> f64 {
        self.sx * self.sigma
    }

    pub fn sigma_y(&self) -> f64 {
        self.sy * self.sigma
    }

    /// Continuous kernel value at offset `(u, v)`. No range checks.
    #[inline]
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let (sxg, syg) = (self.sigma_x(), self.sigma_y());
        let a = (u - self.dx) / sxg;
        let b = (v - self.dy) / syg;
        (-0.5 * (a * a + b * b)).exp() / (2.0 * PI * sxg * syg)
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Map five unconstrained reals onto the kernel parameter ranges:
/// `σ = 1 + 9·logistic(r0)`, `Δx = 2·tanh(r1)`, `Δy = 2·tanh(r2)`,
/// `sx = exp(r3)`, `sy = exp(r4)`.
///
/// Saturation at extreme inputs can land exactly on a range endpoint in
/// floating point; the mapping is otherwise strictly inside.
pub fn squash_params(raw: [f64; 5]) -> Result<KernelParams> {
    if raw.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("raw kernel parameters"));
    }
    Ok(KernelParams {
        sigma: SIGMA_MIN + (SIGMA_MAX - SIGMA_MIN) * logistic(raw[0]),
        dx: OFFSET_MAX * raw[1].tanh(),
        dy: OFFSET_MAX * raw[2].tanh(),
        sx: raw[3].exp(),
        sy: raw[4].exp(),
    })
}

/// Inverse of [`squash_params`] on the open ranges.
pub fn unsquash_params(p: &KernelParams) -> Result<[f64; 5]> {
    let open = p.sigma > SIGMA_MIN
        && p.sigma < SIGMA_MAX
        && p.dx.abs() < OFFSET_MAX
        && p.dy.abs() < OFFSET_MAX
        && p.sx > 0.0
        && p.sy > 0.0;
    if !open {
        return Err(Error::param("kernel parameters", "not inside the open ranges"));
    }
    let s = (p.sigma - SIGMA_MIN) / (SIGMA_MAX - SIGMA_MIN);
    Ok([
        (s / (1.0 - s)).ln(),
        (p.dx / OFFSET_MAX).atanh(),
        (p.dy / OFFSET_MAX).atanh(),
        p.sx.ln(),
        p.sy.ln(),
    ])
}

/// `d(squashed)/d(raw)` for each of the five coordinates.
pub fn squash_derivatives(raw: [f64; 5]) -> [f64; 5] {
    let s = logistic(raw[0]);
    let t1 = raw[1].tanh();
    let t2 = raw[2].tanh();
    [
        (SIGMA_MAX - SIGMA_MIN) * s * (1.0 - s),
        OFFSET_MAX * (1.0 - t1 * t1),
        OFFSET_MAX * (1.0 - t2 * t2),
        raw[3].exp(),
        raw[4].exp(),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// The closed-form values as sampled.
    #[default]
    Raw,
    /// Divided by their discrete sum.
    UnitSum,
}

pub fn check_size(size: usize) -> Result<()> {
    if size >= 3 && size % 2 == 1 {
        Ok(())
    } else {
        Err(Error::InvalidKernelSize(size))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    values: Vec<f64>,
    pub params: KernelParams,
}

impl Kernel {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> isize {
        (self.size / 2) as isize
    }

    /// Row-major: `values[(v + r) * size + (u + r)]`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at offset `(u, v)` from the centre.
    pub fn at(&self, u: isize, v: isize) -> f64 {
        let r = self.radius();
        self.values[((v + r) as usize) * self.size + (u + r) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn sample_grid(size: usize, mut f: impl FnMut(f64, f64) -> f64) -> Vec<f64> {
    let r = (size / 2) as isize;
    let mut out = Vec::with_capacity(size * size);
    for v in -r..=r {
        for u in -r..=r {
            out.push(f(u as f64, v as f64));
        }
    }
    out
}

pub fn synthesize_kernel(params: &KernelParams, size: usize, norm: Normalization) -> Result<Kernel> {
    params.validate()?;
    check_size(size)?;
    let mut values = sample_grid(size, |u, v| params.eval(u, v));
    if norm == Normalization::UnitSum {
        let s: f64 = values.iter().sum();
        values.iter_mut().for_each(|x| *x /= s);
    }
    Ok(Kernel { size, values, params: *params })
}

/// Partial derivatives of the raw (unnormalized) kernel, same layout as
/// [`Kernel::values`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGradients {
    pub size: usize,
    pub d_sigma: Vec<f64>,
    pub d_dx: Vec<f64>,
    pub d_dy: Vec<f64>,
    pub d_sx: Vec<f64>,
    pub d_sy: Vec<f64>,
}

impl KernelGradients {
    pub const NAMES: [&'static str; 5] = ["sigma", "dx", "dy", "sx", "sy"];

    pub fn grids(&self) -> [&[f64]; 5] {
        [&self.d_sigma, &self.d_dx, &self.d_dy, &self.d_sx, &self.d_sy]
    }

    fn grids_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [&mut self.d_sigma, &mut self.d_dx, &mut self.d_dy, &mut self.d_sx, &mut self.d_sy]
    }
}

pub fn kernel_gradients(params: &KernelParams, size: usize) -> Result<KernelGradients> {
    params.validate()?;
    check_size(size)?;
    let n = size * size;
    let mut g = KernelGradients {
        size,
        d_sigma: Vec::with_capacity(n),
        d_dx: Vec::with_capacity(n),
        d_dy: Vec::with_capacity(n),
        d_sx: Vec::with_capacity(n),
        d_sy: Vec::with_capacity(n),
    };
    let (sxg, syg) = (params.sigma_x(), params.sigma_y());
    let r = (size / 2) as isize;
    for v in -r..=r {
        for u in -r..=r {
            let (u, v) = (u as f64, v as f64);
            let k = params.eval(u, v);
            let ex = u - params.dx;
            let ey = v - params.dy;
            // dK/dσx and dK/dσy
            let k_sx = k * (ex * ex / (sxg * sxg * sxg) - 1.0 / sxg);
            let k_sy = k * (ey * ey / (syg * syg * syg) - 1.0 / syg);
            g.d_dx.push(k * ex / (sxg * sxg));
            g.d_dy.push(k * ey / (syg * syg));
            g.d_sigma.push(k_sx * params.sx + k_sy * params.sy);
            g.d_sx.push(k_sx * params.sigma);
            g.d_sy.push(k_sy * params.sigma);
        }
    }
    Ok(g)
}

/// Gradients with respect to the unconstrained inputs of [`squash_params`].
pub fn kernel_gradients_raw(raw: [f64; 5], size: usize) -> Result<KernelGradients> {
    let params = squash_params(raw)?;
    let mut g = kernel_gradients(&params, size)?;
    let jac = squash_derivatives(raw);
    for (grid, d) in g.grids_mut().into_iter().zip(jac) {
        grid.iter_mut().for_each(|x| *x *= d);
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub trials: usize,
    pub size: usize,
    pub epsilon: f64,
    pub tolerance: f64,
    /// Entries whose kernel value is at or below this are skipped.
    pub min_value: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { trials: 50, size: 9, epsilon: 1e-5, tolerance: 1e-4, min_value: 1e-12, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckWorst {
    pub trial: usize,
    pub param: &'static str,
    pub u: isize,
    pub v: isize,
    pub analytic: f64,
    pub numeric: f64,
    pub params: KernelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Worst relative error per parameter, in [`KernelGradients::NAMES`] order.
    pub max_rel_error: [f64; 5],
    pub worst: Option<GradCheckWorst>,
    pub entries_checked: usize,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn overall(&self) -> f64 {
        self.max_rel_error.iter().copied().fold(0.0, f64::max)
    }
}

/// Random parameters drawn uniformly from σ ∈ [1, 10], Δ ∈ [-2, 2] and
/// axial scales in [0.5, 2].
pub fn random_params(rng: &mut SeededRng) -> KernelParams {
    KernelParams {
        sigma: rng.range(SIGMA_MIN, SIGMA_MAX),
        dx: rng.range(-OFFSET_MAX, OFFSET_MAX),
        dy: rng.range(-OFFSET_MAX, OFFSET_MAX),
        sx: rng.range(0.5, 2.0),
        sy: rng.range(0.5, 2.0),
    }
}

/// Central-difference check of [`kernel_gradients`].
pub fn run_gradcheck(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    run_gradcheck_with(cfg, kernel_gradients)
}

/// Central-difference check of an arbitrary gradient routine.
///
/// Relative error is `|a - n| / max(|a|, |n|)`, taken as zero when both are
/// exactly zero.
pub fn run_gradcheck_with<F>(cfg: &GradCheckConfig, gradients: F) -> Result<GradCheckReport>
where
    F: Fn(&KernelParams, usize) -> Result<KernelGradients>,
{
    if cfg.trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    check_size(cfg.size)?;
    if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
        return Err(Error::param("epsilon", "must be positive"));
    }
    let mut rng = SeededRng::new(cfg.seed);
    let mut max_rel = [0.0f64; 5];
    let mut worst: Option<(f64, GradCheckWorst)> = None;
    let mut checked = 0;
    let r = (cfg.size / 2) as isize;
    for trial in 0..cfg.trials {
        let p = random_params(&mut rng);
        let g = gradients(&p, cfg.size)?;
        for (pi, grid) in g.grids().into_iter().enumerate() {
            let bump = |h: f64| {
                let mut q = p;
                match pi {
                    0 => q.sigma += h,
                    1 => q.dx += h,
                    2 => q.dy += h,
                    3 => q.sx += h,
                    _ => q.sy += h,
                }
                q
            };
            let (plus, minus) = (bump(cfg.epsilon), bump(-cfg.epsilon));
            for (idx, &analytic) in grid.iter().enumerate() {
                let u = (idx % cfg.size) as isize - r;
                let v = (idx / cfg.size) as isize - r;
                let (uf, vf) = (u as f64, v as f64);
                if p.eval(uf, vf).abs() <= cfg.min_value {
                    continue;
                }
                checked += 1;
                let numeric = (plus.eval(uf, vf) - minus.eval(uf, vf)) / (2.0 * cfg.epsilon);
                let denom = analytic.abs().max(numeric.abs());
                let rel = if denom == 0.0 { 0.0 } else { (analytic - numeric).abs() / denom };
                let rel = if rel.is_nan() { f64::INFINITY } else { rel };
                max_rel[pi] = max_rel[pi].max(rel);
                if worst.as_ref().is_none_or(|(w, _)| rel > *w) {
                    let name = KernelGradients::NAMES[pi];
                    worst = Some((rel, GradCheckWorst { trial, param: name, u, v, analytic, numeric, params: p }));
                }
            }
        }
    }
    let overall = max_rel.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        worst: worst.map(|(_, w)| w),
        entries_checked: checked,
        passed: overall <= cfg.tolerance,
    })
}
