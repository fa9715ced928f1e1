//! Seeded synthetic scenes across density regimes, and prediction perturbation.
//!
//! Every draw goes through [`SeededRng`](crate::rng::SeededRng), so output is a
//! pure function of the configuration and seed on every platform.

use crate::geometry::{Label, Point, PointSet};
use crate::rng::SeededRng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityProfile {
    /// Independent uniform positions over the whole image.
    Uniform,
    /// Half the points (rounded up) on a square lattice with `spacing_dense`
    /// in the left half of the image, the rest on a lattice with
    /// `spacing_sparse` in the right half. Each lattice gets a random origin.
    TwoCluster { spacing_dense: f64, spacing_sparse: f64 },
    /// Column density rising linearly from the left edge: `x = width·sqrt(u)`.
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub n_points: usize,
    pub density_profile: DensityProfile,
    /// Half-width of the uniform per-coordinate jitter box, in pixels.
    pub jitter: f64,
    pub seed: u64,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("scene size", "width and height must be positive"));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::param("jitter", format!("must be non-negative, got {}", self.jitter)));
        }
        if let DensityProfile::TwoCluster { spacing_dense, spacing_sparse } = self.density_profile {
            if !(spacing_dense > 0.0 && spacing_sparse > 0.0 && spacing_dense.is_finite() && spacing_sparse.is_finite()) {
                return Err(Error::param("spacing", "cluster spacings must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Dense,
    Sparse,
    Background,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub points: PointSet,
    /// Region of each point, aligned with `points`.
    pub regions: Vec<Region>,
}

/// Largest `f64` strictly below `v` for positive `v`.
fn below(v: f64) -> f64 {
    f64::from_bits(v.to_bits() - 1)
}

fn clamp_into(v: f64, lo: f64, hi: f64) -> f64 {
    v.max(lo).min(below(hi))
}

pub fn sample_points(cfg: &SceneConfig) -> Result<PointSet> {
    Ok(sample_scene(cfg)?.points)
}

pub fn sample_scene(cfg: &SceneConfig) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = SeededRng::new(cfg.seed);
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let mut pts = Vec::with_capacity(cfg.n_points);
    let mut regions = Vec::with_capacity(cfg.n_points);
    let jitter = |rng: &mut SeededRng| cfg.jitter * (2.0 * rng.uniform() - 1.0);
    match cfg.density_profile {
        DensityProfile::Uniform | DensityProfile::Gradient => {
            for _ in 0..cfg.n_points {
                let u = rng.uniform();
                let x = if cfg.density_profile == DensityProfile::Gradient { w * u.sqrt() } else { w * u };
                let y = h * rng.uniform();
                let (jx, jy) = (jitter(&mut rng), jitter(&mut rng));
                pts.push(Point { x: clamp_into(x + jx, 0.0, w), y: clamp_into(y + jy, 0.0, h) });
                regions.push(Region::Background);
            }
        }
        DensityProfile::TwoCluster { spacing_dense, spacing_sparse } => {
            let n_dense = cfg.n_points.div_ceil(2);
            let n_sparse = cfg.n_points - n_dense;
            let half = w / 2.0;
            for (n, spacing, lo, region) in
                [(n_dense, spacing_dense, 0.0, Region::Dense), (n_sparse, spacing_sparse, half, Region::Sparse)]
            {
                if n == 0 {
                    continue;
                }
                let cols = (n as f64).sqrt().ceil() as usize;
                let rows = n.div_ceil(cols);
                let (ext_x, ext_y) = ((cols - 1) as f64 * spacing, (rows - 1) as f64 * spacing);
                if ext_x >= half || ext_y >= h {
                    return Err(Error::InfeasiblePacking(format!(
                        "{n} points at spacing {spacing} need {ext_x}x{ext_y} px, region is {half}x{h}"
                    )));
                }
                let x0 = lo + rng.range(0.0, half - ext_x);
                let y0 = rng.range(0.0, h - ext_y);
                for i in 0..n {
                    let (r, c) = (i / cols, i % cols);
                    let (jx, jy) = (jitter(&mut rng), jitter(&mut rng));
                    let x = clamp_into(x0 + c as f64 * spacing + jx, lo, lo + half);
                    let y = clamp_into(y0 + r as f64 * spacing + jy, 0.0, h);
                    pts.push(Point { x, y });
                    regions.push(region);
                }
            }
        }
    }
    Ok(Scene { points: PointSet::new(pts, Label::GroundTruth)?, regions })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbConfig {
    /// Probability that each point is removed.
    pub drop_rate: f64,
    /// Expected spurious points per input point (Poisson).
    pub spurious_rate: f64,
    /// Std-dev of the isotropic Gaussian position noise.
    pub noise_sigma: f64,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.drop_rate) {
            return Err(Error::param("drop rate", format!("{} outside [0, 1]", self.drop_rate)));
        }
        if !(self.spurious_rate >= 0.0 && self.spurious_rate.is_finite()) {
            return Err(Error::param("spurious rate", "must be non-negative"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::param("noise sigma", "must be non-negative"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("bounds", "width and height must be positive"));
        }
        Ok(())
    }
}

/// Perturbed points with provenance: `source[i]` is the input index a point
/// came from, `None` for spurious points.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    pub points: PointSet,
    pub source: Vec<Option<usize>>,
}

/// Per input point, in order: one uniform for the drop decision, then two
/// normals for the noise (drawn even when the point is dropped). Then a
/// Poisson count of spurious points, each two uniforms.
pub fn perturb_with_sources(points: &PointSet, cfg: &PerturbConfig) -> Result<Perturbed> {
    cfg.validate()?;
    let mut rng = SeededRng::new(cfg.seed);
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let mut out = Vec::with_capacity(points.len());
    let mut source = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let dropped = rng.bernoulli(cfg.drop_rate);
        let (nx, ny) = (rng.normal(), rng.normal());
        if dropped {
            continue;
        }
        if cfg.noise_sigma == 0.0 {
            out.push(*p);
        } else {
            out.push(Point {
                x: clamp_into(p.x + cfg.noise_sigma * nx, 0.0, w),
                y: clamp_into(p.y + cfg.noise_sigma * ny, 0.0, h),
            });
        }
        source.push(Some(i));
    }
    let n_spurious = rng.poisson(cfg.spurious_rate * points.len() as f64);
    for _ in 0..n_spurious {
        out.push(Point { x: w * rng.uniform(), y: h * rng.uniform() });
        source.push(None);
    }
    Ok(Perturbed { points: PointSet::new(out, Label::Predicted)?, source })
}

pub fn perturb_points(points: &PointSet, cfg: &PerturbConfig) -> Result<PointSet> {
    Ok(perturb_with_sources(points, cfg)?.points)
}
