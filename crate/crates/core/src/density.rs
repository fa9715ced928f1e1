//! Position maps: rendering from points, decoding back to points, file formats.
//!
//! Pixel `(col, row)` samples the plane at `(x, y) = (col, row)`.
//!
//! Binary grid layout (little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `DMAP`                  |
//! | 4      | 4    | format version, `u32` = 1     |
//! | 8      | 4    | height, `u32`                 |
//! | 12     | 4    | width, `u32`                  |
//! | 16     | 4·HW | values, `f32`, row-major      |

use crate::geometry::{Label, Point, PointSet};
use crate::{Error, Result};
use std::f64::consts::PI;
use std::io::{BufRead, Read, Write};

pub const BINARY_MAGIC: &[u8; 4] = b"DMAP";
pub const BINARY_VERSION: u32 = 1;

/// Gaussians are evaluated out to this many σ from their centre.
const RENDER_SUPPORT: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl DensityMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::LengthMismatch { left: values.len(), right: height * width });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::param("density map", "values must be finite and non-negative"));
        }
        Ok(Self { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, values: vec![0.0; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Half the map maximum; the CLI's default decoding threshold.
    pub fn default_threshold(&self) -> f64 {
        0.5 * self.max()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.values.chunks(self.width.max(1)) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut values = Vec::new();
        let mut width = None;
        let mut height = 0;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::Format(format!("line {}: expected {w} values, found {}", i + 1, row.len())))
                }
                _ => {}
            }
            values.extend(row);
            height += 1;
        }
        Self::new(height, width.unwrap_or(0), values)
    }

    /// Values are narrowed to `f32`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&BINARY_VERSION.to_le_bytes())?;
        w.write_all(&(self.height as u32).to_le_bytes())?;
        w.write_all(&(self.width as u32).to_le_bytes())?;
        for &v in &self.values {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[..4] != BINARY_MAGIC {
            return Err(Error::Format("bad magic, expected DMAP".into()));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
        if word(4) != BINARY_VERSION {
            return Err(Error::Format(format!("unsupported version {}", word(4))));
        }
        let (height, width) = (word(8) as usize, word(12) as usize);
        let mut buf = vec![0u8; 4 * height * width];
        r.read_exact(&mut buf)?;
        let values = buf.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        Self::new(height, width, values)
    }
}

/// Sum of unit-mass isotropic Gaussians, one per point.
pub fn render_density(points: &PointSet, sigma: f64, height: usize, width: usize) -> Result<DensityMap> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidSigma(sigma));
    }
    let outside: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| !(p.x >= 0.0 && p.x < width as f64 && p.y >= 0.0 && p.y < height as f64))
        .map(|(i, _)| i)
        .collect();
    if !outside.is_empty() {
        return Err(Error::OutOfBounds(outside));
    }
    let mut map = DensityMap::zeros(height, width);
    let norm = 1.0 / (2.0 * PI * sigma * sigma);
    let two_var = 2.0 * sigma * sigma;
    let reach = (RENDER_SUPPORT * sigma).ceil();
    for p in points {
        let c0 = (p.x - reach).floor().max(0.0) as usize;
        let c1 = ((p.x + reach).ceil() as usize).min(width - 1);
        let r0 = (p.y - reach).floor().max(0.0) as usize;
        let r1 = ((p.y + reach).ceil() as usize).min(height - 1);
        for row in r0..=r1 {
            let dy = row as f64 - p.y;
            for col in c0..=c1 {
                let dx = col as f64 - p.x;
                map.values[row * width + col] += norm * (-(dx * dx + dy * dy) / two_var).exp();
            }
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    first: usize,
    at: Point,
}

/// Decode a map into points.
///
/// A candidate is an 8-connected plateau of equal values whose outer
/// neighbours are all strictly lower (maps that are constant everywhere have
/// none); it is reported at the plateau centroid. Candidates below
/// `threshold` are dropped, the rest are accepted greedily by descending
/// value (ties in scan order) unless closer than `min_distance` to an accepted
/// peak. `min_distance` below 1 is treated as 1. The returned points follow
/// acceptance order.
pub fn extract_peaks(map: &DensityMap, threshold: f64, min_distance: f64) -> PointSet {
    let min_distance = if min_distance >= 1.0 { min_distance } else { 1.0 };
    let (h, w) = (map.height, map.width);
    let mut seen = vec![false; h * w];
    let mut candidates = Vec::new();
    let mut stack = Vec::new();
    let mut plateau = Vec::new();
    for start in 0..h * w {
        if seen[start] {
            continue;
        }
        let value = map.values[start];
        seen[start] = true;
        stack.push(start);
        plateau.clear();
        let mut is_max = true;
        let mut has_border = false;
        while let Some(i) = stack.pop() {
            plateau.push(i);
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for dr in -1..=1isize {
                for dc in -1..=1isize {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                        continue;
                    }
                    let j = nr as usize * w + nc as usize;
                    let nv = map.values[j];
                    if nv == value {
                        if !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    } else {
                        has_border = true;
                        if nv > value {
                            is_max = false;
                        }
                    }
                }
            }
        }
        if is_max && has_border && value >= threshold {
            let n = plateau.len() as f64;
            let cx = plateau.iter().map(|&i| (i % w) as f64).sum::<f64>() / n;
            let cy = plateau.iter().map(|&i| (i / w) as f64).sum::<f64>() / n;
            candidates.push(Candidate { value, first: start, at: Point { x: cx, y: cy } });
        }
    }
    candidates.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.first.cmp(&b.first)));
    let min_sq = min_distance * min_distance;
    let mut kept: Vec<Point> = Vec::new();
    for c in candidates {
        if kept.iter().all(|k| k.dist_sq(&c.at) >= min_sq) {
            kept.push(c.at);
        }
    }
    PointSet::new(kept, Label::Predicted).expect("centroids are finite")
}
