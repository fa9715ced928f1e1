//! Points, exact k-nearest-neighbour distances and adaptive search radii.

use crate::{Error, Result};

/// Minimum target count at which k-NN queries switch from a full scan to
/// uniform-grid bucketing. Both paths are exact.
pub const GRID_THRESHOLD: usize = 256;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_RADIUS_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if x.is_finite() && y.is_finite() {
            Ok(Self { x, y })
        } else {
            Err(Error::NonFinite("point"))
        }
    }

    #[inline]
    pub fn dist_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Point {
        Point { x: self.x + dx, y: self.y + dy }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Label {
    Predicted,
    GroundTruth,
    #[default]
    Unlabeled,
}

/// Ordered point collection. Index identity matters: match results refer to
/// points by position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSet {
    points: Vec<Point>,
    pub label: Label,
}

impl PointSet {
    pub fn new(points: Vec<Point>, label: Label) -> Result<Self> {
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::NonFinite("point set"));
        }
        Ok(Self { points, label })
    }

    pub fn empty(label: Label) -> Self {
        Self { points: Vec::new(), label }
    }

    /// Build from raw coordinate pairs.
    pub fn from_xy(coords: &[(f64, f64)], label: Label) -> Result<Self> {
        Self::new(coords.iter().map(|&(x, y)| Point { x, y }).collect(), label)
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn get(&self, i: usize) -> Option<&Point> {
        self.points.get(i)
    }

    pub fn push(&mut self, p: Point) -> Result<()> {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::NonFinite("point"));
        }
        self.points.push(p);
        Ok(())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn translated(&self, dx: f64, dy: f64) -> PointSet {
        PointSet {
            points: self.points.iter().map(|p| p.translate(dx, dy)).collect(),
            label: self.label,
        }
    }

    pub fn scaled(&self, c: f64) -> PointSet {
        PointSet {
            points: self.points.iter().map(|p| Point { x: p.x * c, y: p.y * c }).collect(),
            label: self.label,
        }
    }
}

impl<'a> IntoIterator for &'a PointSet {
    type Item = &'a Point;
    type IntoIter = std::slice::Iter<'a, Point>;
    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

/// Adaptive radius per predicted point.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusProfile {
    pub radii: Vec<f64>,
    pub k: usize,
    pub floor: f64,
}

impl RadiusProfile {
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}

/// Exact k-nearest-neighbour index over a fixed target set.
///
/// Small sets are scanned linearly; sets of [`GRID_THRESHOLD`] points or more
/// are bucketed into a uniform grid and searched ring by ring until no
/// unvisited cell can hold a closer point.
#[derive(Debug, Clone)]
pub struct KnnIndex<'a> {
    targets: &'a [Point],
    grid: Option<Grid>,
}

#[derive(Debug, Clone)]
struct Grid {
    min_x: f64,
    min_y: f64,
    cell: f64,
    cols: usize,
    rows: usize,
    // CSR layout: cell c holds indices[offsets[c]..offsets[c + 1]]
    offsets: Vec<usize>,
    indices: Vec<u32>,
}

impl Grid {
    fn build(targets: &[Point]) -> Self {
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in targets {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        let w = (max_x - min_x).max(f64::MIN_POSITIVE);
        let h = (max_y - min_y).max(f64::MIN_POSITIVE);
        // roughly two points per cell; the second bound keeps thin layouts sane
        let target_cells = (targets.len() / 2).max(1) as f64;
        let mut cell = (w * h / target_cells).sqrt().max(w.max(h) / target_cells);
        if cell.is_nan() || cell <= 0.0 || !cell.is_finite() {
            cell = 1.0;
        }
        let cols = (w / cell).floor() as usize + 1;
        let rows = (h / cell).floor() as usize + 1;
        let mut grid = Grid {
            min_x,
            min_y,
            cell,
            cols,
            rows,
            offsets: vec![0; cols * rows + 1],
            indices: vec![0; targets.len()],
        };
        let ids: Vec<usize> = targets.iter().map(|p| grid.cell_of(p)).collect();
        for &c in &ids {
            grid.offsets[c + 1] += 1;
        }
        for c in 0..cols * rows {
            grid.offsets[c + 1] += grid.offsets[c];
        }
        let mut fill = grid.offsets.clone();
        for (i, &c) in ids.iter().enumerate() {
            grid.indices[fill[c]] = i as u32;
            fill[c] += 1;
        }
        grid
    }

    fn col_of(&self, x: f64) -> usize {
        let c = ((x - self.min_x) / self.cell).floor();
        if c < 0.0 {
            0
        } else {
            (c as usize).min(self.cols - 1)
        }
    }

    fn row_of(&self, y: f64) -> usize {
        let r = ((y - self.min_y) / self.cell).floor();
        if r < 0.0 {
            0
        } else {
            (r as usize).min(self.rows - 1)
        }
    }

    fn cell_of(&self, p: &Point) -> usize {
        self.row_of(p.y) * self.cols + self.col_of(p.x)
    }

    fn cell_points(&self, col: usize, row: usize) -> &[u32] {
        let c = row * self.cols + col;
        &self.indices[self.offsets[c]..self.offsets[c + 1]]
    }
}

/// Bounded sorted buffer of the k smallest squared distances seen so far.
struct KBest {
    k: usize,
    vals: Vec<f64>,
}

impl KBest {
    fn new(k: usize) -> Self {
        Self { k, vals: Vec::with_capacity(k + 1) }
    }

    fn offer(&mut self, d: f64) {
        if self.vals.len() == self.k && d >= self.vals[self.k - 1] {
            return;
        }
        let pos = self.vals.partition_point(|&v| v <= d);
        self.vals.insert(pos, d);
        self.vals.truncate(self.k);
    }

    fn worst(&self) -> Option<f64> {
        (self.vals.len() == self.k).then(|| self.vals[self.k - 1])
    }
}

impl<'a> KnnIndex<'a> {
    pub fn new(targets: &'a PointSet) -> Result<Self> {
        Self::from_slice(targets.points())
    }

    pub fn from_slice(targets: &'a [Point]) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::NoGroundTruth);
        }
        let grid = (targets.len() >= GRID_THRESHOLD).then(|| Grid::build(targets));
        Ok(Self { targets, grid })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// The `min(k, len)` smallest distances from `query`, non-decreasing.
    pub fn k_nearest(&self, query: &Point, k: usize) -> Result<Vec<f64>> {
        if k == 0 {
            return Err(Error::InvalidK(k));
        }
        let k = k.min(self.targets.len());
        let sq = match &self.grid {
            None => self.scan(query, k),
            Some(g) => self.grid_search(g, query, k),
        };
        Ok(sq.into_iter().map(f64::sqrt).collect())
    }

    fn scan(&self, query: &Point, k: usize) -> Vec<f64> {
        let mut d: Vec<f64> = self.targets.iter().map(|t| query.dist_sq(t)).collect();
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d.truncate(k);
        }
        d.sort_unstable_by(f64::total_cmp);
        d
    }

    fn grid_search(&self, g: &Grid, query: &Point, k: usize) -> Vec<f64> {
        let qc = g.col_of(query.x) as isize;
        let qr = g.row_of(query.y) as isize;
        let mut best = KBest::new(k);
        let (cols, rows) = (g.cols as isize, g.rows as isize);
        let mut ring: isize = 0;
        loop {
            let (c0, c1) = (qc - ring, qc + ring);
            let (r0, r1) = (qr - ring, qr + ring);
            let mut visit = |c: isize, r: isize| {
                if (0..cols).contains(&c) && (0..rows).contains(&r) {
                    for &i in g.cell_points(c as usize, r as usize) {
                        best.offer(query.dist_sq(&self.targets[i as usize]));
                    }
                }
            };
            if ring == 0 {
                visit(qc, qr);
            } else {
                for c in c0..=c1 {
                    visit(c, r0);
                    visit(c, r1);
                }
                for r in r0 + 1..r1 {
                    visit(c0, r);
                    visit(c1, r);
                }
            }
            let covers_all = c0 <= 0 && r0 <= 0 && c1 >= cols - 1 && r1 >= rows - 1;
            if covers_all {
                break;
            }
            if let Some(worst) = best.worst() {
                // every unvisited point lies outside the visited box of cells
                let mut gap = f64::INFINITY;
                if c0 > 0 {
                    gap = gap.min(query.x - (g.min_x + c0 as f64 * g.cell));
                }
                if c1 < cols - 1 {
                    gap = gap.min(g.min_x + (c1 + 1) as f64 * g.cell - query.x);
                }
                if r0 > 0 {
                    gap = gap.min(query.y - (g.min_y + r0 as f64 * g.cell));
                }
                if r1 < rows - 1 {
                    gap = gap.min(g.min_y + (r1 + 1) as f64 * g.cell - query.y);
                }
                let gap = gap.max(0.0);
                if worst <= gap * gap {
                    break;
                }
            }
            ring += 1;
        }
        best.vals
    }

    pub fn adaptive_radius(&self, p: &Point, k: usize, floor: f64) -> Result<f64> {
        check_floor(floor)?;
        let d = self.k_nearest(p, k)?;
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        Ok(mean.max(floor))
    }
}

fn check_floor(floor: f64) -> Result<()> {
    if floor > 0.0 && floor.is_finite() {
        Ok(())
    } else {
        Err(Error::param("radius floor", format!("must be positive and finite, got {floor}")))
    }
}

/// Distances from `query` to its `min(k, |targets|)` nearest targets, sorted
/// ascending.
pub fn knn_distances(query: &Point, targets: &PointSet, k: usize) -> Result<Vec<f64>> {
    if targets.is_empty() {
        return Err(Error::NoGroundTruth);
    }
    if k == 0 {
        return Err(Error::InvalidK(k));
    }
    KnnIndex::new(targets)?.k_nearest(query, k)
}

/// Mean distance to the k nearest ground-truth points, floored at `floor`.
///
/// When fewer than `k` ground-truth points exist the mean runs over all of them.
pub fn adaptive_radius(p: &Point, gt: &PointSet, k: usize, floor: f64) -> Result<f64> {
    check_floor(floor)?;
    let d = knn_distances(p, gt, k)?;
    Ok((d.iter().sum::<f64>() / d.len() as f64).max(floor))
}

/// Adaptive radius for every prediction, sharing one index over `gt`.
pub fn all_radii(pred: &PointSet, gt: &PointSet, k: usize, floor: f64) -> Result<RadiusProfile> {
    check_floor(floor)?;
    if k == 0 {
        return Err(Error::InvalidK(k));
    }
    let index = KnnIndex::new(gt)?;
    let radii = pred
        .iter()
        .map(|p| index.adaptive_radius(p, k, floor))
        .collect::<Result<Vec<_>>>()?;
    Ok(RadiusProfile { radii, k, floor })
}

/// Distance from every point to its nearest other point in the same set.
/// Returns an empty vector for sets with fewer than two points.
pub fn nearest_neighbor_spacing(points: &PointSet) -> Vec<f64> {
    if points.len() < 2 {
        return Vec::new();
    }
    let index = KnnIndex::new(points).expect("non-empty");
    points
        .iter()
        .map(|p| index.k_nearest(p, 2).expect("k = 2")[1])
        .collect()
}
