//! C ABI over the `cellcount` library.
//!
//! Conventions:
//! - Fallible functions return a [`CellcountStatus`]; on failure a message is
//!   available from [`cellcount_last_error`] on the same thread.
//! - Objects are opaque handles created by `*_new`/`*_read`/producer calls and
//!   released with the matching `*_free`. Freeing NULL is a no-op.
//! - Caller-owned output buffers are passed as pointer plus length.
//! - Panics never cross the boundary; they surface as
//!   `CELLCOUNT_STATUS_INTERNAL`.

#![allow(clippy::missing_safety_doc)]

use cellcount::assignment::{hungarian_solve, CostMatrix};
use cellcount::density::{extract_peaks, render_density, DensityMap};
use cellcount::eval::count_error;
use cellcount::io::{read_coord_file, write_coord_file};
use cellcount::kernel::{kernel_gradients, synthesize_kernel, KernelParams, Normalization};
use cellcount::khm::{OutOfRadiusMode, SigmaPolicy};
use cellcount::{khm_match, Error, Label, MatchConfig, MatchResult, Point, PointSet};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellcountStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    OutOfBounds = 4,
    Parse = 5,
    Io = 6,
    Internal = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: CellcountStatus,
    message: String,
}

impl Failure {
    fn new(status: CellcountStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn null(what: &str) -> Self {
        Self::new(CellcountStatus::NullPointer, format!("{what} is NULL"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::OutOfBounds(_) => CellcountStatus::OutOfBounds,
            Error::Parse { .. } | Error::Format(_) => CellcountStatus::Parse,
            Error::Io(_) => CellcountStatus::Io,
            _ => CellcountStatus::InvalidArgument,
        };
        Self::new(status, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CellcountStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CellcountStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(_) => {
            set_last_error("internal panic");
            CellcountStatus::Internal
        }
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn slice_mut<'a, T>(data: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts_mut(data, len))
}

unsafe fn reference<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(Failure::null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Failure::new(CellcountStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

fn check_len(have: usize, need: usize, what: &str) -> Result<(), Failure> {
    if have < need {
        return Err(Failure::new(
            CellcountStatus::BufferTooSmall,
            format!("{what} holds {have} values, {need} required"),
        ));
    }
    Ok(())
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cellcount_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn cellcount_clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cellcount_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- point sets ----

/// Opaque point set.
pub struct CellcountPointSet(PointSet);

/// Builds a point set from `n` interleaved `x, y` pairs.
#[no_mangle]
pub unsafe extern "C" fn cellcount_point_set_new(
    xy: *const f64,
    n: usize,
    out: *mut *mut CellcountPointSet,
) -> CellcountStatus {
    guard(|| {
        let len = n.checked_mul(2).ok_or_else(|| Failure::new(CellcountStatus::InvalidArgument, "n overflows"))?;
        let flat = slice(xy, len, "xy")?;
        let pts = flat.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect::<Result<Vec<_>, _>>()?;
        let ps = PointSet::new(pts, Label::Unlabeled)?;
        write_out(out, Box::into_raw(Box::new(CellcountPointSet(ps))), "out")
    })
}

/// Reads an integer coordinate file (`x y` per line).
#[no_mangle]
pub unsafe extern "C" fn cellcount_point_set_read(path: *const c_char, out: *mut *mut CellcountPointSet) -> CellcountStatus {
    guard(|| {
        let p = path_arg(path)?;
        let ps = read_coord_file(&p, Label::Unlabeled).map_err(|e| match e {
            Error::Io(io) => Failure::new(CellcountStatus::Io, format!("{}: {io}", p.display())),
            other => other.into(),
        })?;
        write_out(out, Box::into_raw(Box::new(CellcountPointSet(ps))), "out")
    })
}

/// Writes a coordinate file. `rounded`, if not NULL, receives how many points
/// were rounded to integers.
#[no_mangle]
pub unsafe extern "C" fn cellcount_point_set_write(
    set: *const CellcountPointSet,
    path: *const c_char,
    rounded: *mut usize,
) -> CellcountStatus {
    guard(|| {
        let set = reference(set, "set")?;
        let p = path_arg(path)?;
        let n = write_coord_file(&p, &set.0)?;
        if !rounded.is_null() {
            rounded.write(n);
        }
        Ok(())
    })
}

/// Number of points; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn cellcount_point_set_len(set: *const CellcountPointSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Copies up to `capacity` points into `xy` as interleaved pairs.
/// `capacity` counts points, so `xy` must hold `2 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn cellcount_point_set_copy(
    set: *const CellcountPointSet,
    xy: *mut f64,
    capacity: usize,
) -> CellcountStatus {
    guard(|| {
        let set = reference(set, "set")?;
        check_len(capacity, set.0.len(), "xy")?;
        let buf = slice_mut(xy, 2 * set.0.len(), "xy")?;
        for (dst, p) in buf.chunks_exact_mut(2).zip(set.0.iter()) {
            dst[0] = p.x;
            dst[1] = p.y;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cellcount_point_set_free(set: *mut CellcountPointSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

// ---- assignment ----

/// Minimum-cost assignment on a row-major `rows × cols` matrix.
/// `row_to_col` (length `rows`) receives each row's column or -1.
#[no_mangle]
pub unsafe extern "C" fn cellcount_hungarian(
    costs: *const f64,
    rows: usize,
    cols: usize,
    row_to_col: *mut isize,
    total_cost: *mut f64,
) -> CellcountStatus {
    guard(|| {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure::new(CellcountStatus::InvalidArgument, "matrix size overflows"))?;
        let m = CostMatrix::new(rows, cols, slice(costs, n, "costs")?.to_vec())?;
        let out = slice_mut(row_to_col, rows, "row_to_col")?;
        let a = hungarian_solve(&m);
        out.fill(-1);
        for &(i, j) in &a.pairs {
            out[i] = j as isize;
        }
        if !total_cost.is_null() {
            total_cost.write(a.total_cost);
        }
        Ok(())
    })
}

// ---- matching ----

/// How the Gaussian width is chosen.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellcountSigmaPolicy {
    /// `sigma_value` times each prediction's radius.
    RadiusScaled = 0,
    /// `sigma_value` pixels for every prediction.
    Fixed = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellcountOutOfRadius {
    Forbid = 0,
    LinearPenalty = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellcountMatchConfig {
    pub k: usize,
    pub sigma_policy: CellcountSigmaPolicy,
    pub sigma_value: f64,
    pub radius_floor: f64,
    pub out_of_radius: CellcountOutOfRadius,
}

impl From<CellcountMatchConfig> for MatchConfig {
    fn from(c: CellcountMatchConfig) -> Self {
        MatchConfig {
            k: c.k,
            sigma_policy: match c.sigma_policy {
                CellcountSigmaPolicy::RadiusScaled => SigmaPolicy::RadiusScaled(c.sigma_value),
                CellcountSigmaPolicy::Fixed => SigmaPolicy::Fixed(c.sigma_value),
            },
            radius_floor: c.radius_floor,
            out_of_radius_mode: match c.out_of_radius {
                CellcountOutOfRadius::Forbid => OutOfRadiusMode::Forbid,
                CellcountOutOfRadius::LinearPenalty => OutOfRadiusMode::LinearPenalty,
            },
        }
    }
}

#[no_mangle]
pub extern "C" fn cellcount_match_config_default() -> CellcountMatchConfig {
    let d = MatchConfig::default();
    let (sigma_policy, sigma_value) = match d.sigma_policy {
        SigmaPolicy::RadiusScaled(f) => (CellcountSigmaPolicy::RadiusScaled, f),
        SigmaPolicy::Fixed(s) => (CellcountSigmaPolicy::Fixed, s),
    };
    CellcountMatchConfig {
        k: d.k,
        sigma_policy,
        sigma_value,
        radius_floor: d.radius_floor,
        out_of_radius: match d.out_of_radius_mode {
            OutOfRadiusMode::Forbid => CellcountOutOfRadius::Forbid,
            OutOfRadiusMode::LinearPenalty => CellcountOutOfRadius::LinearPenalty,
        },
    }
}

/// Opaque matching result.
pub struct CellcountMatchResult(MatchResult);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellcountPair {
    pub pred: usize,
    pub gt: usize,
    pub distance: f64,
    pub weight: f64,
}

/// Adaptive-radius Hungarian matching. `config` may be NULL for defaults.
#[no_mangle]
pub unsafe extern "C" fn cellcount_khm_match(
    pred: *const CellcountPointSet,
    gt: *const CellcountPointSet,
    config: *const CellcountMatchConfig,
    out: *mut *mut CellcountMatchResult,
) -> CellcountStatus {
    guard(|| {
        let (pred, gt) = (reference(pred, "pred")?, reference(gt, "gt")?);
        let cfg = config.as_ref().map_or_else(MatchConfig::default, |c| (*c).into());
        let m = khm_match(&pred.0, &gt.0, &cfg)?;
        write_out(out, Box::into_raw(Box::new(CellcountMatchResult(m))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn cellcount_match_result_pair_count(m: *const CellcountMatchResult) -> usize {
    m.as_ref().map_or(0, |m| m.0.pairs.len())
}

#[no_mangle]
pub unsafe extern "C" fn cellcount_match_result_total_weight(m: *const CellcountMatchResult) -> f64 {
    m.as_ref().map_or(0.0, |m| m.0.total_weight)
}

/// Pair `index`, in ascending prediction order.
#[no_mangle]
pub unsafe extern "C" fn cellcount_match_result_pair(
    m: *const CellcountMatchResult,
    index: usize,
    out: *mut CellcountPair,
) -> CellcountStatus {
    guard(|| {
        let m = reference(m, "result")?;
        let p = m.0.pairs.get(index).ok_or_else(|| {
            Failure::new(CellcountStatus::OutOfBounds, format!("pair {index} of {}", m.0.pairs.len()))
        })?;
        write_out(out, CellcountPair { pred: p.pred, gt: p.gt, distance: p.distance, weight: p.weight }, "out")
    })
}

unsafe fn copy_indices(src: &[usize], buf: *mut usize, capacity: usize, len: *mut usize) -> Result<(), Failure> {
    write_out(len, src.len(), "len")?;
    check_len(capacity, src.len(), "buffer")?;
    slice_mut(buf, src.len(), "buffer")?.copy_from_slice(src);
    Ok(())
}

/// Unmatched prediction indices. `len` always receives the full count, so a
/// first call with `capacity = 0` sizes the buffer.
#[no_mangle]
pub unsafe extern "C" fn cellcount_match_result_unmatched_pred(
    m: *const CellcountMatchResult,
    buf: *mut usize,
    capacity: usize,
    len: *mut usize,
) -> CellcountStatus {
    guard(|| copy_indices(&reference(m, "result")?.0.unmatched_pred, buf, capacity, len))
}

/// Unmatched ground-truth indices; same protocol as the prediction variant.
#[no_mangle]
pub unsafe extern "C" fn cellcount_match_result_unmatched_gt(
    m: *const CellcountMatchResult,
    buf: *mut usize,
    capacity: usize,
    len: *mut usize,
) -> CellcountStatus {
    guard(|| copy_indices(&reference(m, "result")?.0.unmatched_gt, buf, capacity, len))
}

#[no_mangle]
pub unsafe extern "C" fn cellcount_match_result_free(m: *mut CellcountMatchResult) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

// ---- kernels ----

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellcountKernelParams {
    pub sigma: f64,
    pub dx: f64,
    pub dy: f64,
    pub sx: f64,
    pub sy: f64,
}

impl From<CellcountKernelParams> for KernelParams {
    fn from(p: CellcountKernelParams) -> Self {
        KernelParams { sigma: p.sigma, dx: p.dx, dy: p.dy, sx: p.sx, sy: p.sy }
    }
}

/// Row-major `size × size` kernel into `out`. `unit_sum` non-zero rescales
/// the samples to sum to one.
#[no_mangle]
pub unsafe extern "C" fn cellcount_kernel_synthesize(
    params: *const CellcountKernelParams,
    size: usize,
    unit_sum: i32,
    out: *mut f64,
    out_len: usize,
) -> CellcountStatus {
    guard(|| {
        let p: KernelParams = (*reference(params, "params")?).into();
        let norm = if unit_sum != 0 { Normalization::UnitSum } else { Normalization::Raw };
        let k = synthesize_kernel(&p, size, norm)?;
        check_len(out_len, k.values().len(), "out")?;
        slice_mut(out, k.values().len(), "out")?.copy_from_slice(k.values());
        Ok(())
    })
}

/// Five row-major gradient grids, back to back, in the order σ, Δx, Δy,
/// sx, sy. `out_len` must be at least `5 * size * size`.
#[no_mangle]
pub unsafe extern "C" fn cellcount_kernel_gradients(
    params: *const CellcountKernelParams,
    size: usize,
    out: *mut f64,
    out_len: usize,
) -> CellcountStatus {
    guard(|| {
        let p: KernelParams = (*reference(params, "params")?).into();
        let g = kernel_gradients(&p, size)?;
        let cell = size * size;
        check_len(out_len, 5 * cell, "out")?;
        let buf = slice_mut(out, 5 * cell, "out")?;
        for (dst, grid) in buf.chunks_exact_mut(cell).zip(g.grids()) {
            dst.copy_from_slice(grid);
        }
        Ok(())
    })
}

// ---- metrics ----

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellcountCountErrors {
    pub mae: f64,
    /// Root of the mean squared error.
    pub mse_paper: f64,
    /// Mean squared error without the root.
    pub mse_literal: f64,
}

#[no_mangle]
pub unsafe extern "C" fn cellcount_count_error(
    pred_counts: *const usize,
    gt_counts: *const usize,
    n: usize,
    out: *mut CellcountCountErrors,
) -> CellcountStatus {
    guard(|| {
        let e = count_error(slice(pred_counts, n, "pred_counts")?, slice(gt_counts, n, "gt_counts")?)?;
        write_out(out, CellcountCountErrors { mae: e.mae, mse_paper: e.mse_paper, mse_literal: e.mse_literal }, "out")
    })
}

// ---- density maps ----

/// Opaque density map.
pub struct CellcountDensityMap(DensityMap);

/// Sum of unit-mass Gaussians of width `sigma` at each point.
#[no_mangle]
pub unsafe extern "C" fn cellcount_density_render(
    points: *const CellcountPointSet,
    sigma: f64,
    height: usize,
    width: usize,
    out: *mut *mut CellcountDensityMap,
) -> CellcountStatus {
    guard(|| {
        let ps = reference(points, "points")?;
        let map = render_density(&ps.0, sigma, height, width)?;
        write_out(out, Box::into_raw(Box::new(CellcountDensityMap(map))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn cellcount_density_map_height(map: *const CellcountDensityMap) -> usize {
    map.as_ref().map_or(0, |m| m.0.height())
}

#[no_mangle]
pub unsafe extern "C" fn cellcount_density_map_width(map: *const CellcountDensityMap) -> usize {
    map.as_ref().map_or(0, |m| m.0.width())
}

/// Row-major values, borrowed from the map; NULL for a NULL map.
#[no_mangle]
pub unsafe extern "C" fn cellcount_density_map_data(map: *const CellcountDensityMap) -> *const f64 {
    map.as_ref().map_or(ptr::null(), |m| m.0.values().as_ptr())
}

/// Half the map maximum.
#[no_mangle]
pub unsafe extern "C" fn cellcount_density_map_default_threshold(map: *const CellcountDensityMap) -> f64 {
    map.as_ref().map_or(0.0, |m| m.0.default_threshold())
}

/// Local maxima at or above `threshold`, at least `min_distance` apart.
#[no_mangle]
pub unsafe extern "C" fn cellcount_density_extract_peaks(
    map: *const CellcountDensityMap,
    threshold: f64,
    min_distance: f64,
    out: *mut *mut CellcountPointSet,
) -> CellcountStatus {
    guard(|| {
        let m = reference(map, "map")?;
        let peaks = extract_peaks(&m.0, threshold, min_distance);
        write_out(out, Box::into_raw(Box::new(CellcountPointSet(peaks))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn cellcount_density_map_write(map: *const CellcountDensityMap, path: *const c_char) -> CellcountStatus {
    guard(|| {
        let m = reference(map, "map")?;
        let p = path_arg(path)?;
        let f = File::create(&p).map_err(|e| Failure::new(CellcountStatus::Io, format!("{}: {e}", p.display())))?;
        let mut w = BufWriter::new(f);
        m.0.write_binary(&mut w)?;
        w.flush().map_err(|e| Failure::new(CellcountStatus::Io, format!("{}: {e}", p.display())))
    })
}

#[no_mangle]
pub unsafe extern "C" fn cellcount_density_map_read(path: *const c_char, out: *mut *mut CellcountDensityMap) -> CellcountStatus {
    guard(|| {
        let p = path_arg(path)?;
        let f = File::open(&p).map_err(|e| Failure::new(CellcountStatus::Io, format!("{}: {e}", p.display())))?;
        let map = DensityMap::read_binary(BufReader::new(f))?;
        write_out(out, Box::into_raw(Box::new(CellcountDensityMap(map))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn cellcount_density_map_free(map: *mut CellcountDensityMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}
