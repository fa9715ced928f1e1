use cellcount_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn last_error() -> String {
    let p = cellcount_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn point_set(xy: &[f64]) -> *mut CellcountPointSet {
    let mut out = ptr::null_mut();
    assert_eq!(cellcount_point_set_new(xy.as_ptr(), xy.len() / 2, &mut out), CellcountStatus::Ok);
    out
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(cellcount_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn point_set_round_trip() {
    unsafe {
        let ps = point_set(&[1.0, 2.0, 3.5, 4.0]);
        assert_eq!(cellcount_point_set_len(ps), 2);
        let mut buf = [0.0; 4];
        assert_eq!(cellcount_point_set_copy(ps, buf.as_mut_ptr(), 2), CellcountStatus::Ok);
        assert_eq!(buf, [1.0, 2.0, 3.5, 4.0]);
        assert_eq!(cellcount_point_set_copy(ps, buf.as_mut_ptr(), 1), CellcountStatus::BufferTooSmall);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("p.txt").to_str().unwrap()).unwrap();
        let mut rounded = 0usize;
        assert_eq!(cellcount_point_set_write(ps, path.as_ptr(), &mut rounded), CellcountStatus::Ok);
        assert_eq!(rounded, 1);
        let mut back = ptr::null_mut();
        assert_eq!(cellcount_point_set_read(path.as_ptr(), &mut back), CellcountStatus::Ok);
        assert_eq!(cellcount_point_set_copy(back, buf.as_mut_ptr(), 2), CellcountStatus::Ok);
        assert_eq!(buf, [1.0, 2.0, 4.0, 4.0]);
        cellcount_point_set_free(ps);
        cellcount_point_set_free(back);
        cellcount_point_set_free(ptr::null_mut());
    }
}

#[test]
fn invalid_inputs_report_errors() {
    unsafe {
        let mut out = ptr::null_mut();
        let bad = [1.0, f64::NAN];
        assert_eq!(cellcount_point_set_new(bad.as_ptr(), 1, &mut out), CellcountStatus::InvalidArgument);
        assert!(out.is_null());
        assert!(last_error().contains("non-finite"));
        assert_eq!(cellcount_point_set_new(ptr::null(), 3, &mut out), CellcountStatus::NullPointer);
        assert!(last_error().contains("xy"));
        let missing = CString::new("/no/such/dir/file.txt").unwrap();
        assert_eq!(cellcount_point_set_read(missing.as_ptr(), &mut out), CellcountStatus::Io);
        assert!(last_error().contains("/no/such/dir/file.txt"));
        cellcount_clear_error();
        assert!(cellcount_last_error().is_null());
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    unsafe {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.txt");
        std::fs::write(&p, "1 2\n3 -4\n").unwrap();
        let path = CString::new(p.to_str().unwrap()).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(cellcount_point_set_read(path.as_ptr(), &mut out), CellcountStatus::Parse);
        assert!(last_error().contains(":2:"));
    }
}

#[test]
fn hungarian_buffer() {
    unsafe {
        let costs = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let mut assign = [0isize; 3];
        let mut total = 0.0;
        assert_eq!(cellcount_hungarian(costs.as_ptr(), 3, 3, assign.as_mut_ptr(), &mut total), CellcountStatus::Ok);
        assert_eq!(assign, [1, 0, 2]);
        assert_eq!(total, 5.0);

        let wide = [1.0, 9.0, 0.5];
        let mut one = [0isize; 1];
        assert_eq!(cellcount_hungarian(wide.as_ptr(), 1, 3, one.as_mut_ptr(), ptr::null_mut()), CellcountStatus::Ok);
        assert_eq!(one, [2]);

        let tall = [3.0, 1.0, 2.0];
        let mut rows = [0isize; 3];
        assert_eq!(cellcount_hungarian(tall.as_ptr(), 3, 1, rows.as_mut_ptr(), ptr::null_mut()), CellcountStatus::Ok);
        assert_eq!(rows, [-1, 0, -1]);

        let nan = [f64::NAN];
        assert_eq!(cellcount_hungarian(nan.as_ptr(), 1, 1, one.as_mut_ptr(), ptr::null_mut()), CellcountStatus::InvalidArgument);
    }
}

#[test]
fn khm_match_through_handles() {
    unsafe {
        let gt = point_set(&[10.0, 10.0, 50.0, 50.0, 90.0, 10.0]);
        let pred = point_set(&[11.0, 10.0, 49.0, 51.0]);
        let mut m = ptr::null_mut();
        assert_eq!(cellcount_khm_match(pred, gt, ptr::null(), &mut m), CellcountStatus::Ok);
        assert_eq!(cellcount_match_result_pair_count(m), 2);
        let mut pair = CellcountPair { pred: 9, gt: 9, distance: 0.0, weight: 0.0 };
        assert_eq!(cellcount_match_result_pair(m, 1, &mut pair), CellcountStatus::Ok);
        assert_eq!((pair.pred, pair.gt), (1, 1));
        assert!((pair.distance - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(cellcount_match_result_pair(m, 2, &mut pair), CellcountStatus::OutOfBounds);

        let mut len = 0usize;
        assert_eq!(cellcount_match_result_unmatched_gt(m, ptr::null_mut(), 0, &mut len), CellcountStatus::BufferTooSmall);
        assert_eq!(len, 1);
        let mut buf = [0usize; 1];
        assert_eq!(cellcount_match_result_unmatched_gt(m, buf.as_mut_ptr(), 1, &mut len), CellcountStatus::Ok);
        assert_eq!(buf, [2]);
        assert_eq!(cellcount_match_result_unmatched_pred(m, ptr::null_mut(), 0, &mut len), CellcountStatus::Ok);
        assert_eq!(len, 0);

        // Library call on the same inputs.
        let lib_gt = cellcount::PointSet::from_xy(&[(10.0, 10.0), (50.0, 50.0), (90.0, 10.0)], cellcount::Label::GroundTruth).unwrap();
        let lib_pred = cellcount::PointSet::from_xy(&[(11.0, 10.0), (49.0, 51.0)], cellcount::Label::Predicted).unwrap();
        let lib = cellcount::khm_match(&lib_pred, &lib_gt, &cellcount::MatchConfig::default()).unwrap();
        assert_eq!(cellcount_match_result_total_weight(m), lib.total_weight);

        let mut cfg = cellcount_match_config_default();
        assert_eq!(cfg.k, 5);
        cfg.k = 0;
        let mut m2 = ptr::null_mut();
        assert_eq!(cellcount_khm_match(pred, gt, &cfg, &mut m2), CellcountStatus::InvalidArgument);
        cfg.k = 2;
        cfg.out_of_radius = CellcountOutOfRadius::LinearPenalty;
        assert_eq!(cellcount_khm_match(pred, gt, &cfg, &mut m2), CellcountStatus::Ok);
        cellcount_match_result_free(m2);
        cellcount_match_result_free(m);
        cellcount_point_set_free(pred);
        cellcount_point_set_free(gt);
    }
}

#[test]
fn kernel_buffers() {
    unsafe {
        let p = CellcountKernelParams { sigma: 1.5, dx: 0.3, dy: -0.2, sx: 1.2, sy: 0.8 };
        let mut k = [0.0; 25];
        assert_eq!(cellcount_kernel_synthesize(&p, 5, 1, k.as_mut_ptr(), k.len()), CellcountStatus::Ok);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut small = [0.0; 24];
        assert_eq!(cellcount_kernel_synthesize(&p, 5, 0, small.as_mut_ptr(), small.len()), CellcountStatus::BufferTooSmall);
        assert_eq!(cellcount_kernel_synthesize(&p, 4, 0, k.as_mut_ptr(), k.len()), CellcountStatus::InvalidArgument);

        let mut g = vec![0.0; 5 * 25];
        assert_eq!(cellcount_kernel_gradients(&p, 5, g.as_mut_ptr(), g.len()), CellcountStatus::Ok);
        // Central difference on Δx at the centre tap.
        let eps = 1e-6;
        let mut plus = [0.0; 25];
        let mut minus = [0.0; 25];
        let bumped = |d: f64| CellcountKernelParams { dx: p.dx + d, ..p };
        cellcount_kernel_synthesize(&bumped(eps), 5, 0, plus.as_mut_ptr(), 25);
        cellcount_kernel_synthesize(&bumped(-eps), 5, 0, minus.as_mut_ptr(), 25);
        let numeric = (plus[12] - minus[12]) / (2.0 * eps);
        assert!((g[25 + 12] - numeric).abs() < 1e-8 * numeric.abs().max(1e-3));
    }
}

#[test]
fn count_errors() {
    unsafe {
        let pred = [3usize, 7];
        let gt = [5usize, 5];
        let mut e = CellcountCountErrors::default();
        assert_eq!(cellcount_count_error(pred.as_ptr(), gt.as_ptr(), 2, &mut e), CellcountStatus::Ok);
        assert_eq!((e.mae, e.mse_paper, e.mse_literal), (2.0, 2.0, 4.0));
        assert_eq!(cellcount_count_error(pred.as_ptr(), gt.as_ptr(), 0, &mut e), CellcountStatus::InvalidArgument);
    }
}

#[test]
fn density_render_peaks_and_files() {
    unsafe {
        let ps = point_set(&[20.0, 15.0, 60.0, 40.0]);
        let mut map = ptr::null_mut();
        assert_eq!(cellcount_density_render(ps, 2.0, 64, 80, &mut map), CellcountStatus::Ok);
        assert_eq!((cellcount_density_map_height(map), cellcount_density_map_width(map)), (64, 80));
        let data = std::slice::from_raw_parts(cellcount_density_map_data(map), 64 * 80);
        // Truncation at 6σ loses about 1.5e-8 of each unit mass.
        assert!((data.iter().sum::<f64>() - 2.0).abs() < 1e-6);

        let mut peaks = ptr::null_mut();
        let thr = cellcount_density_map_default_threshold(map);
        assert_eq!(cellcount_density_extract_peaks(map, thr, 4.0, &mut peaks), CellcountStatus::Ok);
        let mut xy = [0.0; 4];
        assert_eq!(cellcount_point_set_copy(peaks, xy.as_mut_ptr(), 2), CellcountStatus::Ok);
        let mut found = [(xy[0], xy[1]), (xy[2], xy[3])];
        found.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(found, [(20.0, 15.0), (60.0, 40.0)]);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("m.dmap").to_str().unwrap()).unwrap();
        assert_eq!(cellcount_density_map_write(map, path.as_ptr()), CellcountStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(cellcount_density_map_read(path.as_ptr(), &mut back), CellcountStatus::Ok);
        assert_eq!(cellcount_density_map_width(back), 80);

        let oob = point_set(&[100.0, 1.0]);
        let mut bad = ptr::null_mut();
        assert_eq!(cellcount_density_render(oob, 2.0, 64, 80, &mut bad), CellcountStatus::OutOfBounds);

        for m in [map, back] {
            cellcount_density_map_free(m);
        }
        for s in [ps, peaks, oob] {
            cellcount_point_set_free(s);
        }
    }
}
