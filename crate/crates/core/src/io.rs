//! Integer coordinate files and evaluation manifests.
//!
//! A coordinate file holds one point per line, `x y\n`, both non-negative
//! decimal integers separated by a single space. An empty file is an empty
//! point set. A manifest holds one case per line, `pred_path<TAB>gt_path`;
//! relative paths resolve against the manifest's directory.

use crate::geometry::{Label, Point, PointSet};
use crate::{Error, Result};
use std::fs;
use std::path::{Path, PathBuf};

/// Serialized coordinates plus how many points had to be rounded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordText {
    pub text: String,
    pub rounded: usize,
}

/// Non-integer coordinates are rounded half away from zero.
pub fn serialize_coords(points: &PointSet) -> Result<CoordText> {
    let mut text = String::with_capacity(points.len() * 8);
    let mut rounded = 0;
    for (i, p) in points.iter().enumerate() {
        let (x, y) = (p.x.round(), p.y.round());
        if x < 0.0 || y < 0.0 || x > u32::MAX as f64 || y > u32::MAX as f64 {
            return Err(Error::OutOfBounds(vec![i]));
        }
        if x != p.x || y != p.y {
            rounded += 1;
        }
        text.push_str(&format!("{} {}\n", x as u64, y as u64));
    }
    Ok(CoordText { text, rounded })
}

fn parse_uint(tok: &str) -> Option<u64> {
    if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    tok.parse().ok()
}

/// `origin` only labels error messages.
pub fn parse_coords(text: &str, origin: &Path, label: Label) -> Result<PointSet> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut points = Vec::new();
    if body.is_empty() {
        return PointSet::new(points, label);
    }
    for (i, line) in body.split('\n').enumerate() {
        let line_no = i + 1;
        let err = |msg: String| Error::Parse { path: origin.to_path_buf(), line: line_no, msg };
        let mut parts = line.split(' ');
        let (Some(xs), Some(ys), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(format!("expected \"x y\", found {line:?}")));
        };
        let x = parse_uint(xs).ok_or_else(|| err(format!("bad x coordinate {xs:?}")))?;
        let y = parse_uint(ys).ok_or_else(|| err(format!("bad y coordinate {ys:?}")))?;
        points.push(Point { x: x as f64, y: y as f64 });
    }
    PointSet::new(points, label)
}

pub fn read_coord_file(path: &Path, label: Label) -> Result<PointSet> {
    let text = fs::read_to_string(path)?;
    parse_coords(&text, path, label)
}

/// Returns how many points were rounded.
pub fn write_coord_file(path: &Path, points: &PointSet) -> Result<usize> {
    let out = serialize_coords(points)?;
    fs::write(path, out.text)?;
    Ok(out.rounded)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub line: usize,
    pub pred: PathBuf,
    pub gt: PathBuf,
}

impl ManifestEntry {
    /// Identifier used in reports: the prediction file stem.
    pub fn id(&self) -> String {
        self.pred.file_stem().map_or_else(|| format!("line{}", self.line), |s| s.to_string_lossy().into_owned())
    }
}

/// Blank lines are skipped.
pub fn parse_manifest(text: &str, origin: &Path) -> Result<Vec<ManifestEntry>> {
    let base = origin.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(p), Some(g), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: "expected \"pred_path<TAB>gt_path\"".into(),
            });
        };
        let resolve = |s: &str| {
            let p = Path::new(s);
            if p.is_absolute() { p.to_path_buf() } else { base.join(p) }
        };
        out.push(ManifestEntry { line: i + 1, pred: resolve(p), gt: resolve(g) });
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path)?;
    parse_manifest(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> Result<PointSet> {
        parse_coords(s, Path::new("t.txt"), Label::GroundTruth)
    }

    #[test]
    fn parses_example() {
        let p = parse("3 4\n10 20\n").unwrap();
        assert_eq!(p.points(), &[Point { x: 3.0, y: 4.0 }, Point { x: 10.0, y: 20.0 }]);
        assert!(parse("").unwrap().is_empty());
        // final newline optional
        assert_eq!(parse("1 2").unwrap().len(), 1);
    }

    #[test]
    fn malformed_lines_report_line_number() {
        for (text, line) in [("1 2\n3\n", 2), ("1  2\n", 1), ("1 2\n-3 4\n", 2), ("1 2\n\n3 4\n", 2), ("1 2 3\n", 1), ("a b\n", 1), ("1.5 2\n", 1)] {
            match parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn rounding_half_away_from_zero() {
        let ps = PointSet::from_xy(&[(2.5, 3.0), (1.49, 0.5), (7.0, 8.0)], Label::Predicted).unwrap();
        let out = serialize_coords(&ps).unwrap();
        assert_eq!(out.text, "3 3\n1 1\n7 8\n");
        assert_eq!(out.rounded, 2);
        let neg = PointSet::from_xy(&[(-1.0, 3.0)], Label::Predicted).unwrap();
        assert!(serialize_coords(&neg).is_err());
    }

    #[test]
    fn manifest_resolves_relative_paths() {
        let m = parse_manifest("a.txt\tb.txt\n\n/abs/p.txt\t/abs/g.txt\n", Path::new("/data/set/manifest.tsv")).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].pred, PathBuf::from("/data/set/a.txt"));
        assert_eq!(m[1].gt, PathBuf::from("/abs/g.txt"));
        assert_eq!(m[1].line, 3);
        assert_eq!(m[0].id(), "a");
        assert!(parse_manifest("only-one-column\n", Path::new("m")).is_err());
    }

    proptest! {
        #[test]
        fn integer_round_trip(coords in prop::collection::vec((0u32..100_000, 0u32..100_000), 0..200)) {
            let pts: Vec<(f64, f64)> = coords.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
            let ps = PointSet::from_xy(&pts, Label::GroundTruth).unwrap();
            let text = serialize_coords(&ps).unwrap();
            prop_assert_eq!(text.rounded, 0);
            let back = parse(&text.text).unwrap();
            prop_assert_eq!(back.points(), ps.points());
            prop_assert_eq!(serialize_coords(&back).unwrap().text, text.text);
        }
    }
}
