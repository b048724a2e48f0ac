use crate::error::{Error, Result};
use crate::numerics::dist;
use crate::points::Points;

/// Discretized curve `φ_0 .. φ_n` with fixed endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    points: Points,
}

impl Path {
    pub fn new(points: Points) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("path", "needs at least two points"));
        }
        if !points.is_finite() {
            return Err(Error::invalid("path", "all points must be finite"));
        }
        Ok(Path { points })
    }

    pub fn straight_line(start: &[f64], end: &[f64], segments: usize) -> Result<Self> {
        if start.len() != end.len() {
            return Err(Error::DimensionMismatch {
                expected: start.len(),
                got: end.len(),
            });
        }
        if segments == 0 {
            return Err(Error::invalid("segments", "must be at least 1"));
        }
        let mut pts = Points::with_capacity(start.len(), segments + 1);
        let mut row = vec![0.0; start.len()];
        for i in 0..=segments {
            let t = i as f64 / segments as f64;
            for j in 0..start.len() {
                row[j] = start[j] + t * (end[j] - start[j]);
            }
            if i == segments {
                row.copy_from_slice(end);
            }
            pts.push(&row);
        }
        Path::new(pts)
    }

    /// Number of segments `n`.
    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub(crate) fn point_mut(&mut self, i: usize) -> &mut [f64] {
        self.points.row_mut(i)
    }

    pub fn start(&self) -> &[f64] {
        self.points.row(0)
    }

    pub fn end(&self) -> &[f64] {
        self.points.row(self.segments())
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn into_points(self) -> Points {
        self.points
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        (0..self.segments())
            .map(|i| dist(self.point(i), self.point(i + 1)))
            .collect()
    }

    pub fn euclidean_length(&self) -> f64 {
        self.segment_lengths().iter().sum()
    }

    /// Copy with every point mapped through `f`.
    pub fn map_points<F: FnMut(&[f64]) -> Vec<f64>>(&self, mut f: F) -> Result<Path> {
        let rows: Vec<Vec<f64>> = self.points.rows().map(|r| f(r)).collect();
        Path::new(Points::from_rows(&rows)?)
    }
}

/// Cursor on a polyline: segment index plus fraction along it.
#[derive(Clone, Copy)]
struct Cursor {
    seg: usize,
    t: f64,
}

fn lerp(a: &[f64], b: &[f64], t: f64, out: &mut [f64]) {
    for j in 0..a.len() {
        out[j] = a[j] + t * (b[j] - a[j]);
    }
}

/// Advances from `from` (located at `cursor`) to the first later point of the
/// polyline whose distance from `from` reaches `chord`. `None` if the
/// polyline ends first.
fn chord_step(path: &Path, from: &[f64], cursor: Cursor, chord: f64, out: &mut [f64]) -> Option<Cursor> {
    let c2 = chord * chord;
    let mut seg = cursor.seg;
    let mut t0 = cursor.t;
    while seg < path.segments() {
        let a = path.point(seg);
        let b = path.point(seg + 1);
        // |a + t (b - a) - from|² = c²  →  qa t² + 2 qb t + qc = 0
        let mut qa = 0.0;
        let mut qb = 0.0;
        let mut qc = 0.0;
        for j in 0..a.len() {
            let d = b[j] - a[j];
            let e = a[j] - from[j];
            qa += d * d;
            qb += d * e;
            qc += e * e;
        }
        qc -= c2;
        if qa > 0.0 {
            let disc = qb * qb - qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                // crossing where the distance is increasing through `chord`
                let t = (-qb + sq) / qa;
                if t >= t0 && t <= 1.0 {
                    lerp(a, b, t, out);
                    return Some(Cursor { seg, t });
                }
            }
        }
        seg += 1;
        t0 = 0.0;
    }
    None
}

/// Walks `steps` chords of length `chord`; returns how many completed.
fn walk(path: &Path, chord: f64, steps: usize, out: Option<&mut Points>) -> usize {
    let d = path.dim();
    let mut cur = path.start().to_vec();
    let mut next = vec![0.0; d];
    let mut cursor = Cursor { seg: 0, t: 0.0 };
    let mut sink = out;
    for k in 0..steps {
        match chord_step(path, &cur, cursor, chord, &mut next) {
            Some(c) => {
                cursor = c;
                std::mem::swap(&mut cur, &mut next);
                if let Some(p) = sink.as_deref_mut() {
                    p.push(&cur);
                }
            }
            None => return k,
        }
    }
    steps
}

/// Points at equal arc-length spacing along the trace.
fn resample_arc_length(path: &Path, segments: usize, total: f64) -> Result<Path> {
    let d = path.dim();
    let mut pts = Points::with_capacity(d, segments + 1);
    pts.push(path.start());
    let mut row = vec![0.0; d];
    let mut seg = 0;
    let mut seg_start = 0.0;
    let mut seg_len = dist(path.point(0), path.point(1));
    for j in 1..segments {
        let target = total * j as f64 / segments as f64;
        while seg + 1 < path.segments() && seg_start + seg_len < target {
            seg_start += seg_len;
            seg += 1;
            seg_len = dist(path.point(seg), path.point(seg + 1));
        }
        let t = if seg_len > 0.0 {
            ((target - seg_start) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        lerp(path.point(seg), path.point(seg + 1), t, &mut row);
        pts.push(&row);
    }
    pts.push(path.end());
    Path::new(pts)
}

/// Resamples onto `segments + 1` points on the polyline trace with equal
/// consecutive Euclidean spacing. Endpoints are preserved exactly.
///
/// Spacing is equal in chord length, which makes the operation idempotent.
/// A trace that folds back on itself can make equal chords unreachable; such
/// inputs get equal arc-length spacing instead.
pub fn resample_uniform(path: &Path, segments: usize) -> Result<Path> {
    if segments == 0 {
        return Err(Error::invalid("segments", "must be at least 1"));
    }
    let total = path.euclidean_length();
    if !(total > 0.0) {
        return Err(Error::ZeroLengthPath);
    }
    if segments == 1 {
        return Path::new(Points::from_rows(&[path.start(), path.end()])?);
    }
    // The arc position reached after `segments` chord steps is monotone in the
    // chord; bisect for the chord that lands exactly on the end point.
    let mut lo = 0.0;
    let mut hi = total / segments as f64;
    if walk(path, hi, segments, None) == segments {
        // only possible for a straight trace: chords equal arcs
        lo = hi;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if walk(path, mid, segments, None) == segments {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let mut pts = Points::with_capacity(path.dim(), segments + 1);
    pts.push(path.start());
    let done = walk(path, lo, segments - 1, Some(&mut pts));
    if done < segments - 1 || !(lo > 0.0) {
        return resample_arc_length(path, segments, total);
    }
    let last = dist(pts.row(segments - 1), path.end());
    if (last - lo).abs() > 1e-10 * lo {
        return resample_arc_length(path, segments, total);
    }
    pts.push(path.end());
    Path::new(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spread(p: &Path) -> f64 {
        let l = p.segment_lengths();
        let max = l.iter().copied().fold(0.0, f64::max);
        let min = l.iter().copied().fold(f64::INFINITY, f64::min);
        (max - min) / max
    }

    #[test]
    fn straight_line_resamples_evenly() {
        let p = Path::straight_line(&[0.0, 0.0], &[3.0, 4.0], 3).unwrap();
        let q = resample_uniform(&p, 10).unwrap();
        assert_eq!(q.segments(), 10);
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            assert!((q.point(i)[0] - 3.0 * t).abs() < 1e-12);
            assert!((q.point(i)[1] - 4.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn unequal_polyline_becomes_equal_spaced() {
        let p = Path::new(
            Points::from_rows(&[[0.0, 0.0], [0.1, 0.0], [2.0, 1.0], [2.0, 3.0], [-1.0, 3.5]]).unwrap(),
        )
        .unwrap();
        for m in [1usize, 2, 7, 50, 333] {
            let q = resample_uniform(&p, m).unwrap();
            assert_eq!(q.start(), p.start());
            assert_eq!(q.end(), p.end());
            assert!(spread(&q) < 1e-9, "m={m}: {}", spread(&q));
        }
    }

    #[test]
    fn resampling_is_idempotent() {
        let p = Path::new(
            Points::from_rows(&[[0.0, 0.0], [1.0, 2.0], [3.0, 2.0], [3.0, -1.0]]).unwrap(),
        )
        .unwrap();
        let a = resample_uniform(&p, 17).unwrap();
        let b = resample_uniform(&a, 17).unwrap();
        for i in 0..=17 {
            assert!(dist(a.point(i), b.point(i)) < 1e-12);
        }
    }

    #[test]
    fn zero_length_is_an_error() {
        let p = Path::straight_line(&[1.0, 1.0], &[1.0, 1.0], 4).unwrap();
        assert!(matches!(resample_uniform(&p, 3), Err(Error::ZeroLengthPath)));
    }

    /// Polylines whose heading turns by less than a right angle in total, so
    /// distance from any vertex grows monotonically along the trace.
    fn gentle_polyline() -> impl Strategy<Value = Path> {
        (
            -3.2f64..3.2,
            prop::collection::vec((0.0f64..2.0, -1.0f64..1.0), 1..15),
        )
            .prop_map(|(heading, steps)| {
                let budget = 1.5 / steps.len() as f64;
                let mut h = heading;
                let mut rows = vec![[0.3, -0.7]];
                for (len, turn) in steps {
                    h += turn * budget;
                    let p = rows[rows.len() - 1];
                    rows.push([p[0] + len * h.cos(), p[1] + len * h.sin()]);
                }
                Path::new(Points::from_rows(&rows).unwrap()).unwrap()
            })
    }

    #[test]
    fn folded_trace_falls_back_to_arc_length() {
        let p = Path::new(
            Points::from_rows(&[[0.2, 0.0], [4.4, 0.0], [0.0, 3.2], [0.0, 0.0], [0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        for m in 1..40 {
            let q = resample_uniform(&p, m).unwrap();
            assert_eq!(q.segments(), m);
            assert_eq!(q.start(), p.start());
            assert_eq!(q.end(), p.end());
        }
    }

    proptest! {
        #[test]
        fn gentle_polylines_get_equal_chords(p in gentle_polyline(), m in 1usize..60) {
            prop_assume!(p.euclidean_length() > 1e-3);
            let q = resample_uniform(&p, m).unwrap();
            prop_assert_eq!(q.segments(), m);
            prop_assert_eq!(q.start(), p.start());
            prop_assert_eq!(q.end(), p.end());
            prop_assert!(spread(&q) < 1e-9);
            let again = resample_uniform(&q, m).unwrap();
            for i in 0..=m {
                prop_assert!(dist(q.point(i), again.point(i)) < 1e-12 * (1.0 + p.euclidean_length()));
            }
        }

        #[test]
        fn any_polyline_keeps_endpoints(
            coords in prop::collection::vec(-5.0f64..5.0, 4..30),
            m in 1usize..60,
        ) {
            let rows: Vec<[f64; 2]> = coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
            let p = Path::new(Points::from_rows(&rows).unwrap()).unwrap();
            prop_assume!(p.euclidean_length() > 1e-3);
            let q = resample_uniform(&p, m).unwrap();
            prop_assert_eq!(q.segments(), m);
            prop_assert_eq!(q.start(), p.start());
            prop_assert_eq!(q.end(), p.end());
        }
    }
}
