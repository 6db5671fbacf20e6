//! Contour parameterization, cyclic point alignment, segment lifting and
//! label transfer between a candidate silhouette and an object silhouette.

use nalgebra::{Point2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Mesh;
use crate::render::{
    extract_contour_raw, label_runs, render_silhouette, signed_area, CameraPose, ContourLoop,
    LabeledSilhouette,
};

/// Default number of samples per contour loop.
pub const DEFAULT_SAMPLES: usize = 128;
/// Shortest label run kept when lifting or transferring labels.
pub const MIN_RUN: usize = 3;

/// A closed contour resampled uniformly in arc length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourParam {
    pub points: Vec<Point2<f64>>,
    /// Normalized arc position `i / n`.
    pub arc: Vec<f64>,
    /// Signed turning angle at each sample.
    pub turning: Vec<f64>,
    /// Label of the edge each sample lies on, when the source was labeled.
    pub labels: Option<Vec<u16>>,
    /// Whether the source loop was reversed to make it positively oriented.
    pub reversed: bool,
}

impl ContourParam {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Resamples a closed polyline (`points[0] == points[last]`).
pub fn parameterize_points(points: &[Point2<f64>], n: usize) -> Result<ContourParam> {
    parameterize_impl(points, None, n)
}

pub fn parameterize(l: &ContourLoop, n: usize) -> Result<ContourParam> {
    parameterize_impl(&l.points, Some(&l.labels), n)
}

fn parameterize_impl(
    points: &[Point2<f64>],
    labels: Option<&[u16]>,
    n: usize,
) -> Result<ContourParam> {
    if n < 8 {
        return Err(Error::InvalidParameter(format!("{n} samples < 8")));
    }
    if points.len() < 4 || points[0] != points[points.len() - 1] {
        return Err(Error::InvalidParameter(
            "contour loop must be closed with at least 3 points".into(),
        ));
    }
    let area = signed_area(points);
    if area == 0.0 {
        return Err(Error::Degenerate("contour loop encloses no area".into()));
    }
    let reversed = area < 0.0;
    let mut pts = points.to_vec();
    let mut labs = labels.map(<[u16]>::to_vec);
    if reversed {
        pts.reverse();
        if let Some(l) = labs.as_mut() {
            l.reverse();
        }
    }
    let m = pts.len() - 1;
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    for i in 0..m {
        cum.push(cum[i] + (pts[i + 1] - pts[i]).norm());
    }
    let total = cum[m];
    let mut samples = Vec::with_capacity(n);
    let mut sample_labels = Vec::with_capacity(n);
    let mut seg = 0;
    for i in 0..n {
        let s = total * i as f64 / n as f64;
        while seg + 1 < m && cum[seg + 1] <= s {
            seg += 1;
        }
        while cum[seg + 1] - cum[seg] == 0.0 && seg + 1 < m {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 {
            ((s - cum[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        samples.push(pts[seg] + (pts[seg + 1] - pts[seg]) * t);
        if let Some(l) = &labs {
            sample_labels.push(l[seg]);
        }
    }
    let turning = (0..n)
        .map(|i| {
            let a = samples[i] - samples[(i + n - 1) % n];
            let b = samples[(i + 1) % n] - samples[i];
            a.perp(&b).atan2(a.dot(&b))
        })
        .collect();
    Ok(ContourParam {
        points: samples,
        arc: (0..n).map(|i| i as f64 / n as f64).collect(),
        turning,
        labels: labs.map(|_| sample_labels),
        reversed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCorrespondence {
    /// `(index in a, index in b)` along the alignment path.
    pub pairs: Vec<[usize; 2]>,
    pub cost: f64,
}

/// Which sequence was rotated for the winning alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Rotated {
    B,
    A,
}

/// Local cost between sample `i` of a length-`na` sequence and sample `j`
/// of a length-`nb` sequence, both positions relative to their start.
#[inline]
fn local(i: usize, na: usize, ti: f64, j: usize, nb: usize, tj: f64) -> f64 {
    let ds = i as f64 / na as f64 - j as f64 / nb as f64;
    let dt = ti - tj;
    ds * ds + dt * dt
}

/// Anchored alignment of `ta` (from its index 0) against `tb` started at
/// `offset`. Returns the path cost and, optionally, the path.
fn anchored(ta: &[f64], tb: &[f64], offset: usize, with_path: bool) -> (f64, Vec<[usize; 2]>) {
    let (na, nb) = (ta.len(), tb.len());
    let mut d = vec![f64::INFINITY; na * nb];
    for i in 0..na {
        for j in 0..nb {
            let c = local(i, na, ta[i], j, nb, tb[(offset + j) % nb]);
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let mut best = f64::INFINITY;
                if i > 0 && j > 0 {
                    best = d[(i - 1) * nb + j - 1];
                }
                if i > 0 {
                    best = best.min(d[(i - 1) * nb + j]);
                }
                if j > 0 {
                    best = best.min(d[i * nb + j - 1]);
                }
                best
            };
            d[i * nb + j] = prev + c;
        }
    }
    let cost = d[na * nb - 1];
    if !with_path {
        return (cost, vec![]);
    }
    let mut path = vec![[na - 1, nb - 1]];
    let (mut i, mut j) = (na - 1, nb - 1);
    while i > 0 || j > 0 {
        let diag = (i > 0 && j > 0).then(|| d[(i - 1) * nb + j - 1]);
        let up = (i > 0).then(|| d[(i - 1) * nb + j]);
        let left = (j > 0).then(|| d[i * nb + j - 1]);
        let m = [diag, up, left]
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, f64::min);
        if diag == Some(m) {
            i -= 1;
            j -= 1;
        } else if up == Some(m) {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push([i, j]);
    }
    path.reverse();
    (cost, path)
}

/// Minimal-cost cyclically monotone alignment. Candidates are every
/// rotation of `b` against `a` and every rotation of `a` against `b`, each
/// solved by anchored dynamic time warping on (relative arc position,
/// turning angle). The candidate set is closed under swapping the inputs,
/// so the cost is symmetric. Ties prefer rotating `b`, then the smaller
/// offset.
pub fn match_points(a: &ContourParam, b: &ContourParam) -> Result<PointCorrespondence> {
    if a.len() < 8 || b.len() < 8 {
        return Err(Error::InvalidParameter(
            "contours need at least 8 samples".into(),
        ));
    }
    let cands: Vec<(Rotated, usize)> = (0..b.len())
        .map(|o| (Rotated::B, o))
        .chain((1..a.len()).map(|o| (Rotated::A, o)))
        .collect();
    let costs: Vec<f64> = cands
        .par_iter()
        .map(|&(r, o)| match r {
            Rotated::B => anchored(&a.turning, &b.turning, o, false).0,
            Rotated::A => anchored(&b.turning, &a.turning, o, false).0,
        })
        .collect();
    let best = (0..cands.len())
        .min_by(|&x, &y| costs[x].total_cmp(&costs[y]).then(cands[x].cmp(&cands[y])))
        .unwrap();
    let (rot, offset) = cands[best];
    let pairs = match rot {
        Rotated::B => {
            let (_, path) = anchored(&a.turning, &b.turning, offset, true);
            path.into_iter()
                .map(|[i, j]| [i, (j + offset) % b.len()])
                .collect()
        }
        Rotated::A => {
            let (_, path) = anchored(&b.turning, &a.turning, offset, true);
            let mut p: Vec<[usize; 2]> = path
                .into_iter()
                .map(|[j, i]| [(i + offset) % a.len(), j])
                .collect();
            // Restart the path at a's sample 0 so pairs run in a's order.
            let k = p.iter().position(|q| q[0] == 0).unwrap_or(0);
            p.rotate_left(k);
            p
        }
    };
    Ok(PointCorrespondence {
        pairs,
        cost: costs[best],
    })
}

/// Cost of aligning `ta` anchored at 0 with `tb` rotated by `offset`
/// along a given monotone path; used by exhaustive checks.
pub fn path_cost(ta: &[f64], tb: &[f64], offset: usize, path: &[[usize; 2]]) -> f64 {
    let (na, nb) = (ta.len(), tb.len());
    path.iter().fold(0.0, |acc, &[i, j]| {
        acc + local(i, na, ta[i], j, nb, tb[(offset + j) % nb])
    })
}

/// Cyclic index interval `start, start+1, …, start+len−1 (mod n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub len: usize,
}

impl Interval {
    pub fn indices(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        let s = self.start;
        (0..self.len).map(move |k| (s + k) % n)
    }

    pub fn contains(&self, i: usize, n: usize) -> bool {
        (i + n - self.start) % n < self.len
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPair {
    pub label: u16,
    /// Run `r_C` on the candidate samples.
    pub candidate: Interval,
    /// Run `r_O` on the object samples, absent when it maps to fewer than
    /// [`MIN_RUN`] samples.
    pub object: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentCorrespondence {
    pub pairs: Vec<SegmentPair>,
}

impl SegmentCorrespondence {
    pub fn matched(&self) -> impl Iterator<Item = (&SegmentPair, Interval)> {
        self.pairs.iter().filter_map(|p| p.object.map(|o| (p, o)))
    }
}

/// Maps every maximal same-label run of the candidate samples to the object
/// interval its samples align with.
pub fn lift_to_segments(
    corr: &PointCorrespondence,
    candidate_labels: &[u16],
    object: &ContourParam,
) -> Result<SegmentCorrespondence> {
    let na = candidate_labels.len();
    let nb = object.len();
    let mut first = vec![usize::MAX; na];
    let mut last = vec![usize::MAX; na];
    for &[i, j] in &corr.pairs {
        if i >= na || j >= nb {
            return Err(Error::Mismatch("correspondence index out of range".into()));
        }
        if first[i] == usize::MAX {
            first[i] = j;
        }
        last[i] = j;
    }
    if first.contains(&usize::MAX) {
        return Err(Error::Mismatch(
            "correspondence does not cover every candidate sample".into(),
        ));
    }
    let pairs = label_runs(candidate_labels)
        .into_iter()
        .map(|(label, start, len)| {
            let from = first[start];
            let to = last[(start + len - 1) % na];
            let span = if len == na {
                nb
            } else {
                (to + nb - from) % nb + 1
            };
            SegmentPair {
                label,
                candidate: Interval { start, len },
                object: (span >= MIN_RUN).then_some(Interval {
                    start: from,
                    len: span,
                }),
            }
        })
        .collect();
    Ok(SegmentCorrespondence { pairs })
}

/// Area centroid and signed area of a set of closed loops.
pub fn loops_centroid(loops: &[ContourLoop]) -> Option<(Point2<f64>, f64)> {
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for l in loops {
        for w in l.points.windows(2) {
            let cr = w[0].x * w[1].y - w[1].x * w[0].y;
            a += cr;
            cx += (w[0].x + w[1].x) * cr;
            cy += (w[0].y + w[1].y) * cr;
        }
    }
    (a != 0.0).then(|| (Point2::new(cx / (3.0 * a), cy / (3.0 * a)), a / 2.0))
}

/// Splits every edge into equal pieces no longer than one pixel.
pub fn densify(l: &ContourLoop) -> ContourLoop {
    let mut points = vec![l.points[0]];
    let mut labels = Vec::new();
    for (k, w) in l.points.windows(2).enumerate() {
        let pieces = (((w[1] - w[0]).norm() - 1e-9).ceil() as usize).max(1);
        for s in 1..=pieces {
            points.push(if s == pieces {
                w[1]
            } else {
                w[0] + (w[1] - w[0]) * (s as f64 / pieces as f64)
            });
            labels.push(l.labels.get(k).copied().unwrap_or(0));
        }
    }
    ContourLoop { points, labels }
}

fn segment_distance_sq(p: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + d * t - p).norm_squared()
}

/// Replaces runs shorter than [`MIN_RUN`] edges with the label of their
/// longer neighbour run (the previous one on ties), shortest runs first.
pub fn absorb_short_runs(labels: &mut [u16]) {
    loop {
        let runs = label_runs(labels);
        if runs.len() < 2 {
            return;
        }
        let Some(k) = (0..runs.len())
            .filter(|&k| runs[k].2 < MIN_RUN)
            .min_by_key(|&k| (runs[k].2, runs[k].1))
        else {
            return;
        };
        let prev = runs[(k + runs.len() - 1) % runs.len()];
        let next = runs[(k + 1) % runs.len()];
        let label = if next.2 > prev.2 { next.0 } else { prev.0 };
        let n = labels.len();
        for e in 0..runs[k].2 {
            labels[(runs[k].1 + e) % n] = label;
        }
    }
}

/// Labels each target contour edge with the nearest edge of the
/// representative's render at `pose`, after aligning both silhouettes by
/// area centroid and the square root of their area. The result has
/// unit-length edges.
pub fn transfer_labels(
    representative: &Mesh,
    pose: &CameraPose,
    resolution: usize,
    target: &LabeledSilhouette,
) -> Result<LabeledSilhouette> {
    if target.loops.is_empty() {
        return Err(Error::Empty("target silhouette has no contour".into()));
    }
    let rendered = extract_contour_raw(&render_silhouette(representative, pose, resolution)?)?;
    transfer_from(&rendered, target)
}

/// Label transfer from an already traced labeled silhouette.
pub fn transfer_from(
    source: &LabeledSilhouette,
    target: &LabeledSilhouette,
) -> Result<LabeledSilhouette> {
    let (cs, as_) = loops_centroid(&source.loops)
        .ok_or_else(|| Error::Degenerate("source has no area".into()))?;
    let (ct, at) = loops_centroid(&target.loops)
        .ok_or_else(|| Error::Degenerate("target has no area".into()))?;
    let scale = (as_.abs() / at.abs()).sqrt();
    let edges: Vec<(Point2<f64>, Point2<f64>, u16)> = source
        .loops
        .iter()
        .flat_map(|l| {
            l.points
                .windows(2)
                .zip(&l.labels)
                .map(|(w, &lab)| (w[0], w[1], lab))
        })
        .collect();
    let loops = target
        .loops
        .par_iter()
        .map(|l| {
            let mut d = densify(l);
            let mapped: Vec<Point2<f64>> = d.points.iter().map(|p| cs + (p - ct) * scale).collect();
            for (k, lab) in d.labels.iter_mut().enumerate() {
                let mid = nalgebra::center(&mapped[k], &mapped[k + 1]);
                let mut best = (f64::INFINITY, 0u16);
                for (a, b, l) in &edges {
                    let dist = segment_distance_sq(&mid, a, b);
                    if dist < best.0 {
                        best = (dist, *l);
                    }
                }
                *lab = best.1;
            }
            absorb_short_runs(&mut d.labels);
            d
        })
        .collect();
    Ok(LabeledSilhouette {
        width: target.width,
        height: target.height,
        loops,
    })
}

/// Pairs every loop of `a` with a loop of `b` of the same orientation,
/// greedily by centroid distance relative to size, largest loops first.
pub fn match_loops(a: &LabeledSilhouette, b: &LabeledSilhouette) -> Vec<(usize, usize)> {
    let info = |s: &LabeledSilhouette| -> Vec<(Point2<f64>, f64)> {
        s.loops
            .iter()
            .map(|l| loops_centroid(std::slice::from_ref(l)).unwrap_or((l.points[0], 0.0)))
            .collect()
    };
    let (ia, ib) = (info(a), info(b));
    let norm =
        |s: &[(Point2<f64>, f64)]| s.iter().map(|x| x.1.abs()).sum::<f64>().sqrt().max(1e-12);
    let (na, nb) = (norm(&ia), norm(&ib));
    let ca = weighted_center(&ia);
    let cb = weighted_center(&ib);
    let mut order: Vec<usize> = (0..ia.len()).collect();
    order.sort_by(|&x, &y| ia[y].1.abs().total_cmp(&ia[x].1.abs()).then(x.cmp(&y)));
    let mut used = vec![false; ib.len()];
    let mut out = Vec::new();
    for i in order {
        let pa: Vector2<f64> = (ia[i].0 - ca) / na;
        let best = (0..ib.len())
            .filter(|&j| !used[j] && (ia[i].1 > 0.0) == (ib[j].1 > 0.0))
            .min_by(|&x, &y| {
                let dx = ((ib[x].0 - cb) / nb - pa).norm()
                    + (ia[i].1.abs() / na / na - ib[x].1.abs() / nb / nb).abs();
                let dy = ((ib[y].0 - cb) / nb - pa).norm()
                    + (ia[i].1.abs() / na / na - ib[y].1.abs() / nb / nb).abs();
                dx.total_cmp(&dy).then(x.cmp(&y))
            });
        if let Some(j) = best {
            used[j] = true;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

fn weighted_center(info: &[(Point2<f64>, f64)]) -> Point2<f64> {
    let (mut c, mut w) = (Vector2::zeros(), 0.0);
    for (p, a) in info {
        c += p.coords * *a;
        w += *a;
    }
    if w == 0.0 {
        Point2::origin()
    } else {
        Point2::from(c / w)
    }
}
