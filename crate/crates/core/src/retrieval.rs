//! Silhouette descriptors, pose estimation against a rendered set, pixel
//! co-segmentation scores and candidate / part retrieval.

use std::f64::consts::{PI, TAU};

use nalgebra::{Point2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Mesh;
use crate::render::{
    extract_contour, render_silhouette, CameraPose, ContourLoop, LabeledSilhouette,
    SilhouetteImage, BACKGROUND,
};

pub const RADIAL_BINS: usize = 64;
pub const ANGULAR_BINS: usize = 64;
pub const RUN_BINS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteDescriptor {
    /// Contour length distribution of centroid distances, normalized by the
    /// largest distance.
    pub radial: Vec<f64>,
    /// Foreground pixel distribution over angular sectors around the centroid.
    pub angular: Vec<f64>,
    pub area_ratio: f64,
    pub aspect: f64,
}

impl SilhouetteDescriptor {
    pub fn l1(&self, other: &SilhouetteDescriptor) -> f64 {
        let h: f64 = self
            .radial
            .iter()
            .zip(&other.radial)
            .map(|(a, b)| (a - b).abs())
            .sum();
        let g: f64 = self
            .angular
            .iter()
            .zip(&other.angular)
            .map(|(a, b)| (a - b).abs())
            .sum();
        h + g + (self.area_ratio - other.area_ratio).abs() + (self.aspect - other.aspect).abs()
    }
}

struct Extent {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
    count: usize,
}

fn foreground_extent(img: &SilhouetteImage) -> Option<Extent> {
    let mut e = Extent {
        x0: usize::MAX,
        y0: usize::MAX,
        x1: 0,
        y1: 0,
        count: 0,
    };
    for y in 0..img.height {
        for x in 0..img.width {
            if img.is_foreground(x, y) {
                e.x0 = e.x0.min(x);
                e.y0 = e.y0.min(y);
                e.x1 = e.x1.max(x + 1);
                e.y1 = e.y1.max(y + 1);
                e.count += 1;
            }
        }
    }
    (e.count > 0).then_some(e)
}

/// Computes the descriptor of a mask. All coordinates are taken relative to
/// the foreground bounding box, so integer translations give bitwise equal
/// descriptors.
pub fn descriptor(img: &SilhouetteImage) -> Result<SilhouetteDescriptor> {
    let ext = foreground_extent(img)
        .ok_or_else(|| Error::Empty("silhouette has no foreground".into()))?;
    let sil = extract_contour(img)?;
    let origin = Vector2::new(ext.x0 as f64, ext.y0 as f64);

    // Pixel-center centroid relative to the box corner, from exact integer sums.
    let (mut sx, mut sy) = (0u64, 0u64);
    for y in ext.y0..ext.y1 {
        for x in ext.x0..ext.x1 {
            if img.is_foreground(x, y) {
                sx += (x - ext.x0) as u64;
                sy += (y - ext.y0) as u64;
            }
        }
    }
    let n = ext.count as f64;
    let c = Point2::new(sx as f64 / n + 0.5, sy as f64 / n + 0.5);

    let loops: Vec<Vec<Point2<f64>>> = sil
        .loops
        .iter()
        .map(|l| l.points.iter().map(|p| p - origin).collect())
        .collect();
    let radial = radial_histogram(&loops, &c, RADIAL_BINS);

    let mut angular = vec![0.0; ANGULAR_BINS];
    for y in ext.y0..ext.y1 {
        for x in ext.x0..ext.x1 {
            if img.is_foreground(x, y) {
                let d = Point2::new((x - ext.x0) as f64 + 0.5, (y - ext.y0) as f64 + 0.5) - c;
                let a = d.y.atan2(d.x) + PI;
                let k = ((a / TAU * ANGULAR_BINS as f64) as usize).min(ANGULAR_BINS - 1);
                angular[k] += 1.0;
            }
        }
    }
    angular.iter_mut().for_each(|v| *v /= n);

    Ok(SilhouetteDescriptor {
        radial,
        angular,
        area_ratio: n / (img.width * img.height) as f64,
        aspect: (ext.x1 - ext.x0) as f64 / (ext.y1 - ext.y0) as f64,
    })
}

/// Length-weighted histogram of distances from `c` along polylines, with
/// distances normalized by their maximum. Each segment is split exactly at
/// the bin radii.
fn radial_histogram(polylines: &[Vec<Point2<f64>>], c: &Point2<f64>, bins: usize) -> Vec<f64> {
    let rmax = polylines
        .iter()
        .flatten()
        .map(|p| (p - c).norm())
        .fold(0.0, f64::max);
    let mut hist = vec![0.0; bins];
    if rmax == 0.0 {
        hist[0] = 1.0;
        return hist;
    }
    let mut total = 0.0;
    for pl in polylines {
        for w in pl.windows(2) {
            let (a, d) = (w[0] - c, w[1] - w[0]);
            let len = d.norm();
            if len == 0.0 {
                continue;
            }
            // |a + t d|² = r² ⇒ t² |d|² + 2 t a·d + |a|² − r² = 0
            let (qa, qb) = (d.norm_squared(), 2.0 * a.dot(&d));
            let mut ts = vec![0.0, 1.0];
            for k in 1..bins {
                let r = rmax * k as f64 / bins as f64;
                let disc = qb * qb - 4.0 * qa * (a.norm_squared() - r * r);
                if disc > 0.0 {
                    let s = disc.sqrt();
                    for t in [(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)] {
                        if t > 0.0 && t < 1.0 {
                            ts.push(t);
                        }
                    }
                }
            }
            ts.sort_by(f64::total_cmp);
            for tw in ts.windows(2) {
                let dt = tw[1] - tw[0];
                if dt <= 0.0 {
                    continue;
                }
                let r = (a + d * ((tw[0] + tw[1]) / 2.0)).norm() / rmax;
                let k = ((r * bins as f64) as usize).min(bins - 1);
                hist[k] += dt * len;
                total += dt * len;
            }
        }
    }
    if total > 0.0 {
        hist.iter_mut().for_each(|v| *v /= total);
    } else {
        hist[0] = 1.0;
    }
    hist
}

/// One rendered view with its provenance in the rendered set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedView {
    pub shape: usize,
    pub pose_index: usize,
    pub pose: CameraPose,
    pub descriptor: SilhouetteDescriptor,
}

/// Describes a shape-major rendered set (`images[s * poses.len() + p]`).
pub fn describe_rendered(
    images: &[SilhouetteImage],
    poses: &[CameraPose],
) -> Result<Vec<RenderedView>> {
    if poses.is_empty() || images.len() % poses.len() != 0 {
        return Err(Error::Mismatch(format!(
            "{} images do not form a shape-major set over {} poses",
            images.len(),
            poses.len()
        )));
    }
    images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            Ok(RenderedView {
                shape: i / poses.len(),
                pose_index: i % poses.len(),
                pose: poses[i % poses.len()],
                descriptor: descriptor(img)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPose {
    pub shape: usize,
    pub pose_index: usize,
    pub pose: CameraPose,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub ranking: Vec<RankedPose>,
}

#[derive(Serialize, Deserialize)]
struct PoseRecord {
    shape: usize,
    azimuth_deg: f64,
    elevation_deg: f64,
    score: f64,
}

impl PoseEstimate {
    pub fn best(&self) -> &RankedPose {
        &self.ranking[0]
    }

    pub fn to_json(&self) -> Result<String> {
        let recs: Vec<PoseRecord> = self
            .ranking
            .iter()
            .map(|r| PoseRecord {
                shape: r.shape,
                azimuth_deg: r.pose.azimuth.to_degrees(),
                elevation_deg: r.pose.elevation.to_degrees(),
                score: r.score,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&recs)?)
    }

    pub fn from_json(s: &str) -> Result<PoseEstimate> {
        let recs: Vec<PoseRecord> = serde_json::from_str(s)?;
        if recs.is_empty() {
            return Err(Error::Empty("pose estimate has no entries".into()));
        }
        Ok(PoseEstimate {
            ranking: recs
                .into_iter()
                .enumerate()
                .map(|(i, r)| RankedPose {
                    shape: r.shape,
                    pose_index: i,
                    pose: CameraPose::new(r.azimuth_deg.to_radians(), r.elevation_deg.to_radians()),
                    score: r.score,
                })
                .collect(),
        })
    }
}

/// Ranks the rendered views by L1 descriptor distance to the target.
pub fn estimate_pose(
    target: &SilhouetteImage,
    rendered: &[RenderedView],
    k: usize,
) -> Result<PoseEstimate> {
    estimate_pose_with(&descriptor(target)?, rendered, k)
}

pub fn estimate_pose_with(
    target: &SilhouetteDescriptor,
    rendered: &[RenderedView],
    k: usize,
) -> Result<PoseEstimate> {
    if rendered.is_empty() {
        return Err(Error::Empty("rendered set is empty".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let mut ranking: Vec<RankedPose> = rendered
        .par_iter()
        .map(|v| RankedPose {
            shape: v.shape,
            pose_index: v.pose_index,
            pose: v.pose,
            score: target.l1(&v.descriptor),
        })
        .collect();
    ranking.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then(a.shape.cmp(&b.shape))
            .then(a.pose_index.cmp(&b.pose_index))
    });
    ranking.truncate(k);
    Ok(PoseEstimate { ranking })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulativeScore {
    pub score: f64,
    pub same: usize,
    pub different: usize,
    /// No image had both pixels in the foreground; `score` is then 0.5.
    pub both_background: bool,
}

/// Fraction of images, among those where both pixels are foreground, in
/// which `p` and `q` carry the same part label.
pub fn cumulative_similarity(
    rendered: &[SilhouetteImage],
    p: (usize, usize),
    q: (usize, usize),
) -> Result<CumulativeScore> {
    let Some(first) = rendered.first() else {
        return Err(Error::Empty("no rendered images".into()));
    };
    let (w, h) = (first.width, first.height);
    if rendered.iter().any(|r| r.width != w || r.height != h) {
        return Err(Error::Mismatch(
            "rendered images differ in resolution".into(),
        ));
    }
    if p.0 >= w || p.1 >= h || q.0 >= w || q.1 >= h {
        return Err(Error::InvalidParameter(format!(
            "pixel pair {p:?}, {q:?} outside {w}x{h}"
        )));
    }
    let (mut same, mut different) = (0, 0);
    for img in rendered {
        let (a, b) = (img.get(p.0, p.1), img.get(q.0, q.1));
        if a == BACKGROUND || b == BACKGROUND {
            continue;
        }
        if a == b {
            same += 1;
        } else {
            different += 1;
        }
    }
    let total = same + different;
    Ok(CumulativeScore {
        score: if total == 0 {
            0.5
        } else {
            same as f64 / total as f64
        },
        same,
        different,
        both_background: total == 0,
    })
}

/// Shape summary of a set of contour edges, positioned within a reference box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDescriptor {
    pub radial: Vec<f64>,
    pub log_aspect: f64,
    pub centroid: [f64; 2],
    pub size: [f64; 2],
}

/// Axis-aligned box used to normalize run positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame2 {
    pub min: Point2<f64>,
    pub size: f64,
}

impl Frame2 {
    pub fn of_points<'a>(pts: impl IntoIterator<Item = &'a Point2<f64>>) -> Option<Frame2> {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut any = false;
        for p in pts {
            lo = lo.inf(p);
            hi = hi.sup(p);
            any = true;
        }
        let size = (hi - lo).max();
        (any && size > 0.0).then_some(Frame2 { min: lo, size })
    }
}

impl RunDescriptor {
    /// Describes a set of polylines relative to `frame`.
    pub fn new(polylines: &[Vec<Point2<f64>>], frame: &Frame2) -> Result<RunDescriptor> {
        let mut len = 0.0;
        let mut acc = Vector2::zeros();
        for pl in polylines {
            for w in pl.windows(2) {
                let l = (w[1] - w[0]).norm();
                len += l;
                acc += (w[0].coords + w[1].coords) * (0.5 * l);
            }
        }
        if len == 0.0 {
            return Err(Error::Empty("contour run has zero length".into()));
        }
        let c = Point2::from(acc / len);
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in polylines.iter().flatten() {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let (w, h) = (hi.x - lo.x, hi.y - lo.y);
        let eps = frame.size * 1e-3;
        Ok(RunDescriptor {
            radial: radial_histogram(polylines, &c, RUN_BINS),
            log_aspect: ((w + eps) / (h + eps)).ln(),
            centroid: [
                (c.x - frame.min.x) / frame.size,
                (c.y - frame.min.y) / frame.size,
            ],
            size: [w / frame.size, h / frame.size],
        })
    }

    /// Mean of four terms, each in [0, 1]; the maximum distance is 1.
    pub fn distance(&self, other: &RunDescriptor) -> f64 {
        let hist = self
            .radial
            .iter()
            .zip(&other.radial)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        let aspect = (self.log_aspect - other.log_aspect).abs() / 4.0;
        let pos = ((self.centroid[0] - other.centroid[0]).powi(2)
            + (self.centroid[1] - other.centroid[1]).powi(2))
        .sqrt();
        let size = (self.size[0] - other.size[0]).abs() + (self.size[1] - other.size[1]).abs();
        (hist.min(1.0) + aspect.min(1.0) + pos.min(1.0) + size.min(1.0)) / 4.0
    }
}

/// Edges of each label, as two-point polylines, in label order.
pub fn label_polylines(sil: &LabeledSilhouette) -> Vec<(u16, Vec<Vec<Point2<f64>>>)> {
    let mut by_label: std::collections::BTreeMap<u16, Vec<Vec<Point2<f64>>>> = Default::default();
    for l in &sil.loops {
        for (label, first, len) in l.label_runs() {
            by_label
                .entry(label)
                .or_default()
                .push(run_points(l, first, len));
        }
    }
    by_label.into_iter().collect()
}

/// Points of the run of `len` edges starting at edge `first`.
pub fn run_points(l: &ContourLoop, first: usize, len: usize) -> Vec<Point2<f64>> {
    let n = l.labels.len();
    (0..=len).map(|k| l.points[(first + k) % n]).collect()
}

fn silhouette_frame(sil: &LabeledSilhouette) -> Result<Frame2> {
    Frame2::of_points(sil.loops.iter().flat_map(|l| &l.points))
        .ok_or_else(|| Error::Empty("silhouette has no contour".into()))
}

/// Mean per-label run distance; labels present on only one side count 1.
pub fn labeled_distance(a: &LabeledSilhouette, b: &LabeledSilhouette) -> Result<f64> {
    let (fa, fb) = (silhouette_frame(a)?, silhouette_frame(b)?);
    let la = label_polylines(a);
    let lb = label_polylines(b);
    let mut labels: Vec<u16> = la.iter().chain(&lb).map(|(l, _)| *l).collect();
    labels.sort_unstable();
    labels.dedup();
    let mut total = 0.0;
    for l in &labels {
        let pa = la.iter().find(|(x, _)| x == l);
        let pb = lb.iter().find(|(x, _)| x == l);
        total += match (pa, pb) {
            (Some((_, pa)), Some((_, pb))) => {
                RunDescriptor::new(pa, &fa)?.distance(&RunDescriptor::new(pb, &fb)?)
            }
            _ => 1.0,
        };
    }
    Ok(total / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub model: usize,
    pub distance: f64,
}

/// Renders every library model at `pose` and ranks them by labeled
/// distance to the target; ties keep library order.
pub fn retrieve_candidate(
    target: &LabeledSilhouette,
    library: &[Mesh],
    pose: &CameraPose,
    resolution: usize,
) -> Result<Vec<RankedModel>> {
    if library.is_empty() {
        return Err(Error::Empty("library is empty".into()));
    }
    let mut ranked: Vec<RankedModel> = library
        .par_iter()
        .enumerate()
        .map(|(model, mesh)| {
            let sil = extract_contour(&render_silhouette(mesh, pose, resolution)?)?;
            Ok(RankedModel {
                model,
                distance: labeled_distance(target, &sil)?,
            })
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.model.cmp(&b.model))
    });
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryPart {
    pub model: usize,
    pub part: usize,
    pub run: Vec<Point2<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPart {
    pub model: usize,
    pub part: usize,
    pub distance: f64,
}

/// Ranks library parts by run descriptor distance, each run described in
/// its own bounding frame.
pub fn retrieve_part(query: &[Point2<f64>], parts: &[LibraryPart]) -> Result<Vec<RankedPart>> {
    if parts.is_empty() {
        return Err(Error::Empty("part library is empty".into()));
    }
    let describe = |run: &[Point2<f64>]| -> Result<RunDescriptor> {
        let frame = Frame2::of_points(run)
            .ok_or_else(|| Error::Degenerate("contour run has no extent".into()))?;
        RunDescriptor::new(&[run.to_vec()], &frame)
    };
    let q = describe(query)?;
    let mut ranked = parts
        .iter()
        .map(|p| {
            Ok(RankedPart {
                model: p.model,
                part: p.part,
                distance: q.distance(&describe(&p.run)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then((a.model, a.part).cmp(&(b.model, b.part)))
    });
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{generate_pose_set, pose_grid, render_set};
    use crate::synth;
    use proptest::prelude::*;

    fn disc(w: usize, cx: f64, cy: f64, r: f64) -> SilhouetteImage {
        let mut img = SilhouetteImage::empty(w, w);
        for y in 0..w {
            for x in 0..w {
                if (x as f64 + 0.5 - cx).hypot(y as f64 + 0.5 - cy) <= r {
                    img.labels[y * w + x] = 0;
                }
            }
        }
        img
    }

    fn upscale(img: &SilhouetteImage, f: usize) -> SilhouetteImage {
        let mut out = SilhouetteImage::empty(img.width * f, img.height * f);
        for y in 0..out.height {
            for x in 0..out.width {
                out.labels[y * out.width + x] = img.get(x / f, y / f);
            }
        }
        out
    }

    fn shift(img: &SilhouetteImage, dx: usize, dy: usize) -> SilhouetteImage {
        let mut out = SilhouetteImage::empty(img.width, img.height);
        for y in 0..img.height - dy {
            for x in 0..img.width - dx {
                out.labels[(y + dy) * img.width + x + dx] = img.get(x, y);
            }
        }
        out
    }

    #[test]
    fn disc_histogram_concentrates_near_rim() {
        let d = descriptor(&disc(128, 64.0, 64.0, 40.0)).unwrap();
        assert!((d.radial.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let outer: f64 = d.radial[56..].iter().sum();
        assert!(outer > 0.95, "{outer}");
        assert!((d.aspect - 1.0).abs() < 0.05);
    }

    #[test]
    fn translation_is_bitwise_identical() {
        let chair = synth::chair(&synth::ChairParams::default());
        let img = render_silhouette(&chair, &CameraPose::new(0.6, 0.3), 96).unwrap();
        let mut small = SilhouetteImage::empty(128, 128);
        for y in 0..96 {
            for x in 0..96 {
                small.labels[y * 128 + x] = img.get(x, y);
            }
        }
        assert_eq!(
            descriptor(&small).unwrap(),
            descriptor(&shift(&small, 17, 9)).unwrap()
        );
    }

    #[test]
    fn empty_mask_is_rejected() {
        assert!(matches!(
            descriptor(&SilhouetteImage::empty(8, 8)),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn self_retrieval_and_clamp() {
        let lib = synth::asymmetric_library();
        let poses = pose_grid(8, 3).unwrap();
        let imgs = render_set(&lib, &poses, 96).unwrap();
        let views = describe_rendered(&imgs, &poses).unwrap();
        for (i, img) in imgs.iter().enumerate() {
            let est = estimate_pose(img, &views, 3).unwrap();
            assert_eq!(
                (est.best().shape, est.best().pose_index),
                (i / poses.len(), i % poses.len())
            );
            assert_eq!(est.best().score, 0.0);
            assert!(est.ranking.windows(2).all(|w| w[0].score <= w[1].score));
        }
        let all = estimate_pose(&imgs[0], &views, 10_000).unwrap();
        assert_eq!(all.ranking.len(), imgs.len());
        assert!(estimate_pose(&imgs[0], &[], 1).is_err());
        assert!(estimate_pose(&imgs[0], &views, 0).is_err());
    }

    #[test]
    fn off_grid_pose_retrieves_a_flanking_pose() {
        let lib = vec![synth::asymmetric_library().remove(0)];
        let poses = generate_pose_set(360).unwrap();
        let imgs = render_set(&lib, &poses, 128).unwrap();
        let views = describe_rendered(&imgs, &poses).unwrap();
        let step = TAU / 24.0;
        for a in [3usize, 7, 16] {
            let el_idx = 7; // elevation 0
            let pose = CameraPose::new((a as f64 + 0.5) * step, poses[el_idx * 24].elevation);
            let target = render_silhouette(&lib[0], &pose, 128).unwrap();
            let best = estimate_pose(&target, &views, 1).unwrap().ranking[0].clone();
            let flank = [el_idx * 24 + a, el_idx * 24 + (a + 1) % 24];
            assert!(
                flank.contains(&best.pose_index),
                "azimuth slot {a}: got {}",
                best.pose_index
            );
        }
    }

    #[test]
    fn cumulative_similarity_counts() {
        let mk = |labels: [u16; 2]| {
            let mut img = SilhouetteImage::empty(2, 1);
            img.labels = labels.to_vec();
            img
        };
        let same = vec![mk([0, 0]); 4];
        assert_eq!(
            cumulative_similarity(&same, (0, 0), (1, 0)).unwrap().score,
            1.0
        );
        let diff = vec![mk([0, 1]); 4];
        assert_eq!(
            cumulative_similarity(&diff, (0, 0), (1, 0)).unwrap().score,
            0.0
        );
        let mixed = vec![
            mk([2, 2]),
            mk([1, 1]),
            mk([0, 0]),
            mk([0, 3]),
            mk([BACKGROUND, 0]),
        ];
        let s = cumulative_similarity(&mixed, (0, 0), (1, 0)).unwrap();
        assert_eq!((s.score, s.same, s.different), (0.75, 3, 1));
        let bg = vec![mk([BACKGROUND, 0])];
        let s = cumulative_similarity(&bg, (0, 0), (1, 0)).unwrap();
        assert!(s.both_background && s.score == 0.5);
        let mut odd = vec![mk([0, 0])];
        odd.push(SilhouetteImage::empty(3, 1));
        assert!(matches!(
            cumulative_similarity(&odd, (0, 0), (1, 0)),
            Err(Error::Mismatch(_))
        ));
    }

    #[test]
    fn candidate_retrieval() {
        let lib = synth::symmetric_library();
        let pose = CameraPose::new(0.5, 0.3);
        for (i, m) in lib.iter().enumerate() {
            let target = extract_contour(&render_silhouette(m, &pose, 128).unwrap()).unwrap();
            let r = retrieve_candidate(&target, &lib, &pose, 128).unwrap();
            assert_eq!(r[0].model, i);
            assert_eq!(r[0].distance, 0.0);
        }
        let target = extract_contour(&render_silhouette(&lib[1], &pose, 128).unwrap()).unwrap();
        let one = retrieve_candidate(&target, &lib[..1], &pose, 128).unwrap();
        assert_eq!(one.len(), 1);
        assert!(retrieve_candidate(&target, &[], &pose, 128).is_err());
    }

    #[test]
    fn armchair_target_prefers_armed_chair() {
        let plain = synth::chair(&synth::ChairParams::default());
        let armed = synth::chair(&synth::ChairParams {
            arms: true,
            ..Default::default()
        });
        let target_mesh = synth::chair(&synth::ChairParams {
            arms: true,
            leg_length: 0.5,
            ..Default::default()
        });
        let pose = CameraPose::new(0.6, 0.25);
        let target =
            extract_contour(&render_silhouette(&target_mesh, &pose, 128).unwrap()).unwrap();
        let r = retrieve_candidate(&target, &[plain, armed], &pose, 128).unwrap();
        assert_eq!(r[0].model, 1);
    }

    #[test]
    fn part_retrieval() {
        let leg: Vec<Point2<f64>> =
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 10.0], [0.0, 10.0], [0.0, 0.0]]
                .into_iter()
                .map(Point2::from)
                .collect();
        let seat: Vec<Point2<f64>> =
            vec![[0.0, 0.0], [12.0, 0.0], [12.0, 2.0], [0.0, 2.0], [0.0, 0.0]]
                .into_iter()
                .map(Point2::from)
                .collect();
        let thin: Vec<Point2<f64>> = leg
            .iter()
            .map(|p| Point2::new(p.x * 1.3, p.y * 1.1 + 4.0))
            .collect();
        let parts = vec![
            LibraryPart {
                model: 0,
                part: 0,
                run: seat.clone(),
            },
            LibraryPart {
                model: 0,
                part: 1,
                run: leg.clone(),
            },
        ];
        let r = retrieve_part(&thin, &parts).unwrap();
        assert_eq!(r[0].part, 1);
        let r = retrieve_part(&leg, &parts).unwrap();
        assert_eq!((r[0].part, r[0].distance), (1, 0.0));
        assert_eq!(retrieve_part(&seat, &parts[..1]).unwrap().len(), 1);
        assert!(retrieve_part(&seat, &[]).is_err());
    }

    #[test]
    fn pose_estimate_json() {
        let est = PoseEstimate {
            ranking: vec![RankedPose {
                shape: 2,
                pose_index: 0,
                pose: CameraPose::new(PI / 2.0, PI / 6.0),
                score: 0.25,
            }],
        };
        let v: serde_json::Value = serde_json::from_str(&est.to_json().unwrap()).unwrap();
        assert_eq!(v[0]["shape"], 2);
        assert!((v[0]["azimuth_deg"].as_f64().unwrap() - 90.0).abs() < 1e-9);
        assert!((v[0]["elevation_deg"].as_f64().unwrap() - 30.0).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn integer_scaling_changes_bins_little(
            az in 0.0..TAU, el in -1.0f64..1.0, f in 2usize..4
        ) {
            let chair = synth::chair(&synth::ChairParams::default());
            let img = render_silhouette(&chair, &CameraPose::new(az, el), 64).unwrap();
            let a = descriptor(&img).unwrap();
            let b = descriptor(&upscale(&img, f)).unwrap();
            for (x, y) in a.radial.iter().zip(&b.radial) {
                prop_assert!((x - y).abs() <= 0.02, "{x} vs {y}");
            }
        }

        #[test]
        fn cumulative_similarity_is_symmetric(
            seeds in proptest::collection::vec(0u16..4, 24), px in 0usize..4, py in 0usize..2, qx in 0usize..4, qy in 0usize..2
        ) {
            let imgs: Vec<SilhouetteImage> = seeds.chunks(8).map(|c| {
                let mut img = SilhouetteImage::empty(4, 2);
                img.labels = c.iter().map(|&v| if v == 3 { BACKGROUND } else { v }).collect();
                img
            }).collect();
            let a = cumulative_similarity(&imgs, (px, py), (qx, qy)).unwrap();
            let b = cumulative_similarity(&imgs, (qx, qy), (px, py)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn histogram_is_a_distribution(r in 3.0f64..30.0, cx in 30.0f64..34.0) {
            let d = descriptor(&disc(64, cx, 32.0, r)).unwrap();
            prop_assert!((d.radial.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(d.radial.iter().all(|&v| v >= 0.0));
            prop_assert!((d.angular.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
