//! Orthographic z-buffered silhouette rendering, pose grids and pixel-edge
//! contour tracing.
//!
//! Pixel `(x, y)` covers `[x, x+1] × [y, y+1]`, with y growing downwards.
//! Contour loops are oriented so that outer boundaries have positive signed
//! (shoelace) area in these pixel coordinates and holes negative area.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_3, TAU};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Point2, Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Mesh;

/// Label value of background pixels.
pub const BACKGROUND: u16 = u16::MAX;
/// Default render resolution in pixels.
pub const DEFAULT_RESOLUTION: usize = 256;
/// Default pose-set size.
pub const DEFAULT_POSES: usize = 360;
/// Camera distance used by generated pose grids.
pub const POSE_DISTANCE: f64 = 3.0;
/// Fraction of the image the projected bounding square fills under auto framing.
pub const FILL: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    /// Model units per pixel; `None` frames each render automatically.
    pub ortho_scale: Option<f64>,
}

/// Orthonormal camera basis: `right`, `up` span the image plane and
/// `back` points from the look-at point towards the camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraBasis {
    pub right: Vector3<f64>,
    pub up: Vector3<f64>,
    pub back: Vector3<f64>,
}

impl CameraPose {
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        CameraPose {
            azimuth: azimuth.rem_euclid(TAU),
            elevation,
            distance: POSE_DISTANCE,
            ortho_scale: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(-std::f64::consts::FRAC_PI_2..=std::f64::consts::FRAC_PI_2).contains(&self.elevation)
            || !(0.0..TAU).contains(&self.azimuth)
            || !(self.distance > 0.0)
            || self.ortho_scale.is_some_and(|s| !(s > 0.0))
        {
            return Err(Error::InvalidParameter(format!(
                "invalid camera pose {self:?}"
            )));
        }
        Ok(())
    }

    /// Look-at the origin with +y up. Azimuth 0, elevation 0 looks from +z.
    pub fn basis(&self) -> CameraBasis {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        CameraBasis {
            right: Vector3::new(ca, 0.0, -sa),
            up: Vector3::new(-se * sa, ce, -se * ca),
            back: Vector3::new(ce * sa, se, ce * ca),
        }
    }

    /// Unit vector along which the camera looks.
    pub fn view_dir(&self) -> Vector3<f64> {
        -self.basis().back
    }

    pub fn position(&self) -> Point3<f64> {
        Point3::from(self.basis().back * self.distance)
    }
}

/// Maps image-plane coordinates to pixels:
/// `px = w/2 + (p·right − center_u) / scale`, `py = h/2 − (p·up − center_v) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Framing {
    pub scale: f64,
    pub center_u: f64,
    pub center_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projector {
    pub basis_right: Vector3<f64>,
    pub basis_up: Vector3<f64>,
    pub basis_back: Vector3<f64>,
    pub framing: Framing,
    pub width: usize,
    pub height: usize,
}

impl Projector {
    pub fn new(pose: &CameraPose, framing: Framing, width: usize, height: usize) -> Self {
        let b = pose.basis();
        Projector {
            basis_right: b.right,
            basis_up: b.up,
            basis_back: b.back,
            framing,
            width,
            height,
        }
    }

    /// Pixel coordinates and depth (larger is nearer the camera).
    pub fn project(&self, p: &Point3<f64>) -> (Point2<f64>, f64) {
        let f = &self.framing;
        let u = self.basis_right.dot(&p.coords);
        let v = self.basis_up.dot(&p.coords);
        (
            Point2::new(
                self.width as f64 / 2.0 + (u - f.center_u) / f.scale,
                self.height as f64 / 2.0 - (v - f.center_v) / f.scale,
            ),
            self.basis_back.dot(&p.coords),
        )
    }

    /// Point on the viewing ray through pixel `q` at the given depth.
    pub fn unproject(&self, q: &Point2<f64>, depth: f64) -> Point3<f64> {
        let f = &self.framing;
        let u = f.center_u + (q.x - self.width as f64 / 2.0) * f.scale;
        let v = f.center_v - (q.y - self.height as f64 / 2.0) * f.scale;
        Point3::from(self.basis_right * u + self.basis_up * v + self.basis_back * depth)
    }
}

/// Framing that fits the mesh's projected bounding square into `FILL` of the image.
pub fn auto_framing(mesh: &Mesh, pose: &CameraPose, resolution: usize) -> Result<Framing> {
    let b = pose.basis();
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in &mesh.vertices {
        let (u, w) = (b.right.dot(&v.coords), b.up.dot(&v.coords));
        lo = (lo.0.min(u), lo.1.min(w));
        hi = (hi.0.max(u), hi.1.max(w));
    }
    let side = (hi.0 - lo.0).max(hi.1 - lo.1);
    if !(side > 0.0) {
        return Err(Error::Degenerate("mesh projects to a point".into()));
    }
    Ok(Framing {
        scale: side / (FILL * resolution as f64),
        center_u: (lo.0 + hi.0) / 2.0,
        center_v: (lo.1 + hi.1) / 2.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteImage {
    pub width: usize,
    pub height: usize,
    /// Row-major part labels, [`BACKGROUND`] for empty pixels.
    pub labels: Vec<u16>,
    /// Camera mapping used to produce the image, if rendered.
    pub projector: Option<Projector>,
}

impl SilhouetteImage {
    pub fn empty(width: usize, height: usize) -> Self {
        SilhouetteImage {
            width,
            height,
            labels: vec![BACKGROUND; width * height],
            projector: None,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.labels[y * self.width + x]
    }

    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.get(x, y) != BACKGROUND
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != BACKGROUND).count()
    }

    /// Copy with every foreground pixel set to label 0.
    pub fn to_mask(&self) -> SilhouetteImage {
        SilhouetteImage {
            labels: self
                .labels
                .iter()
                .map(|&l| if l == BACKGROUND { BACKGROUND } else { 0 })
                .collect(),
            ..self.clone()
        }
    }
}

/// Renders the part-label silhouette of `mesh`. Framing comes from the
/// pose's orthographic scale when set (centered on the origin), otherwise
/// from [`auto_framing`].
pub fn render_silhouette(
    mesh: &Mesh,
    pose: &CameraPose,
    resolution: usize,
) -> Result<SilhouetteImage> {
    if mesh.is_empty() {
        return Err(Error::Empty("cannot render an empty mesh".into()));
    }
    if resolution < 8 {
        return Err(Error::InvalidParameter(format!(
            "resolution {resolution} < 8"
        )));
    }
    pose.validate()?;
    let framing = match pose.ortho_scale {
        Some(scale) => Framing {
            scale,
            center_u: 0.0,
            center_v: 0.0,
        },
        None => auto_framing(mesh, pose, resolution)?,
    };
    Ok(rasterize(
        mesh,
        &Projector::new(pose, framing, resolution, resolution),
    ))
}

/// Z-buffered rasterization of every face with the given projector.
/// Pixels are sampled at their centers; the nearest face wins and equal
/// depths keep the earlier face.
pub fn rasterize(mesh: &Mesh, proj: &Projector) -> SilhouetteImage {
    let (w, h) = (proj.width, proj.height);
    let mut img = SilhouetteImage::empty(w, h);
    let mut depth = vec![f64::NEG_INFINITY; w * h];
    let projected: Vec<(Point2<f64>, f64)> =
        mesh.vertices.iter().map(|v| proj.project(v)).collect();
    for (f, &part) in mesh.faces.iter().zip(&mesh.face_part) {
        let [a, b, c] = f.map(|i| projected[i]);
        let area = edge(&a.0, &b.0, &c.0);
        if area == 0.0 {
            continue;
        }
        let xmin = a.0.x.min(b.0.x).min(c.0.x).floor().max(0.0) as usize;
        let ymin = a.0.y.min(b.0.y).min(c.0.y).floor().max(0.0) as usize;
        let xmax = (a.0.x.max(b.0.x).max(c.0.x).ceil().max(0.0) as usize).min(w);
        let ymax = (a.0.y.max(b.0.y).max(c.0.y).ceil().max(0.0) as usize).min(h);
        for y in ymin..ymax {
            for x in xmin..xmax {
                let p = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
                let w0 = edge(&b.0, &c.0, &p) / area;
                let w1 = edge(&c.0, &a.0, &p) / area;
                let w2 = edge(&a.0, &b.0, &p) / area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let z = w0 * a.1 + w1 * b.1 + w2 * c.1;
                let i = y * w + x;
                if z > depth[i] {
                    depth[i] = z;
                    img.labels[i] = part as u16;
                }
            }
        }
    }
    img.projector = Some(proj.clone());
    img
}

fn edge(a: &Point2<f64>, b: &Point2<f64>, p: &Point2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Renders every (shape, pose) pair, shape-major.
pub fn render_set(
    shapes: &[Mesh],
    poses: &[CameraPose],
    resolution: usize,
) -> Result<Vec<SilhouetteImage>> {
    let pairs: Vec<(usize, usize)> = (0..shapes.len())
        .flat_map(|s| (0..poses.len()).map(move |p| (s, p)))
        .collect();
    pairs
        .par_iter()
        .map(|&(s, p)| render_silhouette(&shapes[s], &poses[p], resolution))
        .collect()
}

/// Azimuth × elevation grid, elevation-major. Elevations run from +60° down
/// to −60° (a single elevation is 0); azimuths start at 0.
pub fn pose_grid(azimuths: usize, elevations: usize) -> Result<Vec<CameraPose>> {
    if azimuths == 0 || elevations == 0 {
        return Err(Error::InvalidParameter(
            "pose grid needs at least one row and column".into(),
        ));
    }
    let mut out = Vec::with_capacity(azimuths * elevations);
    for e in 0..elevations {
        let el = if elevations == 1 {
            0.0
        } else {
            FRAC_PI_3 - 2.0 * FRAC_PI_3 * e as f64 / (elevations - 1) as f64
        };
        for a in 0..azimuths {
            out.push(CameraPose::new(TAU * a as f64 / azimuths as f64, el));
        }
    }
    Ok(out)
}

/// Grid shape for `n` poses: the factorization `azimuths × elevations` with
/// aspect `azimuths / elevations` in [1, 4] closest to 1.6 (24 × 15 for 360).
pub fn grid_shape(n: usize) -> Result<(usize, usize)> {
    if n == 0 {
        return Err(Error::InvalidParameter("pose count must be >= 1".into()));
    }
    let pairs: Vec<(usize, usize)> = (1..=n).filter(|e| n % e == 0).map(|e| (n / e, e)).collect();
    pairs
        .iter()
        .filter(|(a, e)| *a >= *e && *a <= 4 * *e)
        .min_by(|x, y| {
            let d = |(a, e): &(usize, usize)| (*a as f64 / *e as f64 - 1.6).abs();
            d(x).total_cmp(&d(y))
        })
        .copied()
        .ok_or_else(|| {
            let listed: Vec<String> = pairs.iter().map(|(a, e)| format!("{a}x{e}")).collect();
            Error::InvalidParameter(format!(
                "{n} poses cannot form a grid with azimuths/elevations in [1, 4]; factorizations: {}",
                listed.join(", ")
            ))
        })
}

pub fn generate_pose_set(n: usize) -> Result<Vec<CameraPose>> {
    let (a, e) = grid_shape(n)?;
    pose_grid(a, e)
}

/// One closed contour: `points[0] == points[last]`, `labels[i]` belongs to
/// the edge `points[i] → points[i+1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourLoop {
    pub points: Vec<Point2<f64>>,
    pub labels: Vec<u16>,
}

impl ContourLoop {
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    pub fn edge_count(&self) -> usize {
        self.labels.len()
    }

    pub fn perimeter(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Maximal same-label runs of edges as `(label, first edge, edge count)`,
    /// rotated so no run straddles the loop start (unless a single label).
    pub fn label_runs(&self) -> Vec<(u16, usize, usize)> {
        label_runs(&self.labels)
    }
}

pub(crate) fn label_runs(labels: &[u16]) -> Vec<(u16, usize, usize)> {
    let n = labels.len();
    if n == 0 {
        return vec![];
    }
    let Some(start) = (0..n).find(|&i| labels[i] != labels[(i + n - 1) % n]) else {
        return vec![(labels[0], 0, n)];
    };
    let mut runs = Vec::new();
    let mut i = 0;
    while i < n {
        let first = (start + i) % n;
        let l = labels[first];
        let mut len = 1;
        while i + len < n && labels[(start + i + len) % n] == l {
            len += 1;
        }
        runs.push((l, first, len));
        i += len;
    }
    runs
}

pub fn signed_area(points: &[Point2<f64>]) -> f64 {
    points
        .windows(2)
        .map(|w| w[0].x * w[1].y - w[1].x * w[0].y)
        .sum::<f64>()
        * 0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSilhouette {
    pub width: usize,
    pub height: usize,
    pub loops: Vec<ContourLoop>,
}

impl LabeledSilhouette {
    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.loops.iter().enumerate() {
            let n = l.points.len();
            if n < 4 || l.points[0] != l.points[n - 1] || l.labels.len() != n - 1 {
                return Err(Error::InvalidParameter(format!(
                    "loop {i} is not a closed labeled polyline"
                )));
            }
        }
        Ok(())
    }

    /// Largest positive-area loop.
    pub fn outer_loop(&self) -> Option<&ContourLoop> {
        self.loops
            .iter()
            .filter(|l| l.signed_area() > 0.0)
            .max_by(|a, b| a.signed_area().total_cmp(&b.signed_area()))
    }
}

/// Traces pixel-edge boundaries of the foreground. Each edge carries the
/// label of the foreground pixel it bounds; diagonal pixel contacts are
/// kept apart (4-connectivity). Collinear runs of equally labeled edges are
/// merged.
pub fn extract_contour(img: &SilhouetteImage) -> Result<LabeledSilhouette> {
    let loops = trace_loops(img)?;
    Ok(LabeledSilhouette {
        width: img.width,
        height: img.height,
        loops: loops.into_iter().map(|l| simplify_loop(&l)).collect(),
    })
}

/// Like [`extract_contour`] but keeps every unit pixel edge.
pub fn extract_contour_raw(img: &SilhouetteImage) -> Result<LabeledSilhouette> {
    Ok(LabeledSilhouette {
        width: img.width,
        height: img.height,
        loops: trace_loops(img)?,
    })
}

fn trace_loops(img: &SilhouetteImage) -> Result<Vec<ContourLoop>> {
    let (w, h) = (img.width, img.height);
    let fg = |x: i64, y: i64| -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < w
            && (y as usize) < h
            && img.is_foreground(x as usize, y as usize)
    };
    // Directed unit edges keyed by start vertex; value: (dx, dy, label).
    let mut out_edges: BTreeMap<(i64, i64), Vec<(i64, i64, u16, bool)>> = BTreeMap::new();
    let mut starts: Vec<(i64, i64)> = Vec::new();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if !fg(x, y) {
                continue;
            }
            let l = img.get(x as usize, y as usize);
            let sides = [
                (!fg(x, y - 1), (x, y), (1, 0)),
                (!fg(x + 1, y), (x + 1, y), (0, 1)),
                (!fg(x, y + 1), (x + 1, y + 1), (-1, 0)),
                (!fg(x - 1, y), (x, y + 1), (0, -1)),
            ];
            for (open, start, (dx, dy)) in sides {
                if open {
                    out_edges.entry(start).or_default().push((dx, dy, l, false));
                    starts.push(start);
                }
            }
        }
    }
    if starts.is_empty() {
        return Err(Error::Empty("silhouette has no foreground".into()));
    }
    let mut loops = Vec::new();
    for s in starts {
        let Some(first) = out_edges.get(&s).and_then(|v| v.iter().position(|e| !e.3)) else {
            continue;
        };
        let mut points = vec![Point2::new(s.0 as f64, s.1 as f64)];
        let mut labels = Vec::new();
        let mut at = s;
        let mut idx = first;
        loop {
            let e = &mut out_edges.get_mut(&at).unwrap()[idx];
            e.3 = true;
            let (dx, dy, l) = (e.0, e.1, e.2);
            labels.push(l);
            at = (at.0 + dx, at.1 + dy);
            points.push(Point2::new(at.0 as f64, at.1 as f64));
            if at == s && out_edges[&at].iter().all(|e| e.3) {
                break;
            }
            let cands = &out_edges[&at];
            // Prefer hugging the current pixel, then straight, then turning away.
            let prefs = [(-dy, dx), (dx, dy), (dy, -dx)];
            let next = prefs
                .iter()
                .find_map(|d| cands.iter().position(|e| !e.3 && (e.0, e.1) == *d));
            match next {
                Some(i) => idx = i,
                None => break,
            }
        }
        loops.push(ContourLoop { points, labels });
    }
    Ok(loops)
}

/// Merges consecutive edges that are collinear and share a label.
pub fn simplify_loop(l: &ContourLoop) -> ContourLoop {
    let n = l.labels.len();
    let dir = |i: usize| l.points[i + 1] - l.points[i];
    let breaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let j = (i + n - 1) % n;
            let (a, b) = (dir(j), dir(i));
            l.labels[i] != l.labels[j] || a.perp(&b) != 0.0 || a.dot(&b) <= 0.0
        })
        .collect();
    if breaks.is_empty() {
        return l.clone();
    }
    let mut points = Vec::with_capacity(breaks.len() + 1);
    let mut labels = Vec::with_capacity(breaks.len());
    for &b in &breaks {
        points.push(l.points[b]);
        labels.push(l.labels[b]);
    }
    points.push(points[0]);
    ContourLoop { points, labels }
}

/// Even-odd fill of closed loops, sampled at pixel centers.
pub fn rasterize_loops(loops: &[ContourLoop], width: usize, height: usize) -> SilhouetteImage {
    let mut img = SilhouetteImage::empty(width, height);
    for y in 0..height {
        let py = y as f64 + 0.5;
        let mut xs: Vec<f64> = Vec::new();
        for l in loops {
            for w in l.points.windows(2) {
                let (a, b) = (w[0], w[1]);
                if (a.y <= py) != (b.y <= py) {
                    xs.push(a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks(2) {
            if let [x0, x1] = pair {
                for x in 0..width {
                    let px = x as f64 + 0.5;
                    if px > *x0 && px < *x1 {
                        img.labels[y * width + x] = 0;
                    }
                }
            }
        }
    }
    img
}

/// Gray value written for a part label in PNG exports.
pub fn label_gray(label: u16) -> Result<u8> {
    if label == BACKGROUND {
        return Ok(0);
    }
    u8::try_from(10 * (label as u32 + 1))
        .map_err(|_| Error::InvalidParameter(format!("part label {label} exceeds PNG gray range")))
}

pub fn encode_png(img: &SilhouetteImage) -> Result<Vec<u8>> {
    let data = img
        .labels
        .iter()
        .map(|&l| label_gray(l))
        .collect::<Result<Vec<u8>>>()?;
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Image(e.to_string()))?;
        writer
            .write_image_data(&data)
            .map_err(|e| Error::Image(e.to_string()))?;
    }
    Ok(buf)
}

pub fn write_png(img: &SilhouetteImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_png(img)?).map_err(|e| Error::io(path, e))
}

/// Decodes a silhouette PNG. Any nonzero color is foreground; gray values
/// that are multiples of 10 decode back to part labels, others to label 0.
pub fn decode_png(bytes: &[u8]) -> Result<SilhouetteImage> {
    let mut dec = png::Decoder::new(std::io::Cursor::new(bytes));
    dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = dec.read_info().map_err(|e| Error::Image(e.to_string()))?;
    let mut buf = vec![
        0;
        reader
            .output_buffer_size()
            .ok_or_else(|| Error::Image("image too large".into()))?
    ];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Image(e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    let color = match info.color_type {
        png::ColorType::GrayscaleAlpha => 1,
        png::ColorType::Rgba => 3,
        _ => channels,
    };
    let mut img = SilhouetteImage::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            let px = &buf[y * info.line_size + x * channels..][..channels];
            let v = px[..color].iter().copied().max().unwrap_or(0);
            if v != 0 {
                img.labels[y * w + x] = if color == 1 && v % 10 == 0 {
                    (v / 10 - 1) as u16
                } else {
                    0
                };
            }
        }
    }
    Ok(img)
}

pub fn read_png(path: impl AsRef<Path>) -> Result<SilhouetteImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes)
}

const PALETTE: [&str; 8] = [
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#9a6324",
];

/// SVG paths for each label run of each loop.
pub fn svg_paths(sil: &LabeledSilhouette, stroke_width: f64, dash: Option<&str>) -> String {
    let mut s = String::new();
    for l in &sil.loops {
        for (label, first, len) in l.label_runs() {
            let n = l.labels.len();
            let mut d = String::new();
            for k in 0..=len {
                let p = l.points[(first + k) % n];
                let _ = write!(d, "{}{} {} ", if k == 0 { "M" } else { "L" }, p.x, p.y);
            }
            let _ = writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{}" stroke-width="{stroke_width}"{} data-label="{label}"/>"#,
                d.trim_end(),
                PALETTE[label as usize % PALETTE.len()],
                dash.map(|d| format!(r#" stroke-dasharray="{d}""#))
                    .unwrap_or_default(),
            );
        }
    }
    s
}

pub fn silhouette_svg(sil: &LabeledSilhouette) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{}</svg>\n",
        svg_paths(sil, 1.0, None),
        w = sil.width,
        h = sil.height
    )
}
