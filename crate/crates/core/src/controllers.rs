//! Cuboid and generalized-cylinder (GC) controllers: fitting to mesh parts,
//! vertex binding, symmetrization and the parameter-space operations the
//! optimizer relies on (reflection, alignment, blending, distances).

use nalgebra::{Matrix3, Point3, Rotation3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Mesh;

/// Lower clamp for cuboid half extents and GC radii, in normalized model units.
pub const EPS_EXTENT: f64 = 1e-4;
/// Relative radius deviation under which a GC counts as symmetric.
pub const TOL_SYM: f64 = 0.05;
/// Default number of GC profiles.
pub const DEFAULT_PROFILES: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuboidController {
    pub center: Point3<f64>,
    /// Orthonormal local axes (handedness is not fixed; mirrored cuboids
    /// carry left-handed frames).
    pub axes: [Vector3<f64>; 3],
    pub half_extents: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcController {
    pub axis_points: Vec<Point3<f64>>,
    pub radii: Vec<f64>,
    /// Unit profile normal (axis tangent) at each axis point.
    pub frames: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Cuboid,
    Gc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum Shape {
    Cuboid(CuboidController),
    Gc(GcController),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub id: usize,
    #[serde(flatten)]
    pub shape: Shape,
    pub part: usize,
    pub is_external: bool,
}

/// Position of a point relative to a controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LocalCoord {
    /// Coordinates along the cuboid axes, relative to its center.
    Cuboid(Vector3<f64>),
    /// Axis parameter in [0, 1] and the offset expressed in the swept
    /// frame `(u, v, tangent)` at that parameter.
    Gc { t: f64, offset: Vector3<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexBinding {
    pub controller: usize,
    pub local: LocalCoord,
}

/// Per-vertex controller assignment, in mesh vertex order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub vertices: Vec<VertexBinding>,
}

fn reflect_point(p: &Point3<f64>) -> Point3<f64> {
    Point3::new(-p.x, p.y, p.z)
}

fn reflect_vec(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(-v.x, v.y, v.z)
}

/// Nearest orthonormal frame to the given (near-orthonormal) axes.
/// Already-orthonormal input is returned untouched.
pub(crate) fn orthonormalize(axes: [Vector3<f64>; 3]) -> [Vector3<f64>; 3] {
    let m = Matrix3::from_columns(&axes);
    if (m.transpose() * m - Matrix3::identity()).amax() <= 1e-14 {
        return axes;
    }
    let svd = m.svd(true, true);
    let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
        return axes;
    };
    let r = u * vt;
    [r.column(0).into(), r.column(1).into(), r.column(2).into()]
}

impl CuboidController {
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&self.axes)
    }

    pub fn to_local(&self, p: &Point3<f64>) -> Vector3<f64> {
        let d = p - self.center;
        Vector3::new(
            self.axes[0].dot(&d),
            self.axes[1].dot(&d),
            self.axes[2].dot(&d),
        )
    }

    pub fn from_local(&self, q: &Vector3<f64>) -> Point3<f64> {
        self.center + self.axes[0] * q.x + self.axes[1] * q.y + self.axes[2] * q.z
    }

    pub fn corners(&self) -> [Point3<f64>; 8] {
        std::array::from_fn(|i| {
            let s = |bit: usize, h: f64| if i & bit == 0 { -h } else { h };
            self.from_local(&Vector3::new(
                s(1, self.half_extents.x),
                s(2, self.half_extents.y),
                s(4, self.half_extents.z),
            ))
        })
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    /// Negative inside, positive outside.
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        let q = self.to_local(p);
        let d = q.abs() - self.half_extents;
        let outside = d.map(|x| x.max(0.0)).norm();
        let inside = d.max().min(0.0);
        outside + inside
    }

    pub fn closest_surface_point(&self, p: &Point3<f64>) -> Point3<f64> {
        let q = self.to_local(p);
        let h = self.half_extents;
        let outside = (0..3).any(|k| q[k].abs() > h[k]);
        let mut c = q;
        if outside {
            for k in 0..3 {
                c[k] = q[k].clamp(-h[k], h[k]);
            }
        } else {
            let k = (0..3)
                .min_by(|&a, &b| (h[a] - q[a].abs()).total_cmp(&(h[b] - q[b].abs())))
                .unwrap();
            c[k] = if q[k] >= 0.0 { h[k] } else { -h[k] };
        }
        self.from_local(&c)
    }

    pub fn reflect_x(&self) -> Self {
        CuboidController {
            center: reflect_point(&self.center),
            axes: self.axes.map(|a| reflect_vec(&a)),
            half_extents: self.half_extents,
        }
    }

    /// `other` with its axes permuted and sign-flipped to best match `self`.
    pub fn align(&self, other: &CuboidController) -> CuboidController {
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let score = |p: &[usize; 3]| -> f64 {
            (0..3)
                .map(|k| self.axes[k].dot(&other.axes[p[k]]).abs())
                .sum()
        };
        let mut best = PERMS[0];
        let mut best_score = score(&best);
        for p in &PERMS[1..] {
            let s = score(p);
            if s > best_score + 1e-12 {
                best = *p;
                best_score = s;
            }
        }
        let axes = std::array::from_fn(|k| {
            let a = other.axes[best[k]];
            if self.axes[k].dot(&a) < 0.0 {
                -a
            } else {
                a
            }
        });
        CuboidController {
            center: other.center,
            axes,
            half_extents: Vector3::new(
                other.half_extents[best[0]],
                other.half_extents[best[1]],
                other.half_extents[best[2]],
            ),
        }
    }
}

impl GcController {
    pub fn new(axis_points: Vec<Point3<f64>>, radii: Vec<f64>) -> Result<Self> {
        if axis_points.len() < 2 || axis_points.len() != radii.len() {
            return Err(Error::InvalidParameter(format!(
                "GC needs >= 2 axis points with one radius each (got {} points, {} radii)",
                axis_points.len(),
                radii.len()
            )));
        }
        if axis_points.windows(2).any(|w| (w[1] - w[0]).norm() <= 1e-9) {
            return Err(Error::Degenerate(
                "consecutive GC axis points coincide".into(),
            ));
        }
        let mut gc = GcController {
            axis_points,
            radii: radii.into_iter().map(|r| r.max(EPS_EXTENT)).collect(),
            frames: Vec::new(),
        };
        gc.recompute_frames();
        Ok(gc)
    }

    pub fn profile_count(&self) -> usize {
        self.axis_points.len()
    }

    /// Recomputes profile normals from the axis polyline: segment direction
    /// at the ends, bisector of adjacent segments in between.
    pub fn recompute_frames(&mut self) {
        let n = self.axis_points.len();
        let seg: Vec<Vector3<f64>> = self
            .axis_points
            .windows(2)
            .map(|w| (w[1] - w[0]).try_normalize(0.0).unwrap_or(Vector3::y()))
            .collect();
        self.frames = (0..n)
            .map(|k| {
                if k == 0 {
                    seg[0]
                } else if k == n - 1 {
                    seg[n - 2]
                } else {
                    (seg[k - 1] + seg[k]).try_normalize(1e-12).unwrap_or(seg[k])
                }
            })
            .collect();
    }

    pub fn centroid(&self) -> Point3<f64> {
        let sum: Vector3<f64> = self.axis_points.iter().map(|p| p.coords).sum();
        Point3::from(sum / self.axis_points.len() as f64)
    }

    pub fn axis_length(&self) -> f64 {
        self.axis_points
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum()
    }

    /// Segment index and in-segment fraction for a global axis parameter.
    pub fn segment_of(&self, t: f64) -> (usize, f64) {
        let m = (self.axis_points.len() - 1) as f64;
        let x = t.clamp(0.0, 1.0) * m;
        let k = (x.floor() as usize).min(self.axis_points.len() - 2);
        (k, x - k as f64)
    }

    pub fn axis_at(&self, t: f64) -> (Point3<f64>, f64) {
        let (k, s) = self.segment_of(t);
        let p = self.axis_points[k] + (self.axis_points[k + 1] - self.axis_points[k]) * s;
        let r = self.radii[k] + (self.radii[k + 1] - self.radii[k]) * s;
        (p, r)
    }

    /// Closest axis parameter to `p` (segment projection, ties to the lower segment).
    pub fn param_of(&self, p: &Point3<f64>) -> f64 {
        let m = (self.axis_points.len() - 1) as f64;
        let mut best = (f64::INFINITY, 0.0);
        for (k, w) in self.axis_points.windows(2).enumerate() {
            let d = w[1] - w[0];
            let s = ((p - w[0]).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            let dist = (p - (w[0] + d * s)).norm();
            if dist < best.0 {
                best = (dist, (k as f64 + s) / m);
            }
        }
        best.1
    }

    /// Rotation-minimizing frames `(u, v, tangent)` at each profile. With a
    /// seed, the first frame is the seed turned minimally onto this GC's
    /// first tangent; otherwise `u` comes from the world axis least aligned
    /// with the tangent.
    pub fn swept_frames(&self, seed: Option<&Rotation3<f64>>) -> Vec<Rotation3<f64>> {
        let t0 = self.frames[0];
        let first = match seed {
            Some(seed) => {
                let seed_t: Vector3<f64> = seed.matrix().column(2).into();
                min_rotation(&seed_t, &t0) * seed
            }
            None => {
                let refs = [Vector3::x(), Vector3::y(), Vector3::z()];
                let r = refs
                    .iter()
                    .min_by(|a, b| a.dot(&t0).abs().total_cmp(&b.dot(&t0).abs()))
                    .unwrap();
                let u = (r - t0 * r.dot(&t0)).normalize();
                let v = t0.cross(&u);
                Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[u, v, t0]))
            }
        };
        let mut out = Vec::with_capacity(self.frames.len());
        out.push(first);
        for k in 1..self.frames.len() {
            let prev = out[k - 1];
            out.push(min_rotation(&self.frames[k - 1], &self.frames[k]) * prev);
        }
        out
    }

    pub fn frame_at(&self, frames: &[Rotation3<f64>], t: f64) -> Rotation3<f64> {
        let (k, s) = self.segment_of(t);
        if s == 0.0 {
            frames[k]
        } else {
            frames[k].slerp(&frames[k + 1], s)
        }
    }

    /// Unsigned distance to the swept surface, end caps included.
    pub fn surface_distance(&self, p: &Point3<f64>) -> f64 {
        (p - self.closest_surface_point(p)).norm()
    }

    pub fn closest_surface_point(&self, p: &Point3<f64>) -> Point3<f64> {
        let n = self.axis_points.len();
        let mut best = (f64::INFINITY, *p);
        let mut consider = |q: Point3<f64>| {
            let d = (p - q).norm();
            if d < best.0 {
                best = (d, q);
            }
        };
        for k in 0..n - 1 {
            let a = self.axis_points[k];
            let d = self.axis_points[k + 1] - a;
            let len2 = d.norm_squared();
            let s = ((p - a).dot(&d) / len2).clamp(0.0, 1.0);
            let q = a + d * s;
            let r = self.radii[k] + (self.radii[k + 1] - self.radii[k]) * s;
            let dir = d / len2.sqrt();
            let off = p - q;
            let radial = off - dir * off.dot(&dir);
            let rn = radial.norm();
            let rdir = if rn > 1e-15 {
                radial / rn
            } else {
                any_perpendicular(&dir)
            };
            consider(q + rdir * r);
        }
        // end caps
        for (k, sign) in [(0usize, -1.0), (n - 1, 1.0)] {
            let c = self.axis_points[k];
            let normal = self.frames[k] * sign;
            let off = p - c;
            let in_plane = off - normal * off.dot(&normal);
            let ip = in_plane.norm();
            let r = self.radii[k];
            let q = if ip <= r {
                c + in_plane
            } else {
                c + in_plane * (r / ip)
            };
            consider(q);
        }
        best.1
    }

    pub fn reflect_x(&self) -> Self {
        GcController {
            axis_points: self.axis_points.iter().map(reflect_point).collect(),
            radii: self.radii.clone(),
            frames: self.frames.iter().map(reflect_vec).collect(),
        }
    }

    pub fn reversed(&self) -> Self {
        GcController {
            axis_points: self.axis_points.iter().rev().copied().collect(),
            radii: self.radii.iter().rev().copied().collect(),
            frames: self.frames.iter().rev().map(|f| -f).collect(),
        }
    }

    /// `other`, reversed if that pairs its endpoints better with `self`'s.
    pub fn align(&self, other: &GcController) -> GcController {
        let (a0, a1) = (self.axis_points[0], *self.axis_points.last().unwrap());
        let (b0, b1) = (other.axis_points[0], *other.axis_points.last().unwrap());
        let same = (a0 - b0).norm() + (a1 - b1).norm();
        let flipped = (a0 - b1).norm() + (a1 - b0).norm();
        if flipped < same - 1e-12 {
            other.reversed()
        } else {
            other.clone()
        }
    }
}

pub(crate) fn any_perpendicular(v: &Vector3<f64>) -> Vector3<f64> {
    let r = if v.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    (r - v * r.dot(v)).normalize()
}

/// Smallest rotation taking unit vector `from` onto unit vector `to`.
pub(crate) fn min_rotation(from: &Vector3<f64>, to: &Vector3<f64>) -> Rotation3<f64> {
    let axis = from.cross(to);
    let (sin, cos) = (axis.norm(), from.dot(to));
    if sin <= 1e-15 {
        if cos > 0.0 {
            return Rotation3::identity();
        }
        let perp = nalgebra::Unit::new_normalize(any_perpendicular(from));
        return Rotation3::from_axis_angle(&perp, std::f64::consts::PI);
    }
    Rotation3::from_axis_angle(&nalgebra::Unit::new_unchecked(axis / sin), sin.atan2(cos))
}

impl Shape {
    pub fn kind(&self) -> ControllerKind {
        match self {
            Shape::Cuboid(_) => ControllerKind::Cuboid,
            Shape::Gc(_) => ControllerKind::Gc,
        }
    }

    pub fn center(&self) -> Point3<f64> {
        match self {
            Shape::Cuboid(c) => c.center,
            Shape::Gc(g) => g.centroid(),
        }
    }

    pub fn reflect_x(&self) -> Shape {
        match self {
            Shape::Cuboid(c) => Shape::Cuboid(c.reflect_x()),
            Shape::Gc(g) => Shape::Gc(g.reflect_x()),
        }
    }

    /// `other` re-expressed to match `self`'s axis order / direction.
    pub fn align(&self, other: &Shape) -> Shape {
        match (self, other) {
            (Shape::Cuboid(a), Shape::Cuboid(b)) => Shape::Cuboid(a.align(b)),
            (Shape::Gc(a), Shape::Gc(b)) => Shape::Gc(a.align(b)),
            _ => other.clone(),
        }
    }

    pub fn translate(&mut self, d: &Vector3<f64>) {
        match self {
            Shape::Cuboid(c) => c.center += d,
            Shape::Gc(g) => g.axis_points.iter_mut().for_each(|p| *p += d),
        }
    }

    /// Parameter-space distance: center displacement + largest extent or
    /// radius change + largest axis-endpoint displacement. Infinite across
    /// kinds or profile counts.
    pub fn distance(&self, other: &Shape) -> f64 {
        match (self, other.align_ref(self)) {
            (Shape::Cuboid(a), Shape::Cuboid(b)) => {
                let dc = (a.center - b.center).norm();
                let dh = (a.half_extents - b.half_extents).amax();
                let de = (0..3)
                    .map(|k| (a.axes[k] * a.half_extents[k] - b.axes[k] * b.half_extents[k]).norm())
                    .fold(0.0, f64::max);
                dc + dh + de
            }
            (Shape::Gc(a), Shape::Gc(b)) if a.profile_count() == b.profile_count() => {
                let dc = (a.centroid() - b.centroid()).norm();
                let dr = a
                    .radii
                    .iter()
                    .zip(&b.radii)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                let n = a.profile_count() - 1;
                let de = (a.axis_points[0] - b.axis_points[0])
                    .norm()
                    .max((a.axis_points[n] - b.axis_points[n]).norm());
                dc + dr + de
            }
            _ => f64::INFINITY,
        }
    }

    fn align_ref(&self, reference: &Shape) -> Shape {
        reference.align(self)
    }

    /// `self + λ (other - self)` in parameter space, `other` aligned first;
    /// cuboid axes are re-orthonormalized and extents/radii clamped.
    pub fn blend(&self, other: &Shape, lambda: f64) -> Result<Shape> {
        if lambda == 0.0 {
            return match (self, other) {
                (Shape::Cuboid(_), Shape::Cuboid(_)) | (Shape::Gc(_), Shape::Gc(_)) => {
                    Ok(self.clone())
                }
                _ => Err(Error::Mismatch(
                    "cannot blend controllers of different kinds".into(),
                )),
            };
        }
        match (self, self.align(other)) {
            (Shape::Cuboid(a), Shape::Cuboid(b)) => {
                let axes = orthonormalize(std::array::from_fn(|k| {
                    a.axes[k] + (b.axes[k] - a.axes[k]) * lambda
                }));
                let h = a.half_extents + (b.half_extents - a.half_extents) * lambda;
                Ok(Shape::Cuboid(CuboidController {
                    center: a.center + (b.center - a.center) * lambda,
                    axes,
                    half_extents: h.map(|x| x.max(EPS_EXTENT)),
                }))
            }
            (Shape::Gc(a), Shape::Gc(b)) => {
                if a.profile_count() != b.profile_count() {
                    return Err(Error::Mismatch("GC profile counts differ".into()));
                }
                let mut g = GcController {
                    axis_points: a
                        .axis_points
                        .iter()
                        .zip(&b.axis_points)
                        .map(|(p, q)| p + (q - p) * lambda)
                        .collect(),
                    radii: a
                        .radii
                        .iter()
                        .zip(&b.radii)
                        .map(|(r, s)| (r + (s - r) * lambda).max(EPS_EXTENT))
                        .collect(),
                    frames: Vec::new(),
                };
                g.recompute_frames();
                Ok(Shape::Gc(g))
            }
            _ => Err(Error::Mismatch(
                "cannot blend controllers of different kinds".into(),
            )),
        }
    }

    /// Distance from `p` to the controller surface.
    pub fn surface_distance(&self, p: &Point3<f64>) -> f64 {
        match self {
            Shape::Cuboid(c) => c.signed_distance(p).abs(),
            Shape::Gc(g) => g.surface_distance(p),
        }
    }

    pub fn closest_surface_point(&self, p: &Point3<f64>) -> Point3<f64> {
        match self {
            Shape::Cuboid(c) => c.closest_surface_point(p),
            Shape::Gc(g) => g.closest_surface_point(p),
        }
    }

    /// Points on the surface: a `res`×`res` grid per cuboid face, or `res`
    /// points around `res` rings per GC segment plus the cap rims.
    pub fn surface_samples(&self, res: usize) -> Vec<Point3<f64>> {
        let res = res.max(2);
        let lin = |i: usize| -1.0 + 2.0 * i as f64 / (res - 1) as f64;
        match self {
            Shape::Cuboid(c) => {
                let h = c.half_extents;
                let mut out = Vec::with_capacity(6 * res * res);
                for axis in 0..3 {
                    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                    for sign in [-1.0, 1.0] {
                        for i in 0..res {
                            for j in 0..res {
                                let mut q = Vector3::zeros();
                                q[axis] = sign * h[axis];
                                q[a] = lin(i) * h[a];
                                q[b] = lin(j) * h[b];
                                out.push(c.from_local(&q));
                            }
                        }
                    }
                }
                out
            }
            Shape::Gc(g) => {
                let frames = g.swept_frames(None);
                let steps = res * (g.profile_count() - 1);
                let mut out = Vec::new();
                for i in 0..=steps {
                    let t = i as f64 / steps as f64;
                    let (p, r) = g.axis_at(t);
                    let f = g.frame_at(&frames, t);
                    for j in 0..res {
                        let a = std::f64::consts::TAU * j as f64 / res as f64;
                        for frac in if i == 0 || i == steps {
                            vec![0.0, 0.5, 1.0]
                        } else {
                            vec![1.0]
                        } {
                            out.push(p + f * Vector3::new(a.cos(), a.sin(), 0.0) * (r * frac));
                        }
                    }
                }
                out
            }
        }
    }

    pub fn to_local(&self, p: &Point3<f64>) -> LocalCoord {
        match self {
            Shape::Cuboid(c) => LocalCoord::Cuboid(c.to_local(p)),
            Shape::Gc(g) => {
                let t = g.param_of(p);
                let frames = g.swept_frames(None);
                let (base, _) = g.axis_at(t);
                let f = g.frame_at(&frames, t);
                LocalCoord::Gc {
                    t,
                    offset: f.inverse() * (p - base),
                }
            }
        }
    }

    pub fn from_local(&self, l: &LocalCoord) -> Result<Point3<f64>> {
        match (self, l) {
            (Shape::Cuboid(c), LocalCoord::Cuboid(q)) => Ok(c.from_local(q)),
            (Shape::Gc(g), LocalCoord::Gc { t, offset }) => {
                let frames = g.swept_frames(None);
                let (base, _) = g.axis_at(*t);
                Ok(base + g.frame_at(&frames, *t) * offset)
            }
            _ => Err(Error::Mismatch(
                "local coordinate kind does not match controller".into(),
            )),
        }
    }

    /// Re-evaluates a point bound to `self` inside `deformed`: cuboids map
    /// through the deformed frame with per-axis extent scaling; GCs follow
    /// the deformed swept frame with radial scaling by the radius ratio and
    /// axial scaling by the segment length ratio.
    pub fn deform_local(&self, deformed: &Shape, l: &LocalCoord) -> Result<Point3<f64>> {
        if self == deformed {
            return self.from_local(l);
        }
        match (self, self.align(deformed), l) {
            (Shape::Cuboid(a), Shape::Cuboid(b), LocalCoord::Cuboid(q)) => {
                let scaled = q
                    .component_mul(&b.half_extents)
                    .component_div(&a.half_extents);
                Ok(b.from_local(&scaled))
            }
            (Shape::Gc(a), Shape::Gc(b), LocalCoord::Gc { t, offset }) => {
                if a.profile_count() != b.profile_count() {
                    return Err(Error::Mismatch("GC profile counts differ".into()));
                }
                let fa = a.swept_frames(None);
                let fb = b.swept_frames(Some(&fa[0]));
                let (_, ra) = a.axis_at(*t);
                let (base, rb) = b.axis_at(*t);
                let (k, _) = a.segment_of(*t);
                let la = (a.axis_points[k + 1] - a.axis_points[k]).norm();
                let lb = (b.axis_points[k + 1] - b.axis_points[k]).norm();
                let rs = rb / ra;
                let scaled = Vector3::new(offset.x * rs, offset.y * rs, offset.z * lb / la);
                Ok(base + b.frame_at(&fb, *t) * scaled)
            }
            _ => Err(Error::Mismatch(
                "binding does not match controller kind".into(),
            )),
        }
    }
}

impl Controller {
    pub fn kind(&self) -> ControllerKind {
        self.shape.kind()
    }

    pub fn reflect_x(&self) -> Controller {
        Controller {
            shape: self.shape.reflect_x(),
            ..self.clone()
        }
    }

    pub fn with_shape(&self, shape: Shape) -> Controller {
        Controller {
            shape,
            ..self.clone()
        }
    }
}

/// Area-weighted principal axes of a part's surface: area centroid and unit
/// eigenvectors sorted by decreasing variance, each signed so that its
/// largest-magnitude component is positive.
pub fn principal_axes(mesh: &Mesh, part: usize) -> Result<(Point3<f64>, [Vector3<f64>; 3])> {
    let tris: Vec<[Point3<f64>; 3]> = mesh
        .part_faces(part)
        .map(|f| f.map(|i| mesh.vertices[i]))
        .collect();
    if tris.is_empty() {
        return Err(Error::Empty(format!("part {part} has no faces")));
    }
    // Exact area moments of each triangle: ∫x dA = A·centroid and
    // ∫x xᵀ dA = A/12 (Σ vᵢvᵢᵀ + s sᵀ), s = Σ vᵢ.
    let mut area = 0.0;
    let mut first = Vector3::zeros();
    let mut second = Matrix3::zeros();
    for [a, b, c] in &tris {
        let w = (b - a).cross(&(c - a)).norm() * 0.5;
        let s = a.coords + b.coords + c.coords;
        area += w;
        first += s * (w / 3.0);
        second += (a.coords * a.coords.transpose()
            + b.coords * b.coords.transpose()
            + c.coords * c.coords.transpose()
            + s * s.transpose())
            * (w / 12.0);
    }
    let (mean, cov) = if area > 0.0 {
        let mean = first / area;
        (mean, second / area - mean * mean.transpose())
    } else {
        let pts: Vec<Vector3<f64>> = mesh
            .part_vertex_indices(part)
            .into_iter()
            .map(|i| mesh.vertices[i].coords)
            .collect();
        let mean = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
        let cov = pts
            .iter()
            .map(|p| (p - mean) * (p - mean).transpose())
            .sum::<Matrix3<f64>>()
            / pts.len() as f64;
        (mean, cov)
    };
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let axes = order.map(|i| {
        let v: Vector3<f64> = eig.eigenvectors.column(i).into();
        let k = v.iamax();
        if v[k] < 0.0 {
            -v
        } else {
            v
        }
    });
    Ok((Point3::from(mean), orthonormalize(axes)))
}

fn part_points(mesh: &Mesh, part: usize) -> Result<Vec<Point3<f64>>> {
    let idx = mesh.part_vertex_indices(part);
    if idx.is_empty() {
        return Err(Error::Empty(format!("part {part} has no faces")));
    }
    Ok(idx.into_iter().map(|i| mesh.vertices[i]).collect())
}

fn box_in_frame(points: &[Point3<f64>], axes: [Vector3<f64>; 3]) -> CuboidController {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in points {
        for k in 0..3 {
            let x = axes[k].dot(&p.coords);
            lo[k] = lo[k].min(x);
            hi[k] = hi[k].max(x);
        }
    }
    let mid = (lo + hi) * 0.5;
    CuboidController {
        center: Point3::from(axes[0] * mid.x + axes[1] * mid.y + axes[2] * mid.z),
        axes,
        half_extents: ((hi - lo) * 0.5).map(|x| x.max(EPS_EXTENT)),
    }
}

/// Oriented bounding box of a part. The principal-axes box is compared with
/// the world-aligned box and the smaller volume wins (ties keep the world
/// frame, which also resolves principal axes that are not unique).
pub fn fit_cuboid(mesh: &Mesh, part: usize) -> Result<CuboidController> {
    let points = part_points(mesh, part)?;
    let (_, axes) = principal_axes(mesh, part)?;
    let pca = box_in_frame(&points, axes);
    let world = box_in_frame(&points, [Vector3::x(), Vector3::y(), Vector3::z()]);
    Ok(if pca.volume() < world.volume() * (1.0 - 1e-9) {
        pca
    } else {
        world
    })
}

/// Straight GC along the dominant principal direction with `n_profiles`
/// evenly spaced profiles. Each profile gathers the vertices within half a
/// profile spacing; its center is their centroid moved onto the profile
/// plane and its radius their largest in-plane distance. Empty profiles are
/// interpolated from their neighbours.
pub fn fit_gc(mesh: &Mesh, part: usize, n_profiles: usize) -> Result<GcController> {
    if n_profiles < 2 {
        return Err(Error::InvalidParameter(
            "a GC needs at least 2 profiles".into(),
        ));
    }
    let points = part_points(mesh, part)?;
    let (mean, axes) = principal_axes(mesh, part)?;
    let dir = axes[0];
    let ts: Vec<f64> = points.iter().map(|p| dir.dot(&(p - mean))).collect();
    let (tmin, tmax) = ts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| {
            (a.min(t), b.max(t))
        });
    let length = tmax - tmin;
    if length <= 1e-9 {
        return Err(Error::Degenerate(format!(
            "part {part} has no extent along its axis"
        )));
    }
    let step = length / (n_profiles - 1) as f64;
    let mut profiles: Vec<Option<(Point3<f64>, f64)>> = Vec::with_capacity(n_profiles);
    for k in 0..n_profiles {
        let tk = tmin + step * k as f64;
        let members: Vec<&Point3<f64>> = points
            .iter()
            .zip(&ts)
            .filter(|(_, &t)| (t - tk).abs() <= step * 0.5 * (1.0 + 1e-9))
            .map(|(p, _)| p)
            .collect();
        if members.is_empty() {
            profiles.push(None);
            continue;
        }
        let centroid: Vector3<f64> =
            members.iter().map(|p| p.coords).sum::<Vector3<f64>>() / members.len() as f64;
        let off = centroid - mean.coords;
        let center = mean + dir * tk + (off - dir * off.dot(&dir));
        let radius = members
            .iter()
            .map(|p| {
                let d = *p - center;
                (d - dir * d.dot(&dir)).norm()
            })
            .fold(0.0, f64::max);
        profiles.push(Some((center, radius)));
    }
    let known: Vec<usize> = (0..n_profiles).filter(|&k| profiles[k].is_some()).collect();
    let mut axis_points = Vec::with_capacity(n_profiles);
    let mut radii = Vec::with_capacity(n_profiles);
    for k in 0..n_profiles {
        let (c, r) = match profiles[k] {
            Some(v) => v,
            None => {
                let lo = known.iter().rev().find(|&&j| j < k).copied();
                let hi = known.iter().find(|&&j| j > k).copied();
                match (lo, hi) {
                    (Some(a), Some(b)) => {
                        let (pa, ra) = profiles[a].unwrap();
                        let (pb, rb) = profiles[b].unwrap();
                        let s = (k - a) as f64 / (b - a) as f64;
                        (pa + (pb - pa) * s, ra + (rb - ra) * s)
                    }
                    (Some(a), None) | (None, Some(a)) => {
                        let (pa, ra) = profiles[a].unwrap();
                        (pa + dir * (step * (k as f64 - a as f64)), ra)
                    }
                    (None, None) => unreachable!("extreme profiles always have members"),
                }
            }
        };
        axis_points.push(c);
        radii.push(r);
    }
    GcController::new(axis_points, radii)
}

fn fit_residual(points: &[Point3<f64>], shape: &Shape) -> f64 {
    let b = crate::geometry::Aabb::from_points(points.iter()).expect("non-empty");
    let c = b.center();
    let radius = points
        .iter()
        .map(|p| (p - c).norm())
        .fold(0.0, f64::max)
        .max(EPS_EXTENT);
    let mean = points
        .iter()
        .map(|p| shape.surface_distance(p))
        .sum::<f64>()
        / points.len() as f64;
    mean / radius
}

/// Fits both kinds and keeps the one with the smaller normalized residual
/// (mean vertex distance to the controller surface over the part's bounding
/// sphere radius). Ties go to the cuboid.
pub fn classify_part(mesh: &Mesh, part: usize, n_profiles: usize) -> Result<ControllerKind> {
    let points = part_points(mesh, part)?;
    let cuboid = Shape::Cuboid(fit_cuboid(mesh, part)?);
    let rc = fit_residual(&points, &cuboid);
    let rg = match fit_gc(mesh, part, n_profiles) {
        Ok(g) => fit_residual(&points, &Shape::Gc(g)),
        Err(Error::Degenerate(_)) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok(choose_kind(rc, rg))
}

pub(crate) fn choose_kind(cuboid_residual: f64, gc_residual: f64) -> ControllerKind {
    if gc_residual < cuboid_residual {
        ControllerKind::Gc
    } else {
        ControllerKind::Cuboid
    }
}

pub fn fit_controller(
    mesh: &Mesh,
    part: usize,
    kind: ControllerKind,
    n_profiles: usize,
) -> Result<Controller> {
    let shape = match kind {
        ControllerKind::Cuboid => Shape::Cuboid(fit_cuboid(mesh, part)?),
        ControllerKind::Gc => Shape::Gc(fit_gc(mesh, part, n_profiles)?),
    };
    Ok(Controller {
        id: part,
        shape,
        part,
        is_external: false,
    })
}

/// One controller per part (id = part id), kind chosen by [`classify_part`].
pub fn fit_controllers(mesh: &Mesh, n_profiles: usize) -> Result<Vec<Controller>> {
    (0..mesh.part_count())
        .map(|part| {
            let kind = classify_part(mesh, part, n_profiles)?;
            fit_controller(mesh, part, kind, n_profiles)
        })
        .collect()
}

/// Binds every vertex rigidly to the controller of its part. Vertices used
/// by no face go to the controller whose surface is nearest.
pub fn bind_mesh(mesh: &Mesh, controllers: &[Controller]) -> Result<Binding> {
    let by_part = |part: usize| controllers.iter().find(|c| c.part == part);
    for part in 0..mesh.part_count() {
        if by_part(part).is_none() {
            return Err(Error::Mismatch(format!("part {part} has no controller")));
        }
    }
    let parts = mesh.vertex_parts();
    let vertices = mesh
        .vertices
        .iter()
        .zip(parts)
        .map(|(v, part)| {
            let c = match part {
                Some(p) => by_part(p).unwrap(),
                None => controllers
                    .iter()
                    .min_by(|a, b| {
                        a.shape
                            .surface_distance(v)
                            .total_cmp(&b.shape.surface_distance(v))
                    })
                    .ok_or_else(|| Error::Empty("no controllers".into()))?,
            };
            Ok(VertexBinding {
                controller: c.id,
                local: c.shape.to_local(v),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Binding { vertices })
}

/// Reconstructs vertex positions from a binding in the same controllers.
pub fn unbind(binding: &Binding, controllers: &[Controller]) -> Result<Vec<Point3<f64>>> {
    binding
        .vertices
        .iter()
        .map(|b| {
            let c = controllers
                .iter()
                .find(|c| c.id == b.controller)
                .ok_or_else(|| Error::Mismatch(format!("controller {} missing", b.controller)))?;
            c.shape.from_local(&b.local)
        })
        .collect()
}

/// Symmetrizes the radii of a reconstructed GC when its original is
/// symmetric: constant original radii give the reconstructed mean
/// everywhere; radii mirrored about the axis midpoint average each profile
/// with its mirror. Otherwise `reconstructed` is returned unchanged.
pub fn symmetrize_gc(
    reconstructed: &GcController,
    original: &GcController,
) -> Result<GcController> {
    let n = reconstructed.profile_count();
    if n != original.profile_count() {
        return Err(Error::Mismatch(format!(
            "profile counts differ ({n} vs {})",
            original.profile_count()
        )));
    }
    let ro = &original.radii;
    let mean_o = ro.iter().sum::<f64>() / n as f64;
    let rotational = ro.iter().all(|r| (r - mean_o).abs() <= TOL_SYM * mean_o);
    let mirrored = (0..n).all(|i| {
        let (a, b) = (ro[i], ro[n - 1 - i]);
        (a - b).abs() <= TOL_SYM * a.max(b)
    });
    let mut out = reconstructed.clone();
    let rr = &reconstructed.radii;
    if rotational {
        if rr.iter().all(|r| *r == rr[0]) {
            return Ok(out);
        }
        let mean = rr.iter().sum::<f64>() / n as f64;
        out.radii = vec![mean; n];
    } else if mirrored {
        out.radii = (0..n).map(|i| (rr[i] + rr[n - 1 - i]) / 2.0).collect();
    }
    Ok(out)
}
