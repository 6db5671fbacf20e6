//! Silhouette-guided reconstruction of external controllers.
//!
//! Each external controller is moved by the affine map that best carries
//! its candidate contour run onto the matched object run: a per-axis image
//! scale and translation, with depth following the controller's supporting
//! plane. Mirror pairs across `x = 0` are then solved jointly, which fixes
//! their depth from the pair's image separation.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Point2, Point3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controllers::{
    any_perpendicular, orthonormalize, Controller, CuboidController, GcController, Shape,
    EPS_EXTENT,
};
use crate::correspondence::{lift_to_segments, match_loops, match_points, parameterize, MIN_RUN};
use crate::error::{Error, Result};
use crate::render::{LabeledSilhouette, Projector};

/// Views whose |sin(azimuth)| is below this see the symmetry plane edge-on.
pub const MIN_SYM_SIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SymmetryRelation {
    Pair { a: usize, b: usize },
    SelfSymmetric { id: usize },
}

impl SymmetryRelation {
    pub fn ids(&self) -> Vec<usize> {
        match *self {
            SymmetryRelation::Pair { a, b } => vec![a, b],
            SymmetryRelation::SelfSymmetric { id } => vec![id],
        }
    }
}

/// Distance between `a` and the mirror image of `b` across `x = 0`.
pub fn mirror_distance(a: &Shape, b: &Shape) -> f64 {
    a.distance(&b.reflect_x())
}

/// Greedy matching of controllers against the reflected set: the closest
/// remaining mirror pairs within `tol` are taken first, then unpaired
/// controllers within `tol` of their own reflection are self-symmetric.
pub fn detect_symmetric_pairs(ctrls: &[Controller], tol: f64) -> Vec<SymmetryRelation> {
    let mut cands = Vec::new();
    for i in 0..ctrls.len() {
        for j in i + 1..ctrls.len() {
            let d = mirror_distance(&ctrls[i].shape, &ctrls[j].shape);
            if d <= tol {
                cands.push((d, i, j));
            }
        }
    }
    cands.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut used = vec![false; ctrls.len()];
    let mut out = Vec::new();
    for (_, i, j) in cands {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            out.push(SymmetryRelation::Pair {
                a: ctrls[i].id,
                b: ctrls[j].id,
            });
        }
    }
    for (i, c) in ctrls.iter().enumerate() {
        if !used[i] && mirror_distance(&c.shape, &c.shape) <= tol {
            out.push(SymmetryRelation::SelfSymmetric { id: c.id });
        }
    }
    out.sort_by_key(|r| r.ids()[0]);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportingPlane {
    pub point: Point3<f64>,
    pub normal: Vector3<f64>,
}

impl SupportingPlane {
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&(p - self.point))
    }
}

/// Plane of the 3D generator points of a contour run. The least-squares
/// plane through their centroid is used, with its normal facing the camera.
/// Nearly collinear generators fall back to the plane through the centroid
/// that contains both their direction and the view direction.
pub fn supporting_plane(
    generators: &[Point3<f64>],
    view_dir: &Vector3<f64>,
) -> Result<SupportingPlane> {
    let mut distinct: Vec<&Point3<f64>> = Vec::new();
    for p in generators {
        if !distinct.contains(&p) {
            distinct.push(p);
        }
        if distinct.len() >= 3 {
            break;
        }
    }
    if distinct.len() < 3 {
        return Err(Error::Degenerate(
            "supporting plane needs 3 distinct generator points".into(),
        ));
    }
    let n = generators.len() as f64;
    let c = Point3::from(generators.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n);
    let cov = generators
        .iter()
        .map(|p| (p - c) * (p - c).transpose())
        .sum::<Matrix3<f64>>()
        / n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (l0, l1) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if l0 <= 0.0 || l1 <= l0 * 1e-20 {
        return Err(Error::Degenerate("generator points are collinear".into()));
    }
    let view = view_dir.normalize();
    let normal = if l1 < l0 * 1e-6 {
        let d: Vector3<f64> = eig.eigenvectors.column(order[0]).into();
        let cr = d.cross(&view);
        if cr.norm() > 1e-9 {
            cr.normalize()
        } else {
            any_perpendicular(&view)
        }
    } else {
        let m: Vector3<f64> = eig.eigenvectors.column(order[2]).into();
        let m = m.normalize();
        if m.dot(&view) > 0.0 {
            -m
        } else {
            m
        }
    };
    Ok(SupportingPlane { point: c, normal })
}

/// Lifts pixel `q` onto the plane along its viewing ray; planes parallel
/// to the view receive the orthogonal projection of the ray point at the
/// plane's depth.
pub fn lift_to_plane(q: &Point2<f64>, proj: &Projector, plane: &SupportingPlane) -> Point3<f64> {
    let back = proj.basis_back;
    let depth0 = back.dot(&plane.point.coords);
    let x0 = proj.unproject(q, depth0);
    let nw = plane.normal.dot(&back);
    if nw.abs() > 1e-9 {
        let s = plane.signed_distance(&x0) / nw;
        let x = x0 - back * s;
        // One correction step absorbs rounding in the ray parameter.
        x - plane.normal * plane.signed_distance(&x)
    } else {
        x0 - plane.normal * plane.signed_distance(&x0)
    }
}

/// For each pixel, the controller surface point that projects nearest to
/// it, preferring points nearer the camera within one pixel of the best.
pub fn generator_points(
    shape: &Shape,
    pixels: &[Point2<f64>],
    proj: &Projector,
) -> Vec<Point3<f64>> {
    let samples = shape.surface_samples(16);
    let projected: Vec<(Point2<f64>, f64)> = samples.iter().map(|p| proj.project(p)).collect();
    pixels
        .iter()
        .map(|q| {
            let dmin = projected
                .iter()
                .map(|(p, _)| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            let mut best = (f64::NEG_INFINITY, 0);
            for (k, (p, depth)) in projected.iter().enumerate() {
                if (p - q).norm() <= dmin + 1.0 && *depth > best.0 {
                    best = (*depth, k);
                }
            }
            samples[best.1]
        })
        .collect()
}

/// Per-axis pixel map `x' = sx·x + tx`, `y' = sy·y + ty`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageMap {
    pub sx: f64,
    pub sy: f64,
    pub tx: f64,
    pub ty: f64,
}

/// Axes whose source spread is below this many pixels only translate.
pub const MIN_SPREAD_PX: f64 = 3.0;

impl ImageMap {
    pub const IDENTITY: ImageMap = ImageMap {
        sx: 1.0,
        sy: 1.0,
        tx: 0.0,
        ty: 0.0,
    };

    /// Per-axis fit mapping the bounding interval of `src` onto that of
    /// `dst`. Axes with a source interval under [`MIN_SPREAD_PX`] or with
    /// anti-correlated samples only translate.
    pub fn fit(src: &[Point2<f64>], dst: &[Point2<f64>]) -> Result<ImageMap> {
        if src.is_empty() || src.len() != dst.len() {
            return Err(Error::Empty(
                "image map needs matched, non-empty point lists".into(),
            ));
        }
        let range = |pts: &[Point2<f64>], k: usize| {
            pts.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[k]), hi.max(p[k]))
                })
        };
        let axis = |k: usize| -> (f64, f64) {
            let n = src.len() as f64;
            let mx = src.iter().map(|p| p[k]).sum::<f64>() / n;
            let my = dst.iter().map(|p| p[k]).sum::<f64>() / n;
            let sxy: f64 = src
                .iter()
                .zip(dst)
                .map(|(a, b)| (a[k] - mx) * (b[k] - my))
                .sum();
            let (slo, shi) = range(src, k);
            let (dlo, dhi) = range(dst, k);
            let s = if shi - slo >= MIN_SPREAD_PX && sxy > 0.0 {
                (dhi - dlo) / (shi - slo)
            } else {
                1.0
            };
            (s, (dlo + dhi) / 2.0 - s * (slo + shi) / 2.0)
        };
        let (sx, tx) = axis(0);
        let (sy, ty) = axis(1);
        Ok(ImageMap { sx, sy, tx, ty })
    }

    pub fn apply(&self, p: &Point2<f64>) -> Point2<f64> {
        Point2::new(self.sx * p.x + self.tx, self.sy * p.y + self.ty)
    }
}

/// Affine 3D map `p ↦ L p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub linear: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl AffineMap {
    /// Lifts an image map: in-plane displacements follow the map and the
    /// depth change keeps points on a plane with the given normal (no depth
    /// change for planes seen edge-on).
    pub fn from_image_map(
        m: &ImageMap,
        proj: &Projector,
        plane_normal: &Vector3<f64>,
    ) -> AffineMap {
        let (r, u, w) = (proj.basis_right, proj.basis_up, proj.basis_back);
        let f = &proj.framing;
        let (hw, hh) = (proj.width as f64 / 2.0, proj.height as f64 / 2.0);
        let ta = f.center_u * (1.0 - m.sx) + f.scale * (hw * (m.sx - 1.0) + m.tx);
        let tb = f.center_v * (1.0 - m.sy) - f.scale * (hh * (m.sy - 1.0) + m.ty);
        let (na, nb, nw) = (
            plane_normal.dot(&r),
            plane_normal.dot(&u),
            plane_normal.dot(&w),
        );
        let (ka, kb) = if nw.abs() > MIN_SYM_SIN {
            (-na / nw, -nb / nw)
        } else {
            (0.0, 0.0)
        };
        let da = r.transpose() * (m.sx - 1.0);
        let db = u.transpose() * (m.sy - 1.0);
        let linear = Matrix3::identity() + r * da + u * db + w * (da * ka + db * kb);
        let translation = r * ta + u * tb + w * (ka * ta + kb * tb);
        AffineMap {
            linear,
            translation,
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.linear * p.coords + self.translation)
    }

    pub fn is_identity(&self) -> bool {
        self.linear == Matrix3::identity() && self.translation == Vector3::zeros()
    }

    /// Applies the map to a controller's parameters. Cuboid axes are
    /// re-orthonormalized with extents scaled by the mapped axis lengths;
    /// GC radii scale with the mapped silhouette-width direction.
    pub fn apply_shape(&self, shape: &Shape, view_dir: &Vector3<f64>) -> Result<Shape> {
        if self.is_identity() {
            return Ok(shape.clone());
        }
        match shape {
            Shape::Cuboid(c) => {
                let v: [Vector3<f64>; 3] =
                    std::array::from_fn(|k| self.linear * (c.axes[k] * c.half_extents[k]));
                let h = Vector3::from_fn(|k, _| v[k].norm().max(EPS_EXTENT));
                let axes = orthonormalize(std::array::from_fn(|k| {
                    if v[k].norm() > 0.0 {
                        v[k].normalize()
                    } else {
                        c.axes[k]
                    }
                }));
                Ok(Shape::Cuboid(CuboidController {
                    center: self.apply(&c.center),
                    axes,
                    half_extents: h,
                }))
            }
            Shape::Gc(g) => {
                let points: Vec<Point3<f64>> =
                    g.axis_points.iter().map(|p| self.apply(p)).collect();
                let radii = g
                    .radii
                    .iter()
                    .zip(&g.frames)
                    .map(|(r, t)| {
                        let side = t.cross(view_dir);
                        let side = if side.norm() > 1e-9 {
                            side.normalize()
                        } else {
                            any_perpendicular(t)
                        };
                        (r * (self.linear * side).norm()).max(EPS_EXTENT)
                    })
                    .collect();
                Ok(Shape::Gc(GcController::new(points, radii)?))
            }
        }
    }
}

/// Matched contour samples of one controller: candidate pixels and the
/// object pixels they align with.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerRuns {
    pub controller: usize,
    pub candidate: Vec<Point2<f64>>,
    pub object: Vec<Point2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub controller: Controller,
    pub plane: SupportingPlane,
    /// Object samples lifted onto the supporting plane.
    pub lifted: Vec<Point3<f64>>,
    pub map: ImageMap,
}

/// Rebuilds one external controller from its matched runs.
pub fn reconstruct_external(
    c: &Controller,
    r_c: &[Point2<f64>],
    r_o: &[Point2<f64>],
    proj: &Projector,
) -> Result<Reconstruction> {
    if r_c.is_empty() || r_o.is_empty() {
        return Err(Error::Empty(format!(
            "controller {} has an empty contour run",
            c.id
        )));
    }
    let view = -proj.basis_back;
    let generators = generator_points(&c.shape, r_c, proj);
    let plane = match supporting_plane(&generators, &view) {
        Ok(p) => p,
        Err(Error::Degenerate(_)) => SupportingPlane {
            point: Point3::from(
                generators.iter().map(|p| p.coords).sum::<Vector3<f64>>() / generators.len() as f64,
            ),
            normal: proj.basis_back,
        },
        Err(e) => return Err(e),
    };
    let lifted = r_o.iter().map(|q| lift_to_plane(q, proj, &plane)).collect();
    let map = ImageMap::fit(r_c, r_o)?;
    let affine = AffineMap::from_image_map(&map, proj, &plane.normal);
    let shape = affine.apply_shape(&c.shape, &view)?;
    Ok(Reconstruction {
        controller: Controller {
            shape,
            is_external: true,
            ..c.clone()
        },
        plane,
        lifted,
        map,
    })
}

/// Collects matched candidate/object samples per controller by pairing
/// loops, aligning each pair and lifting label runs to segments. Runs are
/// attributed to the controller whose part carries the run's label.
pub fn collect_runs(
    candidate: &LabeledSilhouette,
    object: &LabeledSilhouette,
    controllers: &[Controller],
    samples: usize,
) -> Result<Vec<ControllerRuns>> {
    let by_part: BTreeMap<usize, usize> = controllers.iter().map(|c| (c.part, c.id)).collect();
    let mut runs: BTreeMap<usize, ControllerRuns> = BTreeMap::new();
    for (ia, ib) in match_loops(candidate, object) {
        let a = parameterize(&candidate.loops[ia], samples)?;
        let b = parameterize(&object.loops[ib], samples)?;
        let corr = match_points(&a, &b)?;
        let labels = a.labels.clone().unwrap_or_default();
        let seg = lift_to_segments(&corr, &labels, &b)?;
        for (pair, obj) in seg.matched() {
            let Some(&id) = by_part.get(&(pair.label as usize)) else {
                continue;
            };
            let entry = runs.entry(id).or_insert_with(|| ControllerRuns {
                controller: id,
                ..Default::default()
            });
            for &[i, j] in &corr.pairs {
                if pair.candidate.contains(i, a.len()) && obj.contains(j, b.len()) {
                    entry.candidate.push(a.points[i]);
                    entry.object.push(b.points[j]);
                }
            }
        }
    }
    Ok(runs
        .into_values()
        .filter(|r| r.candidate.len() >= MIN_RUN)
        .collect())
}

/// Sine of the camera azimuth recovered from a projector basis.
fn azimuth_sin(proj: &Projector) -> f64 {
    -proj.basis_right.z
}

/// Reconstructs every controller with matched runs and imposes the mirror
/// relations. Controllers without runs keep their original shape unless
/// their mirror partner was reconstructed, in which case they become its
/// reflection.
pub fn reconstruct_all(
    originals: &[Controller],
    runs: &[ControllerRuns],
    proj: &Projector,
    symmetry: &[SymmetryRelation],
) -> Result<Vec<Controller>> {
    let index: BTreeMap<usize, usize> = originals
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id, i))
        .collect();
    for r in runs {
        if !index.contains_key(&r.controller) {
            return Err(Error::Mismatch(format!(
                "runs reference unknown controller {}",
                r.controller
            )));
        }
    }
    let uses_symmetry = symmetry.iter().any(|s| {
        s.ids()
            .iter()
            .any(|id| runs.iter().any(|r| r.controller == *id))
    });
    if uses_symmetry && azimuth_sin(proj).abs() < MIN_SYM_SIN {
        return Err(Error::Degenerate(
            "symmetry plane is seen edge-on from this view; depth cannot be recovered".into(),
        ));
    }
    let rebuilt: Vec<(usize, Controller)> = runs
        .par_iter()
        .map(|r| {
            let c = &originals[index[&r.controller]];
            Ok((
                r.controller,
                reconstruct_external(c, &r.candidate, &r.object, proj)?.controller,
            ))
        })
        .collect::<Result<_>>()?;
    let rebuilt: BTreeMap<usize, Controller> = rebuilt.into_iter().collect();
    let mut out: Vec<Controller> = originals
        .iter()
        .map(|c| {
            rebuilt.get(&c.id).cloned().unwrap_or_else(|| Controller {
                is_external: false,
                ..c.clone()
            })
        })
        .collect();

    for rel in symmetry {
        match *rel {
            SymmetryRelation::Pair { a, b } => {
                let (ia, ib) = match (index.get(&a), index.get(&b)) {
                    (Some(&x), Some(&y)) => (x, y),
                    _ => {
                        return Err(Error::Mismatch(format!(
                            "symmetry relation ({a}, {b}) references a missing id"
                        )))
                    }
                };
                let (ra, rb) = (rebuilt.get(&a), rebuilt.get(&b));
                let first = match (ra, rb) {
                    (Some(ca), Some(cb)) => {
                        let avg = ca.shape.blend(&cb.shape.reflect_x(), 0.5)?;
                        let center = mirrored_center(&ca.shape.center(), &cb.shape.center(), proj)?;
                        let x0 = originals[ia].shape.center().x;
                        if x0.abs() > 1e-6 && center.x * x0 < 0.0 {
                            return Err(Error::Degenerate(format!(
                                "mirrored runs of controllers {a} and {b} fall on the same side of the symmetry plane"
                            )));
                        }
                        let mut s = avg;
                        s.translate(&(center - s.center()));
                        s
                    }
                    (Some(ca), None) => ca.shape.clone(),
                    (None, Some(cb)) => originals[ia].shape.align(&cb.shape.reflect_x()),
                    (None, None) => continue,
                };
                out[ia].shape = first.clone();
                out[ib].shape = originals[ib].shape.align(&first.reflect_x());
            }
            SymmetryRelation::SelfSymmetric { id } => {
                let Some(&i) = index.get(&id) else {
                    return Err(Error::Mismatch(format!(
                        "symmetry relation references missing id {id}"
                    )));
                };
                if rebuilt.contains_key(&id) {
                    out[i].shape = snap_self_symmetric(&out[i].shape)?;
                }
            }
        }
    }
    Ok(out)
}

/// Averages a shape with its own reflection, putting it on `x = 0`.
pub fn snap_self_symmetric(shape: &Shape) -> Result<Shape> {
    let mut s = shape.blend(&shape.reflect_x(), 0.5)?;
    let c = s.center();
    s.translate(&Vector3::new(-c.x, 0.0, 0.0));
    Ok(s)
}

/// Center `(x, y, z)` whose image, and that of its mirror `(−x, y, z)`,
/// best match the projections of `ca` and `cb` in the least-squares sense.
pub fn mirrored_center(
    ca: &Point3<f64>,
    cb: &Point3<f64>,
    proj: &Projector,
) -> Result<Point3<f64>> {
    let (r, u) = (proj.basis_right, proj.basis_up);
    let m = |v: &Vector3<f64>| Vector3::new(-v.x, v.y, v.z);
    let rows = [r, u, m(&r), m(&u)];
    let rhs = [
        r.dot(&ca.coords),
        u.dot(&ca.coords),
        r.dot(&cb.coords),
        u.dot(&cb.coords),
    ];
    let a = nalgebra::Matrix4x3::from_rows(&rows.map(|v| v.transpose()));
    let b = nalgebra::Vector4::from(rhs);
    let svd = a.svd(true, true);
    let x = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Degenerate(format!("mirrored center is undetermined: {e}")))?;
    Ok(Point3::from(x))
}
