//! Structure-preserving controller optimization and mesh deformation.
//!
//! The loop starts from the reconstructed controllers and repeats a
//! symmetry pass, a contact / feature-curve pass and a refit towards the
//! reconstruction until no controller moves more than `eps_move` or the
//! iteration budget runs out.

use std::collections::BTreeMap;

use nalgebra::{Point3, Rotation3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controllers::{
    min_rotation, symmetrize_gc, Binding, Controller, GcController, LocalCoord, Shape, TOL_SYM,
};
use crate::error::{Error, Result};
use crate::geometry::Mesh;
use crate::reconstruction::{detect_symmetric_pairs, snap_self_symmetric, SymmetryRelation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizationConfig {
    pub eps_move: f64,
    pub max_iters: usize,
    pub lambda_refit: f64,
    pub tau_prox: f64,
    pub tol_struct: f64,
    pub tol_sym: f64,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        OptimizationConfig {
            eps_move: 1e-4,
            max_iters: 50,
            lambda_refit: 0.5,
            tau_prox: 0.02,
            tol_struct: 1e-3,
            tol_sym: TOL_SYM,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.eps_move > 0.0) {
            return bad("eps_move must be > 0");
        }
        if self.max_iters < 1 {
            return bad("max_iters must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.lambda_refit) {
            return bad("lambda_refit must lie in [0, 1]");
        }
        if !(self.tau_prox >= 0.0) || !(self.tol_struct >= 0.0) || !(self.tol_sym >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        Ok(())
    }
}

/// Frozen contact between two controllers of the original set. Contact
/// points are stored in each controller's local coordinates and follow the
/// controllers as they deform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub a: usize,
    pub b: usize,
    pub local_a: LocalCoord,
    pub local_b: LocalCoord,
    pub point_a: Point3<f64>,
    pub point_b: Point3<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureGraph {
    pub symmetry: Vec<SymmetryRelation>,
    pub proximity: Vec<Contact>,
    /// The original controllers the relations were detected on.
    pub reference: Vec<Controller>,
}

/// Closest pair of surface points between two controllers: the best of a
/// sampled search refined by alternating closest-point projection.
pub fn closest_points(a: &Shape, b: &Shape) -> (Point3<f64>, Point3<f64>, f64) {
    let samples = a.surface_samples(24);
    let start = samples
        .iter()
        .min_by(|p, q| b.surface_distance(p).total_cmp(&b.surface_distance(q)))
        .copied()
        .unwrap_or_else(|| a.center());
    let mut pa = start;
    let mut pb = b.closest_surface_point(&pa);
    let mut best = (pa, pb, (pa - pb).norm());
    for _ in 0..32 {
        pa = a.closest_surface_point(&pb);
        pb = b.closest_surface_point(&pa);
        let d = (pa - pb).norm();
        if d < best.2 {
            best = (pa, pb, d);
        } else {
            break;
        }
    }
    best
}

/// Symmetry relations and proximity contacts of the original controllers.
pub fn analyze_structure(
    originals: &[Controller],
    cfg: &OptimizationConfig,
) -> Result<StructureGraph> {
    if originals.is_empty() {
        return Err(Error::Empty("no controllers to analyze".into()));
    }
    let symmetry = detect_symmetric_pairs(originals, cfg.tol_sym);
    let pairs: Vec<(usize, usize)> = (0..originals.len())
        .flat_map(|i| (i + 1..originals.len()).map(move |j| (i, j)))
        .collect();
    let proximity = pairs
        .par_iter()
        .filter_map(|&(i, j)| {
            let (a, b) = (&originals[i], &originals[j]);
            let (pa, pb, d) = closest_points(&a.shape, &b.shape);
            (d <= cfg.tau_prox).then(|| Contact {
                a: a.id,
                b: b.id,
                local_a: a.shape.to_local(&pa),
                local_b: b.shape.to_local(&pb),
                point_a: pa,
                point_b: pb,
                distance: d,
            })
        })
        .collect();
    Ok(StructureGraph {
        symmetry,
        proximity,
        reference: originals.to_vec(),
    })
}

fn index_of(ctrls: &[Controller]) -> BTreeMap<usize, usize> {
    ctrls.iter().enumerate().map(|(i, c)| (c.id, i)).collect()
}

fn lookup(index: &BTreeMap<usize, usize>, id: usize) -> Result<usize> {
    index
        .get(&id)
        .copied()
        .ok_or_else(|| Error::Mismatch(format!("relation references missing controller {id}")))
}

/// Symmetry pass: each pair becomes the average of one member and the
/// reflection of the other, mirrored onto both; self-symmetric controllers
/// are snapped onto their own reflection.
pub fn struct_op_controller(ctrls: &[Controller], g: &StructureGraph) -> Result<Vec<Controller>> {
    let index = index_of(ctrls);
    let mut out = ctrls.to_vec();
    for rel in &g.symmetry {
        match *rel {
            SymmetryRelation::Pair { a, b } => {
                let (ia, ib) = (lookup(&index, a)?, lookup(&index, b)?);
                let avg = out[ia].shape.blend(&out[ib].shape.reflect_x(), 0.5)?;
                out[ib].shape = out[ib].shape.align(&avg.reflect_x());
                out[ia].shape = avg;
            }
            SymmetryRelation::SelfSymmetric { id } => {
                let i = lookup(&index, id)?;
                out[i].shape = snap_self_symmetric(&out[i].shape)?;
            }
        }
    }
    Ok(out)
}

fn reflect(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(-v.x, v.y, v.z)
}

/// Current world position of a contact point on a controller.
fn contact_point(reference: &Shape, current: &Shape, local: &LocalCoord) -> Result<Point3<f64>> {
    reference.deform_local(current, local)
}

/// Most passes of contact restoration in one call.
const CONTACT_PASSES: usize = 100;

/// Contact and feature-curve pass. Every contact stretched beyond its
/// original distance plus `tol_struct` pulls both controllers together
/// along the contact axis, splitting the correction equally (controllers in
/// several violated contacts take the mean of their shares). Translations
/// of mirror pairs are symmetrized so the pass preserves mirror symmetry.
/// GC axes are then re-solved so each interior point's discrete Laplacian
/// matches the original's, endpoints fixed.
pub fn struct_opt_curve(
    ctrls: &[Controller],
    g: &StructureGraph,
    cfg: &OptimizationConfig,
) -> Result<Vec<Controller>> {
    let index = index_of(ctrls);
    let ref_index = index_of(&g.reference);
    let mut out = ctrls.to_vec();
    for _ in 0..CONTACT_PASSES {
        let mut shares: Vec<(Vector3<f64>, usize)> = vec![(Vector3::zeros(), 0); out.len()];
        for c in &g.proximity {
            let (ia, ib) = (lookup(&index, c.a)?, lookup(&index, c.b)?);
            let (ra, rb) = (lookup(&ref_index, c.a)?, lookup(&ref_index, c.b)?);
            let pa = contact_point(&g.reference[ra].shape, &out[ia].shape, &c.local_a)?;
            let pb = contact_point(&g.reference[rb].shape, &out[ib].shape, &c.local_b)?;
            let d = (pb - pa).norm();
            if d > c.distance + cfg.tol_struct {
                let step = (pb - pa) * ((d - c.distance) / d / 2.0);
                shares[ia].0 += step;
                shares[ia].1 += 1;
                shares[ib].0 -= step;
                shares[ib].1 += 1;
            }
        }
        if shares.iter().all(|s| s.1 == 0) {
            break;
        }
        let mut moves: Vec<Vector3<f64>> = shares
            .iter()
            .map(|(v, n)| {
                if *n == 0 {
                    Vector3::zeros()
                } else {
                    v / *n as f64
                }
            })
            .collect();
        for rel in &g.symmetry {
            match *rel {
                SymmetryRelation::Pair { a, b } => {
                    let (ia, ib) = (lookup(&index, a)?, lookup(&index, b)?);
                    let m = (moves[ia] + reflect(&moves[ib])) / 2.0;
                    moves[ia] = m;
                    moves[ib] = reflect(&m);
                }
                SymmetryRelation::SelfSymmetric { id } => {
                    moves[lookup(&index, id)?].x = 0.0;
                }
            }
        }
        for (c, m) in out.iter_mut().zip(&moves) {
            if *m != Vector3::zeros() {
                c.shape.translate(m);
            }
        }
    }

    let mut smoothed: Vec<Option<Shape>> = vec![None; out.len()];
    let mirrored_partner: BTreeMap<usize, usize> = g
        .symmetry
        .iter()
        .filter_map(|r| match *r {
            SymmetryRelation::Pair { a, b } => {
                Some((lookup(&index, b).ok()?, lookup(&index, a).ok()?))
            }
            _ => None,
        })
        .collect();
    for i in 0..out.len() {
        let Shape::Gc(gc) = &out[i].shape else {
            continue;
        };
        if let Some(&p) = mirrored_partner.get(&i) {
            let partner = &out[p].shape;
            if partner.align(&out[i].shape.reflect_x()) == *partner {
                continue;
            }
        }
        let r = lookup(&ref_index, out[i].id)?;
        let Shape::Gc(orig) = &g.reference[r].shape else {
            return Err(Error::Mismatch(format!(
                "controller {} changed kind",
                out[i].id
            )));
        };
        smoothed[i] = Some(Shape::Gc(match_axis_laplacian(gc, orig)?));
    }
    for (i, s) in smoothed.into_iter().enumerate() {
        if let Some(s) = s {
            out[i].shape = s;
        }
    }
    for (&b, &a) in &mirrored_partner {
        if let (Shape::Gc(_), Shape::Gc(_)) = (&out[a].shape, &out[b].shape) {
            let before_a = &ctrls[a].shape;
            let before_b = &ctrls[b].shape;
            if before_b.align(&before_a.reflect_x()) == *before_b {
                out[b].shape = out[b].shape.align(&out[a].shape.reflect_x());
            }
        }
    }
    Ok(out)
}

/// Interior axis points solved so that `p[i-1] − 2 p[i] + p[i+1]` equals the
/// original's second difference, rotated onto the current chord and scaled
/// by the chord-length ratio. Already-matching axes are returned unchanged.
pub fn match_axis_laplacian(gc: &GcController, original: &GcController) -> Result<GcController> {
    let n = gc.profile_count();
    if n != original.profile_count() {
        return Err(Error::Mismatch("GC profile counts differ".into()));
    }
    if n < 3 {
        return Ok(gc.clone());
    }
    let chord_o = original.axis_points[n - 1] - original.axis_points[0];
    let chord = gc.axis_points[n - 1] - gc.axis_points[0];
    let (lo, lc) = (chord_o.norm(), chord.norm());
    let rot = if chord == chord_o || lo == 0.0 || lc == 0.0 {
        Rotation3::identity()
    } else {
        min_rotation(&(chord_o / lo), &(chord / lc))
    };
    let scale = if lo > 0.0 { lc / lo } else { 1.0 };
    let lap = |p: &[Point3<f64>], i: usize| p[i - 1].coords - p[i].coords * 2.0 + p[i + 1].coords;
    let target: Vec<Vector3<f64>> = (1..n - 1)
        .map(|i| (rot * lap(&original.axis_points, i)) * scale)
        .collect();
    let current_ok = (1..n - 1).all(|i| (lap(&gc.axis_points, i) - target[i - 1]).amax() <= 1e-12);
    if current_ok {
        return Ok(gc.clone());
    }
    // Thomas algorithm for p[i-1] − 2 p[i] + p[i+1] = L[i], i = 1..n-2.
    let m = n - 2;
    let mut c_prime = vec![0.0; m];
    let mut d_prime = vec![Vector3::zeros(); m];
    for k in 0..m {
        let mut rhs = target[k];
        if k == 0 {
            rhs -= gc.axis_points[0].coords;
        }
        if k == m - 1 {
            rhs -= gc.axis_points[n - 1].coords;
        }
        let (a, b, c) = (1.0, -2.0, 1.0);
        if k == 0 {
            c_prime[k] = c / b;
            d_prime[k] = rhs / b;
        } else {
            let denom = b - a * c_prime[k - 1];
            c_prime[k] = c / denom;
            d_prime[k] = (rhs - d_prime[k - 1] * a) / denom;
        }
    }
    let mut inner = vec![Vector3::zeros(); m];
    inner[m - 1] = d_prime[m - 1];
    for k in (0..m - 1).rev() {
        inner[k] = d_prime[k] - inner[k + 1] * c_prime[k];
    }
    let mut points = gc.axis_points.clone();
    for k in 0..m {
        points[k + 1] = Point3::from(inner[k]);
    }
    GcController::new(points, gc.radii.clone())
}

/// Blends a controller towards its reconstructed reference.
pub fn refit(c_d: &Controller, c_r: &Controller, lambda: f64) -> Result<Controller> {
    if c_d.kind() != c_r.kind() {
        return Err(Error::Mismatch(format!(
            "controller {} kind differs from its reference",
            c_d.id
        )));
    }
    Ok(c_d.with_shape(c_d.shape.blend(&c_r.shape, lambda)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Threshold,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationTrace {
    pub iterations: usize,
    pub reason: Termination,
    pub movements: Vec<f64>,
}

/// Largest parameter-space movement between two aligned controller sets.
pub fn max_movement(before: &[Controller], after: &[Controller]) -> f64 {
    before
        .iter()
        .zip(after)
        .map(|(a, b)| a.shape.distance(&b.shape))
        .fold(0.0, f64::max)
}

/// Runs the optimization loop from the reconstructed set `reconstructed`
/// towards a structure consistent with `originals`.
pub fn optimize(
    originals: &[Controller],
    reconstructed: &[Controller],
    g: &StructureGraph,
    cfg: &OptimizationConfig,
) -> Result<(Vec<Controller>, DeformationTrace)> {
    cfg.validate()?;
    if originals.len() != reconstructed.len()
        || originals
            .iter()
            .zip(reconstructed)
            .any(|(o, r)| o.id != r.id)
    {
        return Err(Error::Mismatch(
            "original and reconstructed controller ids differ".into(),
        ));
    }
    let reference: Vec<Controller> = originals
        .iter()
        .zip(reconstructed)
        .map(|(o, r)| match (&o.shape, &r.shape) {
            (Shape::Gc(go), Shape::Gc(gr)) => Ok(r.with_shape(Shape::Gc(symmetrize_gc(gr, go)?))),
            _ if o.kind() == r.kind() => Ok(r.clone()),
            _ => Err(Error::Mismatch(format!("controller {} changed kind", o.id))),
        })
        .collect::<Result<_>>()?;
    let mut current = reference.clone();
    let mut movements = Vec::new();
    let mut reason = Termination::MaxIters;
    for _ in 0..cfg.max_iters {
        let before = current.clone();
        current = struct_op_controller(&current, g)?;
        current = struct_opt_curve(&current, g, cfg)?;
        current = current
            .iter()
            .zip(&reference)
            .map(|(d, r)| refit(d, r, cfg.lambda_refit))
            .collect::<Result<_>>()?;
        let m = max_movement(&before, &current);
        movements.push(m);
        if m < cfg.eps_move {
            reason = Termination::Threshold;
            break;
        }
    }
    Ok((
        current,
        DeformationTrace {
            iterations: movements.len(),
            reason,
            movements,
        },
    ))
}

/// Moves every bound vertex with its controller from `originals` to
/// `deformed`. Topology and part labels are kept.
pub fn deform_mesh(
    mesh: &Mesh,
    binding: &Binding,
    originals: &[Controller],
    deformed: &[Controller],
) -> Result<Mesh> {
    if binding.vertices.len() != mesh.vertices.len() {
        return Err(Error::Mismatch(
            "binding does not cover the mesh vertices".into(),
        ));
    }
    if originals.len() != deformed.len()
        || originals.iter().zip(deformed).any(|(a, b)| a.id != b.id)
    {
        return Err(Error::Mismatch(
            "original and deformed controller ids differ".into(),
        ));
    }
    let index = index_of(originals);
    let vertices = binding
        .vertices
        .par_iter()
        .map(|b| {
            let i = *index.get(&b.controller).ok_or_else(|| {
                Error::Mismatch(format!(
                    "binding references missing controller {}",
                    b.controller
                ))
            })?;
            originals[i]
                .shape
                .deform_local(&deformed[i].shape, &b.local)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(k) = vertices
        .iter()
        .position(|p| !p.coords.iter().all(|c| c.is_finite()))
    {
        return Err(Error::Degenerate(format!(
            "deformation produced a non-finite position for vertex {k}"
        )));
    }
    Ok(Mesh {
        vertices,
        ..mesh.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{bind_mesh, fit_controllers, CuboidController};
    use crate::synth;
    use proptest::prelude::*;

    fn cuboid(id: usize, c: [f64; 3], h: [f64; 3]) -> Controller {
        Controller {
            id,
            shape: Shape::Cuboid(CuboidController {
                center: Point3::from(c),
                axes: [Vector3::x(), Vector3::y(), Vector3::z()],
                half_extents: Vector3::from(h),
            }),
            part: id,
            is_external: false,
        }
    }

    /// Seat resting on four legs.
    fn table_set() -> Vec<Controller> {
        let mut v = vec![cuboid(0, [0.0, 0.0, 0.0], [0.3, 0.03, 0.3])];
        let mut id = 1;
        for (x, z) in [(0.25, 0.25), (-0.25, 0.25), (0.25, -0.25), (-0.25, -0.25)] {
            v.push(cuboid(id, [x, -0.23, z], [0.03, 0.2, 0.03]));
            id += 1;
        }
        v
    }

    fn cfg() -> OptimizationConfig {
        OptimizationConfig::default()
    }

    #[test]
    fn table_structure() {
        let g = analyze_structure(&table_set(), &cfg()).unwrap();
        let pairs = g
            .symmetry
            .iter()
            .filter(|r| matches!(r, SymmetryRelation::Pair { .. }))
            .count();
        assert_eq!(pairs, 2);
        assert_eq!(g.proximity.len(), 4);
        for c in &g.proximity {
            assert!(c.distance <= 0.02);
            assert!(c.a == 0 || c.b == 0);
            // Oracle: seat bottom is at y = −0.03 and leg tops at y = −0.03.
            assert!(c.distance < 1e-9);
        }
        let single = analyze_structure(&table_set()[..1], &cfg()).unwrap();
        assert!(single.proximity.is_empty());
        assert!(single
            .symmetry
            .iter()
            .all(|r| matches!(r, SymmetryRelation::SelfSymmetric { .. })));
        let far = [
            cuboid(0, [0.0, 0.0, 0.0], [0.1; 3]),
            cuboid(1, [1.0, 0.0, 0.0], [0.1; 3]),
        ];
        assert!(analyze_structure(&far, &cfg())
            .unwrap()
            .proximity
            .is_empty());
        assert!(analyze_structure(&[], &cfg()).is_err());
    }

    #[test]
    fn pair_shift_is_split() {
        let set = table_set();
        let g = analyze_structure(&set, &cfg()).unwrap();
        let mut moved = set.clone();
        moved[1].shape.translate(&Vector3::new(0.02, 0.0, 0.0));
        let out = struct_op_controller(&moved, &g).unwrap();
        assert!((out[1].shape.center().x - 0.26).abs() < 1e-12);
        assert!((out[2].shape.center().x + 0.26).abs() < 1e-12);
        assert_eq!(struct_op_controller(&set, &g).unwrap(), set);
        let empty = StructureGraph {
            symmetry: vec![],
            proximity: vec![],
            reference: set.clone(),
        };
        assert_eq!(struct_op_controller(&moved, &empty).unwrap(), moved);
        let bad = StructureGraph {
            symmetry: vec![SymmetryRelation::Pair { a: 0, b: 99 }],
            ..empty
        };
        assert!(struct_op_controller(&moved, &bad).is_err());
    }

    #[test]
    fn lifted_seat_is_pulled_back() {
        let set = table_set();
        let mut g = analyze_structure(&set, &cfg()).unwrap();
        g.symmetry.clear();
        assert_eq!(struct_opt_curve(&set, &g, &cfg()).unwrap(), set);
        // One leg only, so the seat takes a single share.
        g.proximity.retain(|c| c.a == 1 || c.b == 1);
        let mut lifted = set.clone();
        lifted[0].shape.translate(&Vector3::new(0.0, 0.1, 0.0));
        let out = struct_opt_curve(&lifted, &g, &cfg()).unwrap();
        assert!((out[0].shape.center().y - 0.05).abs() < 1e-9);
        assert!((out[1].shape.center().y - (-0.23 + 0.05)).abs() < 1e-9);
        let again = struct_opt_curve(&out, &g, &cfg()).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn straight_gc_is_unchanged_by_smoothing() {
        let gc = GcController::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(0.0, 0.2, 0.0),
                Point3::new(0.0, 0.5, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![0.1; 4],
        )
        .unwrap();
        assert_eq!(match_axis_laplacian(&gc, &gc).unwrap(), gc);
        let mut bent = gc.clone();
        bent.axis_points[1].x = 0.1;
        bent.recompute_frames();
        let fixed = match_axis_laplacian(&bent, &gc).unwrap();
        for (p, q) in fixed.axis_points.iter().zip(&gc.axis_points) {
            assert!((p - q).norm() < 1e-12);
        }
        assert_eq!(match_axis_laplacian(&fixed, &gc).unwrap(), fixed);
    }

    #[test]
    fn refit_endpoints() {
        let a = cuboid(0, [0.0, 0.0, 0.0], [0.1, 0.2, 0.3]);
        let b = cuboid(0, [0.1, 0.0, 0.0], [0.2, 0.2, 0.3]);
        assert_eq!(refit(&a, &a, 0.5).unwrap(), a);
        assert_eq!(refit(&a, &b, 0.0).unwrap(), a);
        assert!(refit(&a, &b, 1.0).unwrap().shape.distance(&b.shape) < 1e-12);
        let g = Controller {
            shape: Shape::Gc(
                GcController::new(
                    vec![Point3::origin(), Point3::new(0.0, 1.0, 0.0)],
                    vec![0.1, 0.1],
                )
                .unwrap(),
            ),
            ..a.clone()
        };
        assert!(refit(&a, &g, 0.5).is_err());
    }

    #[test]
    fn fixed_point_terminates_immediately() {
        let set = table_set();
        let g = analyze_structure(&set, &cfg()).unwrap();
        let (out, trace) = optimize(&set, &set, &g, &cfg()).unwrap();
        assert_eq!(out, set);
        assert_eq!(trace.iterations, 1);
        assert_eq!(trace.movements, vec![0.0]);
        assert_eq!(trace.reason, Termination::Threshold);
    }

    #[test]
    fn perturbed_pair_converges_to_mirrored_mean() {
        let set = table_set();
        let mut g = analyze_structure(&set, &cfg()).unwrap();
        g.proximity.clear();
        let mut r = set.clone();
        r[1].shape.translate(&Vector3::new(0.03, 0.0, 0.0));
        r[2].shape.translate(&Vector3::new(-0.01, 0.0, 0.0));
        let c = OptimizationConfig {
            lambda_refit: 0.0,
            ..cfg()
        };
        let (out, trace) = optimize(&set, &r, &g, &c).unwrap();
        assert!((out[1].shape.center().x - 0.27).abs() < 1e-12);
        assert_eq!(out[2].shape, out[2].shape.align(&out[1].shape.reflect_x()));
        assert!(trace.iterations <= 2);
    }

    #[test]
    fn conflicting_reference_terminates_by_threshold() {
        let set = table_set();
        let g = analyze_structure(&set, &cfg()).unwrap();
        let mut r = set.clone();
        r[1].shape.translate(&Vector3::new(0.05, -0.1, 0.0));
        r[0].shape.translate(&Vector3::new(0.0, 0.08, 0.0));
        let (_, trace) = optimize(&set, &r, &g, &cfg()).unwrap();
        assert_eq!(trace.reason, Termination::Threshold);
        assert!(trace.iterations <= 50);
        assert!(*trace.movements.last().unwrap() < 1e-4);
        for w in trace.movements[1..].windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", trace.movements);
        }
        let json = serde_json::to_value(&trace).unwrap();
        assert_eq!(json["reason"], "threshold");
    }

    #[test]
    fn optimize_rejects_mismatched_ids() {
        let set = table_set();
        let g = analyze_structure(&set, &cfg()).unwrap();
        assert!(matches!(
            optimize(&set, &set[1..], &g, &cfg()),
            Err(Error::Mismatch(_))
        ));
        let bad = OptimizationConfig {
            max_iters: 0,
            ..cfg()
        };
        assert!(optimize(&set, &set, &g, &bad).is_err());
    }

    #[test]
    fn deformation_identity_and_extent_doubling() {
        let chair = synth::chair(&synth::ChairParams::default());
        let ctrls = fit_controllers(&chair, 7).unwrap();
        let binding = bind_mesh(&chair, &ctrls).unwrap();
        let same = deform_mesh(&chair, &binding, &ctrls, &ctrls).unwrap();
        for (a, b) in same.vertices.iter().zip(&chair.vertices) {
            assert!((a - b).norm() <= 1e-9);
        }
        let bx = synth::box_mesh("b", Point3::origin(), Vector3::new(0.2, 0.1, 0.1));
        let c = fit_controllers(&bx, 7).unwrap();
        let bind = bind_mesh(&bx, &c).unwrap();
        let Shape::Cuboid(mut cc) = c[0].shape.clone() else {
            panic!()
        };
        let k = (0..3).find(|&k| cc.axes[k].x.abs() > 0.9).unwrap();
        cc.half_extents[k] *= 2.0;
        let out = deform_mesh(&bx, &bind, &c, &[c[0].with_shape(Shape::Cuboid(cc))]).unwrap();
        for (a, b) in out.vertices.iter().zip(&bx.vertices) {
            assert!((a.x - 2.0 * b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12);
        }
        assert!(deform_mesh(&bx, &bind, &c, &[]).is_err());
    }

    #[test]
    fn bent_gc_carries_cylinder() {
        let cyl = synth::cylinder_mesh(
            "c",
            Point3::new(0.0, -0.5, 0.0),
            Vector3::y(),
            0.1,
            1.0,
            32,
            9,
        );
        let ctrls = fit_controllers(&cyl, 3).unwrap();
        let Shape::Gc(gc) = &ctrls[0].shape else {
            panic!("cylinder fitted as {:?}", ctrls[0].kind())
        };
        let binding = bind_mesh(&cyl, &ctrls).unwrap();
        let mid = gc.axis_points[1];
        let top = gc.axis_points[2];
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), 30f64.to_radians());
        let bent_top = mid + rot * (top - mid);
        let bent =
            GcController::new(vec![gc.axis_points[0], mid, bent_top], gc.radii.clone()).unwrap();
        let out = deform_mesh(
            &cyl,
            &binding,
            &ctrls,
            &[ctrls[0].with_shape(Shape::Gc(bent.clone()))],
        )
        .unwrap();
        // Side vertices keep their distance to the bent axis polyline.
        for (v, orig) in out.vertices.iter().zip(&cyl.vertices) {
            let r0 = (orig.x * orig.x + orig.z * orig.z).sqrt();
            if (r0 - 0.1).abs() > 1e-9 || orig.y.abs() > 0.45 {
                continue;
            }
            let d = seg_dist(v, &bent.axis_points[0], &mid).min(seg_dist(v, &mid, &bent_top));
            assert!(
                (d - 0.1).abs() <= 0.02 * 0.1 + 0.1 * (1.0 - 15f64.to_radians().cos()),
                "{d}"
            );
        }
    }

    fn seg_dist(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
        let d = b - a;
        let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
        (a + d * t - p).norm()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn symmetry_pass_is_idempotent(dx in -0.05f64..0.05, dy in -0.05f64..0.05, dz in -0.05f64..0.05, s in 0.8f64..1.2) {
            let set = table_set();
            let g = analyze_structure(&set, &cfg()).unwrap();
            let mut r = set.clone();
            r[1].shape.translate(&Vector3::new(dx, dy, dz));
            if let Shape::Cuboid(c) = &mut r[3].shape { c.half_extents.y *= s; }
            r[0].shape.translate(&Vector3::new(dz, 0.0, 0.0));
            let once = struct_op_controller(&r, &g).unwrap();
            let twice = struct_op_controller(&once, &g).unwrap();
            prop_assert!(max_movement(&once, &twice) <= 1e-12);
        }

        #[test]
        fn optimize_terminates_and_trace_is_consistent(
            seed in proptest::collection::vec(-0.05f64..0.05, 15), lambda in 0.0f64..1.0
        ) {
            let set = table_set();
            let g = analyze_structure(&set, &cfg()).unwrap();
            let r: Vec<Controller> = set.iter().enumerate().map(|(i, c)| {
                let mut c = c.clone();
                c.shape.translate(&Vector3::new(seed[3 * i], seed[3 * i + 1], seed[3 * i + 2]));
                c
            }).collect();
            let c = OptimizationConfig { lambda_refit: lambda, ..cfg() };
            let (_, trace) = optimize(&set, &r, &g, &c).unwrap();
            prop_assert!(trace.iterations <= c.max_iters);
            prop_assert_eq!(trace.movements.len(), trace.iterations);
            prop_assert!(trace.movements.iter().all(|m| *m >= 0.0));
            if trace.reason == Termination::Threshold {
                prop_assert!(*trace.movements.last().unwrap() < c.eps_move);
            }
        }
    }
}
