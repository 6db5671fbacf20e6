//! Procedural test shapes: boxes, cylinders, cones, spheres and a few
//! multi-part furniture models with known dimensions.
//!
//! Used by the test suites, the benchmarks and the CLI's `synth` command.

use std::f64::consts::TAU;

use nalgebra::{Point3, Rotation3, Unit, Vector3};

use crate::geometry::Mesh;

/// Axis-aligned box with 8 vertices and 12 outward-facing triangles.
pub fn box_mesh(name: &str, center: Point3<f64>, half: Vector3<f64>) -> Mesh {
    let mut vertices = Vec::with_capacity(8);
    for i in 0..8 {
        let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
        let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
        let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
        vertices.push(center + Vector3::new(sx * half.x, sy * half.y, sz * half.z));
    }
    let quads = [
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
    ];
    let mut faces = Vec::with_capacity(12);
    for q in quads {
        faces.push([q[0], q[1], q[2]]);
        faces.push([q[0], q[2], q[3]]);
    }
    Mesh {
        vertices,
        face_part: vec![0; faces.len()],
        faces,
        part_names: vec![name.to_string()],
    }
}

/// Box rotated about its center.
pub fn rotated_box_mesh(
    name: &str,
    center: Point3<f64>,
    half: Vector3<f64>,
    rotation: &Rotation3<f64>,
) -> Mesh {
    let mut m = box_mesh(name, Point3::origin(), half);
    for v in &mut m.vertices {
        *v = center + rotation * v.coords;
    }
    m
}

/// Closed frustum along `axis` from `base`: `segments` vertices per ring,
/// `rings` rings (≥ 2) evenly spaced in height, radius interpolated
/// linearly from `r0` to `r1`. A zero radius collapses a ring to a point.
pub fn frustum_mesh(
    name: &str,
    base: Point3<f64>,
    axis: Vector3<f64>,
    height: f64,
    r0: f64,
    r1: f64,
    segments: usize,
    rings: usize,
) -> Mesh {
    let dir = axis.normalize();
    let rot = Rotation3::rotation_between(&Vector3::y(), &dir)
        .unwrap_or_else(|| Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI));
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut ring_start = Vec::with_capacity(rings);
    for k in 0..rings {
        let t = k as f64 / (rings - 1) as f64;
        let r = r0 + (r1 - r0) * t;
        let y = height * t;
        ring_start.push(vertices.len());
        if r == 0.0 {
            vertices.push(base + rot * Vector3::new(0.0, y, 0.0));
            continue;
        }
        for s in 0..segments {
            let a = TAU * s as f64 / segments as f64;
            let local = Vector3::new(r * a.cos(), y, -r * a.sin());
            vertices.push(base + rot * local);
        }
    }
    let total = vertices.len();
    let ring_len = |k: usize| {
        let end = if k + 1 < rings {
            ring_start[k + 1]
        } else {
            total
        };
        end - ring_start[k]
    };
    for k in 0..rings - 1 {
        let (a, b) = (ring_start[k], ring_start[k + 1]);
        match (ring_len(k), ring_len(k + 1)) {
            (1, 1) => {}
            (1, n) => {
                for s in 0..n {
                    faces.push([a, b + s, b + (s + 1) % n]);
                }
            }
            (n, 1) => {
                for s in 0..n {
                    faces.push([a + s, b, a + (s + 1) % n]);
                }
            }
            (n, _) => {
                for s in 0..n {
                    let s1 = (s + 1) % n;
                    faces.push([a + s, b + s, b + s1]);
                    faces.push([a + s, b + s1, a + s1]);
                }
            }
        }
    }
    // caps
    let cap = |k: usize, up: bool, vertices: &mut Vec<Point3<f64>>, faces: &mut Vec<[usize; 3]>| {
        let n = ring_len(k);
        if n == 1 {
            return;
        }
        let start = ring_start[k];
        let center: Vector3<f64> = (start..start + n)
            .map(|i| vertices[i].coords)
            .sum::<Vector3<f64>>()
            / n as f64;
        let c = vertices.len();
        vertices.push(Point3::from(center));
        for s in 0..n {
            let (i, j) = (start + s, start + (s + 1) % n);
            faces.push(if up { [c, j, i] } else { [c, i, j] });
        }
    };
    cap(0, false, &mut vertices, &mut faces);
    cap(rings - 1, true, &mut vertices, &mut faces);
    Mesh {
        vertices,
        face_part: vec![0; faces.len()],
        faces,
        part_names: vec![name.to_string()],
    }
}

pub fn cylinder_mesh(
    name: &str,
    base: Point3<f64>,
    axis: Vector3<f64>,
    radius: f64,
    height: f64,
    segments: usize,
    rings: usize,
) -> Mesh {
    frustum_mesh(name, base, axis, height, radius, radius, segments, rings)
}

/// UV sphere.
pub fn sphere_mesh(
    name: &str,
    center: Point3<f64>,
    radius: f64,
    stacks: usize,
    slices: usize,
) -> Mesh {
    let mut vertices = vec![center + Vector3::new(0.0, -radius, 0.0)];
    for i in 1..stacks {
        let phi = std::f64::consts::PI * i as f64 / stacks as f64;
        let (y, r) = (-radius * phi.cos(), radius * phi.sin());
        for j in 0..slices {
            let a = TAU * j as f64 / slices as f64;
            vertices.push(center + Vector3::new(r * a.cos(), y, -r * a.sin()));
        }
    }
    vertices.push(center + Vector3::new(0.0, radius, 0.0));
    let top = vertices.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * slices + j % slices;
    let mut faces = Vec::new();
    for j in 0..slices {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
        faces.push([top, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            faces.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            faces.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    Mesh {
        vertices,
        face_part: vec![0; faces.len()],
        faces,
        part_names: vec![name.to_string()],
    }
}

/// Dimensions of the synthetic chair family.
#[derive(Debug, Clone, Copy)]
pub struct ChairParams {
    pub seat_half: Vector3<f64>,
    pub leg_length: f64,
    pub leg_half_width: f64,
    /// Leg center offset from the seat center along x and z.
    pub leg_inset: f64,
    pub back_height: f64,
    pub arms: bool,
}

impl Default for ChairParams {
    fn default() -> Self {
        ChairParams {
            seat_half: Vector3::new(0.25, 0.03, 0.25),
            leg_length: 0.45,
            leg_half_width: 0.03,
            leg_inset: 0.2,
            back_height: 0.5,
            arms: false,
        }
    }
}

/// Chair with the seat top at y = +seat_half.y, legs hanging below the seat
/// and the backrest standing on the rear edge of the seat. Parts, in order:
/// seat, back, leg_fl, leg_fr, leg_bl, leg_br, then arm_l, arm_r if present.
/// Front is +z, left is -x.
pub fn chair(p: &ChairParams) -> Mesh {
    let s = p.seat_half;
    let mut m = box_mesh("seat", Point3::origin(), s);
    let back_half = Vector3::new(s.x, p.back_height / 2.0, 0.03);
    m.append(&box_mesh(
        "back",
        Point3::new(0.0, s.y + back_half.y, -s.z + back_half.z),
        back_half,
    ));
    let leg_half = Vector3::new(p.leg_half_width, p.leg_length / 2.0, p.leg_half_width);
    let leg_y = -s.y - leg_half.y;
    for (name, x, z) in [
        ("leg_fl", -p.leg_inset, p.leg_inset),
        ("leg_fr", p.leg_inset, p.leg_inset),
        ("leg_bl", -p.leg_inset, -p.leg_inset),
        ("leg_br", p.leg_inset, -p.leg_inset),
    ] {
        m.append(&box_mesh(name, Point3::new(x, leg_y, z), leg_half));
    }
    if p.arms {
        let arm_half = Vector3::new(0.02, 0.1, s.z * 0.8);
        for (name, x) in [("arm_l", -s.x + arm_half.x), ("arm_r", s.x - arm_half.x)] {
            m.append(&box_mesh(
                name,
                Point3::new(x, s.y + arm_half.y, 0.02),
                arm_half,
            ));
        }
    }
    m
}

/// Seat resting on four mirrored legs, without a backrest.
pub fn stool() -> Mesh {
    let mut m = box_mesh("seat", Point3::origin(), Vector3::new(0.25, 0.03, 0.25));
    let leg_half = Vector3::new(0.03, 0.2, 0.03);
    for (name, x, z) in [
        ("leg_fl", -0.2, 0.2),
        ("leg_fr", 0.2, 0.2),
        ("leg_bl", -0.2, -0.2),
        ("leg_br", 0.2, -0.2),
    ] {
        m.append(&box_mesh(name, Point3::new(x, -0.23, z), leg_half));
    }
    m
}

/// Table: slab on four legs, symmetric about x = 0.
pub fn table() -> Mesh {
    let mut m = box_mesh("top", Point3::origin(), Vector3::new(0.5, 0.03, 0.3));
    let leg_half = Vector3::new(0.035, 0.3, 0.035);
    for (name, x, z) in [
        ("leg_fl", -0.42, 0.22),
        ("leg_fr", 0.42, 0.22),
        ("leg_bl", -0.42, -0.22),
        ("leg_br", 0.42, -0.22),
    ] {
        m.append(&box_mesh(name, Point3::new(x, -0.33, z), leg_half));
    }
    m
}

/// Lamp: round base, cylindrical stem, conical shade.
pub fn lamp() -> Mesh {
    let mut m = cylinder_mesh(
        "base",
        Point3::new(0.0, -0.5, 0.0),
        Vector3::y(),
        0.2,
        0.05,
        24,
        2,
    );
    m.append(&cylinder_mesh(
        "stem",
        Point3::new(0.0, -0.45, 0.0),
        Vector3::y(),
        0.025,
        0.6,
        16,
        7,
    ));
    m.append(&frustum_mesh(
        "shade",
        Point3::new(0.0, 0.15, 0.0),
        Vector3::y(),
        0.3,
        0.25,
        0.1,
        24,
        5,
    ));
    m
}

/// Bench: slab on two wide panels, symmetric about x = 0.
pub fn bench() -> Mesh {
    let mut m = box_mesh("slab", Point3::origin(), Vector3::new(0.5, 0.04, 0.15));
    for (name, x) in [("side_l", -0.4), ("side_r", 0.4)] {
        m.append(&box_mesh(
            name,
            Point3::new(x, -0.24, 0.0),
            Vector3::new(0.04, 0.2, 0.13),
        ));
    }
    m
}

/// Three mutually distinct asymmetric models, used where no two views of a
/// library may produce the same silhouette.
pub fn asymmetric_library() -> Vec<Mesh> {
    let mut a = box_mesh(
        "block",
        Point3::new(0.1, 0.0, 0.05),
        Vector3::new(0.3, 0.12, 0.2),
    );
    a.append(&cylinder_mesh(
        "post",
        Point3::new(-0.15, 0.12, 0.1),
        Vector3::new(0.2, 1.0, 0.1),
        0.06,
        0.45,
        16,
        4,
    ));
    a.append(&rotated_box_mesh(
        "fin",
        Point3::new(0.32, 0.2, -0.1),
        Vector3::new(0.04, 0.15, 0.1),
        &Rotation3::from_axis_angle(&Vector3::z_axis(), 0.5),
    ));

    let mut b = rotated_box_mesh(
        "beam",
        Point3::new(0.0, 0.0, 0.0),
        Vector3::new(0.45, 0.06, 0.08),
        &Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.2, 0.3, 1.0)), 0.4),
    );
    b.append(&frustum_mesh(
        "horn",
        Point3::new(0.3, 0.1, 0.05),
        Vector3::new(0.3, 1.0, -0.4),
        0.35,
        0.1,
        0.02,
        16,
        4,
    ));
    b.append(&box_mesh(
        "foot",
        Point3::new(-0.35, -0.15, -0.1),
        Vector3::new(0.08, 0.1, 0.12),
    ));

    let mut c = sphere_mesh("head", Point3::new(-0.1, 0.25, 0.05), 0.15, 8, 16);
    c.append(&box_mesh(
        "torso",
        Point3::new(0.05, -0.05, 0.0),
        Vector3::new(0.12, 0.18, 0.25),
    ));
    c.append(&cylinder_mesh(
        "tail",
        Point3::new(0.15, -0.1, -0.2),
        Vector3::new(1.0, -0.2, -0.6),
        0.035,
        0.4,
        12,
        3,
    ));
    vec![a, b, c]
}

/// Symmetric (about x = 0) test library with distinct silhouettes:
/// chair, armchair, table, stool, bench.
pub fn symmetric_library() -> Vec<Mesh> {
    vec![
        chair(&ChairParams::default()),
        chair(&ChairParams {
            arms: true,
            ..ChairParams::default()
        }),
        table(),
        stool(),
        bench(),
    ]
}
