//! Meshes, OBJ I/O and input normalization.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Longest image side after frame normalization, in pixels.
pub const CANONICAL_SIDE: u32 = 500;

/// Indexed triangle mesh with one part label per face.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
    pub face_part: Vec<usize>,
    /// Group name of each part, indexed by part id.
    pub part_names: Vec<String>,
}

impl Mesh {
    /// Builds a mesh and checks its invariants.
    pub fn new(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[usize; 3]>,
        face_part: Vec<usize>,
        part_names: Vec<String>,
    ) -> Result<Self> {
        let mesh = Mesh {
            vertices,
            faces,
            face_part,
            part_names,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.faces.len() != self.face_part.len() {
            return Err(Error::InvalidMesh(format!(
                "{} faces but {} part labels",
                self.faces.len(),
                self.face_part.len()
            )));
        }
        let n = self.vertices.len();
        for (i, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!("face {i} index out of range")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {i} is degenerate")));
            }
        }
        let mut used = vec![false; self.part_names.len()];
        for &p in &self.face_part {
            match used.get_mut(p) {
                Some(u) => *u = true,
                None => return Err(Error::InvalidMesh(format!("part id {p} has no name"))),
            }
        }
        if let Some(p) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("part id {p} has no faces")));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn part_count(&self) -> usize {
        self.part_names.len()
    }

    pub fn part_faces(&self, part: usize) -> impl Iterator<Item = &[usize; 3]> + '_ {
        self.faces
            .iter()
            .zip(&self.face_part)
            .filter(move |(_, &p)| p == part)
            .map(|(f, _)| f)
    }

    /// Sorted, deduplicated vertex indices referenced by faces of `part`.
    pub fn part_vertex_indices(&self, part: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self.part_faces(part).flatten().copied().collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    /// Part label of every vertex: the part of the first face using it.
    /// Vertices referenced by no face get `None`.
    pub fn vertex_parts(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.vertices.len()];
        for (f, &p) in self.faces.iter().zip(&self.face_part) {
            for &v in f {
                out[v].get_or_insert(p);
            }
        }
        out
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(self.vertices.iter())
    }

    pub fn transformed(&self, t: &RigidSimilarity) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|p| t.apply(p)).collect(),
            ..self.clone()
        }
    }

    /// Appends `other` as new parts, shifting its indices.
    pub fn append(&mut self, other: &Mesh) {
        let vo = self.vertices.len();
        let po = self.part_names.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces.extend(
            other
                .faces
                .iter()
                .map(|f| [f[0] + vo, f[1] + vo, f[2] + vo]),
        );
        self.face_part
            .extend(other.face_part.iter().map(|p| p + po));
        self.part_names.extend(other.part_names.iter().cloned());
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn from_points<'a>(mut pts: impl Iterator<Item = &'a Point3<f64>>) -> Option<Aabb> {
        let first = *pts.next()?;
        let mut b = Aabb {
            min: first,
            max: first,
        };
        for p in pts {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }
}

/// `p ↦ scale · rotation · p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidSimilarity {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl RigidSimilarity {
    pub fn identity() -> Self {
        RigidSimilarity {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scale {scale} must be positive"
            )));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if ortho > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "rotation is not a proper rotation".into(),
            ));
        }
        Ok(RigidSimilarity {
            rotation,
            translation,
            scale,
        })
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords * self.scale + self.translation)
    }
}

/// Centers a mesh on its bounding-box center and scales its longest side to 1.
///
/// Orientation is left untouched: input models are expected to be aligned
/// with their reflection plane at x = 0.
pub fn normalize_model(mesh: &Mesh) -> Result<(Mesh, RigidSimilarity)> {
    if mesh.is_empty() || mesh.vertices.is_empty() {
        return Err(Error::Empty("mesh has no faces".into()));
    }
    let b = mesh.bounds().expect("non-empty");
    let longest = b.extent().max();
    if !(longest > 0.0) {
        return Err(Error::Degenerate(
            "mesh bounding box has zero extent".into(),
        ));
    }
    let scale = 1.0 / longest;
    let t = RigidSimilarity {
        rotation: Matrix3::identity(),
        translation: -b.center().coords * scale,
        scale,
    };
    // Evaluate as (p - c) * s rather than through `apply` so that an already
    // normalized mesh maps to itself bit for bit.
    let c = b.center();
    let vertices = mesh
        .vertices
        .iter()
        .map(|p| Point3::from((p - c) * scale))
        .collect();
    Ok((
        Mesh {
            vertices,
            ..mesh.clone()
        },
        t,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageFrame {
    pub width: u32,
    pub height: u32,
}

impl ImageFrame {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "frame {width}x{height} is empty"
            )));
        }
        Ok(ImageFrame { width, height })
    }
}

/// Rescales a frame so its longest side is exactly 500 pixels, up or down.
pub fn normalize_frame(frame: ImageFrame) -> (ImageFrame, f64) {
    let longest = frame.width.max(frame.height);
    let s = CANONICAL_SIDE as f64 / longest as f64;
    let side = |v: u32| {
        if v == longest {
            CANONICAL_SIDE
        } else {
            ((v as f64 * s).round() as u32).max(1)
        }
    };
    (
        ImageFrame {
            width: side(frame.width),
            height: side(frame.height),
        },
        s,
    )
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text)
}

/// Parses ASCII OBJ. `v`, `f` and `g` are honored; every other directive is
/// skipped. Each distinct group name with at least one face becomes a part,
/// numbered in order of first appearance. Polygons are fan-triangulated.
pub fn parse_obj(text: &str) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut face_part = Vec::new();
    let mut part_names: Vec<String> = Vec::new();
    let mut part_by_name: HashMap<String, usize> = HashMap::new();
    let mut current_group: Option<String> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        match tag {
            "v" => {
                let coords: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::MalformedObj {
                        line,
                        message: format!("vertex coordinate: {e}"),
                    })?;
                if coords.len() < 3 || coords.len() > 4 {
                    return Err(Error::MalformedObj {
                        line,
                        message: format!("vertex needs 3 coordinates, got {}", coords.len()),
                    });
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(Error::MalformedObj {
                        line,
                        message: "non-finite vertex coordinate".into(),
                    });
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            "g" => {
                let name = tokens.collect::<Vec<_>>().join(" ");
                current_group = Some(if name.is_empty() {
                    "default".into()
                } else {
                    name
                });
            }
            "f" => {
                let idx = tokens
                    .map(|t| parse_face_index(t, line, vertices.len()))
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() < 3 {
                    return Err(Error::MalformedObj {
                        line,
                        message: "face needs at least 3 vertices".into(),
                    });
                }
                let Some(group) = current_group.as_ref() else {
                    return Err(Error::Unsegmented);
                };
                let part = *part_by_name.entry(group.clone()).or_insert_with(|| {
                    part_names.push(group.clone());
                    part_names.len() - 1
                });
                for k in 1..idx.len() - 1 {
                    let tri = [idx[0], idx[k], idx[k + 1]];
                    if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                        return Err(Error::DegenerateFace { line });
                    }
                    faces.push(tri);
                    face_part.push(part);
                }
            }
            _ => {}
        }
    }
    if part_names.is_empty() {
        return Err(Error::Unsegmented);
    }
    Mesh::new(vertices, faces, face_part, part_names)
}

fn parse_face_index(token: &str, line: usize, count: usize) -> Result<usize> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head.parse().map_err(|_| Error::MalformedObj {
        line,
        message: format!("bad face index {token:?}"),
    })?;
    let resolved = if raw > 0 {
        raw - 1
    } else if raw < 0 {
        count as i64 + raw
    } else {
        -1
    };
    if resolved < 0 || resolved >= count as i64 {
        return Err(Error::UndefinedVertex {
            line,
            index: raw,
            count,
        });
    }
    Ok(resolved as usize)
}

/// Serializes a mesh as OBJ. Coordinates use shortest round-trip formatting,
/// so reading the output back reproduces the vertices exactly.
pub fn write_obj_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    let mut current = None;
    for (f, &p) in mesh.faces.iter().zip(&mesh.face_part) {
        if current != Some(p) {
            let _ = writeln!(s, "g {}", mesh.part_names[p]);
            current = Some(p);
        }
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn write_obj(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_obj_string(mesh)).map_err(|e| Error::io(path, e))
}
