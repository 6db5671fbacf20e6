//! Model-driven reconstruction of a 3D shape from a single labeled silhouette.
//!
//! A candidate mesh, segmented into parts, is abstracted by cuboid and
//! generalized-cylinder controllers. The target silhouette is matched
//! against renders of the candidate, external controllers are rebuilt from
//! the matched contour segments, and a structure-preserving loop restores
//! the symmetry and contact relations of the original before the mesh is
//! deformed through its controller binding.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`geometry`]: meshes, OBJ I/O, model and frame normalization
//! * [`controllers`]: cuboid / GC fitting, vertex binding, GC symmetrization
//! * [`render`]: pose grids, z-buffered silhouette rasterization, contour tracing
//! * [`retrieval`]: descriptors, pose estimation, candidate and part retrieval
//! * [`correspondence`]: contour parameterization and cyclic alignment
//! * [`reconstruction`]: silhouette-guided external controller construction
//! * [`optimization`]: structure analysis, constraint passes, deformation
//! * [`pipeline`]: end-to-end stages and their on-disk artifacts

pub mod controllers;
pub mod correspondence;
pub mod error;
pub mod geometry;
pub mod optimization;
pub mod pipeline;
pub mod reconstruction;
pub mod render;
pub mod retrieval;
pub mod synth;

pub use controllers::{Binding, Controller, ControllerKind, CuboidController, GcController, Shape};
pub use error::{Error, Result};
pub use geometry::{ImageFrame, Mesh, RigidSimilarity};
pub use optimization::{DeformationTrace, OptimizationConfig, StructureGraph, Termination};
pub use pipeline::{compute_iou, run_pipeline, PipelineConfig, RunReport, Stage};
pub use render::{CameraPose, LabeledSilhouette, SilhouetteImage};
pub use retrieval::{PoseEstimate, SilhouetteDescriptor};

pub use nalgebra::{Point3, Vector3};
