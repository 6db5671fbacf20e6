//! End-to-end driver. Each stage reads the artifacts of the stage before it
//! from the output directory and writes its own, so stages can be run one
//! at a time or chained by [`run_pipeline`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Point2;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::controllers::{bind_mesh, fit_controllers, Controller, DEFAULT_PROFILES};
use crate::correspondence::{transfer_labels, DEFAULT_SAMPLES};
use crate::error::{Error, Result};
use crate::geometry::{load_mesh, normalize_model, write_obj_string, Mesh};
use crate::optimization::{
    analyze_structure, deform_mesh, optimize, DeformationTrace, OptimizationConfig, Termination,
};
use crate::reconstruction::{
    collect_runs, detect_symmetric_pairs, reconstruct_all, ControllerRuns,
};
use crate::render::{
    encode_png, extract_contour, generate_pose_set, rasterize, read_png, render_silhouette,
    svg_paths, write_png, CameraPose, ContourLoop, LabeledSilhouette, Projector, SilhouetteImage,
    BACKGROUND, DEFAULT_POSES, DEFAULT_RESOLUTION, POSE_DISTANCE,
};
use crate::retrieval::{
    describe_rendered, estimate_pose, retrieve_candidate, PoseEstimate, RankedModel, RankedPose,
};

pub const CONTROLLER_SCHEMA_VERSION: u32 = 1;

pub const LIBRARY_FILE: &str = "library.json";
pub const CONTROLLERS_DIR: &str = "controllers";
pub const VIEWS_DIR: &str = "views";
pub const VIEWS_FILE: &str = "views.json";
pub const POSE_FILE: &str = "pose.json";
pub const LABELS_FILE: &str = "target_labels.json";
pub const CANDIDATE_FILE: &str = "candidate.json";
pub const RUNS_FILE: &str = "runs.json";
pub const RECONSTRUCTED_FILE: &str = "reconstructed.json";
pub const DEFORMED_CONTROLLERS_FILE: &str = "deformed_controllers.json";
pub const TRACE_FILE: &str = "trace.json";
pub const DEFORMED_OBJ: &str = "deformed.obj";
pub const DEFORMED_PNG: &str = "deformed.png";
pub const OVERLAY_SVG: &str = "overlay.svg";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    FitControllers,
    RenderViews,
    EstimatePose,
    Retrieve,
    Correspond,
    Reconstruct,
    Optimize,
    Deform,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::FitControllers,
        Stage::RenderViews,
        Stage::EstimatePose,
        Stage::Retrieve,
        Stage::Correspond,
        Stage::Reconstruct,
        Stage::Optimize,
        Stage::Deform,
    ];

    /// Subcommand name.
    pub fn name(self) -> &'static str {
        match self {
            Stage::FitControllers => "fit-controllers",
            Stage::RenderViews => "render-views",
            Stage::EstimatePose => "estimate-pose",
            Stage::Retrieve => "retrieve",
            Stage::Correspond => "correspond",
            Stage::Reconstruct => "reconstruct",
            Stage::Optimize => "optimize",
            Stage::Deform => "deform",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// A directory of segmented OBJ models (read in file-name order) or a
    /// single OBJ file.
    pub library: PathBuf,
    /// Target silhouette: a PNG mask (nonzero is foreground) or JSON polylines.
    pub target: PathBuf,
    pub out: PathBuf,
    pub poses: usize,
    pub resolution: usize,
    pub samples: usize,
    pub top_k: usize,
    /// Model units per pixel of the target image, centered on the origin.
    /// When unset the target is assumed to be framed like an automatic
    /// render of the candidate at the estimated pose.
    pub ortho_scale: Option<f64>,
    pub optimization: OptimizationConfig,
    pub timings: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            library: PathBuf::new(),
            target: PathBuf::new(),
            out: PathBuf::from("out"),
            poses: DEFAULT_POSES,
            resolution: DEFAULT_RESOLUTION,
            samples: DEFAULT_SAMPLES,
            top_k: 5,
            ortho_scale: None,
            optimization: OptimizationConfig::default(),
            timings: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.poses == 0 {
            return bad("poses must be >= 1".into());
        }
        if self.resolution < 8 {
            return bad(format!("resolution {} < 8", self.resolution));
        }
        if self.samples < 8 {
            return bad(format!("samples {} < 8", self.samples));
        }
        if self.top_k == 0 {
            return bad("top_k must be >= 1".into());
        }
        if let Some(s) = self.ortho_scale {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("ortho_scale {s} must be positive"));
            }
        }
        self.optimization.validate()
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// On-disk controller set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerFile {
    pub version: u32,
    pub controllers: Vec<Controller>,
}

pub fn controllers_to_json(ctrls: &[Controller]) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ControllerFile {
        version: CONTROLLER_SCHEMA_VERSION,
        controllers: ctrls.to_vec(),
    })?)
}

pub fn controllers_from_json(s: &str) -> Result<Vec<Controller>> {
    let f: ControllerFile = serde_json::from_str(s)?;
    if f.version != CONTROLLER_SCHEMA_VERSION {
        return Err(Error::InvalidParameter(format!(
            "unsupported controller schema version {}",
            f.version
        )));
    }
    Ok(f.controllers)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub name: String,
    pub source: PathBuf,
    pub controllers: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryIndex {
    pub models: Vec<LibraryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub shape: usize,
    pub pose_index: usize,
    pub file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewIndex {
    pub resolution: usize,
    pub poses: Vec<CameraPose>,
    pub views: Vec<ViewEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateChoice {
    pub candidate: usize,
    pub name: String,
    pub pose: CameraPose,
    pub ranking: Vec<RankedModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunsArtifact {
    pub candidate: usize,
    pub projector: Projector,
    pub runs: Vec<ControllerRuns>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSummary {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub reason: Termination,
    pub final_movement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub pose: PoseSummary,
    pub candidate: usize,
    pub candidate_name: String,
    pub iou_before: f64,
    pub iou_after: f64,
    pub trace: TraceSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

/// Intersection over union of two foreground masks; 1 when both are empty.
pub fn compute_iou(a: &SilhouetteImage, b: &SilhouetteImage) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Mismatch(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.labels.iter().zip(&b.labels) {
        let (fa, fb) = (p != BACKGROUND, q != BACKGROUND);
        inter += (fa && fb) as usize;
        union += (fa || fb) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// OBJ files of the library in file-name order.
pub fn library_sources(path: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("obj")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Empty(format!("no OBJ models in {}", path.display())));
    }
    Ok(files)
}

pub fn load_normalized(path: &Path) -> Result<Mesh> {
    Ok(normalize_model(&load_mesh(path)?)?.0)
}

#[derive(Deserialize)]
struct PolylineTarget {
    width: usize,
    height: usize,
    loops: Vec<Vec<[f64; 2]>>,
}

/// Loads a target silhouette as a single-label mask.
pub fn load_target(path: &Path) -> Result<SilhouetteImage> {
    let is_json = path
        .extension()
        .is_some_and(|x| x.eq_ignore_ascii_case("json"));
    let img = if is_json {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let t: PolylineTarget = serde_json::from_str(&text)?;
        let loops: Vec<ContourLoop> = t
            .loops
            .iter()
            .filter(|l| l.len() >= 3)
            .map(|l| {
                let mut points: Vec<Point2<f64>> =
                    l.iter().map(|p| Point2::new(p[0], p[1])).collect();
                if points.first() != points.last() {
                    points.push(points[0]);
                }
                ContourLoop {
                    labels: vec![0; points.len() - 1],
                    points,
                }
            })
            .collect();
        crate::render::rasterize_loops(&loops, t.width, t.height)
    } else {
        read_png(path)?.to_mask()
    };
    if img.foreground_count() == 0 {
        return Err(Error::Empty(format!(
            "target {} has no foreground",
            path.display()
        )));
    }
    Ok(img)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(value)?)
}

fn read_text(cfg: &PipelineConfig, name: &str, stage: Stage) -> Result<String> {
    let path = cfg.path(name);
    match fs::read_to_string(&path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingArtifact {
            path,
            stage: stage.name(),
        }),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn read_json<T: DeserializeOwned>(cfg: &PipelineConfig, name: &str, stage: Stage) -> Result<T> {
    Ok(serde_json::from_str(&read_text(cfg, name, stage)?)?)
}

fn read_controllers(cfg: &PipelineConfig, name: &str, stage: Stage) -> Result<Vec<Controller>> {
    controllers_from_json(&read_text(cfg, name, stage)?)
}

fn library_meshes(index: &LibraryIndex) -> Result<Vec<Mesh>> {
    index
        .models
        .par_iter()
        .map(|m| load_normalized(&m.source))
        .collect()
}

fn candidate_controllers(
    cfg: &PipelineConfig,
    index: &LibraryIndex,
    candidate: usize,
) -> Result<Vec<Controller>> {
    let entry = index
        .models
        .get(candidate)
        .ok_or_else(|| Error::Mismatch(format!("candidate {candidate} is not in the library")))?;
    read_controllers(
        cfg,
        &entry.controllers.to_string_lossy(),
        Stage::FitControllers,
    )
}

/// Scores closer than this to the best are treated as ties.
pub const VIEW_TIE_TOL: f64 = 1e-9;

/// Top-ranked pose, with near-ties resolved towards a camera above the
/// object and then towards its front (+z). Under orthographic projection a
/// model symmetric about x = 0 has the same silhouette from (az, el) and
/// (180° − az, −el), so the silhouette alone cannot separate them.
pub fn choose_view(estimate: &PoseEstimate) -> &RankedPose {
    let best = estimate.best();
    let key = |r: &RankedPose| (r.pose.elevation, r.pose.azimuth.cos());
    estimate
        .ranking
        .iter()
        .filter(|r| {
            r.shape == best.shape
                && r.score - best.score <= VIEW_TIE_TOL * best.score.abs().max(1.0)
        })
        .fold(best, |acc, r| {
            let (ka, kr) = (key(acc), key(r));
            if kr.0 > ka.0 + 1e-9 || ((kr.0 - ka.0).abs() <= 1e-9 && kr.1 > ka.1 + 1e-9) {
                r
            } else {
                acc
            }
        })
}

/// Pose at which the candidate is rendered against the target.
fn object_pose(cfg: &PipelineConfig, pose: &CameraPose) -> CameraPose {
    CameraPose {
        distance: POSE_DISTANCE,
        ortho_scale: cfg.ortho_scale,
        ..*pose
    }
}

fn target_resolution(target: &SilhouetteImage) -> Result<usize> {
    if target.width != target.height {
        return Err(Error::InvalidParameter(format!(
            "target must be square, got {}x{}",
            target.width, target.height
        )));
    }
    Ok(target.width)
}

/// Normalizes every library model and fits its controllers.
pub fn stage_fit_controllers(cfg: &PipelineConfig) -> Result<()> {
    let sources = library_sources(&cfg.library)?;
    let fitted = sources
        .par_iter()
        .map(|src| {
            let mesh = load_normalized(src)?;
            fit_controllers(&mesh, DEFAULT_PROFILES)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut models = Vec::new();
    for (k, (src, ctrls)) in sources.iter().zip(&fitted).enumerate() {
        let rel = PathBuf::from(CONTROLLERS_DIR).join(format!("model_{k:03}.json"));
        write_text(
            &cfg.path(&rel.to_string_lossy()),
            &controllers_to_json(ctrls)?,
        )?;
        models.push(LibraryEntry {
            name: src
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            source: src.clone(),
            controllers: rel,
        });
    }
    write_json(&cfg.path(LIBRARY_FILE), &LibraryIndex { models })
}

/// Renders every library model from every pose of the grid.
pub fn stage_render_views(cfg: &PipelineConfig) -> Result<()> {
    let index: LibraryIndex = read_json(cfg, LIBRARY_FILE, Stage::FitControllers)?;
    let meshes = library_meshes(&index)?;
    let poses = generate_pose_set(cfg.poses)?;
    let dir = cfg.path(VIEWS_DIR);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let jobs: Vec<(usize, usize)> = (0..meshes.len())
        .flat_map(|s| (0..poses.len()).map(move |p| (s, p)))
        .collect();
    let views = jobs
        .par_iter()
        .map(|&(s, p)| {
            let img = render_silhouette(&meshes[s], &poses[p], cfg.resolution)?;
            let file = PathBuf::from(VIEWS_DIR).join(format!("s{s:03}_p{p:04}.png"));
            let bytes = encode_png(&img)?;
            let path = cfg.path(&file.to_string_lossy());
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            Ok(ViewEntry {
                shape: s,
                pose_index: p,
                file,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_json(
        &cfg.path(VIEWS_FILE),
        &ViewIndex {
            resolution: cfg.resolution,
            poses,
            views,
        },
    )
}

/// Ranks all rendered views against the target silhouette.
pub fn stage_estimate_pose(cfg: &PipelineConfig) -> Result<()> {
    let index: ViewIndex = read_json(cfg, VIEWS_FILE, Stage::RenderViews)?;
    let target = load_target(&cfg.target)?;
    let images = index
        .views
        .par_iter()
        .map(|v| read_png(cfg.path(&v.file.to_string_lossy())))
        .collect::<Result<Vec<_>>>()?;
    let per_shape = index.poses.len();
    let shapes = index.views.iter().map(|v| v.shape + 1).max().unwrap_or(0);
    if index.views.len() != shapes * per_shape {
        return Err(Error::Mismatch(
            "view index does not cover every shape and pose".into(),
        ));
    }
    let rendered = describe_rendered(&images, &index.poses)?;
    let estimate = estimate_pose(&target, &rendered, cfg.top_k)?;
    write_text(&cfg.path(POSE_FILE), &estimate.to_json()?)
}

/// Transfers part labels to the target and picks the candidate model.
pub fn stage_retrieve(cfg: &PipelineConfig) -> Result<()> {
    let estimate = PoseEstimate::from_json(&read_text(cfg, POSE_FILE, Stage::EstimatePose)?)?;
    let index: LibraryIndex = read_json(cfg, LIBRARY_FILE, Stage::FitControllers)?;
    let meshes = library_meshes(&index)?;
    let target = load_target(&cfg.target)?;
    let res = target_resolution(&target)?;
    let best = choose_view(&estimate);
    let representative = meshes.get(best.shape).ok_or_else(|| {
        Error::Mismatch(format!("pose estimate names unknown shape {}", best.shape))
    })?;
    let contour = extract_contour(&target)?;
    let labeled = transfer_labels(representative, &best.pose, res, &contour)?;
    let ranking = retrieve_candidate(&labeled, &meshes, &best.pose, res)?;
    let candidate = ranking[0].model;
    write_json(&cfg.path(LABELS_FILE), &labeled)?;
    write_json(
        &cfg.path(CANDIDATE_FILE),
        &CandidateChoice {
            candidate,
            name: index.models[candidate].name.clone(),
            pose: best.pose,
            ranking,
        },
    )
}

/// Aligns the candidate's labeled contour with the target contour.
pub fn stage_correspond(cfg: &PipelineConfig) -> Result<()> {
    let choice: CandidateChoice = read_json(cfg, CANDIDATE_FILE, Stage::Retrieve)?;
    let object: LabeledSilhouette = read_json(cfg, LABELS_FILE, Stage::Retrieve)?;
    let index: LibraryIndex = read_json(cfg, LIBRARY_FILE, Stage::FitControllers)?;
    let originals = candidate_controllers(cfg, &index, choice.candidate)?;
    let mesh = load_normalized(&index.models[choice.candidate].source)?;
    let render = render_silhouette(&mesh, &object_pose(cfg, &choice.pose), object.width)?;
    let projector = render
        .projector
        .clone()
        .expect("rendered images carry a projector");
    let candidate = extract_contour(&render)?;
    let runs = collect_runs(&candidate, &object, &originals, cfg.samples)?;
    write_json(
        &cfg.path(RUNS_FILE),
        &RunsArtifact {
            candidate: choice.candidate,
            projector,
            runs,
        },
    )
}

/// Rebuilds the external controllers from the matched runs.
pub fn stage_reconstruct(cfg: &PipelineConfig) -> Result<()> {
    let runs: RunsArtifact = read_json(cfg, RUNS_FILE, Stage::Correspond)?;
    let index: LibraryIndex = read_json(cfg, LIBRARY_FILE, Stage::FitControllers)?;
    let originals = candidate_controllers(cfg, &index, runs.candidate)?;
    let symmetry = detect_symmetric_pairs(&originals, cfg.optimization.tol_sym);
    let rebuilt = reconstruct_all(&originals, &runs.runs, &runs.projector, &symmetry)?;
    write_text(
        &cfg.path(RECONSTRUCTED_FILE),
        &controllers_to_json(&rebuilt)?,
    )
}

/// Runs the structure-preserving optimization.
pub fn stage_optimize(cfg: &PipelineConfig) -> Result<()> {
    let reconstructed = read_controllers(cfg, RECONSTRUCTED_FILE, Stage::Reconstruct)?;
    let choice: CandidateChoice = read_json(cfg, CANDIDATE_FILE, Stage::Retrieve)?;
    let index: LibraryIndex = read_json(cfg, LIBRARY_FILE, Stage::FitControllers)?;
    let originals = candidate_controllers(cfg, &index, choice.candidate)?;
    let graph = analyze_structure(&originals, &cfg.optimization)?;
    let (deformed, trace) = optimize(&originals, &reconstructed, &graph, &cfg.optimization)?;
    write_text(
        &cfg.path(DEFORMED_CONTROLLERS_FILE),
        &controllers_to_json(&deformed)?,
    )?;
    write_json(&cfg.path(TRACE_FILE), &trace)
}

fn overlay_svg(target: &LabeledSilhouette, deformed: &LabeledSilhouette) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <g id=\"target\">\n{}</g>\n<g id=\"deformed\">\n{}</g>\n</svg>\n",
        svg_paths(target, 2.0, None),
        svg_paths(deformed, 1.0, Some("4 2")),
        w = target.width,
        h = target.height,
    )
}

/// Deforms the candidate mesh and writes the final outputs and report.
pub fn stage_deform(cfg: &PipelineConfig) -> Result<RunReport> {
    let deformed_ctrls = read_controllers(cfg, DEFORMED_CONTROLLERS_FILE, Stage::Optimize)?;
    let trace: DeformationTrace = read_json(cfg, TRACE_FILE, Stage::Optimize)?;
    let runs: RunsArtifact = read_json(cfg, RUNS_FILE, Stage::Correspond)?;
    let choice: CandidateChoice = read_json(cfg, CANDIDATE_FILE, Stage::Retrieve)?;
    let object: LabeledSilhouette = read_json(cfg, LABELS_FILE, Stage::Retrieve)?;
    let index: LibraryIndex = read_json(cfg, LIBRARY_FILE, Stage::FitControllers)?;
    let originals = candidate_controllers(cfg, &index, choice.candidate)?;
    let mesh = load_normalized(&index.models[choice.candidate].source)?;
    let binding = bind_mesh(&mesh, &originals)?;
    let deformed = deform_mesh(&mesh, &binding, &originals, &deformed_ctrls)?;

    let target = load_target(&cfg.target)?;
    let before = rasterize(&mesh, &runs.projector);
    let after = rasterize(&deformed, &runs.projector);
    let report = RunReport {
        pose: PoseSummary {
            azimuth_deg: choice.pose.azimuth.to_degrees(),
            elevation_deg: choice.pose.elevation.to_degrees(),
        },
        candidate: choice.candidate,
        candidate_name: choice.name,
        iou_before: compute_iou(&target, &before)?,
        iou_after: compute_iou(&target, &after)?,
        trace: TraceSummary {
            iterations: trace.iterations,
            reason: trace.reason,
            final_movement: trace.movements.last().copied().unwrap_or(0.0),
        },
        timings_ms: None,
    };
    let deformed_contour = if after.foreground_count() > 0 {
        extract_contour(&after)?
    } else {
        LabeledSilhouette {
            width: after.width,
            height: after.height,
            loops: vec![],
        }
    };
    write_text(&cfg.path(DEFORMED_OBJ), &write_obj_string(&deformed))?;
    write_png(&after, cfg.path(DEFORMED_PNG))?;
    write_text(
        &cfg.path(OVERLAY_SVG),
        &overlay_svg(&object, &deformed_contour),
    )?;
    write_json(&cfg.path(REPORT_FILE), &report)?;
    Ok(report)
}

/// Runs a single stage.
pub fn run_stage(cfg: &PipelineConfig, stage: Stage) -> Result<Option<RunReport>> {
    cfg.validate()?;
    match stage {
        Stage::FitControllers => stage_fit_controllers(cfg)?,
        Stage::RenderViews => stage_render_views(cfg)?,
        Stage::EstimatePose => stage_estimate_pose(cfg)?,
        Stage::Retrieve => stage_retrieve(cfg)?,
        Stage::Correspond => stage_correspond(cfg)?,
        Stage::Reconstruct => stage_reconstruct(cfg)?,
        Stage::Optimize => stage_optimize(cfg)?,
        Stage::Deform => return stage_deform(cfg).map(Some),
    }
    Ok(None)
}

/// Runs every stage from `first` onwards. With timings enabled the report
/// is rewritten with the wall time of each stage.
pub fn run_from(cfg: &PipelineConfig, first: Stage) -> Result<RunReport> {
    cfg.validate()?;
    let mut timings = BTreeMap::new();
    let mut report = None;
    for stage in Stage::ALL.into_iter().filter(|s| *s >= first) {
        let start = Instant::now();
        report = run_stage(cfg, stage)?;
        timings.insert(
            stage.name().to_string(),
            start.elapsed().as_secs_f64() * 1e3,
        );
    }
    let mut report = report.expect("deform stage produces the report");
    if cfg.timings {
        report.timings_ms = Some(timings);
        write_json(&cfg.path(REPORT_FILE), &report)?;
    }
    Ok(report)
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    run_from(cfg, Stage::FitControllers)
}
