use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use proxyfit::pipeline::{run_from, run_stage, PipelineConfig, Stage};

#[derive(Parser)]
#[command(
    name = "proxyfit",
    version,
    about = "Deform a segmented 3D model to match a target silhouette"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize the library models and fit their controllers.
    FitControllers(Common),
    /// Render every library model from every grid pose.
    RenderViews(Common),
    /// Rank the rendered views against the target silhouette.
    EstimatePose(Common),
    /// Transfer part labels to the target and choose the candidate model.
    Retrieve(Common),
    /// Align the candidate contour with the target contour.
    Correspond(Common),
    /// Rebuild external controllers from the aligned contours.
    Reconstruct(Common),
    /// Run the structure-preserving controller optimization.
    Optimize(Common),
    /// Deform the candidate mesh and write the report.
    Deform(Common),
    /// Run every stage in order.
    FullPipeline(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Library directory (or single OBJ file).
    #[arg(long)]
    library: Option<PathBuf>,
    /// Target silhouette (PNG mask or JSON polylines).
    #[arg(long)]
    target: Option<PathBuf>,
    /// Output directory for all stage artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of grid poses.
    #[arg(long)]
    poses: Option<usize>,
    /// Render resolution of the pose grid.
    #[arg(long)]
    resolution: Option<usize>,
    /// Accepted for reproducible invocations; the pipeline has no randomness.
    #[arg(long)]
    seed: Option<u64>,
    /// Omit per-stage timings from the report.
    #[arg(long)]
    no_timings: bool,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                let mut cfg: PipelineConfig =
                    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                let base = path.parent().unwrap_or(std::path::Path::new("."));
                for p in [&mut cfg.library, &mut cfg.target, &mut cfg.out] {
                    if !p.as_os_str().is_empty() && p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
                cfg
            }
            None => PipelineConfig::default(),
        };
        if let Some(p) = &self.library {
            cfg.library = p.clone();
        }
        if let Some(p) = &self.target {
            cfg.target = p.clone();
        }
        if let Some(p) = &self.out {
            cfg.out = p.clone();
        }
        if let Some(n) = self.poses {
            cfg.poses = n;
        }
        if let Some(n) = self.resolution {
            cfg.resolution = n;
        }
        if self.no_timings {
            cfg.timings = false;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (common, stage) = match &cli.command {
        Command::FitControllers(c) => (c, Some(Stage::FitControllers)),
        Command::RenderViews(c) => (c, Some(Stage::RenderViews)),
        Command::EstimatePose(c) => (c, Some(Stage::EstimatePose)),
        Command::Retrieve(c) => (c, Some(Stage::Retrieve)),
        Command::Correspond(c) => (c, Some(Stage::Correspond)),
        Command::Reconstruct(c) => (c, Some(Stage::Reconstruct)),
        Command::Optimize(c) => (c, Some(Stage::Optimize)),
        Command::Deform(c) => (c, Some(Stage::Deform)),
        Command::FullPipeline(c) => (c, None),
    };
    let cfg = match common.config() {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let result = match stage {
        Some(s) => run_stage(&cfg, s).map(|r| r.map(|r| r.iou_after)),
        None => run_from(&cfg, Stage::FitControllers).map(|r| Some(r.iou_after)),
    };
    match result {
        Ok(Some(iou)) => {
            println!("wrote {} (iou after {iou:.4})", cfg.out.display());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
