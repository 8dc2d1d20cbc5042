mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use rovi_core::datagen::{generate_dataset, render_sketch, render_strokes, Manifest, SamplerConfig, SketchScript, StrokeList};
use rovi_core::eval::{dataset_report, score_sketch, ScoredVariant};
use rovi_core::io::{load_png, save_pfm, save_png};
use rovi_core::parser::parse_sketch;
use rovi_core::pipeline::{plan_sketch, run_episode, Episode, PipelineError, Stage};
use rovi_core::simulator::{render, WorldState};
use rovi_core::viz::{overlay_keypoints, trace_pixels, trajectory_svg};
use rovi_core::{DrawingStyle, RasterImage};

use config::{GlobalFlags, Settings};

#[derive(Debug, Parser)]
#[command(name = "rovi", version, about = "Compile hand-drawn step-colored sketches into robot trajectories")]
struct Cli {
    #[command(flatten)]
    flags: GlobalFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StyleArg {
    Geometric,
    Loose,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract symbols and keypoints from an annotated image.
    Parse {
        image: PathBuf,
        #[arg(long)]
        clean: Option<PathBuf>,
        /// Write a copy of the image with keypoints marked by crosses.
        #[arg(long)]
        overlay: Option<PathBuf>,
        /// Write the symbol set here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and build a step plan.
    Plan {
        image: PathBuf,
        #[arg(long)]
        clean: Option<PathBuf>,
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the whole pipeline on a scene and a sketch (PNG, stroke-list JSON or sketch-script JSON).
    Run {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        sketch: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a scene's observation image and depth map.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset of annotated scenes.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Scenes to sample from; random tabletops when none are given.
        #[arg(long = "scene")]
        scenes: Vec<PathBuf>,
        /// Force one drawing style for every variant.
        #[arg(long, value_enum)]
        style: Option<StyleArg>,
        #[arg(long)]
        max_steps: Option<u32>,
        /// Sampler settings as JSON; flags above override it.
        #[arg(long)]
        sampler: Option<PathBuf>,
    },
    /// Score the parser against a generated dataset.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every record of a dataset through the pipeline in parallel.
    Batch {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; all cores when omitted.
        #[arg(long)]
        jobs: Option<usize>,
        /// Run every variant, not only the first of each record.
        #[arg(long)]
        all_variants: bool,
    },
}

type CliResult<T> = Result<T, PipelineError>;

fn input_error(code: &str, message: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(Stage::Input, code, message)
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| input_error("Io", format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| input_error("Io", format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| input_error("Io", format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output types serialize")
}

fn read_png(path: &Path) -> CliResult<RasterImage> {
    load_png(path).map_err(|e| input_error("ImageIo", format!("{}: {e}", path.display())))
}

fn write_png(img: &RasterImage, path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| input_error("Io", format!("{}: {e}", dir.display())))?;
    }
    save_png(img, path).map_err(|e| input_error("ImageIo", format!("{}: {e}", path.display())))
}

fn read_scene(path: &Path, s: &Settings) -> CliResult<WorldState> {
    WorldState::from_json(&read_text(path)?, &s.pipeline.palette, s.pipeline.parser.tolerance)
        .map_err(|e| input_error(e.code(), format!("{}: {e}", path.display())))
}

/// A PNG sketch, or a stroke list or sketch script rasterized over the scene's own render.
fn read_sketch(path: &Path, world: &WorldState, s: &Settings) -> CliResult<RasterImage> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let text = read_text(path)?;
        let clean = render(world).image;
        let drawn = match serde_json::from_str::<StrokeList>(&text) {
            Ok(strokes) => render_strokes(&clean, &strokes, &s.pipeline.palette),
            Err(stroke_err) => {
                let script: SketchScript = serde_json::from_str(&text)
                    .map_err(|e| input_error("InvalidSketch", format!("neither a stroke list ({stroke_err}) nor a sketch script ({e})")))?;
                render_sketch(&clean, &script, &s.pipeline.palette)
            }
        };
        Ok(drawn.map_err(|e| input_error(e.code(), e))?.0)
    } else {
        read_png(path)
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn write_episode(dir: &Path, world: &WorldState, ep: &Episode, s: &Settings) -> CliResult<()> {
    write_file(&dir.join("plan.json"), to_json(&ep.plan))?;
    write_file(&dir.join("symbols.json"), to_json(&ep.symbols))?;
    write_file(&dir.join("trace.ndjson"), ep.execution.trace.to_ndjson())?;
    write_file(&dir.join("report.json"), to_json(&ep.report()))?;
    let path = trace_pixels(&world.camera, &ep.execution.trace);
    let svg = trajectory_svg(world.camera.width, world.camera.height, &ep.symbols, &path, &s.pipeline.palette);
    write_file(&dir.join("trajectory.svg"), svg)
}

fn cmd_parse(s: &Settings, image: &Path, clean: Option<&Path>, overlay: Option<&Path>, out: Option<&Path>) -> CliResult<()> {
    let img = read_png(image)?;
    let clean = clean.map(read_png).transpose()?;
    let symbols = parse_sketch(&img, clean.as_ref(), &s.pipeline.palette, &s.pipeline.parser)
        .map_err(|e| PipelineError::new(Stage::Parse, e.code(), &e))?;
    if let Some(p) = overlay {
        write_png(&overlay_keypoints(&img, &symbols, 6), p)?;
    }
    emit(out, &to_json(&symbols))
}

fn cmd_plan(s: &Settings, image: &Path, clean: Option<&Path>, label: Option<&str>, out: Option<&Path>) -> CliResult<()> {
    let img = read_png(image)?;
    let clean = clean.map(read_png).transpose()?;
    let (_, plan) = plan_sketch(&img, clean.as_ref(), label, &s.pipeline)?;
    emit(out, &to_json(&plan))
}

fn cmd_run(s: &Settings, scene: &Path, sketch: &Path, out: &Path) -> CliResult<()> {
    let world = read_scene(scene, s)?;
    let img = read_sketch(sketch, &world, s)?;
    let ep = run_episode(&world, &img, &s.pipeline)?;
    write_png(&img, &out.join("sketch.png"))?;
    write_episode(out, &world, &ep, s)?;
    println!(
        "{}",
        serde_json::json!({
            "success": ep.evaluation.success,
            "alignment": ep.evaluation.alignment,
            "task": ep.plan.task_label,
            "out": out.display().to_string(),
        })
    );
    Ok(())
}

fn cmd_render(s: &Settings, scene: &Path, out: &Path) -> CliResult<()> {
    let world = read_scene(scene, s)?;
    let frame = render(&world);
    write_png(&frame.image, &out.join("observation.png"))?;
    save_pfm(&frame.depth, out.join("depth.pfm")).map_err(|e| input_error("ImageIo", e))
}

fn cmd_generate(
    s: &Settings,
    out: &Path,
    count: usize,
    scenes: &[PathBuf],
    style: Option<StyleArg>,
    max_steps: Option<u32>,
    sampler: Option<&Path>,
) -> CliResult<()> {
    let mut cfg = match sampler {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| input_error("InvalidConfig", e))?,
        None => SamplerConfig::default(),
    };
    if let Some(st) = style {
        cfg.style = Some(match st {
            StyleArg::Geometric => DrawingStyle::Geometric,
            StyleArg::Loose => DrawingStyle::Loose,
        });
    }
    if let Some(m) = max_steps {
        cfg.max_steps = m;
    }
    let worlds = scenes.iter().map(|p| read_scene(p, s)).collect::<CliResult<Vec<_>>>()?;
    let manifest = generate_dataset(out, &worlds, &cfg, &s.pipeline.palette, count, s.seed)
        .map_err(|e| input_error(e.code(), e))?;
    println!("{}", serde_json::json!({ "records": manifest.records.len(), "out": out.display().to_string() }));
    Ok(())
}

fn read_manifest(dataset: &Path) -> CliResult<Manifest> {
    serde_json::from_str(&read_text(&dataset.join("manifest.json"))?).map_err(|e| input_error("InvalidManifest", e))
}

fn cmd_eval(s: &Settings, dataset: &Path, out: Option<&Path>) -> CliResult<()> {
    let manifest = read_manifest(dataset)?;
    let jobs: Vec<_> = manifest
        .records
        .iter()
        .flat_map(|r| r.variants.iter().map(move |v| (r, v)))
        .collect();
    let scored = jobs
        .par_iter()
        .map(|(r, v)| {
            let clean = read_png(&dataset.join(&r.clean))?;
            let img = read_png(&dataset.join(&v.annotated))?;
            let samples = score_sketch(&r.id, &img, Some(&clean), &v.truth, &s.pipeline.palette, &s.pipeline.parser);
            Ok(ScoredVariant { record: r.id.clone(), task: r.task_label.clone(), style: v.style.style, samples })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let report = dataset_report(&scored, s.threshold_px).map_err(|e| PipelineError::new(Stage::Parse, e.code(), e))?;
    if let Some(p) = out {
        write_file(p, to_json(&report))?;
    }
    print!("{}", report.to_table());
    Ok(())
}

#[derive(Serialize)]
struct BatchEntry {
    record: String,
    variant: usize,
    success: bool,
    alignment: Option<f64>,
    error: Option<PipelineError>,
}

fn cmd_batch(s: &Settings, dataset: &Path, out: &Path, jobs: Option<usize>, all_variants: bool) -> CliResult<()> {
    let manifest = read_manifest(dataset)?;
    let work: Vec<_> = manifest
        .records
        .iter()
        .flat_map(|r| {
            let n = if all_variants { r.variants.len() } else { r.variants.len().min(1) };
            (0..n).map(move |k| (r, k))
        })
        .collect();
    let run_one = |(r, k): &(&rovi_core::datagen::RoviRecord, usize)| -> CliResult<BatchEntry> {
        let dir = dataset.join("records").join(&r.id);
        let world = read_scene(&dir.join("scene.json"), s)?;
        let img = read_png(&dataset.join(&r.variants[*k].annotated))?;
        let entry = match run_episode(&world, &img, &s.pipeline) {
            Ok(ep) => {
                write_episode(&out.join(&r.id).join(format!("variant_{k}")), &world, &ep, s)?;
                BatchEntry {
                    record: r.id.clone(),
                    variant: *k,
                    success: ep.evaluation.success,
                    alignment: Some(ep.evaluation.alignment),
                    error: None,
                }
            }
            Err(e) => BatchEntry { record: r.id.clone(), variant: *k, success: false, alignment: None, error: Some(e) },
        };
        Ok(entry)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| input_error("InvalidConfig", e))?;
    let entries = pool.install(|| work.par_iter().map(run_one).collect::<CliResult<Vec<_>>>())?;
    let succeeded = entries.iter().filter(|e| e.success).count();
    let summary = serde_json::json!({ "runs": entries.len(), "succeeded": succeeded, "entries": entries });
    write_file(&out.join("batch.json"), to_json(&summary))?;
    println!("{}", serde_json::json!({ "runs": entries.len(), "succeeded": succeeded }));
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let s = cli.flags.resolve()?;
    match cli.command {
        Command::Parse { image, clean, overlay, out } => {
            cmd_parse(&s, &image, clean.as_deref(), overlay.as_deref(), out.as_deref())
        }
        Command::Plan { image, clean, label, out } => {
            cmd_plan(&s, &image, clean.as_deref(), label.as_deref(), out.as_deref())
        }
        Command::Run { scene, sketch, out } => cmd_run(&s, &scene, &sketch, &out),
        Command::Render { scene, out } => cmd_render(&s, &scene, &out),
        Command::Generate { out, count, scenes, style, max_steps, sampler } => {
            cmd_generate(&s, &out, count, &scenes, style, max_steps, sampler.as_deref())
        }
        Command::Eval { dataset, out } => cmd_eval(&s, &dataset, out.as_deref()),
        Command::Batch { dataset, out, jobs, all_variants } => cmd_batch(&s, &dataset, &out, jobs, all_variants),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e).expect("errors serialize"));
            ExitCode::FAILURE
        }
    }
}
