//! Scene-driven command line tool: build patch artifacts, verify the
//! construction, and unroll plane strips.
//!
//! Exit codes: 0 all checks pass; 1 runtime failure; 2 the curve hits an
//! asymptotic direction; 3 scene parse or validation error; 4 checks failed
//! (artifacts still written); 5 development requested for m != 2.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use flatstrip::develop::{develop_patch, DevelopError};
use flatstrip::export::{
    render_curve_obj, render_patch_csv, render_patch_obj, render_strip_csv, render_strip_svg,
};
use flatstrip::report::{build_pipeline, run_checks, Pipeline, PipelineError, VerificationReport};
use flatstrip::scene::{BoxSpec, SceneFile};

const EXIT_RUNTIME: u8 = 1;
const EXIT_ASYMPTOTIC: u8 = 2;
const EXIT_SCENE: u8 = 3;
const EXIT_CHECKS: u8 = 4;
const EXIT_NOT_PLANAR: u8 = 5;

#[derive(Parser)]
#[command(
    name = "flatstrip",
    version,
    about = "Ruled flat approximations along hypersurface curves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SceneArgs {
    /// Scene file (JSON)
    scene: String,
    /// Override grid samples
    #[arg(long)]
    samples: Option<usize>,
    /// Override box safety (switches the box to auto mode)
    #[arg(long)]
    safety: Option<f64>,
    /// Override the probe seed
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated Givens angles for the initial normal frame
    #[arg(long)]
    frame_rotation: Option<String>,
    /// Negate the second frame vector of the initial frame
    #[arg(long)]
    frame_flip: bool,
    /// Test hook: replace the first ruling, e.g. "e2" or "e1+e2"
    #[arg(long)]
    ruling_override: Option<String>,
    #[arg(long, help = "Override the orthonormality tolerance")]
    tol_orthonormality: Option<f64>,
    #[arg(long, help = "Override the parallelism tolerance")]
    tol_parallelism: Option<f64>,
    #[arg(long, help = "Override the nonasymptotic margin tolerance")]
    tol_nonasymptotic: Option<f64>,
    #[arg(long, help = "Override the system identity tolerance")]
    tol_system: Option<f64>,
    #[arg(long, help = "Override the nondegeneracy tolerance")]
    tol_nondegeneracy: Option<f64>,
    #[arg(long, help = "Override the flatness tolerance")]
    tol_flatness: Option<f64>,
    #[arg(long, help = "Override the tangency tolerance")]
    tol_tangency: Option<f64>,
    #[arg(long, help = "Override the isometry tolerance")]
    tol_isometry: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build artifacts: patch mesh, curve polyline, verification report
    Build {
        #[command(flatten)]
        scene: SceneArgs,
        /// Output directory
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Evaluate every check and print the report
    Verify {
        #[command(flatten)]
        scene: SceneArgs,
        /// Also write report.json here
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Unroll the strip (m = 2): strip.svg, strip.csv, report
    Develop {
        #[command(flatten)]
        scene: SceneArgs,
        /// Output directory
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn apply_overrides(scene: &mut SceneFile, args: &SceneArgs) -> Result<(), String> {
    if let Some(samples) = args.samples {
        scene.grid.samples = samples;
    }
    if let Some(safety) = args.safety {
        scene.box_spec = BoxSpec::Auto { safety };
    }
    if let Some(seed) = args.seed {
        scene.seed = seed;
    }
    if let Some(text) = &args.frame_rotation {
        let angles = text
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("bad --frame-rotation {text:?}: {e}"))?;
        scene.frame.rotation = angles;
    }
    if args.frame_flip {
        scene.frame.flip = true;
    }
    if let Some(text) = &args.ruling_override {
        scene.ruling_override = Some(text.clone());
    }
    let tol = &mut scene.tolerances;
    for (slot, value) in [
        (&mut tol.orthonormality, args.tol_orthonormality),
        (&mut tol.parallelism, args.tol_parallelism),
        (&mut tol.nonasymptotic, args.tol_nonasymptotic),
        (&mut tol.system, args.tol_system),
        (&mut tol.nondegeneracy, args.tol_nondegeneracy),
        (&mut tol.flatness, args.tol_flatness),
        (&mut tol.tangency, args.tol_tangency),
        (&mut tol.isometry, args.tol_isometry),
    ] {
        if value.is_some() {
            *slot = value;
        }
    }
    Ok(())
}

fn exit_for(err: &PipelineError) -> u8 {
    if err.asymptotic_t().is_some() {
        return EXIT_ASYMPTOTIC;
    }
    match err {
        PipelineError::Scene(_) => EXIT_SCENE,
        PipelineError::Develop(DevelopError::UnsupportedDimension { .. }) => EXIT_NOT_PLANAR,
        _ => EXIT_RUNTIME,
    }
}

fn fail(err: &PipelineError) -> u8 {
    if let Some(t) = err.asymptotic_t() {
        eprintln!("error: asymptotic direction at t = {t}");
        eprintln!("  {err}");
    } else {
        eprintln!("error: {err}");
    }
    exit_for(err)
}

fn print_checks(report: &VerificationReport) {
    for check in &report.checks {
        println!(
            "check {:<22} {:<4} value {:.6e} (want {} {:.1e})",
            check.name,
            if check.pass { "ok" } else { "FAIL" },
            check.value,
            check.comparator,
            check.tolerance
        );
    }
    println!("result: {}", if report.pass { "pass" } else { "FAIL" });
}

fn load_scene(args: &SceneArgs) -> Result<(SceneFile, String), u8> {
    let mut scene = match SceneFile::load(&args.scene) {
        Ok(scene) => scene,
        Err(err) => {
            eprintln!("error: {err}");
            return Err(EXIT_SCENE);
        }
    };
    if let Err(message) = apply_overrides(&mut scene, args) {
        eprintln!("error: {message}");
        return Err(EXIT_SCENE);
    }
    Ok((scene, args.scene.clone()))
}

fn pipeline_and_report(
    scene: &SceneFile,
    name: &str,
) -> Result<(Pipeline, VerificationReport), u8> {
    let pipeline = build_pipeline(scene).map_err(|e| fail(&e))?;
    info!(
        "frames: {} steps over length {:.6}",
        pipeline.patch.frames.steps(),
        pipeline.patch.frames.length
    );
    let report = run_checks(scene, name, &pipeline).map_err(|e| fail(&e))?;
    Ok((pipeline, report))
}

fn write_artifact(path: &Path, content: &str) -> Result<(), u8> {
    std::fs::write(path, content).map_err(|err| {
        eprintln!("error: cannot write {}: {err}", path.display());
        EXIT_RUNTIME
    })
}

fn ensure_dir(dir: &Path) -> Result<(), u8> {
    std::fs::create_dir_all(dir).map_err(|err| {
        eprintln!("error: cannot create {}: {err}", dir.display());
        EXIT_RUNTIME
    })
}

fn cmd_build(args: &SceneArgs, out: &Path) -> Result<u8, u8> {
    let (scene, name) = load_scene(args)?;
    let (pipeline, report) = pipeline_and_report(&scene, &name)?;
    ensure_dir(out)?;
    let mesh_err = |e: flatstrip::export::ExportError| {
        eprintln!("error: {e}");
        EXIT_RUNTIME
    };
    if pipeline.patch.frames.m() == 2 {
        let obj = render_patch_obj(&pipeline.patch).map_err(mesh_err)?;
        write_artifact(&out.join("patch.obj"), &obj)?;
    } else {
        let csv = render_patch_csv(&pipeline.patch).map_err(mesh_err)?;
        write_artifact(&out.join("patch.csv"), &csv)?;
    }
    let curve = render_curve_obj(&pipeline.patch).map_err(mesh_err)?;
    write_artifact(&out.join("curve.obj"), &curve)?;
    write_artifact(&out.join("report.json"), &report.to_json())?;
    print_checks(&report);
    Ok(if report.pass { 0 } else { EXIT_CHECKS })
}

fn cmd_verify(args: &SceneArgs, out: Option<&Path>) -> Result<u8, u8> {
    let (scene, name) = load_scene(args)?;
    let (_pipeline, report) = pipeline_and_report(&scene, &name)?;
    print!("{}", report.to_json());
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_artifact(&dir.join("report.json"), &report.to_json())?;
    }
    Ok(if report.pass { 0 } else { EXIT_CHECKS })
}

fn cmd_develop(args: &SceneArgs, out: &Path) -> Result<u8, u8> {
    let (scene, name) = load_scene(args)?;
    let (pipeline, report) = pipeline_and_report(&scene, &name)?;
    let strip = develop_patch(&pipeline.patch).map_err(|e| fail(&PipelineError::Develop(e)))?;
    ensure_dir(out)?;
    write_artifact(&out.join("strip.svg"), &render_strip_svg(&strip))?;
    write_artifact(&out.join("strip.csv"), &render_strip_csv(&strip))?;
    write_artifact(&out.join("report.json"), &report.to_json())?;
    print_checks(&report);
    println!(
        "strip: length {:.6}, turning {:.6} rad",
        strip.s.last().unwrap(),
        strip.turning
    );
    Ok(if report.pass { 0 } else { EXIT_CHECKS })
}

fn run() -> u8 {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Build { scene, out } => cmd_build(scene, out),
        Command::Verify { scene, out } => cmd_verify(scene, out.as_deref()),
        Command::Develop { scene, out } => cmd_develop(scene, out),
    };
    match outcome {
        Ok(code) => code,
        Err(code) => code,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("FLATSTRIP_LOG")).init();
    ExitCode::from(run())
}
