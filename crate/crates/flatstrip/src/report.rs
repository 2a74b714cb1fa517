//! Scene pipeline and the verification report.
//!
//! Builds frames, rulings, and the box from a scene, evaluates every check
//! with its tolerance, and assembles a deterministic JSON-serializable
//! report: field order is fixed by the structs, and all randomness comes
//! from the recorded seed.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::develop::{develop_patch, isometry_defect, DevelopError};
use crate::flatapprox::{
    estimate_box, flatness_residual, ruling_fields, ruling_override, tangency_residual,
    BoxEstimate, FlatError, RuledPatch, NONDEGENERACY_FLOOR,
};
use crate::frames::{
    build_frames, check_nonasymptotic, nonasymptotic_margin, parallelism_residual, FrameError,
    UnitSpeedCurve,
};
use crate::scene::{parse_ruling_override, BoxSpec, SceneError, SceneFile, SurfaceSpec};
use crate::surface::Hypersurface;

/// Hard gate for the non-asymptotic hypothesis: relative margins below this
/// are treated as exact violations (error), not mere check failures.
const ASYMPTOTIC_GATE: f64 = 1e-14;
/// t-samples for the flatness and tangency sweeps (node-aligned).
const RESIDUAL_SAMPLES: usize = 200;
/// Isometry sweep resolution: t segments, u levels, polyline subdivisions.
const ISOMETRY_GRID: (usize, usize, usize) = (128, 8, 16);

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Flat(#[from] FlatError),
    #[error(transparent)]
    Develop(#[from] DevelopError),
}

impl PipelineError {
    /// The asymptotic-direction hypothesis failure, wherever it surfaced.
    pub fn asymptotic_t(&self) -> Option<f64> {
        match self {
            PipelineError::Frame(FrameError::AsymptoticDirection { t, .. }) => Some(*t),
            PipelineError::Flat(FlatError::Frame(FrameError::AsymptoticDirection {
                t, ..
            })) => Some(*t),
            _ => None,
        }
    }
}

/// Verification tolerances after applying scene overrides to the defaults.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub orthonormality: f64,
    pub parallelism: f64,
    pub nonasymptotic: f64,
    pub system: f64,
    pub nondegeneracy: f64,
    pub flatness: f64,
    pub tangency: f64,
    pub isometry: f64,
}

impl Default for Tolerances {
    fn default() -> Tolerances {
        Tolerances {
            orthonormality: 1e-10,
            parallelism: 1e-8,
            nonasymptotic: 1e-8,
            system: 1e-12,
            nondegeneracy: NONDEGENERACY_FLOOR,
            flatness: 1e-8,
            tangency: 1e-8,
            isometry: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn from_scene(scene: &SceneFile) -> Tolerances {
        let mut tol = Tolerances::default();
        let spec = &scene.tolerances;
        if let Some(v) = spec.orthonormality {
            tol.orthonormality = v;
        }
        if let Some(v) = spec.parallelism {
            tol.parallelism = v;
        }
        if let Some(v) = spec.nonasymptotic {
            tol.nonasymptotic = v;
        }
        if let Some(v) = spec.system {
            tol.system = v;
        }
        if let Some(v) = spec.nondegeneracy {
            tol.nondegeneracy = v;
        }
        if let Some(v) = spec.flatness {
            tol.flatness = v;
        }
        if let Some(v) = spec.tangency {
            tol.tangency = v;
        }
        if let Some(v) = spec.isometry {
            tol.isometry = v;
        }
        tol
    }
}

/// One evaluated check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// Extremal residual or margin.
    pub value: f64,
    /// How value relates to tolerance when passing: "<=" or ">=".
    pub comparator: String,
    pub tolerance: f64,
    /// Curve parameter realizing the extremum, when localized.
    pub location_t: Option<f64>,
    pub pass: bool,
}

impl CheckResult {
    fn upper(name: &str, value: f64, tolerance: f64, location_t: Option<f64>) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            value,
            comparator: "<=".to_string(),
            tolerance,
            location_t,
            pass: value <= tolerance,
        }
    }

    fn lower(name: &str, value: f64, tolerance: f64, location_t: Option<f64>) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            value,
            comparator: ">=".to_string(),
            tolerance,
            location_t,
            pass: value >= tolerance,
        }
    }
}

/// Scene-shape facts worth surfacing beside the checks.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ReportExtras {
    /// Least-squares intersection of the ruling lines, when well posed
    /// (cone-like patches, m = 2).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apex_point: Option<Vec<f64>>,
    /// Worst distance from a ruling line to that point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apex_distance_max: Option<f64>,
    /// For cylinder scenes: worst patch-sample distance from the surface
    /// (flat inputs reproduce themselves).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_reproduction_max: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct VerificationReport {
    pub schema: u32,
    pub scene: String,
    pub seed: u64,
    pub m: usize,
    pub ambient_dim: usize,
    pub requested_samples: usize,
    pub grid_steps: usize,
    pub curve_length: f64,
    pub closed: bool,
    pub box_mode: String,
    pub box_half_widths: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_v_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_capped: Option<bool>,
    pub tolerances: Tolerances,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
    pub extras: ReportExtras,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

/// Everything the commands need after the construction phase.
#[derive(Debug)]
pub struct Pipeline {
    pub surface: Hypersurface,
    pub patch: RuledPatch,
    pub estimate: Option<BoxEstimate>,
    pub seed: u64,
    pub requested_samples: usize,
}

/// Run the construction: frames, hypothesis gate, rulings, box.
pub fn build_pipeline(scene: &SceneFile) -> Result<Pipeline, PipelineError> {
    scene.validate()?;
    let surface = scene.surface()?;
    let curve = scene.curve(&surface)?;
    let usc = UnitSpeedCurve::new(&surface, &curve)?;
    let fc = build_frames(&usc, scene.grid.samples, &scene.rotation())?;
    check_nonasymptotic(&fc, ASYMPTOTIC_GATE)?;
    let field = match &scene.ruling_override {
        Some(text) => {
            let coefficients = parse_ruling_override(text, fc.m())?;
            ruling_override(&fc, &coefficients)?
        }
        None => ruling_fields(&fc)?,
    };
    let mut patch = RuledPatch::assemble(fc, field);
    let estimate = match &scene.box_spec {
        BoxSpec::Auto { safety } => {
            let est = estimate_box(&patch, *safety, scene.seed)?;
            let dims = patch.frames.m() - 1;
            patch.set_box(vec![est.half_width; dims]);
            Some(est)
        }
        BoxSpec::Explicit { half_widths } => {
            patch.set_box(half_widths.clone());
            None
        }
    };
    Ok(Pipeline {
        surface,
        patch,
        estimate,
        seed: scene.seed,
        requested_samples: scene.grid.samples,
    })
}

/// Node indices of an n-point sweep spread evenly over the grid.
fn sweep_indices(steps: usize, n: usize) -> Vec<usize> {
    (0..n)
        .map(|i| ((i as f64 / (n - 1) as f64) * steps as f64).round() as usize)
        .collect()
}

fn orthonormality_check(pipeline: &Pipeline, tol: f64) -> CheckResult {
    let mut worst = 0.0_f64;
    let mut at = pipeline.patch.frames.nodes[0].t;
    for node in &pipeline.patch.frames.nodes {
        for a in 0..node.e.len() {
            for b in a..node.e.len() {
                let g = node.e[a].dot(&node.e[b]);
                let target = if a == b { 1.0 } else { 0.0 };
                let err = (g - target).abs();
                if err > worst {
                    worst = err;
                    at = node.t;
                }
            }
        }
    }
    CheckResult::upper("orthonormality", worst, tol, Some(at))
}

fn system_check(pipeline: &Pipeline, tol: f64) -> CheckResult {
    let mut worst = 0.0_f64;
    let mut at = pipeline.patch.frames.nodes[0].t;
    for (node, xs) in pipeline
        .patch
        .frames
        .nodes
        .iter()
        .zip(&pipeline.patch.field.x)
    {
        for x in xs {
            let mut contraction = 0.0;
            for (e, tau) in node.e.iter().zip(&node.tau) {
                contraction += x.dot(e) * tau;
            }
            if contraction.abs() > worst {
                worst = contraction.abs();
                at = node.t;
            }
        }
    }
    CheckResult::upper("system_identity", worst, tol, Some(at))
}

fn nondegeneracy_check(pipeline: &Pipeline, tol: f64) -> CheckResult {
    let mut least = f64::INFINITY;
    let mut at = pipeline.patch.frames.nodes[0].t;
    for (node, z0) in pipeline
        .patch
        .frames
        .nodes
        .iter()
        .zip(&pipeline.patch.field.z0)
    {
        let n = z0.norm();
        if n < least {
            least = n;
            at = node.t;
        }
    }
    CheckResult::lower("nondegeneracy", least, tol, Some(at))
}

fn residual_checks(
    pipeline: &Pipeline,
    tol_flatness: f64,
    tol_tangency: f64,
) -> Result<(CheckResult, CheckResult), PipelineError> {
    let patch = &pipeline.patch;
    let steps = patch.frames.steps();
    let mut worst_flat = 0.0_f64;
    let mut flat_at = patch.frames.nodes[0].t;
    let mut worst_tan = 0.0_f64;
    let mut tan_at = flat_at;
    for idx in sweep_indices(steps, RESIDUAL_SAMPLES) {
        let t = patch.frames.nodes[idx].t;
        for r in flatness_residual(patch, t)? {
            if r.abs() > worst_flat {
                worst_flat = r.abs();
                flat_at = t;
            }
        }
        let angle = tangency_residual(&pipeline.surface, patch, t)?;
        if angle > worst_tan {
            worst_tan = angle;
            tan_at = t;
        }
    }
    Ok((
        CheckResult::upper("flatness", worst_flat, tol_flatness, Some(flat_at)),
        CheckResult::upper("tangency", worst_tan, tol_tangency, Some(tan_at)),
    ))
}

/// Least-squares common point of the ruling lines (m = 2): minimizes the
/// summed squared point-line distances. None when the normal matrix is
/// ill conditioned (near-parallel rulings).
fn fit_apex(patch: &RuledPatch) -> Option<(Vec<f64>, f64)> {
    let n = patch.frames.nodes[0].position.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (node, xs) in patch.frames.nodes.iter().zip(&patch.field.x) {
        let x = &xs[0];
        let proj = DMatrix::<f64>::identity(n, n) - x * x.transpose();
        b += &proj * &node.position;
        a += proj;
    }
    let eigen = a.clone().symmetric_eigen();
    let max_ev = eigen.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let min_ev = eigen
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_ev.is_nan() || min_ev <= 1e-6 * max_ev {
        return None;
    }
    let apex = a.lu().solve(&b)?;
    let mut worst = 0.0_f64;
    for (node, xs) in patch.frames.nodes.iter().zip(&patch.field.x) {
        let x = &xs[0];
        let d = &apex - &node.position;
        let off = (&d - x * x.dot(&d)).norm();
        worst = worst.max(off);
    }
    Some((apex.iter().cloned().collect(), worst))
}

/// For cylinder scenes: worst deviation of patch samples from the cylinder.
fn self_reproduction(scene: &SceneFile, patch: &RuledPatch) -> Option<f64> {
    let radius = match &scene.surface {
        SurfaceSpec::Cylinder { radius } => *radius,
        _ => return None,
    };
    let steps = patch.frames.steps();
    let half = patch.half_widths[0];
    let mut worst = 0.0_f64;
    for idx in sweep_indices(steps, 65) {
        let node = &patch.frames.nodes[idx];
        let x = &patch.field.x[idx][0];
        for q in 0..=8 {
            let u = -half + 2.0 * half * q as f64 / 8.0;
            let p = &node.position + x * u;
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            worst = worst.max((r - radius).abs());
        }
    }
    Some(worst)
}

/// Evaluate every check against the pipeline.
pub fn run_checks(
    scene: &SceneFile,
    scene_name: &str,
    pipeline: &Pipeline,
) -> Result<VerificationReport, PipelineError> {
    let tol = Tolerances::from_scene(scene);
    let patch = &pipeline.patch;
    let fc = &patch.frames;
    let mut checks = Vec::new();

    checks.push(orthonormality_check(pipeline, tol.orthonormality));

    let (par, par_t) = parallelism_residual(fc);
    checks.push(CheckResult::upper(
        "parallelism",
        par,
        tol.parallelism,
        Some(par_t),
    ));

    let (margin, margin_t, _) = nonasymptotic_margin(fc);
    checks.push(CheckResult::lower(
        "nonasymptotic_margin",
        margin,
        tol.nonasymptotic,
        Some(margin_t),
    ));

    checks.push(system_check(pipeline, tol.system));
    checks.push(nondegeneracy_check(pipeline, tol.nondegeneracy));

    let (flat, tan) = residual_checks(pipeline, tol.flatness, tol.tangency)?;
    checks.push(flat);
    checks.push(tan);

    let min_half = patch
        .half_widths
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let mut box_check = CheckResult::lower("box_half_width", min_half, 0.0, None);
    box_check.comparator = ">".to_string();
    box_check.pass = min_half > 0.0 && min_half.is_finite();
    checks.push(box_check);

    let mut extras = ReportExtras::default();
    if fc.m() == 2 {
        let strip = develop_patch(patch)?;
        let (nt, nu, sub) = ISOMETRY_GRID;
        let (defect, at_s) = isometry_defect(patch, &strip, nt, nu, sub)?;
        // map the argmax arc length back to a curve parameter for the report
        let at_t = patch
            .frames
            .nodes
            .iter()
            .min_by(|a, b| {
                (a.s - at_s)
                    .abs()
                    .partial_cmp(&(b.s - at_s).abs())
                    .expect("finite")
            })
            .map(|n| n.t);
        checks.push(CheckResult::upper("isometry", defect, tol.isometry, at_t));

        if let Some((apex, dist)) = fit_apex(patch) {
            extras.apex_point = Some(apex);
            extras.apex_distance_max = Some(dist);
        }
    }
    extras.self_reproduction_max = self_reproduction(scene, patch);

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        schema: crate::scene::SCENE_SCHEMA,
        scene: scene_name.to_string(),
        seed: pipeline.seed,
        m: fc.m(),
        ambient_dim: fc.m() + 1,
        requested_samples: pipeline.requested_samples,
        grid_steps: fc.steps(),
        curve_length: fc.length,
        closed: fc.closed,
        box_mode: match &scene.box_spec {
            BoxSpec::Auto { .. } => "auto".to_string(),
            BoxSpec::Explicit { .. } => "explicit".to_string(),
        },
        box_half_widths: patch.half_widths.clone(),
        box_v_star: pipeline.estimate.map(|e| e.v_star),
        box_capped: pipeline.estimate.map(|e| e.capped),
        tolerances: tol,
        checks,
        pass,
        extras,
    })
}
