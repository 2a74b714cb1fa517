//! Shared helpers for the integration suite: finite-difference jets, a
//! seeded random expression generator, scene fixtures, and patch builders.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flatstrip::expr::Expression;
use flatstrip::flatapprox::{ruling_fields, RuledPatch};
use flatstrip::frames::{propagate_frame, FrameRotation, FramedCurve, UnitSpeedCurve};
use flatstrip::surface::{CurveOnSurface, Hypersurface};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Finite-difference jets (fourth order)

/// Fourth-order first-derivative stencil: offsets and weights over 12h.
const D1: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

fn eval_finite(expr: &Expression, x: &[f64]) -> Option<f64> {
    match expr.eval(x) {
        Ok(v) if v.is_finite() && v.abs() < 1e8 => Some(v),
        _ => None,
    }
}

/// Gradient by the 5-point central stencil; None if any sample is bad.
pub fn fd_gradient(expr: &Expression, x: &[f64], h: f64) -> Option<Vec<f64>> {
    let n = x.len();
    let mut grad = Vec::with_capacity(n);
    let mut p = x.to_vec();
    for a in 0..n {
        let mut acc = 0.0;
        for (off, w) in D1 {
            p[a] = x[a] + off * h;
            acc += w * eval_finite(expr, &p)?;
        }
        p[a] = x[a];
        grad.push(acc / (12.0 * h));
    }
    Some(grad)
}

/// Hessian: 5-point second-derivative stencil on the diagonal, the first
/// derivative stencil applied twice for mixed entries. None on a bad sample.
pub fn fd_hessian(expr: &Expression, x: &[f64], h: f64) -> Option<Vec<Vec<f64>>> {
    let n = x.len();
    let mut hess = vec![vec![0.0; n]; n];
    let mut p = x.to_vec();
    let f0 = eval_finite(expr, x)?;
    for a in 0..n {
        let mut acc = -30.0 * f0;
        for (off, w) in [(-2.0, -1.0), (-1.0, 16.0), (1.0, 16.0), (2.0, -1.0)] {
            p[a] = x[a] + off * h;
            acc += w * eval_finite(expr, &p)?;
        }
        p[a] = x[a];
        hess[a][a] = acc / (12.0 * h * h);
    }
    for a in 0..n {
        for b in a + 1..n {
            let mut acc = 0.0;
            for (oa, wa) in D1 {
                for (ob, wb) in D1 {
                    p[a] = x[a] + oa * h;
                    p[b] = x[b] + ob * h;
                    acc += wa * wb * eval_finite(expr, &p)?;
                }
            }
            p[a] = x[a];
            p[b] = x[b];
            let v = acc / (144.0 * h * h);
            hess[a][b] = v;
            hess[b][a] = v;
        }
    }
    Some(hess)
}

// ---------------------------------------------------------------------------
// Random expressions

fn random_leaf(rng: &mut ChaCha8Rng, n_vars: usize) -> String {
    if rng.gen_bool(0.6) {
        format!("x{}", rng.gen_range(1..=n_vars))
    } else {
        format!("{:.3}", rng.gen_range(-2.0..2.0))
    }
}

/// Random expression source text over x1..x{n_vars}, tree depth `depth`.
/// Domain-restricted operations appear freely; callers reject bad samples.
pub fn random_expression(rng: &mut ChaCha8Rng, n_vars: usize, depth: usize) -> String {
    if depth == 0 {
        return random_leaf(rng, n_vars);
    }
    match rng.gen_range(0..10) {
        0..=4 => {
            let op = ["+", "-", "*", "/"][rng.gen_range(0..4)];
            let a = random_expression(rng, n_vars, depth - 1);
            let b = random_expression(rng, n_vars, depth - 1);
            format!("({a} {op} {b})")
        }
        5..=7 => {
            let f = ["sin", "cos", "tan", "exp", "log", "sqrt"][rng.gen_range(0..6)];
            let a = random_expression(rng, n_vars, depth - 1);
            format!("{f}({a})")
        }
        8 => {
            let a = random_expression(rng, n_vars, depth - 1);
            format!("({a})^{}", rng.gen_range(2..=3))
        }
        _ => {
            let a = random_expression(rng, n_vars, depth - 1);
            format!("-({a})")
        }
    }
}

/// One accepted jet comparison case: the parsed expression and a point where
/// the value, the jets, and every finite-difference sample are finite and
/// moderate.
pub struct JetCase {
    pub text: String,
    pub expr: Expression,
    pub point: Vec<f64>,
}

pub const FD_STEP: f64 = 2e-3;
const JET_MAGNITUDE_CAP: f64 = 50.0;

/// Draw accepted comparison cases from the seeded stream until `count` pass
/// the rejection filter (finite, bounded jets, valid FD stencils).
pub fn jet_cases(seed: u64, count: usize) -> Vec<JetCase> {
    let mut rng = rng(seed);
    let mut cases = Vec::with_capacity(count);
    let vars_pool = ["x1", "x2", "x3"];
    while cases.len() < count {
        let n_vars = rng.gen_range(1..=3);
        let depth = rng.gen_range(1..=3);
        let text = random_expression(&mut rng, n_vars, depth);
        let point: Vec<f64> = (0..n_vars).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let Ok(expr) = Expression::parse(&text, &vars_pool[..n_vars]) else {
            continue;
        };
        let Ok(jet) = expr.eval_jet2(&point) else {
            continue;
        };
        let mut magnitudes = vec![jet.value];
        magnitudes.extend_from_slice(&jet.gradient);
        for a in 0..n_vars {
            for b in 0..n_vars {
                magnitudes.push(jet.hessian(a, b));
            }
        }
        if magnitudes
            .iter()
            .any(|v| !v.is_finite() || v.abs() > JET_MAGNITUDE_CAP)
        {
            continue;
        }
        if fd_gradient(&expr, &point, FD_STEP).is_none()
            || fd_hessian(&expr, &point, FD_STEP).is_none()
        {
            continue;
        }
        cases.push(JetCase { text, expr, point });
    }
    cases
}

/// Relative mismatch with a unit floor, so tiny derivatives compare in
/// absolute terms.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Worst relative jet error (gradient and Hessian vs finite differences)
/// over `count` accepted random expressions.
pub fn worst_jet_error(seed: u64, count: usize) -> (f64, String) {
    let mut worst = 0.0;
    let mut at = String::new();
    for case in jet_cases(seed, count) {
        let jet = case.expr.eval_jet2(&case.point).unwrap();
        let grad = fd_gradient(&case.expr, &case.point, FD_STEP).unwrap();
        let hess = fd_hessian(&case.expr, &case.point, FD_STEP).unwrap();
        let n = case.point.len();
        for a in 0..n {
            let e = rel_err(jet.gradient[a], grad[a]);
            if e > worst {
                worst = e;
                at = format!("d/dx{} of {}", a + 1, case.text);
            }
            for (b, fd) in hess[a].iter().enumerate() {
                let e = rel_err(jet.hessian(a, b), *fd);
                if e > worst {
                    worst = e;
                    at = format!("d2/dx{}dx{} of {}", a + 1, b + 1, case.text);
                }
            }
        }
    }
    (worst, at)
}

// ---------------------------------------------------------------------------
// Scene fixtures

pub const TWO_PI: f64 = std::f64::consts::TAU;

pub fn scene_text(surface: &str, curve: &str, extra: &str) -> String {
    format!(
        r#"{{
  "schema": 1,
  "surface": {surface},
  "curve": {curve}{extra}
}}
"#
    )
}

pub fn equator_scene_text() -> String {
    scene_text(
        r#"{"kind": "sphere", "radius": 1.0}"#,
        &format!(r#"{{"components": ["t", "0"], "interval": [0.0, {TWO_PI}]}}"#),
        r#",
  "grid": {"samples": 256}"#,
    )
}

pub fn latitude_scene_text() -> String {
    scene_text(
        r#"{"kind": "sphere", "radius": 1.0}"#,
        &format!(
            r#"{{"components": ["t", "{}"], "interval": [0.0, {TWO_PI}]}}"#,
            std::f64::consts::FRAC_PI_4
        ),
        r#",
  "grid": {"samples": 256}"#,
    )
}

pub fn helix_scene_text() -> String {
    scene_text(
        r#"{"kind": "cylinder", "radius": 1.0}"#,
        &format!(
            r#"{{"components": ["t", "t"], "interval": [0.0, {}]}}"#,
            2.0 * TWO_PI
        ),
        r#",
  "grid": {"samples": 256}"#,
    )
}

pub fn plane_scene_text() -> String {
    scene_text(
        r#"{"kind": "graph", "height": "0"}"#,
        r#"{"components": ["t", "0.4*t"], "interval": [0.0, 1.0]}"#,
        "",
    )
}

pub fn axis_scene_text() -> String {
    scene_text(
        r#"{"kind": "cylinder", "radius": 1.0}"#,
        r#"{"components": ["0", "t"], "interval": [0.0, 1.0]}"#,
        "",
    )
}

pub fn sphere3_scene_text() -> String {
    scene_text(
        r#"{"kind": "sphere", "radius": 1.0, "m": 3}"#,
        &format!(r#"{{"components": ["t", "0", "0"], "interval": [0.0, {TWO_PI}]}}"#),
        r#",
  "grid": {"samples": 128}"#,
    )
}

pub fn write_scene(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

// ---------------------------------------------------------------------------
// Patch builders

pub fn framed(
    surface: &Hypersurface,
    comps: &[&str],
    interval: (f64, f64),
    k: usize,
    rotation: &FrameRotation,
) -> FramedCurve {
    let components: Vec<String> = comps.iter().map(|s| s.to_string()).collect();
    let curve = CurveOnSurface::parse(&components, interval).unwrap();
    let usc = UnitSpeedCurve::new(surface, &curve).unwrap();
    propagate_frame(&usc, k, rotation).unwrap()
}

/// Patch with the default (capped) box; callers needing a tight box call
/// `set_box` or `estimate_box` themselves.
pub fn patch(surface: &Hypersurface, comps: &[&str], interval: (f64, f64), k: usize) -> RuledPatch {
    let fc = framed(surface, comps, interval, k, &FrameRotation::identity());
    let field = ruling_fields(&fc).unwrap();
    RuledPatch::assemble(fc, field)
}

/// `count` node indices spread uniformly over a grid with `steps` steps.
pub fn node_aligned(steps: usize, count: usize) -> Vec<usize> {
    (0..count)
        .map(|i| ((i as f64 / (count - 1) as f64) * steps as f64).round() as usize)
        .collect()
}

pub fn unit(v: &DVector<f64>) -> DVector<f64> {
    v / v.norm()
}
