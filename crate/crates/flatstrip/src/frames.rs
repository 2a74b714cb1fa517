//! Arc-length reparametrization and adapted orthonormal frames along curves.
//!
//! `UnitSpeedCurve` wraps a chart curve with its arc-length table so every
//! downstream quantity is a function of arc length s. `propagate_frame`
//! transports an orthonormal tangent frame E_1..E_m along the curve with E_1
//! the unit tangent and E_2..E_m parallel in the normal bundle of the curve
//! inside the hypersurface, i.e. the tangential derivative of each E_i stays
//! proportional to E_1. The coefficients tau_i = h(E_1, E_i) measured against
//! the frame normal W = cross(E_1, ..., E_m) drive the ruling construction.
//!
//! Everything fed to the integrator is an exact jet quantity; the only
//! numerical error sources are the RK4 truncation and the Newton solve for
//! t(s), both far below the published tolerances at the default grid.

use crate::multicross::{self, MultiCrossError};
use crate::surface::{
    column_vectors, second_fundamental_form_at, CurveOnSurface, Hypersurface, SurfaceError,
    SurfaceJet,
};
use nalgebra::{Cholesky, DVector, Dyn};
use thiserror::Error;

/// Default number of integration steps along the curve.
pub const DEFAULT_GRID: usize = 512;
/// Refinement ceiling for `build_frames`.
pub const MAX_GRID: usize = 8192;
/// Target for the finite-difference parallelism residual during refinement.
pub const PARALLELISM_TARGET: f64 = 1e-8;
/// A re-orthonormalization correction above this means the step was too long.
pub const MAX_STEP_CORRECTION: f64 = 1e-3;
/// Default relative floor for |tau_1| in the non-asymptotic check.
pub const DEFAULT_NONASYMPTOTIC_TOL: f64 = 1e-8;

/// Fine-table intervals for the arc-length lookup.
const ARC_TABLE_INTERVALS: usize = 2048;
/// Gauss-Legendre 7-point rule on [-1, 1].
const GL_NODES: [f64; 7] = [
    -0.9491079123427585,
    -0.7415311855993944,
    -0.4058451513773972,
    0.0,
    0.4058451513773972,
    0.7415311855993944,
    0.9491079123427585,
];
const GL_WEIGHTS: [f64; 7] = [
    0.1294849661688697,
    0.2797053914892766,
    0.3818300505051189,
    0.4179591836734694,
    0.3818300505051189,
    0.2797053914892766,
    0.1294849661688697,
];

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("{0}")]
    Surface(#[from] SurfaceError),
    #[error("{0}")]
    Cross(#[from] MultiCrossError),
    #[error("curve speed vanishes near t = {t}")]
    DegenerateCurve { t: f64 },
    #[error("tangent direction is asymptotic at t = {t} (tau_1 = {tau1:.3e})")]
    AsymptoticDirection { t: f64, tau1: f64 },
    #[error("arc-length parameter {s} outside [0, {length}]")]
    ParameterOutOfRange { s: f64, length: f64 },
    #[error(
        "frame step correction {correction:.3e} at s = {s:.6} exceeds {max:.1e}; grid too coarse"
    )]
    RefineGrid { s: f64, correction: f64, max: f64 },
    #[error("frame transport still too coarse at {max} grid samples")]
    GridRefinementExceeded { max: usize },
    #[error("frame rotation has {given} angles but the chart offers {available} rotatable pairs")]
    InvalidRotation { given: usize, available: usize },
}

/// Point-wise data of the unit-speed curve: chart jets converted to
/// arc-length derivatives, plus the chart normal and its derivative.
#[derive(Debug, Clone)]
pub struct PointData {
    pub s: f64,
    pub t: f64,
    /// Chart coordinates of the point.
    pub x: Vec<f64>,
    /// Chart velocity dx/ds.
    pub xdot: Vec<f64>,
    pub position: DVector<f64>,
    /// Unit tangent, equals the ambient velocity in s.
    pub e1: DVector<f64>,
    /// Ambient acceleration in s (the full curvature vector of the curve).
    pub accel: DVector<f64>,
    /// Oriented unit normal of the hypersurface.
    pub nu: DVector<f64>,
    /// d(nu)/ds along the curve.
    pub nu_dot: DVector<f64>,
    /// accel with its normal component removed.
    pub a_tan: DVector<f64>,
    jet: SurfaceJet,
    gram_chol: Cholesky<f64, Dyn>,
}

impl PointData {
    /// Chart coordinates of a vector tangent to the hypersurface at this point.
    pub fn chart_coords(&self, v: &DVector<f64>) -> Vec<f64> {
        let rhs = self.jet.jacobian.transpose() * v;
        let sol = self.gram_chol.solve(&rhs);
        sol.iter().copied().collect()
    }

    /// Second fundamental form against the oriented chart normal.
    pub fn sff(&self, a: &[f64], b: &[f64]) -> f64 {
        second_fundamental_form_at(&self.jet, &self.nu, a, b)
    }
}

/// A chart curve together with its arc-length table.
#[derive(Debug)]
pub struct UnitSpeedCurve<'a> {
    surface: &'a Hypersurface,
    curve: &'a CurveOnSurface,
    length: f64,
    /// Uniform partition of the original parameter interval.
    ts: Vec<f64>,
    /// Cumulative arc length at `ts`.
    cum: Vec<f64>,
}

impl<'a> UnitSpeedCurve<'a> {
    pub fn new(
        surface: &'a Hypersurface,
        curve: &'a CurveOnSurface,
    ) -> Result<UnitSpeedCurve<'a>, FrameError> {
        if curve.dim() != surface.dim() {
            return Err(SurfaceError::CurveDimensionMismatch {
                expected: surface.dim(),
                got: curve.dim(),
            }
            .into());
        }
        let (t0, t1) = curve.interval;
        let n = ARC_TABLE_INTERVALS;
        let dt = (t1 - t0) / n as f64;
        let mut ts = Vec::with_capacity(n + 1);
        let mut cum = Vec::with_capacity(n + 1);
        ts.push(t0);
        cum.push(0.0);
        let usc_speed = |t: f64| speed_of(surface, curve, t);
        let mut min_speed = f64::INFINITY;
        let mut min_speed_t = t0;
        let mut max_speed = 0.0_f64;
        let mut acc = 0.0;
        for i in 0..n {
            let a = t0 + i as f64 * dt;
            let b = a + dt;
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let mut piece = 0.0;
            for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let t = mid + half * node;
                let sp = usc_speed(t)?;
                if sp < min_speed {
                    min_speed = sp;
                    min_speed_t = t;
                }
                max_speed = max_speed.max(sp);
                piece += weight * sp;
            }
            acc += piece * half;
            ts.push(b);
            cum.push(acc);
        }
        // Gauss nodes are interior, so an isolated speed zero can sit between
        // samples. Polish the sampled minimum before judging regularity.
        let lo = (min_speed_t - dt).max(t0);
        let hi = (min_speed_t + dt).min(t1);
        let (refined_t, refined_speed) = golden_section_min(&usc_speed, lo, hi)?;
        if refined_speed < min_speed {
            min_speed = refined_speed;
            min_speed_t = refined_t;
        }
        if !(min_speed > 1e-10 * max_speed && min_speed > 0.0) {
            return Err(FrameError::DegenerateCurve { t: min_speed_t });
        }
        Ok(UnitSpeedCurve {
            surface,
            curve,
            length: acc,
            ts,
            cum,
        })
    }

    pub fn surface(&self) -> &Hypersurface {
        self.surface
    }

    pub fn curve(&self) -> &CurveOnSurface {
        self.curve
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    fn speed(&self, t: f64) -> Result<f64, FrameError> {
        speed_of(self.surface, self.curve, t)
    }

    fn arc_up_to(&self, t: f64) -> Result<f64, FrameError> {
        let (t0, t1) = self.curve.interval;
        let dt = (t1 - t0) / ARC_TABLE_INTERVALS as f64;
        let j =
            (((t - t0) / dt).floor() as isize).clamp(0, ARC_TABLE_INTERVALS as isize - 1) as usize;
        let a = self.ts[j];
        let half = 0.5 * (t - a);
        let mid = 0.5 * (t + a);
        let mut piece = 0.0;
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS) {
            piece += weight * self.speed(mid + half * node)?;
        }
        Ok(self.cum[j] + piece * half)
    }

    /// Original curve parameter at arc length s.
    pub fn t_of_s(&self, s: f64) -> Result<f64, FrameError> {
        let slack = 1e-9 * self.length.max(1.0);
        if !(-slack..=self.length + slack).contains(&s) {
            return Err(FrameError::ParameterOutOfRange {
                s,
                length: self.length,
            });
        }
        let s = s.clamp(0.0, self.length);
        // bracket from the table
        let idx = match self
            .cum
            .binary_search_by(|c| c.partial_cmp(&s).expect("finite arc length"))
        {
            Ok(i) => i.min(self.cum.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.cum.len() - 2),
        };
        let (mut lo, mut hi) = (self.ts[idx], self.ts[idx + 1]);
        let frac = (s - self.cum[idx]) / (self.cum[idx + 1] - self.cum[idx]).max(1e-300);
        let mut t = lo + frac.clamp(0.0, 1.0) * (hi - lo);
        let tol = 1e-13 * self.length.max(1.0);
        for _ in 0..40 {
            let g = self.arc_up_to(t)? - s;
            if g.abs() <= tol {
                break;
            }
            if g > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let dg = self.speed(t)?;
            let mut next = t - g / dg;
            if !(lo..=hi).contains(&next) {
                next = 0.5 * (lo + hi);
            }
            t = next;
        }
        Ok(t.clamp(self.curve.interval.0, self.curve.interval.1))
    }

    /// Full geometric data at arc length s.
    pub fn point_data(&self, s: f64) -> Result<PointData, FrameError> {
        let t = self.t_of_s(s)?;
        let cj = self.curve.jet2(t)?;
        let sj = self.surface.jet(&cj.point)?;
        let m = self.surface.dim();

        let vel_t = &sj.jacobian * DVector::from_column_slice(&cj.velocity);
        let acc_t = &sj.jacobian * DVector::from_column_slice(&cj.acceleration)
            + sj.second_derivative(&cj.velocity, &cj.velocity);
        let sigma = vel_t.norm();
        let sigma_prime = vel_t.dot(&acc_t) / sigma;
        let tp = 1.0 / sigma; // dt/ds
        let tpp = -sigma_prime / (sigma * sigma * sigma); // d2t/ds2

        let xdot: Vec<f64> = cj.velocity.iter().map(|v| v * tp).collect();
        let xddot: Vec<f64> = cj
            .acceleration
            .iter()
            .zip(&cj.velocity)
            .map(|(a, v)| a * tp * tp + v * tpp)
            .collect();

        let e1 = &sj.jacobian * DVector::from_column_slice(&xdot);
        let accel =
            &sj.jacobian * DVector::from_column_slice(&xddot) + sj.second_derivative(&xdot, &xdot);

        let cols = column_vectors(&sj.jacobian);
        let w = multicross::cross(&cols)?;
        let wn = w.norm();
        let nu = &w / wn;
        // Leibniz rule over the cross product slots
        let mut wdot = DVector::zeros(m + 1);
        for i in 0..m {
            let mut slots = cols.clone();
            slots[i] = sj.tangent_column_derivative(i, &xdot);
            wdot += multicross::cross(&slots)?;
        }
        let nu_dot = &wdot / wn - &nu * (nu.dot(&wdot) / wn);
        let a_tan = &accel - &nu * accel.dot(&nu);

        let gram = sj.jacobian.transpose() * &sj.jacobian;
        let gram_chol = Cholesky::new(gram).ok_or_else(|| SurfaceError::DegenerateChart {
            point: cj.point.clone(),
            gram: 0.0,
            tol: 0.0,
        })?;

        Ok(PointData {
            s,
            t,
            x: cj.point,
            xdot,
            position: sj.position.clone(),
            e1,
            accel,
            nu,
            nu_dot,
            a_tan,
            jet: sj,
            gram_chol,
        })
    }
}

fn speed_of(surface: &Hypersurface, curve: &CurveOnSurface, t: f64) -> Result<f64, FrameError> {
    let (point, velocity) = curve.jet1(t)?;
    let (_, jacobian) = surface.jet1(&point)?;
    Ok((jacobian * DVector::from_column_slice(&velocity)).norm())
}

/// Golden-section minimum of `f` on `[a, b]`, iterated to fp resolution.
fn golden_section_min<F>(f: &F, mut a: f64, mut b: f64) -> Result<(f64, f64), FrameError>
where
    F: Fn(f64) -> Result<f64, FrameError>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Constant rotation applied to the normal part E_2..E_m of the initial frame.
#[derive(Debug, Clone, Default)]
pub struct FrameRotation {
    /// Givens angles for the consecutive pairs (E_2, E_3), (E_3, E_4), ...
    pub angles: Vec<f64>,
    /// Negate E_2 after the rotations.
    pub flip: bool,
}

impl FrameRotation {
    pub fn identity() -> FrameRotation {
        FrameRotation::default()
    }

    pub fn is_identity(&self) -> bool {
        !self.flip && self.angles.iter().all(|a| *a == 0.0)
    }

    fn apply(&self, frame: &mut [DVector<f64>]) -> Result<(), FrameError> {
        // frame[0] is E_1; rotatable pairs live in frame[1..]
        let normals = frame.len() - 1;
        if self.angles.len() > normals.saturating_sub(1) {
            return Err(FrameError::InvalidRotation {
                given: self.angles.len(),
                available: normals.saturating_sub(1),
            });
        }
        for (i, angle) in self.angles.iter().enumerate() {
            let (c, s) = (angle.cos(), angle.sin());
            let a = frame[1 + i].clone();
            let b = frame[2 + i].clone();
            frame[1 + i] = c * &a + s * &b;
            frame[2 + i] = -s * a + c * b;
        }
        if self.flip {
            frame[1] = -frame[1].clone();
        }
        Ok(())
    }
}

/// Orthonormal frame at the start of the curve: E_1 is the unit tangent, the
/// rest comes from Gram-Schmidt over the chart basis, skipping the chart
/// vector most parallel to E_1 (ties keep the first).
pub fn initial_frame(
    usc: &UnitSpeedCurve,
    rotation: &FrameRotation,
) -> Result<Vec<DVector<f64>>, FrameError> {
    let data = usc.point_data(0.0)?;
    initial_frame_at(&data, rotation)
}

fn initial_frame_at(
    data: &PointData,
    rotation: &FrameRotation,
) -> Result<Vec<DVector<f64>>, FrameError> {
    let cols = column_vectors(&data.jet.jacobian);
    let mut skip = 0;
    let mut best = -1.0;
    for (i, col) in cols.iter().enumerate() {
        let score = col.dot(&data.e1).abs() / col.norm();
        if score > best {
            best = score;
            skip = i;
        }
    }
    let mut family = Vec::with_capacity(cols.len());
    family.push(data.e1.clone());
    for (i, col) in cols.into_iter().enumerate() {
        if i != skip {
            family.push(col);
        }
    }
    let mut frame = multicross::orthonormalize(&family, 1e-12)?;
    rotation.apply(&mut frame)?;
    Ok(frame)
}

/// One frame node along the transported curve.
#[derive(Debug, Clone)]
pub struct FrameNode {
    pub s: f64,
    pub t: f64,
    pub x: Vec<f64>,
    pub position: DVector<f64>,
    /// E_1..E_m, orthonormal, E_1 the unit tangent.
    pub e: Vec<DVector<f64>>,
    /// cross(E_1, ..., E_m), the frame's hypersurface normal.
    pub w_next: DVector<f64>,
    /// tau_i = <hypersurface shape of (E_1, E_i)> against w_next; length m.
    pub tau: Vec<f64>,
    /// Ambient acceleration of the unit-speed curve.
    pub accel: DVector<f64>,
    pub a_tan: DVector<f64>,
    pub nu: DVector<f64>,
    /// Ambient derivative of the chart normal along the curve.
    pub nu_dot: DVector<f64>,
}

/// The transported frame on a uniform arc-length grid.
#[derive(Debug)]
pub struct FramedCurve {
    pub nodes: Vec<FrameNode>,
    pub length: f64,
    pub closed: bool,
    /// Constant sign <w_next, nu> of the frame against the chart orientation.
    pub orientation: f64,
}

impl FramedCurve {
    /// Number of integration steps (nodes minus one).
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn step_size(&self) -> f64 {
        self.length / self.steps() as f64
    }

    pub fn m(&self) -> usize {
        self.nodes[0].e.len()
    }
}

/// tau coefficients of a tangent frame at a point: tau_i is the second
/// fundamental form of (tangent, E_i) measured against the frame normal
/// orientation rather than the chart normal.
pub fn tau_at(data: &PointData, frame: &[DVector<f64>]) -> Result<Vec<f64>, FrameError> {
    let w = multicross::cross(frame)?;
    let orientation = w.dot(&data.nu).signum();
    let mut tau = Vec::with_capacity(frame.len());
    tau.push(orientation * data.sff(&data.xdot, &data.xdot));
    for e in &frame[1..] {
        let coords = data.chart_coords(e);
        tau.push(orientation * data.sff(&data.xdot, &coords));
    }
    Ok(tau)
}

fn transport_rhs(data: &PointData, e: &[DVector<f64>]) -> Vec<DVector<f64>> {
    e.iter()
        .map(|ek| {
            let ct = ek.dot(&data.a_tan);
            let cn = ek.dot(&data.nu_dot);
            -&data.e1 * ct - &data.nu * cn
        })
        .collect()
}

/// One classical RK4 step of the frame transport from s0 to s1, without
/// re-orthonormalization. `normals` are E_2..E_m at s0.
pub fn transport_step(
    usc: &UnitSpeedCurve,
    normals: &[DVector<f64>],
    s0: f64,
    s1: f64,
) -> Result<Vec<DVector<f64>>, FrameError> {
    let d0 = usc.point_data(s0)?;
    let dm = usc.point_data(0.5 * (s0 + s1))?;
    let d1 = usc.point_data(s1)?;
    Ok(rk4_step(&d0, &dm, &d1, normals, s1 - s0))
}

fn rk4_step(
    d0: &PointData,
    dm: &PointData,
    d1: &PointData,
    y: &[DVector<f64>],
    h: f64,
) -> Vec<DVector<f64>> {
    let add = |a: &[DVector<f64>], b: &[DVector<f64>], c: f64| -> Vec<DVector<f64>> {
        a.iter().zip(b).map(|(x, k)| x + k * c).collect()
    };
    let k1 = transport_rhs(d0, y);
    let k2 = transport_rhs(dm, &add(y, &k1, 0.5 * h));
    let k3 = transport_rhs(dm, &add(y, &k2, 0.5 * h));
    let k4 = transport_rhs(d1, &add(y, &k3, h));
    y.iter()
        .enumerate()
        .map(|(i, yk)| yk + (&k1[i] + &k2[i] * 2.0 + &k3[i] * 2.0 + &k4[i]) * (h / 6.0))
        .collect()
}

/// Project the transported normals back onto the tangent space orthogonal to
/// E_1 and re-orthonormalize. Returns the corrected family and the largest
/// correction applied.
fn reproject(
    data: &PointData,
    raw: &[DVector<f64>],
) -> Result<(Vec<DVector<f64>>, f64), FrameError> {
    let mut family = Vec::with_capacity(raw.len() + 1);
    family.push(data.e1.clone());
    for v in raw {
        let v = v - &data.nu * v.dot(&data.nu);
        family.push(v);
    }
    let fixed = multicross::orthonormalize(&family, 1e-12)?;
    let mut correction = 0.0_f64;
    for (v, f) in raw.iter().zip(&fixed[1..]) {
        correction = correction.max((v - f).norm());
    }
    Ok((fixed[1..].to_vec(), correction))
}

fn node_from(data: PointData, normals: &[DVector<f64>]) -> Result<FrameNode, FrameError> {
    let mut e = Vec::with_capacity(normals.len() + 1);
    e.push(data.e1.clone());
    e.extend(normals.iter().cloned());
    let w_next = multicross::cross(&e)?;
    let tau = tau_at(&data, &e)?;
    Ok(FrameNode {
        s: data.s,
        t: data.t,
        x: data.x,
        position: data.position,
        e,
        w_next,
        tau,
        accel: data.accel,
        a_tan: data.a_tan,
        nu: data.nu,
        nu_dot: data.nu_dot,
    })
}

/// Transport the adapted frame over a uniform grid of `k` steps.
pub fn propagate_frame(
    usc: &UnitSpeedCurve,
    k: usize,
    rotation: &FrameRotation,
) -> Result<FramedCurve, FrameError> {
    assert!(k >= 4, "need at least 4 steps");
    let length = usc.length();
    let h = length / k as f64;
    let mut data = usc.point_data(0.0)?;
    let frame0 = initial_frame_at(&data, rotation)?;
    let mut normals: Vec<DVector<f64>> = frame0[1..].to_vec();

    let mut nodes = Vec::with_capacity(k + 1);
    nodes.push(node_from(data.clone(), &normals)?);

    for i in 0..k {
        let s0 = i as f64 * h;
        let s1 = (i + 1) as f64 * h;
        let dm = usc.point_data(0.5 * (s0 + s1))?;
        let d1 = usc.point_data(s1)?;
        let raw = rk4_step(&data, &dm, &d1, &normals, h);
        let (fixed, correction) = reproject(&d1, &raw)?;
        if correction > MAX_STEP_CORRECTION {
            return Err(FrameError::RefineGrid {
                s: s1,
                correction,
                max: MAX_STEP_CORRECTION,
            });
        }
        normals = fixed;
        data = d1;
        nodes.push(node_from(data.clone(), &normals)?);
    }

    let closed = (&nodes[0].position - &nodes[k].position).norm() <= 1e-9 * length.max(1.0);
    let orientation = nodes[0].w_next.dot(&nodes[0].nu).signum();
    Ok(FramedCurve {
        nodes,
        length,
        closed,
        orientation,
    })
}

/// Largest finite-difference covariant-parallelism defect
/// max |<d/ds E_j, E_k>| over interior nodes and j, k >= 2, with the t where
/// it occurs. Uses the 5-point fourth-order stencil.
pub fn parallelism_residual(fc: &FramedCurve) -> (f64, f64) {
    let k = fc.steps();
    let h = fc.step_size();
    let m = fc.m();
    let mut worst = 0.0_f64;
    let mut worst_t = fc.nodes[0].t;
    for i in 2..=k.saturating_sub(2) {
        for j in 1..m {
            let deriv = (-&fc.nodes[i + 2].e[j] + &fc.nodes[i + 1].e[j] * 8.0
                - &fc.nodes[i - 1].e[j] * 8.0
                + &fc.nodes[i - 2].e[j])
                / (12.0 * h);
            for l in 1..m {
                let r = deriv.dot(&fc.nodes[i].e[l]).abs();
                if r > worst {
                    worst = r;
                    worst_t = fc.nodes[i].t;
                }
            }
        }
    }
    (worst, worst_t)
}

/// Transport with automatic grid refinement: doubles the step count until the
/// parallelism residual meets `PARALLELISM_TARGET` or the ceiling is hit.
pub fn build_frames(
    usc: &UnitSpeedCurve,
    k_init: usize,
    rotation: &FrameRotation,
) -> Result<FramedCurve, FrameError> {
    let mut k = k_init.max(4);
    loop {
        match propagate_frame(usc, k, rotation) {
            Ok(fc) => {
                let (residual, _) = parallelism_residual(&fc);
                if residual <= PARALLELISM_TARGET {
                    return Ok(fc);
                }
                log::info!("parallelism residual {residual:.3e} at k = {k}, refining");
            }
            Err(FrameError::RefineGrid { s, correction, .. }) => {
                log::info!("step correction {correction:.3e} at s = {s:.6}, k = {k}, refining");
            }
            Err(other) => return Err(other),
        }
        if k >= MAX_GRID {
            return Err(FrameError::GridRefinementExceeded { max: MAX_GRID });
        }
        k = (2 * k).min(MAX_GRID);
    }
}

/// Non-asymptotic margin: smallest |tau_1| relative to the largest tau
/// magnitude along the curve, with the t realizing the minimum.
pub fn nonasymptotic_margin(fc: &FramedCurve) -> (f64, f64, f64) {
    let mut max_amp = 0.0_f64;
    let mut min_tau1 = f64::INFINITY;
    let mut min_t = fc.nodes[0].t;
    let mut min_tau1_signed = 0.0;
    for node in &fc.nodes {
        for tau in &node.tau {
            max_amp = max_amp.max(tau.abs());
        }
        let t1 = node.tau[0].abs();
        if t1 < min_tau1 {
            min_tau1 = t1;
            min_t = node.t;
            min_tau1_signed = node.tau[0];
        }
    }
    let margin = if max_amp > 0.0 {
        min_tau1 / max_amp
    } else {
        0.0
    };
    (margin, min_t, min_tau1_signed)
}

/// Fails with `AsymptoticDirection` where |tau_1| first drops below
/// `tol` times the largest tau magnitude (or everywhere if tau vanishes).
pub fn check_nonasymptotic(fc: &FramedCurve, tol: f64) -> Result<(), FrameError> {
    let (margin, t, tau1) = nonasymptotic_margin(fc);
    let max_amp_zero = fc.nodes.iter().all(|n| n.tau.iter().all(|tau| *tau == 0.0));
    if max_amp_zero {
        return Err(FrameError::AsymptoticDirection {
            t: fc.nodes[0].t,
            tau1: 0.0,
        });
    }
    if margin < tol {
        return Err(FrameError::AsymptoticDirection { t, tau1 });
    }
    Ok(())
}
