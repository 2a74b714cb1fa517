//! Ruled flat approximations along a framed curve.
//!
//! Builds the ruling directions from the transported frame and its shape
//! coefficients, assembles the ruled patch, estimates an admissible ruling
//! box by probing, and evaluates the flatness and tangency residuals that
//! certify the construction.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::frames::{FrameError, FramedCurve};
use crate::multicross::{self, MultiCrossError};
use crate::surface::{Hypersurface, SurfaceError};

/// Relative |Z| floor below which the patch normal counts as degenerate.
pub const NORMAL_FLOOR: f64 = 1e-10;
/// Minimum |Z(t,0)| relative to its unit factors at every sample.
pub const NONDEGENERACY_FLOOR: f64 = 1e-8;
/// Hard cap on the box half-width ladder, in curve lengths.
pub const BOX_CAP_LENGTHS: f64 = 10.0;
/// Smallest admissible half-width, in curve lengths.
pub const BOX_MIN_LENGTHS: f64 = 1e-6;
/// Probe directions per parameter sample when the box is more than 1D.
pub const BOX_PROBE_DIRECTIONS: usize = 64;
/// Node stride of the pairwise injectivity sweep; pairs closer than this
/// along the curve are exempt from the separation requirement.
const INJECTIVITY_STRIDE: usize = 4;
/// Probe directions retained for the injectivity sweep.
const INJECTIVITY_DIRECTIONS: usize = 8;
/// Two samples violate injectivity when they approach closer than this
/// fraction of the larger one-step ruling displacement.
const INJECTIVITY_FRACTION: f64 = 0.5;
/// Relative floor for |dX/ds| in the flatness normalizer (0/0 guard: a
/// constant ruling has zero residual by convention, not NaN).
const XDOT_FLOOR: f64 = 1e-6;
/// Queries within this fraction of a grid step snap to the node, keeping
/// node evaluations bit-identical to the stored samples.
const NODE_SNAP: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FlatError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Cross(#[from] MultiCrossError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("ruling directions collapse at t = {t}: |Z| = {volume:.3e} under {floor:.3e}")]
    DegenerateRuling { t: f64, volume: f64, floor: f64 },
    #[error("parameter t = {value} outside the framed range [{lo}, {hi}]")]
    ParameterOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("expected {expected} ruling coordinates, got {got}")]
    RulingCountMismatch { expected: usize, got: usize },
    #[error("ruling coordinate u_{index} = {value} outside the box half-width {half_width}")]
    OutsideBox {
        index: usize,
        value: f64,
        half_width: f64,
    },
    #[error("|Z| = {norm:.3e} under the floor {floor:.3e}: outside the safe box")]
    DegenerateNormal { norm: f64, floor: f64 },
    #[error("safety must lie strictly between 0 and 1, got {value}")]
    BadSafety { value: f64 },
    #[error("no admissible box: best half-width {v_star:.3e} is under the minimum {min:.3e}")]
    PatchTooDegenerate { v_star: f64, min: f64 },
    #[error("ruling override needs {expected} frame coefficients, got {got}")]
    OverrideLength { expected: usize, got: usize },
    #[error("ruling override coefficients are numerically zero (norm {norm:.3e})")]
    OverrideDegenerate { norm: f64 },
}

/// How the first ruling direction is assembled at a sample.
#[derive(Debug, Clone, PartialEq)]
pub enum RulingKind {
    /// The torse construction from the shape coefficients.
    Standard,
    /// X_1 replaced by a fixed frame-coefficient combination (for probing the
    /// residuals with a deliberately wrong ruling); higher rulings standard.
    Override(Vec<f64>),
}

/// Ruling directions and their derivatives on the frame grid.
#[derive(Debug)]
pub struct RulingField {
    /// Unit ruling directions: `x[i][j]` is the (j+1)-th ruling at node i.
    pub x: Vec<Vec<DVector<f64>>>,
    /// Arc-length derivatives of the unit rulings, same layout.
    pub x_dot: Vec<Vec<DVector<f64>>>,
    /// Differenced d/ds of the shape coefficients per node (fourth order on
    /// the grid; the only differenced quantity in the pipeline).
    pub tau_dot: Vec<Vec<f64>>,
    /// cross(E_1, X_1, ..., X_{m-1}) per node.
    pub z0: Vec<DVector<f64>>,
    /// Largest coefficient contraction |sum_i X_j^i tau_i| over all samples.
    pub system_defect: f64,
    /// Rulings are rescaled to unit length (span-preserving).
    pub normalized: bool,
    pub kind: RulingKind,
}

/// The ruled patch: frames, ruling field, and the admissible box.
#[derive(Debug)]
pub struct RuledPatch {
    pub frames: FramedCurve,
    pub field: RulingField,
    /// Box half-widths per ruling coordinate.
    pub half_widths: Vec<f64>,
}

/// Everything needed to evaluate the patch at one curve parameter: the frame
/// grid fields blended to `s` (cubic, exact at nodes) plus the rulings
/// reassembled from the blended pieces.
#[derive(Debug)]
pub struct LocalSample {
    pub s: f64,
    pub t: f64,
    pub x_chart: Vec<f64>,
    pub position: DVector<f64>,
    pub e: Vec<DVector<f64>>,
    pub tau: Vec<f64>,
    pub tau_dot: Vec<f64>,
    pub accel: DVector<f64>,
    pub a_tan: DVector<f64>,
    pub nu: DVector<f64>,
    pub nu_dot: DVector<f64>,
    pub x: Vec<DVector<f64>>,
    pub x_dot: Vec<DVector<f64>>,
}

/// Result of the box search.
#[derive(Debug, Clone, Copy)]
pub struct BoxEstimate {
    /// Largest probed uniform half-width passing the |Z| and injectivity
    /// sweeps.
    pub v_star: f64,
    /// Half-width after the safety margin: (1 - safety) * v_star.
    pub half_width: f64,
    /// The ladder hit the hard cap of `BOX_CAP_LENGTHS` curve lengths.
    pub capped: bool,
}

/// d/ds of frame vector k (0 = tangent) from the transport right-hand side.
fn frame_vector_derivative(
    k: usize,
    e: &[DVector<f64>],
    accel: &DVector<f64>,
    a_tan: &DVector<f64>,
    nu: &DVector<f64>,
    nu_dot: &DVector<f64>,
) -> DVector<f64> {
    if k == 0 {
        accel.clone()
    } else {
        &e[0] * -e[k].dot(a_tan) - nu * e[k].dot(nu_dot)
    }
}

/// Unit rulings at one sample, their arc-length derivatives, and the worst
/// coefficient-contraction defect there.
type NodeRulings = (Vec<DVector<f64>>, Vec<DVector<f64>>, f64);

/// Unit rulings and their derivatives from one sample's frame data.
#[allow(clippy::too_many_arguments)]
fn assemble_rulings(
    e: &[DVector<f64>],
    tau: &[f64],
    tau_dot: &[f64],
    accel: &DVector<f64>,
    a_tan: &DVector<f64>,
    nu: &DVector<f64>,
    nu_dot: &DVector<f64>,
    kind: &RulingKind,
    t: f64,
) -> Result<NodeRulings, FlatError> {
    let m = e.len();
    let mut x = Vec::with_capacity(m - 1);
    let mut x_dot = Vec::with_capacity(m - 1);
    let mut defect = 0.0_f64;
    for j in 1..m {
        let (raw, raw_dot) = match kind {
            RulingKind::Override(coeffs) if j == 1 => {
                let mut v = DVector::zeros(e[0].len());
                let mut vd = DVector::zeros(e[0].len());
                for (i, c) in coeffs.iter().enumerate() {
                    v += &e[i] * *c;
                    vd += frame_vector_derivative(i, e, accel, a_tan, nu, nu_dot) * *c;
                }
                (v, vd)
            }
            _ => {
                // X_j = (-1)^j tau_q E_1 + (-1)^{j-1} tau_1 E_q, q = m - j + 1
                let q = m - j + 1;
                let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
                let a = sign * tau[q - 1];
                let b = -sign * tau[0];
                let a_dot = sign * tau_dot[q - 1];
                let b_dot = -sign * tau_dot[0];
                let v = &e[0] * a + &e[q - 1] * b;
                let eq_dot = frame_vector_derivative(q - 1, e, accel, a_tan, nu, nu_dot);
                let vd = &e[0] * a_dot + accel * a + &e[q - 1] * b_dot + eq_dot * b;
                (v, vd)
            }
        };
        let norm = raw.norm();
        if norm == 0.0 || norm.is_nan() {
            return Err(FlatError::DegenerateRuling {
                t,
                volume: norm,
                floor: f64::MIN_POSITIVE,
            });
        }
        let xhat = &raw / norm;
        // Contraction of the (normalized) frame coefficients against tau.
        let mut contraction = 0.0;
        match kind {
            RulingKind::Override(coeffs) if j == 1 => {
                for (i, c) in coeffs.iter().enumerate() {
                    contraction += (c / norm) * tau[i];
                }
            }
            _ => {
                let q = m - j + 1;
                let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
                contraction =
                    (sign * tau[q - 1] / norm) * tau[0] + (-sign * tau[0] / norm) * tau[q - 1];
            }
        }
        defect = defect.max(contraction.abs());
        let tangential = &raw_dot - &xhat * xhat.dot(&raw_dot);
        x_dot.push(tangential / norm);
        x.push(xhat);
    }
    Ok((x, x_dot, defect))
}

/// Fourth-order d/ds of per-node rows on a uniform grid, one-sided at the
/// ends (frames of closed curves carry holonomy, so no wrap-around).
fn diff4(values: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    let n = values.len();
    let m = values[0].len();
    let mut out = vec![vec![0.0; m]; n];
    for c in 0..m {
        let v = |i: usize| values[i][c];
        for (i, row) in out.iter_mut().enumerate() {
            row[c] = if i >= 2 && i + 2 < n {
                (v(i - 2) - 8.0 * v(i - 1) + 8.0 * v(i + 1) - v(i + 2)) / (12.0 * h)
            } else if i == 0 {
                (-25.0 * v(0) + 48.0 * v(1) - 36.0 * v(2) + 16.0 * v(3) - 3.0 * v(4)) / (12.0 * h)
            } else if i == 1 {
                (-3.0 * v(0) - 10.0 * v(1) + 18.0 * v(2) - 6.0 * v(3) + v(4)) / (12.0 * h)
            } else if i == n - 2 {
                (3.0 * v(n - 1) + 10.0 * v(n - 2) - 18.0 * v(n - 3) + 6.0 * v(n - 4) - v(n - 5))
                    / (12.0 * h)
            } else {
                (25.0 * v(n - 1) - 48.0 * v(n - 2) + 36.0 * v(n - 3) - 16.0 * v(n - 4)
                    + 3.0 * v(n - 5))
                    / (12.0 * h)
            };
        }
    }
    out
}

fn build_field(fc: &FramedCurve, kind: RulingKind) -> Result<RulingField, FlatError> {
    let h = fc.step_size();
    let taus: Vec<Vec<f64>> = fc.nodes.iter().map(|n| n.tau.clone()).collect();
    let tau_dot = diff4(&taus, h);
    let mut x = Vec::with_capacity(fc.nodes.len());
    let mut x_dot = Vec::with_capacity(fc.nodes.len());
    let mut z0 = Vec::with_capacity(fc.nodes.len());
    let mut system_defect = 0.0_f64;
    for (i, node) in fc.nodes.iter().enumerate() {
        if kind == RulingKind::Standard && node.tau[0] == 0.0 {
            return Err(FrameError::AsymptoticDirection {
                t: node.t,
                tau1: 0.0,
            }
            .into());
        }
        let (xs, xds, defect) = assemble_rulings(
            &node.e,
            &node.tau,
            &tau_dot[i],
            &node.accel,
            &node.a_tan,
            &node.nu,
            &node.nu_dot,
            &kind,
            node.t,
        )?;
        let mut args = Vec::with_capacity(xs.len() + 1);
        args.push(node.e[0].clone());
        args.extend(xs.iter().cloned());
        let z = multicross::cross(&args)?;
        let volume = z.norm();
        if volume < NONDEGENERACY_FLOOR {
            return Err(FlatError::DegenerateRuling {
                t: node.t,
                volume,
                floor: NONDEGENERACY_FLOOR,
            });
        }
        system_defect = system_defect.max(defect);
        x.push(xs);
        x_dot.push(xds);
        z0.push(z);
    }
    Ok(RulingField {
        x,
        x_dot,
        tau_dot,
        z0,
        system_defect,
        normalized: true,
        kind,
    })
}

/// The torse ruling directions of the framed curve, unit length, with their
/// derivatives and the central patch normals.
pub fn ruling_fields(fc: &FramedCurve) -> Result<RulingField, FlatError> {
    build_field(fc, RulingKind::Standard)
}

/// A deliberately chosen first ruling `X_1 = sum_i coefficients[i] E_i`
/// (normalized), higher rulings standard. Exercises the residuals' power.
pub fn ruling_override(fc: &FramedCurve, coefficients: &[f64]) -> Result<RulingField, FlatError> {
    let m = fc.m();
    if coefficients.len() != m {
        return Err(FlatError::OverrideLength {
            expected: m,
            got: coefficients.len(),
        });
    }
    let norm = coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        return Err(FlatError::OverrideDegenerate { norm });
    }
    build_field(fc, RulingKind::Override(coefficients.to_vec()))
}

/// Cubic Lagrange weights for nodes at offsets -1, 0, 1, 2.
fn lagrange_weights(xi: f64) -> [f64; 4] {
    [
        -xi * (xi - 1.0) * (xi - 2.0) / 6.0,
        (xi + 1.0) * (xi - 1.0) * (xi - 2.0) / 2.0,
        -(xi + 1.0) * xi * (xi - 2.0) / 2.0,
        (xi + 1.0) * xi * (xi - 1.0) / 6.0,
    ]
}

impl RuledPatch {
    /// Wrap frames and ruling field; the box starts at the ladder cap and is
    /// narrowed by `estimate_box`.
    pub fn assemble(frames: FramedCurve, field: RulingField) -> RuledPatch {
        let cap = BOX_CAP_LENGTHS * frames.length;
        let dims = frames.m() - 1;
        RuledPatch {
            frames,
            field,
            half_widths: vec![cap; dims],
        }
    }

    pub fn set_box(&mut self, half_widths: Vec<f64>) {
        assert_eq!(half_widths.len(), self.frames.m() - 1);
        self.half_widths = half_widths;
    }

    /// Arc length for an original curve parameter (cubic on the node table,
    /// exact at nodes).
    pub fn s_of_t(&self, t: f64) -> Result<f64, FlatError> {
        let nodes = &self.frames.nodes;
        let k = nodes.len() - 1;
        let (t0, t1) = (nodes[0].t, nodes[k].t);
        let slack = 1e-9 * (t1 - t0).abs();
        if !t.is_finite() || t < t0 - slack || t > t1 + slack {
            return Err(FlatError::ParameterOutOfRange {
                value: t,
                lo: t0,
                hi: t1,
            });
        }
        let t = t.clamp(t0, t1);
        let i = nodes
            .partition_point(|n| n.t <= t)
            .saturating_sub(1)
            .min(k - 1);
        let w = i.saturating_sub(1).min(k - 3);
        let mut s = 0.0;
        for a in 0..4 {
            let ta = nodes[w + a].t;
            let mut weight = 1.0;
            for b in 0..4 {
                if a != b {
                    let tb = nodes[w + b].t;
                    weight *= (t - tb) / (ta - tb);
                }
            }
            s += weight * nodes[w + a].s;
        }
        Ok(s.clamp(0.0, self.frames.length))
    }

    fn node_sample(&self, i: usize) -> LocalSample {
        let node = &self.frames.nodes[i];
        LocalSample {
            s: node.s,
            t: node.t,
            x_chart: node.x.clone(),
            position: node.position.clone(),
            e: node.e.clone(),
            tau: node.tau.clone(),
            tau_dot: self.field.tau_dot[i].clone(),
            accel: node.accel.clone(),
            a_tan: node.a_tan.clone(),
            nu: node.nu.clone(),
            nu_dot: node.nu_dot.clone(),
            x: self.field.x[i].clone(),
            x_dot: self.field.x_dot[i].clone(),
        }
    }

    /// Patch data at arc length `s`: node fields blended cubically, rulings
    /// reassembled from the blended pieces. Node-aligned queries return the
    /// stored samples bit-identically.
    pub fn local(&self, s: f64) -> Result<LocalSample, FlatError> {
        let k = self.frames.steps();
        let h = self.frames.step_size();
        let length = self.frames.length;
        if !s.is_finite() || s < -NODE_SNAP * length || s > length * (1.0 + NODE_SNAP) {
            return Err(FlatError::ParameterOutOfRange {
                value: s,
                lo: 0.0,
                hi: length,
            });
        }
        let r = s / h;
        let near = r.round();
        if (r - near).abs() <= NODE_SNAP {
            let i = (near as isize).clamp(0, k as isize) as usize;
            return Ok(self.node_sample(i));
        }
        let nodes = &self.frames.nodes;
        let i = (r.floor() as isize).clamp(0, k as isize - 1) as usize;
        let w = i.saturating_sub(1).min(k - 3);
        let xi = (s - nodes[w + 1].s) / h;
        let wts = lagrange_weights(xi);
        fn blend_vec<'n>(
            wts: &[f64; 4],
            w: usize,
            get: impl Fn(usize) -> &'n DVector<f64>,
        ) -> DVector<f64> {
            let mut out = get(w) * wts[0];
            for (a, wt) in wts.iter().enumerate().skip(1) {
                out += get(w + a) * *wt;
            }
            out
        }
        let blend_scalar =
            |get: &dyn Fn(usize) -> f64| -> f64 { (0..4).map(|a| wts[a] * get(w + a)).sum() };
        let m = self.frames.m();
        let e: Vec<DVector<f64>> = (0..m)
            .map(|j| blend_vec(&wts, w, |i| &nodes[i].e[j]))
            .collect();
        let tau: Vec<f64> = (0..m).map(|j| blend_scalar(&|i| nodes[i].tau[j])).collect();
        let tau_dot: Vec<f64> = (0..m)
            .map(|j| blend_scalar(&|i| self.field.tau_dot[i][j]))
            .collect();
        let accel = blend_vec(&wts, w, |i| &nodes[i].accel);
        let a_tan = blend_vec(&wts, w, |i| &nodes[i].a_tan);
        let nu = blend_vec(&wts, w, |i| &nodes[i].nu);
        let nu_dot = blend_vec(&wts, w, |i| &nodes[i].nu_dot);
        let position = blend_vec(&wts, w, |i| &nodes[i].position);
        let t = blend_scalar(&|i| nodes[i].t);
        let dim = nodes[0].x.len();
        let x_chart: Vec<f64> = (0..dim).map(|c| blend_scalar(&|i| nodes[i].x[c])).collect();
        let (x, x_dot, _) = assemble_rulings(
            &e,
            &tau,
            &tau_dot,
            &accel,
            &a_tan,
            &nu,
            &nu_dot,
            &self.field.kind,
            t,
        )?;
        Ok(LocalSample {
            s,
            t,
            x_chart,
            position,
            e,
            tau,
            tau_dot,
            accel,
            a_tan,
            nu,
            nu_dot,
            x,
            x_dot,
        })
    }

    fn check_u(&self, u: &[f64]) -> Result<(), FlatError> {
        if u.len() != self.half_widths.len() {
            return Err(FlatError::RulingCountMismatch {
                expected: self.half_widths.len(),
                got: u.len(),
            });
        }
        for (index, (value, half)) in u.iter().zip(&self.half_widths).enumerate() {
            if !value.is_finite() || value.abs() > half * (1.0 + 1e-12) {
                return Err(FlatError::OutsideBox {
                    index,
                    value: *value,
                    half_width: *half,
                });
            }
        }
        Ok(())
    }
}

/// The ruled map sigma(t, u) = gamma(t) + sum_j u^j X_j(t).
pub fn sigma(patch: &RuledPatch, t: f64, u: &[f64]) -> Result<DVector<f64>, FlatError> {
    patch.check_u(u)?;
    let s = patch.s_of_t(t)?;
    let loc = patch.local(s)?;
    let mut p = loc.position;
    for (uj, xj) in u.iter().zip(&loc.x) {
        p += xj * *uj;
    }
    Ok(p)
}

/// Patch normal Z(t,u) = (E_1 + sum u^j dX_j/ds) x X_1 x ... x X_{m-1} and
/// its length (the curve factor in arc-length units).
pub fn normal_z(patch: &RuledPatch, t: f64, u: &[f64]) -> Result<(DVector<f64>, f64), FlatError> {
    patch.check_u(u)?;
    let s = patch.s_of_t(t)?;
    let loc = patch.local(s)?;
    let mut first = loc.e[0].clone();
    for (uj, xdj) in u.iter().zip(&loc.x_dot) {
        first += xdj * *uj;
    }
    let mut args = Vec::with_capacity(loc.x.len() + 1);
    args.push(first);
    args.extend(loc.x.iter().cloned());
    let z = multicross::cross(&args)?;
    let norm = z.norm();
    args[0] = loc.e[0].clone();
    let z0_norm = multicross::cross(&args)?.norm();
    let floor = NORMAL_FLOOR * z0_norm;
    if norm <= floor {
        return Err(FlatError::DegenerateNormal { norm, floor });
    }
    Ok((z, norm))
}

/// Unit patch normal at (t, u).
pub fn unit_normal_z(patch: &RuledPatch, t: f64, u: &[f64]) -> Result<DVector<f64>, FlatError> {
    let (z, norm) = normal_z(patch, t, u)?;
    Ok(z / norm)
}

/// u-slope of Z along ruling coordinate j: dX_j/ds x X_1 x ... x X_{m-1}.
/// Z(t, u) is affine in u with these slopes.
pub fn normal_z_slope(patch: &RuledPatch, t: f64, j: usize) -> Result<DVector<f64>, FlatError> {
    let s = patch.s_of_t(t)?;
    let loc = patch.local(s)?;
    let mut args = Vec::with_capacity(loc.x.len() + 1);
    args.push(loc.x_dot[j].clone());
    args.extend(loc.x.iter().cloned());
    Ok(multicross::cross(&args)?)
}

/// Developability defect per ruling: r_j = E_1 . (dX_j/ds x X_1 x ... ),
/// normalized by the factor lengths (|dX_j/ds| floored against the local
/// frame rotation scale so constant rulings report zero).
pub fn flatness_residual(patch: &RuledPatch, t: f64) -> Result<Vec<f64>, FlatError> {
    let s = patch.s_of_t(t)?;
    let loc = patch.local(s)?;
    let m = patch.frames.m();
    let e1_norm = loc.e[0].norm();
    let prod_x: f64 = loc.x.iter().map(|x| x.norm()).product();
    let scale = (loc.accel.norm() + loc.nu_dot.norm()).max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(m - 1);
    for j in 0..m - 1 {
        let mut args = Vec::with_capacity(m);
        args.push(loc.x_dot[j].clone());
        args.extend(loc.x.iter().cloned());
        let zj = multicross::cross(&args)?;
        let raw = loc.e[0].dot(&zj);
        if raw == 0.0 {
            out.push(0.0);
            continue;
        }
        let denom = e1_norm * prod_x * loc.x_dot[j].norm().max(XDOT_FLOOR * scale);
        out.push(raw / denom);
    }
    Ok(out)
}

/// Unsigned angle between the patch normal at u = 0 and the hypersurface
/// normal at the same curve point: the approximation shares tangent spaces
/// along the curve exactly when this vanishes.
pub fn tangency_residual(
    surface: &Hypersurface,
    patch: &RuledPatch,
    t: f64,
) -> Result<f64, FlatError> {
    let s = patch.s_of_t(t)?;
    let loc = patch.local(s)?;
    let mut args = Vec::with_capacity(loc.x.len() + 1);
    args.push(loc.e[0].clone());
    args.extend(loc.x.iter().cloned());
    let z = multicross::cross(&args)?;
    let norm = z.norm();
    if norm <= 0.0 {
        return Err(FlatError::DegenerateNormal { norm, floor: 0.0 });
    }
    let zhat = z / norm;
    let nu = surface.unit_normal(&loc.x_chart)?;
    let sine = (&zhat - &nu * nu.dot(&zhat)).norm();
    Ok(sine.min(1.0).asin())
}

/// Unit probe directions in the ruling coordinates. One dimension probes
/// both ends; otherwise Gaussian directions from a seeded stream.
fn probe_directions(dim: usize, seed: u64) -> Vec<DVector<f64>> {
    if dim == 1 {
        return vec![
            DVector::from_element(1, 1.0),
            DVector::from_element(1, -1.0),
        ];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs = Vec::with_capacity(BOX_PROBE_DIRECTIONS);
    while dirs.len() < BOX_PROBE_DIRECTIONS {
        let mut d = DVector::zeros(dim);
        for c in 0..dim {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen();
            d[c] = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
        let n = d.norm();
        if n > 1e-6 {
            dirs.push(d / n);
        }
    }
    dirs
}

/// Largest uniform half-width v* whose probes keep |Z(t,u)| at or above
/// (1 - safety)|Z(t,0)| and pass the pairwise-separation injectivity sweep;
/// the returned box applies the safety margin on top.
pub fn estimate_box(patch: &RuledPatch, safety: f64, seed: u64) -> Result<BoxEstimate, FlatError> {
    if !(safety > 0.0 && safety < 1.0) {
        return Err(FlatError::BadSafety { value: safety });
    }
    let dim = patch.frames.m() - 1;
    let length = patch.frames.length;
    let cap = BOX_CAP_LENGTHS * length;
    let v_min = BOX_MIN_LENGTHS * length;
    let dirs = probe_directions(dim, seed);
    let nodes = &patch.frames.nodes;

    // Z(node, s*d) = z0 + s * slope(d); slopes fixed per (node, direction).
    let mut slopes: Vec<Vec<DVector<f64>>> = Vec::with_capacity(nodes.len());
    for i in 0..nodes.len() {
        let mut per_j = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut args = Vec::with_capacity(dim + 1);
            args.push(patch.field.x_dot[i][j].clone());
            args.extend(patch.field.x[i].iter().cloned());
            per_j.push(multicross::cross(&args)?);
        }
        let mut per_dir = Vec::with_capacity(dirs.len());
        for d in &dirs {
            let mut slope = DVector::zeros(nodes[0].position.len());
            for (j, delta) in per_j.iter().enumerate() {
                slope += delta * d[j];
            }
            per_dir.push(slope);
        }
        slopes.push(per_dir);
    }

    let keep = 1.0 - safety;
    let feasible = |v: f64| -> bool {
        for (i, per_dir) in slopes.iter().enumerate() {
            let z0 = &patch.field.z0[i];
            let z0_sq = z0.norm_squared();
            let need = keep * keep * z0_sq;
            for slope in per_dir {
                let aa = slope.norm_squared();
                let ab = z0.dot(slope);
                let q = |s: f64| z0_sq + 2.0 * ab * s + aa * s * s;
                if q(v) < need {
                    return false;
                }
                if aa > 0.0 {
                    let s_star = -ab / aa;
                    if s_star > 0.0 && s_star < v && q(s_star) < need {
                        return false;
                    }
                }
            }
        }
        true
    };

    let k = patch.frames.steps();
    let inj_dirs: Vec<&DVector<f64>> = dirs.iter().take(INJECTIVITY_DIRECTIONS).collect();
    let point_at = |i: usize, d: Option<&DVector<f64>>, v: f64| -> DVector<f64> {
        let mut p = nodes[i].position.clone();
        if let Some(d) = d {
            for (j, xj) in patch.field.x[i].iter().enumerate() {
                p += xj * (v * d[j]);
            }
        }
        p
    };
    let injective = |v: f64| -> bool {
        let mut pts: Vec<(usize, DVector<f64>, f64)> = Vec::new();
        for i in (0..nodes.len()).step_by(INJECTIVITY_STRIDE) {
            let ni = if i + 1 < nodes.len() { i + 1 } else { i - 1 };
            let base = point_at(i, None, v);
            let base_n = point_at(ni, None, v);
            pts.push((i, base.clone(), (&base_n - &base).norm()));
            for d in &inj_dirs {
                let p = point_at(i, Some(d), v);
                let pn = point_at(ni, Some(d), v);
                let disp = (&pn - &p).norm();
                pts.push((i, p, disp));
            }
        }
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                let raw_sep = pts[a].0.abs_diff(pts[b].0);
                let sep = if patch.frames.closed {
                    raw_sep.min(k - raw_sep)
                } else {
                    raw_sep
                };
                if sep < INJECTIVITY_STRIDE {
                    continue;
                }
                let threshold = INJECTIVITY_FRACTION * pts[a].2.max(pts[b].2);
                if (&pts[a].1 - &pts[b].1).norm() < threshold {
                    return false;
                }
            }
        }
        true
    };

    let ok = |v: f64| feasible(v) && injective(v);
    let (v_star, capped) = if ok(cap) {
        (cap, true)
    } else {
        let mut hi = cap;
        let mut lo = cap / 2.0;
        while !ok(lo) {
            hi = lo;
            lo /= 2.0;
            if lo < v_min {
                return Err(FlatError::PatchTooDegenerate {
                    v_star: lo,
                    min: v_min,
                });
            }
        }
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, false)
    };
    Ok(BoxEstimate {
        v_star,
        half_width: (1.0 - safety) * v_star,
        capped,
    })
}

/// Standard pipeline: rulings, box estimate, finished patch.
pub fn build_patch(
    frames: FramedCurve,
    safety: f64,
    seed: u64,
) -> Result<(RuledPatch, BoxEstimate), FlatError> {
    let field = ruling_fields(&frames)?;
    let mut patch = RuledPatch::assemble(frames, field);
    let estimate = estimate_box(&patch, safety, seed)?;
    let dims = patch.frames.m() - 1;
    patch.set_box(vec![estimate.half_width; dims]);
    Ok((patch, estimate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{build_frames, propagate_frame, FrameRotation, UnitSpeedCurve};
    use crate::surface::CurveOnSurface;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_4, TAU};

    fn framed(
        surface: &Hypersurface,
        components: &[&str],
        interval: (f64, f64),
        k: usize,
    ) -> FramedCurve {
        let components: Vec<String> = components.iter().map(|c| c.to_string()).collect();
        let curve = CurveOnSurface::parse(&components, interval).unwrap();
        let usc = UnitSpeedCurve::new(surface, &curve).unwrap();
        propagate_frame(&usc, k, &FrameRotation::identity()).unwrap()
    }

    #[test]
    fn equator_rulings_are_vertical() {
        let sphere = Hypersurface::sphere(1.0, 2).unwrap();
        let fc = framed(&sphere, &["t", "0"], (0.0, TAU), 256);
        let field = ruling_fields(&fc).unwrap();
        assert!(field.system_defect <= 1e-12);
        for (i, xs) in field.x.iter().enumerate() {
            let x = &xs[0];
            assert!(
                (x[0].abs()).max(x[1].abs()) <= 1e-10 && (x[2].abs() - 1.0).abs() <= 1e-10,
                "node {i}: ruling {x:?} not vertical"
            );
            assert!(field.z0[i].norm() >= NONDEGENERACY_FLOOR);
        }
    }

    #[test]
    fn latitude_rulings_point_at_the_cone_apex() {
        let sphere = Hypersurface::sphere(1.0, 2).unwrap();
        let lat = FRAC_PI_4.to_string();
        let fc = framed(&sphere, &["t", &lat], (0.0, TAU), 256);
        let field = ruling_fields(&fc).unwrap();
        let apex = DVector::from_column_slice(&[0.0, 0.0, 2.0_f64.sqrt()]);
        for (node, xs) in fc.nodes.iter().zip(&field.x) {
            let to_apex = &apex - &node.position;
            let d = &to_apex / to_apex.norm();
            let x = &xs[0];
            let sine = (x - &d * d.dot(x)).norm();
            assert!(sine <= 1e-8, "ruling misses the apex by sin = {sine:.3e}");
        }
    }

    #[test]
    fn flatness_vanishes_on_constructed_fields() {
        let sphere = Hypersurface::sphere(1.0, 2).unwrap();
        let lat = FRAC_PI_4.to_string();
        let ellipsoid = Hypersurface::ellipsoid(&[1.0, 1.0, 2.0]).unwrap();
        let cases: Vec<(&Hypersurface, Vec<&str>)> = vec![
            (&sphere, vec!["t", "0"]),
            (&sphere, vec!["t", lat.as_str()]),
            (&ellipsoid, vec!["t", "0.3*sin(2*t)"]),
        ];
        for (surface, comps) in cases {
            let fc = framed(surface, &comps, (0.0, TAU), 512);
            let field = ruling_fields(&fc).unwrap();
            let patch = RuledPatch::assemble(fc, field);
            let mut worst = 0.0_f64;
            for node in &patch.frames.nodes {
                for r in flatness_residual(&patch, node.t).unwrap() {
                    worst = worst.max(r.abs());
                }
            }
            assert!(worst <= 1e-8, "flatness {worst:.3e} for {comps:?}");
        }
    }

    #[test]
    fn tangency_holds_along_the_curve() {
        let sphere = Hypersurface::sphere(1.0, 2).unwrap();
        let lat = FRAC_PI_4.to_string();
        for comps in [vec!["t", "0"], vec!["t", lat.as_str()]] {
            let fc = framed(&sphere, &comps, (0.0, TAU), 256);
            let field = ruling_fields(&fc).unwrap();
            let patch = RuledPatch::assemble(fc, field);
            let mut worst = 0.0_f64;
            for node in &patch.frames.nodes {
                worst = worst.max(tangency_residual(&sphere, &patch, node.t).unwrap());
            }
            let cap = if comps[1] == "0" { 1e-10 } else { 1e-8 };
            assert!(worst <= cap, "tangency {worst:.3e} for {comps:?}");
        }
    }

    #[test]
    fn z_is_affine_in_u() {
        let sphere = Hypersurface::sphere(1.0, 2).unwrap();
        let lat = FRAC_PI_4.to_string();
        let fc = framed(&sphere, &["t", &lat], (0.0, TAU), 128);
        let field = ruling_fields(&fc).unwrap();
        let patch = RuledPatch::assemble(fc, field);
        for idx in [3usize, 40, 77] {
            let t = patch.frames.nodes[idx].t;
            let (z0, _) = normal_z(&patch, t, &[0.0]).unwrap();
            let slope = normal_z_slope(&patch, t, 0).unwrap();
            for u in [-0.4, 0.05, 0.3] {
                let (z, _) = normal_z(&patch, t, &[u]).unwrap();
                let defect = (&z - &z0 - &slope * u).norm();
                assert!(defect <= 1e-10, "affinity defect {defect:.3e} at u = {u}");
            }
        }
    }

    #[test]
    fn sigma_is_exact_at_nodes_and_checks_the_box() {
        let sphere = Hypersurface::sphere(1.0, 2).unwrap();
        let fc = framed(&sphere, &["t", "0"], (0.0, TAU), 128);
        let field = ruling_fields(&fc).unwrap();
        let patch = RuledPatch::assemble(fc, field);
        for idx in [0usize, 17, 64, 128] {
            let node = &patch.frames.nodes[idx];
            let direct = &node.position + &patch.field.x[idx][0] * 0.3;
            let via_api = sigma(&patch, node.t, &[0.3]).unwrap();
            assert_eq!(direct, via_api, "node {idx} assembly differs");
            // vertical rulings: the patch is the tangent cylinder
            let p = &via_api;
            assert_relative_eq!(p[0], node.position[0], epsilon = 1e-12);
            assert_relative_eq!(p[1], node.position[1], epsilon = 1e-12);
            assert_relative_eq!(p[2].abs(), 0.3, epsilon = 1e-10);
        }
        let t = patch.frames.nodes[5].t;
        let too_far = patch.half_widths[0] * 1.5;
        assert!(matches!(
            sigma(&patch, t, &[too_far]),
            Err(FlatError::OutsideBox { .. })
        ));
        assert!(matches!(
            sigma(&patch, t, &[0.0, 0.0]),
            Err(FlatError::RulingCountMismatch { .. })
        ));
    }

    #[test]
    fn tangent_cylinder_box_hits_the_cap() {
        let sphere = Hypersurface::sphere(1.0, 2).unwrap();
        let fc = framed(&sphere, &["t", "0"], (0.0, TAU), 128);
        let field = ruling_fields(&fc).unwrap();
        let patch = RuledPatch::assemble(fc, field);
        let est = estimate_box(&patch, 0.5, 7).unwrap();
        assert!(est.capped);
        assert_relative_eq!(
            est.v_star,
            BOX_CAP_LENGTHS * patch.frames.length,
            epsilon = 1e-12
        );
        assert_relative_eq!(est.half_width, 0.5 * est.v_star, epsilon = 1e-12);
    }

    #[test]
    fn cone_box_stops_at_the_apex_margin() {
        let sphere = Hypersurface::sphere(1.0, 2).unwrap();
        let lat = FRAC_PI_4.to_string();
        let fc = framed(&sphere, &["t", &lat], (0.0, TAU), 256);
        let field = ruling_fields(&fc).unwrap();
        let patch = RuledPatch::assemble(fc, field);
        // apex distance along every ruling is exactly 1 for this latitude
        let est = estimate_box(&patch, 0.5, 7).unwrap();
        assert!(!est.capped);
        assert!(
            est.v_star <= 1.0 + 1e-6,
            "v* = {} beyond the apex",
            est.v_star
        );
        assert!(
            est.v_star >= 0.5 * (1.0 - 1e-6),
            "v* = {} under half the apex distance",
            est.v_star
        );
        // tighter safety keeps a smaller box
        let tight = estimate_box(&patch, 0.99, 7).unwrap();
        assert!(tight.half_width < est.half_width);
        assert!(matches!(
            estimate_box(&patch, 1.0, 7),
            Err(FlatError::BadSafety { .. })
        ));
    }

    #[test]
    fn override_ruling_trips_flatness_but_not_tangency() {
        let sphere = Hypersurface::sphere(1.0, 2).unwrap();
        let lat = FRAC_PI_4.to_string();
        let fc = framed(&sphere, &["t", &lat], (0.0, TAU), 256);
        let field = ruling_override(&fc, &[1.0, 1.0]).unwrap();
        let patch = RuledPatch::assemble(fc, field);
        let mut worst_flat = 0.0_f64;
        let mut worst_tan = 0.0_f64;
        for node in &patch.frames.nodes {
            let r = flatness_residual(&patch, node.t).unwrap();
            worst_flat = worst_flat.max(r[0].abs());
            worst_tan = worst_tan.max(tangency_residual(&sphere, &patch, node.t).unwrap());
        }
        assert!(worst_flat >= 1e-2, "no power: residual {worst_flat:.3e}");
        assert!(worst_tan <= 1e-8, "tangency broke: {worst_tan:.3e}");
        assert!(matches!(
            ruling_override(&patch.frames, &[1.0]),
            Err(FlatError::OverrideLength { .. })
        ));
    }

    #[test]
    fn helix_patch_reproduces_the_cylinder() {
        let cylinder = Hypersurface::cylinder(1.0).unwrap();
        let curve =
            CurveOnSurface::parse(&["t".to_string(), "t".to_string()], (0.0, 2.0 * TAU)).unwrap();
        let usc = UnitSpeedCurve::new(&cylinder, &curve).unwrap();
        let fc = build_frames(&usc, 512, &FrameRotation::identity()).unwrap();
        let field = ruling_fields(&fc).unwrap();
        let patch = RuledPatch::assemble(fc, field);
        let (t0, t1) = (patch.frames.nodes[0].t, patch.frames.nodes[512].t);
        for i in 0..40 {
            let t = t0 + (t1 - t0) * (i as f64 + 0.31) / 40.0;
            for u in [-0.1, -0.03, 0.05, 0.1] {
                let p = sigma(&patch, t, &[u]).unwrap();
                let radial = (p[0] * p[0] + p[1] * p[1]).sqrt();
                assert!(
                    (radial - 1.0).abs() <= 1e-8,
                    "sigma({t:.3}, {u}) leaves the cylinder by {:.3e}",
                    (radial - 1.0).abs()
                );
            }
        }
    }

    #[test]
    fn great_circle_rulings_in_higher_dimension() {
        let sphere = Hypersurface::sphere(1.0, 3).unwrap();
        let fc = framed(&sphere, &["t", "0", "0"], (0.0, TAU), 256);
        let field = ruling_fields(&fc).unwrap();
        assert!(field.system_defect <= 1e-12);
        let patch = RuledPatch::assemble(fc, field);
        let mut worst = 0.0_f64;
        for (i, node) in patch.frames.nodes.iter().enumerate() {
            for (j, x) in patch.field.x[i].iter().enumerate() {
                let along = x.dot(&node.e[0]).abs();
                assert!(
                    along <= 1e-10,
                    "ruling {j} leans along the tangent: {along:.3e}"
                );
            }
            for r in flatness_residual(&patch, node.t).unwrap() {
                worst = worst.max(r.abs());
            }
        }
        assert!(worst <= 1e-8, "flatness {worst:.3e}");
        let est = estimate_box(&patch, 0.5, 11).unwrap();
        assert!(est.capped, "flat cylinder over a great circle never folds");
    }

    #[test]
    fn flip_preserves_the_ruling_span() {
        let sphere = Hypersurface::sphere(1.0, 2).unwrap();
        let lat = FRAC_PI_4.to_string();
        let fc = framed(&sphere, &["t", &lat], (0.0, TAU), 128);
        let lat_curve = CurveOnSurface::parse(&["t".to_string(), lat.clone()], (0.0, TAU)).unwrap();
        let usc = UnitSpeedCurve::new(&sphere, &lat_curve).unwrap();
        let flipped = propagate_frame(
            &usc,
            128,
            &FrameRotation {
                angles: vec![],
                flip: true,
            },
        )
        .unwrap();
        let field = ruling_fields(&fc).unwrap();
        let field_flipped = ruling_fields(&flipped).unwrap();
        for (a, b) in field.x.iter().zip(&field_flipped.x) {
            let angle = multicross::span_principal_angle(&a[..], &b[..]);
            assert!(angle <= 1e-8, "ruling span moved by {angle:.3e} rad");
        }
    }
}
