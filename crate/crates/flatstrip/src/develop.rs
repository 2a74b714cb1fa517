//! Isometric planar development (unrolling) of plane strips.
//!
//! For surfaces in R^3 (m = 2) the ruled patch is a strip around the curve;
//! being flat, it unrolls isometrically onto the plane. The development is
//! anchored at s = 0 with position (0, 0) and heading (1, 0): the isometry
//! is unique only up to rigid motion, and fixing the gauge makes outputs
//! reproducible.

use nalgebra::DVector;
use thiserror::Error;

use crate::flatapprox::{FlatError, RuledPatch};
use crate::multicross;

#[derive(Debug, Error)]
pub enum DevelopError {
    #[error(transparent)]
    Flat(#[from] FlatError),
    #[error("development unrolls plane strips only (m = 2), got m = {m}")]
    UnsupportedDimension { m: usize },
}

/// The developed strip: plane curve, headings, and plane ruling directions
/// on the patch grid, plus the box extents carried over from the patch.
#[derive(Debug)]
pub struct PlanarStrip {
    /// Arc length per sample (uniform grid).
    pub s: Vec<f64>,
    /// Original curve parameter per sample.
    pub t: Vec<f64>,
    /// Developed curve points.
    pub curve: Vec<[f64; 2]>,
    /// Developed curve heading angles (radians).
    pub theta: Vec<f64>,
    /// Developed unit ruling directions.
    pub ruling: Vec<[f64; 2]>,
    /// Strip extents along the ruling on either side of the curve.
    pub half_widths: (f64, f64),
    /// Total heading change theta(L) - theta(0).
    pub turning: f64,
}

fn ensure_plane_strip(patch: &RuledPatch) -> Result<(), DevelopError> {
    let m = patch.frames.m();
    if m != 2 {
        return Err(DevelopError::UnsupportedDimension { m });
    }
    Ok(())
}

/// Patch normal, in-surface left normal (N x E_1), and the frame pieces at
/// arc length s.
fn surface_basis(
    patch: &RuledPatch,
    s: f64,
) -> Result<(DVector<f64>, DVector<f64>, crate::flatapprox::LocalSample), DevelopError> {
    let loc = patch.local(s)?;
    let z = multicross::cross(&[loc.e[0].clone(), loc.x[0].clone()]).map_err(FlatError::from)?;
    let norm = z.norm();
    if norm <= 0.0 {
        return Err(FlatError::DegenerateNormal { norm, floor: 0.0 }.into());
    }
    let zhat = z / norm;
    let side = multicross::cross(&[zhat.clone(), loc.e[0].clone()]).map_err(FlatError::from)?;
    Ok((zhat, side, loc))
}

fn kappa_at(patch: &RuledPatch, s: f64) -> Result<f64, DevelopError> {
    let (_, side, loc) = surface_basis(patch, s)?;
    Ok(loc.accel.dot(&side))
}

/// Signed geodesic curvature of the curve within the patch: the in-plane
/// turning rate of its development, positive toward N x E_1.
pub fn geodesic_curvature(patch: &RuledPatch, t: f64) -> Result<f64, DevelopError> {
    ensure_plane_strip(patch)?;
    let s = patch.s_of_t(t)?;
    kappa_at(patch, s)
}

/// Oriented angle from the curve tangent to the ruling within the patch.
fn ruling_angle_at(patch: &RuledPatch, s: f64) -> Result<f64, DevelopError> {
    let (_, side, loc) = surface_basis(patch, s)?;
    let x = &loc.x[0];
    Ok(x.dot(&side).atan2(x.dot(&loc.e[0])))
}

/// Unroll the patch: integrate the plane curve with curvature kappa_g by
/// classic fourth-order stepping on the frame grid and place the rulings at
/// the surface angle to the tangent (isometries preserve angles).
pub fn develop_patch(patch: &RuledPatch) -> Result<PlanarStrip, DevelopError> {
    ensure_plane_strip(patch)?;
    let k = patch.frames.steps();
    let h = patch.frames.step_size();
    let nodes = &patch.frames.nodes;

    let mut kappa_node = Vec::with_capacity(k + 1);
    for node in nodes {
        kappa_node.push(kappa_at(patch, node.s)?);
    }
    let mut kappa_mid = Vec::with_capacity(k);
    for node in nodes.iter().take(k) {
        kappa_mid.push(kappa_at(patch, node.s + 0.5 * h)?);
    }

    let mut s = Vec::with_capacity(k + 1);
    let mut t = Vec::with_capacity(k + 1);
    let mut curve = Vec::with_capacity(k + 1);
    let mut theta = Vec::with_capacity(k + 1);
    let mut ruling = Vec::with_capacity(k + 1);

    let mut state = [0.0_f64, 0.0, 0.0]; // x, y, heading
    for i in 0..=k {
        s.push(nodes[i].s);
        t.push(nodes[i].t);
        curve.push([state[0], state[1]]);
        theta.push(state[2]);
        let psi = ruling_angle_at(patch, nodes[i].s)?;
        let phi = state[2] + psi;
        ruling.push([phi.cos(), phi.sin()]);
        if i == k {
            break;
        }
        // RK4 on (x, y, heading)' = (cos heading, sin heading, kappa(s))
        let f = |heading: f64, kap: f64| [heading.cos(), heading.sin(), kap];
        let y = state;
        let k1 = f(y[2], kappa_node[i]);
        let k2 = f(y[2] + 0.5 * h * k1[2], kappa_mid[i]);
        let k3 = f(y[2] + 0.5 * h * k2[2], kappa_mid[i]);
        let k4 = f(y[2] + h * k3[2], kappa_node[i + 1]);
        for c in 0..3 {
            state[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }

    let half = patch.half_widths[0];
    Ok(PlanarStrip {
        turning: theta[k] - theta[0],
        s,
        t,
        curve,
        theta,
        ruling,
        half_widths: (half, half),
    })
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

impl PlanarStrip {
    fn grid_window(&self, s: f64) -> Result<(usize, [f64; 4]), DevelopError> {
        let k = self.s.len() - 1;
        let h = self.s[1] - self.s[0];
        let length = self.s[k];
        if !s.is_finite() || s < -1e-9 * length || s > length * (1.0 + 1e-9) {
            return Err(FlatError::ParameterOutOfRange {
                value: s,
                lo: 0.0,
                hi: length,
            }
            .into());
        }
        let r = (s / h).clamp(0.0, k as f64);
        let i = (r.floor() as usize).min(k - 1);
        let w = i.saturating_sub(1).min(k - 3);
        let xi = (s - self.s[w + 1]) / h;
        Ok((w, lagrange_weights(xi)))
    }

    /// Developed curve point at arc length s (cubic between grid samples).
    pub fn curve_at(&self, s: f64) -> Result<[f64; 2], DevelopError> {
        let (w, wts) = self.grid_window(s)?;
        let mut p = [0.0_f64; 2];
        for (a, wt) in wts.iter().enumerate() {
            p[0] += wt * self.curve[w + a][0];
            p[1] += wt * self.curve[w + a][1];
        }
        Ok(p)
    }

    /// Developed ruling direction at arc length s (cubic, renormalized).
    pub fn ruling_at(&self, s: f64) -> Result<[f64; 2], DevelopError> {
        let (w, wts) = self.grid_window(s)?;
        let mut r = [0.0_f64; 2];
        for (a, wt) in wts.iter().enumerate() {
            r[0] += wt * self.ruling[w + a][0];
            r[1] += wt * self.ruling[w + a][1];
        }
        let n = (r[0] * r[0] + r[1] * r[1]).sqrt();
        Ok([r[0] / n, r[1] / n])
    }

    /// Strip point at (s, u): curve_at(s) + u * ruling_at(s).
    pub fn point_at(&self, s: f64, u: f64) -> Result<[f64; 2], DevelopError> {
        let p = self.curve_at(s)?;
        let r = self.ruling_at(s)?;
        Ok([p[0] + u * r[0], p[1] + u * r[1]])
    }
}

/// Worst relative mismatch between surface and developed edge lengths over
/// an nt x nu strip triangulation, with each edge measured along the surface
/// by a sub-sampled polyline (identically in 3D and 2D). Returns the worst
/// mismatch and the arc length where it occurs.
pub fn isometry_defect(
    patch: &RuledPatch,
    strip: &PlanarStrip,
    nt: usize,
    nu: usize,
    sub: usize,
) -> Result<(f64, f64), DevelopError> {
    ensure_plane_strip(patch)?;
    let length = patch.frames.length;
    let half = patch.half_widths[0];
    let point3 = |s: f64, u: f64| -> Result<DVector<f64>, DevelopError> {
        let loc = patch.local(s)?;
        Ok(&loc.position + &loc.x[0] * u)
    };
    let edge_pair = |s0: f64, u0: f64, s1: f64, u1: f64| -> Result<(f64, f64), DevelopError> {
        let (mut l3, mut l2) = (0.0, 0.0);
        let mut p3 = point3(s0, u0)?;
        let mut p2 = strip.point_at(s0, u0)?;
        for q in 1..=sub {
            let w = q as f64 / sub as f64;
            let (s, u) = (s0 + w * (s1 - s0), u0 + w * (u1 - u0));
            let q3 = point3(s, u)?;
            let q2 = strip.point_at(s, u)?;
            l3 += (&q3 - &p3).norm();
            l2 += ((q2[0] - p2[0]).powi(2) + (q2[1] - p2[1]).powi(2)).sqrt();
            p3 = q3;
            p2 = q2;
        }
        Ok((l3, l2))
    };
    let mut worst = 0.0_f64;
    let mut worst_s = 0.0_f64;
    let mut note = |l3: f64, l2: f64, s: f64| {
        let rel = (l3 - l2).abs() / l3.max(f64::MIN_POSITIVE);
        if rel > worst {
            worst = rel;
            worst_s = s;
        }
    };
    for i in 0..=nt {
        let s0 = length * i as f64 / nt as f64;
        let s1 = length * (i + 1) as f64 / nt as f64;
        for j in 0..=nu {
            let u0 = -half + 2.0 * half * j as f64 / nu as f64;
            if i < nt {
                let (a3, a2) = edge_pair(s0, u0, s1, u0)?;
                note(a3, a2, s0);
            }
            if j < nu {
                let u1 = -half + 2.0 * half * (j + 1) as f64 / nu as f64;
                let (b3, b2) = edge_pair(s0, u0, s0, u1)?;
                note(b3, b2, s0);
                if i < nt {
                    let (c3, c2) = edge_pair(s0, u0, s1, u1)?;
                    note(c3, c2, s0);
                }
            }
        }
    }
    Ok((worst, worst_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatapprox::{ruling_fields, RuledPatch};
    use crate::frames::{propagate_frame, FrameRotation, UnitSpeedCurve};
    use crate::surface::{CurveOnSurface, Hypersurface};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_4, PI, TAU};

    fn patch_for(
        surface: &Hypersurface,
        components: &[&str],
        interval: (f64, f64),
        k: usize,
    ) -> RuledPatch {
        let components: Vec<String> = components.iter().map(|c| c.to_string()).collect();
        let curve = CurveOnSurface::parse(&components, interval).unwrap();
        let usc = UnitSpeedCurve::new(surface, &curve).unwrap();
        let fc = propagate_frame(&usc, k, &FrameRotation::identity()).unwrap();
        let field = ruling_fields(&fc).unwrap();
        let mut patch = RuledPatch::assemble(fc, field);
        patch.set_box(vec![0.3]);
        patch
    }

    #[test]
    fn equator_strip_is_straight_with_perpendicular_rulings() {
        let sphere = Hypersurface::sphere(1.0, 2).unwrap();
        let patch = patch_for(&sphere, &["t", "0"], (0.0, TAU), 256);
        for idx in [0usize, 31, 128, 200] {
            let t = patch.frames.nodes[idx].t;
            let kappa = geodesic_curvature(&patch, t).unwrap();
            assert!(kappa.abs() <= 1e-10, "kappa_g = {kappa:.3e} on a geodesic");
        }
        let strip = develop_patch(&patch).unwrap();
        for (p, r) in strip.curve.iter().zip(&strip.ruling) {
            assert!(p[1].abs() <= 1e-9, "strip bends: y = {:.3e}", p[1]);
            assert!(r[0].abs() <= 1e-9, "ruling leans: {:?}", r);
        }
        assert_relative_eq!(strip.curve.last().unwrap()[0], TAU, epsilon = 1e-8);
        assert!(strip.turning.abs() <= 1e-9);
    }

    #[test]
    fn helix_strip_is_straight_with_slanted_rulings() {
        let cylinder = Hypersurface::cylinder(1.0).unwrap();
        let patch = patch_for(&cylinder, &["t", "t"], (0.0, TAU), 256);
        let strip = develop_patch(&patch).unwrap();
        assert!(strip.turning.abs() <= 1e-9, "helix is a cylinder geodesic");
        let expect = 0.5_f64.sqrt();
        for (p, r) in strip.curve.iter().zip(&strip.ruling) {
            assert!(p[1].abs() <= 1e-9);
            assert_relative_eq!(r[0].abs(), expect, epsilon = 1e-8);
            assert_relative_eq!(r[1].abs(), expect, epsilon = 1e-8);
        }
        let length = TAU * 2.0_f64.sqrt();
        assert_relative_eq!(strip.curve.last().unwrap()[0], length, epsilon = 1e-8);
    }

    #[test]
    fn latitude_strip_unrolls_to_an_annular_sector() {
        let sphere = Hypersurface::sphere(1.0, 2).unwrap();
        let lat = FRAC_PI_4.to_string();
        let patch = patch_for(&sphere, &["t", &lat], (0.0, TAU), 512);
        // slant radius: distance to the cone apex
        let rho = 1.0;
        for idx in [7usize, 100, 333] {
            let t = patch.frames.nodes[idx].t;
            let kappa = geodesic_curvature(&patch, t).unwrap();
            assert_relative_eq!(kappa.abs(), 1.0 / rho, epsilon = 1e-8);
        }
        let strip = develop_patch(&patch).unwrap();
        // arc of radius rho: center is rho to the left or right of the start
        let sign = strip.turning.signum();
        let center = [0.0, sign * rho];
        for p in &strip.curve {
            let d = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
            assert_relative_eq!(d, rho, epsilon = 1e-8);
        }
        // sector turning for latitude phi: circumference / slant radius
        let expected = TAU * FRAC_PI_4.sin();
        assert_relative_eq!(strip.turning.abs(), expected, epsilon = 1e-6);
        assert_relative_eq!(strip.turning.abs(), PI * 2.0_f64.sqrt(), epsilon = 1e-6);
        // rulings aim at the developed apex: the arc center
        for (p, r) in strip.curve.iter().zip(&strip.ruling) {
            let to_center = [center[0] - p[0], center[1] - p[1]];
            let cross = to_center[0] * r[1] - to_center[1] * r[0];
            assert!(cross.abs() <= 1e-7, "ruling misses the apex: {cross:.3e}");
        }
    }

    #[test]
    fn turning_matches_the_curvature_integral() {
        let sphere = Hypersurface::sphere(1.0, 2).unwrap();
        let lat = FRAC_PI_4.to_string();
        let patch = patch_for(&sphere, &["t", &lat], (0.0, TAU), 256);
        let strip = develop_patch(&patch).unwrap();
        // composite Simpson over node/midpoint curvatures
        let k = patch.frames.steps();
        let h = patch.frames.step_size();
        let mut integral = 0.0;
        for i in 0..k {
            let s0 = patch.frames.nodes[i].s;
            let f0 = kappa_at(&patch, s0).unwrap();
            let fm = kappa_at(&patch, s0 + 0.5 * h).unwrap();
            let f1 = kappa_at(&patch, patch.frames.nodes[i + 1].s).unwrap();
            integral += h / 6.0 * (f0 + 4.0 * fm + f1);
        }
        assert_relative_eq!(strip.turning, integral, epsilon = 1e-8);
    }

    #[test]
    fn development_preserves_mesh_edge_lengths() {
        let sphere = Hypersurface::sphere(1.0, 2).unwrap();
        let lat = FRAC_PI_4.to_string();
        let patch = patch_for(&sphere, &["t", &lat], (0.0, TAU), 512);
        let strip = develop_patch(&patch).unwrap();
        let (worst, _) = isometry_defect(&patch, &strip, 256, 16, 8).unwrap();
        assert!(worst <= 1e-6, "edge length mismatch {worst:.3e}");
    }

    #[test]
    fn higher_dimensional_patches_are_rejected() {
        let sphere = Hypersurface::sphere(1.0, 3).unwrap();
        let components: Vec<String> = ["t", "0", "0"].iter().map(|c| c.to_string()).collect();
        let curve = CurveOnSurface::parse(&components, (0.0, TAU)).unwrap();
        let usc = UnitSpeedCurve::new(&sphere, &curve).unwrap();
        let fc = propagate_frame(&usc, 64, &FrameRotation::identity()).unwrap();
        let field = ruling_fields(&fc).unwrap();
        let patch = RuledPatch::assemble(fc, field);
        assert!(matches!(
            develop_patch(&patch),
            Err(DevelopError::UnsupportedDimension { m: 3 })
        ));
        assert!(matches!(
            geodesic_curvature(&patch, 0.1),
            Err(DevelopError::UnsupportedDimension { m: 3 })
        ));
    }
}
