//! Hypersurfaces of R^{m+1} presented by chart expressions.
//!
//! A chart is m+1 expressions in m variables. All geometry downstream
//! (normals, curvature, frames) is derived from exact second-order jets of
//! these expressions, so the only approximation anywhere in the pipeline is
//! the ODE integration in `frames`.
//!
//! Orientation convention: the unit normal is the normalized cross product of
//! the chart tangent vectors in chart order, so (tangent basis, normal) is a
//! positively oriented basis of R^{m+1}.

use crate::expr::{ExprError, Expression, Jet2};
use crate::multicross::{self, MultiCrossError};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Charts whose tangent Gram determinant falls below this are rejected.
/// Scaled for charts of roughly unit metric; configurable per surface.
pub const DEFAULT_IMMERSION_TOL: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurfaceError {
    #[error("surface dimension {m} unsupported (need 2 <= m <= 7)")]
    UnsupportedDimension { m: usize },
    #[error("{0}")]
    Expr(#[from] ExprError),
    #[error("expected {expected} chart components, got {got}")]
    ComponentMismatch { expected: usize, got: usize },
    #[error("invalid surface parameter: {0}")]
    InvalidParameter(String),
    #[error("chart degenerate at {point:?}: tangent gram determinant {gram:.3e} < {tol:.3e}")]
    DegenerateChart {
        point: Vec<f64>,
        gram: f64,
        tol: f64,
    },
    #[error("{0}")]
    Cross(#[from] MultiCrossError),
    #[error("curve component count {got} does not match surface dimension {expected}")]
    CurveDimensionMismatch { expected: usize, got: usize },
    #[error("curve interval [{0}, {1}] is empty or not finite")]
    BadInterval(f64, f64),
}

/// Value, Jacobian and per-component Hessians of a chart at one point.
#[derive(Debug, Clone)]
pub struct SurfaceJet {
    /// Ambient position, length m+1.
    pub position: DVector<f64>,
    /// Columns are the chart tangent vectors, (m+1) x m.
    pub jacobian: DMatrix<f64>,
    /// One jet per ambient component.
    pub jets: Vec<Jet2>,
}

impl SurfaceJet {
    /// Ambient vector of second derivatives contracted with chart directions
    /// `a` and `b`: component k is a^T H_k b.
    pub fn second_derivative(&self, a: &[f64], b: &[f64]) -> DVector<f64> {
        let m = a.len();
        DVector::from_fn(self.position.len(), |k, _| {
            let jet = &self.jets[k];
            let mut acc = 0.0;
            for i in 0..m {
                acc += a[i] * b[i] * jet.hessian(i, i);
                for j in i + 1..m {
                    acc += (a[i] * b[j] + a[j] * b[i]) * jet.hessian(i, j);
                }
            }
            acc
        })
    }

    /// Derivative of tangent column i along chart velocity `xdot`.
    pub fn tangent_column_derivative(&self, i: usize, xdot: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.position.len(), |k, _| {
            xdot.iter()
                .enumerate()
                .map(|(j, xd)| self.jets[k].hessian(i, j) * xd)
                .sum()
        })
    }
}

/// Second fundamental form with respect to the given unit normal, evaluated
/// from a precomputed jet. Exactly symmetric in `a` and `b` because every
/// index pair is accumulated once.
pub fn second_fundamental_form_at(
    jet: &SurfaceJet,
    normal: &DVector<f64>,
    a: &[f64],
    b: &[f64],
) -> f64 {
    jet.second_derivative(a, b).dot(normal)
}

#[derive(Debug, Clone)]
pub struct Hypersurface {
    components: Vec<Expression>,
    m: usize,
    immersion_tol: f64,
}

impl Hypersurface {
    /// Build from parsed chart components; all must share one variable list
    /// of length one less than the component count.
    pub fn new(components: Vec<Expression>) -> Result<Hypersurface, SurfaceError> {
        let ambient = components.len();
        if ambient < 3 {
            return Err(SurfaceError::UnsupportedDimension {
                m: ambient.saturating_sub(1),
            });
        }
        let m = ambient - 1;
        if m > multicross::MAX_DIM - 1 {
            return Err(SurfaceError::UnsupportedDimension { m });
        }
        for c in &components {
            if c.n_vars() != m {
                return Err(SurfaceError::ComponentMismatch {
                    expected: m + 1,
                    got: ambient,
                });
            }
        }
        Ok(Hypersurface {
            components,
            m,
            immersion_tol: DEFAULT_IMMERSION_TOL,
        })
    }

    pub fn with_immersion_tol(mut self, tol: f64) -> Hypersurface {
        self.immersion_tol = tol;
        self
    }

    /// Chart dimension m.
    pub fn dim(&self) -> usize {
        self.m
    }

    /// Ambient dimension m+1.
    pub fn ambient_dim(&self) -> usize {
        self.m + 1
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    fn default_vars(m: usize) -> Vec<String> {
        (1..=m).map(|i| format!("x{i}")).collect()
    }

    /// Round sphere of the given radius, chart by nested angles.
    pub fn sphere(radius: f64, m: usize) -> Result<Hypersurface, SurfaceError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(SurfaceError::InvalidParameter(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        let axes = vec![radius; m + 1];
        Self::scaled_sphere(&axes, m)
    }

    /// Ellipsoid with the given m+1 semi-axes, same chart as the sphere.
    pub fn ellipsoid(semi_axes: &[f64]) -> Result<Hypersurface, SurfaceError> {
        if semi_axes.len() < 3 {
            return Err(SurfaceError::UnsupportedDimension {
                m: semi_axes.len().saturating_sub(1),
            });
        }
        for a in semi_axes {
            if !(*a > 0.0 && a.is_finite()) {
                return Err(SurfaceError::InvalidParameter(format!(
                    "semi-axes must be positive, got {a}"
                )));
            }
        }
        Self::scaled_sphere(semi_axes, semi_axes.len() - 1)
    }

    fn scaled_sphere(axes: &[f64], m: usize) -> Result<Hypersurface, SurfaceError> {
        if !(2..=multicross::MAX_DIM - 1).contains(&m) {
            return Err(SurfaceError::UnsupportedDimension { m });
        }
        let vars = Self::default_vars(m);
        let var_refs: Vec<&str> = vars.iter().map(String::as_str).collect();
        let mut texts = Vec::with_capacity(m + 1);
        let cos_tail = |from: usize| -> String {
            (from..=m)
                .map(|j| format!("*cos(x{j})"))
                .collect::<String>()
        };
        texts.push(format!("({}){}", axes[0], cos_tail(1)));
        for (k, axis) in axes.iter().enumerate().skip(1) {
            texts.push(format!("({axis})*sin(x{k}){}", cos_tail(k + 1)));
        }
        let components = texts
            .iter()
            .map(|t| Expression::parse(t, &var_refs))
            .collect::<Result<Vec<_>, _>>()?;
        Hypersurface::new(components)
    }

    /// Circular cylinder of radius r around the x3-axis; chart (angle, height).
    pub fn cylinder(radius: f64) -> Result<Hypersurface, SurfaceError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(SurfaceError::InvalidParameter(format!(
                "cylinder radius must be positive, got {radius}"
            )));
        }
        let texts = [
            format!("({radius})*cos(x1)"),
            format!("({radius})*sin(x1)"),
            "x2".to_string(),
        ];
        let components = texts
            .iter()
            .map(|t| Expression::parse(t, &["x1", "x2"]))
            .collect::<Result<Vec<_>, _>>()?;
        Hypersurface::new(components)
    }

    /// Graph x_{m+1} = u(x_1, ..., x_m).
    pub fn graph(height: &str, m: usize) -> Result<Hypersurface, SurfaceError> {
        if !(2..=multicross::MAX_DIM - 1).contains(&m) {
            return Err(SurfaceError::UnsupportedDimension { m });
        }
        let vars = Self::default_vars(m);
        let var_refs: Vec<&str> = vars.iter().map(String::as_str).collect();
        let mut components = Vec::with_capacity(m + 1);
        for v in &var_refs {
            components.push(Expression::parse(v, &var_refs)?);
        }
        components.push(Expression::parse(height, &var_refs)?);
        Hypersurface::new(components)
    }

    /// Torus of revolution around the x3-axis (m = 2).
    pub fn torus(major_radius: f64, minor_radius: f64) -> Result<Hypersurface, SurfaceError> {
        if !(major_radius.is_finite()
            && minor_radius.is_finite()
            && minor_radius > 0.0
            && major_radius > minor_radius)
        {
            return Err(SurfaceError::InvalidParameter(format!(
                "torus needs 0 < minor < major, got minor {minor_radius}, major {major_radius}"
            )));
        }
        let texts = [
            format!("(({major_radius}) + ({minor_radius})*cos(x2))*cos(x1)"),
            format!("(({major_radius}) + ({minor_radius})*cos(x2))*sin(x1)"),
            format!("({minor_radius})*sin(x2)"),
        ];
        let components = texts
            .iter()
            .map(|t| Expression::parse(t, &["x1", "x2"]))
            .collect::<Result<Vec<_>, _>>()?;
        Hypersurface::new(components)
    }

    /// Arbitrary chart from expression strings over the given variables.
    pub fn parametric(components: &[String], vars: &[&str]) -> Result<Hypersurface, SurfaceError> {
        let parsed = components
            .iter()
            .map(|t| Expression::parse(t, vars))
            .collect::<Result<Vec<_>, _>>()?;
        if parsed.len() != vars.len() + 1 {
            return Err(SurfaceError::ComponentMismatch {
                expected: vars.len() + 1,
                got: parsed.len(),
            });
        }
        Hypersurface::new(parsed)
    }

    /// Position and Jacobian only; the cheap path for arc-length quadrature.
    pub fn jet1(&self, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>), SurfaceError> {
        let n = self.m + 1;
        let mut position = DVector::zeros(n);
        let mut jacobian = DMatrix::zeros(n, self.m);
        for (k, comp) in self.components.iter().enumerate() {
            let jet = comp.eval_jet1(x)?;
            position[k] = jet.value;
            for i in 0..self.m {
                jacobian[(k, i)] = jet.gradient[i];
            }
        }
        Ok((position, jacobian))
    }

    /// Full second-order jet, with the immersion check.
    pub fn jet(&self, x: &[f64]) -> Result<SurfaceJet, SurfaceError> {
        let n = self.m + 1;
        let jets: Vec<Jet2> = self
            .components
            .iter()
            .map(|c| c.eval_jet2(x))
            .collect::<Result<_, _>>()?;
        let position = DVector::from_fn(n, |k, _| jets[k].value);
        let jacobian = DMatrix::from_fn(n, self.m, |k, i| jets[k].gradient[i]);
        let gram = multicross::gram_det(&column_vectors(&jacobian))?;
        if gram.is_nan() || gram < self.immersion_tol {
            return Err(SurfaceError::DegenerateChart {
                point: x.to_vec(),
                gram,
                tol: self.immersion_tol,
            });
        }
        Ok(SurfaceJet {
            position,
            jacobian,
            jets,
        })
    }

    /// The m chart tangent vectors at x (Jacobian columns, not normalized).
    pub fn tangent_basis(&self, x: &[f64]) -> Result<Vec<DVector<f64>>, SurfaceError> {
        Ok(column_vectors(&self.jet(x)?.jacobian))
    }

    /// Unit normal at x, oriented by the chart.
    pub fn unit_normal(&self, x: &[f64]) -> Result<DVector<f64>, SurfaceError> {
        let jet = self.jet(x)?;
        normal_from_jet(&jet)
    }

    /// Second fundamental form h(a, b) at x for chart directions a and b,
    /// with respect to `unit_normal`.
    pub fn second_fundamental_form(
        &self,
        x: &[f64],
        a: &[f64],
        b: &[f64],
    ) -> Result<f64, SurfaceError> {
        let jet = self.jet(x)?;
        let normal = normal_from_jet(&jet)?;
        Ok(second_fundamental_form_at(&jet, &normal, a, b))
    }
}

pub(crate) fn column_vectors(mat: &DMatrix<f64>) -> Vec<DVector<f64>> {
    (0..mat.ncols())
        .map(|i| mat.column(i).into_owned())
        .collect()
}

pub(crate) fn normal_from_jet(jet: &SurfaceJet) -> Result<DVector<f64>, SurfaceError> {
    let w = multicross::cross(&column_vectors(&jet.jacobian))?;
    let norm = w.norm();
    if norm == 0.0 {
        return Err(SurfaceError::DegenerateChart {
            point: vec![],
            gram: 0.0,
            tol: 0.0,
        });
    }
    Ok(w / norm)
}

/// A curve in chart coordinates, m expressions of one parameter.
#[derive(Debug, Clone)]
pub struct CurveOnSurface {
    components: Vec<Expression>,
    pub interval: (f64, f64),
}

/// Chart-valued 2-jet of a curve at a parameter value.
#[derive(Debug, Clone)]
pub struct CurveJet {
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
    pub acceleration: Vec<f64>,
}

impl CurveOnSurface {
    pub fn new(
        components: Vec<Expression>,
        interval: (f64, f64),
    ) -> Result<CurveOnSurface, SurfaceError> {
        for c in &components {
            if c.n_vars() != 1 {
                return Err(SurfaceError::CurveDimensionMismatch {
                    expected: components.len(),
                    got: c.n_vars(),
                });
            }
        }
        if !(interval.0.is_finite() && interval.1.is_finite() && interval.0 < interval.1) {
            return Err(SurfaceError::BadInterval(interval.0, interval.1));
        }
        Ok(CurveOnSurface {
            components,
            interval,
        })
    }

    pub fn parse(
        components: &[String],
        interval: (f64, f64),
    ) -> Result<CurveOnSurface, SurfaceError> {
        let parsed = components
            .iter()
            .map(|t| Expression::parse(t, &["t"]))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(parsed, interval)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expression] {
        &self.components
    }

    pub fn jet2(&self, t: f64) -> Result<CurveJet, SurfaceError> {
        let mut point = Vec::with_capacity(self.components.len());
        let mut velocity = Vec::with_capacity(self.components.len());
        let mut acceleration = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let jet = c.eval_jet2(&[t])?;
            point.push(jet.value);
            velocity.push(jet.gradient[0]);
            acceleration.push(jet.hessian(0, 0));
        }
        Ok(CurveJet {
            point,
            velocity,
            acceleration,
        })
    }

    pub fn jet1(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>), SurfaceError> {
        let mut point = Vec::with_capacity(self.components.len());
        let mut velocity = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let jet = c.eval_jet1(&[t])?;
            point.push(jet.value);
            velocity.push(jet.gradient[0]);
        }
        Ok((point, velocity))
    }
}

/// Ambient 2-jet of the composed curve f(c(t)) in the original parameter.
#[derive(Debug, Clone)]
pub struct AmbientJet {
    pub position: DVector<f64>,
    pub velocity: DVector<f64>,
    pub acceleration: DVector<f64>,
}

/// Position, velocity and acceleration of the ambient curve at t by the exact
/// chain rule through the chart.
pub fn ambient_curve(
    surface: &Hypersurface,
    curve: &CurveOnSurface,
    t: f64,
) -> Result<AmbientJet, SurfaceError> {
    if curve.dim() != surface.dim() {
        return Err(SurfaceError::CurveDimensionMismatch {
            expected: surface.dim(),
            got: curve.dim(),
        });
    }
    let cj = curve.jet2(t)?;
    let sj = surface.jet(&cj.point)?;
    let velocity = &sj.jacobian * DVector::from_column_slice(&cj.velocity);
    let acceleration = &sj.jacobian * DVector::from_column_slice(&cj.acceleration)
        + sj.second_derivative(&cj.velocity, &cj.velocity);
    Ok(AmbientJet {
        position: sj.position,
        velocity,
        acceleration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_graph_has_standard_frame_and_no_curvature() {
        let s = Hypersurface::graph("0", 2).unwrap();
        let basis = s.tangent_basis(&[0.4, -1.2]).unwrap();
        assert_eq!(basis[0], DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert_eq!(basis[1], DVector::from_vec(vec![0.0, 1.0, 0.0]));
        let n = s.unit_normal(&[0.4, -1.2]).unwrap();
        assert_eq!(n, DVector::from_vec(vec![0.0, 0.0, 1.0]));
        assert_eq!(
            s.second_fundamental_form(&[0.4, -1.2], &[1.0, 0.0], &[0.0, 1.0])
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn sphere_normal_is_outward_radial() {
        let s = Hypersurface::sphere(1.0, 2).unwrap();
        let x = [0.3, -0.2];
        let jet = s.jet(&x).unwrap();
        assert_relative_eq!(jet.position.norm(), 1.0, epsilon = 1e-14);
        let n = s.unit_normal(&x).unwrap();
        assert_relative_eq!((n - &jet.position).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn sphere_second_fundamental_form_is_minus_metric() {
        let s = Hypersurface::sphere(1.0, 2).unwrap();
        let x = [0.7, 0.25];
        let jet = s.jet(&x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let b = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let av = &jet.jacobian * DVector::from_column_slice(&a);
            let bv = &jet.jacobian * DVector::from_column_slice(&b);
            let h = s.second_fundamental_form(&x, &a, &b).unwrap();
            assert_relative_eq!(h, -av.dot(&bv), epsilon = 1e-12);
        }
    }

    #[test]
    fn cylinder_curves_only_around_its_axis() {
        let s = Hypersurface::cylinder(2.0).unwrap();
        let x = [1.1, -0.4];
        assert_relative_eq!(
            s.second_fundamental_form(&x, &[1.0, 0.0], &[1.0, 0.0])
                .unwrap(),
            -2.0,
            epsilon = 1e-13
        );
        assert_relative_eq!(
            s.second_fundamental_form(&x, &[0.0, 1.0], &[0.0, 1.0])
                .unwrap(),
            0.0
        );
        assert_relative_eq!(
            s.second_fundamental_form(&x, &[1.0, 0.0], &[0.0, 1.0])
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn second_fundamental_form_is_exactly_symmetric() {
        let s = Hypersurface::torus(2.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let b = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let hab = s.second_fundamental_form(&x, &a, &b).unwrap();
            let hba = s.second_fundamental_form(&x, &b, &a).unwrap();
            assert_eq!(hab.to_bits(), hba.to_bits());
        }
    }

    #[test]
    fn normals_are_unit_and_orthogonal_across_builtins() {
        let surfaces = vec![
            Hypersurface::sphere(1.7, 2).unwrap(),
            Hypersurface::sphere(1.0, 3).unwrap(),
            Hypersurface::cylinder(0.8).unwrap(),
            Hypersurface::ellipsoid(&[1.0, 1.0, 2.0]).unwrap(),
            Hypersurface::torus(2.0, 0.6).unwrap(),
            Hypersurface::graph("x1^2 + x2^2", 2).unwrap(),
            Hypersurface::graph("sin(x1)*cos(x2) + x3^2", 3).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for s in &surfaces {
            for _ in 0..500 {
                let x: Vec<f64> = (0..s.dim()).map(|_| rng.gen_range(-1.2..1.2)).collect();
                let jet = match s.jet(&x) {
                    Ok(j) => j,
                    // chart poles are legitimately degenerate
                    Err(SurfaceError::DegenerateChart { .. }) => continue,
                    Err(e) => panic!("unexpected error {e}"),
                };
                let n = normal_from_jet(&jet).unwrap();
                assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-12);
                for col in column_vectors(&jet.jacobian) {
                    assert!(n.dot(&col).abs() <= 1e-12 * col.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn paraboloid_hessian_at_critical_point() {
        let s = Hypersurface::graph("x1^2 + x2^2", 2).unwrap();
        assert_relative_eq!(
            s.second_fundamental_form(&[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0])
                .unwrap(),
            2.0
        );
        assert_relative_eq!(
            s.second_fundamental_form(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0])
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn sphere_chart_degenerates_at_the_pole() {
        let s = Hypersurface::sphere(1.0, 2).unwrap();
        match s.jet(&[0.0, std::f64::consts::FRAC_PI_2]).unwrap_err() {
            SurfaceError::DegenerateChart { .. } => {}
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn ambient_curve_on_the_equator() {
        let s = Hypersurface::sphere(1.0, 2).unwrap();
        let c = CurveOnSurface::parse(&["t".into(), "0".into()], (0.0, 6.0)).unwrap();
        let t = 0.9;
        let jet = ambient_curve(&s, &c, t).unwrap();
        let expect_pos = DVector::from_vec(vec![t.cos(), t.sin(), 0.0]);
        assert_relative_eq!((jet.position - &expect_pos).norm(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(
            (jet.velocity - DVector::from_vec(vec![-t.sin(), t.cos(), 0.0])).norm(),
            0.0,
            epsilon = 1e-14
        );
        assert_relative_eq!((jet.acceleration + expect_pos).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn weingarten_consistency_by_finite_differences() {
        // h(a, b) must equal -<dN(a), df(b)> where dN is differenced numerically
        let s = Hypersurface::ellipsoid(&[1.0, 1.0, 2.0]).unwrap();
        let x = [0.4, 0.3];
        let jet = s.jet(&x).unwrap();
        let cols = column_vectors(&jet.jacobian);
        let h = 1e-5;
        for (i, a) in [[1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
            let np = s.unit_normal(&[x[0] + h * a[0], x[1] + h * a[1]]).unwrap();
            let nm = s.unit_normal(&[x[0] - h * a[0], x[1] - h * a[1]]).unwrap();
            let dn = (np - nm) / (2.0 * h);
            for (j, b) in [[1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
                let hab = s.second_fundamental_form(&x, a, b).unwrap();
                let fd = -dn.dot(&cols[j]);
                assert_relative_eq!(hab, fd, epsilon = 1e-6, max_relative = 1e-6);
                let _ = i;
            }
        }
    }

    #[test]
    fn parametric_surface_dimension_validation() {
        let err = Hypersurface::parametric(&["x1".into(), "x2".into()], &["x1", "x2"]).unwrap_err();
        assert!(matches!(err, SurfaceError::ComponentMismatch { .. }));
    }
}
