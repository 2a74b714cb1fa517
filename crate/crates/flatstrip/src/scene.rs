//! Scene files: a single JSON document describing surface, curve, grid,
//! box policy, frame gauge, seed, and tolerance overrides.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::FrameRotation;
use crate::surface::{CurveOnSurface, Hypersurface, SurfaceError};

/// Scene schema version understood by this build.
pub const SCENE_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scene is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported scene schema {got}, expected {SCENE_SCHEMA}")]
    Schema { got: u32 },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("curve has {got} components but the surface chart has {expected} variables")]
    CurveDimension { expected: usize, got: usize },
    #[error("curve interval [{lo}, {hi}] is empty or not finite")]
    BadInterval { lo: f64, hi: f64 },
    #[error("grid samples must be at least 4, got {0}")]
    BadSamples(usize),
    #[error("explicit box needs {expected} half-widths, got {got}")]
    BadBox { expected: usize, got: usize },
    #[error("box half-widths must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("safety must lie strictly between 0 and 1, got {0}")]
    BadSafety(f64),
    #[error("cannot parse ruling override {text:?}: {reason}")]
    BadOverride { text: String, reason: String },
}

/// Surface description, tagged by builtin kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    Sphere {
        radius: f64,
        #[serde(default = "default_m")]
        m: usize,
    },
    Ellipsoid {
        semi_axes: Vec<f64>,
    },
    Cylinder {
        radius: f64,
    },
    Torus {
        major_radius: f64,
        minor_radius: f64,
    },
    Graph {
        height: String,
        #[serde(default = "default_m")]
        m: usize,
    },
    Parametric {
        components: Vec<String>,
    },
}

fn default_m() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub components: Vec<String>,
    pub interval: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    512
}

impl Default for GridSpec {
    fn default() -> GridSpec {
        GridSpec {
            samples: default_samples(),
        }
    }
}

/// Box policy: probe for the widest admissible box, or take it as given.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoxSpec {
    Auto {
        #[serde(default = "default_safety")]
        safety: f64,
    },
    Explicit {
        half_widths: Vec<f64>,
    },
}

fn default_safety() -> f64 {
    0.5
}

impl Default for BoxSpec {
    fn default() -> BoxSpec {
        BoxSpec::Auto {
            safety: default_safety(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    /// Givens angles rotating the initial normal frame.
    #[serde(default)]
    pub rotation: Vec<f64>,
    /// Negate the second frame vector after rotating.
    #[serde(default)]
    pub flip: bool,
}

/// Optional overrides for the verification tolerances.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub orthonormality: Option<f64>,
    pub parallelism: Option<f64>,
    pub nonasymptotic: Option<f64>,
    pub system: Option<f64>,
    pub nondegeneracy: Option<f64>,
    pub flatness: Option<f64>,
    pub tangency: Option<f64>,
    pub isometry: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub schema: u32,
    pub surface: SurfaceSpec,
    pub curve: CurveSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(rename = "box", default)]
    pub box_spec: BoxSpec,
    #[serde(default)]
    pub frame: FrameSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    /// Test hook: replace the first ruling by a frame combination, e.g.
    /// "e2" or "e1+e2".
    #[serde(default)]
    pub ruling_override: Option<String>,
}

impl SceneFile {
    pub fn load(path: &str) -> Result<SceneFile, SceneError> {
        let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
            path: path.to_string(),
            source,
        })?;
        let scene: SceneFile = serde_json::from_str(&text)?;
        if scene.schema != SCENE_SCHEMA {
            return Err(SceneError::Schema { got: scene.schema });
        }
        Ok(scene)
    }

    pub fn surface(&self) -> Result<Hypersurface, SceneError> {
        let surface = match &self.surface {
            SurfaceSpec::Sphere { radius, m } => Hypersurface::sphere(*radius, *m)?,
            SurfaceSpec::Ellipsoid { semi_axes } => Hypersurface::ellipsoid(semi_axes)?,
            SurfaceSpec::Cylinder { radius } => Hypersurface::cylinder(*radius)?,
            SurfaceSpec::Torus {
                major_radius,
                minor_radius,
            } => Hypersurface::torus(*major_radius, *minor_radius)?,
            SurfaceSpec::Graph { height, m } => Hypersurface::graph(height, *m)?,
            SurfaceSpec::Parametric { components } => {
                let m = components.len().saturating_sub(1).max(1);
                let vars: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
                let var_refs: Vec<&str> = vars.iter().map(String::as_str).collect();
                Hypersurface::parametric(components, &var_refs)?
            }
        };
        Ok(surface)
    }

    pub fn curve(&self, surface: &Hypersurface) -> Result<CurveOnSurface, SceneError> {
        let [lo, hi] = self.curve.interval;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(SceneError::BadInterval { lo, hi });
        }
        if self.curve.components.len() != surface.dim() {
            return Err(SceneError::CurveDimension {
                expected: surface.dim(),
                got: self.curve.components.len(),
            });
        }
        Ok(CurveOnSurface::parse(&self.curve.components, (lo, hi))?)
    }

    pub fn rotation(&self) -> FrameRotation {
        FrameRotation {
            angles: self.frame.rotation.clone(),
            flip: self.frame.flip,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let surface = self.surface()?;
        self.curve(&surface)?;
        if self.grid.samples < 4 {
            return Err(SceneError::BadSamples(self.grid.samples));
        }
        match &self.box_spec {
            BoxSpec::Auto { safety } => {
                if !(*safety > 0.0 && *safety < 1.0) {
                    return Err(SceneError::BadSafety(*safety));
                }
            }
            BoxSpec::Explicit { half_widths } => {
                if half_widths.len() != surface.dim() - 1 {
                    return Err(SceneError::BadBox {
                        expected: surface.dim() - 1,
                        got: half_widths.len(),
                    });
                }
                for w in half_widths {
                    if !(w.is_finite() && *w > 0.0) {
                        return Err(SceneError::BadHalfWidth(*w));
                    }
                }
            }
        }
        if let Some(text) = &self.ruling_override {
            parse_ruling_override(text, surface.dim())?;
        }
        Ok(())
    }
}

/// Parse a frame combination like "e2", "e1+e2", or "e1-2e3" into frame
/// coefficients of length m.
pub fn parse_ruling_override(text: &str, m: usize) -> Result<Vec<f64>, SceneError> {
    let bad = |reason: &str| SceneError::BadOverride {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(bad("empty expression"));
    }
    let mut coefficients = vec![0.0_f64; m];
    let mut rest = compact.as_str();
    let mut sign = 1.0;
    if let Some(tail) = rest.strip_prefix('-') {
        sign = -1.0;
        rest = tail;
    } else if let Some(tail) = rest.strip_prefix('+') {
        rest = tail;
    }
    loop {
        let term_end = rest
            .char_indices()
            .find(|(i, c)| *i > 0 && (*c == '+' || *c == '-'))
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        let term = &rest[..term_end];
        let e_pos = term.find('e').ok_or_else(|| bad("term without e<k>"))?;
        let coef_text = &term[..e_pos];
        let coef = if coef_text.is_empty() {
            1.0
        } else {
            let trimmed = coef_text.strip_suffix('*').unwrap_or(coef_text);
            trimmed.parse::<f64>().map_err(|_| bad("bad coefficient"))?
        };
        let index: usize = term[e_pos + 1..]
            .parse()
            .map_err(|_| bad("bad frame index"))?;
        if index == 0 || index > m {
            return Err(bad(&format!("frame index e{index} outside 1..={m}")));
        }
        coefficients[index - 1] += sign * coef;
        if term_end == rest.len() {
            break;
        }
        sign = if rest.as_bytes()[term_end] == b'-' {
            -1.0
        } else {
            1.0
        };
        rest = &rest[term_end + 1..];
    }
    if coefficients.iter().all(|c| *c == 0.0) {
        return Err(bad("coefficients are all zero"));
    }
    Ok(coefficients)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_scene() -> String {
        r#"{
            "schema": 1,
            "surface": {"kind": "sphere", "radius": 1.0},
            "curve": {"components": ["t", "0"], "interval": [0.0, 6.283185307179586]}
        }"#
        .to_string()
    }

    #[test]
    fn minimal_scene_fills_defaults() {
        let scene: SceneFile = serde_json::from_str(&minimal_scene()).unwrap();
        assert_eq!(scene.schema, 1);
        assert_eq!(scene.grid.samples, 512);
        assert!(matches!(scene.box_spec, BoxSpec::Auto { safety } if safety == 0.5));
        assert_eq!(scene.seed, 0);
        assert!(scene.frame.rotation.is_empty() && !scene.frame.flip);
        scene.validate().unwrap();
    }

    #[test]
    fn schema_and_dimensions_are_enforced() {
        let scene: SceneFile =
            serde_json::from_str(&minimal_scene().replace("\"schema\": 1", "\"schema\": 2"))
                .unwrap();
        assert_eq!(scene.schema, 2);
        // load() checks the schema; validate() checks geometry
        let mut bad_curve: SceneFile = serde_json::from_str(&minimal_scene()).unwrap();
        bad_curve.curve.components.pop();
        assert!(matches!(
            bad_curve.validate(),
            Err(SceneError::CurveDimension {
                expected: 2,
                got: 1
            })
        ));
        let mut bad_interval: SceneFile = serde_json::from_str(&minimal_scene()).unwrap();
        bad_interval.curve.interval = [1.0, 1.0];
        assert!(matches!(
            bad_interval.validate(),
            Err(SceneError::BadInterval { .. })
        ));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = minimal_scene().replace("\"schema\": 1", "\"schema\": 1, \"typo\": true");
        assert!(serde_json::from_str::<SceneFile>(&text).is_err());
    }

    #[test]
    fn override_expressions_parse() {
        assert_eq!(parse_ruling_override("e2", 2).unwrap(), vec![0.0, 1.0]);
        assert_eq!(parse_ruling_override("e1+e2", 2).unwrap(), vec![1.0, 1.0]);
        assert_eq!(
            parse_ruling_override("e1 - 2e3", 3).unwrap(),
            vec![1.0, 0.0, -2.0]
        );
        assert_eq!(
            parse_ruling_override("-0.5*e1", 2).unwrap(),
            vec![-0.5, 0.0]
        );
        assert!(parse_ruling_override("e9", 2).is_err());
        assert!(parse_ruling_override("", 2).is_err());
        assert!(parse_ruling_override("e1-e1", 2).is_err());
    }

    #[test]
    fn explicit_box_is_validated() {
        let mut scene: SceneFile = serde_json::from_str(&minimal_scene()).unwrap();
        scene.box_spec = BoxSpec::Explicit {
            half_widths: vec![0.25],
        };
        scene.validate().unwrap();
        scene.box_spec = BoxSpec::Explicit {
            half_widths: vec![0.25, 0.5],
        };
        assert!(matches!(scene.validate(), Err(SceneError::BadBox { .. })));
        scene.box_spec = BoxSpec::Explicit {
            half_widths: vec![-1.0],
        };
        assert!(matches!(scene.validate(), Err(SceneError::BadHalfWidth(_))));
    }
}
