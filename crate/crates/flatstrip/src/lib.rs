//! Ruled, intrinsically flat approximations of hypersurfaces along curves.
//!
//! The pipeline: parse a chart and a curve as expressions (`expr`), evaluate
//! exact second-order jets of the immersion (`surface`), transport an adapted
//! orthonormal frame along the arc-length parametrized curve (`frames`),
//! assemble the ruled patch that stays tangent to the hypersurface along the
//! curve (`flatapprox`), and for surfaces in 3-space unroll the patch
//! isometrically into the plane (`develop`). `scene`, `report` and `export`
//! back the `flatstrip` command line tool.

pub mod develop;
pub mod export;
pub mod expr;
pub mod flatapprox;
pub mod frames;
pub mod multicross;
pub mod report;
pub mod scene;
pub mod surface;
