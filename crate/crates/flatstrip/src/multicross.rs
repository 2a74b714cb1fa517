//! The (n-1)-fold vector cross product in R^n and small-span utilities.
//!
//! `cross` maps n-1 vectors to the unique vector orthogonal to all of them
//! whose squared length equals their Gram determinant, oriented so that the
//! inputs followed by the result form a positively oriented basis. It is the
//! only place the rest of the crate gets ambient normals from, so the
//! conventions here fix every downstream sign.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 8;

/// Residual ratio below which Gram-Schmidt declares an input dependent.
pub const DEFAULT_DEPENDENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MultiCrossError {
    #[error("ambient dimension {0} outside supported range 2..={MAX_DIM}")]
    UnsupportedDimension(usize),
    #[error("expected {expected} vectors in dimension {dim}, got {got}")]
    ArityMismatch {
        dim: usize,
        expected: usize,
        got: usize,
    },
    #[error("mixed vector dimensions {0} and {1}")]
    MixedDimensions(usize, usize),
    #[error("no input vectors")]
    Empty,
    #[error("input vector {index} is linearly dependent on its predecessors")]
    DegenerateInput { index: usize },
}

fn common_dim(vs: &[DVector<f64>]) -> Result<usize, MultiCrossError> {
    let first = vs.first().ok_or(MultiCrossError::Empty)?;
    let n = first.len();
    for v in vs {
        if v.len() != n {
            return Err(MultiCrossError::MixedDimensions(n, v.len()));
        }
    }
    if !(2..=MAX_DIM).contains(&n) {
        return Err(MultiCrossError::UnsupportedDimension(n));
    }
    Ok(n)
}

/// Determinant by Gaussian elimination with partial pivoting.
/// Dimensions here are at most MAX_DIM, so no blocking is needed.
fn det_in_place(a: &mut DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut det = 1.0;
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[(row, col)].abs() > a[(pivot, col)].abs() {
                pivot = row;
            }
        }
        let p = a[(pivot, col)];
        if p == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap_rows(pivot, col);
            det = -det;
        }
        det *= p;
        for row in col + 1..n {
            let f = a[(row, col)] / p;
            if f != 0.0 {
                for k in col..n {
                    let sub = f * a[(col, k)];
                    a[(row, k)] -= sub;
                }
            }
        }
    }
    det
}

/// Lexicographic total order on coordinate vectors (total_cmp per entry).
fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            ord => return ord,
        }
    }
    std::cmp::Ordering::Equal
}

/// The (n-1)-fold cross product of `vs` in R^n.
///
/// Component i is the signed cofactor of the matrix whose columns are the
/// inputs, with row i deleted; equivalently `dot(cross(vs), x)` equals the
/// determinant of `[vs | x]` for every x. Linearly dependent inputs yield the
/// zero vector.
///
/// Columns are brought into a canonical (lexicographic) order before
/// elimination, with the permutation parity folded back in, so transposing
/// two distinct inputs negates every output component bitwise.
pub fn cross(vs: &[DVector<f64>]) -> Result<DVector<f64>, MultiCrossError> {
    let n = common_dim(vs)?;
    if vs.len() != n - 1 {
        return Err(MultiCrossError::ArityMismatch {
            dim: n,
            expected: n - 1,
            got: vs.len(),
        });
    }
    let mut order: Vec<usize> = (0..vs.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&vs[a], &vs[b]));
    let mut parity = 1.0;
    for a in 0..order.len() {
        for b in a + 1..order.len() {
            if order[a] > order[b] {
                parity = -parity;
            }
        }
    }
    let mut out = DVector::zeros(n);
    let mut minor = DMatrix::zeros(n - 1, n - 1);
    for i in 0..n {
        for (c, &src) in order.iter().enumerate() {
            let v = &vs[src];
            let mut rr = 0;
            for r in 0..n {
                if r != i {
                    minor[(rr, c)] = v[r];
                    rr += 1;
                }
            }
        }
        // sign of the cofactor in row i (0-based), column n-1 of the n x n matrix
        let sign = if (i + n + 1) % 2 == 0 {
            parity
        } else {
            -parity
        };
        out[i] = sign * det_in_place(&mut minor);
    }
    Ok(out)
}

/// Gram determinant det(<v_i, v_j>) of the input family.
///
/// Equals the squared (k-dimensional) volume of the parallelotope they span,
/// and the squared length of `cross(vs)` when k = n-1.
pub fn gram_det(vs: &[DVector<f64>]) -> Result<f64, MultiCrossError> {
    common_dim(vs)?;
    let k = vs.len();
    let mut g = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let d = vs[i].dot(&vs[j]);
            g[(i, j)] = d;
            g[(j, i)] = d;
        }
    }
    Ok(det_in_place(&mut g))
}

/// Gram-Schmidt orthonormalization preserving the flag of the input family.
///
/// Projects twice before normalizing, which keeps the result orthonormal to
/// machine precision even for badly conditioned inputs. An input whose
/// residual against the previous vectors drops below `dependence_tol` times
/// its own length is reported as `DegenerateInput` with its index.
pub fn orthonormalize(
    vs: &[DVector<f64>],
    dependence_tol: f64,
) -> Result<Vec<DVector<f64>>, MultiCrossError> {
    common_dim(vs)?;
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(vs.len());
    for (index, v) in vs.iter().enumerate() {
        let scale = v.norm();
        if scale == 0.0 {
            return Err(MultiCrossError::DegenerateInput { index });
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = r.dot(q);
                r.axpy(-c, q, 1.0);
            }
        }
        let rn = r.norm();
        if rn <= dependence_tol * scale {
            return Err(MultiCrossError::DegenerateInput { index });
        }
        basis.push(r / rn);
    }
    Ok(basis)
}

/// Largest principal angle between two subspaces given by orthonormal bases,
/// in radians.
///
/// Computed as asin of the largest singular value of `b - a (a^T b)`, which
/// stays accurate for nearly identical spans where the acos-based formula
/// loses half the significant digits.
pub fn span_principal_angle(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    assert!(
        !a.is_empty() && a.len() == b.len(),
        "span bases must match in rank"
    );
    let n = a[0].len();
    let k = a.len();
    let qa = DMatrix::from_fn(n, k, |r, c| a[c][r]);
    let qb = DMatrix::from_fn(n, k, |r, c| b[c][r]);
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let sigma = resid
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |m, s| m.max(*s));
    sigma.clamp(0.0, 1.0).asin()
}
