//! Forward-mode evaluation of first and second order jets.
//!
//! Hessians are held as packed upper triangles: every propagation rule below
//! writes one entry per unordered index pair, so jet.hessian(i, j) and
//! jet.hessian(j, i) are the same f64 by construction.

use super::{EvalErrorKind, ExprError, Func, Node, NodeKind, Span};
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct Jet1 {
    pub value: f64,
    pub gradient: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Jet2 {
    n: usize,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major packed upper triangle, length n(n+1)/2.
    pub hess_upper: Vec<f64>,
}

#[inline]
fn pack_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * (i + 1) / 2 + j
}

impl Jet2 {
    fn constant(n: usize, value: f64) -> Jet2 {
        Jet2 {
            n,
            value,
            gradient: vec![0.0; n],
            hess_upper: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn hessian(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.hess_upper[pack_index(self.n, i, j)]
    }

    pub fn hessian_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.hessian(i, j))
    }

    pub(crate) fn non_finite(&self) -> Option<EvalErrorKind> {
        let ok = self.value.is_finite()
            && self.gradient.iter().all(|g| g.is_finite())
            && self.hess_upper.iter().all(|h| h.is_finite());
        if ok {
            None
        } else {
            Some(EvalErrorKind::NonFinite)
        }
    }
}

fn err(kind: EvalErrorKind, span: Span) -> ExprError {
    ExprError::Eval {
        kind,
        offset: span.start,
    }
}

fn add2(a: &Jet2, b: &Jet2, sign: f64) -> Jet2 {
    let mut out = a.clone();
    out.value += sign * b.value;
    for (o, x) in out.gradient.iter_mut().zip(&b.gradient) {
        *o += sign * x;
    }
    for (o, x) in out.hess_upper.iter_mut().zip(&b.hess_upper) {
        *o += sign * x;
    }
    out
}

fn neg2(a: &Jet2) -> Jet2 {
    let mut out = a.clone();
    out.value = -out.value;
    out.gradient.iter_mut().for_each(|g| *g = -*g);
    out.hess_upper.iter_mut().for_each(|h| *h = -*h);
    out
}

fn mul2(a: &Jet2, b: &Jet2) -> Jet2 {
    let n = a.n;
    let mut out = Jet2::constant(n, a.value * b.value);
    for i in 0..n {
        out.gradient[i] = a.value * b.gradient[i] + b.value * a.gradient[i];
    }
    for i in 0..n {
        for j in i..n {
            let k = pack_index(n, i, j);
            out.hess_upper[k] = a.value * b.hess_upper[k]
                + b.value * a.hess_upper[k]
                + a.gradient[i] * b.gradient[j]
                + a.gradient[j] * b.gradient[i];
        }
    }
    out
}

/// Chain rule through a scalar function with value `f`, derivative `fp` and
/// second derivative `fpp` at the inner value.
fn chain2(u: &Jet2, f: f64, fp: f64, fpp: f64) -> Jet2 {
    let n = u.n;
    let mut out = Jet2::constant(n, f);
    for i in 0..n {
        out.gradient[i] = fp * u.gradient[i];
    }
    for i in 0..n {
        for j in i..n {
            let k = pack_index(n, i, j);
            out.hess_upper[k] = fp * u.hess_upper[k] + fpp * u.gradient[i] * u.gradient[j];
        }
    }
    out
}

fn recip2(b: &Jet2, span: Span) -> Result<Jet2, ExprError> {
    if b.value == 0.0 {
        return Err(err(EvalErrorKind::DivisionByZero, span));
    }
    let r = 1.0 / b.value;
    Ok(chain2(b, r, -r * r, 2.0 * r * r * r))
}

/// Integer power by repeated squaring of jets; valid for any base sign.
fn powi2(u: &Jet2, k: i64, span: Span) -> Result<Jet2, ExprError> {
    if k == 0 {
        return Ok(Jet2::constant(u.n, 1.0));
    }
    if k < 0 {
        let positive = powi2(u, -k, span)?;
        return recip2(&positive, span);
    }
    let mut base = u.clone();
    let mut k = k as u64;
    let mut acc: Option<Jet2> = None;
    loop {
        if k & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => mul2(&a, &base),
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = mul2(&base, &base);
    }
    Ok(acc.expect("nonzero exponent"))
}

fn call2(func: Func, u: &Jet2, span: Span) -> Result<Jet2, ExprError> {
    let x = u.value;
    let (f, fp, fpp) = match func {
        Func::Sin => (x.sin(), x.cos(), -x.sin()),
        Func::Cos => (x.cos(), -x.sin(), -x.cos()),
        Func::Tan => {
            let t = x.tan();
            let d = 1.0 + t * t;
            (t, d, 2.0 * t * d)
        }
        Func::Exp => {
            let e = x.exp();
            (e, e, e)
        }
        Func::Log => {
            if x <= 0.0 {
                return Err(err(EvalErrorKind::LogNonPositive, span));
            }
            (x.ln(), 1.0 / x, -1.0 / (x * x))
        }
        Func::Sqrt => {
            if x <= 0.0 {
                return Err(err(EvalErrorKind::SqrtNonPositive, span));
            }
            let s = x.sqrt();
            (s, 0.5 / s, -0.25 / (x * s))
        }
    };
    Ok(chain2(u, f, fp, fpp))
}

pub(super) fn eval2(node: &Node, x: &[f64]) -> Result<Jet2, ExprError> {
    let n = x.len();
    let jet = match &node.kind {
        NodeKind::Constant(c) => Jet2::constant(n, *c),
        NodeKind::Var(i) => {
            let mut jet = Jet2::constant(n, x[*i]);
            jet.gradient[*i] = 1.0;
            jet
        }
        NodeKind::Neg(a) => neg2(&eval2(a, x)?),
        NodeKind::Add(a, b) => add2(&eval2(a, x)?, &eval2(b, x)?, 1.0),
        NodeKind::Sub(a, b) => add2(&eval2(a, x)?, &eval2(b, x)?, -1.0),
        NodeKind::Mul(a, b) => mul2(&eval2(a, x)?, &eval2(b, x)?),
        NodeKind::Div(a, b) => {
            let den = recip2(&eval2(b, x)?, node.span)?;
            mul2(&eval2(a, x)?, &den)
        }
        NodeKind::PowInt(a, k) => powi2(&eval2(a, x)?, *k, node.span)?,
        NodeKind::PowReal(a, r) => {
            let u = eval2(a, x)?;
            if u.value <= 0.0 {
                return Err(err(EvalErrorKind::PowNonPositiveBase, node.span));
            }
            let f = u.value.powf(*r);
            let fp = r * u.value.powf(r - 1.0);
            let fpp = r * (r - 1.0) * u.value.powf(r - 2.0);
            chain2(&u, f, fp, fpp)
        }
        NodeKind::Call(func, a) => call2(*func, &eval2(a, x)?, node.span)?,
    };
    if !jet.value.is_finite() {
        return Err(err(EvalErrorKind::NonFinite, node.span));
    }
    Ok(jet)
}

// First-order twin of eval2, used on paths that only need velocities.

fn chain1(u: &Jet1, f: f64, fp: f64) -> Jet1 {
    Jet1 {
        value: f,
        gradient: u.gradient.iter().map(|g| fp * g).collect(),
    }
}

fn mul1(a: &Jet1, b: &Jet1) -> Jet1 {
    Jet1 {
        value: a.value * b.value,
        gradient: a
            .gradient
            .iter()
            .zip(&b.gradient)
            .map(|(ga, gb)| a.value * gb + b.value * ga)
            .collect(),
    }
}

fn powi1(u: &Jet1, k: i64, span: Span) -> Result<Jet1, ExprError> {
    if k == 0 {
        return Ok(Jet1 {
            value: 1.0,
            gradient: vec![0.0; u.gradient.len()],
        });
    }
    if k < 0 {
        let p = powi1(u, -k, span)?;
        if p.value == 0.0 {
            return Err(err(EvalErrorKind::DivisionByZero, span));
        }
        let r = 1.0 / p.value;
        return Ok(chain1(&p, r, -r * r));
    }
    let mut base = u.clone();
    let mut k = k as u64;
    let mut acc: Option<Jet1> = None;
    loop {
        if k & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => mul1(&a, &base),
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = mul1(&base, &base);
    }
    Ok(acc.expect("nonzero exponent"))
}

pub(super) fn eval1(node: &Node, x: &[f64]) -> Result<Jet1, ExprError> {
    let n = x.len();
    let jet = match &node.kind {
        NodeKind::Constant(c) => Jet1 {
            value: *c,
            gradient: vec![0.0; n],
        },
        NodeKind::Var(i) => {
            let mut gradient = vec![0.0; n];
            gradient[*i] = 1.0;
            Jet1 {
                value: x[*i],
                gradient,
            }
        }
        NodeKind::Neg(a) => {
            let u = eval1(a, x)?;
            chain1(&u, -u.value, -1.0)
        }
        NodeKind::Add(a, b) => {
            let (ua, ub) = (eval1(a, x)?, eval1(b, x)?);
            Jet1 {
                value: ua.value + ub.value,
                gradient: ua
                    .gradient
                    .iter()
                    .zip(&ub.gradient)
                    .map(|(p, q)| p + q)
                    .collect(),
            }
        }
        NodeKind::Sub(a, b) => {
            let (ua, ub) = (eval1(a, x)?, eval1(b, x)?);
            Jet1 {
                value: ua.value - ub.value,
                gradient: ua
                    .gradient
                    .iter()
                    .zip(&ub.gradient)
                    .map(|(p, q)| p - q)
                    .collect(),
            }
        }
        NodeKind::Mul(a, b) => mul1(&eval1(a, x)?, &eval1(b, x)?),
        NodeKind::Div(a, b) => {
            let ub = eval1(b, x)?;
            if ub.value == 0.0 {
                return Err(err(EvalErrorKind::DivisionByZero, node.span));
            }
            let r = 1.0 / ub.value;
            mul1(&eval1(a, x)?, &chain1(&ub, r, -r * r))
        }
        NodeKind::PowInt(a, k) => powi1(&eval1(a, x)?, *k, node.span)?,
        NodeKind::PowReal(a, r) => {
            let u = eval1(a, x)?;
            if u.value <= 0.0 {
                return Err(err(EvalErrorKind::PowNonPositiveBase, node.span));
            }
            chain1(&u, u.value.powf(*r), r * u.value.powf(r - 1.0))
        }
        NodeKind::Call(func, a) => {
            let u = eval1(a, x)?;
            let v = u.value;
            let (f, fp) = match func {
                Func::Sin => (v.sin(), v.cos()),
                Func::Cos => (v.cos(), -v.sin()),
                Func::Tan => {
                    let t = v.tan();
                    (t, 1.0 + t * t)
                }
                Func::Exp => {
                    let e = v.exp();
                    (e, e)
                }
                Func::Log => {
                    if v <= 0.0 {
                        return Err(err(EvalErrorKind::LogNonPositive, node.span));
                    }
                    (v.ln(), 1.0 / v)
                }
                Func::Sqrt => {
                    if v <= 0.0 {
                        return Err(err(EvalErrorKind::SqrtNonPositive, node.span));
                    }
                    let s = v.sqrt();
                    (s, 0.5 / s)
                }
            };
            chain1(&u, f, fp)
        }
    };
    if !jet.value.is_finite() {
        return Err(err(EvalErrorKind::NonFinite, node.span));
    }
    Ok(jet)
}
