//! Lexer and Pratt parser for the expression grammar.
//!
//! Binding powers, tightest first: `^` (right-associative, constant exponent
//! only), unary minus, `*` `/`, `+` `-`. Every token and node carries byte
//! offsets into the source string.

use super::{ExprError, Func, Node, NodeKind, Span, BP_ADD, BP_MUL, BP_NEG, BP_POW};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

#[derive(Debug, Clone)]
struct Lexed {
    tok: Tok,
    start: usize,
    end: usize,
}

fn syntax(offset: usize, message: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        offset,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Lexed>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let tok = match bytes[i] {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let value: f64 = text[start..i]
                    .parse()
                    .map_err(|_| syntax(start, "malformed number literal"))?;
                if !value.is_finite() {
                    return Err(syntax(start, "number literal overflows"));
                }
                Tok::Num(value)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                Tok::Ident(text[start..i].to_string())
            }
            b'+' => {
                i += 1;
                Tok::Plus
            }
            b'-' => {
                i += 1;
                Tok::Minus
            }
            b'*' => {
                i += 1;
                Tok::Star
            }
            b'/' => {
                i += 1;
                Tok::Slash
            }
            b'^' => {
                i += 1;
                Tok::Caret
            }
            b'(' => {
                i += 1;
                Tok::LParen
            }
            b')' => {
                i += 1;
                Tok::RParen
            }
            b',' => {
                i += 1;
                Tok::Comma
            }
            _ => {
                let c = text[start..].chars().next().unwrap();
                return Err(syntax(start, format!("unexpected character `{c}`")));
            }
        };
        out.push(Lexed { tok, start, end: i });
    }
    Ok(out)
}

pub(super) fn parse(text: &str, vars: &[&str]) -> Result<Node, ExprError> {
    let toks = lex(text)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        vars,
        text_len: text.len(),
    };
    let node = parser.expr(0)?;
    if let Some(t) = parser.peek() {
        return Err(syntax(t.start, "unexpected trailing token"));
    }
    Ok(node)
}

struct Parser<'a> {
    toks: Vec<Lexed>,
    pos: usize,
    vars: &'a [&'a str],
    text_len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Lexed> {
        self.toks.get(self.pos)
    }

    fn advance(&mut self) -> Option<Lexed> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect_rparen(&mut self) -> Result<usize, ExprError> {
        match self.advance() {
            Some(Lexed {
                tok: Tok::RParen,
                end,
                ..
            }) => Ok(end),
            Some(t) => Err(syntax(t.start, "expected `)`")),
            None => Err(syntax(self.text_len, "expected `)`")),
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Node, ExprError> {
        let mut lhs = self.atom()?;
        loop {
            let (l_bp, r_bp) = match self.peek() {
                None => break,
                Some(t) => match t.tok {
                    Tok::Plus | Tok::Minus => (BP_ADD, BP_ADD + 1),
                    Tok::Star | Tok::Slash => (BP_MUL, BP_MUL + 1),
                    Tok::Caret => (BP_POW, BP_POW - 1),
                    Tok::RParen | Tok::Comma => break,
                    Tok::Num(_) | Tok::Ident(_) | Tok::LParen => {
                        return Err(syntax(t.start, "expected an operator"));
                    }
                },
            };
            if l_bp < min_bp {
                break;
            }
            let op = self.advance().expect("peeked");
            let rhs = self.expr(r_bp)?;
            let span = Span {
                start: lhs.span.start,
                end: rhs.span.end,
            };
            let kind = match op.tok {
                Tok::Plus => NodeKind::Add(Box::new(lhs), Box::new(rhs)),
                Tok::Minus => NodeKind::Sub(Box::new(lhs), Box::new(rhs)),
                Tok::Star => NodeKind::Mul(Box::new(lhs), Box::new(rhs)),
                Tok::Slash => NodeKind::Div(Box::new(lhs), Box::new(rhs)),
                Tok::Caret => {
                    let value = fold_constant(&rhs)?;
                    if value.fract() == 0.0 && value.abs() <= 9.0e15 {
                        NodeKind::PowInt(Box::new(lhs), value as i64)
                    } else {
                        NodeKind::PowReal(Box::new(lhs), value)
                    }
                }
                _ => unreachable!(),
            };
            lhs = Node { kind, span };
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let t = match self.advance() {
            Some(t) => t,
            None => return Err(syntax(self.text_len, "expected an expression")),
        };
        match t.tok {
            Tok::Num(value) => Ok(Node {
                kind: NodeKind::Constant(value),
                span: Span {
                    start: t.start,
                    end: t.end,
                },
            }),
            Tok::Minus => {
                let operand = self.expr(BP_NEG)?;
                Ok(Node {
                    span: Span {
                        start: t.start,
                        end: operand.span.end,
                    },
                    kind: NodeKind::Neg(Box::new(operand)),
                })
            }
            Tok::LParen => {
                let mut inner = self.expr(0)?;
                let end = self.expect_rparen()?;
                inner.span = Span {
                    start: t.start,
                    end,
                };
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    match self.advance() {
                        Some(Lexed {
                            tok: Tok::LParen, ..
                        }) => {}
                        Some(other) => {
                            return Err(syntax(other.start, "expected `(` after function name"));
                        }
                        None => {
                            return Err(syntax(self.text_len, "expected `(` after function name"));
                        }
                    }
                    let arg = self.expr(0)?;
                    if let Some(Lexed {
                        tok: Tok::Comma,
                        start,
                        ..
                    }) = self.peek()
                    {
                        return Err(syntax(*start, "function takes exactly one argument"));
                    }
                    let end = self.expect_rparen()?;
                    Ok(Node {
                        kind: NodeKind::Call(func, Box::new(arg)),
                        span: Span {
                            start: t.start,
                            end,
                        },
                    })
                } else if let Some(idx) = self.vars.iter().position(|v| *v == name) {
                    Ok(Node {
                        kind: NodeKind::Var(idx),
                        span: Span {
                            start: t.start,
                            end: t.end,
                        },
                    })
                } else {
                    Err(ExprError::UnknownIdentifier {
                        name,
                        offset: t.start,
                    })
                }
            }
            _ => Err(syntax(t.start, "expected an expression")),
        }
    }
}

enum FoldFail {
    NonConst(usize),
    Bad(usize),
}

/// Evaluate a closed subtree to a constant; used only for exponents.
fn fold(node: &Node) -> Result<f64, FoldFail> {
    let value = match &node.kind {
        NodeKind::Constant(c) => *c,
        NodeKind::Var(_) => return Err(FoldFail::NonConst(node.span.start)),
        NodeKind::Neg(a) => -fold(a)?,
        NodeKind::Add(a, b) => fold(a)? + fold(b)?,
        NodeKind::Sub(a, b) => fold(a)? - fold(b)?,
        NodeKind::Mul(a, b) => fold(a)? * fold(b)?,
        NodeKind::Div(a, b) => {
            let den = fold(b)?;
            if den == 0.0 {
                return Err(FoldFail::Bad(node.span.start));
            }
            fold(a)? / den
        }
        NodeKind::PowInt(a, k) => {
            let base = fold(a)?;
            if *k < 0 && base == 0.0 {
                return Err(FoldFail::Bad(node.span.start));
            }
            base.powf(*k as f64)
        }
        NodeKind::PowReal(a, r) => {
            let base = fold(a)?;
            if base <= 0.0 {
                return Err(FoldFail::Bad(node.span.start));
            }
            base.powf(*r)
        }
        NodeKind::Call(func, a) => {
            let x = fold(a)?;
            match func {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => x.tan(),
                Func::Exp => x.exp(),
                Func::Log => {
                    if x <= 0.0 {
                        return Err(FoldFail::Bad(node.span.start));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(FoldFail::Bad(node.span.start));
                    }
                    x.sqrt()
                }
            }
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(FoldFail::Bad(node.span.start))
    }
}

fn fold_constant(node: &Node) -> Result<f64, ExprError> {
    fold(node).map_err(|fail| match fail {
        FoldFail::NonConst(offset) => ExprError::NonConstantExponent { offset },
        FoldFail::Bad(offset) => syntax(offset, "exponent must evaluate to a finite constant"),
    })
}
