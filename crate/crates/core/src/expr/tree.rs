//! Unnormalized expression trees, as produced by the parser.

use super::gen::AtomKind;
use super::numeric::NumericContext;
use super::rat::Rat;
use super::{Expr, ExprError};
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Tree {
    Num(Rat),
    Coord(String),
    /// Abstract function or one of its formal derivatives.
    Func {
        name: String,
        args: Vec<String>,
        alpha: Vec<u8>,
    },
    Add(Vec<Tree>),
    Mul(Vec<Tree>),
    Neg(Box<Tree>),
    Div(Box<Tree>, Box<Tree>),
    Pow(Box<Tree>, Rat),
    Atom(AtomKind, Box<Tree>),
}

impl Tree {
    pub fn normalize(&self) -> Result<Expr, ExprError> {
        Ok(match self {
            Tree::Num(r) => Expr::rat(r.clone()),
            Tree::Coord(n) => Expr::coord(n),
            Tree::Func { name, args, alpha } => {
                let a: Vec<&str> = args.iter().map(String::as_str).collect();
                Expr::derived(name, &a, alpha)
            }
            Tree::Add(v) => {
                let parts = v.iter().map(Tree::normalize).collect::<Result<Vec<_>, _>>()?;
                Expr::sum(parts.iter())
            }
            Tree::Mul(v) => {
                let mut acc = Expr::one();
                for t in v {
                    acc = acc.mul(&t.normalize()?);
                }
                acc
            }
            Tree::Neg(t) => t.normalize()?.neg(),
            Tree::Div(a, b) => a.normalize()?.try_div(&b.normalize()?)?,
            Tree::Pow(b, r) => {
                let base = b.normalize()?;
                pow_rat(&base, r)?
            }
            Tree::Atom(k, a) => {
                let a = a.normalize()?;
                match k {
                    AtomKind::Exp => a.exp()?,
                    AtomKind::Log => a.log()?,
                    AtomKind::Sqrt => a.sqrt()?,
                }
            }
        })
    }

    /// Direct floating-point evaluation without normalizing.
    pub fn eval(&self, ctx: &NumericContext) -> Result<f64, ExprError> {
        let v = match self {
            Tree::Num(r) => r.to_f64(),
            Tree::Coord(_) | Tree::Func { .. } => ctx.eval(&self.normalize()?)?,
            Tree::Add(v) => {
                let mut s = 0.0;
                for t in v {
                    s += t.eval(ctx)?;
                }
                s
            }
            Tree::Mul(v) => {
                let mut s = 1.0;
                for t in v {
                    s *= t.eval(ctx)?;
                }
                s
            }
            Tree::Neg(t) => -t.eval(ctx)?,
            Tree::Div(a, b) => {
                let d = b.eval(ctx)?;
                if d == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                a.eval(ctx)? / d
            }
            Tree::Pow(b, r) => b.eval(ctx)?.powf(r.to_f64()),
            Tree::Atom(k, a) => {
                let x = a.eval(ctx)?;
                match k {
                    AtomKind::Exp => x.exp(),
                    AtomKind::Log => {
                        if x <= 0.0 {
                            return Err(ExprError::GuardViolation(format!("log of {x}")));
                        }
                        x.ln()
                    }
                    AtomKind::Sqrt => {
                        if x < 0.0 {
                            return Err(ExprError::GuardViolation(format!("sqrt of {x}")));
                        }
                        x.sqrt()
                    }
                }
            }
        };
        if !v.is_finite() {
            return Err(ExprError::NonFinite(self.to_string()));
        }
        Ok(v)
    }
}

/// `base^r` for integer `r` or half-integer `r` (via `sqrt`).
pub fn pow_rat(base: &Expr, r: &Rat) -> Result<Expr, ExprError> {
    if r.is_integer() {
        let k: i32 = r
            .numer()
            .try_into()
            .map_err(|_| ExprError::UnsupportedPower(r.to_string()))?;
        return base.pow(k);
    }
    if r.denom() == 2.into() {
        let k: i32 = r
            .numer()
            .try_into()
            .map_err(|_| ExprError::UnsupportedPower(r.to_string()))?;
        return base.sqrt()?.pow(k);
    }
    Err(ExprError::UnsupportedPower(format!("exponent {r}")))
}

fn fmt_args(f: &mut fmt::Formatter<'_>, v: &[Tree], sep: &str) -> fmt::Result {
    write!(f, "(")?;
    for (i, t) in v.iter().enumerate() {
        if i > 0 {
            write!(f, "{sep}")?;
        }
        write!(f, "{t}")?;
    }
    write!(f, ")")
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Num(r) => write!(f, "({r})"),
            Tree::Coord(n) => write!(f, "{n}"),
            Tree::Func { name, args, alpha } => {
                if alpha.iter().all(|&k| k == 0) {
                    write!(f, "{name}({})", args.join(","))
                } else {
                    let a: Vec<String> = alpha.iter().map(|k| k.to_string()).collect();
                    write!(f, "D[{name},({})]({})", a.join(","), args.join(","))
                }
            }
            Tree::Add(v) => fmt_args(f, v, " + "),
            Tree::Mul(v) => fmt_args(f, v, "*"),
            Tree::Neg(t) => write!(f, "(-{t})"),
            Tree::Div(a, b) => write!(f, "({a}/{b})"),
            Tree::Pow(b, r) => write!(f, "({b})^({r})"),
            Tree::Atom(k, a) => write!(f, "{}({a})", k.name()),
        }
    }
}
