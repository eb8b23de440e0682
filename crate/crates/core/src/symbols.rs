//! Fiberwise polynomial symbols on the cotangent bundle.
//!
//! A symbol of degree k is stored as its symmetric all-up component tensor
//! `S^{a_1...a_k}`, read as `S^{a_1...a_k} p_{a_1}...p_{a_k}`.

use crate::error::{Error, Result};
use crate::expr::{Expr, Rat};
use crate::geomdsl::SymbolDecl;
use crate::tensor::{unflatten, Geometry, TensorField, Var};
use std::fmt;

#[derive(Clone, Debug)]
pub struct PolySymbol {
    t: TensorField,
}

impl PolySymbol {
    /// Wrap an all-up tensor; it is symmetrized.
    pub fn new(t: TensorField) -> Result<PolySymbol> {
        if t.vars().iter().any(|v| *v != Var::Up) {
            return Err(Error::MixedVariance);
        }
        let t = if t.rank() > 1 { t.symmetrize_all()? } else { t };
        Ok(PolySymbol { t })
    }

    pub fn zero(n: usize, degree: usize) -> PolySymbol {
        PolySymbol {
            t: TensorField::zeros(n, &vec![Var::Up; degree]),
        }
    }

    pub fn scalar(n: usize, f: Expr) -> PolySymbol {
        PolySymbol {
            t: TensorField::scalar(n, f),
        }
    }

    /// Symbol with components given on sorted index tuples.
    pub fn from_decl(n: usize, decl: &SymbolDecl) -> PolySymbol {
        let k = decl.degree;
        let t = TensorField::from_fn(n, &vec![Var::Up; k], |ix| {
            let mut key = ix.to_vec();
            key.sort_unstable();
            decl.comps.get(&key).cloned().unwrap_or_else(Expr::zero)
        });
        PolySymbol { t }
    }

    /// `sum_i v^i p_i`.
    pub fn vector(v: &[Expr]) -> PolySymbol {
        PolySymbol {
            t: TensorField::from_fn(v.len(), &[Var::Up], |ix| v[ix[0]].clone()),
        }
    }

    pub fn degree(&self) -> usize {
        self.t.rank()
    }

    pub fn dim(&self) -> usize {
        self.t.dim()
    }

    pub fn weight(&self) -> &Rat {
        self.t.weight()
    }

    pub fn with_weight(self, w: Rat) -> PolySymbol {
        PolySymbol {
            t: self.t.with_weight(w),
        }
    }

    pub fn tensor(&self) -> &TensorField {
        &self.t
    }

    pub fn comp(&self, ix: &[usize]) -> &Expr {
        self.t.get(ix)
    }

    pub fn is_zero(&self) -> bool {
        self.t.is_zero()
    }

    pub fn equiv(&self, o: &PolySymbol) -> bool {
        self.degree() == o.degree() && self.t.equiv(&o.t)
    }

    pub fn add(&self, o: &PolySymbol) -> PolySymbol {
        PolySymbol { t: self.t.add(&o.t) }
    }

    pub fn sub(&self, o: &PolySymbol) -> PolySymbol {
        PolySymbol { t: self.t.sub(&o.t) }
    }

    pub fn scale(&self, c: &Rat) -> PolySymbol {
        PolySymbol { t: self.t.scale(c) }
    }

    pub fn mul_expr(&self, f: &Expr) -> PolySymbol {
        PolySymbol { t: self.t.mul_expr(f) }
    }

    /// Pointwise product of polynomials in p; weights add.
    pub fn mul(&self, o: &PolySymbol) -> PolySymbol {
        let t = self.t.outer(&o.t);
        PolySymbol {
            t: if t.rank() > 1 { t.symmetrize_all().expect("all up") } else { t },
        }
    }

    /// `g_{ab} S^{ab...}`.
    pub fn trace(&self, g: &Geometry) -> Result<PolySymbol> {
        if self.degree() < 2 {
            return Err(Error::DegreeTooLow);
        }
        Ok(PolySymbol {
            t: self.t.trace_metric(g, 0, 1)?,
        })
    }

    /// Trace-free part (degree at most 3).
    pub fn tracefree(&self, g: &Geometry) -> Result<PolySymbol> {
        Ok(PolySymbol {
            t: self.t.tracefree_project(g)?,
        })
    }

    /// Coefficient of the monomial with exponent vector `m` in `p`.
    pub fn coefficient(&self, m: &[usize]) -> Expr {
        let k = self.degree();
        assert_eq!(m.iter().sum::<usize>(), k);
        let mut ix = Vec::with_capacity(k);
        let mut mult = factorial(k);
        for (i, &e) in m.iter().enumerate() {
            ix.extend(std::iter::repeat_n(i, e));
            mult /= factorial(e);
        }
        self.t.get(&ix).scale(&Rat::int(mult as i64))
    }

    /// Rendering as a polynomial in `p1..pn`.
    pub fn to_poly_string(&self) -> String {
        let n = self.dim();
        let k = self.degree();
        let mut parts = Vec::new();
        for off in 0..n.pow(k as u32) {
            let ix = unflatten(n, k, off);
            if ix.windows(2).any(|w| w[0] > w[1]) {
                continue;
            }
            let mut m = vec![0; n];
            for &i in &ix {
                m[i] += 1;
            }
            let c = self.coefficient(&m);
            if c.is_zero() {
                continue;
            }
            let mono: Vec<String> = m
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| if e == 1 { format!("p{}", i + 1) } else { format!("p{}^{}", i + 1, e) })
                .collect();
            let mono = mono.join("*");
            parts.push(match (mono.is_empty(), c.is_one()) {
                (true, _) => format!("{c}"),
                (false, true) => mono,
                (false, false) if c.as_rat().is_some() => format!("{c}*{mono}"),
                (false, false) => format!("({c})*{mono}"),
            });
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

impl fmt::Display for PolySymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_poly_string())
    }
}

fn factorial(k: usize) -> usize {
    (1..=k).product()
}

/// `{S1, S2} = (d_{p_i} S1)(d_{x^i} S2) - (d_{p_i} S2)(d_{x^i} S1)`.
pub fn poisson(g: &Geometry, s1: &PolySymbol, s2: &PolySymbol) -> Result<PolySymbol> {
    if !s1.weight().is_zero() || !s2.weight().is_zero() {
        return Err(Error::WeightedOperand);
    }
    let (k, l) = (s1.degree(), s2.degree());
    let n = g.dim();
    if k + l == 0 {
        return Ok(PolySymbol::zero(n, 0));
    }
    let half = |a: &PolySymbol, b: &PolySymbol| -> TensorField {
        // a^{i rest} d_i b^{...}, slots: rest of a, then b
        let ka = a.degree();
        let kb = b.degree();
        let vars = vec![Var::Up; ka + kb - 1];
        if ka == 0 {
            return TensorField::zeros(n, &vars);
        }
        let c = Rat::int(ka as i64);
        TensorField::from_fn(n, &vars, |ix| {
            let mut aix = Vec::with_capacity(ka);
            aix.push(0);
            aix.extend_from_slice(&ix[..ka - 1]);
            let bix = &ix[ka - 1..];
            let mut terms = Vec::new();
            for i in 0..n {
                aix[0] = i;
                let ai = a.comp(&aix);
                if ai.is_zero() {
                    continue;
                }
                let d = b.comp(bix).diff(g.x(i));
                if !d.is_zero() {
                    terms.push(ai * &d);
                }
            }
            Expr::sum(terms.iter()).scale(&c)
        })
    };
    let t1 = half(s1, s2);
    let t2 = half(s2, s1);
    PolySymbol::new(t1.sub(&t2))
}

/// `H = g^{ij} p_i p_j`.
pub fn hamiltonian_symbol(g: &Geometry) -> PolySymbol {
    PolySymbol {
        t: g.inverse_metric().with_weight(Rat::ZERO),
    }
}

/// `nabla^{(a_0} K^{a_1...a_k)}`, all up.
pub fn killing_residual(g: &Geometry, k: &PolySymbol) -> TensorField {
    let d = k.tensor().covariant_derivative(g).raise(g, 0);
    d.symmetrize_all().expect("all up").with_weight(k.weight().clone())
}

/// Killing test, cross-checked against `{H, K} = 2 nabla^{(a_0} K^{a_1...a_k)}`.
pub fn is_killing(g: &Geometry, k: &PolySymbol) -> bool {
    let r = killing_residual(g, k).is_zero();
    if k.weight().is_zero() {
        let b = poisson(g, &hamiltonian_symbol(g), k).map(|p| p.is_zero()).unwrap_or(r);
        debug_assert_eq!(r, b, "Killing residual and bracket disagree");
    }
    r
}

/// Membership in the ideal generated by `H` for degree 2 or 3.
pub fn in_ideal_h(g: &Geometry, s: &PolySymbol) -> Result<bool> {
    match s.degree() {
        0 | 1 => Ok(s.is_zero()),
        2 | 3 => Ok(s.tensor().tracefree_project(g)?.is_zero()),
        d => Err(Error::RankUnsupported(d)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> Geometry {
        Geometry::flat(&["x1", "x2", "x3"])
    }

    #[test]
    fn canonical_bracket() {
        let g = flat();
        let p1 = PolySymbol::vector(&[Expr::one(), Expr::zero(), Expr::zero()]);
        let x1 = PolySymbol::scalar(3, Expr::coord("x1"));
        let b = poisson(&g, &p1, &x1).unwrap();
        assert_eq!(b.degree(), 0);
        assert_eq!(b.comp(&[]), &Expr::one());
        let h = hamiltonian_symbol(&g);
        assert!(poisson(&g, &h, &h).unwrap().is_zero());
        assert_eq!(h.to_poly_string(), "p1^2 + p2^2 + p3^2");
    }

    #[test]
    fn bracket_with_h_is_twice_killing_residual() {
        let g = Geometry::new(
            &["x1".into(), "x2".into(), "x3".into()],
            vec![
                vec![Expr::coord("x2") + Expr::int(2), Expr::zero(), Expr::zero()],
                vec![Expr::zero(), Expr::one(), Expr::coord("x1")],
                vec![Expr::zero(), Expr::coord("x1"), Expr::int(3)],
            ],
        )
        .unwrap();
        let k = PolySymbol::new(TensorField::from_fn(3, &[Var::Up, Var::Up], |ix| {
            Expr::coord("x3") * Expr::int((ix[0] + ix[1]) as i64)
        }))
        .unwrap();
        let b = poisson(&g, &hamiltonian_symbol(&g), &k).unwrap();
        let r = killing_residual(&g, &k).scale(&Rat::int(2));
        assert!(b.tensor().equiv(&r));
    }

    #[test]
    fn ideal_membership() {
        let g = flat();
        let h = hamiltonian_symbol(&g);
        let x = PolySymbol::vector(&[Expr::coord("x2"), Expr::one(), Expr::zero()]);
        assert!(in_ideal_h(&g, &h.mul(&x)).unwrap());
        let tf = PolySymbol::new(TensorField::from_fn(3, &[Var::Up, Var::Up], |ix| {
            Expr::int((ix == [0, 1] || ix == [1, 0]) as i64)
        }))
        .unwrap();
        assert!(!in_ideal_h(&g, &tf).unwrap());
        assert_eq!(tf.to_poly_string(), "2*p1*p2");
    }
}
