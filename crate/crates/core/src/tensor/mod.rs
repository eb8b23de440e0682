//! Dense symbolic tensor fields on a chart.
//!
//! Components are stored row-major with the first slot most significant.
//! Density weights are bookkeeping only: components live in the
//! `|Vol_g|`-trivialization, where the volume density is parallel, so the
//! covariant derivative acts on the component array classically.

mod geometry;

pub use geometry::Geometry;

use crate::error::{Error, Result};
use crate::expr::{Expr, Rat};
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    Up,
    Down,
}

#[derive(Clone, Debug)]
pub struct TensorField {
    n: usize,
    vars: Vec<Var>,
    weight: Rat,
    comps: Vec<Expr>,
}

/// Decode a flat offset into a multi-index.
pub fn unflatten(n: usize, rank: usize, mut off: usize) -> Vec<usize> {
    let mut ix = vec![0; rank];
    for s in (0..rank).rev() {
        ix[s] = off % n;
        off /= n;
    }
    ix
}

fn flatten(n: usize, ix: &[usize]) -> usize {
    ix.iter().fold(0, |acc, &i| acc * n + i)
}

/// All permutations of `0..k` with their signs.
fn permutations(k: usize) -> Vec<(Vec<usize>, i64)> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, sign: i64, out: &mut Vec<(Vec<usize>, i64)>) {
        let k = used.len();
        if cur.len() == k {
            out.push((cur.clone(), sign));
            return;
        }
        for i in 0..k {
            if !used[i] {
                // parity: number of unused elements smaller than i
                let inv = (0..i).filter(|&j| !used[j]).count();
                used[i] = true;
                cur.push(i);
                rec(cur, used, if inv % 2 == 0 { sign } else { -sign }, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], 1, &mut out);
    out
}

impl TensorField {
    pub fn from_fn<F>(n: usize, vars: &[Var], f: F) -> TensorField
    where
        F: Fn(&[usize]) -> Expr + Sync,
    {
        let rank = vars.len();
        let total = n.pow(rank as u32);
        let comps = if total >= 16 {
            (0..total)
                .into_par_iter()
                .map(|o| f(&unflatten(n, rank, o)))
                .collect()
        } else {
            (0..total).map(|o| f(&unflatten(n, rank, o))).collect()
        };
        TensorField {
            n,
            vars: vars.to_vec(),
            weight: Rat::ZERO,
            comps,
        }
    }

    pub fn zeros(n: usize, vars: &[Var]) -> TensorField {
        TensorField {
            n,
            vars: vars.to_vec(),
            weight: Rat::ZERO,
            comps: vec![Expr::zero(); n.pow(vars.len() as u32)],
        }
    }

    pub fn scalar(n: usize, e: Expr) -> TensorField {
        TensorField {
            n,
            vars: Vec::new(),
            weight: Rat::ZERO,
            comps: vec![e],
        }
    }

    pub fn from_components(n: usize, vars: &[Var], comps: Vec<Expr>) -> TensorField {
        assert_eq!(comps.len(), n.pow(vars.len() as u32));
        TensorField {
            n,
            vars: vars.to_vec(),
            weight: Rat::ZERO,
            comps,
        }
    }

    pub fn with_weight(mut self, w: Rat) -> TensorField {
        self.weight = w;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn weight(&self) -> &Rat {
        &self.weight
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    pub fn get(&self, ix: &[usize]) -> &Expr {
        &self.comps[flatten(self.n, ix)]
    }

    pub fn set(&mut self, ix: &[usize], e: Expr) {
        let o = flatten(self.n, ix);
        self.comps[o] = e;
    }

    pub fn as_scalar(&self) -> &Expr {
        assert!(self.vars.is_empty());
        &self.comps[0]
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Expr::is_zero)
    }

    /// Nonzero components with their multi-indices, in index order.
    pub fn nonzero(&self) -> Vec<(Vec<usize>, &Expr)> {
        self.comps
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.is_zero())
            .map(|(o, e)| (unflatten(self.n, self.rank(), o), e))
            .collect()
    }

    pub fn map<F: Fn(&Expr) -> Expr + Sync + Send>(&self, f: F) -> TensorField {
        let comps = self.comps.par_iter().map(f).collect();
        TensorField {
            comps,
            ..self.clone_meta()
        }
    }

    pub fn try_map<F: Fn(&Expr) -> std::result::Result<Expr, E> + Sync + Send, E: Send>(
        &self,
        f: F,
    ) -> std::result::Result<TensorField, E> {
        let comps = self.comps.par_iter().map(f).collect::<std::result::Result<Vec<_>, E>>()?;
        Ok(TensorField {
            comps,
            ..self.clone_meta()
        })
    }

    fn clone_meta(&self) -> TensorField {
        TensorField {
            n: self.n,
            vars: self.vars.clone(),
            weight: self.weight.clone(),
            comps: Vec::new(),
        }
    }

    fn check_shape(&self, o: &TensorField) {
        assert_eq!(self.n, o.n, "dimension mismatch");
        assert_eq!(self.vars, o.vars, "variance mismatch");
    }

    pub fn add(&self, o: &TensorField) -> TensorField {
        self.check_shape(o);
        let comps = self.comps.par_iter().zip(&o.comps).map(|(a, b)| a + b).collect();
        TensorField {
            comps,
            ..self.clone_meta()
        }
    }

    pub fn sub(&self, o: &TensorField) -> TensorField {
        self.check_shape(o);
        let comps = self.comps.par_iter().zip(&o.comps).map(|(a, b)| a - b).collect();
        TensorField {
            comps,
            ..self.clone_meta()
        }
    }

    pub fn scale(&self, c: &Rat) -> TensorField {
        self.map(|e| e.scale(c))
    }

    pub fn mul_expr(&self, f: &Expr) -> TensorField {
        self.map(|e| e * f)
    }

    pub fn neg(&self) -> TensorField {
        self.map(Expr::neg)
    }

    /// Tensor product; slots of `self` come first, weights add.
    pub fn outer(&self, o: &TensorField) -> TensorField {
        assert_eq!(self.n, o.n);
        let mut vars = self.vars.clone();
        vars.extend_from_slice(&o.vars);
        let r = self.rank();
        let mut t = TensorField::from_fn(self.n, &vars, |ix| {
            let a = self.get(&ix[..r]);
            if a.is_zero() {
                return Expr::zero();
            }
            a * o.get(&ix[r..])
        });
        t.weight = &self.weight + &o.weight;
        t
    }

    /// Reorder slots: slot `k` of the result is slot `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> TensorField {
        assert_eq!(perm.len(), self.rank());
        let vars: Vec<Var> = perm.iter().map(|&p| self.vars[p]).collect();
        let mut t = TensorField::from_fn(self.n, &vars, |ix| {
            let mut src = vec![0; ix.len()];
            for (k, &p) in perm.iter().enumerate() {
                src[p] = ix[k];
            }
            self.get(&src).clone()
        });
        t.weight = self.weight.clone();
        t
    }

    /// Contract an upper and a lower slot.
    pub fn contract(&self, a: usize, b: usize) -> Result<TensorField> {
        if self.vars[a] == self.vars[b] {
            return Err(Error::MixedVariance);
        }
        Ok(self.contract_raw(a, b))
    }

    fn contract_raw(&self, a: usize, b: usize) -> TensorField {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let vars: Vec<Var> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != a && *i != b)
            .map(|(_, v)| *v)
            .collect();
        let mut t = TensorField::from_fn(self.n, &vars, |ix| {
            let mut full = Vec::with_capacity(ix.len() + 2);
            let mut it = ix.iter();
            for s in 0..self.rank() {
                if s == a || s == b {
                    full.push(0);
                } else {
                    full.push(*it.next().unwrap());
                }
            }
            let terms: Vec<Expr> = (0..self.n)
                .map(|m| {
                    full[a] = m;
                    full[b] = m;
                    self.get(&full).clone()
                })
                .collect();
            Expr::sum(terms.iter())
        });
        t.weight = self.weight.clone();
        t
    }

    /// Metric trace over two slots of equal variance.
    pub fn trace_metric(&self, geom: &Geometry, a: usize, b: usize) -> Result<TensorField> {
        if self.vars[a] != self.vars[b] {
            return Err(Error::MixedVariance);
        }
        let raised = if self.vars[a] == Var::Up {
            self.lower(geom, a)
        } else {
            self.raise(geom, a)
        };
        Ok(raised.contract_raw(a, b))
    }

    /// Raise slot `s` with `g^{ab}`; weight gains `2/n`.
    pub fn raise(&self, geom: &Geometry, s: usize) -> TensorField {
        assert_eq!(self.vars[s], Var::Down, "slot already up");
        self.index_op(s, Var::Up, |i, j| geom.ginv(i, j), Rat::new(2, self.n as i64))
    }

    /// Lower slot `s` with `g_{ab}`; weight loses `2/n`.
    pub fn lower(&self, geom: &Geometry, s: usize) -> TensorField {
        assert_eq!(self.vars[s], Var::Up, "slot already down");
        self.index_op(s, Var::Down, |i, j| geom.g(i, j), Rat::new(-2, self.n as i64))
    }

    fn index_op<'a, F>(&self, s: usize, v: Var, m: F, dw: Rat) -> TensorField
    where
        F: Fn(usize, usize) -> &'a Expr + Sync,
    {
        let mut vars = self.vars.clone();
        vars[s] = v;
        let mut t = TensorField::from_fn(self.n, &vars, |ix| {
            let mut src = ix.to_vec();
            let mut terms = Vec::new();
            for k in 0..self.n {
                let c = m(ix[s], k);
                if c.is_zero() {
                    continue;
                }
                src[s] = k;
                let e = self.get(&src);
                if !e.is_zero() {
                    terms.push(c * e);
                }
            }
            Expr::sum(terms.iter())
        });
        t.weight = &self.weight + &dw;
        t
    }

    /// Lower every upper slot.
    pub fn lower_all(&self, geom: &Geometry) -> TensorField {
        let mut t = self.clone();
        for s in 0..self.rank() {
            if t.vars[s] == Var::Up {
                t = t.lower(geom, s);
            }
        }
        t
    }

    /// Raise every lower slot.
    pub fn raise_all(&self, geom: &Geometry) -> TensorField {
        let mut t = self.clone();
        for s in 0..self.rank() {
            if t.vars[s] == Var::Down {
                t = t.raise(geom, s);
            }
        }
        t
    }

    fn perm_average(&self, slots: &[usize], signed: bool) -> Result<TensorField> {
        if slots.iter().any(|&s| self.vars[s] != self.vars[slots[0]]) {
            return Err(Error::MixedVariance);
        }
        let perms = permutations(slots.len());
        let k = Rat::new(1, perms.len() as i64);
        let mut t = TensorField::from_fn(self.n, &self.vars, |ix| {
            let mut src = ix.to_vec();
            let mut terms = Vec::with_capacity(perms.len());
            for (p, sign) in &perms {
                for (j, &pj) in p.iter().enumerate() {
                    src[slots[j]] = ix[slots[pj]];
                }
                let e = self.get(&src);
                if e.is_zero() {
                    continue;
                }
                terms.push(if signed && *sign < 0 { -e } else { e.clone() });
            }
            Expr::sum(terms.iter()).scale(&k)
        });
        t.weight = self.weight.clone();
        Ok(t)
    }

    pub fn symmetrize(&self, slots: &[usize]) -> Result<TensorField> {
        self.perm_average(slots, false)
    }

    pub fn antisymmetrize(&self, slots: &[usize]) -> Result<TensorField> {
        self.perm_average(slots, true)
    }

    pub fn symmetrize_all(&self) -> Result<TensorField> {
        let s: Vec<usize> = (0..self.rank()).collect();
        self.symmetrize(&s)
    }

    /// Levi-Civita covariant derivative; the new lower slot comes first.
    pub fn covariant_derivative(&self, geom: &Geometry) -> TensorField {
        let n = self.n;
        let gam = geom.christoffel();
        let mut vars = vec![Var::Down];
        vars.extend_from_slice(&self.vars);
        let rank = self.rank();
        let mut t = TensorField::from_fn(n, &vars, |ix| {
            let i = ix[0];
            let rest = &ix[1..];
            let mut terms = vec![self.get(rest).diff(geom.x(i))];
            let mut src = rest.to_vec();
            for s in 0..rank {
                let a = rest[s];
                for m in 0..n {
                    let (coef, neg) = match self.vars[s] {
                        Var::Up => (gam.get(&[a, i, m]), false),
                        Var::Down => (gam.get(&[m, i, a]), true),
                    };
                    if coef.is_zero() {
                        continue;
                    }
                    src[s] = m;
                    let e = self.get(&src);
                    if !e.is_zero() {
                        let p = coef * e;
                        terms.push(if neg { -p } else { p });
                    }
                }
                src[s] = a;
            }
            Expr::sum(terms.iter())
        });
        t.weight = self.weight.clone();
        t
    }

    /// Trace-free part `Pi_0` of a symmetric tensor of rank at most 3 whose
    /// slots are all up or all down.
    pub fn tracefree_project(&self, geom: &Geometry) -> Result<TensorField> {
        let r = self.rank();
        if r > 3 {
            return Err(Error::RankUnsupported(r));
        }
        if r < 2 {
            return Ok(self.clone());
        }
        if self.vars.iter().any(|v| *v != self.vars[0]) {
            return Err(Error::MixedVariance);
        }
        let n = self.n as i64;
        let up = self.vars[0] == Var::Up;
        let gm = |i: usize, j: usize| if up { geom.ginv(i, j) } else { geom.g(i, j) };
        let tr = self.trace_metric(geom, 0, 1)?;
        let mut out = if r == 2 {
            let c = tr.as_scalar().scale(&Rat::new(1, n));
            TensorField::from_fn(self.n, &self.vars, |ix| self.get(ix) - gm(ix[0], ix[1]) * &c)
        } else {
            // S - 3/(n+2) g^{(ab} T^{c)} = S - 1/(n+2) (g^{ab}T^c + g^{ac}T^b + g^{bc}T^a)
            let k = Rat::new(1, n + 2);
            TensorField::from_fn(self.n, &self.vars, |ix| {
                let (a, b, c) = (ix[0], ix[1], ix[2]);
                let s = Expr::sum(
                    [
                        gm(a, b) * tr.get(&[c]),
                        gm(a, c) * tr.get(&[b]),
                        gm(b, c) * tr.get(&[a]),
                    ]
                    .iter(),
                );
                self.get(ix) - s.scale(&k)
            })
        };
        out.weight = self.weight.clone();
        Ok(out)
    }

    /// Components of `self - o` all normalize to zero.
    pub fn equiv(&self, o: &TensorField) -> bool {
        self.n == o.n
            && self.vars == o.vars
            && self.comps.par_iter().zip(&o.comps).all(|(a, b)| a.equiv(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat3() -> Geometry {
        Geometry::flat(&["tx1", "tx2", "tx3"])
    }

    fn vec3(n: usize, up: bool, v: [i64; 3]) -> TensorField {
        let var = if up { Var::Up } else { Var::Down };
        TensorField::from_fn(n, &[var], |ix| Expr::int(v[ix[0]]))
    }

    #[test]
    fn antisymmetrized_outer_product() {
        let v = vec3(3, true, [1, 0, 0]);
        let w = vec3(3, true, [0, 1, 0]);
        let a = v.outer(&w).antisymmetrize(&[0, 1]).unwrap();
        assert_eq!(a.get(&[0, 1]), &Expr::frac(1, 2));
        assert_eq!(a.get(&[1, 0]), &Expr::frac(-1, 2));
        let s = v.outer(&w).symmetrize(&[0, 1]).unwrap();
        assert!(s.antisymmetrize(&[0, 1]).unwrap().is_zero());
    }

    #[test]
    fn tracefree_of_metric_vanishes() {
        let g = flat3();
        assert!(g.inverse_metric().tracefree_project(&g).unwrap().is_zero());
        let v = vec3(3, true, [1, 0, 0]);
        let w = vec3(3, true, [0, 1, 0]);
        let s = v.outer(&w).symmetrize(&[0, 1]).unwrap();
        assert!(s.tracefree_project(&g).unwrap().equiv(&s));
    }

    #[test]
    fn raise_lower_round_trip() {
        let g = Geometry::new(
            &["px".into(), "py".into(), "pz".into()],
            vec![
                vec![Expr::int(1), Expr::zero(), Expr::zero()],
                vec![Expr::zero(), Expr::coord("px") * Expr::coord("px"), Expr::zero()],
                vec![Expr::zero(), Expr::zero(), Expr::one()],
            ],
        )
        .unwrap();
        let t = TensorField::from_fn(3, &[Var::Down, Var::Up], |ix| {
            Expr::coord("py") * Expr::int((ix[0] + 2 * ix[1]) as i64)
        });
        let r = t.raise(&g, 0).lower(&g, 0);
        assert!(r.equiv(&t));
        assert_eq!(r.weight(), &Rat::ZERO);
        assert!(g.metric().covariant_derivative(&g).is_zero());
    }

    #[test]
    fn mixed_variance_rejected() {
        let t = TensorField::zeros(3, &[Var::Up, Var::Down]);
        assert_eq!(t.symmetrize(&[0, 1]).unwrap_err(), Error::MixedVariance);
    }
}
