//! Sparse multivariate (Laurent in `exp` generators) polynomials over the rationals.

use super::gen::{self, is_laurent, GenId};
use super::rat::Rat;
use smallvec::SmallVec;
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

/// Exponent vector, sorted by generator id, zero exponents absent.
pub type Mono = SmallVec<[(GenId, i32); 4]>;

/// Lexicographic order with smaller generator ids more significant.
pub fn mono_cmp(a: &[(GenId, i32)], b: &[(GenId, i32)]) -> Ordering {
    let (mut i, mut j) = (0, 0);
    loop {
        match (a.get(i), b.get(j)) {
            (None, None) => return Ordering::Equal,
            (Some(&(_, ea)), None) => return ea.cmp(&0),
            (None, Some(&(_, eb))) => return 0.cmp(&eb),
            (Some(&(ga, ea)), Some(&(gb, eb))) => {
                if ga == gb {
                    if ea != eb {
                        return ea.cmp(&eb);
                    }
                    i += 1;
                    j += 1;
                } else if ga < gb {
                    return ea.cmp(&0);
                } else {
                    return 0.cmp(&eb);
                }
            }
        }
    }
}

pub fn mono_mul(a: &[(GenId, i32)], b: &[(GenId, i32)]) -> Mono {
    let mut out = Mono::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let (ga, ea) = a[i];
        let (gb, eb) = b[j];
        if ga == gb {
            let e = ea + eb;
            if e != 0 {
                out.push((ga, e));
            }
            i += 1;
            j += 1;
        } else if ga < gb {
            out.push((ga, ea));
            i += 1;
        } else {
            out.push((gb, eb));
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// `a / b`, or `None` if a polynomial generator would get a negative exponent.
pub fn mono_div(a: &[(GenId, i32)], b: &[(GenId, i32)]) -> Option<Mono> {
    let neg: Mono = b.iter().map(|&(g, e)| (g, -e)).collect();
    let q = mono_mul(a, &neg);
    if q.iter().any(|&(g, e)| e < 0 && !is_laurent(g)) {
        None
    } else {
        Some(q)
    }
}

#[derive(Clone, PartialEq, Eq)]
struct Key(Mono);
impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Key) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Key {
    fn cmp(&self, o: &Key) -> Ordering {
        mono_cmp(&self.0, &o.0)
    }
}

/// Terms sorted by [`mono_cmp`], leading (largest) term first; no zero coefficients.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Poly {
    pub(crate) terms: Vec<(Mono, Rat)>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly { terms: Vec::new() }
    }

    pub fn constant(c: Rat) -> Poly {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly {
                terms: vec![(Mono::new(), c)],
            }
        }
    }

    pub fn one() -> Poly {
        Poly::constant(Rat::ONE)
    }

    pub fn gen(g: GenId, e: i32) -> Poly {
        if e == 0 {
            return Poly::one();
        }
        let mut m = Mono::new();
        m.push((g, e));
        Poly {
            terms: vec![(m, Rat::ONE)],
        }
    }

    pub fn monomial(m: Mono, c: Rat) -> Poly {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly { terms: vec![(m, c)] }
        }
    }

    pub fn terms(&self) -> &[(Mono, Rat)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<Rat> {
        match self.terms.as_slice() {
            [] => Some(Rat::ZERO),
            [(m, c)] if m.is_empty() => Some(c.clone()),
            _ => None,
        }
    }

    /// Single generator with exponent one and unit coefficient.
    pub fn as_single_gen(&self) -> Option<GenId> {
        match self.terms.as_slice() {
            [(m, c)] if m.len() == 1 && m[0].1 == 1 && c.is_one() => Some(m[0].0),
            _ => None,
        }
    }

    fn from_unsorted(mut v: Vec<(Mono, Rat)>) -> Poly {
        v.sort_unstable_by(|a, b| mono_cmp(&b.0, &a.0));
        let mut out: Vec<(Mono, Rat)> = Vec::with_capacity(v.len());
        for (m, c) in v {
            if let Some(last) = out.last_mut() {
                if last.0 == m {
                    last.1 = &last.1 + &c;
                    continue;
                }
            }
            out.push((m, c));
        }
        out.retain(|t| !t.1.is_zero());
        Poly { terms: out }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        self.merge(o, false)
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.merge(o, true)
    }

    fn merge(&self, o: &Poly, negate: bool) -> Poly {
        if o.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return if negate { o.neg() } else { o.clone() };
        }
        let a = &self.terms;
        let b = &o.terms;
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match mono_cmp(&a[i].0, &b[j].0) {
                Ordering::Greater => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    let c = if negate { -b[j].1.clone() } else { b[j].1.clone() };
                    out.push((b[j].0.clone(), c));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = if negate { &a[i].1 - &b[j].1 } else { &a[i].1 + &b[j].1 };
                    if !c.is_zero() {
                        out.push((a[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        for t in &b[j..] {
            let c = if negate { -t.1.clone() } else { t.1.clone() };
            out.push((t.0.clone(), c));
        }
        Poly { terms: out }
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        if c.is_one() {
            return self.clone();
        }
        Poly {
            terms: self.terms.iter().map(|(m, d)| (m.clone(), d * c)).collect(),
        }
    }

    /// Multiplication by a monomial preserves the term order.
    pub fn mul_mono(&self, m: &[(GenId, i32)], c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(n, d)| (mono_mul(n, m), d * c))
                .collect(),
        }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let (small, big) = if self.len() <= o.len() { (self, o) } else { (o, self) };
        if small.len() == 1 {
            let (m, c) = &small.terms[0];
            return big.mul_mono(m, c);
        }
        if small.len() * big.len() < 64 {
            let mut v = Vec::with_capacity(small.len() * big.len());
            for (ma, ca) in &small.terms {
                for (mb, cb) in &big.terms {
                    v.push((mono_mul(ma, mb), ca * cb));
                }
            }
            return Poly::from_unsorted(v);
        }
        let mut acc: HashMap<Mono, Rat> = HashMap::with_capacity(small.len() * big.len());
        for (ma, ca) in &small.terms {
            for (mb, cb) in &big.terms {
                let m = mono_mul(ma, mb);
                let c = ca * cb;
                match acc.get_mut(&m) {
                    Some(x) => *x = &*x + &c,
                    None => {
                        acc.insert(m, c);
                    }
                }
            }
        }
        Poly::from_unsorted(acc.into_iter().filter(|t| !t.1.is_zero()).collect())
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one();
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Minimum and maximum exponent of every generator that appears.
    fn exponent_box(&self) -> HashMap<GenId, (i32, i32)> {
        let mut bx: HashMap<GenId, (i32, i32)> = HashMap::new();
        let nterms = self.terms.len();
        let mut seen: HashMap<GenId, usize> = HashMap::new();
        for (m, _) in &self.terms {
            for &(g, e) in m.iter() {
                let b = bx.entry(g).or_insert((e, e));
                b.0 = b.0.min(e);
                b.1 = b.1.max(e);
                *seen.entry(g).or_insert(0) += 1;
            }
        }
        for (g, k) in seen {
            if k < nterms {
                let b = bx.get_mut(&g).unwrap();
                b.0 = b.0.min(0);
                b.1 = b.1.max(0);
            }
        }
        bx
    }

    /// Exact quotient `self / d`, or `None` if `d` does not divide `self`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = d.as_constant() {
            return Some(self.scale(&c.recip()));
        }
        let (ld, lc) = &d.terms[0];
        let (td, _) = d.terms.last().unwrap();
        // cheap necessary conditions on leading and trailing terms
        mono_div(&self.terms[0].0, ld)?;
        mono_div(&self.terms.last().unwrap().0, td)?;
        let nbox = self.exponent_box();
        let dbox = d.exponent_box();
        for (g, (_, dmax)) in &dbox {
            match nbox.get(g) {
                None if !is_laurent(*g) && *dmax > 0 => return None,
                Some((_, nmax)) if !is_laurent(*g) && nmax < dmax => return None,
                _ => {}
            }
        }
        let mut qbox: HashMap<GenId, (i32, i32)> = HashMap::new();
        for (g, (nmin, nmax)) in &nbox {
            let (dmin, dmax) = dbox.get(g).copied().unwrap_or((0, 0));
            qbox.insert(*g, (nmin - dmax, nmax - dmin));
        }
        let inv_lc = lc.recip();
        let mut rem: BTreeMap<Key, Rat> = self
            .terms
            .iter()
            .map(|(m, c)| (Key(m.clone()), c.clone()))
            .collect();
        let mut q: Vec<(Mono, Rat)> = Vec::new();
        while let Some((Key(m), c)) = rem.pop_last() {
            let qm = mono_div(&m, ld)?;
            for &(g, e) in qm.iter() {
                match qbox.get(&g) {
                    Some(&(lo, hi)) if e >= lo && e <= hi => {}
                    _ => return None,
                }
            }
            let qc = &c * &inv_lc;
            for (dm, dc) in d.terms.iter().skip(1) {
                let k = Key(mono_mul(&qm, dm));
                let delta = &qc * dc;
                match rem.get_mut(&k) {
                    Some(x) => {
                        let nx = &*x - &delta;
                        if nx.is_zero() {
                            rem.remove(&k);
                        } else {
                            *x = nx;
                        }
                    }
                    None => {
                        rem.insert(k, -delta);
                    }
                }
            }
            q.push((qm, qc));
        }
        Some(Poly { terms: q })
    }

    /// Formal partial derivative with respect to generator `g`.
    pub fn partial(&self, g: GenId) -> Poly {
        let mut v = Vec::new();
        for (m, c) in &self.terms {
            if let Some(pos) = m.iter().position(|&(h, _)| h == g) {
                let e = m[pos].1;
                let mut nm = m.clone();
                if e == 1 {
                    nm.remove(pos);
                } else {
                    nm[pos].1 = e - 1;
                }
                v.push((nm, c * &Rat::int(e as i64)));
            }
        }
        // removing or lowering one generator can reorder terms
        Poly::from_unsorted(v)
    }

    /// Generators present, ascending.
    pub fn gens(&self) -> Vec<GenId> {
        let mut v: Vec<GenId> = self
            .terms
            .iter()
            .flat_map(|(m, _)| m.iter().map(|&(g, _)| g))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Rational content (positive) of the coefficients.
    pub fn content(&self) -> Rat {
        Rat::content(self.terms.iter().map(|(_, c)| c))
    }

    /// Componentwise minimum exponent over all terms (zero for absent generators).
    pub fn mono_content(&self) -> Mono {
        let mut it = self.terms.iter();
        let Some((first, _)) = it.next() else {
            return Mono::new();
        };
        let mut acc: Mono = first.clone();
        for (m, _) in it {
            let mut next = Mono::new();
            let (mut i, mut j) = (0, 0);
            while i < acc.len() || j < m.len() {
                let a = acc.get(i).copied();
                let b = m.get(j).copied();
                match (a, b) {
                    (Some((ga, ea)), Some((gb, eb))) if ga == gb => {
                        let e = ea.min(eb);
                        if e != 0 {
                            next.push((ga, e));
                        }
                        i += 1;
                        j += 1;
                    }
                    (Some((ga, ea)), Some((gb, _))) if ga < gb => {
                        if ea < 0 {
                            next.push((ga, ea));
                        }
                        i += 1;
                    }
                    (Some((ga, ea)), None) => {
                        if ea < 0 {
                            next.push((ga, ea));
                        }
                        i += 1;
                    }
                    (_, Some((gb, eb))) => {
                        if eb < 0 {
                            next.push((gb, eb));
                        }
                        j += 1;
                    }
                    (None, None) => unreachable!(),
                }
            }
            acc = next;
        }
        acc
    }

    /// Evaluate with a generator valuation (generator, exponent) -> value.
    pub fn eval_with<F: FnMut(GenId, i32) -> f64>(&self, mut val: F) -> f64 {
        let mut s = 0.0;
        for (m, c) in &self.terms {
            let mut t = c.to_f64();
            for &(g, e) in m.iter() {
                t *= val(g, e);
            }
            s += t;
        }
        s
    }

    /// Structural print key of a monomial (generator keys, then exponents).
    pub(crate) fn mono_sort_key(m: &[(GenId, i32)]) -> Vec<(&'static str, i32)> {
        let mut v: Vec<(&'static str, i32)> = m
            .iter()
            .map(|&(g, e)| (gen::info(g).sort_key.as_str(), e))
            .collect();
        v.sort();
        v
    }
}

impl std::fmt::Debug for Poly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&super::print::poly_to_string(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Poly {
        Poly::gen(gen::coord(&format!("px{i}")), 1)
    }

    #[test]
    fn square_expansion() {
        let s = x(1).add(&x(2));
        let sq = s.mul(&s);
        let expect = x(1)
            .mul(&x(1))
            .add(&x(1).mul(&x(2)).scale(&Rat::int(2)))
            .add(&x(2).mul(&x(2)));
        assert_eq!(sq, expect);
    }

    #[test]
    fn exact_division() {
        let a = x(1).add(&x(2));
        let b = x(1).sub(&x(3)).add(&Poly::constant(Rat::int(5)));
        let p = a.mul(&b).mul(&a);
        assert_eq!(p.div_exact(&a).unwrap(), a.mul(&b));
        assert!(p.div_exact(&x(3)).is_none());
        assert!(b.div_exact(&a).is_none());
    }

    #[test]
    fn partial_derivative() {
        let g = gen::coord("px1");
        let p = x(1).mul(&x(1)).mul(&x(2)).add(&x(1));
        let d = p.partial(g);
        assert_eq!(d, x(1).mul(&x(2)).scale(&Rat::int(2)).add(&Poly::one()));
    }
}
