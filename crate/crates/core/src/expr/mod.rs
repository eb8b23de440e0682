//! Exact symbolic scalars.
//!
//! An [`Expr`] is stored canonically as `N / prod f_i^e_i` where `N` is a
//! sparse polynomial over interned generators and the `f_i` are interned
//! primitive polynomials (see [`factor`]). Construction always reduces, so
//! `is_zero` is a test on the numerator alone.

pub mod factor;
pub mod gen;
pub mod numeric;
pub mod poly;
mod print;
pub mod rat;
pub mod tree;

pub use gen::{AtomKind, GenId, GenKind};
pub use numeric::NumericContext;
pub use poly::{Mono, Poly};
pub use rat::Rat;
pub use tree::Tree;

use factor::{Den, FactorId};
use gen::{is_laurent, tag, EXP_DENOM, TAG_SQRT};
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, LazyLock, RwLock};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("guard violation: {0}")]
    GuardViolation(String),
    #[error("inconsistent binding: {0}")]
    InconsistentBinding(String),
    #[error("missing realization for {0}")]
    MissingRealization(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("unsupported power: {0}")]
    UnsupportedPower(String),
    #[error("division by zero")]
    DivisionByZero,
}

struct Inner {
    num: Poly,
    den: Den,
    hash: u64,
}

/// Immutable, cheaply clonable canonical rational expression.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

impl PartialEq for Expr {
    fn eq(&self, o: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &o.0)
            || (self.0.hash == o.0.hash && self.0.den == o.0.den && self.0.num == o.0.num)
    }
}
impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash.hash(state);
    }
}

fn fx_hash(num: &Poly, den: &Den) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    num.hash(&mut h);
    den.hash(&mut h);
    h.finish()
}

static ZERO: LazyLock<Expr> = LazyLock::new(|| Expr::raw(Poly::zero(), Den::new()));
static ONE: LazyLock<Expr> = LazyLock::new(|| Expr::raw(Poly::one(), Den::new()));

type DiffCache = RwLock<HashMap<(GenId, GenId), Expr>>;
static GEN_DIFF: LazyLock<DiffCache> = LazyLock::new(Default::default);
static FACTOR_DIFF: LazyLock<RwLock<HashMap<(FactorId, GenId), Expr>>> =
    LazyLock::new(Default::default);

fn factor_poly(f: FactorId) -> &'static Poly {
    &factor::info(f).poly
}

impl Expr {
    fn raw(num: Poly, den: Den) -> Expr {
        let hash = fx_hash(&num, &den);
        Expr(Arc::new(Inner { num, den, hash }))
    }

    pub fn zero() -> Expr {
        ZERO.clone()
    }

    pub fn one() -> Expr {
        ONE.clone()
    }

    pub fn int(n: i64) -> Expr {
        Expr::rat(Rat::int(n))
    }

    pub fn rat(r: Rat) -> Expr {
        Expr::raw(Poly::constant(r), Den::new())
    }

    pub fn frac(n: i64, d: i64) -> Expr {
        Expr::rat(Rat::new(n, d))
    }

    pub fn from_poly(p: Poly) -> Expr {
        Expr::build(p, Den::new())
    }

    pub fn from_gen(g: GenId) -> Expr {
        Expr::build(Poly::gen(g, 1), Den::new())
    }

    pub fn coord(name: &str) -> Expr {
        Expr::from_gen(gen::coord(name))
    }

    /// Abstract function `name(args)` where the arguments are coordinate names.
    pub fn func(name: &str, args: &[&str]) -> Expr {
        Expr::derived(name, args, &vec![0; args.len()])
    }

    /// Formal derivative `D[name,(alpha)](args)`.
    pub fn derived(name: &str, args: &[&str], alpha: &[u8]) -> Expr {
        assert_eq!(args.len(), alpha.len());
        let ids: Vec<GenId> = args.iter().map(|a| gen::coord(a)).collect();
        Expr::from_gen(gen::func(name, &ids, alpha))
    }

    pub fn numer(&self) -> &Poly {
        &self.0.num
    }

    pub fn den_factors(&self) -> &[(FactorId, u32)] {
        &self.0.den
    }

    pub fn is_zero(&self) -> bool {
        self.0.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.den.is_empty() && self.0.num.as_constant().is_some_and(|c| c.is_one())
    }

    pub fn as_rat(&self) -> Option<Rat> {
        if self.0.den.is_empty() {
            self.0.num.as_constant()
        } else {
            None
        }
    }

    pub fn as_poly(&self) -> Option<&Poly> {
        if self.0.den.is_empty() {
            Some(&self.0.num)
        } else {
            None
        }
    }

    /// Mathematical equality (difference normalizes to zero).
    pub fn equiv(&self, o: &Expr) -> bool {
        self == o || self.sub(o).is_zero()
    }

    /// Top-level generators of numerator and denominator.
    pub fn gens(&self) -> Vec<GenId> {
        let mut v = self.0.num.gens();
        for &(f, _) in self.0.den.iter() {
            v.extend(factor::info(f).gens.iter().copied());
        }
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Whether the expression depends on coordinate `x` (through any generator).
    pub fn depends_on(&self, x: GenId) -> bool {
        self.gens().into_iter().any(|g| gen_depends_on(g, x))
    }

    /// Canonicalize `num / den`.
    fn build(num: Poly, den: Den) -> Expr {
        if num.is_zero() {
            return Expr::zero();
        }
        if let Some(e) = rewrite_sqrt_num(&num, &den) {
            return e;
        }
        let mut num = num;
        let mut den = den;
        for entry in den.iter_mut() {
            let f = factor::info(entry.0);
            if let Some(g) = f.single_gen {
                if is_laurent(g) {
                    continue;
                }
                let mc = num.mono_content();
                let have = mc.iter().find(|(h, _)| *h == g).map(|t| t.1).unwrap_or(0);
                let k = (have.max(0) as u32).min(entry.1);
                if k > 0 {
                    let mut m = Mono::new();
                    m.push((g, -(k as i32)));
                    num = num.mul_mono(&m, &Rat::ONE);
                    entry.1 -= k;
                }
                continue;
            }
            let ngens = num.gens();
            if !f
                .gens
                .iter()
                .all(|g| is_laurent(*g) || ngens.binary_search(g).is_ok())
            {
                continue;
            }
            while entry.1 > 0 {
                match num.div_exact(&f.poly) {
                    Some(q) => {
                        num = q;
                        entry.1 -= 1;
                    }
                    None => break,
                }
            }
        }
        den.retain(|e| e.1 > 0);
        if let Some(e) = rewrite_sqrt_den(&num, &den) {
            return e;
        }
        Expr::raw(num, den)
    }

    fn den_poly(den: &[(FactorId, u32)]) -> Poly {
        let mut p = Poly::one();
        for &(f, e) in den {
            p = p.mul(&factor_poly(f).pow(e));
        }
        p
    }

    pub fn neg(&self) -> Expr {
        Expr::raw(self.0.num.neg(), self.0.den.clone())
    }

    pub fn scale(&self, c: &Rat) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr::raw(self.0.num.scale(c), self.0.den.clone())
    }

    pub fn add(&self, o: &Expr) -> Expr {
        self.combine(o, false)
    }

    pub fn sub(&self, o: &Expr) -> Expr {
        self.combine(o, true)
    }

    fn combine(&self, o: &Expr, negate: bool) -> Expr {
        if o.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return if negate { o.neg() } else { o.clone() };
        }
        let (a, b) = (&self.0, &o.0);
        if a.den == b.den {
            let num = if negate { a.num.sub(&b.num) } else { a.num.add(&b.num) };
            return Expr::build(num, a.den.clone());
        }
        let mut l: Den = Den::new();
        let (mut ma, mut mb): (Vec<(FactorId, u32)>, Vec<(FactorId, u32)>) = (vec![], vec![]);
        let (mut i, mut j) = (0, 0);
        while i < a.den.len() || j < b.den.len() {
            match (a.den.get(i), b.den.get(j)) {
                (Some(&(fa, ea)), Some(&(fb, eb))) if fa == fb => {
                    let e = ea.max(eb);
                    l.push((fa, e));
                    if e > ea {
                        ma.push((fa, e - ea));
                    }
                    if e > eb {
                        mb.push((fb, e - eb));
                    }
                    i += 1;
                    j += 1;
                }
                (Some(&(fa, ea)), Some(&(fb, _))) if fa < fb => {
                    l.push((fa, ea));
                    mb.push((fa, ea));
                    i += 1;
                }
                (Some(&(fa, ea)), None) => {
                    l.push((fa, ea));
                    mb.push((fa, ea));
                    i += 1;
                }
                (_, Some(&(fb, eb))) => {
                    l.push((fb, eb));
                    ma.push((fb, eb));
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        let na = a.num.mul(&Expr::den_poly(&ma));
        let nb = b.num.mul(&Expr::den_poly(&mb));
        let num = if negate { na.sub(&nb) } else { na.add(&nb) };
        Expr::build(num, l)
    }

    pub fn mul(&self, o: &Expr) -> Expr {
        if self.is_zero() || o.is_zero() {
            return Expr::zero();
        }
        if let Some(c) = o.as_rat() {
            return self.scale(&c);
        }
        if let Some(c) = self.as_rat() {
            return o.scale(&c);
        }
        let num = self.0.num.mul(&o.0.num);
        let mut den = self.0.den.clone();
        for &(f, e) in o.0.den.iter() {
            match den.binary_search_by_key(&f, |t| t.0) {
                Ok(p) => den[p].1 += e,
                Err(p) => den.insert(p, (f, e)),
            }
        }
        Expr::build(num, den)
    }

    /// Multiplicative inverse.
    pub fn inv(&self) -> Result<Expr, ExprError> {
        if self.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        let fz = factor::factorize(&self.0.num);
        let neg_l: Mono = fz.laurent.iter().map(|&(g, e)| (g, -e)).collect();
        let num = Expr::den_poly(&self.0.den).mul_mono(&neg_l, &fz.unit.recip());
        Ok(Expr::build(num, fz.den))
    }

    pub fn try_div(&self, o: &Expr) -> Result<Expr, ExprError> {
        if let Some(c) = o.as_rat() {
            if c.is_zero() {
                return Err(ExprError::DivisionByZero);
            }
            return Ok(self.scale(&c.recip()));
        }
        Ok(self.mul(&o.inv()?))
    }

    pub fn pow(&self, e: i32) -> Result<Expr, ExprError> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut k = e.unsigned_abs();
        let mut acc = Expr::one();
        let mut b = base;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&b);
            }
            b = b.mul(&b);
            k >>= 1;
        }
        Ok(acc)
    }

    pub fn sum<'a, I: IntoIterator<Item = &'a Expr>>(it: I) -> Expr {
        let mut by_den: HashMap<Den, Poly> = HashMap::new();
        let mut order: Vec<Den> = Vec::new();
        for e in it {
            if e.is_zero() {
                continue;
            }
            match by_den.get_mut(&e.0.den) {
                Some(p) => *p = p.add(&e.0.num),
                None => {
                    order.push(e.0.den.clone());
                    by_den.insert(e.0.den.clone(), e.0.num.clone());
                }
            }
        }
        let mut acc = Expr::zero();
        for d in order {
            let p = by_den.remove(&d).unwrap();
            acc = acc.add(&Expr::build(p, d));
        }
        acc
    }

    // ---- differentiation ----

    /// Total derivative with respect to coordinate `x` (a coordinate generator).
    pub fn diff(&self, x: GenId) -> Expr {
        if self.is_zero() {
            return Expr::zero();
        }
        let dn = poly_diff(&self.0.num, x);
        if self.0.den.is_empty() {
            return dn;
        }
        // d(N/D) = (N' - N * sum e_i f_i'/f_i) / D
        let mut logd = Expr::zero();
        for &(f, e) in self.0.den.iter() {
            let df = factor_diff(f, x);
            if df.is_zero() {
                continue;
            }
            let fi = Expr::build(Poly::one(), smallvec::smallvec![(f, 1)]);
            logd = logd.add(&df.mul(&fi).scale(&Rat::int(e as i64)));
        }
        let n = Expr::from_poly(self.0.num.clone());
        let top = dn.sub(&n.mul(&logd));
        top.mul(&Expr::build(Poly::one(), self.0.den.clone()))
    }

    pub fn diff_name(&self, x: &str) -> Expr {
        self.diff(gen::coord(x))
    }

    // ---- atoms ----

    pub fn exp(&self) -> Result<Expr, ExprError> {
        if self.is_zero() {
            return Ok(Expr::one());
        }
        // exp(k * log w) = w^k
        if self.0.den.is_empty() {
            if let [(m, c)] = self.0.num.terms() {
                if m.len() == 1 && m[0].1 == 1 && tag(m[0].0) == gen::TAG_LOG && c.is_integer() {
                    if let GenKind::Atom(AtomKind::Log, w) = &gen::info(m[0].0).kind {
                        let k = c.numer().try_into().map_err(|_| {
                            ExprError::UnsupportedPower(format!("exp({self})"))
                        })?;
                        return w.pow(k);
                    }
                }
            }
            let mut acc = Expr::one();
            for (m, c) in self.0.num.terms() {
                let v = Expr::raw(Poly::monomial(m.clone(), Rat::ONE), Den::new());
                acc = acc.mul(&exp_scaled(&v, c));
            }
            return Ok(acc);
        }
        let c = self.0.num.content();
        let s = &factor::canonical_sign(&self.0.num) * &c;
        let v = self.scale(&s.recip());
        Ok(exp_scaled(&v, &s))
    }

    pub fn log(&self) -> Result<Expr, ExprError> {
        if let Some(c) = self.as_rat() {
            if c.signum() <= 0 {
                return Err(ExprError::GuardViolation(format!("log of non-positive constant {c}")));
            }
            if c.is_one() {
                return Ok(Expr::zero());
            }
        }
        if self.0.den.is_empty() {
            if let [(m, c)] = self.0.num.terms() {
                if c.is_one() && !m.is_empty() && m.iter().all(|(g, _)| is_laurent(*g)) {
                    // log of a product of exponentials
                    let mut acc = Expr::zero();
                    for &(g, e) in m.iter() {
                        if let GenKind::Atom(AtomKind::Exp, v) = &gen::info(g).kind {
                            acc = acc.add(&v.scale(&Rat::new(e as i64, EXP_DENOM)));
                        }
                    }
                    return Ok(acc);
                }
            }
        }
        Ok(Expr::from_gen(gen::atom(AtomKind::Log, self.clone())))
    }

    pub fn sqrt(&self) -> Result<Expr, ExprError> {
        if let Some(c) = self.as_rat() {
            if c.signum() < 0 {
                return Err(ExprError::GuardViolation(format!("sqrt of negative constant {c}")));
            }
            if let Some(r) = c.sqrt_exact() {
                return Ok(Expr::rat(r));
            }
        }
        Ok(Expr::from_gen(gen::atom(AtomKind::Sqrt, self.clone())))
    }

    // ---- substitution ----

    /// Simultaneous substitution of coordinates and abstract functions.
    pub fn substitute(&self, b: &Bindings) -> Result<Expr, ExprError> {
        let mut memo: HashMap<GenId, Expr> = HashMap::new();
        self.substitute_memo(b, &mut memo)
    }

    fn substitute_memo(&self, b: &Bindings, memo: &mut HashMap<GenId, Expr>) -> Result<Expr, ExprError> {
        let num = subst_poly(&self.0.num, b, memo)?;
        let mut den = Expr::one();
        for &(f, e) in self.0.den.iter() {
            let fe = subst_poly(factor_poly(f), b, memo)?;
            den = den.mul(&fe.pow(e as i32)?);
        }
        num.try_div(&den)
    }

    /// Apply `f` to every generator (used by numeric evaluation and substitution).
    pub fn map_gens<F>(&self, f: &mut F) -> Result<Expr, ExprError>
    where
        F: FnMut(GenId) -> Result<Option<Expr>, ExprError>,
    {
        let mut memo: HashMap<GenId, Expr> = HashMap::new();
        let mut img = |g: GenId, memo: &mut HashMap<GenId, Expr>| -> Result<Expr, ExprError> {
            if let Some(e) = memo.get(&g) {
                return Ok(e.clone());
            }
            let e = f(g)?.unwrap_or_else(|| Expr::from_gen(g));
            memo.insert(g, e.clone());
            Ok(e)
        };
        let mut num = Expr::zero();
        for (m, c) in self.0.num.terms() {
            let mut t = Expr::rat(c.clone());
            for &(g, e) in m.iter() {
                t = t.mul(&img(g, &mut memo)?.pow(e)?);
            }
            num = num.add(&t);
        }
        let mut den = Expr::one();
        for &(fid, e) in self.0.den.iter() {
            let mut fe = Expr::zero();
            for (m, c) in factor_poly(fid).terms() {
                let mut t = Expr::rat(c.clone());
                for &(g, k) in m.iter() {
                    t = t.mul(&img(g, &mut memo)?.pow(k)?);
                }
                fe = fe.add(&t);
            }
            den = den.mul(&fe.pow(e as i32)?);
        }
        num.try_div(&den)
    }
}

fn exp_scaled(v: &Expr, q: &Rat) -> Expr {
    let k = q * &Rat::int(EXP_DENOM);
    if k.is_integer() {
        if let Ok(k) = i32::try_from(k.numer()) {
            let g = gen::atom(AtomKind::Exp, v.clone());
            return Expr::raw(Poly::gen(g, k), Den::new());
        }
    }
    let g = gen::atom(AtomKind::Exp, v.scale(q));
    Expr::raw(Poly::gen(g, EXP_DENOM as i32), Den::new())
}

/// Whether generator `g` depends on coordinate `x`.
pub fn gen_depends_on(g: GenId, x: GenId) -> bool {
    if g == x {
        return true;
    }
    match &gen::info(g).kind {
        GenKind::Coord(_) => false,
        GenKind::Func { args, .. } => args.contains(&x),
        GenKind::Atom(_, a) => a.depends_on(x),
    }
}

fn gen_diff(g: GenId, x: GenId) -> Expr {
    if let Some(e) = GEN_DIFF.read().unwrap().get(&(g, x)) {
        return e.clone();
    }
    let d = match &gen::info(g).kind {
        GenKind::Coord(_) => {
            if g == x {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        GenKind::Func { name, args, alpha } => match args.iter().position(|a| *a == x) {
            None => Expr::zero(),
            Some(k) => {
                let mut a2 = alpha.clone();
                a2[k] += 1;
                Expr::from_gen(gen::func(name, args, &a2))
            }
        },
        GenKind::Atom(kind, a) => {
            let da = a.diff(x);
            if da.is_zero() {
                Expr::zero()
            } else {
                match kind {
                    AtomKind::Exp => Expr::from_gen(g).mul(&da).scale(&Rat::new(1, EXP_DENOM)),
                    AtomKind::Log => da.try_div(a).expect("log argument is nonzero"),
                    AtomKind::Sqrt => da
                        .try_div(&Expr::from_gen(g))
                        .expect("sqrt generator is nonzero")
                        .scale(&Rat::new(1, 2)),
                }
            }
        }
    };
    GEN_DIFF.write().unwrap().insert((g, x), d.clone());
    d
}

fn poly_diff(p: &Poly, x: GenId) -> Expr {
    let mut by_den: Vec<Expr> = Vec::new();
    for g in p.gens() {
        let dg = gen_diff(g, x);
        if dg.is_zero() {
            continue;
        }
        let pg = p.partial(g);
        if let Some(c) = dg.as_rat() {
            by_den.push(Expr::from_poly(pg.scale(&c)));
        } else {
            by_den.push(Expr::from_poly(pg).mul(&dg));
        }
    }
    Expr::sum(by_den.iter())
}

fn factor_diff(f: FactorId, x: GenId) -> Expr {
    if let Some(e) = FACTOR_DIFF.read().unwrap().get(&(f, x)) {
        return e.clone();
    }
    let d = poly_diff(factor_poly(f), x);
    FACTOR_DIFF.write().unwrap().insert((f, x), d.clone());
    d
}

/// Replace `s^k` (k >= 2) for sqrt generators `s` in the numerator.
fn rewrite_sqrt_num(num: &Poly, den: &Den) -> Option<Expr> {
    let hit = num
        .terms()
        .iter()
        .any(|(m, _)| m.iter().any(|&(g, e)| tag(g) == TAG_SQRT && e >= 2));
    if !hit {
        return None;
    }
    let mut acc = Expr::zero();
    for (m, c) in num.terms() {
        let mut keep = Mono::new();
        let mut extra = Expr::one();
        for &(g, e) in m.iter() {
            if tag(g) == TAG_SQRT && e >= 2 {
                if let GenKind::Atom(_, a) = &gen::info(g).kind {
                    extra = extra.mul(&a.pow(e / 2).expect("positive power"));
                }
                if e % 2 == 1 {
                    keep.push((g, 1));
                }
            } else {
                keep.push((g, e));
            }
        }
        acc = acc.add(&Expr::build(Poly::monomial(keep, c.clone()), Den::new()).mul(&extra));
    }
    Some(acc.mul(&Expr::build(Poly::one(), den.clone())))
}

/// Replace `1/s^k` (k >= 2) for single-generator sqrt factors.
fn rewrite_sqrt_den(num: &Poly, den: &Den) -> Option<Expr> {
    let pos = den.iter().position(|&(f, e)| {
        e >= 2 && factor::info(f).single_gen.is_some_and(|g| tag(g) == TAG_SQRT)
    })?;
    let (f, e) = den[pos];
    let g = factor::info(f).single_gen.unwrap();
    let GenKind::Atom(_, a) = &gen::info(g).kind else {
        unreachable!()
    };
    let mut rest = den.clone();
    if e % 2 == 1 {
        rest[pos].1 = 1;
    } else {
        rest.remove(pos);
    }
    let base = Expr::build(num.clone(), rest);
    Some(base.mul(&a.pow(-((e / 2) as i32)).expect("sqrt argument is nonzero")))
}

/// Symbol bindings for [`Expr::substitute`].
#[derive(Clone, Default)]
pub struct Bindings {
    coords: HashMap<GenId, Expr>,
    /// name -> (formal argument coordinates, realization)
    funcs: HashMap<String, (Vec<GenId>, Expr)>,
    derived: HashMap<(String, Vec<u8>), Expr>,
}

impl Bindings {
    pub fn new() -> Bindings {
        Bindings::default()
    }

    pub fn coord(mut self, name: &str, e: Expr) -> Self {
        self.coords.insert(gen::coord(name), e);
        self
    }

    /// Bind function `name` to an expression in its formal argument coordinates.
    pub fn func(mut self, name: &str, args: &[&str], e: Expr) -> Self {
        let ids = args.iter().map(|a| gen::coord(a)).collect();
        self.funcs.insert(name.to_string(), (ids, e));
        self
    }

    /// Bind one derived symbol explicitly (must agree with the base binding).
    pub fn derived(mut self, name: &str, alpha: &[u8], e: Expr) -> Self {
        self.derived.insert((name.to_string(), alpha.to_vec()), e);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty() && self.funcs.is_empty() && self.derived.is_empty()
    }
}

fn subst_gen(g: GenId, b: &Bindings, memo: &mut HashMap<GenId, Expr>) -> Result<Expr, ExprError> {
    if let Some(e) = memo.get(&g) {
        return Ok(e.clone());
    }
    let out = match &gen::info(g).kind {
        GenKind::Coord(_) => b.coords.get(&g).cloned().unwrap_or_else(|| Expr::from_gen(g)),
        GenKind::Func { name, args, alpha } => {
            let base = b.funcs.get(name.as_ref());
            let explicit = b.derived.get(&(name.to_string(), alpha.to_vec()));
            let from_base = match base {
                Some((formal, real)) => {
                    if formal.len() != args.len() {
                        return Err(ExprError::InconsistentBinding(format!(
                            "{name} bound with {} arguments, used with {}",
                            formal.len(),
                            args.len()
                        )));
                    }
                    let mut d = real.clone();
                    for (k, &n) in alpha.iter().enumerate() {
                        for _ in 0..n {
                            d = d.diff(formal[k]);
                        }
                    }
                    // rename formal arguments to actual ones, then apply coordinate bindings
                    let mut ren = Bindings::new();
                    for (k, &fa) in formal.iter().enumerate() {
                        let actual = Expr::from_gen(args[k]);
                        let img = b.coords.get(&args[k]).cloned().unwrap_or(actual);
                        ren.coords.insert(fa, img);
                    }
                    Some(d.substitute(&ren)?)
                }
                None => None,
            };
            match (from_base, explicit) {
                (Some(x), Some(y)) => {
                    if !x.equiv(y) {
                        return Err(ExprError::InconsistentBinding(format!(
                            "derived symbol of {name} bound to {y}, base binding gives {x}"
                        )));
                    }
                    x
                }
                (Some(x), None) => x,
                (None, Some(y)) => y.clone(),
                (None, None) => {
                    if args.iter().any(|a| b.coords.contains_key(a)) {
                        return Err(ExprError::InconsistentBinding(format!(
                            "coordinate bound inside unbound function {name}"
                        )));
                    }
                    Expr::from_gen(g)
                }
            }
        }
        GenKind::Atom(kind, a) => {
            let a2 = a.substitute_memo(b, &mut HashMap::new())?;
            if &a2 == a {
                Expr::from_gen(g)
            } else {
                match kind {
                    AtomKind::Exp => {
                        // generator is exp(a / EXP_DENOM)
                        a2.scale(&Rat::new(1, EXP_DENOM)).exp()?
                    }
                    AtomKind::Log => a2.log()?,
                    AtomKind::Sqrt => a2.sqrt()?,
                }
            }
        }
    };
    memo.insert(g, out.clone());
    Ok(out)
}

fn subst_poly(p: &Poly, b: &Bindings, memo: &mut HashMap<GenId, Expr>) -> Result<Expr, ExprError> {
    let mut terms = Vec::with_capacity(p.len());
    for (m, c) in p.terms() {
        let mut t = Expr::rat(c.clone());
        for &(g, e) in m.iter() {
            t = t.mul(&subst_gen(g, b, memo)?.pow(e)?);
        }
        terms.push(t);
    }
    Ok(Expr::sum(terms.iter()))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = print::poly_to_string(&self.0.num);
        if self.0.den.is_empty() {
            return f.write_str(&n);
        }
        let mut parts: Vec<(String, u32, bool)> = self
            .0
            .den
            .iter()
            .map(|&(fid, e)| {
                let fi = factor::info(fid);
                (fi.text.clone(), e, fi.single_gen.is_some())
            })
            .collect();
        parts.sort();
        let d = parts
            .iter()
            .map(|(t, e, single)| {
                let base = if *single { t.clone() } else { format!("({t})") };
                if *e == 1 {
                    base
                } else {
                    format!("{base}^{e}")
                }
            })
            .collect::<Vec<_>>()
            .join("*");
        if self.0.num.len() == 1 {
            write!(f, "{n}/({d})")
        } else {
            write!(f, "({n})/({d})")
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

macro_rules! bin_ops {
    ($tr:ident, $m:ident, $body:expr) => {
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                $body(self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                $body(&self, &rhs)
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                $body(&self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                $body(self, &rhs)
            }
        }
    };
}

bin_ops!(Add, add, |a: &Expr, b: &Expr| Expr::add(a, b));
bin_ops!(Sub, sub, |a: &Expr, b: &Expr| Expr::sub(a, b));
bin_ops!(Mul, mul, |a: &Expr, b: &Expr| Expr::mul(a, b));
bin_ops!(Div, div, |a: &Expr, b: &Expr| a.try_div(b).expect("division by zero Expr"));

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}
impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

impl From<Rat> for Expr {
    fn from(r: Rat) -> Expr {
        Expr::rat(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: u32) -> Expr {
        Expr::coord(&format!("x{i}"))
    }

    #[test]
    fn cancels_common_factor() {
        let u = Expr::func("u", &["x2"]);
        let v = Expr::func("v", &["x3"]);
        let s = &u + &v;
        let e = &s * &s.inv().unwrap() - Expr::one();
        assert!(e.is_zero());
    }

    #[test]
    fn common_denominator() {
        let a = Expr::func("a", &["x1", "x2"]);
        let c = Expr::func("c", &["x3"]);
        let g = Expr::func("gamma", &["x1", "x2"]);
        let d = (&g + &c).inv().unwrap();
        let e = &c * &a * &d + &g * &a * &d - &a;
        assert!(e.is_zero());
    }

    #[test]
    fn binomial() {
        let e = (x(1) + x(2)).pow(2).unwrap() - x(1) * x(1) - Expr::int(2) * x(1) * x(2) - x(2) * x(2);
        assert!(e.is_zero());
    }

    #[test]
    fn product_rule_and_chain_rule() {
        let u = Expr::func("u", &["x2"]);
        let e = &x(1) * &x(1) * &u;
        assert!(e.diff_name("x1").equiv(&(Expr::int(2) * x(1) * &u)));
        let v = Expr::func("v", &["x3"]);
        let l = (&u + &v).log().unwrap();
        let du = Expr::derived("u", &["x2"], &[1]);
        assert!(l.diff_name("x2").equiv(&(du / (&u + &v))));
    }

    #[test]
    fn mixed_partials_commute() {
        let f = Expr::func("f", &["x1", "x2"]);
        assert_eq!(f.diff_name("x1").diff_name("x2"), f.diff_name("x2").diff_name("x1"));
    }

    #[test]
    fn exp_log_rewrites() {
        let u = Expr::func("u", &["x2"]);
        assert_eq!(u.log().unwrap().exp().unwrap(), u);
        let y = Expr::func("Y", &["x1"]);
        let a = y.scale(&Rat::int(2)).exp().unwrap();
        let b = y.exp().unwrap();
        assert!((&a - &b * &b).is_zero());
        let h = y.scale(&Rat::new(1, 2)).exp().unwrap();
        assert!((&h * &h - &b).is_zero());
        assert!((b.log().unwrap() - &y).is_zero());
        assert!((b.diff_name("x1") - &b * y.diff_name("x1")).is_zero());
    }

    #[test]
    fn sqrt_squares_to_argument() {
        let w = x(1) + Expr::int(1);
        let s = w.sqrt().unwrap();
        assert!((&s * &s - &w).is_zero());
        assert!((s.inv().unwrap().pow(2).unwrap() - w.inv().unwrap()).is_zero());
        assert_eq!(Expr::frac(9, 4).sqrt().unwrap(), Expr::frac(3, 2));
        assert!(Expr::int(-1).sqrt().is_err());
        assert!(Expr::int(0).log().is_err());
    }

    #[test]
    fn substitution_follows_derivatives() {
        let u = Expr::func("u", &["x2"]);
        let b = Bindings::new().func("u", &["x2"], x(2) * x(2));
        assert_eq!(u.substitute(&b).unwrap(), x(2) * x(2));
        let du = Expr::derived("u", &["x2"], &[1]);
        assert_eq!(du.substitute(&b).unwrap(), Expr::int(2) * x(2));
        let bad = b.clone().derived("u", &[1], x(2));
        assert!(matches!(du.substitute(&bad), Err(ExprError::InconsistentBinding(_))));
    }

    #[test]
    fn printing_is_structural() {
        let u = Expr::derived("u", &["x2"], &[1]);
        let e = Expr::frac(-1, 2) * x(1) * x(1) * u;
        assert_eq!(e.to_string(), "-1/2*x1^2*D[u,(1)](x2)");
    }
}
