//! Interned denominator factors.
//!
//! Denominators are products of powers of interned primitive polynomials.
//! A new factor is trial-divided by the existing ones before it is interned,
//! so repeated inversions of the same quantity reuse a single entry.

use super::gen::{is_laurent, GenId};
use super::poly::{Mono, Poly};
use super::rat::Rat;
use smallvec::SmallVec;
use std::collections::HashMap;
use std::sync::{LazyLock, RwLock};

pub type FactorId = u32;

/// Denominator: factor powers sorted by id.
pub type Den = SmallVec<[(FactorId, u32); 4]>;

pub struct FactorInfo {
    pub poly: Poly,
    pub gens: Vec<GenId>,
    pub single_gen: Option<GenId>,
    pub text: String,
}

struct Table {
    infos: Vec<&'static FactorInfo>,
    map: HashMap<Poly, FactorId>,
}

static TABLE: LazyLock<RwLock<Table>> = LazyLock::new(|| {
    RwLock::new(Table {
        infos: Vec::new(),
        map: HashMap::new(),
    })
});

pub fn info(id: FactorId) -> &'static FactorInfo {
    TABLE.read().unwrap().infos[id as usize]
}

fn snapshot() -> Vec<(FactorId, &'static FactorInfo)> {
    TABLE
        .read()
        .unwrap()
        .infos
        .iter()
        .enumerate()
        .map(|(i, f)| (i as FactorId, *f))
        .collect()
}

/// Intern a primitive, sign-normalized polynomial.
fn intern(p: Poly) -> FactorId {
    if let Some(&id) = TABLE.read().unwrap().map.get(&p) {
        return id;
    }
    let text = super::print::poly_to_string(&p);
    let gens = p.gens();
    let single_gen = p.as_single_gen();
    let mut t = TABLE.write().unwrap();
    if let Some(&id) = t.map.get(&p) {
        return id;
    }
    let id = t.infos.len() as FactorId;
    let leaked: &'static FactorInfo = Box::leak(Box::new(FactorInfo {
        poly: p.clone(),
        gens,
        single_gen,
        text,
    }));
    t.infos.push(leaked);
    t.map.insert(p, id);
    id
}

pub fn gen_factor(g: GenId) -> FactorId {
    intern(Poly::gen(g, 1))
}

/// Sign making the structurally first term positive.
pub(crate) fn canonical_sign(p: &Poly) -> Rat {
    let first = p
        .terms()
        .iter()
        .min_by(|a, b| Poly::mono_sort_key(&a.0).cmp(&Poly::mono_sort_key(&b.0)))
        .map(|t| t.1.signum())
        .unwrap_or(1);
    if first < 0 {
        Rat::int(-1)
    } else {
        Rat::ONE
    }
}

pub struct Factorization {
    /// Constant multiplier.
    pub unit: Rat,
    /// Laurent (exp) part of the monomial content.
    pub laurent: Mono,
    pub den: Den,
}

/// Write `p = unit * laurent * prod(f^e)` over the factor table.
pub fn factorize(p: &Poly) -> Factorization {
    assert!(!p.is_zero());
    if let Some(c) = p.as_constant() {
        return Factorization {
            unit: c,
            laurent: Mono::new(),
            den: Den::new(),
        };
    }
    let mut unit = p.content();
    let mc = p.mono_content();
    let neg: Mono = mc.iter().map(|&(g, e)| (g, -e)).collect();
    let mut rest = p.mul_mono(&neg, &unit.recip());
    let mut den: Vec<(FactorId, u32)> = Vec::new();
    let mut laurent = Mono::new();
    for &(g, e) in mc.iter() {
        if is_laurent(g) {
            laurent.push((g, e));
        } else {
            den.push((gen_factor(g), e as u32));
        }
    }
    if rest.as_constant().is_none() {
        let rgens = rest.gens();
        for (fid, f) in snapshot() {
            if f.single_gen.is_some() || !f.gens.iter().all(|g| rgens.binary_search(g).is_ok()) {
                continue;
            }
            let mut k = 0;
            while let Some(q) = rest.div_exact(&f.poly) {
                rest = q;
                k += 1;
            }
            if k > 0 {
                den.push((fid, k));
            }
            if rest.as_constant().is_some() {
                break;
            }
        }
    }
    match rest.as_constant() {
        Some(c) => unit = &unit * &c,
        None => {
            let c = rest.content();
            let s = &canonical_sign(&rest) * &c;
            let normalized = rest.scale(&s.recip());
            unit = &unit * &s;
            den.push((intern(normalized), 1));
        }
    }
    den.sort_unstable();
    let mut merged = Den::new();
    for (f, e) in den {
        match merged.last_mut() {
            Some(last) if last.0 == f => last.1 += e,
            _ => merged.push((f, e)),
        }
    }
    Factorization {
        unit,
        laurent,
        den: merged,
    }
}
