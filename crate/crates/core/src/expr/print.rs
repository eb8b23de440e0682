//! Deterministic infix rendering.
//!
//! Term order depends only on the printed structure of generators, never on
//! interning order, so output is stable across runs and threads.

use super::gen::{self, GenKind, AtomKind, EXP_DENOM};
use super::poly::Poly;
use super::rat::Rat;
use std::fmt::Write;

fn gen_power(g: gen::GenId, e: i32, out: &mut String) {
    let info = gen::info(g);
    if let GenKind::Atom(AtomKind::Exp, v) = &info.kind {
        let q = Rat::new(e as i64, EXP_DENOM);
        if q.is_one() {
            out.push_str(&info.text);
        } else {
            let _ = write!(out, "exp({}*({}))", q, v);
        }
        return;
    }
    out.push_str(&info.text);
    if e != 1 {
        let _ = write!(out, "^{e}");
    }
}

/// Sort key of a term: descending total degree, then structural generator keys.
fn term_key(m: &[(gen::GenId, i32)]) -> (i64, Vec<(&'static str, i32)>) {
    let deg: i64 = m
        .iter()
        .filter(|(g, _)| !gen::is_laurent(*g))
        .map(|&(_, e)| e as i64)
        .sum();
    (-deg, Poly::mono_sort_key(m))
}

pub(crate) fn poly_to_string(p: &Poly) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut terms: Vec<_> = p.terms().iter().collect();
    terms.sort_by_cached_key(|(m, _)| term_key(m));
    let mut out = String::new();
    for (i, (m, c)) in terms.iter().enumerate() {
        let neg = c.signum() < 0;
        let abs = c.abs();
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        if m.is_empty() {
            let _ = write!(out, "{abs}");
            continue;
        }
        if !abs.is_one() {
            let _ = write!(out, "{abs}*");
        }
        let mut gens: Vec<_> = m.iter().collect();
        gens.sort_by_key(|(g, _)| gen::info(*g).sort_key.as_str());
        for (j, &&(g, e)) in gens.iter().enumerate() {
            if j > 0 {
                out.push('*');
            }
            gen_power(g, e, &mut out);
        }
    }
    out
}
