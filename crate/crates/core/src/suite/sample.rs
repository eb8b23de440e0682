//! Seeded random points and realizations of abstract functions.

use crate::expr::{gen, Expr, GenId, GenKind, NumericContext, Rat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Default)]
struct Leaves {
    coords: BTreeSet<String>,
    funcs: BTreeMap<String, usize>,
}

fn walk_gen(g: GenId, seen: &mut BTreeSet<GenId>, out: &mut Leaves) {
    if !seen.insert(g) {
        return;
    }
    match &gen::info(g).kind {
        GenKind::Coord(c) => {
            out.coords.insert(c.to_string());
        }
        GenKind::Func { name, args, .. } => {
            out.funcs.insert(name.to_string(), args.len());
            for &a in args.iter() {
                walk_gen(a, seen, out);
            }
        }
        GenKind::Atom(_, e) => walk_expr(e, seen, out),
    }
}

fn walk_expr(e: &Expr, seen: &mut BTreeSet<GenId>, out: &mut Leaves) {
    for g in e.gens() {
        walk_gen(g, seen, out);
    }
}

fn rat_in(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Rat {
    Rat::new(rng.gen_range(lo..=hi), 1000)
}

/// `count` numeric contexts for the leaves of `exprs`, reproducible from `seed`.
///
/// Coordinates are drawn from `[0.6, 1.4]`. Functions of `k` arguments are
/// realized as random quadratics with a positive constant term, parameters
/// (no arguments) as constants in `[0.1, 0.4]`. One realization is shared by
/// all points of a run.
pub fn sample_contexts(exprs: &[&Expr], seed: u64, count: usize) -> Vec<NumericContext> {
    let mut leaves = Leaves::default();
    let mut seen = BTreeSet::new();
    for e in exprs {
        walk_expr(e, &mut seen, &mut leaves);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut base = NumericContext::new();
    for (name, &k) in &leaves.funcs {
        let formal: Vec<String> = (0..k).map(|i| format!("_t{i}")).collect();
        let fr: Vec<&str> = formal.iter().map(|s| s.as_str()).collect();
        let real = if k == 0 {
            Expr::rat(rat_in(&mut rng, 100, 400))
        } else {
            let mut terms = vec![Expr::rat(rat_in(&mut rng, 1500, 2500))];
            for i in 0..k {
                let xi = Expr::coord(&formal[i]);
                terms.push(xi.scale(&rat_in(&mut rng, -500, 500)));
                for j in i..k {
                    terms.push((&xi * &Expr::coord(&formal[j])).scale(&rat_in(&mut rng, -300, 300)));
                }
            }
            Expr::sum(terms.iter())
        };
        base = base.with_func(name, &fr, real);
    }
    (0..count)
        .map(|_| {
            let mut c = base.clone();
            for x in &leaves.coords {
                c.set_coord(x, rng.gen_range(0.6..1.4));
            }
            c
        })
        .collect()
}

/// Relative comparison used in numeric mode.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
