use confsym_core::confsym::{conformal_killing_op, exterior_d, flat};
use confsym_core::expr::{Expr, NumericContext, Rat};
use confsym_core::geomdsl::{parse_expr_tree, parse_geometry, FuncDecl, GeometrySpec};
use confsym_core::quantize::{quantize_order2, yamabe, DiffOp, Order2Symbol, Weights};
use confsym_core::suite::{close, fixture};
use confsym_core::symbols::{hamiltonian_symbol, in_ideal_h, poisson, PolySymbol};
use confsym_core::tensor::{Geometry, TensorField, Var};
use proptest::prelude::*;

fn env() -> GeometrySpec {
    let mut s = GeometrySpec::chart(&["x", "y"]);
    s.functions.push(FuncDecl {
        name: "f".into(),
        args: vec!["x".into(), "y".into()],
    });
    s
}

fn expr_text() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        Just("f(x,y)".to_string()),
        (-3i64..=3).prop_map(|k| format!("({k})")),
        Just("(1/2)".to_string()),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})+({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})-({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})/({b})")),
            (inner.clone(), 0u32..3).prop_map(|(a, k)| format!("({a})^{k}")),
            inner.prop_map(|a| format!("exp({a})")),
        ]
    })
}

/// Parsed and normalized; `None` when normalization divides by zero.
fn expr(text: &str) -> Option<Expr> {
    parse_expr_tree(text, &env()).ok()?.normalize().ok()
}

fn ctx(x: f64, y: f64) -> NumericContext {
    let real = Expr::coord("_s") * Expr::coord("_s") + Expr::coord("_t") + Expr::int(2);
    NumericContext::new()
        .with_coord("x", x)
        .with_coord("y", y)
        .with_func("f", &["_s", "_t"], real)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn self_difference_vanishes(t in expr_text()) {
        if let Some(e) = expr(&t) {
            prop_assert!((&e - &e).is_zero());
        }
    }

    #[test]
    fn derivatives_commute(t in expr_text()) {
        if let Some(e) = expr(&t) {
            let (x, y) = (Expr::coord("x"), Expr::coord("y"));
            let (gx, gy) = (x.gens()[0], y.gens()[0]);
            prop_assert!((e.diff(gx).diff(gy) - e.diff(gy).diff(gx)).is_zero());
            prop_assert!(Expr::int(5).diff(gx).is_zero());
        }
    }

    #[test]
    fn leibniz_rule(a in expr_text(), b in expr_text()) {
        if let (Some(a), Some(b)) = (expr(&a), expr(&b)) {
            let gx = Expr::coord("x").gens()[0];
            let lhs = (&a * &b).diff(gx);
            let rhs = &a.diff(gx) * &b + &a * &b.diff(gx);
            prop_assert!((lhs - rhs).is_zero());
        }
    }

    #[test]
    fn normalization_preserves_values(t in expr_text(), x in 0.5f64..1.5, y in 0.5f64..1.5) {
        let tree = parse_expr_tree(&t, &env()).unwrap();
        if let Ok(e) = tree.normalize() {
            let c = ctx(x, y);
            if let (Ok(a), Ok(b)) = (tree.eval(&c), c.eval(&e)) {
                if a.is_finite() && b.is_finite() && a.abs() < 1e8 {
                    prop_assert!(close(a, b, 1e-10), "{t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn parser_is_total(s in "[a-z0-9{}\\[\\]=;,.+*/^() \n-]{0,80}") {
        let _ = parse_geometry(&s);
        let _ = parse_expr_tree(&s, &env());
    }

    #[test]
    fn parser_is_total_near_valid(cut in 0usize..400, junk in "[{}=;\\[\\]a-z0-9 ]{0,6}") {
        let text = include_str!("../../../fixtures/stackel.geo");
        let cut = cut.min(text.len());
        if text.is_char_boundary(cut) {
            let s = format!("{}{}{}", &text[..cut], junk, &text[cut..]);
            let _ = parse_geometry(&s);
        }
    }
}

// ------------------------------------------------------------ tensors, symbols, operators

fn plane() -> Geometry {
    // conformally flat metric on a chart of R^2 x R
    let c: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    let w = Expr::int(1) + Expr::coord("x") * Expr::coord("x") + Expr::coord("y") * Expr::coord("z");
    let rows = (0..3)
        .map(|i| (0..3).map(|j| if i == j { w.clone() } else { Expr::zero() }).collect())
        .collect();
    Geometry::new(&c, rows).unwrap()
}

fn poly3(cs: &[(i64, u32, u32, u32)]) -> Expr {
    let t: Vec<Expr> = cs
        .iter()
        .map(|&(c, i, j, k)| {
            Expr::int(c)
                * Expr::coord("x").pow(i as i32).unwrap()
                * Expr::coord("y").pow(j as i32).unwrap()
                * Expr::coord("z").pow(k as i32).unwrap()
        })
        .collect();
    Expr::sum(t.iter())
}

fn poly3_strategy() -> impl Strategy<Value = Expr> {
    prop::collection::vec((-3i64..=3, 0u32..3, 0u32..3, 0u32..2), 1..3).prop_map(|v| poly3(&v))
}

fn field(vars: &'static [Var]) -> impl Strategy<Value = TensorField> {
    let len = 3usize.pow(vars.len() as u32);
    prop::collection::vec(poly3_strategy(), len).prop_map(move |cs| TensorField::from_components(3, vars, cs))
}

fn symmetric(degree: usize) -> impl Strategy<Value = PolySymbol> {
    prop::collection::vec(poly3_strategy(), 10).prop_map(move |cs| {
        let vars = vec![Var::Up; degree];
        let t = TensorField::from_fn(3, &vars, |ix| {
            let mut s = ix.to_vec();
            s.sort_unstable();
            let key = s.iter().fold(0, |acc, &i| acc * 3 + i) % cs.len();
            cs[key].clone()
        });
        PolySymbol::new(t).unwrap()
    })
}

fn random_op() -> impl Strategy<Value = Vec<(Vec<u8>, Expr)>> {
    prop::collection::vec((prop::collection::vec(0u8..2, 3), poly3_strategy()), 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn covariant_leibniz(t in field(&[Var::Up]), s in field(&[Var::Down])) {
        let g = plane();
        let lhs = t.outer(&s).covariant_derivative(&g);
        let dt = t.covariant_derivative(&g);
        let ds = s.covariant_derivative(&g);
        let rhs = TensorField::from_fn(3, &[Var::Down, Var::Up, Var::Down], |ix| {
            dt.get(&[ix[0], ix[1]]) * s.get(&[ix[2]]) + t.get(&[ix[1]]) * ds.get(&[ix[0], ix[2]])
        });
        prop_assert!(lhs.sub(&rhs).is_zero());
    }

    #[test]
    fn trace_commutes_with_nabla(t in field(&[Var::Up, Var::Down])) {
        let g = plane();
        let lhs = t.contract(0, 1).unwrap().covariant_derivative(&g);
        let rhs = t.covariant_derivative(&g).contract(1, 2).unwrap();
        prop_assert!(lhs.sub(&rhs).is_zero());
    }

    #[test]
    fn weighted_nabla_reduces_at_weight_zero(t in field(&[Var::Up])) {
        let g = plane();
        let a = t.clone().with_weight(Rat::ZERO).covariant_derivative(&g);
        prop_assert!(a.sub(&t.covariant_derivative(&g)).is_zero());
    }

    #[test]
    fn poisson_leibniz_and_antisymmetry(a in symmetric(2), b in symmetric(1), c in symmetric(1)) {
        let g = plane();
        let lhs = poisson(&g, &a, &b.mul(&c)).unwrap();
        let rhs = poisson(&g, &a, &b).unwrap().mul(&c).add(&b.mul(&poisson(&g, &a, &c).unwrap()));
        prop_assert!(lhs.sub(&rhs).is_zero());
        let ab = poisson(&g, &a, &b).unwrap();
        let ba = poisson(&g, &b, &a).unwrap();
        prop_assert!(ab.add(&ba).is_zero());
    }

    #[test]
    fn double_adjoint_is_identity(terms in random_op()) {
        let g = plane();
        let d = DiffOp::from_terms(&g, Weights::new(Rat::new(1, 5), Rat::new(2, 3)), terms);
        let dd = d.adjoint(&g).adjoint(&g);
        prop_assert!(dd.sub(&d).unwrap().is_zero());
    }

    #[test]
    fn quantization_has_its_input_as_symbol(k in symmetric(2)) {
        let g = plane();
        let q = quantize_order2(&Order2Symbol::k(&k), &Weights::ll(3), &g).unwrap();
        prop_assert!(q.principal_symbol(2).sub(&k).is_zero());
    }

    #[test]
    fn d_squared_vanishes(w in field(&[Var::Down])) {
        let g = plane();
        let dw = exterior_d(&g, &w).unwrap();
        prop_assert!(exterior_d(&g, &dw).unwrap().is_zero());
    }

    #[test]
    fn flat_then_sharp(v in symmetric(1)) {
        let g = plane();
        let back = flat(&g, &v).raise(&g, 0);
        prop_assert!(back.sub(v.tensor()).is_zero());
    }
}

#[test]
fn yamabe_symbol_is_inverse_metric() {
    for name in ["stackel", "lemma_product", "conformally_flat3"] {
        let g = fixture(name).unwrap().1;
        let s = yamabe(&g).principal_symbol(2);
        assert!(s.tensor().sub(&g.inverse_metric()).is_zero(), "{name}");
    }
}

#[test]
fn conformal_killing_iff_bracket_in_ideal() {
    for name in ["flat3", "flat4", "dipirro", "stackel", "minkowski_reduction", "lemma_product", "conformally_flat3"] {
        let (spec, g) = fixture(name).unwrap();
        let h = hamiltonian_symbol(&g);
        for d in spec.symbols.iter().filter(|d| d.degree == 2) {
            let k = PolySymbol::from_decl(spec.dim, d);
            let a = conformal_killing_op(&g, &k).unwrap().is_zero();
            let b = in_ideal_h(&g, &poisson(&g, &h, &k).unwrap()).unwrap();
            assert_eq!(a, b, "{name}/{}", d.name);
        }
    }
}
