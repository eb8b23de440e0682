use confsym_core::confsym::{classify, conformal_killing_op, solve_potential, Potential, Verdict};
use confsym_core::curvature;
use confsym_core::expr::{Expr, Rat};
use confsym_core::geomdsl::{parse_geometry, print_geometry};
use confsym_core::quantize::{quantize_killing, quantize_order2, yamabe, Order2Symbol, Weights};
use confsym_core::suite::{fixture, fixture_text, FIXTURES};
use confsym_core::symbols::{is_killing, PolySymbol};
use confsym_core::tensor::{Geometry, TensorField, Var};

fn sym(name: &str, s: &str) -> (Geometry, PolySymbol) {
    let (spec, g) = fixture(name).unwrap();
    let k = PolySymbol::from_decl(spec.dim, spec.symbol(s).unwrap());
    (g, k)
}

#[test]
fn fixtures_round_trip() {
    for name in FIXTURES {
        let a = parse_geometry(fixture_text(name).unwrap()).unwrap();
        let b = parse_geometry(&print_geometry(&a)).unwrap();
        for (ra, rb) in a.metric.iter().zip(&b.metric) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).is_zero(), "{name}");
            }
        }
        assert_eq!(a.symbols.len(), b.symbols.len(), "{name}");
        for (sa, sb) in a.symbols.iter().zip(&b.symbols) {
            for (k, v) in &sa.comps {
                assert!((v - &sb.comps[k]).is_zero(), "{name}/{}", sa.name);
            }
        }
    }
}

#[test]
fn cotton_from_weyl_divergence() {
    // (n - 3) A_{abc} = nabla_r C_{bc}^r_a
    for name in ["stackel", "lemma_product", "flat4"] {
        let g = fixture(name).unwrap().1;
        let n = g.dim();
        let dc = curvature::weyl(&g).covariant_derivative(&g);
        let a = curvature::cotton_york(&g);
        let div = TensorField::from_fn(n, &[Var::Down; 3], |ix| {
            let t: Vec<Expr> = (0..n).map(|r| dc.get(&[r, ix[1], ix[2], r, ix[0]]).clone()).collect();
            Expr::sum(t.iter())
        });
        let lhs = a.scale(&Rat::int(n as i64 - 3));
        assert!(lhs.sub(&div).is_zero(), "{name}");
    }
}

#[test]
fn weyl_is_conformally_invariant() {
    let g = fixture("lemma_product").unwrap().1;
    let gh = g.conformal_rescale(&Expr::func("U", &["x1", "x3"])).unwrap();
    assert!(curvature::weyl(&gh).sub(curvature::weyl(&g)).is_zero());
}

#[test]
fn schouten_divergence_is_grad_j() {
    let g = fixture("dipirro").unwrap().1;
    let (p, j) = curvature::schouten(&g);
    let div = p.raise(&g, 0).covariant_derivative(&g).contract(0, 1).unwrap();
    let dj = TensorField::from_fn(3, &[Var::Down], |ix| j.diff(g.x(ix[0])));
    assert!(div.sub(&dj).is_zero());
}

#[test]
fn curvature_is_the_commutator_of_derivatives() {
    let g = fixture("dipirro").unwrap().1;
    let v = TensorField::from_fn(3, &[Var::Up], |ix| Expr::func(&format!("v{}", ix[0] + 1), &["x1", "x2", "x3"]));
    let ddv = v.covariant_derivative(&g).covariant_derivative(&g);
    let r = curvature::riemann(&g);
    let res = TensorField::from_fn(3, &[Var::Down, Var::Down, Var::Up], |ix| {
        let (a, b, c) = (ix[0], ix[1], ix[2]);
        let rv: Vec<Expr> = (0..3).map(|d| r.get(&[a, b, c, d]) * v.get(&[d])).collect();
        ddv.get(&[a, b, c]) - ddv.get(&[b, a, c]) - Expr::sum(rv.iter())
    });
    assert!(res.is_zero());
}

#[test]
fn flat_space_curvature_vanishes() {
    let g = fixture("flat3").unwrap().1;
    assert!(curvature::riemann(&g).is_zero());
    assert!(curvature::cotton_york(&g).is_zero());
}

#[test]
fn killing_closed_form_agrees_with_quantization() {
    for (name, s) in [("dipirro", "K"), ("lemma_product", "K"), ("flat3", "Krot")] {
        let (g, k) = sym(name, s);
        let n = g.dim();
        let q = quantize_killing(&k, &g).unwrap();
        let ll = quantize_order2(&Order2Symbol::k(&k), &Weights::ll(n), &g).unwrap();
        let mm = quantize_order2(&Order2Symbol::k(&k), &Weights::mm(n), &g).unwrap();
        assert!(q.sub(&ll).unwrap().is_zero(), "{name}");
        assert!(q.with_weights(Weights::mm(n)).sub(&mm).unwrap().is_zero(), "{name}");
    }
}

#[test]
fn killing_tensors_commute_with_yamabe_on_flat_space() {
    let (spec, g) = fixture("flat3").unwrap();
    for d in spec.symbols.iter().filter(|d| d.degree == 2) {
        let k = PolySymbol::from_decl(3, d);
        if !is_killing(&g, &k) {
            continue;
        }
        let q = quantize_killing(&k, &g).unwrap();
        let dy = yamabe(&g);
        let c = dy.compose(&q).unwrap().sub(&q.with_weights(Weights::mm(3)).compose(&dy).unwrap()).unwrap();
        assert!(c.is_zero(), "{}", d.name);
    }
}

#[test]
fn classify_flat_constant_tensor() {
    let (g, k) = sym("flat3", "K12");
    let r = classify(&g, &k, None, None, None).unwrap();
    assert_eq!(r.verdict, Verdict::Symmetry);
    assert!(r.operator_residual.unwrap().is_zero());
}

#[test]
fn classify_rejects_non_conformal_killing() {
    let g = fixture("flat3").unwrap().1;
    let x = Expr::coord("x1");
    let k = PolySymbol::new(TensorField::from_fn(3, &[Var::Up, Var::Up], |ix| {
        if ix == [0, 0] {
            &x * &x
        } else {
            Expr::zero()
        }
    }))
    .unwrap();
    assert!(!conformal_killing_op(&g, &k).unwrap().is_zero());
    let r = classify(&g, &k, None, None, None).unwrap();
    assert_eq!(r.verdict, Verdict::NotConformalKilling);
}

#[test]
fn conformally_flat_fixture_symbol_is_a_conformal_symmetry() {
    // flat obstruction vanishes; K is conformal Killing but not Killing
    let (g, k) = sym("conformally_flat3", "K");
    let r = classify(&g, &k, None, None, None).unwrap();
    assert!(r.obs.is_zero());
    assert!(r.conformal_killing);
    assert_eq!(
        r.verdict,
        if r.killing { Verdict::Symmetry } else { Verdict::ConformalSymmetry }
    );
}

#[test]
fn potential_solver_reports_non_closed_forms() {
    let (g, k) = sym("stackel", "K");
    let w = TensorField::from_fn(3, &[Var::Down], |ix| if ix[0] == 0 { Expr::coord("x2") } else { Expr::zero() });
    assert!(matches!(solve_potential(&g, &w, &k).unwrap(), Potential::NotClosed));
}
