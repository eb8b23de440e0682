//! Curvature of a metric and the conformal transformation laws.
//!
//! Sign convention: `[nabla_a, nabla_b] v^c = R_{ab}^c_d v^d`, with
//! `R_{ab}^c_d = d_a Gamma^c_{bd} - d_b Gamma^c_{ad} + Gamma^c_{ae} Gamma^e_{bd} - Gamma^c_{be} Gamma^e_{ad}`.
//! Layouts: Riemann and Weyl use slots `(a, b, c, d)` with `c` up; the
//! Cotton-York tensor is `A_{abc} = nabla_b P_{ca} - nabla_c P_{ba}`.

use crate::error::Result;
use crate::expr::{Expr, Rat};
use crate::tensor::{Geometry, TensorField, Var};

const DDUD: [Var; 4] = [Var::Down, Var::Down, Var::Up, Var::Down];
const DD: [Var; 2] = [Var::Down, Var::Down];
const DDD: [Var; 3] = [Var::Down, Var::Down, Var::Down];

#[derive(Clone, Debug)]
pub struct CurvaturePack {
    pub riemann: TensorField,
    pub ricci: TensorField,
    pub scalar: Expr,
    pub schouten: TensorField,
    pub j: Expr,
    pub weyl: TensorField,
    pub cotton: TensorField,
}

pub fn christoffel(g: &Geometry) -> &TensorField {
    g.christoffel()
}

/// Full curvature apparatus, computed once per geometry.
pub fn curvature(g: &Geometry) -> &CurvaturePack {
    g.curvature_cell().get_or_init(|| compute(g))
}

fn compute(g: &Geometry) -> CurvaturePack {
    let n = g.dim();
    let gam = g.christoffel();
    let riemann = TensorField::from_fn(n, &DDUD, |ix| {
        let (a, b, c, d) = (ix[0], ix[1], ix[2], ix[3]);
        if a == b {
            return Expr::zero();
        }
        let mut terms = vec![
            gam.get(&[c, b, d]).diff(g.x(a)),
            -gam.get(&[c, a, d]).diff(g.x(b)),
        ];
        for e in 0..n {
            let p = gam.get(&[c, a, e]);
            let q = gam.get(&[e, b, d]);
            if !p.is_zero() && !q.is_zero() {
                terms.push(p * q);
            }
            let p = gam.get(&[c, b, e]);
            let q = gam.get(&[e, a, d]);
            if !p.is_zero() && !q.is_zero() {
                terms.push(-(p * q));
            }
        }
        Expr::sum(terms.iter())
    });
    let ricci = riemann.contract(0, 2).expect("opposite variance");
    let scalar = ricci.trace_metric(g, 0, 1).expect("same variance").as_scalar().clone();
    let nn = n as i64;
    if n < 3 {
        // Schouten and its relatives need n >= 3
        return CurvaturePack {
            riemann,
            ricci,
            scalar,
            schouten: TensorField::zeros(n, &DD),
            j: Expr::zero(),
            weyl: TensorField::zeros(n, &DDUD),
            cotton: TensorField::zeros(n, &DDD),
        };
    }
    let k = Rat::new(1, 2 * (nn - 1));
    let schouten = TensorField::from_fn(n, &DD, |ix| {
        (ricci.get(ix) - g.g(ix[0], ix[1]) * &scalar.scale(&k)).scale(&Rat::new(1, nn - 2))
    });
    let j = schouten.trace_metric(g, 0, 1).expect("same variance").as_scalar().clone();
    // P_a^c with slots (a, c)
    let p_mixed = schouten.raise(g, 1).with_weight(Rat::ZERO);
    let delta = |i: usize, j: usize| if i == j { Expr::one() } else { Expr::zero() };
    let weyl = TensorField::from_fn(n, &DDUD, |ix| {
        let (a, b, c, d) = (ix[0], ix[1], ix[2], ix[3]);
        let t = [
            delta(c, a) * schouten.get(&[b, d]),
            -(delta(c, b) * schouten.get(&[a, d])),
            g.g(d, b) * p_mixed.get(&[a, c]),
            -(g.g(d, a) * p_mixed.get(&[b, c])),
        ];
        riemann.get(ix) - Expr::sum(t.iter())
    });
    let dp = schouten.covariant_derivative(g);
    let cotton = TensorField::from_fn(n, &DDD, |ix| {
        let (a, b, c) = (ix[0], ix[1], ix[2]);
        dp.get(&[b, c, a]) - dp.get(&[c, b, a])
    });
    CurvaturePack {
        riemann,
        ricci,
        scalar,
        schouten,
        j,
        weyl,
        cotton,
    }
}

pub fn riemann(g: &Geometry) -> &TensorField {
    &curvature(g).riemann
}

pub fn ricci(g: &Geometry) -> &TensorField {
    &curvature(g).ricci
}

pub fn scalar(g: &Geometry) -> &Expr {
    &curvature(g).scalar
}

pub fn schouten(g: &Geometry) -> (&TensorField, &Expr) {
    let c = curvature(g);
    (&c.schouten, &c.j)
}

pub fn weyl(g: &Geometry) -> &TensorField {
    &curvature(g).weyl
}

pub fn cotton_york(g: &Geometry) -> &TensorField {
    &curvature(g).cotton
}

/// `e^{2 upsilon} g`.
pub fn conformal_rescale(g: &Geometry, upsilon: &Expr) -> Result<Geometry> {
    g.conformal_rescale(upsilon)
}

/// `C_b^d_c^e` with slots `(b, d, c, e)`.
fn weyl_bdce(g: &Geometry) -> TensorField {
    // C_{bd}^e_c -> lower e, raise d
    let c = weyl(g);
    let n = g.dim();
    let lowered = c.lower(g, 2); // C_{bdec}
    let all_down = TensorField::from_fn(n, &[Var::Down; 4], |ix| lowered.get(&[ix[0], ix[1], ix[3], ix[2]]).clone());
    all_down.raise(g, 1).raise(g, 3)
}

/// Symmetrize over three lower slots and remove metric traces.
fn sym3_tf(t: &TensorField, slots: [usize; 3], g: &Geometry) -> TensorField {
    let s = t.symmetrize(&slots).expect("lower slots");
    let n = g.dim() as i64;
    let [a, b, c] = slots;
    // trace over (a, b), leaving slot c and the others
    let tr = s.trace_metric(g, a, b).expect("lower slots");
    let k = Rat::new(1, n + 2);
    let rank = t.rank();
    let mut out = TensorField::from_fn(t.dim(), t.vars(), |ix| {
        let mut terms = Vec::new();
        for (p, q, r) in [(a, b, c), (a, c, b), (b, c, a)] {
            let gm = g.g(ix[p], ix[q]);
            if gm.is_zero() {
                continue;
            }
            // trace tensor has slots of `t` without a and b; slot `r` plays the role of c
            let mut tix = Vec::with_capacity(rank - 2);
            for s in 0..rank {
                if s == a || s == b {
                    continue;
                }
                tix.push(if s == c { ix[r] } else { ix[s] });
            }
            terms.push(gm * tr.get(&tix));
        }
        s.get(ix) - Expr::sum(terms.iter()).scale(&k)
    });
    out = out.with_weight(t.weight().clone());
    out
}

/// Residuals of the conformal transformation laws for `g_hat = e^{2 upsilon} g`.
///
/// Every object is compared as a real tensor computed in `g_hat` against the
/// law evaluated in `g`, multiplied by `e^{-n w upsilon}` for a density
/// weight `w` of the transformed quantity.
pub fn transform_residuals(g: &Geometry, upsilon: &Expr) -> Result<Vec<(String, TensorField)>> {
    let n = g.dim();
    let nn = n as i64;
    let gh = g.conformal_rescale(upsilon)?;
    let cv = curvature(g);
    let ch = curvature(&gh);
    let e_m2 = upsilon.scale(&Rat::int(-2)).exp()?;
    let ups = TensorField::from_fn(n, &[Var::Down], |ix| upsilon.diff(g.x(ix[0])));
    let nab_ups = ups.covariant_derivative(g); // nabla_a Upsilon_b
    let ups_up = ups.raise(g, 0);
    let sq = Expr::sum((0..n).map(|r| ups.get(&[r]) * ups_up.get(&[r])).collect::<Vec<_>>().iter());
    let div_ups = Expr::sum((0..n).map(|r| nab_ups.raise(g, 0).get(&[r, r]).clone()).collect::<Vec<_>>().iter());
    let half = Rat::new(1, 2);
    let mut out = Vec::new();

    let p_law = TensorField::from_fn(n, &DD, |ix| {
        let (a, b) = (ix[0], ix[1]);
        cv.schouten.get(ix) - nab_ups.get(&[a, b]) + ups.get(&[a]) * ups.get(&[b])
            - (&sq * g.g(a, b)).scale(&half)
    });
    out.push(("P".to_string(), ch.schouten.sub(&p_law)));

    let j_law = &cv.j - &div_ups - sq.scale(&Rat::new(nn - 2, 2));
    out.push((
        "J".to_string(),
        TensorField::scalar(n, &ch.j - &(&e_m2 * &j_law)),
    ));

    let a_law = TensorField::from_fn(n, &DDD, |ix| {
        let (a, b, c) = (ix[0], ix[1], ix[2]);
        let t: Vec<Expr> = (0..n).map(|r| ups.get(&[r]) * cv.weyl.get(&[b, c, r, a])).collect();
        cv.cotton.get(ix) + Expr::sum(t.iter())
    });
    out.push(("A".to_string(), ch.cotton.sub(&a_law)));

    out.push(("C".to_string(), ch.weyl.sub(&cv.weyl)));

    // nabla_(a P_bc)_0; the classical law has coefficients 6, -4 on the last
    // two terms, the printed variant 4, -2
    let lhs = sym3_tf(&ch.schouten.covariant_derivative(&gh), [0, 1, 2], g);
    let nnu = nab_ups.covariant_derivative(g);
    let base = sym3_tf(&cv.schouten.covariant_derivative(g), [0, 1, 2], g);
    for (name, k1, k2) in [("nabla P", 6, -4), ("nabla P (printed)", 4, -2)] {
        let raw = TensorField::from_fn(n, &DDD, |ix| {
            let (a, b, c) = (ix[0], ix[1], ix[2]);
            Expr::sum(
                [
                    -nnu.get(&[a, b, c]).clone(),
                    (ups.get(&[a]) * nab_ups.get(&[b, c])).scale(&Rat::int(k1)),
                    (ups.get(&[a]) * ups.get(&[b]) * ups.get(&[c])).scale(&Rat::int(-4)),
                    (ups.get(&[a]) * cv.schouten.get(&[b, c])).scale(&Rat::int(k2)),
                ]
                .iter(),
            )
        });
        let rhs = base.add(&sym3_tf(&raw, [0, 1, 2], g));
        out.push((name.to_string(), lhs.sub(&rhs)));
    }

    // nabla_a J with J a density of weight 2/n
    let lhs = TensorField::from_fn(n, &[Var::Down], |ix| ch.j.diff(g.x(ix[0])));
    let ndiv = TensorField::from_fn(n, &[Var::Down], |ix| div_ups.diff(g.x(ix[0])));
    let rhs = TensorField::from_fn(n, &[Var::Down], |ix| {
        let a = ix[0];
        let t: Vec<Expr> = (0..n).map(|r| ups_up.get(&[r]) * nab_ups.get(&[r, a])).collect();
        let law = Expr::sum(
            [
                cv.j.diff(g.x(a)),
                -ndiv.get(&[a]).clone(),
                -Expr::sum(t.iter()).scale(&Rat::int(nn - 2)),
                (ups.get(&[a]) * &div_ups).scale(&Rat::int(2)),
                (ups.get(&[a]) * &cv.j).scale(&Rat::int(-2)),
                (ups.get(&[a]) * &sq).scale(&Rat::int(nn - 2)),
            ]
            .iter(),
        );
        &e_m2 * &law
    });
    out.push(("nabla J".to_string(), lhs.sub(&rhs)));

    // nabla_(a C_b^d_c)_0^e, a density of weight 2/n
    let c_h = weyl_bdce(&gh);
    let c_g = weyl_bdce(g);
    let lhs = sym3_tf(&c_h.covariant_derivative(&gh), [0, 1, 3], g);
    let dc = c_g.covariant_derivative(g); // slots (a, b, d, c, e)
    let c_b_e_c_r = &c_g; // C_b^e_c^r with slots (b, e, c, r)
    let main = TensorField::from_fn(n, dc.vars(), |ix| {
        let (a, b, d, c, e) = (ix[0], ix[1], ix[2], ix[3], ix[4]);
        dc.get(ix) - (ups.get(&[a]) * c_g.get(&[b, d, c, e])).scale(&Rat::int(4))
    });
    let main = sym3_tf(&main, [0, 1, 3], g);
    // 2 Upsilon_r delta_(a^(d C_b^e)_c)^r
    let extra = TensorField::from_fn(n, dc.vars(), |ix| {
        let (a, b, d, c, e) = (ix[0], ix[1], ix[2], ix[3], ix[4]);
        let mut terms = Vec::new();
        for (dd, ee) in [(d, e), (e, d)] {
            if a == dd {
                for r in 0..n {
                    terms.push(ups.get(&[r]) * c_b_e_c_r.get(&[b, ee, c, r]));
                }
            }
        }
        Expr::sum(terms.iter())
    });
    let extra = sym3_tf(&extra, [0, 1, 3], g);
    let rhs = main.add(&extra).mul_expr(&e_m2);
    out.push(("nabla C".to_string(), lhs.sub(&rhs)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomdsl::parse_expr;

    fn geom(coords: &[&str], rows: &[&[&str]]) -> Geometry {
        let c: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
        let env = crate::geomdsl::GeometrySpec::chart(coords);
        let g = rows
            .iter()
            .map(|r| r.iter().map(|s| parse_expr(s, &env).unwrap()).collect())
            .collect();
        Geometry::new(&c, g).unwrap()
    }

    #[test]
    fn polar_christoffel() {
        let g = geom(&["r", "th"], &[&["1", "0"], &["0", "r^2"]]);
        let gam = christoffel(&g);
        assert_eq!(gam.get(&[0, 1, 1]), &-Expr::coord("r"));
        assert_eq!(gam.get(&[1, 0, 1]), &Expr::coord("r").inv().unwrap());
        assert!(riemann(&g).is_zero());
    }

    #[test]
    fn stereographic_sphere_has_scalar_two() {
        let f = "4/(1+x^2+y^2)^2";
        let g = geom(&["x", "y"], &[&[f, "0"], &["0", f]]);
        assert_eq!(scalar(&g), &Expr::int(2));
    }

    #[test]
    fn weyl_vanishes_in_three_dimensions() {
        let g = geom(
            &["x1", "x2", "x3"],
            &[&["1+x2^2", "x1", "0"], &["x1", "2", "0"], &["0", "0", "1+x1^2"]],
        );
        assert!(weyl(&g).is_zero());
        let r = riemann(&g);
        assert!(!r.is_zero());
        // first Bianchi on the lowered tensor
        let n = g.dim();
        let low = r.lower(&g, 2);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let s = low.get(&[a, b, c, d]) + low.get(&[b, d, c, a]) + low.get(&[d, a, c, b]);
                        assert!(s.is_zero());
                    }
                }
            }
        }
    }

    #[test]
    fn laws_on_flat_space() {
        let g = Geometry::flat(&["x1", "x2", "x3"]);
        let u = Expr::func("u", &["x1", "x2", "x3"]);
        for (name, r) in transform_residuals(&g, &u).unwrap() {
            if name == "nabla P (printed)" {
                assert!(!r.is_zero());
            } else {
                assert!(r.is_zero(), "{name}: {:?}", r.nonzero().first());
            }
        }
    }

    fn product_geometry() -> Geometry {
        let h = Expr::func("h", &["x1", "x2"]);
        let c: Vec<String> = ["x1", "x2", "x3", "x4"].iter().map(|s| s.to_string()).collect();
        let rows = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| match (i, j) {
                        (0, 0) => h.inv().unwrap(),
                        _ => Expr::int((i == j) as i64),
                    })
                    .collect()
            })
            .collect();
        Geometry::new(&c, rows).unwrap()
    }

    #[test]
    fn divergence_of_weyl_is_cotton() {
        let g = product_geometry();
        let dc = weyl(&g).covariant_derivative(&g); // slots (r, b, c, r', a)
        let a = cotton_york(&g);
        let n = g.dim();
        for ix in 0..n * n * n {
            let (i, j, k) = (ix / (n * n), (ix / n) % n, ix % n);
            let t: Vec<Expr> = (0..n).map(|r| dc.get(&[r, j, k, r, i]).clone()).collect();
            let lhs = a.get(&[i, j, k]).scale(&Rat::int(n as i64 - 3));
            assert!((lhs - Expr::sum(t.iter())).is_zero(), "{i}{j}{k}");
        }
        // contracted Bianchi: nabla_b P^b_a = nabla_a J
        let (p, j) = schouten(&g);
        let dp = p.raise(&g, 0).covariant_derivative(&g);
        for a in 0..n {
            let t: Vec<Expr> = (0..n).map(|b| dp.get(&[b, b, a]).clone()).collect();
            assert!((Expr::sum(t.iter()) - j.diff(g.x(a))).is_zero());
        }
    }

    #[test]
    fn laws_on_product_geometry() {
        let g = product_geometry();
        assert!(!weyl(&g).is_zero());
        let u = Expr::func("u", &["x1", "x2", "x3", "x4"]);
        for (name, r) in transform_residuals(&g, &u).unwrap() {
            if name != "nabla P (printed)" {
                assert!(r.is_zero(), "{name}: {:?}", r.nonzero().first());
            }
        }
    }
}
