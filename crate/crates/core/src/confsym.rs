//! Conformal Killing operator, the obstruction operators and the
//! classification of second order (conformal) symmetries of the Yamabe
//! Laplacian.

use crate::curvature;
use crate::error::{Error, Result};
use crate::expr::{Expr, Rat};
use crate::quantize::{quantize_order2, yamabe, DiffOp, Order2Symbol, Weights};
use crate::symbols::{is_killing, PolySymbol};
use crate::tensor::{Geometry, TensorField, Var};

/// `G(S) = Pi_0(nabla^{(a_0} S^{a_1...a_k)})`, weight `2/n`.
pub fn conformal_killing_op(g: &Geometry, s: &PolySymbol) -> Result<PolySymbol> {
    if !s.weight().is_zero() {
        return Err(Error::WeightedOperand);
    }
    if s.degree() > 2 {
        return Err(Error::RankUnsupported(s.degree() + 1));
    }
    let d = s.tensor().covariant_derivative(g).raise(g, 0);
    let d = if d.rank() > 1 { d.symmetrize_all()? } else { d };
    let t = d.tracefree_project(g)?.with_weight(Rat::new(2, g.dim() as i64));
    PolySymbol::new(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FVariant {
    F,
    F1,
    F2,
}

/// Curvature tensors with the index placements the obstruction operators use.
struct CurvIdx {
    /// `C^r_{st}^a`, slots `(r, s, t, a)`.
    c_rsta: TensorField,
    /// `C^a_r^b_s`, slots `(a, r, b, s)`.
    c_arbs: TensorField,
    /// `A_{st}^a`, slots `(s, t, a)`.
    a_sta: TensorField,
}

fn curv_idx(g: &Geometry) -> CurvIdx {
    let cv = curvature::curvature(g);
    let c_down = cv.weyl.lower(g, 2);
    CurvIdx {
        c_rsta: c_down.raise(g, 0).raise(g, 3),
        c_arbs: c_down.raise(g, 0).raise(g, 2),
        a_sta: cv.cotton.raise(g, 2),
    }
}

fn sum_over<F: Fn(usize, usize, usize) -> Expr>(n: usize, f: F) -> Expr {
    let mut t = Vec::new();
    for r in 0..n {
        for s in 0..n {
            for u in 0..n {
                let e = f(r, s, u);
                if !e.is_zero() {
                    t.push(e);
                }
            }
        }
    }
    Expr::sum(t.iter())
}

/// The operators `F`, `F_1`, `F_2` on trace-free symbols of degree 2 or 3.
///
/// `(F f)^{a...} = C^r_{st}^{(a} nabla_r f^{...)_0 st} - (k+1) A_{st}^{(a} f^{...)_0 st}`
/// with `A_{abc} = nabla_b P_{ca} - nabla_c P_{ba}` and `C_{abcd}` the Weyl
/// tensor with the last slot of `R_{ab}^c_d` lowered into third place.
/// `F` is conformally invariant for `k = 2`; for `k = 3` the invariant
/// operators are `F_1` and `F_2`.
pub fn f_operator(g: &Geometry, s: &PolySymbol, variant: FVariant) -> Result<PolySymbol> {
    let n = g.dim();
    let k = s.degree();
    if !s.weight().is_zero() {
        return Err(Error::WeightedOperand);
    }
    if !(2..=3).contains(&k) {
        return Err(Error::RankUnsupported(k));
    }
    if k == 2 && variant != FVariant::F {
        return Err(Error::RankUnsupported(k));
    }
    if !s.tensor().tracefree_project(g)?.equiv(s.tensor()) {
        return Err(Error::NotTraceFree);
    }
    let ci = curv_idx(g);
    let f = s.tensor();
    let df = f.covariant_derivative(g); // (r, f slots...)
    let w = Rat::new(2, n as i64);
    let kk = k as i64;
    let vars = vec![Var::Up; k - 1];
    // C^r_st^a nabla_r f^{b st} and A_st^a f^{b st}
    let c_term = TensorField::from_fn(n, &vars, |ix| {
        let a = ix[0];
        sum_over(n, |r, s_, t| {
            let c = ci.c_rsta.get(&[r, s_, t, a]);
            if c.is_zero() {
                return Expr::zero();
            }
            let mut fix = vec![r];
            fix.extend_from_slice(&ix[1..]);
            fix.push(s_);
            fix.push(t);
            c * df.get(&fix)
        })
    });
    let a_term = TensorField::from_fn(n, &vars, |ix| {
        let a = ix[0];
        let mut terms = Vec::new();
        for s_ in 0..n {
            for t in 0..n {
                let c = ci.a_sta.get(&[s_, t, a]);
                if c.is_zero() {
                    continue;
                }
                let mut fix = ix[1..].to_vec();
                fix.push(s_);
                fix.push(t);
                terms.push(c * f.get(&fix));
            }
        }
        Expr::sum(terms.iter())
    });
    let proj = |t: TensorField| -> Result<TensorField> {
        let t = if t.rank() > 1 { t.symmetrize_all()? } else { t };
        Ok(t.tracefree_project(g)?.with_weight(w.clone()))
    };
    let f_main = proj(c_term.sub(&a_term.scale(&Rat::int(kk + 1))))?;
    if variant == FVariant::F {
        return PolySymbol::new(f_main);
    }
    // k = 3 only: C^{(a}_r^{b)}_s nabla_t f^{rst}
    let cdf = TensorField::from_fn(n, &vars, |ix| {
        let (a, b) = (ix[0], ix[1]);
        sum_over(n, |r, s_, t| {
            let c = ci.c_arbs.get(&[a, r, b, s_]);
            if c.is_zero() {
                return Expr::zero();
            }
            c * df.get(&[t, r, s_, t])
        })
    });
    let cdf = proj(cdf)?;
    let m = Rat::int(n as i64 + 2 * kk - 2);
    match variant {
        FVariant::F1 => PolySymbol::new(f_main.add(&cdf.scale(&(&Rat::int(kk - 2) / &m)))),
        _ => {
            // (nabla_r C_s^a_t^b) f^{rst}
            let cv = curvature::curvature(g);
            let c_sat_b = cv.weyl.lower(g, 2).raise(g, 1).raise(g, 3);
            let dc = c_sat_b.covariant_derivative(g); // (r, s, a, t, b)
            let dcf = TensorField::from_fn(n, &vars, |ix| {
                let (a, b) = (ix[0], ix[1]);
                sum_over(n, |r, s_, t| {
                    let fr = f.get(&[r, s_, t]);
                    if fr.is_zero() {
                        return Expr::zero();
                    }
                    dc.get(&[r, s_, a, t, b]) * fr
                })
            });
            let dcf = proj(dcf)?;
            let af = proj(a_term)?;
            let t = cdf
                .scale(&Rat::int(4))
                .add(&dcf.scale(&m))
                .add(&af.scale(&(&Rat::int(2) * &m)));
            PolySymbol::new(t)
        }
    }
}

/// `Obs(K) = -2(n-2)/(3(n+1)) F(Pi_0 K)` for degree 2, zero below.
///
/// The sign makes `Delta_Y o Q_{l0,l0}(K) - Q_{m0,m0}(K) o Delta_Y = Q_{l0,m0}(Obs(K))`
/// hold for conformal Killing `K` with the curvature conventions of this crate.
pub fn obs(g: &Geometry, k: &PolySymbol) -> Result<PolySymbol> {
    let n = g.dim();
    let w = Rat::new(2, n as i64);
    match k.degree() {
        0 => Ok(PolySymbol::zero(n, 0).with_weight(w)),
        1 => Ok(PolySymbol::zero(n, 0).with_weight(w)),
        2 => {
            let nn = n as i64;
            let k0 = k.tracefree(g)?;
            Ok(f_operator(g, &k0, FVariant::F)?.scale(&Rat::new(-2 * (nn - 2), 3 * (nn + 1))))
        }
        d => Err(Error::RankUnsupported(d)),
    }
}

/// Lower a degree-1 symbol to a one-form.
pub fn flat(g: &Geometry, v: &PolySymbol) -> TensorField {
    v.tensor().lower(g, 0).with_weight(Rat::ZERO)
}

/// Exterior derivative of a lower-index form of rank 0, 1 or 2, with
/// `(d w)_{ij} = d_i w_j - d_j w_i`.
pub fn exterior_d(g: &Geometry, w: &TensorField) -> Result<TensorField> {
    let n = g.dim();
    let r = w.rank();
    if w.vars().iter().any(|v| *v != Var::Down) {
        return Err(Error::MixedVariance);
    }
    if r > 2 {
        return Err(Error::RankUnsupported(r));
    }
    let vars = vec![Var::Down; r + 1];
    Ok(TensorField::from_fn(n, &vars, |ix| {
        let mut terms = Vec::with_capacity(r + 1);
        for j in 0..=r {
            let mut rest: Vec<usize> = ix.to_vec();
            let i = rest.remove(j);
            let d = w.get(&rest).diff(g.x(i));
            terms.push(if j % 2 == 0 { d } else { -d });
        }
        Expr::sum(terms.iter())
    }))
}

/// Outcome of the potential search for `omega + 2 df = 0`.
#[derive(Clone, Debug)]
pub enum Potential {
    Found(Expr),
    NotClosed,
    AnsatzExhausted,
}

/// Ansatz basis for the potential: `Ric(K)`, `Sc Tr K`, `nabla_a nabla_b K^{ab}`, `Delta Tr K`.
pub fn potential_basis(g: &Geometry, k: &PolySymbol) -> Vec<(String, Expr)> {
    let n = g.dim();
    let cv = curvature::curvature(g);
    let kt = k.tensor();
    let mut ric_k = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if !kt.get(&[a, b]).is_zero() {
                ric_k.push(cv.ricci.get(&[a, b]) * kt.get(&[a, b]));
            }
        }
    }
    let tr = k.trace(g).map(|t| t.comp(&[]).clone()).unwrap_or_else(|_| Expr::zero());
    let dk = kt.covariant_derivative(g);
    let div: Vec<Expr> = (0..n)
        .map(|b| {
            let t: Vec<Expr> = (0..n).map(|a| dk.get(&[a, a, b]).clone()).collect();
            Expr::sum(t.iter())
        })
        .collect();
    vec![
        ("Ric(K)".to_string(), Expr::sum(ric_k.iter())),
        ("Sc*TrK".to_string(), &cv.scalar * &tr),
        ("div div K".to_string(), crate::quantize::divergence(g, &div)),
        ("Lap TrK".to_string(), crate::quantize::laplacian(g, &tr)),
    ]
}

/// Find `f` in the span of [`potential_basis`] with `omega + 2 df = 0`.
pub fn solve_potential(g: &Geometry, omega: &TensorField, k: &PolySymbol) -> Result<Potential> {
    if !exterior_d(g, omega)?.is_zero() {
        return Ok(Potential::NotClosed);
    }
    let n = g.dim();
    if omega.is_zero() {
        return Ok(Potential::Found(Expr::zero()));
    }
    let basis: Vec<Expr> = potential_basis(g, k).into_iter().map(|b| b.1).filter(|b| !b.is_zero()).collect();
    if basis.is_empty() {
        return Ok(Potential::AnsatzExhausted);
    }
    // sample 2 d(basis) and -omega at seeded points, solve least squares,
    // reconstruct rationals, then verify exactly
    let grads: Vec<Vec<Expr>> = basis
        .iter()
        .map(|b| (0..n).map(|i| b.diff(g.x(i)).scale(&Rat::int(2))).collect())
        .collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut all: Vec<&Expr> = grads.iter().flatten().collect();
    all.extend(omega.components());
    for ctx in crate::suite::sample_contexts(&all, 7, 12) {
        for i in 0..n {
            let row: Option<Vec<f64>> = grads.iter().map(|gr| ctx.eval(&gr[i]).ok()).collect();
            let r = ctx.eval(omega.get(&[i])).ok();
            if let (Some(row), Some(r)) = (row, r) {
                rows.push(row);
                rhs.push(-r);
            }
        }
    }
    let Some(sol) = least_squares(&rows, &rhs) else {
        return Ok(Potential::AnsatzExhausted);
    };
    let coeffs: Vec<Rat> = sol.iter().map(|&x| rationalize(x)).collect();
    let f = Expr::sum(
        basis
            .iter()
            .zip(&coeffs)
            .map(|(b, c)| b.scale(c))
            .collect::<Vec<_>>()
            .iter(),
    );
    let ok = (0..n).all(|i| (omega.get(&[i]) + &f.diff(g.x(i)).scale(&Rat::int(2))).is_zero());
    Ok(if ok { Potential::Found(f) } else { Potential::AnsatzExhausted })
}

fn least_squares(rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let m = rows.first()?.len();
    // normal equations with partial pivoting
    let mut a = vec![vec![0.0; m + 1]; m];
    for (row, &b) in rows.iter().zip(rhs) {
        for i in 0..m {
            for j in 0..m {
                a[i][j] += row[i] * row[j];
            }
            a[i][m] += row[i] * b;
        }
    }
    let scale = a.iter().map(|r| r[..m].iter().fold(0.0f64, |s, x| s.max(x.abs()))).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let mut sol = vec![0.0; m];
    let mut piv_cols = Vec::new();
    let mut row = 0;
    for col in 0..m {
        let p = (row..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[p][col].abs() < 1e-10 * scale {
            continue;
        }
        a.swap(row, p);
        for r in 0..m {
            if r != row {
                let f = a[r][col] / a[row][col];
                for c in col..=m {
                    a[r][c] -= f * a[row][c];
                }
            }
        }
        piv_cols.push((row, col));
        row += 1;
        if row == m {
            break;
        }
    }
    for (r, c) in piv_cols {
        sol[c] = a[r][m] / a[r][c];
    }
    Some(sol)
}

/// Closest rational with a small denominator.
fn rationalize(x: f64) -> Rat {
    if !x.is_finite() {
        return Rat::ZERO;
    }
    let mut best = (f64::INFINITY, Rat::ZERO);
    for d in 1..=720i64 {
        let nmr = (x * d as f64).round();
        let err = (x - nmr / d as f64).abs();
        if err < best.0 - 1e-12 {
            best = (err, Rat::new(nmr as i64, d));
        }
        if err < 1e-9 {
            break;
        }
    }
    best.1
}

/// `Delta_Y o Q_{l0,l0}(S) - Q_{m0,m0}(S) o Delta_Y - Q_{l0,m0}(2 G(S) + Obs(S))`.
pub fn qdelta_residual(g: &Geometry, s: &PolySymbol) -> Result<DiffOp> {
    let n = g.dim();
    let gs = conformal_killing_op(g, s)?;
    if s.degree() == 2 && !gs.is_zero() {
        return Err(Error::UnsupportedGenericDegree2);
    }
    let sym = Order2Symbol::from_symbol(s)?;
    let dy = yamabe(g);
    let lhs = dy
        .compose(&quantize_order2(&sym, &Weights::ll(n), g)?)?
        .sub(&quantize_order2(&sym, &Weights::mm(n), g)?.compose(&dy)?)?;
    let mut rhs_sym = gs.scale(&Rat::int(2));
    if s.degree() == 2 {
        rhs_sym = obs(g, s)?;
    }
    let rhs = quantize_lm(g, &rhs_sym)?;
    lhs.sub(&rhs)
}

/// `Q_{l0,m0}` on a symbol of degree at most 1, or a trace-free symbol of degree 2.
///
/// At `delta = 2/n` the coefficients `beta_2`, `beta_4` are singular but
/// multiply `Tr S`, so trace-free symbols use the remaining finite ones.
pub fn quantize_lm(g: &Geometry, s: &PolySymbol) -> Result<DiffOp> {
    let n = g.dim();
    let w = Weights::lm(n);
    if s.degree() < 2 {
        return quantize_order2(&Order2Symbol::from_symbol(s)?, &w, g);
    }
    if s.degree() > 2 {
        return Err(Error::RankUnsupported(s.degree()));
    }
    if !s.trace(g)?.is_zero() {
        return Err(Error::ExcludedDelta(w.delta().to_string()));
    }
    // limits at lambda0, delta0: beta_1 = 1, beta_3 = (n-2)/(4(n-1)), beta_5 = -beta_3, beta_6 = 0
    let nn = n as i64;
    let b3 = Rat::new(nn - 2, 4 * (nn - 1));
    crate::quantize::quantize_with_betas(
        g,
        s.tensor(),
        [Rat::int(1), Rat::ZERO, b3.clone(), Rat::ZERO, -b3, Rat::ZERO],
        w,
    )
}

/// Top symbol `sigma_3(Delta_Y o Q_{l0,l0}(S) - Q_{m0,m0}(S) o Delta_Y)` for degree-2 `S`.
pub fn sigma3(g: &Geometry, s: &PolySymbol) -> Result<PolySymbol> {
    let n = g.dim();
    let sym = Order2Symbol::from_symbol(s)?;
    let dy = yamabe(g);
    let lhs = dy
        .compose(&quantize_order2(&sym, &Weights::ll(n), g)?)?
        .sub(&quantize_order2(&sym, &Weights::mm(n), g)?.compose(&dy)?)?;
    Ok(lhs.principal_symbol(s.degree() + 1).with_weight(Rat::ZERO))
}

/// `sigma_3(...) - 2 G(S)`; vanishes for every degree-2 `S`.
pub fn sigma3_residual(g: &Geometry, s: &PolySymbol) -> Result<PolySymbol> {
    let gs = conformal_killing_op(g, s)?.with_weight(Rat::ZERO);
    Ok(sigma3(g, s)?.sub(&gs.scale(&Rat::int(2))))
}

/// Coefficients `x`, `y` of `F_1`, `F_2` in the higher order identity.
pub fn xy_coeffs(n: usize, k: usize) -> (Rat, Rat) {
    let (n, k) = (n as i64, k as i64);
    let d = 3 * (n + 2 * k - 2) * (n + 2 * k - 3);
    let x = Rat::new(k * (k - 1) * (n + 2 * k - 6), d);
    let y = Rat::new(k * (k - 1) * (k - 2) * (n + 2 * k), 4 * d);
    (x, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Symmetry,
    ConformalSymmetry,
    Obstructed,
    NotConformalKilling,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Symmetry => "symmetry",
            Verdict::ConformalSymmetry => "conformal-symmetry",
            Verdict::Obstructed => "obstructed",
            Verdict::NotConformalKilling => "not-conformal-killing",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ObsReport {
    pub killing: bool,
    pub conformal_killing: bool,
    pub vector_killing: Option<bool>,
    pub vector_conformal_killing: Option<bool>,
    pub obs: PolySymbol,
    pub obs_flat: TensorField,
    pub d_obs: TensorField,
    pub potential: Option<Expr>,
    pub potential_supplied: bool,
    pub ansatz_exhausted: bool,
    /// Components of `Obs^flat + 2 df`.
    pub potential_residual: Option<TensorField>,
    /// `Delta_Y o (Q_{l0,l0}(K + X) + f) - (Q_{m0,m0}(K + X) + f) o Delta_Y`.
    pub operator_residual: Option<DiffOp>,
    pub operator: Option<DiffOp>,
    pub verdict: Verdict,
    /// `lambda0/(1 - delta0)` used for degree-1 terms at `(lambda0, mu0)`.
    pub lm_divergence_coeff: Rat,
}

/// Classify the degree-2 symbol `K` (optionally with `X` and `f`).
///
/// Killing tests and the operator check use `g`; the obstruction and the
/// potential ansatz use `g_hat` when given. `Obs^flat` is the same one-form
/// in every metric of the conformal class.
pub fn classify(
    g: &Geometry,
    k: &PolySymbol,
    x: Option<&PolySymbol>,
    f: Option<&Expr>,
    g_hat: Option<&Geometry>,
) -> Result<ObsReport> {
    let n = g.dim();
    if k.degree() != 2 {
        return Err(Error::RankUnsupported(k.degree()));
    }
    let gh = g_hat.unwrap_or(g);
    let killing = is_killing(g, k);
    let conformal_killing = conformal_killing_op(g, k)?.is_zero();
    let (vector_killing, vector_conformal_killing) = match x {
        Some(x) => (Some(is_killing(g, x)), Some(conformal_killing_op(g, x)?.is_zero())),
        None => (None, None),
    };
    let o = obs(gh, k)?;
    let obs_flat = flat(gh, &o);
    let d_obs = exterior_d(gh, &obs_flat)?;
    let lm_divergence_coeff = {
        let w = Weights::lm(n);
        &w.lambda / &(&Rat::int(1) - &w.delta())
    };
    let mut rep = ObsReport {
        killing,
        conformal_killing,
        vector_killing,
        vector_conformal_killing,
        obs: o,
        obs_flat,
        d_obs,
        potential: None,
        potential_supplied: f.is_some(),
        ansatz_exhausted: false,
        potential_residual: None,
        operator_residual: None,
        operator: None,
        verdict: Verdict::Obstructed,
        lm_divergence_coeff,
    };
    if !conformal_killing || vector_conformal_killing == Some(false) {
        rep.verdict = Verdict::NotConformalKilling;
        return Ok(rep);
    }
    if !rep.d_obs.is_zero() {
        rep.verdict = Verdict::Obstructed;
        return Ok(rep);
    }
    let pot = match f {
        Some(f) => Some(f.clone()),
        None => match solve_potential(gh, &rep.obs_flat, k)? {
            Potential::Found(f) => Some(f),
            Potential::NotClosed => None,
            Potential::AnsatzExhausted => {
                rep.ansatz_exhausted = true;
                None
            }
        },
    };
    if let Some(pf) = &pot {
        let res = TensorField::from_fn(n, &[Var::Down], |ix| {
            rep.obs_flat.get(ix) + &pf.diff(g.x(ix[0])).scale(&Rat::int(2))
        });
        rep.potential_residual = Some(res);
    }
    rep.potential = pot.clone();
    let pot_ok = rep.potential_residual.as_ref().is_some_and(|r| r.is_zero());
    let symmetric = killing && vector_killing.unwrap_or(true);
    // closed but no potential from the ansatz: exactness is decided by the
    // chart (star-shaped domains), so the conformal verdict stands
    rep.verdict = if symmetric { Verdict::Symmetry } else { Verdict::ConformalSymmetry };
    if let Some(pf) = pot.filter(|_| pot_ok) {
        let sym = Order2Symbol {
            k: Some(k.tensor().clone()),
            x: x.map(|x| (0..n).map(|i| x.comp(&[i]).clone()).collect()),
            f: Some(pf),
        };
        let d1 = quantize_order2(&sym, &Weights::ll(n), g)?;
        let dy = yamabe(g);
        let lhs = dy.compose(&d1)?;
        let d2 = quantize_order2(&sym, &Weights::mm(n), g)?;
        let r = lhs.sub(&d2.compose(&dy)?)?;
        rep.operator = Some(d1);
        rep.operator_residual = Some(r);
    }
    Ok(rep)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomdsl::{parse_expr, FuncDecl, GeometrySpec};

    fn e(s: &str, coords: &[&str]) -> Expr {
        let mut spec = GeometrySpec::chart(coords);
        let fs: [(&str, &[&str]); 10] = [
            ("A", &["x1", "x2"]),
            ("B", &["x1", "x2"]),
            ("gam", &["x1", "x2"]),
            ("c", &["x3"]),
            ("h", &["x1", "x2"]),
            ("U", &["x1", "x3"]),
            ("Q", &["x1", "x2", "x3"]),
            ("u", &["x2"]),
            ("v", &["x3"]),
            ("a", &[]),
        ];
        for (name, args) in fs {
            spec.functions.push(FuncDecl {
                name: name.into(),
                args: args.iter().map(|a| a.to_string()).collect(),
            });
        }
        parse_expr(s, &spec).unwrap()
    }

    fn geom(coords: &[&str], rows: &[&[&str]]) -> Geometry {
        let names: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
        let m = rows.iter().map(|r| r.iter().map(|s| e(s, coords)).collect()).collect();
        Geometry::new(&names, m).unwrap()
    }

    const X4: [&str; 4] = ["x1", "x2", "x3", "x4"];

    fn lemma() -> Geometry {
        geom(
            &X4,
            &[&["1/h(x1,x2)", "0", "0", "0"], &["0", "1", "0", "0"], &["0", "0", "1", "0"], &["0", "0", "0", "1"]],
        )
    }

    #[test]
    fn f_is_conformally_invariant() {
        let g = lemma();
        let ups = e("U(x1,x3)", &X4);
        let gh = g.conformal_rescale(&ups).unwrap();
        let s = PolySymbol::new(TensorField::from_fn(4, &[Var::Up, Var::Up], |ix| match (ix[0].min(ix[1]), ix[0].max(ix[1])) {
            (2, 2) => e("1", &X4),
            (0, 2) => e("x3", &X4),
            _ => Expr::zero(),
        }))
        .unwrap()
        .tracefree(&g)
        .unwrap();
        let f = f_operator(&g, &s, FVariant::F).unwrap();
        let fh = f_operator(&gh, &s, FVariant::F).unwrap();
        let e2 = (ups.scale(&Rat::int(-2))).exp().unwrap();
        assert!(fh.tensor().equiv(&f.tensor().mul_expr(&e2)));
    }

    #[test]
    fn stackel_obstruction_is_not_closed() {
        let x = ["x1", "x2", "x3"];
        let g = geom(
            &x,
            &[
                &["Q(x1,x2,x3)", "0", "0"],
                &["0", "Q(x1,x2,x3)*(u(x2)+v(x3))", "0"],
                &["0", "0", "Q(x1,x2,x3)*(u(x2)+v(x3))"],
            ],
        );
        let k = PolySymbol::new(TensorField::from_fn(3, &[Var::Up, Var::Up], |ix| match (ix[0], ix[1]) {
            (1, 1) => e("v(x3)/(u(x2)+v(x3))", &x),
            (2, 2) => e("-u(x2)/(u(x2)+v(x3))", &x),
            _ => Expr::zero(),
        }))
        .unwrap();
        assert!(conformal_killing_op(&g, &k).unwrap().is_zero());
        let w = flat(&g, &obs(&g, &k).unwrap());
        let dw = exterior_d(&g, &w).unwrap();
        let l = e("log(u(x2)+v(x3))", &x);
        let d23 = l.diff_name("x2").diff_name("x3");
        let expect = (d23.diff_name("x2").diff_name("x2") + d23.diff_name("x3").diff_name("x3")).scale(&Rat::new(1, 4));
        assert!(dw.get(&[1, 2]).equiv(&expect), "{}", dw.get(&[1, 2]));
    }

    #[test]
    fn minkowski_reduction_obstruction() {
        let x = ["r", "phi", "z"];
        let g = geom(&x, &[&["1", "0", "0"], &["0", "r^2*z^2/(z^2-a^2*r^2)", "0"], &["0", "0", "1"]]);
        let k = PolySymbol::new(TensorField::from_fn(3, &[Var::Up, Var::Up], |ix| match (ix[0], ix[1]) {
            (0, 0) => Expr::one(),
            (1, 1) => e("1/r^2", &x),
            _ => Expr::zero(),
        }))
        .unwrap();
        let w = flat(&g, &obs(&g, &k).unwrap());
        let dw = exterior_d(&g, &w).unwrap();
        let expect = e("3/2*(a+a^3)*((z-a*r)^(-4)-(z+a*r)^(-4))", &x);
        assert!(dw.get(&[0, 2]).equiv(&expect), "{}", dw.get(&[0, 2]));
    }

    #[test]
    fn dipirro_potential_in_hatted_metric() {
        let x = ["x1", "x2", "x3"];
        let gh = geom(&x, &[&["1/A(x1,x2)", "0", "0"], &["0", "1/B(x1,x2)", "0"], &["0", "0", "1"]]);
        let k = PolySymbol::new(TensorField::from_fn(3, &[Var::Up, Var::Up], |ix| match (ix[0], ix[1]) {
            (0, 0) => e("c(x3)*A(x1,x2)/(gam(x1,x2)+c(x3))", &x),
            (1, 1) => e("c(x3)*B(x1,x2)/(gam(x1,x2)+c(x3))", &x),
            (2, 2) => e("-gam(x1,x2)/(gam(x1,x2)+c(x3))", &x),
            _ => Expr::zero(),
        }))
        .unwrap();
        let cv = curvature::curvature(&gh);
        let mut t = Vec::new();
        for a in 0..3 {
            t.push((cv.ricci.get(&[a, a]).scale(&Rat::int(3)) - &cv.scalar * gh.g(a, a)) * k.comp(&[a, a]));
        }
        let f = Expr::sum(t.iter()).scale(&Rat::new(1, 16));
        let w = flat(&gh, &obs(&gh, &k).unwrap());
        for i in 0..3 {
            assert!((w.get(&[i]) + &f.diff(gh.x(i)).scale(&Rat::int(2))).is_zero());
        }
        match solve_potential(&gh, &w, &k).unwrap() {
            Potential::Found(p) => assert!(p.equiv(&f), "{p}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn higher_operators_are_conformally_invariant() {
        let g = lemma();
        let ups = e("U(x1,x3)", &X4);
        let gh = g.conformal_rescale(&ups).unwrap();
        let s = PolySymbol::new(TensorField::from_fn(4, &[Var::Up; 3], |ix| {
            let mut v = ix.to_vec();
            v.sort_unstable();
            match v.as_slice() {
                [2, 2, 2] => e("1", &X4),
                [0, 1, 2] => e("x3", &X4),
                [0, 0, 3] => e("x1", &X4),
                _ => Expr::zero(),
            }
        }))
        .unwrap()
        .tracefree(&g)
        .unwrap();
        let e2 = (ups.scale(&Rat::int(-2))).exp().unwrap();
        for v in [FVariant::F1, FVariant::F2] {
            let f = f_operator(&g, &s, v).unwrap();
            let fh = f_operator(&gh, &s, v).unwrap();
            assert!(fh.tensor().equiv(&f.tensor().mul_expr(&e2)), "{v:?}");
        }
    }
}
