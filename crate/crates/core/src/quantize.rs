//! Differential operators between densities, trivialized by `|Vol_g|`, and
//! the order-2 natural conformally invariant quantization.

use crate::curvature;
use crate::error::{Error, Result};
use crate::expr::{Expr, GenId, Rat};
use crate::symbols::{is_killing, PolySymbol};
use crate::tensor::{unflatten, Geometry, TensorField, Var};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Highest operator order `compose` accepts.
pub const ORDER_CAP: usize = 4;

/// Source and target density weights of an operator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Weights {
    pub lambda: Rat,
    pub mu: Rat,
}

impl Weights {
    pub fn new(lambda: Rat, mu: Rat) -> Weights {
        Weights { lambda, mu }
    }

    pub fn delta(&self) -> Rat {
        &self.mu - &self.lambda
    }

    pub fn lambda0(n: usize) -> Rat {
        Rat::new(n as i64 - 2, 2 * n as i64)
    }

    pub fn mu0(n: usize) -> Rat {
        Rat::new(n as i64 + 2, 2 * n as i64)
    }

    pub fn delta0(n: usize) -> Rat {
        Rat::new(2, n as i64)
    }

    /// `(lambda0, lambda0)`.
    pub fn ll(n: usize) -> Weights {
        Weights::new(Self::lambda0(n), Self::lambda0(n))
    }

    /// `(mu0, mu0)`.
    pub fn mm(n: usize) -> Weights {
        Weights::new(Self::mu0(n), Self::mu0(n))
    }

    /// `(lambda0, mu0)`: the weights of the Yamabe Laplacian.
    pub fn lm(n: usize) -> Weights {
        Weights::new(Self::lambda0(n), Self::mu0(n))
    }

    /// `(mu0, lambda0)`.
    pub fn ml(n: usize) -> Weights {
        Weights::new(Self::mu0(n), Self::lambda0(n))
    }

    /// Weights of the adjoint, `(1 - mu, 1 - lambda)`.
    pub fn dual(&self) -> Weights {
        let one = Rat::int(1);
        Weights::new(&one - &self.mu, &one - &self.lambda)
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lambda, self.mu)
    }
}

/// Exponent vector of a coordinate derivative `d^alpha`.
pub type MultiIndex = Vec<u8>;

/// `sum_alpha c_alpha d^alpha` acting on functions of the chart.
#[derive(Clone)]
pub struct DiffOp {
    ids: Arc<[GenId]>,
    names: Arc<[String]>,
    weights: Weights,
    terms: BTreeMap<MultiIndex, Expr>,
}

impl fmt::Debug for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DiffOp{} {}", self.weights, self)
    }
}

fn binom(n: u8, k: u8) -> i64 {
    let mut r: i64 = 1;
    for i in 0..k as i64 {
        r = r * (n as i64 - i) / (i + 1);
    }
    r
}

/// All `gamma <= alpha` componentwise.
fn sub_indices(alpha: &[u8]) -> Vec<MultiIndex> {
    let mut out = vec![Vec::with_capacity(alpha.len())];
    for &a in alpha {
        let mut next = Vec::with_capacity(out.len() * (a as usize + 1));
        for g in &out {
            for k in 0..=a {
                let mut h = g.clone();
                h.push(k);
                next.push(h);
            }
        }
        out = next;
    }
    out
}

impl DiffOp {
    fn empty(g: &Geometry, weights: Weights) -> DiffOp {
        let ids: Vec<GenId> = (0..g.dim()).map(|i| g.x(i)).collect();
        DiffOp {
            ids: ids.into(),
            names: g.coords().to_vec().into(),
            weights,
            terms: BTreeMap::new(),
        }
    }

    fn like(&self, weights: Weights, terms: BTreeMap<MultiIndex, Expr>) -> DiffOp {
        DiffOp {
            ids: self.ids.clone(),
            names: self.names.clone(),
            weights,
            terms,
        }
    }

    pub fn zero(g: &Geometry, weights: Weights) -> DiffOp {
        Self::empty(g, weights)
    }

    /// The zero operator on the same chart and weights.
    pub fn zero_like(o: &DiffOp) -> DiffOp {
        o.like(o.weights.clone(), BTreeMap::new())
    }

    /// Multiplication by `f`.
    pub fn mult(g: &Geometry, f: Expr, weights: Weights) -> DiffOp {
        Self::from_terms(g, weights, [(vec![0; g.dim()], f)])
    }

    /// `d_i`.
    pub fn partial(g: &Geometry, i: usize, weights: Weights) -> DiffOp {
        let mut a = vec![0; g.dim()];
        a[i] = 1;
        Self::from_terms(g, weights, [(a, Expr::one())])
    }

    pub fn from_terms<I: IntoIterator<Item = (MultiIndex, Expr)>>(g: &Geometry, weights: Weights, it: I) -> DiffOp {
        let mut op = Self::empty(g, weights);
        let mut groups: BTreeMap<MultiIndex, Vec<Expr>> = BTreeMap::new();
        for (a, c) in it {
            assert_eq!(a.len(), g.dim());
            groups.entry(a).or_default().push(c);
        }
        op.terms = collect_groups(groups);
        op
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn with_weights(mut self, w: Weights) -> DiffOp {
        self.weights = w;
        self
    }

    pub fn dim(&self) -> usize {
        self.ids.len()
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, Expr> {
        &self.terms
    }

    pub fn coeff(&self, alpha: &[u8]) -> Expr {
        self.terms.get(alpha).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn order(&self) -> usize {
        self.terms.keys().map(|a| a.iter().map(|&e| e as usize).sum()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn check_weights(&self, o: &DiffOp, what: &str) -> Result<()> {
        if self.weights != o.weights {
            return Err(Error::WeightMismatch(format!(
                "{what}: {} vs {}",
                self.weights, o.weights
            )));
        }
        Ok(())
    }

    fn combine(&self, o: &DiffOp, sign: i64) -> DiffOp {
        let mut groups: BTreeMap<MultiIndex, Vec<Expr>> = BTreeMap::new();
        for (a, c) in &self.terms {
            groups.entry(a.clone()).or_default().push(c.clone());
        }
        for (a, c) in &o.terms {
            groups.entry(a.clone()).or_default().push(c.scale(&Rat::int(sign)));
        }
        self.like(self.weights.clone(), collect_groups(groups))
    }

    pub fn add(&self, o: &DiffOp) -> Result<DiffOp> {
        self.check_weights(o, "add")?;
        Ok(self.combine(o, 1))
    }

    pub fn sub(&self, o: &DiffOp) -> Result<DiffOp> {
        self.check_weights(o, "sub")?;
        Ok(self.combine(o, -1))
    }

    pub fn scale(&self, c: &Rat) -> DiffOp {
        let terms = self
            .terms
            .iter()
            .map(|(a, e)| (a.clone(), e.scale(c)))
            .filter(|(_, e)| !e.is_zero())
            .collect();
        self.like(self.weights.clone(), terms)
    }

    /// `f * D`.
    pub fn mul_left(&self, f: &Expr) -> DiffOp {
        let terms = self
            .terms
            .iter()
            .map(|(a, e)| (a.clone(), e * f))
            .filter(|(_, e)| !e.is_zero())
            .collect();
        self.like(self.weights.clone(), terms)
    }

    /// `D o f`.
    pub fn mul_right(&self, f: &Expr) -> DiffOp {
        let m = self.like(self.weights.clone(), [(vec![0; self.dim()], f.clone())].into_iter().collect());
        self.compose_raw(&m, self.weights.clone())
    }

    fn deriv(&self, e: &Expr, gamma: &[u8]) -> Expr {
        let mut d = e.clone();
        for (i, &k) in gamma.iter().enumerate() {
            for _ in 0..k {
                if d.is_zero() {
                    return d;
                }
                d = d.diff(self.ids[i]);
            }
        }
        d
    }

    /// Leibniz expansion of `self o o` without weight checks.
    pub fn compose_raw(&self, o: &DiffOp, weights: Weights) -> DiffOp {
        let pairs: Vec<(&MultiIndex, &Expr)> = self.terms.iter().collect();
        let parts: Vec<Vec<(MultiIndex, Expr)>> = pairs
            .par_iter()
            .map(|(alpha, a)| {
                let mut out = Vec::new();
                for gamma in sub_indices(alpha) {
                    let mut c: i64 = 1;
                    for (x, y) in alpha.iter().zip(&gamma) {
                        c *= binom(*x, *y);
                    }
                    for (beta, b) in &o.terms {
                        let db = self.deriv(b, &gamma);
                        if db.is_zero() {
                            continue;
                        }
                        let key: MultiIndex = (0..alpha.len()).map(|i| alpha[i] - gamma[i] + beta[i]).collect();
                        out.push((key, (*a * &db).scale(&Rat::int(c))));
                    }
                }
                out
            })
            .collect();
        let mut groups: BTreeMap<MultiIndex, Vec<Expr>> = BTreeMap::new();
        for (k, e) in parts.into_iter().flatten() {
            groups.entry(k).or_default().push(e);
        }
        self.like(weights, collect_groups(groups))
    }

    /// `self o o`; needs `self.lambda == o.mu`.
    pub fn compose(&self, o: &DiffOp) -> Result<DiffOp> {
        if self.weights.lambda != o.weights.mu {
            return Err(Error::WeightMismatch(format!(
                "compose: source {} of the left factor vs target {} of the right factor",
                self.weights.lambda, o.weights.mu
            )));
        }
        let ord = self.order() + o.order();
        if ord > ORDER_CAP {
            return Err(Error::OrderCap(ord));
        }
        Ok(self.compose_raw(o, Weights::new(o.weights.lambda.clone(), self.weights.mu.clone())))
    }

    /// `A o B - B o A`; both compositions must be weight-compatible.
    pub fn commutator(&self, o: &DiffOp) -> Result<DiffOp> {
        let ab = self.compose(o)?;
        let ba = o.compose(self)?;
        ab.sub(&ba)
    }

    /// `e^{-a} o D o e^{b}` style conjugation: `left * D o right`.
    pub fn conjugate(&self, left: &Expr, right: &Expr, weights: Weights) -> DiffOp {
        self.mul_right(right).mul_left(left).with_weights(weights)
    }

    /// Apply to a function.
    pub fn apply(&self, phi: &Expr) -> Expr {
        let terms: Vec<Expr> = self.terms.iter().map(|(a, c)| c * &self.deriv(phi, a)).collect();
        Expr::sum(terms.iter())
    }

    /// Order-k part as a symbol of weight `mu - lambda`.
    pub fn principal_symbol(&self, k: usize) -> PolySymbol {
        let n = self.dim();
        let t = TensorField::from_fn(n, &vec![Var::Up; k], |ix| {
            let mut a = vec![0u8; n];
            for &i in ix {
                a[i] += 1;
            }
            match self.terms.get(&a) {
                None => Expr::zero(),
                Some(c) => {
                    let mut mult: i64 = (1..=k as i64).product();
                    for &e in &a {
                        mult /= (1..=e as i64).product::<i64>();
                    }
                    c.scale(&Rat::new(1, mult))
                }
            }
        });
        PolySymbol::new(t).expect("all up").with_weight(self.weights.delta())
    }

    /// Formal adjoint for the pairing `int phi psi |Vol_g|`.
    pub fn adjoint(&self, g: &Geometry) -> DiffOp {
        let n = self.dim();
        let dual = self.weights.dual();
        // d_i^* = -d_i - d_i log sqrt|g|; these commute
        let star: Vec<DiffOp> = (0..n)
            .map(|i| {
                let mut a = vec![0; n];
                a[i] = 1;
                DiffOp::from_terms(g, dual.clone(), [(a, Expr::int(-1)), (vec![0; n], -g.dlog_vol(i))])
            })
            .collect();
        let mut total = DiffOp::zero(g, dual.clone());
        for (alpha, c) in &self.terms {
            let mut op = DiffOp::mult(g, c.clone(), dual.clone());
            for (i, &k) in alpha.iter().enumerate() {
                for _ in 0..k {
                    op = star[i].compose_raw(&op, dual.clone());
                }
            }
            total = total.combine(&op, 1);
        }
        total
    }

    /// Components agree after normalization.
    pub fn equiv(&self, o: &DiffOp) -> bool {
        self.combine(o, -1).is_zero()
    }

    /// Terms as `(multi-index, coefficient)`, highest order first.
    pub fn sorted_terms(&self) -> Vec<(&MultiIndex, &Expr)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| {
            let oa: u32 = a.0.iter().map(|&e| e as u32).sum();
            let ob: u32 = b.0.iter().map(|&e| e as u32).sum();
            ob.cmp(&oa).then_with(|| b.0.cmp(a.0))
        });
        v
    }

    pub fn multi_index_string(&self, a: &[u8]) -> String {
        let parts: Vec<String> = a
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| {
                if e == 1 {
                    format!("d_{}", self.names[i])
                } else {
                    format!("d_{}^{}", self.names[i], e)
                }
            })
            .collect();
        parts.join("*")
    }
}

fn collect_groups(groups: BTreeMap<MultiIndex, Vec<Expr>>) -> BTreeMap<MultiIndex, Expr> {
    groups
        .into_iter()
        .map(|(k, v)| (k, Expr::sum(v.iter())))
        .filter(|(_, e)| !e.is_zero())
        .collect()
}

impl fmt::Display for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (a, c) in self.sorted_terms() {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            let d = self.multi_index_string(a);
            if d.is_empty() {
                write!(f, "{c}")?;
            } else if c.is_one() {
                f.write_str(&d)?;
            } else {
                write!(f, "({c})*{d}")?;
            }
        }
        Ok(())
    }
}

/// `beta_1 .. beta_6` of the order-2 quantization.
pub fn beta_coeffs(n: usize, w: &Weights) -> Result<[Rat; 6]> {
    let nn = Rat::int(n as i64);
    let d = w.delta();
    let excluded = [
        Rat::new(2, n as i64),
        Rat::new(n as i64 + 2, 2 * n as i64),
        Rat::int(1),
        Rat::new(n as i64 + 1, n as i64),
        Rat::new(n as i64 + 2, n as i64),
    ];
    if excluded.contains(&d) {
        return Err(Error::ExcludedDelta(d.to_string()));
    }
    let (l, m) = (&w.lambda, &w.mu);
    let one = Rat::int(1);
    let two = Rat::int(2);
    let nl1 = &(&nn * l) + &one; // n lambda + 1
    let one_md = &one - &d;
    let a = &two + &(&nn * &one_md); // 2 + n(1 - delta)
    let b = &one + &(&nn * &one_md); // 1 + n(1 - delta)
    let c = &two + &(&nn * &(&one - &(&two * &d))); // 2 + n(1 - 2 delta)
    let e = &two - &(&nn * &d); // 2 - n delta
    let n2 = &nn * &nn;
    let b1 = &(&two * &nl1) / &a;
    let b2 = &(&nn * &(&(l + m) - &one)) / &(&a * &e);
    let b3 = &(&(&nn * l) * &nl1) / &(&b * &a);
    let inner = &(&(&(&n2 * m) * &(&(&two - l) - m)) + &(&two * &(&nl1 * &nl1))) - &(&nn * &(&nn + &one));
    let b4 = &(&(&nn * l) * &inner) / &(&(&(&b * &a) * &c) * &e);
    let nm2 = &nn - &two;
    let b5 = if n == 2 {
        Rat::ZERO
    } else {
        &(&(&n2 * l) * &(m - &one)) / &(&nm2 * &b)
    };
    let b6 = if n == 2 {
        Rat::ZERO
    } else {
        let num = &(&(&n2 * l) * &(m - &one)) * &(&(&nn * &d) - &two);
        &num / &(&(&(&(&nn - &one) * &nm2) * &b) * &c)
    };
    Ok([b1, b2, b3, b4, b5, b6])
}

/// Divergence `nabla_a X^a` of a vector field.
pub fn divergence(g: &Geometry, x: &[Expr]) -> Expr {
    let terms: Vec<Expr> = (0..g.dim())
        .flat_map(|a| [x[a].diff(g.x(a)), &x[a] * g.dlog_vol(a)])
        .collect();
    Expr::sum(terms.iter())
}

/// `g^{ab} nabla_a nabla_b u` on a scalar.
pub fn laplacian(g: &Geometry, u: &Expr) -> Expr {
    let grad: Vec<Expr> = (0..g.dim())
        .map(|a| {
            let t: Vec<Expr> = (0..g.dim()).map(|b| g.ginv(a, b) * &u.diff(g.x(b))).collect();
            Expr::sum(t.iter())
        })
        .collect();
    divergence(g, &grad)
}

fn unit(n: usize, i: usize) -> MultiIndex {
    let mut a = vec![0; n];
    a[i] = 1;
    a
}

fn pair(n: usize, i: usize, j: usize) -> MultiIndex {
    let mut a = vec![0; n];
    a[i] += 1;
    a[j] += 1;
    a
}

/// `K^{ab} nabla_a nabla_b` on functions, as coordinate terms.
fn hessian_terms(g: &Geometry, k: &TensorField, out: &mut Vec<(MultiIndex, Expr)>) {
    let n = g.dim();
    let gam = g.christoffel();
    for a in 0..n {
        for b in 0..n {
            let kab = k.get(&[a, b]);
            if kab.is_zero() {
                continue;
            }
            out.push((pair(n, a, b), kab.clone()));
            for c in 0..n {
                let gc = gam.get(&[c, a, b]);
                if !gc.is_zero() {
                    out.push((unit(n, c), -(kab * gc)));
                }
            }
        }
    }
}

/// Ingredients of the order-2 formula for a symmetric all-up `K`.
struct KData {
    div: Vec<Expr>,
    tr: Expr,
    ddiv: Expr,
    lap_tr: Expr,
    ric_k: Expr,
}

fn kdata(g: &Geometry, k: &TensorField) -> KData {
    let n = g.dim();
    let dk = k.covariant_derivative(g);
    let div: Vec<Expr> = (0..n)
        .map(|b| {
            let t: Vec<Expr> = (0..n).map(|a| dk.get(&[a, a, b]).clone()).collect();
            Expr::sum(t.iter())
        })
        .collect();
    let tr = {
        let t: Vec<Expr> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| !g.g(a, b).is_zero())
            .map(|(a, b)| g.g(a, b) * k.get(&[a, b]))
            .collect();
        Expr::sum(t.iter())
    };
    let ddiv = divergence(g, &div);
    let lap_tr = laplacian(g, &tr);
    let ric = curvature::ricci(g);
    let ric_k = {
        let t: Vec<Expr> = (0..n * n)
            .map(|o| (o / n, o % n))
            .filter(|&(a, b)| !k.get(&[a, b]).is_zero())
            .map(|(a, b)| ric.get(&[a, b]) * k.get(&[a, b]))
            .collect();
        Expr::sum(t.iter())
    };
    KData {
        div,
        tr,
        ddiv,
        lap_tr,
        ric_k,
    }
}

fn grad_terms(g: &Geometry, u: &Expr, c: &Rat, out: &mut Vec<(MultiIndex, Expr)>) {
    let n = g.dim();
    if u.is_zero() || c.is_zero() {
        return;
    }
    for a in 0..n {
        let du = u.diff(g.x(a));
        if du.is_zero() {
            continue;
        }
        for b in 0..n {
            if !g.ginv(a, b).is_zero() {
                out.push((unit(n, b), (g.ginv(a, b) * &du).scale(c)));
            }
        }
    }
}

/// Degree-1 and degree-0 parts: `X^a d_a + lambda/(1 - delta) div X + f`.
fn low_terms(g: &Geometry, x: Option<&[Expr]>, f: Option<&Expr>, w: &Weights, out: &mut Vec<(MultiIndex, Expr)>) -> Result<()> {
    let n = g.dim();
    if let Some(x) = x {
        let one_md = &Rat::int(1) - &w.delta();
        if one_md.is_zero() {
            return Err(Error::ExcludedDelta(w.delta().to_string()));
        }
        let c = &w.lambda / &one_md;
        for (a, xa) in x.iter().enumerate() {
            if !xa.is_zero() {
                out.push((unit(n, a), xa.clone()));
            }
        }
        out.push((vec![0; n], divergence(g, x).scale(&c)));
    }
    if let Some(f) = f {
        out.push((vec![0; n], f.clone()));
    }
    Ok(())
}

/// Symbol triple `(K, X, f)` of degree at most 2.
#[derive(Clone, Debug, Default)]
pub struct Order2Symbol {
    pub k: Option<TensorField>,
    pub x: Option<Vec<Expr>>,
    pub f: Option<Expr>,
}

impl Order2Symbol {
    pub fn k(k: &PolySymbol) -> Order2Symbol {
        Order2Symbol {
            k: Some(k.tensor().clone()),
            ..Default::default()
        }
    }

    pub fn x(x: &[Expr]) -> Order2Symbol {
        Order2Symbol {
            x: Some(x.to_vec()),
            ..Default::default()
        }
    }

    pub fn f(f: Expr) -> Order2Symbol {
        Order2Symbol {
            f: Some(f),
            ..Default::default()
        }
    }

    /// From a homogeneous symbol of degree 0, 1 or 2.
    pub fn from_symbol(s: &PolySymbol) -> Result<Order2Symbol> {
        let n = s.dim();
        match s.degree() {
            0 => Ok(Self::f(s.comp(&[]).clone())),
            1 => Ok(Self::x(&(0..n).map(|i| s.comp(&[i]).clone()).collect::<Vec<_>>())),
            2 => Ok(Self::k(s)),
            d => Err(Error::RankUnsupported(d)),
        }
    }
}

/// `Q_{lambda,mu}(K + X + f)`.
pub fn quantize_order2(s: &Order2Symbol, w: &Weights, g: &Geometry) -> Result<DiffOp> {
    let mut out = Vec::new();
    if let Some(k) = s.k.as_ref().filter(|k| !k.is_zero()) {
        let b = beta_coeffs(g.dim(), w)?;
        k_terms(g, k, &b, &mut out);
    }
    low_terms(g, s.x.as_deref(), s.f.as_ref(), w, &mut out)?;
    Ok(DiffOp::from_terms(g, w.clone(), out))
}

/// The degree-2 part of the quantization with explicit coefficients `beta_1..beta_6`.
pub fn quantize_with_betas(g: &Geometry, k: &TensorField, b: [Rat; 6], w: Weights) -> Result<DiffOp> {
    let mut out = Vec::new();
    k_terms(g, k, &b, &mut out);
    Ok(DiffOp::from_terms(g, w, out))
}

fn k_terms(g: &Geometry, k: &TensorField, b: &[Rat; 6], out: &mut Vec<(MultiIndex, Expr)>) {
    let n = g.dim();
    let kd = kdata(g, k);
    hessian_terms(g, k, out);
    for (a, d) in kd.div.iter().enumerate() {
        if !d.is_zero() {
            out.push((unit(n, a), d.scale(&b[0])));
        }
    }
    grad_terms(g, &kd.tr, &b[1], out);
    let z = vec![0; n];
    out.push((z.clone(), kd.ddiv.scale(&b[2])));
    out.push((z.clone(), kd.lap_tr.scale(&b[3])));
    out.push((z.clone(), kd.ric_k.scale(&b[4])));
    if !kd.tr.is_zero() && !b[5].is_zero() {
        out.push((z, (curvature::scalar(g) * &kd.tr).scale(&b[5])));
    }
}

/// Closed form of `Q_{lambda0,lambda0}(K)` for a Killing 2-tensor.
pub fn quantize_killing(k: &PolySymbol, g: &Geometry) -> Result<DiffOp> {
    if k.degree() != 2 || !is_killing(g, k) {
        return Err(Error::NotKilling);
    }
    let n = g.dim();
    let nn = n as i64;
    let kd = kdata(g, k.tensor());
    let mut out = Vec::new();
    hessian_terms(g, k.tensor(), &mut out);
    for (a, d) in kd.div.iter().enumerate() {
        if !d.is_zero() {
            out.push((unit(n, a), d.clone()));
        }
    }
    let z = vec![0; n];
    // beta_3 - 2 beta_4 at (l0, l0); positive
    out.push((z.clone(), kd.ddiv.scale(&Rat::new(nn - 2, 4 * (nn + 1)))));
    out.push((z.clone(), kd.ric_k.scale(&Rat::new(-(nn + 2), 4 * (nn + 1)))));
    out.push((z, (curvature::scalar(g) * &kd.tr).scale(&Rat::new(1, 2 * (nn - 1) * (nn + 1)))));
    Ok(DiffOp::from_terms(g, Weights::ll(n), out))
}

/// Yamabe Laplacian `nabla_a g^{ab} nabla_b - (n-2)/(4(n-1)) Sc`.
pub fn yamabe(g: &Geometry) -> DiffOp {
    let n = g.dim();
    let nn = n as i64;
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let gi = g.ginv(a, b);
            if gi.is_zero() {
                continue;
            }
            out.push((pair(n, a, b), gi.clone()));
            // first-order part: (d_a g^{ab} + g^{ab} d_a log sqrt|g|) d_b
            out.push((unit(n, b), gi.diff(g.x(a)) + gi * g.dlog_vol(a)));
        }
    }
    if n > 2 {
        out.push((vec![0; n], curvature::scalar(g).scale(&Rat::new(-(nn - 2), 4 * (nn - 1)))));
    }
    DiffOp::from_terms(g, Weights::lm(n), out)
}

/// Lie derivative of `lambda`-densities along `X`, trivialized.
pub fn lie_density(g: &Geometry, x: &[Expr], lambda: &Rat) -> DiffOp {
    let n = g.dim();
    let mut out: Vec<(MultiIndex, Expr)> = (0..n).map(|a| (unit(n, a), x[a].clone())).collect();
    out.push((vec![0; n], divergence(g, x).scale(lambda)));
    DiffOp::from_terms(g, Weights::new(lambda.clone(), lambda.clone()), out)
}

/// Residuals of the factorization identities for a degree-0 symbol `S0` of weight `-2/n`.
pub fn factorization_check(s0: &Expr, g: &Geometry) -> Result<(DiffOp, DiffOp)> {
    let n = g.dim();
    let hs = g.inverse_metric().mul_expr(s0).with_weight(Rat::ZERO);
    let sym = Order2Symbol {
        k: Some(hs),
        ..Default::default()
    };
    let dy = yamabe(g);
    let q0 = quantize_order2(&Order2Symbol::f(s0.clone()), &Weights::ml(n), g)?;
    let r1 = quantize_order2(&sym, &Weights::ll(n), g)?.sub(&q0.compose(&dy)?)?;
    let r2 = quantize_order2(&sym, &Weights::mm(n), g)?.sub(&dy.compose(&q0)?)?;
    Ok((r1, r2))
}

/// All multi-indices of total order `k` in `n` variables, as index tuples.
pub fn index_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0..n.pow(k as u32))
        .map(|o| unflatten(n, k, o))
        .filter(|ix| ix.windows(2).all(|w| w[0] <= w[1]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> Geometry {
        Geometry::flat(&["x1", "x2", "x3"])
    }

    #[test]
    fn beta_values_at_lambda0() {
        let b = beta_coeffs(3, &Weights::ll(3)).unwrap();
        assert_eq!(b[0], Rat::new(3, 5));
        assert_eq!(b[2], Rat::new(3, 80));
        assert_eq!(&b[0] - &(&Rat::int(2) * &b[1]), Rat::int(1));
        assert!(matches!(beta_coeffs(3, &Weights::lm(3)), Err(Error::ExcludedDelta(_))));
    }

    #[test]
    fn yamabe_on_flat_space() {
        let g = flat();
        let d = yamabe(&g);
        assert_eq!(d.to_string(), "d_x1^2 + d_x2^2 + d_x3^2");
        assert!(d.adjoint(&g).equiv(&d));
    }

    #[test]
    fn composition_matches_nested_application() {
        let g = flat();
        let x1 = Expr::coord("x1");
        let a = DiffOp::from_terms(&g, Weights::ll(3), [(vec![1, 0, 0], x1.clone()), (vec![0, 2, 0], Expr::one())]);
        let b = DiffOp::from_terms(&g, Weights::ll(3), [(vec![1, 1, 0], &x1 * &x1), (vec![0, 0, 0], Expr::coord("x2"))]);
        let ab = a.compose(&b).unwrap();
        let phi = Expr::func("phi", &["x1", "x2", "x3"]);
        assert!(ab.apply(&phi).equiv(&a.apply(&b.apply(&phi))));
        let s = ab.principal_symbol(3);
        let prod = a.principal_symbol(1).mul(&b.principal_symbol(2));
        assert!(s.equiv(&prod));
    }

    #[test]
    fn adjoint_is_an_involution() {
        let g = Geometry::new(
            &["x1".into(), "x2".into(), "x3".into()],
            vec![
                vec![Expr::coord("x2") * Expr::coord("x2") + Expr::one(), Expr::zero(), Expr::zero()],
                vec![Expr::zero(), Expr::one(), Expr::zero()],
                vec![Expr::zero(), Expr::zero(), Expr::coord("x1")],
            ],
        )
        .unwrap();
        let d = DiffOp::from_terms(
            &g,
            Weights::lm(3),
            [(vec![1, 1, 0], Expr::coord("x3")), (vec![0, 0, 1], Expr::coord("x1"))],
        );
        let dd = d.adjoint(&g).adjoint(&g);
        assert!(dd.equiv(&d));
        assert_eq!(dd.weights(), d.weights());
    }

    #[test]
    fn killing_formula_on_flat_space() {
        let g = flat();
        let k = PolySymbol::new(TensorField::from_fn(3, &[Var::Up, Var::Up], |ix| {
            Expr::frac(((ix == [0, 1]) || (ix == [1, 0])) as i64, 2)
        }))
        .unwrap();
        let q = quantize_killing(&k, &g).unwrap();
        assert_eq!(q.to_string(), "d_x1*d_x2");
        let q2 = quantize_order2(&Order2Symbol::k(&k), &Weights::ll(3), &g).unwrap();
        assert!(q.equiv(&q2));
    }

    #[test]
    fn factorization_on_flat_space() {
        let g = flat();
        let phi = Expr::func("phi", &["x1", "x2", "x3"]);
        let (r1, r2) = factorization_check(&phi, &g).unwrap();
        assert!(r1.is_zero(), "{r1}");
        assert!(r2.is_zero(), "{r2}");
    }

    fn product_geometry() -> Geometry {
        let h = Expr::func("h", &["x1", "x2"]);
        let c: Vec<String> = ["x1", "x2", "x3", "x4"].iter().map(|s| s.to_string()).collect();
        let rows = (0..4)
            .map(|i| (0..4).map(|j| if (i, j) == (0, 0) { h.inv().unwrap() } else { Expr::int((i == j) as i64) }).collect())
            .collect();
        Geometry::new(&c, rows).unwrap()
    }

    #[test]
    fn product_geometry_identities() {
        let g = product_geometry();
        let k = PolySymbol::new(TensorField::from_fn(4, &[Var::Up, Var::Up], |ix| Expr::int((ix == [2, 2]) as i64))).unwrap();
        let sc = curvature::scalar(&g).clone();
        let q = quantize_order2(&Order2Symbol::k(&k), &Weights::ll(4), &g).unwrap();
        let expect = DiffOp::from_terms(&g, Weights::ll(4), [(vec![0, 0, 2, 0], Expr::one()), (vec![0; 4], sc.scale(&Rat::new(1, 30)))]);
        assert!(q.equiv(&expect), "{q}");
        let qm = quantize_order2(&Order2Symbol::k(&k), &Weights::mm(4), &g).unwrap();
        let dy = yamabe(&g);
        let lhs = dy.compose(&q).unwrap().sub(&qm.compose(&dy).unwrap()).unwrap();
        let grad: Vec<Expr> = (0..4).map(|i| {
            let t: Vec<Expr> = (0..4).map(|j| g.ginv(i, j) * &sc.diff(g.x(j))).collect();
            Expr::sum(t.iter()).scale(&Rat::new(1, 15))
        }).collect();
        let rhs = quantize_order2(&Order2Symbol::x(&grad), &Weights::lm(4), &g).unwrap();
        assert!(lhs.equiv(&rhs), "{}", lhs.sub(&rhs).unwrap());
    }
}
