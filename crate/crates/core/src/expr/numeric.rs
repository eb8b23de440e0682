//! Floating-point evaluation at a point.

use super::gen::{self, AtomKind, GenId, GenKind, EXP_DENOM};
use super::{factor, Bindings, Expr, ExprError};
use std::collections::HashMap;
use std::sync::Mutex;

/// A coordinate point plus closed-form realizations of abstract functions.
///
/// Realizations are expressions in the function's formal argument
/// coordinates; derived symbols are realized by exact differentiation.
#[derive(Default)]
pub struct NumericContext {
    point: HashMap<GenId, f64>,
    funcs: HashMap<String, (Vec<String>, Expr)>,
    derived: Mutex<HashMap<GenId, Expr>>,
    values: Mutex<HashMap<GenId, f64>>,
}

impl Clone for NumericContext {
    fn clone(&self) -> Self {
        NumericContext {
            point: self.point.clone(),
            funcs: self.funcs.clone(),
            derived: Mutex::new(self.derived.lock().unwrap().clone()),
            values: Mutex::new(HashMap::new()),
        }
    }
}

impl NumericContext {
    pub fn new() -> NumericContext {
        NumericContext::default()
    }

    pub fn with_coord(mut self, name: &str, v: f64) -> Self {
        self.set_coord(name, v);
        self
    }

    pub fn set_coord(&mut self, name: &str, v: f64) {
        self.point.insert(gen::coord(name), v);
        self.values.get_mut().unwrap().clear();
    }

    pub fn with_func(mut self, name: &str, args: &[&str], e: Expr) -> Self {
        self.funcs.insert(
            name.to_string(),
            (args.iter().map(|s| s.to_string()).collect(), e),
        );
        self.derived.get_mut().unwrap().clear();
        self.values.get_mut().unwrap().clear();
        self
    }

    /// Realization of generator `g` as an expression in realized symbols.
    fn realize(&self, g: GenId) -> Result<Expr, ExprError> {
        if let Some(e) = self.derived.lock().unwrap().get(&g) {
            return Ok(e.clone());
        }
        let GenKind::Func { name, args, alpha } = &gen::info(g).kind else {
            unreachable!()
        };
        let (formal, real) = self
            .funcs
            .get(name.as_ref())
            .ok_or_else(|| ExprError::MissingRealization(name.to_string()))?;
        if formal.len() != args.len() {
            return Err(ExprError::MissingRealization(gen::info(g).text.clone()));
        }
        let mut d = real.clone();
        for (k, &n) in alpha.iter().enumerate() {
            for _ in 0..n {
                d = d.diff_name(&formal[k]);
            }
        }
        let mut ren = Bindings::new();
        for (k, f) in formal.iter().enumerate() {
            ren = ren.coord(f, Expr::from_gen(args[k]));
        }
        let d = d.substitute(&ren)?;
        self.derived.lock().unwrap().insert(g, d.clone());
        Ok(d)
    }

    fn gen_value(&self, g: GenId) -> Result<f64, ExprError> {
        if let Some(v) = self.values.lock().unwrap().get(&g) {
            return Ok(*v);
        }
        let v = match &gen::info(g).kind {
            GenKind::Coord(n) => *self
                .point
                .get(&g)
                .ok_or_else(|| ExprError::MissingRealization(n.to_string()))?,
            GenKind::Func { .. } => {
                let e = self.realize(g)?;
                self.eval(&e)?
            }
            GenKind::Atom(kind, a) => {
                let x = self.eval(a)?;
                match kind {
                    // exponent applied per monomial in `eval`
                    AtomKind::Exp => x,
                    AtomKind::Log => {
                        if x <= 0.0 {
                            return Err(ExprError::GuardViolation(format!("log({a}) = log({x})")));
                        }
                        x.ln()
                    }
                    AtomKind::Sqrt => {
                        if x < 0.0 {
                            return Err(ExprError::GuardViolation(format!("sqrt({a}) = sqrt({x})")));
                        }
                        x.sqrt()
                    }
                }
            }
        };
        self.values.lock().unwrap().insert(g, v);
        Ok(v)
    }

    fn eval_poly(&self, p: &super::Poly) -> Result<f64, ExprError> {
        let mut vals: HashMap<GenId, f64> = HashMap::new();
        for g in p.gens() {
            vals.insert(g, self.gen_value(g)?);
        }
        Ok(p.eval_with(|g, e| {
            let v = vals[&g];
            if gen::is_laurent(g) {
                (v * e as f64 / EXP_DENOM as f64).exp()
            } else {
                v.powi(e)
            }
        }))
    }

    pub fn eval(&self, e: &Expr) -> Result<f64, ExprError> {
        let n = self.eval_poly(e.numer())?;
        let mut d = 1.0;
        for &(f, k) in e.den_factors() {
            d *= self.eval_poly(&factor::info(f).poly)?.powi(k as i32);
        }
        if d == 0.0 {
            return Err(ExprError::DivisionByZero);
        }
        let v = n / d;
        if !v.is_finite() {
            return Err(ExprError::NonFinite(e.to_string()));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_simple_forms() {
        let ctx = NumericContext::new().with_coord("x1", 3.0);
        let e = Expr::coord("x1") + Expr::int(2);
        assert_eq!(ctx.eval(&e).unwrap(), 5.0);
    }

    #[test]
    fn log_of_realized_functions() {
        let e_minus_1 = Expr::one().exp().unwrap() - Expr::one();
        let ctx = NumericContext::new()
            .with_coord("x2", 0.3)
            .with_coord("x3", -0.7)
            .with_func("u", &["x2"], e_minus_1)
            .with_func("v", &["x3"], Expr::one());
        let l = (Expr::func("u", &["x2"]) + Expr::func("v", &["x3"])).log().unwrap();
        assert!((ctx.eval(&l).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn guards_and_missing_symbols() {
        let ctx = NumericContext::new().with_coord("x1", -1.0);
        let e = Expr::coord("x1").sqrt().unwrap();
        assert!(matches!(ctx.eval(&e), Err(ExprError::GuardViolation(_))));
        let f = Expr::func("f", &["x1"]);
        assert!(matches!(ctx.eval(&f), Err(ExprError::MissingRealization(_))));
    }
}
