//! Geometry description language.
//!
//! ```text
//! # comment
//! manifold { dim = 3; coords = [x1, x2, x3]; signature = "+++"; domain = "x1 > 0"; }
//! functions { a(x1, x2); c(x3); s; }
//! metric g { g[x1,x1] = 2*(gamma + c)/a; g[2,2] = 1; }
//! symbol K degree 2 { K[x1,x1] = c*a/(gamma + c); }
//! scalar f = x1^2 + 1/2;
//! conformal Y = x1*x2;
//! ```
//!
//! Component indices are coordinate names or 1-based positions. Unlisted
//! components are zero; listing one ordering of a symmetric pair sets both.
//! A bare function name stands for the function applied to its declared
//! arguments.

mod lexer;

use crate::expr::{AtomKind, Expr, ExprError, Rat, Tree};
use crate::linalg;
use lexer::{lex, Tok, Token};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeomErrorKind {
    SyntaxError,
    UndeclaredSymbol,
    AsymmetricMetric,
    DegenerateMetric,
    DimensionTooSmall,
    InvalidExpr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeomError {
    pub kind: GeomErrorKind,
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl GeomError {
    pub fn new(kind: GeomErrorKind, line: usize, col: usize, msg: impl Into<String>) -> GeomError {
        GeomError {
            kind,
            line,
            col,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for GeomError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {:?}: {}", self.line, self.col, self.kind, self.msg)
    }
}

impl std::error::Error for GeomError {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuncDecl {
    pub name: String,
    pub args: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SymbolDecl {
    pub name: String,
    pub degree: usize,
    /// Sorted 0-based index tuple -> upper-index component.
    pub comps: BTreeMap<Vec<usize>, Expr>,
}

#[derive(Clone, Debug)]
pub struct GeometrySpec {
    pub dim: usize,
    pub coords: Vec<String>,
    pub signature: Option<String>,
    pub domain: Option<String>,
    pub functions: Vec<FuncDecl>,
    pub metric_name: String,
    /// Lower-index metric components.
    pub metric: Vec<Vec<Expr>>,
    pub symbols: Vec<SymbolDecl>,
    pub scalars: Vec<(String, Expr)>,
    pub conformal: Option<(String, Expr)>,
}

impl GeometrySpec {
    pub fn symbol(&self, name: &str) -> Option<&SymbolDecl> {
        self.symbols.iter().find(|s| s.name == name)
    }

    pub fn scalar(&self, name: &str) -> Option<&Expr> {
        self.scalars.iter().find(|s| s.0 == name).map(|s| &s.1)
    }

    pub fn coord_index(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    /// A minimal environment with only a chart (no functions, flat metric).
    pub fn chart(coords: &[&str]) -> GeometrySpec {
        let n = coords.len();
        GeometrySpec {
            dim: n,
            coords: coords.iter().map(|s| s.to_string()).collect(),
            signature: None,
            domain: None,
            functions: Vec::new(),
            metric_name: "g".into(),
            metric: (0..n)
                .map(|i| (0..n).map(|j| Expr::int((i == j) as i64)).collect())
                .collect(),
            symbols: Vec::new(),
            scalars: Vec::new(),
            conformal: None,
        }
    }
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    spec: &'a mut GeometrySpec,
    scalar_trees: Vec<(String, Tree)>,
    depth: usize,
}

const MAX_DEPTH: usize = 200;

type PResult<T> = Result<T, GeomError>;

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, kind: GeomErrorKind, t: &Token, msg: impl Into<String>) -> PResult<T> {
        Err(GeomError::new(kind, t.line, t.col, msg))
    }

    fn is_punct(&self, c: char) -> bool {
        self.peek().tok == Tok::Punct(c)
    }

    fn expect_punct(&mut self, c: char) -> PResult<()> {
        let t = self.next();
        if t.tok == Tok::Punct(c) {
            Ok(())
        } else {
            self.err(GeomErrorKind::SyntaxError, &t, format!("expected '{c}', found {}", describe(&t.tok)))
        }
    }

    fn expect_ident(&mut self) -> PResult<(String, Token)> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            other => self.err(GeomErrorKind::SyntaxError, &t, format!("expected identifier, found {}", describe(other))),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        let (s, t) = self.expect_ident()?;
        if s == kw {
            Ok(())
        } else {
            self.err(GeomErrorKind::SyntaxError, &t, format!("expected '{kw}', found '{s}'"))
        }
    }

    fn expect_uint(&mut self) -> PResult<(usize, Token)> {
        let t = self.next();
        if let Tok::Num(s) = &t.tok {
            if let Ok(v) = s.parse::<usize>() {
                return Ok((v, t.clone()));
            }
        }
        self.err(GeomErrorKind::SyntaxError, &t, format!("expected integer, found {}", describe(&t.tok)))
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Tree> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            let t = self.peek().clone();
            return self.err(GeomErrorKind::SyntaxError, &t, "expression nested too deeply");
        }
        let mut terms = vec![self.term()?];
        loop {
            if self.is_punct('+') {
                self.next();
                terms.push(self.term()?);
            } else if self.is_punct('-') {
                self.next();
                terms.push(Tree::Neg(Box::new(self.term()?)));
            } else {
                break;
            }
        }
        self.depth -= 1;
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Tree::Add(terms) })
    }

    fn term(&mut self) -> PResult<Tree> {
        let mut acc = self.unary()?;
        loop {
            if self.is_punct('*') {
                self.next();
                let r = self.unary()?;
                acc = match acc {
                    Tree::Mul(mut v) => {
                        v.push(r);
                        Tree::Mul(v)
                    }
                    a => Tree::Mul(vec![a, r]),
                };
            } else if self.is_punct('/') {
                self.next();
                let r = self.unary()?;
                acc = Tree::Div(Box::new(acc), Box::new(r));
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> PResult<Tree> {
        if self.is_punct('-') {
            self.next();
            self.depth += 1;
            if self.depth > MAX_DEPTH {
                let t = self.peek().clone();
                return self.err(GeomErrorKind::SyntaxError, &t, "expression nested too deeply");
            }
            let u = self.unary()?;
            self.depth -= 1;
            return Ok(Tree::Neg(Box::new(u)));
        }
        if self.is_punct('+') {
            self.next();
            return self.unary();
        }
        let base = self.primary()?;
        if self.is_punct('^') {
            self.next();
            let e = self.exponent()?;
            return Ok(Tree::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    /// Exponent: integer, `-` integer, or a parenthesized rational.
    fn exponent(&mut self) -> PResult<Rat> {
        let t = self.peek().clone();
        let neg = if self.is_punct('-') {
            self.next();
            true
        } else {
            false
        };
        let r = if self.is_punct('(') {
            self.next();
            let sub = self.expr()?;
            self.expect_punct(')')?;
            match sub.normalize().ok().and_then(|e| e.as_rat()) {
                Some(r) => r,
                None => return self.err(GeomErrorKind::SyntaxError, &t, "exponent must be a rational constant"),
            }
        } else {
            let tn = self.next();
            match &tn.tok {
                Tok::Num(s) => parse_number(s).ok_or_else(|| {
                    GeomError::new(GeomErrorKind::SyntaxError, tn.line, tn.col, "bad number")
                })?,
                other => {
                    return self.err(GeomErrorKind::SyntaxError, &tn, format!("expected exponent, found {}", describe(other)))
                }
            }
        };
        Ok(if neg { -r } else { r })
    }

    fn primary(&mut self) -> PResult<Tree> {
        let t = self.next();
        match &t.tok {
            Tok::Num(s) => parse_number(s)
                .map(Tree::Num)
                .ok_or_else(|| GeomError::new(GeomErrorKind::SyntaxError, t.line, t.col, "bad number")),
            Tok::Punct('(') => {
                let e = self.expr()?;
                self.expect_punct(')')?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident_expr(name.clone(), &t),
            other => self.err(GeomErrorKind::SyntaxError, &t, format!("unexpected {}", describe(other))),
        }
    }

    fn coord_list(&mut self) -> PResult<Vec<(String, Token)>> {
        self.expect_punct('(')?;
        let mut v = Vec::new();
        if self.is_punct(')') {
            self.next();
            return Ok(v);
        }
        loop {
            v.push(self.expect_ident()?);
            if self.is_punct(',') {
                self.next();
            } else {
                self.expect_punct(')')?;
                return Ok(v);
            }
        }
    }

    fn ident_expr(&mut self, name: String, t: &Token) -> PResult<Tree> {
        let atom = match name.as_str() {
            "exp" => Some(AtomKind::Exp),
            "log" => Some(AtomKind::Log),
            "sqrt" => Some(AtomKind::Sqrt),
            _ => None,
        };
        if let Some(k) = atom {
            if self.is_punct('(') {
                self.next();
                let a = self.expr()?;
                self.expect_punct(')')?;
                return Ok(Tree::Atom(k, Box::new(a)));
            }
        }
        if name == "D" && self.is_punct('[') {
            return self.derived();
        }
        if self.spec.coords.contains(&name) {
            return Ok(Tree::Coord(name));
        }
        if let Some(decl) = self.spec.functions.iter().find(|f| f.name == name).cloned() {
            if self.is_punct('(') {
                let args = self.coord_list()?;
                self.check_args(&decl, &args, t)?;
            }
            return Ok(Tree::Func {
                alpha: vec![0; decl.args.len()],
                name,
                args: decl.args,
            });
        }
        if let Some((_, tree)) = self.scalar_trees.iter().find(|s| s.0 == name) {
            return Ok(tree.clone());
        }
        self.err(GeomErrorKind::UndeclaredSymbol, t, format!("undeclared symbol '{name}'"))
    }

    fn check_args(&self, decl: &FuncDecl, args: &[(String, Token)], t: &Token) -> PResult<()> {
        if args.len() != decl.args.len() || args.iter().zip(&decl.args).any(|(a, d)| &a.0 != d) {
            for (a, at) in args {
                if !self.spec.coords.contains(a) {
                    return self.err(GeomErrorKind::UndeclaredSymbol, at, format!("undeclared coordinate '{a}'"));
                }
            }
            return self.err(
                GeomErrorKind::SyntaxError,
                t,
                format!("{} is declared with arguments ({})", decl.name, decl.args.join(",")),
            );
        }
        Ok(())
    }

    /// `D[f,(a1,...,ak)](args)`
    fn derived(&mut self) -> PResult<Tree> {
        self.expect_punct('[')?;
        let (name, nt) = self.expect_ident()?;
        let Some(decl) = self.spec.functions.iter().find(|f| f.name == name).cloned() else {
            return self.err(GeomErrorKind::UndeclaredSymbol, &nt, format!("undeclared function '{name}'"));
        };
        self.expect_punct(',')?;
        self.expect_punct('(')?;
        let mut alpha = Vec::new();
        if !self.is_punct(')') {
            loop {
                let (k, kt) = self.expect_uint()?;
                if k > 32 {
                    return self.err(GeomErrorKind::SyntaxError, &kt, "derivative order too large");
                }
                alpha.push(k as u8);
                if self.is_punct(',') {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect_punct(')')?;
        self.expect_punct(']')?;
        if alpha.len() != decl.args.len() {
            return self.err(GeomErrorKind::SyntaxError, &nt, "multi-index length differs from argument count");
        }
        if self.is_punct('(') {
            let args = self.coord_list()?;
            self.check_args(&decl, &args, &nt)?;
        }
        Ok(Tree::Func {
            name,
            args: decl.args,
            alpha,
        })
    }

    fn normalize(&self, tree: &Tree, t: &Token) -> PResult<Expr> {
        tree.normalize()
            .map_err(|e| GeomError::new(GeomErrorKind::InvalidExpr, t.line, t.col, e.to_string()))
    }

    // ---- sections ----

    fn file(&mut self) -> PResult<()> {
        let mut have_manifold = false;
        let mut have_metric = false;
        loop {
            let t = self.peek().clone();
            let kw = match &t.tok {
                Tok::Eof => break,
                Tok::Ident(s) => s.clone(),
                other => return self.err(GeomErrorKind::SyntaxError, &t, format!("expected section, found {}", describe(other))),
            };
            if kw != "manifold" && !have_manifold {
                return self.err(GeomErrorKind::SyntaxError, &t, "the manifold block must come first");
            }
            self.next();
            match kw.as_str() {
                "manifold" if !have_manifold => {
                    self.manifold(&t)?;
                    have_manifold = true;
                }
                "functions" => self.functions()?,
                "metric" if !have_metric => {
                    self.metric()?;
                    have_metric = true;
                }
                "symbol" => self.symbol()?,
                "scalar" => {
                    let (name, tr) = self.named_scalar()?;
                    let e = self.normalize(&tr, &t)?;
                    self.scalar_trees.push((name.clone(), tr));
                    self.spec.scalars.push((name, e));
                }
                "conformal" => {
                    let (name, tr) = self.named_scalar()?;
                    let e = self.normalize(&tr, &t)?;
                    self.spec.conformal = Some((name, e));
                }
                _ => return self.err(GeomErrorKind::SyntaxError, &t, format!("unexpected section '{kw}'")),
            }
        }
        let eof = self.peek().clone();
        if !have_manifold {
            return self.err(GeomErrorKind::SyntaxError, &eof, "missing manifold block");
        }
        if !have_metric {
            return self.err(GeomErrorKind::SyntaxError, &eof, "missing metric block");
        }
        Ok(())
    }

    fn manifold(&mut self, start: &Token) -> PResult<()> {
        self.expect_punct('{')?;
        let mut dim = None;
        let mut coords: Option<Vec<String>> = None;
        while !self.is_punct('}') {
            let (key, kt) = self.expect_ident()?;
            self.expect_punct('=')?;
            match key.as_str() {
                "dim" => {
                    let (n, nt) = self.expect_uint()?;
                    if n < 3 {
                        return self.err(GeomErrorKind::DimensionTooSmall, &nt, format!("dimension {n} < 3"));
                    }
                    dim = Some(n);
                }
                "coords" => {
                    self.expect_punct('[')?;
                    let mut v: Vec<String> = Vec::new();
                    loop {
                        let (c, ct) = self.expect_ident()?;
                        if v.contains(&c) || ["exp", "log", "sqrt", "D"].contains(&c.as_str()) {
                            return self.err(GeomErrorKind::SyntaxError, &ct, format!("bad coordinate name '{c}'"));
                        }
                        v.push(c);
                        if self.is_punct(',') {
                            self.next();
                        } else {
                            break;
                        }
                    }
                    self.expect_punct(']')?;
                    coords = Some(v);
                }
                "signature" | "domain" => {
                    let t = self.next();
                    let Tok::Str(s) = &t.tok else {
                        return self.err(GeomErrorKind::SyntaxError, &t, "expected string");
                    };
                    if key == "signature" {
                        self.spec.signature = Some(s.clone());
                    } else {
                        self.spec.domain = Some(s.clone());
                    }
                }
                _ => return self.err(GeomErrorKind::SyntaxError, &kt, format!("unknown manifold key '{key}'")),
            }
            self.expect_punct(';')?;
        }
        self.expect_punct('}')?;
        let Some(dim) = dim else {
            return self.err(GeomErrorKind::SyntaxError, start, "manifold block lacks dim");
        };
        let Some(coords) = coords else {
            return self.err(GeomErrorKind::SyntaxError, start, "manifold block lacks coords");
        };
        if coords.len() != dim {
            return self.err(
                GeomErrorKind::SyntaxError,
                start,
                format!("dim = {dim} but {} coordinates listed", coords.len()),
            );
        }
        self.spec.dim = dim;
        self.spec.coords = coords;
        Ok(())
    }

    fn functions(&mut self) -> PResult<()> {
        self.expect_punct('{')?;
        while !self.is_punct('}') {
            let (name, nt) = self.expect_ident()?;
            if self.spec.coords.contains(&name)
                || self.spec.functions.iter().any(|f| f.name == name)
                || ["exp", "log", "sqrt", "D"].contains(&name.as_str())
            {
                return self.err(GeomErrorKind::SyntaxError, &nt, format!("'{name}' is already declared or reserved"));
            }
            let mut args = Vec::new();
            if self.is_punct('(') {
                for (a, at) in self.coord_list()? {
                    if !self.spec.coords.contains(&a) {
                        return self.err(GeomErrorKind::UndeclaredSymbol, &at, format!("undeclared coordinate '{a}'"));
                    }
                    if args.contains(&a) {
                        return self.err(GeomErrorKind::SyntaxError, &at, "repeated argument");
                    }
                    args.push(a);
                }
            }
            self.spec.functions.push(FuncDecl { name, args });
            self.expect_punct(';')?;
        }
        self.expect_punct('}')
    }

    fn index(&mut self) -> PResult<usize> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => match self.spec.coords.iter().position(|c| c == s) {
                Some(i) => Ok(i),
                None => self.err(GeomErrorKind::UndeclaredSymbol, &t, format!("undeclared coordinate '{s}'")),
            },
            Tok::Num(s) => match s.parse::<usize>() {
                Ok(k) if k >= 1 && k <= self.spec.dim => Ok(k - 1),
                _ => self.err(GeomErrorKind::SyntaxError, &t, format!("index {s} out of range 1..{}", self.spec.dim)),
            },
            other => self.err(GeomErrorKind::SyntaxError, &t, format!("expected index, found {}", describe(other))),
        }
    }

    /// `name[i,j,...] = expr;` entries of a block named `owner`.
    fn entries(&mut self, owner: &str, rank: usize) -> PResult<Vec<(Vec<usize>, Expr, Token)>> {
        self.expect_punct('{')?;
        let mut out = Vec::new();
        while !self.is_punct('}') {
            let (name, nt) = self.expect_ident()?;
            if name != owner {
                return self.err(GeomErrorKind::SyntaxError, &nt, format!("entry of '{owner}' expected, found '{name}'"));
            }
            self.expect_punct('[')?;
            let mut idx = Vec::new();
            if !self.is_punct(']') {
                loop {
                    idx.push(self.index()?);
                    if self.is_punct(',') {
                        self.next();
                    } else {
                        break;
                    }
                }
            }
            self.expect_punct(']')?;
            if idx.len() != rank {
                return self.err(GeomErrorKind::SyntaxError, &nt, format!("expected {rank} indices, found {}", idx.len()));
            }
            self.expect_punct('=')?;
            let et = self.peek().clone();
            let tree = self.expr()?;
            let e = self.normalize(&tree, &et)?;
            self.expect_punct(';')?;
            out.push((idx, e, nt));
        }
        self.expect_punct('}')?;
        Ok(out)
    }

    fn metric(&mut self) -> PResult<()> {
        let (name, _) = self.expect_ident()?;
        let n = self.spec.dim;
        let entries = self.entries(&name, 2)?;
        let mut m: Vec<Vec<Option<Expr>>> = vec![vec![None; n]; n];
        for (idx, e, t) in entries {
            let (i, j) = (idx[0], idx[1]);
            for (a, b) in [(i, j), (j, i)] {
                if let Some(old) = &m[a][b] {
                    if !old.equiv(&e) {
                        return self.err(
                            GeomErrorKind::AsymmetricMetric,
                            &t,
                            format!("{name}[{},{}] conflicts with an earlier entry", i + 1, j + 1),
                        );
                    }
                }
            }
            m[i][j] = Some(e.clone());
            m[j][i] = Some(e);
        }
        self.spec.metric_name = name;
        self.spec.metric = m
            .into_iter()
            .map(|r| r.into_iter().map(|e| e.unwrap_or_else(Expr::zero)).collect())
            .collect();
        let d = linalg::det(&self.spec.metric);
        if d.is_zero() {
            let t = self.toks[self.pos.saturating_sub(1)].clone();
            return self.err(GeomErrorKind::DegenerateMetric, &t, "metric determinant is identically zero");
        }
        Ok(())
    }

    fn symbol(&mut self) -> PResult<()> {
        let (name, nt) = self.expect_ident()?;
        if self.spec.symbols.iter().any(|s| s.name == name) {
            return self.err(GeomErrorKind::SyntaxError, &nt, format!("symbol '{name}' declared twice"));
        }
        self.expect_keyword("degree")?;
        let (degree, dt) = self.expect_uint()?;
        if degree > 4 {
            return self.err(GeomErrorKind::SyntaxError, &dt, "symbol degree above 4");
        }
        let entries = self.entries(&name, degree)?;
        let mut comps: BTreeMap<Vec<usize>, Expr> = BTreeMap::new();
        for (mut idx, e, t) in entries {
            idx.sort_unstable();
            if let Some(old) = comps.get(&idx) {
                if !old.equiv(&e) {
                    return self.err(GeomErrorKind::SyntaxError, &t, format!("conflicting entries for {name}{idx:?}"));
                }
            }
            if !e.is_zero() {
                comps.insert(idx, e);
            }
        }
        self.spec.symbols.push(SymbolDecl { name, degree, comps });
        Ok(())
    }

    fn named_scalar(&mut self) -> PResult<(String, Tree)> {
        let (name, nt) = self.expect_ident()?;
        if self.spec.coords.contains(&name) || self.spec.functions.iter().any(|f| f.name == name) {
            return self.err(GeomErrorKind::SyntaxError, &nt, format!("'{name}' is already declared"));
        }
        self.expect_punct('=')?;
        let tree = self.expr()?;
        self.expect_punct(';')?;
        Ok((name, tree))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Num(s) => format!("number {s}"),
        Tok::Str(s) => format!("string \"{s}\""),
        Tok::Punct(c) => format!("'{c}'"),
        Tok::Eof => "end of input".into(),
    }
}

fn parse_number(s: &str) -> Option<Rat> {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    let (int, frac) = match s.split_once('.') {
        Some((a, b)) => (a, b),
        None => (s, ""),
    };
    let digits = format!("{int}{frac}");
    let n: BigInt = if digits.is_empty() { return None } else { digits.parse().ok()? };
    let d = BigInt::from(10u32).pow(frac.len() as u32);
    Some(Rat::from_big(BigRational::new(n, d)))
}

fn empty_spec() -> GeometrySpec {
    GeometrySpec {
        dim: 0,
        coords: Vec::new(),
        signature: None,
        domain: None,
        functions: Vec::new(),
        metric_name: "g".into(),
        metric: Vec::new(),
        symbols: Vec::new(),
        scalars: Vec::new(),
        conformal: None,
    }
}

/// Parse a geometry file.
pub fn parse_geometry(text: &str) -> Result<GeometrySpec, GeomError> {
    let toks = lex(text)?;
    let mut spec = empty_spec();
    let mut p = Parser {
        toks,
        pos: 0,
        spec: &mut spec,
        scalar_trees: Vec::new(),
        depth: 0,
    };
    p.file()?;
    Ok(spec)
}

/// Parse a standalone expression against the symbol table of `env`.
pub fn parse_expr_tree(text: &str, env: &GeometrySpec) -> Result<Tree, GeomError> {
    let toks = lex(text)?;
    let mut spec = env.clone();
    let scalar_trees = Vec::new();
    let mut p = Parser {
        toks,
        pos: 0,
        spec: &mut spec,
        scalar_trees,
        depth: 0,
    };
    let tree = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::Eof {
        return p.err(GeomErrorKind::SyntaxError, &t, format!("trailing {}", describe(&t.tok)));
    }
    Ok(tree)
}

pub fn parse_expr(text: &str, env: &GeometrySpec) -> Result<Expr, GeomError> {
    let tree = parse_expr_tree(text, env)?;
    tree.normalize()
        .map_err(|e: ExprError| GeomError::new(GeomErrorKind::InvalidExpr, 1, 1, e.to_string()))
}

/// Render a spec back into the DSL (components in normalized form).
pub fn print_geometry(spec: &GeometrySpec) -> String {
    let mut s = String::new();
    s.push_str(&format!("manifold {{ dim = {}; coords = [{}];", spec.dim, spec.coords.join(", ")));
    if let Some(sig) = &spec.signature {
        s.push_str(&format!(" signature = \"{sig}\";"));
    }
    if let Some(d) = &spec.domain {
        s.push_str(&format!(" domain = \"{d}\";"));
    }
    s.push_str(" }\n");
    if !spec.functions.is_empty() {
        s.push_str("functions {\n");
        for f in &spec.functions {
            if f.args.is_empty() {
                s.push_str(&format!("  {};\n", f.name));
            } else {
                s.push_str(&format!("  {}({});\n", f.name, f.args.join(",")));
            }
        }
        s.push_str("}\n");
    }
    let g = &spec.metric_name;
    s.push_str(&format!("metric {g} {{\n"));
    for i in 0..spec.dim {
        for j in i..spec.dim {
            if !spec.metric[i][j].is_zero() {
                s.push_str(&format!(
                    "  {g}[{},{}] = {};\n",
                    spec.coords[i], spec.coords[j], spec.metric[i][j]
                ));
            }
        }
    }
    s.push_str("}\n");
    for sym in &spec.symbols {
        s.push_str(&format!("symbol {} degree {} {{\n", sym.name, sym.degree));
        for (idx, e) in &sym.comps {
            let names: Vec<&str> = idx.iter().map(|&i| spec.coords[i].as_str()).collect();
            s.push_str(&format!("  {}[{}] = {};\n", sym.name, names.join(","), e));
        }
        s.push_str("}\n");
    }
    for (name, e) in &spec.scalars {
        s.push_str(&format!("scalar {name} = {e};\n"));
    }
    if let Some((name, e)) = &spec.conformal {
        s.push_str(&format!("conformal {name} = {e};\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIPIRRO: &str = "
manifold { dim = 3; coords = [x1, x2, x3]; }
functions { a(x1,x2); b(x1,x2); gamma(x1,x2); c(x3); }
metric g {
  g[x1,x1] = 2*(gamma + c)/a;
  g[x2,x2] = 2*(gamma + c)/b;
  g[3,3] = 2*(gamma + c);
}
symbol K degree 2 {
  K[x1,x1] = c(x3)*a(x1,x2)/(gamma(x1,x2)+c(x3));
  K[x2,x2] = c*b/(gamma + c);
  K[x3,x3] = -gamma/(gamma + c);
}
";

    #[test]
    fn parses_di_pirro() {
        let s = parse_geometry(DIPIRRO).unwrap();
        assert_eq!(s.dim, 3);
        assert_eq!(s.functions.len(), 4);
        assert_eq!(s.symbol("K").unwrap().comps.len(), 3);
        let e = parse_expr("c(x3)*a(x1,x2)/(gamma(x1,x2)+c(x3))", &s).unwrap();
        assert!(e.equiv(&s.symbol("K").unwrap().comps[&vec![0, 0]]));
    }

    #[test]
    fn rational_literal_is_exact() {
        let env = GeometrySpec::chart(&["x1", "x2", "x3"]);
        let e = parse_expr("x1^2 + 1/2", &env).unwrap();
        let want = Expr::coord("x1") * Expr::coord("x1") + Expr::frac(1, 2);
        assert_eq!(e, want);
        assert_eq!(parse_expr("0.25", &env).unwrap(), Expr::frac(1, 4));
    }

    #[test]
    fn undeclared_symbol_reports_position() {
        let src = "manifold { dim = 3; coords = [x1, x2, x3]; }\nmetric g {\n  g[1,1] = w(x1);\n  g[2,2] = 1; g[3,3] = 1;\n}\n";
        let e = parse_geometry(src).unwrap_err();
        assert_eq!(e.kind, GeomErrorKind::UndeclaredSymbol);
        assert_eq!((e.line, e.col), (3, 12));
    }

    #[test]
    fn validation_errors() {
        let small = "manifold { dim = 2; coords = [x, y]; } metric g { g[1,1]=1; g[2,2]=1; }";
        assert_eq!(parse_geometry(small).unwrap_err().kind, GeomErrorKind::DimensionTooSmall);
        let degen = "manifold { dim = 3; coords = [x, y, z]; } metric g { g[1,1]=1; g[2,2]=1; }";
        assert_eq!(parse_geometry(degen).unwrap_err().kind, GeomErrorKind::DegenerateMetric);
        let asym = "manifold { dim = 3; coords = [x, y, z]; } metric g { g[1,1]=1; g[2,2]=1; g[3,3]=1; g[1,2]=x; g[2,1]=y; }";
        assert_eq!(parse_geometry(asym).unwrap_err().kind, GeomErrorKind::AsymmetricMetric);
    }

    #[test]
    fn round_trip() {
        let s = parse_geometry(DIPIRRO).unwrap();
        let t = parse_geometry(&print_geometry(&s)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(s.metric[i][j].equiv(&t.metric[i][j]));
            }
        }
        for (k, v) in &s.symbol("K").unwrap().comps {
            assert!(v.equiv(&t.symbol("K").unwrap().comps[k]));
        }
    }

    #[test]
    fn derived_symbols_and_atoms() {
        let src = "manifold { dim = 3; coords = [x1, x2, x3]; } functions { u(x2); v(x3); } metric g { g[1,1]=1; g[2,2]=1; g[3,3]=1; }";
        let s = parse_geometry(src).unwrap();
        let e = parse_expr("D[u,(2)](x2) + log(u(x2)+v(x3))", &s).unwrap();
        let want = Expr::derived("u", &["x2"], &[2])
            + (Expr::func("u", &["x2"]) + Expr::func("v", &["x3"])).log().unwrap();
        assert_eq!(e, want);
        assert!(parse_expr("u(x3)", &s).is_err());
        assert!(parse_expr("x1^(1/3)", &s).is_err());
    }
}
