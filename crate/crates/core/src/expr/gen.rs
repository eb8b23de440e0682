//! Generator interning.
//!
//! Every polynomial variable (coordinate, derived function symbol, atom) is
//! interned once and referred to by a [`GenId`]. The two low bits of an id
//! carry its class so hot loops never touch the table.

use super::Expr;
use smallvec::SmallVec;
use std::collections::HashMap;
use std::sync::{Arc, LazyLock, RwLock};

pub type GenId = u32;

pub(crate) const TAG_VAR: u32 = 0;
pub(crate) const TAG_EXP: u32 = 1;
pub(crate) const TAG_LOG: u32 = 2;
pub(crate) const TAG_SQRT: u32 = 3;

/// Exponents of `exp` generators are stored in units of `1/EXP_DENOM`, so that
/// `exp(p/q * v)` for every `q` dividing this number shares one generator.
pub const EXP_DENOM: i64 = 720_720;

#[inline]
pub(crate) fn tag(id: GenId) -> u32 {
    id & 3
}

#[inline]
pub fn is_laurent(id: GenId) -> bool {
    tag(id) == TAG_EXP
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomKind {
    Exp,
    Log,
    Sqrt,
}

impl AtomKind {
    pub fn name(self) -> &'static str {
        match self {
            AtomKind::Exp => "exp",
            AtomKind::Log => "log",
            AtomKind::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum GenKind {
    Coord(Arc<str>),
    /// `D[name, alpha](args)`; `alpha` counts derivatives per argument slot.
    Func {
        name: Arc<str>,
        args: Arc<[GenId]>,
        alpha: SmallVec<[u8; 4]>,
    },
    Atom(AtomKind, Expr),
}

pub struct GenInfo {
    pub kind: GenKind,
    /// Printed form; also the structural sort key (prefixed by class).
    pub text: String,
    pub sort_key: String,
}

struct Interner {
    infos: Vec<&'static GenInfo>,
    map: HashMap<GenKind, GenId>,
}

static INTERNER: LazyLock<RwLock<Interner>> = LazyLock::new(|| {
    RwLock::new(Interner {
        infos: Vec::new(),
        map: HashMap::new(),
    })
});

pub fn info(id: GenId) -> &'static GenInfo {
    let g = INTERNER.read().unwrap();
    g.infos[(id >> 2) as usize]
}

fn render(kind: &GenKind) -> (String, String) {
    match kind {
        GenKind::Coord(n) => (n.to_string(), format!("0{n}")),
        GenKind::Func { name, args, alpha } => {
            let arglist = args
                .iter()
                .map(|a| info(*a).text.clone())
                .collect::<Vec<_>>()
                .join(",");
            let text = if alpha.iter().all(|&k| k == 0) {
                if args.is_empty() {
                    name.to_string()
                } else {
                    format!("{name}({arglist})")
                }
            } else {
                let al = alpha
                    .iter()
                    .map(|k| k.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                format!("D[{name},({al})]({arglist})")
            };
            let order: u32 = alpha.iter().map(|&k| k as u32).sum();
            // base functions sort by name, then derivative order, then index
            let al = alpha
                .iter()
                .map(|k| format!("{:02}", 99 - *k as u32))
                .collect::<String>();
            (text, format!("1{name}\u{1}{order:03}{al}"))
        }
        GenKind::Atom(k, e) => {
            let text = format!("{}({})", k.name(), e);
            let sk = format!("2{}{}", k.name(), e);
            (text, sk)
        }
    }
}

pub fn intern(kind: GenKind) -> GenId {
    if let Some(&id) = INTERNER.read().unwrap().map.get(&kind) {
        return id;
    }
    let (text, sort_key) = render(&kind);
    let t = match &kind {
        GenKind::Atom(AtomKind::Exp, _) => TAG_EXP,
        GenKind::Atom(AtomKind::Log, _) => TAG_LOG,
        GenKind::Atom(AtomKind::Sqrt, _) => TAG_SQRT,
        _ => TAG_VAR,
    };
    let mut g = INTERNER.write().unwrap();
    if let Some(&id) = g.map.get(&kind) {
        return id;
    }
    let id = ((g.infos.len() as u32) << 2) | t;
    let leaked: &'static GenInfo = Box::leak(Box::new(GenInfo {
        kind: kind.clone(),
        text,
        sort_key,
    }));
    g.infos.push(leaked);
    g.map.insert(kind, id);
    id
}

pub fn coord(name: &str) -> GenId {
    intern(GenKind::Coord(Arc::from(name)))
}

pub fn func(name: &str, args: &[GenId], alpha: &[u8]) -> GenId {
    intern(GenKind::Func {
        name: Arc::from(name),
        args: Arc::from(args),
        alpha: SmallVec::from_slice(alpha),
    })
}

pub fn atom(kind: AtomKind, arg: Expr) -> GenId {
    intern(GenKind::Atom(kind, arg))
}
