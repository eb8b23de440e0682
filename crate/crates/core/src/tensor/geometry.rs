use super::{TensorField, Var};
use crate::curvature::CurvaturePack;
use crate::error::{Error, Result};
use crate::expr::{gen, Expr, GenId};
use crate::geomdsl::GeometrySpec;
use crate::linalg;
use std::sync::{Arc, OnceLock};

struct Caches {
    christoffel: OnceLock<TensorField>,
    curvature: OnceLock<CurvaturePack>,
}

/// A coordinate chart with a metric. Immutable; derived data is cached.
#[derive(Clone)]
pub struct Geometry {
    coords: Arc<[String]>,
    ids: Arc<[GenId]>,
    g: Arc<Vec<Vec<Expr>>>,
    ginv: Arc<Vec<Vec<Expr>>>,
    det: Expr,
    dlogvol: Arc<Vec<Expr>>,
    caches: Arc<Caches>,
}

impl std::fmt::Debug for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Geometry")
            .field("coords", &self.coords)
            .field("g", &self.g)
            .finish()
    }
}

impl Geometry {
    pub fn new(coords: &[String], g: Vec<Vec<Expr>>) -> Result<Geometry> {
        let n = coords.len();
        if g.len() != n || g.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!("metric is not {n}x{n}")));
        }
        for i in 0..n {
            for j in 0..i {
                if !g[i][j].equiv(&g[j][i]) {
                    return Err(Error::DimensionMismatch("metric is not symmetric".into()));
                }
            }
        }
        let det = linalg::det(&g);
        if det.is_zero() {
            return Err(Error::DegenerateMetric);
        }
        let ginv = linalg::inverse(&g).map_err(|_| Error::DegenerateMetric)?;
        let ids: Vec<GenId> = coords.iter().map(|c| gen::coord(c)).collect();
        // d_i log sqrt|det g| = (d_i det) / (2 det)
        let dinv = det.inv().map_err(|_| Error::DegenerateMetric)?;
        let dlogvol = ids
            .iter()
            .map(|&x| det.diff(x).mul(&dinv).scale(&crate::Rat::new(1, 2)))
            .collect();
        Ok(Geometry {
            coords: coords.to_vec().into(),
            ids: ids.into(),
            g: Arc::new(g),
            ginv: Arc::new(ginv),
            det,
            dlogvol: Arc::new(dlogvol),
            caches: Arc::new(Caches {
                christoffel: OnceLock::new(),
                curvature: OnceLock::new(),
            }),
        })
    }

    pub fn from_spec(spec: &GeometrySpec) -> Result<Geometry> {
        Geometry::new(&spec.coords, spec.metric.clone())
    }

    /// Flat metric `diag(1, ..., 1)` on the named chart.
    pub fn flat(coords: &[&str]) -> Geometry {
        let n = coords.len();
        let g = (0..n)
            .map(|i| (0..n).map(|j| Expr::int((i == j) as i64)).collect())
            .collect();
        let c: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
        Geometry::new(&c, g).expect("flat metric is nondegenerate")
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    /// Coordinate generator of slot `i`.
    pub fn x(&self, i: usize) -> GenId {
        self.ids[i]
    }

    pub fn coord_expr(&self, i: usize) -> Expr {
        Expr::from_gen(self.ids[i])
    }

    pub fn g(&self, i: usize, j: usize) -> &Expr {
        &self.g[i][j]
    }

    pub fn ginv(&self, i: usize, j: usize) -> &Expr {
        &self.ginv[i][j]
    }

    pub fn metric_rows(&self) -> &[Vec<Expr>] {
        &self.g
    }

    pub fn det(&self) -> &Expr {
        &self.det
    }

    /// `d_i log sqrt|det g|`.
    pub fn dlog_vol(&self, i: usize) -> &Expr {
        &self.dlogvol[i]
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.g[i][j].is_zero()))
    }

    /// `g_{ab}` as a tensor.
    pub fn metric(&self) -> TensorField {
        let n = self.dim();
        TensorField::from_fn(n, &[Var::Down, Var::Down], |ix| self.g[ix[0]][ix[1]].clone())
    }

    /// `g^{ab}` as a tensor.
    pub fn inverse_metric(&self) -> TensorField {
        let n = self.dim();
        TensorField::from_fn(n, &[Var::Up, Var::Up], |ix| self.ginv[ix[0]][ix[1]].clone())
    }

    /// `e^{2 upsilon} g`.
    pub fn conformal_rescale(&self, upsilon: &Expr) -> Result<Geometry> {
        let f = upsilon.scale(&crate::Rat::int(2)).exp()?;
        self.scaled(&f)
    }

    /// `factor * g`.
    pub fn scaled(&self, factor: &Expr) -> Result<Geometry> {
        let g = self
            .g
            .iter()
            .map(|r| r.iter().map(|e| e.mul(factor)).collect())
            .collect();
        Geometry::new(&self.coords, g)
    }

    /// Apply a substitution to every metric component.
    pub fn map_metric<F: Fn(&Expr) -> Result<Expr>>(&self, f: F) -> Result<Geometry> {
        let mut g = Vec::with_capacity(self.dim());
        for r in self.g.iter() {
            let mut row = Vec::with_capacity(r.len());
            for e in r {
                row.push(f(e)?);
            }
            g.push(row);
        }
        Geometry::new(&self.coords, g)
    }

    /// Christoffel symbols `Gamma^i_{jk}` (slots up, down, down), cached.
    pub fn christoffel(&self) -> &TensorField {
        self.caches.christoffel.get_or_init(|| {
            let n = self.dim();
            // dg[l][j][k] = d_l g_{jk}
            let dg: Vec<Vec<Vec<Expr>>> = (0..n)
                .map(|l| {
                    (0..n)
                        .map(|j| (0..n).map(|k| self.g[j][k].diff(self.ids[l])).collect())
                        .collect()
                })
                .collect();
            let half = crate::Rat::new(1, 2);
            let lowered: Vec<Vec<Vec<Expr>>> = (0..n)
                .map(|l| {
                    (0..n)
                        .map(|j| {
                            (0..n)
                                .map(|k| (&dg[j][l][k] + &dg[k][j][l] - &dg[l][j][k]).scale(&half))
                                .collect()
                        })
                        .collect()
                })
                .collect();
            TensorField::from_fn(n, &[Var::Up, Var::Down, Var::Down], |ix| {
                let (i, j, k) = (ix[0], ix[1], ix[2]);
                let terms: Vec<Expr> = (0..n)
                    .filter(|&l| !self.ginv[i][l].is_zero() && !lowered[l][j][k].is_zero())
                    .map(|l| &self.ginv[i][l] * &lowered[l][j][k])
                    .collect();
                Expr::sum(terms.iter())
            })
        })
    }

    pub(crate) fn curvature_cell(&self) -> &OnceLock<CurvaturePack> {
        &self.caches.curvature
    }
}
