//! Small dense matrix routines over [`Expr`] (n <= 4 in practice).

use crate::expr::{Expr, ExprError};

/// Determinant by Laplace expansion along the sparsest row.
pub fn det(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    match n {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0],
        _ => {
            let row = (0..n)
                .max_by_key(|&r| m[r].iter().filter(|e| e.is_zero()).count())
                .unwrap();
            let mut terms = Vec::new();
            for c in 0..n {
                if m[row][c].is_zero() {
                    continue;
                }
                let minor = minor(m, row, c);
                let t = &m[row][c] * &det(&minor);
                terms.push(if (row + c) % 2 == 0 { t } else { -t });
            }
            Expr::sum(terms.iter())
        }
    }
}

fn minor(m: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
    m.iter()
        .enumerate()
        .filter(|(r, _)| *r != row)
        .map(|(_, v)| {
            v.iter()
                .enumerate()
                .filter(|(c, _)| *c != col)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

/// Inverse via the adjugate; `Err(DivisionByZero)` for singular input.
pub fn inverse(m: &[Vec<Expr>]) -> Result<Vec<Vec<Expr>>, ExprError> {
    let n = m.len();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[i][j].is_zero()));
    if diagonal {
        let mut out = vec![vec![Expr::zero(); n]; n];
        for i in 0..n {
            out[i][i] = m[i][i].inv()?;
        }
        return Ok(out);
    }
    let d = det(m);
    let dinv = d.inv()?;
    let mut out = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let c = det(&minor(m, j, i));
            let c = if (i + j) % 2 == 0 { c } else { -c };
            out[i][j] = &c * &dinv;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_times_matrix_is_identity() {
        let x = Expr::coord("lx1");
        let y = Expr::coord("lx2");
        let m = vec![
            vec![Expr::one() + &x, y.clone(), Expr::zero()],
            vec![y.clone(), Expr::int(2), x.clone()],
            vec![Expr::zero(), x.clone(), Expr::int(3)],
        ];
        let inv = inverse(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s = Expr::sum((0..3).map(|k| &m[i][k] * &inv[k][j]).collect::<Vec<_>>().iter());
                let want = if i == j { Expr::one() } else { Expr::zero() };
                assert!(s.equiv(&want), "({i},{j}) = {s}");
            }
        }
    }
}
