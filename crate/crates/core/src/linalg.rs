//! Dense exact linear algebra over the rationals.

use crate::rational::{vec, Rational};

/// Reduced row echelon form of a set of row vectors.
#[derive(Clone, Debug)]
pub struct Rref {
    pub rows: Vec<Vec<Rational>>,
    pub pivots: Vec<usize>,
    pub ncols: usize,
}

impl Rref {
    pub fn new(rows: &[Vec<Rational>], ncols: usize) -> Rref {
        let mut m: Vec<Vec<Rational>> = rows.to_vec();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..ncols {
            if r == m.len() {
                break;
            }
            let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
                continue;
            };
            m.swap(r, p);
            let inv = m[r][c].recip();
            if !inv.is_one() {
                for x in m[r].iter_mut() {
                    if !x.is_zero() {
                        *x *= &inv;
                    }
                }
            }
            let pivot_row = m[r].clone();
            for (i, row) in m.iter_mut().enumerate() {
                if i != r && !row[c].is_zero() {
                    let f = row[c].clone();
                    for (x, y) in row.iter_mut().zip(&pivot_row) {
                        if !y.is_zero() {
                            *x = x.sub_mul(&f, y);
                        }
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        m.truncate(r);
        Rref { rows: m, pivots, ncols }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Reduces `v` against the row space; zero result iff `v` is in the span.
    pub fn reduce(&self, v: &[Rational]) -> Vec<Rational> {
        let mut out = v.to_vec();
        for (row, &c) in self.rows.iter().zip(&self.pivots) {
            if !out[c].is_zero() {
                let f = out[c].clone();
                vec::axpy(&mut out, &-f, row);
            }
        }
        out
    }

    pub fn contains(&self, v: &[Rational]) -> bool {
        vec::is_zero(&self.reduce(v))
    }

    /// Basis of `{x : row·x = 0 for every row}`.
    pub fn nullspace(&self) -> Vec<Vec<Rational>> {
        let mut is_pivot = vec![false; self.ncols];
        for &c in &self.pivots {
            is_pivot[c] = true;
        }
        let mut basis = Vec::new();
        for free in (0..self.ncols).filter(|&c| !is_pivot[c]) {
            let mut x = vec::zeros(self.ncols);
            x[free] = Rational::one();
            for (row, &c) in self.rows.iter().zip(&self.pivots) {
                if !row[free].is_zero() {
                    x[c] = -&row[free];
                }
            }
            basis.push(x);
        }
        basis
    }
}

pub fn rank(rows: &[Vec<Rational>], ncols: usize) -> usize {
    Rref::new(rows, ncols).rank()
}

/// Basis (independent subset of the row space, in RREF) of the span.
pub fn span_basis(vectors: &[Vec<Rational>], dim: usize) -> Vec<Vec<Rational>> {
    Rref::new(vectors, dim).rows
}

/// Kernel of a matrix given as columns: basis of `{x : Σ x_j col_j = 0}`.
pub fn column_nullspace(cols: &[Vec<Rational>], nrows: usize) -> Vec<Vec<Rational>> {
    let rows: Vec<Vec<Rational>> = (0..nrows)
        .map(|i| cols.iter().map(|c| c[i].clone()).collect())
        .collect();
    Rref::new(&rows, cols.len()).nullspace()
}

/// Basis of the orthogonal complement of `span(vectors)` in `R^dim`.
pub fn orthogonal_complement(vectors: &[Vec<Rational>], dim: usize) -> Vec<Vec<Rational>> {
    Rref::new(vectors, dim).nullspace()
}

/// Basis of the intersection of the spans of several subspaces.
pub fn intersect_subspaces(subspaces: &[Vec<Vec<Rational>>], dim: usize) -> Vec<Vec<Rational>> {
    // x is in every span iff x is orthogonal to every complement
    let mut constraints = Vec::new();
    for s in subspaces {
        constraints.extend(orthogonal_complement(s, dim));
    }
    orthogonal_complement(&constraints, dim)
}

/// Solves the square or overdetermined system `A x = b` if consistent,
/// returning one solution (free variables set to zero).
pub fn solve(a: &[Vec<Rational>], b: &[Rational], ncols: usize) -> Option<Vec<Rational>> {
    let aug: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let rref = Rref::new(&aug, ncols + 1);
    if rref.pivots.last() == Some(&ncols) {
        return None;
    }
    let mut x = vec::zeros(ncols);
    for (row, &c) in rref.rows.iter().zip(&rref.pivots) {
        x[c] = row[ncols].clone();
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn v(xs: &[i64]) -> Vec<Rational> {
        xs.iter().map(|&x| Rational::from_integer(x)).collect()
    }

    #[test]
    fn rank_and_nullspace() {
        let rows = vec![v(&[1, 2, 3]), v(&[2, 4, 6]), v(&[0, 1, 1])];
        let r = Rref::new(&rows, 3);
        assert_eq!(r.rank(), 2);
        let ns = r.nullspace();
        assert_eq!(ns.len(), 1);
        for row in &rows {
            assert!(vec::dot(row, &ns[0]).is_zero());
        }
    }

    #[test]
    fn span_membership() {
        let r = Rref::new(&[v(&[1, -1, 0])], 3);
        assert!(r.contains(&v(&[-3, 3, 0])));
        assert!(!r.contains(&v(&[1, 1, 0])));
    }

    #[test]
    fn intersection_of_planes() {
        let a = vec![v(&[1, 0, 0]), v(&[0, 1, 0])];
        let b = vec![v(&[0, 1, 0]), v(&[0, 0, 1])];
        let i = intersect_subspaces(&[a, b], 3);
        assert_eq!(i.len(), 1);
        assert!(Rref::new(&i, 3).contains(&v(&[0, 1, 0])));
    }

    #[test]
    fn solve_consistent_and_inconsistent() {
        let a = vec![v(&[2, 1]), v(&[1, 3])];
        let x = solve(&a, &v(&[3, 4]), 2).unwrap();
        assert_eq!(x, vec![q(1, 1), q(1, 1)]);
        let a = vec![v(&[1, 1]), v(&[2, 2])];
        assert!(solve(&a, &v(&[1, 3]), 2).is_none());
    }
}
