//! Polyhedral cones at a single node and the positive-kernel machinery used
//! for claim-space cones.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactlp::{lp_solve, verify_certificate, Bound, Constraint, LinearProgram, LpOutcome, Relation, Sense};
use crate::linalg::{self, Rref};
use crate::rational::{vec, Rational};
use crate::scenario::NodeCone;

/// Largest dimension accepted by the double description routines.
pub const DEFAULT_DD_LIMIT: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConeError {
    #[error("dimension {dim} exceeds the double description limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },
}

/// One generator of `−K` at a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    /// Pay `π^{ij}` units of asset `i` for one unit of asset `j`.
    Transfer(usize, usize),
    /// Throw away one unit of asset `i`.
    Disposal(usize),
    /// The `k`-th generator of a generator-form cone.
    Generator(usize),
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::Transfer(i, j) => write!(f, "transfer({},{})", i + 1, j + 1),
            Move::Disposal(i) => write!(f, "disposal({})", i + 1),
            Move::Generator(k) => write!(f, "generator({})", k + 1),
        }
    }
}

/// Generators of `−K` with their provenance: transfers `e^j − π^{ij} e^i`
/// in row-major order followed by disposals `−e^i`, or the nonzero given
/// generators.
pub fn neg_k_generators(c: &NodeCone) -> Vec<(Move, Vec<Rational>)> {
    match c {
        NodeCone::BidAsk(m) => {
            let d = m.d();
            let mut out = Vec::with_capacity(d * d);
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        let mut g = vec::zeros(d);
                        g[j] = Rational::one();
                        g[i] = -m.get(i, j);
                        out.push((Move::Transfer(i, j), g));
                    }
                }
            }
            for i in 0..d {
                out.push((Move::Disposal(i), vec::neg(&vec::unit(d, i))));
            }
            out
        }
        NodeCone::Generators(g) => g
            .iter()
            .enumerate()
            .filter(|(_, x)| !vec::is_zero(x))
            .map(|(k, x)| (Move::Generator(k), x.clone()))
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeV {
    pub dim: usize,
    pub rays: Vec<Vec<Rational>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeH {
    pub dim: usize,
    pub rows: Vec<Vec<Rational>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceBasis {
    pub dim: usize,
    pub basis: Vec<Vec<Rational>>,
}

impl ConeV {
    pub fn negated(&self) -> ConeV {
        ConeV {
            dim: self.dim,
            rays: self.rays.iter().map(|r| vec::neg(r)).collect(),
        }
    }

    pub fn contains(&self, v: &[Rational]) -> bool {
        cone_contains(&self.rays, v)
    }
}

impl ConeH {
    pub fn contains(&self, w: &[Rational]) -> bool {
        self.rows.iter().all(|a| !vec::dot(a, w).is_negative())
    }
}

impl SubspaceBasis {
    pub fn zero(dim: usize) -> SubspaceBasis {
        SubspaceBasis { dim, basis: Vec::new() }
    }

    pub fn from_span(vectors: &[Vec<Rational>], dim: usize) -> SubspaceBasis {
        SubspaceBasis {
            dim,
            basis: linalg::span_basis(vectors, dim),
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn contains(&self, v: &[Rational]) -> bool {
        Rref::new(&self.basis, self.dim).contains(v)
    }

    /// Basis of the orthogonal complement.
    pub fn complement(&self) -> Vec<Vec<Rational>> {
        linalg::orthogonal_complement(&self.basis, self.dim)
    }

    pub fn contains_subspace(&self, other: &SubspaceBasis) -> bool {
        let r = Rref::new(&self.basis, self.dim);
        other.basis.iter().all(|b| r.contains(b))
    }
}

/// Rays of `−K` at a node.
pub fn solvency_cone(c: &NodeCone) -> ConeV {
    ConeV {
        dim: c.dim(),
        rays: neg_k_generators(c).into_iter().map(|(_, g)| g).collect(),
    }
}

/// Inequality description of `K^*`.
pub fn dual_cone_h(c: &NodeCone) -> ConeH {
    match c {
        NodeCone::BidAsk(m) => {
            let d = m.d();
            let mut rows: Vec<Vec<Rational>> = (0..d).map(|i| vec::unit(d, i)).collect();
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        let mut a = vec::zeros(d);
                        a[i] = m.get(i, j).clone();
                        a[j] = -Rational::one();
                        rows.push(a);
                    }
                }
            }
            ConeH { dim: d, rows }
        }
        NodeCone::Generators(_) => ConeH {
            dim: c.dim(),
            rows: neg_k_generators(c).into_iter().map(|(_, g)| vec::neg(&g)).collect(),
        },
    }
}

/// Extreme rays (plus both signs of a lineality basis) of `{w : A w ≥ 0}`,
/// by the double description method.
pub fn dd_h_to_v(h: &ConeH, limit: usize) -> Result<ConeV, ConeError> {
    if h.dim > limit {
        return Err(ConeError::DimensionTooLarge { dim: h.dim, limit });
    }
    let d = h.dim;
    let mut lin: Vec<Vec<Rational>> = (0..d).map(|i| vec::unit(d, i)).collect();
    // rays with the set of processed rows they satisfy with equality
    let mut rays: Vec<(Vec<Rational>, Vec<bool>)> = Vec::new();
    for (idx, a) in h.rows.iter().enumerate() {
        if let Some(p) = lin.iter().position(|l| !vec::dot(a, l).is_zero()) {
            let mut l = lin.remove(p);
            if vec::dot(a, &l).is_negative() {
                l = vec::neg(&l);
            }
            let al = vec::dot(a, &l);
            for x in lin.iter_mut() {
                let f = &vec::dot(a, x) / &al;
                if !f.is_zero() {
                    vec::axpy(x, &-f, &l);
                }
            }
            for (r, z) in rays.iter_mut() {
                let f = &vec::dot(a, r) / &al;
                if !f.is_zero() {
                    vec::axpy(r, &-f, &l);
                    *r = vec::primitive(r);
                }
                z.push(true);
            }
            let mut z = vec![true; idx];
            z.push(false);
            rays.push((vec::primitive(&l), z));
            continue;
        }
        let s: Vec<Rational> = rays.iter().map(|(r, _)| vec::dot(a, r)).collect();
        let mut next: Vec<(Vec<Rational>, Vec<bool>)> = Vec::new();
        for (k, (r, z)) in rays.iter().enumerate() {
            if !s[k].is_negative() {
                let mut z = z.clone();
                z.push(s[k].is_zero());
                next.push((r.clone(), z));
            }
        }
        for p in 0..rays.len() {
            if !s[p].is_positive() {
                continue;
            }
            for n in 0..rays.len() {
                if !s[n].is_negative() {
                    continue;
                }
                let common: Vec<bool> = rays[p].1.iter().zip(&rays[n].1).map(|(x, y)| *x && *y).collect();
                let blocked = (0..rays.len())
                    .any(|o| o != p && o != n && common.iter().zip(&rays[o].1).all(|(c, zo)| !*c || *zo));
                if blocked {
                    continue;
                }
                let mut r = vec::scale(&rays[n].0, &s[p]);
                vec::axpy(&mut r, &-s[n].clone(), &rays[p].0);
                if vec::is_zero(&r) {
                    continue;
                }
                let mut z = common;
                z.push(true);
                next.push((vec::primitive(&r), z));
            }
        }
        rays = next;
    }
    let mut out: Vec<Vec<Rational>> = rays.into_iter().map(|(r, _)| r).collect();
    for l in lin {
        let l = vec::primitive(&l);
        out.push(vec::neg(&l));
        out.push(l);
    }
    Ok(ConeV { dim: d, rays: out })
}

/// Inequality description of `cone(rays)`.
pub fn dd_v_to_h(v: &ConeV, limit: usize) -> Result<ConeH, ConeError> {
    let dual = dd_h_to_v(
        &ConeH {
            dim: v.dim,
            rows: v.rays.clone(),
        },
        limit,
    )?;
    Ok(ConeH {
        dim: v.dim,
        rows: dual.rays,
    })
}

/// `Σ x_k rays_k = v` with `x ≥ 0`, or a functional `y` with `y·ray ≥ 0`
/// for all rays and `y·v < 0`.
pub fn cone_combination(rays: &[Vec<Rational>], v: &[Rational]) -> Result<Vec<Rational>, Vec<Rational>> {
    let cols: Vec<SparseVec> = rays.iter().map(|r| sparse(r)).collect();
    let p = combination_lp(&cols, v.len(), v);
    match lp_solve(&p).expect("well-formed combination LP") {
        o @ LpOutcome::Optimal { .. } => {
            debug_assert!(verify_certificate(&p, &o));
            let LpOutcome::Optimal { point, .. } = o else {
                unreachable!()
            };
            Ok(point)
        }
        LpOutcome::Infeasible { farkas } => Err(farkas),
        LpOutcome::Unbounded { .. } => unreachable!("feasibility LP has zero objective"),
    }
}

pub fn cone_contains(rays: &[Vec<Rational>], v: &[Rational]) -> bool {
    cone_combination(rays, v).is_ok()
}

/// A nonzero nonnegative vector of `cone(rays)`, if there is one.
pub fn cone_meets_orthant(rays: &[Vec<Rational>]) -> Option<Vec<Rational>> {
    if rays.is_empty() {
        return None;
    }
    let d = rays[0].len();
    let n = rays.len();
    let mut p = LinearProgram::new(Sense::Max, n);
    for k in 0..n {
        p.objective[k] = rays[k].iter().sum();
    }
    for i in 0..d {
        p.push(Constraint::new(
            (0..n).map(|k| (k, rays[k][i].clone())).collect(),
            Relation::Ge,
            Rational::zero(),
        ));
    }
    p.push(Constraint::new(
        (0..n).map(|k| (k, Rational::one())).collect(),
        Relation::Le,
        Rational::one(),
    ));
    let o = lp_solve(&p).expect("well-formed LP");
    assert!(verify_certificate(&p, &o));
    match o {
        LpOutcome::Optimal { point, value, .. } if value.is_positive() => {
            let mut w = vec::zeros(d);
            for (k, x) in point.iter().enumerate() {
                if !x.is_zero() {
                    vec::axpy(&mut w, x, &rays[k]);
                }
            }
            Some(w)
        }
        _ => None,
    }
}

/// Lineality space of `cone(rays)`: the span of the rays whose negation
/// lies in the cone.
pub fn lineality(v: &ConeV) -> SubspaceBasis {
    let cols: Vec<SparseVec> = v.rays.iter().map(|r| sparse(r)).collect();
    let k = positive_kernel(&cols, v.dim);
    let inside: Vec<Vec<Rational>> = k.support.iter().map(|&j| v.rays[j].clone()).collect();
    SubspaceBasis::from_span(&inside, v.dim)
}

/// A point of the relative interior of `{w : A w ≥ 0}` and the rows that
/// hold with equality on the whole cone. `None` iff the cone is `{0}`.
///
/// One LP: maximise `Σ t_a` subject to `a·w ≥ t_a`, `0 ≤ t_a ≤ 1`. A row
/// can reach `t_a = 1` exactly when it is not an implicit equality, and
/// the optimal `w` is then strictly inside every other row.
pub fn relint_point(h: &ConeH) -> Option<(Vec<Rational>, Vec<usize>)> {
    let d = h.dim;
    let m = h.rows.len();
    let mut p = LinearProgram::new(Sense::Max, d + m);
    for j in 0..d {
        p.bounds[j] = Bound::free();
    }
    for a in 0..m {
        p.objective[d + a] = Rational::one();
        p.bounds[d + a] = Bound::between(Rational::zero(), Rational::one());
        let mut coeffs: Vec<(usize, Rational)> = (0..d).map(|j| (j, h.rows[a][j].clone())).collect();
        coeffs.push((d + a, -Rational::one()));
        p.push(Constraint::new(coeffs, Relation::Ge, Rational::zero()));
    }
    let o = lp_solve(&p).expect("well-formed LP");
    assert!(verify_certificate(&p, &o));
    let LpOutcome::Optimal { point, .. } = o else {
        unreachable!("bounded LP with feasible origin");
    };
    let w: Vec<Rational> = point[..d].to_vec();
    let implicit: Vec<usize> = (0..m).filter(|&a| point[d + a].is_zero()).collect();
    let eq_rows: Vec<Vec<Rational>> = implicit.iter().map(|&a| h.rows[a].clone()).collect();
    if linalg::rank(&eq_rows, d) == d {
        return None;
    }
    Some((w, implicit))
}

// ---------------------------------------------------------------------------
// Positive kernels of sparse generator matrices
// ---------------------------------------------------------------------------

/// Sparse vector as sorted `(index, value)` pairs with nonzero values.
pub type SparseVec = Vec<(usize, Rational)>;

pub fn sparse(v: &[Rational]) -> SparseVec {
    v.iter()
        .enumerate()
        .filter(|(_, x)| !x.is_zero())
        .map(|(i, x)| (i, x.clone()))
        .collect()
}

pub fn densify(v: &SparseVec, n: usize) -> Vec<Rational> {
    let mut out = vec::zeros(n);
    for (i, x) in v {
        out[*i] += x;
    }
    out
}

/// `Σ_k x_k cols_k`.
pub fn combine(cols: &[SparseVec], x: &[Rational], nrows: usize) -> Vec<Rational> {
    let mut out = vec::zeros(nrows);
    for (c, xk) in cols.iter().zip(x) {
        if xk.is_zero() {
            continue;
        }
        for (i, a) in c {
            out[*i] += a * xk;
        }
    }
    out
}

fn transpose(cols: &[SparseVec], nrows: usize) -> Vec<SparseVec> {
    let mut rows: Vec<SparseVec> = vec![Vec::new(); nrows];
    for (k, c) in cols.iter().enumerate() {
        for (i, a) in c {
            rows[*i].push((k, a.clone()));
        }
    }
    rows
}

fn combination_lp(cols: &[SparseVec], nrows: usize, v: &[Rational]) -> LinearProgram {
    let mut p = LinearProgram::new(Sense::Max, cols.len());
    for (i, row) in transpose(cols, nrows).into_iter().enumerate() {
        p.push(Constraint::new(row, Relation::Eq, v[i].clone()));
    }
    p
}

/// The nonnegative kernel `{x ≥ 0 : G x = 0}` of a column matrix, described
/// by its support.
///
/// `interior` is a kernel element that is positive exactly on `support`;
/// `separator` is a row functional with `y·G_k ≥ 0` for every column and
/// `> 0` off the support, so no kernel element can leave the support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelSupport {
    pub support: Vec<usize>,
    pub interior: Vec<Rational>,
    pub separator: Vec<Rational>,
}

impl KernelSupport {
    pub fn in_support(&self, n: usize) -> Vec<bool> {
        let mut s = vec![false; n];
        for &k in &self.support {
            s[k] = true;
        }
        s
    }

    /// Re-checks both halves of the certificate.
    pub fn verify(&self, cols: &[SparseVec], nrows: usize) -> bool {
        let n = cols.len();
        if self.interior.len() != n || self.separator.len() != nrows {
            return false;
        }
        let s = self.in_support(n);
        if !vec::is_zero(&combine(cols, &self.interior, nrows)) {
            return false;
        }
        for k in 0..n {
            let x = &self.interior[k];
            if s[k] != x.is_positive() || x.is_negative() {
                return false;
            }
            let yg: Rational = cols[k].iter().map(|(i, a)| a * &self.separator[*i]).sum();
            if yg.is_negative() || (!s[k] && !yg.is_positive()) {
                return false;
            }
        }
        true
    }
}

/// Computes the support of `{x ≥ 0 : G x = 0}` with one LP:
/// maximise `Σ a_k` over `G(a + z) = 0`, `0 ≤ a ≤ 1`, `z ≥ 0`.
pub fn positive_kernel(cols: &[SparseVec], nrows: usize) -> KernelSupport {
    let n = cols.len();
    let mut p = LinearProgram::new(Sense::Max, 2 * n);
    for k in 0..n {
        p.objective[k] = Rational::one();
        p.bounds[k] = Bound::between(Rational::zero(), Rational::one());
    }
    let rows = transpose(cols, nrows);
    for row in rows {
        let mut coeffs = Vec::with_capacity(2 * row.len());
        for (k, a) in row {
            coeffs.push((n + k, a.clone()));
            coeffs.push((k, a));
        }
        p.push(Constraint::new(coeffs, Relation::Eq, Rational::zero()));
    }
    let o = lp_solve(&p).expect("well-formed kernel LP");
    assert!(verify_certificate(&p, &o), "kernel LP certificate");
    let LpOutcome::Optimal { point, dual, .. } = o else {
        unreachable!("kernel LP is bounded and feasible");
    };
    let interior: Vec<Rational> = (0..n).map(|k| &point[k] + &point[n + k]).collect();
    let support: Vec<usize> = (0..n).filter(|&k| point[k].is_one()).collect();
    let ks = KernelSupport {
        support,
        interior,
        separator: dual,
    };
    assert!(ks.verify(cols, nrows), "kernel support certificate");
    ks
}

/// Outcome of [`functionals_vanish`].
#[derive(Clone, Debug)]
pub enum Vanishing {
    /// For each functional `f_i`, multipliers `α_i` over the rows of `G`
    /// with `α_i^T G_k = f_i(e_k)` on every support column.
    Holds(Vec<Vec<Rational>>),
    /// A kernel element `x ≥ 0` (`G x = 0`) and a functional index with
    /// `f_i(x) ≠ 0`.
    Fails { x: Vec<Rational>, index: usize },
}

/// Decides whether every functional vanishes on the nonnegative kernel of
/// `G`. Since the kernel spans `{x : G x = 0, x_k = 0 off the support}`, a
/// functional vanishes on it iff, restricted to the support columns, it is
/// a combination of the rows of `G`.
pub fn functionals_vanish(
    cols: &[SparseVec],
    nrows: usize,
    kernel: &KernelSupport,
    functionals: &[SparseVec],
) -> Vanishing {
    let support = &kernel.support;
    let ns = support.len();
    let mut pos = vec![usize::MAX; cols.len()];
    for (s, &k) in support.iter().enumerate() {
        pos[k] = s;
    }
    // rows of G restricted to support columns, augmented with an identity
    // block to recover the multipliers
    let mut rows: Vec<Vec<Rational>> = vec![vec::zeros(ns + nrows); nrows];
    for (s, &k) in support.iter().enumerate() {
        for (i, a) in &cols[k] {
            rows[*i][s] = a.clone();
        }
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row[ns + i] = Rational::one();
    }
    let rref = Rref::new(&rows, ns + nrows);
    let restricted = |f: &SparseVec| -> Vec<Rational> {
        let mut out = vec::zeros(ns + nrows);
        for (k, a) in f {
            if pos[*k] != usize::MAX {
                out[pos[*k]] += a;
            }
        }
        out
    };
    let mut alphas = Vec::with_capacity(functionals.len());
    for (index, f) in functionals.iter().enumerate() {
        let target = restricted(f);
        let red = rref.reduce(&target);
        if let Some(free) = (0..ns).find(|&c| !red[c].is_zero()) {
            // direction in the kernel span along the offending free column
            let mut dir = vec::zeros(cols.len());
            dir[support[free]] = Rational::one();
            for (row, &c) in rref.rows.iter().zip(&rref.pivots) {
                if c < ns && !row[free].is_zero() {
                    dir[support[c]] = -&row[free];
                }
            }
            let eval = |x: &[Rational]| -> Rational { f.iter().map(|(k, a)| a * &x[*k]).sum() };
            let x = if !eval(&kernel.interior).is_zero() {
                kernel.interior.clone()
            } else {
                // interior + eps * dir stays nonnegative for small eps
                let mut eps: Option<Rational> = None;
                for k in 0..cols.len() {
                    if dir[k].is_negative() {
                        let lim = &kernel.interior[k] / &(-&dir[k]);
                        eps = Some(match eps {
                            Some(e) => e.min(lim),
                            None => lim,
                        });
                    }
                }
                let eps = eps.map_or(Rational::one(), |e| &e / &Rational::from_integer(2));
                let mut x = kernel.interior.clone();
                vec::axpy(&mut x, &eps, &dir);
                x
            };
            debug_assert!(vec::is_zero(&combine(cols, &x, nrows)));
            debug_assert!(!eval(&x).is_zero());
            return Vanishing::Fails { x, index };
        }
        // target = Σ_r c_r rref_row_r; read α from the identity block
        let mut alpha = vec::zeros(nrows);
        let mut acc = vec::zeros(ns + nrows);
        for (row, &c) in rref.rows.iter().zip(&rref.pivots) {
            if c >= ns {
                break;
            }
            let coef = &target[c];
            if !coef.is_zero() {
                vec::axpy(&mut acc, coef, row);
            }
        }
        for i in 0..nrows {
            alpha[i] = acc[ns + i].clone();
        }
        alphas.push(alpha);
    }
    Vanishing::Holds(alphas)
}

/// Checks a [`Vanishing::Holds`] certificate by recomputation.
pub fn verify_vanishing(
    cols: &[SparseVec],
    nrows: usize,
    kernel: &KernelSupport,
    functionals: &[SparseVec],
    alphas: &[Vec<Rational>],
) -> bool {
    if !kernel.verify(cols, nrows) || alphas.len() != functionals.len() {
        return false;
    }
    for (f, alpha) in functionals.iter().zip(alphas) {
        let fd = densify(f, cols.len());
        for &k in &kernel.support {
            let ag: Rational = cols[k].iter().map(|(i, a)| a * &alpha[*i]).sum();
            if ag != fd[k] {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::scenario::BidAskMatrix;

    fn v(xs: &[i64]) -> Vec<Rational> {
        xs.iter().map(|&x| Rational::from_integer(x)).collect()
    }

    fn ex41_t0() -> NodeCone {
        NodeCone::BidAsk(BidAskMatrix::from_ints(&[&[1, 1], &[2, 1]]))
    }

    fn frictionless() -> NodeCone {
        NodeCone::BidAsk(BidAskMatrix::from_ints(&[&[1, 1], &[1, 1]]))
    }

    #[test]
    fn solvency_rays_ex41() {
        let c = solvency_cone(&ex41_t0());
        assert_eq!(c.rays, vec![v(&[-1, 1]), v(&[1, -2]), v(&[-1, 0]), v(&[0, -1])]);
        let g = solvency_cone(&NodeCone::Generators(vec![v(&[1, -1])]));
        assert_eq!(g.rays, vec![v(&[1, -1])]);
    }

    #[test]
    fn dual_rows_ex41() {
        let h = dual_cone_h(&ex41_t0());
        assert_eq!(h.rows, vec![v(&[1, 0]), v(&[0, 1]), v(&[1, -1]), v(&[-1, 2])]);
        let d1 = dual_cone_h(&NodeCone::BidAsk(BidAskMatrix::from_ints(&[&[1]])));
        assert_eq!(d1.rows, vec![v(&[1])]);
    }

    #[test]
    fn dd_ex41_dual_rays() {
        let rays = dd_h_to_v(&dual_cone_h(&ex41_t0()), DEFAULT_DD_LIMIT).unwrap();
        let mut got = rays.rays.clone();
        got.sort();
        assert_eq!(got, vec![v(&[1, 1]), v(&[2, 1])]);
    }

    #[test]
    fn dd_full_space_and_single_ray() {
        let full = dd_h_to_v(&ConeH { dim: 2, rows: vec![] }, 8).unwrap();
        for x in [v(&[1, 0]), v(&[-1, 0]), v(&[0, 1]), v(&[0, -1])] {
            assert!(full.contains(&x));
        }
        let h = dd_v_to_h(
            &ConeV {
                dim: 2,
                rays: vec![v(&[1, 1])],
            },
            8,
        )
        .unwrap();
        assert!(h.contains(&v(&[3, 3])));
        assert!(!h.contains(&v(&[1, 2])));
        assert!(!h.contains(&v(&[-1, -1])));
    }

    #[test]
    fn dd_dimension_limit() {
        let h = ConeH { dim: 9, rows: vec![] };
        assert!(matches!(dd_h_to_v(&h, 8), Err(ConeError::DimensionTooLarge { .. })));
    }

    /// Brute force: extreme rays of a pointed 2-d/3-d cone are solutions of
    /// (dim − 1) active rows that satisfy all rows.
    fn brute_rays(h: &ConeH) -> Vec<Vec<Rational>> {
        let d = h.dim;
        let m = h.rows.len();
        let mut out: Vec<Vec<Rational>> = Vec::new();
        let mut idx: Vec<usize> = (0..d - 1).collect();
        if m < d - 1 {
            return out;
        }
        loop {
            let sub: Vec<Vec<Rational>> = idx.iter().map(|&i| h.rows[i].clone()).collect();
            let ns = linalg::orthogonal_complement(&sub, d);
            if ns.len() == 1 {
                for s in [ns[0].clone(), vec::neg(&ns[0])] {
                    if h.contains(&s) {
                        let p = vec::primitive(&s);
                        if !out.contains(&p) {
                            out.push(p);
                        }
                    }
                }
            }
            let k = d - 1;
            let mut i = k;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if idx[i] < m - k + i {
                    idx[i] += 1;
                    for t in i + 1..k {
                        idx[t] = idx[t - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn dd_matches_brute_force_on_dual_cones() {
        let m3 = BidAskMatrix::new(vec![
            vec![q(1, 1), q(3, 2), q(2, 1)],
            vec![q(1, 1), q(1, 1), q(3, 2)],
            vec![q(3, 4), q(1, 1), q(1, 1)],
        ]);
        assert!(m3.violations().is_empty());
        let h = dual_cone_h(&NodeCone::BidAsk(m3));
        let mut dd = dd_h_to_v(&h, 8).unwrap().rays;
        let mut bf = brute_rays(&h);
        dd.sort();
        bf.sort();
        assert_eq!(dd, bf);
    }

    #[test]
    fn lineality_examples() {
        let l = lineality(&solvency_cone(&frictionless()));
        assert_eq!(l.rank(), 1);
        assert!(l.contains(&v(&[1, -1])));
        assert!(lineality(&solvency_cone(&ex41_t0())).is_zero());
        let orthant = ConeV {
            dim: 3,
            rays: (0..3).map(|i| vec::unit(3, i)).collect(),
        };
        assert!(lineality(&orthant).is_zero());
    }

    #[test]
    fn lineality_agrees_with_negation_oracle() {
        for c in [frictionless(), ex41_t0()] {
            let cone = solvency_cone(&c);
            let oracle: Vec<Vec<Rational>> = cone
                .rays
                .iter()
                .filter(|g| cone.contains(&vec::neg(g)))
                .cloned()
                .collect();
            let l = lineality(&cone);
            assert_eq!(l.rank(), linalg::rank(&oracle, 2));
            assert!(oracle.iter().all(|g| l.contains(g)));
        }
    }

    #[test]
    fn relint_examples() {
        let (w, implicit) = relint_point(&dual_cone_h(&ex41_t0())).unwrap();
        assert!(implicit.is_empty());
        let h = dual_cone_h(&ex41_t0());
        assert!(h.rows.iter().all(|a| vec::dot(a, &w).is_positive()));

        let h = dual_cone_h(&frictionless());
        let (w, implicit) = relint_point(&h).unwrap();
        assert_eq!(implicit, vec![2, 3]);
        assert_eq!(w[0], w[1]);
        assert!(w[0].is_positive());

        let zero = ConeH {
            dim: 2,
            rows: vec![v(&[1, 0]), v(&[-1, 0]), v(&[0, 1]), v(&[0, -1])],
        };
        assert!(relint_point(&zero).is_none());
    }

    #[test]
    fn relint_matches_per_row_oracle() {
        // implicit rows by one LP each: max a·w over the cone within a box
        let h = dual_cone_h(&frictionless());
        let (_, implicit) = relint_point(&h).unwrap();
        for (a, row) in h.rows.iter().enumerate() {
            let mut p = LinearProgram::new(Sense::Max, 2);
            p.objective = row.clone();
            p.bounds = vec![Bound::between(q(-1, 1), q(1, 1)); 2];
            for r in &h.rows {
                p.push(Constraint::dense(r, Relation::Ge, Rational::zero()));
            }
            let o = lp_solve(&p).unwrap();
            assert_eq!(o.value().unwrap().is_zero(), implicit.contains(&a));
        }
    }

    #[test]
    fn kernel_support_and_vanishing() {
        // columns e1, -e1, e2: kernel support {0, 1}
        let cols: Vec<SparseVec> = vec![sparse(&v(&[1, 0])), sparse(&v(&[-1, 0])), sparse(&v(&[0, 1]))];
        let k = positive_kernel(&cols, 2);
        assert_eq!(k.support, vec![0, 1]);
        assert!(k.verify(&cols, 2));
        // x2 vanishes on the kernel, x0 does not
        match functionals_vanish(&cols, 2, &k, &[vec![(2, q(1, 1))]]) {
            Vanishing::Holds(alphas) => {
                assert!(verify_vanishing(&cols, 2, &k, &[vec![(2, q(1, 1))]], &alphas))
            }
            Vanishing::Fails { .. } => panic!("x2 is zero on the kernel"),
        }
        match functionals_vanish(&cols, 2, &k, &[vec![(0, q(1, 1))]]) {
            Vanishing::Fails { x, .. } => {
                assert!(x[0].is_positive());
                assert!(vec::is_zero(&combine(&cols, &x, 2)));
            }
            Vanishing::Holds(_) => panic!("x0 is free on the kernel"),
        }
    }

    #[test]
    fn orthant_intersection() {
        assert!(cone_meets_orthant(&solvency_cone(&ex41_t0()).rays).is_none());
        assert!(cone_meets_orthant(&[v(&[1, -1]), v(&[0, 1])]).is_some());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Random bid-ask matrix: prices times spreads, closed under
        /// multiplicative shortest paths.
        pub fn bid_ask(d: usize) -> impl Strategy<Value = BidAskMatrix> {
            (
                prop::collection::vec(1i64..=4, d),
                prop::collection::vec(prop::sample::select(vec![0i64, 0, 1, 2, 4]), d * d),
            )
                .prop_map(move |(prices, spreads)| {
                    let mut pi = vec![vec![Rational::one(); d]; d];
                    for i in 0..d {
                        for j in 0..d {
                            if i != j {
                                let base = q(prices[j], prices[i]);
                                pi[i][j] = &base * &(&Rational::one() + &q(spreads[i * d + j], 4));
                            }
                        }
                    }
                    for k in 0..d {
                        for i in 0..d {
                            for j in 0..d {
                                let via = &pi[i][k] * &pi[k][j];
                                if via < pi[i][j] {
                                    pi[i][j] = via;
                                }
                            }
                        }
                    }
                    BidAskMatrix::new(pi)
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn generated_matrices_are_valid(m in (2usize..=4).prop_flat_map(bid_ask)) {
                prop_assert!(m.violations().is_empty());
            }

            #[test]
            fn ef_iff_trivial_lineality(m in (2usize..=4).prop_flat_map(bid_ask)) {
                let c = NodeCone::BidAsk(m.clone());
                prop_assert_eq!(m.efficient_friction().is_ok(), lineality(&solvency_cone(&c)).is_zero());
            }

            #[test]
            fn dual_of_dual_readmits_rays(m in (2usize..=3).prop_flat_map(bid_ask)) {
                let c = NodeCone::BidAsk(m);
                let dual_rays = dd_h_to_v(&dual_cone_h(&c), 8).unwrap();
                // K = (K*)*: every ray of K pairs nonnegatively with K* rays
                let k = solvency_cone(&c).negated();
                for r in &k.rays {
                    for z in &dual_rays.rays {
                        prop_assert!(!vec::dot(r, z).is_negative());
                    }
                }
                // and the H-rep of cone(dual rays) admits exactly K*
                let back = dd_v_to_h(&dual_rays, 8).unwrap();
                for r in &dual_rays.rays {
                    prop_assert!(dual_cone_h(&c).contains(r));
                    prop_assert!(back.contains(r));
                }
                for row in &back.rows {
                    prop_assert!(k.contains(row));
                }
            }

            #[test]
            fn dual_vectors_are_all_positive(m in (2usize..=4).prop_flat_map(bid_ask)) {
                let c = NodeCone::BidAsk(m);
                let rays = dd_h_to_v(&dual_cone_h(&c), 8).unwrap();
                for z in &rays.rays {
                    prop_assert!(z.iter().all(|x| x.is_positive()));
                }
            }
        }
    }
}
