//! Dense two-phase revised simplex for small equality-form linear programs
//!
//! ```text
//! maximize cᵀx   subject to   A x = b,  x ≥ 0
//! ```
//!
//! Rows are orthonormalised first (Gram–Schmidt), which removes linearly
//! dependent constraints and keeps the basis well conditioned. Pricing is
//! Dantzig's rule with a switch to Bland's rule after a run of degenerate
//! pivots. Everything is deterministic: the same input always takes the same
//! pivot sequence.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const DEP_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-12;
const PIV_TOL: f64 = 1e-11;
const REINVERT_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// Dual prices for the original rows: `c_j − yᵀA_j ≤ 0` at optimum.
    pub duals: Vec<T>,
    /// `max_i |(A x − b)_i|` on the original rows.
    pub residual: T,
    pub iterations: usize,
}

/// Solves the LP; `a` is given row by row.
pub fn maximize<T: Scalar>(a: &[Vec<T>], b: &[T], c: &[T]) -> Result<LpSolution<T>> {
    let n = c.len();
    if a.len() != b.len() {
        return Err(Error::Solver(format!(
            "{} rows but {} right-hand sides",
            a.len(),
            b.len()
        )));
    }
    if let Some(row) = a.iter().find(|r| r.len() != n) {
        return Err(Error::Solver(format!(
            "row of length {} for {} columns",
            row.len(),
            n
        )));
    }
    let pre = presolve(a, b)?;
    let mut sx = Simplex::new(&pre.q, pre.bq.clone(), n);
    sx.run(|j| if j >= n { -T::one() } else { T::zero() })?;
    let infeas: T = sx
        .basis
        .iter()
        .zip(&sx.xb)
        .filter(|(j, _)| **j >= n)
        .map(|(_, v)| *v)
        .sum();
    if infeas > T::tol(FEAS_TOL) {
        return Err(Error::Solver(format!(
            "infeasible: phase-one residual {:e}",
            infeas.to_f64_lossy()
        )));
    }
    sx.drive_out_artificials();
    sx.run(|j| if j >= n { T::zero() } else { c[j] })?;

    let mut x = vec![T::zero(); n];
    for (&j, &v) in sx.basis.iter().zip(&sx.xb) {
        if j < n {
            x[j] = v.max(T::zero());
        }
    }
    let objective = x.iter().zip(c).map(|(xi, ci)| *xi * *ci).sum();
    let y_red = sx.duals(|j| if j >= n { T::zero() } else { c[j] });
    let mut duals = vec![T::zero(); a.len()];
    for (yk, gk) in y_red.iter().zip(&pre.g) {
        for (d, g) in duals.iter_mut().zip(gk) {
            *d = *d + *yk * *g;
        }
    }
    let residual = a
        .iter()
        .zip(b)
        .map(|(row, bi)| (row.iter().zip(&x).map(|(r, xi)| *r * *xi).sum::<T>() - *bi).abs())
        .fold(T::zero(), T::max);
    Ok(LpSolution {
        x,
        objective,
        duals,
        residual,
        iterations: sx.iters,
    })
}

struct Presolved<T> {
    /// Orthonormal constraint rows.
    q: Vec<Vec<T>>,
    bq: Vec<T>,
    /// `q_k = Σ_i g[k][i] a_i`.
    g: Vec<Vec<T>>,
}

fn dot<T: Scalar>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).map(|(a, b)| *a * *b).sum()
}

fn presolve<T: Scalar>(a: &[Vec<T>], b: &[T]) -> Result<Presolved<T>> {
    let m = a.len();
    let b_scale = b.iter().fold(T::one(), |s, v| s.max(v.abs()));
    let mut out = Presolved {
        q: Vec::new(),
        bq: Vec::new(),
        g: Vec::new(),
    };
    for (i, row) in a.iter().enumerate() {
        let mut v = row.clone();
        let mut g = vec![T::zero(); m];
        g[i] = T::one();
        let mut bv = b[i];
        let norm0 = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for k in 0..out.q.len() {
                let d = dot(&out.q[k], &v);
                for (vj, qj) in v.iter_mut().zip(&out.q[k]) {
                    *vj = *vj - d * *qj;
                }
                for (gj, hj) in g.iter_mut().zip(&out.g[k]) {
                    *gj = *gj - d * *hj;
                }
                bv = bv - d * out.bq[k];
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm <= T::tol(DEP_TOL) * norm0.max(T::one()) {
            if bv.abs() > T::tol(1e-8) * b_scale {
                return Err(Error::Solver(format!(
                    "infeasible: dependent row {i} has right-hand side mismatch {:e}",
                    bv.to_f64_lossy()
                )));
            }
            continue;
        }
        let mut s = T::one() / norm;
        if bv < T::zero() {
            s = -s;
        }
        v.iter_mut().for_each(|x| *x = *x * s);
        g.iter_mut().for_each(|x| *x = *x * s);
        out.q.push(v);
        out.g.push(g);
        out.bq.push(bv * s);
    }
    Ok(out)
}

struct Simplex<'a, T> {
    q: &'a [Vec<T>],
    b: Vec<T>,
    n: usize,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<Vec<T>>,
    xb: Vec<T>,
    iters: usize,
}

impl<'a, T: Scalar> Simplex<'a, T> {
    fn new(q: &'a [Vec<T>], b: Vec<T>, n: usize) -> Self {
        let m = q.len();
        let mut binv = vec![vec![T::zero(); m]; m];
        for (i, row) in binv.iter_mut().enumerate() {
            row[i] = T::one();
        }
        let mut is_basic = vec![false; n + m];
        is_basic[n..].iter_mut().for_each(|v| *v = true);
        Self {
            q,
            xb: b.clone(),
            b,
            n,
            basis: (n..n + m).collect(),
            is_basic,
            binv,
            iters: 0,
        }
    }

    fn m(&self) -> usize {
        self.q.len()
    }

    fn column(&self, j: usize) -> Vec<T> {
        if j < self.n {
            self.q.iter().map(|r| r[j]).collect()
        } else {
            let mut e = vec![T::zero(); self.m()];
            e[j - self.n] = T::one();
            e
        }
    }

    fn ftran(&self, col: &[T]) -> Vec<T> {
        self.binv.iter().map(|r| dot(r, col)).collect()
    }

    fn duals(&self, cost: impl Fn(usize) -> T) -> Vec<T> {
        let m = self.m();
        let mut y = vec![T::zero(); m];
        for (i, &j) in self.basis.iter().enumerate() {
            let cb = cost(j);
            if cb != T::zero() {
                for k in 0..m {
                    y[k] = y[k] + cb * self.binv[i][k];
                }
            }
        }
        y
    }

    fn run(&mut self, cost: impl Fn(usize) -> T) -> Result<()> {
        let max_iter = 50 * (self.n + self.m()) + 1000;
        let opt_tol = T::tol(OPT_TOL);
        let piv_tol = T::tol(PIV_TOL);
        let mut degenerate = 0usize;
        loop {
            if self.iters > max_iter {
                return Err(Error::Solver("simplex iteration limit reached".into()));
            }
            let y = self.duals(&cost);
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = opt_tol;
            for j in 0..self.n {
                if self.is_basic[j] {
                    continue;
                }
                let d = cost(j) - self.q.iter().zip(&y).map(|(r, yk)| r[j] * *yk).sum::<T>();
                if d > best {
                    enter = Some(j);
                    best = d;
                    if bland {
                        break;
                    }
                }
            }
            let Some(enter) = enter else {
                return Ok(());
            };
            let u = self.ftran(&self.column(enter));
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.m() {
                if u[i] <= piv_tol {
                    continue;
                }
                let ratio = self.xb[i].max(T::zero()) / u[i];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((l, r)) => {
                        let tie = (ratio - r).abs() <= T::tol(1e-14);
                        let better = if tie {
                            if bland {
                                self.basis[i] < self.basis[l]
                            } else {
                                u[i] > u[l]
                            }
                        } else {
                            ratio < r
                        };
                        if better {
                            Some((i, ratio))
                        } else {
                            Some((l, r))
                        }
                    }
                };
            }
            let Some((row, theta)) = leave else {
                return Err(Error::Solver("linear program is unbounded".into()));
            };
            // Pivots that barely move the objective count as degenerate:
            // near-parallel columns can otherwise swap back and forth on
            // rounding noise in the reduced costs.
            if theta * best <= T::tol(1e-15) {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(row, enter, &u);
            self.iters += 1;
            if self.iters.is_multiple_of(REINVERT_EVERY) {
                self.reinvert()?;
            }
        }
    }

    fn pivot(&mut self, row: usize, enter: usize, u: &[T]) {
        let m = self.m();
        let p = u[row];
        for k in 0..m {
            self.binv[row][k] = self.binv[row][k] / p;
        }
        let theta = self.xb[row] / p;
        for i in 0..m {
            if i == row || u[i] == T::zero() {
                continue;
            }
            for k in 0..m {
                self.binv[i][k] = self.binv[i][k] - u[i] * self.binv[row][k];
            }
            self.xb[i] = self.xb[i] - u[i] * theta;
            if self.xb[i] < T::zero() && self.xb[i] > -T::tol(FEAS_TOL) {
                self.xb[i] = T::zero();
            }
        }
        self.xb[row] = theta;
        self.is_basic[self.basis[row]] = false;
        self.is_basic[enter] = true;
        self.basis[row] = enter;
    }

    fn reinvert(&mut self) -> Result<()> {
        let m = self.m();
        let cols: Vec<Vec<T>> = self.basis.iter().map(|&j| self.column(j)).collect();
        // B[i][k] = cols[k][i]; Gauss–Jordan on [B | I].
        let mut aug: Vec<Vec<T>> = (0..m)
            .map(|i| {
                let mut r: Vec<T> = (0..m).map(|k| cols[k][i]).collect();
                r.extend((0..m).map(|k| if k == i { T::one() } else { T::zero() }));
                r
            })
            .collect();
        for c in 0..m {
            let piv = (c..m)
                .max_by(|&x, &y| {
                    aug[x][c]
                        .abs()
                        .partial_cmp(&aug[y][c].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(c);
            if aug[piv][c].abs() <= T::tol(1e-14) {
                return Err(Error::Solver("singular basis".into()));
            }
            aug.swap(c, piv);
            let p = aug[c][c];
            aug[c].iter_mut().for_each(|v| *v = *v / p);
            for i in 0..m {
                if i != c {
                    let f = aug[i][c];
                    if f != T::zero() {
                        for k in 0..2 * m {
                            aug[i][k] = aug[i][k] - f * aug[c][k];
                        }
                    }
                }
            }
        }
        self.binv = aug.into_iter().map(|r| r[m..].to_vec()).collect();
        self.xb = self.ftran(&self.b);
        for v in &mut self.xb {
            if *v < T::zero() && *v > -T::tol(FEAS_TOL) {
                *v = T::zero();
            }
        }
        Ok(())
    }

    /// Replaces zero-valued basic artificials by structural columns where
    /// possible; the remainder sit on redundant rows and stay at zero.
    fn drive_out_artificials(&mut self) {
        for row in 0..self.m() {
            if self.basis[row] < self.n {
                continue;
            }
            let pick = (0..self.n).filter(|&j| !self.is_basic[j]).find(|&j| {
                let v: T = self.binv[row]
                    .iter()
                    .zip(self.q)
                    .map(|(bk, r)| *bk * r[j])
                    .sum();
                v.abs() > T::tol(1e-9)
            });
            if let Some(j) = pick {
                let u = self.ftran(&self.column(j));
                self.pivot(row, j, &u);
                self.iters += 1;
            }
        }
    }
}
