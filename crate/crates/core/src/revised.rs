//! Revised simplex with an explicit basis inverse and implicit columns.
//!
//! The constraint matrix is only accessed through [`ColumnSource`]: single
//! column lookups and products `Aᵀy`. For the visibility problem both are
//! cheap because the strategy matrix is a Kronecker product, so an
//! iteration costs `O(m²)` for the inverse update instead of `O(m·n)` for a
//! full tableau pivot.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::simplex::{SimplexOptions, SimplexSolution, StandardForm};

/// Read access to the columns of a constraint matrix.
pub trait ColumnSource {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// Writes column `j` into `out` (length `rows`).
    fn column(&self, j: usize, out: &mut [f64]);
    /// Writes `out[j] = Σ_i y[i] A[i][j]` for every column.
    fn transpose_product(&self, y: &[f64], out: &mut [f64]);
}

impl ColumnSource for StandardForm {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn column(&self, j: usize, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.a[i * self.cols + j];
        }
    }

    fn transpose_product(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, a) in out
                .iter_mut()
                .zip(&self.a[i * self.cols..(i + 1) * self.cols])
            {
                *o += yi * a;
            }
        }
    }
}

/// Iterations between residual checks is `max(64, m / 2)`.
const RESIDUAL_CHECK_MIN: usize = 64;

/// Dot product with independent lanes so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
        // SAFETY: the required CPU features were just detected.
        return unsafe { dot_avx2(a, b) };
    }
    dot_generic(a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn dot_avx2(a: &[f64], b: &[f64]) -> f64 {
    dot_generic(a, b)
}

/// `y -= f * x`.
fn sub_scaled(y: &mut [f64], f: f64, x: &[f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
        // SAFETY: the required CPU features were just detected.
        return unsafe { sub_scaled_avx2(y, f, x) };
    }
    sub_scaled_generic(y, f, x)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn sub_scaled_avx2(y: &mut [f64], f: f64, x: &[f64]) {
    sub_scaled_generic(y, f, x)
}

#[inline(always)]
fn sub_scaled_generic(y: &mut [f64], f: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y -= f * x);
}

#[inline(always)]
fn dot_generic(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0f64; 8];
    let (ac, bc) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ac
        .remainder()
        .iter()
        .zip(bc.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ac.zip(bc) {
        for k in 0..8 {
            lanes[k] += x[k] * y[k];
        }
    }
    lanes.iter().sum::<f64>() + tail
}

struct Revised<'a, S: ColumnSource> {
    src: &'a S,
    m: usize,
    n: usize,
    /// Row orientation making `b >= 0`.
    signs: Vec<f64>,
    b: Vec<f64>,
    /// Basic variable per row; `n + i` is the artificial of row i.
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    costs: Vec<f64>,
    y: Vec<f64>,
    reduced: Vec<f64>,
    col: Vec<f64>,
    alpha: Vec<f64>,
    scratch: Vec<f64>,
    iterations: usize,
}

impl<'a, S: ColumnSource> Revised<'a, S> {
    fn new(src: &'a S, b: &[f64]) -> Self {
        let (m, n) = (src.rows(), src.cols());
        let signs: Vec<f64> = b
            .iter()
            .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
            .collect();
        let b: Vec<f64> = b.iter().zip(&signs).map(|(v, s)| v * s).collect();
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Self {
            src,
            m,
            n,
            signs,
            xb: b.clone(),
            b,
            basis: (n..n + m).collect(),
            is_basic: vec![false; n],
            binv,
            costs: vec![0.0; n + m],
            y: vec![0.0; m],
            reduced: vec![0.0; n],
            col: vec![0.0; m],
            alpha: vec![0.0; m],
            scratch: vec![0.0; m],
            iterations: 0,
        }
    }

    /// Column `j` of the row-oriented problem, artificials included.
    fn load_column(&mut self, j: usize) {
        if j < self.n {
            self.src.column(j, &mut self.col);
            for (c, s) in self.col.iter_mut().zip(&self.signs) {
                *c *= s;
            }
        } else {
            self.col.fill(0.0);
            self.col[j - self.n] = 1.0;
        }
    }

    fn ftran(&mut self) {
        let m = self.m;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.alpha[i] = dot(row, &self.col);
        }
    }

    /// `y = c_Bᵀ B⁻¹` from scratch.
    fn recompute_duals(&mut self) {
        let m = self.m;
        self.y.fill(0.0);
        for i in 0..m {
            let cb = self.costs[self.basis[i]];
            if cb != 0.0 {
                for (y, b) in self.y.iter_mut().zip(&self.binv[i * m..(i + 1) * m]) {
                    *y += cb * b;
                }
            }
        }
    }

    /// Reduced costs `c_j - yᵀ a'_j` of the structural columns.
    fn price(&mut self) {
        for (s, (y, sign)) in self.scratch.iter_mut().zip(self.y.iter().zip(&self.signs)) {
            *s = y * sign;
        }
        self.src.transpose_product(&self.scratch, &mut self.reduced);
        for (d, c) in self.reduced.iter_mut().zip(&self.costs) {
            *d = c - *d;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let m = self.m;
        let pivot = self.alpha[r];
        let step = self.xb[r] / pivot;
        for i in 0..m {
            if i != r {
                self.xb[i] -= step * self.alpha[i];
            }
        }
        self.xb[r] = step;

        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        let inv = 1.0 / pivot;
        prow.iter_mut().for_each(|v| *v *= inv);
        let alpha = &self.alpha;
        for (i, row) in before.chunks_exact_mut(m).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                sub_scaled(row, f, prow);
            }
        }
        for (k, row) in after.chunks_exact_mut(m).enumerate() {
            let f = alpha[r + 1 + k];
            if f != 0.0 {
                sub_scaled(row, f, prow);
            }
        }

        let leaving = self.basis[r];
        if leaving < self.n {
            self.is_basic[leaving] = false;
        }
        if q < self.n {
            self.is_basic[q] = true;
        }
        self.basis[r] = q;
        self.iterations += 1;
    }

    /// Rebuilds `B⁻¹` and `x_B` from the basis columns.
    fn reinvert(&mut self) -> Result<()> {
        let m = self.m;
        let mut b = DMatrix::<f64>::zeros(m, m);
        for (k, &j) in self.basis.clone().iter().enumerate() {
            self.load_column(j);
            for i in 0..m {
                b[(i, k)] = self.col[i];
            }
        }
        let inv = b
            .lu()
            .try_inverse()
            .ok_or(Error::NonConvergence(self.iterations))?;
        for i in 0..m {
            for k in 0..m {
                self.binv[i * m + k] = inv[(i, k)];
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.xb[i] = dot(row, &self.b);
        }
        Ok(())
    }

    fn residual(&mut self) -> f64 {
        let mut acc = vec![0.0; self.m];
        for (k, &j) in self.basis.clone().iter().enumerate() {
            let x = self.xb[k];
            if x == 0.0 {
                continue;
            }
            self.load_column(j);
            for (a, c) in acc.iter_mut().zip(&self.col) {
                *a += c * x;
            }
        }
        acc.iter()
            .zip(&self.b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn optimize(&mut self, opts: &SimplexOptions, scale: f64) -> Result<()> {
        let tol = opts.tolerance;
        let mut degenerate_run = 0usize;
        let mut since_check = 0usize;
        let check_every = RESIDUAL_CHECK_MIN.max(self.m / 2);
        self.recompute_duals();
        loop {
            if self.iterations >= opts.max_iterations {
                return Err(Error::NonConvergence(opts.max_iterations));
            }
            if since_check >= check_every {
                since_check = 0;
                if self.residual() > tol * scale {
                    self.reinvert()?;
                    self.recompute_duals();
                }
            }
            self.price();
            let bland = degenerate_run >= opts.degenerate_streak;
            let is_basic = &self.is_basic;
            let candidates = self
                .reduced
                .iter()
                .enumerate()
                .filter(|&(j, &d)| d < -tol && !is_basic[j]);
            let entering = if bland {
                candidates.map(|(j, _)| j).next()
            } else {
                candidates.min_by(|a, b| a.1.total_cmp(b.1)).map(|(j, _)| j)
            };
            let Some(q) = entering else {
                // confirm optimality on a fresh factorization
                if self.residual() > tol * scale {
                    self.reinvert()?;
                    self.recompute_duals();
                    continue;
                }
                return Ok(());
            };
            let dq = self.reduced[q];
            self.load_column(q);
            self.ftran();

            let mut bound = f64::INFINITY;
            for i in 0..self.m {
                let a = self.alpha[i];
                if a > opts.pivot_tolerance {
                    bound = bound.min((self.xb[i].max(0.0) + tol) / a);
                }
            }
            if !bound.is_finite() {
                return Err(Error::Unbounded);
            }
            let mut leave: Option<usize> = None;
            for i in 0..self.m {
                let a = self.alpha[i];
                if a <= opts.pivot_tolerance || self.xb[i].max(0.0) / a > bound {
                    continue;
                }
                leave = match leave {
                    None => Some(i),
                    Some(l) if bland => Some(if self.basis[i] < self.basis[l] { i } else { l }),
                    Some(l) => Some(if a > self.alpha[l] { i } else { l }),
                };
            }
            let r = leave.expect("bounded ratio test has a row");
            if self.xb[r].max(0.0) / self.alpha[r] <= tol {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            // y += (d_q / α_r) · (row r of B⁻¹), taken before the update
            let f = dq / self.alpha[r];
            let m = self.m;
            for (y, b) in self.y.iter_mut().zip(&self.binv[r * m..(r + 1) * m]) {
                *y += f * b;
            }
            self.pivot(r, q);
            for x in self.xb.iter_mut() {
                if *x < 0.0 && *x > -tol {
                    *x = 0.0;
                }
            }
            since_check += 1;
        }
    }
}

/// Solves `min c·x  s.t.  A x = b, x >= 0` with `A` given implicitly.
pub fn solve<S: ColumnSource>(
    src: &S,
    b: &[f64],
    c: &[f64],
    opts: &SimplexOptions,
) -> Result<SimplexSolution> {
    let (m, n) = (src.rows(), src.cols());
    assert_eq!(b.len(), m, "rhs size");
    assert_eq!(c.len(), n, "cost size");
    let tol = opts.tolerance;
    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut lp = Revised::new(src, b);

    lp.costs[n..].fill(1.0);
    lp.optimize(opts, scale)?;
    let infeasibility: f64 = (0..m)
        .filter(|&i| lp.basis[i] >= n)
        .map(|i| lp.xb[i].max(0.0))
        .sum();
    if infeasibility > tol * scale * (m as f64).sqrt().max(1.0) {
        return Err(Error::Infeasible);
    }

    // Pivot remaining artificials out; row r of B⁻¹A' is a transposed product.
    let mut redundant_rows = Vec::new();
    for r in 0..m {
        if lp.basis[r] < n {
            continue;
        }
        for i in 0..m {
            lp.scratch[i] = lp.binv[r * m + i] * lp.signs[i];
        }
        let mut row = vec![0.0; n];
        src.transpose_product(&lp.scratch, &mut row);
        let q = (0..n)
            .filter(|&j| !lp.is_basic[j] && row[j].abs() > opts.pivot_tolerance.max(1e-7))
            .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()));
        match q {
            Some(q) => {
                lp.load_column(q);
                lp.ftran();
                lp.pivot(r, q);
            }
            None => redundant_rows.push(r),
        }
    }

    lp.costs[..n].copy_from_slice(c);
    lp.costs[n..].fill(0.0);
    lp.optimize(opts, scale)?;

    let mut x = vec![0.0; n];
    for (i, &j) in lp.basis.iter().enumerate() {
        if j < n {
            x[j] = lp.xb[i].max(0.0);
        }
    }
    let objective = c.iter().zip(&x).map(|(c, x)| c * x).sum();
    lp.recompute_duals();
    let duals = lp.y.iter().zip(&lp.signs).map(|(y, s)| y * s).collect();
    let degenerate = (0..m).any(|i| lp.basis[i] < n && lp.xb[i] <= tol);
    Ok(SimplexSolution {
        x,
        objective,
        duals,
        basis: lp.basis,
        iterations: lp.iterations,
        degenerate,
        redundant_rows,
    })
}
