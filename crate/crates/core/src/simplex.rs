//! Dense two-phase tableau simplex for `min c·x  s.t.  A x = b, x >= 0`.
//!
//! Pricing is Dantzig's rule; after a run of degenerate pivots the solver
//! switches to Bland's rule until a step makes progress again, which rules
//! out cycling. Rank-deficient equality systems are fine: artificial
//! variables that cannot be pivoted out mark redundant rows.

use crate::error::{Error, Result};

/// An LP in equality standard form. `a` is row-major, `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl StandardForm {
    pub fn new(rows: usize, cols: usize, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Self {
        assert_eq!(a.len(), rows * cols, "constraint matrix size");
        assert_eq!(b.len(), rows, "rhs size");
        assert_eq!(c.len(), cols, "cost size");
        Self {
            rows,
            cols,
            a,
            b,
            c,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Feasibility and optimality tolerance.
    pub tolerance: f64,
    /// Smallest admissible pivot magnitude.
    pub pivot_tolerance: f64,
    pub max_iterations: usize,
    /// Consecutive degenerate pivots before Bland's rule takes over.
    pub degenerate_streak: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            pivot_tolerance: 1e-9,
            max_iterations: 200_000,
            degenerate_streak: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `y` with `c - Aᵀy >= 0` at the optimum.
    pub duals: Vec<f64>,
    /// Basic variable per row; indices `>= cols` are artificials left in
    /// redundant rows.
    pub basis: Vec<usize>,
    pub iterations: usize,
    /// Some basic variable sits at zero, so the duals may not be unique.
    pub degenerate: bool,
    pub redundant_rows: Vec<usize>,
}

struct Tableau {
    m: usize,
    n: usize,
    width: usize,
    t: Vec<f64>,
    /// Reduced costs for all columns; the last entry is minus the objective.
    d: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
}

impl Tableau {
    fn from_problem(lp: &StandardForm, signs: &[f64]) -> Self {
        let (m, n) = (lp.rows, lp.cols);
        let width = n + m + 1;
        let mut t = vec![0.0; m * width];
        for i in 0..m {
            let row = &mut t[i * width..(i + 1) * width];
            for (dst, src) in row[..n].iter_mut().zip(lp.row(i)) {
                *dst = signs[i] * src;
            }
            row[n + i] = 1.0;
            row[width - 1] = signs[i] * lp.b[i];
        }
        Self {
            m,
            n,
            width,
            t,
            d: vec![0.0; width],
            basis: (n..n + m).collect(),
            iterations: 0,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.width + self.width - 1]
    }

    /// Recomputes the reduced cost row for per-column `costs` (length n + m).
    fn price(&mut self, costs: &[f64]) {
        self.d[..costs.len()].copy_from_slice(costs);
        self.d[self.width - 1] = 0.0;
        for i in 0..self.m {
            let cb = costs[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * self.width..(i + 1) * self.width];
            for (dj, tij) in self.d.iter_mut().zip(row) {
                *dj -= cb * tij;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width;
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        let inv = 1.0 / prow[q];
        for v in prow.iter_mut() {
            *v *= inv;
        }
        prow[q] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[q];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[q] = 0.0;
            }
        };
        before.chunks_exact_mut(w).for_each(eliminate);
        after.chunks_exact_mut(w).for_each(eliminate);
        eliminate(&mut self.d);
        self.basis[r] = q;
        self.iterations += 1;
    }

    /// Runs simplex iterations with entering columns restricted to `0..enter_limit`.
    fn optimize(&mut self, enter_limit: usize, opts: &SimplexOptions) -> Result<()> {
        let tol = opts.tolerance;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= opts.max_iterations {
                return Err(Error::NonConvergence(opts.max_iterations));
            }
            let bland = degenerate_run >= opts.degenerate_streak;
            let candidates = self.d[..enter_limit]
                .iter()
                .enumerate()
                .filter(|(_, &dj)| dj < -tol);
            let entering = if bland {
                candidates.map(|(j, _)| j).next()
            } else {
                candidates.min_by(|a, b| a.1.total_cmp(b.1)).map(|(j, _)| j)
            };
            let Some(q) = entering else { return Ok(()) };

            // Harris two-pass ratio test
            let mut bound = f64::INFINITY;
            for i in 0..self.m {
                let a = self.at(i, q);
                if a > opts.pivot_tolerance {
                    bound = bound.min((self.rhs(i).max(0.0) + tol) / a);
                }
            }
            if !bound.is_finite() {
                return Err(Error::Unbounded);
            }
            let mut leave: Option<usize> = None;
            for i in 0..self.m {
                let a = self.at(i, q);
                if a <= opts.pivot_tolerance || self.rhs(i).max(0.0) / a > bound {
                    continue;
                }
                leave = match leave {
                    None => Some(i),
                    Some(l) if bland => {
                        if self.basis[i] < self.basis[l] {
                            Some(i)
                        } else {
                            Some(l)
                        }
                    }
                    Some(l) => {
                        if a > self.at(l, q) {
                            Some(i)
                        } else {
                            Some(l)
                        }
                    }
                };
            }
            let r = leave.expect("bounded ratio test has a row");
            let step = self.rhs(r).max(0.0) / self.at(r, q);
            if step <= tol {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, q);
            for i in 0..self.m {
                let at = i * self.width + self.width - 1;
                if self.t[at] < 0.0 && self.t[at] > -tol {
                    self.t[at] = 0.0;
                }
            }
        }
    }

    fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (i, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                x[j] = self.rhs(i).max(0.0);
            }
        }
        x
    }
}

/// Rebuilds the tableau for a known basis directly from the problem data,
/// discarding accumulated round-off.
fn reinvert(lp: &StandardForm, signs: &[f64], basis: &[usize], pivot_tol: f64) -> Tableau {
    let mut tab = Tableau::from_problem(lp, signs);
    let mut assigned = vec![false; tab.m];
    for &j in basis {
        let best = (0..tab.m)
            .filter(|&i| !assigned[i])
            .max_by(|&a, &b| tab.at(a, j).abs().total_cmp(&tab.at(b, j).abs()));
        if let Some(r) = best {
            if tab.at(r, j).abs() > pivot_tol {
                tab.pivot(r, j);
                assigned[r] = true;
            }
        }
    }
    tab.iterations = 0;
    tab
}

pub fn solve(lp: &StandardForm, opts: &SimplexOptions) -> Result<SimplexSolution> {
    let (m, n) = (lp.rows, lp.cols);
    let tol = opts.tolerance;
    let signs: Vec<f64> =
        lp.b.iter()
            .map(|&b| if b < 0.0 { -1.0 } else { 1.0 })
            .collect();
    let mut tab = Tableau::from_problem(lp, &signs);

    // Phase 1: minimize the sum of artificials.
    let mut phase1 = vec![0.0; n + m];
    phase1[n..].fill(1.0);
    tab.price(&phase1);
    tab.optimize(n, opts)?;
    let infeasibility: f64 = -tab.d[tab.width - 1];
    let scale = 1.0 + lp.b.iter().map(|b| b.abs()).fold(0.0, f64::max);
    if infeasibility > tol * scale * (m as f64).sqrt().max(1.0) {
        return Err(Error::Infeasible);
    }

    // Drive artificials out of the basis where a structural pivot exists.
    let mut redundant_rows = Vec::new();
    for r in 0..m {
        if tab.basis[r] < n {
            continue;
        }
        let q = (0..n)
            .filter(|&j| tab.at(r, j).abs() > opts.pivot_tolerance.max(1e-7))
            .max_by(|&a, &b| tab.at(r, a).abs().total_cmp(&tab.at(r, b).abs()));
        match q {
            Some(q) => tab.pivot(r, q),
            None => redundant_rows.push(r),
        }
    }

    // Phase 2.
    let mut costs = lp.c.clone();
    costs.resize(n + m, 0.0);
    let mut refreshes = 0;
    loop {
        tab.price(&costs);
        tab.optimize(n, opts)?;
        let x = tab.primal();
        let residual = (0..m)
            .map(|i| {
                let ax: f64 = lp.row(i).iter().zip(&x).map(|(a, x)| a * x).sum();
                (ax - lp.b[i]).abs()
            })
            .fold(0.0, f64::max);
        if residual <= 10.0 * tol * scale || refreshes >= 3 {
            break;
        }
        let iterations = tab.iterations;
        tab = reinvert(lp, &signs, &tab.basis.clone(), opts.pivot_tolerance);
        tab.iterations = iterations;
        refreshes += 1;
    }

    let x = tab.primal();
    let objective = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    let duals = (0..m).map(|i| -tab.d[n + i] * signs[i]).collect();
    let degenerate = (0..m).any(|i| tab.basis[i] < n && tab.rhs(i) <= tol);
    Ok(SimplexSolution {
        x,
        objective,
        duals,
        basis: tab.basis,
        iterations: tab.iterations,
        degenerate,
        redundant_rows,
    })
}
