//! Critical white-noise visibility of a behavior.
//!
//! The local polytope is the convex hull of deterministic strategies. Mixing
//! a behavior with white noise at weight `1 - v` scales every correlator by
//! `v`, so the critical visibility is the largest `v <= 1` for which the
//! scaled point is still a mixture of deterministic strategies.
//!
//! Two equivalent programs are provided:
//!
//! * [`build_visibility_lp`] states the problem over outcome probabilities,
//!   one equality per `(s, r)` pair plus normalization, and [`solve_lp`]
//!   solves it. This form is redundant (the per-setting normalizations are
//!   implied) and is kept for auditing.
//! * [`critical_visibility`] works in correlator coordinates, where the
//!   rows are linearly independent: minimize `Σ w` subject to
//!   `Σ_λ w_λ c_λ = E`, `w >= 0`. The optimum is the gauge of `E` with
//!   respect to the local polytope and `v_crit = min(1, 1/gauge)`. Its dual
//!   is a Bell functional with local bound 1, which becomes the certificate.

use crate::behavior::{expectation_values, for_each_tuple, Behavior, CorrelationTable};
use crate::error::{param, Error, Result};
use crate::revised::{self, ColumnSource};
use crate::simplex::{self, SimplexOptions, StandardForm};

/// Strengths above this count as a violation of local realism.
pub const VIOLATION_THRESHOLD: f64 = 1e-6;

/// Default cap on the number of deterministic strategies.
pub const DEFAULT_STRATEGY_CAP: u128 = 1 << 20;

/// Number of deterministic strategies `∏ 2^{m_i}` of a scenario.
pub fn strategy_count(shape: &[usize]) -> u128 {
    let bits: usize = shape.iter().sum();
    if bits >= 127 {
        u128::MAX
    } else {
        1u128 << bits
    }
}

fn check_capacity(shape: &[usize], cap: u128) -> Result<usize> {
    let strategies = strategy_count(shape);
    if strategies > cap {
        return Err(Error::Capacity { strategies, cap });
    }
    Ok(strategies as usize)
}

/// One outcome per setting per party. Bit `k` of `local[i]` set means party
/// `i` answers -1 to setting `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicStrategy {
    shape: Vec<usize>,
    local: Vec<usize>,
}

impl DeterministicStrategy {
    /// Decodes a flat strategy index (party 0 most significant).
    pub fn from_index(shape: &[usize], mut index: usize) -> Self {
        let mut local = vec![0; shape.len()];
        for (slot, &m) in local.iter_mut().zip(shape).rev() {
            *slot = index & ((1 << m) - 1);
            index >>= m;
        }
        Self {
            shape: shape.to_vec(),
            local,
        }
    }

    /// Iterates all `∏ 2^{m_i}` strategies of a small scenario.
    pub fn all(shape: &[usize]) -> impl Iterator<Item = DeterministicStrategy> + '_ {
        let count = strategy_count(shape) as usize;
        (0..count).map(move |idx| Self::from_index(shape, idx))
    }

    pub fn outcome(&self, party: usize, setting: usize) -> i8 {
        if (self.local[party] >> setting) & 1 == 1 {
            -1
        } else {
            1
        }
    }

    /// Outcome bit string (bit 0 for +1) for a setting combination.
    pub fn outcome_bits(&self, settings: &[usize]) -> usize {
        let n = self.shape.len();
        settings.iter().enumerate().fold(0, |acc, (i, &k)| {
            acc | (((self.local[i] >> k) & 1) << (n - 1 - i))
        })
    }

    /// The 0/1 behavior induced by this strategy.
    pub fn behavior(&self) -> Behavior {
        let n_out = 1usize << self.shape.len();
        let mut probabilities = Vec::new();
        for_each_tuple(&self.shape, |s| {
            let r = self.outcome_bits(s);
            probabilities.extend((0..n_out).map(|o| if o == r { 1.0 } else { 0.0 }));
        });
        Behavior::new(self.shape.clone(), probabilities).expect("deterministic behavior is valid")
    }
}

/// The visibility LP over outcome probabilities, stored sparsely.
///
/// Variables are the strategy weights `q_λ` followed by `v`. Row `(s, r)`
/// reads `Σ_λ q_λ D_λ(r|s) - v (p(r|s) - 2^-N) = 2^-N`; the last row is
/// `Σ_λ q_λ = 1`. The objective is to maximize `v` with `0 <= v <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpModel {
    shape: Vec<usize>,
    n_strategies: usize,
    /// For each strategy, the outcome row it touches in each setting combination.
    touched_rows: Vec<u32>,
    visibility_column: Vec<f64>,
    rhs: Vec<f64>,
}

impl LpModel {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn n_strategies(&self) -> usize {
        self.n_strategies
    }

    /// Strategies plus the visibility variable.
    pub fn n_variables(&self) -> usize {
        self.n_strategies + 1
    }

    pub fn n_outcome_rows(&self) -> usize {
        self.visibility_column.len()
    }

    /// Outcome rows plus the normalization row.
    pub fn n_rows(&self) -> usize {
        self.n_outcome_rows() + 1
    }

    /// Rows (all with coefficient 1) where strategy `lambda` appears.
    pub fn strategy_rows(&self, lambda: usize) -> &[u32] {
        let per = self.touched_rows.len() / self.n_strategies;
        &self.touched_rows[lambda * per..(lambda + 1) * per]
    }

    pub fn visibility_column(&self) -> &[f64] {
        &self.visibility_column
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Checks every row at a candidate point.
    pub fn residual(&self, q: &[f64], v: f64) -> f64 {
        let mut lhs: Vec<f64> = self.visibility_column.iter().map(|c| c * v).collect();
        lhs.push(q.iter().sum());
        for (lambda, &w) in q.iter().enumerate() {
            for &row in self.strategy_rows(lambda) {
                lhs[row as usize] += w;
            }
        }
        lhs.iter()
            .zip(&self.rhs)
            .map(|(l, r)| (l - r).abs())
            .fold(0.0, f64::max)
    }
}

pub fn build_visibility_lp(behavior: &Behavior) -> Result<LpModel> {
    build_visibility_lp_capped(behavior, DEFAULT_STRATEGY_CAP)
}

pub fn build_visibility_lp_capped(behavior: &Behavior, cap: u128) -> Result<LpModel> {
    let shape = behavior.shape().to_vec();
    let n_strategies = check_capacity(&shape, cap)?;
    let n_out = behavior.n_outcomes();
    let noise = 1.0 / n_out as f64;
    let n_settings = behavior.n_setting_combinations();
    let mut touched_rows = Vec::with_capacity(n_strategies * n_settings);
    for strategy in DeterministicStrategy::all(&shape) {
        let mut s_flat = 0;
        for_each_tuple(&shape, |s| {
            touched_rows.push((s_flat * n_out + strategy.outcome_bits(s)) as u32);
            s_flat += 1;
        });
    }
    let visibility_column = behavior
        .probabilities()
        .iter()
        .map(|p| -(p - noise))
        .collect();
    let mut rhs = vec![noise; n_settings * n_out];
    rhs.push(1.0);
    Ok(LpModel {
        shape,
        n_strategies,
        touched_rows,
        visibility_column,
        rhs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Optimal visibility.
    pub objective: f64,
    pub strategy_weights: Vec<f64>,
    /// Multipliers for the outcome rows followed by the normalization row.
    pub duals: Vec<f64>,
    pub non_unique_duals: bool,
    pub iterations: usize,
}

/// Solves an [`LpModel`] with the dense simplex.
pub fn solve_lp(model: &LpModel) -> Result<LpSolution> {
    solve_lp_with(model, &SimplexOptions::default())
}

pub fn solve_lp_with(model: &LpModel, opts: &SimplexOptions) -> Result<LpSolution> {
    // columns: q_λ, v, slack t with v + t = 1
    let n = model.n_strategies;
    let cols = n + 2;
    let rows = model.n_rows() + 1;
    let mut a = vec![0.0; rows * cols];
    for lambda in 0..n {
        for &row in model.strategy_rows(lambda) {
            a[row as usize * cols + lambda] = 1.0;
        }
        a[(rows - 2) * cols + lambda] = 1.0;
    }
    for (row, c) in model.visibility_column.iter().enumerate() {
        a[row * cols + n] = *c;
    }
    a[(rows - 1) * cols + n] = 1.0;
    a[(rows - 1) * cols + n + 1] = 1.0;
    let mut b = model.rhs.clone();
    b.push(1.0);
    let mut c = vec![0.0; cols];
    c[n] = -1.0;
    let sol = simplex::solve(&StandardForm::new(rows, cols, a, b, c), opts)?;
    let mut duals = sol.duals;
    duals.pop();
    Ok(LpSolution {
        objective: sol.x[n],
        strategy_weights: sol.x[..n].to_vec(),
        duals,
        non_unique_duals: sol.degenerate,
        iterations: sol.iterations,
    })
}

/// A Bell functional separating a behavior from the local polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Coefficient per `(s, r)` entry, in behavior layout.
    pub coefficients: Vec<f64>,
    /// The same functional in correlator coordinates (entry 0 unused, 0).
    pub correlators: CorrelationTable,
    /// Maximum of the functional over all deterministic strategies.
    pub local_bound: f64,
    /// Value of the functional on the behavior.
    pub value: f64,
    pub non_unique: bool,
}

impl Certificate {
    /// Evaluates the functional on any behavior of the same scenario.
    pub fn evaluate(&self, behavior: &Behavior) -> f64 {
        self.coefficients
            .iter()
            .zip(behavior.probabilities())
            .map(|(c, p)| c * p)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityResult {
    pub v_crit: f64,
    pub strength: f64,
    pub violated: bool,
    pub certificate: Option<Certificate>,
}

#[derive(Debug, Clone, Copy)]
pub struct VisibilityOptions {
    pub strategy_cap: u128,
    pub simplex: SimplexOptions,
    pub with_certificate: bool,
}

impl Default for VisibilityOptions {
    fn default() -> Self {
        Self {
            strategy_cap: DEFAULT_STRATEGY_CAP,
            simplex: SimplexOptions::default(),
            with_certificate: true,
        }
    }
}

pub fn critical_visibility(behavior: &Behavior) -> Result<VisibilityResult> {
    critical_visibility_with(behavior, &VisibilityOptions::default())
}

pub fn critical_visibility_with(
    behavior: &Behavior,
    opts: &VisibilityOptions,
) -> Result<VisibilityResult> {
    let corr = expectation_values(behavior);
    let gauge = GaugeProgram::new(behavior.shape(), opts.strategy_cap)?;
    let sol = gauge.solve(&corr, &opts.simplex)?;
    let v_crit = if sol.objective > 1.0 {
        1.0 / sol.objective
    } else {
        1.0
    };
    let strength = (1.0 - v_crit).clamp(0.0, 1.0);
    let violated = strength > VIOLATION_THRESHOLD;
    let certificate =
        (opts.with_certificate && violated).then(|| gauge.certificate(behavior, &corr, &sol));
    Ok(VisibilityResult {
        v_crit,
        strength,
        violated,
        certificate,
    })
}

/// Strength `1 - v_crit` of a behavior, without a certificate.
pub fn strength(behavior: &Behavior) -> Result<f64> {
    let opts = VisibilityOptions {
        with_certificate: false,
        ..Default::default()
    };
    Ok(critical_visibility_with(behavior, &opts)?.strength)
}

/// Correlator-coordinate matrix of all deterministic strategies, the
/// Kronecker product of one `(m+1) x 2^m` table per party with the
/// normalization row removed. Never materialized.
struct GaugeProgram {
    shape: Vec<usize>,
    /// Per party, row-major `(m+1) x 2^m`: row 0 is all ones, row `k+1`
    /// holds the outcome each local strategy gives to setting `k`.
    local: Vec<Vec<f64>>,
    rows: usize,
    cols: usize,
}

impl GaugeProgram {
    fn new(shape: &[usize], cap: u128) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return param(format!("invalid scenario shape {shape:?}"));
        }
        let cols = check_capacity(shape, cap)?;
        let local = shape
            .iter()
            .map(|&m| {
                let width = 1usize << m;
                let mut table = vec![1.0; (m + 1) * width];
                for k in 0..m {
                    for l in 0..width {
                        if (l >> k) & 1 == 1 {
                            table[(k + 1) * width + l] = -1.0;
                        }
                    }
                }
                table
            })
            .collect();
        let rows = shape.iter().map(|m| m + 1).product::<usize>() - 1;
        Ok(Self {
            shape: shape.to_vec(),
            local,
            rows,
            cols,
        })
    }

    fn solve(
        &self,
        corr: &CorrelationTable,
        opts: &SimplexOptions,
    ) -> Result<simplex::SimplexSolution> {
        revised::solve(self, &corr.values()[1..], &vec![1.0; self.cols], opts)
    }

    fn certificate(
        &self,
        behavior: &Behavior,
        corr: &CorrelationTable,
        sol: &simplex::SimplexSolution,
    ) -> Certificate {
        let y = &sol.duals;
        let mut on_strategies = vec![0.0; self.cols];
        self.transpose_product(y, &mut on_strategies);
        let local_bound = on_strategies
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let value: f64 = y.iter().zip(&corr.values()[1..]).map(|(y, e)| y * e).sum();

        // Spread each correlator coefficient over the outcome entries of the
        // setting combination that `expectation_values` reads it from.
        let n = self.shape.len();
        let ext_shape: Vec<usize> = self.shape.iter().map(|m| m + 1).collect();
        let n_out = behavior.n_outcomes();
        let mut coefficients = vec![0.0; behavior.probabilities().len()];
        let mut settings = vec![0; n];
        let mut row = 0usize;
        let mut table = vec![0.0];
        for_each_tuple(&ext_shape, |t| {
            if t.iter().all(|&x| x == 0) {
                return;
            }
            let coef = y[row];
            table.push(coef);
            row += 1;
            let mut mask = 0;
            for (i, &ti) in t.iter().enumerate() {
                settings[i] = ti.saturating_sub(1);
                if ti > 0 {
                    mask |= 1 << (n - 1 - i);
                }
            }
            let at = behavior.setting_index(&settings) * n_out;
            for r in 0..n_out {
                let sign = if (r & mask).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                coefficients[at + r] += sign * coef;
            }
        });
        Certificate {
            coefficients,
            correlators: CorrelationTable::from_values(self.shape.clone(), table),
            local_bound,
            value,
            non_unique: sol.degenerate,
        }
    }
}

impl ColumnSource for GaugeProgram {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn column(&self, j: usize, out: &mut [f64]) {
        // Kronecker product of per-party columns, built in place; the
        // leading normalization entry is dropped at the end.
        let strategy = DeterministicStrategy::from_index(&self.shape, j);
        let mut buf = vec![1.0; self.shape.iter().map(|m| m + 1).product()];
        let mut len = 1usize;
        for (i, &m) in self.shape.iter().enumerate() {
            let width = 1usize << m;
            let l = strategy.local[i];
            for f in (0..len).rev() {
                let base = buf[f];
                for t in (0..=m).rev() {
                    buf[f * (m + 1) + t] = base * self.local[i][t * width + l];
                }
            }
            len *= m + 1;
        }
        debug_assert_eq!(buf[0], 1.0);
        out.copy_from_slice(&buf[buf.len() - self.rows..]);
    }

    fn transpose_product(&self, y: &[f64], out: &mut [f64]) {
        // Contract one party axis at a time: (m+1) -> 2^m.
        let mut dims: Vec<usize> = self.shape.iter().map(|m| m + 1).collect();
        let mut tensor = Vec::with_capacity(self.rows + 1);
        tensor.push(0.0);
        tensor.extend_from_slice(y);
        for (k, &m) in self.shape.iter().enumerate() {
            let width = 1usize << m;
            let outer: usize = dims[..k].iter().product();
            let inner: usize = dims[k + 1..].iter().product();
            let table = &self.local[k];
            let mut next = vec![0.0; outer * width * inner];
            for o in 0..outer {
                for t in 0..=m {
                    let src = &tensor[(o * (m + 1) + t) * inner..(o * (m + 1) + t + 1) * inner];
                    for l in 0..width {
                        let p = table[t * width + l];
                        let dst = &mut next[(o * width + l) * inner..(o * width + l + 1) * inner];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += p * s;
                        }
                    }
                }
            }
            tensor = next;
            dims[k] = width;
        }
        out.copy_from_slice(&tensor);
    }
}
