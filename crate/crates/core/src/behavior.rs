//! Joint outcome statistics `p(r|s)` and their correlator representation.
//!
//! Setting combinations `s` are flattened row-major over the scenario shape
//! with party 0 most significant. Outcome combinations `r` are bit strings
//! with party 0 as the most significant bit, bit value 0 meaning outcome +1.

use num_complex::Complex64;

use crate::error::{param, Result};
use crate::measurement::MeasurementSetup;
use crate::state::StateVector;

const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    shape: Vec<usize>,
    probabilities: Vec<f64>,
}

impl Behavior {
    /// Wraps a probability table, validating its size, range and per-setting
    /// normalization. Tiny negative round-off is clamped to zero.
    pub fn new(shape: Vec<usize>, mut probabilities: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return param(format!("invalid scenario shape {shape:?}"));
        }
        let n_outcomes = 1usize << shape.len();
        let n_settings: usize = shape.iter().product();
        if probabilities.len() != n_settings * n_outcomes {
            return param(format!(
                "expected {} probabilities, got {}",
                n_settings * n_outcomes,
                probabilities.len()
            ));
        }
        for p in probabilities.iter_mut() {
            if !(-PROB_TOL..=1.0 + PROB_TOL).contains(p) {
                return param(format!("probability {p} outside [0, 1]"));
            }
            *p = p.clamp(0.0, 1.0);
        }
        for (s, block) in probabilities.chunks(n_outcomes).enumerate() {
            let total: f64 = block.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return param(format!("setting combination {s} sums to {total}"));
            }
        }
        Ok(Self {
            shape,
            probabilities,
        })
    }

    /// White noise: every outcome equally likely for every setting.
    pub fn uniform(shape: &[usize]) -> Result<Self> {
        let n_outcomes = 1usize << shape.len();
        let n_settings: usize = shape.iter().product();
        Self::new(
            shape.to_vec(),
            vec![1.0 / n_outcomes as f64; n_settings * n_outcomes],
        )
    }

    pub fn n_parties(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn n_outcomes(&self) -> usize {
        1 << self.shape.len()
    }

    pub fn n_setting_combinations(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Flat index of a setting combination.
    pub fn setting_index(&self, settings: &[usize]) -> usize {
        flat_index(&self.shape, settings)
    }

    pub fn prob(&self, settings: &[usize], outcome_bits: usize) -> f64 {
        self.probabilities[self.setting_index(settings) * self.n_outcomes() + outcome_bits]
    }

    /// Sub-behavior over the kept setting indices of each party.
    pub fn restrict(&self, kept: &[Vec<usize>]) -> Result<Behavior> {
        if kept.len() != self.n_parties() {
            return param(format!(
                "restriction lists {} parties, behavior has {}",
                kept.len(),
                self.n_parties()
            ));
        }
        for (i, (list, &m)) in kept.iter().zip(&self.shape).enumerate() {
            if list.is_empty() {
                return param(format!("party {i} keeps no settings"));
            }
            if let Some(&bad) = list.iter().find(|&&k| k >= m) {
                return param(format!(
                    "setting {bad} out of range for party {i} with {m} settings"
                ));
            }
        }
        let new_shape: Vec<usize> = kept.iter().map(Vec::len).collect();
        let n_out = self.n_outcomes();
        let mut probabilities = Vec::with_capacity(new_shape.iter().product::<usize>() * n_out);
        for_each_tuple(&new_shape, |sub| {
            let orig: Vec<usize> = sub.iter().zip(kept).map(|(&k, list)| list[k]).collect();
            let at = self.setting_index(&orig) * n_out;
            probabilities.extend_from_slice(&self.probabilities[at..at + n_out]);
        });
        Ok(Behavior {
            shape: new_shape,
            probabilities,
        })
    }
}

/// Born-rule statistics of `state` under product measurements from `setup`.
pub fn compute_behavior(state: &StateVector, setup: &MeasurementSetup) -> Result<Behavior> {
    let n = state.n_qubits();
    if setup.n_parties() != n {
        return param(format!(
            "setup has {} parties but the state has {n} qubits",
            setup.n_parties()
        ));
    }
    let shape = setup.shape();
    let dim = 1usize << n;
    let total: usize = shape.iter().product::<usize>() * dim;
    let mut probabilities = Vec::with_capacity(total);
    let mut scratch = vec![state.amplitudes().to_vec()];
    scratch.extend((0..n).map(|_| vec![Complex64::new(0.0, 0.0); dim]));
    rotate_party(setup, 0, &mut scratch, &mut probabilities);
    Behavior::new(shape, probabilities)
}

// Depth-first over parties: level `party` of `buf` holds the state after the
// outcome-basis change of parties 0..party. Setting order comes out row-major.
fn rotate_party(
    setup: &MeasurementSetup,
    party: usize,
    buf: &mut [Vec<Complex64>],
    out: &mut Vec<f64>,
) {
    let n = setup.n_parties();
    if party == n {
        out.extend(buf[n].iter().map(|a| a.norm_sqr()));
        return;
    }
    let stride = 1usize << (n - 1 - party);
    for obs in setup.party(party) {
        let u = obs.outcome_bras();
        let (head, tail) = buf.split_at_mut(party + 1);
        let src = &head[party];
        let dst = &mut tail[0];
        for base in 0..src.len() {
            if base & stride != 0 {
                continue;
            }
            let a0 = src[base];
            let a1 = src[base | stride];
            dst[base] = u[0][0] * a0 + u[0][1] * a1;
            dst[base | stride] = u[1][0] * a0 + u[1][1] * a1;
        }
        rotate_party(setup, party + 1, buf, out);
    }
}

/// Standalone alias for [`Behavior::restrict`].
pub fn restrict_behavior(behavior: &Behavior, kept: &[Vec<usize>]) -> Result<Behavior> {
    behavior.restrict(kept)
}

/// Expectation values of products of ±1 outcomes for every subset of parties.
///
/// Entries are indexed by an extended tuple `t` with `t_i = 0` when party i
/// is not in the subset and `t_i = k + 1` when it measures setting `k`. The
/// all-zero tuple (empty subset) is the normalization and always equals 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl CorrelationTable {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().map(|m| m + 1).product();
        let mut values = vec![0.0; len];
        values[0] = 1.0;
        Self {
            shape: shape.to_vec(),
            values,
        }
    }

    /// Two-party table with vanishing marginals and the given `<a_i b_j>`.
    pub fn from_full_correlations(matrix: &[Vec<f64>]) -> Result<Self> {
        let m1 = matrix.len();
        let m2 = matrix.first().map_or(0, Vec::len);
        if m1 == 0 || m2 == 0 || matrix.iter().any(|row| row.len() != m2) {
            return param("correlation matrix must be non-empty and rectangular");
        }
        let mut table = Self::zeros(&[m1, m2]);
        for (i, row) in matrix.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                table.set(&[Some(i), Some(j)], e);
            }
        }
        Ok(table)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn n_parties(&self) -> usize {
        self.shape.len()
    }

    /// Raw values in extended-tuple order, including the leading 1.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index(&self, settings: &[Option<usize>]) -> usize {
        let ext: Vec<usize> = settings.iter().map(|s| s.map_or(0, |k| k + 1)).collect();
        let ext_shape: Vec<usize> = self.shape.iter().map(|m| m + 1).collect();
        flat_index(&ext_shape, &ext)
    }

    /// `settings[i] = None` leaves party i out of the product.
    pub fn get(&self, settings: &[Option<usize>]) -> f64 {
        self.values[self.index(settings)]
    }

    pub fn set(&mut self, settings: &[Option<usize>], value: f64) {
        let at = self.index(settings);
        self.values[at] = value;
    }

    /// Full two-party correlation `<a_i b_j>`.
    pub fn full2(&self, i: usize, j: usize) -> f64 {
        self.get(&[Some(i), Some(j)])
    }

    pub(crate) fn from_values(shape: Vec<usize>, values: Vec<f64>) -> Self {
        Self { shape, values }
    }
}

/// Correlators of a behavior. Parties outside a subset are evaluated at
/// their setting 0; for no-signalling behaviors the choice does not matter.
pub fn expectation_values(behavior: &Behavior) -> CorrelationTable {
    let shape = behavior.shape().to_vec();
    let n = shape.len();
    let ext_shape: Vec<usize> = shape.iter().map(|m| m + 1).collect();
    let n_out = behavior.n_outcomes();
    let mut values = Vec::with_capacity(ext_shape.iter().product());
    let mut settings = vec![0; n];
    for_each_tuple(&ext_shape, |t| {
        let mut mask = 0usize;
        for (i, &ti) in t.iter().enumerate() {
            settings[i] = ti.saturating_sub(1);
            if ti > 0 {
                mask |= 1 << (n - 1 - i);
            }
        }
        let at = behavior.setting_index(&settings) * n_out;
        let block = &behavior.probabilities()[at..at + n_out];
        let e: f64 = block
            .iter()
            .enumerate()
            .map(|(r, p)| {
                if (r & mask).count_ones().is_multiple_of(2) {
                    *p
                } else {
                    -p
                }
            })
            .sum();
        values.push(e.clamp(-1.0, 1.0));
    });
    CorrelationTable { shape, values }
}

pub(crate) fn flat_index(shape: &[usize], tuple: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), tuple.len());
    tuple.iter().zip(shape).fold(0, |acc, (&t, &m)| {
        debug_assert!(t < m);
        acc * m + t
    })
}

/// Visits every tuple of `shape` in row-major order.
pub(crate) fn for_each_tuple(shape: &[usize], mut f: impl FnMut(&[usize])) {
    if shape.contains(&0) {
        return;
    }
    let mut t = vec![0; shape.len()];
    loop {
        f(&t);
        let mut i = shape.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            t[i] += 1;
            if t[i] < shape[i] {
                break;
            }
            t[i] = 0;
        }
    }
}
