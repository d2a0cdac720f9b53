//! Monte Carlo drivers.
//!
//! Trial `i` of a run seeded with `seed` draws everything it needs from its
//! own ChaCha stream ([`trial_rng`]), so a run can be split across workers or
//! into separate ranges and merged without changing a single count.
//! Strength sums are kept in fixed point for the same reason: integer
//! addition is associative, floating-point addition is not.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::behavior::{compute_behavior, expectation_values, Behavior};
use crate::error::{param, Error, Result};
use crate::inequality::{
    classify_strongest_family, horodecki_strength, match_certificate, Classification, FamilyId,
    InequalityFamily,
};
use crate::measurement::MeasurementSetup;
use crate::state::{make_named_state, sample_random_pure_state, NamedState, StateVector};
use crate::visibility::{self, VIOLATION_THRESHOLD};

pub const DEFAULT_BIN_WIDTH: f64 = 0.01;

/// Default trial cap of the violation searches, per requested violation.
pub const DEFAULT_CAP_FACTOR: u64 = 100;

const FIXED_ONE: f64 = (1u64 << 52) as f64;

/// State used by every trial of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateSpec {
    /// GHZ state with angle in degrees.
    Ghz {
        alpha_deg: f64,
    },
    W,
    Dicke {
        k: usize,
    },
    LinearCluster,
    RingCluster,
    Product,
    /// A fresh Haar-random pure state per trial.
    Random,
}

impl StateSpec {
    pub fn named(&self) -> Option<NamedState> {
        Some(match *self {
            StateSpec::Ghz { alpha_deg } => NamedState::ghz_degrees(alpha_deg),
            StateSpec::W => NamedState::W,
            StateSpec::Dicke { k } => NamedState::Dicke { excitations: k },
            StateSpec::LinearCluster => NamedState::LinearCluster,
            StateSpec::RingCluster => NamedState::RingCluster,
            StateSpec::Product => NamedState::Product,
            StateSpec::Random => return None,
        })
    }
}

impl FromStr for StateSpec {
    type Err = Error;

    /// `ghz:alpha=45`, `w`, `dicke:k=2`, `lcluster`, `rcluster`, `product`, `random`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.as_str(), None),
        };
        let value = |key: &str| -> Result<&str> {
            match arg
                .and_then(|a| a.strip_prefix(key))
                .and_then(|a| a.strip_prefix('='))
            {
                Some(v) if !v.is_empty() => Ok(v),
                _ => param(format!("state `{s}` needs `{name}:{key}=<value>`")),
            }
        };
        let bad = |what: &str| Error::Parameter(format!("state `{s}`: invalid {what}"));
        let spec = match name {
            "ghz" => {
                let alpha_deg = if arg.is_some() {
                    value("alpha")?.parse::<f64>().map_err(|_| bad("angle"))?
                } else {
                    45.0
                };
                if !alpha_deg.is_finite() {
                    return Err(bad("angle"));
                }
                StateSpec::Ghz { alpha_deg }
            }
            "dicke" => StateSpec::Dicke {
                k: value("k")?.parse().map_err(|_| bad("excitation count"))?,
            },
            "w" | "lcluster" | "rcluster" | "product" | "random" if arg.is_some() => {
                return param(format!("state `{name}` takes no parameters"))
            }
            "w" => StateSpec::W,
            "lcluster" => StateSpec::LinearCluster,
            "rcluster" => StateSpec::RingCluster,
            "product" => StateSpec::Product,
            "random" => StateSpec::Random,
            _ => return param(format!("unknown state `{s}`")),
        };
        Ok(spec)
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Ghz { alpha_deg } => write!(f, "ghz:alpha={alpha_deg}"),
            StateSpec::W => f.write_str("w"),
            StateSpec::Dicke { k } => write!(f, "dicke:k={k}"),
            StateSpec::LinearCluster => f.write_str("lcluster"),
            StateSpec::RingCluster => f.write_str("rcluster"),
            StateSpec::Product => f.write_str("product"),
            StateSpec::Random => f.write_str("random"),
        }
    }
}

/// Parses `5x5` or `2x2x2x2` into settings per party.
pub fn parse_shape(s: &str) -> Result<Vec<usize>> {
    let shape: Vec<usize> = s
        .trim()
        .split(['x', 'X'])
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parameter(format!("malformed shape `{s}`")))?;
    if shape.contains(&0) {
        return param(format!("shape `{s}` has a party with no settings"));
    }
    Ok(shape)
}

pub fn format_shape(shape: &[usize]) -> String {
    shape
        .iter()
        .map(|m| m.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

/// State and settings shape of a run. The party count is the shape length.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    state: StateSpec,
    shape: Vec<usize>,
    fixed: Option<StateVector>,
}

impl Scenario {
    pub fn new(state: StateSpec, shape: &[usize]) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return param(format!("invalid shape {shape:?}"));
        }
        let fixed = match state.named() {
            Some(named) => Some(make_named_state(named, shape.len())?),
            None => None,
        };
        Ok(Self {
            state,
            shape: shape.to_vec(),
            fixed,
        })
    }

    pub fn state(&self) -> StateSpec {
        self.state
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// `<state> <shape>`, e.g. `ghz:alpha=45 5x5`.
    pub fn descriptor(&self) -> String {
        format!("{} {}", self.state, format_shape(&self.shape))
    }

    /// Behavior of trial `trial`. Random states are drawn before settings.
    pub fn behavior(&self, seed: u64, trial: u64) -> Result<Behavior> {
        let mut rng = trial_rng(seed, trial);
        let random;
        let state = match &self.fixed {
            Some(s) => s,
            None => {
                random = sample_random_pure_state(self.shape.len(), &mut rng);
                &random
            }
        };
        let setup = MeasurementSetup::random(&self.shape, &mut rng)?;
        compute_behavior(state, &setup)
    }
}

/// Random stream of one trial: the seed picks the key, the trial the stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Histogram of the strengths of violating trials. Bin `k` (0-based) covers
/// `[k w, (k + 1) w)`, so its upper edge `(k + 1) w` labels it.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthHistogram {
    bin_width: f64,
    counts: Vec<u64>,
    total_trials: u64,
    violating_trials: u64,
}

impl StrengthHistogram {
    pub fn new(bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width <= 1.0) {
            return param(format!("bin width {bin_width} outside (0, 1]"));
        }
        let n_bins = (1.0 / bin_width - 1e-9).ceil() as usize;
        Ok(Self {
            bin_width,
            counts: vec![0; n_bins],
            total_trials: 0,
            violating_trials: 0,
        })
    }

    /// Rebuilds a histogram from serialized parts.
    pub fn from_parts(bin_width: f64, counts: Vec<u64>, total_trials: u64) -> Result<Self> {
        let mut h = Self::new(bin_width)?;
        if counts.len() != h.counts.len() {
            return param(format!(
                "expected {} bins, got {}",
                h.counts.len(),
                counts.len()
            ));
        }
        let violating_trials = counts.iter().sum();
        if violating_trials > total_trials {
            return param("more violations than trials");
        }
        h.counts = counts;
        h.total_trials = total_trials;
        h.violating_trials = violating_trials;
        Ok(h)
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total_trials(&self) -> u64 {
        self.total_trials
    }

    pub fn violating_trials(&self) -> u64 {
        self.violating_trials
    }

    pub fn bin_upper(&self, k: usize) -> f64 {
        (k + 1) as f64 * self.bin_width
    }

    pub fn bin_of(&self, strength: f64) -> usize {
        let w = self.bin_width;
        let mut k = (strength / w).floor().max(0.0) as usize;
        if (k + 1) as f64 * w <= strength {
            k += 1;
        } else if k > 0 && k as f64 * w > strength {
            k -= 1;
        }
        k.min(self.counts.len() - 1)
    }

    pub fn record(&mut self, strength: f64) {
        self.total_trials += 1;
        if strength > VIOLATION_THRESHOLD {
            self.violating_trials += 1;
            let k = self.bin_of(strength);
            self.counts[k] += 1;
        }
    }

    /// Probability density per bin, normalized by all trials so the area is
    /// the violation probability.
    pub fn pdf(&self) -> Vec<f64> {
        let norm = self.total_trials as f64 * self.bin_width;
        self.counts
            .iter()
            .map(|&c| if norm > 0.0 { c as f64 / norm } else { 0.0 })
            .collect()
    }

    pub fn area(&self) -> f64 {
        self.pdf().iter().map(|p| p * self.bin_width).sum()
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.bin_width != other.bin_width {
            return param(format!(
                "bin widths differ: {} vs {}",
                self.bin_width, other.bin_width
            ));
        }
        Ok(Self {
            bin_width: self.bin_width,
            counts: self
                .counts
                .iter()
                .zip(&other.counts)
                .map(|(a, b)| a + b)
                .collect(),
            total_trials: self.total_trials + other.total_trials,
            violating_trials: self.violating_trials + other.violating_trials,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub scenario: String,
    pub seed: u64,
    pub trials: u64,
    pub violating_trials: u64,
    pub pv: f64,
    pub pv_stderr: f64,
    /// Mean over all trials, non-violating ones counting as zero.
    pub mean_strength: f64,
    pub mean_strength_stderr: f64,
    pub max_strength: f64,
}

/// Mergeable per-run state: the histogram plus exact strength moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    scenario: String,
    histogram: StrengthHistogram,
    sum: u128,
    sum_sq: u128,
    max_strength: f64,
}

impl Accumulator {
    pub fn new(scenario: impl Into<String>, bin_width: f64) -> Result<Self> {
        Ok(Self {
            scenario: scenario.into(),
            histogram: StrengthHistogram::new(bin_width)?,
            sum: 0,
            sum_sq: 0,
            max_strength: 0.0,
        })
    }

    pub fn scenario(&self) -> &str {
        &self.scenario
    }

    pub fn histogram(&self) -> &StrengthHistogram {
        &self.histogram
    }

    pub fn trials(&self) -> u64 {
        self.histogram.total_trials
    }

    pub fn record(&mut self, strength: f64) {
        let s = strength.clamp(0.0, 1.0);
        self.histogram.record(s);
        // counted in the mean only when violating, matching the histogram
        if s > VIOLATION_THRESHOLD {
            self.sum += (s * FIXED_ONE).round() as u128;
            self.sum_sq += (s * s * FIXED_ONE).round() as u128;
        }
        self.max_strength = self.max_strength.max(s);
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.scenario != other.scenario {
            return param(format!(
                "cannot merge `{}` with `{}`",
                self.scenario, other.scenario
            ));
        }
        Ok(Self {
            scenario: self.scenario.clone(),
            histogram: self.histogram.merge(&other.histogram)?,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
            max_strength: self.max_strength.max(other.max_strength),
        })
    }

    pub fn mean_strength(&self) -> f64 {
        let n = self.trials();
        if n == 0 {
            return 0.0;
        }
        self.sum as f64 / FIXED_ONE / n as f64
    }

    pub fn summary(&self, seed: u64) -> ExperimentSummary {
        let n = self.trials();
        let nf = n.max(1) as f64;
        let pv = self.histogram.violating_trials as f64 / nf;
        let mean = self.mean_strength();
        let mean_sq = self.sum_sq as f64 / FIXED_ONE / nf;
        let var = (mean_sq - mean * mean).max(0.0);
        let stderr = |v: f64| if n > 1 { (v / (nf - 1.0)).sqrt() } else { 0.0 };
        ExperimentSummary {
            scenario: self.scenario.clone(),
            seed,
            trials: n,
            violating_trials: self.histogram.violating_trials,
            pv,
            pv_stderr: stderr(pv * (1.0 - pv)),
            mean_strength: mean,
            mean_strength_stderr: stderr(var),
            max_strength: self.max_strength,
        }
    }
}

/// Merges any number of accumulators for the same scenario.
pub fn merge(accumulators: impl IntoIterator<Item = Accumulator>) -> Result<Accumulator> {
    let mut it = accumulators.into_iter();
    let first = it
        .next()
        .ok_or_else(|| Error::Parameter("nothing to merge".into()))?;
    it.try_fold(first, |acc, next| acc.merge(&next))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    pub bin_width: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: None,
            bin_width: DEFAULT_BIN_WIDTH,
        }
    }
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => param("worker count must be positive"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Parameter(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// LP strengths of trials `range`, accumulated.
pub fn accumulate(
    scenario: &Scenario,
    range: Range<u64>,
    seed: u64,
    opts: &RunOptions,
) -> Result<Accumulator> {
    let empty = Accumulator::new(scenario.descriptor(), opts.bin_width)?;
    in_pool(opts.workers, || {
        range
            .into_par_iter()
            .try_fold(
                || empty.clone(),
                |mut acc, trial| {
                    let behavior = scenario.behavior(seed, trial)?;
                    acc.record(visibility::strength(&behavior)?);
                    Ok(acc)
                },
            )
            .try_reduce(|| empty.clone(), |a, b| a.merge(&b))
    })?
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return param("need at least one trial");
    }
    Ok(())
}

/// Strength distribution of a fixed state under random settings.
pub fn run_strength_distribution(
    state: StateSpec,
    shape: &[usize],
    trials: u64,
    seed: u64,
) -> Result<(StrengthHistogram, ExperimentSummary)> {
    run_strength_distribution_with(state, shape, trials, seed, &RunOptions::default())
}

pub fn run_strength_distribution_with(
    state: StateSpec,
    shape: &[usize],
    trials: u64,
    seed: u64,
    opts: &RunOptions,
) -> Result<(StrengthHistogram, ExperimentSummary)> {
    check_trials(trials)?;
    let acc = accumulate(&Scenario::new(state, shape)?, 0..trials, seed, opts)?;
    Ok((acc.histogram.clone(), acc.summary(seed)))
}

/// Violation probability `T_V` (`pv`) and mean strength `T_S` when both
/// the state and the settings are drawn fresh in every trial.
pub fn run_typicality(
    n_qubits: usize,
    shape: &[usize],
    trials: u64,
    seed: u64,
) -> Result<ExperimentSummary> {
    Ok(run_typicality_with(n_qubits, shape, trials, seed, &RunOptions::default())?.1)
}

pub fn run_typicality_with(
    n_qubits: usize,
    shape: &[usize],
    trials: u64,
    seed: u64,
    opts: &RunOptions,
) -> Result<(StrengthHistogram, ExperimentSummary)> {
    if shape.len() != n_qubits {
        return param(format!("shape {shape:?} does not have {n_qubits} parties"));
    }
    run_strength_distribution_with(StateSpec::Random, shape, trials, seed, opts)
}

/// Closed-form CHSH strength averaged over random two-qubit pure states.
pub fn run_horodecki_average(
    trials: u64,
    seed: u64,
    opts: &RunOptions,
) -> Result<(StrengthHistogram, ExperimentSummary)> {
    check_trials(trials)?;
    let empty = Accumulator::new("horodecki random 2-qubit", opts.bin_width)?;
    let acc = in_pool(opts.workers, || {
        (0..trials)
            .into_par_iter()
            .try_fold(
                || empty.clone(),
                |mut acc, trial| {
                    let state = sample_random_pure_state(2, &mut trial_rng(seed, trial));
                    acc.record(horodecki_strength(&state)?);
                    Ok::<_, Error>(acc)
                },
            )
            .try_reduce(|| empty.clone(), |a, b| a.merge(&b))
    })??;
    Ok((acc.histogram.clone(), acc.summary(seed)))
}

/// Stopping rule of the violation searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub min_violations: u64,
    /// Defaults to `DEFAULT_CAP_FACTOR * min_violations`.
    pub trial_cap: Option<u64>,
}

impl SearchOptions {
    pub fn new(min_violations: u64) -> Self {
        Self {
            min_violations,
            trial_cap: None,
        }
    }

    pub fn cap(&self) -> u64 {
        self.trial_cap
            .unwrap_or(DEFAULT_CAP_FACTOR.saturating_mul(self.min_violations))
    }
}

/// Runs trials in index order until `min_violations` violating trials are
/// seen or the cap is hit. `inspect` runs on violating trials only. Work is
/// done in parallel batches but consumed in order, so the stopping trial
/// does not depend on the worker count.
fn search<T: Send>(
    scenario: &Scenario,
    seed: u64,
    run: &RunOptions,
    search: &SearchOptions,
    inspect: impl Fn(u64, &Behavior, &visibility::VisibilityResult) -> Result<T> + Sync,
) -> Result<(Accumulator, Vec<T>, bool)> {
    if search.min_violations == 0 {
        return param("need at least one violation to search for");
    }
    let cap = search.cap();
    let mut acc = Accumulator::new(scenario.descriptor(), run.bin_width)?;
    let mut found = Vec::new();
    let batch = 64 * rayon::current_num_threads().max(run.workers.unwrap_or(1)) as u64;
    let mut next = 0u64;
    while (found.len() as u64) < search.min_violations && next < cap {
        let end = (next + batch).min(cap);
        let results: Vec<(f64, Option<T>)> = in_pool(run.workers, || {
            (next..end)
                .into_par_iter()
                .map(|trial| {
                    let behavior = scenario.behavior(seed, trial)?;
                    let result = visibility::critical_visibility(&behavior)?;
                    let extra = if result.violated {
                        Some(inspect(trial, &behavior, &result)?)
                    } else {
                        None
                    };
                    Ok((result.strength, extra))
                })
                .collect::<Result<Vec<_>>>()
        })??;
        for (strength, extra) in results {
            acc.record(strength);
            next += 1;
            if let Some(x) = extra {
                found.push(x);
                if found.len() as u64 == search.min_violations {
                    break;
                }
            }
        }
    }
    let partial = (found.len() as u64) < search.min_violations;
    Ok((acc, found, partial))
}

/// One violating trial of a facet-relevance run.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetRecord {
    pub trial: u64,
    pub lp_strength: f64,
    pub classification: Classification,
    /// Family the LP certificate matches, when it is a relabeled member.
    pub certificate_family: Option<FamilyId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyFrequency {
    /// `None` counts violations no listed family detects.
    pub family: Option<FamilyId>,
    pub count: u64,
    pub frequency: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacetRelevance {
    pub shape: Vec<usize>,
    pub seed: u64,
    pub accumulator: Accumulator,
    pub records: Vec<FacetRecord>,
    /// Set when the trial cap stopped the run early.
    pub partial: bool,
    pub options: SearchOptions,
}

fn frequencies(
    keys: &[Option<FamilyId>],
    values: impl Iterator<Item = Option<FamilyId>>,
) -> Vec<FamilyFrequency> {
    let mut counts = vec![0u64; keys.len()];
    let mut total = 0u64;
    for v in values {
        total += 1;
        if let Some(k) = keys.iter().position(|k| *k == v) {
            counts[k] += 1;
        }
    }
    keys.iter()
        .zip(counts)
        .map(|(&family, count)| {
            let n = total.max(1) as f64;
            let p = count as f64 / n;
            FamilyFrequency {
                family,
                count,
                frequency: p,
                stderr: (p * (1.0 - p) / n).sqrt(),
            }
        })
        .collect()
}

impl FacetRelevance {
    pub fn violations(&self) -> u64 {
        self.records.len() as u64
    }

    fn keys(&self) -> Vec<Option<FamilyId>> {
        InequalityFamily::all()
            .iter()
            .filter(|f| f.embeds_in(&self.shape))
            .map(|f| Some(f.id()))
            .chain([None])
            .collect()
    }

    /// Share of violations in which each family is strongest.
    pub fn frequencies(&self) -> Vec<FamilyFrequency> {
        frequencies(
            &self.keys(),
            self.records.iter().map(|r| r.classification.family),
        )
    }

    /// Share of violations whose LP certificate is a member of each family.
    pub fn certificate_frequencies(&self) -> Vec<FamilyFrequency> {
        frequencies(
            &self.keys(),
            self.records.iter().map(|r| r.certificate_family),
        )
    }
}

/// Which inequality family is strongest on violating random settings.
pub fn run_facet_relevance(
    state: StateSpec,
    shape: &[usize],
    min_violations: u64,
    seed: u64,
) -> Result<FacetRelevance> {
    run_facet_relevance_with(
        state,
        shape,
        seed,
        &SearchOptions::new(min_violations),
        &RunOptions::default(),
    )
}

pub fn run_facet_relevance_with(
    state: StateSpec,
    shape: &[usize],
    seed: u64,
    search_opts: &SearchOptions,
    run: &RunOptions,
) -> Result<FacetRelevance> {
    let families = InequalityFamily::all();
    if !families.iter().any(|f| f.embeds_in(shape)) {
        return param(format!(
            "no inequality family embeds in {}",
            format_shape(shape)
        ));
    }
    let scenario = Scenario::new(state, shape)?;
    let (accumulator, records, partial) = search(
        &scenario,
        seed,
        run,
        search_opts,
        |trial, behavior, result| {
            let corr = expectation_values(behavior);
            let classification = classify_strongest_family(&corr, &families)?;
            let certificate_family = result
                .certificate
                .as_ref()
                .and_then(|c| match_certificate(&c.correlators, &families));
            Ok(FacetRecord {
                trial,
                lp_strength: result.strength,
                classification,
                certificate_family,
            })
        },
    )?;
    Ok(FacetRelevance {
        shape: shape.to_vec(),
        seed,
        accumulator,
        records,
        partial,
        options: *search_opts,
    })
}

fn two_setting_restrictions(shape: &[usize]) -> Result<Vec<Vec<Vec<usize>>>> {
    if shape.iter().all(|&m| m <= 2) {
        return param(format!(
            "shape {} has no party with more than two settings",
            format_shape(shape)
        ));
    }
    let choices: Vec<Vec<Vec<usize>>> = shape
        .iter()
        .map(|&m| {
            if m <= 2 {
                vec![(0..m).collect()]
            } else {
                (0..m)
                    .flat_map(|a| (a + 1..m).map(move |b| vec![a, b]))
                    .collect()
            }
        })
        .collect();
    let mut all = Vec::new();
    let mut pick = vec![0usize; shape.len()];
    loop {
        all.push(
            pick.iter()
                .zip(&choices)
                .map(|(&p, c)| c[p].clone())
                .collect(),
        );
        let mut i = shape.len();
        loop {
            if i == 0 {
                return Ok(all);
            }
            i -= 1;
            pick[i] += 1;
            if pick[i] < choices[i].len() {
                break;
            }
            pick[i] = 0;
        }
    }
}

/// Whether every restriction to two settings per party is local. Parties
/// with at most two settings keep all of them.
pub fn needs_all_settings(behavior: &Behavior) -> Result<bool> {
    for kept in two_setting_restrictions(behavior.shape())? {
        if visibility::strength(&behavior.restrict(&kept)?)? > VIOLATION_THRESHOLD {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest strength over all restrictions to two settings per party.
pub fn best_two_setting_strength(behavior: &Behavior) -> Result<f64> {
    let mut best = 0.0f64;
    for kept in two_setting_restrictions(behavior.shape())? {
        best = best.max(visibility::strength(&behavior.restrict(&kept)?)?);
    }
    Ok(best)
}

/// How a violation relates to its two-setting restrictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictionProfile {
    pub strength: f64,
    pub best_restricted: f64,
}

impl RestrictionProfile {
    pub fn of(behavior: &Behavior, strength: f64) -> Result<Self> {
        Ok(Self {
            strength,
            best_restricted: best_two_setting_strength(behavior)?,
        })
    }

    /// No two-setting restriction violates at all.
    pub fn genuine(&self) -> bool {
        self.best_restricted <= VIOLATION_THRESHOLD
    }

    /// The full scenario is strictly stronger than every restriction, so
    /// its strongest violation uses a third setting.
    pub fn exceeds(&self) -> bool {
        self.strength > self.best_restricted + VIOLATION_THRESHOLD
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenuineFraction {
    pub trials: u64,
    pub violating: u64,
    /// Violations that vanish under every two-setting restriction.
    pub genuine: u64,
    /// `genuine / violating`, reported as 0 when nothing violates.
    pub fraction: f64,
    /// Violations stronger than every two-setting restriction.
    pub exceeding: u64,
    pub exceeding_fraction: f64,
    pub zero_violations: bool,
}

impl GenuineFraction {
    pub fn from_profiles(trials: u64, profiles: &[RestrictionProfile]) -> Self {
        let violating = profiles.len() as u64;
        let genuine = profiles.iter().filter(|p| p.genuine()).count() as u64;
        let exceeding = profiles.iter().filter(|p| p.exceeds()).count() as u64;
        let share = |k: u64| {
            if violating == 0 {
                0.0
            } else {
                k as f64 / violating as f64
            }
        };
        Self {
            trials,
            violating,
            genuine,
            fraction: share(genuine),
            exceeding,
            exceeding_fraction: share(exceeding),
            zero_violations: violating == 0,
        }
    }

    fn binomial_stderr(&self, p: f64) -> f64 {
        let n = self.violating.max(1) as f64;
        (p * (1.0 - p) / n).sqrt()
    }

    pub fn stderr(&self) -> f64 {
        self.binomial_stderr(self.fraction)
    }

    pub fn exceeding_stderr(&self) -> f64 {
        self.binomial_stderr(self.exceeding_fraction)
    }
}

/// Multisetting statistics of violating random setups on `state`, over
/// `trials` draws from `rng`.
pub fn genuine_multisetting_fraction<R: Rng + ?Sized>(
    state: &StateVector,
    shape: &[usize],
    trials: u64,
    rng: &mut R,
) -> Result<GenuineFraction> {
    two_setting_restrictions(shape)?;
    let mut profiles = Vec::new();
    for _ in 0..trials {
        let setup = MeasurementSetup::random(shape, rng)?;
        let behavior = compute_behavior(state, &setup)?;
        let s = visibility::strength(&behavior)?;
        if s > VIOLATION_THRESHOLD {
            profiles.push(RestrictionProfile::of(&behavior, s)?);
        }
    }
    Ok(GenuineFraction::from_profiles(trials, &profiles))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenuineRun {
    pub seed: u64,
    pub accumulator: Accumulator,
    pub fraction: GenuineFraction,
    pub profiles: Vec<RestrictionProfile>,
    pub partial: bool,
    pub options: SearchOptions,
}

/// Seeded, parallel form of [`genuine_multisetting_fraction`] that runs
/// until `min_violations` violating trials are found.
pub fn run_genuine_settings(
    state: StateSpec,
    shape: &[usize],
    seed: u64,
    search_opts: &SearchOptions,
    run: &RunOptions,
) -> Result<GenuineRun> {
    two_setting_restrictions(shape)?;
    let scenario = Scenario::new(state, shape)?;
    let (accumulator, profiles, partial) =
        search(&scenario, seed, run, search_opts, |_, behavior, result| {
            RestrictionProfile::of(behavior, result.strength)
        })?;
    let fraction = GenuineFraction::from_profiles(accumulator.trials(), &profiles);
    Ok(GenuineRun {
        seed,
        accumulator,
        fraction,
        profiles,
        partial,
        options: *search_opts,
    })
}
