//! Explicit Bell inequality families and their exact maxima over relabelings.
//!
//! A family is one printed inequality together with everything obtained from
//! it by renaming settings (`a_i -> ±a_k`), flipping outcome signs, and
//! exchanging parties. [`evaluate_family_max`] finds the best member of the
//! family on a correlation table exactly.
//!
//! Every functional here is a combination of expectations of traceless
//! operator products, so white noise at weight `1 - v` scales its quantum
//! value by `v`. A functional with local bound `C` and value `B > C` is
//! therefore suppressed at `v = C / B`.

use std::fmt;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::behavior::{compute_behavior, expectation_values, CorrelationTable};
use crate::error::{param, Error, Result};
use crate::measurement::{MeasurementSetup, Observable};
use crate::state::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FamilyId {
    F1,
    F2,
    F3,
    F4,
    W333,
}

impl FamilyId {
    pub const ALL: [FamilyId; 5] = [
        FamilyId::F1,
        FamilyId::F2,
        FamilyId::F3,
        FamilyId::F4,
        FamilyId::W333,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyId::F1 => "F1",
            FamilyId::F2 => "F2",
            FamilyId::F3 => "F3",
            FamilyId::F4 => "F4",
            FamilyId::W333 => "W333",
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const F1_EXPR: &str = "a1b1 + a1b2 + a2b1 - a2b2";

const F2_EXPR: &str = "a1b1 - a3b1 + a4b1 + a5b1 - a3b2 - a4b2 - a1b4 + a3b4 - a4b4 + a5b4 \
    - 2a1b5 - a3b5 + a4b5";

const F3_EXPR: &str = "a1b1 + a2b1 - a4b1 - a5b1 - a1b3 + a2b3 - a4b3 + a5b3 - a1b4 + a2b4 \
    - 2a3b4 + a4b4 - a5b4 - a1b5 + a2b5 + 2a3b5 + a4b5 - a5b5";

const F4_EXPR: &str = "-a1b1 - a2b1 - a3b1 + 2a4b1 + a5b1 + a1b2 + a4b2 - a5b2 + a1b3 - a3b3 \
    + a4b3 - a5b3 - a3b4 + a4b4 + 2a5b4 + 2a3b5 + a4b5 + a5b5 + a2b4 + a3b2 + a1b4";

const W333_EXPR: &str = "a1 + 5a2 - 5a3 + b1 - a1b1 - a2b1 + 3a3b1 + 3b2 + a1b2 - 2a3b2 + b3 \
    + a1b3 + c1 - 2a1c1 - 2a2c1 + a3c1 + 2b1c1 + 4a1b1c1 - a2b1c1 + a3b1c1 - 2b2c1 + 2a1b2c1 \
    + 3a2b2c1 - 3a3b2c1 - 5b3c1 + 4a2b3c1 - 3a3b3c1 + a2c2 + a3c2 + a1b1c2 - 3a2b1c2 \
    - 2a3b1c2 - 3b2c2 - 3a3b2c2 + 3b3c2 + a1b3c2 - 4a2b3c2 + 2c3 + a1c3 - 2a2c3 + a3c3 \
    - 3b1c3 - 2a1b1c3 + a2b1c3 - 4a3b1c3 + 2b2c3 - 3a1b2c3 + 3a2b2c3 + 2a3b2c3 - 3b3c3 \
    - 3a3b3c3";

/// One monomial: `coefficient · ∏ (party, setting)`, settings 0-based as printed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub coefficient: i32,
    pub factors: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityFamily {
    id: FamilyId,
    n_parties: usize,
    terms: Vec<Term>,
    local_bound: f64,
    /// Printed setting indices that actually occur, per party, ascending.
    support: Vec<Vec<usize>>,
    /// Terms with settings replaced by positions in `support`.
    compact: Vec<CompactTerm>,
}

#[derive(Debug, Clone, PartialEq)]
struct CompactTerm {
    coefficient: f64,
    /// `settings[j]` is the support position used by party j, if any.
    settings: Vec<Option<usize>>,
}

impl InequalityFamily {
    pub fn new(id: FamilyId) -> Self {
        let (expr, bound, parties) = match id {
            FamilyId::F1 => (F1_EXPR, 2.0, 2),
            FamilyId::F2 => (F2_EXPR, 6.0, 2),
            FamilyId::F3 => (F3_EXPR, 8.0, 2),
            FamilyId::F4 => (F4_EXPR, 10.0, 2),
            FamilyId::W333 => (W333_EXPR, 23.0, 3),
        };
        let terms = parse_expression(expr).expect("built-in inequality parses");
        Self::from_terms(id, parties, terms, bound).expect("built-in inequality is well formed")
    }

    /// The four two-party families followed by the three-party one.
    pub fn all() -> Vec<InequalityFamily> {
        FamilyId::ALL.iter().map(|&id| Self::new(id)).collect()
    }

    pub fn from_terms(
        id: FamilyId,
        n_parties: usize,
        terms: Vec<Term>,
        local_bound: f64,
    ) -> Result<Self> {
        let mut support = vec![Vec::new(); n_parties];
        for term in &terms {
            for &(p, s) in &term.factors {
                if p >= n_parties {
                    return param(format!("term uses party {p} of {n_parties}"));
                }
                if !support[p].contains(&s) {
                    support[p].push(s);
                }
            }
            let mut parties: Vec<usize> = term.factors.iter().map(|f| f.0).collect();
            parties.sort_unstable();
            parties.dedup();
            if parties.len() != term.factors.len() || parties.is_empty() {
                return param("each term needs distinct parties and at least one factor");
            }
        }
        support.iter_mut().for_each(|s| s.sort_unstable());
        let compact = terms
            .iter()
            .map(|t| {
                let mut settings = vec![None; n_parties];
                for &(p, s) in &t.factors {
                    settings[p] = support[p].iter().position(|&x| x == s);
                }
                CompactTerm {
                    coefficient: t.coefficient as f64,
                    settings,
                }
            })
            .collect();
        Ok(Self {
            id,
            n_parties,
            terms,
            local_bound,
            support,
            compact,
        })
    }

    pub fn id(&self) -> FamilyId {
        self.id
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn local_bound(&self) -> f64 {
        self.local_bound
    }

    /// Settings actually used per party (printed 0-based indices).
    pub fn support(&self, party: usize) -> &[usize] {
        &self.support[party]
    }

    /// Smallest per-party setting counts that embed the family, in party order.
    pub fn support_shape(&self) -> Vec<usize> {
        self.support.iter().map(Vec::len).collect()
    }

    fn total_settings(&self) -> usize {
        self.support.iter().map(Vec::len).sum()
    }

    /// Whether some party exchange fits the family into `shape`.
    pub fn embeds_in(&self, shape: &[usize]) -> bool {
        shape.len() == self.n_parties && !self.party_maps(shape).is_empty()
    }

    fn party_maps(&self, shape: &[usize]) -> Vec<Vec<usize>> {
        permutations(self.n_parties, self.n_parties)
            .into_iter()
            .filter(|perm| {
                perm.iter()
                    .enumerate()
                    .all(|(j, &p)| self.support[j].len() <= shape[p])
            })
            .collect()
    }

    /// Value of the relabeled functional on `corr`.
    pub fn evaluate_at(&self, corr: &CorrelationTable, g: &SymmetryElement) -> f64 {
        let mut settings = vec![None; corr.n_parties()];
        self.compact
            .iter()
            .map(|term| {
                settings.iter_mut().for_each(|s| *s = None);
                let mut sign = 1.0;
                for (j, pos) in term.settings.iter().enumerate() {
                    if let Some(u) = *pos {
                        settings[g.party_map[j]] = Some(g.setting_maps[j][u]);
                        sign *= g.signs[j][u] as f64;
                    }
                }
                term.coefficient * sign * corr.get(&settings)
            })
            .sum()
    }

    /// Maximum of `Σ coef · ∏ outcomes` over deterministic ±1 assignments.
    pub fn brute_force_local_bound(&self) -> f64 {
        let widths = self.support_shape();
        let bits: usize = widths.iter().sum();
        (0u64..1 << bits)
            .map(|mask| {
                let mut offset = 0;
                let offsets: Vec<usize> = widths
                    .iter()
                    .map(|w| {
                        let o = offset;
                        offset += w;
                        o
                    })
                    .collect();
                self.compact
                    .iter()
                    .map(|t| {
                        let sign: f64 = t
                            .settings
                            .iter()
                            .enumerate()
                            .filter_map(|(j, u)| u.map(|u| (mask >> (offsets[j] + u)) & 1))
                            .map(|bit| if bit == 1 { -1.0 } else { 1.0 })
                            .product();
                        t.coefficient * sign
                    })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_json(&self) -> FamilyJson {
        FamilyJson {
            id: self.id,
            parties: self.n_parties,
            local_bound: self.local_bound,
            expression: format_expression(&self.terms),
            terms: self.terms.clone(),
        }
    }
}

/// Audit form of a family: the term list and the local bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyJson {
    pub id: FamilyId,
    pub parties: usize,
    pub local_bound: f64,
    pub expression: String,
    pub terms: Vec<Term>,
}

/// Parses `"a1b1 - 2a2b1 + c3"` style expressions. Letters name parties
/// (`a` is party 0) and digits are 1-based setting indices.
pub fn parse_expression(expr: &str) -> Result<Vec<Term>> {
    let bad = |msg: &str| Error::Parameter(format!("cannot parse inequality `{expr}`: {msg}"));
    let chars: Vec<char> = expr.chars().filter(|c| !c.is_whitespace()).collect();
    let mut terms = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let mut sign = 1;
        match chars[i] {
            '+' => i += 1,
            '-' | '–' => {
                sign = -1;
                i += 1
            }
            _ if i > 0 => return Err(bad("missing operator")),
            _ => {}
        }
        let start = i;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
        let coefficient: i32 = if i > start {
            chars[start..i]
                .iter()
                .collect::<String>()
                .parse()
                .map_err(|_| bad("coefficient"))?
        } else {
            1
        };
        let mut factors = Vec::new();
        while i < chars.len() && chars[i].is_ascii_lowercase() {
            let party = (chars[i] as u8 - b'a') as usize;
            i += 1;
            let ds = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let setting: usize = chars[ds..i]
                .iter()
                .collect::<String>()
                .parse()
                .map_err(|_| bad("setting"))?;
            if setting == 0 {
                return Err(bad("settings are 1-based"));
            }
            factors.push((party, setting - 1));
        }
        if factors.is_empty() {
            return Err(bad("term without observables"));
        }
        terms.push(Term {
            coefficient: sign * coefficient,
            factors,
        });
    }
    Ok(terms)
}

fn format_expression(terms: &[Term]) -> String {
    let mut out = String::new();
    for (k, t) in terms.iter().enumerate() {
        let mag = t.coefficient.abs();
        match (k, t.coefficient < 0) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        if mag != 1 {
            out.push_str(&mag.to_string());
        }
        for &(p, s) in &t.factors {
            out.push((b'a' + p as u8) as char);
            out.push_str(&(s + 1).to_string());
        }
    }
    out
}

/// A relabeling: family party `j` becomes scenario party `party_map[j]`,
/// its `u`-th setting becomes setting `setting_maps[j][u]`, and that
/// setting's outcomes are multiplied by `signs[j][u]`.
///
/// As a witness of [`evaluate_family_max`], `u` runs over the family's
/// support (see [`InequalityFamily::support`]). As a scenario symmetry
/// ([`SymmetryElement::act`]) all maps are bijections of the scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryElement {
    pub party_map: Vec<usize>,
    pub setting_maps: Vec<Vec<usize>>,
    pub signs: Vec<Vec<i8>>,
}

impl SymmetryElement {
    pub fn identity(shape: &[usize]) -> Self {
        Self {
            party_map: (0..shape.len()).collect(),
            setting_maps: shape.iter().map(|&m| (0..m).collect()).collect(),
            signs: shape.iter().map(|&m| vec![1; m]).collect(),
        }
    }

    /// Relabels a correlation table. Requires bijective maps that preserve
    /// the per-party setting counts.
    pub fn act(&self, corr: &CorrelationTable) -> Result<CorrelationTable> {
        let shape = corr.shape();
        let n = shape.len();
        let mut seen = vec![false; n];
        for &p in &self.party_map {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return param("party map is not a permutation");
            }
        }
        let mut new_shape = vec![0; n];
        for (j, &p) in self.party_map.iter().enumerate() {
            new_shape[p] = shape[j];
            let map = &self.setting_maps[j];
            let mut hit = vec![false; shape[j]];
            if map.len() != shape[j] || self.signs[j].len() != shape[j] {
                return param("setting map size does not match the scenario");
            }
            for &s in map {
                if s >= shape[j] || std::mem::replace(&mut hit[s], true) {
                    return param("setting map is not a permutation");
                }
            }
        }
        let mut out = CorrelationTable::zeros(&new_shape);
        let ext: Vec<usize> = shape.iter().map(|m| m + 1).collect();
        let mut target = vec![None; n];
        crate::behavior::for_each_tuple(&ext, |t| {
            let source: Vec<Option<usize>> = t.iter().map(|&x| x.checked_sub(1)).collect();
            let mut sign = 1.0;
            for (j, s) in source.iter().enumerate() {
                target[self.party_map[j]] = s.map(|k| {
                    sign *= self.signs[j][k] as f64;
                    self.setting_maps[j][k]
                });
            }
            out.set(&target, sign * corr.get(&source));
        });
        Ok(out)
    }
}

/// Exact maximum of a family functional over all its relabelings on `corr`.
pub fn evaluate_family_max(
    family: &InequalityFamily,
    corr: &CorrelationTable,
) -> Result<(f64, SymmetryElement)> {
    let shape = corr.shape();
    if shape.len() != family.n_parties || !family.embeds_in(shape) {
        return param(format!(
            "family {} (support {:?}) does not embed in scenario {:?}",
            family.id,
            family.support_shape(),
            shape
        ));
    }
    let mut search = Search::new(family, corr);
    for perm in family.party_maps(shape) {
        search.run_party_map(perm);
    }
    Ok((
        search.best,
        search.witness.expect("at least one relabeling"),
    ))
}

/// `max(0, 1 - C/B)` where `B` is the family maximum on `corr`.
pub fn per_inequality_strength(family: &InequalityFamily, corr: &CorrelationTable) -> Result<f64> {
    let (value, _) = evaluate_family_max(family, corr)?;
    Ok(strength_from_value(value, family.local_bound))
}

fn strength_from_value(value: f64, bound: f64) -> f64 {
    if value > bound {
        (1.0 - bound / value).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

struct Search<'a> {
    family: &'a InequalityFamily,
    corr: &'a CorrelationTable,
    strides: Vec<usize>,
    best: f64,
    witness: Option<SymmetryElement>,
}

impl<'a> Search<'a> {
    fn new(family: &'a InequalityFamily, corr: &'a CorrelationTable) -> Self {
        let shape = corr.shape();
        let mut strides = vec![1; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * (shape[i + 1] + 1);
        }
        Self {
            family,
            corr,
            strides,
            best: f64::NEG_INFINITY,
            witness: None,
        }
    }

    /// Enumerates injections and signs for every family party but the last;
    /// the last party's injection and signs are optimized in closed form
    /// since each term is linear in its sign.
    fn run_party_map(&mut self, perm: Vec<usize>) {
        let k = self.family.n_parties;
        let shape = self.corr.shape().to_vec();
        let choices: Vec<Vec<Vec<usize>>> = (0..k - 1)
            .map(|j| permutations(shape[perm[j]], self.family.support[j].len()))
            .collect();
        let last = k - 1;
        let last_targets = shape[perm[last]];
        let last_injections = permutations(last_targets, self.family.support[last].len());
        let widths: Vec<usize> = (0..k - 1).map(|j| self.family.support[j].len()).collect();
        let sign_bits: usize = widths.iter().sum();

        let mut pick = vec![0usize; k - 1];
        loop {
            let maps: Vec<&Vec<usize>> = pick.iter().zip(&choices).map(|(&c, ch)| &ch[c]).collect();
            for mask in 0u64..(1u64 << sign_bits) {
                self.score(&perm, &maps, &widths, mask, &last_injections, last_targets);
            }
            // odometer over injections
            let mut j = k - 1;
            loop {
                if j == 0 {
                    return;
                }
                j -= 1;
                pick[j] += 1;
                if pick[j] < choices[j].len() {
                    break;
                }
                pick[j] = 0;
            }
        }
    }

    fn score(
        &mut self,
        perm: &[usize],
        maps: &[&Vec<usize>],
        widths: &[usize],
        mask: u64,
        last_injections: &[Vec<usize>],
        last_targets: usize,
    ) {
        let last = self.family.n_parties - 1;
        let values = self.corr.values();
        let sign_of = |j: usize, u: usize| -> f64 {
            let offset: usize = widths[..j].iter().sum();
            if (mask >> (offset + u)) & 1 == 1 {
                -1.0
            } else {
                1.0
            }
        };
        let support_last = self.family.support[last].len();
        let mut constant = 0.0;
        let mut slope = vec![0.0; support_last * last_targets];
        for term in &self.family.compact {
            let mut base = 0usize;
            let mut coef = term.coefficient;
            for j in 0..last {
                if let Some(u) = term.settings[j] {
                    base += self.strides[perm[j]] * (maps[j][u] + 1);
                    coef *= sign_of(j, u);
                }
            }
            match term.settings[last] {
                None => constant += coef * values[base],
                Some(u) => {
                    let stride = self.strides[perm[last]];
                    for target in 0..last_targets {
                        slope[u * last_targets + target] +=
                            coef * values[base + stride * (target + 1)];
                    }
                }
            }
        }
        let mut best_inj = 0;
        let mut best_sum = f64::NEG_INFINITY;
        for (idx, inj) in last_injections.iter().enumerate() {
            let sum: f64 = inj
                .iter()
                .enumerate()
                .map(|(u, &t)| slope[u * last_targets + t].abs())
                .sum();
            if sum > best_sum {
                best_sum = sum;
                best_inj = idx;
            }
        }
        let total = constant + best_sum;
        if total > self.best {
            self.best = total;
            let inj = &last_injections[best_inj];
            let mut setting_maps: Vec<Vec<usize>> = maps.iter().map(|m| m.to_vec()).collect();
            setting_maps.push(inj.clone());
            let mut signs: Vec<Vec<i8>> = (0..last)
                .map(|j| (0..widths[j]).map(|u| sign_of(j, u) as i8).collect())
                .collect();
            signs.push(
                inj.iter()
                    .enumerate()
                    .map(|(u, &t)| {
                        if slope[u * last_targets + t] < 0.0 {
                            -1
                        } else {
                            1
                        }
                    })
                    .collect(),
            );
            self.witness = Some(SymmetryElement {
                party_map: perm.to_vec(),
                setting_maps,
                signs,
            });
        }
    }
}

/// All ordered selections of `k` distinct elements from `0..n`.
fn permutations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in 0..n {
            if !used[x] {
                used[x] = true;
                cur.push(x);
                rec(n, k, cur, used, out);
                cur.pop();
                used[x] = false;
            }
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(
            n,
            k,
            &mut Vec::with_capacity(k),
            &mut vec![false; n],
            &mut out,
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// Strongest violated family, `None` when no family is violated.
    pub family: Option<FamilyId>,
    pub strength: f64,
    /// Per-inequality strength of every embeddable family, in input order.
    pub per_family: Vec<(FamilyId, f64)>,
}

/// Picks the family with the largest per-inequality strength. Ties go to the
/// family using fewer settings, then to the earlier family.
pub fn classify_strongest_family(
    corr: &CorrelationTable,
    families: &[InequalityFamily],
) -> Result<Classification> {
    let mut per_family = Vec::new();
    let mut best: Option<(&InequalityFamily, f64)> = None;
    for family in families.iter().filter(|f| f.embeds_in(corr.shape())) {
        let s = per_inequality_strength(family, corr)?;
        per_family.push((family.id, s));
        let better = match best {
            None => true,
            Some((bf, bs)) => {
                s > bs + 1e-12
                    || ((s - bs).abs() <= 1e-12 && family.total_settings() < bf.total_settings())
            }
        };
        if better {
            best = Some((family, s));
        }
    }
    if per_family.is_empty() {
        return param(format!("no family embeds in scenario {:?}", corr.shape()));
    }
    let (family, strength) = match best {
        Some((f, s)) if s > 0.0 => (Some(f.id), s),
        _ => (None, 0.0),
    };
    Ok(Classification {
        family,
        strength,
        per_family,
    })
}

/// Identifies a two-party certificate with a family when its functional is,
/// up to scale, a relabeled member of that family. Certificates with
/// marginal terms or mixtures of several facets give `None`.
pub fn match_certificate(
    correlators: &CorrelationTable,
    families: &[InequalityFamily],
) -> Option<FamilyId> {
    let shape = correlators.shape();
    if shape.len() != 2 {
        return None;
    }
    let y = correlators;
    let marginal = (0..shape[0])
        .map(|i| y.get(&[Some(i), None]).abs())
        .chain((0..shape[1]).map(|j| y.get(&[None, Some(j)]).abs()))
        .fold(0.0, f64::max);
    let mut full = CorrelationTable::zeros(shape);
    let mut norm = 0.0;
    for i in 0..shape[0] {
        for j in 0..shape[1] {
            let v = y.full2(i, j);
            full.set(&[Some(i), Some(j)], v);
            norm += v * v;
        }
    }
    let norm = norm.sqrt();
    if norm == 0.0 || marginal > 1e-7 * norm {
        return None;
    }
    families
        .iter()
        .filter(|f| f.n_parties == 2 && f.embeds_in(shape))
        .find_map(|f| {
            let coef_norm = f
                .terms
                .iter()
                .map(|t| (t.coefficient as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            let (value, _) = evaluate_family_max(f, &full).ok()?;
            (value / (coef_norm * norm) > 1.0 - 1e-6).then_some(f.id)
        })
}

/// Strength reachable by the best CHSH settings on a two-qubit state,
/// `max(0, 1 - 1/sqrt(u1 + u2))` with `u1 >= u2` the top eigenvalues of `TᵀT`.
pub fn horodecki_strength(state: &StateVector) -> Result<f64> {
    if state.n_qubits() != 2 {
        return param(format!(
            "Horodecki formula needs 2 qubits, got {}",
            state.n_qubits()
        ));
    }
    let paulis = vec![Observable::x(), Observable::y(), Observable::z()];
    let setup = MeasurementSetup::new(vec![paulis.clone(), paulis])?;
    let corr = expectation_values(&compute_behavior(state, &setup)?);
    let t = Matrix3::from_fn(|k, l| corr.full2(k, l));
    let mut eig: Vec<f64> = SymmetricEigen::new(t.transpose() * t)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let sum = eig[0] + eig[1];
    Ok(if sum > 1.0 {
        1.0 - 1.0 / sum.sqrt()
    } else {
        0.0
    })
}
