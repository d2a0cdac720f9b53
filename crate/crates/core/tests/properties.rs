use bellforge::experiment::{self, RunOptions, StateSpec};
use bellforge::inequality::{
    classify_strongest_family, evaluate_family_max, horodecki_strength, match_certificate,
    per_inequality_strength, FamilyId, InequalityFamily, SymmetryElement,
};
use bellforge::visibility::{self, DeterministicStrategy};
use bellforge::*;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_behavior(
    rng: &mut ChaCha8Rng,
    shape: &[usize],
) -> (StateVector, MeasurementSetup, Behavior) {
    let state = sample_random_pure_state(shape.len(), rng);
    let setup = MeasurementSetup::random(shape, rng).unwrap();
    let b = compute_behavior(&state, &setup).unwrap();
    (state, setup, b)
}

fn ghz45(n: usize) -> StateVector {
    make_named_state(NamedState::ghz_degrees(45.0), n).unwrap()
}

// Two-phase simplex with Bland's rule, written independently of the library
// solvers. The tableau is recomputed from the original matrix through an LU
// factorization of the basis at every step, so round-off never accumulates.
// Maximizes c·x subject to A x = b, x >= 0.
fn textbook_max(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    const TOL: f64 = 1e-9;
    let (m, n) = (a.len(), c.len());
    let sign: Vec<f64> = b
        .iter()
        .map(|v| if *v < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let full = DMatrix::from_fn(m, n + m, |i, j| {
        if j < n {
            sign[i] * a[i][j]
        } else if j - n == i {
            1.0
        } else {
            0.0
        }
    });
    let rhs = DVector::from_fn(m, |i, _| sign[i] * b[i]);
    let mut basis: Vec<usize> = (n..n + m).collect();

    let tableau = |basis: &[usize]| {
        let lu = full.select_columns(basis).lu();
        (
            lu.solve(&full).expect("basis is invertible"),
            lu.solve(&rhs).unwrap(),
        )
    };

    let optimize = |basis: &mut Vec<usize>, cost: &[f64], allowed: usize| loop {
        let (t, x) = tableau(basis);
        let reduced = |j: usize| cost[j] - (0..m).map(|i| cost[basis[i]] * t[(i, j)]).sum::<f64>();
        let Some(q) = (0..allowed).find(|&j| !basis.contains(&j) && reduced(j) > TOL) else {
            return (0..m).map(|i| cost[basis[i]] * x[i]).sum::<f64>();
        };
        let ratio = |i: usize| x[i].max(0.0) / t[(i, q)];
        let rows: Vec<usize> = (0..m).filter(|&i| t[(i, q)] > TOL).collect();
        let best = rows.iter().map(|&i| ratio(i)).fold(f64::INFINITY, f64::min);
        assert!(best.is_finite(), "unbounded");
        let r = rows
            .into_iter()
            .filter(|&i| ratio(i) <= best + 1e-12)
            .min_by_key(|&i| basis[i])
            .unwrap();
        basis[r] = q;
    };

    let mut phase1 = vec![0.0; n + m];
    phase1[n..].iter_mut().for_each(|v| *v = -1.0);
    let infeasibility = -optimize(&mut basis, &phase1, n + m);
    assert!(infeasibility < 1e-9, "oracle found the problem infeasible");
    // swap zero-level artificials for real columns; rows with none are redundant
    for i in 0..m {
        if basis[i] >= n {
            let (t, _) = tableau(&basis);
            let q = (0..n)
                .filter(|j| !basis.contains(j))
                .max_by(|&j, &k| t[(i, j)].abs().total_cmp(&t[(i, k)].abs()));
            if let Some(q) = q.filter(|&q| t[(i, q)].abs() > 1e-7) {
                basis[i] = q;
            }
        }
    }
    let mut cost = c.to_vec();
    cost.extend(vec![0.0; m]);
    optimize(&mut basis, &cost, n)
}

// Critical visibility from an explicit list of all vertices of the local
// polytope, solved by the textbook simplex above.
#[allow(clippy::needless_range_loop)]
fn vertex_oracle_v_crit(b: &Behavior) -> f64 {
    let shape = b.shape().to_vec();
    let n = shape.len();
    let n_out = 1usize << n;
    let total_bits: usize = shape.iter().sum();
    let combos: Vec<Vec<usize>> = {
        let mut all = vec![vec![]];
        for &m in &shape {
            all = all
                .into_iter()
                .flat_map(|p: Vec<usize>| (0..m).map(move |k| [p.clone(), vec![k]].concat()))
                .collect();
        }
        all
    };
    let rows = combos.len() * n_out;
    let n_strat = 1usize << total_bits;
    // variables: strategies, v, slack of v <= 1
    let mut a = vec![vec![0.0; n_strat + 2]; rows + 2];
    let mut rhs = vec![0.0; rows + 2];
    let noise = 1.0 / n_out as f64;
    for lambda in 0..n_strat {
        let mut offset = 0;
        let mut outcome_of = vec![vec![0usize; 0]; n];
        for (i, &m) in shape.iter().enumerate() {
            outcome_of[i] = (0..m).map(|k| (lambda >> (offset + k)) & 1).collect();
            offset += m;
        }
        for (si, s) in combos.iter().enumerate() {
            let r = (0..n).fold(0, |acc, i| (acc << 1) | outcome_of[i][s[i]]);
            a[si * n_out + r][lambda] = 1.0;
        }
    }
    a[rows][..n_strat].fill(1.0);
    for (si, s) in combos.iter().enumerate() {
        for r in 0..n_out {
            a[si * n_out + r][n_strat] = -(b.prob(s, r) - noise);
            rhs[si * n_out + r] = noise;
        }
    }
    rhs[rows] = 1.0;
    a[rows + 1][n_strat] = 1.0;
    a[rows + 1][n_strat + 1] = 1.0;
    rhs[rows + 1] = 1.0;
    let mut c = vec![0.0; n_strat + 2];
    c[n_strat] = 1.0;
    textbook_max(&a, &rhs, &c)
}

// In the 2x2 scenario the only nontrivial facets are the eight CHSH
// variants, so v_crit = min(1, 2 / max |CHSH|).
fn chsh_facet_v_crit(b: &Behavior) -> f64 {
    let e = expectation_values(b);
    let mut best: f64 = 0.0;
    for flip in 0..4 {
        let mut v = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                let minus = (x * y + (flip >> 1) * x + (flip & 1) * y) % 2 == 1;
                v += if minus { -1.0 } else { 1.0 } * e.full2(x, y);
            }
        }
        best = best.max(v.abs());
    }
    if best > 2.0 {
        2.0 / best
    } else {
        1.0
    }
}

fn su2(rng: &mut ChaCha8Rng) -> [[C; 2]; 2] {
    let g: Vec<f64> = (0..4)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (a, b) = (C::new(g[0], g[1]) / norm, C::new(g[2], g[3]) / norm);
    [[a, -b.conj()], [b, a.conj()]]
}

// R_kl = tr(σ_k U σ_l U†) / 2
fn so3(u: &[[C; 2]; 2]) -> [[f64; 3]; 3] {
    let i = C::new(0.0, 1.0);
    let o = C::new(0.0, 0.0);
    let one = C::new(1.0, 0.0);
    let paulis = [
        [[o, one], [one, o]],
        [[o, -i], [i, o]],
        [[one, o], [o, -one]],
    ];
    let mul = |a: &[[C; 2]; 2], b: &[[C; 2]; 2]| {
        let mut r = [[o; 2]; 2];
        for x in 0..2 {
            for y in 0..2 {
                r[x][y] = a[x][0] * b[0][y] + a[x][1] * b[1][y];
            }
        }
        r
    };
    let dag = [
        [u[0][0].conj(), u[1][0].conj()],
        [u[0][1].conj(), u[1][1].conj()],
    ];
    let mut r = [[0.0; 3]; 3];
    for k in 0..3 {
        for l in 0..3 {
            let m = mul(&paulis[k], &mul(u, &mul(&paulis[l], &dag)));
            r[k][l] = ((m[0][0] + m[1][1]) / 2.0).re;
        }
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn inequality_strength_never_exceeds_lp(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let families = InequalityFamily::all();
        for shape in [vec![2, 2], vec![3, 3], vec![4, 5], vec![5, 5], vec![3, 3, 3]] {
            let (_, _, b) = random_behavior(&mut rng, &shape);
            let lp = visibility::strength(&b).unwrap();
            let corr = expectation_values(&b);
            for f in families.iter().filter(|f| f.embeds_in(&shape)) {
                let s = per_inequality_strength(f, &corr).unwrap();
                prop_assert!(s <= lp + 1e-8, "{} gives {s} above LP {lp} on {shape:?}", f.id());
            }
        }
    }

    #[test]
    fn restriction_never_increases_strength(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for shape in [vec![3, 3], vec![5, 5], vec![3, 2, 3]] {
            let (_, _, b) = random_behavior(&mut rng, &shape);
            let full = visibility::strength(&b).unwrap();
            let kept: Vec<Vec<usize>> = shape
                .iter()
                .map(|&m| {
                    let k = rng.gen_range(1..=m);
                    let mut idx: Vec<usize> = (0..m).collect();
                    idx.shuffle(&mut rng);
                    idx.truncate(k);
                    idx
                })
                .collect();
            let part = visibility::strength(&restrict_behavior(&b, &kept).unwrap()).unwrap();
            prop_assert!(part <= full + 1e-9, "restriction {kept:?}: {part} > {full}");
        }
    }

    #[test]
    fn certificates_separate_from_every_strategy(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for shape in [vec![2, 2], vec![3, 3], vec![2, 2, 2]] {
            let (_, _, b) = random_behavior(&mut rng, &shape);
            let r = critical_visibility(&b).unwrap();
            if let Some(cert) = r.certificate {
                let best = DeterministicStrategy::all(&shape)
                    .map(|d| cert.evaluate(&d.behavior()))
                    .fold(f64::NEG_INFINITY, f64::max);
                let margin = cert.evaluate(&b) - best;
                prop_assert!(margin >= visibility::VIOLATION_THRESHOLD / 2.0, "margin {margin}");
                prop_assert!((best - cert.local_bound).abs() < 1e-9);
            } else {
                prop_assert!(!r.violated);
            }
        }
    }

    #[test]
    fn behaviors_are_local_unitary_covariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = [2, 3, 2];
        let (state, setup, b) = random_behavior(&mut rng, &shape);
        let party = rng.gen_range(0..shape.len());
        let u = su2(&mut rng);
        let r = so3(&u);
        let mut rotated = state.clone();
        rotated.apply_single_qubit(party, u).unwrap();
        let settings: Vec<Vec<Observable>> = (0..shape.len())
            .map(|i| {
                setup
                    .party(i)
                    .iter()
                    .map(|o| {
                        if i != party {
                            return *o;
                        }
                        let n = o.bloch();
                        let m: Vec<f64> = (0..3).map(|k| (0..3).map(|l| r[k][l] * n[l]).sum()).collect();
                        Observable::new([m[0], m[1], m[2]]).unwrap()
                    })
                    .collect()
            })
            .collect();
        let b2 = compute_behavior(&rotated, &MeasurementSetup::new(settings).unwrap()).unwrap();
        for (p, q) in b.probabilities().iter().zip(b2.probabilities()) {
            prop_assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn lp_matches_textbook_vertex_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for shape in [vec![2, 2], vec![2, 3], vec![3, 3], vec![2, 2, 2]] {
            let (_, _, b) = random_behavior(&mut rng, &shape);
            let v = critical_visibility(&b).unwrap().v_crit;
            let oracle = vertex_oracle_v_crit(&b);
            prop_assert!((v - oracle).abs() < 1e-8, "{shape:?}: {v} vs {oracle}");
            if shape == [2, 2] {
                prop_assert!((v - chsh_facet_v_crit(&b)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn symmetry_action_preserves_family_maximum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (shape, family) in [
            (vec![2, 2], FamilyId::F1),
            (vec![4, 4], FamilyId::F1),
            (vec![5, 5], FamilyId::F2),
            (vec![5, 5], FamilyId::F3),
            (vec![3, 3, 3], FamilyId::W333),
        ] {
            let (_, _, b) = random_behavior(&mut rng, &shape);
            let corr = expectation_values(&b);
            let mut g = SymmetryElement::identity(&shape);
            if shape.iter().all(|&m| m == shape[0]) {
                g.party_map.shuffle(&mut rng);
            }
            for (map, signs) in g.setting_maps.iter_mut().zip(g.signs.iter_mut()) {
                map.shuffle(&mut rng);
                signs.iter_mut().for_each(|s| *s = if rng.gen() { 1 } else { -1 });
            }
            let f = InequalityFamily::new(family);
            let before = evaluate_family_max(&f, &corr).unwrap().0;
            let after = evaluate_family_max(&f, &g.act(&corr).unwrap()).unwrap().0;
            prop_assert!((before - after).abs() < 1e-10, "{family}: {before} vs {after}");
        }
    }
}

#[test]
fn local_bounds_are_tight() {
    for (id, bound) in [
        (FamilyId::F1, 2.0),
        (FamilyId::F2, 6.0),
        (FamilyId::F3, 8.0),
        (FamilyId::F4, 10.0),
        (FamilyId::W333, 23.0),
    ] {
        let f = InequalityFamily::new(id);
        assert_eq!(f.local_bound(), bound);
        assert_eq!(f.brute_force_local_bound(), bound, "{id}");
    }
}

#[test]
fn horodecki_bounds_sampled_settings() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..1000 {
        let (state, _, b) = random_behavior(&mut rng, &[2, 2]);
        let h = horodecki_strength(&state).unwrap();
        let lp = visibility::strength(&b).unwrap();
        assert!(h >= lp - 1e-8, "closed form {h} below LP {lp}");
    }
}

#[test]
fn two_qubit_strength_stays_below_grothendieck_cap() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for shape in [[2, 2], [3, 3], [4, 4], [5, 5], [2, 5]] {
        for _ in 0..150 {
            let (_, _, b) = random_behavior(&mut rng, &shape);
            assert!(visibility::strength(&b).unwrap() <= 0.3171 + 1e-6);
        }
    }
}

#[test]
fn f1_certificates_are_saturated_by_f1() {
    let f1 = InequalityFamily::new(FamilyId::F1);
    let families = InequalityFamily::all();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut checked = 0;
    for shape in [[2, 2], [3, 3]] {
        for _ in 0..200 {
            let setup = MeasurementSetup::random(&shape, &mut rng).unwrap();
            let b = compute_behavior(&ghz45(2), &setup).unwrap();
            let r = critical_visibility(&b).unwrap();
            let Some(cert) = r.certificate else { continue };
            if match_certificate(&cert.correlators, &families) == Some(FamilyId::F1) {
                let s = per_inequality_strength(&f1, &expectation_values(&b)).unwrap();
                assert!((s - r.strength).abs() < 1e-7, "{s} vs {}", r.strength);
                checked += 1;
            }
        }
    }
    assert!(checked > 50, "only {checked} F1 certificates");
}

#[test]
fn two_by_two_violations_are_all_f1() {
    let families = InequalityFamily::all();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..300 {
        let setup = MeasurementSetup::random(&[2, 2], &mut rng).unwrap();
        let b = compute_behavior(&ghz45(2), &setup).unwrap();
        let r = critical_visibility(&b).unwrap();
        let c = classify_strongest_family(&expectation_values(&b), &families).unwrap();
        if r.violated {
            assert_eq!(c.family, Some(FamilyId::F1));
            assert!((c.strength - r.strength).abs() < 1e-7);
        }
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let run = |workers| {
        let opts = RunOptions {
            workers: Some(workers),
            ..Default::default()
        };
        experiment::run_strength_distribution_with(StateSpec::W, &[2, 2, 2], 600, 5, &opts).unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn split_runs_merge_to_the_whole() {
    let scenario = experiment::Scenario::new(StateSpec::Ghz { alpha_deg: 45.0 }, &[2, 2]).unwrap();
    let opts = RunOptions::default();
    let a = experiment::accumulate(&scenario, 0..50_000, 3, &opts).unwrap();
    let b = experiment::accumulate(&scenario, 50_000..100_000, 3, &opts).unwrap();
    let whole = experiment::accumulate(&scenario, 0..100_000, 3, &opts).unwrap();
    assert_eq!(experiment::merge([a.clone(), b.clone()]).unwrap(), whole);
    assert_eq!(experiment::merge([b, a]).unwrap(), whole);
}

#[test]
fn histogram_area_is_violation_probability() {
    for (state, shape) in [
        (StateSpec::Ghz { alpha_deg: 30.0 }, vec![3, 3]),
        (StateSpec::Random, vec![2, 2, 2]),
    ] {
        let (h, s) = experiment::run_strength_distribution(state, &shape, 2000, 8).unwrap();
        assert!((h.area() - s.pv).abs() < 1e-12);
        assert_eq!(h.counts().iter().sum::<u64>(), h.violating_trials());
        assert!(s.max_strength < 1.0);
    }
}

#[test]
fn ghz_two_qubit_strength_never_exceeds_chsh_optimum() {
    let (_, s) =
        experiment::run_strength_distribution(StateSpec::Ghz { alpha_deg: 45.0 }, &[2, 2], 5000, 2)
            .unwrap();
    assert!(s.max_strength <= 1.0 - std::f64::consts::FRAC_1_SQRT_2 + 1e-6);
}

#[test]
fn ghz_five_by_five_rarely_needs_more_than_two_settings() {
    // same seed, same draws: the facet statistics and the multisetting
    // statistics describe one run
    let search = experiment::SearchOptions::new(500);
    let g = experiment::run_genuine_settings(
        StateSpec::Ghz { alpha_deg: 45.0 },
        &[5, 5],
        4,
        &search,
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(g.fraction.violating, 500);
    assert!(g.fraction.fraction <= 0.03, "{}", g.fraction.fraction);
    assert!(
        g.fraction.exceeding_fraction <= 0.03,
        "{}",
        g.fraction.exceeding_fraction
    );
}

#[test]
fn textbook_oracle_handles_degenerate_three_party_cases() {
    for seed in [6804067706320995924, 5935063424961204455] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for shape in [vec![2, 2], vec![2, 3], vec![3, 3], vec![2, 2, 2]] {
            let (_, _, b) = random_behavior(&mut rng, &shape);
            let v = critical_visibility(&b).unwrap().v_crit;
            assert!((v - vertex_oracle_v_crit(&b)).abs() < 1e-8, "{shape:?}");
        }
    }
}
