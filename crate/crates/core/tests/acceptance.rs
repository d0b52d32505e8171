//! Acceptance suite: thirteen numbered end-to-end criteria, each a test
//! printing one pass line with its measured quantities. Tolerances and
//! runtime ceilings are asserted, not just reported.

mod common;

use common::{big_ratio, binomial, naive_occurrences, random_pattern, TestRng};
use num_bigint::BigUint;
use num_traits::One;
use std::time::Instant;
use subshift::analysis::{
    entropy_bounds, gap_series, lln_fraction, stage_counts, LlnMode, StageCounts, StepCounts,
};
use subshift::construction::{
    admissible, build_next, check_expanded, init_stage, phi, phi_inverse, reference,
    verify_stage_pair, FillRule, Stage, StepGeometry,
};
use subshift::demos::{demo_divergence, demo_escape};
use subshift::embedding::{embed, Assignment};
use subshift::lattice::{GridBox, Sublattice};
use subshift::patterns::{frequency, occurrences, OccurrenceQuery, Pattern};
use subshift::sparse::SparseSet;
use subshift::{ratio, Rational};

fn reference_chain_1d(seed: u64) -> (Stage, Stage, Stage) {
    let s1 = init_stage(1).unwrap();
    let (s2, _) = build_next(&s1, &reference::params_1d_step1(seed)).unwrap();
    let (s3, _) = build_next(&s2, &reference::params_1d_step2(seed)).unwrap();
    (s1, s2, s3)
}

fn assert_runtime(started: Instant, limit_s: u64, what: &str) {
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < limit_s,
        "{what} took {elapsed:?}, over the {limit_s} s ceiling"
    );
}

#[test]
fn criterion_01_residue_decomposition() {
    let started = Instant::now();
    let mut rng = TestRng(0xC1);
    for case in 0..200 {
        let d = 1 + (case % 2);
        let host_side = rng.range_i64(2, 12) as u64;
        let needle_side = rng.range_i64(1, host_side.min(3) as i64) as u64;
        let m = rng.range_i64(1, 4) as u64;
        let alphabet = rng.range_i64(2, 3) as u32;
        let host_corner: Vec<i64> = (0..d).map(|_| rng.range_i64(-6, 6)).collect();
        let host = random_pattern(
            &mut rng,
            GridBox::cube(host_corner, host_side).unwrap(),
            alphabet,
        );
        let needle = random_pattern(
            &mut rng,
            GridBox::origin_cube(d, needle_side).unwrap(),
            alphabet,
        );
        let plain = frequency(&needle, &host, &OccurrenceQuery::all()).unwrap();
        let lattice = Sublattice::new(d, m).unwrap();
        let mut sum = Rational::from_integer(0.into());
        for rep in lattice.residues() {
            let q = OccurrenceQuery::in_class(rep, lattice.clone()).unwrap();
            sum += frequency(&needle, &host, &q).unwrap();
        }
        assert_eq!(plain, sum, "case {case}: residue classes must partition the count");
    }
    assert_runtime(started, 10, "residue decomposition");
    println!("[PASS] 1 residue decomposition: 200 instances, exact rational equality");
}

#[test]
fn criterion_02_counting_matches_naive_oracle() {
    let started = Instant::now();
    let mut rng = TestRng(0xC2);
    for case in 0..500 {
        let d = 1 + (case % 2);
        let host_side = if d == 1 {
            rng.range_i64(4, 2000) as u64
        } else {
            rng.range_i64(2, 70) as u64
        };
        let needle_side = rng.range_i64(1, 3.min(host_side as i64)) as u64;
        let alphabet = rng.range_i64(2, 3) as u32;
        let host_corner: Vec<i64> = (0..d).map(|_| rng.range_i64(-50, 50)).collect();
        let host = random_pattern(
            &mut rng,
            GridBox::cube(host_corner, host_side).unwrap(),
            alphabet,
        );
        let needle_corner: Vec<i64> = (0..d).map(|_| rng.range_i64(-2, 2)).collect();
        let needle = random_pattern(
            &mut rng,
            GridBox::cube(needle_corner, needle_side).unwrap(),
            alphabet,
        );
        let (query, class) = if case % 2 == 0 {
            (OccurrenceQuery::all(), None)
        } else {
            let m = rng.range_i64(2, 4) as u64;
            let lattice = Sublattice::new(d, m).unwrap();
            let rep: Vec<i64> = (0..d).map(|_| rng.range_i64(0, m as i64 - 1)).collect();
            (
                OccurrenceQuery::in_class(rep.clone(), lattice).unwrap(),
                Some((rep, m)),
            )
        };
        let fast = occurrences(&needle, &host, &query).unwrap();
        let slow = naive_occurrences(
            &needle,
            &host,
            class.as_ref().map(|(r, m)| (r.as_slice(), *m)),
        );
        assert_eq!(fast, slow, "case {case}: occurrence positions diverge from the oracle");
    }
    assert_runtime(started, 30, "oracle equivalence");
    println!("[PASS] 2 oracle equivalence: 500 instances, positions identical");
}

#[test]
fn criterion_03_insertion_section_laws() {
    let started = Instant::now();
    let mut rng = TestRng(0xC3);
    let mut chacha = {
        use rand_chacha::rand_core::SeedableRng;
        rand_chacha::ChaCha8Rng::seed_from_u64(7)
    };
    for case in 0..100 {
        let d = 1 + (case % 2);
        let n_prev = rng.range_i64(1, 3) as u64;
        let grid = rng.range_i64(2, if d == 1 { 5 } else { 3 }) as u64;
        let side = grid * n_prev;
        let wt = random_pattern(&mut rng, GridBox::origin_cube(d, side).unwrap(), 2);
        let inserted = (side + 1).pow(d as u32) - side.pow(d as u32);
        let explicit_bits: Vec<u16> = (0..inserted).map(|_| rng.below(2) as u16).collect();
        let fills = [
            FillRule::AllZero,
            FillRule::AllOne,
            FillRule::Random,
            FillRule::Explicit(explicit_bits),
        ];
        for fill in &fills {
            let rng_opt = matches!(fill, FillRule::Random).then_some(&mut chacha);
            let w = phi_inverse(&wt, n_prev, fill, rng_opt).unwrap();
            assert_eq!(w.support().cube_side(), Some(side + 1));
            let stripped = phi(&w, n_prev).unwrap();
            assert_eq!(stripped, wt, "case {case}: strip after insert must be the identity");
            let cut = side - n_prev;
            if cut > 0 {
                for g in GridBox::origin_cube(d, cut).unwrap().iter_points() {
                    assert_eq!(w.get(&g), wt.get(&g), "case {case}: low region must be untouched");
                }
            }
        }
    }
    assert_runtime(started, 5, "insertion section laws");
    println!("[PASS] 3 insertion section laws: 100 words, all fill rules, exact");
}

#[test]
fn criterion_04_reference_chain_builds_and_verifies() {
    let started = Instant::now();
    let (s1, s2, s3) = reference_chain_1d(1);
    assert_eq!(s2.side(), 17);
    assert_eq!(s3.side(), 6 * 6 * 17 + 1);
    assert_eq!(s3.side(), 613);
    let r12 = verify_stage_pair(&s1, &s2).unwrap();
    let r23 = verify_stage_pair(&s2, &s3).unwrap();
    assert!(r12.pass, "first pair: {:?}", r12.counterexamples);
    assert!(r23.pass, "second pair: {:?}", r23.counterexamples);
    assert!(r12.gcd_ok && r23.gcd_ok);
    assert_runtime(started, 60, "reference chain");
    println!(
        "[PASS] 4 reference chain: sides 1/17/613, both pairs verified in {:?}",
        started.elapsed()
    );
}

#[test]
fn criterion_05_two_dimensional_build_verifies() {
    let started = Instant::now();
    let s1 = init_stage(2).unwrap();
    let (s2, report) = build_next(&s1, &reference::params_2d_step1(1)).unwrap();
    assert_eq!(s2.side(), 4 * 2 * 1 + 1);
    assert_eq!(s2.side(), 9);
    assert!(report.complete);
    let r = verify_stage_pair(&s1, &s2).unwrap();
    assert!(r.pass, "{:?}", r.counterexamples);
    assert_runtime(started, 120, "two-dimensional build");
    println!(
        "[PASS] 5 two-dimensional build: side 9, {} patterns, verified in {:?}",
        s2.patterns().len(),
        started.elapsed()
    );
}

#[test]
fn criterion_06_acceptance_ratio_matches_exhaustive_fraction() {
    let started = Instant::now();
    let s1 = init_stage(1).unwrap();
    let params = reference::params_1d_step1(1);
    let (_, report) = build_next(&s1, &params).unwrap();
    let sampled = report.acceptance_ratio();

    let support = GridBox::origin_cube(1, 16).unwrap();
    let mut passing = 0u64;
    for word_bits in 0u32..(1 << 16) {
        let values: Vec<u16> = (0..16).map(|i| ((word_bits >> i) & 1) as u16).collect();
        let word = Pattern::new(support.clone(), 2, values).unwrap();
        if admissible(&word, &s1, &params).unwrap().pass {
            passing += 1;
        }
    }
    let exact = ratio(passing as i64, 1 << 16);
    let diff = if sampled > exact {
        sampled.clone() - exact.clone()
    } else {
        exact.clone() - sampled.clone()
    };
    assert!(
        diff < ratio(1, 10),
        "sampled {sampled} vs exhaustive {exact}: difference over 0.1"
    );
    assert_runtime(started, 30, "exhaustive admissibility cross-check");
    println!(
        "[PASS] 6 admissibility cross-check: exhaustive {passing}/65536, sampled {}/{} draws",
        report.passed, report.draws
    );
}

#[test]
fn criterion_07_lln_exact_point() {
    let started = Instant::now();
    // independent oracle first: words of length 20 over two symbols whose
    // one-fraction sits strictly within 1/10 of 1/2 have 9, 10, or 11 ones
    let mut acceptable = BigUint::from(0u32);
    for ones in 0..=20u64 {
        let dev_num = (2 * ones as i64 - 20).abs() as u64;
        if dev_num * 10 < 2 * 20 {
            acceptable += binomial(20, ones);
        }
    }
    let oracle = big_ratio(acceptable, BigUint::from(1u32) << 20);
    assert_eq!(oracle, ratio(520676, 1048576));

    let lattice = Sublattice::new(1, 1).unwrap();
    let value = lln_fraction(20, &ratio(1, 10), &lattice, 2, LlnMode::Exhaustive).unwrap();
    assert_eq!(value, oracle, "exhaustive count must equal the binomial oracle");
    assert_runtime(started, 20, "counting-law exact point");
    println!("[PASS] 7 counting-law exact point: 520676/1048576 from both sides");
}

#[test]
fn criterion_08_entropy_ledger() {
    let started = Instant::now();
    // synthetic chain: every block combination kept, so the rate is flat
    let mut synthetic = Vec::new();
    let mut n = 1u64;
    let mut count = BigUint::from(2u32);
    for _ in 0..4 {
        synthetic.push(StageCounts {
            n,
            count: count.clone(),
            step: Some(StepCounts {
                l: 2,
                m_next: 2,
                nu: ratio(1, 10),
            }),
        });
        count = count.pow(4);
        n *= 4;
    }
    synthetic.push(StageCounts {
        n,
        count,
        step: None,
    });
    let ledger = entropy_bounds(1, &synthetic).unwrap();
    let ln2 = std::f64::consts::LN_2;
    for e in &ledger.entries {
        assert!(
            (e.value - ln2).abs() < 1e-12,
            "stage {}: rate {} is not flat at ln 2",
            e.k,
            e.value
        );
    }

    let (s1, s2, s3) = reference_chain_1d(1);
    let refs: Vec<&Stage> = vec![&s1, &s2, &s3];
    let ledger = entropy_bounds(1, &stage_counts(&refs).unwrap()).unwrap();
    for (e, s) in ledger.entries.iter().zip(&refs) {
        let independent = (s.patterns().len() as f64).ln() / (s.side() as f64);
        assert!(
            (e.value - independent).abs() < 1e-12,
            "stage {}: ledger {} vs independent {}",
            e.k,
            e.value,
            independent
        );
        assert!(e.value_lo <= e.value_hi);
    }
    assert_runtime(started, 1, "entropy ledger");
    println!("[PASS] 8 entropy ledger: synthetic flat at ln 2, reference matches ln|C_k|/n_k^d");
}

#[test]
fn criterion_09_embedding_exactness() {
    let started = Instant::now();
    let (s1, s2, s3) = reference_chain_1d(1);
    let chain: Vec<&Stage> = vec![&s1, &s2, &s3];
    // squares inside the support [0, 613): 0, 1, 4, ..., 576
    let p = SparseSet::parse(r#"{"polynomial": [[0, 0, 1]], "range": [0, 25]}"#).unwrap();
    let support = GridBox::origin_cube(1, 613).unwrap();
    let points = p.in_box(&support);
    assert_eq!(points.len(), 25);

    let full_width = StepGeometry {
        d: 1,
        n: s2.side(),
        modulus: s2.modulus(),
        count: s2.patterns().len(),
        l: 6,
        m_next: 6,
        d_tol: ratio(3, 10),
        slack: Rational::one(),
    };
    let mut rng = TestRng(0xC9);
    for case in 0..50 {
        let values: std::collections::BTreeMap<Vec<i64>, u16> = points
            .iter()
            .map(|h| (h.clone(), rng.below(2) as u16))
            .collect();
        let a = Assignment::new(vec![0], values.clone()).unwrap();
        let (w, report) = embed(&chain, 3, &a, &p, None).unwrap();
        for (h, v) in &values {
            assert_eq!(w.get(h), *v, "case {case}: value lost at {h:?}");
        }
        assert_eq!(report.assignment_points, 25);
        let stripped = phi(&w, s2.side()).unwrap();
        let check = check_expanded(&stripped, &s2, &full_width).unwrap();
        assert!(
            check.pass,
            "case {case}: output fails the full-width conditions: {:?}",
            check.reason
        );
    }
    assert_runtime(started, 60, "embedding exactness");
    println!("[PASS] 9 embedding exactness: 50 assignments reproduced, full-width admissible");
}

#[test]
fn criterion_10_average_divergence() {
    let started = Instant::now();
    let (s1, s2, s3) = reference_chain_1d(1);
    let chain: Vec<&Stage> = vec![&s1, &s2, &s3];
    // squares from 9 on, so the shared central window stays clear
    let p = SparseSet::parse(r#"{"polynomial": [[0, 0, 1]], "range": [3, 26]}"#).unwrap();
    let out = demo_divergence(&chain, &p, 8, None).unwrap();
    assert!(out.certificate_ok, "shared central window must match cell-wise");
    let (_, last0) = out.series0.last().unwrap();
    let (_, last1) = out.series1.last().unwrap();
    assert!(
        *last0 <= ratio(1, 20),
        "zero-valued window averages {last0} above 1/20"
    );
    assert!(
        *last1 >= ratio(19, 20),
        "one-valued window averages {last1} below 19/20"
    );
    let window = GridBox::cube(vec![-7], 15).unwrap();
    assert_eq!(
        out.y0.restrict(&window).unwrap(),
        out.y1.restrict(&window).unwrap()
    );
    assert_runtime(started, 60, "average divergence");
    println!(
        "[PASS] 10 average divergence: final averages {last0} vs {last1}, shared window exact"
    );
}

#[test]
fn criterion_11_escape_windows() {
    let started = Instant::now();
    let (s1, s2, s3) = reference_chain_1d(1);
    let chain: Vec<&Stage> = vec![&s1, &s2, &s3];
    let p = SparseSet::parse(r#"{"polynomial": [[0, 0, 1]], "range": [1, 18]}"#).unwrap();
    let g = SparseSet::explicit(1, vec![vec![2], vec![8], vec![32], vec![128]]).unwrap();
    let out = demo_escape(&chain, &p, &g, None, None).unwrap();
    assert!(out.report.verified, "every listed point must differ from the origin value");
    assert!(!out.report.points.is_empty());
    assert!(out.report.points.iter().all(|c| c.escapes && c.value == 1));
    assert_eq!(out.report.origin_value, 0);
    let flipped = out.flipped.clone().expect("free set meets the support");
    let diffs: Vec<Vec<i64>> = out
        .window_a
        .support()
        .iter_points()
        .filter(|h| out.window_a.get(h) != out.window_b.get(h))
        .collect();
    assert_eq!(
        diffs,
        vec![flipped],
        "the two windows must differ exactly at the flipped point"
    );
    assert_runtime(started, 30, "escape windows");
    println!(
        "[PASS] 11 escape windows: {} points verified, single-cell difference at {:?}",
        out.report.points.len(),
        out.flipped
    );
}

#[test]
fn criterion_12_gap_series() {
    let started = Instant::now();
    let (s1, s2, s3) = reference_chain_1d(1);
    let chain: Vec<&Stage> = vec![&s1, &s2, &s3];
    let needle = Pattern::new(GridBox::origin_cube(1, 1).unwrap(), 2, vec![1]).unwrap();
    let lattice = Sublattice::new(1, 1).unwrap();
    let gaps = gap_series(&chain, &needle, &lattice).unwrap();
    let by_k: std::collections::BTreeMap<usize, _> =
        gaps.entries.iter().map(|e| (e.k, e)).collect();
    let g2 = &by_k[&2];
    let g3 = &by_k[&3];
    assert!(
        g3.gap <= g2.gap,
        "gap must not grow: {} then {}",
        g2.gap,
        g3.gap
    );
    let bound = g3.bound.clone().unwrap();
    let correction = g3.correction.clone().unwrap();
    assert_eq!(bound, ratio(3, 5));
    assert!(
        g3.gap <= bound.clone() + correction.clone(),
        "gap {} exceeds {} + {}",
        g3.gap,
        bound,
        correction
    );
    assert!(!g3.flagged);
    assert_runtime(started, 60, "frequency gap series");
    println!(
        "[PASS] 12 gap series: {} then {}, bound {} + correction {}",
        g2.gap, g3.gap, bound, correction
    );
}

#[test]
fn criterion_13_thread_count_determinism() {
    let started = Instant::now();
    let mut outputs: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    for threads in [1usize, 4, 8] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let (s2, s3) = pool.install(|| {
            let (_, s2, s3) = reference_chain_1d(1);
            (s2, s3)
        });
        outputs.push((s2.to_json().into_bytes(), s3.to_json().into_bytes()));
    }
    for pair in outputs.windows(2) {
        assert_eq!(pair[0].0, pair[1].0, "second-stage files differ across pools");
        assert_eq!(pair[0].1, pair[1].1, "third-stage files differ across pools");
    }
    assert_runtime(started, 120, "thread-count determinism");
    println!("[PASS] 13 determinism: byte-identical stage files with 1, 4, and 8 workers");
}
