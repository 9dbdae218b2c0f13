mod common;

use common::*;
use rand::Rng;
use tokcover::coverage::{greedy_run, lazy_greedy_run};
use tokcover::verify::{random_instance, GREEDY_BOUND};
use tokcover::*;

/// Greedy that re-evaluates the whole objective for every candidate.
fn naive_greedy(terms: &[(&SimilarityMatrix, f64)], k: usize) -> Vec<usize> {
    let n = terms[0].0.sources();
    let f = |s: &[usize]| terms.iter().map(|(m, w)| w * naive_coverage(s, m)).sum::<f64>();
    let mut s: Vec<usize> = Vec::new();
    for _ in 0..k.min(n) {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..n).filter(|j| !s.contains(j)) {
            let mut t = s.clone();
            t.push(j);
            let v = f(&t);
            if best.is_none_or(|(_, b)| v > b + 1e-12) {
                best = Some((j, v));
            }
        }
        s.push(best.unwrap().0);
    }
    s
}

#[test]
fn coverage_matches_naive_loop() {
    let mut r = rng(1);
    let m = random_sim(&mut r, 4, 6, SimKind::CalibratedTV, 0.0, 1.0);
    assert!((coverage_value(&[1, 4], &m).unwrap() - naive_coverage(&[1, 4], &m)).abs() < 1e-12);
    let all: Vec<usize> = (0..6).collect();
    let row_max_mean = (0..4)
        .map(|i| m.row(i).iter().cloned().fold(f64::MIN, f64::max))
        .sum::<f64>()
        / 4.0;
    assert!((coverage_value(&all, &m).unwrap() - row_max_mean).abs() < 1e-12);
}

#[test]
fn fused_value_matches_terms() {
    let mut r = rng(2);
    let tv = random_sim(&mut r, 5, 7, SimKind::CalibratedTV, 0.0, 1.0);
    let vv = random_sim(&mut r, 7, 7, SimKind::CalibratedVV, 0.0, 1.0);
    let s = [0, 3, 6];
    assert_eq!(fused_value(&s, &tv, &vv, 0.0).unwrap(), coverage_value(&s, &tv).unwrap());
    assert_eq!(fused_value(&[], &tv, &vv, 0.5).unwrap(), 0.0);
    let want = naive_coverage(&s, &tv) + 0.5 * naive_coverage(&s, &vv);
    assert!((fused_value(&s, &tv, &vv, 0.5).unwrap() - want).abs() < 1e-12);
    let other = random_sim(&mut r, 6, 6, SimKind::CalibratedVV, 0.0, 1.0);
    assert!(matches!(
        fused_value(&s, &tv, &other, 0.5),
        Err(Error::SourceCountMismatch { tv: 7, vv: 6 })
    ));
}

#[test]
fn greedy_matches_from_scratch_greedy() {
    let mut r = rng(3);
    for _ in 0..100 {
        let m = r.random_range(1..10);
        let n = r.random_range(1..14);
        let k = r.random_range(0..6);
        let tv = random_sim(&mut r, m, n, SimKind::CalibratedTV, 0.0, 1.0);
        let vv = random_sim(&mut r, n, n, SimKind::CalibratedVV, 0.0, 1.0);
        let alpha = r.random_range(0.0..1.0);
        assert_eq!(greedy_select(&tv, k).selected, naive_greedy(&[(&tv, 1.0)], k));
        assert_eq!(
            greedy_select_fused(&tv, &vv, alpha, k).unwrap().selected,
            naive_greedy(&[(&tv, 1.0), (&vv, alpha)], k)
        );
    }
}

#[test]
fn greedy_guarantee_on_random_instances() {
    let mut r = rng(4);
    let mut worst = f64::INFINITY;
    for _ in 0..200 {
        let inst = random_instance(&mut r, 12, 4).unwrap();
        for obj in [Objective::single(&inst.tv), Objective::fused(&inst.tv, &inst.vv, inst.alpha).unwrap()] {
            let g = greedy_run(&obj, inst.k);
            let (_, opt) = exhaustive_opt(&obj, inst.k).unwrap();
            let v = obj.value(&g.selected).unwrap();
            assert!(v >= GREEDY_BOUND * opt);
            worst = worst.min(v / opt);
        }
    }
    assert!(worst >= GREEDY_BOUND);
}

#[test]
fn exhaustive_matches_double_loop() {
    let mut r = rng(5);
    for _ in 0..20 {
        let m = random_sim(&mut r, 5, 8, SimKind::CalibratedTV, 0.0, 1.0);
        let mut best = (vec![], f64::NEG_INFINITY);
        for a in 0..8 {
            for b in a + 1..8 {
                let v = naive_coverage(&[a, b], &m);
                if v > best.1 {
                    best = (vec![a, b], v);
                }
            }
        }
        let (set, v) = exhaustive_opt(&Objective::single(&m), 2).unwrap();
        assert_eq!(set, best.0);
        assert!((v - best.1).abs() < 1e-12);
    }
}

#[test]
fn exhaustive_edges() {
    let id = SimilarityMatrix::from_rows(SimKind::RawTV, &[[1.0, 0.0], [0.0, 1.0]]).unwrap();
    assert_eq!(exhaustive_opt(&Objective::single(&id), 1).unwrap(), (vec![0], 0.5));
    let mut r = rng(6);
    let m = random_sim(&mut r, 3, 5, SimKind::CalibratedTV, 0.0, 1.0);
    assert_eq!(exhaustive_opt(&Objective::single(&m), 5).unwrap().0, vec![0, 1, 2, 3, 4]);
    let big = random_sim(&mut r, 1, 64, SimKind::CalibratedTV, 0.0, 1.0);
    assert!(matches!(
        exhaustive_opt(&Objective::single(&big), 8),
        Err(Error::InstanceTooLarge { .. })
    ));
}

#[test]
fn greedy_hand_example() {
    let m = SimilarityMatrix::from_rows(SimKind::CalibratedTV, &[[0.9, 0.1, 0.8], [0.1, 0.9, 0.8]]).unwrap();
    let res = greedy_select(&m, 1);
    assert_eq!(res.selected, vec![2]);
    assert!((res.gains[0] - 0.8).abs() < 1e-12);
}

#[test]
fn full_budget_gains_telescope() {
    let mut r = rng(7);
    let m = random_sim(&mut r, 6, 9, SimKind::CalibratedTV, 0.0, 1.0);
    let res = greedy_select(&m, 20);
    let mut sorted = res.selected.clone();
    sorted.sort();
    assert_eq!(sorted, (0..9).collect::<Vec<_>>());
    let all: Vec<usize> = (0..9).collect();
    let total: f64 = res.gains.iter().sum();
    assert!((total - coverage_value(&all, &m).unwrap()).abs() < 1e-9);
}

#[test]
fn fused_crafted_instance() {
    // text prefers column 0, vision prefers column 1, column 2 is decent for both
    let tv = SimilarityMatrix::from_rows(SimKind::CalibratedTV, &[[0.6, 0.1, 0.45], [0.6, 0.1, 0.45]]).unwrap();
    let vv = SimilarityMatrix::from_rows(SimKind::CalibratedVV, &[[0.1, 0.7, 0.5], [0.1, 0.7, 0.5], [0.1, 0.7, 0.5]]).unwrap();
    assert_eq!(greedy_select(&tv, 1).selected, vec![0]);
    assert_eq!(greedy_select(&vv, 1).selected, vec![1]);
    let singleton: Vec<f64> = (0..3)
        .map(|j| naive_coverage(&[j], &tv) + 0.5 * naive_coverage(&[j], &vv))
        .collect();
    let fused = greedy_select_fused(&tv, &vv, 0.5, 1).unwrap();
    assert_eq!(fused.selected, vec![argmax(&singleton)]);
    assert_eq!(fused.selected, vec![2]);
}

#[test]
fn fused_alpha_zero_collapses() {
    let mut r = rng(8);
    for _ in 0..20 {
        let tv = random_sim(&mut r, 7, 15, SimKind::CalibratedTV, 0.0, 1.0);
        let vv = random_sim(&mut r, 15, 15, SimKind::CalibratedVV, 0.0, 1.0);
        assert_eq!(greedy_select_fused(&tv, &vv, 0.0, 6).unwrap().selected, greedy_select(&tv, 6).selected);
    }
}

#[test]
fn lazy_equals_eager_at_576() {
    let sample = synth_sample(576, 40, 0, 64, 64, 9);
    let tv = calibrate(&build_tv(&sample.text, &sample.vision_post).unwrap(), 0.02).unwrap();
    let vv = calibrate(&build_vv(&sample.vision_pre).unwrap(), 0.2).unwrap();
    let eager = greedy_select_fused(&tv, &vv, 0.5, 64).unwrap();
    let lazy = lazy_greedy_select_fused(&tv, &vv, 0.5, 64).unwrap();
    assert_eq!(eager.selected, lazy.selected);
    assert!((eager.objective_fused - lazy.objective_fused).abs() < 1e-9);
    assert!(lazy.gain_evaluations < eager.gain_evaluations);
    assert!(lazy.gain_evaluations <= 64 * 576);
}

#[test]
fn lazy_equals_eager_on_raw_matrices() {
    let mut r = rng(10);
    for _ in 0..50 {
        let n = r.random_range(1..30);
        let m = random_sim(&mut r, 6, n, SimKind::RawTV, -1.0, 1.0);
        let k = r.random_range(0..n + 2);
        let e = greedy_select(&m, k);
        let l = lazy_greedy_select(&m, k);
        assert_eq!(e.selected, l.selected);
        assert_eq!(e.gains, l.gains);
    }
}

#[test]
fn submodular_chains_on_8x10() {
    let mut r = rng(11);
    let mut total = 0;
    for seed in 0..10 {
        let tv = random_sim(&mut r, 8, 10, SimKind::CalibratedTV, 0.0, 1.0);
        let vv = random_sim(&mut r, 10, 10, SimKind::CalibratedVV, 0.0, 1.0);
        for obj in [Objective::single(&tv), Objective::fused(&tv, &vv, 0.5).unwrap()] {
            let rep = check_submodular(&obj, 500, seed).unwrap();
            assert!(rep.is_clean(), "{rep:?}");
            total += rep.trials;
        }
    }
    assert_eq!(total, 10_000);
}

#[test]
fn run_outcome_matches_selection() {
    let mut r = rng(12);
    let tv = random_sim(&mut r, 4, 9, SimKind::CalibratedTV, 0.0, 1.0);
    let vv = random_sim(&mut r, 9, 9, SimKind::CalibratedVV, 0.0, 1.0);
    let obj = Objective::fused(&tv, &vv, 0.3).unwrap();
    let run = lazy_greedy_run(&obj, 4);
    assert!((run.value(&obj) - obj.value(&run.selected).unwrap()).abs() < 1e-12);
}
