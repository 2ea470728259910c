mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::ari_by_pairs;
use vbvarsel::{adjusted_rand_index, fisher_enrichment, selection_metrics, Quartiles};


#[test]
fn ari_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let n = rng.random_range(2..=12);
        let ka = rng.random_range(1..=5);
        let kb = rng.random_range(1..=5);
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..ka)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..kb)).collect();
        let got = adjusted_rand_index(&a, &b).unwrap();
        let want = ari_by_pairs(&a, &b);
        assert!((got - want).abs() < 1e-12, "{a:?} {b:?}: {got} vs {want}");
    }
}

#[test]
fn ari_ignores_label_names() {
    let a = [0, 0, 1, 1, 2, 2, 2];
    let b = [7, 7, 3, 3, 9, 9, 9];
    assert_eq!(adjusted_rand_index(&a, &b).unwrap(), 1.0);
    let c = [0, 1, 0, 1, 0, 1, 0];
    let forward = adjusted_rand_index(&a, &c).unwrap();
    let backward = adjusted_rand_index(&c, &a).unwrap();
    assert!((forward - backward).abs() < 1e-15);
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out * (n - i) as u128 / (i + 1) as u128;
    }
    out
}

/// Counts every draw of `draws` items from `universe`, with the set taken as
/// items `0..set_size`, and returns the share whose overlap reaches `x`.
fn tail_by_subsets(x: u64, set_size: u64, draws: u64, universe: u64) -> f64 {
    let (mut hit, mut total) = (0u64, 0u64);
    for mask in 0u32..(1u32 << universe) {
        if mask.count_ones() as u64 != draws {
            continue;
        }
        total += 1;
        let overlap = (mask & ((1u32 << set_size) - 1)).count_ones() as u64;
        if overlap >= x {
            hit += 1;
        }
    }
    hit as f64 / total as f64
}

fn tail_by_counting(x: u64, set_size: u64, draws: u64, universe: u64) -> f64 {
    let hit: u128 = (x..=set_size.min(draws))
        .map(|i| binomial(set_size, i) * binomial(universe - set_size, draws - i))
        .sum();
    hit as f64 / binomial(universe, draws) as f64
}

#[test]
fn fisher_matches_subset_enumeration() {
    for universe in 1..=14u64 {
        for set_size in 0..=universe {
            for draws in 0..=universe {
                let lower = draws.saturating_sub(universe - set_size);
                for x in lower..=set_size.min(draws) {
                    let got = fisher_enrichment(x, set_size, draws, universe).unwrap();
                    let want = tail_by_subsets(x, set_size, draws, universe);
                    assert!(
                        (got - want).abs() < 1e-10,
                        "{x} {set_size} {draws} {universe}: {got} vs {want}"
                    );
                }
            }
        }
    }
}

#[test]
fn fisher_matches_exact_counts_up_to_thirty() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..2000 {
        let universe = rng.random_range(15..=30u64);
        let set_size = rng.random_range(0..=universe);
        let draws = rng.random_range(0..=universe);
        let lower = draws.saturating_sub(universe - set_size);
        let x = rng.random_range(lower..=set_size.min(draws));
        let got = fisher_enrichment(x, set_size, draws, universe).unwrap();
        let want = tail_by_counting(x, set_size, draws, universe);
        assert!(
            (got - want).abs() <= 1e-10 * want.max(1e-300) + 1e-14,
            "{x} {set_size} {draws} {universe}"
        );
    }
}

#[test]
fn fisher_rejects_impossible_counts() {
    assert!(fisher_enrichment(6, 5, 10, 20).is_err());
    assert!(fisher_enrichment(1, 25, 10, 20).is_err());
    assert!(fisher_enrichment(1, 5, 21, 20).is_err());
}

#[test]
fn selection_metrics_count_each_class() {
    let truth = [true, true, true, false, false, false, false];
    let predicted = [true, false, true, false, true, false, false];
    let (rel, irr) = selection_metrics(&predicted, &truth).unwrap();
    assert!((rel - 2.0 / 3.0).abs() < 1e-15);
    assert!((irr - 0.75).abs() < 1e-15);
}

#[test]
fn quartiles_interpolate_between_order_statistics() {
    let q = Quartiles::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
    assert_eq!((q.lower, q.median, q.upper), (1.75, 2.5, 3.25));
    let q = Quartiles::of(&[5.0]).unwrap();
    assert_eq!((q.lower, q.median, q.upper), (5.0, 5.0, 5.0));
    assert!(Quartiles::of(&[]).is_none());
}
