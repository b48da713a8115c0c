mod common;

use common::{pow_mod, rank_mod, subsets};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcess::field::{Field, Packet};
use rcess::hashing::{
    build_match_table, build_sparse_graph, compute_hashes, detect_corrupt, recover_hashes, shamir_share,
    sparse_edge_probability, Comparison, HashGraph, HashSelection, MatchTable,
};
use rcess::Error;

#[test]
fn shamir_masks_hide_any_zr_shares() {
    for n in 1..=8usize {
        for zr in 1..n {
            for set in subsets(n, zr) {
                let m: Vec<Vec<u64>> =
                    set.iter().map(|&p| (1..=zr as u64).map(|t| pow_mod(p as u64, t, 11)).collect()).collect();
                assert_eq!(rank_mod(11, m), zr, "n={n} zr={zr} {set:?}");
            }
        }
    }
}

#[test]
fn zero_masks_replicate() {
    let f = Field::new(7).unwrap();
    assert_eq!(shamir_share(&f, 5, &[], 6), vec![5; 6]);
}

#[test]
fn recovery_is_never_silently_wrong() {
    let f = Field::new(13).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut aborts = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(3..=10usize);
        let zr = rng.random_range(0..n - 1);
        let zw = rng.random_range(1..=(n - zr - 1).min(3));
        let d = rng.random_range(zr + zw + 1..=n);
        let parties: Vec<usize> = {
            let mut p: Vec<usize> = sample(&mut rng, n, d).into_iter().map(|i| i + 1).collect();
            p.sort_unstable();
            p
        };
        let truth: Vec<u64> = (0..3).map(|_| f.random(&mut rng)).collect();
        let mut shares: Vec<Vec<u64>> = vec![Vec::new(); n];
        for &h in &truth {
            let masks: Vec<u64> = (0..zr).map(|_| f.random(&mut rng)).collect();
            for (i, s) in shamir_share(&f, h, &masks, n).into_iter().enumerate() {
                shares[i].push(s);
            }
        }
        let bad = rng.random_range(0..=zw);
        for i in sample(&mut rng, d, bad) {
            for x in shares[parties[i] - 1].iter_mut() {
                *x = f.random(&mut rng);
            }
        }
        let view: Vec<(usize, &[u64])> = parties.iter().map(|&p| (p, shares[p - 1].as_slice())).collect();
        match recover_hashes(&f, &view, zr, zw) {
            Ok(got) => assert_eq!(got, truth),
            Err(Error::HashRecoveryFailure(_)) => {
                aborts += 1;
                assert!(d < zr + 1 + 2 * zw, "unique decoding range must not abort");
            }
            Err(e) => panic!("{e}"),
        }
    }
    assert!(aborts > 0);
}

#[test]
fn single_edge_false_match_is_one_over_q() {
    let f = Field::new(5).unwrap();
    let graph = HashGraph::complete(2);
    let sel = HashSelection::for_parties(&graph, &[1, 2], 1);
    for v in 1..=3u32 {
        let size = 5u64.pow(v);
        let vec_of = |x: u64| Packet((0..v).map(|i| x / 5u64.pow(i) % 5).collect());
        let mut hits = 0u64;
        let mut total = 0u64;
        let w1 = vec_of(7 % size);
        for e in 1..size {
            for w2 in 0..size {
                let honest = vec![vec![w1.clone()], vec![vec_of(w2)]];
                let hashes = compute_hashes(&f, &honest, &graph).unwrap();
                let mut bad = w1.clone();
                bad.add(&f, &vec_of(e));
                let rows: Vec<(usize, &[Packet])> = vec![(1, std::slice::from_ref(&bad)), (2, &honest[1][..])];
                let t = build_match_table(&f, &graph, &sel, hashes.values(), &rows).unwrap();
                total += 1;
                hits += u64::from(t.entry(0, 1) == Comparison::Match);
            }
        }
        // exactly 1/q for every packet width, not 1/q^v
        assert_eq!(hits * 5, total, "v={v}");
    }
}

fn random_table(rng: &mut ChaCha8Rng, d: usize) -> MatchTable {
    let mut e = vec![vec![Comparison::Match; d]; d];
    for a in 0..d {
        for b in a + 1..d {
            let c = match rng.random_range(0..3) {
                0 => Comparison::Mismatch,
                1 => Comparison::Untested,
                _ => Comparison::Match,
            };
            e[a][b] = c;
            e[b][a] = c;
        }
    }
    MatchTable::from_entries((1..=d).collect(), e).unwrap()
}

#[test]
fn detector_outcomes_are_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..5000 {
        let d: usize = rng.random_range(1..=8);
        let zw = rng.random_range(0..=d.saturating_sub(1) / 2);
        let t = random_table(&mut rng, d);
        match detect_corrupt(&t, zw) {
            Ok(det) => {
                assert!(det.removed.len() <= zw);
                assert!(det.honest.len() >= d - zw);
                for &a in &det.honest {
                    for &b in &det.honest {
                        assert_ne!(t.entry(a - 1, b - 1), Comparison::Mismatch);
                    }
                }
                if zw == 0 {
                    assert!(det.removed.is_empty());
                }
            }
            Err(Error::DetectionAbort(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn sparse_graphs_average_the_expected_edge_count() {
    let n = 32usize;
    let p = sparse_edge_probability(n);
    let pair = 1.0 - (1.0 - p) * (1.0 - p);
    let expected = pair * (n * (n - 1) / 2) as f64;
    let seeds = 300;
    let mut total = 0usize;
    for seed in 0..seeds {
        let g = build_sparse_graph(n, seed).unwrap();
        assert!(g.is_connected());
        assert_eq!(g, build_sparse_graph(n, seed).unwrap());
        total += g.edge_count();
    }
    let mean = total as f64 / seeds as f64;
    assert!((mean - expected).abs() < 0.05 * expected, "mean {mean} expected {expected}");
}
