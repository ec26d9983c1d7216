mod oracle;

use std::collections::{HashSet, VecDeque};

use atshuffle::perm::localized_permutations;
use atshuffle::{BoundaryAssignment, LocalizationVector, Permutation};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn window(n: usize, max_bound: usize, seed: u64) -> LocalizationVector {
    LocalizationVector::random_admissible(n, max_bound, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn out_of_order_swaps_stay_localized(n in 2usize..=6, bound in 0usize..=3, seed in any::<u64>()) {
        let ell = window(n, bound, seed);
        let states = localized_permutations(&ell);
        for s in &states {
            let line = s.one_line();
            for a in 0..n {
                for b in a + 1..n {
                    if line[a] > line[b] {
                        let mut t = line.to_vec();
                        t.swap(a, b);
                        prop_assert!(oracle::localized(&t, &ell), "{s} swapping positions {} and {}", a + 1, b + 1);
                    }
                }
            }
        }
    }

    #[test]
    fn restricted_move_graph_is_connected(n in 2usize..=6, bound in 0usize..=3, seed in any::<u64>()) {
        let ell = window(n, bound, seed);
        let states: HashSet<Vec<usize>> = localized_permutations(&ell).iter().map(|s| s.one_line().to_vec()).collect();
        let start: Vec<usize> = (1..=n).collect();
        let mut seen = HashSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for i in 0..n - 1 {
                let mut y = x.clone();
                y.swap(i, i + 1);
                if states.contains(&y) && seen.insert(y.clone()) {
                    queue.push_back(y);
                }
            }
        }
        prop_assert_eq!(seen.len(), states.len());
    }

    #[test]
    fn relabel_map_shifts_the_middle(n in 3usize..=7, bound in 0usize..=2, seed in any::<u64>(), pick in any::<u64>()) {
        let ell = window(n, bound, seed);
        let states = localized_permutations(&ell);
        let s = &states[(pick % states.len() as u64) as usize];
        for i in 0..=2.min(n - 1) {
            for j in 0..=2.min(n - 1 - i) {
                let b = BoundaryAssignment::from_permutation(s, i, j).unwrap();
                let map = b.relabel_map();
                let m = n - i - j;
                prop_assert_eq!(map.len(), m);
                prop_assert!(map.windows(2).all(|w| w[0] < w[1]));
                let lo = 1 + ell.lmax_minus();
                let hi = m.saturating_sub(ell.lmax_plus());
                for k in lo..=hi {
                    prop_assert_eq!(map[k - 1], k + i);
                }
            }
        }
    }

    #[test]
    fn restrict_round_trips(n in 2usize..=7, bound in 0usize..=3, seed in any::<u64>(), pick in any::<u64>(), i in 0usize..3, j in 0usize..3) {
        prop_assume!(i + j <= n);
        let ell = window(n, bound, seed);
        let states = localized_permutations(&ell);
        let s = &states[(pick % states.len() as u64) as usize];
        let b = BoundaryAssignment::from_permutation(s, i, j).unwrap();
        let r = b.restrict(s, &ell).unwrap();
        prop_assert!(r.sigma.is_localized(&r.ell));
        prop_assert!(r.ell.is_admissible());
        prop_assert!(r.ell.lmax_minus() <= ell.lmax_minus() && r.ell.lmax_plus() <= ell.lmax_plus());
        prop_assert_eq!(&b.embed(&r.sigma).unwrap(), s);
    }

    #[test]
    fn transpositions_keep_both_arrays_consistent(n in 2usize..=40, edges in prop::collection::vec(any::<usize>(), 0..200)) {
        let mut s = Permutation::identity(n);
        for e in edges {
            s.swap_adjacent(1 + e % (n - 1)).unwrap();
            prop_assert!(s.is_consistent());
        }
        for pos in 1..=n {
            prop_assert_eq!(s.position_of(s.at(pos)), pos);
        }
    }

    #[test]
    fn disconnecting_matches_set_comparison(line in Just((1..=9usize).collect::<Vec<_>>()).prop_shuffle()) {
        let s = Permutation::from_one_line(line.clone()).unwrap();
        for k in 1..=line.len() {
            let mut prefix = line[..k].to_vec();
            prefix.sort_unstable();
            prop_assert_eq!(s.is_disconnecting(k), prefix == (1..=k).collect::<Vec<_>>());
        }
    }

    #[test]
    fn displacement_and_localization_agree(line in Just((1..=8usize).collect::<Vec<_>>()).prop_shuffle(), ell in 0usize..8) {
        let s = Permutation::from_one_line(line.clone()).unwrap();
        let d = line.iter().enumerate().map(|(i, &k)| (i + 1).abs_diff(k)).max().unwrap();
        prop_assert_eq!(s.max_displacement(), d);
        prop_assert_eq!(s.is_localized(&LocalizationVector::constant(8, ell)), d <= ell);
    }
}

#[test]
fn localized_enumeration_matches_filter() {
    for n in 1..=6 {
        for bound in 0..=3 {
            let ell = window(n, bound, (n * 10 + bound) as u64);
            let got: Vec<Vec<usize>> = localized_permutations(&ell).iter().map(|s| s.one_line().to_vec()).collect();
            let want: Vec<Vec<usize>> =
                oracle::permutations(n).into_iter().filter(|s| oracle::localized(s, &ell)).collect();
            assert_eq!(got, want, "n={n} bound={bound}");
        }
    }
}

#[test]
fn induced_window_example() {
    // n = 6, boundary positions {1, 6} holding particles 2 and 5, ℓ = 2
    let ell = LocalizationVector::constant(6, 2);
    let b = BoundaryAssignment::new(6, vec![2], vec![5]).unwrap();
    let s = Permutation::from_one_line(vec![2, 1, 3, 4, 6, 5]).unwrap();
    let r = b.restrict(&s, &ell).unwrap();
    assert!(r.ell.lmax() <= 2);
    let n = r.ell.n();
    for j in 1..=n {
        for k in j + 1..=n {
            assert!(j - r.ell.lo(j) <= k - r.ell.lo(k));
            assert!(j + r.ell.hi(j) <= k + r.ell.hi(k));
        }
    }
    assert_eq!(r.map, vec![1, 3, 4, 6]);
}
