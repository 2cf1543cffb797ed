use mixinglab::coloring::sample_uniform;
use mixinglab::seed::replica_rng;
use mixinglab::spectral::enumerate_chain;
use mixinglab::stats::chi_square;
use mixinglab::{ChainState, Coloring, Palette, TreeShape};
use proptest::prelude::*;

#[test]
fn one_step_law_matches_matrix_row() {
    let shape = TreeShape::star(2).unwrap();
    let p = Palette::new(4).unwrap();
    let a = enumerate_chain(shape, p, None, 1000).unwrap();
    let start = 5;
    let from = a.states()[start].clone();
    let mut counts = vec![0usize; a.omega_size()];
    let index: std::collections::HashMap<Vec<u8>, usize> =
        a.states().iter().enumerate().map(|(i, s)| (s.colors().to_vec(), i)).collect();
    for i in 0..50_000 {
        let mut chain = ChainState::new(from.clone(), replica_rng(3, "row", i)).unwrap();
        chain.step();
        counts[index[chain.coloring().colors()]] += 1;
    }
    let expected: Vec<f64> = a.matrix().row(start).iter().copied().collect();
    let (_, pval) = chi_square(&counts, &expected);
    assert!(pval > 1e-3, "p = {pval}");
}

#[test]
fn long_run_visits_states_uniformly() {
    let shape = TreeShape::new(1, 2).unwrap();
    let p = Palette::new(3).unwrap();
    let a = enumerate_chain(shape, p, None, 1000).unwrap();
    let index: std::collections::HashMap<Vec<u8>, usize> =
        a.states().iter().enumerate().map(|(i, s)| (s.colors().to_vec(), i)).collect();
    let mut counts = vec![0usize; a.omega_size()];
    for i in 0..20_000 {
        let start = Coloring::alternating(shape, p, 1, 2).unwrap();
        let mut chain = ChainState::new(start, replica_rng(4, "uniform", i)).unwrap();
        chain.run(200);
        counts[index[chain.coloring().colors()]] += 1;
    }
    let expected = vec![1.0 / a.omega_size() as f64; a.omega_size()];
    let (_, pval) = chi_square(&counts, &expected);
    assert!(pval > 1e-3, "p = {pval}");
}

proptest! {
    #[test]
    fn steps_preserve_properness(b in 1usize..6, h in 0usize..4, k in 3usize..8, seed in any::<u64>(), steps in 0u64..500) {
        let shape = TreeShape::new(b, h).unwrap();
        let p = Palette::new(k).unwrap();
        let start = sample_uniform(shape, p, &mut replica_rng(seed, "start", 0));
        let mut chain = ChainState::new(start, replica_rng(seed, "chain", 0)).unwrap();
        chain.run(steps);
        prop_assert!(chain.coloring().is_proper());
        prop_assert_eq!(chain.step_count(), steps);
    }

    #[test]
    fn state_string_round_trip(b in 1usize..5, h in 0usize..4, k in 3usize..12, seed in any::<u64>()) {
        let shape = TreeShape::new(b, h).unwrap();
        let c = sample_uniform(shape, Palette::new(k).unwrap(), &mut replica_rng(seed, "serial", 0));
        prop_assert_eq!(Coloring::from_state_str(&c.to_state_string()).unwrap(), c);
    }

    #[test]
    fn same_seed_same_trajectory(seed in any::<u64>()) {
        let shape = TreeShape::new(3, 2).unwrap();
        let p = Palette::new(5).unwrap();
        let start = sample_uniform(shape, p, &mut replica_rng(seed, "start", 0));
        let mut a = ChainState::new(start.clone(), replica_rng(seed, "chain", 0)).unwrap();
        let mut b = ChainState::new(start, replica_rng(seed, "chain", 0)).unwrap();
        a.run(100);
        b.run(100);
        prop_assert_eq!(a.coloring(), b.coloring());
    }
}
