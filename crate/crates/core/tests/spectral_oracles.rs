use mixinglab::dynamics::projected_tv_lower_bound;
use mixinglab::spectral::sobolev::{complete_graph_alpha, log_sobolev_numeric, SparseChain};
use mixinglab::spectral::*;
use mixinglab::seed::replica_rng;
use mixinglab::{Coloring, Palette, TreeShape};

fn chain(b: usize, h: usize, k: usize) -> ChainAnalysis {
    enumerate_chain(TreeShape::new(b, h).unwrap(), Palette::new(k).unwrap(), None, DEFAULT_STATE_CAP).unwrap()
}

#[test]
fn invariants_hold_on_small_instances() {
    for (shape, palette) in small_instances() {
        let a = enumerate_chain(shape, palette, None, 500).unwrap();
        let inv = a.invariants();
        assert!(inv.holds(), "{shape:?} k={}: {inv:?}", palette.k());
        let t_mix = exact_mixing_time(&a).unwrap();
        assert!(relaxation_time(&a) <= t_mix as f64 + 1.0);
        assert!(a.spectrum().lambda_min > -1e-12, "heat-bath kernels are positive semidefinite");
    }
}

#[test]
fn two_eigensolvers_agree() {
    for &(b, h, k) in &[(2, 1, 3), (2, 1, 4), (3, 1, 3), (1, 4, 3)] {
        let a = chain(b, h, k);
        assert!((a.gap() - a.jacobi_gap()).abs() < 1e-9);
    }
    let first = chain(2, 1, 3).gap();
    assert_eq!(first.to_bits(), chain(2, 1, 3).gap().to_bits());
}

#[test]
fn counts_and_trivial_cases() {
    assert_eq!(chain(2, 1, 3).omega_size(), 12);
    assert_eq!(chain(2, 2, 3).omega_size(), 192);
    let one = chain(1, 0, 3);
    assert!((relaxation_time(&one) - 1.0).abs() < 1e-12);
}

#[test]
fn relaxation_grows_with_n() {
    // Paths with n = 3, 4 and the binary tree with n = 7.
    let mut last = 0.0;
    for (b, h) in [(1, 2), (1, 3), (2, 2)] {
        let a = chain(b, h, 3);
        let n = a.shape().n() as f64;
        let t = relaxation_time(&a);
        assert!(t >= n, "T_relax {t} < n {n}");
        assert!(t > last);
        last = t;
    }
}

#[test]
fn mixing_time_is_order_invariant() {
    let a = chain(2, 1, 4);
    let m = a.omega_size();
    // Reverse the state order and relabel the sparse rows.
    let rows: Vec<Vec<(usize, f64)>> = (0..m)
        .rev()
        .map(|i| a.sparse().rows[i].iter().map(|&(j, p)| (m - 1 - j, p)).collect())
        .collect();
    let reversed = worst_tv_profile(&SparseChain { rows }, 10_000).unwrap();
    assert_eq!(reversed.len() - 1, exact_mixing_time(&a).unwrap());
}

#[test]
fn mixing_time_agrees_with_simulated_tv_decay() {
    let a = chain(2, 1, 3);
    let t_mix = exact_mixing_time(&a).unwrap();
    let profile = worst_tv_profile(a.sparse(), 10_000).unwrap();
    let start = Coloring::alternating(*a.shape(), *a.palette(), 1, 2).unwrap();
    // The projected root TV from this start is a lower bound on the worst TV.
    for t in [2usize, t_mix / 2, t_mix] {
        let est = projected_tv_lower_bound(&start, t as u64, 20_000, 9, 1).unwrap();
        assert!(est.low <= profile[t] + 1e-12, "t={t}: {est:?} vs {}", profile[t]);
    }
    let late = projected_tv_lower_bound(&start, 10 * t_mix as u64, 20_000, 9, 1).unwrap();
    assert!(late.contains(0.0) || late.estimate < 0.02);
}

#[test]
fn conductance_examples_and_bound() {
    let one = chain(1, 0, 3);
    assert!((exact_conductance(&one, |c| c.get(0) == 1).unwrap() - 1.0).abs() < 1e-12);
    assert!(exact_conductance(&one, |_| true).is_err());
    for &(b, h, k) in &[(2, 1, 3), (3, 1, 3), (2, 2, 3), (3, 1, 4)] {
        let a = chain(b, h, k);
        let phi = frozen_root_conductance(&a).unwrap();
        let (min_phi, _) = min_frozen_union_conductance(&a).unwrap();
        assert!(min_phi <= phi + 1e-15);
        // Variational bound gap <= Φ_S, i.e. T_relax >= 1/Φ_S.
        assert!(relaxation_time(&a) >= 1.0 / min_phi);
    }
}

#[test]
fn estimator_normalizations_bound_exact_conductance() {
    use mixinglab::freeze::enumerate_critical;
    for &(b, k) in &[(2, 3), (3, 3), (3, 4)] {
        let shape = TreeShape::star(b).unwrap();
        let palette = Palette::new(k).unwrap();
        let e = enumerate_critical(shape, palette, 1000).unwrap();
        let phi = frozen_root_conductance(&enumerate_chain(shape, palette, None, 1000).unwrap()).unwrap();
        assert!(phi <= e.phi_exact_normalization + 1e-12);
    }
}

#[test]
fn complete_graph_alpha_matches_optimizer() {
    for k in [4usize, 5, 6, 8, 10] {
        let mut rng = replica_rng(2, "alpha", k as u64);
        let r = log_sobolev_numeric(&SparseChain::complete_graph(k - 1), 1.0, 1e-6, 32, &mut rng);
        let alpha = complete_graph_alpha(k);
        assert!((1.0 / r.c_sob - alpha).abs() / alpha < 1e-6, "k={k}: {} vs {alpha}", 1.0 / r.c_sob);
    }
    assert!((complete_graph_alpha(5) - 2.0 * 3f64.ln()).abs() < 1e-12);
}

#[test]
fn log_sobolev_relations_on_trees() {
    for (shape, palette) in small_instances().into_iter().filter(|(s, _)| s.n() >= 3) {
        let a = enumerate_chain(shape, palette, None, 500).unwrap();
        let ls = log_sobolev(&a, 1e-3, 1).unwrap();
        let t_relax = relaxation_time(&a);
        assert!(ls.c_sob <= a.gap() / 2.0 + 1e-12);
        assert!(1.0 / ls.c_sob >= t_relax);
        assert!(1.0 / ls.c_sob <= 2.0 * t_relax * (shape.n() as f64).ln());
    }
}

#[test]
fn gap_monotonicity_small_cases() {
    for k in [3usize, 4] {
        let r = gap_monotonicity_check(2, k, &[1, 2], 1, GapHypothesis::Strict).unwrap();
        assert!(r.skipped.is_none() && r.holds, "{r:?}");
    }
    let skipped = gap_monotonicity_check(2, 5, &[1], 1, GapHypothesis::Strict).unwrap();
    assert!(skipped.skipped.is_some());
    let weakened = gap_monotonicity_check(2, 4, &[1], 1, GapHypothesis::Weakened).unwrap();
    assert!(weakened.skipped.is_some(), "4 > ζ·2");
}

#[test]
fn decomposition_bound_dominates() {
    let p = Palette::new(3).unwrap();
    let star = chain(2, 1, 3);
    let tau = relaxation_time(&star);
    assert!(decomposition_upper_bound(2, 1, tau).unwrap() >= tau);
    let tree = chain(2, 2, 3);
    assert!(decomposition_upper_bound(2, 2, tau).unwrap() >= relaxation_time(&tree));
    let report = exact_report(TreeShape::new(2, 2).unwrap(), p, None, 1).unwrap();
    assert_eq!(report.omega_size, 192);
    assert!(report.decomposition_bound.unwrap() >= report.t_relax);
}
