//! Acceptance suite: one line per criterion. A failure exits nonzero unless
//! it is listed in `KNOWN_FAILURES`; `MIXINGLAB_ACCEPTANCE_STRICT=1` makes
//! every failure fatal.

use mixinglab::coupling::{
    coalescence_experiment, default_grid, default_star_starts, mixing_time_upper_estimate, root_available_colors_tail,
    weighted_contraction_experiment, CoalescenceConfig, CouplingTable, SecondStart,
};
use mixinglab::coloring::enumerate_colorings;
use mixinglab::freeze::{
    compute_freeze_mask, conductance_estimate_frozen_set, enumerate_critical, root_frozen_after_recolor, unfreeze_event,
    DefinitionalOracle,
};
use mixinglab::params::{epoch_coalescence_bound, epoch_length, k_from_c};
use mixinglab::scan::{scan_exponent, ScanConfig, ScanMethod};
use mixinglab::seed::replica_rng;
use mixinglab::spectral::sobolev::{complete_graph_alpha, log_sobolev_numeric, SparseChain};
use mixinglab::spectral::{
    enumerate_chain, exact_mixing_time, frozen_root_conductance, gap_monotonicity_check, log_sobolev, relaxation_time,
    small_instances, GapHypothesis, DEFAULT_STATE_CAP,
};
use mixinglab::{Coloring, Error, KRounding, Palette, TreeShape};
use std::path::PathBuf;
use std::time::Instant;

/// Criteria expected to fail at the prescribed parameters.
const KNOWN_FAILURES: &[u32] = &[7];

/// Constant in `T_relax >= c / Phi_S`.
const CONDUCTANCE_CONSTANT: f64 = 1.0;

const SEED: u64 = 20240601;

fn workers() -> usize {
    std::env::var("MIXINGLAB_WORKERS").ok().and_then(|w| w.parse().ok()).unwrap_or(1)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn shape(b: usize, h: usize) -> TreeShape {
    TreeShape::new(b, h).unwrap()
}

fn palette(k: usize) -> Palette {
    Palette::new(k).unwrap()
}

fn criterion_1() -> Outcome {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for (s, p) in small_instances() {
        let a = enumerate_chain(s, p, None, 500).unwrap();
        let inv = a.invariants();
        worst.0 = worst.0.max(inv.max_row_error);
        worst.1 = worst.1.max(inv.max_asymmetry);
        worst.2 = worst.2.max(inv.stationarity_error);
        let t_relax = relaxation_time(&a);
        let t_mix = exact_mixing_time(&a).unwrap() as f64;
        if t_relax > t_mix + 1.0 {
            return outcome(false, format!("b={} H={} k={}: T_relax {t_relax} > T_mix + 1 = {}", s.b(), s.height(), p.k(), t_mix + 1.0));
        }
    }
    let pass = worst.0 <= 1e-12 && worst.1 <= 1e-12 && worst.2 <= 1e-10;
    outcome(
        pass,
        format!("row error {:.1e}, asymmetry {:.1e}, stationarity {:.1e}", worst.0, worst.1, worst.2),
    )
}

fn criterion_2() -> Outcome {
    let mut checked = 0usize;
    for (s, p) in small_instances() {
        let states = enumerate_colorings(s, p, None, 500).unwrap();
        let oracle = DefinitionalOracle::new(&states);
        for c in &states {
            let mask = compute_freeze_mask(c);
            for v in 0..s.n() {
                if mask.is_frozen(v) != oracle.is_frozen(c, v) {
                    return outcome(false, format!("mask disagrees at vertex {v} of {}", c.to_state_string()));
                }
                checked += 1;
            }
        }
    }
    let s = shape(2, 2);
    let p = palette(3);
    let states = enumerate_colorings(s, p, None, 500).unwrap();
    let oracle = DefinitionalOracle::new(&states);
    let mut triples = 0usize;
    for c in &states {
        let mask = compute_freeze_mask(c);
        for z in s.leaves() {
            let parent = c.get(s.parent_unchecked(z).unwrap());
            let mut unfreezes = false;
            for col in (1..=3u8).filter(|&col| col != parent) {
                let mut t = c.colors().to_vec();
                t[z] = col;
                let t = Coloring::proper(s, p, t).unwrap();
                let still = oracle.root_frozen(&t);
                if root_frozen_after_recolor(c, &mask, z, col) != still {
                    return outcome(false, format!("recolor of leaf {z} to {col} in {}", c.to_state_string()));
                }
                unfreezes |= !still;
                triples += 1;
            }
            if unfreeze_event(c, &mask, z).unwrap() != (oracle.root_frozen(c) && unfreezes) {
                return outcome(false, format!("event at leaf {z} of {}", c.to_state_string()));
            }
        }
    }
    outcome(true, format!("{checked} vertex checks, {triples} recolorings of the 192-state instance"))
}

fn criterion_3() -> Outcome {
    let replicas = 100_000;
    let mut worst_z = 0.0f64;
    let mut worst_bound = f64::NEG_INFINITY;
    for b in [2usize, 4, 8] {
        let r = conductance_estimate_frozen_set(shape(b, 3), palette(3), replicas, SEED, workers()).unwrap();
        for h in &r.heights {
            let observed = 1.0 - h.frozen_prob;
            let exact = 1.0 - h.exact_frozen;
            let se = h.not_frozen_se;
            let diff = (observed - exact).abs();
            if se == 0.0 {
                if diff > 1e-12 {
                    return outcome(false, format!("b={b} height {}: deterministic mismatch", h.height));
                }
                continue;
            }
            worst_z = worst_z.max(diff / se);
            worst_bound = worst_bound.max((observed - h.not_frozen_bound) / se);
        }
    }
    outcome(
        worst_z <= 3.0 && worst_bound <= 3.0,
        format!("max |MC - exact| = {worst_z:.2} SE; max excess over bound = {worst_bound:.2} SE"),
    )
}

fn criterion_4() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for b in [2usize, 3] {
        let (s, p) = (shape(b, 1), palette(3));
        let r = conductance_estimate_frozen_set(s, p, 100_000, SEED, workers()).unwrap();
        let e = enumerate_critical(s, p, DEFAULT_STATE_CAP).unwrap();
        let inside = r.phi_sum.contains(e.phi_sum);
        let a = enumerate_chain(s, p, None, DEFAULT_STATE_CAP).unwrap();
        let phi = frozen_root_conductance(&a).unwrap();
        let t_relax = relaxation_time(&a);
        let cheeger = t_relax >= CONDUCTANCE_CONSTANT / phi;
        pass &= inside && cheeger;
        details.push(format!(
            "b={b}: enumerated {:.4} in [{:.4}, {:.4}] {}, T_relax {:.2} vs 1/Phi_S {:.2}",
            e.phi_sum,
            r.phi_sum.low,
            r.phi_sum.high,
            if inside { "yes" } else { "no" },
            t_relax,
            1.0 / phi
        ));
    }
    outcome(pass, details.join("; "))
}

fn criterion_5() -> Outcome {
    let mut tables = 0usize;
    for b in 1..=3usize {
        for k in 3..=4usize {
            let (s, p) = (shape(b, 1), palette(k));
            let states = enumerate_colorings(s, p, None, 10_000).unwrap();
            for x in &states {
                for y in &states {
                    for v in 0..s.n() {
                        let ax = x.available_unchecked(v, None);
                        let ay = y.available_unchecked(v, None);
                        let t = CouplingTable::new(&ax, &ay);
                        for c in 1..=k as u8 {
                            let mx: u64 = t.entries.iter().filter(|e| e.0 == c).map(|e| e.2).sum();
                            let my: u64 = t.entries.iter().filter(|e| e.1 == c).map(|e| e.2).sum();
                            let want_x = if ax.contains(c) { t.denominator / ax.len() as u64 } else { 0 };
                            let want_y = if ay.contains(c) { t.denominator / ay.len() as u64 } else { 0 };
                            if mx != want_x || my != want_y {
                                return outcome(false, format!("marginal of color {c} at b={b} k={k}"));
                            }
                        }
                        let agree = ax.intersection(&ay).len() as u64 * t.denominator;
                        if t.agreement_weight() * ax.len().max(ay.len()) as u64 != agree {
                            return outcome(false, format!("agreement at b={b} k={k}"));
                        }
                        tables += 1;
                    }
                }
            }
        }
    }
    let (s, p) = (shape(2, 1), palette(3));
    let t_mix = exact_mixing_time(&enumerate_chain(s, p, None, DEFAULT_STATE_CAP).unwrap()).unwrap() as f64;
    let grid = default_grid(s, p, SEED).unwrap();
    let est = mixing_time_upper_estimate(&grid, 10_000, 1_000_000, SEED, workers()).unwrap();
    let Some(t) = est.t else {
        return outcome(false, "coupling estimate hit its budget");
    };
    let ratio = t as f64 / t_mix;
    outcome(
        (0.25..=4.0).contains(&ratio),
        format!("{tables} tables exact; coupling estimate {t} vs T_mix {t_mix} (ratio {ratio:.2})"),
    )
}

fn criterion_6() -> Outcome {
    let b = 64;
    let s = shape(b, 1);
    let mut pass = true;
    let mut details = Vec::new();
    for (c, epochs) in [(0.5, 2), (1.0, 5), (2.0, 5)] {
        let k = k_from_c(c, b, KRounding::Ceil).unwrap();
        let p = palette(k);
        let eps = 1.0 / c - 1.0;
        let bound = epoch_coalescence_bound(b, eps);
        let starts = default_star_starts(s, p, SEED).unwrap();
        let cfg = CoalescenceConfig {
            epoch_length: epoch_length(b),
            max_epochs: epochs,
            replicas: 20_000,
            seed: SEED,
            workers: workers(),
        };
        let r = coalescence_experiment(s, p, &starts, &cfg).unwrap();
        let mut lowest = f64::INFINITY;
        for pair in &r.pairs {
            for row in pair.epochs.iter().filter(|e| e.epoch >= 1 && e.at_risk > 0) {
                lowest = lowest.min(row.hazard.high);
                pass &= row.hazard.high >= bound;
            }
        }
        details.push(format!("C={c} k={k}: min upper CI {lowest:.2e} vs bound {bound:.2e}"));
    }
    outcome(pass, details.join("; "))
}

fn criterion_7() -> Outcome {
    let b = 256;
    let s = shape(b, 1);
    let k = k_from_c(2.0, b, KRounding::Ceil).unwrap();
    let p = palette(k);
    let tail = root_available_colors_tail(s, p, 100_000, SEED, workers()).unwrap();
    let tail_ok = tail.tail.high >= tail.tail_lower_bound;
    let tail_text = format!(
        "P(|A(r)| > {:.1}) = {:.4} (upper CI {:.4}) vs bound {:.4}; E|A(r)| = {:.2} (exact {:.2})",
        tail.threshold, tail.tail.estimate, tail.tail.high, tail.tail_lower_bound, tail.mean.estimate, tail.exact_mean
    );
    match weighted_contraction_experiment(s, p, 100_000, SecondStart::Independent, None, SEED, workers()) {
        Ok(r) => outcome(
            tail_ok && r.mean_ratio.high <= r.target,
            format!("ratio upper CI {:.6} vs {:.6}; {tail_text}", r.mean_ratio.high, r.target),
        ),
        Err(Error::EmptyConditioning(why)) => outcome(false, format!("k={k}: {why}; {tail_text}")),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn criterion_8() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for k in [5usize, 6, 8] {
        let mut rng = replica_rng(SEED, "complete-graph", k as u64);
        let r = log_sobolev_numeric(&SparseChain::complete_graph(k - 1), 1.0, 1e-6, 32, &mut rng);
        let alpha = complete_graph_alpha(k);
        let rel = (1.0 / r.c_sob - alpha).abs() / alpha;
        pass &= rel <= 0.01;
        details.push(format!("k={k} rel err {rel:.1e}"));
    }
    let mut instances = 0;
    for (s, p) in small_instances().into_iter().filter(|(s, _)| s.n() >= 3) {
        let a = enumerate_chain(s, p, None, 500).unwrap();
        let ls = log_sobolev(&a, 1e-3, SEED).unwrap();
        let t_relax = relaxation_time(&a);
        if 1.0 / ls.c_sob > 2.0 * t_relax * (s.n() as f64).ln() {
            pass = false;
            details.push(format!("LS inequality fails at b={} H={} k={}", s.b(), s.height(), p.k()));
        }
        instances += 1;
    }
    details.push(format!("LS inequality on {instances} trees"));
    for k in [3usize, 4] {
        let r = gap_monotonicity_check(2, k, &[1, 2], 1, GapHypothesis::Strict).unwrap();
        pass &= r.skipped.is_none() && r.holds;
        details.push(format!("gap monotonicity k={k}: {}", if r.holds { "holds" } else { "fails" }));
    }
    outcome(pass, details.join("; "))
}

fn criterion_9() -> Outcome {
    let run = |c: f64, method: ScanMethod, replicas: usize| {
        scan_exponent(&ScanConfig {
            b: 16,
            c,
            heights: vec![1, 2, 3],
            rounding: KRounding::Nearest,
            method: Some(method),
            replicas,
            budget: 100_000_000,
            seed: SEED,
            workers: workers(),
        })
        .unwrap()
    };
    let below = run(0.5, ScanMethod::ConductanceLower, 1);
    let above = run(2.0, ScanMethod::CouplingUpper, 100);
    let reached = above.rows.iter().all(|r| r.reached);
    let diff = below.slope - above.slope;
    outcome(
        reached && diff >= 0.5,
        format!("slope C=1/2 {:.3}, C=2 {:.3}, difference {diff:.3}", below.slope, above.slope),
    )
}

fn criterion_10() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    for path in &paths {
        let mut seen: Option<Vec<u8>> = None;
        for w in ["1", "4", "8", "1"] {
            let mut out = Vec::new();
            let mut err = Vec::new();
            mixinglab_cli::run(
                ["mixinglab", "--config", path.to_str().unwrap(), "--workers", w],
                &mut out,
                &mut err,
            );
            match &seen {
                None => seen = Some(out),
                Some(first) if *first != out => {
                    return outcome(false, format!("{} differs at {w} workers", path.display()));
                }
                Some(_) => {}
            }
        }
    }
    outcome(!paths.is_empty(), format!("{} configs identical at 1, 4, 8 workers", paths.len()))
}

fn main() {
    // `cargo test -- --list` and friends
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let strict = std::env::var("MIXINGLAB_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut fatal = Vec::new();
    for (id, f) in criteria {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {id}: {tag} [{secs:.1}s] {}", o.detail);
        if !o.pass && (strict || !known) {
            fatal.push(id);
        }
        if o.pass && known {
            println!("criterion {id}: listed as a known failure but passed");
        }
    }
    if !fatal.is_empty() {
        println!("acceptance: failing criteria {fatal:?}");
        std::process::exit(1);
    }
}
