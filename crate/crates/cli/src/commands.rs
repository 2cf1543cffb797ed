//! One function per subcommand. Each returns rendered bytes; nothing here
//! writes to the terminal.

use crate::config::{Command, ExperimentConfig, Format};
use crate::rows::{to_csv, ContractionRow, CouplingRow, FreezeRow, ScanRow};
use crate::{CliError, Output, Status};
use mixinglab::coloring::sample_uniform;
use mixinglab::coupling::{
    coalescence_experiment, default_grid, default_star_starts, mixing_time_upper_estimate, root_available_colors_tail,
    weighted_contraction_experiment, CoalescenceConfig, CoalescenceReport,
};
use mixinglab::dynamics::ChainState;
use mixinglab::freeze::{conductance_estimate_frozen_set, enumerate_critical, FreezeReport};
use mixinglab::params::epoch_length;
use mixinglab::scan::{scan_exponent, ScanConfig};
use mixinglab::seed::{derive_seed, replica_rng};
use mixinglab::spectral::{enumerate_chain, exact_report, frozen_root_conductance, DEFAULT_STATE_CAP};
use mixinglab::stats::{wilson, EstimateWithCI, DEFAULT_CONFIDENCE};
use mixinglab::{Coloring, Error};
use serde::Serialize;

/// Default per-replica step budget for coupling-time estimates.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

pub fn execute(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    match cfg.command {
        Command::Exact => exact(cfg),
        Command::Couple if cfg.mixing_estimate => mixing(cfg),
        Command::Couple => couple(cfg),
        Command::Freeze => freeze(cfg),
        Command::Conductance => conductance(cfg),
        Command::Contraction => contraction(cfg),
        Command::Scan => scan(cfg),
        Command::Sample => sample(cfg),
    }
}

/// Seed of the `--check` re-run.
pub fn check_seed(seed: u64) -> u64 {
    derive_seed(seed, "check", 1)
}

#[derive(Serialize)]
struct JsonEnvelope<'a, T: Serialize> {
    experiment: &'static str,
    b: usize,
    #[serde(rename = "H")]
    height: usize,
    k: usize,
    #[serde(rename = "C")]
    c: Option<f64>,
    replicas: usize,
    seed: u64,
    report: &'a T,
}

fn json<T: Serialize>(cfg: &ExperimentConfig, report: &T) -> Vec<u8> {
    let env = JsonEnvelope {
        experiment: cfg.command.name(),
        b: cfg.shape.b(),
        height: cfg.shape.height(),
        k: cfg.palette.k(),
        c: cfg.c,
        replicas: cfg.replicas,
        seed: cfg.seed,
        report,
    };
    let mut bytes = serde_json::to_vec_pretty(&env).expect("reports serialize to JSON");
    bytes.push(b'\n');
    bytes
}

fn require_overlap(what: &str, a: &EstimateWithCI, b: &EstimateWithCI) -> Result<(), CliError> {
    if a.overlaps(b) {
        Ok(())
    } else {
        Err(CliError::Invariant(format!(
            "--check: {what} intervals [{:.6}, {:.6}] and [{:.6}, {:.6}] do not overlap",
            a.low, a.high, b.low, b.high
        )))
    }
}

fn exact(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    if let Some(c) = cfg.boundary {
        cfg.palette.check_color(c as usize)?;
    }
    let report = exact_report(cfg.shape, cfg.palette, cfg.boundary, cfg.seed)?;
    let bytes = match cfg.format {
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(&report).expect("report serializes");
            v.push(b'\n');
            v
        }
        Format::Csv => to_csv(&[report]),
    };
    let mut out = Output::ok(bytes);
    if cfg.check {
        out.notes.push("--check: exact analysis is deterministic; nothing to compare".into());
    }
    Ok(out)
}

fn coalescence(cfg: &ExperimentConfig, seed: u64) -> Result<CoalescenceReport, CliError> {
    let starts = default_star_starts(cfg.shape, cfg.palette, seed)?;
    let ccfg = CoalescenceConfig {
        epoch_length: cfg.epoch_length.unwrap_or_else(|| epoch_length(cfg.shape.b())),
        max_epochs: cfg.epochs,
        replicas: cfg.replicas,
        seed,
        workers: cfg.workers,
    };
    Ok(coalescence_experiment(cfg.shape, cfg.palette, &starts, &ccfg)?)
}

fn couple(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let report = coalescence(cfg, cfg.seed)?;
    if cfg.check {
        let second = coalescence(cfg, check_seed(cfg.seed))?;
        for (p, q) in report.pairs.iter().zip(&second.pairs) {
            for (e, f) in p.epochs.iter().zip(&q.epochs) {
                require_overlap(&format!("{} epoch {} cumulative", p.label, e.epoch), &e.cumulative, &f.cumulative)?;
            }
        }
    }
    let bytes = match cfg.format {
        Format::Json => json(cfg, &report),
        Format::Csv => {
            let mut rows = Vec::new();
            for pair in &report.pairs {
                for e in &pair.epochs {
                    for (kind, ci, replicas, coalesced) in [
                        ("cumulative", &e.cumulative, pair.replicas, e.coalesced_total),
                        ("hazard", &e.hazard, e.at_risk, e.coalesced_in_epoch),
                    ] {
                        rows.push(CouplingRow {
                            experiment: format!("couple/{}/{kind}", pair.label),
                            b: report.b,
                            k: report.k,
                            c: cfg.c,
                            epoch: e.epoch as u64,
                            replicas,
                            coalesced,
                            rate: ci.estimate,
                            ci_low: ci.low,
                            ci_high: ci.high,
                            seed: cfg.seed,
                        });
                    }
                }
            }
            to_csv(&rows)
        }
    };
    let mut out = Output::ok(bytes);
    out.notes.push(format!(
        "epoch length {}, per-epoch bound for the realised eps {:.4}: {:.3e}",
        report.epoch_length, report.eps_below, report.bound
    ));
    Ok(out)
}

fn mixing(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let budget = cfg.steps.unwrap_or(DEFAULT_BUDGET);
    let run = |seed: u64| -> Result<_, CliError> {
        let grid = default_grid(cfg.shape, cfg.palette, seed)?;
        Ok(mixing_time_upper_estimate(&grid, cfg.replicas, budget, seed, cfg.workers)?)
    };
    let est = run(cfg.seed)?;
    if cfg.check {
        let second = run(check_seed(cfg.seed))?;
        require_overlap("worst non-coalescence", &est.worst, &second.worst)?;
    }
    let t = est.t.unwrap_or(budget);
    let bytes = match cfg.format {
        Format::Json => json(cfg, &est),
        Format::Csv => to_csv(&[CouplingRow {
            experiment: format!("mixing/{}", est.worst_label),
            b: cfg.shape.b(),
            k: cfg.palette.k(),
            c: cfg.c,
            epoch: t,
            replicas: est.replicas,
            coalesced: est.replicas - (est.worst.estimate * est.replicas as f64).round() as usize,
            rate: est.worst.estimate,
            ci_low: est.worst.low,
            ci_high: est.worst.high,
            seed: cfg.seed,
        }]),
    };
    let mut out = Output::ok(bytes);
    if est.t.is_none() {
        out.status = Status::BudgetExhausted;
        out.notes.push(format!("coupling threshold not reached within {budget} steps"));
    }
    Ok(out)
}

fn freeze_report(cfg: &ExperimentConfig, seed: u64) -> Result<FreezeReport, CliError> {
    Ok(conductance_estimate_frozen_set(cfg.shape, cfg.palette, cfg.replicas, seed, cfg.workers)?)
}

fn base_freeze_row(cfg: &ExperimentConfig, experiment: &str) -> FreezeRow {
    FreezeRow {
        experiment: experiment.to_string(),
        b: cfg.shape.b(),
        height_tree: cfg.shape.height(),
        k: cfg.palette.k(),
        c: cfg.c,
        seed: cfg.seed,
        replicas: cfg.replicas,
        ..FreezeRow::default()
    }
}

fn critical_rows(cfg: &ExperimentConfig, r: &FreezeReport, prefix: &str) -> Vec<FreezeRow> {
    vec![
        FreezeRow {
            critical_leaves_mean: Some(r.critical_mean.estimate),
            phi_estimate: Some(r.phi_sum.estimate),
            ci_low: Some(r.phi_sum.low),
            ci_high: Some(r.phi_sum.high),
            ..base_freeze_row(cfg, &format!("{prefix}/estimate"))
        },
        FreezeRow {
            critical_leaves_mean: Some(r.critical_exact),
            phi_estimate: Some(6.0 / cfg.shape.n() as f64 * r.critical_exact),
            ..base_freeze_row(cfg, &format!("{prefix}/path-product"))
        },
        FreezeRow {
            phi_estimate: r.phi_exact_normalization,
            ..base_freeze_row(cfg, &format!("{prefix}/exact-normalization"))
        },
    ]
}

fn check_freeze(cfg: &ExperimentConfig, r: &FreezeReport) -> Result<(), CliError> {
    let s = freeze_report(cfg, check_seed(cfg.seed))?;
    for (a, b) in r.heights.iter().zip(&s.heights) {
        let ca = wilson(a.frozen, a.vertices, DEFAULT_CONFIDENCE);
        let cb = wilson(b.frozen, b.vertices, DEFAULT_CONFIDENCE);
        require_overlap(&format!("height {} frozen fraction", a.height), &ca, &cb)?;
    }
    require_overlap("critical-leaf mean", &r.critical_mean, &s.critical_mean)
}

fn freeze(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let r = freeze_report(cfg, cfg.seed)?;
    if cfg.check {
        check_freeze(cfg, &r)?;
    }
    let bytes = match cfg.format {
        Format::Json => json(cfg, &r),
        Format::Csv => {
            let mut rows = Vec::new();
            for h in &r.heights {
                let ci = wilson(h.frozen, h.vertices, DEFAULT_CONFIDENCE);
                rows.push(FreezeRow {
                    height: Some(h.height),
                    frozen_prob: Some(h.frozen_prob),
                    not_frozen_bound: Some(h.not_frozen_bound),
                    ci_low: Some(ci.low),
                    ci_high: Some(ci.high),
                    ..base_freeze_row(cfg, "freeze/height")
                });
                rows.push(FreezeRow {
                    height: Some(h.height),
                    frozen_prob: Some(h.exact_frozen),
                    not_frozen_bound: Some(h.not_frozen_bound),
                    ..base_freeze_row(cfg, "freeze/height-exact")
                });
            }
            rows.extend(critical_rows(cfg, &r, "freeze/critical"));
            to_csv(&rows)
        }
    };
    Ok(Output::ok(bytes))
}

fn conductance(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let r = freeze_report(cfg, cfg.seed)?;
    if cfg.check {
        check_freeze(cfg, &r)?;
    }
    let mut rows = critical_rows(cfg, &r, "conductance");
    let mut status = Status::Ok;
    let mut compare = None;
    if cfg.exact_compare {
        let e = enumerate_critical(cfg.shape, cfg.palette, DEFAULT_STATE_CAP)?;
        let chain = enumerate_chain(cfg.shape, cfg.palette, None, DEFAULT_STATE_CAP)?;
        let phi = match frozen_root_conductance(&chain) {
            Ok(phi) => Some(phi),
            Err(Error::TrivialSubset) => None,
            Err(e) => return Err(e.into()),
        };
        rows.push(FreezeRow {
            critical_leaves_mean: Some(e.mean_critical),
            phi_estimate: Some(e.phi_sum),
            ..base_freeze_row(cfg, "conductance/enumerated")
        });
        rows.push(FreezeRow {
            phi_estimate: Some(e.phi_exact_normalization),
            ..base_freeze_row(cfg, "conductance/enumerated-exact-normalization")
        });
        rows.push(FreezeRow {
            phi_estimate: phi,
            ..base_freeze_row(cfg, "conductance/exact-phi")
        });
        let agrees = r.phi_sum.contains(e.phi_sum);
        rows.push(FreezeRow {
            phi_estimate: Some(e.phi_sum),
            ci_low: Some(r.phi_sum.low),
            ci_high: Some(r.phi_sum.high),
            ..base_freeze_row(cfg, if agrees { "conductance/agreement/pass" } else { "conductance/agreement/fail" })
        });
        if !agrees {
            status = Status::Invariant(format!(
                "enumerated (6/n) sum {} outside the estimate's interval [{}, {}]",
                e.phi_sum, r.phi_sum.low, r.phi_sum.high
            ));
        }
        compare = Some((e, phi));
    }
    let bytes = match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Conductance<'a> {
                estimate: &'a FreezeReport,
                enumerated: Option<&'a mixinglab::freeze::CriticalEnumeration>,
                exact_phi: Option<f64>,
            }
            json(
                cfg,
                &Conductance {
                    estimate: &r,
                    enumerated: compare.as_ref().map(|c| &c.0),
                    exact_phi: compare.as_ref().and_then(|c| c.1),
                },
            )
        }
        Format::Csv => to_csv(&rows),
    };
    Ok(Output {
        bytes,
        status,
        notes: Vec::new(),
    })
}

fn contraction(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let tail = root_available_colors_tail(cfg.shape, cfg.palette, cfg.replicas, cfg.seed, cfg.workers)?;
    let contraction = weighted_contraction_experiment(
        cfg.shape,
        cfg.palette,
        cfg.replicas,
        cfg.second,
        cfg.threshold,
        cfg.seed,
        cfg.workers,
    );
    let (b, k) = (cfg.shape.b(), cfg.palette.k());
    let row = |experiment: &str, threshold: f64, ci: &EstimateWithCI, reference: f64| ContractionRow {
        experiment: experiment.to_string(),
        b,
        k,
        c: cfg.c,
        eps: tail.eps_above,
        threshold,
        estimate: ci.estimate,
        ci_low: ci.low,
        ci_high: ci.high,
        reference,
        replicas: ci.replicas,
        seed: cfg.seed,
    };
    let mut rows = vec![
        row("contraction/avail-tail", tail.threshold, &tail.tail, tail.tail_lower_bound),
        row("contraction/avail-mean", tail.threshold, &tail.mean, tail.exact_mean),
        row("contraction/avail-mean-reference", tail.threshold, &tail.mean, tail.reference_mean),
    ];
    let mut status = Status::Ok;
    let mut notes = Vec::new();
    let report = match contraction {
        Ok(r) => {
            if cfg.check {
                let second = weighted_contraction_experiment(
                    cfg.shape,
                    cfg.palette,
                    cfg.replicas,
                    cfg.second,
                    cfg.threshold,
                    check_seed(cfg.seed),
                    cfg.workers,
                )?;
                require_overlap("mean ratio", &r.mean_ratio, &second.mean_ratio)?;
            }
            rows.push(row("contraction/mean-ratio", r.threshold, &r.mean_ratio, r.target));
            Some(r)
        }
        Err(e @ Error::EmptyConditioning(_)) => {
            notes.push(format!("contraction skipped: {e}"));
            status = Status::Invariant(e.to_string());
            None
        }
        Err(e) => return Err(e.into()),
    };
    let bytes = match cfg.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Contraction<'a> {
                avail: &'a mixinglab::coupling::AvailTailReport,
                contraction: Option<&'a mixinglab::coupling::ContractionReport>,
            }
            json(
                cfg,
                &Contraction {
                    avail: &tail,
                    contraction: report.as_ref(),
                },
            )
        }
        Format::Csv => to_csv(&rows),
    };
    Ok(Output { bytes, status, notes })
}

fn scan(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let c = cfg
        .c
        .ok_or_else(|| CliError::Config("scan needs C (or k with b >= 2)".into()))?;
    let scfg = ScanConfig {
        b: cfg.shape.b(),
        c,
        heights: cfg.heights.clone(),
        rounding: cfg.rounding,
        method: cfg.method,
        replicas: cfg.replicas,
        budget: cfg.steps.unwrap_or(DEFAULT_BUDGET),
        seed: cfg.seed,
        workers: cfg.workers,
    };
    let r = scan_exponent(&scfg)?;
    if cfg.check {
        let second = scan_exponent(&ScanConfig {
            seed: check_seed(cfg.seed),
            ..scfg.clone()
        })?;
        let ratio = (r.slope - second.slope).abs();
        if ratio > 0.25 * r.slope.abs().max(1.0) {
            return Err(CliError::Invariant(format!(
                "--check: slopes {} and {} disagree",
                r.slope, second.slope
            )));
        }
    }
    let exhausted = r.rows.iter().any(|row| !row.reached);
    let bytes = match cfg.format {
        Format::Json => json(cfg, &r),
        Format::Csv => {
            let rows: Vec<ScanRow> = r
                .rows
                .iter()
                .map(|row| ScanRow {
                    experiment: "scan".into(),
                    b: r.b,
                    height: row.height,
                    n: row.n,
                    k: r.k,
                    c: cfg.c,
                    method: r.method.name().into(),
                    estimate: row.estimate,
                    phi_sum: row.phi_sum,
                    reached: row.reached,
                    slope: r.slope,
                    target: r.target,
                    slack: r.slack,
                    replicas: r.replicas,
                    seed: r.seed,
                })
                .collect();
            to_csv(&rows)
        }
    };
    let mut out = Output::ok(bytes);
    if exhausted {
        out.status = Status::BudgetExhausted;
        out.notes.push("some coupling estimates hit the step budget".into());
    }
    Ok(out)
}

fn sample(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let start = match &cfg.load_state {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("load-state {}: {e}", path.display())))?;
            let c = Coloring::from_state_str(&text)?;
            if *c.shape() != cfg.shape || *c.palette() != cfg.palette {
                return Err(CliError::Config("load-state: b, H or k differ from the configuration".into()));
            }
            if !c.is_proper() {
                return Err(CliError::Config("load-state: coloring is not proper".into()));
            }
            c
        }
        None => sample_uniform(cfg.shape, cfg.palette, &mut replica_rng(cfg.seed, "sample-start", 0)),
    };
    let steps = cfg.steps.unwrap_or(0);
    let mut chain = ChainState::new(start, replica_rng(cfg.seed, "sample", 0))?;
    chain.run(steps);
    let state = chain.coloring().to_state_string();
    if let Some(path) = &cfg.dump_state {
        std::fs::write(path, &state).map_err(|e| CliError::Config(format!("dump-state {}: {e}", path.display())))?;
    }
    let bytes = match cfg.format {
        Format::Csv => state.into_bytes(),
        Format::Json => {
            #[derive(Serialize)]
            struct Sample {
                steps: u64,
                state: String,
                colors: Vec<u8>,
            }
            json(
                cfg,
                &Sample {
                    steps,
                    colors: chain.coloring().colors().to_vec(),
                    state,
                },
            )
        }
    };
    Ok(Output::ok(bytes))
}
