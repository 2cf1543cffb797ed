//! Numerical log-Sobolev constant `inf D(sqrt f)/Ent(f)` of a reversible
//! chain with uniform stationary law.
//!
//! The search runs over `g = exp(u)` (so `f = g^2 > 0`) with gradient
//! descent, Barzilai-Borwein steps and Armijo backtracking, from random and
//! single-spike starts. Near-constant functions give ratios tending to
//! `gap/2`, which is always a valid candidate and is folded into the result.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// Sparse symmetric transition matrix with the uniform stationary law.
#[derive(Debug, Clone)]
pub struct SparseChain {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseChain {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, p)| p * x[j]).sum();
        }
    }

    /// One-step-to-stationarity chain on `m` states.
    pub fn complete_graph(m: usize) -> Self {
        let p = 1.0 / m as f64;
        Self {
            rows: (0..m).map(|_| (0..m).map(|j| (j, p)).collect()).collect(),
        }
    }
}

/// Dirichlet form `(1/2) Σ π(x) P(x,y) (g(x) - g(y))^2`.
pub fn dirichlet(chain: &SparseChain, g: &[f64]) -> f64 {
    let n = g.len() as f64;
    let total: f64 = chain
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().map(|&(j, p)| p * (g[i] - g[j]).powi(2)).sum::<f64>())
        .sum();
    0.5 * total / n
}

// x ln x - x + 1, nonnegative and accurate near x = 1.
fn relative_entropy_term(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        (x * (x - 1.0).ln_1p() - (x - 1.0)).max(0.0)
    }
}

/// `E[f ln f] - E[f] ln E[f]` with `0 ln 0 = 0`, summed as the nonnegative
/// terms `E[f] h(f/E[f])`, `h(x) = x ln x - x + 1`.
pub fn entropy(f: &[f64]) -> f64 {
    let n = f.len() as f64;
    let mean = f.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return 0.0;
    }
    mean * f.iter().map(|&x| relative_entropy_term(x / mean)).sum::<f64>() / n
}

/// `D(sqrt f)/Ent(f)` for a nonnegative, nonconstant `f`.
pub fn sobolev_ratio(chain: &SparseChain, f: &[f64]) -> f64 {
    let g: Vec<f64> = f.iter().map(|x| x.sqrt()).collect();
    dirichlet(chain, &g) / entropy(f)
}

#[derive(Debug, Clone, Serialize)]
pub struct LogSobolevResult {
    pub c_sob: f64,
    /// Best ratio found by the optimizer alone.
    pub optimizer_best: f64,
    /// `gap/2`, the limit of near-constant functions.
    pub limit_candidate: f64,
    /// The optimizer's best `f`, normalized to mean 1.
    pub best_f: Vec<f64>,
    pub restarts: usize,
    /// Relative spread of the best few restarts around the optimum.
    pub restart_spread: f64,
    pub converged: bool,
}

// Value and gradient of R(u) = D(e^u)/Ent(e^{2u}) with respect to u.
fn value_and_grad(chain: &SparseChain, u: &[f64], grad: &mut [f64]) -> f64 {
    let n = u.len() as f64;
    let shift = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let g: Vec<f64> = u.iter().map(|x| (x - shift).exp()).collect();
    let d = dirichlet(chain, &g);
    let f: Vec<f64> = g.iter().map(|x| x * x).collect();
    let ent = entropy(&f);
    // Too close to constant for the ratio to be resolved in floating point.
    if !(ent > 1e-8 * f.iter().sum::<f64>() / n) {
        grad.iter_mut().for_each(|x| *x = 0.0);
        return f64::INFINITY;
    }
    let log_mean = (f.iter().sum::<f64>() / n).ln();
    for (i, row) in chain.rows.iter().enumerate() {
        let dd = 2.0 / n * row.iter().map(|&(j, p)| p * (g[i] - g[j])).sum::<f64>();
        let de = if f[i] > 0.0 { 2.0 / n * g[i] * (f[i].ln() - log_mean) } else { 0.0 };
        grad[i] = g[i] * (dd * ent - d * de) / (ent * ent);
    }
    d / ent
}

fn descend(chain: &SparseChain, mut u: Vec<f64>, max_iter: usize, tol: f64) -> (f64, Vec<f64>) {
    let n = u.len();
    let mut grad = vec![0.0; n];
    let mut value = value_and_grad(chain, &u, &mut grad);
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for _ in 0..max_iter {
        let gnorm2: f64 = grad.iter().map(|x| x * x).sum();
        if gnorm2.sqrt() < tol * value.abs().max(1e-300) {
            break;
        }
        if let Some((pu, pgrad)) = &prev {
            let s: Vec<f64> = u.iter().zip(pu).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = grad.iter().zip(pgrad).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            let ss: f64 = s.iter().map(|x| x * x).sum();
            if sy > 0.0 {
                step = (ss / sy).clamp(1e-8, 1e8);
            }
        }
        // Armijo backtracking.
        let mut trial_grad = vec![0.0; n];
        let mut accepted = None;
        let mut t = step;
        for _ in 0..60 {
            let trial: Vec<f64> = u.iter().zip(&grad).map(|(a, g)| a - t * g).collect();
            let v = value_and_grad(chain, &trial, &mut trial_grad);
            if v <= value - 1e-4 * t * gnorm2 {
                accepted = Some((trial, v));
                break;
            }
            t *= 0.5;
        }
        let Some((next, v)) = accepted else { break };
        let improvement = value - v;
        prev = Some((std::mem::replace(&mut u, next), std::mem::replace(&mut grad, trial_grad.clone())));
        value = v;
        step = t;
        if improvement < 1e-15 * value.abs() {
            break;
        }
    }
    (value, u)
}

/// Minimizes the log-Sobolev ratio. `gap` supplies the `gap/2` limit
/// candidate; `restarts` is raised to at least 32.
pub fn log_sobolev_numeric<R: Rng + ?Sized>(
    chain: &SparseChain,
    gap: f64,
    tolerance: f64,
    restarts: usize,
    rng: &mut R,
) -> LogSobolevResult {
    let n = chain.len();
    let restarts = restarts.max(32);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(restarts);
    // Spike starts: one state raised by several heights.
    let spikes = [0.5, 1.5, 3.0, 6.0];
    'outer: for i in 0..n {
        for &h in &spikes {
            if starts.len() >= restarts / 2 {
                break 'outer;
            }
            let mut u = vec![0.0; n];
            u[i] = h;
            starts.push(u);
        }
    }
    while starts.len() < restarts {
        let scale = [0.3, 1.0, 2.0][starts.len() % 3];
        starts.push((0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect());
    }
    let mut results: Vec<(f64, Vec<f64>)> = starts
        .into_iter()
        .map(|u| descend(chain, u, 4000, 1e-10))
        .filter(|r| r.0.is_finite())
        .collect();
    results.sort_by(|a, b| a.0.total_cmp(&b.0));
    let limit_candidate = gap / 2.0;
    let (optimizer_best, best_u) = results
        .first()
        .cloned()
        .unwrap_or((f64::INFINITY, vec![0.0; n]));
    let top = results.iter().take(3).map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let restart_spread = if optimizer_best.is_finite() {
        (top - optimizer_best) / optimizer_best
    } else {
        f64::INFINITY
    };
    let c_sob = optimizer_best.min(limit_candidate);
    // Either the limit wins, or the best restarts agree.
    let converged = limit_candidate <= optimizer_best || restart_spread <= tolerance;
    let shift = best_u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut best_f: Vec<f64> = best_u.iter().map(|x| (2.0 * (x - shift)).exp()).collect();
    let mean = best_f.iter().sum::<f64>() / n as f64;
    best_f.iter_mut().for_each(|x| *x /= mean);
    LogSobolevResult {
        c_sob,
        optimizer_best,
        limit_candidate,
        best_f,
        restarts: results.len(),
        restart_spread,
        converged,
    }
}

/// `ln(m-1)/(1-2/m)`, the inverse log-Sobolev constant of the
/// one-step-to-stationarity chain on `m = k - 1` states; 2 at `m = 2`.
pub fn complete_graph_alpha(k: usize) -> f64 {
    let m = (k - 1) as f64;
    if k <= 3 {
        2.0
    } else {
        (m - 1.0).ln() / (1.0 - 2.0 / m)
    }
}
