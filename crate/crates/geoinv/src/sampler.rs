//! Adaptive random-walk sampling of a log density over R^dim, in two forms:
//! a single-chain Metropolis algorithm and a multi-proposal variant that
//! evaluates a whole batch of candidates concurrently each step and mixes
//! them through a stochastic transition matrix.
//!
//! Proposals blend an adapted covariance with one derived from prior draws,
//! with the blend weight decaying over the run. All randomness comes from
//! counter-keyed substreams of a master seed, so results are bit-reproducible
//! regardless of thread scheduling.

use crate::error::{Error, Result};
use crate::linalg::chol::psd_factor_lower;
use crate::posterior::PosteriorEvaluator;
use crate::rng::{substream, DOMAIN_ACCEPT, DOMAIN_PRIOR, DOMAIN_PROPOSAL};
use ndarray::{Array2, ArrayView2, ShapeBuilder};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// A log density the samplers can walk on.
pub trait Target: Sync {
    /// Dimension of the walk space.
    fn dim(&self) -> usize;

    /// Log density up to an additive constant; -inf means zero density.
    /// An Err is a numerical incident, not a zero-density region.
    fn log_density(&self, x: &[f64]) -> Result<f64>;

    /// Cheap support test, consulted before paying for log_density.
    fn in_support(&self, x: &[f64]) -> bool;

    /// Draw from the prior restricted to the support.
    fn sample_prior(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;
}

impl Target for PosteriorEvaluator {
    fn dim(&self) -> usize {
        self.problem().q() + 1
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_posterior_point(x)?.log_value)
    }

    fn in_support(&self, x: &[f64]) -> bool {
        let q = self.problem().q();
        x.len() == q + 1 && self.prior().contains(&x[..q], x[q])
    }

    fn sample_prior(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        self.prior().sample(rng)
    }
}

/// Blend weight schedule for the proposal covariances.
#[derive(Clone, Copy, Debug)]
pub enum BetaSchedule {
    /// min(0.9, 5/sqrt(j)), decaying to zero.
    InverseSqrt,
    /// Fixed value in [0, 1], mainly for tests.
    Constant(f64),
}

impl BetaSchedule {
    pub fn beta(&self, step: usize) -> f64 {
        match self {
            BetaSchedule::InverseSqrt => (5.0 / (step as f64).sqrt()).min(0.9),
            BetaSchedule::Constant(b) => *b,
        }
    }
}

/// Which column of the previous step anchors proposal slot k.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnchorMode {
    /// Slot k proposes around the previous step's column k.
    PerSlot,
    /// Every slot proposes around the previous step's last column.
    LastColumn,
}

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub n_steps: usize,
    pub cov_update_every: usize,
    pub n_parallel: usize,
    pub seed: u64,
    pub burn_in_draws: usize,
    /// Proposal scale; None means 2.38^2 / dim.
    pub scale: Option<f64>,
    pub beta: BetaSchedule,
    pub anchor_mode: AnchorMode,
}

impl SamplerConfig {
    pub fn new(seed: u64) -> Self {
        SamplerConfig {
            n_steps: 50_000,
            cov_update_every: 100,
            n_parallel: 20,
            seed,
            burn_in_draws: 500,
            scale: None,
            beta: BetaSchedule::InverseSqrt,
            anchor_mode: AnchorMode::PerSlot,
        }
    }

    pub fn effective_scale(&self, dim: usize) -> f64 {
        self.scale.unwrap_or(2.38 * 2.38 / dim as f64)
    }

    fn validate(&self) -> Result<()> {
        if self.cov_update_every <= 1 || self.cov_update_every >= self.n_steps {
            return Err(Error::InvalidParameter {
                detail: format!(
                    "cov_update_every must lie strictly between 1 and n_steps, got {} with n_steps {}",
                    self.cov_update_every, self.n_steps
                ),
            });
        }
        if self.n_parallel == 0 {
            return Err(Error::InvalidParameter {
                detail: "n_parallel must be at least 1".into(),
            });
        }
        if self.burn_in_draws * self.n_parallel < 2 {
            return Err(Error::InvalidParameter {
                detail: "burn_in_draws * n_parallel must be at least 2".into(),
            });
        }
        if let Some(s) = self.scale {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter {
                    detail: format!("scale must be positive and finite, got {s}"),
                });
            }
        }
        Ok(())
    }
}

/// Per-column diagnostics emitted while a run progresses.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord {
    pub step: usize,
    pub slot: usize,
    pub accepted: bool,
    pub log_density: f64,
    pub acceptance_rate: f64,
}

/// Diagnostics consumer; None discards the records.
pub type StepSink<'a> = Option<&'a mut dyn FnMut(StepRecord)>;

/// Full sample history of a run, stored column-major: the column for
/// (step j, slot k), both 1-based, sits at index (j-1)*n_parallel + (k-1).
pub struct ChainHistory {
    dim: usize,
    n_parallel: usize,
    data: Vec<f64>,
    log_dens: Vec<f64>,
    accepted: Vec<bool>,
    pub incidents: u64,
    pub evaluations: u64,
    pub adapted_cov: Array2<f64>,
    pub cov0: Array2<f64>,
}

impl ChainHistory {
    fn with_capacity(dim: usize, n_parallel: usize, n_steps: usize) -> Self {
        let cols = n_steps * n_parallel;
        ChainHistory {
            dim,
            n_parallel,
            data: Vec::with_capacity(cols * dim),
            log_dens: Vec::with_capacity(cols),
            accepted: Vec::with_capacity(cols),
            incidents: 0,
            evaluations: 0,
            adapted_cov: Array2::zeros((dim, dim)),
            cov0: Array2::zeros((dim, dim)),
        }
    }

    fn push_column(&mut self, x: &[f64], log_density: f64, accepted: bool) {
        debug_assert_eq!(x.len(), self.dim);
        self.data.extend_from_slice(x);
        self.log_dens.push(log_density);
        self.accepted.push(accepted);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_parallel(&self) -> usize {
        self.n_parallel
    }

    /// Number of stored columns (steps times slots).
    pub fn len(&self) -> usize {
        self.log_dens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_dens.is_empty()
    }

    pub fn n_steps(&self) -> usize {
        self.len() / self.n_parallel
    }

    pub fn column(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    /// Column for (step, slot), both 1-based.
    pub fn column_at(&self, step: usize, slot: usize) -> &[f64] {
        self.column((step - 1) * self.n_parallel + (slot - 1))
    }

    pub fn log_density(&self, idx: usize) -> f64 {
        self.log_dens[idx]
    }

    pub fn was_accepted(&self, idx: usize) -> bool {
        self.accepted[idx]
    }

    /// Accepted fraction over all decided columns (step 1 is the seed state
    /// and does not count as a decision).
    pub fn acceptance_rate(&self) -> f64 {
        let decided = self.len().saturating_sub(self.n_parallel);
        if decided == 0 {
            return 0.0;
        }
        let hits = self.accepted[self.n_parallel..]
            .iter()
            .filter(|a| **a)
            .count();
        hits as f64 / decided as f64
    }

    /// All stored columns as a dim x len view.
    pub fn samples(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.dim, self.len()).f(), &self.data).expect("column-major")
    }

    /// One coordinate across every column from a 1-based step onward.
    pub fn coordinate_tail(&self, coord: usize, from_step: usize) -> Vec<f64> {
        assert!(coord < self.dim);
        let start = (from_step - 1) * self.n_parallel;
        (start..self.len())
            .map(|idx| self.data[idx * self.dim + coord])
            .collect()
    }

    /// Per-coordinate mean and population standard deviation from a 1-based
    /// step onward.
    pub fn mean_and_std(&self, from_step: usize) -> (Vec<f64>, Vec<f64>) {
        let start = (from_step - 1) * self.n_parallel;
        let count = self.len() - start;
        assert!(count > 0);
        let mut mean = vec![0.0; self.dim];
        for idx in start..self.len() {
            for (d, m) in mean.iter_mut().enumerate() {
                *m += self.data[idx * self.dim + d];
            }
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let mut var = vec![0.0; self.dim];
        for idx in start..self.len() {
            for (d, v) in var.iter_mut().enumerate() {
                let c = self.data[idx * self.dim + d] - mean[d];
                *v += c * c;
            }
        }
        let std = var.iter().map(|v| (v / count as f64).sqrt()).collect();
        (mean, std)
    }
}

/// Mean of burn_in_draws * n_parallel prior draws (replaced by the nearest
/// draw when the mean itself violates the support), plus their sample
/// covariance.
pub fn initial_point<T: Target>(
    target: &T,
    config: &SamplerConfig,
) -> Result<(Vec<f64>, Array2<f64>)> {
    config.validate()?;
    let dim = target.dim();
    let count = config.burn_in_draws * config.n_parallel;
    let mut rng = substream(config.seed, 0, 0, DOMAIN_PRIOR);
    let mut draws = Array2::zeros((dim, count));
    for j in 0..count {
        let x = target.sample_prior(&mut rng)?;
        debug_assert_eq!(x.len(), dim);
        for d in 0..dim {
            draws[[d, j]] = x[d];
        }
    }
    let mut mean = vec![0.0; dim];
    for j in 0..count {
        for (d, m) in mean.iter_mut().enumerate() {
            *m += draws[[d, j]];
        }
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let point = if target.in_support(&mean) {
        mean.clone()
    } else {
        let mut best = 0;
        let mut best_d2 = f64::INFINITY;
        for j in 0..count {
            let d2: f64 = (0..dim).map(|d| (draws[[d, j]] - mean[d]).powi(2)).sum();
            if d2 < best_d2 {
                best_d2 = d2;
                best = j;
            }
        }
        (0..dim).map(|d| draws[[d, best]]).collect()
    };
    let cov0 = sample_covariance(&draws.view(), 0.0);
    Ok((point, cov0))
}

fn sample_covariance(samples: &ArrayView2<f64>, ridge: f64) -> Array2<f64> {
    let dim = samples.nrows();
    let count = samples.ncols();
    let mut mean = vec![0.0; dim];
    for j in 0..count {
        for (d, m) in mean.iter_mut().enumerate() {
            *m += samples[[d, j]];
        }
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut cov = Array2::zeros((dim, dim));
    for j in 0..count {
        for r in 0..dim {
            let cr = samples[[r, j]] - mean[r];
            for c in r..dim {
                cov[[r, c]] += cr * (samples[[c, j]] - mean[c]);
            }
        }
    }
    let denom = (count - 1).max(1) as f64;
    for r in 0..dim {
        for c in r..dim {
            let v = cov[[r, c]] / denom;
            cov[[r, c]] = v;
            cov[[c, r]] = v;
        }
    }
    for d in 0..dim {
        cov[[d, d]] += ridge;
    }
    cov
}

/// Unbiased sample covariance of the stored columns, symmetrized, with a
/// 1e-10 diagonal ridge.
pub fn update_covariance(samples: ArrayView2<f64>) -> Array2<f64> {
    assert!(samples.ncols() >= 2, "need at least two samples");
    sample_covariance(&samples, 1e-10)
}

/// Candidate = current + (1-beta) * draw(N(0, scale * cov)) +
/// beta * draw(N(0, scale * cov0)). Both draws are always made, keeping the
/// random stream aligned for any beta.
pub fn propose(
    current: &[f64],
    cov: &Array2<f64>,
    cov0: &Array2<f64>,
    beta: f64,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let dim = current.len();
    let z1: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let z2: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let l = psd_factor_lower(&cov.view());
    let l0 = psd_factor_lower(&cov0.view());
    let root_scale = scale.sqrt();
    let mut out = current.to_vec();
    for r in 0..dim {
        let mut step = 0.0;
        for c in 0..=r {
            step += (1.0 - beta) * l[[r, c]] * z1[c] + beta * l0[[r, c]] * z2[c];
        }
        out[r] += root_scale * step;
    }
    out
}

/// Stochastic matrix mixing the current state (index 0) with the proposals
/// (indices 1..=n_parallel).
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    entries: Array2<f64>,
}

impl TransitionMatrix {
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// Index drawn from the given row at uniform variate u in [0, 1).
    pub fn sample_row(&self, row: usize, u: f64) -> usize {
        let mut cum = 0.0;
        let mut last_positive = 0;
        for l in 0..self.size() {
            let e = self.entries[[row, l]];
            if e > 0.0 {
                last_positive = l;
            }
            cum += e;
            if u < cum {
                return l;
            }
        }
        last_positive
    }
}

/// Builds the transition matrix from log weights
/// (log w_1 = current state, log w_2.. = proposals):
/// off-diagonal T[k][l] = min(1, w_l / w_k) / n_par, diagonal fills the row
/// to 1. Ratios are formed from log differences.
pub fn build_transition_matrix(log_weights: &[f64]) -> Result<TransitionMatrix> {
    let size = log_weights.len();
    if size < 2 {
        return Err(Error::InvalidWeights {
            reason: format!("need the current state and at least one proposal, got {size}"),
        });
    }
    if log_weights.iter().any(|w| w.is_nan()) {
        return Err(Error::InvalidWeights {
            reason: "NaN weight".into(),
        });
    }
    if log_weights[0] == f64::NEG_INFINITY {
        return Err(Error::InvalidWeights {
            reason: "current state has zero weight".into(),
        });
    }
    let n_par = (size - 1) as f64;
    let mut entries = Array2::zeros((size, size));
    for k in 0..size {
        let mut off_sum = 0.0;
        for l in 0..size {
            if l == k {
                continue;
            }
            let ratio = if log_weights[l] == f64::NEG_INFINITY {
                0.0
            } else if log_weights[k] == f64::NEG_INFINITY {
                1.0
            } else {
                (log_weights[l] - log_weights[k]).exp().min(1.0)
            };
            let e = ratio / n_par;
            entries[[k, l]] = e;
            off_sum += e;
        }
        entries[[k, k]] = (1.0 - off_sum).max(0.0);
    }
    Ok(TransitionMatrix { entries })
}

struct IncidentTracker {
    incidents: u64,
    evaluations: u64,
}

impl IncidentTracker {
    fn new() -> Self {
        IncidentTracker {
            incidents: 0,
            evaluations: 0,
        }
    }

    /// Folds an evaluation outcome into a usable log weight; Err becomes
    /// -inf and counts as an incident.
    fn fold(&mut self, outcome: Result<f64>) -> f64 {
        self.evaluations += 1;
        match outcome {
            Ok(v) => v,
            Err(_) => {
                self.incidents += 1;
                f64::NEG_INFINITY
            }
        }
    }

    fn check(&self) -> Result<()> {
        if self.evaluations >= 1000 && self.incidents as f64 > 0.01 * self.evaluations as f64 {
            return Err(Error::IncidentRate {
                incidents: self.incidents,
                evaluations: self.evaluations,
            });
        }
        Ok(())
    }
}

fn evaluate_candidate<T: Target>(target: &T, x: &[f64]) -> Result<f64> {
    if !target.in_support(x) {
        return Ok(f64::NEG_INFINITY);
    }
    target.log_density(x)
}

/// Single-chain adaptive Metropolis run.
pub fn single_chain_run<T: Target>(
    target: &T,
    config: &SamplerConfig,
    mut sink: StepSink<'_>,
) -> Result<ChainHistory> {
    config.validate()?;
    let dim = target.dim();
    let scale = config.effective_scale(dim);
    let (start, cov0) = initial_point(target, config)?;
    let mut tracker = IncidentTracker::new();
    let start_ld = tracker.fold(evaluate_candidate(target, &start));

    let mut history = ChainHistory::with_capacity(dim, 1, config.n_steps);
    history.cov0 = cov0.clone();
    history.push_column(&start, start_ld, true);

    let mut cov = cov0.clone();
    let mut current = start;
    let mut current_ld = start_ld;
    let mut accepted_count = 0usize;

    for j in 2..=config.n_steps {
        if j % config.cov_update_every == 0 {
            cov = update_covariance(history.samples());
        }
        let beta = config.beta.beta(j);
        let mut rng_prop = substream(config.seed, j as u64, 1, DOMAIN_PROPOSAL);
        let candidate = propose(&current, &cov, &cov0, beta, scale, &mut rng_prop);
        let cand_ld = tracker.fold(evaluate_candidate(target, &candidate));
        tracker.check()?;

        let mut rng_acc = substream(config.seed, j as u64, 0, DOMAIN_ACCEPT);
        let u: f64 = rng_acc.random();
        let accept = u.ln() < cand_ld - current_ld;
        if accept {
            current = candidate;
            current_ld = cand_ld;
            accepted_count += 1;
        }
        history.push_column(&current, current_ld, accept);
        if let Some(sink) = sink.as_mut() {
            sink(StepRecord {
                step: j,
                slot: 1,
                accepted: accept,
                log_density: current_ld,
                acceptance_rate: accepted_count as f64 / (j - 1) as f64,
            });
        }
    }
    history.incidents = tracker.incidents;
    history.evaluations = tracker.evaluations;
    history.adapted_cov = cov;
    Ok(history)
}

/// Multi-proposal run: per step, n_parallel candidates are drawn (anchored
/// per slot or at the last column), evaluated concurrently, and the new
/// columns are drawn from the current-state row of the transition matrix,
/// index 0 repeating the previous last column.
pub fn parallel_chain_run<T: Target>(
    target: &T,
    config: &SamplerConfig,
    mut sink: StepSink<'_>,
) -> Result<ChainHistory> {
    config.validate()?;
    let dim = target.dim();
    let n_par = config.n_parallel;
    let scale = config.effective_scale(dim);
    let (start, cov0) = initial_point(target, config)?;
    let mut tracker = IncidentTracker::new();
    let start_ld = tracker.fold(evaluate_candidate(target, &start));

    let mut history = ChainHistory::with_capacity(dim, n_par, config.n_steps);
    history.cov0 = cov0.clone();
    for _ in 0..n_par {
        history.push_column(&start, start_ld, true);
    }

    let mut cov = cov0.clone();
    let mut columns: Vec<Vec<f64>> = vec![start; n_par];
    let mut column_lds: Vec<f64> = vec![start_ld; n_par];
    let mut accepted_count = 0usize;
    let mut decisions = 0usize;

    for j in 2..=config.n_steps {
        if j % config.cov_update_every == 0 {
            cov = update_covariance(history.samples());
        }
        let beta = config.beta.beta(j);
        let candidates: Vec<Vec<f64>> = (0..n_par)
            .map(|k| {
                let anchor = match config.anchor_mode {
                    AnchorMode::PerSlot => &columns[k],
                    AnchorMode::LastColumn => &columns[n_par - 1],
                };
                let mut rng_prop =
                    substream(config.seed, j as u64, (k + 1) as u64, DOMAIN_PROPOSAL);
                propose(anchor, &cov, &cov0, beta, scale, &mut rng_prop)
            })
            .collect();

        let outcomes: Vec<Result<f64>> = candidates
            .par_iter()
            .map(|cand| evaluate_candidate(target, cand))
            .collect();

        let mut log_weights = Vec::with_capacity(n_par + 1);
        log_weights.push(column_lds[n_par - 1]);
        for outcome in outcomes {
            log_weights.push(tracker.fold(outcome));
        }
        tracker.check()?;
        let transition = build_transition_matrix(&log_weights)?;

        let repeat_column = columns[n_par - 1].clone();
        let repeat_ld = column_lds[n_par - 1];
        let mut rng_row = substream(config.seed, j as u64, 0, DOMAIN_ACCEPT);
        for k in 0..n_par {
            let u: f64 = rng_row.random();
            let idx = transition.sample_row(0, u);
            let accepted = idx != 0;
            if accepted {
                columns[k] = candidates[idx - 1].clone();
                column_lds[k] = log_weights[idx];
                accepted_count += 1;
            } else {
                columns[k] = repeat_column.clone();
                column_lds[k] = repeat_ld;
            }
            decisions += 1;
            history.push_column(&columns[k], column_lds[k], accepted);
            if let Some(sink) = sink.as_mut() {
                sink(StepRecord {
                    step: j,
                    slot: k + 1,
                    accepted,
                    log_density: column_lds[k],
                    acceptance_rate: accepted_count as f64 / decisions as f64,
                });
            }
        }
    }
    history.incidents = tracker.incidents;
    history.evaluations = tracker.evaluations;
    history.adapted_cov = cov;
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gaussian in the first coordinate, flat box elsewhere.
    struct GaussianTarget {
        dim: usize,
        mean: f64,
        sd: f64,
        box_half_width: f64,
        shift: f64,
    }

    impl GaussianTarget {
        fn new(dim: usize, mean: f64, sd: f64) -> Self {
            GaussianTarget {
                dim,
                mean,
                sd,
                box_half_width: 50.0,
                shift: 0.0,
            }
        }
    }

    impl Target for GaussianTarget {
        fn dim(&self) -> usize {
            self.dim
        }

        fn log_density(&self, x: &[f64]) -> Result<f64> {
            let z = (x[0] - self.mean) / self.sd;
            Ok(-0.5 * z * z + self.shift)
        }

        fn in_support(&self, x: &[f64]) -> bool {
            x.iter().all(|v| v.abs() <= self.box_half_width)
        }

        fn sample_prior(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
            Ok((0..self.dim)
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * 5.0)
                .collect())
        }
    }

    fn small_config(seed: u64) -> SamplerConfig {
        let mut c = SamplerConfig::new(seed);
        c.n_steps = 400;
        c.cov_update_every = 50;
        c.n_parallel = 4;
        c.burn_in_draws = 50;
        c
    }

    #[test]
    fn transition_matrix_hand_examples() {
        // Weights (1, 2): uphill move always taken.
        let t = build_transition_matrix(&[0.0, 2f64.ln()]).unwrap();
        assert_eq!(t.entries()[[0, 0]], 0.0);
        assert_eq!(t.entries()[[0, 1]], 1.0);
        assert!((t.entries()[[1, 0]] - 0.5).abs() < 1e-15);
        assert!((t.entries()[[1, 1]] - 0.5).abs() < 1e-15);

        // Weights (1, 0): zero-weight proposal never accepted.
        let t = build_transition_matrix(&[0.0, f64::NEG_INFINITY]).unwrap();
        assert_eq!(t.entries()[[0, 0]], 1.0);
        assert_eq!(t.entries()[[0, 1]], 0.0);
        assert_eq!(t.entries()[[1, 0]], 1.0);
        assert_eq!(t.entries()[[1, 1]], 0.0);

        // Equal weights, two proposals: off-diagonals 1/2, diagonals 0.
        let t = build_transition_matrix(&[1.3, 1.3, 1.3]).unwrap();
        for k in 0..3 {
            for l in 0..3 {
                let want = if k == l { 0.0 } else { 0.5 };
                assert!((t.entries()[[k, l]] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn transition_matrix_rows_are_distributions() {
        let mut rng = substream(77, 0, 0, DOMAIN_ACCEPT);
        for trial in 0..200 {
            let n_par = 1 + (trial % 7);
            let mut lw: Vec<f64> = (0..=n_par)
                .map(|_| (rng.random::<f64>() * 8.0 - 4.0) * 100.0)
                .collect();
            if trial % 3 == 0 {
                for l in lw.iter_mut().skip(1).step_by(2) {
                    *l = f64::NEG_INFINITY;
                }
            }
            let t = build_transition_matrix(&lw).unwrap();
            for k in 0..=n_par {
                let mut sum = 0.0;
                for l in 0..=n_par {
                    let e = t.entries()[[k, l]];
                    assert!((0.0..=1.0).contains(&e));
                    if k != l {
                        assert!(e <= 1.0 / n_par as f64 + 1e-15);
                    }
                    sum += e;
                }
                assert!((sum - 1.0).abs() < 1e-12, "row {k} sums to {sum}");
            }
        }
    }

    #[test]
    fn transition_matrix_rejects_bad_weights() {
        assert!(matches!(
            build_transition_matrix(&[f64::NEG_INFINITY, 0.0]),
            Err(Error::InvalidWeights { .. })
        ));
        assert!(matches!(
            build_transition_matrix(&[0.0, f64::NAN]),
            Err(Error::InvalidWeights { .. })
        ));
        assert!(matches!(
            build_transition_matrix(&[0.0]),
            Err(Error::InvalidWeights { .. })
        ));
    }

    #[test]
    fn metropolis_reduction_is_exact_at_one_proposal() {
        for &(lw0, lw1) in &[(0.0, -1.3), (0.5, 2.0), (-4.0, -4.0), (3.0, f64::NEG_INFINITY)]
        {
            let t = build_transition_matrix(&[lw0, lw1]).unwrap();
            let metropolis = if lw1 == f64::NEG_INFINITY {
                0.0
            } else {
                (lw1 - lw0).exp().min(1.0)
            };
            assert_eq!(t.entries()[[0, 1]], metropolis);
            assert_eq!(t.entries()[[0, 0]], 1.0 - metropolis);
        }
    }

    #[test]
    fn sample_row_walks_the_cdf() {
        let t = build_transition_matrix(&[0.0, 2f64.ln(), f64::NEG_INFINITY]).unwrap();
        // Row 0 entries: [1/2 - ... ] computed: off = [min(1,2)/2, 0] = [0.5, 0];
        // diagonal 0.5.
        assert_eq!(t.sample_row(0, 0.25), 0);
        assert_eq!(t.sample_row(0, 0.75), 1);
        assert_eq!(t.sample_row(0, 0.999999), 1);
    }

    #[test]
    fn covariance_hand_examples() {
        let dim = 3;
        let same = Array2::from_shape_fn((dim, 5), |(d, _)| d as f64);
        let cov = update_covariance(same.view());
        for r in 0..dim {
            for c in 0..dim {
                let want = if r == c { 1e-10 } else { 0.0 };
                assert!((cov[[r, c]] - want).abs() < 1e-22);
            }
        }

        let mut two = Array2::zeros((2, 2));
        two[[0, 1]] = 2.0;
        let cov = update_covariance(two.view());
        assert!((cov[[0, 0]] - (2.0 + 1e-10)).abs() < 1e-14);
        assert!(cov[[1, 1]] - 1e-10 == 0.0);
        assert_eq!(cov[[0, 1]], 0.0);
    }

    #[test]
    fn covariance_recovers_diagonal_target() {
        let dim = 3;
        let d: [f64; 3] = [4.0, 1.0, 0.25];
        let mut rng = substream(5, 0, 0, DOMAIN_PRIOR);
        let draws = Array2::from_shape_fn((dim, 10_000), |(r, _c)| {
            let z: f64 = rng.sample(StandardNormal);
            z * d[r].sqrt()
        });
        // Column-major fill order does not matter for the covariance itself.
        let cov = update_covariance(draws.view());
        for r in 0..dim {
            assert!(
                (cov[[r, r]] - d[r]).abs() < 0.05 * d[r],
                "var {r}: {}",
                cov[[r, r]]
            );
            for c in 0..dim {
                if c != r {
                    assert!(cov[[r, c]].abs() < 0.05 * (d[r] * d[c]).sqrt());
                }
            }
        }
    }

    #[test]
    fn propose_with_full_prior_weight_and_zero_cov0_stays_put() {
        let cov = Array2::eye(3);
        let cov0 = Array2::zeros((3, 3));
        let mut rng = substream(1, 2, 3, DOMAIN_PROPOSAL);
        let cand = propose(&[1.0, -2.0, 0.5], &cov, &cov0, 1.0, 0.7, &mut rng);
        assert_eq!(cand, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn propose_is_bit_reproducible() {
        let cov = Array2::eye(2) * 0.3;
        let cov0 = Array2::eye(2) * 2.0;
        let a = propose(
            &[0.0, 0.0],
            &cov,
            &cov0,
            0.4,
            1.1,
            &mut substream(9, 4, 2, DOMAIN_PROPOSAL),
        );
        let b = propose(
            &[0.0, 0.0],
            &cov,
            &cov0,
            0.4,
            1.1,
            &mut substream(9, 4, 2, DOMAIN_PROPOSAL),
        );
        assert_eq!(a, b);
    }

    #[test]
    fn propose_blend_has_the_stated_covariance() {
        let dim = 2;
        let cov = Array2::eye(dim);
        let cov0 = Array2::eye(dim);
        let beta = 0.5;
        let scale = 1.6;
        let want = scale * ((1.0 - beta) * (1.0 - beta) + beta * beta);
        let mut rng = substream(11, 0, 0, DOMAIN_PROPOSAL);
        let n = 100_000;
        let mut acc: Array2<f64> = Array2::zeros((dim, dim));
        for _ in 0..n {
            let c = propose(&[0.0, 0.0], &cov, &cov0, beta, scale, &mut rng);
            for r in 0..dim {
                for s in 0..dim {
                    acc[[r, s]] += c[r] * c[s];
                }
            }
        }
        for r in 0..dim {
            for s in 0..dim {
                let got = acc[[r, s]] / n as f64;
                let target = if r == s { want } else { 0.0 };
                assert!(
                    (got - target).abs() < 0.02 * want,
                    "entry ({r},{s}): {got} vs {target}"
                );
            }
        }
    }

    #[test]
    fn initial_point_of_point_mass_prior_is_exact() {
        struct PointMass;
        impl Target for PointMass {
            fn dim(&self) -> usize {
                2
            }
            fn log_density(&self, _x: &[f64]) -> Result<f64> {
                Ok(0.0)
            }
            fn in_support(&self, x: &[f64]) -> bool {
                x == [3.0, -1.0]
            }
            fn sample_prior(&self, _rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
                Ok(vec![3.0, -1.0])
            }
        }
        let config = small_config(4);
        let (point, cov0) = initial_point(&PointMass, &config).unwrap();
        assert_eq!(point, vec![3.0, -1.0]);
        assert!(cov0.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn initial_point_matches_box_center_statistics() {
        let target = GaussianTarget::new(2, 0.0, 1.0);
        let mut config = small_config(8);
        config.burn_in_draws = 25_000;
        config.n_parallel = 4;
        let (point, cov0) = initial_point(&target, &config).unwrap();
        // Draws are uniform on [-5, 5]^2: mean 0, variance 25/3.
        let count = 100_000.0;
        let se = (25.0f64 / 3.0 / count).sqrt();
        for d in 0..2 {
            assert!(point[d].abs() < 3.0 * se, "mean[{d}] = {}", point[d]);
            assert!((cov0[[d, d]] - 25.0 / 3.0).abs() < 0.25);
        }
    }

    #[test]
    fn flat_target_accepts_every_in_box_proposal() {
        struct Flat;
        impl Target for Flat {
            fn dim(&self) -> usize {
                1
            }
            fn log_density(&self, _x: &[f64]) -> Result<f64> {
                Ok(0.0)
            }
            fn in_support(&self, _x: &[f64]) -> bool {
                true
            }
            fn sample_prior(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
                Ok(vec![rng.random::<f64>()])
            }
        }
        let config = small_config(3);
        let run = single_chain_run(&Flat, &config, None).unwrap();
        assert_eq!(run.acceptance_rate(), 1.0);
        let run = parallel_chain_run(&Flat, &config, None).unwrap();
        assert_eq!(run.acceptance_rate(), 1.0);
    }

    #[test]
    fn acceptance_decisions_ignore_constant_density_shifts() {
        let mut a = GaussianTarget::new(2, 1.0, 0.8);
        let config = small_config(21);
        let run_a = parallel_chain_run(&a, &config, None).unwrap();
        a.shift = 1000.0;
        let run_b = parallel_chain_run(&a, &config, None).unwrap();
        assert_eq!(run_a.len(), run_b.len());
        for idx in 0..run_a.len() {
            assert_eq!(run_a.column(idx), run_b.column(idx));
            assert_eq!(run_a.was_accepted(idx), run_b.was_accepted(idx));
            assert_eq!(
                run_b.log_density(idx) - run_a.log_density(idx),
                1000.0
            );
        }
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let target = GaussianTarget::new(2, -0.5, 1.3);
        let config = small_config(42);
        let a = parallel_chain_run(&target, &config, None).unwrap();
        let b = parallel_chain_run(&target, &config, None).unwrap();
        assert_eq!(a.len(), b.len());
        for idx in 0..a.len() {
            assert_eq!(a.column(idx), b.column(idx));
        }
        let c = single_chain_run(&target, &config, None).unwrap();
        let d = single_chain_run(&target, &config, None).unwrap();
        for idx in 0..c.len() {
            assert_eq!(c.column(idx), d.column(idx));
        }
    }

    #[test]
    fn step_records_track_columns() {
        let target = GaussianTarget::new(1, 0.0, 1.0);
        let mut config = small_config(6);
        config.n_steps = 50;
        config.cov_update_every = 10;
        let mut records = Vec::new();
        let mut sink = |r: StepRecord| records.push(r);
        let run = parallel_chain_run(&target, &config, Some(&mut sink)).unwrap();
        assert_eq!(records.len(), (config.n_steps - 1) * config.n_parallel);
        assert_eq!(records[0].step, 2);
        assert_eq!(records[0].slot, 1);
        let last = records.last().unwrap();
        assert_eq!(last.step, config.n_steps);
        assert_eq!(last.slot, config.n_parallel);
        assert!((last.acceptance_rate - run.acceptance_rate()).abs() < 1e-15);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let target = GaussianTarget::new(1, 0.0, 1.0);
        let mut config = small_config(1);
        config.cov_update_every = 1;
        assert!(single_chain_run(&target, &config, None).is_err());
        config = small_config(1);
        config.cov_update_every = config.n_steps;
        assert!(single_chain_run(&target, &config, None).is_err());
        config = small_config(1);
        config.n_parallel = 0;
        assert!(parallel_chain_run(&target, &config, None).is_err());
    }

    #[test]
    fn incident_rate_aborts_the_run() {
        struct Faulty;
        impl Target for Faulty {
            fn dim(&self) -> usize {
                1
            }
            fn log_density(&self, _x: &[f64]) -> Result<f64> {
                Err(Error::FactorizationFailure { context: "test" })
            }
            fn in_support(&self, _x: &[f64]) -> bool {
                true
            }
            fn sample_prior(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
                Ok(vec![rng.random::<f64>()])
            }
        }
        let mut config = small_config(2);
        config.n_steps = 2000;
        let out = single_chain_run(&Faulty, &config, None);
        assert!(matches!(out, Err(Error::IncidentRate { .. })));
    }

    #[test]
    fn chain_history_indexing_is_column_major_by_step_then_slot() {
        let target = GaussianTarget::new(2, 0.0, 1.0);
        let mut config = small_config(13);
        config.n_steps = 5;
        config.cov_update_every = 3;
        config.n_parallel = 3;
        let run = parallel_chain_run(&target, &config, None).unwrap();
        assert_eq!(run.len(), 15);
        assert_eq!(run.n_steps(), 5);
        assert_eq!(run.column_at(1, 1), run.column_at(1, 3));
        assert_eq!(run.column_at(2, 1), run.column(3));
        let tail = run.coordinate_tail(0, 4);
        assert_eq!(tail.len(), 6);
        assert_eq!(tail[0], run.column_at(4, 1)[0]);
        let samples = run.samples();
        assert_eq!(samples.ncols(), 15);
        assert_eq!(samples[[1, 7]], run.column(7)[1]);
    }
}
