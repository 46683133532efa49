//! Baseline regularization-selection criteria (generalized cross validation,
//! a marginal-likelihood ratio, and a constrained least-squares residual)
//! plus a deterministic multistart Nelder-Mead minimizer for fitting them
//! over (m, log10 alpha).

use crate::error::{Error, Result};
use crate::linalg::{solve_regularized, LowRankFactor, ReducedGram};
use crate::posterior::{PriorSpec, ProblemDefinition};
use crate::rng::{substream, DOMAIN_OPTIM};
use rand::Rng;
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectorKind {
    Gcv,
    Ml,
    Cls,
}

impl SelectorKind {
    pub fn label(&self) -> &'static str {
        match self {
            SelectorKind::Gcv => "gcv",
            SelectorKind::Ml => "ml",
            SelectorKind::Cls => "cls",
        }
    }
}

/// One criterion evaluation at a fixed point.
#[derive(Clone, Debug)]
pub struct SelectorScore {
    pub criterion: SelectorKind,
    pub value: f64,
    pub alpha: f64,
    pub m: Vec<f64>,
}

fn profiled_factor(prob: &ProblemDefinition, m: &[f64], alpha: f64) -> Result<LowRankFactor> {
    let op = prob.operator(m)?;
    let reduced = ReducedGram::new(&op, prob.gram())?;
    reduced.factor(alpha)
}

/// Cross-validation score ||B^{-1} u||^2 / tr(B^{-1})^2, with B the
/// regularized data-space operator; the numerator is the squared residual of
/// the hat matrix and the denominator its complementary trace, squared.
pub fn gcv_score(prob: &ProblemDefinition, m: &[f64], alpha: f64) -> Result<f64> {
    let factor = profiled_factor(prob, m, alpha)?;
    let b_inv_u = factor.solve(&prob.data().view());
    let numerator = b_inv_u.dot(&b_inv_u);
    let trace = factor.trace_inverse();
    Ok(numerator / (trace * trace))
}

/// Likelihood-ratio score u' B^{-1} u / det(B^{-1})^{1/n}, evaluated in log
/// form to keep the determinant factor stable.
pub fn ml_score(prob: &ProblemDefinition, m: &[f64], alpha: f64) -> Result<f64> {
    let factor = profiled_factor(prob, m, alpha)?;
    let quadratic = factor.quadratic(&prob.data().view());
    let n = prob.n() as f64;
    Ok((quadratic.ln() + factor.logdet() / n).exp())
}

/// Squared data residual ||u - A g_min||^2 at the regularized least-squares
/// solution.
pub fn cls_residual(prob: &ProblemDefinition, m: &[f64], alpha: f64) -> Result<f64> {
    let op = prob.operator(m)?;
    let g = solve_regularized(&op, prob.gram(), alpha, &prob.data().view())?;
    let r = prob.data() - &op.apply(&g.view());
    Ok(r.dot(&r))
}

pub fn selector_score(
    prob: &ProblemDefinition,
    criterion: SelectorKind,
    m: &[f64],
    alpha: f64,
) -> Result<SelectorScore> {
    let value = match criterion {
        SelectorKind::Gcv => gcv_score(prob, m, alpha)?,
        SelectorKind::Ml => ml_score(prob, m, alpha)?,
        SelectorKind::Cls => cls_residual(prob, m, alpha)?,
    };
    Ok(SelectorScore {
        criterion,
        value,
        alpha,
        m: m.to_vec(),
    })
}

#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    pub n_starts: usize,
    pub max_evals: usize,
    pub local_tol: f64,
    pub seed: u64,
    /// Replaces the first restart's starting point when set.
    pub injected_start: Option<Vec<f64>>,
}

impl OptimizerConfig {
    pub fn new(seed: u64) -> Self {
        OptimizerConfig {
            n_starts: 30,
            max_evals: 3000,
            local_tol: 1e-9,
            seed,
            injected_start: None,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::InvalidParameter {
                detail: "n_starts must be at least 1".into(),
            });
        }
        if self.max_evals < self.n_starts {
            return Err(Error::InvalidParameter {
                detail: format!(
                    "max_evals {} must cover at least one evaluation per restart ({})",
                    self.max_evals, self.n_starts
                ),
            });
        }
        if !(self.local_tol > 0.0) {
            return Err(Error::InvalidParameter {
                detail: "local_tol must be positive".into(),
            });
        }
        if let Some(start) = &self.injected_start {
            if start.len() != dim {
                return Err(Error::InvalidParameter {
                    detail: format!(
                        "injected start has dimension {}, search space has {}",
                        start.len(),
                        dim
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Result of one multistart minimization. The converged flag and the budget
/// flag describe the winning restart.
#[derive(Clone, Debug)]
pub struct OptimOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: u64,
    pub converged: bool,
    pub budget_exhausted: bool,
}

struct RestartResult {
    point: Vec<f64>,
    value: f64,
    evaluations: u64,
    converged: bool,
}

/// Latin-hypercube start points: per dimension, a seeded permutation of the
/// strata with midpoint placement.
fn lhs_starts(bounds: &[(f64, f64)], n_starts: usize, seed: u64) -> Vec<Vec<f64>> {
    let dim = bounds.len();
    let mut strata: Vec<Vec<usize>> = Vec::with_capacity(dim);
    for d in 0..dim {
        let mut perm: Vec<usize> = (0..n_starts).collect();
        let mut rng = substream(seed, 0, d as u64, DOMAIN_OPTIM);
        for i in (1..n_starts).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        strata.push(perm);
    }
    (0..n_starts)
        .map(|s| {
            (0..dim)
                .map(|d| {
                    let (lo, hi) = bounds[d];
                    lo + (strata[d][s] as f64 + 0.5) / n_starts as f64 * (hi - lo)
                })
                .collect()
        })
        .collect()
}

/// Redraws a start uniformly inside the bounds until the support predicate
/// accepts it; gives the original point back after too many rejections.
fn repair_start<S: Fn(&[f64]) -> bool>(
    start: Vec<f64>,
    bounds: &[(f64, f64)],
    support: &S,
    seed: u64,
    restart: usize,
) -> Vec<f64> {
    if support(&start) {
        return start;
    }
    let mut rng = substream(seed, 1, restart as u64, DOMAIN_OPTIM);
    for _ in 0..10_000 {
        let candidate: Vec<f64> = bounds
            .iter()
            .map(|(lo, hi)| lo + rng.random::<f64>() * (hi - lo))
            .collect();
        if support(&candidate) {
            return candidate;
        }
    }
    start
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].partial_cmp(&values[*b]).unwrap());
    order
}

fn nelder_mead<F: Fn(&[f64]) -> f64>(
    objective: &F,
    bounds: &[(f64, f64)],
    start: &[f64],
    budget: u64,
    tol: f64,
) -> RestartResult {
    let dim = bounds.len();
    let mut evals: u64 = 0;
    let mut best_point = start.to_vec();
    let mut best_value = f64::INFINITY;
    let eval = |x: &[f64], evals: &mut u64, bp: &mut Vec<f64>, bv: &mut f64| -> f64 {
        *evals += 1;
        let v = objective(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < *bv {
            *bv = v;
            *bp = x.to_vec();
        }
        v
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(start.to_vec());
    for d in 0..dim {
        let (lo, hi) = bounds[d];
        let mut h = 0.05 * (hi - lo);
        if h == 0.0 {
            h = 1e-8;
        }
        if start[d] + h > hi {
            h = -h;
        }
        let mut v = start.to_vec();
        v[d] += h;
        simplex.push(v);
    }
    let mut fs: Vec<f64> = Vec::with_capacity(dim + 1);
    for v in &simplex {
        if evals >= budget {
            return RestartResult {
                point: best_point,
                value: best_value,
                evaluations: evals,
                converged: false,
            };
        }
        fs.push(eval(v, &mut evals, &mut best_point, &mut best_value));
    }

    loop {
        let order = sorted_order(&fs);
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];
        let spread = fs[worst] - fs[best];
        if spread <= tol * (1.0 + fs[best].abs()) {
            return RestartResult {
                point: best_point,
                value: best_value,
                evaluations: evals,
                converged: true,
            };
        }
        if evals >= budget {
            return RestartResult {
                point: best_point,
                value: best_value,
                evaluations: evals,
                converged: false,
            };
        }

        let mut centroid = vec![0.0; dim];
        for &idx in order.iter().take(dim) {
            for d in 0..dim {
                centroid[d] += simplex[idx][d];
            }
        }
        for c in &mut centroid {
            *c /= dim as f64;
        }
        let reflect: Vec<f64> = (0..dim)
            .map(|d| centroid[d] + (centroid[d] - simplex[worst][d]))
            .collect();
        let fr = eval(&reflect, &mut evals, &mut best_point, &mut best_value);

        if fr < fs[best] {
            if evals < budget {
                let expand: Vec<f64> = (0..dim)
                    .map(|d| centroid[d] + 2.0 * (centroid[d] - simplex[worst][d]))
                    .collect();
                let fe = eval(&expand, &mut evals, &mut best_point, &mut best_value);
                if fe < fr {
                    simplex[worst] = expand;
                    fs[worst] = fe;
                    continue;
                }
            }
            simplex[worst] = reflect;
            fs[worst] = fr;
            continue;
        }
        if fr < fs[second_worst] {
            simplex[worst] = reflect;
            fs[worst] = fr;
            continue;
        }
        if evals >= budget {
            continue;
        }
        let contracted: Vec<f64> = if fr < fs[worst] {
            (0..dim)
                .map(|d| centroid[d] + 0.5 * (centroid[d] - simplex[worst][d]))
                .collect()
        } else {
            (0..dim)
                .map(|d| centroid[d] - 0.5 * (centroid[d] - simplex[worst][d]))
                .collect()
        };
        let fc = eval(&contracted, &mut evals, &mut best_point, &mut best_value);
        if fc < fs[worst].min(fr) {
            simplex[worst] = contracted;
            fs[worst] = fc;
            continue;
        }
        for &idx in order.iter().skip(1) {
            for d in 0..dim {
                simplex[idx][d] = simplex[best][d] + 0.5 * (simplex[idx][d] - simplex[best][d]);
            }
            if evals >= budget {
                break;
            }
            fs[idx] = eval(&simplex[idx], &mut evals, &mut best_point, &mut best_value);
        }
    }
}

/// Minimizes the objective over a box with restart parallelism: Latin
/// hypercube starts (the first optionally replaced by an injected point),
/// support-repaired, each followed by a budgeted Nelder-Mead descent. Ties
/// between restarts break toward the lowest restart index.
pub fn multistart_minimize<F, S>(
    objective: &F,
    bounds: &[(f64, f64)],
    support: &S,
    config: &OptimizerConfig,
) -> Result<OptimOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
    S: Fn(&[f64]) -> bool + Sync,
{
    if bounds.is_empty() {
        return Err(Error::InvalidParameter {
            detail: "empty search space".into(),
        });
    }
    for (lo, hi) in bounds {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::InvalidParameter {
                detail: format!("invalid bound ({lo}, {hi})"),
            });
        }
    }
    config.validate(bounds.len())?;

    let mut starts = lhs_starts(bounds, config.n_starts, config.seed);
    if let Some(injected) = &config.injected_start {
        starts[0] = injected.clone();
    }
    let starts: Vec<Vec<f64>> = starts
        .into_iter()
        .enumerate()
        .map(|(idx, s)| {
            if idx == 0 && config.injected_start.is_some() {
                s
            } else {
                repair_start(s, bounds, support, config.seed, idx)
            }
        })
        .collect();

    let budget = (config.max_evals / config.n_starts).max(1) as u64;
    let tol = config.local_tol;
    let penalized = |x: &[f64]| {
        if support(x) {
            objective(x)
        } else {
            f64::INFINITY
        }
    };
    let results: Vec<RestartResult> = starts
        .par_iter()
        .map(|start| nelder_mead(&penalized, bounds, start, budget, tol))
        .collect();

    let mut evaluations = 0;
    let mut winner = 0;
    for (idx, r) in results.iter().enumerate() {
        evaluations += r.evaluations;
        if r.value < results[winner].value {
            winner = idx;
        }
    }
    let best = &results[winner];
    Ok(OptimOutcome {
        point: best.point.clone(),
        value: best.value,
        evaluations,
        converged: best.converged,
        budget_exhausted: !best.converged,
    })
}

/// A fitted baseline: criterion, location, score, and optimizer accounting.
#[derive(Clone, Debug)]
pub struct SelectorFit {
    pub criterion: SelectorKind,
    pub m: Vec<f64>,
    pub alpha: f64,
    pub score: f64,
    pub evaluations: u64,
    pub converged: bool,
    pub budget_exhausted: bool,
}

/// Fits a score criterion over (m, log10 alpha) inside the prior support.
pub fn minimize_selector(
    prob: &ProblemDefinition,
    criterion: SelectorKind,
    prior: &PriorSpec,
    config: &OptimizerConfig,
) -> Result<SelectorFit> {
    if criterion == SelectorKind::Cls {
        return Err(Error::InvalidParameter {
            detail: "the least-squares residual is fit per fixed alpha, not minimized freely"
                .into(),
        });
    }
    let q = prior.q();
    if prob.q() != q {
        return Err(Error::DimensionMismatch {
            context: "minimize_selector",
            expected: prob.q(),
            got: q,
        });
    }
    let mut bounds: Vec<(f64, f64)> = prior.m_box().to_vec();
    bounds.push(prior.log10_alpha_range());
    let support = |x: &[f64]| prior.contains(&x[..q], x[q]);
    let objective = |x: &[f64]| {
        let alpha = 10f64.powf(x[q]);
        let out = match criterion {
            SelectorKind::Gcv => gcv_score(prob, &x[..q], alpha),
            SelectorKind::Ml => ml_score(prob, &x[..q], alpha),
            SelectorKind::Cls => unreachable!(),
        };
        out.unwrap_or(f64::INFINITY)
    };
    let outcome = multistart_minimize(&objective, &bounds, &support, config)?;
    Ok(SelectorFit {
        criterion,
        m: outcome.point[..q].to_vec(),
        alpha: 10f64.powf(outcome.point[q]),
        score: outcome.value,
        evaluations: outcome.evaluations,
        converged: outcome.converged,
        budget_exhausted: outcome.budget_exhausted,
    })
}

/// For each listed alpha, minimizes the profiled quadratic
/// alpha <g, K g> + ||u - A g||^2 over m alone (the g minimization is exact).
pub fn cls_fixed_alpha_fit(
    prob: &ProblemDefinition,
    alpha_list: &[f64],
    prior: &PriorSpec,
    config: &OptimizerConfig,
) -> Result<Vec<SelectorFit>> {
    if alpha_list.is_empty() {
        return Err(Error::InvalidParameter {
            detail: "alpha list is empty".into(),
        });
    }
    let (lo, hi) = prior.log10_alpha_range();
    for &alpha in alpha_list {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter {
                detail: format!("alpha must be positive and finite, got {alpha}"),
            });
        }
        let a = alpha.log10();
        if a < lo || a > hi {
            return Err(Error::InvalidParameter {
                detail: format!("alpha {alpha} outside the prior range [1e{lo}, 1e{hi}]"),
            });
        }
    }
    let q = prior.q();
    let bounds: Vec<(f64, f64)> = prior.m_box().to_vec();
    let support = |x: &[f64]| prior.contains_m(x);
    let mut fits = Vec::with_capacity(alpha_list.len());
    for &alpha in alpha_list {
        let objective = |x: &[f64]| match profiled_factor(prob, x, alpha) {
            Ok(factor) => factor.quadratic(&prob.data().view()),
            Err(_) => f64::INFINITY,
        };
        let outcome = multistart_minimize(&objective, &bounds, &support, config)?;
        fits.push(SelectorFit {
            criterion: SelectorKind::Cls,
            m: outcome.point[..q].to_vec(),
            alpha,
            score: outcome.value,
            evaluations: outcome.evaluations,
            converged: outcome.converged,
            budget_exhausted: outcome.budget_exhausted,
        });
    }
    Ok(fits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ForwardOperator, RegularizerGram};
    use ndarray::{arr1, arr2, Array2};
    use std::sync::Arc;

    fn scalar_problem(u0: f64) -> ProblemDefinition {
        ProblemDefinition::new(
            arr1(&[u0]),
            RegularizerGram::identity(1),
            0,
            Arc::new(|_m: &[f64]| ForwardOperator::from_dense(arr2(&[[1.0]]))),
        )
        .unwrap()
    }

    fn fixed_problem(matrix: Array2<f64>, u: Vec<f64>) -> ProblemDefinition {
        let p = matrix.ncols();
        ProblemDefinition::new(
            arr1(&u),
            RegularizerGram::identity(p),
            0,
            Arc::new(move |_m: &[f64]| ForwardOperator::from_dense(matrix.clone())),
        )
        .unwrap()
    }

    #[test]
    fn scalar_scores_have_their_closed_forms() {
        let prob = scalar_problem(3.0);
        for &alpha in &[1e-4, 0.5, 10.0] {
            let gcv = gcv_score(&prob, &[], alpha).unwrap();
            let ml = ml_score(&prob, &[], alpha).unwrap();
            let cls = cls_residual(&prob, &[], alpha).unwrap();
            assert!((gcv - 9.0).abs() < 1e-12 * 9.0, "gcv {gcv} at {alpha}");
            assert!((ml - 9.0).abs() < 1e-12 * 9.0, "ml {ml} at {alpha}");
            let want = 9.0 * (alpha / (1.0 + alpha)).powi(2);
            assert!((cls - want).abs() < 1e-12 * want.max(1e-30), "cls {cls}");
        }
    }

    #[test]
    fn zero_operator_scores_reduce_to_data_norms() {
        let prob = fixed_problem(Array2::zeros((2, 3)), vec![3.0, -4.0]);
        let gcv = gcv_score(&prob, &[], 0.7).unwrap();
        let ml = ml_score(&prob, &[], 0.7).unwrap();
        let cls = cls_residual(&prob, &[], 0.7).unwrap();
        assert!((gcv - 25.0 / 4.0).abs() < 1e-12);
        assert!((ml - 25.0).abs() < 1e-11);
        assert!((cls - 25.0).abs() < 1e-12);
    }

    #[test]
    fn cls_residual_vanishes_with_alpha_on_full_row_rank_systems() {
        let a = arr2(&[[1.0, 0.4, -0.2, 0.9], [0.1, -1.2, 0.5, 0.3]]);
        let prob = fixed_problem(a, vec![1.0, 2.0]);
        let mut last = f64::INFINITY;
        let mut first = None;
        for &alpha in &[1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8] {
            let r = cls_residual(&prob, &[], alpha).unwrap();
            assert!(r < last, "residual not decreasing at {alpha}");
            if first.is_none() {
                first = Some(r);
            }
            last = r;
        }
        assert!(last < 1e-6 * first.unwrap());
    }

    #[test]
    fn bowl_minimum_is_recovered() {
        let objective =
            |x: &[f64]| (x[0] - 0.3) * (x[0] - 0.3) + 2.0 * (x[1] + 0.7) * (x[1] + 0.7);
        let mut config = OptimizerConfig::new(17);
        config.n_starts = 5;
        config.max_evals = 2500;
        config.local_tol = 1e-12;
        let out = multistart_minimize(
            &objective,
            &[(-2.0, 2.0), (-2.0, 2.0)],
            &|_: &[f64]| true,
            &config,
        )
        .unwrap();
        assert!(out.converged);
        assert!((out.point[0] - 0.3).abs() < 1e-3, "x0 {}", out.point[0]);
        assert!((out.point[1] + 0.7).abs() < 1e-3, "x1 {}", out.point[1]);
    }

    #[test]
    fn injected_start_documents_local_trapping() {
        // Double well with the global minimum near x = -1 and a local one
        // near x = 0.975.
        let objective = |x: &[f64]| {
            let s = x[0] * x[0] - 1.0;
            s * s + 0.2 * x[0]
        };
        let mut config = OptimizerConfig::new(5);
        config.n_starts = 1;
        config.max_evals = 500;
        config.local_tol = 1e-12;
        config.injected_start = Some(vec![0.9]);
        let out =
            multistart_minimize(&objective, &[(-2.0, 2.0)], &|_: &[f64]| true, &config).unwrap();
        assert!(out.point[0] > 0.9, "escaped the local well: {}", out.point[0]);
        let global = objective(&[-1.0]);
        assert!(out.value > global);
    }

    #[test]
    fn multistart_is_deterministic() {
        let objective = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() + (x[0] * 3.0).sin();
        let config = OptimizerConfig::new(99);
        let bounds = [(-3.0, 3.0), (-3.0, 3.0)];
        let a = multistart_minimize(&objective, &bounds, &|_: &[f64]| true, &config).unwrap();
        let b = multistart_minimize(&objective, &bounds, &|_: &[f64]| true, &config).unwrap();
        assert_eq!(a.point, b.point);
        assert_eq!(a.value, b.value);
        assert_eq!(a.evaluations, b.evaluations);
    }

    #[test]
    fn selector_fit_stays_inside_the_support() {
        let matrix = arr2(&[[0.9, 0.2, -0.4], [0.3, -0.8, 0.6]]);
        let prob = ProblemDefinition::new(
            arr1(&[1.0, -2.0]),
            RegularizerGram::identity(3),
            1,
            Arc::new(move |m: &[f64]| {
                let mut a = matrix.clone();
                a[[0, 0]] += m[0];
                ForwardOperator::from_dense(a)
            }),
        )
        .unwrap();
        let prior = PriorSpec::new(vec![(-1.0, 1.0)], (-4.0, 1.0))
            .unwrap()
            .with_support(Arc::new(|m: &[f64]| m[0] <= 0.5));
        let mut config = OptimizerConfig::new(12);
        config.n_starts = 6;
        config.max_evals = 600;
        for criterion in [SelectorKind::Gcv, SelectorKind::Ml] {
            let fit = minimize_selector(&prob, criterion, &prior, &config).unwrap();
            assert!(fit.m[0] >= -1.0 && fit.m[0] <= 0.5, "m {}", fit.m[0]);
            let a = fit.alpha.log10();
            assert!((-4.0..=1.0).contains(&a), "alpha {}", fit.alpha);
            assert!(fit.score.is_finite());
        }
    }

    #[test]
    fn cls_fits_run_per_alpha_and_validate_the_list() {
        // The operator ignores m, so the profiled quadratic is m-independent
        // and carries the scalar closed form.
        let prob = ProblemDefinition::new(
            arr1(&[2.0]),
            RegularizerGram::identity(1),
            1,
            Arc::new(|_m: &[f64]| ForwardOperator::from_dense(arr2(&[[1.0]]))),
        )
        .unwrap();
        let prior = PriorSpec::new(vec![(-1.0, 1.0)], (-5.0, 0.0)).unwrap();
        let mut config = OptimizerConfig::new(3);
        config.n_starts = 1;
        config.max_evals = 40;
        let fits =
            cls_fixed_alpha_fit(&prob, &[1e-4, 1e-3, 1e-2, 1e-1], &prior, &config).unwrap();
        assert_eq!(fits.len(), 4);
        for (fit, want) in fits.iter().zip([1e-4, 1e-3, 1e-2, 1e-1]) {
            assert_eq!(fit.alpha, want);
            assert_eq!(fit.criterion, SelectorKind::Cls);
            // Scalar problem: profiled quadratic is u0^2 alpha / (1 + alpha).
            let expect = 4.0 * want / (1.0 + want);
            assert!((fit.score - expect).abs() < 1e-12);
        }
        assert!(cls_fixed_alpha_fit(&prob, &[], &prior, &config).is_err());
        assert!(cls_fixed_alpha_fit(&prob, &[10.0], &prior, &config).is_err());
        assert!(minimize_selector(&prob, SelectorKind::Cls, &prior, &config).is_err());
    }

    #[test]
    fn empty_search_space_dimension_mismatches_are_rejected() {
        let objective = |_: &[f64]| 0.0;
        let config = OptimizerConfig::new(1);
        assert!(multistart_minimize(&objective, &[], &|_: &[f64]| true, &config).is_err());
        let mut bad = OptimizerConfig::new(1);
        bad.injected_start = Some(vec![0.0, 0.0]);
        assert!(multistart_minimize(&objective, &[(0.0, 1.0)], &|_: &[f64]| true, &bad).is_err());
    }
}
