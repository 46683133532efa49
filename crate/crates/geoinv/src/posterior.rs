//! The noise-marginalized log posterior over (m, alpha).
//!
//! For data u = A_m g + noise with unknown noise scale, maximizing the
//! likelihood over sigma in closed form leaves a density over the nonlinear
//! parameter m and the regularization weight alpha alone:
//!
//! ```text
//! log R(m, alpha) = -1/2 log det B - (n/2) log misfit + log prior(m, alpha)
//! ```
//!
//! with B and the misfit quadratic from [`crate::linalg`]. Densities are kept
//! in natural-log space throughout; the samplers walk in a = log10(alpha).

use crate::error::{Error, Result};
use crate::linalg::{ForwardOperator, LowRankFactor, RegularizerGram, ReducedGram};
use ndarray::{Array1, Array2};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// Builds the forward operator for a given nonlinear parameter.
pub type OperatorFactory = Arc<dyn Fn(&[f64]) -> Result<ForwardOperator> + Send + Sync>;

/// Extra support constraint on m beyond the box.
pub type SupportPredicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Uniform prior on a box in m, an interval in log10(alpha), and an optional
/// extra predicate on m.
#[derive(Clone)]
pub struct PriorSpec {
    m_box: Vec<(f64, f64)>,
    log10_alpha_range: (f64, f64),
    support: Option<SupportPredicate>,
}

impl PriorSpec {
    pub fn new(m_box: Vec<(f64, f64)>, log10_alpha_range: (f64, f64)) -> Result<Self> {
        if m_box.is_empty() {
            return Err(Error::InvalidParameter {
                detail: "prior box must have at least one dimension".into(),
            });
        }
        for &(lo, hi) in &m_box {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter {
                    detail: format!("invalid prior box interval [{lo}, {hi}]"),
                });
            }
        }
        let (alo, ahi) = log10_alpha_range;
        if !(alo.is_finite() && ahi.is_finite() && alo <= ahi) {
            return Err(Error::InvalidParameter {
                detail: format!("invalid log10 alpha range [{alo}, {ahi}]"),
            });
        }
        Ok(PriorSpec {
            m_box,
            log10_alpha_range,
            support: None,
        })
    }

    pub fn with_support(mut self, predicate: SupportPredicate) -> Self {
        self.support = Some(predicate);
        self
    }

    pub fn q(&self) -> usize {
        self.m_box.len()
    }

    pub fn m_box(&self) -> &[(f64, f64)] {
        &self.m_box
    }

    pub fn log10_alpha_range(&self) -> (f64, f64) {
        self.log10_alpha_range
    }

    /// Box and predicate test for m alone.
    pub fn contains_m(&self, m: &[f64]) -> bool {
        if m.len() != self.m_box.len() {
            return false;
        }
        for (v, &(lo, hi)) in m.iter().zip(&self.m_box) {
            if !(*v >= lo && *v <= hi) {
                return false;
            }
        }
        match &self.support {
            Some(pred) => pred(m),
            None => true,
        }
    }

    /// Full support test at (m, log10 alpha).
    pub fn contains(&self, m: &[f64], log10_alpha: f64) -> bool {
        let (alo, ahi) = self.log10_alpha_range;
        log10_alpha >= alo && log10_alpha <= ahi && self.contains_m(m)
    }

    /// Log prior density: 0 inside the support, -inf outside.
    pub fn log_density(&self, m: &[f64], log10_alpha: f64) -> f64 {
        if self.contains(m, log10_alpha) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Draws (m, log10 alpha) uniformly on the support by rejection.
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> Result<Vec<f64>> {
        const MAX_ATTEMPTS: u64 = 1_000_000;
        let q = self.q();
        for _attempt in 0..MAX_ATTEMPTS {
            let mut x = Vec::with_capacity(q + 1);
            for &(lo, hi) in &self.m_box {
                x.push(lo + rng.random::<f64>() * (hi - lo));
            }
            let (alo, ahi) = self.log10_alpha_range;
            x.push(alo + rng.random::<f64>() * (ahi - alo));
            if self.contains_m(&x[..q]) {
                return Ok(x);
            }
        }
        Err(Error::EmptySupport {
            attempts: MAX_ATTEMPTS,
        })
    }
}

/// The inverse problem: data, regularizer gram, and the operator family.
#[derive(Clone)]
pub struct ProblemDefinition {
    data_u: Array1<f64>,
    gram: RegularizerGram,
    q: usize,
    operator_factory: OperatorFactory,
}

impl ProblemDefinition {
    pub fn new(
        data_u: Array1<f64>,
        gram: RegularizerGram,
        q: usize,
        operator_factory: OperatorFactory,
    ) -> Result<Self> {
        if !data_u.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter {
                detail: "data vector has non-finite entries".into(),
            });
        }
        if data_u.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidParameter {
                detail: "data vector must be nonzero".into(),
            });
        }
        Ok(ProblemDefinition {
            data_u,
            gram,
            q,
            operator_factory,
        })
    }

    pub fn n(&self) -> usize {
        self.data_u.len()
    }

    pub fn p(&self) -> usize {
        self.gram.p()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn data(&self) -> &Array1<f64> {
        &self.data_u
    }

    pub fn gram(&self) -> &RegularizerGram {
        &self.gram
    }

    /// Builds A_m and checks its shape against the problem.
    pub fn operator(&self, m: &[f64]) -> Result<ForwardOperator> {
        if m.len() != self.q {
            return Err(Error::DimensionMismatch {
                context: "ProblemDefinition::operator",
                expected: self.q,
                got: m.len(),
            });
        }
        let op = (self.operator_factory)(m)?;
        if op.n() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "ProblemDefinition::operator rows",
                expected: self.n(),
                got: op.n(),
            });
        }
        if op.p() != self.p() {
            return Err(Error::DimensionMismatch {
                context: "ProblemDefinition::operator columns",
                expected: self.p(),
                got: op.p(),
            });
        }
        Ok(op)
    }
}

/// One posterior evaluation, with the intermediate terms exposed.
#[derive(Clone, Copy, Debug)]
pub struct LogDensityValue {
    pub log_value: f64,
    pub sigma_max_sq: f64,
    pub misfit: f64,
    pub logdet: f64,
}

impl LogDensityValue {
    fn outside_support() -> Self {
        LogDensityValue {
            log_value: f64::NEG_INFINITY,
            sigma_max_sq: f64::NAN,
            misfit: f64::NAN,
            logdet: f64::NAN,
        }
    }
}

/// Evaluates log R(m, alpha). Construction caches nothing beyond what the
/// problem already holds; evaluations are pure and safe to run concurrently.
pub struct PosteriorEvaluator {
    problem: ProblemDefinition,
    prior: PriorSpec,
    clamp_events: AtomicU64,
}

impl PosteriorEvaluator {
    pub fn new(problem: ProblemDefinition, prior: PriorSpec) -> Result<Self> {
        if prior.q() != problem.q() {
            return Err(Error::DimensionMismatch {
                context: "PosteriorEvaluator::new",
                expected: problem.q(),
                got: prior.q(),
            });
        }
        Ok(PosteriorEvaluator {
            problem,
            prior,
            clamp_events: AtomicU64::new(0),
        })
    }

    pub fn problem(&self) -> &ProblemDefinition {
        &self.problem
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    /// Number of evaluations whose misfit had to be clamped away from zero.
    pub fn clamp_events(&self) -> u64 {
        self.clamp_events.load(Ordering::Relaxed)
    }

    fn value_from_parts(&self, misfit_raw: f64, logdet: f64) -> LogDensityValue {
        let n = self.problem.n() as f64;
        let u = self.problem.data();
        let floor = f64::EPSILON * u.dot(u);
        let misfit = if misfit_raw > floor {
            misfit_raw
        } else {
            self.clamp_events.fetch_add(1, Ordering::Relaxed);
            floor
        };
        LogDensityValue {
            log_value: -0.5 * logdet - 0.5 * n * misfit.ln(),
            sigma_max_sq: misfit / n,
            misfit,
            logdet,
        }
    }

    /// log R(m, alpha). Outside the prior support returns
    /// log_value = -inf without building the operator.
    pub fn log_posterior(&self, m: &[f64], alpha: f64) -> Result<LogDensityValue> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter {
                detail: format!("alpha must be positive and finite, got {alpha}"),
            });
        }
        if !self.prior.contains(m, alpha.log10()) {
            return Ok(LogDensityValue::outside_support());
        }
        let op = self.problem.operator(m)?;
        let factor = ReducedGram::new(&op, self.problem.gram())?.factor(alpha)?;
        Ok(self.evaluate_factor(&factor))
    }

    fn evaluate_factor(&self, factor: &LowRankFactor) -> LogDensityValue {
        let misfit_raw = factor.quadratic(&self.problem.data().view());
        self.value_from_parts(misfit_raw, factor.logdet())
    }

    /// log R at a sampler state x = (m..., log10 alpha).
    pub fn log_posterior_point(&self, x: &[f64]) -> Result<LogDensityValue> {
        let q = self.problem.q();
        if x.len() != q + 1 {
            return Err(Error::DimensionMismatch {
                context: "PosteriorEvaluator::log_posterior_point",
                expected: q + 1,
                got: x.len(),
            });
        }
        let a = x[q];
        if !a.is_finite() {
            return Err(Error::InvalidParameter {
                detail: format!("log10 alpha must be finite, got {a}"),
            });
        }
        if !self.prior.contains(&x[..q], a) {
            return Ok(LogDensityValue::outside_support());
        }
        self.log_posterior(&x[..q], 10f64.powf(a))
    }

    /// The likelihood-maximizing noise variance misfit/n at (m, alpha).
    pub fn sigma_max_sq(&self, m: &[f64], alpha: f64) -> Result<f64> {
        Ok(self.log_posterior(m, alpha)?.sigma_max_sq)
    }
}

/// The log marginal likelihood of the data at a trial noise scale sigma,
/// given the misfit and determinant terms of an evaluation at (m, alpha):
///
/// ```text
/// -(n/2) ln(2 pi sigma^2) - misfit / (2 sigma^2) - 1/2 log det B
/// ```
///
/// As a function of sigma this peaks exactly at sqrt(misfit / n).
pub fn log_likelihood_sigma(n: usize, misfit: f64, logdet: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    -0.5 * n as f64 * (2.0 * std::f64::consts::PI * s2).ln() - misfit / (2.0 * s2) - 0.5 * logdet
}

/// Log posterior tabulated on an outer product of m points and log10 alpha
/// values, reusing the per-m operator across the alpha sweep. Failed nodes
/// are recorded and left as NaN.
pub struct PosteriorGrid {
    pub log_values: Array2<f64>,
    pub failures: Vec<(usize, usize, String)>,
}

pub fn posterior_grid(
    eval: &PosteriorEvaluator,
    m_points: &[Vec<f64>],
    log10_alphas: &[f64],
) -> PosteriorGrid {
    let mut log_values = Array2::from_elem((m_points.len(), log10_alphas.len()), f64::NAN);
    let mut failures = Vec::new();
    for (i, m) in m_points.iter().enumerate() {
        let in_m = eval.prior().contains_m(m);
        let core = if in_m {
            match eval
                .problem()
                .operator(m)
                .and_then(|op| ReducedGram::new(&op, eval.problem().gram()))
            {
                Ok(core) => Some(core),
                Err(e) => {
                    for j in 0..log10_alphas.len() {
                        failures.push((i, j, e.to_string()));
                    }
                    continue;
                }
            }
        } else {
            None
        };
        for (j, &a) in log10_alphas.iter().enumerate() {
            if !eval.prior().contains(m, a) {
                log_values[[i, j]] = f64::NEG_INFINITY;
                continue;
            }
            let core = core.as_ref().expect("in-support m has a reduced gram");
            match core.factor(10f64.powf(a)) {
                Ok(factor) => {
                    log_values[[i, j]] = eval.evaluate_factor(&factor).log_value;
                }
                Err(e) => failures.push((i, j, e.to_string())),
            }
        }
    }
    PosteriorGrid {
        log_values,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::sync::atomic::AtomicUsize;

    fn scalar_problem(u0: f64) -> ProblemDefinition {
        let factory: OperatorFactory =
            Arc::new(|_m| ForwardOperator::from_dense(array![[1.0]]));
        ProblemDefinition::new(array![u0], RegularizerGram::identity(1), 1, factory).unwrap()
    }

    fn flat_prior(q: usize) -> PriorSpec {
        PriorSpec::new(vec![(-10.0, 10.0); q], (-6.0, 3.0)).unwrap()
    }

    #[test]
    fn scalar_posterior_is_alpha_independent() {
        // n = p = 1, A = [1]: log R = -ln|u0| for every alpha.
        let eval = PosteriorEvaluator::new(scalar_problem(2.5), flat_prior(1)).unwrap();
        for &alpha in &[1e-4, 1.0, 100.0] {
            let v = eval.log_posterior(&[0.0], alpha).unwrap();
            assert!(
                (v.log_value + 2.5f64.ln()).abs() < 1e-12,
                "alpha {alpha}: {}",
                v.log_value
            );
            let expect_s2 = 2.5 * 2.5 * alpha / (1.0 + alpha);
            assert!((v.sigma_max_sq - expect_s2).abs() < 1e-12 * expect_s2);
        }
    }

    #[test]
    fn sigma_max_sq_is_misfit_over_n() {
        let eval = PosteriorEvaluator::new(scalar_problem(-1.5), flat_prior(1)).unwrap();
        let v = eval.log_posterior(&[0.0], 0.7).unwrap();
        assert_eq!(v.sigma_max_sq, v.misfit / 1.0);
        assert_eq!(eval.sigma_max_sq(&[0.0], 0.7).unwrap(), v.sigma_max_sq);
    }

    #[test]
    fn out_of_support_short_circuits_without_building_operator() {
        let builds = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&builds);
        let factory: OperatorFactory = Arc::new(move |_m| {
            counter.fetch_add(1, Ordering::Relaxed);
            ForwardOperator::from_dense(array![[1.0]])
        });
        let problem =
            ProblemDefinition::new(array![1.0], RegularizerGram::identity(1), 1, factory).unwrap();
        let eval = PosteriorEvaluator::new(problem, flat_prior(1)).unwrap();

        let v = eval.log_posterior(&[25.0], 1.0).unwrap();
        assert_eq!(v.log_value, f64::NEG_INFINITY);
        assert!(v.misfit.is_nan());
        assert_eq!(builds.load(Ordering::Relaxed), 0);

        let v = eval.log_posterior_point(&[0.0, -20.0]).unwrap();
        assert_eq!(v.log_value, f64::NEG_INFINITY);
        assert_eq!(builds.load(Ordering::Relaxed), 0);

        assert!(eval.log_posterior(&[0.0], 1.0).unwrap().log_value.is_finite());
        assert_eq!(builds.load(Ordering::Relaxed), 1);
    }

    #[test]
    fn walk_coordinate_is_log10_alpha() {
        let eval = PosteriorEvaluator::new(scalar_problem(2.0), flat_prior(1)).unwrap();
        let via_point = eval.log_posterior_point(&[0.0, -2.0]).unwrap();
        let via_alpha = eval.log_posterior(&[0.0], 1e-2).unwrap();
        assert_eq!(via_point.log_value, via_alpha.log_value);
        assert_eq!(via_point.misfit, via_alpha.misfit);
    }

    #[test]
    fn misfit_clamp_counts_and_keeps_value_finite() {
        let eval = PosteriorEvaluator::new(scalar_problem(1.0), flat_prior(1)).unwrap();
        assert_eq!(eval.clamp_events(), 0);
        let v = eval.value_from_parts(0.0, 0.3);
        assert!(v.log_value.is_finite());
        assert!(v.misfit > 0.0);
        assert_eq!(eval.clamp_events(), 1);
        let _ = eval.value_from_parts(-1e-20, 0.3);
        assert_eq!(eval.clamp_events(), 2);
    }

    #[test]
    fn prior_sampling_respects_predicate_and_point_mass() {
        let mut rng = crate::rng::substream(9, 0, 0, crate::rng::DOMAIN_PRIOR);
        let prior = PriorSpec::new(vec![(2.0, 2.0), (-1.0, 1.0)], (-3.0, -3.0)).unwrap();
        for _ in 0..20 {
            let x = prior.sample(&mut rng).unwrap();
            assert_eq!(x[0], 2.0);
            assert!(x[1] >= -1.0 && x[1] <= 1.0);
            assert_eq!(x[2], -3.0);
            assert!(prior.contains(&x[..2], x[2]));
        }

        let never = PriorSpec::new(vec![(0.0, 1.0)], (0.0, 1.0))
            .unwrap()
            .with_support(Arc::new(|_| false));
        assert!(matches!(
            never.sample(&mut rng),
            Err(Error::EmptySupport { .. })
        ));
    }

    #[test]
    fn grid_single_node_equals_direct_evaluation() {
        let eval = PosteriorEvaluator::new(scalar_problem(3.0), flat_prior(1)).unwrap();
        let grid = posterior_grid(&eval, &[vec![0.5]], &[-1.0]);
        assert!(grid.failures.is_empty());
        let direct = eval.log_posterior_point(&[0.5, -1.0]).unwrap();
        assert_eq!(grid.log_values[[0, 0]], direct.log_value);
    }

    #[test]
    fn grid_marks_out_of_support_nodes() {
        let eval = PosteriorEvaluator::new(scalar_problem(3.0), flat_prior(1)).unwrap();
        let grid = posterior_grid(&eval, &[vec![0.0], vec![50.0]], &[-1.0, 9.0]);
        assert!(grid.failures.is_empty());
        assert!(grid.log_values[[0, 0]].is_finite());
        assert_eq!(grid.log_values[[0, 1]], f64::NEG_INFINITY);
        assert_eq!(grid.log_values[[1, 0]], f64::NEG_INFINITY);
        assert_eq!(grid.log_values[[1, 1]], f64::NEG_INFINITY);
    }

    #[test]
    fn sigma_likelihood_peaks_at_sigma_max() {
        let eval = PosteriorEvaluator::new(scalar_problem(1.7), flat_prior(1)).unwrap();
        let v = eval.log_posterior(&[0.0], 0.3).unwrap();
        let s_max = v.sigma_max_sq.sqrt();
        let at_max = log_likelihood_sigma(1, v.misfit, v.logdet, s_max);
        for &f in &[0.5, 0.9, 1.1, 2.0] {
            assert!(log_likelihood_sigma(1, v.misfit, v.logdet, s_max * f) < at_max);
        }
    }

    #[test]
    fn rejects_zero_data_and_mismatched_prior() {
        let factory: OperatorFactory =
            Arc::new(|_m| ForwardOperator::from_dense(array![[1.0]]));
        assert!(ProblemDefinition::new(
            array![0.0],
            RegularizerGram::identity(1),
            1,
            factory
        )
        .is_err());

        let eval = PosteriorEvaluator::new(scalar_problem(1.0), flat_prior(2));
        assert!(matches!(eval, Err(Error::DimensionMismatch { .. })));
    }
}
