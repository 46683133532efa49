//! Problem catalog: wires each named problem into a posterior evaluator with
//! a known ground truth and a recorded data realization.
//!
//! - `fault`: the synthetic fault-geometry benchmark (q = 6). Data are
//!   generated on a lattice twice as fine as the inversion lattice so the
//!   inversion never sees its own discretization.
//! - `toy_scalar`: q = 1, n = 20, p = 50. A Gaussian-kernel smoothing family
//!   whose single nonlinear parameter is the kernel width; small enough that
//!   the posterior can be tabulated on a dense grid.
//! - `dense_random`: q = 2, n = 8, p = 24. A fixed random dense family with
//!   smooth trigonometric dependence on both parameters.

use crate::config::{ExperimentConfig, ProblemKind};
use crate::CliError;
use geoinv::fault::{
    build_regularizer_gram, fault_operator_factory, fault_prior, generate_data, geometry_from_m,
    jittered_stations, synthesize_slip, FaultGeometry, GeneratedData, NoiseScenario, SlipField,
    SlipShape, FAULT_TRUE_M,
};
use geoinv::linalg::{ForwardOperator, RegularizerGram};
use geoinv::posterior::{OperatorFactory, PosteriorEvaluator, PriorSpec, ProblemDefinition};
use geoinv::rng::{substream, DOMAIN_NOISE};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

/// Fault-specific context kept around for depth and slip reporting.
pub struct FaultSetup {
    pub geom_true: FaultGeometry,
    pub grid_m: usize,
    pub stations: Vec<[f64; 2]>,
    pub shape: SlipShape,
    /// The synthesized truth on the fine data-generation lattice.
    pub slip_fine: SlipField,
    /// The same analytic bump sampled on the inversion lattice, for
    /// reconstruction comparisons.
    pub slip_coarse: SlipField,
}

/// A fully wired problem: evaluator, truth, and the data realization.
pub struct BuiltProblem {
    pub evaluator: PosteriorEvaluator,
    pub m_true: Vec<f64>,
    pub scenario: NoiseScenario,
    pub data: GeneratedData,
    pub fault: Option<FaultSetup>,
}

impl BuiltProblem {
    pub fn q(&self) -> usize {
        self.evaluator.problem().q()
    }
}

fn scenario_from_config(cfg: &ExperimentConfig) -> NoiseScenario {
    NoiseScenario {
        label: cfg.scenario_label.name(),
        fraction: cfg.scenario_fraction_value(),
        seed: cfg.scenario_seed,
    }
}

/// White noise at sigma = fraction * peak response, mirroring the fault data
/// generator for the analytic problem families.
fn noisy_data(u_free: Array1<f64>, scenario: &NoiseScenario) -> Result<GeneratedData, CliError> {
    let peak = u_free.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if peak == 0.0 {
        return Err(CliError::Numerical(
            "noise-free response is identically zero".into(),
        ));
    }
    let sigma = scenario.fraction * peak;
    let mut rng = substream(scenario.seed, 0, 0, DOMAIN_NOISE);
    let noise = Array1::from_shape_fn(u_free.len(), |_| {
        sigma * rng.sample::<f64, _>(StandardNormal)
    });
    let u = &u_free + &noise;
    let realized_relative_error = noise.dot(&noise).sqrt() / u_free.dot(&u_free).sqrt();
    Ok(GeneratedData {
        u_free,
        u,
        sigma,
        realized_relative_error,
    })
}

pub const TOY_N: usize = 20;
pub const TOY_P: usize = 50;
pub const TOY_M_TRUE: f64 = 0.7;

/// Gaussian-kernel forward matrix of the toy family: station grid on [0, 1]
/// against a source grid on [0, 1], kernel width m, rows scaled by the
/// source spacing so the row sums stay O(1).
pub fn toy_operator(m: f64) -> Array2<f64> {
    Array2::from_shape_fn((TOY_N, TOY_P), |(i, j)| {
        let t = (i as f64 + 0.5) / TOY_N as f64;
        let s = (j as f64 + 0.5) / TOY_P as f64;
        let d = t - s;
        (-d * d / (2.0 * m * m)).exp() / TOY_P as f64
    })
}

pub fn toy_truth_profile() -> Array1<f64> {
    Array1::from_shape_fn(TOY_P, |j| {
        let s = (j as f64 + 0.5) / TOY_P as f64;
        let a = (s - 0.3) / 0.08;
        let b = (s - 0.7) / 0.12;
        (-0.5 * a * a).exp() + 0.6 * (-0.5 * b * b).exp()
    })
}

fn build_toy(cfg: &ExperimentConfig) -> Result<BuiltProblem, CliError> {
    let scenario = scenario_from_config(cfg);
    let u_free = toy_operator(TOY_M_TRUE).dot(&toy_truth_profile());
    let data = noisy_data(u_free, &scenario)?;
    let factory: OperatorFactory =
        Arc::new(|m: &[f64]| ForwardOperator::from_dense(toy_operator(m[0])));
    let problem = ProblemDefinition::new(
        data.u.clone(),
        RegularizerGram::identity(TOY_P),
        1,
        factory,
    )?;
    let prior = PriorSpec::new(vec![(0.2, 1.8)], (-5.0, 0.0))?;
    Ok(BuiltProblem {
        evaluator: PosteriorEvaluator::new(problem, prior)?,
        m_true: vec![TOY_M_TRUE],
        scenario,
        data,
        fault: None,
    })
}

pub const DENSE_N: usize = 8;
pub const DENSE_P: usize = 24;
pub const DENSE_M_TRUE: [f64; 2] = [0.4, -0.8];

/// Fixed random dense family A(m) = A0 + sin(m1) A1 + cos(2 m2) A2.
pub fn dense_operator(m: &[f64]) -> Array2<f64> {
    let mut rng = geoinv_testkit::seeded_rng(2101);
    let mut bases = Vec::with_capacity(3);
    for _ in 0..3 {
        bases.push(geoinv_testkit::random_matrix(
            &mut rng, DENSE_N, DENSE_P, 1.0,
        ));
    }
    &bases[0] + &(&bases[1] * m[0].sin()) + &(&bases[2] * (2.0 * m[1]).cos())
}

fn build_dense(cfg: &ExperimentConfig) -> Result<BuiltProblem, CliError> {
    let scenario = scenario_from_config(cfg);
    let mut rng = geoinv_testkit::seeded_rng(2102);
    let g_true = Array1::from_shape_fn(DENSE_P, |_| rng.random::<f64>() * 2.0 - 1.0);
    let u_free = dense_operator(&DENSE_M_TRUE).dot(&g_true);
    let data = noisy_data(u_free, &scenario)?;
    let factory: OperatorFactory =
        Arc::new(|m: &[f64]| ForwardOperator::from_dense(dense_operator(m)));
    let problem = ProblemDefinition::new(
        data.u.clone(),
        RegularizerGram::identity(DENSE_P),
        2,
        factory,
    )?;
    let prior = PriorSpec::new(vec![(-1.5, 1.5), (-1.5, 1.5)], (-5.0, 0.0))?;
    Ok(BuiltProblem {
        evaluator: PosteriorEvaluator::new(problem, prior)?,
        m_true: DENSE_M_TRUE.to_vec(),
        scenario,
        data,
        fault: None,
    })
}

fn build_fault(cfg: &ExperimentConfig) -> Result<BuiltProblem, CliError> {
    let scenario = scenario_from_config(cfg);
    let grid_m = cfg.effective_grid_m();
    let geom_true = geometry_from_m(&FAULT_TRUE_M)?;
    let shape = SlipShape {
        center: (cfg.fault_slip_center_x1, cfg.fault_slip_center_x2),
        radius: cfg.fault_slip_radius,
        amplitude: cfg.fault_slip_amplitude,
    };
    // Synthesize the truth on a finer lattice than the inversion uses.
    let slip_fine = synthesize_slip(&geom_true, 2 * grid_m, &shape)?;
    let slip_coarse = synthesize_slip(&geom_true, grid_m, &shape)?;
    let stations = jittered_stations(cfg.effective_stations(), cfg.fault_station_seed);
    let data = generate_data(&geom_true, &slip_fine, &stations, &scenario)?;
    let gram = build_regularizer_gram(grid_m)?;
    let factory = fault_operator_factory(grid_m, stations.clone());
    let problem = ProblemDefinition::new(data.u.clone(), gram, 6, factory)?;
    Ok(BuiltProblem {
        evaluator: PosteriorEvaluator::new(problem, fault_prior())?,
        m_true: FAULT_TRUE_M.to_vec(),
        scenario,
        data,
        fault: Some(FaultSetup {
            geom_true,
            grid_m,
            stations,
            shape,
            slip_fine,
            slip_coarse,
        }),
    })
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<BuiltProblem, CliError> {
    match cfg.problem {
        ProblemKind::Fault => build_fault(cfg),
        ProblemKind::ToyScalar => build_toy(cfg),
        ProblemKind::DenseRandom => build_dense(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioLabel;

    #[test]
    fn toy_problem_has_the_documented_shape() {
        let cfg = ExperimentConfig {
            problem: ProblemKind::ToyScalar,
            ..ExperimentConfig::default()
        };
        let built = build_problem(&cfg).unwrap();
        assert_eq!(built.evaluator.problem().n(), TOY_N);
        assert_eq!(built.evaluator.problem().p(), TOY_P);
        assert_eq!(built.q(), 1);
        assert!(built
            .evaluator
            .prior()
            .contains(&built.m_true, -2.0));
        let ld = built
            .evaluator
            .log_posterior_point(&[TOY_M_TRUE, -2.0])
            .unwrap();
        assert!(ld.log_value.is_finite());
    }

    #[test]
    fn toy_data_is_reproducible_per_seed() {
        let cfg = ExperimentConfig {
            problem: ProblemKind::ToyScalar,
            scenario_seed: 11,
            ..ExperimentConfig::default()
        };
        let a = build_problem(&cfg).unwrap();
        let b = build_problem(&cfg).unwrap();
        assert_eq!(a.data.u.as_slice().unwrap(), b.data.u.as_slice().unwrap());
        let other = ExperimentConfig {
            scenario_seed: 12,
            ..cfg
        };
        let c = build_problem(&other).unwrap();
        assert_ne!(a.data.u.as_slice().unwrap(), c.data.u.as_slice().unwrap());
    }

    #[test]
    fn high_label_defaults_to_quarter_fraction() {
        let cfg = ExperimentConfig {
            problem: ProblemKind::ToyScalar,
            scenario_label: ScenarioLabel::High,
            ..ExperimentConfig::default()
        };
        let built = build_problem(&cfg).unwrap();
        let peak = built
            .data
            .u_free
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert_eq!(built.data.sigma, 0.25 * peak);
    }

    #[test]
    fn dense_family_is_smooth_and_fixed() {
        let a = dense_operator(&[0.3, 0.3]);
        let b = dense_operator(&[0.3, 0.3]);
        assert_eq!(a, b);
        let c = dense_operator(&[0.3 + 1e-7, 0.3]);
        let drift = (&c - &a).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(drift > 0.0 && drift < 1e-5);
    }

    #[test]
    fn fault_truth_slip_lattices_cover_both_resolutions() {
        let cfg = ExperimentConfig {
            fault_grid_m: 9,
            fault_stations: 6,
            ..ExperimentConfig::default()
        };
        let built = build_problem(&cfg).unwrap();
        let setup = built.fault.as_ref().unwrap();
        assert_eq!(setup.slip_fine.grid_m, 18);
        assert_eq!(setup.slip_coarse.grid_m, 9);
        assert_eq!(built.evaluator.problem().p(), 81);
        assert_eq!(built.evaluator.problem().n(), 18);
    }
}
