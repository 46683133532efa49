//! Temporary diagnostic; not part of the suite.

use geoinv::fault::FAULT_TRUE_M;
use geoinv::sampler::Target;
use geoinv_cli::config::{ExperimentConfig, ProblemKind, ScenarioLabel};
use geoinv_cli::problems::build_problem;

fn desk_cfg(label: ScenarioLabel) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.problem = ProblemKind::Fault;
    cfg.scenario_label = label;
    cfg.scenario_seed = 3;
    cfg.fault_grid_m = 41;
    cfg.fault_stations = 65;
    cfg.fault_station_seed = 7;
    cfg
}

#[test]
#[ignore]
fn short_desk_runs() {
    use geoinv::sampler::{parallel_chain_run, SamplerConfig};
    for seed in [3u64, 5, 9] {
        let mut cfg = desk_cfg(ScenarioLabel::Low);
        cfg.scenario_seed = seed;
        let built = build_problem(&cfg).unwrap();
        let mut sc = SamplerConfig::new(42);
        sc.n_steps = 1200;
        sc.n_parallel = 8;
        sc.cov_update_every = 100;
        sc.burn_in_draws = 500;
        let t0 = std::time::Instant::now();
        let history = parallel_chain_run(&built.evaluator, &sc, None).unwrap();
        let (mean, std) = history.mean_and_std(241);
        let err: Vec<f64> = (0..6).map(|d| mean[d] - FAULT_TRUE_M[d]).collect();
        println!(
            "seed {seed}: acc {:.3} in {:.0} s\n  mean {:?}\n  err {:?}\n  std {:?}\n  alpha {:.2}",
            history.acceptance_rate(),
            t0.elapsed().as_secs_f64(),
            &mean[..6].iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>(),
            err.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>(),
            &std[..6].iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>(),
            mean[6]
        );
    }
}

#[test]
#[ignore]
fn unclipped_alpha() {
    use geoinv::fault::build_regularizer_gram;
    use geoinv::linalg::{ReducedGram, RegularizerGram};
    for label in [ScenarioLabel::Low, ScenarioLabel::High] {
        let cfg = desk_cfg(label);
        let built = build_problem(&cfg).unwrap();
        let op = built.evaluator.problem().operator(&FAULT_TRUE_M).unwrap();
        let gram: RegularizerGram = build_regularizer_gram(cfg.effective_grid_m()).unwrap();
        let rg = ReducedGram::new(&op, &gram).unwrap();
        let u = built.data.u.clone();
        let n = u.len() as f64;
        let mut best = f64::NEG_INFINITY;
        let mut best_a = f64::NAN;
        for i in 0..=180 {
            let la = -5.0 + 9.0 * i as f64 / 180.0;
            let lr = rg.factor(10f64.powf(la)).unwrap();
            let ev = -0.5 * lr.logdet() - 0.5 * n * lr.quadratic(&u.view()).ln();
            if ev > best {
                best = ev;
                best_a = la;
            }
        }
        println!("{label:?}: unclipped best log10_alpha {best_a:+.2} (evidence {best:.1})");
    }
    // Spectrum scale of G = A K^{-1} A' at the truth.
    let cfg = desk_cfg(ScenarioLabel::Low);
    let built = build_problem(&cfg).unwrap();
    let op = built.evaluator.problem().operator(&FAULT_TRUE_M).unwrap();
    let gram = build_regularizer_gram(cfg.effective_grid_m()).unwrap();
    let a = op.matrix();
    let p = a.ncols();
    let mut kinv_at = ndarray::Array2::zeros((p, a.nrows()));
    for (j, col) in a.t().axis_iter(ndarray::Axis(1)).enumerate() {
        let x = gram.solve(&col);
        kinv_at.column_mut(j).assign(&x);
    }
    let g = a.dot(&kinv_at);
    let eigs = geoinv_testkit::sym_eigenvalues(&g.view());
    let top: Vec<f64> = eigs.iter().rev().take(5).cloned().collect();
    println!("top eig(G): {top:?}");
    println!(
        "eig quartiles: {:.3e} {:.3e} {:.3e}",
        eigs[eigs.len() / 4],
        eigs[eigs.len() / 2],
        eigs[3 * eigs.len() / 4]
    );
}

#[test]
#[ignore]
fn radius_sweep() {
    for radius in [80.0, 60.0, 45.0, 35.0] {
        for label in [ScenarioLabel::Low, ScenarioLabel::High] {
            let mut cfg = desk_cfg(label);
            cfg.fault_slip_radius = radius;
            let built = build_problem(&cfg).unwrap();
            let eval = &built.evaluator;
            let mut best = f64::NEG_INFINITY;
            let mut best_a = f64::NAN;
            for i in 0..129 {
                let a = -5.0 + 5.0 * i as f64 / 128.0;
                let mut x = FAULT_TRUE_M.to_vec();
                x.push(a);
                if let Ok(ld) = eval.log_density(&x) {
                    if ld > best {
                        best = ld;
                        best_a = a;
                    }
                }
            }
            println!(
                "radius {radius:>5}: {:?} rel_err {:.3} best log10_alpha {best_a:+.2} ld {best:.1}",
                label, built.data.realized_relative_error
            );
        }
    }
}

#[test]
#[ignore]
fn density_landscape() {
    let built = build_problem(&desk_cfg(ScenarioLabel::Low)).unwrap();
    let eval = &built.evaluator;
    let mut best_truth = f64::NEG_INFINITY;
    let mut best_a = 0.0;
    for i in 0..101 {
        let a = -5.0 + 5.0 * i as f64 / 100.0;
        let mut x = FAULT_TRUE_M.to_vec();
        x.push(a);
        if let Ok(ld) = eval.log_density(&x) {
            if ld > best_truth {
                best_truth = ld;
                best_a = a;
            }
        }
    }
    println!("truth: best ld {best_truth:.3} at log10_alpha {best_a:.2}");

    let stuck = [
        -28.339760090203775,
        91.05970395439205,
        -31.989948467975342,
        -79.97749560453272,
        -26.601678627494298,
        -82.45604566082443,
        -0.21564734367964739,
    ];
    println!("stuck point ld {:.3}", eval.log_density(&stuck).unwrap());

    // Line search from the stuck point toward the truth.
    for t in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
        let mut x: Vec<f64> = (0..6)
            .map(|d| stuck[d] + t * (FAULT_TRUE_M[d] - stuck[d]))
            .collect();
        x.push(stuck[6] + t * (best_a - stuck[6]));
        match eval.log_density(&x) {
            Ok(ld) => println!("t={t:.1}: ld {ld:.3}"),
            Err(e) => println!("t={t:.1}: error {e}"),
        }
    }
}

#[test]
#[ignore]
fn cls_landscape() {
    use geoinv::selector::cls_residual;
    let mut cfg = ExperimentConfig::default();
    cfg.problem = ProblemKind::ToyScalar;
    cfg.scenario_label = ScenarioLabel::Low;
    cfg.scenario_seed = 3;
    let built = build_problem(&cfg).unwrap();
    let prob = built.evaluator.problem();
    for alpha in [1e-4f64, 1e-3, 1e-2, 1e-1] {
        let mut vals = Vec::new();
        for i in 0..=45 {
            let m = 0.2 + 1.6 * i as f64 / 45.0;
            vals.push((m, cls_residual(prob, &[m], alpha).unwrap()));
        }
        let best = vals
            .iter()
            .cloned()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        println!("alpha {alpha:e}: coarse argmin {:.3} (res {:.6e})", best.0, best.1);
        for (m, v) in vals.iter().step_by(5) {
            println!("   m {m:.3} res {v:.6e}");
        }
        println!(
            "   fine: res(0.680) {:.9e}  res(0.734) {:.9e}",
            cls_residual(prob, &[0.680], alpha).unwrap(),
            cls_residual(prob, &[0.7343229166666659], alpha).unwrap()
        );
    }
}
