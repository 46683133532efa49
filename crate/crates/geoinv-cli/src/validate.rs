//! Runtime self-check suite (the `validate` verb). Each check re-derives a
//! core identity through an independent dense or closed-form route on seeded
//! instances and prints one PASS/FAIL line; any failure exits with the
//! numerical-failure code.

use crate::CliError;
use geoinv::fault::{fault_prior, geometry_from_m, FAULT_TRUE_M, S_MAX, S_MIN};
use geoinv::linalg::{solve_regularized, ForwardOperator, RegularizerGram, ReducedGram};
use geoinv::posterior::log_likelihood_sigma;
use geoinv::sampler::build_transition_matrix;
use geoinv::selector::{cls_residual, gcv_score, ml_score};
use geoinv_testkit as tk;
use ndarray::{Array1, Array2};
use rand::Rng;
use std::sync::Arc;

pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, failures: Vec<String>, cases: usize) -> CheckOutcome {
    if failures.is_empty() {
        CheckOutcome {
            name,
            passed: true,
            detail: format!("{cases} cases"),
        }
    } else {
        CheckOutcome {
            name,
            passed: false,
            detail: failures.join("; "),
        }
    }
}

fn random_instance(
    seed: u64,
) -> (Array2<f64>, RegularizerGram, Array2<f64>, Array1<f64>, f64) {
    let mut rng = tk::seeded_rng(seed);
    let n = 1 + (rng.random::<f64>() * 6.0) as usize;
    let p = 1 + (rng.random::<f64>() * 10.0) as usize;
    let a = tk::random_matrix(&mut rng, n, p, 1.0);
    let (gram, k_dense) = if seed % 2 == 0 {
        (RegularizerGram::identity(p), Array2::eye(p))
    } else {
        let k = tk::random_spd(&mut rng, p, 0.5);
        (RegularizerGram::dense(k.clone()).unwrap(), k)
    };
    let u = Array1::from_shape_fn(n, |_| rng.random::<f64>() * 2.0 - 1.0);
    let alpha = 10f64.powf(-6.0 + 8.0 * rng.random::<f64>());
    (a, gram, k_dense, u, alpha)
}

/// Dense B = I + A K^{-1} A' / alpha.
fn dense_b(a: &Array2<f64>, k: &Array2<f64>, alpha: f64) -> Array2<f64> {
    let kinv = tk::invert_dense(&k.view());
    let mut b = a.dot(&kinv).dot(&a.t()) / alpha;
    for i in 0..b.nrows() {
        b[[i, i]] += 1.0;
    }
    b
}

fn check_low_rank_identities() -> CheckOutcome {
    let mut failures = Vec::new();
    let cases = 24;
    for seed in 0..cases {
        let (a, gram, k, u, alpha) = random_instance(1000 + seed);
        let op = ForwardOperator::from_dense(a.clone()).unwrap();
        let lr = match ReducedGram::new(&op, &gram).and_then(|g| g.factor(alpha)) {
            Ok(lr) => lr,
            Err(e) => {
                failures.push(format!("seed {seed}: factorization failed: {e}"));
                continue;
            }
        };
        let b = dense_b(&a, &k, alpha);
        let (sign, ld_dense) = tk::Lu::factor(&b.view()).unwrap().logabsdet();
        let ld = lr.logdet();
        if sign != 1.0 || (ld - ld_dense).abs() > 1e-9 * (1.0 + ld.abs()) {
            failures.push(format!("seed {seed}: logdet {ld} vs {ld_dense}"));
        }
        let q = lr.quadratic(&u.view());
        let q_dense = u.dot(&tk::solve_dense(&b.view(), &u.view()));
        if (q - q_dense).abs() > 1e-8 * (1.0 + q_dense.abs()) {
            failures.push(format!("seed {seed}: quadratic {q} vs {q_dense}"));
        }
        let g = solve_regularized(&op, &gram, alpha, &u.view()).unwrap();
        let r = &u - &a.dot(&g);
        let energy = alpha * g.dot(&gram.apply(&g.view())) + r.dot(&r);
        if (q - energy).abs() > 1e-8 * (1.0 + q.abs()) {
            failures.push(format!("seed {seed}: energy {energy} vs {q}"));
        }
    }
    outcome(
        "low-rank determinant/solve/energy identities",
        failures,
        cases as usize,
    )
}

fn check_sigma_stationarity() -> CheckOutcome {
    let mut failures = Vec::new();
    let cases = 10;
    for seed in 0..cases {
        let (a, gram, _, u, alpha) = random_instance(2000 + seed);
        let n = a.nrows();
        let op = ForwardOperator::from_dense(a).unwrap();
        let lr = ReducedGram::new(&op, &gram)
            .and_then(|g| g.factor(alpha))
            .unwrap();
        let misfit = lr.quadratic(&u.view());
        let logdet = lr.logdet();
        if !(misfit > 0.0) {
            failures.push(format!("seed {seed}: misfit {misfit} not positive"));
            continue;
        }
        let s_max = (misfit / n as f64).sqrt();
        let lo = (s_max / 10.0).ln();
        let hi = (s_max * 10.0).ln();
        let points = 200;
        let sigmas: Vec<f64> = (0..points)
            .map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp())
            .collect();
        let argmax = sigmas
            .iter()
            .enumerate()
            .max_by(|(_, x), (_, y)| {
                log_likelihood_sigma(n, misfit, logdet, **x)
                    .partial_cmp(&log_likelihood_sigma(n, misfit, logdet, **y))
                    .unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        let step = (hi - lo) / (points - 1) as f64;
        let dist = (sigmas[argmax].ln() - s_max.ln()).abs();
        if dist > 0.5 * step * (1.0 + 1e-9) {
            failures.push(format!("seed {seed}: argmax {dist} from sigma_max"));
        }
        let h = 1e-4 * s_max;
        let fd = (log_likelihood_sigma(n, misfit, logdet, s_max + h)
            - log_likelihood_sigma(n, misfit, logdet, s_max - h))
            / (2.0 * h);
        if (fd * s_max / n as f64).abs() > 1e-6 {
            failures.push(format!("seed {seed}: derivative {fd} at sigma_max"));
        }
    }
    outcome("noise-scale profile peaks at its closed form", failures, cases as usize)
}

fn check_transition_rows() -> CheckOutcome {
    let mut failures = Vec::new();
    let cases = 500;
    let mut rng = tk::seeded_rng(77);
    for case in 0..cases {
        let size = 2 + (rng.random::<f64>() * 8.0) as usize;
        let mut lw: Vec<f64> = (0..size)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * 40.0)
            .collect();
        // A quarter of the vectors zero out some proposal weights.
        if case % 4 == 0 {
            for w in lw.iter_mut().skip(1) {
                if rng.random::<f64>() < 0.4 {
                    *w = f64::NEG_INFINITY;
                }
            }
        }
        let t = match build_transition_matrix(&lw) {
            Ok(t) => t,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let e = t.entries();
        for k in 0..size {
            let mut sum = 0.0;
            for l in 0..size {
                let v = e[[k, l]];
                if !(0.0..=1.0).contains(&v) {
                    failures.push(format!("case {case}: entry ({k},{l}) = {v}"));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-12 {
                failures.push(format!("case {case}: row {k} sums to {sum}"));
            }
        }
    }
    // Two-state reduction: the off-diagonal equals the scalar Metropolis
    // acceptance probability bit for bit.
    for case in 0..200 {
        let mut rng2 = tk::seeded_rng(5000 + case);
        let lw0 = (rng2.random::<f64>() * 2.0 - 1.0) * 30.0;
        let lw1 = (rng2.random::<f64>() * 2.0 - 1.0) * 30.0;
        let t = build_transition_matrix(&[lw0, lw1]).unwrap();
        let metropolis = (lw1 - lw0).exp().min(1.0);
        if t.entries()[[0, 1]] != metropolis {
            failures.push(format!(
                "case {case}: acceptance {} vs {metropolis}",
                t.entries()[[0, 1]]
            ));
        }
    }
    outcome("transition rows are stochastic and reduce to Metropolis", failures, 700)
}

fn membership_residual(p: [f64; 3], q: [f64; 3], r: [f64; 3], x: [f64; 3]) -> f64 {
    let d1 = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
    let d2 = [r[0] - p[0], r[1] - p[1], r[2] - p[2]];
    let n = [
        d1[1] * d2[2] - d1[2] * d2[1],
        d1[2] * d2[0] - d1[0] * d2[2],
        d1[0] * d2[1] - d1[1] * d2[0],
    ];
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    let dx = [x[0] - p[0], x[1] - p[1], x[2] - p[2]];
    (n[0] * dx[0] + n[1] * dx[1] + n[2] * dx[2]).abs() / norm
}

fn check_fault_geometry() -> CheckOutcome {
    let mut failures = Vec::new();
    let prior = fault_prior();
    let mut rng = tk::seeded_rng(88);
    let mut cases = vec![FAULT_TRUE_M.to_vec()];
    for _ in 0..5 {
        let x = prior.sample(&mut rng).unwrap();
        cases.push(x[..6].to_vec());
    }
    for (i, m) in cases.iter().enumerate() {
        let geom = match geometry_from_m(m) {
            Ok(g) => g,
            Err(e) => {
                failures.push(format!("case {i}: {e}"));
                continue;
            }
        };
        let cp = geom.control_points();
        let r5 = membership_residual(cp[0], cp[1], cp[2], cp[4]);
        let r6 = membership_residual(cp[1], cp[2], cp[3], cp[5]);
        if r5 >= 1e-10 || r6 >= 1e-10 {
            failures.push(format!("case {i}: membership residuals {r5}, {r6}"));
        }
        for j in 0..20 {
            let x1 = S_MIN + (S_MAX - S_MIN) * (j as f64 + 0.5) / 20.0;
            let x2 = geom.divide(x1);
            let below = geom.depth(x1, x2 - 1e-6);
            let above = geom.depth(x1, x2 + 1e-6);
            if (below - above).abs() > 1e-3 {
                failures.push(format!("case {i}: depth jump {} at divide", (below - above).abs()));
                break;
            }
        }
    }
    let flat = geometry_from_m(&[-30.0, 0.0, -30.0, 0.0, -30.0, -30.0]).unwrap();
    if flat.cos_dihedral() != 1.0 {
        failures.push(format!("flat dihedral cosine {}", flat.cos_dihedral()));
    }
    outcome("fault panels share their edge and extensions", failures, 7)
}

fn check_selector_scalar_forms() -> CheckOutcome {
    let mut failures = Vec::new();
    let cases = 20;
    for seed in 0..cases {
        let mut rng = tk::seeded_rng(3000 + seed);
        let a0 = rng.random::<f64>() * 2.0 - 1.0;
        let u0 = rng.random::<f64>() * 4.0 - 2.0;
        if a0.abs() < 1e-3 || u0.abs() < 1e-3 {
            continue;
        }
        let alpha = 10f64.powf(-4.0 + 6.0 * rng.random::<f64>());
        let factory: geoinv::posterior::OperatorFactory = Arc::new(move |m: &[f64]| {
            ForwardOperator::from_dense(Array2::from_elem((1, 1), a0 * (1.0 + m[0])))
        });
        let prob = geoinv::posterior::ProblemDefinition::new(
            Array1::from_elem(1, u0),
            RegularizerGram::identity(1),
            1,
            factory,
        )
        .unwrap();
        // With one datum the hat-matrix ratios cancel: both scale selectors
        // collapse to the squared datum, for every alpha and operator value.
        let gcv = gcv_score(&prob, &[0.3], alpha).unwrap();
        let ml = ml_score(&prob, &[0.3], alpha).unwrap();
        if (gcv - u0 * u0).abs() > 1e-12 * u0 * u0 {
            failures.push(format!("seed {seed}: gcv {gcv} vs {}", u0 * u0));
        }
        if (ml - u0 * u0).abs() > 1e-12 * u0 * u0 {
            failures.push(format!("seed {seed}: ml {ml} vs {}", u0 * u0));
        }
        // The residual selector at 1x1 has the closed form (u alpha/(alpha+a^2))^2.
        let aa = a0 * (1.0 + 0.3);
        let want = (u0 * alpha / (alpha + aa * aa)).powi(2);
        let cls = cls_residual(&prob, &[0.3], alpha).unwrap();
        if (cls - want).abs() > 1e-8 * (1.0 + want) {
            failures.push(format!("seed {seed}: cls {cls} vs {want}"));
        }
    }
    outcome("selector scores match scalar closed forms", failures, cases as usize)
}

pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        check_low_rank_identities(),
        check_sigma_stationarity(),
        check_transition_rows(),
        check_fault_geometry(),
        check_selector_scalar_forms(),
    ]
}

/// Prints one line per check; any failure maps to the numerical-failure
/// exit code.
pub fn validate_verb() -> Result<(), CliError> {
    let results = run_all();
    let mut failed = 0;
    for r in &results {
        if r.passed {
            println!("PASS {} ({})", r.name, r.detail);
        } else {
            failed += 1;
            println!("FAIL {}: {}", r.name, r.detail);
        }
    }
    if failed > 0 {
        Err(CliError::Numerical(format!(
            "{failed} of {} validation checks failed",
            results.len()
        )))
    } else {
        println!("all {} validation checks passed", results.len());
        Ok(())
    }
}
