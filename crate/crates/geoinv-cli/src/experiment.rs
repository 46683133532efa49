//! End-to-end experiment execution: data generation, sampling, summary
//! statistics, depth/slip lattice artifacts, and the run manifest.
//!
//! A finished run directory holds:
//! - `config.resolved.txt` — every key stated explicitly; re-running it
//!   reproduces every numeric artifact byte for byte,
//! - `chains.csv` — one row per stored chain column
//!   (`step,slot,m1..,log10_alpha,log_density,accepted`; step 1 rows are the
//!   shared initial state),
//! - `summary.json` — moments, histograms, truth comparison, and (for the
//!   fault problem) depth/slip artifact digests,
//! - `depth_stats.csv`, `slip_reconstruction.csv`, `lattice_truth.csv` —
//!   plot-ready lattices (fault problem only),
//! - `manifest.txt` — artifact list, status, and wall-clock time (the one
//!   file allowed to differ between identical reruns).

use crate::compare::MethodRow;
use crate::config::ExperimentConfig;
use crate::problems::{build_problem, BuiltProblem};
use crate::CliError;
use geoinv::fault::{geometry_from_m, lattice_points, FaultGeometry};
use geoinv::linalg::solve_regularized;
use geoinv::sampler::{
    parallel_chain_run, single_chain_run, BetaSchedule, ChainHistory, SamplerConfig, StepRecord,
};
use ndarray::Array1;
use serde::Serialize;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
pub struct ScenarioOut {
    pub label: String,
    pub fraction: f64,
    pub seed: u64,
    pub sigma: f64,
    pub realized_relative_error: f64,
}

#[derive(Serialize)]
pub struct SamplerOut {
    pub algorithm: String,
    pub seed: u64,
    pub n_steps: usize,
    pub n_parallel: usize,
    pub cov_update_every: usize,
    pub burn_in_draws: usize,
    pub scale: f64,
    pub beta: String,
}

#[derive(Serialize)]
pub struct ReportOut {
    pub burn_in_fraction: f64,
    pub histogram_bins: usize,
    pub retained_from_step: usize,
    pub retained_columns: usize,
}

#[derive(Serialize)]
pub struct HistogramOut {
    pub coordinate: String,
    pub lo: f64,
    pub hi: f64,
    /// Bin masses summing to 1.
    pub masses: Vec<f64>,
}

#[derive(Serialize)]
pub struct TruthOut {
    pub m_true: Vec<f64>,
    pub distance_posterior_mean_to_truth: f64,
    pub inside_two_std: Vec<bool>,
}

#[derive(Serialize)]
pub struct DepthOut {
    pub file: String,
    pub grid_m: usize,
    /// Depth standard deviation at the slip-support center relative to the
    /// true |depth| there.
    pub center_std_ratio: f64,
    pub max_std: f64,
    pub max_abs_error: f64,
}

#[derive(Serialize)]
pub struct SlipOut {
    pub file: String,
    pub alpha_used: f64,
    /// Relative L2 error against the synthesized truth, restricted to the
    /// nodes where the truth bump is nonzero. None when the posterior-mean
    /// geometry could not be built.
    pub support_relative_l2_error: Option<f64>,
    pub note: Option<String>,
}

#[derive(Serialize)]
pub struct RunSummary {
    pub version: String,
    pub problem: String,
    pub coordinates: Vec<String>,
    pub scenario: ScenarioOut,
    pub sampler: SamplerOut,
    pub report: ReportOut,
    pub acceptance_rate: f64,
    pub incidents: u64,
    pub evaluations: u64,
    pub posterior_mean: Vec<f64>,
    pub posterior_std: Vec<f64>,
    pub posterior_cov: Vec<Vec<f64>>,
    pub alpha_at_posterior_mean: f64,
    pub marginal_histograms: Vec<HistogramOut>,
    pub truth: TruthOut,
    pub depth: Option<DepthOut>,
    pub slip: Option<SlipOut>,
    pub selectors: Option<Vec<MethodRow>>,
    #[serde(skip)]
    pub runtime_seconds: f64,
}

pub struct RunArtifacts {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub problem: BuiltProblem,
    pub history: ChainHistory,
    pub summary: RunSummary,
}

/// Population mean, standard deviation, and covariance over the retained
/// columns (1-based from_step onward), in the exact accumulation order the
/// chain-file recomputation check mirrors.
pub fn retained_moments(
    history: &ChainHistory,
    from_step: usize,
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>, usize) {
    let dim = history.dim();
    let start = (from_step - 1) * history.n_parallel();
    let count = history.len() - start;
    assert!(count > 0, "no retained columns");
    let mut mean = vec![0.0; dim];
    for idx in start..history.len() {
        let col = history.column(idx);
        for (d, m) in mean.iter_mut().enumerate() {
            *m += col[d];
        }
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut cov = vec![vec![0.0; dim]; dim];
    for idx in start..history.len() {
        let col = history.column(idx);
        for a in 0..dim {
            let ca = col[a] - mean[a];
            for b in 0..dim {
                cov[a][b] += ca * (col[b] - mean[b]);
            }
        }
    }
    for row in &mut cov {
        for v in row.iter_mut() {
            *v /= count as f64;
        }
    }
    let std = (0..dim).map(|d| cov[d][d].sqrt()).collect();
    (mean, std, cov, count)
}

fn histogram(values: &[f64], bins: usize, coordinate: String) -> HistogramOut {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        hi = lo + 1.0;
    }
    let mut masses = vec![0.0; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        masses[idx] += 1.0;
    }
    let total = values.len() as f64;
    for m in &mut masses {
        *m /= total;
    }
    HistogramOut {
        coordinate,
        lo,
        hi,
        masses,
    }
}

pub fn coordinate_names(q: usize) -> Vec<String> {
    let mut names: Vec<String> = (1..=q).map(|i| format!("m{i}")).collect();
    names.push("log10_alpha".into());
    names
}

fn sampler_config(cfg: &ExperimentConfig) -> SamplerConfig {
    let mut sc = SamplerConfig::new(cfg.sampler_seed);
    sc.n_steps = cfg.sampler_n_steps;
    sc.cov_update_every = cfg.sampler_cov_update_every;
    sc.n_parallel = cfg.sampler_n_parallel;
    sc.burn_in_draws = cfg.sampler_burn_in_draws;
    sc.scale = cfg.sampler_scale;
    if let Some(b) = cfg.sampler_beta_constant {
        sc.beta = BetaSchedule::Constant(b);
    }
    sc
}

pub fn write_chains_csv(history: &ChainHistory, path: &Path) -> Result<(), CliError> {
    let dim = history.dim();
    let q = dim - 1;
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    let mut header = String::from("step,slot");
    for name in coordinate_names(q) {
        header.push(',');
        header.push_str(&name);
    }
    header.push_str(",log_density,accepted");
    writeln!(w, "{header}")?;
    let n_par = history.n_parallel();
    for idx in 0..history.len() {
        let step = idx / n_par + 1;
        let slot = idx % n_par + 1;
        let col = history.column(idx);
        let mut line = format!("{step},{slot}");
        for &v in col {
            line.push(',');
            line.push_str(&format!("{v}"));
        }
        line.push(',');
        line.push_str(&format!("{}", history.log_density(idx)));
        line.push(',');
        line.push_str(if history.was_accepted(idx) { "1" } else { "0" });
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub struct DepthStats {
    pub xs: Vec<f64>,
    pub grid_m: usize,
    pub truth: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub abs_error: Vec<f64>,
}

/// Pointwise depth statistics over the lattice: every retained chain sample
/// is pushed through its fault geometry, and the per-node population mean,
/// standard deviation, and |mean - truth| are accumulated.
pub fn depth_statistics(
    history: &ChainHistory,
    from_step: usize,
    grid_m: usize,
    truth_geom: &FaultGeometry,
) -> Result<DepthStats, CliError> {
    let xs = lattice_points(grid_m);
    let nodes = grid_m * grid_m;
    let start = (from_step - 1) * history.n_parallel();
    let count = history.len() - start;
    if count == 0 {
        return Err(CliError::Config(
            "burn-in discards every sample; nothing to report".into(),
        ));
    }
    let mut sum = vec![0.0f64; nodes];
    let mut sumsq = vec![0.0f64; nodes];
    for idx in start..history.len() {
        let col = history.column(idx);
        let geom = geometry_from_m(&col[..col.len() - 1])
            .map_err(|e| CliError::Numerical(format!("retained sample has no geometry: {e}")))?;
        for (iy, &x2) in xs.iter().enumerate() {
            for (ix, &x1) in xs.iter().enumerate() {
                let z = geom.depth(x1, x2);
                let k = iy * grid_m + ix;
                sum[k] += z;
                sumsq[k] += z * z;
            }
        }
    }
    let inv = 1.0 / count as f64;
    let mut mean = vec![0.0; nodes];
    let mut std = vec![0.0; nodes];
    let mut abs_error = vec![0.0; nodes];
    let mut truth = vec![0.0; nodes];
    for (iy, &x2) in xs.iter().enumerate() {
        for (ix, &x1) in xs.iter().enumerate() {
            let k = iy * grid_m + ix;
            mean[k] = sum[k] * inv;
            std[k] = (sumsq[k] * inv - mean[k] * mean[k]).max(0.0).sqrt();
            truth[k] = truth_geom.depth(x1, x2);
            abs_error[k] = (mean[k] - truth[k]).abs();
        }
    }
    Ok(DepthStats {
        xs,
        grid_m,
        truth,
        mean,
        std,
        abs_error,
    })
}

/// The regularized least-squares slip at a fixed (m, alpha).
pub fn reconstruct_slip(
    problem: &geoinv::posterior::ProblemDefinition,
    m: &[f64],
    alpha: f64,
) -> Result<Array1<f64>, CliError> {
    let op = problem
        .operator(m)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    solve_regularized(&op, problem.gram(), alpha, &problem.data().view())
        .map_err(|e| CliError::Numerical(e.to_string()))
}

fn write_depth_csv(stats: &DepthStats, path: &Path) -> Result<(), CliError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "x1,x2,depth_mean,depth_std,abs_error,depth_true")?;
    for (iy, &x2) in stats.xs.iter().enumerate() {
        for (ix, &x1) in stats.xs.iter().enumerate() {
            let k = iy * stats.grid_m + ix;
            writeln!(
                w,
                "{x1},{x2},{},{},{},{}",
                stats.mean[k], stats.std[k], stats.abs_error[k], stats.truth[k]
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_lattice_csv(
    path: &Path,
    header: &str,
    xs: &[f64],
    grid_m: usize,
    columns: &[&[f64]],
) -> Result<(), CliError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{header}")?;
    for (iy, &x2) in xs.iter().enumerate() {
        for (ix, &x1) in xs.iter().enumerate() {
            let k = iy * grid_m + ix;
            let mut line = format!("{x1},{x2}");
            for col in columns {
                line.push(',');
                line.push_str(&format!("{}", col[k]));
            }
            writeln!(w, "{line}")?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_manifest(
    dir: &Path,
    status: &str,
    error: Option<&str>,
    runtime_seconds: f64,
) -> Result<(), CliError> {
    let mut lines = Vec::new();
    lines.push(format!("status = {status}"));
    if let Some(e) = error {
        lines.push(format!("error = {}", e.replace('\n', " ")));
    }
    lines.push(format!("runtime_seconds = {runtime_seconds:.3}"));
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|entry| entry.ok())
        .filter_map(|entry| entry.file_name().into_string().ok())
        .filter(|name| name != "manifest.txt")
        .collect();
    names.sort();
    for name in names {
        lines.push(format!("artifact {name}"));
    }
    std::fs::write(dir.join("manifest.txt"), lines.join("\n") + "\n")?;
    Ok(())
}

/// Runs the configured experiment, writing all artifacts into the output
/// directory. On failure a partial manifest recording the error is left
/// behind.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts, CliError> {
    let started = Instant::now();
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.resolved.txt"), cfg.resolved_text())?;
    match run_inner(cfg, &dir, started) {
        Ok(artifacts) => Ok(artifacts),
        Err(e) => {
            let _ = write_manifest(
                &dir,
                "aborted",
                Some(&e.to_string()),
                started.elapsed().as_secs_f64(),
            );
            Err(e)
        }
    }
}

fn run_inner(
    cfg: &ExperimentConfig,
    dir: &Path,
    started: Instant,
) -> Result<RunArtifacts, CliError> {
    let problem = build_problem(cfg)?;
    let q = problem.q();
    let sc = sampler_config(cfg);
    let n_steps = sc.n_steps;
    let tick = (n_steps / 20).max(1);
    let last_slot = sc.n_parallel;
    let mut progress = |rec: StepRecord| {
        if rec.slot == last_slot && rec.step % tick == 0 {
            eprintln!(
                "[geoinv] step {}/{} acceptance {:.3}",
                rec.step, n_steps, rec.acceptance_rate
            );
        }
    };
    let history = if sc.n_parallel == 1 {
        single_chain_run(&problem.evaluator, &sc, Some(&mut progress))
    } else {
        parallel_chain_run(&problem.evaluator, &sc, Some(&mut progress))
    }
    .map_err(CliError::from)?;

    write_chains_csv(&history, &dir.join("chains.csv"))?;

    let from_step = (cfg.report_burn_in_fraction * n_steps as f64).floor() as usize + 1;
    if from_step > n_steps {
        return Err(CliError::Config(
            "burn-in discards every sampling step".into(),
        ));
    }
    let (mean, std, cov, retained) = retained_moments(&history, from_step);
    let names = coordinate_names(q);
    let histograms: Vec<HistogramOut> = names
        .iter()
        .enumerate()
        .map(|(d, name)| {
            histogram(
                &history.coordinate_tail(d, from_step),
                cfg.report_histogram_bins,
                name.clone(),
            )
        })
        .collect();

    let distance = problem
        .m_true
        .iter()
        .zip(&mean[..q])
        .map(|(t, m)| (t - m) * (t - m))
        .sum::<f64>()
        .sqrt();
    let inside_two_std = (0..q)
        .map(|d| (mean[d] - problem.m_true[d]).abs() <= 2.0 * std[d])
        .collect();

    let alpha_at_mean = 10f64.powf(mean[q]);
    let mut depth_out = None;
    let mut slip_out = None;
    if let Some(setup) = &problem.fault {
        let stats = depth_statistics(&history, from_step, setup.grid_m, &setup.geom_true)?;
        write_depth_csv(&stats, &dir.join("depth_stats.csv"))?;
        // Node nearest the slip-support center, in lattice coordinates.
        let nearest = |target: f64| {
            stats
                .xs
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (*a - target).abs().total_cmp(&(*b - target).abs())
                })
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        let cix = nearest(setup.shape.center.0);
        let ciy = nearest(setup.shape.center.1);
        let ck = ciy * setup.grid_m + cix;
        let center_std_ratio = stats.std[ck] / stats.truth[ck].abs().max(f64::EPSILON);
        depth_out = Some(DepthOut {
            file: "depth_stats.csv".into(),
            grid_m: setup.grid_m,
            center_std_ratio,
            max_std: stats.std.iter().fold(0.0f64, |a, v| a.max(*v)),
            max_abs_error: stats.abs_error.iter().fold(0.0f64, |a, v| a.max(*v)),
        });

        write_lattice_csv(
            &dir.join("lattice_truth.csv"),
            "x1,x2,depth_true,slip_true",
            &stats.xs,
            setup.grid_m,
            &[&stats.truth, &setup.slip_coarse.values],
        )?;

        // Reconstruction at the posterior mean; an off-support mean is
        // reported rather than fatal.
        let m_mean = &mean[..q];
        match reconstruct_slip(problem.evaluator.problem(), m_mean, alpha_at_mean) {
            Ok(g) => {
                let geom_mean = geometry_from_m(m_mean)
                    .map_err(|e| CliError::Numerical(e.to_string()))?;
                let depth_mean_geom: Vec<f64> = stats
                    .xs
                    .iter()
                    .flat_map(|&x2| {
                        stats
                            .xs
                            .iter()
                            .map(move |&x1| (x1, x2))
                            .collect::<Vec<_>>()
                    })
                    .map(|(x1, x2)| geom_mean.depth(x1, x2))
                    .collect();
                let g_slice = g.as_slice().expect("contiguous");
                write_lattice_csv(
                    &dir.join("slip_reconstruction.csv"),
                    "x1,x2,depth_at_mean,slip,slip_true",
                    &stats.xs,
                    setup.grid_m,
                    &[&depth_mean_geom, g_slice, &setup.slip_coarse.values],
                )?;
                let truth_peak = setup
                    .slip_coarse
                    .values
                    .iter()
                    .fold(0.0f64, |a, v| a.max(v.abs()));
                let mut num = 0.0;
                let mut den = 0.0;
                for (gv, tv) in g_slice.iter().zip(&setup.slip_coarse.values) {
                    if tv.abs() > 1e-12 * truth_peak {
                        num += (gv - tv) * (gv - tv);
                        den += tv * tv;
                    }
                }
                slip_out = Some(SlipOut {
                    file: "slip_reconstruction.csv".into(),
                    alpha_used: alpha_at_mean,
                    support_relative_l2_error: if den > 0.0 {
                        Some((num / den).sqrt())
                    } else {
                        None
                    },
                    note: None,
                });
            }
            Err(e) => {
                slip_out = Some(SlipOut {
                    file: "slip_reconstruction.csv".into(),
                    alpha_used: alpha_at_mean,
                    support_relative_l2_error: None,
                    note: Some(format!("reconstruction skipped: {e}")),
                });
            }
        }
    }

    let selectors = if cfg.selectors_enabled {
        let rows = crate::compare::baseline_rows(cfg, &problem, Some((&mean[..q], &std[..q])));
        crate::compare::write_comparison_csv(&rows, q, &dir.join("comparison.csv"))?;
        Some(rows)
    } else {
        None
    };

    let summary = RunSummary {
        version: VERSION.into(),
        problem: cfg.problem.name().into(),
        coordinates: names,
        scenario: ScenarioOut {
            label: problem.scenario.label.into(),
            fraction: problem.scenario.fraction,
            seed: problem.scenario.seed,
            sigma: problem.data.sigma,
            realized_relative_error: problem.data.realized_relative_error,
        },
        sampler: SamplerOut {
            algorithm: if sc.n_parallel == 1 {
                "single_chain".into()
            } else {
                "parallel_chain".into()
            },
            seed: sc.seed,
            n_steps: sc.n_steps,
            n_parallel: sc.n_parallel,
            cov_update_every: sc.cov_update_every,
            burn_in_draws: sc.burn_in_draws,
            scale: sc.effective_scale(q + 1),
            beta: match sc.beta {
                BetaSchedule::InverseSqrt => "inverse_sqrt".into(),
                BetaSchedule::Constant(v) => format!("constant {v}"),
            },
        },
        report: ReportOut {
            burn_in_fraction: cfg.report_burn_in_fraction,
            histogram_bins: cfg.report_histogram_bins,
            retained_from_step: from_step,
            retained_columns: retained,
        },
        acceptance_rate: history.acceptance_rate(),
        incidents: history.incidents,
        evaluations: history.evaluations,
        posterior_mean: mean,
        posterior_std: std,
        posterior_cov: cov,
        alpha_at_posterior_mean: alpha_at_mean,
        marginal_histograms: histograms,
        truth: TruthOut {
            m_true: problem.m_true.clone(),
            distance_posterior_mean_to_truth: distance,
            inside_two_std,
        },
        depth: depth_out,
        slip: slip_out,
        selectors,
        runtime_seconds: 0.0,
    };

    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Numerical(format!("summary serialization: {e}")))?;
    std::fs::write(dir.join("summary.json"), json + "\n")?;

    let runtime = started.elapsed().as_secs_f64();
    write_manifest(dir, "ok", None, runtime)?;

    let mut summary = summary;
    summary.runtime_seconds = runtime;
    Ok(RunArtifacts {
        dir: dir.to_path_buf(),
        config: cfg.clone(),
        problem,
        history,
        summary,
    })
}
