//! Brute-force grid evaluation of the posterior for validation.
//!
//! The grid oracle tabulates the unnormalized log posterior over a dense
//! Cartesian product of the prior box and the log10-alpha range, then forms
//! normalized marginal densities by trapezoid quadrature. It is only
//! tractable for the low-dimensional demonstration problems; requesting it
//! for the fault problem is a configuration error.

use crate::config::{ExperimentConfig, ProblemKind};
use crate::problems::{build_problem, BuiltProblem};
use crate::CliError;
use geoinv::posterior::posterior_grid;
use ndarray::Array2;
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "a grid axis needs at least two points");
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Trapezoid quadrature weights on an arbitrary sorted grid.
pub fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    assert!(n >= 2);
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = 0.5 * (xs[i + 1] - xs[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Tabulated log posterior over a Cartesian grid: rows index the flattened
/// m lattice (first axis fastest), columns the log10-alpha axis.
pub struct GridOracle {
    pub m_axes: Vec<Vec<f64>>,
    pub log10_alphas: Vec<f64>,
    pub log_values: Array2<f64>,
}

impl GridOracle {
    /// Grid for one coordinate: axes `0..q-1` are the m coordinates, axis
    /// `q` is log10 alpha.
    pub fn axis_grid(&self, axis: usize) -> &[f64] {
        if axis < self.m_axes.len() {
            &self.m_axes[axis]
        } else {
            &self.log10_alphas
        }
    }

    fn m_index(&self, flat: usize) -> Vec<usize> {
        let mut rest = flat;
        let mut idx = Vec::with_capacity(self.m_axes.len());
        for axis in &self.m_axes {
            idx.push(rest % axis.len());
            rest /= axis.len();
        }
        idx
    }

    /// Normalized marginal density of one coordinate, obtained by summing
    /// the grid density against the trapezoid weights of every other axis
    /// and rescaling so its own trapezoid integral is 1.
    pub fn marginal(&self, axis: usize) -> (Vec<f64>, Vec<f64>) {
        let q = self.m_axes.len();
        assert!(axis <= q, "axis out of range");
        let weights: Vec<Vec<f64>> = (0..=q)
            .map(|a| trapezoid_weights(self.axis_grid(a)))
            .collect();
        let max_log = self
            .log_values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            max_log.is_finite(),
            "grid contains no finite posterior value"
        );
        let grid = self.axis_grid(axis).to_vec();
        let mut marg = vec![0.0; grid.len()];
        for flat in 0..self.log_values.nrows() {
            let m_idx = self.m_index(flat);
            for (j, _) in self.log10_alphas.iter().enumerate() {
                let lv = self.log_values[[flat, j]];
                if !lv.is_finite() {
                    continue;
                }
                let val = (lv - max_log).exp();
                let mut weight = 1.0;
                for (a, ia) in m_idx.iter().enumerate() {
                    if a != axis {
                        weight *= weights[a][*ia];
                    }
                }
                if axis != q {
                    weight *= weights[q][j];
                }
                let k = if axis < q { m_idx[axis] } else { j };
                marg[k] += val * weight;
            }
        }
        let total: f64 = marg
            .iter()
            .zip(&weights[axis])
            .map(|(v, w)| v * w)
            .sum();
        assert!(total > 0.0, "marginal mass vanished");
        for v in &mut marg {
            *v /= total;
        }
        (grid, marg)
    }

    /// Grid point with the highest posterior value, as `(m, log10_alpha)`.
    pub fn argmax(&self) -> (Vec<f64>, f64) {
        let mut best = (0usize, 0usize);
        let mut best_val = f64::NEG_INFINITY;
        for flat in 0..self.log_values.nrows() {
            for j in 0..self.log10_alphas.len() {
                let v = self.log_values[[flat, j]];
                if v > best_val {
                    best_val = v;
                    best = (flat, j);
                }
            }
        }
        let idx = self.m_index(best.0);
        let m = idx
            .iter()
            .enumerate()
            .map(|(a, &i)| self.m_axes[a][i])
            .collect();
        (m, self.log10_alphas[best.1])
    }
}

/// Integrates a piecewise-linear density over uniform bins spanning
/// `[lo, hi]`; mass outside the tabulated grid is treated as zero.
pub fn bin_masses_from_density(
    xs: &[f64],
    density: &[f64],
    lo: f64,
    hi: f64,
    bins: usize,
) -> Vec<f64> {
    assert!(bins > 0 && hi > lo);
    let mut masses = vec![0.0; bins];
    let width = (hi - lo) / bins as f64;
    for s in 0..xs.len() - 1 {
        let (xa, xb) = (xs[s], xs[s + 1]);
        if xb <= lo || xa >= hi || xb <= xa {
            continue;
        }
        let k0 = (((xa.max(lo) - lo) / width) as usize).min(bins - 1);
        let k1 = (((xb.min(hi) - lo) / width) as usize).min(bins - 1);
        for (k, mass) in masses.iter_mut().enumerate().take(k1 + 1).skip(k0) {
            let e0 = lo + k as f64 * width;
            let e1 = e0 + width;
            let a = xa.max(e0);
            let b = xb.min(e1);
            if b <= a {
                continue;
            }
            let ta = (a - xa) / (xb - xa);
            let tb = (b - xa) / (xb - xa);
            let fa = density[s] + ta * (density[s + 1] - density[s]);
            let fb = density[s] + tb * (density[s + 1] - density[s]);
            *mass += 0.5 * (fa + fb) * (b - a);
        }
    }
    masses
}

/// Evaluates the posterior over the full prior box. Only the q <= 2
/// demonstration problems are accepted; the 6-parameter fault posterior has
/// no tractable grid.
pub fn compute_grid_oracle(
    built: &BuiltProblem,
    m_points: usize,
    alpha_points: usize,
) -> Result<GridOracle, CliError> {
    let q = built.q();
    if q > 2 {
        return Err(CliError::Config(format!(
            "grid oracle supports at most 2 nonlinear parameters, problem has {q}"
        )));
    }
    let prior = built.evaluator.prior();
    let m_axes: Vec<Vec<f64>> = prior
        .m_box()
        .iter()
        .map(|&(lo, hi)| linspace(lo, hi, m_points))
        .collect();
    let (alo, ahi) = prior.log10_alpha_range();
    let log10_alphas = linspace(alo, ahi, alpha_points);
    let mut m_list: Vec<Vec<f64>> = Vec::new();
    match m_axes.len() {
        1 => {
            for &a in &m_axes[0] {
                m_list.push(vec![a]);
            }
        }
        2 => {
            for &b in &m_axes[1] {
                for &a in &m_axes[0] {
                    m_list.push(vec![a, b]);
                }
            }
        }
        other => unreachable!("q = {other} was rejected above"),
    }
    let grid = posterior_grid(&built.evaluator, &m_list, &log10_alphas);
    if let Some((i, j, msg)) = grid.failures.first() {
        return Err(CliError::Numerical(format!(
            "posterior evaluation failed at grid node ({i}, {j}): {msg}"
        )));
    }
    Ok(GridOracle {
        m_axes,
        log10_alphas,
        log_values: grid.log_values,
    })
}

fn write_oracle_csv(oracle: &GridOracle, q: usize, path: &Path) -> Result<(), CliError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    let mut header = String::new();
    for i in 1..=q {
        header.push_str(&format!("m{i},"));
    }
    header.push_str("log10_alpha,log_posterior");
    writeln!(w, "{header}")?;
    for flat in 0..oracle.log_values.nrows() {
        let idx = oracle.m_index(flat);
        for (j, &la) in oracle.log10_alphas.iter().enumerate() {
            let mut line = String::new();
            for (a, &i) in idx.iter().enumerate() {
                line.push_str(&format!("{},", oracle.m_axes[a][i]));
            }
            line.push_str(&format!("{la},{}", oracle.log_values[[flat, j]]));
            writeln!(w, "{line}")?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_marginals_csv(oracle: &GridOracle, q: usize, path: &Path) -> Result<(), CliError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "coordinate,value,density")?;
    for axis in 0..=q {
        let name = if axis < q {
            format!("m{}", axis + 1)
        } else {
            "log10_alpha".to_string()
        };
        let (grid, dens) = oracle.marginal(axis);
        for (x, d) in grid.iter().zip(&dens) {
            writeln!(w, "{name},{x},{d}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// The `oracle` verb: tabulate the posterior and its marginals for the
/// configured problem, writing `oracle.csv` and `oracle_marginals.csv`.
pub fn run_oracle(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    if cfg.problem == ProblemKind::Fault {
        return Err(CliError::Config(
            "the fault posterior has 6 nonlinear parameters; a dense grid is not tractable. \
             Use problem = toy_scalar or dense_random."
                .into(),
        ));
    }
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.resolved.txt"), cfg.resolved_text())?;
    let built = build_problem(cfg)?;
    let q = built.q();
    let oracle = compute_grid_oracle(&built, cfg.oracle_m_points, cfg.oracle_alpha_points)?;
    write_oracle_csv(&oracle, q, &dir.join("oracle.csv"))?;
    write_marginals_csv(&oracle, q, &dir.join("oracle_marginals.csv"))?;
    let mut manifest = String::from("status = ok\n");
    for name in ["config.resolved.txt", "oracle.csv", "oracle_marginals.csv"] {
        manifest.push_str(&format!("artifact {name}\n"));
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(dir)
}
