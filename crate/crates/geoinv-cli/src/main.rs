use clap::{Args, Parser, Subcommand};
use geoinv_cli::{compare, config, experiment, oracle, validate, CliError};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "geoinv",
    version,
    about = "Bayesian inversion experiments: sampling, grid oracles, baseline comparisons"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file (flat `key = value` text); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override sampler.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override sampler.n_parallel.
    #[arg(long = "n-par")]
    n_par: Option<usize>,
    /// Override sampler.n_steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Use the full-size fault discretization (585 data rows, 10201 unknowns).
    #[arg(long)]
    full_scale: bool,
}

impl CommonArgs {
    fn load(&self) -> Result<config::ExperimentConfig, CliError> {
        let overrides = config::Overrides {
            seed: self.seed,
            out: self.out.clone(),
            n_par: self.n_par,
            steps: self.steps,
            full_scale: self.full_scale,
        };
        config::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Verb {
    /// Run a sampling experiment and write chains, summary, and lattice artifacts.
    Run(CommonArgs),
    /// Tabulate the posterior and its marginals on a dense grid (low-dimensional problems only).
    Oracle(CommonArgs),
    /// Run the sampler plus every baseline fit on the same data realization.
    Compare(CommonArgs),
    /// Execute the built-in identity and property self-checks.
    Validate,
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.verb {
        Verb::Run(args) => {
            let cfg = args.load()?;
            let artifacts = experiment::run_experiment(&cfg)?;
            let s = &artifacts.summary;
            println!(
                "run complete in {:.1} s: {}",
                s.runtime_seconds,
                artifacts.dir.display()
            );
            println!(
                "acceptance rate {:.3}, posterior mean {:?}",
                s.acceptance_rate, s.posterior_mean
            );
            Ok(())
        }
        Verb::Oracle(args) => {
            let cfg = args.load()?;
            let dir = oracle::run_oracle(&cfg)?;
            println!("oracle grid written to {}", dir.display());
            Ok(())
        }
        Verb::Compare(args) => {
            let cfg = args.load()?;
            let artifacts = compare::compare_run(&cfg)?;
            println!("comparison written to {}", artifacts.dir.display());
            if let Some(rows) = &artifacts.summary.selectors {
                for row in rows {
                    match (&row.distance_to_truth, &row.error) {
                        (Some(d), _) => println!(
                            "  {:<8} {:<22} distance to truth {d:.4}",
                            row.method, row.variant
                        ),
                        (None, Some(e)) => {
                            println!("  {:<8} {:<22} failed: {e}", row.method, row.variant)
                        }
                        _ => {}
                    }
                }
            }
            Ok(())
        }
        Verb::Validate => validate::validate_verb(),
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code().into());
        }
    }
}
