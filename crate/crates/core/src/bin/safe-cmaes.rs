use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use safe_cmaes::harness::{
    run_experiment, sweep, write_experiment, Algorithm, ExperimentConfig, SweepParam,
};
use safe_cmaes::problems::{Benchmark, SafetyKind};
use safe_cmaes::Result;

#[derive(Parser)]
#[command(name = "safe-cmaes", version, about = "Safe CMA-ES benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated trials of one configuration.
    Run(RunArgs),
    /// Run one experiment per value of a safe CMA-ES parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// alpha, zeta-init, t-data or w-safe
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values; defaults to the standard grid.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Print the available benchmarks and safety kinds.
    ListProblems,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<Benchmark>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    safety: Option<SafetyKind>,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    zeta_init: Option<f64>,
    #[arg(long)]
    t_data: Option<usize>,
    #[arg(long)]
    l_min: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    w_safe: Option<f64>,
    #[arg(long)]
    w_unsafe: Option<f64>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($f:ident => $t:ident),*) => {
                $(if let Some(v) = self.$f.clone() { c.$t = v; })*
            };
        }
        set!(problem => problem, dim => dim, safety => safety, algo => algorithm,
             budget => budget, trials => trials, seed => seed, alpha => alpha,
             zeta_init => zeta_init, t_data => t_data, l_min => l_min, gamma => gamma,
             sigma0 => sigma0, w_safe => w_safe, w_unsafe => w_unsafe);
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        if self.lambda.is_some() {
            c.lambda = self.lambda;
        }
        c.validate()?;
        Ok(c)
    }
}

fn report(label: &str, r: &safe_cmaes::harness::ExperimentResult) {
    let best = safe_cmaes::harness::quartiles(&r.final_best());
    let unsafe_q = safe_cmaes::harness::quartiles(&r.unsafe_counts());
    println!(
        "{label}: trials={} median best safe f={:.3e} (IQR {:.3e}..{:.3e}) median unsafe={}",
        r.logs.len(),
        best[1],
        best[0],
        best[2],
        unsafe_q[1]
    );
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ListProblems => {
            println!("benchmarks:");
            for b in Benchmark::ALL {
                println!("  {b}");
            }
            println!("safety:");
            for s in [SafetyKind::ObjectiveMedian, SafetyKind::FirstCoordinate] {
                println!("  {s}");
            }
            println!("algorithms:");
            for a in [Algorithm::SafeCmaes, Algorithm::Cmaes, Algorithm::Avoidance] {
                println!("  {a}");
            }
        }
        Command::Run(args) => {
            let config = args.config()?;
            let result = run_experiment(&config)?;
            report(&config.label(), &result);
            if let Some(out) = &config.out {
                write_experiment(&out.join(config.label()), &result)?;
            }
        }
        Command::Sweep { run, param, values } => {
            let base = run.config()?;
            let values = if values.is_empty() {
                param.default_values().to_vec()
            } else {
                values
            };
            for (v, result) in sweep(&base, param, &values)? {
                let label = format!("{}-{}{}", base.label(), param.name(), v);
                report(&label, &result);
                if let Some(out) = &base.out {
                    write_experiment(&out.join(&label), &result)?;
                }
            }
        }
    }
    Ok(())
}
