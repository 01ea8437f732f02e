use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mec_cache::baselines::SchemeId;
use mec_cache::harness::experiments::{run_experiment, ExperimentId, ExperimentSpec};
use mec_cache::harness::mg1::{mg1_event_sim, Mg1SimConfig};
use mec_cache::harness::plotdata::emit_plotdata;
use mec_cache::scenario::ScenarioConfig;
use mec_cache::Result;

#[derive(Parser)]
#[command(name = "mec-cache", version, about = "Joint service caching and task offloading experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write metrics CSVs.
    Run {
        /// fig2_3 | fig4_convergence | fig5_6_storage_sweep | fig7_Q_sweep | fig8_9_traces | v_sweep
        experiment: String,
        /// Scenario TOML file; defaults apply when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated: oreo,centralized,myopic,noncooperative
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Number of replications.
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        v: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        parallel_bs: bool,
        /// Comma-separated sweep values replacing the experiment's default grid.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
    },
    /// Reshape experiment output into a per-figure CSV.
    Plotdata {
        /// fig2 .. fig9
        figure: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Budget drawn as the reference line in fig3.
        #[arg(long)]
        q: Option<f64>,
    },
    /// Compare the queueing simulator with the closed-form sojourn time.
    Mg1check {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            experiment,
            scenario,
            seed,
            out,
            schemes,
            horizon,
            replications,
            v,
            q,
            tau,
            parallel_bs,
            sweep,
        } => {
            let id: ExperimentId = experiment.parse()?;
            let mut cfg = match scenario {
                Some(p) => ScenarioConfig::load(p)?,
                None => ScenarioConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = replications {
                cfg.replications = r;
            }
            if let Some(v) = v {
                cfg.control.v = v;
            }
            if let Some(q) = q {
                cfg.control.q_budget = q;
            }
            if let Some(t) = tau {
                cfg.control.tau = t;
            }
            cfg.control.parallel_bs |= parallel_bs;
            cfg.validate()?;
            let mut spec = ExperimentSpec::new(id, cfg);
            if let Some(h) = horizon {
                spec.horizon = h;
            }
            if let Some(list) = schemes {
                spec.schemes = list.iter().map(|s| s.parse::<SchemeId>()).collect::<Result<_>>()?;
            }
            if let Some(values) = sweep {
                spec.sweep = spec.sweep.with_values(values)?;
            }
            let output = run_experiment(&spec)?;
            print!("{}", output.report());
            for p in output.write(&out)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Plotdata { figure, input, out, q } => {
            let t = emit_plotdata(&input, &figure, &out, q)?;
            println!("wrote {} ({} rows)", out.display(), t.rows.len());
        }
        Command::Mg1check { config } => {
            let cfg = Mg1SimConfig::load(config)?;
            let est = mg1_event_sim(&cfg)?;
            let exact = cfg.analytic()?;
            println!("utilization        {:.4}", cfg.utilization()?);
            println!("simulated sojourn  {:.6} ± {:.6} s ({} tasks)", est.mean, est.half_width, est.tasks);
            println!("formula            {exact:.6} s");
            println!("relative error     {:.3}%", 100.0 * est.relative_error(exact));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
