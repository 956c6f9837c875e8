use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use adaptive_kkt::driver::{self, Algorithm, DriverError, ProblemConfig, RunConfig};
use adaptive_kkt::problems::{circuit_currents, current_densities, ElectrodeProblem};

#[derive(Parser)]
#[command(
    version,
    about = "Adaptive Newton-KKT solver with goal-oriented error control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Global,
    Mesh,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Run one of the refinement algorithms and write its outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        algorithm: Option<AlgoArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a reference goal value by a fine adaptive run.
    Reference {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 400_000)]
        max_dofs: usize,
    },
    /// Alternating position/size optimization of the electrode holes.
    Design {
        #[arg(long)]
        config: PathBuf,
    },
    /// Circuit currents of the configured electrode design.
    Currents {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<RunConfig, DriverError> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_json(&text).map_err(DriverError::Config)
}

fn electrode(cfg: &RunConfig) -> Result<ElectrodeProblem, DriverError> {
    match &cfg.problem {
        ProblemConfig::Electrode(e) => Ok(ElectrodeProblem::new(e.clone())?),
        _ => Err(DriverError::Config("expected an electrode problem".into())),
    }
}

fn execute(cli: Cli) -> Result<(), DriverError> {
    match cli.command {
        Command::Run {
            config,
            algorithm,
            out,
        } => {
            let mut cfg = load(&config)?;
            if let Some(a) = algorithm {
                cfg.algorithm = match a {
                    AlgoArg::Global => Algorithm::Global,
                    AlgoArg::Mesh => Algorithm::MeshAdaptive,
                    AlgoArg::Full => Algorithm::FullyAdaptive,
                };
            }
            if out.is_some() {
                cfg.output.dir = out;
            }
            let res = driver::run(&cfg, cfg.algorithm, None)?;
            println!("level,dofs,goal,goal_error,eta_h,eta_kkt,i_eff,residual,steps,factorizations,time_s");
            for r in &res.rows {
                let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
                println!(
                    "{},{},{:.10e},{},{:.4e},{:.4e},{},{:.2e},{},{},{:.2}",
                    r.level,
                    r.dofs,
                    r.goal,
                    opt(r.goal_error),
                    r.eta_h,
                    r.eta_kkt,
                    opt(r.i_eff),
                    r.residual,
                    r.newton_steps,
                    r.factorizations,
                    r.wall_time_s
                );
            }
        }
        Command::Reference { config, max_dofs } => {
            let cfg = load(&config)?;
            println!("{:.15e}", driver::cached_reference_goal(&cfg, max_dofs)?);
        }
        Command::Design { config } => {
            let cfg = load(&config)?;
            println!("round,phase,m,s,J,goal,steps");
            for r in driver::run_alternating_design(&cfg)? {
                let join = |v: &[f64]| {
                    v.iter()
                        .map(|x| format!("{x:.4}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                println!(
                    "{},{},{},{},{:.6e},{:.6e},{}",
                    r.round,
                    r.phase,
                    join(&r.m),
                    join(&r.s),
                    r.cost,
                    r.goal,
                    r.newton_steps
                );
            }
        }
        Command::Currents { config } => {
            let cfg = load(&config)?;
            let p = electrode(&cfg)?;
            let d = &p.cfg.design;
            for w in d.admissibility_warnings(&p.circuit) {
                eprintln!("warning: {w}");
            }
            let i = circuit_currents(&p.circuit, &d.m, &d.s)?;
            let j = current_densities(&p.circuit, &d.m, &d.s)?;
            println!("k,m,s,I,J");
            println!("0,-,{},{:.10e},{:.10e}", p.circuit.s0, i[0], j[0]);
            for k in 0..d.pairs() {
                println!(
                    "{},{},{},{:.10e},{:.10e}",
                    k + 1,
                    d.m[k],
                    d.s[k],
                    i[k + 1],
                    j[k + 1]
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
