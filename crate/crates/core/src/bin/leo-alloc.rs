use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use leo_alloc::alternating::{run_algorithm1, AlgorithmConfig};
use leo_alloc::greedy::{run_greedy, GreedyMode};
use leo_alloc::harness::{load_manifest, run_and_write, summarize, ExperimentKind, ExperimentSpec};
use leo_alloc::instance::{config_from_toml, generate_scenario, ProblemInstance, ScenarioConfig};
use leo_alloc::units::watts_to_dbw;
use leo_alloc::Error;

#[derive(Parser)]
#[command(name = "leo-alloc", version, about = "LEO association, power and bandwidth allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario instance file.
    Generate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output file (`.toml`) or directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Solve an instance with the alternating algorithm or the greedy baseline.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Algorithm::Alg1)]
        algorithm: Algorithm,
        #[command(flatten)]
        alg: AlgArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Shorthand for `solve --algorithm greedy`.
    Greedy {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        strict_paper: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a seeded parameter sweep.
    Experiment {
        #[arg(long, value_enum)]
        experiment: Option<ExperimentArg>,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        alg: AlgArgs,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
        /// Comma-separated seeds or an inclusive range `a..b`.
        #[arg(long)]
        seeds: Option<String>,
        /// Re-run an earlier experiment from its manifest.
        #[arg(long, conflicts_with = "experiment")]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Check an instance or configuration file.
    Validate {
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    beam_exponent: Option<u8>,
}

#[derive(Args)]
struct AlgArgs {
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Literal greedy caps and uniform BS weighting.
    #[arg(long)]
    strict_paper: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Alg1,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Convergence,
    Demand,
    Bandwidth,
    Connections,
    Compare,
}

impl From<ExperimentArg> for ExperimentKind {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::Convergence => Self::Convergence,
            ExperimentArg::Demand => Self::Demand,
            ExperimentArg::Bandwidth => Self::Bandwidth,
            ExperimentArg::Connections => Self::Connections,
            ExperimentArg::Compare => Self::Compare,
        }
    }
}

impl ScenarioArgs {
    fn load(&self) -> leo_alloc::Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => config_from_toml(&std::fs::read_to_string(p)?)?,
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.rng_seed = s;
        }
        if let Some(b) = self.beam_exponent {
            cfg.channel.beam_pattern_exponent = b;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl AlgArgs {
    fn config(&self) -> leo_alloc::Result<AlgorithmConfig> {
        let mut c = AlgorithmConfig::default();
        if let Some(r) = self.rho {
            c.rho = r;
        }
        if let Some(e) = self.eps {
            c.eps = e;
        }
        if let Some(m) = self.max_iters {
            c.max_iters = m;
        }

        c.validate()?;
        Ok(c)
    }

    fn greedy_mode(&self, mean_ues: f64) -> GreedyMode {
        if self.strict_paper {
            GreedyMode::Literal { mean_ues }
        } else {
            GreedyMode::Repaired
        }
    }
}

fn parse_seeds(s: &str) -> leo_alloc::Result<Vec<u64>> {
    let bad = || Error::field("seeds", format!("cannot parse '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..=b).collect());
    }
    s.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect()
}

/// Exit status after a run that produced a result.
enum Outcome {
    Done,
    Infeasible,
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> leo_alloc::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value)?)?;
    Ok(path)
}

fn solve(instance: &Path, algorithm: Algorithm, alg: &AlgArgs, out: &Path) -> leo_alloc::Result<Outcome> {
    let inst = ProblemInstance::load(instance)?;
    let config = alg.config()?;
    let source = instance.display().to_string();
    match algorithm {
        Algorithm::Alg1 => match run_algorithm1(&inst, &config) {
            Ok(sol) => {
                let report = json!({
                    "algorithm": "alg1",
                    "instance": source,
                    "seed": inst.seed,
                    "config": config,
                    "status": sol.status,
                    "iterations": sol.iterations(),
                    "total_power_w": sol.metrics.total_power_w,
                    "total_power_dbw": sol.metrics.total_power_dbw,
                    "satisfaction": sol.satisfaction,
                    "connections": sol.per_leo_connections,
                    "bandwidth_utilization": sol.metrics.utilization,
                    "objective_trace": sol.objective_trace,
                    "association": sol.association,
                    "allocation": sol.allocation,
                });
                let path = write_json(out, "solution.json", &report)?;
                println!(
                    "alg1: {:?} after {} iterations, total power {:.4} dBW, satisfaction {:.3} -> {}",
                    sol.status,
                    sol.iterations(),
                    sol.metrics.total_power_dbw,
                    sol.satisfaction,
                    path.display()
                );
                Ok(Outcome::Done)
            }
            Err(e) if e.is_infeasible() => {
                let report = json!({
                    "algorithm": "alg1",
                    "instance": source,
                    "seed": inst.seed,
                    "config": config,
                    "status": "Infeasible",
                    "message": e.to_string(),
                });
                write_json(out, "solution.json", &report)?;
                eprintln!("infeasible: {e}");
                Ok(Outcome::Infeasible)
            }
            Err(e) => Err(e),
        },
        Algorithm::Greedy => {
            let mean = inst.ue_counts.iter().map(|&l| f64::from(l)).sum::<f64>() / inst.ue_counts.len().max(1) as f64;
            let res = run_greedy(&inst, &alg.greedy_mode(mean))?;
            let report = json!({
                "algorithm": "greedy",
                "instance": source,
                "seed": inst.seed,
                "strict_paper": alg.strict_paper,
                "feasible": res.feasible,
                "total_power_w": res.total_power,
                "total_power_dbw": watts_to_dbw(res.total_power),
                "satisfaction": res.satisfaction,
                "satisfied": res.satisfied,
                "connections": res.association.connections(),
                "association": res.association,
                "allocation": res.allocation,
            });
            let path = write_json(out, "solution.json", &report)?;
            println!(
                "greedy: total power {:.4} dBW, satisfaction {:.3} -> {}",
                watts_to_dbw(res.total_power),
                res.satisfaction,
                path.display()
            );
            Ok(if res.feasible { Outcome::Done } else { Outcome::Infeasible })
        }
    }
}

fn run(cli: Cli) -> leo_alloc::Result<Outcome> {
    match cli.command {
        Command::Generate { scenario, out } => {
            let cfg = scenario.load()?;
            let sc = generate_scenario(&cfg)?;
            let path = if out.extension().is_some_and(|e| e == "toml") {
                if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent)?;
                }
                out
            } else {
                std::fs::create_dir_all(&out)?;
                out.join(format!("instance_seed{}.toml", cfg.rng_seed))
            };
            sc.instance.save(&path)?;
            println!("{}", path.display());
            Ok(Outcome::Done)
        }
        Command::Solve {
            instance,
            algorithm,
            alg,
            out,
        } => solve(&instance, algorithm, &alg, &out),
        Command::Greedy {
            instance,
            strict_paper,
            out,
        } => {
            let alg = AlgArgs {
                rho: None,
                eps: None,
                max_iters: None,
                strict_paper,
            };
            solve(&instance, Algorithm::Greedy, &alg, &out)
        }
        Command::Experiment {
            experiment,
            scenario,
            alg,
            sweep,
            seeds,
            manifest,
            out,
        } => {
            let spec = if let Some(path) = manifest {
                load_manifest(path)?.spec
            } else {
                let kind: ExperimentKind = experiment
                    .ok_or_else(|| Error::InvalidInput("--experiment or --manifest is required".into()))?
                    .into();
                let mut spec = ExperimentSpec::new(kind, scenario.load()?);
                spec.algorithm = alg.config()?;
                spec.strict_paper = alg.strict_paper;
                if let Some(s) = sweep {
                    spec.sweep = s;
                }
                if let Some(s) = seeds {
                    spec.seeds = parse_seeds(&s)?;
                } else if let Some(s) = scenario.seed {
                    spec.seeds = vec![s];
                }
                spec
            };
            let (output, paths) = run_and_write(&spec, &out)?;
            for s in summarize(&spec, &output.rows) {
                println!(
                    "{}={} {}: feasible {:.2}, mean power {}, median iterations {}",
                    s.parameter,
                    s.value,
                    s.method,
                    s.feasible_fraction,
                    s.mean_power_dbw.map_or("-".into(), |p| format!("{p:.3} dBW")),
                    s.median_iterations
                );
            }
            for p in paths {
                println!("wrote {}", p.display());
            }
            Ok(Outcome::Done)
        }
        Command::Validate { instance, config } => {
            if instance.is_none() && config.is_none() {
                return Err(Error::InvalidInput("give --instance and/or --config".into()));
            }
            if let Some(p) = instance {
                let inst = ProblemInstance::load(&p)?;
                println!(
                    "{}: valid instance, M={} K={} N={}",
                    p.display(),
                    inst.num_satellites(),
                    inst.num_sue(),
                    inst.num_bs()
                );
            }
            if let Some(p) = config {
                config_from_toml(&std::fs::read_to_string(&p)?)?;
                println!("{}: valid configuration", p.display());
            }
            Ok(Outcome::Done)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(1),
        Err(e) if e.is_infeasible() => {
            eprintln!("infeasible: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
