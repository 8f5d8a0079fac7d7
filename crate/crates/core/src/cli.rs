//! The `noma-mec` command line: experiment runs, assignment audits,
//! standalone cluster solves and heuristic-vs-oracle comparisons.

use crate::channel::ChannelMatrix;
use crate::experiment::{
    files, parse_config, run_experiment, write_result_files, ExperimentSpec,
};
use crate::model::{audit_constraints, default_num_clusters, evaluate, SystemConfig};
use crate::oracle::{enumerate_optimal, TinyInstanceLimit};
use crate::power::{solve_all, solve_cluster, verify_exact, PowerError, SolverOptions};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "noma-mec",
    version,
    about = "Uplink NOMA + edge-computing resource allocation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed. Resolution order: config file, NOMA_MEC_SEED, this flag, 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel replications (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output format for experiment results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment sweep from a config file and write result tables.
    Run {
        /// Experiment config (`[section]` / `key = value` text).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the result files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay an exported assignment through the constraint audit.
    Audit {
        /// Config file providing the system dimensions.
        #[arg(long)]
        config: PathBuf,
        /// Channel gains CSV (`user,rb,gain_db`).
        #[arg(long)]
        channels: PathBuf,
        /// Task table CSV.
        #[arg(long)]
        tasks: PathBuf,
        /// Assignment dump to audit.
        #[arg(long)]
        assignment: PathBuf,
    },
    /// Solve one cluster power problem from a cluster-description file.
    Solve {
        #[arg(long)]
        cluster: PathBuf,
        /// Optional convergence-trace CSV destination.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare the heuristic against the exhaustive oracle on tiny instances.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Optional directory for `oracle_comparison.csv` (stdout otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Entry point used by `main`.
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own usage/help text and picks exit code 2
            // for usage errors, 0 for --help/--version.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Seed resolution: config file beats everything; otherwise NOMA_MEC_SEED
/// beats --seed; otherwise --seed; otherwise 0.
fn resolve_seed(config_seed: Option<u64>, flag_seed: Option<u64>) -> Result<u64> {
    if let Some(seed) = config_seed {
        return Ok(seed);
    }
    if let Ok(raw) = std::env::var("NOMA_MEC_SEED") {
        return raw
            .parse()
            .with_context(|| format!("NOMA_MEC_SEED must be an integer, got `{raw}`"));
    }
    Ok(flag_seed.unwrap_or(0))
}

fn with_thread_pool<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T>
where
    T: Send,
{
    match threads {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building thread pool")?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out } => {
            let mut spec = load_spec(&config)?;
            spec.seed = Some(resolve_seed(spec.seed, cli.seed)?);
            let table = with_thread_pool(cli.threads, || run_experiment(&spec))??;
            let files =
                write_result_files(&table, &out, cli.format == Format::Json)?;
            for path in &files {
                println!("wrote {}", path.display());
            }
            let feasible: usize = table.instances.iter().filter(|r| r.feasible).count();
            println!(
                "{}: {} instances ({} feasible), seed {}",
                table.id,
                table.instances.len(),
                feasible,
                table.master_seed
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit { config, channels, tasks, assignment } => {
            let spec = load_spec(&config)?;
            let system = resolved_system(&spec);
            let channel_matrix = ChannelMatrix::read_csv(open(&channels)?)
                .with_context(|| format!("reading channels `{}`", channels.display()))?;
            if channel_matrix.num_users() != system.num_users
                || channel_matrix.num_rbs() != system.num_freq_rbs
            {
                bail!(
                    "channel matrix is {}x{}, config expects {}x{}",
                    channel_matrix.num_users(),
                    channel_matrix.num_rbs(),
                    system.num_users,
                    system.num_freq_rbs
                );
            }
            let task_list = files::read_tasks_csv(open(&tasks)?)
                .with_context(|| format!("reading tasks `{}`", tasks.display()))?;
            if task_list.len() != system.num_users {
                bail!("task table has {} users, config expects {}", task_list.len(), system.num_users);
            }
            let assignment = files::read_assignment(open(&assignment)?, &system)
                .with_context(|| format!("reading assignment `{}`", assignment.display()))?;
            let audit = audit_constraints(&assignment, &channel_matrix, &task_list, &system);
            for check in &audit.checks {
                if check.passed {
                    println!("{} PASS", check.id);
                } else {
                    println!("{} FAIL ({} violation(s))", check.id, check.violations.len());
                    for v in &check.violations {
                        println!("  {v}");
                    }
                }
            }
            Ok(if audit.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Solve { cluster, trace } => {
            let problem = files::read_cluster_problem(open(&cluster)?)
                .with_context(|| format!("reading cluster `{}`", cluster.display()))?;
            match solve_cluster(&problem, &SolverOptions::default()) {
                Ok(solution) => {
                    println!("objective_w = {}", solution.total_power_w);
                    println!("kkt_residual = {:e}", solution.diagnostics.kkt_residual);
                    println!("user,rb,power_w");
                    for (j, member) in problem.members.iter().enumerate() {
                        for (k, &rb) in problem.rb_ids.iter().enumerate() {
                            println!("{},{rb},{}", member.user, solution.powers_w[j][k]);
                        }
                    }
                    let exact = verify_exact(&problem, &solution.powers_w)?;
                    println!("user,rate_bps,min_rate_bps,margin_bps");
                    for (j, member) in problem.members.iter().enumerate() {
                        println!(
                            "{},{},{},{}",
                            member.user,
                            exact.rates_bps[j],
                            member.min_rate_bps,
                            exact.margins_bps[j]
                        );
                    }
                    if let Some(path) = trace {
                        let mut file = File::create(&path)
                            .with_context(|| format!("creating `{}`", path.display()))?;
                        crate::power::write_trace_csv(&solution.diagnostics.trace, &mut file)?;
                        println!("wrote {}", path.display());
                    }
                    Ok(ExitCode::SUCCESS)
                }
                Err(PowerError::Infeasible(cert)) => {
                    eprintln!("infeasible cluster power problem:");
                    eprint!("{cert}");
                    Ok(ExitCode::FAILURE)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Oracle { config, out } => {
            let mut spec = load_spec(&config)?;
            spec.seed = Some(resolve_seed(spec.seed, cli.seed)?);
            let csv = with_thread_pool(cli.threads, || oracle_comparison(&spec))??;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    let path = dir.join("oracle_comparison.csv");
                    std::fs::write(&path, &csv)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open `{}`", path.display()))?,
    ))
}

fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    parse_config(path).with_context(|| format!("loading config `{}`", path.display()))
}

/// The concrete system config implied by a spec (auto cluster count resolved).
fn resolved_system(spec: &ExperimentSpec) -> SystemConfig {
    let mut system = spec.base.clone();
    if spec.auto_clusters {
        system.num_clusters =
            default_num_clusters(system.num_users, system.max_users_per_rb);
    }
    system
}

/// Heuristic vs oracle over the spec's instances, as CSV text.
fn oracle_comparison(spec: &ExperimentSpec) -> Result<String> {
    use crate::experiment::{generate_instance, SweepVar};
    use crate::heuristic::{run_heuristic, HeuristicOptions};
    use crate::seed::derive_seed;

    let master = spec.seed.unwrap_or(0);
    let solver = SolverOptions::default();
    let limit = TinyInstanceLimit::default();
    let mut out = String::from("instance,oracle_energy_mj,heuristic_energy_mj,gap_pct\n");
    let mut instance_id = 0usize;
    for (si, &value) in spec.values.iter().enumerate() {
        for rep in 0..spec.replications {
            let mut cfg = spec.base.clone();
            if spec.sweep == SweepVar::NumUsers {
                cfg.num_users = value.round() as usize;
            } else if spec.sweep == SweepVar::NumFreqRbs {
                cfg.num_freq_rbs = value.round() as usize;
            }
            if spec.auto_clusters {
                cfg.num_clusters = default_num_clusters(cfg.num_users, cfg.max_users_per_rb);
            }
            cfg.validate().map_err(|e| anyhow::anyhow!(e.to_string()))?;
            let seed = derive_seed(master, "instance", &[si as u64, 0, rep as u64]);
            let (channels, tasks) = generate_instance(spec, &cfg, &spec.tasks, seed)?;
            let heur = run_heuristic(&channels, &tasks, &cfg, &HeuristicOptions::default())
                .map_err(|e| anyhow::anyhow!(e.to_string()))?;
            let solved = solve_all(&heur.assignment, &channels, &tasks, &cfg, &solver);
            let report = evaluate(&solved.assignment, &channels, &tasks, &cfg);
            let oracle = enumerate_optimal(&channels, &tasks, &cfg, &limit, &solver)?;
            let heur_mj = report.total_energy_j * 1e3;
            let oracle_mj = oracle.total_energy_j * 1e3;
            let gap = (heur_mj - oracle_mj) / oracle_mj * 100.0;
            out.push_str(&format!("{instance_id},{oracle_mj},{heur_mj},{gap}\n"));
            instance_id += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_resolution_order() {
        // No env var in unit tests (not set by the harness): config wins,
        // then the flag, then zero.
        std::env::remove_var("NOMA_MEC_SEED");
        assert_eq!(resolve_seed(Some(5), Some(9)).unwrap(), 5);
        assert_eq!(resolve_seed(None, Some(9)).unwrap(), 9);
        assert_eq!(resolve_seed(None, None).unwrap(), 0);
        std::env::set_var("NOMA_MEC_SEED", "33");
        assert_eq!(resolve_seed(None, Some(9)).unwrap(), 33);
        assert_eq!(resolve_seed(Some(5), Some(9)).unwrap(), 5);
        std::env::remove_var("NOMA_MEC_SEED");
    }
}
