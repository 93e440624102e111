//! Command-line front end: Monte Carlo sweeps, fixed-scenario replay, and
//! graph dumps for debugging.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fogran::channel::ChannelState;
use fogran::config::{ConfigFile, SweepVar};
use fogran::experiment::{run_experiment_to_file, summary_table, ExperimentSpec};
use fogran::model::replay_scenario;
use fogran::nc::{D2dKind, Source};
use fogran::schedulers::{schedule_slot, Scheme, SchemeState, SlotTrace};
use fogran::sim::run_episode;

#[derive(Parser)]
#[command(name = "fogran", about = "D2D-aided fog-RAN completion-time simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep over users / files / file size.
    Run(RunArgs),
    /// Single verbose episode on a fixed scenario file.
    Replay(ReplayArgs),
    /// Emit the first slot's scheduling graphs of a replay in DOT format.
    DumpGraphs(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated scheme ids.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<String>,
    /// Sweep the number of users over these values.
    #[arg(long, value_delimiter = ',')]
    users: Vec<f64>,
    /// Sweep the number of files over these values.
    #[arg(long, value_delimiter = ',')]
    files: Vec<f64>,
    /// Sweep the file size (bits) over these values.
    #[arg(long = "file-size-bits", value_delimiter = ',')]
    file_size_bits: Vec<f64>,
    /// QoS rate floor in bits/s/Hz.
    #[arg(long)]
    rth: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Disable per-slot fading.
    #[arg(long)]
    no_fading: bool,
    /// Worker threads for the episode pool.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReplayArgs {
    /// TOML config carrying a [fixed] scenario section.
    #[arg(long)]
    config: PathBuf,
    /// Scheme to replay.
    #[arg(long, default_value = "joint")]
    scheme: String,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Replay(args) => replay(args, false),
        Command::DumpGraphs(args) => replay(args, true),
    }
}

fn run(args: RunArgs) -> ExitCode {
    let mut cfg = match &args.config {
        Some(path) => match ConfigFile::load(path) {
            Ok(c) => c,
            Err(e) => return fail(e),
        },
        None => ConfigFile::default(),
    };
    if let Some(rth) = args.rth {
        cfg.scenario.rate_threshold = rth;
    }
    if args.no_fading {
        cfg.scenario.fading = false;
    }
    if let Some(it) = args.iterations {
        cfg.experiment.iterations = it;
    }
    if let Some(seed) = args.seed {
        cfg.experiment.base_seed = seed;
    }
    if !args.scheme.is_empty() {
        cfg.experiment.schemes = args.scheme.clone();
    }

    let sweeps: Vec<(SweepVar, &Vec<f64>)> = [
        (SweepVar::Users, &args.users),
        (SweepVar::Files, &args.files),
        (SweepVar::FileSize, &args.file_size_bits),
    ]
    .into_iter()
    .filter(|(_, v)| !v.is_empty())
    .collect();
    if sweeps.len() > 1 {
        eprintln!("error: only one of --users / --files / --file-size-bits may be swept");
        return ExitCode::from(2);
    }
    if let Some((var, values)) = sweeps.into_iter().next() {
        cfg.experiment.sweep_var = Some(var);
        cfg.experiment.sweep_values = values.clone();
    }

    if let Some(threads) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            return fail(e);
        }
    }

    let spec = match ExperimentSpec::from_config(&cfg) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    match run_experiment_to_file(&spec, &args.out, false) {
        Ok((output, any_dead_point)) => {
            print!("{}", summary_table(&output.rows));
            println!("wrote {}", args.out.display());
            if any_dead_point {
                eprintln!("warning: at least one parameter point stalled in every iteration");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => fail(e),
    }
}

fn replay(args: ReplayArgs, dump_graphs: bool) -> ExitCode {
    let cfg = match ConfigFile::load(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let Some(fixed) = &cfg.fixed else {
        eprintln!("error: replay requires a [fixed] section in the config");
        return ExitCode::from(2);
    };
    let scheme: Scheme = match args.scheme.parse() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let (inst, side) = replay_scenario(&cfg.scenario, fixed);
    let seed = args.seed.unwrap_or(cfg.experiment.base_seed);

    if dump_graphs {
        let channel = ChannelState::for_slot(&inst, seed, 1);
        let mut state = SchemeState::new(scheme, &inst, &side);
        let mut rng = rand::SeedableRng::seed_from_u64(seed);
        let mut trace = SlotTrace::default();
        let _ = schedule_slot(scheme, &inst, &channel, &side, &mut state, &mut rng, Some(&mut trace));
        if let Some((g, chosen)) = &trace.errh_graph {
            println!(
                "{}",
                g.to_dot("errh_schedule", |v, p| format!(
                    "e{} files={:?} rate={} targets={:?}{}",
                    p.errh,
                    p.files.iter().collect::<Vec<_>>(),
                    p.rate,
                    p.targeted.iter().collect::<Vec<_>>(),
                    if chosen.contains(&v) { " *" } else { "" }
                ))
            );
        }
        if let Some((g, chosen)) = &trace.d2d_graph {
            println!(
                "{}",
                g.to_dot("d2d_conflict", |v, p| format!(
                    "u{} r={} -> u{} f{}{}",
                    p.tx,
                    p.rate,
                    p.rx,
                    p.file,
                    if chosen.contains(&v) { " *" } else { "" }
                ))
            );
        }
        if let Some((g, chosen)) = &trace.coord_graph {
            println!(
                "{}",
                g.to_dot("coordinated_schedule", |v, p| format!(
                    "e{} u{} f{} R={}{}",
                    p.errh,
                    p.user,
                    p.file,
                    p.rate,
                    if chosen.contains(&v) { " *" } else { "" }
                ))
            );
        }
        return ExitCode::SUCCESS;
    }

    let result = run_episode(&inst, &side, scheme, seed, true);
    for (i, rec) in result.slot_log.iter().enumerate() {
        println!("slot {} (t_max = {} s):", i + 1, rec.t_max);
        for (e, plan) in rec.decision.errh_plan_iter() {
            println!(
                "  eRRH {e}: files {:?} rate {} -> users {:?}",
                plan.combination.files.iter().collect::<Vec<_>>(),
                plan.adopted_rate,
                plan.targeted.iter().collect::<Vec<_>>()
            );
        }
        for plan in &rec.decision.d2d_plans {
            let tx = match plan.combination.source {
                Source::User(k) => k,
                Source::Errh(_) => unreachable!(),
            };
            let kind = match plan.d2d_kind {
                Some(D2dKind::IdleTime { host_errh }) => format!(" (idle time of eRRH {host_errh})"),
                _ => String::new(),
            };
            println!(
                "  user {tx}: files {:?} rate {} -> users {:?}{kind}",
                plan.combination.files.iter().collect::<Vec<_>>(),
                plan.adopted_rate,
                plan.targeted.iter().collect::<Vec<_>>()
            );
        }
    }
    if result.stalled {
        println!("episode stalled after {} slots", result.slots);
        return ExitCode::from(1);
    }
    println!("completed in {} slots, T_o = {} s", result.slots, result.overall);
    ExitCode::SUCCESS
}

fn fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}
