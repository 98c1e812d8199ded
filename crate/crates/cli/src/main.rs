use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use etoe_dse::baseline::SaParams;
use etoe_dse::bench::{ads_preset, gen_bench, BenchParams, BoundRule, Topology};
use etoe_dse::eval::{adrs, aedrs, build_reference};
use etoe_dse::fdss::run_fdss;
use etoe_dse::latency::HandshakeSide;
use etoe_dse::lcso::GaParams;
use etoe_dse::model::{counting_rule, design_space_size, load_system};
use etoe_dse::oracle::{exhaustive_front, format_log};
use etoe_dse::pipeline::{
    oracle_front, read_front_csv, run_pipeline, write_front_csv, write_run, write_segments, Algo, Prepared, RunConfig,
};
use etoe_dse::{Chromosome, DseError};

#[derive(Parser)]
#[command(name = "etoe", version, about = "End-to-end latency constrained design space exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a system file and print its design-space size.
    Validate { system: PathBuf },
    /// List every constrained end-to-end path.
    Paths {
        system: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Latency breakdown and validity of one configuration.
    Estimate {
        system: PathBuf,
        /// Semicolon-joined genes: alternative indices, then MHz per component.
        #[arg(long)]
        chromosome: String,
    },
    /// Segment and prune the design space.
    Segment {
        system: PathBuf,
        #[arg(long, alias = "n-seg", default_value_t = 44)]
        segments: usize,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search for the Pareto front.
    Optimize(OptimizeArgs),
    /// Exhaustive search on a small system.
    Exhaustive {
        system: PathBuf,
        #[arg(long, default_value_t = etoe_dse::oracle::DEFAULT_LIMIT)]
        limit: u64,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Also write every evaluated configuration to log.csv.
        #[arg(long)]
        log: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score fronts against a reference set.
    Score {
        fronts: Vec<PathBuf>,
        /// Reference front CSV; the merged fronts are used when omitted.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic system.
    GenBench(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Lcso,
    Ga,
    Sa,
}

#[derive(Args)]
struct OptimizeArgs {
    system: PathBuf,
    #[arg(long, value_enum, default_value_t = AlgoArg::Lcso)]
    algo: AlgoArg,
    #[arg(long, default_value_t = 230)]
    pop: usize,
    #[arg(long, default_value_t = 800)]
    gens: usize,
    #[arg(long, alias = "n-seg", default_value_t = 44)]
    segments: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value_t = 0.5)]
    ps: f64,
    #[arg(long, default_value_t = 0.7)]
    pc: f64,
    #[arg(long, default_value_t = 0.5)]
    pm: f64,
    #[arg(long, default_value_t = 2.0)]
    weight_energy: f64,
    #[arg(long, default_value_t = 1.0)]
    weight_area: f64,
    /// Random draws allowed when filling the initial population (default 10 x pop).
    #[arg(long)]
    init_attempts: Option<usize>,
    /// Keep a single lowest-cost elite instead of the full Pareto elite.
    #[arg(long)]
    no_dynamic_elitism: bool,
    #[arg(long, default_value_t = 2000)]
    sa_iters: usize,
    #[arg(long, default_value_t = 1000.0)]
    sa_temp0: f64,
    #[arg(long, default_value_t = 850.0)]
    sa_temp_diff: f64,
    /// Static energy per FSM and handshake component.
    #[arg(long, default_value_t = 0.0)]
    idle_energy: f64,
    #[arg(long)]
    run_id: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Chain,
    Branch,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Ads,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 3)]
    psms: usize,
    #[arg(long, default_value_t = 2)]
    mccs_per_psm: usize,
    #[arg(long, default_value_t = 4)]
    alts_per_mcc: usize,
    #[arg(long, value_enum, default_value_t = TopologyArg::Chain)]
    topology: TopologyArg,
    /// Bound as a multiple of a mid-range configuration's worst path latency ("inf" for none).
    #[arg(long, default_value_t = 1.0)]
    tightness: f64,
    /// Fixed bound in seconds; overrides --tightness.
    #[arg(long)]
    bound: Option<f64>,
    #[arg(long, default_value_t = 4)]
    n_fpin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<DseError>() {
                Some(DseError::Validation(_) | DseError::Parse(_)) => ExitCode::from(2),
                Some(DseError::Infeasible(_)) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn prepare(system: &Path) -> Result<Prepared> {
    let model = load_system(system)?;
    Ok(Prepared::new(model)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { system } => {
            let m = load_system(&system)?;
            let n = m.grid().len() as u64;
            println!("{}: ok", system.display());
            println!(
                "psms {}  mccs {}  alternatives {}  links {}  constraints {}",
                m.psms.len(),
                m.n_mccs(),
                m.n_alternatives(),
                m.links.len(),
                m.constraints.len()
            );
            println!("frequency grid {} values, n_fpin {}", n, m.n_fpin);
            println!("design space {} = {}", design_space_size(&m, n), counting_rule(&m, n));
        }
        Command::Paths { system, out } => {
            let prep = prepare(&system)?;
            let text = prep.paths.to_text(&prep.graph);
            match out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Estimate { system, chromosome } => {
            let prep = prepare(&system)?;
            let chrom = Chromosome::decode(&chromosome, &prep.model)?;
            let eval = prep.evaluator();
            let ev = eval.evaluate(&chrom);
            if let Some(v) = &ev.violation {
                if matches!(v, etoe_dse::latency::Violation::Malformed(_)) {
                    bail!(DseError::Validation(format!("{v:?}")));
                }
            }
            println!("energy {}  area {}", ev.energy, ev.area);
            let labels = prep.paths.path_labels();
            let bounds = eval.path_bounds();
            for ((label, bound), b) in labels.iter().zip(&bounds).zip(eval.breakdowns(&chrom)?) {
                println!(
                    "{label}: {:.6e} s (bound {bound:.6e})  fsm {:.6e}  mcc {:.6e}  handshake {:.6e}",
                    b.total,
                    b.fsm_sum(),
                    b.mcc_sum(),
                    b.handshake_sum()
                );
                for (name, side, t) in &b.handshake {
                    let side = match side {
                        HandshakeSide::Receiver => "receiver",
                        HandshakeSide::Sender => "sender",
                    };
                    println!("    handshake {name} ({side}) {t:.6e}");
                }
            }
            match ev.violation {
                None => println!("valid"),
                Some(v) => println!("invalid: {v:?}"),
            }
        }
        Command::Segment {
            system,
            segments,
            threads,
            out,
        } => {
            let m = load_system(&system)?;
            let r = run_fdss(&m, segments, threads)?;
            write_segments(&out, &m, &r)?;
            println!(
                "{} combinations, {} segments accepted of {}, pruned size {}, with fallback {}",
                r.combos.combos.len(),
                r.accepted().count(),
                r.outcomes.len(),
                r.pruned_size(&m),
                r.total_size(&m)
            );
        }
        Command::Optimize(a) => optimize(a)?,
        Command::Exhaustive {
            system,
            limit,
            threads,
            log,
            out,
        } => {
            let prep = prepare(&system)?;
            let eval = prep.evaluator();
            let r = exhaustive_front(&eval, limit, log, threads)?;
            fs::create_dir_all(&out)?;
            write_front_csv(&out.join("front.csv"), "exhaustive", &prep, &oracle_front(&prep, &r))?;
            if let Some(records) = &r.log {
                fs::write(out.join("log.csv"), format_log(records, &eval.grid))?;
            }
            println!("{} configurations, {} feasible, {} on the front", r.evaluated, r.feasible, r.front.len());
        }
        Command::Score { fronts, reference, out } => score(&fronts, reference.as_deref(), out.as_deref())?,
        Command::GenBench(a) => {
            let params = match a.preset {
                Some(Preset::Ads) => ads_preset(a.bound.unwrap_or(0.1), a.seed),
                None => {
                    let topo = match a.topology {
                        TopologyArg::Chain => Topology::Chain,
                        TopologyArg::Branch => Topology::Branch,
                    };
                    let mut p = BenchParams::uniform(a.psms, a.mccs_per_psm, a.alts_per_mcc, topo, a.tightness, a.seed);
                    p.n_fpin = a.n_fpin;
                    if let Some(b) = a.bound {
                        p.bound = BoundRule::Absolute(b);
                    }
                    p
                }
            };
            let m = gen_bench(&params)?;
            m.write(&a.out)?;
            println!("wrote {}", a.out.display());
        }
    }
    Ok(())
}

fn optimize(a: OptimizeArgs) -> Result<()> {
    let prep = prepare(&a.system)?;
    let algo = match a.algo {
        AlgoArg::Lcso => Algo::Lcso,
        AlgoArg::Ga => Algo::Ga,
        AlgoArg::Sa => Algo::Sa,
    };
    let cfg = RunConfig {
        algo,
        ga: GaParams {
            k: a.pop,
            generations: a.gens,
            p_s: a.ps,
            p_c: a.pc,
            p_m: a.pm,
            weight_energy: a.weight_energy,
            weight_area: a.weight_area,
            init_attempt_limit: a.init_attempts,
            dynamic_elitism: !a.no_dynamic_elitism,
            ..GaParams::default()
        },
        sa: SaParams {
            temp_0: a.sa_temp0,
            temp_diff: a.sa_temp_diff,
            iters: a.sa_iters,
            weight_energy: a.weight_energy,
            weight_area: a.weight_area,
            ..SaParams::default()
        },
        n_seg: a.segments,
        seed: a.seed,
        threads: a.threads,
        idle_energy: a.idle_energy,
    };
    let out = run_pipeline(&prep, &cfg)?;
    let run_id = a.run_id.unwrap_or_else(|| format!("{algo}-s{}", a.seed));
    write_run(&a.out, &run_id, &a.system.display().to_string(), &prep, &cfg, &out)?;
    println!("{run_id}: {} front points", out.front.len());
    if out.front.is_empty() {
        bail!(DseError::Infeasible("no configuration satisfies the latency constraints".into()));
    }
    Ok(())
}

fn score(fronts: &[PathBuf], reference: Option<&Path>, out: Option<&Path>) -> Result<()> {
    if fronts.is_empty() {
        bail!(DseError::Validation("score needs at least one front file".into()));
    }
    let mut sets = Vec::new();
    for f in fronts {
        let rows = read_front_csv(f)?;
        sets.push(rows.iter().map(|r| (r.energy, r.area)).collect::<Vec<_>>());
    }
    let reference = match reference {
        Some(p) => {
            let rows = read_front_csv(p)?;
            build_reference(p.display().to_string(), &[rows.iter().map(|r| (r.energy, r.area)).collect()])
        }
        None => build_reference("merged", &sets),
    };
    let mut table = String::from("front,points,aedrs,adrs\n");
    for (f, set) in fronts.iter().zip(&sets) {
        let (e, d) = if set.is_empty() {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (aedrs(&reference.points, set)?, adrs(&reference.points, set)?)
        };
        table.push_str(&format!("{},{},{e},{d}\n", f.display(), set.len()));
    }
    print!("{table}");
    if let Some(p) = out {
        fs::write(p, &table).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}
