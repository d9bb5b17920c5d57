use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use graphgame::{
    build_kernel, classify_case, compute_mixed_equilibrium_with, dobrushin, empirical_distribution, equilibrium_gap,
    equilibrium_policies, expected_payoff, factorize, folk_check, io, lemma_bound, log_checkpoints, matrix_power,
    payoff_report, pure_c_equilibria, run_target, simulate_repeated, simulate_replicas, tv_series, validity_threshold,
    violations_at, write_empirical_csv, write_joint_csv, CaseLabel, ChainChoice, Distribution, Error, GGame, Graph,
    GraphDoc, Horizon, Information, Initialization, KernelFamily, MixedProfile, RepeatedConfig, Schedule,
    SolverOptions, TransitionKernel,
};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "graphgame", version, about = "Games on strategy graphs and graph-constrained Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List pure C-equilibria and per-profile violation witnesses.
    Analyze {
        game: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Compute a mixed C-equilibrium.
    Mixed {
        game: PathBuf,
        /// Equilibrium gap accepted by the solver.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iterations: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Build the chain kernel for a target and dump it.
    McmcBuild {
        graph: PathBuf,
        target: PathBuf,
        #[command(flatten)]
        schedule: ScheduleArg,
        /// Schedule time whose kernel to dump (scheduled chains only).
        #[arg(long)]
        time: Option<u64>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run the chain for a target and write trace, empirical and TV series.
    McmcRun {
        graph: PathBuf,
        target: PathBuf,
        #[command(flatten)]
        schedule: ScheduleArg,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Final TV distance at or below which the run counts as converged.
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        /// Leading states left out of the reported burn-in TV; estimators use all states.
        #[arg(long, default_value_t = 0)]
        burn_in: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        trace_stride: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Factorize a game's graph into per-coalition factor graphs.
    Decompose {
        game: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Play the repeated game with chain policies realizing a mixed equilibrium.
    Repeated {
        game: PathBuf,
        #[command(flatten)]
        play: PlayArgs,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        t_eval: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        replicas: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        trace_stride: u64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Check payoff matching and stock deviations for a mixed equilibrium.
    FolkCheck {
        game: PathBuf,
        #[command(flatten)]
        play: PlayArgs,
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
        t_eval: u64,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(2..))]
        replicas: u64,
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Args)]
struct OutDir {
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ScheduleArg {
    /// theoretical | powergap:C:E | counterexample
    #[arg(long, default_value = "powergap:1:3")]
    schedule: String,
}

#[derive(Args)]
struct PlayArgs {
    /// Mixed profile JSON; computed when absent.
    #[arg(long)]
    mixed: Option<PathBuf>,
    #[command(flatten)]
    schedule: ScheduleArg,
    /// Use a homogeneous chain within this TV distance of each target instead of a schedule.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

/// Schedule from its flag; `theoretical` needs the size of the chain's state space.
fn parse_schedule(text: &str, n: usize) -> anyhow::Result<Schedule> {
    let schedule = match text.split(':').collect::<Vec<_>>().as_slice() {
        ["theoretical"] => Schedule::Theoretical { n: n as u32 },
        ["counterexample"] => Schedule::Doubling,
        ["powergap", c, e] => Schedule::PowerGap {
            c: c.parse().with_context(|| format!("bad constant in --schedule {text}"))?,
            e: e.parse().with_context(|| format!("bad exponent in --schedule {text}"))?,
        },
        _ => bail!(Error::InvalidArgument(format!(
            "unknown schedule `{text}` (expected theoretical, powergap:C:E or counterexample)"
        ))),
    };
    schedule.validate()?;
    Ok(schedule)
}

/// Size of the component holding `mu`'s support.
fn component_size(g: &Graph, mu: &Distribution) -> usize {
    let support = mu.support();
    g.connected_components().into_iter().find(|c| support.is_subset(c)).map_or(g.len(), |c| c.len())
}

fn prepare_out(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("cannot write {}", path.display()))?))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn labels(game: &GGame, h: usize) -> &[String] {
    &game.strategies()[h]
}

fn analyze(game_path: &Path, out: &Path) -> anyhow::Result<()> {
    let game = io::load_game(game_path)?;
    let equilibria = pure_c_equilibria(&game);
    let names = game.structure().names();
    let profiles: Vec<_> = (0..game.profile_count())
        .map(|i| {
            let witnesses: Vec<_> = violations_at(&game, i)
                .into_iter()
                .map(|v| {
                    json!({
                        "coalition": names[v.coalition],
                        "neighbor": game.profile_label(v.neighbor),
                        "deviation": game.profile_label(v.deviation),
                        "gain": v.gain,
                    })
                })
                .collect();
            json!({
                "profile": game.profile_label(i),
                "equilibrium": witnesses.is_empty(),
                "violations": witnesses,
            })
        })
        .collect();
    let listed: Vec<&str> = equilibria
        .profiles()
        .iter()
        .map(|s| game.profile_index(s).map(|i| game.profile_label(i)))
        .collect::<Result<_, _>>()?;
    prepare_out(out)?;
    write_json(out, "equilibria.json", &json!({ "equilibria": listed, "profiles": profiles }))?;
    println!("{} pure C-equilibria among {} profiles", listed.len(), game.profile_count());
    for label in listed {
        println!("  {label}");
    }
    Ok(())
}

fn mixed_profile(game: &GGame, path: Option<&Path>, tol: f64) -> anyhow::Result<MixedProfile> {
    match path {
        Some(p) => Ok(io::load_mixed(p, game)?),
        None => Ok(compute_mixed_equilibrium_with(game, &SolverOptions { tol, ..SolverOptions::default() })?),
    }
}

fn mixed(game_path: &Path, tol: f64, max_iterations: usize, out: &Path) -> anyhow::Result<()> {
    let game = io::load_game(game_path)?;
    let opts = SolverOptions { tol, max_iterations, ..SolverOptions::default() };
    let profile = compute_mixed_equilibrium_with(&game, &opts)?;
    let gap = equilibrium_gap(&game, &profile)?;
    let names = game.structure().names();
    let payoffs: serde_json::Map<String, serde_json::Value> = (0..game.coalitions())
        .map(|h| Ok((names[h].clone(), json!(expected_payoff(&game, &profile, h)?))))
        .collect::<anyhow::Result<_>>()?;
    prepare_out(out)?;
    let text = profile.to_json(&game)?;
    fs::write(out.join("mixed.json"), format!("{text}\n")).context("cannot write mixed.json")?;
    write_json(out, "mixed_summary.json", &json!({ "gap": gap, "expected_payoffs": payoffs }))?;
    println!("{text}");
    println!("equilibrium gap {gap:.3e}");
    Ok(())
}

/// The kernel driving a target at schedule time `time`, plus its level and
/// smoothing index when the chain is scheduled.
fn kernel_for(
    mu: &Distribution,
    g: &Graph,
    schedule: &Schedule,
    time: Option<u64>,
) -> anyhow::Result<(TransitionKernel, Option<(u64, u64)>)> {
    match classify_case(g, mu)? {
        CaseLabel::PointMass | CaseLabel::SupportConnected => {
            let support = mu.support();
            let sub = g.induced_subgraph(&support)?;
            let local = Distribution::normalized(support.iter().map(|&s| mu.mass(s)).collect())?;
            Ok((build_kernel(&local, &sub)?, None))
        }
        CaseLabel::SupportInComponent => {
            let family = KernelFamily::new(mu, g, schedule.clone())?;
            let t = time.unwrap_or(schedule.first_time());
            let level = schedule.level_at(t)?;
            Ok(((*family.kernel_at(t)?).clone(), Some((level, schedule.smoothing_k(level)))))
        }
        CaseLabel::SupportSplit => Err(Error::SupportSplit.into()),
    }
}

fn kernel_summary(kernel: &TransitionKernel, scheduled: Option<(u64, u64)>) -> anyhow::Result<serde_json::Value> {
    let n = kernel.len();
    let power = matrix_power(kernel.matrix(), (n.max(2) - 1) as u32);
    let mut summary = json!({
        "states": kernel.labels(),
        "p": kernel.p(),
        "dobrushin": dobrushin(kernel.matrix())?,
        "dobrushin_power": dobrushin(&power)?,
        "detailed_balance_residual": kernel.detailed_balance_residual(),
    });
    if let Some((level, k)) = scheduled {
        summary["level"] = json!(level);
        summary["k"] = json!(k);
        if n >= 2 {
            summary["dobrushin_bound"] = json!(lemma_bound(n, k)?);
        }
    }
    Ok(summary)
}

fn mcmc_build(graph: &Path, target: &Path, schedule: &str, time: Option<u64>, out: &Path) -> anyhow::Result<()> {
    let g = io::load_graph(graph)?;
    let mu = io::load_target(target, &g)?;
    let case = classify_case(&g, &mu)?;
    let schedule = parse_schedule(schedule, component_size(&g, &mu))?;
    let (kernel, scheduled) = kernel_for(&mu, &g, &schedule, time)?;
    let mut summary = kernel_summary(&kernel, scheduled)?;
    summary["case"] = json!(case);
    summary["validity_threshold"] = json!(validity_threshold(&mu));
    if case == CaseLabel::SupportInComponent {
        summary["schedule"] = json!(schedule);
    }
    prepare_out(out)?;
    kernel.write_csv(create(out, "kernel.csv")?)?;
    write_json(out, "kernel.json", &summary)?;
    println!("{case:?} target, kernel over {} states written to {}", kernel.len(), out.join("kernel.csv").display());
    Ok(())
}

struct RunArgs<'a> {
    graph: &'a Path,
    target: &'a Path,
    schedule: &'a str,
    steps: u64,
    seed: u64,
    tol: f64,
    burn_in: u64,
    stride: u64,
    out: &'a Path,
}

fn mcmc_run(a: RunArgs<'_>) -> anyhow::Result<bool> {
    let g = io::load_graph(a.graph)?;
    let mu = io::load_target(a.target, &g)?;
    let case = classify_case(&g, &mu)?;
    let schedule = parse_schedule(a.schedule, component_size(&g, &mu))?;
    let trace = run_target(&mu, &g, &schedule, None, a.steps, a.seed)?;
    let last = schedule.first_time().saturating_add(a.steps - 1);
    let (kernel, scheduled) = kernel_for(&mu, &g, &schedule, Some(last))?;

    let series = tv_series(&trace, &mu, &log_checkpoints(a.steps))?;
    let final_tv = series.last().map_or(f64::NAN, |&(_, tv)| tv);
    let empirical = empirical_distribution(&trace)?;
    let burn_in_tv = if a.burn_in > 0 && a.burn_in < a.steps {
        let tail = &trace.states[a.burn_in as usize..];
        let mut counts = vec![0u64; g.len()];
        tail.iter().for_each(|&s| counts[s] += 1);
        let freq = Distribution::normalized(counts.iter().map(|&c| c as f64).collect())?;
        Some(freq.total_variation(&mu))
    } else {
        None
    };
    let converged = final_tv <= a.tol;

    prepare_out(a.out)?;
    kernel.write_csv(create(a.out, "kernel.csv")?)?;
    trace.write_csv(g.labels(), a.stride as usize, create(a.out, "trace.csv")?)?;
    write_empirical_csv(&trace, g.labels(), create(a.out, "empirical.csv")?)?;
    let mut w = csv::Writer::from_writer(create(a.out, "tv.csv")?);
    w.write_record(["t", "tv"])?;
    for (t, tv) in &series {
        w.write_record([t.to_string(), format!("{tv:.16e}")])?;
    }
    w.flush()?;
    let mut summary = json!({
        "case": case,
        "steps": a.steps,
        "seed": a.seed,
        "final_tv": final_tv,
        "tol": a.tol,
        "converged": converged,
        "burn_in": a.burn_in,
        "burn_in_tv": burn_in_tv,
        "empirical": g.labels().iter().cloned().zip(empirical.masses().iter().map(|&m| json!(m))).collect::<serde_json::Map<_, _>>(),
        "kernel": kernel_summary(&kernel, scheduled)?,
    });
    if case == CaseLabel::SupportInComponent {
        summary["schedule"] = json!(schedule);
    }
    write_json(a.out, "summary.json", &summary)?;
    println!(
        "{case:?} target, {} steps, final TV {final_tv:.4} ({})",
        a.steps,
        if converged { "converged" } else { "not converged" }
    );
    Ok(converged)
}

fn decompose(game_path: &Path, out: &Path) -> anyhow::Result<()> {
    let game = io::load_game(game_path)?;
    let dec = factorize(game.graph(), game.strategies())?;
    let factors: Vec<_> = dec
        .factors()
        .iter()
        .zip(game.structure().names())
        .map(|(f, name)| json!({ "coalition": name, "graph": GraphDoc::from(f.clone()) }))
        .collect();
    prepare_out(out)?;
    write_json(out, "factors.json", &factors)?;
    for (h, f) in dec.factors().iter().enumerate() {
        println!("{}: {} strategies, {} edges", game.structure().names()[h], f.len(), f.edge_count());
    }
    Ok(())
}

fn chain_choice(play: &PlayArgs, game: &GGame) -> anyhow::Result<ChainChoice> {
    if let Some(epsilon) = play.epsilon {
        return Ok(ChainChoice::Smoothed { epsilon });
    }
    let n = (0..game.coalitions()).map(|h| game.space_size(h)).max().unwrap_or(1);
    Ok(ChainChoice::Schedule(parse_schedule(&play.schedule.schedule, n)?))
}

fn repeated(
    game_path: &Path,
    play: &PlayArgs,
    t_eval: u64,
    replicas: u64,
    stride: u64,
    out: &Path,
) -> anyhow::Result<()> {
    let game = io::load_game(game_path)?;
    let dec = factorize(game.graph(), game.strategies())?;
    let mixed = mixed_profile(&game, play.mixed.as_deref(), play.tol)?;
    let policies = equilibrium_policies(&game, &dec, &mixed, &chain_choice(play, &game)?)?;
    let config = RepeatedConfig::new(
        game.clone(),
        Horizon::Infinite { t_eval },
        Information::Minimal,
        Initialization::Players,
        policies,
    )?;
    let recorded = simulate_repeated(&config, play.seed)?;
    let runs = if replicas == 1 { vec![recorded.clone()] } else { simulate_replicas(&config, play.seed, replicas)? };
    let report = payoff_report(&config, &runs);
    prepare_out(out)?;
    write_json(out, "report.json", &report)?;
    if let Some(traces) = &recorded.components {
        let labels: Vec<Vec<String>> = (0..game.coalitions()).map(|h| labels(&game, h).to_vec()).collect();
        write_joint_csv(traces, game.structure().names(), &labels, stride as usize, create(out, "trace.csv")?)?;
    }
    for c in &report.coalitions {
        println!(
            "{}: final average {:.4}, tail liminf {:.4} (se {:.4}, {} replicas)",
            c.coalition, c.final_average, c.tail_liminf_estimate, c.stderr, c.replicas
        );
    }
    Ok(())
}

fn folk(game_path: &Path, play: &PlayArgs, t_eval: u64, replicas: u64, out: &Path) -> anyhow::Result<bool> {
    let game = io::load_game(game_path)?;
    factorize(game.graph(), game.strategies())?;
    let mixed = mixed_profile(&game, play.mixed.as_deref(), play.tol)?;
    let report = folk_check(&game, &mixed, &chain_choice(play, &game)?, t_eval, replicas, play.seed)?;
    prepare_out(out)?;
    write_json(out, "folk_report.json", &report)?;
    for p in &report.payoffs {
        println!("{}: expected {:.4}, tolerance {:.4}, {}", p.coalition, p.expected, p.tolerance, verdict(p.pass));
    }
    let names = game.structure().names();
    for d in &report.deviations {
        println!(
            "{} {}: difference {:+.5} (margin {:.5}) {:?}",
            names[d.coalition], d.deviation, d.difference_mean, d.margin, d.verdict
        );
    }
    println!("{}", verdict(report.pass));
    Ok(report.pass)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::SupportSplit) => 3,
        Some(Error::NotDecomposable) => 4,
        Some(Error::NoConvergence { .. }) => 5,
        _ => 2,
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("GRAPHGAME_THREADS") {
        let n: usize = v.parse().with_context(|| format!("GRAPHGAME_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            bail!("GRAPHGAME_THREADS must be a positive integer, got `{v}`");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Analyze { game, out } => analyze(&game, &out.out).map(|_| true),
        Command::Mixed { game, tol, max_iterations, out } => mixed(&game, tol, max_iterations, &out.out).map(|_| true),
        Command::McmcBuild { graph, target, schedule, time, out } => {
            mcmc_build(&graph, &target, &schedule.schedule, time, &out.out).map(|_| true)
        }
        Command::McmcRun { graph, target, schedule, steps, seed, tol, burn_in, trace_stride, out } => {
            // Non-convergence is a finding, not an error.
            mcmc_run(RunArgs {
                graph: &graph,
                target: &target,
                schedule: &schedule.schedule,
                steps,
                seed,
                tol,
                burn_in,
                stride: trace_stride,
                out: &out.out,
            })
            .map(|_| true)
        }
        Command::Decompose { game, out } => decompose(&game, &out.out).map(|_| true),
        Command::Repeated { game, play, t_eval, replicas, trace_stride, out } => {
            repeated(&game, &play, t_eval, replicas, trace_stride, &out.out).map(|_| true)
        }
        Command::FolkCheck { game, play, t_eval, replicas, out } => folk(&game, &play, t_eval, replicas, &out.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
