//! Command-line pipeline driver: simulate episodes, learn the hidden
//! product chain, distill and de-bias the task automaton, verify results,
//! and run benchmark matrices.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use taskauto::automata::{language_equivalent, Completion, TaskAutomaton};
use taskauto::config::Config;
use taskauto::debias::remove_environmental_bias;
use taskauto::digraph::Digraph;
use taskauto::distill::{cone_lump_with_partition, digraph_to_nfa, partition_to_dot};
use taskauto::episode::{goal_fraction, read_episodes, write_episodes, Episode};
use taskauto::error::{Error, Result};
use taskauto::hmm::{
    encode_episodes, extract_digraph, train_with, HmmParams, ObservationMode, TrainOptions,
};
use taskauto::matrixio::{
    hidden_state_names, read_matrix_csv, write_matrix_csv,
};
use taskauto::mdp::{LabelledMdp, Policy};
use taskauto::pipeline::{initial_params, InitKind, PipelineOptions};
use taskauto::product::{build_product, induce_chain};
use taskauto::{isomorphic, simulate_episodes, write_atomic};

#[derive(Parser)]
#[command(
    name = "taskauto",
    about = "learn task automata from reward episodes in labelled gridworlds",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate episodes in a gridworld under a hidden task automaton.
    Simulate(SimulateArgs),
    /// Estimate the hidden product chain from an episode file.
    Learn(LearnArgs),
    /// Distill a task automaton from a transition-matrix checkpoint.
    Distill(DistillArgs),
    /// Remove environmental bias from an automaton and minimize it.
    Debias(DebiasArgs),
    /// Compare an automaton against a reference.
    Verify(VerifyArgs),
    /// Run a benchmark matrix from a config file.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// Config file (`key = value` with `[section]` headers). Section `[run]`
    /// holds the run keys; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<Config> {
        match &self.config {
            Some(path) => Config::from_file(path),
            None => Ok(Config::default()),
        }
    }
}

fn pick<T: Copy>(flag: Option<T>, cfg: Option<T>, default: T) -> T {
    flag.or(cfg).unwrap_or(default)
}

/// `<prefix>.<suffix>` without clobbering dots already in the prefix.
fn out_path(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".");
    name.push(suffix);
    prefix.with_file_name(name)
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Grid description file.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Hidden task automaton file (emits the rewards).
    #[arg(long)]
    ta: Option<PathBuf>,
    /// Steps per episode.
    #[arg(long)]
    length: Option<usize>,
    /// Number of episodes.
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output episode file.
    #[arg(long)]
    out: PathBuf,
}

fn path_key(cfg: &Config, section: &str, key: &str) -> Option<PathBuf> {
    cfg.get(section, key).map(PathBuf::from)
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let grid_path = args
        .grid
        .or_else(|| path_key(&cfg, "run", "grid"))
        .ok_or_else(|| Error::Config("simulate needs --grid (or config key grid)".into()))?;
    let ta_path = args
        .ta
        .or_else(|| path_key(&cfg, "run", "ta"))
        .ok_or_else(|| Error::Config("simulate needs --ta (or config key ta)".into()))?;
    let length = pick(args.length, cfg.get_usize("run", "episode_length")?, 34);
    let n_episodes = pick(args.episodes, cfg.get_usize("run", "episodes")?, 275);
    let seed = pick(args.seed, cfg.get_u64("run", "seed")?, 0);

    let mdp = LabelledMdp::from_file(&grid_path)?;
    let ta = TaskAutomaton::from_file(&ta_path)?;
    let policy = Policy::uniform(&mdp);
    let episodes = simulate_episodes(&mdp, &ta, &policy, length, n_episodes, seed)?;
    write_episodes(&args.out, &episodes)?;
    println!("episodes={}", episodes.len());
    println!("episode_length={length}");
    println!("goal_fraction={:.4}", goal_fraction(&episodes));
    println!("out={}", args.out.display());
    Ok(())
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Episode file produced by `simulate`.
    #[arg(long)]
    episodes: Option<PathBuf>,
    /// Guessed number of automaton states (hidden blocks).
    #[arg(long)]
    k: Option<usize>,
    /// Transition initialization: spatial | uniform.
    #[arg(long)]
    init: Option<InitKind>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Smoothing constant for the spatial prior.
    #[arg(long)]
    smoothing: Option<f64>,
    /// Observation encoding: state | label.
    #[arg(long)]
    obs_mode: Option<String>,
    /// Re-estimate the emission matrix instead of keeping it fixed.
    #[arg(long)]
    reestimate_emissions: bool,
    /// Write an intermediate checkpoint every N passes.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Try k = 1..=N and keep the smallest consistent one.
    #[arg(long)]
    sweep_k_max: Option<usize>,
    /// Output prefix: writes <prefix>.transition.csv, <prefix>.report.txt,
    /// <prefix>.report.csv.
    #[arg(long)]
    out_prefix: PathBuf,
}

fn parse_obs_mode(s: Option<&str>) -> Result<ObservationMode> {
    match s {
        None | Some("state") => Ok(ObservationMode::State),
        Some("label") => Ok(ObservationMode::Label),
        Some(other) => Err(Error::Config(format!(
            "unknown obs-mode {other:?} (state|label)"
        ))),
    }
}

struct LearnSettings {
    k: usize,
    init: InitKind,
    tol: f64,
    max_iters: usize,
    seed: u64,
    smoothing: f64,
    obs_mode: ObservationMode,
    reestimate: bool,
}

impl LearnSettings {
    fn pipeline_options(&self, threshold: f64) -> PipelineOptions {
        PipelineOptions {
            k: self.k,
            init: self.init,
            seed: self.seed,
            smoothing: self.smoothing,
            threshold,
            obs_mode: self.obs_mode,
            train: TrainOptions {
                tol: self.tol,
                max_iters: self.max_iters,
                reestimate_emissions: self.reestimate,
            },
        }
    }
}

fn report_csv(settings: &LearnSettings, report: &taskauto::hmm::TrainReport) -> String {
    let mut out = String::from(
        "k,init,tol,iterations,final_delta,converged,log_likelihood,wall_time_secs,stale_rows\n",
    );
    let init = match settings.init {
        InitKind::Spatial => "spatial",
        InitKind::Uniform => "uniform",
    };
    let ll = report
        .log_likelihood_trace
        .last()
        .copied()
        .unwrap_or(f64::NAN);
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{:.3},{}\n",
        settings.k,
        init,
        settings.tol,
        report.iterations,
        report.final_delta,
        report.converged,
        ll,
        report.wall_time_secs,
        report.stale_rows
    ));
    out
}

fn cmd_learn(args: LearnArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let grid_path = args
        .grid
        .or_else(|| path_key(&cfg, "run", "grid"))
        .ok_or_else(|| Error::Config("learn needs --grid".into()))?;
    let episodes_path = args
        .episodes
        .or_else(|| path_key(&cfg, "run", "episodes_file"))
        .ok_or_else(|| Error::Config("learn needs --episodes".into()))?;
    let init = match args.init {
        Some(i) => i,
        None => cfg
            .get("run", "init")
            .map(|s| s.parse::<InitKind>().map_err(Error::Config))
            .transpose()?
            .unwrap_or(InitKind::Spatial),
    };
    let settings = LearnSettings {
        k: pick(args.k, cfg.get_usize("run", "k")?, 3),
        init,
        tol: pick(args.tol, cfg.get_f64("run", "tol")?, 1e-6),
        max_iters: pick(args.max_iters, cfg.get_usize("run", "max_iters")?, 10_000),
        seed: pick(args.seed, cfg.get_u64("run", "seed")?, 0),
        smoothing: pick(args.smoothing, cfg.get_f64("run", "smoothing")?, 1.0),
        obs_mode: parse_obs_mode(args.obs_mode.as_deref().or(cfg.get("run", "obs_mode")))?,
        reestimate: args.reestimate_emissions,
    };
    if settings.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }

    let mdp = LabelledMdp::from_file(&grid_path)?;
    let episodes = read_episodes(&episodes_path)?;
    if episodes.is_empty() {
        return Err(Error::Config("episode file is empty".into()));
    }

    if let Some(k_max) = args.sweep_k_max {
        let threshold = cfg.get_f64("run", "threshold")?.unwrap_or(0.01);
        let opts = settings.pipeline_options(threshold);
        let sweep = taskauto::pipeline::sweep_k(&mdp, &episodes, k_max, &opts)?;
        println!("chosen_k={}", sweep.chosen_k);
        for (k, reason) in &sweep.failures {
            println!("rejected_k={k} reason={reason}");
        }
        write_learn_outputs(
            &args.out_prefix,
            &LearnSettings {
                k: sweep.chosen_k,
                ..settings
            },
            &sweep.result.params,
            &sweep.result.report,
        )?;
        return Ok(());
    }

    let init_params = initial_params(&mdp, &settings.pipeline_options(0.01))?;
    let seqs = encode_episodes(&episodes, &mdp, settings.obs_mode);
    let opts = TrainOptions {
        tol: settings.tol,
        max_iters: settings.max_iters,
        reestimate_emissions: settings.reestimate,
    };
    let prefix = args.out_prefix.clone();
    let names = hidden_state_names(settings.k, mdp.num_states());
    let every = args.checkpoint_every.unwrap_or(0);
    let mut on_pass = |pass: usize, params: &HmmParams| {
        if every > 0 && pass % every == 0 {
            let path = out_path(&prefix, &format!("pass{pass}.transition.csv"));
            let _ = write_matrix_csv(&path, &params.transition, &names, &names);
        }
    };
    let (params, report) = train_with(&init_params, &seqs, &opts, &mut on_pass)?;
    write_learn_outputs(&args.out_prefix, &settings, &params, &report)?;
    Ok(())
}

fn write_learn_outputs(
    prefix: &Path,
    settings: &LearnSettings,
    params: &HmmParams,
    report: &taskauto::hmm::TrainReport,
) -> Result<()> {
    let names = hidden_state_names(settings.k, params.n_mdp_states());
    write_matrix_csv(
        &out_path(prefix, "transition.csv"),
        &params.transition,
        &names,
        &names,
    )?;
    write_atomic(&out_path(prefix, "report.txt"), &report.to_kv())?;
    write_atomic(
        &out_path(prefix, "report.csv"),
        &report_csv(settings, report),
    )?;
    print!("{}", report.to_kv());
    Ok(())
}

#[derive(Args)]
struct DistillArgs {
    #[arg(long)]
    grid: PathBuf,
    /// Transition-matrix checkpoint CSV from `learn`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Digraph edge threshold.
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,
    /// Comma-separated list of extra thresholds to sweep (one output set
    /// per threshold).
    #[arg(long)]
    threshold_sweep: Option<String>,
    #[arg(long)]
    out_prefix: PathBuf,
}

fn distill_once(
    mdp: &LabelledMdp,
    params: &HmmParams,
    threshold: f64,
    prefix: &Path,
    suffix: &str,
) -> Result<()> {
    let digraph = extract_digraph(&params.transition, params.initial_index(), threshold);
    let nfa = digraph_to_nfa(&digraph, mdp.labels(), params.num_blocks());
    let (ta, partition, _) = cone_lump_with_partition(&nfa)?;
    let ta = ta.complete(Completion::SelfLoop);
    write_atomic(&out_path(prefix, &format!("{suffix}nfa.dot")), &nfa.to_dot())?;
    write_atomic(
        &out_path(prefix, &format!("{suffix}classes.dot")),
        &partition_to_dot(&nfa, &partition),
    )?;
    write_atomic(&out_path(prefix, &format!("{suffix}ta.dot")), &ta.to_dot())?;
    write_atomic(&out_path(prefix, &format!("{suffix}ta.txt")), &ta.to_text())?;
    println!(
        "threshold={threshold} digraph_nodes={} digraph_edges={} ta_states={}",
        digraph.num_nodes(),
        digraph.num_edges(),
        ta.num_states()
    );
    Ok(())
}

fn cmd_distill(args: DistillArgs) -> Result<()> {
    let mdp = LabelledMdp::from_file(&args.grid)?;
    let (matrix, _) = read_matrix_csv(&args.checkpoint)?;
    let n = matrix.nrows();
    let n_mdp = mdp.num_states();
    if n % n_mdp != 0 || matrix.ncols() != n {
        return Err(Error::Config(format!(
            "checkpoint is {n}x{} but the grid has {n_mdp} states",
            matrix.ncols()
        )));
    }
    let k = n / n_mdp;
    let params = HmmParams::for_mdp(&mdp, k, matrix, ObservationMode::State)?;
    distill_once(&mdp, &params, args.threshold, &args.out_prefix, "")?;
    if let Some(sweep) = &args.threshold_sweep {
        for tok in sweep.split(',') {
            let t: f64 = tok
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad threshold {tok:?}")))?;
            distill_once(&mdp, &params, t, &args.out_prefix, &format!("t{tok}."))?;
        }
    }
    Ok(())
}

#[derive(Args)]
struct DebiasArgs {
    /// Automaton file to de-bias.
    #[arg(long)]
    ta: PathBuf,
    /// Training episodes the result must stay consistent with.
    #[arg(long)]
    episodes: PathBuf,
    #[arg(long)]
    out_prefix: PathBuf,
}

fn cmd_debias(args: DebiasArgs) -> Result<()> {
    let ta = TaskAutomaton::from_file(&args.ta)?;
    let episodes: Vec<Episode> = read_episodes(&args.episodes)?;
    let before_dot = ta.complete(Completion::SelfLoop).to_dot();
    let outcome = remove_environmental_bias(&ta, &episodes)?;
    write_atomic(&out_path(&args.out_prefix, "before.dot"), &before_dot)?;
    write_atomic(&out_path(&args.out_prefix, "debiased.dot"), &outcome.ta.to_dot())?;
    write_atomic(&out_path(&args.out_prefix, "debiased.txt"), &outcome.ta.to_text())?;
    write_atomic(&out_path(&args.out_prefix, "report.txt"), &outcome.report())?;
    print!("{}", outcome.report());
    Ok(())
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    ta: PathBuf,
    #[arg(long)]
    reference: PathBuf,
}

fn cmd_verify(args: VerifyArgs) -> Result<bool> {
    let a = TaskAutomaton::from_file(&args.ta)?;
    let b = TaskAutomaton::from_file(&args.reference)?;
    // Align alphabets (unlisted symbols self-loop by convention).
    let union: Vec<_> = a
        .alphabet()
        .iter()
        .chain(b.alphabet().iter())
        .cloned()
        .collect();
    let mut a = a;
    let mut b = b;
    a.extend_alphabet(union.iter().cloned());
    b.extend_alphabet(union.iter().cloned());
    let a = a.complete(Completion::SelfLoop);
    let b = b.complete(Completion::SelfLoop);
    let equal = language_equivalent(&a, &b)?;
    println!("equivalent={equal}");
    println!("isomorphic={}", isomorphic(&a, &b));
    println!("states={} reference_states={}", a.num_states(), b.num_states());
    Ok(equal)
}

#[derive(Args)]
struct BenchArgs {
    /// Bench config: `[bench] runs = name,name,...` plus one section per
    /// named run.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV (one row per run).
    #[arg(long)]
    out: PathBuf,
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let cfg = Config::from_file(&args.config)?;
    let runs: Vec<String> = cfg
        .require("bench", "runs")?
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    let seeds_per_run = cfg.get_usize("bench", "seeds")?.unwrap_or(3);

    let mut csv = String::from(
        "name,grid,ta,k,init,episode_length,episodes,runs,converged_runs,structurally_correct_runs,mean_iterations,mean_wall_secs\n",
    );
    for name in &runs {
        if !cfg.has_section(name) {
            return Err(Error::Config(format!("bench run [{name}] is not defined")));
        }
        let grid_path = cfg.require(name, "grid")?.to_string();
        let ta_path = cfg.require(name, "ta")?.to_string();
        let k = cfg.get_usize(name, "k")?.unwrap_or(3);
        let init: InitKind = cfg
            .get(name, "init")
            .unwrap_or("spatial")
            .parse()
            .map_err(Error::Config)?;
        let episode_length = cfg.get_usize(name, "episode_length")?.unwrap_or(34);
        let n_episodes = cfg.get_usize(name, "episodes")?.unwrap_or(275);
        let seed = cfg.get_u64(name, "seed")?.unwrap_or(0);
        let tol = cfg.get_f64(name, "tol")?.unwrap_or(1e-6);
        let max_iters = cfg.get_usize(name, "max_iters")?.unwrap_or(10_000);
        let threshold = cfg.get_f64(name, "threshold")?.unwrap_or(0.01);
        let smoothing = cfg.get_f64(name, "smoothing")?.unwrap_or(1.0);

        let mdp = LabelledMdp::from_file(&grid_path)?;
        let ta = TaskAutomaton::from_file(&ta_path)?.with_accepting_last();
        let policy = Policy::uniform(&mdp);
        let truth_digraph: Option<Digraph> = (ta.num_states() == k).then(|| {
            induce_chain(&build_product(&mdp, &ta).expect("complete ta"), &policy).digraph(0.0)
        });

        let mut converged_runs = 0usize;
        let mut correct_runs = 0usize;
        let mut iterations = 0usize;
        let mut wall = 0.0f64;
        for run_idx in 0..seeds_per_run {
            let run_seed = seed + run_idx as u64;
            let episodes = simulate_episodes(
                &mdp,
                &ta,
                &policy,
                episode_length,
                n_episodes,
                run_seed,
            )?;
            let opts = PipelineOptions {
                k,
                init,
                seed: run_seed,
                smoothing,
                threshold,
                obs_mode: ObservationMode::State,
                train: TrainOptions {
                    tol,
                    max_iters,
                    reestimate_emissions: false,
                },
            };
            let init_params = initial_params(&mdp, &opts)?;
            let seqs = encode_episodes(&episodes, &mdp, ObservationMode::State);
            let (params, report) = taskauto::hmm::train(&init_params, &seqs, &opts.train)?;
            converged_runs += report.converged as usize;
            iterations += report.iterations;
            wall += report.wall_time_secs;
            if let Some(truth) = &truth_digraph {
                let learned =
                    extract_digraph(&params.transition, params.initial_index(), threshold);
                correct_runs += learned.is_identical(truth) as usize;
            }
        }
        let runs_f = seeds_per_run as f64;
        csv.push_str(&format!(
            "{name},{grid_path},{ta_path},{k},{},{episode_length},{n_episodes},{seeds_per_run},{converged_runs},{correct_runs},{:.1},{:.3}\n",
            match init {
                InitKind::Spatial => "spatial",
                InitKind::Uniform => "uniform",
            },
            iterations as f64 / runs_f,
            wall / runs_f,
        ));
        eprintln!("bench: finished {name}");
    }
    write_atomic(&args.out, &csv)?;
    print!("{csv}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args).map(|()| true),
        Command::Learn(args) => cmd_learn(args).map(|()| true),
        Command::Distill(args) => cmd_distill(args).map(|()| true),
        Command::Debias(args) => cmd_debias(args).map(|()| true),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
