use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path as FsPath, PathBuf};

use gpts::bounds::{
    infogain_bound_kernel_independent, infogain_greedy, infogain_of_arms, regret_bound,
    submodularity_chain, BoundInputs,
};
use gpts::kernels::ChiSequence;
use gpts::planning::{plan, PlanConfig, TabularMdp};
use gpts::search::{Search, SearchConfig, Truth};
use gpts::spectrum::{
    build_gram_with_cap, closed_form_spectrum, path_index, sample_gp_prior, Spectrum,
};
use gpts::Path;

use crate::config::{CliError, CliResult, ExperimentConfig};

/// Gaussian-process bandit tree search: simulations, spectra, bounds, planning.
#[derive(Parser)]
#[command(name = "gpts", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run seeded regret experiments against a reward drawn from the prior.
    Simulate(SimulateArgs),
    /// Print the closed-form spectrum of the whole-tree kernel matrix.
    Spectrum(SpectrumArgs),
    /// Print the information-gain and regret bound report.
    Bounds(BoundsArgs),
    /// Open-loop planning on a tabular MDP description.
    Plan(PlanArgs),
}

/// Options shared by every subcommand.
#[derive(Args, Clone)]
pub struct CommonArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the iteration budget.
    #[arg(long = "T", value_name = "T")]
    pub horizon: Option<usize>,
    /// Directory to write output files into (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Kernel selection flags (used when no config file names one).
#[derive(Args, Clone)]
pub struct KernelArgs {
    /// Kernel family: linear | gaussian | mdp.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Branching factor.
    #[arg(long = "B", value_name = "B")]
    pub branching: Option<usize>,
    /// Tree depth.
    #[arg(long = "D", value_name = "D")]
    pub depth: Option<usize>,
    /// Gaussian kernel width.
    #[arg(long)]
    pub s: Option<f64>,
    /// MDP kernel discount.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Observation-noise variance of the GP model.
    #[arg(long = "noise")]
    pub noise_var: Option<f64>,
    /// Confidence parameter of the beta schedule.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Override the replication count.
    #[arg(long)]
    pub replications: Option<usize>,
}

#[derive(Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Also emit the dense kernel matrix as CSV (small trees only).
    #[arg(long)]
    pub gram: bool,
}

#[derive(Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Measured information gain to evaluate the regret bound at
    /// (defaults to the tightest computable upper bound).
    #[arg(long)]
    pub infogain: Option<f64>,
}

#[derive(Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// JSON description of the tabular MDP.
    #[arg(long)]
    pub mdp: PathBuf,
    /// Observation-noise variance of the GP model.
    #[arg(long = "noise")]
    pub noise_var: Option<f64>,
    /// Confidence parameter of the beta schedule.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Additive Gaussian observation-noise standard deviation.
    #[arg(long)]
    pub obs_noise_std: Option<f64>,
}

pub fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Plan(args) => cmd_plan(args),
    }
}

fn load_config(common: &CommonArgs, kernel: Option<&KernelArgs>) -> CliResult<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(horizon) = common.horizon {
        config.horizon = horizon;
    }
    if let Some(k) = kernel {
        if let Some(kind) = &k.kernel {
            config.kernel.kind = kind.clone();
        }
        if let Some(b) = k.branching {
            config.kernel.branching = b;
        }
        if let Some(d) = k.depth {
            config.kernel.depth = d;
        }
        if k.s.is_some() {
            config.kernel.s = k.s;
        }
        if k.gamma.is_some() {
            config.kernel.gamma = k.gamma;
        }
        if let Some(noise) = k.noise_var {
            config.noise_var = noise;
        }
        if let Some(delta) = k.delta {
            config.delta = delta;
        }
    }
    config.validate()?;
    Ok(config)
}

fn write_output(dir: &Option<PathBuf>, name: &str, contents: &str) -> CliResult<()> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Serialize)]
struct RepReport {
    replication: usize,
    seed: u64,
    iterations: usize,
    f_star: f64,
    best_observed: f64,
    final_cumulative_regret: f64,
    final_empirical_regret: f64,
    simple_regret: f64,
    empirical_simple_regret: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    infogain_actual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    infogain_greedy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    greedy_chain_limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound_horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound_nodes: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem_regret_bound: Option<f64>,
    chain_holds: bool,
    bound_horizon_holds: bool,
    bound_nodes_holds: bool,
    within_theorem_bound: bool,
}

#[derive(Serialize)]
struct SimulateSummary {
    kernel: ChiSequence,
    noise_var: f64,
    delta: f64,
    beta_scale: f64,
    horizon: usize,
    replications: usize,
    seed: u64,
    update_mode: String,
    selection: String,
    replication_reports: Vec<RepReport>,
    mean_final_regret: f64,
    std_final_regret: f64,
    mean_regret_rate: f64,
    bound_violations: usize,
    all_bounds_hold: bool,
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    let mut config = load_config(&args.common, Some(&args.kernel))?;
    if let Some(reps) = args.replications {
        config.replications = reps;
    }
    config.validate()?;
    let chi = config.kernel.chi()?;
    let n = match chi.num_paths() {
        Ok(n) if n <= config.gram_cap as u128 => n as usize,
        _ => {
            return Err(CliError::Core(gpts::Error::SizeCap {
                requested: chi.num_paths().unwrap_or(u128::MAX),
                cap: config.gram_cap,
            }))
        }
    };
    let _ = n;

    let mut reports = Vec::with_capacity(config.replications);
    let mut violations = 0usize;
    for rep in 0..config.replications {
        let rep_seed = config.seed.wrapping_add(rep as u64);
        let (report, trace_csv) = run_replication(&chi, &config, rep, rep_seed)?;
        violations += [
            report.chain_holds,
            report.bound_horizon_holds,
            report.bound_nodes_holds,
        ]
        .iter()
        .filter(|ok| !**ok)
        .count();
        write_output(&args.common.out, &format!("trace_rep{rep:03}.csv"), &trace_csv)?;
        reports.push(report);
    }

    let finals: Vec<f64> = reports.iter().map(|r| r.final_cumulative_regret).collect();
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let var = finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / finals.len() as f64;
    let mean_rate = reports
        .iter()
        .map(|r| r.final_cumulative_regret / r.iterations.max(1) as f64)
        .sum::<f64>()
        / reports.len() as f64;
    let summary = SimulateSummary {
        kernel: chi,
        noise_var: config.noise_var,
        delta: config.delta,
        beta_scale: config.beta_scale,
        horizon: config.horizon,
        replications: config.replications,
        seed: config.seed,
        update_mode: config.update_mode.clone(),
        selection: config.selection.clone(),
        replication_reports: reports,
        mean_final_regret: mean,
        std_final_regret: var.sqrt(),
        mean_regret_rate: mean_rate,
        bound_violations: violations,
        all_bounds_hold: violations == 0,
    };
    let text = pretty(&summary);
    write_output(&args.common.out, "summary.json", &text)?;
    print!("{text}");
    Ok(())
}

const NOISE_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn run_replication(
    chi: &ChiSequence,
    config: &ExperimentConfig,
    rep: usize,
    rep_seed: u64,
) -> CliResult<(RepReport, String)> {
    let branching = chi.branching;
    let mut env_rng = ChaCha8Rng::seed_from_u64(rep_seed ^ NOISE_STREAM_SALT);
    let sample = sample_gp_prior(chi, &mut env_rng)?;

    let mut search_config = SearchConfig::new(chi.clone(), config.noise_var);
    search_config.delta = config.delta;
    search_config.beta_scale = config.beta_scale;
    search_config.seed = rep_seed;
    search_config.update = config.update_mode()?;
    search_config.selection = config.selection_strategy()?;

    let values = sample.values.clone();
    let truth = Truth {
        f_star: sample.f_star,
        f: Box::new(move |p: &Path| values[path_index(branching, p)]),
    };
    let mut search = Search::new(search_config)?.with_truth(truth);
    let noise_std = config.noise_var.sqrt();
    let values = sample.values.clone();
    let mut observe = move |p: &Path| {
        values[path_index(branching, p)]
            + noise_std * env_rng.sample::<f64, _>(rand_distr::StandardNormal)
    };
    search.run(&config.stopping.to_rule(config.horizon), &mut observe)?;
    let trace = search.into_trace();

    let iterations = trace.len();
    let final_cumulative_regret =
        trace.rows.last().and_then(|r| r.cum_regret).unwrap_or(0.0);
    let final_empirical_regret = iterations as f64 * sample.f_star - trace.total_observed();
    let best_observed = trace.best().map(|(_, y)| y).unwrap_or(f64::NEG_INFINITY);
    let best_true = trace
        .rows
        .iter()
        .map(|r| sample.values[path_index(branching, &r.path)])
        .fold(f64::NEG_INFINITY, f64::max);
    let simple_regret = (sample.f_star - best_true).max(0.0);
    let empirical_simple_regret = (sample.f_star - best_observed).max(0.0);

    let mut report = RepReport {
        replication: rep,
        seed: rep_seed,
        iterations,
        f_star: sample.f_star,
        best_observed,
        final_cumulative_regret,
        final_empirical_regret,
        simple_regret,
        empirical_simple_regret,
        infogain_actual: None,
        infogain_greedy: None,
        greedy_chain_limit: None,
        bound_horizon: None,
        bound_nodes: None,
        theorem_regret_bound: None,
        chain_holds: true,
        bound_horizon_holds: true,
        bound_nodes_holds: true,
        within_theorem_bound: true,
    };
    if config.noise_var > 0.0 && iterations > 0 {
        let arms: Vec<&Path> = trace.rows.iter().map(|r| &r.path).collect();
        let actual = infogain_of_arms(chi, &arms, config.noise_var)?;
        let eigs = closed_form_spectrum(chi).reorder();
        let greedy = infogain_greedy(&eigs, iterations, config.noise_var)?;
        let chain = submodularity_chain(actual, greedy.value);
        let num_nodes = chi.num_nodes().map(|n| n as f64).unwrap_or(f64::INFINITY);
        let (bound_t, bound_nn) =
            infogain_bound_kernel_independent(iterations, num_nodes, config.noise_var)?;
        let theorem = regret_bound(
            iterations,
            chi.num_paths_f64(),
            config.delta,
            config.noise_var,
            actual,
        )?;
        report.infogain_actual = Some(actual);
        report.infogain_greedy = Some(greedy.value);
        report.greedy_chain_limit = Some(chain.limit);
        report.bound_horizon = Some(bound_t);
        report.bound_nodes = Some(bound_nn);
        report.theorem_regret_bound = Some(theorem);
        report.chain_holds = chain.holds;
        report.bound_horizon_holds = actual <= bound_t + 1e-9;
        report.bound_nodes_holds = actual <= bound_nn + 1e-9;
        report.within_theorem_bound = final_cumulative_regret <= theorem;
    }
    Ok((report, trace.to_csv()))
}

// ---------------------------------------------------------------------------
// spectrum

#[derive(Serialize)]
struct SpectrumReport {
    spectrum: Spectrum,
    num_paths: f64,
    trace: f64,
    trace_identity_target: f64,
    /// Leading entries of the nonincreasing eigenvalue sequence.
    lambda_hat: Vec<f64>,
}

fn cmd_spectrum(args: SpectrumArgs) -> CliResult<()> {
    let config = load_config(&args.common, Some(&args.kernel))?;
    let chi = config.kernel.chi()?;
    let spectrum = closed_form_spectrum(&chi);
    let eigs = spectrum.reorder();
    let shown = eigs.len().min(config.gram_cap as u128) as usize;
    let report = SpectrumReport {
        num_paths: chi.num_paths_f64(),
        trace: spectrum.trace(),
        trace_identity_target: chi.num_paths_f64() * chi.chi_zero(),
        lambda_hat: eigs.leading(shown.min(256)),
        spectrum,
    };
    let text = pretty(&report);
    write_output(&args.common.out, "spectrum.json", &text)?;
    if args.gram {
        let gram = build_gram_with_cap(&chi, config.gram_cap)?;
        let mut csv = String::from("# gpts gram v1\n");
        for i in 0..gram.nrows() {
            let row: Vec<String> = (0..gram.ncols()).map(|j| gram[(i, j)].to_string()).collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        write_output(&args.common.out, "gram.csv", &csv)?;
        if args.common.out.is_none() {
            print!("{csv}");
        }
    }
    print!("{text}");
    Ok(())
}

// ---------------------------------------------------------------------------
// bounds

fn cmd_bounds(args: BoundsArgs) -> CliResult<()> {
    let config = load_config(&args.common, Some(&args.kernel))?;
    let chi = config.kernel.chi()?;
    let report = BoundInputs {
        chi,
        horizon: config.horizon,
        noise_var: config.noise_var,
        delta: config.delta,
        infogain: args.infogain,
    }
    .report()?;
    let text = pretty(&report);
    write_output(&args.common.out, "bounds.json", &text)?;
    print!("{text}");
    Ok(())
}

// ---------------------------------------------------------------------------
// plan

fn read_mdp(path: &FsPath) -> CliResult<TabularMdp> {
    let text = std::fs::read_to_string(path)?;
    Ok(TabularMdp::from_json(&text)?)
}

fn cmd_plan(args: PlanArgs) -> CliResult<()> {
    let config = load_config(&args.common, None)?;
    let mdp = read_mdp(&args.mdp)?;
    let mut plan_config = PlanConfig::new(config.horizon);
    plan_config.noise_var = args.noise_var.unwrap_or(config.noise_var);
    plan_config.delta = args.delta.unwrap_or(config.delta);
    plan_config.beta_scale = config.beta_scale;
    plan_config.seed = config.seed;
    plan_config.observation_noise_std =
        args.obs_noise_std.or(config.observation_noise_std);
    plan_config.enumeration_cap = config.gram_cap;
    plan_config.update = config.update_mode()?;
    plan_config.selection = config.selection_strategy()?;
    let result = plan(&mdp, &plan_config)?;
    let text = pretty(&result);
    write_output(&args.common.out, "plan.json", &text)?;
    write_output(&args.common.out, "plan_trace.csv", &result.trace.to_csv())?;
    print!("{text}");
    Ok(())
}
