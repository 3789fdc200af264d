use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jordan_core::branching::{
    estimate_front_speed, gw_extinction_prob, mu, time_constant_gamma, BranchingSpec,
};
use jordan_core::growth::{Model, StopCondition, UnderlyingTreeSpec};
use jordan_core::harness::{
    preset, run, verify_suite, write_manifest, AggregateReport, ExperimentConfig, SuiteConfig, PRESETS,
};
use jordan_core::tracking::{CenterKind, Fault, ObservationPolicy};
use jordan_core::Error;

const OUTPUT_ENV: &str = "JORDAN_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "jordan", version, about = "Track Jordan centers of infection-grown random trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config file and/or flags.
    Run(RunArgs),
    /// Run (or print) one of the built-in experiment presets.
    Preset {
        #[arg(value_name = "PRESET", value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        preset_name: String,
        /// Print the preset as TOML instead of running it.
        #[arg(long)]
        print_config: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check movement rules and oracle agreement over a seeded matrix of runs.
    Verify(VerifyArgs),
    /// Branching-process constants: time constant and extinction probability.
    Gamma {
        #[arg(short, long, default_value_t = 4)]
        d: u32,
        /// Also report the extinction probability for Binomial(d, p) offspring.
        #[arg(short, long)]
        p: Option<f64>,
    },
    /// Estimate the continuous-SI front speed by regressing first-passage times on depth.
    FrontSpeed {
        #[arg(short, long, default_value_t = 4)]
        d: u32,
        #[arg(long, default_value_t = 10)]
        n_lo: u32,
        #[arg(long, default_value_t = 30)]
        n_hi: u32,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 50_000_000)]
        max_events: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; flags override its fields.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Ic,
    Dsi,
    Csi,
    Pa,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Ic => Model::Ic,
            ModelArg::Dsi => Model::Dsi,
            ModelArg::Csi => Model::Csi,
            ModelArg::Pa => Model::Pa,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[allow(clippy::enum_variant_names)]
enum PolicyArg {
    PerStep,
    PerNode,
    PerUnitTime,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Jordan,
    Balancedness,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    name: Option<String>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Regular underlying tree with this many children per non-root vertex.
    #[arg(short, long, conflicts_with = "degree_choices")]
    d: Option<u32>,
    /// Irregular underlying tree: child counts drawn uniformly from this list.
    #[arg(long, value_delimiter = ',')]
    degree_choices: Option<Vec<u32>>,
    #[arg(short, long)]
    p: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    time: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long)]
    tail_window: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    kinds: Option<Vec<KindArg>>,
    /// Check the movement rules on every trace.
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    strict_supercritical: bool,
    /// IC only: materialize the tree to this depth.
    #[arg(long)]
    cut_depth: Option<u32>,
    #[arg(long)]
    max_nodes: Option<usize>,
    #[arg(short, long, env = OUTPUT_ENV)]
    output_dir: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = &self.name {
            cfg.name = v.clone();
        }
        if let Some(m) = self.model {
            cfg.model = m.into();
        }
        if let Some(d) = self.d {
            cfg.tree = UnderlyingTreeSpec::Regular { d };
        }
        if let Some(c) = &self.degree_choices {
            cfg.tree = UnderlyingTreeSpec::Irregular {
                degree_choices: c.clone(),
            };
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        // any stop flag replaces the configured stop condition
        if self.steps.is_some() || self.nodes.is_some() || self.depth.is_some() || self.time.is_some() {
            cfg.stop.max_steps = self.steps;
            cfg.stop.max_nodes = self.nodes;
            cfg.stop.max_depth = self.depth;
            cfg.stop.max_time = self.time;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.seed {
            cfg.master_seed = v;
        }
        if let Some(v) = self.policy {
            cfg.policy = Some(match v {
                PolicyArg::PerStep => ObservationPolicy::PerStep,
                PolicyArg::PerNode => ObservationPolicy::PerNode,
                PolicyArg::PerUnitTime => ObservationPolicy::PerUnitTime,
            });
        }
        if let Some(v) = self.tail_window {
            cfg.tail_window = v;
        }
        if let Some(k) = &self.kinds {
            cfg.kinds = k
                .iter()
                .map(|k| match k {
                    KindArg::Jordan => CenterKind::Jordan,
                    KindArg::Balancedness => CenterKind::Balancedness,
                })
                .collect();
        }
        cfg.verify |= self.verify;
        cfg.strict_supercritical |= self.strict_supercritical;
        if self.cut_depth.is_some() {
            cfg.cut_depth = self.cut_depth;
        }
        if let Some(v) = self.max_nodes {
            cfg.max_nodes = v;
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = Some(v.clone());
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 50)]
    seeds: u64,
    #[arg(long, default_value_t = 300)]
    nodes: usize,
    #[arg(long, value_enum, value_delimiter = ',')]
    models: Option<Vec<ModelArg>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Deliberately break the tracker to check that the suite notices.
    #[arg(long)]
    inject_fault: bool,
    /// Where to write the JSON failure manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(short, long, env = OUTPUT_ENV)]
    output_dir: Option<PathBuf>,
}

enum Failure {
    Invariant(String),
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("jordan-out")
}

fn print_report(cfg: &ExperimentConfig, report: &AggregateReport) {
    println!(
        "{}: {} {} trials, {} dead, {} truncated, {} unresolved",
        cfg.name, report.trials, cfg.model, report.dead_runs, report.truncated_runs, report.unresolved_runs
    );
    for k in &report.kinds {
        let survivors = k
            .tail_stable_fraction_survivors
            .map_or("n/a".to_string(), |f| format!("{f:.3}"));
        println!(
            "  {}: tail-stable {:.3} (survivors {} of {}: {survivors}), median max distance {}, mean changes {:.2}, median distinct tail centers {}",
            k.kind.name(),
            k.tail_stable_fraction,
            k.survivors,
            report.trials,
            k.median_max_dist,
            k.mean_changes,
            k.median_tail_distinct_centers
        );
        println!("    max distance histogram {:?}", k.max_dist_histogram);
        println!("    center change histogram {:?}", k.changes_histogram);
        if k.checked_transitions > 0 {
            println!(
                "    {} transitions checked, {} failures, {} co-deepest second",
                k.checked_transitions, k.verdict_failures, k.co_deepest_second
            );
        }
    }
}

fn run_config(mut cfg: ExperimentConfig) -> Result<(), Failure> {
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(default_output());
    }
    cfg.validate()?;
    let out = run(&cfg)?;
    print_report(&cfg, &out.report);
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    if let Some(f) = out.report.failures.first() {
        return Err(Failure::Invariant(format!(
            "{} verdict failures; first: trial {} observation {}: {:?} {}",
            out.report.failures.len(),
            f.trial,
            f.observation_index,
            f.clause,
            f.detail
        )));
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let mut cfg = match &args.config {
                Some(path) => ExperimentConfig::load(path)?,
                None => {
                    let model = args
                        .overrides
                        .model
                        .ok_or_else(|| Failure::Config("either --config or --model is required".into()))?;
                    ExperimentConfig::new(
                        "experiment",
                        model.into(),
                        UnderlyingTreeSpec::Regular { d: 4 },
                        1.0,
                        StopCondition::default(),
                    )
                }
            };
            args.overrides.apply(&mut cfg);
            run_config(cfg)
        }
        Command::Preset {
            preset_name,
            print_config,
            overrides,
        } => {
            let mut cfg = preset(&preset_name)?;
            overrides.apply(&mut cfg);
            if print_config {
                cfg.validate()?;
                print!("{}", cfg.to_toml()?);
                return Ok(());
            }
            run_config(cfg)
        }
        Command::Verify(args) => {
            let mut suite = SuiteConfig {
                seeds: args.seeds,
                nodes: args.nodes,
                fault: args.inject_fault.then_some(Fault::SkipFirstMove),
                ..SuiteConfig::default()
            };
            if let Some(m) = &args.models {
                suite.models = m.iter().map(|&m| m.into()).collect();
            }
            if let Some(s) = args.seed {
                suite.master_seed = s;
            }
            let report = verify_suite(&suite)?;
            let manifest = args
                .manifest
                .unwrap_or_else(|| args.output_dir.unwrap_or_else(default_output).join("verify_manifest.json"));
            write_manifest(&manifest, &suite, &report)?;
            println!(
                "{} traces, {} observations, {} checks, {} co-deepest second, {} failures",
                report.traces,
                report.observations,
                report.checked,
                report.co_deepest_second,
                report.failures.len()
            );
            println!("wrote {}", manifest.display());
            for f in report.failures.iter().take(10) {
                println!(
                    "  {} d={} p={} trial {} observation {}: {:?} {}",
                    f.model, f.d, f.p, f.trial, f.observation_index, f.clause, f.detail
                );
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Invariant(format!("{} verdict failures", report.failures.len())))
            }
        }
        Command::Gamma { d, p } => {
            let g = time_constant_gamma(d)?;
            println!("d = {d}");
            println!("gamma = {g:.12}");
            println!("mu(gamma) - 1 = {:.3e}", mu(g, d)? - 1.0);
            if let Some(p) = p {
                let spec = BranchingSpec::new(p, d);
                let q = gw_extinction_prob(&spec)?;
                let root = gw_extinction_prob(&spec.with_root_override())?;
                println!("p = {p}");
                println!("extinction q = {q:.12} (survival {:.12})", 1.0 - q);
                println!("extinction with Binomial(d + 1, p) at the root = {root:.12}");
            }
            Ok(())
        }
        Command::FrontSpeed {
            d,
            n_lo,
            n_hi,
            trials,
            seed,
            max_events,
        } => {
            let fs = estimate_front_speed(d, n_lo, n_hi, trials, seed, max_events)?;
            let g = time_constant_gamma(d)?;
            println!(
                "slope {:.5} +/- {:.5}, intercept {:.4}, gamma {g:.5}, relative gap {:+.2}%{}",
                fs.slope,
                fs.slope_stderr,
                fs.intercept,
                100.0 * (fs.slope - g) / g,
                if fs.truncated { " (truncated)" } else { "" }
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invariant(m)) => {
            eprintln!("invariant failure: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
