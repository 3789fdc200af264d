//! Experiment configuration, parallel trial orchestration, aggregation and
//! file output.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{GrowthParams, Model, StopCondition, UnderlyingTreeSpec};
use crate::tracking::{
    persistence_report, track_trial, verify_ic_specifics, verify_trace, CenterKind, Clause, Fault,
    ObservationPolicy, PersistenceReport, TrialSpec, TrialTrace,
};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const PRESETS: [&str; 5] = ["ic_fig", "ic_irregular_fig", "csi_fig", "pa_fig", "balancedness_fig"];

fn default_trials() -> usize {
    100
}

fn default_tail_window() -> usize {
    10
}

fn default_kinds() -> Vec<CenterKind> {
    vec![CenterKind::Jordan]
}

fn default_max_nodes() -> usize {
    10_000_000
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub model: Model,
    #[serde(default = "default_tree")]
    pub tree: UnderlyingTreeSpec,
    #[serde(default = "default_p")]
    pub p: f64,
    pub stop: StopCondition,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Defaults to per step for IC/DSI and per node for CSI/PA.
    #[serde(default)]
    pub policy: Option<ObservationPolicy>,
    #[serde(default = "default_tail_window")]
    pub tail_window: usize,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<CenterKind>,
    /// Check the movement rules (and the exact oracle where the full tree exists).
    #[serde(default)]
    pub verify: bool,
    #[serde(default)]
    pub strict_supercritical: bool,
    /// IC only: depth below which the tree is summarized instead of stored.
    #[serde(default)]
    pub cut_depth: Option<u32>,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
    #[serde(default = "default_max_nodes")]
    pub max_events: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_tree() -> UnderlyingTreeSpec {
    UnderlyingTreeSpec::Regular { d: 4 }
}

fn default_p() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn new(name: &str, model: Model, tree: UnderlyingTreeSpec, p: f64, stop: StopCondition) -> Self {
        Self {
            name: name.into(),
            model,
            tree,
            p,
            stop,
            trials: default_trials(),
            master_seed: 0,
            policy: None,
            tail_window: default_tail_window(),
            kinds: default_kinds(),
            verify: false,
            strict_supercritical: false,
            cut_depth: None,
            max_nodes: default_max_nodes(),
            max_events: default_max_nodes(),
            output_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn policy(&self) -> ObservationPolicy {
        self.policy.unwrap_or(ObservationPolicy::default_for(self.model))
    }

    pub fn trial_spec(&self) -> TrialSpec {
        let mut params = GrowthParams::new(self.model, self.p, self.tree.clone());
        params.strict_supercritical = self.strict_supercritical;
        let mut spec = TrialSpec::new(params, self.stop);
        spec.policy = self.policy();
        spec.kinds = self.kinds.clone();
        spec.cut_depth = self.cut_depth;
        spec.max_nodes = self.max_nodes;
        spec.max_events = self.max_events;
        spec.record_events = false;
        spec.oracle_check = self.verify && self.cut_depth.is_none();
        spec
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.tail_window == 0 {
            return bad("tail_window must be at least 1".into());
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) {
            return bad(format!("name {:?} must be a plain file stem", self.name));
        }
        let mut kinds = self.kinds.clone();
        kinds.sort_by_key(|k| k.name());
        kinds.dedup();
        if kinds.len() != self.kinds.len() {
            return bad("center kinds must not repeat".into());
        }
        if self.cut_depth == Some(0) {
            return bad("cut_depth must be at least 1".into());
        }
        self.trial_spec().validate().map_err(|e| Error::Config(e.to_string()))
    }
}

/// Documented parameterizations of the published experiments.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let regular4 = UnderlyingTreeSpec::Regular { d: 4 };
    let mut cfg = match name {
        "ic_fig" => ExperimentConfig::new(name, Model::Ic, regular4, 0.4, StopCondition::steps(40)),
        "ic_irregular_fig" => ExperimentConfig::new(
            name,
            Model::Ic,
            UnderlyingTreeSpec::Irregular {
                degree_choices: vec![3, 4],
            },
            0.4,
            StopCondition::steps(40),
        ),
        "csi_fig" => ExperimentConfig::new(name, Model::Csi, regular4, 1.0, StopCondition::nodes(100)),
        "pa_fig" => ExperimentConfig::new(name, Model::Pa, regular4, 1.0, StopCondition::nodes(100)),
        "balancedness_fig" => {
            let mut c = ExperimentConfig::new(name, Model::Ic, regular4, 0.4, StopCondition::steps(40));
            c.kinds = vec![CenterKind::Jordan, CenterKind::Balancedness];
            c
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESETS.join(", ")
            )))
        }
    };
    cfg.master_seed = 20_190_601;
    if cfg.model == Model::Ic {
        cfg.cut_depth = Some(16);
    } else {
        cfg.tail_window = 30;
    }
    Ok(cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: u64,
    pub observations: usize,
    pub final_nodes: u64,
    pub final_psi: u64,
    pub dead: bool,
    pub truncated: bool,
    pub unresolved: bool,
    /// Not dead, not cut short, and the center stayed resolvable.
    pub survived: bool,
    /// Distinct anchors over the final `tail_window` observations.
    pub tail_distinct_centers: usize,
    pub persistence: PersistenceReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub trial: u64,
    pub kind: CenterKind,
    /// Violated clause, or `None` for an oracle mismatch.
    pub clause: Option<Clause>,
    pub observation_index: usize,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindReport {
    pub kind: CenterKind,
    pub trials: Vec<TrialSummary>,
    pub max_dist_histogram: BTreeMap<u32, usize>,
    pub changes_histogram: BTreeMap<usize, usize>,
    pub tail_stable_fraction: f64,
    /// Over surviving trials only; `None` when none survived.
    pub tail_stable_fraction_survivors: Option<f64>,
    pub survivors: usize,
    pub median_max_dist: f64,
    pub median_tail_distinct_centers: f64,
    pub mean_changes: f64,
    pub verdict_failures: usize,
    pub checked_transitions: usize,
    pub co_deepest_second: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub trials: usize,
    pub dead_runs: usize,
    pub truncated_runs: usize,
    pub unresolved_runs: usize,
    pub kinds: Vec<KindReport>,
    pub failures: Vec<FailureRecord>,
}

impl AggregateReport {
    pub fn kind(&self, kind: CenterKind) -> Option<&KindReport> {
        self.kinds.iter().find(|k| k.kind == kind)
    }

    pub fn verdict_failures(&self) -> usize {
        self.failures.len()
    }
}

/// Result of [`run`]: the report plus what was written.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: AggregateReport,
    pub files: Vec<PathBuf>,
}

struct TrialResult {
    traces: Vec<TrialTrace>,
    checks: Vec<(usize, usize, Vec<FailureRecord>)>,
}

fn run_one(cfg: &ExperimentConfig, spec: &TrialSpec, index: u64) -> Result<TrialResult> {
    let traces = track_trial(spec, cfg.master_seed, index)?;
    let mut checks = Vec::with_capacity(traces.len());
    for t in &traces {
        let mut failures: Vec<FailureRecord> = t
            .oracle_mismatches
            .iter()
            .map(|&i| FailureRecord {
                trial: index,
                kind: t.kind,
                clause: None,
                observation_index: i,
                detail: "incremental center differs from full recomputation".into(),
            })
            .collect();
        let (mut checked, mut co) = (0, 0);
        if cfg.verify && t.kind == CenterKind::Jordan {
            let mut v = verify_trace(t)?;
            if t.model == Model::Ic {
                v.merge(verify_ic_specifics(t)?);
            }
            checked = v.checked;
            co = v.co_deepest_second;
            failures.extend(v.failures.into_iter().map(|f| FailureRecord {
                trial: index,
                kind: t.kind,
                clause: Some(f.clause),
                observation_index: f.observation_index,
                detail: f.detail,
            }));
        }
        checks.push((checked, co, failures));
    }
    Ok(TrialResult { traces, checks })
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

fn summarize(trace: &TrialTrace, tail_window: usize, required_steps: Option<u64>) -> Result<TrialSummary> {
    let window = tail_window.min(trace.snapshots.len());
    let persistence = persistence_report(trace, window)?;
    let last = trace.snapshots.last().ok_or_else(|| Error::state("trace without snapshots"))?;
    let tail = &trace.snapshots[trace.snapshots.len() - window..];
    let mut tail_centers: Vec<_> = tail.iter().map(|s| s.anchor).collect();
    tail_centers.sort();
    tail_centers.dedup();
    let long_enough = required_steps.is_none_or(|s| trace.steps() as u64 >= s);
    Ok(TrialSummary {
        trial: trace.trial_index,
        observations: trace.snapshots.len(),
        final_nodes: last.n_nodes,
        final_psi: last.psi,
        dead: trace.dead,
        truncated: trace.truncated,
        unresolved: trace.unresolved,
        survived: !trace.dead && !trace.truncated && long_enough,
        tail_distinct_centers: tail_centers.len(),
        persistence,
    })
}

/// Run every trial, aggregate, and write outputs when `output_dir` is set.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let spec = cfg.trial_spec();
    let results: Vec<TrialResult> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| run_one(cfg, &spec, i))
        .collect::<Result<_>>()?;

    let required_steps = if cfg.model.is_discrete() { cfg.stop.max_steps } else { None };
    let mut kinds = Vec::new();
    let mut failures = Vec::new();
    for (k, &kind) in cfg.kinds.iter().enumerate() {
        let summaries = results
            .iter()
            .map(|r| summarize(&r.traces[k], cfg.tail_window, required_steps))
            .collect::<Result<Vec<_>>>()?;
        let mut max_dist_histogram = BTreeMap::new();
        let mut changes_histogram = BTreeMap::new();
        for s in &summaries {
            *max_dist_histogram.entry(s.persistence.max_dist_to_root).or_insert(0) += 1;
            *changes_histogram.entry(s.persistence.changes).or_insert(0) += 1;
        }
        let stable = summaries.iter().filter(|s| s.persistence.stable_in_tail).count();
        let survivors: Vec<_> = summaries.iter().filter(|s| s.survived).collect();
        let stable_survivors = survivors.iter().filter(|s| s.persistence.stable_in_tail).count();
        let n = summaries.len() as f64;
        let kind_failures: Vec<FailureRecord> =
            results.iter().flat_map(|r| r.checks[k].2.iter().cloned()).collect();
        kinds.push(KindReport {
            kind,
            max_dist_histogram,
            changes_histogram,
            tail_stable_fraction: stable as f64 / n,
            tail_stable_fraction_survivors: (!survivors.is_empty())
                .then(|| stable_survivors as f64 / survivors.len() as f64),
            survivors: survivors.len(),
            median_max_dist: median(summaries.iter().map(|s| f64::from(s.persistence.max_dist_to_root)).collect()),
            median_tail_distinct_centers: median(
                summaries.iter().map(|s| s.tail_distinct_centers as f64).collect(),
            ),
            mean_changes: summaries.iter().map(|s| s.persistence.changes as f64).sum::<f64>() / n,
            verdict_failures: kind_failures.len(),
            checked_transitions: results.iter().map(|r| r.checks[k].0).sum(),
            co_deepest_second: results.iter().map(|r| r.checks[k].1).sum(),
            trials: summaries,
        });
        failures.extend(kind_failures);
    }
    let first = |f: fn(&TrialTrace) -> bool| results.iter().filter(|r| f(&r.traces[0])).count();
    let report = AggregateReport {
        trials: cfg.trials,
        dead_runs: first(|t| t.dead),
        truncated_runs: first(|t| t.truncated),
        unresolved_runs: first(|t| t.unresolved),
        kinds,
        failures,
    };

    let mut files = Vec::new();
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir)?;
        for (k, &kind) in cfg.kinds.iter().enumerate() {
            let path = dir.join(format!("{}_trace_{}.csv", cfg.name, kind.name()));
            let traces: Vec<&TrialTrace> = results.iter().map(|r| &r.traces[k]).collect();
            write_trace_csv(&path, cfg, &traces)?;
            files.push(path);
        }
        let path = dir.join(format!("{}_summary.json", cfg.name));
        write_summary_json(&path, cfg, &report)?;
        files.push(path);
    }
    Ok(RunOutput { report, files })
}

pub const CSV_HEADER: [&str; 11] = [
    "trial",
    "obs_index",
    "model_time",
    "center_canonical",
    "center_count",
    "psi",
    "dist_to_root",
    "deepest_depth",
    "second_deepest_depth",
    "n_nodes",
    "changed_flag",
];

/// Metadata lines start with `#`; the body is plain CSV.
pub fn write_trace_csv(path: &Path, cfg: &ExperimentConfig, traces: &[&TrialTrace]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    writeln!(out, "# {TOOL_NAME} {TOOL_VERSION}")?;
    writeln!(out, "# experiment={} model={} p={} master_seed={}", cfg.name, cfg.model, cfg.p, cfg.master_seed)?;
    writeln!(out, "# generated_unix_secs={stamp}")?;
    writeln!(out, "# changed_flag: 0 unchanged, 1 center set changed, 2 tracked center moved")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
    for t in traces {
        for s in &t.snapshots {
            let flag = if s.moved {
                2
            } else if s.set_changed {
                1
            } else {
                0
            };
            w.write_record([
                t.trial_index.to_string(),
                s.observation_index.to_string(),
                s.time.to_string(),
                s.canonical().to_string(),
                s.centers.len().to_string(),
                s.psi.to_string(),
                s.dist_to_root.to_string(),
                opt(s.deepest_depth),
                opt(s.second_deepest_depth),
                s.n_nodes.to_string(),
                flag.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    tool: &'a str,
    version: &'a str,
    master_seed: u64,
    config: ExperimentConfig,
    report: &'a AggregateReport,
}

pub fn write_summary_json(path: &Path, cfg: &ExperimentConfig, report: &AggregateReport) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(
        &mut out,
        &Summary {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            master_seed: cfg.master_seed,
            // where the files went is not part of the experiment
            config: ExperimentConfig {
                output_dir: None,
                ..cfg.clone()
            },
            report,
        },
    )?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Seeded matrix of small runs checked against the movement rules and the exact oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub models: Vec<Model>,
    pub degrees: Vec<u32>,
    pub probabilities: Vec<f64>,
    pub seeds: u64,
    pub nodes: usize,
    pub master_seed: u64,
    pub fault: Option<Fault>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            models: vec![Model::Ic, Model::Dsi, Model::Csi, Model::Pa],
            degrees: vec![2, 3, 4],
            probabilities: vec![0.3, 0.5, 0.8],
            seeds: 50,
            nodes: 300,
            master_seed: 1,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteFailure {
    pub model: Model,
    pub d: u32,
    pub p: f64,
    pub trial: u64,
    pub clause: Option<Clause>,
    pub observation_index: usize,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub traces: usize,
    pub observations: usize,
    pub checked: usize,
    pub co_deepest_second: usize,
    pub failures: Vec<SuiteFailure>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn verify_suite(suite: &SuiteConfig) -> Result<SuiteReport> {
    let mut cases = Vec::new();
    for &model in &suite.models {
        // PA and CSI ignore p; PA also ignores the degree
        let ps: &[f64] = if model.is_discrete() { &suite.probabilities } else { &[1.0] };
        let ds: &[u32] = if model == Model::Pa { &[2] } else { &suite.degrees };
        for &d in ds {
            for &p in ps {
                for seed in 0..suite.seeds {
                    cases.push((model, d, p, seed));
                }
            }
        }
    }
    let reports: Vec<SuiteReport> = cases
        .par_iter()
        .map(|&(model, d, p, seed)| -> Result<SuiteReport> {
            let params = GrowthParams::new(model, p, UnderlyingTreeSpec::Regular { d });
            let mut stop = StopCondition::nodes(suite.nodes);
            stop.max_steps = Some(10 * suite.nodes as u64);
            let mut spec = TrialSpec::new(params, stop);
            spec.oracle_check = true;
            spec.record_events = false;
            spec.fault = suite.fault;
            let trace = track_trial(&spec, suite.master_seed, seed)?.remove(0);
            let mut v = verify_trace(&trace)?;
            if model == Model::Ic {
                v.merge(verify_ic_specifics(&trace)?);
            }
            let fail = |clause, observation_index, detail| SuiteFailure {
                model,
                d,
                p,
                trial: seed,
                clause,
                observation_index,
                detail,
            };
            let mut failures: Vec<SuiteFailure> = trace
                .oracle_mismatches
                .iter()
                .map(|&i| fail(None, i, "incremental center differs from full recomputation".into()))
                .collect();
            failures.extend(
                v.failures
                    .into_iter()
                    .map(|f| fail(Some(f.clause), f.observation_index, f.detail)),
            );
            Ok(SuiteReport {
                traces: 1,
                observations: trace.snapshots.len(),
                checked: v.checked,
                co_deepest_second: v.co_deepest_second,
                failures,
            })
        })
        .collect::<Result<_>>()?;
    Ok(reports.into_iter().fold(SuiteReport::default(), |mut acc, r| {
        acc.traces += r.traces;
        acc.observations += r.observations;
        acc.checked += r.checked;
        acc.co_deepest_second += r.co_deepest_second;
        acc.failures.extend(r.failures);
        acc
    }))
}

/// Machine-readable record of a suite run.
pub fn write_manifest(path: &Path, suite: &SuiteConfig, report: &SuiteReport) -> Result<()> {
    #[derive(Serialize)]
    struct Manifest<'a> {
        tool: &'a str,
        version: &'a str,
        passed: bool,
        suite: &'a SuiteConfig,
        report: &'a SuiteReport,
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(
        &mut out,
        &Manifest {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            passed: report.passed(),
            suite,
            report,
        },
    )?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
