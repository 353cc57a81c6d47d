//! Experiment orchestration: the separate baseline, every requested clique
//! function, repetition averaging, scoring and report rendering. Also the
//! batch-size sweep, dataset statistics and timing-log loading used by the
//! command-line front end.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::backend::{
    build_backend, run_plan_outcomes, Backend, BackendConfig, BackendError, BackendKind, CostModelParams,
    GroupOutcome, RunError,
};
use crate::batch::TEMPLATE_VERSION;
use crate::clique::{make_grouping_with, CliqueError, CliqueMethod, GroupingOptions, GroupingPlan};
use crate::data::{length_dispersion_stats, load_dataset, z_histogram, DataError, Workload};
use crate::eval::{method_faithfulness, CostSample, EfficiencyReport, EvalError, FaithfulnessScore, MethodTotals};
use crate::tradeoff::{weight_sweep, ObjectivePoint, TradeoffError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(#[from] DataError),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Io(_) => 1,
            ExperimentError::Dataset(_) => 2,
            ExperimentError::Backend(_) => 3,
        }
    }
}

impl From<CliqueError> for ExperimentError {
    fn from(e: CliqueError) -> Self {
        ExperimentError::Config(e.to_string())
    }
}

impl From<TradeoffError> for ExperimentError {
    fn from(e: TradeoffError) -> Self {
        ExperimentError::Config(e.to_string())
    }
}

impl From<BackendError> for ExperimentError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Config(m) => ExperimentError::Config(m),
            BackendError::Io(m) => ExperimentError::Io(m),
            other => ExperimentError::Backend(other.to_string()),
        }
    }
}

fn default_sweep() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset_path: PathBuf,
    /// SEPARATE is always run first as the baseline whether listed or not.
    pub methods: Vec<CliqueMethod>,
    pub batch_size: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub backend: BackendConfig,
    /// Overrides `backend.cost_params` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_params: Option<CostModelParams>,
    /// Weight on the input-token ratio in the relative cost.
    pub efficiency_weight: f64,
    pub owa_sweep: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    pub grouping: GroupingOptions,
    /// Spread prompts over this many users round-robin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub users: Option<usize>,
    /// Omit timestamps and wall-clock fields from the report.
    pub deterministic_report: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset_path: PathBuf::new(),
            methods: CliqueMethod::ALL.to_vec(),
            batch_size: 4,
            repetitions: 10,
            seed: 0,
            backend: BackendConfig::default(),
            cost_params: None,
            efficiency_weight: 1.0,
            owa_sweep: default_sweep(),
            output_path: None,
            grouping: GroupingOptions::default(),
            users: None,
            deterministic_report: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(s).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Backend settings with the experiment-level cost parameters applied.
    pub fn effective_backend(&self) -> BackendConfig {
        let mut b = self.backend.clone();
        if self.cost_params.is_some() {
            b.cost_params = self.cost_params;
        }
        b
    }

    /// SEPARATE first, then the requested methods in order, deduplicated.
    pub fn method_order(&self) -> Vec<CliqueMethod> {
        let mut out = vec![CliqueMethod::Separate];
        for &m in &self.methods {
            if !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<Vec<String>, ExperimentError> {
        if self.dataset_path.as_os_str().is_empty() {
            return Err(ExperimentError::Config("dataset_path is required".into()));
        }
        if self.batch_size < 1 {
            return Err(ExperimentError::Config("batch_size must be >= 1".into()));
        }
        if self.repetitions < 1 {
            return Err(ExperimentError::Config("repetitions must be >= 1".into()));
        }
        if !(self.efficiency_weight >= 0.0) {
            return Err(ExperimentError::Config("efficiency_weight must be >= 0".into()));
        }
        if self.users == Some(0) {
            return Err(ExperimentError::Config("users must be >= 1".into()));
        }
        for &w in &self.owa_sweep {
            crate::tradeoff::OwaWeights::new(w)?;
        }
        let backend = self.effective_backend();
        backend.validate()?;
        let mut warnings = Vec::new();
        if backend.kind == BackendKind::Simulated {
            warnings.extend(backend.cost_params.unwrap_or_default().validate()?);
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodStatus {
    Ok,
    /// Some groups lost items that were not re-issued; they score zero.
    Incomplete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: CliqueMethod,
    #[serde(rename = "l")]
    pub batch_size: usize,
    pub group_count: usize,
    pub status: MethodStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<EfficiencyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub faithfulness: Option<FaithfulnessScore>,
    /// Share of labeled prompts answered accurately.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    /// OWA score per sweep weight.
    pub owa_scores: BTreeMap<String, f64>,
    /// Backend calls per repetition, fallback calls included.
    pub call_count: usize,
    pub parse_failure_count: usize,
    pub missing_item_count: usize,
    pub fallback_count: usize,
    /// Total simulated or wall-clock time of each repetition.
    pub time_per_repetition_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSummary {
    pub name: String,
    pub prompts: usize,
    pub labeled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_echo: ExperimentConfig,
    pub workload: WorkloadSummary,
    pub per_method: Vec<MethodReport>,
    /// Winning method per OWA weight.
    pub owa_selection: BTreeMap<String, CliqueMethod>,
    pub template_version: String,
    /// Set when any method failed or lost items.
    pub partial: bool,
    /// False for live endpoints.
    pub reproducible: bool,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at_unix: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn method(&self, m: CliqueMethod) -> Option<&MethodReport> {
        self.per_method.iter().find(|r| r.method == m)
    }

    pub fn to_table(&self) -> String {
        let header = ["method", "l", "groups", "calls", "time_s", "in_tok", "out_tok", "c", "e", "D_H", "item_mean", "acc", "parse_fail", "status"];
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        for r in &self.per_method {
            let eff = r.efficiency.as_ref();
            let faith = r.faithfulness.as_ref();
            rows.push(vec![
                r.method.tag().to_string(),
                r.batch_size.to_string(),
                r.group_count.to_string(),
                r.call_count.to_string(),
                opt(eff.map(|e| e.total_time_s)),
                eff.map_or("-".into(), |e| e.total_in_tokens.to_string()),
                eff.map_or("-".into(), |e| e.total_out_tokens.to_string()),
                opt(eff.map(|e| e.relative_cost_c)),
                opt(eff.map(|e| e.weighted_efficiency_e)),
                opt(faith.map(|f| f.overall_dh)),
                opt(faith.map(|f| f.per_item_mean)),
                opt(r.accuracy),
                r.parse_failure_count.to_string(),
                format!("{:?}", r.status).to_lowercase(),
            ]);
        }
        let mut out = render_aligned(&rows);
        if !self.owa_selection.is_empty() {
            out.push_str("\nOWA selection (weight on the larger objective -> method)\n");
            for (w, m) in &self.owa_selection {
                let _ = writeln!(out, "  {w:>5}  {}", m.tag());
            }
        }
        if self.partial {
            out.push_str("\nPARTIAL REPORT: some methods failed or lost items\n");
        }
        out
    }
}

fn render_aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.first().map_or(0, Vec::len);
    let widths: Vec<usize> = (0..cols).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| if c == 0 { format!("{cell:<w$}", w = widths[c]) } else { format!("{cell:>w$}", w = widths[c]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Key used for weights in report maps, e.g. `0.3`, `1.0`.
pub fn weight_key(w: f64) -> String {
    format!("{w:?}")
}

/// Sum of latencies in ascending order, so equal multisets of calls give
/// bit-identical totals whatever the grouping order.
fn total_latency(outcomes: &[GroupOutcome]) -> f64 {
    let mut ls: Vec<f64> = outcomes.iter().flat_map(|o| o.calls.iter().map(|c| c.latency_seconds)).collect();
    ls.sort_by(f64::total_cmp);
    ls.iter().sum()
}

/// One repetition of one plan.
struct MethodRun {
    outcomes: Vec<GroupOutcome>,
    parse_failures: usize,
    missing_items: usize,
}

fn run_once(
    backend: &dyn Backend,
    workload: &Workload,
    plan: &GroupingPlan,
    config: &BackendConfig,
) -> Result<MethodRun, String> {
    let results = run_plan_outcomes(backend, workload, plan, config).map_err(|e| e.to_string())?;
    let mut outcomes = Vec::with_capacity(results.len());
    let (mut parse_failures, mut missing_items) = (0, 0);
    for r in results {
        match r {
            Ok(o) => {
                if o.parse.as_ref().is_some_and(|p| !p.complete) || (o.batched && o.parse.is_none()) {
                    parse_failures += 1;
                }
                outcomes.push(o);
            }
            Err(RunError::DispatchIncomplete { missing, outcome }) => {
                parse_failures += 1;
                missing_items += missing.len();
                outcomes.push(*outcome);
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(MethodRun { outcomes, parse_failures, missing_items })
}

/// Per-call texts and token counts, which must not change between
/// repetitions on a deterministic backend.
fn fingerprint(outcomes: &[GroupOutcome]) -> Vec<(String, u64, u64)> {
    outcomes
        .iter()
        .flat_map(|o| o.calls.iter().map(|c| (c.text.clone(), c.input_tokens.get(), c.output_tokens.get())))
        .collect()
}

struct Measured {
    first: MethodRun,
    times: Vec<f64>,
}

fn measure(
    backend: &dyn Backend,
    workload: &Workload,
    plan: &GroupingPlan,
    config: &ExperimentConfig,
    backend_config: &BackendConfig,
) -> Result<Measured, String> {
    let first = run_once(backend, workload, plan, backend_config)?;
    let mut times = vec![total_latency(&first.outcomes)];
    let reference = fingerprint(&first.outcomes);
    for rep in 1..config.repetitions {
        let again = run_once(backend, workload, plan, backend_config)?;
        if backend_config.kind != BackendKind::Http && fingerprint(&again.outcomes) != reference {
            return Err(format!("repetition {rep} produced different texts or token counts on a deterministic backend"));
        }
        times.push(total_latency(&again.outcomes));
    }
    Ok(Measured { first, times })
}

fn totals(m: &Measured) -> MethodTotals {
    let time_s = m.times.iter().sum::<f64>() / m.times.len() as f64;
    let in_tokens = m.first.outcomes.iter().map(|o| o.input_tokens().get()).sum();
    let out_tokens = m.first.outcomes.iter().map(|o| o.output_tokens().get()).sum();
    MethodTotals { time_s, in_tokens, out_tokens }
}

fn answers_of(outcomes: &[GroupOutcome]) -> HashMap<String, String> {
    outcomes
        .iter()
        .flat_map(|o| o.member_ids.iter().cloned().zip(o.answers.iter().cloned()))
        .collect()
}

fn failed_report(method: CliqueMethod, plan: Option<&GroupingPlan>, batch_size: usize, error: String) -> MethodReport {
    MethodReport {
        method,
        batch_size,
        group_count: plan.map_or(0, GroupingPlan::group_count),
        status: MethodStatus::Failed,
        error: Some(error),
        efficiency: None,
        faithfulness: None,
        accuracy: None,
        owa_scores: BTreeMap::new(),
        call_count: 0,
        parse_failure_count: 0,
        missing_item_count: 0,
        fallback_count: 0,
        time_per_repetition_s: Vec::new(),
    }
}

pub fn load_workload(config: &ExperimentConfig) -> Result<Workload, ExperimentError> {
    let mut workload = load_dataset(&config.dataset_path)?;
    if let Some(users) = config.users {
        workload.assign_users_round_robin(users);
    }
    Ok(workload)
}

/// Runs the full experiment. Errors are fatal conditions (bad config,
/// unreadable dataset, baseline failure); a non-baseline method that fails
/// is reported with status `failed` and marks the report partial.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let started = std::time::Instant::now();
    let warnings = config.validate()?;
    let workload = load_workload(config)?;
    run_experiment_on(config, &workload, warnings, started)
}

pub fn run_experiment_on(
    config: &ExperimentConfig,
    workload: &Workload,
    warnings: Vec<String>,
    started: std::time::Instant,
) -> Result<ExperimentReport, ExperimentError> {
    let backend_config = config.effective_backend();
    let backend = build_backend(&backend_config, workload)?;
    let dim = config.grouping.embedding_dim;

    let separate_plan = make_grouping_with(CliqueMethod::Separate, workload, 1, config.seed, &config.grouping)?;
    let baseline = measure(backend.as_ref(), workload, &separate_plan, config, &backend_config)
        .map_err(|e| ExperimentError::Backend(format!("SEPARATE baseline: {e}")))?;
    let baseline_totals = totals(&baseline);
    let baseline_answers = answers_of(&baseline.first.outcomes);

    let mut per_method = Vec::new();
    let mut partial = false;
    for method in config.method_order() {
        let l = if method == CliqueMethod::Separate { 1 } else { config.batch_size };
        let plan = make_grouping_with(method, workload, l, config.seed, &config.grouping)?;
        let measured = if method == CliqueMethod::Separate {
            Ok(Measured { first: MethodRun { outcomes: baseline.first.outcomes.clone(), ..baseline.first }, times: baseline.times.clone() })
        } else {
            measure(backend.as_ref(), workload, &plan, config, &backend_config)
        };
        let measured = match measured {
            Ok(m) => m,
            Err(e) => {
                partial = true;
                per_method.push(failed_report(method, Some(&plan), l, e));
                continue;
            }
        };
        let efficiency = EfficiencyReport::compute(
            method,
            totals(&measured),
            CliqueMethod::Separate,
            baseline_totals,
            config.efficiency_weight,
        );
        let faithfulness =
            method_faithfulness(&plan, &answers_of(&measured.first.outcomes), &baseline_answers, workload, dim);
        let (efficiency, faithfulness) = match (efficiency, faithfulness) {
            (Ok(e), Ok(f)) => (e, f),
            (Err(e), _) | (_, Err(e)) => {
                partial = true;
                per_method.push(failed_report(method, Some(&plan), l, eval_message(e)));
                continue;
            }
        };
        let run = &measured.first;
        let status = if run.missing_items > 0 { MethodStatus::Incomplete } else { MethodStatus::Ok };
        partial |= status != MethodStatus::Ok;
        per_method.push(MethodReport {
            method,
            batch_size: l,
            group_count: plan.group_count(),
            status,
            error: None,
            accuracy: faithfulness.accuracy,
            efficiency: Some(efficiency),
            faithfulness: Some(faithfulness),
            owa_scores: BTreeMap::new(),
            call_count: run.outcomes.iter().map(|o| o.calls.len()).sum(),
            parse_failure_count: run.parse_failures,
            missing_item_count: run.missing_items,
            fallback_count: run.outcomes.iter().map(|o| o.fallback_ids.len()).sum(),
            time_per_repetition_s: measured.times.clone(),
        });
    }

    let points: Vec<ObjectivePoint> = per_method
        .iter()
        .filter_map(|r| {
            Some(ObjectivePoint::new(r.method, r.efficiency.as_ref()?.weighted_efficiency_e, r.faithfulness.as_ref()?.overall_dh))
        })
        .collect();
    let mut owa_selection = BTreeMap::new();
    if !points.is_empty() {
        for sel in weight_sweep(&points, &config.owa_sweep)? {
            let key = weight_key(sel.weight);
            for (m, s) in &sel.scores {
                if let Some(r) = per_method.iter_mut().find(|r| r.method == *m) {
                    r.owa_scores.insert(key.clone(), *s);
                }
            }
            owa_selection.insert(key, sel.method);
        }
    }

    let deterministic = config.deterministic_report;
    Ok(ExperimentReport {
        config_echo: config.clone(),
        workload: WorkloadSummary {
            name: workload.name.clone(),
            prompts: workload.len(),
            labeled: workload.prompts.iter().filter(|p| p.ground_truth.is_some()).count(),
        },
        per_method,
        owa_selection,
        template_version: TEMPLATE_VERSION.to_string(),
        partial,
        reproducible: backend_config.kind != BackendKind::Http,
        warnings,
        generated_at_unix: (!deterministic).then(|| {
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
        }),
        wall_seconds: (!deterministic).then(|| started.elapsed().as_secs_f64()),
    })
}

fn eval_message(e: EvalError) -> String {
    format!("scoring failed: {e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "l")]
    pub batch_size: usize,
    pub method: CliqueMethod,
    pub groups: usize,
    pub calls: usize,
    pub total_time_s: f64,
    /// Separate running time over this running time.
    pub gain: f64,
    pub in_ratio: f64,
    pub out_ratio: f64,
    pub parse_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub method: CliqueMethod,
    pub separate_time_s: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("l,method,groups,calls,total_time_s,gain,in_ratio,out_ratio,parse_failures\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.batch_size,
                r.method.tag(),
                r.groups,
                r.calls,
                r.total_time_s,
                r.gain,
                r.in_ratio,
                r.out_ratio,
                r.parse_failures
            );
        }
        out
    }
}

/// Runs `method` at each batch size against one separate baseline.
pub fn sweep_batch_size(
    config: &ExperimentConfig,
    workload: &Workload,
    method: CliqueMethod,
    sizes: &[usize],
) -> Result<SweepReport, ExperimentError> {
    if sizes.is_empty() {
        return Err(ExperimentError::Config("sweep needs at least one batch size".into()));
    }
    let backend_config = config.effective_backend();
    let backend = build_backend(&backend_config, workload)?;
    let separate_plan = make_grouping_with(CliqueMethod::Separate, workload, 1, config.seed, &config.grouping)?;
    let baseline = measure(backend.as_ref(), workload, &separate_plan, config, &backend_config)
        .map_err(|e| ExperimentError::Backend(format!("SEPARATE baseline: {e}")))?;
    let base = totals(&baseline);
    let mut rows = Vec::with_capacity(sizes.len());
    for &l in sizes {
        let plan = make_grouping_with(method, workload, l, config.seed, &config.grouping)?;
        let m = measure(backend.as_ref(), workload, &plan, config, &backend_config)
            .map_err(|e| ExperimentError::Backend(format!("{} at l={l}: {e}", method.tag())))?;
        let t = totals(&m);
        rows.push(SweepRow {
            batch_size: l,
            method,
            groups: plan.group_count(),
            calls: m.first.outcomes.iter().map(|o| o.calls.len()).sum(),
            total_time_s: t.time_s,
            gain: base.time_s / t.time_s,
            in_ratio: ratio(t.in_tokens, base.in_tokens),
            out_ratio: ratio(t.out_tokens, base.out_tokens),
            parse_failures: m.first.parse_failures,
        });
    }
    Ok(SweepReport { method, separate_time_s: base.time_s, rows })
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

/// Length dispersion summary followed by the z-score histogram, as CSV.
pub fn stats_csv(workload: &Workload, bin_width: f64) -> String {
    let s = length_dispersion_stats(workload);
    let mut out = String::from("metric,value\n");
    let _ = writeln!(out, "prompts,{}", workload.len());
    let _ = writeln!(out, "mean_tokens,{}", s.mean_tokens);
    let _ = writeln!(out, "stdev_tokens,{}", s.stdev_tokens);
    let _ = writeln!(out, "rsd_percent,{}", s.rsd_percent);
    out.push_str("\nbin_lo,bin_hi,count\n");
    for (lo, hi, n) in z_histogram(&s.z_scores, bin_width) {
        let _ = writeln!(out, "{lo},{hi},{n}");
    }
    out
}

/// Reads timing samples from CSV (`in_tokens,out_tokens,seconds` with a
/// header) or JSONL (replay-cache lines, or objects with `in_tokens`,
/// `out_tokens` and `seconds`).
pub fn read_cost_log(path: impl AsRef<Path>) -> Result<Vec<CostSample>, ExperimentError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    parse_cost_log(&text)
}

pub fn parse_cost_log(text: &str) -> Result<Vec<CostSample>, ExperimentError> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let parse_err = |line: usize, message: String| ExperimentError::Dataset(DataError::Parse { line, message });
    let mut samples = Vec::new();
    if first.trim_start().starts_with('{') {
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v: Value = serde_json::from_str(line).map_err(|e| parse_err(n + 1, e.to_string()))?;
            let num = |keys: &[&str]| keys.iter().find_map(|k| v.get(*k).and_then(Value::as_f64));
            match (num(&["in_tokens"]), num(&["out_tokens"]), num(&["seconds", "latency_s"])) {
                (Some(i), Some(o), Some(s)) => samples.push(CostSample::new(i, o, s)),
                _ => return Err(parse_err(n + 1, "expected in_tokens, out_tokens and seconds/latency_s".into())),
            }
        }
    } else {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .map(|(_, h)| h.split(',').map(|s| s.trim().to_ascii_lowercase()).collect())
            .unwrap_or_default();
        let col = |names: &[&str]| header.iter().position(|h| names.contains(&h.as_str()));
        let (Some(ci), Some(co), Some(cs)) =
            (col(&["in_tokens"]), col(&["out_tokens"]), col(&["seconds", "latency_s"]))
        else {
            return Err(parse_err(1, "CSV header must name in_tokens, out_tokens and seconds".into()));
        };
        for (n, line) in lines {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let get = |c: usize| -> Result<f64, ExperimentError> {
                cells
                    .get(c)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| parse_err(n + 1, format!("bad number in column {}", c + 1)))
            };
            samples.push(CostSample::new(get(ci)?, get(co)?, get(cs)?));
        }
    }
    if samples.is_empty() {
        return Err(ExperimentError::Dataset(DataError::EmptyWorkload));
    }
    Ok(samples)
}
