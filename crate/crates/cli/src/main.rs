use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cliqueparcel::backend::BackendKind;
use cliqueparcel::clique::CliqueMethod;
use cliqueparcel::data::{load_dataset, DataError};
use cliqueparcel::eval::fit_cost_model;
use cliqueparcel::experiment::{
    load_workload, read_cost_log, run_experiment, stats_csv, sweep_batch_size, ExperimentConfig, ExperimentError,
};
use cliqueparcel::tradeoff::parse_weight_sweep;

#[derive(Parser)]
#[command(name = "cliqueparcel", version, about = "Batch LLM prompts by clique functions and score the trade-off")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the separate baseline and each method, then write the report.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Report JSON path; the text table goes next to it with a .txt extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one method over several batch sizes and emit CSV.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated batch sizes.
        #[arg(long, default_value = "1,2,4,8,16")]
        sizes: String,
        /// Method to sweep (defaults to the first non-SEPARATE method, else RC).
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Length dispersion and z-score histogram of a dataset, as CSV.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        bin_width: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit base time and per-token coefficients to a timing log (CSV or JSONL).
    FitCostModel {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Comma-separated method tags, e.g. RC,ALC,MDC.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// http, simulated or replay.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Replay cache to read (replay) or record into (http).
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    #[arg(long)]
    fallback_separate: bool,
    /// Simulated output discount factor in (0, 1].
    #[arg(long)]
    discount: Option<f64>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    efficiency_weight: Option<f64>,
    /// OWA weight sweep as start:end:step.
    #[arg(long)]
    owa_weights: Option<String>,
    /// Leave timestamps and wall-clock fields out of the report.
    #[arg(long)]
    deterministic_report: bool,
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

fn parse_methods(list: &str) -> Result<Vec<CliqueMethod>, ExperimentError> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<CliqueMethod>().map_err(|e| config_err(e.to_string())))
        .collect()
}

impl CommonArgs {
    fn into_config(self) -> Result<ExperimentConfig, ExperimentError> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(d) = self.dataset {
            c.dataset_path = d;
        }
        if let Some(m) = &self.methods {
            c.methods = parse_methods(m)?;
        }
        if let Some(l) = self.batch_size {
            c.batch_size = l;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(r) = self.repetitions {
            c.repetitions = r;
        }
        if let Some(b) = &self.backend {
            c.backend.kind = b.parse::<BackendKind>().map_err(|e| config_err(e.to_string()))?;
        }
        if self.endpoint.is_some() {
            c.backend.endpoint_url = self.endpoint;
        }
        if self.model.is_some() {
            c.backend.model_name = self.model;
        }
        if self.cache.is_some() {
            c.backend.cache_path = self.cache;
        }
        if let Some(n) = self.max_in_flight {
            c.backend.max_in_flight = n;
        }
        if self.fallback_separate {
            c.backend.fallback_separate = true;
        }
        if let Some(s) = self.discount {
            c.backend.simulation.discount = s;
        }
        if self.users.is_some() {
            c.users = self.users;
        }
        if let Some(w) = self.efficiency_weight {
            c.efficiency_weight = w;
        }
        if let Some(w) = &self.owa_weights {
            c.owa_sweep = parse_weight_sweep(w)?;
        }
        if self.deterministic_report {
            c.deterministic_report = true;
        }
        Ok(c)
    }
}

fn write_out(path: Option<&Path>, content: &str) -> Result<(), ExperimentError> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| ExperimentError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, ExperimentError> {
    match cli.command {
        Command::Run { common, out } => {
            let mut config = common.into_config()?;
            if out.is_some() {
                config.output_path = out;
            }
            let report = run_experiment(&config)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let table = report.to_table();
            match &config.output_path {
                Some(path) => {
                    write_out(Some(path), &report.to_json())?;
                    write_out(Some(&path.with_extension("txt")), &table)?;
                    print!("{table}");
                }
                None => println!("{}", report.to_json()),
            }
            if report.partial {
                eprintln!("error: partial report; see method status fields");
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { common, sizes, method, out } => {
            let config = common.into_config()?;
            config.validate()?;
            let sizes: Vec<usize> = sizes
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|_| config_err(format!("bad batch size {s:?}"))))
                .collect::<Result<_, _>>()?;
            let method = match method {
                Some(m) => m.parse::<CliqueMethod>().map_err(|e| config_err(e.to_string()))?,
                None => config.methods.iter().copied().find(|m| *m != CliqueMethod::Separate).unwrap_or(CliqueMethod::Random),
            };
            let workload = load_workload(&config)?;
            let report = sweep_batch_size(&config, &workload, method, &sizes)?;
            write_out(out.as_deref(), &report.to_csv())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats { dataset, bin_width, out } => {
            if !(bin_width > 0.0) {
                return Err(config_err("bin width must be > 0"));
            }
            let workload = load_dataset(&dataset)?;
            write_out(out.as_deref(), &stats_csv(&workload, bin_width))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::FitCostModel { log, out } => {
            let samples = read_cost_log(&log)?;
            let fit = fit_cost_model(&samples).map_err(|e| ExperimentError::Dataset(DataError::Schema {
                line: 0,
                message: e.to_string(),
            }))?;
            let json = serde_json::json!({
                "base_seconds": fit.params.base_seconds,
                "in_coeff": fit.params.in_coeff,
                "out_coeff": fit.params.out_coeff,
                "out_in_ratio": fit.out_in_ratio(),
                "rms_residual": fit.rms_residual,
                "samples": fit.samples,
            });
            write_out(out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&json).expect("json")))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
