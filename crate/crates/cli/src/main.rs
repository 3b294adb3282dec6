use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use surprise_core::event_log::validate;
use surprise_core::features::{FeatureKind, FeatureSpec, TargetFeature};
use surprise_core::pipeline::{
    load_log, run_compare, run_detect, write_log_files, AnalysisSpec, InputConfig, PipelineError,
    RunConfig, CONFIG_FORMAT_VERSION,
};
use surprise_core::synthetic::{
    generate_loan_log, generate_synthetic_log, GeneratorSpec, CONTEXT_ATTRIBUTE,
};
use surprise_core::vicinity::{MethodConfig, Metric, METHOD_NAMES};

#[derive(Parser)]
#[command(
    name = "surprise",
    version,
    about = "Find surprising situations in process event logs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Random seed, replacing the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, replacing the config's `output`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one vicinity method and write a report bundle.
    Detect {
        config: PathBuf,
        /// Method name; keeps the config's parameters if the type matches, otherwise uses defaults.
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(METHOD_NAMES))]
        method: Option<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run several methods on the same input and report their agreement.
    Compare {
        config: PathBuf,
        /// Comma-separated method names (default: the config's `compare` list).
        #[arg(long, value_delimiter = ',', value_parser = clap::builder::PossibleValuesParser::new(METHOD_NAMES))]
        methods: Vec<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write a synthetic log (XES, CSV and mapping), its ground truth and a starter config.
    Generate {
        #[arg(long, value_enum, default_value_t = LogKind::Contexts)]
        kind: LogKind,
        /// Generator parameters in TOML (contexts kind only).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "synthetic")]
        output: PathBuf,
    },
    /// Parse a log and report structural violations.
    Validate {
        log: PathBuf,
        /// Column mapping for CSV logs.
        #[arg(long)]
        mapping: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LogKind {
    /// Cases in three contexts with planted context-local throughput anomalies.
    Contexts,
    /// The 20-case loan log with three activity-sequence families.
    Loan,
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::from_file(path)?;
    if let Some(seed) = overrides.seed {
        cfg.analysis.seed = seed;
    }
    if let Some(output) = &overrides.output {
        cfg.output = output.clone();
    }
    Ok(cfg)
}

fn method_named(name: &str) -> MethodConfig {
    MethodConfig::from_name(name).expect("clap restricts method names")
}

fn failure(e: &PipelineError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn detect(config: &Path, method: Option<&str>, overrides: &Overrides) -> Result<(), PipelineError> {
    let mut cfg = load_config(config, overrides)?;
    if let Some(name) = method {
        if cfg.analysis.method.name() != name {
            cfg.analysis.method = method_named(name);
        }
    }
    let a = run_detect(&cfg)?;
    println!(
        "{} situations, {} vicinities, {} surprising; bundle written to {}",
        a.table.len(),
        a.cover.len(),
        a.flagged_rows().len(),
        cfg.output.display()
    );
    for &id in a.ranking.by_surprisingness.iter().take(5) {
        let f = a.ranking.finding(id).expect("ranked ids exist");
        if f.size_u > 0 {
            println!(
                "  vicinity {id}: {} of {} surprising, surprisingness {:.4}, effectiveness {:.2}",
                f.size_u, f.size_v, f.surprisingness, f.effectiveness
            );
        }
    }
    Ok(())
}

fn compare(config: &Path, methods: &[String], overrides: &Overrides) -> Result<(), PipelineError> {
    let cfg = load_config(config, overrides)?;
    let methods: Vec<MethodConfig> = methods
        .iter()
        .map(|name| {
            cfg.compare
                .iter()
                .chain(std::iter::once(&cfg.analysis.method))
                .find(|m| m.name() == name)
                .cloned()
                .unwrap_or_else(|| method_named(name))
        })
        .collect();
    let c = run_compare(&cfg, &methods)?;
    for (name, count) in &c.agreement.counts {
        println!(
            "{name}: {count} surprising ({} only by this method)",
            c.agreement.exclusive[name]
        );
    }
    println!(
        "flagged by all {} methods: {}",
        c.names.len(),
        c.agreement.all_agree
    );
    println!("bundle written to {}", cfg.output.display());
    Ok(())
}

fn starter_config(
    input: &Path,
    output: &Path,
    features: Vec<FeatureSpec>,
    method: MethodConfig,
    seed: u64,
) -> RunConfig {
    RunConfig {
        format_version: CONFIG_FORMAT_VERSION,
        input: InputConfig {
            path: input.to_path_buf(),
            format: None,
            mapping: None,
        },
        output: output.to_path_buf(),
        analysis: AnalysisSpec {
            target: TargetFeature::throughput(),
            features,
            method,
            detector: Default::default(),
            ranking: Default::default(),
            seed,
        },
        compare: vec![
            method_named("baseline"),
            method_named("kmeans"),
            method_named("tree"),
        ],
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {}: {e}", path.display());
    ExitCode::from(4)
}

fn generate(kind: LogKind, spec: Option<&Path>, seed: u64, output: &Path) -> ExitCode {
    let (log, truth, cfg) = match kind {
        LogKind::Contexts => {
            let spec = match spec.map(std::fs::read_to_string).transpose() {
                Ok(text) => text.map(|t| toml::from_str::<GeneratorSpec>(&t)),
                Err(e) => return io_failure(spec.expect("read was attempted"), e),
            };
            let spec = match spec.transpose() {
                Ok(s) => s.unwrap_or_default(),
                Err(e) => {
                    eprintln!("error: generator spec: {e}");
                    return ExitCode::from(2);
                }
            };
            let (log, truth) = match generate_synthetic_log(&spec, seed) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let features = vec![
                FeatureSpec::case_attribute(CONTEXT_ATTRIBUTE, FeatureKind::Categorical),
                FeatureSpec::case_attribute("amount", FeatureKind::Numeric),
            ];
            let method = MethodConfig::Tree {
                max_depth: 5,
                min_leaf: 100,
            };
            let cfg = starter_config(
                Path::new("log.xes"),
                Path::new("bundle"),
                features,
                method,
                seed,
            );
            (
                log,
                serde_json::to_value(truth).expect("ground truth serializes"),
                cfg,
            )
        }
        LogKind::Loan => {
            let (log, family) = generate_loan_log();
            let method = MethodConfig::Similarity {
                metric: Metric::LevenshteinOnActivitySequences,
                alpha: 1.0,
            };
            let cfg = starter_config(
                Path::new("log.xes"),
                Path::new("bundle"),
                Vec::new(),
                method,
                seed,
            );
            let families: serde_json::Map<String, serde_json::Value> = log
                .cases
                .iter()
                .zip(&family)
                .map(|(c, f)| (c.case_id.clone(), (*f).into()))
                .collect();
            (log, serde_json::json!({ "family": families }), cfg)
        }
    };
    if let Err(e) = write_log_files(&log, output, "log") {
        return io_failure(output, e);
    }
    let truth_text = serde_json::to_string_pretty(&truth).expect("json") + "\n";
    for (name, text) in [
        ("ground_truth.json", truth_text),
        ("run.toml", cfg.to_toml()),
    ] {
        if let Err(e) = std::fs::write(output.join(name), text) {
            return io_failure(&output.join(name), e);
        }
    }
    println!("{} cases written to {}", log.cases.len(), output.display());
    ExitCode::SUCCESS
}

fn validate_log(path: &Path, mapping: Option<&Path>) -> ExitCode {
    let input = InputConfig {
        path: path.to_path_buf(),
        format: None,
        mapping: mapping.map(Path::to_path_buf),
    };
    let log = match load_log(&input) {
        Ok(log) => log,
        Err(e) => return failure(&e),
    };
    let report = validate(&log);
    println!("{} cases, {} events", log.cases.len(), log.num_events());
    if report.is_empty() {
        println!("no violations");
        return ExitCode::SUCCESS;
    }
    for v in &report.violations {
        println!(
            "{}",
            serde_json::to_string(v).expect("violation serializes")
        );
    }
    println!("{} violation(s)", report.len());
    ExitCode::from(3)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Detect {
            config,
            method,
            overrides,
        } => detect(config, method.as_deref(), overrides),
        Command::Compare {
            config,
            methods,
            overrides,
        } => compare(config, methods, overrides),
        Command::Generate {
            kind,
            spec,
            seed,
            output,
        } => return generate(*kind, spec.as_deref(), *seed, output),
        Command::Validate { log, mapping } => return validate_log(log, mapping.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => failure(&e),
    }
}
