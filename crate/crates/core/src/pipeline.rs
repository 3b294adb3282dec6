//! End-to-end runs: configuration, analysis and the on-disk report bundle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::detection::{
    compare_methods, detect_all, AgreementReport, DetectorConfig, MethodResult, Side, SurprisingSet,
};
use crate::event_log::{
    parse_csv, parse_xes, serialize_csv, serialize_xes, validate, CsvMapping, EventLog, LogError,
    ValidationReport,
};
use crate::features::{
    build_feature_table, encode, extract_situations, EncodingReport, FeatureError, FeatureSource,
    FeatureSpec, SituationFeatureTable, TargetFeature,
};
use crate::ranking::{rank_findings, Ranking, RankingConfig};
use crate::vicinity::{build_cover, CoverError, MethodConfig, RegressionTree, VicinityCover};

pub const CONFIG_FORMAT_VERSION: u32 = 1;
pub const BUNDLE_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Parse,
    Validate,
    Extract,
    Encode,
    Cover,
    Detect,
    Rank,
    Compare,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = serde_json::to_value(self).expect("stage serializes");
        f.write_str(name.as_str().expect("stage is a string"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorClass {
    Config,
    Input,
    Internal,
}

#[derive(Debug, Clone, Error, PartialEq, Serialize)]
#[error("{stage} stage: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub class: ErrorClass,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, class: ErrorClass, message: impl fmt::Display) -> Self {
        PipelineError {
            stage,
            class,
            message: message.to_string(),
        }
    }

    /// 2 for configuration errors, 3 for bad input, 4 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self.class {
            ErrorClass::Config => 2,
            ErrorClass::Input => 3,
            ErrorClass::Internal => 4,
        }
    }
}

fn config_err(message: impl fmt::Display) -> PipelineError {
    PipelineError::new(Stage::Config, ErrorClass::Config, message)
}

fn write_err(e: impl fmt::Display) -> PipelineError {
    PipelineError::new(Stage::Write, ErrorClass::Internal, e)
}

fn feature_err(stage: Stage, e: FeatureError) -> PipelineError {
    let class = match e {
        FeatureError::AnchorAbsent(_)
        | FeatureError::NoSituations
        | FeatureError::AllDropped(_) => ErrorClass::Input,
        _ => ErrorClass::Config,
    };
    PipelineError::new(stage, class, e)
}

fn cover_err(e: CoverError) -> PipelineError {
    let class = match e {
        CoverError::KTooLarge { .. } | CoverError::InvalidParameter(_) => ErrorClass::Config,
        CoverError::Empty => ErrorClass::Input,
        CoverError::NotAPartition(_) => ErrorClass::Internal,
    };
    PipelineError::new(Stage::Cover, class, e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Xes,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputConfig {
    pub path: PathBuf,
    /// Inferred from the file extension when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<InputFormat>,
    /// Column mapping, required for CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<PathBuf>,
}

impl InputConfig {
    pub fn resolved_format(&self) -> Result<InputFormat, PipelineError> {
        if let Some(f) = self.format {
            return Ok(f);
        }
        match self
            .path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("xes") => Ok(InputFormat::Xes),
            Some("csv") => Ok(InputFormat::Csv),
            _ => Err(config_err(format!(
                "cannot infer the format of {}; set input.format",
                self.path.display()
            ))),
        }
    }
}

/// Everything that determines the analysis of an already parsed log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSpec {
    #[serde(default = "TargetFeature::throughput")]
    pub target: TargetFeature,
    #[serde(default)]
    pub features: Vec<FeatureSpec>,
    pub method: MethodConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub ranking: RankingConfig,
    #[serde(default)]
    pub seed: u64,
}

impl AnalysisSpec {
    pub fn check(&self) -> Result<(), PipelineError> {
        self.method.check().map_err(config_err)?;
        self.detector.check().map_err(config_err)?;
        self.ranking.check().map_err(config_err)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub format_version: u32,
    pub input: InputConfig,
    pub output: PathBuf,
    #[serde(flatten)]
    pub analysis: AnalysisSpec,
    /// Methods for `compare` runs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compare: Vec<MethodConfig>,
}

impl RunConfig {
    /// Parses a TOML config. Relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end()))?;
        if cfg.format_version != CONFIG_FORMAT_VERSION {
            return Err(config_err(format!(
                "unsupported format_version {} (expected {CONFIG_FORMAT_VERSION})",
                cfg.format_version
            )));
        }
        if let Some(base) = base {
            let resolve = |p: &Path| {
                if p.is_relative() {
                    base.join(p)
                } else {
                    p.to_path_buf()
                }
            };
            cfg.input.path = resolve(&cfg.input.path);
            cfg.input.mapping = cfg.input.mapping.as_deref().map(resolve);
            cfg.output = resolve(&cfg.output);
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text =
            fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<(), PipelineError> {
        self.analysis.check()?;
        let format = self.input.resolved_format()?;
        if !self.input.path.is_file() {
            return Err(config_err(format!(
                "input {} does not exist",
                self.input.path.display()
            )));
        }
        if format == InputFormat::Csv {
            match &self.input.mapping {
                None => return Err(config_err("CSV input needs input.mapping")),
                Some(m) if !m.is_file() => {
                    return Err(config_err(format!(
                        "mapping {} does not exist",
                        m.display()
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// The config as echoed in a manifest: the output location is left out so
    /// that bundles written to different directories compare equal.
    fn echo(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut()
            .expect("config is an object")
            .remove("output");
        v
    }
}

fn parse_err(e: LogError) -> PipelineError {
    PipelineError::new(Stage::Parse, ErrorClass::Input, e)
}

fn open(path: &Path) -> Result<BufReader<File>, PipelineError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))
}

pub fn load_log(input: &InputConfig) -> Result<EventLog, PipelineError> {
    match input.resolved_format()? {
        InputFormat::Xes => parse_xes(open(&input.path)?).map_err(parse_err),
        InputFormat::Csv => {
            let mapping_path = input
                .mapping
                .as_ref()
                .ok_or_else(|| config_err("CSV input needs input.mapping"))?;
            let text = fs::read_to_string(mapping_path)
                .map_err(|e| config_err(format!("{}: {e}", mapping_path.display())))?;
            let mapping = CsvMapping::from_toml(&text).map_err(config_err)?;
            parse_csv(open(&input.path)?, &mapping).map_err(parse_err)
        }
    }
}

/// Parses and validates; validation violations are input errors.
pub fn load_valid_log(input: &InputConfig) -> Result<(EventLog, ValidationReport), PipelineError> {
    let log = load_log(input)?;
    let report = validate(&log);
    if !report.is_empty() {
        let first = serde_json::to_string(&report.violations[0]).expect("violation serializes");
        return Err(PipelineError::new(
            Stage::Validate,
            ErrorClass::Input,
            format!("{} violation(s), first: {first}", report.len()),
        ));
    }
    Ok((log, report))
}

/// The result of one method applied to one log.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub table: SituationFeatureTable,
    pub encoding: EncodingReport,
    pub cover: VicinityCover,
    pub tree: Option<RegressionTree>,
    pub sets: Vec<SurprisingSet>,
    pub ranking: Ranking,
}

impl Analysis {
    pub fn targets(&self) -> Vec<f64> {
        self.table.targets()
    }

    /// All flagged rows, ascending.
    pub fn flagged_rows(&self) -> BTreeSet<usize> {
        self.sets.iter().flat_map(SurprisingSet::rows).collect()
    }

    pub fn flagged_count(&self, side: Side) -> usize {
        self.sets.iter().map(|s| s.count(side)).sum()
    }
}

/// Feature table and encoding, shared by every method on the same log.
pub fn tabulate(
    log: &EventLog,
    target: &TargetFeature,
    features: &[FeatureSpec],
) -> Result<(SituationFeatureTable, ndarray::Array2<f64>, EncodingReport), PipelineError> {
    target
        .check(&log.attr_schema)
        .map_err(|e| feature_err(Stage::Extract, e))?;
    for spec in features {
        if let FeatureSource::CaseAttribute(a) | FeatureSource::LastEventAttribute(a) = &spec.source
        {
            if !log.attr_schema.contains_key(a) {
                log::warn!(
                    "feature {:?}: attribute {a:?} never occurs; every value will be missing",
                    spec.name
                );
            }
        }
    }
    let extraction = extract_situations(log, target).map_err(|e| feature_err(Stage::Extract, e))?;
    let table = build_feature_table(&extraction.situations, features, target)
        .map_err(|e| feature_err(Stage::Extract, e))?;
    if !table.drops.is_empty() {
        log::warn!(
            "{} situation(s) dropped for lacking a target value",
            table.drops.len()
        );
    }
    let (matrix, encoding) = encode(&table);
    Ok((table, matrix, encoding))
}

fn check_bundle_invariants(
    cover: &VicinityCover,
    sets: &[SurprisingSet],
    n: usize,
) -> Result<(), PipelineError> {
    cover
        .check_partition(n)
        .map_err(|e| PipelineError::new(Stage::Detect, ErrorClass::Internal, e))?;
    let mut seen = vec![false; n];
    for set in sets {
        for row in set.rows() {
            if cover.assignment[row] != set.vicinity_id {
                return Err(PipelineError::new(
                    Stage::Detect,
                    ErrorClass::Internal,
                    format!("row {row} flagged outside its vicinity"),
                ));
            }
            if std::mem::replace(&mut seen[row], true) {
                return Err(PipelineError::new(
                    Stage::Detect,
                    ErrorClass::Internal,
                    format!("row {row} flagged twice"),
                ));
            }
        }
    }
    Ok(())
}

fn analyze_table(
    table: SituationFeatureTable,
    matrix: &ndarray::Array2<f64>,
    encoding: EncodingReport,
    spec: &AnalysisSpec,
) -> Result<Analysis, PipelineError> {
    let built = build_cover(&spec.method, &table, matrix.view(), &encoding, spec.seed)
        .map_err(cover_err)?;
    let targets = table.targets();
    let sets = detect_all(&built.cover, &targets, &spec.detector);
    check_bundle_invariants(&built.cover, &sets, table.len())?;
    let ranking = rank_findings(&sets, &built.cover, &targets, &spec.ranking)
        .map_err(|e| PipelineError::new(Stage::Rank, ErrorClass::Config, e))?;
    Ok(Analysis {
        table,
        encoding,
        cover: built.cover,
        tree: built.tree,
        sets,
        ranking,
    })
}

/// Extract, encode, cover, detect and rank, all in memory.
pub fn analyze(log: &EventLog, spec: &AnalysisSpec) -> Result<Analysis, PipelineError> {
    spec.check()?;
    let (table, matrix, encoding) = tabulate(log, &spec.target, &spec.features)?;
    analyze_table(table, &matrix, encoding, spec)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(write_err)?;
    text.push('\n');
    fs::write(dir.join(name), text).map_err(|e| write_err(format!("{name}: {e}")))
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::High => "high",
        Side::Low => "low",
    }
}

fn write_cover_csv(dir: &Path, a: &Analysis) -> Result<(), PipelineError> {
    let mut flag = vec![""; a.table.len()];
    for set in &a.sets {
        for m in &set.members {
            flag[m.row] = side_name(m.side);
        }
    }
    let mut w = csv::Writer::from_path(dir.join("cover.csv")).map_err(write_err)?;
    w.write_record([
        "row",
        "case_id",
        "prefix_len",
        "vicinity_id",
        "target",
        "surprising",
    ])
    .map_err(write_err)?;
    for (i, row) in a.table.rows.iter().enumerate() {
        w.write_record([
            i.to_string(),
            row.case_id.clone(),
            row.prefix_len.to_string(),
            a.cover.assignment[i].to_string(),
            row.target.to_string(),
            flag[i].to_string(),
        ])
        .map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_findings_csv(dir: &Path, ranking: &Ranking) -> Result<(), PipelineError> {
    let position = |order: &[usize]| -> BTreeMap<usize, usize> {
        order
            .iter()
            .enumerate()
            .map(|(rank, &v)| (v, rank + 1))
            .collect()
    };
    let surp_rank = position(&ranking.by_surprisingness);
    let eff_rank = position(&ranking.by_effectiveness);
    let mut w = csv::Writer::from_path(dir.join("findings.csv")).map_err(write_err)?;
    w.write_record([
        "vicinity_id",
        "surprisingness_rank",
        "effectiveness_rank",
        "surprisingness",
        "effectiveness",
        "avg_u",
        "avg_rest",
        "size_u",
        "size_v",
        "high",
        "low",
        "degenerate",
    ])
    .map_err(write_err)?;
    for &id in &ranking.by_surprisingness {
        let f = ranking.finding(id).expect("ordered ids come from findings");
        w.write_record([
            id.to_string(),
            surp_rank[&id].to_string(),
            eff_rank[&id].to_string(),
            f.surprisingness.to_string(),
            f.effectiveness.to_string(),
            opt(f.avg_u),
            opt(f.avg_rest),
            f.size_u.to_string(),
            f.size_v.to_string(),
            f.high.to_string(),
            f.low.to_string(),
            f.degenerate.to_string(),
        ])
        .map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}

/// Equal-width histogram with Sturges' bin count.
fn histogram(values: &[f64]) -> Value {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = if max > min {
        (values.len() as f64).log2().ceil() as usize + 1
    } else {
        1
    };
    let width = if max > min {
        (max - min) / bins as f64
    } else {
        1.0
    };
    let mut counts = vec![0usize; bins];
    for v in values {
        let b = (((v - min) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let edges: Vec<f64> = (0..=bins)
        .map(|i| {
            if i == bins {
                max.max(min + width)
            } else {
                min + i as f64 * width
            }
        })
        .collect();
    json!({ "bin_edges": edges, "counts": counts })
}

fn plot_data(a: &Analysis) -> Value {
    let targets = a.targets();
    let boxplots: Vec<Value> = a
        .sets
        .iter()
        .map(|s| {
            let outliers: Vec<Value> = s
                .members
                .iter()
                .map(|m| json!({ "row": m.row, "target": targets[m.row], "side": m.side }))
                .collect();
            json!({
                "vicinity_id": s.vicinity_id,
                "size": s.stats.size,
                "min": s.stats.min,
                "q1": s.stats.q1,
                "median": s.stats.median,
                "q3": s.stats.q3,
                "max": s.stats.max,
                "lower_fence": s.fences.lower,
                "upper_fence": s.fences.upper,
                "outliers": outliers,
            })
        })
        .collect();
    let bars: Vec<Value> = a
        .ranking
        .by_surprisingness
        .iter()
        .map(|&id| {
            let f = a.ranking.finding(id).expect("ordered ids come from findings");
            json!({ "vicinity_id": id, "surprisingness": f.surprisingness, "effectiveness": f.effectiveness })
        })
        .collect();
    json!({ "boxplots": boxplots, "score_bars": bars, "target_histogram": histogram(&targets) })
}

fn sets_json(a: &Analysis) -> Value {
    let sets: Vec<Value> = a
        .sets
        .iter()
        .map(|s| {
            let members: Vec<Value> = s
                .members
                .iter()
                .map(|m| {
                    let row = &a.table.rows[m.row];
                    json!({ "row": m.row, "case_id": row.case_id, "prefix_len": row.prefix_len, "target": row.target, "side": m.side })
                })
                .collect();
            json!({ "vicinity_id": s.vicinity_id, "fences": s.fences, "stats": s.stats, "members": members })
        })
        .collect();
    Value::Array(sets)
}

fn write_analysis_files(
    dir: &Path,
    a: &Analysis,
    validation: &ValidationReport,
) -> Result<Vec<&'static str>, PipelineError> {
    let mut files = vec![
        "cover.json",
        "cover.csv",
        "surprising_sets.json",
        "findings.json",
        "findings.csv",
        "reports.json",
        "plots.json",
    ];
    write_json(dir, "cover.json", &a.cover)?;
    write_cover_csv(dir, a)?;
    write_json(dir, "surprising_sets.json", &sets_json(a))?;
    write_json(dir, "findings.json", &a.ranking)?;
    write_findings_csv(dir, &a.ranking)?;
    write_json(
        dir,
        "reports.json",
        &json!({
            "validation": validation,
            "situations": a.table.len() + a.table.drops.len(),
            "rows": a.table.len(),
            "drops": a.table.drops,
            "encoding": a.encoding,
        }),
    )?;
    write_json(dir, "plots.json", &plot_data(a))?;
    if let Some(tree) = &a.tree {
        write_json(dir, "tree.json", tree)?;
        files.push("tree.json");
    }
    Ok(files)
}

fn summary(a: &Analysis) -> Value {
    json!({
        "rows": a.table.len(),
        "dropped": a.table.drops.len(),
        "vicinities": a.cover.len(),
        "flagged": a.flagged_rows().len(),
        "high": a.flagged_count(Side::High),
        "low": a.flagged_count(Side::Low),
    })
}

struct Manifest {
    config: Value,
    input: Value,
}

impl Manifest {
    fn write(
        &self,
        dir: &Path,
        outcome: Result<(Value, Vec<&str>), &PipelineError>,
    ) -> Result<(), PipelineError> {
        let (complete, error, summary, files) = match outcome {
            Ok((summary, files)) => (true, Value::Null, summary, files),
            Err(e) => (
                false,
                serde_json::to_value(e).expect("error serializes"),
                Value::Null,
                vec![],
            ),
        };
        write_json(
            dir,
            MANIFEST_FILE,
            &json!({
                "bundle_format_version": BUNDLE_FORMAT_VERSION,
                "tool": env!("CARGO_PKG_NAME"),
                "tool_version": env!("CARGO_PKG_VERSION"),
                "created_at": crate::event_log::format_timestamp(chrono::Utc::now()),
                "complete": complete,
                "error": error,
                "config": self.config,
                "input": self.input,
                "summary": summary,
                "files": files,
            }),
        )
    }
}

fn input_facts(input: &InputConfig, log: Option<&EventLog>) -> Value {
    let bytes = fs::metadata(&input.path).map(|m| m.len()).ok();
    json!({
        "file": input.path.file_name().map(|n| n.to_string_lossy().into_owned()),
        "bytes": bytes,
        "cases": log.map(|l| l.cases.len()),
        "events": log.map(EventLog::num_events),
    })
}

/// Runs `body` with an incomplete manifest in place, then records the outcome.
fn with_manifest<T>(
    dir: &Path,
    manifest: &mut Manifest,
    body: impl FnOnce(&mut Manifest) -> Result<(T, Value, Vec<&'static str>), PipelineError>,
) -> Result<T, PipelineError> {
    fs::create_dir_all(dir).map_err(|e| write_err(format!("{}: {e}", dir.display())))?;
    manifest.write(
        dir,
        Err(&PipelineError::new(
            Stage::Write,
            ErrorClass::Internal,
            "run in progress",
        )),
    )?;
    match body(manifest) {
        Ok((value, summary, files)) => {
            manifest.write(dir, Ok((summary, files)))?;
            Ok(value)
        }
        Err(e) => {
            if let Err(w) = manifest.write(dir, Err(&e)) {
                log::error!("could not record the failure in the manifest: {w}");
            }
            Err(e)
        }
    }
}

/// Parse, validate, analyze and write the report bundle to `cfg.output`.
pub fn run_detect(cfg: &RunConfig) -> Result<Analysis, PipelineError> {
    cfg.check()?;
    let mut manifest = Manifest {
        config: cfg.echo(),
        input: input_facts(&cfg.input, None),
    };
    with_manifest(&cfg.output, &mut manifest, |manifest| {
        let (log, validation) = load_valid_log(&cfg.input)?;
        manifest.input = input_facts(&cfg.input, Some(&log));
        let analysis = analyze(&log, &cfg.analysis)?;
        let files = write_analysis_files(&cfg.output, &analysis, &validation)?;
        let summary = summary(&analysis);
        Ok((analysis, summary, files))
    })
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub names: Vec<String>,
    pub analyses: Vec<Analysis>,
    pub agreement: AgreementReport,
}

/// Directory names for a list of methods: the method name, suffixed on repeats.
pub fn method_labels(methods: &[MethodConfig]) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    methods
        .iter()
        .map(|m| {
            let n = seen.entry(m.name()).or_insert(0);
            *n += 1;
            if *n == 1 {
                m.name().to_string()
            } else {
                format!("{}-{n}", m.name())
            }
        })
        .collect()
}

/// Agreement between methods on an already parsed log.
pub fn compare_on_log(
    log: &EventLog,
    spec: &AnalysisSpec,
    methods: &[MethodConfig],
) -> Result<Comparison, PipelineError> {
    if methods.len() < 2 {
        return Err(config_err("compare needs at least two methods"));
    }
    let (table, matrix, encoding) = tabulate(log, &spec.target, &spec.features)?;
    let names = method_labels(methods);
    let mut analyses = Vec::with_capacity(methods.len());
    for method in methods {
        let spec = AnalysisSpec {
            method: method.clone(),
            ..spec.clone()
        };
        spec.check()?;
        analyses.push(analyze_table(
            table.clone(),
            &matrix,
            encoding.clone(),
            &spec,
        )?);
    }
    let results: Vec<MethodResult> = names
        .iter()
        .zip(&analyses)
        .map(|(name, a)| MethodResult::from_sets(name, a.table.len(), &a.sets))
        .collect();
    let agreement = compare_methods(&results)
        .map_err(|e| PipelineError::new(Stage::Compare, ErrorClass::Internal, e))?;
    Ok(Comparison {
        names,
        analyses,
        agreement,
    })
}

/// Runs every method in `methods` (or `cfg.compare` when empty) on the same
/// input. Each method gets a sub-bundle; `agreement.json` sits at the top.
pub fn run_compare(cfg: &RunConfig, methods: &[MethodConfig]) -> Result<Comparison, PipelineError> {
    let methods = if methods.is_empty() {
        cfg.compare.as_slice()
    } else {
        methods
    };
    if methods.len() < 2 {
        return Err(config_err("compare needs at least two methods"));
    }
    cfg.check()?;
    let mut echo = cfg.echo();
    echo["compare"] = serde_json::to_value(methods).expect("methods serialize");
    let mut manifest = Manifest {
        config: echo,
        input: input_facts(&cfg.input, None),
    };
    with_manifest(&cfg.output, &mut manifest, |manifest| {
        let (log, validation) = load_valid_log(&cfg.input)?;
        manifest.input = input_facts(&cfg.input, Some(&log));
        let comparison = compare_on_log(&log, &cfg.analysis, methods)?;
        for ((name, method), analysis) in comparison
            .names
            .iter()
            .zip(methods)
            .zip(&comparison.analyses)
        {
            let sub = RunConfig {
                analysis: AnalysisSpec {
                    method: method.clone(),
                    ..cfg.analysis.clone()
                },
                output: cfg.output.join(name),
                compare: Vec::new(),
                ..cfg.clone()
            };
            let mut sub_manifest = Manifest {
                config: sub.echo(),
                input: manifest.input.clone(),
            };
            with_manifest(&sub.output, &mut sub_manifest, |_| {
                let files = write_analysis_files(&sub.output, analysis, &validation)?;
                Ok(((), summary(analysis), files))
            })?;
        }
        write_json(&cfg.output, "agreement.json", &comparison.agreement)?;
        let summary = json!({
            "methods": comparison.names,
            "union": comparison.agreement.union,
            "all_agree": comparison.agreement.all_agree,
        });
        Ok((comparison, summary, vec!["agreement.json"]))
    })
}

/// Writes `log` as `<stem>.xes`, `<stem>.csv` and `<stem>.mapping.toml`.
pub fn write_log_files(log: &EventLog, dir: &Path, stem: &str) -> std::io::Result<[PathBuf; 3]> {
    fs::create_dir_all(dir)?;
    let xes = dir.join(format!("{stem}.xes"));
    let csv = dir.join(format!("{stem}.csv"));
    let mapping = dir.join(format!("{stem}.mapping.toml"));
    fs::write(&xes, serialize_xes(log))?;
    let (text, map) = serialize_csv(log);
    fs::write(&csv, text)?;
    fs::write(&mapping, map.to_toml())?;
    Ok([xes, csv, mapping])
}
