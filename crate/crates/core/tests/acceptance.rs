//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Criterion 6 needs the public BPI Challenge 2017 log; point
//! `SURPRISE_BPI2017_XES` at the unpacked XES file to enable it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use surprise_core::detection::{
    boxplot_detect, detect_all, global_baseline, quantile, DetectorConfig, Direction, Side,
};
use surprise_core::event_log::{
    parse_xes, AttrDecl, AttrLevel, AttributeMap, AttributeValue, Case, Event, EventLog, ValueKind,
};
use surprise_core::features::{Anchor, Derivation, FeatureKind, FeatureSpec, TargetFeature};
use surprise_core::pipeline::{
    analyze, compare_on_log, run_detect, write_log_files, AnalysisSpec, InputConfig, RunConfig,
    CONFIG_FORMAT_VERSION,
};
use surprise_core::ranking::{effectiveness, surprisingness};
use surprise_core::synthetic::{
    generate_loan_log, generate_synthetic_log, GeneratorSpec, CONTEXT_ATTRIBUTE,
};
use surprise_core::vicinity::{
    euclidean, kmeans, levenshtein, louvain, modularity, tree_cover, MethodConfig, Metric,
    Provenance, SimilarityGraph, TreeConfig, VicinityCover,
};

const ORACLE_TOL: f64 = 1e-9;
const BPI_ENV: &str = "SURPRISE_BPI2017_XES";

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= ORACLE_TOL * a.abs().max(b.abs()).max(1.0)
}

fn within_time(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || {
        format!("{what} took {took:.1?}, limit {limit:?}")
    })
}

// ---- independent oracles -------------------------------------------------

/// Quantile as a tent-weighted sum of order statistics around rank (n-1)p.
fn quantile_oracle(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = (sorted.len() - 1) as f64 * p;
    sorted
        .iter()
        .enumerate()
        .map(|(i, v)| v * (1.0 - (rank - i as f64).abs()).max(0.0))
        .sum()
}

fn levenshtein_oracle(a: &[u8], b: &[u8], memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if a.is_empty() || b.is_empty() {
        return a.len() + b.len();
    }
    if let Some(&d) = memo.get(&(a.len(), b.len())) {
        return d;
    }
    let (ra, rb) = (&a[..a.len() - 1], &b[..b.len() - 1]);
    let cost = usize::from(a[a.len() - 1] != b[b.len() - 1]);
    let d = (levenshtein_oracle(ra, b, memo) + 1)
        .min(levenshtein_oracle(a, rb, memo) + 1)
        .min(levenshtein_oracle(ra, rb, memo) + cost);
    memo.insert((a.len(), b.len()), d);
    d
}

fn euclidean_oracle(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in (0..a.len()).rev() {
        acc += (b[i] - a[i]).powi(2);
    }
    acc.sqrt()
}

/// Scores computed from a vicinity and a membership mask.
fn scores_oracle(v: &[f64], in_u: &[bool], gamma: f64, lower_is_better: bool) -> (f64, f64) {
    let (mut su, mut nu, mut sr, mut nr) = (0.0, 0usize, 0.0, 0usize);
    for (x, &m) in v.iter().zip(in_u) {
        if m {
            su += x;
            nu += 1;
        } else {
            sr += x;
            nr += 1;
        }
    }
    let (au, ar) = (su / nu as f64, sr / nr as f64);
    let surp = gamma * (au - ar).abs() + (1.0 - gamma) * nu as f64 / v.len() as f64;
    let worse_is_u = if lower_is_better { au > ar } else { au < ar };
    let eff = if au == ar {
        0.0
    } else if worse_is_u {
        (au - ar).abs() * nu as f64
    } else {
        (au - ar).abs() * nr as f64
    };
    (surp, eff)
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let instances = 500;
    for i in 0..instances {
        let n = rng.random_range(1..25);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let p = if i % 5 == 0 {
            [0.0, 0.25, 0.5, 0.75, 1.0][i / 5 % 5]
        } else {
            rng.random::<f64>()
        };
        let got = quantile(&values, p).map_err(|e| e.to_string())?;
        let want = quantile_oracle(&values, p);
        ensure(close(got, want), || {
            format!("quantile({values:?}, {p}) = {got}, oracle {want}")
        })?;
    }
    for _ in 0..instances {
        let a: Vec<u8> = (0..rng.random_range(0..8))
            .map(|_| rng.random_range(0..3))
            .collect();
        let b: Vec<u8> = (0..rng.random_range(0..8))
            .map(|_| rng.random_range(0..3))
            .collect();
        let want = levenshtein_oracle(&a, &b, &mut HashMap::new());
        ensure(levenshtein(&a, &b) == want, || {
            format!("levenshtein({a:?}, {b:?}) != {want}")
        })?;
    }
    for _ in 0..instances {
        let d = rng.random_range(1..10);
        let a: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let (got, want) = (euclidean(&a, &b), euclidean_oracle(&a, &b));
        ensure(close(got, want), || {
            format!("euclidean = {got}, oracle {want}")
        })?;
    }
    for _ in 0..instances {
        let n = rng.random_range(2..20);
        let v: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..50))).collect();
        let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        mask[0] = true;
        mask[n - 1] = false;
        let gamma = rng.random_range(0.01..=1.0);
        let lower = rng.random_bool(0.5);
        let u: Vec<f64> = v.iter().zip(&mask).filter(|p| *p.1).map(|p| *p.0).collect();
        let rest: Vec<f64> = v
            .iter()
            .zip(&mask)
            .filter(|p| !*p.1)
            .map(|p| *p.0)
            .collect();
        let (ws, we) = scores_oracle(&v, &mask, gamma, lower);
        let gs = surprisingness(&u, &rest, gamma).map_err(|e| e.to_string())?;
        let ge = effectiveness(&u, &rest, lower).map_err(|e| e.to_string())?;
        ensure(close(gs, ws), || {
            format!("surprisingness {gs} vs oracle {ws}")
        })?;
        ensure(close(ge, we), || {
            format!("effectiveness {ge} vs oracle {we}")
        })?;
    }
    within_time(start, Duration::from_secs(60), "oracle suite")?;
    Ok(format!(
        "{instances} instances per function agree within {ORACLE_TOL:e}"
    ))
}

// ---- random logs ------------------------------------------------------------

fn random_log(rng: &mut ChaCha8Rng) -> EventLog {
    let n = rng.random_range(30..200);
    let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
    let cases = (0..n)
        .map(|i| {
            let id = format!("r{i}");
            let mut time = t0 + chrono::Duration::hours(rng.random_range(0..10_000));
            let len = rng.random_range(1..7);
            let events = (0..len)
                .map(|_| {
                    time += chrono::Duration::minutes(rng.random_range(0..20_000));
                    Event {
                        case_id: id.clone(),
                        activity: ["A", "B", "C", "D", "E"][rng.random_range(0..5)].into(),
                        timestamp: time,
                        attrs: AttributeMap::new(),
                    }
                })
                .collect();
            let mut case_attrs = AttributeMap::new();
            if rng.random_bool(0.9) {
                case_attrs.insert(
                    "segment".into(),
                    AttributeValue::Text(["x", "y", "z"][rng.random_range(0..3)].into()),
                );
            }
            if rng.random_bool(0.9) {
                case_attrs.insert(
                    "amount".into(),
                    AttributeValue::Real(rng.random_range(0.0..1e4)),
                );
            }
            Case {
                case_id: id,
                events,
                case_attrs,
            }
        })
        .collect();
    let decl = |kind| AttrDecl {
        kind,
        level: AttrLevel::Case,
    };
    EventLog {
        cases,
        attr_schema: [
            ("segment".to_string(), decl(ValueKind::Text)),
            ("amount".to_string(), decl(ValueKind::Real)),
        ]
        .into(),
    }
}

fn random_specs() -> Vec<FeatureSpec> {
    vec![
        FeatureSpec::case_attribute("segment", FeatureKind::Categorical),
        FeatureSpec::case_attribute("amount", FeatureKind::Numeric),
        FeatureSpec::occurrences("A"),
    ]
}

fn spec_for(method: MethodConfig, features: Vec<FeatureSpec>, seed: u64) -> AnalysisSpec {
    AnalysisSpec {
        target: TargetFeature::throughput(),
        features,
        method,
        detector: DetectorConfig::default(),
        ranking: Default::default(),
        seed,
    }
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut covers = 0;
    for t in 0..50u64 {
        let log = random_log(&mut rng);
        let metric = if t % 2 == 0 {
            Metric::EuclideanOnEncoded
        } else {
            Metric::LevenshteinOnActivitySequences
        };
        let alpha = if t % 2 == 0 { 0.25 } else { 1.0 };
        let methods = [
            MethodConfig::Similarity { metric, alpha },
            MethodConfig::Kmeans {
                k: rng.random_range(1..12),
                max_iter: 300,
            },
            MethodConfig::Tree {
                max_depth: 5,
                min_leaf: rng.random_range(1..20),
            },
        ];
        for method in methods {
            let name = method.name();
            let a =
                analyze(&log, &spec_for(method, random_specs(), t)).map_err(|e| e.to_string())?;
            let n = a.table.len();
            let mut seen = vec![0usize; n];
            for (id, v) in a.cover.vicinities.iter().enumerate() {
                ensure(!v.is_empty(), || {
                    format!("table {t} {name}: vicinity {id} empty")
                })?;
                for &r in v {
                    seen[r] += 1;
                    ensure(a.cover.assignment[r] == id, || {
                        format!("table {t} {name}: assignment mismatch")
                    })?;
                }
            }
            ensure(seen.iter().all(|&c| c == 1), || {
                format!("table {t} {name}: not a partition")
            })?;
            for s in &a.sets {
                let v: BTreeSet<usize> =
                    a.cover.vicinities[s.vicinity_id].iter().copied().collect();
                ensure(s.rows().all(|r| v.contains(&r)), || {
                    format!("table {t} {name}: D(V) not within V")
                })?;
            }
            covers += 1;
        }
        let targets: Vec<f64> = analyze(&log, &spec_for(MethodConfig::Baseline, vec![], t))
            .map_err(|e| e.to_string())?
            .targets();
        let single = VicinityCover::single(targets.len(), Provenance::new("single"));
        for cfg in [
            DetectorConfig::default(),
            DetectorConfig::boxplot(0.5, Direction::Both),
            DetectorConfig::boxplot(1.0, Direction::LowOnly),
        ] {
            ensure(
                detect_all(&single, &targets, &cfg) == vec![global_baseline(&targets, &cfg)],
                || format!("table {t}: single-vicinity detection differs from the global baseline"),
            )?;
        }
    }
    Ok(format!("{covers} covers over 50 tables are partitions; D(V) within V; single cover equals baseline"))
}

fn planted(seed: u64) -> (SimilarityGraph, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<usize> = (0..60).map(|i| i % 3).collect();
    let mut edges = Vec::new();
    for i in 0..60 {
        for j in (i + 1)..60 {
            if rng.random_bool(if truth[i] == truth[j] { 0.5 } else { 0.02 }) {
                edges.push((i, j));
            }
        }
    }
    (SimilarityGraph::from_edges(60, &edges), truth)
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut histories = 0;
    for trial in 0..20u64 {
        let n = rng.random_range(20..400);
        let d = rng.random_range(1..6);
        let data = Array2::from_shape_fn((n, d), |_| rng.random::<f64>());
        let k = rng.random_range(1..n.min(30));
        let fit = kmeans(data.view(), k, trial, 300).map_err(|e| e.to_string())?;
        for w in fit.objective_history.windows(2) {
            ensure(w[1] <= w[0] * (1.0 + 1e-12), || {
                format!("k-means trial {trial}: objective rose {} -> {}", w[0], w[1])
            })?;
        }
        histories += 1;
    }

    let mut worst_gap = f64::NEG_INFINITY;
    for seed in 0..10 {
        let (g, truth) = planted(seed);
        let cover = louvain(&g, seed);
        let q = modularity(&g, &cover.assignment);
        let singletons: Vec<usize> = (0..60).collect();
        ensure(q >= modularity(&g, &singletons), || {
            format!("louvain seed {seed}: below singleton modularity")
        })?;
        let gap = modularity(&g, &truth) - q;
        worst_gap = worst_gap.max(gap);
        ensure(gap <= 0.02, || {
            format!("louvain seed {seed}: {gap:.4} below the planted partition")
        })?;
    }

    let mut trees = 0;
    for trial in 0..30 {
        let n = rng.random_range(1..1500);
        let d = rng.random_range(1..5);
        let x = Array2::from_shape_fn((n, d), |_| f64::from(rng.random_range(0..20)) / 19.0);
        let y: Vec<f64> = (0..n)
            .map(|i| x[[i, 0]] * 50.0 + rng.random::<f64>() * 10.0)
            .collect();
        let cfg = if trial % 2 == 0 {
            TreeConfig::default()
        } else {
            TreeConfig {
                max_depth: 5,
                min_leaf: rng.random_range(1..30),
            }
        };
        let fit = tree_cover(x.view(), &y, cfg, None).map_err(|e| e.to_string())?;
        ensure(fit.tree.depth() <= cfg.max_depth, || {
            format!("tree trial {trial}: depth {}", fit.tree.depth())
        })?;
        let smallest = fit.cover.vicinities.iter().map(Vec::len).min().unwrap();
        ensure(fit.cover.len() == 1 || smallest >= cfg.min_leaf, || {
            format!("tree trial {trial}: leaf of {smallest} rows")
        })?;
        trees += 1;
    }
    Ok(format!(
        "{histories} k-means runs monotone; louvain within {worst_gap:.4} of planted (limit 0.02); {trees} trees within bounds"
    ))
}

fn criterion_4() -> Check {
    let start = Instant::now();
    let mut lines = Vec::new();
    for seed in [1u64, 2, 3] {
        let (log, truth) =
            generate_synthetic_log(&GeneratorSpec::default(), seed).map_err(|e| e.to_string())?;
        let spec = spec_for(MethodConfig::Baseline, vec![], 0);
        let base = analyze(&log, &spec).map_err(|e| e.to_string())?;
        let rows = &base.table.rows;
        let targets = base.targets();
        let names: Vec<&str> = rows
            .iter()
            .map(|r| truth.case_context[&r.case_id].as_str())
            .collect();
        let order: BTreeMap<&str, usize> = names
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .zip(0..)
            .collect();
        let labels: Vec<usize> = names.iter().map(|n| order[n]).collect();
        let context_cover = VicinityCover::from_labels(&labels, Provenance::new("true-context"));
        let flagged: BTreeSet<usize> =
            detect_all(&context_cover, &targets, &DetectorConfig::default())
                .iter()
                .flat_map(|s| s.rows().collect::<Vec<_>>())
                .collect();

        let planted: BTreeSet<&str> = truth.anomalies.iter().map(|a| a.case_id.as_str()).collect();
        let planted_rows: Vec<usize> = (0..rows.len())
            .filter(|&r| planted.contains(rows[r].case_id.as_str()))
            .collect();
        let recall = planted_rows.iter().filter(|r| flagged.contains(r)).count() as f64
            / planted_rows.len() as f64;

        let global = global_baseline(&targets, &DetectorConfig::default());
        let (lo, hi) = (global.fences.lower.unwrap(), global.fences.upper.unwrap());
        let inside: Vec<usize> = planted_rows
            .iter()
            .copied()
            .filter(|&r| targets[r] >= lo && targets[r] <= hi)
            .collect();
        let base_flags: BTreeSet<usize> = global.rows().collect();
        let base_recall_inside = inside.iter().filter(|r| base_flags.contains(r)).count();

        ensure(recall >= 0.9, || {
            format!("seed {seed}: context recall {recall:.3} < 0.9")
        })?;
        ensure(
            inside.len() as f64 >= 0.4 * planted_rows.len() as f64,
            || {
                format!(
                    "seed {seed}: only {} of {} anomalies inside global fences",
                    inside.len(),
                    planted_rows.len()
                )
            },
        )?;
        ensure(base_recall_inside == 0, || {
            format!(
                "seed {seed}: baseline flagged {base_recall_inside} anomalies inside its fences"
            )
        })?;
        lines.push(format!(
            "seed {seed}: recall {recall:.3}, {}/{} inside global fences, baseline recall there 0",
            inside.len(),
            planted_rows.len()
        ));
    }
    within_time(start, Duration::from_secs(120), "context-sensitivity run")?;
    Ok(lines.join("; "))
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let (log, _) = generate_loan_log();
    let spec = spec_for(
        MethodConfig::Similarity {
            metric: Metric::LevenshteinOnActivitySequences,
            alpha: 1.0,
        },
        vec![],
        0,
    );
    let a = analyze(&log, &spec).map_err(|e| e.to_string())?;
    let (high, low) = (a.flagged_count(Side::High), a.flagged_count(Side::Low));
    ensure(a.table.len() == 20, || {
        format!("{} situations", a.table.len())
    })?;
    ensure(a.cover.len() == 3, || {
        format!("{} vicinities", a.cover.len())
    })?;
    ensure(high > 0 && low > 0, || format!("{high} high, {low} low"))?;
    let global = boxplot_detect(&a.targets(), &DetectorConfig::default());
    within_time(start, Duration::from_secs(10), "loan example")?;
    Ok(format!(
        "3 vicinities; {high} high and {low} low outliers; global boxplot flags {}",
        global.members.len()
    ))
}

fn bpi_features() -> Vec<FeatureSpec> {
    vec![
        FeatureSpec::case_attribute("ApplicationType", FeatureKind::Categorical),
        FeatureSpec::case_attribute("LoanGoal", FeatureKind::Categorical),
        FeatureSpec::case_attribute("RequestedAmount", FeatureKind::Numeric),
        FeatureSpec::occurrences("O_Create Offer"),
    ]
}

fn criterion_6() -> Result<Verdict, String> {
    let Some(path) = std::env::var_os(BPI_ENV).map(PathBuf::from) else {
        return Ok(Verdict::Skip(format!(
            "set {BPI_ENV} to the BPI Challenge 2017 XES file to run"
        )));
    };
    let reader = std::io::BufReader::new(
        fs::File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?,
    );
    let log = parse_xes(reader).map_err(|e| e.to_string())?;
    let mut report = vec![format!("{} cases", log.cases.len())];
    let mut failures = Vec::new();
    let mut expect = |ok: bool, what: String| {
        if !ok {
            failures.push(what.clone());
        }
        report.push(what);
    };
    expect(
        log.cases.len() == 31_509,
        format!("case count {} (expected 31509)", log.cases.len()),
    );

    let target = TargetFeature {
        attribute: "throughput".into(),
        anchor: Anchor::CaseEnd,
        derivation: Derivation::Throughput,
    };
    let base = analyze(
        &log,
        &AnalysisSpec {
            target: target.clone(),
            detector: DetectorConfig::boxplot(1.5, Direction::HighOnly),
            ..spec_for(MethodConfig::Baseline, vec![], 0)
        },
    )
    .map_err(|e| e.to_string())?;
    let targets = base.targets();
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let fence = base.sets[0].fences.upper.unwrap();
    let count = base.flagged_rows().len();
    expect(
        (fence - 61.0).abs() <= 3.0,
        format!("global fence {fence:.2} days (61 ± 3)"),
    );
    expect(
        count.abs_diff(255) <= 15,
        format!("global outliers {count} (255 ± 15)"),
    );
    expect(
        (mean - 22.0).abs() <= 1.0,
        format!("mean throughput {mean:.2} days (22 ± 1)"),
    );

    let mut totals = Vec::new();
    for seed in 0..5 {
        let a = analyze(
            &log,
            &spec_for(
                MethodConfig::Kmeans {
                    k: 25,
                    max_iter: 300,
                },
                bpi_features(),
                seed,
            ),
        )
        .map_err(|e| e.to_string())?;
        totals.push(a.flagged_rows().len());
    }
    let avg = totals.iter().sum::<usize>() as f64 / totals.len() as f64;
    expect(
        (avg - 280.0).abs() <= 40.0,
        format!("k-means k=25 surprising {totals:?}, mean {avg:.1} (280 ± 40)"),
    );

    let methods = [
        MethodConfig::Baseline,
        MethodConfig::Kmeans {
            k: 25,
            max_iter: 300,
        },
        MethodConfig::Tree {
            max_depth: 5,
            min_leaf: 100,
        },
        MethodConfig::Similarity {
            metric: Metric::EuclideanOnEncoded,
            alpha: 1.4,
        },
    ];
    let c = compare_on_log(
        &log,
        &spec_for(MethodConfig::Baseline, bpi_features(), 0),
        &methods,
    )
    .map_err(|e| e.to_string())?;
    let all = c.agreement.all_agree;
    expect(
        all.abs_diff(176) <= 40,
        format!("4-way agreement {all} (176 ± 40)"),
    );

    let text = report.join("; ");
    Ok(if failures.is_empty() {
        Verdict::Pass(text)
    } else {
        Verdict::Fail(text)
    })
}

fn bundle_files(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut text = fs::read_to_string(&path).unwrap();
        if name == "manifest.json" {
            let mut v: Value = serde_json::from_str(&text).unwrap();
            v.as_object_mut().unwrap().remove("created_at");
            text = v.to_string();
        }
        out.insert(name, text);
    }
    out
}

fn criterion_7() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (log, _) = generate_synthetic_log(
        &GeneratorSpec {
            n_cases: 500,
            ..Default::default()
        },
        99,
    )
    .map_err(|e| e.to_string())?;
    let [xes, _, _] = write_log_files(&log, tmp.path(), "log").map_err(|e| e.to_string())?;
    let features = vec![
        FeatureSpec::case_attribute(CONTEXT_ATTRIBUTE, FeatureKind::Categorical),
        FeatureSpec::case_attribute("amount", FeatureKind::Numeric),
    ];
    let methods = [
        MethodConfig::Similarity {
            metric: Metric::EuclideanOnEncoded,
            alpha: 0.1,
        },
        MethodConfig::Kmeans {
            k: 10,
            max_iter: 300,
        },
        MethodConfig::Tree {
            max_depth: 5,
            min_leaf: 40,
        },
        MethodConfig::Baseline,
    ];
    let mut files = 0;
    for method in methods {
        let name = method.name();
        let mut bundles = Vec::new();
        for run in 0..2 {
            let cfg = RunConfig {
                format_version: CONFIG_FORMAT_VERSION,
                input: InputConfig {
                    path: xes.clone(),
                    format: None,
                    mapping: None,
                },
                output: tmp.path().join(format!("{name}-{run}")),
                analysis: spec_for(method.clone(), features.clone(), 5),
                compare: Vec::new(),
            };
            run_detect(&cfg).map_err(|e| e.to_string())?;
            bundles.push(bundle_files(&cfg.output));
        }
        ensure(bundles[0] == bundles[1], || {
            format!("{name}: bundles differ")
        })?;
        files += bundles[0].len();
    }
    Ok(format!(
        "4 methods x 2 runs, {files} bundle files byte-identical (manifest timestamp excluded)"
    ))
}

fn run(name: &str, f: impl FnOnce() -> Result<Verdict, String>) -> bool {
    let start = Instant::now();
    let verdict = match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => v,
        Ok(Err(msg)) => Verdict::Fail(msg),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Verdict::Fail(format!("panicked: {}", msg.unwrap_or_default()))
        }
    };
    let took = start.elapsed();
    let (tag, detail, ok) = match verdict {
        Verdict::Pass(d) => ("PASS", d, true),
        Verdict::Fail(d) => ("FAIL", d, false),
        Verdict::Skip(d) => ("SKIP", d, true),
    };
    println!("{tag} {name} [{took:.2?}]: {detail}");
    ok
}

fn as_verdict(c: Check) -> Result<Verdict, String> {
    c.map(Verdict::Pass)
}

fn main() -> ExitCode {
    let results = [
        run("1 oracle equivalence", || as_verdict(criterion_1())),
        run("2 partition invariants", || as_verdict(criterion_2())),
        run("3 algorithm properties", || as_verdict(criterion_3())),
        run("4 context sensitivity", || as_verdict(criterion_4())),
        run("5 loan example structure", || as_verdict(criterion_5())),
        run("6 BPI Challenge 2017", criterion_6),
        run("7 determinism", || as_verdict(criterion_7())),
    ];
    if results.iter().all(|&ok| ok) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
