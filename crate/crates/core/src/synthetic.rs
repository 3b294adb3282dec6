//! Synthetic event logs with planted context-local anomalies.

use std::collections::BTreeMap;

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{detect_vicinity, DetectorConfig};
use crate::event_log::{
    AttrDecl, AttrLevel, AttributeMap, AttributeValue, Case, Event, EventLog, Timestamp, ValueKind,
};

pub const CONTEXT_ATTRIBUTE: &str = "context";

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "no anomaly magnitude up to {max_sigma} sd puts every anomaly above its context fence \
         with at least {min_share} of them inside the global fences"
    )]
    Infeasible { max_sigma: f64, min_share: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSpec {
    pub name: String,
    pub mean_days: f64,
    pub sd_days: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl ContextSpec {
    /// A context whose standard deviation is 15% of its mean.
    pub fn with_mean(name: &str, mean_days: f64) -> Self {
        ContextSpec {
            name: name.into(),
            mean_days,
            sd_days: 0.15 * mean_days,
            weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub contexts: Vec<ContextSpec>,
    pub n_cases: usize,
    /// Share of cases that receive an anomalous throughput.
    pub anomaly_rate: f64,
    /// Smallest anomaly offset tried, in context standard deviations.
    pub anomaly_sigma: f64,
    /// Largest offset tried before giving up.
    pub max_sigma: f64,
    pub sigma_step: f64,
    /// Required share of anomalies lying inside the global boxplot fences.
    pub min_inside_global: f64,
    pub whisker: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            contexts: vec![
                ContextSpec::with_mean("standard", 13.0),
                ContextSpec::with_mean("extended", 22.0),
                ContextSpec::with_mean("complex", 40.0),
            ],
            n_cases: 1000,
            anomaly_rate: 0.05,
            anomaly_sigma: 4.0,
            max_sigma: 12.0,
            sigma_step: 0.25,
            min_inside_global: 0.4,
            whisker: 1.5,
        }
    }
}

impl GeneratorSpec {
    pub fn check(&self) -> Result<(), GeneratorError> {
        let bad = |m: String| Err(GeneratorError::InvalidParameter(m));
        if self.contexts.is_empty() {
            return bad("at least one context is required".into());
        }
        for c in &self.contexts {
            if !(c.mean_days > 0.0 && c.mean_days.is_finite()) {
                return bad(format!("context {:?}: mean must be positive", c.name));
            }
            if !(c.sd_days >= 0.0 && c.sd_days.is_finite()) {
                return bad(format!("context {:?}: sd must be non-negative", c.name));
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return bad(format!("context {:?}: weight must be positive", c.name));
            }
        }
        if self.n_cases == 0 {
            return bad("n_cases must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.anomaly_rate) {
            return bad("anomaly_rate must lie in [0, 1]".into());
        }
        if !(self.anomaly_sigma > 0.0
            && self.sigma_step > 0.0
            && self.max_sigma >= self.anomaly_sigma)
        {
            return bad("need 0 < anomaly_sigma <= max_sigma and a positive sigma_step".into());
        }
        if !(0.0..=1.0).contains(&self.min_inside_global) {
            return bad("min_inside_global must lie in [0, 1]".into());
        }
        if self.whisker.is_nan() || self.whisker <= 0.0 {
            return bad("whisker must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantedAnomaly {
    pub case_id: String,
    pub context: String,
    pub throughput_days: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    /// Offset used for the anomalies, in context standard deviations.
    pub magnitude_sigma: f64,
    pub anomalies: Vec<PlantedAnomaly>,
    pub case_context: BTreeMap<String, String>,
    pub inside_global_fences: usize,
}

fn epoch() -> Timestamp {
    Utc.with_ymd_and_hms(2023, 1, 2, 8, 0, 0)
        .single()
        .expect("valid date")
}

fn millis(days: f64) -> Duration {
    Duration::milliseconds((days * 86_400_000.0).round() as i64)
}

fn make_case(
    case_id: String,
    start: Timestamp,
    steps: &[(&str, f64)],
    attrs: AttributeMap,
) -> Case {
    let events = steps
        .iter()
        .map(|&(activity, offset_days)| Event {
            case_id: case_id.clone(),
            activity: activity.into(),
            timestamp: start + millis(offset_days),
            attrs: AttributeMap::new(),
        })
        .collect();
    Case {
        case_id,
        events,
        case_attrs: attrs,
    }
}

struct Draft {
    context: usize,
    base: f64,
    anomaly_jitter: Option<f64>,
    amount: f64,
    start_hours: i64,
}

fn draft_cases(spec: &GeneratorSpec, rng: &mut ChaCha8Rng) -> Vec<Draft> {
    let total: f64 = spec.contexts.iter().map(|c| c.weight).sum();
    let n = spec.n_cases;
    let n_anomalies = (spec.anomaly_rate * n as f64).round() as usize;
    let mut anomalous = vec![false; n];
    anomalous[..n_anomalies].fill(true);
    anomalous.shuffle(rng);

    anomalous
        .into_iter()
        .map(|is_anomaly| {
            let mut pick = rng.random::<f64>() * total;
            let mut context = spec.contexts.len() - 1;
            for (i, c) in spec.contexts.iter().enumerate() {
                if pick < c.weight {
                    context = i;
                    break;
                }
                pick -= c.weight;
            }
            let c = &spec.contexts[context];
            let normal = Normal::new(c.mean_days, c.sd_days).expect("validated parameters");
            let base = loop {
                let d = normal.sample(rng);
                if d > 0.05 * c.mean_days {
                    break d;
                }
            };
            Draft {
                context,
                base,
                anomaly_jitter: is_anomaly.then(|| rng.random::<f64>() * 0.5),
                amount: (rng.random::<f64>() * 49_000.0 + 1_000.0).round(),
                start_hours: rng.random_range(0..24 * 365),
            }
        })
        .collect()
}

fn duration_of(d: &Draft, spec: &GeneratorSpec, sigma: f64) -> f64 {
    let c = &spec.contexts[d.context];
    match d.anomaly_jitter {
        Some(j) => c.mean_days + (sigma + j) * c.sd_days,
        None => d.base,
    }
}

fn build_log(spec: &GeneratorSpec, drafts: &[Draft], durations: &[f64]) -> EventLog {
    let width = drafts.len().to_string().len();
    let cases = drafts
        .iter()
        .zip(durations)
        .enumerate()
        .map(|(i, (d, &days))| {
            let mut attrs = AttributeMap::new();
            attrs.insert(
                CONTEXT_ATTRIBUTE.into(),
                AttributeValue::Text(spec.contexts[d.context].name.clone()),
            );
            attrs.insert("amount".into(), AttributeValue::Real(d.amount));
            let start = epoch() + Duration::hours(d.start_hours);
            let steps = [
                ("Submit application", 0.0),
                ("Assess application", 0.3 * days),
                ("Close case", days),
            ];
            make_case(format!("case-{i:0width$}"), start, &steps, attrs)
        })
        .collect();
    EventLog {
        cases,
        attr_schema: [
            (
                CONTEXT_ATTRIBUTE.to_string(),
                AttrDecl {
                    kind: ValueKind::Text,
                    level: AttrLevel::Case,
                },
            ),
            (
                "amount".to_string(),
                AttrDecl {
                    kind: ValueKind::Real,
                    level: AttrLevel::Case,
                },
            ),
        ]
        .into(),
    }
}

/// Checks the planted anomalies against the boxplot fences, using the
/// throughput values as stored in `log`. Returns the number of anomalies
/// inside the global fences, or `None` if some anomaly is not above its
/// context's upper fence.
fn fence_check(log: &EventLog, drafts: &[Draft], n_contexts: usize, whisker: f64) -> Option<usize> {
    let values: Vec<f64> = log.cases.iter().map(Case::throughput_days).collect();
    let cfg = DetectorConfig::boxplot(whisker, crate::detection::Direction::Both);
    let all: Vec<usize> = (0..values.len()).collect();
    let global = detect_vicinity(0, &all, &values, &cfg).fences;
    let mut inside = 0;
    for ctx in 0..n_contexts {
        let rows: Vec<usize> = (0..drafts.len())
            .filter(|&r| drafts[r].context == ctx)
            .collect();
        if rows.is_empty() {
            continue;
        }
        let upper = detect_vicinity(ctx, &rows, &values, &cfg)
            .fences
            .upper
            .expect("boxplot fence");
        for &r in rows.iter().filter(|&&r| drafts[r].anomaly_jitter.is_some()) {
            if values[r] <= upper {
                return None;
            }
            if global.lower.is_some_and(|l| values[r] >= l)
                && global.upper.is_some_and(|u| values[r] <= u)
            {
                inside += 1;
            }
        }
    }
    Some(inside)
}

/// Generates a log whose cases carry a categorical context attribute and a
/// context-dependent throughput time. A share of the cases get a throughput far
/// above their own context while staying unremarkable log-wide.
///
/// The anomaly offset starts at `anomaly_sigma` and grows by `sigma_step` until
/// every anomaly clears its context's upper fence and at least
/// `min_inside_global` of them lie inside the global fences.
pub fn generate_synthetic_log(
    spec: &GeneratorSpec,
    seed: u64,
) -> Result<(EventLog, GroundTruth), GeneratorError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drafts = draft_cases(spec, &mut rng);
    let n_anomalies = drafts.iter().filter(|d| d.anomaly_jitter.is_some()).count();

    let mut sigma = spec.anomaly_sigma;
    while sigma <= spec.max_sigma + 1e-9 {
        let durations: Vec<f64> = drafts.iter().map(|d| duration_of(d, spec, sigma)).collect();
        let log = build_log(spec, &drafts, &durations);
        if let Some(inside) = fence_check(&log, &drafts, spec.contexts.len(), spec.whisker) {
            let enough = inside as f64 >= spec.min_inside_global * n_anomalies as f64;
            if enough {
                let truth = ground_truth(spec, &drafts, &log, sigma, inside);
                return Ok((log, truth));
            }
            // larger offsets only push anomalies further out of the global fences
            break;
        }
        sigma += spec.sigma_step;
    }
    Err(GeneratorError::Infeasible {
        max_sigma: spec.max_sigma,
        min_share: spec.min_inside_global,
    })
}

fn ground_truth(
    spec: &GeneratorSpec,
    drafts: &[Draft],
    log: &EventLog,
    sigma: f64,
    inside: usize,
) -> GroundTruth {
    let mut anomalies = Vec::new();
    let mut case_context = BTreeMap::new();
    for (d, case) in drafts.iter().zip(&log.cases) {
        let context = spec.contexts[d.context].name.clone();
        if d.anomaly_jitter.is_some() {
            anomalies.push(PlantedAnomaly {
                case_id: case.case_id.clone(),
                context: context.clone(),
                throughput_days: case.throughput_days(),
            });
        }
        case_context.insert(case.case_id.clone(), context);
    }
    GroundTruth {
        magnitude_sigma: sigma,
        anomalies,
        case_context,
        inside_global_fences: inside,
    }
}

/// Activity sequences of the small loan example: three families whose members
/// are within edit distance 1 of each other and at least 2 from other families.
const LOAN_FAMILIES: [&[&[&str]]; 3] = [
    &[
        &[
            "Register",
            "Check credit",
            "Assess risk",
            "Approve",
            "Pay out",
        ],
        &[
            "Register",
            "Check credit",
            "Assess risk (manual)",
            "Approve",
            "Pay out",
        ],
        &[
            "Register",
            "Check credit",
            "Assess risk (external)",
            "Approve",
            "Pay out",
        ],
    ],
    &[
        &["Register", "Request documents", "Check documents", "Reject"],
        &[
            "Register",
            "Request documents",
            "Check documents",
            "Withdraw",
        ],
    ],
    &[
        &[
            "Register",
            "Escalate",
            "Committee review",
            "Negotiate terms",
            "Sign contract",
            "Archive",
        ],
        &[
            "Register",
            "Escalate",
            "Committee review",
            "Renegotiate terms",
            "Sign contract",
            "Archive",
        ],
    ],
];

/// Throughput days per family; each family hides one or two outliers that
/// the log-wide boxplot does not flag.
const LOAN_DURATIONS: [&[f64]; 3] = [
    &[10.0, 10.5, 11.0, 11.5, 12.0, 12.5, 30.0],
    &[2.0, 20.0, 21.0, 22.0, 23.0, 24.0, 25.0],
    &[1.0, 30.0, 31.0, 32.0, 33.0, 45.0],
];

/// A 20-case loan log in three activity-sequence families. Returns the log and
/// the family of each case.
pub fn generate_loan_log() -> (EventLog, Vec<usize>) {
    let mut cases = Vec::new();
    let mut family_of = Vec::new();
    for (family, (variants, durations)) in LOAN_FAMILIES.iter().zip(LOAN_DURATIONS).enumerate() {
        for (i, &days) in durations.iter().enumerate() {
            let sequence = variants[i % variants.len()];
            let last = (sequence.len() - 1) as f64;
            let steps: Vec<(&str, f64)> = sequence
                .iter()
                .enumerate()
                .map(|(k, &a)| (a, days * k as f64 / last))
                .collect();
            let id = format!("loan-{:02}", cases.len() + 1);
            let start = epoch() + Duration::days(3 * cases.len() as i64);
            cases.push(make_case(id, start, &steps, AttributeMap::new()));
            family_of.push(family);
        }
    }
    (
        EventLog {
            cases,
            attr_schema: Default::default(),
        },
        family_of,
    )
}
