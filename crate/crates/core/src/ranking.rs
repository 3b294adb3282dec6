//! Scoring and ordering of surprising sets.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{Side, SurprisingSet};
use crate::vicinity::VicinityCover;

#[derive(Debug, Error, PartialEq)]
pub enum RankingError {
    #[error("gamma must lie in (0, 1], got {0}")]
    InvalidGamma(f64),
    #[error("the surprising set covers its whole vicinity, so the remainder is empty")]
    EmptyRemainder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingConfig {
    pub gamma: f64,
    pub lower_is_better: bool,
    /// Min-max normalize targets over all situations before computing
    /// surprisingness. Effectiveness always uses raw units.
    pub normalize_target: bool,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            gamma: 0.5,
            lower_is_better: true,
            normalize_target: true,
        }
    }
}

impl RankingConfig {
    pub fn check(&self) -> Result<(), RankingError> {
        if self.gamma > 0.0 && self.gamma <= 1.0 {
            Ok(())
        } else {
            Err(RankingError::InvalidGamma(self.gamma))
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `gamma * |avg(u) - avg(rest)| + (1 - gamma) * #u / (#u + #rest)`, where
/// `rest` is the vicinity without `u`. An empty `u` scores 0.
pub fn surprisingness(u: &[f64], rest: &[f64], gamma: f64) -> Result<f64, RankingError> {
    if u.is_empty() {
        return Ok(0.0);
    }
    if rest.is_empty() {
        return Err(RankingError::EmptyRemainder);
    }
    let share = u.len() as f64 / (u.len() + rest.len()) as f64;
    Ok(gamma * (mean(u) - mean(rest)).abs() + (1.0 - gamma) * share)
}

/// Total deviation of `u` from the rest of its vicinity: the per-situation gap
/// times the size of the group that is worse off.
pub fn effectiveness(u: &[f64], rest: &[f64], lower_is_better: bool) -> Result<f64, RankingError> {
    if u.is_empty() {
        return Ok(0.0);
    }
    if rest.is_empty() {
        return Err(RankingError::EmptyRemainder);
    }
    let (avg_u, avg_rest) = (mean(u), mean(rest));
    let u_better = if lower_is_better {
        avg_u < avg_rest
    } else {
        avg_u > avg_rest
    };
    let u_worse = if lower_is_better {
        avg_u > avg_rest
    } else {
        avg_u < avg_rest
    };
    let gap = (avg_u - avg_rest).abs();
    Ok(if u_better {
        gap * rest.len() as f64
    } else if u_worse {
        gap * u.len() as f64
    } else {
        0.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedFinding {
    pub vicinity_id: usize,
    pub surprisingness: f64,
    pub effectiveness: f64,
    /// `None` when the set is empty.
    pub avg_u: Option<f64>,
    /// `None` when the set covers the whole vicinity.
    pub avg_rest: Option<f64>,
    pub size_u: usize,
    pub size_v: usize,
    pub high: usize,
    pub low: usize,
    /// Set equals its vicinity; both scores are 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    /// One finding per set, in vicinity order.
    pub findings: Vec<RankedFinding>,
    /// Vicinity ids, best first.
    pub by_surprisingness: Vec<usize>,
    pub by_effectiveness: Vec<usize>,
}

impl Ranking {
    pub fn finding(&self, vicinity_id: usize) -> Option<&RankedFinding> {
        self.findings.iter().find(|f| f.vicinity_id == vicinity_id)
    }
}

/// Min-max scaling to [0, 1]; a constant sample maps to 0.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    values
        .iter()
        .map(|v| if span > 0.0 { (v - min) / span } else { 0.0 })
        .collect()
}

fn split(set: &SurprisingSet, vicinity: &[usize], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut u = Vec::with_capacity(set.members.len());
    let mut rest = Vec::with_capacity(vicinity.len());
    let mut members = set.rows().peekable();
    for &row in vicinity {
        if members.peek() == Some(&row) {
            members.next();
            u.push(values[row]);
        } else {
            rest.push(values[row]);
        }
    }
    (u, rest)
}

fn score(
    set: &SurprisingSet,
    vicinity: &[usize],
    raw: &[f64],
    scaled: &[f64],
    cfg: &RankingConfig,
) -> RankedFinding {
    let (u_raw, rest_raw) = split(set, vicinity, raw);
    let degenerate = !u_raw.is_empty() && rest_raw.is_empty();
    let (surp, eff) = if degenerate {
        (0.0, 0.0)
    } else {
        let (u_s, rest_s) = split(set, vicinity, scaled);
        (
            surprisingness(&u_s, &rest_s, cfg.gamma).expect("remainder is non-empty"),
            effectiveness(&u_raw, &rest_raw, cfg.lower_is_better).expect("remainder is non-empty"),
        )
    };
    RankedFinding {
        vicinity_id: set.vicinity_id,
        surprisingness: surp,
        effectiveness: eff,
        avg_u: (!u_raw.is_empty()).then(|| mean(&u_raw)),
        avg_rest: (!rest_raw.is_empty()).then(|| mean(&rest_raw)),
        size_u: u_raw.len(),
        size_v: vicinity.len(),
        high: set.count(Side::High),
        low: set.count(Side::Low),
        degenerate,
    }
}

fn order_by(findings: &[RankedFinding], key: impl Fn(&RankedFinding) -> f64) -> Vec<usize> {
    let mut order: Vec<&RankedFinding> = findings.iter().collect();
    order.sort_by(|a, b| match key(b).total_cmp(&key(a)) {
        Ordering::Equal => a.vicinity_id.cmp(&b.vicinity_id),
        other => other,
    });
    order.into_iter().map(|f| f.vicinity_id).collect()
}

/// Scores every set against its vicinity in `cover`. `targets` are the raw
/// target values of all situations, indexed by row.
pub fn rank_findings(
    sets: &[SurprisingSet],
    cover: &VicinityCover,
    targets: &[f64],
    cfg: &RankingConfig,
) -> Result<Ranking, RankingError> {
    cfg.check()?;
    let scaled = if cfg.normalize_target {
        min_max_normalize(targets)
    } else {
        targets.to_vec()
    };
    let findings: Vec<RankedFinding> = sets
        .par_iter()
        .map(|set| {
            score(
                set,
                &cover.vicinities[set.vicinity_id],
                targets,
                &scaled,
                cfg,
            )
        })
        .collect();
    for f in findings.iter().filter(|f| f.degenerate) {
        log::warn!(
            "vicinity {}: every situation was flagged, scoring it 0",
            f.vicinity_id
        );
    }
    Ok(Ranking {
        by_surprisingness: order_by(&findings, |f| f.surprisingness),
        by_effectiveness: order_by(&findings, |f| f.effectiveness),
        findings,
    })
}
