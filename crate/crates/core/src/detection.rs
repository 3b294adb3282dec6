//! Detectors: per-vicinity selection of surprising situations.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vicinity::VicinityCover;

/// Vicinities smaller than this are never flagged by the boxplot detector.
pub const MIN_BOXPLOT_SIZE: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum DetectionError {
    #[error("quantile of an empty sample")]
    EmptySample,
    #[error("quantile level {0} outside [0, 1]")]
    InvalidLevel(f64),
    #[error("whisker must be positive, got {0}")]
    InvalidWhisker(f64),
    #[error("result sets disagree on the row universe ({0} vs {1})")]
    UniverseMismatch(usize, usize),
    #[error("method {method:?} flags row {row} outside its universe of {universe}")]
    OutOfUniverse {
        method: String,
        row: usize,
        universe: usize,
    },
    #[error("at least two result sets are needed for a comparison")]
    TooFewMethods,
}

/// Linear interpolation between order statistics at rank `(n - 1) * p`.
pub fn quantile(values: &[f64], p: f64) -> Result<f64, DetectionError> {
    if values.is_empty() {
        return Err(DetectionError::EmptySample);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(DetectionError::InvalidLevel(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, p))
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let rank = (sorted.len() - 1) as f64 * p;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    #[default]
    Both,
    HighOnly,
    LowOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DetectorKind {
    Boxplot { whisker: f64 },
    FixedThreshold { value: f64, side: Side },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    #[serde(default)]
    pub direction: Direction,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            kind: DetectorKind::Boxplot { whisker: 1.5 },
            direction: Direction::Both,
        }
    }
}

impl DetectorConfig {
    pub fn boxplot(whisker: f64, direction: Direction) -> Self {
        DetectorConfig {
            kind: DetectorKind::Boxplot { whisker },
            direction,
        }
    }

    pub fn check(&self) -> Result<(), DetectionError> {
        match self.kind {
            DetectorKind::Boxplot { whisker } if !(whisker > 0.0 && whisker.is_finite()) => {
                Err(DetectionError::InvalidWhisker(whisker))
            }
            _ => Ok(()),
        }
    }

    fn allows(&self, side: Side) -> bool {
        matches!(
            (self.direction, side),
            (Direction::Both, _)
                | (Direction::HighOnly, Side::High)
                | (Direction::LowOnly, Side::Low)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Member {
    pub row: usize,
    pub side: Side,
}

/// Values strictly below `lower` or strictly above `upper` are outliers; an
/// absent fence never fires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fences {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VicinityStats {
    pub size: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub too_small: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurprisingSet {
    pub vicinity_id: usize,
    /// Members in ascending row order.
    pub members: Vec<Member>,
    pub fences: Fences,
    pub stats: VicinityStats,
}

impl SurprisingSet {
    pub fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().map(|m| m.row)
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn count(&self, side: Side) -> usize {
        self.members.iter().filter(|m| m.side == side).count()
    }
}

fn stats_of(values: &[f64]) -> VicinityStats {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    VicinityStats {
        size: sorted.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        too_small: false,
    }
}

/// Applies the detector to one vicinity. `rows` are table row indices and
/// `targets` is indexed by row.
///
/// # Panics
/// If `rows` is empty.
pub fn detect_vicinity(
    vicinity_id: usize,
    rows: &[usize],
    targets: &[f64],
    cfg: &DetectorConfig,
) -> SurprisingSet {
    assert!(!rows.is_empty(), "vicinity {vicinity_id} is empty");
    let values: Vec<f64> = rows.iter().map(|&r| targets[r]).collect();
    let mut stats = stats_of(&values);
    let (fences, active) = match cfg.kind {
        DetectorKind::Boxplot { whisker } => {
            let iqr = stats.q3 - stats.q1;
            let fences = Fences {
                lower: Some(stats.q1 - whisker * iqr),
                upper: Some(stats.q3 + whisker * iqr),
            };
            stats.too_small = rows.len() < MIN_BOXPLOT_SIZE;
            (fences, !stats.too_small)
        }
        DetectorKind::FixedThreshold {
            value,
            side: Side::High,
        } => (
            Fences {
                lower: None,
                upper: Some(value),
            },
            true,
        ),
        DetectorKind::FixedThreshold {
            value,
            side: Side::Low,
        } => (
            Fences {
                lower: Some(value),
                upper: None,
            },
            true,
        ),
    };
    let mut members = Vec::new();
    if active {
        let mut ordered: Vec<usize> = rows.to_vec();
        ordered.sort_unstable();
        for r in ordered {
            let v = targets[r];
            let side = if fences.upper.is_some_and(|u| v > u) {
                Side::High
            } else if fences.lower.is_some_and(|l| v < l) {
                Side::Low
            } else {
                continue;
            };
            if cfg.allows(side) {
                members.push(Member { row: r, side });
            }
        }
    }
    SurprisingSet {
        vicinity_id,
        members,
        fences,
        stats,
    }
}

/// Boxplot (or threshold) detection over a whole sample of target values,
/// treated as a single vicinity.
pub fn boxplot_detect(targets: &[f64], cfg: &DetectorConfig) -> SurprisingSet {
    let rows: Vec<usize> = (0..targets.len()).collect();
    detect_vicinity(0, &rows, targets, cfg)
}

/// Runs the detector on every vicinity; output is ordered by vicinity id.
pub fn detect_all(
    cover: &VicinityCover,
    targets: &[f64],
    cfg: &DetectorConfig,
) -> Vec<SurprisingSet> {
    let sets: Vec<SurprisingSet> = cover
        .vicinities
        .par_iter()
        .enumerate()
        .map(|(id, rows)| detect_vicinity(id, rows, targets, cfg))
        .collect();
    for set in &sets {
        let vicinity = &cover.vicinities[set.vicinity_id];
        assert!(
            set.rows().all(|r| vicinity.binary_search(&r).is_ok()),
            "detector returned rows outside vicinity {}",
            set.vicinity_id
        );
    }
    sets
}

/// The context-free baseline: one detector pass over all rows.
pub fn global_baseline(targets: &[f64], cfg: &DetectorConfig) -> SurprisingSet {
    boxplot_detect(targets, cfg)
}

/// Flagged rows of one method over a universe of `universe` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub name: String,
    pub universe: usize,
    pub members: BTreeSet<usize>,
}

impl MethodResult {
    pub fn from_sets(name: &str, universe: usize, sets: &[SurprisingSet]) -> Self {
        MethodResult {
            name: name.into(),
            universe,
            members: sets.iter().flat_map(SurprisingSet::rows).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairAgreement {
    pub a: String,
    pub b: String,
    pub intersection: usize,
}

/// Venn-diagram data for a set of methods.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub methods: Vec<String>,
    pub universe: usize,
    pub counts: BTreeMap<String, usize>,
    /// Rows flagged by this method only.
    pub exclusive: BTreeMap<String, usize>,
    pub pairwise: Vec<PairAgreement>,
    /// Rows flagged by every method.
    pub all_agree: usize,
    pub union: usize,
    /// Bit `i` set when `methods[i]` flags the row; only rows flagged at least once.
    pub membership: BTreeMap<usize, u64>,
    /// Region mask (as above) to row count.
    pub regions: BTreeMap<u64, usize>,
}

pub fn compare_methods(results: &[MethodResult]) -> Result<AgreementReport, DetectionError> {
    if results.len() < 2 {
        return Err(DetectionError::TooFewMethods);
    }
    assert!(results.len() <= 64, "at most 64 methods can be compared");
    let universe = results[0].universe;
    for r in results {
        if r.universe != universe {
            return Err(DetectionError::UniverseMismatch(universe, r.universe));
        }
        if let Some(&row) = r.members.iter().find(|&&row| row >= universe) {
            return Err(DetectionError::OutOfUniverse {
                method: r.name.clone(),
                row,
                universe,
            });
        }
    }

    let mut membership: BTreeMap<usize, u64> = BTreeMap::new();
    for (i, r) in results.iter().enumerate() {
        for &row in &r.members {
            *membership.entry(row).or_insert(0) |= 1 << i;
        }
    }
    let mut regions = BTreeMap::new();
    for &mask in membership.values() {
        *regions.entry(mask).or_insert(0) += 1;
    }
    let full = if results.len() == 64 {
        u64::MAX
    } else {
        (1u64 << results.len()) - 1
    };
    let mut pairwise = Vec::new();
    for i in 0..results.len() {
        for j in (i + 1)..results.len() {
            pairwise.push(PairAgreement {
                a: results[i].name.clone(),
                b: results[j].name.clone(),
                intersection: results[i].members.intersection(&results[j].members).count(),
            });
        }
    }
    Ok(AgreementReport {
        methods: results.iter().map(|r| r.name.clone()).collect(),
        universe,
        counts: results
            .iter()
            .map(|r| (r.name.clone(), r.members.len()))
            .collect(),
        exclusive: results
            .iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    r.name.clone(),
                    regions.get(&(1u64 << i)).copied().unwrap_or(0),
                )
            })
            .collect(),
        pairwise,
        all_agree: regions.get(&full).copied().unwrap_or(0),
        union: membership.len(),
        membership,
        regions,
    })
}
