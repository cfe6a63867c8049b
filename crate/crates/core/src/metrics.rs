//! Per-trial error classification, distance-penalty scores and per-cell
//! aggregation.
//!
//! Error types:
//! - A: the tool reports the journey impassible although a barrier-free
//!   route exists.
//! - B: the tool's route is longer than the shortest barrier-free route.
//! - C: the tool's route contains at least one true barrier.

use thiserror::Error;

use crate::ablation::{select_masked, Selection};
use crate::bits::BitSet;
use crate::routes::IncidenceMatrix;
use crate::stochastic::EdgeSet;

pub const DEFAULT_PENALTY_M: f64 = 500.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("score undefined: needs a reported route on a ground-truth navigable journey")]
    UndefinedConditioning,
    #[error("cannot aggregate outcomes of different cells ({0} vs {1})")]
    MixedKeys(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    /// Some route in the list avoids every true barrier.
    pub gt_navigable: bool,
    pub reported_impassible: bool,
    pub dist_tool: Option<f64>,
    /// True barriers on the tool's route (0 when nothing is reported).
    pub nbarriers_tool: usize,
    /// Shortest truth-barrier-free route, when one exists.
    pub dist_perfect: Option<f64>,
    /// First route of the list, i.e. what a tool without barrier data picks.
    pub dist_oblivious: Option<f64>,
    pub nbarriers_oblivious: usize,
    pub error_a: bool,
    pub error_b: bool,
    pub error_c: bool,
}

/// Classify one trial given the truth as a column mask of `inc`, the tool's
/// selection, and the selection a perfect tool makes (`select_masked` on the
/// truth mask).
pub fn evaluate_masked(
    inc: &IncidenceMatrix,
    truth: &BitSet,
    selection: Selection,
    perfect: Selection,
) -> TrialOutcome {
    let barriers_on = |r: usize| truth.intersection_count_words(inc.row(r));
    let gt_navigable = perfect.route().is_some();
    let reported_impassible = selection.is_impassible();
    let dist_tool = selection.route().map(|r| inc.dist(r));
    let nbarriers_tool = selection.route().map_or(0, barriers_on);
    let dist_perfect = perfect.route().map(|r| inc.dist(r));
    let has_routes = inc.route_count() > 0;
    let dist_oblivious = has_routes.then(|| inc.dist(0));
    let nbarriers_oblivious = if has_routes { barriers_on(0) } else { 0 };

    let error_a = reported_impassible && gt_navigable;
    let error_b = match (dist_tool, dist_perfect) {
        (Some(t), Some(p)) => t > p,
        _ => false,
    };
    let error_c = !reported_impassible && nbarriers_tool >= 1;
    TrialOutcome {
        gt_navigable,
        reported_impassible,
        dist_tool,
        nbarriers_tool,
        dist_perfect,
        dist_oblivious,
        nbarriers_oblivious,
        error_a,
        error_b,
        error_c,
    }
}

/// Classify a trial from map-level edge sets. `selection` must come from
/// the tool's perceived set over the same incidence matrix.
pub fn evaluate_trial(inc: &IncidenceMatrix, truth: &EdgeSet, selection: Selection) -> TrialOutcome {
    let mask = inc.mask_of(truth);
    let perfect = select_masked(inc, &mask);
    evaluate_masked(inc, &mask, selection, perfect)
}

fn scored(outcome: &TrialOutcome) -> Result<(f64, f64), MetricsError> {
    match (outcome.dist_tool, outcome.dist_perfect) {
        (Some(tool), Some(perfect)) if !outcome.reported_impassible && outcome.gt_navigable => {
            Ok((tool, perfect))
        }
        _ => Err(MetricsError::UndefinedConditioning),
    }
}

/// `((dist_tool + penalty · nbarriers_tool) − dist_perfect) / dist_perfect`
pub fn score_vs_perfect(outcome: &TrialOutcome, penalty_m: f64) -> Result<f64, MetricsError> {
    let (tool, perfect) = scored(outcome)?;
    let effective = tool + penalty_m * outcome.nbarriers_tool as f64;
    Ok((effective - perfect) / perfect)
}

/// Penalised distance of the tool minus that of the oblivious choice,
/// relative to the perfect tool's distance. Negative beats oblivious.
pub fn score_vs_oblivious(outcome: &TrialOutcome, penalty_m: f64) -> Result<f64, MetricsError> {
    let (tool, best) = scored(outcome)?;
    let oblivious = outcome
        .dist_oblivious
        .expect("a navigable journey has at least one route");
    let tool_eff = tool + penalty_m * outcome.nbarriers_tool as f64;
    let oblivious_eff = oblivious + penalty_m * outcome.nbarriers_oblivious as f64;
    Ok((tool_eff - oblivious_eff) / best)
}

/// Detour the perfect tool needs relative to the barrier-free shortest
/// route: `(dist_perfect − dist_oblivious) / dist_oblivious`.
pub fn rel_dist_increase_perfect_tool(outcome: &TrialOutcome) -> Option<f64> {
    let perfect = outcome.dist_perfect?;
    let world = outcome.dist_oblivious?;
    Some((perfect - world) / world)
}

/// One `(journey, rate, tpr, tnr)` point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub journey_id: String,
    pub rate: f64,
    pub tpr: f64,
    pub tnr: f64,
}

impl std::fmt::Display for CellKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@rate={},tpr={},tnr={}", self.journey_id, self.rate, self.tpr, self.tnr)
    }
}

/// Incremental mean; a stream of identical values has exactly that mean.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct RunningMean {
    n: usize,
    mean: f64,
}

impl RunningMean {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.mean += (x - self.mean) / self.n as f64;
    }

    fn merge(&mut self, other: &RunningMean) {
        let n = self.n + other.n;
        if n > 0 {
            self.mean += (other.mean - self.mean) * (other.n as f64 / n as f64);
        }
        self.n = n;
    }

    fn get(&self) -> Option<f64> {
        (self.n > 0).then_some(self.mean)
    }
}

/// Running statistics for one cell. Counts merge associatively and
/// commutatively; means merge by weighted update in call order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAccumulator {
    pub key: CellKey,
    pub penalty_m: f64,
    trials: usize,
    n_gt_navigable: usize,
    n_reported: usize,
    n_scored: usize,
    n_reported_impassible: usize,
    n_falsely_navigable: usize,
    n_error_a: usize,
    n_error_b: usize,
    n_error_c: usize,
    sum_nbarriers_reported: usize,
    score_perfect: RunningMean,
    score_oblivious: RunningMean,
    rel_increase: RunningMean,
}

impl CellAccumulator {
    pub fn new(key: CellKey, penalty_m: f64) -> Self {
        Self {
            key,
            penalty_m,
            trials: 0,
            n_gt_navigable: 0,
            n_reported: 0,
            n_scored: 0,
            n_reported_impassible: 0,
            n_falsely_navigable: 0,
            n_error_a: 0,
            n_error_b: 0,
            n_error_c: 0,
            sum_nbarriers_reported: 0,
            score_perfect: RunningMean::default(),
            score_oblivious: RunningMean::default(),
            rel_increase: RunningMean::default(),
        }
    }

    pub fn push(&mut self, o: &TrialOutcome) {
        self.trials += 1;
        self.n_error_a += o.error_a as usize;
        self.n_error_b += o.error_b as usize;
        self.n_error_c += o.error_c as usize;
        if o.reported_impassible {
            self.n_reported_impassible += 1;
        } else {
            self.n_reported += 1;
            self.sum_nbarriers_reported += o.nbarriers_tool;
            if !o.gt_navigable {
                self.n_falsely_navigable += 1;
            }
        }
        if o.gt_navigable {
            self.n_gt_navigable += 1;
            if let Some(inc) = rel_dist_increase_perfect_tool(o) {
                self.rel_increase.push(inc);
            }
        }
        if let (Ok(p), Ok(b)) = (score_vs_perfect(o, self.penalty_m), score_vs_oblivious(o, self.penalty_m)) {
            self.n_scored += 1;
            self.score_perfect.push(p);
            self.score_oblivious.push(b);
        }
    }

    pub fn merge(&mut self, other: &CellAccumulator) -> Result<(), MetricsError> {
        if other.key != self.key || other.penalty_m != self.penalty_m {
            return Err(MetricsError::MixedKeys(self.key.to_string(), other.key.to_string()));
        }
        self.trials += other.trials;
        self.n_gt_navigable += other.n_gt_navigable;
        self.n_reported += other.n_reported;
        self.n_scored += other.n_scored;
        self.n_reported_impassible += other.n_reported_impassible;
        self.n_falsely_navigable += other.n_falsely_navigable;
        self.n_error_a += other.n_error_a;
        self.n_error_b += other.n_error_b;
        self.n_error_c += other.n_error_c;
        self.sum_nbarriers_reported += other.sum_nbarriers_reported;
        self.score_perfect.merge(&other.score_perfect);
        self.score_oblivious.merge(&other.score_oblivious);
        self.rel_increase.merge(&other.rel_increase);
        Ok(())
    }

    pub fn finish(&self) -> CellSummary {
        let ratio = |num: f64, den: usize| (den > 0).then(|| num / den as f64);
        let n_gt_impassible = self.trials - self.n_gt_navigable;
        CellSummary {
            key: self.key.clone(),
            penalty_m: self.penalty_m,
            trials: self.trials,
            n_gt_navigable: self.n_gt_navigable,
            n_gt_impassible,
            n_reported: self.n_reported,
            n_scored: self.n_scored,
            n_error_a: self.n_error_a,
            n_error_b: self.n_error_b,
            n_error_c: self.n_error_c,
            frac_gt_impassible: ratio(n_gt_impassible as f64, self.trials),
            frac_reported_impassible: ratio(self.n_reported_impassible as f64, self.trials),
            frac_error_a_given_gt_navigable: ratio(self.n_error_a as f64, self.n_gt_navigable),
            frac_falsely_navigable_given_gt_impassible: ratio(self.n_falsely_navigable as f64, n_gt_impassible),
            frac_error_c_given_reported: ratio(self.n_error_c as f64, self.n_reported),
            mean_nbarriers_given_reported: ratio(self.sum_nbarriers_reported as f64, self.n_reported),
            mean_score_vs_perfect: self.score_perfect.get(),
            mean_score_vs_oblivious: self.score_oblivious.get(),
            mean_rel_dist_increase_perfect_tool: self.rel_increase.get(),
        }
    }
}

/// Aggregated statistics of one cell. `None` marks a statistic whose
/// conditioning set is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub key: CellKey,
    pub penalty_m: f64,
    pub trials: usize,
    pub n_gt_navigable: usize,
    pub n_gt_impassible: usize,
    /// Trials where the tool reported a route.
    pub n_reported: usize,
    /// Trials entering both scores: reported and ground-truth navigable.
    pub n_scored: usize,
    pub n_error_a: usize,
    pub n_error_b: usize,
    pub n_error_c: usize,
    pub frac_gt_impassible: Option<f64>,
    pub frac_reported_impassible: Option<f64>,
    pub frac_error_a_given_gt_navigable: Option<f64>,
    pub frac_falsely_navigable_given_gt_impassible: Option<f64>,
    pub frac_error_c_given_reported: Option<f64>,
    pub mean_nbarriers_given_reported: Option<f64>,
    pub mean_score_vs_perfect: Option<f64>,
    pub mean_score_vs_oblivious: Option<f64>,
    pub mean_rel_dist_increase_perfect_tool: Option<f64>,
}

pub fn aggregate(key: CellKey, penalty_m: f64, outcomes: &[TrialOutcome]) -> CellSummary {
    let mut acc = CellAccumulator::new(key, penalty_m);
    outcomes.iter().for_each(|o| acc.push(o));
    acc.finish()
}

/// Aggregate outcomes that carry their own keys; all keys must match.
pub fn aggregate_keyed(penalty_m: f64, outcomes: &[(CellKey, TrialOutcome)]) -> Result<Option<CellSummary>, MetricsError> {
    let Some((first, _)) = outcomes.first() else {
        return Ok(None);
    };
    let mut acc = CellAccumulator::new(first.clone(), penalty_m);
    for (key, o) in outcomes {
        if key != first {
            return Err(MetricsError::MixedKeys(first.to_string(), key.to_string()));
        }
        acc.push(o);
    }
    Ok(Some(acc.finish()))
}
