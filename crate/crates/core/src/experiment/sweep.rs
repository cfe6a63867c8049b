//! Sweep execution: cell scheduling, seeding, CSV and manifest output.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::config::{ConfigError, SweepConfig};
use crate::ablation::batch_select_masked;
use crate::bits::BitSet;
use crate::map::{load_journeys, sample_journeys, Journey, Map, MapError};
use crate::metrics::{evaluate_masked, CellAccumulator, CellKey, CellSummary};
use crate::routes::{build_incidence, enumerate_routes, read_route_lists, IncidenceMatrix, RouteError, RouteList};
use crate::stochastic::{derive_stream, BarrierModel, PerceptionModel, Purpose, StreamKey, ToolProfile};

pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 15] = [
    "journey_id",
    "rate",
    "tpr",
    "tnr",
    "trials",
    "n_gt_navigable",
    "frac_gt_impassible",
    "frac_reported_impassible",
    "frac_error_a_given_gt_navigable",
    "frac_falsely_navigable_given_gt_impassible",
    "frac_error_c_given_reported",
    "mean_nbarriers_given_reported",
    "mean_score_vs_perfect",
    "mean_score_vs_oblivious",
    "mean_rel_dist_increase_perfect_tool",
];

const BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Map { path: PathBuf, source: MapError },
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error("route lists have no entry for journey {0}")]
    MissingRouteList(String),
    #[error("route list {journey_id} was built with cap {found} m, config has {expected} m")]
    CapMismatch {
        journey_id: String,
        found: f64,
        expected: f64,
    },
    #[error("no journeys to simulate")]
    NoJourneys,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn read(path: &Path) -> Result<String, SweepError> {
    std::fs::read_to_string(path).map_err(|source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Grid values and trial settings of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    pub rates: Vec<f64>,
    pub tprs: Vec<f64>,
    pub tnrs: Vec<f64>,
    pub trials_per_cell: usize,
    pub master_seed: u64,
    pub penalty_m: f64,
    pub shared_truth: bool,
}

impl SweepParams {
    pub fn from_config(config: &SweepConfig) -> Self {
        Self {
            rates: config.rate_grid.values(),
            tprs: config.tpr_grid.values(),
            tnrs: config.tnr_grid.values(),
            trials_per_cell: config.trials_per_cell,
            master_seed: config.master_seed,
            penalty_m: config.penalty_m,
            shared_truth: config.shared_truth,
        }
    }

    pub fn cells_per_journey(&self) -> usize {
        self.rates.len() * self.tprs.len() * self.tnrs.len()
    }
}

/// Everything needed to run cells: the map, journeys and their incidence
/// matrices. Immutable once built and shared by all workers.
#[derive(Debug)]
pub struct SweepPlan {
    pub map: Map,
    pub journeys: Vec<Journey>,
    pub incidences: Vec<IncidenceMatrix>,
    pub params: SweepParams,
    pub warnings: Vec<String>,
}

impl SweepPlan {
    /// `route_lists[i]` must belong to `journeys[i]`.
    pub fn new(
        map: Map,
        journeys: Vec<Journey>,
        route_lists: &[RouteList],
        params: SweepParams,
    ) -> Result<Self, SweepError> {
        assert_eq!(journeys.len(), route_lists.len(), "one route list per journey");
        let mut warnings = Vec::new();
        let mut incidences = Vec::with_capacity(route_lists.len());
        for (journey, list) in journeys.iter().zip(route_lists) {
            if list.is_empty() {
                warnings.push(format!(
                    "journey {} has no route within {} m; all its cells are impassible",
                    journey.id, list.cap_m
                ));
            }
            incidences.push(build_incidence(list, &map)?);
        }
        Ok(Self {
            map,
            journeys,
            incidences,
            params,
            warnings,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.journeys.len() * self.params.cells_per_journey()
    }

    pub fn trial_count(&self) -> u64 {
        self.cell_count() as u64 * self.params.trials_per_cell as u64
    }

    /// Grid indices `(journey, rate, tpr, tnr)` of flat cell `i`; tnr varies
    /// fastest.
    pub fn cell_indices(&self, i: usize) -> (usize, usize, usize, usize) {
        let p = &self.params;
        let tnr = i % p.tnrs.len();
        let rest = i / p.tnrs.len();
        let tpr = rest % p.tprs.len();
        let rest = rest / p.tprs.len();
        (rest / p.rates.len(), rest % p.rates.len(), tpr, tnr)
    }

    pub fn run_cell(&self, journey: usize, rate: usize, tpr: usize, tnr: usize) -> CellSummary {
        let p = &self.params;
        let inc = &self.incidences[journey];
        let columns = inc.columns().to_vec();
        let barriers = BarrierModel::over_edges(&self.map, p.rates[rate], columns.clone());
        let profile = ToolProfile {
            tpr: p.tprs[tpr],
            tnr: p.tnrs[tnr],
        };
        let tool = PerceptionModel::over_edges(&self.map, profile, columns);
        let key = CellKey {
            journey_id: self.journeys[journey].id.clone(),
            rate: p.rates[rate],
            tpr: profile.tpr,
            tnr: profile.tnr,
        };
        let mut acc = CellAccumulator::new(key, p.penalty_m);

        let width = inc.column_count();
        let mut truths = vec![BitSet::new(width); BATCH];
        let mut seen = vec![BitSet::new(width); BATCH];
        let (gt_tpr, gt_tnr) = if p.shared_truth { (0, 0) } else { (tpr, tnr) };
        let mut start = 0;
        while start < p.trials_per_cell {
            let n = BATCH.min(p.trials_per_cell - start);
            for k in 0..n {
                let trial = start + k;
                let gt = derive_stream(
                    p.master_seed,
                    &StreamKey::new(Purpose::GroundTruth, journey, rate, gt_tpr, gt_tnr, trial),
                );
                barriers.sample_into(&gt, &mut truths[k]);
                let perception = derive_stream(
                    p.master_seed,
                    &StreamKey::new(Purpose::Perception, journey, rate, tpr, tnr, trial),
                );
                tool.apply_into(&truths[k], &perception, &mut seen[k]);
            }
            let chosen = batch_select_masked(inc, &seen[..n]);
            let perfect = batch_select_masked(inc, &truths[..n]);
            for k in 0..n {
                acc.push(&evaluate_masked(inc, &truths[k], chosen[k], perfect[k]));
            }
            start += n;
        }
        acc.finish()
    }

    /// All cells in `(journey, rate, tpr, tnr)` order. The result does not
    /// depend on `workers`.
    pub fn run(&self, workers: usize) -> Result<Vec<CellSummary>, SweepError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
        Ok(pool.install(|| {
            (0..self.cell_count())
                .into_par_iter()
                .map(|i| {
                    let (j, r, t, n) = self.cell_indices(i);
                    self.run_cell(j, r, t, n)
                })
                .collect()
        }))
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Write the summary CSV (header plus one row per cell).
pub fn write_csv<W: Write>(summaries: &[CellSummary], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for s in summaries {
        w.write_record([
            s.key.journey_id.clone(),
            s.key.rate.to_string(),
            s.key.tpr.to_string(),
            s.key.tnr.to_string(),
            s.trials.to_string(),
            s.n_gt_navigable.to_string(),
            fmt_opt(s.frac_gt_impassible),
            fmt_opt(s.frac_reported_impassible),
            fmt_opt(s.frac_error_a_given_gt_navigable),
            fmt_opt(s.frac_falsely_navigable_given_gt_impassible),
            fmt_opt(s.frac_error_c_given_reported),
            fmt_opt(s.mean_nbarriers_given_reported),
            fmt_opt(s.mean_score_vs_perfect),
            fmt_opt(s.mean_score_vs_oblivious),
            fmt_opt(s.mean_rel_dist_increase_perfect_tool),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub version: u32,
    pub columns: Vec<String>,
}

/// JSON sidecar written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub version: String,
    pub penalty_m: f64,
    pub cap_m: f64,
    pub journeys: usize,
    pub cells: usize,
    pub trials: u64,
    pub csv_schema: CsvSchema,
    pub warnings: Vec<String>,
}

/// SHA-256 of the config's canonical JSON, leaving out settings that cannot
/// change results (`worker_count`, `output_path`).
pub fn config_hash(config: &SweepConfig) -> String {
    let mut value = serde_json::to_value(config).expect("config serializes");
    if let Some(obj) = value.as_object_mut() {
        obj.remove("worker_count");
        obj.remove("output_path");
    }
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

/// Load the map and journeys named by `config` and obtain one route list
/// per journey, enumerating in parallel when no pre-built file is given.
pub fn prepare(config: &SweepConfig, workers: usize) -> Result<SweepPlan, SweepError> {
    let map = Map::from_json(&read(&config.map_path)?).map_err(|source| SweepError::Map {
        path: config.map_path.clone(),
        source,
    })?;
    let journeys = match (&config.journeys_path, &config.sampling) {
        (Some(path), _) => load_journeys(&map, &read(path)?).map_err(|source| SweepError::Map {
            path: path.clone(),
            source,
        })?,
        (None, Some(s)) => sample_journeys(&map, &s.spec(), s.seed.unwrap_or(config.master_seed))
            .map_err(|source| SweepError::Map {
                path: config.map_path.clone(),
                source,
            })?,
        (None, None) => return Err(SweepError::NoJourneys),
    };
    if journeys.is_empty() {
        return Err(SweepError::NoJourneys);
    }

    let lists = match &config.route_lists_path {
        Some(path) => {
            let mut all = read_route_lists(&read(path)?)?;
            journeys
                .iter()
                .map(|j| {
                    let pos = all
                        .iter()
                        .position(|l| l.journey_id == j.id)
                        .ok_or_else(|| SweepError::MissingRouteList(j.id.clone()))?;
                    let list = all.swap_remove(pos);
                    if list.cap_m != config.cap_m {
                        return Err(SweepError::CapMismatch {
                            journey_id: j.id.clone(),
                            found: list.cap_m,
                            expected: config.cap_m,
                        });
                    }
                    list.validate(&map, j)?;
                    Ok(list)
                })
                .collect::<Result<Vec<_>, SweepError>>()?
        }
        None => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
            pool.install(|| {
                journeys
                    .par_iter()
                    .map(|j| enumerate_routes(&map, j, config.cap_m))
                    .collect::<Result<Vec<_>, _>>()
            })?
        }
    };
    SweepPlan::new(map, journeys, &lists, SweepParams::from_config(config))
}

/// Run a whole sweep and write the CSV plus manifest.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport, SweepError> {
    let workers = config.effective_workers();
    let plan = prepare(config, workers)?;
    let summaries = plan.run(workers)?;

    let csv_path = config.output_path.clone();
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SweepError::Io { path, source }
    };
    let file = std::fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    write_csv(&summaries, std::io::BufWriter::new(file))?;

    let manifest = Manifest {
        config_hash: config_hash(config),
        master_seed: config.master_seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        penalty_m: config.penalty_m,
        cap_m: config.cap_m,
        journeys: plan.journeys.len(),
        cells: plan.cell_count(),
        trials: plan.trial_count(),
        csv_schema: CsvSchema {
            version: CSV_SCHEMA_VERSION,
            columns: CSV_COLUMNS.iter().map(|c| c.to_string()).collect(),
        },
        warnings: plan.warnings.clone(),
    };
    let manifest_path = config.manifest_path();
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, text + "\n").map_err(io_err(&manifest_path))?;
    Ok(SweepReport {
        csv_path,
        manifest_path,
        manifest,
    })
}
