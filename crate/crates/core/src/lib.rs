//! Monte-Carlo simulation linking the recognition quality of an
//! accessibility documentation tool (true-positive and true-negative rates)
//! to the end-to-end quality of the routes an 'A to B' navigation tool
//! built on it produces.
//!
//! Pipeline per journey: enumerate every simple route under a length cap
//! once ([`routes`]), then for each trial sample true barriers and the
//! tool's perception of them ([`stochastic`]), select the shortest route
//! the tool believes accessible by ablation ([`ablation`]), and score the
//! choice against perfect and oblivious comparators ([`metrics`]).
//! [`experiment`] drives whole parameter sweeps.

pub mod ablation;
pub mod bits;
pub mod experiment;
pub mod grid;
pub mod map;
pub mod metrics;
pub mod routes;
pub mod stochastic;

pub use ablation::{batch_select, select_route, Selection};
pub use map::{load_journeys, sample_journeys, Journey, Map, SamplingSpec};
pub use metrics::{evaluate_trial, score_vs_oblivious, score_vs_perfect, CellSummary, TrialOutcome};
pub use routes::{build_incidence, enumerate_routes, shortest_path_oracle, IncidenceMatrix, RouteList};
pub use stochastic::{apply_perception, derive_stream, sample_ground_truth, EdgeSet, ToolProfile};
