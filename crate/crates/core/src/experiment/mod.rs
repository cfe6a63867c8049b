//! Parameter sweeps over (journey, rate, tpr, tnr) cells.
//!
//! Each cell runs `trials_per_cell` trials. A trial derives two streams
//! keyed by grid indices (never by float values), samples the ground truth
//! and the tool's perception over the edges used by the journey's routes,
//! selects routes in batches and folds the classified outcome into the
//! cell's accumulator. Cells are independent work units, so output is the
//! same for any worker count.

pub mod config;
pub mod sweep;

pub use config::{load_config, parse_config, GridSpec, SamplingConfig, SweepConfig};
pub use sweep::{run_sweep, write_csv, Manifest, SweepError, SweepParams, SweepPlan, CSV_COLUMNS};
