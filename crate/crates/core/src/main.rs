use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use access_sim::experiment::{load_config, run_sweep};
use access_sim::grid::grid_document;
use access_sim::map::{journeys_to_json, load_journeys, sample_journeys, Map, SamplingSpec};
use access_sim::routes::{enumerate_routes, write_route_lists};

#[derive(Parser)]
#[command(name = "access-sim", version, about = "Monte-Carlo simulation of barrier-aware pedestrian routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a map file and print its summary.
    Validate { map: PathBuf },
    /// Draw journeys stratified by crow-flies distance.
    SampleJourneys {
        map: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        min: f64,
        #[arg(long)]
        max: f64,
        #[arg(long, default_value_t = 1)]
        bins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Pre-compute route lists for every journey.
    Enumerate {
        map: PathBuf,
        journeys: PathBuf,
        #[arg(long, default_value_t = 1500.0)]
        cap: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run a parameter sweep described by a config file.
    Sweep { config: PathBuf },
    /// Write a synthetic lattice map.
    Grid {
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        rows: usize,
        #[arg(long, default_value_t = 100.0)]
        spacing: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, message: impl ToString) -> Self {
        Self {
            kind,
            message: message.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::new("io", format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_map(path: &Path) -> Result<Map, Failure> {
    Map::from_json(&read(path)?).map_err(|e| Failure::new("map", format!("{}: {e}", path.display())))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { map } => {
            let m = load_map(&map)?;
            println!(
                "{}",
                json!({"nodes": m.node_count(), "edges": m.edge_count(), "avg_len_m": m.avg_len_m()})
            );
        }
        Command::SampleJourneys { map, count, min, max, bins, seed, output } => {
            let m = load_map(&map)?;
            let spec = SamplingSpec { count, min_crow_m: min, max_crow_m: max, bins };
            let journeys = sample_journeys(&m, &spec, seed).map_err(|e| Failure::new("sampling", e))?;
            write_or_print(output.as_deref(), &journeys_to_json(&journeys))?;
        }
        Command::Enumerate { map, journeys, cap, output } => {
            if !(cap > 0.0) {
                return Err(Failure::new("usage", "--cap must be positive"));
            }
            let m = load_map(&map)?;
            let js = load_journeys(&m, &read(&journeys)?).map_err(|e| Failure::new("journeys", e))?;
            let lists = js
                .iter()
                .map(|j| enumerate_routes(&m, j, cap))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::new("routes", e))?;
            write_or_print(Some(&output), &write_route_lists(&lists))?;
            let counts: Vec<_> = lists
                .iter()
                .map(|l| json!({"journey_id": l.journey_id, "routes": l.len()}))
                .collect();
            println!("{}", json!({"journeys": counts}));
        }
        Command::Sweep { config } => {
            let cfg = load_config(&config).map_err(|e| Failure::new("config", e))?;
            let report = run_sweep(&cfg).map_err(|e| Failure::new("sweep", e))?;
            for w in &report.manifest.warnings {
                eprintln!("{}", json!({"warning": w}));
            }
            println!(
                "{}",
                json!({
                    "csv": report.csv_path,
                    "manifest": report.manifest_path,
                    "cells": report.manifest.cells,
                    "trials": report.manifest.trials,
                })
            );
        }
        Command::Grid { cols, rows, spacing, output } => {
            if cols * rows < 2 || !(spacing > 0.0) {
                return Err(Failure::new("usage", "grid needs at least 2 nodes and a positive spacing"));
            }
            let doc = grid_document(cols, rows, spacing);
            let text = serde_json::to_string_pretty(&doc).expect("map serializes");
            write_or_print(output.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({"error": f.kind, "message": f.message}));
            ExitCode::FAILURE
        }
    }
}
