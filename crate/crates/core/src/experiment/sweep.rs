use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnn::NetworkSpec;
use crate::error::{Error, Result};

use super::config::{FitThresholds, TrainConfig};
use super::dataset::Dataset;
use super::train::{train_with, RunRecord};

/// One summary line per grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub lr: f64,
    pub iterations: usize,
    pub batch: usize,
    pub dropout: bool,
    /// Fit verdict, or `failed: <reason>`.
    pub verdict: String,
    pub final_train_acc: Option<f64>,
    pub final_test_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// In grid order; failed runs carry their error message.
    pub runs: Vec<std::result::Result<RunRecord, String>>,
    pub summary: Vec<SummaryRow>,
}

/// Train every config of `grid`. A failing run is recorded and the sweep
/// goes on. With `parallel`, runs are spread over the rayon pool; results
/// keep grid order either way.
pub fn sweep(
    spec: &NetworkSpec,
    train: &Dataset,
    test: &Dataset,
    grid: &[TrainConfig],
    thresholds: &FitThresholds,
    parallel: bool,
) -> Result<SweepOutcome> {
    if grid.is_empty() {
        return Err(Error::param("sweep grid is empty"));
    }
    let run = |cfg: &TrainConfig| {
        train_with(spec, train, test, cfg, thresholds, &mut |_| {}).map(|o| o.record).map_err(|e| e.to_string())
    };
    let runs: Vec<_> = if parallel { grid.par_iter().map(run).collect() } else { grid.iter().map(run).collect() };
    let summary = grid.iter().zip(&runs).map(|(cfg, r)| summary_row(cfg, r)).collect();
    Ok(SweepOutcome { runs, summary })
}

fn summary_row(cfg: &TrainConfig, run: &std::result::Result<RunRecord, String>) -> SummaryRow {
    let (verdict, train, test) = match run {
        Ok(r) => (r.verdict.to_string(), Some(r.final_train_acc), Some(r.final_test_acc)),
        Err(e) => (format!("failed: {e}"), None, None),
    };
    SummaryRow {
        lr: cfg.lr,
        iterations: cfg.max_iterations,
        batch: cfg.batch_size,
        dropout: cfg.dropout,
        verdict,
        final_train_acc: train,
        final_test_acc: test,
    }
}

/// Writes `summary.csv`, `summary.json` and `curves/run_NN.csv`
/// (iteration, loss, train_acc, test_acc) under `dir`.
pub fn write_sweep(outcome: &SweepOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("curves"))?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    for row in &outcome.summary {
        w.serialize(row)?;
    }
    w.flush()?;
    let mut json = serde_json::to_string_pretty(&outcome.summary)?;
    json.push('\n');
    fs::write(dir.join("summary.json"), json)?;
    for (i, run) in outcome.runs.iter().enumerate() {
        if let Ok(r) = run {
            write_curve(&r.curve, &dir.join("curves").join(format!("run_{i:02}.csv")))?;
        }
    }
    Ok(())
}

pub fn write_curve(curve: &[super::CurvePoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in curve {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub mod presets {
    use super::TrainConfig;
    use crate::experiment::config::{DESK_LR_SCALE, REFERENCE_LR};

    /// Learning rate, iterations and dropout of the 14 reference grid cells.
    pub const REFERENCE_GRID: [(f64, usize, bool); 14] = [
        (1e-4, 50_000, false),
        (1e-4, 50_000, true),
        (1e-4, 40_000, false),
        (1e-4, 40_000, true),
        (2e-5, 40_000, false),
        (3e-5, 40_000, false),
        (4e-5, 40_000, false),
        (4e-5, 50_000, false),
        (5e-5, 40_000, false),
        (6e-5, 40_000, false),
        (7e-5, 40_000, false),
        (8e-5, 40_000, false),
        (9e-5, 40_000, false),
        (9e-5, 40_000, true),
    ];

    /// The reference grid at its original scale: minibatch 100, evaluation
    /// every 1000 iterations.
    pub fn paper_table6(seed: u64) -> Vec<TrainConfig> {
        REFERENCE_GRID
            .iter()
            .map(|&(lr, max_iterations, dropout)| TrainConfig {
                lr,
                max_iterations,
                batch_size: 100,
                dropout,
                seed,
                eval_interval: 1000,
                ..TrainConfig::default()
            })
            .collect()
    }

    /// Four short desk runs: the scaled reference rate at two multipliers,
    /// each with and without dropout.
    pub fn desk(seed: u64, iterations: usize) -> Vec<TrainConfig> {
        let base = REFERENCE_LR * DESK_LR_SCALE;
        let interval = (iterations / 4).max(1);
        [(1.0, false), (1.0, true), (0.5, false), (0.5, true)]
            .iter()
            .map(|&(mult, dropout)| TrainConfig {
                lr: base * mult,
                max_iterations: iterations,
                batch_size: 16,
                dropout,
                seed,
                eval_interval: interval,
                ..TrainConfig::default()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::presets::*;

    #[test]
    fn reference_grid_cells() {
        let g = paper_table6(0);
        assert_eq!(g.len(), 14);
        assert_eq!(g.iter().filter(|c| c.dropout).count(), 3);
        assert_eq!(g.iter().filter(|c| c.max_iterations == 50_000).count(), 3);
        assert!(g.iter().all(|c| c.batch_size == 100));
        let mut lrs: Vec<f64> = g.iter().map(|c| c.lr).collect();
        lrs.dedup();
        assert_eq!(lrs, [1e-4, 2e-5, 3e-5, 4e-5, 5e-5, 6e-5, 7e-5, 8e-5, 9e-5]);
    }

    #[test]
    fn desk_grid_has_four() {
        assert_eq!(desk(1, 40).len(), 4);
    }
}
