use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datapipe::{standardize_for_inference, LandmarkSequence};
use crate::error::{Error, Result};
use crate::evaluation::{predict, top_k_accuracy};
use crate::models::{ModelKind, ModelParams};

/// Top-1 and Top-k (k = min(5, classes)) on one sample set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub top1: f64,
    pub top5: f64,
    pub samples: usize,
}

/// Scores raw test sequences: each is normalized and resampled exactly as
/// at inference time, then classified in one deterministic forward pass.
pub fn evaluate(params: &ModelParams<f32>, test: &[LandmarkSequence], batch_size: usize) -> Result<Scores> {
    if test.is_empty() {
        return Err(Error::Protocol("test set is empty".into()));
    }
    let classes = params.config().num_classes;
    if let Some(s) = test.iter().find(|s| s.label() >= classes) {
        return Err(Error::Format(format!(
            "sample {} has label {} but the checkpoint only knows {classes} classes",
            s.id(),
            s.label()
        )));
    }
    let prepared = test.iter().map(standardize_for_inference).collect::<Result<Vec<_>>>()?;
    let logits = predict(params, &prepared, batch_size)?;
    let truths: Vec<usize> = test.iter().map(LandmarkSequence::label).collect();
    Ok(Scores {
        top1: top_k_accuracy(&logits, &truths, 1)?,
        top5: top_k_accuracy(&logits, &truths, 5.min(classes))?,
        samples: test.len(),
    })
}

/// Result of one (model, fold, seed) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model: ModelKind,
    pub dataset: String,
    pub fold: usize,
    pub seed: u64,
    pub top1: f64,
    pub top5: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n − 1); zero for a single entry.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Aggregate over a complete fold × seed grid for one model and dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: ModelKind,
    pub dataset: String,
    /// Sorted by (fold, seed).
    pub cells: Vec<CellResult>,
    pub top1: Summary,
    pub top5: Summary,
}

/// Mean and sample standard deviation over exactly `folds × seeds` cells.
/// A missing or duplicated cell, or cells from another model or dataset,
/// is a protocol error.
pub fn aggregate(cells: &[CellResult], folds: usize, seeds: &[u64]) -> Result<RunReport> {
    let first = cells.first().ok_or_else(|| Error::Protocol("no results to aggregate".into()))?;
    let (model, dataset) = (first.model, first.dataset.clone());
    let mut grid: BTreeMap<(usize, u64), &CellResult> = BTreeMap::new();
    for c in cells {
        if c.model != model || c.dataset != dataset {
            return Err(Error::Protocol(format!(
                "cannot aggregate {} / {} with {} / {}",
                c.model, c.dataset, model, dataset
            )));
        }
        if c.top5 < c.top1 {
            return Err(Error::Protocol(format!(
                "fold {} seed {}: top-5 {} below top-1 {}",
                c.fold, c.seed, c.top5, c.top1
            )));
        }
        if grid.insert((c.fold, c.seed), c).is_some() {
            return Err(Error::Protocol(format!("duplicate result for fold {} seed {}", c.fold, c.seed)));
        }
    }
    let expected: BTreeSet<(usize, u64)> = (0..folds).flat_map(|f| seeds.iter().map(move |&s| (f, s))).collect();
    let present: BTreeSet<(usize, u64)> = grid.keys().copied().collect();
    if present != expected {
        let missing: Vec<_> = expected.difference(&present).collect();
        let extra: Vec<_> = present.difference(&expected).collect();
        return Err(Error::Protocol(format!(
            "incomplete grid for {model}: missing (fold, seed) {missing:?}, unexpected {extra:?}"
        )));
    }
    let ordered: Vec<CellResult> = grid.into_values().cloned().collect();
    let top1: Vec<f64> = ordered.iter().map(|c| c.top1).collect();
    let top5: Vec<f64> = ordered.iter().map(|c| c.top5).collect();
    Ok(RunReport {
        model,
        dataset,
        cells: ordered,
        top1: Summary::of(&top1),
        top5: Summary::of(&top5),
    })
}

pub const RESULTS_HEADER: &str = "model,dataset,fold,seed,top1,top5";

/// Per-cell rows followed by `mean` and `std` aggregate rows for each report.
pub fn results_csv(reports: &[RunReport]) -> String {
    let mut s = format!("{RESULTS_HEADER}\n");
    for r in reports {
        for c in &r.cells {
            let _ = writeln!(s, "{},{},{},{},{},{}", c.model, c.dataset, c.fold, c.seed, c.top1, c.top5);
        }
    }
    for r in reports {
        let _ = writeln!(s, "{},{},mean,all,{},{}", r.model, r.dataset, r.top1.mean, r.top5.mean);
        let _ = writeln!(s, "{},{},std,all,{},{}", r.model, r.dataset, r.top1.std, r.top5.std);
    }
    s
}

/// Model × dataset comparison table with Top-1/Top-5 columns per dataset.
pub fn markdown_table(reports: &[RunReport]) -> String {
    let datasets: BTreeSet<&str> = reports.iter().map(|r| r.dataset.as_str()).collect();
    let mut models: Vec<ModelKind> = reports.iter().map(|r| r.model).collect();
    models.sort();
    models.dedup();
    let mut s = String::from("| Model |");
    for d in &datasets {
        let _ = write!(s, " {d} Top-1 | {d} Top-5 |");
    }
    s.push_str("\n|---|");
    s.push_str(&"---|---|".repeat(datasets.len()));
    s.push('\n');
    for m in models {
        let _ = write!(s, "| {} |", m.display_name());
        for d in &datasets {
            match reports.iter().find(|r| r.model == m && r.dataset == *d) {
                Some(r) => {
                    let _ = write!(
                        s,
                        " {:.1}% ± {:.1} | {:.1}% ± {:.1} |",
                        100.0 * r.top1.mean,
                        100.0 * r.top1.std,
                        100.0 * r.top5.mean,
                        100.0 * r.top5.std
                    );
                }
                None => s.push_str(" – | – |"),
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(fold: usize, seed: u64, top1: f64, top5: f64) -> CellResult {
        CellResult {
            model: ModelKind::Transformer,
            dataset: "synth".into(),
            fold,
            seed,
            top1,
            top5,
        }
    }

    fn grid(f: impl Fn(usize) -> (f64, f64)) -> Vec<CellResult> {
        let mut out = Vec::new();
        for fold in 0..5 {
            for seed in 42..45 {
                let (a, b) = f(out.len());
                out.push(cell(fold, seed, a, b));
            }
        }
        out
    }

    #[test]
    fn constant_grid() {
        let r = aggregate(&grid(|_| (0.8, 0.9)), 5, &[42, 43, 44]).unwrap();
        assert!((r.top1.mean - 0.8).abs() < 1e-12 && r.top1.std.abs() < 1e-12);
        assert_eq!(r.cells.len(), 15);
    }

    #[test]
    fn alternating_grid_matches_hand_calculation() {
        // 8 × 0.7 and 7 × 0.8: mean = 11.2/15, Σ(x−μ)² = 8·(0.7/15)² + 7·(0.8/15)².
        let r = aggregate(&grid(|i| if i % 2 == 0 { (0.7, 0.9) } else { (0.8, 0.9) }), 5, &[42, 43, 44]).unwrap();
        let mean = 11.2 / 15.0;
        let ss = 8.0 * (0.7f64 / 15.0).powi(2) + 7.0 * (0.8f64 / 15.0).powi(2);
        assert!((r.top1.mean - mean).abs() < 1e-12);
        assert!((r.top1.std - (ss / 14.0).sqrt()).abs() < 1e-12);
        assert!(r.top5.mean >= r.top1.mean);
    }

    #[test]
    fn missing_cell_is_refused() {
        let mut g = grid(|_| (0.5, 0.6));
        g.pop();
        assert!(matches!(aggregate(&g, 5, &[42, 43, 44]), Err(Error::Protocol(_))));
        let mut g = grid(|_| (0.5, 0.6));
        g[3] = g[2].clone();
        assert!(matches!(aggregate(&g, 5, &[42, 43, 44]), Err(Error::Protocol(_))));
    }

    #[test]
    fn csv_and_table_layout() {
        let r = aggregate(&grid(|_| (0.5, 0.75)), 5, &[42, 43, 44]).unwrap();
        let csv = results_csv(std::slice::from_ref(&r));
        assert_eq!(csv.lines().count(), 1 + 15 + 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("transformer,synth,0,42,0.5,0.75"));
        let md = markdown_table(&[r]);
        assert!(md.contains("| Vanilla Transformer | 50.0% ± 0.0 | 75.0% ± 0.0 |"));
    }
}
