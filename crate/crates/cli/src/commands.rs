use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use slr_core::datapipe::{
    save_sequence, standardize_for_inference, standardize_for_training, synth_generate, DatasetManifest,
    LandmarkSequence, SampleEntry, SynthConfig,
};
use slr_core::evaluation::{
    aggregate, evaluate, markdown_table, results_csv, signer_independent_folds, top_k_accuracy, CellResult, FoldPlan,
    RunReport,
};
use slr_core::models::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, ModelKind};
use slr_core::training::{fit, log_to_csv};
use slr_core::Rng;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.slrc";
pub const LOG_FILE: &str = "log.csv";
pub const RESULT_FILE: &str = "result.json";
pub const RESOLVED_CONFIG_FILE: &str = "resolved.toml";
pub const TEST_MANIFEST_FILE: &str = "test_manifest.json";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

/// Writes a synthetic dataset: `samples/<id>.slrb` plus `manifest.json`.
pub fn cmd_synth(classes: usize, signers: usize, per_class: usize, seed: u64, out: &Path, force: bool) -> Result<DatasetManifest> {
    if !force {
        if let Ok(mut entries) = fs::read_dir(out) {
            if entries.next().is_some() {
                return Err(CliError::Refused(format!(
                    "{} exists and is not empty; pass --force to overwrite",
                    out.display()
                )));
            }
        }
    }
    let ds = synth_generate(&SynthConfig::new(classes, signers, per_class), &Rng::new(seed, "synth"))?;
    for (entry, seq) in ds.manifest.samples.iter().zip(&ds.sequences) {
        let path = out.join(&entry.file);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        }
        save_sequence(&path, seq)?;
    }
    ds.manifest.save(&out.join(MANIFEST_FILE))?;
    Ok(ds.manifest)
}

/// A manifest with every sample loaded.
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    pub samples: BTreeMap<String, LandmarkSequence>,
}

impl Dataset {
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        if !path.is_file() {
            return Err(CliError::Core(slr_core::Error::Data(format!(
                "dataset manifest {} not found",
                path.display()
            ))));
        }
        let manifest = DatasetManifest::load(&path)?;
        let samples = manifest
            .load_all(root)?
            .into_iter()
            .map(|s| (s.id().to_string(), s))
            .collect();
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
            samples,
        })
    }

    fn select(&self, ids: &[String]) -> Vec<LandmarkSequence> {
        ids.iter().map(|id| self.samples[id].clone()).collect()
    }

    /// The fold plan every cell of an experiment shares.
    pub fn fold_plan(&self, cfg: &ExperimentConfig) -> Result<FoldPlan> {
        Ok(signer_independent_folds(&self.manifest, cfg.data.folds, &Rng::new(cfg.train.seed, "folds"))?)
    }

    /// Subset manifest of the given sample ids with absolute file paths.
    fn sub_manifest(&self, ids: &[String]) -> Result<DatasetManifest> {
        let root = fs::canonicalize(&self.root).map_err(|e| CliError::io(format!("resolving {}", self.root.display()), e))?;
        let samples = ids
            .iter()
            .map(|id| {
                let e = self.manifest.entry(id).expect("id from this manifest");
                SampleEntry {
                    file: root.join(&e.file).to_string_lossy().into_owned(),
                    ..e.clone()
                }
            })
            .collect();
        Ok(DatasetManifest::new(self.manifest.classes, samples)?)
    }
}

/// Configuration actually used for a model: the file's values with the
/// architecture set and the class count taken from the dataset.
pub fn resolve(cfg: &ExperimentConfig, kind: ModelKind, classes: usize) -> ExperimentConfig {
    let mut resolved = cfg.clone();
    resolved.model.kind = kind;
    resolved.model.num_classes = classes;
    resolved.model.dropout = resolved.train.dropout;
    resolved
}

pub fn cell_dir(output: &Path, kind: ModelKind, fold: usize, seed: u64) -> PathBuf {
    output.join(kind.as_str()).join(fold.to_string()).join(seed.to_string())
}

/// What `result.json` holds for a finished cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub result: CellResult,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub test_samples: usize,
}

fn read_cell(dir: &Path) -> Option<CellRecord> {
    if !dir.join(CHECKPOINT_FILE).is_file() || !dir.join(LOG_FILE).is_file() {
        return None;
    }
    let text = fs::read_to_string(dir.join(RESULT_FILE)).ok()?;
    serde_json::from_str(&text).ok()
}

/// Trains and evaluates one (model, fold, seed) cell and writes its
/// artifacts. `result.json` is written last and marks the cell complete.
pub fn run_cell(
    cfg: &ExperimentConfig,
    data: &Dataset,
    plan: &FoldPlan,
    kind: ModelKind,
    fold: usize,
    seed: u64,
) -> Result<CellRecord> {
    let f = plan
        .folds
        .get(fold)
        .ok_or_else(|| CliError::Config(format!("fold {fold} out of range 0..{}", plan.folds.len())))?;
    let resolved = resolve(cfg, kind, data.manifest.classes);
    let dir = cell_dir(&cfg.run.output, kind, fold, seed);
    write(&dir.join(RESOLVED_CONFIG_FILE), resolved.to_toml())?;

    let train = standardize_for_training(&data.select(&f.train), cfg.data.dtw_width)?;
    let val = data
        .select(&f.val)
        .iter()
        .map(standardize_for_inference)
        .collect::<slr_core::Result<Vec<_>>>()?;
    let test = data.select(&f.test);

    let run_train = slr_core::training::TrainConfig {
        seed,
        ..resolved.train.clone()
    };
    let outcome = fit(
        &resolved.model,
        &train,
        &val,
        &run_train,
        &resolved.augment,
        &Rng::new(seed, format!("fold{fold}")),
        resolved.run.checked,
    )?;
    let scores = evaluate(&outcome.params, &test, resolved.train.batch_size)?;

    let checkpoint = Checkpoint::new(
        outcome.params,
        CheckpointMeta {
            dataset: cfg.data.name.clone(),
            fold: Some(fold),
            seed,
            epoch: outcome.best_epoch,
            val_loss: outcome.best_val_loss,
        },
    );
    save_checkpoint(&dir.join(CHECKPOINT_FILE), &checkpoint)?;
    write(&dir.join(LOG_FILE), log_to_csv(&outcome.log))?;
    write(&dir.join(TEST_MANIFEST_FILE), data.sub_manifest(&f.test)?.to_json())?;
    let record = CellRecord {
        result: CellResult {
            model: kind,
            dataset: cfg.data.name.clone(),
            fold,
            seed,
            top1: scores.top1,
            top5: scores.top5,
        },
        best_epoch: outcome.best_epoch,
        best_val_loss: outcome.best_val_loss,
        epochs_run: outcome.log.len(),
        test_samples: scores.samples,
    };
    write(
        &dir.join(RESULT_FILE),
        serde_json::to_string_pretty(&record).expect("record serializes") + "\n",
    )?;
    Ok(record)
}

/// Trains one cell from a config file.
pub fn cmd_train(cfg: &ExperimentConfig, kind: ModelKind, fold: usize, seed: u64) -> Result<CellRecord> {
    let data = Dataset::load(&cfg.data.root)?;
    let plan = data.fold_plan(cfg)?;
    run_cell(cfg, &data, &plan, kind, fold, seed)
}

/// Outcome of a cross-validation grid.
pub struct GridOutcome {
    pub reports: Vec<RunReport>,
    /// Cells loaded from a previous run instead of being recomputed.
    pub resumed: usize,
    pub computed: usize,
}

/// Runs (or resumes) the full models × folds × seeds grid, then aggregates.
pub fn cmd_crossval(cfg: &ExperimentConfig, models: &[ModelKind], jobs: usize) -> Result<GridOutcome> {
    let data = Dataset::load(&cfg.data.root)?;
    let plan = data.fold_plan(cfg)?;
    write(&cfg.run.output.join(RESOLVED_CONFIG_FILE), cfg.to_toml())?;
    write(
        &cfg.run.output.join("folds.json"),
        serde_json::to_string_pretty(&plan).expect("plan serializes") + "\n",
    )?;
    let seeds = cfg.run_seeds();
    let mut cells: Vec<(ModelKind, usize, u64)> = Vec::new();
    for &m in models {
        for f in 0..cfg.data.folds {
            cells.extend(seeds.iter().map(|&s| (m, f, s)));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<(bool, Result<CellRecord>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(m, f, s)| match read_cell(&cell_dir(&cfg.run.output, m, f, s)) {
                Some(r) => (true, Ok(r)),
                None => (false, run_cell(cfg, &data, &plan, m, f, s)),
            })
            .collect()
    });

    let mut failures = Vec::new();
    let mut by_model: BTreeMap<ModelKind, Vec<CellResult>> = BTreeMap::new();
    let (mut resumed, mut computed) = (0, 0);
    for (&(m, f, s), (was_resumed, outcome)) in cells.iter().zip(outcomes) {
        match outcome {
            Ok(r) => {
                if was_resumed {
                    resumed += 1;
                } else {
                    computed += 1;
                }
                by_model.entry(m).or_default().push(r.result);
            }
            Err(e) => failures.push(format!("{m} fold {f} seed {s}: {e}")),
        }
    }
    if !failures.is_empty() {
        return Err(CliError::Core(slr_core::Error::Protocol(format!(
            "grid incomplete, aggregation refused; failed cells: {}",
            failures.join("; ")
        ))));
    }
    let reports = models
        .iter()
        .map(|m| aggregate(&by_model[m], cfg.data.folds, &seeds))
        .collect::<slr_core::Result<Vec<_>>>()?;
    write(&cfg.run.output.join("results.csv"), results_csv(&reports))?;
    write(&cfg.run.output.join("results.md"), markdown_table(&reports))?;
    Ok(GridOutcome {
        reports,
        resumed,
        computed,
    })
}

/// Metrics printed and recorded by `eval`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub model: ModelKind,
    pub dataset: String,
    pub fold: Option<usize>,
    pub seed: u64,
    pub k: usize,
    pub top1: f64,
    pub topk: f64,
    pub samples: usize,
}

pub const EVAL_HEADER: &str = "model,dataset,fold,seed,samples,top1,k,topk";

impl EvalReport {
    pub fn csv_row(&self) -> String {
        let fold = self.fold.map_or_else(|| "-".to_string(), |f| f.to_string());
        format!(
            "{},{},{},{},{},{},{},{}",
            self.model, self.dataset, fold, self.seed, self.samples, self.top1, self.k, self.topk
        )
    }
}

/// Scores a checkpoint on every sample of a manifest. The checksum is
/// verified before any data is touched.
pub fn cmd_eval(checkpoint: &Path, manifest: &Path, k: usize, out: Option<&Path>) -> Result<EvalReport> {
    let ck = load_checkpoint(checkpoint)?;
    let m = DatasetManifest::load(manifest)?;
    let root = manifest.parent().unwrap_or(Path::new("."));
    let samples = m.load_all(root)?;
    let classes = ck.params.config().num_classes;
    if k == 0 || k > classes {
        return Err(CliError::Config(format!("--k {k} must lie in 1..={classes}")));
    }
    let scores = evaluate(&ck.params, &samples, 64)?;
    let topk = if k == 5.min(classes) {
        scores.top5
    } else {
        let prepared = samples
            .iter()
            .map(standardize_for_inference)
            .collect::<slr_core::Result<Vec<_>>>()?;
        let logits = slr_core::evaluation::predict(&ck.params, &prepared, 64)?;
        let truths: Vec<usize> = samples.iter().map(LandmarkSequence::label).collect();
        top_k_accuracy(&logits, &truths, k)?
    };
    let report = EvalReport {
        model: ck.params.kind(),
        dataset: ck.meta.dataset.clone(),
        fold: ck.meta.fold,
        seed: ck.meta.seed,
        k,
        top1: scores.top1,
        topk,
        samples: scores.samples,
    };
    let out = out.map_or_else(
        || checkpoint.parent().unwrap_or(Path::new(".")).join("eval.csv"),
        Path::to_path_buf,
    );
    let mut text = match fs::read_to_string(&out) {
        Ok(t) if t.starts_with(EVAL_HEADER) => t,
        _ => format!("{EVAL_HEADER}\n"),
    };
    text.push_str(&report.csv_row());
    text.push('\n');
    write(&out, text)?;
    Ok(report)
}
