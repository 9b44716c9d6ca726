use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::datapipe::DatasetManifest;
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// One cross-validation fold: held-out test signers, a single validation
/// signer, and everyone else for training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub test_signers: Vec<String>,
    pub val_signer: String,
    pub train_signers: Vec<String>,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    /// Signer id → fold whose test set it belongs to.
    pub assignments: BTreeMap<String, usize>,
    pub folds: Vec<Fold>,
}

/// Shuffles the (sorted) signer inventory with a child stream of `rng`, deals
/// signers round-robin into `folds` test groups, and for each fold picks one
/// of the remaining signers for validation.
pub fn signer_independent_folds(manifest: &DatasetManifest, folds: usize, rng: &Rng) -> Result<FoldPlan> {
    let mut signers: Vec<String> = manifest.signers().into_iter().map(str::to_string).collect();
    if folds < 2 {
        return Err(Error::Parameter(format!("need at least 2 folds, got {folds}")));
    }
    if signers.len() < folds {
        return Err(Error::Protocol(format!(
            "{} signers cannot fill {folds} signer-independent folds",
            signers.len()
        )));
    }
    rng.split("signers").shuffle(&mut signers);
    let assignments: BTreeMap<String, usize> = signers.iter().enumerate().map(|(p, s)| (s.clone(), p % folds)).collect();

    let mut plan = Vec::with_capacity(folds);
    for f in 0..folds {
        let test_signers: BTreeSet<&str> =
            assignments.iter().filter(|(_, &g)| g == f).map(|(s, _)| s.as_str()).collect();
        let rest: Vec<&str> = assignments.keys().map(String::as_str).filter(|s| !test_signers.contains(s)).collect();
        if rest.len() < 2 {
            return Err(Error::Protocol(format!(
                "fold {f} leaves {} non-test signers; need one for validation and one for training",
                rest.len()
            )));
        }
        let val_signer = rest[rng.split(&format!("validation/{f}")).below(rest.len())];
        let train_signers: Vec<String> = rest.iter().filter(|&&s| s != val_signer).map(|s| s.to_string()).collect();
        let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
        for s in &manifest.samples {
            let bucket = if test_signers.contains(s.signer.as_str()) {
                &mut test
            } else if s.signer == val_signer {
                &mut val
            } else {
                &mut train
            };
            bucket.push(s.id.clone());
        }
        plan.push(Fold {
            index: f,
            test_signers: test_signers.iter().map(|s| s.to_string()).collect(),
            val_signer: val_signer.to_string(),
            train_signers,
            train,
            val,
            test,
        });
    }
    Ok(FoldPlan {
        assignments,
        folds: plan,
    })
}
