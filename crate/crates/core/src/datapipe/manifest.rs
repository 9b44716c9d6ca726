use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datapipe::{load_sequence, LandmarkSequence};
use crate::error::{Error, Result};

/// One manifest row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub id: String,
    pub label: usize,
    pub signer: String,
    /// Path relative to the manifest's directory.
    pub file: String,
    pub frames: usize,
}

/// Dataset inventory: `{"classes": N, "samples": [...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub classes: usize,
    pub samples: Vec<SampleEntry>,
}

impl DatasetManifest {
    pub fn new(classes: usize, samples: Vec<SampleEntry>) -> Result<Self> {
        let m = Self { classes, samples };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 {
            return Err(Error::Data("manifest declares zero classes".into()));
        }
        let mut ids = HashSet::new();
        for s in &self.samples {
            if s.label >= self.classes {
                return Err(Error::Data(format!(
                    "sample {} has label {} but only {} classes exist",
                    s.id, s.label, self.classes
                )));
            }
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Data(format!("duplicate sample id {}", s.id)));
            }
        }
        Ok(())
    }

    /// Distinct signer ids, sorted.
    pub fn signers(&self) -> BTreeSet<&str> {
        self.samples.iter().map(|s| s.signer.as_str()).collect()
    }

    pub fn entry(&self, id: &str) -> Option<&SampleEntry> {
        self.samples.iter().find(|s| s.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)
            .map_err(|e| Error::Format(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Loads one sample's frames (relative to `root`) and checks the frame
    /// count against the manifest.
    pub fn load_entry(&self, root: &Path, entry: &SampleEntry) -> Result<LandmarkSequence> {
        let seq = load_sequence(&root.join(&entry.file), &entry.id, entry.label, &entry.signer)?;
        if seq.num_frames() != entry.frames {
            return Err(Error::Data(format!(
                "sample {}: manifest says {} frames, file has {}",
                entry.id,
                entry.frames,
                seq.num_frames()
            )));
        }
        Ok(seq)
    }

    pub fn load_all(&self, root: &Path) -> Result<Vec<LandmarkSequence>> {
        self.samples.iter().map(|e| self.load_entry(root, e)).collect()
    }
}
