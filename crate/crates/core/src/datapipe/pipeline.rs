use std::collections::BTreeMap;

use crate::datapipe::{align_to_template, class_medoid, resample_cubic, wrist_center, zscore, LandmarkSequence};
use crate::error::Result;
use crate::STANDARD_FRAMES;

/// Sakoe-Chiba band half-width for template alignment.
pub const DTW_WIDTH: usize = 10;

/// Wrist centering followed by per-sample z-scoring.
pub fn normalize(seq: &LandmarkSequence) -> LandmarkSequence {
    zscore(&wrist_center(seq))
}

/// Inference path: normalize, then resample to 64 frames.
pub fn standardize_for_inference(seq: &LandmarkSequence) -> Result<LandmarkSequence> {
    resample_cubic(&normalize(seq), STANDARD_FRAMES)
}

/// Training path: normalize, align every sample to its class medoid, then
/// resample to 64 frames. Output order matches input order.
pub fn standardize_for_training(samples: &[LandmarkSequence], width: usize) -> Result<Vec<LandmarkSequence>> {
    let normalized: Vec<LandmarkSequence> = samples.iter().map(normalize).collect();
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in normalized.iter().enumerate() {
        by_class.entry(s.label()).or_default().push(i);
    }
    let mut templates: BTreeMap<usize, usize> = BTreeMap::new();
    for (&label, members) in &by_class {
        let group: Vec<LandmarkSequence> = members.iter().map(|&i| normalized[i].clone()).collect();
        templates.insert(label, members[class_medoid(&group, width)?]);
    }
    normalized
        .iter()
        .map(|s| {
            let template = &normalized[templates[&s.label()]];
            resample_cubic(&align_to_template(s, template, width)?, STANDARD_FRAMES)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::{synth_generate, SynthConfig};
    use crate::numerics::Rng;
    use crate::FEATURE_DIM;

    #[test]
    fn every_output_is_64_by_63() {
        let ds = synth_generate(&SynthConfig::new(2, 3, 4), &Rng::new(1, "p")).unwrap();
        let train = standardize_for_training(&ds.sequences, DTW_WIDTH).unwrap();
        assert_eq!(train.len(), ds.sequences.len());
        for (a, b) in train.iter().zip(&ds.sequences) {
            assert_eq!(a.num_frames(), STANDARD_FRAMES);
            assert_eq!(a.values().len(), STANDARD_FRAMES * FEATURE_DIM);
            assert_eq!(a.id(), b.id());
            assert!(a.frames().all(|f| f[..3].iter().all(|&v| v == 0.0)));
        }
        let inf = standardize_for_inference(&ds.sequences[0]).unwrap();
        assert_eq!(inf.num_frames(), STANDARD_FRAMES);
    }
}
