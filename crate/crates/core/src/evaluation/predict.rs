use crate::datapipe::LandmarkSequence;
use crate::error::{Error, Result};
use crate::models::{forward, Logits, ModelParams};
use crate::numerics::{Rng, Tensor};
use crate::FEATURE_DIM;

/// Stacks sequences into a `[B × T × 63]` f32 batch, keeping the frames
/// listed in `frames` (all frames when `None`).
pub fn stack_batch(samples: &[&LandmarkSequence], frames: Option<&[usize]>) -> Result<Tensor<f32>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Parameter("cannot build an empty batch".into()))?;
    let t_src = first.num_frames();
    let all: Vec<usize>;
    let idx = match frames {
        Some(f) => f,
        None => {
            all = (0..t_src).collect();
            &all
        }
    };
    let mut data = Vec::with_capacity(samples.len() * idx.len() * FEATURE_DIM);
    for s in samples {
        if s.num_frames() != t_src {
            return Err(Error::Dimension(format!(
                "sample {} has {} frames, batch expects {t_src}",
                s.id(),
                s.num_frames()
            )));
        }
        for &t in idx {
            data.extend(s.frame(t).iter().map(|&v| v as f32));
        }
    }
    Tensor::new(vec![samples.len(), idx.len(), FEATURE_DIM], data)
}

/// Inference-mode logits for standardized samples, in input order.
pub fn predict(params: &ModelParams<f32>, samples: &[LandmarkSequence], batch_size: usize) -> Result<Logits<f32>> {
    if samples.is_empty() {
        return Err(Error::Protocol("cannot predict on an empty sample set".into()));
    }
    let k = params.config().num_classes;
    let mut rng = Rng::new(0, "inference");
    let mut out = Vec::with_capacity(samples.len() * k);
    for chunk in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&LandmarkSequence> = chunk.iter().collect();
        let batch = stack_batch(&refs, None)?;
        out.extend_from_slice(forward(params, &batch, false, &mut rng)?.tensor().data());
    }
    Logits::new(Tensor::new(vec![samples.len(), k], out)?)
}
