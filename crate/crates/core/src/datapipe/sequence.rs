use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::FEATURE_DIM;

pub const SLRB_MAGIC: &[u8; 4] = b"SLRB";
pub const SLRB_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// One sample: `T` frames of 63 landmark coordinates plus its metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkSequence {
    id: String,
    label: usize,
    signer: String,
    frames: Vec<f64>,
}

impl LandmarkSequence {
    /// `frames` is row-major `T × 63` with `T ≥ 2`, all finite.
    pub fn new(
        id: impl Into<String>,
        label: usize,
        signer: impl Into<String>,
        frames: Vec<f64>,
    ) -> Result<Self> {
        if !frames.len().is_multiple_of(FEATURE_DIM) {
            return Err(Error::Dimension(format!(
                "{} values is not a whole number of {FEATURE_DIM}-dim frames",
                frames.len()
            )));
        }
        if frames.len() < 2 * FEATURE_DIM {
            return Err(Error::Dimension(format!(
                "sequence needs at least 2 frames, got {}",
                frames.len() / FEATURE_DIM
            )));
        }
        if let Some(i) = frames.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite coordinate in frame {} feature {}",
                i / FEATURE_DIM,
                i % FEATURE_DIM
            )));
        }
        Ok(Self {
            id: id.into(),
            label,
            signer: signer.into(),
            frames,
        })
    }

    /// Same metadata, new frames.
    pub fn with_frames(&self, frames: Vec<f64>) -> Result<Self> {
        Self::new(self.id.clone(), self.label, self.signer.clone(), frames)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn signer(&self) -> &str {
        &self.signer
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len() / FEATURE_DIM
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t * FEATURE_DIM..(t + 1) * FEATURE_DIM]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.frames.chunks_exact(FEATURE_DIM)
    }

    pub fn values(&self) -> &[f64] {
        &self.frames
    }

    pub fn into_values(self) -> Vec<f64> {
        self.frames
    }
}

/// Encodes frames as an SLRB payload. Coordinates are stored as 32-bit
/// floats, so the round trip is exact for values representable in `f32`.
pub fn encode_slrb(seq: &LandmarkSequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + seq.values().len() * 4);
    out.extend_from_slice(SLRB_MAGIC);
    out.extend_from_slice(&SLRB_VERSION.to_le_bytes());
    out.extend_from_slice(&(seq.num_frames() as u32).to_le_bytes());
    out.extend_from_slice(&(FEATURE_DIM as u32).to_le_bytes());
    for &v in seq.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

/// Decodes an SLRB payload into `(num_frames, frames)`.
pub fn decode_slrb(bytes: &[u8]) -> Result<(usize, Vec<f64>)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "SLRB header needs {HEADER_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    if &bytes[..4] != SLRB_MAGIC {
        return Err(Error::Format("bad SLRB magic".into()));
    }
    let version = read_u32(bytes, 4);
    if version != SLRB_VERSION {
        return Err(Error::Format(format!("unsupported SLRB version {version}")));
    }
    let frames = read_u32(bytes, 8) as usize;
    let feat_dim = read_u32(bytes, 12) as usize;
    if feat_dim != FEATURE_DIM {
        return Err(Error::Format(format!(
            "feat_dim {feat_dim} does not match the {FEATURE_DIM}-dim frame contract"
        )));
    }
    if frames < 2 {
        return Err(Error::Format(format!("SLRB declares {frames} frames, need ≥ 2")));
    }
    let expected = HEADER_LEN + frames * feat_dim * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "SLRB payload is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "non-finite coordinate in frame {} feature {}",
            i / feat_dim,
            i % feat_dim
        )));
    }
    Ok((frames, values))
}

pub fn save_sequence(path: &Path, seq: &LandmarkSequence) -> Result<()> {
    fs::write(path, encode_slrb(seq)).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads an SLRB file and attaches the given metadata.
pub fn load_sequence(
    path: &Path,
    id: &str,
    label: usize,
    signer: &str,
) -> Result<LandmarkSequence> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let (_, values) = decode_slrb(&bytes)
        .map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
            other => other,
        })?;
    LandmarkSequence::new(id, label, signer, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(frames: usize) -> LandmarkSequence {
        let values = (0..frames * FEATURE_DIM)
            .map(|i| ((i as f32) * 0.37).sin() as f64)
            .collect();
        LandmarkSequence::new("s0", 3, "alice", values).unwrap()
    }

    #[test]
    fn sequence_invariants() {
        assert!(LandmarkSequence::new("a", 0, "x", vec![0.0; 63]).is_err());
        assert!(LandmarkSequence::new("a", 0, "x", vec![0.0; 130]).is_err());
        let mut v = vec![0.0; 126];
        v[70] = f64::NAN;
        assert!(matches!(LandmarkSequence::new("a", 0, "x", v), Err(Error::Data(_))));
    }

    #[test]
    fn file_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s0.slrb");
        let seq = sample(17);
        save_sequence(&path, &seq).unwrap();
        let back = load_sequence(&path, "s0", 3, "alice").unwrap();
        assert_eq!(back.num_frames(), 17);
        for (a, b) in seq.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn header_layout() {
        let bytes = encode_slrb(&sample(2));
        assert_eq!(&bytes[..4], b"SLRB");
        assert_eq!(read_u32(&bytes, 4), 1);
        assert_eq!(read_u32(&bytes, 8), 2);
        assert_eq!(read_u32(&bytes, 12), 63);
        assert_eq!(bytes.len(), 16 + 2 * 63 * 4);
    }

    #[test]
    fn wrong_feat_dim_is_format_error() {
        let mut bytes = encode_slrb(&sample(3));
        bytes[12..16].copy_from_slice(&60u32.to_le_bytes());
        assert!(matches!(decode_slrb(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_format_error() {
        let bytes = encode_slrb(&sample(3));
        assert!(matches!(decode_slrb(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(decode_slrb(&bytes[..10]), Err(Error::Format(_))));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(decode_slrb(&longer), Err(Error::Format(_))));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode_slrb(&sample(3));
        bytes[0] = b'X';
        assert!(matches!(decode_slrb(&bytes), Err(Error::Format(_))));
        let mut bytes = encode_slrb(&sample(3));
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(decode_slrb(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn non_finite_payload_is_data_error() {
        let mut bytes = encode_slrb(&sample(3));
        bytes[16..20].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(decode_slrb(&bytes), Err(Error::Data(_))));
    }

    proptest! {
        #[test]
        fn f32_valued_sequences_round_trip(frames in 2usize..12, vals in proptest::collection::vec(-1e3f32..1e3, 63)) {
            let values: Vec<f64> = (0..frames * 63).map(|i| (vals[i % 63] * (i / 63) as f32) as f64).collect();
            let seq = LandmarkSequence::new("p", 1, "s", values).unwrap();
            let (n, back) = decode_slrb(&encode_slrb(&seq)).unwrap();
            prop_assert_eq!(n, frames);
            prop_assert!(seq.values().iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
