//! Binary storage for feature sequences.
//!
//! Layout, all integers little-endian:
//! `"AWEF"`, version `u32`, feature dimension `u32`, segment count `u64`,
//! then one index entry per segment (`u32` id length, UTF-8 id bytes, `u64`
//! frame count, `u64` byte offset into the payload), then the payload of
//! `f32` frame values in index order. Values are stored at `f32` precision,
//! so a round trip quantizes to the nearest `f32`.

use super::{FeatureError, FeatureSequence};
use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 4] = b"AWEF";
const VERSION: u32 = 1;

/// A parsed feature file: index plus payload, queryable by segment id.
#[derive(Debug)]
pub struct FeatureFile {
    dim: usize,
    index: Vec<(String, u64, u64)>,
    payload: Vec<u8>,
}

/// Writes all segments to `path`. Every sequence must share one feature
/// dimension and ids must be unique.
pub fn write_feature_file(
    path: &Path,
    segments: &[(String, FeatureSequence)],
) -> Result<(), FeatureError> {
    let dim = match segments.first() {
        Some((_, s)) => s.dim(),
        None => 0,
    };
    let mut seen = HashSet::new();
    for (id, seq) in segments {
        if seq.dim() != dim {
            return Err(FeatureError::DimensionMismatch {
                id: id.clone(),
                expected: dim,
                got: seq.dim(),
            });
        }
        if !seen.insert(id.as_str()) {
            return Err(FeatureError::DuplicateSegment(id.clone()));
        }
    }

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.write_u32::<LittleEndian>(VERSION)?;
    out.write_u32::<LittleEndian>(dim as u32)?;
    out.write_u64::<LittleEndian>(segments.len() as u64)?;
    let mut offset = 0u64;
    for (id, seq) in segments {
        out.write_u32::<LittleEndian>(id.len() as u32)?;
        out.extend_from_slice(id.as_bytes());
        out.write_u64::<LittleEndian>(seq.num_frames() as u64)?;
        out.write_u64::<LittleEndian>(offset)?;
        offset += (seq.data().len() * 4) as u64;
    }
    for (_, seq) in segments {
        for v in seq.data() {
            out.write_f32::<LittleEndian>(*v as f32)?;
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

/// Opens and fully parses a feature file.
pub fn read_feature_file(path: &Path) -> Result<FeatureFile, FeatureError> {
    let bytes = std::fs::read(path)?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], FeatureError> {
        if *pos + n > bytes.len() {
            return Err(FeatureError::Truncated);
        }
        let slice = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(slice)
    };
    if take(&mut pos, 4)? != MAGIC {
        return Err(FeatureError::BadMagic);
    }
    let version = LittleEndian::read_u32(take(&mut pos, 4)?);
    if version != VERSION {
        return Err(FeatureError::UnsupportedVersion(version));
    }
    let dim = LittleEndian::read_u32(take(&mut pos, 4)?) as usize;
    let count = LittleEndian::read_u64(take(&mut pos, 8)?) as usize;
    let mut index = Vec::with_capacity(count);
    for _ in 0..count {
        let id_len = LittleEndian::read_u32(take(&mut pos, 4)?) as usize;
        let id = String::from_utf8(take(&mut pos, id_len)?.to_vec())
            .map_err(|_| FeatureError::Truncated)?;
        let frames = LittleEndian::read_u64(take(&mut pos, 8)?);
        let offset = LittleEndian::read_u64(take(&mut pos, 8)?);
        index.push((id, frames, offset));
    }
    let payload = bytes[pos..].to_vec();
    let file = FeatureFile {
        dim,
        index,
        payload,
    };
    for (id, frames, offset) in &file.index {
        let end = offset + frames * (file.dim as u64) * 4;
        if end > file.payload.len() as u64 {
            return Err(FeatureError::UnknownSegment(format!(
                "{id} extends past end of payload"
            )));
        }
    }
    Ok(file)
}

impl FeatureFile {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Segment ids in file order.
    pub fn segment_ids(&self) -> impl Iterator<Item = &str> {
        self.index.iter().map(|(id, _, _)| id.as_str())
    }

    /// Decodes one segment back to `f64` frames.
    pub fn get(&self, id: &str) -> Result<FeatureSequence, FeatureError> {
        let (_, frames, offset) = self
            .index
            .iter()
            .find(|(sid, _, _)| sid == id)
            .ok_or_else(|| FeatureError::UnknownSegment(id.to_string()))?;
        let start = *offset as usize;
        let n_values = (*frames as usize) * self.dim;
        let mut data = Vec::with_capacity(n_values);
        for i in 0..n_values {
            let raw = LittleEndian::read_f32(&self.payload[start + i * 4..start + i * 4 + 4]);
            data.push(raw as f64);
        }
        FeatureSequence::new(self.dim, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_segments() -> Vec<(String, FeatureSequence)> {
        let a = FeatureSequence::new(3, vec![0.25, -1.5, 2.0, 4.0, 0.125, -0.75]).unwrap();
        let b = FeatureSequence::new(3, vec![1.0, 2.0, 3.0]).unwrap();
        vec![("w00_s0".into(), a), ("w01_s1".into(), b)]
    }

    #[test]
    fn round_trip_preserves_f32_exact_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.awef");
        let segments = sample_segments();
        write_feature_file(&path, &segments).unwrap();
        let file = read_feature_file(&path).unwrap();
        assert_eq!(file.dim(), 3);
        assert_eq!(file.len(), 2);
        assert_eq!(
            file.segment_ids().collect::<Vec<_>>(),
            vec!["w00_s0", "w01_s1"]
        );
        // All sample values are exactly representable in f32.
        for (id, seq) in &segments {
            assert_eq!(&file.get(id).unwrap(), seq);
        }
    }

    #[test]
    fn f32_quantization_is_the_only_loss() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.awef");
        let value = 0.1f64; // not f32-representable
        let seq = FeatureSequence::new(1, vec![value]).unwrap();
        write_feature_file(&path, &[("x".into(), seq)]).unwrap();
        let back = read_feature_file(&path).unwrap().get("x").unwrap();
        assert_eq!(back.data()[0], 0.1f32 as f64);
        assert_ne!(back.data()[0], value);
    }

    #[test]
    fn unknown_segment_and_bad_magic_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.awef");
        write_feature_file(&path, &sample_segments()).unwrap();
        let file = read_feature_file(&path).unwrap();
        assert!(matches!(
            file.get("missing"),
            Err(FeatureError::UnknownSegment(_))
        ));

        let bogus = dir.path().join("bogus.awef");
        std::fs::write(&bogus, b"NOPE").unwrap();
        assert!(matches!(
            read_feature_file(&bogus),
            Err(FeatureError::BadMagic)
        ));
    }

    #[test]
    fn truncated_file_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.awef");
        write_feature_file(&path, &sample_segments()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.awef");
        std::fs::write(&cut, &bytes[..bytes.len() - 9]).unwrap();
        assert!(read_feature_file(&cut).is_err());
    }

    #[test]
    fn mixed_dimensions_rejected_at_write_time() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.awef");
        let a = FeatureSequence::new(2, vec![1.0, 2.0]).unwrap();
        let b = FeatureSequence::new(3, vec![1.0, 2.0, 3.0]).unwrap();
        let err = write_feature_file(&path, &[("a".into(), a), ("b".into(), b)]);
        assert!(matches!(err, Err(FeatureError::DimensionMismatch { .. })));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.awef");
        let a = FeatureSequence::new(1, vec![1.0]).unwrap();
        let b = FeatureSequence::new(1, vec![2.0]).unwrap();
        let err = write_feature_file(&path, &[("a".into(), a), ("a".into(), b)]);
        assert!(matches!(err, Err(FeatureError::DuplicateSegment(_))));
    }
}
