//! Directory-based checkpoint format.
//!
//! A checkpoint is a directory holding `manifest.json` (sizes, attention
//! config, preprocessing mode, vocabulary, and the tensor order with
//! shapes) and `weights.bin`, a blob of little-endian 32-bit floats laid
//! out exactly in manifest order. Saving and loading round-trips the blob
//! bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Activation, ModelParams};
use super::{AttentionConfig, EncoderError, Vocabulary, NUM_CLASSES};
use crate::discourse::PreprocessMode;

const MANIFEST_FILE: &str = "manifest.json";
const WEIGHTS_FILE: &str = "weights.bin";
const FORMAT_VERSION: u32 = 1;

/// A trained model with everything needed to run it on new text.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub vocab: Vocabulary,
    pub config: AttentionConfig,
    /// Preprocessing the training corpus went through; evaluation input
    /// must match.
    pub preprocess_mode: PreprocessMode,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    hidden: usize,
    layers: usize,
    num_classes: usize,
    activation: Activation,
    attention: AttentionConfig,
    preprocess_mode: PreprocessMode,
    vocab: Vocabulary,
    tensors: Vec<TensorEntry>,
    weights_file: String,
}

fn io_err(path: &Path, source: std::io::Error) -> EncoderError {
    EncoderError::CheckpointIo {
        path: path.display().to_string(),
        source,
    }
}

impl Checkpoint {
    /// Write the checkpoint into `dir`, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), EncoderError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

        let tensors = self.params.named_tensors();
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            hidden: self.params.hidden(),
            layers: self.params.num_layers(),
            num_classes: NUM_CLASSES,
            activation: self.params.activation,
            attention: self.config.clone(),
            preprocess_mode: self.preprocess_mode,
            vocab: self.vocab.clone(),
            tensors: tensors
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    shape: t.shape(),
                })
                .collect(),
            weights_file: WEIGHTS_FILE.to_string(),
        };

        let manifest_path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| EncoderError::BadCheckpoint(format!("manifest serialization: {e}")))?;
        std::fs::write(&manifest_path, json).map_err(|e| io_err(&manifest_path, e))?;

        let weights_path = dir.join(WEIGHTS_FILE);
        let mut blob: Vec<u8> = Vec::new();
        for (_, tensor) in &tensors {
            for &v in tensor.as_slice() {
                blob.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        let mut file =
            std::fs::File::create(&weights_path).map_err(|e| io_err(&weights_path, e))?;
        file.write_all(&blob)
            .map_err(|e| io_err(&weights_path, e))?;
        Ok(())
    }

    /// Load a checkpoint from `dir`, validating shapes against the blob.
    pub fn load(dir: impl AsRef<Path>) -> Result<Checkpoint, EncoderError> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(MANIFEST_FILE);
        let json =
            std::fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&json)
            .map_err(|e| EncoderError::BadCheckpoint(format!("manifest parse: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(EncoderError::BadCheckpoint(format!(
                "unsupported format version {}",
                manifest.format_version
            )));
        }
        if manifest.num_classes != NUM_CLASSES {
            return Err(EncoderError::BadCheckpoint(format!(
                "checkpoint has {} classes, this build supports {NUM_CLASSES}",
                manifest.num_classes
            )));
        }

        let weights_path = dir.join(&manifest.weights_file);
        let mut blob = Vec::new();
        std::fs::File::open(&weights_path)
            .map_err(|e| io_err(&weights_path, e))?
            .read_to_end(&mut blob)
            .map_err(|e| io_err(&weights_path, e))?;

        let expected_values: usize = manifest
            .tensors
            .iter()
            .map(|t| t.shape.iter().product::<usize>())
            .sum();
        if blob.len() != expected_values * 4 {
            return Err(EncoderError::BadCheckpoint(format!(
                "weight blob holds {} bytes, manifest expects {}",
                blob.len(),
                expected_values * 4
            )));
        }

        // Build an empty parameter set of the declared sizes, then fill it
        // in manifest order.
        let vocab_size = manifest.vocab.size();
        let max_len = manifest.attention.max_len;
        let mut params = ModelParams::init(
            vocab_size,
            manifest.hidden,
            manifest.layers,
            max_len,
            manifest.activation,
            0,
        );
        {
            let mut tensors = params.named_tensors_mut();
            if tensors.len() != manifest.tensors.len() {
                return Err(EncoderError::BadCheckpoint(format!(
                    "manifest lists {} tensors, model has {}",
                    manifest.tensors.len(),
                    tensors.len()
                )));
            }
            let mut offset = 0usize;
            for (entry, (name, tensor)) in manifest.tensors.iter().zip(tensors.iter_mut()) {
                if &entry.name != name {
                    return Err(EncoderError::BadCheckpoint(format!(
                        "tensor order mismatch: manifest {:?}, model {:?}",
                        entry.name, name
                    )));
                }
                let slice = tensor.as_slice_mut();
                let declared: usize = entry.shape.iter().product();
                if declared != slice.len() {
                    return Err(EncoderError::BadCheckpoint(format!(
                        "tensor {:?} shape {:?} does not match model size {}",
                        entry.name,
                        entry.shape,
                        slice.len()
                    )));
                }
                for v in slice.iter_mut() {
                    let bytes: [u8; 4] =
                        blob[offset..offset + 4].try_into().expect("length checked");
                    *v = f32::from_le_bytes(bytes) as f64;
                    offset += 4;
                }
            }
        }

        Ok(Checkpoint {
            params,
            vocab: manifest.vocab,
            config: manifest.attention,
            preprocess_mode: manifest.preprocess_mode,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CausalCategory, Corpus, Post, SplitTag};
    use crate::encoder::build_vocab;

    fn small_checkpoint() -> Checkpoint {
        let posts = vec![Post {
            id: "p0".into(),
            text: "tired of this job and this town".into(),
            cause_detected: true,
            category: Some(CausalCategory::JobsAndCareer),
            explanation: None,
        }];
        let corpus = Corpus::new(posts, SplitTag::Train).expect("corpus");
        let vocab = build_vocab(&corpus, 1).expect("vocab");
        let config = AttentionConfig {
            max_len: 32,
            ..AttentionConfig::default()
        };
        let params = ModelParams::init(vocab.size(), 16, 2, 32, Activation::Gelu, 42);
        Checkpoint {
            params,
            vocab,
            config,
            preprocess_mode: PreprocessMode::Rda,
        }
    }

    #[test]
    fn save_load_save_is_bit_exact() {
        let dir = tempfile::tempdir().expect("tempdir");
        let first = dir.path().join("ckpt_a");
        let second = dir.path().join("ckpt_b");

        let original = small_checkpoint();
        original.save(&first).expect("save");
        let loaded = Checkpoint::load(&first).expect("load");
        loaded.save(&second).expect("save again");

        let blob_a = std::fs::read(first.join("weights.bin")).expect("read a");
        let blob_b = std::fs::read(second.join("weights.bin")).expect("read b");
        assert_eq!(blob_a, blob_b, "weight blobs differ after round trip");

        let manifest_a = std::fs::read_to_string(first.join("manifest.json")).expect("read a");
        let manifest_b = std::fs::read_to_string(second.join("manifest.json")).expect("read b");
        assert_eq!(manifest_a, manifest_b, "manifests differ after round trip");
    }

    #[test]
    fn load_preserves_metadata() {
        let dir = tempfile::tempdir().expect("tempdir");
        let original = small_checkpoint();
        original.save(dir.path()).expect("save");
        let loaded = Checkpoint::load(dir.path()).expect("load");
        assert_eq!(loaded.config, original.config);
        assert_eq!(loaded.preprocess_mode, PreprocessMode::Rda);
        assert_eq!(loaded.vocab, original.vocab);
        assert_eq!(loaded.params.hidden(), 16);
        assert_eq!(loaded.params.num_layers(), 2);
    }

    #[test]
    fn loaded_weights_match_f32_rounding() {
        let dir = tempfile::tempdir().expect("tempdir");
        let original = small_checkpoint();
        original.save(dir.path()).expect("save");
        let loaded = Checkpoint::load(dir.path()).expect("load");
        let a = original.params.named_tensors();
        let b = loaded.params.named_tensors();
        for ((name, ta), (_, tb)) in a.iter().zip(&b) {
            for (&va, &vb) in ta.as_slice().iter().zip(tb.as_slice()) {
                assert_eq!(va as f32, vb as f32, "tensor {name} diverged");
            }
        }
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let dir = tempfile::tempdir().expect("tempdir");
        small_checkpoint().save(dir.path()).expect("save");
        let weights = dir.path().join("weights.bin");
        let blob = std::fs::read(&weights).expect("read");
        std::fs::write(&weights, &blob[..blob.len() - 4]).expect("truncate");
        assert!(matches!(
            Checkpoint::load(dir.path()),
            Err(EncoderError::BadCheckpoint(_))
        ));
    }

    #[test]
    fn missing_manifest_is_an_io_error() {
        let dir = tempfile::tempdir().expect("tempdir");
        assert!(matches!(
            Checkpoint::load(dir.path()),
            Err(EncoderError::CheckpointIo { .. })
        ));
    }

    #[test]
    fn garbled_manifest_is_rejected() {
        let dir = tempfile::tempdir().expect("tempdir");
        small_checkpoint().save(dir.path()).expect("save");
        std::fs::write(dir.path().join("manifest.json"), "{not json").expect("write");
        assert!(matches!(
            Checkpoint::load(dir.path()),
            Err(EncoderError::BadCheckpoint(_))
        ));
    }
}
