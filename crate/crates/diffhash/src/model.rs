//! Model (de)serialization: a versioned, human-diffable JSON file whose
//! floats round-trip bit-exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::train_kernel::KernelHashModel;
use crate::train_linear::LinearHashModel;

/// Either trained model behind one encode/match surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum HashModel {
    Linear(LinearHashModel),
    Kernel(KernelHashModel),
}

impl HashModel {
    /// Hash length in bits.
    pub fn m(&self) -> usize {
        match self {
            HashModel::Linear(m) => m.m,
            HashModel::Kernel(m) => m.m,
        }
    }

    /// Expected input dimension.
    pub fn input_dim(&self) -> usize {
        match self {
            HashModel::Linear(m) => m.n,
            HashModel::Kernel(m) => m.n,
        }
    }

    pub fn thresholds(&self) -> &[f64] {
        match self {
            HashModel::Linear(m) => &m.thresholds,
            HashModel::Kernel(m) => &m.thresholds,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HashModel::Linear(m) => m.validate(),
            HashModel::Kernel(m) => m.validate(),
        }
    }
}

/// Where a model file came from. `created_at` is optional so that model
/// files stay byte-reproducible unless the caller opts in.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub input_digests: BTreeMap<String, String>,
}

pub const MODEL_FILE_VERSION: u32 = 1;

/// On-disk model container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    #[serde(flatten)]
    pub model: HashModel,
    #[serde(default, skip_serializing_if = "provenance_is_empty")]
    pub provenance: Provenance,
}

fn provenance_is_empty(p: &Provenance) -> bool {
    p.created_at.is_none() && p.input_digests.is_empty()
}

impl ModelFile {
    pub fn new(model: HashModel, provenance: Provenance) -> Self {
        ModelFile {
            version: MODEL_FILE_VERSION,
            model,
            provenance,
        }
    }
}

pub fn save_model(path: impl AsRef<Path>, file: &ModelFile) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(file)
        .map_err(|e| Error::invalid(format!("model serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))?;
    if file.version != MODEL_FILE_VERSION {
        return Err(Error::malformed(
            path,
            format!("unsupported model file version {}", file.version),
        ));
    }
    file.model.validate().map_err(|e| Error::malformed(path, e.to_string()))?;
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn linear_model() -> HashModel {
        HashModel::Linear(LinearHashModel {
            m: 2,
            n: 3,
            alpha: 25.0,
            projection: Matrix::from_rows(&[
                vec![0.1, -0.7, 1.0 / 3.0],
                vec![2.0f64.sqrt(), 0.25, -1e-17],
            ])
            .unwrap(),
            thresholds: vec![0.125, -0.6180339887498949],
        })
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let file = ModelFile::new(linear_model(), Provenance::default());
        save_model(&path, &file).unwrap();
        let loaded = load_model(&path).unwrap();
        let (HashModel::Linear(a), HashModel::Linear(b)) = (&file.model, &loaded.model) else {
            panic!("model type changed in round trip");
        };
        let bits = |xs: &[f64]| xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a.projection.data()), bits(b.projection.data()));
        assert_eq!(bits(&a.thresholds), bits(&b.thresholds));
        // Saving again is byte-identical.
        let path2 = dir.path().join("model2.json");
        save_model(&path2, &loaded).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn version_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut file = ModelFile::new(linear_model(), Provenance::default());
        file.version = 9;
        save_model(&path, &file).unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn inconsistent_arrays_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let HashModel::Linear(mut m) = linear_model() else {
            unreachable!()
        };
        m.thresholds.pop();
        let text = serde_json::json!({
            "version": 1,
            "type": "linear",
            "m": m.m, "n": m.n, "alpha": m.alpha,
            "projection": m.projection,
            "thresholds": m.thresholds,
        });
        std::fs::write(&path, text.to_string()).unwrap();
        assert!(load_model(&path).is_err());
    }
}
