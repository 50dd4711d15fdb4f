//! Versioned JSON model files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::FeaturizerSpec;
use crate::geomap::{CvhModel, OverheadInput};
use crate::mlp::{Dense, Mlp};
use crate::scorer::ScorerModel;

use super::{check_version, FORMAT_VERSION};

const ACTIVATION: &str = "tanh";

/// A model type with a JSON file representation.
pub trait ModelFormat: Sized {
    const KIND: &'static str;

    fn to_json(&self) -> serde_json::Value;

    fn from_json(value: serde_json::Value) -> Result<Self>;
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    activation: String,
    layer_dims: Vec<usize>,
    layers: Vec<Dense>,
}

impl NetworkFile {
    fn of(net: &Mlp) -> Self {
        Self {
            activation: ACTIVATION.into(),
            layer_dims: net.dims(),
            layers: net.layers().to_vec(),
        }
    }

    fn into_mlp(self) -> Result<Mlp> {
        if self.activation != ACTIVATION {
            return Err(Error::Corrupt(format!("unsupported activation {:?}", self.activation)));
        }
        if self.layer_dims.len() != self.layers.len() + 1 {
            return Err(Error::DimMismatch {
                expected: self.layer_dims.len().saturating_sub(1),
                actual: self.layers.len(),
            });
        }
        for (l, d) in self.layers.iter().zip(self.layer_dims.windows(2)) {
            for (expected, actual) in [
                (d[0], l.in_dim),
                (d[1], l.out_dim),
                (d[0] * d[1], l.weights.len()),
                (d[1], l.bias.len()),
            ] {
                if expected != actual {
                    return Err(Error::DimMismatch { expected, actual });
                }
            }
        }
        Mlp::from_layers(self.layers).map_err(|e| match e {
            e @ Error::DimMismatch { .. } => e,
            other => Error::Corrupt(other.to_string()),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ScorerFile {
    format_version: u64,
    kind: String,
    featurizer: FeaturizerSpec,
    #[serde(flatten)]
    network: NetworkFile,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum OverheadFile {
    Features { dim: usize },
    Distribution { scorer: serde_json::Value },
}

#[derive(Serialize, Deserialize)]
struct CvhFile {
    format_version: u64,
    kind: String,
    k: usize,
    sigma_deg: f64,
    l2: f64,
    overhead_input: OverheadFile,
    #[serde(flatten)]
    network: NetworkFile,
}

fn corrupt(e: serde_json::Error) -> Error {
    Error::Corrupt(e.to_string())
}

fn check_kind(found: &str, want: &str) -> Result<()> {
    if found != want {
        return Err(Error::Corrupt(format!("expected model kind {want:?}, found {found:?}")));
    }
    Ok(())
}

impl ModelFormat for ScorerModel {
    const KIND: &'static str = "scorer";

    fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ScorerFile {
            format_version: FORMAT_VERSION,
            kind: Self::KIND.into(),
            featurizer: *self.featurizer(),
            network: NetworkFile::of(self.network()),
        })
        .expect("scorer serializes")
    }

    fn from_json(value: serde_json::Value) -> Result<Self> {
        check_version(&value)?;
        let file: ScorerFile = serde_json::from_value(value).map_err(corrupt)?;
        check_kind(&file.kind, Self::KIND)?;
        file.featurizer.validate().map_err(|e| Error::Corrupt(e.to_string()))?;
        let net = file.network.into_mlp()?;
        ScorerModel::new(net, file.featurizer)
    }
}

impl ModelFormat for CvhModel {
    const KIND: &'static str = "cvh";

    fn to_json(&self) -> serde_json::Value {
        let overhead_input = match &self.overhead {
            OverheadInput::Features { dim } => OverheadFile::Features { dim: *dim },
            OverheadInput::Distribution(s) => OverheadFile::Distribution { scorer: s.to_json() },
        };
        serde_json::to_value(CvhFile {
            format_version: FORMAT_VERSION,
            kind: Self::KIND.into(),
            k: self.k,
            sigma_deg: self.sigma,
            l2: self.l2,
            overhead_input,
            network: NetworkFile::of(&self.net),
        })
        .expect("cvh serializes")
    }

    fn from_json(value: serde_json::Value) -> Result<Self> {
        check_version(&value)?;
        let file: CvhFile = serde_json::from_value(value).map_err(corrupt)?;
        check_kind(&file.kind, Self::KIND)?;
        if file.k == 0 || !(file.sigma_deg > 0.0 && file.sigma_deg.is_finite()) || !(file.l2 >= 0.0 && file.l2.is_finite()) {
            return Err(Error::Corrupt("CVH hyperparameters out of range".into()));
        }
        let overhead = match file.overhead_input {
            OverheadFile::Features { dim } => OverheadInput::Features { dim },
            OverheadFile::Distribution { scorer } => OverheadInput::Distribution(ScorerModel::from_json(scorer)?),
        };
        let model = CvhModel {
            net: file.network.into_mlp()?,
            k: file.k,
            sigma: file.sigma_deg,
            l2: file.l2,
            overhead,
        };
        model.validate()?;
        Ok(model)
    }
}

pub fn model_to_string<M: ModelFormat>(model: &M) -> String {
    serde_json::to_string_pretty(&model.to_json()).expect("json value serializes") + "\n"
}

pub fn model_from_str<M: ModelFormat>(text: &str) -> Result<M> {
    M::from_json(serde_json::from_str(text).map_err(corrupt)?)
}

pub fn save_model<M: ModelFormat>(model: &M, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model<M: ModelFormat>(path: &Path) -> Result<M> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::FeatureVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scorer() -> ScorerModel {
        ScorerModel::random(FeaturizerSpec::Passthrough { dim: 6 }, &[9, 4], 5).unwrap()
    }

    #[test]
    fn scorer_round_trip_is_bitwise() {
        let m = scorer();
        let back: ScorerModel = model_from_str(&model_to_string(&m)).unwrap();
        assert_eq!(back, m);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = FeatureVector::new((0..6).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
            assert_eq!(m.predict(&x).unwrap().probs(), back.predict(&x).unwrap().probs());
        }
    }

    #[test]
    fn cvh_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for overhead in [OverheadInput::Features { dim: 3 }, OverheadInput::Distribution(scorer())] {
            let dims = [overhead.dim() + 2 * 11, 7, 10];
            let m = CvhModel {
                net: Mlp::glorot(&dims, &mut rng).unwrap(),
                k: 2,
                sigma: 0.01,
                l2: 0.5,
                overhead,
            };
            let back: CvhModel = model_from_str(&model_to_string(&m)).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn error_kinds() {
        let text = model_to_string(&scorer());
        assert!(matches!(model_from_str::<ScorerModel>(&text[..text.len() / 2]), Err(Error::Corrupt(_))));
        let wrong = text.replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(model_from_str::<ScorerModel>(&wrong), Err(Error::Version { found: 2, expected: 1 })));
        let mut v = scorer().to_json();
        v["layer_dims"][1] = 8.into();
        assert!(matches!(ScorerModel::from_json(v), Err(Error::DimMismatch { .. })));
        let mut v = scorer().to_json();
        v["featurizer"]["dim"] = 5.into();
        assert!(matches!(ScorerModel::from_json(v), Err(Error::DimMismatch { .. })));
        assert!(matches!(model_from_str::<CvhModel>(&text), Err(Error::Corrupt(_))));
        let mut v = scorer().to_json();
        v.as_object_mut().unwrap().remove("format_version");
        assert!(matches!(ScorerModel::from_json(v), Err(Error::Corrupt(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save_model(&scorer(), &p).unwrap();
        assert_eq!(load_model::<ScorerModel>(&p).unwrap(), scorer());
        assert!(matches!(load_model::<ScorerModel>(&dir.path().join("x.json")), Err(Error::Io { .. })));
    }
}
