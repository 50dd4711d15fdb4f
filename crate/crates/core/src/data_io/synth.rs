//! Synthetic scenicness fields with rated, featurized samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::FeatureVector;
use crate::geomap::{BBox, OverheadSource};
use crate::metrics::stable_hash;
use crate::ratings::{round_rating, RatingHistogram, ScoreDistribution};

use super::manifest::{Manifest, ManifestRecord};
use super::FORMAT_VERSION;

/// Stencil points per axis when averaging the field over an overhead cell.
const STENCIL: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub bbox: BBox,
    pub n_bumps: usize,
    pub amplitude_range: [f64; 2],
    /// Bump standard deviations, degrees.
    pub width_range: [f64; 2],
    pub n_samples: usize,
    /// Inclusive range of ratings per sample.
    pub ratings_range: [u32; 2],
    /// Rating noise std; the mid-scale value in heteroscedastic mode.
    pub tau: f64,
    pub heteroscedastic: bool,
    /// Heteroscedastic std at the ends of the scale.
    pub tau_min: f64,
    pub ground_dim: usize,
    pub overhead_dim: usize,
    pub feature_noise: f64,
    /// Side of the square over which overhead features average the field, degrees.
    pub overhead_cell_deg: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            bbox: BBox {
                min_lat: 50.0,
                min_lon: -1.0,
                max_lat: 50.3,
                max_lon: -0.7,
            },
            n_bumps: 5,
            amplitude_range: [-4.0, 4.0],
            width_range: [0.02, 0.06],
            n_samples: 500,
            ratings_range: [5, 15],
            tau: 1.0,
            heteroscedastic: false,
            tau_min: 0.3,
            ground_dim: 8,
            overhead_dim: 8,
            feature_noise: 0.05,
            overhead_cell_deg: 0.005,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        let ordered = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        let checks = [
            (self.n_samples >= 1, "n_samples must be >= 1"),
            (ordered(self.amplitude_range), "amplitude_range must be finite and ordered"),
            (ordered(self.width_range) && self.width_range[0] > 0.0, "width_range must be positive and ordered"),
            (
                self.ratings_range[0] >= 1 && self.ratings_range[0] <= self.ratings_range[1],
                "ratings_range must satisfy 1 <= min <= max",
            ),
            (self.tau >= 0.0 && self.tau.is_finite(), "tau must be >= 0"),
            (
                !self.heteroscedastic || (self.tau_min >= 0.0 && self.tau_min <= self.tau),
                "tau_min must lie in [0, tau]",
            ),
            (self.ground_dim >= 1 && self.overhead_dim >= 1, "feature dims must be >= 1"),
            (self.feature_noise >= 0.0 && self.feature_noise.is_finite(), "feature_noise must be >= 0"),
            (self.overhead_cell_deg > 0.0 && self.overhead_cell_deg.is_finite(), "overhead_cell_deg must be > 0"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::config(*msg)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub lat: f64,
    pub lon: f64,
    pub amplitude: f64,
    pub width: f64,
}

/// `features = weights * z + offsets`, `z = (s - 5.5) / 4.5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearEncoding {
    pub weights: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl LinearEncoding {
    fn random(dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let weights = (0..dim)
            .map(|_| {
                let m: f64 = rng.random_range(0.5..1.5);
                if rng.random_bool(0.5) { m } else { -m }
            })
            .collect();
        let offsets = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
        Self { weights, offsets }
    }

    pub fn encode(&self, score: f64, noise: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let z = (score - 5.5) / 4.5;
        self.weights
            .iter()
            .zip(&self.offsets)
            .map(|(w, b)| {
                let e: f64 = rng.sample(StandardNormal);
                w * z + b + noise * e
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// The generating truth behind a synthetic manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthField {
    pub format_version: u64,
    pub kind: String,
    pub spec: SynthSpec,
    pub bumps: Vec<Bump>,
    pub ground_encoding: LinearEncoding,
    pub overhead_encoding: LinearEncoding,
}

pub const FIELD_KIND: &str = "synth_field";

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl SynthField {
    /// `s = 1 + 9 sigmoid(sum_j a_j exp(-|x - c_j|^2 / 2 w_j^2))`.
    pub fn scenicness(&self, lat: f64, lon: f64) -> f64 {
        let x: f64 = self
            .bumps
            .iter()
            .map(|b| {
                let d2 = (lat - b.lat).powi(2) + (lon - b.lon).powi(2);
                b.amplitude * (-d2 / (2.0 * b.width * b.width)).exp()
            })
            .sum();
        1.0 + 9.0 * sigmoid(x)
    }

    /// Rating noise std at a field value.
    pub fn tau_at(&self, score: f64) -> f64 {
        let spec = &self.spec;
        if !spec.heteroscedastic {
            return spec.tau;
        }
        let u = ((score - 5.5) / 4.5).clamp(-1.0, 1.0);
        spec.tau_min + (spec.tau - spec.tau_min) * (1.0 - u * u)
    }

    /// Distribution each rating at this location is drawn from.
    pub fn rating_distribution(&self, lat: f64, lon: f64) -> Result<ScoreDistribution> {
        let s = self.scenicness(lat, lon);
        ScoreDistribution::discretized_normal(s, self.tau_at(s))
    }

    /// Mean of the field over the overhead cell centered at the location.
    pub fn local_mean(&self, lat: f64, lon: f64) -> f64 {
        let cell = self.spec.overhead_cell_deg;
        let offset = |i: usize| ((i as f64 + 0.5) / STENCIL as f64 - 0.5) * cell;
        let mut sum = 0.0;
        for i in 0..STENCIL {
            for j in 0..STENCIL {
                sum += self.scenicness(lat + offset(i), lon + offset(j));
            }
        }
        sum / (STENCIL * STENCIL) as f64
    }

    /// Overhead features; noise is seeded by the location so repeated
    /// queries agree.
    pub fn overhead_features(&self, lat: f64, lon: f64) -> FeatureVector {
        let mut key = Vec::with_capacity(24);
        key.extend_from_slice(&self.spec.seed.to_le_bytes());
        key.extend_from_slice(&lat.to_bits().to_le_bytes());
        key.extend_from_slice(&lon.to_bits().to_le_bytes());
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&key));
        let v = self
            .overhead_encoding
            .encode(self.local_mean(lat, lon), self.spec.feature_noise, &mut rng);
        FeatureVector::new(v).expect("finite encoding")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("field serializes") + "\n"
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Corrupt(e.to_string()))?;
        super::check_version(&value)?;
        let field: SynthField = serde_json::from_value(value).map_err(|e| Error::Corrupt(e.to_string()))?;
        if field.kind != FIELD_KIND {
            return Err(Error::Corrupt(format!("expected kind {FIELD_KIND:?}, found {:?}", field.kind)));
        }
        field.spec.validate()?;
        Ok(field)
    }
}

impl OverheadSource for SynthField {
    fn features_at(&self, lat: f64, lon: f64, _cell_deg: f64) -> Option<FeatureVector> {
        Some(self.overhead_features(lat, lon))
    }
}

/// Draws the field, sample locations, ratings and features from `spec.seed`.
pub fn synth_generate(spec: &SynthSpec) -> Result<(Manifest, SynthField)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let b = spec.bbox;
    let uniform = |rng: &mut ChaCha8Rng, r: [f64; 2]| if r[0] == r[1] { r[0] } else { rng.random_range(r[0]..r[1]) };
    let bumps = (0..spec.n_bumps)
        .map(|_| Bump {
            lat: uniform(&mut rng, [b.min_lat, b.max_lat]),
            lon: uniform(&mut rng, [b.min_lon, b.max_lon]),
            amplitude: uniform(&mut rng, spec.amplitude_range),
            width: uniform(&mut rng, spec.width_range),
        })
        .collect();
    let field = SynthField {
        format_version: FORMAT_VERSION,
        kind: FIELD_KIND.to_string(),
        spec: spec.clone(),
        bumps,
        ground_encoding: LinearEncoding::random(spec.ground_dim, &mut rng),
        overhead_encoding: LinearEncoding::random(spec.overhead_dim, &mut rng),
    };
    let width = (spec.n_samples - 1).to_string().len().max(4);
    let mut records = Vec::with_capacity(spec.n_samples);
    for i in 0..spec.n_samples {
        let lat = uniform(&mut rng, [b.min_lat, b.max_lat]);
        let lon = uniform(&mut rng, [b.min_lon, b.max_lon]);
        let s = field.scenicness(lat, lon);
        let tau = field.tau_at(s);
        let v = rng.random_range(spec.ratings_range[0]..=spec.ratings_range[1]);
        let ratings: Vec<u8> = (0..v)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                round_rating(s + tau * z)
            })
            .collect();
        let ground = field.ground_encoding.encode(s, spec.feature_noise, &mut rng);
        records.push(ManifestRecord {
            id: format!("s{i:0width$}"),
            lat,
            lon,
            ratings: RatingHistogram::from_ratings(&ratings)?,
            ground_image: None,
            overhead_image: None,
            ground_features: Some(ground),
            overhead_features: Some(field.overhead_features(lat, lon).into_inner()),
        });
    }
    Ok((Manifest::new(records)?, field))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SynthSpec {
        SynthSpec {
            n_samples: 60,
            seed: 11,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn deterministic_from_seed() {
        let (a, fa) = synth_generate(&spec()).unwrap();
        let (b, fb) = synth_generate(&spec()).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        assert_eq!(fa, fb);
        let (c, _) = synth_generate(&SynthSpec { seed: 12, ..spec() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_ratings_equal_rounded_field() {
        let (m, f) = synth_generate(&SynthSpec { tau: 0.0, ..spec() }).unwrap();
        for r in &m.records {
            let want = round_rating(f.scenicness(r.lat, r.lon));
            assert!(r.ratings.to_ratings().iter().all(|&x| x == want));
        }
    }

    #[test]
    fn no_bumps_is_constant() {
        let (m, f) = synth_generate(&SynthSpec { n_bumps: 0, tau: 0.0, ..spec() }).unwrap();
        assert!(m.records.iter().all(|r| f.scenicness(r.lat, r.lon) == 5.5));
        assert!(m.records.iter().all(|r| r.ratings.mean_rating().unwrap() == 6.0));
    }

    #[test]
    fn means_converge_to_field() {
        let s = SynthSpec {
            n_samples: 50,
            ratings_range: [1000, 1000],
            tau: 0.5,
            amplitude_range: [-2.0, 2.0],
            ..spec()
        };
        let (m, f) = synth_generate(&s).unwrap();
        for r in &m.records {
            let err = (r.ratings.mean_rating().unwrap() - f.scenicness(r.lat, r.lon)).abs();
            assert!(err < 0.1, "{} off by {err}", r.id);
        }
    }

    #[test]
    fn heteroscedastic_tau_profile() {
        let (_, f) = synth_generate(&SynthSpec { heteroscedastic: true, tau: 2.0, tau_min: 0.5, ..spec() }).unwrap();
        assert_eq!(f.tau_at(5.5), 2.0);
        assert_eq!(f.tau_at(1.0), 0.5);
        assert_eq!(f.tau_at(10.0), 0.5);
        assert!(f.tau_at(3.0) > f.tau_at(2.0));
    }

    #[test]
    fn overhead_features_are_repeatable_and_match_manifest() {
        let (m, f) = synth_generate(&spec()).unwrap();
        let r = &m.records[7];
        assert_eq!(f.overhead_features(r.lat, r.lon).as_slice(), r.overhead_features.as_deref().unwrap());
        assert_eq!(r.ground_features.as_ref().unwrap().len(), 8);
    }

    #[test]
    fn field_json_round_trip() {
        let (_, f) = synth_generate(&spec()).unwrap();
        assert_eq!(SynthField::from_json_str(&f.to_json_string()).unwrap(), f);
        assert!(matches!(SynthField::from_json_str("{"), Err(Error::Corrupt(_))));
    }

    #[test]
    fn invalid_specs() {
        for bad in [
            SynthSpec { n_samples: 0, ..spec() },
            SynthSpec { tau: -1.0, ..spec() },
            SynthSpec { ratings_range: [0, 3], ..spec() },
            SynthSpec { width_range: [0.0, 0.1], ..spec() },
        ] {
            assert!(matches!(synth_generate(&bad), Err(Error::InvalidConfig(_))));
        }
    }
}
