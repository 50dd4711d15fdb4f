//! Dataset manifests: CSV (canonical) or JSON.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::{FeatureVector, Featurizer, ImageGrid};
use crate::geomap::{check_coordinates, GeoSample};
use crate::ratings::{RatingHistogram, LEVELS};

use super::FORMAT_VERSION;

/// CSV header, in this exact order.
pub const COLUMNS: [&str; 8] = [
    "id",
    "lat",
    "lon",
    "ratings",
    "ground_image",
    "overhead_image",
    "ground_features",
    "overhead_features",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub ratings: RatingHistogram,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overhead_image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overhead_features: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

#[derive(Serialize, Deserialize)]
struct ManifestJson {
    format_version: u64,
    records: Vec<JsonRecord>,
}

/// JSON records carry ratings as a raw list, like the CSV.
#[derive(Serialize, Deserialize)]
struct JsonRecord {
    id: String,
    lat: f64,
    lon: f64,
    ratings: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    overhead_image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    overhead_features: Option<Vec<f64>>,
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn join<T: ToString>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn ratings_histogram(id: &str, values: &[i64]) -> Result<RatingHistogram> {
    let mut counts = [0u32; LEVELS];
    for &v in values {
        if !(1..=LEVELS as i64).contains(&v) {
            return Err(Error::RatingOutOfRange { id: id.to_string(), value: v });
        }
        counts[(v - 1) as usize] += 1;
    }
    Ok(RatingHistogram::from_counts(counts))
}

fn parse_list<T: std::str::FromStr>(field: &str, line: u64, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    field
        .split(';')
        .map(|t| {
            t.trim().parse::<T>().map_err(|e| Error::Parse {
                line,
                message: format!("{what}: {t:?}: {e}"),
            })
        })
        .collect()
}

impl Manifest {
    pub fn new(records: Vec<ManifestRecord>) -> Result<Self> {
        let m = Self { records };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks the invariants; `line` in errors counts the CSV header as line 1.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        let mut ground_dim = None;
        let mut overhead_dim = None;
        for (i, r) in self.records.iter().enumerate() {
            let line = i as u64 + 2;
            if r.id.is_empty() {
                return Err(Error::MissingField { line, field: "id" });
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId { id: r.id.clone(), line });
            }
            if check_coordinates(r.lat, r.lon).is_err() || !r.lat.is_finite() || !r.lon.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("coordinates ({}, {}) out of range", r.lat, r.lon),
                });
            }
            if r.ratings.is_empty() {
                return Err(Error::MissingField { line, field: "ratings" });
            }
            if r.ground_image.is_none() && r.ground_features.is_none() {
                return Err(Error::MissingField {
                    line,
                    field: "ground_image|ground_features",
                });
            }
            for (features, dim, name) in [
                (&r.ground_features, &mut ground_dim, "ground_features"),
                (&r.overhead_features, &mut overhead_dim, "overhead_features"),
            ] {
                let Some(f) = features else { continue };
                if f.is_empty() || f.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parse {
                        line,
                        message: format!("{name} empty or non-finite"),
                    });
                }
                match *dim {
                    None => *dim = Some(f.len()),
                    Some(d) if d != f.len() => {
                        return Err(Error::Parse {
                            line,
                            message: format!("{name} has {} values, expected {d}", f.len()),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if is_json(path) {
            Self::from_json_str(&text)
        } else {
            Self::from_csv_str(&text)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let text = if is_json(path) { self.to_json_string() } else { self.to_csv_string() };
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
        if headers.iter().map(str::trim).ne(COLUMNS) {
            return Err(Error::Parse {
                line: 1,
                message: format!("header must be {}", COLUMNS.join(",")),
            });
        }
        let mut records = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = row.position().map_or(0, |p| p.line());
            let field = |i: usize| row.get(i).map(str::trim).filter(|s| !s.is_empty());
            let id = field(0).ok_or(Error::MissingField { line, field: "id" })?.to_string();
            let coord = |i: usize, name: &'static str| -> Result<f64> {
                let s = field(i).ok_or(Error::MissingField { line, field: name })?;
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    message: format!("{name}: {s:?}: {e}"),
                })
            };
            let (lat, lon) = (coord(1, "lat")?, coord(2, "lon")?);
            let raw = field(3).ok_or(Error::MissingField { line, field: "ratings" })?;
            let ratings = ratings_histogram(&id, &parse_list::<i64>(raw, line, "ratings")?)?;
            let features = |i: usize, name: &str| field(i).map(|s| parse_list::<f64>(s, line, name)).transpose();
            records.push(ManifestRecord {
                id,
                lat,
                lon,
                ratings,
                ground_image: field(4).map(PathBuf::from),
                overhead_image: field(5).map(PathBuf::from),
                ground_features: features(6, "ground_features")?,
                overhead_features: features(7, "overhead_features")?,
            });
        }
        Self::new(records)
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(COLUMNS).expect("in-memory write");
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.to_string_lossy().into_owned()).unwrap_or_default();
        let feats = |f: &Option<Vec<f64>>| f.as_ref().map(join).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.id.clone(),
                r.lat.to_string(),
                r.lon.to_string(),
                join(r.ratings.to_ratings()),
                path(&r.ground_image),
                path(&r.overhead_image),
                feats(&r.ground_features),
                feats(&r.overhead_features),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        super::check_version(&value)?;
        let parsed: ManifestJson = serde_json::from_value(value).map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        let records = parsed
            .records
            .into_iter()
            .map(|r| {
                Ok(ManifestRecord {
                    ratings: ratings_histogram(&r.id, &r.ratings)?,
                    id: r.id,
                    lat: r.lat,
                    lon: r.lon,
                    ground_image: r.ground_image,
                    overhead_image: r.overhead_image,
                    ground_features: r.ground_features,
                    overhead_features: r.overhead_features,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(records)
    }

    pub fn to_json_string(&self) -> String {
        let doc = ManifestJson {
            format_version: FORMAT_VERSION,
            records: self
                .records
                .iter()
                .map(|r| JsonRecord {
                    id: r.id.clone(),
                    lat: r.lat,
                    lon: r.lon,
                    ratings: r.ratings.to_ratings().into_iter().map(i64::from).collect(),
                    ground_image: r.ground_image.clone(),
                    overhead_image: r.overhead_image.clone(),
                    ground_features: r.ground_features.clone(),
                    overhead_features: r.overhead_features.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("manifest serializes") + "\n"
    }

    /// Resolves features for every record. Image paths are relative to
    /// `base_dir` and featurized with `featurizer`; precomputed features win.
    pub fn geo_samples(&self, featurizer: Option<&dyn Featurizer>, base_dir: &Path) -> Result<Vec<GeoSample>> {
        let resolve = |features: &Option<Vec<f64>>, image: &Option<PathBuf>| -> Result<Option<FeatureVector>> {
            if let Some(f) = features {
                return FeatureVector::new(f.clone()).map(Some);
            }
            let Some(rel) = image else { return Ok(None) };
            let f = featurizer.ok_or_else(|| Error::config("manifest references images but no image featurizer is configured"))?;
            f.featurize(&ImageGrid::load_png(&base_dir.join(rel))?).map(Some)
        };
        self.records
            .iter()
            .map(|r| {
                Ok(GeoSample {
                    id: r.id.clone(),
                    lat: r.lat,
                    lon: r.lon,
                    ratings: r.ratings,
                    ground_features: resolve(&r.ground_features, &r.ground_image)?
                        .ok_or_else(|| Error::invalid(format!("record {:?} has no ground source", r.id)))?,
                    overhead_features: resolve(&r.overhead_features, &r.overhead_image)?,
                })
            })
            .collect()
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    Manifest::load(path)
}

pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    manifest.save(path)
}
