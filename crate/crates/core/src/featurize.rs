//! Image carriers and fixed-length image descriptors.
//!
//! The default descriptor is an 11-bin color-name histogram: every pixel is
//! assigned to the nearest of eleven named RGB centroids and the assignments
//! are counted. The spatial variant repeats this per cell of a `g x g` grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum image side in pixels.
pub const MIN_SIDE: u32 = 8;

/// Number of color-name bins.
pub const COLOR_NAMES: usize = 11;

/// Color-name labels, in bin order.
pub const COLOR_NAME_LABELS: [&str; COLOR_NAMES] = [
    "black", "blue", "brown", "gray", "green", "orange", "pink", "purple", "red", "white", "yellow",
];

/// RGB centroid of each color name, in bin order.
pub const COLOR_NAME_CENTROIDS: [[u8; 3]; COLOR_NAMES] = [
    [0, 0, 0],
    [0, 0, 255],
    [139, 69, 19],
    [128, 128, 128],
    [0, 128, 0],
    [255, 165, 0],
    [255, 192, 203],
    [128, 0, 128],
    [255, 0, 0],
    [255, 255, 255],
    [255, 255, 0],
];

/// Mid-gray, used as the occlusion fill.
pub const MID_GRAY: [u8; 3] = [128, 128, 128];

/// A dense feature vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("feature vector is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature vector has a non-finite entry"));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(f: FeatureVector) -> Self {
        f.0
    }
}

/// An 8-bit RGB image, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageGrid {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl ImageGrid {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::invalid(format!(
                "image {width}x{height} is smaller than {MIN_SIDE}x{MIN_SIDE}"
            )));
        }
        if data.len() != width as usize * height as usize * 3 {
            return Err(Error::invalid("image buffer length does not match dimensions"));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let n = width as usize * height as usize;
        Self::new(width, height, rgb.repeat(n))
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    /// Fills the half-open pixel rectangle `[x0, x1) x [y0, y1)`, clipped to the image.
    pub fn fill_rect(&mut self, x0: u32, y0: u32, x1: u32, y1: u32, rgb: [u8; 3]) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.set_pixel(x, y, rgb);
            }
        }
    }

    /// Copies out the half-open pixel rectangle `[x0, x1) x [y0, y1)`.
    pub fn crop(&self, x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self> {
        if x1 > self.width || y1 > self.height || x0 >= x1 || y0 >= y1 {
            return Err(Error::invalid(format!(
                "crop [{x0},{x1})x[{y0},{y1}) outside {}x{} image",
                self.width, self.height
            )));
        }
        let w = (x1 - x0) as usize;
        let mut data = Vec::with_capacity(w * (y1 - y0) as usize * 3);
        for y in y0..y1 {
            let start = (y as usize * self.width as usize + x0 as usize) * 3;
            data.extend_from_slice(&self.data[start..start + w * 3]);
        }
        Self::new(x1 - x0, y1 - y0, data)
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::Image(format!("{}: {other}", path.display())),
            })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Self::new(w, h, img.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(path, &self.data, self.width, self.height, image::ExtendedColorType::Rgb8)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::Image(format!("{}: {other}", path.display())),
            })
    }
}

/// Nearest color-name centroid (squared RGB distance, ties to the lower index).
pub fn color_name_of(rgb: [u8; 3]) -> usize {
    let mut best = 0;
    let mut best_d = u32::MAX;
    for (i, c) in COLOR_NAME_CENTROIDS.iter().enumerate() {
        let d: u32 = rgb
            .iter()
            .zip(c)
            .map(|(&a, &b)| {
                let diff = a as i32 - b as i32;
                (diff * diff) as u32
            })
            .sum();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Anything that maps an image to a fixed-length feature vector.
pub trait Featurizer: Sync {
    fn dim(&self) -> usize;
    fn featurize(&self, image: &ImageGrid) -> Result<FeatureVector>;
}

/// Serializable featurizer configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeaturizerSpec {
    /// Global 11-bin color-name histogram.
    ColorNames,
    /// Per-cell histograms over a `grid x grid` partition, concatenated row-major.
    ColorNamesSpatial { grid: u32 },
    /// Features are supplied precomputed (manifest columns); images are not accepted.
    Passthrough { dim: usize },
}

impl FeaturizerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FeaturizerSpec::ColorNamesSpatial { grid } if !(1..=4).contains(&grid) => Err(
                Error::config(format!("spatial grid {grid} outside 1..=4")),
            ),
            FeaturizerSpec::Passthrough { dim: 0 } => Err(Error::config("passthrough dim must be > 0")),
            _ => Ok(()),
        }
    }
}

impl Featurizer for FeaturizerSpec {
    fn dim(&self) -> usize {
        match *self {
            FeaturizerSpec::ColorNames => COLOR_NAMES,
            FeaturizerSpec::ColorNamesSpatial { grid } => COLOR_NAMES * (grid * grid) as usize,
            FeaturizerSpec::Passthrough { dim } => dim,
        }
    }

    fn featurize(&self, image: &ImageGrid) -> Result<FeatureVector> {
        self.validate()?;
        match *self {
            FeaturizerSpec::ColorNames => FeatureVector::new(spatial_histogram(image, 1)),
            FeaturizerSpec::ColorNamesSpatial { grid } => FeatureVector::new(spatial_histogram(image, grid)),
            FeaturizerSpec::Passthrough { .. } => Err(Error::invalid(
                "passthrough featurizer takes precomputed features, not images",
            )),
        }
    }
}

/// Pixel `x` belongs to block `x * grid / width`.
fn spatial_histogram(image: &ImageGrid, grid: u32) -> Vec<f64> {
    let g = grid as usize;
    let (w, h) = (image.width as usize, image.height as usize);
    let mut counts = vec![0u32; COLOR_NAMES * g * g];
    for (idx, px) in image.pixels().enumerate() {
        let (x, y) = (idx % w, idx / w);
        let cell = (y * g / h) * g + x * g / w;
        counts[cell * COLOR_NAMES + color_name_of(px)] += 1;
    }
    let mut out = vec![0.0; counts.len()];
    for (cell_counts, cell_out) in counts.chunks(COLOR_NAMES).zip(out.chunks_mut(COLOR_NAMES)) {
        let n: u32 = cell_counts.iter().sum();
        for (o, &c) in cell_out.iter_mut().zip(cell_counts) {
            *o = c as f64 / n as f64;
        }
    }
    out
}
