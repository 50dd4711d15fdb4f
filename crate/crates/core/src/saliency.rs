//! Occlusion saliency: slide a gray mask over a lattice of image cells and
//! record how much the scorer's prediction moves.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::{Featurizer, ImageGrid, MID_GRAY};
use crate::ratings::ScoreDistribution;
use crate::scorer::ScorerModel;

/// How a masked prediction is compared with the unmasked one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaliencyMetric {
    /// `|p_masked(l*) - p(l*)|` for the unmasked argmax label `l*`.
    ArgmaxProbability,
    /// Total-variation distance between the two distributions.
    TotalVariation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaliencyConfig {
    /// Cells along the shorter image side.
    pub lattice: u32,
    /// Mask side, in cells.
    pub mask_cells: u32,
    /// Window step, in cells.
    pub stride_cells: u32,
    pub fill: [u8; 3],
    pub metric: SaliencyMetric,
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        Self {
            lattice: 32,
            mask_cells: 7,
            stride_cells: 1,
            fill: MID_GRAY,
            metric: SaliencyMetric::ArgmaxProbability,
        }
    }
}

/// Per-cell saliency over the image lattice, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub rows: u32,
    pub cols: u32,
    pub image_width: u32,
    pub image_height: u32,
    pub mask_cells: u32,
    pub stride_cells: u32,
    /// Label whose probability is tracked.
    pub target_label: u8,
    /// Maximum prediction change over windows covering each cell.
    pub raw: Vec<f64>,
    /// `raw` divided by its maximum (all zeros when every change is zero).
    pub values: Vec<f64>,
}

impl SaliencyMap {
    pub fn value(&self, row: u32, col: u32) -> f64 {
        self.values[(row * self.cols + col) as usize]
    }

    /// First (row-major) cell holding the maximum value.
    pub fn argmax(&self) -> (u32, u32) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best as u32 / self.cols, best as u32 % self.cols)
    }

    /// Grayscale PNG at image resolution.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes = self.upsample(|v| (v * 255.0).round() as u8);
        save_gray(path, self.image_width, self.image_height, bytes)
    }

    fn upsample(&self, f: impl Fn(f64) -> u8) -> Vec<u8> {
        let (w, h) = (self.image_width as u64, self.image_height as u64);
        let mut out = Vec::with_capacity((w * h) as usize);
        for y in 0..h {
            let r = (y * self.rows as u64 / h) as u32;
            for x in 0..w {
                let c = (x * self.cols as u64 / w) as u32;
                out.push(f(self.value(r, c)));
            }
        }
        out
    }
}

/// Thresholded saliency map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask {
    pub rows: u32,
    pub cols: u32,
    pub cells: Vec<bool>,
}

impl BinaryMask {
    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Black/white PNG, scaled to `width x height`.
    pub fn save_png(&self, path: &Path, width: u32, height: u32) -> Result<()> {
        let (w, h) = (width as u64, height as u64);
        let mut bytes = Vec::with_capacity((w * h) as usize);
        for y in 0..h {
            let r = y * self.rows as u64 / h;
            for x in 0..w {
                let c = x * self.cols as u64 / w;
                bytes.push(if self.cells[(r * self.cols as u64 + c) as usize] { 255 } else { 0 });
            }
        }
        save_gray(path, width, height, bytes)
    }
}

fn save_gray(path: &Path, width: u32, height: u32, bytes: Vec<u8>) -> Result<()> {
    image::save_buffer(path, &bytes, width, height, image::ExtendedColorType::L8).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image(other.to_string()),
    })
}

/// Cells with value `>= threshold`.
pub fn binarize(map: &SaliencyMap, threshold: f64) -> BinaryMask {
    BinaryMask {
        rows: map.rows,
        cols: map.cols,
        cells: map.values.iter().map(|&v| v >= threshold).collect(),
    }
}

/// Default mask threshold.
pub const MASK_THRESHOLD: f64 = 0.6;

/// First pixel of lattice cell `c` out of `n` along a side of `len` pixels.
fn cell_start(c: u32, n: u32, len: u32) -> u32 {
    ((c as u64 * len as u64).div_ceil(n as u64)) as u32
}

fn window_starts(n: u32, mask: u32, stride: u32) -> Vec<u32> {
    let last = n - mask;
    let mut out: Vec<u32> = (0..=last).step_by(stride as usize).collect();
    if *out.last().unwrap() != last {
        out.push(last);
    }
    out
}

fn prediction_change(metric: SaliencyMetric, base: &ScoreDistribution, masked: &ScoreDistribution, label: u8) -> f64 {
    match metric {
        SaliencyMetric::ArgmaxProbability => (masked.prob(label) - base.prob(label)).abs(),
        SaliencyMetric::TotalVariation => {
            0.5 * base
                .probs()
                .iter()
                .zip(masked.probs())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        }
    }
}

/// Occlusion saliency of `image` under `model`, features from `featurizer`.
pub fn occlusion_saliency<F: Featurizer + ?Sized>(
    model: &ScorerModel,
    featurizer: &F,
    image: &ImageGrid,
    config: &SaliencyConfig,
) -> Result<SaliencyMap> {
    if config.lattice == 0 || config.mask_cells == 0 || config.stride_cells == 0 {
        return Err(Error::config("lattice, mask_cells and stride_cells must be >= 1"));
    }
    let (w, h) = (image.width(), image.height());
    let cell_px = w.min(h) as f64 / config.lattice as f64;
    let cols = ((w as f64 / cell_px).round() as u32).clamp(1, w);
    let rows = ((h as f64 / cell_px).round() as u32).clamp(1, h);
    if rows < config.mask_cells || cols < config.mask_cells {
        return Err(Error::invalid(format!(
            "{w}x{h} image gives a {cols}x{rows} cell lattice, smaller than the {m}x{m} mask",
            m = config.mask_cells
        )));
    }

    let base = model.predict_image(featurizer, image)?;
    let label = base.argmax();
    let windows: Vec<(u32, u32)> = window_starts(rows, config.mask_cells, config.stride_cells)
        .into_iter()
        .flat_map(|r| {
            window_starts(cols, config.mask_cells, config.stride_cells)
                .into_iter()
                .map(move |c| (r, c))
        })
        .collect();

    let changes = windows
        .par_iter()
        .map(|&(r, c)| {
            let mut masked = image.clone();
            masked.fill_rect(
                cell_start(c, cols, w),
                cell_start(r, rows, h),
                cell_start(c + config.mask_cells, cols, w),
                cell_start(r + config.mask_cells, rows, h),
                config.fill,
            );
            let pred = model.predict_image(featurizer, &masked)?;
            Ok(prediction_change(config.metric, &base, &pred, label))
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut raw = vec![0.0f64; (rows * cols) as usize];
    for (&(r0, c0), &delta) in windows.iter().zip(&changes) {
        for r in r0..r0 + config.mask_cells {
            for c in c0..c0 + config.mask_cells {
                let cell = &mut raw[(r * cols + c) as usize];
                *cell = cell.max(delta);
            }
        }
    }
    let max = raw.iter().copied().fold(0.0, f64::max);
    let values = raw
        .iter()
        .map(|&v| if max > 0.0 { v / max } else { 0.0 })
        .collect();
    Ok(SaliencyMap {
        rows,
        cols,
        image_width: w,
        image_height: h,
        mask_cells: config.mask_cells,
        stride_cells: config.stride_cells,
        target_label: label,
        raw,
        values,
    })
}
