//! Heatmap representation of 2D landmark locations.
//!
//! Ground-truth maps are peak-normalized Gaussians. Coordinates are read
//! back from the argmax pixel plus a quarter-pixel nudge toward the larger
//! neighbour on each axis.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::io::{write_atomic, IoError};

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch(format!(
                "heatmap must be non-empty, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} heatmap",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("heatmap values must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at column `u`, row `v`.
    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    fn same_shape(&self, other: &Heatmap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Writes an 8-bit binary PGM, scaling `[0, max]` to `[0, 255]`.
    pub fn write_pgm(&self, path: &Path) -> Result<(), IoError> {
        let max = self.values.iter().cloned().fold(0.0f64, f64::max);
        let mut bytes = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        bytes.extend(self.values.iter().map(|v| {
            if max > 0.0 {
                (v.max(0.0) / max * 255.0).round() as u8
            } else {
                0
            }
        }));
        write_atomic(path, &bytes)
    }
}

/// Amplitude-1 Gaussian centred at `point` (pixel-centre coordinates).
pub fn encode(point: &Vec2, width: usize, height: usize, sigma: f64) -> Result<Heatmap> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut values = Vec::with_capacity(width * height);
    for v in 0..height {
        let dy = v as f64 - point.y;
        for u in 0..width {
            let dx = u as f64 - point.x;
            values.push((-(dx * dx + dy * dy) * inv).exp());
        }
    }
    Heatmap::new(width, height, values)
}

/// Visibility-masked mean squared error, averaged over all `N` landmarks.
pub fn mse_loss(pred: &[Heatmap], truth: &[Heatmap], visibility: &[bool]) -> Result<f64> {
    if pred.len() != truth.len() || pred.len() != visibility.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predicted, {} ground-truth heatmaps, {} visibility flags",
            pred.len(),
            truth.len(),
            visibility.len()
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for ((p, t), &visible) in pred.iter().zip(truth).zip(visibility) {
        if !p.same_shape(t) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                p.width, p.height, t.width, t.height
            )));
        }
        if visible {
            total += landmark_term(p, t);
        }
    }
    Ok(total / pred.len() as f64)
}

/// Mean squared difference of one landmark's heatmaps.
pub fn landmark_term(pred: &Heatmap, truth: &Heatmap) -> f64 {
    let sum: f64 = pred
        .values
        .iter()
        .zip(&truth.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    sum / pred.values.len() as f64
}

pub fn decode(hm: &Heatmap) -> Result<Vec2> {
    let (mut best, mut best_value) = (0usize, hm.values[0]);
    let mut constant = true;
    for (i, &v) in hm.values.iter().enumerate() {
        if v != hm.values[0] {
            constant = false;
        }
        // strict comparison keeps the first (smallest-index) maximum
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    if constant {
        return Err(Error::NoPeak);
    }
    let (u, v) = (best % hm.width, best / hm.width);
    let nudge = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
        (Some(l), Some(h)) if h > l => 0.25,
        (Some(l), Some(h)) if l > h => -0.25,
        _ => 0.0,
    };
    let left = (u > 0).then(|| hm.at(u - 1, v));
    let right = (u + 1 < hm.width).then(|| hm.at(u + 1, v));
    let up = (v > 0).then(|| hm.at(u, v - 1));
    let down = (v + 1 < hm.height).then(|| hm.at(u, v + 1));
    Ok(Vec2::new(u as f64 + nudge(left, right), v as f64 + nudge(up, down)))
}

/// Elementwise mean of same-sized heatmaps.
pub fn average(hms: &[Heatmap]) -> Result<Heatmap> {
    let first = hms
        .first()
        .ok_or_else(|| Error::DimensionMismatch("cannot average zero heatmaps".into()))?;
    if let Some(bad) = hms.iter().find(|h| !h.same_shape(first)) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            first.width, first.height, bad.width, bad.height
        )));
    }
    let k = hms.len() as f64;
    let values = (0..first.values.len())
        .map(|i| hms.iter().map(|h| h.values[i]).sum::<f64>() / k)
        .collect();
    Heatmap::new(first.width, first.height, values)
}
