//! Detection thresholding and the two input encodings (binary and float).

use crate::error::{Error, Result};
use crate::radio::{Fingerprint, NO_DETECTION};

/// Smallest encoded value of a kept entry in float mode, so that a detection
/// exactly at threshold stays distinguishable from no detection (0).
pub const FLOAT_FLOOR: f32 = 0.001;

/// Default upper end of the float mapping, dBm.
pub const DEFAULT_CEILING_DBM: f64 = -30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    Binary,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Fixed dB endpoints shared by the whole dataset.
    Global,
    /// Each beam row scaled by its own strongest entry.
    PerRow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    pub mode: InputMode,
    /// dBm
    pub detection_threshold: f64,
    /// dBm, float mode only.
    pub ceiling: f64,
    pub normalization: Normalization,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            mode: InputMode::Binary,
            detection_threshold: -100.0,
            ceiling: DEFAULT_CEILING_DBM,
            normalization: Normalization::Global,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.detection_threshold.is_finite() {
            return Err(Error::InvalidParameter(
                "detection threshold must be finite".into(),
            ));
        }
        if self.mode == InputMode::Float
            && self.ceiling.partial_cmp(&self.detection_threshold)
                != Some(std::cmp::Ordering::Greater)
        {
            return Err(Error::InvalidParameter(format!(
                "ceiling {} dBm must exceed threshold {} dBm",
                self.ceiling, self.detection_threshold
            )));
        }
        Ok(())
    }
}

/// Entries below `threshold` become the no-detection marker.
pub fn apply_threshold(fp: &Fingerprint, threshold: f64) -> Fingerprint {
    let mut out = fp.clone();
    for v in out.values_mut() {
        if !v.is_nan() && (*v as f64) < threshold {
            *v = NO_DETECTION;
        }
    }
    out
}

/// Detections become 1; empty bins keep the marker (encoded as 0 in [`Fingerprint::to_dense`]).
pub fn binarize(fp: &Fingerprint) -> Fingerprint {
    let mut out = fp.clone();
    for v in out.values_mut().iter_mut().filter(|v| !v.is_nan()) {
        *v = 1.0;
    }
    out
}

/// Maps detections linearly in dB from `[threshold, ceiling]` to `[0, 1]`,
/// clipped, with kept entries floored at [`FLOAT_FLOOR`].
pub fn normalize_float(fp: &Fingerprint, threshold: f64, ceiling: f64) -> Result<Fingerprint> {
    if ceiling.partial_cmp(&threshold) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidParameter(format!(
            "ceiling {ceiling} dBm must exceed threshold {threshold} dBm"
        )));
    }
    let span = ceiling - threshold;
    let mut out = fp.clone();
    for v in out.values_mut().iter_mut().filter(|v| !v.is_nan()) {
        let x = ((*v as f64 - threshold) / span).clamp(0.0, 1.0) as f32;
        *v = x.max(FLOAT_FLOOR);
    }
    Ok(out)
}

/// Per-row alternative: each row's strongest detection maps to 1.
pub fn normalize_per_row(fp: &Fingerprint, threshold: f64) -> Fingerprint {
    let samples = fp.samples();
    let mut out = fp.clone();
    for row in out.values_mut().chunks_mut(samples) {
        let peak = row.iter().filter(|v| !v.is_nan()).copied().reduce(f32::max);
        let Some(peak) = peak else { continue };
        let span = peak as f64 - threshold;
        for v in row.iter_mut().filter(|v| !v.is_nan()) {
            let x = if span > 0.0 {
                ((*v as f64 - threshold) / span).clamp(0.0, 1.0) as f32
            } else {
                1.0
            };
            *v = x.max(FLOAT_FLOOR);
        }
    }
    out
}

/// Threshold followed by the configured encoding.
pub fn preprocess(fp: &Fingerprint, cfg: &PreprocessConfig) -> Result<Fingerprint> {
    let kept = apply_threshold(fp, cfg.detection_threshold);
    match (cfg.mode, cfg.normalization) {
        (InputMode::Binary, _) => Ok(binarize(&kept)),
        (InputMode::Float, Normalization::Global) => {
            normalize_float(&kept, cfg.detection_threshold, cfg.ceiling)
        }
        (InputMode::Float, Normalization::PerRow) => {
            Ok(normalize_per_row(&kept, cfg.detection_threshold))
        }
    }
}
