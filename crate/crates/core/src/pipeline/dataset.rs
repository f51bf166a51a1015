//! Dataset assembly and the per-epoch / per-test-set views.
//!
//! The dataset keeps the noiseless, pre-threshold power of every covered
//! position. Views are generated on demand: noise first, then the detection
//! threshold, then the encoding. Training epochs and test sets draw from
//! disjoint stream families keyed by position id, so a view does not depend
//! on the order positions are stored in.

use std::fmt::Write as _;

use ndarray::Array2;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::noise::{apply_noise, NoiseModel};
use super::preprocess::{preprocess, PreprocessConfig};
use crate::error::{Error, Result};
use crate::geometry::{Point2, Rect};
use crate::propagation::TraceConfig;
use crate::radio::{Codebook, Fingerprint, FingerprintBuilder, SamplingConfig};
use crate::scene::{receiver_positions, save_scene, ReceiverGrid, Scene};
use crate::seeding::{stream, Purpose};

pub type ConfigDigest = [u8; 32];

/// Noiseless fingerprints of every covered position plus generation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    beams: usize,
    samples: usize,
    bounds: Rect,
    tx: Point2,
    digest: ConfigDigest,
    labels: Vec<[f32; 2]>,
    /// `labels.len() × beams × samples`, NaN for empty bins.
    clean: Vec<f32>,
}

/// Counts reported by [`assemble_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AssemblyStats {
    pub grid_points: usize,
    pub kept: usize,
    pub dropped_indoor: usize,
    pub dropped_no_detection: usize,
}

impl Dataset {
    pub fn from_parts(
        beams: usize,
        samples: usize,
        bounds: Rect,
        tx: Point2,
        digest: ConfigDigest,
        labels: Vec<[f32; 2]>,
        clean: Vec<f32>,
    ) -> Result<Self> {
        if beams == 0 || samples == 0 {
            return Err(Error::InvalidParameter(
                "dataset dimensions must be positive".into(),
            ));
        }
        if clean.len() != labels.len() * beams * samples {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", labels.len() * beams * samples),
                found: format!("{} values", clean.len()),
            });
        }
        Ok(Dataset {
            beams,
            samples,
            bounds,
            tx,
            digest,
            labels,
            clean,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn input_dims(&self) -> (usize, usize) {
        (self.beams, self.samples)
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn tx(&self) -> Point2 {
        self.tx
    }

    pub fn digest(&self) -> &ConfigDigest {
        &self.digest
    }

    /// BS-centered positions, meters.
    pub fn labels(&self) -> &[[f32; 2]] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Point2 {
        Point2::new(self.labels[i][0] as f64, self.labels[i][1] as f64)
    }

    pub fn clean_values(&self) -> &[f32] {
        &self.clean
    }

    pub fn fingerprint(&self, i: usize) -> Fingerprint {
        let n = self.beams * self.samples;
        Fingerprint::new(
            self.beams,
            self.samples,
            self.clean[i * n..(i + 1) * n].to_vec(),
            self.label(i),
        )
        .expect("dimensions checked at construction")
    }

    /// Stable id derived from the label bits; keys noise streams and shuffling.
    pub fn position_id(&self, i: usize) -> u64 {
        position_id(self.labels[i])
    }

    pub fn label_scaler(&self) -> LabelScaler {
        LabelScaler::for_region(self.bounds, self.tx)
    }

    /// Keeps only the positions selected by `keep`, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> Dataset {
        let n = self.beams * self.samples;
        let mut labels = Vec::new();
        let mut clean = Vec::new();
        for i in 0..self.len() {
            if keep(i) {
                labels.push(self.labels[i]);
                clean.extend_from_slice(&self.clean[i * n..(i + 1) * n]);
            }
        }
        Dataset {
            labels,
            clean,
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Dataset {
        Dataset {
            beams: self.beams,
            samples: self.samples,
            bounds: self.bounds,
            tx: self.tx,
            digest: self.digest,
            labels: Vec::new(),
            clean: Vec::new(),
        }
    }
}

pub fn position_id(label: [f32; 2]) -> u64 {
    ((label[0].to_bits() as u64) << 32) | label[1].to_bits() as u64
}

/// Affine map between BS-centered meters and `[-1, 1]²` over the scene bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelScaler {
    pub center: Point2,
    pub half_extent: Point2,
}

impl LabelScaler {
    pub fn for_region(bounds: Rect, tx: Point2) -> Self {
        LabelScaler {
            center: bounds.center() - tx,
            half_extent: Point2::new(bounds.width() / 2.0, bounds.height() / 2.0),
        }
    }

    pub fn normalize(&self, p: Point2) -> Point2 {
        Point2::new(
            (p.x - self.center.x) / self.half_extent.x,
            (p.y - self.center.y) / self.half_extent.y,
        )
    }

    pub fn denormalize(&self, q: Point2) -> Point2 {
        Point2::new(
            q.x * self.half_extent.x + self.center.x,
            q.y * self.half_extent.y + self.center.y,
        )
    }
}

/// SHA-256 over a canonical text rendering of every generation input.
pub fn config_digest(
    scene: &Scene,
    grid: &ReceiverGrid,
    codebook: &Codebook,
    trace_cfg: &TraceConfig,
    sampling: &SamplingConfig,
) -> ConfigDigest {
    let mut text = save_scene(scene);
    let _ = writeln!(
        text,
        "grid {} {} {} {} {}",
        grid.origin.x, grid.origin.y, grid.spacing, grid.nx, grid.ny
    );
    for e in codebook.entries() {
        let _ = writeln!(
            text,
            "beam {} {} {} {}",
            e.boresight_azimuth, e.peak_gain, e.hpbw, e.sidelobe_floor
        );
    }
    let _ = writeln!(
        text,
        "trace {} {} {}",
        trace_cfg.carrier_frequency, trace_cfg.max_bounces, trace_cfg.reflection_loss
    );
    let _ = writeln!(
        text,
        "sampling {} {} {} {} {}",
        sampling.sample_period,
        sampling.samples_per_beam,
        sampling.tx_power,
        sampling.rx_gain,
        sampling.detection_threshold
    );
    Sha256::digest(text.as_bytes()).into()
}

/// Noiseless fingerprints for every grid position with at least one
/// entry at or above the detection threshold.
pub fn assemble_dataset(
    scene: &Scene,
    grid: &ReceiverGrid,
    codebook: &Codebook,
    trace_cfg: &TraceConfig,
    sampling: &SamplingConfig,
) -> Result<(Dataset, AssemblyStats)> {
    grid.check_inside(scene.bounds())?;
    let builder = FingerprintBuilder::new(scene, codebook.clone(), *trace_cfg, *sampling)?;
    let points = receiver_positions(scene, grid);
    let threshold = sampling.detection_threshold;

    let observed: Vec<Option<Fingerprint>> = points
        .par_iter()
        .map(|&(p, indoor)| {
            if indoor {
                return None;
            }
            let obs = builder.build(p);
            let covered = obs
                .fingerprint
                .values()
                .iter()
                .any(|v| !v.is_nan() && *v as f64 >= threshold);
            covered.then_some(obs.fingerprint)
        })
        .collect();

    let mut stats = AssemblyStats {
        grid_points: points.len(),
        ..Default::default()
    };
    let (beams, samples) = (codebook.len(), sampling.samples_per_beam);
    let mut labels = Vec::new();
    let mut clean = Vec::new();
    for ((_, indoor), fp) in points.iter().zip(observed) {
        match fp {
            Some(fp) => {
                labels.push([fp.label.x as f32, fp.label.y as f32]);
                clean.extend_from_slice(fp.values());
                stats.kept += 1;
            }
            None if *indoor => stats.dropped_indoor += 1,
            None => stats.dropped_no_detection += 1,
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let digest = config_digest(scene, grid, codebook, trace_cfg, sampling);
    let ds = Dataset::from_parts(
        beams,
        samples,
        scene.bounds(),
        scene.tx_position(),
        digest,
        labels,
        clean,
    )?;
    Ok((ds, stats))
}

/// Encoded inputs and normalized labels for one pass over the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    /// `positions × (beams·samples)`, row-major per position.
    pub inputs: Array2<f32>,
    /// `positions × 2`, scaled to `[-1, 1]`.
    pub labels: Array2<f32>,
}

impl View {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Non-zero entries in one input row.
    pub fn detection_count(&self, i: usize) -> usize {
        self.inputs.row(i).iter().filter(|v| **v != 0.0).count()
    }
}

fn build_view(
    ds: &Dataset,
    noise: &NoiseModel,
    prep: &PreprocessConfig,
    purpose: Purpose,
    index: u64,
) -> Result<View> {
    prep.validate()?;
    let width = ds.beams * ds.samples;
    let scaler = ds.label_scaler();
    let rows: Vec<Vec<f32>> = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(noise.seed, purpose, index, ds.position_id(i));
            let noisy = apply_noise(&ds.fingerprint(i), noise, &mut rng);
            preprocess(&noisy, prep).map(|fp| fp.to_dense())
        })
        .collect::<Result<_>>()?;
    let mut inputs = Array2::<f32>::zeros((ds.len(), width));
    let mut labels = Array2::<f32>::zeros((ds.len(), 2));
    for (i, row) in rows.into_iter().enumerate() {
        inputs
            .row_mut(i)
            .as_slice_mut()
            .unwrap()
            .copy_from_slice(&row);
        let q = scaler.normalize(ds.label(i));
        labels[[i, 0]] = q.x as f32;
        labels[[i, 1]] = q.y as f32;
    }
    Ok(View { inputs, labels })
}

/// Fresh noisy training view for `epoch`. Positions whose noisy
/// fingerprint falls entirely below threshold are kept with an all-zero input.
pub fn epoch_view(
    ds: &Dataset,
    noise: &NoiseModel,
    prep: &PreprocessConfig,
    epoch: u64,
) -> Result<View> {
    build_view(ds, noise, prep, Purpose::TrainNoise, epoch)
}

/// Test view `index` on a stream family disjoint from training.
pub fn test_view(
    ds: &Dataset,
    noise: &NoiseModel,
    prep: &PreprocessConfig,
    index: u64,
) -> Result<View> {
    build_view(ds, noise, prep, Purpose::TestNoise, index)
}

/// `count` independent test views on a stream family disjoint from training.
pub fn test_views(
    ds: &Dataset,
    noise: &NoiseModel,
    prep: &PreprocessConfig,
    count: usize,
) -> Result<Vec<View>> {
    if count == 0 {
        return Err(Error::InvalidParameter(
            "test view count must be >= 1".into(),
        ));
    }
    (0..count as u64)
        .map(|t| test_view(ds, noise, prep, t))
        .collect()
}
