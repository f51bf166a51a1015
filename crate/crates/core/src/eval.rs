//! Error statistics, CDF, detection-count bins, and spatial maps.
//!
//! Everything here is a pure function of its inputs. Reductions run in a
//! fixed order so reports are byte-stable.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::learner::{predict_view, Model};
use crate::pipeline::{test_view, Dataset, NoiseModel};
use crate::propagation::{classify_los, LosClass, TraceConfig};
use crate::radio::{Codebook, FingerprintBuilder, SamplingConfig};
use crate::scene::{ReceiverGrid, Scene};

/// Missing-value token in map CSVs.
pub const MISSING: &str = "NA";

pub const DEFAULT_BIN_WIDTH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub rmse: f64,
}

/// Euclidean distance per sample.
pub fn position_errors(predictions: &[Point2], truths: &[Point2]) -> Result<Vec<f64>> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} predictions", truths.len()),
            found: format!("{}", predictions.len()),
        });
    }
    Ok(predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| p.distance(*t))
        .collect())
}

pub fn error_stats(predictions: &[Point2], truths: &[Point2]) -> Result<ErrorStats> {
    stats_of(&position_errors(predictions, truths)?)
}

pub fn stats_of(errors: &[f64]) -> Result<ErrorStats> {
    let cdf = error_cdf(errors)?;
    let n = errors.len() as f64;
    Ok(ErrorStats {
        count: errors.len(),
        mean: errors.iter().sum::<f64>() / n,
        median: cdf.quantile(0.5),
        p95: cdf.quantile(0.95),
        rmse: (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
    })
}

/// Empirical distribution of errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCdf {
    sorted: Vec<f64>,
}

pub fn error_cdf(errors: &[f64]) -> Result<ErrorCdf> {
    if errors.is_empty() {
        return Err(Error::InvalidParameter("no errors to summarize".into()));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidParameter("errors must be finite".into()));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ErrorCdf { sorted })
}

impl ErrorCdf {
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of errors `<= x`.
    pub fn fraction_at(&self, x: f64) -> f64 {
        self.sorted.partition_point(|e| *e <= x) as f64 / self.sorted.len() as f64
    }

    /// Linear interpolation between order statistics (type 7).
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let h = (self.sorted.len() - 1) as f64 * q;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(self.sorted.len() - 1);
        self.sorted[lo] + (h - lo as f64) * (self.sorted[hi] - self.sorted[lo])
    }

    /// `(error, k/n)` for the k-th smallest error, k = 1..=n.
    pub fn table(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(k, e)| (*e, (k + 1) as f64 / n))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionBin {
    /// Inclusive detection-count range.
    pub lo: usize,
    pub hi: usize,
    pub mean_error: f64,
    pub count: usize,
}

/// Mean error grouped by non-zero input entries, in bins of `width`.
/// Empty bins are omitted.
pub fn binned_error_by_detections(
    detections: &[usize],
    errors: &[f64],
    width: usize,
) -> Result<Vec<DetectionBin>> {
    if width == 0 {
        return Err(Error::InvalidParameter("bin width must be >= 1".into()));
    }
    if detections.len() != errors.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} detection counts", errors.len()),
            found: format!("{}", detections.len()),
        });
    }
    let mut bins: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for (&d, &e) in detections.iter().zip(errors) {
        let b = bins.entry(d / width).or_default();
        b.0 += e;
        b.1 += 1;
    }
    Ok(bins
        .into_iter()
        .map(|(k, (sum, count))| DetectionBin {
            lo: k * width,
            hi: k * width + width - 1,
            mean_error: sum / count as f64,
            count,
        })
        .collect())
}

/// Mean error of samples whose detection count lies in `range`, if any.
pub fn mean_error_where(
    detections: &[usize],
    errors: &[f64],
    range: impl std::ops::RangeBounds<usize>,
) -> Option<f64> {
    let (sum, n) = detections
        .iter()
        .zip(errors)
        .filter(|(d, _)| range.contains(d))
        .fold((0.0, 0usize), |(s, n), (_, e)| (s + e, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionError {
    /// Scene coordinates.
    pub position: Point2,
    /// Mean over test views.
    pub mean_error: f64,
    pub los: Option<LosClass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub stats: ErrorStats,
    pub cdf: ErrorCdf,
    pub binned: Vec<DetectionBin>,
    pub per_position: Vec<PositionError>,
    /// Every (view, position) sample, view-major.
    pub errors: Vec<f64>,
    pub detections: Vec<usize>,
}

/// Runs `model` on `test_sets` independent noisy views of `ds`.
///
/// With a scene, each position is also classified LOS/NLOS.
pub fn evaluate(
    model: &Model,
    ds: &Dataset,
    noise: &NoiseModel,
    test_sets: usize,
    bin_width: usize,
    scene: Option<&Scene>,
) -> Result<EvalReport> {
    if model.input_dims() != ds.input_dims() {
        let (m, d) = (model.input_dims(), ds.input_dims());
        return Err(Error::DimensionMismatch {
            expected: format!("dataset of {}x{} fingerprints for this model", m.0, m.1),
            found: format!("{}x{}", d.0, d.1),
        });
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if test_sets == 0 {
        return Err(Error::InvalidParameter(
            "test view count must be >= 1".into(),
        ));
    }
    let truths: Vec<Point2> = (0..ds.len()).map(|i| ds.label(i)).collect();
    let mut errors = Vec::with_capacity(ds.len() * test_sets);
    let mut detections = Vec::with_capacity(ds.len() * test_sets);
    let mut per_sum = vec![0.0f64; ds.len()];
    for t in 0..test_sets as u64 {
        let view = test_view(ds, noise, &model.preprocess, t)?;
        let pred = predict_view(model, &view)?;
        let errs = position_errors(&pred, &truths)?;
        for (i, e) in errs.iter().enumerate() {
            per_sum[i] += e;
            detections.push(view.detection_count(i));
        }
        errors.extend(errs);
    }
    let per_position = per_sum
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let position = truths[i] + ds.tx();
            PositionError {
                position,
                mean_error: s / test_sets as f64,
                los: scene.map(|sc| classify_los(sc, position)),
            }
        })
        .collect();
    Ok(EvalReport {
        stats: stats_of(&errors)?,
        cdf: error_cdf(&errors)?,
        binned: binned_error_by_detections(&detections, &errors, bin_width)?,
        per_position,
        errors,
        detections,
    })
}

/// Mean error of always answering the centroid of the dataset's positions.
pub fn centroid_baseline_error(ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = ds.len() as f64;
    let (sx, sy) = (0..ds.len()).fold((0.0, 0.0), |(x, y), i| {
        let p = ds.label(i);
        (x + p.x, y + p.y)
    });
    let c = Point2::new(sx / n, sy / n);
    Ok((0..ds.len()).map(|i| ds.label(i).distance(c)).sum::<f64>() / n)
}

/// One value per grid point, `None` where missing.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub grid: ReceiverGrid,
    pub values: Vec<Option<f64>>,
}

impl GridMap {
    pub fn get(&self, ix: usize, iy: usize) -> Option<f64> {
        self.values[iy * self.grid.nx + ix]
    }

    /// Header line `# origin_x origin_y spacing nx ny`, then one line per
    /// grid row (increasing y) of comma-separated values with `NA` for missing.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# origin_x={} origin_y={} spacing={} nx={} ny={}",
            g.origin.x, g.origin.y, g.spacing, g.nx, g.ny
        );
        for row in self.values.chunks(g.nx) {
            let cells: Vec<String> = row
                .iter()
                .map(|v| v.map_or_else(|| MISSING.to_string(), |v| v.to_string()))
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Places per-position mean errors on `grid`; unlisted points are missing.
pub fn spatial_error_map(per_position: &[PositionError], grid: &ReceiverGrid) -> Result<GridMap> {
    let mut values = vec![None; grid.len()];
    for p in per_position {
        let k = grid.index_of(p.position).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "position ({}, {}) is not on the grid",
                p.position.x, p.position.y
            ))
        })?;
        values[k] = Some(p.mean_error);
    }
    Ok(GridMap {
        grid: *grid,
        values,
    })
}

/// Strongest noiseless entry over all beams and bins at each grid point.
pub fn coverage_map(
    scene: &Scene,
    grid: &ReceiverGrid,
    codebook: &Codebook,
    trace_cfg: &TraceConfig,
    sampling: &SamplingConfig,
) -> Result<GridMap> {
    let builder = FingerprintBuilder::new(scene, codebook.clone(), *trace_cfg, *sampling)?;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let obs = builder.build(grid.point(k % grid.nx, k / grid.nx));
            obs.fingerprint.max_power().map(|v| v as f64)
        })
        .collect();
    Ok(GridMap {
        grid: *grid,
        values,
    })
}

pub const STATS_CSV_HEADER: &str = "mean_error_m,median_error_m,p95_error_m,rmse_m";

pub fn stats_csv(s: &ErrorStats) -> String {
    format!(
        "{STATS_CSV_HEADER}\n{},{},{},{}\n",
        s.mean, s.median, s.p95, s.rmse
    )
}

pub fn cdf_csv(cdf: &ErrorCdf) -> String {
    let mut out = String::from("error_m,fraction\n");
    for (e, f) in cdf.table() {
        let _ = writeln!(out, "{e},{f}");
    }
    out
}

pub fn binned_csv(bins: &[DetectionBin]) -> String {
    let mut out = String::from("bin_lo,bin_hi,mean_error_m,count\n");
    for b in bins {
        let _ = writeln!(out, "{},{},{},{}", b.lo, b.hi, b.mean_error, b.count);
    }
    out
}

pub fn per_position_csv(rows: &[PositionError]) -> String {
    let mut out = String::from("x,y,mean_error_m,los\n");
    for r in rows {
        let los = r.los.map_or(MISSING, |l| l.as_str());
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.position.x, r.position.y, r.mean_error, los
        );
    }
    out
}
