//! Transmit antenna patterns, the beamforming codebook, the link budget and
//! power-delay-profile synthesis.
//!
//! A fingerprint is a `beams × samples` grid of received power in dBm. Bins
//! with no arriving path hold the no-detection marker ([`NO_DETECTION`], a
//! NaN), which keeps "nothing arrived" distinct from any real power level.

use crate::error::{Error, Result};
use crate::geometry::{wrap_offset, Point2};
use crate::propagation::{RayPath, TraceConfig, Tracer};
use crate::scene::Scene;

/// Marker for an empty delay bin.
pub const NO_DETECTION: f32 = f32::NAN;

/// Quadratic-mainlobe pattern with a flat sidelobe floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaPattern {
    pub boresight_azimuth: f64,
    /// dBi
    pub peak_gain: f64,
    /// Half-power beamwidth, degrees.
    pub hpbw: f64,
    /// dB below peak.
    pub sidelobe_floor: f64,
}

impl AntennaPattern {
    /// 24.5 dBi horn, 10.9° HPBW, 30 dB sidelobe floor.
    pub const HORN: AntennaPattern = AntennaPattern {
        boresight_azimuth: 0.0,
        peak_gain: 24.5,
        hpbw: 10.9,
        sidelobe_floor: 30.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.hpbw > 0.0 && self.hpbw.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "hpbw {} must be > 0",
                self.hpbw
            )));
        }
        if !(self.sidelobe_floor > 0.0 && self.sidelobe_floor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sidelobe floor {} must be > 0",
                self.sidelobe_floor
            )));
        }
        if !self.peak_gain.is_finite() || !self.boresight_azimuth.is_finite() {
            return Err(Error::InvalidParameter(
                "pattern values must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn pointing(self, boresight_azimuth: f64) -> Self {
        AntennaPattern {
            boresight_azimuth,
            ..self
        }
    }
}

/// Gain toward `azimuth` (degrees): `max(peak - 12 (Δ/hpbw)², peak - floor)`.
pub fn pattern_gain(p: &AntennaPattern, azimuth: f64) -> f64 {
    let offset = wrap_offset(azimuth - p.boresight_azimuth);
    let main = p.peak_gain - 12.0 * (offset / p.hpbw).powi(2);
    main.max(p.peak_gain - p.sidelobe_floor)
}

/// Ordered transmit beams with a uniform angular step.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    entries: Vec<AntennaPattern>,
}

impl Codebook {
    pub fn entries(&self) -> &[AntennaPattern] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Beams at `center - arc/2, ..., center + arc/2` in steps of `step`.
pub fn build_codebook(
    center_azimuth: f64,
    arc: f64,
    step: f64,
    template: AntennaPattern,
) -> Result<Codebook> {
    template.validate()?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "codebook step {step} must be > 0"
        )));
    }
    if !(arc >= 0.0 && arc.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "codebook arc {arc} must be >= 0"
        )));
    }
    let ratio = arc / step;
    if (ratio - ratio.round()).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "codebook arc {arc} is not a multiple of step {step}"
        )));
    }
    let count = ratio.round() as usize + 1;
    let start = center_azimuth - arc / 2.0;
    let entries = (0..count)
        .map(|i| template.pointing(start + i as f64 * step))
        .collect();
    Ok(Codebook { entries })
}

/// Receiver-side sampling and link-budget constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    /// Seconds per sample (T).
    pub sample_period: f64,
    /// Samples per transmit beam (N).
    pub samples_per_beam: usize,
    /// dBm
    pub tx_power: f64,
    /// dBi
    pub rx_gain: f64,
    /// dBm
    pub detection_threshold: f64,
}

impl Default for SamplingConfig {
    /// 20 MHz sampling, 82 samples, 45 dBm, 10 dBi receive gain, -100 dBm threshold.
    fn default() -> Self {
        SamplingConfig {
            sample_period: 50e-9,
            samples_per_beam: 82,
            tx_power: 45.0,
            rx_gain: 10.0,
            detection_threshold: -100.0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_period > 0.0 && self.sample_period < 100e-9) {
            return Err(Error::InvalidParameter(format!(
                "sample period {} s must be in (0, 100 ns)",
                self.sample_period
            )));
        }
        if self.samples_per_beam == 0 {
            return Err(Error::InvalidParameter(
                "samples per beam must be >= 1".into(),
            ));
        }
        if !(self.tx_power.is_finite()
            && self.rx_gain.is_finite()
            && self.detection_threshold.is_finite())
        {
            return Err(Error::InvalidParameter(
                "link budget values must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Sample index for a delay; bin 0 starts at the transmission instant.
    pub fn bin_of(&self, delay: f64) -> usize {
        // tolerance keeps exact bin edges from rounding down
        ((delay / self.sample_period) + 1e-9).floor() as usize
    }
}

/// Link budget for one path through one transmit beam, in dBm.
pub fn received_power(path: &RayPath, beam: &AntennaPattern, cfg: &SamplingConfig) -> f64 {
    cfg.tx_power + pattern_gain(beam, path.departure_azimuth) + cfg.rx_gain + path.path_gain
}

fn dbm_to_mw(p: f64) -> f64 {
    10f64.powf(p / 10.0)
}

fn mw_to_dbm(p: f64) -> f64 {
    10.0 * p.log10()
}

/// Power delay profile of one beam: non-coherent sum per delay bin.
/// Empty bins hold NaN; paths past the last bin are dropped.
pub fn synthesize_pdp(paths: &[RayPath], beam: &AntennaPattern, cfg: &SamplingConfig) -> Vec<f64> {
    let mut linear = vec![0.0f64; cfg.samples_per_beam];
    let mut hit = vec![false; cfg.samples_per_beam];
    for p in paths {
        let bin = cfg.bin_of(p.delay);
        if bin >= cfg.samples_per_beam {
            continue;
        }
        linear[bin] += dbm_to_mw(received_power(p, beam, cfg));
        hit[bin] = true;
    }
    linear
        .into_iter()
        .zip(hit)
        .map(|(mw, h)| if h { mw_to_dbm(mw) } else { f64::NAN })
        .collect()
}

/// `beams × samples` received-power grid for one position.
#[derive(Debug, Clone)]
pub struct Fingerprint {
    beams: usize,
    samples: usize,
    values: Vec<f32>,
    /// Position relative to the transmitter, meters.
    pub label: Point2,
}

impl PartialEq for Fingerprint {
    /// Bitwise on values, with every NaN treated as the same marker.
    fn eq(&self, other: &Self) -> bool {
        self.beams == other.beams
            && self.samples == other.samples
            && self.label == other.label
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits())
    }
}

impl Fingerprint {
    pub fn new(beams: usize, samples: usize, values: Vec<f32>, label: Point2) -> Result<Self> {
        if values.len() != beams * samples {
            return Err(Error::DimensionMismatch {
                expected: format!("{beams}x{samples} = {} values", beams * samples),
                found: format!("{} values", values.len()),
            });
        }
        Ok(Fingerprint {
            beams,
            samples,
            values,
            label,
        })
    }

    pub fn empty(beams: usize, samples: usize, label: Point2) -> Self {
        Fingerprint {
            beams,
            samples,
            values: vec![NO_DETECTION; beams * samples],
            label,
        }
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.beams, self.samples)
    }

    /// Row-major values, NaN where nothing was detected.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn row(&self, beam: usize) -> &[f32] {
        &self.values[beam * self.samples..(beam + 1) * self.samples]
    }

    pub fn get(&self, beam: usize, sample: usize) -> Option<f32> {
        let v = self.values[beam * self.samples + sample];
        (!v.is_nan()).then_some(v)
    }

    pub fn detection_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_nan()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.detection_count() == 0
    }

    /// Strongest entry in dBm, if any.
    pub fn max_power(&self) -> Option<f32> {
        self.values
            .iter()
            .filter(|v| !v.is_nan())
            .copied()
            .reduce(f32::max)
    }

    /// Dense network input: the no-detection marker becomes 0.
    pub fn to_dense(&self) -> Vec<f32> {
        self.values
            .iter()
            .map(|v| if v.is_nan() { 0.0 } else { *v })
            .collect()
    }
}

/// A fingerprint together with whether the receiver was indoors.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub fingerprint: Fingerprint,
    pub indoor: bool,
}

/// Traces once per receiver and synthesizes every beam's profile.
#[derive(Debug, Clone)]
pub struct FingerprintBuilder<'s> {
    tracer: Tracer<'s>,
    codebook: Codebook,
    sampling: SamplingConfig,
}

impl<'s> FingerprintBuilder<'s> {
    pub fn new(
        scene: &'s Scene,
        codebook: Codebook,
        trace_cfg: TraceConfig,
        sampling: SamplingConfig,
    ) -> Result<Self> {
        sampling.validate()?;
        if codebook.is_empty() {
            return Err(Error::InvalidParameter("codebook has no entries".into()));
        }
        Ok(FingerprintBuilder {
            tracer: Tracer::new(scene, trace_cfg)?,
            codebook,
            sampling,
        })
    }

    pub fn tracer(&self) -> &Tracer<'s> {
        &self.tracer
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn sampling(&self) -> &SamplingConfig {
        &self.sampling
    }

    pub fn build(&self, rx: Point2) -> Observation {
        let tx = self.tracer.scene().tx_position();
        let label = rx - tx;
        let traced = self.tracer.trace(rx);
        let (beams, samples) = (self.codebook.len(), self.sampling.samples_per_beam);
        if traced.indoor {
            return Observation {
                fingerprint: Fingerprint::empty(beams, samples, label),
                indoor: true,
            };
        }
        let mut values = Vec::with_capacity(beams * samples);
        for beam in self.codebook.entries() {
            values.extend(
                synthesize_pdp(&traced.paths, beam, &self.sampling)
                    .into_iter()
                    .map(|v| v as f32),
            );
        }
        Observation {
            fingerprint: Fingerprint {
                beams,
                samples,
                values,
                label,
            },
            indoor: false,
        }
    }
}

/// One-shot fingerprint. Use [`FingerprintBuilder`] for many receivers.
pub fn build_fingerprint(
    scene: &Scene,
    rx: Point2,
    codebook: &Codebook,
    trace_cfg: &TraceConfig,
    cfg: &SamplingConfig,
) -> Result<Observation> {
    Ok(FingerprintBuilder::new(scene, codebook.clone(), *trace_cfg, *cfg)?.build(rx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::propagation::{free_space_loss, SPEED_OF_LIGHT};

    fn los_path(length: f64, azimuth: f64) -> RayPath {
        RayPath {
            delay: length / SPEED_OF_LIGHT,
            path_gain: -free_space_loss(length, 28e9).unwrap(),
            departure_azimuth: azimuth,
            arrival_azimuth: (azimuth + 180.0) % 360.0,
            bounces: 0,
            length,
            walls: vec![],
            reflection_points: vec![],
        }
    }

    #[test]
    fn horn_gain_points() {
        let p = AntennaPattern::HORN;
        assert_eq!(pattern_gain(&p, 0.0), 24.5);
        assert!((pattern_gain(&p, 5.45) - 21.5).abs() < 1e-12);
        assert!((pattern_gain(&p, -5.45) - 21.5).abs() < 1e-12);
        assert_eq!(pattern_gain(&p, 180.0), 24.5 - 30.0);
        // wrapping: 359° is 1° off boresight
        assert!((pattern_gain(&p, 359.0) - pattern_gain(&p, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn codebook_sizes() {
        let cb = build_codebook(90.0, 155.0, 5.0, AntennaPattern::HORN).unwrap();
        assert_eq!(cb.len(), 32);
        assert_eq!(cb.entries()[0].boresight_azimuth, 12.5);
        assert_eq!(cb.entries()[31].boresight_azimuth, 167.5);
        assert!(cb.entries().windows(2).all(|w| (w[1].boresight_azimuth
            - w[0].boresight_azimuth
            - 5.0)
            .abs()
            < 1e-12));
        let single = build_codebook(42.0, 0.0, 5.0, AntennaPattern::HORN).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.entries()[0].boresight_azimuth, 42.0);
        assert!(build_codebook(0.0, 10.0, 3.0, AntennaPattern::HORN).is_err());
        assert!(build_codebook(0.0, 10.0, 0.0, AntennaPattern::HORN).is_err());
    }

    #[test]
    fn link_budget() {
        let cfg = SamplingConfig::default();
        let path = los_path(100.0, 30.0);
        let beam = AntennaPattern::HORN.pointing(30.0);
        let p = received_power(&path, &beam, &cfg);
        // 45 + 24.5 + 10 - FSPL(100 m, 28 GHz)
        let oracle = 45.0 + 24.5 + 10.0 - free_space_loss(100.0, 28e9).unwrap();
        assert!((p - oracle).abs() < 1e-12);
        assert!((p - (-21.89)).abs() < 0.01);
        let away = AntennaPattern::HORN.pointing(210.0);
        assert!((received_power(&path, &away, &cfg) - (oracle - 30.0)).abs() < 1e-12);
        let weak = RayPath {
            path_gain: -160.0,
            ..path
        };
        assert!((received_power(&weak, &beam, &cfg) - (-80.5)).abs() < 1e-12);
    }

    #[test]
    fn pdp_binning() {
        let cfg = SamplingConfig::default();
        let beam = AntennaPattern::HORN;
        assert!(synthesize_pdp(&[], &beam, &cfg).iter().all(|v| v.is_nan()));

        let p = los_path(299.792458, 0.0);
        let pdp = synthesize_pdp(&[p], &beam, &cfg);
        assert!(!pdp[20].is_nan());
        assert_eq!(pdp.iter().filter(|v| !v.is_nan()).count(), 1);

        // two -50 dBm paths in one bin: 10 log10(2 * 1e-5 mW)
        let mut a = los_path(10.0, 0.0);
        a.path_gain = -50.0 - (45.0 + 24.5 + 10.0);
        let mut b = a.clone();
        b.delay += 1e-9;
        let pdp = synthesize_pdp(&[a, b], &beam, &cfg);
        let oracle = 10.0 * (2.0 * 10f64.powf(-5.0)).log10();
        assert!((pdp[0] - oracle).abs() < 1e-9);
        assert!((pdp[0] - (-46.99)).abs() < 0.01);

        // beyond the window
        let far = los_path(SPEED_OF_LIGHT * 82.0 * 50e-9 + 1.0, 0.0);
        assert!(synthesize_pdp(&[far], &beam, &cfg)
            .iter()
            .all(|v| v.is_nan()));
    }

    #[test]
    fn empty_scene_fingerprint() {
        let scene = Scene::new(
            Rect::new(-100.0, -100.0, 100.0, 100.0),
            vec![],
            Point2::new(0.0, 0.0),
            6.0,
        )
        .unwrap();
        let cb = build_codebook(90.0, 155.0, 5.0, AntennaPattern::HORN).unwrap();
        let obs = build_fingerprint(
            &scene,
            Point2::new(20.0, 60.0),
            &cb,
            &TraceConfig::for_scene(&scene),
            &SamplingConfig::default(),
        )
        .unwrap();
        let fp = &obs.fingerprint;
        assert_eq!(fp.values().len(), 2624);
        assert_eq!(fp.label, Point2::new(20.0, 60.0));
        let bin = SamplingConfig::default().bin_of(Point2::new(20.0, 60.0).norm() / SPEED_OF_LIGHT);
        for b in 0..32 {
            let row = fp.row(b);
            assert_eq!(row.iter().filter(|v| !v.is_nan()).count(), 1);
            assert!(!row[bin].is_nan());
        }

        let near = build_fingerprint(
            &scene,
            Point2::new(1e-3, 0.0),
            &cb,
            &TraceConfig::for_scene(&scene),
            &SamplingConfig::default(),
        )
        .unwrap();
        for b in 0..32 {
            assert!(near.fingerprint.get(b, 0).is_some());
        }
    }

    #[test]
    fn indoor_fingerprint_is_empty() {
        let scene = Scene::new(
            Rect::new(-100.0, -100.0, 100.0, 100.0),
            vec![crate::scene::Building::rectangle(10.0, 10.0, 30.0, 30.0).unwrap()],
            Point2::new(0.0, 0.0),
            6.0,
        )
        .unwrap();
        let cb = build_codebook(90.0, 10.0, 5.0, AntennaPattern::HORN).unwrap();
        let obs = build_fingerprint(
            &scene,
            Point2::new(20.0, 20.0),
            &cb,
            &TraceConfig::for_scene(&scene),
            &SamplingConfig::default(),
        )
        .unwrap();
        assert!(obs.indoor);
        assert!(obs.fingerprint.is_empty());
        assert_eq!(obs.fingerprint.values().len(), 3 * 82);
    }

    #[test]
    fn sampling_validation() {
        let bad = SamplingConfig {
            sample_period: 100e-9,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SamplingConfig {
            samples_per_beam: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(SamplingConfig::default().validate().is_ok());
    }
}
