//! Run configuration: line-oriented `section.key = value` text.
//!
//! ```text
//! # comments start with '#'
//! master_seed = 7
//! scene.side = 200
//! noise.sigma = 6
//! preprocess.mode = binary
//! ```
//!
//! Unknown keys are rejected. Seeds that are not set explicitly are derived
//! from `master_seed`. [`RunConfig::to_text`] writes every resolved value, so
//! running from an echoed file reproduces the original run.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::learner::{AdamConfig, ConvSpec, NetworkSpec, TrainConfig};
use crate::pipeline::{InputMode, NoiseModel, Normalization, PreprocessConfig};
use crate::propagation::TraceConfig;
use crate::radio::{build_codebook, AntennaPattern, Codebook, SamplingConfig};
use crate::scene::{generate_manhattan_scene, load_scene, ManhattanParams, ReceiverGrid, Scene};
use crate::seeding::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub enum SceneSource {
    File(PathBuf),
    Generate(ManhattanParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodebookSettings {
    pub center_azimuth: f64,
    pub arc: f64,
    pub step: f64,
    pub pattern: AntennaPattern,
}

impl Default for CodebookSettings {
    /// 32 beams over a 155° arc in 5° steps, centered on +y.
    fn default() -> Self {
        CodebookSettings {
            center_azimuth: 90.0,
            arc: 155.0,
            step: 5.0,
            pattern: AntennaPattern::HORN,
        }
    }
}

impl CodebookSettings {
    pub fn build(&self) -> Result<Codebook> {
        build_codebook(self.center_azimuth, self.arc, self.step, self.pattern)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub test_sets: usize,
    pub bin_width: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            test_sets: 10,
            bin_width: crate::eval::DEFAULT_BIN_WIDTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub scene: SceneSource,
    pub scene_seed: Option<u64>,
    pub grid_spacing: f64,
    pub carrier_frequency: f64,
    pub max_bounces: usize,
    /// Overrides the scene's default reflection loss when set.
    pub reflection_loss: Option<f64>,
    pub codebook: CodebookSettings,
    pub sampling: SamplingConfig,
    pub noise_sigma: f64,
    pub noise_seed: Option<u64>,
    pub preprocess: PreprocessConfig,
    pub network: NetworkSpec,
    pub train: TrainConfig,
    pub train_seed: Option<u64>,
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 0,
            output_dir: PathBuf::from("out"),
            scene: SceneSource::Generate(ManhattanParams {
                side: 200.0,
                block: 30.0,
                street: 20.0,
                jitter: 0.1,
            }),
            scene_seed: None,
            grid_spacing: 2.0,
            carrier_frequency: TraceConfig::default().carrier_frequency,
            max_bounces: TraceConfig::default().max_bounces,
            reflection_loss: None,
            codebook: CodebookSettings::default(),
            sampling: SamplingConfig::default(),
            noise_sigma: 0.0,
            noise_seed: None,
            preprocess: PreprocessConfig::default(),
            network: NetworkSpec::default(),
            train: TrainConfig::default(),
            train_seed: None,
            eval: EvalSettings::default(),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: cannot parse {value:?} as a number"))
}

fn flag(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("{key}: expected true or false, found {value:?}")),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut threshold_set = (false, false);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "sampling.threshold" => threshold_set.0 = true,
                "preprocess.threshold" => threshold_set.1 = true,
                _ => {}
            }
            cfg.set(key, value)
                .map_err(|m| Error::Config(format!("line {}: {m}", i + 1)))?;
        }
        // a single threshold key drives both stages
        if threshold_set.0 && !threshold_set.1 {
            cfg.preprocess.detection_threshold = cfg.sampling.detection_threshold;
        } else if threshold_set.1 && !threshold_set.0 {
            cfg.sampling.detection_threshold = cfg.preprocess.detection_threshold;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// Sets one key. Used by the parser and for command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let gen = |cfg: &mut RunConfig| -> std::result::Result<ManhattanParams, String> {
            match &cfg.scene {
                SceneSource::Generate(p) => Ok(*p),
                SceneSource::File(_) => Err(format!(
                    "{key}: scene.file is set, generator keys do not apply"
                )),
            }
        };
        match key {
            "master_seed" => self.master_seed = num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "scene.file" => self.scene = SceneSource::File(PathBuf::from(value)),
            "scene.seed" => self.scene_seed = Some(num(key, value)?),
            "scene.side" | "scene.block" | "scene.street" | "scene.jitter" => {
                let mut p = gen(self)?;
                let v = num(key, value)?;
                match key {
                    "scene.side" => p.side = v,
                    "scene.block" => p.block = v,
                    "scene.street" => p.street = v,
                    _ => p.jitter = v,
                }
                self.scene = SceneSource::Generate(p);
            }
            "grid.spacing" => self.grid_spacing = num(key, value)?,
            "trace.carrier_frequency" => self.carrier_frequency = num(key, value)?,
            "trace.max_bounces" => self.max_bounces = num(key, value)?,
            "trace.reflection_loss" => {
                self.reflection_loss = if value == "scene" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "radio.center_azimuth" => self.codebook.center_azimuth = num(key, value)?,
            "radio.arc" => self.codebook.arc = num(key, value)?,
            "radio.step" => self.codebook.step = num(key, value)?,
            "radio.peak_gain" => self.codebook.pattern.peak_gain = num(key, value)?,
            "radio.hpbw" => self.codebook.pattern.hpbw = num(key, value)?,
            "radio.sidelobe_floor" => self.codebook.pattern.sidelobe_floor = num(key, value)?,
            "sampling.period" => self.sampling.sample_period = num(key, value)?,
            "sampling.samples" => self.sampling.samples_per_beam = num(key, value)?,
            "sampling.tx_power" => self.sampling.tx_power = num(key, value)?,
            "sampling.rx_gain" => self.sampling.rx_gain = num(key, value)?,
            "sampling.threshold" => self.sampling.detection_threshold = num(key, value)?,
            "noise.sigma" => self.noise_sigma = num(key, value)?,
            "noise.seed" => self.noise_seed = Some(num(key, value)?),
            "preprocess.mode" => {
                self.preprocess.mode = match value {
                    "binary" => InputMode::Binary,
                    "float" => InputMode::Float,
                    _ => return Err(format!("{key}: expected binary or float, found {value:?}")),
                }
            }
            "preprocess.normalization" => {
                self.preprocess.normalization = match value {
                    "global" => Normalization::Global,
                    "per-row" => Normalization::PerRow,
                    _ => {
                        return Err(format!(
                            "{key}: expected global or per-row, found {value:?}"
                        ))
                    }
                }
            }
            "preprocess.threshold" => self.preprocess.detection_threshold = num(key, value)?,
            "preprocess.ceiling" => self.preprocess.ceiling = num(key, value)?,
            "network.filters" => self.network.conv.filters = num(key, value)?,
            "network.kernel_rows" => self.network.conv.kernel.0 = num(key, value)?,
            "network.kernel_cols" => self.network.conv.kernel.1 = num(key, value)?,
            "network.pool_rows" => self.network.conv.pool.0 = num(key, value)?,
            "network.pool_cols" => self.network.conv.pool.1 = num(key, value)?,
            "network.transpose" => {
                if flag(key, value)? {
                    self.network = self.network.transposed();
                }
            }
            "network.hidden_layers" => self.network.hidden_layers = num(key, value)?,
            "network.hidden_width" => self.network.hidden_width = num(key, value)?,
            "network.dropout" => self.network.dropout_rate = num(key, value)?,
            "train.learning_rate" => self.train.learning_rate = num(key, value)?,
            "train.lr_decay" => self.train.lr_decay = num(key, value)?,
            "train.epochs" => self.train.epochs = num(key, value)?,
            "train.batch_size" => self.train.batch_size = num(key, value)?,
            "train.beta1" => self.train.adam.beta1 = num(key, value)?,
            "train.beta2" => self.train.adam.beta2 = num(key, value)?,
            "train.epsilon" => self.train.adam.epsilon = num(key, value)?,
            "train.seed" => self.train_seed = Some(num(key, value)?),
            "eval.test_sets" => self.eval.test_sets = num(key, value)?,
            "eval.bin_width" => self.eval.bin_width = num(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        if let SceneSource::Generate(p) = &self.scene {
            p.validate().map_err(wrap)?;
        }
        if !(self.grid_spacing > 0.0 && self.grid_spacing.is_finite()) {
            return Err(Error::Config(format!(
                "grid.spacing {} must be > 0",
                self.grid_spacing
            )));
        }
        if let Some(r) = self.reflection_loss {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Config(format!(
                    "trace.reflection_loss {r} must be >= 0"
                )));
            }
        }
        self.codebook.pattern.validate().map_err(wrap)?;
        self.codebook.build().map_err(wrap)?;
        self.sampling.validate().map_err(wrap)?;
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise.sigma {} must be >= 0",
                self.noise_sigma
            )));
        }
        if self.preprocess.detection_threshold != self.sampling.detection_threshold {
            return Err(Error::Config(format!(
                "preprocess.threshold {} differs from sampling.threshold {}",
                self.preprocess.detection_threshold, self.sampling.detection_threshold
            )));
        }
        self.preprocess.validate().map_err(wrap)?;
        self.network.validate().map_err(wrap)?;
        self.train.validate().map_err(wrap)?;
        if self.eval.test_sets == 0 || self.eval.bin_width == 0 {
            return Err(Error::Config(
                "eval.test_sets and eval.bin_width must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn scene_seed(&self) -> u64 {
        self.scene_seed
            .unwrap_or_else(|| derive_seed(self.master_seed, "scene"))
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            sigma: self.noise_sigma,
            seed: self
                .noise_seed
                .unwrap_or_else(|| derive_seed(self.master_seed, "noise")),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self
                .train_seed
                .unwrap_or_else(|| derive_seed(self.master_seed, "train")),
            ..self.train
        }
    }

    /// Loads or generates the scene. Relative scene paths resolve against `base`.
    pub fn build_scene(&self, base: &Path) -> Result<Scene> {
        match &self.scene {
            SceneSource::File(p) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::Config(format!("cannot read scene {}: {e}", path.display()))
                })?;
                load_scene(&text)
            }
            SceneSource::Generate(p) => generate_manhattan_scene(self.scene_seed(), *p),
        }
    }

    pub fn grid_for(&self, scene: &Scene) -> Result<ReceiverGrid> {
        let grid = ReceiverGrid::covering(scene.bounds(), self.grid_spacing)?;
        grid.check_inside(scene.bounds())?;
        Ok(grid)
    }

    pub fn trace_config(&self, scene: &Scene) -> TraceConfig {
        TraceConfig {
            carrier_frequency: self.carrier_frequency,
            max_bounces: self.max_bounces,
            reflection_loss: self
                .reflection_loss
                .unwrap_or(scene.default_reflection_loss()),
        }
    }

    /// Every key with its resolved value, seeds included.
    pub fn to_text(&self) -> String {
        let mut lines: Vec<(String, String)> = vec![
            ("master_seed".into(), self.master_seed.to_string()),
            ("output_dir".into(), self.output_dir.display().to_string()),
        ];
        let mut put = |k: &str, v: String| lines.push((k.to_string(), v));
        match &self.scene {
            SceneSource::File(p) => put("scene.file", p.display().to_string()),
            SceneSource::Generate(p) => {
                put("scene.seed", self.scene_seed().to_string());
                put("scene.side", p.side.to_string());
                put("scene.block", p.block.to_string());
                put("scene.street", p.street.to_string());
                put("scene.jitter", p.jitter.to_string());
            }
        }
        put("grid.spacing", self.grid_spacing.to_string());
        put(
            "trace.carrier_frequency",
            self.carrier_frequency.to_string(),
        );
        put("trace.max_bounces", self.max_bounces.to_string());
        put(
            "trace.reflection_loss",
            self.reflection_loss
                .map_or("scene".into(), |r| r.to_string()),
        );
        let c = &self.codebook;
        put("radio.center_azimuth", c.center_azimuth.to_string());
        put("radio.arc", c.arc.to_string());
        put("radio.step", c.step.to_string());
        put("radio.peak_gain", c.pattern.peak_gain.to_string());
        put("radio.hpbw", c.pattern.hpbw.to_string());
        put("radio.sidelobe_floor", c.pattern.sidelobe_floor.to_string());
        let s = &self.sampling;
        put("sampling.period", s.sample_period.to_string());
        put("sampling.samples", s.samples_per_beam.to_string());
        put("sampling.tx_power", s.tx_power.to_string());
        put("sampling.rx_gain", s.rx_gain.to_string());
        put("sampling.threshold", s.detection_threshold.to_string());
        let noise = self.noise();
        put("noise.sigma", noise.sigma.to_string());
        put("noise.seed", noise.seed.to_string());
        let p = &self.preprocess;
        put(
            "preprocess.mode",
            match p.mode {
                InputMode::Binary => "binary".into(),
                InputMode::Float => "float".into(),
            },
        );
        put(
            "preprocess.normalization",
            match p.normalization {
                Normalization::Global => "global".into(),
                Normalization::PerRow => "per-row".into(),
            },
        );
        put("preprocess.threshold", p.detection_threshold.to_string());
        put("preprocess.ceiling", p.ceiling.to_string());
        let ConvSpec {
            filters,
            kernel,
            pool,
        } = self.network.conv;
        put("network.filters", filters.to_string());
        put("network.kernel_rows", kernel.0.to_string());
        put("network.kernel_cols", kernel.1.to_string());
        put("network.pool_rows", pool.0.to_string());
        put("network.pool_cols", pool.1.to_string());
        put(
            "network.hidden_layers",
            self.network.hidden_layers.to_string(),
        );
        put(
            "network.hidden_width",
            self.network.hidden_width.to_string(),
        );
        put("network.dropout", self.network.dropout_rate.to_string());
        let t = self.train_config();
        put("train.learning_rate", t.learning_rate.to_string());
        put("train.lr_decay", t.lr_decay.to_string());
        put("train.epochs", t.epochs.to_string());
        put("train.batch_size", t.batch_size.to_string());
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
        } = t.adam;
        put("train.beta1", beta1.to_string());
        put("train.beta2", beta2.to_string());
        put("train.epsilon", epsilon.to_string());
        put("train.seed", t.seed.to_string());
        put("eval.test_sets", self.eval.test_sets.to_string());
        put("eval.bin_width", self.eval.bin_width.to_string());
        let mut out = String::from("# beamprint run config (resolved)\n");
        for (k, v) in lines {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
