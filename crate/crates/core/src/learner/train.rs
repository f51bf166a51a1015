use std::ops::ControlFlow;

use ndarray::{s, Array2, Axis};

use super::adam::{Adam, AdamConfig};
use super::network::{mmse_loss, Mode, Network, NetworkSpec};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::pipeline::{
    epoch_view, preprocess, Dataset, LabelScaler, NoiseModel, PreprocessConfig, View,
};
use crate::radio::Fingerprint;
use crate::seeding::{shuffle_key, stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Multiplied into the learning rate after every epoch.
    pub lr_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Initialization, shuffling and dropout.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            lr_decay: 0.99,
            epochs: 1000,
            batch_size: 256,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate {} must be >= 0",
                self.learning_rate
            )));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lr decay {} must be in (0, 1]",
                self.lr_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        self.adam.validate()
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi(epoch as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean squared distance in normalized label units over the epoch.
    pub mean_loss: f64,
}

/// A trained regressor together with everything needed to apply it.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub network: Network<f32>,
    pub scaler: LabelScaler,
    pub preprocess: PreprocessConfig,
    pub history: Vec<EpochRecord>,
}

impl Model {
    pub fn input_dims(&self) -> (usize, usize) {
        self.network.input_dims()
    }
}

/// Visiting order for one epoch, keyed by position id so it does not depend
/// on dataset storage order.
pub fn epoch_order(ds: &Dataset, seed: u64, epoch: u64) -> Vec<usize> {
    let mut keyed: Vec<(u64, u64, usize)> = (0..ds.len())
        .map(|i| {
            let id = ds.position_id(i);
            (shuffle_key(seed, epoch, id), id, i)
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

pub fn train(
    ds: &Dataset,
    noise: &NoiseModel,
    prep: &PreprocessConfig,
    spec: NetworkSpec,
    cfg: &TrainConfig,
) -> Result<Model> {
    train_with_observer(ds, noise, prep, spec, cfg, |_, _| ControlFlow::Continue(()))
}

/// Training loop with a per-epoch callback that may stop early.
pub fn train_with_observer(
    ds: &Dataset,
    noise: &NoiseModel,
    prep: &PreprocessConfig,
    spec: NetworkSpec,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord, &Model) -> ControlFlow<()>,
) -> Result<Model> {
    cfg.validate()?;
    prep.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let network = Network::<f32>::init(spec, ds.input_dims(), cfg.seed)?;
    let mut adam = Adam::new(cfg.adam, &network);
    let mut model = Model {
        network,
        scaler: ds.label_scaler(),
        preprocess: *prep,
        history: Vec::with_capacity(cfg.epochs),
    };
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        let view = epoch_view(ds, noise, prep, epoch as u64)?;
        let order = epoch_order(ds, cfg.seed, epoch as u64);
        let mut total = 0.0f64;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = view.inputs.select(Axis(0), idx);
            let y = view.labels.select(Axis(0), idx);
            let mut rng = stream(cfg.seed, Purpose::Dropout, epoch as u64, b as u64);
            let cache = model.network.forward(x.view(), Mode::Train(&mut rng))?;
            let loss = mmse_loss(cache.output.view(), y.view());
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            total += loss * idx.len() as f64;
            let grads = model.network.backward(&cache, y.view())?;
            adam.step(&mut model.network, &grads, lr);
        }
        let record = EpochRecord {
            epoch,
            learning_rate: lr,
            mean_loss: total / ds.len() as f64,
        };
        log::debug!("epoch {epoch}: lr {lr:.3e} loss {:.6}", record.mean_loss);
        model.history.push(record);
        if observer(&record, &model).is_break() {
            break;
        }
    }
    Ok(model)
}

const PREDICT_CHUNK: usize = 1024;

/// Position estimates, in dataset label coordinates, for every row of a view.
pub fn predict_view(model: &Model, view: &View) -> Result<Vec<Point2>> {
    predict_inputs(model, view.inputs.view())
}

/// Estimates for already encoded `rows × (beams·samples)` inputs.
pub fn predict_inputs(model: &Model, inputs: ndarray::ArrayView2<f32>) -> Result<Vec<Point2>> {
    let mut out = Vec::with_capacity(inputs.nrows());
    let mut start = 0;
    while start < inputs.nrows() {
        let end = (start + PREDICT_CHUNK).min(inputs.nrows());
        let est = model.network.predict(inputs.slice(s![start..end, ..]))?;
        for row in est.outer_iter() {
            out.push(
                model
                    .scaler
                    .denormalize(Point2::new(row[0] as f64, row[1] as f64)),
            );
        }
        start = end;
    }
    Ok(out)
}

/// Estimate for one raw fingerprint (dBm, no-detection marked).
pub fn predict(model: &Model, fp: &Fingerprint) -> Result<Point2> {
    let dims = model.input_dims();
    if fp.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} fingerprint", dims.0, dims.1),
            found: format!("{}x{}", fp.beams(), fp.samples()),
        });
    }
    let encoded = preprocess(fp, &model.preprocess)?.to_dense();
    let x = Array2::from_shape_vec((1, encoded.len()), encoded).unwrap();
    Ok(predict_inputs(model, x.view())?[0])
}
