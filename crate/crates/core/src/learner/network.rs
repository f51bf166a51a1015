//! Convolution + dense regressor with hand-written backpropagation.
//!
//! The input is a `beams × samples` image. One convolution layer (valid
//! padding, ReLU) is followed by non-overlapping max-pooling, a stack of
//! ReLU hidden layers with inverted dropout, and a 2-unit linear output.
//! The default orientation slides 1×3 kernels along the time axis and pools
//! 2×1 across adjacent beams; [`NetworkSpec::transposed`] swaps both.

use std::fmt::Debug;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis, LinalgScalar, ScalarOperand};
use num_traits::Float;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::seeding::{stream, Purpose};

/// Scalar type the network can run in.
pub trait Real: Float + LinalgScalar + ScalarOperand + Send + Sync + Debug + 'static {
    fn cast_from(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn cast_from(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn cast_from(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub filters: usize,
    /// (beam rows, time columns)
    pub kernel: (usize, usize),
    /// (beam rows, time columns)
    pub pool: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkSpec {
    pub conv: ConvSpec,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub dropout_rate: f64,
}

impl Default for NetworkSpec {
    /// 8 filters of 1×3, 2×1 max-pooling, 7 hidden layers of 1024, dropout 0.5.
    fn default() -> Self {
        NetworkSpec {
            conv: ConvSpec {
                filters: 8,
                kernel: (1, 3),
                pool: (2, 1),
            },
            hidden_layers: 7,
            hidden_width: 1024,
            dropout_rate: 0.5,
        }
    }
}

impl NetworkSpec {
    /// Kernel along beams and pooling along time instead.
    pub fn transposed(self) -> Self {
        let c = self.conv;
        NetworkSpec {
            conv: ConvSpec {
                kernel: (c.kernel.1, c.kernel.0),
                pool: (c.pool.1, c.pool.0),
                ..c
            },
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.conv;
        if c.filters == 0 || c.kernel.0 == 0 || c.kernel.1 == 0 || c.pool.0 == 0 || c.pool.1 == 0 {
            return Err(Error::InvalidParameter(
                "convolution sizes must be positive".into(),
            ));
        }
        if self.hidden_width == 0 && self.hidden_layers > 0 {
            return Err(Error::InvalidParameter(
                "hidden width must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidParameter(format!(
                "dropout rate {} must be in [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Convolution map size for an input of `dims`.
    pub fn conv_dims(&self, dims: (usize, usize)) -> Option<(usize, usize)> {
        let (kr, kc) = self.conv.kernel;
        (dims.0 >= kr && dims.1 >= kc).then(|| (dims.0 - kr + 1, dims.1 - kc + 1))
    }

    /// Pooled map size per filter.
    pub fn pooled_dims(&self, dims: (usize, usize)) -> Option<(usize, usize)> {
        let (cr, cc) = self.conv_dims(dims)?;
        let (pr, pc) = (cr / self.conv.pool.0, cc / self.conv.pool.1);
        (pr > 0 && pc > 0).then_some((pr, pc))
    }

    /// Width of the flattened conv output feeding the first dense layer.
    pub fn flat_features(&self, dims: (usize, usize)) -> Option<usize> {
        self.pooled_dims(dims)
            .map(|(r, c)| self.conv.filters * r * c)
    }

    /// Input width of every dense layer, followed by the output width 2.
    pub fn layer_widths(&self, dims: (usize, usize)) -> Option<Vec<usize>> {
        let mut w = vec![self.flat_features(dims)?];
        w.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        w.push(2);
        Some(w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    /// `inputs × outputs`
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

/// Every trainable tensor. Also used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    /// `filters × (kernel rows · kernel cols)`
    pub conv_weights: Array2<T>,
    pub conv_bias: Array1<T>,
    pub dense: Vec<Dense<T>>,
}

impl<T: Real> Params<T> {
    pub fn zeros_like(other: &Params<T>) -> Params<T> {
        Params {
            conv_weights: Array2::zeros(other.conv_weights.raw_dim()),
            conv_bias: Array1::zeros(other.conv_bias.raw_dim()),
            dense: other
                .dense
                .iter()
                .map(|d| Dense {
                    weights: Array2::zeros(d.weights.raw_dim()),
                    bias: Array1::zeros(d.bias.raw_dim()),
                })
                .collect(),
        }
    }

    /// Tensors in storage order: conv weights, conv bias, then weights and
    /// bias of each dense layer.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut v = vec![
            self.conv_weights.as_slice().unwrap(),
            self.conv_bias.as_slice().unwrap(),
        ];
        for d in &self.dense {
            v.push(d.weights.as_slice().unwrap());
            v.push(d.bias.as_slice().unwrap());
        }
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = vec![
            self.conv_weights.as_slice_mut().unwrap(),
            self.conv_bias.as_slice_mut().unwrap(),
        ];
        for d in &mut self.dense {
            v.push(d.weights.as_slice_mut().unwrap());
            v.push(d.bias.as_slice_mut().unwrap());
        }
        v
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            for v in t {
                *v = *v * factor;
            }
        }
    }
}

/// Forward-pass mode. Training draws dropout masks from the given stream.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut dyn RngCore),
}

/// Everything backward needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    generation: u64,
    input: Array2<T>,
    /// `batch × flat features`, post-ReLU pooled conv output.
    pooled: Array2<T>,
    /// Conv-map index of each pooled maximum.
    argmax: Vec<u32>,
    /// Post-dropout activation of each hidden layer.
    hidden: Vec<Array2<T>>,
    /// Inverted-dropout scale per hidden unit (1 in eval mode).
    masks: Vec<Array2<T>>,
    pub output: Array2<T>,
}

impl<T> Cache<T> {
    pub fn masks(&self) -> &[Array2<T>] {
        &self.masks
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    spec: NetworkSpec,
    input_dims: (usize, usize),
    params: Params<T>,
    /// Bumped on every parameter update; caches from older generations are stale.
    generation: u64,
}

impl<T: Real> Network<T> {
    /// Fan-in scaled uniform weights, zero biases, deterministic in `seed`.
    ///
    /// Layers feeding a ReLU use `U(±sqrt(6/fan_in))`; the linear output
    /// layer uses `U(±sqrt(3/fan_in))`.
    pub fn init(spec: NetworkSpec, input_dims: (usize, usize), seed: u64) -> Result<Self> {
        let mut net = Network::zeros(spec, input_dims)?;
        let fan_conv = spec.conv.kernel.0 * spec.conv.kernel.1;
        let fill = |tensor: &mut [T], fan_in: usize, gain: f64, layer: u64| {
            let bound = (gain / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).unwrap();
            let mut rng = stream(seed, Purpose::Init, layer, 0);
            for w in tensor {
                *w = T::cast_from(dist.sample(&mut rng));
            }
        };
        fill(
            net.params.conv_weights.as_slice_mut().unwrap(),
            fan_conv,
            6.0,
            0,
        );
        let last = net.params.dense.len() - 1;
        for (i, d) in net.params.dense.iter_mut().enumerate() {
            let fan_in = d.weights.nrows();
            let gain = if i == last { 3.0 } else { 6.0 };
            fill(
                d.weights.as_slice_mut().unwrap(),
                fan_in,
                gain,
                i as u64 + 1,
            );
        }
        Ok(net)
    }

    /// All parameters zero.
    pub fn zeros(spec: NetworkSpec, input_dims: (usize, usize)) -> Result<Self> {
        spec.validate()?;
        if input_dims.0 == 0 || input_dims.1 == 0 {
            return Err(Error::InvalidParameter(
                "input dimensions must be positive".into(),
            ));
        }
        let widths = spec.layer_widths(input_dims).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "input {}x{} is too small for kernel {:?} and pool {:?}",
                input_dims.0, input_dims.1, spec.conv.kernel, spec.conv.pool
            ))
        })?;
        let k = spec.conv.kernel.0 * spec.conv.kernel.1;
        let params = Params {
            conv_weights: Array2::zeros((spec.conv.filters, k)),
            conv_bias: Array1::zeros(spec.conv.filters),
            dense: widths
                .windows(2)
                .map(|w| Dense {
                    weights: Array2::zeros((w[0], w[1])),
                    bias: Array1::zeros(w[1]),
                })
                .collect(),
        };
        Ok(Network {
            spec,
            input_dims,
            params,
            generation: 0,
        })
    }

    /// Rebuilds a network from stored tensors after checking their shapes.
    pub fn from_params(
        spec: NetworkSpec,
        input_dims: (usize, usize),
        params: Params<T>,
    ) -> Result<Self> {
        let template = Network::<T>::zeros(spec, input_dims)?;
        let expected: Vec<usize> = template.params.tensors().iter().map(|t| t.len()).collect();
        let found: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        let shapes_match = template.params.dense.len() == params.dense.len()
            && template.params.conv_weights.dim() == params.conv_weights.dim()
            && template
                .params
                .dense
                .iter()
                .zip(&params.dense)
                .all(|(a, b)| a.weights.dim() == b.weights.dim() && a.bias.dim() == b.bias.dim());
        if !shapes_match || expected != found {
            return Err(Error::DimensionMismatch {
                expected: format!("tensor sizes {expected:?}"),
                found: format!("tensor sizes {found:?}"),
            });
        }
        Ok(Network {
            spec,
            input_dims,
            params,
            generation: 0,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn input_dims(&self) -> (usize, usize) {
        self.input_dims
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    /// Mutable access; invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut Params<T> {
        self.generation += 1;
        &mut self.params
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Real>(&self) -> Network<U> {
        let c1 = |a: &Array1<T>| a.mapv(|v| U::cast_from(v.as_f64()));
        let c2 = |a: &Array2<T>| a.mapv(|v| U::cast_from(v.as_f64()));
        Network {
            spec: self.spec,
            input_dims: self.input_dims,
            params: Params {
                conv_weights: c2(&self.params.conv_weights),
                conv_bias: c1(&self.params.conv_bias),
                dense: self
                    .params
                    .dense
                    .iter()
                    .map(|d| Dense {
                        weights: c2(&d.weights),
                        bias: c1(&d.bias),
                    })
                    .collect(),
            },
            generation: 0,
        }
    }

    fn check_input(&self, input: &ArrayView2<T>) -> Result<()> {
        let width = self.input_dims.0 * self.input_dims.1;
        if input.ncols() != width {
            return Err(Error::DimensionMismatch {
                expected: format!(
                    "{}x{} = {width} inputs",
                    self.input_dims.0, self.input_dims.1
                ),
                found: format!("{} inputs", input.ncols()),
            });
        }
        Ok(())
    }

    /// Convolution, ReLU and max-pooling for a batch.
    fn conv_forward(&self, input: &ArrayView2<T>) -> (Array2<T>, Vec<u32>) {
        let (rows, cols) = self.input_dims;
        let (kr, kc) = self.spec.conv.kernel;
        let (pr, pc) = self.spec.conv.pool;
        let (cr, cc) = self.spec.conv_dims(self.input_dims).unwrap();
        let (or, oc) = self.spec.pooled_dims(self.input_dims).unwrap();
        let filters = self.spec.conv.filters;
        let feat = filters * or * oc;
        let batch = input.nrows();
        let mut pooled = Array2::<T>::zeros((batch, feat));
        let mut argmax = vec![0u32; batch * feat];
        let mut map = vec![T::zero(); cr * cc];
        let w = &self.params.conv_weights;
        for (n, x) in input.outer_iter().enumerate() {
            let x = x.as_slice().expect("standard layout input");
            debug_assert_eq!(x.len(), rows * cols);
            for f in 0..filters {
                let bias = self.params.conv_bias[f];
                let wf = w.row(f);
                for r in 0..cr {
                    for c in 0..cc {
                        let mut s = bias;
                        for i in 0..kr {
                            let base = (r + i) * cols + c;
                            for j in 0..kc {
                                s = s + wf[i * kc + j] * x[base + j];
                            }
                        }
                        map[r * cc + c] = s;
                    }
                }
                for a in 0..or {
                    for b in 0..oc {
                        let mut best = T::neg_infinity();
                        let mut best_at = 0usize;
                        for i in 0..pr {
                            for j in 0..pc {
                                let at = (a * pr + i) * cc + b * pc + j;
                                if map[at] > best {
                                    best = map[at];
                                    best_at = at;
                                }
                            }
                        }
                        let k = (f * or + a) * oc + b;
                        pooled[[n, k]] = best.max(T::zero());
                        argmax[n * feat + k] = best_at as u32;
                    }
                }
            }
        }
        (pooled, argmax)
    }

    /// Batch forward pass. `input` is `batch × (beams·samples)`.
    pub fn forward(&self, input: ArrayView2<T>, mode: Mode<'_>) -> Result<Cache<T>> {
        self.check_input(&input)?;
        let keep = 1.0 - self.spec.dropout_rate;
        let (mut rng, dropout) = match mode {
            Mode::Eval => (None, false),
            Mode::Train(r) => (Some(r), self.spec.dropout_rate > 0.0),
        };
        let input = input.as_standard_layout().into_owned();
        let (pooled, argmax) = self.conv_forward(&input.view());
        let batch = input.nrows();
        let last = self.params.dense.len() - 1;
        let mut hidden = Vec::with_capacity(last);
        let mut masks = Vec::with_capacity(last);
        let mut output = None;
        for (l, d) in self.params.dense.iter().enumerate() {
            let prev = if l == 0 { &pooled } else { &hidden[l - 1] };
            let mut z = Array2::<T>::zeros((batch, d.weights.ncols()));
            z.assign(&d.bias.view().insert_axis(Axis(0)));
            general_mat_mul(T::one(), prev, &d.weights, T::one(), &mut z);
            if l == last {
                output = Some(z);
                break;
            }
            let mut mask = Array2::<T>::ones(z.raw_dim());
            if dropout {
                let rng = rng.as_mut().unwrap();
                let scale = T::cast_from(1.0 / keep);
                for m in mask.iter_mut() {
                    *m = if rng.random::<f64>() < keep {
                        scale
                    } else {
                        T::zero()
                    };
                }
            }
            z.zip_mut_with(&mask, |v, m| *v = v.max(T::zero()) * *m);
            hidden.push(z);
            masks.push(mask);
        }
        Ok(Cache {
            generation: self.generation,
            input,
            pooled,
            argmax,
            hidden,
            masks,
            output: output.unwrap(),
        })
    }

    /// Forward pass that reuses the dropout masks of an earlier cache.
    pub fn forward_with_masks(
        &self,
        input: ArrayView2<T>,
        masks: &[Array2<T>],
    ) -> Result<Cache<T>> {
        let mut cache = self.forward(input, Mode::Eval)?;
        if masks.len() != cache.masks.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} dropout masks", cache.masks.len()),
                found: format!("{}", masks.len()),
            });
        }
        // recompute the dense stack with the supplied masks
        let batch = cache.input.nrows();
        let last = self.params.dense.len() - 1;
        let mut hidden: Vec<Array2<T>> = Vec::with_capacity(last);
        for (l, d) in self.params.dense.iter().enumerate() {
            let prev = if l == 0 {
                &cache.pooled
            } else {
                &hidden[l - 1]
            };
            let mut z = Array2::<T>::zeros((batch, d.weights.ncols()));
            z.assign(&d.bias.view().insert_axis(Axis(0)));
            general_mat_mul(T::one(), prev, &d.weights, T::one(), &mut z);
            if l == last {
                cache.output = z;
                break;
            }
            z.zip_mut_with(&masks[l], |v, m| *v = v.max(T::zero()) * *m);
            hidden.push(z);
        }
        cache.hidden = hidden;
        cache.masks = masks.to_vec();
        Ok(cache)
    }

    /// Inference on a batch; returns `batch × 2`.
    pub fn predict(&self, input: ArrayView2<T>) -> Result<Array2<T>> {
        Ok(self.forward(input, Mode::Eval)?.output)
    }

    /// Gradients of the batch-mean squared distance to `targets`.
    pub fn backward(&self, cache: &Cache<T>, targets: ArrayView2<T>) -> Result<Params<T>> {
        if targets.dim() != cache.output.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?} targets", cache.output.dim()),
                found: format!("{:?}", targets.dim()),
            });
        }
        let scale = T::cast_from(2.0 / cache.output.nrows() as f64);
        let d_out = (&cache.output - &targets) * scale;
        self.backward_from_output(cache, d_out)
    }

    /// Backpropagates an arbitrary gradient with respect to the output.
    pub fn backward_from_output(&self, cache: &Cache<T>, d_out: Array2<T>) -> Result<Params<T>> {
        if cache.generation != self.generation {
            return Err(Error::InvalidParameter(
                "stale activation cache: parameters changed since the forward pass".into(),
            ));
        }
        let mut grads = Params::zeros_like(&self.params);
        let n_dense = self.params.dense.len();
        let mut dz = d_out;
        for l in (0..n_dense).rev() {
            let prev = if l == 0 {
                &cache.pooled
            } else {
                &cache.hidden[l - 1]
            };
            let g = &mut grads.dense[l];
            general_mat_mul(T::one(), &prev.t(), &dz, T::zero(), &mut g.weights);
            for (b, col) in g.bias.iter_mut().zip(dz.columns()) {
                *b = T::cast_from(col.iter().map(|v| v.as_f64()).sum());
            }
            let mut da = Array2::<T>::zeros(prev.raw_dim());
            general_mat_mul(
                T::one(),
                &dz,
                &self.params.dense[l].weights.t(),
                T::zero(),
                &mut da,
            );
            if l > 0 {
                // through dropout and ReLU of hidden layer l-1
                let act = &cache.hidden[l - 1];
                let mask = &cache.masks[l - 1];
                ndarray::Zip::from(&mut da)
                    .and(act)
                    .and(mask)
                    .for_each(|d, &a, &m| {
                        *d = if a > T::zero() { *d * m } else { T::zero() };
                    });
            }
            dz = da;
        }
        self.conv_backward(cache, &dz, &mut grads);
        Ok(grads)
    }

    fn conv_backward(&self, cache: &Cache<T>, d_pooled: &Array2<T>, grads: &mut Params<T>) {
        let (_, cols) = self.input_dims;
        let (kr, kc) = self.spec.conv.kernel;
        let (_, cc) = self.spec.conv_dims(self.input_dims).unwrap();
        let (or, oc) = self.spec.pooled_dims(self.input_dims).unwrap();
        let filters = self.spec.conv.filters;
        let feat = filters * or * oc;
        let per_filter = or * oc;
        let mut dw = vec![0.0f64; filters * kr * kc];
        let mut db = vec![0.0f64; filters];
        for (n, x) in cache.input.outer_iter().enumerate() {
            let x = x.as_slice().unwrap();
            let dp = d_pooled.row(n);
            let pooled = cache.pooled.row(n);
            for k in 0..feat {
                if pooled[k] <= T::zero() {
                    continue;
                }
                let g = dp[k].as_f64();
                if g == 0.0 {
                    continue;
                }
                let f = k / per_filter;
                let at = cache.argmax[n * feat + k] as usize;
                let (r, c) = (at / cc, at % cc);
                db[f] += g;
                for i in 0..kr {
                    let base = (r + i) * cols + c;
                    for j in 0..kc {
                        dw[(f * kr + i) * kc + j] += g * x[base + j].as_f64();
                    }
                }
            }
        }
        for (t, v) in grads.conv_weights.iter_mut().zip(dw) {
            *t = T::cast_from(v);
        }
        for (t, v) in grads.conv_bias.iter_mut().zip(db) {
            *t = T::cast_from(v);
        }
    }
}

/// Mean over the batch of the squared Euclidean distance, accumulated in f64.
pub fn mmse_loss<T: Real>(pred: ArrayView2<T>, target: ArrayView2<T>) -> f64 {
    assert_eq!(pred.dim(), target.dim(), "prediction/target shape mismatch");
    if pred.nrows() == 0 {
        return 0.0;
    }
    let total: f64 = pred
        .outer_iter()
        .zip(target.outer_iter())
        .map(|(p, t)| {
            p.iter()
                .zip(t.iter())
                .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
                .sum::<f64>()
        })
        .sum();
    total / pred.nrows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_spec(dropout: f64) -> NetworkSpec {
        NetworkSpec {
            conv: ConvSpec {
                filters: 2,
                kernel: (1, 3),
                pool: (2, 1),
            },
            hidden_layers: 1,
            hidden_width: 8,
            dropout_rate: dropout,
        }
    }

    #[test]
    fn default_shapes() {
        let spec = NetworkSpec::default();
        // 32 beams pooled to 16, 82 samples convolved to 80, 8 filters
        assert_eq!(spec.flat_features((32, 82)), Some(8 * 16 * 80));
        let widths = spec.layer_widths((32, 82)).unwrap();
        assert_eq!(widths.len(), 9);
        assert_eq!(widths[0], 10240);
        assert!(widths[1..8].iter().all(|&w| w == 1024));
        assert_eq!(widths[8], 2);
        let t = spec.transposed();
        assert_eq!(t.conv.kernel, (3, 1));
        assert_eq!(t.flat_features((32, 82)), Some(8 * 30 * 41));
    }

    #[test]
    fn init_is_deterministic() {
        let a = Network::<f32>::init(tiny_spec(0.5), (4, 6), 11).unwrap();
        let b = Network::<f32>::init(tiny_spec(0.5), (4, 6), 11).unwrap();
        let c = Network::<f32>::init(tiny_spec(0.5), (4, 6), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a
            .params()
            .dense
            .iter()
            .all(|d| d.bias.iter().all(|v| *v == 0.0)));
        let hidden = a.params().dense.len() - 1;
        assert_eq!(hidden, 1);
        assert_eq!(a.params().dense[0].weights.dim(), (2 * 2 * 4, 8));
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(Network::<f32>::init(tiny_spec(0.0), (0, 6), 1).is_err());
        assert!(Network::<f32>::init(tiny_spec(0.0), (1, 6), 1).is_err());
        assert!(Network::<f32>::init(tiny_spec(0.0), (4, 2), 1).is_err());
    }

    #[test]
    fn zero_network_outputs_origin() {
        let net = Network::<f32>::zeros(tiny_spec(0.0), (4, 6)).unwrap();
        let out = net.predict(Array2::zeros((3, 24)).view()).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn eval_is_deterministic_and_train_without_dropout_matches() {
        let net = Network::<f32>::init(tiny_spec(0.0), (4, 6), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Array2::from_shape_fn((5, 24), |_| rng.random::<f32>());
        let a = net.predict(x.view()).unwrap();
        assert_eq!(a, net.predict(x.view()).unwrap());
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let t = net.forward(x.view(), Mode::Train(&mut r2)).unwrap();
        assert_eq!(t.output, a);
    }

    #[test]
    fn dimension_mismatch() {
        let net = Network::<f32>::init(tiny_spec(0.0), (4, 6), 3).unwrap();
        assert!(matches!(
            net.forward(Array2::zeros((1, 23)).view(), Mode::Eval),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn loss_values() {
        let p = array![[3.0f64, 4.0], [1.0, 1.0]];
        let t = array![[0.0f64, 0.0], [1.0, 1.0]];
        assert_eq!(
            mmse_loss(
                p.slice(ndarray::s![0..1, ..]),
                t.slice(ndarray::s![0..1, ..])
            ),
            25.0
        );
        assert_eq!(
            mmse_loss(
                p.slice(ndarray::s![1..2, ..]),
                t.slice(ndarray::s![1..2, ..])
            ),
            0.0
        );
        assert_eq!(mmse_loss(p.view(), t.view()), 12.5);
    }

    #[test]
    fn stale_cache_rejected() {
        let mut net = Network::<f64>::init(tiny_spec(0.0), (4, 6), 3).unwrap();
        let x = Array2::<f64>::ones((2, 24));
        let cache = net.forward(x.view(), Mode::Eval).unwrap();
        net.params_mut().conv_bias[0] = 0.5;
        assert!(net.backward(&cache, Array2::zeros((2, 2)).view()).is_err());
    }

    #[test]
    fn gradients_scale_linearly() {
        let net = Network::<f64>::init(tiny_spec(0.0), (4, 6), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((3, 24), |_| rng.random::<f64>());
        let cache = net.forward(x.view(), Mode::Eval).unwrap();
        let d = Array2::from_shape_fn((3, 2), |(i, j)| (i as f64 - j as f64) * 0.3 + 0.1);
        let g1 = net.backward_from_output(&cache, d.clone()).unwrap();
        let g2 = net.backward_from_output(&cache, d * 2.0).unwrap();
        for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((2.0 * x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn dead_relu_blocks_fan_in_gradient() {
        let mut net = Network::<f64>::init(tiny_spec(0.0), (4, 6), 5).unwrap();
        // hidden unit 0 can never activate
        {
            let p = net.params_mut();
            p.dense[0].weights.column_mut(0).fill(0.0);
            p.dense[0].bias[0] = -1.0;
        }
        let x = Array2::from_elem((2, 24), 0.7);
        let cache = net.forward(x.view(), Mode::Eval).unwrap();
        let g = net
            .backward(&cache, Array2::from_elem((2, 2), 3.0).view())
            .unwrap();
        assert!(g.dense[0].weights.column(0).iter().all(|v| *v == 0.0));
        assert_eq!(g.dense[0].bias[0], 0.0);
    }
}
