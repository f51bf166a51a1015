use super::network::{Network, Params, Real};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.epsilon.is_nan()
            || self.epsilon <= 0.0
        {
            return Err(Error::InvalidParameter(format!(
                "adam parameters out of range: beta1 {}, beta2 {}, epsilon {}",
                self.beta1, self.beta2, self.epsilon
            )));
        }
        Ok(())
    }
}

/// First and second moment estimates with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    m: Params<T>,
    v: Params<T>,
    steps: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, net: &Network<T>) -> Self {
        Adam {
            config,
            m: Params::zeros_like(net.params()),
            v: Params::zeros_like(net.params()),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, net: &mut Network<T>, grads: &Params<T>, lr: f64) {
        self.steps += 1;
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.steps as i32);
        let c2 = 1.0 - beta2.powi(self.steps as i32);
        let (b1, b2) = (T::cast_from(beta1), T::cast_from(beta2));
        let (ob1, ob2) = (T::cast_from(1.0 - beta1), T::cast_from(1.0 - beta2));
        // lr·m̂/(√v̂+ε) = (lr/c1)·m / (√v/√c2 + ε)
        let step = T::cast_from(lr / c1);
        let inv_sqrt_c2 = T::cast_from(1.0 / c2.sqrt());
        let eps = T::cast_from(epsilon);
        let params = net.params_mut();
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for (((p, g), m), v) in tensors {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + ob1 * gi;
                v[i] = b2 * v[i] + ob2 * gi * gi;
                p[i] = p[i] - step * m[i] / (v[i].sqrt() * inv_sqrt_c2 + eps);
            }
        }
    }
}
