//! Adam optimizer with bias correction.

use super::{Tensor, TensorError};

/// Optimizer state for a fixed list of parameters.
///
/// `m` and `v` mirror the parameter shapes; `step` counts completed
/// updates and drives the bias-correction terms.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(param_sizes: &[usize], lr: f64) -> Self {
        AdamState {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One Adam update over parallel slices of parameters and gradients.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[Vec<f64>],
    ) -> Result<(), TensorError> {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(params.len(), grads.len(), "gradient count mismatch");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if param.len() != grad.len() {
                return Err(TensorError::DataLength {
                    shape: param.shape().to_vec(),
                    expected: param.len(),
                    got: grad.len(),
                });
            }
            for (i, g) in grad.iter().enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                param.data_mut()[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
