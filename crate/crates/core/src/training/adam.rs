use crate::error::{Error, Result};
use crate::models::ModelParams;
use crate::tensor::Tensor;

/// Adam optimizer state for a fixed list of parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, betas: (f64, f64), eps: f64) -> Self {
        Adam {
            lr,
            betas,
            eps,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update. Nothing is modified when any gradient is
    /// non-finite.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape("adam", &[params.len()], &[grads.len()]));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.len() != g.len() {
                return Err(Error::shape("adam", &[p.len()], &[g.len()]));
            }
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite {
                what: "gradient".into(),
                step: self.t as usize,
            });
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != grads.len()
            || self.m.iter().zip(grads).any(|(m, g)| m.len() != g.len())
        {
            return Err(Error::invalid(
                "adam state does not match the parameter list",
            ));
        }
        self.t += 1;
        let (b1, b2) = self.betas;
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..g.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Applies one Adam step to the parameters of `model` at `indices`.
pub fn adam_step(
    model: &mut ModelParams,
    indices: &[usize],
    grads: &[Tensor],
    opt: &mut Adam,
) -> Result<()> {
    if indices.len() != grads.len() {
        return Err(Error::shape("adam_step", &[indices.len()], &[grads.len()]));
    }
    let mut taken = vec![false; model.len()];
    for &i in indices {
        if i >= model.len() || std::mem::replace(&mut taken[i], true) {
            return Err(Error::invalid(format!(
                "invalid or repeated parameter index {i}"
            )));
        }
    }
    let mut views = model.data_views_mut(indices);
    let g: Vec<&[f64]> = grads.iter().map(|t| t.data()).collect();
    opt.update(&mut views, &g)
}
