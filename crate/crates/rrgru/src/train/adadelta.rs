//! AdaDelta with decaying accumulators for squared gradients and squared
//! updates.

use crate::autodiff::Graph;
use crate::error::{Error, Result};
use crate::net::{BoundParams, ModelParams};

/// Per-parameter accumulators `E[g^2]` and `E[dx^2]`, mirroring the model
/// arrays in canonical order.
#[derive(Debug, Clone)]
pub struct AdaDeltaState {
    pub rho: f64,
    pub eps: f64,
    /// Global update scale ("learning rate of 1.0").
    pub lr_scale: f64,
    slots: Vec<Slot>,
}

#[derive(Debug, Clone)]
struct Slot {
    name: String,
    eg2: Vec<f64>,
    edx2: Vec<f64>,
}

impl AdaDeltaState {
    pub fn new(params: &ModelParams, rho: f64, eps: f64, lr_scale: f64) -> Self {
        let slots = params
            .arrays()
            .into_iter()
            .map(|a| Slot {
                name: a.name.clone(),
                eg2: vec![0.0; a.len()],
                edx2: vec![0.0; a.len()],
            })
            .collect();
        AdaDeltaState {
            rho,
            eps,
            lr_scale,
            slots,
        }
    }

    /// The cited optimizer's defaults with the global scale of 1.0.
    pub fn with_defaults(params: &ModelParams) -> Self {
        Self::new(params, 0.95, 1e-6, 1.0)
    }

    /// Apply one update from the gradients accumulated in `graph` for the
    /// leaves of `bound`, then zero the graph's gradients.
    pub fn step(
        &mut self,
        params: &mut ModelParams,
        graph: &mut Graph,
        bound: &BoundParams,
    ) -> Result<()> {
        let values = bound.values();
        let arrays = params.arrays_mut();
        if values.len() != arrays.len() || arrays.len() != self.slots.len() {
            return Err(Error::Contract(
                "optimizer state does not mirror the parameter set".into(),
            ));
        }
        for ((array, value), slot) in arrays.into_iter().zip(values).zip(&mut self.slots) {
            let grad = graph.grad(value);
            if grad.len() != array.len() {
                return Err(Error::Contract(format!(
                    "gradient length mismatch for {}",
                    slot.name
                )));
            }
            for i in 0..grad.len() {
                let g = grad[i];
                if !g.is_finite() {
                    return Err(Error::Numeric {
                        name: slot.name.clone(),
                        msg: format!("non-finite gradient at entry {}", i),
                    });
                }
                slot.eg2[i] = self.rho * slot.eg2[i] + (1.0 - self.rho) * g * g;
                let dx = -((slot.edx2[i] + self.eps).sqrt() / (slot.eg2[i] + self.eps).sqrt()) * g;
                slot.edx2[i] = self.rho * slot.edx2[i] + (1.0 - self.rho) * dx * dx;
                array.data[i] += self.lr_scale * dx;
            }
        }
        graph.zero_grad();
        Ok(())
    }

    pub fn accumulators(&self, name: &str) -> Option<(&[f64], &[f64])> {
        self.slots
            .iter()
            .find(|s| s.name == name)
            .map(|s| (s.eg2.as_slice(), s.edx2.as_slice()))
    }
}
