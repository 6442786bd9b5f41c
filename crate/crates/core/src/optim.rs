//! Adam over the primitive parameter groups.

use serde::{Deserialize, Serialize};

use crate::primitive::{Mode, ParamGroup, PrimitiveGrad, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-15,
        }
    }
}

/// One bias-corrected Adam update of a scalar at step `t` (1-based).
#[inline]
pub fn adam_update(param: &mut f64, grad: f64, m: &mut f64, v: &mut f64, lr: f64, t: u64, hp: &AdamHyper) {
    *m = hp.beta1 * *m + (1.0 - hp.beta1) * grad;
    *v = hp.beta2 * *v + (1.0 - hp.beta2) * grad * grad;
    let m_hat = *m / (1.0 - hp.beta1.powi(t as i32));
    let v_hat = *v / (1.0 - hp.beta2.powi(t as i32));
    *param -= lr * m_hat / (v_hat.sqrt() + hp.eps);
}

/// Adam state for a scene: first and second moments per primitive, laid out
/// like the gradients, plus a step counter shared by all groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub hyper: AdamHyper,
    pub step: u64,
    pub m: Vec<PrimitiveGrad>,
    pub v: Vec<PrimitiveGrad>,
}

impl Adam {
    pub fn new(n: usize, hyper: AdamHyper) -> Self {
        Self {
            hyper,
            step: 0,
            m: vec![PrimitiveGrad::default(); n],
            v: vec![PrimitiveGrad::default(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Applies one update to every group. `lr` gives the learning rate of each
    /// group; gradients must align with the scene.
    pub fn step(&mut self, scene: &mut Scene, grads: &[PrimitiveGrad], lr: impl Fn(ParamGroup) -> f64) {
        assert_eq!(grads.len(), scene.len(), "gradient count");
        assert_eq!(self.len(), scene.len(), "optimizer state count");
        self.step += 1;
        let mode: Mode = scene.mode;
        for group in ParamGroup::ALL {
            let rate = lr(group);
            for (k, p) in scene.primitives.iter_mut().enumerate() {
                let g = grads[k].group(group, mode);
                let m = self.m[k].group_mut(group, mode);
                let v = self.v[k].group_mut(group, mode);
                for (i, x) in p.group_mut(group, mode).iter_mut().enumerate() {
                    adam_update(x, g[i], &mut m[i], &mut v[i], rate, self.step, &self.hyper);
                }
            }
        }
    }

    /// Rebuilds the moments after the primitive set changed. `origin[i]` is
    /// the old index the new primitive `i` inherits from; `None` gets zeros.
    pub fn remap(&mut self, origin: &[Option<usize>]) {
        let pick = |src: &[PrimitiveGrad]| -> Vec<PrimitiveGrad> {
            origin.iter().map(|o| o.map_or_else(PrimitiveGrad::default, |k| src[k])).collect()
        };
        self.m = pick(&self.m);
        self.v = pick(&self.v);
    }
}
