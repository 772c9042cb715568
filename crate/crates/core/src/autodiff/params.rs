use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AutodiffError, Gradients, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug)]
struct Param {
    name: String,
    value: Tensor,
    m: Tensor,
    v: Tensor,
    lr: Option<f64>,
}

/// Named parameters with Adam moment buffers.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
    step: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    step: u64,
    params: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore::default()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> ParamId {
        assert!(!self.by_name.contains_key(name), "duplicate parameter {name}");
        let (r, c) = value.shape();
        self.params.push(Param {
            name: name.to_string(),
            value,
            m: Tensor::zeros(r, c),
            v: Tensor::zeros(r, c),
            lr: None,
        });
        let id = ParamId(self.params.len() - 1);
        self.by_name.insert(name.to_string(), id);
        id
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
    pub fn add_uniform(&mut self, name: &str, rows: usize, cols: usize, fan_in: usize, rng: &mut impl Rng) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        self.add(name, Tensor::new(rows, cols, data).expect("sized"))
    }

    pub fn add_zeros(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.add(name, Tensor::zeros(rows, cols))
    }

    /// Gives one parameter its own learning rate.
    pub fn set_lr(&mut self, id: ParamId, lr: f64) {
        self.params[id.0].lr = Some(lr);
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// One bias-corrected Adam update. Parameters without a gradient are
    /// treated as having a zero gradient.
    pub fn adam_step(&mut self, grads: &Gradients, cfg: &Adam) -> Result<(), AutodiffError> {
        if grads.values.len() != self.params.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "adam_step",
                left: (self.params.len(), 1),
                right: (grads.values.len(), 1),
            });
        }
        for (p, g) in self.params.iter().zip(&grads.values) {
            if let Some(g) = g {
                if g.shape() != p.value.shape() {
                    return Err(AutodiffError::ShapeMismatch {
                        op: "adam_step",
                        left: p.value.shape(),
                        right: g.shape(),
                    });
                }
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for (p, g) in self.params.iter_mut().zip(&grads.values) {
            let lr = p.lr.unwrap_or(cfg.lr);
            let g = g.as_ref();
            let n = p.value.len();
            let (value, m, v) = (p.value.as_mut_slice(), p.m.as_mut_slice(), p.v.as_mut_slice());
            for i in 0..n {
                let gi = g.map_or(0.0, |g| g.as_slice()[i]);
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                value[i] -= lr * mh / (vh.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let ck = Checkpoint {
            version: CHECKPOINT_VERSION,
            step: self.step,
            params: self
                .params
                .iter()
                .map(|p| NamedTensor {
                    name: p.name.clone(),
                    rows: p.value.rows(),
                    cols: p.value.cols(),
                    data: p.value.as_slice().to_vec(),
                })
                .collect(),
        };
        serde_json::to_string(&ck).expect("checkpoint serializes")
    }

    /// Loads values into an already-built store, checking every name and
    /// shape against it. Moment buffers are reset.
    pub fn load_json(&mut self, text: &str) -> Result<(), AutodiffError> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| AutodiffError::Checkpoint(e.to_string()))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(AutodiffError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                ck.version
            )));
        }
        if ck.params.len() != self.params.len() {
            return Err(AutodiffError::Checkpoint(format!(
                "checkpoint has {} parameters, architecture expects {}",
                ck.params.len(),
                self.params.len()
            )));
        }
        for nt in ck.params {
            let id = self
                .id(&nt.name)
                .ok_or_else(|| AutodiffError::Checkpoint(format!("unknown parameter {}", nt.name)))?;
            let p = &mut self.params[id.0];
            if p.value.shape() != (nt.rows, nt.cols) {
                return Err(AutodiffError::Checkpoint(format!(
                    "parameter {} has shape {}x{}, architecture expects {}x{}",
                    nt.name,
                    nt.rows,
                    nt.cols,
                    p.value.rows(),
                    p.value.cols()
                )));
            }
            p.value = Tensor::new(nt.rows, nt.cols, nt.data)?;
            p.m = Tensor::zeros(nt.rows, nt.cols);
            p.v = Tensor::zeros(nt.rows, nt.cols);
        }
        self.step = ck.step;
        Ok(())
    }
}
