use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{NumericsError, Tensor};

#[derive(Clone, Debug, PartialEq)]
struct Slot {
    value: Tensor,
    m: Tensor,
    v: Tensor,
}

/// Named trainable weights together with their Adam moments.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Parameters {
    slots: BTreeMap<String, Slot>,
    frozen: BTreeSet<String>,
    step: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl Parameters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let (r, c) = (value.rows(), value.cols());
        self.slots.insert(
            name.into(),
            Slot {
                value,
                m: Tensor::zeros(r, c),
                v: Tensor::zeros(r, c),
            },
        );
    }

    /// Glorot-uniform weight matrix.
    pub fn insert_weight(&mut self, name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut impl Rng) {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        self.insert(name, Tensor::new(fan_in, fan_out, data).expect("shape"));
    }

    pub fn insert_bias(&mut self, name: impl Into<String>, dim: usize) {
        self.insert(name, Tensor::zeros(1, dim));
    }

    /// Embedding table drawn from N(0, 1) scaled by 1/sqrt(dim).
    pub fn insert_embedding(&mut self, name: impl Into<String>, rows: usize, dim: usize, rng: &mut impl Rng) {
        let scale = 1.0 / (dim as f64).sqrt();
        let data = (0..rows * dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * scale
            })
            .collect();
        self.insert(name, Tensor::new(rows, dim, data).expect("shape"));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.slots.get(name).map(|s| &s.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.slots.get_mut(name).map(|s| &mut s.value)
    }

    /// Value of a parameter that must exist.
    pub fn value(&self, name: &str) -> Result<&Tensor, NumericsError> {
        self.get(name)
            .ok_or_else(|| NumericsError::KeyMismatch(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.slots.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.slots.values().map(|s| s.value.len()).sum()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn freeze(&mut self, name: &str) {
        self.frozen.insert(name.to_string());
    }

    pub fn is_frozen(&self, name: &str) -> bool {
        self.frozen.contains(name)
    }

    /// Forget optimizer moments and the step counter.
    pub fn reset_optimizer(&mut self) {
        self.step = 0;
        for s in self.slots.values_mut() {
            s.m = Tensor::zeros(s.value.rows(), s.value.cols());
            s.v = Tensor::zeros(s.value.rows(), s.value.cols());
        }
    }

    /// One Adam update with bias correction and decoupled weight decay.
    ///
    /// `grads` must hold exactly the non-frozen parameter names of this
    /// store; frozen parameters may be present and are skipped.
    pub fn adam_step(&mut self, grads: &BTreeMap<String, Tensor>, cfg: &AdamConfig) -> Result<(), NumericsError> {
        for name in grads.keys() {
            if !self.slots.contains_key(name) {
                return Err(NumericsError::KeyMismatch(name.clone()));
            }
        }
        for name in self.slots.keys() {
            if !self.frozen.contains(name) && !grads.contains_key(name) {
                return Err(NumericsError::KeyMismatch(name.clone()));
            }
        }
        self.adam_step_partial(grads, cfg)
    }

    /// Adam update restricted to the parameters named in `grads`. Parameters
    /// absent from `grads` keep their values and moments untouched.
    pub fn adam_step_partial(&mut self, grads: &BTreeMap<String, Tensor>, cfg: &AdamConfig) -> Result<(), NumericsError> {
        for name in grads.keys() {
            if !self.slots.contains_key(name) {
                return Err(NumericsError::KeyMismatch(name.clone()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (name, g) in grads {
            if self.frozen.contains(name) {
                continue;
            }
            let slot = self.slots.get_mut(name).expect("checked above");
            if g.shape() != slot.value.shape() {
                return Err(NumericsError::ShapeMismatch {
                    op: "adam_step",
                    left: slot.value.shape().to_vec(),
                    right: g.shape().to_vec(),
                });
            }
            let (value, m, v) = (
                slot.value.data_mut(),
                slot.m.data_mut(),
                slot.v.data_mut(),
            );
            for i in 0..value.len() {
                let gi = g.data()[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                value[i] -= cfg.lr * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * value[i]);
            }
        }
        Ok(())
    }

    /// Writes the binary checkpoint container.
    ///
    /// Layout (all integers little-endian):
    /// `b"SPRLCKPT"`, `u32` version, `u64` optimizer step, `u32` entry count,
    /// then per entry in name order: `u32` name length, UTF-8 name, `u8`
    /// frozen flag, `u32` rank (always 2), `u64` rows, `u64` cols, and three
    /// blocks of `rows * cols` little-endian `f64`: value, first moment,
    /// second moment.
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), NumericsError> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&self.step.to_le_bytes())?;
        w.write_all(&(self.slots.len() as u32).to_le_bytes())?;
        for (name, slot) in &self.slots {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&[u8::from(self.frozen.contains(name))])?;
            w.write_all(&2u32.to_le_bytes())?;
            w.write_all(&(slot.value.rows() as u64).to_le_bytes())?;
            w.write_all(&(slot.value.cols() as u64).to_le_bytes())?;
            for t in [&slot.value, &slot.m, &slot.v] {
                for x in t.data() {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, NumericsError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(NumericsError::Checkpoint("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(NumericsError::Checkpoint(format!("unsupported version {version}")));
        }
        let step = read_u64(r)?;
        let count = read_u32(r)?;
        let mut params = Parameters {
            step,
            ..Parameters::default()
        };
        for _ in 0..count {
            let len = read_u32(r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| NumericsError::Checkpoint("parameter name is not UTF-8".into()))?;
            let mut flag = [0u8; 1];
            r.read_exact(&mut flag)?;
            let rank = read_u32(r)?;
            if rank != 2 {
                return Err(NumericsError::Checkpoint(format!("unsupported rank {rank}")));
            }
            let rows = read_u64(r)? as usize;
            let cols = read_u64(r)? as usize;
            let mut blocks = Vec::with_capacity(3);
            for _ in 0..3 {
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows * cols {
                    let mut b = [0u8; 8];
                    r.read_exact(&mut b)?;
                    data.push(f64::from_le_bytes(b));
                }
                blocks.push(Tensor::new(rows, cols, data)?);
            }
            let v = blocks.pop().expect("three blocks");
            let m = blocks.pop().expect("three blocks");
            let value = blocks.pop().expect("three blocks");
            if flag[0] != 0 {
                params.frozen.insert(name.clone());
            }
            params.slots.insert(name, Slot { value, m, v });
        }
        Ok(params)
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"SPRLCKPT";
const CHECKPOINT_VERSION: u32 = 1;

fn read_u32(r: &mut impl Read) -> Result<u32, NumericsError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64, NumericsError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Scales all gradients so that their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<'a>(grads: impl IntoIterator<Item = &'a mut Tensor>, max_norm: f64) -> f64 {
    let grads: Vec<&mut Tensor> = grads.into_iter().collect();
    let norm = grads.iter().map(|g| g.squared_norm()).sum::<f64>().sqrt();
    if norm > max_norm {
        let f = max_norm / norm;
        for g in grads {
            g.scale_assign(f);
        }
    }
    norm
}
