//! Optimizers, the training loop and weight checkpoints.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::tensor::{Param, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::InvalidArgument(format!("unknown optimizer '{s}' (sgd or adam)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            lr: 1e-3,
            batch: 32,
            epochs: 5,
            seed: 0,
        }
    }
}

/// Plain SGD or Adam (β = 0.9, 0.999, ε = 1e-8) over a fixed parameter list.
pub struct Optimizer<T> {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Optimizer {
            kind,
            lr,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Param<T>]) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.grad.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let lr = T::of(self.lr);
        match self.kind {
            OptimizerKind::Sgd => {
                for p in params.iter_mut() {
                    let Param { value, grad, .. } = &mut **p;
                    for (w, g) in value.data_mut().iter_mut().zip(grad.iter()) {
                        *w -= lr * *g;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
                let c1 = T::of(1.0 / (1.0 - b1.powi(self.step)));
                let c2 = T::of(1.0 / (1.0 - b2.powi(self.step)));
                let (b1, b2, eps) = (T::of(b1), T::of(b2), T::of(eps));
                for (i, p) in params.iter_mut().enumerate() {
                    let Param { value, grad, .. } = &mut **p;
                    let (m, v) = (&mut self.m[i], &mut self.v[i]);
                    for (k, w) in value.data_mut().iter_mut().enumerate() {
                        let g = grad[k];
                        m[k] = b1 * m[k] + (T::one() - b1) * g;
                        v[k] = b2 * v[k] + (T::one() - b2) * g * g;
                        *w -= lr * (m[k] * c1) / ((v[k] * c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// Loss statistics of one batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchStats {
    /// Mean loss over the batch.
    pub loss: f64,
    pub correct: usize,
    pub count: usize,
}

/// A model bundled with its training items.
pub trait Trainable<T: Real> {
    /// Number of training items.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn params(&mut self) -> Vec<&mut Param<T>>;

    /// Runs forward and backward on `batch`, adding the gradient of the mean
    /// batch loss to the parameters.
    fn accumulate(&mut self, batch: &[usize]) -> Result<BatchStats>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Trains for `cfg.epochs` epochs, reshuffling with a seeded generator each
/// epoch. A non-finite loss aborts with diagnostics.
pub fn train<T: Real, M: Trainable<T>>(model: &mut M, cfg: &TrainConfig) -> Result<Vec<EpochStat>> {
    if model.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if cfg.batch == 0 || !(cfg.lr >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "batch {} and learning rate {}",
            cfg.batch, cfg.lr
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Optimizer::<T>::new(cfg.optimizer, cfg.lr);
    let mut order: Vec<usize> = (0..model.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss, mut correct, mut count) = (0.0, 0, 0);
        for (bi, batch) in order.chunks(cfg.batch).enumerate() {
            model.params().iter_mut().for_each(|p| p.zero_grad());
            let s = model.accumulate(batch)?;
            if !s.loss.is_finite() {
                let worst = model
                    .params()
                    .iter()
                    .map(|p| {
                        let g = p.grad.iter().fold(0.0f64, |a, g| a.max(g.f64().abs()));
                        (p.name.clone(), g)
                    })
                    .fold(
                        (String::new(), 0.0),
                        |a, b| if b.1 > a.1 || b.1.is_nan() { b } else { a },
                    );
                return Err(Error::Numerical(format!(
                    "loss {} at epoch {epoch}, batch {bi}; largest gradient {} in {}",
                    s.loss, worst.1, worst.0
                )));
            }
            opt.step(&mut model.params());
            loss += s.loss * s.count as f64;
            correct += s.correct;
            count += s.count;
        }
        let stat = EpochStat {
            epoch,
            loss: loss / count.max(1) as f64,
            accuracy: correct as f64 / count.max(1) as f64,
        };
        log::info!("epoch {epoch}: loss {:.5} accuracy {:.4}", stat.loss, stat.accuracy);
        log.push(stat);
    }
    Ok(log)
}

const CHECKPOINT_MAGIC: &[u8; 5] = b"TXNW1";
const CHECKPOINT_VERSION: u16 = 1;

/// A named array read back from a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

/// Writes parameters as little-endian `f32` arrays tagged with their names.
pub fn save_checkpoint<T: Real>(path: &Path, params: &[&Param<T>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::Open {
        path: path.to_path_buf(),
        source: e,
    })?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u16::<LittleEndian>(CHECKPOINT_VERSION)?;
    w.write_u32::<LittleEndian>(params.len() as u32)?;
    for p in params {
        let name = p.name.as_bytes();
        w.write_u16::<LittleEndian>(name.len() as u16)?;
        w.write_all(name)?;
        w.write_u8(p.value.shape().len() as u8)?;
        for &d in p.value.shape() {
            w.write_u32::<LittleEndian>(d as u32)?;
        }
        for v in p.value.data() {
            w.write_f32::<LittleEndian>(v.f64() as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<NamedArray>> {
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::Open {
        path: path.to_path_buf(),
        source: e,
    })?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("{} is not a weight checkpoint", path.display())));
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("checkpoint version {version} unsupported")));
    }
    let count = r.read_u32::<LittleEndian>()?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = r.read_u16::<LittleEndian>()? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let nd = r.read_u8()? as usize;
        let shape = (0..nd)
            .map(|_| r.read_u32::<LittleEndian>().map(|d| d as usize))
            .collect::<std::io::Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut values = vec![0f32; n];
        r.read_f32_into::<LittleEndian>(&mut values)?;
        out.push(NamedArray {
            name: String::from_utf8(name).map_err(|e| Error::Format(e.to_string()))?,
            shape,
            values,
        });
    }
    Ok(out)
}

/// Copies checkpoint arrays into parameters matched by name and shape.
pub fn restore_checkpoint<T: Real>(path: &Path, params: Vec<&mut Param<T>>) -> Result<()> {
    let arrays = load_checkpoint(path)?;
    for p in params {
        let a = arrays
            .iter()
            .find(|a| a.name == p.name)
            .ok_or_else(|| Error::Format(format!("checkpoint lacks '{}'", p.name)))?;
        if a.shape != p.value.shape() {
            return Err(Error::Format(format!(
                "'{}' has shape {:?}, expected {:?}",
                p.name,
                a.shape,
                p.value.shape()
            )));
        }
        p.value = Tensor::from_vec(&a.shape, a.values.iter().map(|&v| T::of(v as f64)).collect());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::{softmax_cross_entropy, Layer, Linear, Relu};

    /// Two-layer perceptron over fixed points.
    struct Toy {
        l1: Linear<f64>,
        act: Relu<f64>,
        l2: Linear<f64>,
        x: Vec<f64>,
        y: Vec<usize>,
    }

    impl Toy {
        fn new(seed: u64) -> Self {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..20).map(|i| ((i * 7 % 13) as f64 / 6.0) - 1.0).collect();
            Toy {
                l1: Linear::new("l1", 2, 16, &mut rng),
                act: Relu::default(),
                l2: Linear::new("l2", 16, 3, &mut rng),
                x,
                y: (0..10).map(|i| i % 3).collect(),
            }
        }
    }

    impl Trainable<f64> for Toy {
        fn len(&self) -> usize {
            self.y.len()
        }

        fn params(&mut self) -> Vec<&mut Param<f64>> {
            let mut p = self.l1.params();
            p.extend(self.l2.params());
            p
        }

        fn accumulate(&mut self, batch: &[usize]) -> Result<BatchStats> {
            let x: Vec<f64> = batch.iter().flat_map(|&i| [self.x[2 * i], self.x[2 * i + 1]]).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| self.y[i]).collect();
            let h = self.l1.forward(Tensor::from_vec(&[batch.len(), 2], x))?;
            let h = self.act.forward(h)?;
            let z = self.l2.forward(h)?;
            let (loss, g, correct) = softmax_cross_entropy(z.data(), 3, &labels)?;
            let g = self.l2.backward(Tensor::from_vec(&[batch.len(), 3], g))?;
            let g = self.act.backward(g)?;
            self.l1.backward(g)?;
            Ok(BatchStats {
                loss,
                correct,
                count: batch.len(),
            })
        }
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let mut m = Toy::new(1);
        let before = m.l1.weight.value.clone();
        let cfg = TrainConfig {
            lr: 0.0,
            batch: 4,
            epochs: 2,
            ..Default::default()
        };
        train(&mut m, &cfg).unwrap();
        assert_eq!(m.l1.weight.value, before);
        let cfg = TrainConfig {
            optimizer: OptimizerKind::Sgd,
            ..cfg
        };
        train(&mut m, &cfg).unwrap();
        assert_eq!(m.l1.weight.value, before);
    }

    #[test]
    fn overfits_ten_points() {
        let mut m = Toy::new(2);
        let cfg = TrainConfig {
            lr: 0.1,
            batch: 10,
            epochs: 200,
            ..Default::default()
        };
        let log = train(&mut m, &cfg).unwrap();
        assert!(log.last().unwrap().loss < 0.01, "{:?}", log.last());
    }

    #[test]
    fn same_seed_same_log() {
        let cfg = TrainConfig {
            batch: 3,
            epochs: 5,
            seed: 11,
            ..Default::default()
        };
        let a = train(&mut Toy::new(3), &cfg).unwrap();
        let b = train(&mut Toy::new(3), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nan_loss_aborts() {
        let mut m = Toy::new(4);
        m.l2.bias.value.data_mut()[0] = f64::NAN;
        let err = train(&mut m, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let mut m = Toy::new(5);
        let saved: Vec<Param<f64>> = m.params().into_iter().map(|p| p.clone()).collect();
        save_checkpoint(&path, &saved.iter().collect::<Vec<_>>()).unwrap();
        let mut other = Toy::new(6);
        restore_checkpoint(&path, other.params()).unwrap();
        for (a, b) in saved.iter().zip(other.params()) {
            for (x, y) in a.value.data().iter().zip(b.value.data()) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
        std::fs::write(&path, b"nope").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
