//! MNIST digit classification with plain 3×3 convolutions or with
//! TextureConv in their place.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ReadBytesExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conv::Aggregation;
use crate::error::{Error, Result};
use crate::nn::layers::{argmax_rows, softmax_cross_entropy, Conv3x3, GridTextureConv, Layer, Linear, MaxPool2, Relu};
use crate::nn::tensor::{Param, Real, Tensor};
use crate::nn::train::{train, BatchStats, EpochStat, TrainConfig, Trainable};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;
const MEAN: f64 = 0.1307;
const STD: f64 = 0.3081;

/// Images as `count × rows × cols` bytes with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MnistSplit {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
}

impl MnistSplit {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The first `n` items.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        MnistSplit {
            rows: self.rows,
            cols: self.cols,
            images: self.images[..n * self.rows * self.cols].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }

    /// Normalized pixels of the given items as a `b × rows × cols × 1` batch.
    pub fn batch<T: Real>(&self, items: &[usize]) -> Tensor<T> {
        let px = self.rows * self.cols;
        let mut data = Vec::with_capacity(items.len() * px);
        for &i in items {
            data.extend(
                self.images[i * px..(i + 1) * px]
                    .iter()
                    .map(|&b| T::of((b as f64 / 255.0 - MEAN) / STD)),
            );
        }
        Tensor::from_vec(&[items.len(), self.rows, self.cols, 1], data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnistData {
    pub train: MnistSplit,
    pub test: MnistSplit,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::Open {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Reads an IDX image file (magic `0x00000803`).
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let mut r = open(path)?;
    let magic = r.read_u32::<BigEndian>()?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad image magic {magic:#010x}",
            path.display()
        )));
    }
    let n = r.read_u32::<BigEndian>()? as usize;
    let rows = r.read_u32::<BigEndian>()? as usize;
    let cols = r.read_u32::<BigEndian>()? as usize;
    let mut data = vec![0u8; n * rows * cols];
    r.read_exact(&mut data)
        .map_err(|_| Error::Format(format!("{}: truncated image data", path.display())))?;
    Ok((n, rows, cols, data))
}

/// Reads an IDX label file (magic `0x00000801`).
pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let mut r = open(path)?;
    let magic = r.read_u32::<BigEndian>()?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad label magic {magic:#010x}",
            path.display()
        )));
    }
    let n = r.read_u32::<BigEndian>()? as usize;
    let mut data = vec![0u8; n];
    r.read_exact(&mut data)
        .map_err(|_| Error::Format(format!("{}: truncated label data", path.display())))?;
    if let Some(&l) = data.iter().find(|&&l| l > 9) {
        return Err(Error::Format(format!("{}: label {l} out of range", path.display())));
    }
    Ok(data)
}

fn find(dir: &Path, stem: &str) -> PathBuf {
    // both the canonical dash form and the common dotted variant
    let dashed = dir.join(stem);
    if dashed.exists() {
        return dashed;
    }
    let dotted = dir.join(stem.replacen("-idx", ".idx", 1));
    if dotted.exists() {
        dotted
    } else {
        dashed
    }
}

fn read_split(dir: &Path, prefix: &str) -> Result<MnistSplit> {
    let (n, rows, cols, images) = read_idx_images(&find(dir, &format!("{prefix}-images-idx3-ubyte")))?;
    let labels = read_idx_labels(&find(dir, &format!("{prefix}-labels-idx1-ubyte")))?;
    if labels.len() != n {
        return Err(Error::Format(format!(
            "{prefix}: {n} images but {} labels",
            labels.len()
        )));
    }
    Ok(MnistSplit {
        rows,
        cols,
        images,
        labels,
    })
}

impl MnistData {
    /// Loads `train-*` and `t10k-*` IDX files from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(MnistData {
            train: read_split(dir, "train")?,
            test: read_split(dir, "t10k")?,
        })
    }
}

/// Convolution used in both conv layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MnistVariant {
    /// Plain 3×3 convolutions.
    Baseline,
    /// TextureConv over each pixel's 3×3 window, max aggregation.
    Rosy,
}

impl std::str::FromStr for MnistVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(MnistVariant::Baseline),
            "rosy" => Ok(MnistVariant::Rosy),
            _ => Err(Error::InvalidArgument(format!(
                "unknown variant '{s}' (baseline or rosy)"
            ))),
        }
    }
}

/// Two conv layers (32 and 64 channels, each followed by 2×2 max-pool) and
/// two fully connected layers (128 hidden units, 10 outputs).
pub struct MnistNet<T: Real> {
    pub variant: MnistVariant,
    layers: Vec<Box<dyn Layer<T>>>,
}

impl<T: Real> MnistNet<T> {
    pub fn new(variant: MnistVariant, rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers: Vec<Box<dyn Layer<T>>> = Vec::new();
        match variant {
            MnistVariant::Baseline => {
                layers.push(Box::new(Conv3x3::new("conv1", 1, 32, &mut rng)));
                layers.push(Box::new(MaxPool2::new()));
                layers.push(Box::new(Conv3x3::new("conv2", 32, 64, &mut rng)));
            }
            MnistVariant::Rosy => {
                layers.push(Box::new(GridTextureConv::new(
                    "conv1",
                    1,
                    32,
                    Aggregation::Max,
                    &mut rng,
                )));
                layers.push(Box::new(MaxPool2::new()));
                layers.push(Box::new(GridTextureConv::new(
                    "conv2",
                    32,
                    64,
                    Aggregation::Max,
                    &mut rng,
                )));
            }
        }
        layers.push(Box::new(MaxPool2::new()));
        layers.push(Box::new(Linear::new(
            "fc1",
            (rows / 4) * (cols / 4) * 64,
            128,
            &mut rng,
        )));
        layers.push(Box::new(Relu::default()));
        layers.push(Box::new(Linear::new("fc2", 128, 10, &mut rng)));
        MnistNet { variant, layers }
    }

    /// Logits, `b × 10`.
    pub fn forward(&mut self, x: Tensor<T>) -> Result<Tensor<T>> {
        self.layers.iter_mut().try_fold(x, |x, l| l.forward(x))
    }

    pub fn backward(&mut self, grad: Tensor<T>) -> Result<Tensor<T>> {
        self.layers.iter_mut().rev().try_fold(grad, |g, l| l.backward(g))
    }

    pub fn params(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params()).collect()
    }

    /// Fraction of `split` classified correctly.
    pub fn accuracy(&mut self, split: &MnistSplit) -> Result<f64> {
        let mut correct = 0;
        let idx: Vec<usize> = (0..split.len()).collect();
        for chunk in idx.chunks(250) {
            let logits = self.forward(split.batch(chunk))?;
            correct += argmax_rows(logits.data(), 10)
                .iter()
                .zip(chunk)
                .filter(|(p, &i)| **p == split.labels[i] as usize)
                .count();
        }
        Ok(correct as f64 / split.len().max(1) as f64)
    }
}

struct MnistTask<'a, T: Real> {
    net: &'a mut MnistNet<T>,
    data: &'a MnistSplit,
}

impl<T: Real> Trainable<T> for MnistTask<'_, T> {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn params(&mut self) -> Vec<&mut Param<T>> {
        self.net.params()
    }

    fn accumulate(&mut self, batch: &[usize]) -> Result<BatchStats> {
        let logits = self.net.forward(self.data.batch(batch))?;
        let labels: Vec<usize> = batch.iter().map(|&i| self.data.labels[i] as usize).collect();
        let (loss, grad, correct) = softmax_cross_entropy(logits.data(), 10, &labels)?;
        self.net.backward(Tensor::from_vec(&[batch.len(), 10], grad))?;
        Ok(BatchStats {
            loss,
            correct,
            count: batch.len(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MnistReport {
    pub variant: MnistVariant,
    pub train_items: usize,
    pub log: Vec<EpochStat>,
    pub test_accuracy: f64,
}

/// Trains the chosen variant on (optionally the first `train_limit` items
/// of) the training split and reports test accuracy.
pub fn mnist_experiment(
    data: &MnistData,
    variant: MnistVariant,
    cfg: &TrainConfig,
    train_limit: Option<usize>,
) -> Result<(MnistReport, MnistNet<f32>)> {
    let train_split = match train_limit {
        Some(n) => data.train.truncated(n),
        None => data.train.clone(),
    };
    let mut net = MnistNet::<f32>::new(variant, data.train.rows, data.train.cols, cfg.seed);
    let log = if cfg.epochs > 0 {
        let mut task = MnistTask {
            net: &mut net,
            data: &train_split,
        };
        train(&mut task, cfg)?
    } else {
        Vec::new()
    };
    let test_accuracy = net.accuracy(&data.test)?;
    Ok((
        MnistReport {
            variant,
            train_items: train_split.len(),
            log,
            test_accuracy,
        },
        net,
    ))
}
