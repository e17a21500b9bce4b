//! Patch encoder: compresses an `N × N` signal grid into one feature
//! vector per sample.

use rand::Rng;

use crate::conv::Aggregation;
use crate::error::{Error, Result};
use crate::nn::layers::{GlobalMaxPool, GridTextureConv, MaxPool2};
use crate::nn::tensor::{Param, Real, Tensor};
use crate::signal::SignalPatch;

/// A batch of equally sized patches as `b × N × N × C` plus masks.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchBatch<T> {
    pub values: Tensor<T>,
    pub mask: Vec<bool>,
}

impl<T: Real> PatchBatch<T> {
    pub fn from_patches(patches: &[&SignalPatch]) -> Result<Self> {
        let Some(first) = patches.first() else {
            return Err(Error::InvalidArgument("empty patch batch".into()));
        };
        let (n, c) = (first.n, first.channels);
        if patches.iter().any(|p| p.n != n || p.channels != c) {
            return Err(Error::Dimension("patches differ in size or channels".into()));
        }
        let values = patches
            .iter()
            .flat_map(|p| p.values.iter().map(|&v| T::of(v as f64)))
            .collect();
        let mask = patches.iter().flat_map(|p| p.mask.iter().copied()).collect();
        Ok(PatchBatch {
            values: Tensor::from_vec(&[patches.len(), n, n, c], values),
            mask,
        })
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Two grid TextureConv layers with a 2×2 max-pool between and a global
/// max-pool at the end. Masked grid entries never contribute.
pub struct PatchEncoder<T: Real> {
    conv1: GridTextureConv<T>,
    pool: MaxPool2<T>,
    conv2: GridTextureConv<T>,
    global: GlobalMaxPool<T>,
}

impl<T: Real> PatchEncoder<T> {
    pub fn new(channels: usize, width: usize, aggregation: Aggregation, rng: &mut impl Rng) -> Self {
        PatchEncoder {
            conv1: GridTextureConv::new("encoder.conv1", channels, width, aggregation, rng),
            pool: MaxPool2::new(),
            conv2: GridTextureConv::new("encoder.conv2", width, width, aggregation, rng),
            global: GlobalMaxPool::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.conv2.inner.c_out()
    }

    /// Returns `b × width` features.
    pub fn forward(&mut self, batch: &PatchBatch<T>) -> Result<Tensor<T>> {
        let (x, m) = self.conv1.forward_masked(&batch.values, Some(&batch.mask))?;
        let (x, m) = self.pool.forward_masked(&x, Some(&m))?;
        let (x, m) = self.conv2.forward_masked(&x, Some(&m))?;
        self.global.forward_masked(&x, Some(&m))
    }

    /// Gradient with respect to the batch values.
    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.global.backward_pool(grad);
        let g = self.conv2.backward_grid(&g)?;
        let g = self.pool.backward_pool(&g);
        self.conv1.backward_grid(&g)
    }

    pub fn params(&mut self) -> Vec<&mut Param<T>> {
        self.conv1
            .inner
            .params
            .iter_mut()
            .chain(self.conv2.inner.params.iter_mut())
            .collect()
    }
}

/// Feature vector of a single patch; an all-masked patch gives zeros.
pub fn encode_patch<T: Real>(patch: &SignalPatch, encoder: &mut PatchEncoder<T>) -> Result<Vec<T>> {
    let batch = PatchBatch::from_patches(&[patch])?;
    Ok(encoder.forward(&batch)?.into_data())
}
