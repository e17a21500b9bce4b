//! Hierarchical point network: TextureConv over geodesic patches on a
//! shrinking sample hierarchy, then inverse-distance upsampling with skip
//! connections back to every sample.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conv::{group_texture_cells, Aggregation, Neighborhoods};
use crate::error::{Error, Result};
use crate::geodesic::{extract_geodesic_patch, SampleIndex};
use crate::math::Vec3;
use crate::mesh::TriMesh;
use crate::nn::encoder::{PatchBatch, PatchEncoder};
use crate::nn::layers::{softmax_cross_entropy, Linear};
use crate::nn::pointcloud::{fps, knn_weights};
use crate::nn::tensor::{relu, Param, Real, Tensor};
use crate::rosy::SurfaceSample;

/// One encoder level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    /// Sample count; 0 keeps every input sample on the first level and a
    /// quarter of the previous level below it.
    pub samples: usize,
    /// Geodesic patch radius in meters.
    pub rho: f64,
    pub width: usize,
}

/// Layer widths and radii of the hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub levels: Vec<LevelSpec>,
    /// Width of the patch encoder (its depth is fixed at two layers).
    pub encoder_width: usize,
    pub head_width: usize,
    pub classes: usize,
    pub aggregation: Aggregation,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            levels: vec![
                LevelSpec {
                    samples: 0,
                    rho: 0.1,
                    width: 64,
                },
                LevelSpec {
                    samples: 0,
                    rho: 0.2,
                    width: 128,
                },
                LevelSpec {
                    samples: 0,
                    rho: 0.4,
                    width: 256,
                },
            ],
            encoder_width: 32,
            head_width: 64,
            classes: 3,
            aggregation: Aggregation::Max,
        }
    }
}

impl NetworkSpec {
    /// Per-level sample counts for `n` input samples.
    pub fn resolve_counts(&self, n: usize) -> Result<Vec<usize>> {
        if self.levels.is_empty() || self.classes == 0 {
            return Err(Error::InvalidArgument(
                "network needs at least one level and one class".into(),
            ));
        }
        let mut counts: Vec<usize> = Vec::with_capacity(self.levels.len());
        for (l, level) in self.levels.iter().enumerate() {
            let c = match (l, level.samples) {
                (0, 0) => n,
                (0, s) => s,
                (_, 0) => (counts[l - 1] / 4).max(1),
                (_, s) => s,
            };
            if l == 0 && c != n {
                return Err(Error::InvalidArgument(format!(
                    "first level expects {c} samples, got {n}"
                )));
            }
            if l > 0 && (c >= counts[l - 1] || c == 0) {
                return Err(Error::InvalidArgument(format!(
                    "level {l} keeps {c} of {} samples; counts must strictly decrease",
                    counts[l - 1]
                )));
            }
            if l > 0 && !(level.rho > self.levels[l - 1].rho) {
                return Err(Error::InvalidArgument(
                    "radii must strictly increase down the hierarchy".into(),
                ));
            }
            if !(level.rho > 0.0) || level.width == 0 {
                return Err(Error::InvalidArgument(format!(
                    "level {l} needs a positive radius and width"
                )));
            }
            counts.push(c);
        }
        Ok(counts)
    }
}

/// Everything geometric the network reads, computed once per sample set.
#[derive(Debug, Clone)]
pub struct UnetGeometry {
    pub counts: Vec<usize>,
    pub positions: Vec<Vec<Vec3>>,
    /// Level `l` rows are its samples; sources are level `l − 1` samples
    /// (level 0 reads itself).
    pub neighborhoods: Vec<Neighborhoods>,
    /// For `l ≥ 1`, the inverse-distance weights that carry level `l`
    /// features to each level `l − 1` sample.
    pub upsample: Vec<Vec<Vec<(usize, f64)>>>,
    /// For `l ≥ 1`, the level `l − 1` indices kept on level `l`.
    pub selection: Vec<Vec<usize>>,
}

impl UnetGeometry {
    /// Samples per level are chosen by furthest point sampling starting from
    /// sample `fps_seed`; each level's patches come from geodesic unfolding
    /// at its radius.
    pub fn build(mesh: &TriMesh, samples: &[SurfaceSample], spec: &NetworkSpec, fps_seed: usize) -> Result<Self> {
        let counts = spec.resolve_counts(samples.len())?;
        if fps_seed >= samples.len() {
            return Err(Error::InvalidArgument(format!("fps seed {fps_seed} out of range")));
        }
        let mut level_samples = vec![samples.to_vec()];
        let mut selection = vec![Vec::new()];
        for (l, &count) in counts.iter().enumerate().skip(1) {
            let prev = &level_samples[l - 1];
            let pos: Vec<Vec3> = prev.iter().map(|s| s.position).collect();
            let seed = if l == 1 { fps_seed } else { 0 };
            let sel = fps(&pos, count, seed)?;
            level_samples.push(sel.iter().map(|&i| prev[i]).collect());
            selection.push(sel);
        }
        let mut neighborhoods = Vec::with_capacity(counts.len());
        for l in 0..counts.len() {
            let src = &level_samples[l.saturating_sub(1)];
            let index = SampleIndex::new(mesh, src);
            let rho = spec.levels[l].rho;
            let mut nb = Neighborhoods::new();
            for center in &level_samples[l] {
                let patch = extract_geodesic_patch(mesh, src, &index, center, rho)?;
                for m in &patch.members {
                    let (_, cat) = group_texture_cells(m.t, rho)?;
                    nb.push(m.sample, cat);
                }
                nb.finish_row();
            }
            neighborhoods.push(nb);
        }
        let positions: Vec<Vec<Vec3>> = level_samples
            .iter()
            .map(|s| s.iter().map(|x| x.position).collect())
            .collect();
        let mut upsample = vec![Vec::new()];
        for l in 1..counts.len() {
            upsample.push(
                positions[l - 1]
                    .iter()
                    .map(|q| knn_weights(&positions[l], q, 3))
                    .collect(),
            );
        }
        Ok(UnetGeometry {
            counts,
            positions,
            neighborhoods,
            upsample,
            selection,
        })
    }

    pub fn levels(&self) -> usize {
        self.counts.len()
    }
}

struct Cache<T> {
    up_in: Vec<Vec<T>>,
    up_out: Vec<Vec<T>>,
    head_in: Vec<T>,
    head_hidden: Vec<T>,
}

/// The network parameters and the state of the last forward pass.
pub struct Unet<T: Real> {
    pub spec: NetworkSpec,
    pub encoder: Option<PatchEncoder<T>>,
    input_channels: usize,
    down: Vec<crate::nn::layers::TextureConvLayer<T>>,
    up: Vec<Linear<T>>,
    head: [Linear<T>; 2],
    cache: Option<Cache<T>>,
}

impl<T: Real> Unet<T> {
    /// `input_channels` is the per-point feature width, or the patch channel
    /// count when `with_encoder` is set.
    pub fn new(spec: NetworkSpec, input_channels: usize, with_encoder: bool, rng: &mut impl Rng) -> Self {
        let encoder =
            with_encoder.then(|| PatchEncoder::new(input_channels, spec.encoder_width, spec.aggregation, rng));
        let c0 = if with_encoder {
            spec.encoder_width
        } else {
            input_channels
        };
        let mut down = Vec::new();
        let mut prev = c0;
        for (l, level) in spec.levels.iter().enumerate() {
            down.push(crate::nn::layers::TextureConvLayer::new(
                &format!("down{l}"),
                prev,
                level.width,
                spec.aggregation,
                rng,
            ));
            prev = level.width;
        }
        let mut up = Vec::new();
        for l in 0..spec.levels.len() - 1 {
            let (w, wn) = (spec.levels[l].width, spec.levels[l + 1].width);
            up.push(Linear::new(&format!("up{l}"), wn + w, w, rng));
        }
        let head = [
            Linear::new("head0", spec.levels[0].width, spec.head_width, rng),
            Linear::new("head1", spec.head_width, spec.classes, rng),
        ];
        Unet {
            spec,
            encoder,
            input_channels,
            down,
            up,
            head,
            cache: None,
        }
    }

    pub fn params(&mut self) -> Vec<&mut Param<T>> {
        let mut p: Vec<&mut Param<T>> = Vec::new();
        if let Some(e) = &mut self.encoder {
            p.extend(e.params());
        }
        for d in &mut self.down {
            p.extend(d.params.iter_mut());
        }
        for u in &mut self.up {
            p.push(&mut u.weight);
            p.push(&mut u.bias);
        }
        for h in &mut self.head {
            p.push(&mut h.weight);
            p.push(&mut h.bias);
        }
        p
    }

    /// Logits (`samples × classes`) from patches through the encoder.
    pub fn forward_patches(&mut self, geom: &UnetGeometry, patches: &PatchBatch<T>) -> Result<Tensor<T>> {
        let enc = self
            .encoder
            .as_mut()
            .ok_or_else(|| Error::InvalidArgument("network was built without a patch encoder".into()))?;
        let f = enc.forward(patches)?;
        self.forward_features(geom, f.data())
    }

    /// Logits (`samples × classes`) from per-sample input features.
    pub fn forward_features(&mut self, geom: &UnetGeometry, x0: &[T]) -> Result<Tensor<T>> {
        let levels = self.spec.levels.len();
        if geom.levels() != levels {
            return Err(Error::InvalidArgument(format!(
                "geometry has {} levels, network {levels}",
                geom.levels()
            )));
        }
        let n0 = geom.counts[0];
        let c0 = self.down[0].c_in();
        if x0.len() != n0 * c0 {
            return Err(Error::Dimension(format!(
                "{} input values for {n0} samples × {c0} channels",
                x0.len()
            )));
        }
        let mut h: Vec<Vec<T>> = Vec::with_capacity(levels);
        for l in 0..levels {
            let (src, n_src) = if l == 0 {
                (x0, n0)
            } else {
                (&h[l - 1][..], geom.counts[l - 1])
            };
            let y = self.down[l].forward_with(src, n_src, &geom.neighborhoods[l])?;
            h.push(y);
        }
        let mut up_in = vec![Vec::new(); levels];
        let mut up_out = vec![Vec::new(); levels];
        up_out[levels - 1] = h[levels - 1].clone();
        for l in (0..levels.saturating_sub(1)).rev() {
            let (w, wn) = (self.spec.levels[l].width, self.spec.levels[l + 1].width);
            let coarse = &up_out[l + 1];
            let mut cat = vec![T::zero(); geom.counts[l] * (wn + w)];
            for (q, weights) in geom.upsample[l + 1].iter().enumerate() {
                let row = &mut cat[q * (wn + w)..(q + 1) * (wn + w)];
                for &(i, wt) in weights {
                    let wt = T::of(wt);
                    for c in 0..wn {
                        row[c] += wt * coarse[i * wn + c];
                    }
                }
                row[wn..].copy_from_slice(&h[l][q * w..(q + 1) * w]);
            }
            let y: Vec<T> = self.up[l].apply(&cat, geom.counts[l]).into_iter().map(relu).collect();
            up_in[l] = cat;
            up_out[l] = y;
        }
        let head_in = up_out[0].clone();
        let hidden: Vec<T> = self.head[0].apply(&head_in, n0).into_iter().map(relu).collect();
        let logits = self.head[1].apply(&hidden, n0);
        self.cache = Some(Cache {
            up_in,
            up_out,
            head_in,
            head_hidden: hidden,
        });
        Ok(Tensor::from_vec(&[n0, self.spec.classes], logits))
    }

    /// Backpropagates `grad` (`samples × classes`); returns the gradient of
    /// the per-sample input features, or of the patch values when the
    /// encoder ran.
    pub fn backward(&mut self, geom: &UnetGeometry, grad: &[T]) -> Result<Vec<T>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::InvalidArgument("backward before forward".into()))?;
        let levels = self.spec.levels.len();
        let n0 = geom.counts[0];
        let g_hidden = self.head[1].apply_backward(&cache.head_hidden, n0, grad);
        let g_hidden = mask_relu(g_hidden, &cache.head_hidden);
        let mut g_up_out: Vec<Vec<T>> = (0..levels)
            .map(|l| vec![T::zero(); geom.counts[l] * self.spec.levels[l].width])
            .collect();
        g_up_out[0] = self.head[0].apply_backward(&cache.head_in, n0, &g_hidden);
        let mut g_h: Vec<Vec<T>> = (0..levels)
            .map(|l| vec![T::zero(); geom.counts[l] * self.spec.levels[l].width])
            .collect();
        for l in 0..levels.saturating_sub(1) {
            let (w, wn) = (self.spec.levels[l].width, self.spec.levels[l + 1].width);
            let g_y = mask_relu(std::mem::take(&mut g_up_out[l]), &cache.up_out[l]);
            let g_cat = self.up[l].apply_backward(&cache.up_in[l], geom.counts[l], &g_y);
            for (q, weights) in geom.upsample[l + 1].iter().enumerate() {
                let row = &g_cat[q * (wn + w)..(q + 1) * (wn + w)];
                for &(i, wt) in weights {
                    let wt = T::of(wt);
                    for c in 0..wn {
                        g_up_out[l + 1][i * wn + c] += wt * row[c];
                    }
                }
                for c in 0..w {
                    g_h[l][q * w + c] += row[wn + c];
                }
            }
        }
        let last = std::mem::take(&mut g_up_out[levels - 1]);
        for (a, b) in g_h[levels - 1].iter_mut().zip(last) {
            *a += b;
        }
        let mut g_input = Vec::new();
        for l in (0..levels).rev() {
            let g = self.down[l].backward_with(&geom.neighborhoods[l], &g_h[l])?;
            if l == 0 {
                g_input = g;
            } else {
                for (a, b) in g_h[l - 1].iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
        match &mut self.encoder {
            Some(enc) => {
                let g = enc.backward(&Tensor::from_vec(&[n0, enc.width()], g_input))?;
                Ok(g.into_data())
            }
            None => Ok(g_input),
        }
    }

    /// Mean cross-entropy over all samples with gradients accumulated.
    pub fn loss_and_backward(
        &mut self,
        geom: &UnetGeometry,
        input: &UnetInput<T>,
        labels: &[usize],
    ) -> Result<(f64, usize)> {
        let logits = match input {
            UnetInput::Patches(p) => self.forward_patches(geom, p)?,
            UnetInput::Features(f) => self.forward_features(geom, f)?,
        };
        let (loss, grad, correct) = softmax_cross_entropy(logits.data(), self.spec.classes, labels)?;
        self.backward(geom, &grad)?;
        Ok((loss, correct))
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }
}

/// What feeds the first level.
pub enum UnetInput<T> {
    Patches(PatchBatch<T>),
    Features(Vec<T>),
}

fn mask_relu<T: Real>(mut g: Vec<T>, out: &[T]) -> Vec<T> {
    for (g, &y) in g.iter_mut().zip(out) {
        if !(y > T::zero()) {
            *g = T::zero();
        }
    }
    g
}
