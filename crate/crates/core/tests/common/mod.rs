//! Shared helpers for the integration suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradCheck {
    pub max_rel: f64,
    pub checked: usize,
    /// Coordinates skipped because the loss is not differentiable there.
    pub kinks: usize,
}

impl GradCheck {
    pub fn merge(self, other: GradCheck) -> GradCheck {
        GradCheck {
            max_rel: self.max_rel.max(other.max_rel),
            checked: self.checked + other.checked,
            kinks: self.kinks + other.kinks,
        }
    }
}

/// Gradients smaller than this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-4;

/// Compares `analytic[i]` against central differences for the coordinates
/// in `coords`. `eval(i, delta)` returns the loss with coordinate `i`
/// shifted by `delta`. A coordinate counts as a kink when its one-sided
/// slopes disagree by more than a tenth of their size, i.e. a max switch or
/// ReLU boundary lies within `eps`.
pub fn check_coords(
    coords: &[usize],
    analytic: &[f64],
    eps: f64,
    mut eval: impl FnMut(usize, f64) -> f64,
) -> GradCheck {
    let mut out = GradCheck::default();
    for &i in coords {
        let f0 = eval(i, 0.0);
        let fp = eval(i, eps);
        let fm = eval(i, -eps);
        let (dp, dm) = ((fp - f0) / eps, (f0 - fm) / eps);
        if (dp - dm).abs() > 0.1 * dp.abs().max(dm.abs()) + 1e-7 {
            out.kinks += 1;
            continue;
        }
        let num = (fp - fm) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - num).abs() / a.abs().max(num.abs()).max(REL_FLOOR);
        out.max_rel = out.max_rel.max(rel);
        out.checked += 1;
    }
    out
}

/// Up to `k` distinct indices below `n`, drawn with a fixed seed.
pub fn pick(n: usize, k: usize, seed: u64) -> Vec<usize> {
    if n <= k {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, n, k).into_vec()
}

pub fn uniform(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Loss `Σ r_k · y_k` for fixed random weights `r`.
pub fn dot(r: &[f64], y: &[f64]) -> f64 {
    r.iter().zip(y).map(|(a, b)| a * b).sum()
}

use rosynet::nn::encoder::PatchEncoder;
use rosynet::nn::mnist::MnistNet;
use rosynet::nn::unet::Unet;
use rosynet::nn::Param;

/// Models whose parameters can be perturbed in place.
pub trait Perturb {
    fn tensors(&mut self) -> Vec<&mut Param<f64>>;
}

impl Perturb for Unet<f64> {
    fn tensors(&mut self) -> Vec<&mut Param<f64>> {
        self.params()
    }
}

impl Perturb for PatchEncoder<f64> {
    fn tensors(&mut self) -> Vec<&mut Param<f64>> {
        self.params()
    }
}

impl Perturb for MnistNet<f64> {
    fn tensors(&mut self) -> Vec<&mut Param<f64>> {
        self.params()
    }
}

/// Checks the gradients already accumulated in `model` against central
/// differences of `loss`, on up to `per_tensor` coordinates of each tensor.
pub fn check_params<M: Perturb>(
    model: &mut M,
    per_tensor: usize,
    eps: f64,
    mut loss: impl FnMut(&mut M) -> f64,
) -> GradCheck {
    let count = model.tensors().len();
    let mut total = GradCheck::default();
    for t in 0..count {
        let analytic = model.tensors()[t].grad.clone();
        let coords = pick(analytic.len(), per_tensor, t as u64);
        let r = check_coords(&coords, &analytic, eps, |i, delta| {
            let orig = model.tensors()[t].value.data()[i];
            model.tensors()[t].value.data_mut()[i] = orig + delta;
            let f = loss(model);
            model.tensors()[t].value.data_mut()[i] = orig;
            f
        });
        total = total.merge(r);
    }
    total
}

use rosynet::conv::{
    conv_backward, conv_forward, rosy4m_conv_backward, rosy4m_conv_forward, Aggregation, CellCategory, Kernel,
    Neighborhoods,
};
use rosynet::nn::encoder::PatchBatch;
use rosynet::nn::layers::softmax_cross_entropy;
use rosynet::nn::mnist::MnistVariant;
use rosynet::nn::unet::{LevelSpec, NetworkSpec, UnetInput};
use rosynet::nn::Tensor;
use rosynet::toy::{prepare_scene, ToyConfig};

pub const EPS: f64 = 1e-4;

fn random_neighborhoods(rows: usize, n_src: usize, rng: &mut ChaCha8Rng) -> Neighborhoods {
    let cats = [CellCategory::Corner, CellCategory::Edge, CellCategory::Center];
    let mut nb = Neighborhoods::new();
    for r in 0..rows {
        // the last row stays empty
        let len = if r + 1 == rows { 0 } else { rng.random_range(1..8) };
        for _ in 0..len {
            nb.push(rng.random_range(0..n_src), cats[rng.random_range(0..3)]);
        }
        nb.finish_row();
    }
    nb
}

/// TextureConv on random neighborhoods: inputs, matrices and bias.
pub fn texture_conv_case(aggregation: Aggregation, seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_src, rows, ci, co) = (12, 7, 3, 4);
    let nb = random_neighborhoods(rows, n_src, &mut rng);
    let x = uniform(n_src * ci, &mut rng);
    let h: Vec<Vec<f64>> = (0..3).map(|_| uniform(ci * co, &mut rng)).collect();
    let bias = uniform(co, &mut rng);
    let r = uniform(rows * co, &mut rng);
    let loss = |x: &[f64], h: &[Vec<f64>], b: &[f64]| {
        let k = Kernel {
            c_in: ci,
            c_out: co,
            h: [&h[0], &h[1], &h[2]],
            bias: b,
            aggregation,
        };
        dot(&r, &conv_forward(&k, x, n_src, &nb).unwrap().0)
    };
    let k = Kernel {
        c_in: ci,
        c_out: co,
        h: [&h[0], &h[1], &h[2]],
        bias: &bias,
        aggregation,
    };
    let (_, cache) = conv_forward(&k, &x, n_src, &nb).unwrap();
    let g = conv_backward(&k, &x, n_src, &nb, &cache, &r).unwrap();

    let all = |n: usize| (0..n).collect::<Vec<_>>();
    let mut total = check_coords(&all(x.len()), &g.input, EPS, |i, d| {
        let mut x2 = x.clone();
        x2[i] += d;
        loss(&x2, &h, &bias)
    });
    for c in 0..3 {
        total = total.merge(check_coords(&all(ci * co), &g.h[c], EPS, |i, d| {
            let mut h2 = h.clone();
            h2[c][i] += d;
            loss(&x, &h2, &bias)
        }));
    }
    total.merge(check_coords(&all(co), &g.bias, EPS, |i, d| {
        let mut b2 = bias.clone();
        b2[i] += d;
        loss(&x, &h, &b2)
    }))
}

/// RoSy⁴(m) on a random 3×3 grid.
pub fn rosy4m_case(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ci, co) = (3, 5);
    let grid = uniform(9 * ci, &mut rng);
    let w = uniform(9 * ci * co, &mut rng);
    let r = uniform(co, &mut rng);
    let loss = |g: &[f64], w: &[f64]| dot(&r, &rosy4m_conv_forward(g, w, ci, co).unwrap().0);
    let (_, state) = rosy4m_conv_forward(&grid, &w, ci, co).unwrap();
    let (gg, gw) = rosy4m_conv_backward(&state, &grid, &w, ci, co, &r).unwrap();
    let all = |n: usize| (0..n).collect::<Vec<_>>();
    check_coords(&all(grid.len()), &gg, EPS, |i, d| {
        let mut g2 = grid.clone();
        g2[i] += d;
        loss(&g2, &w)
    })
    .merge(check_coords(&all(w.len()), &gw, EPS, |i, d| {
        let mut w2 = w.clone();
        w2[i] += d;
        loss(&grid, &w2)
    }))
}

/// Patch encoder on two random, partly masked patches.
pub fn encoder_case(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, n, c, width) = (2, 6, 2, 5);
    let mut enc = PatchEncoder::<f64>::new(c, width, Aggregation::Max, &mut rng);
    let values = uniform(b * n * n * c, &mut rng);
    let mask: Vec<bool> = (0..b * n * n).map(|i| i % 7 != 3).collect();
    let values: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(k, &v)| if mask[k / c] { v } else { 0.0 })
        .collect();
    let r = uniform(b * width, &mut rng);
    let batch = |v: &[f64]| PatchBatch {
        values: Tensor::from_vec(&[b, n, n, c], v.to_vec()),
        mask: mask.clone(),
    };
    enc.params().into_iter().for_each(|p| p.zero_grad());
    enc.forward(&batch(&values)).unwrap();
    let g_in = enc
        .backward(&Tensor::from_vec(&[b, width], r.clone()))
        .unwrap()
        .into_data();
    let valid: Vec<usize> = (0..values.len()).filter(|&k| mask[k / c]).collect();
    let inputs = check_coords(&valid, &g_in, EPS, |i, d| {
        let mut v = values.clone();
        v[i] += d;
        dot(&r, enc.forward(&batch(&v)).unwrap().data())
    });
    let params = check_params(&mut enc, 40, EPS, |e| {
        dot(&r, e.forward(&batch(&values)).unwrap().data())
    });
    inputs.merge(params)
}

/// The toy segmentation network end to end: encoder, TextureConv levels,
/// upsampling, head and cross-entropy.
pub fn unet_case(seed: u64) -> GradCheck {
    let cfg = ToyConfig {
        samples: 120,
        patch_n: 4,
        patch_d: 0.02,
        spec: NetworkSpec {
            levels: vec![
                LevelSpec {
                    samples: 0,
                    rho: 0.25,
                    width: 4,
                },
                LevelSpec {
                    samples: 30,
                    rho: 0.5,
                    width: 6,
                },
            ],
            encoder_width: 3,
            head_width: 5,
            classes: 3,
            aggregation: Aggregation::Max,
        },
        ..ToyConfig::default()
    };
    let scene = prepare_scene(seed, &cfg).unwrap();
    let mut net = Unet::<f64>::new(cfg.spec.clone(), 1, true, &mut ChaCha8Rng::seed_from_u64(seed));
    let input = UnetInput::Patches(scene.batch::<f64>().unwrap());
    net.params().into_iter().for_each(|p| p.zero_grad());
    net.loss_and_backward(&scene.geometry, &input, &scene.labels).unwrap();
    let UnetInput::Patches(batch) = &input else {
        unreachable!()
    };
    check_params(&mut net, 30, EPS, |m| {
        let logits = m.forward_patches(&scene.geometry, batch).unwrap();
        softmax_cross_entropy(logits.data(), 3, &scene.labels).unwrap().0
    })
}

/// The MNIST network with TextureConv layers on 8×8 images.
pub fn mnist_rosy_case(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = MnistNet::<f64>::new(MnistVariant::Rosy, 8, 8, seed);
    let b = 3;
    let x = uniform(b * 64, &mut rng);
    let labels = [1usize, 7, 3];
    let input = || Tensor::from_vec(&[b, 8, 8, 1], x.clone());
    net.params().into_iter().for_each(|p| p.zero_grad());
    let logits = net.forward(input()).unwrap();
    let (_, grad, _) = softmax_cross_entropy(logits.data(), 10, &labels).unwrap();
    net.backward(Tensor::from_vec(&[b, 10], grad)).unwrap();
    check_params(&mut net, 30, EPS, |m| {
        let logits = m.forward(input()).unwrap();
        softmax_cross_entropy(logits.data(), 10, &labels).unwrap().0
    })
}

use rosynet::TriMesh;

/// Writes `mesh` as a minimal OBJ file.
pub fn write_obj(mesh: &TriMesh, path: &std::path::Path) {
    use std::fmt::Write as _;
    let mut s = String::new();
    for p in mesh.positions() {
        writeln!(s, "v {} {} {}", p.x, p.y, p.z).unwrap();
    }
    for f in mesh.faces() {
        writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    std::fs::write(path, s).unwrap();
}

/// Writes a tiny MNIST-layout dataset (`count` random 28×28 images per
/// split) into `dir`.
pub fn write_synthetic_mnist(dir: &std::path::Path, count: usize, seed: u64) {
    use byteorder::{BigEndian, WriteBytesExt};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for prefix in ["train", "t10k"] {
        let mut img = Vec::new();
        img.write_u32::<BigEndian>(0x803).unwrap();
        for v in [count as u32, 28, 28] {
            img.write_u32::<BigEndian>(v).unwrap();
        }
        let mut lab = Vec::new();
        lab.write_u32::<BigEndian>(0x801).unwrap();
        lab.write_u32::<BigEndian>(count as u32).unwrap();
        for _ in 0..count {
            let label: u8 = rng.random_range(0..10);
            lab.push(label);
            // a bright square whose position encodes the label
            for r in 0..28 {
                for c in 0..28 {
                    let on = r / 10 == (label / 3) as usize && c / 10 == (label % 3) as usize;
                    img.push(if on { 255 } else { rng.random_range(0..30) });
                }
            }
        }
        std::fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), img).unwrap();
        std::fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), lab).unwrap();
    }
}
