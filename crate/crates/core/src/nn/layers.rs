//! Layers with explicit forward and backward passes. Images are stored
//! `batch × height × width × channels`; an optional per-pixel mask marks
//! which grid entries exist.

use rand::Rng;

use crate::conv::{conv_backward, conv_forward, Aggregation, CellCategory, ConvCache, Kernel, Neighborhoods};
use crate::error::{Error, Result};
use crate::nn::tensor::{relu, Param, Real, Tensor};

/// A differentiable stage of a sequential network.
pub trait Layer<T: Real>: Send {
    fn forward(&mut self, x: Tensor<T>) -> Result<Tensor<T>>;

    /// Gradient with respect to the last forward input; parameter gradients
    /// are accumulated.
    fn backward(&mut self, grad: Tensor<T>) -> Result<Tensor<T>>;

    fn params(&mut self) -> Vec<&mut Param<T>> {
        Vec::new()
    }
}

fn uniform<T: Real>(n: usize, fan_in: usize, rng: &mut impl Rng) -> Vec<T> {
    // He-uniform
    let a = (6.0 / fan_in.max(1) as f64).sqrt();
    (0..n).map(|_| T::of(rng.random_range(-a..a))).collect()
}

fn image_dims<T: Real>(x: &Tensor<T>) -> Result<[usize; 4]> {
    match *x.shape() {
        [b, h, w, c] => Ok([b, h, w, c]),
        ref s => Err(Error::Dimension(format!("expected a 4-d image batch, got shape {s:?}"))),
    }
}

/// Fully connected layer on the flattened trailing dimensions.
pub struct Linear<T: Real> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    input: Option<Tensor<T>>,
}

impl<T: Real> Linear<T> {
    pub fn new(name: &str, inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let b = 1.0 / (inputs.max(1) as f64).sqrt();
        Linear {
            weight: Param::new(
                format!("{name}.weight"),
                Tensor::from_vec(&[inputs, outputs], uniform(inputs * outputs, inputs, rng)),
            ),
            bias: Param::new(
                format!("{name}.bias"),
                Tensor::from_vec(
                    &[outputs],
                    (0..outputs).map(|_| T::of(rng.random_range(-b..b))).collect(),
                ),
            ),
            input: None,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.shape()[1]
    }

    /// `x · W + b` for `x` of `rows × inputs`.
    pub fn apply(&self, x: &[T], rows: usize) -> Vec<T> {
        let (i, o) = (self.inputs(), self.outputs());
        let mut y: Vec<T> = (0..rows).flat_map(|_| self.bias.value.data().iter().copied()).collect();
        T::gemm(
            rows,
            i,
            o,
            T::one(),
            x,
            false,
            self.weight.value.data(),
            false,
            T::one(),
            &mut y,
        );
        y
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn apply_backward(&mut self, x: &[T], rows: usize, grad: &[T]) -> Vec<T> {
        let (i, o) = (self.inputs(), self.outputs());
        T::gemm(
            i,
            rows,
            o,
            T::one(),
            x,
            true,
            grad,
            false,
            T::one(),
            &mut self.weight.grad,
        );
        for r in 0..rows {
            for c in 0..o {
                self.bias.grad[c] += grad[r * o + c];
            }
        }
        let mut gx = vec![T::zero(); rows * i];
        T::gemm(
            rows,
            o,
            i,
            T::one(),
            grad,
            false,
            self.weight.value.data(),
            true,
            T::zero(),
            &mut gx,
        );
        gx
    }
}

impl<T: Real> Layer<T> for Linear<T> {
    fn forward(&mut self, x: Tensor<T>) -> Result<Tensor<T>> {
        if x.row_len() != self.inputs() {
            return Err(Error::Dimension(format!(
                "linear layer expects {} inputs, got {}",
                self.inputs(),
                x.row_len()
            )));
        }
        let rows = x.rows();
        let y = self.apply(x.data(), rows);
        self.input = Some(x);
        Ok(Tensor::from_vec(&[rows, self.outputs()], y))
    }

    fn backward(&mut self, grad: Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .input
            .take()
            .ok_or_else(|| Error::InvalidArgument("backward before forward".into()))?;
        let gx = self.apply_backward(x.data(), x.rows(), grad.data());
        Ok(Tensor::from_vec(x.shape(), gx))
    }

    fn params(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Elementwise ReLU.
#[derive(Default)]
pub struct Relu<T> {
    active: Vec<bool>,
    _t: std::marker::PhantomData<T>,
}

impl<T: Real> Layer<T> for Relu<T> {
    fn forward(&mut self, mut x: Tensor<T>) -> Result<Tensor<T>> {
        self.active = x.data().iter().map(|&v| v > T::zero()).collect();
        x.data_mut().iter_mut().for_each(|v| *v = relu(*v));
        Ok(x)
    }

    fn backward(&mut self, mut grad: Tensor<T>) -> Result<Tensor<T>> {
        for (g, &a) in grad.data_mut().iter_mut().zip(&self.active) {
            if !a {
                *g = T::zero();
            }
        }
        Ok(grad)
    }
}

/// 3×3 convolution with zero padding, bias and ReLU: the RoSy¹ kernel slid
/// over an image. Weights are `9·c_in × c_out`, taps row-major.
pub struct Conv3x3<T: Real> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    cols: Vec<T>,
    dims: [usize; 4],
    active: Vec<bool>,
}

impl<T: Real> Conv3x3<T> {
    pub fn new(name: &str, c_in: usize, c_out: usize, rng: &mut impl Rng) -> Self {
        Conv3x3 {
            weight: Param::new(
                format!("{name}.weight"),
                Tensor::from_vec(&[9 * c_in, c_out], uniform(9 * c_in * c_out, 9 * c_in, rng)),
            ),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(&[c_out])),
            cols: Vec::new(),
            dims: [0; 4],
            active: Vec::new(),
        }
    }

    fn c_out(&self) -> usize {
        self.weight.value.shape()[1]
    }
}

impl<T: Real> Layer<T> for Conv3x3<T> {
    fn forward(&mut self, x: Tensor<T>) -> Result<Tensor<T>> {
        let [b, h, w, c] = image_dims(&x)?;
        if 9 * c != self.weight.value.shape()[0] {
            return Err(Error::Dimension(format!(
                "conv expects {} channels, got {c}",
                self.weight.value.shape()[0] / 9
            )));
        }
        let k = 9 * c;
        let rows = b * h * w;
        let mut cols = vec![T::zero(); rows * k];
        let xd = x.data();
        for n in 0..b {
            for y in 0..h {
                for xx in 0..w {
                    let row = &mut cols[((n * h + y) * w + xx) * k..][..k];
                    for ky in 0..3 {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for kx in 0..3 {
                            let sx = xx as isize + kx as isize - 1;
                            if sx < 0 || sx >= w as isize {
                                continue;
                            }
                            let src = ((n * h + sy as usize) * w + sx as usize) * c;
                            row[(ky * 3 + kx) * c..][..c].copy_from_slice(&xd[src..src + c]);
                        }
                    }
                }
            }
        }
        let co = self.c_out();
        let mut y: Vec<T> = (0..rows).flat_map(|_| self.bias.value.data().iter().copied()).collect();
        T::gemm(
            rows,
            k,
            co,
            T::one(),
            &cols,
            false,
            self.weight.value.data(),
            false,
            T::one(),
            &mut y,
        );
        self.active = y.iter().map(|&v| v > T::zero()).collect();
        y.iter_mut().for_each(|v| *v = relu(*v));
        self.cols = cols;
        self.dims = [b, h, w, c];
        Ok(Tensor::from_vec(&[b, h, w, co], y))
    }

    fn backward(&mut self, mut grad: Tensor<T>) -> Result<Tensor<T>> {
        let [b, h, w, c] = self.dims;
        let (k, co, rows) = (9 * c, self.c_out(), b * h * w);
        let g = grad.data_mut();
        for (v, &a) in g.iter_mut().zip(&self.active) {
            if !a {
                *v = T::zero();
            }
        }
        T::gemm(
            k,
            rows,
            co,
            T::one(),
            &self.cols,
            true,
            g,
            false,
            T::one(),
            &mut self.weight.grad,
        );
        for r in 0..rows {
            for o in 0..co {
                self.bias.grad[o] += g[r * co + o];
            }
        }
        let mut gcols = vec![T::zero(); rows * k];
        T::gemm(
            rows,
            co,
            k,
            T::one(),
            g,
            false,
            self.weight.value.data(),
            true,
            T::zero(),
            &mut gcols,
        );
        let mut gx = vec![T::zero(); b * h * w * c];
        for n in 0..b {
            for y in 0..h {
                for xx in 0..w {
                    let row = &gcols[((n * h + y) * w + xx) * k..][..k];
                    for ky in 0..3 {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for kx in 0..3 {
                            let sx = xx as isize + kx as isize - 1;
                            if sx < 0 || sx >= w as isize {
                                continue;
                            }
                            let dst = ((n * h + sy as usize) * w + sx as usize) * c;
                            for ch in 0..c {
                                gx[dst + ch] += row[(ky * 3 + kx) * c + ch];
                            }
                        }
                    }
                }
            }
        }
        Ok(Tensor::from_vec(&[b, h, w, c], gx))
    }

    fn params(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Neighborhoods of every pixel's 3×3 window: each existing pixel is one
/// point, its offset from the window center fixing the category.
pub fn grid_neighborhoods(b: usize, h: usize, w: usize, mask: Option<&[bool]>) -> (Neighborhoods, Vec<bool>) {
    let mut nb = Neighborhoods::new();
    let mut out_mask = Vec::with_capacity(b * h * w);
    for n in 0..b {
        for y in 0..h {
            for x in 0..w {
                let before = nb.rows();
                let mut any = false;
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = x as isize + kx as isize - 1;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        let src = (n * h + sy as usize) * w + sx as usize;
                        if mask.is_none_or(|m| m[src]) {
                            nb.push(src, CellCategory::of_cell(ky, kx));
                            any = true;
                        }
                    }
                }
                nb.finish_row();
                debug_assert_eq!(nb.rows(), before + 1);
                out_mask.push(any);
            }
        }
    }
    (nb, out_mask)
}

/// TextureConv parameters with the state of the last forward pass, applied
/// over caller-provided neighborhoods.
pub struct TextureConvLayer<T: Real> {
    /// Corner, edge and center matrices, then the bias.
    pub params: [Param<T>; 4],
    pub aggregation: Aggregation,
    state: Option<(Vec<T>, usize, ConvCache<T>)>,
}

impl<T: Real> TextureConvLayer<T> {
    pub fn new(name: &str, c_in: usize, c_out: usize, aggregation: Aggregation, rng: &mut impl Rng) -> Self {
        let p = |suffix: &str, rng: &mut _| {
            Param::new(
                format!("{name}.{suffix}"),
                Tensor::from_vec(&[c_in, c_out], uniform(c_in * c_out, c_in, rng)),
            )
        };
        let h1 = p("h1", rng);
        let h2 = p("h2", rng);
        let h3 = p("h3", rng);
        TextureConvLayer {
            params: [h1, h2, h3, Param::new(format!("{name}.bias"), Tensor::zeros(&[c_out]))],
            aggregation,
            state: None,
        }
    }

    pub fn c_in(&self) -> usize {
        self.params[0].value.shape()[0]
    }

    pub fn c_out(&self) -> usize {
        self.params[0].value.shape()[1]
    }

    pub fn kernel(&self) -> Kernel<'_, T> {
        Kernel {
            c_in: self.c_in(),
            c_out: self.c_out(),
            h: [
                self.params[0].value.data(),
                self.params[1].value.data(),
                self.params[2].value.data(),
            ],
            bias: self.params[3].value.data(),
            aggregation: self.aggregation,
        }
    }

    /// `features` is `n_src × c_in`; returns `nb.rows() × c_out`.
    pub fn forward_with(&mut self, features: &[T], n_src: usize, nb: &Neighborhoods) -> Result<Vec<T>> {
        let (y, cache) = conv_forward(&self.kernel(), features, n_src, nb)?;
        self.state = Some((features.to_vec(), n_src, cache));
        Ok(y)
    }

    /// Accumulates parameter gradients; `nb` must be the forward one.
    pub fn backward_with(&mut self, nb: &Neighborhoods, grad: &[T]) -> Result<Vec<T>> {
        let (input, n_src, cache) = self
            .state
            .take()
            .ok_or_else(|| Error::InvalidArgument("backward before forward".into()))?;
        let g = conv_backward(&self.kernel(), &input, n_src, nb, &cache, grad)?;
        for c in 0..3 {
            for (a, b) in self.params[c].grad.iter_mut().zip(&g.h[c]) {
                *a += *b;
            }
        }
        for (a, b) in self.params[3].grad.iter_mut().zip(&g.bias) {
            *a += *b;
        }
        Ok(g.input)
    }
}

/// TextureConv slid over an image: every pixel's 3×3 window is a patch with
/// cells of one pixel, so ρ is 1.5 pixels. Missing pixels (outside the image
/// or masked) do not contribute.
pub struct GridTextureConv<T: Real> {
    pub inner: TextureConvLayer<T>,
    cached_nb: Option<([usize; 3], Neighborhoods)>,
    masked_nb: Option<Neighborhoods>,
    dims: [usize; 4],
}

impl<T: Real> GridTextureConv<T> {
    pub fn new(name: &str, c_in: usize, c_out: usize, aggregation: Aggregation, rng: &mut impl Rng) -> Self {
        GridTextureConv {
            inner: TextureConvLayer::new(name, c_in, c_out, aggregation, rng),
            cached_nb: None,
            masked_nb: None,
            dims: [0; 4],
        }
    }

    /// Forward pass with an optional `b·h·w` mask; returns the output and
    /// its mask (a pixel exists when its window holds any input pixel).
    pub fn forward_masked(&mut self, x: &Tensor<T>, mask: Option<&[bool]>) -> Result<(Tensor<T>, Vec<bool>)> {
        let [b, h, w, c] = image_dims(x)?;
        if c != self.inner.c_in() {
            return Err(Error::Dimension(format!(
                "texture conv expects {} channels, got {c}",
                self.inner.c_in()
            )));
        }
        let n_src = b * h * w;
        self.dims = [b, h, w, c];
        let (y, out_mask) = match mask {
            Some(m) => {
                let (nb, om) = grid_neighborhoods(b, h, w, Some(m));
                let y = self.inner.forward_with(x.data(), n_src, &nb)?;
                self.masked_nb = Some(nb);
                (y, om)
            }
            None => {
                if self.cached_nb.as_ref().is_none_or(|(d, _)| *d != [b, h, w]) {
                    self.cached_nb = Some(([b, h, w], grid_neighborhoods(b, h, w, None).0));
                }
                self.masked_nb = None;
                let nb = &self.cached_nb.as_ref().unwrap().1;
                (self.inner.forward_with(x.data(), n_src, nb)?, vec![true; n_src])
            }
        };
        Ok((Tensor::from_vec(&[b, h, w, self.inner.c_out()], y), out_mask))
    }

    pub fn backward_grid(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let nb = match &self.masked_nb {
            Some(nb) => nb,
            None => {
                &self
                    .cached_nb
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("backward before forward".into()))?
                    .1
            }
        };
        let g = self.inner.backward_with(nb, grad.data())?;
        Ok(Tensor::from_vec(&self.dims, g))
    }
}

impl<T: Real> Layer<T> for GridTextureConv<T> {
    fn forward(&mut self, x: Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_masked(&x, None)?.0)
    }

    fn backward(&mut self, grad: Tensor<T>) -> Result<Tensor<T>> {
        self.backward_grid(&grad)
    }

    fn params(&mut self) -> Vec<&mut Param<T>> {
        self.inner.params.iter_mut().collect()
    }
}

/// 2×2 max pooling with stride 2 (a trailing odd row or column is dropped).
/// With a mask, missing pixels are skipped and a window with none yields a
/// missing zero output.
#[derive(Default)]
pub struct MaxPool2<T> {
    arg: Vec<usize>,
    in_dims: [usize; 4],
    _t: std::marker::PhantomData<T>,
}

impl<T: Real> MaxPool2<T> {
    pub fn new() -> Self {
        MaxPool2 {
            arg: Vec::new(),
            in_dims: [0; 4],
            _t: std::marker::PhantomData,
        }
    }

    pub fn forward_masked(&mut self, x: &Tensor<T>, mask: Option<&[bool]>) -> Result<(Tensor<T>, Vec<bool>)> {
        let [b, h, w, c] = image_dims(x)?;
        let (oh, ow) = (h / 2, w / 2);
        let xd = x.data();
        let mut y = vec![T::zero(); b * oh * ow * c];
        let mut arg = vec![usize::MAX; y.len()];
        let mut out_mask = vec![false; b * oh * ow];
        for n in 0..b {
            for oy in 0..oh {
                for ox in 0..ow {
                    let o = (n * oh + oy) * ow + ox;
                    for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let p = (n * h + 2 * oy + dy) * w + 2 * ox + dx;
                        if mask.is_some_and(|m| !m[p]) {
                            continue;
                        }
                        for ch in 0..c {
                            let v = xd[p * c + ch];
                            if arg[o * c + ch] == usize::MAX || v > y[o * c + ch] {
                                y[o * c + ch] = v;
                                arg[o * c + ch] = p * c + ch;
                            }
                        }
                        out_mask[o] = true;
                    }
                }
            }
        }
        self.arg = arg;
        self.in_dims = [b, h, w, c];
        Ok((Tensor::from_vec(&[b, oh, ow, c], y), out_mask))
    }

    pub fn backward_pool(&mut self, grad: &Tensor<T>) -> Tensor<T> {
        let mut gx = vec![T::zero(); self.in_dims.iter().product()];
        for (g, &a) in grad.data().iter().zip(&self.arg) {
            if a != usize::MAX {
                gx[a] += *g;
            }
        }
        Tensor::from_vec(&self.in_dims, gx)
    }
}

impl<T: Real> Layer<T> for MaxPool2<T> {
    fn forward(&mut self, x: Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_masked(&x, None)?.0)
    }

    fn backward(&mut self, grad: Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.backward_pool(&grad))
    }
}

/// Channel-wise max over all existing pixels of each image; an image with
/// none gives zeros.
#[derive(Default)]
pub struct GlobalMaxPool<T> {
    arg: Vec<usize>,
    in_dims: [usize; 4],
    _t: std::marker::PhantomData<T>,
}

impl<T: Real> GlobalMaxPool<T> {
    pub fn new() -> Self {
        GlobalMaxPool {
            arg: Vec::new(),
            in_dims: [0; 4],
            _t: std::marker::PhantomData,
        }
    }

    pub fn forward_masked(&mut self, x: &Tensor<T>, mask: Option<&[bool]>) -> Result<Tensor<T>> {
        let [b, h, w, c] = image_dims(x)?;
        let xd = x.data();
        let mut y = vec![T::zero(); b * c];
        let mut arg = vec![usize::MAX; b * c];
        for n in 0..b {
            for p in n * h * w..(n + 1) * h * w {
                if mask.is_some_and(|m| !m[p]) {
                    continue;
                }
                for ch in 0..c {
                    let v = xd[p * c + ch];
                    if arg[n * c + ch] == usize::MAX || v > y[n * c + ch] {
                        y[n * c + ch] = v;
                        arg[n * c + ch] = p * c + ch;
                    }
                }
            }
        }
        self.arg = arg;
        self.in_dims = [b, h, w, c];
        Ok(Tensor::from_vec(&[b, c], y))
    }

    pub fn backward_pool(&mut self, grad: &Tensor<T>) -> Tensor<T> {
        let mut gx = vec![T::zero(); self.in_dims.iter().product()];
        for (g, &a) in grad.data().iter().zip(&self.arg) {
            if a != usize::MAX {
                gx[a] += *g;
            }
        }
        Tensor::from_vec(&self.in_dims, gx)
    }
}

/// Mean softmax cross-entropy over rows of `logits` (`rows × classes`).
/// Returns `(loss, gradient of the mean loss, correct predictions)`;
/// argmax ties go to the lower class.
pub fn softmax_cross_entropy<T: Real>(logits: &[T], classes: usize, labels: &[usize]) -> Result<(f64, Vec<T>, usize)> {
    let rows = labels.len();
    if logits.len() != rows * classes {
        return Err(Error::Dimension(format!(
            "{} logits for {rows} rows × {classes} classes",
            logits.len()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidArgument(format!("label {l} out of {classes} classes")));
    }
    let mut loss = 0.0;
    let mut correct = 0;
    let mut grad = vec![T::zero(); logits.len()];
    let inv = 1.0 / rows.max(1) as f64;
    for (r, &label) in labels.iter().enumerate() {
        let z = &logits[r * classes..(r + 1) * classes];
        let m = z.iter().fold(f64::NEG_INFINITY, |a, v| a.max(v.f64()));
        let e: Vec<f64> = z.iter().map(|v| (v.f64() - m).exp()).collect();
        let s: f64 = e.iter().sum();
        loss += -(e[label] / s).ln();
        let best = (0..classes).fold(0, |b, k| if z[k] > z[b] { k } else { b });
        if best == label {
            correct += 1;
        }
        for k in 0..classes {
            let p = e[k] / s - if k == label { 1.0 } else { 0.0 };
            grad[r * classes + k] = T::of(p * inv);
        }
    }
    Ok((loss * inv, grad, correct))
}

/// Index of the largest entry of each row; ties go to the lower index.
pub fn argmax_rows<T: Real>(values: &[T], cols: usize) -> Vec<usize> {
    values
        .chunks(cols)
        .map(|z| (0..cols).fold(0, |b, k| if z[k] > z[b] { k } else { b }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pooling_skips_masked_pixels() {
        let x = Tensor::<f64>::from_vec(&[1, 2, 2, 1], vec![5.0, -1.0, -2.0, -3.0]);
        let mut p = MaxPool2::new();
        let (y, m) = p.forward_masked(&x, Some(&[false, true, true, true])).unwrap();
        assert_eq!(y.data(), &[-1.0]);
        assert_eq!(m, vec![true]);
        let (y, m) = p.forward_masked(&x, Some(&[false; 4])).unwrap();
        assert_eq!((y.data(), m), (&[0.0][..], vec![false]));
    }

    #[test]
    fn softmax_uniform_logits() {
        let (loss, grad, _) = softmax_cross_entropy(&[0.0f64; 4], 4, &[2]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((grad[2] + 0.75).abs() < 1e-12 && (grad[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn grid_conv_matches_point_conv_at_each_pixel() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut layer = GridTextureConv::<f64>::new("t", 2, 3, Aggregation::Max, &mut rng);
        let x = Tensor::from_vec(&[1, 4, 5, 2], (0..40).map(|_| rng.random_range(-1.0..1.0)).collect());
        let y = layer.forward(x.clone()).unwrap();
        let w = crate::conv::TextureConvWeights {
            c_in: 2,
            c_out: 3,
            h: std::array::from_fn(|c| layer.inner.params[c].value.data().to_vec()),
            bias: layer.inner.params[3].value.data().to_vec(),
            aggregation: Aggregation::Max,
        };
        for py in 0..4 {
            for px in 0..5 {
                let mut coords = Vec::new();
                let mut feats = Vec::new();
                for sy in 0..4i32 {
                    for sx in 0..5i32 {
                        let (dy, dx) = (sy - py as i32, sx - px as i32);
                        if dy.abs() <= 1 && dx.abs() <= 1 {
                            coords.push(crate::math::Vec2::new(dx as f64, dy as f64));
                            feats.extend_from_slice(&x.data()[((sy * 5 + sx) * 2) as usize..][..2]);
                        }
                    }
                }
                let (want, _) = crate::conv::texture_conv_forward(&coords, &feats, 1.5, &w).unwrap();
                let got = &y.data()[(py * 5 + px) * 3..][..3];
                assert_eq!(got, &want[..]);
            }
        }
    }
}
