//! TextureConv: texture-space 3×3 grouping with weights shared by cell
//! category, followed by a permutation-invariant channel pool. Also the
//! RoSy⁴(m) and RoSy¹ comparison kernels on cell-pooled grids.

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::Vec2;
use crate::nn::tensor::{relu, Real};

/// Position class of a cell in the 3×3 grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellCategory {
    Corner,
    Edge,
    Center,
}

impl CellCategory {
    pub fn of_cell(row: usize, col: usize) -> Self {
        match (row, col) {
            (1, 1) => CellCategory::Center,
            (0 | 2, 0 | 2) => CellCategory::Corner,
            _ => CellCategory::Edge,
        }
    }

    /// 0 for corner, 1 for edge, 2 for center; the index of the matching
    /// weight matrix.
    pub fn index(self) -> usize {
        match self {
            CellCategory::Corner => 0,
            CellCategory::Edge => 1,
            CellCategory::Center => 2,
        }
    }
}

/// Cell of texture coordinate `t` in the 3×3 grid of side `2ρ/3` covering
/// `[−ρ, ρ)²`. Row follows `t.y`, column follows `t.x`.
pub fn group_texture_cells(t: Vec2, rho: f64) -> Result<((usize, usize), CellCategory)> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {rho}")));
    }
    if !(t.x.abs() < rho && t.y.abs() < rho) {
        return Err(Error::InvalidArgument(format!(
            "coordinate ({}, {}) outside the patch of radius {rho}",
            t.x, t.y
        )));
    }
    let side = 2.0 * rho / 3.0;
    let cell = |v: f64| (((v + rho) / side).floor().max(0.0) as usize).min(2);
    let (row, col) = (cell(t.y), cell(t.x));
    Ok(((row, col), CellCategory::of_cell(row, col)))
}

/// Channel pool applied over the points of a patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Max,
    Avg,
}

/// Per-destination lists of `(source row, category index)`, stored flat.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Neighborhoods {
    offsets: Vec<usize>,
    src: Vec<u32>,
    cat: Vec<u8>,
}

impl Neighborhoods {
    pub fn new() -> Self {
        Neighborhoods {
            offsets: vec![0],
            src: Vec::new(),
            cat: Vec::new(),
        }
    }

    pub fn push(&mut self, src: usize, cat: CellCategory) {
        self.src.push(src as u32);
        self.cat.push(cat.index() as u8);
    }

    /// Closes the current destination's list.
    pub fn finish_row(&mut self) {
        self.offsets.push(self.src.len());
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (a, b) = (self.offsets[r], self.offsets[r + 1]);
        self.src[a..b]
            .iter()
            .zip(&self.cat[a..b])
            .map(|(&s, &c)| (s as usize, c as usize))
    }

    pub fn row_len(&self, r: usize) -> usize {
        self.offsets[r + 1] - self.offsets[r]
    }

    pub fn max_source(&self) -> Option<usize> {
        self.src.iter().max().map(|&s| s as usize)
    }
}

/// Borrowed TextureConv parameters.
#[derive(Debug, Clone, Copy)]
pub struct Kernel<'a, T> {
    pub c_in: usize,
    pub c_out: usize,
    /// Corner, edge and center matrices, each `c_in × c_out` row-major.
    pub h: [&'a [T]; 3],
    pub bias: &'a [T],
    pub aggregation: Aggregation,
}

impl<T: Real> Kernel<'_, T> {
    fn check(&self, features: &[T], n_src: usize) -> Result<()> {
        let m = self.c_in * self.c_out;
        if self.h.iter().any(|h| h.len() != m) || self.bias.len() != self.c_out {
            return Err(Error::Dimension(format!(
                "kernel {}×{} with matrices {:?} and bias {}",
                self.c_in,
                self.c_out,
                self.h.map(|h| h.len()),
                self.bias.len()
            )));
        }
        if features.len() != n_src * self.c_in {
            return Err(Error::Dimension(format!(
                "{} feature values for {n_src} points × {} channels",
                features.len(),
                self.c_in
            )));
        }
        Ok(())
    }
}

/// What the backward pass needs from a forward pass.
#[derive(Debug, Clone, Default)]
pub struct ConvCache<T> {
    /// Pre-activation output, `rows × c_out`.
    pub z: Vec<T>,
    /// For max pooling, the winning position within each row's list per
    /// channel; `u32::MAX` for empty rows.
    pub arg: Vec<u32>,
}

/// Batched TextureConv over `nb.rows()` destinations reading
/// `features` (`n_src × c_in`).
pub fn conv_forward<T: Real>(
    k: &Kernel<T>,
    features: &[T],
    n_src: usize,
    nb: &Neighborhoods,
) -> Result<(Vec<T>, ConvCache<T>)> {
    k.check(features, n_src)?;
    if nb.max_source().is_some_and(|s| s >= n_src) {
        return Err(Error::Dimension(format!("neighborhood refers past {n_src} sources")));
    }
    let co = k.c_out;
    let resp = responses(k, features, n_src);
    let rows = nb.rows();
    let mut z = vec![T::zero(); rows * co];
    let mut arg = if k.aggregation == Aggregation::Max {
        vec![u32::MAX; rows * co]
    } else {
        Vec::new()
    };
    let mut out = vec![T::zero(); rows * co];
    for r in 0..rows {
        let n = nb.row_len(r);
        if n == 0 {
            continue;
        }
        let zr = &mut z[r * co..(r + 1) * co];
        match k.aggregation {
            Aggregation::Max => {
                let ar = &mut arg[r * co..(r + 1) * co];
                zr.iter_mut().for_each(|v| *v = T::neg_infinity());
                for (pos, (s, c)) in nb.row(r).enumerate() {
                    let src = &resp[c][s * co..(s + 1) * co];
                    for ch in 0..co {
                        // strict comparison keeps the lowest index on ties
                        if src[ch] > zr[ch] {
                            zr[ch] = src[ch];
                            ar[ch] = pos as u32;
                        }
                    }
                }
            }
            Aggregation::Avg => {
                for (s, c) in nb.row(r) {
                    let src = &resp[c][s * co..(s + 1) * co];
                    for ch in 0..co {
                        zr[ch] += src[ch];
                    }
                }
                let inv = T::one() / T::of(n as f64);
                zr.iter_mut().for_each(|v| *v *= inv);
            }
        }
        for ch in 0..co {
            zr[ch] += k.bias[ch];
            out[r * co + ch] = relu(zr[ch]);
        }
    }
    Ok((out, ConvCache { z, arg }))
}

fn responses<T: Real>(k: &Kernel<T>, features: &[T], n_src: usize) -> [Vec<T>; 3] {
    std::array::from_fn(|c| {
        let mut r = vec![T::zero(); n_src * k.c_out];
        T::gemm(
            n_src,
            k.c_in,
            k.c_out,
            T::one(),
            features,
            false,
            k.h[c],
            false,
            T::zero(),
            &mut r,
        );
        r
    })
}

/// Gradients of one TextureConv application.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    /// `n_src × c_in`.
    pub input: Vec<T>,
    pub h: [Vec<T>; 3],
    pub bias: Vec<T>,
}

/// Reverse pass of [`conv_forward`] for upstream gradient `grad_out`
/// (`rows × c_out`).
pub fn conv_backward<T: Real>(
    k: &Kernel<T>,
    features: &[T],
    n_src: usize,
    nb: &Neighborhoods,
    cache: &ConvCache<T>,
    grad_out: &[T],
) -> Result<ConvGrads<T>> {
    k.check(features, n_src)?;
    let co = k.c_out;
    let rows = nb.rows();
    if grad_out.len() != rows * co || cache.z.len() != rows * co {
        return Err(Error::Dimension(format!(
            "gradient of {} values for {rows} rows × {co} channels",
            grad_out.len()
        )));
    }
    let mut gr: [Vec<T>; 3] = std::array::from_fn(|_| vec![T::zero(); n_src * co]);
    let mut bias = vec![T::zero(); co];
    let mut gz = vec![T::zero(); co];
    for r in 0..rows {
        let n = nb.row_len(r);
        if n == 0 {
            continue;
        }
        for ch in 0..co {
            gz[ch] = if cache.z[r * co + ch] > T::zero() {
                grad_out[r * co + ch]
            } else {
                T::zero()
            };
            bias[ch] += gz[ch];
        }
        match k.aggregation {
            Aggregation::Max => {
                let members: Vec<(usize, usize)> = nb.row(r).collect();
                for ch in 0..co {
                    let a = cache.arg[r * co + ch];
                    if a != u32::MAX {
                        let (s, c) = members[a as usize];
                        gr[c][s * co + ch] += gz[ch];
                    }
                }
            }
            Aggregation::Avg => {
                let inv = T::one() / T::of(n as f64);
                for (s, c) in nb.row(r) {
                    for ch in 0..co {
                        gr[c][s * co + ch] += gz[ch] * inv;
                    }
                }
            }
        }
    }
    let mut input = vec![T::zero(); n_src * k.c_in];
    let mut h: [Vec<T>; 3] = std::array::from_fn(|_| vec![T::zero(); k.c_in * co]);
    for c in 0..3 {
        T::gemm(
            k.c_in,
            n_src,
            co,
            T::one(),
            features,
            true,
            &gr[c],
            false,
            T::zero(),
            &mut h[c],
        );
        T::gemm(
            n_src,
            co,
            k.c_in,
            T::one(),
            &gr[c],
            false,
            k.h[c],
            true,
            T::one(),
            &mut input,
        );
    }
    Ok(ConvGrads { input, h, bias })
}

/// Owned TextureConv parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureConvWeights<T> {
    pub c_in: usize,
    pub c_out: usize,
    /// Corner, edge and center 1×1 convolutions, each `c_in × c_out`.
    pub h: [Vec<T>; 3],
    pub bias: Vec<T>,
    pub aggregation: Aggregation,
}

impl<T: Real> TextureConvWeights<T> {
    pub fn zeros(c_in: usize, c_out: usize, aggregation: Aggregation) -> Self {
        TextureConvWeights {
            c_in,
            c_out,
            h: std::array::from_fn(|_| vec![T::zero(); c_in * c_out]),
            bias: vec![T::zero(); c_out],
            aggregation,
        }
    }

    /// Uniform entries in `[−1/√c_in, 1/√c_in)`, bias included.
    pub fn random(c_in: usize, c_out: usize, aggregation: Aggregation, rng: &mut impl Rng) -> Self {
        let a = 1.0 / (c_in.max(1) as f64).sqrt();
        let mut draw = |n: usize| (0..n).map(|_| T::of(rng.random_range(-a..a))).collect::<Vec<T>>();
        let h = [draw(c_in * c_out), draw(c_in * c_out), draw(c_in * c_out)];
        let bias = draw(c_out);
        TextureConvWeights {
            c_in,
            c_out,
            h,
            bias,
            aggregation,
        }
    }

    pub fn kernel(&self) -> Kernel<'_, T> {
        Kernel {
            c_in: self.c_in,
            c_out: self.c_out,
            h: [&self.h[0], &self.h[1], &self.h[2]],
            bias: &self.bias,
            aggregation: self.aggregation,
        }
    }
}

/// Saved forward state of [`texture_conv_forward`].
#[derive(Debug, Clone)]
pub struct TextureConvState<T> {
    features: Vec<T>,
    count: usize,
    nb: Neighborhoods,
    cache: ConvCache<T>,
}

/// TextureConv over one patch: `coords[p]` is the texture coordinate of
/// point `p`, `features` holds its `c_in` channels row-major. Points outside
/// the patch do not contribute; an empty patch gives zeros.
pub fn texture_conv_forward<T: Real>(
    coords: &[Vec2],
    features: &[T],
    rho: f64,
    w: &TextureConvWeights<T>,
) -> Result<(Vec<T>, TextureConvState<T>)> {
    let mut nb = Neighborhoods::new();
    for (p, t) in coords.iter().enumerate() {
        if let Ok((_, cat)) = group_texture_cells(*t, rho) {
            nb.push(p, cat);
        }
    }
    nb.finish_row();
    let (out, cache) = conv_forward(&w.kernel(), features, coords.len(), &nb)?;
    Ok((
        out,
        TextureConvState {
            features: features.to_vec(),
            count: coords.len(),
            nb,
            cache,
        },
    ))
}

/// Reverse pass of [`texture_conv_forward`]: gradients for every input
/// feature, the three matrices and the bias.
pub fn texture_conv_backward<T: Real>(
    state: &TextureConvState<T>,
    w: &TextureConvWeights<T>,
    grad_out: &[T],
) -> Result<ConvGrads<T>> {
    conv_backward(
        &w.kernel(),
        &state.features,
        state.count,
        &state.nb,
        &state.cache,
        grad_out,
    )
}

/// Mean feature of the points in each of the 3×3 cells (`9 × c`, row-major
/// over `(row, col)`); empty cells are zero.
pub fn pool_cells<T: Real>(coords: &[Vec2], features: &[T], c: usize, rho: f64) -> Result<Vec<T>> {
    if features.len() != coords.len() * c {
        return Err(Error::Dimension(format!(
            "{} values for {} points",
            features.len(),
            coords.len()
        )));
    }
    let mut grid = vec![T::zero(); 9 * c];
    let mut count = [0usize; 9];
    for (p, t) in coords.iter().enumerate() {
        let Ok(((row, col), _)) = group_texture_cells(*t, rho) else {
            continue;
        };
        let cell = row * 3 + col;
        count[cell] += 1;
        for ch in 0..c {
            grid[cell * c + ch] += features[p * c + ch];
        }
    }
    for cell in 0..9 {
        if count[cell] > 0 {
            let inv = T::one() / T::of(count[cell] as f64);
            grid[cell * c..(cell + 1) * c].iter_mut().for_each(|v| *v *= inv);
        }
    }
    Ok(grid)
}

/// The grid seen in a frame turned by `quarter`·90°: a point at `(x, y)`
/// appears at `(−y, x)` per quarter turn.
pub fn rotate_grid<T: Real>(grid: &[T], c: usize, quarter: usize) -> Vec<T> {
    let mut g = grid.to_vec();
    for _ in 0..quarter % 4 {
        let mut next = vec![T::zero(); g.len()];
        for row in 0..3 {
            for col in 0..3 {
                // (row, col) moves to (col, 2 − row)
                let (r2, c2) = (col, 2 - row);
                next[(r2 * 3 + c2) * c..(r2 * 3 + c2 + 1) * c]
                    .copy_from_slice(&g[(row * 3 + col) * c..(row * 3 + col + 1) * c]);
            }
        }
        g = next;
    }
    g
}

fn check_grid<T>(grid: &[T], w: &[T], c_in: usize, c_out: usize) -> Result<()> {
    if grid.len() != 9 * c_in || w.len() != 9 * c_in * c_out {
        return Err(Error::Dimension(format!(
            "grid of {} and weights of {} values for {c_in}→{c_out} channels",
            grid.len(),
            w.len()
        )));
    }
    Ok(())
}

fn conv3x3_at_center<T: Real>(grid: &[T], w: &[T], c_in: usize, c_out: usize) -> Vec<T> {
    let mut out = vec![T::zero(); c_out];
    T::gemm(1, 9 * c_in, c_out, T::one(), grid, false, w, false, T::zero(), &mut out);
    out
}

/// RoSy¹: a plain 3×3 convolution of the cell grid followed by ReLU.
/// `w` is `9 × c_in × c_out` with cells row-major.
pub fn rosy1_conv_forward<T: Real>(grid: &[T], w: &[T], c_in: usize, c_out: usize) -> Result<Vec<T>> {
    check_grid(grid, w, c_in, c_out)?;
    Ok(conv3x3_at_center(grid, w, c_in, c_out).into_iter().map(relu).collect())
}

/// Saved forward state of [`rosy4m_conv_forward`].
#[derive(Debug, Clone)]
pub struct Rosy4mState<T> {
    /// Winning rotation per output channel.
    pub rotation: Vec<u8>,
    /// Max over rotations, before ReLU.
    pub pre: Vec<T>,
}

/// RoSy⁴(m): the 3×3 convolution evaluated for all four quarter-turns of the
/// grid, max-pooled per channel, then ReLU. Ties go to the smaller rotation.
pub fn rosy4m_conv_forward<T: Real>(
    grid: &[T],
    w: &[T],
    c_in: usize,
    c_out: usize,
) -> Result<(Vec<T>, Rosy4mState<T>)> {
    check_grid(grid, w, c_in, c_out)?;
    let mut pre = vec![T::neg_infinity(); c_out];
    let mut rotation = vec![0u8; c_out];
    for q in 0..4 {
        let y = conv3x3_at_center(&rotate_grid(grid, c_in, q), w, c_in, c_out);
        for o in 0..c_out {
            if y[o] > pre[o] {
                pre[o] = y[o];
                rotation[o] = q as u8;
            }
        }
    }
    Ok((pre.iter().map(|&v| relu(v)).collect(), Rosy4mState { rotation, pre }))
}

/// Reverse pass of [`rosy4m_conv_forward`]: `(grad grid, grad w)`.
pub fn rosy4m_conv_backward<T: Real>(
    state: &Rosy4mState<T>,
    grid: &[T],
    w: &[T],
    c_in: usize,
    c_out: usize,
    grad_out: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    check_grid(grid, w, c_in, c_out)?;
    if grad_out.len() != c_out {
        return Err(Error::Dimension(format!(
            "gradient of {} for {c_out} outputs",
            grad_out.len()
        )));
    }
    let mut g_grid = vec![T::zero(); 9 * c_in];
    let mut g_w = vec![T::zero(); w.len()];
    for q in 0..4 {
        let rotated = rotate_grid(grid, c_in, q);
        let mut g_rot = vec![T::zero(); 9 * c_in];
        let mut any = false;
        for o in 0..c_out {
            if state.rotation[o] as usize != q || !(state.pre[o] > T::zero()) {
                continue;
            }
            any = true;
            let g = grad_out[o];
            for i in 0..9 * c_in {
                g_w[i * c_out + o] += rotated[i] * g;
                g_rot[i] += w[i * c_out + o] * g;
            }
        }
        if any {
            // undo the rotation: rotating by the remaining quarters maps back
            let back = rotate_grid(&g_rot, c_in, (4 - q) % 4);
            for (a, b) in g_grid.iter_mut().zip(back) {
                *a += b;
            }
        }
    }
    Ok((g_grid, g_w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cell_examples() {
        let rho = 0.3;
        assert_eq!(
            group_texture_cells(Vec2::zeros(), rho).unwrap(),
            ((1, 1), CellCategory::Center)
        );
        assert_eq!(
            group_texture_cells(Vec2::new(0.9 * rho, 0.9 * rho), rho).unwrap(),
            ((2, 2), CellCategory::Corner)
        );
        assert_eq!(
            group_texture_cells(Vec2::new(0.0, 0.9 * rho), rho).unwrap().1,
            CellCategory::Edge
        );
        assert!(group_texture_cells(Vec2::new(rho, 0.0), rho).is_err());
        // half-open cells: the grid line at −ρ/3 belongs to the upper cell
        assert_eq!(group_texture_cells(Vec2::new(-rho / 3.0, 0.0), 0.3).unwrap().0 .1, 1);
    }

    #[test]
    fn rotate_grid_four_times_is_identity() {
        let g: Vec<f64> = (0..18).map(|i| i as f64).collect();
        assert_eq!(rotate_grid(&g, 2, 4), g);
        let r = rotate_grid(&g, 2, 1);
        // top-left corner cell moves to top-right
        assert_eq!(&r[(2) * 2..(3) * 2], &g[0..2]);
    }

    #[test]
    fn single_center_point_identity() {
        let mut w = TextureConvWeights::<f64>::zeros(2, 2, Aggregation::Max);
        w.h[2] = vec![1.0, 0.0, 0.0, 1.0];
        let (out, _) = texture_conv_forward(&[Vec2::zeros()], &[0.7, -0.4], 1.0, &w).unwrap();
        assert_eq!(out, vec![0.7, 0.0]);
    }

    #[test]
    fn empty_patch_gives_zero() {
        let w = TextureConvWeights::<f64>::random(3, 4, Aggregation::Max, &mut ChaCha8Rng::seed_from_u64(1));
        let (out, state) = texture_conv_forward(&[Vec2::new(2.0, 0.0)], &[1.0, 1.0, 1.0], 1.0, &w).unwrap();
        assert_eq!(out, vec![0.0; 4]);
        let g = texture_conv_backward(&state, &w, &[1.0; 4]).unwrap();
        assert!(g.input.iter().chain(g.bias.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let w = TextureConvWeights::<f64>::zeros(3, 4, Aggregation::Max);
        assert!(matches!(
            texture_conv_forward(&[Vec2::zeros()], &[1.0, 2.0], 1.0, &w),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rosy1_examples() {
        let mut w = vec![0.0f64; 9];
        w[4] = 1.0;
        let grid: Vec<f64> = (0..9).map(|i| i as f64).collect();
        assert_eq!(rosy1_conv_forward(&grid, &w, 1, 1).unwrap(), vec![4.0]);
        assert_eq!(rosy1_conv_forward(&[1.0; 9], &[1.0; 9], 1, 1).unwrap(), vec![9.0]);
    }

    #[test]
    fn rosy4m_symmetric_grid_equals_single_conv() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w: Vec<f64> = (0..9 * 2 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cell = [0.3, -0.8];
        let grid: Vec<f64> = (0..9).flat_map(|_| cell).collect();
        let (a, _) = rosy4m_conv_forward(&grid, &w, 2, 3).unwrap();
        assert_eq!(a, rosy1_conv_forward(&grid, &w, 2, 3).unwrap());
    }
}
