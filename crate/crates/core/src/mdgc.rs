//! Reference forward pass of the multi-scale deformable Gaussian convolution.
//!
//! Correctness first: kernels are synthesized per output pixel and applied
//! with direct loops. Borders are zero-padded. Tensors are channel-major
//! `C × H × W` in row-major order.

use crate::kernel::{check_size, squash_params, synthesize_kernel, KernelParams, Normalization};
use crate::{Error, Result};
use rayon::prelude::*;

pub const DEFAULT_SCALES: [usize; 4] = [3, 5, 7, 9];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(format!("feature map dimensions must be positive, got {channels}x{height}x{width}")));
        }
        if values.len() != channels * height * width {
            return Err(Error::LengthMismatch { left: values.len(), right: channels * height * width });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature map"));
        }
        Ok(Self { channels, height, width, values })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(channels, height, width, vec![0.0; channels * height * width])
    }

    pub fn from_fn(channels: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    values.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, values)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.values[(c * self.height + y) * self.width + x]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    /// Zero outside the map.
    #[inline]
    fn padded(&self, c: usize, y: isize, x: isize) -> f64 {
        if y < 0 || x < 0 || y >= self.height as isize || x >= self.width as isize {
            0.0
        } else {
            self.get(c, y as usize, x as usize)
        }
    }

    /// Stack maps with identical spatial size along the channel axis.
    pub fn concat(maps: &[FeatureMap]) -> Result<FeatureMap> {
        let first = maps.first().ok_or(Error::Empty("feature maps"))?;
        let (h, w) = (first.height, first.width);
        if let Some(m) = maps.iter().find(|m| m.height != h || m.width != w) {
            return Err(Error::ShapeMismatch(format!("cannot concat {}x{} with {}x{}", m.height, m.width, h, w)));
        }
        let channels = maps.iter().map(|m| m.channels).sum();
        let values = maps.iter().flat_map(|m| m.values.iter().copied()).collect();
        Ok(FeatureMap { channels, height: h, width: w, values })
    }

    pub fn channel_means(&self) -> Vec<f64> {
        let n = (self.height * self.width) as f64;
        (0..self.channels).map(|c| self.channel(c).iter().sum::<f64>() / n).collect()
    }
}

/// Unconstrained per-pixel `(σ, Δx, Δy)` plus the global axial scales.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamField {
    height: usize,
    width: usize,
    /// `3 × H × W`: raw σ, raw Δx, raw Δy.
    raw: Vec<f64>,
    pub sx: f64,
    pub sy: f64,
}

impl ParamField {
    pub fn new(height: usize, width: usize, raw: Vec<f64>, sx: f64, sy: f64) -> Result<Self> {
        if raw.len() != 3 * height * width {
            return Err(Error::LengthMismatch { left: raw.len(), right: 3 * height * width });
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter field"));
        }
        if !(sx > 0.0 && sy > 0.0 && sx.is_finite() && sy.is_finite()) {
            return Err(Error::param("axial scale", format!("({sx}, {sy}) must be positive")));
        }
        Ok(Self { height, width, raw, sx, sy })
    }

    /// Same raw triple at every pixel.
    pub fn uniform(height: usize, width: usize, raw: [f64; 3], sx: f64, sy: f64) -> Result<Self> {
        let n = height * width;
        let mut v = Vec::with_capacity(3 * n);
        for r in raw {
            v.extend(std::iter::repeat_n(r, n));
        }
        Self::new(height, width, v, sx, sy)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn raw_at(&self, y: usize, x: usize) -> [f64; 3] {
        let n = self.height * self.width;
        let i = y * self.width + x;
        [self.raw[i], self.raw[n + i], self.raw[2 * n + i]]
    }

    pub fn params_at(&self, y: usize, x: usize) -> KernelParams {
        let [s, dx, dy] = self.raw_at(y, x);
        let p = squash_params([s, dx, dy, 0.0, 0.0]).expect("raw field is finite");
        KernelParams { sx: self.sx, sy: self.sy, ..p }
    }
}

/// 1×1 linear head producing the raw parameter field.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamHead {
    /// `3 × C`, row-major.
    pub weights: Vec<f64>,
    pub bias: [f64; 3],
    pub sx: f64,
    pub sy: f64,
}

impl ParamHead {
    pub fn zeros(channels: usize) -> Self {
        Self { weights: vec![0.0; 3 * channels], bias: [0.0; 3], sx: 1.0, sy: 1.0 }
    }
}

pub fn predict_params(input: &FeatureMap, head: &ParamHead) -> Result<ParamField> {
    let c = input.channels;
    if head.weights.len() != 3 * c {
        return Err(Error::ShapeMismatch(format!(
            "head expects {} input channels, feature map has {c}",
            head.weights.len() as f64 / 3.0
        )));
    }
    let n = input.height * input.width;
    let mut raw = vec![0.0; 3 * n];
    for o in 0..3 {
        let out = &mut raw[o * n..(o + 1) * n];
        out.fill(head.bias[o]);
        for ch in 0..c {
            let w = head.weights[o * c + ch];
            for (dst, &src) in out.iter_mut().zip(input.channel(ch)) {
                *dst += w * src;
            }
        }
    }
    ParamField::new(input.height, input.width, raw, head.sx, head.sy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Serial,
    /// Output rows on the rayon pool. Bit-identical to `Serial`.
    RowParallel,
}

fn check_aligned(input: &FeatureMap, field: &ParamField) -> Result<()> {
    if input.height != field.height || input.width != field.width {
        return Err(Error::ShapeMismatch(format!(
            "parameter field {}x{} does not match feature map {}x{}",
            field.height, field.width, input.height, input.width
        )));
    }
    Ok(())
}

/// `out[c][y][x] = Σ_{u,v} in[c][y+v][x+u] · K_{y,x}(u, v)`, one kernel per
/// output pixel shared by all channels.
pub fn dynamic_gaussian_conv(input: &FeatureMap, field: &ParamField, size: usize, norm: Normalization) -> Result<FeatureMap> {
    dynamic_gaussian_conv_with(input, field, size, norm, Execution::Serial)
}

pub fn dynamic_gaussian_conv_with(
    input: &FeatureMap,
    field: &ParamField,
    size: usize,
    norm: Normalization,
    exec: Execution,
) -> Result<FeatureMap> {
    check_size(size)?;
    check_aligned(input, field)?;
    let (c, h, w) = (input.channels, input.height, input.width);
    let row = |y: usize| -> Result<Vec<f64>> {
        // row-local layout: [x][c]
        let mut out = vec![0.0; w * c];
        for x in 0..w {
            let k = synthesize_kernel(&field.params_at(y, x), size, norm)?;
            let r = k.radius();
            for ch in 0..c {
                let mut acc = 0.0;
                for v in -r..=r {
                    for u in -r..=r {
                        acc += input.padded(ch, y as isize + v, x as isize + u) * k.at(u, v);
                    }
                }
                out[x * c + ch] = acc;
            }
        }
        Ok(out)
    };
    let rows: Vec<Vec<f64>> = match exec {
        Execution::Serial => (0..h).map(row).collect::<Result<_>>()?,
        Execution::RowParallel => (0..h).into_par_iter().map(row).collect::<Result<_>>()?,
    };
    let mut values = vec![0.0; c * h * w];
    for (y, r) in rows.iter().enumerate() {
        for x in 0..w {
            for ch in 0..c {
                values[(ch * h + y) * w + x] = r[x * c + ch];
            }
        }
    }
    Ok(FeatureMap { channels: c, height: h, width: w, values })
}

/// Depthwise correlation with one fixed `size × size` kernel for all channels.
pub fn depthwise_conv(input: &FeatureMap, kernel: &[f64], size: usize) -> Result<FeatureMap> {
    check_size(size)?;
    if kernel.len() != size * size {
        return Err(Error::LengthMismatch { left: kernel.len(), right: size * size });
    }
    let r = (size / 2) as isize;
    let (c, h, w) = (input.channels, input.height, input.width);
    let mut values = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0.0;
                for v in -r..=r {
                    for u in -r..=r {
                        let kv = kernel[((v + r) as usize) * size + (u + r) as usize];
                        acc += input.padded(ch, y + v, x + u) * kv;
                    }
                }
                values.push(acc);
            }
        }
    }
    Ok(FeatureMap { channels: c, height: h, width: w, values })
}

/// Kernel with a single 1 at the centre.
pub fn identity_kernel(size: usize) -> Vec<f64> {
    let mut k = vec![0.0; size * size];
    k[size * size / 2] = 1.0;
    k
}

/// Dual-path multi-scale block. Output channels, in order: the standard path
/// at every scale, then the Gaussian path at every scale, `C` channels each,
/// for `2 · |scales| · C` in total. One parameter field is shared by all
/// scales; the standard path uses identity-centre depthwise kernels.
pub fn multiscale_forward(input: &FeatureMap, field: &ParamField, scales: &[usize], norm: Normalization) -> Result<FeatureMap> {
    multiscale_forward_with(input, field, scales, norm, Execution::Serial)
}

pub fn multiscale_forward_with(
    input: &FeatureMap,
    field: &ParamField,
    scales: &[usize],
    norm: Normalization,
    exec: Execution,
) -> Result<FeatureMap> {
    if scales.is_empty() {
        return Err(Error::Empty("scales"));
    }
    for &s in scales {
        check_size(s)?;
    }
    check_aligned(input, field)?;
    let mut blocks = Vec::with_capacity(2 * scales.len());
    for &s in scales {
        blocks.push(depthwise_conv(input, &identity_kernel(s), s)?);
    }
    for &s in scales {
        blocks.push(dynamic_gaussian_conv_with(input, field, s, norm, exec)?);
    }
    FeatureMap::concat(&blocks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionState {
    pub alpha: Vec<f64>,
    /// `alpha + GAP(f_cat)`.
    pub alpha_prime: Vec<f64>,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Residual channel attention: `α' = α + GAP(F)`, output channel `c` is
/// `logistic(α'_c) · F_c`.
pub fn fusion_attention(f_cat: &FeatureMap, alpha: &[f64]) -> Result<(FeatureMap, AttentionState)> {
    if alpha.len() != f_cat.channels {
        return Err(Error::LengthMismatch { left: alpha.len(), right: f_cat.channels });
    }
    let means = f_cat.channel_means();
    let alpha_prime: Vec<f64> = alpha.iter().zip(&means).map(|(a, m)| a + m).collect();
    let n = f_cat.height * f_cat.width;
    let mut values = f_cat.values.clone();
    for (c, chunk) in values.chunks_mut(n).enumerate() {
        let gate = logistic(alpha_prime[c]);
        chunk.iter_mut().for_each(|v| *v *= gate);
    }
    let out = FeatureMap { values, ..f_cat.clone() };
    Ok((out, AttentionState { alpha: alpha.to_vec(), alpha_prime }))
}

/// Parameter head, multi-scale dual path and fusion attention in one call.
#[derive(Debug, Clone, PartialEq)]
pub struct MdgcBlock {
    pub head: ParamHead,
    pub scales: Vec<usize>,
    /// One entry per output channel (`2 · |scales| · C`).
    pub alpha: Vec<f64>,
    pub norm: Normalization,
    pub exec: Execution,
}

impl MdgcBlock {
    pub fn new(channels: usize, scales: Vec<usize>) -> Self {
        let out = 2 * scales.len() * channels;
        Self {
            head: ParamHead::zeros(channels),
            scales,
            alpha: vec![0.0; out],
            norm: Normalization::Raw,
            exec: Execution::Serial,
        }
    }

    pub fn forward(&self, input: &FeatureMap) -> Result<(FeatureMap, AttentionState)> {
        let field = predict_params(input, &self.head)?;
        let f_cat = multiscale_forward_with(input, &field, &self.scales, self.norm, self.exec)?;
        fusion_attention(&f_cat, &self.alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_map(rng: &mut SeededRng, c: usize, h: usize, w: usize) -> FeatureMap {
        FeatureMap::from_fn(c, h, w, |_, _, _| rng.range(-1.0, 1.0)).unwrap()
    }

    fn random_field(rng: &mut SeededRng, h: usize, w: usize) -> ParamField {
        let raw = (0..3 * h * w).map(|_| rng.normal()).collect();
        ParamField::new(h, w, raw, rng.range(0.5, 2.0), rng.range(0.5, 2.0)).unwrap()
    }

    #[test]
    fn zero_head_gives_midpoint_params() {
        let mut rng = SeededRng::new(1);
        let input = random_map(&mut rng, 3, 4, 5);
        let field = predict_params(&input, &ParamHead::zeros(3)).unwrap();
        assert!(field.raw().iter().all(|&v| v == 0.0));
        let p = field.params_at(2, 3);
        assert_eq!((p.sigma, p.dx, p.dy), (5.5, 0.0, 0.0));
    }

    #[test]
    fn head_selects_channel() {
        let mut rng = SeededRng::new(2);
        let input = random_map(&mut rng, 1, 4, 4);
        let head = ParamHead { weights: vec![1.0, 0.0, 0.0], bias: [0.0; 3], sx: 1.0, sy: 1.0 };
        let field = predict_params(&input, &head).unwrap();
        assert_eq!(&field.raw()[..16], input.channel(0));
        assert!(field.raw()[16..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn head_matches_per_pixel_dot_products() {
        let mut rng = SeededRng::new(3);
        let input = random_map(&mut rng, 4, 5, 6);
        let weights: Vec<f64> = (0..12).map(|_| rng.normal()).collect();
        let bias = [rng.normal(), rng.normal(), rng.normal()];
        let head = ParamHead { weights: weights.clone(), bias, sx: 1.0, sy: 1.0 };
        let field = predict_params(&input, &head).unwrap();
        for y in 0..5 {
            for x in 0..6 {
                let r = field.raw_at(y, x);
                for o in 0..3 {
                    let want: f64 = bias[o] + (0..4).map(|c| weights[o * 4 + c] * input.get(c, y, x)).sum::<f64>();
                    assert!((r[o] - want).abs() < 1e-12);
                }
            }
        }
        assert!(predict_params(&input, &ParamHead::zeros(3)).is_err());
    }

    #[test]
    fn ones_preserved_by_unit_sum_kernels() {
        let mut rng = SeededRng::new(4);
        let input = FeatureMap::new(1, 10, 10, vec![1.0; 100]).unwrap();
        let field = random_field(&mut rng, 10, 10);
        let out = dynamic_gaussian_conv(&input, &field, 5, Normalization::UnitSum).unwrap();
        for y in 2..8 {
            for x in 2..8 {
                assert!((out.get(0, y, x) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn impulse_reproduces_flipped_kernel() {
        let (h, w, s) = (11, 11, 5);
        let mut vals = vec![0.0; h * w];
        vals[5 * w + 5] = 1.0;
        let input = FeatureMap::new(1, h, w, vals).unwrap();
        let field = ParamField::uniform(h, w, [0.3, 0.8, -0.5], 1.4, 0.7).unwrap();
        let out = dynamic_gaussian_conv(&input, &field, s, Normalization::Raw).unwrap();
        let k = synthesize_kernel(&field.params_at(0, 0), s, Normalization::Raw).unwrap();
        for y in 0..h as isize {
            for x in 0..w as isize {
                let (u, v) = (5 - x, 5 - y);
                let want = if u.abs() <= 2 && v.abs() <= 2 { k.at(u, v) } else { 0.0 };
                assert!((out.get(0, y as usize, x as usize) - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn misaligned_field_rejected() {
        let input = FeatureMap::zeros(1, 4, 4).unwrap();
        let field = ParamField::uniform(4, 5, [0.0; 3], 1.0, 1.0).unwrap();
        assert!(matches!(dynamic_gaussian_conv(&input, &field, 3, Normalization::Raw), Err(Error::ShapeMismatch(_))));
        let field = ParamField::uniform(4, 4, [0.0; 3], 1.0, 1.0).unwrap();
        assert!(dynamic_gaussian_conv(&input, &field, 4, Normalization::Raw).is_err());
    }

    #[test]
    fn row_parallel_is_bit_identical() {
        let mut rng = SeededRng::new(5);
        let input = random_map(&mut rng, 3, 12, 9);
        let field = random_field(&mut rng, 12, 9);
        for norm in [Normalization::Raw, Normalization::UnitSum] {
            let a = dynamic_gaussian_conv_with(&input, &field, 7, norm, Execution::Serial).unwrap();
            let b = dynamic_gaussian_conv_with(&input, &field, 7, norm, Execution::RowParallel).unwrap();
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn linear_in_input() {
        let mut rng = SeededRng::new(6);
        let x = random_map(&mut rng, 2, 7, 7);
        let y = random_map(&mut rng, 2, 7, 7);
        let field = random_field(&mut rng, 7, 7);
        let (a, b) = (1.7, -0.4);
        let mix = FeatureMap::new(2, 7, 7, x.values().iter().zip(y.values()).map(|(p, q)| a * p + b * q).collect()).unwrap();
        let cx = dynamic_gaussian_conv(&x, &field, 5, Normalization::Raw).unwrap();
        let cy = dynamic_gaussian_conv(&y, &field, 5, Normalization::Raw).unwrap();
        let cm = dynamic_gaussian_conv(&mix, &field, 5, Normalization::Raw).unwrap();
        for i in 0..cm.values().len() {
            assert!((cm.values()[i] - (a * cx.values()[i] + b * cy.values()[i])).abs() <= 1e-10);
        }
    }

    #[test]
    fn multiscale_identity_block_and_channel_count() {
        let mut rng = SeededRng::new(7);
        let input = random_map(&mut rng, 2, 6, 6);
        let field = random_field(&mut rng, 6, 6);
        let out = multiscale_forward(&input, &field, &[3], Normalization::Raw).unwrap();
        assert_eq!(out.channels(), 4);
        assert_eq!(&out.values()[..72], input.values());
        let out = multiscale_forward(&input, &field, &[3, 5], Normalization::Raw).unwrap();
        assert_eq!(out.channels(), 8);
        assert!(multiscale_forward(&input, &field, &[], Normalization::Raw).is_err());
        assert!(multiscale_forward(&input, &field, &[3, 4], Normalization::Raw).is_err());
    }

    #[test]
    fn multiscale_blocks_equal_single_scale_ops() {
        let mut rng = SeededRng::new(8);
        let input = random_map(&mut rng, 2, 8, 8);
        let field = random_field(&mut rng, 8, 8);
        let scales = DEFAULT_SCALES;
        let out = multiscale_forward(&input, &field, &scales, Normalization::Raw).unwrap();
        assert_eq!(out.channels(), 2 * scales.len() * 2);
        let block = 2 * 64;
        for (i, &s) in scales.iter().enumerate() {
            let std = depthwise_conv(&input, &identity_kernel(s), s).unwrap();
            assert_eq!(&out.values()[i * block..(i + 1) * block], std.values());
            let g = dynamic_gaussian_conv(&input, &field, s, Normalization::Raw).unwrap();
            let off = (scales.len() + i) * block;
            assert_eq!(&out.values()[off..off + block], g.values());
        }
    }

    #[test]
    fn attention_residual_identities() {
        let mut rng = SeededRng::new(9);
        let f = random_map(&mut rng, 3, 5, 4);
        let (_, st) = fusion_attention(&f, &[0.0; 3]).unwrap();
        assert_eq!(st.alpha_prime, f.channel_means());
        let zeros = FeatureMap::zeros(3, 5, 4).unwrap();
        let alpha = [0.3, -1.2, 2.0];
        let (out, st) = fusion_attention(&zeros, &alpha).unwrap();
        assert_eq!(st.alpha_prime, alpha.to_vec());
        assert!(out.values().iter().all(|&v| v == 0.0));
        assert!(fusion_attention(&f, &[0.0; 2]).is_err());
    }

    #[test]
    fn attention_gates_channels() {
        let f = FeatureMap::new(2, 1, 2, vec![1.0, 3.0, -2.0, 0.0]).unwrap();
        let (out, st) = fusion_attention(&f, &[0.0, 1.0]).unwrap();
        assert_eq!(st.alpha_prime, vec![2.0, 0.0]);
        let g0 = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((out.get(0, 0, 1) - 3.0 * g0).abs() < 1e-15);
        assert!((out.get(1, 0, 0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn block_forward_shapes() {
        let mut rng = SeededRng::new(10);
        let input = random_map(&mut rng, 2, 6, 6);
        let block = MdgcBlock::new(2, vec![3, 5]);
        let (out, st) = block.forward(&input).unwrap();
        assert_eq!(out.channels(), 8);
        assert_eq!(st.alpha_prime.len(), 8);
    }
}
