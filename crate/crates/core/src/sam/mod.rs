//! Spatial attention built on four-directional IRNN scans.
//!
//! A directional scan runs the recurrence `h <- max(alpha * h_prev + x, 0)`
//! along every row (or column) of a map, starting from a zero state outside
//! the border. One *round* runs the four scans, concatenates them and mixes
//! the `4c` channels back to `c` with a 1x1 matrix. After one round a site
//! sees its row and column; after two rounds it sees the whole map. The
//! attention branch projects the two-round context to one channel, applies a
//! sigmoid, and gates a feature map with the result.
//!
//! Every forward operation has an exact reverse-mode adjoint. The subgradient
//! of `max(., 0)` at zero is taken as zero. [`gradcheck`] verifies the
//! adjoints against central finite differences.

pub mod gradcheck;
mod tensor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::AttentionMap;

pub use gradcheck::{gradcheck, gradcheck_target, GradcheckReport, GradcheckTarget};
pub use tensor::TensorMap;

/// Scan direction, named by the way information travels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `h[i][j]` depends on `h[i][j - 1]`.
    LeftToRight,
    RightToLeft,
    TopToBottom,
    BottomToTop,
}

impl Direction {
    /// Concatenation order used by [`two_round_irnn`].
    pub const ALL: [Direction; 4] = [
        Direction::LeftToRight,
        Direction::RightToLeft,
        Direction::TopToBottom,
        Direction::BottomToTop,
    ];

    fn slot(self) -> usize {
        self as usize
    }

    /// `(number of independent lines, line length)`.
    fn extent(self, height: usize, width: usize) -> (usize, usize) {
        match self {
            Direction::LeftToRight | Direction::RightToLeft => (height, width),
            Direction::TopToBottom | Direction::BottomToTop => (width, height),
        }
    }

    /// `(row, column)` of step `t` along `line`.
    #[inline]
    fn at(self, line: usize, t: usize, height: usize, width: usize) -> (usize, usize) {
        match self {
            Direction::LeftToRight => (line, t),
            Direction::RightToLeft => (line, width - 1 - t),
            Direction::TopToBottom => (t, line),
            Direction::BottomToTop => (height - 1 - t, line),
        }
    }
}

/// Per-channel recurrence weight for each of the four directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalWeights {
    alpha: [Vec<f64>; 4],
}

impl DirectionalWeights {
    /// Weights in [`Direction::ALL`] order.
    pub fn new(alpha: [Vec<f64>; 4]) -> Result<Self> {
        let c = alpha[0].len();
        if alpha.iter().any(|a| a.len() != c) {
            return Err(Error::Shape("directional weights differ in channel count".into()));
        }
        if alpha.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("directional weights"));
        }
        Ok(Self { alpha })
    }

    /// Every weight set to `value`.
    pub fn uniform(channels: usize, value: f64) -> Self {
        Self {
            alpha: std::array::from_fn(|_| vec![value; channels]),
        }
    }

    /// IRNN initialization: identity recurrence.
    pub fn identity(channels: usize) -> Self {
        Self::uniform(channels, 1.0)
    }

    pub fn channels(&self) -> usize {
        self.alpha[0].len()
    }

    pub fn get(&self, dir: Direction) -> &[f64] {
        &self.alpha[dir.slot()]
    }

    pub fn get_mut(&mut self, dir: Direction) -> &mut [f64] {
        &mut self.alpha[dir.slot()]
    }

    fn flat(&self) -> Vec<f64> {
        self.alpha.concat()
    }

    fn from_flat(values: &[f64], channels: usize) -> Self {
        Self {
            alpha: std::array::from_fn(|d| values[d * channels..(d + 1) * channels].to_vec()),
        }
    }
}

/// 1x1 mixing matrix from the four concatenated scans (`4c` channels) back
/// to `c` channels. Row-major `[out][in]`; input channel `d * c + k` is
/// channel `k` of the scan in direction `Direction::ALL[d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixWeights {
    channels: usize,
    weights: Vec<f64>,
}

impl MixWeights {
    pub fn new(channels: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != 4 * channels * channels {
            return Err(Error::Shape(format!(
                "mix matrix for {channels} channels needs {} weights, got {}",
                4 * channels * channels,
                weights.len()
            )));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mix weights"));
        }
        Ok(Self { channels, weights })
    }

    /// Output channel `k` is the sum of channel `k` over the four scans.
    pub fn identity_sum(channels: usize) -> Self {
        let mut weights = vec![0.0; 4 * channels * channels];
        for o in 0..channels {
            for d in 0..4 {
                weights[o * 4 * channels + d * channels + o] = 1.0;
            }
        }
        Self { channels, weights }
    }

    /// Small uniform weights in `[-scale, scale]`.
    pub fn random(channels: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let weights = (0..4 * channels * channels)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Self { channels, weights }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }
}

/// 1x1 projection of the context map to a single attention logit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionWeights {
    pub projection: Vec<f64>,
    pub bias: f64,
}

impl AttentionWeights {
    pub fn zeros(channels: usize) -> Self {
        Self {
            projection: vec![0.0; channels],
            bias: 0.0,
        }
    }
}

/// All weights of one spatial attention module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamParams {
    pub round1: DirectionalWeights,
    pub round2: DirectionalWeights,
    pub mix1: MixWeights,
    pub mix2: MixWeights,
    pub attention: AttentionWeights,
}

impl SamParams {
    /// Identity recurrences, small uniform mixing and projection weights.
    pub fn init(channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let scale = 1.0 / (4.0 * channels as f64).sqrt();
        Self {
            round1: DirectionalWeights::identity(channels),
            round2: DirectionalWeights::identity(channels),
            mix1: MixWeights::random(channels, scale, &mut rng),
            mix2: MixWeights::random(channels, scale, &mut rng),
            attention: AttentionWeights {
                projection: (0..channels).map(|_| rng.random_range(-scale..=scale)).collect(),
                bias: 0.0,
            },
        }
    }

    pub fn channels(&self) -> usize {
        self.round1.channels()
    }

    fn validate(&self) -> Result<()> {
        let c = self.channels();
        if self.round2.channels() != c
            || self.mix1.channels != c
            || self.mix2.channels != c
            || self.attention.projection.len() != c
        {
            return Err(Error::Shape("spatial attention weights disagree on channel count".into()));
        }
        let finite = self.round1.flat().iter().chain(self.round2.flat().iter()).all(|v| v.is_finite())
            && self.mix1.weights.iter().chain(&self.mix2.weights).all(|v| v.is_finite())
            && self.attention.projection.iter().all(|v| v.is_finite())
            && self.attention.bias.is_finite();
        if !finite {
            return Err(Error::NonFinite("spatial attention weights"));
        }
        Ok(())
    }
}

fn check_alpha(x: &TensorMap, alpha: &[f64]) -> Result<()> {
    if alpha.len() != x.channels() {
        return Err(Error::Shape(format!(
            "{} recurrence weights for {} channels",
            alpha.len(),
            x.channels()
        )));
    }
    Ok(())
}

/// Forward scan; returns outputs and pre-activations.
fn scan_forward(x: &TensorMap, dir: Direction, alpha: &[f64]) -> (TensorMap, Vec<f64>) {
    let (h, w, c) = x.shape();
    let mut out = TensorMap::zeros(h, w, c);
    let mut pre = vec![0.0; x.data().len()];
    let (lines, len) = dir.extent(h, w);
    for line in 0..lines {
        for ch in 0..c {
            let mut state = 0.0;
            for t in 0..len {
                let (i, j) = dir.at(line, t, h, w);
                let idx = x.index(i, j, ch);
                let z = alpha[ch] * state + x.data()[idx];
                state = z.max(0.0);
                pre[idx] = z;
                out.data_mut()[idx] = state;
            }
        }
    }
    (out, pre)
}

/// Adjoint of [`scan_forward`].
fn scan_backward(
    dir: Direction,
    alpha: &[f64],
    out: &TensorMap,
    pre: &[f64],
    upstream: &TensorMap,
) -> (TensorMap, Vec<f64>) {
    let (h, w, c) = out.shape();
    let mut dx = TensorMap::zeros(h, w, c);
    let mut dalpha = vec![0.0; c];
    let (lines, len) = dir.extent(h, w);
    for line in 0..lines {
        for ch in 0..c {
            let mut carry = 0.0;
            for t in (0..len).rev() {
                let (i, j) = dir.at(line, t, h, w);
                let idx = out.index(i, j, ch);
                let dh = upstream.data()[idx] + carry;
                let dz = if pre[idx] > 0.0 { dh } else { 0.0 };
                dx.data_mut()[idx] = dz;
                if t > 0 {
                    let (pi, pj) = dir.at(line, t - 1, h, w);
                    dalpha[ch] += dz * out.get(pi, pj, ch);
                }
                carry = dz * alpha[ch];
            }
        }
    }
    (dx, dalpha)
}

/// One directional IRNN pass: `h <- max(alpha * h_prev + x, 0)` along `dir`.
pub fn directional_scan(x: &TensorMap, dir: Direction, w: &DirectionalWeights) -> Result<TensorMap> {
    x.ensure_finite("scan input")?;
    check_alpha(x, w.get(dir))?;
    Ok(scan_forward(x, dir, w.get(dir)).0)
}

/// Gradients of `sum(upstream * directional_scan(x))` with respect to `x`
/// and the per-channel recurrence weights of `dir`.
pub fn directional_scan_grad(
    x: &TensorMap,
    dir: Direction,
    w: &DirectionalWeights,
    upstream: &TensorMap,
) -> Result<(TensorMap, Vec<f64>)> {
    x.ensure_finite("scan input")?;
    check_alpha(x, w.get(dir))?;
    upstream.ensure_shape(x.shape(), "scan upstream gradient")?;
    let (out, pre) = scan_forward(x, dir, w.get(dir));
    Ok(scan_backward(dir, w.get(dir), &out, &pre, upstream))
}

/// Saved activations of one four-directional round.
#[derive(Debug, Clone)]
struct RoundTape {
    scans: Vec<TensorMap>,
    pres: Vec<Vec<f64>>,
}

impl RoundTape {
    fn pre_activations(&self) -> impl Iterator<Item = &f64> {
        self.pres.iter().flatten()
    }
}

fn round_forward(x: &TensorMap, w: &DirectionalWeights, mix: &MixWeights) -> (TensorMap, RoundTape) {
    let (h, wd, c) = x.shape();
    let (scans, pres): (Vec<_>, Vec<_>) = Direction::ALL
        .iter()
        .map(|&dir| scan_forward(x, dir, w.get(dir)))
        .unzip();
    let mut out = TensorMap::zeros(h, wd, c);
    for p in 0..h * wd {
        for o in 0..c {
            let row = &mix.weights[o * 4 * c..(o + 1) * 4 * c];
            let mut acc = 0.0;
            for (d, scan) in scans.iter().enumerate() {
                for k in 0..c {
                    acc += row[d * c + k] * scan.data()[p * c + k];
                }
            }
            out.data_mut()[p * c + o] = acc;
        }
    }
    (out, RoundTape { scans, pres })
}

/// Returns `(dx, dalpha per direction, dmix)`.
fn round_backward(
    tape: &RoundTape,
    w: &DirectionalWeights,
    mix: &MixWeights,
    d_out: &TensorMap,
) -> (TensorMap, [Vec<f64>; 4], Vec<f64>) {
    let (h, wd, c) = d_out.shape();
    let mut dmix = vec![0.0; mix.weights.len()];
    let mut d_scans: Vec<TensorMap> = (0..4).map(|_| TensorMap::zeros(h, wd, c)).collect();
    for p in 0..h * wd {
        for o in 0..c {
            let g = d_out.data()[p * c + o];
            for d in 0..4 {
                for k in 0..c {
                    let wi = o * 4 * c + d * c + k;
                    dmix[wi] += g * tape.scans[d].data()[p * c + k];
                    d_scans[d].data_mut()[p * c + k] += g * mix.weights[wi];
                }
            }
        }
    }
    let mut dx = TensorMap::zeros(h, wd, c);
    let mut dalpha: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::new());
    for (d, &dir) in Direction::ALL.iter().enumerate() {
        let (dxi, da) = scan_backward(dir, w.get(dir), &tape.scans[d], &tape.pres[d], &d_scans[d]);
        for (acc, v) in dx.data_mut().iter_mut().zip(dxi.data()) {
            *acc += v;
        }
        dalpha[d] = da;
    }
    (dx, dalpha, dmix)
}

fn check_round_shapes(x: &TensorMap, w1: &DirectionalWeights, w2: &DirectionalWeights, mix1: &MixWeights, mix2: &MixWeights) -> Result<()> {
    let c = x.channels();
    if w1.channels() != c || w2.channels() != c || mix1.channels != c || mix2.channels != c {
        return Err(Error::Shape(format!(
            "IRNN weights do not match {c}-channel input"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct IrnnTape {
    first: RoundTape,
    second: RoundTape,
}

impl IrnnTape {
    fn pre_activations(&self) -> impl Iterator<Item = &f64> {
        self.first.pre_activations().chain(self.second.pre_activations())
    }
}

fn irnn_forward(
    x: &TensorMap,
    w1: &DirectionalWeights,
    w2: &DirectionalWeights,
    mix1: &MixWeights,
    mix2: &MixWeights,
) -> (TensorMap, IrnnTape) {
    let (mid, first) = round_forward(x, w1, mix1);
    let (out, second) = round_forward(&mid, w2, mix2);
    (out, IrnnTape { first, second })
}

/// Two rounds of four-directional scans, each followed by a 1x1 mix.
pub fn two_round_irnn(
    x: &TensorMap,
    w1: &DirectionalWeights,
    w2: &DirectionalWeights,
    mix1: &MixWeights,
    mix2: &MixWeights,
) -> Result<TensorMap> {
    x.ensure_finite("IRNN input")?;
    check_round_shapes(x, w1, w2, mix1, mix2)?;
    Ok(irnn_forward(x, w1, w2, mix1, mix2).0)
}

/// Only the first round of [`two_round_irnn`].
pub fn one_round_irnn(x: &TensorMap, w: &DirectionalWeights, mix: &MixWeights) -> Result<TensorMap> {
    x.ensure_finite("IRNN input")?;
    check_round_shapes(x, w, w, mix, mix)?;
    Ok(round_forward(x, w, mix).0)
}

/// Gradients of a scalar loss through [`two_round_irnn`].
#[derive(Debug, Clone, PartialEq)]
pub struct IrnnGrads {
    pub dx: TensorMap,
    pub round1: DirectionalWeights,
    pub round2: DirectionalWeights,
    pub mix1: Vec<f64>,
    pub mix2: Vec<f64>,
}

fn irnn_backward(
    tape: &IrnnTape,
    w1: &DirectionalWeights,
    w2: &DirectionalWeights,
    mix1: &MixWeights,
    mix2: &MixWeights,
    upstream: &TensorMap,
) -> IrnnGrads {
    let (d_mid, da2, dmix2) = round_backward(&tape.second, w2, mix2, upstream);
    let (dx, da1, dmix1) = round_backward(&tape.first, w1, mix1, &d_mid);
    IrnnGrads {
        dx,
        round1: DirectionalWeights { alpha: da1 },
        round2: DirectionalWeights { alpha: da2 },
        mix1: dmix1,
        mix2: dmix2,
    }
}

pub fn two_round_irnn_grad(
    x: &TensorMap,
    w1: &DirectionalWeights,
    w2: &DirectionalWeights,
    mix1: &MixWeights,
    mix2: &MixWeights,
    upstream: &TensorMap,
) -> Result<IrnnGrads> {
    x.ensure_finite("IRNN input")?;
    check_round_shapes(x, w1, w2, mix1, mix2)?;
    upstream.ensure_shape(x.shape(), "IRNN upstream gradient")?;
    let (_, tape) = irnn_forward(x, w1, w2, mix1, mix2);
    Ok(irnn_backward(&tape, w1, w2, mix1, mix2, upstream))
}

/// Logistic function, kept strictly inside `(0, 1)`.
fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[derive(Debug, Clone)]
struct SamTape {
    irnn: IrnnTape,
    context: TensorMap,
    attention: Vec<f64>,
}

fn check_gate_shapes(features: &TensorMap, x: &TensorMap, params: &SamParams) -> Result<()> {
    features.ensure_finite("gate features")?;
    x.ensure_finite("IRNN input")?;
    params.validate()?;
    if x.channels() != params.channels() {
        return Err(Error::Shape(format!(
            "{}-channel input for {}-channel attention weights",
            x.channels(),
            params.channels()
        )));
    }
    if (features.height(), features.width()) != (x.height(), x.width()) {
        return Err(Error::Shape(format!(
            "features are {}x{}, attention input is {}x{}",
            features.height(),
            features.width(),
            x.height(),
            x.width()
        )));
    }
    Ok(())
}

fn sam_forward(features: &TensorMap, x: &TensorMap, p: &SamParams) -> (TensorMap, SamTape) {
    let (context, irnn) = irnn_forward(x, &p.round1, &p.round2, &p.mix1, &p.mix2);
    let (h, w, c) = context.shape();
    let fc = features.channels();
    let mut attention = vec![0.0; h * w];
    let mut gated = features.clone();
    for (pix, a) in attention.iter_mut().enumerate() {
        let ctx = &context.data()[pix * c..(pix + 1) * c];
        let z: f64 = p.attention.bias + ctx.iter().zip(&p.attention.projection).map(|(v, w)| v * w).sum::<f64>();
        *a = sigmoid(z);
        for v in &mut gated.data_mut()[pix * fc..(pix + 1) * fc] {
            *v *= *a;
        }
    }
    (gated, SamTape { irnn, context, attention })
}

/// Sigmoid attention from the two-round context of `x`, used to gate
/// `features` (broadcast over channels).
pub fn attention_gate(features: &TensorMap, x: &TensorMap, params: &SamParams) -> Result<(TensorMap, AttentionMap)> {
    check_gate_shapes(features, x, params)?;
    let (gated, tape) = sam_forward(features, x, params);
    let map = AttentionMap::new(x.width() as u32, x.height() as u32, tape.attention)?;
    Ok((gated, map))
}

/// Gradients of a scalar loss through [`attention_gate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SamGrads {
    pub dfeatures: TensorMap,
    pub irnn: IrnnGrads,
    pub projection: Vec<f64>,
    pub bias: f64,
}

/// `d_gated` is the loss gradient with respect to the gated features and
/// `d_attention` with respect to the attention map (one value per pixel).
pub fn attention_gate_grad(
    features: &TensorMap,
    x: &TensorMap,
    params: &SamParams,
    d_gated: &TensorMap,
    d_attention: &[f64],
) -> Result<SamGrads> {
    check_gate_shapes(features, x, params)?;
    d_gated.ensure_shape(features.shape(), "gated upstream gradient")?;
    if d_attention.len() != x.height() * x.width() {
        return Err(Error::Shape(format!(
            "attention gradient has {} values for {} pixels",
            d_attention.len(),
            x.height() * x.width()
        )));
    }
    let (_, tape) = sam_forward(features, x, params);
    let (h, w, c) = tape.context.shape();
    let fc = features.channels();
    let mut dfeatures = TensorMap::zeros(h, w, fc);
    let mut d_context = TensorMap::zeros(h, w, c);
    let mut projection = vec![0.0; c];
    let mut bias = 0.0;
    for pix in 0..h * w {
        let a = tape.attention[pix];
        let mut da = d_attention[pix];
        for k in 0..fc {
            let i = pix * fc + k;
            dfeatures.data_mut()[i] = d_gated.data()[i] * a;
            da += d_gated.data()[i] * features.data()[i];
        }
        let dz = da * a * (1.0 - a);
        bias += dz;
        for k in 0..c {
            projection[k] += dz * tape.context.data()[pix * c + k];
            d_context.data_mut()[pix * c + k] = dz * params.attention.projection[k];
        }
    }
    let irnn = irnn_backward(&tape.irnn, &params.round1, &params.round2, &params.mix1, &params.mix2, &d_context);
    Ok(SamGrads {
        dfeatures,
        irnn,
        projection,
        bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(values: &[f64]) -> TensorMap {
        TensorMap::new(1, values.len(), 1, values.to_vec()).unwrap()
    }

    fn random_map(h: usize, w: usize, c: usize, seed: u64) -> TensorMap {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        TensorMap::new(h, w, c, (0..h * w * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn hand_unrolled_scans() {
        let w = DirectionalWeights::identity(1);
        let out = directional_scan(&row(&[1.0, -2.0, 3.0]), Direction::LeftToRight, &w).unwrap();
        assert_eq!(out.data(), &[1.0, 0.0, 3.0]);

        let out = directional_scan(&row(&[1.0; 6]), Direction::LeftToRight, &w).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);

        let out = directional_scan(&row(&[1.0; 4]), Direction::RightToLeft, &w).unwrap();
        assert_eq!(out.data(), &[4.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn zero_alpha_is_relu() {
        let x = random_map(5, 4, 3, 1);
        let w = DirectionalWeights::uniform(3, 0.0);
        for dir in Direction::ALL {
            let out = directional_scan(&x, dir, &w).unwrap();
            let relu: Vec<f64> = x.data().iter().map(|v| v.max(0.0)).collect();
            assert_eq!(out.data(), relu.as_slice());
        }
    }

    #[test]
    fn relu_pass_through_gradient() {
        let mut x = random_map(3, 4, 2, 2);
        x.data_mut().iter_mut().for_each(|v| *v = v.abs() + 0.1);
        let up = random_map(3, 4, 2, 3);
        let w = DirectionalWeights::uniform(2, 0.0);
        let (dx, dalpha) = directional_scan_grad(&x, Direction::TopToBottom, &w, &up).unwrap();
        assert_eq!(dx, up);
        // With alpha = 0 the loss still depends on alpha through h_prev.
        let mut expected = [0.0; 2];
        for i in 1..3 {
            for j in 0..4 {
                for (c, e) in expected.iter_mut().enumerate() {
                    *e += up.get(i, j, c) * x.get(i - 1, j, c);
                }
            }
        }
        for (a, e) in dalpha.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn mirrored_scan_equivariance() {
        let x = random_map(4, 6, 2, 4);
        let mut w = DirectionalWeights::uniform(2, 0.8);
        w.get_mut(Direction::RightToLeft).copy_from_slice(&[0.8, 0.8]);
        let lr = directional_scan(&x, Direction::LeftToRight, &w).unwrap();
        let rl = directional_scan(&x.mirror_horizontal(), Direction::RightToLeft, &w).unwrap();
        assert_eq!(lr, rl.mirror_horizontal());
        let tb = directional_scan(&x, Direction::TopToBottom, &w).unwrap();
        let bt = directional_scan(&x.mirror_vertical(), Direction::BottomToTop, &w).unwrap();
        assert_eq!(tb, bt.mirror_vertical());
    }

    #[test]
    fn receptive_field_grows_from_cross_to_whole_map() {
        let mut x = TensorMap::zeros(7, 7, 1);
        x.set(2, 4, 0, 1.0);
        let w = DirectionalWeights::identity(1);
        let mix = MixWeights::identity_sum(1);
        let first = one_round_irnn(&x, &w, &mix).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let on_cross = i == 2 || j == 4;
                assert_eq!(first.get(i, j, 0) != 0.0, on_cross, "({i}, {j})");
            }
        }
        let second = two_round_irnn(&x, &w, &w, &mix, &mix).unwrap();
        assert!(second.data().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let p = SamParams::init(2, 5);
        let x = TensorMap::zeros(4, 5, 2);
        let out = two_round_irnn(&x, &p.round1, &p.round2, &p.mix1, &p.mix2).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_alpha_two_round_is_two_mixed_relus() {
        let x = random_map(3, 5, 2, 6);
        let p = SamParams::init(2, 7);
        let w0 = DirectionalWeights::uniform(2, 0.0);
        let out = two_round_irnn(&x, &w0, &w0, &p.mix1, &p.mix2).unwrap();
        let mixed_relu = |m: &TensorMap, mix: &MixWeights| {
            let mut o = TensorMap::zeros(3, 5, 2);
            for pix in 0..15 {
                for oc in 0..2 {
                    let mut acc = 0.0;
                    for d in 0..4 {
                        for k in 0..2 {
                            acc += mix.weights()[oc * 8 + d * 2 + k] * m.data()[pix * 2 + k].max(0.0);
                        }
                    }
                    o.data_mut()[pix * 2 + oc] = acc;
                }
            }
            o
        };
        let expected = mixed_relu(&mixed_relu(&x, &p.mix1), &p.mix2);
        for (a, b) in out.data().iter().zip(expected.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_projection_gives_half_attention() {
        let x = random_map(4, 4, 2, 8);
        let f = random_map(4, 4, 3, 9);
        let mut p = SamParams::init(2, 1);
        p.attention = AttentionWeights::zeros(2);
        let (gated, att) = attention_gate(&f, &x, &p).unwrap();
        assert!(att.data().iter().all(|&a| a == 0.5));
        for (g, v) in gated.data().iter().zip(f.data()) {
            assert_eq!(*g, 0.5 * v);
        }
    }

    #[test]
    fn strong_projection_saturates_at_rain_sites() {
        // Rain sites carry a large positive response; others are negative.
        let mut x = TensorMap::filled(6, 6, 1, -1.0);
        let rain = [(1, 1), (4, 2), (3, 5)];
        for &(i, j) in &rain {
            x.set(i, j, 0, 5.0);
        }
        let w = DirectionalWeights::uniform(1, 0.0);
        let p = SamParams {
            round1: w.clone(),
            round2: w,
            mix1: MixWeights::new(1, vec![0.25; 4]).unwrap(),
            mix2: MixWeights::new(1, vec![0.25; 4]).unwrap(),
            attention: AttentionWeights {
                projection: vec![10.0],
                bias: -5.0,
            },
        };
        let features = TensorMap::filled(6, 6, 1, 1.0);
        let (_, att) = attention_gate(&features, &x, &p).unwrap();
        for &(i, j) in &rain {
            assert!(att.data()[i * 6 + j] > 0.99);
        }
        assert!(att.data()[0] < 0.01);
    }

    #[test]
    fn attention_stays_strictly_inside_unit_interval() {
        let x = random_map(5, 5, 2, 10);
        let f = random_map(5, 5, 2, 11);
        for scale in [1.0, 1e3, -1e3] {
            let mut p = SamParams::init(2, 12);
            p.attention.projection = vec![scale, scale];
            p.attention.bias = scale;
            let (_, att) = attention_gate(&f, &x, &p).unwrap();
            assert!(att.data().iter().all(|&a| a > 0.0 && a < 1.0));
        }
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let x = random_map(3, 3, 2, 1);
        let w = DirectionalWeights::identity(3);
        assert!(matches!(directional_scan(&x, Direction::LeftToRight, &w), Err(Error::Shape(_))));
        let mut bad = x.clone();
        bad.data_mut()[0] = f64::NAN;
        assert!(matches!(
            directional_scan(&bad, Direction::LeftToRight, &DirectionalWeights::identity(2)),
            Err(Error::NonFinite(_))
        ));
        let up = TensorMap::zeros(3, 4, 2);
        assert!(directional_scan_grad(&x, Direction::LeftToRight, &DirectionalWeights::identity(2), &up).is_err());
        let p = SamParams::init(2, 0);
        assert!(attention_gate(&TensorMap::zeros(2, 3, 1), &x, &p).is_err());
    }
}
