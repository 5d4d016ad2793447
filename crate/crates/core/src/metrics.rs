//! Image quality metrics, rain masks and the deraining losses.
//!
//! Everything here is a pure evaluation function. Means are accumulated with
//! [`pairwise_sum`] so results are independent of how work is split.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::sam::TensorMap;

/// Default threshold for [`rain_mask`], in 8-bit intensity units.
pub const DEFAULT_MASK_THRESHOLD: u8 = 10;

/// Sum with a fixed pairwise reduction tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (left, right) = values.split_at(values.len() / 2);
    pairwise_sum(left) + pairwise_sum(right)
}

fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    a.ensure_same_shape(b, "psnr inputs")?;
    let sse: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse as f64 / a.sites() as f64;
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

/// Writes non-finite PSNR values as the string `"inf"`.
pub fn serialize_db<S: Serializer>(value: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if value.is_infinite() && *value > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*value)
    }
}

/// Quality report printed by the `evaluate` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    #[serde(serialize_with = "serialize_db")]
    pub psnr_db: f64,
    pub ssim: f64,
    pub n_sites: usize,
}

pub fn evaluate(a: &Frame, b: &Frame) -> Result<QualityReport> {
    Ok(QualityReport {
        psnr_db: psnr(a, b)?,
        ssim: ssim(a, b, &SsimParams::default())?,
        n_sites: a.sites(),
    })
}

/// Single-scale SSIM settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
        }
    }
}

impl SsimParams {
    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::Parameter(format!("ssim window {} must be odd", self.window)));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.sigma > 0.0 && self.dynamic_range > 0.0) {
            return Err(Error::Parameter("ssim constants must be positive".into()));
        }
        Ok(())
    }

    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn taps(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let raw: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - r;
                (-(d * d) / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }
}

/// Separable valid-mode filter of a `w x h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&src[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over valid window positions, averaged across channels.
pub fn ssim(a: &Frame, b: &Frame, params: &SsimParams) -> Result<f64> {
    a.ensure_same_shape(b, "ssim inputs")?;
    params.validate()?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < params.window || h < params.window {
        return Err(Error::Size(format!(
            "{w}x{h} is smaller than the {0}x{0} ssim window",
            params.window
        )));
    }
    let taps = params.taps();
    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let channels = a.channels() as usize;

    let per_channel: Vec<f64> = (0..channels)
        .map(|c| {
            let pa: Vec<f64> = a.data().iter().skip(c).step_by(channels).map(|&v| v as f64).collect();
            let pb: Vec<f64> = b.data().iter().skip(c).step_by(channels).map(|&v| v as f64).collect();
            let sq = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
            let mu_a = filter_valid(&pa, w, h, &taps);
            let mu_b = filter_valid(&pb, w, h, &taps);
            let e_aa = filter_valid(&sq(&pa, &pa), w, h, &taps);
            let e_bb = filter_valid(&sq(&pb, &pb), w, h, &taps);
            let e_ab = filter_valid(&sq(&pa, &pb), w, h, &taps);
            let map: Vec<f64> = (0..mu_a.len())
                .map(|i| {
                    let (ma, mb) = (mu_a[i], mu_b[i]);
                    let var_a = e_aa[i] - ma * ma;
                    let var_b = e_bb[i] - mb * mb;
                    let cov = e_ab[i] - ma * mb;
                    ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                        / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2))
                })
                .collect();
            mean(&map)
        })
        .collect();
    Ok(mean(&per_channel))
}

/// Binary per-pixel map, 1 where rain covers the pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RainMask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RainMask {
    pub fn from_data(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::dimension("mask length", width as usize * height as usize, data.len()));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Parameter("mask values must be 0 or 1".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Gray frame with 255 on covered pixels.
    pub fn to_frame(&self) -> Frame {
        Frame::new(self.width, self.height, 1, self.data.iter().map(|&v| v * 255).collect())
            .expect("mask shape")
    }
}

/// Marks pixels where some channel of `rain` exceeds `clean` by more than
/// `threshold`.
pub fn rain_mask(rain: &Frame, clean: &Frame, threshold: u8) -> Result<RainMask> {
    rain.ensure_same_shape(clean, "rain_mask inputs")?;
    let channels = rain.channels() as usize;
    let data = rain
        .data()
        .chunks_exact(channels)
        .zip(clean.data().chunks_exact(channels))
        .map(|(r, c)| {
            let diff = r.iter().zip(c).map(|(&r, &c)| r as i16 - c as i16).max().unwrap();
            (diff > threshold as i16) as u8
        })
        .collect();
    RainMask::from_data(rain.width(), rain.height(), data)
}

/// Single-channel attention map with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl AttentionMap {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::dimension(
                "attention map length",
                width as usize * height as usize,
                data.len(),
            ));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Parameter("attention values must lie in [0, 1]".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Squared L2 distance between attention and mask, divided by pixel count.
pub fn attention_loss(a: &AttentionMap, m: &RainMask) -> Result<f64> {
    if a.width != m.width || a.height != m.height {
        return Err(Error::dimension(
            "attention_loss inputs",
            format!("{}x{}", a.width, a.height),
            format!("{}x{}", m.width, m.height),
        ));
    }
    let sq: Vec<f64> = a
        .data
        .iter()
        .zip(&m.data)
        .map(|(&a, &m)| (a - m as f64).powi(2))
        .collect();
    Ok(mean(&sq))
}

/// Components of the unweighted training loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub l1: f64,
    pub l_ssim: f64,
    pub l_att: f64,
}

/// `L1 + (1 - SSIM) + attention loss`, with L1 on intensities scaled to `[0, 1]`.
pub fn total_loss(pred: &Frame, clean: &Frame, a: &AttentionMap, m: &RainMask) -> Result<LossBreakdown> {
    pred.ensure_same_shape(clean, "total_loss images")?;
    if a.width != pred.width() || a.height != pred.height() {
        return Err(Error::dimension(
            "total_loss attention map",
            format!("{}x{}", pred.width(), pred.height()),
            format!("{}x{}", a.width, a.height),
        ));
    }
    let abs_sum: u64 = pred
        .data()
        .iter()
        .zip(clean.data())
        .map(|(&p, &c)| (p as i64 - c as i64).unsigned_abs())
        .sum();
    let l1 = abs_sum as f64 / (255.0 * pred.sites() as f64);
    let l_ssim = 1.0 - ssim(pred, clean, &SsimParams::default())?;
    let l_att = attention_loss(a, m)?;
    Ok(LossBreakdown {
        total: l1 + l_ssim + l_att,
        l1,
        l_ssim,
        l_att,
    })
}

/// Background from a rain image and a predicted rain residual: `O - R`,
/// rounded and clamped to 8 bits.
pub fn apply_residual(o: &Frame, r: &TensorMap) -> Result<Frame> {
    let (h, w, c) = r.shape();
    if (w, h, c) != (o.width() as usize, o.height() as usize, o.channels() as usize) {
        return Err(Error::dimension(
            "apply_residual residual",
            o.shape_string(),
            format!("{w}x{h}x{c}"),
        ));
    }
    if r.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("residual map"));
    }
    let data = o
        .data()
        .iter()
        .zip(r.data())
        .map(|(&o, &r)| (o as f64 - r).round().clamp(0.0, 255.0) as u8)
        .collect();
    Frame::new(o.width(), o.height(), o.channels(), data)
}
