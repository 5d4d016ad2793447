use crate::error::{Error, Result};

/// Dense `height x width x channels` map of reals, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl TensorMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "{height}x{width}x{channels} map needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    /// `(height, width, channels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, c: usize) -> usize {
        (i * self.width + j) * self.channels + c
    }

    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.data[self.index(i, j, c)]
    }

    pub fn set(&mut self, i: usize, j: usize, c: usize, value: f64) {
        let idx = self.index(i, j, c);
        self.data[idx] = value;
    }

    /// Left-right mirror image.
    pub fn mirror_horizontal(&self) -> Self {
        let mut out = Self::zeros(self.height, self.width, self.channels);
        for i in 0..self.height {
            for j in 0..self.width {
                for c in 0..self.channels {
                    out.set(i, self.width - 1 - j, c, self.get(i, j, c));
                }
            }
        }
        out
    }

    /// Top-bottom mirror image.
    pub fn mirror_vertical(&self) -> Self {
        let mut out = Self::zeros(self.height, self.width, self.channels);
        for i in 0..self.height {
            for j in 0..self.width {
                for c in 0..self.channels {
                    out.set(self.height - 1 - i, j, c, self.get(i, j, c));
                }
            }
        }
        out
    }

    pub(crate) fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub(crate) fn ensure_shape(&self, shape: (usize, usize, usize), what: &str) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::Shape(format!(
                "{what}: expected {:?}, found {:?}",
                shape,
                self.shape()
            )));
        }
        Ok(())
    }
}
