//! Frames, sequences and per-pixel temporal traces.
//!
//! A [`Sequence`] is a stack of co-registered 8-bit frames of a static scene,
//! stored on disk as `frame_%06d.png`. No alignment is attempted: the camera
//! is assumed not to move.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use crate::error::{Error, Result};

/// One 8-bit image, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
    /// Position of this frame in its sequence.
    pub index: usize,
}

impl Frame {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::dimension("frame size", "width, height >= 1", format!("{width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::dimension("frame channels", "1 or 3", channels));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::dimension("frame data length", expected, data.len()));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
            index: 0,
        })
    }

    /// A frame with every sample set to `value`.
    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self> {
        let len = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; len])
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Number of (x, y, channel) sites.
    pub fn sites(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn offset(&self, x: u32, y: u32, c: u8) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize + c as usize
    }

    pub fn get(&self, x: u32, y: u32, c: u8) -> Result<u8> {
        self.check_bounds(x, y, c)?;
        Ok(self.data[self.offset(x, y, c)])
    }

    fn check_bounds(&self, x: u32, y: u32, c: u8) -> Result<()> {
        if x >= self.width || y >= self.height || c >= self.channels {
            return Err(Error::Bounds(format!(
                "({x}, {y}, {c}) outside {}x{}x{}",
                self.width, self.height, self.channels
            )));
        }
        Ok(())
    }

    /// True when both frames have the same width, height and channel count.
    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn ensure_same_shape(&self, other: &Frame, what: &str) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::dimension(what, self.shape_string(), other.shape_string()));
        }
        Ok(())
    }

    pub(crate) fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    fn color_type(&self) -> ExtendedColorType {
        if self.channels == 1 {
            ExtendedColorType::L8
        } else {
            ExtendedColorType::Rgb8
        }
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        image::codecs::png::PngEncoder::new(&mut out)
            .write_image(&self.data, self.width, self.height, self.color_type())
            .map_err(|e| Error::Parameter(format!("png encode: {e}")))?;
        Ok(out)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_png_bytes()?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let reader = ImageReader::new(Cursor::new(bytes))
            .with_guessed_format()
            .map_err(|e| Error::io("<memory>", e))?;
        let image = reader.decode().map_err(|e| Error::Decode {
            path: PathBuf::from("<memory>"),
            message: e.to_string(),
        })?;
        Self::from_dynamic(image, Path::new("<memory>"))
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let reader = ImageReader::new(Cursor::new(bytes))
            .with_guessed_format()
            .map_err(|e| Error::io(path, e))?;
        let image = reader.decode().map_err(|e| Error::Decode {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Self::from_dynamic(image, path)
    }

    fn from_dynamic(image: DynamicImage, path: &Path) -> Result<Self> {
        let (width, height) = (image.width(), image.height());
        match image {
            DynamicImage::ImageLuma8(buf) => Self::new(width, height, 1, buf.into_raw()),
            DynamicImage::ImageRgb8(buf) => Self::new(width, height, 3, buf.into_raw()),
            other => Err(Error::UnsupportedFormat {
                path: path.to_owned(),
                format: format!("{:?}", other.color()),
            }),
        }
    }
}

/// Samples of one (x, y, channel) site across a sequence, in frame order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelTrace(Vec<u8>);

impl PixelTrace {
    pub fn new(samples: Vec<u8>) -> Self {
        Self(samples)
    }

    pub fn samples(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<u8>> for PixelTrace {
    fn from(samples: Vec<u8>) -> Self {
        Self(samples)
    }
}

/// An ordered, gap-free stack of same-shaped frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    frames: Vec<Frame>,
    pub source_id: String,
}

impl Sequence {
    /// Builds a sequence, renumbering frame indices to `0..N`.
    pub fn new(frames: Vec<Frame>, source_id: impl Into<String>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::EmptyInput("sequence has no frames"));
        };
        for (k, frame) in frames.iter().enumerate().skip(1) {
            first.ensure_same_shape(frame, &format!("frame {k}"))?;
        }
        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(k, f)| f.with_index(k))
            .collect();
        Ok(Self {
            frames,
            source_id: source_id.into(),
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, k: usize) -> Option<&Frame> {
        self.frames.get(k)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> u32 {
        self.frames[0].width
    }

    pub fn height(&self) -> u32 {
        self.frames[0].height
    }

    pub fn channels(&self) -> u8 {
        self.frames[0].channels
    }

    /// Pixel sites per frame, counting each channel separately.
    pub fn sites(&self) -> usize {
        self.frames[0].sites()
    }

    /// The first `n` frames (all of them if `n >= len`).
    pub fn truncated(&self, n: usize) -> Result<Sequence> {
        if n == 0 {
            return Err(Error::EmptyInput("truncating to zero frames"));
        }
        Ok(Sequence {
            frames: self.frames.iter().take(n).cloned().collect(),
            source_id: self.source_id.clone(),
        })
    }

    pub fn pixel_trace(&self, x: u32, y: u32, c: u8) -> Result<PixelTrace> {
        self.frames[0].check_bounds(x, y, c)?;
        let offset = self.frames[0].offset(x, y, c);
        Ok(PixelTrace(self.frames.iter().map(|f| f.data[offset]).collect()))
    }

    /// Trace of the site at flat offset `site` (see [`Frame::offset`]).
    pub fn trace_at(&self, site: usize) -> PixelTrace {
        PixelTrace(self.frames.iter().map(|f| f.data[site]).collect())
    }

    /// Writes every frame as `frame_%06d.png` into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (k, frame) in self.frames.iter().enumerate() {
            frame.save_png(dir.join(frame_file_name(k)))?;
        }
        Ok(())
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.png")
}

fn parse_frame_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".png")?;
    if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Paths of `frame_%06d.png` files in `dir`, checked to run `0..N` with no gaps.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut indexed = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if let Some(index) = name.to_str().and_then(parse_frame_index) {
            indexed.push((index, entry.path()));
        }
    }
    indexed.sort_unstable_by_key(|(index, _)| *index);
    for (expected, (index, _)) in indexed.iter().enumerate() {
        if *index != expected {
            return Err(Error::SequenceGap { index: expected });
        }
    }
    if indexed.is_empty() {
        return Err(Error::SequenceGap { index: 0 });
    }
    Ok(indexed.into_iter().map(|(_, path)| path).collect())
}

/// Number of frames in a sequence directory, without decoding them.
pub fn count_frames(dir: impl AsRef<Path>) -> Result<usize> {
    list_frames(dir).map(|paths| paths.len())
}

/// Loads `frame_000000.png`, `frame_000001.png`, ... from `dir`.
///
/// With `frame_limit`, only the first `frame_limit` frames are decoded. The
/// whole directory is still checked for numbering gaps.
pub fn load_sequence(dir: impl AsRef<Path>, frame_limit: Option<usize>) -> Result<Sequence> {
    let dir = dir.as_ref();
    let mut paths = list_frames(dir)?;
    if let Some(limit) = frame_limit {
        if limit == 0 {
            return Err(Error::EmptyInput("frame limit of zero"));
        }
        paths.truncate(limit);
    }
    let mut frames: Vec<Frame> = Vec::with_capacity(paths.len());
    for (k, path) in paths.iter().enumerate() {
        let frame = Frame::open(path)?.with_index(k);
        if let Some(first) = frames.first() {
            first.ensure_same_shape(&frame, &format!("frame {k} ({})", path.display()))?;
        }
        frames.push(frame);
    }
    Sequence::new(frames, dir.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: u32, h: u32, data: Vec<u8>) -> Frame {
        Frame::new(w, h, 1, data).unwrap()
    }

    #[test]
    fn frame_rejects_bad_lengths() {
        assert!(Frame::new(2, 2, 1, vec![0; 3]).is_err());
        assert!(Frame::new(0, 2, 1, vec![]).is_err());
        assert!(Frame::new(1, 1, 2, vec![0; 2]).is_err());
    }

    #[test]
    fn identical_frames_give_constant_traces() {
        let dir = tempfile::tempdir().unwrap();
        let frame = gray(2, 2, vec![9, 80, 160, 255]);
        let seq = Sequence::new(vec![frame.clone(); 3], "t").unwrap();
        seq.write_dir(dir.path()).unwrap();

        let loaded = load_sequence(dir.path(), None).unwrap();
        assert_eq!(loaded.len(), 3);
        for y in 0..2 {
            for x in 0..2 {
                let t = loaded.pixel_trace(x, y, 0).unwrap();
                let v = frame.get(x, y, 0).unwrap();
                assert_eq!(t.samples(), &[v, v, v]);
            }
        }
    }

    #[test]
    fn gap_is_reported_at_first_missing_index() {
        let dir = tempfile::tempdir().unwrap();
        let frame = gray(2, 2, vec![1; 4]);
        for k in [0, 1, 3] {
            frame.save_png(dir.path().join(frame_file_name(k))).unwrap();
        }
        match load_sequence(dir.path(), None) {
            Err(Error::SequenceGap { index }) => assert_eq!(index, 2),
            other => panic!("expected gap, got {other:?}"),
        }
    }

    #[test]
    fn sequence_not_starting_at_zero_is_a_gap() {
        let dir = tempfile::tempdir().unwrap();
        gray(1, 1, vec![1]).save_png(dir.path().join(frame_file_name(1))).unwrap();
        assert!(matches!(load_sequence(dir.path(), None), Err(Error::SequenceGap { index: 0 })));
    }

    #[test]
    fn empty_directory_is_a_gap_at_zero() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_sequence(dir.path(), None), Err(Error::SequenceGap { index: 0 })));
    }

    #[test]
    fn dimension_mismatch_names_frame() {
        let dir = tempfile::tempdir().unwrap();
        gray(2, 2, vec![1; 4]).save_png(dir.path().join(frame_file_name(0))).unwrap();
        gray(3, 2, vec![1; 6]).save_png(dir.path().join(frame_file_name(1))).unwrap();
        let err = load_sequence(dir.path(), None).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        assert!(err.to_string().contains("frame 1"), "{err}");
    }

    #[test]
    fn undecodable_file_is_a_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(frame_file_name(0)), b"not a png").unwrap();
        assert!(matches!(load_sequence(dir.path(), None), Err(Error::Decode { .. })));
    }

    #[test]
    fn sixteen_bit_input_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(2, 1, vec![1000u16, 2000]).unwrap();
        img.save(dir.path().join(frame_file_name(0))).unwrap();
        assert!(matches!(
            load_sequence(dir.path(), None),
            Err(Error::UnsupportedFormat { .. })
        ));
    }

    #[test]
    fn frame_limit_loads_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let frames = (0..5).map(|k| gray(1, 1, vec![k as u8 * 10])).collect();
        Sequence::new(frames, "t").unwrap().write_dir(dir.path()).unwrap();
        let seq = load_sequence(dir.path(), Some(3)).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.pixel_trace(0, 0, 0).unwrap().samples(), &[0, 10, 20]);
        assert_eq!(count_frames(dir.path()).unwrap(), 5);
    }

    #[test]
    fn trace_reflects_added_brightness() {
        let v = 90;
        let a = gray(2, 1, vec![v, 7]);
        let b = gray(2, 1, vec![v + 50, 7]);
        let seq = Sequence::new(vec![a, b], "t").unwrap();
        assert_eq!(seq.pixel_trace(0, 0, 0).unwrap().samples(), &[v, v + 50]);
    }

    #[test]
    fn trace_out_of_bounds() {
        let seq = Sequence::new(vec![Frame::filled(2, 2, 3, 255).unwrap()], "t").unwrap();
        assert!(matches!(seq.pixel_trace(2, 0, 0), Err(Error::Bounds(_))));
        assert!(matches!(seq.pixel_trace(0, 2, 0), Err(Error::Bounds(_))));
        assert!(matches!(seq.pixel_trace(0, 0, 3), Err(Error::Bounds(_))));
        assert_eq!(seq.pixel_trace(1, 1, 2).unwrap().samples(), &[255]);
    }

    #[test]
    fn non_frame_files_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        gray(1, 1, vec![3]).save_png(dir.path().join(frame_file_name(0))).unwrap();
        gray(1, 1, vec![3]).save_png(dir.path().join("clean.png")).unwrap();
        gray(1, 1, vec![3]).save_png(dir.path().join("mask_000000.png")).unwrap();
        assert_eq!(load_sequence(dir.path(), None).unwrap().len(), 1);
    }
}
