//! Frame stacks, the `.wfrm` format, cropping, and lag composition.
//!
//! `.wfrm` layout: magic `"WFRM"`, u32 count, u16 height, u16 width,
//! u8 channels, then `count * height * width * channels` raw pixels,
//! frame-major with interleaved channels.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const WFRM_MAGIC: &[u8; 4] = b"WFRM";
const WFRM_HEADER_LEN: usize = 13;

/// 8-bit image, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for {width}x{height}x{channels}",
                pixels.len()
            )));
        }
        Ok(Self { width, height, channels, pixels })
    }

    pub fn gray(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, pixels)
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, channels: 1, pixels: vec![value; width * height] }
    }

    pub fn at(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    pub fn put(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.pixels[(y * self.width + x) * self.channels + c] = v;
    }

    /// Copy of the rectangle with top-left `(x, y)`; must lie inside the image.
    pub fn sub_image(&self, x: usize, y: usize, width: usize, height: usize) -> Result<Image> {
        if x + width > self.width || y + height > self.height {
            return Err(Error::Size(format!(
                "{width}x{height} at ({x},{y}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(width * height * self.channels);
        for row in y..y + height {
            let start = (row * self.width + x) * self.channels;
            pixels.extend_from_slice(&self.pixels[start..start + width * self.channels]);
        }
        Ok(Image { width, height, channels: self.channels, pixels })
    }

    /// Single channel `c` as a grayscale image.
    pub fn channel(&self, c: usize) -> Image {
        let pixels = self.pixels.iter().skip(c).step_by(self.channels).copied().collect();
        Image { width: self.width, height: self.height, channels: 1, pixels }
    }
}

/// Sequence of equally sized frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameStack {
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

impl FrameStack {
    pub fn new(count: usize, height: usize, width: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if !(channels == 1 || channels == 3) {
            return Err(Error::Format(format!("{channels} channels; expected 1 or 3")));
        }
        if pixels.len() != count * height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for {count} frames of {height}x{width}x{channels}",
                pixels.len()
            )));
        }
        Ok(Self { count, height, width, channels, pixels })
    }

    pub fn from_frames(frames: &[Image]) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::EmptyInput("no frames".into()))?;
        if frames.iter().any(|f| (f.width, f.height, f.channels) != (first.width, first.height, first.channels)) {
            return Err(Error::ShapeMismatch("frames differ in size".into()));
        }
        let pixels = frames.iter().flat_map(|f| f.pixels.iter().copied()).collect();
        Self::new(frames.len(), first.height, first.width, first.channels, pixels)
    }

    fn frame_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn frame(&self, i: usize) -> Result<Image> {
        if i >= self.count {
            return Err(Error::FrameIndex { index: i, count: self.count });
        }
        let n = self.frame_len();
        Ok(Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            pixels: self.pixels[i * n..(i + 1) * n].to_vec(),
        })
    }

    pub fn frame_pixels(&self, i: usize) -> &[u8] {
        let n = self.frame_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn read(path: &Path) -> Result<Self> {
        decode_wfrm(&fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, encode_wfrm(self)?)?;
        Ok(())
    }
}

pub fn encode_wfrm(stack: &FrameStack) -> Result<Vec<u8>> {
    let count = u32::try_from(stack.count).map_err(|_| Error::Size("frame count exceeds u32".into()))?;
    let h = u16::try_from(stack.height).map_err(|_| Error::Size("height exceeds u16".into()))?;
    let w = u16::try_from(stack.width).map_err(|_| Error::Size("width exceeds u16".into()))?;
    let mut out = Vec::with_capacity(WFRM_HEADER_LEN + stack.pixels.len());
    out.extend_from_slice(WFRM_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.push(stack.channels as u8);
    out.extend_from_slice(&stack.pixels);
    Ok(out)
}

pub fn decode_wfrm(bytes: &[u8]) -> Result<FrameStack> {
    if bytes.len() < 4 || &bytes[..4] != WFRM_MAGIC {
        return Err(Error::Format("bad magic, expected WFRM".into()));
    }
    if bytes.len() < WFRM_HEADER_LEN {
        return Err(Error::CorruptFile("wfrm header truncated".into()));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u16::from_le_bytes(bytes[8..10].try_into().unwrap()) as usize;
    let width = u16::from_le_bytes(bytes[10..12].try_into().unwrap()) as usize;
    let channels = bytes[12] as usize;
    let payload = &bytes[WFRM_HEADER_LEN..];
    if payload.len() != count * height * width * channels {
        return Err(Error::CorruptFile(format!(
            "payload holds {} bytes, header implies {}",
            payload.len(),
            count * height * width * channels
        )));
    }
    FrameStack::new(count, height, width, channels, payload.to_vec())
}

/// `size`×`size` window centered on `center = (x, y)`; pixels outside the
/// frame replicate the nearest edge pixel.
pub fn crop_window(frame: &Image, center: (i64, i64), size: usize) -> Result<Image> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::InvalidWindow(size));
    }
    if frame.width == 0 || frame.height == 0 {
        return Err(Error::EmptyInput("frame has no pixels".into()));
    }
    let half = (size / 2) as i64;
    let (cx, cy) = center;
    let max_x = frame.width as i64 - 1;
    let max_y = frame.height as i64 - 1;
    let mut pixels = Vec::with_capacity(size * size * frame.channels);
    for dy in -half..=half {
        let y = (cy + dy).clamp(0, max_y) as usize;
        for dx in -half..=half {
            let x = (cx + dx).clamp(0, max_x) as usize;
            let at = (y * frame.width + x) * frame.channels;
            pixels.extend_from_slice(&frame.pixels[at..at + frame.channels]);
        }
    }
    Ok(Image { width: size, height: size, channels: frame.channels, pixels })
}

/// Three-channel composite: channel 0 = frame `t`, 1 = `t-1`, 2 = `t-2`.
/// Lags before the first frame repeat frame 0.
pub fn compose_lag(frames: &FrameStack, t: usize) -> Result<Image> {
    if frames.count == 0 {
        return Err(Error::EmptyInput("frame stack is empty".into()));
    }
    if frames.channels != 1 {
        return Err(Error::Format("lag composition needs a grayscale stack".into()));
    }
    if t >= frames.count {
        return Err(Error::FrameIndex { index: t, count: frames.count });
    }
    let lags = [t, t.saturating_sub(1), t.saturating_sub(2)];
    let srcs = lags.map(|i| frames.frame_pixels(i));
    let n = frames.height * frames.width;
    let mut pixels = Vec::with_capacity(n * 3);
    for p in 0..n {
        pixels.extend(srcs.iter().map(|s| s[p]));
    }
    Ok(Image { width: frames.width, height: frames.height, channels: 3, pixels })
}

/// Lag composite of every frame of a grayscale stack.
pub fn compose_lag_stack(frames: &FrameStack) -> Result<FrameStack> {
    let composed = (0..frames.count).map(|t| compose_lag(frames, t)).collect::<Result<Vec<_>>>()?;
    FrameStack::from_frames(&composed)
}
