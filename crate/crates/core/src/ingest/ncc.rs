//! Zero-normalized cross-correlation template matching.
//!
//! All window statistics are accumulated in exact integer arithmetic, so a
//! score is `cov / sqrt(var_t * var_w)` with every factor computed exactly
//! and only the final division rounded.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frames::{crop_window, FrameStack, Image};
use crate::error::{Error, Result};

const MIN_TEMPLATE_SIDE: usize = 8;

/// Grayscale template image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    image: Image,
}

impl Template {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width < MIN_TEMPLATE_SIDE || height < MIN_TEMPLATE_SIDE {
            return Err(Error::Size(format!(
                "template {width}x{height} smaller than {MIN_TEMPLATE_SIDE}x{MIN_TEMPLATE_SIDE}"
            )));
        }
        Ok(Self { image: Image::gray(width, height, pixels)? })
    }

    pub fn from_image(image: &Image) -> Result<Self> {
        if image.channels != 1 {
            return Err(Error::Format("template must be grayscale".into()));
        }
        Self::new(image.width, image.height, image.pixels.clone())
    }

    pub fn width(&self) -> usize {
        self.image.width
    }

    pub fn height(&self) -> usize {
        self.image.height
    }

    pub fn image(&self) -> &Image {
        &self.image
    }
}

/// Best match: top-left corner and correlation score in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NccMatch {
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

impl NccMatch {
    /// Center of the matched template footprint.
    pub fn center(&self, tmpl: &Template) -> (i64, i64) {
        ((self.x + tmpl.width() / 2) as i64, (self.y + tmpl.height() / 2) as i64)
    }
}

/// Summed-area table with a zero row/column prepended.
struct Integral {
    stride: usize,
    sum: Vec<u64>,
    sq: Vec<u64>,
}

impl Integral {
    fn new(img: &Image) -> Self {
        let stride = img.width + 1;
        let mut sum = vec![0u64; stride * (img.height + 1)];
        let mut sq = vec![0u64; stride * (img.height + 1)];
        for y in 0..img.height {
            let mut row_sum = 0u64;
            let mut row_sq = 0u64;
            for x in 0..img.width {
                let v = img.pixels[y * img.width + x] as u64;
                row_sum += v;
                row_sq += v * v;
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + row_sum;
                sq[(y + 1) * stride + x + 1] = sq[y * stride + x + 1] + row_sq;
            }
        }
        Self { stride, sum, sq }
    }

    fn rect(table: &[u64], stride: usize, x: usize, y: usize, w: usize, h: usize) -> u64 {
        table[(y + h) * stride + x + w] + table[y * stride + x] - table[y * stride + x + w] - table[(y + h) * stride + x]
    }
}

/// Correlation score of every template placement, row-major over
/// `(frame.height - th + 1) x (frame.width - tw + 1)` positions.
pub fn ncc_score_map(frame: &Image, tmpl: &Template) -> Result<ScoreMap> {
    if frame.channels != 1 {
        return Err(Error::Format("frame must be grayscale".into()));
    }
    let (tw, th) = (tmpl.width(), tmpl.height());
    if tw > frame.width || th > frame.height {
        return Err(Error::Size(format!(
            "template {tw}x{th} larger than frame {}x{}",
            frame.width, frame.height
        )));
    }
    let n = (tw * th) as i128;
    let t = &tmpl.image.pixels;
    let t_sum: i128 = t.iter().map(|&v| v as i128).sum();
    let t_sq: i128 = t.iter().map(|&v| (v as i128) * (v as i128)).sum();
    let t_var = n * t_sq - t_sum * t_sum;
    if t_var == 0 {
        return Err(Error::DegenerateTemplate);
    }
    let t_var_sqrt = (t_var as f64).sqrt();
    let integral = Integral::new(frame);
    let width = frame.width - tw + 1;
    let height = frame.height - th + 1;

    let scores = (0..height)
        .into_par_iter()
        .flat_map_iter(|y| {
            let integral = &integral;
            (0..width).map(move |x| {
                let mut cross = 0u64;
                for ty in 0..th {
                    let start = (y + ty) * frame.width + x;
                    let frow = &frame.pixels[start..start + tw];
                    let trow = &t[ty * tw..(ty + 1) * tw];
                    cross += frow.iter().zip(trow).map(|(&a, &b)| a as u64 * b as u64).sum::<u64>();
                }
                let w_sum = Integral::rect(&integral.sum, integral.stride, x, y, tw, th) as i128;
                let w_sq = Integral::rect(&integral.sq, integral.stride, x, y, tw, th) as i128;
                let w_var = n * w_sq - w_sum * w_sum;
                if w_var == 0 {
                    0.0
                } else {
                    let cov = n * cross as i128 - t_sum * w_sum;
                    (cov as f64 / t_var_sqrt / (w_var as f64).sqrt()).clamp(-1.0, 1.0)
                }
            })
        })
        .collect();
    Ok(ScoreMap { width, height, scores })
}

/// Scores for every placement of a template.
#[derive(Debug, Clone)]
pub struct ScoreMap {
    pub width: usize,
    pub height: usize,
    pub scores: Vec<f64>,
}

impl ScoreMap {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.scores[y * self.width + x]
    }

    /// First maximum in raster order.
    pub fn argmax(&self) -> NccMatch {
        let mut best = NccMatch { x: 0, y: 0, score: f64::NEG_INFINITY };
        for (i, &s) in self.scores.iter().enumerate() {
            if s > best.score {
                best = NccMatch { x: i % self.width, y: i / self.width, score: s };
            }
        }
        best
    }
}

/// Position maximizing the zero-normalized cross-correlation of `tmpl`
/// against `frame`. Windows with zero variance score 0; ties resolve to the
/// first position in raster order.
pub fn ncc_match(frame: &Image, tmpl: &Template) -> Result<NccMatch> {
    Ok(ncc_score_map(frame, tmpl)?.argmax())
}

/// Matches every `stride`-th frame; frames in between reuse the latest match.
pub fn match_stack(stack: &FrameStack, tmpl: &Template, stride: usize) -> Result<Vec<NccMatch>> {
    if stack.count == 0 {
        return Err(Error::EmptyInput("frame stack is empty".into()));
    }
    let stride = stride.max(1);
    let anchors: Vec<usize> = (0..stack.count).step_by(stride).collect();
    let matched = anchors
        .par_iter()
        .map(|&i| ncc_match(&stack.frame(i)?, tmpl))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..stack.count).map(|i| matched[i / stride]).collect())
}

/// Crops a `size`×`size` window centered on the matched template in every
/// frame.
pub fn extract_windows(
    stack: &FrameStack,
    tmpl: &Template,
    size: usize,
    stride: usize,
) -> Result<(FrameStack, Vec<NccMatch>)> {
    let matches = match_stack(stack, tmpl, stride)?;
    let crops = matches
        .iter()
        .enumerate()
        .map(|(i, m)| crop_window(&stack.frame(i)?, m.center(tmpl), size))
        .collect::<Result<Vec<_>>>()?;
    Ok((FrameStack::from_frames(&crops)?, matches))
}
