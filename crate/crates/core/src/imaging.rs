//! Grayscale frame stacks, the binary PGM codec, and the two image
//! pipelines: background modeling and shadow removal.
//!
//! A stack of `n` frames of `width x height` pixels is a `D x n` matrix with
//! `D = width * height`; pixel `(r, c)` lands on row `r * width + c`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, DVectorView};
use rayon::prelude::*;

use crate::ae::reconstruct;
use crate::error::{Error, Result};
use crate::linalg::{center, DataMatrix};
use crate::model::{fit, FitModel, FitOptions};

pub const DEFAULT_BACKGROUND_COMPONENTS: usize = 5;
pub const DEFAULT_FACE_COMPONENTS: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    width: usize,
    height: usize,
    frames: DataMatrix,
    names: Vec<String>,
}

impl FrameStack {
    pub fn new(width: usize, height: usize, frames: DataMatrix, names: Vec<String>) -> Result<Self> {
        if width * height != frames.dim() {
            return Err(Error::InvalidData(format!(
                "{width}x{height} frames need {} rows, matrix has {}",
                width * height,
                frames.dim()
            )));
        }
        if names.len() != frames.n_samples() {
            return Err(Error::InvalidData(format!(
                "{} names for {} frames",
                names.len(),
                frames.n_samples()
            )));
        }
        Ok(FrameStack {
            width,
            height,
            frames,
            names,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> &DataMatrix {
        &self.frames
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn frame(&self, i: usize) -> DVectorView<'_, f64> {
        self.frames.values().column(i)
    }

    fn with_values(&self, values: DMatrix<f64>) -> Result<FrameStack> {
        FrameStack::new(self.width, self.height, DataMatrix::new(values)?, self.names.clone())
    }
}

/// Clamps to `[0, 255]` and rounds half up.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 255.0) + 0.5).floor() as u8
}

/// Decodes a binary (P5) PGM with maxval 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let unsupported = |msg: &str| Error::UnsupportedFormat(msg.to_string());
    match bytes.get(..2) {
        Some(b"P5") => {}
        Some(b"P2") => return Err(unsupported("ASCII PGM (P2); only binary P5 is read")),
        Some(b"P3") | Some(b"P6") => return Err(unsupported("color PPM input")),
        Some(b"P1") | Some(b"P4") => return Err(unsupported("bitmap PBM input")),
        _ => return Err(unsupported("not a PGM file")),
    }
    let mut pos = 2;
    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let begin = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if begin == pos {
            return Err(unsupported("malformed PGM header"));
        }
        *slot = std::str::from_utf8(&bytes[begin..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| unsupported("PGM header value out of range"))?;
    }
    let [width, height, maxval] = header;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "PGM maxval {maxval}; only 255 is supported"
        )));
    }
    if width == 0 || height == 0 {
        return Err(unsupported("PGM with zero size"));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(unsupported("malformed PGM header"));
    }
    pos += 1;
    let len = width * height;
    let pixels = bytes
        .get(pos..pos + len)
        .ok_or_else(|| unsupported("truncated PGM pixel data"))?;
    Ok((width, height, pixels.to_vec()))
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Reads PGM frames, ordered lexicographically by file name. Frame names are
/// the file stems.
pub fn load_frames<P: AsRef<Path>>(paths: &[P]) -> Result<FrameStack> {
    if paths.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut paths: Vec<&Path> = paths.iter().map(AsRef::as_ref).collect();
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()).then(a.cmp(b)));

    let mut names = Vec::with_capacity(paths.len());
    let mut columns: Vec<Vec<u8>> = Vec::with_capacity(paths.len());
    let mut shape = None;
    for path in paths {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let (w, h, pixels) = decode_pgm(&bytes).map_err(|e| match e {
            Error::UnsupportedFormat(msg) => {
                Error::UnsupportedFormat(format!("{}: {msg}", path.display()))
            }
            other => other,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match shape {
            None => shape = Some((w, h)),
            Some((width, height)) if (width, height) != (w, h) => {
                return Err(Error::MixedDimensions {
                    name,
                    width,
                    height,
                    got_width: w,
                    got_height: h,
                })
            }
            Some(_) => {}
        }
        names.push(name);
        columns.push(pixels);
    }
    let (width, height) = shape.expect("at least one frame");
    let values = DMatrix::from_fn(width * height, columns.len(), |r, c| f64::from(columns[c][r]));
    FrameStack::new(width, height, DataMatrix::new(values)?, names)
}

/// Writes every frame as `<name><suffix>.pgm` in `dir`. Each file is written
/// to a temporary name first and renamed once complete.
pub fn write_frames(stack: &FrameStack, dir: &Path, suffix: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    (0..stack.len())
        .into_par_iter()
        .map(|i| {
            let path = dir.join(format!("{}{suffix}.pgm", stack.names[i]));
            let pixels: Vec<u8> = stack.frame(i).iter().map(|&v| quantize(v)).collect();
            let bytes = encode_pgm(stack.width, stack.height, &pixels);
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
            tmp.write_all(&bytes).map_err(|e| Error::io(&path, e))?;
            tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
            Ok(path)
        })
        .collect()
}

/// Root mean square difference between every frame (column) of `frames` and
/// a single reference frame.
pub fn rmse(frames: &DMatrix<f64>, reference: &DVector<f64>) -> f64 {
    let mut sum = 0.0;
    for col in frames.column_iter() {
        sum += (col - reference).norm_squared();
    }
    (sum / frames.len() as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct BackgroundResult {
    /// `None` when every frame is identical: the mean is then the background.
    pub model: Option<FitModel>,
    /// Reconstructions clamped to `[0, 255]`.
    pub backgrounds: FrameStack,
    /// `|frame - background|` against the clamped background.
    pub foreground: FrameStack,
    /// Unclamped reconstructions.
    pub raw: DMatrix<f64>,
    /// `frame - raw`, so `raw + residual` is the input.
    pub residual: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct ShadowResult {
    pub model: Option<FitModel>,
    pub reconstructed: FrameStack,
    /// `255 - |frame - reconstruction|`, clamped.
    pub inverted_difference: FrameStack,
    pub raw: DMatrix<f64>,
}

/// Fits `options.method` on the frames and reconstructs each frame from it.
fn low_rank_frames(stack: &FrameStack, d: usize, options: &FitOptions) -> Result<(Option<FitModel>, DMatrix<f64>)> {
    let frames = stack.frames();
    let max = frames.dim().min(frames.n_samples());
    if d == 0 || d > max {
        return Err(Error::InvalidRank { requested: d, max });
    }
    let (mean, xc) = center(frames);
    if xc.values().iter().all(|&v| v == 0.0) {
        let raw = DMatrix::from_fn(frames.dim(), frames.n_samples(), |r, _| mean[r]);
        return Ok((None, raw));
    }
    let model = fit(frames, d, options)?;
    let raw = reconstruct(&model, frames)?.into_values();
    Ok((Some(model), raw))
}

/// Reconstructs each frame from `d` components; moving objects end up in the
/// foreground.
pub fn background_model(stack: &FrameStack, d: usize, options: &FitOptions) -> Result<BackgroundResult> {
    let (model, raw) = low_rank_frames(stack, d, options)?;
    let frames = stack.frames().values();
    let clamped = raw.map(|v| v.clamp(0.0, 255.0));
    let foreground = frames.zip_map(&clamped, |f, b| (f - b).abs());
    let residual = frames - &raw;
    Ok(BackgroundResult {
        model,
        backgrounds: stack.with_values(clamped)?,
        foreground: stack.with_values(foreground)?,
        raw,
        residual,
    })
}

/// Reconstructs faces from `d` components; cast shadows show up dark in the
/// inverted difference.
pub fn shadow_removal(stack: &FrameStack, d: usize, options: &FitOptions) -> Result<ShadowResult> {
    let (model, raw) = low_rank_frames(stack, d, options)?;
    let frames = stack.frames().values();
    let clamped = raw.map(|v| v.clamp(0.0, 255.0));
    let inverted = frames.zip_map(&clamped, |f, r| (255.0 - (f - r).abs()).clamp(0.0, 255.0));
    Ok(ShadowResult {
        model,
        reconstructed: stack.with_values(clamped)?,
        inverted_difference: stack.with_values(inverted)?,
        raw,
    })
}
