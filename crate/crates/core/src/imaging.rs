//! Colour images as `height x width x 3` tensors (channels are frontal
//! slices), random pixel corruption, PSNR, and TRPCA denoising.
//!
//! Images are read and written as binary PPM (`P6`). Samples are scaled to
//! `[0, 1]` on load; the file's `maxval` is kept so saving reproduces the
//! original bytes.

use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;
use crate::solver::{solve, SolverConfig, TrpcaSolution};
use crate::tensor3::Tensor3;
use crate::transform::Transform;

#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    tensor: Tensor3,
    maxval: u16,
}

impl ImageTensor {
    /// Wraps a `height x width x 3` tensor with entries in `[0, 1]`.
    pub fn new(tensor: Tensor3, maxval: u16) -> Result<Self> {
        if tensor.n3() != 3 {
            return Err(Error::InvalidArgument(format!(
                "colour images need 3 channels, got {}",
                tensor.n3()
            )));
        }
        if maxval == 0 {
            return Err(Error::InvalidArgument("maxval must be positive".into()));
        }
        if tensor.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(
                "image samples must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { tensor, maxval })
    }

    pub fn tensor(&self) -> &Tensor3 {
        &self.tensor
    }

    pub fn into_tensor(self) -> Tensor3 {
        self.tensor
    }

    pub fn height(&self) -> usize {
        self.tensor.n1()
    }

    pub fn width(&self) -> usize {
        self.tensor.n2()
    }

    /// Largest sample value of the source file (255 for 8-bit images).
    pub fn maxval(&self) -> u16 {
        self.maxval
    }
}

struct Header<'a> {
    magic: &'a [u8],
    width: usize,
    height: usize,
    maxval: usize,
    body: &'a [u8],
}

fn parse_header(bytes: &[u8]) -> Result<Header<'_>> {
    let fmt_err = |m: &str| Error::Format(format!("PPM: {m}"));
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(fmt_err("missing P-format magic"));
    }
    let magic = &bytes[..2];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(fmt_err("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|c| c.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(fmt_err("expected a number in the header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| fmt_err("header number out of range"))?;
    }
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => return Err(fmt_err("missing whitespace after maxval")),
    }
    Ok(Header {
        magic,
        width: fields[0],
        height: fields[1],
        maxval: fields[2],
        body: &bytes[pos..],
    })
}

pub fn decode_ppm(bytes: &[u8]) -> Result<ImageTensor> {
    let h = parse_header(bytes)?;
    match h.magic {
        b"P6" => {}
        b"P5" | b"P2" => {
            return Err(Error::InvalidArgument(
                "grayscale image: TRPCA denoising needs a 3-channel colour image".into(),
            ))
        }
        _ => return Err(Error::Format("unsupported image format, expected binary PPM (P6)".into())),
    }
    if h.width == 0 || h.height == 0 || h.maxval == 0 || h.maxval > 65535 {
        return Err(Error::Format(format!(
            "PPM: invalid size {}x{} or maxval {}",
            h.width, h.height, h.maxval
        )));
    }
    let bps = if h.maxval < 256 { 1 } else { 2 };
    let need = h.width * h.height * 3 * bps;
    if h.body.len() != need {
        return Err(Error::Format(format!(
            "PPM: expected {need} sample bytes, found {}",
            h.body.len()
        )));
    }
    let maxval = h.maxval as f64;
    let sample = |idx: usize| -> f64 {
        let raw = if bps == 1 {
            u16::from(h.body[idx])
        } else {
            u16::from_be_bytes([h.body[2 * idx], h.body[2 * idx + 1]])
        };
        f64::from(raw) / maxval
    };
    let (height, width) = (h.height, h.width);
    // PPM is row-major, pixel-interleaved
    let t = Tensor3::from_fn(height, width, 3, |i, j, c| sample((i * width + j) * 3 + c))?;
    if t.linf() > 1.0 {
        return Err(Error::Format("PPM: sample exceeds maxval".into()));
    }
    ImageTensor::new(t, h.maxval as u16)
}

pub fn encode_ppm(img: &ImageTensor) -> Vec<u8> {
    let (h, w) = (img.height(), img.width());
    let maxval = img.maxval;
    let mut out = format!("P6\n{w} {h}\n{maxval}\n").into_bytes();
    let m = f64::from(maxval);
    for i in 0..h {
        for j in 0..w {
            for c in 0..3 {
                let v = (img.tensor.get(i, j, c).clamp(0.0, 1.0) * m).round() as u16;
                if maxval < 256 {
                    out.push(v as u8);
                } else {
                    out.extend_from_slice(&v.to_be_bytes());
                }
            }
        }
    }
    out
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    decode_ppm(&fs::read(path)?)
}

pub fn save_image(img: &ImageTensor, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_ppm(img))?;
    Ok(())
}

/// Replaces `round(fraction * height * width)` uniformly chosen pixels (all
/// three channels) by independent uniform values over the full range.
/// Returns the corrupted image and a 0/1 mask of the replaced entries.
pub fn corrupt(img: &ImageTensor, fraction: f64, seed: u64) -> Result<(ImageTensor, Tensor3)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "corruption fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let (h, w) = (img.height(), img.width());
    let pixels = h * w;
    let count = ((fraction * pixels as f64).round() as usize).min(pixels);
    let mut rng = seed::rng(seed, "imaging/corrupt", &[]);
    let chosen = index::sample(&mut rng, pixels, count);
    let mut out = img.tensor.clone();
    let mut mask = Tensor3::zeros(h, w, 3);
    for p in chosen.iter() {
        let (i, j) = (p / w, p % w);
        for c in 0..3 {
            out.set(i, j, c, rng.random_range(0.0..=1.0));
            mask.set(i, j, c, 1.0);
        }
    }
    Ok((
        ImageTensor {
            tensor: out,
            maxval: img.maxval,
        },
        mask,
    ))
}

/// `10 log10(||ref||_inf^2 / (||est - ref||_F^2 / (n1 n2 n3)))` in dB.
///
/// Identical inputs give `f64::INFINITY`. The peak comes from `reference`
/// only, so swapping the arguments changes the result through the peak term
/// alone.
pub fn psnr(estimate: &Tensor3, reference: &Tensor3) -> Result<f64> {
    if estimate.dims() != reference.dims() {
        return Err(Error::DimensionMismatch(format!(
            "psnr: {:?} vs {:?}",
            estimate.dims(),
            reference.dims()
        )));
    }
    let peak = reference.linf();
    if peak == 0.0 {
        return Err(Error::InvalidArgument("psnr reference is all zeros".into()));
    }
    let sq: f64 = estimate
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if sq == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sq / reference.len() as f64;
    Ok(10.0 * (peak * peak / mse).log10())
}

pub fn psnr_image(estimate: &ImageTensor, reference: &ImageTensor) -> Result<f64> {
    psnr(&estimate.tensor, &reference.tensor)
}

/// Solves TRPCA on the image tensor (default `lambda` unless `solver_cfg`
/// overrides it) and returns the low-rank part clamped to `[0, 1]`.
pub fn denoise(
    img: &ImageTensor,
    t: &Transform,
    solver_cfg: &SolverConfig,
) -> Result<(ImageTensor, TrpcaSolution)> {
    let sol = solve(&img.tensor, t, solver_cfg)?;
    let recovered = sol.low_rank.map(|v| v.clamp(0.0, 1.0));
    Ok((
        ImageTensor {
            tensor: recovered,
            maxval: img.maxval,
        },
        sol,
    ))
}

/// A smooth, approximately low-rank `height x width` colour image: `rank`
/// dominant separable patterns plus `2 * rank` weak higher-frequency ones,
/// mixed with near-gray colours and quantised to 8 bits.
pub fn synthetic_image(height: usize, width: usize, rank: usize, seed: u64) -> Result<ImageTensor> {
    if height == 0 || width == 0 || rank == 0 {
        return Err(Error::InvalidArgument("synthetic image needs positive sizes".into()));
    }
    let mut rng = seed::rng(seed, "imaging/synthetic", &[]);
    let wave = |len: usize, freq: f64, phase: f64| -> Vec<f64> {
        (0..len)
            .map(|i| 1.0 + (freq * std::f64::consts::TAU * i as f64 / len as f64 + phase).sin())
            .collect()
    };
    let mut parts = Vec::with_capacity(3 * rank);
    for q in 0..3 * rank {
        let gain = if q < rank {
            rng.random_range(0.3..1.0)
        } else {
            0.05 * rng.random_range(0.5..1.0)
        };
        let octave = 1.0 + q as f64;
        let rows = wave(height, octave * rng.random_range(0.5..3.0), rng.random_range(0.0..6.3));
        let cols = wave(width, octave * rng.random_range(0.5..3.0), rng.random_range(0.0..6.3));
        // channels of natural images are strongly correlated
        let mut tint = [0.0; 3];
        for c in tint.iter_mut() {
            *c = gain * rng.random_range(0.85..1.15);
        }
        parts.push((rows, cols, tint));
    }
    let raw = Tensor3::from_fn(height, width, 3, |i, j, c| {
        parts.iter().map(|(a, b, w)| a[i] * b[j] * w[c]).sum()
    })?;
    let peak = raw.linf();
    let t = raw.map(|v| (v / peak * 255.0).round() / 255.0);
    ImageTensor::new(t, 255)
}
