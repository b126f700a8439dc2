//! Generators for the unrecognisable-image datasets (phase-randomised,
//! pixel-scrambled, blobs, uniform noise) and the ingest-time image
//! operations (bilinear resize, channel conversion).
//!
//! Images are `f64` tensors in `[0, 1]`, stored row-major with interleaved
//! channels: the value at row `y`, column `x`, channel `c` lives at
//! `(y * width + x) * channels + c`.
//!
//! Each output image is a pure function of `(seed, ordinal, input)`; see
//! [`crate::rng`] for how streams are derived.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::datamodel::{DataType, ManifestEntry};
use crate::error::{Error, Result};
use crate::rng::{domain, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidArgument(format!(
                "{height}x{width}x{channels} image needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data)
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

    pub fn shape(&self) -> Shape {
        Shape {
            height: self.height,
            width: self.width,
            channels: self.channels,
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// One channel as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    /// Builds an image from per-channel planes, clipping to `[0, 1]`.
    fn from_planes_clipped(height: usize, width: usize, planes: &[Vec<f64>]) -> Self {
        let channels = planes.len();
        let mut data = vec![0.0; height * width * channels];
        for (c, plane) in planes.iter().enumerate() {
            for (i, v) in plane.iter().enumerate() {
                data[i * channels + c] = v.clamp(0.0, 1.0);
            }
        }
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    /// 8-bit quantisation: `round(v * 255)` clamped to `[0, 255]`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|v| quantize(*v)).collect()
    }

    pub fn from_bytes(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            bytes.iter().map(|b| *b as f64 / 255.0).collect(),
        )
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let (w, h) = (self.width as u32, self.height as u32);
        let bytes = self.to_bytes();
        let result = if self.channels == 1 {
            image::GrayImage::from_raw(w, h, bytes)
                .expect("buffer matches dimensions")
                .save_with_format(path, image::ImageFormat::Png)
        } else {
            image::RgbImage::from_raw(w, h, bytes)
                .expect("buffer matches dimensions")
                .save_with_format(path, image::ImageFormat::Png)
        };
        result.map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Loads a PNG as grayscale or RGB (alpha is dropped).
    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        if img.color().has_color() {
            Self::from_bytes(h, w, 3, img.to_rgb8().as_raw())
        } else {
            Self::from_bytes(h, w, 1, img.to_luma8().as_raw())
        }
    }
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl FromStr for Shape {
    type Err = Error;

    /// Parses `HxWxC`, e.g. `32x32x3`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(['x', 'X']).collect();
        let bad = || Error::InvalidArgument(format!("shape `{s}` is not HxWxC"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let n = |p: &str| p.trim().parse::<usize>().map_err(|_| bad());
        let shape = Shape {
            height: n(parts[0])?,
            width: n(parts[1])?,
            channels: n(parts[2])?,
        };
        if shape.height == 0 || shape.width == 0 || !matches!(shape.channels, 1 | 3) {
            return Err(Error::InvalidArgument(format!(
                "shape `{s}`: dimensions must be positive and channels 1 or 3"
            )));
        }
        Ok(shape)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// In-place 2-D DFT of a row-major `height x width` plane.
fn fft2(planner: &mut FftPlanner<f64>, buf: &mut [Complex64], height: usize, width: usize, inverse: bool) {
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    row.process(buf);
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = buf[y * width + x];
        }
        col.process(&mut column);
        for y in 0..height {
            buf[y * width + x] = column[y];
        }
    }
    if inverse {
        let scale = 1.0 / (height * width) as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

/// Forward 2-D DFT magnitudes of one channel plane.
pub fn magnitude_spectrum(plane: &[f64], height: usize, width: usize) -> Vec<f64> {
    let mut buf: Vec<Complex64> = plane.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fft2(&mut FftPlanner::new(), &mut buf, height, width, false);
    buf.iter().map(|c| c.norm()).collect()
}

/// A random phase field with `phi(-u, -v) = -phi(u, v)`.
///
/// Bins that are their own conjugate partner (DC, and the Nyquist row/column
/// for even sizes) get `None`: those coefficients are real and keep their
/// original value. The remaining phases are uniform on `[-pi, pi)`, drawn in
/// row-major order for the lower-indexed bin of each conjugate pair.
fn hermitian_phase_field(height: usize, width: usize, stream: &mut Stream) -> Vec<Option<f64>> {
    let mut field = vec![None; height * width];
    for u in 0..height {
        for v in 0..width {
            let idx = u * width + v;
            let partner = ((height - u) % height) * width + (width - v) % width;
            if partner > idx {
                let phi = std::f64::consts::TAU * stream.next_f64() - std::f64::consts::PI;
                field[idx] = Some(phi);
                field[partner] = Some(-phi);
            }
        }
    }
    field
}

/// Phase randomisation before clipping.
#[derive(Debug, Clone)]
pub struct PhaseResult {
    /// Real part of the inverse transform, one plane per channel.
    pub planes: Vec<Vec<f64>>,
    /// Largest absolute imaginary part left by the inverse transform.
    pub max_imag_residue: f64,
}

/// Randomises the Fourier phase of every channel while keeping magnitudes,
/// returning the unclipped result. One phase field is shared by all channels
/// unless `per_channel` is set.
pub fn phase_randomize_unclipped(image: &ImageTensor, stream: &mut Stream, per_channel: bool) -> PhaseResult {
    let (h, w) = (image.height, image.width);
    let mut planner = FftPlanner::new();
    let shared = (!per_channel).then(|| hermitian_phase_field(h, w, stream));
    let mut planes = Vec::with_capacity(image.channels);
    let mut max_imag_residue: f64 = 0.0;
    for c in 0..image.channels {
        let own;
        let field = match &shared {
            Some(f) => f,
            None => {
                own = hermitian_phase_field(h, w, stream);
                &own
            }
        };
        let mut buf: Vec<Complex64> = image.channel(c).iter().map(|v| Complex64::new(*v, 0.0)).collect();
        fft2(&mut planner, &mut buf, h, w, false);
        for (z, phi) in buf.iter_mut().zip(field) {
            if let Some(phi) = phi {
                *z = Complex64::from_polar(z.norm(), *phi);
            }
        }
        fft2(&mut planner, &mut buf, h, w, true);
        max_imag_residue = buf.iter().map(|z| z.im.abs()).fold(max_imag_residue, f64::max);
        planes.push(buf.iter().map(|z| z.re).collect());
    }
    PhaseResult {
        planes,
        max_imag_residue,
    }
}

/// Phase-randomised copy of `image`, clipped to `[0, 1]`.
pub fn phase_randomize(image: &ImageTensor, stream: &mut Stream, per_channel: bool) -> ImageTensor {
    let out = phase_randomize_unclipped(image, stream, per_channel);
    ImageTensor::from_planes_clipped(image.height, image.width, &out.planes)
}

/// One uniform permutation of pixel positions; whole colour pixels move together.
pub fn pixel_scramble(image: &ImageTensor, stream: &mut Stream) -> ImageTensor {
    let n = image.height * image.width;
    let mut order: Vec<usize> = (0..n).collect();
    stream.shuffle(&mut order);
    let c = image.channels;
    let mut data = Vec::with_capacity(image.data.len());
    for src in order {
        data.extend_from_slice(&image.data[src * c..(src + 1) * c]);
    }
    ImageTensor { data, ..*image }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobParams {
    /// Probability that a pixel is set before blurring.
    pub fill_probability: f64,
    pub sigma: f64,
    /// Blurred values below this become 0.
    pub zero_below: f64,
}

impl Default for BlobParams {
    fn default() -> Self {
        Self {
            fill_probability: 0.7,
            sigma: 1.5,
            zero_below: 0.75,
        }
    }
}

/// Reflect ("d c b a | a b c d | d c b a") index into `[0, n)`.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur of one plane with reflect padding.
pub fn gaussian_blur(plane: &[f64], height: usize, width: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return plane.to_vec();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            tmp[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, wgt)| wgt * plane[y * width + reflect(x as isize + k as isize - radius, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, wgt)| wgt * tmp[reflect(y as isize + k as isize - radius, height) * width + x])
                .sum();
        }
    }
    out
}

/// Random blobs: Bernoulli field, Gaussian blur per channel, small values
/// zeroed, clipped to `[0, 1]`.
pub fn blobs(shape: Shape, stream: &mut Stream, params: &BlobParams) -> ImageTensor {
    let Shape {
        height,
        width,
        channels,
    } = shape;
    let mut planes = vec![vec![0.0; height * width]; channels];
    // draws in interleaved (y, x, c) order
    for i in 0..height * width {
        for plane in planes.iter_mut() {
            plane[i] = if stream.next_f64() < params.fill_probability {
                1.0
            } else {
                0.0
            };
        }
    }
    let planes: Vec<Vec<f64>> = planes
        .iter()
        .map(|p| {
            gaussian_blur(p, height, width, params.sigma)
                .into_iter()
                .map(|v| if v < params.zero_below { 0.0 } else { v })
                .collect()
        })
        .collect();
    ImageTensor::from_planes_clipped(height, width, &planes)
}

/// I.i.d. uniform `[0, 1)` pixels.
pub fn uniform_noise(shape: Shape, stream: &mut Stream) -> ImageTensor {
    let n = shape.height * shape.width * shape.channels;
    let data = (0..n).map(|_| stream.next_f64()).collect();
    ImageTensor {
        height: shape.height,
        width: shape.width,
        channels: shape.channels,
        data,
    }
}

/// Bilinear resize with half-pixel centres and edge clamping.
pub fn resize_bilinear(image: &ImageTensor, new_height: usize, new_width: usize) -> Result<ImageTensor> {
    if new_height == 0 || new_width == 0 {
        return Err(Error::InvalidArgument(format!(
            "resize target must be positive, got {new_height}x{new_width}"
        )));
    }
    if new_height == image.height && new_width == image.width {
        return Ok(image.clone());
    }
    let axis = |out: usize, src_len: usize| -> Vec<(usize, usize, f64)> {
        let scale = src_len as f64 / out as f64;
        (0..out)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
                let lo = s.floor() as usize;
                let hi = (lo + 1).min(src_len - 1);
                (lo, hi, s - lo as f64)
            })
            .collect()
    };
    let rows = axis(new_height, image.height);
    let cols = axis(new_width, image.width);
    let c = image.channels;
    let mut data = Vec::with_capacity(new_height * new_width * c);
    for &(y0, y1, wy) in &rows {
        for &(x0, x1, wx) in &cols {
            for ch in 0..c {
                let top = image.get(y0, x0, ch) * (1.0 - wx) + image.get(y0, x1, ch) * wx;
                let bottom = image.get(y1, x0, ch) * (1.0 - wx) + image.get(y1, x1, ch) * wx;
                data.push((top * (1.0 - wy) + bottom * wy).clamp(0.0, 1.0));
            }
        }
    }
    Ok(ImageTensor {
        height: new_height,
        width: new_width,
        channels: c,
        data,
    })
}

/// Replicates a single channel into three.
pub fn gray_to_color(image: &ImageTensor) -> Result<ImageTensor> {
    if image.channels != 1 {
        return Err(Error::InvalidArgument(format!(
            "gray_to_color needs 1 channel, got {}",
            image.channels
        )));
    }
    let data = image.data.iter().flat_map(|v| [*v; 3]).collect();
    Ok(ImageTensor {
        channels: 3,
        data,
        ..*image
    })
}

pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// ITU-R BT.601 luma.
pub fn color_to_gray(image: &ImageTensor) -> Result<ImageTensor> {
    if image.channels != 3 {
        return Err(Error::InvalidArgument(format!(
            "color_to_gray needs 3 channels, got {}",
            image.channels
        )));
    }
    let data = image
        .data
        .chunks_exact(3)
        .map(|p| {
            // equal channels map back to the same value exactly
            if p[0] == p[1] && p[1] == p[2] {
                p[0]
            } else {
                (LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2]).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(ImageTensor {
        channels: 1,
        data,
        ..*image
    })
}

/// Resizes and converts channels to match a training-data shape.
pub fn conform(image: &ImageTensor, target: Shape) -> Result<ImageTensor> {
    let resized = resize_bilinear(image, target.height, target.width)?;
    match (resized.channels, target.channels) {
        (1, 3) => gray_to_color(&resized),
        (3, 1) => color_to_gray(&resized),
        _ => Ok(resized),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Phase,
    Scramble,
    Blobs,
    Uniform,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorKind::Phase => "phase",
            GeneratorKind::Scramble => "scramble",
            GeneratorKind::Blobs => "blobs",
            GeneratorKind::Uniform => "uniform",
        }
    }

    fn domain(self) -> u64 {
        match self {
            GeneratorKind::Phase => domain::PHASE,
            GeneratorKind::Scramble => domain::SCRAMBLE,
            GeneratorKind::Blobs => domain::BLOBS,
            GeneratorKind::Uniform => domain::UNIFORM,
        }
    }

    pub fn needs_source(self) -> bool {
        matches!(self, GeneratorKind::Phase | GeneratorKind::Scramble)
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phase" => Ok(GeneratorKind::Phase),
            "scramble" => Ok(GeneratorKind::Scramble),
            "blobs" => Ok(GeneratorKind::Blobs),
            "uniform" => Ok(GeneratorKind::Uniform),
            other => Err(Error::InvalidArgument(format!("unknown generator `{other}`"))),
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Generates image `ordinal` of a dataset. `source` is required for phase
/// and scramble; `shape` for blobs and uniform.
pub fn generate_image(
    kind: GeneratorKind,
    seed: u64,
    ordinal: u64,
    source: Option<&ImageTensor>,
    shape: Shape,
    options: &GenerateOptions,
) -> ImageTensor {
    let mut stream = Stream::new(seed, kind.domain(), ordinal);
    match kind {
        GeneratorKind::Phase => phase_randomize(
            source.expect("phase needs a source image"),
            &mut stream,
            options.per_channel_phase,
        ),
        GeneratorKind::Scramble => pixel_scramble(source.expect("scramble needs a source image"), &mut stream),
        GeneratorKind::Blobs => blobs(shape, &mut stream, &options.blobs),
        GeneratorKind::Uniform => uniform_noise(shape, &mut stream),
    }
}

#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    pub per_channel_phase: bool,
    pub blobs: BlobParams,
}

#[derive(Debug, Clone)]
pub enum Source {
    /// A directory of PNG images, processed in file-name order. With a
    /// target shape, each image is resized and channel-converted first.
    Directory {
        path: PathBuf,
        target: Option<Shape>,
    },
    Synthetic {
        shape: Shape,
        count: usize,
    },
}

/// Description written next to the generated images as `dataset.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFragment {
    /// Manifest entry; its path names the logit file an exporter should write.
    pub dataset: ManifestEntry,
    pub generator: GeneratorInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub kind: GeneratorKind,
    pub seed: u64,
    pub count: usize,
    pub image_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
}

fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Image {
            path: dir.to_path_buf(),
            message: "no PNG images in source directory".into(),
        });
    }
    Ok(files)
}

/// Writes `<ordinal:06d>.png` for every output image plus `dataset.json`.
pub fn generate_dataset(
    kind: GeneratorKind,
    source: &Source,
    seed: u64,
    out_dir: &Path,
    options: &GenerateOptions,
) -> Result<DatasetFragment> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let out_name = |i: usize| out_dir.join(format!("{i:06}.png"));

    let (count, source_path, shape) = match source {
        Source::Directory { path, target } => {
            if !kind.needs_source() {
                return Err(Error::InvalidArgument(format!(
                    "{kind} images are synthesised from a shape and count, not a source directory"
                )));
            }
            let files = list_pngs(path)?;
            files.par_iter().enumerate().try_for_each(|(i, f)| -> Result<()> {
                let mut img = ImageTensor::load_png(f)?;
                if let Some(t) = target {
                    img = conform(&img, *t)?;
                }
                let shape = img.shape();
                generate_image(kind, seed, i as u64, Some(&img), shape, options).save_png(&out_name(i))
            })?;
            (files.len(), Some(path.clone()), target.map(|t| t.to_string()))
        }
        Source::Synthetic { shape, count } => {
            if kind.needs_source() {
                return Err(Error::InvalidArgument(format!(
                    "{kind} images are derived from a source image directory"
                )));
            }
            if *count == 0 {
                return Err(Error::InvalidArgument("count must be positive".into()));
            }
            (0..*count)
                .into_par_iter()
                .try_for_each(|i| generate_image(kind, seed, i as u64, None, *shape, options).save_png(&out_name(i)))?;
            (*count, None, Some(shape.to_string()))
        }
    };

    let fragment = DatasetFragment {
        dataset: ManifestEntry {
            name: kind.as_str().to_string(),
            data_type: DataType::Unrecognisable,
            path: PathBuf::from(format!("{kind}.csv")),
            attack_budget: None,
        },
        generator: GeneratorInfo {
            kind,
            seed,
            count,
            image_dir: out_dir.to_path_buf(),
            source: source_path,
            shape,
        },
    };
    let json_path = out_dir.join("dataset.json");
    let mut text = serde_json::to_string_pretty(&fragment).expect("fragment serialises");
    text.push('\n');
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    Ok(fragment)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, c: usize) -> ImageTensor {
        ImageTensor::from_fn(h, w, c, |y, x, ch| ((y * w + x) * c + ch) as f64 / (h * w * c) as f64).unwrap()
    }

    #[test]
    fn tensor_validation() {
        assert!(ImageTensor::new(0, 1, 1, vec![]).is_err());
        assert!(ImageTensor::new(1, 1, 2, vec![0.0, 0.0]).is_err());
        assert!(ImageTensor::new(1, 1, 1, vec![1.5]).is_err());
        assert!(ImageTensor::new(1, 2, 1, vec![0.5]).is_err());
        assert!(ImageTensor::new(1, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn shape_parse() {
        let s: Shape = "32x16x3".parse().unwrap();
        assert_eq!((s.height, s.width, s.channels), (32, 16, 3));
        assert_eq!(s.to_string(), "32x16x3");
        assert!("32x32".parse::<Shape>().is_err());
        assert!("32x32x2".parse::<Shape>().is_err());
        assert!("0x32x1".parse::<Shape>().is_err());
    }

    #[test]
    fn constant_image_survives_phase_randomisation() {
        let img = ImageTensor::filled(6, 5, 3, 0.4).unwrap();
        let out = phase_randomize(&img, &mut Stream::new(1, 0, 0), false);
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_keeps_magnitudes_and_is_real() {
        for (h, w) in [(8, 8), (7, 5), (1, 6), (4, 1)] {
            let img = ramp(h, w, 3);
            let out = phase_randomize_unclipped(&img, &mut Stream::new(9, 0, 0), false);
            assert!(out.max_imag_residue <= 1e-9, "{h}x{w}: {}", out.max_imag_residue);
            for c in 0..3 {
                let before = magnitude_spectrum(&img.channel(c), h, w);
                let after = magnitude_spectrum(&out.planes[c], h, w);
                for (a, b) in before.iter().zip(&after) {
                    assert!((a - b).abs() <= 1e-6 * a.abs() + 1e-9, "{h}x{w}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn shared_phase_differs_from_per_channel() {
        let img = ramp(8, 8, 3);
        let shared = phase_randomize(&img, &mut Stream::new(2, 0, 0), false);
        let own = phase_randomize(&img, &mut Stream::new(2, 0, 0), true);
        assert_ne!(shared, own);
    }

    #[test]
    fn scramble_preserves_values() {
        let img = ramp(5, 7, 3);
        let out = pixel_scramble(&img, &mut Stream::new(4, 0, 0));
        for c in 0..3 {
            let mut a = img.channel(c);
            let mut b = out.channel(c);
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
        }
        // colour pixels move as a unit
        let pixels: Vec<&[f64]> = img.data().chunks(3).collect();
        assert!(out.data().chunks(3).all(|p| pixels.contains(&p)));
        assert_ne!(out, img);

        let one = ImageTensor::filled(1, 1, 3, 0.2).unwrap();
        assert_eq!(pixel_scramble(&one, &mut Stream::new(4, 0, 0)), one);
    }

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-4..8).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
        assert_eq!(reflect(-7, 1), 0);
        assert_eq!(reflect(17, 2), 1);
    }

    #[test]
    fn blur_preserves_constants() {
        let plane = vec![0.6; 9 * 4];
        for v in gaussian_blur(&plane, 9, 4, 1.5) {
            assert!((v - 0.6).abs() < 1e-12);
        }
        let k = gaussian_kernel(1.5);
        assert_eq!(k.len(), 11);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn blobs_range_and_zeros() {
        let shape = Shape {
            height: 32,
            width: 32,
            channels: 3,
        };
        let img = blobs(shape, &mut Stream::new(5, 0, 0), &BlobParams::default());
        assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(img.data().contains(&0.0));
        assert!(img.data().iter().any(|v| *v > 0.0));
    }

    #[test]
    fn uniform_mean() {
        let shape = Shape {
            height: 64,
            width: 64,
            channels: 3,
        };
        let img = uniform_noise(shape, &mut Stream::new(6, 0, 0));
        assert!(img.data().iter().all(|v| (0.0..1.0).contains(v)));
        let mean = img.data().iter().sum::<f64>() / img.data().len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn resize_hand_computed() {
        let img = ImageTensor::new(2, 2, 1, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let out = resize_bilinear(&img, 4, 4).unwrap();
        // sample coordinates 0, 0.25, 0.75, 1 on both axes; f = x + y - 2xy
        #[rustfmt::skip]
        let want = [
            0.0,  0.25,  0.75,  1.0,
            0.25, 0.375, 0.625, 0.75,
            0.75, 0.625, 0.375, 0.25,
            1.0,  0.75,  0.25,  0.0,
        ];
        for (a, b) in out.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{:?}", out.data());
        }
        assert_eq!(resize_bilinear(&img, 2, 2).unwrap(), img);
        let flat = ImageTensor::filled(3, 5, 3, 0.25).unwrap();
        let big = resize_bilinear(&flat, 7, 2).unwrap();
        assert!(big.data().iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert!(resize_bilinear(&flat, 0, 2).is_err());
    }

    #[test]
    fn channel_conversion() {
        let g = ImageTensor::filled(2, 3, 1, 0.3).unwrap();
        let c = gray_to_color(&g).unwrap();
        assert_eq!(c.channels(), 3);
        assert!(c.data().iter().all(|v| *v == 0.3));
        assert_eq!(color_to_gray(&c).unwrap(), g);
        assert!(gray_to_color(&c).is_err());
        assert!(color_to_gray(&g).is_err());

        let red = ImageTensor::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let gray = color_to_gray(&red).unwrap();
        assert_eq!(gray.channels(), 1);
        assert!((gray.data()[0] - 0.299).abs() < 1e-15);
    }

    #[test]
    fn byte_round_trip() {
        let img = ramp(4, 4, 3);
        let back = ImageTensor::from_bytes(4, 4, 3, &img.to_bytes()).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }
}
