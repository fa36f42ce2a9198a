//! Datasets: synthetic class-conditional images and IDX file ingestion.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::tensor::Tensor;

/// Images (`[n, c, h, w]`) with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub images: Tensor,
    pub labels: Vec<usize>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The first `n` samples.
    pub fn head(&self, n: usize) -> Split {
        let n = n.min(self.len());
        Split { images: self.images.slice_batch(0..n), labels: self.labels[..n].to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Split,
    pub test: Split,
    pub classes: usize,
    /// Per-sample image shape `[c, h, w]`.
    pub image_shape: Vec<usize>,
    /// Valid pixel range; attacks and corruptions clamp to it.
    pub range: (f64, f64),
    pub provenance: String,
}

impl Dataset {
    pub fn input_len(&self) -> usize {
        self.image_shape.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, split) in [("train", &self.train), ("test", &self.test)] {
            if let Some(&bad) = split.labels.iter().find(|&&y| y >= self.classes) {
                return Err(Error::Consistency(format!(
                    "{name} label {bad} outside [0, {})",
                    self.classes
                )));
            }
            ensure!(
                split.images.batch() == split.labels.len(),
                Consistency,
                "{name} split has {} images and {} labels",
                split.images.batch(),
                split.labels.len()
            );
        }
        Ok(())
    }
}

/// Class-conditional image families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Geometry {
    /// A Gaussian bump whose centre depends on the class. Centres sit on a
    /// circle of radius `radius · min(h, w) / 2` around the image centre.
    Blobs {
        sigma: f64,
        radius: f64,
        jitter: f64,
        amplitude: f64,
        noise: f64,
        /// Uniform pixel level the bump sits on.
        #[serde(default)]
        background: f64,
    },
    /// Sinusoidal stripes whose orientation depends on the class.
    Stripes { period: f64, noise: f64 },
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry::Blobs { sigma: 2.5, radius: 0.5, jitter: 1.0, amplitude: 1.0, noise: 0.1, background: 0.0 }
    }
}

/// Parameters of [`synth_blobs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub classes: usize,
    pub train: usize,
    pub test: usize,
    #[serde(default = "default_shape")]
    pub shape: Vec<usize>,
    #[serde(default)]
    pub geometry: Geometry,
}

fn default_shape() -> Vec<usize> {
    vec![1, 16, 16]
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { classes: 2, train: 512, test: 256, shape: default_shape(), geometry: Geometry::default() }
    }
}

/// Render a synthetic dataset, deterministic in `seed`. Pixels lie in
/// `[0, 1]`.
pub fn synth_blobs(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    ensure!(spec.classes >= 2, Domain, "need at least 2 classes, got {}", spec.classes);
    ensure!(spec.train >= 1 && spec.test >= 1, Domain, "requested 0 samples");
    ensure!(
        spec.shape.len() == 3 && spec.shape.iter().all(|&d| d > 0),
        Domain,
        "image shape must be [c, h, w] with positive extents, got {:?}",
        spec.shape
    );
    match spec.geometry {
        Geometry::Blobs { sigma, radius, jitter, amplitude, noise, background } => {
            ensure!((0.0..1.0).contains(&background), Domain, "blob background must lie in [0, 1)");
            ensure!(sigma > 0.0 && sigma.is_finite(), Domain, "blob sigma must be positive");
            ensure!(radius > 0.0, Domain, "blob radius must be positive so classes differ");
            ensure!(jitter >= 0.0 && noise >= 0.0, Domain, "jitter and noise must be non-negative");
            ensure!(amplitude > 0.0, Domain, "blob amplitude must be positive");
        }
        Geometry::Stripes { period, noise } => {
            ensure!(period > 0.0 && period.is_finite(), Domain, "stripe period must be positive");
            ensure!(noise >= 0.0, Domain, "noise must be non-negative");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = render_split(spec, spec.train, &mut rng);
    let test = render_split(spec, spec.test, &mut rng);
    Ok(Dataset {
        train,
        test,
        classes: spec.classes,
        image_shape: spec.shape.clone(),
        range: (0.0, 1.0),
        provenance: format!("synthetic:{}:seed={seed}", geometry_name(&spec.geometry)),
    })
}

fn geometry_name(g: &Geometry) -> &'static str {
    match g {
        Geometry::Blobs { .. } => "blobs",
        Geometry::Stripes { .. } => "stripes",
    }
}

fn render_split(spec: &SynthSpec, n: usize, rng: &mut ChaCha8Rng) -> Split {
    let (c, h, w) = (spec.shape[0], spec.shape[1], spec.shape[2]);
    let mut labels: Vec<usize> = (0..n).map(|i| i % spec.classes).collect();
    labels.shuffle(rng);
    let mut data = Vec::with_capacity(n * c * h * w);
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    for &y in &labels {
        let angle = 2.0 * std::f64::consts::PI * y as f64 / spec.classes as f64;
        match spec.geometry {
            Geometry::Blobs { sigma, radius, jitter, amplitude, noise, background } => {
                let r = radius * (h.min(w) as f64) / 2.0;
                let jy: f64 = StandardNormal.sample(rng);
                let jx: f64 = StandardNormal.sample(rng);
                let (by, bx) = (cy + r * angle.sin() + jitter * jy, cx + r * angle.cos() + jitter * jx);
                for _ in 0..c {
                    for py in 0..h {
                        for px in 0..w {
                            let d2 = (py as f64 - by).powi(2) + (px as f64 - bx).powi(2);
                            let z: f64 = StandardNormal.sample(rng);
                            let v = background + amplitude * (-d2 / (2.0 * sigma * sigma)).exp() + noise * z;
                            data.push(v.clamp(0.0, 1.0));
                        }
                    }
                }
            }
            Geometry::Stripes { period, noise } => {
                let theta = angle / 2.0;
                let phase: f64 = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
                for _ in 0..c {
                    for py in 0..h {
                        for px in 0..w {
                            let s = (px as f64 * theta.cos() + py as f64 * theta.sin()) / period;
                            let z: f64 = StandardNormal.sample(rng);
                            let v = 0.5 + 0.5 * (2.0 * std::f64::consts::PI * s + phase).sin() + noise * z;
                            data.push(v.clamp(0.0, 1.0));
                        }
                    }
                }
            }
        }
    }
    Split { images: Tensor::from_parts(vec![n, c, h, w], data), labels }
}

// ---------------------------------------------------------------------------
// IDX
// ---------------------------------------------------------------------------

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u32(&mut self) -> Result<u32> {
        let end = self.pos + 4;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| Error::Format {
            offset: self.bytes.len(),
            message: format!("truncated header: needed 4 bytes at offset {}", self.pos),
        })?;
        self.pos = end;
        Ok(u32::from_be_bytes(chunk.try_into().expect("4 bytes")))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let chunk = self.bytes.get(self.pos..self.pos + n).ok_or_else(|| Error::Format {
            offset: self.bytes.len(),
            message: format!("truncated payload: needed {n} bytes from offset {}", self.pos),
        })?;
        self.pos += n;
        Ok(chunk)
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let at = self.pos;
        let magic = self.u32()?;
        if magic != expected {
            return Err(Error::Format {
                offset: at,
                message: format!("magic {magic:#010x}, expected {expected:#010x}"),
            });
        }
        Ok(())
    }
}

/// Decode an IDX image file (`[n, rows, cols]` unsigned bytes) into
/// `[n, 1, rows, cols]` pixels rescaled linearly from `0..=255` to `range`.
pub fn decode_idx_images(bytes: &[u8], range: (f64, f64)) -> Result<Tensor> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(IDX_IMAGES_MAGIC)?;
    let n = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    ensure!(n > 0 && rows > 0 && cols > 0, Consistency, "IDX image file has a zero dimension");
    let pixels = r.take(n * rows * cols)?;
    let (lo, hi) = range;
    let data = pixels.iter().map(|&p| lo + (hi - lo) * p as f64 / 255.0).collect();
    Ok(Tensor::from_parts(vec![n, 1, rows, cols], data))
}

pub fn decode_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(IDX_LABELS_MAGIC)?;
    let n = r.u32()? as usize;
    Ok(r.take(n)?.iter().map(|&b| b as usize).collect())
}

/// Read an IDX image/label file pair.
pub fn load_idx(images: &Path, labels: &Path, range: (f64, f64)) -> Result<Split> {
    let read = |p: &Path| std::fs::read(p).map_err(|source| Error::Read { path: p.into(), source });
    let images = decode_idx_images(&read(images)?, range)?;
    let labels = decode_idx_labels(&read(labels)?)?;
    ensure!(
        images.batch() == labels.len(),
        Consistency,
        "{} images but {} labels",
        images.batch(),
        labels.len()
    );
    Ok(Split { images, labels })
}

/// Encode single-channel images in `range` as an IDX image file.
pub fn encode_idx_images(images: &Tensor, range: (f64, f64)) -> Result<Vec<u8>> {
    let s = images.shape();
    ensure!(
        s.len() == 4 && s[1] == 1,
        Dimension,
        "IDX images must be [n, 1, h, w], got {s:?}"
    );
    let mut out = Vec::with_capacity(16 + images.len());
    for v in [IDX_IMAGES_MAGIC, s[0] as u32, s[2] as u32, s[3] as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    let (lo, hi) = range;
    out.extend(images.data().iter().map(|&v| (((v - lo) / (hi - lo)) * 255.0).round().clamp(0.0, 255.0) as u8));
    Ok(out)
}

pub fn encode_idx_labels(labels: &[usize]) -> Result<Vec<u8>> {
    ensure!(labels.iter().all(|&y| y < 256), Domain, "IDX labels must fit in a byte");
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend(labels.iter().map(|&y| y as u8));
    Ok(out)
}
