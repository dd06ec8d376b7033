//! Synthetic "morphological continuum": grayscale images of filled ellipses
//! whose size follows a discrete side label `s ∈ {1, …, levels}`, while
//! rotation, eccentricity and a small centre jitter vary independently.
//!
//! Semi-major axis `r(s) = r0 + step·s`, semi-minor `r(s)·ecc`. Pixels are
//! anti-aliased with 4×4 sub-pixel coverage, then Gaussian noise is added
//! and the result is clipped to [0, 1].

use std::f64::consts::PI;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::{seeded_rng, standard_normal};
use crate::table::{self, TableError};

const SUBSAMPLES: usize = 4;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("level {level}: ellipse radius {radius} plus jitter {jitter} exceeds the {side}px frame")]
    ExceedsFrame {
        level: usize,
        radius: f64,
        jitter: f64,
        side: usize,
    },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Table(#[from] TableError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub side: usize,
    pub levels: usize,
    pub per_level: usize,
    pub radius_base: f64,
    pub radius_step: f64,
    pub rotation_range: (f64, f64),
    pub eccentricity_range: (f64, f64),
    /// Maximum centre offset in pixels along each axis.
    pub jitter: f64,
    pub noise_sigma: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            side: 16,
            levels: 5,
            per_level: 1000,
            radius_base: 2.0,
            radius_step: 0.8,
            rotation_range: (0.0, PI),
            eccentricity_range: (0.5, 1.0),
            jitter: 1.0,
            noise_sigma: 0.02,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn radius(&self, level: usize) -> f64 {
        self.radius_base + self.radius_step * level as f64
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.levels < 2 {
            return bad("levels must be at least 2");
        }
        if self.side < 2 {
            return bad("side must be at least 2");
        }
        if self.per_level == 0 {
            return bad("per_level must be positive");
        }
        let (e0, e1) = self.eccentricity_range;
        if !(0.0 < e0 && e0 <= e1 && e1 <= 1.0) {
            return bad("eccentricity range must satisfy 0 < lo <= hi <= 1");
        }
        if self.rotation_range.0 > self.rotation_range.1 {
            return bad("rotation range is reversed");
        }
        if !(self.noise_sigma >= 0.0 && self.jitter >= 0.0) {
            return bad("noise and jitter must be non-negative");
        }
        if !(0.0 < self.test_fraction && self.test_fraction < 1.0) {
            return bad("test_fraction must lie in (0, 1)");
        }
        if self.radius_base + self.radius_step <= 0.0 {
            return bad("radius at level 1 must be positive");
        }
        let half = self.side as f64 / 2.0;
        for level in 1..=self.levels {
            let radius = self.radius(level);
            if radius <= 0.0 || radius + self.jitter > half {
                return Err(SynthError::ExceedsFrame {
                    level,
                    radius,
                    jitter: self.jitter,
                    side: self.side,
                });
            }
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        self.levels * self.per_level
    }
}

/// Generative factors behind one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobFactors {
    pub level: usize,
    pub rotation: f64,
    pub eccentricity: f64,
    pub offset: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub side: usize,
    /// One flattened (row-major) image per row, values in [0, 1].
    pub images: Array2<f64>,
    /// Side information per row (the level as a real number).
    pub levels: Array1<f64>,
    /// Ground-truth factors; empty for imported datasets.
    pub factors: Vec<BlobFactors>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.images.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.images.nrows() == 0
    }

    pub fn subset(&self, rows: &[usize]) -> (Array2<f64>, Array1<f64>) {
        (
            self.images.select(ndarray::Axis(0), rows),
            self.levels.select(ndarray::Axis(0), rows),
        )
    }

    pub fn train_set(&self) -> (Array2<f64>, Array1<f64>) {
        self.subset(&self.train)
    }

    pub fn test_set(&self) -> (Array2<f64>, Array1<f64>) {
        self.subset(&self.test)
    }
}

/// Renders one anti-aliased ellipse into a `side × side` image.
pub fn render_ellipse(side: usize, semi_major: f64, semi_minor: f64, rotation: f64, center: (f64, f64)) -> Vec<f64> {
    let (sin, cos) = rotation.sin_cos();
    let mut img = vec![0.0; side * side];
    let inv = 1.0 / (SUBSAMPLES * SUBSAMPLES) as f64;
    for row in 0..side {
        for col in 0..side {
            let mut hits = 0usize;
            for sy in 0..SUBSAMPLES {
                for sx in 0..SUBSAMPLES {
                    let px = col as f64 + (sx as f64 + 0.5) / SUBSAMPLES as f64 - center.0;
                    let py = row as f64 + (sy as f64 + 0.5) / SUBSAMPLES as f64 - center.1;
                    let u = px * cos + py * sin;
                    let v = -px * sin + py * cos;
                    if (u / semi_major).powi(2) + (v / semi_minor).powi(2) <= 1.0 {
                        hits += 1;
                    }
                }
            }
            img[row * side + col] = hits as f64 * inv;
        }
    }
    img
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws factors for sample `index` and renders it. Each sample has its own
/// generator stream so the result does not depend on generation order.
pub fn render_sample(spec: &SyntheticSpec, index: usize, level: usize) -> (Vec<f64>, BlobFactors) {
    let mut rng = seeded_rng(spec.seed.wrapping_add(index as u64), 1);
    let rotation = uniform_in(&mut rng, spec.rotation_range);
    let eccentricity = uniform_in(&mut rng, spec.eccentricity_range);
    let offset = (
        uniform_in(&mut rng, (-spec.jitter, spec.jitter)),
        uniform_in(&mut rng, (-spec.jitter, spec.jitter)),
    );
    let half = spec.side as f64 / 2.0;
    let r = spec.radius(level);
    let mut img = render_ellipse(spec.side, r, r * eccentricity, rotation, (half + offset.0, half + offset.1));
    if spec.noise_sigma > 0.0 {
        for p in img.iter_mut() {
            *p = (*p + spec.noise_sigma * standard_normal(&mut rng)).clamp(0.0, 1.0);
        }
    }
    (
        img,
        BlobFactors {
            level,
            rotation,
            eccentricity,
            offset,
        },
    )
}

/// Generates `levels × per_level` samples (balanced across levels, order
/// shuffled) and an 80/20-style train/test split.
pub fn generate(spec: &SyntheticSpec) -> Result<LabeledDataset, SynthError> {
    spec.validate()?;
    let n = spec.num_samples();
    let mut rng = seeded_rng(spec.seed, 0);
    let mut level_of: Vec<usize> = (0..n).map(|i| 1 + i / spec.per_level).collect();
    level_of.shuffle(&mut rng);

    let d = spec.side * spec.side;
    let mut images = Array2::zeros((n, d));
    let mut factors = Vec::with_capacity(n);
    for (i, &level) in level_of.iter().enumerate() {
        let (img, f) = render_sample(spec, i, level);
        images.row_mut(i).assign(&Array1::from(img));
        factors.push(f);
    }
    let levels = level_of.iter().map(|&l| l as f64).collect();
    let (train, test) = split_indices(n, spec.test_fraction, &mut rng);
    Ok(LabeledDataset {
        side: spec.side,
        images,
        levels,
        factors,
        train,
        test,
    })
}

fn split_indices<R: Rng + ?Sized>(n: usize, test_fraction: f64, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

/// Number of pixels brighter than `threshold`.
pub fn bright_pixel_count(image: ndarray::ArrayView1<f64>, threshold: f64) -> usize {
    image.iter().filter(|&&v| v > threshold).count()
}

// ---------------------------------------------------------------------------
// Export / import: manifest.csv + one binary PGM (P5, maxval 255) per image
// ---------------------------------------------------------------------------

pub const MANIFEST: &str = "manifest.csv";
const IMAGE_DIR: &str = "images";

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_pgm(path: &Path, side: usize, pixels: &[u8]) -> Result<(), SynthError> {
    let mut buf = format!("P5\n{side} {side}\n255\n").into_bytes();
    buf.extend_from_slice(pixels);
    fs::write(path, buf).map_err(io_err(path))
}

pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>), SynthError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let bad = |msg: &str| SynthError::Format {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    // header: magic, width, height, maxval separated by single whitespace runs
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    let data = bytes.get(pos..).unwrap_or_default();
    if data.len() != w * h {
        return Err(bad("pixel data length does not match header"));
    }
    Ok((w, h, data.to_vec()))
}

fn image_name(i: usize) -> String {
    format!("{IMAGE_DIR}/img_{i:05}.pgm")
}

/// Writes `dir/manifest.csv` and `dir/images/*.pgm`. Pixel values are
/// quantized to 8 bits; that is the only lossy step of the round trip.
pub fn export_dataset(ds: &LabeledDataset, dir: &Path) -> Result<(), SynthError> {
    let img_dir = dir.join(IMAGE_DIR);
    fs::create_dir_all(&img_dir).map_err(io_err(&img_dir))?;
    let mut split = vec!["train"; ds.len()];
    for &i in &ds.test {
        split[i] = "test";
    }
    let mut manifest = String::from("filename,level,split\n");
    for (i, row) in ds.images.rows().into_iter().enumerate() {
        let name = image_name(i);
        let pixels: Vec<u8> = row.iter().map(|&v| quantize(v)).collect();
        write_pgm(&dir.join(&name), ds.side, &pixels)?;
        manifest.push_str(&format!("{name},{},{}\n", ds.levels[i], split[i]));
    }
    let path = dir.join(MANIFEST);
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    f.write_all(manifest.as_bytes()).map_err(io_err(&path))
}

/// Reads a dataset written by [`export_dataset`]. Pixel values come back as
/// `q / 255`.
pub fn import_dataset(dir: &Path) -> Result<LabeledDataset, SynthError> {
    let path = dir.join(MANIFEST);
    let rows = table::read_records(&path)?;
    if rows.header != ["filename", "level", "split"] {
        return Err(SynthError::Format {
            path,
            msg: format!("unexpected manifest header {:?}", rows.header),
        });
    }
    let mut side = None;
    let mut pixels = Vec::new();
    let mut levels = Vec::new();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, rec) in rows.records.iter().enumerate() {
        let line = i + 2;
        let bad = |msg: String| SynthError::Format {
            path: path.clone(),
            msg: format!("line {line}: {msg}"),
        };
        let level: f64 = rec[1].parse().map_err(|_| bad(format!("bad level {:?}", rec[1])))?;
        match rec[2].as_str() {
            "train" => train.push(i),
            "test" => test.push(i),
            other => return Err(bad(format!("bad split {other:?}"))),
        }
        let (w, h, data) = read_pgm(&dir.join(&rec[0]))?;
        if w != h || side.is_some_and(|s| s != w) {
            return Err(bad(format!("image {} is {w}x{h}, expected a consistent square size", rec[0])));
        }
        side = Some(w);
        pixels.extend(data.iter().map(|&q| q as f64 / 255.0));
        levels.push(level);
    }
    let side = side.unwrap_or(0);
    let images = Array2::from_shape_vec((levels.len(), side * side), pixels).map_err(|e| SynthError::Format {
        path: path.clone(),
        msg: e.to_string(),
    })?;
    Ok(LabeledDataset {
        side,
        images,
        levels: Array1::from(levels),
        factors: Vec::new(),
        train,
        test,
    })
}
