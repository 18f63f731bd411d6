//! Dataset sources: MNIST IDX files and seeded synthetic class blobs.

use std::fs;
use std::path::Path;

use crate::dpsgd::Dataset;
use crate::error::{Error, Result};
use crate::nn::io::Reader;
use crate::nn::{Sample, Tensor};
use crate::rng::SeededStream;

const IDX_IMAGES_MAGIC: usize = 0x0000_0803;
const IDX_LABELS_MAGIC: usize = 0x0000_0801;

/// Parses an IDX image file and its label file into `[1, rows, cols]`
/// samples with pixels scaled to `[0, 1]`.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let image_bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    parse_mnist_idx(&image_bytes, images_path, &label_bytes, labels_path)
}

pub fn parse_mnist_idx(image_bytes: &[u8], images_path: &Path, label_bytes: &[u8], labels_path: &Path) -> Result<Dataset> {
    let mut images = Reader::new(image_bytes, images_path);
    let magic = images.u32_be()?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Parse {
            path: images_path.to_path_buf(),
            offset: 0,
            msg: format!("bad image magic {magic:#010x}"),
        });
    }
    let count = images.u32_be()?;
    let rows = images.u32_be()?;
    let cols = images.u32_be()?;

    let mut labels = Reader::new(label_bytes, labels_path);
    let magic = labels.u32_be()?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Parse {
            path: labels_path.to_path_buf(),
            offset: 0,
            msg: format!("bad label magic {magic:#010x}"),
        });
    }
    let label_count = labels.u32_be()?;
    if label_count != count {
        return Err(labels.error(format!("{label_count} labels for {count} images")));
    }

    let pixels_per_image = rows * cols;
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let raw = images.take(pixels_per_image)?;
        let x = Tensor::new(vec![1, rows, cols], raw.iter().map(|b| *b as f64 / 255.0).collect())?;
        let y = labels.u8()? as usize;
        samples.push(Sample::new(x, y)?);
    }
    images.finish()?;
    labels.finish()?;
    Dataset::new(samples)
}

/// Number of distinct labels, i.e. `max label + 1`.
pub fn class_count(data: &Dataset) -> usize {
    data.samples().iter().map(|s| s.y).max().unwrap_or(0) + 1
}

/// Gaussian class blobs in `[0, 1]^dim`.
///
/// Class means are `1/√2` times random orthonormal directions, so every pair
/// of means sits at unit distance. Each point is its class mean plus
/// `N(0, noise² I)`, mapped into pixel range by `clamp(0.5 + x / 4, 0, 1)`.
/// Labels are assigned round-robin.
pub fn make_synthetic(dim: usize, classes: usize, size: usize, seed: u64, noise: f64) -> Result<Dataset> {
    if classes < 2 || size < classes || dim < classes {
        return Err(Error::domain(format!(
            "synthetic data needs 2 <= classes <= dim and size >= classes (dim {dim}, classes {classes}, size {size})"
        )));
    }
    let mut stream = SeededStream::new(seed);
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(classes);
    while means.len() < classes {
        let mut v: Vec<f64> = (0..dim).map(|_| stream.standard_normal()).collect();
        for m in &means {
            let dot: f64 = v.iter().zip(m).map(|(a, b)| a * b).sum::<f64>() * 2.0;
            for (a, b) in v.iter_mut().zip(m) {
                *a -= dot * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        means.push(v.iter().map(|a| a / norm / std::f64::consts::SQRT_2).collect());
    }
    let samples = (0..size)
        .map(|i| {
            let y = i % classes;
            let x: Vec<f64> = means[y]
                .iter()
                .map(|m| (0.5 + 0.25 * (m + noise * stream.standard_normal())).clamp(0.0, 1.0))
                .collect();
            Sample::new(Tensor::new(vec![dim], x)?, y)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples)
}
