use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, IdxError, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// File names of the digit dataset, `(images, labels)` for the train and
/// test halves.
pub const MNIST_FILES: [(&str, &str); 2] = [
    ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
];

/// Grayscale images with pixels scaled to `[0, 1]`, and their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Appends `other`; image dimensions must agree.
    pub fn extend(&mut self, other: Dataset) -> Result<()> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::shape(
                "Dataset::extend",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        self.images.extend(other.images);
        self.labels.extend(other.labels);
        Ok(())
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn header(bytes: &[u8], path: &Path, magic: u32, dims: usize) -> Result<Vec<usize>> {
    let need = 4 + 4 * dims;
    if bytes.len() < 4 {
        return Err(IdxError::Truncated {
            path: path.to_path_buf(),
            expected: need,
            found: bytes.len(),
        }
        .into());
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(IdxError::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            found,
        }
        .into());
    }
    if bytes.len() < need {
        return Err(IdxError::Truncated {
            path: path.to_path_buf(),
            expected: need,
            found: bytes.len(),
        }
        .into());
    }
    Ok((0..dims).map(|d| be_u32(bytes, 4 + 4 * d) as usize).collect())
}

/// Parses an IDX image file (`0x00000803`, dims `[N, rows, cols]`, one byte
/// per pixel) and its IDX label file (`0x00000801`, dims `[N]`).
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let img = read(ip)?;
    let lab = read(lp)?;

    let dims = header(&img, ip, IMAGES_MAGIC, 3)?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    let pixels = rows * cols;
    let expected = 16 + n * pixels;
    if img.len() < expected {
        return Err(IdxError::Truncated {
            path: ip.to_path_buf(),
            expected,
            found: img.len(),
        }
        .into());
    }

    let n_labels = header(&lab, lp, LABELS_MAGIC, 1)?[0];
    if lab.len() < 8 + n_labels {
        return Err(IdxError::Truncated {
            path: lp.to_path_buf(),
            expected: 8 + n_labels,
            found: lab.len(),
        }
        .into());
    }
    if n != n_labels {
        return Err(IdxError::CountMismatch {
            images: n,
            labels: n_labels,
        }
        .into());
    }

    let images = img[16..expected]
        .chunks_exact(pixels.max(1))
        .take(n)
        .map(|c| c.iter().map(|&b| b as f64 / 255.0).collect())
        .collect();
    let labels = lab[8..8 + n].iter().map(|&b| b as usize).collect();
    Ok(Dataset {
        rows,
        cols,
        images,
        labels,
    })
}

/// Loads and concatenates the train and test halves found in `dir`.
pub fn load_mnist_dir(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let mut out: Option<Dataset> = None;
    for (images, labels) in MNIST_FILES {
        let part = load_idx(dir.join(images), dir.join(labels))?;
        match out.as_mut() {
            None => out = Some(part),
            Some(d) => d.extend(part)?,
        }
    }
    Ok(out.unwrap())
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: PathBuf::from(path),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

/// Writes raw `u8` images in IDX format.
pub fn write_idx_images(path: impl AsRef<Path>, rows: usize, cols: usize, images: &[Vec<u8>]) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    for im in images {
        if im.len() != rows * cols {
            return Err(Error::shape("write_idx_images", rows * cols, im.len()));
        }
        bytes.extend_from_slice(im);
    }
    write(path.as_ref(), &bytes)
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    write(path.as_ref(), &bytes)
}
