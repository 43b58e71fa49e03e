use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{EcoError, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Raw IDX image block: `count` images of `rows × cols` bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| EcoError::Truncated {
            path: path.into(),
            detail: format!("header ends at byte {}", bytes.len()),
        })
}

/// Checks the magic number, reads `dims` big-endian sizes and returns them
/// with the payload.
fn parse(path: &Path, magic: u32, dims: usize) -> Result<(Vec<usize>, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let found = be_u32(&bytes, 0, path)?;
    if found != magic {
        return Err(EcoError::BadMagic {
            path: path.into(),
            expected: magic,
            found,
        });
    }
    let sizes = (0..dims)
        .map(|k| be_u32(&bytes, 4 + 4 * k, path).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let body = &bytes[4 + 4 * dims..];
    let need: usize = sizes.iter().product();
    if body.len() < need {
        return Err(EcoError::Truncated {
            path: path.into(),
            detail: format!("{} payload bytes, header promises {need}", body.len()),
        });
    }
    Ok((sizes, body[..need].to_vec()))
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let (sizes, pixels) = parse(path.as_ref(), IMAGE_MAGIC, 3)?;
    Ok(IdxImages {
        rows: sizes[1],
        cols: sizes[2],
        pixels,
    })
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    Ok(parse(path.as_ref(), LABEL_MAGIC, 1)?.1)
}

pub fn write_idx_images(path: impl AsRef<Path>, images: &IdxImages) -> Result<()> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGE_MAGIC, images.len() as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    Ok(fs::write(path, out)?)
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    Ok(fs::write(path, out)?)
}

/// Loads the images of two digits, pixels scaled by 1/255;
/// `digit_a` becomes `+1`, `digit_b` becomes `−1`.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    digit_a: u8,
    digit_b: u8,
) -> Result<Dataset> {
    if digit_a == digit_b {
        return Err(EcoError::Config(format!("digits must differ, got {digit_a} twice")));
    }
    let images = read_idx_images(images_path)?;
    let digits = read_idx_labels(labels_path)?;
    if images.len() != digits.len() {
        return Err(EcoError::CountMismatch {
            images: images.len(),
            labels: digits.len(),
        });
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (i, &d) in digits.iter().enumerate() {
        let t = if d == digit_a {
            1.0
        } else if d == digit_b {
            -1.0
        } else {
            continue;
        };
        points.push(images.image(i).iter().map(|&v| v as f64 / 255.0).collect());
        labels.push(t);
    }
    if points.is_empty() {
        return Err(EcoError::Empty("no images of the requested digits"));
    }
    Dataset::labeled(points, labels)
}
