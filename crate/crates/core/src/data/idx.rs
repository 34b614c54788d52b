//! IDX image and label files (big-endian headers, unsigned-byte payload).

use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Grid};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Gray level above which a pixel counts as occupied.
pub const BINARIZE_THRESHOLD: u8 = 127;

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            offset: offset as u64,
            message: "file ends inside the header".into(),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = read_u32(bytes, 0)?;
    if magic != expected {
        return Err(Error::Format {
            offset: 0,
            message: format!("magic {magic:#010x}, expected {expected:#010x}"),
        });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Grid<u8>>> {
    check_magic(bytes, IDX_IMAGES_MAGIC)?;
    let n = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let size = rows * cols;
    let payload = &bytes[16..];
    if payload.len() < n * size {
        return Err(Error::Format {
            offset: (16 + payload.len()) as u64,
            message: format!("expected {} pixel bytes, found {}", n * size, payload.len()),
        });
    }
    (0..n)
        .map(|i| Grid::from_vec(rows, cols, payload[i * size..(i + 1) * size].to_vec()))
        .collect()
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS_MAGIC)?;
    let n = read_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() < n {
        return Err(Error::Format {
            offset: (8 + payload.len()) as u64,
            message: format!("expected {n} labels, found {}", payload.len()),
        });
    }
    Ok(payload[..n].to_vec())
}

/// Images paired with their labels.
pub fn load_idx_images(images_path: &Path, labels_path: &Path) -> Result<Vec<(Grid<u8>, u8)>> {
    let images = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let images = parse_idx_images(&images)?;
    let labels = parse_idx_labels(&labels)?;
    if images.len() != labels.len() {
        return Err(Error::Format {
            offset: 4,
            message: format!("{} images but {} labels", images.len(), labels.len()),
        });
    }
    Ok(images.into_iter().zip(labels).collect())
}

pub fn encode_idx_images(images: &[Grid<u8>]) -> Result<Vec<u8>> {
    let (rows, cols) = images.first().map_or((0, 0), Grid::dims);
    if images.iter().any(|g| g.dims() != (rows, cols)) {
        return Err(Error::Shape("IDX images must share dimensions".into()));
    }
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [
        IDX_IMAGES_MAGIC,
        images.len() as u32,
        rows as u32,
        cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for g in images {
        out.extend_from_slice(g.as_slice());
    }
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn binarize(gray: &Grid<u8>, threshold: u8) -> BinaryMask {
    gray.map(|&v| v > threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrong_magic_is_a_format_error() {
        let mut bytes = encode_idx_images(&[Grid::filled(28, 28, 0u8)]).unwrap();
        assert_eq!(parse_idx_images(&bytes).unwrap().len(), 1);
        bytes[3] = 0x01;
        assert!(matches!(
            parse_idx_images(&bytes),
            Err(Error::Format { offset: 0, .. })
        ));
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_idx_images(&[Grid::filled(28, 28, 9u8)]).unwrap();
        let err = parse_idx_images(&bytes[..100]).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 100, .. }), "{err}");
    }

    #[test]
    fn threshold_splits_at_127() {
        let g = Grid::from_vec(1, 3, vec![127u8, 128, 255]).unwrap();
        assert_eq!(
            binarize(&g, BINARIZE_THRESHOLD).as_slice(),
            &[false, true, true]
        );
    }
}
