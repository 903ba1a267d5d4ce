//! IDX (MNIST) files: big-endian `u32` magic, counts and dimensions
//! followed by a raw `u8` payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::Sample;
use crate::{Error, Result};

pub const IDX_IMAGE_MAGIC: u32 = 2051;
pub const IDX_LABEL_MAGIC: u32 = 2049;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<Vec<u8>>,
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            offset: offset as u64,
            message: format!("truncated header: missing {what}"),
        })
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("image magic {magic}, expected {IDX_IMAGE_MAGIC}"),
        });
    }
    let count = be_u32(bytes, 4, "image count")? as usize;
    let rows = be_u32(bytes, 8, "row count")? as usize;
    let cols = be_u32(bytes, 12, "column count")? as usize;
    let size = rows * cols;
    let need = 16 + count * size;
    if bytes.len() < need {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!(
                "truncated payload: {count} images of {rows}x{cols} need {need} bytes"
            ),
        });
    }
    let pixels = bytes[16..need]
        .chunks(size.max(1))
        .take(count)
        .map(<[u8]>::to_vec)
        .collect();
    Ok(IdxImages { rows, cols, pixels })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("label magic {magic}, expected {IDX_LABEL_MAGIC}"),
        });
    }
    let count = be_u32(bytes, 4, "label count")? as usize;
    if bytes.len() < 8 + count {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("truncated payload: {count} labels need {} bytes", 8 + count),
        });
    }
    Ok(bytes[8..8 + count].to_vec())
}

/// Load an image/label file pair, scaling pixels to `[0, 1]`.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<Vec<Sample>> {
    let img_bytes =
        fs::read(images_path.as_ref()).map_err(|e| Error::io(images_path.as_ref(), e))?;
    let lbl_bytes =
        fs::read(labels_path.as_ref()).map_err(|e| Error::io(labels_path.as_ref(), e))?;
    let images = parse_idx_images(&img_bytes)?;
    let labels = parse_idx_labels(&lbl_bytes)?;
    if images.pixels.len() != labels.len() {
        return Err(Error::Format {
            offset: 4,
            message: format!("{} images but {} labels", images.pixels.len(), labels.len()),
        });
    }
    Ok(images
        .pixels
        .iter()
        .zip(labels)
        .map(|(px, c)| {
            Sample::new(
                px.iter().map(|&p| f64::from(p) / 255.0).collect(),
                c as usize,
            )
        })
        .collect())
}

/// Write an image/label file pair.
pub fn write_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    images: &IdxImages,
    labels: &[u8],
) -> Result<()> {
    if images.pixels.len() != labels.len() {
        return Err(Error::dim(
            "write_idx labels",
            images.pixels.len(),
            labels.len(),
        ));
    }
    let mut img = Vec::with_capacity(16 + images.pixels.len() * images.rows * images.cols);
    img.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(images.pixels.len() as u32).to_be_bytes());
    img.extend_from_slice(&(images.rows as u32).to_be_bytes());
    img.extend_from_slice(&(images.cols as u32).to_be_bytes());
    for (i, px) in images.pixels.iter().enumerate() {
        if px.len() != images.rows * images.cols {
            return Err(Error::dim(
                format!("write_idx image {i}"),
                images.rows * images.cols,
                px.len(),
            ));
        }
        img.extend_from_slice(px);
    }
    let mut lbl = Vec::with_capacity(8 + labels.len());
    lbl.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    lbl.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lbl.extend_from_slice(labels);
    write_file(images_path.as_ref(), &img)?;
    write_file(labels_path.as_ref(), &lbl)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magic_numbers_are_big_endian() {
        assert_eq!(IDX_IMAGE_MAGIC.to_be_bytes(), [0, 0, 8, 3]);
        assert_eq!(IDX_LABEL_MAGIC.to_be_bytes(), [0, 0, 8, 1]);
    }

    #[test]
    fn single_white_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        let imgs = IdxImages {
            rows: 1,
            cols: 1,
            pixels: vec![vec![255]],
        };
        write_idx(&ip, &lp, &imgs, &[7]).unwrap();
        let s = load_idx(&ip, &lp).unwrap();
        assert_eq!(s, vec![Sample::new(vec![1.0], 7)]);
    }

    #[test]
    fn format_errors_carry_offsets() {
        let mut bytes = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
        bytes.extend_from_slice(&[1, 2, 3, 4, 5]);
        match parse_idx_images(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 21),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_idx_images(&[0, 0, 8, 1]),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            parse_idx_labels(&[0, 0, 8, 1, 0]),
            Err(Error::Format { offset: 4, .. })
        ));
        assert!(matches!(
            parse_idx_labels(&[0, 0, 8, 3, 0, 0, 0, 0]),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        let imgs = IdxImages {
            rows: 1,
            cols: 2,
            pixels: vec![vec![0, 1], vec![2, 3]],
        };
        write_idx(&ip, &lp, &imgs, &[0, 1]).unwrap();
        let mut lbl = fs::read(&lp).unwrap();
        lbl[7] = 1;
        lbl.pop();
        fs::write(&lp, lbl).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Format { .. })));
    }
}
