//! IDX file parsing (big-endian, magic 0x00000803 for image tensors and
//! 0x00000801 for label vectors).

use std::fs::File;
use std::io::Read;
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Reads an IDX3 image file: returns (images, rows, cols) with one u8 vector
/// per image.
pub fn read_images(path: &Path) -> Result<(Vec<Vec<u8>>, usize, usize)> {
    let mut f = File::open(path)?;
    let magic = f.read_u32::<BigEndian>()?;
    if magic != IMAGE_MAGIC {
        return Err(Error::IdxFormat(format!(
            "bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"
        )));
    }
    let count = f.read_u32::<BigEndian>()? as usize;
    let rows = f.read_u32::<BigEndian>()? as usize;
    let cols = f.read_u32::<BigEndian>()? as usize;
    let mut images = Vec::with_capacity(count);
    let mut buf = vec![0u8; rows * cols];
    for i in 0..count {
        f.read_exact(&mut buf)
            .map_err(|e| Error::IdxFormat(format!("truncated image data at image {i}: {e}")))?;
        images.push(buf.clone());
    }
    Ok((images, rows, cols))
}

/// Reads an IDX1 label file.
pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let mut f = File::open(path)?;
    let magic = f.read_u32::<BigEndian>()?;
    if magic != LABEL_MAGIC {
        return Err(Error::IdxFormat(format!(
            "bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"
        )));
    }
    let count = f.read_u32::<BigEndian>()? as usize;
    let mut labels = vec![0u8; count];
    f.read_exact(&mut labels)
        .map_err(|e| Error::IdxFormat(format!("truncated label data: {e}")))?;
    Ok(labels)
}
