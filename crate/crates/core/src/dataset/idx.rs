//! Strict reader/writer for the IDX files MNIST ships in.
//!
//! ```text
//! images: [00 00 08 03] count:u32be rows:u32be cols:u32be pixels[count*rows*cols]
//! labels: [00 00 08 01] count:u32be labels[count]
//! ```
//!
//! Payloads are unsigned bytes, row-major. The file length must match the
//! header exactly; trailing bytes are rejected.

use super::DatasetError;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: u32,
    pub cols: u32,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn pixels_per_image(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    pub fn count(&self) -> usize {
        match self.pixels_per_image() {
            0 => 0,
            n => self.pixels.len() / n,
        }
    }

    pub fn image(&self, index: usize) -> &[u8] {
        let n = self.pixels_per_image();
        &self.pixels[index * n..(index + 1) * n]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.count() as u32).to_be_bytes());
        out.extend_from_slice(&self.rows.to_be_bytes());
        out.extend_from_slice(&self.cols.to_be_bytes());
        out.extend_from_slice(&self.pixels);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxLabels {
    pub labels: Vec<u8>,
}

impl IdxLabels {
    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.labels.len());
        out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.labels.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.labels);
        out
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]])
}

fn check_magic(bytes: &[u8], expected: u32, header_len: usize) -> Result<(), DatasetError> {
    if bytes.len() < 4 {
        return Err(DatasetError::Truncated { expected: header_len, actual: bytes.len() });
    }
    let found = be_u32(bytes, 0);
    if found != expected {
        return Err(DatasetError::BadMagic { expected, found });
    }
    if bytes.len() < header_len {
        return Err(DatasetError::Truncated { expected: header_len, actual: bytes.len() });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages, DatasetError> {
    check_magic(bytes, IMAGE_MAGIC, 16)?;
    let count = be_u32(bytes, 4) as usize;
    let rows = be_u32(bytes, 8);
    let cols = be_u32(bytes, 12);
    let expected = (rows as usize)
        .checked_mul(cols as usize)
        .and_then(|px| px.checked_mul(count))
        .and_then(|n| n.checked_add(16))
        .unwrap_or(usize::MAX);
    if bytes.len() != expected {
        return Err(DatasetError::Truncated { expected, actual: bytes.len() });
    }
    if rows == 0 || cols == 0 {
        return Err(DatasetError::Invalid(format!("degenerate image size {rows}x{cols}")));
    }
    Ok(IdxImages { rows, cols, pixels: bytes[16..].to_vec() })
}

/// Parses a label file; labels must be digits `0..=9`.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<IdxLabels, DatasetError> {
    check_magic(bytes, LABEL_MAGIC, 8)?;
    let count = be_u32(bytes, 4) as usize;
    let expected = count.saturating_add(8);
    if bytes.len() != expected {
        return Err(DatasetError::Truncated { expected, actual: bytes.len() });
    }
    let labels = bytes[8..].to_vec();
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(DatasetError::LabelOutOfRange { index, label });
    }
    Ok(IdxLabels { labels })
}
