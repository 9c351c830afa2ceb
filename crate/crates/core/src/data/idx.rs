//! IDX binary arrays (the MNIST file format).
//!
//! Layout: two zero bytes, a type byte (`0x08` = unsigned byte), a
//! dimension-count byte, one big-endian `u32` per dimension, then the raw
//! payload in row-major order. Vectors (`0x00000801`) and 3-D arrays
//! (`0x00000803`) are accepted.

use std::sync::Arc;

use crate::autograd::Tensor;
use crate::data::TensorDataset;
use crate::error::{Error, Result};

const TYPE_U8: u8 = 0x08;

/// Raw unsigned-byte IDX array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

fn err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Idx {
        offset,
        reason: reason.into(),
    }
}

pub fn decode_idx(bytes: &[u8]) -> Result<IdxArray> {
    if bytes.len() < 4 {
        return Err(err(bytes.len(), "truncated magic number"));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(err(0, "magic number must start with two zero bytes"));
    }
    if bytes[2] != TYPE_U8 {
        return Err(err(
            2,
            format!("unsupported element type 0x{:02x}", bytes[2]),
        ));
    }
    let ndims = bytes[3] as usize;
    if ndims != 1 && ndims != 3 {
        return Err(err(3, format!("unsupported dimension count {ndims}")));
    }
    let header = 4 + 4 * ndims;
    let mut dims = Vec::with_capacity(ndims);
    let mut total: usize = 1;
    for k in 0..ndims {
        let off = 4 + 4 * k;
        let Some(chunk) = bytes.get(off..off + 4) else {
            return Err(err(bytes.len(), format!("truncated size of dimension {k}")));
        };
        let d = u32::from_be_bytes(chunk.try_into().expect("4 bytes")) as usize;
        total = total
            .checked_mul(d)
            .ok_or_else(|| err(off, "dimension product overflows"))?;
        dims.push(d);
    }
    let available = bytes.len() - header;
    if available < total {
        return Err(err(
            bytes.len(),
            format!("truncated payload: expected {total} bytes, found {available}"),
        ));
    }
    if available > total {
        return Err(err(
            header + total,
            format!("{} trailing bytes after payload", available - total),
        ));
    }
    Ok(IdxArray {
        dims,
        data: bytes[header..].to_vec(),
    })
}

/// Parses an IDX array into a tensor of the stored shape with values
/// scaled from `0..=255` to `[0, 1]`.
pub fn parse_idx(bytes: &[u8]) -> Result<Tensor> {
    let arr = decode_idx(bytes)?;
    let data = arr.data.iter().map(|&b| f64::from(b) / 255.0).collect();
    Tensor::new(arr.dims, data)
}

/// Serializes an unsigned-byte array. Only 1-D and 3-D shapes are valid.
pub fn encode_idx(dims: &[usize], data: &[u8]) -> Result<Vec<u8>> {
    if dims.len() != 1 && dims.len() != 3 {
        return Err(Error::invalid(format!(
            "IDX arrays must have 1 or 3 dimensions, got {}",
            dims.len()
        )));
    }
    let total: usize = dims.iter().product();
    if total != data.len() {
        return Err(Error::Length {
            expected: total,
            actual: data.len(),
        });
    }
    let mut out = vec![0, 0, TYPE_U8, dims.len() as u8];
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::invalid("dimension exceeds u32"))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(data);
    Ok(out)
}

/// Builds a dataset from an image file (`n x h x w`) and a label file (`n`).
/// Images are flattened to `h * w` features in `[0, 1]`.
pub fn idx_dataset(images: &[u8], labels: &[u8]) -> Result<Arc<TensorDataset>> {
    let img = decode_idx(images)?;
    let lab = decode_idx(labels)?;
    if img.dims.len() != 3 {
        return Err(Error::invalid("image file must be 3-dimensional"));
    }
    if lab.dims.len() != 1 {
        return Err(Error::invalid("label file must be 1-dimensional"));
    }
    if img.dims[0] != lab.dims[0] {
        return Err(Error::Length {
            expected: img.dims[0],
            actual: lab.dims[0],
        });
    }
    let features = img.data.iter().map(|&b| f64::from(b) / 255.0).collect();
    let targets = lab.data.iter().map(|&b| b as usize).collect();
    Ok(Arc::new(TensorDataset::new(
        features,
        vec![img.dims[1] * img.dims[2]],
        targets,
        None,
    )?))
}
