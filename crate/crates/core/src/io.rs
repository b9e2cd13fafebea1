//! Tensor files.
//!
//! Binary `TNSR` layout, all little-endian:
//!
//! ```text
//! b"TNSR" | u32 order d | d × u64 dims | N × f64 values (column-major)
//! ```
//!
//! CSV layout: a header line `d,n_1,…,n_d`, then one value per line in
//! column-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Shape};

pub const MAGIC: &[u8; 4] = b"TNSR";

fn parse_err<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        offset,
        message: message.into(),
    })
}

pub fn encode_tnsr(x: &DenseTensor) -> Vec<u8> {
    let dims = x.shape().dims();
    let mut out = Vec::with_capacity(8 + 8 * dims.len() + 8 * x.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &n in dims {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for &v in x.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tnsr(bytes: &[u8]) -> Result<DenseTensor> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return parse_err(0, "missing TNSR magic");
    }
    let mut pos = 4;
    let order = read_u32(bytes, &mut pos)? as usize;
    if order == 0 {
        return parse_err(4, "tensor order is zero");
    }
    let mut dims = Vec::with_capacity(order.min(64));
    for _ in 0..order {
        let at = pos;
        let n = read_u64(bytes, &mut pos)?;
        let n = usize::try_from(n).or_else(|_| parse_err(at, "dimension overflows usize"))?;
        dims.push(n);
    }
    let shape = Shape::new(dims).or_else(|e| parse_err(8, e.to_string()))?;
    let expected = shape.len().checked_mul(8).and_then(|v| v.checked_add(pos));
    match expected {
        Some(total) if total == bytes.len() => {}
        Some(total) if total > bytes.len() => {
            return parse_err(bytes.len(), format!("truncated data: expected {total} bytes"))
        }
        Some(total) => return parse_err(total, "trailing bytes after tensor data"),
        None => return parse_err(pos, "tensor too large"),
    }
    let mut data = Vec::with_capacity(shape.len());
    for (k, chunk) in bytes[pos..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
        if !v.is_finite() {
            return parse_err(pos + 8 * k, "non-finite value");
        }
        data.push(v);
    }
    DenseTensor::new(shape, data)
}

fn read_u32(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    let end = *pos + 4;
    let Some(chunk) = bytes.get(*pos..end) else {
        return parse_err(*pos, "unexpected end of header");
    };
    *pos = end;
    Ok(u32::from_le_bytes(chunk.try_into().expect("4 bytes")))
}

fn read_u64(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    let end = *pos + 8;
    let Some(chunk) = bytes.get(*pos..end) else {
        return parse_err(*pos, "unexpected end of header");
    };
    *pos = end;
    Ok(u64::from_le_bytes(chunk.try_into().expect("8 bytes")))
}

pub fn encode_csv(x: &DenseTensor) -> String {
    let dims = x.shape().dims();
    let mut out = String::with_capacity(24 * (x.data().len() + 1));
    out.push_str(&dims.len().to_string());
    for n in dims {
        out.push(',');
        out.push_str(&n.to_string());
    }
    out.push('\n');
    for v in x.data() {
        out.push_str(&format!("{v:.16e}\n"));
    }
    out
}

pub fn decode_csv(text: &str) -> Result<DenseTensor> {
    let mut offset = 0;
    let mut lines = text.split_inclusive('\n').map(|l| {
        let start = offset;
        offset += l.len();
        (start, l.trim_end_matches(['\n', '\r']))
    });
    let Some((_, header)) = lines.next() else {
        return parse_err(0, "empty file");
    };
    let mut fields = header.split(',').map(str::trim);
    let order: usize = fields
        .next()
        .and_then(|f| f.parse().ok())
        .map_or_else(|| parse_err(0, "header must start with the tensor order"), Ok)?;
    let dims: Vec<usize> = fields
        .map(|f| f.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .or_else(|_| parse_err(0, "header dimensions must be positive integers"))?;
    if dims.len() != order {
        return parse_err(0, format!("header declares order {order} but lists {} dims", dims.len()));
    }
    let shape = Shape::new(dims).or_else(|e| parse_err(0, e.to_string()))?;
    let mut data = Vec::with_capacity(shape.len());
    for (start, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .or_else(|_| parse_err(start, format!("not a number: {line:?}")))?;
        if !v.is_finite() {
            return parse_err(start, "non-finite value");
        }
        if data.len() == shape.len() {
            return parse_err(start, "more values than the header declares");
        }
        data.push(v);
    }
    if data.len() != shape.len() {
        return parse_err(
            text.len(),
            format!("expected {} values, found {}", shape.len(), data.len()),
        );
    }
    DenseTensor::new(shape, data)
}

/// Reads either format, detected by the `TNSR` magic.
pub fn read_tensor(path: &Path) -> Result<DenseTensor> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        decode_tnsr(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes)
            .or_else(|e| parse_err(e.valid_up_to(), "file is neither TNSR nor UTF-8 CSV"))?;
        decode_csv(text)
    }
}

/// Writes CSV when the extension is `.csv`, `TNSR` otherwise.
pub fn write_tensor(path: &Path, x: &DenseTensor) -> Result<()> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        fs::write(path, encode_csv(x))?;
    } else {
        fs::write(path, encode_tnsr(x))?;
    }
    Ok(())
}
