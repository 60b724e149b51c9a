use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::{FlowError, FlowField, Result};

/// Middlebury flow-file tag: the float 202021.25 stored little-endian,
/// whose bytes read "PIEH".
const MAGIC: [u8; 4] = *b"PIEH";

/// Upper bound on either dimension; guards allocation on corrupt headers.
const MAX_DIM: i32 = 1 << 20;

/// Read a Middlebury `.flo` file. The stored format carries no validity
/// information, so the returned field is all-valid.
pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;

    if bytes.len() < 12 || bytes[..4] != MAGIC {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(FlowError::BadMagic { path: path.into() });
        }
        return Err(FlowError::Truncated {
            path: path.into(),
            expected: 12,
            found: bytes.len(),
        });
    }
    let width = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if width < 1 || height < 1 || width > MAX_DIM || height > MAX_DIM {
        return Err(FlowError::BadDimensions {
            path: path.into(),
            width,
            height,
        });
    }
    let (w, h) = (width as usize, height as usize);
    let expected = w * h * 2 * 4;
    let payload = &bytes[12..];
    if payload.len() < expected {
        return Err(FlowError::Truncated {
            path: path.into(),
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(FlowError::TrailingData { path: path.into() });
    }

    let mut vectors = Vec::with_capacity(w * h);
    for (i, pair) in payload.chunks_exact(8).enumerate() {
        let dx = f32::from_le_bytes(pair[0..4].try_into().unwrap());
        let dy = f32::from_le_bytes(pair[4..8].try_into().unwrap());
        if !dx.is_finite() || !dy.is_finite() {
            return Err(FlowError::NonFinite {
                path: Some(path.into()),
                index: i,
            });
        }
        vectors.push([dx, dy]);
    }
    FlowField::from_parts(w, h, vectors, vec![true; w * h])
}

/// Write a flow field as Middlebury `.flo`: the "PIEH" tag, width and height
/// as little-endian i32, then row-major interleaved `(dx, dy)` as
/// little-endian f32. The validity mask is not stored.
pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(i) = flow
        .vectors()
        .iter()
        .position(|v| !v[0].is_finite() || !v[1].is_finite())
    {
        return Err(FlowError::NonFinite {
            path: Some(path.into()),
            index: i,
        });
    }
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&MAGIC)?;
    out.write_all(&(flow.width() as i32).to_le_bytes())?;
    out.write_all(&(flow.height() as i32).to_le_bytes())?;
    for v in flow.vectors() {
        out.write_all(&v[0].to_le_bytes())?;
        out.write_all(&v[1].to_le_bytes())?;
    }
    Ok(())
}
