//! Container used for embedding and model files.
//!
//! Layout: 8-byte magic, little-endian `u64` header length, UTF-8 JSON
//! header, then a sequence of little-endian IEEE-754 `f64` values. Block
//! boundaries inside the payload are described by the header.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) fn write_container<W: Write, H: Serialize>(
    mut out: W,
    magic: &[u8; 8],
    header: &H,
    blocks: &[&[f64]],
) -> std::io::Result<()> {
    let header = serde_json::to_vec(header).map_err(std::io::Error::other)?;
    out.write_all(magic)?;
    out.write_all(&(header.len() as u64).to_le_bytes())?;
    out.write_all(&header)?;
    let mut buf = Vec::with_capacity(blocks.iter().map(|b| b.len() * 8).sum());
    for block in blocks {
        for v in block.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    out.flush()
}

/// Reads a container, returning the header and the flat `f64` payload.
pub(crate) fn read_container<R: Read, H: DeserializeOwned>(
    mut input: R,
    magic: &[u8; 8],
    what: &'static str,
) -> Result<(H, Vec<f64>)> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::format(what, e.to_string()))?;
    if bytes.len() < 16 || &bytes[..8] != magic {
        return Err(Error::format(what, "bad magic"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() < len {
        return Err(Error::format(what, "truncated header"));
    }
    let header: H = serde_json::from_slice(&body[..len])?;
    let payload = &body[len..];
    if payload.len() % 8 != 0 {
        return Err(Error::format(what, "payload is not a whole number of f64 values"));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}
