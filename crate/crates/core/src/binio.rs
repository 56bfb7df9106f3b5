//! Little-endian primitives for the on-disk artifact formats. Every
//! multi-byte value in every file this crate writes goes through here.

use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub fn write_u16(w: &mut impl Write, v: u16, path: &Path) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_u32(w: &mut impl Write, v: u32, path: &Path) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_u64(w: &mut impl Write, v: u64, path: &Path) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_f32(w: &mut impl Write, v: f32, path: &Path) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))
}

/// u16 length prefix, then UTF-8 bytes.
pub fn write_str(w: &mut impl Write, s: &str, path: &Path) -> Result<()> {
    let bytes = s.as_bytes();
    if bytes.len() > u16::MAX as usize {
        return Err(Error::file_format(
            path,
            format!("string too long for format ({} bytes)", bytes.len()),
        ));
    }
    write_u16(w, bytes.len() as u16, path)?;
    w.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn read_u16(r: &mut impl Read, path: &Path) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(u16::from_le_bytes(b))
}

pub fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_u64(r: &mut impl Read, path: &Path) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_f32(r: &mut impl Read, path: &Path) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(f32::from_le_bytes(b))
}

pub fn read_str(r: &mut impl Read, path: &Path) -> Result<String> {
    let len = read_u16(r, path)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    String::from_utf8(buf)
        .map_err(|e| Error::file_format(path, format!("invalid UTF-8 in string: {e}")))
}

/// Read and check a file's 8-byte magic, then its u32 format version.
pub fn expect_header(r: &mut impl Read, magic: &[u8; 8], version: u32, path: &Path) -> Result<()> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m).map_err(|e| Error::io(path, e))?;
    if &m != magic {
        return Err(Error::file_format(
            path,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&m),
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    let v = read_u32(r, path)?;
    if v != version {
        return Err(Error::file_format(
            path,
            format!("unsupported format version {v}, expected {version}"),
        ));
    }
    Ok(())
}

pub fn write_header(w: &mut impl Write, magic: &[u8; 8], version: u32, path: &Path) -> Result<()> {
    w.write_all(magic).map_err(|e| Error::io(path, e))?;
    write_u32(w, version, path)
}
