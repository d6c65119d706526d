//! Little-endian primitives shared by the versioned binary model files.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

/// Failure while reading or writing one of the binary model files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes: expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("invalid file contents: {0}")]
    Invalid(String),
}

pub(crate) fn write_magic<W: Write>(w: &mut W, magic: &'static str) -> io::Result<()> {
    w.write_all(magic.as_bytes())
}

pub(crate) fn read_magic<R: Read>(r: &mut R, magic: &'static str) -> Result<(), FormatError> {
    let mut buf = vec![0u8; magic.len()];
    r.read_exact(&mut buf)?;
    if buf != magic.as_bytes() {
        return Err(FormatError::BadMagic { expected: magic });
    }
    Ok(())
}

pub(crate) fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_u32::<LittleEndian>(len_u32(s.len())?)?;
    w.write_all(s.as_bytes())
}

pub(crate) fn read_str<R: Read>(r: &mut R) -> Result<String, FormatError> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| FormatError::Invalid(format!("non-UTF-8 string: {e}")))
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_u32::<LittleEndian>(v)
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32, FormatError> {
    Ok(r.read_u32::<LittleEndian>()?)
}

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> io::Result<()> {
    w.write_u64::<LittleEndian>(v)
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64, FormatError> {
    Ok(r.read_u64::<LittleEndian>()?)
}

pub(crate) fn write_f64<W: Write>(w: &mut W, v: f64) -> io::Result<()> {
    w.write_f64::<LittleEndian>(v)
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64, FormatError> {
    Ok(r.read_f64::<LittleEndian>()?)
}

pub(crate) fn write_u8<W: Write>(w: &mut W, v: u8) -> io::Result<()> {
    w.write_u8(v)
}

pub(crate) fn read_u8<R: Read>(r: &mut R) -> Result<u8, FormatError> {
    Ok(r.read_u8()?)
}

pub(crate) fn len_u32(len: usize) -> io::Result<u32> {
    u32::try_from(len).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "length exceeds u32"))
}

/// Fails unless the reader is exhausted.
pub(crate) fn expect_eof<R: Read>(r: &mut R) -> Result<(), FormatError> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(FormatError::Invalid("trailing bytes after payload".into())),
    }
}
