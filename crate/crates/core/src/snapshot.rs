//! Binary dataset container.
//!
//! Layout: magic `UQFP1`, user count and column count as little-endian u64,
//! the catalog SHA-256 digest, row-major packed bits (little-endian within
//! each byte, bit 0 = column 0), then the user table (id, browser family,
//! flags, user agent per user). Loading verifies the digest against the
//! catalog supplied by the caller, so a snapshot cannot be misread under a
//! different attribute universe.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::bits::BitMatrix;
use crate::catalog::AttributeCatalog;
use crate::dataset::{BinaryDataset, UserMeta};
use crate::error::{Error, Result};
use crate::record::BrowserFamily;

const MAGIC: &[u8; 5] = b"UQFP1";
const FLAG_JS_ENABLED: u8 = 1;

fn browser_to_u8(b: BrowserFamily) -> u8 {
    match b {
        BrowserFamily::Chrome => 0,
        BrowserFamily::Firefox => 1,
        BrowserFamily::Brave => 2,
        BrowserFamily::Opera => 3,
        BrowserFamily::Safari => 4,
        BrowserFamily::IE => 5,
        BrowserFamily::Other => 6,
    }
}

fn browser_from_u8(v: u8) -> Result<BrowserFamily> {
    Ok(match v {
        0 => BrowserFamily::Chrome,
        1 => BrowserFamily::Firefox,
        2 => BrowserFamily::Brave,
        3 => BrowserFamily::Opera,
        4 => BrowserFamily::Safari,
        5 => BrowserFamily::IE,
        6 => BrowserFamily::Other,
        _ => return Err(Error::SnapshotCorrupt("unknown browser family byte")),
    })
}

pub fn save(dataset: &BinaryDataset, mut writer: impl Write) -> Result<()> {
    let n = dataset.n();
    let m = dataset.m();
    writer.write_all(MAGIC)?;
    writer.write_all(&(n as u64).to_le_bytes())?;
    writer.write_all(&(m as u64).to_le_bytes())?;
    writer.write_all(&dataset.catalog().digest())?;

    let row_bytes = m.div_ceil(8);
    for row in 0..n {
        let mut bytes = Vec::with_capacity(row_bytes);
        for word in dataset.matrix().row(row) {
            bytes.extend_from_slice(&word.to_le_bytes());
        }
        bytes.truncate(row_bytes);
        writer.write_all(&bytes)?;
    }

    for user in dataset.users() {
        write_string(&mut writer, &user.id)?;
        writer.write_all(&[browser_to_u8(user.browser_family)])?;
        let flags = if user.js_enabled { FLAG_JS_ENABLED } else { 0 };
        writer.write_all(&[flags])?;
        write_string(&mut writer, &user.user_agent)?;
    }
    Ok(())
}

pub fn save_path(dataset: &BinaryDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    save(dataset, &mut writer)?;
    writer.flush()?;
    Ok(())
}

pub fn load(mut reader: impl Read, catalog: Arc<AttributeCatalog>) -> Result<BinaryDataset> {
    let mut magic = [0u8; 5];
    read_exact(&mut reader, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::SnapshotBadMagic);
    }
    let n = read_u64(&mut reader, "user count")? as usize;
    let m = read_u64(&mut reader, "column count")? as usize;
    let mut digest = [0u8; 32];
    read_exact(&mut reader, &mut digest, "catalog digest")?;
    if m != catalog.len() || digest != catalog.digest() {
        return Err(Error::SnapshotDigestMismatch);
    }

    let row_bytes = m.div_ceil(8);
    let mut matrix = BitMatrix::new(n, m);
    let mut buf = vec![0u8; row_bytes];
    for row in 0..n {
        read_exact(&mut reader, &mut buf, "bit rows")?;
        for (byte_idx, &byte) in buf.iter().enumerate() {
            let mut bits = byte;
            while bits != 0 {
                let bit = bits.trailing_zeros() as usize;
                let col = byte_idx * 8 + bit;
                if col >= m {
                    return Err(Error::SnapshotCorrupt("set bit beyond column count"));
                }
                matrix.set(row, col);
                bits &= bits - 1;
            }
        }
    }

    let mut users = Vec::with_capacity(n);
    for _ in 0..n {
        let id = read_string(&mut reader, "user id")?;
        let mut b = [0u8; 2];
        read_exact(&mut reader, &mut b, "user flags")?;
        let user_agent = read_string(&mut reader, "user agent")?;
        users.push(UserMeta {
            id,
            browser_family: browser_from_u8(b[0])?,
            js_enabled: b[1] & FLAG_JS_ENABLED != 0,
            user_agent,
        });
    }
    BinaryDataset::from_parts(catalog, users, matrix)
}

pub fn load_path(path: impl AsRef<Path>, catalog: Arc<AttributeCatalog>) -> Result<BinaryDataset> {
    let file = std::fs::File::open(path)?;
    load(std::io::BufReader::new(file), catalog)
}

fn write_string(writer: &mut impl Write, s: &str) -> Result<()> {
    writer.write_all(&(s.len() as u32).to_le_bytes())?;
    writer.write_all(s.as_bytes())?;
    Ok(())
}

fn read_string(reader: &mut impl Read, what: &'static str) -> Result<String> {
    let mut len = [0u8; 4];
    read_exact(reader, &mut len, what)?;
    let mut bytes = vec![0u8; u32::from_le_bytes(len) as usize];
    read_exact(reader, &mut bytes, what)?;
    String::from_utf8(bytes).map_err(|_| Error::SnapshotCorrupt("invalid utf-8 string"))
}

fn read_u64(reader: &mut impl Read, what: &'static str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(reader, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_exact(reader: &mut impl Read, buf: &mut [u8], what: &'static str) -> Result<()> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::SnapshotCorrupt(what)
        } else {
            Error::Io(e)
        }
    })
}
