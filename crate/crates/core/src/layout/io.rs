//! LAY1 layout files.
//!
//! ```text
//! "LAY1" | u64 LE count | count × (u16 LE id_len | id | f32 x | f32 y | u8 kind | f32 display_size)
//! ```
//! `kind` is 0 for talents and 1 for datasets; all floats little-endian.

use crate::spatial::LayoutPoint;
use crate::NodeKind;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

pub const LAY1_MAGIC: &[u8; 4] = b"LAY1";

#[derive(Debug, Error)]
pub enum LayFileError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}, expected \"LAY1\"")]
    BadMagic([u8; 4]),
    #[error("truncated input at byte offset {offset} while reading {what}")]
    Truncated { offset: u64, what: String },
    #[error("record #{index} has unknown node kind {kind}")]
    BadKind { index: u64, kind: u8 },
    #[error("record `{id}` has a non-finite coordinate or non-positive size")]
    BadValue { id: String },
    #[error("record #{index} id is not valid UTF-8")]
    BadId { index: u64 },
    #[error("id `{0}` is too long for a u16 length prefix")]
    IdTooLong(String),
    #[error("duplicate layout id `{0}`")]
    DuplicateId(String),
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayRecord {
    pub id: String,
    pub x: f32,
    pub y: f32,
    pub kind: NodeKind,
    pub display_size: f32,
}

impl LayRecord {
    pub fn to_point(&self) -> LayoutPoint {
        LayoutPoint::new(
            self.id.clone(),
            self.x as f64,
            self.y as f64,
            self.kind,
            self.display_size as f64,
        )
    }
}

fn kind_byte(kind: NodeKind) -> u8 {
    match kind {
        NodeKind::Talent => 0,
        NodeKind::Dataset => 1,
    }
}

pub fn write_lay1<W: Write>(records: &[LayRecord], mut w: W) -> Result<(), LayFileError> {
    w.write_all(LAY1_MAGIC)?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for r in records {
        let len = u16::try_from(r.id.len()).map_err(|_| LayFileError::IdTooLong(r.id.clone()))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(r.id.as_bytes())?;
        w.write_all(&r.x.to_le_bytes())?;
        w.write_all(&r.y.to_le_bytes())?;
        w.write_all(&[kind_byte(r.kind)])?;
        w.write_all(&r.display_size.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn fill<R: Read>(r: &mut R, buf: &mut [u8], offset: &mut u64, what: &str) -> Result<(), LayFileError> {
    let mut done = 0;
    while done < buf.len() {
        match r.read(&mut buf[done..]) {
            Ok(0) => {
                return Err(LayFileError::Truncated {
                    offset: *offset + done as u64,
                    what: what.to_owned(),
                })
            }
            Ok(n) => done += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    *offset += buf.len() as u64;
    Ok(())
}

pub fn read_lay1<R: Read>(mut r: R) -> Result<Vec<LayRecord>, LayFileError> {
    let mut offset = 0u64;
    let mut magic = [0u8; 4];
    fill(&mut r, &mut magic, &mut offset, "magic")?;
    if &magic != LAY1_MAGIC {
        return Err(LayFileError::BadMagic(magic));
    }
    let mut b8 = [0u8; 8];
    fill(&mut r, &mut b8, &mut offset, "record count")?;
    let count = u64::from_le_bytes(b8);
    let mut out = Vec::with_capacity(count.min(1 << 20) as usize);
    let mut seen = std::collections::HashSet::new();
    for index in 0..count {
        let mut b2 = [0u8; 2];
        fill(&mut r, &mut b2, &mut offset, &format!("id length of record #{index}"))?;
        let mut id = vec![0u8; u16::from_le_bytes(b2) as usize];
        fill(&mut r, &mut id, &mut offset, &format!("id of record #{index}"))?;
        let id = String::from_utf8(id).map_err(|_| LayFileError::BadId { index })?;
        let mut body = [0u8; 13];
        fill(&mut r, &mut body, &mut offset, &format!("body of record `{id}`"))?;
        let f = |at: usize| f32::from_le_bytes(body[at..at + 4].try_into().expect("4 bytes"));
        let (x, y, size) = (f(0), f(4), f(9));
        let kind = match body[8] {
            0 => NodeKind::Talent,
            1 => NodeKind::Dataset,
            kind => return Err(LayFileError::BadKind { index, kind }),
        };
        if !(x.is_finite() && y.is_finite() && size.is_finite() && size > 0.0) {
            return Err(LayFileError::BadValue { id });
        }
        if !seen.insert(id.clone()) {
            return Err(LayFileError::DuplicateId(id));
        }
        out.push(LayRecord {
            id,
            x,
            y,
            kind,
            display_size: size,
        });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(LayFileError::TrailingBytes(rest.len() as u64));
    }
    Ok(out)
}

pub fn save_lay1(path: &Path, records: &[LayRecord]) -> Result<(), LayFileError> {
    write_lay1(records, BufWriter::new(File::create(path)?))
}

pub fn load_lay1(path: &Path) -> Result<Vec<LayRecord>, LayFileError> {
    read_lay1(BufReader::new(File::open(path)?))
}
