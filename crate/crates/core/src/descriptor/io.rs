//! The `.qdf` descriptor-set container.
//!
//! Layout (little-endian):
//!
//! | field    | type    |                                   |
//! |----------|---------|-----------------------------------|
//! | magic    | `[u8;4]`| `QIDS`                            |
//! | version  | u32     | 1                                 |
//! | width    | u16     |                                   |
//! | height   | u16     |                                   |
//! | count    | u64     |                                   |
//! | flags    | u32     | bit 0: provenance block present   |
//!
//! followed by `count` images of `ceil(width*height/64) * 8` bytes and, when
//! flagged, `count` `(object_id u32, vertex_index u32)` pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::{words_for, Provenance, QuicciImage};
use crate::error::{Error, Result};

pub const QDF_MAGIC: [u8; 4] = *b"QIDS";
pub const QDF_VERSION: u32 = 1;
pub const QDF_HEADER_LEN: usize = 24;
const FLAG_PROVENANCE: u32 = 1;

/// A homogeneous list of images, optionally tagged with provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescriptorSet {
    pub width: usize,
    pub height: usize,
    pub images: Vec<QuicciImage>,
    pub provenance: Option<Vec<Provenance>>,
}

impl DescriptorSet {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, images: Vec::new(), provenance: None }
    }

    pub fn with_provenance(width: usize, height: usize) -> Self {
        Self { width, height, images: Vec::new(), provenance: Some(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Provenance of record `i`, falling back to `(0, i)` when untagged.
    pub fn provenance_of(&self, i: usize) -> Provenance {
        match &self.provenance {
            Some(p) => p[i],
            None => Provenance::new(0, i as u32),
        }
    }

    pub fn push(&mut self, image: QuicciImage, provenance: Option<Provenance>) -> Result<()> {
        if image.width() != self.width || image.height() != self.height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.width, self.height),
                actual: format!("{}x{}", image.width(), image.height()),
            });
        }
        match (&mut self.provenance, provenance) {
            (Some(list), Some(p)) => list.push(p),
            (None, None) => {}
            (Some(_), None) => return Err(Error::InvalidConfig("record is missing provenance".into())),
            (None, Some(_)) => return Err(Error::InvalidConfig("set does not carry provenance".into())),
        }
        self.images.push(image);
        Ok(())
    }
}

pub fn write_descriptor_set<W: Write>(mut out: W, set: &DescriptorSet) -> Result<()> {
    if let Some(p) = &set.provenance {
        if p.len() != set.images.len() {
            return Err(Error::InvalidConfig("provenance count differs from image count".into()));
        }
    }
    let mut header = Vec::with_capacity(QDF_HEADER_LEN);
    header.extend_from_slice(&QDF_MAGIC);
    header.extend_from_slice(&QDF_VERSION.to_le_bytes());
    header.extend_from_slice(&(set.width as u16).to_le_bytes());
    header.extend_from_slice(&(set.height as u16).to_le_bytes());
    header.extend_from_slice(&(set.images.len() as u64).to_le_bytes());
    let flags = if set.provenance.is_some() { FLAG_PROVENANCE } else { 0 };
    header.extend_from_slice(&flags.to_le_bytes());
    out.write_all(&header)?;

    let mut buf = Vec::with_capacity(words_for(set.width * set.height) * 8);
    for image in &set.images {
        buf.clear();
        for w in image.words() {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    if let Some(list) = &set.provenance {
        for p in list {
            out.write_all(&p.object_id.to_le_bytes())?;
            out.write_all(&p.vertex_index.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_exact_or_truncated<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => Error::Truncated(what.to_string()),
        _ => Error::Io(e),
    })
}

pub fn read_descriptor_set<R: Read>(mut input: R) -> Result<DescriptorSet> {
    let mut header = [0u8; QDF_HEADER_LEN];
    read_exact_or_truncated(&mut input, &mut header, "header")?;
    let magic: [u8; 4] = header[0..4].try_into().unwrap();
    if magic != QDF_MAGIC {
        return Err(Error::BadMagic { expected: QDF_MAGIC, found: magic });
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != QDF_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let width = u16::from_le_bytes(header[8..10].try_into().unwrap()) as usize;
    let height = u16::from_le_bytes(header[10..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header[12..20].try_into().unwrap());
    let flags = u32::from_le_bytes(header[20..24].try_into().unwrap());
    // validates the dimensions once up front
    QuicciImage::zeroed(width, height)?;

    let words = words_for(width * height);
    let mut record = vec![0u8; words * 8];
    let mut images = Vec::with_capacity(count.min(1 << 24) as usize);
    for i in 0..count {
        read_exact_or_truncated(&mut input, &mut record, &format!("record {i}"))?;
        let w: Vec<u64> = record.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        let image = QuicciImage::from_words(width, height, w).map_err(|e| match e {
            Error::NonzeroPadding(_) => Error::NonzeroPadding(i),
            other => other,
        })?;
        images.push(image);
    }
    let provenance = if flags & FLAG_PROVENANCE != 0 {
        let mut list = Vec::with_capacity(images.len());
        let mut pair = [0u8; 8];
        for i in 0..count {
            read_exact_or_truncated(&mut input, &mut pair, &format!("provenance {i}"))?;
            list.push(Provenance::new(
                u32::from_le_bytes(pair[0..4].try_into().unwrap()),
                u32::from_le_bytes(pair[4..8].try_into().unwrap()),
            ));
        }
        Some(list)
    } else {
        None
    };
    Ok(DescriptorSet { width, height, images, provenance })
}

pub fn save_descriptor_set(path: &Path, set: &DescriptorSet) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::IoPath { path: path.to_path_buf(), source })?;
    write_descriptor_set(BufWriter::new(file), set)
}

pub fn load_descriptor_set(path: &Path) -> Result<DescriptorSet> {
    let file = File::open(path).map_err(|source| Error::IoPath { path: path.to_path_buf(), source })?;
    read_descriptor_set(BufReader::new(file))
}
