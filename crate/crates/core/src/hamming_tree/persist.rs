//! Directory layout of a saved tree.
//!
//! `tree.meta` (little-endian):
//!
//! | field        | type    |                                              |
//! |--------------|---------|----------------------------------------------|
//! | magic        | `[u8;4]`| `QIHT`                                       |
//! | version      | u32     | 1                                            |
//! | string bits  | u16     |                                              |
//! | chunk bits   | u16     |                                              |
//! | threshold    | u32     |                                              |
//! | codec        | u32     | low 16 bits codec id, high 16 bits layout    |
//! | entry count  | u64     |                                              |
//! | width        | u16     |                                              |
//! | height       | u16     |                                              |
//!
//! then the node structure in depth-first order as `(branch_key u16, kind u8)`
//! records: kind 0 opens an internal node, 1 is a leaf, 2 closes the
//! innermost open node (the root's children are closed by a final 2).
//!
//! Each leaf lives in `<k0>-<k1>-...-<kn>.leaf` named after its branch keys
//! (the SHA-256 of that string when the path is longer than 32 keys):
//! `QILF`, codec id u32, raw length u64, CRC-32 of the raw bytes u32, then the
//! compressed `.qdf` stream of the leaf's images with provenance.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use sha2::{Digest, Sha256};

use super::{BitLayout, HammingTree, Leaf, Node, TreeConfig};
use crate::descriptor::io::{read_descriptor_set, write_descriptor_set, DescriptorSet};
use crate::descriptor::{kernels, Provenance, QuicciImage};
use crate::error::{Error, Result};

const META_MAGIC: [u8; 4] = *b"QIHT";
const META_VERSION: u32 = 1;
const META_FILE: &str = "tree.meta";
const LEAF_MAGIC: [u8; 4] = *b"QILF";
const LEAF_HEADER_LEN: usize = 20;
const MAX_PLAIN_PATH: usize = 32;

const KIND_INTERNAL: u8 = 0;
const KIND_LEAF: u8 = 1;
const KIND_END: u8 = 2;

/// Lossless compressor applied to leaf payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Codec {
    None,
    #[default]
    Deflate,
}

impl Codec {
    pub fn id(self) -> u16 {
        match self {
            Codec::None => 0,
            Codec::Deflate => 1,
        }
    }

    pub fn from_id(id: u16) -> Result<Self> {
        match id {
            0 => Ok(Codec::None),
            1 => Ok(Codec::Deflate),
            other => Err(Error::Codec(format!("unknown codec id {other}"))),
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "none" => Ok(Codec::None),
            "deflate" => Ok(Codec::Deflate),
            other => Err(Error::InvalidConfig(format!("unknown codec {other:?}"))),
        }
    }

    fn compress(self, raw: &[u8]) -> Result<Vec<u8>> {
        match self {
            Codec::None => Ok(raw.to_vec()),
            Codec::Deflate => {
                let mut enc = DeflateEncoder::new(Vec::new(), Compression::default());
                enc.write_all(raw)?;
                Ok(enc.finish()?)
            }
        }
    }

    fn decompress(self, data: &[u8], raw_len: usize) -> Result<Vec<u8>> {
        match self {
            Codec::None => Ok(data.to_vec()),
            Codec::Deflate => {
                let mut out = Vec::with_capacity(raw_len);
                DeflateDecoder::new(data)
                    .read_to_end(&mut out)
                    .map_err(|e| Error::Codec(e.to_string()))?;
                Ok(out)
            }
        }
    }
}

fn layout_id(layout: BitLayout) -> u16 {
    match layout {
        BitLayout::RowMajor => 0,
        BitLayout::ColumnMajor => 1,
    }
}

fn layout_from_id(id: u16) -> Result<BitLayout> {
    match id {
        0 => Ok(BitLayout::RowMajor),
        1 => Ok(BitLayout::ColumnMajor),
        other => Err(Error::Corrupt(format!("unknown bit layout {other}"))),
    }
}

pub(crate) fn leaf_file_name(path: &[u32]) -> String {
    let joined = path.iter().map(u32::to_string).collect::<Vec<_>>().join("-");
    if path.len() <= MAX_PLAIN_PATH {
        format!("{joined}.leaf")
    } else {
        let digest = Sha256::digest(joined.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        format!("{hex}.leaf")
    }
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::IoPath { path: path.to_path_buf(), source }
}

fn write_structure(tree: &HammingTree, node: usize, out: &mut Vec<u8>) {
    let Node::Internal(children) = &tree.nodes[node] else {
        unreachable!("structure is written from internal nodes");
    };
    for (&key, &child) in children {
        out.extend_from_slice(&(key as u16).to_le_bytes());
        match &tree.nodes[child as usize] {
            Node::Leaf(_) => out.push(KIND_LEAF),
            Node::Internal(_) => {
                out.push(KIND_INTERNAL);
                write_structure(tree, child as usize, out);
            }
        }
    }
    out.extend_from_slice(&0xFFFFu16.to_le_bytes());
    out.push(KIND_END);
}

fn encode_leaf(tree: &HammingTree, leaf: &Leaf) -> Result<Vec<u8>> {
    let config = &tree.config;
    let wpe = tree.words_per_entry;
    let mut set = DescriptorSet::with_provenance(config.image_width, config.image_height);
    for (slot, &prov) in leaf.provenance.iter().enumerate() {
        let words = leaf.words[slot * wpe..(slot + 1) * wpe].to_vec();
        set.push(QuicciImage::from_words(config.image_width, config.image_height, words)?, Some(prov))?;
    }
    let mut raw = Vec::new();
    write_descriptor_set(&mut raw, &set)?;
    let payload = config.codec.compress(&raw)?;
    let mut out = Vec::with_capacity(LEAF_HEADER_LEN + payload.len());
    out.extend_from_slice(&LEAF_MAGIC);
    out.extend_from_slice(&(config.codec.id() as u32).to_le_bytes());
    out.extend_from_slice(&(raw.len() as u64).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&raw).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Writes the tree into `dir`, creating it if needed. Output bytes depend
/// only on the tree contents.
pub fn save_tree(tree: &HammingTree, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let config = &tree.config;
    let mut failure = None;
    tree.walk_leaves(&mut |path, leaf| {
        if failure.is_some() {
            return;
        }
        let file = dir.join(leaf_file_name(path));
        let result = encode_leaf(tree, leaf).and_then(|bytes| fs::write(&file, bytes).map_err(io_at(&file)));
        if let Err(e) = result {
            failure = Some(e);
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }

    let mut meta = Vec::new();
    meta.extend_from_slice(&META_MAGIC);
    meta.extend_from_slice(&META_VERSION.to_le_bytes());
    meta.extend_from_slice(&(config.string_bits() as u16).to_le_bytes());
    meta.extend_from_slice(&(config.chunk_bits as u16).to_le_bytes());
    meta.extend_from_slice(&(config.leaf_split_threshold as u32).to_le_bytes());
    let codec_word = config.codec.id() as u32 | (layout_id(config.layout) as u32) << 16;
    meta.extend_from_slice(&codec_word.to_le_bytes());
    meta.extend_from_slice(&tree.entries.to_le_bytes());
    meta.extend_from_slice(&(config.image_width as u16).to_le_bytes());
    meta.extend_from_slice(&(config.image_height as u16).to_le_bytes());
    write_structure(tree, 0, &mut meta);
    let path = dir.join(META_FILE);
    fs::write(&path, meta).map_err(io_at(&path))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated(format!("tree.meta {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn read_leaf(file: &Path, config: &TreeConfig) -> Result<DescriptorSet> {
    let bytes = fs::read(file).map_err(io_at(file))?;
    let name = file.display().to_string();
    if bytes.len() < LEAF_HEADER_LEN {
        return Err(Error::Truncated(name));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != LEAF_MAGIC {
        return Err(Error::BadMagic { expected: LEAF_MAGIC, found: magic });
    }
    let codec_id = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let codec = Codec::from_id(u16::try_from(codec_id).map_err(|_| Error::Codec(format!("codec id {codec_id}")))?)?;
    if codec != config.codec {
        return Err(Error::ConfigMismatch(format!("{name} uses codec {codec:?}, tree uses {:?}", config.codec)));
    }
    let raw_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let crc = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    let raw = codec.decompress(&bytes[LEAF_HEADER_LEN..], raw_len)?;
    if raw.len() != raw_len || crc32fast::hash(&raw) != crc {
        return Err(Error::Checksum(name));
    }
    let mut reader = raw.as_slice();
    let set = read_descriptor_set(&mut reader)?;
    if !reader.is_empty() {
        return Err(Error::Corrupt(format!("{name} has trailing bytes")));
    }
    if set.width != config.image_width || set.height != config.image_height {
        return Err(Error::ConfigMismatch(format!(
            "{name} holds {}x{} images, tree expects {}x{}",
            set.width, set.height, config.image_width, config.image_height
        )));
    }
    if set.provenance.is_none() || set.is_empty() {
        return Err(Error::Corrupt(format!("{name} is empty or lacks provenance")));
    }
    Ok(set)
}

struct Loader<'a> {
    dir: &'a Path,
    cursor: Cursor<'a>,
    tree: HammingTree,
}

impl Loader<'_> {
    /// Reads the children of the internal node `node` whose branch keys are
    /// `path`, up to and including the closing record.
    fn read_children(&mut self, node: usize, path: &mut Vec<u32>) -> Result<()> {
        let mut children = BTreeMap::new();
        let mut previous: Option<u32> = None;
        loop {
            let key = self.cursor.u16("node key")? as u32;
            let kind = self.cursor.take(1, "node kind")?[0];
            if kind == KIND_END {
                break;
            }
            if previous.is_some_and(|p| key <= p) || path.last().is_some_and(|&p| key > p) {
                return Err(Error::Corrupt(format!("branch key {key} out of order under {path:?}")));
            }
            if path.len() >= self.tree.config.levels() {
                return Err(Error::Corrupt(format!("path {path:?} is deeper than the tree allows")));
            }
            previous = Some(key);
            path.push(key);
            let child = match kind {
                KIND_LEAF => {
                    let set = read_leaf(&self.dir.join(leaf_file_name(path)), &self.tree.config)?;
                    self.leaf_from_set(set, path)?
                }
                KIND_INTERNAL => {
                    let c = self.tree.push_node(Node::Internal(BTreeMap::new()), Provenance::new(u32::MAX, u32::MAX));
                    self.read_children(c, path)?;
                    c
                }
                other => return Err(Error::Corrupt(format!("unknown node kind {other}"))),
            };
            path.pop();
            children.insert(key, child as u32);
        }
        let min = children.values().map(|&c| self.tree.min_provenance[c as usize]).min();
        if let Some(min) = min {
            self.tree.min_provenance[node] = min;
        }
        self.tree.nodes[node] = Node::Internal(children);
        Ok(())
    }

    fn leaf_from_set(&mut self, set: DescriptorSet, path: &[u32]) -> Result<usize> {
        let provenance = set.provenance.expect("checked by read_leaf");
        let mut leaf = Leaf { words: Vec::with_capacity(set.images.len() * self.tree.words_per_entry), provenance };
        for image in &set.images {
            let profile = self.tree.profile(image);
            if profile.suffix_counts[..path.len()] != *path {
                return Err(Error::Corrupt(format!("leaf {path:?} holds an image that does not belong there")));
            }
            leaf.words.extend_from_slice(image.words());
            self.tree.entries += 1;
            self.tree.set_bits += kernels::popcount(image.words()) as u64;
        }
        let min = *leaf.provenance.iter().min().expect("leaf is non-empty");
        Ok(self.tree.push_node(Node::Leaf(leaf), min))
    }
}

pub fn load_tree(dir: &Path) -> Result<HammingTree> {
    let meta_path: PathBuf = dir.join(META_FILE);
    let bytes = fs::read(&meta_path).map_err(io_at(&meta_path))?;
    let mut cursor = Cursor { bytes: &bytes, pos: 0 };
    let magic: [u8; 4] = cursor.take(4, "magic")?.try_into().unwrap();
    if magic != META_MAGIC {
        return Err(Error::BadMagic { expected: META_MAGIC, found: magic });
    }
    let version = cursor.u32("version")?;
    if version != META_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let string_bits = cursor.u16("string bits")? as usize;
    let chunk_bits = cursor.u16("chunk bits")? as usize;
    let threshold = cursor.u32("threshold")? as usize;
    let codec_word = cursor.u32("codec")?;
    let entry_count = cursor.u64("entry count")?;
    let width = cursor.u16("width")? as usize;
    let height = cursor.u16("height")? as usize;
    if width * height != string_bits {
        return Err(Error::Corrupt(format!("{width}x{height} image does not have {string_bits} bits")));
    }
    let config = TreeConfig {
        image_width: width,
        image_height: height,
        chunk_bits,
        leaf_split_threshold: threshold,
        layout: layout_from_id((codec_word >> 16) as u16)?,
        codec: Codec::from_id(codec_word as u16)?,
    };
    let tree = HammingTree::new(config)?;
    let mut loader = Loader { dir, cursor, tree };
    loader.read_children(0, &mut Vec::new())?;
    if loader.cursor.pos != bytes.len() {
        return Err(Error::Corrupt("trailing bytes after node structure".into()));
    }
    if loader.tree.entries != entry_count {
        return Err(Error::Corrupt(format!(
            "header lists {entry_count} entries, leaves hold {}",
            loader.tree.entries
        )));
    }
    Ok(loader.tree)
}
