//! k-nearest-neighbour index over fixed-length bit strings.
//!
//! A node at path length `d` branches on the number of set bits left after
//! removing the first `d` chunks of the string. Those counts bound the Hamming
//! distance to anything below a node, which drives a best-first search.

mod persist;

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rayon::prelude::*;

use crate::descriptor::{kernels, profile_of_words, words_for, BitCountProfile, Provenance, QuicciImage};
use crate::error::{Error, Result};

pub use persist::{load_tree, save_tree, Codec};

pub const DEFAULT_CHUNK_BITS: usize = 128;
pub const DEFAULT_LEAF_SPLIT_THRESHOLD: usize = 256;
pub const DEFAULT_K: usize = 32;

/// Order in which image bits are laid out before being cut into chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitLayout {
    #[default]
    RowMajor,
    /// Chunks take whole columns, so a 128-bit chunk of a 64-high image is
    /// two columns.
    ColumnMajor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeConfig {
    pub image_width: usize,
    pub image_height: usize,
    pub chunk_bits: usize,
    pub leaf_split_threshold: usize,
    pub layout: BitLayout,
    pub codec: Codec,
}

impl TreeConfig {
    pub fn new(image_width: usize, image_height: usize) -> Self {
        Self {
            image_width,
            image_height,
            chunk_bits: DEFAULT_CHUNK_BITS,
            leaf_split_threshold: DEFAULT_LEAF_SPLIT_THRESHOLD,
            layout: BitLayout::RowMajor,
            codec: Codec::Deflate,
        }
    }

    pub fn with_chunk_bits(mut self, chunk_bits: usize) -> Self {
        self.chunk_bits = chunk_bits;
        self
    }

    pub fn with_leaf_split_threshold(mut self, threshold: usize) -> Self {
        self.leaf_split_threshold = threshold;
        self
    }

    pub fn with_layout(mut self, layout: BitLayout) -> Self {
        self.layout = layout;
        self
    }

    pub fn with_codec(mut self, codec: Codec) -> Self {
        self.codec = codec;
        self
    }

    pub fn string_bits(&self) -> usize {
        self.image_width * self.image_height
    }

    /// Maximum path length; a leaf this deep never splits.
    pub fn levels(&self) -> usize {
        self.string_bits().div_ceil(self.chunk_bits)
    }

    pub fn validate(&self) -> Result<()> {
        let bits = self.string_bits();
        if bits == 0 || bits > u16::MAX as usize {
            return Err(Error::InvalidConfig(format!("string length {bits} must be in 1..=65535")));
        }
        if self.chunk_bits == 0 || self.chunk_bits > u16::MAX as usize {
            return Err(Error::InvalidConfig(format!("chunk size {} must be in 1..=65535", self.chunk_bits)));
        }
        if self.leaf_split_threshold == 0 || self.leaf_split_threshold > u32::MAX as usize {
            return Err(Error::InvalidConfig("leaf split threshold must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub image: QuicciImage,
    pub provenance: Provenance,
    pub distance: u32,
}

/// Work done by one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub nodes_visited: u64,
    pub leaves_scanned: u64,
    /// Stored images whose exact distance was computed.
    pub entries_examined: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeStats {
    pub entry_count: u64,
    pub node_count: u64,
    pub leaf_count: u64,
    /// `depth_histogram[d]` is the number of leaves at path length `d`.
    pub depth_histogram: Vec<u64>,
    pub mean_set_bits: f64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Leaf {
    pub(crate) words: Vec<u64>,
    pub(crate) provenance: Vec<Provenance>,
}

impl Leaf {
    fn len(&self) -> usize {
        self.provenance.len()
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Node {
    Internal(BTreeMap<u32, u32>),
    Leaf(Leaf),
}

pub struct HammingTree {
    config: TreeConfig,
    words_per_entry: usize,
    nodes: Vec<Node>,
    /// Smallest provenance stored below each node.
    min_provenance: Vec<Provenance>,
    entries: u64,
    set_bits: u64,
}

/// Lower bound on the Hamming distance between the needle and any string
/// whose first `path.len()` suffix counts equal `path`.
///
/// Chunks already fixed by the path contribute their individual count gaps;
/// the rest of the string contributes the gap of its total count.
pub fn subtree_min_distance(needle: &BitCountProfile, path: &[u32]) -> u32 {
    let beta = &needle.suffix_counts;
    let Some((&last, fixed)) = path.split_last() else {
        return 0;
    };
    let d = path.len();
    let mut sum = 0;
    for l in 0..fixed.len() {
        let b_chunk = path[l] as i64 - path[l + 1] as i64;
        let n_chunk = beta[l] as i64 - beta[l + 1] as i64;
        sum += (b_chunk - n_chunk).unsigned_abs() as u32;
    }
    sum + last.abs_diff(beta[d - 1])
}

#[derive(PartialEq, Eq)]
struct Pending {
    bound: u32,
    min_provenance: Provenance,
    node: u32,
    depth: u32,
    /// Bound contribution of the chunks fixed strictly before the last key.
    fixed: u32,
    last_key: u32,
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.bound, other.min_provenance, other.node).cmp(&(self.bound, self.min_provenance, self.node))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct ResultSet {
    k: usize,
    limit: u32,
    heap: BinaryHeap<(u32, Provenance, u32, u32)>,
}

impl ResultSet {
    /// Whether anything with distance `bound` and provenance at least `prov`
    /// could still enter the result list.
    fn admits(&self, bound: u32, prov: Provenance) -> bool {
        if bound > self.limit {
            return false;
        }
        match self.heap.peek() {
            Some(&(d, p, _, _)) if self.heap.len() == self.k => (bound, prov) < (d, p),
            _ => true,
        }
    }

    fn offer(&mut self, distance: u32, prov: Provenance, leaf: u32, slot: u32) {
        if self.admits(distance, prov) {
            self.heap.push((distance, prov, leaf, slot));
            if self.heap.len() > self.k {
                self.heap.pop();
            }
        }
    }
}

impl HammingTree {
    pub fn new(config: TreeConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            words_per_entry: words_for(config.string_bits()),
            config,
            nodes: vec![Node::Internal(BTreeMap::new())],
            min_provenance: vec![Provenance::new(u32::MAX, u32::MAX)],
            entries: 0,
            set_bits: 0,
        })
    }

    pub fn config(&self) -> &TreeConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.entries as usize
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }

    fn check_shape(&self, image: &QuicciImage) -> Result<()> {
        if image.width() != self.config.image_width || image.height() != self.config.image_height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.config.image_width, self.config.image_height),
                actual: format!("{}x{}", image.width(), image.height()),
            });
        }
        Ok(())
    }

    /// The packed string in the configured layout.
    fn layout_words<'a>(&self, words: &'a [u64]) -> Cow<'a, [u64]> {
        match self.config.layout {
            BitLayout::RowMajor => Cow::Borrowed(words),
            BitLayout::ColumnMajor => {
                let image = QuicciImage::from_words(self.config.image_width, self.config.image_height, words.to_vec())
                    .expect("stored words match the configured shape");
                Cow::Owned(image.transposed().words().to_vec())
            }
        }
    }

    pub fn profile(&self, image: &QuicciImage) -> BitCountProfile {
        let words = self.layout_words(image.words());
        profile_of_words(&words, self.config.string_bits(), self.config.chunk_bits)
    }

    pub fn insert(&mut self, image: &QuicciImage, provenance: Provenance) -> Result<()> {
        self.check_shape(image)?;
        let profile = self.profile(image);
        let levels = self.config.levels();
        let mut node = 0usize;
        let mut depth = 0usize;
        loop {
            self.min_provenance[node] = self.min_provenance[node].min(provenance);
            let key = profile.suffix_counts[depth];
            let existing = match &self.nodes[node] {
                Node::Internal(children) => children.get(&key).copied(),
                Node::Leaf(_) => unreachable!("leaves are only reached through their parent"),
            };
            let child = match existing {
                Some(c) => c as usize,
                None => {
                    let c = self.push_node(Node::Leaf(Leaf::default()), provenance);
                    if let Node::Internal(children) = &mut self.nodes[node] {
                        children.insert(key, c as u32);
                    }
                    c
                }
            };
            depth += 1;
            node = child;
            if let Node::Leaf(leaf) = &mut self.nodes[node] {
                leaf.words.extend_from_slice(image.words());
                leaf.provenance.push(provenance);
                let len = leaf.len();
                self.min_provenance[node] = self.min_provenance[node].min(provenance);
                if len > self.config.leaf_split_threshold && depth < levels {
                    self.split(node, depth);
                }
                break;
            }
        }
        self.entries += 1;
        self.set_bits += image.popcount() as u64;
        Ok(())
    }

    fn push_node(&mut self, node: Node, min_provenance: Provenance) -> usize {
        self.nodes.push(node);
        self.min_provenance.push(min_provenance);
        self.nodes.len() - 1
    }

    /// Replaces the leaf at path length `depth` by an internal node whose
    /// children partition its entries by the next suffix count.
    fn split(&mut self, node: usize, depth: usize) {
        let Node::Leaf(leaf) = std::mem::replace(&mut self.nodes[node], Node::Internal(BTreeMap::new())) else {
            unreachable!("only leaves are split");
        };
        let wpe = self.words_per_entry;
        let start = depth * self.config.chunk_bits;
        let bits = self.config.string_bits();
        let mut groups: BTreeMap<u32, Leaf> = BTreeMap::new();
        for (i, &prov) in leaf.provenance.iter().enumerate() {
            let words = &leaf.words[i * wpe..(i + 1) * wpe];
            let key = kernels::popcount_range(&self.layout_words(words), start, bits);
            let group = groups.entry(key).or_default();
            group.words.extend_from_slice(words);
            group.provenance.push(prov);
        }
        let mut children = BTreeMap::new();
        let mut oversized = Vec::new();
        for (key, group) in groups {
            let min = *group.provenance.iter().min().expect("groups are non-empty");
            let len = group.len();
            let c = self.push_node(Node::Leaf(group), min);
            children.insert(key, c as u32);
            if len > self.config.leaf_split_threshold && depth + 1 < self.config.levels() {
                oversized.push(c);
            }
        }
        self.nodes[node] = Node::Internal(children);
        for c in oversized {
            self.split(c, depth + 1);
        }
    }

    pub fn query(&self, needle: &QuicciImage, k: usize, distance_limit: Option<u32>) -> Result<Vec<SearchResult>> {
        self.query_with_stats(needle, k, distance_limit).map(|(r, _)| r)
    }

    /// Best-first search. Nodes wait in a queue ordered by their distance
    /// bound; the search ends once no queued node can improve on the current
    /// k-th result.
    pub fn query_with_stats(
        &self,
        needle: &QuicciImage,
        k: usize,
        distance_limit: Option<u32>,
    ) -> Result<(Vec<SearchResult>, QueryStats)> {
        self.check_shape(needle)?;
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        let profile = self.profile(needle);
        let beta = &profile.suffix_counts;
        let mut stats = QueryStats::default();
        let mut results = ResultSet { k, limit: distance_limit.unwrap_or(u32::MAX), heap: BinaryHeap::new() };
        let mut queue = BinaryHeap::new();
        queue.push(Pending {
            bound: 0,
            min_provenance: self.min_provenance[0],
            node: 0,
            depth: 0,
            fixed: 0,
            last_key: 0,
        });
        let wpe = self.words_per_entry;
        while let Some(item) = queue.pop() {
            if !results.admits(item.bound, item.min_provenance) {
                break;
            }
            stats.nodes_visited += 1;
            match &self.nodes[item.node as usize] {
                Node::Leaf(leaf) => {
                    stats.leaves_scanned += 1;
                    stats.entries_examined += leaf.len() as u64;
                    for (slot, &prov) in leaf.provenance.iter().enumerate() {
                        let d = kernels::xor_popcount(needle.words(), &leaf.words[slot * wpe..(slot + 1) * wpe]);
                        results.offer(d, prov, item.node, slot as u32);
                    }
                }
                Node::Internal(children) => {
                    let d = item.depth as usize;
                    for (&key, &child) in children {
                        let fixed = if d == 0 {
                            0
                        } else {
                            let chunk = (item.last_key - key) as i64;
                            let needle_chunk = beta[d - 1] as i64 - beta[d] as i64;
                            item.fixed + (chunk - needle_chunk).unsigned_abs() as u32
                        };
                        let bound = fixed + key.abs_diff(beta[d]);
                        let min_provenance = self.min_provenance[child as usize];
                        if results.admits(bound, min_provenance) {
                            queue.push(Pending {
                                bound,
                                min_provenance,
                                node: child,
                                depth: item.depth + 1,
                                fixed,
                                last_key: key,
                            });
                        }
                    }
                }
            }
        }
        let mut found = results.heap.into_vec();
        found.sort_unstable();
        let out = found
            .into_iter()
            .map(|(distance, provenance, leaf, slot)| {
                let Node::Leaf(l) = &self.nodes[leaf as usize] else { unreachable!() };
                let words = l.words[slot as usize * wpe..(slot as usize + 1) * wpe].to_vec();
                SearchResult {
                    image: QuicciImage::from_words(self.config.image_width, self.config.image_height, words)
                        .expect("stored words match the configured shape"),
                    provenance,
                    distance,
                }
            })
            .collect();
        Ok((out, stats))
    }

    /// Runs independent queries on the rayon pool.
    pub fn query_batch(
        &self,
        needles: &[QuicciImage],
        k: usize,
        distance_limit: Option<u32>,
    ) -> Result<Vec<(Vec<SearchResult>, QueryStats)>> {
        needles.par_iter().map(|n| self.query_with_stats(n, k, distance_limit)).collect()
    }

    pub fn tree_stats(&self) -> TreeStats {
        let mut depth_histogram = vec![0u64; self.config.levels() + 1];
        let mut leaf_count = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((node, depth)) = stack.pop() {
            match &self.nodes[node] {
                Node::Leaf(_) => {
                    leaf_count += 1;
                    depth_histogram[depth] += 1;
                }
                Node::Internal(children) => stack.extend(children.values().map(|&c| (c as usize, depth + 1))),
            }
        }
        TreeStats {
            entry_count: self.entries,
            node_count: self.nodes.len() as u64,
            leaf_count,
            depth_histogram,
            mean_set_bits: if self.entries == 0 { 0.0 } else { self.set_bits as f64 / self.entries as f64 },
        }
    }

    /// Every stored entry with the branch keys leading to its leaf, in
    /// depth-first key order.
    pub fn entries(&self) -> Vec<(Vec<u32>, QuicciImage, Provenance)> {
        let mut out = Vec::with_capacity(self.len());
        self.walk_leaves(&mut |path, leaf| {
            for (slot, &prov) in leaf.provenance.iter().enumerate() {
                let words = leaf.words[slot * self.words_per_entry..(slot + 1) * self.words_per_entry].to_vec();
                let image = QuicciImage::from_words(self.config.image_width, self.config.image_height, words)
                    .expect("stored words match the configured shape");
                out.push((path.to_vec(), image, prov));
            }
        });
        out
    }

    pub(crate) fn walk_leaves(&self, f: &mut impl FnMut(&[u32], &Leaf)) {
        fn go(tree: &HammingTree, node: usize, path: &mut Vec<u32>, f: &mut impl FnMut(&[u32], &Leaf)) {
            match &tree.nodes[node] {
                Node::Leaf(leaf) => f(path, leaf),
                Node::Internal(children) => {
                    for (&key, &child) in children {
                        path.push(key);
                        go(tree, child as usize, path, f);
                        path.pop();
                    }
                }
            }
        }
        go(self, 0, &mut Vec::new(), f);
    }
}
