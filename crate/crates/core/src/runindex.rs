//! Inverted index keyed by vertical runs of set bits.
//!
//! Every maximal run of consecutive set bits within one column of a stored
//! image gets a list entry. A query collects the images listed under any run
//! that overlaps one of the needle's set bits and scores them with the
//! weighted Hamming distance. Dense needles overlap most runs, so the
//! candidate set tends towards the whole corpus.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::descriptor::{mismatch_counts, Provenance, QuicciImage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnRun {
    pub column: u16,
    pub start_row: u16,
    pub length: u16,
}

impl ColumnRun {
    pub fn end_row(&self) -> usize {
        (self.start_row + self.length) as usize
    }
}

/// Maximal vertical runs ordered by `(column, start_row)`.
pub fn extract_runs(image: &QuicciImage) -> Vec<ColumnRun> {
    let mut runs = Vec::new();
    for c in 0..image.width() {
        let mut r = 0;
        while r < image.height() {
            if !image.get(r, c) {
                r += 1;
                continue;
            }
            let start = r;
            while r < image.height() && image.get(r, c) {
                r += 1;
            }
            runs.push(ColumnRun { column: c as u16, start_row: start as u16, length: (r - start) as u16 });
        }
    }
    runs
}

pub fn render_runs(width: usize, height: usize, runs: &[ColumnRun]) -> Result<QuicciImage> {
    let mut image = QuicciImage::zeroed(width, height)?;
    for run in runs {
        if run.column as usize >= width || run.length == 0 || run.end_row() > height {
            return Err(Error::OutOfRange(format!("{run:?} in a {width}x{height} image")));
        }
        for r in run.start_row as usize..run.end_row() {
            image.set(r, run.column as usize, true);
        }
    }
    Ok(image)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ListEntry {
    pub image: u32,
    pub total_set_bits: u32,
}

pub struct RunInvertedIndex {
    width: usize,
    height: usize,
    lists: HashMap<ColumnRun, Vec<ListEntry>>,
    /// Distinct runs present per column, sorted by start row.
    column_runs: Vec<Vec<ColumnRun>>,
    images: Vec<QuicciImage>,
    provenance: Vec<Provenance>,
    totals: Vec<u32>,
    /// Image indices ordered by (set bits, provenance).
    by_total: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedResult {
    pub index: usize,
    pub provenance: Provenance,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunQueryStats {
    pub lists_touched: u64,
    /// List entries read, including repeats of the same image.
    pub postings_read: u64,
    /// Distinct images gathered from the lists.
    pub candidates: u64,
    pub corpus: u64,
}

impl RunQueryStats {
    pub fn candidate_fraction(&self) -> f64 {
        if self.corpus == 0 {
            0.0
        } else {
            self.candidates as f64 / self.corpus as f64
        }
    }
}

pub fn build_run_index(
    width: usize,
    height: usize,
    images: Vec<QuicciImage>,
    provenance: Vec<Provenance>,
) -> Result<RunInvertedIndex> {
    QuicciImage::zeroed(width, height)?;
    if images.len() != provenance.len() {
        return Err(Error::InvalidConfig("provenance count differs from image count".into()));
    }
    let mut lists: HashMap<ColumnRun, Vec<ListEntry>> = HashMap::new();
    let mut totals = Vec::with_capacity(images.len());
    for (i, image) in images.iter().enumerate() {
        if image.width() != width || image.height() != height {
            return Err(Error::DimensionMismatch {
                expected: format!("{width}x{height}"),
                actual: format!("{}x{}", image.width(), image.height()),
            });
        }
        let total = image.popcount();
        totals.push(total);
        for run in extract_runs(image) {
            lists.entry(run).or_default().push(ListEntry { image: i as u32, total_set_bits: total });
        }
    }
    let mut column_runs = vec![Vec::new(); width];
    for run in lists.keys() {
        column_runs[run.column as usize].push(*run);
    }
    column_runs.iter_mut().for_each(|runs| runs.sort_unstable());
    let mut by_total: Vec<u32> = (0..images.len() as u32).collect();
    by_total.sort_by_key(|&i| (totals[i as usize], provenance[i as usize]));
    Ok(RunInvertedIndex { width, height, lists, column_runs, images, provenance, totals, by_total })
}

fn by_distance(a: &WeightedResult, b: &WeightedResult) -> Ordering {
    a.distance.total_cmp(&b.distance).then(a.provenance.cmp(&b.provenance)).then(a.index.cmp(&b.index))
}

impl RunInvertedIndex {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&self, index: usize) -> &QuicciImage {
        &self.images[index]
    }

    pub fn provenance(&self, index: usize) -> Provenance {
        self.provenance[index]
    }

    pub fn list(&self, run: &ColumnRun) -> &[ListEntry] {
        self.lists.get(run).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of distinct runs with a list.
    pub fn list_count(&self) -> usize {
        self.lists.len()
    }

    pub fn posting_count(&self) -> usize {
        self.lists.values().map(Vec::len).sum()
    }

    /// Distinct images listed under a run that shares a set bit with the
    /// needle, in ascending index order.
    pub fn candidates(&self, needle: &QuicciImage) -> Result<(Vec<u32>, RunQueryStats)> {
        if needle.width() != self.width || needle.height() != self.height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.width, self.height),
                actual: format!("{}x{}", needle.width(), needle.height()),
            });
        }
        let mut stats = RunQueryStats { corpus: self.images.len() as u64, ..Default::default() };
        let mut seen = vec![false; self.images.len()];
        let mut prefix = vec![0u32; self.height + 1];
        for c in 0..self.width {
            for r in 0..self.height {
                prefix[r + 1] = prefix[r] + needle.get(r, c) as u32;
            }
            if prefix[self.height] == 0 {
                continue;
            }
            for run in &self.column_runs[c] {
                if prefix[run.end_row()] == prefix[run.start_row as usize] {
                    continue;
                }
                stats.lists_touched += 1;
                let list = &self.lists[run];
                stats.postings_read += list.len() as u64;
                for entry in list {
                    seen[entry.image as usize] = true;
                }
            }
        }
        let out: Vec<u32> = (0..self.images.len() as u32).filter(|&i| seen[i as usize]).collect();
        stats.candidates = out.len() as u64;
        Ok((out, stats))
    }

    /// Top `k` images by weighted Hamming distance, ties broken by
    /// provenance. An all-zero needle overlaps no run and returns nothing.
    ///
    /// Images outside the candidate set share no set bit with the needle, so
    /// their distance follows from their stored set-bit count alone; the
    /// lowest of those fill in whenever they beat a candidate.
    pub fn query(&self, needle: &QuicciImage, k: usize) -> Result<(Vec<WeightedResult>, RunQueryStats)> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        let (candidates, stats) = self.candidates(needle)?;
        if candidates.is_empty() {
            return Ok((Vec::new(), stats));
        }
        let mut scored: Vec<WeightedResult> = candidates
            .iter()
            .map(|&i| {
                let i = i as usize;
                let counts = mismatch_counts(needle, &self.images[i]).expect("shapes checked");
                WeightedResult { index: i, provenance: self.provenance[i], distance: counts.weighted(self.width as u32) }
            })
            .collect();

        let needle_set = needle.popcount();
        let is_candidate = {
            let mut mark = vec![false; self.images.len()];
            candidates.iter().for_each(|&i| mark[i as usize] = true);
            mark
        };
        let disjoint = self.by_total.iter().filter(|&&i| !is_candidate[i as usize]).take(k).map(|&i| {
            let i = i as usize;
            let counts = crate::descriptor::MismatchCounts {
                missing: needle_set,
                extra: self.totals[i],
                needle_set,
                total_bits: (self.width * self.height) as u32,
            };
            WeightedResult { index: i, provenance: self.provenance[i], distance: counts.weighted(self.width as u32) }
        });
        scored.extend(disjoint);
        scored.sort_unstable_by(by_distance);
        scored.truncate(k);
        Ok((scored, stats))
    }
}
