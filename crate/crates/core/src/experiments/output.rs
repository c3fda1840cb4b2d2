//! CSV and manifest writers for experiment results.
//!
//! Files go through an [`OutputSet`], which deletes everything it wrote
//! unless [`OutputSet::commit`] is called, so a failed run leaves no
//! half-written results behind.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::bench::{ComparisonRate, GenerationRate};
use super::clutter::HEATMAP_RANKS;
use super::clutterbox::ClutterboxOutcome;
use super::distance_study::DistanceStudyOutcome;
use super::runindex_study::RunIndexStudyRow;
use crate::error::{Error, Result};

pub struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
    created_dir: bool,
    committed: bool,
}

impl OutputSet {
    pub fn create(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir).map_err(|source| Error::IoPath { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new(), created_dir, committed: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Registers `name` for cleanup and returns its full path.
    pub fn path(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        path
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|source| Error::IoPath { path: path.clone(), source })?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|source| Error::IoPath { path: path.clone(), source })?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n").and_then(|_| w.flush()).map_err(|source| Error::IoPath { path: path.clone(), source })?;
        Ok(path)
    }

    /// Writes `manifest.json` with the tool version, seed and config echo.
    pub fn manifest<C: Serialize>(&mut self, experiment: &str, seed: u64, config: &C) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Manifest<'a, C> {
            experiment: &'a str,
            version: &'a str,
            seed: u64,
            config: &'a C,
            files: Vec<String>,
        }
        let files = self.written.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect();
        let manifest = Manifest { experiment, version: env!("CARGO_PKG_VERSION"), seed, config, files };
        self.json("manifest.json", &manifest)
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
        if self.created_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

#[derive(Serialize)]
struct RankRow {
    object_count: usize,
    rank: usize,
    count: u64,
}

#[derive(Serialize)]
struct RankSummaryRow {
    object_count: usize,
    queries: u64,
    mean_rank: f64,
    rank_zero_fraction: f64,
    overflow: u64,
}

#[derive(Serialize)]
struct HeatmapRow {
    object_count: usize,
    fraction_bin: usize,
    fraction_lo: f64,
    fraction_hi: f64,
    rank: usize,
    count: u64,
}

/// `ranks.csv` (nonzero bins only), `rank_summary.csv` and, when clutter was
/// estimated, `heatmap.csv` with every cell.
pub fn write_clutterbox(out: &mut OutputSet, outcome: &ClutterboxOutcome) -> Result<()> {
    let ranks = outcome.object_counts.iter().zip(&outcome.histograms).flat_map(|(&n, h)| {
        h.bins.iter().enumerate().filter(|(_, &c)| c > 0).map(move |(rank, &count)| RankRow { object_count: n, rank, count })
    });
    out.csv("ranks.csv", ranks)?;
    let summary = outcome.object_counts.iter().zip(&outcome.histograms).map(|(&n, h)| RankSummaryRow {
        object_count: n,
        queries: h.total_queries,
        mean_rank: h.mean_rank(),
        rank_zero_fraction: h.fraction_at_rank_zero(),
        overflow: h.overflow,
    });
    out.csv("rank_summary.csv", summary)?;
    if !outcome.heatmaps.is_empty() {
        let cells = outcome.object_counts.iter().zip(&outcome.heatmaps).flat_map(|(&n, m)| {
            let bins = m.fraction_bins;
            (0..bins).flat_map(move |b| {
                (0..HEATMAP_RANKS).map(move |rank| HeatmapRow {
                    object_count: n,
                    fraction_bin: b,
                    fraction_lo: b as f64 / bins as f64,
                    fraction_hi: (b + 1) as f64 / bins as f64,
                    rank,
                    count: m.get(b, rank),
                })
            })
        });
        out.csv("heatmap.csv", cells)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DistanceBinRow<'a> {
    part: &'a str,
    function: &'a str,
    sphere_count: usize,
    bin: u64,
    bin_lo: f64,
    count: u64,
}

#[derive(Serialize)]
struct DistanceMeanRow<'a> {
    part: &'a str,
    function: &'a str,
    sphere_count: usize,
    samples: u64,
    mean: f64,
}

/// `distance_histograms.csv` with one row per nonzero bin and
/// `distance_means.csv` with one row per histogram.
pub fn write_distance_study(out: &mut OutputSet, outcome: &DistanceStudyOutcome) -> Result<()> {
    let parts = || {
        outcome.nominal.iter().map(|h| ("nominal", h)).chain(outcome.series.iter().map(|h| ("perturbed", h)))
    };
    let bins = parts().flat_map(|(part, h)| {
        h.bins.iter().map(move |(&bin, &count)| DistanceBinRow {
            part,
            function: h.function.name(),
            sphere_count: h.sphere_count,
            bin,
            bin_lo: bin as f64 * h.bin_width,
            count,
        })
    });
    out.csv("distance_histograms.csv", bins)?;
    let means = parts().map(|(part, h)| DistanceMeanRow {
        part,
        function: h.function.name(),
        sphere_count: h.sphere_count,
        samples: h.count,
        mean: h.mean(),
    });
    out.csv("distance_means.csv", means)?;
    Ok(())
}

pub fn write_comparison_rates(out: &mut OutputSet, rows: &[ComparisonRate]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        function: &'a str,
        images: usize,
        comparisons: u64,
        seconds: f64,
        comparisons_per_second: f64,
    }
    out.csv(
        "comparison_rate.csv",
        rows.iter().map(|r| Row {
            function: r.function.name(),
            images: r.images,
            comparisons: r.comparisons,
            seconds: r.seconds,
            comparisons_per_second: r.comparisons_per_second,
        }),
    )?;
    Ok(())
}

pub fn write_generation_rates(out: &mut OutputSet, rows: &[GenerationRate]) -> Result<()> {
    out.csv("generation_rate.csv", rows)?;
    Ok(())
}

pub fn write_runindex_study(out: &mut OutputSet, rows: &[RunIndexStudyRow]) -> Result<()> {
    out.csv("runindex_study.csv", rows)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_outputs_are_removed() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        {
            let mut out = OutputSet::create(&dir).unwrap();
            out.csv("a.csv", [(1, 2)]).unwrap();
            assert!(dir.join("a.csv").exists());
        }
        assert!(!dir.exists());
        let mut out = OutputSet::create(&dir).unwrap();
        out.csv("a.csv", [(1, 2)]).unwrap();
        out.manifest("test", 7, &serde_json::json!({"k": 1})).unwrap();
        let files = out.commit();
        assert_eq!(files.len(), 2);
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["seed"], 7);
        assert_eq!(manifest["files"][0], "a.csv");
    }
}
