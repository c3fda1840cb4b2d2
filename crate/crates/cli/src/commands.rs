use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use quicci_core::descriptor::io::{load_descriptor_set, save_descriptor_set, DescriptorSet};
use quicci_core::descriptor::Provenance;
use quicci_core::experiments::bench::{bench_comparison_rate, bench_generation_rate};
use quicci_core::experiments::clutterbox::{run_clutterbox_series, ClutterboxConfig, TieBreak};
use quicci_core::experiments::distance_study::{run_distance_study, DistanceStudyConfig};
use quicci_core::experiments::output::{self, OutputSet};
use quicci_core::experiments::runindex_study::{run_runindex_study, synthetic_corpus, RunIndexStudyConfig};
use quicci_core::experiments::DistanceFunction;
use quicci_core::hamming_tree::{load_tree, save_tree, BitLayout, Codec, HammingTree, TreeConfig};
use quicci_core::intersection::{DescriptorConfig, DescriptorGenerator};
use quicci_core::mesh::{load_mesh_auto, Mesh, MeshFormat};
use quicci_core::synth::{random_mixed_density_image, write_toy_corpus};

use crate::args::*;

pub fn dispatch(command: Command, seed: u64) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Index(IndexCommand::Build(a)) => index_build(a),
        Command::Index(IndexCommand::Query(a)) => index_query(a),
        Command::Index(IndexCommand::Stats(a)) => index_stats(a),
        Command::Experiment(e) => match e {
            ExperimentCommand::Clutterbox(a) => clutterbox(a, seed),
            ExperimentCommand::DistanceStudy(a) => distance_study(a, seed),
            ExperimentCommand::BenchCompare(a) => bench_compare(a, seed),
            ExperimentCommand::BenchGenerate(a) => bench_generate(a, seed),
            ExperimentCommand::RunindexStudy(a) => runindex_study(a, seed),
        },
        Command::SynthCorpus(a) => synth_corpus(a, seed),
    }
}

fn parse_list(text: &str, what: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("{what}: {s:?} is not a whole number")))
        .collect()
}

/// Writes through `<path>.partial` so a failed write never leaves a file at
/// `path`.
fn write_atomically(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    match write(&partial).and_then(|_| fs::rename(&partial, path).with_context(|| format!("renaming to {}", path.display()))) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&partial);
            Err(e)
        }
    }
}

fn load_dataset(dir: &Path) -> Result<Vec<Mesh>> {
    ensure!(dir.is_dir(), "dataset directory {} does not exist", dir.display());
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.is_file() && MeshFormat::from_path(p).is_some());
    paths.sort();
    ensure!(!paths.is_empty(), "no .obj or .ply meshes in {}", dir.display());
    eprintln!("loading {} meshes from {}", paths.len(), dir.display());
    paths.iter().map(|p| load_mesh_auto(p).with_context(|| format!("loading {}", p.display()))).collect()
}

fn generate(a: GenerateArgs) -> Result<()> {
    let d = &a.descriptor;
    let config = DescriptorConfig::for_image(d.width, d.height, d.support_radius)?;
    let mut set = DescriptorSet::with_provenance(d.width, d.height);
    for (object, path) in a.meshes.iter().enumerate() {
        let mut mesh = load_mesh_auto(path).with_context(|| format!("loading {}", path.display()))?;
        if a.fit_unit_sphere {
            mesh = mesh.fit_unit_sphere()?;
        }
        let vertices = mesh.unique_vertex_indices();
        let points = mesh.unique_oriented_points();
        let images = DescriptorGenerator::new(&mesh, config).descriptors(&points);
        for (image, v) in images.into_iter().zip(vertices) {
            set.push(image, Some(Provenance::new(object as u32, v as u32)))?;
        }
        eprintln!("{}: {} descriptors", path.display(), points.len());
    }
    write_atomically(&a.out, |p| Ok(save_descriptor_set(p, &set)?))?;
    eprintln!("wrote {} descriptors to {}", set.len(), a.out.display());
    Ok(())
}

fn load_sets(paths: &[PathBuf]) -> Result<Vec<DescriptorSet>> {
    let sets: Vec<DescriptorSet> = paths
        .iter()
        .map(|p| load_descriptor_set(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<_>>()?;
    if let Some(first) = sets.first() {
        for (s, p) in sets.iter().zip(paths) {
            ensure!(
                (s.width, s.height) == (first.width, first.height),
                "{} holds {}x{} images, expected {}x{}",
                p.display(),
                s.width,
                s.height,
                first.width,
                first.height
            );
        }
    }
    Ok(sets)
}

fn index_build(a: IndexBuildArgs) -> Result<()> {
    let sets = load_sets(&a.inputs)?;
    let (w, h) = (sets[0].width, sets[0].height);
    let config = TreeConfig::new(w, h)
        .with_chunk_bits(a.chunk_bits)
        .with_leaf_split_threshold(a.leaf_threshold)
        .with_layout(match a.layout {
            LayoutArg::Row => BitLayout::RowMajor,
            LayoutArg::Column => BitLayout::ColumnMajor,
        })
        .with_codec(match a.codec {
            CodecArg::None => Codec::None,
            CodecArg::Deflate => Codec::Deflate,
        });
    let mut tree = HammingTree::new(config)?;
    for set in &sets {
        for (i, image) in set.images.iter().enumerate() {
            tree.insert(image, set.provenance_of(i))?;
        }
    }
    let existed = a.out.exists();
    if existed {
        let non_empty = fs::read_dir(&a.out).with_context(|| format!("listing {}", a.out.display()))?.next().is_some();
        ensure!(!non_empty, "output directory {} is not empty", a.out.display());
    }
    if let Err(e) = save_tree(&tree, &a.out) {
        if existed {
            for entry in fs::read_dir(&a.out).into_iter().flatten().flatten() {
                let _ = fs::remove_file(entry.path());
            }
        } else {
            let _ = fs::remove_dir_all(&a.out);
        }
        return Err(e.into());
    }
    eprintln!("indexed {} images into {}", tree.len(), a.out.display());
    Ok(())
}

fn index_query(a: IndexQueryArgs) -> Result<()> {
    ensure!(a.k >= 1, "k must be at least 1");
    let tree = load_tree(&a.index).with_context(|| format!("loading index {}", a.index.display()))?;
    let needles = load_descriptor_set(&a.needles).with_context(|| format!("reading {}", a.needles.display()))?;
    let cfg = tree.config();
    ensure!(
        (needles.width, needles.height) == (cfg.image_width, cfg.image_height),
        "needles are {}x{} but the index holds {}x{} images",
        needles.width,
        needles.height,
        cfg.image_width,
        cfg.image_height
    );
    let chosen: Vec<usize> = if a.all {
        (0..needles.len()).collect()
    } else {
        ensure!(a.needle < needles.len(), "needle {} out of range: file holds {}", a.needle, needles.len());
        vec![a.needle]
    };
    let write_rows = |sink: &mut dyn Write| -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        if a.all {
            w.write_record(["needle", "rank", "distance", "object_id", "vertex_index"])?;
        } else {
            w.write_record(["rank", "distance", "object_id", "vertex_index"])?;
        }
        for &n in &chosen {
            let results = tree.query(&needles.images[n], a.k, a.max_distance)?;
            for (rank, r) in results.iter().enumerate() {
                let mut row = vec![
                    rank.to_string(),
                    r.distance.to_string(),
                    r.provenance.object_id.to_string(),
                    r.provenance.vertex_index.to_string(),
                ];
                if a.all {
                    row.insert(0, n.to_string());
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    };
    match &a.out {
        Some(path) => write_atomically(path, |p| {
            let mut f = std::io::BufWriter::new(fs::File::create(p)?);
            write_rows(&mut f)?;
            f.flush()?;
            Ok(())
        }),
        None => write_rows(&mut std::io::stdout().lock()),
    }
}

fn index_stats(a: IndexStatsArgs) -> Result<()> {
    let tree = load_tree(&a.index).with_context(|| format!("loading index {}", a.index.display()))?;
    let s = tree.tree_stats();
    let cfg = tree.config();
    let mut out = std::io::stdout().lock();
    writeln!(out, "image_size: {}x{}", cfg.image_width, cfg.image_height)?;
    writeln!(out, "chunk_bits: {}", cfg.chunk_bits)?;
    writeln!(out, "leaf_split_threshold: {}", cfg.leaf_split_threshold)?;
    writeln!(out, "entries: {}", s.entry_count)?;
    writeln!(out, "nodes: {}", s.node_count)?;
    writeln!(out, "leaves: {}", s.leaf_count)?;
    writeln!(out, "mean_set_bits: {:.3}", s.mean_set_bits)?;
    for (depth, count) in s.depth_histogram.iter().enumerate().filter(|(_, &c)| c > 0) {
        writeln!(out, "leaves_at_depth_{depth}: {count}")?;
    }
    Ok(())
}

fn distance_of(d: DistanceArg) -> DistanceFunction {
    match d {
        DistanceArg::Hamming => DistanceFunction::Hamming,
        DistanceArg::ClutterResistant => DistanceFunction::ClutterResistant,
        DistanceArg::WeightedHamming => DistanceFunction::WeightedHamming,
    }
}

fn progress(label: &'static str, total: usize) -> impl Fn(usize) + Sync {
    move |done| eprintln!("{label}: {done}/{total}")
}

fn clutterbox(a: ClutterboxArgs, seed: u64) -> Result<()> {
    ensure!(a.runs >= 1, "runs must be at least 1");
    let config = ClutterboxConfig {
        cube_edge: a.cube_edge,
        object_counts: parse_list(&a.object_counts, "object-counts")?,
        support_radius: a.support_radius,
        width: a.width,
        height: a.height,
        seed,
        distance: distance_of(a.distance),
        tie_break: match a.tie_break {
            TieBreakArg::Favourable => TieBreak::Favourable,
            TieBreakArg::InsertionOrder => TieBreak::InsertionOrder,
        },
        rank_cap: a.rank_cap,
        identity_placement: a.identity_placement,
        clutter_samples: a.clutter_samples,
        fraction_bins: a.fraction_bins,
    };
    config.validate()?;
    let dataset = load_dataset(&a.dataset)?;
    let runs = a.runs;
    let outcome = run_clutterbox_series(&dataset, &config, runs, &move |i| eprintln!("clutterbox run {i} done"))?;
    let mut out = OutputSet::create(&a.out)?;
    output::write_clutterbox(&mut out, &outcome)?;
    out.manifest("clutterbox", seed, &serde_json::json!({ "runs": runs, "clutterbox": config }))?;
    for (n, h) in outcome.object_counts.iter().zip(&outcome.histograms) {
        eprintln!("objects {n}: {} queries, mean rank {:.3}, rank 0 {:.3}", h.total_queries, h.mean_rank(), h.fraction_at_rank_zero());
    }
    out.commit();
    Ok(())
}

fn distance_study(a: DistanceStudyArgs, seed: u64) -> Result<()> {
    let d = &a.descriptor;
    let config = DistanceStudyConfig {
        width: d.width,
        height: d.height,
        support_radius: d.support_radius,
        sphere_radius: a.sphere_radius,
        sphere_subdivisions: a.sphere_subdivisions,
        spheres_per_step: a.spheres_per_step,
        max_spheres: a.max_spheres,
        nominal_pairs: a.nominal_pairs,
        weighted_bin_width: 0.01,
        seed,
    };
    config.validate()?;
    let mut dataset = load_dataset(&a.dataset)?;
    if let Some(n) = a.objects {
        ensure!(n <= dataset.len(), "asked for {n} objects but the dataset has {}", dataset.len());
        dataset.truncate(n);
    }
    let outcome = run_distance_study(&dataset, &config, &progress("distance study objects", dataset.len()))?;
    let mut out = OutputSet::create(&a.out)?;
    output::write_distance_study(&mut out, &outcome)?;
    out.manifest("distance-study", seed, &config)?;
    eprintln!("{} histograms written", outcome.nominal.len() + outcome.series.len());
    out.commit();
    Ok(())
}

fn bench_compare(a: BenchCompareArgs, seed: u64) -> Result<()> {
    ensure!(a.seconds > 0.0, "seconds must be positive");
    let images = match &a.input {
        Some(p) => load_descriptor_set(p).with_context(|| format!("reading {}", p.display()))?.images,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..a.images).map(|_| random_mixed_density_image(&mut rng, a.width, a.height)).collect()
        }
    };
    let rows = DistanceFunction::ALL
        .iter()
        .map(|&f| {
            let r = bench_comparison_rate(&images, f, Duration::from_secs_f64(a.seconds))?;
            eprintln!("{}: {:.3e} comparisons/s", f.name(), r.comparisons_per_second);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = OutputSet::create(&a.out)?;
    output::write_comparison_rates(&mut out, &rows)?;
    out.manifest("bench-compare", seed, &format!("{a:?}"))?;
    out.commit();
    Ok(())
}

fn bench_generate(a: BenchGenerateArgs, seed: u64) -> Result<()> {
    let d = &a.descriptor;
    let config = DescriptorConfig::for_image(d.width, d.height, d.support_radius)?;
    let sizes = parse_list(&a.triangles, "triangles")?;
    let pieces = load_dataset(&a.dataset)?;
    let rows = bench_generation_rate(&pieces, &sizes, a.descriptors, config, seed)?;
    for r in &rows {
        eprintln!("{} triangles: {:.1} descriptors/s", r.triangles, r.descriptors_per_second);
    }
    let mut out = OutputSet::create(&a.out)?;
    output::write_generation_rates(&mut out, &rows)?;
    out.manifest("bench-generate", seed, &format!("{a:?}"))?;
    out.commit();
    Ok(())
}

fn runindex_study(a: RunindexStudyArgs, seed: u64) -> Result<()> {
    let mut config = RunIndexStudyConfig {
        corpus_size: a.corpus_size,
        width: a.width,
        height: a.height,
        needle_bits: parse_list(&a.needle_bits, "needle-bits")?,
        needles_per_bucket: a.needles,
        k: a.k,
        seed,
    };
    let (images, provenance) = match &a.input {
        Some(p) => {
            let set = load_descriptor_set(p).with_context(|| format!("reading {}", p.display()))?;
            config.width = set.width;
            config.height = set.height;
            config.corpus_size = set.len();
            let prov = (0..set.len()).map(|i| set.provenance_of(i)).collect();
            (set.images, prov)
        }
        None => synthetic_corpus(&config),
    };
    let rows = run_runindex_study(images, provenance, &config)?;
    for r in &rows {
        eprintln!(
            "{} set bits: candidates {:.1}% of corpus, {}/{} exact",
            r.needle_set_bits,
            100.0 * r.mean_candidate_fraction,
            r.exact_matches,
            r.needles
        );
    }
    let mut out = OutputSet::create(&a.out)?;
    output::write_runindex_study(&mut out, &rows)?;
    out.manifest("runindex-study", seed, &config)?;
    out.commit();
    Ok(())
}

fn synth_corpus(a: SynthCorpusArgs, seed: u64) -> Result<()> {
    if a.out.exists() && fs::read_dir(&a.out)?.next().is_some() {
        bail!("output directory {} is not empty", a.out.display());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let Err(e) = write_toy_corpus(&mut rng, &a.out, a.count) {
        let _ = fs::remove_dir_all(&a.out);
        return Err(e.into());
    }
    eprintln!("wrote {} meshes to {}", a.count, a.out.display());
    Ok(())
}
