//! Command-line surface: generate, extract, tile, learn, eval and render.

pub mod formats;
mod render;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use crate::descriptors::PoolFeatures;
use crate::graph::{build_graph, DEFAULT_GROW_RADIUS};
use crate::learn::{learn, LearnError, Model, RankConfig, TrainingImage};
use crate::metrics::{evaluate_image, similarity_histogram, EvaluationReport, QualityTable, DEFAULT_HISTOGRAM_BINS};
use crate::synth::{
    generate_corpus, prepare_corpus, prepare_image, tile_image, training_set, BenchMethod, PreparedImage, SynthError,
    DEFAULT_ENUM_BUDGET,
};
use crate::tiler::{EnumConfig, Method, Provenance, Tiling, TilingPool, TilerError};
use formats::*;

pub use render::render_tiling;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidSpec(_) | SynthError::Pool(_) => CliError::Validation(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<TilerError> for CliError {
    fn from(e: TilerError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::NonFinite(_) => CliError::Internal(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fgtile", version, about = "Figure-ground segment tiling and rank learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Fg,
    Enum,
    Random,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one pool file per synthetic image.
    Generate {
        #[arg(long)]
        corpus_spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the corpus seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute raw features and store them in the pool file.
    Extract {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank tilings of one pool.
    Tile {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, value_enum, default_value = "fg")]
        method: MethodArg,
        /// Enumeration time limit in seconds.
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn weights from a directory of pool files with ground truth.
    Learn {
        #[arg(long)]
        train: PathBuf,
        #[arg(long = "K", short = 'K', default_value_t = 64)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        outer: usize,
        #[arg(long, default_value_t = 15)]
        inner: usize,
        /// Objective trace CSV; defaults to the weights path with a `.trace.csv` suffix.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score ranked tilings against ground truth.
    Eval {
        #[arg(long)]
        pools: PathBuf,
        #[arg(long)]
        tilings: PathBuf,
        #[arg(long, default_value_t = 64)]
        cap: usize,
        #[arg(long)]
        report: PathBuf,
        /// Similarity histogram CSV; defaults to the report path with a `.hist.csv` suffix.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Paint one tiling as a PPM image, uncovered pixels black.
    Render {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        tiling: PathBuf,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { corpus_spec, out, seed } => cmd_generate(&corpus_spec, &out, seed),
        Command::Extract { pool, out } => cmd_extract(&pool, &out),
        Command::Tile {
            pool,
            weights,
            method,
            budget,
            rng_seed,
            out,
        } => cmd_tile(&pool, &weights, method, budget, rng_seed, &out),
        Command::Learn {
            train,
            k,
            out,
            outer,
            inner,
            trace,
        } => {
            let trace = trace.unwrap_or_else(|| with_suffix(&out, ".trace.csv"));
            let config = RankConfig {
                k,
                outer_max_iters: outer,
                inner_max_iters: inner,
                ..RankConfig::default()
            };
            cmd_learn(&train, &config, &out, &trace)
        }
        Command::Eval {
            pools,
            tilings,
            cap,
            report,
            histogram,
        } => {
            let histogram = histogram.unwrap_or_else(|| with_suffix(&report, ".hist.csv"));
            cmd_eval(&pools, &tilings, cap, &report, &histogram)
        }
        Command::Render { pool, tiling, rank, out } => cmd_render(&pool, &tiling, rank, &out),
    }
}

/// `dir/name.json` -> `dir/name<suffix>`.
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Validation(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Validation(format!("{} has no .json files", dir.display())));
    }
    Ok(files)
}

fn file_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Load a pool and its raw features, extracting them when the file has none.
fn load_prepared(path: &Path) -> Result<PreparedImage, CliError> {
    let file: PoolFile = read_json(path)?;
    let (pool, features) = file.to_pool()?;
    let id = file_id(path);
    match features {
        Some(raw) => {
            let graph = build_graph(&pool, DEFAULT_GROW_RADIUS);
            Ok(PreparedImage { id, pool, graph, raw })
        }
        None => Ok(prepare_image(&id, pool)?),
    }
}

fn cmd_generate(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut spec: CorpusFile = read_json(spec_path)?;
    spec.check()?;
    if let Some(s) = seed {
        spec.corpus.seed = s;
    }
    let images = generate_corpus(&spec.corpus)?;
    let features: Vec<Option<PoolFeatures>> = if spec.planted {
        prepare_corpus(&images, true)?.into_iter().map(|p| Some(p.raw)).collect()
    } else {
        vec![None; images.len()]
    };
    images
        .par_iter()
        .zip(&features)
        .map(|(im, f)| write_json(&out.join(format!("{}.json", im.id)), &PoolFile::from_pool(&im.pool.pool, f.as_ref())))
        .collect::<Result<Vec<()>, CliError>>()?;
    println!("wrote {} pool files to {}", images.len(), out.display());
    Ok(())
}

fn cmd_extract(pool: &Path, out: &Path) -> Result<(), CliError> {
    let file: PoolFile = read_json(pool)?;
    let (p, _) = file.to_pool()?;
    let prepared = prepare_image(&file_id(pool), p)?;
    write_json(out, &PoolFile::from_pool(&prepared.pool, Some(&prepared.raw)))
}

fn normalized_image(prepared: &PreparedImage, model: &Model) -> Result<TrainingImage, CliError> {
    let features = prepared
        .raw
        .normalized(&model.unary_normalizer, &model.pairwise_normalizer)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(TrainingImage {
        graph: prepared.graph.clone(),
        features,
        quality: QualityTable::for_pool(&prepared.pool),
    })
}

fn cmd_tile(pool: &Path, weights: &Path, method: MethodArg, budget: Option<f64>, rng_seed: u64, out: &Path) -> Result<(), CliError> {
    let model = read_json::<WeightsFile>(weights)?.to_model()?;
    let prepared = load_prepared(pool)?;
    let image = normalized_image(&prepared, &model)?;
    let budget = match budget {
        Some(b) if b.is_finite() && b >= 0.0 => Some(Duration::from_secs_f64(b)),
        Some(b) => return Err(CliError::Validation(format!("budget {b} must be a non-negative number of seconds"))),
        None => Some(DEFAULT_ENUM_BUDGET),
    };
    let (bench, name) = match method {
        MethodArg::Fg => (BenchMethod::FgTiling, Method::FgTiling),
        MethodArg::Enum => (BenchMethod::EnumBudget(EnumConfig { budget, keep: None }), Method::EnumBudget),
        MethodArg::Random => (BenchMethod::ConstrainedRandom { rng_seed }, Method::ConstrainedRandom),
    };
    let start = Instant::now();
    let tilings = tile_image(&image, &model.weights, bench)?;
    let elapsed = start.elapsed();
    write_json(out, &TilingsFile::new(&tilings, name.name(), prepared.pool.len()))?;
    println!(
        "N={} mean_degree={:.3} tilings={} wall={:.3}s",
        prepared.graph.len(),
        prepared.graph.mean_degree(),
        tilings.len(),
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn cmd_learn(train: &Path, config: &RankConfig, out: &Path, trace_path: &Path) -> Result<(), CliError> {
    if config.k == 0 {
        return Err(CliError::Validation("K must be at least 1".into()));
    }
    let files = json_files(train)?;
    let prepared = files.par_iter().map(|f| load_prepared(f)).collect::<Result<Vec<_>, _>>()?;
    if let Some(p) = prepared.iter().find(|p| p.pool.ground_truth.is_empty()) {
        return Err(CliError::Validation(format!("{} has no ground truth", p.id)));
    }
    let (images, (un, pn)) = training_set(&prepared, None)?;
    let state = learn(&images, config)?;
    let model = Model {
        weights: state.weights.clone(),
        unary_normalizer: un,
        pairwise_normalizer: pn,
    };
    let record = TrainingRecord {
        images: prepared.iter().map(|p| p.id.clone()).collect(),
        k: config.k,
        outer_max_iters: config.outer_max_iters,
        inner_max_iters: config.inner_max_iters,
        trace: state.trace.clone(),
    };
    write_json(out, &WeightsFile::new(&model, Some(record)))?;
    let mut csv = String::from("iteration,objective,first,ois,pools_replaced\n");
    for r in &state.trace {
        let _ = writeln!(csv, "{},{},{},{},{}", r.iteration, r.objective, r.first, r.ois, r.pools_replaced);
    }
    write_atomic(trace_path, csv.as_bytes())?;
    let last = state.trace.last().expect("trace has the initial row");
    println!("objective={:.6} first={:.4} ois={:.4} rounds={}", last.objective, last.first, last.ois, state.trace.len() - 1);
    Ok(())
}

fn pool_of(members: Vec<Vec<usize>>, scores: &[f64]) -> TilingPool {
    let provenance = vec![
        Provenance {
            seed: None,
            method: Method::FgTiling,
        };
        members.len()
    ];
    TilingPool {
        tilings: members
            .into_iter()
            .zip(scores)
            .map(|(m, &score)| Tiling {
                members: m,
                score,
                maximal: true,
            })
            .collect(),
        provenance,
    }
}

fn cmd_eval(pools: &Path, tilings: &Path, cap: usize, report: &Path, histogram: &Path) -> Result<(), CliError> {
    if cap == 0 {
        return Err(CliError::Validation("cap must be at least 1".into()));
    }
    let files = json_files(pools)?;
    let rows = files
        .par_iter()
        .map(|f| {
            let (pool, _) = read_json::<PoolFile>(f)?.to_pool()?;
            let id = file_id(f);
            if pool.ground_truth.is_empty() {
                return Err(CliError::Validation(format!("{id} has no ground truth")));
            }
            let tpath = tilings.join(format!("{id}.json"));
            if !tpath.exists() {
                return Err(CliError::Validation(format!("no tilings for image {id} in {}", tilings.display())));
            }
            let tf: TilingsFile = read_json(&tpath)?;
            let members = tf.members(pool.len())?;
            for m in &members {
                for (a, &i) in m.iter().enumerate() {
                    for &j in &m[a + 1..] {
                        if pool.segments[i].intersects(&pool.segments[j]).unwrap_or(true) {
                            return Err(CliError::Validation(format!("{id}: tiling members {i} and {j} overlap")));
                        }
                    }
                }
            }
            let scores: Vec<f64> = tf.tilings.iter().map(|t| t.score).collect();
            let tp = pool_of(members, &scores);
            let table = QualityTable::for_pool(&pool);
            let result = evaluate_image(&table, &tp);
            let hist = similarity_histogram(&pool.segments, &tp, pool.width(), pool.height(), DEFAULT_HISTOGRAM_BINS);
            Ok((id, result, hist))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let names: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
    let results: Vec<_> = rows.iter().map(|r| r.1.clone()).collect();
    let mut hist = vec![0u64; DEFAULT_HISTOGRAM_BINS];
    for r in &rows {
        for (a, b) in hist.iter_mut().zip(&r.2) {
            *a += b;
        }
    }
    let rep = EvaluationReport::new(&names, &results, cap, hist);
    write_json(
        report,
        &ReportFile {
            version: FORMAT_VERSION,
            report: rep.clone(),
        },
    )?;
    let mut csv = String::from("bin_low,bin_high,count\n");
    let bins = rep.histogram.len();
    for (b, count) in rep.histogram.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{count}", b as f64 / bins as f64, (b + 1) as f64 / bins as f64);
    }
    write_atomic(histogram, csv.as_bytes())?;
    println!("images={} ois={:.4} first={:.4} bis={:.4}", rep.images.len(), rep.ois, rep.first, rep.bis);
    Ok(())
}

fn cmd_render(pool: &Path, tiling: &Path, rank: usize, out: &Path) -> Result<(), CliError> {
    let (p, _) = read_json::<PoolFile>(pool)?.to_pool()?;
    let members = read_json::<TilingsFile>(tiling)?.members(p.len())?;
    if rank == 0 || rank > members.len() {
        return Err(CliError::Validation(format!("rank {rank} outside 1..={}", members.len())));
    }
    let img = render_tiling(&p.segments, &members[rank - 1], p.width(), p.height());
    write_atomic(out, &img.to_ppm())
}
