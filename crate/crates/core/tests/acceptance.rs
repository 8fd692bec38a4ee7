//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use fgtile::descriptors::{detect_t_junctions, junction_strength, SegmentShape};
use fgtile::graph::ConsistencyGraph;
use fgtile::learn::{init_weights, learn, rank_weight, Model, RankConfig, TrainingImage, WeightingKind};
use fgtile::mask::SegmentMask;
use fgtile::metrics::{covering, evaluate_image, first, EvaluationReport, QualityTable};
use fgtile::pool::{GroundTruthSegmentation, SegmentPool};
use fgtile::synth::{
    generate_corpus, generate_pool, generate_scene, occluding_bar_scene, prepare_corpus, prepare_image, schema_for, tile_image,
    training_set, BarPlacement, BenchMethod, CorpusSpec, Layout, PoolSpec, PreparedImage, SceneSpec,
};
use fgtile::tiler::{
    constrained_random, enum_budget, fg_tiling, fg_tiling_with_stats, greedy_maximal, local_search, score, EnumConfig, FgConfig,
    ScoreTable, Tiling, TilingPool, WeightVector, DEFAULT_MAX_PASSES,
};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- fixtures

/// Small pool with 2..=15 segments and random-weight scores.
struct SmallCase {
    graph: ConsistencyGraph,
    table: ScoreTable,
    bitmaps: Vec<Vec<bool>>,
}

fn small_prepared(rng: &mut ChaCha8Rng, max_n: usize) -> PreparedImage {
    let layouts = [Layout::Voronoi, Layout::RectGrid, Layout::OccludingShapes];
    let scene = generate_scene(&SceneSpec {
        width: 48,
        height: 36,
        k: rng.random_range(2..=5),
        layout: layouts[rng.random_range(0..3)],
        colors: Vec::new(),
        noise_std: 8.0,
        shading: false,
        seed: rng.next_u64(),
    })
    .unwrap();
    let spec = PoolSpec {
        exact: 1,
        morphed: rng.random_range(0..=2),
        translated: rng.random_range(0..=1),
        merged: rng.random_range(0..=1),
        distractors: rng.random_range(2..=8),
        seed: rng.next_u64(),
    };
    let synthetic = generate_pool(&scene, &spec).unwrap();
    let mut segments = synthetic.pool.segments;
    segments.shuffle(rng);
    let n = rng.random_range(2..=max_n).min(segments.len());
    segments.truncate(n);
    let pool = SegmentPool::new(scene.image, segments, synthetic.pool.ground_truth).unwrap();
    prepare_image("case", pool).unwrap()
}

fn random_weights(prepared: &PreparedImage, rng: &mut ChaCha8Rng) -> WeightVector {
    let us = schema_for(&prepared.raw.unary_schema, prepared.raw.unary[0].len());
    let ps = schema_for(&prepared.raw.pairwise_schema, 0);
    let zero = WeightVector::zeros(&us, &ps);
    let flat: Vec<f64> = (0..zero.len()).map(|_| rng.sample(StandardNormal)).collect();
    zero.with_flat(&flat)
}

/// `count` small cases sharing normalizers fitted on the whole batch.
fn small_cases(seed: u64, count: usize) -> Vec<SmallCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prepared: Vec<PreparedImage> = (0..count).map(|_| small_prepared(&mut rng, 15)).collect();
    let (images, _) = training_set(&prepared, None).unwrap();
    prepared
        .iter()
        .zip(&images)
        .map(|(p, im)| {
            let weights = random_weights(p, &mut rng);
            SmallCase {
                graph: im.graph.clone(),
                table: ScoreTable::new(&im.graph, &im.features, &weights).unwrap(),
                bitmaps: p.pool.segments.iter().map(SegmentMask::to_bitmap).collect(),
            }
        })
        .collect()
}

fn disjoint(a: &[bool], b: &[bool]) -> bool {
    a.iter().zip(b).all(|(x, y)| !(*x && *y))
}

/// Dense check: members pairwise pixel-disjoint and no other segment fits.
fn dense_violation(bitmaps: &[Vec<bool>], members: &[usize]) -> Option<String> {
    for (k, &i) in members.iter().enumerate() {
        for &j in &members[k + 1..] {
            if !disjoint(&bitmaps[i], &bitmaps[j]) {
                return Some(format!("members {i} and {j} overlap"));
            }
        }
    }
    for s in 0..bitmaps.len() {
        if !members.contains(&s) && members.iter().all(|&m| disjoint(&bitmaps[s], &bitmaps[m])) {
            return Some(format!("segment {s} extends {members:?}"));
        }
    }
    None
}

/// All maximal cliques of the pixel-disjointness graph (Bron-Kerbosch with pivoting).
fn maximal_cliques(bitmaps: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = bitmaps.len();
    let adj: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| i != j && disjoint(&bitmaps[i], &bitmaps[j])).collect())
        .collect();
    fn bk(r: &mut Vec<usize>, p: Vec<usize>, x: Vec<usize>, adj: &[Vec<bool>], out: &mut Vec<Vec<usize>>) {
        if p.is_empty() && x.is_empty() {
            let mut c = r.clone();
            c.sort();
            out.push(c);
            return;
        }
        let pivot = *p.iter().chain(&x).max_by_key(|&&u| p.iter().filter(|&&v| adj[u][v]).count()).unwrap();
        let (mut p, mut x) = (p, x);
        for v in p.clone().into_iter().filter(|&v| !adj[pivot][v]) {
            r.push(v);
            let np = p.iter().copied().filter(|&u| adj[v][u]).collect();
            let nx = x.iter().copied().filter(|&u| adj[v][u]).collect();
            bk(r, np, nx, adj, out);
            r.pop();
            p.retain(|&u| u != v);
            x.push(v);
        }
    }
    let mut out = Vec::new();
    bk(&mut Vec::new(), (0..n).collect(), Vec::new(), &adj, &mut out);
    out
}

fn standard_prepared(images: usize, seed: u64, planted: bool) -> Vec<PreparedImage> {
    let corpus = generate_corpus(&CorpusSpec::standard(images, seed)).unwrap();
    prepare_corpus(&corpus, planted).unwrap()
}

fn k8(outer: usize) -> RankConfig {
    RankConfig {
        k: 8,
        outer_max_iters: outer,
        ..RankConfig::default()
    }
}

fn tile_all(images: &[TrainingImage], weights: &WeightVector, method: BenchMethod) -> Vec<TilingPool> {
    images.iter().map(|im| tile_image(im, weights, method).unwrap()).collect()
}

fn first_of(images: &[TrainingImage], pools: &[TilingPool]) -> f64 {
    let results: Vec<_> = images.iter().zip(pools).map(|(im, p)| evaluate_image(&im.quality, p)).collect();
    first(&results)
}

// ---------------------------------------------------------------- criteria

fn c1_maximality() -> Outcome {
    let start = Instant::now();
    let (mut checked, mut violations) = (0usize, Vec::new());
    for (case_id, c) in small_cases(101, 200).iter().enumerate() {
        let pools = [
            ("fg", fg_tiling(&c.graph, &c.table, &FgConfig::default())),
            ("enum", enum_budget(&c.graph, &c.table, &EnumConfig::default())),
            ("random", constrained_random(&c.graph, &c.table, case_id as u64)),
        ];
        for (name, pool) in &pools {
            for t in &pool.tilings {
                checked += 1;
                if let Some(v) = dense_violation(&c.bitmaps, &t.members) {
                    violations.push(format!("case {case_id} {name}: {v}"));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        violations.is_empty() && secs < 60.0,
        format!("{checked} tilings, {} violations {:?}, {secs:.1}s", violations.len(), violations.first()),
    )
}

fn c2_optimality() -> Outcome {
    let start = Instant::now();
    let (mut at_opt, mut near_opt) = (0usize, 0usize);
    let trials = 100;
    for c in small_cases(202, trials) {
        let opt = maximal_cliques(&c.bitmaps)
            .iter()
            .map(|m| score(m, &c.graph, &c.table).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let top = fg_tiling(&c.graph, &c.table, &FgConfig::default()).tilings[0].score;
        if top >= opt - 1e-9 * (1.0 + opt.abs()) {
            at_opt += 1;
        }
        // within 10% of the optimum, measured on its magnitude
        if top >= opt - 0.1 * opt.abs() - 1e-9 {
            near_opt += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        at_opt * 100 >= 60 * trials && near_opt * 100 >= 95 * trials && secs < 300.0,
        format!("optimum reached {at_opt}/{trials}, within 10% {near_opt}/{trials}, {secs:.1}s"),
    )
}

fn c3_local_search() -> Outcome {
    let (mut runs, mut bad, mut max_passes, mut improved) = (0usize, Vec::new(), 0usize, 0usize);
    for (case_id, c) in small_cases(303, 100).iter().enumerate() {
        let (_, stats) = fg_tiling_with_stats(&c.graph, &c.table, &FgConfig::default());
        for seed in 0..c.graph.len() {
            let t = greedy_maximal(seed, c.table.order(), &c.graph, &c.table);
            let (after, st) = local_search(&t, seed, &c.graph, &c.table, DEFAULT_MAX_PASSES);
            let before = score(&t.members, &c.graph, &c.table).unwrap();
            let now = score(&after.members, &c.graph, &c.table).unwrap();
            runs += 1;
            max_passes = max_passes.max(st.passes).max(stats[seed].passes);
            improved += usize::from(now > before);
            if now < before || st.score_after < st.score_before || stats[seed].score_after < stats[seed].score_before {
                bad.push(format!("case {case_id} seed {seed}: {before} -> {now}"));
            }
            if !after.members.contains(&seed) || dense_violation(&c.bitmaps, &after.members).is_some() {
                bad.push(format!("case {case_id} seed {seed}: result is not a maximal clique with its seed"));
            }
        }
    }
    check(
        bad.is_empty() && max_passes <= DEFAULT_MAX_PASSES && DEFAULT_MAX_PASSES == 10,
        format!("{runs} runs, {improved} improved, max passes {max_passes}, decreases {:?}", bad.first()),
    )
}

fn c4_formulas() -> Outcome {
    let w = |i| rank_weight(WeightingKind::ReciprocalDecay, 64, i);
    let oracle = |i: usize| 1.0 / (1.0 + (i as f64 - 1.0) / 63.0);
    let max_err = (1..=64).map(|i| (w(i) - oracle(i)).abs()).fold(0.0, f64::max);
    let b = junction_strength(FRAC_PI_2);
    check(
        (w(1) - 1.0).abs() <= 1e-12 && (w(64) - 0.5).abs() <= 1e-12 && max_err <= 1e-12 && b == 1.0,
        format!("w(64,1)={} w(64,64)={} max deviation {max_err:e}, b(pi/2)={b}", w(1), w(64)),
    )
}

struct Fixture {
    width: u32,
    height: u32,
    segments: Vec<SegmentMask>,
    gts: Vec<GroundTruthSegmentation>,
}

fn random_fixture(rng: &mut ChaCha8Rng) -> Fixture {
    let (width, height) = (rng.random_range(4..=12), rng.random_range(4..=10));
    let px = (width * height) as usize;
    let gts = (0..rng.random_range(1..=2))
        .map(|_| {
            let k = rng.random_range(1..=4u32);
            let labels = (0..px).map(|_| rng.random_range(0..k)).collect();
            GroundTruthSegmentation::from_labels(width, height, labels).unwrap()
        })
        .collect();
    let segments = (0..rng.random_range(2..=8))
        .map(|_| {
            let density = rng.random_range(0.1..0.8);
            let mut bits: Vec<bool> = (0..px).map(|_| rng.random_bool(density)).collect();
            bits[rng.random_range(0..px)] = true;
            SegmentMask::from_bitmap(width, height, &bits).unwrap()
        })
        .collect();
    Fixture { width, height, segments, gts }
}

fn dense_iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Per-pixel covering: every ground-truth region weighted by its pixel count.
fn dense_covering(segs: &[Vec<bool>], labels: &[u32]) -> f64 {
    let mut distinct: Vec<u32> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut total = 0.0;
    for l in distinct {
        let region: Vec<bool> = labels.iter().map(|&x| x == l).collect();
        let size = region.iter().filter(|&&b| b).count() as f64;
        let best = segs.iter().map(|s| dense_iou(s, &region)).fold(0.0, f64::max);
        total += size * best;
    }
    total / labels.len() as f64
}

fn dense_quality(f: &Fixture, members: &[usize]) -> f64 {
    let segs: Vec<Vec<bool>> = members.iter().map(|&m| f.segments[m].to_bitmap()).collect();
    f.gts.iter().map(|g| dense_covering(&segs, g.labels())).sum::<f64>() / f.gts.len() as f64
}

fn c5_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut max_err, mut chain_ok, mut reports) = (0.0f64, true, 0usize);
    for _ in 0..50 {
        let cap = rng.random_range(1..=5);
        let mut results = Vec::new();
        let (mut dense_best, mut dense_first, mut dense_bis) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..rng.random_range(1..=4) {
            let f = random_fixture(&mut rng);
            let n = f.segments.len();
            for s in &f.segments {
                for g in &f.gts {
                    let sb = s.to_bitmap();
                    for (reg, &label) in g.regions().iter().zip(g.region_labels()) {
                        let rb: Vec<bool> = g.labels().iter().map(|&x| x == label).collect();
                        max_err = max_err.max((s.overlap(reg).unwrap() - dense_iou(&sb, &rb)).abs());
                    }
                }
            }
            for g in &f.gts {
                let subset: Vec<&SegmentMask> = f.segments.iter().filter(|_| rng.random_bool(0.5)).collect();
                let dense = dense_covering(&subset.iter().map(|s| s.to_bitmap()).collect::<Vec<_>>(), g.labels());
                max_err = max_err.max((covering(&subset, g) - dense).abs());
            }
            let tilings: Vec<Tiling> = (0..rng.random_range(1..=6))
                .map(|_| {
                    let mut members: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.4)).collect();
                    if members.is_empty() {
                        members.push(rng.random_range(0..n));
                    }
                    Tiling {
                        members,
                        score: rng.random_range(-1.0..1.0),
                        maximal: true,
                    }
                })
                .collect();
            let pool = TilingPool::from_candidates(tilings.into_iter().map(|t| {
                (
                    t,
                    fgtile::tiler::Provenance {
                        seed: None,
                        method: fgtile::tiler::Method::FgTiling,
                    },
                )
            }));
            let table = QualityTable::new(&f.segments, &f.gts);
            let qs: Vec<f64> = pool.tilings.iter().map(|t| dense_quality(&f, &t.members)).collect();
            for (t, q) in pool.tilings.iter().zip(&qs) {
                max_err = max_err.max((table.quality(&t.members) - q).abs());
            }
            let mut union: Vec<usize> = pool.tilings.iter().flat_map(|t| t.members.clone()).collect();
            union.sort_unstable();
            union.dedup();
            dense_best.push(qs.iter().take(cap).copied().fold(0.0, f64::max));
            dense_first.push(qs[0]);
            dense_bis.push(dense_quality(&f, &union));
            results.push(evaluate_image(&table, &pool));
            let _ = (f.width, f.height);
        }
        let names: Vec<String> = (0..results.len()).map(|i| format!("f{i}")).collect();
        let report = EvaluationReport::new(&names, &results, cap, Vec::new());
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        max_err = max_err
            .max((report.ois - mean(&dense_best)).abs())
            .max((report.first - mean(&dense_first)).abs())
            .max((report.bis - mean(&dense_bis)).abs());
        chain_ok &= report.first <= report.ois && report.ois <= report.bis;
        reports += 1;
    }
    check(max_err <= 1e-9 && chain_ok, format!("50 fixtures, {reports} reports, max deviation {max_err:e}, chain holds: {chain_ok}"))
}

fn c6_learning() -> Outcome {
    let start = Instant::now();
    let (images, _) = training_set(&standard_prepared(20, 61, false), None).unwrap();
    let state = learn(&images, &k8(4)).unwrap();
    let objectives: Vec<f64> = state.trace.iter().map(|r| r.objective).collect();
    let monotone = objectives.windows(2).all(|w| w[1] >= w[0] - 1e-6);

    let (planted, _) = training_set(&standard_prepared(20, 62, true), None).unwrap();
    let pstate = learn(&planted, &k8(4)).unwrap();
    let reached = pstate.trace.iter().filter(|r| r.iteration <= 4).map(|r| r.first).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    check(
        monotone && reached >= 0.95 && secs < 600.0,
        format!(
            "objective trace {:?}, planted First {reached:.4} ({} rounds), {secs:.1}s",
            objectives.iter().map(|o| format!("{o:.4}")).collect::<Vec<_>>(),
            pstate.trace.len() - 1
        ),
    )
}

fn c7_baselines() -> Outcome {
    let (images, _) = training_set(&standard_prepared(20, 71, false), None).unwrap();
    let weights = init_weights(&images).unwrap();
    let mean_q = |pools: &[TilingPool]| {
        let results: Vec<_> = images.iter().zip(pools).map(|(im, p)| evaluate_image(&im.quality, p)).collect();
        fgtile::metrics::mean_quality(&results)
    };
    let fg = mean_q(&tile_all(&images, &weights, BenchMethod::FgTiling));
    let randoms: Vec<f64> = (0..5)
        .map(|s| mean_q(&tile_all(&images, &weights, BenchMethod::ConstrainedRandom { rng_seed: s })))
        .collect();
    let fg_wins = randoms.iter().all(|&r| fg > r);

    let small = CorpusSpec {
        images: 20,
        scene: SceneSpec {
            width: 80,
            height: 60,
            k: 4,
            layout: Layout::Voronoi,
            colors: Vec::new(),
            noise_std: 20.0,
            shading: false,
            seed: 0,
        },
        pool: PoolSpec {
            exact: 0,
            morphed: 2,
            translated: 1,
            merged: 0,
            distractors: 3,
            seed: 0,
        },
        seed: 72,
    };
    let prepared = prepare_corpus(&generate_corpus(&small).unwrap(), false).unwrap();
    let max_n = prepared.iter().map(|p| p.pool.len()).max().unwrap();
    let (simgs, _) = training_set(&prepared, None).unwrap();
    let sw = init_weights(&simgs).unwrap();
    let unlimited = BenchMethod::EnumBudget(EnumConfig { budget: None, keep: None });
    let ois_of = |pools: &[TilingPool]| {
        let results: Vec<_> = simgs.iter().zip(pools).map(|(im, p)| evaluate_image(&im.quality, p)).collect();
        fgtile::metrics::ois(&results, usize::MAX)
    };
    let enum_ois = ois_of(&tile_all(&simgs, &sw, unlimited));
    let fg_ois = ois_of(&tile_all(&simgs, &sw, BenchMethod::FgTiling));
    check(
        fg_wins && max_n <= 15 && enum_ois >= fg_ois,
        format!(
            "mean quality fg {fg:.4} vs random {:?}; N<={max_n}: enum OIS {enum_ois:.4} vs fg OIS {fg_ois:.4}",
            randoms.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn c8_rank_learning() -> Outcome {
    let mut rows = Vec::new();
    let mut wins = 0;
    for seed in 0..5u64 {
        let train_prep = standard_prepared(40, 800 + seed, false);
        let test_prep = standard_prepared(20, 900 + seed, false);
        let (train, (un, pn)) = training_set(&train_prep, None).unwrap();
        let init = init_weights(&train).unwrap();
        let learned = learn(&train, &k8(4)).unwrap().weights;
        let model = Model {
            weights: init.clone(),
            unary_normalizer: un,
            pairwise_normalizer: pn,
        };
        let (test, _) = training_set(&test_prep, Some(&model)).unwrap();
        let f0 = first_of(&test, &tile_all(&test, &init, BenchMethod::FgTiling));
        let f1 = first_of(&test, &tile_all(&test, &learned, BenchMethod::FgTiling));
        wins += usize::from(f1 > f0);
        rows.push(format!("{f0:.4}->{f1:.4}"));
    }
    check(wins == 5, format!("held-out First init->learned per seed {rows:?}"))
}

fn c9_t_junctions() -> Outcome {
    let placements = [
        (110, 90, (20, 20, 70, 90), true, 45, 60),
        (110, 90, (20, 20, 70, 90), false, 35, 50),
        (140, 100, (30, 25, 80, 110), true, 50, 62),
        (140, 100, (15, 40, 85, 100), false, 40, 56),
        (96, 96, (24, 24, 72, 72), true, 40, 52),
        (96, 96, (24, 24, 72, 72), false, 44, 58),
    ];
    let (mut expected, mut hit, mut detections, mut owned) = (0usize, 0usize, 0usize, 0usize);
    for (i, &(w, h, square, vertical, start, end)) in placements.iter().enumerate() {
        let bs = occluding_bar_scene(w, h, BarPlacement { square, vertical, start, end }, 6.0, i as u64).unwrap();
        let regions = bs.scene.ground_truth.regions();
        let bar = SegmentShape::new(&regions[bs.bar as usize], 4);
        let sq = SegmentShape::new(&regions[bs.square as usize], 4);
        let ids = (bs.bar as usize, bs.square as usize);
        let found = detect_t_junctions(&bar, &sq, ids, 4);
        detections += found.len();
        owned += found.iter().filter(|t| t.leg_owner == Some(ids.1)).count();
        for &(r, c) in &bs.junctions {
            expected += 1;
            let near = found.iter().any(|t| {
                let d = ((t.location.0 - r).powi(2) + (t.location.1 - c).powi(2)).sqrt();
                d <= 2.0 && (t.alpha - FRAC_PI_2).abs() <= 0.2
            });
            hit += usize::from(near);
        }
    }
    check(
        hit * 10 >= expected * 9 && detections > 0 && owned * 10 >= detections * 9,
        format!("{hit}/{expected} junctions found within 2 px and 0.2 rad, leg owner correct {owned}/{detections}"),
    )
}

fn median_secs(mut f: impl FnMut() -> Duration) -> f64 {
    let mut t: Vec<f64> = (0..3).map(|_| f().as_secs_f64()).collect();
    t.sort_by(f64::total_cmp);
    t[1]
}

fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> (ConsistencyGraph, ScoreTable) {
    let mut edges = Vec::new();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
                if rng.random_bool(0.3) {
                    pairs.push(((i, j), rng.random_range(-0.5..0.5)));
                }
            }
        }
    }
    let neighbors: Vec<_> = pairs.iter().map(|p| p.0).collect();
    let graph = ConsistencyGraph::from_edges(n, &edges, &neighbors).unwrap();
    let unary = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (graph, ScoreTable::from_parts(unary, &pairs))
}

/// At most 200 segments at 481x321 over `k` Voronoi regions.
fn perf_pool(k: usize, spec: PoolSpec, rng: &mut ChaCha8Rng) -> (TrainingImage, usize) {
    let scene = generate_scene(&SceneSpec {
        width: 481,
        height: 321,
        k,
        layout: Layout::Voronoi,
        colors: Vec::new(),
        noise_std: 20.0,
        shading: false,
        seed: rng.next_u64(),
    })
    .unwrap();
    let pool = generate_pool(&scene, &spec).unwrap().pool;
    let mut segments = pool.segments;
    segments.shuffle(rng);
    segments.truncate(200);
    let n = segments.len();
    let prepared = prepare_image("perf", SegmentPool::new(pool.image, segments, pool.ground_truth).unwrap()).unwrap();
    let (mut images, _) = training_set(std::slice::from_ref(&prepared), None).unwrap();
    (images.remove(0), n)
}

fn c10_performance() -> Outcome {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let spread = PoolSpec {
        exact: 1,
        morphed: 3,
        translated: 2,
        merged: 0,
        distractors: 40,
        seed: 11,
    };
    let stacked = PoolSpec {
        exact: 1,
        morphed: 12,
        translated: 10,
        merged: 3,
        distractors: 45,
        seed: 12,
    };
    let mut real = Vec::new();
    for (k, spec) in [(30, spread), (6, stacked)] {
        let (im, n) = perf_pool(k, spec, &mut rng);
        let weights = init_weights(std::slice::from_ref(&im)).unwrap();
        let table = ScoreTable::new(&im.graph, &im.features, &weights).unwrap();
        let secs = median_secs(|| {
            let t = Instant::now();
            single.install(|| fg_tiling(&im.graph, &table, &FgConfig::default()));
            t.elapsed()
        });
        real.push((n, im.graph.mean_degree(), secs));
    }

    let (sparse_g, sparse_t) = random_graph(200, 0.1, &mut rng);
    let (dense_g, dense_t) = random_graph(200, 0.2, &mut rng);
    let time = |g: &ConsistencyGraph, t: &ScoreTable| {
        median_secs(|| {
            let s = Instant::now();
            single.install(|| fg_tiling(g, t, &FgConfig::default()));
            s.elapsed()
        })
    };
    let (ts, td) = (time(&sparse_g, &sparse_t), time(&dense_g, &dense_t));
    let ratio = td / ts;
    check(
        real.iter().all(|&(n, _, secs)| n == 200 && secs < 5.0) && ratio <= 10.0,
        format!(
            "481x321 pools (N, mean degree, seconds) {:?}; degree {:.1} -> {:.1}: {ts:.3}s -> {td:.3}s (x{ratio:.2})",
            real.iter().map(|(n, d, s)| format!("({n}, {d:.1}, {s:.3})")).collect::<Vec<_>>(),
            sparse_g.mean_degree(),
            dense_g.mean_degree()
        ),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fgtile")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn c11_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let spec = root.join("spec.json");
    let corpus = json!({
        "version": 1,
        "corpus": {
            "images": 3,
            "seed": 11,
            "scene": {"width": 80, "height": 60, "k": 4, "layout": "occluding_shapes", "noise_std": 10.0, "shading": true, "seed": 0},
            "pool": {"exact": 1, "morphed": 1, "translated": 1, "merged": 1, "distractors": 4, "seed": 0}
        }
    });
    fs::write(&spec, corpus.to_string()).unwrap();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let mut compared = 0usize;
    let mut mismatches = Vec::new();
    for run in ["a", "b"] {
        let d = root.join(run);
        let pools = d.join("pools");
        run_cli(&["generate", "--corpus-spec", &s(&spec), "--out", &s(&pools)])?;
        let first_pool = files_under(&pools)[0].clone();
        run_cli(&["extract", "--pool", &s(&first_pool), "--out", &s(&d.join("extracted.json"))])?;
        let weights = d.join("w.json");
        run_cli(&["learn", "--train", &s(&pools), "--K", "4", "--out", &s(&weights), "--outer", "2"])?;
        for method in ["fg", "enum", "random"] {
            let dir = d.join(format!("tilings_{method}"));
            for f in files_under(&pools) {
                let out = dir.join(f.file_name().unwrap());
                run_cli(&["tile", "--pool", &s(&f), "--weights", &s(&weights), "--method", method, "--rng-seed", "5", "--out", &s(&out)])?;
            }
            run_cli(&["eval", "--pools", &s(&pools), "--tilings", &s(&dir), "--report", &s(&d.join(format!("report_{method}.json")))])?;
        }
        let t0 = files_under(&d.join("tilings_fg"))[0].clone();
        run_cli(&["render", "--pool", &s(&first_pool), "--tiling", &s(&t0), "--rank", "1", "--out", &s(&d.join("r.ppm"))])?;
    }
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
        for p in files_under(dir) {
            if p.is_dir() {
                walk(&p, out);
            } else {
                out.push(p);
            }
        }
    }
    let (mut fa, mut fb) = (Vec::new(), Vec::new());
    walk(&root.join("a"), &mut fa);
    walk(&root.join("b"), &mut fb);
    let rel = |base: &Path, v: &[PathBuf]| v.iter().map(|p| p.strip_prefix(base).unwrap().to_path_buf()).collect::<Vec<_>>();
    if rel(&root.join("a"), &fa) != rel(&root.join("b"), &fb) {
        return Err("runs produced different file sets".into());
    }
    for (x, y) in fa.iter().zip(&fb) {
        compared += 1;
        if fs::read(x).unwrap() != fs::read(y).unwrap() {
            mismatches.push(x.strip_prefix(root).unwrap().display().to_string());
        }
    }
    check(mismatches.is_empty(), format!("{compared} output files compared, differing: {mismatches:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("maximality", c1_maximality),
        ("optimality proximity", c2_optimality),
        ("monotone local search", c3_local_search),
        ("formula values", c4_formulas),
        ("metric oracles", c5_metrics),
        ("learning progress", c6_learning),
        ("baseline ordering", c7_baselines),
        ("rank-learning effect", c8_rank_learning),
        ("t-junction detector", c9_t_junctions),
        ("performance envelope", c10_performance),
        ("cli determinism", c11_determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
