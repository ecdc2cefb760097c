//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use common::*;
use sbcm::commands::{load_spectrograms, Context, Partition};
use sbcm::config::ExperimentConfig;
use sbcm::heatmap_io::{parse_key_values, read_heatmap};
use sbcm_core::fusion::{train_svm_poly_detailed, ScoreVector, ScoreVectorSet, SvmOptions};
use sbcm_core::gmm::{train_gmm_observed, EmOptions, GmmModel};
use sbcm_core::matrix::Matrix;
use sbcm_core::metrics::{bhattacharyya, eer, min_tdcf, normalized_tdcf, LabeledScores, TdcfCosts};
use sbcm_core::subband::{center_of_mass, Band, BandExperiment, BandGrid, HeatMap};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn desk_config() -> PathBuf {
    repo_file("configs/desk.toml")
}

fn pooled_eer(report: &str) -> f64 {
    report_rows(report).into_iter().find(|r| r.0 == "pooled").expect("pooled row").3
}

fn surrounded_cluster_fusion() -> Result<String, String> {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = desk_config();
    let c = s(&cfg);
    ok(&["--config", c, "scenario", "--out", s(d)]);
    let (tr, ev) = (d.join("train"), d.join("eval"));
    let mut eers = Vec::new();
    for kind in ["linear", "multinomial", "gmm", "svm-poly"] {
        let model = d.join(format!("{kind}.fusion"));
        ok(&[
            "--config", c, "fuse-train", "--kind", kind,
            "--scores", s(&tr.join("cm1.scores")), s(&tr.join("cm2.scores")),
            "--protocol", s(&tr.join("protocol.txt")),
            "--out", s(&model),
        ]);
        let fused = d.join(format!("{kind}.scores"));
        ok(&[
            "--config", c, "fuse-apply", "--model", s(&model),
            "--scores", s(&ev.join("cm1.scores")), s(&ev.join("cm2.scores")),
            "--out", s(&fused),
        ]);
        let report = ok(&["--config", c, "evaluate", "--scores", s(&fused), "--protocol", s(&ev.join("protocol.txt"))]);
        eers.push((kind, pooled_eer(&report)));
    }
    let elapsed = t0.elapsed();
    let detail = eers.iter().map(|(k, e)| format!("{k} {:.2}%", 100.0 * e)).collect::<Vec<_>>().join(", ");
    for (k, e) in &eers {
        match *k {
            "gmm" | "svm-poly" => ensure(*e < 0.02, || format!("{k} EER {e:.4} not below 2% ({detail})"))?,
            _ => ensure(*e > 0.15, || format!("{k} EER {e:.4} not above 15% ({detail})"))?,
        }
    }
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:.1?} ({detail})"))?;
    Ok(format!("held-out EER {detail}; {elapsed:.1?}"))
}

struct Localisation {
    _dir: tempfile::TempDir,
    data: PathBuf,
    elapsed: Duration,
    com_band: Band,
    min_band: Band,
}

fn localisation() -> &'static Result<Localisation, String> {
    static CELL: OnceLock<Result<Localisation, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        catch_unwind(|| {
            let dir = tempfile::tempdir().unwrap();
            let d = dir.path();
            let cfg = desk_config();
            let c = s(&cfg);
            let data = d.join("data");
            ok(&["--config", c, "synth", "--out", s(&data)]);
            let (tr, ev) = (data.join("train"), data.join("eval"));
            let hm = d.join("A01.heatmap.tsv");
            let com = d.join("A01.com.txt");
            let t0 = Instant::now();
            ok(&[
                "--config", c, "heatmap", "--attack", "A01",
                "--train-protocol", s(&tr.join("protocol.txt")), "--train-audio", s(&tr.join("audio")),
                "--eval-protocol", s(&ev.join("protocol.txt")), "--eval-audio", s(&ev.join("audio")),
                "--out", s(&hm),
            ]);
            ok(&["--config", c, "com", "--heatmap", s(&hm), "--out", s(&com)]);
            let elapsed = t0.elapsed();
            let kv = parse_key_values(&fs::read_to_string(&com).unwrap()).unwrap();
            let get = |k: &str| kv.iter().find(|(a, _)| a == k).unwrap().1.parse::<f64>().unwrap();
            let com_band = Band::new(get("f_min_snapped"), get("f_max_snapped"));
            let min_band = read_heatmap(&hm).unwrap().heatmap.min_cell().expect("non-empty heat-map").band;
            Localisation { _dir: dir, data, elapsed, com_band, min_band }
        })
        .map_err(panic_message)
    })
}

fn subband_localisation() -> Result<String, String> {
    let l = localisation().as_ref()?;
    let target = Band::new(2000.0, 4000.0);
    let detail = format!(
        "CoM [{:.1}, {:.1}] Hz, min cell [{}, {}] Hz, {:.1?}",
        l.com_band.f_min, l.com_band.f_max, l.min_band.f_min, l.min_band.f_max, l.elapsed
    );
    ensure(l.com_band.overlaps(&target), || format!("CoM band misses 2-4 kHz: {detail}"))?;
    ensure(l.min_band.overlaps(&target), || format!("min cell misses 2-4 kHz: {detail}"))?;
    ensure(l.elapsed < Duration::from_secs(300), || format!("too slow: {detail}"))?;
    Ok(detail)
}

fn subband_beats_mismatched_band() -> Result<String, String> {
    let l = localisation().as_ref()?;
    let cfg = ExperimentConfig::load(Some(&desk_config())).map_err(|e| e.to_string())?;
    let ctx = Context::new(cfg).map_err(|e| e.to_string())?;
    let part = |p: &str| Partition { protocol: l.data.join(p).join("protocol.txt"), audio_dir: l.data.join(p).join("audio") };
    let tr = load_spectrograms(&ctx, &part("train")).map_err(|e| e.to_string())?;
    let ev = load_spectrograms(&ctx, &part("eval")).map_err(|e| e.to_string())?;
    let template = ctx.config.frontend();
    let em = ctx.config.em("heatmap");
    let exp = BandExperiment { template: &template, em: &em, costs: ctx.config.costs(), train: &tr, eval: &ev };
    let on = exp.evaluate_cell(&l.com_band, "A01").map_err(|e| e.to_string())?;
    let off = exp.evaluate_cell(&Band::new(4000.0, 8000.0), "A01").map_err(|e| e.to_string())?;
    let detail = format!("CoM band min t-DCF {on:.4}, 4-8 kHz band {off:.4}");
    ensure(off - on >= 0.1, || format!("margin {:.4} below 0.1: {detail}", off - on))?;
    Ok(detail)
}

/// Empirical ROC points, thresholding at every distinct score and +inf.
fn roc_oracle(bona: &[f64], spoof: &[f64]) -> Vec<(f64, f64)> {
    let mut ts: Vec<f64> = bona.iter().chain(spoof).copied().collect();
    ts.push(f64::INFINITY);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts.iter()
        .map(|&t| {
            let fa = spoof.iter().filter(|&&x| x >= t).count() as f64 / spoof.len() as f64;
            let miss = bona.iter().filter(|&&x| x < t).count() as f64 / bona.len() as f64;
            (fa, miss)
        })
        .collect()
}

/// Lowest point of the diagonal inside the convex hull of the ROC points,
/// found by crossing every pair of points with the diagonal.
fn hull_eer_oracle(pts: &[(f64, f64)]) -> f64 {
    let mut best = f64::INFINITY;
    for &(x1, y1) in pts {
        for &(x2, y2) in pts {
            let (d1, d2) = (x1 - y1, x2 - y2);
            if d1 == 0.0 {
                best = best.min(x1);
            } else if d1 > 0.0 && d2 < 0.0 {
                let t = d1 / (d1 - d2);
                best = best.min(x1 + t * (x2 - x1));
            }
        }
    }
    best
}

fn random_scores(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let nb = rng.random_range(1..=50);
    let ns = rng.random_range(1..=50);
    let tied = rng.random_bool(0.5);
    let shift: f64 = rng.random_range(-1.0..3.0);
    let mut draw = |n: usize, mu: f64| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                if tied {
                    (z + mu).round()
                } else {
                    z + mu
                }
            })
            .collect()
    };
    (draw(nb, shift), draw(ns, 0.0))
}

fn metrics_oracles() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let costs = TdcfCosts::default();
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let (b, sp) = random_scores(&mut rng);
        let scores = LabeledScores::new(b.clone(), sp.clone()).map_err(|e| e.to_string())?;
        let pts = roc_oracle(&b, &sp);
        let want = hull_eer_oracle(&pts);
        let got = eer(&scores);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-10, || format!("set {i}: EER {got} vs oracle {want}"))?;
        let mut thresholds: Vec<f64> = b.iter().chain(&sp).copied().collect();
        thresholds.extend([f64::NEG_INFINITY, f64::INFINITY]);
        let exhaustive = thresholds
            .iter()
            .map(|&t| {
                let miss = b.iter().filter(|&&x| x < t).count() as f64 / b.len() as f64;
                let fa = sp.iter().filter(|&&x| x >= t).count() as f64 / sp.len() as f64;
                normalized_tdcf(&costs, miss, fa)
            })
            .fold(f64::INFINITY, f64::min);
        let m = min_tdcf(&scores, &costs).value;
        ensure(m == exhaustive, || format!("set {i}: min t-DCF {m} vs exhaustive {exhaustive}"))?;
    }
    let worked = LabeledScores::new(vec![1.0, 3.0], vec![0.0, 2.0]).unwrap();
    let (e, t) = (eer(&worked), min_tdcf(&worked, &costs).value);
    ensure(e == 0.25, || format!("worked example EER {e}"))?;
    ensure(t == 0.5, || format!("worked example min t-DCF {t}"))?;
    let by_hand = (1.0 * 0.5 + 10.0 * 0.0) / 1.0;
    ensure(t == by_hand, || format!("worked example min t-DCF {t} vs {by_hand}"))?;
    Ok(format!("1000 sets, max EER deviation {worst:.1e}; worked example EER 0.25, min t-DCF 0.5"))
}

fn bhattacharyya_closed_forms() -> Result<String, String> {
    let cases = [
        ("identical", bhattacharyya(0.3, 1.7, 0.3, 1.7), 0.0),
        ("means -1/+1, sd 1", bhattacharyya(-1.0, 1.0, 1.0, 1.0), 0.5),
        ("sd 2 vs 1", bhattacharyya(0.0, 2.0, 0.0, 1.0), 0.25 * (25.0f64 / 16.0).ln()),
    ];
    let mut out = Vec::new();
    for (name, got, want) in cases {
        let got = got.map_err(|e| e.to_string())?;
        ensure((got - want).abs() <= 1e-12, || format!("{name}: {got} vs {want}"))?;
        out.push(format!("{name} {got:.12}"));
    }
    Ok(out.join(", "))
}

fn em_monotonicity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut iterations = 0;
    for set in 0..100 {
        let k = rng.random_range(1..=8);
        let d = rng.random_range(1..=12);
        let true_k = rng.random_range(1..=8);
        let centres: Vec<Vec<f64>> = (0..true_k).map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let n = rng.random_range(10 * k..=40 * k + 50);
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let c = &centres[rng.random_range(0..true_k)];
            for &m in c {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(m + z * 0.8);
            }
        }
        let m = Matrix::from_vec(n, d, data).unwrap();
        let opts = EmOptions { n_components: k, max_iters: 30, tol: 0.0, seed: set, ..EmOptions::default() };
        let mut models: Vec<GmmModel> = Vec::new();
        let (_, trace) =
            train_gmm_observed(&[&m], &opts, |_, g| models.push(g.clone())).map_err(|e| format!("set {set}: {e}"))?;
        for (i, w) in trace.log_likelihoods.windows(2).enumerate() {
            ensure(w[1] >= w[0] - 1e-8 * w[0].abs(), || {
                format!("set {set} (K={k}, D={d}) iteration {i}: log-likelihood {} -> {}", w[0], w[1])
            })?;
        }
        for (i, g) in models.iter().enumerate() {
            let sum: f64 = g.weights().iter().sum();
            ensure((sum - 1.0).abs() < 1e-12 && g.weights().iter().all(|&w| w >= 0.0), || {
                format!("set {set} iteration {i}: weights {:?}", g.weights())
            })?;
            for c in 0..k {
                for (v, f) in g.variance(c).iter().zip(&trace.variance_floor) {
                    ensure(v >= f, || format!("set {set} iteration {i}: variance {v} below floor {f}"))?;
                }
            }
        }
        iterations += models.len();
    }
    Ok(format!("100 datasets, {iterations} EM iterations"))
}

fn com_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let eps = 1e-3;
    for case in 0..200 {
        let n_in = rng.random_range(1..6);
        let cut_in: Vec<f64> = (0..n_in).map(|i| 250.0 * i as f64).collect();
        let cut_off: Vec<f64> = (0..rng.random_range(1..6)).map(|i| 4000.0 + 500.0 * i as f64).collect();
        let grid = BandGrid::new(cut_in, cut_off, 800.0).map_err(|e| e.to_string())?;
        let mut hm = HeatMap::new(grid.clone(), "A");
        let mut cells = Vec::new();
        for b in grid.cells() {
            let v = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..2.0) };
            hm.insert(b, v).map_err(|e| e.to_string())?;
            cells.push((b, v));
        }
        let r = center_of_mass(&hm, eps).map_err(|e| e.to_string())?;
        let mass: Vec<f64> = cells.iter().map(|(_, v)| 1.0 / if *v < eps { eps } else { *v }).collect();
        let total: f64 = mass.iter().sum();
        let fx = cells.iter().zip(&mass).map(|((b, _), m)| m * b.f_min).sum::<f64>() / total;
        let fy = cells.iter().zip(&mass).map(|((b, _), m)| m * b.f_max).sum::<f64>() / total;
        let tol = 1e-12 * fy.max(1.0);
        ensure((r.f_min - fx).abs() <= tol && (r.f_max - fy).abs() <= tol, || {
            format!("case {case}: ({}, {}) vs ({fx}, {fy})", r.f_min, r.f_max)
        })?;
    }
    let one = BandGrid::new(vec![1000.0], vec![3000.0], 800.0).unwrap();
    let mut hm = HeatMap::new(one, "A");
    hm.insert(Band::new(1000.0, 3000.0), 0.37).unwrap();
    let r = center_of_mass(&hm, eps).unwrap();
    ensure(r.f_min == 1000.0 && r.f_max == 3000.0, || format!("single cell gave ({}, {})", r.f_min, r.f_max))?;
    let two = BandGrid::new(vec![0.0, 1000.0], vec![4000.0], 800.0).unwrap();
    let mut hm = HeatMap::new(two, "A");
    hm.insert(Band::new(0.0, 4000.0), 0.5).unwrap();
    hm.insert(Band::new(1000.0, 4000.0), 0.5).unwrap();
    let r = center_of_mass(&hm, eps).unwrap();
    ensure(r.f_min == 500.0 && r.f_max == 4000.0, || format!("equal masses gave ({}, {})", r.f_min, r.f_max))?;
    Ok("200 random heat-maps to 1e-12; single-cell and equal-mass midpoint exact".into())
}

fn svm_optimality() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst_sum = 0.0f64;
    for case in 0..10 {
        let separable = case % 2 == 0;
        let gap = if separable { 2.5 } else { 0.5 };
        let trials: Vec<ScoreVector> = (0..120)
            .map(|i| {
                let bona = i % 2 == 0;
                let c = if bona { gap } else { -gap };
                let scores = (0..2)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        c + 0.5 * z
                    })
                    .collect();
                ScoreVector { utterance_id: format!("u{i}"), attack_id: (!bona).then(|| "A".to_string()), scores }
            })
            .collect();
        let set = ScoreVectorSet::new(trials).map_err(|e| e.to_string())?;
        let opts = SvmOptions { degree: 3, c: 10.0, ..SvmOptions::default() };
        let (model, diag) = train_svm_poly_detailed(&set, &opts).map_err(|e| e.to_string())?;
        for &a in &diag.alphas {
            ensure((0.0..=opts.c).contains(&a), || format!("case {case}: alpha {a} outside [0, {}]", opts.c))?;
        }
        let sum: f64 = diag.alphas.iter().zip(&diag.labels).map(|(a, y)| a * y).sum();
        worst_sum = worst_sum.max(sum.abs());
        ensure(sum.abs() < 1e-8, || format!("case {case}: sum alpha*y = {sum:e}"))?;
        if separable {
            let errors = set
                .trials()
                .iter()
                .zip(&diag.labels)
                .filter(|(t, y)| model.score(&t.scores) * **y <= 0.0)
                .count();
            ensure(errors == 0, || format!("case {case}: {errors} training errors on separable data"))?;
        }
    }
    Ok(format!("10 problems, max |sum alpha*y| {worst_sum:.1e}; separable cases error-free"))
}

fn recipe(root: &Path) -> Vec<PathBuf> {
    let cfg = write(root, "tiny.toml", TINY_CONFIG);
    let spec = write(root, "synth.toml", TINY_SYNTH);
    let c = s(&cfg);
    let data = root.join("data");
    ok(&["--config", c, "synth", "--spec", s(&spec), "--out", s(&data)]);
    let (tr, ev) = (data.join("train"), data.join("eval"));
    for part in [&tr, &ev] {
        ok(&[
            "--config", c, "extract", "--protocol", s(&part.join("protocol.txt")),
            "--audio-dir", s(&part.join("audio")), "--cache-dir", s(&part.join("cache")),
        ]);
    }
    let model = root.join("cm.model");
    ok(&["--config", c, "train", "--cache-dir", s(&tr.join("cache")), "--protocol", s(&tr.join("protocol.txt")), "--out", s(&model)]);
    let mut outputs = vec![model.clone()];
    for (name, part) in [("train", &tr), ("eval", &ev)] {
        let out = root.join(format!("{name}.scores"));
        ok(&[
            "--config", c, "score", "--model", s(&model), "--cache-dir", s(&part.join("cache")),
            "--protocol", s(&part.join("protocol.txt")), "--out", s(&out),
        ]);
        outputs.push(out);
    }
    let hm = root.join("A01.heatmap.tsv");
    ok(&[
        "--config", c, "heatmap", "--attack", "A01",
        "--train-protocol", s(&tr.join("protocol.txt")), "--train-audio", s(&tr.join("audio")),
        "--eval-protocol", s(&ev.join("protocol.txt")), "--eval-audio", s(&ev.join("audio")),
        "--out", s(&hm),
    ]);
    let com = root.join("A01.com.txt");
    ok(&["--config", c, "com", "--heatmap", s(&hm), "--out", s(&com)]);
    outputs.extend([hm, com]);
    let sc = root.join("scenario");
    ok(&["--config", c, "scenario", "--out", s(&sc)]);
    for kind in ["gmm", "svm-poly"] {
        let m = root.join(format!("{kind}.fusion"));
        ok(&[
            "--config", c, "fuse-train", "--kind", kind,
            "--scores", s(&sc.join("train/cm1.scores")), s(&sc.join("train/cm2.scores")),
            "--protocol", s(&sc.join("train/protocol.txt")), "--out", s(&m),
        ]);
        let f = root.join(format!("{kind}.fused.scores"));
        ok(&[
            "--config", c, "fuse-apply", "--model", s(&m),
            "--scores", s(&sc.join("eval/cm1.scores")), s(&sc.join("eval/cm2.scores")), "--out", s(&f),
        ]);
        outputs.extend([m, f]);
    }
    outputs
}

fn determinism() -> Result<String, String> {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = recipe(a.path());
    let second = recipe(b.path());
    for (x, y) in first.iter().zip(&second) {
        let (bx, by) = (fs::read(x).unwrap(), fs::read(y).unwrap());
        ensure(bx == by, || format!("{} differs between runs", x.file_name().unwrap().to_string_lossy()))?;
    }
    Ok(format!("{} outputs byte-identical across two runs", first.len()))
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn main() {
    let checks: [(&str, Check); 9] = [
        ("surrounded-cluster-fusion", surrounded_cluster_fusion),
        ("subband-localisation", subband_localisation),
        ("subband-beats-mismatched-band", subband_beats_mismatched_band),
        ("metrics-oracles", metrics_oracles),
        ("bhattacharyya-closed-forms", bhattacharyya_closed_forms),
        ("em-monotonicity", em_monotonicity),
        ("com-oracle", com_oracle),
        ("svm-optimality", svm_optimality),
        ("determinism", determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        match catch_unwind(AssertUnwindSafe(check)).map_err(panic_message).and_then(|r| r) {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
