//! The experiment commands. Each takes the resolved config and explicit paths,
//! writes its outputs (plus a `.config.toml` sidecar), and returns a summary.

use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use sbcm_core::frontend::{LfccExtractor, Spectrogram};
use sbcm_core::fusion::{
    fuse, train_gmm_fusion, train_linear_fusion, train_multinomial_fusion, train_svm_poly, FusionKind, FusionModel,
};
use sbcm_core::seed;
use sbcm_core::subband::{assemble_heatmap, center_of_mass, resolution_sweep, BandExperiment, LabeledSpectrogram, SweepRow};
use sbcm_core::synth::{synth_scenario, synth_utterance};
use sbcm_core::{CmPair, FeatureMatrix, Trial};

use crate::audio::{read_wav, write_wav};
use crate::config::{ExperimentConfig, ScenarioFile, SynthFile};
use crate::error::{write_atomic, Error, Result};
use crate::features::{cache_path, read_features, write_features};
use crate::heatmap_io::{format_com_report, read_heatmap, write_com_report, write_heatmap, HeatMapFile};
use crate::manifest::{write_manifest, ManifestEntry};
use crate::model_io::{read_cm, read_fusion, write_cm, write_fusion};
use crate::protocol::{read_protocol, write_protocol};
use crate::scores::{
    align, check_against_protocol, evaluate, format_hash, format_report, read_scores, write_scores, EvalRow,
    ScoreEntry, ScoreFile,
};

/// Resolved configuration plus its hash.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ExperimentConfig,
    pub hash: u64,
}

impl Context {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let hash = config.hash();
        Ok(Context { config, hash })
    }

    fn sidecar(&self, output: &Path) -> Result<()> {
        self.config.write_sidecar(output).map(|_| ())
    }
}

/// Audio of one partition: a protocol and the directory holding `<utterance>.wav`.
#[derive(Debug, Clone)]
pub struct Partition {
    pub protocol: PathBuf,
    pub audio_dir: PathBuf,
}

pub fn wav_path(audio_dir: &Path, utterance_id: &str) -> PathBuf {
    audio_dir.join(format!("{utterance_id}.wav"))
}

fn load_checked_wav(ctx: &Context, path: &Path) -> Result<sbcm_core::Waveform> {
    let w = read_wav(path)?;
    if w.sample_rate() != ctx.config.frontend.sample_rate {
        return Err(Error::format(
            path,
            format!("sample rate {} Hz, config expects {} Hz", w.sample_rate(), ctx.config.frontend.sample_rate),
        ));
    }
    Ok(w)
}

/// Extracts features for every protocol trial into the cache directory.
pub fn extract(ctx: &Context, protocol: &Path, audio_dir: &Path, cache_dir: &Path) -> Result<usize> {
    let trials = read_protocol(protocol)?;
    let ex = LfccExtractor::new(&ctx.config.frontend(), ctx.config.frontend.sample_rate)?;
    std::fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
    trials.par_iter().try_for_each(|t| {
        let wav = wav_path(audio_dir, &t.utterance_id);
        let f = ex.extract(&load_checked_wav(ctx, &wav)?).map_err(|e| Error::format(&wav, e.to_string()))?;
        write_features(&cache_path(cache_dir, &t.utterance_id), &f)
    })?;
    write_atomic(&cache_dir.join("config.toml"), ctx.config.to_toml().as_bytes())?;
    info!("extracted {} utterances into {}", trials.len(), cache_dir.display());
    Ok(trials.len())
}

fn load_features(ctx: &Context, cache_dir: &Path, trials: &[Trial]) -> Result<Vec<FeatureMatrix>> {
    let want = ctx.config.frontend().fingerprint();
    trials
        .par_iter()
        .map(|t| {
            let p = cache_path(cache_dir, &t.utterance_id);
            let f = read_features(&p)?;
            if f.config_hash() != want {
                return Err(Error::format(
                    &p,
                    format!("front-end hash {} does not match the config ({})", format_hash(f.config_hash()), format_hash(want)),
                ));
            }
            Ok(f)
        })
        .collect()
}

/// Trains a countermeasure on the cached features of every protocol trial.
pub fn train(ctx: &Context, cache_dir: &Path, protocol: &Path, out: &Path) -> Result<CmPair> {
    let trials = read_protocol(protocol)?;
    let feats = load_features(ctx, cache_dir, &trials)?;
    let (mut bona, mut spoof) = (Vec::new(), Vec::new());
    for (t, f) in trials.iter().zip(feats) {
        if t.attack_id.is_none() {
            bona.push(f)
        } else {
            spoof.push(f)
        }
    }
    let cm = CmPair::train(&bona, &spoof, &ctx.config.em("cm"))?;
    write_cm(out, &cm, ctx.hash)?;
    ctx.sidecar(out)?;
    info!("trained {}-component models on {} + {} utterances", cm.bona.n_components(), bona.len(), spoof.len());
    Ok(cm)
}

/// Scores every protocol trial with a trained countermeasure.
pub fn score(ctx: &Context, model: &Path, cache_dir: &Path, protocol: &Path, out: &Path) -> Result<ScoreFile> {
    let (cm, _) = read_cm(model)?;
    let trials = read_protocol(protocol)?;
    let feats = load_features(ctx, cache_dir, &trials)?;
    let entries = trials
        .par_iter()
        .zip(feats.par_iter())
        .map(|(t, f)| {
            Ok(ScoreEntry { utterance_id: t.utterance_id.clone(), attack_id: t.attack_id.clone(), score: cm.llr_score(f)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let file = ScoreFile { config_hash: Some(ctx.hash), entries };
    write_scores(out, &file)?;
    ctx.sidecar(out)?;
    Ok(file)
}

/// Power spectrograms of one partition under the configured framing.
pub fn load_spectrograms(ctx: &Context, part: &Partition) -> Result<Vec<LabeledSpectrogram>> {
    let trials = read_protocol(&part.protocol)?;
    let cfg = ctx.config.frontend();
    trials
        .par_iter()
        .map(|t| {
            let wav = wav_path(&part.audio_dir, &t.utterance_id);
            let spectrogram = Spectrogram::compute(&load_checked_wav(ctx, &wav)?, &cfg).map_err(|e| Error::format(&wav, e.to_string()))?;
            Ok(LabeledSpectrogram { attack_id: t.attack_id.clone(), spectrogram })
        })
        .collect()
}

fn experiment<'a>(
    ctx: &'a Context,
    template: &'a sbcm_core::FrontendConfig,
    em: &'a sbcm_core::gmm::EmOptions,
    train: &'a [LabeledSpectrogram],
    eval: &'a [LabeledSpectrogram],
) -> BandExperiment<'a> {
    BandExperiment { template, em, costs: ctx.config.costs(), train, eval }
}

/// Full-band countermeasures for several filter counts. Rows that fail are
/// reported in the file and make the command fail after writing.
pub fn sweep(ctx: &Context, train: &Partition, eval: &Partition, filters: &[usize], out: &Path) -> Result<Vec<SweepRow>> {
    if filters.is_empty() {
        return Err(Error::Usage("no filter counts given".into()));
    }
    let (tr, ev) = (load_spectrograms(ctx, train)?, load_spectrograms(ctx, eval)?);
    let template = ctx.config.frontend();
    let em = ctx.config.em("sweep");
    let exp = experiment(ctx, &template, &em, &tr, &ev);
    let results: Vec<(usize, sbcm_core::Result<SweepRow>)> =
        filters.par_iter().map(|&n| resolution_sweep(&[n], &exp).pop().expect("one row per count")).collect();
    let mut text = format!("# config_hash={}\nn_filters\tmin_tdcf\teer\tbhattacharyya\n", format_hash(ctx.hash));
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (n, r) in results {
        match r {
            Ok(r) => {
                text.push_str(&format!("{}\t{:?}\t{:?}\t{:?}\n", r.n_filters, r.min_tdcf, r.eer, r.bhattacharyya));
                rows.push(r);
            }
            Err(e) => {
                text.push_str(&format!("# failed\t{n}\t{e}\n"));
                failed.push(format!("N={n}: {e}"));
            }
        }
    }
    write_atomic(out, text.as_bytes())?;
    ctx.sidecar(out)?;
    if !failed.is_empty() {
        return Err(Error::format(out, format!("sweep rows failed: {}", failed.join("; "))));
    }
    Ok(rows)
}

/// Min t-DCF heat-map for one attack; cells are evaluated in parallel.
pub fn heatmap(ctx: &Context, train: &Partition, eval: &Partition, attack: &str, out: &Path) -> Result<HeatMapFile> {
    let (tr, ev) = (load_spectrograms(ctx, train)?, load_spectrograms(ctx, eval)?);
    if !ev.iter().any(|u| u.attack_id.as_deref() == Some(attack)) {
        return Err(Error::Usage(format!("attack {attack} has no eval trials")));
    }
    let sr = ctx.config.frontend.sample_rate;
    let grid = ctx.config.grid(sr)?;
    let template = ctx.config.frontend();
    let em = ctx.config.em("heatmap");
    let exp = experiment(ctx, &template, &em, &tr, &ev);
    let cells = grid.cells();
    info!("evaluating {} cells for {attack}", cells.len());
    let outcomes = cells.par_iter().map(|b| (*b, exp.evaluate_cell(b, attack))).collect();
    let hm = assemble_heatmap(&grid, attack, outcomes)?;
    for (b, why) in hm.failures() {
        warn!("cell [{}, {}] failed: {why}", b.f_min, b.f_max);
    }
    let file = HeatMapFile { config_hash: ctx.hash, bin_hz: Some(template.bin_hz(sr)), heatmap: hm };
    write_heatmap(out, &file)?;
    ctx.sidecar(out)?;
    Ok(file)
}

/// Centre of mass of a heat-map file; returns the report text.
pub fn com(ctx: &Context, heatmap: &Path, epsilon: Option<f64>, out: Option<&Path>) -> Result<String> {
    let f = read_heatmap(heatmap)?;
    let eps = epsilon.unwrap_or(ctx.config.grid.epsilon);
    let bin_hz = f.bin_hz.or_else(|| Some(ctx.config.frontend().bin_hz(ctx.config.frontend.sample_rate)));
    let r = center_of_mass(&f.heatmap, eps)?;
    let text = format_com_report(f.heatmap.attack_id(), &r, bin_hz, ctx.hash);
    if let Some(out) = out {
        write_com_report(out, &text)?;
        ctx.sidecar(out)?;
    }
    Ok(text)
}

fn read_all_scores(paths: &[PathBuf]) -> Result<Vec<ScoreFile>> {
    if paths.is_empty() {
        return Err(Error::Usage("no score files given".into()));
    }
    paths.iter().map(|p| read_scores(p)).collect()
}

/// Trains a fuser on aligned score files whose labels must match the protocol.
pub fn fuse_train(ctx: &Context, kind: FusionKind, scores: &[PathBuf], protocol: &Path, out: &Path) -> Result<FusionModel> {
    let files = read_all_scores(scores)?;
    let trials = read_protocol(protocol)?;
    for (f, p) in files.iter().zip(scores) {
        check_against_protocol(f, &trials).map_err(|e| Error::format(p, e.to_string()))?;
    }
    let set = align(&files)?;
    let c = &ctx.config;
    let model = match kind {
        FusionKind::Linear => FusionModel::Linear(train_linear_fusion(&set, &c.logistic())?),
        FusionKind::Multinomial => FusionModel::Multinomial(train_multinomial_fusion(&set, &c.logistic(), c.partition()?)?),
        FusionKind::Gmm => FusionModel::Gmm(train_gmm_fusion(&set, &c.fusion_em())?),
        FusionKind::SvmPoly => FusionModel::Svm(train_svm_poly(&set, &c.svm())?),
    };
    write_fusion(out, &model, ctx.hash)?;
    ctx.sidecar(out)?;
    Ok(model)
}

/// Applies a trained fuser to aligned score files.
pub fn fuse_apply(ctx: &Context, model: &Path, scores: &[PathBuf], out: &Path) -> Result<ScoreFile> {
    let (model, _) = read_fusion(model)?;
    let set = align(&read_all_scores(scores)?)?;
    let fused = fuse(&model, &set)?;
    let entries = set
        .trials()
        .iter()
        .zip(fused)
        .map(|(t, s)| ScoreEntry { utterance_id: t.utterance_id.clone(), attack_id: t.attack_id.clone(), score: s })
        .collect();
    let file = ScoreFile { config_hash: Some(ctx.hash), entries };
    write_scores(out, &file)?;
    ctx.sidecar(out)?;
    Ok(file)
}

/// Pooled and per-attack EER and min t-DCF; returns the rows and report text.
pub fn evaluate_scores(ctx: &Context, scores: &Path, protocol: Option<&Path>, out: Option<&Path>) -> Result<(Vec<EvalRow>, String)> {
    let file = read_scores(scores)?;
    if let Some(p) = protocol {
        check_against_protocol(&file, &read_protocol(p)?).map_err(|e| Error::format(scores, e.to_string()))?;
    }
    let rows = evaluate(&file, &ctx.config.costs())?;
    let text = format_report(&rows, ctx.hash);
    if let Some(out) = out {
        write_atomic(out, text.as_bytes())?;
        ctx.sidecar(out)?;
    }
    Ok((rows, text))
}

pub const PARTITIONS: [&str; 2] = ["train", "eval"];

/// Writes `<out>/<partition>/{audio/*.wav, protocol.txt, manifest.tsv}` for
/// the train and eval partitions, each from its own derived seed.
pub fn synth(ctx: &Context, spec: Option<&Path>, out_dir: &Path) -> Result<usize> {
    let file = SynthFile::load(spec)?;
    let mut total = 0;
    for (part, suffix) in PARTITIONS.iter().zip(["_TR", "_EV"]) {
        let spec = file.spec(seed::derive(ctx.config.seed, &format!("synth/{part}")), suffix)?;
        let dir = out_dir.join(part);
        let audio = dir.join("audio");
        let plan = spec.plan();
        (0..plan.len()).into_par_iter().try_for_each(|i| {
            let u = synth_utterance(&spec, i)?;
            write_wav(&wav_path(&audio, &u.trial.utterance_id), &u.samples, u.sample_rate)
        })?;
        write_protocol(&dir.join("protocol.txt"), &plan)?;
        let manifest: Vec<ManifestEntry> = plan
            .iter()
            .map(|t| ManifestEntry {
                utterance_id: t.utterance_id.clone(),
                path: PathBuf::from("audio").join(format!("{}.wav", t.utterance_id)),
                attack_id: t.attack_id.clone(),
            })
            .collect();
        write_manifest(&dir.join("manifest.tsv"), &manifest)?;
        total += plan.len();
    }
    write_atomic(&out_dir.join("synth.toml"), toml::to_string(&file).expect("spec serialises").as_bytes())?;
    write_atomic(&out_dir.join("config.toml"), ctx.config.to_toml().as_bytes())?;
    info!("wrote {total} utterances under {}", out_dir.display());
    Ok(total)
}

/// Writes `<out>/<partition>/{cm1.scores .. cmD.scores, protocol.txt}` for the
/// train and eval partitions of a score-space scenario.
pub fn scenario(ctx: &Context, spec: Option<&Path>, out_dir: &Path) -> Result<usize> {
    let file = ScenarioFile::load(spec)?;
    for part in PARTITIONS {
        let set = synth_scenario(&file.spec(seed::derive(ctx.config.seed, &format!("scenario/{part}")))?)?;
        let dir = out_dir.join(part);
        let id = |u: &str| format!("{part}_{u}");
        let trials: Vec<Trial> = set
            .trials()
            .iter()
            .map(|t| Trial { speaker_id: "SC".into(), utterance_id: id(&t.utterance_id), attack_id: t.attack_id.clone() })
            .collect();
        write_protocol(&dir.join("protocol.txt"), &trials)?;
        for j in 0..set.dims() {
            let entries = set
                .trials()
                .iter()
                .map(|t| ScoreEntry { utterance_id: id(&t.utterance_id), attack_id: t.attack_id.clone(), score: t.scores[j] })
                .collect();
            let p = dir.join(format!("cm{}.scores", j + 1));
            write_scores(&p, &ScoreFile { config_hash: Some(ctx.hash), entries })?;
        }
    }
    write_atomic(&out_dir.join("scenario.toml"), toml::to_string(&file).expect("spec serialises").as_bytes())?;
    write_atomic(&out_dir.join("config.toml"), ctx.config.to_toml().as_bytes())?;
    Ok(file.clusters.len())
}
