//! Experiment configuration (TOML) and synthetic-data spec files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sbcm_core::fusion::{ClassPartition, LogisticOptions, SvmOptions};
use sbcm_core::gmm::EmOptions;
use sbcm_core::metrics::TdcfCosts;
use sbcm_core::seed;
use sbcm_core::subband::BandGrid;
use sbcm_core::synth::{ArtefactKind, AttackSpec, ScenarioCluster, ScenarioSpec, SynthSpec};
use sbcm_core::FrontendConfig;

use crate::error::{read_text, write_atomic, Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Every random stage derives its seed from this one.
    pub seed: u64,
    pub frontend: FrontendSection,
    pub gmm: GmmSection,
    pub grid: GridSection,
    pub fusion: FusionSection,
    pub costs: CostsSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontendSection {
    /// Audio of any other rate is rejected.
    pub sample_rate: u32,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub n_fft: usize,
    pub n_filters: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub n_ceps: usize,
    pub delta_context: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmmSection {
    pub components: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub variance_floor_ratio: f64,
    pub kmeans_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Candidates per axis of the uniform grid.
    pub steps: usize,
    /// Upper end of the uniform grid; the Nyquist frequency when absent.
    pub f_top: Option<f64>,
    pub min_width: f64,
    /// Explicit axes, overriding the uniform grid.
    pub cut_in: Option<Vec<f64>>,
    pub cut_off: Option<Vec<f64>>,
    /// Mass cap for zero-cost cells in the centre of mass.
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionSection {
    pub prior: f64,
    pub ridge: f64,
    pub newton_iters: usize,
    /// `binary` or `per-attack`.
    pub partition: String,
    pub gmm_components: usize,
    pub svm_degree: u32,
    pub svm_gamma: Option<f64>,
    pub svm_coef0: f64,
    pub svm_c: f64,
    pub svm_tol: f64,
    pub svm_max_iter: usize,
    pub svm_cache_mb: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostsSection {
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub train_protocol: Option<PathBuf>,
    pub train_audio: Option<PathBuf>,
    pub eval_protocol: Option<PathBuf>,
    pub eval_audio: Option<PathBuf>,
}

impl Default for FrontendSection {
    fn default() -> Self {
        let f = FrontendConfig::high_resolution();
        FrontendSection {
            sample_rate: 16000,
            window_ms: f.window_ms,
            hop_ms: f.hop_ms,
            n_fft: f.n_fft,
            n_filters: f.n_filters,
            f_min: f.f_min,
            f_max: f.f_max,
            n_ceps: f.n_ceps,
            delta_context: f.delta_context,
        }
    }
}

impl Default for GmmSection {
    fn default() -> Self {
        let e = EmOptions::default();
        GmmSection {
            components: e.n_components,
            max_iters: e.max_iters,
            tol: e.tol,
            variance_floor_ratio: e.variance_floor_ratio,
            kmeans_iters: e.kmeans_iters,
        }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { steps: 21, f_top: None, min_width: 800.0, cut_in: None, cut_off: None, epsilon: 1e-3 }
    }
}

impl Default for FusionSection {
    fn default() -> Self {
        let l = LogisticOptions::default();
        let s = SvmOptions::default();
        FusionSection {
            prior: l.prior,
            ridge: l.ridge,
            newton_iters: l.max_iters,
            partition: ClassPartition::Binary.as_str().into(),
            gmm_components: 64,
            svm_degree: s.degree,
            svm_gamma: s.gamma,
            svm_coef0: s.coef0,
            svm_c: s.c,
            svm_tol: s.tol,
            svm_max_iter: s.max_iter,
            svm_cache_mb: s.cache_mb,
        }
    }
}

impl Default for CostsSection {
    fn default() -> Self {
        let c = TdcfCosts::default();
        CostsSection { c1: c.c1, c2: c.c2 }
    }
}

fn usage(e: impl std::fmt::Display) -> Error {
    Error::Usage(e.to_string())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file; defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = read_text(p).map_err(usage)?;
                Self::from_toml(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
            }
            None => Ok(Self::default()),
        }
    }

    /// Checks every section without touching any data.
    pub fn validate(&self) -> Result<()> {
        let fe = self.frontend();
        fe.validate(self.frontend.sample_rate).map_err(usage)?;
        if self.gmm.components == 0 || self.fusion.gmm_components == 0 {
            return Err(usage("GMM component counts must be positive"));
        }
        if !(self.gmm.tol >= 0.0 && self.gmm.variance_floor_ratio >= 0.0) {
            return Err(usage("gmm tol and variance_floor_ratio must be non-negative"));
        }
        self.grid(self.frontend.sample_rate)?;
        if !(self.grid.epsilon > 0.0) {
            return Err(usage("grid epsilon must be positive"));
        }
        TdcfCosts::new(self.costs.c1, self.costs.c2).map_err(usage)?;
        self.partition()?;
        let f = &self.fusion;
        if !(f.prior > 0.0 && f.prior < 1.0) || !(f.ridge >= 0.0) {
            return Err(usage("fusion prior must lie in (0, 1) and ridge must be non-negative"));
        }
        if f.svm_degree == 0 || !(f.svm_c > 0.0 && f.svm_tol > 0.0) || f.svm_gamma.is_some_and(|g| !(g > 0.0)) {
            return Err(usage("SVM needs degree >= 1 and positive C, tol and gamma"));
        }
        Ok(())
    }

    pub fn frontend(&self) -> FrontendConfig {
        let f = &self.frontend;
        FrontendConfig {
            window_ms: f.window_ms,
            hop_ms: f.hop_ms,
            n_fft: f.n_fft,
            n_filters: f.n_filters,
            f_min: f.f_min,
            f_max: f.f_max,
            n_ceps: f.n_ceps,
            delta_context: f.delta_context,
        }
    }

    /// EM settings for the countermeasure GMMs, seeded for `stage`.
    pub fn em(&self, stage: &str) -> EmOptions {
        EmOptions {
            n_components: self.gmm.components,
            max_iters: self.gmm.max_iters,
            tol: self.gmm.tol,
            variance_floor_ratio: self.gmm.variance_floor_ratio,
            kmeans_iters: self.gmm.kmeans_iters,
            seed: seed::derive(self.seed, stage),
        }
    }

    pub fn fusion_em(&self) -> EmOptions {
        EmOptions { n_components: self.fusion.gmm_components, ..self.em("fusion/gmm") }
    }

    pub fn grid(&self, sample_rate: u32) -> Result<BandGrid> {
        let g = &self.grid;
        match (&g.cut_in, &g.cut_off) {
            (Some(a), Some(b)) => BandGrid::new(a.clone(), b.clone(), g.min_width),
            (None, None) => BandGrid::uniform(g.steps, g.f_top.unwrap_or(sample_rate as f64 / 2.0), g.min_width),
            _ => return Err(usage("grid cut_in and cut_off must be given together")),
        }
        .map_err(usage)
    }

    pub fn costs(&self) -> TdcfCosts {
        TdcfCosts::new(self.costs.c1, self.costs.c2).expect("validated")
    }

    pub fn partition(&self) -> Result<ClassPartition> {
        ClassPartition::parse(&self.fusion.partition)
            .ok_or_else(|| usage(format!("unknown fusion partition {:?}", self.fusion.partition)))
    }

    pub fn logistic(&self) -> LogisticOptions {
        LogisticOptions { prior: self.fusion.prior, ridge: self.fusion.ridge, max_iters: self.fusion.newton_iters, ..LogisticOptions::default() }
    }

    pub fn svm(&self) -> SvmOptions {
        let f = &self.fusion;
        SvmOptions {
            degree: f.svm_degree,
            gamma: f.svm_gamma,
            coef0: f.svm_coef0,
            c: f.svm_c,
            tol: f.svm_tol,
            max_iter: f.svm_max_iter,
            cache_mb: f.svm_cache_mb,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Hash of every setting except paths, so relocated data keeps its hash.
    pub fn hash(&self) -> u64 {
        let canon = ExperimentConfig { paths: PathsSection::default(), ..self.clone() };
        seed::fingerprint(canon.to_toml().as_bytes())
    }

    /// Writes the resolved config next to an output file as `<output>.config.toml`.
    pub fn write_sidecar(&self, output: &Path) -> Result<PathBuf> {
        let mut p = output.as_os_str().to_owned();
        p.push(".config.toml");
        let p = PathBuf::from(p);
        write_atomic(&p, self.to_toml().as_bytes())?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackFile {
    pub attack_id: String,
    pub count: usize,
    pub f_lo: f64,
    pub f_hi: f64,
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_level")]
    pub level_db: f64,
}

fn default_kind() -> String {
    ArtefactKind::BandNoise.as_str().into()
}

fn default_level() -> f64 {
    10.0
}

/// Synthetic corpus description. Counts apply to each of the train and eval partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthFile {
    pub n_bona: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub prefix: String,
    pub attacks: Vec<AttackFile>,
}

impl Default for SynthFile {
    fn default() -> Self {
        let s = SynthSpec::default();
        SynthFile {
            n_bona: s.n_bona,
            duration_s: s.duration_s,
            sample_rate: s.sample_rate,
            prefix: s.prefix,
            attacks: s
                .attacks
                .iter()
                .map(|a| AttackFile {
                    attack_id: a.attack_id.clone(),
                    count: a.count,
                    f_lo: a.f_lo,
                    f_hi: a.f_hi,
                    kind: a.kind.as_str().into(),
                    level_db: a.level_db,
                })
                .collect(),
        }
    }
}

impl SynthFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => toml::from_str(&read_text(p)?).map_err(|e| usage(format!("{}: invalid synth spec: {e}", p.display()))),
            None => Ok(Self::default()),
        }
    }

    pub fn spec(&self, seed: u64, prefix_suffix: &str) -> Result<SynthSpec> {
        let attacks = self
            .attacks
            .iter()
            .map(|a| {
                let kind = ArtefactKind::parse(&a.kind).ok_or_else(|| usage(format!("unknown artefact kind {:?}", a.kind)))?;
                Ok(AttackSpec { kind, ..AttackSpec::band_noise(&a.attack_id, a.count, a.f_lo, a.f_hi, a.level_db) })
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = SynthSpec {
            n_bona: self.n_bona,
            attacks,
            duration_s: self.duration_s,
            sample_rate: self.sample_rate,
            seed,
            prefix: format!("{}{prefix_suffix}", self.prefix),
        };
        spec.validate().map_err(usage)?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterFile {
    /// Absent or `-` for bona fide.
    #[serde(default)]
    pub attack_id: Option<String>,
    pub count: usize,
    pub mean: Vec<f64>,
    #[serde(default)]
    pub sd: Option<f64>,
    #[serde(default)]
    pub covariance: Option<Vec<Vec<f64>>>,
}

/// Score-space scenario. Counts apply to each of the train and eval partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub clusters: Vec<ClusterFile>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        let s = ScenarioSpec::default();
        ScenarioFile {
            clusters: s
                .clusters
                .iter()
                .map(|c| ClusterFile {
                    attack_id: c.attack_id.clone(),
                    count: c.count,
                    mean: c.mean.clone(),
                    sd: None,
                    covariance: Some(c.covariance.chunks(c.mean.len()).map(|r| r.to_vec()).collect()),
                })
                .collect(),
        }
    }
}

impl ScenarioFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => toml::from_str(&read_text(p)?).map_err(|e| usage(format!("{}: invalid scenario spec: {e}", p.display()))),
            None => Ok(Self::default()),
        }
    }

    pub fn spec(&self, seed: u64) -> Result<ScenarioSpec> {
        let clusters = self
            .clusters
            .iter()
            .map(|c| {
                let attack_id = c.attack_id.clone().filter(|a| a != "-");
                let d = c.mean.len();
                let covariance = match (&c.sd, &c.covariance) {
                    (Some(sd), None) => ScenarioCluster::isotropic(None, 0, &c.mean, *sd).covariance,
                    (None, Some(rows)) => {
                        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                            return Err(usage(format!("covariance must be {d}x{d}")));
                        }
                        rows.concat()
                    }
                    _ => return Err(usage("give exactly one of sd and covariance per cluster")),
                };
                Ok(ScenarioCluster { attack_id, count: c.count, mean: c.mean.clone(), covariance })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScenarioSpec { clusters, seed })
    }
}
