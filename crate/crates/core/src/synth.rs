//! Synthetic data: noise-carrier utterances with band-limited attack artefacts,
//! and Gaussian clusters in score space.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fft::Fft;
use crate::fusion::{ScoreVector, ScoreVectorSet};
use crate::linalg::cholesky;
use crate::seed;
use crate::trial::Trial;

/// RMS of the carrier at 0 dB gain.
const CARRIER_RMS: f64 = 0.03;
const GAIN_SPREAD_DB: f64 = 3.0;
const PEAK_LIMIT: f64 = 0.999;
const N_SPEAKERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtefactKind {
    /// Extra noise confined to the band.
    BandNoise,
    /// Carrier attenuated inside the band.
    BandNotch,
}

impl ArtefactKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArtefactKind::BandNoise => "band-noise",
            ArtefactKind::BandNotch => "band-notch",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "band-noise" => Some(ArtefactKind::BandNoise),
            "band-notch" => Some(ArtefactKind::BandNotch),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub attack_id: String,
    pub count: usize,
    pub f_lo: f64,
    pub f_hi: f64,
    pub kind: ArtefactKind,
    /// Band-noise: artefact power relative to the carrier's power in the band.
    /// Band-notch: attenuation depth. `-inf` disables the artefact either way.
    pub level_db: f64,
}

impl AttackSpec {
    pub fn band_noise(attack_id: &str, count: usize, f_lo: f64, f_hi: f64, level_db: f64) -> Self {
        AttackSpec { attack_id: attack_id.into(), count, f_lo, f_hi, kind: ArtefactKind::BandNoise, level_db }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_bona: usize,
    pub attacks: Vec<AttackSpec>,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
    /// Utterance ids are `{prefix}_{index:05}`.
    pub prefix: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_bona: 40,
            attacks: vec![AttackSpec::band_noise("A01", 40, 2000.0, 4000.0, 10.0)],
            duration_s: 1.0,
            sample_rate: 16000,
            seed: 0,
            prefix: "SYN".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance {
    pub trial: Trial,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.sample_rate == 0 || !(self.duration_s > 0.0) || self.n_samples() == 0 {
            return Err(Error::Config("synthesis needs a positive duration and sample rate".into()));
        }
        if self.n_bona == 0 {
            return Err(Error::Config("bona fide count must be positive".into()));
        }
        for a in &self.attacks {
            if a.count == 0 {
                return Err(Error::Config(format!("attack {} has zero count", a.attack_id)));
            }
            if !(a.f_lo >= 0.0 && a.f_lo < a.f_hi && a.f_hi <= nyquist) {
                return Err(Error::Config(format!(
                    "attack {} band [{}, {}] must lie inside [0, {nyquist}]",
                    a.attack_id, a.f_lo, a.f_hi
                )));
            }
            if a.level_db.is_nan() || a.level_db == f64::INFINITY {
                return Err(Error::Config(format!("attack {} level must be finite or -inf", a.attack_id)));
            }
            if a.attack_id.is_empty() || a.attack_id == "-" || a.attack_id.contains(char::is_whitespace) {
                return Err(Error::Config(format!("bad attack id {:?}", a.attack_id)));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        libm::round(self.duration_s * self.sample_rate as f64) as usize
    }

    pub fn len(&self) -> usize {
        self.n_bona + self.attacks.iter().map(|a| a.count).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The trial at each index: bona fide first, then attacks in spec order.
    pub fn plan(&self) -> Vec<Trial> {
        (0..self.len()).map(|i| self.trial(i)).collect()
    }

    fn attack_at(&self, index: usize) -> Option<&AttackSpec> {
        let mut i = index.checked_sub(self.n_bona)?;
        for a in &self.attacks {
            if i < a.count {
                return Some(a);
            }
            i -= a.count;
        }
        None
    }

    fn trial(&self, index: usize) -> Trial {
        Trial {
            speaker_id: format!("{}_SPK{:02}", self.prefix, index % N_SPEAKERS),
            utterance_id: format!("{}_{index:05}", self.prefix),
            attack_id: self.attack_at(index).map(|a| a.attack_id.clone()),
        }
    }
}

/// Fixed low-order envelope: a pink-ish tilt with two broad resonances.
fn envelope(f: f64) -> f64 {
    let bump = |c: f64, w: f64| libm::exp(-((f - c) / w) * ((f - c) / w));
    (1.0 + 0.8 * bump(600.0, 300.0) + 0.5 * bump(2400.0, 600.0)) / libm::sqrt(1.0 + f / 300.0)
}

/// Real signal of length `n` from one-sided spectrum amplitudes with Gaussian phases and magnitudes.
struct SpectrumSynth {
    fft: Fft,
    n: usize,
    bin_hz: f64,
}

impl SpectrumSynth {
    fn new(n: usize, sample_rate: u32) -> Self {
        let nfft = n.next_power_of_two();
        SpectrumSynth { fft: Fft::new(nfft), n, bin_hz: sample_rate as f64 / nfft as f64 }
    }

    fn random_spectrum(&self, rng: &mut ChaCha8Rng, amp: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let nfft = self.fft.len();
        let (mut re, mut im) = (vec![0.0; nfft], vec![0.0; nfft]);
        for k in 0..=nfft / 2 {
            let a = amp(k as f64 * self.bin_hz);
            let zr: f64 = StandardNormal.sample(rng);
            let zi: f64 = StandardNormal.sample(rng);
            re[k] = a * zr;
            im[k] = if k == 0 || k == nfft / 2 { 0.0 } else { a * zi };
        }
        (re, im)
    }

    fn band_part(&self, spec: &(Vec<f64>, Vec<f64>), f_lo: f64, f_hi: f64) -> (Vec<f64>, Vec<f64>) {
        let (mut re, mut im) = spec.clone();
        for k in 0..re.len() {
            let f = k as f64 * self.bin_hz;
            if !(f >= f_lo && f <= f_hi) {
                re[k] = 0.0;
                im[k] = 0.0;
            }
        }
        (re, im)
    }

    /// One-sided power, for ratios only.
    fn power(spec: &(Vec<f64>, Vec<f64>)) -> f64 {
        spec.0.iter().zip(&spec.1).map(|(r, i)| r * r + i * i).sum()
    }

    fn to_time(&self, spec: &(Vec<f64>, Vec<f64>)) -> Vec<f64> {
        let nfft = self.fft.len();
        let (mut re, mut im) = spec.clone();
        for k in nfft / 2 + 1..nfft {
            re[k] = re[nfft - k];
            im[k] = -im[nfft - k];
        }
        self.fft.inverse(&mut re, &mut im);
        re.truncate(self.n);
        re
    }
}

/// Generates the utterance at `index` of the spec's plan. Each index draws from
/// its own random stream, so utterances can be generated in any order.
pub fn synth_utterance(spec: &SynthSpec, index: usize) -> Result<SynthUtterance> {
    spec.validate()?;
    if index >= spec.len() {
        return Err(Error::InvalidInput(format!("utterance index {index} out of range")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(spec.seed, "synth"));
    rng.set_stream(index as u64);
    let n = spec.n_samples();
    let sr = spec.sample_rate as f64;
    let synth = SpectrumSynth::new(n, spec.sample_rate);

    let gain_db = rng.random_range(-GAIN_SPREAD_DB..=GAIN_SPREAD_DB);
    let am_rate = rng.random_range(3.0..6.0);
    let am_phase = rng.random_range(0.0..2.0 * PI);
    let carrier_spec = synth.random_spectrum(&mut rng, envelope);
    let carrier = synth.to_time(&carrier_spec);

    let mut signal = carrier.clone();
    if let Some(a) = spec.attack_at(index) {
        if a.level_db > f64::NEG_INFINITY {
            let in_band = synth.band_part(&carrier_spec, a.f_lo, a.f_hi);
            match a.kind {
                ArtefactKind::BandNoise => {
                    let noise = synth.random_spectrum(&mut rng, |f| if f >= a.f_lo && f <= a.f_hi { 1.0 } else { 0.0 });
                    let pn = SpectrumSynth::power(&noise);
                    let pc = SpectrumSynth::power(&in_band);
                    if pn > 0.0 && pc > 0.0 {
                        let k = libm::sqrt(pc * libm::pow(10.0, a.level_db / 10.0) / pn);
                        for (s, v) in signal.iter_mut().zip(synth.to_time(&noise)) {
                            *s += k * v;
                        }
                    }
                }
                ArtefactKind::BandNotch => {
                    let keep = libm::pow(10.0, -a.level_db.max(0.0) / 20.0);
                    for (s, v) in signal.iter_mut().zip(synth.to_time(&in_band)) {
                        *s -= (1.0 - keep) * v;
                    }
                }
            }
        }
    }

    let am: Vec<f64> = (0..n).map(|t| 1.0 + 0.3 * libm::sin(2.0 * PI * am_rate * t as f64 / sr + am_phase)).collect();
    let carrier_rms = libm::sqrt(carrier.iter().zip(&am).map(|(c, m)| c * c * m * m).sum::<f64>() / n as f64);
    let scale = CARRIER_RMS * libm::pow(10.0, gain_db / 20.0) / carrier_rms.max(f64::MIN_POSITIVE);
    let mut samples: Vec<f64> = signal.iter().zip(&am).map(|(s, m)| s * m * scale).collect();
    let peak = samples.iter().fold(0.0f64, |p, v| p.max(v.abs()));
    if peak > PEAK_LIMIT {
        samples.iter_mut().for_each(|v| *v *= PEAK_LIMIT / peak);
    }
    Ok(SynthUtterance { trial: spec.trial(index), samples, sample_rate: spec.sample_rate })
}

/// Every utterance of the spec, in plan order.
pub fn synth_corpus(spec: &SynthSpec) -> Result<Vec<SynthUtterance>> {
    spec.validate()?;
    (0..spec.len()).map(|i| synth_utterance(spec, i)).collect()
}

/// One Gaussian cluster in score space.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioCluster {
    pub attack_id: Option<String>,
    pub count: usize,
    pub mean: Vec<f64>,
    /// Row-major D×D covariance; must be positive semi-definite.
    pub covariance: Vec<f64>,
}

impl ScenarioCluster {
    pub fn isotropic(attack_id: Option<&str>, count: usize, mean: &[f64], sd: f64) -> Self {
        let d = mean.len();
        let mut covariance = vec![0.0; d * d];
        for i in 0..d {
            covariance[i * d + i] = sd * sd;
        }
        ScenarioCluster { attack_id: attack_id.map(|s| s.to_string()), count, mean: mean.to_vec(), covariance }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub clusters: Vec<ScenarioCluster>,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    /// Bona fide sits between A1 and A2 on the line joining them, A3 is low on both
    /// scores; no single line separates bona fide from all three attacks.
    fn default() -> Self {
        let sd = 0.5;
        ScenarioSpec {
            clusters: vec![
                ScenarioCluster::isotropic(None, 400, &[1.5, 1.5], sd),
                ScenarioCluster::isotropic(Some("A1"), 150, &[-1.0, 4.0], sd),
                ScenarioCluster::isotropic(Some("A2"), 150, &[4.0, -1.0], sd),
                ScenarioCluster::isotropic(Some("A3"), 150, &[-2.0, -2.0], sd),
            ],
            seed: 0,
        }
    }
}

/// Samples every cluster of the scenario, in cluster order.
pub fn synth_scenario(spec: &ScenarioSpec) -> Result<ScoreVectorSet> {
    let d = spec.clusters.first().map_or(0, |c| c.mean.len());
    if d == 0 {
        return Err(Error::Config("scenario needs at least one cluster with a non-empty mean".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(spec.seed, "scenario"));
    let mut trials = Vec::new();
    for c in &spec.clusters {
        if c.mean.len() != d {
            return Err(Error::DimMismatch { expected: d, got: c.mean.len() });
        }
        if c.covariance.len() != d * d {
            return Err(Error::DimMismatch { expected: d * d, got: c.covariance.len() });
        }
        let symmetric = (0..d).all(|i| (0..d).all(|j| c.covariance[i * d + j] == c.covariance[j * d + i]));
        if !symmetric || c.covariance.iter().chain(&c.mean).any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let l = cholesky(&c.covariance, d, true)?;
        for _ in 0..c.count {
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let scores = (0..d).map(|i| c.mean[i] + (0..=i).map(|k| l[i * d + k] * z[k]).sum::<f64>()).collect();
            trials.push(ScoreVector {
                utterance_id: format!("sc_{:05}", trials.len()),
                attack_id: c.attack_id.clone(),
                scores,
            });
        }
    }
    ScoreVectorSet::new(trials)
}
