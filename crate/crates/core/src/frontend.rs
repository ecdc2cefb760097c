//! Linear-frequency cepstral front-end.
//!
//! The pipeline is frame blocking with a Hamming window, power spectrum, a bank of
//! linearly spaced triangular filters restricted to `[f_min, f_max]`, log compression,
//! an orthonormal DCT-II, and regression deltas. Restricting the band turns the same
//! front-end into a sub-band countermeasure.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fft::Fft;
use crate::matrix::Matrix;
use crate::seed;

/// Energies below this are clamped before the log.
pub const LOG_FLOOR: f64 = 1e-30;

/// A mono utterance with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("waveform has no samples".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::InvalidInput(format!(
                "sample {i} ({}) outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(Waveform { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Front-end settings. Frequencies in Hz, durations in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontendConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub n_fft: usize,
    pub n_filters: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub n_ceps: usize,
    pub delta_context: usize,
}

impl FrontendConfig {
    /// 20 ms / 10 ms framing, 512-point FFT, 20 filters and 20 cepstra over 0-8 kHz.
    pub fn baseline() -> Self {
        FrontendConfig {
            window_ms: 20.0,
            hop_ms: 10.0,
            n_fft: 512,
            n_filters: 20,
            f_min: 0.0,
            f_max: 8000.0,
            n_ceps: 20,
            delta_context: 2,
        }
    }

    /// 30 ms / 15 ms framing, 1024-point FFT, 70 filters, 20 cepstra over 0-8 kHz.
    pub fn high_resolution() -> Self {
        FrontendConfig {
            window_ms: 30.0,
            hop_ms: 15.0,
            n_fft: 1024,
            n_filters: 70,
            ..Self::baseline()
        }
    }

    pub fn with_band(mut self, f_min: f64, f_max: f64) -> Self {
        self.f_min = f_min;
        self.f_max = f_max;
        self
    }

    pub fn with_filters(mut self, n_filters: usize) -> Self {
        self.n_filters = n_filters;
        self
    }

    pub fn window_samples(&self, sample_rate: u32) -> usize {
        libm::round(self.window_ms * sample_rate as f64 / 1000.0) as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        libm::round(self.hop_ms * sample_rate as f64 / 1000.0) as usize
    }

    /// Width of one FFT bin in Hz.
    pub fn bin_hz(&self, sample_rate: u32) -> f64 {
        sample_rate as f64 / self.n_fft as f64
    }

    /// Feature dimension: static, delta and delta-delta blocks.
    pub fn dims(&self) -> usize {
        3 * self.n_ceps
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.window_ms > 0.0 && self.hop_ms > 0.0 && self.hop_ms <= self.window_ms) {
            return bad("require 0 < hop_ms <= window_ms");
        }
        let win = self.window_samples(sample_rate);
        if win == 0 || self.hop_samples(sample_rate) == 0 {
            return bad("window and hop must span at least one sample");
        }
        if self.n_fft < win {
            return Err(Error::Config(format!(
                "n_fft {} is smaller than the {win}-sample window",
                self.n_fft
            )));
        }
        let nyquist = sample_rate as f64 / 2.0;
        if !(self.f_min >= 0.0 && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(Error::Config(format!(
                "band [{}, {}] Hz must satisfy 0 <= f_min < f_max <= {nyquist}",
                self.f_min, self.f_max
            )));
        }
        if self.n_filters == 0 || self.n_ceps == 0 || self.n_ceps > self.n_filters {
            return bad("require 1 <= n_ceps <= n_filters");
        }
        if self.delta_context == 0 {
            return bad("delta_context must be at least 1");
        }
        Ok(())
    }

    /// Stable identifier of the settings, stored with features and models.
    pub fn fingerprint(&self) -> u64 {
        let canon = format!(
            "lfcc/1 win={:?} hop={:?} nfft={} nfilt={} fmin={:?} fmax={:?} nceps={} ctx={}",
            self.window_ms,
            self.hop_ms,
            self.n_fft,
            self.n_filters,
            self.f_min,
            self.f_max,
            self.n_ceps,
            self.delta_context
        );
        seed::fingerprint(canon.as_bytes())
    }
}

/// Per-frame LFCC features tagged with the fingerprint of the front-end that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Matrix,
    config_hash: u64,
}

impl FeatureMatrix {
    pub fn new(data: Matrix, config_hash: u64) -> Result<Self> {
        if !data.is_finite() {
            return Err(Error::InvalidInput("feature matrix has non-finite entries".into()));
        }
        Ok(FeatureMatrix { data, config_hash })
    }

    pub fn frames(&self) -> usize {
        self.data.rows()
    }

    pub fn dims(&self) -> usize {
        self.data.cols()
    }

    pub fn config_hash(&self) -> u64 {
        self.config_hash
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }
}

impl AsRef<Matrix> for FeatureMatrix {
    fn as_ref(&self) -> &Matrix {
        &self.data
    }
}

/// Symmetric Hamming window of length `n`.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * libm::cos(2.0 * PI * i as f64 / (n - 1) as f64))
        .collect()
}

/// Number of frames for `len` samples: `floor((len - win) / hop) + 1`.
pub fn frame_count(len: usize, win: usize, hop: usize) -> Option<usize> {
    if len < win || hop == 0 {
        None
    } else {
        Some((len - win) / hop + 1)
    }
}

/// Splits the waveform into overlapping Hamming-windowed frames (one per row).
pub fn frame_signal(wave: &Waveform, cfg: &FrontendConfig) -> Result<Matrix> {
    cfg.validate(wave.sample_rate())?;
    let win = cfg.window_samples(wave.sample_rate());
    let hop = cfg.hop_samples(wave.sample_rate());
    let n = frame_count(wave.len(), win, hop)
        .ok_or(Error::TooShort { samples: wave.len(), window: win })?;
    let window = hamming(win);
    let mut frames = Matrix::zeros(n, win);
    for f in 0..n {
        let src = &wave.samples()[f * hop..f * hop + win];
        for ((dst, s), w) in frames.row_mut(f).iter_mut().zip(src).zip(&window) {
            *dst = s * w;
        }
    }
    Ok(frames)
}

/// Squared-magnitude spectrum of each frame, zero-padded to `n_fft`; `n_fft/2 + 1` bins.
pub fn power_spectrum(frames: &Matrix, n_fft: usize) -> Result<Matrix> {
    if n_fft < frames.cols() || n_fft == 0 {
        return Err(Error::Config(format!(
            "n_fft {n_fft} is smaller than the frame length {}",
            frames.cols()
        )));
    }
    let fft = Fft::new(n_fft);
    power_spectrum_with(&fft, frames)
}

fn power_spectrum_with(fft: &Fft, frames: &Matrix) -> Result<Matrix> {
    let n_fft = fft.len();
    let bins = n_fft / 2 + 1;
    let mut out = Matrix::zeros(frames.rows(), bins);
    let mut re = vec![0.0; n_fft];
    let mut im = vec![0.0; n_fft];
    for (f, frame) in frames.iter_rows().enumerate() {
        re.iter_mut().for_each(|v| *v = 0.0);
        im.iter_mut().for_each(|v| *v = 0.0);
        re[..frame.len()].copy_from_slice(frame);
        fft.forward(&mut re, &mut im);
        for (k, p) in out.row_mut(f).iter_mut().enumerate() {
            *p = re[k] * re[k] + im[k] * im[k];
        }
    }
    Ok(out)
}

/// Power spectrogram of an utterance, computed once and shared by every band.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    power: Matrix,
    sample_rate: u32,
    n_fft: usize,
}

impl Spectrogram {
    pub fn compute(wave: &Waveform, cfg: &FrontendConfig) -> Result<Self> {
        let frames = frame_signal(wave, cfg)?;
        let power = power_spectrum(&frames, cfg.n_fft)?;
        Ok(Spectrogram { power, sample_rate: wave.sample_rate(), n_fft: cfg.n_fft })
    }

    pub fn power(&self) -> &Matrix {
        &self.power
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn frames(&self) -> usize {
        self.power.rows()
    }
}

/// Rounds a frequency to the nearest FFT bin centre.
pub fn snap_to_bin(freq: f64, bin_hz: f64) -> f64 {
    libm::round(freq / bin_hz) * bin_hz
}

/// Triangular filters stored as (first bin, weights) spans.
#[derive(Debug, Clone, PartialEq)]
pub struct Filterbank {
    n_bins: usize,
    f_lo: f64,
    f_hi: f64,
    filters: Vec<(usize, Vec<f64>)>,
}

impl Filterbank {
    pub fn n_filters(&self) -> usize {
        self.filters.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Band edges after snapping to bin centres.
    pub fn band(&self) -> (f64, f64) {
        (self.f_lo, self.f_hi)
    }

    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for ((start, w), o) in self.filters.iter().zip(out.iter_mut()) {
            *o = w.iter().zip(&power[*start..]).map(|(a, b)| a * b).sum();
        }
    }

    pub fn to_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.filters.len(), self.n_bins);
        for (i, (start, w)) in self.filters.iter().enumerate() {
            for (j, v) in w.iter().enumerate() {
                m.set(i, start + j, *v);
            }
        }
        m
    }
}

/// Builds `n_filters` triangles whose edges are equally spaced on a linear
/// frequency scale between the bin-snapped `f_min` and `f_max`.
pub fn linear_filterbank(cfg: &FrontendConfig, sample_rate: u32) -> Result<Filterbank> {
    cfg.validate(sample_rate)?;
    let bin_hz = cfg.bin_hz(sample_rate);
    let n_bins = cfg.n_fft / 2 + 1;
    let f_lo = snap_to_bin(cfg.f_min, bin_hz);
    let f_hi = snap_to_bin(cfg.f_max, bin_hz).min((n_bins - 1) as f64 * bin_hz);
    let spacing = (f_hi - f_lo) / (cfg.n_filters + 1) as f64;
    if spacing < bin_hz {
        return Err(Error::Config(format!(
            "band [{f_lo}, {f_hi}] Hz is too narrow for {} filters at {bin_hz} Hz per bin",
            cfg.n_filters
        )));
    }
    let edge = |j: usize| f_lo + j as f64 * spacing;
    let filters = (1..=cfg.n_filters)
        .map(|i| {
            let (left, centre, right) = (edge(i - 1), edge(i), edge(i + 1));
            let first = libm::ceil(left / bin_hz) as usize;
            let last = (libm::floor(right / bin_hz) as usize).min(n_bins - 1);
            let weights = (first..=last)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= centre {
                        (f - left) / (centre - left)
                    } else {
                        (right - f) / (right - centre)
                    }
                    .max(0.0)
                })
                .collect();
            (first, weights)
        })
        .collect();
    Ok(Filterbank { n_bins, f_lo, f_hi, filters })
}

/// Orthonormal DCT-II basis, truncated to the first `n_out` coefficients.
#[derive(Debug, Clone)]
pub struct Dct {
    n_in: usize,
    n_out: usize,
    basis: Vec<f64>,
}

impl Dct {
    pub fn new(n_in: usize, n_out: usize) -> Self {
        assert!(n_out <= n_in && n_in > 0);
        let mut basis = Vec::with_capacity(n_in * n_out);
        for k in 0..n_out {
            let scale = if k == 0 { libm::sqrt(1.0 / n_in as f64) } else { libm::sqrt(2.0 / n_in as f64) };
            for n in 0..n_in {
                basis.push(scale * libm::cos(PI * k as f64 * (2 * n + 1) as f64 / (2 * n_in) as f64));
            }
        }
        Dct { n_in, n_out, basis }
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_in);
        for (k, o) in out.iter_mut().enumerate().take(self.n_out) {
            let row = &self.basis[k * self.n_in..(k + 1) * self.n_in];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// Transpose of the basis; the exact inverse when `n_out == n_in`.
    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_in];
        for (k, yk) in y.iter().enumerate().take(self.n_out) {
            let row = &self.basis[k * self.n_in..(k + 1) * self.n_in];
            for (xi, b) in x.iter_mut().zip(row) {
                *xi += yk * b;
            }
        }
        x
    }
}

/// Regression deltas over `context` frames on each side, with edge frames replicated:
/// `d_t = Σ_n n (c_{t+n} - c_{t-n}) / (2 Σ_n n²)`.
pub fn deltas(m: &Matrix, context: usize) -> Matrix {
    let (rows, cols) = (m.rows(), m.cols());
    let mut out = Matrix::zeros(rows, cols);
    if rows == 0 {
        return out;
    }
    let denom: f64 = 2.0 * (1..=context).map(|n| (n * n) as f64).sum::<f64>();
    for t in 0..rows {
        let o = out.row_mut(t);
        for n in 1..=context {
            let next = m.row((t + n).min(rows - 1));
            let prev = m.row(t.saturating_sub(n));
            for j in 0..cols {
                o[j] += n as f64 * (next[j] - prev[j]);
            }
        }
        o.iter_mut().for_each(|v| *v /= denom);
    }
    out
}

/// Reusable LFCC extractor for one configuration and sample rate.
#[derive(Debug, Clone)]
pub struct LfccExtractor {
    cfg: FrontendConfig,
    sample_rate: u32,
    fft: Fft,
    filterbank: Filterbank,
    dct: Dct,
}

impl LfccExtractor {
    pub fn new(cfg: &FrontendConfig, sample_rate: u32) -> Result<Self> {
        let filterbank = linear_filterbank(cfg, sample_rate)?;
        Ok(LfccExtractor {
            cfg: cfg.clone(),
            sample_rate,
            fft: Fft::new(cfg.n_fft),
            filterbank,
            dct: Dct::new(cfg.n_filters, cfg.n_ceps),
        })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &Filterbank {
        &self.filterbank
    }

    pub fn extract(&self, wave: &Waveform) -> Result<FeatureMatrix> {
        self.check_rate(wave.sample_rate())?;
        let frames = frame_signal(wave, &self.cfg)?;
        let power = power_spectrum_with(&self.fft, &frames)?;
        self.features_from_power(&power)
    }

    /// Features from a spectrogram computed with the same framing and FFT size.
    pub fn from_spectrogram(&self, spec: &Spectrogram) -> Result<FeatureMatrix> {
        self.check_rate(spec.sample_rate())?;
        if spec.n_fft() != self.cfg.n_fft {
            return Err(Error::Config(format!(
                "spectrogram uses a {}-point FFT, extractor expects {}",
                spec.n_fft(),
                self.cfg.n_fft
            )));
        }
        self.features_from_power(spec.power())
    }

    fn check_rate(&self, sr: u32) -> Result<()> {
        if sr != self.sample_rate {
            return Err(Error::Config(format!(
                "extractor built for {} Hz, got {sr} Hz audio",
                self.sample_rate
            )));
        }
        Ok(())
    }

    /// Static cepstra (frames × n_ceps) from a power spectrogram.
    pub fn cepstra(&self, power: &Matrix) -> Matrix {
        let n_filt = self.cfg.n_filters;
        let mut energies = vec![0.0; n_filt];
        let mut out = Matrix::zeros(power.rows(), self.cfg.n_ceps);
        for (t, row) in power.iter_rows().enumerate() {
            self.filterbank.apply(row, &mut energies);
            energies.iter_mut().for_each(|e| *e = libm::log(e.max(LOG_FLOOR)));
            self.dct.forward(&energies, out.row_mut(t));
        }
        out
    }

    fn features_from_power(&self, power: &Matrix) -> Result<FeatureMatrix> {
        let stat = self.cepstra(power);
        let d1 = deltas(&stat, self.cfg.delta_context);
        let d2 = deltas(&d1, self.cfg.delta_context);
        let c = self.cfg.n_ceps;
        let mut out = Matrix::zeros(stat.rows(), 3 * c);
        for t in 0..stat.rows() {
            let row = out.row_mut(t);
            row[..c].copy_from_slice(stat.row(t));
            row[c..2 * c].copy_from_slice(d1.row(t));
            row[2 * c..].copy_from_slice(d2.row(t));
        }
        FeatureMatrix::new(out, self.cfg.fingerprint())
    }
}

/// One-shot LFCC extraction: static, Δ and ΔΔ coefficients per frame.
pub fn extract_lfcc(wave: &Waveform, cfg: &FrontendConfig) -> Result<FeatureMatrix> {
    LfccExtractor::new(cfg, wave.sample_rate())?.extract(wave)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sine(freq: f64, sr: u32, n: usize, amp: f64) -> Waveform {
        let s = (0..n)
            .map(|i| amp * libm::sin(2.0 * PI * freq * i as f64 / sr as f64))
            .collect();
        Waveform::new(s, sr).unwrap()
    }

    #[test]
    fn waveform_rejects_out_of_range_and_empty() {
        assert!(Waveform::new(vec![], 16000).is_err());
        assert!(Waveform::new(vec![0.0], 0).is_err());
        assert!(Waveform::new(vec![0.5, 1.5], 16000).is_err());
        assert!(Waveform::new(vec![f64::NAN], 16000).is_err());
        assert!(Waveform::new(vec![-1.0, 1.0], 16000).is_ok());
    }

    #[test]
    fn one_second_at_high_resolution_gives_65_frames() {
        let w = Waveform::new(vec![0.0; 16000], 16000).unwrap();
        let frames = frame_signal(&w, &FrontendConfig::high_resolution()).unwrap();
        assert_eq!(frames.rows(), 65);
        assert_eq!(frames.cols(), 480);
    }

    #[test]
    fn exactly_one_window_gives_one_frame() {
        let w = Waveform::new(vec![0.1; 480], 16000).unwrap();
        assert_eq!(frame_signal(&w, &FrontendConfig::high_resolution()).unwrap().rows(), 1);
    }

    #[test]
    fn short_signal_is_rejected() {
        let w = Waveform::new(vec![0.1; 479], 16000).unwrap();
        assert_eq!(
            frame_signal(&w, &FrontendConfig::high_resolution()),
            Err(Error::TooShort { samples: 479, window: 480 })
        );
    }

    #[test]
    fn zero_signal_gives_zero_frames_and_spectrum() {
        let w = Waveform::new(vec![0.0; 1000], 16000).unwrap();
        let frames = frame_signal(&w, &FrontendConfig::baseline()).unwrap();
        assert!(frames.as_slice().iter().all(|&v| v == 0.0));
        let p = power_spectrum(&frames, 512).unwrap();
        assert!(p.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sinusoid_peaks_at_expected_bin() {
        let cfg = FrontendConfig::high_resolution();
        let frames = frame_signal(&sine(1000.0, 16000, 4000, 0.5), &cfg).unwrap();
        let p = power_spectrum(&frames, 1024).unwrap();
        for row in p.iter_rows() {
            let argmax = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(argmax, 64);
        }
    }

    #[test]
    fn dc_frame_puts_all_energy_in_bin_zero() {
        let frames = Matrix::from_vec(1, 64, vec![0.3; 64]).unwrap();
        let p = power_spectrum(&frames, 64).unwrap();
        assert!((p.get(0, 0) - (0.3 * 64.0f64).powi(2)).abs() < 1e-9);
        assert!(p.row(0)[1..].iter().all(|&v| v < 1e-20));
    }

    #[test]
    fn fft_shorter_than_frame_is_a_config_error() {
        let frames = Matrix::zeros(2, 480);
        assert!(matches!(power_spectrum(&frames, 256), Err(Error::Config(_))));
    }

    #[test]
    fn filter_centres_are_linearly_spaced() {
        let cfg = FrontendConfig::baseline();
        let fb = linear_filterbank(&cfg, 16000).unwrap();
        assert_eq!(fb.n_filters(), 20);
        assert_eq!(fb.band(), (0.0, 8000.0));
        // centre spacing before any per-bin quantisation is (f_max - f_min) / (N + 1)
        let spacing: f64 = 8000.0 / 21.0;
        assert!((spacing - 380.952).abs() < 1e-3);
        let m = fb.to_matrix();
        let bin_hz = 16000.0 / 512.0;
        for i in 0..20 {
            let row = m.row(i);
            let peak = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            let centre = (i + 1) as f64 * spacing;
            assert!((peak as f64 * bin_hz - centre).abs() <= bin_hz / 2.0 + 1e-9);
        }
    }

    #[test]
    fn single_filter_is_centred_mid_band() {
        let cfg = FrontendConfig::high_resolution().with_filters(1).with_band(1000.0, 3000.0);
        let cfg = FrontendConfig { n_ceps: 1, ..cfg };
        let m = linear_filterbank(&cfg, 16000).unwrap().to_matrix();
        let row = m.row(0);
        let peak = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(peak as f64 * 15.625, 2000.0);
        assert_eq!(row[peak], 1.0);
    }

    #[test]
    fn bin_aligned_edge_survives_snapping() {
        assert_eq!(snap_to_bin(15.625, 15.625), 15.625);
        assert!((snap_to_bin(15.62, 15.625) - 15.62).abs() < 0.01);
        let cfg = FrontendConfig::high_resolution().with_band(15.62, 4806.0);
        let fb = linear_filterbank(&cfg, 16000).unwrap();
        assert_eq!(fb.band().0, 15.625);
    }

    #[test]
    fn too_narrow_band_is_rejected() {
        let cfg = FrontendConfig::high_resolution().with_band(1000.0, 1500.0);
        assert!(matches!(linear_filterbank(&cfg, 16000), Err(Error::Config(_))));
    }

    #[test]
    fn interior_filters_vanish_outside_neighbour_centres() {
        let cfg = FrontendConfig::high_resolution().with_band(2000.0, 6000.0).with_filters(30);
        let fb = linear_filterbank(&cfg, 16000).unwrap();
        let m = fb.to_matrix();
        let spacing = 4000.0 / 31.0;
        for i in 1..29 {
            let lo = 2000.0 + i as f64 * spacing;
            let hi = 2000.0 + (i + 2) as f64 * spacing;
            let row = m.row(i);
            assert!(row.iter().sum::<f64>() > 0.0);
            for (k, &w) in row.iter().enumerate() {
                assert!(w >= 0.0);
                let f = k as f64 * 15.625;
                if f <= lo || f >= hi {
                    assert_eq!(w, 0.0, "filter {i} bin {k}");
                }
            }
        }
    }

    #[test]
    fn dct_of_constant_has_only_c0() {
        let dct = Dct::new(20, 20);
        let mut out = vec![0.0; 20];
        dct.forward(&[-3.0; 20], &mut out);
        assert!((out[0] - (-3.0 * libm::sqrt(20.0))).abs() < 1e-12);
        assert!(out[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn time_constant_features_have_zero_deltas() {
        // a DC signal gives identical frames, hence identical cepstra
        let w = Waveform::new(vec![0.25; 4000], 16000).unwrap();
        let f = extract_lfcc(&w, &FrontendConfig::baseline()).unwrap();
        for row in f.matrix().iter_rows() {
            assert!(row[20..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn baseline_features_are_sixty_dimensional() {
        let f = extract_lfcc(&sine(440.0, 16000, 8000, 0.3), &FrontendConfig::baseline()).unwrap();
        assert_eq!(f.dims(), 60);
        assert_eq!(f.frames(), frame_count(8000, 320, 160).unwrap());
        assert_eq!(f.config_hash(), FrontendConfig::baseline().fingerprint());
    }

    #[test]
    fn delta_of_linear_ramp_is_its_slope_in_the_interior() {
        let m = Matrix::from_vec(10, 1, (0..10).map(|i| 2.0 * i as f64).collect()).unwrap();
        let d = deltas(&m, 2);
        for t in 2..8 {
            assert!((d.get(t, 0) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn validation_catches_bad_configs() {
        let ok = FrontendConfig::baseline();
        assert!(ok.validate(16000).is_ok());
        assert!(FrontendConfig { hop_ms: 30.0, ..ok.clone() }.validate(16000).is_err());
        assert!(FrontendConfig { n_fft: 256, ..ok.clone() }.validate(16000).is_err());
        assert!(ok.clone().with_band(0.0, 9000.0).validate(16000).is_err());
        assert!(ok.clone().with_band(4000.0, 4000.0).validate(16000).is_err());
        assert!(FrontendConfig { n_ceps: 21, ..ok.clone() }.validate(16000).is_err());
        assert!(FrontendConfig { delta_context: 0, ..ok }.validate(16000).is_err());
    }

    proptest! {
        #[test]
        fn frame_count_matches_closed_form(len in 480usize..20000, win in 1usize..480, hop_frac in 0.05f64..1.0) {
            let hop = ((win as f64 * hop_frac) as usize).max(1);
            let n = frame_count(len, win, hop).unwrap();
            // last frame fits, one more would not
            prop_assert!((n - 1) * hop + win <= len);
            prop_assert!(n * hop + win > len);
        }

        #[test]
        fn power_spectrum_is_sign_invariant_and_quadratic(seed in 0u64..1000, a in 0.1f64..4.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
            let p = power_spectrum(&Matrix::from_vec(1, 100, x).unwrap(), 128).unwrap();
            let pn = power_spectrum(&Matrix::from_vec(1, 100, neg).unwrap(), 128).unwrap();
            let ps = power_spectrum(&Matrix::from_vec(1, 100, scaled).unwrap(), 128).unwrap();
            for k in 0..65 {
                prop_assert_eq!(p.get(0, k), pn.get(0, k));
                prop_assert!((ps.get(0, k) - a * a * p.get(0, k)).abs() <= 1e-9 * (1.0 + ps.get(0, k)));
            }
        }

        #[test]
        fn dct_round_trips(x in proptest::collection::vec(-50.0f64..50.0, 1..80)) {
            let dct = Dct::new(x.len(), x.len());
            let mut y = vec![0.0; x.len()];
            dct.forward(&x, &mut y);
            let back = dct.inverse(&y);
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn deltas_are_linear(vals in proptest::collection::vec(-10.0f64..10.0, 12), a in -5.0f64..5.0, c in -3.0f64..3.0) {
            let m = Matrix::from_vec(6, 2, vals.clone()).unwrap();
            let scaled = Matrix::from_vec(6, 2, vals.iter().map(|v| a * v).collect()).unwrap();
            let d = deltas(&m, 2);
            let ds = deltas(&scaled, 2);
            for (x, y) in d.as_slice().iter().zip(ds.as_slice()) {
                prop_assert!((a * x - y).abs() < 1e-9);
            }
            let constant = Matrix::from_vec(6, 2, vec![c; 12]).unwrap();
            prop_assert!(deltas(&constant, 2).as_slice().iter().all(|&v| v == 0.0));
        }
    }
}
