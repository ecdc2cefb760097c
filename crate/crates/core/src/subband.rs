//! Sub-band search: min t-DCF heat-maps over (cut-in, cut-off) grids and the
//! centre of mass of the resulting performance landscape.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::frontend::{snap_to_bin, FeatureMatrix, FrontendConfig, LfccExtractor, Spectrogram};
use crate::gmm::{CmPair, EmOptions};
use crate::metrics::{eer, fit_score_gaussians, min_tdcf, LabeledScores, TdcfCosts};

/// Mass cap used when a cell reaches zero t-DCF.
pub const DEFAULT_EPSILON: f64 = 1e-3;
/// Fewest filters a sub-band front-end is given.
pub const MIN_BAND_FILTERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub f_min: f64,
    pub f_max: f64,
}

impl Band {
    pub fn new(f_min: f64, f_max: f64) -> Self {
        Band { f_min, f_max }
    }

    pub fn width(&self) -> f64 {
        self.f_max - self.f_min
    }

    pub fn overlaps(&self, other: &Band) -> bool {
        self.f_min < other.f_max && other.f_min < self.f_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandGrid {
    cut_in: Vec<f64>,
    cut_off: Vec<f64>,
    min_width: f64,
}

fn check_axis(v: &[f64], name: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Config(format!("{name} candidates are empty")));
    }
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{name} candidates must be finite, non-negative and strictly ascending")));
    }
    Ok(())
}

impl BandGrid {
    pub fn new(cut_in: Vec<f64>, cut_off: Vec<f64>, min_width: f64) -> Result<Self> {
        check_axis(&cut_in, "cut-in")?;
        check_axis(&cut_off, "cut-off")?;
        if !(min_width > 0.0) {
            return Err(Error::Config("minimum band width must be positive".into()));
        }
        let grid = BandGrid { cut_in, cut_off, min_width };
        if grid.cells().is_empty() {
            return Err(Error::Config("grid has no valid cells".into()));
        }
        Ok(grid)
    }

    /// `n` evenly spaced candidates from 0 to `f_top` on both axes.
    pub fn uniform(n: usize, f_top: f64, min_width: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("a uniform grid needs at least 2 candidates per axis".into()));
        }
        let axis: Vec<f64> = (0..n).map(|i| f_top * i as f64 / (n - 1) as f64).collect();
        BandGrid::new(axis.clone(), axis, min_width)
    }

    pub fn cut_in(&self) -> &[f64] {
        &self.cut_in
    }

    pub fn cut_off(&self) -> &[f64] {
        &self.cut_off
    }

    pub fn min_width(&self) -> f64 {
        self.min_width
    }

    pub fn is_valid(&self, band: &Band) -> bool {
        self.cut_in.contains(&band.f_min) && self.cut_off.contains(&band.f_max) && band.width() >= self.min_width
    }

    /// Valid cells, ordered by cut-in then cut-off.
    pub fn cells(&self) -> Vec<Band> {
        let mut out = Vec::new();
        for &lo in &self.cut_in {
            for &hi in &self.cut_off {
                if hi - lo >= self.min_width {
                    out.push(Band::new(lo, hi));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatCell {
    pub band: Band,
    pub min_tdcf: f64,
}

/// Min t-DCF per valid grid cell for one attack. Cells whose training failed
/// are listed in `failures` and have no value.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap {
    grid: BandGrid,
    attack_id: String,
    cells: Vec<HeatCell>,
    failures: Vec<(Band, String)>,
}

impl HeatMap {
    pub fn new(grid: BandGrid, attack_id: impl Into<String>) -> Self {
        HeatMap { grid, attack_id: attack_id.into(), cells: Vec::new(), failures: Vec::new() }
    }

    pub fn insert(&mut self, band: Band, min_tdcf: f64) -> Result<()> {
        if !self.grid.is_valid(&band) {
            return Err(Error::InvalidInput(format!("[{}, {}] is not a valid grid cell", band.f_min, band.f_max)));
        }
        if !(min_tdcf >= 0.0 && min_tdcf.is_finite()) {
            return Err(Error::InvalidInput(format!("cell value {min_tdcf} is not a finite non-negative t-DCF")));
        }
        self.failures.retain(|(b, _)| *b != band);
        match self.cells.iter_mut().find(|c| c.band == band) {
            Some(c) => c.min_tdcf = min_tdcf,
            None => self.cells.push(HeatCell { band, min_tdcf }),
        }
        self.sort();
        Ok(())
    }

    pub fn record_failure(&mut self, band: Band, reason: impl Into<String>) {
        self.cells.retain(|c| c.band != band);
        self.failures.retain(|(b, _)| *b != band);
        self.failures.push((band, reason.into()));
        self.sort();
    }

    fn sort(&mut self) {
        let key = |b: &Band| (b.f_min, b.f_max);
        self.cells.sort_by(|a, b| key(&a.band).partial_cmp(&key(&b.band)).expect("finite"));
        self.failures.sort_by(|a, b| key(&a.0).partial_cmp(&key(&b.0)).expect("finite"));
    }

    pub fn grid(&self) -> &BandGrid {
        &self.grid
    }

    pub fn attack_id(&self) -> &str {
        &self.attack_id
    }

    /// Cells with a value, ordered by cut-in then cut-off.
    pub fn cells(&self) -> &[HeatCell] {
        &self.cells
    }

    pub fn failures(&self) -> &[(Band, String)] {
        &self.failures
    }

    pub fn get(&self, band: &Band) -> Option<f64> {
        self.cells.iter().find(|c| c.band == *band).map(|c| c.min_tdcf)
    }

    /// Lowest-valued cell; ties go to the first in cell order.
    pub fn min_cell(&self) -> Option<HeatCell> {
        self.cells.iter().copied().fold(None, |best: Option<HeatCell>, c| match best {
            Some(b) if b.min_tdcf <= c.min_tdcf => Some(b),
            _ => Some(c),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComResult {
    pub f_min: f64,
    pub f_max: f64,
    /// Sum of the cell masses.
    pub total_mass: f64,
    pub epsilon: f64,
}

impl ComResult {
    pub fn band(&self) -> Band {
        Band::new(self.f_min, self.f_max)
    }

    /// The band with both edges moved to the nearest FFT bin centre.
    pub fn snapped(&self, bin_hz: f64) -> Band {
        Band::new(snap_to_bin(self.f_min, bin_hz), snap_to_bin(self.f_max, bin_hz))
    }
}

/// Mass-weighted mean of cell coordinates with mass `1 / max(t-DCF, epsilon)`.
pub fn center_of_mass(hm: &HeatMap, epsilon: f64) -> Result<ComResult> {
    if !(epsilon > 0.0) {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    if hm.cells.is_empty() {
        return Err(Error::InsufficientData("heat-map has no cells".into()));
    }
    let (mut m, mut x, mut y) = (0.0, 0.0, 0.0);
    for c in &hm.cells {
        let mass = 1.0 / c.min_tdcf.max(epsilon);
        m += mass;
        x += mass * c.band.f_min;
        y += mass * c.band.f_max;
    }
    Ok(ComResult { f_min: x / m, f_max: y / m, total_mass: m, epsilon })
}

/// Filter count for a sub-band: `n_full` scaled by the band's share of
/// `[0, nyquist]`, at least [`MIN_BAND_FILTERS`], and never so many that filter
/// spacing drops below one FFT bin.
pub fn filters_for_band(band: &Band, nyquist: f64, n_full: usize, bin_hz: f64) -> usize {
    let scaled = libm::round(n_full as f64 * band.width() / nyquist) as usize;
    let snapped = snap_to_bin(band.f_max, bin_hz) - snap_to_bin(band.f_min, bin_hz);
    let cap = (libm::floor(snapped / bin_hz + 1e-9) as usize).saturating_sub(1).max(1);
    scaled.max(MIN_BAND_FILTERS).min(cap)
}

/// Front-end settings for one heat-map cell derived from a full-band template.
pub fn band_config(template: &FrontendConfig, band: &Band, sample_rate: u32) -> FrontendConfig {
    let nyquist = sample_rate as f64 / 2.0;
    let n = filters_for_band(band, nyquist, template.n_filters, template.bin_hz(sample_rate));
    let mut cfg = template.clone().with_band(band.f_min, band.f_max).with_filters(n);
    cfg.n_ceps = cfg.n_ceps.min(n);
    cfg
}

/// A power spectrogram with its label (`None` is bona fide).
#[derive(Debug, Clone)]
pub struct LabeledSpectrogram {
    pub attack_id: Option<String>,
    pub spectrogram: Spectrogram,
}

/// Everything needed to train and evaluate a countermeasure for one band.
#[derive(Debug, Clone)]
pub struct BandExperiment<'a> {
    pub template: &'a FrontendConfig,
    pub em: &'a EmOptions,
    pub costs: TdcfCosts,
    pub train: &'a [LabeledSpectrogram],
    pub eval: &'a [LabeledSpectrogram],
}

fn sample_rate_of(data: &[LabeledSpectrogram]) -> Result<u32> {
    let sr = data.first().map(|u| u.spectrogram.sample_rate()).ok_or_else(|| Error::InsufficientData("no utterances".into()))?;
    if data.iter().any(|u| u.spectrogram.sample_rate() != sr) {
        return Err(Error::InvalidInput("utterances have mixed sample rates".into()));
    }
    Ok(sr)
}

impl BandExperiment<'_> {
    fn features(&self, ex: &LfccExtractor, data: &[LabeledSpectrogram], keep: impl Fn(&Option<String>) -> bool) -> Result<Vec<FeatureMatrix>> {
        data.iter().filter(|u| keep(&u.attack_id)).map(|u| ex.from_spectrogram(&u.spectrogram)).collect()
    }

    /// Trains on all training trials and scores eval bona fide trials plus the
    /// eval trials of `attack` (all spoofs when `None`).
    pub fn scores_for(&self, cfg: &FrontendConfig, attack: Option<&str>) -> Result<LabeledScores> {
        let sr = sample_rate_of(self.train)?;
        if sample_rate_of(self.eval)? != sr {
            return Err(Error::InvalidInput("train and eval sample rates differ".into()));
        }
        let ex = LfccExtractor::new(cfg, sr)?;
        let bona = self.features(&ex, self.train, |a| a.is_none())?;
        let spoof = self.features(&ex, self.train, |a| a.is_some())?;
        let cm = CmPair::train(&bona, &spoof, self.em)?;
        let mut b = Vec::new();
        let mut s = Vec::new();
        for u in self.eval {
            match (&u.attack_id, attack) {
                (None, _) => b.push(cm.llr_score(&ex.from_spectrogram(&u.spectrogram)?)?),
                (Some(a), Some(want)) if a != want => {}
                (Some(_), _) => s.push(cm.llr_score(&ex.from_spectrogram(&u.spectrogram)?)?),
            }
        }
        LabeledScores::new(b, s)
    }

    /// Min t-DCF of the countermeasure restricted to `band`.
    pub fn evaluate_cell(&self, band: &Band, attack: &str) -> Result<f64> {
        let sr = sample_rate_of(self.train)?;
        let cfg = band_config(self.template, band, sr);
        Ok(min_tdcf(&self.scores_for(&cfg, Some(attack))?, &self.costs).value)
    }
}

/// Collects per-cell outcomes into a heat-map. The result does not depend on
/// the order of `outcomes`.
pub fn assemble_heatmap(grid: &BandGrid, attack_id: &str, outcomes: Vec<(Band, Result<f64>)>) -> Result<HeatMap> {
    let mut hm = HeatMap::new(grid.clone(), attack_id);
    for (band, r) in outcomes {
        match r {
            Ok(v) => hm.insert(band, v)?,
            Err(e) => hm.record_failure(band, format!("{e}")),
        }
    }
    Ok(hm)
}

/// Evaluates every valid cell of `grid` in turn.
pub fn build_heatmap(grid: &BandGrid, attack_id: &str, exp: &BandExperiment<'_>) -> Result<HeatMap> {
    if !exp.eval.iter().any(|u| u.attack_id.as_deref() == Some(attack_id)) {
        return Err(Error::EmptyClass(attack_id.into()));
    }
    let outcomes = grid.cells().into_iter().map(|b| (b, exp.evaluate_cell(&b, attack_id))).collect();
    assemble_heatmap(grid, attack_id, outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n_filters: usize,
    pub min_tdcf: f64,
    pub eer: f64,
    pub bhattacharyya: f64,
}

/// Full-band countermeasures for each filter count, scored on all eval trials.
pub fn resolution_sweep(filter_counts: &[usize], exp: &BandExperiment<'_>) -> Vec<(usize, Result<SweepRow>)> {
    filter_counts
        .iter()
        .map(|&n| {
            let row = (|| {
                let mut cfg = exp.template.clone().with_filters(n);
                cfg.n_ceps = cfg.n_ceps.min(n);
                let scores = exp.scores_for(&cfg, None)?;
                Ok(SweepRow {
                    n_filters: n,
                    min_tdcf: min_tdcf(&scores, &exp.costs).value,
                    eer: eer(&scores),
                    bhattacharyya: fit_score_gaussians(&scores)?.bhattacharyya()?,
                })
            })();
            (n, row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn map(cells: &[((f64, f64), f64)]) -> HeatMap {
        let mut lo: Vec<f64> = cells.iter().map(|c| c.0 .0).collect();
        let mut hi: Vec<f64> = cells.iter().map(|c| c.0 .1).collect();
        for v in [&mut lo, &mut hi] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let min_w = cells.iter().map(|c| c.0 .1 - c.0 .0).fold(f64::INFINITY, f64::min).max(1e-9);
        let grid = BandGrid::new(lo, hi, min_w).unwrap();
        let mut hm = HeatMap::new(grid, "A01");
        for &((a, b), v) in cells {
            hm.insert(Band::new(a, b), v).unwrap();
        }
        hm
    }

    #[test]
    fn equal_masses_give_the_midpoint() {
        let r = center_of_mass(&map(&[((0.0, 8000.0), 0.5), ((4000.0, 8000.0), 0.5)]), DEFAULT_EPSILON).unwrap();
        assert_eq!((r.f_min, r.f_max), (2000.0, 8000.0));
    }

    #[test]
    fn masses_weight_the_mean() {
        // (0, 0) is not a band; build the heat-map by hand on a permissive grid
        let grid = BandGrid::new(vec![0.0, 4000.0], vec![0.0, 8000.0], 1e-9).unwrap();
        let mut hm = HeatMap::new(grid, "A01");
        hm.cells = vec![
            HeatCell { band: Band::new(0.0, 0.0), min_tdcf: 1.0 },
            HeatCell { band: Band::new(4000.0, 8000.0), min_tdcf: 1.0 / 3.0 },
        ];
        let r = center_of_mass(&hm, DEFAULT_EPSILON).unwrap();
        assert!((r.f_min - 3000.0).abs() < 1e-9 && (r.f_max - 6000.0).abs() < 1e-9);
        assert!((r.total_mass - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_cells_are_capped_by_epsilon() {
        let r = center_of_mass(&map(&[((0.0, 4000.0), 0.0), ((4000.0, 8000.0), 1.0)]), 1e-3).unwrap();
        assert_eq!(r.total_mass, 1001.0);
        assert!((r.f_min - 4000.0 / 1001.0).abs() < 1e-9);
    }

    #[test]
    fn empty_heatmap_is_an_error() {
        let hm = HeatMap::new(BandGrid::uniform(3, 8000.0, 800.0).unwrap(), "A01");
        assert!(matches!(center_of_mass(&hm, DEFAULT_EPSILON), Err(Error::InsufficientData(_))));
        assert!(center_of_mass(&map(&[((0.0, 8000.0), 0.5)]), 0.0).is_err());
    }

    #[test]
    fn single_cell_is_its_own_centre() {
        let r = center_of_mass(&map(&[((1200.0, 5200.0), 0.37)]), DEFAULT_EPSILON).unwrap();
        assert_eq!((r.f_min, r.f_max), (1200.0, 5200.0));
    }

    #[test]
    fn grid_keeps_upper_triangle() {
        let g = BandGrid::uniform(5, 8000.0, 4000.0).unwrap();
        let cells = g.cells();
        assert_eq!(cells.len(), 3 + 2 + 1);
        assert!(cells.iter().all(|b| b.width() >= 4000.0));
        assert!(BandGrid::uniform(3, 8000.0, 9000.0).is_err());
        assert!(BandGrid::new(vec![0.0, 0.0], vec![8000.0], 100.0).is_err());
    }

    #[test]
    fn invalid_values_and_cells_are_rejected() {
        let mut hm = HeatMap::new(BandGrid::uniform(3, 8000.0, 4000.0).unwrap(), "A01");
        assert!(hm.insert(Band::new(0.0, 8000.0), -0.1).is_err());
        assert!(hm.insert(Band::new(0.0, 8000.0), f64::NAN).is_err());
        assert!(hm.insert(Band::new(4000.0, 4000.0), 0.1).is_err());
        hm.record_failure(Band::new(0.0, 8000.0), "boom");
        assert_eq!(hm.get(&Band::new(0.0, 8000.0)), None);
        assert_eq!(hm.failures().len(), 1);
    }

    #[test]
    fn assembly_ignores_completion_order() {
        let grid = BandGrid::uniform(4, 8000.0, 2000.0).unwrap();
        let outcomes: Vec<(Band, Result<f64>)> =
            grid.cells().into_iter().enumerate().map(|(i, b)| (b, if i == 2 { Err(Error::NotPositiveDefinite) } else { Ok(i as f64 * 0.1) })).collect();
        let mut reversed: Vec<(Band, Result<f64>)> = outcomes.clone();
        reversed.reverse();
        let a = assemble_heatmap(&grid, "A02", outcomes).unwrap();
        let b = assemble_heatmap(&grid, "A02", reversed).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.failures().len(), 1);
        assert_eq!(a.min_cell().unwrap().min_tdcf, 0.0);
    }

    #[test]
    fn band_filters_scale_with_width_and_respect_bins() {
        let bin = 16000.0 / 1024.0;
        assert_eq!(filters_for_band(&Band::new(0.0, 8000.0), 8000.0, 70, bin), 70);
        assert_eq!(filters_for_band(&Band::new(0.0, 4000.0), 8000.0, 70, bin), 35);
        assert_eq!(filters_for_band(&Band::new(0.0, 800.0), 8000.0, 70, bin), 10);
        // 150 Hz snaps to 10 bins, so at most 9 filters
        assert_eq!(filters_for_band(&Band::new(0.0, 150.0), 8000.0, 70, bin), 9);
        assert_eq!(filters_for_band(&Band::new(0.0, 100.0), 8000.0, 70, bin), 5);
        let cfg = band_config(&FrontendConfig::high_resolution(), &Band::new(2000.0, 2800.0), 16000);
        assert_eq!((cfg.n_filters, cfg.n_ceps), (10, 10));
        cfg.validate(16000).unwrap();
    }

    fn random_map() -> impl Strategy<Value = (usize, Vec<Option<f64>>, f64)> {
        (2usize..=20).prop_flat_map(|n| {
            (Just(n), prop::collection::vec(prop::option::weighted(0.8, 0.0f64..2.0), n * n), 0.1f64..100.0)
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force_and_ignores_scale((n, values, scale) in random_map()) {
            let grid = BandGrid::uniform(n, 8000.0, 1e-6).unwrap();
            let mut hm = HeatMap::new(grid.clone(), "A");
            let mut oracle = (0.0, 0.0, 0.0);
            for (b, v) in grid.cells().into_iter().zip(&values) {
                if let Some(v) = v {
                    hm.insert(b, *v).unwrap();
                    let m = 1.0 / v.max(DEFAULT_EPSILON);
                    oracle = (oracle.0 + m, oracle.1 + m * b.f_min, oracle.2 + m * b.f_max);
                }
            }
            prop_assume!(!hm.cells().is_empty());
            let r = center_of_mass(&hm, DEFAULT_EPSILON).unwrap();
            prop_assert!((r.f_min - oracle.1 / oracle.0).abs() <= 1e-12 * 8000.0);
            prop_assert!((r.f_max - oracle.2 / oracle.0).abs() <= 1e-12 * 8000.0);
            // scaling every value scales every mass, as long as no value hits the cap
            let mut scaled = HeatMap::new(grid, "A");
            for c in hm.cells() {
                scaled.insert(c.band, c.min_tdcf * scale + 1.0).unwrap();
            }
            let mut base = HeatMap::new(scaled.grid().clone(), "A");
            for c in hm.cells() {
                base.insert(c.band, c.min_tdcf + 1.0 / scale).unwrap();
            }
            let a = center_of_mass(&scaled, DEFAULT_EPSILON).unwrap();
            let b = center_of_mass(&base, DEFAULT_EPSILON).unwrap();
            prop_assert!((a.f_min - b.f_min).abs() < 1e-9 && (a.f_max - b.f_max).abs() < 1e-9);
        }
    }
}
