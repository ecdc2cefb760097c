//! Diagonal-covariance Gaussian mixture models trained by EM, and the
//! bona fide / spoof model pair used as a countermeasure.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frontend::FeatureMatrix;
use crate::matrix::Matrix;

const LN_2PI: f64 = 1.8378770664093453;
/// Components whose total responsibility falls below this are re-seeded.
const EMPTY_OCCUPANCY: f64 = 1e-10;
/// Absolute lower bound on the variance floor, for constant feature dimensions.
const MIN_VARIANCE: f64 = 1e-12;
const WORST_FRAMES_KEPT: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    dims: usize,
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
    // ln w_k - ½ Σ_d ln(2π σ²_kd)
    log_consts: Vec<f64>,
    inv_vars: Vec<f64>,
}

impl GmmModel {
    /// `means` and `variances` are component-major (K × dims).
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.is_empty() || !means.len().is_multiple_of(k) || variances.len() != means.len() {
            return Err(Error::InvalidInput(format!(
                "inconsistent GMM shapes: {} weights, {} means, {} variances",
                k,
                means.len(),
                variances.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("GMM weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!("GMM weights sum to {total}, not 1")));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("GMM means must be finite".into()));
        }
        if variances.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidInput("GMM variances must be finite and positive".into()));
        }
        let dims = means.len() / k;
        let inv_vars: Vec<f64> = variances.iter().map(|v| 1.0 / v).collect();
        let log_consts = (0..k)
            .map(|c| {
                let logdet: f64 = variances[c * dims..(c + 1) * dims].iter().map(|v| libm::log(*v)).sum();
                libm::log(weights[c]) - 0.5 * (dims as f64 * LN_2PI + logdet)
            })
            .collect();
        Ok(GmmModel { dims, weights, means, variances, log_consts, inv_vars })
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.dims..(k + 1) * self.dims]
    }

    pub fn variance(&self, k: usize) -> &[f64] {
        &self.variances[k * self.dims..(k + 1) * self.dims]
    }

    /// Fills `terms[k]` with `ln w_k + ln N(x; μ_k, Σ_k)` and returns their log-sum-exp.
    fn component_terms(&self, x: &[f64], terms: &mut [f64]) -> f64 {
        let d = self.dims;
        let mut max = f64::NEG_INFINITY;
        for (k, t) in terms.iter_mut().enumerate() {
            let mu = &self.means[k * d..(k + 1) * d];
            let iv = &self.inv_vars[k * d..(k + 1) * d];
            let mut q = 0.0;
            for j in 0..d {
                let z = x[j] - mu[j];
                q += z * z * iv[j];
            }
            *t = self.log_consts[k] - 0.5 * q;
            max = max.max(*t);
        }
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + libm::log(terms.iter().map(|t| libm::exp(t - max)).sum::<f64>())
    }

    /// Log density of a single frame.
    pub fn frame_log_likelihood(&self, x: &[f64]) -> f64 {
        let mut terms = vec![0.0; self.n_components()];
        self.component_terms(x, &mut terms)
    }

    /// Average per-frame log-likelihood in nats.
    pub fn log_likelihood<M: AsRef<Matrix>>(&self, features: &M) -> Result<f64> {
        let m = features.as_ref();
        if m.cols() != self.dims {
            return Err(Error::DimMismatch { expected: self.dims, got: m.cols() });
        }
        if m.rows() == 0 {
            return Err(Error::InvalidInput("no frames to score".into()));
        }
        let mut terms = vec![0.0; self.n_components()];
        let total: f64 = m.iter_rows().map(|x| self.component_terms(x, &mut terms)).sum();
        Ok(total / m.rows() as f64)
    }
}

/// EM settings. Frames must number at least ten per component.
#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions {
    pub n_components: usize,
    pub max_iters: usize,
    /// Stop when the relative gain in average log-likelihood drops below this.
    pub tol: f64,
    /// Variance floor as a fraction of the global per-dimension variance.
    pub variance_floor_ratio: f64,
    pub kmeans_iters: usize,
    pub seed: u64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            n_components: 512,
            max_iters: 100,
            tol: 1e-5,
            variance_floor_ratio: 1e-3,
            kmeans_iters: 10,
            seed: 0,
        }
    }
}

impl EmOptions {
    pub fn with_components(mut self, k: usize) -> Self {
        self.n_components = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// What happened during training.
#[derive(Debug, Clone, PartialEq)]
pub struct EmTrace {
    /// Average log-likelihood of the initial model, then after every M-step.
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
    pub reseeded: usize,
    pub variance_floor: Vec<f64>,
}

/// Per-component occupancies and first/second moments, accumulated around a fixed shift.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    k: usize,
    d: usize,
    shift: Vec<f64>,
    occupancy: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
    total_ll: f64,
    frames: usize,
    worst: Vec<(f64, Vec<f64>)>,
}

impl SuffStats {
    pub fn new(k: usize, shift: Vec<f64>) -> Self {
        let d = shift.len();
        SuffStats {
            k,
            d,
            shift,
            occupancy: vec![0.0; k],
            first: vec![0.0; k * d],
            second: vec![0.0; k * d],
            total_ll: 0.0,
            frames: 0,
            worst: Vec::new(),
        }
    }

    /// E-step over one block of frames.
    pub fn accumulate(&mut self, model: &GmmModel, frames: &Matrix) {
        let (k, d) = (self.k, self.d);
        let mut terms = vec![0.0; k];
        let mut centred = vec![0.0; d];
        for x in frames.iter_rows() {
            let ll = model.component_terms(x, &mut terms);
            self.total_ll += ll;
            self.frames += 1;
            self.note_frame(ll, x);
            for (c, s) in centred.iter_mut().zip(x.iter().zip(&self.shift)) {
                *c = s.0 - s.1;
            }
            for c in 0..k {
                let g = libm::exp(terms[c] - ll);
                if g == 0.0 || !g.is_finite() {
                    continue;
                }
                self.occupancy[c] += g;
                let f = &mut self.first[c * d..(c + 1) * d];
                let s = &mut self.second[c * d..(c + 1) * d];
                for j in 0..d {
                    let gx = g * centred[j];
                    f[j] += gx;
                    s[j] += gx * centred[j];
                }
            }
        }
    }

    fn note_frame(&mut self, ll: f64, x: &[f64]) {
        if self.worst.len() < WORST_FRAMES_KEPT || ll < self.worst[self.worst.len() - 1].0 {
            let pos = self.worst.partition_point(|(v, _)| *v <= ll);
            self.worst.insert(pos, (ll, x.to_vec()));
            self.worst.truncate(WORST_FRAMES_KEPT);
        }
    }

    /// Adds statistics gathered on a disjoint block of frames.
    pub fn merge(&mut self, other: &SuffStats) {
        assert_eq!((self.k, self.d), (other.k, other.d));
        for (a, b) in self.occupancy.iter_mut().zip(&other.occupancy) {
            *a += b;
        }
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            *a += b;
        }
        for (a, b) in self.second.iter_mut().zip(&other.second) {
            *a += b;
        }
        self.total_ll += other.total_ll;
        self.frames += other.frames;
        for (ll, x) in &other.worst {
            self.note_frame(*ll, x);
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn occupancy(&self) -> &[f64] {
        &self.occupancy
    }

    pub fn average_log_likelihood(&self) -> f64 {
        self.total_ll / self.frames as f64
    }
}

/// Per-dimension variance floor: `ratio` times the global variance of the frames.
pub fn variance_floor<M: AsRef<Matrix>>(features: &[M], ratio: f64) -> Vec<f64> {
    let (_, var) = global_moments(features);
    var.iter().map(|v| (ratio * v).max(MIN_VARIANCE)).collect()
}

fn global_moments<M: AsRef<Matrix>>(features: &[M]) -> (Vec<f64>, Vec<f64>) {
    let d = features.first().map_or(0, |m| m.as_ref().cols());
    let mut mean = vec![0.0; d];
    let mut n = 0usize;
    for m in features {
        for x in m.as_ref().iter_rows() {
            for (a, b) in mean.iter_mut().zip(x) {
                *a += b;
            }
            n += 1;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n.max(1) as f64);
    let mut var = vec![0.0; d];
    for m in features {
        for x in m.as_ref().iter_rows() {
            for j in 0..d {
                let z = x[j] - mean[j];
                var[j] += z * z;
            }
        }
    }
    var.iter_mut().for_each(|v| *v /= n.max(1) as f64);
    (mean, var)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centres: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centres.iter().enumerate() {
        let dist = sq_dist(x, c);
        if dist < best.1 {
            best = (i, dist);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations. Returns centres and assignments.
pub fn kmeans(frames: &[&[f64]], k: usize, iters: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = frames.len();
    let mut centres: Vec<Vec<f64>> = Vec::with_capacity(k);
    centres.push(frames[rng.random_range(0..n)].to_vec());
    let mut dist: Vec<f64> = frames.iter().map(|x| sq_dist(x, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in dist.iter().enumerate() {
                if u < *d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = frames[next].to_vec();
        for (d, x) in dist.iter_mut().zip(frames) {
            *d = d.min(sq_dist(x, &c));
        }
        centres.push(c);
    }

    let d = frames[0].len();
    let mut assign = vec![0usize; n];
    for _ in 0..iters {
        let mut far = (0, -1.0);
        for (i, x) in frames.iter().enumerate() {
            let (c, dist) = nearest(x, &centres);
            assign[i] = c;
            if dist > far.1 {
                far = (i, dist);
            }
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (x, &c) in frames.iter().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(x.iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // empty cluster moves to the frame farthest from its centre
                centres[c] = frames[far.0].to_vec();
                far.1 = -1.0;
            } else {
                centres[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    for (i, x) in frames.iter().enumerate() {
        assign[i] = nearest(x, &centres).0;
    }
    (centres, assign)
}

fn initial_model(
    frames: &[&[f64]],
    k: usize,
    opts: &EmOptions,
    global_var: &[f64],
    floor: &[f64],
) -> Result<GmmModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (centres, assign) = kmeans(frames, k, opts.kmeans_iters, &mut rng);
    let d = frames[0].len();
    let mut counts = vec![0usize; k];
    let mut sq = vec![vec![0.0; d]; k];
    for (x, &c) in frames.iter().zip(&assign) {
        counts[c] += 1;
        for j in 0..d {
            let z = x[j] - centres[c][j];
            sq[c][j] += z * z;
        }
    }
    let total: usize = counts.iter().map(|&c| c.max(1)).sum();
    let weights = counts.iter().map(|&c| c.max(1) as f64 / total as f64).collect();
    let means = centres.concat();
    let mut variances = Vec::with_capacity(k * d);
    for c in 0..k {
        for j in 0..d {
            let v = if counts[c] >= 2 { sq[c][j] / counts[c] as f64 } else { global_var[j] };
            variances.push(v.max(floor[j]));
        }
    }
    GmmModel::new(normalise(weights), means, variances)
}

fn normalise(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn m_step(
    stats: &SuffStats,
    floor: &[f64],
    global_var: &[f64],
    reseeded: &mut usize,
) -> Result<GmmModel> {
    let (k, d) = (stats.k, stats.d);
    let n = stats.frames as f64;
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k * d);
    let mut variances = Vec::with_capacity(k * d);
    let mut spare = stats.worst.iter();
    for c in 0..k {
        let occ = stats.occupancy[c];
        if !(occ >= EMPTY_OCCUPANCY) {
            // empty component: restart it on a poorly explained frame
            let (_, frame) = spare.next().or(stats.worst.first()).expect("frames were scored");
            *reseeded += 1;
            weights.push((occ / n).max(1e-12));
            means.extend_from_slice(frame);
            variances.extend(global_var.iter().zip(floor).map(|(g, f)| g.max(*f)));
            continue;
        }
        weights.push(occ / n);
        for j in 0..d {
            let m = stats.first[c * d + j] / occ;
            let v = stats.second[c * d + j] / occ - m * m;
            means.push(m + stats.shift[j]);
            variances.push(v.max(floor[j]));
        }
    }
    GmmModel::new(normalise(weights), means, variances)
}

/// Trains a GMM by EM on the frames of every matrix in `features`.
pub fn train_gmm<M: AsRef<Matrix>>(features: &[M], opts: &EmOptions) -> Result<(GmmModel, EmTrace)> {
    train_gmm_observed(features, opts, |_, _| {})
}

/// As [`train_gmm`], calling `observer(iteration, model)` after every M-step.
pub fn train_gmm_observed<M, F>(features: &[M], opts: &EmOptions, mut observer: F) -> Result<(GmmModel, EmTrace)>
where
    M: AsRef<Matrix>,
    F: FnMut(usize, &GmmModel),
{
    let k = opts.n_components;
    if k == 0 {
        return Err(Error::Config("a GMM needs at least one component".into()));
    }
    if !(opts.variance_floor_ratio >= 0.0 && opts.tol >= 0.0) {
        return Err(Error::Config("tolerance and variance floor ratio must be non-negative".into()));
    }
    let d = features.first().map_or(0, |m| m.as_ref().cols());
    if d == 0 {
        return Err(Error::InsufficientData("no feature dimensions".into()));
    }
    let mut frames: Vec<&[f64]> = Vec::new();
    for m in features {
        let m = m.as_ref();
        if m.cols() != d {
            return Err(Error::DimMismatch { expected: d, got: m.cols() });
        }
        if !m.is_finite() {
            return Err(Error::InvalidInput("training frames contain non-finite values".into()));
        }
        frames.extend(m.iter_rows());
    }
    if frames.len() < 10 * k {
        return Err(Error::InsufficientData(format!(
            "{} frames for {k} components (need at least {})",
            frames.len(),
            10 * k
        )));
    }

    let (shift, global_var) = global_moments(features);
    let floor: Vec<f64> = global_var
        .iter()
        .map(|v| (opts.variance_floor_ratio * v).max(MIN_VARIANCE))
        .collect();
    let mut model = initial_model(&frames, k, opts, &global_var, &floor)?;

    let e_step = |model: &GmmModel| {
        let mut stats = SuffStats::new(k, shift.clone());
        for m in features {
            stats.accumulate(model, m.as_ref());
        }
        stats
    };

    let mut stats = e_step(&model);
    let mut trace = EmTrace {
        log_likelihoods: vec![stats.average_log_likelihood()],
        converged: false,
        reseeded: 0,
        variance_floor: floor.clone(),
    };
    for iter in 0..opts.max_iters {
        model = m_step(&stats, &floor, &global_var, &mut trace.reseeded)?;
        observer(iter, &model);
        let prev = stats.average_log_likelihood();
        stats = e_step(&model);
        let cur = stats.average_log_likelihood();
        trace.log_likelihoods.push(cur);
        if !cur.is_finite() {
            return Err(Error::InvalidInput("EM produced a non-finite log-likelihood".into()));
        }
        if (cur - prev) / prev.abs().max(f64::MIN_POSITIVE) < opts.tol {
            trace.converged = true;
            break;
        }
    }
    Ok((model, trace))
}

/// A countermeasure: bona fide and spoof models over the same front-end.
#[derive(Debug, Clone, PartialEq)]
pub struct CmPair {
    pub bona: GmmModel,
    pub spoof: GmmModel,
    pub frontend_hash: u64,
}

impl CmPair {
    pub fn new(bona: GmmModel, spoof: GmmModel, frontend_hash: u64) -> Result<Self> {
        if bona.dims() != spoof.dims() {
            return Err(Error::DimMismatch { expected: bona.dims(), got: spoof.dims() });
        }
        Ok(CmPair { bona, spoof, frontend_hash })
    }

    /// Trains both class models on features from one front-end. Each class gets
    /// its own seed derived from `em.seed`.
    pub fn train(bona: &[FeatureMatrix], spoof: &[FeatureMatrix], em: &EmOptions) -> Result<Self> {
        let hash = match bona.first().or(spoof.first()) {
            Some(f) => f.config_hash(),
            None => return Err(Error::EmptyClass("bonafide".into())),
        };
        for f in bona.iter().chain(spoof) {
            if f.config_hash() != hash {
                return Err(Error::ConfigMismatch { expected: hash, got: f.config_hash() });
            }
        }
        if bona.is_empty() {
            return Err(Error::EmptyClass("bonafide".into()));
        }
        if spoof.is_empty() {
            return Err(Error::EmptyClass("spoof".into()));
        }
        let (b, _) = train_gmm(bona, &em.clone().with_seed(crate::seed::derive(em.seed, "bonafide")))?;
        let (s, _) = train_gmm(spoof, &em.clone().with_seed(crate::seed::derive(em.seed, "spoof")))?;
        CmPair::new(b, s, hash)
    }

    pub fn dims(&self) -> usize {
        self.bona.dims()
    }

    /// Frame-averaged log-likelihood ratio; higher means more bona fide.
    pub fn llr_score(&self, features: &FeatureMatrix) -> Result<f64> {
        if features.config_hash() != self.frontend_hash {
            return Err(Error::ConfigMismatch { expected: self.frontend_hash, got: features.config_hash() });
        }
        self.llr(features.matrix())
    }

    /// Log-likelihood ratio of raw frames, without the front-end check.
    pub fn llr(&self, frames: &Matrix) -> Result<f64> {
        Ok(self.bona.log_likelihood(frames)? - self.spoof.log_likelihood(frames)?)
    }

    pub fn swapped(&self) -> CmPair {
        CmPair { bona: self.spoof.clone(), spoof: self.bona.clone(), frontend_hash: self.frontend_hash }
    }
}
