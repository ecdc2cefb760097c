//! Detection metrics for countermeasure scores (high score = bona fide).

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Bona fide and spoof scores of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScores {
    bona: Vec<f64>,
    spoof: Vec<f64>,
}

impl LabeledScores {
    pub fn new(bona: Vec<f64>, spoof: Vec<f64>) -> Result<Self> {
        if bona.is_empty() {
            return Err(Error::EmptyClass("bonafide".into()));
        }
        if spoof.is_empty() {
            return Err(Error::EmptyClass("spoof".into()));
        }
        if bona.iter().chain(&spoof).any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("scores must be finite".into()));
        }
        Ok(LabeledScores { bona, spoof })
    }

    pub fn bona(&self) -> &[f64] {
        &self.bona
    }

    pub fn spoof(&self) -> &[f64] {
        &self.spoof
    }

    /// Scores sorted ascending and grouped by value: (score, bona count, spoof count).
    fn tie_groups(&self) -> Vec<(f64, usize, usize)> {
        let mut all: Vec<(f64, bool)> = self
            .bona
            .iter()
            .map(|&s| (s, true))
            .chain(self.spoof.iter().map(|&s| (s, false)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut groups: Vec<(f64, usize, usize)> = Vec::new();
        for (s, is_bona) in all {
            match groups.last_mut() {
                Some(g) if g.0 == s => {
                    if is_bona { g.1 += 1 } else { g.2 += 1 }
                }
                _ => groups.push((s, is_bona as usize, (!is_bona) as usize)),
            }
        }
        groups
    }
}

/// CM cost weights for misses (`c1`) and false alarms (`c2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdcfCosts {
    pub c1: f64,
    pub c2: f64,
}

impl TdcfCosts {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite()) {
            return Err(Error::Config(format!("t-DCF costs must be positive, got c1={c1} c2={c2}")));
        }
        Ok(TdcfCosts { c1, c2 })
    }
}

impl Default for TdcfCosts {
    fn default() -> Self {
        TdcfCosts { c1: 1.0, c2: 10.0 }
    }
}

/// Empirical ROC as (P_fa, P_miss) pairs, one per threshold between distinct
/// scores plus both infinities, ordered by increasing threshold.
pub fn roc_points(scores: &LabeledScores) -> Vec<(f64, f64)> {
    let (nb, ns) = (scores.bona.len() as f64, scores.spoof.len() as f64);
    let (mut miss, mut fa) = (0usize, scores.spoof.len());
    let mut pts = alloc::vec![(1.0, 0.0)];
    for (_, b, s) in scores.tie_groups() {
        miss += b;
        fa -= s;
        pts.push((fa as f64 / ns, miss as f64 / nb));
    }
    pts
}

/// Vertices of the ROC convex hull, from (1, 0) to (0, 1), obtained by
/// pool-adjacent-violators on the score-sorted labels.
pub fn roc_convex_hull(scores: &LabeledScores) -> Vec<(f64, f64)> {
    // blocks of (bona, total); PAV keeps the bona fraction non-decreasing
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    for (_, b, s) in scores.tie_groups() {
        let mut cur = (b, b + s);
        while let Some(&(pb, pn)) = blocks.last() {
            // pb/pn > b/n, compared exactly in integers
            if pb * cur.1 > cur.0 * pn {
                blocks.pop();
                cur = (cur.0 + pb, cur.1 + pn);
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    let (nb, ns) = (scores.bona.len() as f64, scores.spoof.len() as f64);
    let (mut miss, mut fa) = (0usize, scores.spoof.len());
    let mut hull = alloc::vec![(1.0, 0.0)];
    for (b, n) in blocks {
        miss += b;
        fa -= n - b;
        hull.push((fa as f64 / ns, miss as f64 / nb));
    }
    hull
}

/// Equal error rate on the ROC convex hull.
pub fn eer(scores: &LabeledScores) -> f64 {
    let hull = roc_convex_hull(scores);
    for w in hull.windows(2) {
        let ((x1, y1), (x2, y2)) = (w[0], w[1]);
        let (d1, d2) = (x1 - y1, x2 - y2);
        if d1 == 0.0 {
            return x1;
        }
        if d1 > 0.0 && d2 <= 0.0 {
            let t = d1 / (d1 - d2);
            return x1 + t * (x2 - x1);
        }
    }
    // the hull ends at (0, 1), so a crossing always exists
    unreachable!("ROC hull does not cross the diagonal")
}

/// `(c1·P_miss + c2·P_fa) / min(c1, c2)`.
pub fn normalized_tdcf(costs: &TdcfCosts, p_miss: f64, p_fa: f64) -> f64 {
    (costs.c1 * p_miss + costs.c2 * p_fa) / costs.c1.min(costs.c2)
}

/// Minimum normalised t-DCF and a threshold attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdcfMin {
    pub value: f64,
    pub threshold: f64,
}

/// Minimum normalised t-DCF over thresholds at −∞, every midpoint between
/// consecutive distinct scores, and +∞. Trials with score ≥ threshold are accepted.
pub fn min_tdcf(scores: &LabeledScores, costs: &TdcfCosts) -> TdcfMin {
    let (nb, ns) = (scores.bona.len(), scores.spoof.len());
    let groups = scores.tie_groups();
    let (mut miss, mut fa) = (0usize, ns);
    let mut best = TdcfMin {
        value: normalized_tdcf(costs, 0.0, 1.0),
        threshold: f64::NEG_INFINITY,
    };
    for (i, &(s, b, sp)) in groups.iter().enumerate() {
        miss += b;
        fa -= sp;
        let threshold = match groups.get(i + 1) {
            Some(next) => 0.5 * (s + next.0),
            None => f64::INFINITY,
        };
        let v = normalized_tdcf(costs, miss as f64 / nb as f64, fa as f64 / ns as f64);
        if v < best.value {
            best = TdcfMin { value: v, threshold };
        }
    }
    best
}

/// Bhattacharyya distance between two univariate Gaussians:
/// `¼ ln(¼ (σb²/σs² + σs²/σb² + 2)) + ¼ (μb − μs)² / (σb² + σs²)`.
pub fn bhattacharyya(mu_b: f64, sigma_b: f64, mu_s: f64, sigma_s: f64) -> Result<f64> {
    if !(sigma_b > 0.0 && sigma_s > 0.0) {
        return Err(Error::InvalidInput(format!(
            "standard deviations must be positive, got {sigma_b} and {sigma_s}"
        )));
    }
    let (vb, vs) = (sigma_b * sigma_b, sigma_s * sigma_s);
    let dm = mu_b - mu_s;
    Ok(0.25 * libm::log(0.25 * (vb / vs + vs / vb + 2.0)) + 0.25 * (dm * dm / (vb + vs)))
}

/// Per-class sample means and unbiased standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreGaussians {
    pub mu_b: f64,
    pub sigma_b: f64,
    pub mu_s: f64,
    pub sigma_s: f64,
}

impl ScoreGaussians {
    pub fn bhattacharyya(&self) -> Result<f64> {
        bhattacharyya(self.mu_b, self.sigma_b, self.mu_s, self.sigma_s)
    }
}

fn mean_sd(xs: &[f64], class: &str) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::InsufficientData(format!("{class} needs at least 2 scores")));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(Error::Degenerate(format!("{class} scores are constant")));
    }
    Ok((mean, libm::sqrt(var)))
}

pub fn fit_score_gaussians(scores: &LabeledScores) -> Result<ScoreGaussians> {
    let (mu_b, sigma_b) = mean_sd(&scores.bona, "bonafide")?;
    let (mu_s, sigma_s) = mean_sd(&scores.spoof, "spoof")?;
    Ok(ScoreGaussians { mu_b, sigma_b, mu_s, sigma_s })
}
