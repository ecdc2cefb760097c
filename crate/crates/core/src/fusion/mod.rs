//! Score-level fusion of several countermeasures.
//!
//! Every fuser maps a per-trial score vector to one score with the convention that
//! higher means bona fide. The logistic and GMM fusers output log-likelihood ratios;
//! the SVM outputs a signed decision margin.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::trial::Key;

mod logistic;
mod mixture;
mod svm;

pub use logistic::{
    train_linear_fusion, train_multinomial_fusion, ClassPartition, LinearFusion, LogisticOptions,
    MultinomialFusion,
};
pub use mixture::{train_gmm_fusion, GmmFusion};
pub use svm::{train_svm_poly, train_svm_poly_detailed, PolyKernel, SvmDiagnostics, SvmFusion, SvmOptions};

/// Scores of every component countermeasure for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub utterance_id: String,
    pub attack_id: Option<String>,
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn key(&self) -> Key {
        if self.attack_id.is_some() {
            Key::Spoof
        } else {
            Key::Bonafide
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVectorSet {
    dims: usize,
    trials: Vec<ScoreVector>,
}

impl ScoreVectorSet {
    pub fn new(trials: Vec<ScoreVector>) -> Result<Self> {
        let dims = trials.first().map_or(0, |t| t.scores.len());
        if trials.is_empty() || dims == 0 {
            return Err(Error::InvalidInput("score vector set is empty".into()));
        }
        for t in &trials {
            if t.scores.len() != dims {
                return Err(Error::DimMismatch { expected: dims, got: t.scores.len() });
            }
            if t.scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite score for {}", t.utterance_id)));
            }
        }
        Ok(ScoreVectorSet { dims, trials })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn trials(&self) -> &[ScoreVector] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn matrix(&self) -> Matrix {
        let rows: Vec<&[f64]> = self.trials.iter().map(|t| t.scores.as_slice()).collect();
        Matrix::from_rows(&rows).expect("uniform dims checked on construction")
    }

    fn rows_where(&self, key: Key) -> Matrix {
        let rows: Vec<&[f64]> = self
            .trials
            .iter()
            .filter(|t| t.key() == key)
            .map(|t| t.scores.as_slice())
            .collect();
        if rows.is_empty() {
            return Matrix::zeros(0, self.dims);
        }
        Matrix::from_rows(&rows).expect("uniform dims")
    }

    pub fn bona_matrix(&self) -> Matrix {
        self.rows_where(Key::Bonafide)
    }

    pub fn spoof_matrix(&self) -> Matrix {
        self.rows_where(Key::Spoof)
    }

    fn require_both_keys(&self) -> Result<()> {
        if !self.trials.iter().any(|t| t.key() == Key::Bonafide) {
            return Err(Error::EmptyClass("bonafide".into()));
        }
        if !self.trials.iter().any(|t| t.key() == Key::Spoof) {
            return Err(Error::EmptyClass("spoof".into()));
        }
        Ok(())
    }
}

/// Per-dimension z-normalisation fitted on training scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(m: &Matrix) -> Self {
        let (n, d) = (m.rows() as f64, m.cols());
        let mut mean = alloc::vec![0.0; d];
        for r in m.iter_rows() {
            for (a, b) in mean.iter_mut().zip(r) {
                *a += b / n;
            }
        }
        let mut var = alloc::vec![0.0; d];
        for r in m.iter_rows() {
            for j in 0..d {
                var[j] += (r[j] - mean[j]) * (r[j] - mean[j]) / n;
            }
        }
        // constant columns pass through unscaled
        let scale = var.iter().map(|v| if *v > 0.0 { libm::sqrt(*v) } else { 1.0 }).collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn apply_matrix(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for i in 0..m.rows() {
            let z = self.apply(m.row(i));
            out.row_mut(i).copy_from_slice(&z);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FusionKind {
    Linear,
    Multinomial,
    Gmm,
    SvmPoly,
}

impl FusionKind {
    pub const ALL: [FusionKind; 4] = [FusionKind::Linear, FusionKind::Multinomial, FusionKind::Gmm, FusionKind::SvmPoly];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionKind::Linear => "linear",
            FusionKind::Multinomial => "multinomial",
            FusionKind::Gmm => "gmm",
            FusionKind::SvmPoly => "svm-poly",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Whether fused scores are log-likelihood ratios.
    pub fn outputs_llr(self) -> bool {
        self != FusionKind::SvmPoly
    }
}

/// A trained fuser.
#[derive(Debug, Clone, PartialEq)]
pub enum FusionModel {
    Linear(LinearFusion),
    Multinomial(MultinomialFusion),
    Gmm(GmmFusion),
    Svm(SvmFusion),
}

impl FusionModel {
    pub fn kind(&self) -> FusionKind {
        match self {
            FusionModel::Linear(_) => FusionKind::Linear,
            FusionModel::Multinomial(_) => FusionKind::Multinomial,
            FusionModel::Gmm(_) => FusionKind::Gmm,
            FusionModel::Svm(_) => FusionKind::SvmPoly,
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            FusionModel::Linear(m) => m.weights.len(),
            FusionModel::Multinomial(m) => m.weights.cols(),
            FusionModel::Gmm(m) => m.bona.dims(),
            FusionModel::Svm(m) => m.support.cols(),
        }
    }

    /// Fused score of one score vector.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dims() {
            return Err(Error::DimMismatch { expected: self.dims(), got: x.len() });
        }
        Ok(match self {
            FusionModel::Linear(m) => m.score(x),
            FusionModel::Multinomial(m) => m.score(x),
            FusionModel::Gmm(m) => m.score(x),
            FusionModel::Svm(m) => m.score(x),
        })
    }
}

/// Applies a trained fuser to every trial, in order.
pub fn fuse(model: &FusionModel, scores: &ScoreVectorSet) -> Result<Vec<f64>> {
    scores.trials().iter().map(|t| model.score(&t.scores)).collect()
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Isotropic Gaussian clusters: (attack id or None, count, mean, sd).
    pub fn clusters(spec: &[(Option<&str>, usize, [f64; 2], f64)], seed: u64) -> ScoreVectorSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trials = Vec::new();
        for (attack, n, mean, sd) in spec {
            for _ in 0..*n {
                let scores = mean
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + sd * z
                    })
                    .collect();
                trials.push(ScoreVector {
                    utterance_id: format!("u{}", trials.len()),
                    attack_id: attack.map(|a| a.to_string()),
                    scores,
                });
            }
        }
        ScoreVectorSet::new(trials).unwrap()
    }

    pub fn labeled(set: &ScoreVectorSet, fused: &[f64]) -> crate::metrics::LabeledScores {
        let (mut b, mut s) = (vec![], vec![]);
        for (t, f) in set.trials().iter().zip(fused) {
            if t.key() == Key::Bonafide { b.push(*f) } else { s.push(*f) }
        }
        crate::metrics::LabeledScores::new(b, s).unwrap()
    }

    /// Bona fide between two attacks on a line, a third attack low on both.
    pub fn surrounded(seed: u64) -> ScoreVectorSet {
        clusters(
            &[
                (None, 200, [1.5, 1.5], 0.5),
                (Some("A1"), 100, [-1.0, 4.0], 0.5),
                (Some("A2"), 100, [4.0, -1.0], 0.5),
                (Some("A3"), 100, [-2.0, -2.0], 0.5),
            ],
            seed,
        )
    }
}
