//! Per-class GMMs over standardised score vectors.

use super::{ScoreVectorSet, Standardizer};
use crate::error::Result;
use crate::gmm::{train_gmm, EmOptions, GmmModel};

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFusion {
    pub standardizer: Standardizer,
    pub bona: GmmModel,
    pub spoof: GmmModel,
}

impl GmmFusion {
    /// Log-likelihood ratio of the standardised score vector.
    pub fn score(&self, x: &[f64]) -> f64 {
        let z = self.standardizer.apply(x);
        self.bona.frame_log_likelihood(&z) - self.spoof.frame_log_likelihood(&z)
    }

    pub fn swapped(&self) -> GmmFusion {
        GmmFusion { standardizer: self.standardizer.clone(), bona: self.spoof.clone(), spoof: self.bona.clone() }
    }
}

/// Trains one GMM per class. Each class needs at least `10·K` trials.
pub fn train_gmm_fusion(train: &ScoreVectorSet, em: &EmOptions) -> Result<GmmFusion> {
    train.require_both_keys()?;
    let standardizer = Standardizer::fit(&train.matrix());
    let bona = standardizer.apply_matrix(&train.bona_matrix());
    let spoof = standardizer.apply_matrix(&train.spoof_matrix());
    let (bona, _) = train_gmm(&[bona], em)?;
    let (spoof, _) = train_gmm(&[spoof], em)?;
    Ok(GmmFusion { standardizer, bona, spoof })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{clusters, surrounded};
    use super::super::{ScoreVector, ScoreVectorSet};
    use super::*;
    use crate::error::Error;
    use alloc::vec::Vec;

    #[test]
    fn identical_classes_score_near_zero() {
        let base = clusters(&[(None, 200, [0.0, 1.0], 1.0)], 1);
        let mut trials: Vec<ScoreVector> = base.trials().to_vec();
        trials.extend(base.trials().iter().map(|t| ScoreVector { attack_id: Some("A1".into()), ..t.clone() }));
        let set = ScoreVectorSet::new(trials).unwrap();
        let m = train_gmm_fusion(&set, &EmOptions::default().with_components(4)).unwrap();
        for t in set.trials() {
            assert!(m.score(&t.scores).abs() < 1e-9);
        }
    }

    #[test]
    fn swapping_models_negates() {
        let set = surrounded(2);
        let m = train_gmm_fusion(&set, &EmOptions::default().with_components(4)).unwrap();
        let s = m.swapped();
        for t in set.trials().iter().take(50) {
            assert_eq!(m.score(&t.scores), -s.score(&t.scores));
        }
    }

    /// Closed-form LLR of two diagonal Gaussians fitted by maximum likelihood.
    fn gaussian_llr(set: &ScoreVectorSet, x: &[f64]) -> f64 {
        let logpdf = |m: &crate::matrix::Matrix, x: &[f64]| {
            let n = m.rows() as f64;
            let mut total = 0.0;
            for j in 0..x.len() {
                let mean = m.iter_rows().map(|r| r[j]).sum::<f64>() / n;
                let var = m.iter_rows().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / n;
                total += -0.5 * libm::log(2.0 * core::f64::consts::PI * var) - 0.5 * (x[j] - mean) * (x[j] - mean) / var;
            }
            total
        };
        logpdf(&set.bona_matrix(), x) - logpdf(&set.spoof_matrix(), x)
    }

    #[test]
    fn single_component_matches_closed_form() {
        let set = clusters(&[(None, 150, [1.0, 2.0], 0.7), (Some("A1"), 150, [-1.0, 0.0], 1.3)], 3);
        let m = train_gmm_fusion(&set, &EmOptions::default().with_components(1)).unwrap();
        for t in set.trials() {
            let want = gaussian_llr(&set, &t.scores);
            assert!((m.score(&t.scores) - want).abs() < 1e-8, "{} vs {want}", m.score(&t.scores));
        }
        for x in [[5.0, -3.0], [0.0, 0.0], [-4.0, 8.0]] {
            assert!((m.score(&x) - gaussian_llr(&set, &x)).abs() < 1e-8);
        }
    }

    #[test]
    fn surrounded_bona_fide_takes_the_right_signs() {
        let m = train_gmm_fusion(&surrounded(4), &EmOptions::default().with_components(4)).unwrap();
        let test = surrounded(5);
        for t in test.trials() {
            let s = m.score(&t.scores);
            // points far into the tails are allowed to flip
            let centre = match t.attack_id.as_deref() {
                None => [1.5, 1.5],
                Some("A1") => [-1.0, 4.0],
                Some("A2") => [4.0, -1.0],
                _ => [-2.0, -2.0],
            };
            let r2: f64 = t.scores.iter().zip(centre).map(|(a, b)| (a - b) * (a - b)).sum();
            if r2 > 1.0 {
                continue;
            }
            assert_eq!(s > 0.0, t.attack_id.is_none(), "{:?} scored {s}", t);
        }
    }

    #[test]
    fn too_few_trials_for_k_is_an_error() {
        let set = clusters(&[(None, 30, [0.0, 0.0], 1.0), (Some("A1"), 30, [1.0, 1.0], 1.0)], 6);
        assert!(matches!(
            train_gmm_fusion(&set, &EmOptions::default().with_components(4)),
            Err(Error::InsufficientData(_))
        ));
    }
}
