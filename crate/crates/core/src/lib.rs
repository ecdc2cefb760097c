//! Sub-band cepstral spoofing countermeasures.
//!
//! This crate holds the numerical core of the toolkit and builds without `std`
//! (it needs `alloc`). It covers:
//!
//! - [`frontend`]: framing, power spectra, linear filterbanks and LFCC features
//!   with velocity and acceleration coefficients, for any sub-band of the spectrum.
//! - [`gmm`]: diagonal-covariance Gaussian mixtures trained with EM, and the
//!   bona fide / spoof model pair that scores an utterance as a log-likelihood ratio.
//! - [`metrics`]: ROC convex-hull EER, normalised minimum t-DCF and the
//!   Bhattacharyya distance between Gaussian score summaries.
//! - [`subband`]: heat-maps of countermeasure performance over (cut-in, cut-off)
//!   grids and centre-of-mass band selection.
//! - [`fusion`]: linear, multinomial logistic, GMM and polynomial-kernel SVM score fusion.
//! - [`synth`]: seeded synthetic corpora with band-limited artefacts and
//!   two-countermeasure score scenarios.
//!
//! File formats, WAV IO, parallel drivers and the command-line tool live in the
//! companion `sbcm` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod fft;
pub mod frontend;
pub mod fusion;
pub mod gmm;
mod linalg;
pub mod matrix;
pub mod metrics;
pub mod seed;
pub mod subband;
pub mod synth;
pub mod trial;

pub use error::{Error, Result};
pub use frontend::{FeatureMatrix, FrontendConfig, Waveform};
pub use gmm::{CmPair, EmOptions, GmmModel};
pub use matrix::Matrix;
pub use metrics::{LabeledScores, TdcfCosts};
pub use trial::{Key, Trial};
