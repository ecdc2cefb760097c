//! Logistic-regression fusers trained by damped Newton iterations.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::ScoreVectorSet;
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::matrix::Matrix;
use crate::trial::Key;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticOptions {
    /// Effective bona fide prior of the binary linear objective.
    pub prior: f64,
    /// L2 penalty on all parameters, bias included.
    pub ridge: f64,
    pub max_iters: usize,
    /// Stop once the gradient's largest component falls below this.
    pub tol: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions { prior: 0.5, ridge: 1e-6, max_iters: 100, tol: 1e-10 }
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

/// Minimises a smooth convex objective. `eval` returns the value and, when asked,
/// the gradient and the row-major Hessian.
fn newton<F>(mut theta: Vec<f64>, opts: &LogisticOptions, mut eval: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], bool) -> (f64, Vec<f64>, Vec<f64>),
{
    let n = theta.len();
    for _ in 0..opts.max_iters {
        let (f, g, mut h) = eval(&theta, true);
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < opts.tol {
            break;
        }
        let mut damping = 0.0;
        let step = loop {
            match solve_spd(&h, &g) {
                Ok(s) => break s,
                Err(_) => {
                    let add = if damping == 0.0 { 1e-8 } else { damping * 9.0 };
                    damping += add;
                    for i in 0..n {
                        h[i * n + i] += add;
                    }
                    if damping > 1e8 {
                        return Err(Error::InvalidInput("logistic Hessian is singular".into()));
                    }
                }
            }
        };
        let slope: f64 = -g.iter().zip(&step).map(|(a, b)| a * b).sum::<f64>();
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, b)| a - t * b).collect();
            let (fc, _, _) = eval(&cand, false);
            if fc <= f + 1e-4 * t * slope {
                moved = fc < f || t == 1.0;
                theta = cand;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(theta)
}

/// `w·x + b`, a calibrated log-likelihood ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFusion {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearFusion {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

/// Prior-weighted binary logistic regression: each class's cross-entropy is
/// averaged over that class and weighted by `prior` / `1 - prior`.
pub fn train_linear_fusion(train: &ScoreVectorSet, opts: &LogisticOptions) -> Result<LinearFusion> {
    train.require_both_keys()?;
    if !(opts.prior > 0.0 && opts.prior < 1.0) {
        return Err(Error::Config("prior must lie in (0, 1)".into()));
    }
    let d = train.dims();
    let bona = train.bona_matrix();
    let spoof = train.spoof_matrix();
    let offset = logit(opts.prior);
    let wb = opts.prior / bona.rows() as f64;
    let ws = (1.0 - opts.prior) / spoof.rows() as f64;
    let p = d + 1;
    let theta = newton(vec![0.0; p], opts, |theta, full| {
        let mut f = 0.5 * opts.ridge * theta.iter().map(|v| v * v).sum::<f64>();
        let mut g: Vec<f64> = theta.iter().map(|v| opts.ridge * v).collect();
        let mut h = vec![0.0; if full { p * p } else { 0 }];
        if full {
            for i in 0..p {
                h[i * p + i] = opts.ridge;
            }
        }
        for (m, weight, sign) in [(&bona, wb, 1.0), (&spoof, ws, -1.0)] {
            for x in m.iter_rows() {
                let s = x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + theta[d] + offset;
                // bona: softplus(-s), spoof: softplus(s)
                f += weight * softplus(-sign * s);
                if !full {
                    continue;
                }
                let q = sigmoid(-sign * s);
                let gs = -sign * q * weight;
                let hs = q * (1.0 - q) * weight;
                for i in 0..p {
                    let xi = if i < d { x[i] } else { 1.0 };
                    g[i] += gs * xi;
                    for j in 0..p {
                        let xj = if j < d { x[j] } else { 1.0 };
                        h[i * p + j] += hs * xi * xj;
                    }
                }
            }
        }
        (f, g, h)
    })?;
    Ok(LinearFusion { weights: theta[..d].to_vec(), bias: theta[d] })
}

/// How trials are grouped into classes for multinomial fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassPartition {
    /// Bona fide against all spoofs pooled into one class.
    Binary,
    /// Bona fide plus one class per training attack.
    PerAttack,
}

impl ClassPartition {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassPartition::Binary => "binary",
            ClassPartition::PerAttack => "per-attack",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "binary" => Some(ClassPartition::Binary),
            "per-attack" => Some(ClassPartition::PerAttack),
            _ => None,
        }
    }
}

/// Softmax classifier over `classes` (index 0 is bona fide). Biases already include
/// the shift from empirical to flat class priors.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialFusion {
    pub classes: Vec<String>,
    /// classes × dims
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl MultinomialFusion {
    fn activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| self.weights.row(c).iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.biases[c])
            .collect()
    }

    /// `ln(p_bona / Σ p_spoof)` at a flat class prior.
    pub fn score(&self, x: &[f64]) -> f64 {
        let a = self.activations(x);
        a[0] - log_sum_exp(&a[1..])
    }

    /// Index of the most probable class.
    pub fn classify(&self, x: &[f64]) -> usize {
        let a = self.activations(x);
        (0..a.len()).max_by(|&i, &j| a[i].total_cmp(&a[j])).unwrap_or(0)
    }
}

fn log_sum_exp(a: &[f64]) -> f64 {
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + libm::log(a.iter().map(|v| libm::exp(v - m)).sum::<f64>())
}

/// Class index of every trial and the class names, bona fide first.
fn class_labels(train: &ScoreVectorSet, partition: ClassPartition) -> (Vec<String>, Vec<usize>) {
    let mut classes = vec![Key::Bonafide.as_str().to_string()];
    match partition {
        ClassPartition::Binary => classes.push(Key::Spoof.as_str().to_string()),
        ClassPartition::PerAttack => {
            let attacks: BTreeSet<&str> = train.trials().iter().filter_map(|t| t.attack_id.as_deref()).collect();
            classes.extend(attacks.into_iter().map(String::from));
        }
    }
    let labels = train
        .trials()
        .iter()
        .map(|t| match (&t.attack_id, partition) {
            (None, _) => 0,
            (Some(_), ClassPartition::Binary) => 1,
            (Some(a), ClassPartition::PerAttack) => classes.iter().position(|c| c == a).expect("collected above"),
        })
        .collect();
    (classes, labels)
}

/// Multinomial logistic regression trained by maximum likelihood on the
/// empirical class proportions, then re-centred to a flat class prior.
pub fn train_multinomial_fusion(
    train: &ScoreVectorSet,
    opts: &LogisticOptions,
    partition: ClassPartition,
) -> Result<MultinomialFusion> {
    train.require_both_keys()?;
    let (classes, labels) = class_labels(train, partition);
    let c = classes.len();
    let mut counts = vec![0usize; c];
    for &l in &labels {
        counts[l] += 1;
    }
    if let Some(i) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(classes[i].clone()));
    }
    let d = train.dims();
    let q = d + 1;
    let p = c * q;
    let n = train.len() as f64;
    let x = train.matrix();
    let theta = newton(vec![0.0; p], opts, |theta, full| {
        let mut f = 0.5 * opts.ridge * theta.iter().map(|v| v * v).sum::<f64>();
        let mut g: Vec<f64> = theta.iter().map(|v| opts.ridge * v).collect();
        let mut h = vec![0.0; if full { p * p } else { 0 }];
        if full {
            for i in 0..p {
                h[i * p + i] = opts.ridge;
            }
        }
        let mut a = vec![0.0; c];
        let mut xt = vec![1.0; q];
        for (row, &y) in x.iter_rows().zip(&labels) {
            xt[..d].copy_from_slice(row);
            for k in 0..c {
                a[k] = theta[k * q..(k + 1) * q].iter().zip(&xt).map(|(w, v)| w * v).sum();
            }
            let lse = log_sum_exp(&a);
            f += (lse - a[y]) / n;
            if !full {
                continue;
            }
            let prob: Vec<f64> = a.iter().map(|v| libm::exp(v - lse)).collect();
            for k in 0..c {
                let r = (prob[k] - if k == y { 1.0 } else { 0.0 }) / n;
                for i in 0..q {
                    g[k * q + i] += r * xt[i];
                }
                for l in 0..c {
                    let w = (if k == l { prob[k] } else { 0.0 } - prob[k] * prob[l]) / n;
                    if w == 0.0 {
                        continue;
                    }
                    for i in 0..q {
                        let wi = w * xt[i];
                        let hrow = &mut h[(k * q + i) * p + l * q..(k * q + i) * p + (l + 1) * q];
                        for (hv, xj) in hrow.iter_mut().zip(&xt) {
                            *hv += wi * xj;
                        }
                    }
                }
            }
        }
        (f, g, h)
    })?;
    let mut weights = Matrix::zeros(c, d);
    let mut biases = Vec::with_capacity(c);
    for k in 0..c {
        weights.row_mut(k).copy_from_slice(&theta[k * q..k * q + d]);
        // posterior at the empirical prior -> flat prior
        biases.push(theta[k * q + d] - libm::log(counts[k] as f64 / n));
    }
    Ok(MultinomialFusion { classes, weights, biases })
}
