//! Soft-margin SVM with a polynomial kernel, trained by SMO with second-order
//! working-set selection.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::{ScoreVectorSet, Standardizer};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::trial::Key;

const TAU: f64 = 1e-12;

/// `k(x, y) = (gamma·x·y + coef0)^degree`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyKernel {
    pub gamma: f64,
    pub coef0: f64,
    pub degree: u32,
}

impl PolyKernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        libm::pow(self.gamma * dot + self.coef0, self.degree as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmOptions {
    pub degree: u32,
    /// Defaults to `1 / D`.
    pub gamma: Option<f64>,
    pub coef0: f64,
    pub c: f64,
    /// Stopping threshold on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
    /// Kernel row cache budget in MiB.
    pub cache_mb: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions { degree: 7, gamma: None, coef0: 1.0, c: 1.0, tol: 1e-3, max_iter: 10_000_000, cache_mb: 256 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmFusion {
    pub standardizer: Standardizer,
    pub kernel: PolyKernel,
    /// Standardised support vectors, one per row.
    pub support: Matrix,
    /// `alpha_i · y_i` per support vector.
    pub coef: Vec<f64>,
    /// Subtracted from the kernel expansion.
    pub rho: f64,
}

impl SvmFusion {
    /// Signed decision margin; positive means bona fide.
    pub fn score(&self, x: &[f64]) -> f64 {
        let z = self.standardizer.apply(x);
        self.decision_standardized(&z)
    }

    fn decision_standardized(&self, z: &[f64]) -> f64 {
        self.support.iter_rows().zip(&self.coef).map(|(s, c)| c * self.kernel.eval(s, z)).sum::<f64>() - self.rho
    }
}

/// Dual solution details, in training-trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmDiagnostics {
    pub alphas: Vec<f64>,
    /// +1 bona fide, -1 spoof.
    pub labels: Vec<f64>,
    /// Maximal KKT violation at termination.
    pub kkt_gap: f64,
    pub iterations: usize,
}

/// FIFO cache of rows of the signed kernel matrix `Q_ij = y_i y_j k(x_i, x_j)`.
struct QCache<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    kernel: PolyKernel,
    rows: Vec<Option<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> QCache<'a> {
    fn new(x: &'a Matrix, y: &'a [f64], kernel: PolyKernel, budget_bytes: usize) -> Self {
        let n = x.rows();
        let capacity = (budget_bytes / (n * 8).max(1)).clamp(2, n.max(2));
        QCache { x, y, kernel, rows: vec![None; n], order: VecDeque::new(), capacity }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            if self.order.len() == self.capacity {
                let old = self.order.pop_front().expect("non-empty");
                self.rows[old] = None;
            }
            let xi = self.x.row(i);
            let r = (0..self.x.rows())
                .map(|j| self.y[i] * self.y[j] * self.kernel.eval(xi, self.x.row(j)))
                .collect();
            self.rows[i] = Some(r);
            self.order.push_back(i);
        }
        self.rows[i].as_deref().expect("filled above")
    }
}

pub fn train_svm_poly(train: &ScoreVectorSet, opts: &SvmOptions) -> Result<SvmFusion> {
    train_svm_poly_detailed(train, opts).map(|(m, _)| m)
}

pub fn train_svm_poly_detailed(train: &ScoreVectorSet, opts: &SvmOptions) -> Result<(SvmFusion, SvmDiagnostics)> {
    train.require_both_keys()?;
    if !(opts.c > 0.0 && opts.tol > 0.0) || opts.degree == 0 {
        return Err(Error::Config("SVM needs C > 0, tol > 0 and degree >= 1".into()));
    }
    let gamma = opts.gamma.unwrap_or(1.0 / train.dims() as f64);
    if !(gamma > 0.0) {
        return Err(Error::Config("SVM gamma must be positive".into()));
    }
    let kernel = PolyKernel { gamma, coef0: opts.coef0, degree: opts.degree };
    let standardizer = Standardizer::fit(&train.matrix());
    let x = standardizer.apply_matrix(&train.matrix());
    let y: Vec<f64> = train.trials().iter().map(|t| if t.key() == Key::Bonafide { 1.0 } else { -1.0 }).collect();
    let n = x.rows();
    let c = opts.c;
    let qd: Vec<f64> = (0..n).map(|i| kernel.eval(x.row(i), x.row(i))).collect();
    let mut cache = QCache::new(&x, &y, kernel, opts.cache_mb.saturating_mul(1 << 20));

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let is_up = |a: f64, yi: f64| if yi > 0.0 { a < c } else { a > 0.0 };
    let is_low = |a: f64, yi: f64| if yi > 0.0 { a > 0.0 } else { a < c };

    let mut iterations = 0;
    let kkt_gap = loop {
        // i maximises -y G over the up set
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if is_up(alpha[t], y[t]) && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        if i != usize::MAX {
            let qi = cache.row(i);
            for t in 0..n {
                if !is_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = qd[i] + qd[t] - 2.0 * y[i] * y[t] * qi[t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj <= best {
                        best = obj;
                        j = t;
                    }
                }
            }
        }
        let gap = gmax - gmin;
        if gap < opts.tol || j == usize::MAX {
            break gap.max(0.0);
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence(iterations));
        }
        iterations += 1;

        let qij = cache.row(i)[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let qi = cache.row(i).to_vec();
        let qj = cache.row(j);
        for t in 0..n {
            grad[t] += qi[t] * di + qj[t] * dj;
        }
    };

    let (mut ub, mut lb, mut free_sum, mut free_n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            free_sum += yg;
            free_n += 1;
        }
    }
    let rho = if free_n > 0 { free_sum / free_n as f64 } else { (ub + lb) / 2.0 };

    let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let rows: Vec<&[f64]> = sv.iter().map(|&t| x.row(t)).collect();
    let support = if rows.is_empty() { Matrix::zeros(0, x.cols()) } else { Matrix::from_rows(&rows)? };
    let coef = sv.iter().map(|&t| alpha[t] * y[t]).collect();
    let model = SvmFusion { standardizer, kernel, support, coef, rho };
    Ok((model, SvmDiagnostics { alphas: alpha, labels: y, kkt_gap, iterations }))
}
