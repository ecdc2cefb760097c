use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Solves `A x = b` for symmetric positive-definite `A` (row-major, n×n) by Cholesky.
pub(crate) fn solve_spd(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let l = cholesky(a, n, false)?;
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    Ok(y)
}

/// Lower Cholesky factor. With `semi_definite`, zero pivots yield zero columns
/// instead of an error; negative pivots always fail.
pub(crate) fn cholesky(a: &[f64], n: usize, semi_definite: bool) -> Result<Vec<f64>> {
    let mut l = alloc::vec![0.0; n * n];
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(1.0);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            if semi_definite && d.is_finite() && d > -1e-12 * scale {
                // zero pivot: the rest of this column must vanish too
                for i in j + 1..n {
                    let mut s = a[i * n + j];
                    for k in 0..j {
                        s -= l[i * n + k] * l[j * n + k];
                    }
                    if s.abs() > 1e-9 * scale {
                        return Err(Error::NotPositiveDefinite);
                    }
                }
                continue;
            }
            return Err(Error::NotPositiveDefinite);
        }
        let d = libm::sqrt(d);
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}
