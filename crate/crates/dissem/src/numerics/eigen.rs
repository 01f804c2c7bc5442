//! Spectral abscissa of a real dense matrix: Householder reduction to
//! Hessenberg form followed by implicit double-shift QR iteration.
//!
//! The QR sweep follows the classic EISPACK/JAMA `hqr2` recipe (eigenvalues
//! only, no Schur vectors), including the ad hoc exceptional shifts.

use super::{Matrix, NumericsError};

/// Largest real part among the eigenvalues of a square matrix.
///
/// The total QR sweep budget is `100 * n`; exceeding it is reported as
/// [`NumericsError::NoConvergence`].
pub fn spectral_abscissa(a: &Matrix) -> Result<f64, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::Dimension(format!(
            "spectral_abscissa requires a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let real_parts = eigenvalue_real_parts(a)?;
    Ok(real_parts.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Real parts of all eigenvalues (unordered).
pub fn eigenvalue_real_parts(a: &Matrix) -> Result<Vec<f64>, NumericsError> {
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    let mut h: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)]).collect())
        .collect();
    reduce_to_hessenberg(&mut h);
    francis_qr_real_parts(&mut h, 100 * n)
}

/// In-place Householder similarity reduction to upper Hessenberg form.
fn reduce_to_hessenberg(h: &mut [Vec<f64>]) {
    let n = h.len();
    let high = n - 1;
    let mut ort = vec![0.0; n];

    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i][m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hsum = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i][m - 1] / scale;
            hsum += ort[i] * ort[i];
        }
        let mut g = hsum.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hsum -= ort[m] * g;
        ort[m] -= g;

        // Similarity transform H <- (I - u u'/h) H (I - u u'/h).
        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[i][j];
            }
            f /= hsum;
            for i in m..=high {
                h[i][j] -= f * ort[i];
            }
        }
        for row in h.iter_mut().take(high + 1) {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * row[j];
            }
            f /= hsum;
            for j in m..=high {
                row[j] -= f * ort[j];
            }
        }
        h[m][m - 1] = scale * g;
        // Zero out what the transform annihilated.
        for i in m + 1..=high {
            h[i][m - 1] = 0.0;
        }
    }
}

/// Double-shift QR on an upper Hessenberg matrix; returns eigenvalue real
/// parts. `budget` caps the total number of QR sweeps.
fn francis_qr_real_parts(h: &mut [Vec<f64>], budget: usize) -> Result<Vec<f64>, NumericsError> {
    let nn = h.len();
    let mut real = vec![0.0; nn];
    let low = 0usize;
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let mut sweeps = 0usize;

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[i][j].abs();
        }
    }
    if norm == 0.0 {
        return Ok(real);
    }

    let mut n = nn - 1;
    let mut iter = 0usize;
    loop {
        // Look for a single small subdiagonal element.
        let mut l = n;
        while l > low {
            let mut s = h[l - 1][l - 1].abs() + h[l][l].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[l][l - 1].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One real root.
            real[n] = h[n][n] + exshift;
            if n == low {
                break;
            }
            n -= 1;
            iter = 0;
        } else if l + 1 == n {
            // A 2x2 block: real or complex pair.
            let w = h[n][n - 1] * h[n - 1][n];
            let p = (h[n - 1][n - 1] - h[n][n]) / 2.0;
            let q = p * p + w;
            let z = q.abs().sqrt();
            let x = h[n][n] + exshift;
            if q >= 0.0 {
                let z = if p >= 0.0 { p + z } else { p - z };
                real[n - 1] = x + z;
                real[n] = if z != 0.0 { x - w / z } else { real[n - 1] };
            } else {
                real[n - 1] = x + p;
                real[n] = x + p;
            }
            if n == low + 1 {
                break;
            }
            n -= 2;
            iter = 0;
        } else {
            // Form the shift from the trailing 2x2 block.
            let mut x = h[n][n];
            let mut y = h[n - 1][n - 1];
            let mut w = h[n][n - 1] * h[n - 1][n];

            if iter == 10 {
                // Exceptional shift.
                exshift += x;
                for i in low..=n {
                    h[i][i] -= x;
                }
                let s = h[n][n - 1].abs() + h[n - 1][n - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                let mut s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    let mut s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    let s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        h[i][i] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = 0.964;
                    w = 0.964;
                }
            }

            iter += 1;
            sweeps += 1;
            if sweeps > budget {
                return Err(NumericsError::NoConvergence { budget });
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = n - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = h[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[m + 1][m] + h[m][m + 1];
                q = h[m + 1][m + 1] - z - rr - ss;
                r = h[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[m][m - 1].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[m - 1][m - 1].abs() + z.abs() + h[m + 1][m + 1].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=n {
                h[i][i - 2] = 0.0;
                if i > m + 2 {
                    h[i][i - 3] = 0.0;
                }
            }

            // Double QR sweep on rows l..=n, columns m..=n.
            for k in m..n {
                let notlast = k != n - 1;
                if k != m {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = if notlast { h[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                let mut s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != m {
                    h[k][k - 1] = -s * x;
                } else if l != m {
                    h[k][k - 1] = -h[k][k - 1];
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;

                for j in k..nn {
                    let mut pj = h[k][j] + q * h[k + 1][j];
                    if notlast {
                        pj += r * h[k + 2][j];
                        h[k + 2][j] -= pj * z;
                    }
                    h[k + 1][j] -= pj * y;
                    h[k][j] -= pj * x;
                }
                for i in 0..=n.min(k + 3) {
                    let mut pi = x * h[i][k] + y * h[i][k + 1];
                    if notlast {
                        pi += z * h[i][k + 2];
                        h[i][k + 2] -= pi * r;
                    }
                    h[i][k + 1] -= pi * q;
                    h[i][k] -= pi;
                }
            }
        }
    }
    Ok(real)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diagonal_matrix() {
        let a = Matrix::diagonal(&[-1.0, -3.0]);
        assert_abs_diff_eq!(spectral_abscissa(&a).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn generator_has_zero_abscissa() {
        let q = Matrix::from_rows(&[
            vec![-1.5, 1.0, 0.5],
            vec![0.2, -0.9, 0.7],
            vec![0.3, 0.4, -0.7],
        ]);
        assert_abs_diff_eq!(spectral_abscissa(&q).unwrap(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn singular_storage_block() {
        // [[-g, 0], [g, 0]] has characteristic polynomial z(z + g).
        let g = 1.7;
        let a = Matrix::from_rows(&[vec![-g, 0.0], vec![g, 0.0]]);
        assert_abs_diff_eq!(spectral_abscissa(&a).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn complex_pair_real_part() {
        // Rotation-like block: eigenvalues 0.3 +/- 2i.
        let a = Matrix::from_rows(&[vec![0.3, -2.0], vec![2.0, 0.3]]);
        assert_abs_diff_eq!(spectral_abscissa(&a).unwrap(), 0.3, epsilon = 1e-10);
    }

    #[test]
    fn shift_equivariance() {
        let a = Matrix::from_rows(&[
            vec![0.1, 1.0, 0.0, 0.3],
            vec![-1.0, 0.1, 0.2, 0.0],
            vec![0.0, 0.4, -0.5, 1.0],
            vec![0.2, 0.0, -0.3, -0.8],
        ]);
        let base = spectral_abscissa(&a).unwrap();
        let c = 2.5;
        let shifted = a.add(&Matrix::identity(4).scale(c));
        assert_abs_diff_eq!(
            spectral_abscissa(&shifted).unwrap(),
            base + c,
            epsilon = 1e-8
        );
    }

    #[test]
    fn companion_matrix_known_roots() {
        // Companion of (z-1)(z-2)(z-3) = z^3 - 6z^2 + 11z - 6.
        let a = Matrix::from_rows(&[
            vec![6.0, -11.0, 6.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ]);
        assert_abs_diff_eq!(spectral_abscissa(&a).unwrap(), 3.0, epsilon = 1e-9);
    }

    #[test]
    fn larger_random_matrix_matches_trace_bound() {
        // All real parts of eigenvalues sum to the trace.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a = Matrix::from_fn(12, 12, |_, _| next());
        let parts = eigenvalue_real_parts(&a).unwrap();
        let trace: f64 = (0..12).map(|i| a[(i, i)]).sum();
        let sum: f64 = parts.iter().sum();
        assert_abs_diff_eq!(sum, trace, epsilon = 1e-8);
    }
}
