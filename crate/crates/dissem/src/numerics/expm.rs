//! Matrix exponential by scaling-and-squaring with a diagonal Padé(6,6)
//! approximant.

use super::{solve_matrix, Matrix};

/// Compute `exp(A)` for a square matrix.
///
/// `A` is scaled by `2^-s` until its infinity norm is at most 0.5, the
/// Padé(6,6) approximant is evaluated, and the result squared `s` times.
/// At that norm the approximant truncation error is far below 1e-10 relative.
///
/// Panics if `A` is not square.
pub fn expm(a: &Matrix) -> Matrix {
    assert!(a.is_square(), "expm requires a square matrix");
    let n = a.rows();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }

    let norm = a.inf_norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings as i32));

    let mut result = pade6(&scaled);
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

// Coefficients of the degree-6 diagonal Padé approximant to exp:
// c_0 = 1, c_j = c_{j-1} * (7 - j) / (j * (13 - j)).
const PADE6: [f64; 7] = [
    1.0,
    0.5,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

fn pade6(a: &Matrix) -> Matrix {
    let n = a.rows();
    let eye = Matrix::identity(n);
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);

    // Even part V = c0 I + c2 A^2 + c4 A^4 + c6 A^6, odd part U = A (c1 I + c3 A^2 + c5 A^4).
    let v = eye
        .scale(PADE6[0])
        .add(&a2.scale(PADE6[2]))
        .add(&a4.scale(PADE6[4]))
        .add(&a6.scale(PADE6[6]));
    let u_inner = eye
        .scale(PADE6[1])
        .add(&a2.scale(PADE6[3]))
        .add(&a4.scale(PADE6[5]));
    let u = a.matmul(&u_inner);

    let numerator = v.add(&u);
    let denominator = v.sub(&u);
    // (V - U) is nonsingular for ||A|| <= 0.5.
    solve_matrix(&denominator, &numerator).expect("Padé denominator singular")
}
