use crate::Matrix;

const TAYLOR_ORDER: usize = 18;

/// Matrix exponential by scaling and squaring with a fixed-order Taylor core.
///
/// The argument is scaled by `2^-s` until its infinity norm is at most 1/2,
/// the truncated series is summed, and the result squared `s` times. For a
/// nilpotent argument the series terminates, so small-integer inputs such as
/// `[[0, 2], [0, 0]]` come out exact.
pub fn expm(a: &Matrix) -> Matrix {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = a
        .row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);

    let mut squarings = 0i32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as i32;
    }
    let scaled = a * 2f64.powi(-squarings);

    let mut result = Matrix::identity(n, n);
    let mut term = Matrix::identity(n, n);
    for k in 1..=TAYLOR_ORDER {
        term = (&term * &scaled) / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}
