//! Small dense linear algebra on row-major slices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// LU factorisation with partial pivoting. Returns the packed factors, the
/// row permutation and the permutation sign, or `None` for a singular input.
fn lu(a: &[f64], n: usize) -> Option<(Vec<f64>, Vec<usize>, f64)> {
    let mut m = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for col in 0..n {
        let mut piv = col;
        let mut best = libm::fabs(m[col * n + col]);
        for row in col + 1..n {
            let v = libm::fabs(m[row * n + col]);
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best == 0.0 {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            perm.swap(col, piv);
            sign = -sign;
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            m[row * n + col] = f;
            for j in col + 1..n {
                m[row * n + j] -= f * m[col * n + j];
            }
        }
    }
    Some((m, perm, sign))
}

pub fn det(a: &[f64], n: usize) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    match n {
        0 => 1.0,
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => match lu(a, n) {
            None => 0.0,
            Some((m, _, sign)) => (0..n).fold(sign, |acc, i| acc * m[i * n + i]),
        },
    }
}

/// Solves `a x = b`.
pub fn solve(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    let (m, perm, _) = lu(a, n).ok_or_else(|| invalid("singular linear system"))?;
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for j in 0..i {
            x[i] -= m[i * n + j] * x[j];
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            x[i] -= m[i * n + j] * x[j];
        }
        x[i] /= m[i * n + i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(invalid("singular linear system"))
    }
}

pub fn inverse(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = solve(a, n, &e)?;
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Ok(inv)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::InvalidArgument("matrix is not positive definite".into()));
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_matches_cofactor_expansion() {
        let a = [2.0, -1.0, 0.0, 3.0, 1.0, 4.0, -2.0, 0.5, 1.0, 0.0, 2.0, 1.0, 5.0, 1.0, 0.0, 3.0];
        // cofactor expansion along the first row, written out by hand
        let minor = |skip: usize| {
            let mut m = [0.0; 9];
            let mut t = 0;
            for r in 1..4 {
                for c in 0..4 {
                    if c != skip {
                        m[t] = a[r * 4 + c];
                        t += 1;
                    }
                }
            }
            det(&m, 3)
        };
        let expected = a[0] * minor(0) - a[1] * minor(1) + a[2] * minor(2) - a[3] * minor(3);
        assert!((det(&a, 4) - expected).abs() < 1e-12);
    }

    #[test]
    fn solve_and_inverse_round_trip() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, -1.0, 0.5, -1.0, 2.0];
        let x = solve(&a, 3, &[1.0, 2.0, 3.0]).unwrap();
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - (i + 1) as f64).abs() < 1e-12);
        }
        let inv = inverse(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        let l = cholesky(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((v - a[i * 3 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_is_rejected() {
        assert!(solve(&[1.0, 2.0, 2.0, 4.0], 2, &[1.0, 1.0]).is_err());
        assert_eq!(det(&[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0, 1.0, 1.0, 0.0, 2.0, 5.0, 1.0, 0.0, 3.0], 4), 0.0);
    }
}
