use crate::scalar::Real;

/// Solves the dense system `m x = rhs` by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot vanishes relative to the matrix scale.
pub(crate) fn solve_dense<T: Real, const N: usize>(mut m: [[T; N]; N], mut rhs: [T; N]) -> Option<[T; N]> {
    let scale = m
        .iter()
        .flat_map(|row| row.iter())
        .fold(T::zero(), |acc, v| acc.max(v.abs()));
    if scale <= T::zero() || !scale.is_finite() {
        return None;
    }
    let tiny = scale * T::epsilon() * T::lit(16.0);
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap_or(std::cmp::Ordering::Equal))?;
        if m[pivot][col].abs() <= tiny {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..N {
            let factor = m[row][col] / m[col][col];
            if factor == T::zero() {
                continue;
            }
            for k in col..N {
                let v = m[col][k];
                m[row][k] = m[row][k] - factor * v;
            }
            let r = rhs[col];
            rhs[row] = rhs[row] - factor * r;
        }
    }
    let mut x = [T::zero(); N];
    for row in (0..N).rev() {
        let mut acc = rhs[row];
        for k in row + 1..N {
            acc = acc - m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let m = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let x: [f64; 3] = solve_dense(m, [3.0, 5.0, 5.0]).unwrap();
        for (g, w) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((g - w).abs() < 1e-12);
        }
        assert!(solve_dense([[1.0f64, 2.0], [2.0, 4.0]], [1.0, 1.0]).is_none());
    }
}
