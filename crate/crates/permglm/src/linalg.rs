//! Small dense helpers shared by the model-fitting code.
//!
//! The design matrices here have at most a handful of columns, so a modified
//! Gram-Schmidt with a second reorthogonalisation pass is both accurate
//! enough and easy to audit. Columns whose residual norm falls below
//! `drop_tol` times their original norm are dependent on the columns already
//! accepted and are dropped; that is exactly what the reduced-model
//! construction needs, where spans matter and column counts do not.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Orthonormal basis of the span of `cols`, each of length `rows`.
/// Returns the accepted basis vectors in input order.
pub(crate) fn orthonormal_basis(cols: &[Vec<f64>], drop_tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for col in cols {
        let orig = norm2(col).sqrt();
        if orig == 0.0 {
            continue;
        }
        let mut v = col.clone();
        // Two passes keep the basis orthogonal to machine precision even
        // when input columns are nearly dependent.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let n = norm2(&v).sqrt();
        if n > drop_tol * orig {
            for vi in v.iter_mut() {
                *vi /= n;
            }
            basis.push(v);
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn basis_is_orthonormal_and_spans() {
        let cols = vec![
            vec![1.0, 1.0, 1.0, 1.0],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![2.0, 3.0, 4.0, 5.0], // sum of the first two: must be dropped
        ];
        let basis = orthonormal_basis(&cols, 1e-10);
        assert_eq!(basis.len(), 2);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot(a, b), expect, epsilon = 1e-12);
            }
        }
        // The dropped column projects onto the basis with no residual.
        let mut v = cols[2].clone();
        for q in &basis {
            let c = dot(q, &v);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
        assert_abs_diff_eq!(norm2(&v).sqrt(), 0.0, epsilon = 1e-10);
    }
}
