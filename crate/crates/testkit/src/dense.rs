//! Naive dense linear algebra.

pub type Dense = Vec<Vec<f64>>;

pub fn identity(n: usize) -> Dense {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

pub fn ones_row(n: usize) -> Dense {
    vec![vec![1.0; n]]
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ar, ac) = (a.len(), a.first().map_or(0, Vec::len));
    let (br, bc) = (b.len(), b.first().map_or(0, Vec::len));
    let mut out = vec![vec![0.0; ac * bc]; ar * br];
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[i * br + k][j * bc + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..n)
                .map(|j| row.iter().zip(b.iter()).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

pub fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Columns given as vectors, returned as a δ×K matrix.
pub fn from_columns(cols: &[Vec<f64>], rows: usize) -> Dense {
    (0..rows).map(|h| cols.iter().map(|c| c[h]).collect()).collect()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    assert_eq!(a.len(), b.len(), "row count");
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| {
            assert_eq!(r.len(), s.len(), "column count");
            r.iter().zip(s).map(|(x, y)| (x - y).abs())
        })
        .fold(0.0, f64::max)
}
