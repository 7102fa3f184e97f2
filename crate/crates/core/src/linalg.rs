use alloc::vec::Vec;

/// Solution of a symmetric positive definite system by Cholesky factorization.
pub(crate) struct CholeskySolution {
    pub x: Vec<f64>,
    /// Smallest ratio of squared pivot to the original diagonal entry; near
    /// zero when columns are (almost) collinear.
    pub min_pivot_ratio: f64,
}

/// Solves `a · x = b` for SPD `a` (row-major `n×n`). Returns `None` when a
/// pivot is not positive.
pub(crate) fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<CholeskySolution> {
    let mut l = a.to_vec();
    let mut min_ratio = f64::INFINITY;
    for j in 0..n {
        let mut diag = l[j * n + j];
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if !(diag > 0.0) {
            return None;
        }
        let orig = a[j * n + j];
        if orig > 0.0 {
            min_ratio = min_ratio.min(diag / orig);
        }
        let pivot = libm::sqrt(diag);
        l[j * n + j] = pivot;
        for i in j + 1..n {
            let mut v = l[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / pivot;
        }
    }
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
    Some(CholeskySolution { x: y, min_pivot_ratio: min_ratio })
}
