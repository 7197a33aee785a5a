//! Thomas algorithm for tridiagonal systems.

/// Reusable scratch for [`solve`].
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    c_prime: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Self {
            c_prime: vec![0.0; n],
        }
    }
}

/// Solves `A x = d` in place (`d` is overwritten with `x`).
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (`lower[0]` unused), `upper[i]`
/// multiplies `x[i+1]` (`upper[n-1]` unused). No pivoting: callers pass
/// diagonally dominant matrices.
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], d: &mut [f64], ws: &mut Workspace) {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && d.len() == n);
    if n == 0 {
        return;
    }
    if ws.c_prime.len() < n {
        ws.c_prime.resize(n, 0.0);
    }
    let cp = &mut ws.c_prime;
    cp[0] = upper[0] / diag[0];
    d[0] /= diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * cp[i - 1];
        cp[i] = upper[i] / denom;
        d[i] = (d[i] - lower[i] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}
