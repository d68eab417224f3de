//! Tridiagonal linear algebra: Thomas solves and symmetric eigenvalues.

/// Solve `A x = rhs` for tridiagonal `A` (no pivoting).
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (so `lower[0]` is ignored) and
/// `upper[i]` multiplies `x[i+1]` (so `upper[n-1]` is ignored).
pub fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut cp = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = diag[0];
    cp[0] = upper[0] / denom;
    x[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * cp[i - 1];
        cp[i] = upper[i] / denom;
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    x
}

/// Pre-factored constant tridiagonal matrix for repeated solves.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    lower: Vec<f64>,
    cp: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl TridiagonalLu {
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Self {
        let n = diag.len();
        assert!(lower.len() == n && upper.len() == n && n > 0);
        let mut cp = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        inv_denom[0] = 1.0 / diag[0];
        cp[0] = upper[0] * inv_denom[0];
        for i in 1..n {
            inv_denom[i] = 1.0 / (diag[i] - lower[i] * cp[i - 1]);
            cp[i] = upper[i] * inv_denom[i];
        }
        Self {
            lower: lower.to_vec(),
            cp,
            inv_denom,
        }
    }

    /// Matrix `I - dt*nu*D2` on `n` interior nodes with homogeneous Dirichlet ends.
    pub fn implicit_diffusion(n: usize, nu: f64, dt: f64, dx: f64) -> Self {
        let s = dt * nu / (dx * dx);
        let off = vec![-s; n];
        let diag = vec![1.0 + 2.0 * s; n];
        Self::new(&off, &diag, &off)
    }

    pub fn len(&self) -> usize {
        self.cp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cp.is_empty()
    }

    /// Overwrites `x` (holding the right-hand side) with the solution.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.cp.len();
        assert_eq!(x.len(), n);
        x[0] *= self.inv_denom[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i] * x[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.cp[i] * x[i + 1];
        }
    }
}

/// Symmetric tridiagonal matrix stored as diagonal and off-diagonal
/// (`off[i]` couples `i` and `i+1`, length `n-1`).
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            let prev = if q == 0.0 { f64::EPSILON * (1.0 + x.abs()) } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th largest eigenvalue (`k = 0` is the largest), by bisection.
    pub fn eigenvalue_from_top(&self, k: usize) -> f64 {
        let n = self.len();
        assert!(k < n);
        // Want the eigenvalue with exactly n-1-k eigenvalues below it.
        let target = n - 1 - k;
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > target {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * scale {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Unit eigenvector for an (accurately known) eigenvalue by inverse iteration.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.len();
        let (lo, hi) = self.gershgorin();
        let shift = lambda + 1e-10 * (hi - lo).max(1.0);
        let lower: Vec<f64> = std::iter::once(0.0).chain(self.off.iter().copied()).collect();
        let upper: Vec<f64> = self.off.iter().copied().chain(std::iter::once(0.0)).collect();
        let diag: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let lu = TridiagonalLu::new(&lower, &diag, &upper);
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i * 7919) % 97) as f64).collect();
        for _ in 0..6 {
            lu.solve_in_place(&mut v);
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= norm);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn thomas_matches_product() {
        let n = 50;
        let lower: Vec<f64> = (0..n).map(|i| 0.3 + 0.01 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.2 - 0.02 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 3.0 + (i as f64).sin()).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos()).collect();
        let rhs = dense_mul(&lower, &diag, &upper, &x);
        let sol = solve(&lower, &diag, &upper, &rhs);
        let lu = TridiagonalLu::new(&lower, &diag, &upper);
        let mut sol2 = rhs.clone();
        lu.solve_in_place(&mut sol2);
        for i in 0..n {
            assert!((sol[i] - x[i]).abs() < 1e-12);
            assert!((sol2[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_eigenvalues() {
        // -2 on the diagonal, 1 off: eigenvalues -2 + 2 cos(k pi/(n+1)).
        let n = 40;
        let m = SymTridiagonal::new(vec![-2.0; n], vec![1.0; n - 1]);
        for k in 0..5 {
            let exact = -2.0 + 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((m.eigenvalue_from_top(k) - exact).abs() < 1e-12);
        }
        let lam = m.eigenvalue_from_top(0);
        let v = m.eigenvector(lam);
        let mv = m.matvec(&v);
        for i in 0..n {
            assert!((mv[i] - lam * v[i]).abs() < 1e-9);
        }
    }
}
