//! Second-order finite-difference discretisation of the frozen-wave operator
//! `𝓛^# = νΔ + b f'(v̂) − c∂ₓ` with homogeneous Dirichlet ends.
//!
//! The interior matrix is tridiagonal with constant off-diagonals
//! `l = ν/dx² + c/2dx` (coupling to `x_{i-1}`) and `u = ν/dx² − c/2dx`
//! (coupling to `x_{i+1}`). It is similar to the symmetric matrix with
//! off-diagonal `√(lu)` through the diagonal scaling `ρ_h^{1/2}`, where
//! `ρ_h(x_{i+1})/ρ_h(x_i) = u/l ≈ e^{-(c/ν)dx}` is the discrete counterpart of `ρ`.

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::tridiag::{SymTridiagonal, TridiagonalLu};
use crate::wave_profile::WaveProfile;

#[derive(Debug, Clone)]
pub struct FrozenOperator {
    grid: SpatialGrid,
    lower: f64,
    upper: f64,
    /// Diagonal on interior nodes `1..n-1` (index `i-1`).
    diag: Vec<f64>,
    /// `ρ_h` on all nodes, matched to `ρ` at `x = 0`.
    rho_h: Vec<f64>,
}

impl FrozenOperator {
    pub fn new(profile: &WaveProfile) -> Result<Self> {
        let grid = profile.grid().clone();
        let dx = grid.dx();
        let (nu, b, c) = (profile.nu(), profile.b(), profile.c());
        let lower = nu / (dx * dx) + c / (2.0 * dx);
        let upper = nu / (dx * dx) - c / (2.0 * dx);
        if upper <= 0.0 || lower <= 0.0 {
            return Err(Error::param(
                "dx",
                format!("cell Péclet number too large: need dx < 2ν/|c| = {}", 2.0 * nu / c.abs()),
            ));
        }
        let n = grid.len();
        let f = profile.reaction();
        let diag = profile.vhat()[1..n - 1]
            .iter()
            .map(|&v| -2.0 * nu / (dx * dx) + b * f.df(v))
            .collect();
        let ratio = upper / lower;
        let mid = grid.mid();
        let mut rho_h = vec![0.0; n];
        rho_h[mid] = profile.rho()[mid];
        for i in mid + 1..n {
            rho_h[i] = rho_h[i - 1] * ratio;
        }
        for i in (0..mid).rev() {
            rho_h[i] = rho_h[i + 1] / ratio;
        }
        Ok(Self {
            grid,
            lower,
            upper,
            diag,
            rho_h,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn interior_len(&self) -> usize {
        self.diag.len()
    }

    pub fn rho_h(&self) -> &[f64] {
        &self.rho_h
    }

    /// `𝓛^#_h u` on the full grid (zero at the ends).
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            out[i] = self.lower * u[i - 1] + self.diag[i - 1] * u[i] + self.upper * u[i + 1];
        }
        out
    }

    /// Transpose `(𝓛^#_h)ᵀ w`, the adjoint in the unweighted inner product.
    pub fn apply_transpose(&self, w: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            out[i] = self.upper * w[i - 1] + self.diag[i - 1] * w[i] + self.lower * w[i + 1];
        }
        out
    }

    /// Symmetric form `ρ_h^{1/2} 𝓛^#_h ρ_h^{-1/2}` on interior nodes.
    pub fn symmetric(&self) -> SymTridiagonal {
        let m = self.diag.len();
        SymTridiagonal::new(self.diag.clone(), vec![(self.lower * self.upper).sqrt(); m - 1])
    }

    /// Interior coordinates `w_i = ρ_h(x_i)^{1/2} u_i`.
    pub fn to_symmetric(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        (1..n - 1).map(|i| self.rho_h[i].sqrt() * u[i]).collect()
    }

    pub fn from_symmetric(&self, w: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let mut u = vec![0.0; n];
        for i in 1..n - 1 {
            u[i] = w[i - 1] / self.rho_h[i].sqrt();
        }
        u
    }

    /// Factorisation of `I − dt 𝓛^#_h` for implicit Euler steps.
    pub fn implicit_euler(&self, dt: f64) -> TridiagonalLu {
        let m = self.diag.len();
        let lower = vec![-dt * self.lower; m];
        let upper = vec![-dt * self.upper; m];
        let diag: Vec<f64> = self.diag.iter().map(|d| 1.0 - dt * d).collect();
        TridiagonalLu::new(&lower, &diag, &upper)
    }
}

/// `‖𝓛^#_h v̂_x‖_{L²(ρ)}` and `‖(𝓛^#_h)ᵀ Ψ‖_{L²(dx)}`: both vanish in the continuum.
pub fn kernel_residuals(profile: &WaveProfile) -> Result<(f64, f64)> {
    let op = FrozenOperator::new(profile)?;
    let g = profile.grid();
    let lv = op.apply(profile.vhat_x());
    let weighted: Vec<f64> = lv.iter().zip(profile.rho()).map(|(a, r)| a * a * r).collect();
    let la = op.apply_transpose(profile.psi());
    let plain: Vec<f64> = la.iter().map(|a| a * a).collect();
    Ok((g.integrate(&weighted).sqrt(), g.integrate(&plain).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave_profile::nagumo_profile;

    #[test]
    fn symmetric_form_is_similar() {
        let g = SpatialGrid::new(10.0, 101).unwrap();
        let p = nagumo_profile(1.0, 2.0, 0.25, &g).unwrap();
        let op = FrozenOperator::new(&p).unwrap();
        let u: Vec<f64> = g.x().iter().map(|x| (-x * x / 4.0).exp() * (1.0 + x)).collect();
        let mut u0 = u.clone();
        u0[0] = 0.0;
        u0[100] = 0.0;
        let direct = op.to_symmetric(&op.apply(&u0));
        let via = op.symmetric().matvec(&op.to_symmetric(&u0));
        for (a, b) in direct.iter().zip(&via) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn discrete_weight_tracks_rho() {
        let g = SpatialGrid::new(40.0, 1601).unwrap();
        let p = nagumo_profile(1.0, 2.0, 0.25, &g).unwrap();
        let op = FrozenOperator::new(&p).unwrap();
        for i in (0..g.len()).step_by(100) {
            let rel = op.rho_h()[i] / p.rho()[i] - 1.0;
            // Per-cell mismatch is O((c dx/ν)³), accumulated over 40 length units.
            assert!(rel.abs() < 2e-3, "{i}: {rel}");
        }
    }

    #[test]
    fn kernel_residuals_are_small() {
        let g = SpatialGrid::new(40.0, 1601).unwrap();
        let p = nagumo_profile(1.0, 2.0, 0.25, &g).unwrap();
        let (k, a) = kernel_residuals(&p).unwrap();
        assert!(k < 1e-3 && a < 1e-3, "{k} {a}");
    }

    #[test]
    fn rejects_coarse_grid_for_fast_waves() {
        let g = SpatialGrid::new(40.0, 11).unwrap();
        let p = nagumo_profile(1.0, 200.0, 0.01, &g).unwrap();
        assert!(FrozenOperator::new(&p).is_err());
    }
}
