//! Trapezoid-quadrature norms in `L²(dx)`, `L²(ρ_t)`, `L²(1+ρ_t)` and `H¹(1+ρ_t)`,
//! where `ρ_t(x) = ρ(x + s)` for a shift `s` (usually `s = ct`).

use crate::grid::SpatialGrid;
use crate::wave_profile::WaveProfile;

#[derive(Debug, Clone)]
pub struct WeightedNormKit {
    grid: SpatialGrid,
    weights: Vec<f64>,
    rho: Vec<f64>,
    slope: f64,
}

/// Raw quadrature sums from which every norm of one field follows.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormSums {
    pub l2: f64,
    pub rho: f64,
    pub dx_l2: f64,
    pub dx_rho: f64,
}

impl NormSums {
    /// `‖h‖²_{1+ρ_t}` given the weight factor `e^{-(c/ν)s}`.
    #[inline]
    pub fn one_plus_rho(&self, factor: f64) -> f64 {
        self.l2 + factor * self.rho
    }

    #[inline]
    pub fn h1(&self, factor: f64) -> f64 {
        self.l2 + self.dx_l2 + factor * (self.rho + self.dx_rho)
    }
}

impl WeightedNormKit {
    pub fn new(profile: &WaveProfile) -> Self {
        let grid = profile.grid().clone();
        Self {
            weights: grid.trapezoid_weights(),
            rho: profile.rho().to_vec(),
            slope: profile.c() / profile.nu(),
            grid,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// `ρ_s(x_i) / ρ(x_i) = e^{-(c/ν)s}`.
    #[inline]
    pub fn factor(&self, shift: f64) -> f64 {
        (-self.slope * shift).exp()
    }

    pub fn rho_t(&self, shift: f64) -> Vec<f64> {
        let f = self.factor(shift);
        self.rho.iter().map(|r| r * f).collect()
    }

    /// Second-order first derivative (one-sided at the ends).
    pub fn derivative(&self, h: &[f64]) -> Vec<f64> {
        let n = h.len();
        let inv = 1.0 / (2.0 * self.grid.dx());
        (0..n)
            .map(|i| {
                if i == 0 {
                    (-3.0 * h[0] + 4.0 * h[1] - h[2]) * inv
                } else if i == n - 1 {
                    (3.0 * h[n - 1] - 4.0 * h[n - 2] + h[n - 3]) * inv
                } else {
                    (h[i + 1] - h[i - 1]) * inv
                }
            })
            .collect()
    }

    pub fn sums(&self, h: &[f64]) -> NormSums {
        let n = h.len();
        debug_assert_eq!(n, self.grid.len());
        let inv = 1.0 / (2.0 * self.grid.dx());
        let mut s = NormSums::default();
        for i in 0..n {
            let d = if i == 0 {
                (-3.0 * h[0] + 4.0 * h[1] - h[2]) * inv
            } else if i == n - 1 {
                (3.0 * h[n - 1] - 4.0 * h[n - 2] + h[n - 3]) * inv
            } else {
                (h[i + 1] - h[i - 1]) * inv
            };
            let w = self.weights[i];
            let wr = w * self.rho[i];
            s.l2 += w * h[i] * h[i];
            s.rho += wr * h[i] * h[i];
            s.dx_l2 += w * d * d;
            s.dx_rho += wr * d * d;
        }
        s
    }

    pub fn l2_sq(&self, h: &[f64]) -> f64 {
        h.iter().zip(&self.weights).map(|(v, w)| w * v * v).sum()
    }

    pub fn rho_sq(&self, h: &[f64], shift: f64) -> f64 {
        self.factor(shift)
            * h.iter()
                .zip(&self.weights)
                .zip(&self.rho)
                .map(|((v, w), r)| w * r * v * v)
                .sum::<f64>()
    }

    pub fn one_plus_rho_sq(&self, h: &[f64], shift: f64) -> f64 {
        self.l2_sq(h) + self.rho_sq(h, shift)
    }

    pub fn h1_sq(&self, h: &[f64], shift: f64) -> f64 {
        self.sums(h).h1(self.factor(shift))
    }

    pub fn h1(&self, h: &[f64], shift: f64) -> f64 {
        self.h1_sq(h, shift).sqrt()
    }

    pub fn rho_dot(&self, a: &[f64], b: &[f64], shift: f64) -> f64 {
        self.factor(shift)
            * a.iter()
                .zip(b)
                .zip(self.weights.iter().zip(&self.rho))
                .map(|((x, y), (w, r))| w * r * x * y)
                .sum::<f64>()
    }

    pub fn dx_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| w * x * y)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave_profile::nagumo_profile;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kit() -> (WaveProfile, WeightedNormKit) {
        let g = SpatialGrid::new(25.0, 1001).unwrap();
        let p = nagumo_profile(1.0, 2.0, 0.25, &g).unwrap();
        let k = WeightedNormKit::new(&p);
        (p, k)
    }

    #[test]
    fn decomposition_identities() {
        let (_, k) = kit();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let h: Vec<f64> = (0..1001).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s = rng.random_range(-3.0..3.0);
            let lhs = k.one_plus_rho_sq(&h, s);
            let rhs = k.l2_sq(&h) + k.rho_sq(&h, s);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs);
            let d = k.derivative(&h);
            let h1 = k.one_plus_rho_sq(&h, s) + k.one_plus_rho_sq(&d, s);
            assert!((k.h1_sq(&h, s) - h1).abs() <= 1e-12 * h1);
        }
    }

    #[test]
    fn weight_translation_identity() {
        // ‖h(· − s)‖_ρ = ‖h‖_{ρ_s}: shift a smooth bump analytically.
        let (p, k) = kit();
        let s = 1.5;
        let bump = |x: f64| (-(x - 2.0) * (x - 2.0)).exp();
        let h: Vec<f64> = p.grid().x().iter().map(|&x| bump(x)).collect();
        let moved: Vec<f64> = p.grid().x().iter().map(|&x| bump(x - s)).collect();
        let a = k.rho_sq(&moved, 0.0);
        let b = k.rho_sq(&h, s);
        assert!((a - b).abs() <= 1e-6 * b, "{a} {b}");
    }

    #[test]
    fn profile_derivative_has_unit_weighted_norm() {
        let (p, k) = kit();
        assert!((k.rho_sq(p.vhat_x(), 0.0) - 1.0).abs() < 1e-12);
    }
}
