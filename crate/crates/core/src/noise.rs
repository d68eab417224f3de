//! Truncated Q-Wiener noise on a sine basis with counter-based sampling.
//!
//! Increments for step `n` of path `p` are drawn from a ChaCha8 stream keyed by
//! `(master_seed, p)` and positioned at word `n << 32`, so any step can be
//! regenerated without replaying the path and the same Brownian path can drive
//! runs at different `ε`, `m` or (via aggregation) coarser time steps.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// Spectral description of `Q`: `Q e_k = q_k e_k`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    grid: SpatialGrid,
    sigma: f64,
    r: f64,
    wavenumbers: Vec<f64>,
    q: Vec<f64>,
    sqrt_q: Vec<f64>,
    /// Mode `k` occupies `modes[k*n .. (k+1)*n]`.
    modes: Vec<f64>,
    trace: f64,
    hs_h1: f64,
}

/// Identifies one Brownian path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSeed {
    pub master_seed: u64,
    pub path_index: u64,
}

impl PathSeed {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        Self {
            master_seed,
            path_index,
        }
    }
}

/// Quadrature weight used by [`NoiseModel::pair`].
#[derive(Debug, Clone, Copy)]
pub enum PairingWeight<'a> {
    Dx,
    Rho(&'a [f64]),
    OnePlusRho(&'a [f64]),
}

pub fn build_noise(grid: &SpatialGrid, k: usize, sigma: f64, r: f64) -> Result<NoiseModel> {
    NoiseModel::new(grid, k, sigma, r)
}

impl NoiseModel {
    pub fn new(grid: &SpatialGrid, k: usize, sigma: f64, r: f64) -> Result<Self> {
        let n = grid.len();
        if k == 0 || k > n - 2 {
            return Err(Error::param("K", format!("need 1 <= K <= n-2 = {}, got {k}", n - 2)));
        }
        if !(r >= 2.0) {
            return Err(Error::param(
                "r",
                format!("need r >= 2 for a Hilbert-Schmidt square root into H^1, got {r}"),
            ));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::param("sigma", format!("must be non-negative, got {sigma}")));
        }
        let l = grid.half_width();
        let norm = (1.0 / l).sqrt();
        let cells = (n - 1) as f64;
        let mut modes = vec![0.0; k * n];
        let mut wavenumbers = Vec::with_capacity(k);
        let mut q = Vec::with_capacity(k);
        for j in 0..k {
            let kk = (j + 1) as f64;
            let w = kk * std::f64::consts::PI / (2.0 * l);
            wavenumbers.push(w);
            q.push(sigma * sigma * (1.0 + w * w).powf(-r));
            let row = &mut modes[j * n..(j + 1) * n];
            // sin(kπ i/(n-1)) evaluated from the node index keeps the ends exactly zero.
            for (i, e) in row.iter_mut().enumerate().skip(1).take(n - 2) {
                *e = norm * (kk * std::f64::consts::PI * i as f64 / cells).sin();
            }
        }
        let trace = q.iter().sum();
        let hs_h1 = q
            .iter()
            .zip(&wavenumbers)
            .map(|(q, w)| q * (1.0 + w * w))
            .sum();
        Ok(Self {
            grid: grid.clone(),
            sigma,
            r,
            sqrt_q: q.iter().map(|v: &f64| v.sqrt()).collect(),
            wavenumbers,
            q,
            modes,
            trace,
            hs_h1,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }
    pub fn modes_count(&self) -> usize {
        self.q.len()
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn eigenvalues(&self) -> &[f64] {
        &self.q
    }
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }
    pub fn trace(&self) -> f64 {
        self.trace
    }
    /// `Σ q_k (1 + w_k²)`, the squared Hilbert–Schmidt norm of `√Q` into `H¹`.
    pub fn hs_h1(&self) -> f64 {
        self.hs_h1
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        let n = self.grid.len();
        &self.modes[k * n..(k + 1) * n]
    }

    /// `Σ q_k ‖e_k‖²_w` for nodal weights `w` (trapezoid), e.g. `‖√Q‖²_HS` in `L²(ρ)`.
    pub fn hs_weighted(&self, weight: &[f64]) -> f64 {
        let g = &self.grid;
        (0..self.q.len())
            .map(|k| {
                let e = self.mode(k);
                let s: Vec<f64> = e.iter().zip(weight).map(|(e, w)| e * e * w).collect();
                self.q[k] * g.integrate(&s)
            })
            .sum()
    }

    /// Coordinates `⟨φ, e_k⟩_{L²(dx)}`.
    pub fn project(&self, phi: &[f64]) -> Vec<f64> {
        (0..self.q.len())
            .map(|k| dot_trapezoid(&self.grid, phi, self.mode(k)))
            .collect()
    }

    /// `⟨φ, Qφ⟩ = Σ q_k ⟨φ, e_k⟩²`.
    pub fn quadratic_form(&self, phi: &[f64]) -> f64 {
        self.project(phi)
            .iter()
            .zip(&self.q)
            .map(|(p, q)| q * p * p)
            .sum()
    }

    /// Standard normal coordinates for one base step of a path.
    pub fn normals(&self, seed: PathSeed, step: u64, out: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.master_seed);
        rng.set_stream(seed.path_index);
        rng.set_word_pos((step as u128) << 32);
        for z in out.iter_mut() {
            *z = StandardNormal.sample(&mut rng);
        }
    }

    /// Synthesises `Σ_k β_k e_k` on the grid.
    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        let n = self.grid.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, &b) in coeffs.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let e = &self.modes[k * n..(k + 1) * n];
            for (o, &ei) in out.iter_mut().zip(e) {
                *o += b * ei;
            }
        }
    }

    /// `⟨φ, h⟩` under the requested trapezoid weight.
    pub fn pair(&self, phi: &[f64], h: &[f64], weight: PairingWeight<'_>) -> Result<f64> {
        self.grid.check_len(phi)?;
        self.grid.check_len(h)?;
        Ok(match weight {
            PairingWeight::Dx => dot_trapezoid(&self.grid, phi, h),
            PairingWeight::Rho(rho) => {
                self.grid.check_len(rho)?;
                let g: Vec<f64> = phi.iter().zip(h).zip(rho).map(|((a, b), r)| a * b * r).collect();
                self.grid.integrate(&g)
            }
            PairingWeight::OnePlusRho(rho) => {
                self.grid.check_len(rho)?;
                let g: Vec<f64> = phi
                    .iter()
                    .zip(h)
                    .zip(rho)
                    .map(|((a, b), r)| a * b * (1.0 + r))
                    .collect();
                self.grid.integrate(&g)
            }
        })
    }

    pub fn stream(&self, seed: PathSeed, dt: f64, aggregate: usize) -> Result<IncrementStream<'_>> {
        IncrementStream::new(self, seed, dt, aggregate)
    }
}

/// `∫ a b dx` by the trapezoid rule.
pub fn dot_trapezoid(grid: &SpatialGrid, a: &[f64], b: &[f64]) -> f64 {
    let n = grid.len();
    let interior: f64 = a[1..n - 1].iter().zip(&b[1..n - 1]).map(|(x, y)| x * y).sum();
    grid.dx() * (interior + 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]))
}

/// Per-path sequence of increments `ΔW_n = Σ_k √(q_k dt) ξ_{n,k} e_k`.
///
/// With `aggregate = A`, step `n` sums base draws `nA .. nA+A-1`, i.e. the path of a
/// stream with step `dt/A`: runs at `dt` and `dt/A` share one Brownian path.
#[derive(Debug)]
pub struct IncrementStream<'a> {
    model: &'a NoiseModel,
    seed: PathSeed,
    dt: f64,
    aggregate: usize,
    step: u64,
    xi: Vec<f64>,
    acc: Vec<f64>,
}

impl<'a> IncrementStream<'a> {
    pub fn new(model: &'a NoiseModel, seed: PathSeed, dt: f64, aggregate: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        if aggregate == 0 {
            return Err(Error::param("aggregate", "must be at least 1"));
        }
        let k = model.modes_count();
        Ok(Self {
            model,
            seed,
            dt,
            aggregate,
            step: 0,
            xi: vec![0.0; k],
            acc: vec![0.0; k],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Spectral coefficients `β_k` of the next increment.
    pub fn next_coefficients(&mut self) -> &[f64] {
        self.acc.iter_mut().for_each(|v| *v = 0.0);
        if self.model.sigma == 0.0 {
            self.step += 1;
            return &self.acc;
        }
        let a = self.aggregate as u64;
        for j in 0..a {
            self.model.normals(self.seed, self.step * a + j, &mut self.xi);
            for (s, x) in self.acc.iter_mut().zip(&self.xi) {
                *s += x;
            }
        }
        let base_dt = self.dt / self.aggregate as f64;
        for (s, sq) in self.acc.iter_mut().zip(&self.model.sqrt_q) {
            *s *= sq * base_dt.sqrt();
        }
        self.step += 1;
        &self.acc
    }

    /// Writes the next increment on the grid into `out`.
    pub fn next_into(&mut self, out: &mut [f64]) {
        self.next_coefficients();
        self.model.synthesize(&self.acc, out);
    }

    /// `⟨φ, ΔW_n⟩` for the next `n_steps` increments.
    pub fn pair_with(
        &mut self,
        n_steps: usize,
        phi: &[f64],
        weight: PairingWeight<'_>,
    ) -> Result<Vec<f64>> {
        let mut dw = vec![0.0; self.model.grid.len()];
        let mut out = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            self.next_into(&mut dw);
            out.push(self.model.pair(phi, &dw, weight)?);
        }
        Ok(out)
    }

    /// Dumps the next `n_steps` increments (coefficient form) with a versioned header.
    pub fn dump<W: Write>(&mut self, n_steps: u64, mut w: W) -> Result<()> {
        let header = DumpHeader {
            grid_hash: self.model.grid.fingerprint(),
            modes: self.model.modes_count() as u64,
            dt: self.dt,
            n_steps,
            seed: self.seed,
        };
        header.write(&mut w)?;
        for _ in 0..n_steps {
            for c in self.next_coefficients() {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub const DUMP_MAGIC: [u8; 8] = *b"WFNOISE\0";
pub const DUMP_VERSION: u32 = 1;

/// Header of an increment dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpHeader {
    pub grid_hash: u64,
    pub modes: u64,
    pub dt: f64,
    pub n_steps: u64,
    pub seed: PathSeed,
}

impl DumpHeader {
    fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        for v in [self.grid_hash, self.modes, self.dt.to_bits(), self.n_steps] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.seed.master_seed.to_le_bytes())?;
        w.write_all(&self.seed.path_index.to_le_bytes())?;
        Ok(())
    }

    /// Reads a dump header and its coefficient payload.
    pub fn read_dump<R: Read>(mut r: R) -> Result<(Self, Vec<f64>)> {
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8)?;
        if buf8 != DUMP_MAGIC {
            return Err(Error::Serialization("not a noise dump".into()));
        }
        let mut buf4 = [0u8; 4];
        r.read_exact(&mut buf4)?;
        let version = u32::from_le_bytes(buf4);
        if version != DUMP_VERSION {
            return Err(Error::Serialization(format!("unsupported dump version {version}")));
        }
        r.read_exact(&mut buf4)?;
        let mut next = || -> Result<u64> {
            r.read_exact(&mut buf8)?;
            Ok(u64::from_le_bytes(buf8))
        };
        let header = DumpHeader {
            grid_hash: next()?,
            modes: next()?,
            dt: f64::from_bits(next()?),
            n_steps: next()?,
            seed: PathSeed::new(next()?, next()?),
        };
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        let expected = (header.modes * header.n_steps * 8) as usize;
        if payload.len() != expected {
            return Err(Error::Serialization(format!(
                "payload has {} bytes, header implies {expected}",
                payload.len()
            )));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok((header, values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(40.0, 1601).unwrap()
    }

    #[test]
    fn single_mode_trace() {
        let m = build_noise(&grid(), 1, 1.0, 2.0).unwrap();
        let w = std::f64::consts::PI / 80.0;
        let expected = (1.0 + w * w).powi(-2);
        assert!((m.trace() - expected).abs() < 1e-15);
    }

    #[test]
    fn trace_matches_direct_sum() {
        let m = build_noise(&grid(), 64, 0.7, 2.0).unwrap();
        let mut s = 0.0;
        for k in 1..=64 {
            let w = k as f64 * std::f64::consts::PI / 80.0;
            s += 0.49 / ((1.0 + w * w) * (1.0 + w * w));
        }
        assert!((m.trace() - s).abs() <= 1e-14 * s);
        let mut h1 = 0.0;
        for k in 1..=64 {
            let w = k as f64 * std::f64::consts::PI / 80.0;
            h1 += 0.49 / (1.0 + w * w);
        }
        assert!((m.hs_h1() - h1).abs() <= 1e-14 * h1);
    }

    #[test]
    fn rejects_rough_noise_and_too_many_modes() {
        assert!(build_noise(&grid(), 64, 1.0, 1.5).is_err());
        assert!(build_noise(&grid(), 1600, 1.0, 2.0).is_err());
        assert!(build_noise(&grid(), 0, 1.0, 2.0).is_err());
    }

    #[test]
    fn modes_are_orthonormal() {
        let g = SpatialGrid::new(40.0, 401).unwrap();
        let m = build_noise(&g, 64, 1.0, 2.0).unwrap();
        for j in 0..64 {
            for k in 0..64 {
                let d = dot_trapezoid(&g, m.mode(j), m.mode(k));
                let target = if j == k { 1.0 } else { 0.0 };
                assert!((d - target).abs() <= 1e-10, "({j},{k}) -> {d}");
            }
        }
    }

    #[test]
    fn zero_sigma_gives_zero_increments() {
        let m = build_noise(&grid(), 16, 0.0, 2.0).unwrap();
        let mut s = m.stream(PathSeed::new(1, 2), 0.01, 1).unwrap();
        let mut dw = vec![1.0; 1601];
        for _ in 0..10 {
            s.next_into(&mut dw);
            assert!(dw.iter().all(|&v| v == 0.0));
        }
        assert_eq!(m.trace(), 0.0);
    }

    #[test]
    fn streams_are_reproducible() {
        let m = build_noise(&grid(), 16, 1.0, 2.0).unwrap();
        let draw = |seed| {
            let mut s = m.stream(seed, 0.01, 1).unwrap();
            (0..5).flat_map(|_| s.next_coefficients().to_vec()).collect::<Vec<_>>()
        };
        assert_eq!(draw(PathSeed::new(7, 3)), draw(PathSeed::new(7, 3)));
        assert_ne!(draw(PathSeed::new(7, 3)), draw(PathSeed::new(7, 4)));
        assert_ne!(draw(PathSeed::new(7, 3)), draw(PathSeed::new(8, 3)));
    }

    #[test]
    fn aggregation_couples_time_steps() {
        let m = build_noise(&grid(), 8, 1.0, 2.0).unwrap();
        let seed = PathSeed::new(11, 0);
        let mut fine = m.stream(seed, 0.005, 1).unwrap();
        let mut coarse = m.stream(seed, 0.01, 2).unwrap();
        for _ in 0..4 {
            let a = fine.next_coefficients().to_vec();
            let b = fine.next_coefficients().to_vec();
            let c = coarse.next_coefficients().to_vec();
            for k in 0..8 {
                assert!((a[k] + b[k] - c[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn orthogonal_phi_pairs_to_zero() {
        let g = SpatialGrid::new(10.0, 201).unwrap();
        let m = build_noise(&g, 8, 1.0, 2.0).unwrap();
        // Mode 20 is orthogonal to modes 1..8 on the discrete grid.
        let k = 20.0;
        let phi: Vec<f64> = (0..201)
            .map(|i| (k * std::f64::consts::PI * i as f64 / 200.0).sin())
            .collect();
        let mut s = m.stream(PathSeed::new(3, 0), 0.1, 1).unwrap();
        let p = s.pair_with(20, &phi, PairingWeight::Dx).unwrap();
        assert!(p.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn mean_squared_increment_matches_trace() {
        let g = SpatialGrid::new(20.0, 401).unwrap();
        let m = build_noise(&g, 32, 1.0, 2.0).unwrap();
        let dt = 0.01;
        let mut s = m.stream(PathSeed::new(5, 0), dt, 1).unwrap();
        let mut dw = vec![0.0; 401];
        let n = 10_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                s.next_into(&mut dw);
                dot_trapezoid(&g, &dw, &dw) / dt
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - m.trace()).abs() < 3.0 * se, "{mean} vs {}", m.trace());
    }

    #[test]
    fn first_mode_pairing_variance() {
        let g = SpatialGrid::new(20.0, 401).unwrap();
        let m = build_noise(&g, 16, 1.0, 2.0).unwrap();
        let dt = 0.01;
        let phi = m.mode(0).to_vec();
        let mut s = m.stream(PathSeed::new(9, 1), dt, 1).unwrap();
        let n = 20_000;
        let p = s.pair_with(n, &phi, PairingWeight::Dx).unwrap();
        let var = p.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let target = m.eigenvalues()[0] * dt;
        // Var of the sample second moment of a centred normal is 2σ⁴/n.
        let se = target * (2.0 / n as f64).sqrt();
        assert!((var - target).abs() < 3.0 * se, "{var} vs {target}");
    }

    #[test]
    fn dump_round_trip() {
        let m = build_noise(&grid(), 4, 1.0, 2.0).unwrap();
        let seed = PathSeed::new(1, 1);
        let mut buf = Vec::new();
        m.stream(seed, 0.01, 1).unwrap().dump(3, &mut buf).unwrap();
        let (h, values) = DumpHeader::read_dump(&buf[..]).unwrap();
        assert_eq!(h.n_steps, 3);
        assert_eq!(h.modes, 4);
        assert_eq!(h.seed, seed);
        let mut s = m.stream(seed, 0.01, 1).unwrap();
        let first = s.next_coefficients().to_vec();
        assert_eq!(&values[..4], &first[..]);
        assert!(DumpHeader::read_dump(&buf[..20]).is_err());
    }
}
