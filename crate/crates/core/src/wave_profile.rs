//! Deterministic travelling wave `(v̂, c)`, adjoint zero-eigenfunction `Ψ`,
//! weight `ρ = Z e^{-(c/ν)x}` and asymptotic decay rates.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::reaction::{AssumptionGrid, ReactionFunction};
use crate::tridiag;

/// Which profile function to evaluate at shifted points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileField {
    Vhat,
    VhatX,
    VhatXX,
    VhatXXX,
    Psi,
    PsiX,
}

/// Sampled travelling wave with everything derived from it.
#[derive(Debug, Clone)]
pub struct WaveProfile {
    grid: SpatialGrid,
    reaction: ReactionFunction,
    nu: f64,
    b: f64,
    c: f64,
    vhat: Vec<f64>,
    vhat_x: Vec<f64>,
    vhat_xx: Vec<f64>,
    vhat_xxx: Vec<f64>,
    vhat_xxxx: Vec<f64>,
    psi: Vec<f64>,
    rho: Vec<f64>,
    z: f64,
    gamma_minus: f64,
    gamma_plus: f64,
    /// Steepness `k = √(b/2ν)` when the Nagumo closed form is available.
    closed_form: Option<f64>,
}

/// Summary numbers written alongside profile exports.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileSummary {
    pub c: f64,
    pub nu: f64,
    pub b: f64,
    pub a: f64,
    pub z: f64,
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    pub closed_form: bool,
    pub rho_constant: bool,
}

/// `σ(kx)` together with `s(1-s)` and `1-2s`, computed without cancellation.
#[inline]
fn logistic_parts(kx: f64) -> (f64, f64, f64) {
    let e = (-kx.abs()).exp();
    let inv = 1.0 / (1.0 + e);
    let p = e * inv * inv;
    let (s, q) = if kx >= 0.0 {
        (inv, (1.0 - e) * inv * -1.0)
    } else {
        (e * inv, (1.0 - e) * inv)
    };
    // q = 1 - 2s: for kx >= 0, 1 - 2/(1+e) = (e-1)/(1+e).
    (s, p, q)
}

/// `(γ₋, γ₊)`: limits of `(b/ν) f(v̂)/v̂_x` at `∓∞`.
pub fn decay_rates(c: f64, nu: f64, b: f64, f: &ReactionFunction) -> (f64, f64) {
    let h = c / (2.0 * nu);
    let gm = h - (h * h - b / nu * f.df(0.0)).sqrt();
    let gp = h + (h * h - b / nu * f.df(1.0)).sqrt();
    (gm, gp)
}

fn hermite(h: f64, t: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

/// Options for the collocation Newton solve.
#[derive(Debug, Clone, Copy)]
pub struct BvpOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for BvpOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 60,
        }
    }
}

fn check_coefficients(nu: f64, b: f64) -> Result<()> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::param("nu", format!("must be positive, got {nu}")));
    }
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::param("b", format!("must be positive, got {b}")));
    }
    Ok(())
}

/// Closed-form Nagumo wave `v̂(x) = (1+e^{-√(b/2ν)x})^{-1}`, `c = √(2νb)(1/2-a)`.
pub fn nagumo_profile(nu: f64, b: f64, a: f64, grid: &SpatialGrid) -> Result<WaveProfile> {
    check_coefficients(nu, b)?;
    let reaction = ReactionFunction::nagumo(a)?;
    let k = (b / (2.0 * nu)).sqrt();
    let c = (2.0 * nu * b).sqrt() * (0.5 - a);
    let n = grid.len();
    let mut p = WaveProfile::empty(grid.clone(), reaction, nu, b, c, Some(k));
    for i in 0..n {
        let x = grid.x()[i];
        p.vhat[i] = p.closed(ProfileField::Vhat, x);
        p.vhat_x[i] = p.closed(ProfileField::VhatX, x);
        p.vhat_xx[i] = p.closed(ProfileField::VhatXX, x);
        p.vhat_xxx[i] = p.closed(ProfileField::VhatXXX, x);
        let (_, pp, q) = logistic_parts(k * x);
        p.vhat_xxxx[i] = k.powi(4) * pp * q * (1.0 - 12.0 * pp);
    }
    p.finish()?;
    Ok(p)
}

/// Solves `c v̂_x = ν v̂_xx + b f(v̂)` on the grid with `v̂(-L)=0`, `v̂(L)=1`,
/// `v̂(0)=a`, Newton on the second-order collocation system with unknown `c`.
pub fn solve_profile_bvp(
    reaction: &ReactionFunction,
    nu: f64,
    b: f64,
    grid: &SpatialGrid,
    opts: BvpOptions,
) -> Result<WaveProfile> {
    check_coefficients(nu, b)?;
    let report = reaction.check_assumptions(&AssumptionGrid::default());
    if !report.bistable() {
        let failed: Vec<_> = report
            .checks
            .iter()
            .filter(|c| c.name.starts_with('A') && !c.passed)
            .map(|c| c.name)
            .collect();
        return Err(Error::param("reaction", format!("fails {failed:?}")));
    }
    let a = reaction.a();
    let n = grid.len();
    let dx = grid.dx();
    let mid = grid.mid();
    let k0 = (b / (2.0 * nu)).sqrt();
    let offset = (a / (1.0 - a)).ln();
    let mut v: Vec<f64> = grid
        .x()
        .iter()
        .map(|&x| 1.0 / (1.0 + (-(k0 * x + offset)).exp()))
        .collect();
    v[0] = 0.0;
    v[n - 1] = 1.0;
    v[mid] = a;
    let vx2: Vec<f64> = (0..n)
        .map(|i| {
            let x = k0 * grid.x()[i] + offset;
            let (_, p, _) = logistic_parts(x);
            (k0 * p).powi(2)
        })
        .collect();
    let mut c = b * reaction.potential_integral() / grid.integrate(&vx2);

    let inv_dx2 = nu / (dx * dx);
    let inv_2dx = 1.0 / (2.0 * dx);
    let residual = |v: &[f64], c: f64| -> Vec<f64> {
        (1..n - 1)
            .map(|i| {
                inv_dx2 * (v[i + 1] - 2.0 * v[i] + v[i - 1]) + b * reaction.f(v[i])
                    - c * (v[i + 1] - v[i - 1]) * inv_2dx
            })
            .collect()
    };
    let max_abs = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let m = n - 2;
    let jm = mid - 1;
    let mut r = residual(&v, c);
    let mut norm = max_abs(&r);
    let mut iterations = 0;
    while norm > opts.tolerance {
        if iterations == opts.max_iterations {
            return Err(Error::NoConvergence {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        // Jacobian with the pinned node's column replaced by ∂R/∂c. Sherman–Morrison
        // around T2 = (tridiagonal with column jm set to e_jm), which splits into
        // two well-posed Dirichlet problems on either side of x = 0.
        let mut lower = vec![inv_dx2 + c * inv_2dx; m];
        let mut upper = vec![inv_dx2 - c * inv_2dx; m];
        let mut diag: Vec<f64> = (0..m)
            .map(|j| -2.0 * inv_dx2 + b * reaction.df(v[j + 1]))
            .collect();
        lower[0] = 0.0;
        upper[m - 1] = 0.0;
        let g: Vec<f64> = (0..m).map(|j| -(v[j + 2] - v[j]) * inv_2dx).collect();
        // Column jm of T: entries at rows jm-1 (upper), jm (diag), jm+1 (lower).
        let mut col = vec![0.0; m];
        col[jm] = 1.0;
        upper[jm - 1] = 0.0;
        lower[jm + 1] = 0.0;
        diag[jm] = 1.0;
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let y = tridiag::solve(&lower, &diag, &upper, &rhs);
        let corr: Vec<f64> = g.iter().zip(&col).map(|(gi, ci)| gi - ci).collect();
        let zz = tridiag::solve(&lower, &diag, &upper, &corr);
        let denom = 1.0 + zz[jm];
        let scale = y[jm] / denom;
        let delta: Vec<f64> = y.iter().zip(&zz).map(|(yi, zi)| yi - zi * scale).collect();

        // Damped update: halve until the residual decreases.
        let mut step = 1.0;
        loop {
            let mut trial = v.clone();
            for j in 0..m {
                if j != jm {
                    trial[j + 1] += step * delta[j];
                }
            }
            let trial_c = c + step * delta[jm];
            let tr = residual(&trial, trial_c);
            let tn = max_abs(&tr);
            if tn < norm || step < 1e-6 {
                v = trial;
                c = trial_c;
                r = tr;
                norm = tn;
                break;
            }
            step *= 0.5;
        }
        if !norm.is_finite() {
            return Err(Error::NoConvergence {
                iterations,
                residual: norm,
            });
        }
    }

    let mut p = WaveProfile::empty(grid.clone(), reaction.clone(), nu, b, c, None);
    p.vhat = v;
    // v̂_x by central differences (one-sided second order at the ends); the
    // higher derivatives follow from differentiating the wave equation itself.
    for i in 0..n {
        p.vhat_x[i] = if i == 0 {
            (-3.0 * p.vhat[0] + 4.0 * p.vhat[1] - p.vhat[2]) * inv_2dx
        } else if i == n - 1 {
            (3.0 * p.vhat[n - 1] - 4.0 * p.vhat[n - 2] + p.vhat[n - 3]) * inv_2dx
        } else {
            (p.vhat[i + 1] - p.vhat[i - 1]) * inv_2dx
        };
    }
    for i in 0..n {
        let (v0, v1) = (p.vhat[i], p.vhat_x[i]);
        let f0 = reaction.f(v0);
        let f1 = reaction.df(v0);
        let f2 = reaction.d2f(v0);
        let v2 = (c * v1 - b * f0) / nu;
        let v3 = (c * v2 - b * f1 * v1) / nu;
        let v4 = (c * v3 - b * (f2 * v1 * v1 + f1 * v2)) / nu;
        p.vhat_xx[i] = v2;
        p.vhat_xxx[i] = v3;
        p.vhat_xxxx[i] = v4;
    }
    p.finish()?;
    Ok(p)
}

impl WaveProfile {
    fn empty(
        grid: SpatialGrid,
        reaction: ReactionFunction,
        nu: f64,
        b: f64,
        c: f64,
        closed_form: Option<f64>,
    ) -> Self {
        let n = grid.len();
        Self {
            grid,
            reaction,
            nu,
            b,
            c,
            vhat: vec![0.0; n],
            vhat_x: vec![0.0; n],
            vhat_xx: vec![0.0; n],
            vhat_xxx: vec![0.0; n],
            vhat_xxxx: vec![0.0; n],
            psi: vec![0.0; n],
            rho: vec![0.0; n],
            z: f64::NAN,
            gamma_minus: f64::NAN,
            gamma_plus: f64::NAN,
            closed_form,
        }
    }

    fn finish(&mut self) -> Result<()> {
        let (gm, gp) = decay_rates(self.c, self.nu, self.b, &self.reaction);
        self.gamma_minus = gm;
        self.gamma_plus = gp;
        self.adjoint_eigenfunction()
    }

    /// Fills `ρ = Z e^{-(c/ν)x}` and `Ψ = ρ v̂_x` with `⟨Ψ, v̂_x⟩ = 1` under the trapezoid rule.
    pub fn adjoint_eigenfunction(&mut self) -> Result<()> {
        let slope = self.c / self.nu;
        let integrand: Vec<f64> = self
            .grid
            .x()
            .iter()
            .zip(&self.vhat_x)
            .map(|(&x, &d)| (-slope * x).exp() * d * d)
            .collect();
        let integral = self.grid.integrate(&integrand);
        if !(integral.is_finite() && integral > 0.0) {
            return Err(Error::DomainTooSmall(format!(
                "∫e^(-(c/ν)x) v̂_x² dx = {integral} on [-{L}, {L}]",
                L = self.grid.half_width()
            )));
        }
        self.z = 1.0 / integral;
        for (i, &x) in self.grid.x().iter().enumerate() {
            self.rho[i] = self.z * (-slope * x).exp();
            self.psi[i] = self.rho[i] * self.vhat_x[i];
        }
        if !self.rho.iter().chain(&self.psi).all(|v| v.is_finite()) {
            return Err(Error::DomainTooSmall("ρ overflows on the grid".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }
    pub fn reaction(&self) -> &ReactionFunction {
        &self.reaction
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn vhat(&self) -> &[f64] {
        &self.vhat
    }
    pub fn vhat_x(&self) -> &[f64] {
        &self.vhat_x
    }
    pub fn vhat_xx(&self) -> &[f64] {
        &self.vhat_xx
    }
    pub fn vhat_xxx(&self) -> &[f64] {
        &self.vhat_xxx
    }
    pub fn vhat_xxxx(&self) -> &[f64] {
        &self.vhat_xxxx
    }
    pub fn psi(&self) -> &[f64] {
        &self.psi
    }
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }
    pub fn z(&self) -> f64 {
        self.z
    }
    pub fn gamma_minus(&self) -> f64 {
        self.gamma_minus
    }
    pub fn gamma_plus(&self) -> f64 {
        self.gamma_plus
    }
    pub fn is_closed_form(&self) -> bool {
        self.closed_form.is_some()
    }

    /// Largest shift for which evaluations are trusted.
    pub fn shift_limit(&self) -> f64 {
        0.5 * self.grid.half_width()
    }

    pub fn summary(&self) -> ProfileSummary {
        ProfileSummary {
            c: self.c,
            nu: self.nu,
            b: self.b,
            a: self.reaction.a(),
            z: self.z,
            gamma_minus: self.gamma_minus,
            gamma_plus: self.gamma_plus,
            closed_form: self.is_closed_form(),
            rho_constant: self.c == 0.0,
        }
    }

    /// Weight `ρ(x)` at an arbitrary point.
    #[inline]
    pub fn rho_at(&self, x: f64) -> f64 {
        self.z * (-self.c / self.nu * x).exp()
    }

    /// `ρ_t(x) = ρ(x + s)` sampled on the grid.
    pub fn rho_shifted(&self, s: f64) -> Vec<f64> {
        let factor = (-self.c / self.nu * s).exp();
        self.rho.iter().map(|r| r * factor).collect()
    }

    fn closed(&self, field: ProfileField, x: f64) -> f64 {
        let k = self.closed_form.expect("closed-form profile");
        let (s, p, q) = logistic_parts(k * x);
        match field {
            ProfileField::Vhat => s,
            ProfileField::VhatX => k * p,
            ProfileField::VhatXX => k * k * p * q,
            ProfileField::VhatXXX => k * k * k * p * (1.0 - 6.0 * p),
            ProfileField::Psi => self.rho_at(x) * k * p,
            ProfileField::PsiX => self.rho_at(x) * (k * k * p * q - self.c / self.nu * k * p),
        }
    }

    fn interpolated(&self, field: ProfileField, x: f64) -> f64 {
        let (vals, ders) = match field {
            ProfileField::Vhat => (&self.vhat, &self.vhat_x),
            ProfileField::VhatX => (&self.vhat_x, &self.vhat_xx),
            ProfileField::VhatXX => (&self.vhat_xx, &self.vhat_xxx),
            ProfileField::VhatXXX => (&self.vhat_xxx, &self.vhat_xxxx),
            ProfileField::Psi => {
                return self.rho_at(x) * self.interpolated(ProfileField::VhatX, x)
            }
            ProfileField::PsiX => {
                let d1 = self.interpolated(ProfileField::VhatX, x);
                let d2 = self.interpolated(ProfileField::VhatXX, x);
                return self.rho_at(x) * (d2 - self.c / self.nu * d1);
            }
        };
        let n = self.grid.len();
        let l = self.grid.half_width();
        let h = self.grid.dx();
        if x <= -l {
            // v̂ ~ A e^{λx} with λ = c/ν - γ₋ > 0 as x → -∞.
            let lam = self.c / self.nu - self.gamma_minus;
            return vals[0] * (lam * (x + l)).exp();
        }
        if x >= l {
            // 1 - v̂ ~ B e^{μx} with μ = c/ν - γ₊ < 0 as x → +∞.
            let mu = self.c / self.nu - self.gamma_plus;
            let decay = (mu * (x - l)).exp();
            return match field {
                ProfileField::Vhat => 1.0 - (1.0 - vals[n - 1]) * decay,
                _ => vals[n - 1] * decay,
            };
        }
        let pos = (x + l) / h;
        let i = (pos.floor() as usize).min(n - 2);
        let t = pos - i as f64;
        hermite(h, t, vals[i], vals[i + 1], ders[i], ders[i + 1])
    }

    /// Evaluates a profile function at an arbitrary point.
    pub fn eval(&self, field: ProfileField, x: f64) -> f64 {
        if self.closed_form.is_some() {
            self.closed(field, x)
        } else {
            self.interpolated(field, x)
        }
    }

    fn samples(&self, field: ProfileField) -> &[f64] {
        match field {
            ProfileField::Vhat => &self.vhat,
            ProfileField::VhatX => &self.vhat_x,
            ProfileField::VhatXX => &self.vhat_xx,
            ProfileField::VhatXXX => &self.vhat_xxx,
            ProfileField::Psi => &self.psi,
            ProfileField::PsiX => unreachable!(),
        }
    }

    /// Samples `field(x + gamma)` on the grid into `out`.
    pub fn shifted_into(&self, field: ProfileField, gamma: f64, out: &mut [f64]) -> Result<()> {
        self.grid.check_len(out)?;
        let limit = self.shift_limit();
        if !(gamma.abs() <= limit) {
            return Err(Error::OutOfWindow {
                shift: gamma,
                limit,
            });
        }
        if gamma == 0.0 && field != ProfileField::PsiX {
            out.copy_from_slice(self.samples(field));
            return Ok(());
        }
        for (o, &x) in out.iter_mut().zip(self.grid.x()) {
            *o = self.eval(field, x + gamma);
        }
        Ok(())
    }

    pub fn shifted(&self, field: ProfileField, gamma: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.grid.len()];
        self.shifted_into(field, gamma, &mut out)?;
        Ok(out)
    }

    /// Samples `v̂, v̂_x, v̂_xx, Ψ, Ψ_x` at `x + gamma` in one pass.
    pub fn frame_into(&self, gamma: f64, frame: &mut Frame) -> Result<()> {
        let limit = self.shift_limit();
        if !(gamma.abs() <= limit) {
            return Err(Error::OutOfWindow {
                shift: gamma,
                limit,
            });
        }
        self.grid.check_len(&frame.v)?;
        frame.shift = gamma;
        let slope = self.c / self.nu;
        let scale = (-slope * gamma).exp();
        match self.closed_form {
            Some(k) => {
                for (i, &x) in self.grid.x().iter().enumerate() {
                    let (s, p, q) = logistic_parts(k * (x + gamma));
                    let rho = self.rho[i] * scale;
                    let vx = k * p;
                    let vxx = k * k * p * q;
                    frame.v[i] = s;
                    frame.vx[i] = vx;
                    frame.vxx[i] = vxx;
                    frame.rho[i] = rho;
                    frame.psi[i] = rho * vx;
                    frame.psi_x[i] = rho * (vxx - slope * vx);
                }
            }
            None => {
                for (i, &x) in self.grid.x().iter().enumerate() {
                    let y = x + gamma;
                    let rho = self.rho[i] * scale;
                    let vx = self.interpolated(ProfileField::VhatX, y);
                    let vxx = self.interpolated(ProfileField::VhatXX, y);
                    frame.v[i] = self.interpolated(ProfileField::Vhat, y);
                    frame.vx[i] = vx;
                    frame.vxx[i] = vxx;
                    frame.rho[i] = rho;
                    frame.psi[i] = rho * vx;
                    frame.psi_x[i] = rho * (vxx - slope * vx);
                }
            }
        }
        Ok(())
    }

    pub fn frame(&self, gamma: f64) -> Result<Frame> {
        let mut f = Frame::new(self.grid.len());
        self.frame_into(gamma, &mut f)?;
        Ok(f)
    }

    /// `v̂(x+γ₁) - v̂(x+γ₂)` on the grid.
    pub fn shift_difference_into(&self, g1: f64, g2: f64, out: &mut [f64]) -> Result<()> {
        let limit = self.shift_limit();
        for g in [g1, g2] {
            if !(g.abs() <= limit) {
                return Err(Error::OutOfWindow { shift: g, limit });
            }
        }
        self.grid.check_len(out)?;
        for (o, &x) in out.iter_mut().zip(self.grid.x()) {
            *o = self.eval(ProfileField::Vhat, x + g1) - self.eval(ProfileField::Vhat, x + g2);
        }
        Ok(())
    }

    /// Writes `x, vhat, vhat_x, Psi, rho` as CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "x,vhat,vhat_x,Psi,rho")?;
        for i in 0..self.grid.len() {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.grid.x()[i],
                self.vhat[i],
                self.vhat_x[i],
                self.psi[i],
                self.rho[i]
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Profile quantities sampled at `x + shift`; `rho` holds `ρ(x + shift)`.
#[derive(Debug, Clone)]
pub struct Frame {
    pub shift: f64,
    pub v: Vec<f64>,
    pub vx: Vec<f64>,
    pub vxx: Vec<f64>,
    pub rho: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi_x: Vec<f64>,
}

impl Frame {
    pub fn new(n: usize) -> Self {
        Self {
            shift: 0.0,
            v: vec![0.0; n],
            vx: vec![0.0; n],
            vxx: vec![0.0; n],
            rho: vec![0.0; n],
            psi: vec![0.0; n],
            psi_x: vec![0.0; n],
        }
    }
}

/// Position where `v` crosses `level` (linear interpolation, first crossing from the left).
pub fn level_crossing(grid: &SpatialGrid, v: &[f64], level: f64) -> Option<f64> {
    v.windows(2).enumerate().find_map(|(i, w)| {
        if (w[0] - level) * (w[1] - level) <= 0.0 && w[0] != w[1] {
            let t = (level - w[0]) / (w[1] - w[0]);
            Some(grid.x()[i] + t * grid.dx())
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_grid() -> SpatialGrid {
        SpatialGrid::new(40.0, 1601).unwrap()
    }

    #[test]
    fn nagumo_closed_form_values() {
        let p = nagumo_profile(1.0, 2.0, 0.25, &default_grid()).unwrap();
        assert!((p.c() - 0.5).abs() < 1e-15);
        assert_eq!(p.eval(ProfileField::Vhat, 0.0), 0.5);
        assert!((p.eval(ProfileField::VhatX, 0.0) - 0.25).abs() < 1e-15);
        let k: f64 = 1.0;
        let expected = 1.0 / (1.0 + (-k).exp());
        let s = p.shifted(ProfileField::Vhat, 1.0).unwrap();
        assert!((s[p.grid().mid()] - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_coefficients() {
        let g = default_grid();
        assert!(nagumo_profile(0.0, 2.0, 0.25, &g).is_err());
        assert!(nagumo_profile(1.0, -1.0, 0.25, &g).is_err());
    }

    #[test]
    fn profile_invariants() {
        let p = nagumo_profile(1.0, 2.0, 0.25, &default_grid()).unwrap();
        let n = p.grid().len();
        assert!(p.vhat()[0].abs() <= 1e-6);
        assert!((p.vhat()[n - 1] - 1.0).abs() <= 1e-6);
        assert!(p.vhat().windows(2).all(|w| w[1] >= w[0]));
        let pairing: Vec<f64> = p.psi().iter().zip(p.vhat_x()).map(|(a, b)| a * b).collect();
        assert!((p.grid().integrate(&pairing) - 1.0).abs() <= 1e-8);
        assert!(p.rho().windows(2).all(|w| w[1] < w[0]));
        assert!(p.psi().iter().all(|&v| v > 0.0));
        // ρ(x-ξ) <= e^{M|ξ|} ρ(x), M = c/ν.
        let m = p.c() / p.nu();
        for xi in [-3.0, -0.5, 0.7, 4.0] {
            for &x in p.grid().x().iter().step_by(97) {
                assert!(p.rho_at(x - xi) <= (m * f64::abs(xi)).exp() * p.rho_at(x) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn zero_speed_has_constant_weight() {
        let p = nagumo_profile(1.0, 2.0, 0.5, &default_grid()).unwrap();
        assert_eq!(p.c(), 0.0);
        assert!(p.rho().iter().all(|&r| r == p.z()));
        let norm2: Vec<f64> = p.vhat_x().iter().map(|v| v * v).collect();
        let nrm = p.grid().integrate(&norm2);
        for i in (0..p.grid().len()).step_by(50) {
            assert!((p.psi()[i] - p.vhat_x()[i] / nrm).abs() < 1e-14);
        }
    }

    #[test]
    fn normaliser_matches_independent_quadrature() {
        // Oracle: composite Simpson on a much finer grid of the closed-form integrand.
        let p = nagumo_profile(1.0, 2.0, 0.25, &default_grid()).unwrap();
        let n = 64_000;
        let h = 80.0 / n as f64;
        let g = |x: f64| {
            let e = (-x).exp();
            let vx = e / ((1.0 + e) * (1.0 + e));
            (-0.5 * x).exp() * vx * vx
        };
        let mut s = g(-40.0) + g(40.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(-40.0 + i as f64 * h);
        }
        let z_oracle = 1.0 / (s * h / 3.0);
        assert!((p.z() - z_oracle).abs() / z_oracle < 1e-9, "{} vs {}", p.z(), z_oracle);
    }

    #[test]
    fn decay_rate_values() {
        let f = ReactionFunction::nagumo(0.25).unwrap();
        let (gm, gp) = decay_rates(0.5, 1.0, 2.0, &f);
        assert!((gm + 0.5).abs() < 1e-14);
        assert!((gp - 1.5).abs() < 1e-14);
    }

    #[test]
    fn decay_rate_matches_tail_quotient() {
        let p = nagumo_profile(1.0, 2.0, 0.25, &default_grid()).unwrap();
        let f = p.reaction();
        let (il, ir) = (p.grid().mid() - 400, p.grid().mid() + 400);
        let q_left = p.b() / p.nu() * f.f(p.vhat()[il]) / p.vhat_x()[il];
        assert!((q_left - p.gamma_minus()).abs() < 1e-3, "{q_left}");
        let q_right = p.b() / p.nu() * f.f(p.vhat()[ir]) / p.vhat_x()[ir];
        assert!((q_right - p.gamma_plus()).abs() < 1e-3, "{q_right}");
    }

    #[test]
    fn decay_rates_have_opposite_signs() {
        for a in [0.05, 0.2, 0.35, 0.5] {
            for (nu, b) in [(1.0, 2.0), (0.3, 5.0), (2.0, 0.5)] {
                let p = nagumo_profile(nu, b, a, &default_grid()).unwrap();
                assert!(p.gamma_minus() < 0.0 && p.gamma_plus() > 0.0);
            }
        }
    }

    #[test]
    fn bvp_matches_closed_form() {
        let g = default_grid();
        let f = ReactionFunction::nagumo(0.25).unwrap();
        let bvp = solve_profile_bvp(&f, 1.0, 2.0, &g, BvpOptions::default()).unwrap();
        let exact = nagumo_profile(1.0, 2.0, 0.25, &g).unwrap();
        assert!((bvp.c() - 0.5).abs() < 1e-4, "c = {}", bvp.c());
        // Re-align: the BVP pins v̂(0) = a, the closed form crosses a at -ln(3).
        let xa = level_crossing(&g, exact.vhat(), 0.25).unwrap();
        let shift = -(3.0f64).ln();
        assert!((xa - shift).abs() < 1e-3);
        let err = g
            .x()
            .iter()
            .zip(bvp.vhat())
            .map(|(&x, &v)| (v - exact.eval(ProfileField::Vhat, x + shift)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-4, "max error {err}");
    }

    #[test]
    fn bvp_symmetric_potential_has_zero_speed() {
        let g = default_grid();
        let f = ReactionFunction::nagumo(0.5).unwrap();
        let bvp = solve_profile_bvp(&f, 1.0, 2.0, &g, BvpOptions::default()).unwrap();
        assert!(bvp.c().abs() < 1e-6, "c = {}", bvp.c());
    }

    #[test]
    fn bvp_residual_is_tight() {
        let g = default_grid();
        let f = ReactionFunction::nagumo(0.3).unwrap();
        let p = solve_profile_bvp(&f, 1.0, 2.0, &g, BvpOptions::default()).unwrap();
        let dx = g.dx();
        let v = p.vhat();
        let res = (1..g.len() - 1)
            .map(|i| {
                ((v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dx * dx) + 2.0 * f.f(v[i])
                    - p.c() * (v[i + 1] - v[i - 1]) / (2.0 * dx))
                    .abs()
            })
            .fold(0.0, f64::max);
        assert!(res <= 1e-8, "{res}");
        assert!(!p.is_closed_form());
    }

    #[test]
    fn bvp_error_is_second_order() {
        let f = ReactionFunction::nagumo(0.25).unwrap();
        let shift = -(3.0f64).ln();
        let err = |g: &SpatialGrid| {
            let bvp = solve_profile_bvp(&f, 1.0, 2.0, g, BvpOptions::default()).unwrap();
            let exact = nagumo_profile(1.0, 2.0, 0.25, g).unwrap();
            g.x()
                .iter()
                .zip(bvp.vhat())
                .map(|(&x, &v)| (v - exact.eval(ProfileField::Vhat, x + shift)).abs())
                .fold(0.0, f64::max)
        };
        let coarse = SpatialGrid::new(40.0, 801).unwrap();
        let e1 = err(&coarse);
        let e2 = err(&coarse.refined());
        let ratio = e1 / e2;
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio} ({e1}, {e2})");
    }

    #[test]
    fn bvp_rejects_non_bistable() {
        let f = ReactionFunction::polynomial(vec![0.0, 1.0, -0.5], 0.5).unwrap();
        let g = SpatialGrid::new(20.0, 401).unwrap();
        assert!(solve_profile_bvp(&f, 1.0, 1.0, &g, BvpOptions::default()).is_err());
    }

    #[test]
    fn shift_identity_and_window() {
        let p = nagumo_profile(1.0, 2.0, 0.25, &default_grid()).unwrap();
        assert_eq!(p.shifted(ProfileField::Psi, 0.0).unwrap(), p.psi());
        assert!(matches!(
            p.shifted(ProfileField::Vhat, 20.5),
            Err(Error::OutOfWindow { .. })
        ));
        assert!(p.shifted(ProfileField::Vhat, -20.0).is_ok());
    }

    #[test]
    fn interpolated_shift_matches_closed_form() {
        let g = default_grid();
        let exact = nagumo_profile(1.0, 2.0, 0.25, &g).unwrap();
        let mut interp = exact.clone();
        interp.closed_form = None;
        for field in [ProfileField::Vhat, ProfileField::VhatX, ProfileField::Psi] {
            let a = exact.shifted(field, 0.37).unwrap();
            let b = interp.shifted(field, 0.37).unwrap();
            let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-6, "{field:?}: {err}");
        }
    }

    #[test]
    fn frame_matches_field_evaluations() {
        let g = SpatialGrid::new(20.0, 401).unwrap();
        let exact = nagumo_profile(1.0, 2.0, 0.3, &g).unwrap();
        let mut interp = exact.clone();
        interp.closed_form = None;
        for p in [&exact, &interp] {
            let f = p.frame(-1.3).unwrap();
            let psi = p.shifted(ProfileField::Psi, -1.3).unwrap();
            let psi_x = p.shifted(ProfileField::PsiX, -1.3).unwrap();
            let vxx = p.shifted(ProfileField::VhatXX, -1.3).unwrap();
            for i in 0..g.len() {
                assert!((f.psi[i] - psi[i]).abs() <= 1e-12 * (1.0 + psi[i].abs()));
                assert!((f.psi_x[i] - psi_x[i]).abs() <= 1e-12 * (1.0 + psi_x[i].abs()));
                assert!((f.vxx[i] - vxx[i]).abs() <= 1e-12);
                assert!((f.rho[i] - p.rho_at(g.x()[i] - 1.3)).abs() <= 1e-12 * f.rho[i]);
            }
        }
    }
}
