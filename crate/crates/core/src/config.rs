//! Experiment configuration: a TOML file with sections `model`, `grid`, `noise`,
//! `run`, `sweep` and `outputs`.
//!
//! Every section except `grid` has defaults. Validation happens before any
//! numerics run and reports failures by dotted field path (`grid.L`, `noise.r`).
//! The configuration hash is the SHA-256 of the canonical JSON form of the
//! *effective* configuration, after command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::ModelParams;
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::noise::{build_noise, NoiseModel, PathSeed};
use crate::reaction::ReactionFunction;
use crate::wave_profile::{nagumo_profile, solve_profile_bvp, BvpOptions, WaveProfile};

/// Margin required between the travelled distance `|c|T` and the half-width.
pub const WINDOW_MARGIN: f64 = 20.0;

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelSection,
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub nu: f64,
    pub b: f64,
    /// Interior unstable zero; the Nagumo cubic unless `polynomial` is given.
    pub a: f64,
    /// Coefficients of a custom polynomial `f` in increasing degree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polynomial: Option<Vec<f64>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { nu: 1.0, b: 2.0, a: 0.25, polynomial: None }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L")]
    pub half_width: Option<f64>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(rename = "K")]
    pub modes: usize,
    pub sigma: f64,
    pub r: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { modes: 64, sigma: 0.1, r: 2.0 }
    }
}

/// Initial perturbation `η` (the initial condition is `u⁰ = εη`).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaSpec {
    #[default]
    Zero,
    /// `amplitude · exp(−(x − center)² / (2 width²))`.
    Gaussian { amplitude: f64, center: f64, width: f64 },
    /// `amplitude · v̂_x`.
    Kernel { amplitude: f64 },
    /// `amplitude · exp(−(x − center)² / (2 width²))`, scaled so `‖η‖_ρ = norm`.
    NormalisedGaussian { norm: f64, center: f64, width: f64 },
}

impl EtaSpec {
    pub fn sample(&self, profile: &WaveProfile) -> Vec<f64> {
        let g = profile.grid();
        let gauss = |x: f64, c: f64, w: f64| (-(x - c) * (x - c) / (2.0 * w * w)).exp();
        let mut eta: Vec<f64> = match *self {
            EtaSpec::Zero => vec![0.0; g.len()],
            EtaSpec::Gaussian { amplitude, center, width } => {
                g.x().iter().map(|&x| amplitude * gauss(x, center, width)).collect()
            }
            EtaSpec::Kernel { amplitude } => profile.vhat_x().iter().map(|v| amplitude * v).collect(),
            EtaSpec::NormalisedGaussian { norm, center, width } => {
                let raw: Vec<f64> = g.x().iter().map(|&x| gauss(x, center, width)).collect();
                let w: Vec<f64> = raw.iter().zip(profile.rho()).map(|(e, r)| e * e * r).collect();
                let scale = norm / g.integrate(&w).sqrt();
                raw.iter().map(|e| e * scale).collect()
            }
        };
        let n = eta.len();
        eta[0] = 0.0;
        eta[n - 1] = 0.0;
        eta
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub epsilon: f64,
    pub m: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub q_exp: f64,
    pub eta: EtaSpec,
    pub reproject_u0: bool,
    pub noise_aggregate: usize,
    pub track_phase: bool,
    /// Start of the comparison window for `C₀^m` against `C₀`.
    pub delta: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            m: 100.0,
            t_final: 5.0,
            dt: 1e-3,
            q_exp: 0.1,
            eta: EtaSpec::Zero,
            reproject_u0: true,
            noise_aggregate: 1,
            track_phase: true,
            delta: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    /// Additional relaxation rates run alongside `run.m` on the same paths.
    pub m_values: Vec<f64>,
    pub n_paths: usize,
    pub master_seed: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.02, 0.01, 0.005, 0.0025],
            m_values: vec![],
            n_paths: 32,
            master_seed: 2024,
        }
    }
}

impl SweepSection {
    pub fn seeds(&self) -> Vec<PathSeed> {
        (0..self.n_paths as u64)
            .map(|i| PathSeed::new(self.master_seed, i))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Snapshots per run.
    pub cadence: usize,
    pub directory: String,
    /// Any of `csv`, `json`, `frames`.
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            cadence: 100,
            directory: "out".into(),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

/// Validated inputs shared by all commands.
pub struct Setup {
    pub profile: WaveProfile,
    pub noise: NoiseModel,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config("config", e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn half_width(&self) -> Result<f64> {
        let g = self.grid.as_ref().ok_or_else(|| Error::config("grid.L", "missing [grid] section"))?;
        g.half_width.ok_or_else(|| Error::config("grid.L", "missing"))
    }

    pub fn points(&self) -> Result<usize> {
        let g = self.grid.as_ref().ok_or_else(|| Error::config("grid.L", "missing [grid] section"))?;
        g.n.ok_or_else(|| Error::config("grid.n", "missing"))
    }

    pub fn reaction(&self) -> Result<ReactionFunction> {
        let m = &self.model;
        let r = match &m.polynomial {
            None => ReactionFunction::nagumo(m.a),
            Some(c) => ReactionFunction::polynomial(c.clone(), m.a),
        };
        r.map_err(|e| Error::config("model.a", e.to_string()))
    }

    /// Checks everything that does not need the profile.
    pub fn validate_static(&self) -> Result<()> {
        let l = self.half_width()?;
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::config("grid.L", "must be positive"));
        }
        let n = self.points()?;
        if n < 3 || n % 2 == 0 {
            return Err(Error::config("grid.n", "must be odd and at least 3"));
        }
        let m = &self.model;
        if !(m.nu > 0.0) {
            return Err(Error::config("model.nu", "must be positive"));
        }
        if !(m.b > 0.0) {
            return Err(Error::config("model.b", "must be positive"));
        }
        if !(m.a > 0.0 && m.a < 1.0) {
            return Err(Error::config("model.a", "must lie in (0, 1)"));
        }
        let nz = &self.noise;
        if !(nz.r >= 2.0) {
            return Err(Error::config("noise.r", "must be at least 2 for H¹-valued noise"));
        }
        if !(nz.sigma >= 0.0) {
            return Err(Error::config("noise.sigma", "must be non-negative"));
        }
        if nz.modes == 0 || nz.modes > n - 2 {
            return Err(Error::config("noise.K", format!("must lie in 1..={}", n - 2)));
        }
        let r = &self.run;
        if !(r.dt > 0.0 && r.dt.is_finite()) {
            return Err(Error::config("run.dt", "must be positive"));
        }
        if !(r.t_final > 0.0) {
            return Err(Error::config("run.T", "must be positive"));
        }
        let steps = r.t_final / r.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::config("run.T", "must be an integer multiple of run.dt"));
        }
        if !(r.epsilon >= 0.0) {
            return Err(Error::config("run.epsilon", "must be non-negative"));
        }
        if !(r.m > 0.0) || self.sweep.m_values.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::config("run.m", "relaxation rates must be positive"));
        }
        if !(0.0..=1.0).contains(&r.q_exp) {
            return Err(Error::config("run.q_exp", "must lie in [0, 1]"));
        }
        if r.noise_aggregate == 0 {
            return Err(Error::config("run.noise_aggregate", "must be at least 1"));
        }
        if !(r.delta >= 0.0 && r.delta < r.t_final) {
            return Err(Error::config("run.delta", "must lie in [0, T)"));
        }
        if self.sweep.epsilons.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::config("sweep.epsilons", "must be positive"));
        }
        if self.outputs.cadence == 0 {
            return Err(Error::config("outputs.cadence", "must be positive"));
        }
        for f in &self.outputs.formats {
            if !matches!(f.as_str(), "csv" | "json" | "frames") {
                return Err(Error::config("outputs.formats", format!("unknown format `{f}`")));
            }
        }
        Ok(())
    }

    /// Wave speed the profile will have (closed form for Nagumo, BVP otherwise).
    fn check_window(&self, c: f64) -> Result<()> {
        let l = self.half_width()?;
        let need = c.abs() * self.run.t_final + WINDOW_MARGIN;
        if l < need - 1e-12 {
            return Err(Error::config(
                "grid.L",
                format!("must be at least |c|T + {WINDOW_MARGIN} = {need}"),
            ));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.half_width()?, self.points()?).map_err(|e| Error::config("grid.n", e.to_string()))
    }

    pub fn build_profile(&self) -> Result<WaveProfile> {
        self.validate_static()?;
        let g = self.grid_spec()?;
        let m = &self.model;
        let profile = match &m.polynomial {
            None => nagumo_profile(m.nu, m.b, m.a, &g)?,
            Some(_) => solve_profile_bvp(&self.reaction()?, m.nu, m.b, &g, BvpOptions::default())?,
        };
        self.check_window(profile.c())?;
        Ok(profile)
    }

    /// Validates and builds profile and noise.
    pub fn setup(&self) -> Result<Setup> {
        let profile = self.build_profile()?;
        let noise = build_noise(profile.grid(), self.noise.modes, self.noise.sigma, self.noise.r)
            .map_err(|e| Error::config("noise", e.to_string()))?;
        Ok(Setup { profile, noise })
    }

    /// Model parameters for `run` (with `sweep.m_values` as extra branches).
    pub fn model_params(&self, profile: &WaveProfile) -> Result<ModelParams> {
        let r = &self.run;
        let mut p = ModelParams::new(profile, r.epsilon, r.m, r.t_final, r.dt);
        p.q_exp = r.q_exp;
        p.eta = r.eta.sample(profile);
        p.extra_m = self.sweep.m_values.clone();
        p.noise_aggregate = r.noise_aggregate;
        p.reproject_u0 = r.reproject_u0;
        p.track_phase = r.track_phase;
        p.validate(profile)?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[grid]\nL = 40.0\nn = 1601\n";

    #[test]
    fn defaults_fill_missing_sections() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.model, ModelSection::default());
        assert_eq!(c.run.eta, EtaSpec::Zero);
        c.validate_static().unwrap();
    }

    #[test]
    fn missing_grid_names_the_field() {
        let c = ExperimentConfig::from_toml_str("[model]\nnu = 1.0\nb = 2.0\na = 0.25\n").unwrap();
        match c.validate_static() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "grid.L"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn window_margin_is_enforced() {
        let c = ExperimentConfig::from_toml_str("[grid]\nL = 20.0\nn = 401\n").unwrap();
        match c.build_profile() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "grid.L"),
            other => panic!("{:?}", other.err()),
        }
    }

    #[test]
    fn rough_noise_is_rejected() {
        let c = ExperimentConfig::from_toml_str(&format!("{MINIMAL}[noise]\nK = 8\nsigma = 1.0\nr = 1.5\n")).unwrap();
        assert!(matches!(c.validate_static(), Err(Error::Config { field, .. }) if field == "noise.r"));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.sweep.master_seed += 1;
        assert_ne!(a.hash(), b.hash());
        let round = ExperimentConfig::from_toml_str(&a.to_toml_string().unwrap()).unwrap();
        assert_eq!(round.hash(), a.hash());
    }

    #[test]
    fn eta_specs_sample_on_grid() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let p = c.build_profile().unwrap();
        let e = EtaSpec::NormalisedGaussian { norm: 0.5, center: 0.0, width: 2.0 }.sample(&p);
        let w: Vec<f64> = e.iter().zip(p.rho()).map(|(e, r)| e * e * r).collect();
        assert!((p.grid().integrate(&w).sqrt() - 0.5).abs() < 1e-12);
        let t: ExperimentConfig = ExperimentConfig::from_toml_str(&format!(
            "{MINIMAL}[run]\nepsilon = 0.01\nm = 10.0\nT = 1.0\ndt = 0.01\nq_exp = 0.1\neta = {{ kind = \"kernel\", amplitude = 2.0 }}\n"
        ))
        .unwrap();
        assert_eq!(t.run.eta, EtaSpec::Kernel { amplitude: 2.0 });
    }
}
