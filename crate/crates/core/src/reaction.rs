//! Bistable reaction term `f`, its derivatives, and sampled checks of the
//! structural conditions (A1), (A2), (B1)–(B4).

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Polynomial(Poly),
    Custom {
        f: ScalarFn,
        f1: ScalarFn,
        f2: ScalarFn,
        f3: ScalarFn,
    },
}

/// Coefficients (increasing degree) of a polynomial and its first three derivatives.
#[derive(Clone)]
struct Poly {
    c: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

impl Poly {
    fn new(c: Vec<f64>) -> Self {
        let d1 = derivative(&c);
        let d2 = derivative(&d1);
        let d3 = derivative(&d2);
        Self { c, d1, d2, d3 }
    }
}

/// Constants of the growth conditions (B1)–(B4).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReactionConstants {
    /// `sup f'` (B1).
    pub eta1: f64,
    /// Cubic-growth Lipschitz constant (B2).
    pub lipschitz: f64,
    /// Taylor-remainder constant (B3).
    pub eta2: f64,
    /// Derivative-growth constant (B4).
    pub eta3: f64,
    /// `true` when the constants are grid suprema rather than closed-form bounds.
    pub estimated: bool,
}

/// Bistable reaction function with zeros `0 < a < 1`.
#[derive(Clone)]
pub struct ReactionFunction {
    repr: Repr,
    a: f64,
    nagumo: bool,
    constants: ReactionConstants,
}

impl fmt::Debug for ReactionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            Repr::Polynomial(p) => format!("Polynomial({:?})", p.c),
            Repr::Custom { .. } => "Custom".to_string(),
        };
        f.debug_struct("ReactionFunction")
            .field("kind", &kind)
            .field("a", &self.a)
            .field("constants", &self.constants)
            .finish()
    }
}

fn horner(coeffs: &[f64], v: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * v + c)
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

fn check_a(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(Error::param("a", format!("must lie in (0,1), got {a}")))
    }
}

impl ReactionFunction {
    /// Nagumo cubic `f(v) = v(1-v)(v-a)`.
    pub fn nagumo(a: f64) -> Result<Self> {
        check_a(a)?;
        let coeffs = vec![0.0, -a, 1.0 + a, -1.0];
        // Closed-form bounds for the cubic; see the unit tests for the sampled check.
        let eta1 = (1.0 + a) * (1.0 + a) / 3.0 - a;
        let lipschitz = f64::max(2.0 + 0.5 * a, 1.0 + 2.0 * a);
        let eta2 = f64::max(1.0 + a, 2.0 - a);
        let slope = 2.0 * eta2;
        let max_abs_f1 = a.max(1.0 - a).max(eta1);
        let eta3 = (max_abs_f1 + 0.5 * slope).max(1.5 * slope);
        Ok(Self {
            repr: Repr::Polynomial(Poly::new(coeffs)),
            a,
            nagumo: true,
            constants: ReactionConstants {
                eta1,
                lipschitz,
                eta2,
                eta3,
                estimated: false,
            },
        })
    }

    /// Polynomial reaction term (coefficients in increasing degree) with interior zero `a`.
    pub fn polynomial(coeffs: Vec<f64>, a: f64) -> Result<Self> {
        check_a(a)?;
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::param("coeffs", "need finite polynomial coefficients"));
        }
        let mut r = Self {
            repr: Repr::Polynomial(Poly::new(coeffs)),
            a,
            nagumo: false,
            constants: ReactionConstants {
                eta1: f64::NAN,
                lipschitz: f64::NAN,
                eta2: f64::NAN,
                eta3: f64::NAN,
                estimated: true,
            },
        };
        r.constants = r.estimate_constants(&AssumptionGrid::default());
        Ok(r)
    }

    /// Arbitrary `f` with user-supplied derivatives.
    pub fn custom(f: ScalarFn, f1: ScalarFn, f2: ScalarFn, f3: ScalarFn, a: f64) -> Result<Self> {
        check_a(a)?;
        let mut r = Self {
            repr: Repr::Custom { f, f1, f2, f3 },
            a,
            nagumo: false,
            constants: ReactionConstants {
                eta1: f64::NAN,
                lipschitz: f64::NAN,
                eta2: f64::NAN,
                eta3: f64::NAN,
                estimated: true,
            },
        };
        r.constants = r.estimate_constants(&AssumptionGrid::default());
        Ok(r)
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn is_nagumo(&self) -> bool {
        self.nagumo
    }

    pub fn constants(&self) -> ReactionConstants {
        self.constants
    }

    #[inline]
    pub fn f(&self, v: f64) -> f64 {
        match &self.repr {
            Repr::Polynomial(p) => horner(&p.c, v),
            Repr::Custom { f, .. } => f(v),
        }
    }

    #[inline]
    pub fn df(&self, v: f64) -> f64 {
        match &self.repr {
            Repr::Polynomial(p) => horner(&p.d1, v),
            Repr::Custom { f1, .. } => f1(v),
        }
    }

    pub fn d2f(&self, v: f64) -> f64 {
        match &self.repr {
            Repr::Polynomial(p) => horner(&p.d2, v),
            Repr::Custom { f2, .. } => f2(v),
        }
    }

    pub fn d3f(&self, v: f64) -> f64 {
        match &self.repr {
            Repr::Polynomial(p) => horner(&p.d3, v),
            Repr::Custom { f3, .. } => f3(v),
        }
    }

    /// `f(v+u) - f(v)`, exact Taylor expansion for polynomials up to degree three
    /// (avoids cancellation when `|u| ≪ |f(v)|`).
    #[inline]
    pub fn increment(&self, v: f64, u: f64) -> f64 {
        match &self.repr {
            Repr::Polynomial(p) if p.c.len() <= 4 => {
                let d3 = p.d3.first().copied().unwrap_or(0.0);
                u * (horner(&p.d1, v) + u * (0.5 * horner(&p.d2, v) + u * d3 / 6.0))
            }
            _ => self.f(v + u) - self.f(v),
        }
    }

    /// `∫₀¹ f(v) dv` by composite Simpson on 2000 panels.
    pub fn potential_integral(&self) -> f64 {
        let n = 2000;
        let h = 1.0 / n as f64;
        let mut s = self.f(0.0) + self.f(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * self.f(i as f64 * h);
        }
        s * h / 3.0
    }

    fn estimate_constants(&self, grid: &AssumptionGrid) -> ReactionConstants {
        let us = grid.u_points();
        let vs = grid.v_points();
        let ws = grid.w_points();
        let eta1 = ws.iter().map(|&w| self.df(w)).fold(f64::NEG_INFINITY, f64::max);
        let mut lipschitz: f64 = 0.0;
        for (i, &x1) in ws.iter().enumerate() {
            for &x2 in &ws[i + 1..] {
                let r = (self.f(x1) - self.f(x2)).abs()
                    / ((x1 - x2).abs() * (1.0 + x1 * x1 + x2 * x2));
                lipschitz = lipschitz.max(r);
            }
        }
        let mut eta2: f64 = 0.0;
        let mut eta3: f64 = 0.0;
        for &v in &vs {
            for &u in &us {
                if u == 0.0 {
                    continue;
                }
                let rem = (self.f(u + v) - self.f(v) - self.df(v) * u).abs();
                eta2 = eta2.max(rem / ((1.0 + u.abs()) * u * u));
                eta3 = eta3
                    .max(self.df(u + v).abs() / (1.0 + u * u))
                    .max((self.df(u + v) - self.df(v)).abs() / (u.abs() + u * u));
            }
        }
        ReactionConstants {
            eta1,
            lipschitz,
            eta2,
            eta3,
            estimated: true,
        }
    }

    /// Sampled verification of (A1), (A2), (B1)–(B4). Violations are reported, never raised.
    pub fn check_assumptions(&self, grid: &AssumptionGrid) -> AssumptionReport {
        let a = self.a;
        let tol = 1e-12;
        let mut checks = Vec::new();

        let zeros = [0.0, a, 1.0];
        let worst_zero = zeros
            .iter()
            .map(|&v| (v, self.f(v).abs()))
            .fold((0.0, 0.0), |acc, p| if p.1 > acc.1 { p } else { acc });
        checks.push(AssumptionCheck::new(
            "A1.zeros",
            worst_zero.1 <= tol,
            worst_zero.1,
            (worst_zero.1 > tol).then_some((worst_zero.0, 0.0)),
        ));

        let mut sign_worst: Option<(f64, f64)> = None;
        let mut sign_value = f64::INFINITY;
        for &v in grid.v_points().iter().filter(|&&v| v > 0.0 && v < 1.0 && v != a) {
            // Signed margin: positive when the sign condition holds.
            let margin = if v < a { -self.f(v) } else { self.f(v) };
            if margin < sign_value {
                sign_value = margin;
                if margin <= 0.0 {
                    sign_worst = Some((v, 0.0));
                }
            }
        }
        checks.push(AssumptionCheck::new(
            "A1.sign",
            sign_worst.is_none(),
            sign_value,
            sign_worst,
        ));

        let d0 = self.df(0.0);
        let da = self.df(a);
        let d1 = self.df(1.0);
        let deriv_ok = d0 < 0.0 && da > 0.0 && d1 < 0.0;
        checks.push(AssumptionCheck::new(
            "A1.derivatives",
            deriv_ok,
            d0.max(-da).max(d1),
            (!deriv_ok).then_some((if d0 >= 0.0 { 0.0 } else if da <= 0.0 { a } else { 1.0 }, 0.0)),
        ));

        let integral = self.potential_integral();
        checks.push(AssumptionCheck::new(
            "A1.integral",
            integral >= -1e-12,
            integral,
            (integral < -1e-12).then_some((0.0, 1.0)),
        ));

        let c0 = self.d2f(0.0);
        let c1 = self.d2f(1.0);
        let convex_ok = c0 > 0.0 && c1 < 0.0;
        checks.push(AssumptionCheck::new(
            "A2",
            convex_ok,
            c0.min(-c1),
            (!convex_ok).then_some((if c0 <= 0.0 { 0.0 } else { 1.0 }, 0.0)),
        ));

        // B1: sup f' finite. On a finite sample we require the maximum to sit away
        // from the edges of the sampled range (f' eventually decreasing both ways).
        let ws = grid.w_points();
        let (imax, fmax) = ws
            .iter()
            .enumerate()
            .map(|(i, &w)| (i, self.df(w)))
            .fold((0, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
        let edge = ws.len() / 20;
        let interior = imax >= edge && imax + edge < ws.len();
        let b1_ok = interior && fmax <= self.constants.eta1 * (1.0 + 1e-12) + 1e-12;
        checks.push(AssumptionCheck::new(
            "B1",
            b1_ok,
            fmax,
            (!b1_ok).then_some((ws[imax], 0.0)),
        ));

        let lip = self.constants.lipschitz;
        let mut b2_ratio: f64 = 0.0;
        let mut b2_worst = None;
        for (i, &x1) in ws.iter().enumerate() {
            for &x2 in &ws[i + 1..] {
                let lhs = (self.f(x1) - self.f(x2)).abs();
                let rhs = lip * (x1 - x2).abs() * (1.0 + x1 * x1 + x2 * x2);
                let ratio = lhs / rhs;
                if ratio > b2_ratio {
                    b2_ratio = ratio;
                    if lhs > rhs * (1.0 + 1e-12) + 1e-14 {
                        b2_worst = Some((x1, x2));
                    }
                }
            }
        }
        checks.push(AssumptionCheck::new("B2", b2_worst.is_none(), b2_ratio, b2_worst));

        let (eta2, eta3) = (self.constants.eta2, self.constants.eta3);
        let mut b3 = (0.0f64, None);
        let mut b4 = (0.0f64, None);
        for &v in &grid.v_points() {
            for &u in &grid.u_points() {
                let rem = (self.f(u + v) - self.f(v) - self.df(v) * u).abs();
                let bound = eta2 * (1.0 + u.abs()) * u * u;
                if u != 0.0 {
                    let ratio = rem / bound;
                    if ratio > b3.0 {
                        b3.0 = ratio;
                    }
                }
                if rem > bound * (1.0 + 1e-12) + 1e-13 {
                    b3.1 = Some((u, v));
                }
                let g1 = self.df(u + v).abs();
                let g2 = (self.df(u + v) - self.df(v)).abs();
                let r1 = g1 / (eta3 * (1.0 + u * u));
                let r2 = if u != 0.0 { g2 / (eta3 * (u.abs() + u * u)) } else { 0.0 };
                b4.0 = b4.0.max(r1).max(r2);
                if g1 > eta3 * (1.0 + u * u) * (1.0 + 1e-12)
                    || g2 > eta3 * (u.abs() + u * u) * (1.0 + 1e-12) + 1e-13
                {
                    b4.1 = Some((u, v));
                }
            }
        }
        checks.push(AssumptionCheck::new("B3", b3.1.is_none(), b3.0, b3.1));
        checks.push(AssumptionCheck::new("B4", b4.1.is_none(), b4.0, b4.1));

        AssumptionReport {
            checks,
            constants: self.constants,
        }
    }
}

/// Sample points for the assumption checks: `u ∈ [u_min, u_max]`, `v ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionGrid {
    pub u_min: f64,
    pub u_max: f64,
    pub spacing: f64,
}

impl Default for AssumptionGrid {
    fn default() -> Self {
        Self {
            u_min: -3.0,
            u_max: 3.0,
            spacing: 1e-2,
        }
    }
}

impl AssumptionGrid {
    fn points(lo: f64, hi: f64, h: f64) -> Vec<f64> {
        let n = ((hi - lo) / h).round() as usize;
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    }

    pub fn u_points(&self) -> Vec<f64> {
        Self::points(self.u_min, self.u_max, self.spacing)
    }

    pub fn v_points(&self) -> Vec<f64> {
        Self::points(0.0, 1.0, self.spacing)
    }

    /// Range of `u + v` covered by the sample.
    pub fn w_points(&self) -> Vec<f64> {
        Self::points(self.u_min, self.u_max + 1.0, self.spacing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Measured value: margin, integral or worst ratio depending on the check.
    pub value: f64,
    /// Worst violating sample point `(u, v)` (or `(x1, x2)` for B2).
    pub worst: Option<(f64, f64)>,
}

impl AssumptionCheck {
    fn new(name: &'static str, passed: bool, value: f64, worst: Option<(f64, f64)>) -> Self {
        Self {
            name,
            passed,
            value,
            worst,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub constants: ReactionConstants,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// A1 and A2 together, the precondition of the profile solver.
    pub fn bistable(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| c.name.starts_with("A"))
            .all(|c| c.passed)
    }
}
