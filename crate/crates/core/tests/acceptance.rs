//! Acceptance suite: every criterion at its stated tolerance and runtime budget.
//!
//! Criteria run sequentially in one test so that the runtime measurements are
//! not distorted by the harness running tests in parallel. Each criterion
//! prints one `PASS`/`FAIL` line directly to stderr (not captured).

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use wavefront::config::ExperimentConfig;
use wavefront::verify::{verify, Claim, Verdict};

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"));
    ExperimentConfig::load(&path).unwrap()
}

fn report(line: &str) {
    let mut e = std::io::stderr().lock();
    writeln!(e, "{line}").unwrap();
}

struct Ledger {
    failures: Vec<String>,
}

impl Ledger {
    fn record(&mut self, id: usize, title: &str, ok: bool, detail: String) {
        let tag = if ok { "PASS" } else { "FAIL" };
        report(&format!("[{tag}] criterion {id:>2}: {title} — {detail}"));
        if !ok {
            self.failures.push(format!("criterion {id}: {title}"));
        }
    }
}

fn check<'a>(v: &'a Verdict, name: &str) -> &'a wavefront::verify::Check {
    v.checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("no check {name}"))
}

fn timed(cfg: &ExperimentConfig, claim: Claim) -> (Verdict, Duration) {
    let t0 = Instant::now();
    let v = verify(cfg, claim).unwrap_or_else(|e| panic!("{claim}: {e}"));
    (v, t0.elapsed())
}

fn within_budget(elapsed: Duration, secs: u64) -> (bool, String) {
    (elapsed <= Duration::from_secs(secs), format!("{:.1}s of {secs}s", elapsed.as_secs_f64()))
}

#[test]
fn acceptance_criteria() {
    let mut ledger = Ledger { failures: vec![] };

    // 1. Deterministic wave speed.
    {
        let cfg = config("speed");
        assert_eq!((cfg.model.nu, cfg.model.b, cfg.model.a), (1.0, 2.0, 0.25));
        assert_eq!((cfg.run.epsilon, cfg.run.dt, cfg.run.t_final), (0.0, 1e-3, 10.0));
        assert_eq!(cfg.half_width().unwrap(), 40.0);
        assert!((cfg.grid_spec().unwrap().dx() - 0.05).abs() < 1e-12);
        let (v, dt) = timed(&cfg, Claim::Speed);
        let (fast, budget) = within_budget(dt, 10);
        let c = check(&v, "relative_speed_error");
        let speed = v.details["measured_speed"].as_f64().unwrap();
        ledger.record(1, "deterministic wave speed", v.passed() && fast,
            format!("speed {speed:.5} vs c = 0.5, relative error {:.2e} ≤ 1e-2; {budget}", c.measured));
    }

    // 2. Kernel residuals at second order.
    {
        let (v, dt) = timed(&config("kernel"), Claim::Kernel);
        let (fast, budget) = within_budget(dt, 5);
        ledger.record(2, "kernel residuals", v.passed() && fast, format!(
            "dx-halving ratios {:.3} (𝓛v̂_x) and {:.3} (adjoint Ψ) in [3.2, 4.8]; {budget}",
            check(&v, "kernel_ratio").measured, check(&v, "adjoint_ratio").measured));
    }

    // 3. Spectral gap and contraction.
    {
        let cfg = config("contraction");
        assert_eq!(cfg.run.t_final, 10.0);
        let (v, dt) = timed(&cfg, Claim::Contraction);
        let (fast, budget) = within_budget(dt, 30);
        ledger.record(3, "spectral gap / contraction", v.passed() && fast, format!(
            "κ̂ = {:.4} > 0, worst ‖u(t)‖_ρ/(e^(−κ̂t)‖u(0)‖_ρ) = {:.4} ≤ 1.05 over 10 states, certificate violations {}; {budget}",
            check(&v, "kappa_hat").measured, check(&v, "worst_decay_ratio").measured,
            check(&v, "certificate_violations").measured));
    }

    // 4 and 6. Residual scaling and the limit decomposition, from one sweep.
    {
        let cfg = config("scaling");
        assert_eq!(cfg.sweep.epsilons, vec![0.02, 0.01, 0.005, 0.0025]);
        assert_eq!((cfg.run.q_exp, cfg.run.m, cfg.run.t_final, cfg.sweep.n_paths), (0.1, 100.0, 5.0, 32));
        assert_eq!(cfg.sweep.m_values, vec![1000.0]);
        let (v, dt) = timed(&cfg, Claim::Scaling);
        let (fast, budget) = within_budget(dt, 15 * 60);
        let slope = check(&v, "median_slope");
        let inc = check(&v, "stop_fraction_increase");
        let last = check(&v, "stop_fraction_smallest_eps");
        let fractions = &v.details["report"]["finite_m"][0]["stop_fractions"];
        ledger.record(4, "multiscale residual scaling", slope.passed && inc.passed && last.passed && fast, format!(
            "median slope {:.3} ≥ 1.6, stop fractions {fractions} (non-increasing, last {:.3} ≤ 0.05); {budget}",
            slope.measured, last.measured));
        let gap = check(&v, "limit_slope_gap");
        let imm = v.details["report"]["immediate"]["median_slope"].as_f64().unwrap();
        let fin = v.details["report"]["finite_m"][1]["median_slope"].as_f64().unwrap();
        ledger.record(6, "limit decomposition", gap.passed, format!(
            "immediate slope {imm:.3} vs m=1000 slope {fin:.3}, gap {:.4} ≤ 0.1 (shared sweep)", gap.measured));
    }

    // 5. Immediate-relaxation convergence.
    {
        let cfg = config("relaxation");
        let mut ms = vec![cfg.run.m];
        ms.extend(&cfg.sweep.m_values);
        assert_eq!(ms, vec![1.0, 10.0, 100.0, 1000.0]);
        assert_eq!(cfg.run.delta, 0.5);
        let (v, dt) = timed(&cfg, Claim::Relaxation);
        let (fast, budget) = within_budget(dt, 120);
        ledger.record(5, "immediate-relaxation convergence", v.passed() && fast, format!(
            "sup|C₀^m − C₀| = {} for m = 1, 10, 100, 1000 (strictly decreasing), m=1000 gap / sup|C₀| = {:.4} ≤ 0.05; {budget}",
            v.details["sup_gap"], check(&v, "largest_m_gap_over_sup_c0").measured));
    }

    // 7. Variance law.
    {
        let cfg = config("variance");
        assert_eq!((cfg.model.a, cfg.sweep.n_paths, cfg.run.t_final), (0.5, 500, 5.0));
        let (v, dt) = timed(&cfg, Claim::Variance);
        let (fast, budget) = within_budget(dt, 300);
        let r = &v.details["report"];
        ledger.record(7, "variance law", v.passed() && fast, format!(
            "slope {:.6e} ± {:.2e} vs ⟨Ψ,QΨ⟩ = {:.6e}, |z| = {:.3} ≤ 3; {budget}",
            r["slope"].as_f64().unwrap(), r["slope_se"].as_f64().unwrap(),
            r["static_rate"].as_f64().unwrap(), check(&v, "slope_z_score").measured));
    }

    // 8. Second-moment bound.
    {
        let cfg = config("moment");
        assert_eq!((cfg.sweep.n_paths, cfg.run.t_final), (500, 10.0));
        let (v, dt) = timed(&cfg, Claim::Moment);
        let (fast, budget) = within_budget(dt, 600);
        let r = &v.details["report"];
        ledger.record(8, "second-moment bound", v.passed() && fast, format!(
            "max_t (E‖u₀^#‖²_ρ − 3SE − bound) = {:.4} ≤ 0, plateau {:.4e} vs ‖√Q‖²_HS/κ̂ = {:.4e}; {budget}",
            check(&v, "worst_excess_over_bound").measured, r["plateau_mean"].as_f64().unwrap(),
            r["hs_rho"].as_f64().unwrap() / r["kappa_hat"].as_f64().unwrap()));
    }

    // 9. Orthogonality.
    {
        let cfg = config("ortho");
        assert!(cfg.run.reproject_u0);
        let (v, dt) = timed(&cfg, Claim::Ortho);
        let (fast, budget) = within_budget(dt, 60);
        ledger.record(9, "orthogonality", v.passed() && fast, format!(
            "maintained max relative pairing {:.2e} ≤ 1e-8, unmaintained drift ratio under dt-halving {:.3} ∈ [1.6, 2.4]; {budget}",
            check(&v, "max_relative_pairing").measured, check(&v, "unmaintained_drift_ratio").measured));
    }

    // 10. Minimisation.
    {
        let cfg = config("minimise");
        assert_eq!(cfg.sweep.epsilons, vec![0.02, 0.01, 0.005]);
        assert_eq!(cfg.run.t_final, 2.5);
        let (v, dt) = timed(&cfg, Claim::Minimise);
        let (fast, budget) = within_budget(dt, 120);
        let firsts: Vec<String> = v.details["points"].as_array().unwrap().iter()
            .map(|p| format!("{:.2e}", p["first_over_eps2"].as_f64().unwrap().abs())).collect();
        ledger.record(10, "minimisation", v.passed() && fast, format!(
            "|∂_a|/ε² = {firsts:?} (decreasing), second-derivative error {:.2e} ≤ 0.1 at ε = 0.005, stopped paths {}; {budget}",
            check(&v, "second_derivative_relative_error").measured,
            check(&v, "paths_stopped_before_t").measured));
    }

    // 11. Determinism: reruns give byte-identical reports.
    {
        let mut identical = true;
        let mut names = vec![];
        for (name, claim) in [("relaxation", Claim::Relaxation), ("variance", Claim::Variance), ("ortho", Claim::Ortho), ("kernel", Claim::Kernel)] {
            let cfg = config(name);
            let a = serde_json::to_vec(&verify(&cfg, claim).unwrap()).unwrap();
            let b = serde_json::to_vec(&verify(&cfg, claim).unwrap()).unwrap();
            identical &= a == b;
            names.push(name);
        }
        ledger.record(11, "determinism", identical, format!("byte-identical verdicts on rerun for {names:?}"));
    }

    assert!(ledger.failures.is_empty(), "failed: {:?}", ledger.failures);
}
