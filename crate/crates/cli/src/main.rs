use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use wavefront::analysis::scaling::scaling_study;
use wavefront::analysis::spectral::spectral_gap;
use wavefront::config::ExperimentConfig;
use wavefront::dynamics::{run_path, OutputSpec};
use wavefront::io;
use wavefront::noise::PathSeed;
use wavefront::operator::kernel_residuals;
use wavefront::verify::{verify, Claim, Status};
use wavefront::Error;

#[derive(Parser)]
#[command(name = "wavefront", version, about = "Stochastic travelling waves: simulation and claim verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, default_value = "configs/default.toml")]
    config: PathBuf,
    /// Overrides `sweep.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (defaults to `outputs.directory`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `sweep.n_paths`.
    #[arg(long)]
    paths: Option<usize>,
    /// Worker threads for Monte Carlo fan-out.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the travelling wave and write profile artifacts.
    Profile(Common),
    /// Run one path of the coupled system.
    Simulate(Common),
    /// Seed-coupled ε-sweep of the decomposition residuals.
    Sweep(Common),
    /// Check one claim and write a JSON verdict.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        claim: String,
    },
}

/// 0 pass · 1 claim failure or insufficient power · 2 configuration · 3 numerical failure.
const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG })
        }
    }
}

struct Context {
    cfg: ExperimentConfig,
    hash: String,
    out: PathBuf,
}

fn prepare(c: &Common) -> Result<Context, Error> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.sweep.master_seed = s;
    }
    if let Some(p) = c.paths {
        cfg.sweep.n_paths = p;
    }
    cfg.validate_static()?;
    if let Some(t) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config { field: "--threads".into(), reason: e.to_string() })?;
    }
    let hash = cfg.hash();
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.outputs.directory));
    io::claim_directory(&out, &hash)?;
    Ok(Context { cfg, hash, out })
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Profile(c) => profile(&prepare(&c)?),
        Command::Simulate(c) => simulate(&prepare(&c)?),
        Command::Sweep(c) => sweep(&prepare(&c)?),
        Command::Verify { common, claim } => {
            let claim: Claim = claim.parse()?;
            verify_claim(&prepare(&common)?, claim)
        }
    }
}

fn profile(ctx: &Context) -> Result<u8, Error> {
    let profile = ctx.cfg.build_profile()?;
    profile.write_csv(&ctx.out.join("profile.csv"))?;
    let (kernel, adjoint) = kernel_residuals(&profile)?;
    let gap = spectral_gap(&profile)?;
    let summary = profile.summary();
    let rho_constant = profile.c() == 0.0;
    io::write_json(
        &ctx.out.join("profile.json"),
        &json!({
            "config_hash": ctx.hash,
            "profile": summary,
            "kernel_residual": kernel,
            "adjoint_residual": adjoint,
            "kappa_hat": gap.kappa_hat,
            "c_star_hat": gap.c_star_hat,
            "rho_constant": rho_constant,
        }),
    )?;
    let mut text = format!(
        "c={}\nZ={}\ngamma_minus={}\ngamma_plus={}\nkernel_residual={kernel:e}\nadjoint_residual={adjoint:e}\nkappa_hat={}\n",
        profile.c(),
        profile.z(),
        profile.gamma_minus(),
        profile.gamma_plus(),
        gap.kappa_hat
    );
    if rho_constant {
        text.push_str("note=c is zero: rho is constant and weighted norms are scaled L2 norms\n");
    }
    text.push_str(&format!("config_hash={}\n", ctx.hash));
    std::fs::write(ctx.out.join("profile.txt"), &text)?;
    print!("{text}");
    Ok(0)
}

fn blow_up_step(e: &Error) -> Option<(&'static str, usize)> {
    match e {
        Error::BlowUp { field, step } => Some((field, *step)),
        Error::Path { source, .. } => blow_up_step(source),
        _ => None,
    }
}

fn simulate(ctx: &Context) -> Result<u8, Error> {
    let s = ctx.cfg.setup()?;
    let params = ctx.cfg.model_params(&s.profile)?;
    let seed = PathSeed::new(ctx.cfg.sweep.master_seed, 0);
    let frames = ctx.cfg.outputs.formats.iter().any(|f| f == "frames");
    let spec = OutputSpec::evenly(params.n_steps(), ctx.cfg.outputs.cadence, frames);
    let summary_path = ctx.out.join("summary.json");
    let traj = match run_path(&params, &s.profile, &s.noise, seed, spec) {
        Ok(t) => t,
        Err(e) => {
            let failure = blow_up_step(&e).map(|(field, step)| json!({ "field": field, "step": step }));
            io::write_json(
                &summary_path,
                &json!({
                    "config_hash": ctx.hash,
                    "seed": seed,
                    "status": "numerical_failure",
                    "blow_up": failure,
                    "error": e.to_string(),
                }),
            )?;
            return Err(e);
        }
    };
    io::write_trajectory_csv(&ctx.out.join("trajectory.csv"), &traj, &ctx.hash)?;
    if frames {
        let fields: Vec<(f64, &[f64])> = traj
            .snapshots
            .iter()
            .filter_map(|s| s.fields.as_ref().map(|f| (s.t, f.u.as_slice())))
            .collect();
        io::write_frames(&ctx.out.join("u.frames"), s.profile.grid(), &fields)?;
    }
    let sup_u = traj.snapshots.iter().map(|s| s.u_h1).fold(0.0, f64::max);
    io::write_json(
        &summary_path,
        &json!({
            "config_hash": ctx.hash,
            "seed": seed,
            "status": "ok",
            "sup_u_h1": sup_u,
            "energy": traj.energy,
            "stop": traj.stop,
            "stopped_m": traj.stopped_m,
            "max_speed_discrepancy": traj.max_speed_discrepancy,
            "snapshots": traj.snapshots,
        }),
    )?;
    println!("sup_u_h1={sup_u:e}");
    Ok(0)
}

fn sweep(ctx: &Context) -> Result<u8, Error> {
    let s = ctx.cfg.setup()?;
    let params = ctx.cfg.model_params(&s.profile)?;
    let rep = scaling_study(
        &s.profile,
        &s.noise,
        &params,
        &ctx.cfg.sweep.epsilons,
        &ctx.cfg.sweep.seeds(),
        ctx.cfg.outputs.cadence,
    )?;
    io::write_json(&ctx.out.join("scaling.json"), &json!({ "config_hash": ctx.hash, "report": rep }))?;
    let rows: Vec<Vec<f64>> = (0..rep.seeds.len())
        .map(|p| {
            let mut row = vec![p as f64];
            for fit in rep.finite_m.iter().chain(std::iter::once(&rep.immediate)) {
                row.push(fit.slopes[p].unwrap_or(f64::NAN));
            }
            row
        })
        .collect();
    let mut header = vec!["path".to_string()];
    header.extend(rep.m_values.iter().map(|m| format!("slope_m={m}")));
    header.push("slope_immediate".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_table(&ctx.out.join("slopes.csv"), &header, &rows)?;
    for (m, fit) in rep.m_values.iter().zip(&rep.finite_m) {
        println!("m={m}: median slope {:.4}, stop fractions {:?}", fit.median_slope, fit.stop_fractions);
    }
    println!("immediate: median slope {:.4}", rep.immediate.median_slope);
    Ok(0)
}

fn verify_claim(ctx: &Context, claim: Claim) -> Result<u8, Error> {
    let verdict = verify(&ctx.cfg, claim)?;
    let path: &Path = &ctx.out.join(format!("verdict_{claim}.json"));
    io::write_json(path, &verdict)?;
    for c in &verdict.checks {
        println!(
            "{claim}: {} = {:e} [{}, {}] {}",
            c.name,
            c.measured,
            c.lower.map_or("-".into(), |v| format!("{v:e}")),
            c.upper.map_or("-".into(), |v| format!("{v:e}")),
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    let code = match verdict.status {
        Status::Pass => 0,
        Status::Fail => EXIT_FAIL,
        Status::InsufficientPower => {
            println!("{claim}: insufficient statistical power ({} paths)", verdict.n_paths);
            EXIT_FAIL
        }
    };
    println!("{claim}: {:?}", verdict.status);
    Ok(code)
}
