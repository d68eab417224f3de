use wavefront::dynamics::{run_path, track_front, ModelParams, OutputSpec};
use wavefront::grid::SpatialGrid;
use wavefront::noise::{NoiseModel, PathSeed};
use wavefront::wave_profile::{nagumo_profile, WaveProfile};

fn setup() -> (WaveProfile, NoiseModel) {
    let g = SpatialGrid::new(20.0, 401).unwrap();
    let p = nagumo_profile(1.0, 2.0, 0.25, &g).unwrap();
    let noise = NoiseModel::new(&g, 32, 0.1, 2.0).unwrap();
    (p, noise)
}

#[test]
fn deterministic_system_stays_on_the_wave() {
    let (p, noise) = setup();
    let params = ModelParams::new(&p, 0.0, 10.0, 1.0, 1e-2);
    let traj = run_path(&params, &p, &noise, PathSeed::new(1, 0), OutputSpec::evenly(100, 10, true)).unwrap();
    assert_eq!(traj.snapshots.first().unwrap().t, 0.0);
    assert!((traj.snapshots.last().unwrap().t - 1.0).abs() < 1e-12);
    for s in &traj.snapshots {
        assert_eq!(s.u_h1, 0.0);
        assert_eq!(s.branches[0].cm, 0.0);
        assert!(s.fields.as_ref().unwrap().u.iter().all(|&v| v == 0.0));
    }
    assert!(traj.stop.stopped_q.is_none());
}

#[test]
fn rescaled_phase_does_not_depend_on_epsilon() {
    // C₀ is driven by the noise alone, so ε = 0 and ε > 0 share it path by path.
    let (p, noise) = setup();
    let spec = OutputSpec::evenly(100, 10, false);
    let c0 = |eps: f64| -> Vec<f64> {
        let params = ModelParams::new(&p, eps, 10.0, 1.0, 1e-2);
        run_path(&params, &p, &noise, PathSeed::new(1, 0), spec).unwrap().snapshots.iter().map(|s| s.c0).collect()
    };
    let (a, b) = (c0(0.0), c0(0.02));
    assert!(a.iter().skip(1).any(|&v| v != 0.0));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12, "{x} vs {y}");
    }
}

#[test]
fn runs_are_reproducible_and_seed_dependent() {
    let (p, noise) = setup();
    let params = ModelParams::new(&p, 0.05, 10.0, 0.5, 1e-2);
    let spec = OutputSpec::evenly(50, 5, false);
    let a = run_path(&params, &p, &noise, PathSeed::new(3, 0), spec).unwrap();
    let b = run_path(&params, &p, &noise, PathSeed::new(3, 0), spec).unwrap();
    let c = run_path(&params, &p, &noise, PathSeed::new(3, 1), spec).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let last = |t: &wavefront::dynamics::PathTrajectory| t.snapshots.last().unwrap().u_h1;
    assert!(last(&a) > 0.0 && last(&a).is_finite());
    assert_ne!(last(&a), last(&c));
}

#[test]
fn noise_amplitude_scales_the_perturbation() {
    // For small ε the perturbation is linear in ε to leading order.
    let (p, noise) = setup();
    let spec = OutputSpec::evenly(50, 1, false);
    let h = |eps: f64| {
        let params = ModelParams::new(&p, eps, 10.0, 0.5, 1e-2);
        run_path(&params, &p, &noise, PathSeed::new(5, 0), spec).unwrap().snapshots.last().unwrap().u_h1
    };
    let ratio = h(2e-4) / h(1e-4);
    assert!((ratio - 2.0).abs() < 0.02, "{ratio}");
}

#[test]
fn front_travels_at_the_wave_speed() {
    let (p, _) = setup();
    let track = track_front(&p, 1e-3, 4.0, 100).unwrap();
    let (t0, x0) = track[track.len() / 2];
    let (t1, x1) = *track.last().unwrap();
    // v(t, x) = v̂(x + ct) solves the equation, so the crossing sits at -ct.
    let velocity = (x1 - x0) / (t1 - t0);
    assert!((velocity + 0.5).abs() < 5e-3, "{velocity}");
}

#[test]
fn invalid_time_step_is_rejected() {
    let (p, noise) = setup();
    let params = ModelParams::new(&p, 0.01, 10.0, 1.0, -1e-2);
    assert!(run_path(&params, &p, &noise, PathSeed::new(1, 0), OutputSpec::evenly(10, 1, false)).is_err());
}
