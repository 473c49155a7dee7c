use proptest::prelude::*;
use splatphys::constitutive::{Elasticity, MaterialParams, Plasticity, Preset};
use splatphys::mpm::{simulate, ExecMode, MaterialSet, MpmError, ParticleState, SimConfig, SimOptions, Solver};
use splatphys::Vec3;

fn lattice(n: usize, lo: Vec3, side: f64) -> Vec<Vec3> {
    let h = side / (n - 1) as f64;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.push(lo + Vec3::new(i as f64, j as f64, k as f64) * h);
            }
        }
    }
    out
}

fn two_materials() -> (Vec<Vec3>, Vec<i32>, MaterialSet) {
    let mut pos = lattice(8, Vec3::new(0.3, 0.3, 0.3), 0.15);
    let n = pos.len();
    pos.extend(lattice(8, Vec3::new(0.55, 0.5, 0.35), 0.15));
    let mut labels = vec![0; n];
    labels.resize(pos.len(), 1);
    let mats = MaterialSet::new(vec![Preset::Jelly.material(0), Preset::Sand.material(1)]).unwrap();
    (pos, labels, mats)
}

#[test]
fn parallel_mode_is_bit_identical() {
    let (pos, labels, mats) = two_materials();
    let run = |mode| {
        let cfg = SimConfig { grid: 32, frames: 6, mode, ..SimConfig::default() };
        let state = ParticleState::seed(&pos, &labels, &mats, cfg.grid).unwrap();
        let opts = SimOptions { snapshot_frames: vec![0, 5], record_frames: true };
        simulate(state, &mats, &cfg, &opts).unwrap()
    };
    let a = run(ExecMode::Deterministic);
    let b = run(ExecMode::Parallel);
    assert_eq!(a.frames, b.frames);
    assert_eq!(a.snapshots, b.snapshots);
    assert_eq!(a.final_state.x, b.final_state.x);
}

#[test]
fn repeated_runs_match() {
    let (pos, labels, mats) = two_materials();
    let cfg = SimConfig { grid: 32, frames: 4, ..SimConfig::default() };
    let run = || {
        let state = ParticleState::seed(&pos, &labels, &mats, cfg.grid).unwrap();
        simulate(state, &mats, &cfg, &SimOptions { record_frames: true, ..SimOptions::default() }).unwrap().frames
    };
    assert_eq!(run(), run());
}

#[test]
fn snapshot_resumes_the_run() {
    let (pos, labels, mats) = two_materials();
    let cfg = SimConfig { grid: 32, frames: 6, ..SimConfig::default() };
    let state = ParticleState::seed(&pos, &labels, &mats, cfg.grid).unwrap();
    let full = simulate(state, &mats, &cfg, &SimOptions { snapshot_frames: vec![3], record_frames: true }).unwrap();
    let snap = &full.snapshots[0];
    assert_eq!(snap.frame, 3);
    assert_eq!(snap.x, full.frames[3]);

    // Continuing from the snapshot with the same step reproduces the tail.
    let mut state = snap.to_state();
    let dt = full.timestep.dt;
    let mut solver = Solver::new(cfg.clone(), &mats, state.labels()).unwrap();
    let mut t = 3.0 * cfg.frame_dt;
    for frame in 3..6 {
        assert_eq!(state.x, full.frames[frame], "frame {frame}");
        for _ in 0..full.timestep.substeps {
            solver.step(&mut state, dt, t).unwrap();
            t += dt;
        }
    }
    assert_eq!(state.x, full.final_state.x);
}

#[test]
fn missing_material_is_reported() {
    let (pos, mut labels, mats) = two_materials();
    labels[0] = 7;
    let seeding =
        MaterialSet::new(vec![Preset::Jelly.material(0), Preset::Sand.material(1), Preset::Jelly.material(7)]).unwrap();
    let state = ParticleState::seed(&pos, &labels, &seeding, 32).unwrap();
    let err =
        simulate(state, &mats, &SimConfig { grid: 32, frames: 1, ..SimConfig::default() }, &SimOptions::default())
            .unwrap_err();
    assert!(matches!(err, MpmError::MissingMaterial(7)), "{err:?}");
}

#[test]
fn particles_stay_inside_the_domain() {
    let (pos, labels, mats) = two_materials();
    let cfg = SimConfig { grid: 32, frames: 25, ..SimConfig::default() };
    let state = ParticleState::seed(&pos, &labels, &mats, cfg.grid).unwrap();
    let out = simulate(state, &mats, &cfg, &SimOptions::default()).unwrap();
    let band = cfg.margin as f64 * cfg.dx();
    for p in &out.final_state.x {
        for a in 0..3 {
            assert!(p[a] >= band * 0.5 && p[a] <= 1.0 - band * 0.5, "{p:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn free_flight_conserves_mass_and_momentum(
        pts in prop::collection::vec(prop::array::uniform3(0.35f64..0.65), 5..60),
        vel in prop::array::uniform3(-0.3f64..0.3),
    ) {
        let pos: Vec<Vec3> = pts.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect();
        let mats = MaterialSet::new(vec![MaterialParams::new(0, Elasticity::Corotated, Plasticity::Identity, 1000.0, 0.3, 1e-20)]).unwrap();
        let mut state = ParticleState::seed(&pos, &vec![0; pos.len()], &mats, 32).unwrap();
        for v in &mut state.v {
            *v = Vec3::new(vel[0], vel[1], vel[2]);
        }
        let cfg = SimConfig { grid: 32, gravity: [0.0; 3], ..SimConfig::default() };
        let mut solver = Solver::new(cfg, &mats, state.labels()).unwrap();
        let (m0, p0) = (state.total_mass(), state.total_momentum());
        for s in 0..20 {
            solver.step(&mut state, 1e-4, s as f64 * 1e-4).unwrap();
        }
        prop_assert!((state.total_mass() - m0).abs() <= 1e-12 * m0);
        prop_assert!((state.total_momentum() - p0).norm() <= 1e-10 * p0.norm().max(m0));
    }
}
