use proptest::prelude::*;
use splatphys::bgdo::{
    bgdo_update, combine, eta, key_frames, run_pipeline, BgdoConfig, PipelineParams, YOUNG_MAX, YOUNG_MIN,
};
use splatphys::cli::io::{load_snapshot, save_snapshot, snapshot_file_name};
use splatphys::constitutive::Preset;
use splatphys::ipf::FillParams;
use splatphys::mpm::{simulate, FrameSnapshot, MaterialSet, ParticleState, SimConfig, SimOptions};
use splatphys::pointset::{PointSet, NOISE};
use splatphys::Vec3;
use std::sync::OnceLock;

fn cube(lo: Vec3, n: usize, side: f64) -> Vec<Vec3> {
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

fn sim() -> SimConfig {
    SimConfig { grid: 32, frames: 9, ..SimConfig::default() }
}

struct Forward {
    materials: MaterialSet,
    snapshots: Vec<FrameSnapshot>,
    dt: f64,
}

/// Two jelly cubes plus a few noise particles, run once and shared.
fn forward() -> &'static Forward {
    static RUN: OnceLock<Forward> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut pos = cube(Vec3::new(0.3, 0.3, 0.3), 7, 0.15);
        let a = pos.len();
        pos.extend(cube(Vec3::new(0.55, 0.55, 0.25), 7, 0.15));
        let b = pos.len();
        pos.extend([Vec3::new(0.8, 0.2, 0.6), Vec3::new(0.2, 0.8, 0.6)]);
        let mut labels = vec![0; a];
        labels.resize(b, 1);
        labels.resize(pos.len(), NOISE);
        let materials =
            MaterialSet::new(vec![Preset::Jelly.material(0), Preset::Jelly.material(1), Preset::Jelly.material(NOISE)])
                .unwrap();
        let state = ParticleState::seed(&pos, &labels, &materials, 32).unwrap();
        let cfg = sim();
        let opts = SimOptions { snapshot_frames: key_frames(cfg.frames), record_frames: false };
        let out = simulate(state, &materials, &cfg, &opts).unwrap();
        Forward { materials, snapshots: out.snapshots, dt: out.timestep.dt }
    })
}

#[test]
fn key_frames_are_first_middle_last() {
    assert_eq!(key_frames(150), vec![0, 74, 149]);
    assert_eq!(key_frames(30), vec![0, 14, 29]);
    assert_eq!(key_frames(2), vec![0, 1]);
    assert_eq!(key_frames(1), vec![0]);
}

#[test]
fn snapshots_alone_determine_the_update() {
    let run = forward();
    let cfg = BgdoConfig::default();
    let (a, audit_a) = bgdo_update(&run.materials, &run.snapshots, &sim(), run.dt, &cfg, 0).unwrap();

    // Same result from the on-disk snapshots, with nothing else of the run.
    let dir = tempfile::tempdir().unwrap();
    let loaded: Vec<FrameSnapshot> = run
        .snapshots
        .iter()
        .map(|s| {
            let p = dir.path().join(snapshot_file_name(s.frame));
            save_snapshot(&p, s).unwrap();
            load_snapshot(&p).unwrap()
        })
        .collect();
    let (b, audit_b) = bgdo_update(&run.materials, &loaded, &sim(), run.dt, &cfg, 0).unwrap();
    assert_eq!(a, b);
    assert_eq!(audit_a, audit_b);

    // Changing a snapshot changes the signal.
    let mut corrupted = loaded.clone();
    for f in &mut corrupted[1].f {
        *f *= 1.05;
    }
    let (_, audit_c) = bgdo_update(&run.materials, &corrupted, &sim(), run.dt, &cfg, 0).unwrap();
    assert_ne!(audit_a[0].g_tau, audit_c[0].g_tau);
}

#[test]
fn updates_are_multiplicative_and_skip_noise() {
    let run = forward();
    let cfg = BgdoConfig { iterations: 3, delta_target: 0.1 };
    let (calibrated, audit) = bgdo_update(&run.materials, &run.snapshots, &sim(), run.dt, &cfg, 5).unwrap();
    assert_eq!(audit.len(), 3 * 2);
    assert!(audit.iter().all(|r| r.label != NOISE));
    assert_eq!(calibrated.get(NOISE), run.materials.get(NOISE));
    for r in &audit {
        assert!((5..8).contains(&r.iteration));
        assert_eq!(r.eta, eta(r.young_before));
        let expect = combine(r.label, r.g_tau, r.d_f, r.young_before, 0.1);
        assert_eq!(r.update, expect.update);
        if !r.suppressed && !r.clamped {
            let e = r.young_before * (-r.update).exp();
            assert!((r.young_after - e).abs() <= 1e-12 * e);
        }
    }
    // Records chain: each iteration starts where the previous one ended.
    for label in [0, 1] {
        let chain: Vec<_> = audit.iter().filter(|r| r.label == label).collect();
        for w in chain.windows(2) {
            assert_eq!(w[0].young_after, w[1].young_before);
        }
        assert_eq!(calibrated.get(label).unwrap().young, chain.last().unwrap().young_after);
    }
}

#[test]
fn no_snapshots_is_an_error() {
    let run = forward();
    assert!(bgdo_update(&run.materials, &[], &sim(), run.dt, &BgdoConfig::default(), 0).is_err());
}

#[test]
fn zero_iterations_reproduce_the_forward_run() {
    let pos = cube(Vec3::new(0.4, 0.4, 0.3), 6, 0.12);
    let materials = MaterialSet::new(vec![Preset::Jelly.material(0)]).unwrap();
    let params = PipelineParams {
        fill: FillParams { fill_density: 0.0, ..FillParams::default() },
        seed: 0,
        sim: SimConfig { grid: 32, frames: 5, ..SimConfig::default() },
        materials: materials.clone(),
        bgdo: BgdoConfig { iterations: 0, delta_target: 0.1 },
        snapshot_frames: None,
        resimulate_between_iterations: false,
    };
    let out = run_pipeline(&PointSet::from_positions(pos.clone()), &params).unwrap();
    assert_eq!(out.calibrated, materials);
    assert!(out.audit.is_empty());
    let state = ParticleState::seed(&pos, &vec![0; pos.len()], &materials, 32).unwrap();
    let direct =
        simulate(state, &materials, &params.sim, &SimOptions { record_frames: true, ..SimOptions::default() }).unwrap();
    assert_eq!(out.frames, direct.frames);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn calibrated_moduli_stay_positive_and_bounded(log_e in -1.0f64..11.5, delta in 0.0f64..1.0) {
        let run = forward();
        let mut materials = run.materials.clone();
        for label in [0, 1] {
            materials.get_mut(label).unwrap().young = 10f64.powf(log_e);
        }
        let cfg = BgdoConfig { iterations: 1, delta_target: delta };
        let (out, audit) = bgdo_update(&materials, &run.snapshots, &sim(), run.dt, &cfg, 0).unwrap();
        for r in &audit {
            prop_assert!(r.young_after.is_finite());
            prop_assert!((YOUNG_MIN..=YOUNG_MAX).contains(&r.young_after));
            prop_assert_eq!(out.get(r.label).unwrap().young, r.young_after);
        }
    }

    #[test]
    fn eta_is_a_monotone_blend(a in 0.0f64..1e12, b in 0.0f64..1e12) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!((0.0..=1.0).contains(&eta(lo)));
        prop_assert!(eta(lo) <= eta(hi));
    }

    #[test]
    fn larger_stress_sensitivity_lowers_modulus_more(g in 0.0f64..1e6, extra in 0.0f64..1e6, d in 0.0f64..1.0, e in 1.0f64..1e9) {
        let a = combine(0, g, d, e, 0.1).update;
        let b = combine(0, g + extra, d, e, 0.1).update;
        prop_assert!(b >= a);
    }
}
