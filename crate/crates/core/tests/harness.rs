use std::path::{Path, PathBuf};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavelab_core::evolve::EvolveConfig;
use wavelab_core::harness::interaction::{evolve_interaction, RECENTER_MARGIN};
use wavelab_core::harness::{fit_scaling, run_scenario, ScenarioConfig, ScenarioKind};
use wavelab_core::model::{AbcdParams, BottomSpec};
use wavelab_core::solitary::{chen_profile, g_branch, Branch};
use wavelab_core::spectral::{write_binary, Grid};
use wavelab_core::tracker::{track, Pairing, ProfileCache, TrackMode, TrackOptions};
use wavelab_core::WaveError;

const EPS: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

fn scratch_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("wavelab-test-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn exact_power_law_slope() {
    let v: Vec<f64> = EPS.iter().map(|e| 3.0 * e.powf(1.5)).collect();
    let r = fit_scaling("p", &EPS, &v, (1.4, 1.6)).unwrap();
    assert!((r.exponent - 1.5).abs() < 1e-12);
    assert!((r.prefactor - 3.0).abs() < 1e-10);
    assert!(r.pass);
}

#[test]
fn noisy_power_law_slope_with_fixed_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let v: Vec<f64> = EPS.iter().map(|e| e.powf(1.5) * (1.0 + rng.gen_range(-0.05..0.05))).collect();
    let r = fit_scaling("p", &EPS, &v, (1.4, 1.6)).unwrap();
    assert!((r.exponent - 1.5).abs() < 0.1, "{}", r.exponent);
}

#[test]
fn constant_values_have_zero_slope() {
    let r = fit_scaling("c", &EPS, &[2.0; 5], (-0.1, 0.1)).unwrap();
    assert!(r.exponent.abs() < 1e-14);
}

#[test]
fn fewer_than_three_points_is_an_error() {
    assert!(matches!(fit_scaling("x", &[0.2, 0.1], &[1.0, 2.0], (0.0, 1.0)), Err(WaveError::TooFewPoints(2))));
    assert!(fit_scaling("x", &[0.2, 0.1, 0.05], &[1.0, -2.0, 1.0], (0.0, 1.0)).is_err());
}

proptest! {
    #[test]
    fn exponent_ignores_the_prefactor(c in 1e-3f64..1e3, p in -2.0f64..3.0, noise in proptest::collection::vec(0.9f64..1.1, 5)) {
        let v: Vec<f64> = EPS.iter().zip(&noise).map(|(e, n)| e.powf(p) * n).collect();
        let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
        let a = fit_scaling("a", &EPS, &v, (0.0, 1.0)).unwrap();
        let b = fit_scaling("b", &EPS, &scaled, (0.0, 1.0)).unwrap();
        prop_assert!((a.exponent - b.exponent).abs() < 1e-9);
        prop_assert!((b.prefactor / a.prefactor - c).abs() < 1e-8 * c);
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg = ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let back = ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, back);
        seen += 1;
    }
    assert_eq!(seen, 6);
}

#[test]
fn config_validation_messages() {
    let base = "[scenario]\nkind = \"interaction\"\n";
    assert!(ScenarioConfig::from_toml(base).is_ok());
    let err = ScenarioConfig::from_toml("[scenario]\nkind = \"interaction\"\nepsilons = [0.05, 0.1]\n").unwrap_err();
    assert!(err.to_string().contains("descending"), "{err}");
    assert!(ScenarioConfig::from_toml("[scenario]\nkind = \"interaction\"\nepsilons = [0.1, 0.1, 0.05]\n").is_err());
    assert!(ScenarioConfig::from_toml("[scenario]\nkind = \"collision\"\n").is_err());
    assert!(ScenarioConfig::from_toml("[scenario]\nkind = \"interaction\"\nomega0 = 1.2\n").is_err());
    assert!(ScenarioConfig::from_toml("[grid]\nn = 15\n[scenario]\nkind = \"interaction\"\n").is_err());
    assert!(ScenarioConfig::from_toml("[bottom]\nkind = \"ridge\"\n[scenario]\nkind = \"interaction\"\n").is_err());
    assert!(ScenarioConfig::from_toml("[scenario]\nkind = \"interaction\"\nmystery = 1\n").is_err());
    let missing = "[scenario]\nkind = \"soliton-validate\"\nseed_paths = [\"/nonexistent/r.bin\", \"/nonexistent/q.bin\"]\n";
    let err = ScenarioConfig::from_toml(missing).unwrap_err();
    assert!(err.to_string().contains("does not exist"), "{err}");
}

#[test]
fn seed_files_are_read_back() {
    let dir = scratch_dir("seed");
    std::fs::create_dir_all(&dir).unwrap();
    let g = Grid::<f64>::new(256, 40.0).unwrap();
    let p = chen_profile(g_branch(0.5, Branch::Plus), Branch::Plus, &g, &AbcdParams::chen()).unwrap();
    let (r, q) = (dir.join("r.bin"), dir.join("q.bin"));
    write_binary(&r, &p.r).unwrap();
    write_binary(&q, &p.q).unwrap();
    let text = format!(
        "[grid]\nn = 256\nhalf_length = 40.0\n[scenario]\nkind = \"soliton-validate\"\nbranch = \"numeric\"\nseed_paths = [{:?}, {:?}]\n",
        r.display().to_string(),
        q.display().to_string()
    );
    let cfg = ScenarioConfig::from_toml(&text).unwrap();
    let seed = cfg.seed(&cfg.grid().unwrap()).unwrap().unwrap();
    assert_eq!(seed.r.values(), p.r.values());
    let _ = std::fs::remove_dir_all(&dir);
}

fn read_all(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn reruns_are_byte_identical() {
    let mut outs = Vec::new();
    for tag in ["a", "b"] {
        let mut cfg = ScenarioConfig::with_kind(ScenarioKind::Interaction);
        cfg.grid.n = 512;
        cfg.grid.half_length = 60.0;
        cfg.scenario.epsilons = vec![0.3, 0.2, 0.15];
        cfg.scenario.out_dir = scratch_dir(tag);
        let outcome = run_scenario(&cfg).unwrap();
        assert!(!outcome.artifacts.files.is_empty());
        outs.push((cfg.scenario.out_dir.clone(), read_all(&cfg.scenario.out_dir)));
    }
    assert_eq!(outs[0].1, outs[1].1);
    assert!(outs[0].1.iter().any(|(p, _)| p.ends_with("summary.tsv")));
    for (d, _) in outs {
        let _ = std::fs::remove_dir_all(d);
    }
}

#[test]
fn exit_stability_scenario_passes() {
    let mut cfg = ScenarioConfig::load(&configs_dir().join("exit.toml")).unwrap();
    cfg.scenario.out_dir = scratch_dir("exit");
    let outcome = run_scenario(&cfg).unwrap();
    assert!(outcome.passed(), "{:?}", outcome.checks);
    let _ = std::fs::remove_dir_all(&cfg.scenario.out_dir);
}

#[test]
fn recentering_keeps_the_lab_frame_track_continuous() {
    let omega = 0.5;
    let g = Grid::<f64>::new(512, 40.0).unwrap();
    let q = chen_profile(g_branch(omega, Branch::Plus), Branch::Plus, &g, &AbcdParams::chen()).unwrap().pair();
    let mut cfg = EvolveConfig::defaults(&g, 0.0, 40.0);
    cfg.output_stride = 20;
    let tr = evolve_interaction(&q, &cfg, &AbcdParams::chen(), &BottomSpec::flat()).unwrap();
    assert!(!tr.recenterings.is_empty());
    assert!(tr.recenterings.iter().all(|(_, s)| *s > 40.0 - RECENTER_MARGIN));
    let cache = ProfileCache::new(AbcdParams::chen(), Branch::Plus, g.clone(), None);
    let opts = TrackOptions { mode: TrackMode::ShiftOnly, pairing: Pairing::Plain, reference_omega: omega };
    let mt = track(&tr.times, &tr.snapshots, &tr.offsets, &cache, &opts).unwrap();
    for (t, rho) in mt.times.iter().zip(&mt.rho) {
        assert!((rho - omega * t).abs() < 1e-5, "t={t}: ρ={rho}");
    }
    assert!(mt.residual.iter().all(|r| *r < 1e-4));
}
