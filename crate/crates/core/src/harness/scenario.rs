//! Scenario drivers: each writes its artifacts and a `summary.tsv` of checks.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diagnostics::DIAGNOSTICS_HEADER;
use crate::error::{Result, WaveError};
use crate::evolve::run;
use crate::harness::checks::{self, ApproxGrids, ThreeRegime};
use crate::harness::config::{ScenarioConfig, ScenarioKind};
use crate::harness::interaction::InteractionRun;
use crate::harness::output::Artifacts;
use crate::harness::scaling::SweepReport;
use crate::harness::{thread_pool, Check};
use crate::linop::assemble_l;
use crate::model::{BottomKind, BottomSpec};
use crate::solitary::{evenness_defect, profile_at, slope_dp_domega, SolitonProfile};
use crate::spectral::{h1h1_norm, Field, FieldPair, Grid};
use crate::tracker::{track, ProfileCache, TrackOptions, TRACK_HEADER};
use crate::Grid64;

/// Checks and files produced by one scenario.
#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub kind: ScenarioKind,
    pub checks: Vec<Check>,
    pub artifacts: Artifacts,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Runs the scenario selected by `scenario.kind` and writes `<out_dir>/<kind>/summary.tsv`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let kind = cfg.scenario.kind;
    let dir = cfg.scenario.out_dir.join(kind.name());
    let (checks, mut artifacts) = match kind {
        ScenarioKind::SolitonValidate => {
            let (mut c, mut a) = soliton_report(cfg, &dir)?;
            let (c2, a2) = spectrum_report(cfg, &dir)?;
            c.extend(c2);
            a.extend(a2);
            if cfg.params.params().is_chen() {
                c.extend(checks::tracker_fidelity(&cfg.grid()?)?);
            }
            (c, a)
        }
        ScenarioKind::LinearValidate => (checks::linear_propagator(&cfg.grid()?, cfg.evolve.t_end)?, Artifacts::default()),
        ScenarioKind::IdentityCheck => evolve_report(cfg, &dir)?,
        ScenarioKind::ApproxSweep => approx_report(cfg, &dir)?,
        ScenarioKind::Interaction => interact_report(cfg, &dir)?,
        ScenarioKind::ExitStability => exit_stability_report(cfg, &dir)?,
    };
    write_summary(&mut artifacts, &dir, &checks)?;
    Ok(ScenarioOutcome { kind, checks, artifacts })
}

pub fn write_summary(artifacts: &mut Artifacts, dir: &Path, checks: &[Check]) -> Result<PathBuf> {
    artifacts.table(dir, "summary.tsv", Check::HEADER, checks.iter().map(Check::line))
}

fn profile(cfg: &ScenarioConfig, grid: &Grid64) -> Result<SolitonProfile<f64>> {
    let seed = cfg.seed(grid)?;
    profile_at(&cfg.params.params(), cfg.scenario.omega0, cfg.branch()?, grid, seed.as_ref())
}

fn xy_lines(grid: &Grid64, cols: &[&Field<f64>]) -> Vec<String> {
    grid.points()
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let mut l = format!("{x:.16e}");
            for c in cols {
                l.push_str(&format!("\t{:.16e}", c.values()[j]));
            }
            l
        })
        .collect()
}

/// Profile at `ω₀` with residual checks; on Chen parameters also the exactness and momentum oracles.
pub fn soliton_report(cfg: &ScenarioConfig, dir: &Path) -> Result<(Vec<Check>, Artifacts)> {
    let grid = cfg.grid()?;
    let p = profile(cfg, &grid)?;
    let mut a = Artifacts::default();
    a.table(dir, "profile.tsv", "x\tR\tQ", xy_lines(&grid, &[&p.r, &p.q]))?;
    a.pair(dir, "profile", &p.pair())?;
    let mut c = vec![
        Check::below("profile", "profile_residual_sup", p.residual, 1e-10),
        Check::below("profile", "evenness_defect", evenness_defect(&p), 1e-10),
    ];
    if cfg.params.params().is_chen() {
        c.extend(checks::chen_exactness(&grid)?);
        c.extend(checks::momentum_oracle(&grid)?);
    }
    Ok((c, a))
}

/// Low spectrum, Vakhitov–Kolokolov slope and coercivity at the profile of speed `ω₀`.
pub fn spectrum_report(cfg: &ScenarioConfig, dir: &Path) -> Result<(Vec<Check>, Artifacts)> {
    let grid = cfg.grid()?;
    let p = profile(cfg, &grid)?;
    let op = assemble_l(&p)?;
    let s = op.lowest_spectrum(8)?;
    let vk = op.vk_functional()?;
    let seed = cfg.seed(&grid)?;
    let slope = slope_dp_domega(&p.params, p.omega, cfg.branch()?, &grid, seed.as_ref(), 1e-4)?;
    let co = op.coercivity_check()?;
    let mut a = Artifacts::default();
    a.table(
        dir,
        "spectrum.tsv",
        "index\teigenvalue",
        s.lowest_eigenvalues.iter().enumerate().map(|(i, v)| format!("{i}\t{v:.16e}")),
    )?;
    a.table(
        dir,
        "stability.tsv",
        "omega\tvk\tdP_domega\tcoercivity_l2\tcoercivity_h1\tsingle_l2\tsingle_h1",
        [format!(
            "{:.16e}\t{vk:.16e}\t{slope:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}",
            p.omega, co.l2, co.h1, co.l2_single, co.h1_single
        )],
    )?;
    let mut c = vec![
        Check::below("spectrum", "kernel_residual_rel_h2", op.kernel_residual(), 1e-8),
        Check::new("spectrum", "negative_eigenvalues", s.negative_count as f64, "= 1", s.negative_count == 1),
        Check::below("spectrum", "vk_vs_slope_rel_diff", (vk - slope).abs() / slope.abs(), 1e-3),
        Check::new("spectrum", "constrained_min_h1", co.h1, "> 0", co.h1 > 0.0),
    ];
    if cfg.params.params().is_chen() {
        let (k, _, _) = checks::kernel_spectrum(&grid)?;
        c.extend(k);
        c.extend(checks::coercivity(&grid)?.0);
    }
    Ok((c, a))
}

fn is_flat(spec: &BottomSpec<f64>) -> bool {
    spec.kind == BottomKind::Zero || spec.amplitude == 0.0
}

/// Evolution of the soliton at `ω₀` over `[0, t_end]` at the first ε, with the diagnostics table.
pub fn evolve_report(cfg: &ScenarioConfig, dir: &Path) -> Result<(Vec<Check>, Artifacts)> {
    let grid = cfg.grid()?;
    let spec = cfg.bottom(cfg.scenario.epsilons[0])?;
    let p = profile(cfg, &grid)?;
    let params = cfg.params.params();
    let ecfg = cfg.evolve_config(&grid, 0.0, cfg.evolve.t_end)?;
    let tr = run(&p.pair(), &ecfg, &params, &spec)?;
    let mut a = Artifacts::default();
    a.table(dir, "diagnostics.tsv", DIAGNOSTICS_HEADER, tr.diagnostics.iter().map(|r| r.to_line()))?;
    a.pair(dir, "final", &tr.snapshots[tr.snapshots.len() - 1])?;
    let d = &tr.diagnostics;
    let mut c = Vec::new();
    if is_flat(&spec) {
        let (first, last) = (&d[0], &d[d.len() - 1]);
        c.push(Check::below("6", "energy_rel_drift", ((last.h - first.h) / first.h).abs(), 1e-6));
        c.push(Check::below("6", "momentum_rel_drift", ((last.p - first.p) / first.p).abs(), 1e-6));
    } else {
        c.extend(checks::identity_checks(d));
    }
    Ok((c, a))
}

/// Residual of the approximate solution at `t = 0` for every ε, plus the effective-ODE ratios.
pub fn approx_report(cfg: &ScenarioConfig, dir: &Path) -> Result<(Vec<Check>, Artifacts)> {
    let residual = cfg.grid()?;
    let ode = Grid::new((cfg.grid.n / 2).max(16), 0.5 * cfg.grid.half_length)?;
    let grids = ApproxGrids { ode: ode.clone(), residual };
    let params = cfg.params.params();
    let branch = cfg.branch()?;
    let seed = cfg.seed(&ode)?;
    let specs = cfg.scenario.epsilons.iter().map(|&e| cfg.bottom(e)).collect::<Result<Vec<_>>>()?;
    let pool = thread_pool()?;
    let members = pool.install(|| {
        specs
            .par_iter()
            .map(|s| checks::approx_member(&params, branch, s, cfg.scenario.omega0, &grids, seed.as_ref()))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut a = Artifacts::default();
    a.table(
        dir,
        "approx.tsv",
        "epsilon\tomega\trho\tf1\tf2\tr_sharp_h2\tr_first_h2\tw_l2\tw_linf\tw_dx_l2\tdelta_t",
        members.iter().map(|m| {
            let s = &m.second;
            format!(
                "{:.6e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.6e}",
                m.epsilon, s.omega, s.rho, s.f1, s.f2, s.norm, m.first.norm, s.w_l2, s.w_linf, s.w_dx_l2, s.delta_t
            )
        }),
    )?;
    let (ode_checks, ratios) = checks::effective_ode(&params, branch, &specs, cfg.scenario.omega0, &ode)?;
    a.table(dir, "effective_ode.tsv", "epsilon\tabs_domega_over_eps", ratios.iter().map(|(e, r)| format!("{e:.6e}\t{r:.16e}")))?;
    let mut c = Vec::new();
    if members.len() >= 3 {
        let (sc, fits) = checks::approx_scaling(&members)?;
        write_fits(&mut a, dir, &fits)?;
        c.extend(sc);
    }
    if specs.len() >= 2 {
        c.extend(ode_checks);
    } else {
        c.extend(ode_checks.into_iter().filter(|k| k.name == "flat_omega_max_deviation"));
    }
    Ok((c, a))
}

fn write_fits(a: &mut Artifacts, dir: &Path, fits: &[SweepReport]) -> Result<()> {
    a.table(
        dir,
        "fits.tsv",
        "quantity\texponent\tprefactor\tfit_residual\twindow_lo\twindow_hi\tstatus",
        fits.iter().map(|f| {
            format!(
                "{}\t{:.10e}\t{:.10e}\t{:.3e}\t{}\t{}\t{}",
                f.label,
                f.exponent,
                f.prefactor,
                f.fit_residual,
                f.window.0,
                f.window.1,
                if f.pass { "PASS" } else { "FAIL" }
            )
        }),
    )?;
    Ok(())
}

/// The three-regime experiment on the configured grid.
pub fn three_regime_setup(cfg: &ScenarioConfig) -> Result<ThreeRegime> {
    let dx = cfg.grid()?.dx();
    Ok(ThreeRegime {
        params: cfg.params.params(),
        branch: cfg.branch()?,
        grid: cfg.grid()?,
        omega0: cfg.scenario.omega0,
        track: TrackOptions { mode: cfg.track_mode()?, pairing: cfg.pairing()?, reference_omega: cfg.scenario.omega0 },
        delta0: cfg.scenario.delta0,
        t_cap: cfg.scenario.t_cap,
        exit_factor: 2.0,
        dt_factor: cfg.evolve.dt.map_or(cfg.evolve.dt_factor, |d| d / dx),
        output_stride: cfg.evolve.output_stride.unwrap_or(20),
    })
}

pub fn write_interaction(a: &mut Artifacts, dir: &Path, runs: &[InteractionRun]) -> Result<()> {
    for r in runs {
        let sub = dir.join(format!("eps_{}", r.epsilon));
        a.table(&sub, "track.tsv", TRACK_HEADER, r.track.lines())?;
        a.table(&sub, "recenterings.tsv", "t\tshift", r.recenterings.iter().map(|(t, s)| format!("{t:.16e}\t{s:.16e}")))?;
        a.pair(&sub, "final", &r.final_state)?;
    }
    a.table(
        dir,
        "exit.tsv",
        "epsilon\tt_epsilon\texit_residual\texit_rho_defect\tmax_relative_residual\tfinal_offset",
        runs.iter().map(|r| {
            format!(
                "{:.6e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}",
                r.epsilon,
                r.t_epsilon,
                r.exit_residual(),
                r.exit_rho_defect(),
                r.max_relative_residual(),
                r.final_offset
            )
        }),
    )?;
    Ok(())
}

pub fn interact_report(cfg: &ScenarioConfig, dir: &Path) -> Result<(Vec<Check>, Artifacts)> {
    let setup = three_regime_setup(cfg)?;
    let specs = cfg.scenario.epsilons.iter().map(|&e| cfg.bottom(e)).collect::<Result<Vec<_>>>()?;
    let runs = checks::three_regime(&setup, &specs, &thread_pool()?)?;
    let mut a = Artifacts::default();
    write_interaction(&mut a, dir, &runs)?;
    let c = if runs.len() >= 3 {
        let (c, fits) = checks::three_regime_checks(&runs)?;
        write_fits(&mut a, dir, &fits)?;
        c
    } else {
        let tube = runs.iter().map(|r| r.max_relative_residual()).fold(0.0, f64::max);
        vec![Check::below("11d", "max_relative_residual", tube, 0.5)]
    };
    Ok((c, a))
}

/// Smooth random perturbation: a few random low Fourier modes under a gaussian envelope.
pub fn seeded_perturbation(grid: &Grid64, seed: u64, width: f64) -> Result<FieldPair<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = || -> Vec<(f64, f64, f64)> {
        (0..6).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.05..0.6), rng.gen_range(0.0..std::f64::consts::TAU))).collect()
    };
    let (me, mu) = (modes(), modes());
    let f = |m: &[(f64, f64, f64)]| {
        Field::from_fn(grid, |x| {
            let env = (-(x / width).powi(2)).exp();
            env * m.iter().map(|(a, k, ph)| a * (k * x + ph).cos()).sum::<f64>()
        })
    };
    let p = FieldPair::new(f(&me), f(&mu))?;
    let n = h1h1_norm(&p);
    Ok(p.scale(1.0 / n))
}

/// Flat-bottom run of a perturbed soliton, tracked with the configured pairing.
pub fn exit_stability_report(cfg: &ScenarioConfig, dir: &Path) -> Result<(Vec<Check>, Artifacts)> {
    let grid = cfg.grid()?;
    let p = profile(cfg, &grid)?;
    let q = p.pair();
    let mut init = q.shift(-0.25 * cfg.scenario.omega0 * cfg.evolve.t_end);
    init.axpy(cfg.scenario.perturbation * h1h1_norm(&q), &seeded_perturbation(&grid, cfg.scenario.rng_seed, 5.0)?);
    let ecfg = cfg.evolve_config(&grid, 0.0, cfg.evolve.t_end)?;
    let tr = run(&init, &ecfg, &p.params, &BottomSpec::flat())?;
    let cache = ProfileCache::new(p.params, cfg.branch()?, grid.clone(), cfg.seed(&grid)?);
    let opts = TrackOptions { mode: cfg.track_mode()?, pairing: cfg.pairing()?, reference_omega: cfg.scenario.omega0 };
    let mt = track(&tr.times, &tr.snapshots, &tr.offsets, &cache, &opts)?;
    let mut a = Artifacts::default();
    a.table(dir, "track.tsv", TRACK_HEADER, mt.lines())?;
    let qn = h1h1_norm(&q);
    let r0 = mt.residual.first().copied().ok_or_else(|| WaveError::Tracker("empty track".into()))?;
    let rmax = mt.residual.iter().fold(0.0f64, |m, r| m.max(*r));
    let defect = match cfg.pairing()? {
        crate::tracker::Pairing::Plain => &mt.defect,
        crate::tracker::Pairing::Helmholtz => &mt.defect_helmholtz,
    };
    let dmax = defect.iter().fold(0.0f64, |m, d| m.max(*d));
    let dw = mt.omega.iter().map(|w| (w - cfg.scenario.omega0).abs()).fold(0.0, f64::max);
    let c = vec![
        Check::below("exit", "residual_growth_factor", rmax / r0.max(1e-300), 10.0),
        Check::below("exit", "max_relative_residual", rmax / qn, 0.5),
        Check::below("exit", "max_orthogonality_defect", dmax, 1e-8),
        Check::new("exit", "max_speed_deviation", dw, "info", true),
    ];
    Ok((c, a))
}
