//! Soliton–bottom interaction runs: evolve from `−T_ε` through the bottom and track.

use crate::error::Result;
use crate::evolve::{run_with, Dynamics, EvolveConfig, Trajectory};
use crate::model::{AbcdParams, BottomSpec};
use crate::solitary::Branch;
use crate::spectral::h1h1_norm;
use crate::tracker::{track, ModulationTrack, ProfileCache, TrackOptions};
use crate::FieldPair64;

/// Distance from the right edge at which the window is re-centered.
pub const RECENTER_MARGIN: f64 = 30.0;
/// Steps between re-centering checks.
const RECENTER_EVERY: usize = 16;

#[derive(Clone, Copy, Debug)]
pub struct InteractionSetup {
    pub params: AbcdParams<f64>,
    pub branch: Branch,
    pub spec: BottomSpec<f64>,
    pub omega0: f64,
    pub t_epsilon: f64,
    pub track: TrackOptions,
}

#[derive(Clone, Debug)]
pub struct InteractionRun {
    pub epsilon: f64,
    pub t_epsilon: f64,
    pub track: ModulationTrack,
    pub recenterings: Vec<(f64, f64)>,
    /// `‖Q_ω₀‖_{H¹×H¹}`.
    pub q_norm: f64,
    pub final_state: FieldPair64,
    pub final_offset: f64,
}

impl InteractionRun {
    fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = usize> + '_ {
        let tol = 1e-9 * self.t_epsilon.max(1.0);
        (0..self.track.times.len()).filter(move |&i| self.track.times[i] >= lo - tol && self.track.times[i] <= hi + tol)
    }

    /// Times and residuals on `[−T_ε, −T_ε/2]`.
    pub fn pre_window(&self) -> (Vec<f64>, Vec<f64>) {
        self.window(-self.t_epsilon, -0.5 * self.t_epsilon)
            .map(|i| (self.track.times[i], self.track.residual[i]))
            .unzip()
    }

    /// `sup_{t ≥ T_ε} ‖η − Q_ω(· − ρ)‖_{H¹×H¹}`.
    pub fn exit_residual(&self) -> f64 {
        self.window(self.t_epsilon, f64::INFINITY).map(|i| self.track.residual[i]).fold(0.0, f64::max)
    }

    /// `sup_{t ≥ T_ε} |ρ' − ω|` from centered differences of the tracked shift.
    pub fn exit_rho_defect(&self) -> f64 {
        let rd = self.track.rho_dot();
        let last = self.track.times.len().saturating_sub(1);
        self.window(self.t_epsilon, f64::INFINITY)
            .filter(|&i| i > 0 && i < last)
            .map(|i| (rd[i] - self.track.omega[i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_relative_residual(&self) -> f64 {
        self.track.residual.iter().fold(0.0f64, |m, r| m.max(*r)) / self.q_norm
    }
}

/// Grid index of the largest `|η|`, as a coordinate.
fn peak_position(state: &FieldPair64) -> f64 {
    let v = state.eta.values();
    let j = (0..v.len()).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap_or(0);
    state.grid().points()[j]
}

/// Evolves with re-centering past `L − 30` and returns the raw trajectory.
pub fn evolve_interaction(
    initial: &FieldPair64,
    config: &EvolveConfig<f64>,
    params: &AbcdParams<f64>,
    spec: &BottomSpec<f64>,
) -> Result<Trajectory<f64>> {
    let dynamics = Dynamics::new(*params, *spec, config.dealias);
    let limit = initial.grid().half_length() - RECENTER_MARGIN;
    run_with(initial, config, &dynamics, |i, _, state| {
        if i % RECENTER_EVERY != 0 {
            return Ok(None);
        }
        let p = peak_position(state);
        Ok((p > limit).then(|| (state.shift(-p), p)))
    })
}

/// Interaction run from `Q_ω₀(· + ω₀T_ε)` at `t = −T_ε`, tracked at every snapshot.
pub fn run_interaction(
    setup: &InteractionSetup,
    cache: &ProfileCache,
    config: &EvolveConfig<f64>,
) -> Result<InteractionRun> {
    let q = cache.profile(setup.omega0)?;
    let initial = q.shift(-setup.omega0 * setup.t_epsilon);
    let tr = evolve_interaction(&initial, config, &setup.params, &setup.spec)?;
    let mt = track(&tr.times, &tr.snapshots, &tr.offsets, cache, &setup.track)?;
    Ok(InteractionRun {
        epsilon: setup.spec.epsilon,
        t_epsilon: setup.t_epsilon,
        track: mt,
        recenterings: tr.recenterings.clone(),
        q_norm: h1h1_norm(&q),
        final_offset: *tr.offsets.last().unwrap_or(&0.0),
        final_state: tr.snapshots.last().cloned().unwrap_or(initial),
    })
}

/// Least-squares slope of `y` against `x` and the fraction of increasing consecutive pairs.
pub fn trend(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n < 2 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let (mx, my) = (x.iter().sum::<f64>() / nf, y.iter().sum::<f64>() / nf);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let up = y.windows(2).filter(|w| w[1] > w[0]).count() as f64 / (n - 1) as f64;
    (if sxx > 0.0 { sxy / sxx } else { 0.0 }, up)
}
