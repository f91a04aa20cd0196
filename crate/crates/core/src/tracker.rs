//! Modulation decomposition `state ≈ Q_ω(· − ρ)` by the orthogonality conditions.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Result, WaveError};
use crate::model::AbcdParams;
use crate::solitary::{profile_at, Branch, SolitonProfile};
use crate::spectral::{h1h1_norm, inner};
use crate::{FieldPair64, Grid64};

/// Speed lattice spacing of [`ProfileCache`].
pub const PROFILE_SPACING: f64 = 1e-3;
const MAX_NEWTON: usize = 60;

/// Pairing used for the shift condition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Pairing {
    /// `⟨η, Q'_ω⟩ = 0`.
    #[default]
    Plain,
    /// `⟨η, (1 − ∂²)Q'_ω⟩ = 0`.
    Helmholtz,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TrackMode {
    #[default]
    ShiftOnly,
    ShiftSpeed,
}

impl std::str::FromStr for TrackMode {
    type Err = WaveError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shift-only" | "shift" => Ok(Self::ShiftOnly),
            "shift-speed" | "speed" => Ok(Self::ShiftSpeed),
            _ => Err(WaveError::Config(format!("unknown track mode '{s}'"))),
        }
    }
}

/// Profiles on a speed lattice, linearly interpolated in between.
pub struct ProfileCache {
    params: AbcdParams<f64>,
    branch: Branch,
    grid: Grid64,
    spacing: f64,
    seed: Option<SolitonProfile<f64>>,
    nodes: Mutex<HashMap<i64, Arc<FieldPair64>>>,
}

impl ProfileCache {
    pub fn new(params: AbcdParams<f64>, branch: Branch, grid: Grid64, seed: Option<SolitonProfile<f64>>) -> Self {
        Self { params, branch, grid, spacing: PROFILE_SPACING, seed, nodes: Mutex::new(HashMap::new()) }
    }

    pub fn grid(&self) -> &Grid64 {
        &self.grid
    }

    fn node(&self, i: i64) -> Result<Arc<FieldPair64>> {
        if let Some(p) = self.nodes.lock().expect("cache lock").get(&i) {
            return Ok(p.clone());
        }
        let omega = i as f64 * self.spacing;
        let p = Arc::new(profile_at(&self.params, omega, self.branch, &self.grid, self.seed.as_ref())?.pair());
        self.nodes.lock().expect("cache lock").insert(i, p.clone());
        Ok(p)
    }

    /// `Q_ω` centered at the origin.
    pub fn profile(&self, omega: f64) -> Result<FieldPair64> {
        let pos = omega / self.spacing;
        let near = pos.round();
        if (pos - near).abs() < 1e-9 {
            return Ok((*self.node(near as i64)?).clone());
        }
        let i = pos.floor() as i64;
        let theta = pos - i as f64;
        let (a, b) = (self.node(i)?, self.node(i + 1)?);
        let mut out = a.scale(1.0 - theta);
        out.axpy(theta, &b);
        Ok(out)
    }
}

/// Result of a shift fit.
#[derive(Clone, Copy, Debug)]
pub struct ShiftFit {
    pub rho: f64,
    /// `|g(ρ)| / ‖Q'‖²`.
    pub defect: f64,
    /// `‖state − Q_ω(· − ρ)‖_{H¹×H¹}`.
    pub residual: f64,
    /// `residual / ‖Q_ω‖_{H¹×H¹}`; above ½ the state has left the tube.
    pub relative_residual: f64,
    pub iterations: usize,
}

impl ShiftFit {
    pub fn in_tube(&self) -> bool {
        self.relative_residual < 0.5
    }
}

fn weight(v: &FieldPair64, pairing: Pairing) -> FieldPair64 {
    match pairing {
        Pairing::Plain => v.clone(),
        Pairing::Helmholtz => v.helmholtz(),
    }
}

/// `ρ` maximizing the cross-correlation of `state` with `q`.
pub fn correlation_guess(state: &FieldPair64, q: &FieldPair64) -> f64 {
    let g = state.grid();
    let n = g.n();
    let dx = g.dx();
    let mut best = (f64::NEG_INFINITY, 0usize);
    let (se, su) = (state.eta.values(), state.u.values());
    let (qe, qu) = (q.eta.values(), q.u.values());
    for m in 0..n {
        let mut c = 0.0;
        for j in 0..n {
            let k = (j + n - m) % n;
            c += se[j] * qe[k] + su[j] * qu[k];
        }
        if c > best.0 {
            best = (c, m);
        }
    }
    let m = best.1 as f64;
    let shift = if m > (n / 2) as f64 { m - n as f64 } else { m };
    shift * dx
}

/// Scalar Newton for `g(ρ) = ⟨state − Q(· − ρ), W Q'(· − ρ)⟩ = 0`, with `q` centered at the origin.
pub fn fit_shift(state: &FieldPair64, q: &FieldPair64, rho_guess: Option<f64>, pairing: Pairing) -> Result<ShiftFit> {
    if state.grid().spec() != q.grid().spec() {
        return Err(WaveError::GridMismatch);
    }
    let dq = weight(&q.deriv(1), pairing);
    let ddq = dq.deriv(1);
    let scale = inner(&dq, &q.deriv(1))?.abs().max(1e-300);
    // ⟨Q(· − ρ), W Q'(· − ρ)⟩ does not depend on ρ.
    let self_pairing = inner(q, &dq)?;
    let mut rho = rho_guess.unwrap_or_else(|| correlation_guess(state, q));
    let g_of = |rho: f64| -> Result<(f64, f64)> {
        Ok((inner(state, &dq.shift(rho))? - self_pairing, -inner(state, &ddq.shift(rho))?))
    };
    let mut iterations = 0;
    let mut converged_at = None;
    loop {
        let (g, gp) = g_of(rho)?;
        if converged_at.is_none() && g.abs() < 1e-10 * scale {
            converged_at = Some(iterations);
        }
        if let Some(k) = converged_at {
            // A couple of extra steps take the root to rounding level.
            if iterations >= k + 2 {
                break;
            }
        }
        if iterations == MAX_NEWTON {
            return Err(WaveError::Tracker(format!("shift Newton did not converge (g = {g:e})")));
        }
        if gp.abs() < 1e-12 * scale {
            return Err(WaveError::Singular(format!("shift derivative vanished at ρ = {rho}")));
        }
        let step = g / gp;
        if !step.is_finite() || step.abs() > state.grid().half_length() {
            return Err(WaveError::Tracker(format!("shift Newton diverged at ρ = {rho}")));
        }
        rho -= step;
        iterations += 1;
        if step.abs() < 1e-15 * rho.abs().max(1.0) && converged_at.is_some() {
            break;
        }
    }
    let (g, _) = g_of(rho)?;
    let diff = state - &q.shift(rho);
    let residual = h1h1_norm(&diff);
    Ok(ShiftFit {
        rho,
        defect: g.abs() / scale,
        residual,
        relative_residual: residual / h1h1_norm(q),
        iterations,
    })
}

/// Result of a shift-and-speed fit.
#[derive(Clone, Copy, Debug)]
pub struct SpeedFit {
    pub omega: f64,
    pub rho: f64,
    /// Relative defects of the two orthogonality conditions.
    pub defect_shift: f64,
    pub defect_speed: f64,
    pub residual: f64,
    pub relative_residual: f64,
    pub iterations: usize,
}

fn conditions(state: &FieldPair64, cache: &ProfileCache, omega: f64, rho: f64, pairing: Pairing) -> Result<([f64; 2], [f64; 2])> {
    let q = cache.profile(omega)?.shift(rho);
    let diff = state - &q;
    let k1 = weight(&q.deriv(1), pairing);
    let k2 = q.helmholtz().swap();
    let scales = [inner(&k1, &q.deriv(1))?.abs().max(1e-300), inner(&k2, &k2)?.sqrt() * h1h1_norm(&q)];
    Ok(([inner(&diff, &k1)?, inner(&diff, &k2)?], scales))
}

/// 2-D Newton on `⟨η, Q'_ω⟩ = ⟨η, J(1−∂²)Q_ω⟩ = 0` with a finite-difference Jacobian.
pub fn fit_shift_speed(
    state: &FieldPair64,
    cache: &ProfileCache,
    omega_guess: f64,
    rho_guess: Option<f64>,
    pairing: Pairing,
) -> Result<SpeedFit> {
    let mut omega = omega_guess;
    let mut rho = match rho_guess {
        Some(r) => r,
        None => correlation_guess(state, &cache.profile(omega)?),
    };
    let (dw, dr) = (1e-4, 1e-5);
    let mut iterations = 0;
    let mut converged_at = None;
    loop {
        let (g, sc) = conditions(state, cache, omega, rho, pairing)?;
        if converged_at.is_none() && g[0].abs() < 1e-10 * sc[0] && g[1].abs() < 1e-10 * sc[1] {
            converged_at = Some(iterations);
        }
        if matches!(converged_at, Some(k) if iterations >= k + 1) {
            break;
        }
        if iterations == MAX_NEWTON {
            return Err(WaveError::Tracker(format!("speed Newton did not converge (g = {g:?})")));
        }
        let (gwp, _) = conditions(state, cache, omega + dw, rho, pairing)?;
        let (gwm, _) = conditions(state, cache, omega - dw, rho, pairing)?;
        let (grp, _) = conditions(state, cache, omega, rho + dr, pairing)?;
        let (grm, _) = conditions(state, cache, omega, rho - dr, pairing)?;
        let j = [
            [(gwp[0] - gwm[0]) / (2.0 * dw), (grp[0] - grm[0]) / (2.0 * dr)],
            [(gwp[1] - gwm[1]) / (2.0 * dw), (grp[1] - grm[1]) / (2.0 * dr)],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let norm = (j[0][0].abs() + j[0][1].abs()) * (j[1][0].abs() + j[1][1].abs());
        if det.abs() < 1e-12 * norm.max(1e-300) {
            return Err(WaveError::Singular("shift-speed Jacobian is singular".into()));
        }
        let sw = (g[0] * j[1][1] - g[1] * j[0][1]) / det;
        let sr = (j[0][0] * g[1] - j[1][0] * g[0]) / det;
        if !(sw.is_finite() && sr.is_finite()) || sw.abs() > 0.5 {
            return Err(WaveError::Tracker(format!("speed Newton diverged at ω = {omega}")));
        }
        omega -= sw;
        rho -= sr;
        iterations += 1;
    }
    let (g, sc) = conditions(state, cache, omega, rho, pairing)?;
    let q = cache.profile(omega)?.shift(rho);
    let residual = h1h1_norm(&(state - &q));
    Ok(SpeedFit {
        omega,
        rho,
        defect_shift: g[0].abs() / sc[0],
        defect_speed: g[1].abs() / sc[1],
        residual,
        relative_residual: residual / h1h1_norm(&q),
        iterations,
    })
}

/// Parameter and residual series along a trajectory.
#[derive(Clone, Debug, Default)]
pub struct ModulationTrack {
    pub times: Vec<f64>,
    /// Lab-frame shift.
    pub rho: Vec<f64>,
    pub omega: Vec<f64>,
    pub residual: Vec<f64>,
    /// Plain and `(1−∂²)`-weighted shift-condition defects.
    pub defect: Vec<f64>,
    pub defect_helmholtz: Vec<f64>,
}

/// Column header of the track table.
pub const TRACK_HEADER: &str = "t\tomega\trho\tresidual_h1\tdefect\tdefect_helmholtz";

impl ModulationTrack {
    pub fn lines(&self) -> Vec<String> {
        (0..self.times.len())
            .map(|i| {
                format!(
                    "{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.6e}\t{:.6e}",
                    self.times[i], self.omega[i], self.rho[i], self.residual[i], self.defect[i], self.defect_helmholtz[i]
                )
            })
            .collect()
    }

    /// Centered-difference `ρ'` at interior samples (endpoints one-sided).
    pub fn rho_dot(&self) -> Vec<f64> {
        let n = self.times.len();
        (0..n)
            .map(|i| {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                if a == b {
                    0.0
                } else {
                    (self.rho[b] - self.rho[a]) / (self.times[b] - self.times[a])
                }
            })
            .collect()
    }
}

/// Options of [`track`].
#[derive(Clone, Copy, Debug)]
pub struct TrackOptions {
    pub mode: TrackMode,
    pub pairing: Pairing,
    pub reference_omega: f64,
}

fn defect_with(state: &FieldPair64, q: &FieldPair64, pairing: Pairing) -> Result<f64> {
    let k = weight(&q.deriv(1), pairing);
    Ok(inner(&(state - q), &k)?.abs() / inner(&k, &q.deriv(1))?.abs().max(1e-300))
}

/// Fits every snapshot with warm starts. `offsets[i]` is the lab position of the grid origin.
pub fn track(
    times: &[f64],
    snapshots: &[FieldPair64],
    offsets: &[f64],
    cache: &ProfileCache,
    opts: &TrackOptions,
) -> Result<ModulationTrack> {
    if times.len() != snapshots.len() || offsets.len() != snapshots.len() {
        return Err(WaveError::InvalidParameter("times, snapshots and offsets differ in length".into()));
    }
    let dx = cache.grid().dx();
    let mut out = ModulationTrack::default();
    let mut omega = opts.reference_omega;
    let base = cache.profile(omega)?;
    let mut prev: Option<(f64, f64)> = None;
    for (i, state) in snapshots.iter().enumerate() {
        let guess = prev.map(|(t, r)| r + omega * (times[i] - t) - offsets[i]);
        let (w, rho_grid, residual) = match opts.mode {
            TrackMode::ShiftOnly => {
                let f = fit_shift(state, &base, guess, opts.pairing)?;
                (omega, f.rho, f.residual)
            }
            TrackMode::ShiftSpeed => {
                let f = fit_shift_speed(state, cache, omega, guess, opts.pairing)?;
                (f.omega, f.rho, f.residual)
            }
        };
        let rho = rho_grid + offsets[i];
        if let Some((t, r)) = prev {
            let jump = (rho - r - w * (times[i] - t)).abs();
            if jump > 5.0 * dx * w.max(1e-3) + 0.5 * w * (times[i] - t).abs() {
                return Err(WaveError::Tracker(format!("shift jumped by {jump} at t = {}", times[i])));
            }
        }
        omega = w;
        let q = cache.profile(w)?.shift(rho_grid);
        out.times.push(times[i]);
        out.rho.push(rho);
        out.omega.push(w);
        out.residual.push(residual);
        out.defect.push(defect_with(state, &q, Pairing::Plain)?);
        out.defect_helmholtz.push(defect_with(state, &q, Pairing::Helmholtz)?);
        prev = Some((times[i], rho));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solitary::chen_profile;
    use crate::spectral::Grid;

    #[test]
    fn correlation_guess_finds_grid_shift() {
        let g = Grid::<f64>::new(256, 40.0).unwrap();
        let q = chen_profile(-1.0, Branch::Plus, &g, &AbcdParams::chen()).unwrap().pair();
        let s = q.shift(12.0 * g.dx());
        assert!((correlation_guess(&s, &q) - 12.0 * g.dx()).abs() < 1e-12);
    }

    #[test]
    fn track_mode_parses() {
        assert_eq!("shift-speed".parse::<TrackMode>().unwrap(), TrackMode::ShiftSpeed);
        assert!("bogus".parse::<TrackMode>().is_err());
    }
}
