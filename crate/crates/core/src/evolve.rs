//! Pseudo-spectral time evolution of the normalized (`b = d = 1`) system with bottom forcing.

use rustfft::num_complex::Complex;

use crate::diagnostics::{diagnostics_row, DiagnosticsRow};
use crate::error::{Result, WaveError};
use crate::model::{AbcdParams, BottomSpec};
use crate::scalar::{lit, to_f64, Real};
use crate::spectral::{Field, FieldPair, GridRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stepper {
    Rk4,
    /// Strang splitting: exact linear half steps around an RK4 step of the remainder.
    SplitStep,
}

#[derive(Clone, Copy, Debug)]
pub struct EvolveConfig<S> {
    pub dt: S,
    pub t_start: S,
    pub t_end: S,
    pub dealias: bool,
    pub output_stride: usize,
    pub stepper: Stepper,
}

impl<S: Real> EvolveConfig<S> {
    /// `dt = 0.25 dx`, snapshots every `max(1, round(0.5/dt))` steps, dealiasing on.
    pub fn defaults(grid: &GridRef<S>, t_start: S, t_end: S) -> Self {
        let dt = grid.dx() * lit(0.25);
        Self { dt, t_start, t_end, dealias: true, output_stride: default_stride(dt), stepper: Stepper::Rk4 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > S::zero()) {
            return Err(WaveError::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end > self.t_start) {
            return Err(WaveError::InvalidParameter("t_end must exceed t_start".into()));
        }
        if self.output_stride == 0 {
            return Err(WaveError::InvalidParameter("output_stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps; the last step is shortened to land on `t_end`.
    pub fn steps(&self) -> usize {
        to_f64((self.t_end - self.t_start) / self.dt).ceil().max(1.0) as usize
    }
}

pub fn default_stride<S: Real>(dt: S) -> usize {
    (0.5 / to_f64(dt)).round().max(1.0) as usize
}

/// Everything the right-hand side needs besides the state.
#[derive(Clone, Copy, Debug)]
pub struct Dynamics<S> {
    pub params: AbcdParams<S>,
    pub bottom: BottomSpec<S>,
    pub dealias: bool,
    /// Lab coordinate of grid point `x`: `x + x_offset` (changes on re-centering).
    pub x_offset: S,
}

impl<S: Real> Dynamics<S> {
    pub fn new(params: AbcdParams<S>, bottom: BottomSpec<S>, dealias: bool) -> Self {
        Self { params, bottom, dealias, x_offset: S::zero() }
    }

    /// `∂_t^{ds} ∂_x^{dy} h` sampled at the lab positions of the grid.
    pub fn bottom_field(&self, grid: &GridRef<S>, t: S, ds: usize, dy: usize) -> Field<S> {
        if self.bottom.is_flat() {
            return Field::zeros(grid);
        }
        let off = self.x_offset;
        Field::from_fn(grid, |x| self.bottom.eval(t, x + off, ds, dy).expect("supported order"))
    }
}

fn dealias_mask(n: usize, j: usize) -> bool {
    let m = if j <= n / 2 { j } else { n - j };
    m <= n / 3
}

/// `∂_t(η, u)` from the Helmholtz-inverted form of the equations.
pub fn rhs<S: Real>(state: &FieldPair<S>, t: S, dynamics: &Dynamics<S>) -> FieldPair<S> {
    rhs_parts(state, t, dynamics, true, true)
}

/// Nonlinear and forcing part only (the linear flat part removed).
pub fn rhs_nonlinear<S: Real>(state: &FieldPair<S>, t: S, dynamics: &Dynamics<S>) -> FieldPair<S> {
    rhs_parts(state, t, dynamics, false, true)
}

/// Linear flat-bottom part `−B(η, u)` only.
pub fn rhs_linear<S: Real>(state: &FieldPair<S>, dynamics: &Dynamics<S>) -> FieldPair<S> {
    rhs_parts(state, S::zero(), dynamics, true, false)
}

fn rhs_parts<S: Real>(state: &FieldPair<S>, t: S, dy: &Dynamics<S>, linear: bool, rest: bool) -> FieldPair<S> {
    let grid = state.grid().clone();
    let n = grid.n();
    let p = &dy.params;
    let k = grid.wavenumbers();
    let half = lit::<S>(0.5);
    let eta_hat = grid.forward(state.eta.values());
    let u_hat = grid.forward(state.u.values());
    let flat = dy.bottom.is_flat();

    let (mut n1, mut n2, mut f1, mut f2) = (None, None, None, None);
    if rest {
        let h = if flat { None } else { Some(dy.bottom_field(&grid, t, 0, 0)) };
        let prod1: Vec<S> = (0..n)
            .map(|j| {
                let hj = h.as_ref().map_or(S::zero(), |h| h.values()[j]);
                state.u.values()[j] * (state.eta.values()[j] + hj)
            })
            .collect();
        let prod2: Vec<S> = state.u.values().iter().map(|&u| half * u * u).collect();
        n1 = Some(grid.forward(&prod1));
        n2 = Some(grid.forward(&prod2));
        if !flat {
            f1 = Some(grid.forward(dy.bottom_field(&grid, t, 1, 0).values()));
            f2 = Some(grid.forward(dy.bottom_field(&grid, t, 2, 1).values()));
        }
    }

    let zero = Complex::new(S::zero(), S::zero());
    let mut out1 = vec![zero; n];
    let mut out2 = vec![zero; n];
    let nyq = n / 2;
    for j in 0..n {
        let kj = k[j];
        let k2 = kj * kj;
        let hinv = S::one() / (S::one() + k2);
        // Odd symbols vanish at the Nyquist bin.
        let ik = if j == nyq { zero } else { Complex::new(S::zero(), kj) };
        let mut a1 = zero;
        let mut a2 = zero;
        if linear {
            a1 = u_hat[j] * (S::one() - p.a * k2);
            a2 = eta_hat[j] * (S::one() - p.c * k2);
        }
        if let (Some(n1), Some(n2)) = (&n1, &n2) {
            let keep = !dy.dealias || dealias_mask(n, j);
            if keep {
                a1 = a1 + n1[j];
                a2 = a2 + n2[j];
            }
        }
        out1[j] = -(ik * a1) * hinv;
        out2[j] = -(ik * a2) * hinv;
        if let (Some(f1), Some(f2)) = (&f1, &f2) {
            out1[j] = out1[j] + f1[j] * ((-S::one() - p.a1 * k2) * hinv);
            out2[j] = out2[j] + f2[j] * (p.c1 * hinv);
        }
    }
    FieldPair {
        eta: Field::new(&grid, grid.inverse(out1)).expect("length"),
        u: Field::new(&grid, grid.inverse(out2)).expect("length"),
    }
}

/// One classical RK4 step of `rhs`.
pub fn step_rk4<S: Real>(state: &FieldPair<S>, t: S, dt: S, dynamics: &Dynamics<S>) -> Result<FieldPair<S>> {
    rk4_with(state, t, dt, |s, tt| rhs(s, tt, dynamics))
}

fn rk4_with<S: Real>(
    state: &FieldPair<S>,
    t: S,
    dt: S,
    f: impl Fn(&FieldPair<S>, S) -> FieldPair<S>,
) -> Result<FieldPair<S>> {
    let half = lit::<S>(0.5);
    let k1 = f(state, t);
    let mut s2 = state.clone();
    s2.axpy(half * dt, &k1);
    let k2 = f(&s2, t + half * dt);
    let mut s3 = state.clone();
    s3.axpy(half * dt, &k2);
    let k3 = f(&s3, t + half * dt);
    let mut s4 = state.clone();
    s4.axpy(dt, &k3);
    let k4 = f(&s4, t + dt);
    let mut out = state.clone();
    let sixth = dt / lit(6.0);
    out.axpy(sixth, &k1);
    out.axpy(sixth + sixth, &k2);
    out.axpy(sixth + sixth, &k3);
    out.axpy(sixth, &k4);
    if !out.is_finite() {
        return Err(WaveError::NonFinite(to_f64(t + dt)));
    }
    Ok(out)
}

/// `σ(k) = √((1 − ak²)(1 − ck²)) / (1 + k²)`.
pub fn sigma<S: Real>(params: &AbcdParams<S>, k: S) -> S {
    let k2 = k * k;
    ((S::one() - params.a * k2) * (S::one() - params.c * k2)).sqrt() / (S::one() + k2)
}

/// Exact flat-bottom linear flow over `dt`, diagonalized by `v = η̂ + h û`, `w = η̂ − h û`
/// with `h(k) = √((1 − ak²)/(1 − ck²))`.
pub fn linear_exact_step<S: Real>(state: &FieldPair<S>, dt: S, params: &AbcdParams<S>) -> Result<FieldPair<S>> {
    if params.a >= S::zero() || params.c >= S::zero() {
        return Err(WaveError::InvalidParameter("exact linear flow needs a < 0 and c < 0".into()));
    }
    let grid = state.grid().clone();
    let n = grid.n();
    let eh = grid.forward(state.eta.values());
    let uh = grid.forward(state.u.values());
    let mut o1 = eh.clone();
    let mut o2 = uh.clone();
    let nyq = n / 2;
    for j in 0..n {
        let k = grid.wavenumbers()[j];
        let k2 = k * k;
        let hk = ((S::one() - params.a * k2) / (S::one() - params.c * k2)).sqrt();
        let th = if j == nyq { S::zero() } else { k * sigma(params, k) * dt };
        let v = eh[j] + uh[j] * hk;
        let w = eh[j] - uh[j] * hk;
        let v = v * Complex::new(th.cos(), -th.sin());
        let w = w * Complex::new(th.cos(), th.sin());
        o1[j] = (v + w) * lit::<S>(0.5);
        o2[j] = (v - w) * (lit::<S>(0.5) / hk);
    }
    Ok(FieldPair {
        eta: Field::new(&grid, grid.inverse(o1))?,
        u: Field::new(&grid, grid.inverse(o2))?,
    })
}

/// Advances one step with the configured stepper.
pub fn step<S: Real>(
    state: &FieldPair<S>,
    t: S,
    dt: S,
    dynamics: &Dynamics<S>,
    stepper: Stepper,
) -> Result<FieldPair<S>> {
    match stepper {
        Stepper::Rk4 => step_rk4(state, t, dt, dynamics),
        Stepper::SplitStep => {
            let half = dt * lit(0.5);
            let a = linear_exact_step(state, half, &dynamics.params)?;
            let b = rk4_with(&a, t, dt, |s, tt| rhs_nonlinear(s, tt, dynamics))?;
            linear_exact_step(&b, half, &dynamics.params)
        }
    }
}

/// Snapshots and diagnostics of a run.
#[derive(Clone, Debug)]
pub struct Trajectory<S: Real> {
    pub times: Vec<S>,
    pub snapshots: Vec<FieldPair<S>>,
    pub diagnostics: Vec<DiagnosticsRow<S>>,
    /// Lab position of the grid origin for each snapshot.
    pub offsets: Vec<S>,
    /// `(t, shift)` of every re-centering.
    pub recenterings: Vec<(S, S)>,
}

/// Runs from `initial` at `config.t_start` to `config.t_end`.
pub fn run<S: Real>(
    initial: &FieldPair<S>,
    config: &EvolveConfig<S>,
    params: &AbcdParams<S>,
    bottom: &BottomSpec<S>,
) -> Result<Trajectory<S>> {
    let dynamics = Dynamics::new(*params, *bottom, config.dealias);
    run_with(initial, config, &dynamics, |_, _, _| Ok(None))
}

/// Hook invoked after every step with `(step index, t, state)`; it may return a
/// replacement state (used for re-centering).
pub type StepHook<'a, S> = dyn FnMut(usize, S, &FieldPair<S>) -> Result<Option<(FieldPair<S>, S)>> + 'a;

/// Like [`run`], with a per-step hook that may replace the state and shift the frame.
pub fn run_with<S: Real>(
    initial: &FieldPair<S>,
    config: &EvolveConfig<S>,
    dynamics: &Dynamics<S>,
    mut hook: impl FnMut(usize, S, &FieldPair<S>) -> Result<Option<(FieldPair<S>, S)>>,
) -> Result<Trajectory<S>> {
    config.validate()?;
    if !dynamics.params.is_normalized() {
        return Err(WaveError::InvalidParameter("evolution uses the b = d = 1 normalization".into()));
    }
    let mut dy = *dynamics;
    let mut state = initial.clone();
    let mut t = config.t_start;
    let steps = config.steps();
    let mut traj = Trajectory {
        times: vec![t],
        snapshots: vec![state.clone()],
        diagnostics: vec![],
        offsets: vec![dy.x_offset],
        recenterings: vec![],
    };
    traj.diagnostics.push(diagnostics_row(&state, &dy, t));
    for i in 1..=steps {
        let h = if i == steps { config.t_end - t } else { config.dt };
        state = step(&state, t, h, &dy, config.stepper)?;
        t = if i == steps { config.t_end } else { config.t_start + config.dt * lit(i as f64) };
        if let Some((new_state, shift)) = hook(i, t, &state)? {
            state = new_state;
            dy.x_offset += shift;
            traj.recenterings.push((t, shift));
        }
        if i % config.output_stride == 0 || i == steps {
            traj.times.push(t);
            traj.snapshots.push(state.clone());
            traj.offsets.push(dy.x_offset);
            traj.diagnostics.push(diagnostics_row(&state, &dy, t));
        }
    }
    Ok(traj)
}
