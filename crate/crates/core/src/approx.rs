//! Interaction corrections of first and second order, the cutoff approximate solution
//! `W♯`, the effective modulation equations and the residual `S_h(Q_ω + W♯)`.
//!
//! Everything here works in `f64`; `∂_z^{-1}` denotes `∫_z^∞`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Result, WaveError};
use crate::linop::OperatorHandle;
use crate::model::{AbcdParams, BottomSpec};
use crate::solitary::{lambda_q, profile_at, Branch, SolitonProfile};
use crate::spectral::{inner, ClosedTail, Field, FieldPair, TailField, TailPair};
use crate::{Field64, FieldPair64, Grid64};

/// `δ₀` in `T_ε = ε^{-1-δ₀}`.
pub const DEFAULT_DELTA0: f64 = 0.1;
/// Upper bound on `T_ε`.
pub const T_EPSILON_CAP: f64 = 2000.0;
/// Step of the centered difference used for `ΛQ_ω = ∂_ω Q_ω`.
pub const LAMBDA_STEP: f64 = 1e-4;
/// Speed lattice spacing of [`KernelProvider`].
pub const LATTICE_SPACING: f64 = 1e-3;
/// Absolute tolerance of the `δt` versus `δt/2` comparison.
pub const RICHARDSON_FLOOR: f64 = 1e-8;
/// Width excluded at each end of the box in interior norms.
pub const DEFAULT_MARGIN: f64 = 5.0;

/// Solution `(A₀, B₀)` of `L(A₀, B₀) = (0, Q_ω)` orthogonal to `Q'_ω`.
#[derive(Clone, Debug)]
pub struct FirstOrderKernel {
    pub a0: Field64,
    pub b0: Field64,
    pub omega: f64,
    /// `max |L(A₀, B₀) − (0, Q_ω)|`.
    pub residual: f64,
    pub evenness: f64,
    pub kernel_defect: f64,
    /// `max(|A₀|, |B₀|)` at `z = −L`.
    pub edge: f64,
}

pub fn solve_first_order(op: &OperatorHandle<f64>) -> Result<FirstOrderKernel> {
    let g = op.grid();
    let rhs = FieldPair::new(Field::zeros(g), op.profile.q.clone())?;
    let x = op.constrained_solve(&rhs)?;
    let residual = (&op.apply(&x) - &rhs).max_abs();
    let evenness = (&x.eta - &x.eta.reflect()).max_abs().max((&x.u - &x.u.reflect()).max_abs());
    let kernel_defect = op.kernel_defect(&x);
    let edge = x.eta.values()[0].abs().max(x.u.values()[0].abs());
    Ok(FirstOrderKernel { a0: x.eta, b0: x.u, omega: op.omega, residual, evenness, kernel_defect, edge })
}

/// Everything the construction needs at one speed on one grid.
pub struct KernelData {
    pub op: OperatorHandle<f64>,
    /// `ΛQ_ω = ∂_ω(R_ω, Q_ω)`.
    pub lambda: FieldPair64,
    pub first: FirstOrderKernel,
    /// `⟨(1−∂²)(Q_ω, R_ω), ΛQ_ω⟩ = dP/dω`.
    pub slope: f64,
    /// `∫Q_ω²`.
    pub q_sq: f64,
    /// `∫(R(1−∂²)B₀ + Q(1−∂²)A₀)`.
    pub d2: f64,
}

impl std::fmt::Debug for KernelData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelData").field("omega", &self.op.omega).field("slope", &self.slope).finish()
    }
}

impl KernelData {
    pub fn new(
        params: &AbcdParams<f64>,
        omega: f64,
        branch: Branch,
        grid: &Grid64,
        seed: Option<&SolitonProfile<f64>>,
    ) -> Result<Self> {
        let profile = profile_at(params, omega, branch, grid, seed)?;
        let lambda = lambda_q(params, omega, branch, grid, Some(&profile), LAMBDA_STEP)?;
        let op = OperatorHandle::new(&profile, crate::linop::DENSE_CAP)?;
        let first = solve_first_order(&op)?;
        let (r, q) = (&profile.r, &profile.q);
        let slope = inner(&FieldPair::new(q.helmholtz(), r.helmholtz())?, &lambda)?;
        if slope.abs() < 1e-8 {
            return Err(WaveError::DegenerateSlope(slope));
        }
        let q_sq = (q * q).integral();
        let d2 = (r * &first.b0.helmholtz()).integral() + (q * &first.a0.helmholtz()).integral();
        Ok(Self { op, lambda, first, slope, q_sq, d2 })
    }

    pub fn omega(&self) -> f64 {
        self.op.omega
    }

    pub fn profile(&self) -> &SolitonProfile<f64> {
        &self.op.profile
    }

    pub fn grid(&self) -> &Grid64 {
        self.op.grid()
    }
}

/// `h₀`, `∂_y h₀`, `∂_s h₀` at `(εt, ερ)` and `K = ∂_s h₀ + ω ∂_y h₀`.
#[derive(Clone, Copy, Debug, Default)]
struct BottomSample {
    h0: f64,
    hy: f64,
    k: f64,
}

fn bottom_sample(spec: &BottomSpec<f64>, t: f64, rho: f64, omega: f64) -> Result<BottomSample> {
    let (s, y) = (spec.epsilon * t, spec.epsilon * rho);
    let h0 = spec.h0(s, y, 0, 0)?;
    let hy = spec.h0(s, y, 0, 1)?;
    let hs = spec.h0(s, y, 1, 0)?;
    Ok(BottomSample { h0, hy, k: hs + omega * hy })
}

/// `∂_s h₀(εt, ε(z + ρ))` sampled on the grid.
fn moving_bottom(spec: &BottomSpec<f64>, grid: &Grid64, t: f64, rho: f64, ds: usize, dy: usize) -> Result<Field64> {
    let e = spec.epsilon;
    let v = grid.points().iter().map(|&z| spec.h0(e * t, e * (z + rho), ds, dy)).collect::<Result<Vec<_>>>()?;
    Field::new(grid, v)
}

/// Solvability coefficient `f₁ = −d₀(½∂_yh₀∫Q² + ∫∂_sh₀(εt, ε(z+ρ))Q − K d₂)` with `d₀ = (dP/dω)^{-1}`.
pub fn f1_eval(kd: &KernelData, spec: &BottomSpec<f64>, t: f64, rho: f64) -> Result<f64> {
    if spec.is_flat() {
        return Ok(0.0);
    }
    let b = bottom_sample(spec, t, rho, kd.omega())?;
    let hs = moving_bottom(spec, kd.grid(), t, rho, 1, 0)?;
    let coupling = (&hs * &kd.profile().q).integral();
    Ok(-(0.5 * b.hy * kd.q_sq + coupling - b.k * kd.d2) / kd.slope)
}

/// Forcing of the second-order system without its `f₂` part.
fn forcing_without_f2(kd: &KernelData, spec: &BottomSpec<f64>, t: f64, rho: f64, f1: f64) -> Result<TailPair<f64>> {
    let g = kd.grid();
    let b = bottom_sample(spec, t, rho, kd.omega())?;
    let p = kd.profile();
    let (a0, b0) = (&kd.first.a0, &kd.first.b0);
    let (lr, lq) = (&kd.lambda.eta, &kd.lambda.u);
    let h2 = b.h0 * b.h0;

    let mut eta_p = lq.deriv(1).scale(f1);
    eta_p.axpy(-b.k, &b0.deriv(1));
    eta_p.axpy(-0.5 * h2, &(b0 * b0));
    let mut eta_q = lq.scale(f1);
    eta_q.axpy(-b.k, b0);

    let z = Field::from_fn(g, |x| x);
    let mut u_p = (&z * &p.q).scale(-b.hy);
    u_p.axpy(f1, &lr.deriv(1));
    u_p.axpy(-b.k, &a0.deriv(1));
    u_p.axpy(-h2, &(&(a0 * b0) - b0));
    let mut u_q = lr.scale(f1);
    u_q.axpy(-b.k, a0);

    let tail = moving_tail(spec, g, t, rho)?;
    Ok(TailPair {
        eta: TailField { p: eta_p, q: eta_q, extra: None },
        u: TailField { p: u_p, q: u_q, extra: Some(tail) },
    })
}

/// `∂_z^{-1} ∂_s h₀(εt, ε(z+ρ)) = ε^{-1} ∫_{ε(z+ρ)}^∞ ∂_s h₀(εt, y) dy` with its two derivatives.
fn moving_tail(spec: &BottomSpec<f64>, grid: &Grid64, t: f64, rho: f64) -> Result<ClosedTail<f64>> {
    let e = spec.epsilon;
    let value =
        grid.points().iter().map(|&z| Ok(spec.h0_y_tail(e * t, e * (z + rho), 1)? / e)).collect::<Result<Vec<_>>>()?;
    let d1 = moving_bottom(spec, grid, t, rho, 1, 0)?.scale(-1.0);
    let d2 = moving_bottom(spec, grid, t, rho, 1, 1)?.scale(-e);
    Ok(ClosedTail { value: Field::new(grid, value)?, d1, d2 })
}

/// `(1 − ∂²)(Q_ω, R_ω)`, the direction multiplying `f₂`.
fn f2_direction(kd: &KernelData) -> Result<FieldPair64> {
    FieldPair::new(kd.profile().q.helmholtz(), kd.profile().r.helmholtz())
}

/// `f₂ = −⟨F₀, ΛQ_ω⟩ / ⟨(1−∂²)(Q_ω, R_ω), ΛQ_ω⟩`, which makes `⟨A₂, J(1−∂²)Q_ω⟩ = 0`.
pub fn f2_eval(kd: &KernelData, spec: &BottomSpec<f64>, t: f64, rho: f64, f1: f64) -> Result<f64> {
    if spec.is_flat() {
        return Ok(0.0);
    }
    let f0 = forcing_without_f2(kd, spec, t, rho, f1)?;
    Ok(-inner(&f0.values(), &kd.lambda)? / kd.slope)
}

/// Second-order correction and its checks.
#[derive(Clone, Debug)]
pub struct SecondOrder {
    pub a2: TailPair<f64>,
    pub forcing: TailPair<f64>,
    pub f1: f64,
    pub f2: f64,
    /// Relative kernel defect of the decaying subproblem.
    pub solve_defect: f64,
    /// Interior relative residual `max|L A₂ − F| / max|F|`.
    pub residual: f64,
    /// Relative `⟨A₂, Q'⟩` and `⟨A₂, J(1−∂²)Q⟩`.
    pub ortho_kernel: f64,
    pub ortho_vk: f64,
}

/// `L` applied to a bounded pair using the analytic derivatives of its tails.
pub fn apply_l_tail(op: &OperatorHandle<f64>, v: &TailPair<f64>) -> Result<FieldPair64> {
    let (p, w) = (&op.params, op.omega);
    let (x1, x2) = (v.eta.values(), v.u.values());
    let (d1, d2) = (v.eta.deriv2(), v.u.deriv2());
    let (r, q) = (op.profile.r.values(), op.profile.q.values());
    let n = r.len();
    let mut o1 = vec![0.0; n];
    let mut o2 = vec![0.0; n];
    for j in 0..n {
        let (a, b, a2, b2) = (x1.values()[j], x2.values()[j], d1.values()[j], d2.values()[j]);
        o1[j] = p.c * a2 + a - w * (b - b2) + q[j] * b;
        o2[j] = -w * (a - a2) + q[j] * a + p.a * b2 + b + r[j] * b;
    }
    FieldPair::new(Field::new(op.grid(), o1)?, Field::new(op.grid(), o2)?)
}

fn interior_mask(grid: &Grid64, margin: f64) -> Vec<bool> {
    let l = grid.half_length();
    grid.points().iter().map(|&x| x.abs() <= l - margin).collect()
}

fn relative_inner(a: &FieldPair64, b: &FieldPair64) -> Result<f64> {
    let den = (inner(a, a)? * inner(b, b)?).sqrt();
    Ok(if den == 0.0 { 0.0 } else { inner(a, b)?.abs() / den })
}

/// Solves `L A₂ = F` for the second-order correction at `(t, ω, ρ)`.
pub fn build_second_order(kd: &KernelData, spec: &BottomSpec<f64>, t: f64, rho: f64) -> Result<SecondOrder> {
    let g = kd.grid();
    if spec.is_flat() {
        let zero = TailPair::periodic(&FieldPair::zeros(g));
        return Ok(SecondOrder {
            a2: zero.clone(),
            forcing: zero,
            f1: 0.0,
            f2: 0.0,
            solve_defect: 0.0,
            residual: 0.0,
            ortho_kernel: 0.0,
            ortho_vk: 0.0,
        });
    }
    let f1 = f1_eval(kd, spec, t, rho)?;
    let mut forcing = forcing_without_f2(kd, spec, t, rho, f1)?;
    let f2 = -inner(&forcing.values(), &kd.lambda)? / kd.slope;
    forcing.add_periodic(&f2_direction(kd)?, f2);
    let (a2, solve_defect) = kd.op.bounded_rhs_solve(&forcing)?;

    let la = apply_l_tail(&kd.op, &a2)?;
    let fv = forcing.values();
    let mask = interior_mask(g, DEFAULT_MARGIN);
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (j, &m) in mask.iter().enumerate() {
        if m {
            num = num.max((la.eta.values()[j] - fv.eta.values()[j]).abs()).max((la.u.values()[j] - fv.u.values()[j]).abs());
            den = den.max(fv.eta.values()[j].abs()).max(fv.u.values()[j].abs());
        }
    }
    let vals = a2.values();
    let ortho_kernel = relative_inner(&vals, kd.op.kernel())?;
    let ortho_vk = relative_inner(&vals, &kd.profile().pair().helmholtz().swap())?;
    Ok(SecondOrder {
        a2,
        forcing,
        f1,
        f2,
        solve_defect,
        residual: if den > 0.0 { num / den } else { 0.0 },
        ortho_kernel,
        ortho_vk,
    })
}

/// `C⁶` smoothstep of degree 13 on `[0, 1]`.
pub fn smoothstep(s: f64) -> f64 {
    const N: u64 = 6;
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let binom = |n: u64, k: u64| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    let sum: f64 = (0..=N).map(|k| binom(N + k, k) * binom(2 * N + 1, N - k) * (-s).powi(k as i32)).sum();
    s.powi(N as i32 + 1) * sum
}

/// `χ_ε(z) = χ(εz)` with `χ = 1` on `[-1, 1]`, `0` outside `[-2, 2]`.
pub fn cutoff_chi(epsilon: f64, grid: &Grid64) -> Result<Field64> {
    if !(epsilon > 0.0) {
        return Err(WaveError::InvalidParameter("cutoff needs ε > 0".into()));
    }
    let support = 2.0 / epsilon;
    if support > grid.half_length() {
        return Err(WaveError::CutoffTooWide { support, half_length: grid.half_length() });
    }
    Ok(Field::from_fn(grid, |z| smoothstep(2.0 - (epsilon * z).abs())))
}

/// Which corrections enter the approximate solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    /// `W = ε(A₁, B₁)`.
    First,
    /// `W♯ = ε(A₁, B₁) + ε²χ_ε(A₂, B₂)`.
    Second,
}

/// The approximate solution at one time, in the co-moving variable `z = x − ρ`.
#[derive(Clone, Debug)]
pub struct ApproxState {
    pub t: f64,
    pub epsilon: f64,
    pub omega: f64,
    pub rho: f64,
    pub f1: f64,
    pub f2: f64,
    /// `(A₁, B₁) = −h₀(εt, ερ)(A₀, B₀)`.
    pub a1: FieldPair64,
    /// Sampled `(A₂, B₂)`; zero for [`Order::First`].
    pub a2: FieldPair64,
    pub chi: Field64,
    pub w_sharp: FieldPair64,
    pub second: Option<SecondOrder>,
}

impl ApproxState {
    /// `Q_ω + W♯`.
    pub fn total(&self, kd: &KernelData) -> FieldPair64 {
        &kd.profile().pair() + &self.w_sharp
    }
}

/// `ε(A₁, B₁) + ε²χ(A₂, B₂)`.
pub fn build_w_sharp(epsilon: f64, a1: &FieldPair64, a2: &FieldPair64, chi: &Field64) -> FieldPair64 {
    let mut w = a1.scale(epsilon);
    w.axpy(epsilon * epsilon, &a2.map(|f| f * chi));
    w
}

/// Builds the corrections at `(t, ρ)` for the speed held by `kd`.
pub fn build_state(kd: &KernelData, spec: &BottomSpec<f64>, t: f64, rho: f64, order: Order) -> Result<ApproxState> {
    let g = kd.grid();
    let e = spec.epsilon;
    let h0 = if spec.is_flat() { 0.0 } else { spec.h0(e * t, e * rho, 0, 0)? };
    let a1 = FieldPair::new(kd.first.a0.clone(), kd.first.b0.clone())?.scale(-h0);
    let chi = if spec.is_flat() { Field::constant(g, 1.0) } else { cutoff_chi(e, g)? };
    let (a2, second, f1, f2) = match order {
        Order::First => {
            let f1 = f1_eval(kd, spec, t, rho)?;
            let f2 = f2_eval(kd, spec, t, rho, f1)?;
            (FieldPair::zeros(g), None, f1, f2)
        }
        Order::Second => {
            let s = build_second_order(kd, spec, t, rho)?;
            (s.a2.values(), Some(s.clone()), s.f1, s.f2)
        }
    };
    let w_sharp = build_w_sharp(e, &a1, &a2, &chi);
    Ok(ApproxState { t, epsilon: e, omega: kd.omega(), rho, f1, f2, a1, a2, chi, w_sharp, second })
}

/// Lazily built [`KernelData`] on a speed lattice; `f₁`, `f₂` are interpolated linearly in `ω`.
pub struct KernelProvider {
    params: AbcdParams<f64>,
    branch: Branch,
    grid: Grid64,
    spacing: f64,
    seed: Option<SolitonProfile<f64>>,
    cache: Mutex<HashMap<i64, Arc<KernelData>>>,
}

impl KernelProvider {
    pub fn new(
        params: AbcdParams<f64>,
        branch: Branch,
        grid: Grid64,
        spacing: f64,
        seed: Option<SolitonProfile<f64>>,
    ) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(WaveError::InvalidParameter("lattice spacing must be positive".into()));
        }
        Ok(Self { params, branch, grid, spacing, seed, cache: Mutex::new(HashMap::new()) })
    }

    pub fn params(&self) -> &AbcdParams<f64> {
        &self.params
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn grid(&self) -> &Grid64 {
        &self.grid
    }

    pub fn seed(&self) -> Option<&SolitonProfile<f64>> {
        self.seed.as_ref()
    }

    /// Number of lattice nodes built so far.
    pub fn cached(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }

    fn node(&self, index: i64) -> Result<Arc<KernelData>> {
        if let Some(kd) = self.cache.lock().expect("cache lock").get(&index) {
            return Ok(kd.clone());
        }
        let omega = index as f64 * self.spacing;
        let kd = Arc::new(KernelData::new(&self.params, omega, self.branch, &self.grid, self.seed.as_ref())?);
        self.cache.lock().expect("cache lock").insert(index, kd.clone());
        Ok(kd)
    }

    /// Data at the lattice node nearest to `ω`.
    pub fn nearest(&self, omega: f64) -> Result<Arc<KernelData>> {
        self.node((omega / self.spacing).round() as i64)
    }

    /// `(f₁, f₂)` at `(t, ω, ρ)`.
    pub fn coefficients(&self, spec: &BottomSpec<f64>, t: f64, omega: f64, rho: f64) -> Result<(f64, f64)> {
        if spec.is_flat() {
            return Ok((0.0, 0.0));
        }
        let pos = omega / self.spacing;
        let i = pos.floor() as i64;
        let theta = pos - i as f64;
        let eval = |idx: i64| -> Result<(f64, f64)> {
            let kd = self.node(idx)?;
            let f1 = f1_eval(&kd, spec, t, rho)?;
            Ok((f1, f2_eval(&kd, spec, t, rho, f1)?))
        };
        let lo = eval(i)?;
        if theta < 1e-12 {
            return Ok(lo);
        }
        let hi = eval(i + 1)?;
        Ok((lo.0 + theta * (hi.0 - lo.0), lo.1 + theta * (hi.1 - lo.1)))
    }
}

/// Solution of `ω' = ε²f₁`, `ρ' = ω + ε²f₂` from `(ω₀, −ω₀T_ε)` at `t = −T_ε`.
#[derive(Clone, Debug)]
pub struct EffectiveTrajectory {
    pub epsilon: f64,
    pub t_epsilon: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub omega: Vec<f64>,
    pub rho: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

fn ode_rhs(provider: &KernelProvider, spec: &BottomSpec<f64>, t: f64, y: [f64; 2]) -> Result<([f64; 2], f64, f64)> {
    let e2 = spec.epsilon * spec.epsilon;
    let (f1, f2) = provider.coefficients(spec, t, y[0], y[1])?;
    Ok(([e2 * f1, y[0] + e2 * f2], f1, f2))
}

fn ode_step(provider: &KernelProvider, spec: &BottomSpec<f64>, t: f64, y: [f64; 2], h: f64) -> Result<[f64; 2]> {
    let add = |y: [f64; 2], k: [f64; 2], c: f64| [y[0] + c * k[0], y[1] + c * k[1]];
    let k1 = ode_rhs(provider, spec, t, y)?.0;
    let k2 = ode_rhs(provider, spec, t + 0.5 * h, add(y, k1, 0.5 * h))?.0;
    let k3 = ode_rhs(provider, spec, t + 0.5 * h, add(y, k2, 0.5 * h))?.0;
    let k4 = ode_rhs(provider, spec, t + h, add(y, k3, h))?.0;
    Ok([
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ])
}

/// RK4 integration of the modulation equations on `[−T_ε, t_end]` with step close to `dt`.
pub fn integrate_effective_ode(
    omega0: f64,
    spec: &BottomSpec<f64>,
    provider: &KernelProvider,
    t_end: f64,
    dt: f64,
) -> Result<EffectiveTrajectory> {
    let sonic = provider.params().sonic_speed()?;
    if !(omega0 > 0.0 && omega0 < sonic) {
        return Err(WaveError::Supersonic { omega: omega0, sonic });
    }
    if !(dt > 0.0) {
        return Err(WaveError::InvalidParameter("ODE step must be positive".into()));
    }
    let t_eps = spec.t_epsilon(DEFAULT_DELTA0, T_EPSILON_CAP);
    let t0 = -t_eps;
    if !(t_end > t0) {
        return Err(WaveError::InvalidParameter(format!("t_end = {t_end} precedes -T_ε = {t0}")));
    }
    let steps = ((t_end - t0) / dt).ceil().max(1.0) as usize;
    let h = (t_end - t0) / steps as f64;
    let mut y = [omega0, -omega0 * t_eps];
    let mut traj = EffectiveTrajectory {
        epsilon: spec.epsilon,
        t_epsilon: t_eps,
        dt: h,
        times: Vec::with_capacity(steps + 1),
        omega: Vec::with_capacity(steps + 1),
        rho: Vec::with_capacity(steps + 1),
        f1: Vec::with_capacity(steps + 1),
        f2: Vec::with_capacity(steps + 1),
    };
    for i in 0..=steps {
        let t = t0 + i as f64 * h;
        let (_, f1, f2) = ode_rhs(provider, spec, t, y)?;
        traj.times.push(t);
        traj.omega.push(y[0]);
        traj.rho.push(y[1]);
        traj.f1.push(f1);
        traj.f2.push(f2);
        if i == steps {
            break;
        }
        y = ode_step(provider, spec, t, y, h)?;
        if !(y[0] > 0.0 && y[0] < sonic) || !y[1].is_finite() {
            return Err(WaveError::SpeedExit { t: t + h, omega: y[0] });
        }
    }
    Ok(traj)
}

impl EffectiveTrajectory {
    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn omega_end(&self) -> f64 {
        *self.omega.last().expect("non-empty")
    }

    /// `(ω, ρ)` at any `t` in range, by one RK4 step from the preceding node.
    pub fn state_at(&self, t: f64, spec: &BottomSpec<f64>, provider: &KernelProvider) -> Result<(f64, f64)> {
        let (t0, t1) = (self.t_start(), self.t_end());
        if t < t0 - 1e-12 || t > t1 + 1e-12 {
            return Err(WaveError::InvalidParameter(format!("t = {t} outside [{t0}, {t1}]")));
        }
        let k = (((t - t0) / self.dt).floor().max(0.0) as usize).min(self.times.len() - 1);
        let h = t - self.times[k];
        if h.abs() < 1e-14 {
            return Ok((self.omega[k], self.rho[k]));
        }
        let y = ode_step(provider, spec, self.times[k], [self.omega[k], self.rho[k]], h)?;
        Ok((y[0], y[1]))
    }
}

/// Settings for [`residual_r_sharp`].
#[derive(Clone, Copy, Debug)]
pub struct ResidualOptions {
    /// Defaults to `min(1e−3, ε/10)`.
    pub delta_t: Option<f64>,
    pub margin: f64,
    pub order: Order,
    /// Repeat with `δt/2` and fail if the two norms disagree.
    pub richardson: bool,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self { delta_t: None, margin: DEFAULT_MARGIN, order: Order::Second, richardson: true }
    }
}

/// Norms of the residual and of the correction at one time.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub t: f64,
    pub epsilon: f64,
    pub omega: f64,
    pub rho: f64,
    pub f1: f64,
    pub f2: f64,
    pub delta_t: f64,
    /// Interior `H² × H²` norm of `S_h(Q_ω + W)`.
    pub norm: f64,
    /// Same with `δt/2`, when requested.
    pub norm_half_step: Option<f64>,
    pub w_l2: f64,
    pub w_linf: f64,
    pub w_dx_l2: f64,
}

/// Where the residual is measured.
pub struct ResidualContext<'a> {
    pub params: &'a AbcdParams<f64>,
    pub branch: Branch,
    /// Grid of the residual (usually larger than the provider's).
    pub grid: &'a Grid64,
    pub spec: &'a BottomSpec<f64>,
    pub trajectory: &'a EffectiveTrajectory,
    pub provider: &'a KernelProvider,
}

fn state_total(ctx: &ResidualContext<'_>, t: f64, order: Order) -> Result<(FieldPair64, f64, ApproxState)> {
    let (omega, rho) = ctx.trajectory.state_at(t, ctx.spec, ctx.provider)?;
    let kd = KernelData::new(ctx.params, omega, ctx.branch, ctx.grid, ctx.provider.seed())?;
    let st = build_state(&kd, ctx.spec, t, rho, order)?;
    Ok((st.total(&kd), rho, st))
}

/// `S_h(U)` at time `t` on a grid whose origin sits at the lab position `x_offset`.
pub fn apply_s_h(
    state: &FieldPair64,
    dt_state: &FieldPair64,
    params: &AbcdParams<f64>,
    spec: &BottomSpec<f64>,
    t: f64,
    x_offset: f64,
) -> Result<FieldPair64> {
    let g = state.grid();
    let field = |ds, dy| -> Result<Field64> {
        let v = g.points().iter().map(|&z| spec.eval(t, z + x_offset, ds, dy)).collect::<Result<Vec<_>>>()?;
        Field::new(g, v)
    };
    let (eta, u) = (&state.eta, &state.u);
    let h = field(0, 0)?;
    let flux1 = &(u + &u.deriv(2).scale(params.a)) + &(u * &(eta + &h));
    let flux2 = &(eta + &eta.deriv(2).scale(params.c)) + &(u * u).scale(0.5);
    let mut row1 = &dt_state.eta.helmholtz() + &flux1.deriv(1);
    row1 = &row1 + &(&field(1, 0)? - &field(1, 2)?.scale(params.a1));
    let mut row2 = &dt_state.u.helmholtz() + &flux2.deriv(1);
    row2.axpy(-params.c1, &field(2, 1)?);
    FieldPair::new(row1, row2)
}

/// `(∫_{|z| ≤ L − margin} f² + f'² + f''²)^{1/2}` summed over both components.
pub fn interior_h2_norm(v: &FieldPair64, margin: f64) -> f64 {
    let mask = interior_mask(v.grid(), margin);
    let dx = v.grid().dx();
    let mut acc = 0.0;
    for f in [&v.eta, &v.u] {
        let (d1, d2) = (f.deriv(1), f.deriv(2));
        for (j, &m) in mask.iter().enumerate() {
            if m {
                acc += f.values()[j].powi(2) + d1.values()[j].powi(2) + d2.values()[j].powi(2);
            }
        }
    }
    (acc * dx).sqrt()
}

fn residual_with(ctx: &ResidualContext<'_>, t: f64, dt: f64, centre: &(FieldPair64, f64, ApproxState), order: Order) -> Result<FieldPair64> {
    let (u0, rho0, _) = centre;
    let at = |tt: f64| -> Result<FieldPair64> {
        let (u, rho, _) = state_total(ctx, tt, order)?;
        Ok(u.shift(rho - rho0))
    };
    // Fourth-order centered difference.
    let (p1, m1, p2, m2) = (at(t + dt)?, at(t - dt)?, at(t + 2.0 * dt)?, at(t - 2.0 * dt)?);
    let dudt = (&(&p1 - &m1).scale(8.0) - &(&p2 - &m2)).scale(1.0 / (12.0 * dt));
    apply_s_h(u0, &dudt, ctx.params, ctx.spec, t, *rho0)
}

/// The residual field `S_h(Q_ω + W)` at `t` in the frame `z = x − ρ(t)`.
pub fn residual_field(ctx: &ResidualContext<'_>, t: f64, delta_t: f64, order: Order) -> Result<FieldPair64> {
    let centre = state_total(ctx, t, order)?;
    residual_with(ctx, t, delta_t, &centre, order)
}

/// Interior `H² × H²` norm of `S_h(Q_ω + W♯)` at `t`, with `∂_t` by a fourth-order centered
/// difference of the full construction at `t ± δt`, `t ± 2δt` along the effective trajectory.
pub fn residual_r_sharp(ctx: &ResidualContext<'_>, t: f64, opts: &ResidualOptions) -> Result<ResidualReport> {
    let eps = ctx.spec.epsilon;
    let dt = opts.delta_t.unwrap_or_else(|| (1e-3f64).min(eps / 10.0));
    if !(dt > 0.0) {
        return Err(WaveError::TimeStepTooLarge(dt));
    }
    let centre = state_total(ctx, t, opts.order)?;
    let field = residual_with(ctx, t, dt, &centre, opts.order)?;
    let norm = interior_h2_norm(&field, opts.margin);
    let norm_half_step = if opts.richardson {
        let half = residual_with(ctx, t, 0.5 * dt, &centre, opts.order)?;
        // The two fields differ by the time-difference error only.
        if interior_h2_norm(&(&field - &half), opts.margin) > 0.05 * norm + RICHARDSON_FLOOR {
            return Err(WaveError::TimeStepTooLarge(dt));
        }
        Some(interior_h2_norm(&half, opts.margin))
    } else {
        None
    };
    let st = &centre.2;
    let w = &st.w_sharp;
    let w_l2 = inner(w, w)?.sqrt();
    let wd = w.deriv(1);
    Ok(ResidualReport {
        t,
        epsilon: eps,
        omega: st.omega,
        rho: st.rho,
        f1: st.f1,
        f2: st.f2,
        delta_t: dt,
        norm,
        norm_half_step,
        w_l2,
        w_linf: w.max_abs(),
        w_dx_l2: inner(&wd, &wd)?.sqrt(),
    })
}
