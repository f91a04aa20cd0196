//! Energy, momentum, their exact time derivatives, local energy and the functional F₂.

use crate::error::{Result, WaveError};
use crate::evolve::Dynamics;
use crate::model::{AbcdParams, BottomSpec};
use crate::scalar::{lit, Real};
use crate::spectral::{Field, FieldPair};

/// One row of the diagnostics table.
#[derive(Clone, Copy, Debug)]
pub struct DiagnosticsRow<S> {
    pub t: S,
    pub h: S,
    pub h_h: S,
    pub p: S,
    pub dhh_dt: S,
    pub dp_dt: S,
    /// `∫η` and `∫u`.
    pub mass_eta: S,
    pub mass_u: S,
    pub e_loc: Option<S>,
    pub f2: Option<S>,
}

/// Column header of the diagnostics table (tab-separated).
pub const DIAGNOSTICS_HEADER: &str = "t\tH\tH_h\tP\tdHh_dt\tdP_dt\tmass_eta\tmass_u";

impl<S: Real> DiagnosticsRow<S> {
    pub fn to_line(&self) -> String {
        format!(
            "{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}",
            self.t, self.h, self.h_h, self.p, self.dhh_dt, self.dp_dt, self.mass_eta, self.mass_u
        )
    }
}

fn bottom<S: Real>(state: &FieldPair<S>, spec: &BottomSpec<S>, t: S, offset: S, ds: usize, dy: usize) -> Field<S> {
    let d = Dynamics { params: AbcdParams::chen(), bottom: *spec, dealias: false, x_offset: offset };
    d.bottom_field(state.grid(), t, ds, dy)
}

fn energy_density<S: Real>(state: &FieldPair<S>, params: &AbcdParams<S>, h: Option<&Field<S>>) -> Field<S> {
    let (ex, ux) = (state.eta.deriv(1), state.u.deriv(1));
    let half = lit::<S>(0.5);
    let n = state.eta.len();
    let v: Vec<S> = (0..n)
        .map(|j| {
            let (e, u) = (state.eta.values()[j], state.u.values()[j]);
            let (exj, uxj) = (ex.values()[j], ux.values()[j]);
            let hj = h.map_or(S::zero(), |h| h.values()[j]);
            half * (-params.a * uxj * uxj - params.c * exj * exj + u * u + e * e + u * u * (e + hj))
        })
        .collect();
    Field::new(state.grid(), v).expect("length")
}

/// `H = ½∫(−a u'² − c η'² + u² + η² + u²η)`.
pub fn energy_h<S: Real>(state: &FieldPair<S>, params: &AbcdParams<S>) -> S {
    energy_density(state, params, None).integral()
}

/// `H_h`: as `H` with `u²(η + h)` in the cubic term.
pub fn energy_hh<S: Real>(state: &FieldPair<S>, params: &AbcdParams<S>, spec: &BottomSpec<S>, t: S) -> S {
    energy_hh_at(state, params, spec, t, S::zero())
}

/// [`energy_hh`] with the grid shifted by `offset` in the lab frame.
pub fn energy_hh_at<S: Real>(state: &FieldPair<S>, params: &AbcdParams<S>, spec: &BottomSpec<S>, t: S, offset: S) -> S {
    let h = bottom(state, spec, t, offset, 0, 0);
    energy_density(state, params, Some(&h)).integral()
}

/// `P = ∫(ηu + η'u')`.
pub fn momentum_p<S: Real>(state: &FieldPair<S>) -> S {
    crate::solitary::momentum_quadrature(&state.eta, &state.u)
}

/// Exact `dH_h/dt` along the flow:
///
/// ```text
/// −a c₁∫u ∂t²∂x h + c₁∫(1+a+η+h) u H∂t²∂x h + c∫η ∂t h + c a₁∫η_x ∂x∂t h
///   + (a₁−1)∫((1+c)η + ½u²) H∂t h − a₁∫((1+c)η + ½u²) ∂t h + ½∫u² ∂t h
/// ```
/// with `H = (1 − ∂²)^{-1}`.
pub fn dhh_dt_rhs<S: Real>(state: &FieldPair<S>, params: &AbcdParams<S>, spec: &BottomSpec<S>, t: S) -> S {
    dhh_dt_rhs_at(state, params, spec, t, S::zero())
}

pub fn dhh_dt_rhs_at<S: Real>(state: &FieldPair<S>, params: &AbcdParams<S>, spec: &BottomSpec<S>, t: S, offset: S) -> S {
    if spec.is_flat() {
        return S::zero();
    }
    let p = params;
    let h = bottom(state, spec, t, offset, 0, 0);
    let ht = bottom(state, spec, t, offset, 1, 0);
    let htx = bottom(state, spec, t, offset, 1, 1);
    let httx = bottom(state, spec, t, offset, 2, 1);
    let h_httx = httx.helmholtz_inv();
    let h_ht = ht.helmholtz_inv();
    let ex = state.eta.deriv(1);
    let half = lit::<S>(0.5);
    let n = h.len();
    let mut acc = S::zero();
    for j in 0..n {
        let (e, u) = (state.eta.values()[j], state.u.values()[j]);
        let g = (S::one() + p.c) * e + half * u * u;
        acc += -p.a * p.c1 * u * httx.values()[j]
            + p.c1 * (S::one() + p.a + e + h.values()[j]) * u * h_httx.values()[j]
            + p.c * e * ht.values()[j]
            + p.c * p.a1 * ex.values()[j] * htx.values()[j]
            + (p.a1 - S::one()) * g * h_ht.values()[j]
            - p.a1 * g * ht.values()[j]
            + half * u * u * ht.values()[j];
    }
    acc * state.grid().dx()
}

/// Exact `dP/dt = −½∫∂x h u² − ∫u(1 − a₁∂²)∂t h − c₁∫∂x η ∂t² h`.
pub fn dp_dt_rhs<S: Real>(state: &FieldPair<S>, params: &AbcdParams<S>, spec: &BottomSpec<S>, t: S) -> S {
    dp_dt_rhs_at(state, params, spec, t, S::zero())
}

pub fn dp_dt_rhs_at<S: Real>(state: &FieldPair<S>, params: &AbcdParams<S>, spec: &BottomSpec<S>, t: S, offset: S) -> S {
    if spec.is_flat() {
        return S::zero();
    }
    let hx = bottom(state, spec, t, offset, 0, 1);
    let ht = bottom(state, spec, t, offset, 1, 0);
    let htxx = bottom(state, spec, t, offset, 1, 2);
    let htt = bottom(state, spec, t, offset, 2, 0);
    let ex = state.eta.deriv(1);
    let half = lit::<S>(0.5);
    let mut acc = S::zero();
    for j in 0..hx.len() {
        let u = state.u.values()[j];
        acc += -half * hx.values()[j] * u * u - u * (ht.values()[j] - params.a1 * htxx.values()[j])
            - params.c1 * ex.values()[j] * htt.values()[j];
    }
    acc * state.grid().dx()
}

/// `½∫ψ(−a u'² − c η'² + u² + η² + u²(η + h))` for a nonnegative weight `ψ`.
pub fn local_energy<S: Real>(
    state: &FieldPair<S>,
    psi: &Field<S>,
    params: &AbcdParams<S>,
    spec: &BottomSpec<S>,
    t: S,
) -> Result<S> {
    if psi.values().iter().any(|&v| v < S::zero()) {
        return Err(WaveError::InvalidParameter("local-energy weight must be nonnegative".into()));
    }
    let h = bottom(state, spec, t, S::zero(), 0, 0);
    let dens = energy_density(state, params, Some(&h));
    Ok((&dens * psi).integral())
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// `m₀ = −ε²ρ₂ ∫₀¹ ∂_s h₀(ε(τ + σρ₂), ερ) dσ` by 16-point Gauss–Legendre.
pub fn m0_eval<S: Real>(tau: S, rho2: S, rho: S, spec: &BottomSpec<S>) -> Result<S> {
    let (x, w) = gauss_legendre(16);
    let e = spec.epsilon;
    let mut acc = S::zero();
    for (xi, wi) in x.iter().zip(&w) {
        let sigma = lit::<S>(0.5 * (xi + 1.0));
        acc += lit::<S>(0.5 * wi) * spec.h0(e * (tau + sigma * rho2), e * rho, 1, 0)?;
    }
    Ok(-e * e * rho2 * acc)
}

/// Inputs to [`lyapunov_f2`] describing the reference wave and bottom.
#[derive(Clone, Copy, Debug)]
pub struct F2Context<'a, S: Real> {
    /// `U = (U₁, U₂)` in the co-moving variable.
    pub u_ref: &'a FieldPair<S>,
    /// `Q_ω` (second profile component) for the `m₀` term.
    pub q_omega: &'a Field<S>,
    pub omega: S,
    pub rho: S,
    pub m0: S,
    pub tau: S,
    pub params: &'a AbcdParams<S>,
    pub spec: &'a BottomSpec<S>,
}

/// F₂ = ½∫(−a u₂'² − c η₂'² + u₂² + η₂²) + ½∫(2U₂η₂u₂ + U₁u₂²) + ½∫u₂²(η₂ + h)
///      − ω∫(η₂'u₂' + η₂u₂) − m₀∫Q_ω u₂,
/// with `h` evaluated at the lab position `z + ρ`.
pub fn lyapunov_f2<S: Real>(eta2: &FieldPair<S>, ctx: &F2Context<'_, S>) -> S {
    let p = ctx.params;
    let (e, u) = (&eta2.eta, &eta2.u);
    let (ex, ux) = (e.deriv(1), u.deriv(1));
    let h = bottom(eta2, ctx.spec, ctx.tau, ctx.rho, 0, 0);
    let half = lit::<S>(0.5);
    let mut acc = S::zero();
    for j in 0..e.len() {
        let (ej, uj, exj, uxj) = (e.values()[j], u.values()[j], ex.values()[j], ux.values()[j]);
        let (u1, u2) = (ctx.u_ref.eta.values()[j], ctx.u_ref.u.values()[j]);
        acc += half * (-p.a * uxj * uxj - p.c * exj * exj + uj * uj + ej * ej)
            + half * (lit::<S>(2.0) * u2 * ej * uj + u1 * uj * uj)
            + half * uj * uj * (ej + h.values()[j])
            - ctx.omega * (exj * uxj + ej * uj)
            - ctx.m0 * ctx.q_omega.values()[j] * uj;
    }
    acc * e.grid().dx()
}

/// Full diagnostics row at `t` in the frame of `dynamics`.
pub fn diagnostics_row<S: Real>(state: &FieldPair<S>, dynamics: &Dynamics<S>, t: S) -> DiagnosticsRow<S> {
    let (p, b, off) = (&dynamics.params, &dynamics.bottom, dynamics.x_offset);
    DiagnosticsRow {
        t,
        h: energy_h(state, p),
        h_h: energy_hh_at(state, p, b, t, off),
        p: momentum_p(state),
        dhh_dt: dhh_dt_rhs_at(state, p, b, t, off),
        dp_dt: dp_dt_rhs_at(state, p, b, t, off),
        mass_eta: state.eta.integral(),
        mass_u: state.u.integral(),
        e_loc: None,
        f2: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(16);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let i30: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((i30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn zero_state_functionals_vanish() {
        let g = Grid::<f64>::new(64, 10.0).unwrap();
        let z = FieldPair::zeros(&g);
        let p = AbcdParams::chen();
        assert_eq!(energy_h(&z, &p), 0.0);
        assert_eq!(momentum_p(&z), 0.0);
        assert_eq!(dhh_dt_rhs(&z, &p, &BottomSpec::flat(), 0.0), 0.0);
    }

    #[test]
    fn m0_trivial_cases() {
        let b = BottomSpec::<f64>::gaussian(0.1);
        assert_eq!(m0_eval(0.3, 0.0, 1.0, &b).unwrap(), 0.0);
        assert_eq!(m0_eval(0.3, 2.0, 1.0, &BottomSpec::flat()).unwrap(), 0.0);
    }

    #[test]
    fn negative_weight_is_rejected() {
        let g = Grid::<f64>::new(64, 10.0).unwrap();
        let psi = Field::constant(&g, -1.0);
        let z = FieldPair::zeros(&g);
        assert!(local_energy(&z, &psi, &AbcdParams::chen(), &BottomSpec::flat(), 0.0).is_err());
    }
}
