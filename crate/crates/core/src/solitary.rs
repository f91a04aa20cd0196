//! Solitary-wave profiles `(R_ω, Q_ω)`: the explicit Chen family, branch maps and a
//! spectral Newton solver.

use crate::error::{Result, WaveError};
use crate::linop;
use crate::model::AbcdParams;
use crate::scalar::{abs, lit, to_f64, Real};
use crate::spectral::{inner_field, Field, FieldPair, GridRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
    Numeric,
}

impl Branch {
    fn sign<S: Real>(self) -> S {
        match self {
            Branch::Minus => -S::one(),
            _ => S::one(),
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = WaveError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" => Ok(Self::Plus),
            "-" | "minus" => Ok(Self::Minus),
            "numeric" => Ok(Self::Numeric),
            other => Err(WaveError::Config(format!("unknown branch '{other}'"))),
        }
    }
}

/// A traveling-wave pair `(R_ω, Q_ω)` sampled in the co-moving variable.
#[derive(Clone, Debug)]
pub struct SolitonProfile<S: Real> {
    pub omega: S,
    pub branch: Branch,
    pub alpha: Option<S>,
    pub r: Field<S>,
    pub q: Field<S>,
    pub params: AbcdParams<S>,
    /// Sup-norm residual of the profile equations.
    pub residual: S,
    /// Newton iterations spent (zero for analytic profiles).
    pub iterations: usize,
}

impl<S: Real> SolitonProfile<S> {
    pub fn grid(&self) -> &GridRef<S> {
        self.r.grid()
    }

    /// `(η, u) = (R, Q)`.
    pub fn pair(&self) -> FieldPair<S> {
        FieldPair { eta: self.r.clone(), u: self.q.clone() }
    }

    /// `Q'_ω = (R', Q')`, the translation mode.
    pub fn derivative(&self) -> FieldPair<S> {
        self.pair().deriv(1)
    }

    /// `∫ (RQ + R'Q')`.
    pub fn momentum(&self) -> S {
        momentum_quadrature(&self.r, &self.q)
    }

    pub fn shifted(&self, delta: S) -> FieldPair<S> {
        self.pair().shift(delta)
    }
}

/// `∫ (RQ + R'Q')` on sampled fields.
pub fn momentum_quadrature<S: Real>(r: &Field<S>, q: &Field<S>) -> S {
    let (dr, dq) = (r.deriv(1), q.deriv(1));
    inner_field(r, q).unwrap_or_else(|_| S::zero()) + inner_field(&dr, &dq).unwrap_or_else(|_| S::zero())
}

/// Left-hand sides of the profile equations at speed `ω`.
pub fn profile_residual<S: Real>(params: &AbcdParams<S>, omega: S, r: &Field<S>, q: &Field<S>) -> FieldPair<S> {
    let half = lit::<S>(0.5);
    let (hr, hq) = (r.helmholtz(), q.helmholtz());
    let (r2, q2) = (r.deriv(2), q.deriv(2));
    let n = r.len();
    let mut e1 = vec![S::zero(); n];
    let mut e2 = vec![S::zero(); n];
    let (rv, qv) = (r.values(), q.values());
    for j in 0..n {
        e1[j] = -omega * hr.values()[j] + params.a * q2.values()[j] + qv[j] + rv[j] * qv[j];
        e2[j] = -omega * hq.values()[j] + params.c * r2.values()[j] + rv[j] + half * qv[j] * qv[j];
    }
    let g = r.grid();
    FieldPair { eta: Field::new(g, e1).expect("length"), u: Field::new(g, e2).expect("length") }
}

/// `ω = ±(3 + 2α)/√(3(3 + α))`.
pub fn chen_alpha_to_omega<S: Real>(alpha: S, sign: Branch) -> Result<S> {
    if alpha <= lit(-3.0) || alpha == S::zero() {
        return Err(WaveError::InvalidParameter(format!("Chen amplitude {alpha} outside (-3, ∞) \\ {{0}}")));
    }
    let three = lit::<S>(3.0);
    Ok(sign.sign::<S>() * (three + alpha + alpha) / (three * (three + alpha)).sqrt())
}

/// `G_±(ω) = 3/8 (ω² − 4 ± ω√(ω² + 8))`, the amplitude with `chen_alpha_to_omega(G_±(ω), ±) = ω`.
pub fn g_branch<S: Real>(omega: S, sign: Branch) -> S {
    let w2 = omega * omega;
    lit::<S>(0.375) * (w2 - lit(4.0) + sign.sign::<S>() * omega * (w2 + lit(8.0)).sqrt())
}

/// Exact Chen profile for `a = c = −1`: `R = α sech²(x/2)`, `Q = ±α√(3/(3+α)) sech²(x/2)`.
pub fn chen_profile<S: Real>(
    alpha: S,
    sign: Branch,
    grid: &GridRef<S>,
    params: &AbcdParams<S>,
) -> Result<SolitonProfile<S>> {
    if !params.is_chen() {
        return Err(WaveError::InvalidParameter(format!(
            "Chen profiles need a = c = -1 (a = {}, c = {})",
            params.a, params.c
        )));
    }
    if sign == Branch::Numeric {
        return Err(WaveError::InvalidParameter("Chen profiles need a ± branch".into()));
    }
    let omega = chen_alpha_to_omega(alpha, sign)?;
    let three = lit::<S>(3.0);
    let beta = sign.sign::<S>() * alpha * (three / (three + alpha)).sqrt();
    let sech2 = |x: S| {
        let c = (x * lit(0.5)).cosh();
        S::one() / (c * c)
    };
    let r = Field::from_fn(grid, |x| alpha * sech2(x));
    let q = Field::from_fn(grid, |x| beta * sech2(x));
    let residual = profile_residual(params, omega, &r, &q).max_abs();
    Ok(SolitonProfile { omega, branch: sign, alpha: Some(alpha), r, q, params: *params, residual, iterations: 0 })
}

/// Closed-form momentum of the Chen branches.
pub fn momentum_closed_form<S: Real>(omega: S, sign: Branch) -> S {
    let three = lit::<S>(3.0);
    let gp = g_branch(omega, Branch::Plus);
    match sign {
        Branch::Minus => {
            let gm = g_branch(omega, Branch::Minus);
            lit::<S>(-32.0 / 5.0) * gm * gm * (S::one() + gp / three).sqrt()
        }
        _ => lit::<S>(16.0 / 5.0) * gp * gp / (S::one() + gp / three).sqrt(),
    }
}

/// Closed-form energy `18/5 (1 + ω² (G_±(ω) − 1))`.
pub fn energy_closed_form<S: Real>(omega: S, sign: Branch) -> S {
    let g = g_branch(omega, sign);
    lit::<S>(18.0 / 5.0) * (S::one() + omega * omega * (g - S::one()))
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions<S> {
    pub tol: S,
    pub max_iter: usize,
    /// Step factor applied when the residual increases.
    pub damping: S,
}

impl<S: Real> Default for NewtonOptions<S> {
    fn default() -> Self {
        Self { tol: lit(1e-10), max_iter: 50, damping: lit(0.5) }
    }
}

/// Newton iteration on the profile equations, even-symmetrized every step.
pub fn newton_solitary<S: Real>(
    params: &AbcdParams<S>,
    omega: S,
    seed: &SolitonProfile<S>,
    opts: NewtonOptions<S>,
) -> Result<SolitonProfile<S>> {
    let sonic = params.sonic_speed()?;
    if !(omega > S::zero() && omega < sonic) {
        return Err(WaveError::Supersonic { omega: to_f64(omega), sonic: to_f64(sonic) });
    }
    let mut r = seed.r.even_part();
    let mut q = seed.q.even_part();
    let mut res = profile_residual(params, omega, &r, &q);
    let mut res_norm = res.max_abs();
    let mut it = 0;
    while res_norm >= opts.tol {
        if it == opts.max_iter {
            return Err(WaveError::NewtonDiverged { iterations: it, residual: to_f64(res_norm) });
        }
        it += 1;
        let mat = linop::assemble_matrix(params, omega, &r, &q)?;
        let kernel = FieldPair { eta: r.deriv(1), u: q.deriv(1) };
        // L = J·(Jacobian of the profile map), so the Newton step solves L δ = −J F.
        let rhs = res.swap().scale(-S::one());
        let step = linop::bordered_solve(&mat, &[kernel], &rhs)?;
        let (dr, dq) = (step.eta.even_part(), step.u.even_part());
        let mut lambda = S::one();
        loop {
            let tr = { let mut f = r.clone(); f.axpy(lambda, &dr); f };
            let tq = { let mut f = q.clone(); f.axpy(lambda, &dq); f };
            let tres = profile_residual(params, omega, &tr, &tq);
            let tn = tres.max_abs();
            if tn < res_norm || lambda < lit(1e-3) {
                r = tr;
                q = tq;
                res = tres;
                res_norm = tn;
                break;
            }
            lambda *= opts.damping;
        }
        let size = r.max_abs().max(q.max_abs());
        if size < lit(1e-6) {
            return Err(WaveError::ZeroProfile);
        }
    }
    let alpha = if params.is_chen() && seed.alpha.is_some() { Some(r.values()[r.len() / 2]) } else { None };
    let branch = if params.is_chen() { seed.branch } else { Branch::Numeric };
    Ok(SolitonProfile { omega, branch, alpha, r, q, params: *params, residual: res_norm, iterations: it })
}

/// Profile at speed `ω` on `grid`. For `a = c = −1` on a `±` branch the Chen profile
/// seeds Newton (which then returns it unchanged); otherwise `seed` is required.
pub fn profile_at<S: Real>(
    params: &AbcdParams<S>,
    omega: S,
    branch: Branch,
    grid: &GridRef<S>,
    seed: Option<&SolitonProfile<S>>,
) -> Result<SolitonProfile<S>> {
    let opts = NewtonOptions::default();
    if params.is_chen() && branch != Branch::Numeric {
        let alpha = g_branch(omega, branch);
        let chen = chen_profile(alpha, branch, grid, params)?;
        return newton_solitary(params, omega, &chen, opts);
    }
    let seed = seed.ok_or_else(|| WaveError::InvalidParameter("numeric profiles need a seed".into()))?;
    newton_solitary(params, omega, seed, opts)
}

/// Centered difference of the quadrature momentum of Newton profiles at `ω ± δω`.
pub fn slope_dp_domega<S: Real>(
    params: &AbcdParams<S>,
    omega: S,
    branch: Branch,
    grid: &GridRef<S>,
    seed: Option<&SolitonProfile<S>>,
    delta: S,
) -> Result<S> {
    let plus = profile_at(params, omega + delta, branch, grid, seed)?;
    let minus = profile_at(params, omega - delta, branch, grid, seed)?;
    Ok((plus.momentum() - minus.momentum()) / (delta + delta))
}

/// `ΛQ_ω = ∂_ω(R_ω, Q_ω)` by centered differences of Newton profiles.
pub fn lambda_q<S: Real>(
    params: &AbcdParams<S>,
    omega: S,
    branch: Branch,
    grid: &GridRef<S>,
    seed: Option<&SolitonProfile<S>>,
    delta: S,
) -> Result<FieldPair<S>> {
    let plus = profile_at(params, omega + delta, branch, grid, seed)?;
    let minus = profile_at(params, omega - delta, branch, grid, seed)?;
    Ok((&plus.pair() - &minus.pair()).scale(S::one() / (delta + delta)))
}

/// Even-symmetry defect `max |f(x) − f(−x)|` over both components.
pub fn evenness_defect<S: Real>(p: &SolitonProfile<S>) -> S {
    let d = |f: &Field<S>| (f - &f.reflect()).max_abs();
    d(&p.r).max(d(&p.q))
}

/// Largest boundary magnitude `max(|R|, |Q|)` at `x = −L`.
pub fn edge_magnitude<S: Real>(p: &SolitonProfile<S>) -> S {
    abs(p.r.values()[0]).max(abs(p.q.values()[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    fn grid() -> GridRef<f64> {
        Grid::<f64>::new(1024, 60.0).unwrap()
    }

    #[test]
    fn chen_speeds() {
        assert!(chen_alpha_to_omega(-1.5f64, Branch::Plus).unwrap().abs() < 1e-15);
        assert!((chen_alpha_to_omega(-1.0, Branch::Plus).unwrap() - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((chen_alpha_to_omega(-2.25f64, Branch::Plus).unwrap() + 1.0).abs() < 1e-15);
        assert!(chen_alpha_to_omega(-3.0, Branch::Plus).is_err());
        assert!(chen_alpha_to_omega(0.0, Branch::Plus).is_err());
    }

    #[test]
    fn branch_map_values() {
        assert!((g_branch(0.0f64, Branch::Plus) + 1.5).abs() < 1e-15);
        assert!(g_branch(1.0f64, Branch::Plus).abs() < 1e-15);
        for &w in &[0.2f64, 0.5, 0.8] {
            for b in [Branch::Plus, Branch::Minus] {
                let back = chen_alpha_to_omega(g_branch(w, b), b).unwrap();
                assert!((back - w).abs() < 1e-12, "{w} {b:?}");
            }
        }
    }

    #[test]
    fn chen_profile_is_exact() {
        let p = chen_profile(-1.0, Branch::Plus, &grid(), &AbcdParams::chen()).unwrap();
        assert!(p.residual < 1e-10, "{}", p.residual);
        assert!((p.r.values()[512] + 1.0).abs() < 1e-15);
        assert!((p.q.values()[512] + 1.5f64.sqrt()).abs() < 1e-14);
        assert!(evenness_defect(&p) < 1e-14);
        assert!(edge_magnitude(&p) < 1e-10);
    }

    #[test]
    fn chen_profile_rejects_other_params() {
        let p = AbcdParams::normalized(-2.0, -1.0, 0.0, 1.0);
        assert!(chen_profile(-1.0, Branch::Plus, &grid(), &p).is_err());
    }

    #[test]
    fn energy_closed_form_at_rest() {
        assert!((energy_closed_form(0.0f64, Branch::Plus) - 3.6).abs() < 1e-15);
    }

    #[test]
    fn newton_fixed_point_and_basin() {
        let g = Grid::<f64>::new(256, 40.0).unwrap();
        let params = AbcdParams::chen();
        let exact = chen_profile(-1.0, Branch::Plus, &g, &params).unwrap();
        let same = newton_solitary(&params, exact.omega, &exact, NewtonOptions::default()).unwrap();
        assert!(same.iterations <= 2);
        let mut seed = exact.clone();
        seed.r = seed.r.scale(1.1);
        seed.q = seed.q.scale(1.1);
        let back = newton_solitary(&params, exact.omega, &seed, NewtonOptions::default()).unwrap();
        let diff = crate::spectral::h1h1_norm(&(&back.pair() - &exact.pair()));
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn newton_rejects_supersonic() {
        let g = Grid::<f64>::new(64, 20.0).unwrap();
        let params = AbcdParams::chen();
        let seed = chen_profile(-1.0, Branch::Plus, &g, &params).unwrap();
        assert!(matches!(
            newton_solitary(&params, 1.2, &seed, NewtonOptions::default()),
            Err(WaveError::Supersonic { .. })
        ));
    }
}
