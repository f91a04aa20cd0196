//! Model constants and the slowly varying bottom `h(t,x) = ε h₀(εt, εx)`.

use crate::error::{Result, WaveError};
use crate::scalar::{abs, lit, to_f64, Real};

/// Dispersion constants `(a, b, c, d)` and bottom couplings `(a₁, c₁)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbcdParams<S> {
    pub a: S,
    pub b: S,
    pub c: S,
    pub d: S,
    pub a1: S,
    pub c1: S,
}

impl<S: Real> AbcdParams<S> {
    /// Physical family parametrized by the depth fraction `θ` and the splits `λ`, `μ`.
    pub fn from_theta(theta: S, lambda: S, mu: S) -> Result<Self> {
        if theta < S::zero() || theta > S::one() {
            return Err(WaveError::InvalidParameter(format!("theta = {theta} outside [0, 1]")));
        }
        let half = lit::<S>(0.5);
        let third = lit::<S>(1.0 / 3.0);
        let t2 = theta * theta;
        let one = S::one();
        Ok(Self {
            a: half * (t2 - third) * lambda,
            b: half * (t2 - third) * (one - lambda),
            c: half * (one - t2) * mu,
            d: half * (one - t2) * (one - mu),
            a1: half * ((one - lambda) * (t2 - third) + one - lit::<S>(2.0) * theta),
            c1: one - theta,
        })
    }

    /// Rescaled model with `b = d = 1`.
    pub fn normalized(a: S, c: S, a1: S, c1: S) -> Self {
        Self { a, b: S::one(), c, d: S::one(), a1, c1 }
    }

    /// `a = c = -1`, `b = d = 1`, default couplings `a₁ = 1/3`, `c₁ = 1`.
    pub fn chen() -> Self {
        Self::normalized(-S::one(), -S::one(), lit(1.0 / 3.0), S::one())
    }

    pub fn with_couplings(mut self, a1: S, c1: S) -> Self {
        self.a1 = a1;
        self.c1 = c1;
        self
    }

    /// `ω* = min(√(ac), 1)`.
    pub fn sonic_speed(&self) -> Result<S> {
        if self.a >= S::zero() || self.c >= S::zero() {
            return Err(WaveError::InvalidParameter(format!(
                "sonic speed needs a < 0 and c < 0 (a = {}, c = {})",
                self.a, self.c
            )));
        }
        Ok((self.a * self.c).sqrt().min(S::one()))
    }

    pub fn is_chen(&self) -> bool {
        let tol = lit::<S>(1e-14);
        abs(self.a + S::one()) < tol && abs(self.c + S::one()) < tol
    }

    /// `b = d > 0`, `a < 0`, `c < 0`.
    pub fn is_generic_hamiltonian(&self) -> bool {
        abs(self.b - self.d) < lit(1e-14) && self.b > S::zero() && self.a < S::zero() && self.c < S::zero()
    }

    pub fn is_normalized(&self) -> bool {
        abs(self.b - S::one()) < lit(1e-14) && abs(self.d - S::one()) < lit(1e-14)
    }
}

/// Shape family of `h₀(s, y)`, always a product `F(s - s₀) G(y - y₀)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BottomKind {
    /// `exp(-s²) exp(-y²)`.
    Gaussian,
    /// `sech²(k₀ s / 2) sech²(l₀ y / 2)`, decaying like `exp(-k₀|s|) exp(-l₀|y|)`.
    Sech2Product,
    /// Flat bottom.
    Zero,
}

impl std::str::FromStr for BottomKind {
    type Err = WaveError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "sech2" | "sech2-product" | "sech2_product" => Ok(Self::Sech2Product),
            "zero" | "flat" => Ok(Self::Zero),
            other => Err(WaveError::Config(format!("unknown bottom kind '{other}'"))),
        }
    }
}

/// The bottom `h(t, x) = ε · amplitude · h₀(εt, εx)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BottomSpec<S> {
    pub epsilon: S,
    pub amplitude: S,
    pub kind: BottomKind,
    pub k0: S,
    pub l0: S,
    pub s0: S,
    pub y0: S,
}

const EPS_RANGE: (f64, f64) = (1e-3, 0.5);

impl<S: Real> BottomSpec<S> {
    pub fn gaussian(epsilon: S) -> Self {
        Self {
            epsilon,
            amplitude: S::one(),
            kind: BottomKind::Gaussian,
            k0: S::one(),
            l0: S::one(),
            s0: S::zero(),
            y0: S::zero(),
        }
    }

    pub fn flat() -> Self {
        Self { kind: BottomKind::Zero, amplitude: S::zero(), ..Self::gaussian(lit(0.1)) }
    }

    pub fn with_centers(mut self, s0: S, y0: S) -> Self {
        self.s0 = s0;
        self.y0 = y0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let e = to_f64(self.epsilon);
        if !(EPS_RANGE.0..=EPS_RANGE.1).contains(&e) {
            return Err(WaveError::InvalidParameter(format!(
                "epsilon = {e} outside [{}, {}]",
                EPS_RANGE.0, EPS_RANGE.1
            )));
        }
        if self.kind == BottomKind::Sech2Product && (self.k0 <= S::zero() || self.l0 <= S::zero()) {
            return Err(WaveError::InvalidParameter("sech2 bottom needs k0, l0 > 0".into()));
        }
        Ok(())
    }

    pub fn is_flat(&self) -> bool {
        self.kind == BottomKind::Zero || self.amplitude == S::zero()
    }

    /// `T_ε = ε^{-1-δ₀}`, capped.
    pub fn t_epsilon(&self, delta0: S, cap: S) -> S {
        self.epsilon.powf(-(S::one() + delta0)).min(cap)
    }

    /// `∂_s^{ds} ∂_y^{dy} h₀(s, y)` including the amplitude, closed form.
    pub fn h0(&self, s: S, y: S, ds: usize, dy: usize) -> Result<S> {
        check_order(ds, dy)?;
        Ok(match self.kind {
            BottomKind::Zero => S::zero(),
            BottomKind::Gaussian => self.amplitude * gauss_d(s - self.s0, ds) * gauss_d(y - self.y0, dy),
            BottomKind::Sech2Product => {
                let ks = self.k0 * lit(0.5);
                let ky = self.l0 * lit(0.5);
                self.amplitude * sech2_d(ks, s - self.s0, ds) * sech2_d(ky, y - self.y0, dy)
            }
        })
    }

    /// `∫_y^∞ ∂_s^{ds} h₀(s, y') dy'`, closed form.
    pub fn h0_y_tail(&self, s: S, y: S, ds: usize) -> Result<S> {
        check_order(ds, 0)?;
        Ok(match self.kind {
            BottomKind::Zero => S::zero(),
            BottomKind::Gaussian => {
                let half_sqrt_pi = lit::<S>(0.5 * std::f64::consts::PI.sqrt());
                let erfc = lit::<S>(libm::erfc(to_f64(y - self.y0)));
                self.amplitude * gauss_d(s - self.s0, ds) * half_sqrt_pi * erfc
            }
            BottomKind::Sech2Product => {
                let ks = self.k0 * lit(0.5);
                let ky = self.l0 * lit(0.5);
                let tail = (S::one() - (ky * (y - self.y0)).tanh()) / ky;
                self.amplitude * sech2_d(ks, s - self.s0, ds) * tail
            }
        })
    }

    /// `∂_t^{ds} ∂_x^{dy} h(t, x) = ε^{1+ds+dy} (∂_s^{ds} ∂_y^{dy} h₀)(εt, εx)`.
    pub fn eval(&self, t: S, x: S, ds: usize, dy: usize) -> Result<S> {
        let e = self.epsilon;
        let v = self.h0(e * t, e * x, ds, dy)?;
        Ok(e.powi(1 + ds as i32 + dy as i32) * v)
    }

    /// `∫_x^∞ ∂_t^{ds} h(t, x') dx' = ε^{ds} ∫_{εx}^∞ ∂_s^{ds} h₀(εt, y) dy`.
    pub fn eval_x_tail(&self, t: S, x: S, ds: usize) -> Result<S> {
        let e = self.epsilon;
        Ok(e.powi(ds as i32) * self.h0_y_tail(e * t, e * x, ds)?)
    }
}

/// Free-function form of [`BottomSpec::eval`].
pub fn bottom_eval<S: Real>(spec: &BottomSpec<S>, t: S, x: S, ds: usize, dy: usize) -> Result<S> {
    spec.eval(t, x, ds, dy)
}

/// Free-function form of [`AbcdParams::sonic_speed`].
pub fn sonic_speed<S: Real>(p: &AbcdParams<S>) -> Result<S> {
    p.sonic_speed()
}

/// Free-function form of [`AbcdParams::from_theta`].
pub fn params_from_theta<S: Real>(theta: S, lambda: S, mu: S) -> Result<AbcdParams<S>> {
    AbcdParams::from_theta(theta, lambda, mu)
}

fn check_order(ds: usize, dy: usize) -> Result<()> {
    if ds > 2 || dy > 3 {
        Err(WaveError::UnsupportedOrder { ds, dy })
    } else {
        Ok(())
    }
}

/// `d^n/dx^n exp(-x²) = (-1)^n H_n(x) exp(-x²)` with physicists' Hermite `H_n`.
fn gauss_d<S: Real>(x: S, n: usize) -> S {
    let g = (-x * x).exp();
    let two = lit::<S>(2.0);
    let h = match n {
        0 => S::one(),
        1 => -two * x,
        2 => lit::<S>(4.0) * x * x - two,
        _ => -(lit::<S>(8.0) * x * x * x - lit::<S>(12.0) * x),
    };
    h * g
}

/// `d^n/dx^n sech²(κx)` for `n ≤ 3`.
fn sech2_d<S: Real>(kappa: S, x: S, n: usize) -> S {
    let t = (kappa * x).tanh();
    let s = S::one() - t * t;
    let two = lit::<S>(2.0);
    match n {
        0 => s,
        1 => -two * kappa * s * t,
        2 => two * kappa * kappa * (two * s * t * t - s * s),
        _ => lit::<S>(8.0) * kappa.powi(3) * s * t * (two * s - t * t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_zero_constants() {
        let p = AbcdParams::<f64>::from_theta(0.0, 1.0, 1.0).unwrap();
        assert!((p.a + 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(p.b, 0.0);
        assert!((p.c - 0.5).abs() < 1e-15);
        assert_eq!(p.d, 0.0);
        // a1 = ½((1-λ)(θ²-1/3) + 1 - 2θ) = ½ at θ=0, λ=1.
        assert!((p.a1 - 0.5).abs() < 1e-15);
        assert_eq!(p.c1, 1.0);
    }

    #[test]
    fn theta_one_kills_c_and_d() {
        let p = AbcdParams::<f64>::from_theta(1.0, 0.3, 0.7).unwrap();
        assert_eq!(p.c, 0.0);
        assert_eq!(p.d, 0.0);
        assert!(AbcdParams::<f64>::from_theta(1.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn sonic_speeds() {
        assert_eq!(AbcdParams::<f64>::chen().sonic_speed().unwrap(), 1.0);
        assert_eq!(AbcdParams::normalized(-4.0, -1.0, 0.0, 0.0).sonic_speed().unwrap(), 1.0);
        assert!((AbcdParams::<f64>::normalized(-0.25, -1.0, 0.0, 0.0).sonic_speed().unwrap() - 0.5).abs() < 1e-15);
        assert!(AbcdParams::normalized(0.25, -1.0, 0.0, 0.0).sonic_speed().is_err());
    }

    #[test]
    fn gaussian_value_at_origin() {
        let b = BottomSpec::<f64>::gaussian(0.1);
        assert!((b.eval(0.0, 0.0, 0, 0).unwrap() - 0.1).abs() < 1e-15);
        assert!(b.eval(0.0, 0.0, 3, 0).is_err());
        assert!(b.eval(0.0, 0.0, 0, 4).is_err());
    }

    #[test]
    fn flat_bottom_vanishes() {
        let b = BottomSpec::<f64>::flat();
        for ds in 0..=2 {
            for dy in 0..=3 {
                assert_eq!(b.eval(1.3, -2.0, ds, dy).unwrap(), 0.0);
            }
        }
    }

    fn fd_check(b: &BottomSpec<f64>) {
        let h = 1e-4;
        for &(s, y) in &[(0.3, -0.7), (-1.1, 0.4), (0.0, 1.9)] {
            for ds in 0..2 {
                for dy in 0..=3 {
                    let fd = (b.h0(s + h, y, ds, dy).unwrap() - b.h0(s - h, y, ds, dy).unwrap()) / (2.0 * h);
                    let exact = b.h0(s, y, ds + 1, dy).unwrap();
                    assert!((fd - exact).abs() < 1e-6, "s-deriv {ds},{dy}");
                }
            }
            for ds in 0..=2 {
                for dy in 0..3 {
                    let fd = (b.h0(s, y + h, ds, dy).unwrap() - b.h0(s, y - h, ds, dy).unwrap()) / (2.0 * h);
                    let exact = b.h0(s, y, ds, dy + 1).unwrap();
                    assert!((fd - exact).abs() < 1e-6, "y-deriv {ds},{dy}");
                }
            }
        }
    }

    #[test]
    fn closed_form_derivatives_match_finite_differences() {
        fd_check(&BottomSpec::<f64>::gaussian(0.1).with_centers(0.5, -0.2));
        let mut s = BottomSpec::<f64>::gaussian(0.1);
        s.kind = BottomKind::Sech2Product;
        s.k0 = 1.3;
        s.l0 = 0.8;
        fd_check(&s);
    }

    #[test]
    fn y_tail_is_right_antiderivative() {
        for kind in [BottomKind::Gaussian, BottomKind::Sech2Product] {
            let mut b = BottomSpec::<f64>::gaussian(0.1).with_centers(0.2, 0.3);
            b.kind = kind;
            for &y in &[-2.0, 0.0, 0.7] {
                let h = 1e-4;
                let fd = (b.h0_y_tail(0.4, y + h, 1).unwrap() - b.h0_y_tail(0.4, y - h, 1).unwrap()) / (2.0 * h);
                assert!((fd + b.h0(0.4, y, 1, 0).unwrap()).abs() < 1e-7);
            }
            assert!(b.h0_y_tail(0.4, 40.0, 0).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn time_derivative_chain_rule() {
        let b = BottomSpec::<f64>::gaussian(0.2);
        let dt = 1e-3;
        let (t, x) = (1.5, -2.5);
        let fd = (b.eval(t + dt, x, 0, 0).unwrap() - b.eval(t - dt, x, 0, 0).unwrap()) / (2.0 * dt);
        assert!((fd - b.eval(t, x, 1, 0).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn single_precision_params() {
        let p = AbcdParams::<f32>::from_theta(0.5, 0.25, 0.75).unwrap();
        assert!((p.a + p.b + p.c + p.d - 1.0 / 3.0).abs() < 1e-6);
    }
}
