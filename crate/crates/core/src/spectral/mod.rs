//! Periodic-grid spectral calculus on `[-L, L)`.

mod io;

pub use io::{read_binary, read_text, write_binary, write_text};

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, WaveError};
use crate::scalar::{abs, lit, Real};

/// Discretization of the line: `n` points on `[-L, L)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec<S> {
    pub n: usize,
    pub half_length: S,
}

impl<S: Real> GridSpec<S> {
    pub fn new(n: usize, half_length: S) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(WaveError::InvalidGrid(format!("n = {n} must be even and at least 16")));
        }
        if !(half_length > S::zero()) {
            return Err(WaveError::InvalidGrid(format!("half-length {half_length} must be positive")));
        }
        Ok(Self { n, half_length })
    }

    pub fn dx(&self) -> S {
        lit::<S>(2.0) * self.half_length / lit(self.n as f64)
    }

    pub fn x(&self, j: usize) -> S {
        -self.half_length + self.dx() * lit(j as f64)
    }

    /// Wavenumber of FFT bin `j`; the Nyquist bin carries `+πn/(2L)`.
    pub fn wavenumber(&self, j: usize) -> S {
        let m = if j <= self.n / 2 { j as f64 } else { j as f64 - self.n as f64 };
        S::pi() * lit(m) / self.half_length
    }
}

/// Shared grid: spec, wavenumbers and cached transform plans.
pub struct Grid<S: Real> {
    spec: GridSpec<S>,
    k: Vec<S>,
    fwd: Arc<dyn Fft<S>>,
    inv: Arc<dyn Fft<S>>,
}

impl<S: Real> fmt::Debug for Grid<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

pub type GridRef<S> = Arc<Grid<S>>;

impl<S: Real> Grid<S> {
    pub fn new(n: usize, half_length: S) -> Result<GridRef<S>> {
        Self::from_spec(GridSpec::new(n, half_length)?)
    }

    pub fn from_spec(spec: GridSpec<S>) -> Result<GridRef<S>> {
        let spec = GridSpec::new(spec.n, spec.half_length)?;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(spec.n);
        let inv = planner.plan_fft_inverse(spec.n);
        let k = (0..spec.n).map(|j| spec.wavenumber(j)).collect();
        Ok(Arc::new(Self { spec, k, fwd, inv }))
    }

    pub fn spec(&self) -> GridSpec<S> {
        self.spec
    }
    pub fn n(&self) -> usize {
        self.spec.n
    }
    pub fn half_length(&self) -> S {
        self.spec.half_length
    }
    pub fn dx(&self) -> S {
        self.spec.dx()
    }
    pub fn wavenumbers(&self) -> &[S] {
        &self.k
    }
    pub fn points(&self) -> Vec<S> {
        (0..self.spec.n).map(|j| self.spec.x(j)).collect()
    }

    pub(crate) fn forward(&self, values: &[S]) -> Vec<Complex<S>> {
        let mut buf: Vec<Complex<S>> = values.iter().map(|&v| Complex::new(v, S::zero())).collect();
        self.fwd.process(&mut buf);
        buf
    }

    /// Inverse transform including the `1/n` normalization; returns the real part.
    pub(crate) fn inverse(&self, mut spec: Vec<Complex<S>>) -> Vec<S> {
        self.inv.process(&mut spec);
        let scale = S::one() / lit(self.spec.n as f64);
        spec.into_iter().map(|c| c.re * scale).collect()
    }

    /// Applies a Fourier multiplier. At the Nyquist bin only the real part of the
    /// symbol is kept so that real input maps to real output.
    pub fn apply_symbol<F>(&self, values: &[S], symbol: F) -> Vec<S>
    where
        F: Fn(S) -> Complex<S>,
    {
        let mut spec = self.forward(values);
        let nyq = self.spec.n / 2;
        for (j, c) in spec.iter_mut().enumerate() {
            let mut s = symbol(self.k[j]);
            if j == nyq {
                s.im = S::zero();
            }
            *c = *c * s;
        }
        self.inverse(spec)
    }

    pub(crate) fn same(&self, other: &Grid<S>) -> bool {
        std::ptr::eq(self, other) || self.spec == other.spec
    }
}

/// A real field sampled on a grid.
#[derive(Clone)]
pub struct Field<S: Real> {
    grid: GridRef<S>,
    values: Vec<S>,
}

impl<S: Real> fmt::Debug for Field<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field").field("n", &self.values.len()).finish()
    }
}

/// Result of the right-anchored antiderivative.
#[derive(Clone, Debug)]
pub struct Antiderivative<S: Real> {
    pub field: Field<S>,
    /// `|f|` at the right edge of the input.
    pub edge_magnitude: S,
    /// Set when `edge_magnitude` exceeds the decay threshold.
    pub edge_warning: bool,
}

/// Default decay threshold for [`Field::antideriv_from_right`].
pub const ANTIDERIV_EDGE_THRESHOLD: f64 = 1e-8;

impl<S: Real> Field<S> {
    pub fn new(grid: &GridRef<S>, values: Vec<S>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(WaveError::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.n(),
                values.len()
            )));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub fn zeros(grid: &GridRef<S>) -> Self {
        Self { grid: grid.clone(), values: vec![S::zero(); grid.n()] }
    }

    pub fn constant(grid: &GridRef<S>, c: S) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.n()] }
    }

    pub fn from_fn(grid: &GridRef<S>, f: impl Fn(S) -> S) -> Self {
        let values = (0..grid.n()).map(|j| f(grid.spec.x(j))).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &GridRef<S> {
        &self.grid
    }
    pub fn values(&self) -> &[S] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<S> {
        self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.to_f64().is_some_and(f64::is_finite))
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination; panics on grids of different size.
    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Self {
        assert_eq!(self.len(), other.len(), "field length mismatch");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid.clone(), values }
    }

    pub fn scale(&self, c: S) -> Self {
        self.map(|v| v * c)
    }

    pub fn axpy(&mut self, c: S, other: &Self) {
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn max_abs(&self) -> S {
        crate::scalar::max_abs(&self.values)
    }

    /// Trapezoid (periodic) quadrature.
    pub fn integral(&self) -> S {
        self.grid.dx() * self.values.iter().copied().sum::<S>()
    }

    /// `∂_x^order f` via the symbol `(ik)^order`.
    pub fn deriv(&self, order: u32) -> Self {
        if order == 0 {
            return self.clone();
        }
        let values = self.grid.apply_symbol(&self.values, |k| {
            let ik = Complex::new(S::zero(), k);
            let mut p = Complex::new(S::one(), S::zero());
            for _ in 0..order {
                p = p * ik;
            }
            p
        });
        Self { grid: self.grid.clone(), values }
    }

    /// `(1 - ∂_x²)^{-1} f` via the symbol `1/(1+k²)`.
    pub fn helmholtz_inv(&self) -> Self {
        let values = self
            .grid
            .apply_symbol(&self.values, |k| Complex::new(S::one() / (S::one() + k * k), S::zero()));
        Self { grid: self.grid.clone(), values }
    }

    /// `(1 - ∂_x²) f`.
    pub fn helmholtz(&self) -> Self {
        let d2 = self.deriv(2);
        self.zip_map(&d2, |a, b| a - b)
    }

    /// Translation `f(x - delta)` by phase multiplication.
    pub fn shift(&self, delta: S) -> Self {
        let values = self.grid.apply_symbol(&self.values, |k| {
            let th = -k * delta;
            Complex::new(th.cos(), th.sin())
        });
        Self { grid: self.grid.clone(), values }
    }

    /// Reflection `f(-x)` on the grid (`x_j ↦ x_{n-j}`).
    pub fn reflect(&self) -> Self {
        let n = self.len();
        let values = (0..n).map(|j| self.values[(n - j) % n]).collect();
        Self { grid: self.grid.clone(), values }
    }

    /// Even part `(f(x) + f(-x))/2`.
    pub fn even_part(&self) -> Self {
        let r = self.reflect();
        self.zip_map(&r, |a, b| (a + b) * lit(0.5))
    }

    /// Zeroes modes with `|j| > n/3` (2/3 rule).
    pub fn dealias(&self) -> Self {
        let n = self.len();
        let cut = n / 3;
        let mut spec = self.grid.forward(&self.values);
        for (j, c) in spec.iter_mut().enumerate() {
            let m = if j <= n / 2 { j } else { n - j };
            if m > cut {
                *c = Complex::new(S::zero(), S::zero());
            }
        }
        Self { grid: self.grid.clone(), values: self.grid.inverse(spec) }
    }

    /// `∂_z^{-1} f = ∫_z^L f` by cumulative trapezoid anchored at the right edge,
    /// with Euler-Maclaurin end corrections from spectral derivatives.
    ///
    /// The periodic sample at `x = L` is taken to be `f(-L)`. The input should decay
    /// at both edges for the corrections to be spectrally accurate.
    pub fn antideriv_from_right(&self) -> Antiderivative<S> {
        self.antideriv_from_right_with(lit(ANTIDERIV_EDGE_THRESHOLD))
    }

    pub fn antideriv_from_right_with(&self, threshold: S) -> Antiderivative<S> {
        let n = self.len();
        let dx = self.grid.dx();
        let half = lit::<S>(0.5);
        let right = self.values[0];
        let mut out = vec![S::zero(); n];
        let mut acc = half * dx * (self.values[n - 1] + right);
        out[n - 1] = acc;
        for j in (0..n - 1).rev() {
            acc += half * dx * (self.values[j] + self.values[j + 1]);
            out[j] = acc;
        }
        // Euler-Maclaurin endpoint corrections up to O(dx^6).
        let d1 = self.deriv(1);
        let d3 = self.deriv(3);
        let c2 = dx * dx / lit(12.0);
        let c4 = dx.powi(4) / lit(720.0);
        let (d1r, d3r) = (d1.values[0], d3.values[0]);
        for j in 0..n {
            out[j] += -c2 * (d1r - d1.values[j]) + c4 * (d3r - d3.values[j]);
        }
        let edge = abs(right).max(abs(self.values[n - 1]));
        Antiderivative {
            field: Self { grid: self.grid.clone(), values: out },
            edge_magnitude: edge,
            edge_warning: edge > threshold,
        }
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.grid.same(&other.grid)
    }

    /// Converts the scalar type (for example `f64` → `f32`), rebuilding the grid.
    pub fn cast<T: Real>(&self) -> Result<Field<T>> {
        let g = Grid::<T>::new(self.grid.n(), lit(crate::scalar::to_f64(self.grid.half_length())))?;
        Field::new(&g, self.values.iter().map(|&v| lit(crate::scalar::to_f64(v))).collect())
    }
}

impl<S: Real> Add for &Field<S> {
    type Output = Field<S>;
    fn add(self, rhs: Self) -> Field<S> {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl<S: Real> Sub for &Field<S> {
    type Output = Field<S>;
    fn sub(self, rhs: Self) -> Field<S> {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl<S: Real> Mul for &Field<S> {
    type Output = Field<S>;
    fn mul(self, rhs: Self) -> Field<S> {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl<S: Real> Neg for &Field<S> {
    type Output = Field<S>;
    fn neg(self) -> Field<S> {
        self.map(|a| -a)
    }
}

/// The state pair `(η, u)`.
#[derive(Clone, Debug)]
pub struct FieldPair<S: Real> {
    pub eta: Field<S>,
    pub u: Field<S>,
}

impl<S: Real> FieldPair<S> {
    pub fn new(eta: Field<S>, u: Field<S>) -> Result<Self> {
        if !eta.same_grid(&u) {
            return Err(WaveError::GridMismatch);
        }
        Ok(Self { eta, u })
    }

    pub fn zeros(grid: &GridRef<S>) -> Self {
        Self { eta: Field::zeros(grid), u: Field::zeros(grid) }
    }

    pub fn grid(&self) -> &GridRef<S> {
        self.eta.grid()
    }

    pub fn map(&self, f: impl Fn(&Field<S>) -> Field<S>) -> Self {
        Self { eta: f(&self.eta), u: f(&self.u) }
    }

    pub fn scale(&self, c: S) -> Self {
        self.map(|f| f.scale(c))
    }

    pub fn axpy(&mut self, c: S, other: &Self) {
        self.eta.axpy(c, &other.eta);
        self.u.axpy(c, &other.u);
    }

    /// Component swap `J(η, u) = (u, η)`.
    pub fn swap(&self) -> Self {
        Self { eta: self.u.clone(), u: self.eta.clone() }
    }

    pub fn deriv(&self, order: u32) -> Self {
        self.map(|f| f.deriv(order))
    }

    pub fn helmholtz(&self) -> Self {
        self.map(Field::helmholtz)
    }

    pub fn shift(&self, delta: S) -> Self {
        self.map(|f| f.shift(delta))
    }

    pub fn is_finite(&self) -> bool {
        self.eta.is_finite() && self.u.is_finite()
    }

    pub fn max_abs(&self) -> S {
        self.eta.max_abs().max(self.u.max_abs())
    }

    /// Stacks `(η, u)` into one vector of length `2n`.
    pub fn to_vec(&self) -> Vec<S> {
        let mut v = self.eta.values().to_vec();
        v.extend_from_slice(self.u.values());
        v
    }

    pub fn from_slice(grid: &GridRef<S>, v: &[S]) -> Result<Self> {
        let n = grid.n();
        if v.len() != 2 * n {
            return Err(WaveError::InvalidGrid(format!("expected {} entries, got {}", 2 * n, v.len())));
        }
        Ok(Self { eta: Field::new(grid, v[..n].to_vec())?, u: Field::new(grid, v[n..].to_vec())? })
    }
}

impl<S: Real> Add for &FieldPair<S> {
    type Output = FieldPair<S>;
    fn add(self, rhs: Self) -> FieldPair<S> {
        FieldPair { eta: &self.eta + &rhs.eta, u: &self.u + &rhs.u }
    }
}

impl<S: Real> Sub for &FieldPair<S> {
    type Output = FieldPair<S>;
    fn sub(self, rhs: Self) -> FieldPair<S> {
        FieldPair { eta: &self.eta - &rhs.eta, u: &self.u - &rhs.u }
    }
}

/// A bounded, possibly non-decaying field stored as `p + ∂_z^{-1} q` with `p` and `q`
/// smooth and periodic-compatible. Derivatives are taken analytically:
/// `∂_z (p + ∂_z^{-1} q) = p' − q`.
#[derive(Clone, Debug)]
pub struct TailField<S: Real> {
    pub p: Field<S>,
    pub q: Field<S>,
    /// Optional closed-form contribution added to `∂_z^{-1} q`, with its own first and
    /// second derivatives (used for bottom terms whose antiderivative is known exactly).
    pub extra: Option<ClosedTail<S>>,
}

/// Sampled closed-form bounded term with its derivatives.
#[derive(Clone, Debug)]
pub struct ClosedTail<S: Real> {
    pub value: Field<S>,
    pub d1: Field<S>,
    pub d2: Field<S>,
}

impl<S: Real> ClosedTail<S> {
    fn scale(&self, c: S) -> Self {
        Self { value: self.value.scale(c), d1: self.d1.scale(c), d2: self.d2.scale(c) }
    }
    fn add(&self, o: &Self) -> Self {
        Self { value: &self.value + &o.value, d1: &self.d1 + &o.d1, d2: &self.d2 + &o.d2 }
    }
}

impl<S: Real> TailField<S> {
    pub fn periodic(p: Field<S>) -> Self {
        let q = Field::zeros(p.grid());
        Self { p, q, extra: None }
    }

    pub fn zeros(grid: &GridRef<S>) -> Self {
        Self::periodic(Field::zeros(grid))
    }

    /// Sampled values.
    pub fn values(&self) -> Field<S> {
        let mut v = &self.p + &self.q.antideriv_from_right().field;
        if let Some(e) = &self.extra {
            v = &v + &e.value;
        }
        v
    }

    pub fn deriv1(&self) -> Field<S> {
        let mut v = &self.p.deriv(1) - &self.q;
        if let Some(e) = &self.extra {
            v = &v + &e.d1;
        }
        v
    }

    pub fn deriv2(&self) -> Field<S> {
        let mut v = &self.p.deriv(2) - &self.q.deriv(1);
        if let Some(e) = &self.extra {
            v = &v + &e.d2;
        }
        v
    }

    pub fn scale(&self, c: S) -> Self {
        Self { p: self.p.scale(c), q: self.q.scale(c), extra: self.extra.as_ref().map(|e| e.scale(c)) }
    }

    /// `a·self + b·other`.
    pub fn lin(&self, a: S, other: &Self, b: S) -> Self {
        let extra = match (&self.extra, &other.extra) {
            (None, None) => None,
            (Some(x), None) => Some(x.scale(a)),
            (None, Some(y)) => Some(y.scale(b)),
            (Some(x), Some(y)) => Some(x.scale(a).add(&y.scale(b))),
        };
        Self { p: &self.p.scale(a) + &other.p.scale(b), q: &self.q.scale(a) + &other.q.scale(b), extra }
    }

    pub fn add_periodic(&mut self, f: &Field<S>, c: S) {
        self.p.axpy(c, f);
    }
}

/// A pair of bounded fields.
#[derive(Clone, Debug)]
pub struct TailPair<S: Real> {
    pub eta: TailField<S>,
    pub u: TailField<S>,
}

impl<S: Real> TailPair<S> {
    pub fn periodic(p: &FieldPair<S>) -> Self {
        Self { eta: TailField::periodic(p.eta.clone()), u: TailField::periodic(p.u.clone()) }
    }

    pub fn values(&self) -> FieldPair<S> {
        FieldPair { eta: self.eta.values(), u: self.u.values() }
    }

    pub fn scale(&self, c: S) -> Self {
        Self { eta: self.eta.scale(c), u: self.u.scale(c) }
    }

    pub fn add_periodic(&mut self, f: &FieldPair<S>, c: S) {
        self.eta.add_periodic(&f.eta, c);
        self.u.add_periodic(&f.u, c);
    }
}

/// `∫ f g` by periodic trapezoid.
pub fn inner_field<S: Real>(f: &Field<S>, g: &Field<S>) -> Result<S> {
    if !f.same_grid(g) {
        return Err(WaveError::GridMismatch);
    }
    Ok(f.grid().dx() * f.values().iter().zip(g.values()).map(|(&a, &b)| a * b).sum::<S>())
}

/// `∫ (p₁q₁ + p₂q₂)`.
pub fn inner<S: Real>(p: &FieldPair<S>, q: &FieldPair<S>) -> Result<S> {
    Ok(inner_field(&p.eta, &q.eta)? + inner_field(&p.u, &q.u)?)
}

/// `(∫ η² + η'² + u² + u'²)^{1/2}`.
pub fn h1h1_norm<S: Real>(p: &FieldPair<S>) -> S {
    let d = p.deriv(1);
    let s = |f: &Field<S>| inner_field(f, f).unwrap_or_else(|_| S::zero());
    (s(&p.eta) + s(&d.eta) + s(&p.u) + s(&d.u)).sqrt()
}

/// `‖f‖_{H^m}` with `m ≤ 2`, summing the squared L² norms of derivatives up to order `m`.
pub fn hm_norm_field<S: Real>(f: &Field<S>, m: u32) -> S {
    let mut acc = S::zero();
    for k in 0..=m {
        let d = f.deriv(k);
        acc += inner_field(&d, &d).unwrap_or_else(|_| S::zero());
    }
    acc.sqrt()
}

/// `L²` norm of a pair.
pub fn l2_norm<S: Real>(p: &FieldPair<S>) -> S {
    inner(p, p).unwrap_or_else(|_| S::zero()).sqrt()
}
