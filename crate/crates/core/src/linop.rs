//! The linearized operator
//!
//! ```text
//! L = [ c∂² + 1            −ω(1 − ∂²) + Q   ]
//!     [ −ω(1 − ∂²) + Q     a∂² + 1 + R      ]
//! ```
//!
//! at a solitary wave, assembled densely in the `(η-block, u-block)` ordering.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, LU};
use rustfft::num_complex::Complex;

use crate::error::{Result, WaveError};
use crate::model::AbcdParams;
use crate::scalar::{abs, lit, to_f64, Real};
use crate::solitary::SolitonProfile;
use crate::spectral::{h1h1_norm, hm_norm_field, inner, Field, FieldPair, GridRef, TailField, TailPair};

/// Default cap on the dense matrix size `2n`.
pub const DENSE_CAP: usize = 4096;

/// Relative kernel-orthogonality tolerance for [`OperatorHandle::constrained_solve`].
pub const ORTHO_TOL: f64 = 1e-8;

/// Symmetric circulant matrix of the spectral second derivative.
pub fn d2_matrix<S: Real>(grid: &GridRef<S>) -> DMatrix<S> {
    let n = grid.n();
    let mut e0 = Field::zeros(grid);
    e0.values_mut()[0] = S::one();
    let col = e0.deriv(2);
    let c = col.values();
    let sym: Vec<S> = (0..n).map(|m| (c[m] + c[(n - m) % n]) * lit(0.5)).collect();
    DMatrix::from_fn(n, n, |i, j| sym[(i + n - j) % n])
}

/// Dense `2n × 2n` matrix of `L` at `(R, Q, ω)`.
pub fn assemble_matrix<S: Real>(params: &AbcdParams<S>, omega: S, r: &Field<S>, q: &Field<S>) -> Result<DMatrix<S>> {
    assemble_matrix_capped(params, omega, r, q, DENSE_CAP)
}

pub fn assemble_matrix_capped<S: Real>(
    params: &AbcdParams<S>,
    omega: S,
    r: &Field<S>,
    q: &Field<S>,
    cap: usize,
) -> Result<DMatrix<S>> {
    let n = r.len();
    if 2 * n > cap {
        return Err(WaveError::GridTooLarge { n: 2 * n, cap });
    }
    let d2 = d2_matrix(r.grid());
    let mut m = DMatrix::<S>::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let d = d2[(i, j)];
            let id = if i == j { S::one() } else { S::zero() };
            m[(i, j)] = params.c * d + id;
            let off = -omega * (id - d);
            m[(i, n + j)] = off;
            m[(n + i, j)] = off;
            m[(n + i, n + j)] = params.a * d + id;
        }
    }
    for i in 0..n {
        let qi = q.values()[i];
        m[(i, n + i)] += qi;
        m[(n + i, i)] += qi;
        m[(n + i, n + i)] += r.values()[i];
    }
    Ok(m)
}

/// Applies `L` spectrally.
pub fn apply_l<S: Real>(params: &AbcdParams<S>, omega: S, r: &Field<S>, q: &Field<S>, v: &FieldPair<S>) -> FieldPair<S> {
    let (e2, u2) = (v.eta.deriv(2), v.u.deriv(2));
    let n = r.len();
    let mut o1 = vec![S::zero(); n];
    let mut o2 = vec![S::zero(); n];
    for j in 0..n {
        let (e, u) = (v.eta.values()[j], v.u.values()[j]);
        let (e2j, u2j) = (e2.values()[j], u2.values()[j]);
        let (rj, qj) = (r.values()[j], q.values()[j]);
        o1[j] = params.c * e2j + e - omega * (u - u2j) + qj * u;
        o2[j] = -omega * (e - e2j) + qj * e + params.a * u2j + u + rj * u;
    }
    let g = r.grid();
    FieldPair { eta: Field::new(g, o1).expect("length"), u: Field::new(g, o2).expect("length") }
}

fn bordered_matrix<S: Real>(mat: &DMatrix<S>, constraints: &[FieldPair<S>]) -> DMatrix<S> {
    let m = mat.nrows();
    let k = constraints.len();
    let mut b = DMatrix::<S>::zeros(m + k, m + k);
    b.view_mut((0, 0), (m, m)).copy_from(mat);
    for (c, v) in constraints.iter().enumerate() {
        let vec = v.to_vec();
        let scale = S::one() / vec.iter().map(|&x| x * x).sum::<S>().sqrt();
        for (i, &x) in vec.iter().enumerate() {
            b[(i, m + c)] = x * scale;
            b[(m + c, i)] = x * scale;
        }
    }
    b
}

fn solve_lu<S: Real>(lu: &LU<S, nalgebra::Dyn, nalgebra::Dyn>, grid: &GridRef<S>, rhs: &FieldPair<S>, extra: usize) -> Result<FieldPair<S>> {
    let mut b = rhs.to_vec();
    b.extend(std::iter::repeat(S::zero()).take(extra));
    let sol = lu
        .solve(&DVector::from_vec(b))
        .ok_or_else(|| WaveError::Singular("bordered system is singular".into()))?;
    let n2 = 2 * grid.n();
    FieldPair::from_slice(grid, &sol.as_slice()[..n2])
}

/// Solves `[[A, C],[Cᵀ, 0]] [x; λ] = [b; 0]` with the constraint vectors `C`.
pub fn bordered_solve<S: Real>(mat: &DMatrix<S>, constraints: &[FieldPair<S>], rhs: &FieldPair<S>) -> Result<FieldPair<S>> {
    let lu = bordered_matrix(mat, constraints).lu();
    solve_lu(&lu, rhs.grid(), rhs, constraints.len())
}

/// Low-lying spectrum of `L`.
#[derive(Clone, Debug)]
pub struct SpectrumSummary<S> {
    pub lowest_eigenvalues: Vec<S>,
    pub negative_count: usize,
    /// `|λ_min|` when exactly one eigenvalue is negative.
    pub mu0: Option<S>,
    pub kernel_residual: S,
}

/// Constrained Rayleigh minima of `L`.
#[derive(Clone, Copy, Debug)]
pub struct CoercivityReport<S> {
    /// Minimum of `⟨Lv,v⟩/‖v‖²_{L²}` on `{Q'_ω, J(1−∂²)Q_ω}^⊥`.
    pub l2: S,
    /// Same, measured against `‖v‖²_{H¹×H¹}`.
    pub h1: S,
    /// Minima with only the `Q'_ω` constraint.
    pub l2_single: S,
    pub h1_single: S,
}

impl<S: Real> CoercivityReport<S> {
    /// The coercivity constant estimate in `H¹ × H¹`.
    pub fn c0(&self) -> S {
        self.h1
    }
}

/// `L` assembled at a profile, with a cached factorization of the bordered system.
pub struct OperatorHandle<S: Real> {
    pub profile: SolitonProfile<S>,
    pub params: AbcdParams<S>,
    pub omega: S,
    pub matrix: DMatrix<S>,
    kernel: FieldPair<S>,
    lu: OnceLock<LU<S, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl<S: Real> std::fmt::Debug for OperatorHandle<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorHandle").field("omega", &self.omega).field("size", &self.matrix.nrows()).finish()
    }
}

/// Assembles `L` at `profile`.
pub fn assemble_l<S: Real>(profile: &SolitonProfile<S>) -> Result<OperatorHandle<S>> {
    OperatorHandle::new(profile, DENSE_CAP)
}

impl<S: Real> OperatorHandle<S> {
    pub fn new(profile: &SolitonProfile<S>, cap: usize) -> Result<Self> {
        let matrix = assemble_matrix_capped(&profile.params, profile.omega, &profile.r, &profile.q, cap)?;
        Ok(Self {
            profile: profile.clone(),
            params: profile.params,
            omega: profile.omega,
            matrix,
            kernel: profile.derivative(),
            lu: OnceLock::new(),
        })
    }

    /// Flat operator `L₀` (profile replaced by zero) at speed `ω`.
    pub fn flat(params: &AbcdParams<S>, omega: S, grid: &GridRef<S>) -> Result<Self> {
        let zero = Field::zeros(grid);
        let profile = SolitonProfile {
            omega,
            branch: crate::solitary::Branch::Numeric,
            alpha: None,
            r: zero.clone(),
            q: zero,
            params: *params,
            residual: S::zero(),
            iterations: 0,
        };
        Self::new(&profile, DENSE_CAP)
    }

    pub fn grid(&self) -> &GridRef<S> {
        self.profile.grid()
    }

    /// `Q'_ω`.
    pub fn kernel(&self) -> &FieldPair<S> {
        &self.kernel
    }

    pub fn apply(&self, v: &FieldPair<S>) -> FieldPair<S> {
        apply_l(&self.params, self.omega, &self.profile.r, &self.profile.q, v)
    }

    /// `max |A − Aᵀ|`.
    pub fn symmetry_defect(&self) -> S {
        let m = &self.matrix;
        let mut d = S::zero();
        for i in 0..m.nrows() {
            for j in 0..i {
                d = d.max(abs(m[(i, j)] - m[(j, i)]));
            }
        }
        d
    }

    /// `‖L Q'‖_{L²} / ‖Q'‖_{H²}`.
    pub fn kernel_residual(&self) -> S {
        let lk = self.apply(&self.kernel);
        let num = inner(&lk, &lk).unwrap_or_else(|_| S::zero()).sqrt();
        let den = (hm_norm_field(&self.kernel.eta, 2).powi(2) + hm_norm_field(&self.kernel.u, 2).powi(2)).sqrt();
        num / den
    }

    fn eigenvalues_of(m: DMatrix<S>) -> Result<Vec<S>> {
        let mut ev: Vec<S> = m.symmetric_eigenvalues().iter().copied().collect();
        if ev.iter().any(|v| !v.is_finite()) {
            return Err(WaveError::Eigen("symmetric eigensolver produced non-finite eigenvalues".into()));
        }
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        Ok(ev)
    }

    /// Ascending eigenvalues (the `count` lowest) and the negative count.
    pub fn lowest_spectrum(&self, count: usize) -> Result<SpectrumSummary<S>> {
        let ev = Self::eigenvalues_of(self.matrix.clone())?;
        let neg_tol = lit::<S>(-1e-7);
        let negative_count = ev.iter().filter(|&&x| x < neg_tol).count();
        let mu0 = if negative_count == 1 { Some(-ev[0]) } else { None };
        Ok(SpectrumSummary {
            lowest_eigenvalues: ev.into_iter().take(count).collect(),
            negative_count,
            mu0,
            kernel_residual: self.kernel_residual(),
        })
    }

    fn lu(&self) -> &LU<S, nalgebra::Dyn, nalgebra::Dyn> {
        self.lu.get_or_init(|| bordered_matrix(&self.matrix, std::slice::from_ref(&self.kernel)).lu())
    }

    /// Relative defect `|⟨v, Q'⟩| / (‖v‖ ‖Q'‖)`.
    pub fn kernel_defect(&self, v: &FieldPair<S>) -> S {
        let num = abs(inner(v, &self.kernel).unwrap_or_else(|_| S::zero()));
        let den = (inner(v, v).unwrap_or_else(|_| S::zero()) * inner(&self.kernel, &self.kernel).unwrap_or_else(|_| S::one())).sqrt();
        if den == S::zero() {
            S::zero()
        } else {
            num / den
        }
    }

    /// Removes the `Q'` component of `v`.
    pub fn project_out_kernel(&self, v: &FieldPair<S>) -> FieldPair<S> {
        let k = &self.kernel;
        let c = inner(v, k).unwrap_or_else(|_| S::zero()) / inner(k, k).unwrap_or_else(|_| S::one());
        let mut out = v.clone();
        out.axpy(-c, k);
        out
    }

    /// The unique solution of `L x = rhs` orthogonal to `Q'`.
    pub fn constrained_solve(&self, rhs: &FieldPair<S>) -> Result<FieldPair<S>> {
        self.constrained_solve_with(rhs, lit(ORTHO_TOL))
    }

    pub fn constrained_solve_with(&self, rhs: &FieldPair<S>, tol: S) -> Result<FieldPair<S>> {
        let defect = self.kernel_defect(rhs);
        if defect > tol {
            return Err(WaveError::NotKernelOrthogonal(to_f64(defect)));
        }
        let x = solve_lu(self.lu(), self.grid(), rhs, 1)?;
        let res = &self.apply(&x) - rhs;
        let scale = rhs.max_abs().max(lit(1e-30));
        if res.max_abs() / scale > lit(1e-6) {
            return Err(WaveError::Singular(format!(
                "projected system nearly singular (relative residual {:e})",
                to_f64(res.max_abs() / scale)
            )));
        }
        Ok(x)
    }

    /// Solves `L A = F` for bounded `F = p + ∂_z^{-1} q` via `A = M F + L^{-1}(−(L − M^{-1}) M F)`,
    /// where `M(ω) = [[1, −ω], [−ω, 1]]^{-1}`. The returned field is orthogonal to `Q'`.
    ///
    /// Returns the solution and the relative kernel defect of the decaying correction
    /// (which is projected out before the constrained solve).
    pub fn bounded_rhs_solve(&self, rhs: &TailPair<S>) -> Result<(TailPair<S>, S)> {
        let w = self.omega;
        let det = S::one() / (S::one() - w * w);
        let x = TailPair { eta: rhs.eta.lin(det, &rhs.u, det * w), u: rhs.eta.lin(det * w, &rhs.u, det) };
        let (x1, x2) = (x.eta.values(), x.u.values());
        let (x1dd, x2dd) = (x.eta.deriv2(), x.u.deriv2());
        let (r, q) = (self.profile.r.values(), self.profile.q.values());
        let (p, nn) = (&self.params, r.len());
        let mut g1 = vec![S::zero(); nn];
        let mut g2 = vec![S::zero(); nn];
        for j in 0..nn {
            g1[j] = -(p.c * x1dd.values()[j] + w * x2dd.values()[j] + q[j] * x2.values()[j]);
            g2[j] = -(w * x1dd.values()[j] + q[j] * x1.values()[j] + p.a * x2dd.values()[j] + r[j] * x2.values()[j]);
        }
        let g = self.grid();
        let gpair = FieldPair { eta: Field::new(g, g1)?, u: Field::new(g, g2)? };
        let defect = self.kernel_defect(&gpair);
        let y = self.constrained_solve_with(&self.project_out_kernel(&gpair), lit(ORTHO_TOL))?;
        let mut out = x;
        out.add_periodic(&y, S::one());
        // Normalize the full bounded solution to be orthogonal to Q'.
        let vals = out.values();
        let k = &self.kernel;
        let c = inner(&vals, k)? / inner(k, k)?;
        out.add_periodic(k, -c);
        Ok((out, defect))
    }

    /// `⟨J(1−∂²)Q, L^{-1} J(1−∂²)Q⟩`.
    pub fn vk_functional(&self) -> Result<S> {
        let v = self.profile.pair().helmholtz().swap();
        let x = self.constrained_solve(&v)?;
        inner(&v, &x)
    }

    /// Constrained Rayleigh minima in `L²` and `H¹ × H¹`, with both constraints and with `Q'` only.
    pub fn coercivity_check(&self) -> Result<CoercivityReport<S>> {
        let g = self.grid().clone();
        let w1 = self.kernel.clone();
        let w2 = self.profile.pair().helmholtz().swap();
        let l2 = constrained_min(&self.matrix, &[w1.clone(), w2.clone()])?;
        let l2_single = constrained_min(&self.matrix, std::slice::from_ref(&w1))?;
        let sls = conjugate_h1(&self.matrix, &g);
        let s = |v: &FieldPair<S>| v.map(|f| inv_sqrt_helmholtz(f));
        let h1 = constrained_min(&sls, &[s(&w1), s(&w2)])?;
        let h1_single = constrained_min(&sls, &[s(&w1)])?;
        Ok(CoercivityReport { l2, h1, l2_single, h1_single })
    }
}

/// `(1 − ∂²)^{-1/2} f`.
pub fn inv_sqrt_helmholtz<S: Real>(f: &Field<S>) -> Field<S> {
    let values = f
        .grid()
        .apply_symbol(f.values(), |k| Complex::new(S::one() / (S::one() + k * k).sqrt(), S::zero()));
    Field::new(f.grid(), values).expect("length")
}

/// `S A S` with `S = diag((1 − ∂²)^{-1/2}, (1 − ∂²)^{-1/2})`, applied column by column.
fn conjugate_h1<S: Real>(a: &DMatrix<S>, grid: &GridRef<S>) -> DMatrix<S> {
    let apply_cols = |m: &DMatrix<S>| -> DMatrix<S> {
        let n = grid.n();
        let mut out = DMatrix::<S>::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            let col = m.column(j);
            let v = FieldPair::from_slice(grid, col.as_slice()).expect("size");
            let sv = v.map(inv_sqrt_helmholtz);
            out.view_mut((0, j), (n, 1)).copy_from_slice(sv.eta.values());
            out.view_mut((n, j), (n, 1)).copy_from_slice(sv.u.values());
        }
        out
    };
    let sa = apply_cols(a);
    let mut sas = apply_cols(&sa.transpose());
    let m = sas.nrows();
    for i in 0..m {
        for j in 0..i {
            let avg = (sas[(i, j)] + sas[(j, i)]) * lit(0.5);
            sas[(i, j)] = avg;
            sas[(j, i)] = avg;
        }
    }
    sas
}

/// Smallest eigenvalue of `A` restricted to the orthogonal complement of `constraints`.
fn constrained_min<S: Real>(a: &DMatrix<S>, constraints: &[FieldPair<S>]) -> Result<S> {
    let m = a.nrows();
    let mut basis: Vec<DVector<S>> = Vec::new();
    for c in constraints {
        let mut v = DVector::from_vec(c.to_vec());
        for b in &basis {
            let d = v.dot(b);
            v.axpy(-d, b, S::one());
        }
        let nrm = v.norm();
        if nrm > lit(1e-14) {
            basis.push(v / nrm);
        }
    }
    let k = basis.len();
    let mut u = DMatrix::<S>::zeros(m, k);
    for (j, b) in basis.iter().enumerate() {
        u.set_column(j, b);
    }
    let au = a * &u;
    let uau = u.transpose() * &au;
    let sigma = lit::<S>(1e4);
    // P A P + σ U Uᵀ with P = I − U Uᵀ.
    let mut pap = a.clone();
    pap -= &u * au.transpose();
    pap -= &au * u.transpose();
    pap += &u * (uau - DMatrix::<S>::identity(k, k) * sigma) * u.transpose();
    pap += &u * u.transpose() * (sigma + sigma);
    let ev = OperatorHandle::<S>::eigenvalues_of(pap)?;
    Ok(ev[0])
}

/// H¹ norm helper re-exported for reports.
pub fn h1_norm<S: Real>(v: &FieldPair<S>) -> S {
    h1h1_norm(v)
}

/// Zeroth-order block inverse `M(ω)` applied to a bounded pair.
pub fn apply_m<S: Real>(omega: S, f: &TailPair<S>) -> TailPair<S> {
    let det = S::one() / (S::one() - omega * omega);
    TailPair { eta: f.eta.lin(det, &f.u, det * omega), u: f.eta.lin(det * omega, &f.u, det) }
}

/// Bounded constant pair helper for far-field tests.
pub fn constant_tail<S: Real>(grid: &GridRef<S>, c: S) -> TailField<S> {
    TailField::periodic(Field::constant(grid, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solitary::{chen_profile, Branch};
    use crate::spectral::Grid;

    fn op(n: usize) -> OperatorHandle<f64> {
        let g = Grid::<f64>::new(n, 40.0).unwrap();
        let p = chen_profile(-1.0, Branch::Plus, &g, &AbcdParams::chen()).unwrap();
        assemble_l(&p).unwrap()
    }

    #[test]
    fn dense_matches_spectral_apply() {
        let h = op(128);
        let g = h.grid().clone();
        let v = FieldPair {
            eta: Field::from_fn(&g, |x| (-(x - 1.0) * (x - 1.0) / 4.0).exp()),
            u: Field::from_fn(&g, |x| x * (-x * x / 9.0).exp()),
        };
        let dense = &h.matrix * DVector::from_vec(v.to_vec());
        let spec = h.apply(&v).to_vec();
        let err = dense.iter().zip(&spec).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        assert!(h.symmetry_defect() < 1e-10);
    }

    #[test]
    fn m_block_inverts_zeroth_order_part() {
        let g = Grid::<f64>::new(64, 10.0).unwrap();
        let f = TailPair { eta: constant_tail(&g, 1.0), u: constant_tail(&g, 2.0) };
        let m = apply_m(0.3, &f).values();
        let (a, b) = (m.eta.values()[5], m.u.values()[5]);
        assert!((a - 0.3 * b - 1.0).abs() < 1e-14);
        assert!((-0.3 * a + b - 2.0).abs() < 1e-14);
    }

    #[test]
    fn dense_cap_is_enforced() {
        let g = Grid::<f64>::new(64, 10.0).unwrap();
        let z = Field::zeros(&g);
        assert!(matches!(
            assemble_matrix_capped(&AbcdParams::chen(), 0.5, &z, &z, 64),
            Err(WaveError::GridTooLarge { .. })
        ));
    }

    #[test]
    fn kernel_direction_is_rejected() {
        let h = op(128);
        assert!(matches!(h.constrained_solve(h.kernel()), Err(WaveError::NotKernelOrthogonal(_))));
    }
}
