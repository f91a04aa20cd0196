use wavelab_core::linop::{assemble_l, OperatorHandle};
use wavelab_core::model::AbcdParams;
use wavelab_core::solitary::*;
use wavelab_core::spectral::{h1h1_norm, inner, Field, FieldPair, Grid, GridRef, TailField, TailPair};

fn grid(n: usize) -> GridRef<f64> {
    Grid::new(n, 60.0).unwrap()
}

fn chen(alpha: f64, n: usize) -> SolitonProfile<f64> {
    chen_profile(alpha, Branch::Plus, &grid(n), &AbcdParams::chen()).unwrap()
}

/// Independent closed-form derivative of the plus-branch momentum.
fn dp_domega_closed(w: f64) -> f64 {
    let s = (w * w + 8.0).sqrt();
    let g = 0.375 * (w * w - 4.0 + w * s);
    let dg = 0.375 * (2.0 * w + s + w * w / s);
    let base = 1.0 + g / 3.0;
    16.0 / 5.0 * (2.0 * g * base.powf(-0.5) - g * g / 6.0 * base.powf(-1.5)) * dg
}

#[test]
fn momentum_of_alpha_one_profile() {
    let p = chen(1.0, 1024);
    let exact = 8.0 * 3f64.sqrt() / 5.0;
    assert!((p.momentum() - exact).abs() / exact < 1e-8);
    let closed = momentum_closed_form(p.omega, Branch::Plus);
    assert!((closed - exact).abs() / exact < 1e-12);
}

#[test]
fn minus_branch_momentum_formula_matches_quadrature() {
    let params = AbcdParams::chen();
    for &w in &[0.3, 0.5, 0.7] {
        let p = chen_profile(g_branch(w, Branch::Minus), Branch::Minus, &grid(1024), &params).unwrap();
        let closed = momentum_closed_form(w, Branch::Minus);
        assert!((p.momentum() - closed).abs() / closed.abs() < 1e-8, "{w}: {} vs {closed}", p.momentum());
    }
}

#[test]
fn plus_branch_momentum_vanishes_at_sonic_speed() {
    assert!(momentum_closed_form(1.0f64 - 1e-9, Branch::Plus).abs() < 1e-15);
}

#[test]
fn branch_monotonicity() {
    let ws: Vec<f64> = (0..40).map(|i| -0.95 + 0.05 * i as f64).collect();
    for w in ws.windows(2) {
        assert!(g_branch(w[1], Branch::Plus) > g_branch(w[0], Branch::Plus));
        assert!(g_branch(w[1], Branch::Minus) < g_branch(w[0], Branch::Minus));
    }
}

#[test]
fn stable_window_speeds() {
    for i in 1..45 {
        let alpha = -2.25 + 0.05 * i as f64;
        if alpha.abs() < 1e-12 {
            continue;
        }
        let w = chen_alpha_to_omega(alpha, Branch::Plus).unwrap();
        assert!(w > -1.0 && w < 1.0);
    }
}

#[test]
fn slope_is_negative_and_matches_closed_form() {
    let g = grid(512);
    let params = AbcdParams::chen();
    for i in 1..10 {
        let w = 0.1 * i as f64;
        let s = slope_dp_domega(&params, w, Branch::Plus, &g, None, 1e-4).unwrap();
        assert!(s < 0.0, "{w}: {s}");
        let exact = dp_domega_closed(w);
        assert!((s - exact).abs() / exact.abs() < 1e-4, "{w}: {s} vs {exact}");
    }
}

#[test]
fn slope_difference_quotient_is_second_order() {
    let g = grid(512);
    let params = AbcdParams::chen();
    let exact = dp_domega_closed(0.5);
    let e1 = (slope_dp_domega(&params, 0.5, Branch::Plus, &g, None, 0.02).unwrap() - exact).abs();
    let e2 = (slope_dp_domega(&params, 0.5, Branch::Plus, &g, None, 0.01).unwrap() - exact).abs();
    let order = (e1 / e2).log2();
    assert!((order - 2.0).abs() < 0.2, "{order}");
}

#[test]
fn operator_kernel_and_lambda_q_identity() {
    let p = chen(-1.0, 512);
    let op = assemble_l(&p).unwrap();
    assert!(op.symmetry_defect() < 1e-10);
    assert!(op.kernel_residual() < 1e-8, "{}", op.kernel_residual());
    let lq = lambda_q(&p.params, p.omega, Branch::Plus, p.grid(), None, 1e-4).unwrap();
    let lhs = op.apply(&lq);
    let rhs = p.pair().helmholtz().swap();
    let rel = h1h1_norm(&(&lhs - &rhs)) / h1h1_norm(&rhs);
    assert!(rel < 1e-4, "{rel}");
}

#[test]
fn spectrum_of_stable_profile_and_flat_operator() {
    let p = chen(-1.0, 512);
    let op = assemble_l(&p).unwrap();
    let s = op.lowest_spectrum(4).unwrap();
    assert_eq!(s.negative_count, 1);
    assert!(s.lowest_eigenvalues[1].abs() < 1e-6, "{:?}", s.lowest_eigenvalues);
    assert!(s.lowest_eigenvalues[2] > 1e-3);
    assert!(s.mu0.unwrap() > 0.0);
    let flat = OperatorHandle::flat(&AbcdParams::chen(), 0.5, p.grid()).unwrap();
    let fs = flat.lowest_spectrum(2).unwrap();
    assert_eq!(fs.negative_count, 0);
    assert!(fs.lowest_eigenvalues[0] >= 0.5 - 1e-10);
}

#[test]
fn unstable_amplitude_is_recorded() {
    let p = chen(-2.4, 512);
    let s = assemble_l(&p).unwrap().lowest_spectrum(4).unwrap();
    eprintln!("alpha=-2.4: negative_count={} lowest={:?}", s.negative_count, s.lowest_eigenvalues);
}

#[test]
fn constrained_solve_properties() {
    let p = chen(-1.0, 512);
    let op = assemble_l(&p).unwrap();
    let g = p.grid().clone();
    let rhs = FieldPair { eta: Field::zeros(&g), u: p.q.clone() };
    let a0 = op.constrained_solve(&rhs).unwrap();
    let res = &op.apply(&a0) - &rhs;
    assert!(res.max_abs() < 1e-8 * rhs.max_abs());
    assert!(inner(&a0, op.kernel()).unwrap().abs() < 1e-10);
    let even = |f: &Field<f64>| (f - &f.reflect()).max_abs();
    assert!(even(&a0.eta) < 1e-10 && even(&a0.u) < 1e-10);
    // Symmetry identity ⟨(A0,B0),(0,Q)⟩ = ⟨L(A0,B0),(A0,B0)⟩.
    let lhs = inner(&a0, &rhs).unwrap();
    let rhs2 = inner(&op.apply(&a0), &a0).unwrap();
    assert!((lhs - rhs2).abs() < 1e-10 * lhs.abs().max(1.0));

    let v = op.project_out_kernel(&FieldPair {
        eta: Field::from_fn(&g, |x| (-(x - 2.0) * (x - 2.0) / 3.0).exp()),
        u: Field::from_fn(&g, |x| x * (-x * x / 5.0).exp()),
    });
    let back = op.constrained_solve(&op.apply(&v)).unwrap();
    assert!((&back - &v).max_abs() < 1e-8);
}

#[test]
fn bounded_solve_agrees_on_decaying_data_and_far_field() {
    let p = chen(-1.0, 512);
    let op = assemble_l(&p).unwrap();
    let g = p.grid().clone();
    let rhs = FieldPair { eta: Field::zeros(&g), u: p.q.clone() };
    let (b, _) = op.bounded_rhs_solve(&TailPair::periodic(&rhs)).unwrap();
    let c = op.constrained_solve(&rhs).unwrap();
    assert!((&b.values() - &c).max_abs() < 1e-8);

    // F = (1,1)·(1 - tanh) style bounded datum: ∂z⁻¹ of a bump, constant at the left.
    let bump = Field::from_fn(&g, |x| (-(x - 30.0) * (x - 30.0)).exp());
    let tail = TailField { p: Field::zeros(&g), q: bump.clone(), extra: None };
    let f = TailPair { eta: tail.clone(), u: tail };
    let (a, _) = op.bounded_rhs_solve(&f).unwrap();
    let vals = a.values();
    let w = p.omega;
    let total = std::f64::consts::PI.sqrt();
    let expect = total / (1.0 - w);
    let j = 40; // x ≈ -55: far from the soliton, F ≈ total·(1,1)
    assert!((vals.eta.values()[j] - expect).abs() < 1e-6, "{} vs {expect}", vals.eta.values()[j]);
    assert!((vals.u.values()[j] - expect).abs() < 1e-6);
}

#[test]
fn vk_functional_matches_slope() {
    let g = grid(512);
    let params = AbcdParams::chen();
    for &w in &[0.3, 0.5, 0.7] {
        let p = profile_at(&params, w, Branch::Plus, &g, None).unwrap();
        let vk = assemble_l(&p).unwrap().vk_functional().unwrap();
        let slope = slope_dp_domega(&params, w, Branch::Plus, &g, None, 1e-4).unwrap();
        assert!(vk < 0.0 && slope < 0.0);
        assert!((vk - slope).abs() / slope.abs() < 1e-3, "{w}: {vk} vs {slope}");
    }
}

#[test]
fn coercivity_signs() {
    let p = chen(-1.0, 256);
    let op = assemble_l(&p).unwrap();
    let c = op.coercivity_check().unwrap();
    assert!(c.l2 > 0.0 && c.h1 > 0.0, "{c:?}");
    assert!(c.l2_single <= 0.0 && c.h1_single <= 0.0, "{c:?}");
    let flat = OperatorHandle::flat(&AbcdParams::chen(), 0.5, p.grid()).unwrap();
    let fc = flat.coercivity_check().unwrap();
    assert!(fc.l2 >= 0.5 - 1e-8, "{fc:?}");
}

#[test]
fn newton_for_general_parameters() {
    // Continuation from the Chen profile to a = -1.2, c = -1.
    let g = grid(256);
    let chen = chen_profile(g_branch(0.5, Branch::Plus), Branch::Plus, &g, &AbcdParams::chen()).unwrap();
    let params = AbcdParams::normalized(-1.2, -1.0, 1.0 / 3.0, 1.0);
    let p = newton_solitary(&params, 0.5, &chen, NewtonOptions::default()).unwrap();
    assert!(p.residual < 1e-10);
    assert_eq!(p.branch, Branch::Numeric);
    assert!(evenness_defect(&p) < 1e-10);
    let s = assemble_l(&p).unwrap().lowest_spectrum(3).unwrap();
    assert_eq!(s.negative_count, 1);
}
