use wavelab_core::diagnostics::{
    dhh_dt_rhs, dp_dt_rhs, energy_h, energy_hh, local_energy, lyapunov_f2, m0_eval, momentum_p, F2Context,
};
use wavelab_core::evolve::{
    linear_exact_step, rhs, rhs_linear, run, step, step_rk4, Dynamics, EvolveConfig, Stepper,
};
use wavelab_core::linop::apply_l;
use wavelab_core::model::{AbcdParams, BottomKind, BottomSpec};
use wavelab_core::solitary::{chen_profile, energy_closed_form, Branch};
use wavelab_core::spectral::{h1h1_norm, inner, Field, FieldPair, Grid};

fn chen_alpha_for(omega: f64) -> f64 {
    wavelab_core::solitary::g_branch(omega, Branch::Plus)
}

fn soliton(n: usize, l: f64, omega: f64) -> (wavelab_core::Grid64, FieldPair<f64>) {
    let g = Grid::<f64>::new(n, l).unwrap();
    let p = chen_profile(chen_alpha_for(omega), Branch::Plus, &g, &AbcdParams::chen()).unwrap();
    assert!((p.omega - omega).abs() < 1e-12);
    (g, p.pair())
}

fn evolve_to(state: &FieldPair<f64>, dt: f64, t_end: f64, dy: &Dynamics<f64>) -> FieldPair<f64> {
    let steps = (t_end / dt).round() as usize;
    let mut s = state.clone();
    for i in 0..steps {
        s = step_rk4(&s, i as f64 * dt, dt, dy).unwrap();
    }
    s
}

#[test]
fn rk4_global_order_is_four() {
    let (_, s0) = soliton(128, 40.0, 0.5);
    let dy = Dynamics::new(AbcdParams::chen(), BottomSpec::flat(), false);
    let reference = evolve_to(&s0, 0.0125, 4.0, &dy);
    let dts = [0.2, 0.1, 0.05];
    let errs: Vec<f64> = dts.iter().map(|&dt| h1h1_norm(&(&evolve_to(&s0, dt, 4.0, &dy) - &reference))).collect();
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope - 4.0).abs() < 0.3, "slope {slope}, errors {errs:?}");
}

#[test]
fn forward_backward_step_is_fifth_order() {
    let (_, s0) = soliton(256, 40.0, 0.5);
    let dy = Dynamics::new(AbcdParams::chen(), BottomSpec::flat(), false);
    let defect = |dt: f64| {
        let f = step_rk4(&s0, 0.0, dt, &dy).unwrap();
        let b = step_rk4(&f, dt, -dt, &dy).unwrap();
        (&b - &s0).max_abs()
    };
    let (e1, e2) = (defect(0.1), defect(0.05));
    assert!(e1 < 1e-5);
    assert!(e1 / e2 > 16.0, "ratio {}", e1 / e2);
}

#[test]
fn stable_at_half_dx() {
    let (g, s0) = soliton(512, 60.0, 0.5);
    let mut cfg = EvolveConfig::defaults(&g, 0.0, 20.0);
    cfg.dt = 0.5 * g.dx();
    cfg.output_stride = 100;
    let tr = run(&s0, &cfg, &AbcdParams::chen(), &BottomSpec::flat()).unwrap();
    let last = tr.snapshots.last().unwrap();
    assert!(last.is_finite());
    let h0 = tr.diagnostics[0].h;
    assert!((tr.diagnostics.last().unwrap().h - h0).abs() / h0.abs() < 1e-5);
}

#[test]
fn small_data_rhs_is_linear() {
    let g = Grid::<f64>::new(256, 30.0).unwrap();
    let v = FieldPair::new(
        Field::from_fn(&g, |x| 1e-8 * (-x * x / 4.0).exp()),
        Field::from_fn(&g, |x| 1e-8 * x * (-x * x / 9.0).exp()),
    )
    .unwrap();
    for params in [AbcdParams::chen(), AbcdParams::normalized(-0.5, -2.0, 0.3, 0.2)] {
        let dy = Dynamics::new(params, BottomSpec::flat(), false);
        let full = rhs(&v, 0.0, &dy);
        let lin = rhs_linear(&v, &dy);
        assert!((&full - &lin).max_abs() < 1e-12);
    }
}

#[test]
fn rk4_matches_exact_linear_propagator() {
    let g = Grid::<f64>::new(512, 60.0).unwrap();
    let init = FieldPair::new(
        Field::from_fn(&g, |x| 1e-8 * (-x * x / 16.0).exp()),
        Field::from_fn(&g, |x| 1e-8 * (-(x - 2.0) * (x - 2.0) / 16.0).exp()),
    )
    .unwrap();
    for params in [AbcdParams::chen(), AbcdParams::normalized(-0.5, -2.0, 0.0, 0.0)] {
        let mut cfg = EvolveConfig::defaults(&g, 0.0, 5.0);
        cfg.dealias = false;
        let tr = run(&init, &cfg, &params, &BottomSpec::flat()).unwrap();
        let exact = linear_exact_step(&init, 5.0, &params).unwrap();
        let rel = (&exact - tr.snapshots.last().unwrap()).max_abs() / exact.max_abs();
        assert!(rel < 1e-6, "relative {rel}");
    }
}

#[test]
fn split_step_converges_to_rk4_at_second_order() {
    let (g, s0) = soliton(256, 40.0, 0.5);
    let dy = Dynamics::new(AbcdParams::chen(), BottomSpec::flat(), true);
    let diff = |dt: f64| {
        let steps = (3.0 / dt).round() as usize;
        let (mut a, mut b) = (s0.clone(), s0.clone());
        for i in 0..steps {
            let t = i as f64 * dt;
            a = step(&a, t, dt, &dy, Stepper::Rk4).unwrap();
            b = step(&b, t, dt, &dy, Stepper::SplitStep).unwrap();
        }
        (&a - &b).max_abs()
    };
    let dt = 0.25 * g.dx();
    let (e1, e2) = (diff(dt), diff(dt / 2.0));
    assert!(e1 < 1e-4);
    assert!((e1 / e2 - 4.0).abs() < 0.5, "ratio {}", e1 / e2);
}

#[test]
fn flat_bottom_conservation_and_shape() {
    let omega = 1.0 / 6f64.sqrt();
    let (g, s0) = soliton(1024, 60.0, omega);
    let mut cfg = EvolveConfig::defaults(&g, 0.0, 50.0);
    cfg.output_stride = 1000;
    // Start left of centre so the soliton stays inside the box.
    let start = s0.shift(-omega * 25.0);
    let tr = run(&start, &cfg, &AbcdParams::chen(), &BottomSpec::flat()).unwrap();
    let (first, last) = (&tr.diagnostics[0], tr.diagnostics.last().unwrap());
    assert!(((last.h - first.h) / first.h).abs() < 1e-6);
    assert!(((last.p - first.p) / first.p).abs() < 1e-6);
    let expect = s0.shift(omega * 25.0);
    let err = h1h1_norm(&(tr.snapshots.last().unwrap() - &expect));
    assert!(err < 1e-4, "shape error {err}");
}

#[test]
fn derivative_identities_along_gaussian_bottom_run() {
    let eps: f64 = 0.1;
    let spec = BottomSpec::gaussian(eps).with_centers(0.5, 0.0);
    // The centered difference carries an O(dt²) error, so the grid is finer than the default run.
    let (g, s0) = soliton(1024, 60.0, 0.5);
    let params = AbcdParams::chen();
    let mut cfg = EvolveConfig::defaults(&g, 0.0, 20.0);
    cfg.output_stride = 1;
    let tr = run(&s0, &cfg, &params, &spec).unwrap();
    let d = &tr.diagnostics;
    let (mut ok_h, mut ok_p, mut total) = (0, 0, 0);
    for i in 1..d.len() - 1 {
        let dt = d[i + 1].t - d[i - 1].t;
        if (d[i + 1].t - d[i].t - (d[i].t - d[i - 1].t)).abs() > 1e-12 {
            continue;
        }
        total += 1;
        let fd_h = (d[i + 1].h_h - d[i - 1].h_h) / dt;
        let fd_p = (d[i + 1].p - d[i - 1].p) / dt;
        let close = |fd: f64, an: f64| (fd - an).abs() <= (1e-4 * an.abs()).max(1e-10);
        ok_h += close(fd_h, d[i].dhh_dt) as usize;
        ok_p += close(fd_p, d[i].dp_dt) as usize;
    }
    assert!(ok_h as f64 >= 0.95 * total as f64, "H_h: {ok_h}/{total}");
    assert!(ok_p as f64 >= 0.95 * total as f64, "P: {ok_p}/{total}");
}

fn x_only_bottom(eps: f64) -> BottomSpec<f64> {
    BottomSpec { kind: BottomKind::Sech2Product, k0: 0.0, ..BottomSpec::gaussian(eps) }
}

#[test]
fn hh_is_conserved_for_time_independent_bottom() {
    let spec = x_only_bottom(0.1);
    let (g, s0) = soliton(512, 60.0, 0.5);
    let state = s0.shift(-10.0);
    assert_eq!(dhh_dt_rhs(&state, &AbcdParams::chen(), &spec, 3.0), 0.0);
    let mut cfg = EvolveConfig::defaults(&g, 0.0, 20.0);
    cfg.output_stride = 1000;
    let tr = run(&state, &cfg, &AbcdParams::chen(), &spec).unwrap();
    let (a, b) = (tr.diagnostics[0].h_h, tr.diagnostics.last().unwrap().h_h);
    assert!(((b - a) / a).abs() < 1e-7, "drift {}", (b - a) / a);
    // P is not conserved: the bottom slope exerts a force.
    assert!(tr.diagnostics[1].dp_dt.abs() > 1e-6);
}

#[test]
fn hh_minus_h_is_half_u2_h() {
    let spec = BottomSpec::gaussian(0.2).with_centers(0.3, 0.1);
    let (g, s0) = soliton(512, 60.0, 0.5);
    let p = AbcdParams::chen();
    let h = Field::from_fn(&g, |x| spec.eval(1.5, x, 0, 0).unwrap());
    let direct = 0.5 * (&(&s0.u * &s0.u) * &h).integral();
    let diff = energy_hh(&s0, &p, &spec, 1.5) - energy_h(&s0, &p);
    assert!((diff - direct).abs() < 1e-13);
    assert_eq!(energy_hh(&s0, &p, &BottomSpec::flat(), 1.5), energy_h(&s0, &p));
    let psi = Field::constant(&g, 1.0);
    let el = local_energy(&s0, &psi, &p, &spec, 1.5).unwrap();
    assert!((el - energy_hh(&s0, &p, &spec, 1.5)).abs() < 1e-13);
}

#[test]
fn flat_and_static_bottoms_give_zero_derivatives() {
    let (_, s0) = soliton(256, 40.0, 0.5);
    let p = AbcdParams::chen();
    assert_eq!(dp_dt_rhs(&s0, &p, &BottomSpec::flat(), 1.0), 0.0);
    let constant = BottomSpec { kind: BottomKind::Sech2Product, k0: 0.0, l0: 0.0, ..BottomSpec::gaussian(0.1) };
    assert!(dp_dt_rhs(&s0, &p, &constant, 1.0).abs() < 1e-14);
}

#[test]
fn energy_matches_closed_form() {
    for omega in [0.5, 0.0] {
        let (_, s) = soliton(2048, 80.0, omega);
        let e = energy_h(&s, &AbcdParams::chen());
        let want = energy_closed_form(omega, Branch::Plus);
        assert!((e - want).abs() < 1e-6 * want.abs(), "ω={omega}: {e} vs {want}");
    }
}

#[test]
fn hamilton_relation_between_energy_and_momentum() {
    let g = Grid::<f64>::new(2048, 80.0).unwrap();
    let p = AbcdParams::chen();
    let at = |w: f64| {
        let pr = chen_profile(chen_alpha_for(w), Branch::Plus, &g, &p).unwrap().pair();
        (energy_h(&pr, &p), momentum_p(&pr))
    };
    let (w, d) = (0.5, 1e-4);
    let (ep, pp) = at(w + d);
    let (em, pm) = at(w - d);
    let de = (ep - em) / (2.0 * d);
    let dp = (pp - pm) / (2.0 * d);
    assert!((de - w * dp).abs() < 1e-6 * de.abs().max(1.0));
}

#[test]
fn parity_kills_momentum_and_quadratic_scaling() {
    let g = Grid::<f64>::new(256, 30.0).unwrap();
    let s = FieldPair::new(
        Field::from_fn(&g, |x| (-x * x).exp()),
        Field::from_fn(&g, |x| x * (-x * x).exp()),
    )
    .unwrap();
    assert!(momentum_p(&s).abs() < 1e-15);
    let p = AbcdParams::chen();
    let small = s.scale(1e-4);
    let ratio = energy_h(&small.scale(2.0), &p) / energy_h(&small, &p);
    assert!((ratio - 4.0).abs() < 1e-3);
}

#[test]
fn m0_matches_fundamental_theorem_oracle() {
    let eps: f64 = 0.1;
    let spec = BottomSpec::<f64>::gaussian(eps);
    let got = m0_eval(0.0, 1.0, 0.0, &spec).unwrap();
    let oracle = -eps * (spec.h0(eps, 0.0, 0, 0).unwrap() - spec.h0(0.0, 0.0, 0, 0).unwrap());
    assert!((got - oracle).abs() < 1e-10);
    let shifted = spec.with_centers(0.7, -0.4);
    let got = m0_eval(3.0, 5.0, 2.0, &shifted).unwrap();
    let oracle = -eps * (shifted.h0(eps * 8.0, eps * 2.0, 0, 0).unwrap() - shifted.h0(eps * 3.0, eps * 2.0, 0, 0).unwrap());
    assert!((got - oracle).abs() < 1e-10);
}

#[test]
fn f2_reduces_to_quadratic_form_of_l() {
    let g = Grid::<f64>::new(512, 40.0).unwrap();
    let p = AbcdParams::chen();
    let prof = chen_profile(-1.0, Branch::Plus, &g, &p).unwrap();
    let v = FieldPair::new(
        Field::from_fn(&g, |x| 0.1 * (-(x - 1.0) * (x - 1.0) / 3.0).exp()),
        Field::from_fn(&g, |x| 0.05 * x * (-x * x / 5.0).exp()),
    )
    .unwrap();
    let uref = prof.pair();
    let ctx = F2Context {
        u_ref: &uref,
        q_omega: &prof.q,
        omega: prof.omega,
        rho: 0.0,
        m0: 0.0,
        tau: 0.0,
        params: &p,
        spec: &BottomSpec::flat(),
    };
    let f2 = lyapunov_f2(&v, &ctx);
    let lv = apply_l(&p, prof.omega, &prof.r, &prof.q, &v);
    let want = 0.5 * inner(&lv, &v).unwrap() + 0.5 * (&(&v.u * &v.u) * &v.eta).integral();
    assert!((f2 - want).abs() < 1e-12 * want.abs().max(1.0), "{f2} vs {want}");
    assert_eq!(lyapunov_f2(&FieldPair::zeros(&g), &ctx), 0.0);
}
