use nullcone::fields::{Point, Vars};
use nullcone::linsolve::{CauchyData, RadialData, RadialProfile};
use nullcone::nonlinear::*;
use nullcone::nullforms::{QuadraticSymbol, QuasilinearTerm};

fn q0_system() -> WaveSystem {
    SystemKind::Null.system().unwrap()
}

fn gaussian_data(eps: f64) -> CauchyData {
    CauchyData::from_radial(RadialData::new(RadialProfile::gaussian(1.0, 1.0), RadialProfile::zero())).with_scale(eps)
}

/// `u = a cos(t) e^{-|x|²}` and `g = □u - Q_0(u, u)` from its jet.
fn manufactured(a: f64) -> (WaveSystem, CauchyData, impl Fn(f64, f64) -> f64) {
    let exact = move |v: &Vars| &v.t.cos() * &(-v.r2()).exp() * a;
    let source = move |t: f64, x: [f64; 3]| {
        let v = Vars::at(Point::new(t, x), 2);
        let u = exact(&v);
        let d = |i: u8| {
            let mut e = [0u8; 4];
            e[i as usize] = 1;
            u.taylor(e)
        };
        let dd = |i: usize| {
            let mut e = [0u8; 4];
            e[i] = 2;
            2.0 * u.taylor(e)
        };
        let box_u = dd(0) - dd(1) - dd(2) - dd(3);
        let q0 = d(0) * d(0) - d(1) * d(1) - d(2) * d(2) - d(3) * d(3);
        vec![box_u - q0]
    };
    let sys = q0_system().with_source(source);
    let data = CauchyData::from_radial(RadialData::new(RadialProfile::gaussian(a, 1.0), RadialProfile::zero()));
    let val = move |t: f64, r: f64| exact(&Vars::at(Point::new(t, [r, 0.0, 0.0]), 0)).value();
    (sys, data, val)
}

#[test]
fn manufactured_q0_solution_converges_at_second_order() {
    let (sys, data, exact) = manufactured(0.5);
    let mut errs = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let opts = EvolveOptions { h, t_final: 4.0, domain_radius: Some(12.0), data_radius: Some(6.0), ..Default::default() };
        let sol = evolve(&sys, &data, &opts).unwrap();
        assert_eq!(sol.status, RunStatus::Completed);
        let snap = sol.snapshot_at(4.0).unwrap();
        let err = snap.centre()[0]
            .iter()
            .enumerate()
            .filter(|(i, _)| sol.radius_of(*i) <= 8.0)
            .map(|(i, u)| (u - exact(4.0, sol.radius_of(i))).abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.8..=2.2).contains(&order), "errors {errs:?}");
    }
}

#[test]
fn q0_small_data_completes_near_linear() {
    let data = calibrated_data().with_scale(0.01);
    let opts = EvolveOptions::default();
    let sol = evolve(&q0_system(), &data, &opts).unwrap();
    let lin = evolve(&WaveSystem::free(1, 1.0).unwrap(), &data, &opts).unwrap();
    assert_eq!(sol.status, RunStatus::Completed);
    for (a, b) in sol.history.iter().zip(&lin.history) {
        assert!(a.sup_u <= 2.0 * b.sup_u, "t = {}: {} vs {}", a.t, a.sup_u, b.sup_u);
    }

    let trace = bootstrap_monitor(&sol, 0.75, 0).unwrap();
    let e1 = trace.value_near(1.0).unwrap();
    assert!(trace.max() <= 3.0 * e1, "e max {} vs e(1) {e1}", trace.max());

    let gamma = growth_exponent(&energy_trace(&sol, 0).unwrap()).unwrap();
    assert!(gamma < 0.1, "energy growth exponent {gamma}");

    let fit = cone_dplus_exponent(&sol, 6.5, 4.0).unwrap();
    assert!(fit.p >= 1.6, "cone exponent {}", fit.p);
}

#[test]
fn null_bootstrap_scales_linearly_in_eps() {
    let opts = EvolveOptions::default();
    let rep = null_contrast_experiment(&[0.02, 0.01, 0.005], &opts).unwrap();
    assert!(rep.null_completed);
    let per_eps: Vec<f64> = rep
        .rows
        .iter()
        .filter(|r| r.system == SystemKind::Null)
        .map(|r| r.bootstrap_max.unwrap() / r.eps)
        .collect();
    for v in &per_eps {
        assert!((v / per_eps[2] - 1.0).abs() < 0.1, "e_max/ε = {per_eps:?}");
    }
    let times: Vec<f64> = rep
        .rows
        .iter()
        .filter(|r| r.system == SystemKind::NonNull)
        .map(|r| r.certificate_time.unwrap_or(f64::INFINITY))
        .collect();
    assert!(times[0].is_finite() && times.windows(2).all(|w| w[1] > w[0]), "{times:?}");
}

#[test]
fn free_energy_drift_over_long_run() {
    let sol = evolve(&WaveSystem::free(1, 1.0).unwrap(), &gaussian_data(1.0), &EvolveOptions::default()).unwrap();
    let tr = energy_trace(&sol, 0).unwrap();
    assert_eq!(tr.len(), 50);
    let e0 = tr[0].1;
    assert!(tr.iter().all(|&(_, e)| (e / e0 - 1.0).abs() < 1e-3));
    let zero = evolve(&WaveSystem::free(1, 1.0).unwrap(), &gaussian_data(0.0), &EvolveOptions { t_final: 3.0, ..Default::default() }).unwrap();
    assert!(energy_trace(&zero, 0).unwrap().iter().all(|&(_, e)| e == 0.0));
}

#[test]
fn linear_bootstrap_trace_is_bounded() {
    let sol = evolve(&WaveSystem::free(1, 1.0).unwrap(), &gaussian_data(1.0), &EvolveOptions::default()).unwrap();
    let tr = bootstrap_monitor(&sol, 0.75, 0).unwrap();
    let e1 = tr.value_near(1.0).unwrap();
    assert!(tr.max() <= 3.0 * e1, "max {} vs e(1) {e1}", tr.max());
    let late = &tr.values[tr.values.len() - 10..];
    let spread = late.iter().copied().fold(0.0, f64::max) / late.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(spread < 1.1, "late values {late:?}");
}

#[test]
fn numerical_support_spreads_at_most_at_light_speed() {
    let data = CauchyData::from_radial(RadialData::new(RadialProfile::bump(1.0, 2.0), RadialProfile::zero()).with_support(2.0));
    let h = 0.05;
    let c = 1.5;
    let sol = evolve(&WaveSystem::free(1, c).unwrap(), &data, &EvolveOptions { h, t_final: 10.0, ..Default::default() }).unwrap();
    for snap in &sol.snapshots {
        let u = &snap.centre()[0];
        let peak = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let support = u
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > 1e-10 * peak)
            .map(|(i, _)| sol.radius_of(i))
            .fold(0.0, f64::max);
        assert!(support <= 2.0 + c * snap.t * (1.0 + 5.0 * h), "t = {}: support {support}", snap.t);
    }
}

#[test]
fn hyperbolicity_loss_aborts_instead_of_erroring() {
    // u Δu, rotation invariant so the radial scheme applies.
    let sym = (1..=3).fold(QuadraticSymbol::new(1), |s, k| {
        s.with_quasilinear(QuasilinearTerm { index: [0, 0, k, k], unknown: 0, derivative: None, coeff: 1.0 })
    });
    let sys = WaveSystem::new(sym, 1.0).unwrap();
    let sol = evolve(&sys, &gaussian_data(2.0), &EvolveOptions { t_final: 2.0, h: 0.1, ..Default::default() }).unwrap();
    assert!(matches!(sol.status, RunStatus::NanAbort { time, .. } if time == 0.0));
}

#[test]
fn quasilinear_small_data_run_completes() {
    // c^{00}_{11} = u, symmetric in (k, a) = (1, 1).
    let sym = QuadraticSymbol::new(1).with_quasilinear(QuasilinearTerm {
        index: [0, 0, 1, 1],
        unknown: 0,
        derivative: None,
        coeff: 1.0,
    });
    let opts = EvolveOptions { scheme: Scheme::Cartesian, h: 0.25, t_final: 2.0, domain_radius: Some(7.0), data_radius: Some(5.0), ..Default::default() };
    let sol = evolve(&WaveSystem::new(sym, 1.0).unwrap(), &gaussian_data(0.05), &opts).unwrap();
    assert_eq!(sol.status, RunStatus::Completed);
    assert!(sol.history.iter().all(|h| h.sup_u.is_finite()));
    let tr = bootstrap_monitor(&sol, 0.75, 0).unwrap();
    assert!(tr.values.iter().all(|v| v.is_finite()));
    assert!(bootstrap_monitor(&sol, 0.75, 1).is_err());
}

#[test]
fn jets_are_linear_in_amplitude() {
    let opts = EvolveOptions { t_final: 3.0, h: 0.1, ..Default::default() };
    let sys = WaveSystem::free(1, 1.0).unwrap();
    let a = evolve(&sys, &gaussian_data(1.0), &opts).unwrap();
    let b = evolve(&sys, &gaussian_data(0.25), &opts).unwrap();
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        for (x, y) in sa.centre()[0].iter().zip(&sb.centre()[0]) {
            assert!((0.25 * x - y).abs() <= 1e-14 * (1.0 + x.abs()));
        }
    }
}
