//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! values, the tolerance and the runtime against its budget.
//!
//! Lines are written straight to stdout so they show up without
//! `--nocapture`. The test asserts that the set of failing criteria equals
//! `KNOWN_FAILURES`, so a regression and an unexpected fix both surface.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nullcone::decaylab::{
    bump_data, characteristic_integral_demo, check_estimate, cone_band_series, cone_shell_source, fit_decay_exponent,
    half_octave_times, panelled_options, EstimateKind, EstimateSpec, Problem, Quantity, SolutionSource,
};
use nullcone::fields::{wave_operator, Point, Vars};
use nullcone::linsolve::{radial_free, solve_free, CauchyData, RadialData, RadialProfile, SolverOptions, SourceTerm, SphereRule};
use nullcone::nonlinear::{
    bootstrap_monitor, calibrated_data, energy_trace, evolve, null_contrast_experiment, EvolveOptions, RunStatus,
    SystemKind, WaveSystem,
};
use nullcone::nullforms::{
    identity_residual, modulated_wave, null_condition_check, outgoing_gaussian, random_points, IdentityKind,
    QuadraticSymbol,
};
use nullcone::weights::{jb, weight_w, SpeedSet};
use nullcone::ScalarField;

/// Criteria whose stated tolerance is not met; see the README.
const KNOWN_FAILURES: [usize; 1] = [9];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn gaussian_data() -> CauchyData {
    CauchyData::from_radial(RadialData::new(RadialProfile::gaussian(1.0, 1.0), RadialProfile::zero()))
}

fn identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for c in [1.0, 2.0, PI] {
        let (v, w) = (outgoing_gaussian(c), modulated_wave());
        for id in IdentityKind::ALL {
            let pts = random_points(&mut rng, 100);
            worst = worst.max(identity_residual(id, &v, &w, c, &pts).unwrap());
        }
    }
    outcome(worst < 1e-9, format!("max residual {worst:.2e} over 5 identities x c in {{1, 2, pi}} x 100 points (tol 1e-9)"))
}

/// `Σ A^{ab} ξ_a ξ_b` of the first semilinear term.
fn quadratic_value(sym: &QuadraticSymbol, xi: [f64; 4]) -> f64 {
    let a = &sym.semilinear[0].tensor;
    (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| a[4 * i + j] * xi[i] * xi[j]).sum()
}

fn null_checker() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut null_ok = 0;
    for _ in 0..20 {
        let c = [1.0, 2.0, PI][rng.gen_range(0..3)];
        let mut sym = QuadraticSymbol::new(2);
        for _ in 0..rng.gen_range(1..=4) {
            let (i, j, k) = (rng.gen_range(0..2), rng.gen_range(0..2), rng.gen_range(0..2));
            let coeff = rng.gen_range(-2.0..2.0);
            sym = if rng.gen_bool(0.4) {
                sym.with_q0(i, j, k, c, coeff)
            } else {
                let a = rng.gen_range(0..4);
                let b = (a + rng.gen_range(1..4)) % 4;
                sym.with_qab(i, j, k, a, b, coeff)
            };
        }
        if null_condition_check(&sym, &[c]).unwrap().satisfied {
            null_ok += 1;
        }
    }

    let c = 1.0;
    let mut dt2 = [[0.0; 4]; 4];
    dt2[0][0] = 1.0;
    let mut mixed = [[0.0; 4]; 4];
    mixed[0][1] = 1.0;
    mixed[1][1] = 1.0;
    let mut tilted = [[0.0; 4]; 4];
    tilted[0][0] = 1.0;
    for j in 1..4 {
        tilted[j][j] = -2.0 * c * c;
    }
    let mut witnesses_ok = 0;
    for tensor in [dt2, mixed, tilted] {
        let sym = QuadraticSymbol::new(1).with_semilinear(0, 0, 0, tensor);
        let check = null_condition_check(&sym, &[c]).unwrap();
        let valid = check.witness.as_ref().is_some_and(|w| {
            let xi = w.covector;
            let spatial = (xi[1] * xi[1] + xi[2] * xi[2] + xi[3] * xi[3]).sqrt();
            let on_cone = (xi[0].abs() - c * spatial).abs() < 1e-12 && spatial > 0.0;
            let value = quadratic_value(&sym, xi);
            on_cone && value.abs() > 1e-6 && (value - w.value).abs() <= 1e-12 * value.abs().max(1.0)
        });
        if !check.satisfied && valid {
            witnesses_ok += 1;
        }
    }
    outcome(
        null_ok == 20 && witnesses_ok == 3,
        format!("{null_ok}/20 null combinations accepted, {witnesses_ok}/3 non-null symbols rejected with verified witness"),
    )
}

fn linear_oracle() -> Outcome {
    let radial = RadialData::new(RadialProfile::gaussian(1.0, 1.0), RadialProfile::zero()).with_support(7.0);
    let data = CauchyData::from_radial(radial.clone());
    let generic = CauchyData::new(data.phi.clone(), data.psi.clone()).with_support(7.0);
    let opts = SolverOptions { rule: SphereRule::new(24).unwrap(), ..SolverOptions::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut err, mut scale): (f64, f64) = (0.0, 0.0);
    for (i, p) in random_points(&mut rng, 100).into_iter().enumerate() {
        let t = 32.0 * p.t / 20.0;
        let x = p.x.map(|v| v * 1.6);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let want = radial_free(&radial, 1.0, t, r).unwrap();
        // every fifth point through the generic (non-radial) sphere rule
        let d = if i % 5 == 0 { &generic } else { &data };
        let got = solve_free(d, 1.0, t, x, &opts).unwrap();
        err = err.max((got - want).abs());
        scale = scale.max(want.abs());
    }
    let rel = err / scale;
    outcome(rel < 1e-6, format!("relative L-inf error {rel:.2e} at 100 points, t <= 32, q = 24 (tol 1e-6)"))
}

fn enhanced_decay() -> Outcome {
    let times = half_octave_times(64.0);
    let opts = SolverOptions::default();
    let problem = Problem::Cauchy(gaussian_data());
    let dt = fit_decay_exponent(&cone_band_series(&problem, 1.0, Quantity::Dt, &times, 49, &opts).unwrap(), false).unwrap();
    let dp = fit_decay_exponent(&cone_band_series(&problem, 1.0, Quantity::DPlus, &times, 49, &opts).unwrap(), false).unwrap();

    let u = outgoing_gaussian(1.0);
    let on = |shift: f64, q: Quantity| -> Vec<(f64, f64)> {
        times
            .iter()
            .map(|&t| {
                let p = Point::new(t + shift, [t, 0.0, 0.0]);
                (t, q.of(&u.jet(p, 1).unwrap(), 1.0, p).unwrap())
            })
            .collect()
    };
    let exact_dt = fit_decay_exponent(&on(1.0, Quantity::Dt), false).unwrap().p;
    let exact_dp = fit_decay_exponent(&on(0.0, Quantity::DPlus), false).unwrap().p;
    let pass = (0.9..=1.1).contains(&dt.p) && dp.p >= 1.8 && (exact_dt - 1.0).abs() < 1e-9 && (exact_dp - 2.0).abs() < 1e-9;
    outcome(
        pass,
        format!(
            "Gaussian data: p(dt u) = {:.3} in [0.9, 1.1], p(D+ u) = {:.3} >= 1.8; e^-(t-r)^2/r: {exact_dt:.6}, {exact_dp:.6} (want 1, 2)",
            dt.p, dp.p
        ),
    )
}

fn ratio_boundedness() -> Outcome {
    let mut spec = EstimateSpec::new(EstimateKind::ThmII, 1.5, 0.5).with_t_max(64.0);
    spec.cone_offsets = vec![-1.0, 1.0];
    spec.fit_exponent = false;
    let thm = check_estimate(&spec, &Problem::Cauchy(bump_data(1.0, 2.0)), 1.0, &SolverOptions::default()).unwrap();

    let mut spec = EstimateSpec::new(EstimateKind::LemInhomU, 1.0, 0.5).with_t_max(64.0);
    spec.fit_exponent = false;
    let lem = check_estimate(&spec, &Problem::Source(cone_shell_source(1.0, 64.0)), 1.0, &panelled_options()).unwrap();

    let growth = |g: Option<f64>| g.unwrap_or(f64::INFINITY);
    let (g1, g2) = (growth(thm.max_growth), growth(lem.max_growth));
    let pass = g1 <= 1.1 && g2 <= 1.1 && thm.max_ratio.is_finite() && lem.max_ratio.is_finite();
    outcome(pass, format!("max dyadic growth beyond t = 8: thm-ii {g1:.4}, lem-inhom-u {g2:.4} (tol 1.1, T_max 64)"))
}

fn characteristic_demo() -> Outcome {
    let c = 1.3;
    let u_ex = ScalarField::manufactured(|v: &Vars| {
        let q = (&v.x[0] - 0.4).square() + v.x[1].square() + (&v.x[2] + 0.3).square();
        v.t.sin() * (-q).exp()
    });
    let g = SourceTerm::new(wave_operator(c, &u_ex), 20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let t = rng.gen_range(0.5..5.0);
        let r = rng.gen_range(0.5..5.0);
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let s = (1.0 - z * z).sqrt();
        let out = characteristic_integral_demo(&g, &SolutionSource::Exact(u_ex.clone()), c, t, r, [s * phi.cos(), s * phi.sin(), z])
            .unwrap();
        worst = worst.max(out.residual);
    }
    outcome(worst < 1e-4, format!("max relative lhs/rhs residual {worst:.2e} at 10 points (tol 1e-4)"))
}

fn solver_convergence() -> Outcome {
    let data = gaussian_data();
    let rd = data.radial.clone().unwrap();
    let sys = WaveSystem::free(1, 1.0).unwrap();
    let t = 8.0;
    let mut errs = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let sol = evolve(&sys, &data, &EvolveOptions { h, t_final: t, ..Default::default() }).unwrap();
        let snap = sol.snapshot_at(t).unwrap();
        let err = snap.centre()[0]
            .iter()
            .enumerate()
            .filter(|(i, _)| sol.radius_of(*i) <= sol.physical_radius)
            .map(|(i, u)| (u - radial_free(&rd, 1.0, t, sol.radius_of(i)).unwrap()).abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();

    let sol = evolve(&sys, &data, &EvolveOptions { t_final: 50.0, ..Default::default() }).unwrap();
    let tr = energy_trace(&sol, 0).unwrap();
    let drift = tr.iter().map(|&(_, e)| (e / tr[0].1 - 1.0).abs()).fold(0.0, f64::max);
    let pass = orders.iter().all(|p| (1.8..=2.2).contains(p)) && drift < 1e-3;
    outcome(
        pass,
        format!(
            "orders {:.3}, {:.3} in [1.8, 2.2] (h = 0.1, 0.05, 0.025); energy drift {drift:.2e} over T = 50 (tol 1e-3)",
            orders[0], orders[1]
        ),
    )
}

fn null_contrast() -> Outcome {
    let opts = EvolveOptions::default();
    let sol = evolve(&SystemKind::Null.system().unwrap(), &calibrated_data().with_scale(0.01), &opts).unwrap();
    let tr = bootstrap_monitor(&sol, 0.75, 0).unwrap();
    let e1 = tr.value_near(1.0).unwrap();
    let bounded = sol.status == RunStatus::Completed && tr.max() <= 3.0 * e1;

    let rep = null_contrast_experiment(&[0.05, 0.03, 0.02], &opts).unwrap();
    let times: Vec<String> = rep
        .rows
        .iter()
        .filter(|r| r.system == SystemKind::NonNull)
        .map(|r| r.certificate_time.map_or("none".into(), |t| format!("{t:.2}")))
        .collect();
    let pass = bounded && rep.verdict;
    outcome(
        pass,
        format!(
            "Q0 eps = 0.01 {} with max e/e(1) = {:.3} (tol 3); non-null certificate times {} for eps 0.05, 0.03, 0.02; null runs completed: {}",
            sol.status.label(),
            tr.max() / e1,
            times.join(", "),
            rep.null_completed
        ),
    )
}

fn weight_algebra() -> Outcome {
    let one = SpeedSet::single(1.0).unwrap();
    let several = SpeedSet::new(vec![0.5, 1.0, 2.0]).unwrap();
    let grid: Vec<f64> = (0..100).map(|i| i as f64).collect();
    let mut exact = true;
    let mut constant: f64 = 0.0;
    for &r in &grid {
        exact &= weight_w(0.0, r, &several) == jb(r) && weight_w(0.0, r, &one) == jb(r);
        for &t in &grid {
            exact &= weight_w(t, r, &one) == jb(r).min(jb(t - r));
            // ⟨r⟩⁻¹⟨t-r⟩⁻¹ ≤ C ⟨t+r⟩⁻¹ w⁻¹
            constant = constant.max(jb(t + r) * weight_w(t, r, &one) / (jb(r) * jb(t - r)));
        }
    }
    let bound = 2.0 * 2f64.sqrt();
    outcome(
        exact && constant <= bound,
        format!(
            "specializations exact: {exact}; empirical constant {constant:.4} vs bound 2*sqrt(2) = {bound:.4} on 100x100 grid (t, r in 0..99)"
        ),
    )
}

/// Number, name, check and runtime budget in seconds.
type Criterion = (usize, &'static str, fn() -> Outcome, u64);

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 9] = [
        (1, "identity suite", identities, 10),
        (2, "null-condition checker", null_checker, 1),
        (3, "linear oracle agreement", linear_oracle, 30),
        (4, "enhanced decay exponents", enhanced_decay, 60),
        (5, "ratio boundedness", ratio_boundedness, 300),
        (6, "characteristic integration", characteristic_demo, 60),
        (7, "solver convergence and energy", solver_convergence, 120),
        (8, "null contrast", null_contrast, 600),
        (9, "weight algebra", weight_algebra, 1),
    ];
    let mut failed = Vec::new();
    let mut out = std::io::stdout();
    for (n, name, check, budget) in criteria {
        let start = Instant::now();
        let res = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let pass = res.pass && in_time;
        if !pass {
            failed.push(n);
        }
        writeln!(
            out,
            "criterion {n} {}: {name}: {} [{:.2} s of {budget} s{}]",
            if pass { "PASS" } else { "FAIL" },
            res.detail,
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", over budget" }
        )
        .unwrap();
    }
    out.flush().unwrap();
    assert_eq!(failed, KNOWN_FAILURES, "failing criteria differ from the known failures");
}
