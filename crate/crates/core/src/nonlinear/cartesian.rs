//! Cartesian leapfrog on `[-L, L]³` with a 7-point Laplacian, zero values on
//! the faces and a quartic sponge in the outer layer. Meant for small grids.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::fields::Point;
use crate::linsolve::CauchyData;

use super::{
    EvolveOptions, GridSolution, HistoryRow, Plan, RunStatus, Scheme, SecondDerivs, Snapshot, WaveSystem,
    MAX_CARTESIAN_POINTS,
};

type Level = Vec<Vec<f64>>;

/// Snapshots are kept at every output up to this many points per axis, and
/// only at the final time beyond it.
const SNAPSHOT_ALL_MAX: usize = 64;

struct Cube {
    n: usize,
    h: f64,
    half: f64,
    damp: Vec<f64>,
    inside: Vec<bool>,
}

impl Cube {
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    fn x(&self, i: usize) -> f64 {
        -self.half + i as f64 * self.h
    }

    fn strides(&self) -> [usize; 3] {
        [self.n * self.n, self.n, 1]
    }

    fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        let n = self.n;
        (1..n - 1).flat_map(move |i| (1..n - 1).flat_map(move |j| (1..n - 1).map(move |k| self.idx(i, j, k))))
    }
}

fn laplacian(q: &[f64], p: usize, s: [usize; 3]) -> f64 {
    s.iter().map(|&d| q[p + d] - 2.0 * q[p] + q[p - d]).sum()
}

fn leapfrog(g: &Cube, c: f64, dt: f64, prev: &Level, cur: &Level, f: Option<&Level>, next: &mut Level) {
    let lam = (c * dt / g.h).powi(2);
    let s = g.strides();
    for j in 0..cur.len() {
        next[j].iter_mut().for_each(|x| *x = 0.0);
        for p in g.interior() {
            let d = g.damp[p];
            let src = f.map_or(0.0, |f| f[j][p]);
            next[j][p] = (2.0 * cur[j][p] - (1.0 - d) * prev[j][p] + lam * laplacian(&cur[j], p, s) + dt * dt * src) / (1.0 + d);
        }
    }
}

/// Writes `F_i` into `f` and returns `max |c^{ij}_{ka}|`.
fn forcing(sys: &WaveSystem, g: &Cube, t: f64, u: &Level, ut: &Level, f: &mut Level) -> f64 {
    let m = sys.unknowns();
    let s = g.strides();
    let h = g.h;
    let quasi = !sys.symbol.quasilinear.is_empty();
    let mut pu = vec![0.0; m];
    let mut pdu = vec![[0.0; 4]; m];
    let mut pddu: Vec<SecondDerivs> = vec![[[0.0; 4]; 3]; m];
    let mut out = vec![0.0; m];
    let mut max_coeff: f64 = 0.0;
    for p in g.interior() {
        for j in 0..m {
            let (q, w) = (&u[j], &ut[j]);
            pu[j] = q[p];
            pdu[j][0] = w[p];
            for k in 0..3 {
                let dk = s[k];
                pdu[j][k + 1] = (q[p + dk] - q[p - dk]) / (2.0 * h);
                pddu[j][k][0] = (w[p + dk] - w[p - dk]) / (2.0 * h);
                for l in 0..3 {
                    let dl = s[l];
                    pddu[j][k][l + 1] = if k == l {
                        (q[p + dk] - 2.0 * q[p] + q[p - dk]) / (h * h)
                    } else {
                        (q[p + dk + dl] - q[p + dk - dl] - q[p - dk + dl] + q[p - dk - dl]) / (4.0 * h * h)
                    };
                }
            }
        }
        sys.rhs(&pu, &pdu, &pddu, &mut out);
        if sys.source.is_some() {
            let n = g.n;
            let (i, j, k) = (p / (n * n), (p / n) % n, p % n);
            sys.add_source(t, [g.x(i), g.x(j), g.x(k)], &mut out);
        }
        for j in 0..m {
            f[j][p] = out[j];
        }
        if quasi {
            max_coeff = max_coeff.max(sys.max_quasilinear(&pu, &pdu));
        }
    }
    max_coeff
}

fn sups(g: &Cube, dt: f64, prev: &Level, cur: &Level, next: &Level) -> (f64, f64) {
    let s = g.strides();
    let (mut su, mut sdu) = (0.0f64, 0.0f64);
    for p in g.interior().filter(|&p| g.inside[p]) {
        let (mut a, mut b) = (0.0, 0.0);
        for j in 0..cur.len() {
            let q = &cur[j];
            a += q[p].abs();
            b += ((next[j][p] - prev[j][p]) / (2.0 * dt)).abs();
            b += s.iter().map(|&d| ((q[p + d] - q[p - d]) / (2.0 * g.h)).abs()).sum::<f64>();
        }
        su = su.max(a);
        sdu = sdu.max(b);
    }
    (su, sdu)
}

fn energy(g: &Cube, c: f64, dt: f64, cur: &Level, next: &Level) -> f64 {
    let n = g.n;
    let mut e = 0.0;
    for j in 0..cur.len() {
        let (a, b) = (&cur[j], &next[j]);
        for p in 0..a.len() {
            e += ((b[p] - a[p]) / dt).powi(2);
        }
        for i in 0..n {
            for jj in 0..n {
                for k in 0..n {
                    let p = g.idx(i, jj, k);
                    for (axis, d) in g.strides().into_iter().enumerate() {
                        let coord = [i, jj, k][axis];
                        if coord + 1 < n {
                            e += c * c * (b[p + d] - b[p]) * (a[p + d] - a[p]) / (g.h * g.h);
                        }
                    }
                }
            }
        }
    }
    (e.max(0.0) * g.h.powi(3)).sqrt()
}

pub(super) fn run(sys: &WaveSystem, data: &CauchyData, opts: &EvolveOptions, plan: &Plan) -> Result<GridSolution> {
    let (m, c, dt) = (sys.unknowns(), sys.c, plan.dt);
    let h = opts.h;
    let n = (2.0 * plan.domain / h).round() as usize + 1;
    if n > MAX_CARTESIAN_POINTS {
        return Err(Error::argument(format!(
            "cartesian grid needs {n} points per axis, more than {MAX_CARTESIAN_POINTS}"
        )));
    }
    if n < 5 {
        return Err(Error::argument("cartesian grid needs at least 5 points per axis"));
    }
    let half = (n - 1) as f64 * h / 2.0;
    let start = (1.0 - opts.sponge_fraction) * half;
    let width = (half - start).max(h);
    let sigma_max = 40.0 * c / width;
    let mut g = Cube { n, h, half, damp: Vec::new(), inside: Vec::new() };
    let total_points = n * n * n;
    let mut damp = vec![0.0; total_points];
    let mut inside = vec![false; total_points];
    let mut u0 = vec![0.0; total_points];
    let mut ut0 = vec![0.0; total_points];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let p = g.idx(i, j, k);
                let x = [g.x(i), g.x(j), g.x(k)];
                let d = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if d > start {
                    damp[p] = 0.5 * dt * sigma_max * ((d - start) / width).powi(4);
                } else {
                    inside[p] = true;
                }
                let edge = i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1;
                if !edge {
                    let pt = Point::new(0.0, x);
                    u0[p] = data.scale * data.phi.value(pt)?;
                    ut0[p] = data.scale * data.psi.value(pt)?;
                }
            }
        }
    }
    g.damp = damp;
    g.inside = inside;
    let u0: Level = vec![u0; m];
    let ut0: Level = vec![ut0; m];

    let mut sol = GridSolution {
        scheme: Scheme::Cartesian,
        unknowns: m,
        c,
        h,
        dt,
        cfl: c * dt / h,
        points: n,
        domain_radius: half,
        physical_radius: plan.physical,
        status: RunStatus::Running,
        snapshots: Vec::new(),
        history: Vec::new(),
    };

    let nonlinear = !sys.is_linear();
    let mut f: Level = vec![vec![0.0; total_points]; m];
    let with_rhs = sys.has_rhs();
    let max_c = if with_rhs { forcing(sys, &g, 0.0, &u0, &ut0, &mut f) } else { 0.0 };
    if max_c >= 0.5 * c * c {
        sol.status = RunStatus::NanAbort {
            time: 0.0,
            reason: format!("quasilinear coefficient {max_c:.3e} breaks hyperbolicity (limit c²/2)"),
        };
        return Ok(sol);
    }
    let lam = (c * dt / h).powi(2);
    let s = g.strides();
    let first = |with_f: bool| -> Level {
        (0..m)
            .map(|j| {
                let mut o = vec![0.0; total_points];
                for p in g.interior() {
                    let src = if with_f { f[j][p] } else { 0.0 };
                    o[p] = u0[j][p] + dt * ut0[j][p] + 0.5 * (lam * laplacian(&u0[j], p, s) + dt * dt * src);
                }
                o
            })
            .collect()
    };
    let u1 = first(with_rhs);
    let lin1 = if nonlinear { first(false) } else { Vec::new() };

    let mut ring: VecDeque<Level> = VecDeque::from([u0.clone(), u1]);
    let mut lring: VecDeque<Level> = VecDeque::from([u0, lin1]);
    let mut next: Level = vec![vec![0.0; total_points]; m];
    let mut ut: Level = vec![vec![0.0; total_points]; m];
    let spo = plan.steps_per_output;
    let total = plan.outputs * spo + 1;
    let keep_all = n <= SNAPSHOT_ALL_MAX;

    for step in 1..total {
        let (prev, cur) = (&ring[ring.len() - 2], &ring[ring.len() - 1]);
        let t = step as f64 * dt;
        if with_rhs {
            for j in 0..m {
                for p in 0..total_points {
                    ut[j][p] = (cur[j][p] - prev[j][p]) / dt;
                }
            }
            forcing(sys, &g, t, cur, &ut, &mut f);
            leapfrog(&g, c, dt, prev, cur, Some(&f), &mut next);
            for j in 0..m {
                for p in 0..total_points {
                    ut[j][p] = (next[j][p] - prev[j][p]) / (2.0 * dt);
                }
            }
            let max_c = forcing(sys, &g, t, cur, &ut, &mut f);
            leapfrog(&g, c, dt, prev, cur, Some(&f), &mut next);
            if max_c >= 0.5 * c * c {
                sol.status = RunStatus::NanAbort {
                    time: step as f64 * dt,
                    reason: format!("quasilinear coefficient {max_c:.3e} breaks hyperbolicity (limit c²/2)"),
                };
                return Ok(sol);
            }
        } else {
            leapfrog(&g, c, dt, prev, cur, None, &mut next);
        }
        if next.iter().flatten().any(|x| !x.is_finite()) {
            sol.status = RunStatus::NanAbort { time: (step + 1) as f64 * dt, reason: "non-finite value".into() };
            return Ok(sol);
        }
        if nonlinear {
            let (lp, lc) = (&lring[lring.len() - 2], &lring[lring.len() - 1]);
            let mut lnext = vec![vec![0.0; total_points]; m];
            leapfrog(&g, c, dt, lp, lc, None, &mut lnext);
            let (su, sdu) = sups(&g, dt, prev, cur, &next);
            let (_, lsdu) = sups(&g, dt, lp, lc, &lnext);
            let reason = if su > opts.u_threshold {
                Some(format!("sup|u| = {su:.3e} exceeds {}", opts.u_threshold))
            } else if sdu > opts.growth_factor * lsdu {
                Some(format!("sup|∂u| = {sdu:.3e} exceeds {} × linear {lsdu:.3e}", opts.growth_factor))
            } else {
                None
            };
            if let Some(reason) = reason {
                sol.status = RunStatus::GrowthCertificate { time: step as f64 * dt, reason };
                return Ok(sol);
            }
            lring.push_back(lnext);
            if lring.len() > 3 {
                lring.pop_front();
            }
        }
        ring.push_back(next.clone());
        if ring.len() > 3 {
            ring.pop_front();
        }

        let k = step;
        if k % spo == 0 {
            let t = k as f64 * dt;
            let (su, sdu) = sups(&g, dt, &ring[0], &ring[1], &ring[2]);
            let linear_sup_du = nonlinear.then(|| sups(&g, dt, &lring[0], &lring[1], &lring[2]).1);
            sol.history.push(HistoryRow { t, sup_u: su, sup_du: sdu, linear_sup_du, energy: energy(&g, c, dt, &ring[1], &ring[2]) });
            if keep_all || k / spo == plan.outputs {
                sol.snapshots.push(Snapshot { t, time_index: k, levels: ring.iter().cloned().collect() });
            }
        }
    }
    sol.status = RunStatus::Completed;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::super::{evolve, EvolveOptions, Scheme, WaveSystem};
    use crate::linsolve::{radial_free, CauchyData, RadialData, RadialProfile};

    #[test]
    fn free_cartesian_run_tracks_radial_oracle() {
        let rd = RadialData::new(RadialProfile::gaussian(1.0, 1.0), RadialProfile::zero());
        let data = CauchyData::from_radial(rd.clone());
        let sys = WaveSystem::free(1, 1.0).unwrap();
        let opts = EvolveOptions {
            scheme: Scheme::Cartesian,
            h: 0.2,
            t_final: 2.0,
            domain_radius: Some(6.0),
            data_radius: Some(5.0),
            ..Default::default()
        };
        let sol = evolve(&sys, &data, &opts).unwrap();
        assert_eq!(sol.points, 61);
        let snap = sol.snapshot_at(2.0).unwrap();
        let n = sol.points;
        let mid = n / 2;
        let mut err: f64 = 0.0;
        for i in mid..mid + 15 {
            let r = sol.coord(i);
            let u = snap.centre()[0][(i * n + mid) * n + mid];
            err = err.max((u - radial_free(&rd, 1.0, 2.0, r).unwrap()).abs());
        }
        assert!(err < 0.02, "max error {err}");
        let e0 = sol.history[0].energy;
        assert!(sol.history.iter().all(|row| (row.energy / e0 - 1.0).abs() < 1e-6));
    }

    #[test]
    fn oversized_grid_rejected() {
        let data = CauchyData::from_radial(RadialData::new(RadialProfile::gaussian(1.0, 1.0), RadialProfile::zero()));
        let sys = WaveSystem::free(1, 1.0).unwrap();
        let opts = EvolveOptions { scheme: Scheme::Cartesian, h: 0.05, t_final: 5.0, ..Default::default() };
        assert!(evolve(&sys, &data, &opts).is_err());
    }
}
