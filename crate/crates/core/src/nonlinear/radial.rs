//! Radial leapfrog for `v_i = r u_i`: `v_tt + σ v_t = c² v_rr + r F_i`, with
//! `v(t, 0) = 0`, `v(t, R) = 0` and a quartic sponge `σ` near `R`.

use std::collections::VecDeque;

use crate::error::Result;
use crate::linsolve::CauchyData;

use super::{EvolveOptions, GridSolution, HistoryRow, Plan, RunStatus, Scheme, SecondDerivs, Snapshot, WaveSystem};

type Level = Vec<Vec<f64>>;

pub(super) struct Grid {
    pub n: usize,
    pub h: f64,
    pub r: Vec<f64>,
    /// `σ Δt / 2` per point.
    pub damp: Vec<f64>,
    /// Last index before the sponge.
    pub inner: usize,
}

impl Grid {
    fn new(domain: f64, h: f64, c: f64, dt: f64, sponge: f64) -> Self {
        let n = (domain / h).ceil() as usize;
        let r: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let outer = n as f64 * h;
        let start = (1.0 - sponge) * outer;
        let width = (outer - start).max(h);
        let sigma_max = 40.0 * c / width;
        let damp = r
            .iter()
            .map(|&x| if x > start { 0.5 * dt * sigma_max * ((x - start) / width).powi(4) } else { 0.0 })
            .collect();
        let inner = ((start / h).floor() as usize).min(n - 1);
        Grid { n, h, r, damp, inner }
    }
}

/// `u = v/r`, with the even extension `u_0 = (4u_1 - u_2)/3` at the origin.
pub(super) fn to_u(v: &[f64], r: &[f64], out: &mut [f64]) {
    for i in 1..v.len() {
        out[i] = v[i] / r[i];
    }
    out[0] = (4.0 * out[1] - out[2]) / 3.0;
}

struct Forcing<'a> {
    sys: &'a WaveSystem,
    u: Level,
    ut: Level,
    pu: Vec<f64>,
    pdu: Vec<[f64; 4]>,
    pddu: Vec<SecondDerivs>,
    out: Vec<f64>,
}

impl<'a> Forcing<'a> {
    fn new(sys: &'a WaveSystem, points: usize) -> Self {
        let m = sys.unknowns();
        Forcing {
            sys,
            u: vec![vec![0.0; points]; m],
            ut: vec![vec![0.0; points]; m],
            pu: vec![0.0; m],
            pdu: vec![[0.0; 4]; m],
            pddu: vec![[[0.0; 4]; 3]; m],
            out: vec![0.0; m],
        }
    }

    /// Writes `r F_i` into `f` and returns `max |c^{ij}_{ka}|`.
    fn eval(&mut self, g: &Grid, t: f64, v: &Level, vt: &Level, f: &mut Level) -> f64 {
        let m = self.sys.unknowns();
        for j in 0..m {
            to_u(&v[j], &g.r, &mut self.u[j]);
            to_u(&vt[j], &g.r, &mut self.ut[j]);
        }
        let quasi = !self.sys.symbol.quasilinear.is_empty();
        let (h, n) = (g.h, g.n);
        let mut max_coeff: f64 = 0.0;
        for i in 1..n {
            let r = g.r[i];
            for j in 0..m {
                let (u, ut) = (&self.u[j], &self.ut[j]);
                let ur = (u[i + 1] - u[i - 1]) / (2.0 * h);
                let urr = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
                let utr = (ut[i + 1] - ut[i - 1]) / (2.0 * h);
                self.pu[j] = u[i];
                self.pdu[j] = [ut[i], ur, 0.0, 0.0];
                self.pddu[j] = [[utr, urr, 0.0, 0.0], [0.0, 0.0, ur / r, 0.0], [0.0, 0.0, 0.0, ur / r]];
            }
            self.sys.rhs(&self.pu, &self.pdu, &self.pddu, &mut self.out);
            self.sys.add_source(t, [r, 0.0, 0.0], &mut self.out);
            for j in 0..m {
                f[j][i] = r * self.out[j];
            }
            if quasi {
                max_coeff = max_coeff.max(self.sys.max_quasilinear(&self.pu, &self.pdu));
            }
        }
        for fj in f.iter_mut() {
            fj[0] = 0.0;
            fj[n] = 0.0;
        }
        max_coeff
    }
}

fn leapfrog(g: &Grid, c: f64, dt: f64, prev: &Level, cur: &Level, f: Option<&Level>, next: &mut Level) {
    let lam = (c * dt / g.h).powi(2);
    for j in 0..cur.len() {
        let (p, q, o) = (&prev[j], &cur[j], &mut next[j]);
        for i in 1..g.n {
            let s = g.damp[i];
            let src = f.map_or(0.0, |f| f[j][i]);
            o[i] = (2.0 * q[i] - (1.0 - s) * p[i] + lam * (q[i + 1] - 2.0 * q[i] + q[i - 1]) + dt * dt * src) / (1.0 + s);
        }
        o[0] = 0.0;
        o[g.n] = 0.0;
    }
}

/// `sup Σ_i |u_i|` and `sup Σ_i (|∂_t u_i| + |∂_r u_i|)` at the middle level, inside the sponge.
fn sups(g: &Grid, dt: f64, prev: &Level, cur: &Level, next: &Level) -> (f64, f64) {
    let (mut su, mut sdu) = (0.0f64, 0.0f64);
    for i in 1..=g.inner {
        let (mut a, mut b) = (0.0, 0.0);
        for j in 0..cur.len() {
            let r = g.r[i];
            let u = cur[j][i] / r;
            let ut = (next[j][i] - prev[j][i]) / (2.0 * dt * r);
            let up = cur[j][i + 1] / g.r[i + 1];
            let um = if i == 1 { (4.0 * u - cur[j][2] / g.r[2]) / 3.0 } else { cur[j][i - 1] / g.r[i - 1] };
            a += u.abs();
            b += ut.abs() + ((up - um) / (2.0 * g.h)).abs();
        }
        su = su.max(a);
        sdu = sdu.max(b);
    }
    (su, sdu)
}

/// `(∫ u_t² + c²|∇u|² dx)^{1/2}` from the staggered leapfrog energy of levels `n`, `n+1`.
fn energy(g: &Grid, c: f64, dt: f64, cur: &Level, next: &Level) -> f64 {
    let mut e = 0.0;
    for j in 0..cur.len() {
        let (a, b) = (&cur[j], &next[j]);
        for i in 0..=g.n {
            e += ((b[i] - a[i]) / dt).powi(2) * g.h;
        }
        for i in 0..g.n {
            e += c * c * (b[i + 1] - b[i]) * (a[i + 1] - a[i]) / g.h;
        }
    }
    (4.0 * std::f64::consts::PI * e.max(0.0)).sqrt()
}

fn snapshot(g: &Grid, ring: &VecDeque<Level>, t: f64, time_index: usize) -> Snapshot {
    let levels = ring
        .iter()
        .map(|lvl| {
            lvl.iter()
                .map(|v| {
                    let mut u = vec![0.0; v.len()];
                    to_u(v, &g.r, &mut u);
                    u
                })
                .collect()
        })
        .collect();
    Snapshot { t, time_index, levels }
}

pub(super) fn run(sys: &WaveSystem, data: &CauchyData, opts: &EvolveOptions, plan: &Plan) -> Result<GridSolution> {
    let (m, c, dt) = (sys.unknowns(), sys.c, plan.dt);
    let g = Grid::new(plan.domain, opts.h, c, dt, opts.sponge_fraction);
    let rd = data.radial.as_ref().expect("checked by caller");
    let eps = data.scale;
    let v0: Vec<f64> = g.r.iter().map(|&r| r * eps * rd.phi.value(r)).collect();
    let vt0: Vec<f64> = g.r.iter().map(|&r| r * eps * rd.psi.value(r)).collect();
    let mut v0: Level = vec![v0; m];
    let vt0: Level = vec![vt0; m];
    for lvl in v0.iter_mut() {
        lvl[g.n] = 0.0;
    }

    let mut sol = GridSolution {
        scheme: Scheme::Radial,
        unknowns: m,
        c,
        h: g.h,
        dt,
        cfl: c * dt / g.h,
        points: g.n + 1,
        domain_radius: g.r[g.n],
        physical_radius: plan.physical,
        status: RunStatus::Running,
        snapshots: Vec::new(),
        history: Vec::new(),
    };

    let nonlinear = !sys.is_linear();
    let mut forcing = Forcing::new(sys, g.n + 1);
    let mut f: Level = vec![vec![0.0; g.n + 1]; m];

    // Taylor start with the exact time derivative.
    let with_rhs = sys.has_rhs();
    let max_c = if with_rhs { forcing.eval(&g, 0.0, &v0, &vt0, &mut f) } else { 0.0 };
    if max_c >= 0.5 * c * c {
        sol.status = RunStatus::NanAbort {
            time: 0.0,
            reason: format!("quasilinear coefficient {max_c:.3e} breaks hyperbolicity (limit c²/2)"),
        };
        return Ok(sol);
    }
    let lam = (c * dt / g.h).powi(2);
    let first = |with_f: bool| -> Level {
        (0..m)
            .map(|j| {
                let (v, w) = (&v0[j], &vt0[j]);
                let mut o = vec![0.0; g.n + 1];
                for i in 1..g.n {
                    let src = if with_f { f[j][i] } else { 0.0 };
                    o[i] = v[i] + dt * w[i] + 0.5 * (lam * (v[i + 1] - 2.0 * v[i] + v[i - 1]) + dt * dt * src);
                }
                o
            })
            .collect()
    };
    let v1 = first(with_rhs);
    let lin1 = first(false);

    let mut ring: VecDeque<Level> = VecDeque::from([v0.clone(), v1]);
    let mut lring: VecDeque<Level> = VecDeque::from([v0, lin1]);
    let mut next: Level = vec![vec![0.0; g.n + 1]; m];
    let mut vt: Level = vec![vec![0.0; g.n + 1]; m];
    let spo = plan.steps_per_output;
    let total = plan.outputs * spo + 2;

    for step in 1..total {
        let (prev, cur) = (&ring[ring.len() - 2], &ring[ring.len() - 1]);
        let t = step as f64 * dt;
        if with_rhs {
            for j in 0..m {
                for i in 0..=g.n {
                    vt[j][i] = (cur[j][i] - prev[j][i]) / dt;
                }
            }
            forcing.eval(&g, t, cur, &vt, &mut f);
            leapfrog(&g, c, dt, prev, cur, Some(&f), &mut next);
            for j in 0..m {
                for i in 0..=g.n {
                    vt[j][i] = (next[j][i] - prev[j][i]) / (2.0 * dt);
                }
            }
            let max_c = forcing.eval(&g, t, cur, &vt, &mut f);
            leapfrog(&g, c, dt, prev, cur, Some(&f), &mut next);
            if max_c >= 0.5 * c * c {
                sol.status = RunStatus::NanAbort {
                    time: t,
                    reason: format!("quasilinear coefficient {max_c:.3e} breaks hyperbolicity (limit c²/2)"),
                };
                return Ok(sol);
            }
        } else {
            leapfrog(&g, c, dt, prev, cur, None, &mut next);
        }
        let t_next = (step + 1) as f64 * dt;
        if next.iter().flatten().any(|x| !x.is_finite()) {
            sol.status = RunStatus::NanAbort { time: t_next, reason: "non-finite value".into() };
            return Ok(sol);
        }
        if nonlinear {
            let (lp, lc) = (&lring[lring.len() - 2], &lring[lring.len() - 1]);
            let mut lnext = vec![vec![0.0; g.n + 1]; m];
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
                sol.status = RunStatus::GrowthCertificate { time: t, reason };
                return Ok(sol);
            }
            lring.push_back(lnext);
            if lring.len() > 5 {
                lring.pop_front();
            }
        }
        ring.push_back(next.clone());
        if ring.len() > 5 {
            ring.pop_front();
        }

        let newest = step + 1;
        if newest >= 4 && (newest - 2) % spo == 0 {
            let k = newest - 2;
            let t = k as f64 * dt;
            let (su, sdu) = sups(&g, dt, &ring[1], &ring[2], &ring[3]);
            let linear_sup_du = if nonlinear {
                Some(sups(&g, dt, &lring[1], &lring[2], &lring[3]).1)
            } else {
                None
            };
            sol.history.push(HistoryRow {
                t,
                sup_u: su,
                sup_du: sdu,
                linear_sup_du,
                energy: energy(&g, c, dt, &ring[2], &ring[3]),
            });
            sol.snapshots.push(snapshot(&g, &ring, t, k));
        }
    }
    sol.status = RunStatus::Completed;
    Ok(sol)
}
