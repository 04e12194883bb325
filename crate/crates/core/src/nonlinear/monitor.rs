//! Monitors on grid solutions: the bootstrap functional `e_{ρ,k}(t)` and
//! energy traces, from jets reconstructed by finite differences.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decaylab::{fit_decay_exponent, ExponentFit};
use crate::error::{Error, Result};
use crate::fields::{for_each_z, local_norm_jet, Point, VectorFieldOp, R_MIN};
use crate::jet::{monomials, Jet};
use crate::linsolve::radial_to_cartesian;
use crate::weights::jb;

use super::{GridSolution, Scheme, Snapshot};

/// Cut-off of the bootstrap functional: 1 iff `|x| > (1 + t)/2`.
pub fn chi(t: f64, r: f64) -> f64 {
    if r > 0.5 * (1.0 + t) {
        1.0
    } else {
        0.0
    }
}

/// Fornberg weights for derivatives `0..=m` at `z` from values at `x`.
pub(crate) fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Highest jet order available from a snapshot of this scheme.
fn jet_order_limit(scheme: Scheme) -> usize {
    match scheme {
        Scheme::Radial => 4,
        Scheme::Cartesian => 2,
    }
}

/// Reconstructs spacetime jets of each unknown from stored levels.
struct JetBuilder<'a> {
    sol: &'a GridSolution,
    order: usize,
    /// `[derivative order][stencil offset]` in time and space.
    wt: Vec<Vec<f64>>,
    wx: Vec<Vec<f64>>,
    half: usize,
}

impl<'a> JetBuilder<'a> {
    fn new(sol: &'a GridSolution, order: usize) -> Self {
        let half = match sol.scheme {
            Scheme::Radial => 2,
            Scheme::Cartesian => 1,
        };
        let offs: Vec<f64> = (-(half as i64)..=half as i64).map(|o| o as f64).collect();
        let wt = fd_weights(0.0, &offs.iter().map(|o| o * sol.dt).collect::<Vec<_>>(), order);
        let wx = fd_weights(0.0, &offs.iter().map(|o| o * sol.h).collect::<Vec<_>>(), order);
        JetBuilder { sol, order, wt, wx, half }
    }

    /// Jet at radial cell `i` in direction `omega`.
    fn radial(&self, snap: &Snapshot, unknown: usize, i: usize, omega: [f64; 3]) -> Result<Jet> {
        let k = self.order;
        let w = 2 * self.half + 1;
        // Time derivatives at the five radii around i, using u(-r) = u(r).
        let mut tder = vec![vec![0.0; w]; k + 1];
        for (o, col) in (0..w).map(|o| (o, (i as i64 + o as i64 - self.half as i64).unsigned_abs() as usize)) {
            for (p, row) in tder.iter_mut().enumerate() {
                row[o] = (0..w).map(|l| self.wt[p][l] * snap.levels[l][unknown][col]).sum();
            }
        }
        let coeffs = monomials(k)
            .iter()
            .map(|e| {
                if e[2] != 0 || e[3] != 0 {
                    return 0.0;
                }
                let (p, q) = (e[0] as usize, e[1] as usize);
                let d: f64 = (0..w).map(|o| self.wx[q][o] * tder[p][o]).sum();
                d / (factorial(p) * factorial(q))
            })
            .collect();
        let jet_tr = Jet::from_taylor(k, coeffs)?;
        let r = self.sol.radius_of(i);
        radial_to_cartesian(&jet_tr, Point::polar(snap.t, r, omega))
    }

    /// Jet at cartesian cell `(i, j, l)`.
    fn cartesian(&self, snap: &Snapshot, unknown: usize, idx: [usize; 3]) -> Result<Jet> {
        let n = self.sol.points;
        let k = self.order;
        let flat = |a: [i64; 3]| ((a[0] as usize * n) + a[1] as usize) * n + a[2] as usize;
        let coeffs = monomials(k)
            .iter()
            .map(|e| {
                let mut sum = 0.0;
                for ot in 0..3 {
                    let wt = self.wt[e[0] as usize][ot];
                    if wt == 0.0 {
                        continue;
                    }
                    for ox in 0..3 {
                        for oy in 0..3 {
                            for oz in 0..3 {
                                let w = wt
                                    * self.wx[e[1] as usize][ox]
                                    * self.wx[e[2] as usize][oy]
                                    * self.wx[e[3] as usize][oz];
                                if w != 0.0 {
                                    let a = [
                                        idx[0] as i64 + ox as i64 - 1,
                                        idx[1] as i64 + oy as i64 - 1,
                                        idx[2] as i64 + oz as i64 - 1,
                                    ];
                                    sum += w * snap.levels[ot][unknown][flat(a)];
                                }
                            }
                        }
                    }
                }
                sum / e.iter().map(|&x| factorial(x as usize)).product::<f64>()
            })
            .collect();
        Jet::from_taylor(k, coeffs)
    }
}

/// Sample points of a snapshot: cartesian cell indices (or radial cell, direction)
/// inside the physical cone and away from the sponge and the origin.
enum Sample {
    Radial(usize, [f64; 3]),
    Cartesian([usize; 3]),
}

fn samples(sol: &GridSolution) -> Vec<(Sample, Point)> {
    let reach = sol.physical_radius.min((1.0 - 0.2) * sol.domain_radius);
    match sol.scheme {
        Scheme::Radial => {
            let stride = ((0.1 / sol.h).floor() as usize).max(1);
            let diag = [1.0 / 3f64.sqrt(); 3];
            (1..sol.points - 2)
                .step_by(stride)
                .filter(|&i| {
                    let r = sol.radius_of(i);
                    r >= R_MIN && r <= reach
                })
                .flat_map(|i| {
                    [[1.0, 0.0, 0.0], diag].map(|w| {
                        let r = sol.radius_of(i);
                        (Sample::Radial(i, w), Point::polar(0.0, r, w))
                    })
                })
                .collect()
        }
        Scheme::Cartesian => {
            let n = sol.points;
            let stride = (n / 32).max(1);
            let mut out = Vec::new();
            for i in (1..n - 1).step_by(stride) {
                for j in (1..n - 1).step_by(stride) {
                    for l in (1..n - 1).step_by(stride) {
                        let x = [sol.coord(i), sol.coord(j), sol.coord(l)];
                        let p = Point::new(0.0, x);
                        if p.r() >= R_MIN && p.r() <= reach {
                            out.push((Sample::Cartesian([i, j, l]), p));
                        }
                    }
                }
            }
            out
        }
    }
}

/// `e_{ρ,k}(t)` at each stored time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapTrace {
    pub rho: f64,
    pub k: usize,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl BootstrapTrace {
    /// Value at the stored time nearest to `t`.
    pub fn value_near(&self, t: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.values)
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .map(|(_, &v)| v)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
        w.write_record(["t", "rho", "k", "e"]).map_err(|e| Error::Data(e.to_string()))?;
        for (t, v) in self.times.iter().zip(&self.values) {
            w.write_record([t.to_string(), self.rho.to_string(), self.k.to_string(), v.to_string()])
                .map_err(|e| Error::Data(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `e_{ρ,k}(t) = sup_x [⟨t+|x|⟩⟨t-|x|⟩^ρ |u|_{k+2} + ⟨|x|⟩⟨t-|x|⟩^{ρ+1} |∂u|_{k+1}
///  + χ ⟨t+|x|⟩² ⟨t-|x|⟩^ρ Σ_{|α|≤k} |D_+ Z^α u|]`, with `t` read as `ct` and
/// norms summed over unknowns. Radial solutions allow `k ≤ 2`, cartesian ones `k = 0`.
pub fn bootstrap_monitor(sol: &GridSolution, rho: f64, k: usize) -> Result<BootstrapTrace> {
    let need = k + 2;
    let avail = jet_order_limit(sol.scheme);
    if need > avail {
        return Err(Error::Order { requested: need, available: avail });
    }
    let builder = JetBuilder::new(sol, need);
    let pts = samples(sol);
    let c = sol.c;
    let dplus = VectorFieldOp::DPlus(c);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for snap in &sol.snapshots {
        let t = snap.t;
        let mut sup: f64 = 0.0;
        for (s, p0) in &pts {
            let p = Point::new(t, p0.x);
            let r = p.r();
            let ct = c * t;
            let (plus, minus) = (jb(ct + r), jb(ct - r));
            let cut = chi(ct, r);
            let mut e = 0.0;
            for unknown in 0..sol.unknowns {
                let jet = match s {
                    Sample::Radial(i, w) => builder.radial(snap, unknown, *i, *w)?,
                    Sample::Cartesian(idx) => builder.cartesian(snap, unknown, *idx)?,
                };
                let mut du = 0.0;
                for a in 0..4 {
                    du += local_norm_jet(&jet.d(a)?, k + 1, p)?;
                }
                e += plus * minus.powf(rho) * local_norm_jet(&jet, need, p)?;
                e += jb(r) * minus.powf(rho + 1.0) * du;
                if cut > 0.0 {
                    let mut good = 0.0;
                    let mut err = None;
                    for_each_z(&jet, k, p, &mut |alpha, z| {
                        if alpha.len() <= k {
                            match dplus.apply_jet(z, p) {
                                Ok(d) => good += d.value().abs(),
                                Err(e) => err = Some(e),
                            }
                        }
                    })?;
                    if let Some(e) = err {
                        return Err(e);
                    }
                    e += plus * plus * minus.powf(rho) * good;
                }
            }
            sup = sup.max(e);
        }
        times.push(t);
        values.push(sup);
    }
    Ok(BootstrapTrace { rho, k, times, values })
}

/// `‖∂u(t)‖_s`, the discrete L² norm of `|∂u|_s = Σ_a |∂_a u|_s`, at each stored
/// time. `s = 0` uses the staggered leapfrog energy `(∫ u_t² + c²|∇u|²)^{1/2}`.
pub fn energy_trace(sol: &GridSolution, s: usize) -> Result<Vec<(f64, f64)>> {
    if s == 0 {
        return Ok(sol.history.iter().map(|h| (h.t, h.energy)).collect());
    }
    let avail = jet_order_limit(sol.scheme);
    if s + 1 > avail {
        return Err(Error::Order { requested: s + 1, available: avail });
    }
    let builder = JetBuilder::new(sol, s + 1);
    let reach = (1.0 - 0.2) * sol.domain_radius;
    let mut out = Vec::new();
    for snap in &sol.snapshots {
        let mut sum = 0.0;
        let norm = |jet: &Jet, p: Point| -> Result<f64> {
            let mut v = 0.0;
            for a in 0..4 {
                v += local_norm_jet(&jet.d(a)?, s, p)?;
            }
            Ok(v)
        };
        match sol.scheme {
            Scheme::Radial => {
                for i in 1..sol.points - 2 {
                    let r = sol.radius_of(i);
                    if r > reach {
                        break;
                    }
                    let p = Point::polar(snap.t, r, [1.0, 0.0, 0.0]);
                    for unknown in 0..sol.unknowns {
                        let v = norm(&builder.radial(snap, unknown, i, [1.0, 0.0, 0.0])?, p)?;
                        sum += v * v * 4.0 * std::f64::consts::PI * r * r * sol.h;
                    }
                }
            }
            Scheme::Cartesian => {
                let n = sol.points;
                let stride = (n / 32).max(1);
                let cell = (stride as f64 * sol.h).powi(3);
                for i in (1..n - 1).step_by(stride) {
                    for j in (1..n - 1).step_by(stride) {
                        for l in (1..n - 1).step_by(stride) {
                            let p = Point::new(snap.t, [sol.coord(i), sol.coord(j), sol.coord(l)]);
                            for unknown in 0..sol.unknowns {
                                let v = norm(&builder.cartesian(snap, unknown, [i, j, l])?, p)?;
                                sum += v * v * cell;
                            }
                        }
                    }
                }
            }
        }
        out.push((snap.t, sum.sqrt()));
    }
    Ok(out)
}

/// Least-squares `γ` in `E(t) ≈ A (1 + t)^γ`.
pub fn growth_exponent(trace: &[(f64, f64)]) -> Result<f64> {
    if trace.len() < 2 {
        return Err(Error::argument("growth exponent needs at least two samples"));
    }
    if trace.iter().any(|&(_, e)| !(e > 0.0 && e.is_finite())) {
        return Err(Error::Data("energy trace must be positive and finite".into()));
    }
    let xs: Vec<f64> = trace.iter().map(|&(t, _)| (1.0 + t).ln()).collect();
    let ys: Vec<f64> = trace.iter().map(|&(_, e)| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Data("energy trace needs distinct times".into()));
    }
    Ok(sxy / sxx)
}

/// Fits `p` in `sup_{|r - ct| ≤ band} Σ_i |D_{+,c} u_i| ≈ A t^{-p}` over the
/// radial snapshots with `t ≥ t_min`.
pub fn cone_dplus_exponent(sol: &GridSolution, band: f64, t_min: f64) -> Result<ExponentFit> {
    if sol.scheme != Scheme::Radial {
        return Err(Error::argument("cone exponent needs a radial solution"));
    }
    let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
    let reach = sol.physical_radius.min(0.8 * sol.domain_radius);
    let mut samples = Vec::new();
    for snap in sol.snapshots.iter().filter(|s| s.t >= t_min) {
        let ct = sol.c * snap.t;
        let lo = ((ct - band).max(sol.h) / sol.h).ceil() as usize;
        let hi = (((ct + band).min(reach)) / sol.h).floor() as usize;
        let mut sup: f64 = 0.0;
        for i in lo.max(2)..=hi.min(sol.points - 3) {
            let mut v = 0.0;
            for u in 0..sol.unknowns {
                let ut: f64 = (0..5).map(|l| w[1][l] * snap.levels[l][u][i]).sum::<f64>() / sol.dt;
                let ur: f64 = (0..5).map(|o| w[1][o] * snap.levels[2][u][i + o - 2]).sum::<f64>() / sol.h;
                v += (ut + sol.c * ur).abs();
            }
            sup = sup.max(v);
        }
        samples.push((snap.t, sup));
    }
    fit_decay_exponent(&samples, false)
}

/// Writes `t,value` rows.
pub fn write_trace_csv(path: &Path, header: [&str; 2], rows: &[(f64, f64)]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{},{}", header[0], header[1])?;
    for (t, v) in rows {
        writeln!(f, "{t},{v}")?;
    }
    Ok(())
}
