//! Finite-difference evolution of `□_c u_i = F_i(u, ∂u, ∇_x∂u)`: a radial
//! leapfrog scheme in `v = ru`, a small cartesian scheme, the bootstrap
//! functional `e_{ρ,k}`, energy traces and the null/non-null contrast runs.

mod cartesian;
mod checkpoint;
mod contrast;
mod monitor;
mod radial;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsolve::CauchyData;
use crate::nullforms::QuadraticSymbol;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use contrast::{
    calibrated_data, null_contrast_experiment, outgoing_shell_data, ContrastReport, ContrastRow, SystemKind, CONTRAST_RHO,
    CONTRAST_SHELL,
};
pub use monitor::{bootstrap_monitor, chi, cone_dplus_exponent, energy_trace, growth_exponent, write_trace_csv, BootstrapTrace};

/// Cubic and higher terms `R_i(u, ∂u)`, returned per equation.
pub type Remainder = dyn Fn(&[f64], &[[f64; 4]]) -> Vec<f64> + Send + Sync;

/// Prescribed forcing `g_i(t, x)`, added to `F_i` (used for manufactured solutions).
pub type SourceFn = dyn Fn(f64, [f64; 3]) -> Vec<f64> + Send + Sync;

/// `□_c u_i = F_i`, with `F` given by a quadratic symbol and an optional remainder.
#[derive(Clone)]
pub struct WaveSystem {
    pub c: f64,
    pub symbol: QuadraticSymbol,
    pub remainder: Option<Arc<Remainder>>,
    pub source: Option<Arc<SourceFn>>,
    /// Quasilinear terms grouped by `[i, j, k, a]`, for the hyperbolicity check.
    groups: Vec<([usize; 4], Vec<usize>)>,
}

impl fmt::Debug for WaveSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaveSystem")
            .field("c", &self.c)
            .field("symbol", &self.symbol)
            .field("remainder", &self.remainder.is_some())
            .field("source", &self.source.is_some())
            .finish()
    }
}

/// Second derivatives `∂_k ∂_a u_j`, indexed `[j][k - 1][a]`.
pub type SecondDerivs = [[f64; 4]; 3];

impl WaveSystem {
    /// Rejects symbols violating `c^{ij}_{ka} = c^{ji}_{ka}` (or otherwise invalid).
    pub fn new(symbol: QuadraticSymbol, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::argument(format!("speed must be positive, got {c}")));
        }
        symbol.validate()?;
        let mut groups: Vec<([usize; 4], Vec<usize>)> = Vec::new();
        for (n, t) in symbol.quasilinear.iter().enumerate() {
            match groups.iter_mut().find(|(k, _)| *k == t.index) {
                Some((_, v)) => v.push(n),
                None => groups.push((t.index, vec![n])),
            }
        }
        Ok(WaveSystem { c, symbol, remainder: None, source: None, groups })
    }

    pub fn free(m: usize, c: f64) -> Result<Self> {
        Self::new(QuadraticSymbol::new(m), c)
    }

    pub fn with_remainder(mut self, r: impl Fn(&[f64], &[[f64; 4]]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.remainder = Some(Arc::new(r));
        self
    }

    pub fn with_source(mut self, g: impl Fn(f64, [f64; 3]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.source = Some(Arc::new(g));
        self
    }

    pub fn unknowns(&self) -> usize {
        self.symbol.unknowns
    }

    pub fn is_linear(&self) -> bool {
        self.symbol.semilinear.iter().all(|t| t.tensor.iter().all(|&x| x == 0.0))
            && self.symbol.lower_order.iter().all(|t| t.coeff == 0.0)
            && self.symbol.quasilinear.iter().all(|t| t.coeff == 0.0)
            && self.remainder.is_none()
    }

    fn coeff_value(&self, n: usize, u: &[f64], du: &[[f64; 4]]) -> f64 {
        let t = &self.symbol.quasilinear[n];
        t.coeff
            * match t.derivative {
                Some(b) => du[t.unknown][b],
                None => u[t.unknown],
            }
    }

    /// `F_i(u, ∂u, ∇_x∂u)` for every equation.
    pub fn rhs(&self, u: &[f64], du: &[[f64; 4]], ddu: &[SecondDerivs], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.symbol.semilinear_value(i, u, du);
        }
        for n in 0..self.symbol.quasilinear.len() {
            let [i, j, k, a] = self.symbol.quasilinear[n].index;
            out[i] += self.coeff_value(n, u, du) * ddu[j][k - 1][a];
        }
        if let Some(r) = &self.remainder {
            for (o, v) in out.iter_mut().zip(r(u, du)) {
                *o += v;
            }
        }
    }

    /// Whether any right-hand side, nonlinear or prescribed, has to be evaluated.
    pub(crate) fn has_rhs(&self) -> bool {
        !self.is_linear() || self.source.is_some()
    }

    pub(crate) fn add_source(&self, t: f64, x: [f64; 3], out: &mut [f64]) {
        if let Some(g) = &self.source {
            for (o, v) in out.iter_mut().zip(g(t, x)) {
                *o += v;
            }
        }
    }

    /// `max |c^{ij}_{ka}(u, ∂u)|`.
    pub fn max_quasilinear(&self, u: &[f64], du: &[[f64; 4]]) -> f64 {
        self.groups
            .iter()
            .map(|(_, ns)| ns.iter().map(|&n| self.coeff_value(n, u, du)).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Checks that `F` maps radial functions to radial functions, by comparing
    /// `F` at `r e_1` and at `r ω` for random radial jets and directions.
    pub fn check_radial(&self) -> Result<()> {
        let m = self.unknowns();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let dirs = [[0.0, 1.0, 0.0], [0.0, 0.6, 0.8], [0.48, 0.6, 0.64]];
        for _ in 0..8 {
            let r: f64 = rng.gen_range(0.5..3.0);
            let prof: Vec<[f64; 5]> = (0..m).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
            let eval = |w: [f64; 3]| {
                let (u, du, ddu) = radial_to_cartesian_derivs(&prof, r, w);
                let mut out = vec![0.0; m];
                self.rhs(&u, &du, &ddu, &mut out);
                out
            };
            let base = eval([1.0, 0.0, 0.0]);
            if let Some(g) = &self.source {
                let g0 = g(0.7, [r, 0.0, 0.0]);
                for w in dirs {
                    for (a, b) in g0.iter().zip(g(0.7, [r * w[0], r * w[1], r * w[2]])) {
                        if (a - b).abs() > 1e-10 * (1.0 + a.abs()) {
                            return Err(Error::argument("source is not radial; the radial scheme does not apply"));
                        }
                    }
                }
            }
            for w in dirs {
                for (a, b) in base.iter().zip(eval(w)) {
                    if (a - b).abs() > 1e-10 * (1.0 + a.abs()) {
                        return Err(Error::argument(
                            "nonlinearity is not rotation invariant; the radial scheme does not apply",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Cartesian derivatives at `r ω` of radial functions given by
/// `[u, u_t, u_r, u_tr, u_rr]` per unknown.
pub(crate) fn radial_to_cartesian_derivs(
    prof: &[[f64; 5]],
    r: f64,
    w: [f64; 3],
) -> (Vec<f64>, Vec<[f64; 4]>, Vec<SecondDerivs>) {
    let mut u = Vec::with_capacity(prof.len());
    let mut du = Vec::with_capacity(prof.len());
    let mut ddu = Vec::with_capacity(prof.len());
    for p in prof {
        let [v, vt, vr, vtr, vrr] = *p;
        u.push(v);
        du.push([vt, w[0] * vr, w[1] * vr, w[2] * vr]);
        let mut d = [[0.0; 4]; 3];
        for k in 0..3 {
            d[k][0] = w[k] * vtr;
            for l in 0..3 {
                let delta = if k == l { 1.0 } else { 0.0 };
                d[k][l + 1] = w[k] * w[l] * (vrr - vr / r) + delta * vr / r;
            }
        }
        ddu.push(d);
    }
    (u, du, ddu)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Radial symmetry, leapfrog in `v = ru` on `0 ≤ r ≤ R`.
    Radial,
    /// Full 3-D leapfrog on a cube, at most 128 points per axis.
    Cartesian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunStatus {
    Running,
    Completed,
    GrowthCertificate { time: f64, reason: String },
    NanAbort { time: f64, reason: String },
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Running => "running",
            RunStatus::Completed => "completed",
            RunStatus::GrowthCertificate { .. } => "growth-certificate",
            RunStatus::NanAbort { .. } => "nan-abort",
        }
    }

    pub fn certificate_time(&self) -> Option<f64> {
        match self {
            RunStatus::GrowthCertificate { time, .. } => Some(*time),
            _ => None,
        }
    }
}

/// Largest number of points per axis of the cartesian scheme.
pub const MAX_CARTESIAN_POINTS: usize = 128;

/// Grid and run controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub scheme: Scheme,
    pub h: f64,
    pub t_final: f64,
    /// `c Δt / h`; at most 0.9.
    pub cfl: f64,
    /// Spacing of stored snapshots and history rows; `Δt` divides it.
    pub output_dt: f64,
    /// Outer radius (radial) or half-width of the cube; by default
    /// `(R + cT + 4) / 0.8` so the physical cone stays out of the sponge.
    pub domain_radius: Option<f64>,
    /// Radius outside which the data are negligible, when not declared by the data.
    pub data_radius: Option<f64>,
    pub sponge_fraction: f64,
    /// Certificate when `sup|∂u|` exceeds this multiple of the linear evolution's.
    pub growth_factor: f64,
    /// Certificate when `sup|u|` exceeds this.
    pub u_threshold: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            scheme: Scheme::Radial,
            h: 0.05,
            t_final: 50.0,
            cfl: 0.5,
            output_dt: 1.0,
            domain_radius: None,
            data_radius: None,
            sponge_fraction: 0.2,
            growth_factor: 10.0,
            u_threshold: 1.0,
        }
    }
}

/// Fields at one output time: `levels[ℓ][i][cell]` holds `u_i` at time
/// index `time_index + ℓ - centre`, where `centre = levels.len() / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub time_index: usize,
    pub levels: Vec<Vec<Vec<f64>>>,
}

impl Snapshot {
    pub fn centre(&self) -> &[Vec<f64>] {
        &self.levels[self.levels.len() / 2]
    }
}

/// Scalars recorded at each output time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub t: f64,
    pub sup_u: f64,
    /// `sup (|∂_t u| + |∇u|)` over the grid, summed over unknowns.
    pub sup_du: f64,
    /// The same for the linear evolution of the same data, when tracked.
    pub linear_sup_du: Option<f64>,
    /// Staggered discrete energy norm `(∫ u_t² + c²|∇u|²)^{1/2}`.
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub scheme: Scheme,
    pub unknowns: usize,
    pub c: f64,
    pub h: f64,
    pub dt: f64,
    pub cfl: f64,
    /// Points per axis (radial: `r_i = i h`, cartesian: `x_i = -L + i h`).
    pub points: usize,
    pub domain_radius: f64,
    /// Radius reached by the physical cone from the data, `R + cT`.
    pub physical_radius: f64,
    pub status: RunStatus,
    pub snapshots: Vec<Snapshot>,
    pub history: Vec<HistoryRow>,
}

impl GridSolution {
    /// Radius of cell `i` (radial) or coordinates of cell `(i, j, k)` (cartesian).
    pub fn radius_of(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.domain_radius + i as f64 * self.h
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| (s.t - t).abs() < 0.5 * self.dt)
    }
}

/// Radius beyond which both profiles stay below `1e-14` of their peak.
fn data_extent(data: &CauchyData, opts: &EvolveOptions) -> Result<f64> {
    if let Some(r) = opts.data_radius.or(data.support_radius) {
        return Ok(r);
    }
    let Some(rd) = &data.radial else {
        return Err(Error::argument("non-radial data need a declared data radius"));
    };
    let samples: Vec<(f64, f64)> = (0..=4000)
        .map(|i| {
            let r = i as f64 * 0.025;
            (r, rd.phi.value(r).abs().max(rd.psi.value(r).abs()))
        })
        .collect();
    let peak = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(samples
        .iter()
        .rev()
        .find(|s| s.1 > 1e-14 * peak)
        .map_or(1.0, |s| s.0 + 0.025))
}

struct Plan {
    dt: f64,
    steps_per_output: usize,
    outputs: usize,
    domain: f64,
    physical: f64,
}

fn plan(system: &WaveSystem, data: &CauchyData, opts: &EvolveOptions) -> Result<Plan> {
    let c = system.c;
    if !(opts.h > 0.0 && opts.t_final > 0.0 && opts.output_dt > 0.0) {
        return Err(Error::argument("h, t_final and output_dt must be positive"));
    }
    if !(opts.cfl > 0.0 && opts.cfl <= 0.9) {
        return Err(Error::argument(format!("CFL ratio must lie in (0, 0.9], got {}", opts.cfl)));
    }
    if !(0.0..1.0).contains(&opts.sponge_fraction) {
        return Err(Error::argument("sponge fraction must lie in [0, 1)"));
    }
    let steps_per_output = (opts.output_dt * c / (opts.cfl * opts.h)).ceil().max(2.0) as usize;
    let dt = opts.output_dt / steps_per_output as f64;
    let outputs = (opts.t_final / opts.output_dt + 1e-9).floor() as usize;
    let extent = data_extent(data, opts)?;
    let physical = extent + c * opts.t_final;
    let domain = opts
        .domain_radius
        .unwrap_or((physical + 4.0) / (1.0 - opts.sponge_fraction));
    Ok(Plan { dt, steps_per_output, outputs, domain, physical })
}

/// Evolves the system from `u = εφ`, `∂_t u = εψ` (the data's scale is `ε`),
/// applying the data to every unknown.
pub fn evolve(system: &WaveSystem, data: &CauchyData, opts: &EvolveOptions) -> Result<GridSolution> {
    let p = plan(system, data, opts)?;
    match opts.scheme {
        Scheme::Radial => {
            system.check_radial()?;
            if data.radial.is_none() {
                return Err(Error::argument("the radial scheme needs radial Cauchy data"));
            }
            radial::run(system, data, opts, &p)
        }
        Scheme::Cartesian => cartesian::run(system, data, opts, &p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsolve::{radial_free, RadialData, RadialProfile};
    use crate::nullforms::QuasilinearTerm;

    fn gaussian(eps: f64) -> CauchyData {
        CauchyData::from_radial(RadialData::new(RadialProfile::gaussian(1.0, 1.0), RadialProfile::zero())).with_scale(eps)
    }

    #[test]
    fn symmetry_guard_rejects_asymmetric_coefficients() {
        let sym = QuadraticSymbol::new(2).with_quasilinear(QuasilinearTerm {
            index: [0, 1, 1, 1],
            unknown: 0,
            derivative: Some(0),
            coeff: 0.3,
        });
        assert!(matches!(WaveSystem::new(sym, 1.0), Err(Error::Argument(_))));
    }

    #[test]
    fn radial_guard() {
        let q0 = WaveSystem::new(QuadraticSymbol::new(1).with_q0(0, 0, 0, 1.0, 1.0), 1.0).unwrap();
        assert!(q0.check_radial().is_ok());
        let skew = WaveSystem::new(QuadraticSymbol::new(2).with_qab(0, 0, 1, 0, 1, 1.0), 1.0).unwrap();
        assert!(skew.check_radial().is_err());
    }

    #[test]
    fn zero_data_stay_zero() {
        let sys = WaveSystem::new(QuadraticSymbol::new(1).with_q0(0, 0, 0, 1.0, 1.0), 1.0).unwrap();
        let opts = EvolveOptions { t_final: 5.0, h: 0.1, ..Default::default() };
        let sol = evolve(&sys, &gaussian(0.0), &opts).unwrap();
        assert_eq!(sol.status, RunStatus::Completed);
        assert!(sol.snapshots.iter().all(|s| s.levels.iter().flatten().flatten().all(|&v| v == 0.0)));
    }

    #[test]
    fn free_evolution_matches_oracle() {
        let data = gaussian(1.0);
        let rd = data.radial.clone().unwrap();
        let sys = WaveSystem::free(1, 1.0).unwrap();
        let mut errs = Vec::new();
        for h in [0.1, 0.05] {
            let opts = EvolveOptions { t_final: 6.0, h, ..Default::default() };
            let sol = evolve(&sys, &data, &opts).unwrap();
            let snap = sol.snapshot_at(6.0).unwrap();
            let mut err: f64 = 0.0;
            for (i, &u) in snap.centre()[0].iter().enumerate() {
                let r = sol.radius_of(i);
                if r <= sol.physical_radius {
                    err = err.max((u - radial_free(&rd, 1.0, 6.0, r).unwrap()).abs());
                }
            }
            errs.push(err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!((1.8..=2.2).contains(&order), "errors {errs:?}, order {order}");
    }

    #[test]
    fn cfl_limit_enforced() {
        let sys = WaveSystem::free(1, 1.0).unwrap();
        let opts = EvolveOptions { cfl: 0.95, ..Default::default() };
        assert!(evolve(&sys, &gaussian(1.0), &opts).is_err());
    }
}
