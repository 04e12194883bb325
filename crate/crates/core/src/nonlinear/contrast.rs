//! Null versus non-null contrast: `□u = Q_0(u, u)` against `□u = (∂_t u)²`
//! from the same small data over a ladder of amplitudes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::linsolve::{CauchyData, RadialData, RadialProfile};
use crate::nullforms::QuadraticSymbol;

use super::{bootstrap_monitor, evolve, EvolveOptions, RunStatus, Scheme, WaveSystem};

/// Shell profile of the contrast data: amplitude, centre radius, half-width.
pub const CONTRAST_SHELL: (f64, f64, f64) = (60.0, 5.0, 1.5);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    /// `□u = Q_0(u, u; 1)`
    Null,
    /// `□u = (∂_t u)²`
    NonNull,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Null => "null",
            SystemKind::NonNull => "non-null",
        }
    }

    pub fn system(self) -> Result<WaveSystem> {
        let sym = match self {
            SystemKind::Null => QuadraticSymbol::new(1).with_q0(0, 0, 0, 1.0, 1.0),
            SystemKind::NonNull => {
                let mut a = [[0.0; 4]; 4];
                a[0][0] = 1.0;
                QuadraticSymbol::new(1).with_semilinear(0, 0, 0, a)
            }
        };
        WaveSystem::new(sym, 1.0)
    }
}

/// Data of the purely outgoing wave `u = f(r - t)/r`, with `f(s) = a b((s - r0)/w)`
/// and `b` the unit bump `exp(1 - 1/(1 - z²))`: `φ = f(r)/r`, `ψ = -f'(r)/r`.
pub fn outgoing_shell_data(a: f64, r0: f64, w: f64) -> CauchyData {
    let inside = move |q: f64| {
        let z = (q.sqrt() - r0) / w;
        z * z < 1.0
    };
    let shell = move |q: &Jet, derivative: bool| -> Jet {
        if !inside(q.value()) {
            return Jet::zero(q.order());
        }
        let s = q.sqrt();
        let z = (&s - r0) * (1.0 / w);
        let inner = 1.0 - z.square();
        let b = (1.0 - inner.recip()).exp() * a;
        if derivative {
            // -f'(s)/s, with f'(s) = b(z) (-2z/(1 - z²)²) / w.
            &(&(&b * &z) * &inner.square().recip()) * &s.recip() * (2.0 / w)
        } else {
            &b * &s.recip()
        }
    };
    let phi = RadialProfile::new(move |q| shell(q, false));
    let psi = RadialProfile::new(move |q| shell(q, true));
    CauchyData::from_radial(RadialData::new(phi, psi).with_support(r0 + w))
}

/// The contrast data, `outgoing_shell_data` with `CONTRAST_SHELL`; scaled by `ε` per run.
pub fn calibrated_data() -> CauchyData {
    let (a, r0, w) = CONTRAST_SHELL;
    outgoing_shell_data(a, r0, w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub eps: f64,
    pub system: SystemKind,
    pub status: String,
    pub certificate_time: Option<f64>,
    pub max_sup_u: f64,
    /// `max_t sup|∂u| / sup|∂u_lin|` over the stored times.
    pub max_linear_ratio: f64,
    /// `e_{0.75,0}` at `t = 1` and its maximum over the stored times.
    pub bootstrap_at_1: Option<f64>,
    pub bootstrap_max: Option<f64>,
    /// `(t, sup|u|, sup|∂u|)` at the stored times.
    pub history: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub t_final: f64,
    pub rows: Vec<ContrastRow>,
    /// Every null run completed.
    pub null_completed: bool,
    /// The non-null run at the largest `ε` certified growth.
    pub non_null_certified: bool,
    /// Non-null certificate times increase as `ε` decreases (a run without
    /// certificate counts as `+∞`).
    pub monotone: bool,
    pub verdict: bool,
}

/// `ρ` of the bootstrap functional reported per run.
pub const CONTRAST_RHO: f64 = 0.75;

/// Runs both systems for each `ε` (sorted decreasingly) on the same grid.
pub fn null_contrast_experiment(eps_ladder: &[f64], opts: &EvolveOptions) -> Result<ContrastReport> {
    if eps_ladder.is_empty() || eps_ladder.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::argument("ε ladder must be non-empty and non-negative"));
    }
    if opts.scheme != Scheme::Radial {
        return Err(Error::argument("the contrast experiment uses the radial scheme"));
    }
    let mut ladder = eps_ladder.to_vec();
    ladder.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::new();
    for kind in [SystemKind::Null, SystemKind::NonNull] {
        let sys = kind.system()?;
        for &eps in &ladder {
            let sol = evolve(&sys, &calibrated_data().with_scale(eps), opts)?;
            let max_sup_u = sol.history.iter().map(|h| h.sup_u).fold(0.0, f64::max);
            let max_linear_ratio = sol
                .history
                .iter()
                .filter_map(|h| h.linear_sup_du.filter(|l| *l > 0.0).map(|l| h.sup_du / l))
                .fold(0.0, f64::max);
            let (bootstrap_at_1, bootstrap_max) = if sol.snapshots.is_empty() {
                (None, None)
            } else {
                let tr = bootstrap_monitor(&sol, CONTRAST_RHO, 0)?;
                (tr.value_near(1.0), Some(tr.max()))
            };
            rows.push(ContrastRow {
                eps,
                system: kind,
                status: sol.status.label().to_string(),
                certificate_time: sol.status.certificate_time(),
                max_sup_u,
                max_linear_ratio,
                bootstrap_at_1,
                bootstrap_max,
                history: sol.history.iter().map(|h| (h.t, h.sup_u, h.sup_du)).collect(),
            });
        }
    }
    let null_completed = rows
        .iter()
        .filter(|r| r.system == SystemKind::Null)
        .all(|r| r.status == RunStatus::Completed.label());
    let times: Vec<f64> = rows
        .iter()
        .filter(|r| r.system == SystemKind::NonNull)
        .map(|r| r.certificate_time.unwrap_or(f64::INFINITY))
        .collect();
    let non_null_certified = times[0].is_finite();
    let monotone = times.windows(2).all(|w| w[1] > w[0] || (w[0].is_infinite() && w[1].is_infinite()));
    Ok(ContrastReport {
        t_final: opts.t_final,
        rows,
        null_completed,
        non_null_certified,
        monotone,
        verdict: null_completed && non_null_certified && monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsolve::radial_free;

    #[test]
    fn shell_data_are_purely_outgoing() {
        let data = outgoing_shell_data(2.0, 5.0, 1.5);
        let rd = data.radial.clone().unwrap();
        for (t, r) in [(1.0, 5.5), (3.0, 7.2), (4.0, 2.0)] {
            let z: f64 = (r - t - 5.0) / 1.5;
            let f = if z * z < 1.0 { 2.0 * (1.0 - 1.0 / (1.0 - z * z)).exp() } else { 0.0 };
            assert!((radial_free(&rd, 1.0, t, r).unwrap() - f / r).abs() < 1e-9, "({t}, {r})");
        }
    }

    #[test]
    fn zero_amplitude_runs_are_identical_and_zero() {
        let opts = EvolveOptions { t_final: 3.0, h: 0.1, ..Default::default() };
        let rep = null_contrast_experiment(&[0.0], &opts).unwrap();
        assert_eq!(rep.rows.len(), 2);
        for row in &rep.rows {
            assert_eq!(row.status, "completed");
            assert_eq!(row.bootstrap_max, Some(0.0));
            assert!(row.history.iter().all(|h| h.1 == 0.0 && h.2 == 0.0));
        }
        assert!(!rep.non_null_certified);
    }

    #[test]
    fn ladder_must_be_non_negative() {
        assert!(null_contrast_experiment(&[0.1, -0.1], &EvolveOptions::default()).is_err());
        assert!(null_contrast_experiment(&[], &EvolveOptions::default()).is_err());
    }
}
